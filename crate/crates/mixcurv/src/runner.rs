//! Batch orchestration: calibrate the formula conventions once, sweep
//! every requested scenario over a grid plus seeded random points,
//! evaluate the applicable identities, hypothesis statistics,
//! verdicts, map classification, and expected facts, and assemble the
//! serializable report.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::catalog::{self, ExpectedFact, Scenario};
use crate::error::{GeomError, Result};
use crate::expr::parse_expr;
use crate::geometry::VectorField;
use crate::identities::{
    calibrate, eval_split_point, split_identity_outcome, ConformalPair, IdentityId, MetricPair,
    PointOutcome, SignVariant, SplitConfig,
};
use crate::maps::{classify_submersion, conformal_factor, projective_psi};
use crate::quadrature;
use crate::report::{
    ClassificationReport, ConfigEcho, FactReport, FlagReport, HypothesisReport,
    IdentityAccumulator, IdentityReport, Report, ResolverRecord, ScenarioReport, VerdictReport,
    NON_EXISTENCE_THRESHOLD, SCHEMA_VERSION, SPLIT_THRESHOLD,
};

/// Random sweep points reused for field-comparison facts and map
/// classification (first few of the scenario's random stream).
const FACT_SUBSET_RANDOM: usize = 20;
/// Coarse per-axis grid joined with those random points.
const FACT_SUBSET_GRID: usize = 5;
/// Quadrature facts run with at least this many nodes per axis so
/// integral oracles stay inside their stated tolerances at the
/// default grid.
const MIN_QUADRATURE_N: usize = 64;
/// Cap on recorded per-scenario error strings.
const MAX_ERRORS: usize = 12;

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Scenario names to run; `None` runs the whole catalog.
    pub scenario_names: Option<Vec<String>>,
    /// Grid nodes per chart axis for the identity sweep.
    pub grid_n: usize,
    /// Max |residual| an evaluated identity may reach and still pass.
    pub tol: f64,
    /// Hypothesis gate threshold for the specialized identities.
    pub gate_tol: f64,
    /// Seeded random interior points added to the sweep.
    pub points: usize,
    pub seed: u64,
    /// Forced sign of the squared horizontal mean-curvature term;
    /// `None` lets the calibration probes decide.
    pub forced_sign: Option<SignVariant>,
    /// Extra scenario directory; same-name files replace catalog
    /// entries.
    pub scenario_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario_names: None,
            grid_n: 33,
            tol: 1e-8,
            gate_tol: 1e-8,
            points: 100,
            seed: 42,
            forced_sign: None,
            scenario_dir: None,
        }
    }
}

impl RunConfig {
    fn xi_h_sign_str(&self) -> String {
        match self.forced_sign {
            None => "auto".to_string(),
            Some(v) => v.as_str().to_string(),
        }
    }
}

/// Run the full pipeline and assemble the report. Evaluation problems
/// inside a scenario are recorded in its report block; only
/// configuration-level problems (unknown names, unreadable scenario
/// directory) abort the run.
pub fn run(config: &RunConfig) -> Result<Report> {
    if config.grid_n == 0 {
        return Err(GeomError::InvalidConfig(
            "grid must have at least 1 node".into(),
        ));
    }
    if !(config.tol.is_finite() && config.tol > 0.0)
        || !(config.gate_tol.is_finite() && config.gate_tol > 0.0)
    {
        return Err(GeomError::InvalidConfig(
            "tolerances must be finite and positive".into(),
        ));
    }
    let calibration = calibrate(config.forced_sign)?;
    let mut scenarios = catalog::all_builtin()?;
    if let Some(dir) = &config.scenario_dir {
        for s in catalog::load_dir(dir)? {
            match scenarios.iter_mut().find(|b| b.name() == s.name()) {
                Some(slot) => *slot = s,
                None => scenarios.push(s),
            }
        }
        scenarios.sort_by(|a, b| a.name().cmp(b.name()));
    }
    if let Some(names) = &config.scenario_names {
        for n in names {
            if !scenarios.iter().any(|s| s.name() == n) {
                return Err(GeomError::UnknownScenario { name: n.clone() });
            }
        }
        scenarios.retain(|s| names.iter().any(|n| n == s.name()));
    }
    let split_cfg = SplitConfig {
        variant: calibration.sign.variant,
        mixed_form: calibration.mixed.form,
        gate_tol: config.gate_tol,
    };
    let scenario_reports: Vec<ScenarioReport> = scenarios
        .iter()
        .map(|s| run_scenario(s, config, &split_cfg))
        .collect();
    let overall_pass = scenario_reports.iter().all(|r| r.pass);
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        config: ConfigEcho {
            scenarios: scenarios.iter().map(|s| s.name().to_string()).collect(),
            grid_n: config.grid_n,
            tol: config.tol,
            gate_tol: config.gate_tol,
            points: config.points,
            seed: config.seed,
            xi_h_sign: config.xi_h_sign_str(),
            scenario_dir: config
                .scenario_dir
                .as_ref()
                .map(|p| p.display().to_string()),
        },
        resolver: ResolverRecord::from_calibration(&calibration),
        scenarios: scenario_reports,
        overall_pass,
    })
}

fn record_error(errors: &mut Vec<String>, msg: String) {
    if errors.len() < MAX_ERRORS && !errors.contains(&msg) {
        errors.push(msg);
    }
}

fn sweep_points(scenario: &Scenario, config: &RunConfig) -> Vec<Vec<f64>> {
    let chart = &scenario.metric.chart;
    let mut pts = chart.grid(config.grid_n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.points {
        pts.push(chart.random_point(&mut rng));
    }
    pts
}

fn fact_subset(scenario: &Scenario, config: &RunConfig) -> Vec<Vec<f64>> {
    let chart = &scenario.metric.chart;
    let mut pts = chart.grid(FACT_SUBSET_GRID);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..FACT_SUBSET_RANDOM.min(config.points) {
        pts.push(chart.random_point(&mut rng));
    }
    pts
}

/// Streaming statistics over one split-scenario sweep.
struct SplitAggregate {
    accs: Vec<IdentityAccumulator>,
    points_seen: usize,
    s_mix_min: f64,
    s_mix_max: f64,
    defect_v_max: f64,
    defect_h_max: f64,
    q_v_sq_max: f64,
    q_h_sq_max: f64,
    f_v_sq_max: f64,
    f_h_sq_max: f64,
    xi_v_sq_max: f64,
    xi_h_sq_max: f64,
    nabla_p_sq_max: f64,
    integrand_min: f64,
}

impl SplitAggregate {
    fn new() -> Self {
        SplitAggregate {
            accs: IdentityId::split_ids()
                .iter()
                .map(|id| IdentityAccumulator::new(*id))
                .collect(),
            points_seen: 0,
            s_mix_min: f64::INFINITY,
            s_mix_max: f64::NEG_INFINITY,
            defect_v_max: 0.0,
            defect_h_max: 0.0,
            q_v_sq_max: 0.0,
            q_h_sq_max: 0.0,
            f_v_sq_max: 0.0,
            f_h_sq_max: 0.0,
            xi_v_sq_max: 0.0,
            xi_h_sq_max: 0.0,
            nabla_p_sq_max: 0.0,
            integrand_min: f64::INFINITY,
        }
    }
}

fn sweep_split(
    scenario: &Scenario,
    samples: &[Vec<f64>],
    split_cfg: &SplitConfig,
    errors: &mut Vec<String>,
) -> SplitAggregate {
    let structure = scenario
        .structure
        .as_ref()
        .expect("split sweep needs structure");
    let ids = IdentityId::split_ids();
    let mut agg = SplitAggregate::new();
    for p in samples {
        let curv = match scenario.metric.curvature(p) {
            Ok(c) => c,
            Err(e) => {
                record_error(errors, format!("curvature at {p:?}: {e}"));
                continue;
            }
        };
        let pe = match eval_split_point(structure, &curv, p) {
            Ok(pe) => pe,
            Err(e) => {
                record_error(errors, format!("structure tensors at {p:?}: {e}"));
                continue;
            }
        };
        let t = &pe.tensors;
        agg.points_seen += 1;
        agg.s_mix_min = agg.s_mix_min.min(t.s_mix);
        agg.s_mix_max = agg.s_mix_max.max(t.s_mix);
        agg.defect_v_max = agg.defect_v_max.max(t.umbilic_defect_v);
        agg.defect_h_max = agg.defect_h_max.max(t.umbilic_defect_h);
        agg.q_v_sq_max = agg.q_v_sq_max.max(t.q_v_norm_sq);
        agg.q_h_sq_max = agg.q_h_sq_max.max(t.q_h_norm_sq);
        agg.f_v_sq_max = agg.f_v_sq_max.max(t.f_v_norm_sq);
        agg.f_h_sq_max = agg.f_h_sq_max.max(t.f_h_norm_sq);
        agg.xi_v_sq_max = agg.xi_v_sq_max.max(t.xi_v_norm_sq);
        agg.xi_h_sq_max = agg.xi_h_sq_max.max(t.xi_h_norm_sq);
        agg.nabla_p_sq_max = agg.nabla_p_sq_max.max(t.nabla_p_norm_sq);
        agg.integrand_min = agg
            .integrand_min
            .min(2.0 * t.s_mix + 0.25 * t.nabla_p_norm_sq);
        for (k, id) in ids.iter().enumerate() {
            let outcome =
                split_identity_outcome(*id, split_cfg, structure.p_rank, structure.q_rank(), &pe);
            agg.accs[k].absorb(p, &outcome);
        }
    }
    agg
}

fn hypothesis_and_verdicts(
    scenario: &Scenario,
    agg: &SplitAggregate,
    grid_n: usize,
    errors: &mut Vec<String>,
) -> (Option<HypothesisReport>, Vec<VerdictReport>) {
    if agg.points_seen == 0 {
        record_error(errors, "no sample point evaluated for the splitting".into());
        return (None, Vec::new());
    }
    let structure = scenario.structure.as_ref().expect("checked by caller");
    // L1 norms use the sweep grid: they are descriptive statistics;
    // integral facts with stated tolerances run at MIN_QUADRATURE_N.
    let n_l1 = grid_n.max(quadrature::MIN_NODES);
    let mut l1 = |field: &VectorField| match quadrature::l1_norm(&scenario.metric, field, n_l1) {
        Ok(v) => Some(v),
        Err(e) => {
            record_error(errors, format!("L1 norm: {e}"));
            None
        }
    };
    let hyp = HypothesisReport {
        p_rank: structure.p_rank,
        q_rank: structure.q_rank(),
        s_mix_min: agg.s_mix_min,
        s_mix_max: agg.s_mix_max,
        umbilic_defect_v_max: agg.defect_v_max,
        umbilic_defect_h_max: agg.defect_h_max,
        q_v_norm_max: agg.q_v_sq_max.sqrt(),
        q_h_norm_max: agg.q_h_sq_max.sqrt(),
        f_v_norm_max: agg.f_v_sq_max.sqrt(),
        f_h_norm_max: agg.f_h_sq_max.sqrt(),
        xi_v_norm_max: agg.xi_v_sq_max.sqrt(),
        xi_h_norm_max: agg.xi_h_sq_max.sqrt(),
        nabla_p_norm_sq_max: agg.nabla_p_sq_max,
        fiber_integrand_min: agg.integrand_min,
        l1_xi_v: l1(structure.xi_v_field()),
        l1_xi_h: l1(structure.xi_h_field()),
    };
    let verdicts = vec![
        VerdictReport {
            name: "splits_as_product".into(),
            fires: agg.nabla_p_sq_max <= SPLIT_THRESHOLD,
            evidence: agg.nabla_p_sq_max,
            threshold: SPLIT_THRESHOLD,
            detail: "max |nabla P|^2 over all sampled points; at or below the threshold \
                     every splitting invariant vanishes and the metric is a local product"
                .into(),
        },
        VerdictReport {
            name: "not_projective_submersion".into(),
            fires: agg.integrand_min > NON_EXISTENCE_THRESHOLD,
            evidence: agg.integrand_min,
            threshold: NON_EXISTENCE_THRESHOLD,
            detail: "min of the fiber integrand 2 s_mix + |nabla P|^2/4 over all sampled \
                     points; strict positivity makes the closed-fiber integral nonzero, \
                     which no projective submersion admits"
                .into(),
        },
        VerdictReport {
            name: "not_harmonic".into(),
            fires: agg.integrand_min > NON_EXISTENCE_THRESHOLD,
            evidence: agg.integrand_min,
            threshold: NON_EXISTENCE_THRESHOLD,
            detail: "same integrand positivity; a harmonic map with these fibers would \
                     force the integral to vanish"
                .into(),
        },
    ];
    (Some(hyp), verdicts)
}

fn sweep_projective(
    scenario: &Scenario,
    samples: &[Vec<f64>],
    tol: f64,
    errors: &mut Vec<String>,
) -> Vec<IdentityReport> {
    let gbar = scenario
        .metric_bar
        .as_ref()
        .expect("projective sweep needs metric_bar");
    let pair = match MetricPair::new(scenario.metric.clone(), gbar.clone()) {
        Ok(p) => p,
        Err(e) => {
            record_error(errors, format!("metric pair: {e}"));
            return Vec::new();
        }
    };
    let mut acc_full = IdentityAccumulator::new(IdentityId::Projective31);
    let mut acc_trace = IdentityAccumulator::new(IdentityId::Projective33);
    for p in samples {
        match pair.full_residual(p) {
            Ok(r) => acc_full.absorb(p, &PointOutcome::Evaluated { residual: r }),
            Err(e) => record_error(errors, format!("ricci comparison at {p:?}: {e}")),
        }
        match pair.trace_residual(p) {
            Ok(r) => acc_trace.absorb(p, &PointOutcome::Evaluated { residual: r }),
            Err(e) => record_error(errors, format!("trace comparison at {p:?}: {e}")),
        }
    }
    vec![acc_full.finalize(tol), acc_trace.finalize(tol)]
}

fn sweep_conformal(
    scenario: &Scenario,
    samples: &[Vec<f64>],
    tol: f64,
    errors: &mut Vec<String>,
) -> Vec<IdentityReport> {
    let sigma = scenario
        .sigma
        .as_ref()
        .expect("conformal sweep needs sigma");
    let pair = match ConformalPair::new(scenario.metric.clone(), sigma.clone()) {
        Ok(p) => p,
        Err(e) => {
            record_error(errors, format!("conformal pair: {e}"));
            return Vec::new();
        }
    };
    let mut acc_1 = IdentityAccumulator::new(IdentityId::Conformal41);
    let mut acc_2 = IdentityAccumulator::new(IdentityId::Conformal42);
    for p in samples {
        match pair.residuals(p) {
            Ok((r1, r2)) => {
                acc_1.absorb(p, &PointOutcome::Evaluated { residual: r1 });
                acc_2.absorb(p, &PointOutcome::Evaluated { residual: r2 });
            }
            Err(e) => record_error(errors, format!("conformal residuals at {p:?}: {e}")),
        }
    }
    vec![acc_1.finalize(tol), acc_2.finalize(tol)]
}

/// Classification aggregated over the fact subset: a flag holds for
/// the map when it holds at every sampled point; residuals report the
/// worst point. The dilation factor is taken at the chart center.
fn classify_over(
    scenario: &Scenario,
    subset: &[Vec<f64>],
    gate_tol: f64,
    errors: &mut Vec<String>,
) -> Option<(ClassificationReport, BTreeMap<String, bool>)> {
    let map = scenario.map.as_ref()?;
    let structure = scenario.structure.as_ref()?;
    let target = scenario.target_metric.as_ref()?;
    let mut flags: BTreeMap<String, (bool, f64)> = BTreeMap::new();
    for name in [
        "riemannian_submersion",
        "horizontally_conformal",
        "fibers_minimal",
        "fibers_umbilical",
        "horizontal_totally_geodesic",
    ] {
        flags.insert(name.to_string(), (true, 0.0));
    }
    let mut rank = 0;
    let mut seen = 0;
    for p in subset {
        let c = match classify_submersion(map, structure, target, p, gate_tol) {
            Ok(c) => c,
            Err(e) => {
                record_error(errors, format!("classification at {p:?}: {e}"));
                continue;
            }
        };
        seen += 1;
        rank = c.rank;
        for (name, flag) in [
            ("riemannian_submersion", &c.riemannian_submersion),
            ("horizontally_conformal", &c.horizontally_conformal),
            ("fibers_minimal", &c.fibers_minimal),
            ("fibers_umbilical", &c.fibers_umbilical),
            (
                "horizontal_totally_geodesic",
                &c.horizontal_totally_geodesic,
            ),
        ] {
            let entry = flags.get_mut(name).expect("flag names are fixed");
            entry.0 &= flag.set;
            entry.1 = entry.1.max(flag.residual);
        }
    }
    if seen == 0 {
        record_error(
            errors,
            "classification failed at every sampled point".into(),
        );
        return None;
    }
    let center = scenario.metric.chart.center();
    let factor = match classify_submersion(map, structure, target, &center, gate_tol) {
        Ok(c) => c.conformal_factor,
        Err(e) => {
            record_error(errors, format!("classification at chart center: {e}"));
            f64::MIN_POSITIVE
        }
    };
    let get = |name: &str| {
        let (set, residual) = flags[name];
        FlagReport { set, residual }
    };
    let report = ClassificationReport {
        rank,
        riemannian_submersion: get("riemannian_submersion"),
        horizontally_conformal: get("horizontally_conformal"),
        conformal_factor: factor,
        fibers_minimal: get("fibers_minimal"),
        fibers_umbilical: get("fibers_umbilical"),
        horizontal_totally_geodesic: get("horizontal_totally_geodesic"),
    };
    let flag_map = flags.into_iter().map(|(k, (set, _))| (k, set)).collect();
    Some((report, flag_map))
}

struct FactCtx<'a> {
    scenario: &'a Scenario,
    identity_reports: &'a [IdentityReport],
    verdicts: &'a [VerdictReport],
    class_flags: Option<&'a BTreeMap<String, bool>>,
    subset: &'a [Vec<f64>],
    n_int: usize,
    gate_tol: f64,
}

enum Observation {
    Value(f64),
    Outcome(String),
}

fn eval_fact(ctx: &FactCtx, fact: &ExpectedFact) -> FactReport {
    let mut rep = FactReport {
        quantity: fact.quantity.clone(),
        at: fact.at.clone(),
        expected_value: fact.value,
        expected_outcome: fact.outcome.clone(),
        observed_value: None,
        observed_outcome: None,
        tol: fact.tol,
        error: None,
        pass: false,
    };
    match eval_fact_inner(ctx, fact) {
        Ok(Observation::Value(v)) => {
            rep.observed_value = Some(v);
            let target = fact.value.unwrap_or(0.0);
            rep.pass = (v - target).abs() <= fact.tol.unwrap_or(0.0);
        }
        Ok(Observation::Outcome(o)) => {
            rep.pass = fact.outcome.as_deref() == Some(o.as_str());
            rep.observed_outcome = Some(o);
        }
        Err(e) => rep.error = Some(e.to_string()),
    }
    rep
}

fn require_structure<'a>(
    ctx: &FactCtx<'a>,
) -> Result<&'a crate::almost_product::AlmostProductStructure> {
    ctx.scenario
        .structure
        .as_ref()
        .ok_or_else(|| GeomError::InvalidConfig("fact needs a splitting".into()))
}

fn parse_fact_field(fact: &ExpectedFact) -> Result<VectorField> {
    let comps = fact
        .field
        .as_ref()
        .ok_or_else(|| GeomError::InvalidConfig(format!("fact {} needs a field", fact.quantity)))?;
    let parsed: Result<Vec<_>> = comps.iter().map(|c| parse_expr(c)).collect();
    Ok(VectorField::new(parsed?))
}

fn eval_fact_inner(ctx: &FactCtx, fact: &ExpectedFact) -> Result<Observation> {
    let scenario = ctx.scenario;
    let metric = &scenario.metric;
    let q = fact.quantity.as_str();

    if let Some(id) = q.strip_prefix("gate:") {
        let ir = ctx
            .identity_reports
            .iter()
            .find(|r| r.id == id)
            .ok_or_else(|| {
                GeomError::InvalidConfig(format!("identity {id} was not evaluated here"))
            })?;
        let observed = if ir.status != "gated" {
            format!("status_{}", ir.status)
        } else if ir.gate_reasons.len() == 1 {
            ir.gate_reasons[0].reason.clone()
        } else {
            let all: Vec<&str> = ir.gate_reasons.iter().map(|g| g.reason.as_str()).collect();
            format!("mixed:{}", all.join(","))
        };
        return Ok(Observation::Outcome(observed));
    }
    if let Some(flag) = q.strip_prefix("classify:") {
        let flags = ctx
            .class_flags
            .ok_or_else(|| GeomError::InvalidConfig("scenario has no map to classify".into()))?;
        let set = flags
            .get(flag)
            .ok_or_else(|| GeomError::InvalidConfig(format!("unknown classifier flag {flag}")))?;
        return Ok(Observation::Outcome(set.to_string()));
    }
    if let Some(name) = q.strip_prefix("verdict:") {
        let v = ctx
            .verdicts
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| GeomError::InvalidConfig(format!("unknown verdict {name}")))?;
        return Ok(Observation::Outcome(
            if v.fires { "fires" } else { "none" }.to_string(),
        ));
    }

    match q {
        "xi_v_field" | "xi_h_field" => {
            let s = require_structure(ctx)?;
            let expected = parse_fact_field(fact)?;
            let xi = if q == "xi_v_field" {
                s.xi_v_field()
            } else {
                s.xi_h_field()
            };
            let mut deviation = 0.0f64;
            for p in ctx.subset {
                let a = xi.eval(p)?;
                let b = expected.eval(p)?;
                for i in 0..a.len() {
                    deviation = deviation.max((a[i] - b[i]).abs());
                }
            }
            return Ok(Observation::Value(deviation));
        }
        "volume" => {
            return Ok(Observation::Value(quadrature::volume(metric, ctx.n_int)?));
        }
        "l1_xi_v" | "l1_xi_h" => {
            let s = require_structure(ctx)?;
            let xi = if q == "l1_xi_v" {
                s.xi_v_field()
            } else {
                s.xi_h_field()
            };
            return Ok(Observation::Value(quadrature::l1_norm(
                metric, xi, ctx.n_int,
            )?));
        }
        "green_check" => {
            let field = parse_fact_field(fact)?;
            return Ok(Observation::Value(quadrature::green_check(
                metric, &field, ctx.n_int,
            )?));
        }
        "green_check_xi" => {
            let s = require_structure(ctx)?;
            let total: Vec<_> = s
                .xi_v_field()
                .components
                .iter()
                .zip(&s.xi_h_field().components)
                .map(|(a, b)| a.add(b))
                .collect();
            return Ok(Observation::Value(quadrature::green_check(
                metric,
                &VectorField::new(total),
                ctx.n_int,
            )?));
        }
        "karp_quotient" => {
            let field = parse_fact_field(fact)?;
            let r = fact
                .radius
                .ok_or_else(|| GeomError::InvalidConfig("karp_quotient needs a radius".into()))?;
            return Ok(Observation::Value(quadrature::karp_quotient(
                metric, &field, r, ctx.n_int,
            )?));
        }
        "metric_bar_matches_rescale" => {
            let gbar = scenario
                .metric_bar
                .as_ref()
                .ok_or_else(|| GeomError::InvalidConfig("fact needs metric_bar".into()))?;
            let sigma = scenario
                .sigma
                .as_ref()
                .ok_or_else(|| GeomError::InvalidConfig("fact needs sigma".into()))?;
            let n = metric.dim();
            let mut worst = 0.0f64;
            for p in ctx.subset {
                let ga = metric.eval(p)?;
                let gb = gbar.eval(p)?;
                let scale = (2.0 * sigma.eval(p)?).exp();
                for i in 0..n {
                    for j in 0..n {
                        worst = worst.max((gb.g[(i, j)] - scale * ga.g[(i, j)]).abs());
                    }
                }
            }
            return Ok(Observation::Value(worst));
        }
        _ => {}
    }

    let p = fact
        .at
        .as_ref()
        .ok_or_else(|| GeomError::InvalidConfig(format!("fact {q} needs an 'at' point")))?;
    Ok(Observation::Value(point_value(ctx, q, p)?))
}

fn point_value(ctx: &FactCtx, q: &str, p: &[f64]) -> Result<f64> {
    let scenario = ctx.scenario;
    let metric = &scenario.metric;
    match q {
        "scalar_curvature" => Ok(metric.curvature(p)?.scalar),
        "scalar_curvature_bar" => {
            if let Some(gbar) = &scenario.metric_bar {
                Ok(gbar.curvature(p)?.scalar)
            } else if let Some(sigma) = &scenario.sigma {
                ConformalPair::new(metric.clone(), sigma.clone())?.scalar_bar(p)
            } else {
                Err(GeomError::InvalidConfig(
                    "scalar_curvature_bar needs metric_bar or sigma".into(),
                ))
            }
        }
        "psi" => {
            let gbar = scenario
                .metric_bar
                .as_ref()
                .ok_or_else(|| GeomError::InvalidConfig("psi needs metric_bar".into()))?;
            projective_psi(metric, gbar).eval(p)
        }
        "sigma_recovered" => {
            let gbar = scenario.metric_bar.as_ref().ok_or_else(|| {
                GeomError::InvalidConfig("sigma_recovered needs metric_bar".into())
            })?;
            Ok(conformal_factor(metric, gbar, p)?.0)
        }
        "conformal_factor" => {
            let map = scenario
                .map
                .as_ref()
                .ok_or_else(|| GeomError::InvalidConfig("conformal_factor needs a map".into()))?;
            let s = require_structure(ctx)?;
            let target = scenario.target_metric.as_ref().ok_or_else(|| {
                GeomError::InvalidConfig("conformal_factor needs a target metric".into())
            })?;
            Ok(classify_submersion(map, s, target, p, ctx.gate_tol)?.conformal_factor)
        }
        "div_v_xi_v" | "div_h_xi_v" | "div_v_xi_h" | "div_h_xi_h" => {
            let s = require_structure(ctx)?;
            let curv = metric.curvature(p)?;
            let pe = eval_split_point(s, &curv, p)?;
            Ok(match q {
                "div_v_xi_v" => pe.div_v_xi_v,
                "div_h_xi_v" => pe.div_h_xi_v,
                "div_v_xi_h" => pe.div_v_xi_h,
                _ => pe.div_h_xi_h,
            })
        }
        "s_mix" | "xi_v_norm_sq" | "xi_h_norm_sq" | "q_v_norm_sq" | "q_h_norm_sq"
        | "f_v_norm_sq" | "f_h_norm_sq" | "nabla_p_norm_sq" | "umbilic_defect_v"
        | "umbilic_defect_h" | "fiber_integrand" => {
            let s = require_structure(ctx)?;
            let curv = metric.curvature(p)?;
            let t = s.tensors_at(&curv, p)?;
            Ok(match q {
                "s_mix" => t.s_mix,
                "xi_v_norm_sq" => t.xi_v_norm_sq,
                "xi_h_norm_sq" => t.xi_h_norm_sq,
                "q_v_norm_sq" => t.q_v_norm_sq,
                "q_h_norm_sq" => t.q_h_norm_sq,
                "f_v_norm_sq" => t.f_v_norm_sq,
                "f_h_norm_sq" => t.f_h_norm_sq,
                "nabla_p_norm_sq" => t.nabla_p_norm_sq,
                "umbilic_defect_v" => t.umbilic_defect_v,
                "umbilic_defect_h" => t.umbilic_defect_h,
                _ => 2.0 * t.s_mix + 0.25 * t.nabla_p_norm_sq,
            })
        }
        other => Err(GeomError::InvalidConfig(format!(
            "unknown fact quantity {other}"
        ))),
    }
}

fn run_scenario(
    scenario: &Scenario,
    config: &RunConfig,
    split_cfg: &SplitConfig,
) -> ScenarioReport {
    let start = Instant::now();
    let mut errors = Vec::new();
    let samples = sweep_points(scenario, config);
    let subset = fact_subset(scenario, config);
    let n_int = config.grid_n.max(MIN_QUADRATURE_N);

    let mut identity_reports: Vec<IdentityReport> = Vec::new();
    let mut hypothesis = None;
    let mut verdicts = Vec::new();

    if scenario.structure.is_some() {
        let agg = sweep_split(scenario, &samples, split_cfg, &mut errors);
        identity_reports.extend(agg.accs.iter().map(|a| a.finalize(config.tol)));
        let (hyp, vds) = hypothesis_and_verdicts(scenario, &agg, config.grid_n, &mut errors);
        hypothesis = hyp;
        verdicts = vds;
    }
    if scenario.metric_bar.is_some() && scenario.sigma.is_none() {
        identity_reports.extend(sweep_projective(
            scenario,
            &samples,
            config.tol,
            &mut errors,
        ));
    }
    if scenario.sigma.is_some() {
        identity_reports.extend(sweep_conformal(scenario, &samples, config.tol, &mut errors));
    }

    let classified = classify_over(scenario, &subset, config.gate_tol, &mut errors);
    let (classification, class_flags) = match classified {
        Some((r, f)) => (Some(r), Some(f)),
        None => (None, None),
    };

    let ctx = FactCtx {
        scenario,
        identity_reports: &identity_reports,
        verdicts: &verdicts,
        class_flags: class_flags.as_ref(),
        subset: &subset,
        n_int,
        gate_tol: config.gate_tol,
    };
    let facts: Vec<FactReport> = scenario
        .spec
        .expected
        .iter()
        .map(|f| eval_fact(&ctx, f))
        .collect();

    let pass = identity_reports.iter().all(|i| i.pass)
        && facts.iter().all(|f| f.pass)
        && errors.is_empty();
    ScenarioReport {
        name: scenario.spec.name.clone(),
        description: scenario.spec.description.clone(),
        runtime_ms: start.elapsed().as_millis() as u64,
        identities: identity_reports,
        hypothesis,
        verdicts,
        classification,
        facts,
        errors,
        pass,
    }
}
