//! Acceptance gate for the whole engine. Each test covers one shipped
//! guarantee and prints exactly one `acceptance criterion N [...]` line
//! so a log scrape shows the full scorecard.

use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mixcurv::catalog;
use mixcurv::geometry::{Chart, MetricField, VectorField};
use mixcurv::identities::{ConformalPair, MetricPair};
use mixcurv::quadrature;
use mixcurv::report::ScenarioReport;
use mixcurv::{parse_expr, Report, RunConfig, ScalarExpr};

// The bool binding makes a NaN comparand fail the check instead of
// slipping past a rewritten comparison.
macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {{
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($arg)+));
        }
    }};
}

fn check(number: usize, what: &str, body: impl FnOnce() -> Result<(), String>) {
    let outcome = body();
    println!(
        "acceptance criterion {number} [{what}]: {}",
        if outcome.is_ok() { "PASS" } else { "FAIL" }
    );
    if let Err(message) = outcome {
        panic!("criterion {number} [{what}]: {message}");
    }
}

fn engine<T>(r: mixcurv::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// One full default-configuration catalog run, shared by the criteria
/// that inspect the report.
fn full_run() -> &'static Report {
    static FULL_RUN: OnceLock<Report> = OnceLock::new();
    FULL_RUN.get_or_init(|| mixcurv::run(&RunConfig::default()).expect("default catalog run"))
}

fn scenario_report(name: &str) -> Result<&'static ScenarioReport, String> {
    full_run()
        .scenarios
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| format!("report does not cover {name}"))
}

/// Checks sectional curvature == expected on 100 random tangent planes.
fn sectional_everywhere(metric: &MetricField, expected: f64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let p = metric.chart.random_point(&mut rng);
        let curvature = engine(metric.curvature(&p))?;
        let (x, y) = loop {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if (x[0] * y[1] - x[1] * y[0]).abs() > 0.2 {
                break (x, y);
            }
        };
        let k = engine(curvature.sectional(&x, &y))?;
        ensure!(
            (k - expected).abs() <= 1e-8,
            "sectional curvature {k} at {p:?} differs from {expected}"
        );
    }
    Ok(())
}

#[test]
fn criterion_1_model_space_sectional_curvature() {
    check(1, "model-space sectional curvature", || {
        let start = Instant::now();
        let sphere = engine(catalog::load_builtin("sphere_latitude_submersion"))?;
        sectional_everywhere(&sphere.metric, 1.0)?;
        let half_plane = engine(catalog::load_builtin("hyperbolic_conformal_pair"))?;
        let bar = half_plane
            .metric_bar
            .ok_or("hyperbolic scenario lost its comparison metric")?;
        sectional_everywhere(&bar, -1.0)?;
        let elapsed = start.elapsed();
        ensure!(
            elapsed.as_secs_f64() < 5.0,
            "took {elapsed:?}, budget is 5 s"
        );
        Ok(())
    });
}

const SPLIT_SCENARIOS: [&str; 5] = [
    "contact_T3",
    "double_twisted_T2",
    "euclidean_foliation",
    "product_T2",
    "warped_torus",
];

#[test]
fn criterion_2_mixed_curvature_identity_and_sign_resolution() {
    check(
        2,
        "mixed scalar curvature identity with sign resolution",
        || {
            let report = full_run();
            ensure!(
                report.config.grid_n == 33,
                "grid_n is {}",
                report.config.grid_n
            );
            ensure!(
                report.config.points == 100,
                "points is {}",
                report.config.points
            );
            for name in SPLIT_SCENARIOS {
                let scenario = scenario_report(name)?;
                let identity = scenario
                    .identities
                    .iter()
                    .find(|i| i.id == "walczak_2_1")
                    .ok_or_else(|| format!("{name} has no walczak_2_1 row"))?;
                ensure!(
                    identity.status == "verified",
                    "{name}: walczak_2_1 status is {}",
                    identity.status
                );
                let max = identity.max_residual.unwrap_or(f64::INFINITY);
                ensure!(max <= 1e-8, "{name}: walczak_2_1 max residual {max}");
                ensure!(identity.pass, "{name}: walczak_2_1 marked failing");
            }

            let resolver = &report.resolver;
            ensure!(
                resolver.variant_adopted == "minus" && !resolver.forced,
                "resolver adopted {} (forced: {})",
                resolver.variant_adopted,
                resolver.forced
            );
            ensure!(
                !resolver.evidence.is_empty(),
                "resolver kept no probe evidence"
            );
            let worst_minus = resolver
                .evidence
                .iter()
                .map(|p| p.minus_residual)
                .fold(0.0f64, f64::max);
            ensure!(
                worst_minus <= 1e-9,
                "a probe has minus residual {worst_minus}"
            );
            let best_plus_gap = resolver
                .evidence
                .iter()
                .map(|p| p.plus_residual)
                .fold(0.0f64, f64::max);
            ensure!(
                best_plus_gap > 1e-3,
                "no probe separates the variants (max plus residual {best_plus_gap})"
            );
            ensure!(
                resolver.sign_note.contains("variant"),
                "sign note does not record the discrepancy"
            );
            Ok(())
        },
    );
}

const SPECIALIZED_IDS: [&str; 5] = [
    "umbilical_2_2",
    "codim1_2_2",
    "integrable_2_4",
    "minimal_2_5",
    "horiz_conf_4_3",
];

#[test]
fn criterion_3_specializations_and_hypothesis_gates() {
    check(3, "specialized identities and hypothesis gates", || {
        // Where the hypotheses hold, each specialization closes tighter
        // than the parent tolerance; each one must be exercised somewhere.
        for id in SPECIALIZED_IDS {
            let mut verified_somewhere = false;
            for name in SPLIT_SCENARIOS {
                let scenario = scenario_report(name)?;
                let row = scenario
                    .identities
                    .iter()
                    .find(|i| i.id == id)
                    .ok_or_else(|| format!("{name} has no {id} row"))?;
                if row.status == "verified" {
                    verified_somewhere = true;
                    let max = row.max_residual.unwrap_or(f64::INFINITY);
                    ensure!(max <= 1e-9, "{name}: {id} max residual {max}");
                }
            }
            ensure!(verified_somewhere, "{id} never ran ungated");
        }

        // The contact structure violates every umbilicity / integrability
        // hypothesis; the report must refuse each specialization with the
        // tabulated reason.
        let contact = scenario_report("contact_T3")?;
        let expected_gates = [
            ("umbilical_2_2", "not_umbilical_h"),
            ("codim1_2_2", "not_totally_geodesic_h"),
            ("integrable_2_4", "gate_failed_f_h_norm"),
            ("minimal_2_5", "gate_failed_f_h_norm"),
            ("horiz_conf_4_3", "not_umbilical_h"),
        ];
        for (id, reason) in expected_gates {
            let row = contact
                .identities
                .iter()
                .find(|i| i.id == id)
                .ok_or_else(|| format!("contact_T3 has no {id} row"))?;
            ensure!(
                row.status == "gated",
                "contact_T3: {id} status is {}",
                row.status
            );
            ensure!(
                row.gate_reasons.len() == 1 && row.gate_reasons[0].reason == reason,
                "contact_T3: {id} gated for {:?}, expected {reason}",
                row.gate_reasons
                    .iter()
                    .map(|g| g.reason.as_str())
                    .collect::<Vec<_>>()
            );
        }
        for fact in contact
            .facts
            .iter()
            .filter(|f| f.quantity.starts_with("gate:"))
        {
            ensure!(fact.pass, "contact_T3 gate fact {} failed", fact.quantity);
        }
        Ok(())
    });
}

#[test]
fn criterion_4_shared_geodesic_metric_pair() {
    check(4, "shared-geodesic metric pair", || {
        let scenario = engine(catalog::load_builtin("gnomonic_projective_pair"))?;
        let chart = scenario.metric.chart.clone();
        let bar = scenario
            .metric_bar
            .ok_or("gnomonic scenario lost its comparison metric")?;
        let pair = engine(MetricPair::new(scenario.metric, bar))?;

        let psi = engine(pair.psi.eval(&[1.0, 0.0]))?;
        let expected = 0.5 * 2f64.ln();
        ensure!(
            (psi - expected).abs() <= 1e-12,
            "psi(1,0) = {psi}, expected {expected}"
        );

        let mut worst_full = 0.0f64;
        let mut worst_trace = 0.0f64;
        for p in chart.grid(20) {
            worst_full = worst_full.max(engine(pair.full_residual(&p))?);
            worst_trace = worst_trace.max(engine(pair.trace_residual(&p))?);
        }
        ensure!(worst_full <= 1e-8, "full comparison residual {worst_full}");
        ensure!(
            worst_trace <= 1e-8,
            "traced comparison residual {worst_trace}"
        );
        Ok(())
    });
}

#[test]
fn criterion_5_conformal_rescaling_law() {
    check(5, "conformal rescaling law", || {
        // Flat strip rescaled into the hyperbolic half-plane.
        let scenario = engine(catalog::load_builtin("hyperbolic_conformal_pair"))?;
        let chart = scenario.metric.chart.clone();
        let sigma = scenario.sigma.clone().ok_or("scenario lost its factor")?;
        let pair = engine(ConformalPair::new(scenario.metric, sigma))?;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut points = chart.grid(10);
        points.extend((0..20).map(|_| chart.random_point(&mut rng)));
        for p in &points {
            let s_bar = engine(pair.scalar_bar(p))?;
            ensure!(
                (s_bar + 2.0).abs() <= 1e-9,
                "rescaled scalar curvature {s_bar} at {p:?}"
            );
        }

        // Flat 3-space with factor x0: the law predicts -2 e^{-2 x0}.
        let chart = engine(Chart::new(vec![(-1.0, 1.0); 3], vec![false; 3]))?;
        let entries = (0..3)
            .map(|i| {
                (0..3)
                    .map(|j| {
                        if i == j {
                            ScalarExpr::one()
                        } else {
                            ScalarExpr::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        let flat = engine(MetricField::new(chart.clone(), entries))?;
        let pair = engine(ConformalPair::new(flat, ScalarExpr::coord(0)))?;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let p = chart.random_point(&mut rng);
            let s_bar = engine(pair.scalar_bar(&p))?;
            let expected = -2.0 * (-2.0 * p[0]).exp();
            ensure!(
                (s_bar - expected).abs() <= 1e-9,
                "rescaled scalar curvature {s_bar} at {p:?}, expected {expected}"
            );
        }
        Ok(())
    });
}

/// Integral of a divergence over a closed manifold, which must vanish:
/// small at the working resolution and contracting >= 10x per node
/// doubling until round-off.
fn divergence_integral_contracts(metric: &MetricField, field: &VectorField) -> Result<(), String> {
    let at_64 = engine(quadrature::green_check(metric, field, 64))?.abs();
    ensure!(at_64 <= 1e-10, "closed-manifold defect {at_64} at 64 nodes");
    let mut errors = Vec::new();
    for n in [8, 16, 32, 64, 128] {
        errors.push(engine(quadrature::green_check(metric, field, n))?.abs());
    }
    for pair in errors.windows(2) {
        let (coarse, fine) = (pair[0], pair[1]);
        ensure!(
            coarse <= 1e-13 || fine <= 1e-13 || fine <= coarse / 10.0,
            "defect only fell from {coarse} to {fine} on doubling"
        );
    }
    Ok(())
}

#[test]
fn criterion_6_divergence_theorem_quadrature() {
    check(6, "closed-manifold divergence quadrature", || {
        let chart = engine(Chart::new(
            vec![(0.0, std::f64::consts::TAU); 2],
            vec![true, true],
        ))?;
        let entries = vec![
            vec![ScalarExpr::one(), ScalarExpr::zero()],
            vec![ScalarExpr::zero(), ScalarExpr::one()],
        ];
        let flat_torus = engine(MetricField::new(chart, entries))?;
        let field = VectorField::new(vec![
            engine(parse_expr("sin(x0)"))?,
            engine(parse_expr("cos(x1)"))?,
        ]);
        divergence_integral_contracts(&flat_torus, &field)?;

        let scenario = engine(catalog::load_builtin("warped_torus"))?;
        let structure = scenario
            .structure
            .ok_or("warped scenario lost its splitting")?;
        let xi_v = structure.xi_v_field();
        let xi_h = structure.xi_h_field();
        let summed = VectorField::new(
            xi_v.components
                .iter()
                .zip(&xi_h.components)
                .map(|(v, h)| v.add(h))
                .collect(),
        );
        divergence_integral_contracts(&scenario.metric, &summed)?;
        Ok(())
    });
}

#[test]
fn criterion_7_splitting_and_non_existence_verdicts() {
    check(7, "splitting and non-existence verdicts", || {
        let sphere = scenario_report("sphere_latitude_submersion")?;
        for verdict_name in ["not_projective_submersion", "not_harmonic"] {
            let verdict = sphere
                .verdicts
                .iter()
                .find(|v| v.name == verdict_name)
                .ok_or_else(|| format!("sphere run has no {verdict_name} verdict"))?;
            ensure!(verdict.fires, "{verdict_name} did not fire");
            ensure!(
                verdict.evidence >= 2.0 - 1e-6,
                "{verdict_name} evidence {} below the sphere floor",
                verdict.evidence
            );
        }
        let sphere_split = sphere
            .verdicts
            .iter()
            .find(|v| v.name == "splits_as_product")
            .ok_or("sphere run has no splitting verdict")?;
        ensure!(!sphere_split.fires, "sphere cannot split as a product");

        let product = scenario_report("product_T2")?;
        let split = product
            .verdicts
            .iter()
            .find(|v| v.name == "splits_as_product")
            .ok_or("product run has no splitting verdict")?;
        ensure!(split.fires, "product torus splitting verdict did not fire");
        ensure!(
            split.evidence <= 1e-10,
            "splitting evidence {} above threshold",
            split.evidence
        );
        for verdict_name in ["not_projective_submersion", "not_harmonic"] {
            let verdict = product
                .verdicts
                .iter()
                .find(|v| v.name == verdict_name)
                .ok_or_else(|| format!("product run has no {verdict_name} verdict"))?;
            ensure!(!verdict.fires, "{verdict_name} fired on the product torus");
        }
        Ok(())
    });
}

#[test]
fn criterion_8_submersion_classifier_truth_table() {
    check(8, "submersion classifier truth table", || {
        let mut table_rows = 0;
        for name in [
            "double_twisted_T2",
            "product_T2",
            "sphere_latitude_submersion",
        ] {
            let scenario = scenario_report(name)?;
            ensure!(
                scenario.classification.is_some(),
                "{name} has no classifier output"
            );
            for fact in scenario
                .facts
                .iter()
                .filter(|f| f.quantity.starts_with("classify:"))
            {
                ensure!(
                    fact.pass,
                    "{name}: {} observed {:?}, expected {:?}",
                    fact.quantity,
                    fact.observed_outcome,
                    fact.expected_outcome
                );
                table_rows += 1;
            }
        }
        ensure!(
            table_rows == 13,
            "expected 13 classifier cells, saw {table_rows}"
        );

        let product = scenario_report("product_T2")?
            .classification
            .as_ref()
            .ok_or("product classification missing")?;
        ensure!(
            product.riemannian_submersion.set,
            "product projection must be a metric-preserving submersion"
        );
        let twisted = scenario_report("double_twisted_T2")?
            .classification
            .as_ref()
            .ok_or("twisted classification missing")?;
        ensure!(
            !twisted.riemannian_submersion.set && twisted.horizontally_conformal.set,
            "twisted projection must be conformal but not metric-preserving"
        );
        Ok(())
    });
}

#[test]
fn criterion_9_full_catalog_cli_run_under_a_minute() {
    check(9, "full catalog CLI run", || {
        let start = Instant::now();
        let output = Command::new(env!("CARGO_BIN_EXE_mixcurv"))
            .args(["verify", "--all"])
            .output()
            .map_err(|e| format!("binary failed to launch: {e}"))?;
        let elapsed = start.elapsed();
        ensure!(
            output.status.code() == Some(0),
            "exit code {:?}, stderr: {}",
            output.status.code(),
            String::from_utf8_lossy(&output.stderr)
        );
        ensure!(
            String::from_utf8_lossy(&output.stdout).contains("OVERALL: PASS"),
            "run did not report an overall pass"
        );
        ensure!(
            elapsed.as_secs_f64() < 60.0,
            "took {elapsed:?}, budget is 60 s"
        );
        Ok(())
    });
}
