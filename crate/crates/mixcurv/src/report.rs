//! Serializable run reports: per-identity residual summaries,
//! hypothesis statistics, verdicts, fact checks, and the calibration
//! record, plus a compact human-readable rendering.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::GeomError;
use crate::identities::{Calibration, IdentityId, PointOutcome};
use crate::maps::MapClassification;

pub const SCHEMA_VERSION: u32 = 1;

/// Max ‖∇P‖² over all samples at or below which a splitting is
/// reported as a genuine metric product.
pub const SPLIT_THRESHOLD: f64 = 1e-10;

/// Min fiber integrand above which the non-existence verdicts fire.
pub const NON_EXISTENCE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub scenarios: Vec<String>,
    pub grid_n: usize,
    pub tol: f64,
    pub gate_tol: f64,
    pub points: usize,
    pub seed: u64,
    pub xi_h_sign: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario_dir: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRecord {
    pub scenario: String,
    pub plus_residual: f64,
    pub minus_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateRecord {
    pub description: String,
    pub max_residual: f64,
}

/// Record of the two calibrations that fix formula conventions for a
/// run: the sign of the squared horizontal mean-curvature term and
/// the coefficients of the mixed divergence identity.
#[derive(Debug, Clone, Serialize)]
pub struct ResolverRecord {
    pub variant_adopted: String,
    pub forced: bool,
    pub sign_note: String,
    pub evidence: Vec<ProbeRecord>,
    pub mixed_form: String,
    pub mixed_note: String,
    pub mixed_candidates: Vec<CandidateRecord>,
}

impl ResolverRecord {
    pub fn from_calibration(c: &Calibration) -> Self {
        let plus_worst = c
            .sign
            .evidence
            .iter()
            .map(|e| e.plus_residual)
            .fold(0.0, f64::max);
        let minus_worst = c
            .sign
            .evidence
            .iter()
            .map(|e| e.minus_residual)
            .fold(0.0, f64::max);
        let sign_note = format!(
            "the '+xi_H^2' variant reaches residual {plus_worst:.3e} on the probe \
             scenarios while the '-xi_H^2' variant stays at {minus_worst:.3e}; \
             the two variants differ by 2*|xi_H|^2 wherever xi_H != 0"
        );
        ResolverRecord {
            variant_adopted: c.sign.variant.as_str().to_string(),
            forced: c.sign.forced,
            sign_note,
            evidence: c
                .sign
                .evidence
                .iter()
                .map(|e| ProbeRecord {
                    scenario: e.scenario.clone(),
                    plus_residual: e.plus_residual,
                    minus_residual: e.minus_residual,
                })
                .collect(),
            mixed_form: c.mixed.form.as_str().to_string(),
            mixed_note: c.mixed.note.clone(),
            mixed_candidates: c
                .mixed
                .candidates
                .iter()
                .map(|k| CandidateRecord {
                    description: k.description.clone(),
                    max_residual: k.max_residual,
                })
                .collect(),
        }
    }
}

/// Stable slug for a gate refusal, used both in reports and in
/// scenario outcome facts.
pub fn gate_slug(e: &GeomError) -> String {
    match e {
        GeomError::NotUmbilical { which, .. } => format!("not_umbilical_{which}"),
        GeomError::NotTotallyGeodesic { which, .. } => format!("not_totally_geodesic_{which}"),
        GeomError::GateFailed { gate, .. } => format!("gate_failed_{gate}"),
        other => format!("error: {other}"),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GateCount {
    pub reason: String,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub id: String,
    /// "verified" | "gated" | "wrong_rank" | "diagnostic"
    pub status: String,
    pub points_evaluated: usize,
    pub points_gated: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub gate_reasons: Vec<GateCount>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_max: Option<f64>,
    pub pass: bool,
}

/// Streaming aggregation of pointwise outcomes for one identity.
#[derive(Debug, Clone)]
pub struct IdentityAccumulator {
    pub id: IdentityId,
    evaluated: usize,
    sum_residual: f64,
    max_residual: f64,
    worst_point: Option<Vec<f64>>,
    gates: BTreeMap<String, usize>,
    wrong_rank: usize,
    diagnostics: usize,
    value_min: f64,
    value_max: f64,
}

impl IdentityAccumulator {
    pub fn new(id: IdentityId) -> Self {
        IdentityAccumulator {
            id,
            evaluated: 0,
            sum_residual: 0.0,
            max_residual: 0.0,
            worst_point: None,
            gates: BTreeMap::new(),
            wrong_rank: 0,
            diagnostics: 0,
            value_min: f64::INFINITY,
            value_max: f64::NEG_INFINITY,
        }
    }

    pub fn absorb(&mut self, point: &[f64], outcome: &PointOutcome) {
        match outcome {
            PointOutcome::Evaluated { residual } => {
                let r = residual.abs();
                self.evaluated += 1;
                self.sum_residual += r;
                if r >= self.max_residual || self.worst_point.is_none() {
                    self.max_residual = r;
                    self.worst_point = Some(point.to_vec());
                }
            }
            PointOutcome::Gated { reason } => {
                *self.gates.entry(gate_slug(reason)).or_insert(0) += 1;
            }
            PointOutcome::WrongRank => self.wrong_rank += 1,
            PointOutcome::Diagnostic { value } => {
                self.diagnostics += 1;
                self.value_min = self.value_min.min(*value);
                self.value_max = self.value_max.max(*value);
            }
        }
    }

    pub fn merge(&mut self, other: &IdentityAccumulator) {
        self.evaluated += other.evaluated;
        self.sum_residual += other.sum_residual;
        if (other.max_residual >= self.max_residual || self.worst_point.is_none())
            && other.worst_point.is_some()
        {
            self.max_residual = other.max_residual;
            self.worst_point = other.worst_point.clone();
        }
        for (k, v) in &other.gates {
            *self.gates.entry(k.clone()).or_insert(0) += v;
        }
        self.wrong_rank += other.wrong_rank;
        self.diagnostics += other.diagnostics;
        self.value_min = self.value_min.min(other.value_min);
        self.value_max = self.value_max.max(other.value_max);
    }

    pub fn gated(&self) -> usize {
        self.gates.values().sum()
    }

    /// Slugs seen at gated points. Empty unless some point was gated.
    pub fn gate_slugs(&self) -> Vec<&str> {
        self.gates.keys().map(|s| s.as_str()).collect()
    }

    pub fn diagnostic_min(&self) -> Option<f64> {
        (self.diagnostics > 0).then_some(self.value_min)
    }

    pub fn max_residual(&self) -> Option<f64> {
        (self.evaluated > 0).then_some(self.max_residual)
    }

    pub fn finalize(&self, tol: f64) -> IdentityReport {
        let gated = self.gated();
        let (status, pass) = if self.wrong_rank > 0 {
            ("wrong_rank", true)
        } else if self.diagnostics > 0 {
            ("diagnostic", true)
        } else if self.evaluated > 0 {
            ("verified", self.max_residual <= tol)
        } else {
            ("gated", true)
        };
        let evaluated = self.evaluated;
        IdentityReport {
            id: self.id.as_str().to_string(),
            status: status.to_string(),
            points_evaluated: evaluated,
            points_gated: gated,
            gate_reasons: self
                .gates
                .iter()
                .map(|(reason, count)| GateCount {
                    reason: reason.clone(),
                    count: *count,
                })
                .collect(),
            max_residual: (evaluated > 0).then_some(self.max_residual),
            mean_residual: (evaluated > 0).then_some(self.sum_residual / evaluated as f64),
            worst_point: if evaluated > 0 {
                self.worst_point.clone()
            } else {
                None
            },
            value_min: (self.diagnostics > 0).then_some(self.value_min),
            value_max: (self.diagnostics > 0).then_some(self.value_max),
            pass,
        }
    }
}

/// Aggregate statistics backing the theorem-hypothesis checks of a
/// split scenario.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub p_rank: usize,
    pub q_rank: usize,
    pub s_mix_min: f64,
    pub s_mix_max: f64,
    pub umbilic_defect_v_max: f64,
    pub umbilic_defect_h_max: f64,
    pub q_v_norm_max: f64,
    pub q_h_norm_max: f64,
    pub f_v_norm_max: f64,
    pub f_h_norm_max: f64,
    pub xi_v_norm_max: f64,
    pub xi_h_norm_max: f64,
    pub nabla_p_norm_sq_max: f64,
    pub fiber_integrand_min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_xi_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_xi_h: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictReport {
    pub name: String,
    pub fires: bool,
    pub evidence: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlagReport {
    pub set: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub rank: usize,
    pub riemannian_submersion: FlagReport,
    pub horizontally_conformal: FlagReport,
    pub conformal_factor: f64,
    pub fibers_minimal: FlagReport,
    pub fibers_umbilical: FlagReport,
    pub horizontal_totally_geodesic: FlagReport,
}

impl From<&MapClassification> for ClassificationReport {
    fn from(c: &MapClassification) -> Self {
        let flag = |f: &crate::maps::ClassifierFlag| FlagReport {
            set: f.set,
            residual: f.residual,
        };
        ClassificationReport {
            rank: c.rank,
            riemannian_submersion: flag(&c.riemannian_submersion),
            horizontally_conformal: flag(&c.horizontally_conformal),
            conformal_factor: c.conformal_factor,
            fibers_minimal: flag(&c.fibers_minimal),
            fibers_umbilical: flag(&c.fibers_umbilical),
            horizontal_totally_geodesic: flag(&c.horizontal_totally_geodesic),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FactReport {
    pub quantity: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_outcome: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed_outcome: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub description: String,
    pub runtime_ms: u64,
    pub identities: Vec<IdentityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<HypothesisReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub verdicts: Vec<VerdictReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationReport>,
    pub facts: Vec<FactReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub config: ConfigEcho,
    pub resolver: ResolverRecord,
    pub scenarios: Vec<ScenarioReport>,
    pub overall_pass: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }

    /// Compact fixed-width text rendering for terminal output.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let r = &self.resolver;
        out.push_str(&format!(
            "sign variant: {}{}   mixed-term form: {}\n",
            r.variant_adopted,
            if r.forced { " (forced)" } else { " (auto)" },
            r.mixed_form,
        ));
        for s in &self.scenarios {
            out.push_str(&format!(
                "\n{} [{}] ({} ms)\n",
                s.name,
                if s.pass { "pass" } else { "FAIL" },
                s.runtime_ms
            ));
            if !s.identities.is_empty() {
                out.push_str(&format!(
                    "  {:<16} {:<10} {:>7} {:>7} {:>12} {:>12}\n",
                    "identity", "status", "points", "gated", "max", "mean"
                ));
                for i in &s.identities {
                    let fmt = |v: Option<f64>| match v {
                        Some(x) => format!("{x:.3e}"),
                        None => "-".to_string(),
                    };
                    out.push_str(&format!(
                        "  {:<16} {:<10} {:>7} {:>7} {:>12} {:>12}{}\n",
                        i.id,
                        i.status,
                        i.points_evaluated,
                        i.points_gated,
                        fmt(i.max_residual.or(i.value_max)),
                        fmt(i.mean_residual.or(i.value_min)),
                        if i.pass { "" } else { "  <-- FAIL" },
                    ));
                }
            }
            for v in &s.verdicts {
                out.push_str(&format!(
                    "  verdict {:<28} {:<6} (evidence {:.3e}, threshold {:.1e})\n",
                    v.name,
                    if v.fires { "fires" } else { "none" },
                    v.evidence,
                    v.threshold
                ));
            }
            if let Some(c) = &s.classification {
                let yn = |f: &FlagReport| if f.set { "yes" } else { "no" };
                out.push_str(&format!(
                    "  map: rank {}, riemannian {}, conformal {} (factor {:.6}), \
                     minimal fibers {}, umbilical fibers {}, geodesic horizontal {}\n",
                    c.rank,
                    yn(&c.riemannian_submersion),
                    yn(&c.horizontally_conformal),
                    c.conformal_factor,
                    yn(&c.fibers_minimal),
                    yn(&c.fibers_umbilical),
                    yn(&c.horizontal_totally_geodesic)
                ));
            }
            let fact_pass = s.facts.iter().filter(|f| f.pass).count();
            out.push_str(&format!("  facts: {fact_pass}/{} pass\n", s.facts.len()));
            for f in s.facts.iter().filter(|f| !f.pass) {
                out.push_str(&format!(
                    "    FAIL {} expected {:?}/{:?} observed {:?}/{:?}{}\n",
                    f.quantity,
                    f.expected_value,
                    f.expected_outcome,
                    f.observed_value,
                    f.observed_outcome,
                    f.error
                        .as_ref()
                        .map(|e| format!(" ({e})"))
                        .unwrap_or_default()
                ));
            }
            for e in &s.errors {
                out.push_str(&format!("  error: {e}\n"));
            }
        }
        out.push_str(&format!(
            "\nOVERALL: {}\n",
            if self.overall_pass { "PASS" } else { "FAIL" }
        ));
        out
    }
}
