//! The divergence and curvature identities the verifier checks, their
//! gate conditions, and the probe-based calibration that fixes the one
//! sign and one coefficient set with conflicting published variants.

use crate::almost_product::{AlmostProductStructure, StructureTensors};
use crate::error::{GeomError, Result};
use crate::expr::{parse_expr, ScalarExpr};
use crate::geometry::{Chart, CurvaturePackage, MetricField, VectorField};
use crate::maps::conformal_rescale;

/// Residual level treated as "identically satisfied" by the
/// calibration probes.
const PROBE_PASS: f64 = 1e-8;

/// Stable identifiers of the checked identities; these strings are the
/// external data contract used in reports and scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IdentityId {
    Walczak21,
    Umbilical22,
    Codim122,
    Mixed23,
    Integrable24,
    Minimal25,
    Projective31,
    Projective33,
    Fiber34,
    Conformal41,
    Conformal42,
    HorizConf43,
}

impl IdentityId {
    pub fn as_str(self) -> &'static str {
        match self {
            IdentityId::Walczak21 => "walczak_2_1",
            IdentityId::Umbilical22 => "umbilical_2_2",
            IdentityId::Codim122 => "codim1_2_2",
            IdentityId::Mixed23 => "mixed_2_3",
            IdentityId::Integrable24 => "integrable_2_4",
            IdentityId::Minimal25 => "minimal_2_5",
            IdentityId::Projective31 => "projective_3_1",
            IdentityId::Projective33 => "projective_3_3",
            IdentityId::Fiber34 => "fiber_3_4",
            IdentityId::Conformal41 => "conformal_4_1",
            IdentityId::Conformal42 => "conformal_4_2",
            IdentityId::HorizConf43 => "horiz_conf_4_3",
        }
    }

    pub fn all() -> [IdentityId; 12] {
        [
            IdentityId::Walczak21,
            IdentityId::Umbilical22,
            IdentityId::Codim122,
            IdentityId::Mixed23,
            IdentityId::Integrable24,
            IdentityId::Minimal25,
            IdentityId::Projective31,
            IdentityId::Projective33,
            IdentityId::Fiber34,
            IdentityId::Conformal41,
            IdentityId::Conformal42,
            IdentityId::HorizConf43,
        ]
    }

    /// Identities evaluated pointwise on a metric splitting.
    pub fn split_ids() -> [IdentityId; 8] {
        [
            IdentityId::Walczak21,
            IdentityId::Umbilical22,
            IdentityId::Codim122,
            IdentityId::Mixed23,
            IdentityId::Integrable24,
            IdentityId::Minimal25,
            IdentityId::Fiber34,
            IdentityId::HorizConf43,
        ]
    }

    /// Identities comparing an unrelated metric pair through the
    /// volume-ratio potential.
    pub fn pair_ids() -> [IdentityId; 2] {
        [IdentityId::Projective31, IdentityId::Projective33]
    }

    /// Identities for a conformal rescaling.
    pub fn conformal_ids() -> [IdentityId; 2] {
        [IdentityId::Conformal41, IdentityId::Conformal42]
    }
}

/// Sign of the horizontal mean-curvature norm term in the total
/// divergence identity. Published variants disagree; `calibrate`
/// settles it against probe geometries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignVariant {
    Plus,
    Minus,
}

impl SignVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            SignVariant::Plus => "plus",
            SignVariant::Minus => "minus",
        }
    }

    fn sign(self) -> f64 {
        match self {
            SignVariant::Plus => 1.0,
            SignVariant::Minus => -1.0,
        }
    }
}

/// Coefficient set of the mixed-divergence identity family. The
/// printed set is kept as a candidate; the repaired set is the one the
/// probe geometries satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixedForm {
    Printed,
    Repaired,
}

impl MixedForm {
    pub fn as_str(self) -> &'static str {
        match self {
            MixedForm::Printed => "printed",
            MixedForm::Repaired => "repaired",
        }
    }
}

/// Per-point outcome of one identity.
#[derive(Debug, Clone)]
pub enum PointOutcome {
    /// All gates passed; |lhs - rhs| is reported.
    Evaluated { residual: f64 },
    /// A hypothesis gate failed; the identity is vacuous here.
    Gated { reason: GeomError },
    /// A structural precondition (distribution rank) fails identically.
    WrongRank,
    /// Not an equation: the reported value is an integrand sample.
    Diagnostic { value: f64 },
}

/// Splitting data evaluated once per point and shared by all the
/// split identities.
#[derive(Debug, Clone)]
pub struct PointEval {
    pub tensors: StructureTensors,
    pub div_v_xi_v: f64,
    pub div_h_xi_v: f64,
    pub div_v_xi_h: f64,
    pub div_h_xi_h: f64,
    /// Ricci curvature on the first vertical frame vector.
    pub ric_vv: f64,
}

impl PointEval {
    /// Full divergence of the vertical mean curvature field.
    pub fn div_xi_v(&self) -> f64 {
        self.div_v_xi_v + self.div_h_xi_v
    }

    /// Full divergence of the horizontal mean curvature field.
    pub fn div_xi_h(&self) -> f64 {
        self.div_v_xi_h + self.div_h_xi_h
    }

    /// Full divergence of xi_V + xi_H.
    pub fn div_xi_total(&self) -> f64 {
        self.div_xi_v() + self.div_xi_h()
    }
}

/// Evaluate the shared splitting data at a point.
pub fn eval_split_point(
    structure: &AlmostProductStructure,
    curv: &CurvaturePackage,
    p: &[f64],
) -> Result<PointEval> {
    let tensors = structure.tensors_at(curv, p)?;
    let at = &curv.at;
    let xi_v = structure.xi_v_field();
    let xi_h = structure.xi_h_field();
    let div_v_xi_v = structure.divergence_in_frame(xi_v, &tensors.v_frame, at, p)?;
    let div_h_xi_v = structure.divergence_in_frame(xi_v, &tensors.h_frame, at, p)?;
    let div_v_xi_h = structure.divergence_in_frame(xi_h, &tensors.v_frame, at, p)?;
    let div_h_xi_h = structure.divergence_in_frame(xi_h, &tensors.h_frame, at, p)?;
    let e1 = &tensors.v_frame[0];
    let n = e1.len();
    let mut ric_vv = 0.0;
    for j in 0..n {
        for k in 0..n {
            ric_vv += curv.ricci[(j, k)] * e1[j] * e1[k];
        }
    }
    Ok(PointEval {
        tensors,
        div_v_xi_v,
        div_h_xi_v,
        div_v_xi_h,
        div_h_xi_h,
        ric_vv,
    })
}

/// Resolved configuration shared by all split-identity evaluations.
#[derive(Debug, Clone, Copy)]
pub struct SplitConfig {
    pub variant: SignVariant,
    pub mixed_form: MixedForm,
    pub gate_tol: f64,
}

/// Evaluate one splitting identity at a point.
///
/// Gate order is fixed so gated points report deterministically:
/// umbilicity of V before H, twist of V before H, then first-order
/// gates.
pub fn split_identity_outcome(
    id: IdentityId,
    cfg: &SplitConfig,
    p_rank: usize,
    q_rank: usize,
    pe: &PointEval,
) -> PointOutcome {
    let t = &pe.tensors;
    let s = cfg.variant.sign();
    let gate = cfg.gate_tol;
    let evaluated = |lhs: f64, rhs: f64| PointOutcome::Evaluated {
        residual: (lhs - rhs).abs(),
    };
    match id {
        IdentityId::Walczak21 => {
            // Total divergence of the mean curvature sum against the
            // mixed scalar curvature and the second-fundamental-form
            // norms.
            let lhs = pe.div_xi_total();
            let rhs = t.s_mix + t.q_v_norm_sq + t.q_h_norm_sq
                - t.f_v_norm_sq
                - t.f_h_norm_sq
                - t.xi_v_norm_sq
                + s * t.xi_h_norm_sq;
            evaluated(lhs, rhs)
        }
        IdentityId::Umbilical22 => {
            if t.umbilic_defect_v > gate {
                return PointOutcome::Gated {
                    reason: GeomError::NotUmbilical {
                        which: 'v',
                        defect: t.umbilic_defect_v,
                    },
                };
            }
            if t.umbilic_defect_h > gate {
                return PointOutcome::Gated {
                    reason: GeomError::NotUmbilical {
                        which: 'h',
                        defect: t.umbilic_defect_h,
                    },
                };
            }
            let pf = (p_rank as f64 - 1.0) / p_rank as f64;
            let qf = (q_rank as f64 - 1.0) / q_rank as f64;
            let lhs = pe.div_xi_total();
            let rhs = t.s_mix - t.f_v_norm_sq - t.f_h_norm_sq - pf * t.xi_v_norm_sq
                + s * qf * t.xi_h_norm_sq;
            evaluated(lhs, rhs)
        }
        IdentityId::Codim122 => {
            if p_rank != 1 {
                return PointOutcome::WrongRank;
            }
            let qh = t.q_h_norm_sq.sqrt();
            if qh > gate {
                return PointOutcome::Gated {
                    reason: GeomError::NotTotallyGeodesic {
                        which: 'h',
                        defect: qh,
                    },
                };
            }
            let dxh = pe.div_xi_h().abs();
            if dxh > gate {
                return PointOutcome::Gated {
                    reason: GeomError::GateFailed {
                        gate: "div_xi_h",
                        value: dxh,
                        tol: gate,
                    },
                };
            }
            // Unit normal Ricci curvature against the divergence of
            // the fiber mean curvature.
            evaluated(pe.div_xi_v(), pe.ric_vv - t.f_h_norm_sq)
        }
        IdentityId::Mixed23 => {
            let lhs = 2.0 * (pe.div_v_xi_h + pe.div_h_xi_v);
            let rhs = match cfg.mixed_form {
                MixedForm::Repaired => {
                    2.0 * t.s_mix + 0.5 * t.nabla_p_norm_sq
                        - 4.0 * t.f_v_norm_sq
                        - 4.0 * t.f_h_norm_sq
                }
                MixedForm::Printed => {
                    4.0 * t.s_mix + 0.5 * t.nabla_p_norm_sq - t.f_v_norm_sq - t.f_h_norm_sq
                }
            };
            evaluated(lhs, rhs)
        }
        IdentityId::Integrable24 => {
            let fv = t.f_v_norm_sq.sqrt();
            if fv > gate {
                return PointOutcome::Gated {
                    reason: GeomError::GateFailed {
                        gate: "f_v_norm",
                        value: fv,
                        tol: gate,
                    },
                };
            }
            let fh = t.f_h_norm_sq.sqrt();
            if fh > gate {
                return PointOutcome::Gated {
                    reason: GeomError::GateFailed {
                        gate: "f_h_norm",
                        value: fh,
                        tol: gate,
                    },
                };
            }
            let lhs = 2.0 * (pe.div_v_xi_h + pe.div_h_xi_v);
            let rhs = match cfg.mixed_form {
                MixedForm::Repaired => 2.0 * t.s_mix + 0.5 * t.nabla_p_norm_sq,
                MixedForm::Printed => 4.0 * t.s_mix + 0.5 * t.nabla_p_norm_sq,
            };
            evaluated(lhs, rhs)
        }
        IdentityId::Minimal25 => {
            let fv = t.f_v_norm_sq.sqrt();
            if fv > gate {
                return PointOutcome::Gated {
                    reason: GeomError::GateFailed {
                        gate: "f_v_norm",
                        value: fv,
                        tol: gate,
                    },
                };
            }
            let fh = t.f_h_norm_sq.sqrt();
            if fh > gate {
                return PointOutcome::Gated {
                    reason: GeomError::GateFailed {
                        gate: "f_h_norm",
                        value: fh,
                        tol: gate,
                    },
                };
            }
            let xv = t.xi_v_norm_sq.sqrt();
            if xv > gate {
                return PointOutcome::Gated {
                    reason: GeomError::GateFailed {
                        gate: "xi_v_norm",
                        value: xv,
                        tol: gate,
                    },
                };
            }
            // Minimal fibers make xi_V vanish along the leaves, but its
            // derivative across them must vanish too for the pointwise
            // statement; gate on it explicitly.
            let dhv = pe.div_h_xi_v.abs();
            if dhv > gate {
                return PointOutcome::Gated {
                    reason: GeomError::GateFailed {
                        gate: "div_h_xi_v",
                        value: dhv,
                        tol: gate,
                    },
                };
            }
            let rhs = match cfg.mixed_form {
                MixedForm::Repaired => t.s_mix + 0.25 * t.nabla_p_norm_sq,
                MixedForm::Printed => 2.0 * t.s_mix + 0.25 * t.nabla_p_norm_sq,
            };
            evaluated(pe.div_v_xi_h, rhs)
        }
        IdentityId::Fiber34 => PointOutcome::Diagnostic {
            value: 2.0 * t.s_mix + 0.25 * t.nabla_p_norm_sq,
        },
        IdentityId::HorizConf43 => {
            if t.umbilic_defect_v > gate {
                return PointOutcome::Gated {
                    reason: GeomError::NotUmbilical {
                        which: 'v',
                        defect: t.umbilic_defect_v,
                    },
                };
            }
            if t.umbilic_defect_h > gate {
                return PointOutcome::Gated {
                    reason: GeomError::NotUmbilical {
                        which: 'h',
                        defect: t.umbilic_defect_h,
                    },
                };
            }
            let fv = t.f_v_norm_sq.sqrt();
            if fv > gate {
                return PointOutcome::Gated {
                    reason: GeomError::GateFailed {
                        gate: "f_v_norm",
                        value: fv,
                        tol: gate,
                    },
                };
            }
            let pf = (p_rank as f64 - 1.0) / p_rank as f64;
            let qf = (q_rank as f64 - 1.0) / q_rank as f64;
            let lhs = pe.div_xi_total();
            let rhs = t.s_mix - t.f_h_norm_sq - pf * t.xi_v_norm_sq + s * qf * t.xi_h_norm_sq;
            evaluated(lhs, rhs)
        }
        other => panic!("{} is not a splitting identity", other.as_str()),
    }
}

/// A pair of metrics on one chart compared through the volume-ratio
/// potential psi.
#[derive(Debug, Clone)]
pub struct MetricPair {
    pub g: MetricField,
    pub gbar: MetricField,
    pub psi: ScalarExpr,
    dpsi: Vec<ScalarExpr>,
}

impl MetricPair {
    pub fn new(g: MetricField, gbar: MetricField) -> Result<Self> {
        if g.dim() != gbar.dim() {
            return Err(GeomError::InvalidConfig(
                "metric pair dimensions differ".into(),
            ));
        }
        let psi = crate::maps::projective_psi(&g, &gbar);
        let dpsi = (0..g.dim()).map(|i| psi.differentiate(i)).collect();
        Ok(MetricPair { g, gbar, psi, dpsi })
    }

    /// Max-entry residual of the full Ricci comparison:
    /// Ric_bar = Ric - (n-1)(Hess psi - dpsi (x) dpsi),
    /// with the Hessian taken in the base connection.
    pub fn full_residual(&self, p: &[f64]) -> Result<f64> {
        let n = self.g.dim();
        let nf = n as f64;
        let cg = self.g.curvature(p)?;
        let cbar = self.gbar.curvature(p)?;
        let hess = self.g.hessian(&self.psi, p)?;
        let dpsi: Vec<f64> = self.dpsi.iter().map(|e| e.eval(p)).collect::<Result<_>>()?;
        let mut res = 0.0f64;
        for j in 0..n {
            for k in 0..n {
                let rhs = cg.ricci[(j, k)] - (nf - 1.0) * (hess[(j, k)] - dpsi[j] * dpsi[k]);
                res = res.max((cbar.ricci[(j, k)] - rhs).abs());
            }
        }
        Ok(res)
    }

    /// Residual of the traced comparison:
    /// lap psi = (s - tr_g Ric_bar)/(n-1) + |grad psi|^2.
    pub fn trace_residual(&self, p: &[f64]) -> Result<f64> {
        let n = self.g.dim();
        let nf = n as f64;
        let cg = self.g.curvature(p)?;
        let cbar = self.gbar.curvature(p)?;
        let lap = self.g.laplacian(&self.psi, p)?;
        let grad2 = self.g.grad_norm_sq(&self.psi, p)?;
        let mut trace = 0.0;
        for j in 0..n {
            for k in 0..n {
                trace += cg.at.ginv[(j, k)] * cbar.ricci[(j, k)];
            }
        }
        let rhs = (cg.scalar - trace) / (nf - 1.0) + grad2;
        Ok((lap - rhs).abs())
    }
}

/// A conformal rescaling gbar = e^{2 sigma} g with gbar built
/// symbolically from sigma.
#[derive(Debug, Clone)]
pub struct ConformalPair {
    pub g: MetricField,
    pub gbar: MetricField,
    pub sigma: ScalarExpr,
}

impl ConformalPair {
    pub fn new(g: MetricField, sigma: ScalarExpr) -> Result<Self> {
        if let Some(axis) = sigma.max_coord() {
            if axis >= g.dim() {
                return Err(GeomError::CoordinateOutOfRange { axis, dim: g.dim() });
            }
        }
        let gbar = conformal_rescale(&g, &sigma)?;
        Ok(ConformalPair { g, gbar, sigma })
    }

    /// Scalar curvature of the rescaled metric at a point.
    pub fn scalar_bar(&self, p: &[f64]) -> Result<f64> {
        Ok(self.gbar.curvature(p)?.scalar)
    }

    /// Residuals of the scalar-curvature transformation law in both
    /// arrangements (solved for the rescaled and for the original
    /// curvature); they differ only by moving terms across the
    /// equality.
    pub fn residuals(&self, p: &[f64]) -> Result<(f64, f64)> {
        let nf = self.g.dim() as f64;
        let s = self.g.curvature(p)?.scalar;
        let sbar = self.gbar.curvature(p)?.scalar;
        let lap = self.g.laplacian(&self.sigma, p)?;
        let grad2 = self.g.grad_norm_sq(&self.sigma, p)?;
        let e2s = (2.0 * self.sigma.eval(p)?).exp();
        let correction = 2.0 * (nf - 1.0) * lap + (nf - 1.0) * (nf - 2.0) * grad2;
        let r1 = (e2s * sbar - (s - correction)).abs();
        let r2 = (s - (e2s * sbar + correction)).abs();
        Ok((r1, r2))
    }
}

/// Evidence from one calibration probe geometry.
#[derive(Debug, Clone)]
pub struct ProbeEvidence {
    pub scenario: String,
    pub plus_residual: f64,
    pub minus_residual: f64,
}

/// Outcome of the sign calibration.
#[derive(Debug, Clone)]
pub struct SignResolution {
    pub variant: SignVariant,
    pub forced: bool,
    pub evidence: Vec<ProbeEvidence>,
}

/// One candidate coefficient set and its worst probe residual.
#[derive(Debug, Clone)]
pub struct CoefficientCandidate {
    pub description: String,
    pub max_residual: f64,
}

/// Outcome of the mixed-identity coefficient calibration.
#[derive(Debug, Clone)]
pub struct CoefficientResolution {
    pub form: MixedForm,
    pub candidates: Vec<CoefficientCandidate>,
    pub note: String,
}

/// Both calibrations, resolved once per run.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub sign: SignResolution,
    pub mixed: CoefficientResolution,
}

fn probe_structures() -> Result<Vec<(String, AlmostProductStructure, Vec<Vec<f64>>)>> {
    let tau = 2.0 * std::f64::consts::PI;
    let torus2 = || Chart::new(vec![(0.0, tau); 2], vec![true; 2]);
    let diag2 = |a: &str, b: &str| -> Result<Vec<Vec<ScalarExpr>>> {
        Ok(vec![
            vec![parse_expr(a)?, ScalarExpr::zero()],
            vec![ScalarExpr::zero(), parse_expr(b)?],
        ])
    };
    let mut probes = Vec::new();

    // Fiber circles with a varying length: xi_V is nonzero, xi_H is
    // zero, so the splitting alone cannot discriminate the sign.
    let warped = AlmostProductStructure::from_span(
        MetricField::new(torus2()?, diag2("1", "(2 + sin(x0))^2")?)?,
        vec![VectorField::new(vec![
            ScalarExpr::zero(),
            ScalarExpr::one(),
        ])],
    )?;
    let grid2 = warped.metric.chart.grid(5);
    probes.push(("warped_torus".to_string(), warped.clone(), grid2.clone()));

    // Flat 3-torus with a rotating rank-1 vertical field: both mean
    // curvatures vanish, again non-discriminating, but the tensor
    // terms are all active.
    let chart3 = Chart::new(vec![(0.0, tau); 3], vec![true; 3])?;
    let id3: Vec<Vec<ScalarExpr>> = (0..3)
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
    let contact = AlmostProductStructure::from_span(
        MetricField::new(chart3.clone(), id3)?,
        vec![VectorField::new(vec![
            parse_expr("cos(x2)")?,
            parse_expr("sin(x2)")?,
            ScalarExpr::zero(),
        ])],
    )?;
    let grid3 = chart3.grid(4);
    probes.push(("contact_T3".to_string(), contact, grid3));

    // Swapping the roles on the warped torus moves the nonzero mean
    // curvature to the horizontal side, which is exactly what the sign
    // question is about.
    probes.push((
        "warped_torus_swapped".to_string(),
        warped.swapped()?,
        grid2.clone(),
    ));

    // Both mean curvatures nonzero at once.
    let twisted = AlmostProductStructure::from_span(
        MetricField::new(
            torus2()?,
            diag2("(1 + 1/2*sin(x1))^2", "(1 + 1/2*cos(x0))^2")?,
        )?,
        vec![VectorField::new(vec![
            ScalarExpr::zero(),
            ScalarExpr::one(),
        ])],
    )?;
    probes.push(("double_twisted_T2".to_string(), twisted, grid2));
    Ok(probes)
}

/// Resolve the sign and coefficient ambiguities against the probe
/// geometries. `forced` pins the sign (for diagnostics) but the
/// evidence is still gathered and reported.
pub fn calibrate(forced: Option<SignVariant>) -> Result<Calibration> {
    let probes = probe_structures()?;
    let mut evidence = Vec::new();
    // (description, s_mix coeff, nabla_p coeff, F coeff) for the mixed
    // identity: lhs = 2(div_V xi_H + div_H xi_V).
    let mut mixed_candidates: Vec<(String, f64, f64, f64)> = vec![(
        "printed: 4 s_mix + |nabla P|^2/2 - |F_V|^2 - |F_H|^2".to_string(),
        4.0,
        0.5,
        1.0,
    )];
    for k in [0.125, 0.25, 1.0, 2.0] {
        mixed_candidates.push((
            format!("printed with |nabla P|^2 coefficient rescaled to {k}"),
            4.0,
            k,
            1.0,
        ));
    }
    mixed_candidates.push((
        "repaired: 2 s_mix + |nabla P|^2/2 - 4|F_V|^2 - 4|F_H|^2".to_string(),
        2.0,
        0.5,
        4.0,
    ));
    let mut mixed_max = vec![0.0f64; mixed_candidates.len()];

    for (name, structure, points) in &probes {
        let mut plus_max = 0.0f64;
        let mut minus_max = 0.0f64;
        for p in points {
            let curv = structure.metric.curvature(p)?;
            let pe = eval_split_point(structure, &curv, p)?;
            let t = &pe.tensors;
            let base = pe.div_xi_total()
                - (t.s_mix + t.q_v_norm_sq + t.q_h_norm_sq
                    - t.f_v_norm_sq
                    - t.f_h_norm_sq
                    - t.xi_v_norm_sq);
            plus_max = plus_max.max((base - t.xi_h_norm_sq).abs());
            minus_max = minus_max.max((base + t.xi_h_norm_sq).abs());
            let lhs = 2.0 * (pe.div_v_xi_h + pe.div_h_xi_v);
            for (i, (_, cs, cp, cf)) in mixed_candidates.iter().enumerate() {
                let rhs =
                    cs * t.s_mix + cp * t.nabla_p_norm_sq - cf * (t.f_v_norm_sq + t.f_h_norm_sq);
                mixed_max[i] = mixed_max[i].max((lhs - rhs).abs());
            }
        }
        evidence.push(ProbeEvidence {
            scenario: name.clone(),
            plus_residual: plus_max,
            minus_residual: minus_max,
        });
    }

    let plus_total = evidence.iter().fold(0.0f64, |m, e| m.max(e.plus_residual));
    let minus_total = evidence.iter().fold(0.0f64, |m, e| m.max(e.minus_residual));
    let variant = match forced {
        Some(v) => v,
        None => {
            if minus_total <= plus_total {
                SignVariant::Minus
            } else {
                SignVariant::Plus
            }
        }
    };
    let sign = SignResolution {
        variant,
        forced: forced.is_some(),
        evidence,
    };

    let candidates: Vec<CoefficientCandidate> = mixed_candidates
        .iter()
        .zip(&mixed_max)
        .map(|((d, _, _, _), &m)| CoefficientCandidate {
            description: d.clone(),
            max_residual: m,
        })
        .collect();
    // Keep the printed coefficients if any probe-consistent rescaling
    // of the |nabla P|^2 term exists; otherwise fall back to the
    // repaired set.
    let printed_ok = candidates[..candidates.len() - 1]
        .iter()
        .any(|c| c.max_residual <= PROBE_PASS);
    let repaired_ok = candidates[candidates.len() - 1].max_residual <= PROBE_PASS;
    let (form, note) = if printed_ok {
        (
            MixedForm::Printed,
            "printed coefficients hold on all probes".to_string(),
        )
    } else if repaired_ok {
        (
            MixedForm::Repaired,
            "no rescaling of the |nabla P|^2 term makes the printed coefficients hold on \
             all probes; adopting the repaired set 2 s_mix + |nabla P|^2/2 - 4|F_V|^2 - 4|F_H|^2, \
             which they all satisfy"
                .to_string(),
        )
    } else {
        (
            MixedForm::Repaired,
            "warning: no candidate coefficient set holds on all probes; keeping the repaired set"
                .to_string(),
        )
    };
    let mixed = CoefficientResolution {
        form,
        candidates,
        note,
    };
    Ok(Calibration { sign, mixed })
}
