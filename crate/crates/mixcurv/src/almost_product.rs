//! Almost-product structures: a metric splitting TM = V + H encoded by
//! the g-orthogonal projector field v onto V, together with the tensors
//! the divergence identities consume.
//!
//! The projector is held symbolically, so the two mean curvature
//! fields come out as exact expression trees:
//!
//!   xi_V^k = h^k_m g^{li} (nabla_i v)^m_l
//!   xi_H^k = -v^k_m g^{li} (nabla_i v)^m_l
//!
//! (the second uses nabla h = -nabla v). Their divergences then inherit
//! the exactness of the expression engine; no finite differences enter
//! anywhere. Second fundamental forms and integrability tensors are
//! evaluated pointwise on g-orthonormal adapted frames:
//!
//!   Q_V(X, Y) = 1/2 [h((nabla_X v)Y) + h((nabla_Y v)X)]
//!   F_V(X, Y) = 1/2 [h((nabla_X v)Y) - h((nabla_Y v)X)]
//!
//! for X, Y in V, and the mirrored formulas with v and h exchanged for
//! Q_H, F_H. Squared norms sum over all ordered frame pairs.

use crate::error::{GeomError, Result};
use crate::expr::ScalarExpr;
use crate::geometry::{
    christoffel_expr, matrix_inverse_expr, CurvaturePackage, MetricAt, MetricField, VectorField,
};
use crate::linalg::{Lu, Mat};

/// Gram determinant below this is a degenerate span.
pub const GRAM_DET_MIN: f64 = 1e-10;

/// Squared residual below this rejects a frame candidate.
const FRAME_ACCEPT_SQ: f64 = 1e-12;

/// Metric splitting with cached symbolic projector and mean curvature
/// data.
#[derive(Debug, Clone)]
pub struct AlmostProductStructure {
    pub metric: MetricField,
    /// rank of the vertical distribution V.
    pub p_rank: usize,
    v_expr: Vec<Vec<ScalarExpr>>,
    /// dv_expr[k][m][l] = d_k v^m_l.
    dv_expr: Vec<Vec<Vec<ScalarExpr>>>,
    xi_v: VectorField,
    xi_h: VectorField,
    /// Spanning fields of V when the structure came from a span; used
    /// to seed the vertical frame.
    span: Option<Vec<VectorField>>,
    /// Spanning fields of H when the structure came from a horizontal
    /// span; used to seed the horizontal frame.
    h_span: Option<Vec<VectorField>>,
}

/// Pointwise tensor package of the splitting.
#[derive(Debug, Clone)]
pub struct StructureTensors {
    pub v_frame: Vec<Vec<f64>>,
    pub h_frame: Vec<Vec<f64>>,
    pub xi_v: Vec<f64>,
    pub xi_h: Vec<f64>,
    pub xi_v_norm_sq: f64,
    pub xi_h_norm_sq: f64,
    pub q_v_norm_sq: f64,
    pub q_h_norm_sq: f64,
    pub f_v_norm_sq: f64,
    pub f_h_norm_sq: f64,
    /// 1/2 of the fully contracted Frobenius square of nabla P,
    /// P = 2v - id.
    pub nabla_p_norm_sq: f64,
    /// |nabla_p_norm_sq - 4 (sum of Q and F norms)|, an internal
    /// consistency diagnostic: both sides are computed independently.
    pub frobenius_gap: f64,
    /// Sum of sectional curvatures over mixed frame pairs.
    pub s_mix: f64,
    /// max_{a,b} |Q_D(E_a, E_b) - delta_ab xi_D / rank|_g per
    /// distribution; zero exactly when D is totally umbilical.
    pub umbilic_defect_v: f64,
    pub umbilic_defect_h: f64,
    /// |trace_a Q_D(E_a, E_a) - xi_D|_g; both sides are independent
    /// computations of the mean curvature.
    pub q_v_trace_gap: f64,
    pub q_h_trace_gap: f64,
}

/// g-orthogonal projector onto the span of the given fields as exact
/// expression trees: S (S^T g S)^{-1} S^T g with S the field columns.
fn span_projector_expr(
    metric: &MetricField,
    fields: &[VectorField],
) -> Result<Vec<Vec<ScalarExpr>>> {
    let n = metric.dim();
    let p = fields.len();
    if p == 0 || p >= n {
        return Err(GeomError::WrongRank {
            expected: n - 1,
            got: p,
        });
    }
    for f in fields {
        if f.dim() != n {
            return Err(GeomError::InvalidConfig(
                "spanning field dimension does not match chart".into(),
            ));
        }
        for c in &f.components {
            if let Some(axis) = c.max_coord() {
                if axis >= n {
                    return Err(GeomError::CoordinateOutOfRange { axis, dim: n });
                }
            }
        }
    }
    let s_mat: Vec<Vec<ScalarExpr>> = (0..n)
        .map(|i| (0..p).map(|a| fields[a].components[i].clone()).collect())
        .collect();
    let g = &metric.entries;
    let mut gram = vec![vec![ScalarExpr::zero(); p]; p];
    for a in 0..p {
        for b in 0..p {
            let mut acc = ScalarExpr::zero();
            for i in 0..n {
                for j in 0..n {
                    acc = acc.add(&s_mat[i][a].mul(&g[i][j]).mul(&s_mat[j][b]));
                }
            }
            gram[a][b] = acc;
        }
    }
    let gram_inv = matrix_inverse_expr(&gram);
    let mut proj = vec![vec![ScalarExpr::zero(); n]; n];
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        for j in 0..n {
            let mut acc = ScalarExpr::zero();
            for a in 0..p {
                for b in 0..p {
                    for k in 0..n {
                        acc = acc.add(
                            &s_mat[i][a]
                                .mul(&gram_inv[a][b])
                                .mul(&s_mat[k][b])
                                .mul(&g[k][j]),
                        );
                    }
                }
            }
            proj[i][j] = acc;
        }
    }
    Ok(proj)
}

impl AlmostProductStructure {
    /// Splitting with V spanned by the given fields (in order).
    pub fn from_span(metric: MetricField, fields: Vec<VectorField>) -> Result<Self> {
        let p = fields.len();
        let v_expr = span_projector_expr(&metric, &fields)?;
        Self::from_projector(metric, v_expr, p, Some(fields))
    }

    /// Splitting with H spanned by the given fields (in order); V is
    /// the g-orthogonal complement. The fields seed the horizontal
    /// frame, so frame-dependent quantities follow their order.
    pub fn from_horizontal_span(metric: MetricField, fields: Vec<VectorField>) -> Result<Self> {
        let n = metric.dim();
        let q = fields.len();
        let h_expr = span_projector_expr(&metric, &fields)?;
        let v_expr: Vec<Vec<ScalarExpr>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            ScalarExpr::one().sub(&h_expr[i][j])
                        } else {
                            h_expr[i][j].neg()
                        }
                    })
                    .collect()
            })
            .collect();
        let mut s = Self::from_projector(metric, v_expr, n - q, None)?;
        s.h_span = Some(fields);
        Ok(s)
    }

    /// Splitting from an explicit projector field onto V. The caller
    /// guarantees idempotency and g-self-adjointness; `validate` checks
    /// both numerically.
    pub fn from_projector(
        metric: MetricField,
        v_expr: Vec<Vec<ScalarExpr>>,
        p_rank: usize,
        span: Option<Vec<VectorField>>,
    ) -> Result<Self> {
        let n = metric.dim();
        if p_rank == 0 || p_rank >= n {
            return Err(GeomError::WrongRank {
                expected: n - 1,
                got: p_rank,
            });
        }
        if v_expr.len() != n || v_expr.iter().any(|row| row.len() != n) {
            return Err(GeomError::InvalidConfig(format!(
                "projector must be {n}x{n}"
            )));
        }
        let dv_expr: Vec<Vec<Vec<ScalarExpr>>> = (0..n)
            .map(|k| {
                v_expr
                    .iter()
                    .map(|row| row.iter().map(|e| e.differentiate(k)).collect())
                    .collect()
            })
            .collect();
        // Exact mean curvature fields from the symbolic connection.
        let gamma = christoffel_expr(&metric.entries);
        let ginv = matrix_inverse_expr(&metric.entries);
        let mut trace_vec = vec![ScalarExpr::zero(); n];
        #[allow(clippy::needless_range_loop)]
        for m in 0..n {
            let mut acc = ScalarExpr::zero();
            for l in 0..n {
                for i in 0..n {
                    // (nabla_i v)^m_l
                    let mut nv = dv_expr[i][m][l].clone();
                    for s in 0..n {
                        nv = nv.add(&gamma[m][i][s].mul(&v_expr[s][l]));
                        nv = nv.sub(&gamma[s][i][l].mul(&v_expr[m][s]));
                    }
                    acc = acc.add(&ginv[l][i].mul(&nv));
                }
            }
            trace_vec[m] = acc;
        }
        let mut xi_v_comp = vec![ScalarExpr::zero(); n];
        let mut xi_h_comp = vec![ScalarExpr::zero(); n];
        #[allow(clippy::needless_range_loop)]
        for k in 0..n {
            let mut av = ScalarExpr::zero();
            let mut ah = ScalarExpr::zero();
            for m in 0..n {
                // h = id - v.
                let h_km = if k == m {
                    ScalarExpr::one().sub(&v_expr[k][m])
                } else {
                    v_expr[k][m].neg()
                };
                av = av.add(&h_km.mul(&trace_vec[m]));
                ah = ah.sub(&v_expr[k][m].mul(&trace_vec[m]));
            }
            xi_v_comp[k] = av;
            xi_h_comp[k] = ah;
        }
        Ok(AlmostProductStructure {
            metric,
            p_rank,
            v_expr,
            dv_expr,
            xi_v: VectorField::new(xi_v_comp),
            xi_h: VectorField::new(xi_h_comp),
            span,
            h_span: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn q_rank(&self) -> usize {
        self.dim() - self.p_rank
    }

    /// Mean curvature field of V (values lie in H).
    pub fn xi_v_field(&self) -> &VectorField {
        &self.xi_v
    }

    /// Mean curvature field of H (values lie in V).
    pub fn xi_h_field(&self) -> &VectorField {
        &self.xi_h
    }

    /// The same splitting with the roles of V and H exchanged. Spans
    /// swap roles with their distributions, so frame seeding carries
    /// over.
    pub fn swapped(&self) -> Result<Self> {
        let n = self.dim();
        let h_expr: Vec<Vec<ScalarExpr>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            ScalarExpr::one().sub(&self.v_expr[i][j])
                        } else {
                            self.v_expr[i][j].neg()
                        }
                    })
                    .collect()
            })
            .collect();
        let mut s = Self::from_projector(
            self.metric.clone(),
            h_expr,
            self.q_rank(),
            self.h_span.clone(),
        )?;
        s.h_span = self.span.clone();
        Ok(s)
    }

    /// Projector onto V evaluated at a point.
    pub fn v_at(&self, p: &[f64]) -> Result<Mat> {
        let n = self.dim();
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.v_expr[i][j].eval(p)?;
            }
        }
        Ok(m)
    }

    /// (nabla_i v)^m_l at a point, one matrix per derivative index i.
    pub fn nabla_v_at(&self, at: &MetricAt, p: &[f64]) -> Result<Vec<Mat>> {
        let n = self.dim();
        let v = self.v_at(p)?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut m = Mat::zeros(n, n);
            for mm in 0..n {
                for l in 0..n {
                    let mut val = self.dv_expr[i][mm][l].eval(p)?;
                    for s in 0..n {
                        val += at.gamma[mm][(i, s)] * v[(s, l)];
                        val -= at.gamma[s][(i, l)] * v[(mm, s)];
                    }
                    m[(mm, l)] = val;
                }
            }
            out.push(m);
        }
        Ok(out)
    }

    /// g-orthonormal adapted frames (vertical, horizontal) at a point.
    ///
    /// The vertical frame Gram-Schmidts the spanning fields in their
    /// given order when a span is available, otherwise it projects
    /// coordinate axes through v; the horizontal frame always projects
    /// axes through h = id - v. Candidates whose residual is nearly
    /// zero are skipped, which keeps the procedure deterministic and
    /// insensitive to which axes happen to lie in V.
    pub fn frames_at(&self, at: &MetricAt, p: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let n = self.dim();
        // Span degeneracy is checked before the projector is touched:
        // where a span collapses the projector expressions hit 0/0,
        // and the Gram determinant is the informative diagnosis.
        let eval_span = |fields: &Option<Vec<VectorField>>| -> Result<Option<Vec<Vec<f64>>>> {
            let Some(fields) = fields else {
                return Ok(None);
            };
            let vals: Vec<Vec<f64>> = fields.iter().map(|f| f.eval(p)).collect::<Result<_>>()?;
            let gram = Mat::from_fn(vals.len(), vals.len(), |a, b| at.inner(&vals[a], &vals[b]));
            let det = Lu::new(&gram).map(|lu| lu.det()).unwrap_or(0.0);
            if det.abs() < GRAM_DET_MIN {
                return Err(GeomError::DegenerateDistribution {
                    gram: det,
                    point: p.to_vec(),
                });
            }
            Ok(Some(vals))
        };
        let span_vals = eval_span(&self.span)?;
        let h_span_vals = eval_span(&self.h_span)?;
        let v = self.v_at(p)?;
        let h = Mat::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - v[(i, j)]
        });
        let v_candidates: Vec<Vec<f64>> = match span_vals {
            Some(vals) => vals,
            None => (0..n).map(|i| v.column(i)).collect(),
        };
        let h_candidates: Vec<Vec<f64>> = match h_span_vals {
            Some(vals) => vals,
            None => (0..n).map(|i| h.column(i)).collect(),
        };
        let v_frame = gram_schmidt(at, &v_candidates, self.p_rank, p)?;
        let h_frame = gram_schmidt(at, &h_candidates, self.q_rank(), p)?;
        Ok((v_frame, h_frame))
    }

    /// Frame-restricted divergence: sum_a g(nabla_{E_a} X, E_a) over
    /// the given g-orthonormal frame.
    pub fn divergence_in_frame(
        &self,
        x: &VectorField,
        frame: &[Vec<f64>],
        at: &MetricAt,
        p: &[f64],
    ) -> Result<f64> {
        let n = self.dim();
        let xv = x.eval(p)?;
        let dx = x.jacobian_at(p)?;
        let mut total = 0.0;
        for e in frame {
            // (nabla_E x)^m = E^i (d_i x^m + Gamma^m_is x^s)
            let mut nabla = vec![0.0; n];
            #[allow(clippy::needless_range_loop)]
            for m in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    let mut term = dx[(i, m)];
                    for s in 0..n {
                        term += at.gamma[m][(i, s)] * xv[s];
                    }
                    acc += e[i] * term;
                }
                nabla[m] = acc;
            }
            total += at.inner(&nabla, e);
        }
        Ok(total)
    }

    /// Full tensor package at a point.
    pub fn tensors_at(&self, curv: &CurvaturePackage, p: &[f64]) -> Result<StructureTensors> {
        let at = &curv.at;
        let n = self.dim();
        // Frames first: frames_at raises the informative error when the
        // span degenerates at this point.
        let (v_frame, h_frame) = self.frames_at(at, p)?;
        let v = self.v_at(p)?;
        let h = Mat::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - v[(i, j)]
        });
        let nabla_v = self.nabla_v_at(at, p)?;

        // (nabla_X v)Y for numeric X, Y.
        let apply_nabla_v = |x: &[f64], y: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; n];
            #[allow(clippy::needless_range_loop)]
            for m in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    for l in 0..n {
                        acc += x[i] * nabla_v[i][(m, l)] * y[l];
                    }
                }
                out[m] = acc;
            }
            out
        };
        let project = |mat: &Mat, w: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| (0..n).map(|j| mat[(i, j)] * w[j]).sum())
                .collect()
        };

        // Q and F tables on each frame; D = V uses nabla v projected by
        // h, D = H uses nabla h = -nabla v projected by v.
        let tables = |frame: &[Vec<f64>],
                      proj: &Mat,
                      sign: f64|
         -> (Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>) {
            let r = frame.len();
            let mut q = vec![vec![vec![0.0; n]; r]; r];
            let mut f = vec![vec![vec![0.0; n]; r]; r];
            for a in 0..r {
                for b in 0..r {
                    let xy = project(proj, &apply_nabla_v(&frame[a], &frame[b]));
                    let yx = project(proj, &apply_nabla_v(&frame[b], &frame[a]));
                    for i in 0..n {
                        q[a][b][i] = 0.5 * sign * (xy[i] + yx[i]);
                        f[a][b][i] = 0.5 * sign * (xy[i] - yx[i]);
                    }
                }
            }
            (q, f)
        };
        let (q_v, f_v) = tables(&v_frame, &h, 1.0);
        let (q_h, f_h) = tables(&h_frame, &v, -1.0);

        let norm_sq_table = |t: &[Vec<Vec<f64>>]| -> f64 {
            let mut s = 0.0;
            for row in t {
                for vec in row {
                    s += at.norm_sq(vec);
                }
            }
            s
        };
        let q_v_norm_sq = norm_sq_table(&q_v);
        let q_h_norm_sq = norm_sq_table(&q_h);
        let f_v_norm_sq = norm_sq_table(&f_v);
        let f_h_norm_sq = norm_sq_table(&f_h);

        let xi_v = self.xi_v.eval(p)?;
        let xi_h = self.xi_h.eval(p)?;
        let xi_v_norm_sq = at.norm_sq(&xi_v);
        let xi_h_norm_sq = at.norm_sq(&xi_h);

        // Fully contracted Frobenius square of nabla P, P = 2v - id:
        // sum g^{ii'} g_{mm'} g^{ll'} (nabla_i P)^m_l (nabla_i' P)^m'_l'
        // halved by convention, so that it equals 4 (|Q|^2 + |F|^2).
        let mut frob = 0.0;
        for i in 0..n {
            for ip in 0..n {
                let w_i = at.ginv[(i, ip)];
                if w_i == 0.0 {
                    continue;
                }
                for m in 0..n {
                    for mp in 0..n {
                        let w_m = at.g[(m, mp)];
                        if w_m == 0.0 {
                            continue;
                        }
                        for l in 0..n {
                            for lp in 0..n {
                                frob += w_i
                                    * w_m
                                    * at.ginv[(l, lp)]
                                    * (2.0 * nabla_v[i][(m, l)])
                                    * (2.0 * nabla_v[ip][(mp, lp)]);
                            }
                        }
                    }
                }
            }
        }
        let nabla_p_norm_sq = 0.5 * frob;
        let frobenius_gap =
            (nabla_p_norm_sq - 4.0 * (q_v_norm_sq + q_h_norm_sq + f_v_norm_sq + f_h_norm_sq)).abs();

        let mut s_mix = 0.0;
        for ea in &v_frame {
            for eb in &h_frame {
                s_mix += curv.sectional(ea, eb)?;
            }
        }

        // Umbilicity defect and trace gap per distribution.
        let defect_and_trace = |q: &[Vec<Vec<f64>>], xi: &[f64], rank: usize| -> (f64, f64) {
            let mut defect = 0.0f64;
            let mut trace = vec![0.0; n];
            for a in 0..rank {
                for i in 0..n {
                    trace[i] += q[a][a][i];
                }
                for b in 0..rank {
                    let mut diff = vec![0.0; n];
                    for i in 0..n {
                        let target = if a == b { xi[i] / rank as f64 } else { 0.0 };
                        diff[i] = q[a][b][i] - target;
                    }
                    defect = defect.max(at.norm_sq(&diff).sqrt());
                }
            }
            let gap: Vec<f64> = (0..n).map(|i| trace[i] - xi[i]).collect();
            (defect, at.norm_sq(&gap).sqrt())
        };
        let (umbilic_defect_v, q_v_trace_gap) = defect_and_trace(&q_v, &xi_v, self.p_rank);
        let (umbilic_defect_h, q_h_trace_gap) = defect_and_trace(&q_h, &xi_h, self.q_rank());

        Ok(StructureTensors {
            v_frame,
            h_frame,
            xi_v,
            xi_h,
            xi_v_norm_sq,
            xi_h_norm_sq,
            q_v_norm_sq,
            q_h_norm_sq,
            f_v_norm_sq,
            f_h_norm_sq,
            nabla_p_norm_sq,
            frobenius_gap,
            s_mix,
            umbilic_defect_v,
            umbilic_defect_h,
            q_v_trace_gap,
            q_h_trace_gap,
        })
    }

    /// Numeric sanity checks of the projector at a point: idempotency,
    /// g-self-adjointness and rank (trace).
    pub fn validate_at(&self, p: &[f64]) -> Result<()> {
        let n = self.dim();
        let at = self.metric.eval(p)?;
        let v = self.v_at(p)?;
        let vv = v.matmul(&v);
        let mut idem = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                idem = idem.max((vv[(i, j)] - v[(i, j)]).abs());
            }
        }
        if idem > 1e-9 {
            return Err(GeomError::InvalidConfig(format!(
                "projector not idempotent at {p:?} (defect {idem:.3e})"
            )));
        }
        let gv = at.g.matmul(&v);
        if !gv.is_symmetric(1e-9 * (1.0 + gv.max_abs())) {
            return Err(GeomError::InvalidConfig(format!(
                "projector not g-self-adjoint at {p:?}"
            )));
        }
        let trace: f64 = (0..n).map(|i| v[(i, i)]).sum();
        if (trace - self.p_rank as f64).abs() > 1e-9 {
            return Err(GeomError::WrongRank {
                expected: self.p_rank,
                got: trace.round() as usize,
            });
        }
        Ok(())
    }
}

/// g-orthonormal Gram-Schmidt over the candidate list in order,
/// skipping candidates whose residual after projection is nearly zero.
fn gram_schmidt(
    at: &MetricAt,
    candidates: &[Vec<f64>],
    rank: usize,
    p: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = candidates.first().map_or(0, |c| c.len());
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(rank);
    for cand in candidates {
        if frame.len() == rank {
            break;
        }
        let mut w = cand.clone();
        for e in &frame {
            let c = at.inner(&w, e);
            for i in 0..n {
                w[i] -= c * e[i];
            }
        }
        let nsq = at.norm_sq(&w);
        if nsq > FRAME_ACCEPT_SQ * (1.0 + at.norm_sq(cand)) {
            let inv = 1.0 / nsq.sqrt();
            for x in &mut w {
                *x *= inv;
            }
            frame.push(w);
        }
    }
    if frame.len() < rank {
        return Err(GeomError::DegenerateDistribution {
            gram: 0.0,
            point: p.to_vec(),
        });
    }
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::geometry::Chart;

    const TAU: f64 = 2.0 * std::f64::consts::PI;

    fn warped_torus() -> AlmostProductStructure {
        // g = dt^2 + f(t)^2 dtheta^2 with f = 2 + sin t; V = span{d_theta}.
        let chart = Chart::new(vec![(0.0, TAU), (0.0, TAU)], vec![true, true]).unwrap();
        let metric = MetricField::new(
            chart,
            vec![
                vec![parse_expr("1").unwrap(), parse_expr("0").unwrap()],
                vec![
                    parse_expr("0").unwrap(),
                    parse_expr("(2+sin(x0))^2").unwrap(),
                ],
            ],
        )
        .unwrap();
        let span = vec![VectorField::new(vec![
            ScalarExpr::zero(),
            ScalarExpr::one(),
        ])];
        AlmostProductStructure::from_span(metric, span).unwrap()
    }

    fn contact_t3() -> AlmostProductStructure {
        // Flat 3-torus; V spanned by the rotating field
        // W = (cos x2, sin x2, 0).
        let chart = Chart::new(vec![(0.0, TAU); 3], vec![true; 3]).unwrap();
        let id = |i: usize, j: usize| {
            if i == j {
                ScalarExpr::one()
            } else {
                ScalarExpr::zero()
            }
        };
        let metric = MetricField::new(
            chart,
            (0..3).map(|i| (0..3).map(|j| id(i, j)).collect()).collect(),
        )
        .unwrap();
        let span = vec![VectorField::new(vec![
            parse_expr("cos(x2)").unwrap(),
            parse_expr("sin(x2)").unwrap(),
            ScalarExpr::zero(),
        ])];
        AlmostProductStructure::from_span(metric, span).unwrap()
    }

    fn sphere_vertical_phi() -> AlmostProductStructure {
        let chart = Chart::new(
            vec![(0.3, std::f64::consts::PI - 0.3), (0.0, TAU)],
            vec![false, true],
        )
        .unwrap();
        let metric = MetricField::new(
            chart,
            vec![
                vec![parse_expr("1").unwrap(), parse_expr("0").unwrap()],
                vec![parse_expr("0").unwrap(), parse_expr("sin(x0)^2").unwrap()],
            ],
        )
        .unwrap();
        let span = vec![VectorField::new(vec![
            ScalarExpr::zero(),
            ScalarExpr::one(),
        ])];
        AlmostProductStructure::from_span(metric, span).unwrap()
    }

    fn double_twisted() -> AlmostProductStructure {
        // g = l1(x,y)^2 dx^2 + l2(x,y)^2 dy^2, V = span{d_y}.
        let chart = Chart::new(vec![(0.0, TAU), (0.0, TAU)], vec![true, true]).unwrap();
        let metric = MetricField::new(
            chart,
            vec![
                vec![
                    parse_expr("(1 + 1/2*sin(x1))^2").unwrap(),
                    parse_expr("0").unwrap(),
                ],
                vec![
                    parse_expr("0").unwrap(),
                    parse_expr("(1 + 1/2*cos(x0))^2").unwrap(),
                ],
            ],
        )
        .unwrap();
        let span = vec![VectorField::new(vec![
            ScalarExpr::zero(),
            ScalarExpr::one(),
        ])];
        AlmostProductStructure::from_span(metric, span).unwrap()
    }

    fn package_at(aps: &AlmostProductStructure, p: &[f64]) -> (CurvaturePackage, StructureTensors) {
        let curv = aps.metric.curvature(p).unwrap();
        let t = aps.tensors_at(&curv, p).unwrap();
        (curv, t)
    }

    #[test]
    fn warped_torus_structure_tensors() {
        let aps = warped_torus();
        // At t = 0: f = 2, f' = 1, f'' = 0.
        let (_, t) = package_at(&aps, &[0.0, 1.0]);
        assert!((t.xi_v[0] + 0.5).abs() < 1e-12, "xi_v = {:?}", t.xi_v);
        assert!(t.xi_v[1].abs() < 1e-12);
        assert!((t.xi_v_norm_sq - 0.25).abs() < 1e-12);
        assert!(t.xi_h_norm_sq < 1e-20, "horizontal circles are geodesics");
        assert!((t.q_v_norm_sq - 0.25).abs() < 1e-12);
        assert!(t.q_h_norm_sq < 1e-15);
        assert!(t.f_v_norm_sq < 1e-15 && t.f_h_norm_sq < 1e-15);
        assert!((t.nabla_p_norm_sq - 1.0).abs() < 1e-11, "4 (f'/f)^2 = 1");
        assert!(t.frobenius_gap < 1e-11);
        assert!(t.s_mix.abs() < 1e-11, "-f''/f = 0 at t = 0");
        assert!(t.umbilic_defect_v < 1e-12 && t.umbilic_defect_h < 1e-12);
        assert!(t.q_v_trace_gap < 1e-12 && t.q_h_trace_gap < 1e-12);

        // At t = pi/2: f = 3, f' = 0, f'' = -1, s_mix = 1/3.
        let (_, t2) = package_at(&aps, &[std::f64::consts::FRAC_PI_2, 2.0]);
        assert!(t2.xi_v_norm_sq < 1e-20);
        assert!((t2.s_mix - 1.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn warped_torus_partial_divergences() {
        let aps = warped_torus();
        let p = [0.0, 1.0];
        let at = aps.metric.eval(&p).unwrap();
        let (vf, hf) = aps.frames_at(&at, &p).unwrap();
        let div_v = aps
            .divergence_in_frame(aps.xi_v_field(), &vf, &at, &p)
            .unwrap();
        let div_h = aps
            .divergence_in_frame(aps.xi_v_field(), &hf, &at, &p)
            .unwrap();
        // div_V xi_V = -|xi_V|^2 = -1/4; div_H xi_V = -f''/f + (f'/f)^2 = 1/4.
        assert!((div_v + 0.25).abs() < 1e-11, "div_v = {div_v}");
        assert!((div_h - 0.25).abs() < 1e-11, "div_h = {div_h}");
        let total = aps.metric.divergence(aps.xi_v_field(), &p).unwrap();
        assert!((total.value - (div_v + div_h)).abs() < 1e-10);
        assert!(total.mismatch < 1e-10);
        assert!(total.value.abs() < 1e-11, "div xi_V = -f''/f = 0 at t = 0");
    }

    #[test]
    fn contact_structure_tensors() {
        let aps = contact_t3();
        let (_, t) = package_at(&aps, &[0.4, 1.1, 2.7]);
        assert!(t.xi_v_norm_sq < 1e-20 && t.xi_h_norm_sq < 1e-20);
        assert!(
            (t.q_h_norm_sq - 0.5).abs() < 1e-11,
            "q_h = {}",
            t.q_h_norm_sq
        );
        assert!((t.f_h_norm_sq - 0.5).abs() < 1e-11);
        assert!(t.q_v_norm_sq < 1e-15 && t.f_v_norm_sq < 1e-15);
        assert!((t.nabla_p_norm_sq - 4.0).abs() < 1e-10);
        assert!(t.frobenius_gap < 1e-10);
        assert!(t.s_mix.abs() < 1e-11, "flat metric");
        assert!(t.q_v_trace_gap < 1e-12 && t.q_h_trace_gap < 1e-12);
        // H is not umbilical here: xi_H = 0 but Q_H is nonzero.
        assert!(t.umbilic_defect_h > 0.4);
    }

    #[test]
    fn horizontal_span_agrees_with_complement_construction() {
        let vertical = contact_t3();
        let chart = Chart::new(vec![(0.0, TAU); 3], vec![true; 3]).unwrap();
        let id = |i: usize, j: usize| {
            if i == j {
                ScalarExpr::one()
            } else {
                ScalarExpr::zero()
            }
        };
        let metric = MetricField::new(
            chart,
            (0..3).map(|i| (0..3).map(|j| id(i, j)).collect()).collect(),
        )
        .unwrap();
        let horizontal = AlmostProductStructure::from_horizontal_span(
            metric,
            vec![
                VectorField::new(vec![
                    parse_expr("-sin(x2)").unwrap(),
                    parse_expr("cos(x2)").unwrap(),
                    ScalarExpr::zero(),
                ]),
                VectorField::new(vec![
                    ScalarExpr::zero(),
                    ScalarExpr::zero(),
                    ScalarExpr::one(),
                ]),
            ],
        )
        .unwrap();
        assert_eq!(horizontal.p_rank, 1);
        assert_eq!(horizontal.q_rank(), 2);
        let p = [0.7, 1.9, 2.3];
        let a = vertical.v_at(&p).unwrap();
        let b = horizontal.v_at(&p).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[(i, j)] - b[(i, j)]).abs() < 1e-12, "projectors differ");
            }
        }
        let xa = vertical.xi_h_field().eval(&p).unwrap();
        let xb = horizontal.xi_h_field().eval(&p).unwrap();
        for k in 0..3 {
            assert!((xa[k] - xb[k]).abs() < 1e-12);
        }
        // The horizontal frame follows the declared span order.
        let (_, t) = package_at(&horizontal, &p);
        let e1 = &t.h_frame[0];
        assert!((e1[0] + p[2].sin()).abs() < 1e-12);
        assert!((e1[1] - p[2].cos()).abs() < 1e-12);
        assert!(e1[2].abs() < 1e-12);
        let (_, tv) = package_at(&vertical, &p);
        assert!((t.q_h_norm_sq - tv.q_h_norm_sq).abs() < 1e-12);
        assert!((t.f_h_norm_sq - tv.f_h_norm_sq).abs() < 1e-12);
        assert!((t.umbilic_defect_h - tv.umbilic_defect_h).abs() < 1e-12);
        horizontal.validate_at(&p).unwrap();
    }

    #[test]
    fn sphere_mixed_curvature_and_divergences() {
        let aps = sphere_vertical_phi();
        let theta = std::f64::consts::FRAC_PI_3;
        let p = [theta, 0.9];
        let (_, t) = package_at(&aps, &p);
        assert!((t.s_mix - 1.0).abs() < 1e-11);
        // xi_V = -cot(theta) d_theta.
        assert!((t.xi_v[0] + 1.0 / theta.tan()).abs() < 1e-11);
        assert!(t.xi_v[1].abs() < 1e-14);
        let at = aps.metric.eval(&p).unwrap();
        let (_, hf) = aps.frames_at(&at, &p).unwrap();
        let div_h = aps
            .divergence_in_frame(aps.xi_v_field(), &hf, &at, &p)
            .unwrap();
        let expected = 1.0 / (theta.sin() * theta.sin());
        assert!((div_h - expected).abs() < 1e-10);
    }

    #[test]
    fn double_twisted_mean_curvature_fields() {
        let aps = double_twisted();
        let p = [1.2, 0.7];
        let (_, t) = package_at(&aps, &p);
        // xi_V = -(d_x l2)/(l2 l1^2) d_x, xi_H = -(d_y l1)/(l1 l2^2) d_y.
        let l1 = 1.0 + 0.5 * p[1].sin();
        let l2 = 1.0 + 0.5 * p[0].cos();
        let dl2_dx = -0.5 * p[0].sin();
        let dl1_dy = 0.5 * p[1].cos();
        let exp_xi_v = -dl2_dx / (l2 * l1 * l1);
        let exp_xi_h = -dl1_dy / (l1 * l2 * l2);
        assert!(
            (t.xi_v[0] - exp_xi_v).abs() < 1e-12,
            "{} vs {exp_xi_v}",
            t.xi_v[0]
        );
        assert!(t.xi_v[1].abs() < 1e-14);
        assert!((t.xi_h[1] - exp_xi_h).abs() < 1e-12);
        assert!(t.xi_h[0].abs() < 1e-14);
        // Rank-one distributions are automatically umbilical.
        assert!(t.umbilic_defect_v < 1e-12 && t.umbilic_defect_h < 1e-12);
        assert!(t.frobenius_gap < 1e-11);
    }

    #[test]
    fn swapped_structure_exchanges_roles() {
        let aps = warped_torus();
        let sw = aps.swapped().unwrap();
        assert_eq!(sw.p_rank, 1);
        let p = [0.7, 2.1];
        let (_, t) = package_at(&aps, &p);
        let (_, ts) = package_at(&sw, &p);
        assert!((t.xi_v_norm_sq - ts.xi_h_norm_sq).abs() < 1e-12);
        assert!((t.xi_h_norm_sq - ts.xi_v_norm_sq).abs() < 1e-12);
        assert!((t.q_v_norm_sq - ts.q_h_norm_sq).abs() < 1e-11);
        assert!((t.f_h_norm_sq - ts.f_v_norm_sq).abs() < 1e-11);
        assert!((t.s_mix - ts.s_mix).abs() < 1e-11);
        assert!((t.nabla_p_norm_sq - ts.nabla_p_norm_sq).abs() < 1e-10);
        for i in 0..2 {
            assert!((t.xi_v[i] - ts.xi_h[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn span_rescaling_leaves_tensors_invariant() {
        let chart = Chart::new(
            vec![(0.3, std::f64::consts::PI - 0.3), (0.0, TAU)],
            vec![false, true],
        )
        .unwrap();
        let metric = MetricField::new(
            chart,
            vec![
                vec![parse_expr("1").unwrap(), parse_expr("0").unwrap()],
                vec![parse_expr("0").unwrap(), parse_expr("sin(x0)^2").unwrap()],
            ],
        )
        .unwrap();
        let scaled = AlmostProductStructure::from_span(
            metric,
            vec![VectorField::new(vec![
                ScalarExpr::zero(),
                parse_expr("exp(cos(x0))").unwrap(),
            ])],
        )
        .unwrap();
        let plain = sphere_vertical_phi();
        let p = [1.1, 0.4];
        let (_, a) = package_at(&plain, &p);
        let (_, b) = package_at(&scaled, &p);
        assert!((a.xi_v[0] - b.xi_v[0]).abs() < 1e-11);
        assert!((a.s_mix - b.s_mix).abs() < 1e-11);
        assert!((a.q_v_norm_sq - b.q_v_norm_sq).abs() < 1e-11);
        assert!((a.nabla_p_norm_sq - b.nabla_p_norm_sq).abs() < 1e-10);
    }

    #[test]
    fn projector_is_idempotent_and_self_adjoint() {
        for aps in [warped_torus(), contact_t3(), double_twisted()] {
            let p = aps.metric.chart.center();
            aps.validate_at(&p).unwrap();
        }
    }

    #[test]
    fn frames_are_orthonormal_and_split() {
        let aps = contact_t3();
        let p = [0.9, 2.2, 5.0];
        let at = aps.metric.eval(&p).unwrap();
        let (vf, hf) = aps.frames_at(&at, &p).unwrap();
        assert_eq!(vf.len(), 1);
        assert_eq!(hf.len(), 2);
        let all: Vec<&Vec<f64>> = vf.iter().chain(hf.iter()).collect();
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((at.inner(a, b) - want).abs() < 1e-11);
            }
        }
        // Vertical frame vector is proportional to W.
        let w = [p[2].cos(), p[2].sin(), 0.0];
        let dot = at.inner(&vf[0], &w).abs();
        assert!((dot - 1.0).abs() < 1e-11);
    }

    #[test]
    fn degenerate_span_is_detected() {
        let chart = Chart::new(vec![(0.0, TAU), (0.0, TAU)], vec![true, true]).unwrap();
        let id = vec![
            vec![parse_expr("1").unwrap(), parse_expr("0").unwrap()],
            vec![parse_expr("0").unwrap(), parse_expr("1").unwrap()],
        ];
        let metric = MetricField::new(chart, id).unwrap();
        // Field vanishes at x0 = 0.
        let aps = AlmostProductStructure::from_span(
            metric,
            vec![VectorField::new(vec![
                parse_expr("sin(x0)").unwrap(),
                ScalarExpr::zero(),
            ])],
        )
        .unwrap();
        let at = aps.metric.eval(&[1.0, 1.0]).unwrap();
        assert!(aps.frames_at(&at, &[1.0, 1.0]).is_ok());
        // The projector itself is singular where the span dies, so the
        // metric data is fine but the frame construction must refuse.
        let bad = [0.0, 1.0];
        let at_bad = aps.metric.eval(&bad).unwrap();
        assert!(matches!(
            aps.frames_at(&at_bad, &bad),
            Err(GeomError::DegenerateDistribution { .. })
        ));
    }

    #[test]
    fn rank_bounds_are_enforced() {
        let chart = Chart::new(vec![(0.0, 1.0), (0.0, 1.0)], vec![false, false]).unwrap();
        let id = vec![
            vec![parse_expr("1").unwrap(), parse_expr("0").unwrap()],
            vec![parse_expr("0").unwrap(), parse_expr("1").unwrap()],
        ];
        let metric = MetricField::new(chart, id).unwrap();
        let full_span = vec![
            VectorField::new(vec![ScalarExpr::one(), ScalarExpr::zero()]),
            VectorField::new(vec![ScalarExpr::zero(), ScalarExpr::one()]),
        ];
        assert!(matches!(
            AlmostProductStructure::from_span(metric.clone(), full_span),
            Err(GeomError::WrongRank { .. })
        ));
        assert!(matches!(
            AlmostProductStructure::from_span(metric, vec![]),
            Err(GeomError::WrongRank { .. })
        ));
    }
}
