//! Smooth maps between charts: Jacobians, kernel distributions,
//! pullback metrics, conformal factors and the submersion classifiers.

use crate::almost_product::AlmostProductStructure;
use crate::error::{GeomError, Result};
use crate::expr::ScalarExpr;
use crate::geometry::{matrix_inverse_expr, Chart, MetricField};
use crate::linalg::{col_piv_qr, sym_eigenvalues, Mat};

/// Map between coordinate charts with expression-tree components.
#[derive(Debug, Clone)]
pub struct SmoothMap {
    pub source_dim: usize,
    pub target_dim: usize,
    pub components: Vec<ScalarExpr>,
    /// jac_expr[a][i] = d_i f^a.
    jac_expr: Vec<Vec<ScalarExpr>>,
}

impl SmoothMap {
    pub fn new(source_dim: usize, components: Vec<ScalarExpr>) -> Result<Self> {
        if components.is_empty() {
            return Err(GeomError::InvalidConfig(
                "a map needs at least one component".into(),
            ));
        }
        for c in &components {
            if let Some(axis) = c.max_coord() {
                if axis >= source_dim {
                    return Err(GeomError::CoordinateOutOfRange {
                        axis,
                        dim: source_dim,
                    });
                }
            }
        }
        let jac_expr = components
            .iter()
            .map(|c| (0..source_dim).map(|i| c.differentiate(i)).collect())
            .collect();
        Ok(SmoothMap {
            source_dim,
            target_dim: components.len(),
            components,
            jac_expr,
        })
    }

    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.eval(p)).collect()
    }

    /// Jacobian matrix J[a][i] = d_i f^a (target_dim x source_dim).
    pub fn jacobian_at(&self, p: &[f64]) -> Result<Mat> {
        let mut j = Mat::zeros(self.target_dim, self.source_dim);
        for a in 0..self.target_dim {
            for i in 0..self.source_dim {
                j[(a, i)] = self.jac_expr[a][i].eval(p)?;
            }
        }
        Ok(j)
    }

    /// self after `inner`: (self . inner)(x) = self(inner(x)).
    pub fn compose(&self, inner: &SmoothMap) -> Result<SmoothMap> {
        if self.source_dim != inner.target_dim {
            return Err(GeomError::InvalidConfig(format!(
                "cannot compose: inner target dim {} vs outer source dim {}",
                inner.target_dim, self.source_dim
            )));
        }
        let components = self
            .components
            .iter()
            .map(|c| c.substitute(&inner.components))
            .collect::<Result<_>>()?;
        SmoothMap::new(inner.source_dim, components)
    }
}

/// Jacobian together with a Euclidean-orthonormal basis of its kernel.
/// Errors with NotASubmersion when the rank drops below the target
/// dimension.
pub fn jacobian_kernel(f: &SmoothMap, p: &[f64]) -> Result<(Mat, Vec<Vec<f64>>)> {
    let j = f.jacobian_at(p)?;
    let qr = col_piv_qr(&j.transpose());
    if qr.rank < f.target_dim {
        return Err(GeomError::NotASubmersion {
            rank: qr.rank,
            target_dim: f.target_dim,
        });
    }
    // Trailing columns of Q span the orthogonal complement of the row
    // space of J, i.e. the kernel; sign normalization happens in the QR.
    let kernel = (qr.rank..f.source_dim).map(|c| qr.q.column(c)).collect();
    Ok((j, kernel))
}

/// Almost-product structure whose vertical distribution is Ker f_*.
///
/// The horizontal projector is assembled symbolically from the
/// Jacobian: h = g^{-1} J^T (J g^{-1} J^T)^{-1} J, and v = id - h, so
/// the mean curvature fields downstream stay exact.
pub fn kernel_structure(metric: MetricField, f: &SmoothMap) -> Result<AlmostProductStructure> {
    let n = metric.dim();
    let m = f.target_dim;
    if f.source_dim != n {
        return Err(GeomError::InvalidConfig(
            "map source dimension does not match the chart".into(),
        ));
    }
    if m >= n {
        return Err(GeomError::WrongRank {
            expected: n - 1,
            got: m,
        });
    }
    let ginv = matrix_inverse_expr(&metric.entries);
    let jac: &Vec<Vec<ScalarExpr>> = &f.jac_expr;
    // A = J g^{-1} J^T (m x m).
    let mut a = vec![vec![ScalarExpr::zero(); m]; m];
    #[allow(clippy::needless_range_loop)]
    for r in 0..m {
        for c in 0..m {
            let mut acc = ScalarExpr::zero();
            for i in 0..n {
                for jj in 0..n {
                    acc = acc.add(&jac[r][i].mul(&ginv[i][jj]).mul(&jac[c][jj]));
                }
            }
            a[r][c] = acc;
        }
    }
    let a_inv = matrix_inverse_expr(&a);
    let mut v_expr = vec![vec![ScalarExpr::zero(); n]; n];
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        for j in 0..n {
            let mut h_ij = ScalarExpr::zero();
            for k in 0..n {
                for r in 0..m {
                    for c in 0..m {
                        h_ij =
                            h_ij.add(&ginv[i][k].mul(&jac[r][k]).mul(&a_inv[r][c]).mul(&jac[c][j]));
                    }
                }
            }
            v_expr[i][j] = if i == j {
                ScalarExpr::one().sub(&h_ij)
            } else {
                h_ij.neg()
            };
        }
    }
    AlmostProductStructure::from_projector(metric, v_expr, n - m, None)
}

/// Pullback (f* gbar)_ij = d_i f^a d_j f^b (gbar_ab . f) as exact
/// expression trees. Requires the map to be an immersion of the source
/// chart (target dimension >= source dimension, full-rank Jacobian);
/// the rank is checked at the chart center, and `check_immersion`
/// covers whole grids.
pub fn pullback_metric(
    f: &SmoothMap,
    target_entries: &[Vec<ScalarExpr>],
    source_chart: Chart,
) -> Result<MetricField> {
    let n = f.source_dim;
    let m = f.target_dim;
    if source_chart.dim != n {
        return Err(GeomError::InvalidConfig(
            "source chart dimension does not match the map".into(),
        ));
    }
    if m < n || target_entries.len() != m {
        return Err(GeomError::SingularJacobian {
            rank: m.min(n),
            source_dim: n,
        });
    }
    check_immersion(f, std::slice::from_ref(&source_chart.center()))?;
    // Compose the target entries with the map.
    let mut composed = vec![vec![ScalarExpr::zero(); m]; m];
    for a in 0..m {
        for b in 0..m {
            composed[a][b] = target_entries[a][b].substitute(&f.components)?;
        }
    }
    let mut entries = vec![vec![ScalarExpr::zero(); n]; n];
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        for j in 0..n {
            let mut acc = ScalarExpr::zero();
            for a in 0..m {
                for b in 0..m {
                    acc = acc.add(&f.jac_expr[a][i].mul(&f.jac_expr[b][j]).mul(&composed[a][b]));
                }
            }
            entries[i][j] = acc;
        }
    }
    MetricField::new(source_chart, entries)
}

/// Verify full source rank of the Jacobian at each point.
pub fn check_immersion(f: &SmoothMap, points: &[Vec<f64>]) -> Result<()> {
    for p in points {
        let j = f.jacobian_at(p)?;
        let qr = col_piv_qr(&j);
        if qr.rank < f.source_dim {
            return Err(GeomError::SingularJacobian {
                rank: qr.rank,
                source_dim: f.source_dim,
            });
        }
    }
    Ok(())
}

/// Conformal factor sigma with gbar = e^{2 sigma} g, recovered from the
/// determinant ratio, plus the max-entry residual of that relation.
pub fn conformal_factor(g: &MetricField, gbar: &MetricField, p: &[f64]) -> Result<(f64, f64)> {
    let n = g.dim();
    let at = g.eval(p)?;
    let at_bar = gbar.eval(p)?;
    let sigma = (at_bar.det / at.det).ln() / (2.0 * n as f64);
    let scale = (2.0 * sigma).exp();
    let mut residual = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            residual = residual.max((at_bar.g[(i, j)] - scale * at.g[(i, j)]).abs());
        }
    }
    Ok((sigma, residual))
}

/// Volume-ratio potential of a metric pair:
/// psi = (1/(2(n+1))) log(det gbar / det g), as an exact tree.
pub fn projective_psi(g: &MetricField, gbar: &MetricField) -> ScalarExpr {
    let n = g.dim();
    let ratio = gbar.det_expr().div(&g.det_expr());
    let coeff = ScalarExpr::constant(1.0 / (2.0 * (n as f64 + 1.0)));
    coeff.mul(&ratio.log())
}

/// One classifier flag: the defining residual and whether it clears the
/// gate tolerance.
#[derive(Debug, Clone, Copy)]
pub struct ClassifierFlag {
    pub set: bool,
    pub residual: f64,
}

/// Pointwise classification of a submersion between metric charts.
#[derive(Debug, Clone)]
pub struct MapClassification {
    pub rank: usize,
    pub kernel: Vec<Vec<f64>>,
    pub riemannian_submersion: ClassifierFlag,
    pub horizontally_conformal: ClassifierFlag,
    /// Common singular value of the horizontal differential when the
    /// conformal flag is meaningful (dilation of the map).
    pub conformal_factor: f64,
    pub fibers_minimal: ClassifierFlag,
    pub fibers_umbilical: ClassifierFlag,
    pub horizontal_totally_geodesic: ClassifierFlag,
}

/// Classify f at p against the listed submersion properties.
///
/// `structure` must be the kernel splitting of f (vertical = Ker f_*),
/// and `target_entries` the target metric in target coordinates. Flag
/// residuals: riemannian - max deviation of the Gram matrix of
/// pushed-forward horizontal frame vectors from the identity;
/// horizontally conformal - spread of the singular values of the
/// horizontal differential; minimal/umbilical/geodesic - the norms of
/// the corresponding structure tensors.
pub fn classify_submersion(
    f: &SmoothMap,
    structure: &AlmostProductStructure,
    target_entries: &[Vec<ScalarExpr>],
    p: &[f64],
    gate_tol: f64,
) -> Result<MapClassification> {
    let m = f.target_dim;
    let (jac, kernel) = jacobian_kernel(f, p)?;
    let curv = structure.metric.curvature(p)?;
    let t = structure.tensors_at(&curv, p)?;

    // Gram matrix of the pushed-forward horizontal frame in the target
    // metric, evaluated at f(p).
    let fp = f.eval(p)?;
    let mut gbar = Mat::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            gbar[(a, b)] = target_entries[a][b].eval(&fp)?;
        }
    }
    let q = t.h_frame.len();
    if q != m {
        return Err(GeomError::NotASubmersion {
            rank: q.min(m),
            target_dim: m,
        });
    }
    let images: Vec<Vec<f64>> = t
        .h_frame
        .iter()
        .map(|e| {
            (0..m)
                .map(|a| (0..f.source_dim).map(|i| jac[(a, i)] * e[i]).sum())
                .collect()
        })
        .collect();
    let gram = Mat::from_fn(m, m, |a, b| {
        let mut s = 0.0;
        for r in 0..m {
            for c in 0..m {
                s += gbar[(r, c)] * images[a][r] * images[b][c];
            }
        }
        s
    });
    let mut riem_res = 0.0f64;
    for a in 0..m {
        for b in 0..m {
            let want = if a == b { 1.0 } else { 0.0 };
            riem_res = riem_res.max((gram[(a, b)] - want).abs());
        }
    }
    // Singular values of the horizontal differential are the square
    // roots of the Gram eigenvalues.
    let eigs = sym_eigenvalues(&gram);
    let svs: Vec<f64> = eigs.iter().map(|&e| e.max(0.0).sqrt()).collect();
    let mean_sv = svs.iter().sum::<f64>() / m as f64;
    let conf_res = svs
        .iter()
        .map(|s| (s - mean_sv).abs())
        .fold(0.0f64, f64::max);

    let flag = |residual: f64| ClassifierFlag {
        set: residual <= gate_tol,
        residual,
    };
    Ok(MapClassification {
        rank: m,
        kernel,
        riemannian_submersion: flag(riem_res),
        horizontally_conformal: flag(conf_res),
        conformal_factor: mean_sv,
        fibers_minimal: flag(t.xi_v_norm_sq.sqrt()),
        fibers_umbilical: flag(t.umbilic_defect_v),
        horizontal_totally_geodesic: flag(t.q_h_norm_sq.sqrt()),
    })
}

/// Max-entry distance between the projector of `structure` and the
/// kernel projector of f at p; a consistency check for scenarios that
/// provide both a span and a map.
pub fn projector_gap(
    structure: &AlmostProductStructure,
    kernel_split: &AlmostProductStructure,
    p: &[f64],
) -> Result<f64> {
    let a = structure.v_at(p)?;
    let b = kernel_split.v_at(p)?;
    let n = a.rows;
    let mut gap = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            gap = gap.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    Ok(gap)
}

/// Scalar-curvature check data for a conformal rescaling
/// gbar = e^{2 sigma} g, built symbolically.
pub fn conformal_rescale(g: &MetricField, sigma: &ScalarExpr) -> Result<MetricField> {
    let n = g.dim();
    let factor = sigma.mul(&ScalarExpr::constant(2.0)).exp();
    let entries = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| factor.mul(&g.entries[i][j]))
                .collect::<Vec<_>>()
        })
        .collect();
    MetricField::new(g.chart.clone(), entries)
}
