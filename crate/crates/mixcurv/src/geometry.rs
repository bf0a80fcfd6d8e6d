//! Charts, metric fields and the curvature pipeline.
//!
//! A chart is a coordinate box; a metric is a symmetric matrix of
//! expression trees over the chart coordinates. First and second
//! metric derivatives are differentiated once at construction and the
//! whole curvature stack (Christoffel symbols, Riemann and Ricci
//! tensors, scalar and sectional curvature) is assembled numerically
//! from those exact trees point by point.
//!
//! Index conventions used throughout:
//!   Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)
//!   R^l_{ijk}  = d_i Gamma^l_jk - d_j Gamma^l_ik
//!                + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik
//!   Ric_jk     = R^l_{ljk},  s = g^{jk} Ric_jk
//!   sec(X, Y)  = <R(X,Y)Y, X> / (|X|^2 |Y|^2 - <X,Y>^2)

use crate::error::{GeomError, Result};
use crate::expr::ScalarExpr;
use crate::linalg::{sym_eigenvalues, Lu, Mat};
use rand::Rng;

pub const SPD_MIN_EIGENVALUE: f64 = 1e-10;

/// Coordinate box with per-axis periodicity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub dim: usize,
    pub bounds: Vec<(f64, f64)>,
    pub periodic: Vec<bool>,
}

impl Chart {
    pub fn new(bounds: Vec<(f64, f64)>, periodic: Vec<bool>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() != periodic.len() {
            return Err(GeomError::InvalidConfig(
                "chart needs matching, non-empty bounds and periodicity lists".into(),
            ));
        }
        for (axis, &(lo, hi)) in bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(GeomError::InvalidConfig(format!(
                    "axis {axis} has invalid bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(Chart {
            dim: bounds.len(),
            bounds,
            periodic,
        })
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn is_fully_periodic(&self) -> bool {
        self.periodic.iter().all(|&p| p)
    }

    /// Evaluation lattice: `n` points per axis. Periodic axes omit the
    /// duplicate endpoint; bounded axes include both ends.
    pub fn grid(&self, n: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim)
            .map(|a| {
                let (lo, hi) = self.bounds[a];
                if self.periodic[a] {
                    (0..n)
                        .map(|j| lo + (hi - lo) * j as f64 / n as f64)
                        .collect()
                } else {
                    (0..n)
                        .map(|j| lo + (hi - lo) * j as f64 / (n - 1).max(1) as f64)
                        .collect()
                }
            })
            .collect();
        let mut points = Vec::with_capacity(n.pow(self.dim as u32));
        let mut idx = vec![0usize; self.dim];
        loop {
            points.push((0..self.dim).map(|a| axes[a][idx[a]]).collect());
            let mut a = self.dim;
            loop {
                if a == 0 {
                    return points;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < n {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    /// Uniform point in the chart interior, inset 5% from each wall.
    pub fn random_point<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|&(lo, hi)| {
                let margin = 0.05 * (hi - lo);
                rng.gen_range((lo + margin)..(hi - margin))
            })
            .collect()
    }
}

/// Vector field with expression-tree components.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub components: Vec<ScalarExpr>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarExpr>) -> Self {
        VectorField { components }
    }

    pub fn zero(dim: usize) -> Self {
        VectorField {
            components: vec![ScalarExpr::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.eval(p)).collect()
    }

    /// Pointwise component derivatives d_i X^k as a matrix [i][k].
    pub fn jacobian_at(&self, p: &[f64]) -> Result<Mat> {
        let n = self.components.len();
        let mut out = Mat::zeros(n, n);
        for (k, c) in self.components.iter().enumerate() {
            for i in 0..n {
                out[(i, k)] = c.differentiate(i).eval(p)?;
            }
        }
        Ok(out)
    }
}

/// Value of the divergence together with the mismatch between its two
/// independent computations (connection trace vs. density formula).
#[derive(Debug, Clone, Copy)]
pub struct DivergenceValue {
    pub value: f64,
    pub mismatch: f64,
}

/// Pointwise metric data: the matrix, its inverse, first derivatives
/// and Christoffel symbols.
#[derive(Debug, Clone)]
pub struct MetricAt {
    pub g: Mat,
    pub ginv: Mat,
    /// dg[k][(i, j)] = d_k g_ij
    pub dg: Vec<Mat>,
    /// gamma[k][(i, j)] = Gamma^k_ij
    pub gamma: Vec<Mat>,
    pub det: f64,
    pub sqrt_det: f64,
}

impl MetricAt {
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.g.rows;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.g[(i, j)] * x[i] * y[j];
            }
        }
        s
    }

    pub fn norm_sq(&self, x: &[f64]) -> f64 {
        self.inner(x, x)
    }
}

/// Full curvature stack at a point.
#[derive(Debug, Clone)]
pub struct CurvaturePackage {
    pub at: MetricAt,
    /// riemann[l][i][j][k] = R^l_{ijk}, stored flat.
    riemann: Vec<f64>,
    pub ricci: Mat,
    pub scalar: f64,
    dim: usize,
}

impl CurvaturePackage {
    pub fn riemann(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dim;
        self.riemann[((l * n + i) * n + j) * n + k]
    }

    /// R(X, Y)Z with all-lower evaluation deferred to the caller.
    pub fn riemann_apply(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n];
        for l in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        s += self.riemann(l, i, j, k) * x[i] * y[j] * z[k];
                    }
                }
            }
            out[l] = s;
        }
        out
    }

    /// Sectional curvature of span{x, y}.
    pub fn sectional(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let xx = self.at.norm_sq(x);
        let yy = self.at.norm_sq(y);
        let xy = self.at.inner(x, y);
        let den = xx * yy - xy * xy;
        if den <= 1e-12 * (xx * yy).max(1e-300) {
            return Err(GeomError::DegeneratePlane { gram: den });
        }
        let ryyx = self.riemann_apply(x, y, y);
        let num = self.at.inner(&ryyx, x);
        Ok(num / den)
    }
}

/// Symmetric matrix of scalar expressions with cached derivative trees.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub chart: Chart,
    pub entries: Vec<Vec<ScalarExpr>>,
    /// dg_expr[k][i][j] = d_k g_ij as a tree.
    dg_expr: Vec<Vec<Vec<ScalarExpr>>>,
    /// ddg_expr[l][k][i][j] = d_l d_k g_ij as a tree.
    ddg_expr: Vec<Vec<Vec<Vec<ScalarExpr>>>>,
    /// sqrt(det g) and its first derivatives as trees.
    sqrt_det_expr: ScalarExpr,
    d_sqrt_det_expr: Vec<ScalarExpr>,
}

impl MetricField {
    pub fn new(chart: Chart, entries: Vec<Vec<ScalarExpr>>) -> Result<Self> {
        let n = chart.dim;
        if entries.len() != n || entries.iter().any(|row| row.len() != n) {
            return Err(GeomError::InvalidConfig(format!(
                "metric must be {n}x{n} for a {n}-dimensional chart"
            )));
        }
        for row in &entries {
            for e in row {
                if let Some(axis) = e.max_coord() {
                    if axis >= n {
                        return Err(GeomError::CoordinateOutOfRange { axis, dim: n });
                    }
                }
            }
        }
        let dg_expr: Vec<Vec<Vec<ScalarExpr>>> = (0..n)
            .map(|k| {
                entries
                    .iter()
                    .map(|row| row.iter().map(|e| e.differentiate(k)).collect())
                    .collect()
            })
            .collect();
        let ddg_expr: Vec<Vec<Vec<Vec<ScalarExpr>>>> = (0..n)
            .map(|l| {
                (0..n)
                    .map(|k| {
                        dg_expr[k]
                            .iter()
                            .map(|row: &Vec<ScalarExpr>| {
                                row.iter().map(|e| e.differentiate(l)).collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let det_expr = sym_det_expr(&entries);
        let sqrt_det_expr = det_expr.sqrt();
        let d_sqrt_det_expr = (0..n).map(|k| sqrt_det_expr.differentiate(k)).collect();
        Ok(MetricField {
            chart,
            entries,
            dg_expr,
            ddg_expr,
            sqrt_det_expr,
            d_sqrt_det_expr,
        })
    }

    pub fn dim(&self) -> usize {
        self.chart.dim
    }

    /// Determinant of the metric as an expression tree.
    pub fn det_expr(&self) -> ScalarExpr {
        sym_det_expr(&self.entries)
    }

    /// Symbolic inverse via the adjugate; used where downstream fields
    /// must stay differentiable.
    pub fn inverse_expr(&self) -> Vec<Vec<ScalarExpr>> {
        matrix_inverse_expr(&self.entries)
    }

    pub fn eval(&self, p: &[f64]) -> Result<MetricAt> {
        let n = self.dim();
        let mut g = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = self.entries[i][j].eval(p)?;
            }
        }
        if !g.is_symmetric(1e-12 * (1.0 + g.max_abs())) {
            return Err(GeomError::InvalidConfig(format!(
                "metric not symmetric at {p:?}"
            )));
        }
        let eigs = sym_eigenvalues(&g);
        if eigs[0] <= SPD_MIN_EIGENVALUE {
            return Err(GeomError::NotPositiveDefinite {
                min_eig: eigs[0],
                point: p.to_vec(),
            });
        }
        let lu = Lu::new(&g).map_err(|ratio| GeomError::SingularMetric {
            ratio,
            point: p.to_vec(),
        })?;
        let ginv = lu.inverse();
        let det = lu.det();
        let mut dg = Vec::with_capacity(n);
        for k in 0..n {
            let mut m = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = self.dg_expr[k][i][j].eval(p)?;
                }
            }
            dg.push(m);
        }
        let gamma = christoffel(&ginv, &dg);
        Ok(MetricAt {
            g,
            ginv,
            dg,
            gamma,
            det,
            sqrt_det: det.sqrt(),
        })
    }

    /// Curvature stack at a point.
    pub fn curvature(&self, p: &[f64]) -> Result<CurvaturePackage> {
        let n = self.dim();
        let at = self.eval(p)?;
        // Second metric derivatives.
        let mut ddg = vec![vec![Mat::zeros(n, n); n]; n];
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        ddg[l][k][(i, j)] = self.ddg_expr[l][k][i][j].eval(p)?;
                    }
                }
            }
        }
        // d_i ginv = -ginv (d_i g) ginv.
        let dginv: Vec<Mat> = (0..n)
            .map(|i| {
                let m = at.ginv.matmul(&at.dg[i]).matmul(&at.ginv);
                Mat::from_fn(n, n, |a, b| -m[(a, b)])
            })
            .collect();
        // dgamma[i][l][(j, k)] = d_i Gamma^l_jk.
        let mut dgamma = vec![vec![Mat::zeros(n, n); n]; n];
        for i in 0..n {
            for l in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            let a = at.dg[j][(k, m)] + at.dg[k][(j, m)] - at.dg[m][(j, k)];
                            let da = ddg[i][j][(k, m)] + ddg[i][k][(j, m)] - ddg[i][m][(j, k)];
                            s += dginv[i][(l, m)] * a + at.ginv[(l, m)] * da;
                        }
                        dgamma[i][l][(j, k)] = 0.5 * s;
                    }
                }
            }
        }
        let mut riemann = vec![0.0; n * n * n * n];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut v = dgamma[i][l][(j, k)] - dgamma[j][l][(i, k)];
                        for m in 0..n {
                            v += at.gamma[l][(i, m)] * at.gamma[m][(j, k)]
                                - at.gamma[l][(j, m)] * at.gamma[m][(i, k)];
                        }
                        riemann[((l * n + i) * n + j) * n + k] = v;
                    }
                }
            }
        }
        let ricci = Mat::from_fn(n, n, |j, k| {
            (0..n).map(|l| riemann[((l * n + l) * n + j) * n + k]).sum()
        });
        let mut scalar = 0.0;
        for j in 0..n {
            for k in 0..n {
                scalar += at.ginv[(j, k)] * ricci[(j, k)];
            }
        }
        Ok(CurvaturePackage {
            at,
            riemann,
            ricci,
            scalar,
            dim: n,
        })
    }

    /// Divergence of a vector field, computed independently through the
    /// connection trace and the density formula.
    pub fn divergence(&self, x: &VectorField, p: &[f64]) -> Result<DivergenceValue> {
        let n = self.dim();
        if x.dim() != n {
            return Err(GeomError::InvalidConfig(
                "vector field dimension does not match chart".into(),
            ));
        }
        let at = self.eval(p)?;
        let xv = x.eval(p)?;
        let dx = x.jacobian_at(p)?;
        // Trace route: d_i X^i + Gamma^i_im X^m.
        let mut trace = 0.0;
        for i in 0..n {
            trace += dx[(i, i)];
            for m in 0..n {
                trace += at.gamma[i][(i, m)] * xv[m];
            }
        }
        // Density route: (1/sqrt g) d_i (sqrt g X^i), expanded so the
        // only numeric derivative inputs are exact trees.
        let sqrt_det = self.sqrt_det_expr.eval(p)?;
        let mut density = 0.0;
        for i in 0..n {
            density += self.d_sqrt_det_expr[i].eval(p)? * xv[i] + sqrt_det * dx[(i, i)];
        }
        density /= sqrt_det;
        Ok(DivergenceValue {
            value: trace,
            mismatch: (trace - density).abs(),
        })
    }

    /// Gradient (index raised), Hessian and Laplace-Beltrami operator
    /// of a scalar expression at a point.
    pub fn gradient(&self, f: &ScalarExpr, p: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        let at = self.eval(p)?;
        let df: Vec<f64> = (0..n)
            .map(|i| f.differentiate(i).eval(p))
            .collect::<Result<_>>()?;
        Ok((0..n)
            .map(|i| (0..n).map(|j| at.ginv[(i, j)] * df[j]).sum())
            .collect())
    }

    pub fn hessian(&self, f: &ScalarExpr, p: &[f64]) -> Result<Mat> {
        let n = self.dim();
        let at = self.eval(p)?;
        let df: Vec<f64> = (0..n)
            .map(|i| f.differentiate(i).eval(p))
            .collect::<Result<_>>()?;
        let mut h = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut v = f.differentiate(i).differentiate(j).eval(p)?;
                for m in 0..n {
                    v -= at.gamma[m][(i, j)] * df[m];
                }
                h[(i, j)] = v;
            }
        }
        Ok(h)
    }

    pub fn laplacian(&self, f: &ScalarExpr, p: &[f64]) -> Result<f64> {
        let n = self.dim();
        let at = self.eval(p)?;
        let h = self.hessian(f, p)?;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += at.ginv[(i, j)] * h[(i, j)];
            }
        }
        Ok(s)
    }

    /// Norm squared of the gradient, g^{ij} d_i f d_j f.
    pub fn grad_norm_sq(&self, f: &ScalarExpr, p: &[f64]) -> Result<f64> {
        let n = self.dim();
        let at = self.eval(p)?;
        let df: Vec<f64> = (0..n)
            .map(|i| f.differentiate(i).eval(p))
            .collect::<Result<_>>()?;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += at.ginv[(i, j)] * df[i] * df[j];
            }
        }
        Ok(s)
    }

    /// Verify that fields are periodic along every periodic axis by
    /// sampling both walls; `samples` points per transverse direction.
    pub fn check_periodicity(&self, samples: usize) -> Result<()> {
        let n = self.dim();
        for axis in 0..n {
            if !self.chart.periodic[axis] {
                continue;
            }
            let (lo, hi) = self.chart.bounds[axis];
            for s in 0..samples {
                let mut p = vec![0.0; n];
                for (a, &(alo, ahi)) in self.chart.bounds.iter().enumerate() {
                    let t = (s as f64 + 0.5) / samples as f64;
                    p[a] = alo + t * (ahi - alo) * 0.9;
                }
                let mut plo = p.clone();
                let mut phi = p;
                plo[axis] = lo;
                phi[axis] = hi;
                for row in &self.entries {
                    for e in row {
                        let a = e.eval(&plo)?;
                        let b = e.eval(&phi)?;
                        if (a - b).abs() > 1e-9 * (1.0 + a.abs()) {
                            return Err(GeomError::NotPeriodic {
                                axis,
                                mismatch: (a - b).abs(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Christoffel symbols from the inverse metric and metric derivatives.
pub fn christoffel(ginv: &Mat, dg: &[Mat]) -> Vec<Mat> {
    let n = ginv.rows;
    (0..n)
        .map(|k| {
            Mat::from_fn(n, n, |i, j| {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                0.5 * s
            })
        })
        .collect()
}

/// Determinant of a symmetric expression matrix by Laplace expansion.
pub fn sym_det_expr(m: &[Vec<ScalarExpr>]) -> ScalarExpr {
    det_expr_rec(
        m,
        &(0..m.len()).collect::<Vec<_>>(),
        &(0..m.len()).collect::<Vec<_>>(),
    )
}

fn det_expr_rec(m: &[Vec<ScalarExpr>], rows: &[usize], cols: &[usize]) -> ScalarExpr {
    match rows.len() {
        0 => ScalarExpr::one(),
        1 => m[rows[0]][cols[0]].clone(),
        _ => {
            let mut acc = ScalarExpr::zero();
            let sub_rows: Vec<usize> = rows[1..].to_vec();
            for (pos, &c) in cols.iter().enumerate() {
                let sub_cols: Vec<usize> = cols.iter().copied().filter(|&cc| cc != c).collect();
                let minor = det_expr_rec(m, &sub_rows, &sub_cols);
                let term = m[rows[0]][c].mul(&minor);
                acc = if pos % 2 == 0 {
                    acc.add(&term)
                } else {
                    acc.sub(&term)
                };
            }
            acc
        }
    }
}

/// Christoffel symbols as expression trees, gamma[k][i][j] = Gamma^k_ij.
/// Used where downstream fields must remain differentiable; pointwise
/// evaluation goes through `MetricField::eval` instead.
pub fn christoffel_expr(entries: &[Vec<ScalarExpr>]) -> Vec<Vec<Vec<ScalarExpr>>> {
    let n = entries.len();
    let ginv = matrix_inverse_expr(entries);
    let dg: Vec<Vec<Vec<ScalarExpr>>> = (0..n)
        .map(|k| {
            entries
                .iter()
                .map(|row| row.iter().map(|e| e.differentiate(k)).collect())
                .collect()
        })
        .collect();
    (0..n)
        .map(|k| {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let mut acc = ScalarExpr::zero();
                            for l in 0..n {
                                let term = dg[i][j][l].add(&dg[j][i][l]).sub(&dg[l][i][j]);
                                acc = acc.add(&ginv[k][l].mul(&term));
                            }
                            acc.mul(&ScalarExpr::constant(0.5))
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Symbolic matrix inverse via adjugate / determinant.
pub fn matrix_inverse_expr(m: &[Vec<ScalarExpr>]) -> Vec<Vec<ScalarExpr>> {
    let n = m.len();
    let det = sym_det_expr(m);
    let all: Vec<usize> = (0..n).collect();
    let mut inv = vec![vec![ScalarExpr::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            // Cofactor C_ji for the (i, j) entry of the inverse.
            let rows: Vec<usize> = all.iter().copied().filter(|&r| r != j).collect();
            let cols: Vec<usize> = all.iter().copied().filter(|&c| c != i).collect();
            let minor = det_expr_rec(m, &rows, &cols);
            let signed = if (i + j) % 2 == 0 { minor } else { minor.neg() };
            inv[i][j] = signed.div(&det);
        }
    }
    inv
}
