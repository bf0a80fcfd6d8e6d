//! Tensor-product quadrature against the Riemannian volume form:
//! trapezoid rule on periodic axes (spectrally accurate for smooth
//! periodic integrands), Gauss-Legendre on bounded axes.

use crate::error::{GeomError, Result};
use crate::geometry::{MetricField, VectorField};
use crate::linalg::pairwise_sum;

/// Minimum nodes per axis; fewer gives quadrature too coarse to report
/// meaningful residuals.
pub const MIN_NODES: usize = 8;

/// Nodes and weights of the Gauss-Legendre rule on [-1, 1], found by
/// Newton iteration on the Legendre polynomial from the Chebyshev
/// initial guess.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Exploit the symmetry of the roots about 0.
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(t) and P_{n-1}(t).
            let mut p0 = 1.0;
            let mut p1 = t;
            for k in 1..n {
                let kf = k as f64;
                let p2 = ((2.0 * kf + 1.0) * t * p1 - kf * p0) / (kf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let step = p1 / dp;
            t -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -t;
        nodes[n - 1 - i] = t;
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// One-axis rule on [lo, hi]: uniform trapezoid without the duplicate
/// endpoint when periodic, scaled Gauss-Legendre otherwise.
fn axis_rule(lo: f64, hi: f64, periodic: bool, n: usize) -> (Vec<f64>, Vec<f64>) {
    let len = hi - lo;
    if periodic {
        let h = len / n as f64;
        let nodes = (0..n).map(|i| lo + i as f64 * h).collect();
        (nodes, vec![h; n])
    } else {
        let (t, w) = gauss_legendre(n);
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * len;
        (
            t.iter().map(|&x| mid + half * x).collect(),
            w.iter().map(|&x| half * x).collect(),
        )
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < MIN_NODES {
        return Err(GeomError::InvalidConfig(format!(
            "quadrature needs at least {MIN_NODES} nodes per axis, got {n}"
        )));
    }
    Ok(())
}

/// Integral of f against the volume form of `metric` over its chart,
/// with n nodes per axis and pairwise-summed terms.
pub fn integrate(
    metric: &MetricField,
    n: usize,
    mut f: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<f64> {
    check_n(n)?;
    let chart = &metric.chart;
    let dim = chart.dim;
    let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..dim)
        .map(|a| axis_rule(chart.bounds[a].0, chart.bounds[a].1, chart.periodic[a], n))
        .collect();
    let total = n.pow(dim as u32);
    let mut terms = Vec::with_capacity(total);
    let mut p = vec![0.0; dim];
    for flat in 0..total {
        let mut rem = flat;
        let mut weight = 1.0;
        for a in 0..dim {
            let idx = rem % n;
            rem /= n;
            p[a] = rules[a].0[idx];
            weight *= rules[a].1[idx];
        }
        let at = metric.eval(&p)?;
        terms.push(weight * at.sqrt_det * f(&p)?);
    }
    Ok(pairwise_sum(&terms))
}

/// Riemannian volume of the chart.
pub fn volume(metric: &MetricField, n: usize) -> Result<f64> {
    integrate(metric, n, |_| Ok(1.0))
}

/// Integral of the pointwise g-norm of a vector field.
pub fn l1_norm(metric: &MetricField, field: &VectorField, n: usize) -> Result<f64> {
    check_n(n)?;
    integrate(metric, n, |p| {
        let at = metric.eval(p)?;
        let x = field.eval(p)?;
        Ok(at.norm_sq(&x).max(0.0).sqrt())
    })
}

/// Integral of div X over a fully periodic chart. On a closed manifold
/// the divergence theorem makes this zero, so the magnitude of the
/// return value is a direct consistency check of the connection and
/// the quadrature together.
pub fn green_check(metric: &MetricField, field: &VectorField, n: usize) -> Result<f64> {
    for (axis, &periodic) in metric.chart.periodic.iter().enumerate() {
        if !periodic {
            return Err(GeomError::NonClosedChart { axis });
        }
    }
    integrate(metric, n, |p| Ok(metric.divergence(field, p)?.value))
}

/// Annulus growth quotient (1/r) Int_{B(2r) \ B(r)} |X| dVol around the
/// chart center, in coordinate polar (dim 2) or spherical (dim 3)
/// coordinates. Bounded non-periodic charts only; the outer ball must
/// sit inside the chart.
pub fn karp_quotient(metric: &MetricField, field: &VectorField, r: f64, n: usize) -> Result<f64> {
    check_n(n)?;
    if r <= 0.0 {
        return Err(GeomError::InvalidConfig(format!(
            "annulus radius must be positive, got {r}"
        )));
    }
    let chart = &metric.chart;
    let dim = chart.dim;
    if dim != 2 && dim != 3 {
        return Err(GeomError::InvalidConfig(format!(
            "annulus quotient supports dimensions 2 and 3, got {dim}"
        )));
    }
    if chart.periodic.iter().any(|&p| p) {
        return Err(GeomError::InvalidConfig(
            "annulus quotient needs a bounded non-periodic chart".into(),
        ));
    }
    let center = chart.center();
    for a in 0..dim {
        if center[a] - 2.0 * r < chart.bounds[a].0 || center[a] + 2.0 * r > chart.bounds[a].1 {
            return Err(GeomError::BallOutsideDomain { radius: 2.0 * r });
        }
    }
    let tau = 2.0 * std::f64::consts::PI;
    let (rho_n, rho_w) = axis_rule(r, 2.0 * r, false, n);
    let (phi_n, phi_w) = axis_rule(0.0, tau, true, n);
    let mut terms = Vec::new();
    let mut push = |p: &[f64], jac: f64| -> Result<()> {
        let at = metric.eval(p)?;
        let x = field.eval(p)?;
        terms.push(jac * at.sqrt_det * at.norm_sq(&x).max(0.0).sqrt());
        Ok(())
    };
    if dim == 2 {
        for (i, &rho) in rho_n.iter().enumerate() {
            for (j, &phi) in phi_n.iter().enumerate() {
                let p = [center[0] + rho * phi.cos(), center[1] + rho * phi.sin()];
                push(&p, rho_w[i] * phi_w[j] * rho)?;
            }
        }
    } else {
        let (th_n, th_w) = axis_rule(0.0, std::f64::consts::PI, false, n);
        for (i, &rho) in rho_n.iter().enumerate() {
            for (k, &th) in th_n.iter().enumerate() {
                for (j, &phi) in phi_n.iter().enumerate() {
                    let p = [
                        center[0] + rho * th.sin() * phi.cos(),
                        center[1] + rho * th.sin() * phi.sin(),
                        center[2] + rho * th.cos(),
                    ];
                    push(&p, rho_w[i] * th_w[k] * phi_w[j] * rho * rho * th.sin())?;
                }
            }
        }
    }
    Ok(pairwise_sum(&terms) / r)
}
