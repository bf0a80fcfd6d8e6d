//! Dense linear algebra for chart-sized matrices (n <= 4 in practice).
//!
//! Everything here is deterministic: LU with partial pivoting and an
//! explicit pivot-ratio singularity test, cyclic Jacobi for symmetric
//! eigenvalues, and a column-pivoted Householder QR whose trailing
//! orthonormal columns give kernels with a fixed sign convention.

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        Mat::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        Mat::from_fn(self.rows, rhs.cols, |i, j| {
            (0..self.cols).map(|k| self[(i, k)] * rhs[(k, j)]).sum()
        })
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|k| self[(i, k)] * v[k]).sum())
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorisation with partial pivoting.
///
/// `Err(ratio)` reports the pivot ratio min|u_kk| / max|u_kk| when it
/// falls below 1e-12; callers translate it into a singularity error
/// that names the evaluation point.
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
    sign: f64,
}

pub const PIVOT_RATIO_MIN: f64 = 1e-12;

impl Lu {
    pub fn new(a: &Mat) -> Result<Lu, f64> {
        assert_eq!(a.rows, a.cols, "LU of non-square matrix");
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in (k + 1)..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            if pivot == 0.0 {
                return Err(0.0);
            }
            for i in (k + 1)..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for j in (k + 1)..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
        let mut min_p = f64::INFINITY;
        let mut max_p: f64 = 0.0;
        for k in 0..n {
            let v = lu[(k, k)].abs();
            min_p = min_p.min(v);
            max_p = max_p.max(v);
        }
        let ratio = if max_p == 0.0 { 0.0 } else { min_p / max_p };
        if ratio < PIVOT_RATIO_MIN {
            return Err(ratio);
        }
        Ok(Lu { lu, perm, sign })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows;
        assert_eq!(b.len(), n);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[self.perm[i]];
            for j in 0..i {
                s -= self.lu[(i, j)] * y[j];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in (i + 1)..n {
                s -= self.lu[(i, j)] * y[j];
            }
            y[i] = s / self.lu[(i, i)];
        }
        y
    }

    pub fn inverse(&self) -> Mat {
        let n = self.lu.rows;
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e);
            e[j] = 0.0;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }

    pub fn det(&self) -> f64 {
        let n = self.lu.rows;
        (0..n).fold(self.sign, |acc, k| acc * self.lu[(k, k)])
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
/// returned in ascending order. Deterministic sweep order.
pub fn sym_eigenvalues(a: &Mat) -> Vec<f64> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    for _sweep in 0..40 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() < 1e-15 * (1.0 + m.max_abs()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}

/// Column-pivoted Householder QR of an `rows x cols` matrix with the
/// full square Q.
///
/// `rank` counts diagonal entries of R above `1e-10 * |r_00|`; the last
/// `rows - rank` columns of Q form an orthonormal basis of the left
/// null space (equivalently, of the kernel when the input is the
/// transposed jacobian). Each of those columns is sign-normalised so
/// its first component of magnitude > 1e-12 is positive.
pub struct ColPivQr {
    pub q: Mat,
    pub r: Mat,
    pub rank: usize,
}

pub fn col_piv_qr(a: &Mat) -> ColPivQr {
    let m = a.rows;
    let n = a.cols;
    let mut r = a.clone();
    let mut q = Mat::identity(m);
    let steps = m.min(n);
    let mut col_norms: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| r[(i, j)] * r[(i, j)]).sum())
        .collect();
    for k in 0..steps {
        // Pivot: bring the column with the largest remaining norm to k.
        let mut p = k;
        let mut best = -1.0;
        for j in k..n {
            let norm: f64 = (k..m).map(|i| r[(i, j)] * r[(i, j)]).sum();
            col_norms[j] = norm;
            if norm > best {
                best = norm;
                p = j;
            }
        }
        if p != k {
            for i in 0..m {
                let tmp = r[(i, k)];
                r[(i, k)] = r[(i, p)];
                r[(i, p)] = tmp;
            }
            col_norms.swap(k, p);
        }
        // Householder reflection clearing column k below the diagonal.
        let alpha: f64 = (k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let alpha = if r[(k, k)] > 0.0 { -alpha } else { alpha };
        let mut v: Vec<f64> = (0..m)
            .map(|i| if i < k { 0.0 } else { r[(i, k)] })
            .collect();
        v[k] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i] * r[(i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                r[(i, j)] -= f * v[i];
            }
        }
        for j in 0..m {
            let dot: f64 = (k..m).map(|i| v[i] * q[(i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                q[(i, j)] -= f * v[i];
            }
        }
    }
    // q currently holds Q^T (product of reflections applied to I).
    let q = q.transpose();
    let r00 = r[(0, 0)].abs();
    let tol = 1e-10 * if r00 > 0.0 { r00 } else { 1.0 };
    let mut rank = 0;
    for k in 0..steps {
        if r[(k, k)].abs() > tol {
            rank += 1;
        }
    }
    // Deterministic signs for the null-space columns.
    let mut q = q;
    for j in rank..m {
        let col: Vec<f64> = (0..m).map(|i| q[(i, j)]).collect();
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                for i in 0..m {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
    }
    ColPivQr { q, r, rank }
}

/// Pairwise summation: error grows logarithmically in the length
/// instead of linearly, and the result is deterministic for a fixed
/// ordering.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_inverse_of_known_matrix() {
        let a = Mat::from_rows(&[vec![4.0, 1.0], vec![2.0, 3.0]]);
        let lu = Lu::new(&a).unwrap();
        let inv = lu.inverse();
        let prod = a.matmul(&inv);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - want).abs() < 1e-14);
            }
        }
        assert!((lu.det() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn lu_detects_singular_matrix() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        match Lu::new(&a) {
            Err(ratio) => assert!(ratio < PIVOT_RATIO_MIN),
            Ok(_) => panic!("expected singular"),
        }
    }

    #[test]
    fn lu_solve_matches_direct_substitution() {
        let a = Mat::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ]);
        let lu = Lu::new(&a).unwrap();
        let x = lu.solve(&[3.0, 5.0, 3.0]);
        let back = a.matvec(&x);
        for (b, want) in back.iter().zip([3.0, 5.0, 3.0]) {
            assert!((b - want).abs() < 1e-13);
        }
    }

    #[test]
    fn jacobi_eigenvalues_of_known_symmetric() {
        let a = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let eigs = sym_eigenvalues(&a);
        assert!((eigs[0] - 1.0).abs() < 1e-12);
        assert!((eigs[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn qr_kernel_of_wide_jacobian_transpose() {
        // J = [1 0 0; 0 1 0] has kernel span{e3}. QR runs on J^T (3x2).
        let jt = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]);
        let qr = col_piv_qr(&jt);
        assert_eq!(qr.rank, 2);
        let k = qr.q.column(2);
        assert!((k[0]).abs() < 1e-14);
        assert!((k[1]).abs() < 1e-14);
        assert!((k[2] - 1.0).abs() < 1e-14, "sign-normalised kernel vector");
    }

    #[test]
    fn qr_reconstructs_input() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let qr = col_piv_qr(&a);
        // Q R equals A up to the column permutation; check orthogonality
        // and rank instead of unpermuting.
        let qtq = qr.q.transpose().matmul(&qr.q);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[(i, j)] - want).abs() < 1e-13);
            }
        }
        assert_eq!(qr.rank, 2);
    }

    #[test]
    fn pairwise_sum_of_equal_values_is_exact() {
        // Power-of-two length: every partial sum is an exact doubling,
        // so no rounding occurs anywhere in the tree.
        let xs = vec![0.1; 1024];
        assert_eq!(pairwise_sum(&xs), 0.1 * 1024.0);
    }

    #[test]
    fn pairwise_sum_matches_exact_integer_total() {
        let xs: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[3.5]), 3.5);
    }
}
