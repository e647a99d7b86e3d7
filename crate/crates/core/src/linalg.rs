//! Dense complex matrices and the few factorizations the engine needs.
//!
//! Everything here is deliberately plain: row-major storage, `ikj` matrix
//! products, Householder least squares, partial-pivot LU and a cyclic Jacobi
//! eigensolver for hermitian matrices. Sizes stay in the low thousands, so
//! deterministic loops beat an external BLAS for reproducibility.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik.norm_sqr() == 0.0 {
                    continue;
                }
                let src = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src.iter()) {
                    *d += aik * s;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (d, s) in out.data.iter_mut().zip(other.data.iter()) {
            *d += s;
        }
        out
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (d, s) in out.data.iter_mut().zip(other.data.iter()) {
            *d -= s;
        }
        out
    }

    pub fn scale(&self, a: C64) -> CMatrix {
        let mut out = self.clone();
        for d in out.data.iter_mut() {
            *d *= a;
        }
        out
    }

    pub fn adjoint(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Deviation from hermitian symmetry, max |M - M*| entrywise.
    pub fn hermitian_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                defect = defect.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        defect
    }

    /// Operator 2-norm estimate by power iteration on M*M with a fixed
    /// deterministic start vector.
    pub fn op_norm(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        let mut v: Vec<C64> = (0..self.cols)
            .map(|j| C64::new(1.0 / (1.0 + j as f64), 1.0 / (2.0 + j as f64).powi(2)))
            .collect();
        let mut norm = normalize(&mut v);
        if norm == 0.0 {
            return 0.0;
        }
        let mut est = 0.0;
        for _ in 0..60 {
            let w = self.matvec(&v);
            let mut u = self.adjoint().matvec(&w);
            norm = normalize(&mut u);
            if norm == 0.0 {
                return 0.0;
            }
            let new_est = norm.sqrt();
            if (new_est - est).abs() <= 1e-12 * new_est.max(1.0) {
                return new_est;
            }
            est = new_est;
            v = u;
        }
        est
    }

    /// LU decomposition with partial pivoting; returns the solver handle.
    pub fn lu(&self) -> Result<Lu> {
        Lu::new(self)
    }

    pub fn inverse(&self) -> Result<CMatrix> {
        let lu = self.lu()?;
        let n = self.rows;
        let mut inv = CMatrix::zeros(n, n);
        let mut e = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            e[j] = C64::new(1.0, 0.0);
            let x = lu.solve(&e);
            for i in 0..n {
                inv[(i, j)] = x[i];
            }
            e[j] = C64::new(0.0, 0.0);
        }
        Ok(inv)
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

fn normalize(v: &mut [C64]) -> f64 {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        for z in v.iter_mut() {
            *z /= n;
        }
    }
    n
}

/// Partial-pivot LU factorization of a square complex matrix.
pub struct Lu {
    n: usize,
    lu: Vec<C64>,
    perm: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
}

impl Lu {
    fn new(a: &CMatrix) -> Result<Self> {
        assert!(a.is_square(), "LU of non-square matrix");
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;
        for k in 0..n {
            let mut best = k;
            let mut best_val = lu[k * n + k].norm();
            for i in k + 1..n {
                let v = lu[i * n + k].norm();
                if v > best_val {
                    best = i;
                    best_val = v;
                }
            }
            if best_val == 0.0 {
                return Err(Error::IllConditioned { cond: f64::INFINITY });
            }
            if best != k {
                for j in 0..n {
                    lu.swap(k * n + j, best * n + j);
                }
                perm.swap(k, best);
            }
            min_pivot = min_pivot.min(best_val);
            max_pivot = max_pivot.max(best_val);
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let factor = lu[i * n + k] / pivot;
                lu[i * n + k] = factor;
                if factor.norm_sqr() != 0.0 {
                    for j in k + 1..n {
                        let v = lu[k * n + j];
                        lu[i * n + j] -= factor * v;
                    }
                }
            }
        }
        Ok(Self { n, lu, perm, min_pivot, max_pivot })
    }

    /// Crude condition estimate from the pivot spread.
    pub fn cond_estimate(&self) -> f64 {
        if self.min_pivot == 0.0 {
            f64::INFINITY
        } else {
            self.max_pivot / self.min_pivot
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        x
    }

    pub fn solve_matrix(&self, b: &CMatrix) -> CMatrix {
        let n = self.n;
        assert_eq!(b.rows(), n);
        let mut out = CMatrix::zeros(n, b.cols());
        let mut col = vec![C64::new(0.0, 0.0); n];
        for j in 0..b.cols() {
            for i in 0..n {
                col[i] = b[(i, j)];
            }
            let x = self.solve(&col);
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        out
    }
}

/// Householder least squares for a tall complex system, returning the
/// coefficient vector and the residual 2-norm.
pub fn lstsq(a: &CMatrix, b: &[C64]) -> (Vec<C64>, f64) {
    let m = a.rows();
    let n = a.cols();
    assert!(m >= n, "least squares needs rows >= cols");
    assert_eq!(b.len(), m);
    let mut r = a.clone();
    let mut y = b.to_vec();
    for k in 0..n {
        // Householder vector for column k below the diagonal.
        let mut norm2 = 0.0f64;
        for i in k..m {
            norm2 += r[(i, k)].norm_sqr();
        }
        let norm = norm2.sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = r[(k, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { C64::new(1.0, 0.0) };
        let alpha = -phase * norm;
        let mut v: Vec<C64> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..n {
            let mut dot = C64::new(0.0, 0.0);
            for i in k..m {
                dot += v[i - k].conj() * r[(i, j)];
            }
            let factor = dot * (2.0 / vnorm2);
            for i in k..m {
                let vi = v[i - k];
                r[(i, j)] -= factor * vi;
            }
        }
        let mut dot = C64::new(0.0, 0.0);
        for i in k..m {
            dot += v[i - k].conj() * y[i];
        }
        let factor = dot * (2.0 / vnorm2);
        for i in k..m {
            y[i] -= factor * v[i - k];
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut acc = y[i];
        for j in i + 1..n {
            acc -= r[(i, j)] * x[j];
        }
        let d = r[(i, i)];
        x[i] = if d.norm() > 0.0 { acc / d } else { C64::new(0.0, 0.0) };
    }
    let residual = y[n..].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    (x, residual)
}

/// Matrix exponential by scaling and squaring with a Taylor core.
/// Intended for the small (<= 8x8) graded generators of the foliated models.
pub fn matexp(a: &CMatrix) -> CMatrix {
    assert!(a.is_square());
    let n = a.rows();
    let norm = a.frobenius();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a.scale(C64::new(1.0 / 2f64.powi(s as i32), 0.0));
    let mut term = CMatrix::identity(n);
    let mut sum = CMatrix::identity(n);
    for k in 1..=20 {
        term = term.matmul(&scaled).scale(C64::new(1.0 / k as f64, 0.0));
        sum = sum.add(&term);
        if term.frobenius() < 1e-17 {
            break;
        }
    }
    let mut out = sum;
    for _ in 0..s {
        out = out.matmul(&out);
    }
    out
}

/// Cyclic Jacobi diagonalization of a hermitian matrix.
///
/// Sweeps the strict upper triangle in row order, annihilating each pivot
/// with a complex Givens rotation. Returns ascending eigenvalues and the
/// matching orthonormal eigenvector columns.
pub fn jacobi_hermitian(a: &CMatrix, max_sweeps: usize) -> Result<(Vec<f64>, CMatrix)> {
    assert!(a.is_square());
    let n = a.rows();
    let scale = a.frobenius().max(1.0);
    let tol = 1e-13 * scale;
    let mut m = a.clone();
    let mut v = CMatrix::identity(n);

    let offdiag = |m: &CMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += m[(i, j)].norm_sqr();
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while offdiag(&m) > tol {
        if sweeps >= max_sweeps {
            return Err(Error::JacobiNoConvergence { sweeps, offdiag: offdiag(&m) });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.norm() <= tol / (n as f64) {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let abs = apq.norm();
                let phase = apq / abs;
                // t solves t^2 + 2 theta t - 1 = 0 with the small root.
                let theta = (aqq - app) / (2.0 * abs);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = phase * (t * c);

                // A <- J* A J with J_pp = c, J_pq = s, J_qp = -conj(s), J_qq = c.
                for j in 0..n {
                    let mpj = m[(p, j)];
                    let mqj = m[(q, j)];
                    m[(p, j)] = c * mpj - s * mqj;
                    m[(q, j)] = s.conj() * mpj + c * mqj;
                }
                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = c * mip - s.conj() * miq;
                    m[(i, q)] = s * mip + c * miq;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s.conj() * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
                // Clean the hermitian pair to keep the matrix exactly symmetric.
                m[(p, q)] = C64::new(0.0, 0.0);
                m[(q, p)] = C64::new(0.0, 0.0);
                m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
            }
        }
        sweeps += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.partial_cmp(&m[(j, j)].re).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[(i, i)].re).collect();
    let mut basis = CMatrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..n {
            basis[(i, new_col)] = v[(i, old_col)];
        }
    }
    Ok((eigenvalues, basis))
}
