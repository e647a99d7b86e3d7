//! Concrete matrix realizations on truncated Fourier modes.
//!
//! Operators live on the mode box k in [-N, N] (dimension 2N+1 per circle
//! factor). Quantization is left (Kohn-Nirenberg): A_{k,l} = a-hat_{k-l}(l),
//! the Fourier coefficient in x of the symbol evaluated at covariable l
//! through the homogeneous extension times the global cutoff.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{CircleDiffeo, TrigPoly, TAU};
use crate::linalg::{jacobi_hermitian, CMatrix};
use crate::symbol::ClassicalSymbol;

/// Declared operator order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpOrder {
    Classical(i64),
    Smoothing,
}

/// Tensor-factor structure of the underlying mode box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Factor {
    SingleCircle,
    TorusProduct,
    GradedSuspension,
}

/// Smoothstep cutoff bridging the homogeneous extension to 0 near p = 0:
/// chi = h((|p| - lo)/(hi - lo)) with h(s) = s^2 (3 - 2s) clamped to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub lo: f64,
    pub hi: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Self { lo: 0.5, hi: 1.0 }
    }
}

impl Cutoff {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo >= 0.0 && hi > lo);
        Self { lo, hi }
    }

    pub fn eval(&self, p: f64) -> f64 {
        let s = ((p.abs() - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0);
        s * s * (3.0 - 2.0 * s)
    }
}

/// Dense operator on truncated Fourier modes with a declared order.
#[derive(Debug, Clone)]
pub struct FourierOperator {
    pub n: usize,
    pub matrix: CMatrix,
    pub order: OpOrder,
    pub factor: Factor,
}

impl FourierOperator {
    pub fn new(n: usize, matrix: CMatrix, order: OpOrder, factor: Factor) -> Self {
        let expected = match factor {
            Factor::SingleCircle => 2 * n + 1,
            Factor::TorusProduct => (2 * n + 1) * (2 * n + 1),
            Factor::GradedSuspension => matrix.rows(), // dimension checked by the builder
        };
        assert_eq!(matrix.rows(), expected, "matrix dimension inconsistent with factor structure");
        assert!(matrix.is_square());
        Self { n, matrix, order, factor }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, CMatrix::identity(2 * n + 1), OpOrder::Classical(0), Factor::SingleCircle)
    }

    pub fn diagonal(n: usize, order: OpOrder, f: impl Fn(i64) -> C64) -> Self {
        let dim = 2 * n + 1;
        let mut m = CMatrix::zeros(dim, dim);
        for k in -(n as i64)..=(n as i64) {
            let i = (k + n as i64) as usize;
            m[(i, i)] = f(k);
        }
        Self::new(n, m, order, Factor::SingleCircle)
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn mode_index(&self, k: i64) -> usize {
        (k + self.n as i64) as usize
    }

    pub fn entry(&self, k: i64, l: i64) -> C64 {
        self.matrix[(self.mode_index(k), self.mode_index(l))]
    }

    pub fn is_hermitian(&self) -> bool {
        let scale = self.matrix.max_abs().max(1.0);
        self.matrix.hermitian_defect() <= 1e-12 * scale
    }

    pub fn mul(&self, other: &FourierOperator) -> FourierOperator {
        assert_eq!(self.dim(), other.dim(), "operator dimensions differ");
        let order = match (self.order, other.order) {
            (OpOrder::Classical(a), OpOrder::Classical(b)) => OpOrder::Classical(a + b),
            _ => OpOrder::Smoothing,
        };
        FourierOperator {
            n: self.n,
            matrix: self.matrix.matmul(&other.matrix),
            order,
            factor: self.factor,
        }
    }

    pub fn add(&self, other: &FourierOperator) -> FourierOperator {
        assert_eq!(self.dim(), other.dim());
        let order = match (self.order, other.order) {
            (OpOrder::Classical(a), OpOrder::Classical(b)) => OpOrder::Classical(a.max(b)),
            (OpOrder::Classical(a), OpOrder::Smoothing) => OpOrder::Classical(a),
            (OpOrder::Smoothing, OpOrder::Classical(b)) => OpOrder::Classical(b),
            _ => OpOrder::Smoothing,
        };
        FourierOperator {
            n: self.n,
            matrix: self.matrix.add(&other.matrix),
            order,
            factor: self.factor,
        }
    }

    pub fn sub(&self, other: &FourierOperator) -> FourierOperator {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, a: C64) -> FourierOperator {
        FourierOperator {
            n: self.n,
            matrix: self.matrix.scale(a),
            order: self.order,
            factor: self.factor,
        }
    }

    pub fn adjoint(&self) -> FourierOperator {
        FourierOperator {
            n: self.n,
            matrix: self.matrix.adjoint(),
            order: self.order,
            factor: self.factor,
        }
    }

    /// Restriction to interior modes |k| <= keep (single-circle factor).
    pub fn interior(&self, keep: usize) -> CMatrix {
        assert!(matches!(self.factor, Factor::SingleCircle));
        assert!(keep <= self.n);
        let dim = 2 * keep + 1;
        let off = self.n - keep;
        CMatrix::from_fn(dim, dim, |i, j| self.matrix[(i + off, j + off)])
    }

    pub fn to_json(&self) -> serde_json::Value {
        let n = self.dim();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row = Vec::with_capacity(2 * n);
                for j in 0..n {
                    row.push(self.matrix[(i, j)].re);
                    row.push(self.matrix[(i, j)].im);
                }
                row
            })
            .collect();
        serde_json::json!({
            "n": self.n,
            "order": match self.order {
                OpOrder::Classical(m) => serde_json::json!(m),
                OpOrder::Smoothing => serde_json::json!("smoothing"),
            },
            "rows": rows,
        })
    }
}

/// Kohn-Nirenberg quantization of a classical symbol on the mode box.
pub fn quantize(a: &ClassicalSymbol, n: usize, cutoff: Cutoff) -> Result<FourierOperator> {
    let max_deg = a
        .components()
        .iter()
        .map(|c| c.plus.degree().max(c.minus.degree()))
        .max()
        .unwrap_or(0);
    if n < 4 * max_deg {
        return Err(Error::TruncationTooSmall {
            n,
            why: format!("need N >= 4 * max coefficient degree = {}", 4 * max_deg),
        });
    }
    let dim = 2 * n + 1;
    let mut m = CMatrix::zeros(dim, dim);
    let ni = n as i64;
    let add_column = |m: &mut CMatrix, l: i64, sheet: &TrigPoly, weight: f64| {
        let deg = sheet.degree() as i64;
        for km in -deg..=deg {
            let k = l + km;
            if k.abs() > ni {
                continue;
            }
            let c = sheet.coeff(km);
            if c.norm_sqr() == 0.0 {
                continue;
            }
            m[((k + ni) as usize, (l + ni) as usize)] += c * weight;
        }
    };
    for l in -ni..=ni {
        for (j, comp) in a.components().iter().enumerate() {
            let d = a.order() - j as i64;
            if l == 0 {
                // The sheet-symmetric part of a degree-0 component is a
                // genuine multiplication term and keeps its zero-mode column;
                // everything homogeneous of degree != 0 dies under the cutoff.
                if d == 0 {
                    let avg = comp.plus.add(&comp.minus).scale(C64::new(0.5, 0.0));
                    add_column(&mut m, 0, &avg, 1.0);
                }
                continue;
            }
            let chi = cutoff.eval(l as f64);
            let weight = chi * (l as f64).abs().powi(d as i32);
            if weight == 0.0 || !weight.is_finite() {
                continue;
            }
            let sheet = if l > 0 { &comp.plus } else { &comp.minus };
            add_column(&mut m, l, sheet, weight);
        }
    }
    Ok(FourierOperator::new(n, m, OpOrder::Classical(a.order()), Factor::SingleCircle))
}

/// Pullback operator (U xi)(x) = xi(psi(x)) on the mode box:
/// U_{k,l} = (1/2pi) int e^{i l psi(x) - i k x} dx by FFT quadrature.
pub fn diffeo_operator(psi: &CircleDiffeo, n: usize) -> Result<FourierOperator> {
    let dim = 2 * n + 1;
    let grid = (8 * n).max(64).next_power_of_two();
    let mut m = CMatrix::zeros(dim, dim);
    let mut planner = rustfft::FftPlanner::new();
    let fft = planner.plan_fft_forward(grid);
    let psi_vals: Vec<f64> = (0..grid).map(|i| psi.apply(TAU * i as f64 / grid as f64)).collect();
    let tol = 1e-20;
    let mut worst_alias = 0.0f64;
    let ni = n as i64;
    for l in -ni..=ni {
        let mut buf: Vec<C64> =
            psi_vals.iter().map(|&p| C64::new(0.0, l as f64 * p).exp()).collect();
        fft.process(&mut buf);
        let scale = 1.0 / grid as f64;
        let total: f64 = buf.iter().map(|c| c.norm_sqr()).sum();
        // aliasing check: energy at circular distance > grid/3 from mode l
        let mut alias = 0.0f64;
        for (idx, c) in buf.iter().enumerate() {
            let k = if idx <= grid / 2 { idx as i64 } else { idx as i64 - grid as i64 };
            let dist = (k - l).abs();
            if dist.min(grid as i64 - dist) > grid as i64 / 3 {
                alias += c.norm_sqr();
            }
        }
        if total > 0.0 {
            worst_alias = worst_alias.max(alias / total);
        }
        for k in -ni..=ni {
            m[((k + ni) as usize, (l + ni) as usize)] =
                buf[k.rem_euclid(grid as i64) as usize] * scale;
        }
    }
    if worst_alias > tol {
        return Err(Error::QuadratureAliasing { alias: worst_alias, tol });
    }
    Ok(FourierOperator::new(n, m, OpOrder::Classical(0), Factor::SingleCircle))
}

/// Eigendecomposition of a hermitian operator.
#[derive(Debug, Clone)]
pub struct EigenData {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching the eigenvalue order.
    pub basis: CMatrix,
    pub positive: bool,
    /// Basis is the standard one (diagonal input fast path).
    pub standard_basis: bool,
}

impl EigenData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    /// Diagonal of V^* M V without forming the full conjugation.
    pub fn diagonal_in_basis(&self, m: &CMatrix) -> Vec<C64> {
        let n = self.dim();
        assert_eq!(m.rows(), n);
        if self.standard_basis {
            return (0..n).map(|i| m[(i, i)]).collect();
        }
        let mv = m.matmul(&self.basis);
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..n {
                acc += self.basis[(i, k)].conj() * mv[(i, k)];
            }
            out.push(acc);
        }
        out
    }

    /// V f(Lambda) V^*.
    pub fn apply_function(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let n = self.dim();
        if self.standard_basis {
            let mut m = CMatrix::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = f(self.eigenvalues[i]);
            }
            return m;
        }
        let mut scaled = self.basis.clone();
        for k in 0..n {
            let fk = f(self.eigenvalues[k]);
            for i in 0..n {
                scaled[(i, k)] *= fk;
            }
        }
        scaled.matmul(&self.basis.adjoint())
    }
}

/// Cyclic Jacobi diagonalization (deterministic sweep order, max 100 sweeps),
/// with a fast path for exactly diagonal input.
pub fn hermitian_eig(op: &FourierOperator) -> Result<EigenData> {
    let defect = op.matrix.hermitian_defect();
    let scale = op.matrix.max_abs().max(1.0);
    if defect > 1e-12 * scale {
        return Err(Error::NotHermitian { defect });
    }
    let n = op.dim();
    let mut offdiag = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                offdiag = offdiag.max(op.matrix[(i, j)].norm());
            }
        }
    }
    if offdiag == 0.0 {
        let mut pairs: Vec<(f64, usize)> =
            (0..n).map(|i| (op.matrix[(i, i)].re, i)).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let sorted_in_place = pairs.iter().enumerate().all(|(k, &(_, i))| k == i);
        let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut basis = CMatrix::zeros(n, n);
        for (col, &(_, i)) in pairs.iter().enumerate() {
            basis[(i, col)] = C64::new(1.0, 0.0);
        }
        let positive = eigenvalues.first().map(|&v| v > 0.0).unwrap_or(false);
        return Ok(EigenData { eigenvalues, basis, positive, standard_basis: sorted_in_place });
    }
    let (eigenvalues, basis) = jacobi_hermitian(&op.matrix, 100)?;
    let positive = eigenvalues.first().map(|&v| v > 0.0).unwrap_or(false);
    Ok(EigenData { eigenvalues, basis, positive, standard_basis: false })
}

/// Q^{-z} = V diag(lambda^{-z}) V^* with principal powers of the positive
/// spectrum.
pub fn complex_power(q: &EigenData, z: C64) -> Result<CMatrix> {
    if !q.positive {
        return Err(Error::NonPositiveSpectrum { min: q.min_eigenvalue() });
    }
    Ok(q.apply_function(|lambda| (-z * lambda.ln()).exp()))
}

/// The graded suspension operator of a fiber operator D+ (paper-style
/// [[D_x, D+*], [D+, -D_x]] with D_x = -i d/dx = diag(k_x) self-adjoint),
/// together with its spectral data, sign and positive spectral projection.
pub struct SuspensionOperator {
    pub q: FourierOperator,
    pub eig: EigenData,
    /// |Q| spectral data (eigenvalues |lambda| re-sorted ascending).
    pub abs_eig: EigenData,
    pub sign: FourierOperator,
    pub projection: FourierOperator,
    pub nx: usize,
    pub fiber_dim: usize,
}

pub const SUSPENSION_GAP_TOL: f64 = 1e-8;

/// Basis layout: index = g * (2nx+1) * df + ix * df + f, grading g in {0,1}.
pub fn suspension_index(nx: usize, fiber_dim: usize, g: usize, ix: usize, f: usize) -> usize {
    g * (2 * nx + 1) * fiber_dim + ix * fiber_dim + f
}

pub fn suspension_operator(dplus: &CMatrix, nx: usize) -> Result<SuspensionOperator> {
    assert!(nx >= 8, "suspension circle needs nx >= 8");
    assert!(dplus.is_square());
    let df = dplus.rows();
    let nxd = 2 * nx + 1;
    let dim = 2 * nxd * df;
    let mut m = CMatrix::zeros(dim, dim);
    let dstar = dplus.adjoint();
    for ix in 0..nxd {
        let kx = ix as i64 - nx as i64;
        for f in 0..df {
            let i0 = suspension_index(nx, df, 0, ix, f);
            let i1 = suspension_index(nx, df, 1, ix, f);
            m[(i0, i0)] = C64::new(kx as f64, 0.0);
            m[(i1, i1)] = C64::new(-(kx as f64), 0.0);
            for f2 in 0..df {
                let j0 = suspension_index(nx, df, 0, ix, f2);
                let j1 = suspension_index(nx, df, 1, ix, f2);
                // top-right D+^*, bottom-left D+
                m[(i0, j1)] += dstar[(f, f2)];
                m[(i1, j0)] += dplus[(f, f2)];
            }
        }
    }
    let q = FourierOperator::new(nx, m, OpOrder::Classical(1), Factor::GradedSuspension);

    // Fast path: diagonal fiber operator block-diagonalizes in 2x2 cells.
    let mut offdiag = 0.0f64;
    for f in 0..df {
        for f2 in 0..df {
            if f != f2 {
                offdiag = offdiag.max(dplus[(f, f2)].norm());
            }
        }
    }
    let eig = if offdiag < 1e-14 {
        suspension_eig_block_diagonal(dplus, nx)?
    } else {
        let e = hermitian_eig(&q)?;
        check_gap(&e)?;
        e
    };

    let abs_eig = absolute_eigendata(&eig);
    let sign_m = eig.apply_function(|l| C64::new(l.signum(), 0.0));
    let sign = FourierOperator::new(nx, sign_m, OpOrder::Classical(0), Factor::GradedSuspension);
    let proj_m = eig.apply_function(|l| C64::new(if l > 0.0 { 1.0 } else { 0.0 }, 0.0));
    let projection =
        FourierOperator::new(nx, proj_m, OpOrder::Classical(0), Factor::GradedSuspension);
    Ok(SuspensionOperator { q, eig, abs_eig, sign, projection, nx, fiber_dim: df })
}

fn check_gap(e: &EigenData) -> Result<()> {
    for &l in &e.eigenvalues {
        if l.abs() < SUSPENSION_GAP_TOL {
            return Err(Error::SpectralGap { lambda: l, tol: SUSPENSION_GAP_TOL });
        }
    }
    Ok(())
}

fn suspension_eig_block_diagonal(dplus: &CMatrix, nx: usize) -> Result<EigenData> {
    let df = dplus.rows();
    let nxd = 2 * nx + 1;
    let dim = 2 * nxd * df;
    let mut entries: Vec<(f64, Vec<(usize, C64)>)> = Vec::with_capacity(dim);
    for ix in 0..nxd {
        let kx = (ix as i64 - nx as i64) as f64;
        for f in 0..df {
            let d = dplus[(f, f)];
            let lambda = (kx * kx + d.norm_sqr()).sqrt();
            if lambda < SUSPENSION_GAP_TOL {
                return Err(Error::SpectralGap { lambda, tol: SUSPENSION_GAP_TOL });
            }
            let i0 = suspension_index(nx, df, 0, ix, f);
            let i1 = suspension_index(nx, df, 1, ix, f);
            // 2x2 block [[kx, conj(d)], [d, -kx]] has eigenvalues +/- lambda.
            // +lambda eigenvector (conj(d), lambda - kx); -lambda eigenvector
            // (-conj(d), kx + lambda); the pair is orthogonal.
            let vplus = [d.conj(), C64::new(lambda - kx, 0.0)];
            let vminus = [-d.conj(), C64::new(kx + lambda, 0.0)];
            let nplus = (vplus[0].norm_sqr() + vplus[1].norm_sqr()).sqrt();
            let nminus = (vminus[0].norm_sqr() + vminus[1].norm_sqr()).sqrt();
            // Degenerate normalization (d = 0): fall back to the standard axes.
            let (vp, vm) = if nplus < 1e-14 || nminus < 1e-14 {
                if kx > 0.0 {
                    ([C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)])
                } else {
                    ([C64::new(0.0, 0.0), C64::new(1.0, 0.0)], [C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
                }
            } else {
                (
                    [vplus[0] / nplus, vplus[1] / nplus],
                    [vminus[0] / nminus, vminus[1] / nminus],
                )
            };
            entries.push((lambda, vec![(i0, vp[0]), (i1, vp[1])]));
            entries.push((-lambda, vec![(i0, vm[0]), (i1, vm[1])]));
        }
    }
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&i, &j| entries[i].0.partial_cmp(&entries[j].0).unwrap().then(i.cmp(&j)));
    let mut basis = CMatrix::zeros(dim, dim);
    let mut eigenvalues = Vec::with_capacity(dim);
    for (col, &i) in order.iter().enumerate() {
        eigenvalues.push(entries[i].0);
        for &(row, v) in &entries[i].1 {
            basis[(row, col)] = v;
        }
    }
    let positive = eigenvalues[0] > 0.0;
    Ok(EigenData { eigenvalues, basis, positive, standard_basis: false })
}

/// Spectral data of |Q| given the spectral data of hermitian Q.
pub fn absolute_eigendata(eig: &EigenData) -> EigenData {
    let n = eig.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .abs()
            .partial_cmp(&eig.eigenvalues[j].abs())
            .unwrap()
            .then(i.cmp(&j))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].abs()).collect();
    let mut basis = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        for row in 0..n {
            basis[(row, col)] = eig.basis[(row, i)];
        }
    }
    let positive = eigenvalues.first().map(|&v| v > 0.0).unwrap_or(false);
    EigenData { eigenvalues, basis, positive, standard_basis: false }
}

/// Toeplitz compression T = P U P + (1 - P).
pub fn toeplitz(p: &FourierOperator, u: &FourierOperator) -> Result<FourierOperator> {
    if p.dim() != u.dim() {
        return Err(Error::DimensionMismatch(format!(
            "P dim {} vs U dim {}",
            p.dim(),
            u.dim()
        )));
    }
    let scale = p.matrix.op_norm().max(1.0);
    let idem_defect = p.matrix.matmul(&p.matrix).sub(&p.matrix).max_abs();
    if idem_defect > 1e-10 * scale {
        return Err(Error::NotIdempotent { defect: idem_defect });
    }
    let one = CMatrix::identity(p.dim());
    let t = p
        .matrix
        .matmul(&u.matrix)
        .matmul(&p.matrix)
        .add(&one.sub(&p.matrix));
    Ok(FourierOperator::new(p.n, t, OpOrder::Classical(0), p.factor))
}

/// The explicit index idempotent built from a lift P of an invertible symbol
/// and a lift Q of its inverse:
///
/// ```text
/// e = [ 1-(1-QP)^2     Q(2-PQ)(1-PQ) ]      e0 = [ 1 0 ]
///     [ (1-PQ)P        (1-PQ)^2      ]           [ 0 0 ]
/// ```
///
/// e is exactly idempotent for arbitrary P, Q; the pairing is tr(e - e0).
pub struct MilnorIdempotent {
    pub e: CMatrix,
    pub pairing: f64,
    pub nearest_integer: i64,
    pub integer_distance: f64,
}

pub fn milnor_idempotent(p: &CMatrix, q: &CMatrix) -> Result<MilnorIdempotent> {
    // P maps V -> W and Q maps W -> V; square inputs are the common case.
    if p.rows() != q.cols() || p.cols() != q.rows() {
        return Err(Error::DimensionMismatch(
            "milnor idempotent needs compatible lifts P: V->W, Q: W->V".into(),
        ));
    }
    let nv = p.cols();
    let nw = p.rows();
    let one_v = CMatrix::identity(nv);
    let one_w = CMatrix::identity(nw);
    let qp = q.matmul(p);
    let pq = p.matmul(q);
    let a = one_v.sub(&qp); // 1 - QP on V
    let b = one_w.sub(&pq); // 1 - PQ on W
    let e11 = one_v.sub(&a.matmul(&a));
    let e12 = q.matmul(&one_w.add(&b)).matmul(&b); // Q(2 - PQ)(1 - PQ): W -> V
    let e21 = b.matmul(p); // V -> W
    let e22 = b.matmul(&b);
    let mut e = CMatrix::zeros(nv + nw, nv + nw);
    for i in 0..nv {
        for j in 0..nv {
            e[(i, j)] = e11[(i, j)];
        }
        for j in 0..nw {
            e[(i, j + nv)] = e12[(i, j)];
        }
    }
    for i in 0..nw {
        for j in 0..nv {
            e[(i + nv, j)] = e21[(i, j)];
        }
        for j in 0..nw {
            e[(i + nv, j + nv)] = e22[(i, j)];
        }
    }
    let pairing = (e11.trace() + e22.trace() - C64::new(nv as f64, 0.0)).re;
    let nearest_integer = pairing.round() as i64;
    let integer_distance = (pairing - nearest_integer as f64).abs();
    Ok(MilnorIdempotent { e, pairing, nearest_integer, integer_distance })
}

/// Interior kernel count of an operator on the mode box: boundary columns
/// are removed (a rectangular compression) and null vectors localized at the
/// box boundary are discarded, so that only the kernel of the idealized
/// operator survives the truncation.
fn interior_kernel_count(
    m: &CMatrix,
    n_modes: usize,
    buffer: usize,
    threshold: f64,
) -> Result<usize> {
    let dim = m.rows();
    let cols = dim - 2 * buffer;
    // rectangular compression: delete `buffer` columns at each mode-box end
    let rect = CMatrix::from_fn(dim, cols, |i, j| m[(i, j + buffer)]);
    let gram = rect.adjoint().matmul(&rect);
    let (vals, basis) = jacobi_hermitian(&gram, 100)?;
    let mut count = 0usize;
    for (k, &v) in vals.iter().enumerate() {
        let v = v.max(0.0);
        if v >= threshold * 10.0 {
            continue;
        }
        // interior mass of the candidate null vector (mode index j + buffer)
        let mut interior = 0.0f64;
        let mut total = 0.0f64;
        for j in 0..cols {
            let mass = basis[(j, k)].norm_sqr();
            total += mass;
            let mode = (j + buffer) as i64 - n_modes as i64;
            if mode.unsigned_abs() as usize + 2 * buffer <= n_modes {
                interior += mass;
            }
        }
        if total == 0.0 || interior / total < 0.5 {
            continue; // boundary artifact
        }
        if v > threshold / 10.0 {
            return Err(Error::RankAmbiguity { value: v, threshold });
        }
        count += 1;
    }
    Ok(count)
}

/// Analytic index of an operator on the full mode box.
///
/// Route 1 counts interior kernel and cokernel dimensions (eigenvalues of
/// the compressed T*T and T T* below rank_tol^2 ||T||^2, with boundary-mode
/// artifacts filtered out). Route 2 evaluates the index idempotent built
/// from a regularized parametrix against the interior-windowed trace. The
/// routes must agree (pairing = coker - ker); disagreement is an error.
pub fn fredholm_index(t: &FourierOperator, rank_tol: f64) -> Result<i64> {
    assert!(t.matrix.is_square());
    assert!(matches!(t.factor, Factor::SingleCircle), "index counting is a circle-box routine");
    let n_modes = t.n;
    let dim = t.dim();
    let buffer = (dim / 8).clamp(2, 16);
    let norm = t.matrix.op_norm().max(1e-300);
    let threshold = rank_tol * rank_tol * norm * norm;

    let dim_ker = interior_kernel_count(&t.matrix, n_modes, buffer, threshold)?;
    let adj = t.matrix.adjoint();
    let dim_coker = interior_kernel_count(&adj, n_modes, buffer, threshold)?;
    let index = dim_ker as i64 - dim_coker as i64;

    // Route 2: Milnor idempotent from the rectangular compression P and the
    // regularized parametrix Q = (P*P + eps)^{-1} P*, with the pairing read
    // through the interior window so box-boundary junk carries no weight.
    let cols = dim - 2 * buffer;
    let p = CMatrix::from_fn(dim, cols, |i, j| t.matrix[(i, j + buffer)]);
    let eps = threshold;
    let mut gram = p.adjoint().matmul(&p);
    for i in 0..cols {
        gram[(i, i)] += C64::new(eps, 0.0);
    }
    let q = gram.lu()?.solve_matrix(&p.adjoint());
    let one_v = CMatrix::identity(cols);
    let one_w = CMatrix::identity(dim);
    let a = one_v.sub(&q.matmul(&p)); // 1 - QP on the small box
    let b = one_w.sub(&p.matmul(&q)); // 1 - PQ on the full box
    let window = |mode: i64| -> f64 {
        if mode.unsigned_abs() as usize + 2 * buffer <= n_modes {
            1.0
        } else {
            0.0
        }
    };
    let mut pairing = 0.0f64;
    let a2 = a.matmul(&a);
    for j in 0..cols {
        let mode = (j + buffer) as i64 - n_modes as i64;
        pairing -= window(mode) * a2[(j, j)].re;
    }
    let b2 = b.matmul(&b);
    for j in 0..dim {
        let mode = j as i64 - n_modes as i64;
        pairing += window(mode) * b2[(j, j)].re;
    }
    let pairing_int = pairing.round() as i64;
    if (pairing - pairing_int as f64).abs() > 0.05 || pairing_int != -index {
        return Err(Error::IndexRouteDisagreement { kernel: index, pairing: pairing_int });
    }
    Ok(index)
}

/// Winding number (1/2 pi i) \oint u'/u dx by FFT quadrature.
pub fn winding_number(u: &TrigPoly) -> Result<i64> {
    let m = (16 * u.degree()).max(256);
    let min = u.min_abs(m);
    if min < 1e-9 {
        return Err(Error::VanishingSymbol { min });
    }
    let du = u.derivative();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..m {
        let x = TAU * i as f64 / m as f64;
        acc += du.eval(x) / u.eval(x);
    }
    let value = (acc / m as f64 / C64::new(0.0, 1.0)).re;
    let nearest = value.round();
    let dist = (value - nearest).abs();
    if dist > 1e-6 {
        return Err(Error::WindingNotInteger { value, dist });
    }
    Ok(nearest as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::SheetPair;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn quantize_constant_is_identity() {
        let a = ClassicalSymbol::one(4);
        let op = quantize(&a, 16, Cutoff::default()).unwrap();
        let defect = op.matrix.sub(&CMatrix::identity(33)).max_abs();
        assert!(defect < 1e-14);
    }

    #[test]
    fn quantize_harmonic_is_shift() {
        // a = e^{ix}: multiplication operator, unit subdiagonal A_{k+1,k} = 1.
        let mut a = ClassicalSymbol::zero(0, 4);
        a.set_component(0, SheetPair::both(TrigPoly::harmonic(1)));
        let op = quantize(&a, 8, Cutoff::default()).unwrap();
        for k in -8i64..=8 {
            for l in -8i64..=8 {
                let want = if k == l + 1 { 1.0 } else { 0.0 };
                assert!((op.entry(k, l) - c(want, 0.0)).norm() < 1e-14, "k={k} l={l}");
            }
        }
    }

    #[test]
    fn quantize_abs_p_is_diagonal_modes() {
        let a = ClassicalSymbol::abs_p(4);
        let op = quantize(&a, 64, Cutoff::default()).unwrap();
        for k in -64i64..=64 {
            let want = if k == 0 { 0.0 } else { k.abs() as f64 };
            assert!((op.entry(k, k) - c(want, 0.0)).norm() < 1e-12);
        }
        // dense quadrature cross-check of one entry: a(x, l) is x-independent
        // so off-diagonal entries vanish.
        assert!(op.entry(3, 5).norm() < 1e-14);
    }

    #[test]
    fn diffeo_identity_and_rotation() {
        let id = diffeo_operator(&CircleDiffeo::identity(), 8).unwrap();
        assert!(id.matrix.sub(&CMatrix::identity(17)).max_abs() < 1e-12);

        let alpha = 0.618;
        let rot = diffeo_operator(&CircleDiffeo::rotation(alpha), 8).unwrap();
        for k in -8i64..=8 {
            let want = C64::new(0.0, k as f64 * alpha).exp();
            assert!((rot.entry(k, k) - want).norm() < 1e-12);
        }
        assert!(rot.entry(2, 3).norm() < 1e-12);
    }

    #[test]
    fn diffeo_composition_matches_product() {
        let psi1 = crate::harmonics::flow_time_one(&TrigPoly::cos_sin(1, 0.0, 0.25), 64).unwrap();
        let psi2 = CircleDiffeo::rotation(0.9);
        let n = 32;
        let u1 = diffeo_operator(&psi1, n).unwrap();
        let u2 = diffeo_operator(&psi2, n).unwrap();
        let chain = psi1.compose(&psi2, 64, 1e-9).unwrap();
        let u12 = diffeo_operator(&chain, n).unwrap();
        // U_{psi1 o psi2} = U_{psi2} U_{psi1}; compare on interior modes.
        let prod = u2.mul(&u1);
        let keep = n / 2;
        let diff = u12.interior(keep).sub(&prod.interior(keep)).op_norm();
        assert!(diff < 1e-8, "interior deviation {diff}");
    }

    #[test]
    fn hermitian_eig_diagonal_fast_path() {
        let q = FourierOperator::diagonal(8, OpOrder::Classical(1), |k| {
            c((1.0 + (k * k) as f64).sqrt(), 0.0)
        });
        let eig = hermitian_eig(&q).unwrap();
        assert!(eig.positive);
        assert!((eig.eigenvalues[0] - 1.0).abs() < 1e-15);
        let diag = eig.diagonal_in_basis(&q.matrix);
        for (i, d) in diag.iter().enumerate() {
            assert!((d.re - eig.eigenvalues[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_power_group_law() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 6;
        let dim = 2 * n + 1;
        let mut m = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = c(1.5 + i as f64, 0.0);
            for j in i + 1..dim {
                let z = c(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        let op = FourierOperator::new(n, m, OpOrder::Classical(1), Factor::SingleCircle);
        let eig = hermitian_eig(&op).unwrap();
        assert!(eig.positive);
        let z0 = complex_power(&eig, c(0.0, 0.0)).unwrap();
        assert!(z0.sub(&CMatrix::identity(dim)).max_abs() < 1e-12);
        let z1 = c(0.7, 0.3);
        let z2 = c(-1.2, 0.4);
        let lhs = complex_power(&eig, z1).unwrap().matmul(&complex_power(&eig, z2).unwrap());
        let rhs = complex_power(&eig, z1 + z2).unwrap();
        assert!(lhs.sub(&rhs).max_abs() < 1e-10);
    }

    #[test]
    fn suspension_block_spectrum_and_projections() {
        // D+ = diag(k) on fiber modes: spectrum of Q is +/- sqrt(kx^2 + k^2).
        let nf = 3i64;
        let df = (2 * nf + 1) as usize;
        let mut dplus = CMatrix::zeros(df, df);
        for k in -nf..=nf {
            let i = (k + nf) as usize;
            dplus[(i, i)] = c(k as f64 + 0.5, 0.0); // offset avoids the zero mode
        }
        let susp = suspension_operator(&dplus, 8).unwrap();
        // check a few closed-form eigenvalues are present
        let has = |l: f64| susp.eig.eigenvalues.iter().any(|&v| (v - l).abs() < 1e-10);
        assert!(has((1.0 + 0.25f64).sqrt())); // kx=1, d=0.5
        assert!(has(-(1.0 + 0.25f64).sqrt()));
        // P^2 = P, F^2 = 1, [F, Q|Q|^{-1}] = 0
        let p2 = susp.projection.matrix.matmul(&susp.projection.matrix);
        assert!(p2.sub(&susp.projection.matrix).max_abs() < 1e-10);
        let f2 = susp.sign.matrix.matmul(&susp.sign.matrix);
        assert!(f2.sub(&CMatrix::identity(susp.q.dim())).max_abs() < 1e-10);
        // residual of the eigendecomposition
        let n = susp.q.dim();
        for k in (0..n).step_by(7) {
            let col: Vec<C64> = (0..n).map(|i| susp.eig.basis[(i, k)]).collect();
            let av = susp.q.matrix.matvec(&col);
            let mut res = 0.0;
            for i in 0..n {
                res += (av[i] - col[i] * susp.eig.eigenvalues[k]).norm_sqr();
            }
            assert!(res.sqrt() < 1e-10 * susp.q.matrix.frobenius());
        }
    }

    #[test]
    fn suspension_zero_fiber_mode_triggers_gap_error() {
        let dplus = CMatrix::zeros(1, 1); // single fiber mode, D+ = 0
        match suspension_operator(&dplus, 8) {
            Err(Error::SpectralGap { .. }) => {}
            other => panic!("expected spectral gap error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn toeplitz_trivial_cases() {
        let n = 6;
        let u = FourierOperator::diagonal(n, OpOrder::Classical(0), |k| {
            C64::new(0.0, 0.3 * k as f64).exp()
        });
        let id = FourierOperator::identity(n);
        let t = toeplitz(&id, &u).unwrap();
        assert!(t.matrix.sub(&u.matrix).max_abs() < 1e-14);
        let t2 = toeplitz(&half_projector(n), &FourierOperator::identity(n)).unwrap();
        assert!(t2.matrix.sub(&CMatrix::identity(2 * n + 1)).max_abs() < 1e-14);
    }

    fn half_projector(n: usize) -> FourierOperator {
        FourierOperator::diagonal(n, OpOrder::Classical(0), |k| {
            c(if k >= 0 { 1.0 } else { 0.0 }, 0.0)
        })
    }

    /// Truncated unilateral shift on modes 0..N embedded in the full box.
    fn shift_op(n: usize) -> FourierOperator {
        let dim = 2 * n + 1;
        let mut m = CMatrix::identity(dim);
        // on the nonneg-mode block, shift e_k -> e_{k+1}; kill the top mode
        for k in 0..=(n as i64) {
            let i = (k + n as i64) as usize;
            m[(i, i)] = c(0.0, 0.0);
            if k < n as i64 {
                m[(i + 1, i)] = c(1.0, 0.0);
            }
        }
        // negative modes stay identity
        FourierOperator::new(n, m, OpOrder::Classical(0), Factor::SingleCircle)
    }

    #[test]
    fn toeplitz_rejects_non_idempotent_projection() {
        let n = 6;
        let p = FourierOperator::diagonal(n, OpOrder::Classical(0), |k| c(0.5 + 0.1 * k as f64, 0.0));
        let u = FourierOperator::identity(n);
        assert!(matches!(toeplitz(&p, &u), Err(Error::NotIdempotent { .. })));
    }

    #[test]
    fn milnor_idempotent_identities() {
        // Q = P^{-1} exactly: e = e0, pairing 0.
        let n = 5;
        let dim = 2 * n + 1;
        let p = FourierOperator::diagonal(n, OpOrder::Classical(0), |k| c(1.0 + 0.1 * k as f64, 0.2));
        let q = CMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                c(1.0, 0.0) / p.matrix[(i, i)]
            } else {
                c(0.0, 0.0)
            }
        });
        let mi = milnor_idempotent(&p.matrix, &q).unwrap();
        assert!(mi.pairing.abs() < 1e-12);
        let e2 = mi.e.matmul(&mi.e);
        assert!(e2.sub(&mi.e).max_abs() < 1e-12);
    }

    #[test]
    fn milnor_shift_gives_plus_minus_one() {
        // Unilateral shift as an exact isometry on modes 0..N: it maps the
        // (N+1)-dim space into the (N+2)-dim one, S*S = 1.
        let n = 6;
        let s = CMatrix::from_fn(n + 2, n + 1, |i, j| {
            if i == j + 1 {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let sadj = s.adjoint();
        let mi = milnor_idempotent(&s, &sadj).unwrap();
        assert!((mi.pairing - 1.0).abs() < 1e-12, "pairing {}", mi.pairing);
        let e2 = mi.e.matmul(&mi.e);
        assert!(e2.sub(&mi.e).max_abs() < 1e-13);
        // closed form: e12 = e21 = 0, e22 = rank-one projector
        for i in 0..n + 1 {
            for j in 0..n + 2 {
                assert!(mi.e[(i, j + n + 1)].norm() < 1e-14);
                assert!(mi.e[(j + n + 1, i)].norm() < 1e-14);
            }
        }
        let mi_swapped = milnor_idempotent(&sadj, &s).unwrap();
        assert!((mi_swapped.pairing + 1.0).abs() < 1e-12);
    }

    #[test]
    fn milnor_idempotent_random_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let dim = 12;
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            CMatrix::from_fn(dim, dim, |_, _| {
                c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))
            })
        };
        for _ in 0..5 {
            let p = mk(&mut rng);
            let q = mk(&mut rng);
            let mi = milnor_idempotent(&p, &q).unwrap();
            let e2 = mi.e.matmul(&mi.e);
            assert!(e2.sub(&mi.e).max_abs() < 1e-12);
        }
    }

    #[test]
    fn fredholm_index_identity_and_shift() {
        let id = FourierOperator::identity(6);
        assert_eq!(fredholm_index(&id, 1e-6).unwrap(), 0);
        // truncated unilateral shift: ker = 0 on the nonneg block, coker = e_0
        assert_eq!(fredholm_index(&shift_op(6), 1e-6).unwrap(), -1);
    }

    #[test]
    fn winding_numbers() {
        assert_eq!(winding_number(&TrigPoly::constant_re(1.0)).unwrap(), 0);
        assert_eq!(winding_number(&TrigPoly::harmonic(1)).unwrap(), 1);
        assert_eq!(winding_number(&TrigPoly::harmonic(-2)).unwrap(), -2);
        let u = TrigPoly::cos_sin(1, 1.0, 0.0)
            .add(&TrigPoly::constant_re(2.0))
            .mul(&TrigPoly::harmonic(3));
        assert_eq!(winding_number(&u).unwrap(), 3);
        assert!(matches!(
            winding_number(&TrigPoly::cos_sin(1, 1.0, 0.0)),
            Err(Error::VanishingSymbol { .. })
        ));
    }

    #[test]
    fn index_winding_duality_for_toeplitz() {
        // index(T_u) = -winding(u) for u = e^{iwx} at modest truncation.
        let n = 24;
        let p = half_projector(n);
        for w in [-2i64, -1, 1, 2] {
            let u_sym = TrigPoly::harmonic(w);
            let mut a = ClassicalSymbol::zero(0, 2);
            a.set_component(0, SheetPair::both(u_sym.clone()));
            let u = quantize(&a, n, Cutoff::default()).unwrap();
            let t = toeplitz(&p, &u).unwrap();
            let idx = fredholm_index(&t, 1e-6).unwrap();
            assert_eq!(idx, -winding_number(&u_sym).unwrap(), "w = {w}");
        }
    }
}
