//! Smooth periodic functions and circle diffeomorphisms.
//!
//! A [`TrigPoly`] is a finite Fourier series on the 2*pi circle. Evaluation,
//! differentiation, products and circle means are exact (products grow the
//! degree). Projection from grid samples goes through an FFT and reports the
//! spectral tail that was discarded, which is the accuracy currency used by
//! every module built on top of this one.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const TAU: f64 = 2.0 * PI;

/// Default relative spectral-tail tolerance (fraction of total energy).
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

/// Trigonometric polynomial sum_{|k| <= d} c_k e^{ikx} on the 2*pi circle.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    degree: usize,
    /// Coefficients indexed by k + degree, k in [-degree, degree].
    coeffs: Vec<C64>,
    real_valued: bool,
}

impl TrigPoly {
    pub fn zero() -> Self {
        Self { degree: 0, coeffs: vec![C64::new(0.0, 0.0)], real_valued: true }
    }

    pub fn constant(c: C64) -> Self {
        Self { degree: 0, coeffs: vec![c], real_valued: c.im == 0.0 }
    }

    pub fn constant_re(c: f64) -> Self {
        Self::constant(C64::new(c, 0.0))
    }

    /// Build from coefficients c_k, k = -d..=d (slice length 2d+1).
    pub fn from_coeffs(coeffs: Vec<C64>) -> Self {
        assert!(coeffs.len() % 2 == 1, "coefficient slice must have odd length");
        let degree = coeffs.len() / 2;
        let mut p = Self { degree, coeffs, real_valued: false };
        p.real_valued = p.check_real(1e-13);
        p
    }

    /// e^{ikx} monomial.
    pub fn harmonic(k: i64) -> Self {
        let d = k.unsigned_abs() as usize;
        let mut coeffs = vec![C64::new(0.0, 0.0); 2 * d + 1];
        coeffs[(k + d as i64) as usize] = C64::new(1.0, 0.0);
        let mut p = Self { degree: d, coeffs, real_valued: k == 0 };
        p.real_valued = p.check_real(1e-13);
        p
    }

    /// a*cos(kx) + b*sin(kx), real by construction.
    pub fn cos_sin(k: usize, a: f64, b: f64) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); 2 * k + 1];
        if k == 0 {
            coeffs[0] = C64::new(a, 0.0);
        } else {
            coeffs[0] = C64::new(a / 2.0, b / 2.0); // k = -k term
            coeffs[2 * k] = C64::new(a / 2.0, -b / 2.0);
        }
        Self { degree: k, coeffs, real_valued: true }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_real(&self) -> bool {
        self.real_valued
    }

    pub fn coeff(&self, k: i64) -> C64 {
        if k.unsigned_abs() as usize > self.degree {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + self.degree as i64) as usize]
        }
    }

    fn check_real(&self, tol: f64) -> bool {
        let scale = self.l2_norm().max(1e-300);
        for k in 0..=self.degree as i64 {
            let defect = (self.coeff(-k) - self.coeff(k).conj()).norm();
            if defect > tol * scale.max(1.0) {
                return false;
            }
        }
        true
    }

    pub fn eval(&self, x: f64) -> C64 {
        // Sum c_k e^{ikx} from k = -d to d with incremental phases.
        let step = C64::new(0.0, x).exp();
        let mut phase = C64::new(0.0, -(self.degree as f64) * x).exp();
        let mut acc = C64::new(0.0, 0.0);
        for c in &self.coeffs {
            acc += c * phase;
            phase *= step;
        }
        acc
    }

    pub fn eval_re(&self, x: f64) -> f64 {
        self.eval(x).re
    }

    /// Exact spectral derivative.
    pub fn derivative(&self) -> TrigPoly {
        let d = self.degree as i64;
        let coeffs = (-d..=d)
            .map(|k| self.coeff(k) * C64::new(0.0, k as f64))
            .collect();
        let mut p = TrigPoly { degree: self.degree, coeffs, real_valued: self.real_valued };
        p.real_valued = p.check_real(1e-13);
        p
    }

    /// Mean over the circle, (1/2pi) integral f dx = c_0.
    pub fn mean(&self) -> C64 {
        self.coeff(0)
    }

    pub fn conj(&self) -> TrigPoly {
        let d = self.degree as i64;
        let coeffs = (-d..=d).map(|k| self.coeff(-k).conj()).collect();
        TrigPoly { degree: self.degree, coeffs, real_valued: self.real_valued }
    }

    /// f(x + alpha).
    pub fn rotate(&self, alpha: f64) -> TrigPoly {
        let d = self.degree as i64;
        let coeffs = (-d..=d)
            .map(|k| self.coeff(k) * C64::new(0.0, k as f64 * alpha).exp())
            .collect();
        TrigPoly { degree: self.degree, coeffs, real_valued: self.real_valued }
    }

    pub fn scale(&self, a: C64) -> TrigPoly {
        let coeffs = self.coeffs.iter().map(|c| c * a).collect();
        let mut p = TrigPoly { degree: self.degree, coeffs, real_valued: false };
        p.real_valued = p.check_real(1e-13);
        p
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        let d = self.degree.max(other.degree) as i64;
        let coeffs = (-d..=d).map(|k| self.coeff(k) + other.coeff(k)).collect();
        let mut p = TrigPoly { degree: d as usize, coeffs, real_valued: false };
        p.real_valued = self.real_valued && other.real_valued;
        p
    }

    pub fn sub(&self, other: &TrigPoly) -> TrigPoly {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Exact product by coefficient convolution; degree adds.
    pub fn mul(&self, other: &TrigPoly) -> TrigPoly {
        let d = self.degree + other.degree;
        let mut coeffs = vec![C64::new(0.0, 0.0); 2 * d + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        TrigPoly {
            degree: d,
            coeffs,
            real_valued: self.real_valued && other.real_valued,
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn sup_norm(&self, samples: usize) -> f64 {
        let m = samples.max(4 * self.degree + 8);
        (0..m)
            .map(|i| self.eval(TAU * i as f64 / m as f64).norm())
            .fold(0.0, f64::max)
    }

    pub fn min_re(&self, samples: usize) -> f64 {
        let m = samples.max(4 * self.degree + 8);
        (0..m)
            .map(|i| self.eval_re(TAU * i as f64 / m as f64))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_abs(&self, samples: usize) -> f64 {
        let m = samples.max(4 * self.degree + 8);
        (0..m)
            .map(|i| self.eval(TAU * i as f64 / m as f64).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Values on the uniform grid x_i = 2 pi i / m.
    pub fn sample(&self, m: usize) -> Vec<C64> {
        assert!(m > 2 * self.degree, "sample grid must resolve the degree");
        let mut buf = vec![C64::new(0.0, 0.0); m];
        for k in -(self.degree as i64)..=(self.degree as i64) {
            let idx = k.rem_euclid(m as i64) as usize;
            buf[idx] += self.coeff(k);
        }
        let mut planner = FftPlanner::new();
        // exp(ikx) convention matches the inverse transform
        planner.plan_fft_inverse(m).process(&mut buf);
        buf
    }

    /// Project grid samples to a trig polynomial of the given degree.
    /// Returns the polynomial and the relative discarded tail energy.
    pub fn fit(samples: &[C64], degree: usize) -> (TrigPoly, f64) {
        let m = samples.len();
        assert!(m > 2 * degree, "need more samples than coefficients");
        let mut buf = samples.to_vec();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(m).process(&mut buf);
        let scale = 1.0 / m as f64;
        let total: f64 = buf.iter().map(|c| c.norm_sqr()).sum();
        let d = degree as i64;
        let coeffs: Vec<C64> = (-d..=d)
            .map(|k| buf[k.rem_euclid(m as i64) as usize] * scale)
            .collect();
        // Energy of the discarded modes, summed directly to avoid cancellation.
        let mut discarded = 0.0f64;
        for (idx, c) in buf.iter().enumerate() {
            let k = if idx <= m / 2 { idx as i64 } else { idx as i64 - m as i64 };
            if k.abs() > d {
                discarded += c.norm_sqr();
            }
        }
        let tail = if total > 0.0 { discarded / total } else { 0.0 };
        let mut p = TrigPoly { degree, coeffs, real_valued: false };
        p.real_valued = p.check_real(1e-10);
        (p, tail)
    }

    /// Drop trailing coefficients below the given absolute size.
    pub fn trim(&self, eps: f64) -> TrigPoly {
        let mut d = self.degree;
        while d > 0 && self.coeff(d as i64).norm() < eps && self.coeff(-(d as i64)).norm() < eps {
            d -= 1;
        }
        let di = d as i64;
        let coeffs = (-di..=di).map(|k| self.coeff(k)).collect();
        TrigPoly { degree: d, coeffs, real_valued: self.real_valued }
    }
}

/// Orientation-preserving circle diffeomorphism psi(x) = x + delta(x).
#[derive(Debug, Clone)]
pub struct CircleDiffeo {
    displacement: TrigPoly,
    /// Cached derivative psi' = 1 + delta', spectral-exact from delta.
    derivative: TrigPoly,
}

impl CircleDiffeo {
    pub fn new(displacement: TrigPoly) -> Result<Self> {
        if !displacement.is_real() {
            return Err(Error::NonRealField);
        }
        let derivative = TrigPoly::constant_re(1.0).add(&displacement.derivative());
        let min = derivative.min_re(8 * displacement.degree() + 64);
        if min <= 0.0 {
            return Err(Error::Normalization {
                what: "orientation (min psi' <= 0)".into(),
                defect: -min,
            });
        }
        Ok(Self { displacement, derivative })
    }

    pub fn identity() -> Self {
        Self::new(TrigPoly::zero()).unwrap()
    }

    pub fn rotation(alpha: f64) -> Self {
        Self::new(TrigPoly::constant_re(alpha)).unwrap()
    }

    pub fn displacement(&self) -> &TrigPoly {
        &self.displacement
    }

    pub fn apply(&self, x: f64) -> f64 {
        x + self.displacement.eval_re(x)
    }

    pub fn derivative_at(&self, x: f64) -> f64 {
        self.derivative.eval_re(x)
    }

    pub fn derivative_poly(&self) -> &TrigPoly {
        &self.derivative
    }

    /// psi1 after psi2, i.e. x -> psi1(psi2(x)).
    pub fn compose(&self, inner: &CircleDiffeo, out_degree: usize, tol: f64) -> Result<CircleDiffeo> {
        // delta(x) = delta2(x) + delta1(psi2(x))
        let (pulled, tail) = compose_resample(&self.displacement, inner, out_degree)?;
        if tail > tol {
            return Err(Error::SpectralTail { tail, tol });
        }
        CircleDiffeo::new(inner.displacement.add(&pulled).trim(1e-14))
    }

    /// Inverse diffeomorphism by per-sample Newton, fitted back to a
    /// displacement polynomial.
    pub fn inverse(&self, out_degree: usize, tol: f64) -> Result<CircleDiffeo> {
        let m = (4 * out_degree).max(4 * self.displacement.degree() + 32).max(64);
        let mut samples = Vec::with_capacity(m);
        for i in 0..m {
            let y = TAU * i as f64 / m as f64;
            // solve psi(x) = y for x
            let mut x = y;
            for _ in 0..60 {
                let f = x + self.displacement.eval_re(x) - y;
                let df = self.derivative.eval_re(x);
                let step = f / df;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            samples.push(C64::new(x - y, 0.0));
        }
        let (delta, tail) = TrigPoly::fit(&samples, out_degree);
        if tail > tol {
            return Err(Error::SpectralTail { tail, tol });
        }
        CircleDiffeo::new(delta.trim(1e-14))
    }
}

/// Time-1 flow of a real vector field on the circle, integrated by RK4 with
/// the variational equation alongside. The displacement is re-projected to a
/// trig polynomial and psi' is cross-checked against the integrated monodromy.
pub fn flow_time_one(field: &TrigPoly, steps: usize) -> Result<CircleDiffeo> {
    if !field.is_real() {
        return Err(Error::NonRealField);
    }
    assert!(steps >= 16, "flow integration needs at least 16 steps");
    let deriv = field.derivative();
    let f = |y: f64| field.eval_re(y);
    let fp = |y: f64| deriv.eval_re(y);
    let h = 1.0 / steps as f64;

    let mut out_degree = (4 * field.degree()).max(16);
    let tol = DEFAULT_TAIL_TOL;
    loop {
        let m = 4 * out_degree;
        let mut disp = Vec::with_capacity(m);
        let mut mono = Vec::with_capacity(m);
        for i in 0..m {
            let x = TAU * i as f64 / m as f64;
            let mut y = x;
            let mut w = 1.0f64;
            for _ in 0..steps {
                // RK4 on the joint system (y, w), w' = f'(y) w.
                let k1y = f(y);
                let k1w = fp(y) * w;
                let k2y = f(y + 0.5 * h * k1y);
                let k2w = fp(y + 0.5 * h * k1y) * (w + 0.5 * h * k1w);
                let k3y = f(y + 0.5 * h * k2y);
                let k3w = fp(y + 0.5 * h * k2y) * (w + 0.5 * h * k2w);
                let k4y = f(y + h * k3y);
                let k4w = fp(y + h * k3y) * (w + h * k3w);
                y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
                w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
            }
            disp.push(C64::new(y - x, 0.0));
            mono.push(w);
        }
        let (delta, tail) = TrigPoly::fit(&disp, out_degree);
        if tail <= tol {
            let delta = delta.trim(1e-14);
            let psi = CircleDiffeo::new(delta)?;
            // Monodromy consistency: spectral psi' vs integrated variational w.
            // The derivative amplifies coefficient errors, so an accurate
            // displacement fit may still need more degrees here.
            let mut max_diff = 0.0f64;
            for (i, &w) in mono.iter().enumerate() {
                let x = TAU * i as f64 / m as f64;
                max_diff = max_diff.max((psi.derivative_at(x) - w).abs());
            }
            let rk_floor = 20.0 / (steps as f64).powi(4);
            if max_diff <= 1e-6_f64.max(rk_floor) {
                return Ok(psi);
            }
            if out_degree >= 512 {
                return Err(Error::SpectralTail { tail: max_diff, tol: 1e-6 });
            }
        } else if out_degree >= 512 {
            return Err(Error::SpectralTail { tail, tol });
        }
        out_degree *= 2;
    }
}

/// Fixed points of a circle diffeomorphism with their derivatives.
///
/// Roots of delta on [0, 2pi) are isolated by sign-change bracketing on a
/// fine grid and polished by Newton. A continuum (identity map) and
/// degenerate roots (psi' = 1 within tol) are reported as errors.
pub fn fixed_points(psi: &CircleDiffeo, tol: f64) -> Result<Vec<(f64, f64)>> {
    assert!(tol > 0.0);
    let delta = psi.displacement();
    if delta.l2_norm() < 1e-12 {
        return Err(Error::ContinuumFixedPoints);
    }
    let m = (16 * delta.degree()).max(1024);
    let vals: Vec<f64> = (0..m).map(|i| delta.eval_re(TAU * i as f64 / m as f64)).collect();
    let mut roots: Vec<(f64, f64)> = Vec::new();
    for i in 0..m {
        let a = vals[i];
        let b = vals[(i + 1) % m];
        if a == 0.0 || a * b < 0.0 {
            let mut y = TAU * (i as f64 + 0.5) / m as f64;
            for _ in 0..80 {
                let fval = delta.eval_re(y);
                let dval = delta.derivative().eval_re(y);
                if dval == 0.0 {
                    break;
                }
                let step = fval / dval;
                y -= step;
                if step.abs() < 1e-14 {
                    break;
                }
            }
            let y = y.rem_euclid(TAU);
            let y = if y > TAU - 1e-10 { 0.0 } else { y };
            if roots.iter().all(|(r, _)| {
                let d = (y - r).abs();
                d.min(TAU - d) > 1e-8
            }) {
                let dpsi = psi.derivative_at(y);
                if (1.0 - dpsi).abs() < tol {
                    return Err(Error::DegenerateFixedPoint { y, margin: (1.0 - dpsi).abs() });
                }
                roots.push((y, dpsi));
            }
        }
    }
    roots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(roots)
}

/// Pullback f(psi(x)) sampled on a uniform grid and projected back to a trig
/// polynomial of the requested degree. Returns the poly and tail energy.
pub fn compose_resample(
    f: &TrigPoly,
    psi: &CircleDiffeo,
    out_degree: usize,
) -> Result<(TrigPoly, f64)> {
    let m = (4 * out_degree).max(8);
    let samples: Vec<C64> = (0..m)
        .map(|i| f.eval(psi.apply(TAU * i as f64 / m as f64)))
        .collect();
    let (p, tail) = TrigPoly::fit(&samples, out_degree);
    Ok((p.trim(1e-16), tail))
}
