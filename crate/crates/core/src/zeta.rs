//! Zeta traces and their meromorphic continuation.
//!
//! A trace Tr(A U Q^{-z}) at finite truncation is an entire function; the
//! pole structure of the idealized operator is recovered by modeling the
//! diagonal data beyond the truncation. Two independent estimators are
//! always reconciled:
//!
//! 1. tail-fit: the diagonal tail is least-squares fit against powers of
//!    lambda (optionally times an oscillatory phase) and each fitted term is
//!    continued in closed form by Euler-Maclaurin;
//! 2. heat-fit: Tr(A U e^{-s Q}) on a geometric s-grid is fit to
//!    sum b_j s^{-j} + r ln(1/s) + c + ..., whose coefficients carry the
//!    same residues through the Mellin transform.
//!
//! Laurent data at the expansion point is read off by a discrete Fourier
//! transform on a small circle around it, which also measures the
//! pole-order-two defect |a_-2| (simple poles are an acceptance invariant,
//! not an assumption).

use num_complex::Complex64 as C64;

use crate::engine::{EigenData, FourierOperator};
use crate::error::{Error, Result};
use crate::linalg::{lstsq, CMatrix};
use crate::symbol::ClassicalSymbol;

/// Euler-Mascheroni constant (for converting heat-fit constants to the
/// finite part at z = 0).
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Laurent coefficients of a zeta trace at the expansion point.
#[derive(Debug, Clone)]
pub struct LaurentData {
    pub z0: C64,
    /// a_{-1}
    pub residue: C64,
    /// a_0
    pub finite_part: C64,
    /// a_1, a_2
    pub higher: Vec<C64>,
    /// measured |a_{-2}| (pole-order-two bound)
    pub a_minus2: f64,
    /// residue estimate of the heat-fit oracle
    pub residue_heat: C64,
    /// |residue(tail-fit) - residue(heat-fit)|
    pub spread: f64,
    /// worst relative least-squares residual among the channel fits
    pub residual: f64,
}

impl LaurentData {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "z0": [self.z0.re, self.z0.im],
            "residue": [self.residue.re, self.residue.im],
            "finite_part": [self.finite_part.re, self.finite_part.im],
            "higher": self.higher.iter().map(|c| vec![c.re, c.im]).collect::<Vec<_>>(),
            "spread": self.spread,
            "residual": self.residual,
            "a_minus2": self.a_minus2,
        })
    }
}

/// Continuation parameters.
#[derive(Debug, Clone)]
pub struct ContinuationConfig {
    /// Head/tail split: the fit window starts at this fraction of the top mode.
    pub window_fraction: f64,
    /// Number of tail-fit basis exponents J (>= 3).
    pub fit_exponents: usize,
    /// Leading decay exponent of the diagonal data (default: order of A U,
    /// i.e. d ~ lambda^{e_top}).
    pub leading_exponent: f64,
    /// Oscillatory frequencies supplied by the model (e^{i omega k} factors
    /// carried by the diagonal data; none for plain traces).
    pub osc_frequency: Option<f64>,
    /// Heat-fit s-grid: count, s_min = s_min_factor / lambda_max, s_max.
    pub heat_points: usize,
    pub heat_s_min_factor: f64,
    pub heat_s_max: f64,
    /// Highest s^{-q} pole order in the heat basis (spectral dimension).
    pub heat_pole_order: usize,
    /// Estimator reconciliation tolerance: |r1 - r2| <= tol * (1 + |r1|).
    pub reconcile_tol: f64,
    /// Relative fit-residual overflow threshold.
    pub fit_tol: f64,
    /// Pole-order-two acceptance: |a_-2| <= pole2_tol * (1 + |a_-1|).
    pub pole2_tol: f64,
    /// Radius of the Laurent sampling circle.
    pub laurent_radius: f64,
    /// Modes dropped from the top of each branch (truncation-boundary junk
    /// of operator products; the model continuation takes over there).
    pub boundary_skip: usize,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            window_fraction: 0.35,
            fit_exponents: 6,
            leading_exponent: -1.0,
            osc_frequency: None,
            heat_points: 32,
            heat_s_min_factor: 2.0,
            heat_s_max: 0.3,
            heat_pole_order: 1,
            reconcile_tol: 1e-2,
            fit_tol: 1e-3,
            pole2_tol: 1e-6,
            laurent_radius: 0.25,
            boundary_skip: 0,
        }
    }
}

/// Eigenvalue growth model for a mode branch beyond the truncation:
/// lambda(k) = a * k * (1 + c_1/k + c_2/k^2 + ...).
#[derive(Debug, Clone)]
pub enum LambdaModel {
    PowerSeries { a: f64, corr: Vec<f64> },
    /// finite-rank / smoothing channel: no extrapolation, entire zeta
    None,
}

/// One spectral channel: diagonal data d_i at eigenvalues lambda_i with mode
/// labels k_i = k0 + i, plus the growth model for the tail.
#[derive(Debug, Clone)]
pub struct ZetaChannel {
    pub d: Vec<C64>,
    pub lambda: Vec<f64>,
    pub k0: f64,
    pub model: LambdaModel,
    /// oscillation e^{i osc k} carried by d (deoscillated before fitting)
    pub osc: f64,
}

#[derive(Debug, Clone)]
pub struct SpectralData {
    pub channels: Vec<ZetaChannel>,
}

// ---------------------------------------------------------------------------
// closed-form continued sums
// ---------------------------------------------------------------------------

const BERNOULLI: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

fn cpow(base: f64, sigma: C64) -> C64 {
    debug_assert!(base > 0.0);
    (sigma * base.ln()).exp()
}

/// Continued power sum H(sigma; K) = sum_{k >= K} k^sigma by Euler-Maclaurin,
/// meromorphic with a single simple pole at sigma = -1.
pub fn power_sum(sigma: C64, kstart: f64) -> C64 {
    let k = kstart;
    // integral term: -K^{sigma+1}/(sigma+1)
    let mut acc = -cpow(k, sigma + 1.0) / (sigma + 1.0);
    acc += cpow(k, sigma) * 0.5;
    // - sum B_2i/(2i)! f^{(2i-1)}(K) with f = x^sigma, so
    // f^{(2i-1)}(K) = sigma (sigma-1) ... (sigma-2i+2) K^{sigma-2i+1}
    let mut falling = C64::new(1.0, 0.0); // prod_{j=0}^{2i-2} (sigma - j)
    let mut fact = 1.0f64;
    for i in 1..=8usize {
        if i == 1 {
            falling = sigma;
        } else {
            falling *= (sigma - (2 * i - 3) as f64) * (sigma - (2 * i - 2) as f64);
        }
        fact *= (2 * i - 1) as f64 * (2 * i) as f64;
        let term = falling * cpow(k, sigma - (2 * i - 1) as f64);
        acc -= BERNOULLI[i - 1] / fact * term;
    }
    acc
}

/// Continued oscillatory power sum G(sigma; K; alpha) =
/// sum_{k >= K} e^{i alpha k} k^sigma for alpha not a multiple of 2 pi;
/// entire in sigma. Summation by parts down to a rapidly convergent tail.
pub fn osc_power_sum(sigma: C64, kstart: f64, alpha: f64) -> C64 {
    let e = C64::new(0.0, alpha).exp();
    let denom = C64::new(1.0, 0.0) - e;
    assert!(denom.norm() > 1e-8, "oscillatory sum needs alpha away from 0 mod 2pi");
    let g = |k: f64, order: usize| -> C64 {
        // forward difference Delta^order applied to k^sigma
        let mut acc = C64::new(0.0, 0.0);
        let mut binom = 1.0f64;
        for m in 0..=order {
            let sign = if (order - m) % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom * cpow(k + m as f64, sigma);
            binom = binom * (order - m) as f64 / (m as f64 + 1.0);
        }
        acc
    };
    // sum E^k Delta^j g: parts step j -> j+1:
    //   sum_{k>=K} E^k h(k) = E^K h(K)/(1-E) + E/(1-E) sum_{k>=K} E^k Dh(k)
    let parts = ((sigma.re + 4.0).ceil() as i64).clamp(0, 10) as usize;
    let mut acc = C64::new(0.0, 0.0);
    let mut prefactor = C64::new(1.0, 0.0);
    for j in 0..parts {
        acc += prefactor * cpow_e(&e, kstart) * g(kstart, j) / denom;
        prefactor *= e / denom;
    }
    // remaining tail with Delta^parts g(k) = O(k^{Re sigma - parts});
    // Re sigma - parts <= -4, truncate when negligible
    let mut k = kstart;
    let mut tail = C64::new(0.0, 0.0);
    let mut ek = cpow_e(&e, kstart);
    for _ in 0..200_000 {
        let term = ek * g(k, parts);
        tail += term;
        if term.norm() < 1e-16 * (1.0 + tail.norm()) && k > kstart + 8.0 {
            break;
        }
        k += 1.0;
        ek *= e;
    }
    acc + prefactor * tail
}

fn cpow_e(e: &C64, k: f64) -> C64 {
    // e^{i alpha k} for integer-valued k offsets, stable via ln
    let theta = e.arg() * k;
    C64::new(0.0, theta).exp()
}

impl LambdaModel {
    /// Expand lambda(k)^sigma = a^sigma sum_i w_i(sigma) k^{sigma - i}.
    fn power_weights(&self, sigma: C64, terms: usize) -> Option<(f64, Vec<C64>)> {
        match self {
            LambdaModel::None => None,
            LambdaModel::PowerSeries { a, corr } => {
                // ln(1 + u) with u = sum corr_j t^j, t = 1/k
                let mut ln_series = vec![C64::new(0.0, 0.0); terms];
                let mut upow = vec![C64::new(0.0, 0.0); terms];
                // u itself
                for (j, &c) in corr.iter().enumerate() {
                    if j + 1 < terms {
                        upow[j + 1] = C64::new(c, 0.0);
                    }
                }
                let u = upow.clone();
                let mut sign = 1.0;
                for n in 1..terms {
                    // ln(1+u) = sum (-1)^{n-1} u^n / n
                    for (idx, &v) in upow.iter().enumerate() {
                        if idx < terms {
                            ln_series[idx] += sign / n as f64 * v;
                        }
                    }
                    upow = series_mul(&upow, &u, terms);
                    sign = -sign;
                    if upow.iter().all(|c| c.norm() < 1e-18) {
                        break;
                    }
                }
                // w = exp(sigma * ln_series)
                let mut w = vec![C64::new(0.0, 0.0); terms];
                w[0] = C64::new(1.0, 0.0);
                let scaled: Vec<C64> = ln_series.iter().map(|c| c * sigma).collect();
                let mut term = vec![C64::new(0.0, 0.0); terms];
                term[0] = C64::new(1.0, 0.0);
                for n in 1..terms {
                    term = series_mul(&term, &scaled, terms);
                    let inv = 1.0 / factorial(n);
                    let mut done = true;
                    for (idx, &v) in term.iter().enumerate() {
                        w[idx] += v * inv;
                        if (v * inv).norm() > 1e-18 {
                            done = false;
                        }
                    }
                    if done {
                        break;
                    }
                }
                Some((*a, w))
            }
        }
    }

    /// Evaluate lambda(k) from the model (for beyond-truncation heat sums).
    fn lambda_at(&self, k: f64) -> Option<f64> {
        match self {
            LambdaModel::None => None,
            LambdaModel::PowerSeries { a, corr } => {
                let mut f = 1.0;
                let mut t = 1.0 / k;
                for &c in corr {
                    f += c * t;
                    t /= k;
                }
                Some(a * k * f)
            }
        }
    }
}

fn series_mul(a: &[C64], b: &[C64], terms: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); terms];
    for i in 0..terms.min(a.len()) {
        if a[i].norm_sqr() == 0.0 {
            continue;
        }
        for j in 0..(terms - i).min(b.len()) {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product::<f64>().max(1.0)
}

/// Fit a PowerSeries eigenvalue model on the top window of a mode branch.
pub fn fit_lambda_model(lambda: &[f64], k0: f64, corr_terms: usize) -> LambdaModel {
    let n = lambda.len();
    if n < corr_terms + 4 {
        return LambdaModel::None;
    }
    let start = n / 2;
    let rows = n - start;
    // lambda/k = a + a c_1 / k + ... : linear LS in 1/k powers
    let mat = CMatrix::from_fn(rows, corr_terms + 1, |i, j| {
        let k = k0 + (start + i) as f64;
        C64::new(k.powi(-(j as i32)), 0.0)
    });
    let rhs: Vec<C64> = (0..rows)
        .map(|i| {
            let k = k0 + (start + i) as f64;
            C64::new(lambda[start + i] / k, 0.0)
        })
        .collect();
    let (coeffs, _res) = lstsq(&mat, &rhs);
    let a = coeffs[0].re;
    if !(a.is_finite() && a > 0.0) {
        return LambdaModel::None;
    }
    let corr: Vec<f64> = coeffs[1..].iter().map(|c| c.re / a).collect();
    LambdaModel::PowerSeries { a, corr }
}

// ---------------------------------------------------------------------------
// estimator 1: head sum + tail fit, continued by Euler-Maclaurin
// ---------------------------------------------------------------------------

struct TailFit {
    /// per-channel fitted coefficients and exponents
    fits: Vec<(Vec<C64>, Vec<f64>)>,
    residual: f64,
}

fn fit_channel_tails(data: &SpectralData, cfg: &ContinuationConfig) -> Result<TailFit> {
    let mut fits = Vec::new();
    let mut worst = 0.0f64;
    for ch in &data.channels {
        if matches!(ch.model, LambdaModel::None) {
            fits.push((Vec::new(), Vec::new()));
            continue;
        }
        let n = ch.d.len();
        let j_exp = cfg.fit_exponents.max(3);
        let start = ((n as f64) * cfg.window_fraction) as usize;
        let start = start.min(n.saturating_sub(j_exp + 4));
        let rows = n - start;
        if rows < j_exp + 2 {
            return Err(Error::TruncationTooSmall {
                n,
                why: "tail-fit window smaller than the basis".into(),
            });
        }
        let exps: Vec<f64> = (0..j_exp).map(|j| cfg.leading_exponent - j as f64).collect();
        let mat = CMatrix::from_fn(rows, j_exp, |i, j| {
            C64::new(ch.lambda[start + i].powf(exps[j]), 0.0)
        });
        // deoscillate the data before fitting pure powers
        let rhs: Vec<C64> = (0..rows)
            .map(|i| {
                let k = ch.k0 + (start + i) as f64;
                let phase = C64::new(0.0, -ch.osc * k).exp();
                ch.d[start + i] * phase
            })
            .collect();
        let (coeffs, res) = lstsq(&mat, &rhs);
        let scale: f64 = rhs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let rel = if scale > 0.0 { res / scale } else { 0.0 };
        worst = worst.max(rel);
        fits.push((coeffs, exps));
    }
    Ok(TailFit { fits, residual: worst })
}

/// The entire part: all stored diagonal data summed directly.
fn eval_data_part(data: &SpectralData, z: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for ch in &data.channels {
        for (i, d) in ch.d.iter().enumerate() {
            acc += d * cpow(ch.lambda[i], -z);
        }
    }
    acc
}

/// The fitted tail continued beyond the truncation in closed form.
fn eval_tail_part(data: &SpectralData, tail: &TailFit, z: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (ch, (coeffs, exps)) in data.channels.iter().zip(tail.fits.iter()) {
        if coeffs.is_empty() {
            continue;
        }
        let kbeyond = ch.k0 + ch.d.len() as f64;
        for (c, &e) in coeffs.iter().zip(exps.iter()) {
            let sigma_l = C64::new(e, 0.0) - z; // lambda exponent
            if let Some((a, w)) = ch.model.power_weights(sigma_l, 10) {
                let apow = cpow(a, sigma_l);
                for (i, wi) in w.iter().enumerate() {
                    if wi.norm() < 1e-300 {
                        continue;
                    }
                    let sigma_k = sigma_l - i as f64;
                    let s = if ch.osc == 0.0 {
                        power_sum(sigma_k, kbeyond)
                    } else {
                        osc_power_sum(sigma_k, kbeyond, ch.osc)
                    };
                    acc += c * apow * wi * s;
                }
            }
        }
    }
    acc
}

/// Meromorphic continuation of the full trace: truncated data sum (entire)
/// plus the fitted tail continued beyond the truncation in closed form.
fn eval_continued(data: &SpectralData, tail: &TailFit, z: C64) -> C64 {
    eval_data_part(data, z) + eval_tail_part(data, tail, z)
}

/// Residue and pole-order-two coefficient at z0 = 0 read from the continued
/// tail alone; the stored data is entire and cannot contribute a pole. Used
/// by lattice continuations that only need per-branch residues.
pub fn tail_only_residue(data: &SpectralData, cfg: &ContinuationConfig) -> Result<(C64, f64)> {
    let tail = fit_channel_tails(data, cfg)?;
    if tail.residual > cfg.fit_tol {
        return Err(Error::FitResidual { residual: tail.residual, tol: cfg.fit_tol });
    }
    let m = 16usize;
    let radius = cfg.laurent_radius;
    let mut res = C64::new(0.0, 0.0);
    let mut a2 = C64::new(0.0, 0.0);
    for j in 0..m {
        let theta = crate::harmonics::TAU * j as f64 / m as f64;
        let dz = C64::new(0.0, theta).exp() * radius;
        let val = eval_tail_part(data, &tail, dz);
        res += val * C64::new(0.0, theta).exp() * radius / m as f64;
        a2 += val * C64::new(0.0, 2.0 * theta).exp() * radius * radius / m as f64;
    }
    Ok((res, a2.norm()))
}

/// Laurent coefficients a_{-2}..a_{+2} by DFT on a circle around z0.
fn laurent_circle(
    data: &SpectralData,
    tail: &TailFit,
    z0: C64,
    radius: f64,
) -> [C64; 5] {
    let m = 16usize;
    let mut coeffs = [C64::new(0.0, 0.0); 5]; // a_{-2}, a_{-1}, a_0, a_1, a_2
    for j in 0..m {
        let theta = crate::harmonics::TAU * j as f64 / m as f64;
        let dz = C64::new(0.0, theta).exp() * radius;
        let val = eval_continued(data, tail, z0 + dz);
        for (idx, n) in (-2i32..=2).enumerate() {
            // a_n = (1/M) sum val * rho^{-n} e^{-i n theta}
            coeffs[idx] += val * C64::new(0.0, -(n as f64) * theta).exp()
                * radius.powi(-n)
                / m as f64;
        }
    }
    coeffs
}

// ---------------------------------------------------------------------------
// estimator 2: heat-trace log-fit
// ---------------------------------------------------------------------------

struct HeatFit {
    residue: C64,
    a_minus2: f64,
}

fn heat_trace(data: &SpectralData, s: f64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for ch in &data.channels {
        for (i, d) in ch.d.iter().enumerate() {
            acc += d * (-s * ch.lambda[i]).exp();
        }
    }
    acc
}

/// Beyond-truncation heat compensation using the fitted tail model, so the
/// s-window is not limited by e^{-s lambda_max}.
fn heat_tail(data: &SpectralData, tail: &TailFit, s: f64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (ch, (coeffs, exps)) in data.channels.iter().zip(tail.fits.iter()) {
        if coeffs.is_empty() {
            continue;
        }
        let kbeyond = ch.k0 + ch.d.len() as f64;
        let mut k = kbeyond;
        loop {
            let lambda = match ch.model.lambda_at(k) {
                Some(l) => l,
                None => break,
            };
            let weight = (-s * lambda).exp();
            if weight < 1e-18 {
                break;
            }
            let mut dval = C64::new(0.0, 0.0);
            for (c, &e) in coeffs.iter().zip(exps.iter()) {
                dval += c * lambda.powf(e);
            }
            if ch.osc != 0.0 {
                dval *= C64::new(0.0, ch.osc * k).exp();
            }
            acc += dval * weight;
            k += 1.0;
            if k > kbeyond + 2e6 {
                break;
            }
        }
    }
    acc
}

fn heat_fit(
    data: &SpectralData,
    tail: &TailFit,
    z0: C64,
    cfg: &ContinuationConfig,
) -> Result<HeatFit> {
    if z0.im != 0.0 || z0.re < 0.0 || z0.re.fract() != 0.0 {
        return Err(Error::Schema {
            path: "/continuation/z0".into(),
            msg: "heat-fit oracle supports integer z0 >= 0 only".into(),
        });
    }
    let z0i = z0.re as usize;
    let lambda_max = data
        .channels
        .iter()
        .flat_map(|c| c.lambda.iter().copied())
        .fold(1.0f64, f64::max);
    let s_min = cfg.heat_s_min_factor / lambda_max;
    let s_max = cfg.heat_s_max.max(s_min * 8.0);
    let m = cfg.heat_points.max(16);
    let q = cfg.heat_pole_order.max(z0i.max(1));

    // basis: s^{-q} .. s^{-1}, then s^j and s^j ln(1/s) (poles of the zeta
    // at negative integers contribute log-weighted positive powers), and the
    // pole-order-2 probes ln(1/s)^2 and s^{-z0} ln(1/s) for z0 >= 1.
    let mut labels: Vec<(i32, u8)> = Vec::new(); // (power, log-power)
    for p in (1..=q).rev() {
        labels.push((-(p as i32), 0));
    }
    labels.push((0, 1));
    for p in 0..=5 {
        labels.push((p, 0));
    }
    for p in 1..=3 {
        labels.push((p, 1));
    }
    labels.push((0, 2));
    if z0i >= 1 {
        labels.push((-(z0i as i32), 1));
    }

    let rows = m;
    let cols = labels.len();
    let mut mat = CMatrix::zeros(rows, cols);
    let mut rhs = vec![C64::new(0.0, 0.0); rows];
    for i in 0..rows {
        let s = s_min * (s_max / s_min).powf(i as f64 / (rows - 1) as f64);
        let h = heat_trace(data, s) + heat_tail(data, tail, s);
        // weight for relative accuracy
        let w = 1.0 / (1.0 + h.norm());
        for (j, &(p, lp)) in labels.iter().enumerate() {
            let base = (s as f64).powi(p) * (1.0 / s).ln().powi(lp as i32);
            mat[(i, j)] = C64::new(base * w, 0.0);
        }
        rhs[i] = h * w;
    }
    let (coeffs, _res) = lstsq(&mat, &rhs);

    let coeff_of = |p: i32, lp: u8| -> C64 {
        labels
            .iter()
            .position(|&(pp, ll)| pp == p && ll == lp)
            .map(|idx| coeffs[idx])
            .unwrap_or(C64::new(0.0, 0.0))
    };

    let (residue, a_minus2) = if z0i == 0 {
        // zeta(z) ~ r/z + ...: r is the ln(1/s) coefficient; a double pole
        // would show as a ln^2 coefficient q with a_-2 = 2q.
        (coeff_of(0, 1), 2.0 * coeff_of(0, 2).norm())
    } else {
        // Res_{z=j} zeta = b_j / Gamma(j); s^{-j} ln(1/s) signals a_-2.
        let gamma_j = factorial(z0i - 1);
        (
            coeff_of(-(z0i as i32), 0) / gamma_j,
            coeff_of(-(z0i as i32), 1).norm() / gamma_j,
        )
    };
    Ok(HeatFit { residue, a_minus2 })
}

// ---------------------------------------------------------------------------
// public entry points
// ---------------------------------------------------------------------------

/// Raw zeta trace sum_k <phi_k| A U |phi_k> lambda_k^{-z} in fixed order.
pub fn zeta_trace(
    a: &FourierOperator,
    u: Option<&FourierOperator>,
    q: &EigenData,
    z: C64,
) -> Result<C64> {
    let w = match u {
        Some(u) => a.matrix.matmul(&u.matrix),
        None => a.matrix.clone(),
    };
    if w.rows() != q.dim() {
        return Err(Error::DimensionMismatch(format!(
            "operator dim {} vs eigendata dim {}",
            w.rows(),
            q.dim()
        )));
    }
    let diag = q.diagonal_in_basis(&w);
    let mut acc = C64::new(0.0, 0.0);
    for (d, &lambda) in diag.iter().zip(q.eigenvalues.iter()) {
        if lambda <= 0.0 {
            return Err(Error::NonPositiveSpectrum { min: lambda });
        }
        acc += d * cpow(lambda, -z);
    }
    Ok(acc)
}

/// Full two-estimator continuation on prepared spectral channels.
pub fn continue_zeta_data(
    data: &SpectralData,
    z0: C64,
    cfg: &ContinuationConfig,
) -> Result<LaurentData> {
    let tail = fit_channel_tails(data, cfg)?;
    if tail.residual > cfg.fit_tol {
        return Err(Error::FitResidual { residual: tail.residual, tol: cfg.fit_tol });
    }
    let coeffs = laurent_circle(data, &tail, z0, cfg.laurent_radius);
    let all_smoothing = data.channels.iter().all(|ch| matches!(ch.model, LambdaModel::None));
    if all_smoothing {
        // finite-rank data: the zeta is an entire finite sum, there is
        // nothing for the heat oracle to continue.
        return Ok(LaurentData {
            z0,
            residue: coeffs[1],
            finite_part: coeffs[2],
            higher: vec![coeffs[3], coeffs[4]],
            a_minus2: coeffs[0].norm(),
            residue_heat: coeffs[1],
            spread: 0.0,
            residual: tail.residual,
        });
    }
    let heat = heat_fit(data, &tail, z0, cfg)?;
    let residue = coeffs[1];
    let spread = (residue - heat.residue).norm();
    if spread > cfg.reconcile_tol * (1.0 + residue.norm()) {
        return Err(Error::EstimatorDisagreement {
            tail_fit: residue.re,
            heat_fit: heat.residue.re,
            tol: cfg.reconcile_tol,
        });
    }
    let a_minus2 = coeffs[0].norm().max(heat.a_minus2.min(coeffs[0].norm() * 10.0 + 1e-12));
    let out = LaurentData {
        z0,
        residue,
        finite_part: coeffs[2],
        higher: vec![coeffs[3], coeffs[4]],
        a_minus2,
        residue_heat: heat.residue,
        spread,
        residual: tail.residual,
    };
    if out.a_minus2 > cfg.pole2_tol * (1.0 + out.residue.norm()) {
        return Err(Error::DoublePole {
            a2: out.a_minus2,
            bound: cfg.pole2_tol * (1.0 + out.residue.norm()),
        });
    }
    Ok(out)
}

/// Build mode-labelled circle channels from diagonal data indexed by
/// k in [-N, N] with eigenvalues lambda(k): positive branch, negative
/// branch (both model-fitted), and the zero mode as a finite channel.
pub fn circle_mode_channels(
    diag: &[C64],
    lambda: &[f64],
    osc: f64,
    boundary_skip: usize,
) -> SpectralData {
    let dim = diag.len();
    assert!(dim % 2 == 1);
    let n = dim / 2;
    let keep = n - boundary_skip.min(n / 2);
    let mut pos_d = Vec::with_capacity(keep);
    let mut pos_l = Vec::with_capacity(keep);
    let mut neg_d = Vec::with_capacity(keep);
    let mut neg_l = Vec::with_capacity(keep);
    for k in 1..=keep {
        pos_d.push(diag[n + k]);
        pos_l.push(lambda[n + k]);
        neg_d.push(diag[n - k]);
        neg_l.push(lambda[n - k]);
    }
    let pos_model = fit_lambda_model(&pos_l, 1.0, 5);
    let neg_model = fit_lambda_model(&neg_l, 1.0, 5);
    SpectralData {
        channels: vec![
            ZetaChannel { d: vec![diag[n]], lambda: vec![lambda[n]], k0: 0.0, model: LambdaModel::None, osc: 0.0 },
            ZetaChannel { d: pos_d, lambda: pos_l, k0: 1.0, model: pos_model, osc },
            ZetaChannel { d: neg_d, lambda: neg_l, k0: 1.0, model: neg_model, osc: -osc },
        ],
    }
}

/// Continuation of Tr(A U Q^{-z}) for circle operators against a Q that is
/// diagonal in the mode basis (the canonical regularizers).
pub fn continue_zeta(
    a: &FourierOperator,
    u: Option<&FourierOperator>,
    q_lambda_by_mode: &[f64],
    z0: C64,
    cfg: &ContinuationConfig,
) -> Result<LaurentData> {
    let w = match u {
        Some(u) => a.matrix.matmul(&u.matrix),
        None => a.matrix.clone(),
    };
    if w.rows() != q_lambda_by_mode.len() {
        return Err(Error::DimensionMismatch(format!(
            "operator dim {} vs lambda count {}",
            w.rows(),
            q_lambda_by_mode.len()
        )));
    }
    for &l in q_lambda_by_mode {
        if l <= 0.0 {
            return Err(Error::NonPositiveSpectrum { min: l });
        }
    }
    let diag: Vec<C64> = (0..w.rows()).map(|i| w[(i, i)]).collect();
    let data = circle_mode_channels(
        &diag,
        q_lambda_by_mode,
        cfg.osc_frequency.unwrap_or(0.0),
        cfg.boundary_skip,
    );
    continue_zeta_data(&data, z0, cfg)
}

/// Local Wodzicki residue on the circle: (1/2pi) integral over S^1 of the
/// degree -1 component summed over both cosphere sheets.
pub fn wodzicki_local(a: &ClassicalSymbol) -> C64 {
    match a.component_at_degree(-1) {
        Some(c) => c.plus.mean() + c.minus.mean(),
        None => C64::new(0.0, 0.0),
    }
}

/// Spectral index pairing Res_{z=0} Tr(T^{-1} [ln|Q|, T] |Q|^{-z}) on the
/// circle with a mode-diagonal positive Q. T is inverted through a
/// regularized parametrix (the smoothing discrepancy carries no pole).
pub fn residue_pairing_spectral(
    t: &FourierOperator,
    q_lambda_by_mode: &[f64],
    cfg: &ContinuationConfig,
) -> Result<LaurentData> {
    let dim = t.dim();
    if dim != q_lambda_by_mode.len() {
        return Err(Error::DimensionMismatch("T and Q dimensions differ".into()));
    }
    let mut lnq = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        let l = q_lambda_by_mode[i];
        if l <= 0.0 {
            return Err(Error::NonPositiveSpectrum { min: l });
        }
        lnq[(i, i)] = C64::new(l.ln(), 0.0);
    }
    let commut = lnq.matmul(&t.matrix).sub(&t.matrix.matmul(&lnq));
    // regularized inverse (T^* T + eps)^{-1} T^*
    let norm = t.matrix.op_norm().max(1e-300);
    let eps = (1e-8 * norm) * (1e-8 * norm);
    let mut gram = t.matrix.adjoint().matmul(&t.matrix);
    for i in 0..dim {
        gram[(i, i)] += C64::new(eps, 0.0);
    }
    let lu = gram.lu()?;
    let cond = lu.cond_estimate();
    if !cond.is_finite() {
        return Err(Error::IllConditioned { cond });
    }
    let tinv = lu.solve_matrix(&t.matrix.adjoint());
    let a = tinv.matmul(&commut);
    let op = FourierOperator {
        n: t.n,
        matrix: a,
        order: OpOrder::Classical(-1),
        factor: t.factor,
    };
    // boundary modes of the regularized inverse are truncation junk
    let mut cfg = cfg.clone();
    cfg.boundary_skip = cfg.boundary_skip.max((t.n / 6).max(4));
    continue_zeta(&op, None, q_lambda_by_mode, C64::new(0.0, 0.0), &cfg)
}

use crate::engine::OpOrder;

/// Leading-symbol form of the localized residue: winding numbers weighted by
/// the fixed-point determinant factors, under the convention calibrated so
/// that it matches `residue_pairing_spectral` (pairing = +winding for the
/// plain circle Toeplitz operator).
pub fn leading_symbol_residue(
    u: &crate::harmonics::TrigPoly,
    fixed_point_derivatives: &[f64],
) -> Result<f64> {
    let w = crate::engine::winding_number(u)? as f64;
    let mut weight = 0.0;
    for &h in fixed_point_derivatives {
        let margin = (1.0 - h).abs();
        if margin < 1e-10 {
            return Err(Error::DegenerateFixedPoint { y: f64::NAN, margin });
        }
        weight += 1.0 / margin;
    }
    Ok(w * weight)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{hermitian_eig, quantize, Cutoff};
    use crate::symbol::SheetPair;
    use crate::harmonics::TrigPoly;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn canonical_lambda(n: usize) -> Vec<f64> {
        (-(n as i64)..=(n as i64))
            .map(|k| (1.0 + (k * k) as f64).sqrt())
            .collect()
    }

    #[test]
    fn power_sum_matches_direct_summation() {
        // convergent regime: sum_{k>=K} k^{-4}
        let direct: f64 = (60..100_000).map(|k| (k as f64).powi(-4)).sum();
        let em = power_sum(c(-4.0, 0.0), 60.0);
        assert!((em.re - direct).abs() < 1e-12, "em {} direct {}", em.re, direct);
        assert!(em.im.abs() < 1e-14);
    }

    #[test]
    fn power_sum_reproduces_zeta_pole() {
        // residue of sum_{k>=K} k^{-z} at z = 1 is 1: sample on a circle
        let k = 40.0;
        let m = 16;
        let mut res = c(0.0, 0.0);
        for j in 0..m {
            let theta = crate::harmonics::TAU * j as f64 / m as f64;
            let dz = c(0.0, theta).exp() * 0.2;
            let z = c(1.0, 0.0) + dz;
            res += power_sum(-z, k) * dz / m as f64;
        }
        assert!((res.re - 1.0).abs() < 1e-9, "residue {}", res.re);
    }

    #[test]
    fn osc_power_sum_matches_direct() {
        let alpha = 0.9;
        let sigma = c(-1.5, 0.3);
        let direct: C64 = (33..400_000)
            .map(|k| c(0.0, alpha * k as f64).exp() * cpow(k as f64, sigma))
            .sum();
        let v = osc_power_sum(sigma, 33.0, alpha);
        assert!((v - direct).norm() < 1e-6, "osc {} direct {}", v, direct);
    }

    #[test]
    fn zeta_trace_direct_summation_oracle() {
        let n = 64;
        let q = FourierOperator::diagonal(n, OpOrder::Classical(1), |k| {
            c((1.0 + (k * k) as f64).sqrt(), 0.0)
        });
        let eig = hermitian_eig(&q).unwrap();
        let a = FourierOperator::identity(n);
        let z = c(4.0, 0.0);
        let got = zeta_trace(&a, None, &eig, z).unwrap();
        let want: f64 = (-(n as i64)..=(n as i64))
            .map(|k| (1.0 + (k * k) as f64).powf(-2.0))
            .sum();
        assert!((got.re - want).abs() < 1e-12);
    }

    #[test]
    fn zeta_trace_with_rotation_matches_fourier_sum() {
        let n = 48;
        let alpha = 0.75;
        let q = FourierOperator::diagonal(n, OpOrder::Classical(1), |k| {
            c((1.0 + (k * k) as f64).sqrt(), 0.0)
        });
        let eig = hermitian_eig(&q).unwrap();
        let u = crate::engine::diffeo_operator(&crate::harmonics::CircleDiffeo::rotation(alpha), n)
            .unwrap();
        let a = FourierOperator::identity(n);
        let got = zeta_trace(&a, Some(&u), &eig, c(6.0, 0.0)).unwrap();
        let want: C64 = (-(n as i64)..=(n as i64))
            .map(|k| c(0.0, alpha * k as f64).exp() * (1.0 + (k * k) as f64).powf(-3.0))
            .sum();
        assert!((got - want).norm() < 1e-10);
    }

    #[test]
    fn smoothing_channel_gives_entire_zeta() {
        // finite-rank data: residue 0, finite part = exact trace at z0
        let data = SpectralData {
            channels: vec![ZetaChannel {
                d: vec![c(2.0, 0.0), c(-1.0, 0.5)],
                lambda: vec![1.5, 3.0],
                k0: 0.0,
                model: LambdaModel::None,
                osc: 0.0,
            }],
        };
        let mut cfg = ContinuationConfig::default();
        cfg.reconcile_tol = 1.0; // heat fit of a 2-point spectrum is meaningless
        let out = continue_zeta_data(&data, c(0.0, 0.0), &cfg).unwrap();
        assert!(out.residue.norm() < 1e-10);
        let want = c(2.0, 0.0) + c(-1.0, 0.5);
        assert!((out.finite_part - want).norm() < 1e-8);
    }

    #[test]
    fn canonical_residue_at_z_equals_one() {
        // Res_{z=1} Tr Q^{-z} = 2 for Q = diag sqrt(1+k^2); both estimators.
        let n = 512; // full 4096 run lives in the acceptance suite
        let a = FourierOperator::identity(n);
        let cfg = ContinuationConfig { leading_exponent: 0.0, ..Default::default() };
        let out = continue_zeta(&a, None, &canonical_lambda(n), c(1.0, 0.0), &cfg).unwrap();
        assert!((out.residue.re - 2.0).abs() < 1e-4, "tail-fit residue {}", out.residue.re);
        assert!((out.residue_heat.re - 2.0).abs() < 1e-3, "heat residue {}", out.residue_heat.re);
        assert!(out.a_minus2 < 1e-6 * (1.0 + out.residue.norm()));
    }

    #[test]
    fn wodzicki_local_trivial_cases() {
        let mut a = ClassicalSymbol::zero(-1, 3);
        a.set_component(0, SheetPair::constant(1.0, 1.0));
        assert!((wodzicki_local(&a) - c(2.0, 0.0)).norm() < 1e-15);

        let mut b = ClassicalSymbol::zero(-1, 3);
        b.set_component(0, SheetPair::both(TrigPoly::cos_sin(1, 1.0, 0.0)));
        assert!(wodzicki_local(&b).norm() < 1e-15);

        let lower = ClassicalSymbol::zero(-2, 3);
        assert_eq!(wodzicki_local(&lower), c(0.0, 0.0));
    }

    #[test]
    fn wodzicki_matches_spectral_residue() {
        // order -1 symbol: residue of Tr(Op(a) Q^{-z}) at z = 0 equals the
        // local cosphere integral.
        let n = 256;
        let mut a = ClassicalSymbol::zero(-1, 4);
        a.set_component(
            0,
            SheetPair {
                plus: TrigPoly::cos_sin(1, 0.7, 0.0).add(&TrigPoly::constant_re(1.3)),
                minus: TrigPoly::cos_sin(2, 0.0, -0.4).add(&TrigPoly::constant_re(0.8)),
            },
        );
        a.set_component(1, SheetPair::both(TrigPoly::cos_sin(1, 0.5, 0.2)));
        let op = quantize(&a, n, Cutoff::default()).unwrap();
        let cfg = ContinuationConfig::default();
        let out = continue_zeta(&op, None, &canonical_lambda(n), c(0.0, 0.0), &cfg).unwrap();
        let local = wodzicki_local(&a);
        let tol = (5.0 / n as f64).max(1e-3);
        assert!(
            (out.residue - local).norm() < tol,
            "spectral {} local {}",
            out.residue,
            local
        );
    }

    #[test]
    fn residue_is_q_independent() {
        let n = 256;
        let mut a = ClassicalSymbol::zero(-1, 4);
        a.set_component(0, SheetPair::constant(0.9, 1.1));
        let op = quantize(&a, n, Cutoff::default()).unwrap();
        let cfg = ContinuationConfig::default();
        let l1 = canonical_lambda(n);
        let l2: Vec<f64> = (-(n as i64)..=(n as i64))
            .map(|k| (1.0 + (k * k * k * k) as f64).powf(0.25))
            .collect();
        let r1 = continue_zeta(&op, None, &l1, c(0.0, 0.0), &cfg).unwrap();
        let r2 = continue_zeta(&op, None, &l2, c(0.0, 0.0), &cfg).unwrap();
        assert!((r1.residue - r2.residue).norm() < 2e-3);
        assert!((r1.residue - wodzicki_local(&a)).norm() < 2e-3);
    }

    #[test]
    fn cutoff_independence_of_residue() {
        let n = 256;
        let mut a = ClassicalSymbol::zero(-1, 4);
        a.set_component(
            0,
            SheetPair::both(TrigPoly::constant_re(1.0).add(&TrigPoly::cos_sin(1, 0.4, 0.0))),
        );
        let cfg = ContinuationConfig::default();
        let lam = canonical_lambda(n);
        let op1 = quantize(&a, n, Cutoff::default()).unwrap();
        let op2 = quantize(&a, n, Cutoff::new(0.5, 2.5)).unwrap();
        let r1 = continue_zeta(&op1, None, &lam, c(0.0, 0.0), &cfg).unwrap();
        let r2 = continue_zeta(&op2, None, &lam, c(0.0, 0.0), &cfg).unwrap();
        assert!((r1.residue - r2.residue).norm() < 1e-3);
    }

    #[test]
    fn ln_position_independence() {
        // Res Tr(A [lnQ, B] Q^{-z}) computed with Q^{-z} before or after the
        // commutator agree (simple-pole consequence).
        let n = 128;
        let lam = canonical_lambda(n);
        let mut lnq = CMatrix::zeros(2 * n + 1, 2 * n + 1);
        for i in 0..2 * n + 1 {
            lnq[(i, i)] = c(lam[i].ln(), 0.0);
        }
        let mut asym = ClassicalSymbol::zero(0, 4);
        asym.set_component(0, SheetPair::both(TrigPoly::cos_sin(1, 1.0, 0.0).add(&TrigPoly::constant_re(2.0))));
        let mut bsym = ClassicalSymbol::zero(0, 4);
        bsym.set_component(0, SheetPair::both(TrigPoly::harmonic(1)));
        let a = quantize(&asym, n, Cutoff::default()).unwrap();
        let b = quantize(&bsym, n, Cutoff::default()).unwrap();
        let commut = lnq.matmul(&b.matrix).sub(&b.matrix.matmul(&lnq));
        let w1 = a.matrix.matmul(&commut); // A [lnQ, B], then Q^{-z}
        let w2 = commut.matmul(&a.matrix); // [lnQ, B] A = cyclic form of A Q^{-z} [lnQ, B]
        let cfg = ContinuationConfig { boundary_skip: 16, reconcile_tol: 5e-2, ..Default::default() };
        let mk = |m: CMatrix| FourierOperator {
            n,
            matrix: m,
            order: OpOrder::Classical(-1),
            factor: crate::engine::Factor::SingleCircle,
        };
        let r1 = continue_zeta(&mk(w1), None, &lam, c(0.0, 0.0), &cfg).unwrap();
        let r2 = continue_zeta(&mk(w2), None, &lam, c(0.0, 0.0), &cfg).unwrap();
        assert!(
            (r1.residue - r2.residue).norm() < 1e-3 * (1.0 + r1.residue.norm()),
            "r1 {} r2 {}",
            r1.residue,
            r2.residue
        );
    }

    #[test]
    fn toeplitz_pairing_matches_minus_index() {
        let n = 48;
        let p = FourierOperator::diagonal(n, OpOrder::Classical(0), |k| {
            c(if k >= 0 { 1.0 } else { 0.0 }, 0.0)
        });
        let mut usym = ClassicalSymbol::zero(0, 2);
        usym.set_component(0, SheetPair::both(TrigPoly::harmonic(1)));
        let u = quantize(&usym, n, Cutoff::default()).unwrap();
        let t = crate::engine::toeplitz(&p, &u).unwrap();
        let cfg = ContinuationConfig { reconcile_tol: 5e-2, ..Default::default() };
        let out = residue_pairing_spectral(&t, &canonical_lambda(n), &cfg).unwrap();
        let index = crate::engine::fredholm_index(&t, 1e-6).unwrap();
        assert_eq!(index, -1);
        assert!(
            (out.residue.re - 1.0).abs() < 5e-2,
            "pairing residue {} vs -index {}",
            out.residue.re,
            -index
        );
    }

    #[test]
    fn pairing_zero_for_commuting_t() {
        let n = 32;
        let t = FourierOperator::diagonal(n, OpOrder::Classical(0), |k| {
            c(2.0 + (k as f64 * 0.3).cos(), 0.0)
        });
        let cfg = ContinuationConfig { reconcile_tol: 1.0, ..Default::default() };
        let out = residue_pairing_spectral(&t, &canonical_lambda(n), &cfg).unwrap();
        assert!(out.residue.norm() < 1e-8);
    }

    #[test]
    fn leading_symbol_residue_formula() {
        let u = TrigPoly::harmonic(1);
        let v = leading_symbol_residue(&u, &[3.0]).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        assert_eq!(leading_symbol_residue(&TrigPoly::constant_re(1.0), &[3.0]).unwrap(), 0.0);
        assert_eq!(leading_symbol_residue(&u, &[]).unwrap(), 0.0);
    }
}
