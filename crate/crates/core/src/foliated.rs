//! Crossed-product convolution algebra of a foliated dynamical system and
//! its trace functionals.
//!
//! Built-in models are trivial-holonomy reductions: every leaf meets the
//! transversal once, so the groupoid is B x| R with B a disjoint union of
//! flow components. A periodic component is a circle of period p carrying a
//! leafwise return map; a fixed-point component carries a flow exponent
//! kappa != 0 and a graded generator on the coefficient bundle.
//!
//! Elements f(b, t) are trig polynomials in b sampled on a uniform t-grid
//! with compact support; matrix-valued entries host the nilpotent-trick
//! idempotents. The convolution convention is
//!
//! ```text
//! (f g)(v, s) = int f(v, t) g(phi_t(v), s - t) dt
//! ```
//!
//! with phi the transversal flow. All traces are evaluated on this grid
//! with spectrally accurate quadrature (smooth compactly supported
//! integrands on uniform grids).

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::harmonics::{fixed_points, CircleDiffeo, TrigPoly, TAU};
use crate::linalg::{matexp, CMatrix};

/// Graded coefficient bundle data for one transversal component.
#[derive(Debug, Clone)]
pub struct GradedBundle {
    pub n_plus: usize,
    pub n_minus: usize,
    /// even (block-diagonal) invertible return action / flow generator
    pub action: CMatrix,
}

impl GradedBundle {
    pub fn trivial_line() -> Self {
        Self { n_plus: 1, n_minus: 0, action: CMatrix::identity(1) }
    }

    pub fn dim(&self) -> usize {
        self.n_plus + self.n_minus
    }

    /// supertrace of action^n (n may be negative: the action is invertible)
    pub fn supertrace_power(&self, n: i64) -> Result<C64> {
        let m = if n >= 0 {
            matrix_power(&self.action, n as usize)
        } else {
            let inv = self.action.inverse()?;
            matrix_power(&inv, (-n) as usize)
        };
        Ok(self.supertrace(&m))
    }

    pub fn supertrace(&self, m: &CMatrix) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.dim() {
            let sign = if i < self.n_plus { 1.0 } else { -1.0 };
            acc += m[(i, i)] * sign;
        }
        acc
    }

    /// supertrace of exp(action * t), for fixed-point generators
    pub fn supertrace_exp(&self, t: f64) -> C64 {
        let e = matexp(&self.action.scale(C64::new(t, 0.0)));
        self.supertrace(&e)
    }
}

fn matrix_power(m: &CMatrix, n: usize) -> CMatrix {
    let mut out = CMatrix::identity(m.rows());
    for _ in 0..n {
        out = out.matmul(m);
    }
    out
}

/// One transversal component of the foliated model.
#[derive(Debug, Clone)]
pub enum Transversal {
    Periodic {
        period: f64,
        /// leafwise return map on the 2 pi leaf circle
        return_map: CircleDiffeo,
        bundle: GradedBundle,
        /// leaf rotation angle per unit flow time (isometric built-ins)
        leaf_rate: f64,
    },
    FixedPoint {
        kappa: f64,
        /// flow generator on the graded bundle fiber
        bundle: GradedBundle,
        /// leaf rotation angle per unit flow time over the preserved leaf
        leaf_rate: f64,
    },
}

#[derive(Debug, Clone)]
pub struct FoliatedModel {
    pub components: Vec<Transversal>,
    pub n_max: usize,
}

/// Per-orbit data extracted from a periodic component: a fixed point of the
/// leafwise return map with its (orbit-constant) derivative.
#[derive(Debug, Clone)]
pub struct OrbitData {
    pub component: usize,
    pub period: f64,
    pub leaf_point: f64,
    pub h_prime: f64,
    pub bundle: GradedBundle,
}

/// Non-degeneracy report (margins per orbit and per n).
#[derive(Debug, Clone)]
pub struct NondegeneracyReport {
    pub degenerate: bool,
    /// (component, leaf point, n, |1 - h'^n|)
    pub orbit_margins: Vec<(usize, f64, i64, f64)>,
    /// (component, |kappa|)
    pub exponent_margins: Vec<(usize, f64)>,
}

impl FoliatedModel {
    /// Periodic orbits of the flow: fixed points of the leafwise return
    /// maps. Rotation components contribute none.
    pub fn orbits(&self) -> Result<Vec<OrbitData>> {
        let mut out = Vec::new();
        for (ci, comp) in self.components.iter().enumerate() {
            if let Transversal::Periodic { period, return_map, bundle, .. } = comp {
                match fixed_points(return_map, 1e-8) {
                    Ok(fps) => {
                        for (y, hp) in fps {
                            out.push(OrbitData {
                                component: ci,
                                period: *period,
                                leaf_point: y,
                                h_prime: hp,
                                bundle: bundle.clone(),
                            });
                        }
                    }
                    Err(Error::ContinuumFixedPoints) => {
                        // identity return map: every leaf closes; outside the
                        // built-in scenario class, treated as no isolated orbits
                        continue;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(out)
    }

    pub fn check_nondegenerate(&self, n_max: usize) -> Result<NondegeneracyReport> {
        let mut orbit_margins = Vec::new();
        let mut exponent_margins = Vec::new();
        let mut degenerate = false;
        for (ci, comp) in self.components.iter().enumerate() {
            match comp {
                Transversal::Periodic { return_map, .. } => {
                    if let Ok(fps) = fixed_points(return_map, 1e-10) {
                        for (y, hp) in fps {
                            for n in 1..=n_max as i64 {
                                for sign in [n, -n] {
                                    let margin = (1.0 - hp.powi(sign as i32)).abs();
                                    if margin < 1e-10 {
                                        degenerate = true;
                                    }
                                    orbit_margins.push((ci, y, sign, margin));
                                }
                            }
                        }
                    }
                }
                Transversal::FixedPoint { kappa, .. } => {
                    if kappa.abs() < 1e-12 {
                        degenerate = true;
                    }
                    exponent_margins.push((ci, kappa.abs()));
                }
            }
        }
        Ok(NondegeneracyReport { degenerate, orbit_margins, exponent_margins })
    }
}

/// Uniform symmetric time grid t_i = (i - n_half) dt, i = 0..2 n_half.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_half: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, dt: f64) -> Self {
        let n_half = (t_max / dt).round() as usize;
        Self { dt, n_half }
    }

    pub fn len(&self) -> usize {
        2 * self.n_half + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t(&self, i: usize) -> f64 {
        (i as f64 - self.n_half as f64) * self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.n_half as f64 * self.dt
    }

    /// Exact grid index of time t, if t is on the grid.
    fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.dt + self.n_half as f64;
        let i = x.round();
        if (x - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < self.len() {
            Some(i as usize)
        } else {
            None
        }
    }
}

/// Data of one component of a crossed element: matrix-valued trig
/// polynomials per time-grid node, data[i][r * msize + c].
#[derive(Debug, Clone)]
pub struct ComponentElement {
    pub msize: usize,
    pub data: Vec<Vec<TrigPoly>>,
}

impl ComponentElement {
    pub fn zero(grid: TimeGrid, msize: usize) -> Self {
        Self { msize, data: vec![vec![TrigPoly::zero(); msize * msize]; grid.len()] }
    }

    fn support(&self) -> Option<(usize, usize)> {
        let nz: Vec<usize> = self
            .data
            .iter()
            .enumerate()
            .filter(|(_, v)| v.iter().any(|p| p.l2_norm() > 1e-300))
            .map(|(i, _)| i)
            .collect();
        match (nz.first(), nz.last()) {
            (Some(&a), Some(&b)) => Some((a, b)),
            _ => None,
        }
    }

    pub fn norm(&self) -> f64 {
        self.data
            .iter()
            .flat_map(|v| v.iter())
            .map(|p| p.l2_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Element of the crossed-product convolution algebra.
#[derive(Debug, Clone)]
pub struct CrossedElement {
    pub grid: TimeGrid,
    pub components: Vec<ComponentElement>,
    pub positive_time: bool,
}

impl CrossedElement {
    pub fn zero(model: &FoliatedModel, grid: TimeGrid, msize: usize) -> Self {
        Self {
            grid,
            components: model.components.iter().map(|_| ComponentElement::zero(grid, msize)).collect(),
            positive_time: false,
        }
    }

    /// Build from a closure (component, b-degree cap is the caller's
    /// business): f(component, t) -> matrix of trig polys.
    pub fn from_fn(
        model: &FoliatedModel,
        grid: TimeGrid,
        msize: usize,
        mut f: impl FnMut(usize, f64) -> Vec<TrigPoly>,
    ) -> Self {
        let components = (0..model.components.len())
            .map(|ci| {
                let data = (0..grid.len())
                    .map(|i| {
                        let v = f(ci, grid.t(i));
                        assert_eq!(v.len(), msize * msize);
                        v
                    })
                    .collect();
                ComponentElement { msize, data }
            })
            .collect();
        let mut e = Self { grid, components, positive_time: false };
        e.positive_time = e.support_positive();
        e
    }

    fn support_positive(&self) -> bool {
        for comp in &self.components {
            if let Some((a, _)) = comp.support() {
                if self.grid.t(a) <= 0.0 {
                    return false;
                }
            }
        }
        true
    }

    pub fn scale(&self, a: C64) -> CrossedElement {
        let mut out = self.clone();
        for comp in out.components.iter_mut() {
            for v in comp.data.iter_mut() {
                for p in v.iter_mut() {
                    *p = p.scale(a);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &CrossedElement) -> CrossedElement {
        assert_eq!(self.grid, other.grid);
        let mut out = self.clone();
        for (c1, c2) in out.components.iter_mut().zip(other.components.iter()) {
            for (v1, v2) in c1.data.iter_mut().zip(c2.data.iter()) {
                for (p1, p2) in v1.iter_mut().zip(v2.iter()) {
                    *p1 = p1.add(p2);
                }
            }
        }
        out.positive_time = out.support_positive();
        out
    }

    pub fn sub(&self, other: &CrossedElement) -> CrossedElement {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c.norm().powi(2)).sum::<f64>().sqrt()
    }

    /// sup over the grid of the largest matrix-entry sup norm
    pub fn sup_norm(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.data.iter())
            .flat_map(|v| v.iter())
            .map(|p| p.sup_norm(64))
            .fold(0.0, f64::max)
    }
}

/// Convolution (f g)(v, s) = int f(v,t) g(phi_t(v), s-t) dt with the
/// transversal flow phi; trapezoid quadrature is spectrally accurate here
/// because the integrands are smooth with compact support.
pub fn convolve(
    model: &FoliatedModel,
    f: &CrossedElement,
    g: &CrossedElement,
) -> Result<CrossedElement> {
    assert_eq!(f.grid, g.grid);
    let grid = f.grid;
    let n = grid.len();
    let msize = f.components[0].msize;
    assert_eq!(msize, g.components[0].msize, "matrix sizes differ");
    let mut out = CrossedElement {
        grid,
        components: Vec::with_capacity(model.components.len()),
        positive_time: false,
    };
    for (ci, comp) in model.components.iter().enumerate() {
        let fc = &f.components[ci];
        let gc = &g.components[ci];
        // support bookkeeping: the result must fit the grid
        if let (Some((fa, fb)), Some((ga, gb))) = (fc.support(), gc.support()) {
            let lo = grid.t(fa) + grid.t(ga);
            let hi = grid.t(fb) + grid.t(gb);
            if lo < -grid.t_max() - 1e-9 || hi > grid.t_max() + 1e-9 {
                return Err(Error::SupportOverflow { lo, hi });
            }
        }
        let angle_rate = match comp {
            Transversal::Periodic { period, .. } => TAU / period,
            Transversal::FixedPoint { .. } => 0.0,
        };
        let mut data = vec![vec![TrigPoly::zero(); msize * msize]; n];
        let (fa, fb) = match fc.support() {
            Some(s) => s,
            None => {
                out.components.push(ComponentElement { msize, data });
                continue;
            }
        };
        for it in fa..=fb {
            let t = grid.t(it);
            let angle = angle_rate * t;
            for is in 0..n {
                // s - t index: is - (it - n_half)
                let js = is as i64 - (it as i64 - grid.n_half as i64);
                if js < 0 || js >= n as i64 {
                    continue;
                }
                let js = js as usize;
                // matrix product with the rotated right factor
                for r in 0..msize {
                    for c in 0..msize {
                        let mut acc = TrigPoly::zero();
                        for k in 0..msize {
                            let left = &fc.data[it][r * msize + k];
                            if left.l2_norm() < 1e-300 {
                                continue;
                            }
                            let right = &gc.data[js][k * msize + c];
                            if right.l2_norm() < 1e-300 {
                                continue;
                            }
                            acc = acc.add(&left.mul(&right.rotate(angle)));
                        }
                        if acc.l2_norm() > 0.0 {
                            data[is][r * msize + c] =
                                data[is][r * msize + c].add(&acc.scale(C64::new(grid.dt, 0.0)));
                        }
                    }
                }
            }
        }
        out.components.push(ComponentElement { msize, data });
    }
    out.positive_time = f.positive_time && g.positive_time;
    Ok(out)
}

/// Eight-point centered Lagrange interpolation of element data at time t.
fn interp_at_t(comp: &ComponentElement, grid: TimeGrid, slot: usize, t: f64) -> TrigPoly {
    if let Some(i) = grid.index_of(t) {
        return comp.data[i][slot].clone();
    }
    let x = t / grid.dt + grid.n_half as f64;
    if x < 0.0 || x > (grid.len() - 1) as f64 {
        return TrigPoly::zero();
    }
    const STENCIL: usize = 8;
    let i0 = (x.floor() as i64 - (STENCIL as i64 / 2 - 1))
        .clamp(0, grid.len() as i64 - STENCIL as i64) as usize;
    let mut acc = TrigPoly::zero();
    for j in 0..STENCIL {
        let xj = (i0 + j) as f64;
        let mut w = 1.0;
        for k in 0..STENCIL {
            if k != j {
                let xk = (i0 + k) as f64;
                w *= (x - xk) / (xj - xk);
            }
        }
        acc = acc.add(&comp.data[i0 + j][slot].scale(C64::new(w, 0.0)));
    }
    acc
}

/// Public interpolation entry point for sibling modules.
pub fn interp_slot_at(comp: &ComponentElement, grid: TimeGrid, slot: usize, t: f64) -> TrigPoly {
    interp_at_t(comp, grid, slot, t)
}

/// Matrix trace of the element at (component, t), as a trig poly in b.
fn matrix_trace_at(comp: &ComponentElement, grid: TimeGrid, t: f64) -> TrigPoly {
    let mut acc = TrigPoly::zero();
    for r in 0..comp.msize {
        acc = acc.add(&interp_at_t(comp, grid, r * comp.msize + r, t));
    }
    acc
}

/// Operator trace of Prop-8.1 type: sum over periodic components of
/// sum_n int_B f(b, n p) db. Fixed-point components are rejected (use the
/// extended trace).
pub fn trace_op(model: &FoliatedModel, f: &CrossedElement) -> Result<C64> {
    let mut acc = C64::new(0.0, 0.0);
    for (ci, comp) in model.components.iter().enumerate() {
        match comp {
            Transversal::Periodic { period, .. } => {
                let fc = &f.components[ci];
                let nmax = (f.grid.t_max() / period).floor() as i64;
                for n in -nmax..=nmax {
                    let t = n as f64 * period;
                    let tr = matrix_trace_at(fc, f.grid, t);
                    acc += tr.mean() * period; // int db = p * mean
                }
            }
            Transversal::FixedPoint { .. } => return Err(Error::FixedPointComponent),
        }
    }
    Ok(acc)
}

/// Trace localized at units: Tr_0(f) = int_B f(b, 0) db.
pub fn trace_units(model: &FoliatedModel, f: &CrossedElement) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (ci, comp) in model.components.iter().enumerate() {
        let measure = match comp {
            Transversal::Periodic { period, .. } => *period,
            Transversal::FixedPoint { .. } => continue, // point components carry no db-mass
        };
        let tr = matrix_trace_at(&f.components[ci], f.grid, 0.0);
        acc += tr.mean() * measure;
    }
    acc
}

/// Extended trace for positive-time elements on models with fixed points:
/// periodic terms as in `trace_op` plus int_0^inf f(b,t)/|1-e^{kappa t}| dt
/// per fixed point. The integrand is regular because the support avoids 0.
pub fn trace_extended(model: &FoliatedModel, f: &CrossedElement) -> Result<C64> {
    if !f.positive_time {
        return Err(Error::NotPositiveTime);
    }
    let mut acc = C64::new(0.0, 0.0);
    for (ci, comp) in model.components.iter().enumerate() {
        let fc = &f.components[ci];
        match comp {
            Transversal::Periodic { period, .. } => {
                let nmax = (f.grid.t_max() / period).floor() as i64;
                for n in 1..=nmax {
                    let t = n as f64 * period;
                    acc += matrix_trace_at(fc, f.grid, t).mean() * period;
                }
            }
            Transversal::FixedPoint { kappa, .. } => {
                if kappa.abs() < 1e-12 {
                    return Err(Error::ZeroExponent);
                }
                // trapezoid over the positive grid; the integrand vanishes
                // smoothly at the support boundary
                let g = f.grid;
                for i in 0..g.len() {
                    let t = g.t(i);
                    if t <= 1e-12 {
                        continue;
                    }
                    let tr = matrix_trace_at(fc, g, t).mean();
                    acc += tr * (g.dt / (1.0 - (kappa * t).exp()).abs());
                }
            }
        }
    }
    Ok(acc)
}

/// Orbit-localized trace (Eq. theta): for each n != 0 with |n| <= n_max and
/// n p inside the support,
/// tr_s(j^n) / |1 - h'^n| * int_Pi e(v, n p) dv. Returns the total and the
/// per-n breakdown.
pub fn theta_trace(
    orbit: &OrbitData,
    e: &CrossedElement,
    n_max: usize,
) -> Result<(C64, Vec<(i64, C64)>)> {
    let comp = &e.components[orbit.component];
    let mut total = C64::new(0.0, 0.0);
    let mut breakdown = Vec::new();
    let nmax_grid = (e.grid.t_max() / orbit.period).floor() as i64;
    for n in -(n_max as i64)..=(n_max as i64) {
        if n == 0 || n.abs() > nmax_grid {
            continue;
        }
        let margin = (1.0 - orbit.h_prime.powi(n as i32)).abs();
        if margin < 1e-10 {
            return Err(Error::DegenerateOrbit { n, margin });
        }
        let tr_s = orbit.bundle.supertrace_power(n)?;
        let integral = matrix_trace_at(comp, e.grid, n as f64 * orbit.period).mean() * orbit.period;
        let term = tr_s / margin * integral;
        if term.norm() > 0.0 {
            breakdown.push((n, term));
        }
        total += term;
    }
    Ok((total, breakdown))
}

/// Fixed-point trace (Eq. W): int_0^inf tr_s(e^{j t}) / |1 - e^{kappa t}| e(v,t) dt.
pub fn w_trace(model: &FoliatedModel, component: usize, e: &CrossedElement) -> Result<C64> {
    let (kappa, bundle) = match &model.components[component] {
        Transversal::FixedPoint { kappa, bundle, .. } => (*kappa, bundle),
        _ => return Err(Error::NotPeriodic { index: component }),
    };
    if kappa.abs() < 1e-12 {
        return Err(Error::ZeroExponent);
    }
    if !e.positive_time {
        return Err(Error::NotPositiveTime);
    }
    let comp = &e.components[component];
    let g = e.grid;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..g.len() {
        let t = g.t(i);
        if t <= 1e-12 {
            continue;
        }
        let tr_mat = matrix_trace_at(comp, g, t).mean();
        if tr_mat.norm() == 0.0 {
            continue;
        }
        let weight = bundle.supertrace_exp(t) / (1.0 - (kappa * t).exp()).abs();
        acc += tr_mat * weight * g.dt;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// representation kernels on a periodic component
// ---------------------------------------------------------------------------

/// Matrix of the element acting on Fourier modes of the component circle:
/// K_{k,l} = b-Fourier coefficient (k-l) of the t-Fourier transform of
/// f(b, .) at frequency 2 pi l / p. Multiplicative within mode truncation.
pub fn rep_kernel(
    model: &FoliatedModel,
    f: &CrossedElement,
    component: usize,
    mode_cap: usize,
) -> Result<CMatrix> {
    let period = match &model.components[component] {
        Transversal::Periodic { period, .. } => *period,
        _ => return Err(Error::NotPeriodic { index: component }),
    };
    let comp = &f.components[component];
    let msize = comp.msize;
    let g = f.grid;
    let dim = (2 * mode_cap + 1) * msize;
    let mut k = CMatrix::zeros(dim, dim);
    let li = mode_cap as i64;
    for l in -li..=li {
        let omega = TAU * l as f64 / period;
        // t-Fourier transform at omega: sum dt f(b, t) e^{i omega t}
        for r in 0..msize {
            for c in 0..msize {
                let mut ft = TrigPoly::zero();
                for i in 0..g.len() {
                    let p = &comp.data[i][r * msize + c];
                    if p.l2_norm() < 1e-300 {
                        continue;
                    }
                    let phase = C64::new(0.0, omega * g.t(i)).exp() * g.dt;
                    ft = ft.add(&p.scale(phase));
                }
                for km in -li..=li {
                    let coeff = ft.coeff(km - l);
                    if coeff.norm_sqr() == 0.0 {
                        continue;
                    }
                    let row = ((km + li) as usize) * msize + r;
                    let col = ((l + li) as usize) * msize + c;
                    k[(row, col)] = coeff;
                }
            }
        }
    }
    Ok(k)
}

/// Kernel value k_f(b, b') = sum_n f(b, n p + b' - b) evaluated pointwise
/// (physical transversal coordinates in [0, p)).
pub fn kernel_value(
    model: &FoliatedModel,
    f: &CrossedElement,
    component: usize,
    b: f64,
    b_prime: f64,
) -> Result<CMatrix> {
    let period = match &model.components[component] {
        Transversal::Periodic { period, .. } => *period,
        _ => return Err(Error::NotPeriodic { index: component }),
    };
    let comp = &f.components[component];
    let msize = comp.msize;
    let g = f.grid;
    let mut out = CMatrix::zeros(msize, msize);
    let nmax = ((g.t_max() + period) / period).ceil() as i64;
    let x = TAU * b / period;
    for n in -nmax..=nmax {
        let t = n as f64 * period + b_prime - b;
        if t.abs() > g.t_max() {
            continue;
        }
        for r in 0..msize {
            for c in 0..msize {
                let p = interp_at_t(comp, g, r * msize + c, t);
                out[(r, c)] += p.eval(x);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// rank-one projection and Morita reduction
// ---------------------------------------------------------------------------

/// C-infinity window on (0, 1), vanishing to all orders at both ends.
#[allow(dead_code)]
fn bump(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        (-1.0 / (u * (1.0 - u))).exp()
    }
}

/// Rank-one smoothing projection through the Prop-8.1 representation:
/// e(b, t) = sum_m Phi(v + m p) conj(Phi)(v + m p + t) with Phi a windowed
/// profile whose period-p translates are exactly orthonormal. Then e is an
/// idempotent of the convolution algebra and its kernel is the rank-one
/// projector onto the periodization of Phi, of trace one.
///
/// Phi is built from the supplied shape phi times a Gaussian window,
/// orthonormalized in the translate basis through the Gram square root; the
/// Gaussian makes every b-slice analytic with fast coefficient decay and
/// the t-profile numerically compactly supported.
pub fn rank_one_projection(
    model: &FoliatedModel,
    component: usize,
    grid: TimeGrid,
    phi: &TrigPoly,
    b_degree: usize,
) -> Result<CrossedElement> {
    let period = match &model.components[component] {
        Transversal::Periodic { period, .. } => *period,
        _ => return Err(Error::NotPeriodic { index: component }),
    };
    if grid.t_max() < 2.0 * period {
        return Err(Error::SupportOverflow { lo: -2.0 * period, hi: 2.0 * period });
    }
    let sigma = period / 7.0;
    let psi = |v: f64| -> C64 {
        let w = (-(v - period / 2.0).powi(2) / (2.0 * sigma * sigma)).exp();
        phi.eval(TAU * v / period) * w
    };
    // translate Gram g_j = int conj(Psi(v)) Psi(v + j p) dv, |j| <= 2
    let quad = 4096usize;
    let dv = 5.0 * period / quad as f64;
    let gram_j = |j: i64| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..quad {
            let v = -2.0 * period + dv * (i as f64 + 0.5);
            acc += psi(v).conj() * psi(v + j as f64 * period) * dv;
        }
        acc
    };
    let g: Vec<C64> = (-2..=2).map(gram_j).collect();
    if g[2].norm() < 1e-12 {
        return Err(Error::Normalization { what: "rank-one profile".into(), defect: g[2].norm() });
    }
    // orthonormalization coefficients c_j from G(theta)^{-1/2}
    let mtheta = 64usize;
    let mut c = vec![C64::new(0.0, 0.0); 7]; // j in [-3, 3]
    for i in 0..mtheta {
        let theta = TAU * i as f64 / mtheta as f64;
        let mut gt = C64::new(0.0, 0.0);
        for (jj, gj) in g.iter().enumerate() {
            let j = jj as i64 - 2;
            gt += gj * C64::new(0.0, j as f64 * theta).exp();
        }
        let inv_sqrt = C64::new(1.0, 0.0) / gt.sqrt();
        for (jj, cj) in c.iter_mut().enumerate() {
            let j = jj as i64 - 3;
            *cj += inv_sqrt * C64::new(0.0, -(j as f64) * theta).exp() / mtheta as f64;
        }
    }
    let phi_big = |v: f64| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (jj, cj) in c.iter().enumerate() {
            let j = jj as i64 - 3;
            if cj.norm_sqr() > 1e-60 {
                acc += cj * psi(v + j as f64 * period);
            }
        }
        acc
    };

    let mut out = CrossedElement::zero(model, grid, 1);
    let nx = (4 * b_degree).max(64);
    let mut slices: Vec<(usize, Vec<C64>, f64)> = Vec::new();
    let mut global_energy = 0.0f64;
    for i in 0..grid.len() {
        let t = grid.t(i);
        if t.abs() > 1.8 * period {
            continue; // Gaussian tails are below working precision there
        }
        let samples: Vec<C64> = (0..nx)
            .map(|ix| {
                let v0 = period * ix as f64 / nx as f64;
                let mut acc = C64::new(0.0, 0.0);
                for m in -4..=4 {
                    let v = v0 + m as f64 * period;
                    let a = phi_big(v);
                    if a.norm_sqr() < 1e-80 {
                        continue;
                    }
                    acc += a * phi_big(v + t).conj();
                }
                acc
            })
            .collect();
        let energy: f64 = samples.iter().map(|z| z.norm_sqr()).sum();
        global_energy = global_energy.max(energy);
        slices.push((i, samples, energy));
    }
    for (i, samples, energy) in slices {
        if energy < 1e-22 * global_energy {
            continue; // numerically vanishing slice
        }
        let (p, tail) = TrigPoly::fit(&samples, b_degree);
        if tail * energy > 1e-20 * global_energy {
            return Err(Error::SpectralTail {
                tail,
                tol: 1e-20 * global_energy / energy.max(1e-300),
            });
        }
        out.components[component].data[i][0] = p.trim(1e-15);
    }
    out.positive_time = false;
    Ok(out)
}

/// Degree-d covering data for the Morita reduction: cutoff c on the cover
/// circle with sum over deck translates of c^2 equal to 1.
#[derive(Clone)]
pub struct CoveringCutoff {
    pub degree: usize,
    /// cutoff as a trig poly on the cover circle (2 pi parametrized)
    pub c: TrigPoly,
}

impl CoveringCutoff {
    /// Smooth partition cutoff from an analytic nowhere-vanishing profile:
    /// c = c0 / sqrt(sum of deck translates of c0^2). Since c0 is bounded
    /// away from zero the quotient has exponentially decaying coefficients.
    pub fn standard(degree: usize, fit_degree: usize) -> Result<Self> {
        Self::shifted(degree, fit_degree, 0.0)
    }

    /// Same construction with the profile peak shifted (a second admissible
    /// cutoff for the independence checks).
    pub fn shifted(degree: usize, fit_degree: usize, shift: f64) -> Result<Self> {
        let d = degree as f64;
        let m = (8 * fit_degree).max(256);
        let c0 = |x: f64| 1.0 + 0.8 * (x - shift).cos();
        let samples: Vec<C64> = (0..m)
            .map(|i| {
                let x = TAU * i as f64 / m as f64;
                let mut total = 0.0;
                for j in 0..degree {
                    total += c0(x + TAU * j as f64 / d).powi(2);
                }
                C64::new(c0(x) / total.sqrt(), 0.0)
            })
            .collect();
        let (c, tail) = TrigPoly::fit(&samples, fit_degree);
        if tail > 1e-24 {
            return Err(Error::SpectralTail { tail, tol: 1e-24 });
        }
        let out = Self { degree, c: c.trim(1e-15) };
        out.check_normalization()?;
        Ok(out)
    }

    pub fn check_normalization(&self) -> Result<()> {
        let m = (8 * self.c.degree()).max(256);
        let mut worst = 0.0f64;
        for i in 0..m {
            let x = TAU * i as f64 / m as f64;
            let mut acc = 0.0;
            for j in 0..self.degree {
                acc += self.c.eval(x + TAU * j as f64 / self.degree as f64).norm_sqr();
            }
            worst = worst.max((acc - 1.0).abs());
        }
        if worst > 1e-10 {
            return Err(Error::CutoffNormalization { defect: worst });
        }
        Ok(())
    }
}

/// Element over the degree-d covering groupoid: data per deck index and
/// time node, trig polys on the cover circle.
#[derive(Debug, Clone)]
pub struct CoveredElement {
    pub grid: TimeGrid,
    pub degree: usize,
    pub msize: usize,
    /// data[deck][t][r*msize+c]
    pub data: Vec<Vec<Vec<TrigPoly>>>,
    /// base period p (cover circumference is d * p)
    pub period: f64,
}

impl CoveredElement {
    pub fn norm(&self) -> f64 {
        self.data
            .iter()
            .flat_map(|d| d.iter())
            .flat_map(|v| v.iter())
            .map(|p| p.l2_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn sub(&self, other: &CoveredElement) -> CoveredElement {
        let mut out = self.clone();
        for (d1, d2) in out.data.iter_mut().zip(other.data.iter()) {
            for (v1, v2) in d1.iter_mut().zip(d2.iter()) {
                for (p1, p2) in v1.iter_mut().zip(v2.iter()) {
                    *p1 = p1.sub(p2);
                }
            }
        }
        out
    }
}

/// Morita reduction homomorphism rho(f)(X, (j, t)) = c(X) f(r(X), t)
/// c(X . (j, t)) onto the degree-d covering of a periodic component.
pub fn rho_morita(
    model: &FoliatedModel,
    component: usize,
    f: &CrossedElement,
    cutoff: &CoveringCutoff,
    cover_degree_cap: usize,
) -> Result<CoveredElement> {
    let period = match &model.components[component] {
        Transversal::Periodic { period, .. } => *period,
        _ => return Err(Error::NotPeriodic { index: component }),
    };
    cutoff.check_normalization()?;
    let comp = &f.components[component];
    let msize = comp.msize;
    let g = f.grid;
    let d = cutoff.degree;
    let nx = (4 * cover_degree_cap).max(128);
    let mut data = vec![vec![vec![TrigPoly::zero(); msize * msize]; g.len()]; d];
    for (j, deck) in data.iter_mut().enumerate() {
        for (i, slot) in deck.iter_mut().enumerate() {
            let t = g.t(i);
            // X . (j, t) = X + 2 pi j / d + 2 pi t / (d p)
            let flow_angle = TAU * j as f64 / d as f64 + TAU * t / (d as f64 * period);
            for r in 0..msize {
                for c in 0..msize {
                    let base = &comp.data[i][r * msize + c];
                    if base.l2_norm() < 1e-300 {
                        continue;
                    }
                    let samples: Vec<C64> = (0..nx)
                        .map(|ix| {
                            let xx = TAU * ix as f64 / nx as f64;
                            let rx = (d as f64 * xx).rem_euclid(TAU);
                            cutoff.c.eval(xx) * base.eval(rx) * cutoff.c.eval(xx + flow_angle)
                        })
                        .collect();
                    let (p, tail) = TrigPoly::fit(&samples, cover_degree_cap);
                    if tail > 1e-8 {
                        return Err(Error::SpectralTail { tail, tol: 1e-8 });
                    }
                    slot[r * msize + c] = p.trim(1e-14);
                }
            }
        }
    }
    Ok(CoveredElement { grid: g, degree: d, msize, data, period })
}

/// Convolution on the covering groupoid (deck group times flow).
pub fn convolve_covered(f: &CoveredElement, g: &CoveredElement) -> Result<CoveredElement> {
    assert_eq!(f.grid, g.grid);
    assert_eq!(f.degree, g.degree);
    assert_eq!(f.msize, g.msize);
    let grid = f.grid;
    let n = grid.len();
    let d = f.degree;
    let msize = f.msize;
    let mut data = vec![vec![vec![TrigPoly::zero(); msize * msize]; n]; d];
    for j1 in 0..d {
        for j2 in 0..d {
            let j = (j1 + j2) % d;
            for it in 0..n {
                let t = grid.t(it);
                let angle = TAU * j1 as f64 / d as f64 + TAU * t / (d as f64 * f.period);
                for is in 0..n {
                    let js = is as i64 - (it as i64 - grid.n_half as i64);
                    if js < 0 || js >= n as i64 {
                        continue;
                    }
                    let js = js as usize;
                    for r in 0..msize {
                        for c in 0..msize {
                            let mut acc = TrigPoly::zero();
                            for k in 0..msize {
                                let left = &f.data[j1][it][r * msize + k];
                                if left.l2_norm() < 1e-300 {
                                    continue;
                                }
                                let right = &g.data[j2][js][k * msize + c];
                                if right.l2_norm() < 1e-300 {
                                    continue;
                                }
                                acc = acc.add(&left.mul(&right.rotate(angle)));
                            }
                            if acc.l2_norm() > 0.0 {
                                data[j][is][r * msize + c] = data[j][is][r * msize + c]
                                    .add(&acc.scale(C64::new(grid.dt, 0.0)));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(CoveredElement { grid, degree: d, msize, data, period: f.period })
}

// ---------------------------------------------------------------------------
// suspension of an idempotent
// ---------------------------------------------------------------------------

/// Element of the suspension algebra: Laurent polynomial in the Bott
/// generator beta with crossed-element coefficients, plus an adjoined
/// scalar unit.
#[derive(Debug, Clone)]
pub struct SuspendedElement {
    pub unit: C64,
    /// coefficients per beta power (small range)
    pub powers: Vec<(i32, CrossedElement)>,
}

impl SuspendedElement {
    pub fn one(model: &FoliatedModel, grid: TimeGrid, msize: usize) -> Self {
        let _ = (model, grid, msize);
        Self { unit: C64::new(1.0, 0.0), powers: Vec::new() }
    }

    pub fn mul(&self, other: &SuspendedElement, model: &FoliatedModel) -> Result<SuspendedElement> {
        let mut powers: Vec<(i32, CrossedElement)> = Vec::new();
        let mut add_term = |p: i32, e: CrossedElement| {
            if let Some((_, acc)) = powers.iter_mut().find(|(q, _)| *q == p) {
                *acc = acc.add(&e);
            } else {
                powers.push((p, e));
            }
        };
        for (p1, e1) in &self.powers {
            if other.unit.norm() > 0.0 {
                add_term(*p1, e1.scale(other.unit));
            }
            for (p2, e2) in &other.powers {
                add_term(p1 + p2, convolve(model, e1, e2)?);
            }
        }
        for (p2, e2) in &other.powers {
            if self.unit.norm() > 0.0 {
                add_term(*p2, e2.scale(self.unit));
            }
        }
        powers.sort_by_key(|(p, _)| *p);
        Ok(SuspendedElement { unit: self.unit * other.unit, powers })
    }

    /// Norm of (self - 1).
    pub fn defect_from_one(&self) -> f64 {
        let mut acc = (self.unit - C64::new(1.0, 0.0)).norm();
        for (_, e) in &self.powers {
            acc += e.sup_norm();
        }
        acc
    }
}

/// Suspension of an idempotent: u = 1 + e (beta - 1) with inverse
/// 1 + e (beta^{-1} - 1); the pair is returned with its verification defect
/// ||u u^{-1} - 1||.
pub fn suspension_symbol(
    model: &FoliatedModel,
    e: &CrossedElement,
    idem_tol: f64,
) -> Result<(SuspendedElement, SuspendedElement, f64)> {
    let defect = convolve(model, e, e)?.sub(e).sup_norm();
    if defect > idem_tol {
        return Err(Error::NotIdempotent { defect });
    }
    let u = SuspendedElement {
        unit: C64::new(1.0, 0.0),
        powers: vec![(0, e.scale(C64::new(-1.0, 0.0))), (1, e.clone())],
    };
    let uinv = SuspendedElement {
        unit: C64::new(1.0, 0.0),
        powers: vec![(-1, e.clone()), (0, e.scale(C64::new(-1.0, 0.0)))],
    };
    let prod = u.mul(&uinv, model)?;
    let one_defect = prod.defect_from_one();
    Ok((u, uinv, one_defect))
}
