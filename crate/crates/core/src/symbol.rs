//! Classical (1-step polyhomogeneous) symbols on a circle fiber.
//!
//! A symbol of order m is stored as finitely many homogeneous components;
//! component j holds the degree m-j coefficient evaluated on the two sheets
//! p = +1 and p = -1 of the cosphere, extended homogeneously to |p| >= 1.
//! Composition is the left (Kohn-Nirenberg) asymptotic product
//!
//! ```text
//! sigma_{a o b} = sum_k ((-i)^k / k!) d_p^k a * d_x^k b
//! ```
//!
//! where d_p acts on a degree-d component by degree lowering (factor d on the
//! plus sheet, -d on the minus sheet) and d_x is exact on trig polynomials.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::TrigPoly;

/// One homogeneous component: coefficients on the two cosphere sheets.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetPair {
    pub plus: TrigPoly,
    pub minus: TrigPoly,
}

impl SheetPair {
    pub fn zero() -> Self {
        Self { plus: TrigPoly::zero(), minus: TrigPoly::zero() }
    }

    pub fn constant(plus: f64, minus: f64) -> Self {
        Self { plus: TrigPoly::constant_re(plus), minus: TrigPoly::constant_re(minus) }
    }

    pub fn both(p: TrigPoly) -> Self {
        Self { plus: p.clone(), minus: p }
    }

    pub fn add(&self, other: &SheetPair) -> SheetPair {
        SheetPair { plus: self.plus.add(&other.plus), minus: self.minus.add(&other.minus) }
    }

    pub fn sub(&self, other: &SheetPair) -> SheetPair {
        SheetPair { plus: self.plus.sub(&other.plus), minus: self.minus.sub(&other.minus) }
    }

    pub fn scale(&self, a: C64) -> SheetPair {
        SheetPair { plus: self.plus.scale(a), minus: self.minus.scale(a) }
    }

    pub fn mul(&self, other: &SheetPair) -> SheetPair {
        SheetPair { plus: self.plus.mul(&other.plus), minus: self.minus.mul(&other.minus) }
    }

    pub fn x_derivative(&self) -> SheetPair {
        SheetPair { plus: self.plus.derivative(), minus: self.minus.derivative() }
    }

    pub fn norm(&self) -> f64 {
        self.plus.l2_norm().hypot(self.minus.l2_norm())
    }

    pub fn trim(&self) -> SheetPair {
        SheetPair { plus: self.plus.trim(1e-16), minus: self.minus.trim(1e-16) }
    }

    pub fn is_zero(&self, eps: f64) -> bool {
        self.norm() < eps
    }
}

/// Classical symbol of integer order with stored depth `components.len()`.
#[derive(Debug, Clone)]
pub struct ClassicalSymbol {
    order: i64,
    /// components[j] is the coefficient of degree order - j.
    components: Vec<SheetPair>,
}

impl ClassicalSymbol {
    pub fn new(order: i64, components: Vec<SheetPair>) -> Self {
        assert!(!components.is_empty(), "a symbol needs at least its leading component");
        Self { order, components }
    }

    pub fn zero(order: i64, depth: usize) -> Self {
        Self { order, components: vec![SheetPair::zero(); depth.max(1)] }
    }

    /// The constant symbol 1 (order 0).
    pub fn one(depth: usize) -> Self {
        let mut s = Self::zero(0, depth);
        s.components[0] = SheetPair::constant(1.0, 1.0);
        s
    }

    /// |p| as an order-1 symbol.
    pub fn abs_p(depth: usize) -> Self {
        let mut s = Self::zero(1, depth);
        s.components[0] = SheetPair::constant(1.0, 1.0);
        s
    }

    /// |p|^{-1}, the exact parametrix of |p|.
    pub fn abs_p_inv(depth: usize) -> Self {
        let mut s = Self::zero(-1, depth);
        s.components[0] = SheetPair::constant(1.0, 1.0);
        s
    }

    pub fn order(&self) -> i64 {
        self.order
    }

    pub fn depth(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, j: usize) -> &SheetPair {
        &self.components[j]
    }

    pub fn components(&self) -> &[SheetPair] {
        &self.components
    }

    pub fn component_mut(&mut self, j: usize) -> &mut SheetPair {
        &mut self.components[j]
    }

    pub fn set_component(&mut self, j: usize, c: SheetPair) {
        self.components[j] = c;
    }

    /// Component of the given homogeneous degree, if stored.
    pub fn component_at_degree(&self, degree: i64) -> Option<&SheetPair> {
        let j = self.order - degree;
        if j < 0 || j as usize >= self.components.len() {
            None
        } else {
            Some(&self.components[j as usize])
        }
    }

    pub fn with_depth(&self, depth: usize) -> ClassicalSymbol {
        let mut components = self.components.clone();
        components.resize(depth.max(1), SheetPair::zero());
        ClassicalSymbol { order: self.order, components }
    }

    /// Reinterpret with a higher order by shifting components down (padding
    /// the new leading slots with zeros). Used to align containers.
    pub fn raised_to_order(&self, order: i64) -> ClassicalSymbol {
        assert!(order >= self.order);
        let shift = (order - self.order) as usize;
        let mut components = vec![SheetPair::zero(); shift];
        components.extend(self.components.iter().cloned());
        ClassicalSymbol { order, components }
    }

    pub fn is_elliptic(&self) -> bool {
        let lead = &self.components[0];
        lead.plus.min_abs(256) > 1e-12 && lead.minus.min_abs(256) > 1e-12
    }

    pub fn has_positive_leading(&self) -> bool {
        let lead = &self.components[0];
        lead.plus.is_real()
            && lead.minus.is_real()
            && lead.plus.min_re(256) > 1e-12
            && lead.minus.min_re(256) > 1e-12
    }

    /// d/dp: degree-d data maps to degree d-1 data with factor d on the plus
    /// sheet and -d on the minus sheet; the order drops by one.
    pub fn p_derivative(&self) -> ClassicalSymbol {
        let mut components = Vec::with_capacity(self.components.len());
        for (j, c) in self.components.iter().enumerate() {
            let d = (self.order - j as i64) as f64;
            components.push(SheetPair {
                plus: c.plus.scale(C64::new(d, 0.0)),
                minus: c.minus.scale(C64::new(-d, 0.0)),
            });
        }
        ClassicalSymbol { order: self.order - 1, components }
    }

    pub fn x_derivative(&self) -> ClassicalSymbol {
        ClassicalSymbol {
            order: self.order,
            components: self.components.iter().map(SheetPair::x_derivative).collect(),
        }
    }

    pub fn scale(&self, a: C64) -> ClassicalSymbol {
        ClassicalSymbol {
            order: self.order,
            components: self.components.iter().map(|c| c.scale(a)).collect(),
        }
    }

    /// Sum with container order max(order_a, order_b).
    pub fn add(&self, other: &ClassicalSymbol) -> ClassicalSymbol {
        let order = self.order.max(other.order);
        let depth_a = self.order - self.depth() as i64; // first missing degree
        let depth_b = other.order - other.depth() as i64;
        let lowest = depth_a.max(depth_b);
        let depth = (order - lowest) as usize;
        let mut out = ClassicalSymbol::zero(order, depth);
        for j in 0..depth {
            let degree = order - j as i64;
            let mut acc = SheetPair::zero();
            if let Some(c) = self.component_at_degree(degree) {
                acc = acc.add(c);
            }
            if let Some(c) = other.component_at_degree(degree) {
                acc = acc.add(c);
            }
            out.components[j] = acc;
        }
        out
    }

    pub fn sub(&self, other: &ClassicalSymbol) -> ClassicalSymbol {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Pointwise (leading-symbol style) product: components multiply
    /// sheetwise with degrees adding. This is the k = 0 part of compose1d.
    pub fn pointwise_mul(&self, other: &ClassicalSymbol, depth: usize) -> ClassicalSymbol {
        let order = self.order + other.order;
        let mut out = ClassicalSymbol::zero(order, depth);
        for (ja, ca) in self.components.iter().enumerate() {
            if ca.is_zero(1e-300) {
                continue;
            }
            for (jb, cb) in other.components.iter().enumerate() {
                let j = ja + jb;
                if j >= depth {
                    break;
                }
                out.components[j] = out.components[j].add(&ca.mul(cb));
            }
        }
        for c in out.components.iter_mut() {
            *c = c.trim();
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c.norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn trim(&self) -> ClassicalSymbol {
        ClassicalSymbol {
            order: self.order,
            components: self.components.iter().map(SheetPair::trim).collect(),
        }
    }

    /// Evaluate the truncated symbol at covariable p with |p| >= 1
    /// (homogeneous extension, no cutoff).
    pub fn eval(&self, x: f64, p: f64) -> C64 {
        assert!(p.abs() >= 1.0);
        let mut acc = C64::new(0.0, 0.0);
        for (j, c) in self.components.iter().enumerate() {
            let d = (self.order - j as i64) as i32;
            let sheet = if p > 0.0 { &c.plus } else { &c.minus };
            acc += sheet.eval(x) * p.abs().powi(d);
        }
        acc
    }
}

/// Asymptotic Kohn-Nirenberg composition truncated to K components.
pub fn compose1d(a: &ClassicalSymbol, b: &ClassicalSymbol, k_depth: usize) -> Result<ClassicalSymbol> {
    if a.depth() < k_depth || b.depth() < k_depth {
        return Err(Error::InsufficientDepth {
            have: a.depth().min(b.depth()),
            need: k_depth,
        });
    }
    let order = a.order() + b.order();
    let mut out = ClassicalSymbol::zero(order, k_depth);
    // (-i)^k / k! * d_p^k a * d_x^k b, term degree (m_a - j_a - k) + (m_b - j_b)
    let mut dpa = a.clone(); // d_p^k a as k grows
    let mut coeff = C64::new(1.0, 0.0);
    for k in 0..k_depth {
        if k > 0 {
            dpa = dpa.p_derivative();
            coeff *= C64::new(0.0, -1.0) / C64::new(k as f64, 0.0);
        }
        let dxb = iterated_x_derivative(b, k);
        for ja in 0..k_depth {
            let ca = dpa.component(ja);
            if ca.is_zero(1e-300) {
                continue;
            }
            for jb in 0..k_depth {
                let j = ja + jb + k;
                if j >= k_depth {
                    break;
                }
                let cb = dxb.component(jb);
                if cb.is_zero(1e-300) {
                    continue;
                }
                let term = ca.mul(cb).scale(coeff);
                out.components[j] = out.components[j].add(&term);
            }
        }
    }
    Ok(out.trim())
}

fn iterated_x_derivative(s: &ClassicalSymbol, k: usize) -> ClassicalSymbol {
    let mut out = s.clone();
    for _ in 0..k {
        out = out.x_derivative();
    }
    out
}

/// Trig-polynomial reciprocal of a nowhere-vanishing function, projected to
/// the smallest degree whose spectral tail is below `tol`.
fn recip_poly(p: &TrigPoly, tol: f64) -> Result<TrigPoly> {
    if p.min_abs(512) <= 1e-12 {
        return Err(Error::NotElliptic);
    }
    let mut degree = (2 * p.degree()).max(8);
    loop {
        let m = 4 * degree;
        let samples: Vec<C64> = (0..m)
            .map(|i| {
                let x = crate::harmonics::TAU * i as f64 / m as f64;
                C64::new(1.0, 0.0) / p.eval(x)
            })
            .collect();
        let (q, tail) = TrigPoly::fit(&samples, degree);
        if tail <= tol {
            return Ok(q.trim(1e-16));
        }
        if degree >= 512 {
            return Err(Error::SpectralTail { tail, tol });
        }
        degree *= 2;
    }
}

fn recip_sheets(c: &SheetPair, tol: f64) -> Result<SheetPair> {
    Ok(SheetPair { plus: recip_poly(&c.plus, tol)?, minus: recip_poly(&c.minus, tol)? })
}

fn ln_poly(p: &TrigPoly, tol: f64) -> Result<TrigPoly> {
    if !p.is_real() || p.min_re(512) <= 1e-12 {
        return Err(Error::NonPositiveLeading);
    }
    let mut degree = (2 * p.degree()).max(8);
    loop {
        let m = 4 * degree;
        let samples: Vec<C64> = (0..m)
            .map(|i| {
                let x = crate::harmonics::TAU * i as f64 / m as f64;
                C64::new(p.eval_re(x).ln(), 0.0)
            })
            .collect();
        let (q, tail) = TrigPoly::fit(&samples, degree);
        if tail <= tol {
            return Ok(q.trim(1e-16));
        }
        if degree >= 512 {
            return Err(Error::SpectralTail { tail, tol });
        }
        degree *= 2;
    }
}

fn exp_poly(p: &TrigPoly, tol: f64) -> Result<TrigPoly> {
    let mut degree = (2 * p.degree()).max(8);
    loop {
        let m = 4 * degree;
        let samples: Vec<C64> = (0..m)
            .map(|i| {
                let x = crate::harmonics::TAU * i as f64 / m as f64;
                p.eval(x).exp()
            })
            .collect();
        let (q, tail) = TrigPoly::fit(&samples, degree);
        if tail <= tol {
            return Ok(q.trim(1e-16));
        }
        if degree >= 512 {
            return Err(Error::SpectralTail { tail, tol });
        }
        degree *= 2;
    }
}

/// Symbol-level parametrix: r of order -m with all stored defect components
/// of compose1d(a, r, K) - 1 eliminated by construction.
pub fn parametrix1d(a: &ClassicalSymbol, k_depth: usize) -> Result<ClassicalSymbol> {
    if !a.is_elliptic() {
        return Err(Error::NotElliptic);
    }
    let a = a.with_depth(k_depth);
    let r0 = recip_sheets(a.component(0), 1e-26)?;
    let mut r = ClassicalSymbol::zero(-a.order(), k_depth);
    r.components[0] = r0.clone();
    for j in 1..k_depth {
        // Defect component j of a o r using the r parts below j, then kill it:
        // e_j = a_0 * r_j + t_j  =>  r_j = -r_0 * t_j.
        let partial = compose1d(&a, &r, k_depth)?;
        let t_j = partial.component(j).clone();
        r.components[j] = r0.mul(&t_j).scale(C64::new(-1.0, 0.0)).trim();
    }
    Ok(r.trim())
}

/// Symbol of the adjoint operator Op(a)^*: sum_k ((-i)^k/k!) d_p^k d_x^k conj(a).
pub fn adjoint_symbol(a: &ClassicalSymbol, k_depth: usize) -> ClassicalSymbol {
    let abar = ClassicalSymbol {
        order: a.order(),
        components: a
            .components()
            .iter()
            .map(|c| SheetPair { plus: c.plus.conj(), minus: c.minus.conj() })
            .collect(),
    };
    let mut out = ClassicalSymbol::zero(a.order(), k_depth);
    let mut term = abar.with_depth(k_depth);
    let mut coeff = C64::new(1.0, 0.0);
    for k in 0..k_depth {
        if k > 0 {
            term = term.p_derivative().x_derivative();
            coeff *= C64::new(0.0, -1.0) / C64::new(k as f64, 0.0);
        }
        for j in 0..k_depth {
            if j + k >= k_depth {
                break;
            }
            let c = term.component(j).scale(coeff);
            out.components[j + k] = out.components[j + k].add(&c);
        }
    }
    out.trim()
}

/// Log-polyhomogeneous symbol ln Q = l0 * ln|p| + classical tail.
#[derive(Debug, Clone)]
pub struct LogSymbol {
    pub ln_coeff: f64,
    pub tail: ClassicalSymbol,
}

/// d_p^k ln|p| as a classical symbol: (-1)^{k-1} (k-1)! p^{-k}.
fn ln_p_derivative(k: usize, depth: usize) -> ClassicalSymbol {
    assert!(k >= 1);
    let mut fact = 1.0f64;
    for i in 1..k {
        fact *= i as f64;
    }
    let plus = if k % 2 == 1 { fact } else { -fact };
    let minus = -fact;
    let mut s = ClassicalSymbol::zero(-(k as i64), depth);
    s.components[0] = SheetPair::constant(plus, minus);
    s
}

/// [ln|p|, S] under composition: only the d_p^k ln|p| * d_x^k S terms survive.
fn ln_bracket(s: &ClassicalSymbol, k_depth: usize) -> ClassicalSymbol {
    let mut out = ClassicalSymbol::zero(s.order() - 1, k_depth);
    let mut coeff = C64::new(1.0, 0.0);
    let mut dxs = s.clone();
    for k in 1..=k_depth {
        coeff *= C64::new(0.0, -1.0) / C64::new(k as f64, 0.0);
        dxs = dxs.x_derivative();
        let lnk = ln_p_derivative(k, 1);
        // pointwise product of degree -k sheet constants with d_x^k S
        let term = lnk.pointwise_mul(&dxs.with_depth(k_depth), k_depth + 1);
        // term has order -k + s.order; fold into the container
        for j in 0..k_depth {
            let degree = out.order() - j as i64;
            if let Some(c) = term.component_at_degree(degree) {
                out.components[j] = out.components[j].add(&c.scale(coeff));
            }
        }
    }
    out.trim()
}

/// Commutator of two classical symbols under composition.
fn commutator(a: &ClassicalSymbol, b: &ClassicalSymbol, k_depth: usize) -> Result<ClassicalSymbol> {
    let ab = compose1d(&a.with_depth(k_depth), &b.with_depth(k_depth), k_depth)?;
    let ba = compose1d(&b.with_depth(k_depth), &a.with_depth(k_depth), k_depth)?;
    Ok(ab.sub(&ba))
}

/// Element of the Lie algebra spanned by ln|p| and classical symbols of
/// order <= 0; all BCH brackets stay in this space.
#[derive(Debug, Clone)]
struct LogElem {
    ln: f64,
    tail: ClassicalSymbol,
}

impl LogElem {
    fn bracket(&self, other: &LogElem, k_depth: usize) -> Result<LogElem> {
        let mut tail = commutator(&self.tail, &other.tail, k_depth)?;
        if self.ln != 0.0 {
            tail = tail.add(&ln_bracket(&other.tail, k_depth).scale(C64::new(self.ln, 0.0)));
        }
        if other.ln != 0.0 {
            tail = tail.sub(&ln_bracket(&self.tail, k_depth).scale(C64::new(other.ln, 0.0)));
        }
        Ok(LogElem { ln: 0.0, tail: align_order_zero(&tail, k_depth) })
    }

    fn add(&self, other: &LogElem, k_depth: usize) -> LogElem {
        LogElem {
            ln: self.ln + other.ln,
            tail: align_order_zero(&self.tail.add(&other.tail), k_depth),
        }
    }

    fn scale(&self, a: f64) -> LogElem {
        LogElem { ln: self.ln * a, tail: self.tail.scale(C64::new(a, 0.0)) }
    }
}

/// Re-house a symbol of order <= 0 in an order-0 container of given depth.
fn align_order_zero(s: &ClassicalSymbol, k_depth: usize) -> ClassicalSymbol {
    assert!(s.order() <= 0, "expected a symbol of non-positive order");
    s.raised_to_order(0).with_depth(k_depth)
}

/// exp under composition for a symbol with p-independent degree-0 part m and
/// nilpotent (order <= -1) part xi: interaction (Dyson) expansion with the
/// conjugated series polynomial in the flow parameter.
fn exp_compose(m: &SheetPair, xi: &ClassicalSymbol, k_depth: usize) -> Result<ClassicalSymbol> {
    let tol = 1e-26;
    let em = SheetPair { plus: exp_poly(&m.plus, tol)?, minus: exp_poly(&m.minus, tol)? };
    let mut exp_m = ClassicalSymbol::zero(0, k_depth);
    exp_m.components[0] = em;

    let m_sym = {
        let mut s = ClassicalSymbol::zero(0, k_depth);
        s.components[0] = m.clone();
        s
    };

    // conj_s(xi) = sum_j (-s)^j / j! ad_m^j(xi): polynomial in s.
    let mut conj: Vec<ClassicalSymbol> = Vec::new();
    let mut cur = align_order_zero(&xi.with_depth(k_depth), k_depth);
    let mut fact = 1.0f64;
    for j in 0..k_depth {
        if j > 0 {
            cur = align_order_zero(&commutator(&m_sym, &cur, k_depth)?, k_depth);
            fact *= -(j as f64);
        }
        let coeff = 1.0 / fact;
        conj.push(cur.scale(C64::new(coeff, 0.0)));
        if cur.norm() < 1e-300 {
            break;
        }
    }

    // Picard iteration for T(s), stored as polynomial in s with symbol
    // coefficients; T' = conj_s(xi) o T, T(0) = 1.
    let one = ClassicalSymbol::one(k_depth);
    let mut t: Vec<ClassicalSymbol> = vec![one.clone()];
    for _ in 0..k_depth {
        // integrand = conj(s) o T(s)
        let mut integrand: Vec<ClassicalSymbol> = Vec::new();
        for (i, ci) in conj.iter().enumerate() {
            for (j, tj) in t.iter().enumerate() {
                let prod = compose1d(ci, tj, k_depth)?;
                let prod = align_order_zero(&prod, k_depth);
                let idx = i + j;
                while integrand.len() <= idx {
                    integrand.push(ClassicalSymbol::zero(0, k_depth));
                }
                integrand[idx] = integrand[idx].add(&prod).with_depth(k_depth);
            }
        }
        // T_new(s) = 1 + int_0^s integrand
        let mut t_new: Vec<ClassicalSymbol> = vec![one.clone()];
        for (i, gi) in integrand.iter().enumerate() {
            t_new.push(gi.scale(C64::new(1.0 / (i as f64 + 1.0), 0.0)));
        }
        t = t_new;
    }
    // evaluate T(1) and left-multiply by exp(m)
    let mut t1 = ClassicalSymbol::zero(0, k_depth);
    for ti in &t {
        t1 = t1.add(ti).with_depth(k_depth);
    }
    let out = compose1d(&exp_m, &t1, k_depth)?;
    Ok(align_order_zero(&out, k_depth))
}

/// log under composition of an order-0 symbol with strictly positive leading
/// part, by defect-correction against exp_compose.
fn log_compose(w: &ClassicalSymbol, k_depth: usize) -> Result<ClassicalSymbol> {
    assert_eq!(w.order(), 0);
    if !w.has_positive_leading() {
        return Err(Error::NonPositiveLeading);
    }
    let tol = 1e-26;
    let m = SheetPair {
        plus: ln_poly(&w.component(0).plus, tol)?,
        minus: ln_poly(&w.component(0).minus, tol)?,
    };
    let em_inv = recip_sheets(
        &SheetPair { plus: exp_poly(&m.plus, tol)?, minus: exp_poly(&m.minus, tol)? },
        tol,
    )?;
    let mut xi = ClassicalSymbol::zero(0, k_depth);
    for _ in 0..k_depth + 1 {
        let e = exp_compose(&m, &xi, k_depth)?;
        let d = w.with_depth(k_depth).sub(&e);
        // linearized correction: delta_xi ~ exp(-m) * defect, pointwise
        let mut corr = ClassicalSymbol::zero(0, k_depth);
        for j in 0..k_depth {
            if let Some(c) = d.component_at_degree(-(j as i64)) {
                corr.components[j] = em_inv.mul(c).trim();
            }
        }
        if corr.norm() < 1e-13 * (1.0 + xi.norm()) {
            break;
        }
        xi = xi.add(&corr).with_depth(k_depth);
        xi.components[0] = SheetPair::zero(); // degree-0 part lives in m
    }
    let mut out = xi;
    out.components[0] = m;
    Ok(out.trim())
}

/// Baker-Campbell-Hausdorff series z = BCH(x, y) by the standard recursion,
/// truncated at commutator weight `k_depth` (each bracket drops the symbol
/// order by at least one, so deeper terms vanish in the stored components).
fn bch(x: &LogElem, y: &LogElem, k_depth: usize) -> Result<LogElem> {
    // Bernoulli numbers B_2, B_4, B_6, B_8.
    const BERN: [(usize, f64); 4] = [(2, 1.0 / 6.0), (4, -1.0 / 30.0), (6, 1.0 / 42.0), (8, -1.0 / 30.0)];
    let weight_cap = k_depth.min(8);
    let xpy = x.add(y, k_depth);
    let xmy = x.add(&y.scale(-1.0), k_depth);
    let mut z: Vec<LogElem> = vec![xpy.clone()]; // z[0] = z_1
    for n in 1..weight_cap {
        // (n+1) z_{n+1} = 1/2 [x-y, z_n] + sum_p B_2p/(2p)! sum_{k1+..+k2p=n} [z_k1,[...,[z_k2p, x+y]..]]
        let mut acc = xmy.bracket(&z[n - 1], k_depth)?.scale(0.5);
        for &(two_p, b_over_fact) in BERN.iter() {
            if two_p > n {
                break;
            }
            // compositions k_1 + ... + k_{2p} = n with k_i >= 1
            let mut stack: Vec<Vec<usize>> = vec![vec![]];
            for _ in 0..two_p {
                let mut next = Vec::new();
                for partial in &stack {
                    let used: usize = partial.iter().sum();
                    let remaining_slots = two_p - partial.len() - 1;
                    for k in 1..=(n - used).saturating_sub(remaining_slots) {
                        let mut p2 = partial.clone();
                        p2.push(k);
                        next.push(p2);
                    }
                }
                stack = next;
            }
            for comp in stack.iter().filter(|c| c.iter().sum::<usize>() == n) {
                // [z_{k1}, [z_{k2}, ... [z_{k2p}, x+y] ...]]
                let mut inner = xpy.clone();
                for &k in comp.iter().rev() {
                    inner = z[k - 1].bracket(&inner, k_depth)?;
                }
                acc = acc.add(&inner.scale(b_over_fact), k_depth);
            }
        }
        z.push(acc.scale(1.0 / (n as f64 + 1.0)));
    }
    let mut total = LogElem { ln: 0.0, tail: ClassicalSymbol::zero(0, k_depth) };
    for zi in &z {
        total = total.add(zi, k_depth);
    }
    Ok(total)
}

/// Log-symbol of an elliptic positive order-1 symbol: ln Q = ln|p| + tail,
/// with the classical tail recovered by formal exponential inversion
/// (composition-log of q o |p|^{-1}, then BCH against the ln|p| generator).
pub fn log_symbol(q: &ClassicalSymbol, k_depth: usize) -> Result<LogSymbol> {
    if q.order() != 1 {
        return Err(Error::NonPositiveLeading);
    }
    if !q.has_positive_leading() {
        return Err(Error::NonPositiveLeading);
    }
    let w = compose1d(&q.with_depth(k_depth), &ClassicalSymbol::abs_p_inv(k_depth), k_depth)?;
    let x = LogElem { ln: 0.0, tail: log_compose(&align_order_zero(&w, k_depth), k_depth)? };
    let y = LogElem { ln: 1.0, tail: ClassicalSymbol::zero(0, k_depth) };
    let z = bch(&x, &y, k_depth)?;
    debug_assert!((z.ln - 1.0).abs() < 1e-14);
    Ok(LogSymbol { ln_coeff: z.ln, tail: z.tail.trim() })
}

/// Symbol of the commutator [ln Q, A], classical of order m_a - 1:
/// sum_{k>=1} ((-i)^k/k!) (d_p^k l * d_x^k a - d_p^k a * d_x^k l).
pub fn log_commutator(
    q: &ClassicalSymbol,
    a: &ClassicalSymbol,
    k_depth: usize,
) -> Result<ClassicalSymbol> {
    let l = log_symbol(q, k_depth)?;
    log_commutator_with(&l, a, k_depth)
}

/// Same as [`log_commutator`] with a precomputed log-symbol.
pub fn log_commutator_with(
    l: &LogSymbol,
    a: &ClassicalSymbol,
    k_depth: usize,
) -> Result<ClassicalSymbol> {
    let mut out = ClassicalSymbol::zero(a.order() - 1, k_depth);
    let a_full = a.with_depth(k_depth);
    let tail = l.tail.with_depth(k_depth);

    let mut coeff = C64::new(1.0, 0.0);
    let mut dxa = a_full.clone();
    let mut dpa = a_full.clone();
    let mut dxl = tail.clone();
    let mut dpl = tail.clone();
    for k in 1..=k_depth {
        coeff *= C64::new(0.0, -1.0) / C64::new(k as f64, 0.0);
        dxa = dxa.x_derivative();
        dpa = dpa.p_derivative();
        dxl = dxl.x_derivative();
        dpl = dpl.p_derivative();
        // d_p^k l = l.ln_coeff * d_p^k ln|p| + d_p^k tail
        let mut dpl_full = dpl.clone();
        if l.ln_coeff != 0.0 {
            let lnk = ln_p_derivative(k, 1).scale(C64::new(l.ln_coeff, 0.0));
            dpl_full = dpl_full.add(&lnk.with_depth(1));
        }
        let term1 = dpl_full.pointwise_mul(&dxa, k_depth + 2);
        let term2 = dpa.pointwise_mul(&dxl, k_depth + 2);
        let term = term1.sub(&term2).scale(coeff);
        for j in 0..k_depth {
            let degree = out.order() - j as i64;
            if let Some(c) = term.component_at_degree(degree) {
                out.components[j] = out.components[j].add(c);
            }
        }
    }
    Ok(out.trim())
}

// ---------------------------------------------------------------------------
// serialization per the external interface
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ComponentJson {
    degree: i64,
    sheet_plus: Vec<[f64; 2]>,
    sheet_minus: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct SymbolJson {
    order: i64,
    components: Vec<ComponentJson>,
}

fn poly_to_pairs(p: &TrigPoly) -> Vec<[f64; 2]> {
    let d = p.degree() as i64;
    (-d..=d).map(|k| [p.coeff(k).re, p.coeff(k).im]).collect()
}

fn pairs_to_poly(pairs: &[[f64; 2]]) -> TrigPoly {
    TrigPoly::from_coeffs(pairs.iter().map(|[re, im]| C64::new(*re, *im)).collect())
}

impl ClassicalSymbol {
    pub fn to_json(&self) -> serde_json::Value {
        let components = self
            .components
            .iter()
            .enumerate()
            .map(|(j, c)| ComponentJson {
                degree: self.order - j as i64,
                sheet_plus: poly_to_pairs(&c.plus),
                sheet_minus: poly_to_pairs(&c.minus),
            })
            .collect();
        serde_json::to_value(SymbolJson { order: self.order, components }).unwrap()
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let parsed: SymbolJson = serde_json::from_value(v.clone())?;
        let mut depth = 0usize;
        for c in &parsed.components {
            let j = parsed.order - c.degree;
            if j < 0 {
                return Err(Error::Schema {
                    path: "/components/degree".into(),
                    msg: format!("degree {} above order {}", c.degree, parsed.order),
                });
            }
            depth = depth.max(j as usize + 1);
        }
        let mut s = ClassicalSymbol::zero(parsed.order, depth.max(1));
        for c in &parsed.components {
            let j = (parsed.order - c.degree) as usize;
            s.components[j] = SheetPair {
                plus: pairs_to_poly(&c.sheet_plus),
                minus: pairs_to_poly(&c.sheet_minus),
            };
        }
        Ok(s)
    }
}
