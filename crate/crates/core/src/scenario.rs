//! Batch scenario runner: JSON scenario schema, built-in scenarios and
//! machine-readable reports.
//!
//! Reports are deterministic: a fixed scenario and seed produce identical
//! bytes (timings are printed to stderr by the CLI, not embedded).

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{
    fredholm_index, milnor_idempotent, quantize, toeplitz, winding_number, Cutoff,
    FourierOperator, OpOrder,
};
use crate::equivariant::{
    equivariant_residue_local, equivariant_residue_spectral, RadialSymbol,
};
use crate::error::{Error, Result};
use crate::foliated::{
    convolve, convolve_covered, rank_one_projection, rho_morita, suspension_symbol, theta_trace,
    trace_extended, trace_op, trace_units, w_trace, CoveredElement, CoveringCutoff,
    CrossedElement, FoliatedModel, GradedBundle, TimeGrid, Transversal,
};
use crate::harmonics::{flow_time_one, CircleDiffeo, TrigPoly, TAU};
use crate::pairing::{fiber_residues, index_pairing, index_rhs, PairingConfig};
use crate::symbol::{ClassicalSymbol, SheetPair};
use crate::symbol2d::Grid2D;
use crate::zeta::{continue_zeta, wodzicki_local, ContinuationConfig, LaurentData};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Wodzicki,
    EquivariantResidue,
    ToeplitzIndex,
    TraceFormulas,
    IndexTheorem,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub truncation: i64,
    pub depth: i64,
    pub tolerance: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    pub kind: ScenarioKind,
    pub config: ScenarioConfig,
    #[serde(default)]
    pub payload: serde_json::Value,
}

/// One checked quantity of a scenario run.
#[derive(Debug, Clone, Serialize)]
pub struct ReportEntry {
    pub label: String,
    pub value: f64,
    pub reference: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ReportEntry {
    fn check(label: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Self {
        let deviation = (value - reference).abs();
        Self {
            label: label.into(),
            value,
            reference,
            deviation,
            tolerance,
            pass: deviation <= tolerance,
        }
    }
}

/// Conventions the numbers in a report depend on.
#[derive(Debug, Clone, Serialize)]
pub struct ConventionLedger {
    pub quantization: &'static str,
    pub index_sign: &'static str,
    pub cosphere_orientation: &'static str,
    pub suspension_operator: &'static str,
}

impl Default for ConventionLedger {
    fn default() -> Self {
        Self {
            quantization: "left (Kohn-Nirenberg): A_{k,l} = a-hat_{k-l}(l), cutoff chi = smoothstep on [1/2, 1]",
            index_sign: "index(T_u) = -winding(u); idempotent pairing tr(e - e0) = -index",
            cosphere_orientation: "both cosphere sheets counted positively, density dx/2pi per sheet",
            suspension_operator: "D_x = -i d/dx = diag(k_x); Q = [[D_x, D+*],[D+, -D_x]] self-adjoint",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub kind: ScenarioKind,
    pub seed: u64,
    pub conventions: ConventionLedger,
    pub entries: Vec<ReportEntry>,
    pub pass: bool,
}

impl Report {
    fn assemble(scenario: &Scenario, entries: Vec<ReportEntry>) -> Report {
        let pass = entries.iter().all(|e| e.pass);
        Report {
            scenario: scenario.name.clone(),
            kind: scenario.kind,
            seed: scenario.config.seed,
            conventions: ConventionLedger::default(),
            entries,
            pass,
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    /// Per-entry CSV table (label, value, reference, deviation, tolerance, pass).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,value,reference,deviation,tolerance,pass\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.3e},{:.1e},{}\n",
                e.label, e.value, e.reference, e.deviation, e.tolerance, e.pass
            ));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// schema validation
// ---------------------------------------------------------------------------

/// Validate a scenario JSON value, reporting the offending path on failure.
pub fn validate(v: &serde_json::Value) -> Result<Scenario> {
    let obj = v.as_object().ok_or_else(|| Error::Schema {
        path: "/".into(),
        msg: "scenario must be a JSON object".into(),
    })?;
    for key in ["version", "name", "kind", "config"] {
        if !obj.contains_key(key) {
            return Err(Error::Schema { path: format!("/{key}"), msg: "missing field".into() });
        }
    }
    let scenario: Scenario = serde_json::from_value(v.clone()).map_err(|e| Error::Schema {
        path: "/".into(),
        msg: e.to_string(),
    })?;
    if scenario.version != SCHEMA_VERSION {
        return Err(Error::Schema {
            path: "/version".into(),
            msg: format!("unsupported version {} (expected {SCHEMA_VERSION})", scenario.version),
        });
    }
    if scenario.config.truncation <= 0 {
        return Err(Error::Schema {
            path: "/config/truncation".into(),
            msg: "truncation must be positive".into(),
        });
    }
    if scenario.config.depth <= 0 {
        return Err(Error::Schema { path: "/config/depth".into(), msg: "depth must be positive".into() });
    }
    if scenario.config.tolerance <= 0.0 {
        return Err(Error::Schema {
            path: "/config/tolerance".into(),
            msg: "tolerance must be positive".into(),
        });
    }
    Ok(scenario)
}

// ---------------------------------------------------------------------------
// built-in scenarios
// ---------------------------------------------------------------------------

pub fn list_builtins() -> Vec<&'static str> {
    vec![
        "wodzicki-basic",
        "equivariant-sin-flow",
        "toeplitz-winding",
        "trace-formulas",
        "kronecker-index",
        "parabolic-fixed-point",
    ]
}

pub fn builtin(name: &str) -> Result<Scenario> {
    let (kind, truncation, depth, tolerance) = match name {
        "wodzicki-basic" => (ScenarioKind::Wodzicki, 256, 6, 1e-3),
        "equivariant-sin-flow" => (ScenarioKind::EquivariantResidue, 128, 6, 1e-2),
        "toeplitz-winding" => (ScenarioKind::ToeplitzIndex, 128, 6, 1e-6),
        "trace-formulas" => (ScenarioKind::TraceFormulas, 24, 6, 1e-6),
        "kronecker-index" => (ScenarioKind::IndexTheorem, 32, 6, 1e-2),
        "parabolic-fixed-point" => (ScenarioKind::IndexTheorem, 32, 6, 1e-6),
        _ => {
            return Err(Error::Schema {
                path: "/name".into(),
                msg: format!("unknown builtin '{name}'"),
            })
        }
    };
    Ok(Scenario {
        version: SCHEMA_VERSION,
        name: name.into(),
        kind,
        config: ScenarioConfig { truncation, depth, tolerance, seed: 17 },
        payload: serde_json::json!({}),
    })
}

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

pub fn canonical_lambda(n: usize) -> Vec<f64> {
    (-(n as i64)..=(n as i64)).map(|k| (1.0 + (k * k) as f64).sqrt()).collect()
}

pub fn quartic_lambda(n: usize) -> Vec<f64> {
    (-(n as i64)..=(n as i64))
        .map(|k| (1.0 + (k * k * k * k) as f64).powf(0.25))
        .collect()
}

fn random_real_poly(rng: &mut ChaCha8Rng, degree: usize) -> TrigPoly {
    let mut p = TrigPoly::constant_re(rng.gen_range(-1.0..1.0));
    for k in 1..=degree {
        p = p.add(&TrigPoly::cos_sin(k, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    }
    p
}

/// Seeded random classical symbol of the given order with real trig-poly
/// coefficients of degree <= max_deg.
pub fn random_symbol(rng: &mut ChaCha8Rng, order: i64, depth: usize, max_deg: usize) -> ClassicalSymbol {
    let mut s = ClassicalSymbol::zero(order, depth);
    for j in 0..depth {
        s.set_component(
            j,
            SheetPair {
                plus: random_real_poly(rng, max_deg),
                minus: random_real_poly(rng, max_deg),
            },
        );
    }
    s
}

fn kronecker_model(alpha: f64) -> FoliatedModel {
    FoliatedModel {
        components: vec![Transversal::Periodic {
            period: 1.0,
            return_map: CircleDiffeo::rotation(alpha * TAU),
            bundle: GradedBundle::trivial_line(),
            leaf_rate: alpha * TAU,
        }],
        n_max: 4,
    }
}

fn element_grid() -> TimeGrid {
    TimeGrid::new(4.0, 1.0 / 32.0)
}

// ---------------------------------------------------------------------------
// kind runners
// ---------------------------------------------------------------------------

fn run_wodzicki(sc: &Scenario) -> Result<Vec<ReportEntry>> {
    let n = sc.config.truncation as usize;
    let depth = sc.config.depth as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.config.seed);
    let mut entries = Vec::new();
    let lam = canonical_lambda(n);
    let cfg = ContinuationConfig::default();

    // canonical residue at z = 1: Res Tr Q^{-z} = 2, both estimators, N = 4096
    let big = 4096;
    let a = FourierOperator::identity(big);
    let big_cfg = ContinuationConfig { leading_exponent: 0.0, ..Default::default() };
    let out = continue_zeta(&a, None, &canonical_lambda(big), C64::new(1.0, 0.0), &big_cfg)?;
    entries.push(ReportEntry::check("canonical residue z=1 (tail-fit)", out.residue.re, 2.0, 1e-4));
    entries.push(ReportEntry::check(
        "canonical residue z=1 (heat-fit)",
        out.residue_heat.re,
        2.0,
        1e-4,
    ));
    entries.push(ReportEntry::check(
        "canonical pole simplicity |a_-2|",
        out.a_minus2,
        0.0,
        1e-6 * (1.0 + out.residue.norm()),
    ));

    // ten seeded random order -1 symbols: local vs spectral residue
    let tol = (5.0 / n as f64).max(1e-3);
    for i in 0..10 {
        let a = random_symbol(&mut rng, -1, depth.min(4), 4);
        let op = quantize(&a, n, Cutoff::default())?;
        let out = continue_zeta(&op, None, &lam, C64::new(0.0, 0.0), &cfg)?;
        let local = wodzicki_local(&a);
        entries.push(ReportEntry::check(
            format!("wodzicki cross-check #{i}"),
            (out.residue - local).norm(),
            0.0,
            tol,
        ));
        entries.push(ReportEntry::check(
            format!("pole simplicity #{i}"),
            out.a_minus2,
            0.0,
            1e-6 * (1.0 + out.residue.norm()),
        ));
    }

    // robustness: estimator swap, cutoff bridge, second Q
    let a = random_symbol(&mut rng, -1, depth.min(4), 3);
    let op = quantize(&a, n, Cutoff::default())?;
    let r1 = continue_zeta(&op, None, &lam, C64::new(0.0, 0.0), &cfg)?;
    entries.push(ReportEntry::check(
        "estimator swap (tail vs heat)",
        (r1.residue - r1.residue_heat).norm(),
        0.0,
        1e-3,
    ));
    let op_wide = quantize(&a, n, Cutoff::new(0.5, 2.5))?;
    let r2 = continue_zeta(&op_wide, None, &lam, C64::new(0.0, 0.0), &cfg)?;
    entries.push(ReportEntry::check(
        "cutoff-bridge independence",
        (r1.residue - r2.residue).norm(),
        0.0,
        1e-3,
    ));
    let r3 = continue_zeta(&op, None, &quartic_lambda(n), C64::new(0.0, 0.0), &cfg)?;
    entries.push(ReportEntry::check(
        "Q-independence of the residue",
        (r1.residue - r3.residue).norm(),
        0.0,
        1e-3,
    ));
    Ok(entries)
}

fn run_equivariant(sc: &Scenario) -> Result<Vec<ReportEntry>> {
    let n = sc.config.truncation as usize;
    let mut entries = Vec::new();
    let sigma = RadialSymbol::inverse_radius();
    let grid = Grid2D::new(8, 16, 32);
    for eps in [0.3, 0.7] {
        let psi = flow_time_one(&TrigPoly::cos_sin(1, 0.0, eps), 64)?;
        let cfg = ContinuationConfig { reconcile_tol: 5e-2, ..Default::default() };
        let spectral = equivariant_residue_spectral(&sigma, &psi, n, Cutoff::default(), &cfg)?;
        let local = equivariant_residue_local(&sigma.to_grid(grid), &psi, sc.config.depth as usize)?;
        let tol = sc.config.tolerance * (1.0 + spectral.residue.norm());
        entries.push(ReportEntry::check(
            format!("equivariant residue eps={eps} (local vs spectral)"),
            (local - spectral.residue).norm(),
            0.0,
            tol,
        ));
        entries.push(ReportEntry::check(
            format!("equivariant estimator spread eps={eps}"),
            spectral.spread,
            0.0,
            tol,
        ));
        let closed = 2.0 / (eps / 2.0f64).tanh();
        entries.push(ReportEntry::check(
            format!("equivariant closed form eps={eps}"),
            local.re,
            closed,
            1e-6,
        ));
    }
    Ok(entries)
}

fn run_toeplitz(sc: &Scenario) -> Result<Vec<ReportEntry>> {
    let n = sc.config.truncation as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.config.seed);
    let mut entries = Vec::new();
    let p = FourierOperator::diagonal(n, OpOrder::Classical(0), |k| {
        C64::new(if k >= 0 { 1.0 } else { 0.0 }, 0.0)
    });
    // index-winding duality for the Bott powers
    for w in -3i64..=3 {
        if w == 0 {
            continue;
        }
        let u_sym = TrigPoly::harmonic(w);
        let mut a = ClassicalSymbol::zero(0, 2);
        a.set_component(0, SheetPair::both(u_sym.clone()));
        let u = quantize(&a, n, Cutoff::default())?;
        let t = toeplitz(&p, &u)?;
        let idx = fredholm_index(&t, 1e-6)?;
        let wind = winding_number(&u_sym)?;
        entries.push(ReportEntry::check(
            format!("index + winding (w = {w})"),
            (idx + wind) as f64,
            0.0,
            0.0,
        ));
    }
    // the non-monomial symbol (2 + cos x) e^{3ix}
    let u_sym = TrigPoly::cos_sin(1, 1.0, 0.0)
        .add(&TrigPoly::constant_re(2.0))
        .mul(&TrigPoly::harmonic(3));
    let mut a = ClassicalSymbol::zero(0, 2);
    a.set_component(0, SheetPair::both(u_sym.clone()));
    let u = quantize(&a, n, Cutoff::default())?;
    let t = toeplitz(&p, &u)?;
    let idx = fredholm_index(&t, 1e-6)?;
    entries.push(ReportEntry::check(
        "index + winding ((2+cos x) e^{3ix})",
        (idx + winding_number(&u_sym)?) as f64,
        0.0,
        0.0,
    ));

    // Milnor idempotent at N = 64: exact idempotency for random lifts
    let dim = 129;
    for trial in 0..3 {
        // entries scaled so the lifts have O(1) operator norm; otherwise the
        // fifth-degree products in e inflate roundoff past the 1e-12 bound
        let scale = 1.0 / (dim as f64).sqrt();
        let mk = |rng: &mut ChaCha8Rng| {
            crate::linalg::CMatrix::from_fn(dim, dim, |_, _| {
                C64::new(rng.gen_range(-0.5..0.5) * scale, rng.gen_range(-0.5..0.5) * scale)
            })
        };
        let pm = mk(&mut rng);
        let qm = mk(&mut rng);
        let mi = milnor_idempotent(&pm, &qm)?;
        let defect = mi.e.matmul(&mi.e).sub(&mi.e).max_abs();
        entries.push(ReportEntry::check(
            format!("milnor idempotency (random #{trial})"),
            defect,
            0.0,
            1e-12,
        ));
    }
    // shift-isometry pairing = +-1 exactly
    let s = crate::linalg::CMatrix::from_fn(66, 65, |i, j| {
        C64::new(if i == j + 1 { 1.0 } else { 0.0 }, 0.0)
    });
    let mi = milnor_idempotent(&s, &s.adjoint())?;
    entries.push(ReportEntry::check("milnor shift pairing", mi.pairing, 1.0, 1e-10));
    let mi2 = milnor_idempotent(&s.adjoint(), &s)?;
    entries.push(ReportEntry::check("milnor shift pairing (swapped)", mi2.pairing, -1.0, 1e-10));
    Ok(entries)
}

fn bump01(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        (-1.0 / (u * (1.0 - u))).exp()
    }
}

fn random_element(
    model: &FoliatedModel,
    rng: &mut ChaCha8Rng,
    lo: f64,
    hi: f64,
) -> CrossedElement {
    let b_poly = random_real_poly(rng, 3);
    let freq = rng.gen_range(1.0..3.0);
    let phase = rng.gen_range(0.0..TAU);
    CrossedElement::from_fn(model, element_grid(), 1, move |_, t| {
        let u = (t - lo) / (hi - lo);
        vec![b_poly.scale(C64::new(bump01(u) * (freq * t + phase).cos(), 0.0))]
    })
}

fn run_trace_formulas(sc: &Scenario) -> Result<Vec<ReportEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(sc.config.seed);
    let mut entries = Vec::new();
    let model = kronecker_model(0.618);

    // trace_op vs kernel diagonal on 10 random elements
    for i in 0..10 {
        let f = random_element(&model, &mut rng, -2.3, 2.3);
        let tr = trace_op(&model, &f)?;
        let mq = 256usize;
        let mut diag = C64::new(0.0, 0.0);
        for j in 0..mq {
            let b = j as f64 / mq as f64;
            diag += crate::foliated::kernel_value(&model, &f, 0, b, b)?[(0, 0)] / mq as f64;
        }
        entries.push(ReportEntry::check(
            format!("trace vs kernel diagonal #{i}"),
            (tr - diag).norm(),
            0.0,
            1e-6 * (1.0 + tr.norm()),
        ));
    }

    // trace property for the four functionals, 20 random pairs each
    let mut worst_op = 0.0f64;
    let mut worst_units = 0.0f64;
    for _ in 0..20 {
        let f = random_element(&model, &mut rng, -1.5, 1.5);
        let g = random_element(&model, &mut rng, -1.4, 1.6);
        let fg = convolve(&model, &f, &g)?;
        let gf = convolve(&model, &g, &f)?;
        let t1 = trace_op(&model, &fg)?;
        let t2 = trace_op(&model, &gf)?;
        worst_op = worst_op.max((t1 - t2).norm() / (1.0 + t1.norm()));
        let u1 = trace_units(&model, &fg);
        let u2 = trace_units(&model, &gf);
        worst_units = worst_units.max((u1 - u2).norm() / (1.0 + u1.norm()));
    }
    entries.push(ReportEntry::check("trace property: operator trace", worst_op, 0.0, 1e-8));
    entries.push(ReportEntry::check("trace property: units trace", worst_units, 0.0, 1e-8));

    // theta trace property on an orbit model
    let orbit = crate::foliated::OrbitData {
        component: 0,
        period: 1.0,
        leaf_point: 0.0,
        h_prime: 3.0,
        bundle: GradedBundle::trivial_line(),
    };
    let mut worst_theta = 0.0f64;
    for _ in 0..20 {
        let f = random_element(&model, &mut rng, 0.2, 0.7);
        let g = random_element(&model, &mut rng, 0.1, 0.6);
        let (t1, _) = theta_trace(&orbit, &convolve(&model, &f, &g)?, 3)?;
        let (t2, _) = theta_trace(&orbit, &convolve(&model, &g, &f)?, 3)?;
        worst_theta = worst_theta.max((t1 - t2).norm() / (1.0 + t1.norm()));
    }
    entries.push(ReportEntry::check("trace property: theta trace", worst_theta, 0.0, 1e-8));

    // extended trace and W trace on positive-time pairs over a fixed point
    let fp_model = FoliatedModel {
        components: vec![Transversal::FixedPoint {
            kappa: 2.0f64.ln(),
            bundle: GradedBundle::trivial_line(),
            leaf_rate: 1.0,
        }],
        n_max: 4,
    };
    let mut worst_ext = 0.0f64;
    let mut worst_w = 0.0f64;
    for _ in 0..20 {
        let lo1 = rng.gen_range(0.4..0.8);
        let hi1 = rng.gen_range(1.2..1.8);
        let lo2 = rng.gen_range(0.3..0.7);
        let hi2 = rng.gen_range(1.1..1.9);
        let f = positive_bump_element(&fp_model, lo1, hi1);
        let g = positive_bump_element(&fp_model, lo2, hi2);
        let fg = convolve(&fp_model, &f, &g)?;
        let gf = convolve(&fp_model, &g, &f)?;
        let t1 = trace_extended(&fp_model, &fg)?;
        let t2 = trace_extended(&fp_model, &gf)?;
        worst_ext = worst_ext.max((t1 - t2).norm() / (1.0 + t1.norm()));
        let w1 = w_trace(&fp_model, 0, &fg)?;
        let w2 = w_trace(&fp_model, 0, &gf)?;
        worst_w = worst_w.max((w1 - w2).norm() / (1.0 + w1.norm()));
    }
    entries.push(ReportEntry::check("trace property: extended trace", worst_ext, 0.0, 1e-8));
    entries.push(ReportEntry::check("trace property: W trace", worst_w, 0.0, 1e-8));

    // representation multiplicativity
    let f = random_element(&model, &mut rng, -1.2, 1.2);
    let g = random_element(&model, &mut rng, -1.1, 1.3);
    let cap = 24usize;
    let kf = crate::foliated::rep_kernel(&model, &f, 0, cap)?;
    let kg = crate::foliated::rep_kernel(&model, &g, 0, cap)?;
    let kfg = crate::foliated::rep_kernel(&model, &convolve(&model, &f, &g)?, 0, cap)?;
    let keep = cap / 2;
    let prod = kf.matmul(&kg);
    let mut worst = 0.0f64;
    for k in -(keep as i64)..=(keep as i64) {
        for l in -(keep as i64)..=(keep as i64) {
            let i = (k + cap as i64) as usize;
            let j = (l + cap as i64) as usize;
            worst = worst.max((prod[(i, j)] - kfg[(i, j)]).norm());
        }
    }
    entries.push(ReportEntry::check("representation multiplicativity", worst, 0.0, 1e-6));
    Ok(entries)
}

fn positive_bump_element(model: &FoliatedModel, lo: f64, hi: f64) -> CrossedElement {
    CrossedElement::from_fn(model, element_grid(), 1, move |_, t| {
        vec![TrigPoly::constant_re(bump01((t - lo) / (hi - lo)))]
    })
}

fn run_index_theorem(sc: &Scenario) -> Result<Vec<ReportEntry>> {
    match sc.name.as_str() {
        "parabolic-fixed-point" => run_parabolic(sc),
        _ => run_kronecker(sc),
    }
}

fn run_kronecker(sc: &Scenario) -> Result<Vec<ReportEntry>> {
    let mut entries = Vec::new();
    let alpha = 0.618;
    let model = kronecker_model(alpha);
    let grid = element_grid();
    let phi = TrigPoly::constant_re(1.0).add(&TrigPoly::cos_sin(1, 0.3, 0.0));
    let e = rank_one_projection(&model, 0, grid, &phi, 16)?;
    let idem = convolve(&model, &e, &e)?.sub(&e).sup_norm();
    entries.push(ReportEntry::check("rank-one class idempotency", idem, 0.0, 1e-6));
    let (_u, _ui, u_defect) = suspension_symbol(&model, &e, 1e-5)?;
    entries.push(ReportEntry::check("suspension u u^{-1} = 1", u_defect, 0.0, 1e-5));

    let cfg = PairingConfig::default();
    let rep = index_pairing(&model, &e, &cfg)?;
    entries.push(ReportEntry::check(
        "index theorem: |full - units|",
        (rep.full - rep.units).norm(),
        0.0,
        sc.config.tolerance,
    ));
    entries.push(ReportEntry::check(
        "integrality of the full pairing",
        rep.integer_distance,
        0.0,
        sc.config.tolerance,
    ));
    let rhs = index_rhs(&model, &e, &cfg, model.n_max)?;
    entries.push(ReportEntry::check(
        "sum of Theta terms (no periodic orbits)",
        rhs.theta_total.norm(),
        0.0,
        1e-10,
    ));
    entries.push(ReportEntry::check(
        "full-route window sensitivity",
        rep.full_sensitivity,
        0.0,
        sc.config.tolerance,
    ));

    // Morita cutoff independence: the units pairing evaluated over a
    // degree-2 covering with two different admissible cutoffs
    let fr = fiber_residues(&cfg)?;
    let mut unit_values = Vec::new();
    for shift in [0.0, 1.3] {
        let cutoff = CoveringCutoff::shifted(2, 48, shift)?;
        let re = rho_morita(&model, 0, &e, &cutoff, 64)?;
        let units_cover = covered_units_trace(&re) * fr.evaluate(0.0);
        unit_values.push(units_cover);
    }
    entries.push(ReportEntry::check(
        "Morita cutoff independence of the pairing",
        (unit_values[0] - unit_values[1]).norm(),
        0.0,
        1e-3,
    ));
    // and both cutoffs reproduce the base-space pairing
    entries.push(ReportEntry::check(
        "Morita reduction reproduces the base pairing",
        (unit_values[0] - rep.units).norm(),
        0.0,
        1e-3,
    ));
    // homomorphism property of the reduction
    let cutoff = CoveringCutoff::standard(2, 48)?;
    let re = rho_morita(&model, 0, &e, &cutoff, 64)?;
    let lhs = convolve_covered(&re, &re)?;
    let rhs_cov = rho_morita(&model, 0, &convolve(&model, &e, &e)?, &cutoff, 64)?;
    entries.push(ReportEntry::check(
        "Morita reduction is a homomorphism",
        lhs.sub(&rhs_cov).norm(),
        0.0,
        1e-6 * (1.0 + rhs_cov.norm()),
    ));
    Ok(entries)
}

/// Units trace of a covered element: int over the cover of the deck-0,
/// t = 0 slice (the covering circle has circumference degree * period).
fn covered_units_trace(f: &CoveredElement) -> C64 {
    let g = f.grid;
    // t = 0 slice is on the grid
    let i0 = g.n_half;
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..f.msize {
        acc += f.data[0][i0][r * f.msize + r].mean();
    }
    acc * (f.degree as f64 * f.period)
}

fn run_parabolic(sc: &Scenario) -> Result<Vec<ReportEntry>> {
    let mut entries = Vec::new();
    let model = FoliatedModel {
        components: vec![Transversal::FixedPoint {
            kappa: 2.0f64.ln(),
            bundle: GradedBundle::trivial_line(),
            leaf_rate: 1.0,
        }],
        n_max: 4,
    };
    let grid = element_grid();
    // nilpotent-trick class: e = e0 + g (x) E12 with the adjoined unit in
    // the corner; the difference e - e0 is strictly upper triangular
    let de = CrossedElement::from_fn(&model, grid, 2, |_, t| {
        vec![
            TrigPoly::zero(),
            TrigPoly::constant_re(bump01((t - 1.0) / 0.8)),
            TrigPoly::zero(),
            TrigPoly::zero(),
        ]
    });
    if !de.positive_time {
        return Err(Error::NotPositiveTime);
    }
    let cfg = PairingConfig::default();
    let rep = index_pairing(&model, &de, &cfg)?;
    entries.push(ReportEntry::check(
        "parabolic full pairing (nilpotent class)",
        rep.full.norm(),
        0.0,
        sc.config.tolerance,
    ));
    let rhs = index_rhs(&model, &de, &cfg, model.n_max)?;
    entries.push(ReportEntry::check(
        "parabolic Theta + W sum (nilpotent class)",
        rhs.total.norm(),
        0.0,
        sc.config.tolerance,
    ));
    entries.push(ReportEntry::check(
        "positive-time class has no chi term",
        rhs.chi.norm(),
        0.0,
        0.0,
    ));
    // the extended trace itself is exercised by a scalar positive-time bump
    let f = positive_bump_element(&model, 1.0, 2.0);
    let got = trace_extended(&model, &f)?;
    let fine = 8192usize;
    let mut want = 0.0;
    for i in 0..fine {
        let t = 0.5 + (i as f64 + 0.5) * (2.0 / fine as f64);
        want += bump01(t - 1.0) / (1.0 - 2.0f64.powf(t)).abs() * (2.0 / fine as f64);
    }
    entries.push(ReportEntry::check("extended trace quadrature", got.re, want, 1e-6));
    Ok(entries)
}

// ---------------------------------------------------------------------------
// runner
// ---------------------------------------------------------------------------

/// Execute a validated scenario; the report's `pass` reflects every check.
pub fn run_scenario(sc: &Scenario) -> Result<Report> {
    let entries = match sc.kind {
        ScenarioKind::Wodzicki => run_wodzicki(sc)?,
        ScenarioKind::EquivariantResidue => run_equivariant(sc)?,
        ScenarioKind::ToeplitzIndex => run_toeplitz(sc)?,
        ScenarioKind::TraceFormulas => run_trace_formulas(sc)?,
        ScenarioKind::IndexTheorem => run_index_theorem(sc)?,
    };
    Ok(Report::assemble(sc, entries))
}

/// Convenience: laurent data of the canonical residue checks, used by the
/// acceptance suite to collect pole-simplicity statistics.
pub fn canonical_continuation(n: usize, z0: f64) -> Result<LaurentData> {
    let a = FourierOperator::identity(n);
    let cfg = ContinuationConfig { leading_exponent: 0.0, ..Default::default() };
    continue_zeta(&a, None, &canonical_lambda(n), C64::new(z0, 0.0), &cfg)
}


impl Scenario {
    /// Apply CLI-style overrides.
    pub fn with_overrides(mut self, truncation: Option<i64>, depth: Option<i64>) -> Self {
        if let Some(t) = truncation {
            self.config.truncation = t;
        }
        if let Some(d) = depth {
            self.config.depth = d;
        }
        self
    }
}
