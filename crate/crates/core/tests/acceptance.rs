//! Acceptance suite: every criterion runs at its stated tolerance and
//! prints one pass/fail line (visible with --nocapture).

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use localindex::engine::{
    fredholm_index, milnor_idempotent, quantize, toeplitz, winding_number, Cutoff,
    FourierOperator, OpOrder,
};
use localindex::equivariant::{
    equivariant_residue_local, equivariant_residue_spectral, RadialSymbol,
};
use localindex::foliated::{convolve, rank_one_projection, TimeGrid};
use localindex::harmonics::{flow_time_one, TrigPoly};
use localindex::linalg::CMatrix;
use localindex::pairing::{index_pairing, index_rhs, PairingConfig};
use localindex::scenario::{self, canonical_lambda, quartic_lambda, random_symbol};
use localindex::symbol::{ClassicalSymbol, SheetPair};
use localindex::symbol2d::Grid2D;
use localindex::zeta::{continue_zeta, wodzicki_local, ContinuationConfig, LaurentData};

fn report(criterion: &str, pass: bool, detail: String) {
    println!(
        "acceptance {}: {} — {}",
        criterion,
        if pass { "PASS" } else { "FAIL" },
        detail
    );
    assert!(pass, "{criterion}: {detail}");
}

#[test]
fn criterion_1_wodzicki_cross_check() {
    let n = 256usize;
    let tol = (5.0 / n as f64).max(1e-3);
    let lam = canonical_lambda(n);
    let cfg = ContinuationConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut worst_time = 0.0f64;
    for _ in 0..10 {
        let started = std::time::Instant::now();
        let a = random_symbol(&mut rng, -1, 4, 4);
        let op = quantize(&a, n, Cutoff::default()).unwrap();
        let out = continue_zeta(&op, None, &lam, C64::new(0.0, 0.0), &cfg).unwrap();
        let local = wodzicki_local(&a);
        worst = worst.max((out.residue - local).norm());
        worst_time = worst_time.max(started.elapsed().as_secs_f64());
    }
    report(
        "criterion 1 (wodzicki cross-check)",
        worst <= tol && worst_time < 60.0,
        format!("worst |local - spectral| = {worst:.3e} (tol {tol:.3e}), worst runtime {worst_time:.2}s"),
    );
}

#[test]
fn criterion_2_canonical_residue() {
    let out = scenario::canonical_continuation(4096, 1.0).unwrap();
    let e1 = (out.residue.re - 2.0).abs();
    let e2 = (out.residue_heat.re - 2.0).abs();
    report(
        "criterion 2 (canonical residue 2 at z=1, N=4096)",
        e1 <= 1e-4 && e2 <= 1e-4,
        format!("tail-fit err {e1:.3e}, heat-fit err {e2:.3e} (tol 1e-4)"),
    );
}

#[test]
fn criterion_3_simple_poles_across_suite() {
    // collect >= 30 continuations across the full zeta suite
    let mut laurents: Vec<LaurentData> = Vec::new();
    let cfg = ContinuationConfig::default();
    let n = 256usize;
    let lam = canonical_lambda(n);
    let lam4 = quartic_lambda(n);
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for i in 0..14 {
        let order = if i % 2 == 0 { -1 } else { -2 };
        let a = random_symbol(&mut rng, order, 4, 3);
        let op = quantize(&a, n, Cutoff::default()).unwrap();
        laurents.push(continue_zeta(&op, None, &lam, C64::new(0.0, 0.0), &cfg).unwrap());
        laurents.push(continue_zeta(&op, None, &lam4, C64::new(0.0, 0.0), &cfg).unwrap());
    }
    laurents.push(scenario::canonical_continuation(1024, 1.0).unwrap());
    laurents.push(scenario::canonical_continuation(2048, 1.0).unwrap());
    // rotated traces with oscillatory diagonals
    for (i, alpha) in [0.7, 1.3].into_iter().enumerate() {
        let u = localindex::engine::diffeo_operator(
            &localindex::harmonics::CircleDiffeo::rotation(alpha),
            n,
        )
        .unwrap();
        let a = random_symbol(&mut rng, -1, 4, 2 + i);
        let op = quantize(&a, n, Cutoff::default()).unwrap();
        let w = FourierOperator {
            n,
            matrix: op.matrix.matmul(&u.matrix),
            order: OpOrder::Classical(-1),
            factor: localindex::engine::Factor::SingleCircle,
        };
        let osc_cfg = ContinuationConfig {
            osc_frequency: Some(alpha),
            reconcile_tol: 0.1,
            ..Default::default()
        };
        laurents.push(continue_zeta(&w, None, &lam, C64::new(0.0, 0.0), &osc_cfg).unwrap());
    }
    let count = laurents.len();
    let mut worst_ratio = 0.0f64;
    for l in &laurents {
        worst_ratio = worst_ratio.max(l.a_minus2 / (1.0 + l.residue.norm()));
    }
    report(
        "criterion 3 (simple poles across the suite)",
        count >= 30 && worst_ratio <= 1e-6,
        format!("{count} continuations, worst |a_-2|/(1+|a_-1|) = {worst_ratio:.3e} (bound 1e-6)"),
    );
}

#[test]
fn criterion_4_equivariant_residue() {
    let started = std::time::Instant::now();
    let sigma = RadialSymbol::inverse_radius();
    let grid = Grid2D::new(8, 16, 32);
    let mut detail = String::new();
    let mut pass = true;
    for eps in [0.3, 0.7] {
        let psi = flow_time_one(&TrigPoly::cos_sin(1, 0.0, eps), 64).unwrap();
        let cfg = ContinuationConfig { reconcile_tol: 5e-2, ..Default::default() };
        let spectral =
            equivariant_residue_spectral(&sigma, &psi, 128, Cutoff::default(), &cfg).unwrap();
        let local = equivariant_residue_local(&sigma.to_grid(grid), &psi, 4).unwrap();
        let tol = 1e-2 * (1.0 + spectral.residue.norm());
        let dev = (local - spectral.residue).norm();
        pass &= dev <= tol;
        detail.push_str(&format!("eps={eps}: |local-spectral|={dev:.3e} (tol {tol:.3e}); "));
    }
    let elapsed = started.elapsed().as_secs_f64();
    pass &= elapsed < 600.0;
    detail.push_str(&format!("runtime {elapsed:.1}s (< 600s)"));
    report("criterion 4 (equivariant residue, torus 128)", pass, detail);
}

#[test]
fn criterion_5_index_winding_duality() {
    let n = 128usize;
    let p = FourierOperator::diagonal(n, OpOrder::Classical(0), |k| {
        C64::new(if k >= 0 { 1.0 } else { 0.0 }, 0.0)
    });
    let mut pass = true;
    let mut detail = String::new();
    let mut check = |u_sym: &TrigPoly, label: &str| {
        let mut a = ClassicalSymbol::zero(0, 2);
        a.set_component(0, SheetPair::both(u_sym.clone()));
        let u = quantize(&a, n, Cutoff::default()).unwrap();
        let t = toeplitz(&p, &u).unwrap();
        let idx = fredholm_index(&t, 1e-6).unwrap();
        let wind = winding_number(u_sym).unwrap();
        let ok = idx == -wind;
        pass &= ok;
        detail.push_str(&format!("{label}: index {idx} = -winding {wind}: {ok}; "));
    };
    for w in [-3i64, -2, -1, 1, 2, 3] {
        check(&TrigPoly::harmonic(w), &format!("e^{{i{w}x}}"));
    }
    let u = TrigPoly::cos_sin(1, 1.0, 0.0)
        .add(&TrigPoly::constant_re(2.0))
        .mul(&TrigPoly::harmonic(3));
    check(&u, "(2+cos x)e^{3ix}");
    report("criterion 5 (index-winding duality at N=128)", pass, detail);
}

#[test]
fn criterion_6_milnor_idempotent() {
    let dim = 129; // N = 64 mode box
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let scale = 1.0 / (dim as f64).sqrt();
    let mut worst = 0.0f64;
    for _ in 0..5 {
        use rand::Rng;
        let mut mk = || {
            CMatrix::from_fn(dim, dim, |_, _| {
                C64::new(rng.gen_range(-0.5..0.5) * scale, rng.gen_range(-0.5..0.5) * scale)
            })
        };
        let p = mk();
        let q = mk();
        let mi = milnor_idempotent(&p, &q).unwrap();
        worst = worst.max(mi.e.matmul(&mi.e).sub(&mi.e).max_abs());
    }
    // shift examples: pairing equals the kernel-count index exactly
    let s = CMatrix::from_fn(66, 65, |i, j| C64::new(if i == j + 1 { 1.0 } else { 0.0 }, 0.0));
    let mi_plus = milnor_idempotent(&s, &s.adjoint()).unwrap();
    let mi_minus = milnor_idempotent(&s.adjoint(), &s).unwrap();
    let shifts_exact = (mi_plus.pairing - 1.0).abs() < 1e-12 && (mi_minus.pairing + 1.0).abs() < 1e-12;
    report(
        "criterion 6 (milnor idempotent)",
        worst <= 1e-12 && shifts_exact,
        format!(
            "worst ||e^2-e|| = {worst:.3e} (tol 1e-12); shift pairings {:+.2e}/{:+.2e} vs +1/-1",
            mi_plus.pairing, mi_minus.pairing
        ),
    );
}

#[test]
fn criterion_7_trace_formulas() {
    let sc = scenario::builtin("trace-formulas").unwrap();
    let rep = scenario::run_scenario(&sc).unwrap();
    let detail: Vec<String> = rep
        .entries
        .iter()
        .map(|e| format!("{}: {:.2e} <= {:.1e}", e.label, e.deviation, e.tolerance))
        .collect();
    report(
        "criterion 7 (trace formulas and trace properties)",
        rep.pass,
        detail.join("; "),
    );
}

#[test]
fn criterion_8_index_theorem_scenarios() {
    // Kronecker scenario with the rank-one projection class
    let model = localindex::foliated::FoliatedModel {
        components: vec![localindex::foliated::Transversal::Periodic {
            period: 1.0,
            return_map: localindex::harmonics::CircleDiffeo::rotation(
                0.618 * localindex::harmonics::TAU,
            ),
            bundle: localindex::foliated::GradedBundle::trivial_line(),
            leaf_rate: 0.618 * localindex::harmonics::TAU,
        }],
        n_max: 4,
    };
    let grid = TimeGrid::new(4.0, 1.0 / 32.0);
    let phi = TrigPoly::constant_re(1.0).add(&TrigPoly::cos_sin(1, 0.3, 0.0));
    let e = rank_one_projection(&model, 0, grid, &phi, 16).unwrap();
    let idem = convolve(&model, &e, &e).unwrap().sub(&e).sup_norm();
    assert!(idem < 1e-6);
    let cfg = PairingConfig::default();
    let rep = index_pairing(&model, &e, &cfg).unwrap();
    let rhs = index_rhs(&model, &e, &cfg, 4).unwrap();
    let kron_ok = (rep.full - rep.units).norm() <= 1e-2
        && rhs.theta_total.norm() <= 1e-10
        && rep.integer_distance <= 1e-2;

    // parabolic fixed-point scenario with the nilpotent class
    let sc = scenario::builtin("parabolic-fixed-point").unwrap();
    let par = scenario::run_scenario(&sc).unwrap();
    let para_entries: Vec<&scenario::ReportEntry> = par
        .entries
        .iter()
        .filter(|en| en.label.contains("parabolic"))
        .collect();
    let para_ok = para_entries.iter().all(|en| en.pass);

    report(
        "criterion 8 (index theorem: kronecker + parabolic)",
        kron_ok && para_ok,
        format!(
            "kronecker |full-units| = {:.3e}, sum(theta) = {:.1e}, integer dist {:.3e}; parabolic: {}",
            (rep.full - rep.units).norm(),
            rhs.theta_total.norm(),
            rep.integer_distance,
            para_entries
                .iter()
                .map(|en| format!("{} = {:.2e}", en.label, en.value))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

#[test]
fn criterion_9_convention_robustness() {
    let n = 256usize;
    let lam = canonical_lambda(n);
    let cfg = ContinuationConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let a = random_symbol(&mut rng, -1, 4, 3);
    let op = quantize(&a, n, Cutoff::default()).unwrap();
    let base = continue_zeta(&op, None, &lam, C64::new(0.0, 0.0), &cfg).unwrap();

    // (a) swapping the continuation estimators
    let swap_dev = (base.residue - base.residue_heat).norm();
    // (b) changing the chi cutoff bridge
    let op_wide = quantize(&a, n, Cutoff::new(0.5, 2.5)).unwrap();
    let wide = continue_zeta(&op_wide, None, &lam, C64::new(0.0, 0.0), &cfg).unwrap();
    let cutoff_dev = (base.residue - wide.residue).norm();
    // (c) a second positive elliptic order-one regularizer
    let second = continue_zeta(&op, None, &quartic_lambda(n), C64::new(0.0, 0.0), &cfg).unwrap();
    let q_dev = (base.residue - second.residue).norm();
    // (d) changing the Morita cutoff: from the kronecker scenario report
    let sc = scenario::builtin("kronecker-index").unwrap();
    let rep = scenario::run_scenario(&sc).unwrap();
    let morita = rep
        .entries
        .iter()
        .find(|e| e.label.contains("Morita cutoff independence"))
        .expect("kronecker report carries the Morita check");

    let pass = swap_dev <= 1e-3 && cutoff_dev <= 1e-3 && q_dev <= 1e-3 && morita.pass;
    report(
        "criterion 9 (convention robustness)",
        pass,
        format!(
            "estimator swap {swap_dev:.3e}, cutoff bridge {cutoff_dev:.3e}, second Q {q_dev:.3e}, morita cutoff {:.3e} (all <= 1e-3)",
            morita.value
        ),
    );
}
