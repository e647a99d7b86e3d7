//! Cross-module oracles: symbol calculus checked against the operator
//! engine on truncated Fourier bases (asymptotic slope checks and
//! eigenbasis logarithms).

use num_complex::Complex64 as C64;

use localindex::engine::{hermitian_eig, quantize, Cutoff, Factor, FourierOperator, OpOrder};
use localindex::harmonics::TrigPoly;
use localindex::linalg::CMatrix;
use localindex::symbol::{
    adjoint_symbol, compose1d, log_commutator, log_symbol, parametrix1d, ClassicalSymbol,
    SheetPair,
};

fn interior_norm(m: &CMatrix, n: usize, keep: usize) -> f64 {
    let off = n - keep;
    let dim = 2 * keep + 1;
    CMatrix::from_fn(dim, dim, |i, j| m[(i + off, j + off)]).op_norm()
}

/// Norm of the defect on the annulus lo <= |k| <= hi: asymptotic-expansion
/// comparisons are meaningful away from both the small-covariable region
/// (where an expansion in |p| cannot converge) and the truncation boundary.
fn annulus_norm(m: &CMatrix, n: usize, lo: usize, hi: usize) -> f64 {
    let mut masked = m.clone();
    for i in 0..m.rows() {
        let k = (i as i64 - n as i64).unsigned_abs() as usize;
        let inside = (lo..=hi).contains(&k);
        if !inside {
            for j in 0..m.cols() {
                masked[(i, j)] = C64::new(0.0, 0.0);
                masked[(j, i)] = C64::new(0.0, 0.0);
            }
        }
    }
    masked.op_norm()
}

#[test]
fn composition_matches_operator_product_asymptotically() {
    // || Op(a o b at depth K) - Op(a) Op(b) || on the mode annulus decays
    // like N^{m-K}; deep symbols composed at a shallower K expose the
    // truncation slope (a full-depth composition is exact on the annulus).
    let k_depth = 4usize;
    let mut a = ClassicalSymbol::zero(1, 6);
    let mut b = ClassicalSymbol::zero(0, 6);
    for j in 0..6 {
        let s = 0.8f64.powi(j as i32);
        a.set_component(j, SheetPair::both(
            TrigPoly::constant_re(if j == 0 { 1.5 } else { 0.3 * s })
                .add(&TrigPoly::cos_sin(1 + j % 2, 0.4 * s, 0.1 * s)),
        ));
        b.set_component(j, SheetPair::both(
            TrigPoly::constant_re(if j == 0 { 1.0 } else { -0.2 * s })
                .add(&TrigPoly::cos_sin(1 + (j + 1) % 2, 0.0, 0.25 * s)),
        ));
    }
    let ab = compose1d(&a, &b, k_depth).unwrap();

    let mut defects = Vec::new();
    for n in [64usize, 128, 256] {
        let op_ab = quantize(&ab, n, Cutoff::default()).unwrap().matrix;
        let opa = quantize(&a, n, Cutoff::default()).unwrap().matrix;
        let opb = quantize(&b, n, Cutoff::default()).unwrap().matrix;
        let defect = annulus_norm(&op_ab.sub(&opa.matmul(&opb)), n, n / 8, n / 2);
        defects.push(defect);
    }
    // two dyadic steps: slope close to K - m = 3
    let slope1 = (defects[0] / defects[1]).log2();
    let slope2 = (defects[1] / defects[2]).log2();
    assert!(
        slope1 > 2.2 && slope2 > 2.2,
        "defects {defects:?}, slopes {slope1:.2}/{slope2:.2}"
    );
    assert!(defects[2] < 1e-4, "annulus defect at N=256: {:.3e}", defects[2]);
}

#[test]
fn abs_p_squared_matches_operator_product_diagonal() {
    let k_depth = 6usize;
    let p = ClassicalSymbol::abs_p(k_depth);
    let sq = compose1d(&p, &p, k_depth).unwrap();
    let n = 256usize;
    let op_sq = quantize(&sq, n, Cutoff::default()).unwrap();
    let prod = quantize(&p, n, Cutoff::default()).unwrap();
    let prod = prod.mul(&prod.clone());
    for k in -(n as i64)..=(n as i64) {
        let want = prod.entry(k, k);
        let got = op_sq.entry(k, k);
        assert!((got - want).norm() < 1e-11, "k = {k}: {got} vs {want}");
    }
}

#[test]
fn parametrix_defect_decays_at_full_depth() {
    let k_depth = 6usize;
    let mut a = ClassicalSymbol::zero(1, k_depth);
    a.set_component(0, SheetPair::both(TrigPoly::constant_re(2.0).add(&TrigPoly::cos_sin(1, 1.0, 0.0))));
    a.set_component(2, SheetPair::both(TrigPoly::cos_sin(1, 0.0, 0.2)));
    let r = parametrix1d(&a, k_depth).unwrap();
    let mut defects = Vec::new();
    // the parametrix components carry larger trig degrees, and quantize
    // insists on N >= 4 * max degree
    for n in [160usize, 224, 320] {
        let one = CMatrix::identity(2 * n + 1);
        let opa = quantize(&a, n, Cutoff::default()).unwrap().matrix;
        let opr = quantize(&r, n, Cutoff::default()).unwrap().matrix;
        let defect = annulus_norm(&opa.matmul(&opr).sub(&one), n, n / 8, n / 2);
        defects.push(defect);
    }
    // non-dyadic steps: compare against the expected power law directly
    let slope1 = (defects[0] / defects[1]).ln() / (224.0f64 / 160.0).ln();
    let slope2 = (defects[1] / defects[2]).ln() / (320.0f64 / 224.0).ln();
    // defect symbol has order -K: slope close to 6
    assert!(
        slope1 > 4.0 && slope2 > 4.0,
        "defects {defects:?}, slopes {slope1:.2}/{slope2:.2}"
    );
}

#[test]
fn log_symbol_matches_eigenbasis_logarithm() {
    // x-dependent elliptic positive q; the hermitian part of Op(q) has the
    // symbol (q + adjoint-symbol(q))/2, whose log-symbol must reproduce the
    // diagonal of the spectral logarithm on interior modes.
    let k_depth = 6usize;
    let n = 128usize;
    let mut q = ClassicalSymbol::zero(1, k_depth);
    q.set_component(
        0,
        SheetPair::both(TrigPoly::constant_re(2.0).add(&TrigPoly::cos_sin(1, 0.5, 0.0))),
    );
    // order-0 shift keeps the bottom of the spectrum away from zero (the
    // cutoff region would otherwise contribute near-null modes)
    q.set_component(1, SheetPair::constant(1.0, 1.0));
    q.set_component(2, SheetPair::constant(0.5, 0.5));
    let q_sym = {
        let adj = adjoint_symbol(&q, k_depth);
        q.add(&adj).scale(C64::new(0.5, 0.0))
    };
    let op = quantize(&q_sym, n, Cutoff::default()).unwrap();
    let herm = FourierOperator::new(
        n,
        op.matrix.add(&op.matrix.adjoint()).scale(C64::new(0.5, 0.0)),
        OpOrder::Classical(1),
        Factor::SingleCircle,
    );
    let eig = hermitian_eig(&herm).unwrap();
    assert!(eig.positive, "hermitian part must be positive (min {})", eig.min_eigenvalue());
    let lnq_matrix = eig.apply_function(|l| C64::new(l.ln(), 0.0));

    let l = log_symbol(&q_sym, k_depth).unwrap();
    assert!((l.ln_coeff - 1.0).abs() < 1e-13);
    let mut worst = 0.0f64;
    for k in 32..=64i64 {
        // diagonal of Op(ln Q) = mean_x of the symbol at covariable k
        let mut sym_diag = C64::new(0.0, 0.0);
        for (j, c) in l.tail.components().iter().enumerate() {
            let d = -(j as i64);
            sym_diag += c.plus.mean() * (k as f64).powi(d as i32);
        }
        sym_diag += C64::new((k as f64).ln(), 0.0) * l.ln_coeff;
        let got = lnq_matrix[((k + n as i64) as usize, (k + n as i64) as usize)];
        worst = worst.max((got - sym_diag).norm());
    }
    assert!(worst < 2e-4, "eigenbasis log oracle deviation {worst:.3e}");
    // and the deviation must shrink with the mode (asymptotic agreement)
    let at = |k: i64| {
        let mut sym_diag = C64::new(0.0, 0.0);
        for (j, c) in l.tail.components().iter().enumerate() {
            sym_diag += c.plus.mean() * (k as f64).powi(-(j as i32));
        }
        sym_diag += C64::new((k as f64).ln(), 0.0);
        (lnq_matrix[((k + n as i64) as usize, (k + n as i64) as usize)] - sym_diag).norm()
    };
    assert!(at(56) < at(20), "log oracle deviation must decay: {} vs {}", at(56), at(20));
}

#[test]
fn log_commutator_matches_matrix_commutator_diagonal() {
    // a = e^{ix}, q = |p|: [ln Q, Op(a)] against the symbol of the
    // commutator on the first superdiagonal (the only nonzero band).
    let k_depth = 8usize;
    let n = 256usize;
    let q = ClassicalSymbol::abs_p(k_depth);
    let mut a = ClassicalSymbol::zero(0, k_depth);
    a.set_component(0, SheetPair::both(TrigPoly::harmonic(1)));
    let lc = log_commutator(&q, &a, k_depth).unwrap();

    let op_a = quantize(&a, n, Cutoff::default()).unwrap();
    let mut lnq = CMatrix::zeros(2 * n + 1, 2 * n + 1);
    for k in -(n as i64)..=(n as i64) {
        let lam = (k.unsigned_abs().max(1)) as f64; // ln|k| with the k=0 mode regularized
        lnq[((k + n as i64) as usize, (k + n as i64) as usize)] = C64::new(lam.ln(), 0.0);
    }
    let commut = lnq.matmul(&op_a.matrix).sub(&op_a.matrix.matmul(&lnq));
    // interior band entries: [lnQ, A]_{k+1,k} = ln((k+1)/k) for k >= 1;
    // the symbol route evaluates the classical expansion at covariable k
    let mut worst = 0.0f64;
    for k in 32..=(n as i64 / 2) {
        let got = commut[((k + 1 + n as i64) as usize, (k + n as i64) as usize)];
        let mut want = C64::new(0.0, 0.0);
        for (j, c) in lc.components().iter().enumerate() {
            let d = lc.order() - j as i64;
            // e^{ix} coefficient on the plus sheet at covariable k
            want += c.plus.coeff(1) * (k as f64).powi(d as i32);
        }
        worst = worst.max((got - want).norm());
    }
    assert!(worst < 1e-9, "commutator diagonal-band oracle deviation {worst:.3e}");
}

#[test]
fn diffeo_inverse_gives_identity_on_interior_modes() {
    let psi = localindex::harmonics::flow_time_one(&TrigPoly::cos_sin(1, 0.0, 0.35), 64).unwrap();
    let inv = psi.inverse(64, 1e-10).unwrap();
    let n = 128usize;
    let u = localindex::engine::diffeo_operator(&psi, n).unwrap();
    let uinv = localindex::engine::diffeo_operator(&inv, n).unwrap();
    let prod = u.mul(&uinv);
    let defect = interior_norm(&prod.matrix.sub(&CMatrix::identity(2 * n + 1)), n, n / 2);
    assert!(defect < 1e-8, "U U^{{-1}} interior defect {defect:.3e}");
}

#[test]
fn toeplitz_pairing_consistent_with_leading_symbol_formula() {
    // circle pairing: Res Tr(T^{-1}[ln Q, T] Q^{-z}) = +winding(u); the
    // fixed-point-weighted leading-symbol formula divides by |1 - h'|.
    let n = 96usize;
    let lam: Vec<f64> = (-(n as i64)..=(n as i64))
        .map(|k| (1.0 + (k * k) as f64).sqrt())
        .collect();
    let p = FourierOperator::diagonal(n, OpOrder::Classical(0), |k| {
        C64::new(if k >= 0 { 1.0 } else { 0.0 }, 0.0)
    });
    let u_sym = TrigPoly::harmonic(1);
    let mut a = ClassicalSymbol::zero(0, 2);
    a.set_component(0, SheetPair::both(u_sym.clone()));
    let u = quantize(&a, n, Cutoff::default()).unwrap();
    let t = localindex::engine::toeplitz(&p, &u).unwrap();
    let cfg = localindex::zeta::ContinuationConfig { reconcile_tol: 5e-2, ..Default::default() };
    let out = localindex::zeta::residue_pairing_spectral(&t, &lam, &cfg).unwrap();
    assert!((out.residue.re - 1.0).abs() < 5e-2, "pairing {}", out.residue.re);
    // with a single non-degenerate fixed point of multiplier 3 the formula
    // weights the same winding by 1/|1-3| = 1/2
    let v = localindex::zeta::leading_symbol_residue(&u_sym, &[3.0]).unwrap();
    assert!((v - 0.5).abs() < 1e-12);
}
