//! Property tests for the algebraic invariants that hold on arbitrary
//! inputs (not just the seeded suites).

use num_complex::Complex64 as C64;
use proptest::prelude::*;

use localindex::engine::{milnor_idempotent, winding_number};
use localindex::harmonics::{TrigPoly, TAU};
use localindex::linalg::CMatrix;

fn trig_poly(degree: usize) -> impl Strategy<Value = TrigPoly> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2 * degree + 1).prop_map(|cs| {
        TrigPoly::from_coeffs(cs.into_iter().map(|(re, im)| C64::new(re, im)).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_evaluates_pointwise(a in trig_poly(4), b in trig_poly(3), x in 0.0..TAU) {
        let prod = a.mul(&b);
        let want = a.eval(x) * b.eval(x);
        prop_assert!((prod.eval(x) - want).norm() < 1e-11);
    }

    #[test]
    fn derivative_has_zero_mean(a in trig_poly(5)) {
        prop_assert!(a.derivative().mean().norm() < 1e-12);
    }

    #[test]
    fn rotation_commutes_with_derivative(a in trig_poly(4), alpha in 0.0..TAU) {
        let lhs = a.rotate(alpha).derivative();
        let rhs = a.derivative().rotate(alpha);
        prop_assert!(lhs.sub(&rhs).l2_norm() < 1e-12);
    }

    #[test]
    fn winding_is_additive(w1 in -3i64..=3, w2 in -3i64..=3, c in 0.05f64..0.45) {
        // u_i = (1 + c cos x) e^{i w_i x} never vanishes
        let base = TrigPoly::constant_re(1.0).add(&TrigPoly::cos_sin(1, c, 0.0));
        let u1 = base.mul(&TrigPoly::harmonic(w1));
        let u2 = base.mul(&TrigPoly::harmonic(w2));
        let lhs = winding_number(&u1.mul(&u2)).unwrap();
        prop_assert_eq!(lhs, w1 + w2);
    }

    #[test]
    fn milnor_idempotent_is_exact(seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 6;
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            CMatrix::from_fn(n, n, |_, _| {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
        };
        let p = mk(&mut rng);
        let q = mk(&mut rng);
        let mi = milnor_idempotent(&p, &q).unwrap();
        let defect = mi.e.matmul(&mi.e).sub(&mi.e).max_abs();
        prop_assert!(defect < 1e-11, "idempotency defect {}", defect);
    }
}
