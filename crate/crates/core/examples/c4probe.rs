use localindex::equivariant::*;
use localindex::harmonics::{flow_time_one, TrigPoly};
use localindex::engine::Cutoff;
use localindex::zeta::ContinuationConfig;
use localindex::symbol2d::Grid2D;

fn main() {
    for eps in [0.3f64, 0.7] {
        let t0 = std::time::Instant::now();
        let psi = flow_time_one(&TrigPoly::cos_sin(1, 0.0, eps), 64).unwrap();
        let sigma = RadialSymbol::inverse_radius();
        let cfg = ContinuationConfig::default();
        let spec = equivariant_residue_spectral(&sigma, &psi, 128, Cutoff::default(), &cfg).unwrap();
        let local = equivariant_residue_local(&sigma.to_grid(Grid2D::new(8, 16, 32)), &psi, 4).unwrap();
        let closed = 2.0 / (eps / 2.0f64).tanh();
        println!("eps = {eps}: spectral {:+.6} (heat {:+.6}, spread {:.2e}), local {:+.6}, closed {closed:+.6}", spec.residue.re, spec.residue_heat.re, spec.spread, local.re);
        println!("  |local - spectral| = {:.4e}  tol = {:.4e}   elapsed {:?}", (local - spec.residue).norm(), 1e-2*(1.0+spec.residue.norm()), t0.elapsed());
    }
}
