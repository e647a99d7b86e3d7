//! Product symbols on a 2-torus fiber in polar-homogeneous grid form.
//!
//! A component of degree d stores the values of the homogeneous function at
//! radius 1, i.e. at covariables (p, q) = (cos theta, sin theta), on a grid
//! over (x, y, theta). The operations needed by the fixed-point localization
//! scheme close on this representation:
//!
//! * d/dq on a degree-d component is (d sin theta + cos theta d/dtheta)
//!   acting on the angle grid, producing degree d-1;
//! * d/dy is a spectral derivative on the y grid;
//! * restriction to q = 0 reads off theta = 0 and theta = pi, the two
//!   sheets p = +1 and p = -1.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::harmonics::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub ntheta: usize,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, ntheta: usize) -> Self {
        assert!(ntheta % 2 == 0, "theta grid must be even to hold both sheets");
        Self { nx, ny, ntheta }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.ntheta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        TAU * i as f64 / self.nx as f64
    }

    pub fn y(&self, i: usize) -> f64 {
        TAU * i as f64 / self.ny as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        TAU * i as f64 / self.ntheta as f64
    }

    fn idx(&self, ix: usize, iy: usize, it: usize) -> usize {
        (ix * self.ny + iy) * self.ntheta + it
    }
}

/// One homogeneous component of the 2d symbol.
#[derive(Debug, Clone)]
pub struct Component2D {
    pub degree: i64,
    values: Vec<C64>,
}

/// Spectral derivative of a periodic sample vector (in place buffer math).
fn fft_derivative(samples: &mut [C64]) {
    let m = samples.len();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(samples);
    for (idx, v) in samples.iter_mut().enumerate() {
        let k = if idx <= m / 2 { idx as i64 } else { idx as i64 - m as i64 };
        // zero the unmatched Nyquist mode for even m
        let k = if m % 2 == 0 && idx == m / 2 { 0 } else { k };
        *v *= C64::new(0.0, k as f64);
    }
    planner.plan_fft_inverse(m).process(samples);
    let scale = 1.0 / m as f64;
    for v in samples.iter_mut() {
        *v *= scale;
    }
}

/// Relative energy beyond 2/3 of the available modes, max over sample lines.
fn line_tail(samples: &[C64]) -> f64 {
    let m = samples.len();
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let total: f64 = buf.iter().map(|c| c.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let cut = m / 3;
    let mut tail = 0.0;
    for (idx, c) in buf.iter().enumerate() {
        let k = if idx <= m / 2 { idx } else { m - idx };
        if k > cut {
            tail += c.norm_sqr();
        }
    }
    tail / total
}

impl Component2D {
    pub fn from_fn(grid: Grid2D, degree: i64, mut f: impl FnMut(f64, f64, f64) -> C64) -> Self {
        let mut values = vec![C64::new(0.0, 0.0); grid.len()];
        for ix in 0..grid.nx {
            for iy in 0..grid.ny {
                for it in 0..grid.ntheta {
                    values[grid.idx(ix, iy, it)] = f(grid.x(ix), grid.y(iy), grid.theta(it));
                }
            }
        }
        Self { degree, values }
    }

    pub fn value(&self, grid: Grid2D, ix: usize, iy: usize, it: usize) -> C64 {
        self.values[grid.idx(ix, iy, it)]
    }
}

/// Classical product symbol on the torus fiber, stored per homogeneous degree.
#[derive(Debug, Clone)]
pub struct ProductSymbol2D {
    grid: Grid2D,
    order: i64,
    components: Vec<Component2D>,
}

impl ProductSymbol2D {
    pub fn new(grid: Grid2D, components: Vec<Component2D>) -> Self {
        assert!(!components.is_empty());
        let order = components.iter().map(|c| c.degree).max().unwrap();
        Self { grid, order, components }
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn order(&self) -> i64 {
        self.order
    }

    pub fn components(&self) -> &[Component2D] {
        &self.components
    }

    pub fn component_at_degree(&self, degree: i64) -> Option<&Component2D> {
        self.components.iter().find(|c| c.degree == degree)
    }

    /// Max spectral tail over all grid lines of all components.
    pub fn spectral_tail(&self) -> f64 {
        let g = self.grid;
        let mut worst = 0.0f64;
        for comp in &self.components {
            // theta lines
            for ix in 0..g.nx {
                for iy in 0..g.ny {
                    let line: Vec<C64> =
                        (0..g.ntheta).map(|it| comp.values[g.idx(ix, iy, it)]).collect();
                    worst = worst.max(line_tail(&line));
                }
            }
            // y lines
            for ix in 0..g.nx {
                for it in 0..g.ntheta {
                    let line: Vec<C64> =
                        (0..g.ny).map(|iy| comp.values[g.idx(ix, iy, it)]).collect();
                    worst = worst.max(line_tail(&line));
                }
            }
            // x lines
            for iy in 0..g.ny {
                for it in 0..g.ntheta {
                    let line: Vec<C64> =
                        (0..g.nx).map(|ix| comp.values[g.idx(ix, iy, it)]).collect();
                    worst = worst.max(line_tail(&line));
                }
            }
        }
        worst
    }

    pub fn check_tail(&self, tol: f64) -> Result<()> {
        let tail = self.spectral_tail();
        if tail > tol {
            return Err(Error::SpectralTail { tail, tol });
        }
        Ok(())
    }

    /// d/dq in polar form: degree-d data maps to (d sin + cos d/dtheta) data
    /// of degree d-1.
    pub fn q_derivative(&self) -> ProductSymbol2D {
        let g = self.grid;
        let mut components = Vec::with_capacity(self.components.len());
        for comp in &self.components {
            let mut values = vec![C64::new(0.0, 0.0); g.len()];
            let mut line = vec![C64::new(0.0, 0.0); g.ntheta];
            for ix in 0..g.nx {
                for iy in 0..g.ny {
                    for it in 0..g.ntheta {
                        line[it] = comp.values[g.idx(ix, iy, it)];
                    }
                    let mut dline = line.clone();
                    fft_derivative(&mut dline);
                    for it in 0..g.ntheta {
                        let th = g.theta(it);
                        values[g.idx(ix, iy, it)] = C64::new(comp.degree as f64 * th.sin(), 0.0)
                            * line[it]
                            + C64::new(th.cos(), 0.0) * dline[it];
                    }
                }
            }
            components.push(Component2D { degree: comp.degree - 1, values });
        }
        ProductSymbol2D { grid: g, order: self.order - 1, components }
    }

    /// Spectral d/dy.
    pub fn y_derivative(&self) -> ProductSymbol2D {
        let g = self.grid;
        let mut components = Vec::with_capacity(self.components.len());
        for comp in &self.components {
            let mut values = comp.values.clone();
            let mut line = vec![C64::new(0.0, 0.0); g.ny];
            for ix in 0..g.nx {
                for it in 0..g.ntheta {
                    for iy in 0..g.ny {
                        line[iy] = values[g.idx(ix, iy, it)];
                    }
                    fft_derivative(&mut line);
                    for iy in 0..g.ny {
                        values[g.idx(ix, iy, it)] = line[iy];
                    }
                }
            }
            components.push(Component2D { degree: comp.degree, values });
        }
        ProductSymbol2D { grid: g, order: self.order, components }
    }

    /// Restriction to q = 0 of the component of the given degree: values on
    /// the two sheets theta = 0 (p = +1) and theta = pi (p = -1), each an
    /// (nx x ny) array in row-major layout.
    pub fn restrict_q0(&self, degree: i64) -> Option<(Vec<C64>, Vec<C64>)> {
        let comp = self.component_at_degree(degree)?;
        let g = self.grid;
        let half = g.ntheta / 2;
        let mut plus = Vec::with_capacity(g.nx * g.ny);
        let mut minus = Vec::with_capacity(g.nx * g.ny);
        for ix in 0..g.nx {
            for iy in 0..g.ny {
                plus.push(comp.values[g.idx(ix, iy, 0)]);
                minus.push(comp.values[g.idx(ix, iy, half)]);
            }
        }
        Some((plus, minus))
    }
}

/// Trigonometric interpolation of a periodic sample vector at point t.
pub fn trig_interp(samples: &[C64], t: f64) -> C64 {
    let m = samples.len();
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    let mut acc = C64::new(0.0, 0.0);
    for (idx, c) in buf.iter().enumerate() {
        let k = if idx <= m / 2 { idx as i64 } else { idx as i64 - m as i64 };
        if m % 2 == 0 && idx == m / 2 {
            // split the Nyquist mode symmetrically
            acc += c * scale * C64::new((k as f64 * t).cos(), 0.0);
        } else {
            acc += c * scale * C64::new(0.0, k as f64 * t).exp();
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid2D {
        Grid2D::new(8, 8, 32)
    }

    #[test]
    fn q_derivative_of_angle_independent_degree_zero_vanishes() {
        let s = ProductSymbol2D::new(
            grid(),
            vec![Component2D::from_fn(grid(), 0, |x, y, _| C64::new(x.cos() + y.sin(), 0.0))],
        );
        let d = s.q_derivative();
        let max = d.components()[0].values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(max < 1e-12);
    }

    #[test]
    fn q_derivative_of_q_is_one() {
        // degree-1 component with angle function sin(theta) is q itself.
        let s = ProductSymbol2D::new(
            grid(),
            vec![Component2D::from_fn(grid(), 1, |_, _, th| C64::new(th.sin(), 0.0))],
        );
        let d = s.q_derivative();
        assert_eq!(d.components()[0].degree, 0);
        for v in d.components()[0].values.iter() {
            assert!((v - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn q_derivative_matches_closed_form_inverse_radius() {
        // (p^2+q^2)^{-1/2}: degree -1, angle function 1.
        // d/dq = -q (p^2+q^2)^{-3/2}: degree -2, angle function -sin(theta).
        let s = ProductSymbol2D::new(
            grid(),
            vec![Component2D::from_fn(grid(), -1, |_, _, _| C64::new(1.0, 0.0))],
        );
        let d = s.q_derivative();
        assert_eq!(d.components()[0].degree, -2);
        let g = grid();
        for it in 0..g.ntheta {
            let want = C64::new(-g.theta(it).sin(), 0.0);
            let got = d.components()[0].value(g, 3, 5, it);
            assert!((got - want).norm() < 1e-10);
        }
    }

    #[test]
    fn y_derivative_is_spectral() {
        let s = ProductSymbol2D::new(
            grid(),
            vec![Component2D::from_fn(grid(), 0, |_, y, _| C64::new((2.0 * y).sin(), 0.0))],
        );
        let d = s.y_derivative();
        let g = grid();
        for iy in 0..g.ny {
            let want = C64::new(2.0 * (2.0 * g.y(iy)).cos(), 0.0);
            let got = d.components()[0].value(g, 0, iy, 0);
            assert!((got - want).norm() < 1e-12);
        }
    }

    #[test]
    fn restrict_q0_reads_both_sheets() {
        let s = ProductSymbol2D::new(
            grid(),
            vec![Component2D::from_fn(grid(), -1, |x, _, th| {
                C64::new(th.cos() * x.cos(), 0.0)
            })],
        );
        let (plus, minus) = s.restrict_q0(-1).unwrap();
        let g = grid();
        for ix in 0..g.nx {
            for iy in 0..g.ny {
                let want = g.x(ix).cos();
                assert!((plus[ix * g.ny + iy] - C64::new(want, 0.0)).norm() < 1e-12);
                assert!((minus[ix * g.ny + iy] - C64::new(-want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn trig_interp_hits_grid_and_midpoints() {
        let m = 16;
        let f = |t: f64| C64::new((3.0 * t).cos(), (2.0 * t).sin());
        let samples: Vec<C64> = (0..m).map(|i| f(TAU * i as f64 / m as f64)).collect();
        for i in 0..m {
            let t = TAU * (i as f64 + 0.5) / m as f64;
            assert!((trig_interp(&samples, t) - f(t)).norm() < 1e-12);
        }
    }

    #[test]
    fn smooth_symbol_passes_tail_check() {
        let s = ProductSymbol2D::new(
            grid(),
            vec![Component2D::from_fn(grid(), -1, |x, y, th| {
                C64::new((1.0 + 0.3 * x.cos()) * (1.0 + 0.2 * (y + th).sin()), 0.0)
            })],
        );
        s.check_tail(1e-10).unwrap();
    }
}
