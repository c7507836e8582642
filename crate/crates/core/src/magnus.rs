//! Adaptive fourth-order Magnus integrator for `i dU/dt = H(t) U` with a
//! 2x2 Hermitian generator. Every step is an exact matrix exponential, so the
//! propagator stays unitary to rounding regardless of the tolerance; the
//! tolerance only controls the phase error. Step size is chosen by step
//! doubling.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::linalg::expm_hermitian;
use crate::C64;

#[derive(Debug, Clone, Copy)]
pub struct MagnusOptions {
    /// Local error tolerance per step (max-entry norm of the propagator).
    pub tol: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for MagnusOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            min_step: 1e-9,
            max_steps: 5_000_000,
        }
    }
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // sqrt(3)/6
const COMMUTATOR_WEIGHT: f64 = 0.144_337_567_297_406_44; // sqrt(3)/12

/// One Magnus-4 step from `t` to `t + h`, returning the step propagator.
fn magnus_step<H: Fn(f64) -> Matrix2<C64>>(ham: &H, t: f64, h: f64) -> Matrix2<C64> {
    let h1 = ham(t + (0.5 - GAUSS_OFFSET) * h);
    let h2 = ham(t + (0.5 + GAUSS_OFFSET) * h);
    // Omega = -i K with K = h/2 (H1 + H2) - i (sqrt3/12) h^2 [H2, H1]
    let comm = h2 * h1 - h1 * h2;
    let k = (h1 + h2) * C64::new(0.5 * h, 0.0) - comm * C64::new(0.0, COMMUTATOR_WEIGHT * h * h);
    expm_hermitian(&k)
}

fn max_entry(m: &Matrix2<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Stateful adaptive stepper; the working step size carries over between
/// successive calls to [`Integrator::advance`].
pub struct Integrator<H> {
    ham: H,
    opts: MagnusOptions,
    step: f64,
    steps_taken: usize,
}

impl<H: Fn(f64) -> Matrix2<C64>> Integrator<H> {
    pub fn new(ham: H, opts: MagnusOptions) -> Self {
        Self {
            ham,
            opts,
            step: 0.0,
            steps_taken: 0,
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// Advances `u` from `t0` to `t1`.
    pub fn advance(&mut self, u: &mut Matrix2<C64>, t0: f64, t1: f64) -> Result<()> {
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(());
        }
        if span < 0.0 {
            return Err(Error::Integrator {
                at: t0,
                reason: "time grid must be increasing".into(),
            });
        }
        if self.step <= 0.0 {
            let scale = max_entry(&(self.ham)(t0)).max(1e-3);
            self.step = (0.1 / scale).min(span);
        }
        let mut t = t0;
        while t < t1 {
            if self.steps_taken >= self.opts.max_steps {
                return Err(Error::Integrator {
                    at: t,
                    reason: format!("exceeded {} steps", self.opts.max_steps),
                });
            }
            let remaining = t1 - t;
            let last = self.step >= remaining;
            let h = if last { remaining } else { self.step };
            let big = magnus_step(&self.ham, t, h);
            let half1 = magnus_step(&self.ham, t, 0.5 * h);
            let half2 = magnus_step(&self.ham, t + 0.5 * h, 0.5 * h);
            let fine = half2 * half1;
            let err = max_entry(&(fine - big)) / 15.0;
            if !err.is_finite() {
                return Err(Error::Integrator {
                    at: t,
                    reason: "non-finite generator".into(),
                });
            }
            if err <= self.opts.tol || h <= self.opts.min_step {
                if h <= self.opts.min_step && err > self.opts.tol {
                    return Err(Error::Integrator {
                        at: t,
                        reason: format!("step below {:e} with error {:e}", self.opts.min_step, err),
                    });
                }
                *u = fine * *u;
                t = if last { t1 } else { t + h };
                self.steps_taken += 1;
                let grow = if err > 0.0 {
                    (0.9 * (self.opts.tol / err).powf(0.2)).clamp(0.2, 2.0)
                } else {
                    2.0
                };
                if !last {
                    self.step = h * grow;
                } else if grow < 1.0 {
                    self.step = self.step.min(h * grow);
                }
            } else {
                let shrink = (0.9 * (self.opts.tol / err).powf(0.2)).clamp(0.1, 0.9);
                self.step = h * shrink;
            }
        }
        Ok(())
    }
}

/// Propagator `U(t1, t0)` of `i dU/dt = H(t) U`.
pub fn propagator<H: Fn(f64) -> Matrix2<C64>>(
    ham: H,
    t0: f64,
    t1: f64,
    opts: MagnusOptions,
) -> Result<Matrix2<C64>> {
    let mut u = Matrix2::identity();
    Integrator::new(ham, opts).advance(&mut u, t0, t1)?;
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitarity_error;

    #[test]
    fn constant_generator_is_exact() {
        let h = Matrix2::new(
            C64::new(0.3, 0.0),
            C64::new(0.2, -0.7),
            C64::new(0.2, 0.7),
            C64::new(-1.1, 0.0),
        );
        let u = propagator(|_| h, 0.0, 5.0, MagnusOptions::default()).unwrap();
        let exact = expm_hermitian(&(h * C64::new(5.0, 0.0)));
        assert!((u - exact).norm() < 1e-12);
    }

    /// Linear sweep through a crossing: compare the final upper-state
    /// population with the Landau-Zener formula for a long enough sweep.
    #[test]
    fn landau_zener_sweep() {
        let (v, g) = (1.0, 0.3);
        let ham = |t: f64| {
            Matrix2::new(
                C64::new(v * t, 0.0),
                C64::new(g, 0.0),
                C64::new(g, 0.0),
                C64::new(-v * t, 0.0),
            )
        };
        let u = propagator(ham, -60.0, 60.0, MagnusOptions::default()).unwrap();
        assert!(unitarity_error(&u) < 1e-12);
        // start in the lower adiabatic state (component 0 at t -> -inf is upper)
        let stay = u[(1, 1)].norm_sqr();
        let lz = (-std::f64::consts::PI * g * g / v).exp();
        assert!((stay - lz).abs() < 5e-3, "diabatic {stay} vs {lz}");
    }

    #[test]
    fn rejects_decreasing_interval() {
        let mut u = Matrix2::identity();
        let mut it = Integrator::new(|_| Matrix2::zeros(), MagnusOptions::default());
        assert!(it.advance(&mut u, 1.0, 0.0).is_err());
    }
}
