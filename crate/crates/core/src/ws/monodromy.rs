//! Wannier-Stark bands from the monodromy of the generating-function ODE.
//!
//! With `Y(theta) = sum_l psi_l exp(-i l theta)` the chain becomes
//! `i dF Y' = (E + G0(theta)) Y` on the circle, where
//!
//! ```text
//! G0 = [[ dF s - delta,   J2 + J1 f      ],
//!       [ J2 + J1 f*,    -dF s + delta   ]],   s = (r+q)/4
//! f  = e^{-i r d k} e^{-i q t} + e^{i q d k} e^{-i r t} + e^{i (q-r) d k} e^{-i (r+q) t}
//! ```
//!
//! Periodicity of `Y` quantizes `E = dF (n + phi / 2 pi)` where `e^{i phi}`
//! are the eigenvalues of the E = 0 propagator over one turn.

use std::f64::consts::PI;

use nalgebra::Matrix2;

use super::chain::fold;
use crate::error::{Error, Result};
use crate::lattice::{LatticeParams, Rational};
use crate::linalg::{eigenvalues2, eigenvector2, unitarity_error};
use crate::magnus::{Integrator, MagnusOptions};
use crate::C64;

/// Eigenphases closer than this (mod 2 pi) are reported as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct MonodromyResult {
    pub kappa: f64,
    pub propagator: Matrix2<C64>,
    /// In `(-pi, pi]`, ascending.
    pub eigenphases: [f64; 2],
    /// Band energies folded into `[-dF/2, dF/2)`, ascending.
    pub energies: [f64; 2],
    /// Eigenvectors of the propagator, matched to `energies`.
    pub eigenvectors: [nalgebra::Vector2<C64>; 2],
    pub degenerate: bool,
    pub unitarity_error: f64,
    pub steps: usize,
}

/// `G0(theta; kappa) / dF`, the E = 0 generator in `i Y' = H Y`.
pub fn generator(
    params: &LatticeParams,
    field: f64,
    o: Rational,
    kappa: f64,
    theta: f64,
) -> Matrix2<C64> {
    let (r, q, d) = (o.r() as f64, o.q() as f64, o.d());
    let step = d * field;
    let s = (r + q) / 4.0;
    let f = C64::from_polar(1.0, -r * d * kappa - q * theta)
        + C64::from_polar(1.0, q * d * kappa - r * theta)
        + C64::from_polar(1.0, (q - r) * d * kappa - (r + q) * theta);
    let off = (C64::new(params.j2, 0.0) + f * params.j1) / step;
    let diag = (step * s - params.delta) / step;
    Matrix2::new(C64::new(diag, 0.0), off, off.conj(), C64::new(-diag, 0.0))
}

pub fn monodromy_spectrum(
    params: &LatticeParams,
    field: f64,
    o: Rational,
    kappa: f64,
    opts: &MagnusOptions,
) -> Result<MonodromyResult> {
    if !(field.is_finite() && field > 0.0) {
        return Err(crate::error::invalid("F", "must be finite and > 0"));
    }
    let ham = |t: f64| generator(params, field, o, kappa, t);
    let mut u = Matrix2::identity();
    let mut integ = Integrator::new(ham, *opts);
    integ.advance(&mut u, 0.0, 2.0 * PI)?;
    let uerr = unitarity_error(&u);
    if uerr > 1e3 * opts.tol.max(1e-14) {
        return Err(Error::Integrator {
            at: 2.0 * PI,
            reason: format!("propagator unitarity error {uerr:e}"),
        });
    }
    let lam = eigenvalues2(&u);
    let step = o.d() * field;
    let mut pairs: Vec<(f64, f64, nalgebra::Vector2<C64>)> = lam
        .iter()
        .map(|&z| {
            let mut phi = z.arg();
            if phi <= -PI {
                phi += 2.0 * PI;
            }
            (phi, fold(step * phi / (2.0 * PI), step), eigenvector2(&u, z))
        })
        .collect();
    let gap = {
        let dphi = (pairs[0].0 - pairs[1].0).rem_euclid(2.0 * PI);
        dphi.min(2.0 * PI - dphi)
    };
    let mut phases = [pairs[0].0, pairs[1].0];
    phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pairs.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    Ok(MonodromyResult {
        kappa,
        propagator: u,
        eigenphases: phases,
        energies: [pairs[0].1, pairs[1].1],
        eigenvectors: [pairs[0].2, pairs[1].2],
        degenerate: gap < DEGENERACY_TOL,
        unitarity_error: uerr,
        steps: integ.steps_taken(),
    })
}
