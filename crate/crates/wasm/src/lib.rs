//! Browser bindings: a Bloch-band cut, Wannier-Stark bands for a rational
//! field direction, and a Landau-Zener population trace.
//!
//! Results are flat `Float64Array`s; layouts are given per function.
//! The `*_impl` functions are plain Rust so they can be tested natively.

use std::f64::consts::PI;

use wasm_bindgen::prelude::*;
use wannier_stark::lattice::bloch_bands;
use wannier_stark::lz::{population_trace, InitialCondition};
use wannier_stark::magnus::MagnusOptions;
use wannier_stark::ws::fold;
use wannier_stark::ws::sweep::{band_sweep, kappa_grid, SweepMethod, SweepOptions};
use wannier_stark::{FieldSpec, LatticeParams, Orientation, Rational, PRIMARY_PERIOD};

fn lattice(j1: f64, j2: f64, delta: f64) -> Result<LatticeParams, String> {
    LatticeParams::new(j1, j2, delta).map_err(|e| e.to_string())
}

/// `[s, e_minus, e_plus]` triples along Gamma-X-M-Gamma, `s` the path
/// parameter in `[0, 3]`.
pub fn bloch_cut_impl(j1: f64, j2: f64, delta: f64, points: usize) -> Result<Vec<f64>, String> {
    let p = lattice(j1, j2, delta)?;
    if points < 2 {
        return Err("points: need at least 2".into());
    }
    let z = PI / PRIMARY_PERIOD;
    let corners = [(0.0, 0.0), (z, 0.0), (z, z), (0.0, 0.0)];
    let mut out = Vec::with_capacity(9 * points);
    for leg in 0..3 {
        let (a, b) = (corners[leg], corners[leg + 1]);
        for i in 0..points {
            if leg > 0 && i == 0 {
                continue;
            }
            let s = i as f64 / (points - 1) as f64;
            let (lo, hi) = bloch_bands(&p, a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1));
            out.extend([leg as f64 + s, lo, hi]);
        }
    }
    Ok(out)
}

/// `[kappa, folded_minus, folded_plus]` triples over one window, followed by
/// the ladder step as the final element.
pub fn ws_bands_impl(
    j1: f64,
    j2: f64,
    delta: f64,
    field: f64,
    r: i32,
    q: i32,
    points: usize,
) -> Result<Vec<f64>, String> {
    let p = lattice(j1, j2, delta)?;
    let o = Rational::new(r as i64, q as i64).map_err(|e| e.to_string())?;
    let grid = kappa_grid(o, points, false);
    let opts = SweepOptions {
        method: SweepMethod::Monodromy,
        ..SweepOptions::default()
    };
    let s = band_sweep(&p, field, o, &grid, &opts).map_err(|e| e.to_string())?;
    let step = s.ladder_step;
    let mut out = Vec::with_capacity(3 * grid.len() + 1);
    for (k, kappa) in grid.iter().enumerate() {
        out.extend([
            *kappa,
            fold(s.bands[0].energy[k], step),
            fold(s.bands[1].energy[k], step),
        ]);
    }
    out.push(step);
    Ok(out)
}

/// `[t / T_J, p_plus]` pairs. `beta = Fx / Fy`; `fermi` selects a filled
/// lower band instead of a condensate at zero quasimomentum.
#[allow(clippy::too_many_arguments)]
pub fn lz_trace_impl(
    j1: f64,
    j2: f64,
    delta: f64,
    field: f64,
    beta: f64,
    fermi: bool,
    t_total: f64,
    samples: usize,
    grid: usize,
) -> Result<Vec<f64>, String> {
    let p = lattice(j1, j2, delta)?;
    let fs = FieldSpec::new(field, Orientation::from_beta(beta)).map_err(|e| e.to_string())?;
    if samples < 2 || !(t_total > 0.0) {
        return Err("need samples >= 2 and t_total > 0".into());
    }
    let t: Vec<f64> = (0..samples)
        .map(|k| t_total * k as f64 / (samples - 1) as f64)
        .collect();
    let initial = if fermi { InitialCondition::Fermi } else { InitialCondition::Bose };
    let opts = MagnusOptions {
        tol: 1e-10,
        ..MagnusOptions::default()
    };
    let tr = population_trace(&p, &fs, initial, &t, grid, &opts).map_err(|e| e.to_string())?;
    Ok(tr.t.iter().zip(&tr.p_plus).flat_map(|(a, b)| [*a, *b]).collect())
}

#[wasm_bindgen]
pub fn bloch_cut(j1: f64, j2: f64, delta: f64, points: usize) -> Result<Vec<f64>, JsError> {
    bloch_cut_impl(j1, j2, delta, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ws_bands(
    j1: f64,
    j2: f64,
    delta: f64,
    field: f64,
    r: i32,
    q: i32,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    ws_bands_impl(j1, j2, delta, field, r, q, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn lz_trace(
    j1: f64,
    j2: f64,
    delta: f64,
    field: f64,
    beta: f64,
    fermi: bool,
    t_total: f64,
    samples: usize,
    grid: usize,
) -> Result<Vec<f64>, JsError> {
    lz_trace_impl(j1, j2, delta, field, beta, fermi, t_total, samples, grid)
        .map_err(|e| JsError::new(&e))
}
