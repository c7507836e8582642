//! Interband Landau-Zener dynamics of Bloch waves driven across the zone.
//!
//! A Bloch wave with quasimomentum `kappa0` (primary frame) evolves under the
//! two-band Hamiltonian evaluated at `kappa0 - F_tilde t`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{bloch_eigen, bloch_hamiltonian, FieldSpec, LatticeParams};
use crate::magnus::{Integrator, MagnusOptions};
use crate::{C64, PRIMARY_PERIOD};

/// Splitting below which the instantaneous basis is taken one-sidedly.
pub const DEGENERACY_GAP: f64 = 1e-12;

/// `T_J = 2 pi / J1`, the time unit of population traces.
pub fn tunneling_period(params: &LatticeParams) -> Result<f64> {
    if params.j1 <= 0.0 {
        return Err(invalid("J1", "time unit 2 pi / J1 needs J1 > 0"));
    }
    Ok(2.0 * PI / params.j1)
}

/// Quasimomentum at time `t`.
pub fn kappa_at(field: &FieldSpec, kappa0: (f64, f64), t: f64) -> (f64, f64) {
    let (f1, f2) = field.primary_components();
    (kappa0.0 - f1 * t, kappa0.1 - f2 * t)
}

pub fn hamiltonian_at(
    params: &LatticeParams,
    field: &FieldSpec,
    kappa0: (f64, f64),
    t: f64,
) -> Matrix2<C64> {
    let (k1, k2) = kappa_at(field, kappa0, t);
    bloch_hamiltonian(params, k1, k2)
}

/// Period of the drive for rational orientations, `2 pi / (d F)`.
pub fn drive_period(field: &FieldSpec) -> Option<f64> {
    field.ladder_step().map(|s| 2.0 * PI / s)
}

pub fn lower_band_state(params: &LatticeParams, kappa: (f64, f64)) -> Vector2<C64> {
    bloch_eigen(params, kappa.0, kappa.1).vectors[0]
}

/// `(P-, P+)` of `psi` in the instantaneous eigenbasis at `kappa`.
pub fn band_populations(params: &LatticeParams, kappa: (f64, f64), psi: &Vector2<C64>) -> (f64, f64) {
    let e = bloch_eigen(params, kappa.0, kappa.1);
    (e.vectors[0].dotc(psi).norm_sqr(), e.vectors[1].dotc(psi).norm_sqr())
}

/// Populations at time `t` along a trajectory; at an exact band touching the
/// basis is taken just before `t`.
pub fn trajectory_populations(
    params: &LatticeParams,
    field: &FieldSpec,
    kappa0: (f64, f64),
    t: f64,
    psi: &Vector2<C64>,
) -> (f64, f64) {
    let k = kappa_at(field, kappa0, t);
    let e = bloch_eigen(params, k.0, k.1);
    if e.gap() > DEGENERACY_GAP {
        return (e.vectors[0].dotc(psi).norm_sqr(), e.vectors[1].dotc(psi).norm_sqr());
    }
    let mut dt = 1e-9;
    loop {
        let k = kappa_at(field, kappa0, t - dt);
        let e = bloch_eigen(params, k.0, k.1);
        if e.gap() > DEGENERACY_GAP || dt > 1e-3 {
            return (e.vectors[0].dotc(psi).norm_sqr(), e.vectors[1].dotc(psi).norm_sqr());
        }
        dt *= 10.0;
    }
}

/// Amplitudes at each time of `t_grid`, starting from `psi0` at `t_grid[0]`.
pub fn evolve_two_level(
    params: &LatticeParams,
    field: &FieldSpec,
    kappa0: (f64, f64),
    psi0: Vector2<C64>,
    t_grid: &[f64],
    opts: &MagnusOptions,
) -> Result<Vec<Vector2<C64>>> {
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("t_grid", "must be strictly increasing"));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    let Some(&t0) = t_grid.first() else {
        return Ok(out);
    };
    let mut integ = Integrator::new(|t| hamiltonian_at(params, field, kappa0, t), *opts);
    let mut u = Matrix2::identity();
    let mut t = t0;
    out.push(psi0);
    for &t1 in &t_grid[1..] {
        integ.advance(&mut u, t, t1)?;
        t = t1;
        out.push(u * psi0);
    }
    Ok(out)
}

/// Upper-band population along a lower-band trajectory.
pub fn upper_population_trajectory(
    params: &LatticeParams,
    field: &FieldSpec,
    kappa0: (f64, f64),
    t_grid: &[f64],
    opts: &MagnusOptions,
) -> Result<Vec<f64>> {
    let psi0 = lower_band_state(params, kappa_at(field, kappa0, t_grid[0]));
    let amps = evolve_two_level(params, field, kappa0, psi0, t_grid, opts)?;
    Ok(t_grid
        .iter()
        .zip(&amps)
        .map(|(&t, psi)| trajectory_populations(params, field, kappa0, t, psi).1)
        .collect())
}

/// Cell-centred `n x n` grid over the zone, as `a kappa` in `[-pi, pi)` per
/// primary axis divided by `a`.
pub fn bz_grid(n: usize) -> Vec<(f64, f64)> {
    let h = 2.0 * PI / n as f64;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let k1 = -PI + (i as f64 + 0.5) * h;
            let k2 = -PI + (j as f64 + 0.5) * h;
            out.push((k1 / PRIMARY_PERIOD, k2 / PRIMARY_PERIOD));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct PopulationMap {
    pub n: usize,
    pub kappa: Vec<(f64, f64)>,
    pub times: Vec<f64>,
    /// `p_plus[s][k]`: snapshot `s`, grid point `k`; NaN where the
    /// trajectory failed.
    pub p_plus: Vec<Vec<f64>>,
    pub failures: Vec<(usize, String)>,
}

/// Per-quasimomentum upper-band populations at the snapshot times,
/// starting from a completely filled lower band at `t = 0`.
pub fn bz_population_map(
    params: &LatticeParams,
    field: &FieldSpec,
    snapshots: &[f64],
    n: usize,
    opts: &MagnusOptions,
) -> Result<PopulationMap> {
    if n == 0 {
        return Err(invalid("grid", "must be > 0"));
    }
    let mut grid = vec![0.0];
    grid.extend(snapshots.iter().copied().filter(|&t| t > 0.0));
    let has_zero = snapshots.first().is_some_and(|&t| t == 0.0);
    let kappa = bz_grid(n);
    let rows: Vec<Result<Vec<f64>>> = kappa
        .par_iter()
        .map(|&k| upper_population_trajectory(params, field, k, &grid, opts))
        .collect();
    let mut p_plus = vec![vec![f64::NAN; kappa.len()]; snapshots.len()];
    let mut failures = Vec::new();
    for (k, row) in rows.into_iter().enumerate() {
        match row {
            Ok(vals) => {
                let vals = if has_zero { &vals[..] } else { &vals[1..] };
                for (s, v) in vals.iter().enumerate() {
                    p_plus[s][k] = *v;
                }
            }
            Err(e) => failures.push((k, e.to_string())),
        }
    }
    Ok(PopulationMap {
        n,
        kappa,
        times: snapshots.to_vec(),
        p_plus,
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialCondition {
    /// Lower-band Bloch wave at zero quasimomentum.
    Bose,
    /// Uniformly filled lower band.
    Fermi,
}

impl std::str::FromStr for InitialCondition {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bose" => Ok(Self::Bose),
            "fermi" => Ok(Self::Fermi),
            _ => Err(invalid("initial", format!("unknown initial condition `{s}` (bose|fermi)"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PopulationTrace {
    /// Times in units of `T_J`.
    pub t: Vec<f64>,
    pub p_plus: Vec<f64>,
    pub p_minus: Vec<f64>,
    pub initial: InitialCondition,
    pub rational: bool,
}

/// Uniform grid over `[0, total]` with `samples + 1` points.
pub fn time_grid(total: f64, samples: usize) -> Vec<f64> {
    (0..=samples).map(|k| total * k as f64 / samples as f64).collect()
}

/// BZ-averaged upper population on `t_grid` (absolute times), summed in
/// grid order.
pub fn fermi_upper_population(
    params: &LatticeParams,
    field: &FieldSpec,
    t_grid: &[f64],
    n: usize,
    opts: &MagnusOptions,
) -> Result<Vec<f64>> {
    let kappa = bz_grid(n);
    let rows: Vec<Vec<f64>> = kappa
        .par_iter()
        .map(|&k| upper_population_trajectory(params, field, k, t_grid, opts))
        .collect::<Result<_>>()?;
    let mut avg = vec![0.0; t_grid.len()];
    for row in &rows {
        for (a, v) in avg.iter_mut().zip(row) {
            *a += v;
        }
    }
    let m = rows.len() as f64;
    avg.iter_mut().for_each(|a| *a /= m);
    Ok(avg)
}

/// Population trace on `t_grid` given in units of `T_J`.
pub fn population_trace(
    params: &LatticeParams,
    field: &FieldSpec,
    initial: InitialCondition,
    t_grid_tj: &[f64],
    n: usize,
    opts: &MagnusOptions,
) -> Result<PopulationTrace> {
    let tj = tunneling_period(params)?;
    let t: Vec<f64> = t_grid_tj.iter().map(|x| x * tj).collect();
    let p_plus = match initial {
        InitialCondition::Bose => upper_population_trajectory(params, field, (0.0, 0.0), &t, opts)?,
        InitialCondition::Fermi => fermi_upper_population(params, field, &t, n, opts)?,
    };
    Ok(PopulationTrace {
        t: t_grid_tj.to_vec(),
        p_minus: p_plus.iter().map(|p| 1.0 - p).collect(),
        p_plus,
        initial,
        rational: field.as_rational().is_some(),
    })
}

/// Time average of the BZ-averaged upper population over `[0, total_tj T_J]`
/// by the trapezoid rule on `samples` intervals.
pub fn mean_upper_population(
    params: &LatticeParams,
    field: &FieldSpec,
    total_tj: f64,
    n: usize,
    samples: usize,
    opts: &MagnusOptions,
) -> Result<f64> {
    if params.j1 == 0.0 && params.j2 == 0.0 {
        // flat bands: nothing moves between the bands
        return Ok(0.0);
    }
    let tj = tunneling_period(params)?;
    let grid = time_grid(total_tj * tj, samples);
    let p = fermi_upper_population(params, field, &grid, n, opts)?;
    Ok(trapezoid_mean(&p))
}

fn trapezoid_mean(p: &[f64]) -> f64 {
    let n = p.len() - 1;
    if n == 0 {
        return p[0];
    }
    let inner: f64 = p[1..n].iter().sum();
    (inner + 0.5 * (p[0] + p[n])) / n as f64
}

/// Pearson correlation between `x(t)` and `x(t + lag * dt)`.
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    if lag >= x.len() {
        return f64::NAN;
    }
    let a = &x[..x.len() - lag];
    let b = &x[lag..];
    let (ma, mb) = (crate::stats::mean(a), crate::stats::mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (u, v) in a.iter().zip(b) {
        sab += (u - ma) * (v - mb);
        saa += (u - ma) * (u - ma);
        sbb += (v - mb) * (v - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 1.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Standard deviations of the first and last thirds of a trace.
pub fn thirds_std(x: &[f64]) -> (f64, f64) {
    let k = x.len() / 3;
    (crate::stats::std_dev(&x[..k]), crate::stats::std_dev(&x[x.len() - k..]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Orientation;
    use crate::linalg::eigh2;
    use approx::assert_abs_diff_eq;

    fn field(f: f64, beta: f64) -> FieldSpec {
        FieldSpec::new(f, Orientation::from_beta(beta)).unwrap()
    }

    #[test]
    fn flat_bands_keep_populations() {
        let p = LatticeParams::new(0.0, 0.0, 0.5).unwrap();
        let fs = field(0.7, 1.0 / 3.0);
        let t = time_grid(20.0, 10);
        let pp = upper_population_trajectory(&p, &fs, (0.3, -0.2), &t, &MagnusOptions::default()).unwrap();
        assert!(pp.iter().all(|&x| x < 1e-28));
        let m = mean_upper_population(&p, &fs, 1.0, 4, 4, &MagnusOptions::default()).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn populations_sum_to_one() {
        let p = LatticeParams::LATTICE_I;
        let fs = field(0.5, 1.0 / 3.0);
        let t = time_grid(30.0, 60);
        let k0 = (0.4, 1.1);
        let psi0 = Vector2::new(C64::new(0.6, 0.1), C64::new(-0.2, 0.7620));
        let n = psi0.norm();
        let psi0 = psi0 / C64::new(n, 0.0);
        let amps = evolve_two_level(&p, &fs, k0, psi0, &t, &MagnusOptions::default()).unwrap();
        for (&ti, a) in t.iter().zip(&amps) {
            assert!((a.norm_squared() - 1.0).abs() < 1e-10);
            let (pm, pp) = trajectory_populations(&p, &fs, k0, ti, a);
            assert!((pm + pp - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn band_population_examples() {
        let p = LatticeParams::LATTICE_I;
        let k = (0.3, 0.9);
        let e = eigh2(&bloch_hamiltonian(&p, k.0, k.1));
        let (pm, pp) = band_populations(&p, k, &e.vectors[0]);
        assert_abs_diff_eq!(pm, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pp, 0.0, epsilon = 1e-14);
        let s = C64::new(0.5f64.sqrt(), 0.0);
        let psi = e.vectors[0] * s + e.vectors[1] * C64::from_polar(0.5f64.sqrt(), 1.3);
        let (pm, pp) = band_populations(&p, k, &psi);
        assert_abs_diff_eq!(pm, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(pp, 0.5, epsilon = 1e-14);
        // rephasing the basis does not matter
        let (qm, qp) = band_populations(&p, k, &(psi * C64::from_polar(1.0, 0.4)));
        assert_abs_diff_eq!(qm, pm, epsilon = 1e-14);
        assert_abs_diff_eq!(qp, pp, epsilon = 1e-14);
    }

    #[test]
    fn weak_field_is_adiabatic() {
        let p = LatticeParams::LATTICE_I;
        let fs = field(0.05, 1.0 / 3.0);
        let t = time_grid(2.0 * PI / 0.05, 200);
        let pp = upper_population_trajectory(&p, &fs, (0.0, 0.0), &t, &MagnusOptions::default()).unwrap();
        assert!(pp.iter().all(|&x| x < 0.01), "{}", pp.iter().cloned().fold(0.0, f64::max));
    }

    /// Near a gapped cone the off-diagonal element is linear in time,
    /// `|h| = alpha |t|`, which is the Landau-Zener problem with coupling
    /// `delta` and sweep rate `2 alpha`: `P = exp(-pi delta^2 / alpha)`.
    /// Band curvature adds a correction of order `sqrt(F)`.
    #[test]
    fn cone_crossing_matches_landau_zener() {
        let cone = LatticeParams::LATTICE_II;
        let dirac = crate::lattice::dirac_points(&cone)[0];
        let fs = field(5e-4, 1.0 / 3.0);
        let (f1, f2) = fs.primary_components();
        let (g1, g2) = crate::lattice::bloch_offdiag_gradient(&cone, dirac.0, dirac.1);
        let alpha = (g1 * f1 + g2 * f2).norm();
        let delta = (alpha * 2f64.ln() / PI).sqrt();
        let p = LatticeParams::new(cone.j1, cone.j2, delta).unwrap();
        let tc = 1200.0;
        let k0 = (dirac.0 + f1 * tc, dirac.1 + f2 * tc);
        let t = time_grid(2.0 * tc, 40);
        let pp = upper_population_trajectory(&p, &fs, k0, &t, &MagnusOptions::default()).unwrap();
        assert!(pp[..10].iter().all(|&x| x < 0.01));
        let after = crate::stats::mean(&pp[30..]);
        assert!((after - 0.5).abs() < 0.04, "{after}");
    }

    #[test]
    fn stroboscopic_trace_matches_period_propagator() {
        let p = LatticeParams::LATTICE_I;
        let fs = FieldSpec::rational(0.5, 2, 1).unwrap();
        let period = drive_period(&fs).unwrap();
        let k0 = (0.2, -0.4);
        let opts = MagnusOptions::default();
        let u = crate::magnus::propagator(|t| hamiltonian_at(&p, &fs, k0, t), 0.0, period, opts).unwrap();
        let psi0 = lower_band_state(&p, k0);
        let t: Vec<f64> = (0..=4).map(|k| k as f64 * period).collect();
        let amps = evolve_two_level(&p, &fs, k0, psi0, &t, &opts).unwrap();
        let mut v = psi0;
        for a in &amps {
            assert!((a - v).norm() < 1e-8);
            v = u * v;
        }
        // the quasimomentum returns modulo a reciprocal vector
        let (k1, k2) = kappa_at(&fs, k0, period);
        let g = 2.0 * PI / PRIMARY_PERIOD;
        for d in [k1 - k0.0, k2 - k0.1] {
            assert_abs_diff_eq!(d / g, (d / g).round(), epsilon = 1e-12);
        }
    }

    #[test]
    fn autocorrelation_of_periodic_signal() {
        let x: Vec<f64> = (0..400).map(|k| (2.0 * PI * k as f64 / 50.0).sin()).collect();
        assert_abs_diff_eq!(autocorrelation(&x, 50), 1.0, epsilon = 1e-12);
        assert!(autocorrelation(&x, 25) < -0.99);
        let (a, b) = thirds_std(&x);
        assert_abs_diff_eq!(a, b, epsilon = 1e-2);
    }

    #[test]
    fn map_starts_empty() {
        let p = LatticeParams::LATTICE_II;
        let fs = field(0.2, 1.0 / 3.0);
        let m = bz_population_map(&p, &fs, &[0.0, 5.0], 6, &MagnusOptions::default()).unwrap();
        assert!(m.p_plus[0].iter().all(|&x| x < 1e-28));
        assert!(m.failures.is_empty());
        assert_eq!(m.p_plus[1].len(), 36);
    }
}
