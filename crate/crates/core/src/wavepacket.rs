//! Real-space wave-packet dynamics on the tilted lattice.
//!
//! Sites are integer points `(x, y)`; a site belongs to sublattice A when
//! `x + y` is even. An A site couples to `(x, y+1)` with `J2` and to
//! `(x +- 1, y)`, `(x, y-1)` with `J1`; on-site energies are
//! `+-delta + F . r`. Time evolution uses a Chebyshev expansion of the
//! propagator.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lattice::{FieldSpec, LatticeParams};
use crate::special::bessel_j_sequence;
use crate::stats::linear_fit;
use crate::C64;

/// Boundary-shell probability above which a run is aborted.
pub const BOUNDARY_FLUX_TOL: f64 = 1e-6;
pub const NORM_DRIFT_TOL: f64 = 1e-10;
pub const ENERGY_DRIFT_TOL: f64 = 1e-8;
pub const MIN_SIZE: usize = 41;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    /// The full `L x L` square.
    Square,
    /// Sites of the square with `|F_hat . r| <= half_width`.
    Strip { half_width: f64 },
}

#[derive(Debug, Clone)]
pub struct RealSpaceLattice {
    params: LatticeParams,
    field: (f64, f64),
    size: usize,
    domain: Domain,
    coords: Vec<(i32, i32)>,
    onsite: Vec<f64>,
    nbr_start: Vec<usize>,
    nbr: Vec<(usize, f64)>,
    shell: Vec<usize>,
    index: HashMap<(i32, i32), usize>,
}

pub fn is_a_site(x: i32, y: i32) -> bool {
    (x + y).rem_euclid(2) == 0
}

/// Bonds from a site: `(dx, dy, hopping)`.
fn bonds(params: &LatticeParams, x: i32, y: i32) -> [(i32, i32, f64); 4] {
    if is_a_site(x, y) {
        [(0, 1, params.j2), (1, 0, params.j1), (-1, 0, params.j1), (0, -1, params.j1)]
    } else {
        [(0, -1, params.j2), (-1, 0, params.j1), (1, 0, params.j1), (0, 1, params.j1)]
    }
}

impl RealSpaceLattice {
    pub fn build(params: &LatticeParams, field: &FieldSpec, size: usize, domain: Domain) -> Result<Self> {
        let (fx, fy) = field.xy_components();
        Self::with_components(params, fx, fy, size, domain)
    }

    /// Builds the lattice for explicit field components (zero allowed).
    pub fn with_components(
        params: &LatticeParams,
        fx: f64,
        fy: f64,
        size: usize,
        domain: Domain,
    ) -> Result<Self> {
        if size % 2 == 0 {
            return Err(invalid("L", format!("{size} must be odd")));
        }
        if size < MIN_SIZE {
            return Err(invalid("L", format!("{size} is below the minimum {MIN_SIZE}")));
        }
        if !(fx.is_finite() && fy.is_finite()) {
            return Err(invalid("F", "components must be finite"));
        }
        let fnorm = fx.hypot(fy);
        if let Domain::Strip { half_width } = domain {
            if fnorm == 0.0 {
                return Err(invalid("domain", "a strip needs a nonzero field"));
            }
            if !(half_width >= 2.0) {
                return Err(invalid("strip-width", "half width must be >= 2"));
            }
        }
        let h = (size / 2) as i32;
        let inside = |x: i32, y: i32| -> bool {
            if x.abs() > h || y.abs() > h {
                return false;
            }
            match domain {
                Domain::Square => true,
                Domain::Strip { half_width } => {
                    ((fx * x as f64 + fy * y as f64) / fnorm).abs() <= half_width
                }
            }
        };
        let mut coords = Vec::new();
        let mut index = HashMap::new();
        for y in -h..=h {
            for x in -h..=h {
                if inside(x, y) {
                    index.insert((x, y), coords.len());
                    coords.push((x, y));
                }
            }
        }
        let mut onsite = Vec::with_capacity(coords.len());
        let mut nbr_start = Vec::with_capacity(coords.len() + 1);
        let mut nbr = Vec::with_capacity(4 * coords.len());
        let mut edge = vec![false; coords.len()];
        for (i, &(x, y)) in coords.iter().enumerate() {
            let d = if is_a_site(x, y) { params.delta } else { -params.delta };
            onsite.push(d + fx * x as f64 + fy * y as f64);
            nbr_start.push(nbr.len());
            for (dx, dy, j) in bonds(params, x, y) {
                match index.get(&(x + dx, y + dy)) {
                    Some(&k) => {
                        if j != 0.0 {
                            nbr.push((k, j));
                        }
                    }
                    None => edge[i] = true,
                }
            }
        }
        nbr_start.push(nbr.len());
        // outermost two-site shell: edge sites and their lattice neighbours
        let mut in_shell = edge.clone();
        for (i, &(x, y)) in coords.iter().enumerate() {
            if edge[i] {
                for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    if let Some(&k) = index.get(&(x + dx, y + dy)) {
                        in_shell[k] = true;
                    }
                }
            }
        }
        let shell = (0..coords.len()).filter(|&i| in_shell[i]).collect();
        Ok(Self {
            params: *params,
            field: (fx, fy),
            size,
            domain,
            coords,
            onsite,
            nbr_start,
            nbr,
            shell,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn params(&self) -> &LatticeParams {
        &self.params
    }

    pub fn field(&self) -> (f64, f64) {
        self.field
    }

    pub fn coords(&self) -> &[(i32, i32)] {
        &self.coords
    }

    pub fn onsite(&self) -> &[f64] {
        &self.onsite
    }

    pub fn site_index(&self, x: i32, y: i32) -> Option<usize> {
        self.index.get(&(x, y)).copied()
    }

    /// Neighbours of site `i` with their (positive) hopping amplitude; the
    /// matrix element is its negative.
    pub fn neighbours(&self, i: usize) -> &[(usize, f64)] {
        &self.nbr[self.nbr_start[i]..self.nbr_start[i + 1]]
    }

    pub fn shell(&self) -> &[usize] {
        &self.shell
    }

    /// `out = H psi`.
    pub fn apply(&self, psi: &[C64], out: &mut [C64]) {
        for i in 0..self.len() {
            let mut acc = psi[i] * self.onsite[i];
            for &(k, j) in self.neighbours(i) {
                acc -= psi[k] * j;
            }
            out[i] = acc;
        }
    }

    /// Gershgorin bounds of the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.len() {
            let r: f64 = self.neighbours(i).iter().map(|n| n.1.abs()).sum();
            lo = lo.min(self.onsite[i] - r);
            hi = hi.max(self.onsite[i] + r);
        }
        (lo, hi)
    }

    pub fn energy(&self, psi: &[C64]) -> f64 {
        let mut h = vec![C64::new(0.0, 0.0); self.len()];
        self.apply(psi, &mut h);
        psi.iter().zip(&h).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn boundary_weight(&self, psi: &[C64]) -> f64 {
        self.shell.iter().map(|&i| psi[i].norm_sqr()).sum()
    }

    pub fn single_site(&self, x: i32, y: i32) -> Result<Vec<C64>> {
        let i = self
            .site_index(x, y)
            .ok_or_else(|| invalid("initial", format!("site ({x},{y}) outside the lattice")))?;
        let mut psi = vec![C64::new(0.0, 0.0); self.len()];
        psi[i] = C64::new(1.0, 0.0);
        Ok(psi)
    }

    /// Normalized Gaussian `exp(-r^2 / (2 w^2))` centred at the origin.
    pub fn gaussian(&self, width: f64) -> Result<Vec<C64>> {
        if !(width > 0.0) {
            return Err(invalid("width", "must be > 0"));
        }
        let mut psi: Vec<C64> = self
            .coords
            .iter()
            .map(|&(x, y)| {
                let r2 = (x * x + y * y) as f64;
                C64::new((-r2 / (2.0 * width * width)).exp(), 0.0)
            })
            .collect();
        let n = norm_sqr(&psi).sqrt();
        psi.iter_mut().for_each(|z| *z /= n);
        Ok(psi)
    }
}

pub fn norm_sqr(psi: &[C64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum()
}

#[derive(Debug, Clone)]
pub struct WavepacketState {
    pub time: f64,
    pub amplitudes: Vec<C64>,
}

/// `M2 = sum (x^2 + y^2) |psi|^2`, coordinates measured from the origin.
pub fn second_moment(lattice: &RealSpaceLattice, psi: &[C64]) -> f64 {
    lattice
        .coords
        .iter()
        .zip(psi)
        .map(|(&(x, y), z)| (x * x + y * y) as f64 * z.norm_sqr())
        .sum()
}

/// Variances along and across the unit vector `dir`.
pub fn directional_variances(lattice: &RealSpaceLattice, psi: &[C64], dir: (f64, f64)) -> (f64, f64) {
    let n = dir.0.hypot(dir.1);
    let (ux, uy) = (dir.0 / n, dir.1 / n);
    let (mut s1, mut s2, mut p1, mut p2, mut w) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&(x, y), z) in lattice.coords.iter().zip(psi) {
        let p = z.norm_sqr();
        let a = ux * x as f64 + uy * y as f64;
        let b = -uy * x as f64 + ux * y as f64;
        s1 += a * p;
        s2 += a * a * p;
        p1 += b * p;
        p2 += b * b * p;
        w += p;
    }
    (s2 / w - (s1 / w).powi(2), p2 / w - (p1 / w).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub time: f64,
    pub m2: f64,
    /// Variance along the field.
    pub var_parallel: f64,
    /// Variance across the field.
    pub var_perpendicular: f64,
    pub norm: f64,
    pub energy: f64,
    pub boundary: f64,
}

impl Moments {
    pub fn sigma(&self) -> f64 {
        self.m2.sqrt()
    }
}

pub fn moments(lattice: &RealSpaceLattice, psi: &[C64], time: f64) -> Moments {
    let (fx, fy) = lattice.field;
    let dir = if fx == 0.0 && fy == 0.0 { (0.0, 1.0) } else { (fx, fy) };
    let (par, perp) = directional_variances(lattice, psi, dir);
    Moments {
        time,
        m2: second_moment(lattice, psi),
        var_parallel: par,
        var_perpendicular: perp,
        norm: norm_sqr(psi),
        energy: lattice.energy(psi),
        boundary: lattice.boundary_weight(psi),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PropagationOptions {
    /// Largest `R dt` per Chebyshev step (R = spectral half width).
    pub max_phase_per_step: f64,
    /// Coefficient magnitude at which the expansion is truncated.
    pub series_tol: f64,
    pub boundary_tol: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            max_phase_per_step: 40.0,
            series_tol: 1e-16,
            boundary_tol: BOUNDARY_FLUX_TOL,
        }
    }
}

struct Chebyshev<'a> {
    lat: &'a RealSpaceLattice,
    centre: f64,
    half_width: f64,
    tol: f64,
    prev: Vec<C64>,
    cur: Vec<C64>,
    next: Vec<C64>,
}

impl<'a> Chebyshev<'a> {
    fn new(lat: &'a RealSpaceLattice, tol: f64) -> Self {
        let (lo, hi) = lat.spectral_bounds();
        let z = vec![C64::new(0.0, 0.0); lat.len()];
        Self {
            lat,
            centre: 0.5 * (lo + hi),
            half_width: (0.5 * (hi - lo)).max(1e-12),
            tol,
            prev: z.clone(),
            cur: z.clone(),
            next: z,
        }
    }

    /// `next = a (H - c) cur / R - b prev`.
    fn recur(&mut self, a: f64, b: f64) {
        let lat = self.lat;
        let (c, r) = (self.centre, self.half_width);
        let s = a / r;
        for i in 0..lat.len() {
            let mut acc = self.cur[i] * (lat.onsite[i] - c);
            for &(k, j) in lat.neighbours(i) {
                acc -= self.cur[k] * j;
            }
            self.next[i] = acc * s - self.prev[i] * b;
        }
    }

    /// Advances `psi` by `dt`.
    fn step(&mut self, psi: &mut [C64], dt: f64) {
        let x = self.half_width * dt;
        let mut kmax = (x.abs() as usize) + 20;
        let coeffs = loop {
            let j = bessel_j_sequence(x, kmax);
            if j[kmax].abs() < self.tol && j[kmax - 1].abs() < self.tol {
                break j;
            }
            kmax += 20;
        };
        let mi = C64::new(0.0, -1.0);
        let mut acc: Vec<C64> = psi.iter().map(|z| z * coeffs[0]).collect();
        // T0 = psi, T1 = H' psi
        self.cur.copy_from_slice(psi);
        self.recur(1.0, 0.0);
        std::mem::swap(&mut self.prev, &mut self.cur);
        std::mem::swap(&mut self.cur, &mut self.next);
        let mut ik = mi;
        for k in 1..=kmax {
            if k > 1 {
                // T_k = 2 H' T_{k-1} - T_{k-2}
                self.recur(2.0, 1.0);
                std::mem::swap(&mut self.prev, &mut self.cur);
                std::mem::swap(&mut self.cur, &mut self.next);
                ik *= mi;
            }
            let w = ik * (2.0 * coeffs[k]);
            for (a, t) in acc.iter_mut().zip(&self.cur) {
                *a += t * w;
            }
        }
        let phase = C64::from_polar(1.0, -self.centre * dt);
        for (z, a) in psi.iter_mut().zip(acc) {
            *z = a * phase;
        }
    }
}

/// Evolves `psi0` and calls `observe` at every time of `t_grid` (the first
/// entry is the start time).
pub fn propagate_with<F: FnMut(f64, &[C64]) -> Result<()>>(
    lattice: &RealSpaceLattice,
    psi0: &[C64],
    t_grid: &[f64],
    opts: &PropagationOptions,
    mut observe: F,
) -> Result<()> {
    if psi0.len() != lattice.len() {
        return Err(invalid("psi0", "length differs from the lattice"));
    }
    let n0 = norm_sqr(psi0);
    if (n0 - 1.0).abs() > 1e-12 {
        return Err(invalid("psi0", format!("not normalized (norm^2 = {n0})")));
    }
    if t_grid.is_empty() {
        return Ok(());
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("t_grid", "must be strictly increasing"));
    }
    let mut cheb = Chebyshev::new(lattice, opts.series_tol);
    let e0 = lattice.energy(psi0);
    let escale = e0.abs().max(lattice.params.hopping_scale()).max(lattice.params.delta.abs()).max(1e-300);
    let mut psi = psi0.to_vec();
    let dt_max = opts.max_phase_per_step / cheb.half_width;
    let mut t = t_grid[0];
    let check = |psi: &[C64], t: f64| -> Result<()> {
        let b = lattice.boundary_weight(psi);
        if b > opts.boundary_tol {
            return Err(Error::BoundaryFlux { time: t, flux: b });
        }
        Ok(())
    };
    observe(t, &psi)?;
    for &t1 in &t_grid[1..] {
        let nsteps = ((t1 - t) / dt_max).ceil().max(1.0) as usize;
        let dt = (t1 - t) / nsteps as f64;
        for _ in 0..nsteps {
            cheb.step(&mut psi, dt);
            check(&psi, t)?;
        }
        t = t1;
        let n = norm_sqr(&psi);
        if (n - 1.0).abs() > NORM_DRIFT_TOL {
            return Err(Error::Numerical(format!("norm drift {:e} at t = {t}", n - 1.0)));
        }
        let e = lattice.energy(&psi);
        if ((e - e0) / escale).abs() > ENERGY_DRIFT_TOL {
            return Err(Error::Numerical(format!(
                "energy drift {:e} at t = {t}",
                (e - e0) / escale
            )));
        }
        observe(t, &psi)?;
    }
    Ok(())
}

pub fn propagate(
    lattice: &RealSpaceLattice,
    psi0: &[C64],
    t_grid: &[f64],
    opts: &PropagationOptions,
) -> Result<Vec<WavepacketState>> {
    let mut out = Vec::with_capacity(t_grid.len());
    propagate_with(lattice, psi0, t_grid, opts, |t, psi| {
        out.push(WavepacketState {
            time: t,
            amplitudes: psi.to_vec(),
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn moment_trace(
    lattice: &RealSpaceLattice,
    psi0: &[C64],
    t_grid: &[f64],
    opts: &PropagationOptions,
) -> Result<Vec<Moments>> {
    let mut out = Vec::with_capacity(t_grid.len());
    propagate_with(lattice, psi0, t_grid, opts, |t, psi| {
        out.push(moments(lattice, psi, t));
        Ok(())
    })?;
    Ok(out)
}

/// Residual (relative to the mean of `sqrt M2` in the window) above which
/// a ballistic fit is flagged.
pub const BALLISTIC_RESIDUAL_TOL: f64 = 0.05;
/// Smallest `sigma(t_end) / sigma(t_mid)` accepted as ballistic growth.
pub const BALLISTIC_MIN_GROWTH: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallisticFit {
    /// Squared slope of `sqrt M2` against `t`.
    pub rate: f64,
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub relative_residual: f64,
    /// `sigma` at the end of the trace over `sigma` at the window start.
    pub growth: f64,
    pub flagged: bool,
}

/// Fits `sqrt M2 = s t + c` over the final half of the trace; `B = s^2`.
pub fn ballistic_rate(times: &[f64], m2: &[f64]) -> Result<BallisticFit> {
    if times.len() != m2.len() || times.len() < 4 {
        return Err(invalid("trace", "need at least four samples of equal length"));
    }
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let tmid = 0.5 * (t0 + t1);
    let (x, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(m2)
        .filter(|(t, _)| **t >= tmid)
        .map(|(t, m)| (*t, m.max(0.0).sqrt()))
        .unzip();
    if x.len() < 2 {
        return Err(invalid("trace", "final half holds fewer than two samples"));
    }
    let fit = linear_fit(&x, &y);
    let ym = y.iter().sum::<f64>() / y.len() as f64;
    let rel = if ym > 0.0 { fit.rms_residual / ym } else { 0.0 };
    let growth = if y[0] > 0.0 { y[y.len() - 1] / y[0] } else { f64::INFINITY };
    Ok(BallisticFit {
        rate: fit.slope * fit.slope,
        slope: fit.slope,
        intercept: fit.intercept,
        window: (x[0], x[x.len() - 1]),
        relative_residual: rel,
        growth,
        flagged: rel > BALLISTIC_RESIDUAL_TOL || growth < BALLISTIC_MIN_GROWTH,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ScanLattice {
    pub size: usize,
    pub domain: Domain,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub theta: f64,
    /// `sqrt M2` at each checkpoint; missing after a failure.
    pub sigma: Vec<Option<f64>>,
    pub error: Option<String>,
}

/// `sigma(t, theta)` from single-site runs at each orientation; failures
/// are recorded per row and the scan continues.
pub fn dispersion_scan(
    params: &LatticeParams,
    field: f64,
    thetas: &[f64],
    checkpoints: &[f64],
    lattice: ScanLattice,
    opts: &PropagationOptions,
) -> Vec<ScanRow> {
    thetas
        .par_iter()
        .map(|&theta| {
            let mut sigma = vec![None; checkpoints.len()];
            let mut run = || -> Result<()> {
                let fs = FieldSpec::angle(field, theta)?;
                let lat = RealSpaceLattice::build(params, &fs, lattice.size, lattice.domain)?;
                let psi0 = lat.single_site(0, 0)?;
                let mut grid = vec![0.0];
                grid.extend_from_slice(checkpoints);
                let mut k = 0usize;
                propagate_with(&lat, &psi0, &grid, opts, |_, psi| {
                    if k > 0 {
                        sigma[k - 1] = Some(second_moment(&lat, psi).sqrt());
                    }
                    k += 1;
                    Ok(())
                })
            };
            let error = run().err().map(|e| e.to_string());
            ScanRow { theta, sigma, error }
        })
        .collect()
}

/// Relative prominence a local maximum of `sigma(theta)` needs to count as
/// a peak.
pub const PEAK_PROMINENCE: f64 = 0.1;

/// Interior local maxima whose topographic prominence exceeds
/// `rel_prominence` times their height. Plateaus count once, at their left
/// end.
pub fn count_peaks(values: &[f64], rel_prominence: f64) -> usize {
    let n = values.len();
    let mut count = 0;
    let mut i = 1;
    while i + 1 < n {
        let v = values[i];
        if !(v > values[i - 1]) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < n && values[j + 1] == v {
            j += 1;
        }
        if j + 1 >= n || values[j + 1] > v {
            i = j + 1;
            continue;
        }
        let mut left = v;
        for &u in values[..i].iter().rev() {
            if u > v {
                break;
            }
            left = left.min(u);
        }
        let mut right = v;
        for &u in &values[j + 1..] {
            if u > v {
                break;
            }
            right = right.min(u);
        }
        if v - left.max(right) > rel_prominence * v.abs() {
            count += 1;
        }
        i = j + 1;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::bloch_offdiag;
    use approx::assert_abs_diff_eq;

    fn lat0(p: &LatticeParams, size: usize) -> RealSpaceLattice {
        RealSpaceLattice::with_components(p, 0.0, 0.0, size, Domain::Square).unwrap()
    }

    #[test]
    fn rejects_bad_sizes() {
        let p = LatticeParams::LATTICE_I;
        assert!(RealSpaceLattice::with_components(&p, 0.0, 0.0, 42, Domain::Square).is_err());
        assert!(RealSpaceLattice::with_components(&p, 0.0, 0.0, 39, Domain::Square).is_err());
        assert!(RealSpaceLattice::with_components(&p, 0.0, 0.0, 41, Domain::Strip { half_width: 5.0 }).is_err());
    }

    /// Bloch sum of the bonds of interior A sites against the two-band
    /// Hamiltonian; `k1`, `k2` are the phases across the primary lattice vectors.
    #[test]
    fn untilted_bonds_reproduce_bloch_hamiltonian() {
        let p = LatticeParams::new(0.3, 0.7, 0.2).unwrap();
        let lat = lat0(&p, 41);
        let a = crate::PRIMARY_PERIOD;
        for &(k1, k2) in &[(0.3, -1.1), (2.0, 0.4), (-2.7, 2.9)] {
            // xy wave vector with k.(1,1) = k1 and k.(-1,1) = k2
            let kx = 0.5 * (k1 - k2);
            let ky = 0.5 * (k1 + k2);
            for &(x0, y0) in &[(0, 0), (4, -2), (-6, 8)] {
                let i = lat.site_index(x0, y0).unwrap();
                assert!(is_a_site(x0, y0));
                let mut h12 = C64::new(0.0, 0.0);
                for &(k, j) in lat.neighbours(i) {
                    let (x, y) = lat.coords()[k];
                    // relative to the partner B at (x0, y0 + 1)
                    let rx = (x - x0) as f64;
                    let ry = (y - y0 - 1) as f64;
                    h12 += C64::from_polar(-j, kx * rx + ky * ry);
                }
                let want = bloch_offdiag(&p, k1 / a, k2 / a);
                assert!((h12 - want).norm() < 1e-12, "{h12} vs {want}");
                assert_eq!(lat.onsite()[i], 0.2);
                let b = lat.site_index(x0, y0 + 1).unwrap();
                assert_eq!(lat.onsite()[b], -0.2);
            }
        }
    }

    #[test]
    fn hermitian_bond_table() {
        let lat = RealSpaceLattice::with_components(&LatticeParams::LATTICE_I, 0.3, 0.5, 41, Domain::Square)
            .unwrap();
        for i in 0..lat.len() {
            for &(k, j) in lat.neighbours(i) {
                assert!(lat.neighbours(k).iter().any(|&(m, jj)| m == i && jj == j));
            }
        }
    }

    #[test]
    fn onsite_difference_along_field() {
        let fs = FieldSpec::new(0.8, crate::lattice::Orientation::from_beta(1.0 / 3.0)).unwrap();
        let p = LatticeParams::new(0.0, 0.0, 0.0).unwrap();
        let lat = RealSpaceLattice::build(&p, &fs, 41, Domain::Square).unwrap();
        let o = fs.as_rational().unwrap_or_else(|| crate::Rational::new(2, 1).unwrap());
        assert_eq!((o.r(), o.q()), (2, 1));
        let a = lat.onsite()[lat.site_index(0, 0).unwrap()];
        let b = lat.onsite()[lat.site_index(0, 1).unwrap()];
        let (r, q) = (2.0, 1.0);
        assert_abs_diff_eq!(b - a, o.d() * 0.8 * (r + q) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn second_moment_examples() {
        let lat = lat0(&LatticeParams::LATTICE_I, 41);
        let mut psi = lat.single_site(0, 0).unwrap();
        assert_eq!(second_moment(&lat, &psi), 0.0);
        psi.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        let s = 0.5f64.sqrt();
        psi[lat.site_index(0, 1).unwrap()] = C64::new(s, 0.0);
        psi[lat.site_index(0, -1).unwrap()] = C64::new(0.0, s);
        assert_abs_diff_eq!(second_moment(&lat, &psi), 1.0, epsilon = 1e-15);
        psi.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for (x, y) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            psi[lat.site_index(x, y).unwrap()] = C64::new(0.5, 0.0);
        }
        assert_abs_diff_eq!(second_moment(&lat, &psi), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn detuning_only_is_a_phase() {
        let p = LatticeParams::new(0.0, 0.0, 0.5).unwrap();
        let lat = RealSpaceLattice::with_components(&p, 0.3, 0.7, 41, Domain::Square).unwrap();
        let psi0 = lat.gaussian(2.0).unwrap();
        let out = propagate(&lat, &psi0, &[0.0, 3.0, 17.0], &PropagationOptions::default()).unwrap();
        let m0 = second_moment(&lat, &psi0);
        for st in &out {
            for (i, z) in st.amplitudes.iter().enumerate() {
                assert_abs_diff_eq!(z.norm(), psi0[i].norm(), epsilon = 1e-12);
                let want = psi0[i] * C64::from_polar(1.0, -lat.onsite()[i] * st.time);
                assert!((z - want).norm() < 1e-11);
            }
            assert_abs_diff_eq!(second_moment(&lat, &st.amplitudes), m0, epsilon = 1e-10);
        }
    }

    /// Free propagation against the exact two-band evolution of a plane wave.
    #[test]
    fn chebyshev_matches_dense_exponential() {
        use nalgebra::DMatrix;
        let p = LatticeParams::LATTICE_I;
        let lat = RealSpaceLattice::with_components(&p, 0.2, -0.1, 41, Domain::Strip { half_width: 3.0 })
            .unwrap();
        let n = lat.len();
        let mut h = DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = C64::new(lat.onsite()[i], 0.0);
            for &(k, j) in lat.neighbours(i) {
                h[(i, k)] = C64::new(-j, 0.0);
            }
        }
        let eig = nalgebra::SymmetricEigen::new(h);
        let psi0 = lat.gaussian(1.5).unwrap();
        let t = 7.3;
        let v = &eig.eigenvectors;
        let c = v.adjoint() * nalgebra::DVector::from_vec(psi0.clone());
        let ct = nalgebra::DVector::from_iterator(
            n,
            c.iter().zip(eig.eigenvalues.iter()).map(|(a, e)| a * C64::from_polar(1.0, -e * t)),
        );
        let want = v * ct;
        let opts = PropagationOptions {
            boundary_tol: 1.0,
            ..Default::default()
        };
        let got = propagate(&lat, &psi0, &[0.0, t], &opts).unwrap();
        let err: f64 = got[1].amplitudes.iter().zip(want.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-11, "{err}");
    }

    #[test]
    fn zero_field_isotropy() {
        let p = LatticeParams::new(0.4, 0.4, 0.0).unwrap();
        let lat = lat0(&p, 41);
        let psi0 = lat.single_site(0, 0).unwrap();
        let tr = moment_trace(&lat, &psi0, &[0.0, 2.0, 5.0], &PropagationOptions::default()).unwrap();
        for m in &tr {
            // 90 degree rotation symmetry: <x^2> = <y^2>
            let (vx, vy) = (m.var_perpendicular, m.var_parallel);
            assert!((vx - vy).abs() < 1e-8, "{vx} vs {vy}");
        }
    }

    #[test]
    fn boundary_flux_aborts() {
        let p = LatticeParams::new(1.0, 1.0, 0.0).unwrap();
        let lat = lat0(&p, 41);
        let psi0 = lat.single_site(0, 0).unwrap();
        let r = moment_trace(&lat, &psi0, &[0.0, 30.0], &PropagationOptions::default());
        assert!(matches!(r, Err(Error::BoundaryFlux { .. })));
    }

    #[test]
    fn ballistic_fit_synthetic() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.5).collect();
        let m2: Vec<f64> = t.iter().map(|t| 3.0 * t * t).collect();
        let f = ballistic_rate(&t, &m2).unwrap();
        assert_abs_diff_eq!(f.rate, 3.0, epsilon = 1e-12);
        assert!(!f.flagged);
        let sat: Vec<f64> = t.iter().map(|t| 4.0 * (1.0 - (-t).exp())).collect();
        assert!(ballistic_rate(&t, &sat).unwrap().flagged);
    }

    #[test]
    fn peak_counting() {
        assert_eq!(count_peaks(&[0.0, 1.0, 0.0, 2.0, 0.0], 0.1), 2);
        assert_eq!(count_peaks(&[3.0, 1.0, 0.0], 0.1), 0);
        assert_eq!(count_peaks(&[0.0, 1.0, 1.0, 0.0], 0.1), 1);
        // a shoulder on a larger peak is not prominent
        assert_eq!(count_peaks(&[0.0, 10.0, 9.9, 10.5, 0.0], 0.1), 1);
        assert_eq!(count_peaks(&[0.0, 10.0, 5.0, 10.0, 0.0], 0.1), 2);
        assert_eq!(count_peaks(&[1.0, 2.0, 3.0], 0.0), 0);
    }
}
