//! Band sweeps over the transverse quasimomentum, spreading rates and
//! Wannier-Stark fans.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chain::{central_bands, circular_diff, ChainOptions, WsChain};
use super::monodromy::monodromy_spectrum;
use crate::error::{invalid, Error, Result};
use crate::lattice::{LatticeParams, Rational};
use crate::magnus::MagnusOptions;

pub const DEFAULT_KAPPA_POINTS: usize = 256;

/// Ladder tag. `Minus` is the ladder with flat-limit offset `-dF(r+q)/4 + delta`
/// (sublattice A), `Plus` the one with `+dF(r+q)/4 - delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ladder {
    Minus,
    Plus,
}

impl Ladder {
    pub fn as_str(&self) -> &'static str {
        match self {
            Ladder::Minus => "minus",
            Ladder::Plus => "plus",
        }
    }

    /// Flat-band offset of the ladder.
    pub fn offset(&self, params: &LatticeParams, field: f64, o: Rational) -> f64 {
        let s = o.d() * field * (o.r() + o.q()) as f64 / 4.0;
        match self {
            Ladder::Minus => -s + params.delta,
            Ladder::Plus => s - params.delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMethod {
    Chain,
    Monodromy,
}

impl std::str::FromStr for SweepMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(Self::Chain),
            "monodromy" => Ok(Self::Monodromy),
            _ => Err(invalid("method", format!("unknown method `{s}` (chain|monodromy)"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub method: SweepMethod,
    pub chain: ChainOptions,
    pub magnus: MagnusOptions,
    /// Relative step (in units of the band period) for finite-difference velocities.
    pub fd_step: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            method: SweepMethod::Chain,
            chain: ChainOptions::default(),
            magnus: MagnusOptions::default(),
            fd_step: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WsBand {
    pub ladder: Ladder,
    pub kappa: Vec<f64>,
    /// Continuous (unwrapped) energies.
    pub energy: Vec<f64>,
    pub velocity: Vec<f64>,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BandSweep {
    pub orientation: Rational,
    pub field: f64,
    pub ladder_step: f64,
    pub method: SweepMethod,
    pub bands: [WsBand; 2],
    /// Grid indices where the continuation jump exceeded three median steps.
    pub ambiguous: Vec<usize>,
    /// Grid indices where the two levels were degenerate.
    pub degenerate: Vec<usize>,
}

/// Period of the band dispersion, `2 pi / (N d)`.
pub fn band_period(o: Rational) -> f64 {
    2.0 * PI / (o.n() as f64 * o.d())
}

/// Uniform grid over one band period, or over the full `2 pi / d` window
/// (`points` per band period in either case).
pub fn kappa_grid(o: Rational, points: usize, full_window: bool) -> Vec<f64> {
    let periods = if full_window { o.n() as usize } else { 1 };
    let total = points * periods;
    let h = band_period(o) / points as f64;
    (0..total).map(|k| k as f64 * h).collect()
}

struct Sample {
    energies: [f64; 2],
    velocities: [f64; 2],
    degenerate: bool,
}

fn sample(
    params: &LatticeParams,
    field: f64,
    o: Rational,
    kappa: f64,
    opts: &SweepOptions,
) -> Result<Sample> {
    let step = o.d() * field;
    match opts.method {
        SweepMethod::Chain => {
            let c = central_bands(params, field, o, kappa, &opts.chain)?;
            Ok(Sample {
                energies: c.folded(),
                velocities: [c.levels[0].velocity, c.levels[1].velocity],
                degenerate: circular_diff(c.levels[0].folded, c.levels[1].folded, step).abs()
                    < super::monodromy::DEGENERACY_TOL * step,
            })
        }
        SweepMethod::Monodromy => {
            let m = monodromy_spectrum(params, field, o, kappa, &opts.magnus)?;
            let h = opts.fd_step * band_period(o);
            let mp = monodromy_spectrum(params, field, o, kappa + h, &opts.magnus)?;
            let mm = monodromy_spectrum(params, field, o, kappa - h, &opts.magnus)?;
            let mut v = [0.0; 2];
            for (i, vi) in v.iter_mut().enumerate() {
                let e = m.energies[i];
                let near = |xs: [f64; 2]| {
                    let a = circular_diff(xs[0], e, step);
                    let b = circular_diff(xs[1], e, step);
                    if a.abs() <= b.abs() {
                        a
                    } else {
                        b
                    }
                };
                *vi = (near(mp.energies) - near(mm.energies)) / (2.0 * h);
            }
            Ok(Sample {
                energies: m.energies,
                velocities: v,
                degenerate: m.degenerate,
            })
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs[xs.len() / 2]
}

/// Sweeps both ladders over `kappa_grid` and stitches the per-point level
/// pairs into continuous bands.
pub fn band_sweep(
    params: &LatticeParams,
    field: f64,
    o: Rational,
    kappa_grid: &[f64],
    opts: &SweepOptions,
) -> Result<BandSweep> {
    if kappa_grid.len() < 2 {
        return Err(invalid("kappa_grid", "need at least two points"));
    }
    let step = o.d() * field;
    let samples: Vec<Sample> = kappa_grid
        .par_iter()
        .map(|&k| sample(params, field, o, k, opts))
        .collect::<Result<_>>()?;

    // start: match each level to the nearest flat-limit offset
    let offsets = [Ladder::Minus, Ladder::Plus].map(|l| l.offset(params, field, o));
    let s0 = &samples[0];
    let cost = |a: usize, b: usize| {
        circular_diff(s0.energies[a], offsets[0], step).abs()
            + circular_diff(s0.energies[b], offsets[1], step).abs()
    };
    let first = if cost(0, 1) <= cost(1, 0) { [0, 1] } else { [1, 0] };

    let n = kappa_grid.len();
    let mut energy = [vec![0.0; n], vec![0.0; n]];
    let mut velocity = [vec![0.0; n], vec![0.0; n]];
    let mut jumps = Vec::with_capacity(2 * n);
    for b in 0..2 {
        energy[b][0] = s0.energies[first[b]];
        velocity[b][0] = s0.velocities[first[b]];
    }
    for k in 1..n {
        let s = &samples[k];
        let predict = |b: usize| {
            if k >= 2 {
                2.0 * energy[b][k - 1] - energy[b][k - 2]
            } else {
                energy[b][k - 1]
            }
        };
        let p = [predict(0), predict(1)];
        let c_same = circular_diff(s.energies[0], p[0], step).abs()
            + circular_diff(s.energies[1], p[1], step).abs();
        let c_swap = circular_diff(s.energies[1], p[0], step).abs()
            + circular_diff(s.energies[0], p[1], step).abs();
        let idx = if c_same <= c_swap { [0, 1] } else { [1, 0] };
        for b in 0..2 {
            let prev = energy[b][k - 1];
            let jump = circular_diff(s.energies[idx[b]], prev, step);
            energy[b][k] = prev + jump;
            velocity[b][k] = s.velocities[idx[b]];
            jumps.push((k, jump.abs()));
        }
    }
    let med = median(jumps.iter().map(|j| j.1).collect());
    let thresh = (3.0 * med).max(1e-9 * step);
    let mut ambiguous: Vec<usize> = jumps.iter().filter(|j| j.1 > thresh).map(|j| j.0).collect();
    ambiguous.dedup();
    let degenerate = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.degenerate)
        .map(|(i, _)| i)
        .collect();

    let mk = |b: usize, ladder: Ladder| {
        let e = energy[b].clone();
        let max = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = e.iter().cloned().fold(f64::INFINITY, f64::min);
        WsBand {
            ladder,
            kappa: kappa_grid.to_vec(),
            energy: e,
            velocity: velocity[b].clone(),
            bandwidth: max - min,
        }
    };
    let bands = [mk(0, Ladder::Minus), mk(1, Ladder::Plus)];
    Ok(BandSweep {
        orientation: o,
        field,
        ladder_step: step,
        method: opts.method,
        bands,
        ambiguous,
        degenerate,
    })
}

/// Checks that `grid` is uniform with spacing `h` and spans a whole number of
/// `period`s; returns `h`.
pub fn check_periodic_grid(grid: &[f64], period: f64) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::NonUniformGrid("need at least two points".into()));
    }
    let h = grid[1] - grid[0];
    if h <= 0.0 {
        return Err(Error::NonUniformGrid("grid must increase".into()));
    }
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h {
            return Err(Error::NonUniformGrid(format!(
                "spacing {} differs from {h}",
                w[1] - w[0]
            )));
        }
    }
    let periods = h * grid.len() as f64 / period;
    if (periods - periods.round()).abs() > 1e-9 * periods.max(1.0) || periods.round() < 1.0 {
        return Err(Error::NonUniformGrid(format!(
            "grid covers {periods} periods, expected a whole number"
        )));
    }
    Ok(h)
}

/// `A = (1/2 pi) int v^2 d(d kappa)` by the periodic trapezoid rule on a
/// uniform grid covering whole periods.
pub fn spreading_rate(grid: &[f64], velocity: &[f64], period: f64) -> Result<f64> {
    if grid.len() != velocity.len() {
        return Err(invalid("velocity", "length differs from the grid"));
    }
    check_periodic_grid(grid, period)?;
    Ok(velocity.iter().map(|v| v * v).sum::<f64>() / velocity.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpreadingRate {
    pub minus: f64,
    pub plus: f64,
    pub mean: f64,
}

pub fn spreading_rate_a(sweep: &BandSweep) -> Result<SpreadingRate> {
    let period = band_period(sweep.orientation);
    let a = sweep
        .bands
        .each_ref()
        .map(|b| spreading_rate(&b.kappa, &b.velocity, period));
    let [m, p] = a;
    let (m, p) = (m?, p?);
    Ok(SpreadingRate {
        minus: m,
        plus: p,
        mean: 0.5 * (m + p),
    })
}

/// Central-window levels of the chain at one field value.
#[derive(Debug, Clone, Serialize)]
pub struct FanColumn {
    pub field: f64,
    pub energies: Vec<f64>,
    /// Folded level pair.
    pub folded: [f64; 2],
}

/// Wannier-Stark fan: levels with `|E| <= window` of well-localized central
/// states, reported raw per field value.
pub fn ws_fan(
    params: &LatticeParams,
    o: Rational,
    kappa: f64,
    fields: &[f64],
    window: f64,
    opts: &ChainOptions,
) -> Result<Vec<FanColumn>> {
    fields
        .par_iter()
        .map(|&f| {
            let lv = central_bands(params, f, o, kappa, opts)?;
            // the window must fit inside the central third of the chain
            let mut cells = lv.cells;
            while (cells as f64 / 3.0) * o.d() * f < 2.0 * window + 4.0 * params.hopping_scale() {
                cells *= 2;
            }
            let chain = WsChain::build(params, f, o, kappa, cells)?;
            let energies = chain
                .central_states(opts.boundary_tol)
                .into_iter()
                .map(|s| s.energy)
                .filter(|e| e.abs() <= window)
                .collect();
            Ok(FanColumn {
                field: f,
                energies,
                folded: lv.folded(),
            })
        })
        .collect()
}

/// Sizes of the avoided crossings in a fan: local minima over the field grid
/// of the folded level separation (circular, in energy units).
pub fn fan_gaps(fan: &[FanColumn], o: Rational) -> Vec<f64> {
    let sep: Vec<f64> = fan
        .iter()
        .map(|c| circular_diff(c.folded[0], c.folded[1], o.d() * c.field).abs())
        .collect();
    (1..sep.len().saturating_sub(1))
        .filter(|&i| sep[i] < sep[i - 1] && sep[i] <= sep[i + 1])
        .map(|i| sep[i])
        .collect()
}

/// Median avoided-crossing size of a fan.
pub fn fan_gap_statistic(fan: &[FanColumn], o: Rational) -> f64 {
    median(fan_gaps(fan, o))
}

/// Folds the band energies and compares each grid point with the point one
/// band period later; returns the largest circular mismatch.
pub fn periodicity_error(sweep: &BandSweep) -> f64 {
    let n = sweep.bands[0].kappa.len();
    let n_per = n / sweep.orientation.n() as usize;
    let step = sweep.ladder_step;
    let mut worst: f64 = 0.0;
    if n_per == 0 || n_per >= n {
        return 0.0;
    }
    for k in 0..n - n_per {
        for b in &sweep.bands {
            let e0 = b.energy[k];
            // the partner may sit on either ladder after a full period
            let d = sweep
                .bands
                .iter()
                .map(|c| circular_diff(c.energy[k + n_per], e0, step).abs())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    worst
}
