//! Strong- and weak-field asymptotics of the Wannier-Stark bands.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lattice::{bloch_offdiag, bloch_offdiag_gradient, LatticeParams, Rational};
use crate::linalg::eigh2;
use crate::special::bessel_j_sequence;
use crate::stats::{linear_fit, log_spaced, LineFit};
use crate::ws::chain::fold;
use crate::ws::monodromy::generator;
use crate::ws::sweep::{band_period, band_sweep, check_periodic_grid, kappa_grid, SweepOptions, WsBand};
use crate::C64;

// ---------------------------------------------------------------- strong field

#[derive(Debug, Clone, Copy)]
pub struct StrongFieldOptions {
    pub f_min: f64,
    pub f_max: f64,
    pub points: usize,
    pub kappa_points: usize,
    /// Largest rms residual of the log-log fit accepted for rounding.
    pub max_residual: f64,
}

impl Default for StrongFieldOptions {
    fn default() -> Self {
        Self {
            f_min: 10.0,
            f_max: 100.0,
            points: 8,
            kappa_points: 32,
            max_residual: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StrongFieldLaw {
    /// Rounded exponent; `None` when the fit was flagged.
    pub nu: Option<i64>,
    /// `-slope` of `log Delta` against `log F`.
    pub raw_exponent: f64,
    /// `Delta ~ prefactor / F^nu`.
    pub prefactor: f64,
    pub fit: LineFit,
    pub fields: Vec<f64>,
    /// Bandwidth (largest of the two ladders) at each field.
    pub bandwidths: Vec<f64>,
    pub flagged: bool,
}

pub fn strong_field_exponent(
    params: &LatticeParams,
    o: Rational,
    opts: &StrongFieldOptions,
) -> Result<StrongFieldLaw> {
    if !(opts.f_min > 0.0 && opts.f_max > opts.f_min && opts.points >= 3) {
        return Err(invalid("F-range", "need 0 < F_min < F_max and at least 3 points"));
    }
    let fields = log_spaced(opts.f_min, opts.f_max, opts.points);
    let grid = kappa_grid(o, opts.kappa_points, false);
    let bandwidths: Vec<f64> = fields
        .iter()
        .map(|&f| {
            let s = band_sweep(params, f, o, &grid, &SweepOptions::default())?;
            Ok(s.bands[0].bandwidth.max(s.bands[1].bandwidth))
        })
        .collect::<Result<_>>()?;
    if bandwidths.iter().any(|&b| b <= 0.0) {
        return Err(Error::Numerical("zero bandwidth: exponent undefined".into()));
    }
    let lx: Vec<f64> = fields.iter().map(|f| f.ln()).collect();
    let ly: Vec<f64> = bandwidths.iter().map(|b| b.ln()).collect();
    let fit = linear_fit(&lx, &ly);
    let flagged = fit.rms_residual > opts.max_residual;
    let raw = -fit.slope;
    Ok(StrongFieldLaw {
        nu: (!flagged).then(|| raw.round() as i64),
        raw_exponent: raw,
        prefactor: fit.intercept.exp(),
        fit,
        fields,
        bandwidths,
        flagged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CosineFit {
    pub mean: f64,
    /// Amplitude of the fundamental `Delta cos(N d kappa + phi)`.
    pub amplitude: f64,
    pub phase: f64,
    /// Share of the non-constant spectral power carried by the fundamental.
    pub harmonic_purity: f64,
    /// Share carried by the second harmonic.
    pub second_harmonic: f64,
    /// Rms residual of the single-cosine fit.
    pub residual_rms: f64,
    pub residual_max: f64,
}

/// Fourier analysis of a band in harmonics of its period `2 pi / (N d)`.
pub fn cosine_shape_check(band: &WsBand, o: Rational) -> Result<CosineFit> {
    let period = band_period(o);
    check_periodic_grid(&band.kappa, period)?;
    let n = band.energy.len();
    let w = 2.0 * PI / period;
    let coeff = |m: usize| -> C64 {
        band.kappa
            .iter()
            .zip(&band.energy)
            .map(|(&k, &e)| C64::from_polar(e, -(m as f64) * w * k))
            .sum::<C64>()
            / n as f64
    };
    let mean = coeff(0).re;
    let c1 = coeff(1);
    let mut total = 0.0;
    let mut powers = Vec::new();
    for m in 1..=n / 2 {
        let p = coeff(m).norm_sqr();
        powers.push(p);
        total += p;
    }
    let (amplitude, phase) = (2.0 * c1.norm(), c1.arg());
    let mut ss = 0.0;
    let mut worst: f64 = 0.0;
    for (&k, &e) in band.kappa.iter().zip(&band.energy) {
        let r = e - mean - amplitude * (w * k + phase).cos();
        ss += r * r;
        worst = worst.max(r.abs());
    }
    let (purity, second) = if total > 0.0 {
        (powers[0] / total, powers.get(1).copied().unwrap_or(0.0) / total)
    } else {
        (1.0, 0.0)
    };
    Ok(CosineFit {
        mean,
        amplitude,
        phase,
        harmonic_purity: purity,
        second_harmonic: second,
        residual_rms: (ss / n as f64).sqrt(),
        residual_max: worst,
    })
}

// ------------------------------------------------------ averaging (BM) formula

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BmTerm {
    pub m: i64,
    pub n: i64,
    pub coefficient: f64,
    /// Cosine argument per unit `kappa d`.
    pub harmonic: f64,
}

/// Bessel arguments `(z1, z2)` of the averaging formula.
pub fn bm_arguments(params: &LatticeParams, field: f64, o: Rational) -> Result<(f64, f64)> {
    let (r, q) = (o.r(), o.q());
    if r == q {
        return Err(Error::UnsupportedOrientation {
            r,
            q,
            reason: "r = q makes z1 singular".into(),
        });
    }
    if r + q == 0 {
        return Err(Error::UnsupportedOrientation {
            r,
            q,
            reason: "r + q = 0 makes z2 singular".into(),
        });
    }
    if !(field > 0.0) {
        return Err(invalid("F", "must be > 0"));
    }
    let d = o.d();
    let z1 = 8.0 * params.j1 / (field * d * (r - q) as f64);
    let z2 = 4.0 * (params.j1 + params.j2) / (field * d * (r + q) as f64);
    Ok((z1, z2))
}

/// Terms `(J2 - J1) J_m(z1) J_n(z2) cos[kappa d N (1+n)/(r-q)]` with
/// `(r-q) m = -(r+q)(1+n)` and `|m|, |n| <= cutoff`.
pub fn bm_terms(
    params: &LatticeParams,
    field: f64,
    o: Rational,
    cutoff: usize,
) -> Result<Vec<BmTerm>> {
    let (z1, z2) = bm_arguments(params, field, o)?;
    let (r, q) = (o.r(), o.q());
    let seq1 = bessel_j_sequence(z1, cutoff);
    let seq2 = bessel_j_sequence(z2, cutoff);
    let bj = |seq: &[f64], k: i64| {
        let v = seq[k.unsigned_abs() as usize];
        if k < 0 && k % 2 != 0 {
            -v
        } else {
            v
        }
    };
    let c = cutoff as i64;
    let mut terms = Vec::new();
    for n in -c..=c {
        let rhs = -(r + q) * (1 + n);
        if rhs % (r - q) != 0 {
            continue;
        }
        let m = rhs / (r - q);
        if m.abs() > c {
            continue;
        }
        terms.push(BmTerm {
            m,
            n,
            coefficient: (params.j2 - params.j1) * bj(&seq1, m) * bj(&seq2, n),
            harmonic: o.n() as f64 * (1 + n) as f64 / (r - q) as f64,
        });
    }
    Ok(terms)
}

pub fn bm_correction(
    params: &LatticeParams,
    field: f64,
    o: Rational,
    kappa: f64,
    cutoff: usize,
) -> Result<f64> {
    Ok(bm_eval(&bm_terms(params, field, o, cutoff)?, kappa * o.d()))
}

fn bm_eval(terms: &[BmTerm], kd: f64) -> f64 {
    terms.iter().map(|t| t.coefficient * (t.harmonic * kd).cos()).sum()
}

/// Averaging-formula bands `offset -/+ E(kappa)` folded into the ladder
/// window, for the minus and plus ladders.
pub fn bm_bands(
    params: &LatticeParams,
    field: f64,
    o: Rational,
    kappa: &[f64],
    cutoff: usize,
) -> Result<[Vec<f64>; 2]> {
    let terms = bm_terms(params, field, o, cutoff)?;
    let step = o.d() * field;
    let s = step * (o.r() + o.q()) as f64 / 4.0;
    let minus = kappa
        .iter()
        .map(|k| fold(-s + params.delta + bm_eval(&terms, k * o.d()), step))
        .collect();
    let plus = kappa
        .iter()
        .map(|k| fold(s - params.delta - bm_eval(&terms, k * o.d()), step))
        .collect();
    Ok([minus, plus])
}

// ---------------------------------------------------------------- weak field

#[derive(Debug, Clone, Copy)]
pub struct AdiabaticOptions {
    pub theta_points: usize,
    /// Start of the theta loop.
    pub theta0: f64,
}

impl Default for AdiabaticOptions {
    fn default() -> Self {
        Self {
            theta_points: 512,
            theta0: 0.0,
        }
    }
}

/// Adiabatic Wannier-Stark spectrum `E_{n,+-} = C_+- + dF (n + c_+-)`.
/// Index 0 is the lower (`-`) branch, index 1 the upper (`+`) one.
#[derive(Debug, Clone, Serialize)]
pub struct AdiabaticBand {
    pub kappa: Vec<f64>,
    /// Dynamical-phase energies.
    pub dynamical: [Vec<f64>; 2],
    /// Geometric phases in `[0, 1)`.
    pub geometric: [Vec<f64>; 2],
    /// Folded `E_{0,+-}`.
    pub energies: [Vec<f64>; 2],
    /// Smallest splitting of the instantaneous eigenvalues over the loop.
    pub min_gap: f64,
    /// Largest distance of `c_- + c_+` from an integer.
    pub phase_sum_defect: f64,
}

/// Energy-sign instantaneous Hamiltonian on the theta loop: the E = 0
/// generator with its sign flipped and scaled back to energy units.
fn loop_hamiltonian(
    params: &LatticeParams,
    field: f64,
    o: Rational,
    kappa: f64,
    theta: f64,
) -> nalgebra::Matrix2<C64> {
    generator(params, field, o, kappa, theta) * C64::new(-o.d() * field, 0.0)
}

/// Dynamical phases, Berry phases (fractions of a turn) and minimal gap at one kappa.
pub fn adiabatic_point(
    params: &LatticeParams,
    field: f64,
    o: Rational,
    kappa: f64,
    opts: &AdiabaticOptions,
) -> Result<([f64; 2], [f64; 2], f64)> {
    let m = opts.theta_points;
    if m < 8 {
        return Err(invalid("theta_points", "need at least 8"));
    }
    let h = 2.0 * PI / m as f64;
    let eig: Vec<_> = (0..m)
        .map(|k| eigh2(&loop_hamiltonian(params, field, o, kappa, opts.theta0 + k as f64 * h)))
        .collect();
    let mut min_gap = f64::INFINITY;
    let mut gap_at = opts.theta0;
    let mut dyn_ = [0.0; 2];
    for (k, e) in eig.iter().enumerate() {
        if e.gap() < min_gap {
            min_gap = e.gap();
            gap_at = opts.theta0 + k as f64 * h;
        }
        dyn_[0] += e.values[0];
        dyn_[1] += e.values[1];
    }
    let scale = params.hopping_scale() + params.delta.abs() + o.d() * field;
    if min_gap < 1e-9 * scale {
        return Err(Error::Degenerate {
            theta: gap_at,
            gap: min_gap,
        });
    }
    let mut geo = [0.0; 2];
    for (b, g) in geo.iter_mut().enumerate() {
        let mut w = C64::new(1.0, 0.0);
        for k in 0..m {
            let next = &eig[(k + 1) % m].vectors[b];
            w *= eig[k].vectors[b].dotc(next);
        }
        *g = (-w.arg() / (2.0 * PI)).rem_euclid(1.0);
    }
    Ok(([dyn_[0] / m as f64, dyn_[1] / m as f64], geo, min_gap))
}

pub fn adiabatic_bands(
    params: &LatticeParams,
    field: f64,
    o: Rational,
    kappa: &[f64],
    opts: &AdiabaticOptions,
) -> Result<AdiabaticBand> {
    let pts: Vec<_> = kappa
        .par_iter()
        .map(|&k| adiabatic_point(params, field, o, k, opts))
        .collect::<Result<_>>()?;
    let step = o.d() * field;
    let mut out = AdiabaticBand {
        kappa: kappa.to_vec(),
        dynamical: [vec![], vec![]],
        geometric: [vec![], vec![]],
        energies: [vec![], vec![]],
        min_gap: f64::INFINITY,
        phase_sum_defect: 0.0,
    };
    for (c, g, gap) in pts {
        for b in 0..2 {
            out.dynamical[b].push(c[b]);
            out.geometric[b].push(g[b]);
            out.energies[b].push(fold(c[b] + step * g[b], step));
        }
        out.min_gap = out.min_gap.min(gap);
        let s = g[0] + g[1];
        out.phase_sum_defect = out.phase_sum_defect.max((s - s.round()).abs());
    }
    Ok(out)
}

/// Points of the Bloch zone on the line through `kappa` along the field,
/// `a k = theta (r, q) + d kappa (-q, r)`.
fn line_point(o: Rational, kappa: f64, theta: f64) -> (f64, f64) {
    let (r, q, d) = (o.r() as f64, o.q() as f64, o.d());
    let a = crate::PRIMARY_PERIOD;
    ((r * theta - q * d * kappa) / a, (q * theta + r * d * kappa) / a)
}

pub const DEFAULT_LINE_POINTS: usize = 512;

/// Average of the upper Bloch band along the field line through `kappa`;
/// the lower band average is its negative.
pub fn limiting_dispersion(params: &LatticeParams, o: Rational, kappa: f64, points: usize) -> f64 {
    let h = 2.0 * PI / points as f64;
    (0..points)
        .map(|k| {
            let (kx, ky) = line_point(o, kappa, k as f64 * h);
            (params.delta * params.delta + bloch_offdiag(params, kx, ky).norm_sqr()).sqrt()
        })
        .sum::<f64>()
        / points as f64
}

/// `d/dkappa` of [`limiting_dispersion`].
pub fn limiting_velocity(params: &LatticeParams, o: Rational, kappa: f64, points: usize) -> f64 {
    let (r, q, d) = (o.r() as f64, o.q() as f64, o.d());
    let a = crate::PRIMARY_PERIOD;
    let h = 2.0 * PI / points as f64;
    (0..points)
        .map(|k| {
            let (kx, ky) = line_point(o, kappa, k as f64 * h);
            let f = bloch_offdiag(params, kx, ky);
            let (gx, gy) = bloch_offdiag_gradient(params, kx, ky);
            let df = gx * (-q * d / a) + gy * (r * d / a);
            let e = (params.delta * params.delta + f.norm_sqr()).sqrt();
            if e == 0.0 {
                0.0
            } else {
                (f.conj() * df).re / e
            }
        })
        .sum::<f64>()
        / points as f64
}

/// Spreading rate of the limiting dispersion over one band period.
pub fn limiting_a(params: &LatticeParams, o: Rational, kappa_points: usize, line_points: usize) -> f64 {
    kappa_grid(o, kappa_points, false)
        .iter()
        .map(|&k| limiting_velocity(params, o, k, line_points).powi(2))
        .sum::<f64>()
        / kappa_points as f64
}
