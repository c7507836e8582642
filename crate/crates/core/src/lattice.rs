//! Lattice model, field geometry and the Bloch problem.
//!
//! Real-space picture: sites `(x, y)` of the unit square lattice, sublattice A
//! when `x + y` is even. An A site couples to the B site above it with `J2`
//! and to the three other B neighbours with `J1`. The unit cell is the
//! (A, B-above) pair; the primary translation vectors are `(1, 1)` and
//! `(-1, 1)`, period `a = sqrt(2)`.
//!
//! Quasimomenta passed to [`bloch_hamiltonian`] are components along those
//! primary axes, and orientation pairs `(r, q)` are field components along the
//! same axes.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{eigh2, Eigh2};
use crate::{C64, PRIMARY_PERIOD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub j1: f64,
    pub j2: f64,
    pub delta: f64,
}

impl LatticeParams {
    /// Gapped lattice: `J1 = J2 = 0.4`, `delta = 0.5`.
    pub const LATTICE_I: LatticeParams = LatticeParams {
        j1: 0.4,
        j2: 0.4,
        delta: 0.5,
    };

    /// Lattice with Dirac cones: `J1 = 0.5`, `J2 = delta = 0`.
    pub const LATTICE_II: LatticeParams = LatticeParams {
        j1: 0.5,
        j2: 0.0,
        delta: 0.0,
    };

    pub fn new(j1: f64, j2: f64, delta: f64) -> Result<Self> {
        if !(j1.is_finite() && j1 >= 0.0) {
            return Err(invalid("j1", format!("must be finite and >= 0, got {j1}")));
        }
        if !(j2.is_finite() && j2 >= 0.0) {
            return Err(invalid("j2", format!("must be finite and >= 0, got {j2}")));
        }
        if !delta.is_finite() {
            return Err(invalid("delta", "must be finite"));
        }
        Ok(Self { j1, j2, delta })
    }

    /// Looks up a named preset (`"i"`, `"ii"`, `"lattice-i"`, `"lattice-ii"`).
    pub fn preset(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "i" | "1" | "lattice-i" => Some(Self::LATTICE_I),
            "ii" | "2" | "lattice-ii" => Some(Self::LATTICE_II),
            _ => None,
        }
    }

    /// `J1 + J2`, the scale that sets Wannier-Stark localization lengths.
    pub fn hopping_scale(&self) -> f64 {
        self.j1 + self.j2
    }

    pub fn is_flat(&self) -> bool {
        self.j1 == 0.0 && self.j2 == 0.0
    }
}

/// Rational field orientation `F~x / F~y = r / q` in the primary-axes frame,
/// stored canonically: coprime, `q >= 0`, and `r > 0` when `q = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(i64, i64)", into = "(i64, i64)")]
pub struct Rational {
    r: i64,
    q: i64,
}

impl TryFrom<(i64, i64)> for Rational {
    type Error = Error;
    fn try_from((r, q): (i64, i64)) -> Result<Self> {
        canonical_orientation(r, q)
    }
}

impl From<Rational> for (i64, i64) {
    fn from(o: Rational) -> Self {
        (o.r, o.q)
    }
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Reduces `(r, q)` to its coprime canonical form.
pub fn canonical_orientation(r: i64, q: i64) -> Result<Rational> {
    if r == 0 && q == 0 {
        return Err(Error::ZeroOrientation);
    }
    let g = gcd(r, q);
    let (mut r, mut q) = (r / g, q / g);
    if q < 0 || (q == 0 && r < 0) {
        r = -r;
        q = -q;
    }
    Ok(Rational { r, q })
}

impl Rational {
    pub fn new(r: i64, q: i64) -> Result<Self> {
        canonical_orientation(r, q)
    }

    pub fn r(&self) -> i64 {
        self.r
    }

    pub fn q(&self) -> i64 {
        self.q
    }

    /// `N = r^2 + q^2`.
    pub fn n(&self) -> i64 {
        self.r * self.r + self.q * self.q
    }

    /// Spacing between lattice layers orthogonal to the field, `a / sqrt(N)`.
    pub fn d(&self) -> f64 {
        PRIMARY_PERIOD / (self.n() as f64).sqrt()
    }

    /// `|r| + |q|`, the coupling range of the Wannier-Stark chain in layers.
    pub fn reach(&self) -> i64 {
        self.r.abs() + self.q.abs()
    }

    /// Period of Wannier-Stark bands in the transverse quasimomentum, `2 pi / (N d)`.
    pub fn kappa_period(&self) -> f64 {
        2.0 * PI / (self.n() as f64 * self.d())
    }

    pub fn tilde_beta(&self) -> f64 {
        if self.q == 0 {
            f64::INFINITY
        } else {
            self.r as f64 / self.q as f64
        }
    }

    pub fn beta(&self) -> f64 {
        frame_convert_inverse(self.tilde_beta())
    }

    /// Unit field direction in the xy frame, `(r - q, r + q) / sqrt(2N)`.
    pub fn xy_direction(&self) -> (f64, f64) {
        let norm = (2.0 * self.n() as f64).sqrt();
        ((self.r - self.q) as f64 / norm, (self.r + self.q) as f64 / norm)
    }

    /// Orientation angle `arctan(Fx / Fy)` folded into `(-pi/2, pi/2]`.
    pub fn theta(&self) -> f64 {
        let (x, y) = self.xy_direction();
        fold_angle(x.atan2(y))
    }
}

impl std::fmt::Display for Rational {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.r, self.q)
    }
}

fn fold_angle(mut theta: f64) -> f64 {
    while theta <= -PI / 2.0 {
        theta += PI;
    }
    while theta > PI / 2.0 {
        theta -= PI;
    }
    theta
}

/// `beta = Fx/Fy` (xy frame) to `tilde_beta = F~x/F~y` (primary-axes frame).
/// Ratios are treated projectively: `beta = 1` maps to infinity and an
/// infinite `beta` maps to `-1`.
pub fn frame_convert(beta: f64) -> f64 {
    if beta.is_infinite() {
        -1.0
    } else if beta == 1.0 {
        f64::INFINITY
    } else {
        (1.0 + beta) / (1.0 - beta)
    }
}

/// Inverse of [`frame_convert`].
pub fn frame_convert_inverse(tilde_beta: f64) -> f64 {
    if tilde_beta.is_infinite() {
        1.0
    } else if tilde_beta == -1.0 {
        f64::INFINITY
    } else {
        (tilde_beta - 1.0) / (tilde_beta + 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Orientation {
    Rational(Rational),
    /// `theta = arctan(Fx / Fy)` in the xy frame; the field is
    /// `F (sin theta, cos theta)`.
    Angle(f64),
}

impl Orientation {
    pub fn rational(r: i64, q: i64) -> Result<Self> {
        Ok(Orientation::Rational(Rational::new(r, q)?))
    }

    pub fn from_beta(beta: f64) -> Self {
        Orientation::Angle(fold_angle(beta.atan()))
    }

    pub fn theta(&self) -> f64 {
        match self {
            Orientation::Rational(o) => o.theta(),
            Orientation::Angle(t) => *t,
        }
    }

    pub fn as_rational(&self) -> Option<Rational> {
        match self {
            Orientation::Rational(o) => Some(*o),
            Orientation::Angle(_) => None,
        }
    }

    /// Best rational approximation of the primary-frame ratio with `q` (or
    /// `|r|` when the ratio is large) not exceeding `max_denominator`.
    /// Angles are never snapped implicitly; this is the explicit route.
    pub fn rationalize(&self, max_denominator: i64) -> Result<Rational> {
        if max_denominator < 1 {
            return Err(invalid("max_denominator", "must be >= 1"));
        }
        let tb = match self {
            Orientation::Rational(o) => return Ok(*o),
            Orientation::Angle(t) => frame_convert(t.tan()),
        };
        if !tb.is_finite() || tb.abs() > 1e15 {
            return Rational::new(1, 0);
        }
        let (num, den) = best_rational(tb.abs(), max_denominator);
        Rational::new(if tb < 0.0 { -num } else { num }, den)
    }
}

/// Continued-fraction best approximation of `x >= 0` with denominator bound.
fn best_rational(x: f64, max_den: i64) -> (i64, i64) {
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut v = x;
    loop {
        let a = v.floor();
        let ai = a as i64;
        let p2 = ai.saturating_mul(p1).saturating_add(p0);
        let q2 = ai.saturating_mul(q1).saturating_add(q0);
        if q2 > max_den {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let frac = v - a;
        if frac < 1e-12 {
            break;
        }
        v = 1.0 / frac;
    }
    if q1 == 0 {
        (x.round() as i64, 1)
    } else {
        (p1, q1)
    }
}

/// Static field: magnitude and orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub magnitude: f64,
    pub orientation: Orientation,
}

impl FieldSpec {
    pub fn new(magnitude: f64, orientation: Orientation) -> Result<Self> {
        if !(magnitude.is_finite() && magnitude > 0.0) {
            return Err(invalid("F", format!("must be finite and > 0, got {magnitude}")));
        }
        if let Orientation::Angle(t) = orientation {
            if !t.is_finite() {
                return Err(invalid("theta", "must be finite"));
            }
        }
        Ok(Self {
            magnitude,
            orientation,
        })
    }

    pub fn rational(magnitude: f64, r: i64, q: i64) -> Result<Self> {
        Self::new(magnitude, Orientation::rational(r, q)?)
    }

    pub fn angle(magnitude: f64, theta: f64) -> Result<Self> {
        Self::new(magnitude, Orientation::Angle(theta))
    }

    /// `(Fx, Fy)` in the xy frame.
    pub fn xy_components(&self) -> (f64, f64) {
        let (ux, uy) = match self.orientation {
            Orientation::Rational(o) => o.xy_direction(),
            Orientation::Angle(t) => (t.sin(), t.cos()),
        };
        (self.magnitude * ux, self.magnitude * uy)
    }

    /// `(F~x, F~y)` along the primary axes `(1,1)/sqrt2` and `(-1,1)/sqrt2`.
    pub fn primary_components(&self) -> (f64, f64) {
        let (fx, fy) = self.xy_components();
        ((fx + fy) / SQRT_2, (fy - fx) / SQRT_2)
    }

    pub fn beta(&self) -> f64 {
        let (fx, fy) = self.xy_components();
        if fy == 0.0 {
            f64::INFINITY
        } else {
            fx / fy
        }
    }

    pub fn tilde_beta(&self) -> f64 {
        let (tx, ty) = self.primary_components();
        if ty == 0.0 {
            f64::INFINITY
        } else {
            tx / ty
        }
    }

    pub fn as_rational(&self) -> Option<Rational> {
        self.orientation.as_rational()
    }

    /// Ladder step `d F` for rational orientations.
    pub fn ladder_step(&self) -> Option<f64> {
        self.as_rational().map(|o| o.d() * self.magnitude)
    }
}

/// Off-diagonal element of the Bloch Hamiltonian.
pub fn bloch_offdiag(params: &LatticeParams, kx: f64, ky: f64) -> C64 {
    let a = PRIMARY_PERIOD;
    let sum = C64::from_polar(1.0, -a * kx)
        + C64::from_polar(1.0, -a * ky)
        + C64::from_polar(1.0, -a * (kx + ky));
    -params.j2 - params.j1 * sum
}

/// Gradient of [`bloch_offdiag`] with respect to `(kx, ky)`.
pub fn bloch_offdiag_gradient(params: &LatticeParams, kx: f64, ky: f64) -> (C64, C64) {
    let a = PRIMARY_PERIOD;
    let ia = C64::new(0.0, a);
    let ex = C64::from_polar(1.0, -a * kx);
    let ey = C64::from_polar(1.0, -a * ky);
    let exy = C64::from_polar(1.0, -a * (kx + ky));
    let j1 = params.j1;
    (j1 * ia * (ex + exy), j1 * ia * (ey + exy))
}

/// The 2x2 Bloch Hamiltonian with `-delta` on A, `+delta` on B.
/// `kx`, `ky` are quasimomenta along the primary axes.
pub fn bloch_hamiltonian(params: &LatticeParams, kx: f64, ky: f64) -> Matrix2<C64> {
    let h = bloch_offdiag(params, kx, ky);
    Matrix2::new(
        C64::new(-params.delta, 0.0),
        h,
        h.conj(),
        C64::new(params.delta, 0.0),
    )
}

/// `(E-, E+) = -/+ sqrt(delta^2 + |h12|^2)`.
pub fn bloch_bands(params: &LatticeParams, kx: f64, ky: f64) -> (f64, f64) {
    let h = bloch_offdiag(params, kx, ky);
    let e = (params.delta * params.delta + h.norm_sqr()).sqrt();
    (-e, e)
}

/// Eigenpairs of the Bloch Hamiltonian, ascending.
pub fn bloch_eigen(params: &LatticeParams, kx: f64, ky: f64) -> Eigh2 {
    eigh2(&bloch_hamiltonian(params, kx, ky))
}

/// Both Bloch subbands on a uniform grid covering one Brillouin zone.
#[derive(Debug, Clone, Serialize)]
pub struct BlochGrid {
    pub nx: usize,
    pub ny: usize,
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
    /// Row-major `[iy * nx + ix]`.
    pub e_minus: Vec<f64>,
    pub e_plus: Vec<f64>,
}

impl BlochGrid {
    pub fn compute(params: &LatticeParams, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid("grid", "sizes must be positive"));
        }
        let zone = 2.0 * PI / PRIMARY_PERIOD;
        let kx: Vec<f64> = (0..nx).map(|i| -zone / 2.0 + zone * i as f64 / nx as f64).collect();
        let ky: Vec<f64> = (0..ny).map(|i| -zone / 2.0 + zone * i as f64 / ny as f64).collect();
        let mut e_minus = Vec::with_capacity(nx * ny);
        let mut e_plus = Vec::with_capacity(nx * ny);
        for &y in &ky {
            for &x in &kx {
                let (lo, hi) = bloch_bands(params, x, y);
                e_minus.push(lo);
                e_plus.push(hi);
            }
        }
        Ok(Self {
            nx,
            ny,
            kx,
            ky,
            e_minus,
            e_plus,
        })
    }

    pub fn min_gap(&self) -> f64 {
        self.e_plus
            .iter()
            .zip(&self.e_minus)
            .map(|(p, m)| p - m)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Gap below which two subbands are considered touching.
pub const DIRAC_GAP_TOL: f64 = 1e-9;

/// Points of the zone where the two subbands touch, returned as `(kx, ky)`
/// with `a k` in `(-pi, pi]`, sorted. Empty when the spectrum is gapped.
pub fn dirac_points(params: &LatticeParams) -> Vec<(f64, f64)> {
    if 2.0 * params.delta.abs() >= DIRAC_GAP_TOL {
        return Vec::new();
    }
    let a = PRIMARY_PERIOD;
    let n = 96;
    let phase = |i: usize| -PI + 2.0 * PI * i as f64 / n as f64;
    let mag = |i: usize, j: usize| bloch_offdiag(params, phase(i) / a, phase(j) / a).norm();
    let mut found: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let m = mag(i, j);
            let mut is_min = true;
            'nb: for di in [n - 1, 0, 1] {
                for dj in [n - 1, 0, 1] {
                    if (di, dj) == (0, 0) {
                        continue;
                    }
                    if mag((i + di) % n, (j + dj) % n) < m {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if !is_min {
                continue;
            }
            if let Some((u, v)) = newton_zero(params, phase(i), phase(j)) {
                let gap = 2.0
                    * (params.delta * params.delta
                        + bloch_offdiag(params, u / a, v / a).norm_sqr())
                    .sqrt();
                if gap < DIRAC_GAP_TOL {
                    let p = (wrap_phase(u), wrap_phase(v));
                    let dup = found.iter().any(|q| {
                        phase_distance(q.0, p.0) < 1e-6 && phase_distance(q.1, p.1) < 1e-6
                    });
                    if !dup {
                        found.push(p);
                    }
                }
            }
        }
    }
    found.sort_by(|x, y| x.partial_cmp(y).unwrap());
    found.into_iter().map(|(u, v)| (u / a, v / a)).collect()
}

fn wrap_phase(x: f64) -> f64 {
    let mut y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI + 1e-12 {
        y += 2.0 * PI;
    }
    y
}

fn phase_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Newton iteration on `h12 = 0` in the phases `(a kx, a ky)`.
fn newton_zero(params: &LatticeParams, mut u: f64, mut v: f64) -> Option<(f64, f64)> {
    let a = PRIMARY_PERIOD;
    for _ in 0..60 {
        let h = bloch_offdiag(params, u / a, v / a);
        if h.norm() < 1e-15 {
            return Some((u, v));
        }
        let (gx, gy) = bloch_offdiag_gradient(params, u / a, v / a);
        // derivatives with respect to the phases, not the momenta
        let (gx, gy) = (gx / a, gy / a);
        let det = gx.re * gy.im - gy.re * gx.im;
        if det.abs() < 1e-14 {
            return None;
        }
        let du = (gy.im * h.re - gy.re * h.im) / det;
        let dv = (-gx.im * h.re + gx.re * h.im) / det;
        u -= du;
        v -= dv;
        if du.abs() + dv.abs() < 1e-15 {
            break;
        }
    }
    let h = bloch_offdiag(params, u / a, v / a);
    (h.norm() < 1e-10).then_some((u, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn hamiltonian_at_zone_center() {
        let h = bloch_hamiltonian(&LatticeParams::LATTICE_I, 0.0, 0.0);
        assert_abs_diff_eq!(h[(0, 1)].re, -1.6, epsilon = 1e-15);
        assert_abs_diff_eq!(h[(0, 1)].im, 0.0, epsilon = 1e-15);
        assert_eq!(h[(0, 0)].re, -0.5);
        assert_eq!(h[(1, 1)].re, 0.5);
        let (lo, hi) = bloch_bands(&LatticeParams::LATTICE_I, 0.0, 0.0);
        assert_abs_diff_eq!(hi, 2.81f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 1.676305, epsilon = 1e-6);
        assert_eq!(lo, -hi);
    }

    #[test]
    fn decoupled_sublattices_are_flat() {
        let p = LatticeParams::new(0.0, 0.0, 0.5).unwrap();
        for &(x, y) in &[(0.0, 0.0), (0.3, -1.2), (2.0, 2.0)] {
            let h = bloch_hamiltonian(&p, x, y);
            assert_eq!(h[(0, 1)], C64::new(0.0, 0.0));
            assert_eq!(bloch_bands(&p, x, y), (-0.5, 0.5));
        }
    }

    #[test]
    fn lattice_ii_cone_at_two_thirds() {
        let a = PRIMARY_PERIOD;
        let k = 2.0 * PI / 3.0 / a;
        let h = bloch_offdiag(&LatticeParams::LATTICE_II, k, -k);
        assert!(h.norm() < 1e-15);
        let (lo, hi) = bloch_bands(&LatticeParams::LATTICE_II, k, -k);
        assert!(lo.abs() < 1e-15 && hi.abs() < 1e-15);
    }

    #[test]
    fn bands_match_direct_eigensolve() {
        let p = LatticeParams::new(0.3, 0.7, 0.2).unwrap();
        for i in 0..20 {
            let (x, y) = (0.37 * i as f64, -0.11 * i as f64 + 0.5);
            let (lo, hi) = bloch_bands(&p, x, y);
            let eig = nalgebra::SymmetricEigen::new(bloch_hamiltonian(&p, x, y));
            let mut ev = [eig.eigenvalues[0], eig.eigenvalues[1]];
            ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_abs_diff_eq!(lo, ev[0], epsilon = 1e-14);
            assert_abs_diff_eq!(hi, ev[1], epsilon = 1e-14);
        }
    }

    #[test]
    fn canonical_orientations() {
        let o = canonical_orientation(2, 1).unwrap();
        assert_eq!((o.r(), o.q(), o.n()), (2, 1, 5));
        assert_abs_diff_eq!(o.d(), (2.0f64 / 5.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(o.d(), 0.632456, epsilon = 1e-6);
        assert_eq!(canonical_orientation(4, 2).unwrap(), o);
        assert_eq!(canonical_orientation(-4, -2).unwrap(), o);
        let x = canonical_orientation(1, 0).unwrap();
        assert_eq!((x.r(), x.q(), x.n()), (1, 0, 1));
        assert_abs_diff_eq!(x.d(), SQRT_2, epsilon = 1e-15);
        assert_eq!(canonical_orientation(-3, 0).unwrap(), x);
        let m = canonical_orientation(1, -1).unwrap();
        assert_eq!((m.r(), m.q()), (-1, 1));
        assert!(matches!(canonical_orientation(0, 0), Err(Error::ZeroOrientation)));
    }

    #[test]
    fn frame_conversion_anchors() {
        assert!(frame_convert(1.0).is_infinite());
        assert_abs_diff_eq!(frame_convert(1.0 / 3.0), 2.0, epsilon = 1e-15);
        assert_eq!(frame_convert(0.0), 1.0);
        assert_eq!(frame_convert(f64::INFINITY), -1.0);
        // the same pairs through the field geometry
        let cases = [((1, 0), 1.0), ((2, 1), 1.0 / 3.0), ((1, 1), 0.0)];
        for ((r, q), beta) in cases {
            let f = FieldSpec::rational(0.7, r, q).unwrap();
            assert_abs_diff_eq!(f.beta(), beta, epsilon = 1e-14);
            let o = Orientation::from_beta(beta).rationalize(10).unwrap();
            assert_eq!((o.r(), o.q()), (r, q));
        }
        let fx = FieldSpec::rational(1.0, -1, 1).unwrap();
        let (x, y) = fx.xy_components();
        assert_abs_diff_eq!(y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x.abs(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn angle_rational_angle_round_trip() {
        for (r, q) in [(1, 0), (1, 1), (2, 1), (1, 2), (-1, 1), (3, 2), (-2, 5)] {
            let o = Rational::new(r, q).unwrap();
            let back = Orientation::Angle(o.theta()).rationalize(50).unwrap();
            assert_eq!(back, o, "({r},{q})");
            assert_abs_diff_eq!(back.theta(), o.theta(), epsilon = 1e-14);
        }
    }

    #[test]
    fn primary_components_follow_orientation() {
        let f = FieldSpec::rational(0.8, 2, 1).unwrap();
        let (tx, ty) = f.primary_components();
        assert_abs_diff_eq!(tx, 0.8 * 2.0 / 5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(ty, 0.8 / 5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(f.tilde_beta(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn no_dirac_points_when_gapped() {
        assert!(dirac_points(&LatticeParams::LATTICE_I).is_empty());
    }

    #[test]
    fn lattice_ii_dirac_points() {
        let pts = dirac_points(&LatticeParams::LATTICE_II);
        assert_eq!(pts.len(), 2);
        let a = PRIMARY_PERIOD;
        let t = 2.0 * PI / 3.0;
        assert_abs_diff_eq!(pts[0].0 * a, -t, epsilon = 1e-10);
        assert_abs_diff_eq!(pts[0].1 * a, t, epsilon = 1e-10);
        assert_abs_diff_eq!(pts[1].0 * a, t, epsilon = 1e-10);
        assert_abs_diff_eq!(pts[1].1 * a, -t, epsilon = 1e-10);
    }

    /// Brute-force minimization of |h12| over a fine phase grid followed by a
    /// local pattern search; independent of the Newton path.
    fn brute_force_zeros(p: &LatticeParams) -> Vec<(f64, f64)> {
        let a = PRIMARY_PERIOD;
        let n = 400;
        let f = |u: f64, v: f64| bloch_offdiag(p, u / a, v / a).norm();
        let ph = |i: usize| -PI + 2.0 * PI * (i as f64 + 0.5) / n as f64;
        let mut seeds = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let m = f(ph(i), ph(j));
                if m < 0.05 {
                    seeds.push((m, ph(i), ph(j)));
                }
            }
        }
        seeds.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (_, mut u, mut v) in seeds {
            let mut step = 2.0 * PI / n as f64;
            while step > 1e-13 {
                let mut moved = false;
                for (du, dv) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                    if f(u + du, v + dv) < f(u, v) {
                        u += du;
                        v += dv;
                        moved = true;
                    }
                }
                if !moved {
                    step /= 2.0;
                }
            }
            if f(u, v) < 1e-9 && !out.iter().any(|q| (q.0 - u).abs() + (q.1 - v).abs() < 1e-4) {
                out.push((u, v));
            }
        }
        out.sort_by(|x, y| x.partial_cmp(y).unwrap());
        out
    }

    #[test]
    fn dirac_points_agree_with_brute_force() {
        for p in [
            LatticeParams::LATTICE_II,
            LatticeParams::new(0.5, 0.2, 0.0).unwrap(),
        ] {
            let a = PRIMARY_PERIOD;
            let oracle = brute_force_zeros(&p);
            let pts = dirac_points(&p);
            assert_eq!(pts.len(), oracle.len());
            for (k, o) in pts.iter().zip(&oracle) {
                assert_abs_diff_eq!(k.0 * a, o.0, epsilon = 1e-6);
                assert_abs_diff_eq!(k.1 * a, o.1, epsilon = 1e-6);
            }
        }
        // J2 = 0.2 moves the cones to +-(phi, -phi) with cos(phi) = -0.7
        let pts = dirac_points(&LatticeParams::new(0.5, 0.2, 0.0).unwrap());
        let phi = (-0.7f64).acos();
        assert_abs_diff_eq!(pts[1].0 * PRIMARY_PERIOD, phi, epsilon = 1e-10);
        assert!((phi - 2.0 * PI / 3.0).abs() > 0.1);
    }

    #[test]
    fn bloch_grid_gap_bound() {
        let g = BlochGrid::compute(&LatticeParams::LATTICE_I, 33, 29).unwrap();
        assert!(g.min_gap() >= 2.0 * 0.5);
        for (lo, hi) in g.e_minus.iter().zip(&g.e_plus) {
            assert!(lo <= hi);
        }
    }

    proptest! {
        #[test]
        fn hermitian(j1 in 0.0..2.0f64, j2 in 0.0..2.0f64, d in -1.0..1.0f64,
                     x in -10.0..10.0f64, y in -10.0..10.0f64) {
            let p = LatticeParams::new(j1, j2, d).unwrap();
            let h = bloch_hamiltonian(&p, x, y);
            prop_assert!((h - h.adjoint()).norm() < 1e-14);
        }

        #[test]
        fn chiral_symmetry_without_detuning(j1 in 0.0..2.0f64, j2 in 0.0..2.0f64,
                                            x in -10.0..10.0f64, y in -10.0..10.0f64) {
            let p = LatticeParams::new(j1, j2, 0.0).unwrap();
            let (lo, hi) = bloch_bands(&p, x, y);
            prop_assert_eq!(lo, -hi);
        }

        #[test]
        fn zone_periodicity(j1 in 0.0..2.0f64, j2 in 0.0..2.0f64, d in -1.0..1.0f64,
                            x in -10.0..10.0f64, y in -10.0..10.0f64) {
            let p = LatticeParams::new(j1, j2, d).unwrap();
            let g = 2.0 * PI / PRIMARY_PERIOD;
            let e0 = bloch_bands(&p, x, y);
            for (sx, sy) in [(g, 0.0), (0.0, g)] {
                let e1 = bloch_bands(&p, x + sx, y + sy);
                prop_assert!((e0.0 - e1.0).abs() < 1e-12 && (e0.1 - e1.1).abs() < 1e-12);
            }
        }

        #[test]
        fn gap_at_least_twice_detuning(j1 in 0.0..2.0f64, j2 in 0.0..2.0f64,
                                       d in 0.01..1.0f64, x in -10.0..10.0f64, y in -10.0..10.0f64) {
            let p = LatticeParams::new(j1, j2, d).unwrap();
            let (lo, hi) = bloch_bands(&p, x, y);
            prop_assert!(hi - lo >= 2.0 * d);
        }

        #[test]
        fn frame_convert_round_trip(beta in -1e3..1e3f64) {
            prop_assume!((beta - 1.0).abs() > 1e-6);
            let back = frame_convert_inverse(frame_convert(beta));
            prop_assert!((back - beta).abs() <= 1e-9 * (1.0 + beta.abs()));
        }
    }
}
