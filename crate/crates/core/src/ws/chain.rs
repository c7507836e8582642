//! Truncated Wannier-Stark chain for a rational field orientation.
//!
//! Layer `l` collects the unit cells with `r n1 + q n2 = l`; a plane wave of
//! transverse quasimomentum `kappa` along each layer reduces the tilted
//! lattice to a one-dimensional chain of `(A_l, B_l)` pairs:
//!
//! ```text
//! A_l:  dF (l - (r+q)/4) + delta
//! B_l:  dF (l + (r+q)/4) - delta
//! A_l <-> B_l            -J2
//! A_l <-> B_{l-q}        -J1 exp(-i r d kappa)
//! A_l <-> B_{l-r}        -J1 exp(+i q d kappa)
//! A_l <-> B_{l-q-r}      -J1 exp(+i (q-r) d kappa)
//! ```
//!
//! and the Hermitian conjugate couplings. The chain is translation invariant
//! up to the tilt: `l -> l + 1` shifts every level by exactly `dF`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::lattice::{LatticeParams, Rational};
use crate::C64;

/// One `A_l -> B_{l + shift}` coupling and the coefficient `c` of its phase
/// `exp(i c kappa)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Coupling {
    pub shift: i64,
    pub value: C64,
    pub phase_coeff: f64,
}

pub(crate) fn couplings(params: &LatticeParams, o: Rational, kappa: f64) -> [Coupling; 4] {
    let (r, q, d) = (o.r() as f64, o.q() as f64, o.d());
    let j1 = params.j1;
    let mk = |shift: i64, coeff: f64, amp: f64| Coupling {
        shift,
        value: C64::from_polar(-amp, coeff * kappa),
        phase_coeff: coeff,
    };
    [
        mk(0, 0.0, params.j2),
        mk(-o.q(), -r * d, j1),
        mk(-o.r(), q * d, j1),
        mk(-o.q() - o.r(), (q - r) * d, j1),
    ]
}

/// Folds an energy into the window `[-step/2, step/2)`.
pub fn fold(energy: f64, step: f64) -> f64 {
    let x = energy - step * (energy / step + 0.5).floor();
    if x >= 0.5 * step {
        x - step
    } else {
        x
    }
}

/// Signed distance between two energies modulo `step`, in `[-step/2, step/2)`.
pub fn circular_diff(a: f64, b: f64, step: f64) -> f64 {
    fold(a - b, step)
}

#[derive(Debug, Clone, Copy)]
pub struct ChainOptions {
    /// Maximal number of cells before giving up on doubling.
    pub cell_cap: usize,
    /// Largest amplitude allowed in the outermost cells of an accepted state.
    pub boundary_tol: f64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            cell_cap: 2048,
            boundary_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WsChain {
    params: LatticeParams,
    orientation: Rational,
    field: f64,
    kappa: f64,
    first_cell: i64,
    cells: usize,
    matrix: DMatrix<C64>,
}

/// One eigenstate of the chain with localization diagnostics.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub energy: f64,
    /// Mean layer index.
    pub centroid: f64,
    /// Largest amplitude in the outermost cells at either end.
    pub boundary_amplitude: f64,
    pub a_weight: f64,
    pub vector: DVector<C64>,
}

/// One level of each ladder near the middle of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralLevel {
    pub energy: f64,
    /// `energy` folded into `[-dF/2, dF/2)`.
    pub folded: f64,
    /// Hellmann-Feynman group velocity `dE/dkappa`.
    pub velocity: f64,
    /// Weight of the state on sublattice A.
    pub a_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralLevels {
    /// Sorted by folded energy.
    pub levels: [CentralLevel; 2],
    pub ladder_step: f64,
    /// Largest deviation of same-ladder neighbours from `dF` in the central window.
    pub step_error: f64,
    pub cells: usize,
}

impl CentralLevels {
    pub fn folded(&self) -> [f64; 2] {
        [self.levels[0].folded, self.levels[1].folded]
    }
}

impl WsChain {
    pub fn min_cells(o: Rational) -> usize {
        (4 * o.reach() + 8) as usize
    }

    /// Starting truncation: enough cells for the localization length `~J/dF`.
    pub fn default_cells(params: &LatticeParams, field: f64, o: Rational) -> usize {
        let loc = (16.0 * params.hopping_scale() / (o.d() * field)).ceil() as usize;
        Self::min_cells(o).max(loc)
    }

    pub fn build(
        params: &LatticeParams,
        field: f64,
        o: Rational,
        kappa: f64,
        cells: usize,
    ) -> Result<Self> {
        if !(field.is_finite() && field > 0.0) {
            return Err(invalid("F", "must be finite and > 0"));
        }
        if cells < Self::min_cells(o) {
            return Err(invalid(
                "L",
                format!("{cells} cells, need at least {}", Self::min_cells(o)),
            ));
        }
        let first_cell = -((cells / 2) as i64);
        let dim = 2 * cells;
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        let step = o.d() * field;
        let s = (o.r() + o.q()) as f64 / 4.0;
        for i in 0..cells {
            let l = first_cell + i as i64;
            m[(2 * i, 2 * i)] = C64::new(step * (l as f64 - s) + params.delta, 0.0);
            m[(2 * i + 1, 2 * i + 1)] = C64::new(step * (l as f64 + s) - params.delta, 0.0);
            for c in couplings(params, o, kappa) {
                let j = i as i64 + c.shift;
                if j < 0 || j >= cells as i64 {
                    continue;
                }
                let (a, b) = (2 * i, 2 * j as usize + 1);
                m[(a, b)] += c.value;
                m[(b, a)] += c.value.conj();
            }
        }
        Ok(Self {
            params: *params,
            orientation: o,
            field,
            kappa,
            first_cell,
            cells,
            matrix: m,
        })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn first_cell(&self) -> i64 {
        self.first_cell
    }

    pub fn ladder_step(&self) -> f64 {
        self.orientation.d() * self.field
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `<psi| dH/dkappa |psi>`.
    pub fn velocity(&self, psi: &DVector<C64>) -> f64 {
        let i_unit = C64::new(0.0, 1.0);
        let mut v = 0.0;
        for i in 0..self.cells {
            for c in couplings(&self.params, self.orientation, self.kappa) {
                let j = i as i64 + c.shift;
                if c.phase_coeff == 0.0 || j < 0 || j >= self.cells as i64 {
                    continue;
                }
                let dh = c.value * i_unit * c.phase_coeff;
                v += 2.0 * (psi[2 * i].conj() * dh * psi[2 * j as usize + 1]).re;
            }
        }
        v
    }

    /// All eigenstates, ascending in energy.
    pub fn spectrum(&self) -> Vec<ChainState> {
        let eig = SymmetricEigen::new(self.matrix.clone());
        let edge = (self.orientation.reach() as usize).max(2);
        let mut states: Vec<ChainState> = (0..eig.eigenvalues.len())
            .map(|k| {
                let v = eig.eigenvectors.column(k).into_owned();
                let mut centroid = 0.0;
                let mut a_weight = 0.0;
                let mut boundary: f64 = 0.0;
                for i in 0..self.cells {
                    let wa = v[2 * i].norm_sqr();
                    let w = wa + v[2 * i + 1].norm_sqr();
                    centroid += (self.first_cell + i as i64) as f64 * w;
                    a_weight += wa;
                    if i < edge || i >= self.cells - edge {
                        boundary = boundary.max(v[2 * i].norm()).max(v[2 * i + 1].norm());
                    }
                }
                ChainState {
                    energy: eig.eigenvalues[k],
                    centroid,
                    boundary_amplitude: boundary,
                    a_weight,
                    vector: v,
                }
            })
            .collect();
        states.sort_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap());
        states
    }

    /// Eigenstates localized in the central third and decayed at the edges.
    pub fn central_states(&self, boundary_tol: f64) -> Vec<ChainState> {
        let lo = self.first_cell as f64 + self.cells as f64 / 3.0;
        let hi = self.first_cell as f64 + 2.0 * self.cells as f64 / 3.0;
        self.spectrum()
            .into_iter()
            .filter(|s| s.centroid >= lo && s.centroid <= hi && s.boundary_amplitude < boundary_tol)
            .collect()
    }

    /// Representative level of each ladder, taken from the middle of the
    /// accepted central states.
    pub fn central_levels(&self, boundary_tol: f64) -> Result<CentralLevels> {
        let states = self.central_states(boundary_tol);
        let n = states.len();
        if n < 4 {
            return Err(Error::ChainNotConverged {
                attempts: 1,
                cells: self.cells,
                reason: format!("only {n} well-localized central states"),
            });
        }
        let step = self.ladder_step();
        let mut step_error: f64 = 0.0;
        for w in states.windows(3) {
            step_error = step_error.max((w[2].energy - w[0].energy - step).abs());
        }
        let k = (n - 2) / 2;
        let mut levels = [k, k + 1].map(|i| {
            let s = &states[i];
            CentralLevel {
                energy: s.energy,
                folded: fold(s.energy, step),
                velocity: self.velocity(&s.vector),
                a_weight: s.a_weight,
            }
        });
        levels.sort_by(|a, b| a.folded.partial_cmp(&b.folded).unwrap());
        Ok(CentralLevels {
            levels,
            ladder_step: step,
            step_error,
            cells: self.cells,
        })
    }
}

/// Central levels with adaptive truncation: starts from
/// [`WsChain::default_cells`] and doubles until enough states are decayed at
/// the edges.
pub fn central_bands(
    params: &LatticeParams,
    field: f64,
    o: Rational,
    kappa: f64,
    opts: &ChainOptions,
) -> Result<CentralLevels> {
    let mut cells = WsChain::default_cells(params, field, o);
    let mut attempts = 0;
    loop {
        attempts += 1;
        let chain = WsChain::build(params, field, o, kappa, cells)?;
        match chain.central_levels(opts.boundary_tol) {
            Ok(levels) => return Ok(levels),
            Err(Error::ChainNotConverged { reason, .. }) => {
                if 2 * cells > opts.cell_cap {
                    return Err(Error::ChainNotConverged {
                        attempts,
                        cells,
                        reason,
                    });
                }
                cells *= 2;
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::bloch_offdiag;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn o(r: i64, q: i64) -> Rational {
        Rational::new(r, q).unwrap()
    }

    #[test]
    fn fold_window() {
        assert_eq!(fold(0.25, 1.0), 0.25);
        assert_eq!(fold(0.5, 1.0), -0.5);
        assert_abs_diff_eq!(fold(-0.75, 1.0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(fold(3.1, 1.0), 0.1, epsilon = 1e-14);
    }

    #[test]
    fn diagonal_entries() {
        let c = WsChain::build(&LatticeParams::LATTICE_I, 0.4, o(1, 0), 0.3, 40).unwrap();
        let i0 = (-c.first_cell()) as usize;
        assert_abs_diff_eq!(c.matrix()[(2 * i0, 2 * i0)].re, 0.358579, epsilon = 1e-6);
        let want = 2f64.sqrt() * 0.4 * (0.0 - 0.25) + 0.5;
        assert_abs_diff_eq!(c.matrix()[(2 * i0, 2 * i0)].re, want, epsilon = 1e-15);
    }

    #[test]
    fn rejects_short_chain() {
        assert!(WsChain::build(&LatticeParams::LATTICE_I, 0.4, o(2, 1), 0.0, 19).is_err());
        assert!(WsChain::build(&LatticeParams::LATTICE_I, 0.4, o(2, 1), 0.0, 20).is_ok());
    }

    #[test]
    fn hermitian_and_banded() {
        for (r, q) in [(1, 0), (1, 1), (2, 1), (-1, 1), (3, -2)] {
            let or = o(r, q);
            let c = WsChain::build(&LatticeParams::LATTICE_I, 0.7, or, 0.9, 40).unwrap();
            let m = c.matrix();
            assert!((m - m.adjoint()).norm() < 1e-14);
            let band = 2 * or.reach() as usize + 1;
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    if i.abs_diff(j) > band {
                        assert_eq!(m[(i, j)], C64::new(0.0, 0.0));
                    }
                }
            }
        }
    }

    /// Untilted limit: Fourier transforming the chain couplings over the layer
    /// index reproduces the Bloch off-diagonal element on the line
    /// `a k = theta (r, q) + d kappa (-q, r)`.
    #[test]
    fn untilted_transform_matches_bloch() {
        let p = LatticeParams::new(0.3, 0.55, 0.2).unwrap();
        for (r, q) in [(1, 0), (1, 1), (2, 1), (-1, 1), (3, 2)] {
            let or = o(r, q);
            let d = or.d();
            for &(theta, kappa) in &[(0.3, 0.1), (1.7, -0.8), (-2.2, 2.5)] {
                let mut h = C64::new(0.0, 0.0);
                for c in couplings(&p, or, kappa) {
                    h += c.value * C64::from_polar(1.0, theta * c.shift as f64);
                }
                let (rr, qq) = (r as f64, q as f64);
                let kx = (rr * theta - qq * d * kappa) / crate::PRIMARY_PERIOD;
                let ky = (qq * theta + rr * d * kappa) / crate::PRIMARY_PERIOD;
                let want = bloch_offdiag(&p, kx, ky);
                assert!((h - want).norm() < 1e-13, "({r},{q}): {h} vs {want}");
            }
        }
    }

    #[test]
    fn flat_limit_spectrum() {
        let p = LatticeParams::new(0.0, 0.0, 0.5).unwrap();
        let or = o(2, 1);
        let c = WsChain::build(&p, 0.4, or, 0.7, 30).unwrap();
        let step = c.ladder_step();
        let s = 0.75;
        let m = c.matrix();
        for i in 0..c.cells() {
            let l = (c.first_cell() + i as i64) as f64;
            assert_eq!(m[(2 * i, 2 * i)].re, step * (l - s) + 0.5);
            assert_eq!(m[(2 * i + 1, 2 * i + 1)].re, step * (l + s) - 0.5);
        }
        assert_eq!(m.iter().filter(|z| z.norm() > 0.0).count(), 2 * c.cells());
        let lv = c.central_levels(1e-8).unwrap();
        let mut want = [fold(-step * s + 0.5, step), fold(step * s - 0.5, step)];
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_abs_diff_eq!(lv.levels[0].folded, want[0], epsilon = 1e-12);
        assert_abs_diff_eq!(lv.levels[1].folded, want[1], epsilon = 1e-12);
        assert_eq!(lv.levels[0].velocity, 0.0);
    }

    #[test]
    fn ladder_step_exact() {
        let or = o(1, 0);
        let kappa = PI / (2.0 * or.d());
        let lv = central_bands(&LatticeParams::LATTICE_I, 0.4, or, kappa, &ChainOptions::default())
            .unwrap();
        assert_abs_diff_eq!(lv.ladder_step, 0.565685, epsilon = 1e-6);
        assert!(lv.step_error < 1e-10 * lv.ladder_step, "{}", lv.step_error);
    }

    #[test]
    fn lattice_ii_spectrum_is_symmetric() {
        let or = o(1, 0);
        let c = WsChain::build(&LatticeParams::LATTICE_II, 0.4, or, 0.37, 120).unwrap();
        let e: Vec<f64> = c.central_states(1e-8).iter().map(|s| s.energy).collect();
        let step = c.ladder_step();
        // the central window is symmetric up to a whole number of ladder steps
        for &x in &e {
            let best = e
                .iter()
                .map(|&y| circular_diff(-x, y, step).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-10, "{x}: {best}");
        }
    }

    #[test]
    fn velocity_matches_finite_difference() {
        let p = LatticeParams::LATTICE_I;
        let or = o(2, 1);
        let (k, h) = (0.41, 1e-5);
        let opts = ChainOptions::default();
        let c0 = central_bands(&p, 0.8, or, k, &opts).unwrap();
        let cp = central_bands(&p, 0.8, or, k + h, &opts).unwrap();
        let cm = central_bands(&p, 0.8, or, k - h, &opts).unwrap();
        for i in 0..2 {
            let fd = circular_diff(cp.levels[i].folded, cm.levels[i].folded, c0.ladder_step) / (2.0 * h);
            let v = c0.levels[i].velocity;
            assert!((fd - v).abs() <= 1e-6 * v.abs().max(1e-3), "{fd} vs {v}");
        }
    }
}
