use std::f64::consts::PI;

use nalgebra::Vector2;
use proptest::prelude::*;
use wannier_stark::lattice::bloch_hamiltonian;
use wannier_stark::lz::{band_populations, evolve_two_level, lower_band_state};
use wannier_stark::magnus::MagnusOptions;
use wannier_stark::wavepacket::{norm_sqr, propagate, Domain, PropagationOptions, RealSpaceLattice};
use wannier_stark::ws::chain::{central_bands, circular_diff, ChainOptions};
use wannier_stark::ws::monodromy::monodromy_spectrum;
use wannier_stark::ws::sweep::{band_sweep, kappa_grid, spreading_rate_a, SweepMethod, SweepOptions};
use wannier_stark::{FieldSpec, LatticeParams, Orientation, Rational, C64};

fn params() -> impl Strategy<Value = LatticeParams> {
    (0.0..0.6f64, 0.0..0.6f64, -0.6..0.6f64).prop_map(|(a, b, c)| LatticeParams::new(a, b, c).unwrap())
}

fn orientation() -> impl Strategy<Value = Rational> {
    prop_oneof![
        Just((1, 0)),
        Just((1, 1)),
        Just((2, 1)),
        Just((-1, 1)),
        Just((3, 1)),
    ]
    .prop_map(|(r, q)| Rational::new(r, q).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chain_and_monodromy_agree(p in params(), o in orientation(), f in 1.0..6.0f64, x in 0.0..1.0f64) {
        let kappa = 2.0 * PI * x / o.d();
        let c = central_bands(&p, f, o, kappa, &ChainOptions::default()).unwrap();
        let m = monodromy_spectrum(&p, f, o, kappa, &MagnusOptions::default()).unwrap();
        let step = c.ladder_step;
        let a = c.folded();
        let direct = circular_diff(a[0], m.energies[0], step).abs().max(circular_diff(a[1], m.energies[1], step).abs());
        let swapped = circular_diff(a[0], m.energies[1], step).abs().max(circular_diff(a[1], m.energies[0], step).abs());
        prop_assert!(direct.min(swapped) < 1e-8, "{a:?} vs {:?}", m.energies);
        prop_assert!(m.unitarity_error < 1e-10);
    }

    #[test]
    fn bloch_hamiltonian_is_hermitian(p in params(), kx in -5.0..5.0f64, ky in -5.0..5.0f64) {
        let h = bloch_hamiltonian(&p, kx, ky);
        prop_assert!((h - h.adjoint()).norm() < 1e-14);
    }

    #[test]
    fn two_level_evolution_conserves_probability(
        p in params(), f in 0.1..1.5f64, theta in 0.0..(PI / 2.0), kx in -2.0..2.0f64, ky in -2.0..2.0f64
    ) {
        let fs = FieldSpec::new(f, Orientation::Angle(theta)).unwrap();
        let psi0 = lower_band_state(&p, (kx, ky));
        let grid = [0.0, 3.0, 7.5, 12.0];
        let opts = MagnusOptions { tol: 1e-10, ..MagnusOptions::default() };
        let out = evolve_two_level(&p, &fs, (kx, ky), psi0, &grid, &opts).unwrap();
        for (t, psi) in grid.iter().zip(&out) {
            prop_assert!((psi.norm_squared() - 1.0).abs() < 1e-9);
            let k = fs.primary_components();
            let (lo, hi) = band_populations(&p, (kx - k.0 * t, ky - k.1 * t), psi);
            prop_assert!((lo + hi - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn spreading_rate_is_non_negative(p in params(), o in orientation(), f in 0.8..4.0f64) {
        let opts = SweepOptions { method: SweepMethod::Monodromy, ..SweepOptions::default() };
        let s = band_sweep(&p, f, o, &kappa_grid(o, 16, false), &opts).unwrap();
        let a = spreading_rate_a(&s).unwrap();
        prop_assert!(a.minus >= 0.0 && a.plus >= 0.0);
        prop_assert!((a.mean - 0.5 * (a.minus + a.plus)).abs() <= 1e-15 * a.mean.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn wavepacket_norm_is_conserved(p in params(), f in 0.3..1.0f64, theta in 0.0..(PI / 2.0)) {
        let fs = FieldSpec::new(f, Orientation::Angle(theta)).unwrap();
        let lat = RealSpaceLattice::build(&p, &fs, 61, Domain::Square).unwrap();
        let psi0 = lat.single_site(0, 0).unwrap();
        let states = propagate(&lat, &psi0, &[0.0, 2.0, 5.0], &PropagationOptions::default()).unwrap();
        for s in &states {
            prop_assert!((norm_sqr(&s.amplitudes) - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn populations_of_lower_state_are_exact() {
    let p = LatticeParams::LATTICE_I;
    let psi: Vector2<C64> = lower_band_state(&p, (0.3, -0.8));
    let (lo, hi) = band_populations(&p, (0.3, -0.8), &psi);
    assert!((lo - 1.0).abs() < 1e-14 && hi < 1e-14);
}
