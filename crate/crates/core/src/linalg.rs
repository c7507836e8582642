//! Closed-form 2x2 Hermitian algebra used by the monodromy, adiabatic and
//! Landau-Zener code paths.

use nalgebra::{Matrix2, Vector2};

use crate::C64;

/// Eigen-decomposition of a 2x2 Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone, Copy)]
pub struct Eigh2 {
    pub values: [f64; 2],
    pub vectors: [Vector2<C64>; 2],
}

impl Eigh2 {
    pub fn gap(&self) -> f64 {
        self.values[1] - self.values[0]
    }
}

/// Pauli decomposition `H = h0 I + hx sx + hy sy + hz sz` of the Hermitian part.
pub fn pauli(h: &Matrix2<C64>) -> (f64, [f64; 3]) {
    let h0 = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
    let hz = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
    let off = 0.5 * (h[(0, 1)] + h[(1, 0)].conj());
    (h0, [off.re, -off.im, hz])
}

pub fn eigh2(h: &Matrix2<C64>) -> Eigh2 {
    let (h0, [hx, hy, hz]) = pauli(h);
    let r = (hx * hx + hy * hy + hz * hz).sqrt();
    let values = [h0 - r, h0 + r];
    // eigenvectors of n.sigma for n = (hx, hy, hz)/r: the larger-norm
    // representation is picked to avoid cancellation near the poles
    let off = C64::new(hx, -hy); // h01 - h0 part
    let vectors = if r == 0.0 {
        [
            Vector2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
            Vector2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
        ]
    } else if hz >= 0.0 {
        // upper: (r + hz, conj(off)), lower: (-off, r + hz)
        let nu = ((r + hz) * (r + hz) + off.norm_sqr()).sqrt();
        let upper = Vector2::new(C64::new((r + hz) / nu, 0.0), off.conj() / nu);
        let lower = Vector2::new(-off / nu, C64::new((r + hz) / nu, 0.0));
        [lower, upper]
    } else {
        // upper: (off, r - hz), lower: (r - hz, -conj(off))
        let nl = ((r - hz) * (r - hz) + off.norm_sqr()).sqrt();
        let upper = Vector2::new(off / nl, C64::new((r - hz) / nl, 0.0));
        let lower = Vector2::new(C64::new((r - hz) / nl, 0.0), -off.conj() / nl);
        [lower, upper]
    };
    Eigh2 { values, vectors }
}

/// `exp(-i H)` for Hermitian `H` (only the Hermitian part of the input is used).
pub fn expm_hermitian(h: &Matrix2<C64>) -> Matrix2<C64> {
    let (h0, [hx, hy, hz]) = pauli(h);
    let r = (hx * hx + hy * hy + hz * hz).sqrt();
    let (c, s) = (r.cos(), if r > 1e-300 { r.sin() / r } else { 1.0 });
    let i = C64::new(0.0, 1.0);
    let phase = C64::from_polar(1.0, -h0);
    // cos r I - i sin r / r (h . sigma)
    let m00 = C64::new(c, 0.0) - i * s * hz;
    let m11 = C64::new(c, 0.0) + i * s * hz;
    let m01 = -i * s * C64::new(hx, -hy);
    let m10 = -i * s * C64::new(hx, hy);
    Matrix2::new(m00, m01, m10, m11) * phase
}

/// Largest deviation of `U^dagger U` from the identity.
pub fn unitarity_error(u: &Matrix2<C64>) -> f64 {
    let d = u.adjoint() * u - Matrix2::identity();
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a general 2x2 complex matrix.
pub fn eigenvalues2(m: &Matrix2<C64>) -> [C64; 2] {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = (tr * tr * 0.25 - det).sqrt();
    [tr * 0.5 - disc, tr * 0.5 + disc]
}

/// Eigenvector of a 2x2 matrix for a given eigenvalue, normalized.
pub fn eigenvector2(m: &Matrix2<C64>, lambda: C64) -> Vector2<C64> {
    let a = m[(0, 0)] - lambda;
    let b = m[(0, 1)];
    let c = m[(1, 0)];
    let d = m[(1, 1)] - lambda;
    // rows (a, b) and (c, d) are (numerically) parallel; use the larger one
    let v = if a.norm_sqr() + b.norm_sqr() >= c.norm_sqr() + d.norm_sqr() {
        Vector2::new(b, -a)
    } else {
        Vector2::new(d, -c)
    };
    let n = v.norm();
    if n < 1e-300 {
        Vector2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0))
    } else {
        v / C64::new(n, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn herm(a: f64, b: f64, re: f64, im: f64) -> Matrix2<C64> {
        Matrix2::new(
            C64::new(a, 0.0),
            C64::new(re, im),
            C64::new(re, -im),
            C64::new(b, 0.0),
        )
    }

    proptest! {
        #[test]
        fn eigh_residual(a in -3.0..3.0f64, b in -3.0..3.0f64, re in -2.0..2.0f64, im in -2.0..2.0f64) {
            let h = herm(a, b, re, im);
            let e = eigh2(&h);
            prop_assert!(e.values[0] <= e.values[1]);
            for k in 0..2 {
                let v = e.vectors[k];
                let res = h * v - v * C64::new(e.values[k], 0.0);
                prop_assert!(res.norm() < 1e-12);
                prop_assert!((v.norm() - 1.0).abs() < 1e-13);
            }
        }

        #[test]
        fn expm_is_unitary_and_matches_spectral(a in -3.0..3.0f64, b in -3.0..3.0f64,
                                                re in -2.0..2.0f64, im in -2.0..2.0f64) {
            let h = herm(a, b, re, im);
            let u = expm_hermitian(&h);
            prop_assert!(unitarity_error(&u) < 1e-13);
            let e = eigh2(&h);
            let mut spectral = Matrix2::zeros();
            for k in 0..2 {
                let v = e.vectors[k];
                spectral += v * v.adjoint() * C64::from_polar(1.0, -e.values[k]);
            }
            prop_assert!((u - spectral).norm() < 1e-12);
        }
    }

    #[test]
    fn degenerate_matrix() {
        let e = eigh2(&herm(0.3, 0.3, 0.0, 0.0));
        assert_eq!(e.values, [0.3, 0.3]);
        let u = expm_hermitian(&herm(0.0, 0.0, 0.0, 0.0));
        assert!((u - Matrix2::identity()).norm() < 1e-15);
    }
}
