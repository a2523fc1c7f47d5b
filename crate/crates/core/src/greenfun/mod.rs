//! Periodic Green operator and Fourier-series influence tensors.
//!
//! With a homogeneous isotropic reference medium of conductivity `σ0`, the
//! periodic Green operator is diagonal in Fourier space:
//! `Γ̂0(k) = k ⊗ k / (σ0 |k|²)` for `k ≠ 0` and `Γ̂0(0) = 0`.
//!
//! The influence tensor of disk `β` on disk `α` has the Fourier series
//! `f_α Γ_αβ = Σ_n conj(χ̃_{α,n}) χ̃_{β,n} Γ̂0(k_n)` with
//! `χ̃_{α,n} = f_α F(|k_n| a_α) exp(-i k_n · x_α)` and `F(ξ) = 2 J1(ξ) / ξ`.
//! The terms only decay like `|n|⁻²`, so [`influence_fourier`] is expensive
//! and serves as the reference against which the lattice sums of
//! [`crate::eim`] are validated.

mod bessel;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

pub use bessel::{bessel_j1, shape_factor};

use crate::microstructure::Disk;
use crate::sum::{Compensated, TensorSum};
use crate::{Tensor2, Vec2};

/// Wavevector `k_n = 2π n / L`.
pub fn wavevector(n: [i64; 2], cell_side: f64) -> Vec2 {
    let s = 2.0 * PI / cell_side;
    [s * n[0] as f64, s * n[1] as f64]
}

/// `Γ̂0(k) = k ⊗ k / (σ0 |k|²)`, zero at `k = 0`.
pub fn gamma0_hat(k: Vec2, sigma0: f64) -> Tensor2 {
    let k2 = k[0] * k[0] + k[1] * k[1];
    if k2 == 0.0 {
        return Tensor2::ZERO;
    }
    let s = 1.0 / (sigma0 * k2);
    Tensor2::symmetric(k[0] * k[0] * s, k[0] * k[1] * s, k[1] * k[1] * s)
}

/// Fourier coefficient `χ̃_{α,n}` of the indicator of `disk`, normalised by the cell area.
pub fn disk_fourier_coeff(disk: &Disk, n: [i64; 2], cell_side: f64) -> Complex64 {
    let f = disk.area() / (cell_side * cell_side);
    let k = wavevector(n, cell_side);
    let amplitude = f * shape_factor(k[0].hypot(k[1]) * disk.radius);
    let phase = k[0] * disk.center[0] + k[1] * disk.center[1];
    Complex64::from_polar(amplitude, -phase)
}

/// Truncated series `f_α Γ_αβ` together with the size of its imaginary part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedInfluence {
    pub value: Tensor2,
    /// Largest imaginary component, relative to the largest real one.
    pub imaginary_residue: f64,
}

/// `f_α Γ_αβ` summed over the square window `-n_max ≤ n₁, n₂ ≤ n_max`.
///
/// Terms are accumulated shell by shell (`|n|∞ = s`) with compensated sums;
/// shells are evaluated in parallel and reduced in order, so the result does
/// not depend on the thread count.
///
/// # Panics
///
/// If `n_max == 0` or `sigma0 <= 0`.
pub fn weighted_influence_fourier(
    disk_a: &Disk,
    disk_b: &Disk,
    cell_side: f64,
    sigma0: f64,
    n_max: usize,
) -> WeightedInfluence {
    assert!(n_max >= 1, "n_max must be at least 1");
    assert!(sigma0 > 0.0, "sigma0 must be positive");
    let shells: Vec<(Tensor2, Tensor2)> = (1..=n_max as i64)
        .into_par_iter()
        .map(|s| shell_sum(disk_a, disk_b, cell_side, sigma0, s))
        .collect();
    let mut re = TensorSum::default();
    let mut im = TensorSum::default();
    for (r, i) in shells {
        re.add(r);
        im.add(i);
    }
    let value = re.value();
    let scale = value.max_abs();
    let imag = im.value().max_abs();
    WeightedInfluence {
        value,
        imaginary_residue: if scale > 0.0 { imag / scale } else { imag },
    }
}

fn shell_sum(a: &Disk, b: &Disk, l: f64, sigma0: f64, s: i64) -> (Tensor2, Tensor2) {
    let mut re = ShellAccumulator::default();
    let mut im = ShellAccumulator::default();
    let mut visit = |n: [i64; 2]| {
        let ca = disk_fourier_coeff(a, n, l);
        let cb = disk_fourier_coeff(b, n, l);
        // conj(ca) * cb, written out so that swapping the disks leaves the
        // real part bit-identical.
        let prod_re = ca.re * cb.re + ca.im * cb.im;
        let prod_im = ca.re * cb.im - ca.im * cb.re;
        let g = gamma0_hat([n[0] as f64, n[1] as f64], sigma0);
        re.add(g, prod_re);
        im.add(g, prod_im);
    };
    for n1 in -s..=s {
        visit([n1, -s]);
        visit([n1, s]);
    }
    for n2 in (-s + 1)..s {
        visit([-s, n2]);
        visit([s, n2]);
    }
    (re.value(), im.value())
}

#[derive(Default)]
struct ShellAccumulator {
    xx: Compensated,
    xy: Compensated,
    yy: Compensated,
}

impl ShellAccumulator {
    fn add(&mut self, g: Tensor2, w: f64) {
        self.xx.add(w * g.xx);
        self.xy.add(w * g.xy);
        self.yy.add(w * g.yy);
    }

    fn value(&self) -> Tensor2 {
        Tensor2::symmetric(self.xx.value(), self.xy.value(), self.yy.value())
    }
}

/// Influence tensor `Γ_αβ` from its truncated Fourier series.
///
/// This is the slow reference evaluation: cost grows like `n_max²`.
///
/// # Panics
///
/// If `n_max == 0`, `sigma0 <= 0`, or the imaginary parts fail to cancel
/// (relative residue above `1e-12`).
pub fn influence_fourier(disk_a: &Disk, disk_b: &Disk, cell_side: f64, sigma0: f64, n_max: usize) -> Tensor2 {
    let w = weighted_influence_fourier(disk_a, disk_b, cell_side, sigma0, n_max);
    assert!(
        w.imaginary_residue < 1e-12,
        "imaginary residue {} did not cancel",
        w.imaginary_residue
    );
    let f_a = disk_a.area() / (cell_side * cell_side);
    w.value * (1.0 / f_a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn validation_pair() -> (Disk, Disk) {
        (Disk::new([0.5, 0.5], 0.35), Disk::new([0.1, 0.06], 0.2))
    }

    #[test]
    fn gamma0_hat_examples() {
        assert_eq!(gamma0_hat([1.0, 0.0], 1.0), Tensor2::symmetric(1.0, 0.0, 0.0));
        assert_eq!(gamma0_hat([0.0, 0.0], 1.0), Tensor2::ZERO);
        assert_eq!(gamma0_hat([1.0, 1.0], 2.0), Tensor2::symmetric(0.25, 0.25, 0.25));
    }

    #[test]
    fn disk_coefficient_examples() {
        let d = Disk::new([0.3, 0.7], 0.2);
        let c0 = disk_fourier_coeff(&d, [0, 0], 1.0);
        assert_relative_eq!(c0.re, PI * 0.04, epsilon = 1e-15);
        assert_eq!(c0.im, 0.0);
        let centred = Disk::new([0.0, 0.0], 0.2);
        assert_eq!(disk_fourier_coeff(&centred, [3, -5], 1.0).im, 0.0);
        let c = disk_fourier_coeff(&d, [2, 1], 1.0);
        let cm = disk_fourier_coeff(&d, [-2, -1], 1.0);
        assert_relative_eq!(c.re, cm.re, epsilon = 1e-15);
        assert_relative_eq!(c.im, -cm.im, epsilon = 1e-15);
    }

    #[test]
    fn validation_pair_matches_reference_matrix() {
        let (a, b) = validation_pair();
        let g = influence_fourier(&a, &b, 1.0, 1.0, 1024);
        let want = Tensor2::symmetric(-0.05675914, -0.01134661, -0.06890456);
        for (got, exp) in [(g.xx, want.xx), (g.xy, want.xy), (g.yy, want.yy)] {
            assert!(((got - exp) / exp).abs() < 1e-3, "{got} vs {exp}");
        }
        assert!((g.trace() + PI * 0.04).abs() < 1e-4);
        assert_eq!(g.xy, g.yx);
    }

    #[test]
    fn trace_identity_converges() {
        let (a, b) = validation_pair();
        let err = |n| (influence_fourier(&a, &b, 1.0, 1.0, n).trace() + PI * 0.04).abs();
        let (e16, e64, e256) = (err(16), err(64), err(256));
        assert!(e64 < e16 && e256 < e64, "{e16} {e64} {e256}");
        let single = Disk::new([0.5, 0.5], 0.25);
        let f = single.area();
        let self_err = |n| (influence_fourier(&single, &single, 1.0, 1.0, n).trace() - (1.0 - f)).abs();
        assert!(self_err(128) < self_err(16));
        assert!(self_err(256) < 2e-3);
    }

    #[test]
    fn reciprocity_is_exact() {
        let (a, b) = validation_pair();
        let ab = weighted_influence_fourier(&a, &b, 1.0, 1.0, 40).value;
        let ba = weighted_influence_fourier(&b, &a, 1.0, 1.0, 40).value;
        assert_eq!(ab, ba);
    }

    #[test]
    fn imaginary_parts_cancel() {
        let (a, b) = validation_pair();
        let w = weighted_influence_fourier(&a, &b, 1.0, 2.0, 100);
        assert!(w.imaginary_residue < 1e-12);
    }

    #[test]
    fn translation_invariance() {
        let (a, b) = validation_pair();
        let t = [0.123, -0.377];
        let shift = |d: &Disk| Disk::new([d.center[0] + t[0], d.center[1] + t[1]], d.radius);
        let g = influence_fourier(&a, &b, 1.0, 1.0, 60);
        let h = influence_fourier(&shift(&a), &shift(&b), 1.0, 1.0, 60);
        assert!((g - h).max_abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn gamma0_hat_is_a_scaled_projector(kx in -50.0f64..50.0, ky in -50.0f64..50.0, s0 in 0.1f64..10.0) {
            prop_assume!(kx * kx + ky * ky > 1e-6);
            let g = gamma0_hat([kx, ky], s0);
            prop_assert!((g.trace() - 1.0 / s0).abs() < 1e-12 / s0);
            let e = g.sym_eigenvalues();
            prop_assert!(e[0] > -1e-14 && e[0] < 1e-12 / s0);
            prop_assert_eq!(g.xy, g.yx);
        }

        #[test]
        fn coefficient_modulus_bounded(x in 0.0f64..1.0, y in 0.0f64..1.0, a in 0.01f64..0.5,
                                       n1 in -64i64..64, n2 in -64i64..64) {
            let d = Disk::new([x, y], a);
            let c = disk_fourier_coeff(&d, [n1, n2], 1.0);
            prop_assert!(c.norm() <= d.area() * (1.0 + 1e-12));
        }

        #[test]
        fn shift_theorem(x in 0.0f64..1.0, y in 0.0f64..1.0, tx in -1.0f64..1.0, ty in -1.0f64..1.0,
                         n1 in -16i64..16, n2 in -16i64..16) {
            let d = Disk::new([x, y], 0.1);
            let moved = Disk::new([x + tx, y + ty], 0.1);
            let k = wavevector([n1, n2], 1.0);
            let expect = disk_fourier_coeff(&d, [n1, n2], 1.0) * Complex64::from_polar(1.0, -(k[0] * tx + k[1] * ty));
            let got = disk_fourier_coeff(&moved, [n1, n2], 1.0);
            prop_assert!((got - expect).norm() < 1e-12);
        }
    }
}
