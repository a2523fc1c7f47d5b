//! Equivalent-inclusion surrogate.
//!
//! Each disk carries a constant polarization `P_α`. With the matrix as
//! reference medium and all inclusions of conductivity `χ σ0`, the
//! polarizations solve
//!
//! ```text
//! ((χ - 1) σ0)⁻¹ P_α + Σ_β Γ_αβ P_β = Ē      for every α
//! ```
//!
//! and the surrogate conductivity follows from `σ Ē = σ0 Ē + Σ_α f_α P_α`.
//!
//! The periodic influence tensors `Γ_αβ` are approximated by a lattice sum of
//! infinite-body tensors `Γ∞(r) = a_β² / (2σ0 |r|²) (I - 2 r̂ ⊗ r̂)` over the
//! images `-P ≤ n₁, n₂ ≤ P`, minus the correction `f_β / (2σ0) I`. The
//! correction makes the traces match the exact periodic values
//! (`-f_β/σ0` off the diagonal, `(1 - f_α)/σ0` on it) at every `P`, and the
//! truncation error then decays like `P⁻²`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::microstructure::{min_image, Disk, Microstructure};
use crate::sum::Compensated;
use crate::{Tensor2, Vec2};

/// Recommended truncation of the lattice sum.
pub const DEFAULT_TRUNCATION: usize = 2;

// Rows of the lattice sum are processed in parallel above this truncation.
const PARALLEL_TRUNCATION: usize = 64;

const OVERLAP_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EimError {
    #[error("influence tensor requested at zero separation")]
    ZeroSeparation,
    #[error("disks overlap: center distance {distance} < sum of radii {contact}")]
    Overlap { distance: f64, contact: f64 },
    #[error("contrast 1 makes the system singular; the conductivity is sigma0 * I")]
    UnitContrast,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("singular equivalent-inclusion system (pivot ratio {pivot_ratio:e})")]
    Singular { pivot_ratio: f64 },
}

type Result<T> = std::result::Result<T, EimError>;

/// Whether the lattice sum carries the trace correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatticeSum {
    Corrected,
    /// Plain truncated sum; kept only to show that it does not converge to
    /// the periodic tensor.
    Uncorrected,
}

/// Infinite-body influence tensor of a disk of radius `a_beta` seen at separation `r`.
pub fn gamma_inf_pair(a_beta: f64, r: Vec2, sigma0: f64) -> Result<Tensor2> {
    let r2 = r[0] * r[0] + r[1] * r[1];
    if r2 == 0.0 {
        return Err(EimError::ZeroSeparation);
    }
    Ok(gamma_inf_unchecked(a_beta * a_beta / (2.0 * sigma0), r))
}

#[inline]
fn gamma_inf_unchecked(c: f64, r: Vec2) -> Tensor2 {
    let r2 = r[0] * r[0] + r[1] * r[1];
    let s = c / (r2 * r2);
    let xx = s * (r[1] * r[1] - r[0] * r[0]);
    let xy = -2.0 * s * r[0] * r[1];
    Tensor2::symmetric(xx, xy, -xx)
}

/// Influence of a disk on itself in an infinite body.
pub fn gamma_inf_self(sigma0: f64) -> Tensor2 {
    Tensor2::isotropic(0.5 / sigma0)
}

/// Corrected lattice-sum approximation of the periodic influence tensor `Γ_αβ`.
///
/// `disk_a == disk_b` selects the self term.
pub fn influence_poisson(disk_a: &Disk, disk_b: &Disk, cell_side: f64, sigma0: f64, truncation: usize) -> Result<Tensor2> {
    influence_lattice_sum(disk_a, disk_b, cell_side, sigma0, truncation, LatticeSum::Corrected)
}

/// Lattice sum with an explicit choice of correction.
pub fn influence_lattice_sum(
    disk_a: &Disk,
    disk_b: &Disk,
    cell_side: f64,
    sigma0: f64,
    truncation: usize,
    mode: LatticeSum,
) -> Result<Tensor2> {
    if !(sigma0 > 0.0) {
        return Err(EimError::InvalidParameter(format!("sigma0 must be positive, got {sigma0}")));
    }
    if truncation == 0 {
        return Err(EimError::InvalidParameter("truncation P must be at least 1".into()));
    }
    if !(cell_side > 0.0) {
        return Err(EimError::InvalidParameter(format!("cell side must be positive, got {cell_side}")));
    }
    let same = disk_a == disk_b;
    let r0 = min_image(
        [disk_b.center[0] - disk_a.center[0], disk_b.center[1] - disk_a.center[1]],
        cell_side,
    );
    if !same {
        let distance = r0[0].hypot(r0[1]);
        let contact = disk_a.radius + disk_b.radius;
        if distance < contact * (1.0 - OVERLAP_SLACK) {
            return Err(EimError::Overlap { distance, contact });
        }
    }
    let c = disk_b.radius * disk_b.radius / (2.0 * sigma0);
    let p = truncation as i64;
    let row = |n1: i64| -> (Compensated, Compensated) {
        let mut xx = Compensated::default();
        let mut xy = Compensated::default();
        let rx = r0[0] - n1 as f64 * cell_side;
        for n2 in -p..=p {
            if same && n1 == 0 && n2 == 0 {
                continue;
            }
            let g = gamma_inf_unchecked(c, [rx, r0[1] - n2 as f64 * cell_side]);
            xx.add(g.xx);
            xy.add(g.xy);
        }
        (xx, xy)
    };
    let rows: Vec<(Compensated, Compensated)> = if truncation >= PARALLEL_TRUNCATION {
        (-p..=p).into_par_iter().map(row).collect()
    } else {
        (-p..=p).map(row).collect()
    };
    let mut xx = Compensated::default();
    let mut xy = Compensated::default();
    for (rxx, rxy) in rows {
        xx.add(rxx.value());
        xy.add(rxy.value());
    }
    let xx = xx.value();
    // Every term is traceless, so the image sum is too.
    let mut total = Tensor2::symmetric(xx, xy.value(), -xx);
    if same {
        total += gamma_inf_self(sigma0);
    }
    if mode == LatticeSum::Corrected {
        let f_b = PI * disk_b.radius * disk_b.radius / (cell_side * cell_side);
        total = total - Tensor2::isotropic(f_b / (2.0 * sigma0));
    }
    Ok(total)
}

/// Dense equivalent-inclusion system for the two canonical loadings.
///
/// Row block `α`, column block `β` holds `Γ_αβ`, plus `((χ-1)σ0)⁻¹ I` on the
/// diagonal; entry `(2α + i, 2β + j)`.
#[derive(Clone, Debug)]
pub struct EimSystem {
    pub matrix: DMatrix<f64>,
    /// Right-hand sides for `Ē = e₁` and `Ē = e₂`.
    pub rhs: [DVector<f64>; 2],
    pub fractions: Vec<f64>,
    pub sigma0: f64,
}

impl EimSystem {
    pub fn len(&self) -> usize {
        self.fractions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fractions.is_empty()
    }

    /// Largest relative asymmetry of the matrix with row block `α` scaled by `f_α`.
    pub fn weighted_asymmetry(&self) -> f64 {
        let n = self.matrix.nrows();
        let w = |i: usize, j: usize| self.fractions[i / 2] * self.matrix[(i, j)];
        let mut scale: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                scale = scale.max(w(i, j).abs());
                worst = worst.max((w(i, j) - w(j, i)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }
}

/// Builds the system for inclusions of conductivity `χ σ0` in a matrix `σ0`.
pub fn assemble_system(ms: &Microstructure, sigma0: f64, chi: f64, truncation: usize) -> Result<EimSystem> {
    assemble_system_with(ms, sigma0, chi, truncation, LatticeSum::Corrected)
}

pub fn assemble_system_with(
    ms: &Microstructure,
    sigma0: f64,
    chi: f64,
    truncation: usize,
    mode: LatticeSum,
) -> Result<EimSystem> {
    if !(chi > 0.0 && chi.is_finite()) {
        return Err(EimError::InvalidParameter(format!("contrast must be positive, got {chi}")));
    }
    if chi == 1.0 {
        return Err(EimError::UnitContrast);
    }
    let disks = ms.disks();
    let n = disks.len();
    let l = ms.cell_side();
    let diagonal = 1.0 / ((chi - 1.0) * sigma0);
    let block_rows: Vec<Vec<Tensor2>> = (0..n)
        .into_par_iter()
        .map(|a| {
            (0..n)
                .map(|b| influence_lattice_sum(&disks[a], &disks[b], l, sigma0, truncation, mode))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut matrix = DMatrix::zeros(2 * n, 2 * n);
    for (a, row) in block_rows.iter().enumerate() {
        for (b, g) in row.iter().enumerate() {
            let mut g = *g;
            if a == b {
                g += Tensor2::isotropic(diagonal);
            }
            for i in 0..2 {
                for j in 0..2 {
                    matrix[(2 * a + i, 2 * b + j)] = g.get(i, j);
                }
            }
        }
    }
    let load = |j: usize| DVector::from_fn(2 * n, |k, _| if k % 2 == j { 1.0 } else { 0.0 });
    Ok(EimSystem {
        matrix,
        rhs: [load(0), load(1)],
        fractions: (0..n).map(|a| ms.disk_fraction(a)).collect(),
        sigma0,
    })
}

#[derive(Clone, Debug)]
pub struct EimResult {
    pub sigma_eim: Tensor2,
    /// `polarizations[j][α]` is `P_α` under the load `Ē = e_j`.
    pub polarizations: [Vec<Vec2>; 2],
    /// Smallest over largest absolute pivot of the LU factorisation.
    pub pivot_ratio: f64,
}

/// Solves both load cases by partially pivoted LU.
pub fn solve_eim(system: &EimSystem) -> Result<EimResult> {
    let n = system.len();
    if n == 0 {
        return Ok(EimResult {
            sigma_eim: Tensor2::isotropic(system.sigma0),
            polarizations: [Vec::new(), Vec::new()],
            pivot_ratio: 1.0,
        });
    }
    let lu = system.matrix.clone().lu();
    let u = lu.u();
    let pivots = u.diagonal().map(f64::abs);
    let pivot_ratio = pivots.min() / pivots.max();
    if !(pivot_ratio > f64::EPSILON) {
        return Err(EimError::Singular { pivot_ratio });
    }
    let mut polarizations: [Vec<Vec2>; 2] = [Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut columns = [[0.0; 2]; 2];
    for j in 0..2 {
        let x = lu.solve(&system.rhs[j]).ok_or(EimError::Singular { pivot_ratio })?;
        let mut mean = [Compensated::default(), Compensated::default()];
        for a in 0..n {
            let p = [x[2 * a], x[2 * a + 1]];
            mean[0].add(system.fractions[a] * p[0]);
            mean[1].add(system.fractions[a] * p[1]);
            polarizations[j].push(p);
        }
        columns[j] = [mean[0].value(), mean[1].value()];
        columns[j][j] += system.sigma0;
    }
    Ok(EimResult {
        sigma_eim: Tensor2::from_columns(columns[0], columns[1]),
        polarizations,
        pivot_ratio,
    })
}

/// Surrogate apparent conductivity; `χ = 1` short-circuits to `σ0 I`.
pub fn eim_conductivity(ms: &Microstructure, sigma0: f64, chi: f64, truncation: usize) -> Result<Tensor2> {
    if chi == 1.0 {
        return Ok(Tensor2::isotropic(sigma0));
    }
    let system = assemble_system(ms, sigma0, chi, truncation)?;
    Ok(solve_eim(&system)?.sigma_eim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greenfun::influence_fourier;
    use crate::microstructure::{generate, McConfig};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn validation_pair() -> (Disk, Disk) {
        (Disk::new([0.5, 0.5], 0.35), Disk::new([0.1, 0.06], 0.2))
    }

    #[test]
    fn pair_tensor_examples() {
        let g = gamma_inf_pair(1.0, [2.0, 0.0], 1.0).unwrap();
        assert_eq!(g, Tensor2::symmetric(-0.125, 0.0, 0.125));
        let h = gamma_inf_pair(1.0, [0.0, 2.0], 1.0).unwrap();
        assert_eq!(h, Tensor2::symmetric(0.125, 0.0, -0.125));
        assert!(matches!(gamma_inf_pair(1.0, [0.0, 0.0], 1.0), Err(EimError::ZeroSeparation)));
    }

    #[test]
    fn self_tensor() {
        assert_eq!(gamma_inf_self(1.0), Tensor2::isotropic(0.5));
        assert_eq!(gamma_inf_self(2.0), Tensor2::isotropic(0.25));
        assert_eq!(gamma_inf_self(4.0).trace(), 0.25);
    }

    #[test]
    fn validation_pair_reference_matrix() {
        let (a, b) = validation_pair();
        let g = influence_poisson(&a, &b, 1.0, 1.0, 4096).unwrap();
        let want = Tensor2::symmetric(-0.0567591, -0.0113466, -0.0689045);
        assert!((g - want).max_abs() < 1e-6, "{g}");
    }

    #[test]
    fn trace_identity_at_every_truncation() {
        let (a, b) = validation_pair();
        for p in [1, 2, 3, 7, 32, 100] {
            let g = influence_poisson(&a, &b, 1.0, 1.0, p).unwrap();
            assert!((g.trace() + PI * 0.04).abs() < 1e-15, "P={p}: {}", g.trace());
            let s = influence_poisson(&a, &a, 1.0, 2.0, p).unwrap();
            assert!((s.trace() - (1.0 - a.area()) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_disk_images_cancel() {
        let d = Disk::new([0.3, 0.6], 0.2);
        let f = d.area();
        for p in [1, 2, 5, 20] {
            let g = influence_poisson(&d, &d, 1.0, 1.0, p).unwrap();
            assert!((g - Tensor2::isotropic((1.0 - f) / 2.0)).max_abs() < 1e-15, "P={p}: {g}");
        }
    }

    #[test]
    fn lattice_sum_converges_like_inverse_square() {
        let (a, b) = validation_pair();
        let reference = influence_poisson(&a, &b, 1.0, 1.0, 4096).unwrap();
        let err = |p| (influence_poisson(&a, &b, 1.0, 1.0, p).unwrap() - reference).max_abs();
        let ps = [4usize, 8, 16, 32, 64, 128, 256];
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for &p in &ps {
            let (x, y) = ((p as f64).ln(), err(p).ln());
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        let m = ps.len() as f64;
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        assert!((slope + 2.0).abs() < 0.15, "slope {slope}");
    }

    #[test]
    fn agrees_with_fourier_series() {
        let (a, b) = validation_pair();
        let poisson = influence_poisson(&a, &b, 1.0, 1.0, 4096).unwrap();
        let fourier = influence_fourier(&a, &b, 1.0, 1.0, 1024);
        for (p, f) in [(poisson.xx, fourier.xx), (poisson.xy, fourier.xy), (poisson.yy, fourier.yy)] {
            assert!(((p - f) / p).abs() < 1e-3);
        }
    }

    #[test]
    fn uncorrected_sum_misses_the_trace() {
        let (a, b) = validation_pair();
        let g = influence_lattice_sum(&a, &b, 1.0, 1.0, 64, LatticeSum::Uncorrected).unwrap();
        assert!(g.trace().abs() < 1e-15);
        assert!((g.trace() + PI * 0.04).abs() > 0.1);
    }

    #[test]
    fn overlap_is_rejected_and_tangency_accepted() {
        let a = Disk::new([0.1, 0.5], 0.1);
        let b = Disk::new([0.85, 0.5], 0.2);
        assert!(matches!(influence_poisson(&a, &b, 1.0, 1.0, 2), Err(EimError::Overlap { .. })));
        let c = Disk::new([0.8, 0.5], 0.2);
        assert!(influence_poisson(&a, &c, 1.0, 1.0, 2).is_ok());
    }

    #[test]
    fn reciprocity() {
        let (a, b) = validation_pair();
        let (fa, fb) = (a.area(), b.area());
        let ab = influence_poisson(&a, &b, 1.0, 1.0, 5).unwrap() * fa;
        let ba = influence_poisson(&b, &a, 1.0, 1.0, 5).unwrap() * fb;
        assert!((ab - ba).max_abs() < 1e-14);
    }

    #[test]
    fn one_inclusion_closed_form() {
        let r = (0.25 / PI).sqrt();
        let ms = Microstructure::new(1.0, vec![Disk::new([0.5, 0.5], r)]).unwrap();
        let sys = assemble_system(&ms, 1.0, 10.0, 2).unwrap();
        let diag = 1.0 / 9.0 + 0.75 / 2.0;
        assert_relative_eq!(sys.matrix[(0, 0)], diag, epsilon = 1e-15);
        assert_relative_eq!(sys.matrix[(1, 1)], diag, epsilon = 1e-15);
        assert!(sys.matrix[(0, 1)].abs() < 1e-16);
        let sigma = solve_eim(&sys).unwrap().sigma_eim;
        let expect = 1.0 + 2.0 * 0.25 * 9.0 / (2.0 + 0.75 * 9.0);
        assert_relative_eq!(expect, 1.514_285_714_285_714, epsilon = 1e-12);
        assert!((sigma - Tensor2::isotropic(expect)).max_abs() < 1e-10);
    }

    #[test]
    fn unit_contrast() {
        let ms = generate(&McConfig::new(2, 0.3, 0.3, 10, 1)).unwrap();
        assert!(matches!(assemble_system(&ms, 1.0, 1.0, 2), Err(EimError::UnitContrast)));
        assert_eq!(eim_conductivity(&ms, 2.0, 1.0, 2).unwrap(), Tensor2::isotropic(2.0));
    }

    #[test]
    fn two_disk_blocks_and_weighted_symmetry() {
        let ms = generate(&McConfig::new(8, 0.4, 0.45, 200, 17)).unwrap();
        let sys = assemble_system(&ms, 1.0, 20.0, 2).unwrap();
        let d = ms.disks();
        let g = influence_poisson(&d[0], &d[1], 1.0, 1.0, 2).unwrap();
        assert_eq!(sys.matrix[(0, 2)], g.xx);
        assert_eq!(sys.matrix[(1, 3)], g.yy);
        assert!(sys.weighted_asymmetry() < 1e-12);
        let sigma = solve_eim(&sys).unwrap().sigma_eim;
        assert!(sigma.asymmetry() < 1e-8 * sigma.max_abs());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn pair_tensor_is_traceless(a in 0.01f64..2.0, rx in -5.0f64..5.0, ry in -5.0f64..5.0, s0 in 0.1f64..10.0) {
            prop_assume!(rx * rx + ry * ry > 1e-6);
            let g = gamma_inf_pair(a, [rx, ry], s0).unwrap();
            prop_assert_eq!(g.trace(), 0.0);
            let e = g.sym_eigenvalues();
            let expect = a * a / (2.0 * s0 * (rx * rx + ry * ry));
            prop_assert!((e[1] - expect).abs() < 1e-12 * expect);
            prop_assert!((e[0] + expect).abs() < 1e-12 * expect);
        }

        #[test]
        fn surrogate_respects_physics(seed in any::<u64>(), log_chi in -3.0f64..3.0) {
            let chi = 10f64.powf(log_chi);
            prop_assume!((chi - 1.0).abs() > 1e-3);
            let ms = generate(&McConfig::new(8, 0.35, 0.4, 100, seed)).unwrap();
            let f = ms.volume_fraction();
            let s = eim_conductivity(&ms, 1.0, chi, 2).unwrap();
            let upper = 1.0 - f + f * chi;
            let lower = 1.0 / (1.0 - f + f / chi);
            for e in s.sym_eigenvalues() {
                prop_assert!(e >= lower * (1.0 - 1e-9) && e <= upper * (1.0 + 1e-9), "{} not in [{}, {}]", e, lower, upper);
            }
            if chi > 1.0 { prop_assert!(s.xx > 1.0); } else { prop_assert!(s.xx < 1.0); }
        }
    }
}
