//! Full-field reference solution of the periodic corrector problem.
//!
//! The microstructure is rasterised on an `n × n` pixel grid and the
//! Lippmann–Schwinger equation `E + Γ0[(σ - σ0) E] = Ē` is solved with FFTs.
//! Two schemes are available:
//!
//! * [`Scheme::BasicFixedPoint`]: `E ← E - G[σE] / σ_ref`, the classical
//!   fixed-point iteration, converging at rate `(σ_max - σ_min) / (σ_max + σ_min)`;
//! * [`Scheme::ConjugateGradient`]: conjugate gradients on `G σ G x = -G σ Ē`,
//!   `E = Ē + x`, whose iteration count grows only like `√χ`.
//!
//! `G` is the orthogonal projector onto zero-mean periodic gradient fields.
//! Both schemes stop when the equilibrium residual `‖G[σE]‖ / |⟨σE⟩|`
//! (root mean square over the grid) falls below the tolerance.

mod spectral;

use std::io::{self, Write};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::microstructure::{min_image, Microstructure};
use crate::{Tensor2, Vec2};
use spectral::Projector;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 20_000;

#[derive(Debug, Error)]
pub enum FullFieldError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("solver did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64, history: Vec<f64> },
}

type Result<T> = std::result::Result<T, FullFieldError>;

/// Pixel-wise conductivity, stored row by row: value `(i, j)` at `j * n + i`,
/// `i` along `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConductivityField {
    n: usize,
    cell_side: f64,
    values: Vec<f64>,
}

impl ConductivityField {
    pub fn new(n: usize, cell_side: f64, values: Vec<f64>) -> Result<Self> {
        if n == 0 || values.len() != n * n {
            return Err(FullFieldError::InvalidParameter(format!(
                "expected {} values for a {n}x{n} grid, got {}",
                n * n,
                values.len()
            )));
        }
        if !(cell_side > 0.0) {
            return Err(FullFieldError::InvalidParameter(format!("cell side must be positive, got {cell_side}")));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(FullFieldError::InvalidParameter(format!("conductivity must be positive, got {v}")));
        }
        Ok(ConductivityField { n, cell_side, values })
    }

    pub fn uniform(n: usize, cell_side: f64, sigma: f64) -> Result<Self> {
        Self::new(n, cell_side, vec![sigma; n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cell_side(&self) -> f64 {
        self.cell_side
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Upper Wiener bound.
    pub fn arithmetic_mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Lower Wiener bound.
    pub fn harmonic_mean(&self) -> f64 {
        self.values.len() as f64 / self.values.iter().map(|v| 1.0 / v).sum::<f64>()
    }
}

/// Pixel-centre rasterisation: `χ σ0` inside any disk (minimum image), `σ0` elsewhere.
pub fn rasterize(ms: &Microstructure, n: usize, sigma0: f64, chi: f64) -> Result<ConductivityField> {
    if n < 16 {
        return Err(FullFieldError::InvalidParameter(format!("grid must have at least 16 pixels per side, got {n}")));
    }
    if !(sigma0 > 0.0 && chi > 0.0) {
        return Err(FullFieldError::InvalidParameter("sigma0 and chi must be positive".into()));
    }
    let l = ms.cell_side();
    let h = l / n as f64;
    let mut values = vec![sigma0; n * n];
    let inside = chi * sigma0;
    let smallest = ms.disks().iter().map(|d| d.radius).fold(f64::INFINITY, f64::min);
    if (n as f64) < 8.0 * l / smallest {
        warn!("grid {n} resolves a disk of radius {smallest} with fewer than 8 pixels per radius");
    }
    for disk in ms.disks() {
        let span = |c: f64| {
            let lo = ((c - disk.radius) / h - 0.5).floor() as i64;
            let hi = ((c + disk.radius) / h - 0.5).ceil() as i64;
            (lo, hi.min(lo + n as i64 - 1))
        };
        let (ilo, ihi) = span(disk.center[0]);
        let (jlo, jhi) = span(disk.center[1]);
        let r2 = disk.radius * disk.radius;
        for j in jlo..=jhi {
            let jj = j.rem_euclid(n as i64) as usize;
            let y = (jj as f64 + 0.5) * h;
            for i in ilo..=ihi {
                let ii = i.rem_euclid(n as i64) as usize;
                let x = (ii as f64 + 0.5) * h;
                let d = min_image([x - disk.center[0], y - disk.center[1]], l);
                if d[0] * d[0] + d[1] * d[1] <= r2 {
                    values[jj * n + ii] = inside;
                }
            }
        }
    }
    ConductivityField::new(n, l, values)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    BasicFixedPoint,
    ConjugateGradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// Reference conductivity of the fixed-point scheme; `None` selects
    /// `(σ_min + σ_max) / 2`.
    pub reference_sigma: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            scheme: Scheme::ConjugateGradient,
            reference_sigma: None,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl SolverConfig {
    /// Fixed point below two decades of contrast, conjugate gradients above.
    pub fn for_contrast(chi: f64) -> Self {
        let scheme = if chi.log10().abs() >= 2.0 { Scheme::ConjugateGradient } else { Scheme::BasicFixedPoint };
        SolverConfig { scheme, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(FullFieldError::InvalidParameter(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if let Some(s) = self.reference_sigma {
            if !(s > 0.0) {
                return Err(FullFieldError::InvalidParameter(format!("reference conductivity must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// One residual evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    /// `‖G[σE]‖ / |⟨σE⟩|`.
    pub residual: f64,
    /// `‖G[σE]‖`, unnormalised.
    pub residual_norm: f64,
    /// `⟨σE · E⟩`.
    pub energy: f64,
}

/// Solved local field for one macroscopic load.
#[derive(Clone, Debug)]
pub struct CorrectorSolution {
    pub e: [Vec<f64>; 2],
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
}

impl CorrectorSolution {
    pub fn mean_field(&self) -> Vec2 {
        let m = self.e[0].len() as f64;
        [self.e[0].iter().sum::<f64>() / m, self.e[1].iter().sum::<f64>() / m]
    }

    pub fn final_residual(&self) -> f64 {
        self.history.last().map_or(0.0, |r| r.residual)
    }

    /// `⟨σ E⟩`.
    pub fn mean_flux(&self, field: &ConductivityField) -> Vec2 {
        let m = self.e[0].len() as f64;
        let mut j = [0.0; 2];
        for (k, s) in field.values.iter().enumerate() {
            j[0] += s * self.e[0][k];
            j[1] += s * self.e[1][k];
        }
        [j[0] / m, j[1] / m]
    }
}

struct Workspace {
    projector: Projector,
    jx: Vec<f64>,
    jy: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace { projector: Projector::new(n), jx: vec![0.0; n * n], jy: vec![0.0; n * n], gx: vec![0.0; n * n], gy: vec![0.0; n * n] }
    }

    /// Fills `j = σ u` and `g = G[j]`.
    fn project_flux(&mut self, sigma: &[f64], ux: &[f64], uy: &[f64]) {
        for k in 0..sigma.len() {
            self.jx[k] = sigma[k] * ux[k];
            self.jy[k] = sigma[k] * uy[k];
        }
        self.projector.apply(&self.jx, &self.jy, &mut self.gx, &mut self.gy);
    }

    fn record(&self, ex: &[f64], ey: &[f64]) -> IterationRecord {
        let m = self.jx.len() as f64;
        let (mut mx, mut my, mut energy, mut g2) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..self.jx.len() {
            mx += self.jx[k];
            my += self.jy[k];
            energy += self.jx[k] * ex[k] + self.jy[k] * ey[k];
            g2 += self.gx[k] * self.gx[k] + self.gy[k] * self.gy[k];
        }
        let flux = (mx / m).hypot(my / m);
        let norm = (g2 / m).sqrt();
        IterationRecord { residual: if flux > 0.0 { norm / flux } else { norm }, residual_norm: norm, energy: energy / m }
    }
}

fn dot(ax: &[f64], ay: &[f64], bx: &[f64], by: &[f64]) -> f64 {
    ax.iter().zip(bx).map(|(a, b)| a * b).sum::<f64>() + ay.iter().zip(by).map(|(a, b)| a * b).sum::<f64>()
}

/// Local electric field for the macroscopic field `e_bar`.
pub fn solve_corrector(field: &ConductivityField, e_bar: Vec2, cfg: &SolverConfig) -> Result<CorrectorSolution> {
    cfg.validate()?;
    let n = field.n;
    let mut ws = Workspace::new(n);
    match cfg.scheme {
        Scheme::BasicFixedPoint => basic(field, e_bar, cfg, &mut ws),
        Scheme::ConjugateGradient => conjugate_gradient(field, e_bar, cfg, &mut ws),
    }
}

fn not_converged(iterations: usize, history: &[IterationRecord]) -> FullFieldError {
    FullFieldError::NotConverged {
        iterations,
        residual: history.last().map_or(f64::NAN, |r| r.residual),
        history: history.iter().map(|r| r.residual).collect(),
    }
}

fn basic(field: &ConductivityField, e_bar: Vec2, cfg: &SolverConfig, ws: &mut Workspace) -> Result<CorrectorSolution> {
    let m = field.values.len();
    let sigma_ref = cfg.reference_sigma.unwrap_or(0.5 * (field.min() + field.max()));
    let mut ex = vec![e_bar[0]; m];
    let mut ey = vec![e_bar[1]; m];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        ws.project_flux(&field.values, &ex, &ey);
        let rec = ws.record(&ex, &ey);
        history.push(rec);
        if rec.residual <= cfg.tolerance {
            break;
        }
        if iterations >= cfg.max_iterations {
            return Err(not_converged(iterations, &history));
        }
        for k in 0..m {
            ex[k] -= ws.gx[k] / sigma_ref;
            ey[k] -= ws.gy[k] / sigma_ref;
        }
        iterations += 1;
    }
    Ok(CorrectorSolution { e: [ex, ey], iterations, history })
}

fn conjugate_gradient(field: &ConductivityField, e_bar: Vec2, cfg: &SolverConfig, ws: &mut Workspace) -> Result<CorrectorSolution> {
    let m = field.values.len();
    let sigma = &field.values;
    let mut ex = vec![e_bar[0]; m];
    let mut ey = vec![e_bar[1]; m];
    let mut history = Vec::new();
    let mut iterations = 0;
    let (mut px, mut py) = (vec![0.0; m], vec![0.0; m]);
    let (mut rx, mut ry) = (vec![0.0; m], vec![0.0; m]);
    // Outer loop restarts from the true residual whenever the recursively
    // updated one has drifted below tolerance on its own.
    loop {
        ws.project_flux(sigma, &ex, &ey);
        let rec = ws.record(&ex, &ey);
        history.push(rec);
        if rec.residual <= cfg.tolerance {
            break;
        }
        for k in 0..m {
            rx[k] = -ws.gx[k];
            ry[k] = -ws.gy[k];
        }
        px.copy_from_slice(&rx);
        py.copy_from_slice(&ry);
        let mut rr = dot(&rx, &ry, &rx, &ry);
        let scale = rec.residual_norm / rec.residual;
        loop {
            if iterations >= cfg.max_iterations {
                return Err(not_converged(iterations, &history));
            }
            ws.project_flux(sigma, &px, &py);
            let curvature = dot(&px, &py, &ws.gx, &ws.gy);
            if !(curvature > 0.0) {
                return Err(not_converged(iterations, &history));
            }
            let alpha = rr / curvature;
            for k in 0..m {
                ex[k] += alpha * px[k];
                ey[k] += alpha * py[k];
                rx[k] -= alpha * ws.gx[k];
                ry[k] -= alpha * ws.gy[k];
            }
            iterations += 1;
            let rr_new = dot(&rx, &ry, &rx, &ry);
            let energy = (0..m).map(|k| sigma[k] * (ex[k] * ex[k] + ey[k] * ey[k])).sum::<f64>() / m as f64;
            let norm = (rr_new / m as f64).sqrt();
            history.push(IterationRecord { residual: norm / scale, residual_norm: norm, energy });
            if norm / scale <= cfg.tolerance {
                break;
            }
            let beta = rr_new / rr;
            rr = rr_new;
            for k in 0..m {
                px[k] = rx[k] + beta * px[k];
                py[k] = ry[k] + beta * py[k];
            }
        }
    }
    Ok(CorrectorSolution { e: [ex, ey], iterations, history })
}

/// Full-field apparent conductivity with diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullFieldResult {
    /// Symmetrised apparent conductivity.
    pub sigma_app: Tensor2,
    /// `|σ_xy - σ_yx|` before symmetrisation.
    pub asymmetry: f64,
    pub iterations: [usize; 2],
    pub final_residual: f64,
    /// `⟨E⟩` for each load case.
    pub mean_field: [Vec2; 2],
    /// Whether both eigenvalues lie within the Wiener bounds of the pixel field.
    pub within_wiener_bounds: bool,
}

/// Solves `Ē = e₁` and `Ē = e₂`; column `j` of the result is `⟨σ E⁽ʲ⁾⟩`.
pub fn apparent_conductivity(field: &ConductivityField, cfg: &SolverConfig) -> Result<FullFieldResult> {
    let mut columns = [[0.0; 2]; 2];
    let mut iterations = [0; 2];
    let mut mean_field = [[0.0; 2]; 2];
    let mut final_residual: f64 = 0.0;
    for j in 0..2 {
        let mut e_bar = [0.0; 2];
        e_bar[j] = 1.0;
        let sol = solve_corrector(field, e_bar, cfg)?;
        columns[j] = sol.mean_flux(field);
        iterations[j] = sol.iterations;
        mean_field[j] = sol.mean_field();
        final_residual = final_residual.max(sol.final_residual());
    }
    let raw = Tensor2::from_columns(columns[0], columns[1]);
    let sigma_app = raw.sym();
    let slack = 10.0 * cfg.tolerance + 1e-12;
    let [lo, hi] = sigma_app.sym_eigenvalues();
    let within = lo >= field.harmonic_mean() * (1.0 - slack) && hi <= field.arithmetic_mean() * (1.0 + slack);
    if !within {
        warn!("apparent conductivity eigenvalues [{lo}, {hi}] violate the Wiener bounds");
    }
    Ok(FullFieldResult {
        sigma_app,
        asymmetry: raw.asymmetry(),
        iterations,
        final_residual,
        mean_field,
        within_wiener_bounds: within,
    })
}

/// Text dump for debugging: a header line, then `i j sigma e_x e_y` per pixel.
pub fn write_field_dump<W: Write>(
    mut out: W,
    field: &ConductivityField,
    solution: &CorrectorSolution,
    load_case: usize,
) -> io::Result<()> {
    writeln!(out, "# n={} L={} load_case={}", field.n, field.cell_side, load_case)?;
    for j in 0..field.n {
        for i in 0..field.n {
            let k = j * field.n + i;
            writeln!(out, "{i} {j} {} {} {}", field.values[k], solution.e[0][k], solution.e[1][k])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microstructure::{generate, Disk, McConfig};
    use std::f64::consts::PI;

    fn laminate(n: usize, soft: f64, hard: f64) -> ConductivityField {
        let values = (0..n * n).map(|k| if k % n < n / 2 { soft } else { hard }).collect();
        ConductivityField::new(n, 1.0, values).unwrap()
    }

    fn cfg(scheme: Scheme, tolerance: f64) -> SolverConfig {
        SolverConfig { scheme, tolerance, ..SolverConfig::default() }
    }

    #[test]
    fn uniform_field() {
        let field = ConductivityField::uniform(16, 1.0, 3.0).unwrap();
        for scheme in [Scheme::BasicFixedPoint, Scheme::ConjugateGradient] {
            let sol = solve_corrector(&field, [0.3, -1.2], &cfg(scheme, 1e-10)).unwrap();
            assert!(sol.iterations <= 1);
            assert_eq!(sol.final_residual(), 0.0);
            assert!(sol.e[0].iter().all(|&v| v == 0.3) && sol.e[1].iter().all(|&v| v == -1.2));
            let r = apparent_conductivity(&field, &cfg(scheme, 1e-10)).unwrap();
            assert_eq!(r.sigma_app, Tensor2::isotropic(3.0));
        }
    }

    #[test]
    fn laminate_is_exact() {
        let field = laminate(32, 1.0, 100.0);
        for scheme in [Scheme::BasicFixedPoint, Scheme::ConjugateGradient] {
            let c = cfg(scheme, 1e-10);
            let r = apparent_conductivity(&field, &c).unwrap();
            assert!((r.sigma_app.xx - 2.0 / 1.01).abs() < 10.0 * 1e-10 * 2.0, "{scheme:?} {}", r.sigma_app);
            assert!((r.sigma_app.yy - 50.5).abs() < 10.0 * 1e-10 * 50.5);
            assert!(r.sigma_app.xy.abs() < 1e-8);
            let sol = solve_corrector(&field, [1.0, 0.0], &c).unwrap();
            // Piecewise constant field with continuous flux.
            let (e_soft, e_hard) = (sol.e[0][0], sol.e[0][31]);
            for k in 0..32 * 32 {
                let want = if k % 32 < 16 { e_soft } else { e_hard };
                assert!((sol.e[0][k] - want).abs() < 1e-8 && sol.e[1][k].abs() < 1e-8);
            }
            assert!((e_soft - 100.0 * e_hard).abs() < 1e-7);
        }
    }

    #[test]
    fn mean_field_is_pinned() {
        let ms = generate(&McConfig::new(8, 0.4, 0.45, 100, 3)).unwrap();
        let field = rasterize(&ms, 64, 1.0, 30.0).unwrap();
        for scheme in [Scheme::BasicFixedPoint, Scheme::ConjugateGradient] {
            let r = apparent_conductivity(&field, &cfg(scheme, 1e-8)).unwrap();
            assert!((r.mean_field[0][0] - 1.0).abs() < 1e-10 && r.mean_field[0][1].abs() < 1e-10);
            assert!((r.mean_field[1][1] - 1.0).abs() < 1e-10 && r.mean_field[1][0].abs() < 1e-10);
            assert!(r.within_wiener_bounds);
            assert!(r.asymmetry <= 10.0 * 1e-8 * r.sigma_app.max_abs());
        }
    }

    #[test]
    fn schemes_agree() {
        let ms = generate(&McConfig::new(8, 0.4, 0.45, 100, 8)).unwrap();
        let field = rasterize(&ms, 64, 1.0, 10.0).unwrap();
        let a = apparent_conductivity(&field, &cfg(Scheme::BasicFixedPoint, 1e-10)).unwrap();
        let b = apparent_conductivity(&field, &cfg(Scheme::ConjugateGradient, 1e-10)).unwrap();
        assert!((a.sigma_app - b.sigma_app).max_abs() < 1e-8, "{} vs {}", a.sigma_app, b.sigma_app);
    }

    #[test]
    fn dilute_disk_matches_maxwell_garnett() {
        let (f, chi) = (0.05, 10.0);
        let ms = Microstructure::new(1.0, vec![Disk::new([0.5, 0.5], (f / PI).sqrt())]).unwrap();
        let field = rasterize(&ms, 256, 1.0, chi).unwrap();
        let r = apparent_conductivity(&field, &SolverConfig::for_contrast(chi)).unwrap();
        let mg = 1.0 + 2.0 * f * (chi - 1.0) / (2.0 + (1.0 - f) * (chi - 1.0));
        assert!(((r.sigma_app.xx - mg) / mg).abs() < 0.01, "{} vs {mg}", r.sigma_app.xx);
    }

    #[test]
    fn rasterized_fraction_converges() {
        let ms = Microstructure::new(1.0, vec![Disk::new([0.37, 0.61], 0.3)]).unwrap();
        let f = ms.volume_fraction();
        for n in [32usize, 64, 128, 256] {
            let field = rasterize(&ms, n, 1.0, 2.0).unwrap();
            let frac = field.values().iter().filter(|&&v| v == 2.0).count() as f64 / (n * n) as f64;
            assert!((frac - f).abs() < 4.0 / n as f64, "n={n}: {frac} vs {f}");
        }
        let empty = Microstructure::new(1.0, vec![]).unwrap();
        assert_eq!(rasterize(&empty, 16, 2.5, 9.0).unwrap(), ConductivityField::uniform(16, 1.0, 2.5).unwrap());
    }

    #[test]
    fn rasterization_is_translation_equivariant() {
        let n = 64;
        let h = 1.0 / n as f64;
        // Dyadic centres keep the shifted geometry exactly representable.
        let ms = Microstructure::new(1.0, vec![Disk::new([0.125, 0.5625], 0.2), Disk::new([0.625, 0.21875], 0.15)]).unwrap();
        let a = rasterize(&ms, n, 1.0, 5.0).unwrap();
        let b = rasterize(&ms.translated([h, 0.0]), n, 1.0, 5.0).unwrap();
        for j in 0..n {
            for i in 0..n {
                assert_eq!(b.get((i + 1) % n, j), a.get(i, j));
            }
        }
    }

    #[test]
    fn cg_energy_and_basic_residual_are_monotone() {
        let ms = generate(&McConfig::new(8, 0.4, 0.45, 100, 4)).unwrap();
        let field = rasterize(&ms, 64, 1.0, 50.0).unwrap();
        let cg = solve_corrector(&field, [1.0, 0.0], &cfg(Scheme::ConjugateGradient, 1e-9)).unwrap();
        for w in cg.history.windows(2) {
            assert!(w[1].energy <= w[0].energy * (1.0 + 1e-13), "{:?}", w);
        }
        let basic = solve_corrector(&field, [1.0, 0.0], &cfg(Scheme::BasicFixedPoint, 1e-6)).unwrap();
        for w in basic.history.windows(2) {
            assert!(w[1].residual_norm < w[0].residual_norm);
        }
        assert!(cg.iterations < basic.iterations);
    }

    #[test]
    fn keller_duality() {
        // Square array of disks: isotropic by symmetry.
        let ms = Microstructure::new(1.0, vec![Disk::new([0.5, 0.5], 0.3)]).unwrap();
        let chi = 10.0;
        let c = SolverConfig::default();
        let a = apparent_conductivity(&rasterize(&ms, 128, 1.0, chi).unwrap(), &c).unwrap();
        let b = apparent_conductivity(&rasterize(&ms, 128, 1.0, 1.0 / chi).unwrap(), &c).unwrap();
        let product = a.sigma_app.xx * b.sigma_app.xx;
        assert!((product - 1.0).abs() < 0.02, "product {product}");
    }

    #[test]
    fn grid_refinement_trend() {
        let ms = Microstructure::new(1.0, vec![Disk::new([0.5, 0.5], 0.3)]).unwrap();
        let s = |n| apparent_conductivity(&rasterize(&ms, n, 1.0, 10.0).unwrap(), &SolverConfig::default()).unwrap().sigma_app.xx;
        let v: Vec<f64> = [32, 64, 128, 256].iter().map(|&n| s(n)).collect();
        let first = (v[1] - v[0]).abs();
        let last = (v[3] - v[2]).abs();
        assert!(last < first, "{v:?}");
    }

    #[test]
    fn non_convergence_is_reported() {
        let ms = Microstructure::new(1.0, vec![Disk::new([0.5, 0.5], 0.3)]).unwrap();
        let field = rasterize(&ms, 32, 1.0, 1e4).unwrap();
        let c = SolverConfig { scheme: Scheme::BasicFixedPoint, max_iterations: 3, ..SolverConfig::default() };
        match solve_corrector(&field, [1.0, 0.0], &c) {
            Err(FullFieldError::NotConverged { iterations, history, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(history.len(), 4);
            }
            Err(e) => panic!("unexpected error {e}"),
            Ok(sol) => panic!("converged in {} iterations", sol.iterations),
        }
    }

    #[test]
    fn dump_has_header_and_rows() {
        let field = ConductivityField::uniform(16, 1.0, 1.0).unwrap();
        let sol = solve_corrector(&field, [1.0, 0.0], &SolverConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_field_dump(&mut buf, &field, &sol, 0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# n=16 L=1 load_case=0\n"));
        assert_eq!(text.lines().count(), 1 + 256);
    }
}
