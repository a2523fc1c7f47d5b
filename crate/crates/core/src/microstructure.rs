//! Periodic assemblies of non-overlapping disks.
//!
//! Microstructures live in the square cell `[0, L)²` and are periodic: every
//! geometric test (overlap, gap, distance) uses the minimum-image convention.
//! Random configurations are produced by a standard hard-disk Monte-Carlo
//! scheme started from a regular lattice; gaps between disks are enforced by
//! equilibrating at a larger fraction `f'` and shrinking the radii to the
//! target fraction `f` afterwards.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::Vec2;

/// Close-packing fraction of monodisperse disks in the plane.
pub const CLOSE_PACKING_FRACTION: f64 = PI / (2.0 * 1.732_050_807_568_877_2);

pub const SCHEMA_VERSION: u32 = 1;

// Tangent disks are legal; this slack absorbs rounding of the squared distance.
const CONTACT_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MicrostructureError {
    #[error("{0} disks cannot fill a centred-square (2k²) or square (k²) lattice")]
    LatticeCount(usize),
    #[error("radius {radius} does not fit the lattice spacing (nearest-neighbour distance {spacing})")]
    RadiusTooLarge { radius: f64, spacing: f64 },
    #[error("disks {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("final fraction {target} exceeds initial fraction {initial}")]
    FractionIncrease { initial: f64, target: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed microstructure document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),
}

type Result<T> = std::result::Result<T, MicrostructureError>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disk {
    pub center: Vec2,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Vec2, radius: f64) -> Self {
        Disk { center, radius }
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }
}

/// How a microstructure was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub seed: u64,
    pub cycles: u64,
    pub f_initial: f64,
    pub f_final: f64,
    pub gap_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Microstructure {
    cell_side: f64,
    disks: Vec<Disk>,
    provenance: Provenance,
}

/// Wraps a coordinate into `[0, L)`.
pub fn wrap(x: f64, cell_side: f64) -> f64 {
    let w = x - cell_side * (x / cell_side).floor();
    if w >= cell_side {
        0.0
    } else {
        w
    }
}

/// Minimum-image representative of the separation vector `d`.
pub fn min_image(d: Vec2, cell_side: f64) -> Vec2 {
    [
        d[0] - cell_side * (d[0] / cell_side).round(),
        d[1] - cell_side * (d[1] / cell_side).round(),
    ]
}

/// Distance between `x` and the nearest periodic image of `y`.
pub fn periodic_distance(x: Vec2, y: Vec2, cell_side: f64) -> f64 {
    let d = min_image([x[0] - y[0], x[1] - y[1]], cell_side);
    d[0].hypot(d[1])
}

fn squared_periodic_distance(x: Vec2, y: Vec2, cell_side: f64) -> f64 {
    let d = min_image([x[0] - y[0], x[1] - y[1]], cell_side);
    d[0] * d[0] + d[1] * d[1]
}

fn overlapping(d2: f64, contact: f64) -> bool {
    d2 < contact * contact * (1.0 - CONTACT_SLACK)
}

impl Microstructure {
    /// Builds a validated microstructure; centers are wrapped into the cell.
    pub fn new(cell_side: f64, disks: Vec<Disk>) -> Result<Self> {
        if !(cell_side > 0.0 && cell_side.is_finite()) {
            return Err(MicrostructureError::InvalidParameter(format!(
                "cell side must be positive, got {cell_side}"
            )));
        }
        let mut disks = disks;
        for (i, d) in disks.iter_mut().enumerate() {
            if !(d.radius > 0.0 && d.radius.is_finite()) {
                return Err(MicrostructureError::InvalidParameter(format!(
                    "disk {i} has non-positive radius {}",
                    d.radius
                )));
            }
            if !(d.center[0].is_finite() && d.center[1].is_finite()) {
                return Err(MicrostructureError::InvalidParameter(format!(
                    "disk {i} has a non-finite center"
                )));
            }
            d.center = [wrap(d.center[0], cell_side), wrap(d.center[1], cell_side)];
        }
        let mut ms = Microstructure {
            cell_side,
            disks,
            provenance: Provenance { seed: 0, cycles: 0, f_initial: 0.0, f_final: 0.0, gap_ratio: 0.0 },
        };
        if let Some((i, j)) = ms.find_overlap() {
            return Err(MicrostructureError::Overlap(i, j));
        }
        let f = ms.volume_fraction();
        ms.provenance.f_initial = f;
        ms.provenance.f_final = f;
        Ok(ms)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn cell_side(&self) -> f64 {
        self.cell_side
    }

    pub fn disks(&self) -> &[Disk] {
        &self.disks
    }

    pub fn len(&self) -> usize {
        self.disks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.disks.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Area fraction of a single disk in the cell.
    pub fn disk_fraction(&self, index: usize) -> f64 {
        self.disks[index].area() / (self.cell_side * self.cell_side)
    }

    pub fn volume_fraction(&self) -> f64 {
        self.disks.iter().map(Disk::area).sum::<f64>() / (self.cell_side * self.cell_side)
    }

    /// First overlapping pair under the minimum-image convention.
    pub fn find_overlap(&self) -> Option<(usize, usize)> {
        for i in 0..self.disks.len() {
            for j in (i + 1)..self.disks.len() {
                let (a, b) = (&self.disks[i], &self.disks[j]);
                let d2 = squared_periodic_distance(a.center, b.center, self.cell_side);
                if overlapping(d2, a.radius + b.radius) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Smallest surface-to-surface periodic gap, `None` with fewer than two disks.
    pub fn min_surface_gap(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for i in 0..self.disks.len() {
            for j in (i + 1)..self.disks.len() {
                let (a, b) = (&self.disks[i], &self.disks[j]);
                let gap = periodic_distance(a.center, b.center, self.cell_side) - a.radius - b.radius;
                best = Some(best.map_or(gap, |g| g.min(gap)));
            }
        }
        best
    }

    /// Rigid translation of every disk, re-wrapped into the cell.
    pub fn translated(&self, t: Vec2) -> Self {
        let mut out = self.clone();
        for d in &mut out.disks {
            d.center = [
                wrap(d.center[0] + t[0], self.cell_side),
                wrap(d.center[1] + t[1], self.cell_side),
            ];
        }
        out
    }

    /// Pretty JSON document with full-precision (round-trip exact) numbers.
    pub fn to_json(&self) -> String {
        let doc = Document {
            schema_version: SCHEMA_VERSION,
            cell_side: self.cell_side,
            disks: self
                .disks
                .iter()
                .map(|d| DiskRecord { x: d.center[0], y: d.center[1], a: d.radius })
                .collect(),
            provenance: self.provenance.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("microstructure documents always serialise")
    }

    /// Parses and validates a JSON document (overlaps are rejected).
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(MicrostructureError::SchemaVersion(doc.schema_version));
        }
        let disks = doc.disks.iter().map(|d| Disk::new([d.x, d.y], d.a)).collect();
        Ok(Microstructure::new(doc.cell_side, disks)?.with_provenance(doc.provenance))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    schema_version: u32,
    #[serde(rename = "L")]
    cell_side: f64,
    disks: Vec<DiskRecord>,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiskRecord {
    x: f64,
    y: f64,
    a: f64,
}

/// Radius of `n` equal disks covering fraction `f` of a cell of side `L`.
pub fn radius_for_fraction(n: usize, fraction: f64, cell_side: f64) -> f64 {
    cell_side * (fraction / (n as f64 * PI)).sqrt()
}

/// Regular starting configuration.
///
/// `n = 2k²` gives the centred-square lattice (corner and centre sites of a
/// `k × k` tiling, nearest-neighbour distance `L / (k√2)`); `n = k²` gives the
/// plain square lattice (distance `L / k`).
pub fn lattice_init(n: usize, cell_side: f64, radius: f64) -> Result<Microstructure> {
    if !(radius > 0.0) {
        return Err(MicrostructureError::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    let (centers, spacing) = if let Some(k) = exact_sqrt(n / 2).filter(|_| n.is_multiple_of(2) && n > 0) {
        let s = cell_side / k as f64;
        let mut centers = Vec::with_capacity(n);
        for i in 0..k {
            for j in 0..k {
                centers.push([i as f64 * s, j as f64 * s]);
                centers.push([(i as f64 + 0.5) * s, (j as f64 + 0.5) * s]);
            }
        }
        (centers, s / std::f64::consts::SQRT_2)
    } else if let Some(k) = exact_sqrt(n).filter(|_| n > 0) {
        let s = cell_side / k as f64;
        let centers = (0..k)
            .flat_map(|i| (0..k).map(move |j| [i as f64 * s, j as f64 * s]))
            .collect();
        (centers, s)
    } else {
        return Err(MicrostructureError::LatticeCount(n));
    };
    if n > 1 && 2.0 * radius > spacing * (1.0 + CONTACT_SLACK) {
        return Err(MicrostructureError::RadiusTooLarge { radius, spacing });
    }
    let disks = centers.into_iter().map(|c| Disk::new(c, radius)).collect();
    Microstructure::new(cell_side, disks)
}

fn exact_sqrt(n: usize) -> Option<usize> {
    let k = (n as f64).sqrt().round() as usize;
    (k * k == n).then_some(k)
}

/// Parameters of the hard-disk Monte-Carlo generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_disks: usize,
    pub target_fraction: f64,
    pub initial_fraction: f64,
    pub cycles: u64,
    pub adapt_interval: u64,
    pub target_acceptance: f64,
    pub amplitude_up: f64,
    pub amplitude_down: f64,
    pub seed: u64,
}

impl McConfig {
    pub fn new(n_disks: usize, target_fraction: f64, initial_fraction: f64, cycles: u64, seed: u64) -> Self {
        McConfig {
            n_disks,
            target_fraction,
            initial_fraction,
            cycles,
            adapt_interval: 50,
            target_acceptance: 0.3,
            amplitude_up: 1.05,
            amplitude_down: 0.95,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (f, fp) = (self.target_fraction, self.initial_fraction);
        if !(f > 0.0 && f <= fp && fp < CLOSE_PACKING_FRACTION) {
            return Err(MicrostructureError::InvalidParameter(format!(
                "fractions must satisfy 0 < f <= f' < {CLOSE_PACKING_FRACTION:.4}, got f = {f}, f' = {fp}"
            )));
        }
        if self.n_disks == 0 {
            return Err(MicrostructureError::InvalidParameter("at least one disk is required".into()));
        }
        if self.adapt_interval == 0 {
            return Err(MicrostructureError::InvalidParameter("adapt_interval must be >= 1".into()));
        }
        if !(self.amplitude_up >= 1.0 && self.amplitude_down > 0.0 && self.amplitude_down <= 1.0) {
            return Err(MicrostructureError::InvalidParameter("amplitude factors out of range".into()));
        }
        Ok(())
    }
}

/// Output of [`mc_equilibrate`].
#[derive(Clone, Debug)]
pub struct Equilibration {
    pub microstructure: Microstructure,
    /// Acceptance ratio of each completed adaptation window.
    pub acceptance_history: Vec<f64>,
    pub final_amplitude: f64,
}

impl Equilibration {
    pub fn final_acceptance(&self) -> Option<f64> {
        self.acceptance_history.last().copied()
    }
}

/// Hard-disk Metropolis equilibration.
///
/// Each cycle proposes one displacement, uniform in `[-δ, δ]²`, for every disk
/// in turn; a move is accepted iff it creates no periodic overlap. After every
/// `adapt_interval` cycles the amplitude `δ` (initially half the smallest
/// radius) is multiplied by `amplitude_up` when the acceptance ratio measured
/// over that window exceeds `target_acceptance`, by `amplitude_down` otherwise.
pub fn mc_equilibrate(ms: &Microstructure, cfg: &McConfig, seed: u64) -> Equilibration {
    let l = ms.cell_side;
    let mut disks = ms.disks.clone();
    let n = disks.len();
    let min_radius = disks.iter().map(|d| d.radius).fold(f64::INFINITY, f64::min);
    let mut amplitude = if n > 0 { 0.5 * min_radius } else { 0.0 };
    let mut history = Vec::new();
    let mut rng = rng::stream(seed);
    let mut accepted_in_window = 0u64;
    let adapt = cfg.adapt_interval.max(1);

    for cycle in 1..=cfg.cycles {
        for i in 0..n {
            let dx = amplitude * (2.0 * rng.random::<f64>() - 1.0);
            let dy = amplitude * (2.0 * rng.random::<f64>() - 1.0);
            let trial = [wrap(disks[i].center[0] + dx, l), wrap(disks[i].center[1] + dy, l)];
            let ri = disks[i].radius;
            let blocked = disks.iter().enumerate().any(|(j, other)| {
                j != i && overlapping(squared_periodic_distance(trial, other.center, l), ri + other.radius)
            });
            if !blocked {
                disks[i].center = trial;
                accepted_in_window += 1;
            }
        }
        if cycle % adapt == 0 {
            let ratio = if n > 0 { accepted_in_window as f64 / (adapt * n as u64) as f64 } else { 0.0 };
            history.push(ratio);
            amplitude *= if ratio > cfg.target_acceptance { cfg.amplitude_up } else { cfg.amplitude_down };
            amplitude = amplitude.min(0.5 * l);
            accepted_in_window = 0;
            debug_assert!(no_overlap(&disks, l), "overlap after Monte-Carlo window ending at cycle {cycle}");
        }
    }

    let mut provenance = ms.provenance.clone();
    provenance.seed = seed;
    provenance.cycles += cfg.cycles;
    Equilibration {
        microstructure: Microstructure { cell_side: l, disks, provenance },
        acceptance_history: history,
        final_amplitude: amplitude,
    }
}

fn no_overlap(disks: &[Disk], l: f64) -> bool {
    (0..disks.len()).all(|i| {
        ((i + 1)..disks.len()).all(|j| {
            !overlapping(
                squared_periodic_distance(disks[i].center, disks[j].center, l),
                disks[i].radius + disks[j].radius,
            )
        })
    })
}

/// Scales every radius by `√(f / f')`, leaving a minimum gap `g = 2(a' - a)`.
pub fn shrink_radii(ms: &Microstructure, initial_fraction: f64, target_fraction: f64) -> Result<Microstructure> {
    if !(target_fraction > 0.0 && initial_fraction > 0.0) {
        return Err(MicrostructureError::InvalidParameter("fractions must be positive".into()));
    }
    if target_fraction > initial_fraction {
        return Err(MicrostructureError::FractionIncrease { initial: initial_fraction, target: target_fraction });
    }
    let scale = (target_fraction / initial_fraction).sqrt();
    let mut out = ms.clone();
    for d in &mut out.disks {
        d.radius *= scale;
    }
    out.provenance.f_initial = initial_fraction;
    out.provenance.f_final = target_fraction;
    out.provenance.gap_ratio = gap_ratio(initial_fraction, target_fraction);
    Ok(out)
}

/// `g / a = 2 (a'/a - 1)` for a shrink from `f'` to `f`.
pub fn gap_ratio(initial_fraction: f64, target_fraction: f64) -> f64 {
    2.0 * ((initial_fraction / target_fraction).sqrt() - 1.0)
}

/// Full generation pipeline in a unit cell: lattice at `f'`, equilibration,
/// shrink to `f`.
pub fn generate(cfg: &McConfig) -> Result<Microstructure> {
    cfg.validate()?;
    let radius = radius_for_fraction(cfg.n_disks, cfg.initial_fraction, 1.0);
    let start = lattice_init(cfg.n_disks, 1.0, radius)?;
    let eq = mc_equilibrate(&start, cfg, cfg.seed);
    let mut ms = shrink_radii(&eq.microstructure, cfg.initial_fraction, cfg.target_fraction)?;
    ms.provenance.seed = cfg.seed;
    Ok(ms)
}
