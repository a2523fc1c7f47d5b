//! The five subcommands. Each returns its results so callers (the binary,
//! tests) can inspect them; files are written under `cfg.out_dir`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use eimvr::eim::influence_poisson;
use eimvr::greenfun::influence_fourier;
use eimvr::microstructure::{gap_ratio, Disk};
use eimvr::Tensor2;

use crate::config::ExperimentConfig;
use crate::error::{CliError, IoContext, Result};
use crate::pipeline::{
    build_ensemble, chi_dir, claim_directory, process_records, summarize, write_json, write_relative_errors, Member,
    Summary,
};

/// Writes the `surrogate_samples` realizations of the configured family.
pub fn generate(cfg: &ExperimentConfig) -> Result<Vec<Member>> {
    claim_directory(&cfg.out_dir, cfg)?;
    let members = build_ensemble(cfg, cfg.initial_fraction, cfg.surrogate_samples, &cfg.out_dir)?;
    info!("wrote {} microstructures to {}", members.len(), cfg.out_dir.display());
    Ok(members)
}

fn estimate_family(cfg: &ExperimentConfig, initial_fraction: f64, dir: &Path) -> Result<Summary> {
    claim_directory(dir, cfg)?;
    let members = build_ensemble(cfg, initial_fraction, cfg.surrogate_samples, dir)?;
    let truncations = [cfg.truncation_p];
    let records = process_records(cfg, &members, cfg.chi, &truncations, dir)?;
    let summary = summarize(cfg, initial_fraction, cfg.chi, &truncations, &records)?;
    write_json(&dir.join("summary.json"), &summary)?;
    write_relative_errors(&dir.join("relative_errors.csv"), &records, cfg.full_field_samples, cfg.truncation_p)?;
    Ok(summary)
}

/// Surrogate on every realization, full field on the first `M`, then the
/// control-variate estimate of each tensor component.
pub fn estimate(cfg: &ExperimentConfig) -> Result<Summary> {
    let summary = estimate_family(cfg, cfg.initial_fraction, &cfg.out_dir)?;
    info!("summary written to {}", cfg.out_dir.join("summary.json").display());
    Ok(summary)
}

/// One row of `sweep.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub chi: f64,
    #[serde(rename = "P")]
    pub truncation: usize,
    pub component: String,
    pub mean: f64,
    pub ci_plain: f64,
    /// Nominal half-width of the reduced estimator, `α σ_Z / √M`.
    pub ci_reduced: f64,
    pub xi_star: f64,
    pub corr: f64,
    pub efficiency: f64,
    pub effective_efficiency: f64,
}

/// Runs the estimate at every contrast of `chi_list` on one shared ensemble
/// and writes `sweep.csv`.
pub fn sweep_contrast(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let root = &cfg.out_dir;
    claim_directory(root, cfg)?;
    let members = build_ensemble(cfg, cfg.initial_fraction, cfg.surrogate_samples, root)?;
    let mut rows = Vec::new();
    for &chi in &cfg.chi_list {
        let dir = chi_dir(root, chi);
        info!("contrast {chi:e}");
        let records = process_records(cfg, &members, chi, &cfg.truncation_list, &dir)?;
        let summary = summarize(cfg, cfg.initial_fraction, chi, &cfg.truncation_list, &records)?;
        write_json(&dir.join("summary.json"), &summary)?;
        for c in &summary.components {
            let e = &c.estimate;
            rows.push(SweepRow {
                chi,
                truncation: c.truncation,
                component: c.component.clone(),
                mean: e.mean,
                ci_plain: e.plain_ci_halfwidth,
                ci_reduced: e.ci_halfwidth,
                xi_star: e.xi_star,
                corr: e.correlation,
                efficiency: e.efficiency_index,
                effective_efficiency: e.effective_efficiency_index,
            });
        }
    }
    let mut w = csv::Writer::from_path(root.join("sweep.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(rows)
}

/// Mean of `σ_app,11` for one family with both confidence intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyRow {
    pub initial_fraction: f64,
    pub gap_ratio: f64,
    pub plain_mean: f64,
    pub plain_ci: f64,
    pub reduced_mean: f64,
    /// Includes the uncertainty of the surrogate mean.
    pub reduced_ci: f64,
    pub efficiency: f64,
}

impl FamilyRow {
    pub fn plain_interval(&self) -> (f64, f64) {
        (self.plain_mean - self.plain_ci, self.plain_mean + self.plain_ci)
    }

    pub fn reduced_interval(&self) -> (f64, f64) {
        (self.reduced_mean - self.reduced_ci, self.reduced_mean + self.reduced_ci)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discrimination {
    pub chi: f64,
    /// Families sorted by increasing gap.
    pub families: Vec<FamilyRow>,
    /// Whether some pair of families has overlapping plain intervals.
    pub plain_overlap: bool,
    /// Whether some pair of families has overlapping reduced intervals.
    pub reduced_overlap: bool,
    /// Reduced means strictly decrease as the gap grows.
    pub decreasing_with_gap: bool,
}

fn overlap(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

/// Estimates `σ_app,11` on every family of `family_initial_fractions`.
pub fn discriminate(cfg: &ExperimentConfig) -> Result<Discrimination> {
    if let Some(fp) = cfg.family_initial_fractions.iter().find(|&&fp| fp < cfg.fraction) {
        return Err(CliError::Config(format!("family initial fraction {fp} is below fraction {}", cfg.fraction)));
    }
    claim_directory(&cfg.out_dir, cfg)?;
    let mut families = Vec::new();
    for &fp in &cfg.family_initial_fractions {
        let dir = cfg.out_dir.join(format!("family_{fp:.2}"));
        info!("family f' = {fp:.2}");
        let summary = estimate_family(cfg, fp, &dir)?;
        let e = &summary.component("11", cfg.truncation_p).expect("component 11 is always estimated").estimate;
        families.push(FamilyRow {
            initial_fraction: fp,
            gap_ratio: gap_ratio(fp, cfg.fraction),
            plain_mean: e.plain_mean,
            plain_ci: e.plain_ci_halfwidth,
            reduced_mean: e.mean,
            reduced_ci: e.total_ci_halfwidth,
            efficiency: e.efficiency_index,
        });
    }
    families.sort_by(|a, b| a.gap_ratio.total_cmp(&b.gap_ratio));
    let pairs = || families.iter().enumerate().flat_map(|(i, a)| families[i + 1..].iter().map(move |b| (a, b)));
    let report = Discrimination {
        chi: cfg.chi,
        plain_overlap: pairs().any(|(a, b)| overlap(a.plain_interval(), b.plain_interval())),
        reduced_overlap: pairs().any(|(a, b)| overlap(a.reduced_interval(), b.reduced_interval())),
        decreasing_with_gap: families.windows(2).all(|w| w[1].reduced_mean < w[0].reduced_mean),
        families,
    };
    write_json(&cfg.out_dir.join("discrimination.json"), &report)?;
    Ok(report)
}

impl Discrimination {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>6} {:>7} {:>24} {:>24} {:>6}", "f'", "g/a", "plain CI", "reduced CI", "eff");
        for f in &self.families {
            let (pl, pu) = f.plain_interval();
            let (rl, ru) = f.reduced_interval();
            let _ = writeln!(
                s,
                "{:>6.2} {:>7.3} [{pl:>10.5}, {pu:>10.5}] [{rl:>10.5}, {ru:>10.5}] {:>6.2}",
                f.initial_fraction, f.gap_ratio, f.efficiency
            );
        }
        let _ = writeln!(
            s,
            "plain overlap: {}, reduced overlap: {}, decreasing with gap: {}",
            self.plain_overlap, self.reduced_overlap, self.decreasing_with_gap
        );
        s
    }
}

/// Disk pair of the reference configuration on the unit cell.
pub fn reference_pair() -> (Disk, Disk) {
    (Disk::new([0.5, 0.5], 0.35), Disk::new([0.1, 0.06], 0.2))
}

/// Reference lattice-sum value of `Γ_12` for [`reference_pair`] at `P = 4096`.
pub const REFERENCE_POISSON: Tensor2 = Tensor2::symmetric(-0.0567591, -0.0113466, -0.0689045);

pub const GOLDEN_TOLERANCE: f64 = 1e-6;
pub const TRACE_TOLERANCE: f64 = 1e-12;
pub const AGREEMENT_TOLERANCE: f64 = 1e-3;
/// Accepted deviation of the fitted convergence exponent from -2.
pub const SLOPE_TOLERANCE: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonRow {
    #[serde(rename = "P")]
    pub truncation: usize,
    pub value: Tensor2,
    pub trace_relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierRow {
    pub n_max: usize,
    pub value: Tensor2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub poisson: Vec<PoissonRow>,
    pub fourier: Vec<FourierRow>,
    /// Largest componentwise distance of the `P = 4096` value from the reference.
    pub golden_error: f64,
    /// Largest componentwise relative gap between the finest Fourier and lattice values.
    pub agreement_error: f64,
    /// Least-squares exponent of `|Γ(P) - Γ(4096)|` against `P` for `4 <= P <= 256`.
    pub convergence_slope: f64,
    pub golden_pass: bool,
    pub trace_pass: bool,
    pub agreement_pass: bool,
    pub slope_pass: bool,
    pub seconds: f64,
}

impl Validation {
    pub fn passed(&self) -> bool {
        self.golden_pass && self.trace_pass && self.agreement_pass && self.slope_pass
    }
}

fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (x, y) = (x.ln(), y.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (m * sxy - sx * sy) / (m * sxx - sx * sx)
}

/// Compares the lattice sum with the Fourier series on the reference pair.
pub fn validate_influence(out_dir: Option<&Path>) -> Result<Validation> {
    let start = Instant::now();
    let (a, b) = reference_pair();
    let expected_trace = -PI * b.radius * b.radius;
    let poisson: Vec<PoissonRow> = (1..=12)
        .map(|k| {
            let truncation = 1usize << k;
            let value = influence_poisson(&a, &b, 1.0, 1.0, truncation).expect("the reference pair is valid");
            PoissonRow { truncation, value, trace_relative_error: ((value.trace() - expected_trace) / expected_trace).abs() }
        })
        .collect();
    let fourier: Vec<FourierRow> =
        [64, 128, 256, 512, 1024].into_iter().map(|n_max| FourierRow { n_max, value: influence_fourier(&a, &b, 1.0, 1.0, n_max) }).collect();
    let finest = poisson.last().expect("nonempty").value;
    let golden_error = (finest - REFERENCE_POISSON).max_abs();
    let f = fourier.last().expect("nonempty").value;
    let agreement_error = [(finest.xx, f.xx), (finest.xy, f.xy), (finest.yy, f.yy)]
        .iter()
        .map(|(p, q)| ((p - q) / p).abs())
        .fold(0.0, f64::max);
    let points: Vec<(f64, f64)> = poisson
        .iter()
        .filter(|r| (4..=256).contains(&r.truncation))
        .map(|r| (r.truncation as f64, (r.value - finest).max_abs()))
        .collect();
    let convergence_slope = loglog_slope(&points);
    let report = Validation {
        golden_pass: golden_error <= GOLDEN_TOLERANCE,
        trace_pass: poisson.iter().all(|r| r.trace_relative_error <= TRACE_TOLERANCE),
        agreement_pass: agreement_error <= AGREEMENT_TOLERANCE,
        slope_pass: (convergence_slope + 2.0).abs() <= SLOPE_TOLERANCE,
        poisson,
        fourier,
        golden_error,
        agreement_error,
        convergence_slope,
        seconds: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).at(dir)?;
        write_json(&dir.join("validation.json"), &report)?;
    }
    Ok(report)
}

impl Validation {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>6} {:>14} {:>14} {:>14} {:>10}", "P", "G11", "G12", "G22", "trace err");
        for r in &self.poisson {
            let _ = writeln!(
                s,
                "{:>6} {:>14.9} {:>14.9} {:>14.9} {:>10.1e}",
                r.truncation, r.value.xx, r.value.xy, r.value.yy, r.trace_relative_error
            );
        }
        let _ = writeln!(s, "{:>6} {:>14} {:>14} {:>14}", "n_max", "G11", "G12", "G22");
        for r in &self.fourier {
            let _ = writeln!(s, "{:>6} {:>14.9} {:>14.9} {:>14.9}", r.n_max, r.value.xx, r.value.xy, r.value.yy);
        }
        let _ = writeln!(s, "reference error {:.2e} (pass: {})", self.golden_error, self.golden_pass);
        let _ = writeln!(s, "Fourier agreement {:.2e} (pass: {})", self.agreement_error, self.agreement_pass);
        let _ = writeln!(s, "convergence slope {:.3} (pass: {})", self.convergence_slope, self.slope_pass);
        let _ = writeln!(s, "trace identity (pass: {})", self.trace_pass);
        s
    }
}

/// Column names of [`SweepRow`] in `sweep.csv`, in order.
pub const SWEEP_HEADER: &str = "chi,P,component,mean,ci_plain,ci_reduced,xi_star,corr,efficiency,effective_efficiency";

