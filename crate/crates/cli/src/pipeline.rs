//! Ensemble generation, per-realization solves and estimation.
//!
//! Realization `i` of the family equilibrated at `f'` is generated from the
//! seed `derive_seed(master_seed, [f'.to_bits(), i])`, so every command that
//! needs the same family sees the same geometries. The surrogate is evaluated
//! on all realizations, the full-field solver on the first `M`.
//!
//! Records are appended to `records.jsonl` in index order, a chunk at a time,
//! so an interrupted run resumes where it stopped and produces the same file
//! as an uninterrupted one. Wall-clock timings go to a separate
//! `timings.jsonl` to keep the records byte-reproducible.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use eimvr::eim::eim_conductivity;
use eimvr::estimator::{control_variate_estimate, CvEstimate, PairedSample, SurrogateMean};
use eimvr::fullfield::{apparent_conductivity, rasterize};
use eimvr::microstructure::{generate, Microstructure};
use eimvr::rng::derive_seed;
use eimvr::Tensor2;

use crate::config::ExperimentConfig;
use crate::error::{CliError, IoContext, Result};

/// Largest tolerated share of failed solves.
pub const FAILURE_BUDGET: f64 = 0.05;

/// Tensor components that are estimated.
pub const COMPONENTS: [(&str, usize, usize); 3] = [("11", 0, 0), ("22", 1, 1), ("12", 0, 1)];

pub fn realization_seed(master: u64, initial_fraction: f64, index: usize) -> u64 {
    derive_seed(master, &[initial_fraction.to_bits(), index as u64])
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// One generated microstructure and where it is stored.
#[derive(Clone, Debug)]
pub struct Member {
    pub index: usize,
    pub seed: u64,
    pub microstructure: Microstructure,
    /// Path relative to the run directory.
    pub file: String,
    pub sha256: String,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    index: usize,
    seed: u64,
    file: String,
    sha256: String,
    gap_ratio: f64,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    n_disks: usize,
    fraction: f64,
    initial_fraction: f64,
    master_seed: u64,
    mc_cycles: u64,
    members: Vec<ManifestEntry>,
}

/// Generates (or regenerates, deterministically) `count` realizations and
/// writes them under `dir/microstructures/` with a manifest.
pub fn build_ensemble(cfg: &ExperimentConfig, initial_fraction: f64, count: usize, dir: &Path) -> Result<Vec<Member>> {
    let ms_dir = dir.join("microstructures");
    fs::create_dir_all(&ms_dir).at(&ms_dir)?;
    let members: Vec<Member> = (0..count)
        .into_par_iter()
        .map(|index| -> Result<Member> {
            let seed = realization_seed(cfg.master_seed, initial_fraction, index);
            let microstructure = generate(&cfg.mc_config(initial_fraction, seed))?;
            let text = microstructure.to_json();
            let file = format!("microstructures/r{index:06}.json");
            let path = dir.join(&file);
            let up_to_date = fs::read_to_string(&path).map(|t| t == text).unwrap_or(false);
            if !up_to_date {
                fs::write(&path, &text).at(&path)?;
            }
            Ok(Member { index, seed, sha256: sha256_hex(&text), microstructure, file })
        })
        .collect::<Result<_>>()?;
    let manifest = Manifest {
        n_disks: cfg.n_disks,
        fraction: cfg.fraction,
        initial_fraction,
        master_seed: cfg.master_seed,
        mc_cycles: cfg.mc_cycles,
        members: members
            .iter()
            .map(|m| ManifestEntry {
                index: m.index,
                seed: m.seed,
                file: m.file.clone(),
                sha256: m.sha256.clone(),
                gap_ratio: m.microstructure.provenance().gap_ratio,
            })
            .collect(),
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").at(&path)?;
    Ok(members)
}

/// Outcome of all solves on one realization at one contrast.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub index: usize,
    pub seed: u64,
    pub microstructure: String,
    pub sha256: String,
    pub chi: f64,
    /// Surrogate conductivity keyed by truncation `P`.
    pub sigma_eim: BTreeMap<usize, Tensor2>,
    /// Present for the first `M` realizations.
    pub sigma_full_field: Option<Tensor2>,
    pub iterations: Option<[usize; 2]>,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

impl RealizationRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Serialize)]
struct Timing {
    index: usize,
    surrogate_seconds: f64,
    full_field_seconds: Option<f64>,
}

fn solve_member(cfg: &ExperimentConfig, member: &Member, chi: f64, truncations: &[usize]) -> (RealizationRecord, Timing) {
    let mut record = RealizationRecord {
        index: member.index,
        seed: member.seed,
        microstructure: member.file.clone(),
        sha256: member.sha256.clone(),
        chi,
        sigma_eim: BTreeMap::new(),
        sigma_full_field: None,
        iterations: None,
        residual: None,
        error: None,
    };
    let start = Instant::now();
    for &p in truncations {
        match eim_conductivity(&member.microstructure, cfg.sigma0, chi, p) {
            Ok(s) => {
                record.sigma_eim.insert(p, s);
            }
            Err(e) => {
                record.error = Some(format!("surrogate (P={p}): {e}"));
            }
        }
    }
    let surrogate_seconds = start.elapsed().as_secs_f64();
    let mut full_field_seconds = None;
    if member.index < cfg.full_field_samples && record.error.is_none() {
        let start = Instant::now();
        let outcome = rasterize(&member.microstructure, cfg.grid, cfg.sigma0, chi)
            .and_then(|field| apparent_conductivity(&field, &cfg.solver_config(chi)));
        match outcome {
            Ok(r) => {
                record.sigma_full_field = Some(r.sigma_app);
                record.iterations = Some(r.iterations);
                record.residual = Some(r.final_residual);
            }
            Err(e) => record.error = Some(format!("full field: {e}")),
        }
        full_field_seconds = Some(start.elapsed().as_secs_f64());
    }
    (record, Timing { index: member.index, surrogate_seconds, full_field_seconds })
}

/// Reads complete records, dropping a trailing partial line left by an interrupted write.
fn read_records(path: &Path) -> Result<Vec<RealizationRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).at(path)?;
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    if complete.len() != text.len() {
        warn!("dropping a partial record at the end of {}", path.display());
        fs::write(path, complete).at(path)?;
    }
    let mut out = Vec::new();
    for line in BufReader::new(complete.as_bytes()).lines() {
        let line = line.at(path)?;
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Solves every realization not yet present in `dir/records.jsonl`.
pub fn process_records(
    cfg: &ExperimentConfig,
    members: &[Member],
    chi: f64,
    truncations: &[usize],
    dir: &Path,
) -> Result<Vec<RealizationRecord>> {
    fs::create_dir_all(dir).at(dir)?;
    let records_path = dir.join("records.jsonl");
    let timings_path = dir.join("timings.jsonl");
    let mut records = read_records(&records_path)?;
    for (k, r) in records.iter().enumerate() {
        let m = members.get(k);
        if r.index != k || m.map(|m| &m.sha256) != Some(&r.sha256) || r.chi != chi {
            return Err(CliError::Mismatch {
                dir: dir.to_path_buf(),
                reason: format!("record {k} does not match the current ensemble"),
            });
        }
    }
    if !records.is_empty() && records.len() < members.len() {
        info!("resuming {} at realization {}", records_path.display(), records.len());
    }
    let mut out = OpenOptions::new().create(true).append(true).open(&records_path).at(&records_path)?;
    let mut timings = OpenOptions::new().create(true).append(true).open(&timings_path).at(&timings_path)?;
    let chunk = (4 * rayon::current_num_threads()).max(8);
    let mut next = records.len();
    while next < members.len() {
        let end = (next + chunk).min(members.len());
        let solved: Vec<(RealizationRecord, Timing)> =
            members[next..end].par_iter().map(|m| solve_member(cfg, m, chi, truncations)).collect();
        let mut lines = String::new();
        let mut timing_lines = String::new();
        for (r, t) in &solved {
            lines.push_str(&serde_json::to_string(r)?);
            lines.push('\n');
            timing_lines.push_str(&serde_json::to_string(t)?);
            timing_lines.push('\n');
        }
        out.write_all(lines.as_bytes()).at(&records_path)?;
        out.flush().at(&records_path)?;
        timings.write_all(timing_lines.as_bytes()).at(&timings_path)?;
        records.extend(solved.into_iter().map(|(r, _)| r));
        next = end;
    }
    Ok(records)
}

/// Estimate of one tensor component at one truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub component: String,
    #[serde(rename = "P")]
    pub truncation: usize,
    pub surrogate_mean: SurrogateMean,
    #[serde(flatten)]
    pub estimate: CvEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub chi: f64,
    pub n_disks: usize,
    pub fraction: f64,
    pub initial_fraction: f64,
    pub gap_ratio: f64,
    pub full_field_samples: usize,
    pub surrogate_samples: usize,
    pub failed_full_field: usize,
    pub failed_surrogate: usize,
    pub components: Vec<ComponentSummary>,
}

impl Summary {
    pub fn component(&self, name: &str, truncation: usize) -> Option<&ComponentSummary> {
        self.components.iter().find(|c| c.component == name && c.truncation == truncation)
    }
}

/// Applies the failure budget and runs the estimator on every component and truncation.
pub fn summarize(
    cfg: &ExperimentConfig,
    initial_fraction: f64,
    chi: f64,
    truncations: &[usize],
    records: &[RealizationRecord],
) -> Result<Summary> {
    let m = cfg.full_field_samples.min(records.len());
    let failed_ff = records[..m].iter().filter(|r| !r.is_ok()).count();
    let failed_eim = records.iter().filter(|r| r.error.as_deref().is_some_and(|e| e.starts_with("surrogate"))).count();
    for (kind, failed, attempted) in [("full-field", failed_ff, m), ("surrogate", failed_eim, records.len())] {
        if failed as f64 > FAILURE_BUDGET * attempted as f64 {
            return Err(CliError::FailureBudget { kind, failed, attempted });
        }
        if failed > 0 {
            warn!("{failed} of {attempted} {kind} solves failed and are excluded");
        }
    }
    let paired: Vec<&RealizationRecord> = records[..m].iter().filter(|r| r.is_ok()).collect();
    if paired.len() < 2 {
        return Err(CliError::TooFewPairs(paired.len()));
    }
    let mut components = Vec::new();
    for &p in truncations {
        for (name, i, j) in COMPONENTS {
            let x: Vec<f64> = paired.iter().map(|r| r.sigma_full_field.expect("paired records carry a full-field value").get(i, j)).collect();
            let y: Vec<f64> = paired.iter().map(|r| r.sigma_eim[&p].get(i, j)).collect();
            let all: Vec<f64> = records.iter().filter_map(|r| r.sigma_eim.get(&p).map(|s| s.get(i, j))).collect();
            let surrogate_mean = SurrogateMean::from_samples(&all, cfg.alpha)?;
            let estimate = control_variate_estimate(&PairedSample::new(x, y)?, &surrogate_mean, cfg.alpha)?;
            components.push(ComponentSummary { component: name.to_string(), truncation: p, surrogate_mean, estimate });
        }
    }
    Ok(Summary {
        chi,
        n_disks: cfg.n_disks,
        fraction: cfg.fraction,
        initial_fraction,
        gap_ratio: eimvr::microstructure::gap_ratio(initial_fraction, cfg.fraction),
        full_field_samples: paired.len(),
        surrogate_samples: records.iter().filter(|r| r.sigma_eim.contains_key(&truncations[0])).count(),
        failed_full_field: failed_ff,
        failed_surrogate: failed_eim,
        components,
    })
}

/// Relative errors `(σ₁₁ - mean σ₁₁^FF) / mean σ₁₁^FF` of both models on the paired realizations.
pub fn write_relative_errors(path: &Path, records: &[RealizationRecord], m: usize, truncation: usize) -> Result<()> {
    let paired: Vec<&RealizationRecord> = records[..m.min(records.len())].iter().filter(|r| r.is_ok()).collect();
    let ff: Vec<f64> = paired.iter().filter_map(|r| r.sigma_full_field.map(|s| s.xx)).collect();
    let eim: Vec<f64> = paired.iter().map(|r| r.sigma_eim[&truncation].xx).collect();
    let reference = ff.iter().sum::<f64>() / ff.len() as f64;
    let eps_ff = eimvr::estimator::relative_errors(&ff, reference);
    let eps_eim = eimvr::estimator::relative_errors(&eim, reference);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "eps_full_field", "eps_eim"])?;
    for ((r, a), b) in paired.iter().zip(&eps_ff).zip(&eps_eim) {
        w.write_record([r.index.to_string(), a.to_string(), b.to_string()])?;
    }
    w.flush().at(path)?;
    Ok(())
}

/// Writes the run fingerprint, or checks it against an existing one.
pub fn claim_directory(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(dir).at(dir)?;
    let path = dir.join("config.json");
    let fingerprint = cfg.fingerprint();
    if path.exists() {
        let existing: serde_json::Value = serde_json::from_reader(File::open(&path).at(&path)?)?;
        if existing != fingerprint {
            return Err(CliError::Mismatch {
                dir: dir.to_path_buf(),
                reason: "config.json differs from the current configuration".into(),
            });
        }
    } else {
        fs::write(&path, serde_json::to_string_pretty(&fingerprint)? + "\n").at(&path)?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").at(path)
}

/// Directory name for a contrast, e.g. `chi_1e2`.
pub fn chi_dir(root: &Path, chi: f64) -> PathBuf {
    root.join(format!("chi_{chi:e}"))
}
