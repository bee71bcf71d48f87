//! Bootstrap scaling study and the density/mean-degree invariance demo.
//!
//! The scaling study resamples an egocentric base sample to a grid of
//! pseudo-population sizes, derives implied statistics for each resample,
//! fits the model with the offset evaluated at that size, and tabulates the
//! coefficient estimates per size (mean and spread over replicates). Sizes
//! and replicates fan out over a worker pool; every replicate's seed is a
//! pure function of the master seed and its (size, replicate) key, so the
//! report is identical however the work is scheduled.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::derive_seed;
use crate::ego::{bootstrap_resample, implied_stats, EgoSample};
use crate::error::{Error, Result};
use crate::fit::{fit_mean_value, FitConfig};
use crate::net::AttributeTable;
use crate::sampler::{gibbs_sample, InitialState, SamplerConfig};
use crate::terms::{offset_value, ModelSpec};

/// Replicate failure share above which a size gets a warning flag.
const FAILURE_WARNING_SHARE: f64 = 0.2;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyConfig {
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub model: ModelSpec,
    pub fit: FitConfig,
    pub seed: u64,
}

impl StudyConfig {
    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::ModelMismatch("need at least one replicate".into()));
        }
        if let Some(&bad) = self.sizes.iter().find(|&&s| s < 2) {
            return Err(Error::ModelMismatch(format!(
                "size {bad} is too small to form a network"
            )));
        }
        Ok(())
    }

    /// Stable hash of the configuration; stamped on every output row.
    pub fn config_hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("study config serializes");
        fnv1a(json.as_bytes())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// One replicate's outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyRow {
    pub size: usize,
    pub replicate: usize,
    pub seed: u64,
    pub config_hash: u64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Per-size coefficient summary: the fixed offset plus the mean and
/// standard deviation of each estimate over successful replicates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SizeSummary {
    pub size: usize,
    pub offset: f64,
    pub replicates_ok: usize,
    pub replicates_failed: usize,
    pub warning: bool,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyReport {
    pub term_labels: Vec<String>,
    pub config_hash: u64,
    pub rows: Vec<StudyRow>,
    pub summaries: Vec<SizeSummary>,
}

/// Offset coefficient per size for a model; the "fixed" row of the summary
/// table.
pub fn offset_column(model: &ModelSpec, sizes: &[usize]) -> Result<Vec<f64>> {
    sizes
        .iter()
        .map(|&n| offset_value(&model.offset, n))
        .collect()
}

/// Run the full study against a base egocentric sample.
pub fn run_scaling_study(cfg: &StudyConfig, base: &EgoSample) -> Result<StudyReport> {
    cfg.validate()?;
    cfg.model.validate()?;
    let config_hash = cfg.config_hash();
    let mut keys = Vec::new();
    for &size in &cfg.sizes {
        for replicate in 0..cfg.replicates {
            keys.push((size, replicate));
        }
    }
    let mut rows: Vec<StudyRow> = keys
        .par_iter()
        .map(|&(size, replicate)| {
            let seed = derive_seed(cfg.seed, size as u64, replicate as u64);
            let outcome = run_replicate(cfg, base, size, seed);
            match outcome {
                Ok(fit) => StudyRow {
                    size,
                    replicate,
                    seed,
                    config_hash,
                    converged: fit.converged,
                    theta: Some(fit.theta_hat),
                    error: if fit.converged {
                        None
                    } else {
                        Some("did not converge".into())
                    },
                },
                Err(e) => StudyRow {
                    size,
                    replicate,
                    seed,
                    config_hash,
                    converged: false,
                    theta: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    rows.sort_by_key(|r| (r.size, r.replicate));

    let p = cfg.model.terms.len();
    let mut summaries = Vec::new();
    for &size in &cfg.sizes {
        let good: Vec<&StudyRow> = rows
            .iter()
            .filter(|r| r.size == size && r.converged && r.theta.is_some())
            .collect();
        let failed = cfg.replicates - good.len();
        let mut means = vec![f64::NAN; p];
        let mut sds = vec![f64::NAN; p];
        if !good.is_empty() {
            for k in 0..p {
                let values: Vec<f64> = good
                    .iter()
                    .map(|r| r.theta.as_ref().unwrap()[k])
                    .collect();
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                means[k] = mean;
                if values.len() > 1 {
                    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
                    sds[k] = (ss / (values.len() as f64 - 1.0)).sqrt();
                } else {
                    sds[k] = 0.0;
                }
            }
        }
        summaries.push(SizeSummary {
            size,
            offset: offset_value(&cfg.model.offset, size)?,
            replicates_ok: good.len(),
            replicates_failed: failed,
            warning: failed as f64 > FAILURE_WARNING_SHARE * cfg.replicates as f64,
            means,
            sds,
        });
    }
    Ok(StudyReport {
        term_labels: cfg.model.term_labels(),
        config_hash,
        rows,
        summaries,
    })
}

fn run_replicate(
    cfg: &StudyConfig,
    base: &EgoSample,
    size: usize,
    seed: u64,
) -> Result<crate::fit::FitResult> {
    let resample = bootstrap_resample(base, size, seed)?;
    let implied = implied_stats(&resample, &cfg.model)?;
    let attrs = resample.to_attribute_table()?;
    let mut fit_cfg = cfg.fit.clone();
    fit_cfg.seed = derive_seed(seed, 0xF17, 0);
    fit_mean_value(implied.targets.as_slice(), &attrs, &cfg.model, &fit_cfg)
}

impl StudyReport {
    /// Long-format CSV: one row per (size, replicate, term), for trend plots
    /// of the estimates against network size.
    pub fn write_long_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "size,replicate,term,estimate,converged,seed,config_hash"
        )?;
        for row in &self.rows {
            match &row.theta {
                Some(theta) => {
                    for (label, value) in self.term_labels.iter().zip(theta) {
                        writeln!(
                            w,
                            "{},{},{},{},{},{},{:016x}",
                            row.size,
                            row.replicate,
                            label,
                            value,
                            row.converged,
                            row.seed,
                            row.config_hash
                        )?;
                    }
                }
                None => {
                    writeln!(
                        w,
                        "{},{},,,false,{},{:016x}",
                        row.size, row.replicate, row.seed, row.config_hash
                    )?;
                }
            }
        }
        Ok(())
    }

    /// Wide summary CSV: one row per coefficient, one mean/sd column pair
    /// per size, with the fixed offset as the first data row.
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["term".to_string()];
        for s in &self.summaries {
            header.push(format!("mean_{}", s.size));
            header.push(format!("sd_{}", s.size));
        }
        writeln!(w, "{}", header.join(","))?;
        let offset_row: Vec<String> = self
            .summaries
            .iter()
            .flat_map(|s| [format!("{:.2}", s.offset), "fixed".to_string()])
            .collect();
        writeln!(w, "offset,{}", offset_row.join(","))?;
        for (k, label) in self.term_labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            for s in &self.summaries {
                row.push(format!("{:.4}", s.means[k]));
                row.push(format!("{:.4}", s.sds[k]));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Human-readable summary table with the fixed offset row on top.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<28}", "term"));
        for s in &self.summaries {
            out.push_str(&format!("{:>22}", format!("N={}", s.size)));
        }
        out.push('\n');
        out.push_str(&format!("{:<28}", "offset"));
        for s in &self.summaries {
            out.push_str(&format!("{:>22}", format!("{:.2} (fixed)", s.offset)));
        }
        out.push('\n');
        for (k, label) in self.term_labels.iter().enumerate() {
            out.push_str(&format!("{:<28}", label));
            for s in &self.summaries {
                out.push_str(&format!(
                    "{:>22}",
                    format!("{:.3} ({:.3})", s.means[k], s.sds[k])
                ));
            }
            out.push('\n');
        }
        for s in &self.summaries {
            if s.warning {
                out.push_str(&format!(
                    "warning: {} of {} replicates failed at size {}\n",
                    s.replicates_failed,
                    s.replicates_failed + s.replicates_ok,
                    s.size
                ));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Invariance demonstration
// ---------------------------------------------------------------------------

/// Configuration for the density-preservation demo: simulate one model at
/// fixed coefficients across sizes and record density and mean degree.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvarianceConfig {
    pub model: ModelSpec,
    pub sizes: Vec<usize>,
    pub networks_per_size: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvarianceRow {
    pub size: usize,
    pub offset: f64,
    pub density_mean: f64,
    pub density_se: f64,
    pub mean_degree_mean: f64,
    pub mean_degree_se: f64,
    pub networks: usize,
    pub seed: u64,
}

/// Simulate at each size with the model's coefficients held fixed. Without
/// an offset the density column stays flat while mean degree grows with n;
/// with the size offset the mean-degree column is the flat one.
pub fn run_invariance_demo(cfg: &InvarianceConfig) -> Result<Vec<InvarianceRow>> {
    if cfg.networks_per_size < 2 {
        return Err(Error::ModelMismatch(
            "need at least two networks per size for a standard error".into(),
        ));
    }
    cfg.model.validate()?;
    if cfg.model.theta.is_none() {
        return Err(Error::ModelMismatch(
            "invariance demo needs fixed coefficients (theta) in the model".into(),
        ));
    }
    let rows: Result<Vec<InvarianceRow>> = cfg
        .sizes
        .par_iter()
        .map(|&n| {
            let seed = derive_seed(cfg.seed, n as u64, 0);
            // The demo's models carry no attribute terms; an empty table of
            // the right size satisfies compilation.
            let attrs = AttributeTable::new(n);
            let compiled = cfg.model.compile(&attrs)?;
            let sampler_cfg = SamplerConfig {
                burn_in: cfg.burn_in,
                interval: cfg.interval,
                n_samples: cfg.networks_per_size,
                seed,
                initial: InitialState::Empty,
            };
            let nets = gibbs_sample(&compiled, &sampler_cfg)?;
            let densities: Vec<f64> = nets
                .iter()
                .map(|net| net.density())
                .collect::<Result<_>>()?;
            let degrees: Vec<f64> = nets.iter().map(|net| net.mean_degree()).collect();
            let (d_mean, d_se) = mean_se(&densities);
            let (g_mean, g_se) = mean_se(&degrees);
            Ok(InvarianceRow {
                size: n,
                offset: offset_value(&cfg.model.offset, n)?,
                density_mean: d_mean,
                density_se: d_se,
                mean_degree_mean: g_mean,
                mean_degree_se: g_se,
                networks: cfg.networks_per_size,
                seed,
            })
        })
        .collect();
    rows
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// CSV form of the demo report.
pub fn write_invariance_csv<W: Write>(rows: &[InvarianceRow], mut w: W) -> Result<()> {
    writeln!(
        w,
        "size,offset,density_mean,density_se,mean_degree_mean,mean_degree_se,networks,seed"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.size,
            r.offset,
            r.density_mean,
            r.density_se,
            r.mean_degree_mean,
            r.mean_degree_se,
            r.networks,
            r.seed
        )?;
    }
    Ok(())
}
