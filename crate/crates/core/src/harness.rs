//! Seeded Monte Carlo sweeps over SNR, antenna count and QoS fraction.
//!
//! A work item is one `(snr, n_t, trial)` triple; all QoS fractions and both
//! decoders are solved on the same draw. Trial `k` uses the same seed in
//! every cell, so curves are paired across SNR, `n_t`, `alpha` and decoder.
//! Items run on a rayon pool and are collected in order, so results do not
//! depend on the worker count.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{sample_general_position, ChannelSet, ModelError, SystemParams, TrialSeed};
use crate::rates::{no_leasing_secrecy, peaceful_rate};
use crate::solver::{self, OptResult, SimplexResolution, SolveError};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.96;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid sweep config: {0}")]
    Config(String),
    #[error("trial {trial} at nt={nt}, snr={snr_db} dB: {source}")]
    Trial {
        trial: u64,
        nt: usize,
        snr_db: f64,
        source: SolveError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Decoder {
    Sd,
    Jd,
    Both,
}

impl Decoder {
    pub fn label(&self) -> &'static str {
        match self {
            Decoder::Sd => "SD",
            Decoder::Jd => "JD",
            Decoder::Both => "BOTH",
        }
    }

    fn runs_sd(&self) -> bool {
        matches!(self, Decoder::Sd | Decoder::Both)
    }

    fn runs_jd(&self) -> bool {
        matches!(self, Decoder::Jd | Decoder::Both)
    }
}

impl fmt::Display for Decoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Decoder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SD" => Ok(Decoder::Sd),
            "JD" => Ok(Decoder::Jd),
            "BOTH" => Ok(Decoder::Both),
            other => Err(format!("unknown decoder `{other}` (expected SD, JD or BOTH)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub decoder: Decoder,
    pub snr_db: Vec<f64>,
    pub nt: Vec<usize>,
    pub alpha: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    /// Lattice resolution for three-weight families; two-weight families use
    /// four times this.
    pub resolution: usize,
    pub include_baselines: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            decoder: Decoder::Both,
            snr_db: (0..=6).map(|k| 5.0 * f64::from(k)).collect(),
            nt: vec![2, 3],
            alpha: vec![0.0, 0.5, 0.8],
            trials: 2000,
            master_seed: 1,
            resolution: 100,
            include_baselines: true,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |m: String| Err(HarnessError::Config(m));
        if self.snr_db.is_empty() {
            return err("snr_db list is empty".into());
        }
        if self.nt.is_empty() {
            return err("nt list is empty".into());
        }
        if self.alpha.is_empty() {
            return err("alpha list is empty".into());
        }
        if self.trials == 0 {
            return err("trials must be at least 1".into());
        }
        if self.resolution == 0 {
            return err("resolution must be at least 1".into());
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return err(format!("snr_db {s} is not finite"));
        }
        if let Some(n) = self.nt.iter().find(|&&n| n < 2) {
            return err(format!("nt {n} is below 2"));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return err(format!("alpha {a} is outside [0, 1]"));
        }
        Ok(())
    }
}

/// One cell of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    /// `Sd` or `Jd`; never `Both`.
    pub decoder: Decoder,
    pub snr_db: f64,
    pub nt: usize,
    pub alpha: f64,
    pub trials: usize,
    pub mean_secrecy_bits: f64,
    pub ci95_halfwidth: f64,
    pub mean_secondary_bits: f64,
    pub mean_no_leasing_bits: Option<f64>,
    pub mean_peaceful_bits: Option<f64>,
    pub degenerate_resamples: u64,
}

impl SweepRow {
    /// Sort key `(decoder, nt, alpha, snr)`.
    pub fn cmp_key(&self, other: &SweepRow) -> std::cmp::Ordering {
        self.decoder
            .label()
            .cmp(other.decoder.label())
            .then(self.nt.cmp(&other.nt))
            .then(self.alpha.total_cmp(&other.alpha))
            .then(self.snr_db.total_cmp(&other.snr_db))
    }

    /// Mean secrecy with leasing minus without, if baselines were run.
    pub fn leasing_gain(&self) -> Option<f64> {
        self.mean_no_leasing_bits.map(|b| self.mean_secrecy_bits - b)
    }
}

/// Secrecy and secondary rate of one solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub secrecy_bits: f64,
    pub secondary_bits: f64,
}

impl From<&OptResult> for Outcome {
    fn from(r: &OptResult) -> Self {
        Outcome {
            secrecy_bits: r.secrecy_bits,
            secondary_bits: r.secondary_bits,
        }
    }
}

/// Everything computed for one channel draw.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub snr_db: f64,
    pub nt: usize,
    pub trial: u64,
    pub redraws: u32,
    pub no_leasing_bits: f64,
    pub peaceful_bits: f64,
    /// Indexed like `SweepConfig::alpha`; empty if the decoder was not run.
    pub sd: Vec<Outcome>,
    pub jd: Vec<Outcome>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Ordered by `(snr, nt, trial)` as listed in the config.
    pub trials: Vec<TrialRecord>,
}

impl SweepResult {
    /// Records of one `(snr, nt)` cell, in trial order.
    pub fn cell(&self, snr_db: f64, nt: usize) -> impl Iterator<Item = &TrialRecord> {
        self.trials
            .iter()
            .filter(move |t| t.nt == nt && t.snr_db == snr_db)
    }
}

/// Edits a channel draw before it is solved.
pub type ChannelHook<'a> = &'a (dyn Fn(&mut ChannelSet) + Sync);

/// Runs a sweep on the current rayon pool.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, HarnessError> {
    cfg.validate()?;
    Ok(execute(cfg, None)?.rows)
}

/// Runs a sweep on a dedicated pool of `workers` threads (0 = rayon's
/// default), optionally editing each draw, and keeps per-trial records.
pub fn run_sweep_detailed(
    cfg: &SweepConfig,
    workers: usize,
    hook: Option<ChannelHook<'_>>,
) -> Result<SweepResult, HarnessError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    pool.install(|| execute(cfg, hook))
}

fn execute(cfg: &SweepConfig, hook: Option<ChannelHook<'_>>) -> Result<SweepResult, HarnessError> {
    let mut items = Vec::with_capacity(cfg.snr_db.len() * cfg.nt.len() * cfg.trials);
    for &snr in &cfg.snr_db {
        for &nt in &cfg.nt {
            for trial in 0..cfg.trials as u64 {
                items.push((snr, nt, trial));
            }
        }
    }
    let trials = items
        .par_iter()
        .map(|&(snr, nt, trial)| run_trial(cfg, snr, nt, trial, hook))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = aggregate(cfg, &trials);
    Ok(SweepResult { rows, trials })
}

fn run_trial(
    cfg: &SweepConfig,
    snr_db: f64,
    nt: usize,
    trial: u64,
    hook: Option<ChannelHook<'_>>,
) -> Result<TrialRecord, HarnessError> {
    let p = SystemParams::from_snr_db(snr_db, 0.0, nt)?;
    let (mut ch, redraws) = sample_general_position(&p, TrialSeed::new(cfg.master_seed, trial))?;
    if let Some(h) = hook {
        h(&mut ch);
    }
    let res = SimplexResolution::new(cfg.resolution);
    let wrap = |source| HarnessError::Trial {
        trial,
        nt,
        snr_db,
        source,
    };
    let (sd, jd) = match cfg.decoder {
        Decoder::Both => solver::solve_both_alphas(&ch, &p, &cfg.alpha, res).map_err(wrap)?,
        Decoder::Sd => (solver::solve_sd_alphas(&ch, &p, &cfg.alpha, res).map_err(wrap)?, vec![]),
        Decoder::Jd => (vec![], solver::solve_jd_alphas(&ch, &p, &cfg.alpha, res).map_err(wrap)?),
    };
    Ok(TrialRecord {
        snr_db,
        nt,
        trial,
        redraws,
        no_leasing_bits: no_leasing_secrecy(&ch, &p),
        peaceful_bits: peaceful_rate(&ch, &p),
        sd: sd.iter().map(Outcome::from).collect(),
        jd: jd.iter().map(Outcome::from).collect(),
    })
}

fn aggregate(cfg: &SweepConfig, trials: &[TrialRecord]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    let decoders: Vec<Decoder> = [Decoder::Sd, Decoder::Jd]
        .into_iter()
        .filter(|d| match d {
            Decoder::Sd => cfg.decoder.runs_sd(),
            _ => cfg.decoder.runs_jd(),
        })
        .collect();
    for &snr in &cfg.snr_db {
        for &nt in &cfg.nt {
            let cell: Vec<&TrialRecord> = trials
                .iter()
                .filter(|t| t.nt == nt && t.snr_db == snr)
                .collect();
            let redraws: u64 = cell.iter().map(|t| u64::from(t.redraws)).sum();
            let no_leasing = Stats::of(cell.iter().map(|t| t.no_leasing_bits));
            let peaceful = Stats::of(cell.iter().map(|t| t.peaceful_bits));
            for &decoder in &decoders {
                for (k, &alpha) in cfg.alpha.iter().enumerate() {
                    let pick = |t: &TrialRecord| match decoder {
                        Decoder::Sd => t.sd[k],
                        _ => t.jd[k],
                    };
                    let secrecy = Stats::of(cell.iter().map(|t| pick(t).secrecy_bits));
                    let secondary = Stats::of(cell.iter().map(|t| pick(t).secondary_bits));
                    rows.push(SweepRow {
                        decoder,
                        snr_db: snr,
                        nt,
                        alpha,
                        trials: cell.len(),
                        mean_secrecy_bits: secrecy.mean,
                        ci95_halfwidth: secrecy.ci95,
                        mean_secondary_bits: secondary.mean,
                        mean_no_leasing_bits: cfg.include_baselines.then_some(no_leasing.mean),
                        mean_peaceful_bits: cfg.include_baselines.then_some(peaceful.mean),
                        degenerate_resamples: redraws,
                    });
                }
            }
        }
    }
    rows.sort_by(SweepRow::cmp_key);
    rows
}

/// Sample mean and 95% confidence halfwidth `1.96 s / sqrt(n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub ci95: f64,
}

impl Stats {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Stats {
        let values: Vec<f64> = values.into_iter().collect();
        let n = values.len();
        if n == 0 {
            return Stats {
                n,
                mean: f64::NAN,
                ci95: f64::NAN,
            };
        }
        let mean = neumaier_sum(values.iter().copied()) / n as f64;
        let ci95 = if n > 1 {
            let ss = neumaier_sum(values.iter().map(|v| (v - mean) * (v - mean)));
            Z95 * (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Stats { n, mean, ci95 }
    }
}

/// Compensated summation.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Text table of the rows plus the leasing versus no-leasing check per
/// cell. Cells where leasing does not beat no leasing are marked `FLAG`.
pub fn summarize(rows: &[SweepRow]) -> String {
    if rows.is_empty() {
        return "no data\n".to_string();
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<4} {:>7} {:>3} {:>5} {:>6} {:>10} {:>8} {:>10} {:>10} {:>10} {:>10}  check",
        "dec", "snr_db", "nt", "alpha", "trials", "secrecy", "ci95", "secondary", "no_lease", "peaceful", "delta"
    );
    let mut flagged = 0;
    let mut checked = 0;
    for r in rows {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        let (delta, mark) = match r.leasing_gain() {
            Some(d) => {
                checked += 1;
                if d > 0.0 {
                    (format!("{d:+.4}"), "ok")
                } else {
                    flagged += 1;
                    (format!("{d:+.4}"), "FLAG leasing <= no leasing")
                }
            }
            None => ("-".to_string(), "n/a"),
        };
        let _ = writeln!(
            out,
            "{:<4} {:>7} {:>3} {:>5} {:>6} {:>10.4} {:>8.4} {:>10.4} {:>10} {:>10} {:>10}  {}",
            r.decoder.label(),
            r.snr_db,
            r.nt,
            r.alpha,
            r.trials,
            r.mean_secrecy_bits,
            r.ci95_halfwidth,
            r.mean_secondary_bits,
            opt(r.mean_no_leasing_bits),
            opt(r.mean_peaceful_bits),
            delta,
            mark
        );
    }
    let _ = writeln!(out, "{checked} cells checked, {flagged} flagged");
    out
}
