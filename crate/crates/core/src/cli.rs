//! Command-line front end: configuration files, CSV emission and the
//! implementations behind each subcommand.
//!
//! Exit codes: 0 on success, 1 when `validate` finds a failure, 2 for usage
//! and configuration errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::harness::{self, Decoder, SweepConfig, SweepRow};
use crate::model::{
    sample_general_position, Beamformer, ChannelSet, SystemParams, TrialSeed, COLLINEAR_TOL,
};
use crate::numerics::{ComplexVec, LowRankHermitian, RANK_TOL};
use crate::pgr::{self, Direction, SimplexWeights};
use crate::rates::{self, JdRateBundle, Regime};
use crate::solver::{self, OptResult, OracleGrid, SimplexResolution};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

pub const CSV_HEADER: &str = "decoder,snr_db,nt,alpha,trials,mean_secrecy_bits,ci95,mean_secondary_bits,no_leasing_bits,peaceful_bits,degenerate_resamples";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("{}: key `{key}` given more than once", at(*.line))]
    Repeated { key: String, line: usize },
    #[error("{}: bad value `{value}` for `{key}`: {reason}", at(*.line))]
    Value {
        key: String,
        value: String,
        line: usize,
        reason: String,
    },
}

/// Line 0 stands for the command line.
fn at(line: usize) -> String {
    if line == 0 {
        "command line".to_string()
    } else {
        format!("line {line}")
    }
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("empty input")]
    Empty,
    #[error("unexpected header `{0}`")]
    Header(String),
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
}

/// Sweep settings that may come from a file or from flags; unset fields
/// fall through to the next layer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigLayer {
    pub decoder: Option<Decoder>,
    pub snr_db: Option<Vec<f64>>,
    pub nt: Option<Vec<usize>>,
    pub alpha: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub resolution: Option<usize>,
    pub baselines: Option<bool>,
}

impl ConfigLayer {
    /// Fields set here replace those in `base`.
    pub fn apply(&self, mut base: SweepConfig) -> SweepConfig {
        if let Some(d) = self.decoder {
            base.decoder = d;
        }
        if let Some(v) = &self.snr_db {
            base.snr_db = v.clone();
        }
        if let Some(v) = &self.nt {
            base.nt = v.clone();
        }
        if let Some(v) = &self.alpha {
            base.alpha = v.clone();
        }
        if let Some(v) = self.trials {
            base.trials = v;
        }
        if let Some(v) = self.seed {
            base.master_seed = v;
        }
        if let Some(v) = self.resolution {
            base.resolution = v;
        }
        if let Some(v) = self.baselines {
            base.include_baselines = v;
        }
        base
    }

    /// Parses and range-checks one `key = value` pair. List keys append.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |reason: String| ConfigError::Value {
            key: key.to_string(),
            value: value.to_string(),
            line,
            reason,
        };
        let once = |set: bool| {
            if set {
                Err(ConfigError::Repeated {
                    key: key.to_string(),
                    line,
                })
            } else {
                Ok(())
            }
        };
        match key {
            "decoder" => {
                once(self.decoder.is_some())?;
                self.decoder = Some(value.parse().map_err(bad)?);
            }
            "snr_db" => {
                let v = parse_list(value).map_err(bad)?;
                if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                    return Err(bad(format!("{x} is not finite")));
                }
                self.snr_db.get_or_insert_with(Vec::new).extend(v);
            }
            "nt" => {
                let v = parse_list(value).map_err(bad)?;
                let mut out = Vec::with_capacity(v.len());
                for x in v {
                    if x.fract() != 0.0 || x < 2.0 || x > 64.0 {
                        return Err(bad(format!("{x} is not an integer in [2, 64]")));
                    }
                    out.push(x as usize);
                }
                self.nt.get_or_insert_with(Vec::new).extend(out);
            }
            "alpha" => {
                let v = parse_list(value).map_err(bad)?;
                if let Some(x) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                    return Err(bad(format!("{x} is outside [0, 1]")));
                }
                self.alpha.get_or_insert_with(Vec::new).extend(v);
            }
            "trials" => {
                once(self.trials.is_some())?;
                let n: usize = value.parse().map_err(|e| bad(format!("{e}")))?;
                if n == 0 {
                    return Err(bad("must be at least 1".into()));
                }
                self.trials = Some(n);
            }
            "seed" => {
                once(self.seed.is_some())?;
                self.seed = Some(value.parse().map_err(|e| bad(format!("{e}")))?);
            }
            "resolution" => {
                once(self.resolution.is_some())?;
                let n: usize = value.parse().map_err(|e| bad(format!("{e}")))?;
                if n == 0 {
                    return Err(bad("must be at least 1".into()));
                }
                self.resolution = Some(n);
            }
            "baselines" => {
                once(self.baselines.is_some())?;
                self.baselines = Some(match value.to_ascii_lowercase().as_str() {
                    "true" | "yes" | "on" | "1" => true,
                    "false" | "no" | "off" | "0" => false,
                    _ => return Err(bad("expected true or false".into())),
                });
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                    line,
                })
            }
        }
        Ok(())
    }
}

/// Comma-separated numbers; an item `start:step:stop` expands to the
/// inclusive arithmetic range.
fn parse_list(value: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in value.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err("empty list item".into());
        }
        let parts: Vec<&str> = item.split(':').collect();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{}` is not a number", s.trim()))
        };
        match parts.as_slice() {
            [x] => out.push(num(x)?),
            [a, s, b] => {
                let (a, s, b) = (num(a)?, num(s)?, num(b)?);
                if !(s > 0.0) || b < a {
                    return Err(format!("bad range `{item}`"));
                }
                let n = ((b - a) / s + 1e-9).floor() as usize;
                if n > 100_000 {
                    return Err(format!("range `{item}` is too long"));
                }
                out.extend((0..=n).map(|k| a + s * k as f64));
            }
            _ => return Err(format!("bad list item `{item}`")),
        }
    }
    Ok(out)
}

/// Parses a `key = value` config text. `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<ConfigLayer, ConfigError> {
    let mut layer = ConfigLayer::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::Malformed {
                line,
                text: body.to_string(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Malformed {
                line,
                text: body.to_string(),
            });
        }
        layer.set(key, value, line)?;
    }
    Ok(layer)
}

/// Builds a sweep config from `defaults`, then the file (if any), then the
/// flag layer.
pub fn parse_config(
    path: Option<&Path>,
    flags: &ConfigLayer,
    defaults: SweepConfig,
) -> Result<SweepConfig, ConfigError> {
    let file = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            parse_config_text(&text)?
        }
        None => ConfigLayer::default(),
    };
    Ok(flags.apply(file.apply(defaults)))
}

/// Writes rows as CSV, sorted by `(decoder, nt, alpha, snr)`. Floats use the
/// shortest representation that round-trips.
pub fn emit_csv<W: Write>(rows: &[SweepRow], out: &mut W) -> io::Result<()> {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.cmp_key(b));
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    let mut buf = String::with_capacity(64 * (rows.len() + 1));
    buf.push_str(CSV_HEADER);
    buf.push('\n');
    for r in sorted {
        let _ = writeln!(
            buf,
            "{},{},{},{},{},{},{},{},{},{},{}",
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
            r.degenerate_resamples
        );
    }
    out.write_all(buf.as_bytes())
}

/// Inverse of [`emit_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>, CsvError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(CsvError::Empty)?;
    if header != CSV_HEADER {
        return Err(CsvError::Header(header.to_string()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let err = |message: String| CsvError::Row {
            line: line_no,
            message,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(err(format!("expected 11 fields, got {}", f.len())));
        }
        let float = |k: usize| {
            f[k].parse::<f64>()
                .map_err(|_| err(format!("field {} `{}` is not a number", k + 1, f[k])))
        };
        let opt = |k: usize| {
            if f[k].is_empty() {
                Ok(None)
            } else {
                float(k).map(Some)
            }
        };
        let decoder: Decoder = f[0].parse().map_err(err)?;
        rows.push(SweepRow {
            decoder,
            snr_db: float(1)?,
            nt: f[2].parse().map_err(|_| err(format!("bad nt `{}`", f[2])))?,
            alpha: float(3)?,
            trials: f[4].parse().map_err(|_| err(format!("bad trials `{}`", f[4])))?,
            mean_secrecy_bits: float(5)?,
            ci95_halfwidth: float(6)?,
            mean_secondary_bits: float(7)?,
            mean_no_leasing_bits: opt(8)?,
            mean_peaceful_bits: opt(9)?,
            degenerate_resamples: f[10]
                .parse()
                .map_err(|_| err(format!("bad degenerate_resamples `{}`", f[10])))?,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Channel files for `single`

/// Parses channels written as `name = re im [re im ...]`, one channel per
/// line, in the format `single` prints.
pub fn parse_channels(text: &str) -> Result<ChannelSet, ConfigError> {
    let mut scalars: [Option<Complex64>; 3] = [None; 3];
    let mut vectors: [Option<Vec<Complex64>>; 3] = [None, None, None];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::Malformed {
                line,
                text: body.to_string(),
            });
        };
        let key = key.trim();
        let bad = |reason: &str| ConfigError::Value {
            key: key.to_string(),
            value: value.trim().to_string(),
            line,
            reason: reason.to_string(),
        };
        let nums: Vec<f64> = value
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad("expected real and imaginary parts"))?;
        if nums.is_empty() || nums.len() % 2 != 0 || nums.iter().any(|x| !x.is_finite()) {
            return Err(bad("expected an even count of finite numbers"));
        }
        let zs: Vec<Complex64> = nums.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let slot = match key {
            "h_pp" => 0,
            "h_pe" => 1,
            "h_ps" => 2,
            "h_sp" => 3,
            "h_se" => 4,
            "h_ss" => 5,
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                    line,
                })
            }
        };
        if slot < 3 {
            if zs.len() != 1 {
                return Err(bad("scalar channel takes one complex number"));
            }
            if scalars[slot].replace(zs[0]).is_some() {
                return Err(ConfigError::Repeated {
                    key: key.to_string(),
                    line,
                });
            }
        } else if vectors[slot - 3].replace(zs).is_some() {
            return Err(ConfigError::Repeated {
                key: key.to_string(),
                line,
            });
        }
    }
    let missing = |key: &str| ConfigError::Value {
        key: key.to_string(),
        value: String::new(),
        line: 0,
        reason: "missing from channel file".into(),
    };
    let names = ["h_pp", "h_pe", "h_ps", "h_sp", "h_se", "h_ss"];
    let mut s = [Complex64::default(); 3];
    for k in 0..3 {
        s[k] = scalars[k].ok_or_else(|| missing(names[k]))?;
    }
    let mut v: Vec<ComplexVec> = Vec::with_capacity(3);
    for k in 0..3 {
        let entries = vectors[k].take().ok_or_else(|| missing(names[k + 3]))?;
        v.push(ComplexVec::new(entries).map_err(|_| missing(names[k + 3]))?);
    }
    let n = v[2].len();
    if v.iter().any(|x| x.len() != n) || n < 2 {
        return Err(ConfigError::Value {
            key: "h_sp/h_se/h_ss".into(),
            value: String::new(),
            line: 0,
            reason: "vector channels need equal lengths of at least 2".into(),
        });
    }
    let h_ss = v.pop().expect("three vectors");
    let h_se = v.pop().expect("three vectors");
    let h_sp = v.pop().expect("three vectors");
    Ok(ChannelSet {
        h_pp: s[0],
        h_pe: s[1],
        h_ps: s[2],
        h_sp,
        h_se,
        h_ss,
    })
}

fn fmt_complex(z: Complex64) -> String {
    format!("{} {}", z.re, z.im)
}

fn fmt_vector(v: &ComplexVec) -> String {
    v.iter().map(|z| fmt_complex(*z)).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------------------
// Subcommand implementations

/// Detailed dump of one channel draw: both solvers, the six joint-decoding
/// rates at each solution and, for two antennas, the oracle.
pub fn cmd_single(
    ch: &ChannelSet,
    snr_db: f64,
    alpha: f64,
    res: SimplexResolution,
) -> Result<String, String> {
    let n_t = ch.n_t();
    let p = SystemParams::from_snr_db(snr_db, alpha, n_t).map_err(|e| e.to_string())?;
    let sd = solver::solve_sd(ch, &p, res).map_err(|e| e.to_string())?;
    let jd = solver::solve_jd(ch, &p, res).map_err(|e| e.to_string())?;
    let mut out = String::new();
    let _ = writeln!(out, "# channels (n_t = {n_t})");
    let _ = writeln!(out, "h_pp = {}", fmt_complex(ch.h_pp));
    let _ = writeln!(out, "h_pe = {}", fmt_complex(ch.h_pe));
    let _ = writeln!(out, "h_ps = {}", fmt_complex(ch.h_ps));
    let _ = writeln!(out, "h_sp = {}", fmt_vector(&ch.h_sp));
    let _ = writeln!(out, "h_se = {}", fmt_vector(&ch.h_se));
    let _ = writeln!(out, "h_ss = {}", fmt_vector(&ch.h_ss));
    let _ = writeln!(
        out,
        "# snr_db = {snr_db}, p_p = p_s_max = {}, alpha = {alpha}",
        p.p_s_max
    );
    let _ = writeln!(
        out,
        "# r_s_max = {}, r_min = {}, no_leasing = {}, peaceful = {}",
        rates::r_s_max(ch, &p),
        rates::r_min(ch, &p),
        rates::no_leasing_secrecy(ch, &p),
        rates::peaceful_rate(ch, &p)
    );
    for (name, r) in [("SD", &sd), ("JD", &jd)] {
        write_result(&mut out, name, r, ch, &p);
    }
    if n_t == 2 {
        let grid = OracleGrid::default();
        let bs = solver::brute_force_sd(ch, &p, grid);
        let bj = solver::brute_force_jd(ch, &p, grid);
        let _ = writeln!(
            out,
            "# oracle: sd = {} (solver - oracle = {:e}), jd = {} (solver - oracle = {:e})",
            bs.secrecy_bits,
            sd.secrecy_bits - bs.secrecy_bits,
            bj.secrecy_bits,
            jd.secrecy_bits - bj.secrecy_bits
        );
    }
    Ok(out)
}

fn write_result(out: &mut String, name: &str, r: &OptResult, ch: &ChannelSet, p: &SystemParams) {
    let _ = writeln!(
        out,
        "# [{name}] candidate = {}, regime = {}, feasible = {}",
        r.candidate,
        r.regime_label(),
        r.feasible
    );
    let _ = writeln!(
        out,
        "#   secrecy = {}, secondary = {}, power = {}",
        r.secrecy_bits, r.secondary_bits, r.power
    );
    let mu = r.mu.as_ref().map_or_else(
        || "-".to_string(),
        |m| m.as_slice().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "),
    );
    let _ = writeln!(out, "#   mu = {mu}");
    let _ = writeln!(out, "#   w = {}", fmt_vector(r.w.vector()));
    let b = rates::jd_rate_bundle(&r.w, ch, p);
    let _ = writeln!(
        out,
        "#   r_pe_jd = {}, r_se_jd = {}, r_e_mac = {}, r_pe_sd = {}, r_se_sd = {}, r_pp_sd = {}",
        b.r_pe_jd, b.r_se_jd, b.r_e_mac, b.r_pe_sd, b.r_se_sd, b.r_pp_sd
    );
}

/// Boundary points of one direction as CSV.
pub fn cmd_pgr_boundary<W: Write>(
    ch: &ChannelSet,
    snr_db: f64,
    direction: Direction,
    m: usize,
    out: &mut W,
) -> Result<(), String> {
    let p = SystemParams::from_snr_db(snr_db, 0.0, ch.n_t()).map_err(|e| e.to_string())?;
    let points = pgr::enumerate_boundary(ch, direction, m, p.p_s_max).map_err(|e| e.to_string())?;
    pgr::export_boundary(&points, out).map_err(|e| e.to_string())
}

/// Rate functions exercised by the validation suite. Swappable so that the
/// suite's sensitivity can itself be tested.
#[derive(Clone, Copy)]
pub struct RateFns {
    pub secrecy_rate_sd: fn(&Beamformer, &ChannelSet, &SystemParams) -> f64,
    pub secrecy_rate_jd: fn(&Beamformer, &ChannelSet, &SystemParams) -> (f64, Regime),
    pub secondary_rate: fn(&Beamformer, &ChannelSet, &SystemParams) -> f64,
    pub jd_rate_bundle: fn(&Beamformer, &ChannelSet, &SystemParams) -> JdRateBundle,
}

impl Default for RateFns {
    fn default() -> Self {
        RateFns {
            secrecy_rate_sd: rates::secrecy_rate_sd,
            secrecy_rate_jd: rates::secrecy_rate_jd,
            secondary_rate: rates::secondary_rate,
            jd_rate_bundle: rates::jd_rate_bundle,
        }
    }
}

/// Second logarithm added instead of subtracted.
fn secrecy_rate_sd_sign_flipped(w: &Beamformer, ch: &ChannelSet, p: &SystemParams) -> f64 {
    let g = pgr::power_gains(w, ch);
    let main = rates::log2_1p(ch.h_pp.norm_sqr() * p.p_p / (p.sigma2_p + g.sp));
    let eve = rates::log2_1p(ch.h_pe.norm_sqr() * p.p_p / (p.sigma2_e + g.se));
    (main + eve).max(0.0)
}

/// Faults the validation suite can be run against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    SdSignFlip,
}

impl std::str::FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sd-sign-flip" => Ok(Fault::SdSignFlip),
            _ => Err(format!("unknown fault `{s}`")),
        }
    }
}

impl RateFns {
    pub fn with_fault(fault: Option<Fault>) -> Self {
        let mut f = RateFns::default();
        if fault == Some(Fault::SdSignFlip) {
            f.secrecy_rate_sd = secrecy_rate_sd_sign_flipped;
        }
        f
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
    pub first_failure: Option<String>,
}

impl CheckResult {
    fn new(name: &'static str) -> Self {
        CheckResult {
            name,
            passed: 0,
            failed: 0,
            first_failure: None,
        }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(detail());
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ValidateOptions {
    /// Two-antenna instances per QoS fraction for the oracle comparison.
    pub oracle_instances: usize,
    /// Instances per antenna count for the invariant checks.
    pub invariant_instances: usize,
    pub seed: u64,
}

impl ValidateOptions {
    pub fn full() -> Self {
        ValidateOptions {
            oracle_instances: 100,
            invariant_instances: 40,
            seed: 20_240_601,
        }
    }

    pub fn quick() -> Self {
        ValidateOptions {
            oracle_instances: 20,
            invariant_instances: 8,
            seed: 20_240_601,
        }
    }
}

/// Oracle-equivalence and invariant suites. Each check is named after the
/// function it exercises.
pub fn cmd_validate(opts: &ValidateOptions, fns: &RateFns) -> Vec<CheckResult> {
    let res = SimplexResolution::default();
    let mut oracle_sd = CheckResult::new("solve_sd vs brute_force_sd");
    let mut oracle_jd = CheckResult::new("solve_jd vs brute_force_jd");
    for alpha in [0.0, 0.5] {
        for k in 0..opts.oracle_instances as u64 {
            let p = SystemParams::from_snr_db(10.0, alpha, 2).expect("valid parameters");
            let Ok((ch, _)) = sample_general_position(&p, TrialSeed::new(opts.seed, k)) else {
                continue;
            };
            let grid = OracleGrid::default();
            match (solver::solve_sd(&ch, &p, res), solver::solve_jd(&ch, &p, res)) {
                (Ok(sd), Ok(jd)) => {
                    let bs = solver::brute_force_sd(&ch, &p, grid).secrecy_bits;
                    let bj = solver::brute_force_jd(&ch, &p, grid).secrecy_bits;
                    oracle_sd.record(sd.secrecy_bits >= bs - 1e-3, || {
                        format!("alpha {alpha}, instance {k}: {} < {bs} - 1e-3", sd.secrecy_bits)
                    });
                    oracle_jd.record(jd.secrecy_bits >= bj - 2e-3, || {
                        format!("alpha {alpha}, instance {k}: {} < {bj} - 2e-3", jd.secrecy_bits)
                    });
                }
                (Err(e), _) | (_, Err(e)) => {
                    oracle_sd.record(false, || format!("instance {k}: {e}"));
                }
            }
        }
    }

    let mut sd_eval = CheckResult::new("secrecy_rate_sd");
    let mut jd_eval = CheckResult::new("secrecy_rate_jd");
    let mut secondary = CheckResult::new("secondary_rate");
    let mut chain = CheckResult::new("jd_rate_bundle");
    let mut dominance = CheckResult::new("dominance (jd <= sd <= peaceful)");
    let mut monotone = CheckResult::new("alpha monotonicity");
    let mut eig = CheckResult::new("max_eigpair");
    let mut zf = CheckResult::new("boundary_beamformer zero forcing");
    let alphas = [0.0, 0.5, 0.8];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for n_t in 2..=4usize {
        for k in 0..opts.invariant_instances as u64 {
            let p0 = SystemParams::from_snr_db(20.0, 0.0, n_t).expect("valid parameters");
            let seed = TrialSeed::new(opts.seed ^ 0x5EED, 1000 * n_t as u64 + k);
            let Ok((ch, _)) = sample_general_position(&p0, seed) else {
                continue;
            };
            let tag = || format!("n_t {n_t}, instance {k}");
            let Ok((sd, jd)) = solver::solve_both_alphas(&ch, &p0, &alphas, res) else {
                dominance.record(false, || format!("{}: solver error", tag()));
                continue;
            };
            let peaceful = rates::peaceful_rate(&ch, &p0);
            for (i, &alpha) in alphas.iter().enumerate() {
                let p = p0.with_alpha(alpha).expect("alpha in range");
                let r_min = rates::r_min(&ch, &p);
                let s = (fns.secrecy_rate_sd)(&sd[i].w, &ch, &p);
                sd_eval.record((s - sd[i].secrecy_bits).abs() <= 1e-10 && s <= peaceful + 1e-9, || {
                    format!("{}, alpha {alpha}: re-evaluated {s} vs reported {}", tag(), sd[i].secrecy_bits)
                });
                let (j, _) = (fns.secrecy_rate_jd)(&jd[i].w, &ch, &p);
                jd_eval.record((j - jd[i].secrecy_bits).abs() <= 1e-10, || {
                    format!("{}, alpha {alpha}: re-evaluated {j} vs reported {}", tag(), jd[i].secrecy_bits)
                });
                for r in [&sd[i], &jd[i]] {
                    let v = (fns.secondary_rate)(&r.w, &ch, &p);
                    secondary.record(r.feasible && v >= r_min - 1e-9, || {
                        format!("{}, alpha {alpha}: secondary {v} below {r_min}", tag())
                    });
                }
                dominance.record(
                    jd[i].secrecy_bits <= sd[i].secrecy_bits + 1e-9
                        && sd[i].secrecy_bits <= peaceful + 1e-9,
                    || {
                        format!(
                            "{}, alpha {alpha}: jd {} sd {} peaceful {peaceful}",
                            tag(),
                            jd[i].secrecy_bits,
                            sd[i].secrecy_bits
                        )
                    },
                );
            }
            for w in sd.windows(2).chain(jd.windows(2)) {
                monotone.record(w[0].secrecy_bits >= w[1].secrecy_bits - 1e-9, || {
                    format!("{}: {} then {}", tag(), w[0].secrecy_bits, w[1].secrecy_bits)
                });
            }

            // Random beamformers for the rate identities.
            for _ in 0..4 {
                let v: Vec<Complex64> = (0..n_t)
                    .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                    .collect();
                let v = ComplexVec::new(v).expect("finite");
                let scale = (p0.p_s_max * rng.random::<f64>()).sqrt() / v.norm().max(1e-300);
                let Ok(w) = Beamformer::new(v.scaled(scale), p0.p_s_max) else {
                    continue;
                };
                let b = (fns.jd_rate_bundle)(&w, &ch, &p0);
                chain.record(b.chain_residual() <= 1e-10, || {
                    format!("{}: chain residual {:e}", tag(), b.chain_residual())
                });
            }

            // Eigen residual of a random weighting of the three channels.
            let mu = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            let coeffs = [-mu[0], mu[1], mu[2]];
            if let Ok(span) = LowRankHermitian::new(&[&ch.h_sp, &ch.h_se, &ch.h_ss], RANK_TOL) {
                let ep = span.max_eigpair(&coeffs);
                let vs = [&ch.h_sp, &ch.h_se, &ch.h_ss];
                let mut resid = 0.0;
                let mut scale = 0.0;
                for row in 0..n_t {
                    let mut zv = Complex64::default();
                    for (c, h) in coeffs.iter().zip(vs) {
                        let ip: Complex64 = h.iter().zip(ep.vector.iter()).map(|(a, b)| a.conj() * b).sum();
                        zv += h[row] * ip * *c;
                    }
                    resid += (zv - ep.vector[row] * ep.value).norm_sqr();
                }
                for (c, h) in coeffs.iter().zip(vs) {
                    scale += c.abs() * h.norm_sqr();
                }
                eig.record(resid.sqrt() <= 1e-10 * scale.max(1.0), || {
                    format!("{}: residual {:e}", tag(), resid.sqrt())
                });
            }

            let zf_point = SimplexWeights::new(vec![1.0, 0.0, 0.0])
                .map_err(|e| e.to_string())
                .and_then(|mu| {
                    pgr::boundary_beamformer(&mu, Direction::E1, &ch, p0.p_s_max)
                        .map_err(|e| e.to_string())
                });
            match zf_point {
                Ok(pt) => {
                    let bound = 1e-20 * p0.p_s_max * ch.h_sp.norm_sqr();
                    zf.record(pt.gains.sp <= bound, || {
                        format!("{}: |w* h_sp|^2 = {:e}", tag(), pt.gains.sp)
                    });
                }
                Err(e) => zf.record(false, || e),
            }
            let _ = ch.is_general_position(COLLINEAR_TOL);
        }
    }
    vec![
        oracle_sd, oracle_jd, sd_eval, jd_eval, secondary, chain, dominance, monotone, eig, zf,
    ]
}

/// Text report of [`cmd_validate`] results.
pub fn validation_report(results: &[CheckResult]) -> (String, bool) {
    let mut out = String::new();
    let mut failed_checks = 0;
    for r in results {
        if r.failed == 0 {
            let _ = writeln!(out, "PASS {} ({} cases)", r.name, r.passed);
        } else {
            failed_checks += 1;
            let _ = writeln!(
                out,
                "FAIL {}: {} of {} cases failed; first: {}",
                r.name,
                r.failed,
                r.failed + r.passed,
                r.first_failure.as_deref().unwrap_or("-")
            );
        }
    }
    let _ = writeln!(
        out,
        "summary: {} checks passed, {} failed",
        results.len() - failed_checks,
        failed_checks
    );
    (out, failed_checks == 0)
}

// ---------------------------------------------------------------------------
// Argument parsing

#[derive(Debug, Parser)]
#[command(
    name = "coop-secrecy",
    version,
    about = "Secondary beamforming for spectrum leasing with physical-layer secrecy"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Secrecy versus SNR (defaults: snr 0:5:30 dB, nt 2,3).
    SweepSnr(SweepArgs),
    /// Secrecy versus antenna count (defaults: snr 20 dB, nt 2:1:10).
    SweepNt(SweepArgs),
    /// Solve one channel draw and print everything.
    Single(SingleArgs),
    /// Boundary points of the power gain region as CSV.
    PgrBoundary(BoundaryArgs),
    /// Run the oracle-equivalence and invariant suites.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// `key = value` config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// SD, JD or BOTH.
    #[arg(long)]
    pub decoder: Option<String>,
    /// Comma list; `a:step:b` expands to a range.
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    pub snr_db: Option<String>,
    #[arg(long)]
    pub nt: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub resolution: Option<String>,
    /// true or false.
    #[arg(long)]
    pub baselines: Option<String>,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the summary table to stderr.
    #[arg(long)]
    pub summary: bool,
}

impl SweepArgs {
    fn layer(&self) -> Result<ConfigLayer, ConfigError> {
        let mut l = ConfigLayer::default();
        let pairs = [
            ("decoder", &self.decoder),
            ("snr_db", &self.snr_db),
            ("nt", &self.nt),
            ("alpha", &self.alpha),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("resolution", &self.resolution),
            ("baselines", &self.baselines),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                l.set(key, v.trim(), 0)?;
            }
        }
        Ok(l)
    }
}

#[derive(Debug, Args)]
pub struct SingleArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Trial index within the seed.
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
    #[arg(long, default_value_t = 2)]
    pub nt: usize,
    #[arg(long = "snr-db", default_value_t = 10.0, allow_hyphen_values = true)]
    pub snr_db: f64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100)]
    pub resolution: usize,
    /// Channel file (`name = re im ...` lines) instead of a seeded draw.
    #[arg(long)]
    pub channels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
    #[arg(long, default_value_t = 2)]
    pub nt: usize,
    #[arg(long = "snr-db", default_value_t = 10.0, allow_hyphen_values = true)]
    pub snr_db: f64,
    /// e1, e2 or primary-secondary.
    #[arg(long, default_value = "e1")]
    pub direction: String,
    /// Lattice resolution.
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    #[arg(long)]
    pub channels: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// 20 two-antenna oracle instances instead of 100.
    #[arg(long)]
    pub quick: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run against a deliberately broken rate function.
    #[arg(long, hide = true)]
    pub inject_fault: Option<String>,
}

fn channels_for(
    path: Option<&Path>,
    seed: u64,
    trial: u64,
    nt: usize,
    snr_db: f64,
) -> Result<ChannelSet, String> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            parse_channels(&text).map_err(|e| e.to_string())
        }
        None => {
            let p = SystemParams::from_snr_db(snr_db, 0.0, nt).map_err(|e| e.to_string())?;
            sample_general_position(&p, TrialSeed::new(seed, trial))
                .map(|(ch, _)| ch)
                .map_err(|e| e.to_string())
        }
    }
}

fn write_output(path: Option<&Path>, out: &mut dyn Write, bytes: &[u8]) -> Result<(), String> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => out.write_all(bytes).map_err(|e| e.to_string()),
    }
}

/// Entry point: parses `args` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                EXIT_USAGE
            } else {
                let _ = out.write_all(text.as_bytes());
                EXIT_OK
            };
        }
    };
    let usage = |err: &mut dyn Write, msg: String| {
        let _ = writeln!(err, "error: {msg}");
        EXIT_USAGE
    };
    match cli.command {
        Command::SweepSnr(a) => run_sweep_cmd(&a, snr_defaults(), out, err),
        Command::SweepNt(a) => run_sweep_cmd(&a, nt_defaults(), out, err),
        Command::Single(a) => {
            if a.resolution == 0 {
                return usage(err, "resolution must be at least 1".into());
            }
            let ch = match channels_for(a.channels.as_deref(), a.seed, a.trial, a.nt, a.snr_db) {
                Ok(c) => c,
                Err(m) => return usage(err, m),
            };
            match cmd_single(&ch, a.snr_db, a.alpha, SimplexResolution::new(a.resolution)) {
                Ok(text) => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                Err(m) => usage(err, m),
            }
        }
        Command::PgrBoundary(a) => {
            let direction = match a.direction.to_ascii_lowercase().as_str() {
                "e1" => Direction::E1,
                "e2" => Direction::E2,
                "primary-secondary" | "s3" => Direction::PRIMARY_SECONDARY,
                other => return usage(err, format!("unknown direction `{other}`")),
            };
            let ch = match channels_for(a.channels.as_deref(), a.seed, a.trial, a.nt, a.snr_db) {
                Ok(c) => c,
                Err(m) => return usage(err, m),
            };
            let mut buf = Vec::new();
            if let Err(m) = cmd_pgr_boundary(&ch, a.snr_db, direction, a.m, &mut buf) {
                return usage(err, m);
            }
            match write_output(a.out.as_deref(), out, &buf) {
                Ok(()) => EXIT_OK,
                Err(m) => usage(err, m),
            }
        }
        Command::Validate(a) => {
            let fault = match a.inject_fault.as_deref().map(str::parse::<Fault>).transpose() {
                Ok(f) => f,
                Err(m) => return usage(err, m),
            };
            let mut opts = if a.quick {
                ValidateOptions::quick()
            } else {
                ValidateOptions::full()
            };
            if let Some(s) = a.seed {
                opts.seed = s;
            }
            let results = cmd_validate(&opts, &RateFns::with_fault(fault));
            let (text, ok) = validation_report(&results);
            let _ = out.write_all(text.as_bytes());
            if ok {
                EXIT_OK
            } else {
                EXIT_VALIDATION
            }
        }
    }
}

fn snr_defaults() -> SweepConfig {
    SweepConfig::default()
}

fn nt_defaults() -> SweepConfig {
    SweepConfig {
        snr_db: vec![20.0],
        nt: (2..=10).collect(),
        ..SweepConfig::default()
    }
}

fn run_sweep_cmd(a: &SweepArgs, defaults: SweepConfig, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let cfg = a
        .layer()
        .and_then(|flags| parse_config(a.config.as_deref(), &flags, defaults));
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let rows = match harness::run_sweep_detailed(&cfg, a.workers, None) {
        Ok(r) => r.rows,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let mut buf = Vec::new();
    if let Err(e) = emit_csv(&rows, &mut buf) {
        let _ = writeln!(err, "error: {e}");
        return EXIT_USAGE;
    }
    if a.summary {
        let _ = err.write_all(harness::summarize(&rows).as_bytes());
    }
    match write_output(a.out.as_deref(), out, &buf) {
        Ok(()) => EXIT_OK,
        Err(m) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
    }
}
