//! Acceptance suite. Each test prints one `PASS` or `FAIL` line to stderr
//! (uncaptured, so it shows in a plain `cargo test` run) and then asserts.
//!
//! The two Monte Carlo sweeps are shared between tests through `OnceLock`.

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use coop_secrecy::cli::emit_csv;
use coop_secrecy::harness::{run_sweep_detailed, summarize, Decoder, Stats, SweepConfig, SweepResult, TrialRecord};
use coop_secrecy::model::{sample_general_position, Beamformer, ChannelSet, SystemParams, TrialSeed};
use coop_secrecy::numerics::ComplexVec;
use coop_secrecy::pgr::{boundary_beamformer, Direction, SimplexWeights};
use coop_secrecy::rates::{jd_rate_bundle, secrecy_from_bundle};
use coop_secrecy::solver::{
    brute_force_jd, brute_force_sd, solve_jd, solve_sd, solve_sd_with_power_sweep, OracleGrid, SimplexResolution,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const MASTER_SEED: u64 = 1;
const ALPHAS: [f64; 3] = [0.0, 0.5, 0.8];
/// Trials for the two- and three-antenna sweep at 20 dB.
const TRIALS: usize = 2000;
/// Trials per antenna count for the 2..=10 trend.
const TREND_TRIALS: usize = 500;

fn print_line(pass: bool, name: &str, detail: &str) {
    let line = format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

fn report(pass: bool, name: &str, detail: String) {
    print_line(pass, name, &detail);
    assert!(pass, "{name}: {detail}");
}

fn draw(n_t: usize, snr_db: f64, alpha: f64, master: u64, trial: u64) -> (ChannelSet, SystemParams) {
    let p = SystemParams::from_snr_db(snr_db, alpha, n_t).unwrap();
    let (ch, _) = sample_general_position(&p, TrialSeed::new(master, trial)).unwrap();
    (ch, p)
}

fn sweep(nt: Vec<usize>, trials: usize) -> SweepResult {
    let cfg = SweepConfig {
        decoder: Decoder::Both,
        snr_db: vec![20.0],
        nt,
        alpha: ALPHAS.to_vec(),
        trials,
        master_seed: MASTER_SEED,
        resolution: 100,
        include_baselines: true,
    };
    run_sweep_detailed(&cfg, 0, None).unwrap()
}

/// Two and three antennas at 20 dB.
fn small_arrays() -> &'static SweepResult {
    static CELL: OnceLock<SweepResult> = OnceLock::new();
    CELL.get_or_init(|| sweep(vec![2, 3], TRIALS))
}

/// Four to ten antennas at 20 dB. Trials share seeds with `small_arrays`.
fn large_arrays() -> &'static SweepResult {
    static CELL: OnceLock<SweepResult> = OnceLock::new();
    CELL.get_or_init(|| sweep((4..=10).collect(), TREND_TRIALS))
}

/// Records for `nt` antennas, the first `TREND_TRIALS` trials only.
fn trend_records(nt: usize) -> Vec<&'static TrialRecord> {
    let src = if nt <= 3 { small_arrays() } else { large_arrays() };
    src.cell(20.0, nt)
        .filter(|t| (t.trial as usize) < TREND_TRIALS)
        .collect()
}

#[test]
fn oracle_equivalence_two_antennas() {
    let res = SimplexResolution::default();
    let start = Instant::now();
    let (mut worst_sd, mut worst_jd) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (mut bad_sd, mut bad_jd) = (0, 0);
    for alpha in [0.0, 0.5] {
        for trial in 0..100 {
            let (ch, p) = draw(2, 10.0, alpha, MASTER_SEED, trial);
            let sd = solve_sd(&ch, &p, res).unwrap();
            let jd = solve_jd(&ch, &p, res).unwrap();
            let gap_sd = brute_force_sd(&ch, &p, OracleGrid::default()).secrecy_bits - sd.secrecy_bits;
            let gap_jd = brute_force_jd(&ch, &p, OracleGrid::default()).secrecy_bits - jd.secrecy_bits;
            worst_sd = worst_sd.max(gap_sd);
            worst_jd = worst_jd.max(gap_jd);
            bad_sd += usize::from(gap_sd > 1e-3);
            bad_jd += usize::from(gap_jd > 2e-3);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let sd_pass = bad_sd == 0 && secs < 300.0;
    let jd_pass = bad_jd == 0;
    let line_sd = format!(
        "oracle - solve_sd worst {worst_sd:.3e} bit (tol 1e-3), {bad_sd} of 200 over; {secs:.1} s incl. oracle (limit 300 s)"
    );
    let line_jd = format!("oracle - solve_jd worst {worst_jd:.3e} bit (tol 2e-3), {bad_jd} of 200 over");
    print_line(sd_pass, "single-user oracle equivalence", &line_sd);
    print_line(jd_pass, "joint-decoding oracle equivalence", &line_jd);
    assert!(sd_pass && jd_pass, "{line_sd}; {line_jd}");
}

#[test]
fn full_power_is_optimal_for_single_user_decoding() {
    let res = SimplexResolution::default();
    let mut worst = f64::NEG_INFINITY;
    let mut over = 0;
    for k in 0..500u64 {
        let n_t = 2 + (k % 3) as usize;
        let alpha = ALPHAS[(k / 3 % 3) as usize];
        let (ch, p) = draw(n_t, 10.0, alpha, MASTER_SEED + 2, k);
        let full = solve_sd(&ch, &p, res).unwrap().secrecy_bits;
        let swept = solve_sd_with_power_sweep(&ch, &p, res).unwrap().secrecy_bits;
        worst = worst.max(swept - full);
        over += usize::from(swept - full > 1e-9);
    }
    report(
        over == 0,
        "full power suffices",
        format!("largest gain from a power sweep {worst:.3e} bit (tol 1e-9), {over} of 500 over"),
    );
}

#[test]
fn chain_identity_and_regime_continuity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4A1);
    let (mut chain_worst, mut jump_worst) = (0.0f64, 0.0f64);
    for k in 0..10_000u64 {
        let n_t = rng.random_range(2..=8);
        let snr = rng.random_range(-10.0..30.0);
        let (ch, p) = draw(n_t, snr, 0.0, MASTER_SEED + 3, k);
        let v: Vec<Complex64> = (0..n_t)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let v = ComplexVec::new(v).unwrap();
        let power = p.p_s_max * rng.random::<f64>();
        let w = Beamformer::new(v.scaled((power / v.norm_sqr()).sqrt()), p.p_s_max).unwrap();
        let b = jd_rate_bundle(&w, &ch, &p);
        chain_worst = chain_worst.max(b.chain_residual());
        // Secrecy on either side of each regime boundary in the secondary rate.
        for edge in [b.r_se_jd, b.r_se_sd] {
            let d = 1e-13 * (1.0 + edge);
            let lo = secrecy_from_bundle(&b, edge - d).0;
            let at = secrecy_from_bundle(&b, edge).0;
            let hi = secrecy_from_bundle(&b, edge + d).0;
            jump_worst = jump_worst.max((hi - lo).abs()).max((at - lo).abs());
        }
    }
    report(
        chain_worst <= 1e-10 && jump_worst <= 1e-10,
        "chain identity and regime continuity",
        format!("10000 tuples, worst chain residual {chain_worst:.3e}, worst jump across a boundary {jump_worst:.3e} (tol 1e-10)"),
    );
}

#[test]
fn dominance_chain_per_realization() {
    let res = small_arrays();
    let mut violations = 0;
    let mut checked = 0;
    let mut first = String::new();
    for t in &res.trials {
        let mut note = |what: &str| {
            if first.is_empty() {
                first = format!("; first: nt {} trial {} {what}", t.nt, t.trial);
            }
        };
        for i in 0..ALPHAS.len() {
            checked += 1;
            let (s, j) = (t.sd[i].secrecy_bits, t.jd[i].secrecy_bits);
            if j > s + 1e-9 {
                violations += 1;
                note("jd > sd");
            }
            if s > t.peaceful_bits + 1e-9 {
                violations += 1;
                note("sd > peaceful");
            }
            if i > 0 && (s > t.sd[i - 1].secrecy_bits + 1e-9 || j > t.jd[i - 1].secrecy_bits + 1e-9) {
                violations += 1;
                note("increase in alpha");
            }
        }
    }
    report(
        violations == 0,
        "dominance chain",
        format!(
            "{} trials x {} alphas at nt 2 and 3 ({checked} checks), {violations} violations beyond 1e-9{first}",
            TRIALS,
            ALPHAS.len()
        ),
    );
}

#[test]
fn leasing_beats_no_leasing_with_three_antennas() {
    let res = small_arrays();
    let mut ok = true;
    let mut parts = Vec::new();
    for r in res.rows.iter().filter(|r| r.nt == 3) {
        if r.decoder == Decoder::Jd && r.alpha > 0.5 {
            continue;
        }
        let gain = r.leasing_gain().unwrap();
        let pass = gain > 2.0 * r.ci95_halfwidth;
        ok &= pass;
        parts.push(format!(
            "{} a={} gain {gain:.3} vs 2*ci95 {:.3}{}",
            r.decoder,
            r.alpha,
            2.0 * r.ci95_halfwidth,
            if pass { "" } else { " (short)" }
        ));
    }
    report(ok && parts.len() == 5, "leasing beats no leasing at nt 3", parts.join("; "));
}

#[test]
fn two_antenna_joint_decoding_gap_is_reported() {
    let res = small_arrays();
    let row = res
        .rows
        .iter()
        .find(|r| r.decoder == Decoder::Jd && r.nt == 2 && r.alpha == 0.8)
        .unwrap();
    let gap = row.leasing_gain().unwrap();
    let summary = summarize(&res.rows);
    let flagged = summary.lines().any(|l| {
        let f: Vec<&str> = l.split_whitespace().collect();
        f.len() > 4 && f[0] == "JD" && f[2] == "2" && f[3] == "0.8" && l.contains("FLAG")
    });
    // The gap may have either sign; a nonpositive gap must be flagged.
    let pass = gap > 0.0 || flagged;
    report(
        pass,
        "two-antenna joint-decoding gap reported",
        format!(
            "JD nt 2 alpha 0.8: leasing - no leasing = {gap:+.4} bit (ci95 {:.4}), {}",
            row.ci95_halfwidth,
            if flagged { "flagged in the summary" } else { "not flagged" }
        ),
    );
}

#[test]
fn more_antennas_approach_the_peaceful_rate() {
    let mut ok = true;
    let mut notes = Vec::new();
    let mut worst_step = f64::INFINITY;
    for (decoder, pick) in [("SD", true), ("JD", false)] {
        for (i, _) in ALPHAS.iter().enumerate() {
            let value = |t: &TrialRecord| if pick { t.sd[i].secrecy_bits } else { t.jd[i].secrecy_bits };
            for nt in 2..10 {
                let a = Stats::of(trend_records(nt).into_iter().map(value));
                let b = Stats::of(trend_records(nt + 1).into_iter().map(value));
                let step = b.mean - a.mean;
                worst_step = worst_step.min(step);
                if step < -a.ci95.max(b.ci95) {
                    ok = false;
                    notes.push(format!("{decoder} a={} drops {step:.4} from nt {nt}", ALPHAS[i]));
                }
            }
        }
    }
    // Paired gap to the peaceful rate, nt 3 versus nt 10, single-user decoding.
    let mut margins = Vec::new();
    for (i, alpha) in ALPHAS.iter().enumerate() {
        let three = trend_records(3);
        let ten = trend_records(10);
        assert_eq!(three.len(), ten.len());
        let diff = Stats::of(three.iter().zip(&ten).map(|(a, b)| {
            assert_eq!(a.trial, b.trial);
            (a.peaceful_bits - a.sd[i].secrecy_bits) - (b.peaceful_bits - b.sd[i].secrecy_bits)
        }));
        let pass = diff.mean > diff.ci95;
        ok &= pass;
        margins.push(format!("a={alpha} gap shrinks {:.4} +- {:.4}", diff.mean, diff.ci95));
    }
    let mut detail = format!(
        "{TREND_TRIALS} paired trials per nt 2..=10, smallest mean step {worst_step:+.4}; SD {}",
        margins.join(", ")
    );
    if !notes.is_empty() {
        detail.push_str(&format!("; {}", notes.join("; ")));
    }
    report(ok, "secrecy grows with antennas", detail);
}

#[test]
fn zero_forcing_corner_is_exact() {
    let mu = SimplexWeights::new(vec![1.0, 0.0, 0.0]).unwrap();
    let mut worst = 0.0f64;
    for k in 0..1000u64 {
        let n_t = 2 + (k % 3) as usize;
        let (ch, p) = draw(n_t, 10.0, 0.0, MASTER_SEED + 9, k);
        let pt = boundary_beamformer(&mu, Direction::E1, &ch, p.p_s_max).unwrap();
        worst = worst.max(pt.gains.sp / (p.p_s_max * ch.h_sp.norm_sqr()));
    }
    report(
        worst <= 1e-20,
        "zero forcing",
        format!("1000 channels, nt 2..=4, worst |w* h_sp|^2 / (P ||h_sp||^2) = {worst:.3e} (tol 1e-20)"),
    );
}

#[test]
fn csv_is_identical_for_any_worker_count() {
    let cfg = SweepConfig {
        snr_db: vec![0.0, 20.0],
        nt: vec![2, 4],
        alpha: vec![0.0, 0.8],
        trials: 40,
        resolution: 50,
        ..SweepConfig::default()
    };
    let csv = |workers| {
        let rows = run_sweep_detailed(&cfg, workers, None).unwrap().rows;
        let mut buf = Vec::new();
        emit_csv(&rows, &mut buf).unwrap();
        buf
    };
    let one = csv(1);
    let four = csv(4);
    let again = csv(1);
    report(
        one == four && one == again,
        "determinism",
        format!("{} CSV bytes, 1 vs 4 workers and a rerun byte-identical: {}", one.len(), one == four && one == again),
    );
}
