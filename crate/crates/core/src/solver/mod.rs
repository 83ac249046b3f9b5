//! Optimal secondary beamformers for both eavesdropper models.
//!
//! Against a single-user-decoding eavesdropper the optimum lies on the
//! direction `e1 = [-1, +1, +1]` boundary at full power, so the search runs
//! over the weight simplex of that family. Against a joint-decoding
//! eavesdropper there are three candidate pools, one per decoding regime:
//!
//! * `S1`: the `e1` family at full power, restricted to
//!   `R_se^JD <= R_ss`;
//! * `S2`: the `e2 = [-1, -1, +1]` family with the boundary power rule,
//!   restricted to `R_se^SD <= R_ss <= R_se^JD`;
//! * `S3`: the two-receiver family over `{h_sp, h_ss}` with any power,
//!   restricted to `R_ss <= R_se^SD`.
//!
//! Each pool is searched on a lattice and then refined locally; the best
//! survivor across pools wins. [`oracle`] holds the direct-search reference
//! used to validate these solvers.

pub mod oracle;
mod search;

use std::fmt;

use thiserror::Error;

use crate::model::{ChannelSet, ModelError, SystemParams, COLLINEAR_TOL};
use crate::model::Beamformer;
use crate::pgr::{BoundaryFamily, Direction, PgrError, SimplexWeights};
use crate::rates::{self, LinkBudget, Regime};

use search::{Eval, Objective, Pool, Shape, UnitLattice};

pub use oracle::{brute_force_jd, brute_force_sd, OracleGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("channels are not in general position")]
    DegenerateChannels,
    #[error("simplex resolution must be at least 1, got {0}")]
    Resolution(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pgr(#[from] PgrError),
}

/// Which candidate set produced a solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Candidate {
    S1,
    S2,
    S3,
    SingleUser,
    /// Direct search over beamformers (the oracle).
    Exhaustive,
}

impl Candidate {
    pub fn label(&self) -> &'static str {
        match self {
            Candidate::S1 => "S1",
            Candidate::S2 => "S2",
            Candidate::S3 => "S3",
            Candidate::SingleUser => "SINGLE_USER",
            Candidate::Exhaustive => "EXHAUSTIVE",
        }
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Lattice resolutions for three-weight and two-weight families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimplexResolution {
    pub three_term: usize,
    pub two_term: usize,
}

impl SimplexResolution {
    /// `m` for three-weight families and `4 m` for two-weight ones.
    pub fn new(m: usize) -> Self {
        SimplexResolution {
            three_term: m,
            two_term: 4 * m,
        }
    }
}

impl Default for SimplexResolution {
    fn default() -> Self {
        SimplexResolution::new(100)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptResult {
    pub w: Beamformer,
    pub secrecy_bits: f64,
    pub secondary_bits: f64,
    /// `None` for the single-user-decoding objective.
    pub regime: Option<Regime>,
    /// Weights that generated `w`; `None` for the oracle.
    pub mu: Option<SimplexWeights>,
    pub power: f64,
    pub candidate: Candidate,
    pub feasible: bool,
}

impl OptResult {
    pub fn regime_label(&self) -> &'static str {
        self.regime.map_or("SINGLE_USER", |r| r.label())
    }
}

fn check_inputs(ch: &ChannelSet, p: &SystemParams, res: SimplexResolution) -> Result<(), SolveError> {
    p.validate()?;
    ch.validate(p.n_t)?;
    if res.three_term == 0 || res.two_term == 0 {
        return Err(SolveError::Resolution(res.three_term.min(res.two_term)));
    }
    if !ch.is_general_position(COLLINEAR_TOL) {
        return Err(SolveError::DegenerateChannels);
    }
    Ok(())
}

fn thresholds(ch: &ChannelSet, p: &SystemParams, alphas: &[f64]) -> Result<Vec<f64>, SolveError> {
    let r_s_max = rates::r_s_max(ch, p);
    alphas
        .iter()
        .map(|&a| {
            p.with_alpha(a)?;
            Ok(a * r_s_max - search::SLACK)
        })
        .collect()
}

fn to_result(e: &Eval, family: &BoundaryFamily<'_>) -> Result<OptResult, SolveError> {
    let mu = SimplexWeights::new(e.mu[..family.arity()].to_vec())?;
    let point = family.point(&mu, e.power)?;
    Ok(OptResult {
        w: point.w,
        secrecy_bits: e.actual,
        secondary_bits: e.secondary,
        regime: e.regime,
        mu: Some(mu),
        power: e.power,
        candidate: e.pool,
        feasible: true,
    })
}

fn collect(
    winners: Vec<Option<Eval>>,
    pools: &[Pool<'_>],
    alphas: &[f64],
    lb: &LinkBudget,
) -> Result<Vec<OptResult>, SolveError> {
    winners
        .into_iter()
        .zip(alphas)
        .map(|(w, &alpha)| {
            if alpha >= 1.0 {
                return mrt_result(pools, lb);
            }
            // MRT belongs to every pool and meets any threshold up to slack.
            let e = w.expect("maximum ratio transmission is always a candidate");
            let pool = pools
                .iter()
                .find(|p| p.kind == e.pool)
                .expect("winner comes from a pool");
            to_result(&e, pool.family())
        })
        .collect()
}

/// At full QoS the constraint admits only the MRT direction. The rate slack
/// would otherwise let the local search drift `O(sqrt(SLACK))` away from it.
fn mrt_result(pools: &[Pool<'_>], lb: &LinkBudget) -> Result<OptResult, SolveError> {
    let pool = &pools[0];
    let mut mu = [0.0; 3];
    mu[pool.family().arity() - 1] = 1.0;
    let mu = SimplexWeights::new(mu[..pool.family().arity()].to_vec())?;
    let point = pool.family().point(&mu, pool.p_max())?;
    let (secrecy_bits, regime, candidate) = match pool.kind {
        Candidate::SingleUser => (lb.secrecy_sd_from_gains(&point.gains), None, Candidate::SingleUser),
        _ => {
            let (v, r) = lb.secrecy_jd_from_gains(&point.gains);
            let c = match r {
                Regime::EveDecodesSecondary => Candidate::S1,
                Regime::MacSumLimited => Candidate::S2,
                Regime::EveIgnoresSecondary => Candidate::S3,
            };
            (v, Some(r), c)
        }
    };
    Ok(OptResult {
        secondary_bits: lb.secondary_from_gains(&point.gains),
        w: point.w,
        secrecy_bits,
        regime,
        mu: Some(mu),
        power: pool.p_max(),
        candidate,
        feasible: true,
    })
}

struct Families<'a> {
    e1: BoundaryFamily<'a>,
    e1_units: UnitLattice,
}

impl<'a> Families<'a> {
    fn new(ch: &'a ChannelSet, res: SimplexResolution) -> Result<Self, SolveError> {
        let e1 = BoundaryFamily::new(ch, Direction::E1)?;
        let e1_units = UnitLattice::build(&e1, Shape::FullPower, res.three_term);
        Ok(Families { e1, e1_units })
    }

    fn sd_pools(&self, lb: &LinkBudget, p: &SystemParams) -> Vec<Pool<'a>> {
        vec![Pool::new(
            Candidate::SingleUser,
            Objective::SingleUser,
            self.e1.clone(),
            &self.e1_units,
            lb,
            p.p_s_max,
        )]
    }

    fn jd_pools(
        &self,
        ch: &'a ChannelSet,
        lb: &LinkBudget,
        p: &SystemParams,
        res: SimplexResolution,
    ) -> Result<Vec<Pool<'a>>, SolveError> {
        let e2 = BoundaryFamily::new(ch, Direction::E2)?;
        let two = BoundaryFamily::new(ch, Direction::PRIMARY_SECONDARY)?;
        let mut pools = vec![
            Pool::new(
                Candidate::S1,
                Objective::Joint(Candidate::S1),
                self.e1.clone(),
                &self.e1_units,
                lb,
                p.p_s_max,
            ),
            Pool::new(
                Candidate::S2,
                Objective::Joint(Candidate::S2),
                e2.clone(),
                &UnitLattice::build(&e2, Shape::RuledPower, res.three_term),
                lb,
                p.p_s_max,
            ),
        ];
        // With fewer antennas than receivers, lambda_max(Z) = 0 on a curve of
        // weights where any power reaches the boundary.
        if p.n_t < 3 {
            pools.push(Pool::new(
                Candidate::S2,
                Objective::Joint(Candidate::S2),
                e2.clone(),
                &UnitLattice::build(&e2, Shape::ZeroCurve, res.two_term),
                lb,
                p.p_s_max,
            ));
        }
        pools.push(Pool::new(
            Candidate::S3,
            Objective::Joint(Candidate::S3),
            two.clone(),
            &UnitLattice::build(&two, Shape::PowerSwept, res.two_term),
            lb,
            p.p_s_max,
        ));
        Ok(pools)
    }
}

/// Optimal beamformer against a single-user-decoding eavesdropper.
pub fn solve_sd(ch: &ChannelSet, p: &SystemParams, res: SimplexResolution) -> Result<OptResult, SolveError> {
    Ok(solve_sd_alphas(ch, p, &[p.alpha], res)?.remove(0))
}

/// [`solve_sd`] for several QoS fractions at once; `p.alpha` is ignored.
/// The lattice is shared, and the objective is nonincreasing in alpha.
pub fn solve_sd_alphas(
    ch: &ChannelSet,
    p: &SystemParams,
    alphas: &[f64],
    res: SimplexResolution,
) -> Result<Vec<OptResult>, SolveError> {
    check_inputs(ch, p, res)?;
    let th = thresholds(ch, p, alphas)?;
    let lb = LinkBudget::new(ch, p);
    let fam = Families::new(ch, res)?;
    let pools = fam.sd_pools(&lb, p);
    collect(search::solve_thresholds(&pools, &lb, &th), &pools, alphas, &lb)
}

/// Optimal beamformer against a joint-decoding eavesdropper.
pub fn solve_jd(ch: &ChannelSet, p: &SystemParams, res: SimplexResolution) -> Result<OptResult, SolveError> {
    Ok(solve_jd_alphas(ch, p, &[p.alpha], res)?.remove(0))
}

pub fn solve_jd_alphas(
    ch: &ChannelSet,
    p: &SystemParams,
    alphas: &[f64],
    res: SimplexResolution,
) -> Result<Vec<OptResult>, SolveError> {
    check_inputs(ch, p, res)?;
    let th = thresholds(ch, p, alphas)?;
    let lb = LinkBudget::new(ch, p);
    let fam = Families::new(ch, res)?;
    let pools = fam.jd_pools(ch, &lb, p, res)?;
    collect(search::solve_thresholds(&pools, &lb, &th), &pools, alphas, &lb)
}

/// Both solvers for several QoS fractions, sharing the `e1` lattice.
/// Returns `(single_user, joint)`.
pub fn solve_both_alphas(
    ch: &ChannelSet,
    p: &SystemParams,
    alphas: &[f64],
    res: SimplexResolution,
) -> Result<(Vec<OptResult>, Vec<OptResult>), SolveError> {
    check_inputs(ch, p, res)?;
    let th = thresholds(ch, p, alphas)?;
    let lb = LinkBudget::new(ch, p);
    let fam = Families::new(ch, res)?;
    let sd_pools = fam.sd_pools(&lb, p);
    let jd_pools = fam.jd_pools(ch, &lb, p, res)?;
    let sd = collect(search::solve_thresholds(&sd_pools, &lb, &th), &sd_pools, alphas, &lb)?;
    let jd = collect(search::solve_thresholds(&jd_pools, &lb, &th), &jd_pools, alphas, &lb)?;
    Ok((sd, jd))
}

/// [`solve_sd`] with every lattice direction additionally evaluated over the
/// interval power grid; returns whichever is better. Used to check that
/// reducing power never helps the single-user objective.
pub fn solve_sd_with_power_sweep(
    ch: &ChannelSet,
    p: &SystemParams,
    res: SimplexResolution,
) -> Result<OptResult, SolveError> {
    check_inputs(ch, p, res)?;
    let th = thresholds(ch, p, &[p.alpha])?[0];
    let lb = LinkBudget::new(ch, p);
    let fam = Families::new(ch, res)?;
    let pools = fam.sd_pools(&lb, p);
    let full = search::solve_thresholds(&pools, &lb, &[th]).remove(0);
    let swept = search::best_with_power_grid(&pools[0], &fam.e1_units, &lb, th);
    let best = match (full, swept) {
        (Some(a), Some(b)) => Some(if search::compare(&b, &a).is_gt() { b } else { a }),
        (a, b) => a.or(b),
    };
    collect(vec![best], &pools, &[p.alpha], &lb).map(|mut v| v.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mrt_beamformer, sample_general_position, TrialSeed};
    use crate::numerics::{inner, ComplexVec};
    use crate::rates::{peaceful_rate, secrecy_rate_jd, secrecy_rate_sd, secondary_rate};
    use num_complex::Complex64;

    fn draw(n_t: usize, snr_db: f64, alpha: f64, trial: u64) -> (ChannelSet, SystemParams) {
        let p = SystemParams::from_snr_db(snr_db, alpha, n_t).unwrap();
        let (ch, _) = sample_general_position(&p, TrialSeed::new(1234, trial)).unwrap();
        (ch, p)
    }

    fn collinear_with(w: &Beamformer, h: &ComplexVec) -> bool {
        let ip = inner(w.vector(), h).unwrap().norm();
        (ip - w.vector().norm() * h.norm()).abs() <= 1e-9 * w.vector().norm() * h.norm()
    }

    #[test]
    fn full_qos_forces_mrt() {
        for trial in 0..5 {
            let (ch, p) = draw(3, 10.0, 1.0, trial);
            let mrt = mrt_beamformer(&ch, &p).unwrap();
            let sd = solve_sd(&ch, &p, SimplexResolution::new(20)).unwrap();
            assert!(collinear_with(&sd.w, &ch.h_ss));
            assert!((sd.secrecy_bits - secrecy_rate_sd(&mrt, &ch, &p)).abs() < 1e-9);
            let jd = solve_jd(&ch, &p, SimplexResolution::new(20)).unwrap();
            assert!(collinear_with(&jd.w, &ch.h_ss));
            assert!((jd.secrecy_bits - secrecy_rate_jd(&mrt, &ch, &p).0).abs() < 1e-9);
        }
    }

    #[test]
    fn no_eavesdropper_channel_reaches_peaceful_rate() {
        for n_t in [2, 3] {
            let (mut ch, p) = draw(n_t, 10.0, 0.0, 9);
            ch.h_pe = Complex64::new(0.0, 0.0);
            let sd = solve_sd(&ch, &p, SimplexResolution::new(20)).unwrap();
            assert!((sd.secrecy_bits - peaceful_rate(&ch, &p)).abs() < 1e-9);
        }
    }

    #[test]
    fn results_are_consistent_with_their_beamformer() {
        for trial in 0..6 {
            let (ch, p) = draw(2 + (trial as usize % 3), 15.0, 0.5, trial);
            let r_min = rates::r_min(&ch, &p);
            let sd = solve_sd(&ch, &p, SimplexResolution::new(30)).unwrap();
            assert!(sd.feasible && sd.secondary_bits >= r_min - 1e-9);
            assert!((secrecy_rate_sd(&sd.w, &ch, &p) - sd.secrecy_bits).abs() <= 1e-10);
            assert!((secondary_rate(&sd.w, &ch, &p) - sd.secondary_bits).abs() <= 1e-10);
            assert!(sd.w.power() <= p.p_s_max + 1e-9);

            let jd = solve_jd(&ch, &p, SimplexResolution::new(30)).unwrap();
            assert!(jd.feasible && jd.secondary_bits >= r_min - 1e-9);
            let (v, _) = secrecy_rate_jd(&jd.w, &ch, &p);
            assert!((v - jd.secrecy_bits).abs() <= 1e-10);
            assert!(jd.secrecy_bits <= sd.secrecy_bits + 1e-9);
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let (mut ch, p) = draw(2, 10.0, 0.0, 1);
        assert_eq!(
            solve_sd(&ch, &p, SimplexResolution::new(0)),
            Err(SolveError::Resolution(0))
        );
        ch.h_ss = ch.h_se.scaled(2.0);
        assert_eq!(
            solve_jd(&ch, &p, SimplexResolution::new(10)),
            Err(SolveError::DegenerateChannels)
        );
    }

    #[test]
    fn alpha_sweep_is_monotone() {
        for trial in 0..4 {
            let (ch, p) = draw(2, 20.0, 0.0, trial);
            let alphas = [0.0, 0.5, 0.8];
            let res = SimplexResolution::new(30);
            let (sd, jd) = solve_both_alphas(&ch, &p, &alphas, res).unwrap();
            for w in sd.windows(2).chain(jd.windows(2)) {
                assert!(w[0].secrecy_bits >= w[1].secrecy_bits);
            }
        }
    }
}
