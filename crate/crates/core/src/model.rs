//! Scenario configuration, channel realizations and beamformers.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::numerics::{self, ComplexVec, NumericsError};

/// Slack allowed on the beamformer power constraint.
pub const POWER_SLACK: f64 = 1e-9;

/// Residual tolerance for the pairwise non-collinearity check.
pub const COLLINEAR_TOL: f64 = 1e-10;

/// Upper bound on redraws for a trial whose channels are not in general
/// position. Under continuous fading this is never reached.
const MAX_REDRAWS: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("channel {name} has length {got}, expected {expected}")]
    ChannelLength {
        name: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("degenerate channel: {0}")]
    DegenerateChannel(&'static str),
    #[error("beamformer power {power} exceeds budget {budget}")]
    PowerExceeded { power: f64, budget: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Scalar configuration of a scenario. Powers and noise variances are in
/// linear units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    pub p_p: f64,
    pub p_s_max: f64,
    pub sigma2_p: f64,
    pub sigma2_s: f64,
    pub sigma2_e: f64,
    /// Required secondary rate as a fraction of its maximum.
    pub alpha: f64,
    pub n_t: usize,
}

impl SystemParams {
    pub fn new(
        p_p: f64,
        p_s_max: f64,
        sigma2_p: f64,
        sigma2_s: f64,
        sigma2_e: f64,
        alpha: f64,
        n_t: usize,
    ) -> Result<Self, ModelError> {
        let p = SystemParams {
            p_p,
            p_s_max,
            sigma2_p,
            sigma2_s,
            sigma2_e,
            alpha,
            n_t,
        };
        p.validate()?;
        Ok(p)
    }

    /// Unit noise everywhere and `P_p = P_s,max = 10^(snr_db / 10)`.
    pub fn from_snr_db(snr_db: f64, alpha: f64, n_t: usize) -> Result<Self, ModelError> {
        let snr = 10f64.powf(snr_db / 10.0);
        Self::new(snr, snr, 1.0, 1.0, 1.0, alpha, n_t)
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self, ModelError> {
        SystemParams { alpha, ..self }.validate_into()
    }

    fn validate_into(self) -> Result<Self, ModelError> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        fn nonneg(name: &'static str, x: f64) -> Result<(), ModelError> {
            if !x.is_finite() || x < 0.0 {
                return Err(ModelError::InvalidParam {
                    name,
                    reason: format!("{x} is not a finite nonnegative value"),
                });
            }
            Ok(())
        }
        fn positive(name: &'static str, x: f64) -> Result<(), ModelError> {
            if !x.is_finite() || x <= 0.0 {
                return Err(ModelError::InvalidParam {
                    name,
                    reason: format!("{x} is not a finite positive value"),
                });
            }
            Ok(())
        }
        nonneg("p_p", self.p_p)?;
        nonneg("p_s_max", self.p_s_max)?;
        positive("sigma2_p", self.sigma2_p)?;
        positive("sigma2_s", self.sigma2_s)?;
        positive("sigma2_e", self.sigma2_e)?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ModelError::InvalidParam {
                name: "alpha",
                reason: format!("{} is outside [0, 1]", self.alpha),
            });
        }
        if self.n_t < 2 {
            return Err(ModelError::InvalidParam {
                name: "n_t",
                reason: format!("{} antennas, at least 2 required", self.n_t),
            });
        }
        Ok(())
    }
}

/// One realization of the six channels.
///
/// Scalars: primary transmitter to primary receiver (`h_pp`), eavesdropper
/// (`h_pe`) and secondary receiver (`h_ps`). Vectors: secondary transmitter
/// to primary receiver (`h_sp`), eavesdropper (`h_se`) and secondary
/// receiver (`h_ss`).
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    pub h_pp: Complex64,
    pub h_pe: Complex64,
    pub h_ps: Complex64,
    pub h_sp: ComplexVec,
    pub h_se: ComplexVec,
    pub h_ss: ComplexVec,
}

impl ChannelSet {
    pub fn n_t(&self) -> usize {
        self.h_ss.len()
    }

    pub fn validate(&self, n_t: usize) -> Result<(), ModelError> {
        for (name, v) in [("h_sp", &self.h_sp), ("h_se", &self.h_se), ("h_ss", &self.h_ss)] {
            if v.len() != n_t {
                return Err(ModelError::ChannelLength {
                    name,
                    got: v.len(),
                    expected: n_t,
                });
            }
        }
        for (name, z) in [("h_pp", self.h_pp), ("h_pe", self.h_pe), ("h_ps", self.h_ps)] {
            if !z.is_finite() {
                return Err(ModelError::InvalidParam {
                    name,
                    reason: "non-finite channel coefficient".into(),
                });
            }
        }
        Ok(())
    }

    /// No vector channel is zero and no two are collinear at `tol`.
    pub fn is_general_position(&self, tol: f64) -> bool {
        let vs = [&self.h_sp, &self.h_se, &self.h_ss];
        if vs.iter().any(|v| v.is_zero()) {
            return false;
        }
        for i in 0..3 {
            for j in (i + 1)..3 {
                let pair = [vs[i].clone(), vs[j].clone()];
                match numerics::orthonormal_span_basis(&pair, tol) {
                    Ok(b) if b.len() == 2 => {}
                    _ => return false,
                }
            }
        }
        true
    }
}

/// Secondary transmit beamformer.
#[derive(Clone, Debug, PartialEq)]
pub struct Beamformer {
    w: ComplexVec,
}

impl Beamformer {
    pub fn new(w: ComplexVec, p_s_max: f64) -> Result<Self, ModelError> {
        let power = w.norm_sqr();
        if power > p_s_max + POWER_SLACK {
            return Err(ModelError::PowerExceeded {
                power,
                budget: p_s_max,
            });
        }
        Ok(Beamformer { w })
    }

    /// Construction without the budget check, for vectors already scaled to
    /// an admissible power.
    pub(crate) fn from_scaled(w: ComplexVec) -> Self {
        Beamformer { w }
    }

    pub fn zero(n_t: usize) -> Self {
        Beamformer {
            w: ComplexVec::zeros(n_t),
        }
    }

    pub fn vector(&self) -> &ComplexVec {
        &self.w
    }

    pub fn power(&self) -> f64 {
        self.w.norm_sqr()
    }

    /// `|w* h|²`.
    pub fn gain(&self, h: &ComplexVec) -> f64 {
        numerics::dot(self.w.as_slice(), h.as_slice()).norm_sqr()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TrialSeed {
    pub master_seed: u64,
    pub trial_index: u64,
}

impl TrialSeed {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        TrialSeed {
            master_seed,
            trial_index,
        }
    }

    fn stream_key(&self, redraw: u32) -> u64 {
        splitmix64(
            self.master_seed
                ^ splitmix64(self.trial_index.wrapping_add(splitmix64(u64::from(redraw)))),
        )
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent CN(0, 1) draws for all six channels.
///
/// Each channel reads from its own ChaCha stream, so the vectors for a
/// smaller antenna count are prefixes of those for a larger one with the same
/// seed, and the scalar channels do not depend on `n_t` at all.
pub fn sample_channels(params: &SystemParams, seed: TrialSeed) -> ChannelSet {
    draw_channels(params.n_t, seed, 0)
}

fn draw_channels(n_t: usize, seed: TrialSeed, redraw: u32) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.stream_key(redraw));
    let mut draw = |stream: u64, n: usize| -> Vec<Complex64> {
        rng.set_stream(stream);
        rng.set_word_pos(0);
        (0..n)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect()
    };
    let h_pp = draw(0, 1)[0];
    let h_pe = draw(1, 1)[0];
    let h_ps = draw(2, 1)[0];
    let h_sp = draw(3, n_t);
    let h_se = draw(4, n_t);
    let h_ss = draw(5, n_t);
    ChannelSet {
        h_pp,
        h_pe,
        h_ps,
        h_sp: ComplexVec::new(h_sp).expect("finite draws"),
        h_se: ComplexVec::new(h_se).expect("finite draws"),
        h_ss: ComplexVec::new(h_ss).expect("finite draws"),
    }
}

/// Like [`sample_channels`], but redraws until the vector channels are in
/// general position. Returns the channels and the number of redraws.
pub fn sample_general_position(
    params: &SystemParams,
    seed: TrialSeed,
) -> Result<(ChannelSet, u32), ModelError> {
    for redraw in 0..MAX_REDRAWS {
        let ch = draw_channels(params.n_t, seed, redraw);
        if ch.is_general_position(COLLINEAR_TOL) {
            return Ok((ch, redraw));
        }
    }
    Err(ModelError::DegenerateChannel(
        "no general-position draw within the redraw limit",
    ))
}

/// Maximum ratio transmission toward the secondary receiver at full power.
pub fn mrt_beamformer(ch: &ChannelSet, params: &SystemParams) -> Result<Beamformer, ModelError> {
    let n = ch.h_ss.norm();
    if n == 0.0 {
        return Err(ModelError::DegenerateChannel("h_ss is zero"));
    }
    Ok(Beamformer::from_scaled(ch.h_ss.scaled(params.p_s_max.sqrt() / n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn params(n_t: usize) -> SystemParams {
        SystemParams::from_snr_db(10.0, 0.5, n_t).unwrap()
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = params(3);
        let a = sample_channels(&p, TrialSeed::new(7, 11));
        let b = sample_channels(&p, TrialSeed::new(7, 11));
        assert_eq!(a, b);
    }

    #[test]
    fn trial_streams_differ() {
        let p = params(3);
        let a = sample_channels(&p, TrialSeed::new(7, 0));
        let b = sample_channels(&p, TrialSeed::new(7, 1));
        assert_ne!(a, b);
    }

    #[test]
    fn antenna_count_nests_channels() {
        let a = sample_channels(&params(2), TrialSeed::new(3, 5));
        let b = sample_channels(&params(5), TrialSeed::new(3, 5));
        assert_eq!(a.h_pp, b.h_pp);
        assert_eq!(a.h_sp.as_slice(), &b.h_sp.as_slice()[..2]);
        assert_eq!(a.h_ss.as_slice(), &b.h_ss.as_slice()[..2]);
    }

    #[test]
    fn channel_power_is_unit_on_average() {
        let p = params(2);
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|i| sample_channels(&p, TrialSeed::new(99, i)).h_pp.norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((0.95..=1.05).contains(&mean), "mean |h_pp|^2 = {mean}");
    }

    #[test]
    fn params_are_validated() {
        assert!(SystemParams::from_snr_db(0.0, 1.5, 2).is_err());
        assert!(SystemParams::from_snr_db(0.0, 0.5, 1).is_err());
        assert!(SystemParams::new(1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 2).is_err());
        assert!(SystemParams::new(f64::NAN, 1.0, 1.0, 1.0, 1.0, 0.0, 2).is_err());
        assert!(params(2).with_alpha(-0.1).is_err());
    }

    #[test]
    fn mrt_examples() {
        let mut ch = sample_channels(&params(2), TrialSeed::new(1, 1));
        ch.h_ss = ComplexVec::from_real(&[1.0, 0.0]).unwrap();
        let p = SystemParams::new(1.0, 4.0, 1.0, 1.0, 1.0, 0.0, 2).unwrap();
        let w = mrt_beamformer(&ch, &p).unwrap();
        assert!((w.vector()[0] - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert_eq!(w.vector()[1], Complex64::new(0.0, 0.0));

        ch.h_ss = ComplexVec::zeros(2);
        assert!(matches!(
            mrt_beamformer(&ch, &p),
            Err(ModelError::DegenerateChannel(_))
        ));
    }

    #[test]
    fn mrt_beats_random_beamformers() {
        let p = params(4);
        let ch = sample_channels(&p, TrialSeed::new(5, 0));
        let mrt = mrt_beamformer(&ch, &p).unwrap();
        assert!((mrt.power() - p.p_s_max).abs() < 1e-9);
        let best = mrt.gain(&ch.h_ss);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10_000 {
            let raw: Vec<Complex64> = (0..4)
                .map(|_| {
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                })
                .collect();
            let v = ComplexVec::new(raw).unwrap();
            let scale = (p.p_s_max * rng.random::<f64>()).sqrt() / v.norm();
            let w = Beamformer::new(v.scaled(scale), p.p_s_max).unwrap();
            assert!(w.gain(&ch.h_ss) <= best + 1e-12);
        }
    }

    #[test]
    fn beamformer_budget_is_enforced() {
        let w = ComplexVec::from_real(&[2.0, 0.0]).unwrap();
        assert!(Beamformer::new(w.clone(), 4.0).is_ok());
        assert!(Beamformer::new(w, 3.9).is_err());
    }

    #[test]
    fn general_position_check() {
        let p = params(2);
        let mut ch = sample_channels(&p, TrialSeed::new(2, 2));
        assert!(ch.is_general_position(COLLINEAR_TOL));
        ch.h_se = ch.h_sp.scaled_by(Complex64::new(0.0, 2.0));
        assert!(!ch.is_general_position(COLLINEAR_TOL));
    }
}
