//! Achievable rates in bits per channel use.
//!
//! Every rate depends on the beamformer only through the three power gains
//! `|w* h_sp|²`, `|w* h_se|²` and `|w* h_ss|²`, so the `*_from_gains`
//! methods on [`LinkBudget`] are the primitives; the free functions taking a
//! [`Beamformer`] are thin wrappers.

use std::f64::consts::LN_2;
use std::fmt;

use crate::model::{Beamformer, ChannelSet, SystemParams};
use crate::pgr::{power_gains, PowerGains};

/// `log2(1 + x)`.
#[inline]
pub fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

/// Decoding regime at a joint-decoding eavesdropper, named after which
/// constraint on the secondary rate is active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    /// `R_se^JD <= R_ss`: the eavesdropper cannot decode the secondary
    /// message, secrecy as in the single-user case.
    EveDecodesSecondary,
    /// `R_se^SD <= R_ss < R_se^JD`: the MAC sum-rate constraint binds.
    MacSumLimited,
    /// `R_ss < R_se^SD`: the eavesdropper strips the secondary signal.
    EveIgnoresSecondary,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::EveDecodesSecondary => "EVE_DECODES_SECONDARY",
            Regime::MacSumLimited => "MAC_SUM_LIMITED",
            Regime::EveIgnoresSecondary => "EVE_IGNORES_SECONDARY",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Rates at the eavesdropper and primary receiver for a joint-decoding
/// eavesdropper.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JdRateBundle {
    pub r_pe_jd: f64,
    pub r_se_jd: f64,
    pub r_e_mac: f64,
    pub r_pe_sd: f64,
    pub r_se_sd: f64,
    pub r_pp_sd: f64,
}

impl JdRateBundle {
    /// Largest violation of `r_pe_sd + r_se_jd = r_e_mac = r_pe_jd + r_se_sd`.
    pub fn chain_residual(&self) -> f64 {
        let a = (self.r_pe_sd + self.r_se_jd - self.r_e_mac).abs();
        let b = (self.r_pe_jd + self.r_se_sd - self.r_e_mac).abs();
        a.max(b)
    }
}

/// Received signal powers that do not depend on the beamformer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkBudget {
    /// `|h_pp|² P_p`
    pub pp: f64,
    /// `|h_pe|² P_p`
    pub pe: f64,
    /// `|h_ps|² P_p`
    pub ps: f64,
    pub sigma2_p: f64,
    pub sigma2_s: f64,
    pub sigma2_e: f64,
}

impl LinkBudget {
    pub fn new(ch: &ChannelSet, p: &SystemParams) -> Self {
        LinkBudget {
            pp: ch.h_pp.norm_sqr() * p.p_p,
            pe: ch.h_pe.norm_sqr() * p.p_p,
            ps: ch.h_ps.norm_sqr() * p.p_p,
            sigma2_p: p.sigma2_p,
            sigma2_s: p.sigma2_s,
            sigma2_e: p.sigma2_e,
        }
    }

    pub fn secondary_from_gains(&self, g: &PowerGains) -> f64 {
        log2_1p(g.ss / (self.sigma2_s + self.ps))
    }

    pub fn secrecy_sd_from_gains(&self, g: &PowerGains) -> f64 {
        let main = log2_1p(self.pp / (self.sigma2_p + g.sp));
        let eve = log2_1p(self.pe / (self.sigma2_e + g.se));
        (main - eve).max(0.0)
    }

    pub fn bundle_from_gains(&self, g: &PowerGains) -> JdRateBundle {
        JdRateBundle {
            r_pe_jd: log2_1p(self.pe / self.sigma2_e),
            r_se_jd: log2_1p(g.se / self.sigma2_e),
            r_e_mac: log2_1p((self.pe + g.se) / self.sigma2_e),
            r_pe_sd: log2_1p(self.pe / (self.sigma2_e + g.se)),
            r_se_sd: log2_1p(g.se / (self.sigma2_e + self.pe)),
            r_pp_sd: log2_1p(self.pp / (self.sigma2_p + g.sp)),
        }
    }

    pub fn secrecy_jd_from_gains(&self, g: &PowerGains) -> (f64, Regime) {
        secrecy_from_bundle(&self.bundle_from_gains(g), self.secondary_from_gains(g))
    }

    pub fn no_leasing(&self) -> f64 {
        self.secrecy_sd_from_gains(&PowerGains::default())
    }

    pub fn peaceful(&self) -> f64 {
        log2_1p(self.pp / self.sigma2_p)
    }
}

/// Secrecy rate against a joint-decoding eavesdropper given the rate bundle
/// and the secondary rate. Boundaries follow the printed regime conditions
/// (closed below, open above); the values agree there.
pub fn secrecy_from_bundle(b: &JdRateBundle, r_ss: f64) -> (f64, Regime) {
    let (value, regime) = if b.r_se_jd <= r_ss {
        (b.r_pp_sd - b.r_pe_sd, Regime::EveDecodesSecondary)
    } else if b.r_se_sd <= r_ss {
        (b.r_pp_sd - b.r_e_mac + r_ss, Regime::MacSumLimited)
    } else {
        (b.r_pp_sd - b.r_pe_jd, Regime::EveIgnoresSecondary)
    };
    (value.max(0.0), regime)
}

pub fn secondary_rate(w: &Beamformer, ch: &ChannelSet, p: &SystemParams) -> f64 {
    LinkBudget::new(ch, p).secondary_from_gains(&power_gains(w, ch))
}

/// Secondary rate under maximum ratio transmission at full power.
pub fn r_s_max(ch: &ChannelSet, p: &SystemParams) -> f64 {
    let lb = LinkBudget::new(ch, p);
    log2_1p(p.p_s_max * ch.h_ss.norm_sqr() / (lb.sigma2_s + lb.ps))
}

/// The secondary QoS threshold `alpha * r_s_max`.
pub fn r_min(ch: &ChannelSet, p: &SystemParams) -> f64 {
    p.alpha * r_s_max(ch, p)
}

/// Primary secrecy rate when the eavesdropper treats the secondary signal as
/// noise.
pub fn secrecy_rate_sd(w: &Beamformer, ch: &ChannelSet, p: &SystemParams) -> f64 {
    LinkBudget::new(ch, p).secrecy_sd_from_gains(&power_gains(w, ch))
}

pub fn jd_rate_bundle(w: &Beamformer, ch: &ChannelSet, p: &SystemParams) -> JdRateBundle {
    LinkBudget::new(ch, p).bundle_from_gains(&power_gains(w, ch))
}

/// Primary secrecy rate when the eavesdropper may jointly decode.
pub fn secrecy_rate_jd(w: &Beamformer, ch: &ChannelSet, p: &SystemParams) -> (f64, Regime) {
    LinkBudget::new(ch, p).secrecy_jd_from_gains(&power_gains(w, ch))
}

/// Secrecy rate with the secondary transmitter silent.
pub fn no_leasing_secrecy(ch: &ChannelSet, p: &SystemParams) -> f64 {
    LinkBudget::new(ch, p).no_leasing()
}

/// Primary rate with neither eavesdropper nor interference.
pub fn peaceful_rate(ch: &ChannelSet, p: &SystemParams) -> f64 {
    LinkBudget::new(ch, p).peaceful()
}
