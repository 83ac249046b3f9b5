//! Direct search over beamformers, independent of the boundary
//! parametrization.
//!
//! For two antennas every beamformer at power `P` is, up to a common phase,
//! `sqrt(P) [cos(theta), sin(theta) e^{i phi}]` with `theta` in `[0, pi/2]`
//! and `phi` in `[0, 2 pi)`. Every gain is then `a + b cos(2 theta) +
//! d sin(2 theta)`, so the curves where the QoS constraint or a regime
//! boundary is active can be solved for `theta` in closed form. The oracle
//! scans the grid and those curves (and, for the joint objective, power),
//! then polishes the best points. Larger arrays fall back to random unit
//! directions.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::model::{mrt_beamformer, Beamformer, ChannelSet, SystemParams};
use crate::numerics::ComplexVec;
use crate::pgr::{power_gains, PowerGains};
use crate::rates::{self, LinkBudget, Regime};

use super::{Candidate, OptResult};

const SAMPLING_SEED: u64 = 0x0A0C_1E5E_ED5E_ED00;
/// Grid points polished per search.
const POLISH_SEEDS: usize = 4;
const POLISH_MIN_STEP: f64 = 1e-10;
const POLISH_MAX_MOVES: usize = 20_000;
const GOLDEN_STEPS: usize = 60;
/// Curves are scanned this many times more finely in `phi` than the
/// interior grid.
const CURVE_PHI_FACTOR: usize = 4;
const SLACK: f64 = 1e-9;

/// Oracle resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleGrid {
    /// `theta` intervals over `[0, pi/2]` (endpoints included).
    pub n_theta: usize,
    /// `phi` points over `[0, 2 pi)`.
    pub n_phi: usize,
    /// Power points `P_max j / (n_power - 1)`; joint objective only.
    pub n_power: usize,
    /// Random directions for three or more antennas.
    pub samples: usize,
    /// Local polish of the best grid points (two antennas).
    pub polish: bool,
}

impl Default for OracleGrid {
    fn default() -> Self {
        OracleGrid {
            n_theta: 64,
            n_phi: 256,
            n_power: 64,
            samples: 1_000_000,
            polish: true,
        }
    }
}

impl OracleGrid {
    /// Every axis doubled.
    pub fn refined(&self) -> Self {
        OracleGrid {
            n_theta: 2 * self.n_theta,
            n_phi: 2 * self.n_phi,
            n_power: 2 * self.n_power - 1,
            samples: 2 * self.samples,
            polish: self.polish,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Target {
    SingleUser,
    Joint,
}

/// Real-valued quadratic form `u* M u` of a 2x2 Hermitian `M` at
/// `u = [cos(theta), sin(theta) e^{i phi}]`, written as
/// `a + b cos(2 theta) + d(phi) sin(2 theta)`.
#[derive(Clone, Copy, Debug)]
struct Quad {
    m11: f64,
    m22: f64,
    m12: Complex64,
}

impl Quad {
    fn outer(h: &ComplexVec, scale: f64) -> Self {
        Quad {
            m11: scale * h[0].norm_sqr(),
            m22: scale * h[1].norm_sqr(),
            m12: h[0] * h[1].conj() * scale,
        }
    }

    fn identity(scale: f64) -> Self {
        Quad {
            m11: scale,
            m22: scale,
            m12: Complex64::new(0.0, 0.0),
        }
    }

    fn plus(self, o: Quad) -> Self {
        Quad {
            m11: self.m11 + o.m11,
            m22: self.m22 + o.m22,
            m12: self.m12 + o.m12,
        }
    }

    fn coeffs(&self, phi: f64) -> (f64, f64, f64) {
        let d = (self.m12 * Complex64::from_polar(1.0, phi)).re;
        (0.5 * (self.m11 + self.m22), 0.5 * (self.m11 - self.m22), d)
    }

    fn at(&self, theta: f64, phi: f64) -> f64 {
        let (a, b, d) = self.coeffs(phi);
        a + b * (2.0 * theta).cos() + d * (2.0 * theta).sin()
    }

    /// The root of `u* M u = 0` on branch `sign` (±1), if it lies in
    /// `[0, pi/2]`.
    fn root(&self, phi: f64, sign: f64) -> Option<f64> {
        let (a, b, d) = self.coeffs(phi);
        let r = b.hypot(d);
        if r == 0.0 || a.abs() > r {
            return None;
        }
        let two_theta = (d.atan2(b) + sign * (-a / r).acos()).rem_euclid(TAU);
        (two_theta <= PI).then_some(0.5 * two_theta)
    }
}

#[derive(Clone, Copy, Debug)]
struct Point {
    theta: f64,
    phi: f64,
    power: f64,
    secrecy: f64,
    secondary: f64,
}

fn better(a: &Point, b: &Point) -> bool {
    a.secrecy > b.secrecy || (a.secrecy == b.secrecy && a.secondary > b.secondary)
}

fn angular_vector(theta: f64, phi: f64, power: f64) -> ComplexVec {
    let s = power.sqrt();
    ComplexVec::new(vec![
        Complex64::new(s * theta.cos(), 0.0),
        Complex64::from_polar(s * theta.sin(), phi),
    ])
    .expect("finite entries")
}

struct Scorer<'a> {
    ch: &'a ChannelSet,
    p: &'a SystemParams,
    lb: LinkBudget,
    r_min: f64,
    /// Smallest `|w* h_ss|²` meeting the QoS target.
    gamma: f64,
    target: Target,
    n_power: usize,
}

impl<'a> Scorer<'a> {
    fn new(ch: &'a ChannelSet, p: &'a SystemParams, grid: &OracleGrid, target: Target) -> Self {
        let r_min = rates::r_min(ch, p);
        let noise_s = p.sigma2_s + ch.h_ps.norm_sqr() * p.p_p;
        Scorer {
            ch,
            p,
            lb: LinkBudget::new(ch, p),
            r_min,
            gamma: noise_s * (r_min.exp2() - 1.0),
            target,
            n_power: grid.n_power.max(2),
        }
    }

    fn rate_pair(&self, g: &PowerGains) -> Option<(f64, f64)> {
        let secondary = self.lb.secondary_from_gains(g);
        if secondary < self.r_min - SLACK {
            return None;
        }
        let secrecy = match self.target {
            Target::SingleUser => self.lb.secrecy_sd_from_gains(g),
            Target::Joint => self.lb.secrecy_jd_from_gains(g).0,
        };
        Some((secrecy, secondary))
    }

    /// Best power for a unit direction with gains `unit`: full power for the
    /// single-user objective; for the joint objective a grid over the
    /// feasible power interval, optionally polished by golden section.
    fn best_power(&self, unit: PowerGains, exact: bool) -> Option<(f64, f64, f64)> {
        let p_max = self.p.p_s_max;
        let at = |power: f64| {
            self.rate_pair(&unit.scaled(power))
                .map(|(sec, snd)| (power, sec, snd))
        };
        if self.target == Target::SingleUser {
            return at(p_max);
        }
        let p_lo = if self.gamma > 0.0 {
            (self.gamma / unit.ss).min(p_max)
        } else {
            0.0
        };
        let n = self.n_power;
        let powers: Vec<f64> = (0..n)
            .map(|j| p_lo + (p_max - p_lo) * j as f64 / (n - 1) as f64)
            .collect();
        let mut best: Option<(usize, (f64, f64, f64))> = None;
        for (j, &pw) in powers.iter().enumerate() {
            if let Some(v) = at(pw) {
                if best.is_none_or(|(_, b)| v.1 > b.1 || (v.1 == b.1 && v.2 > b.2)) {
                    best = Some((j, v));
                }
            }
        }
        let (j, mut v) = best?;
        if exact && p_max > p_lo {
            let lo = powers[j.saturating_sub(1)];
            let hi = powers[(j + 1).min(n - 1)];
            if let Some(g) = golden_max(lo, hi, |pw| at(pw).map_or(f64::NEG_INFINITY, |t| t.1)) {
                if let Some(c) = at(g) {
                    if c.1 > v.1 {
                        v = c;
                    }
                }
            }
        }
        Some(v)
    }

    fn direction(&self, quads: &[Quad; 3], theta: f64, phi: f64, exact: bool) -> Option<Point> {
        let unit = PowerGains {
            sp: quads[0].at(theta, phi).max(0.0),
            se: quads[1].at(theta, phi).max(0.0),
            ss: quads[2].at(theta, phi).max(0.0),
        };
        self.best_power(unit, exact).map(|(power, secrecy, secondary)| Point {
            theta,
            phi,
            power,
            secrecy,
            secondary,
        })
    }

    fn finish(&self, w: Beamformer) -> OptResult {
        let (secrecy_bits, regime): (f64, Option<Regime>) = match self.target {
            Target::SingleUser => (rates::secrecy_rate_sd(&w, self.ch, self.p), None),
            Target::Joint => {
                let (v, r) = rates::secrecy_rate_jd(&w, self.ch, self.p);
                (v, Some(r))
            }
        };
        OptResult {
            secondary_bits: rates::secondary_rate(&w, self.ch, self.p),
            power: w.power(),
            w,
            secrecy_bits,
            regime,
            mu: None,
            candidate: Candidate::Exhaustive,
            feasible: true,
        }
    }
}

/// Golden-section search for the maximizer of `f` on `[lo, hi]`.
fn golden_max(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> Option<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    if hi <= lo {
        return None;
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_STEPS {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    Some(if f1 >= f2 { x1 } else { x2 })
}

/// Direct maximization of the single-user-decoding secrecy rate subject to
/// the QoS constraint, at full power.
pub fn brute_force_sd(ch: &ChannelSet, p: &SystemParams, grid: OracleGrid) -> OptResult {
    run(ch, p, grid, Target::SingleUser)
}

/// Direct maximization of the joint-decoding secrecy rate over direction and
/// power.
pub fn brute_force_jd(ch: &ChannelSet, p: &SystemParams, grid: OracleGrid) -> OptResult {
    run(ch, p, grid, Target::Joint)
}

fn run(ch: &ChannelSet, p: &SystemParams, grid: OracleGrid, target: Target) -> OptResult {
    let scorer = Scorer::new(ch, p, &grid, target);
    let mrt = mrt_beamformer(ch, p).expect("nonzero h_ss");
    let (mrt_secrecy, mrt_secondary) = scorer
        .rate_pair(&power_gains(&mrt, ch))
        .expect("MRT meets the QoS target");
    let mrt_point = Point {
        theta: f64::NAN,
        phi: f64::NAN,
        power: p.p_s_max,
        secrecy: mrt_secrecy,
        secondary: mrt_secondary,
    };

    let best = if ch.n_t() == 2 {
        search_two_antennas(&scorer, &grid)
    } else {
        return sample_directions(&scorer, grid.samples, mrt, mrt_point);
    };
    match best {
        Some(b) if better(&b, &mrt_point) => {
            scorer.finish(Beamformer::from_scaled(angular_vector(b.theta, b.phi, b.power)))
        }
        _ => scorer.finish(mrt),
    }
}

/// The maximum lies either where no constraint or rate kink is active, or
/// on one of the curves in direction space where one is. Each case is
/// scanned on a grid and polished: a 2D compass search for the interior and
/// a 1D search in `phi` along each curve, with `theta` solved exactly.
fn search_two_antennas(s: &Scorer<'_>, grid: &OracleGrid) -> Option<Point> {
    let ch = s.ch;
    let p = s.p;
    let quads = [
        Quad::outer(&ch.h_sp, 1.0),
        Quad::outer(&ch.h_se, 1.0),
        Quad::outer(&ch.h_ss, 1.0),
    ];
    let noise_s = p.sigma2_s + ch.h_ps.norm_sqr() * p.p_p;
    let pe = ch.h_pe.norm_sqr() * p.p_p;
    // Full-power QoS boundary, then the two regime boundaries, which are
    // ratio conditions on direction alone.
    let mut curves = vec![Quad::outer(&ch.h_ss, p.p_s_max).plus(Quad::identity(-s.gamma))];
    if s.target == Target::Joint {
        curves.push(Quad::outer(&ch.h_ss, 1.0 / noise_s).plus(Quad::outer(&ch.h_se, -1.0 / p.sigma2_e)));
        curves.push(
            Quad::outer(&ch.h_ss, 1.0 / noise_s).plus(Quad::outer(&ch.h_se, -1.0 / (p.sigma2_e + pe))),
        );
    }

    let n_theta = grid.n_theta.max(1);
    let n_phi = grid.n_phi.max(1);
    let h_theta = FRAC_PI_2 / n_theta as f64;
    let h_phi = TAU / n_phi as f64;

    let mut best: Option<Point> = None;
    let mut consider = |pt: Point| {
        if best.as_ref().is_none_or(|b| better(&pt, b)) {
            best = Some(pt);
        }
    };

    let mut top = Vec::new();
    for i in 0..=n_theta {
        let theta = h_theta * i as f64;
        for k in 0..n_phi {
            if let Some(pt) = s.direction(&quads, theta, h_phi * k as f64, false) {
                keep_top(&mut top, pt);
            }
        }
    }
    for seed in top {
        consider(polish_interior(s, &quads, seed, [h_theta, h_phi], grid.polish));
    }

    let n_curve = CURVE_PHI_FACTOR * n_phi;
    let h_curve = TAU / n_curve as f64;
    for curve in &curves {
        for sign in [-1.0, 1.0] {
            let mut top = Vec::new();
            for k in 0..n_curve {
                let phi = h_curve * k as f64;
                if let Some(theta) = curve.root(phi, sign) {
                    if let Some(pt) = s.direction(&quads, theta, phi, false) {
                        keep_top(&mut top, pt);
                    }
                }
            }
            for seed in top {
                consider(polish_curve(s, &quads, curve, sign, seed, h_curve, grid.polish));
            }
        }
    }
    best
}

fn keep_top(top: &mut Vec<Point>, pt: Point) {
    if top.len() < POLISH_SEEDS {
        top.push(pt);
        return;
    }
    let (worst, _) = top
        .iter()
        .enumerate()
        .reduce(|a, b| if better(a.1, b.1) { b } else { a })
        .expect("nonempty");
    if better(&pt, &top[worst]) {
        top[worst] = pt;
    }
}

/// Compass search over `(theta, phi)`, halving the step whenever no axis
/// move strictly improves the secrecy rate.
fn polish_interior(s: &Scorer<'_>, quads: &[Quad; 3], seed: Point, h0: [f64; 2], polish: bool) -> Point {
    let mut best = s.direction(quads, seed.theta, seed.phi, true).unwrap_or(seed);
    if !polish {
        return best;
    }
    let mut h = h0;
    for _ in 0..POLISH_MAX_MOVES {
        if h[0] <= POLISH_MIN_STEP {
            break;
        }
        let mut moved = false;
        for axis in 0..2 {
            for sign in [-1.0, 1.0] {
                let mut c = [best.theta, best.phi];
                c[axis] += sign * h[axis];
                c[0] = c[0].clamp(0.0, FRAC_PI_2);
                if let Some(pt) = s.direction(quads, c[0], c[1], true) {
                    // Strict gain only: the secondary-rate tie-break would
                    // creep along plateaus.
                    if pt.secrecy > best.secrecy {
                        best = pt;
                        moved = true;
                    }
                }
            }
        }
        if !moved {
            h = [h[0] * 0.5, h[1] * 0.5];
        }
    }
    best
}

fn polish_curve(
    s: &Scorer<'_>,
    quads: &[Quad; 3],
    curve: &Quad,
    sign: f64,
    seed: Point,
    h0: f64,
    polish: bool,
) -> Point {
    let at = |phi: f64| {
        curve
            .root(phi, sign)
            .and_then(|theta| s.direction(quads, theta, phi, true))
    };
    let mut best = at(seed.phi).unwrap_or(seed);
    if !polish {
        return best;
    }
    let mut h = h0;
    for _ in 0..POLISH_MAX_MOVES {
        if h <= POLISH_MIN_STEP {
            break;
        }
        let mut moved = false;
        for step in [-h, h] {
            if let Some(pt) = at(best.phi + step) {
                if pt.secrecy > best.secrecy {
                    best = pt;
                    moved = true;
                }
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    best
}

fn sample_directions(s: &Scorer<'_>, samples: usize, mrt: Beamformer, mrt_point: Point) -> OptResult {
    let n = s.ch.n_t();
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLING_SEED);
    let mut best: Option<(Point, ComplexVec)> = None;
    for _ in 0..samples {
        let v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let unit = ComplexVec::new(v).expect("finite draws").scaled(1.0 / norm);
        let gains = power_gains(&Beamformer::from_scaled(unit.clone()), s.ch);
        if let Some((power, secrecy, secondary)) = s.best_power(gains, false) {
            let pt = Point {
                theta: f64::NAN,
                phi: f64::NAN,
                power,
                secrecy,
                secondary,
            };
            if best.as_ref().is_none_or(|(b, _)| better(&pt, b)) {
                best = Some((pt, unit));
            }
        }
    }
    match best {
        Some((pt, unit)) if better(&pt, &mrt_point) => {
            s.finish(Beamformer::from_scaled(unit.scaled(pt.power.sqrt())))
        }
        _ => s.finish(mrt),
    }
}
