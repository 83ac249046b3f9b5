//! Power gain region of the secondary transmitter toward its three receivers
//! and the beamformers that reach its outer boundary.
//!
//! For a direction `e` (one sign per receiver, `+1` for receivers whose gain
//! should grow and `-1` for those whose gain should shrink) and simplex
//! weights `mu`, the boundary beamformer is `sqrt(P) v_max(Z)` with
//! `Z = Σ mu_k e_k h_k h_k*`. The admissible power follows the sign of
//! `lambda_max(Z)`, see [`admissible_powers`].

use std::fmt::Write as _;
use std::io::{self, Write};

use thiserror::Error;

use crate::model::{Beamformer, ChannelSet};
use crate::numerics::{ComplexVec, Eigenpair, LowRankHermitian, NumericsError, RANK_TOL};

/// Interior points of the power grid used when any power in `[0, P_s,max]`
/// reaches the boundary.
pub const INTERVAL_POWER_STEPS: usize = 64;

/// `|lambda_max|` at or below this is treated as zero by the power rule.
pub const LAMBDA_ZERO_TOL: f64 = 1e-12;

/// Number of receivers.
pub const RECEIVERS: usize = 3;

pub const BOUNDARY_CSV_HEADER: &str =
    "mu1,mu2,mu3,e1,e2,e3,power,gain_sp,gain_se,gain_ss,lambda_max";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PgrError {
    #[error("invalid simplex weights: {0}")]
    InvalidWeights(String),
    #[error("direction signs must be -1 or +1 (0 marks an unused receiver), got {0:?}")]
    InvalidDirection([i8; 3]),
    #[error("weight count {got} does not match the {expected} receivers active in the direction")]
    Arity { expected: usize, got: usize },
    #[error("simplex dimension must be 2 or 3 and resolution at least 1 (dim {dim}, m {m})")]
    Lattice { dim: usize, m: usize },
    #[error("power must be finite and nonnegative, got {0}")]
    Power(f64),
    #[error("boundary csv line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// `(|w* h_sp|², |w* h_se|², |w* h_ss|²)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PowerGains {
    pub sp: f64,
    pub se: f64,
    pub ss: f64,
}

impl PowerGains {
    pub fn scaled(&self, power: f64) -> Self {
        PowerGains {
            sp: self.sp * power,
            se: self.se * power,
            ss: self.ss * power,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.sp, self.se, self.ss]
    }
}

pub fn power_gains(w: &Beamformer, ch: &ChannelSet) -> PowerGains {
    PowerGains {
        sp: w.gain(&ch.h_sp),
        se: w.gain(&ch.h_se),
        ss: w.gain(&ch.h_ss),
    }
}

fn unit_gains(v: &ComplexVec, ch: &ChannelSet) -> PowerGains {
    let d = |h: &ComplexVec| crate::numerics::dot(v.as_slice(), h.as_slice()).norm_sqr();
    PowerGains {
        sp: d(&ch.h_sp),
        se: d(&ch.h_se),
        ss: d(&ch.h_ss),
    }
}

/// Signs in (primary receiver, eavesdropper, secondary receiver) order.
/// A zero leaves that receiver out of `Z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Direction([i8; 3]);

impl Direction {
    /// Suppress the primary receiver, favor the eavesdropper and secondary.
    pub const E1: Direction = Direction([-1, 1, 1]);
    /// Suppress the primary receiver and the eavesdropper.
    pub const E2: Direction = Direction([-1, -1, 1]);
    /// Two-receiver set over `{h_sp, h_ss}`.
    pub const PRIMARY_SECONDARY: Direction = Direction([-1, 0, 1]);

    pub fn new(signs: [i8; 3]) -> Result<Self, PgrError> {
        if signs.iter().any(|s| !matches!(s, -1..=1)) || signs.iter().all(|&s| s == 0) {
            return Err(PgrError::InvalidDirection(signs));
        }
        Ok(Direction(signs))
    }

    pub fn signs(&self) -> [i8; 3] {
        self.0
    }

    /// Receivers with a nonzero sign, in receiver order.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..RECEIVERS).filter(|&k| self.0[k] != 0)
    }

    pub fn arity(&self) -> usize {
        self.active().count()
    }
}

/// Weights on the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(mu: Vec<f64>) -> Result<Self, PgrError> {
        if !(2..=3).contains(&mu.len()) {
            return Err(PgrError::InvalidWeights(format!(
                "expected 2 or 3 weights, got {}",
                mu.len()
            )));
        }
        if mu.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(PgrError::InvalidWeights(format!("{mu:?} has entries outside [0, 1]")));
        }
        let s: f64 = mu.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(PgrError::InvalidWeights(format!("{mu:?} sums to {s}")));
        }
        Ok(SimplexWeights(mu))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Lattice points `(i_1/m, ..., i_dim/m)` with nonnegative integers summing
/// to `m`, ordered lexicographically by the leading indices.
pub fn sample_simplex(dim: usize, m: usize) -> Result<Vec<SimplexWeights>, PgrError> {
    let mf = m as f64;
    match (dim, m) {
        (_, 0) => Err(PgrError::Lattice { dim, m }),
        (2, _) => Ok((0..=m)
            .map(|i| SimplexWeights(vec![i as f64 / mf, (m - i) as f64 / mf]))
            .collect()),
        (3, _) => {
            let mut out = Vec::with_capacity((m + 1) * (m + 2) / 2);
            for i in 0..=m {
                for j in 0..=(m - i) {
                    let k = m - i - j;
                    out.push(SimplexWeights(vec![
                        i as f64 / mf,
                        j as f64 / mf,
                        k as f64 / mf,
                    ]));
                }
            }
            Ok(out)
        }
        _ => Err(PgrError::Lattice { dim, m }),
    }
}

/// Powers that reach the boundary for a given `lambda_max(Z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PowerSet {
    /// Only full power.
    Full(f64),
    /// Any power in `[0, max]`.
    Interval(f64),
    /// Only the silent beamformer.
    Zero,
}

impl PowerSet {
    /// Full power, zero, or `0, max/(steps+1), ..., max` for an interval.
    pub fn grid(&self, steps: usize) -> Vec<f64> {
        match *self {
            PowerSet::Full(p) => vec![p],
            PowerSet::Zero => vec![0.0],
            PowerSet::Interval(p) => {
                let n = steps + 1;
                (0..=n).map(|j| p * j as f64 / n as f64).collect()
            }
        }
    }

    /// Largest admissible power.
    pub fn max(&self) -> f64 {
        match *self {
            PowerSet::Full(p) | PowerSet::Interval(p) => p,
            PowerSet::Zero => 0.0,
        }
    }
}

/// Boundary power rule for `n` transmit antennas and `k` receivers.
pub fn admissible_powers(lambda_max: f64, n: usize, k: usize, p_s_max: f64) -> PowerSet {
    if n >= k || lambda_max > LAMBDA_ZERO_TOL {
        PowerSet::Full(p_s_max)
    } else if lambda_max >= -LAMBDA_ZERO_TOL {
        PowerSet::Interval(p_s_max)
    } else {
        PowerSet::Zero
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub mu: SimplexWeights,
    pub e: Direction,
    pub power: f64,
    pub w: Beamformer,
    pub gains: PowerGains,
    pub lambda_max: f64,
    pub degenerate: bool,
}

/// The boundary beamformers of one direction for fixed channels. The span
/// of the active channels is factored once, so evaluating many weight
/// vectors is cheap.
#[derive(Clone, Debug)]
pub struct BoundaryFamily<'a> {
    ch: &'a ChannelSet,
    direction: Direction,
    signs: Vec<f64>,
    span: LowRankHermitian,
}

impl<'a> BoundaryFamily<'a> {
    pub fn new(ch: &'a ChannelSet, direction: Direction) -> Result<Self, PgrError> {
        let all = [&ch.h_sp, &ch.h_se, &ch.h_ss];
        let vectors: Vec<&ComplexVec> = direction.active().map(|k| all[k]).collect();
        let signs = direction
            .active()
            .map(|k| f64::from(direction.0[k]))
            .collect();
        let span = LowRankHermitian::new(&vectors, RANK_TOL)?;
        Ok(BoundaryFamily {
            ch,
            direction,
            signs,
            span,
        })
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn arity(&self) -> usize {
        self.signs.len()
    }

    pub fn channels(&self) -> &'a ChannelSet {
        self.ch
    }

    fn coeffs(&self, mu: &[f64]) -> [f64; 3] {
        let mut c = [0.0; 3];
        for (ci, (m, s)) in c.iter_mut().zip(mu.iter().zip(&self.signs)) {
            *ci = m * s;
        }
        c
    }

    /// `lambda_max(Z)` only.
    pub fn lambda_max(&self, mu: &[f64]) -> f64 {
        self.span.max_eigenvalue(&self.coeffs(mu)[..self.arity()])
    }

    /// Eigenpair of `Z(mu)` and the gains of the unit-power beamformer
    /// `v_max`. Weights are not validated.
    pub fn unit_direction(&self, mu: &[f64]) -> (Eigenpair, PowerGains) {
        debug_assert_eq!(mu.len(), self.arity());
        let ep = self.span.max_eigpair(&self.coeffs(mu)[..self.arity()]);
        let g = unit_gains(&ep.vector, self.ch);
        (ep, g)
    }

    pub fn point(&self, mu: &SimplexWeights, power: f64) -> Result<BoundaryPoint, PgrError> {
        if mu.len() != self.arity() {
            return Err(PgrError::Arity {
                expected: self.arity(),
                got: mu.len(),
            });
        }
        if !power.is_finite() || power < 0.0 {
            return Err(PgrError::Power(power));
        }
        let (ep, g) = self.unit_direction(mu.as_slice());
        Ok(BoundaryPoint {
            mu: mu.clone(),
            e: self.direction,
            power,
            w: Beamformer::from_scaled(ep.vector.scaled(power.sqrt())),
            gains: g.scaled(power),
            lambda_max: ep.value,
            degenerate: ep.degenerate,
        })
    }
}

/// `w = sqrt(power) v_max(Σ mu_k e_k h_k h_k*)` with its gains.
pub fn boundary_beamformer(
    mu: &SimplexWeights,
    e: Direction,
    ch: &ChannelSet,
    power: f64,
) -> Result<BoundaryPoint, PgrError> {
    BoundaryFamily::new(ch, e)?.point(mu, power)
}

/// Every lattice point of resolution `m`, each at the largest power the
/// power rule admits.
pub fn enumerate_boundary(
    ch: &ChannelSet,
    e: Direction,
    m: usize,
    p_s_max: f64,
) -> Result<Vec<BoundaryPoint>, PgrError> {
    let family = BoundaryFamily::new(ch, e)?;
    let n_t = ch.n_t();
    sample_simplex(family.arity(), m)?
        .iter()
        .map(|mu| {
            let lambda = family.lambda_max(mu.as_slice());
            let power = admissible_powers(lambda, n_t, family.arity(), p_s_max).max();
            family.point(mu, power)
        })
        .collect()
}

/// One parsed line of the boundary CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryRow {
    pub mu: [f64; 3],
    pub e: [i8; 3],
    pub power: f64,
    pub gains: [f64; 3],
    pub lambda_max: f64,
}

impl From<&BoundaryPoint> for BoundaryRow {
    /// Weights are spread into receiver order; an inactive receiver gets 0.
    fn from(p: &BoundaryPoint) -> Self {
        let mut mu = [0.0; 3];
        for (k, m) in p.e.active().zip(p.mu.as_slice()) {
            mu[k] = *m;
        }
        BoundaryRow {
            mu,
            e: p.e.signs(),
            power: p.power,
            gains: p.gains.as_array(),
            lambda_max: p.lambda_max,
        }
    }
}

pub fn export_boundary<W: Write>(points: &[BoundaryPoint], out: &mut W) -> io::Result<()> {
    let mut buf = String::with_capacity(64 * (points.len() + 1));
    buf.push_str(BOUNDARY_CSV_HEADER);
    buf.push('\n');
    for p in points {
        let r = BoundaryRow::from(p);
        let _ = writeln!(
            buf,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.mu[0],
            r.mu[1],
            r.mu[2],
            r.e[0],
            r.e[1],
            r.e[2],
            r.power,
            r.gains[0],
            r.gains[1],
            r.gains[2],
            r.lambda_max
        );
    }
    out.write_all(buf.as_bytes())
}

pub fn parse_boundary_csv(text: &str) -> Result<Vec<BoundaryRow>, PgrError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == BOUNDARY_CSV_HEADER => {}
        _ => {
            return Err(PgrError::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    }
    lines
        .map(|(i, line)| {
            let err = |message: String| PgrError::Parse {
                line: i + 1,
                message,
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 11 {
                return Err(err(format!("expected 11 fields, got {}", fields.len())));
            }
            let f = |j: usize| {
                fields[j]
                    .parse::<f64>()
                    .map_err(|e| err(format!("field {}: {e}", j + 1)))
            };
            let s = |j: usize| {
                fields[j]
                    .parse::<i8>()
                    .map_err(|e| err(format!("field {}: {e}", j + 1)))
            };
            Ok(BoundaryRow {
                mu: [f(0)?, f(1)?, f(2)?],
                e: [s(3)?, s(4)?, s(5)?],
                power: f(6)?,
                gains: [f(7)?, f(8)?, f(9)?],
                lambda_max: f(10)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_channels, SystemParams, TrialSeed};
    use num_complex::Complex64;

    fn channels(n_t: usize, trial: u64) -> ChannelSet {
        let p = SystemParams::from_snr_db(10.0, 0.0, n_t).unwrap();
        sample_channels(&p, TrialSeed::new(21, trial))
    }

    fn mu(v: &[f64]) -> SimplexWeights {
        SimplexWeights::new(v.to_vec()).unwrap()
    }

    #[test]
    fn gains_examples() {
        let ch = ChannelSet {
            h_sp: ComplexVec::new(vec![Complex64::new(1.0, 2.0), Complex64::new(3.0, 0.0)])
                .unwrap(),
            ..channels(2, 0)
        };
        let w = Beamformer::new(ComplexVec::from_real(&[1.0, 0.0]).unwrap(), 1.0).unwrap();
        assert!((power_gains(&w, &ch).sp - 5.0).abs() < 1e-14);
        assert_eq!(power_gains(&Beamformer::zero(2), &ch), PowerGains::default());

        let v = ComplexVec::new(vec![Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.5)]).unwrap();
        let g1 = power_gains(&Beamformer::new(v.clone(), 10.0).unwrap(), &ch);
        let k = Complex64::new(1.2, -0.7);
        let g2 = power_gains(&Beamformer::new(v.scaled_by(k), 10.0).unwrap(), &ch);
        let s = k.norm_sqr();
        assert!((g2.sp - s * g1.sp).abs() < 1e-13);
        assert!((g2.se - s * g1.se).abs() < 1e-13);
        assert!((g2.ss - s * g1.ss).abs() < 1e-13);
    }

    #[test]
    fn lattice_counts() {
        assert_eq!(sample_simplex(3, 2).unwrap().len(), 6);
        let two = sample_simplex(2, 1).unwrap();
        assert_eq!(two, vec![mu(&[0.0, 1.0]), mu(&[1.0, 0.0])]);
        assert_eq!(sample_simplex(3, 100).unwrap().len(), 5151);
        assert!(sample_simplex(3, 0).is_err());
        assert!(sample_simplex(4, 3).is_err());
        for w in sample_simplex(3, 7).unwrap() {
            SimplexWeights::new(w.as_slice().to_vec()).unwrap();
        }
    }

    #[test]
    fn weights_are_validated() {
        assert!(SimplexWeights::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexWeights::new(vec![1.0]).is_err());
        assert!(SimplexWeights::new(vec![-0.1, 0.6, 0.5]).is_err());
    }

    #[test]
    fn power_rule_rows() {
        assert_eq!(admissible_powers(0.5, 2, 3, 4.0), PowerSet::Full(4.0));
        assert_eq!(admissible_powers(0.0, 2, 3, 4.0), PowerSet::Interval(4.0));
        assert_eq!(admissible_powers(-0.1, 2, 3, 4.0), PowerSet::Zero);
        assert_eq!(admissible_powers(-0.1, 3, 3, 4.0), PowerSet::Full(4.0));
        let g = PowerSet::Interval(1.0).grid(INTERVAL_POWER_STEPS);
        assert_eq!(g.len(), INTERVAL_POWER_STEPS + 2);
        assert_eq!((g[0], *g.last().unwrap()), (0.0, 1.0));
    }

    #[test]
    fn zero_forcing_corner() {
        for n_t in 2..=4 {
            let ch = channels(n_t, 3);
            let p = boundary_beamformer(&mu(&[1.0, 0.0, 0.0]), Direction::E1, &ch, 10.0).unwrap();
            assert!(p.lambda_max.abs() <= 1e-12);
            assert!(p.gains.sp <= 1e-20 * 10.0 * ch.h_sp.norm_sqr());
        }
    }

    #[test]
    fn secondary_corner_is_mrt() {
        let ch = channels(3, 4);
        let p = boundary_beamformer(&mu(&[0.0, 0.0, 1.0]), Direction::E1, &ch, 2.0).unwrap();
        let expected = 2.0 * ch.h_ss.norm_sqr();
        assert!((p.gains.ss - expected).abs() < 1e-12 * expected);
        assert!((p.w.power() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn arity_and_direction_checks() {
        let ch = channels(2, 0);
        assert!(matches!(
            boundary_beamformer(&mu(&[0.5, 0.5]), Direction::E1, &ch, 1.0),
            Err(PgrError::Arity { .. })
        ));
        assert!(boundary_beamformer(&mu(&[0.5, 0.5]), Direction::PRIMARY_SECONDARY, &ch, 1.0)
            .is_ok());
        assert!(Direction::new([2, 1, 1]).is_err());
        assert!(Direction::new([0, 0, 0]).is_err());
        assert!(matches!(
            boundary_beamformer(&mu(&[0.5, 0.5]), Direction::PRIMARY_SECONDARY, &ch, -1.0),
            Err(PgrError::Power(_))
        ));
    }

    #[test]
    fn csv_shapes() {
        let mut out = Vec::new();
        export_boundary(&[], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), format!("{BOUNDARY_CSV_HEADER}\n"));

        let ch = channels(2, 1);
        let pts = enumerate_boundary(&ch, Direction::E1, 2, 10.0).unwrap();
        let mut out = Vec::new();
        export_boundary(&pts, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 7);
        let rows = parse_boundary_csv(&text).unwrap();
        for (r, p) in rows.iter().zip(&pts) {
            assert_eq!(r.gains, p.gains.as_array());
            assert_eq!(r.lambda_max, p.lambda_max);
        }
    }

    #[test]
    fn two_term_rows_spread_weights() {
        let ch = channels(3, 2);
        let p = boundary_beamformer(&mu(&[0.25, 0.75]), Direction::PRIMARY_SECONDARY, &ch, 1.0)
            .unwrap();
        let r = BoundaryRow::from(&p);
        assert_eq!(r.mu, [0.25, 0.0, 0.75]);
        assert_eq!(r.e, [-1, 0, 1]);
    }
}
