//! Candidate pools over boundary families: lattice enumeration followed by a
//! shrinking-window local search around the best lattice points.
//!
//! Each pool is a two-parameter family `x -> (mu, power)`:
//!
//! * `FullPower`: `x = (mu_1, mu_2)`, `mu_3 = 1 - mu_1 - mu_2`, full power.
//! * `RuledPower`: as above, power from the boundary power rule.
//! * `ZeroCurve`: `x = (t, P)`. For two antennas, the weights where
//!   `lambda_max(Z) = 0` form a curve `mu(t)`; any power is admissible there.
//! * `PowerSwept`: `x = (mu_1, P)` over a two-term simplex.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::pgr::{admissible_powers, BoundaryFamily, PowerGains, PowerSet, INTERVAL_POWER_STEPS};
use crate::rates::{secrecy_from_bundle, LinkBudget, Regime};

use super::Candidate;

/// Absolute slack on every rate constraint.
pub(crate) const SLACK: f64 = 1e-9;

/// Seeds refined per pool.
const SEEDS: usize = 3;
/// Seeds taken from the edge of the admissible set.
const PROJECTED_SEEDS: usize = 3;
/// Minimum Chebyshev separation between seeds, in lattice steps.
const SEED_SEPARATION: f64 = 2.5;
/// The local search stops once the window step falls below this fraction of
/// the initial lattice step.
const MIN_STEP_RATIO: f64 = 1e-6;
const MAX_REFINE_ROUNDS: usize = 96;
/// Every seed is refined down to this step ratio; only the best
/// `POLISHED_SEEDS` continue to `MIN_STEP_RATIO`.
const COARSE_STEP_RATIO: f64 = 1e-2;
const POLISHED_SEEDS: usize = 2;
const BISECTION_STEPS: usize = 60;
const PROJECTION_STEPS: usize = 8;
/// Margin aimed for when projecting, so that re-evaluation from the
/// constructed beamformer stays admissible.
const PROJECTION_TARGET: f64 = 1e-12;
/// Finite-difference step as a fraction of the window step.
const FD_RATIO: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Objective {
    SingleUser,
    /// Joint decoding, restricted to the regime the pool is built for.
    Joint(Candidate),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Shape {
    FullPower,
    RuledPower,
    ZeroCurve,
    PowerSwept,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Eval {
    pub x: [f64; 2],
    pub mu: [f64; 3],
    pub power: f64,
    pub gains: PowerGains,
    pub objective: f64,
    pub secondary: f64,
    /// Secrecy rate under the regime the point actually falls in.
    pub actual: f64,
    /// Distance into the pool's regime, in bits; negative outside.
    pub regime_margin: f64,
    pub regime: Option<Regime>,
    pub pool: Candidate,
}

impl Eval {
    /// Smallest constraint margin; the point is admissible iff this is
    /// nonnegative.
    fn margin(&self, threshold: f64) -> f64 {
        (self.regime_margin + SLACK).min(self.secondary - threshold)
    }

    fn admissible(&self, threshold: f64) -> bool {
        self.margin(threshold) >= 0.0
    }
}

/// Total preference order: larger objective, then larger secondary rate,
/// then lexicographically smaller weights, then pool order.
pub(crate) fn compare(a: &Eval, b: &Eval) -> Ordering {
    a.objective
        .total_cmp(&b.objective)
        .then(a.secondary.total_cmp(&b.secondary))
        .then_with(|| {
            for i in 0..3 {
                match b.mu[i].total_cmp(&a.mu[i]) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            Ordering::Equal
        })
        .then(b.pool.cmp(&a.pool))
        .then(a.power.total_cmp(&b.power))
}

fn prefer(a: &Eval, b: &Eval) -> bool {
    compare(a, b) == Ordering::Greater
}

/// Unit-power directions of a family on its weight lattice, shared between
/// pools that score the same family differently.
#[derive(Clone, Debug)]
pub(crate) struct UnitLattice {
    shape: Shape,
    points: Vec<UnitPoint>,
    step0: f64,
}

#[derive(Clone, Copy, Debug)]
struct UnitPoint {
    x0: f64,
    x1: f64,
    mu: [f64; 3],
    lambda: f64,
    gains: PowerGains,
}

impl UnitLattice {
    /// `m` is the lattice resolution in the weight coordinate.
    pub(crate) fn build(family: &BoundaryFamily<'_>, shape: Shape, m: usize) -> Self {
        let mf = m as f64;
        let mut points = Vec::new();
        match shape {
            Shape::FullPower | Shape::RuledPower => {
                for i in 0..=m {
                    for j in 0..=(m - i) {
                        let mu = [i as f64 / mf, j as f64 / mf, (m - i - j) as f64 / mf];
                        let (ep, gains) = family.unit_direction(&mu);
                        points.push(UnitPoint {
                            x0: mu[0],
                            x1: mu[1],
                            mu,
                            lambda: ep.value,
                            gains,
                        });
                    }
                }
            }
            Shape::ZeroCurve => {
                for i in 0..=m {
                    let t = i as f64 / mf;
                    let mu = zero_curve_weights(family, t);
                    let (ep, gains) = family.unit_direction(&mu);
                    points.push(UnitPoint {
                        x0: t,
                        x1: 0.0,
                        mu,
                        lambda: ep.value,
                        gains,
                    });
                }
            }
            Shape::PowerSwept => {
                for i in 0..=m {
                    let mu = [i as f64 / mf, (m - i) as f64 / mf, 0.0];
                    let (ep, gains) = family.unit_direction(&mu[..2]);
                    points.push(UnitPoint {
                        x0: mu[0],
                        x1: 0.0,
                        mu,
                        lambda: ep.value,
                        gains,
                    });
                }
            }
        }
        UnitLattice {
            shape,
            points,
            step0: 1.0 / mf,
        }
    }
}

/// Weights on the `lambda_max(Z) = 0` curve of the direction-`e2` family for
/// two antennas: `mu = ((1-s) t, (1-s)(1-t), s)` with `s` the largest value
/// keeping `lambda_max <= 0`. `lambda_max` is nondecreasing in `s`, is
/// nonpositive at `s = 0` and positive at `s = 1`.
fn zero_curve_weights(family: &BoundaryFamily<'_>, t: f64) -> [f64; 3] {
    let mu_at = |s: f64| [(1.0 - s) * t, (1.0 - s) * (1.0 - t), s];
    let (mut lo, mut hi) = (0.0, 1.0);
    if family.lambda_max(&mu_at(lo)) > 0.0 {
        return mu_at(lo);
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if family.lambda_max(&mu_at(mid)) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mu_at(lo)
}

pub(crate) struct Pool<'a> {
    pub kind: Candidate,
    objective: Objective,
    family: BoundaryFamily<'a>,
    shape: Shape,
    p_max: f64,
    step: [f64; 2],
    /// Sorted best first.
    lattice: Vec<Eval>,
    /// Lattice index by integer cell coordinates.
    cells: HashMap<(i64, i64), usize>,
}

impl<'a> Pool<'a> {
    pub(crate) fn new(
        kind: Candidate,
        objective: Objective,
        family: BoundaryFamily<'a>,
        units: &UnitLattice,
        lb: &LinkBudget,
        p_max: f64,
    ) -> Self {
        let shape = units.shape;
        let power_grid = PowerSet::Interval(p_max).grid(INTERVAL_POWER_STEPS);
        let power_step = p_max / (INTERVAL_POWER_STEPS + 1) as f64;
        let mut pool = Pool {
            kind,
            objective,
            family,
            shape,
            p_max,
            step: match shape {
                Shape::FullPower | Shape::RuledPower => [units.step0, units.step0],
                Shape::ZeroCurve | Shape::PowerSwept => [units.step0, power_step],
            },
            lattice: Vec::new(),
            cells: HashMap::new(),
        };
        let n_t = pool.family.channels().n_t();
        let arity = pool.family.arity();
        let mut lattice = Vec::with_capacity(units.points.len());
        for u in &units.points {
            match shape {
                Shape::FullPower | Shape::RuledPower => {
                    let power = if shape == Shape::FullPower {
                        p_max
                    } else {
                        admissible_powers(u.lambda, n_t, arity, p_max).max()
                    };
                    let x = [u.x0, u.x1];
                    lattice.push(pool.score(x, u.mu, power, u.gains.scaled(power), lb));
                }
                Shape::ZeroCurve | Shape::PowerSwept => {
                    for &power in &power_grid {
                        let x = [u.x0, power];
                        lattice.push(pool.score(x, u.mu, power, u.gains.scaled(power), lb));
                    }
                }
            }
        }
        // Best first; `best` walks the lattice in this order.
        lattice.sort_unstable_by(|a, b| compare(b, a));
        pool.cells = lattice
            .iter()
            .enumerate()
            .map(|(i, e)| (pool.cell(e.x), i))
            .collect();
        pool.lattice = lattice;
        pool
    }

    fn cell(&self, x: [f64; 2]) -> (i64, i64) {
        (
            (x[0] / self.step[0]).round() as i64,
            (x[1] / self.step[1]).round() as i64,
        )
    }

    pub(crate) fn family(&self) -> &BoundaryFamily<'a> {
        &self.family
    }

    pub(crate) fn p_max(&self) -> f64 {
        self.p_max
    }

    /// Scores a point with the pool's own objective, whether or not it lies
    /// in the pool's regime. For joint-decoding pools `regime` still reports
    /// where the point actually falls.
    fn score(
        &self,
        x: [f64; 2],
        mu: [f64; 3],
        power: f64,
        gains: PowerGains,
        lb: &LinkBudget,
    ) -> Eval {
        let secondary = lb.secondary_from_gains(&gains);
        let (objective, actual, regime_margin, regime) = match self.objective {
            Objective::SingleUser => {
                let v = lb.secrecy_sd_from_gains(&gains);
                (v, v, f64::INFINITY, None)
            }
            Objective::Joint(kind) => {
                let b = lb.bundle_from_gains(&gains);
                let (raw, margin) = match kind {
                    Candidate::S1 => (b.r_pp_sd - b.r_pe_sd, secondary - b.r_se_jd),
                    Candidate::S2 => (
                        b.r_pp_sd - b.r_e_mac + secondary,
                        (secondary - b.r_se_sd).min(b.r_se_jd - secondary),
                    ),
                    _ => (b.r_pp_sd - b.r_pe_jd, b.r_se_sd - secondary),
                };
                let (v, r) = secrecy_from_bundle(&b, secondary);
                (raw.max(0.0), v, margin, Some(r))
            }
        };
        Eval {
            x,
            mu,
            power,
            gains,
            objective,
            actual,
            secondary,
            regime_margin,
            regime,
            pool: self.kind,
        }
    }

    /// Continuous version of the lattice map, for the local search.
    fn evaluate(&self, x: [f64; 2], lb: &LinkBudget) -> Option<Eval> {
        match self.shape {
            Shape::FullPower | Shape::RuledPower => {
                if x[0] < 0.0 || x[1] < 0.0 || x[0] + x[1] > 1.0 {
                    return None;
                }
                let mu = [x[0], x[1], (1.0 - x[0] - x[1]).max(0.0)];
                let (ep, unit) = self.family.unit_direction(&mu);
                let power = if self.shape == Shape::FullPower {
                    self.p_max
                } else {
                    let n_t = self.family.channels().n_t();
                    admissible_powers(ep.value, n_t, self.family.arity(), self.p_max).max()
                };
                Some(self.score(x, mu, power, unit.scaled(power), lb))
            }
            Shape::ZeroCurve | Shape::PowerSwept => {
                if !(0.0..=1.0).contains(&x[0]) || !(0.0..=self.p_max).contains(&x[1]) {
                    return None;
                }
                let (mu, unit) = if self.shape == Shape::ZeroCurve {
                    let mu = zero_curve_weights(&self.family, x[0]);
                    (mu, self.family.unit_direction(&mu).1)
                } else {
                    let mu = [x[0], 1.0 - x[0], 0.0];
                    (mu, self.family.unit_direction(&mu[..2]).1)
                };
                Some(self.score(x, mu, x[1], unit.scaled(x[1]), lb))
            }
        }
    }

    /// Best candidate meeting the secondary threshold, or `None` if no
    /// lattice point does.
    ///
    /// Seeds are the best admissible lattice points plus the best points on
    /// the edge of the admissible set, found by pulling inadmissible lattice
    /// points with an admissible neighbor back onto the violated constraint.
    /// When the optimum sits on a constraint, the admissible lattice points
    /// next to it can score below points elsewhere.
    pub(crate) fn best(&self, lb: &LinkBudget, threshold: f64) -> Option<Eval> {
        let feasible = self.lattice.iter().filter(|e| e.admissible(threshold));
        let mut seeds = self.spread(feasible, SEEDS);
        let floor = seeds.first()?.objective;
        let mut edge: Vec<Eval> = self
            .lattice
            .iter()
            .filter(|e| e.objective > floor && !e.admissible(threshold))
            .filter(|e| self.has_admissible_neighbor(e, threshold))
            .filter_map(|e| self.project(*e, lb, threshold, self.step))
            .collect();
        edge.sort_by(|a, b| compare(b, a));
        seeds.extend(self.spread(edge.iter(), PROJECTED_SEEDS));
        // Every seed gets a coarse pass; only the leaders are polished.
        let mut coarse: Vec<(Eval, [f64; 2], usize)> = seeds
            .into_iter()
            .map(|s| self.refine(s, self.step, MAX_REFINE_ROUNDS, COARSE_STEP_RATIO, lb, threshold))
            .collect();
        coarse.sort_by(|a, b| compare(&b.0, &a.0));
        coarse
            .into_iter()
            .take(POLISHED_SEEDS)
            .map(|(e, h, left)| self.refine(e, h, left, MIN_STEP_RATIO, lb, threshold).0)
            .max_by(compare)
    }

    fn has_admissible_neighbor(&self, e: &Eval, threshold: f64) -> bool {
        let (i, j) = self.cell(e.x);
        [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1), (i - 1, j + 1), (i + 1, j - 1)]
            .iter()
            .filter_map(|c| self.cells.get(c))
            .any(|&k| self.lattice[k].admissible(threshold))
    }

    /// Up to `n` points from `candidates` (best first), pairwise separated by
    /// more than `SEED_SEPARATION` lattice steps.
    fn spread<'e>(&self, candidates: impl Iterator<Item = &'e Eval>, n: usize) -> Vec<Eval> {
        let mut out: Vec<Eval> = Vec::with_capacity(n);
        for e in candidates {
            if out.len() == n {
                break;
            }
            let far = out.iter().all(|s| {
                let d0 = (s.x[0] - e.x[0]).abs() / self.step[0];
                let d1 = (s.x[1] - e.x[1]).abs() / self.step[1].max(f64::MIN_POSITIVE);
                d0.max(d1) > SEED_SEPARATION
            });
            if far {
                out.push(*e);
            }
        }
        out
    }

    /// Shrinking 5x5 window search. The window keeps its size when the best
    /// point lands on its rim, and halves otherwise. Window points that would
    /// improve but violate a constraint are pulled back onto the constraint
    /// first, so the search can slide along an active constraint.
    ///
    /// Runs until the step falls below `stop_ratio` lattice steps or `rounds`
    /// run out, and returns the point with the step and rounds left so the
    /// search can be resumed.
    fn refine(
        &self,
        seed: Eval,
        mut h: [f64; 2],
        mut rounds: usize,
        stop_ratio: f64,
        lb: &LinkBudget,
        threshold: f64,
    ) -> (Eval, [f64; 2], usize) {
        let mut best = seed;
        let min_h = self.step[0] * stop_ratio;
        while rounds > 0 && h[0] >= min_h {
            rounds -= 1;
            let center = best.x;
            let mut on_rim = false;
            for dx in -2i32..=2 {
                for dy in -2i32..=2 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let x = [
                        center[0] + f64::from(dx) * h[0],
                        center[1] + f64::from(dy) * h[1],
                    ];
                    let Some(mut e) = self.evaluate(x, lb) else {
                        continue;
                    };
                    if !e.admissible(threshold) {
                        if e.objective <= best.objective {
                            continue;
                        }
                        match self.project(e, lb, threshold, h) {
                            Some(p) => e = p,
                            None => continue,
                        }
                    }
                    if prefer(&e, &best) {
                        best = e;
                        on_rim = dx.abs() == 2 || dy.abs() == 2;
                    }
                }
            }
            if !on_rim {
                h = [h[0] * 0.5, h[1] * 0.5];
            }
        }
        (best, h, rounds)
    }

    /// Newton steps on the most violated constraint margin, along its
    /// finite-difference gradient in lattice-scaled coordinates.
    fn project(&self, start: Eval, lb: &LinkBudget, threshold: f64, h: [f64; 2]) -> Option<Eval> {
        let mut e = start;
        for _ in 0..PROJECTION_STEPS {
            let m = e.margin(threshold) - PROJECTION_TARGET;
            if m >= 0.0 {
                return Some(e);
            }
            let m0 = m + PROJECTION_TARGET;
            let mut grad = [0.0; 2];
            for (i, g) in grad.iter_mut().enumerate() {
                let mut x = e.x;
                x[i] += h[i] * FD_RATIO;
                let mh = self.evaluate(x, lb)?.margin(threshold);
                // Gradient in units of the window step.
                *g = (mh - m0) / FD_RATIO;
            }
            let g2 = grad[0] * grad[0] + grad[1] * grad[1];
            if !(g2 > 0.0) {
                return None;
            }
            let t = -m / g2;
            let x = [e.x[0] + t * grad[0] * h[0], e.x[1] + t * grad[1] * h[1]];
            // A projection that travels further than the window is chasing a
            // different piece of the constraint.
            if (t * t * g2).sqrt() > 4.0 {
                return None;
            }
            e = self.evaluate(x, lb)?;
        }
        (e.margin(threshold) >= 0.0).then_some(e)
    }
}

/// Winners for each threshold. Thresholds are visited from the largest down
/// and every winner stays a candidate for smaller thresholds, so the
/// objective is monotone in the threshold by construction.
pub(crate) fn solve_thresholds(
    pools: &[Pool<'_>],
    lb: &LinkBudget,
    thresholds: &[f64],
) -> Vec<Option<Eval>> {
    let mut order: Vec<usize> = (0..thresholds.len()).collect();
    order.sort_by(|&a, &b| thresholds[b].total_cmp(&thresholds[a]));
    let mut out = vec![None; thresholds.len()];
    let mut carried: Vec<Eval> = Vec::new();
    for idx in order {
        let th = thresholds[idx];
        let mut best: Option<Eval> = None;
        // Pools search on their own formula; across pools compare true rates.
        let pool_bests = pools.iter().filter_map(|p| p.best(lb, th)).map(|mut e| {
            e.objective = e.actual;
            e
        });
        let kept = carried.iter().copied().filter(|c| c.admissible(th));
        for e in pool_bests.chain(kept) {
            if best.as_ref().is_none_or(|b| prefer(&e, b)) {
                best = Some(e);
            }
        }
        if let Some(b) = best {
            carried.push(b);
        }
        out[idx] = best;
    }
    out
}

/// Best lattice point of a full-power family after scaling every direction
/// over the interval power grid. No local search.
pub(crate) fn best_with_power_grid(
    pool: &Pool<'_>,
    units: &UnitLattice,
    lb: &LinkBudget,
    threshold: f64,
) -> Option<Eval> {
    let grid = PowerSet::Interval(pool.p_max).grid(INTERVAL_POWER_STEPS);
    let mut best: Option<Eval> = None;
    for u in &units.points {
        for &power in &grid {
            let e = pool.score([u.x0, u.x1], u.mu, power, u.gains.scaled(power), lb);
            if e.admissible(threshold) && best.as_ref().is_none_or(|b| prefer(&e, b)) {
                best = Some(e);
            }
        }
    }
    best
}

