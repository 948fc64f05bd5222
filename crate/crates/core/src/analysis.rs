//! Finite-radius criteria as numerical checks, solution classification and
//! `ω_c` sweeps.
//!
//! Verdicts rest on sampling `n(ω)` on refined grids. They are numerical
//! verifications, not proofs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compact::{compactify, to_dimensionless, LimitPoint, Orbit};
use crate::error::{Error, Result};
use crate::model::DistributionModel;
use crate::physical::{integrate_physical, Classification, Radius, SolutionProfile, SolveSettings};
use crate::roots::brent;

/// Allowed excess of `n` over a bound before a hypothesis counts as violated.
pub const INDEX_SLACK: f64 = 1e-9;
/// Required accuracy of `n(ω_crit) − (5+3l)`.
pub const OMEGA_CRIT_CHECK: f64 = 1e-8;
/// Distance at which a state is labelled with a limit point.
pub const LIMIT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    T1,
    T2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Holds {
    Guaranteed,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaCrit {
    Finite(f64),
    Infinite,
    /// `n > 5+3l` at every sampled `ω`.
    ZeroLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    Interval {
        omega_lo: f64,
        omega_hi: f64,
        /// Largest sampled `n(ω) − bound`.
        sup_excess: f64,
        /// Largest change of `n` across one grid cell.
        cell_variation: f64,
        low_omega_limit: f64,
    },
    Critical {
        omega_c: f64,
        omega_crit: OmegaCrit,
        small_omega: Option<Box<Witness>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremVerdict {
    pub theorem: Theorem,
    pub holds: Holds,
    pub witness: Witness,
    pub note: String,
}

const GRID_NOTE: &str = "numerical verification on a refined grid, not a proof";

/// Samples of `n(ω) − bound` on a dyadically refined log grid.
#[derive(Debug, Clone)]
struct BoundScan {
    lo: f64,
    hi: f64,
    max_excess: f64,
    variation: f64,
    low_limit: f64,
    identically_bound: bool,
}

impl BoundScan {
    fn passes(&self, bound: f64) -> bool {
        self.max_excess + self.variation <= INDEX_SLACK && self.low_limit <= bound + INDEX_SLACK
    }

    fn witness(&self) -> Witness {
        Witness::Interval {
            omega_lo: self.lo,
            omega_hi: self.hi,
            sup_excess: self.max_excess,
            cell_variation: self.variation,
            low_omega_limit: self.low_limit,
        }
    }
}

const SCAN_DECADES: f64 = 10.0;
const SCAN_MAX_CELLS: usize = 4096;

fn scan_bound(model: &DistributionModel, hi: f64, bound: f64) -> Result<BoundScan> {
    let lo = (hi * 10f64.powf(-SCAN_DECADES)).max(1e-290);
    let (a, b) = (lo.ln(), hi.ln());
    let n_at = |i: usize, cells: usize| model.index((a + (b - a) * i as f64 / cells as f64).exp());
    let mut cells = 16;
    let mut values = (0..=cells).map(|i| n_at(i, cells)).collect::<Result<Vec<_>>>()?;
    loop {
        let max_excess = values.iter().map(|n| n - bound).fold(f64::NEG_INFINITY, f64::max);
        let variation = values.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        let settled = max_excess > INDEX_SLACK || max_excess + variation <= INDEX_SLACK;
        if settled || cells >= SCAN_MAX_CELLS {
            // linear extrapolation in ω towards zero from the two lowest points
            let (w1, w2) = (lo, lo * 1e-3);
            let (n1, n2) = (values[0], model.index(w2)?);
            let low_limit = n1 - w1 * (n1 - n2) / (w1 - w2);
            let identically_bound = values.iter().all(|n| (n - bound).abs() < INDEX_SLACK);
            return Ok(BoundScan { lo, hi, max_excess, variation, low_limit, identically_bound });
        }
        let mut refined = Vec::with_capacity(2 * cells + 1);
        for (i, &v) in values[..cells].iter().enumerate() {
            refined.push(v);
            refined.push(n_at(2 * i + 1, 2 * cells)?);
        }
        refined.push(values[cells]);
        values = refined;
        cells *= 2;
    }
}

/// `n(ω) ≤ 3 + l` on `(0, ω₀]` guarantees finite mass and radius.
pub fn check_theorem1(model: &DistributionModel, omega_0: f64) -> Result<TheoremVerdict> {
    if !(omega_0 > 0.0) || !omega_0.is_finite() {
        return Err(Error::InvalidArgument(format!("omega_0 must be positive (got {omega_0})")));
    }
    let bound = 3.0 + model.l();
    let scan = scan_bound(model, omega_0, bound)?;
    let holds = if scan.passes(bound) { Holds::Guaranteed } else { Holds::Inconclusive };
    Ok(TheoremVerdict {
        theorem: Theorem::T1,
        holds,
        witness: scan.witness(),
        note: format!("n <= {bound} checked on [{:e}, {:e}]; {GRID_NOTE}", scan.lo, scan.hi),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaCritResult {
    pub value: OmegaCrit,
    /// Upward crossings of `5+3l` found by the scan.
    pub crossings: usize,
    /// Largest `ω` at which the scan evaluated `n`.
    pub scan_limit: f64,
    pub warning: Option<String>,
}

const CRIT_SCAN_START: f64 = 1e-8;
const CRIT_SCAN_END: f64 = 1e100;
const CRIT_SCAN_FACTOR: f64 = 1.189_207_115_002_721; // 2^{1/4}

/// `sup { ω : n(ω) ≤ 5 + 3l }` from a log scan up to overflow, refined by
/// Brent's method on the last upward crossing.
pub fn omega_crit(model: &DistributionModel) -> Result<OmegaCritResult> {
    let bound = 5.0 + 3.0 * model.l();
    let mut grid = Vec::new();
    let mut w = CRIT_SCAN_START;
    while w <= CRIT_SCAN_END {
        match model.index(w) {
            Ok(n) if n.is_finite() => grid.push((w, n)),
            _ => break,
        }
        w *= CRIT_SCAN_FACTOR;
    }
    if grid.is_empty() {
        return Err(Error::UndefinedIndex {
            omega: CRIT_SCAN_START,
            reason: "index not evaluable at the start of the scan".into(),
        });
    }
    let scan_limit = grid.last().map(|p| p.0).unwrap_or(CRIT_SCAN_START);
    let below = |n: f64| n <= bound;
    let crossings = grid.windows(2).filter(|p| below(p[0].1) && !below(p[1].1)).count();
    let warning = (crossings > 1).then(|| {
        format!("n(omega) crosses {bound} upwards {crossings} times; the largest crossing is reported")
    });
    if grid.iter().all(|p| !below(p.1)) {
        return Ok(OmegaCritResult { value: OmegaCrit::ZeroLimit, crossings, scan_limit, warning });
    }
    if below(grid.last().expect("non-empty").1) {
        return Ok(OmegaCritResult { value: OmegaCrit::Infinite, crossings, scan_limit, warning });
    }
    let i = grid.iter().rposition(|p| below(p.1)).expect("some point below");
    let (a, b) = (grid[i].0, grid[i + 1].0);
    let root = brent(|w| Ok(model.index(w)? - bound), a, b, 1e-15 * b, 200)?;
    let residual = model.index(root)? - bound;
    if residual.abs() >= OMEGA_CRIT_CHECK {
        return Err(Error::Root(format!(
            "omega_crit = {root:e} leaves residual {residual:e}"
        )));
    }
    Ok(OmegaCritResult { value: OmegaCrit::Finite(root), crossings, scan_limit, warning })
}

/// `ω_c ≤ ω_crit` together with `n ≤ 5 + 3l` near zero (and `n` not
/// identically `5 + 3l` there) guarantees finite mass and radius.
pub fn check_theorem2(model: &DistributionModel, omega_c: f64) -> Result<TheoremVerdict> {
    if !(omega_c > 0.0) || !omega_c.is_finite() {
        return Err(Error::InvalidArgument(format!("omega_c must be positive (got {omega_c})")));
    }
    let bound = 5.0 + 3.0 * model.l();
    let crit = omega_crit(model)?;
    let verdict = |holds, small: Option<&BoundScan>, note: String| TheoremVerdict {
        theorem: Theorem::T2,
        holds,
        witness: Witness::Critical {
            omega_c,
            omega_crit: crit.value,
            small_omega: small.map(|s| Box::new(s.witness())),
        },
        note,
    };
    let top = match crit.value {
        OmegaCrit::ZeroLimit => {
            return Ok(verdict(Holds::Inconclusive, None, format!("n > {bound} for every sampled omega")));
        }
        OmegaCrit::Finite(w) if omega_c > w => {
            return Ok(verdict(
                Holds::Inconclusive,
                None,
                format!("omega_c = {omega_c:e} exceeds omega_crit = {w:e}"),
            ));
        }
        OmegaCrit::Finite(w) => w.min(omega_c),
        OmegaCrit::Infinite => omega_c,
    };
    let scan = scan_bound(model, top, bound)?;
    if scan.identically_bound {
        return Ok(verdict(
            Holds::Inconclusive,
            Some(&scan),
            format!("n is identically {bound} near zero"),
        ));
    }
    let holds = if scan.passes(bound) { Holds::Guaranteed } else { Holds::Inconclusive };
    let mut note = format!("n <= {bound} checked on [{:e}, {:e}]; {GRID_NOTE}", scan.lo, scan.hi);
    if let Some(w) = &crit.warning {
        note.push_str("; ");
        note.push_str(w);
    }
    Ok(verdict(holds, Some(&scan), note))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionClass {
    pub classification: Classification,
    pub forward: LimitPoint,
    pub backward: LimitPoint,
    /// `None` for finite-radius solutions.
    pub mass_converged: Option<bool>,
}

/// Labels a solved profile with its compact-space limit points. The forward
/// label comes from `orbit` when given, otherwise from the last profile
/// sample mapped into the cube.
pub fn classify_solution(
    model: &DistributionModel,
    profile: &SolutionProfile,
    orbit: Option<&Orbit>,
) -> SolutionClass {
    let map = |s| to_dimensionless(model, s).and_then(|d| compactify(&d)).ok();
    let forward = match orbit {
        Some(o) => o.forward_label(LIMIT_TOL),
        None => profile
            .samples
            .last()
            .and_then(map)
            .map_or(LimitPoint::Unresolved, |s| LimitPoint::forward(&s, LIMIT_TOL)),
    };
    let backward = profile
        .samples
        .first()
        .and_then(map)
        .map_or(LimitPoint::Unresolved, |s| LimitPoint::backward(&s, model.l(), LIMIT_TOL));
    let mass_converged = match profile.classification {
        Classification::FiniteRadius => None,
        Classification::InfiniteFiniteMass => Some(true),
        Classification::InfiniteUndetermined => Some(false),
    };
    SolutionClass {
        classification: profile.classification,
        forward,
        backward,
        mass_converged,
    }
}

/// Result of one solve inside a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub radius: Radius,
    pub total_mass: f64,
    pub classification: Classification,
    pub label: LimitPoint,
    /// Outer radius bound used for this solve.
    pub r_max: f64,
}

impl SweepPoint {
    fn capped_radius(&self) -> f64 {
        self.radius.finite().unwrap_or(self.r_max).min(self.r_max)
    }

    fn infinite(&self) -> bool {
        self.radius == Radius::Infinite
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub omega_c: f64,
    pub point: Option<SweepPoint>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalCandidate {
    /// Grid index of the flagged point.
    pub index: usize,
    pub omega_c: f64,
    /// Interval on which radii exceed the outer bound, when confirmed.
    pub bracket: (f64, f64),
    pub confirmed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    pub candidates: Vec<CriticalCandidate>,
}

impl SweepResult {
    /// Confirmed critical values.
    pub fn critical_values(&self) -> Vec<f64> {
        self.candidates.iter().filter(|c| c.confirmed).map(|c| c.omega_c).collect()
    }

    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| e.error.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub solve: SolveSettings,
    /// Jump of `R` over the median of the neighbouring radii that flags a
    /// candidate.
    pub growth_factor: f64,
    /// Relative width at which refinement stops.
    pub refine_tol: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            solve: SolveSettings::default(),
            growth_factor: 1e3,
            refine_tol: 1e-6,
        }
    }
}

/// Solves on every grid value of `ω_c` in parallel and searches for
/// isolated values where the radius diverges.
pub fn sweep_omega_c(
    model: &DistributionModel,
    grid: &[f64],
    settings: &SweepSettings,
) -> Result<SweepResult> {
    sweep_with(grid, settings, |w| {
        let profile = integrate_physical(model, w, &settings.solve)?;
        let class = classify_solution(model, &profile, None);
        Ok(SweepPoint {
            radius: profile.radius,
            total_mass: profile.total_mass,
            classification: profile.classification,
            label: class.forward,
            r_max: profile.diagnostics.r_max,
        })
    })
}

/// Sweep driver over an arbitrary solver.
pub fn sweep_with<F>(grid: &[f64], settings: &SweepSettings, solve: F) -> Result<SweepResult>
where
    F: Fn(f64) -> Result<SweepPoint> + Sync,
{
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty omega_c grid".into()));
    }
    if grid.iter().any(|w| !(*w > 0.0) || !w.is_finite()) || grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidArgument("omega_c grid must be positive and strictly increasing".into()));
    }
    if !(settings.growth_factor > 1.0 && settings.refine_tol > 0.0) {
        return Err(Error::InvalidArgument("growth_factor must exceed 1 and refine_tol be positive".into()));
    }
    let entries: Vec<SweepEntry> = grid
        .par_iter()
        .map(|&w| match solve(w) {
            Ok(p) => SweepEntry { omega_c: w, point: Some(p), error: None },
            Err(e) => SweepEntry { omega_c: w, point: None, error: Some(e.to_string()) },
        })
        .collect();

    let mut candidates = Vec::new();
    for i in 0..entries.len() {
        let Some(p) = entries[i].point else { continue };
        let mut neighbours: Vec<f64> = [i.checked_sub(1), Some(i + 1)]
            .into_iter()
            .flatten()
            .filter_map(|j| entries.get(j).and_then(|e| e.point))
            .map(|q| q.capped_radius())
            .collect();
        if neighbours.is_empty() {
            continue;
        }
        neighbours.sort_by(f64::total_cmp);
        let median = if neighbours.len() == 2 {
            0.5 * (neighbours[0] + neighbours[1])
        } else {
            neighbours[0]
        };
        if p.capped_radius() > settings.growth_factor * median {
            candidates.push(refine_candidate(&entries, i, settings.refine_tol, &solve));
        }
    }
    // adjacent flagged points can describe the same divergence
    candidates.dedup_by(|b, a| a.confirmed && b.confirmed && (a.bracket.0 - b.bracket.0).abs() <= settings.refine_tol * a.omega_c);
    Ok(SweepResult { entries, candidates })
}

fn refine_candidate<F>(entries: &[SweepEntry], i: usize, tol: f64, solve: &F) -> CriticalCandidate
where
    F: Fn(f64) -> Result<SweepPoint>,
{
    let w_i = entries[i].omega_c;
    let lo = if i > 0 { entries[i - 1].omega_c } else { w_i };
    let hi = entries.get(i + 1).map_or(w_i, |e| e.omega_c);
    let eval = |w: f64| solve(w).ok();
    let unconfirmed = |w| CriticalCandidate { index: i, omega_c: w, bracket: (lo, hi), confirmed: false };

    // an unbounded solution inside the bracket
    let mut inside = entries[i].point.filter(|p| p.infinite()).map(|_| w_i);
    if inside.is_none() {
        let log_r = |w: f64| eval(w).map(|p| (p.capped_radius().ln(), p.infinite()));
        let phi = 0.618_033_988_749_895;
        let (mut a, mut b) = (lo, hi);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = match (log_r(c), log_r(d)) {
            (Some(x), Some(y)) => (x, y),
            _ => return unconfirmed(w_i),
        };
        loop {
            if fc.1 {
                inside = Some(c);
                break;
            }
            if fd.1 {
                inside = Some(d);
                break;
            }
            if b - a <= tol * b {
                return unconfirmed(if fc.0 > fd.0 { c } else { d });
            }
            if fc.0 > fd.0 {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = match log_r(c) {
                    Some(v) => v,
                    None => return unconfirmed(w_i),
                };
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = match log_r(d) {
                    Some(v) => v,
                    None => return unconfirmed(w_i),
                };
            }
        }
    }
    let p = inside.expect("set above");
    let is_infinite = |w: f64| eval(w).is_some_and(|q| q.infinite());
    // edges of the unbounded interval, each by bisection against a bounded end
    let edge = |mut bounded: f64, mut unbounded: f64| {
        if is_infinite(bounded) {
            return bounded;
        }
        while (unbounded - bounded).abs() > tol * unbounded.abs().max(bounded.abs()) {
            let mid = 0.5 * (bounded + unbounded);
            if is_infinite(mid) {
                unbounded = mid;
            } else {
                bounded = mid;
            }
        }
        0.5 * (bounded + unbounded)
    };
    let left = if lo < p { edge(lo, p) } else { p };
    let right = if hi > p { edge(hi, p) } else { p };
    CriticalCandidate {
        index: i,
        omega_c: 0.5 * (left + right),
        bracket: (left, right),
        confirmed: true,
    }
}
