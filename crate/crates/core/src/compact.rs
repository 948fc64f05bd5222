//! Compactified autonomous system on the unit cube.
//!
//! With `u = 4π r³ ρ / m`, `q = m / (r ω)` and `x ↦ x / (1 + x)` applied to
//! `(u, q, ω)`, the field equations become, in `dλ = dξ / ((1−U)(1−Q))`,
//!
//! ```text
//! U' = U(1−U)[(1−Q)(3+2l − (4+2l)U) − (n+l) Q (1−U)]
//! Q' = Q(1−Q)[(2U−1)(1−Q) + Q(1−U)]
//! Ω' = −Ω(1−Ω) Q (1−U)
//! ```
//!
//! where `n` is the index of the model evaluated at `ω = Ω / (1 − Ω)`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Complex, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DistributionModel, Family};
use crate::ode::{DenseSegment, Dopri5, OdeSystem, StepperOptions, Tolerance};
use crate::physical::PhysicalState;
use crate::roots::brent;

/// A point `(U, Q, Ω)` of the cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompactState {
    pub u: f64,
    pub q: f64,
    pub omega: f64,
}

impl CompactState {
    pub fn new(u: f64, q: f64, omega: f64) -> Self {
        Self { u, q, omega }
    }

    pub fn is_interior(&self) -> bool {
        [self.u, self.q, self.omega].iter().all(|&x| x > 0.0 && x < 1.0)
    }

    pub fn distance(&self, other: &CompactState) -> f64 {
        ((self.u - other.u).powi(2) + (self.q - other.q).powi(2) + (self.omega - other.omega).powi(2))
            .sqrt()
    }
}

/// Homology invariants `(u, q, ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dimensionless {
    pub u: f64,
    pub q: f64,
    pub omega: f64,
}

pub fn to_dimensionless(model: &DistributionModel, state: &PhysicalState) -> Result<Dimensionless> {
    let PhysicalState { r, m, omega } = *state;
    if !(r > 0.0 && m > 0.0 && omega > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dimensionless variables need r, m, omega > 0 (got {r}, {m}, {omega})"
        )));
    }
    let rho = model.density(r, omega)?;
    Ok(Dimensionless {
        u: 4.0 * PI * r * r * r * rho / m,
        q: m / (r * omega),
        omega,
    })
}

pub fn compactify(d: &Dimensionless) -> Result<CompactState> {
    if !(d.u > 0.0 && d.q > 0.0 && d.omega > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "compactify needs positive inputs (got {}, {}, {})",
            d.u, d.q, d.omega
        )));
    }
    let map = |x: f64| x / (1.0 + x);
    Ok(CompactState::new(map(d.u), map(d.q), map(d.omega)))
}

pub fn decompactify(state: &CompactState) -> Result<Dimensionless> {
    if !state.is_interior() {
        return Err(Error::BoundaryState);
    }
    let inv = |x: f64| x / (1.0 - x);
    Ok(Dimensionless {
        u: inv(state.u),
        q: inv(state.q),
        omega: inv(state.omega),
    })
}

/// Inverts the compactification using `uq = 4π C_l r^{2+2l} g_{l+1/2}(ω) / ω`.
pub fn from_compact(model: &DistributionModel, state: &CompactState) -> Result<PhysicalState> {
    let d = decompactify(state)?;
    let g = model.g(model.l() + 0.5, d.omega)?.value;
    if !(g > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "density vanishes at omega = {}",
            d.omega
        )));
    }
    let r = (d.u * d.q * d.omega / (4.0 * PI * model.c_l() * g)).powf(1.0 / (2.0 + 2.0 * model.l()));
    Ok(PhysicalState {
        r,
        m: d.q * r * d.omega,
        omega: d.omega,
    })
}

/// `n(ω)` sampled on a uniform `ln ω` grid with cubic interpolation.
///
/// The spacing is halved until interpolation at every cell midpoint agrees
/// with direct evaluation to `1e-9`.
#[derive(Debug, Clone)]
pub struct IndexTable {
    s0: f64,
    ds: f64,
    values: Vec<f64>,
    pub max_error: f64,
}

const INDEX_TABLE_TOL: f64 = 1e-9;

impl IndexTable {
    pub fn build(model: &DistributionModel, omega_lo: f64, omega_hi: f64) -> Result<Self> {
        if !(omega_lo > 0.0 && omega_hi > omega_lo) {
            return Err(Error::InvalidArgument(format!(
                "index table needs 0 < omega_lo < omega_hi (got {omega_lo}, {omega_hi})"
            )));
        }
        let (s0, s1) = (omega_lo.ln(), omega_hi.ln());
        let mut cells = ((s1 - s0) / 0.25).ceil().max(4.0) as usize;
        let mut values = (0..=cells)
            .map(|i| model.index((s0 + (s1 - s0) * i as f64 / cells as f64).exp()))
            .collect::<Result<Vec<_>>>()?;
        for _ in 0..12 {
            let ds = (s1 - s0) / cells as f64;
            let table = IndexTable { s0, ds, values: values.clone(), max_error: 0.0 };
            let mids = (0..cells)
                .map(|i| model.index((s0 + (i as f64 + 0.5) * ds).exp()))
                .collect::<Result<Vec<_>>>()?;
            let err = mids
                .iter()
                .enumerate()
                .map(|(i, &v)| (table.interpolate(s0 + (i as f64 + 0.5) * ds) - v).abs())
                .fold(0.0, f64::max);
            if err <= INDEX_TABLE_TOL {
                return Ok(IndexTable { max_error: err, ..table });
            }
            let mut merged = Vec::with_capacity(2 * cells + 1);
            for i in 0..cells {
                merged.push(values[i]);
                merged.push(mids[i]);
            }
            merged.push(values[cells]);
            values = merged;
            cells *= 2;
        }
        Err(Error::InvalidArgument(format!(
            "index table could not reach {INDEX_TABLE_TOL:e} on [{omega_lo:e}, {omega_hi:e}]"
        )))
    }

    fn range(&self) -> (f64, f64) {
        (self.s0, self.s0 + self.ds * (self.values.len() - 1) as f64)
    }

    fn interpolate(&self, s: f64) -> f64 {
        let last = self.values.len() - 1;
        let x = (s - self.s0) / self.ds;
        let i = (x.floor() as isize - 1).clamp(0, last as isize - 3) as usize;
        let t = x - i as f64;
        let v = &self.values[i..i + 4];
        // Lagrange on nodes 0, 1, 2, 3
        -v[0] * (t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0 + v[1] * t * (t - 2.0) * (t - 3.0) / 2.0
            - v[2] * t * (t - 1.0) * (t - 3.0) / 2.0
            + v[3] * t * (t - 1.0) * (t - 2.0) / 6.0
    }

    /// Interpolated value, or `None` outside the tabulated range.
    pub fn get(&self, omega: f64) -> Option<f64> {
        let s = omega.ln();
        let (lo, hi) = self.range();
        (s >= lo && s <= hi).then(|| self.interpolate(s))
    }
}

type IndexFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum IndexSource<'a> {
    Model(&'a DistributionModel, Option<Arc<IndexTable>>),
    Prescribed(IndexFn),
}

/// The compact vector field for one value of `l` and one index function.
#[derive(Clone)]
pub struct CompactSystem<'a> {
    l: f64,
    source: IndexSource<'a>,
}

impl<'a> CompactSystem<'a> {
    pub fn new(model: &'a DistributionModel) -> Self {
        Self {
            l: model.l(),
            source: IndexSource::Model(model, None),
        }
    }

    /// Like [`CompactSystem::new`] with `n(ω)` memoized on `[omega_lo, omega_hi]`;
    /// outside that range the index is evaluated directly.
    pub fn with_index_table(model: &'a DistributionModel, omega_lo: f64, omega_hi: f64) -> Result<Self> {
        let table = match model.family() {
            Family::Polytrope { .. } => None,
            _ => Some(Arc::new(IndexTable::build(model, omega_lo, omega_hi)?)),
        };
        Ok(Self {
            l: model.l(),
            source: IndexSource::Model(model, table),
        })
    }

    /// A system driven by a prescribed `n(ω)` instead of a model.
    pub fn prescribed<F>(l: f64, index: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(l > -1.0) {
            return Err(Error::InvalidModel("l must exceed -1".into()));
        }
        Ok(Self {
            l,
            source: IndexSource::Prescribed(Arc::new(index)),
        })
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn model(&self) -> Option<&'a DistributionModel> {
        match &self.source {
            IndexSource::Model(m, _) => Some(m),
            IndexSource::Prescribed(_) => None,
        }
    }

    /// `n(ω)`.
    pub fn index_at(&self, omega: f64) -> Result<f64> {
        match &self.source {
            IndexSource::Model(model, table) => {
                if let Some(v) = table.as_ref().and_then(|t| t.get(omega)) {
                    return Ok(v);
                }
                model.index(omega)
            }
            IndexSource::Prescribed(f) => Ok(f(omega)),
        }
    }

    /// `n` at the compact coordinate `Ω`.
    pub fn index(&self, omega_c: f64) -> Result<f64> {
        self.index_at(omega_c / (1.0 - omega_c))
    }

    /// `(dU/dλ, dQ/dλ, dΩ/dλ)`.
    pub fn rhs(&self, s: &CompactState) -> Result<[f64; 3]> {
        if !(s.omega > 0.0 && s.omega < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "Omega must lie in (0, 1) (got {})",
                s.omega
            )));
        }
        let n = self.index(s.omega)?;
        let [bu, bq, bo] = brackets(self.l, n, s);
        Ok([
            s.u * (1.0 - s.u) * bu,
            s.q * (1.0 - s.q) * bq,
            s.omega * (1.0 - s.omega) * bo,
        ])
    }

    /// Minimum and maximum of `n` sampled on a log grid over `[lo, hi]`.
    pub fn index_range(&self, lo: f64, hi: f64) -> Result<(f64, f64)> {
        const POINTS: usize = 65;
        let (a, b) = (lo.ln(), hi.ln());
        let mut out = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..POINTS {
            let n = self.index_at((a + (b - a) * i as f64 / (POINTS - 1) as f64).exp())?;
            out = (out.0.min(n), out.1.max(n));
        }
        Ok(out)
    }
}

/// The bracketed factors of the three equations, so that
/// `U' = U(1−U)·f_U`, `Q' = Q(1−Q)·f_Q`, `Ω' = Ω(1−Ω)·f_Ω`.
fn brackets(l: f64, n: f64, s: &CompactState) -> [f64; 3] {
    let (u, q) = (s.u, s.q);
    [
        (1.0 - q) * (3.0 + 2.0 * l - (4.0 + 2.0 * l) * u) - (n + l) * q * (1.0 - u),
        (2.0 * u - 1.0) * (1.0 - q) + q * (1.0 - u),
        -q * (1.0 - u),
    ]
}

pub fn rhs_compact(model: &DistributionModel, state: &CompactState) -> Result<[f64; 3]> {
    CompactSystem::new(model).rhs(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedLineName {
    L1,
    L2,
    L3,
    L4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedLineType {
    TransverselyHyperbolicSource,
    TransverselyHyperbolicSaddle,
    DegenerateTripleZero,
}

/// A line of fixed points parallel to the `Ω` axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedLine {
    pub name: FixedLineName,
    pub u: f64,
    pub q: f64,
    pub eigenvalues: [f64; 3],
    pub kind: FixedLineType,
}

pub fn fixed_lines(l: f64) -> Result<Vec<FixedLine>> {
    if !(l > -1.0) {
        return Err(Error::InvalidModel("l must exceed -1".into()));
    }
    use FixedLineName::*;
    use FixedLineType::*;
    let a = 3.0 + 2.0 * l;
    let b = 4.0 + 2.0 * l;
    Ok(vec![
        FixedLine { name: L1, u: 1.0, q: 0.0, eigenvalues: [1.0, 1.0, 0.0], kind: TransverselyHyperbolicSource },
        FixedLine {
            name: L2,
            u: a / b,
            q: 0.0,
            eigenvalues: [-a / b, (1.0 + l) / (2.0 + l), 0.0],
            kind: TransverselyHyperbolicSaddle,
        },
        FixedLine { name: L3, u: 0.0, q: 0.0, eigenvalues: [a, -1.0, 0.0], kind: TransverselyHyperbolicSaddle },
        FixedLine { name: L4, u: 1.0, q: 1.0, eigenvalues: [0.0, 0.0, 0.0], kind: DegenerateTripleZero },
    ])
}

const JACOBIAN_STEP: f64 = 1e-6;

/// Eigenvalues of the central-difference Jacobian, sorted by descending real
/// part.
pub fn jacobian_eigenvalues(system: &CompactSystem, state: &CompactState) -> Result<[Complex<f64>; 3]> {
    let h = JACOBIAN_STEP;
    if state.omega - h <= 0.0 || state.omega + h >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "differencing at Omega = {} crosses the boundary",
            state.omega
        )));
    }
    let mut jac = Matrix3::<f64>::zeros();
    for j in 0..3 {
        let mut plus = *state;
        let mut minus = *state;
        match j {
            0 => {
                plus.u += h;
                minus.u -= h;
            }
            1 => {
                plus.q += h;
                minus.q -= h;
            }
            _ => {
                plus.omega += h;
                minus.omega -= h;
            }
        }
        let fp = system.rhs(&plus)?;
        let fm = system.rhs(&minus)?;
        for i in 0..3 {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    let ev = jac.complex_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2]];
    out.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(out)
}

/// `ln Z` with `Z = (U/(1−U)) (Q/(1−Q))^{3+2l}`.
pub fn monitor_log_z(state: &CompactState, l: f64) -> f64 {
    let logit = |x: f64| x.ln() - (-x).ln_1p();
    logit(state.u) + (3.0 + 2.0 * l) * logit(state.q)
}

/// `d ln Z / dλ = 2(l+1) U (1−Q) + (3+l−n) Q (1−U)`.
pub fn monitor_dlog_z(system: &CompactSystem, state: &CompactState) -> Result<f64> {
    let l = system.l();
    let n = system.index(state.omega)?;
    Ok(2.0 * (l + 1.0) * state.u * (1.0 - state.q) + (3.0 + l - n) * state.q * (1.0 - state.u))
}

/// `dZ / dλ`.
pub fn monitor_dz(system: &CompactSystem, state: &CompactState) -> Result<f64> {
    Ok(monitor_dlog_z(system, state)? * monitor_log_z(state, system.l()).exp())
}

/// `Φ = −½ u^{1/(2(1+l))} q^{(3+2l)/(2(1+l))} (1 − q − u/(3+2l))` in terms of
/// `u = U/(1−U)`, `q = Q/(1−Q)`.
pub fn monitor_phi(state: &CompactState, l: f64) -> f64 {
    if state.u == 0.0 || state.q == 0.0 {
        return 0.0;
    }
    let u = state.u / (1.0 - state.u);
    let q = state.q / (1.0 - state.q);
    let p = 2.0 * (1.0 + l);
    let log_pre = u.ln() / p + (3.0 + 2.0 * l) / p * q.ln();
    -0.5 * log_pre.exp() * (1.0 - q - u / (3.0 + 2.0 * l))
}

/// The faces `U = 1` and `Q = 1` count as members, including their common
/// edge where the defining expression vanishes.
pub fn in_s1(state: &CompactState) -> bool {
    state.u == 1.0
        || state.q == 1.0
        || (2.0 * state.u - 1.0) * (1.0 - state.q) + state.q * (1.0 - state.u) > 0.0
}

/// `Q > max(1/2, sup (3+2l)/((3+2l) + (l+n)))`, the supremum taken over
/// `(0, Ω]` with `Ω` the state's own coordinate. False where `n + l ≤ 0`
/// somewhere on that range.
pub fn in_s2(system: &CompactSystem, state: &CompactState) -> Result<bool> {
    let omega = state.omega / (1.0 - state.omega);
    let (n_min, _) = system.index_range((omega * 1e-12).max(1e-300), omega)?;
    let l = system.l();
    if n_min + l <= 0.0 {
        return Ok(false);
    }
    let a = 3.0 + 2.0 * l;
    Ok(state.q > (a / (a + l + n_min)).max(0.5))
}

/// `Q > 1 − δ` and `U` below the surface
/// `((3+2l)(1−Q) + εQ) / ((4+2l)(1−Q) + εQ)`, on which `dU/dλ ≥ 0` whenever
/// `n + l < −ε`.
pub fn in_s3(system: &CompactSystem, state: &CompactState, delta: f64, eps: f64) -> bool {
    let l = system.l();
    let (u, q) = (state.u, state.q);
    let num = (3.0 + 2.0 * l) * (1.0 - q) + eps * q;
    let den = (4.0 + 2.0 * l) * (1.0 - q) + eps * q;
    q > 1.0 - delta && u < num / den
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitPoint {
    ZeroOneZero,
    OneOneZero,
    L1,
    L2,
    Unresolved,
}

impl LimitPoint {
    pub fn as_str(self) -> &'static str {
        match self {
            LimitPoint::ZeroOneZero => "(0,1,0)",
            LimitPoint::OneOneZero => "(1,1,0)",
            LimitPoint::L1 => "L1",
            LimitPoint::L2 => "L2",
            LimitPoint::Unresolved => "unresolved",
        }
    }

    /// Forward label of a state within `tol` of one of the two points.
    pub fn forward(state: &CompactState, tol: f64) -> Self {
        if state.distance(&CompactState::new(0.0, 1.0, 0.0)) < tol {
            LimitPoint::ZeroOneZero
        } else if state.distance(&CompactState::new(1.0, 1.0, 0.0)) < tol {
            LimitPoint::OneOneZero
        } else {
            LimitPoint::Unresolved
        }
    }

    /// Backward label of a state within `tol` of the line `L1` or `L2`.
    pub fn backward(state: &CompactState, l: f64, tol: f64) -> Self {
        let u2 = (3.0 + 2.0 * l) / (4.0 + 2.0 * l);
        if (state.u - u2).hypot(state.q) < tol {
            LimitPoint::L2
        } else if (state.u - 1.0).hypot(state.q) < tol {
            LimitPoint::L1
        } else {
            LimitPoint::Unresolved
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Stop when `Ω` leaves `(floor, 1 − floor)`.
    pub omega_floor: f64,
    pub lambda_max: f64,
    pub attraction_tol: f64,
    pub direction: Direction,
    pub max_steps: usize,
}

impl Default for CompactSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            omega_floor: 1e-10,
            lambda_max: 1e4,
            attraction_tol: 1e-4,
            direction: Direction::Forward,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    OmegaFloor,
    OmegaCeiling,
    Attracted(LimitPoint),
    LambdaBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSample {
    pub lambda: f64,
    pub state: CompactState,
    /// `ln r`; absolute when the orbit was started from a model, otherwise
    /// relative to the initial point.
    pub log_r: f64,
    pub log_z: f64,
    pub phi: f64,
    pub in_s1: bool,
}

#[derive(Debug, Clone)]
pub struct Orbit {
    pub samples: Vec<OrbitSample>,
    pub stop: StopReason,
    pub direction: Direction,
    l: f64,
    segments: Vec<DenseSegment<4>>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(x: f64) -> f64 {
    x.ln() - (-x).ln_1p()
}

fn unpack(y: &[f64; 4]) -> CompactState {
    CompactState::new(sigmoid(y[0]), sigmoid(y[1]), sigmoid(y[2]))
}

impl Orbit {
    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn last(&self) -> &OrbitSample {
        self.samples.last().expect("orbits hold at least one sample")
    }

    /// Forward limit label of the final sample.
    pub fn forward_label(&self, tol: f64) -> LimitPoint {
        LimitPoint::forward(&self.last().state, tol)
    }

    /// State and `ln r` at parameter `λ` inside the integrated range.
    pub fn at_lambda(&self, lambda: f64) -> Option<(CompactState, f64)> {
        let seg = self.segments.iter().find(|s| s.contains(lambda))?;
        let y = seg.eval(lambda);
        Some((unpack(&y), y[3]))
    }

    /// State where `ln r` takes the given value; `ln r` is monotone along
    /// interior orbits.
    pub fn at_log_r(&self, log_r: f64) -> Option<CompactState> {
        let seg = self.segments.iter().find(|s| {
            let (a, b) = (s.start()[3], s.end()[3]);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            log_r >= lo && log_r <= hi
        })?;
        let (t0, t1) = (seg.t0, seg.t1());
        let lambda = brent(
            |t| Ok(seg.eval(t)[3] - log_r),
            t0.min(t1),
            t0.max(t1),
            1e-14 * t1.abs().max(1.0),
            200,
        )
        .ok()?;
        Some(unpack(&seg.eval(lambda)))
    }
}

/// The compact system in logit coordinates `ln(x/(1−x))` for each of
/// `U, Q, Ω`, plus `ln r`.
struct LogitSystem<'s, 'a> {
    system: &'s CompactSystem<'a>,
}

impl OdeSystem<4> for LogitSystem<'_, '_> {
    fn rhs(&self, _lambda: f64, y: &[f64; 4]) -> Result<[f64; 4]> {
        let s = unpack(y);
        let n = self.system.index(s.omega)?;
        let [bu, bq, bo] = brackets(self.system.l(), n, &s);
        let one_minus_u = sigmoid(-y[0]);
        let one_minus_q = sigmoid(-y[1]);
        Ok([bu, bq, bo, one_minus_u * one_minus_q])
    }
}

fn sample(l: f64, lambda: f64, y: &[f64; 4]) -> OrbitSample {
    let state = unpack(y);
    OrbitSample {
        lambda,
        state,
        log_r: y[3],
        log_z: y[0] + (3.0 + 2.0 * l) * y[1],
        phi: monitor_phi(&state, l),
        in_s1: in_s1(&state),
    }
}

/// Integrates an interior orbit forward or backward in `λ`.
pub fn integrate_compact(
    system: &CompactSystem,
    initial: &CompactState,
    settings: &CompactSettings,
) -> Result<Orbit> {
    if !initial.is_interior() {
        return Err(Error::BoundaryState);
    }
    if !(settings.rel_tol > 0.0 && settings.abs_tol > 0.0 && settings.lambda_max > 0.0) {
        return Err(Error::InvalidArgument("compact tolerances and lambda_max must be positive".into()));
    }
    let log_r0 = match system.model() {
        Some(model) => from_compact(model, initial)?.r.ln(),
        None => 0.0,
    };
    let l = system.l();
    let ode = LogitSystem { system };
    let y0 = [logit(initial.u), logit(initial.q), logit(initial.omega), log_r0];
    let sign = match settings.direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let tol = Tolerance::uniform(settings.rel_tol, settings.abs_tol);
    let opts = StepperOptions {
        max_steps: settings.max_steps,
        ..StepperOptions::default()
    };
    let mut stepper = Dopri5::new(&ode, 0.0, y0, sign, tol, opts)?;
    let bound = sign * settings.lambda_max;
    let mut samples = vec![sample(l, 0.0, &y0)];
    let mut segments = Vec::new();
    let floor = settings.omega_floor;
    let stop = loop {
        if sign * (stepper.t() - bound) >= 0.0 {
            break StopReason::LambdaBudget;
        }
        let seg = stepper.step(bound)?;
        let y = seg.end();
        let s = sample(l, seg.t1(), &y);
        segments.push(seg);
        samples.push(s);
        let st = s.state;
        match settings.direction {
            Direction::Forward => {
                let label = LimitPoint::forward(&st, settings.attraction_tol);
                if label != LimitPoint::Unresolved {
                    break StopReason::Attracted(label);
                }
            }
            Direction::Backward => {
                let label = LimitPoint::backward(&st, l, settings.attraction_tol);
                if label != LimitPoint::Unresolved {
                    break StopReason::Attracted(label);
                }
            }
        }
        if st.omega < floor {
            break StopReason::OmegaFloor;
        }
        if st.omega > 1.0 - floor {
            break StopReason::OmegaCeiling;
        }
    };
    Ok(Orbit {
        samples,
        stop,
        direction: settings.direction,
        l,
        segments,
    })
}
