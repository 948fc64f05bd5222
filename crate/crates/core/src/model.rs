//! Distribution-function families `f(E, L²) = φ(E) L^{2l}` and the integrals
//! through which density, radial pressure and the polytropic index reduce.
//!
//! All of these go through the kernel
//!
//! ```text
//! g_m(ω) = ∫₀^ω φ(E) (ω − E)^m dE = ω^{m+1} ∫₀¹ φ(ωx) (1 − x)^m dx
//! ```
//!
//! evaluated with Gauss-Jacobi panels that carry the `x^k` low-energy weight
//! declared in the model's [`Regularity`] and the `(1 − x)^m` weight exactly.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_weighted, tanh_sinh, WeightedOptions};

/// Default relative tolerance of every `g_m` quadrature.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// Below this `ω` the index function is refused.
pub const OMEGA_INDEX_FLOOR: f64 = 1e-300;

/// Low-energy behaviour of `φ`: `φ(E) ≤ c E^k`, `φ'(E) ≤ c E^{k'}` near 0,
/// optionally a Hoelder index of `E φ(E)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularity {
    pub k: f64,
    pub k_prime: f64,
    pub holder_index: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Linear,
    MonotoneCubic,
}

/// Sampled `φ(E)` on an increasing energy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    energies: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    interpolation: Interpolation,
}

impl Table {
    pub fn new(energies: Vec<f64>, values: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        if energies.len() != values.len() || energies.len() < 2 {
            return Err(Error::InvalidModel(
                "table needs at least two (E, phi) rows of equal length".into(),
            ));
        }
        if energies.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::InvalidModel("table energies must be finite and >= 0".into()));
        }
        if energies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidModel("table energies must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidModel("table values must be finite and >= 0".into()));
        }
        let slopes = match interpolation {
            Interpolation::Linear => Vec::new(),
            Interpolation::MonotoneCubic => pchip_slopes(&energies, &values),
        };
        Ok(Self {
            energies,
            values,
            slopes,
            interpolation,
        })
    }

    /// Two-column CSV `E, phi`; a non-numeric first row is taken as a header.
    pub fn from_csv_path(path: &Path, interpolation: Interpolation) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)?;
        let mut energies = Vec::new();
        let mut values = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() < 2 {
                return Err(Error::InvalidModel(format!(
                    "{}: row {} has fewer than two columns",
                    path.display(),
                    row + 1
                )));
            }
            match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
                (Ok(e), Ok(v)) => {
                    energies.push(e);
                    values.push(v);
                }
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::InvalidModel(format!(
                        "{}: row {} is not numeric",
                        path.display(),
                        row + 1
                    )))
                }
            }
        }
        Self::new(energies, values, interpolation)
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    fn eval(&self, e: f64) -> Result<f64> {
        let lo = self.energies[0];
        let hi = *self.energies.last().expect("non-empty");
        if e < lo || e > hi {
            return Err(Error::Extrapolation { energy: e, lo, hi });
        }
        let i = match self.energies.partition_point(|&x| x <= e) {
            0 => 0,
            p => (p - 1).min(self.energies.len() - 2),
        };
        let (x0, x1) = (self.energies[i], self.energies[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let h = x1 - x0;
        let t = (e - x0) / h;
        let v = match self.interpolation {
            Interpolation::Linear => y0 + t * (y1 - y0),
            Interpolation::MonotoneCubic => {
                let (d0, d1) = (self.slopes[i], self.slopes[i + 1]);
                let t2 = t * t;
                let t3 = t2 * t;
                (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                    + (t3 - 2.0 * t2 + t) * h * d0
                    + (-2.0 * t3 + 3.0 * t2) * y1
                    + (t3 - t2) * h * d1
            }
        };
        Ok(v.max(0.0))
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    let edge = |h0: f64, h1: f64, m0: f64, m1: f64| -> f64 {
        let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
        if d.signum() != m0.signum() || m0 == 0.0 {
            0.0
        } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
            3.0 * m0
        } else {
            d
        }
    };
    d[0] = edge(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = edge(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// The energy dependence `φ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `φ(E) = φ₋ E^{n − 3/2}`.
    Polytrope { n: f64, phi_minus: f64 },
    /// `φ(E) = e^E − Σ_{j ≤ p} E^j / j!`; `p = 0` is the King-type lowered
    /// exponential, `p = 1` the Wilson model.
    TruncatedExponential { p: u32 },
    Tabulated(Table),
}

/// A validated distribution-function model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionModel {
    l: f64,
    family: Family,
    regularity: Regularity,
    c_l: f64,
    quad_tol: f64,
}

/// Result of one `g_m(ω)` evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GEvaluation {
    pub m: f64,
    pub omega: f64,
    pub value: f64,
    pub derivative: Option<f64>,
    pub estimated_error: f64,
}

fn factorial(j: u32) -> f64 {
    (1..=j).map(f64::from).product()
}

impl DistributionModel {
    pub fn polytrope(n: f64, phi_minus: f64, l: f64) -> Result<Self> {
        Self::new(l, Family::Polytrope { n, phi_minus }, None)
    }

    pub fn truncated_exponential(p: u32, l: f64) -> Result<Self> {
        Self::new(l, Family::TruncatedExponential { p }, None)
    }

    /// King-type lowered exponential, `φ = e^E − 1`.
    pub fn king(l: f64) -> Result<Self> {
        Self::truncated_exponential(0, l)
    }

    /// Wilson-type model, `φ = e^E − 1 − E`.
    pub fn wilson(l: f64) -> Result<Self> {
        Self::truncated_exponential(1, l)
    }

    pub fn tabulated(table: Table, l: f64, regularity: Regularity) -> Result<Self> {
        Self::new(l, Family::Tabulated(table), Some(regularity))
    }

    /// Validating constructor. Built-in families derive their regularity
    /// metadata; tabulated models must declare it.
    pub fn new(l: f64, family: Family, regularity: Option<Regularity>) -> Result<Self> {
        if !(l > -1.0) || !l.is_finite() {
            return Err(Error::InvalidModel(format!("l must exceed -1 (got {l})")));
        }
        let derived = match &family {
            Family::Polytrope { n, phi_minus } => {
                if !(*n > 0.5) || !n.is_finite() {
                    return Err(Error::InvalidModel(format!("polytrope needs n > 1/2 (got {n})")));
                }
                if !(*phi_minus > 0.0) || !phi_minus.is_finite() {
                    return Err(Error::InvalidModel(format!(
                        "polytrope needs phi_minus > 0 (got {phi_minus})"
                    )));
                }
                Some(Regularity {
                    k: n - 1.5,
                    k_prime: n - 2.5,
                    holder_index: Some((n - 0.5).min(1.0)),
                })
            }
            Family::TruncatedExponential { p } => Some(Regularity {
                k: f64::from(*p) + 1.0,
                k_prime: f64::from(*p),
                holder_index: Some(1.0),
            }),
            Family::Tabulated(_) => None,
        };
        let regularity = match (derived, regularity) {
            (_, Some(r)) => r,
            (Some(r), None) => r,
            (None, None) => {
                return Err(Error::InvalidModel(
                    "tabulated model requires regularity metadata (k)".into(),
                ))
            }
        };
        if !(regularity.k > -1.0) {
            return Err(Error::InvalidModel(format!(
                "regularity exponent k must exceed -1 (got {})",
                regularity.k
            )));
        }
        if !(regularity.k_prime > -2.0) {
            return Err(Error::InvalidModel(format!(
                "regularity exponent k' must exceed -2 (got {})",
                regularity.k_prime
            )));
        }
        if l < -0.5 {
            let need = -l - 0.5;
            match regularity.holder_index {
                Some(h) if h > need => {}
                other => {
                    return Err(Error::InvalidModel(format!(
                        "l = {l} < -1/2 needs a Hoelder index of E*phi above {need} (got {other:?})"
                    )))
                }
            }
        }
        let c_l = 2f64.powf(l + 1.5) * PI.powf(1.5) * (ln_gamma(l + 1.0) - ln_gamma(l + 1.5)).exp();
        Ok(Self {
            l,
            family,
            regularity,
            c_l,
            quad_tol: DEFAULT_QUAD_TOL,
        })
    }

    pub fn with_quadrature_tolerance(mut self, tol: f64) -> Self {
        self.quad_tol = tol;
        self
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    pub fn quadrature_tolerance(&self) -> f64 {
        self.quad_tol
    }

    /// `C_l = 2^{l+3/2} π^{3/2} Γ(l+1) / Γ(l+3/2)`.
    pub fn c_l(&self) -> f64 {
        self.c_l
    }

    /// `ρ₋` for polytropes: `ρ = ρ₋ r^{2l} ω^{n+l}`.
    pub fn polytrope_density_coefficient(&self) -> Option<f64> {
        match self.family {
            Family::Polytrope { n, phi_minus } => {
                let l = self.l;
                Some(
                    phi_minus
                        * 2f64.powf(l + 1.5)
                        * PI.powf(1.5)
                        * (ln_gamma(l + 1.0) + ln_gamma(n - 0.5) - ln_gamma(n + l + 1.0)).exp(),
                )
            }
            _ => None,
        }
    }

    /// `φ(E)`; zero for `E ≤ 0`.
    pub fn phi(&self, energy: f64) -> Result<f64> {
        if energy.is_nan() {
            return Err(Error::InvalidArgument("energy is NaN".into()));
        }
        if energy <= 0.0 {
            return Ok(0.0);
        }
        match &self.family {
            Family::Polytrope { n, phi_minus } => Ok(phi_minus * energy.powf(n - 1.5)),
            Family::TruncatedExponential { p } => {
                Ok(self.phi_scaled(energy)? * energy.powi(*p as i32 + 1))
            }
            Family::Tabulated(table) => table.eval(energy),
        }
    }

    /// `φ(E) / E^k` for `E > 0`, bounded near 0 by the regularity assumption.
    pub fn phi_scaled(&self, energy: f64) -> Result<f64> {
        match &self.family {
            Family::Polytrope { phi_minus, .. } => Ok(*phi_minus),
            Family::TruncatedExponential { p } => {
                let p = *p;
                if energy < 1.0 + f64::from(p) {
                    // Σ_{j>p} E^{j-p-1}/j!
                    let mut term = 1.0 / factorial(p + 1);
                    let mut sum = term;
                    let mut j = p + 1;
                    loop {
                        j += 1;
                        term *= energy / f64::from(j);
                        sum += term;
                        if term <= 1e-17 * sum {
                            break;
                        }
                    }
                    Ok(sum)
                } else {
                    let mut poly = 0.0;
                    let mut term = 1.0;
                    for j in 0..=p {
                        if j > 0 {
                            term *= energy / f64::from(j);
                        }
                        poly += term;
                    }
                    Ok((energy.exp() - poly) / energy.powi(p as i32 + 1))
                }
            }
            Family::Tabulated(table) => Ok(table.eval(energy)? / energy.powf(self.regularity.k)),
        }
    }

    fn breakpoints(&self, map: impl Fn(f64) -> f64) -> Vec<f64> {
        match &self.family {
            Family::Tabulated(table) => table.energies.iter().map(|&e| map(e)).collect(),
            _ => Vec::new(),
        }
    }

    fn check_m_omega(m: f64, omega: f64) -> Result<()> {
        if !(m > -1.0) {
            return Err(Error::InvalidArgument(format!("g_m needs m > -1 (got {m})")));
        }
        if !(omega >= 0.0) || !omega.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "g_m needs finite omega >= 0 (got {omega})"
            )));
        }
        Ok(())
    }

    /// `g_m(ω)`; closed form for polytropes, quadrature otherwise.
    pub fn g(&self, m: f64, omega: f64) -> Result<GEvaluation> {
        Self::check_m_omega(m, omega)?;
        match self.family {
            Family::Polytrope { n, phi_minus } => {
                let value = if omega == 0.0 {
                    0.0
                } else {
                    phi_minus
                        * omega.powf(n + m - 0.5)
                        * (ln_gamma(n - 0.5) + ln_gamma(m + 1.0) - ln_gamma(n + m + 0.5)).exp()
                };
                Ok(GEvaluation {
                    m,
                    omega,
                    value,
                    derivative: None,
                    estimated_error: 0.0,
                })
            }
            _ => self.g_quadrature(m, omega),
        }
    }

    /// `g_m(ω)` by Gauss-Jacobi quadrature regardless of family.
    pub fn g_quadrature(&self, m: f64, omega: f64) -> Result<GEvaluation> {
        Self::check_m_omega(m, omega)?;
        if omega == 0.0 {
            return Ok(GEvaluation {
                m,
                omega,
                value: 0.0,
                derivative: None,
                estimated_error: 0.0,
            });
        }
        let k = self.regularity.k;
        let opts = WeightedOptions {
            rel_tol: self.quad_tol,
            breakpoints: self.breakpoints(|e| e / omega),
        };
        let est = integrate_weighted(k, m, |x| self.phi_scaled(omega * x), &opts)?;
        let value = omega.powf(m + 1.0 + k) * est.value;
        if !value.is_finite() {
            return Err(Error::Quadrature {
                tol: self.quad_tol,
                estimate: f64::INFINITY,
            });
        }
        Ok(GEvaluation {
            m,
            omega,
            value,
            derivative: None,
            estimated_error: est.rel_error(),
        })
    }

    /// `g_m(ω)` together with `d g_m / dω`.
    pub fn g_with_derivative(&self, m: f64, omega: f64) -> Result<GEvaluation> {
        let mut eval = self.g(m, omega)?;
        eval.derivative = Some(self.dg(m, omega)?);
        Ok(eval)
    }

    /// `d g_m / dω` from the identities
    /// `m g_{m−1}` (m > 0), `φ(ω)` (m = 0) and, for `−1 < m < 0`,
    /// `ω^m φ(ω) − m ω^m ∫₀¹ (φ(ω) − φ(ωx)) (1 − x)^{m−1} dx`.
    pub fn dg(&self, m: f64, omega: f64) -> Result<f64> {
        Self::check_m_omega(m, omega)?;
        if omega == 0.0 {
            return Err(Error::InvalidArgument("d g_m/d omega needs omega > 0".into()));
        }
        if m > 0.0 {
            return Ok(m * self.g(m - 1.0, omega)?.value);
        }
        if m == 0.0 {
            return self.phi(omega);
        }
        let declared = self.regularity.holder_index;
        match declared {
            Some(h) if h > -m => {}
            _ => {
                return Err(Error::MissingHolder {
                    m,
                    required: -m,
                    declared,
                })
            }
        }
        let phi_w = self.phi(omega)?;
        let k = self.regularity.k;
        // x in [0, 1/2]: analytic part minus an x^k-weighted integral
        let opts_left = WeightedOptions {
            rel_tol: self.quad_tol,
            breakpoints: self.breakpoints(|e| 2.0 * e / omega),
        };
        let left = integrate_weighted(
            k,
            0.0,
            |y| Ok(self.phi_scaled(0.5 * omega * y)? * (1.0 - 0.5 * y).powf(m - 1.0)),
            &opts_left,
        )?;
        let left = phi_w * (1.0 - 2f64.powf(-m)) / m - 0.5 * (0.5 * omega).powf(k) * left.value;
        // x in [1/2, 1]: difference quotient against the (1 - y)^m weight
        let opts_right = WeightedOptions {
            rel_tol: self.quad_tol,
            breakpoints: self.breakpoints(|e| 2.0 * e / omega - 1.0),
        };
        let right = integrate_weighted(
            0.0,
            m,
            |y| {
                let inner = self.phi(0.5 * omega * (1.0 + y))?;
                Ok((phi_w - inner) / (1.0 - y))
            },
            &opts_right,
        )?;
        let right = 2f64.powf(-m) * right.value;
        let wm = omega.powf(m);
        Ok(wm * phi_w - m * wm * (left + right))
    }

    /// Polytropic index `n(ω) = −l + d log g_{l+1/2} / d log ω`.
    pub fn index(&self, omega: f64) -> Result<f64> {
        if !(omega >= OMEGA_INDEX_FLOOR) || !omega.is_finite() {
            return Err(Error::UndefinedIndex {
                omega,
                reason: format!("omega must be finite and at least {OMEGA_INDEX_FLOOR:e}"),
            });
        }
        let m = self.l + 0.5;
        let g = self.g(m, omega)?.value;
        if !(g > 1e-300) || !g.is_finite() {
            return Err(Error::UndefinedIndex {
                omega,
                reason: format!("g_{m} = {g:e} is below the numeric floor or not finite"),
            });
        }
        let dg = self.dg(m, omega)?;
        let n = -self.l + omega * dg / g;
        if !n.is_finite() {
            return Err(Error::UndefinedIndex {
                omega,
                reason: "non-finite logarithmic derivative".into(),
            });
        }
        Ok(n)
    }

    /// Mass density `ρ = C_l r^{2l} g_{l+1/2}(ω)`; zero in vacuum (`ω ≤ 0`).
    pub fn density(&self, r: f64, omega: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("density needs r > 0 (got {r})")));
        }
        if omega.is_nan() {
            return Err(Error::InvalidArgument("omega is NaN".into()));
        }
        if omega <= 0.0 {
            return Ok(0.0);
        }
        Ok(self.c_l * r.powf(2.0 * self.l) * self.g(self.l + 0.5, omega)?.value)
    }

    /// Radial pressure `C_l r^{2l} g_{l+3/2}(ω) / (l + 3/2)`.
    pub fn radial_pressure(&self, r: f64, omega: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("pressure needs r > 0 (got {r})")));
        }
        if omega.is_nan() {
            return Err(Error::InvalidArgument("omega is NaN".into()));
        }
        if omega <= 0.0 {
            return Ok(0.0);
        }
        let m = self.l + 1.5;
        Ok(self.c_l * r.powf(2.0 * self.l) * self.g(m, omega)?.value / m)
    }

    /// Density from the velocity-space double integral
    /// `ρ = (2π/r²) ∫₀^ω ∫₀^{L²max} φ(E) L^{2l} |v_r|⁻¹ dL² dE`,
    /// `L²max = 2r²(ω − E)`, by nested tanh-sinh quadrature.
    pub fn density_bruteforce(&self, r: f64, omega: f64) -> Result<f64> {
        if !(r > 0.0) || !(omega > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "brute-force density needs r > 0 and omega > 0 (got {r}, {omega})"
            )));
        }
        let l = self.l;
        let r2 = r * r;
        let outer = tanh_sinh(
            0.0,
            omega,
            |energy, _, gap| {
                let phi = self.phi(energy)?;
                if phi == 0.0 {
                    return Ok(0.0);
                }
                let l2_max = 2.0 * r2 * gap;
                let inner = tanh_sinh(
                    0.0,
                    l2_max,
                    |_, l2, rest| {
                        // v_r² = 2(ω − E) − L²/r² = (L²max − L²)/r²
                        Ok(l2.powf(l) * (rest / r2).powf(-0.5))
                    },
                    1e-12,
                )?;
                Ok(phi * inner.value)
            },
            1e-11,
        )?;
        Ok(2.0 * PI / r2 * outer.value)
    }

    /// Low-ω limit `n₀` of the index function, estimated at `ω = 1e−8`.
    pub fn low_omega_index(&self) -> Result<f64> {
        self.index(1e-8)
    }

    /// Short human-readable family label.
    pub fn label(&self) -> String {
        match &self.family {
            Family::Polytrope { n, phi_minus } => {
                format!("polytrope(n={n}, phi_minus={phi_minus}, l={})", self.l)
            }
            Family::TruncatedExponential { p } => {
                format!("truncated_exponential(p={p}, l={})", self.l)
            }
            Family::Tabulated(t) => format!("tabulated({} rows, l={})", t.energies.len(), self.l),
        }
    }
}
