//! Static field equations in physical variables,
//! `dm/dr = 4π r² ρ(r, ω)`, `dω/dr = −m / r²`, integrated outward from a
//! regular centre until the relative potential vanishes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DistributionModel;
use crate::ode::{DenseSegment, Dopri5, OdeSystem, StepperOptions, Tolerance};
use crate::roots::brent;

/// Point `(r, m, ω)` of a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalState {
    pub r: f64,
    pub m: f64,
    pub omega: f64,
}

/// A length given either in natural units of the solution or absolutely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthSpec {
    Natural(f64),
    Absolute(f64),
}

impl LengthSpec {
    pub fn resolve(self, natural_length: f64) -> f64 {
        match self {
            LengthSpec::Natural(x) => x * natural_length,
            LengthSpec::Absolute(x) => x,
        }
    }

    fn value(self) -> f64 {
        match self {
            LengthSpec::Natural(x) | LengthSpec::Absolute(x) => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSettings {
    pub rel_tol: f64,
    /// Absolute tolerance on `ω / ω_c`.
    pub abs_tol: f64,
    pub r_max: LengthSpec,
    /// `None` means `1e-12 · ω_c`.
    pub omega_floor: Option<f64>,
    pub startup_radius: LengthSpec,
    /// Relative mass growth over the last decade in `r` below which an
    /// unbounded solution counts as having finite mass.
    pub mass_convergence_tol: f64,
    pub max_steps: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            r_max: LengthSpec::Natural(1e6),
            omega_floor: None,
            startup_radius: LengthSpec::Natural(1e-6),
            mass_convergence_tol: 1e-6,
            max_steps: 500_000,
        }
    }
}

impl SolveSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("r_max", self.r_max.value()),
            ("startup_radius", self.startup_radius.value()),
            ("mass_convergence_tol", self.mass_convergence_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive (got {v})")));
            }
        }
        if let Some(f) = self.omega_floor {
            if !(f > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "omega_floor must be positive (got {f})"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    FiniteRadius,
    InfiniteFiniteMass,
    InfiniteUndetermined,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::FiniteRadius => "finite_radius",
            Classification::InfiniteFiniteMass => "infinite_finite_mass",
            Classification::InfiniteUndetermined => "infinite_undetermined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Radius {
    Finite(f64),
    Infinite,
}

impl Radius {
    pub fn finite(self) -> Option<f64> {
        match self {
            Radius::Finite(r) => Some(r),
            Radius::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub natural_length: f64,
    pub startup_radius: f64,
    pub r_max: f64,
    pub omega_floor: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evals: usize,
    /// `m(r_max) / m(r_max / 10) − 1` for unbounded solutions.
    pub mass_growth_last_decade: Option<f64>,
}

/// A solved equilibrium.
#[derive(Debug, Clone)]
pub struct SolutionProfile {
    pub model_label: String,
    pub omega_c: f64,
    pub samples: Vec<PhysicalState>,
    pub radius: Radius,
    pub total_mass: f64,
    pub classification: Classification,
    pub diagnostics: Diagnostics,
    segments: Vec<DenseSegment<2>>,
}

impl SolutionProfile {
    /// Interpolated state at radius `r` inside the integrated range.
    pub fn state_at(&self, r: f64) -> Option<PhysicalState> {
        if !(r > 0.0) {
            return None;
        }
        let first = self.samples.first()?;
        let last = self.samples.last()?;
        if r < first.r || r > last.r {
            return None;
        }
        let xi = r.ln();
        let idx = self
            .segments
            .partition_point(|s| s.t1() < xi)
            .min(self.segments.len().checked_sub(1)?);
        let seg = &self.segments[idx];
        let y = seg.eval(xi.clamp(seg.t0, seg.t1()));
        Some(PhysicalState {
            r,
            m: y[0].exp(),
            omega: y[1] * self.omega_c,
        })
    }
}

/// `dm/dr` and `dω/dr`; matter vanishes where `ω ≤ 0`.
pub fn rhs_physical(model: &DistributionModel, state: &PhysicalState) -> Result<(f64, f64)> {
    if !(state.r > 0.0) {
        return Err(Error::InvalidArgument(format!("rhs needs r > 0 (got {})", state.r)));
    }
    let rho = model.density(state.r, state.omega.max(0.0))?;
    Ok((
        4.0 * PI * state.r * state.r * rho,
        -state.m / (state.r * state.r),
    ))
}

/// `(ω_c / (4π C_l g_{l+1/2}(ω_c)))^{1/(2+2l)}`.
pub fn natural_length(model: &DistributionModel, omega_c: f64) -> Result<f64> {
    if !(omega_c > 0.0) {
        return Err(Error::InvalidArgument(format!("omega_c must be positive (got {omega_c})")));
    }
    let g = model.g(model.l() + 0.5, omega_c)?.value;
    if !(g > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "central density vanishes at omega_c = {omega_c}"
        )));
    }
    Ok((omega_c / (4.0 * PI * model.c_l() * g)).powf(1.0 / (2.0 + 2.0 * model.l())))
}

/// Regular expansion about the centre through second order:
/// with `a = 4π C_l g(ω_c)` and `b = 4π C_l g'(ω_c)`,
///
/// ```text
/// m = a r^{3+2l}/(3+2l) − a b r^{5+4l} / ((3+2l)(2+2l)(5+4l))
/// ω = ω_c − a r^{2+2l}/((3+2l)(2+2l)) + a b r^{4+4l} / ((3+2l)(2+2l)(5+4l)(4+4l))
/// ```
pub fn center_series(model: &DistributionModel, omega_c: f64, r: f64) -> Result<PhysicalState> {
    if !(omega_c > 0.0) {
        return Err(Error::InvalidArgument(format!("omega_c must be positive (got {omega_c})")));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("series radius must be positive (got {r})")));
    }
    let l = model.l();
    let ev = model.g_with_derivative(l + 0.5, omega_c)?;
    let a = 4.0 * PI * model.c_l() * ev.value;
    let b = 4.0 * PI * model.c_l() * ev.derivative.unwrap_or(0.0);
    let p1 = 3.0 + 2.0 * l;
    let p2 = 2.0 + 2.0 * l;
    let p3 = 5.0 + 4.0 * l;
    let p4 = 4.0 + 4.0 * l;
    let m = a * r.powf(p1) / p1 - a * b * r.powf(p3) / (p1 * p2 * p3);
    let omega = omega_c - a * r.powf(p2) / (p1 * p2) + a * b * r.powf(p4) / (p1 * p2 * p3 * p4);
    Ok(PhysicalState { r, m, omega })
}

/// The field equations in `ξ = ln r` with state `(ln m, ω/ω_c)`.
struct LogSystem<'a> {
    model: &'a DistributionModel,
    omega_c: f64,
}

impl OdeSystem<2> for LogSystem<'_> {
    fn rhs(&self, xi: f64, y: &[f64; 2]) -> Result<[f64; 2]> {
        let r = xi.exp();
        let m = y[0].exp();
        let omega = y[1] * self.omega_c;
        let rho = self.model.density(r, omega.max(0.0))?;
        Ok([4.0 * PI * r * r * r * rho / m, -m / (r * self.omega_c)])
    }
}

fn tolerance(settings: &SolveSettings) -> Tolerance<2> {
    Tolerance {
        rtol: [0.0, settings.rel_tol],
        atol: [settings.rel_tol, settings.abs_tol],
    }
}

/// Integrates a regular solution with central potential `ω_c`.
pub fn integrate_physical(
    model: &DistributionModel,
    omega_c: f64,
    settings: &SolveSettings,
) -> Result<SolutionProfile> {
    settings.validate()?;
    let length = natural_length(model, omega_c)?;
    let r0 = settings.startup_radius.resolve(length);
    let r_max = settings.r_max.resolve(length);
    if !(r0 < r_max) {
        return Err(Error::InvalidArgument(format!(
            "startup radius {r0:e} must be below r_max {r_max:e}"
        )));
    }
    let omega_floor = settings.omega_floor.unwrap_or(1e-12 * omega_c);
    let w_floor = omega_floor / omega_c;
    let start = center_series(model, omega_c, r0)?;
    if !(start.m > 0.0) || !(start.omega > omega_floor) {
        return Err(Error::InvalidArgument(
            "startup radius too large for the centre expansion".into(),
        ));
    }

    let sys = LogSystem { model, omega_c };
    let xi_max = r_max.ln();
    let tol = tolerance(settings);
    let opts = StepperOptions {
        max_steps: settings.max_steps,
        ..StepperOptions::default()
    };
    let mut stepper = Dopri5::new(&sys, r0.ln(), [start.m.ln(), start.omega / omega_c], 1.0, tol, opts.clone())?;

    let mut samples = vec![start];
    let mut segments: Vec<DenseSegment<2>> = Vec::new();
    let mut boundary = None;
    while stepper.t() < xi_max {
        let seg = stepper.step(xi_max)?;
        let end = seg.end();
        if !end.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: seg.t1() });
        }
        if end[1] <= w_floor {
            let xi_root = brent(
                |xi| Ok(seg.eval(xi)[1] - w_floor),
                seg.t0,
                seg.t1(),
                1e-15 * seg.t1().abs().max(1.0),
                200,
            )?;
            boundary = Some((seg.clone(), xi_root));
            segments.push(seg);
            break;
        }
        samples.push(PhysicalState {
            r: seg.t1().exp(),
            m: end[0].exp(),
            omega: end[1] * omega_c,
        });
        segments.push(seg);
    }

    let mut diagnostics = Diagnostics {
        natural_length: length,
        startup_radius: r0,
        r_max,
        omega_floor,
        accepted_steps: stepper.accepted,
        rejected_steps: stepper.rejected,
        rhs_evals: stepper.rhs_evals,
        mass_growth_last_decade: None,
    };

    if let Some((seg, xi_root)) = boundary {
        // re-integrate the final partial step exactly, then one Newton correction
        let (mut xi_b, mut y_b) = (xi_root, seg.eval(xi_root));
        if xi_root > seg.t0 {
            let mut last =
                Dopri5::new(&sys, seg.t0, seg.start(), 1.0, tol, opts)?;
            while last.t() < xi_root {
                last.step(xi_root)?;
            }
            y_b = *last.y();
            let rate = sys.rhs(xi_root, &y_b)?;
            if rate[1] < 0.0 {
                let dxi = -(y_b[1] - w_floor) / rate[1];
                xi_b = xi_root + dxi;
                y_b[0] += dxi * rate[0];
                y_b[1] = w_floor;
            }
            diagnostics.rhs_evals += last.rhs_evals;
        }
        let radius = xi_b.exp();
        let mass = y_b[0].exp();
        let prev_r = samples.last().map(|s| s.r).unwrap_or(0.0);
        if radius > prev_r {
            samples.push(PhysicalState {
                r: radius,
                m: mass,
                omega: (y_b[1] * omega_c).min(omega_floor),
            });
        }
        return Ok(SolutionProfile {
            model_label: model.label(),
            omega_c,
            samples,
            radius: Radius::Finite(radius),
            total_mass: mass,
            classification: Classification::FiniteRadius,
            diagnostics,
            segments,
        });
    }

    let mut profile = SolutionProfile {
        model_label: model.label(),
        omega_c,
        samples,
        radius: Radius::Infinite,
        total_mass: 0.0,
        classification: Classification::InfiniteUndetermined,
        diagnostics,
        segments,
    };
    let m_end = profile.samples.last().expect("non-empty").m;
    profile.total_mass = m_end;
    let growth = profile
        .state_at(r_max / 10.0)
        .map(|s| m_end / s.m - 1.0);
    profile.diagnostics.mass_growth_last_decade = growth;
    if let Some(g) = growth {
        if g.abs() < settings.mass_convergence_tol {
            profile.classification = Classification::InfiniteFiniteMass;
        }
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lane_emden_1() -> DistributionModel {
        DistributionModel::polytrope(1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let model = lane_emden_1();
        let (dm, dw) = rhs_physical(&model, &PhysicalState { r: 1.0, m: 0.0, omega: 0.5 }).unwrap();
        assert_eq!(dw, 0.0);
        assert!(dm > 0.0);
        let (dm, _) = rhs_physical(&model, &PhysicalState { r: 1.0, m: 1.0, omega: -0.1 }).unwrap();
        assert_eq!(dm, 0.0);
        let rho_minus = 2f64.powf(1.5) * PI * PI;
        let (dm, dw) = rhs_physical(&model, &PhysicalState { r: 1.0, m: 1.0, omega: 0.5 }).unwrap();
        assert!((dw + 1.0).abs() < 1e-15);
        assert!((dm / (4.0 * PI * rho_minus * 0.5) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn series_matches_sinc_solution() {
        let model = lane_emden_1();
        let rho_minus = 2f64.powf(1.5) * PI * PI;
        let k = (4.0 * PI * rho_minus).sqrt();
        let r = 1e-3;
        let s = center_series(&model, 1.0, r).unwrap();
        let exact = (k * r).sin() / (k * r);
        // truncation error of the series is O((kr)^6)
        assert!((s.omega - exact).abs() < 1e-12, "{}", s.omega - exact);
        let m_exact = -r * r * ((k * r * (k * r).cos() - (k * r).sin()) / (k * r * r));
        assert!((s.m / m_exact - 1.0).abs() < 1e-9);
    }

    #[test]
    fn series_rejects_bad_input() {
        let model = lane_emden_1();
        assert!(center_series(&model, 0.0, 1e-3).is_err());
        assert!(center_series(&model, 1.0, 0.0).is_err());
    }

    #[test]
    fn settings_validation() {
        let model = lane_emden_1();
        let bad = SolveSettings {
            rel_tol: -1.0,
            ..SolveSettings::default()
        };
        assert!(integrate_physical(&model, 1.0, &bad).is_err());
        let inverted = SolveSettings {
            startup_radius: LengthSpec::Natural(10.0),
            r_max: LengthSpec::Natural(1.0),
            ..SolveSettings::default()
        };
        assert!(integrate_physical(&model, 1.0, &inverted).is_err());
        assert!(integrate_physical(&model, -1.0, &SolveSettings::default()).is_err());
    }

    #[test]
    fn lane_emden_radius_and_monotonicity() {
        let model = lane_emden_1();
        let profile = integrate_physical(&model, 1.0, &SolveSettings::default()).unwrap();
        let rho_minus = 2f64.powf(1.5) * PI * PI;
        let radius = PI / (4.0 * PI * rho_minus).sqrt();
        let r = profile.radius.finite().unwrap();
        assert!((r / radius - 1.0).abs() < 1e-8);
        assert_eq!(profile.classification, Classification::FiniteRadius);
        for w in profile.samples.windows(2) {
            assert!(w[1].r > w[0].r);
            assert!(w[1].m > w[0].m);
            assert!(w[1].omega < w[0].omega);
        }
        let last = profile.samples.last().unwrap();
        assert!(last.omega <= profile.diagnostics.omega_floor);
        assert_eq!(last.m, profile.total_mass);
        // dense output inside the profile
        let mid = profile.state_at(0.5 * r).unwrap();
        let k = (4.0 * PI * rho_minus).sqrt();
        let x = k * 0.5 * r;
        assert!((mid.omega - x.sin() / x).abs() < 1e-9);
    }
}
