//! Quadrature on the unit interval with algebraic endpoint weights.
//!
//! [`integrate_weighted`] evaluates `∫₀¹ tᵃ (1−t)ᵇ f(t) dt` for smooth `f` by
//! Gauss-Jacobi panels: the panel touching `t = 0` carries the `tᵃ` weight,
//! the panel touching `t = 1` carries `(1−t)ᵇ`, interior panels are plain
//! Gauss-Legendre. Panels are bisected until the difference between a 20-
//! and a 30-point rule meets the requested relative tolerance.
//!
//! [`tanh_sinh`] is a double-exponential rule that needs no knowledge of the
//! endpoint exponents. It is kept as an independent cross-check.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const LOW_ORDER: usize = 20;
const HIGH_ORDER: usize = 30;
const MAX_PANELS: usize = 4000;

/// Value and absolute error estimate of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_error: f64,
}

impl Estimate {
    pub fn rel_error(&self) -> f64 {
        if self.value == 0.0 {
            if self.abs_error == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.abs_error / self.value.abs()
        }
    }
}

/// Gauss-Jacobi rule on `[0, 1]` for the weight `tᵃ (1−t)ᵇ`.
#[derive(Debug, Clone)]
pub struct JacobiRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl JacobiRule {
    /// Golub-Welsch construction from the three-term recurrence of the
    /// Jacobi polynomials `P^(b, a)` on `[-1, 1]`.
    pub fn new(order: usize, a: f64, b: f64) -> Result<Self> {
        if order == 0 || !(a > -1.0) || !(b > -1.0) {
            return Err(Error::InvalidArgument(format!(
                "Gauss-Jacobi rule needs order > 0 and exponents > -1 (got {order}, {a}, {b})"
            )));
        }
        // (1-x)^alpha (1+x)^beta with t = (1+x)/2
        let alpha = b;
        let beta = a;
        let ab = alpha + beta;
        let mut jac = DMatrix::<f64>::zeros(order, order);
        jac[(0, 0)] = (beta - alpha) / (ab + 2.0);
        for j in 1..order {
            let jf = j as f64;
            let s = 2.0 * jf + ab;
            jac[(j, j)] = (beta * beta - alpha * alpha) / (s * (s + 2.0));
            let off2 = if j == 1 {
                4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * jf * (jf + alpha) * (jf + beta) * (jf + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            let off = off2.sqrt();
            jac[(j, j - 1)] = off;
            jac[(j - 1, j)] = off;
        }
        let eig = SymmetricEigen::new(jac);
        // total mass of t^a (1-t)^b on [0,1]
        let mu0 = (ln_gamma(a + 1.0) + ln_gamma(b + 1.0) - ln_gamma(a + b + 2.0)).exp();
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|i| {
                let x = eig.eigenvalues[i];
                let v0 = eig.eigenvectors[(0, i)];
                (0.5 * (1.0 + x), mu0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    fn apply<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(*x)?;
        }
        Ok(sum)
    }
}

type RuleKey = (u64, u64, usize);

fn rule_cache() -> &'static Mutex<HashMap<RuleKey, Arc<JacobiRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<JacobiRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shared, memoized Gauss-Jacobi rule.
pub fn jacobi_rule(order: usize, a: f64, b: f64) -> Result<Arc<JacobiRule>> {
    let key = (a.to_bits(), b.to_bits(), order);
    if let Some(rule) = rule_cache().lock().expect("rule cache poisoned").get(&key) {
        return Ok(rule.clone());
    }
    let rule = Arc::new(JacobiRule::new(order, a, b)?);
    rule_cache()
        .lock()
        .expect("rule cache poisoned")
        .insert(key, rule.clone());
    Ok(rule)
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    estimate: Estimate,
}

/// Options for [`integrate_weighted`].
#[derive(Debug, Clone)]
pub struct WeightedOptions {
    pub rel_tol: f64,
    /// Interior points in `(0, 1)` where `f` is known to lose smoothness.
    pub breakpoints: Vec<f64>,
}

impl Default for WeightedOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            breakpoints: Vec::new(),
        }
    }
}

fn panel_estimate<F>(lo: f64, hi: f64, a: f64, b: f64, f: &mut F) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut eval = |order: usize| -> Result<f64> {
        if lo == 0.0 && hi == 1.0 {
            jacobi_rule(order, a, b)?.apply(&mut *f)
        } else if lo == 0.0 {
            let rule = jacobi_rule(order, a, 0.0)?;
            let scale = hi.powf(a + 1.0);
            Ok(scale * rule.apply(|s| {
                let t = hi * s;
                Ok((1.0 - t).powf(b) * f(t)?)
            })?)
        } else if hi == 1.0 {
            let w = 1.0 - lo;
            let rule = jacobi_rule(order, 0.0, b)?;
            let scale = w.powf(b + 1.0);
            Ok(scale * rule.apply(|s| {
                let t = lo + w * s;
                Ok(t.powf(a) * f(t)?)
            })?)
        } else {
            let w = hi - lo;
            let rule = jacobi_rule(order, 0.0, 0.0)?;
            Ok(w * rule.apply(|s| {
                let t = lo + w * s;
                Ok(t.powf(a) * (1.0 - t).powf(b) * f(t)?)
            })?)
        }
    };
    let coarse = eval(LOW_ORDER)?;
    let fine = eval(HIGH_ORDER)?;
    if !fine.is_finite() || !coarse.is_finite() {
        return Err(Error::Quadrature {
            tol: f64::NAN,
            estimate: f64::INFINITY,
        });
    }
    Ok(Estimate {
        value: fine,
        abs_error: (fine - coarse).abs(),
    })
}

/// `∫₀¹ tᵃ (1−t)ᵇ f(t) dt` with `a, b > −1` and `f` smooth on `(0, 1)`
/// apart from the declared breakpoints.
pub fn integrate_weighted<F>(a: f64, b: f64, mut f: F, opts: &WeightedOptions) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut cuts: Vec<f64> = opts
        .breakpoints
        .iter()
        .copied()
        .filter(|&x| x > 0.0 && x < 1.0)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(0.0);
    edges.extend(cuts);
    edges.push(1.0);

    let mut panels = Vec::with_capacity(edges.len());
    for w in edges.windows(2) {
        let estimate = panel_estimate(w[0], w[1], a, b, &mut f)?;
        panels.push(Panel {
            lo: w[0],
            hi: w[1],
            estimate,
        });
    }
    let max_panels = MAX_PANELS + panels.len();
    loop {
        let total: f64 = panels.iter().map(|p| p.estimate.value).sum();
        let err: f64 = panels.iter().map(|p| p.estimate.abs_error).sum();
        if err <= opts.rel_tol * total.abs() || err == 0.0 {
            return Ok(Estimate {
                value: total,
                abs_error: err,
            });
        }
        if panels.len() >= max_panels {
            return Err(Error::Quadrature {
                tol: opts.rel_tol,
                estimate: err / total.abs(),
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.estimate.abs_error.total_cmp(&y.1.estimate.abs_error))
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.lo + p.hi);
        if !(mid > p.lo && mid < p.hi) {
            return Err(Error::Quadrature {
                tol: opts.rel_tol,
                estimate: err / total.abs(),
            });
        }
        for (lo, hi) in [(p.lo, mid), (mid, p.hi)] {
            let estimate = panel_estimate(lo, hi, a, b, &mut f)?;
            panels.push(Panel { lo, hi, estimate });
        }
    }
}

/// Tanh-sinh quadrature of `f` over `[lo, hi]`.
///
/// The integrand receives `(x, x − lo, hi − x)` with both distances computed
/// without cancellation, so endpoint singularities can be evaluated accurately.
pub fn tanh_sinh<F>(lo: f64, hi: f64, mut f: F, rel_tol: f64) -> Result<Estimate>
where
    F: FnMut(f64, f64, f64) -> Result<f64>,
{
    const T_MAX: f64 = 6.0;
    const MAX_LEVEL: u32 = 10;
    let half = std::f64::consts::FRAC_PI_2;
    let width = hi - lo;
    let mut term = |t: f64| -> Result<f64> {
        let s = half * t.sinh();
        let e = (-2.0 * s.abs()).exp();
        // distances to the near and far endpoints
        let near = width * e / (1.0 + e);
        let far = width / (1.0 + e);
        let (da, db) = if s >= 0.0 { (far, near) } else { (near, far) };
        // subnormal distances have lost their precision; with an integrable
        // endpoint singularity these nodes carry no measurable weight
        if near < f64::MIN_POSITIVE {
            return Ok(0.0);
        }
        let x = if s >= 0.0 { hi - db } else { lo + da };
        let weight = width * half * t.cosh() * e / (1.0 + e).powi(2) * 2.0;
        let v = f(x, da, db)?;
        Ok(weight * v)
    };

    let mut h = 1.0;
    let mut sum = term(0.0)?;
    let mut k = 1.0;
    while k * h <= T_MAX {
        sum += term(k * h)? + term(-k * h)?;
        k += 1.0;
    }
    let mut prev = sum * h;
    for _ in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut j = 1.0;
        while j * h <= T_MAX {
            sum += term(j * h)? + term(-j * h)?;
            j += 2.0;
        }
        let current = sum * h;
        let diff = (current - prev).abs();
        if diff <= rel_tol * current.abs() {
            return Ok(Estimate {
                value: current,
                abs_error: diff,
            });
        }
        prev = current;
    }
    Err(Error::Quadrature {
        tol: rel_tol,
        estimate: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    fn beta(a: f64, b: f64) -> f64 {
        gamma(a) * gamma(b) / gamma(a + b)
    }

    #[test]
    fn rule_reproduces_beta_moments() {
        for &(a, b) in &[(0.0, 0.0), (-0.5, 0.5), (2.5, -0.25), (-0.9, -0.9), (-0.5, -0.5)] {
            let rule = JacobiRule::new(12, a, b).unwrap();
            for p in 0..6 {
                let got: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * x.powi(p))
                    .sum();
                let want = beta(a + 1.0 + p as f64, b + 1.0);
                assert!((got / want - 1.0).abs() < 1e-13, "a={a} b={b} p={p}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(JacobiRule::new(5, -1.0, 0.0).is_err());
        assert!(JacobiRule::new(0, 0.0, 0.0).is_err());
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        // ∫ (1-t)^(-1/2) e^(40 t) dt, compared with tanh-sinh
        let opts = WeightedOptions::default();
        let got = integrate_weighted(0.0, -0.5, |t| Ok((40.0 * t).exp()), &opts).unwrap();
        let reference =
            tanh_sinh(0.0, 1.0, |t, _, db| Ok((40.0 * t).exp() / db.sqrt()), 1e-13).unwrap();
        assert!((got.value / reference.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn breakpoints_are_respected() {
        let opts = WeightedOptions {
            rel_tol: 1e-12,
            breakpoints: vec![0.3],
        };
        let got = integrate_weighted(0.0, 0.0, |t| Ok((t - 0.3).abs()), &opts).unwrap();
        let want = 0.5 * (0.3f64.powi(2) + 0.7f64.powi(2));
        assert!((got.value - want).abs() < 1e-14);
    }

    #[test]
    fn tanh_sinh_strong_endpoint_singularity() {
        // ∫₀¹ x^(-0.9) dx = 10
        let got = tanh_sinh(0.0, 1.0, |_, da, _| Ok(da.powf(-0.9)), 1e-12).unwrap();
        assert!((got.value - 10.0).abs() < 1e-8, "{}", got.value);
    }
}
