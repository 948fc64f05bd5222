//! Dormand-Prince 5(4) integrator with continuous output.

use crate::error::{Error, Result};

/// Autonomous or non-autonomous first order system `y' = f(t, y)`.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> Result<[f64; N]>;
}

/// Per-component mixed error weights: `atol + rtol·|y|`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance<const N: usize> {
    pub rtol: [f64; N],
    pub atol: [f64; N],
}

impl<const N: usize> Tolerance<N> {
    pub fn uniform(rtol: f64, atol: f64) -> Self {
        Self {
            rtol: [rtol; N],
            atol: [atol; N],
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepperOptions {
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for StepperOptions {
    fn default() -> Self {
        Self {
            h_init: None,
            h_max: f64::INFINITY,
            h_min: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

/// Quartic interpolant over one accepted step.
#[derive(Debug, Clone)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    coeffs: [[f64; N]; 5],
}

impl<const N: usize> DenseSegment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.h >= 0.0 {
            (self.t0, self.t1())
        } else {
            (self.t1(), self.t0)
        };
        t >= lo && t <= hi
    }

    pub fn start(&self) -> [f64; N] {
        self.coeffs[0]
    }

    pub fn end(&self) -> [f64; N] {
        let mut y = [0.0; N];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.coeffs[0][i] + self.coeffs[1][i];
        }
        y
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let c = &self.coeffs;
        let mut y = [0.0; N];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = c[0][i]
                + theta * (c[1][i] + theta1 * (c[2][i] + theta * (c[3][i] + theta1 * c[4][i])));
        }
        y
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// Step-by-step driver. Each call to [`Dopri5::step`] performs one accepted
/// step and returns its interpolant.
pub struct Dopri5<'a, S, const N: usize> {
    sys: &'a S,
    t: f64,
    y: [f64; N],
    f: [f64; N],
    h: f64,
    direction: f64,
    tol: Tolerance<N>,
    opts: StepperOptions,
    last_rejected: bool,
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

impl<'a, S: OdeSystem<N>, const N: usize> Dopri5<'a, S, N> {
    pub fn new(
        sys: &'a S,
        t0: f64,
        y0: [f64; N],
        direction: f64,
        tol: Tolerance<N>,
        opts: StepperOptions,
    ) -> Result<Self> {
        let f0 = sys.rhs(t0, &y0)?;
        let mut stepper = Self {
            sys,
            t: t0,
            y: y0,
            f: f0,
            h: 0.0,
            direction: direction.signum(),
            tol,
            opts,
            last_rejected: false,
            accepted: 0,
            rejected: 0,
            rhs_evals: 1,
        };
        stepper.h = match stepper.opts.h_init {
            Some(h) => h.abs() * stepper.direction,
            None => stepper.initial_step()?,
        };
        Ok(stepper)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    pub fn derivative(&self) -> &[f64; N] {
        &self.f
    }

    fn scale(&self, i: usize, a: f64, b: f64) -> f64 {
        self.tol.atol[i] + self.tol.rtol[i] * a.abs().max(b.abs())
    }

    fn initial_step(&mut self) -> Result<f64> {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let sk = self.scale(i, self.y[i], self.y[i]);
            d0 += (self.y[i] / sk).powi(2);
            d1 += (self.f[i] / sk).powi(2);
        }
        let n = N as f64;
        d0 = (d0 / n).sqrt();
        d1 = (d1 / n).sqrt();
        let mut h0 = if d0 < 1e-10 || d1 < 1e-10 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0 = h0.min(self.opts.h_max);
        let y1 = axpy(&self.y, h0 * self.direction, &[(1.0, &self.f)]);
        let f1 = self.sys.rhs(self.t + h0 * self.direction, &y1)?;
        self.rhs_evals += 1;
        let mut d2 = 0.0;
        #[allow(clippy::needless_range_loop)]
        for i in 0..N {
            let sk = self.scale(i, self.y[i], self.y[i]);
            d2 += ((f1[i] - self.f[i]) / sk).powi(2);
        }
        d2 = (d2 / n).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        Ok((100.0 * h0).min(h1).min(self.opts.h_max) * self.direction)
    }

    /// Advances by one accepted step, never past `t_bound`.
    pub fn step(&mut self, t_bound: f64) -> Result<DenseSegment<N>> {
        loop {
            if self.accepted + self.rejected >= self.opts.max_steps {
                return Err(Error::TooManySteps(self.opts.max_steps));
            }
            let remaining = t_bound - self.t;
            if remaining * self.direction <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "step bound {t_bound} is not ahead of t = {}",
                    self.t
                )));
            }
            let mut h = self.h;
            if h.abs() > self.opts.h_max {
                h = self.opts.h_max * self.direction;
            }
            let hits_bound = h.abs() >= remaining.abs();
            if hits_bound {
                h = remaining;
            }
            if h.abs() < self.opts.h_min * self.t.abs().max(1.0) && !hits_bound {
                return Err(Error::StepUnderflow { t: self.t });
            }

            let (t, y, k1) = (self.t, self.y, self.f);
            let k2 = self.sys.rhs(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]))?;
            let k3 = self
                .sys
                .rhs(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = self.sys.rhs(
                t + C4 * h,
                &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            )?;
            let k5 = self.sys.rhs(
                t + C5 * h,
                &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            )?;
            let k6 = self.sys.rhs(
                t + h,
                &axpy(
                    &y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            )?;
            let y_new = axpy(
                &y,
                h,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let t_new = if hits_bound { t_bound } else { t + h };
            let finite = y_new.iter().all(|v| v.is_finite());
            let k7 = if finite {
                self.sys.rhs(t_new, &y_new)?
            } else {
                [f64::NAN; N]
            };
            self.rhs_evals += 6;

            let mut err = 0.0;
            for i in 0..N {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                err += (e / self.scale(i, y[i], y_new[i])).powi(2);
            }
            err = (err / N as f64).sqrt();

            if !err.is_finite() {
                self.rejected += 1;
                self.last_rejected = true;
                self.h = 0.2 * h;
                if self.h.abs() < self.opts.h_min * self.t.abs().max(1.0) {
                    return Err(Error::NonFinite { t: self.t });
                }
                continue;
            }

            if err <= 1.0 {
                let mut coeffs = [[0.0; N]; 5];
                for i in 0..N {
                    let dy = y_new[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    coeffs[0][i] = y[i];
                    coeffs[1][i] = dy;
                    coeffs[2][i] = bspl;
                    coeffs[3][i] = dy - h * k7[i] - bspl;
                    coeffs[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                let mut fac = if err == 0.0 {
                    10.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 10.0)
                };
                if self.last_rejected {
                    fac = fac.min(1.0);
                }
                self.last_rejected = false;
                self.accepted += 1;
                // a step truncated at the bound says nothing about the natural size
                if !(hits_bound && h.abs() < self.h.abs()) {
                    self.h = h * fac;
                }
                self.t = t_new;
                self.y = y_new;
                self.f = k7;
                return Ok(DenseSegment {
                    t0: t,
                    h: t_new - t,
                    coeffs,
                });
            }

            self.rejected += 1;
            self.last_rejected = true;
            self.h = h * (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;
    impl OdeSystem<2> for Oscillator {
        fn rhs(&self, _t: f64, y: &[f64; 2]) -> Result<[f64; 2]> {
            Ok([y[1], -y[0]])
        }
    }

    #[test]
    fn harmonic_oscillator_and_dense_output() {
        let tol = Tolerance::uniform(1e-11, 1e-13);
        let mut st =
            Dopri5::new(&Oscillator, 0.0, [0.0, 1.0], 1.0, tol, StepperOptions::default()).unwrap();
        let mut worst_dense: f64 = 0.0;
        while st.t() < 10.0 {
            let seg = st.step(10.0).unwrap();
            let mid = seg.t0 + 0.37 * seg.h;
            worst_dense = worst_dense.max((seg.eval(mid)[0] - mid.sin()).abs());
        }
        assert_eq!(st.t(), 10.0);
        assert!((st.y()[0] - 10f64.sin()).abs() < 1e-9);
        assert!(worst_dense < 1e-8, "{worst_dense}");
    }

    #[test]
    fn backward_integration() {
        let tol = Tolerance::uniform(1e-11, 1e-13);
        let mut st =
            Dopri5::new(&Oscillator, 0.0, [0.0, 1.0], -1.0, tol, StepperOptions::default()).unwrap();
        while st.t() > -3.0 {
            st.step(-3.0).unwrap();
        }
        assert!((st.y()[0] - (-3f64).sin()).abs() < 1e-9);
    }

    struct Blowup;
    impl OdeSystem<1> for Blowup {
        fn rhs(&self, _t: f64, y: &[f64; 1]) -> Result<[f64; 1]> {
            Ok([y[0] * y[0]])
        }
    }

    #[test]
    fn finite_time_blowup_is_reported() {
        let tol = Tolerance::uniform(1e-8, 1e-10);
        let mut st =
            Dopri5::new(&Blowup, 0.0, [1.0], 1.0, tol, StepperOptions::default()).unwrap();
        let mut failed = false;
        for _ in 0..100_000 {
            match st.step(2.0) {
                Ok(_) if st.t() >= 2.0 => break,
                Ok(_) => {}
                Err(_) => {
                    failed = true;
                    break;
                }
            }
        }
        assert!(failed);
    }
}
