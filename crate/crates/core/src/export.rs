//! CSV writers. Floats are written in scientific notation with a fixed
//! number of significant digits; [`FULL_PRECISION`] round-trips exactly.

use std::io::Write;

use crate::analysis::SweepResult;
use crate::compact::{FixedLine, Orbit};
use crate::error::Result;
use crate::model::DistributionModel;
use crate::physical::{Radius, SolutionProfile};

/// Significant digits that round-trip every `f64`.
pub const FULL_PRECISION: usize = 17;

pub fn fmt_f64(x: f64) -> String {
    fmt_digits(x, FULL_PRECISION)
}

/// `x` with `digits` significant digits (clamped to `1..=17`).
pub fn fmt_digits(x: f64, digits: usize) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.*e}", digits.clamp(1, FULL_PRECISION) - 1)
    }
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

/// Columns `r, m, omega, rho, p_rad`.
pub fn write_profile<W: Write>(model: &DistributionModel, profile: &SolutionProfile, out: W, digits: usize) -> Result<()> {
    let f = |x: f64| fmt_digits(x, digits);
    let mut w = writer(out);
    w.write_record(["r", "m", "omega", "rho", "p_rad"])?;
    for s in &profile.samples {
        let omega = s.omega.max(0.0);
        w.write_record([
            f(s.r),
            f(s.m),
            f(s.omega),
            f(model.density(s.r, omega)?),
            f(model.radial_pressure(s.r, omega)?),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `lambda, U, Q, Omega, Z_log, Phi, S1`.
pub fn write_orbit<W: Write>(orbit: &Orbit, out: W, digits: usize) -> Result<()> {
    let f = |x: f64| fmt_digits(x, digits);
    let mut w = writer(out);
    w.write_record(["lambda", "U", "Q", "Omega", "Z_log", "Phi", "S1"])?;
    for s in &orbit.samples {
        w.write_record([
            f(s.lambda),
            f(s.state.u),
            f(s.state.q),
            f(s.state.omega),
            f(s.log_z),
            f(s.phi),
            (s.in_s1 as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `name, U, Q, eig1, eig2, eig3, type`.
pub fn write_fixed_lines<W: Write>(lines: &[FixedLine], out: W, digits: usize) -> Result<()> {
    let f = |x: f64| fmt_digits(x, digits);
    let mut w = writer(out);
    w.write_record(["name", "U", "Q", "eig1", "eig2", "eig3", "type"])?;
    for line in lines {
        w.write_record([
            format!("{:?}", line.name),
            f(line.u),
            f(line.q),
            f(line.eigenvalues[0]),
            f(line.eigenvalues[1]),
            f(line.eigenvalues[2]),
            format!("{:?}", line.kind),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `omega_c, R, M, class, label, error`; `R` is `inf` for unbounded
/// solutions.
pub fn write_sweep<W: Write>(result: &SweepResult, out: W, digits: usize) -> Result<()> {
    let f = |x: f64| fmt_digits(x, digits);
    let mut w = writer(out);
    w.write_record(["omega_c", "R", "M", "class", "label", "error"])?;
    for e in &result.entries {
        let row = match (&e.point, &e.error) {
            (Some(p), _) => [
                f(e.omega_c),
                match p.radius {
                    Radius::Finite(r) => f(r),
                    Radius::Infinite => "inf".into(),
                },
                f(p.total_mass),
                p.classification.as_str().into(),
                p.label.as_str().into(),
                String::new(),
            ],
            (None, err) => [
                f(e.omega_c),
                String::new(),
                String::new(),
                "failed".into(),
                String::new(),
                err.clone().unwrap_or_default(),
            ],
        };
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compact::fixed_lines;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(0.75), "7.5000000000000000e-1");
        assert_eq!(fmt_digits(1.0 / 3.0, 4), "3.333e-1");
        assert_eq!(fmt_digits(2.0, 0), "2e0");
    }

    #[test]
    fn fixed_line_table() {
        let mut buf = Vec::new();
        write_fixed_lines(&fixed_lines(0.0).unwrap(), &mut buf, FULL_PRECISION).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let l2 = text.lines().nth(2).unwrap();
        assert!(l2.starts_with("L2,7.5000000000000000e-1,0.0000000000000000e0,"));
    }
}
