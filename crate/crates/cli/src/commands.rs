use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{info, warn};
use serde::Serialize;
use serde_json::{json, Value};
use vpsteady::compact::{fixed_lines, Direction, Orbit};
use vpsteady::export::{write_fixed_lines, write_orbit, write_profile, write_sweep};
use vpsteady::{
    check_theorem1, check_theorem2, classify_solution, integrate_compact, integrate_physical,
    omega_crit, sweep_omega_c, CompactState, CompactSystem, DistributionModel, Radius,
    TheoremVerdict,
};

use crate::config::{PortraitDirection, RunConfig};

pub const SUMMARY: &str = "summary.json";

/// Options that do not live in the config file.
#[derive(Debug, Clone, Serialize)]
pub struct Invocation {
    pub command: String,
    pub out_dir: PathBuf,
    pub threads: usize,
    /// Reserved; no command draws random numbers.
    pub seed: Option<u64>,
}

/// Output directory with the configured float precision. A stale summary is
/// removed up front so a failed run never leaves one behind.
pub struct Output {
    dir: PathBuf,
    precision: usize,
}

impl Output {
    pub fn prepare(dir: &Path, precision: usize) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let summary = dir.join(SUMMARY);
        if summary.exists() {
            fs::remove_file(&summary).with_context(|| format!("cannot remove {}", summary.display()))?;
        }
        Ok(Self { dir: dir.to_path_buf(), precision })
    }

    fn file<F>(&self, name: &str, write: F) -> Result<String>
    where
        F: FnOnce(&mut BufWriter<File>, usize) -> vpsteady::Result<()>,
    {
        let path = self.dir.join(name);
        let mut out = BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?);
        write(&mut out, self.precision).with_context(|| format!("writing {}", path.display()))?;
        out.flush()?;
        info!("wrote {}", path.display());
        Ok(name.to_string())
    }

    fn json(&self, name: &str, value: &impl Serialize) -> Result<String> {
        self.file(name, |w, _| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|e| vpsteady::Error::Io(e.to_string()))?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }

    /// Writes `summary.json` via a rename so readers never see a partial file.
    pub fn summary(&self, config: Option<&RunConfig>, invocation: &Invocation, results: Value) -> Result<()> {
        let doc = json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "config": { "invocation": invocation, "run_config": config },
            "results": results,
        });
        let tmp = self.dir.join(".summary.json.tmp");
        fs::write(&tmp, serde_json::to_string_pretty(&doc)? + "\n")?;
        fs::rename(&tmp, self.dir.join(SUMMARY))?;
        Ok(())
    }
}

fn radius_json(r: Radius) -> Value {
    match r {
        Radius::Finite(r) => json!(r),
        Radius::Infinite => json!("inf"),
    }
}

pub fn cmd_solve(cfg: &RunConfig, out: &Output) -> Result<Value> {
    let model = cfg.build_model()?;
    let omega_c = cfg.omega_c("solve")?;
    info!("solving {} at omega_c = {omega_c}", model.label());
    let profile = integrate_physical(&model, omega_c, &cfg.solve_settings())?;
    let class = classify_solution(&model, &profile, None);
    let file = out.file("profile.csv", |w, d| write_profile(&model, &profile, w, d))?;
    Ok(json!({
        "model": model.label(),
        "omega_c": omega_c,
        "radius": radius_json(profile.radius),
        "total_mass": profile.total_mass,
        "classification": profile.classification.as_str(),
        "forward": class.forward.as_str(),
        "backward": class.backward.as_str(),
        "mass_converged": class.mass_converged,
        "samples": profile.samples.len(),
        "diagnostics": profile.diagnostics,
        "files": [file],
    }))
}

fn verdict_json(v: vpsteady::Result<TheoremVerdict>) -> Value {
    match v {
        Ok(v) => json!(v),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Output, threads: usize) -> Result<Value> {
    let model = cfg.build_model()?;
    let grid = cfg.grid()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    info!("sweeping {} over {} values on {} threads", model.label(), grid.len(), pool.current_num_threads());
    let result = pool.install(|| sweep_omega_c(&model, &grid, &cfg.sweep_settings()))?;
    if result.failures() > 0 {
        warn!("{} of {} solves failed; see the error column", result.failures(), grid.len());
    }
    let file = out.file("sweep.csv", |w, d| write_sweep(&result, w, d))?;
    let top = grid[grid.len() - 1];
    let crit = omega_crit(&model).map(|c| c.value);
    Ok(json!({
        "model": model.label(),
        "grid_len": grid.len(),
        "failures": result.failures(),
        "candidates": result.candidates,
        "critical_values": result.critical_values(),
        "omega_crit": crit.map(|c| json!(c)).unwrap_or_else(|e| json!({ "error": e.to_string() })),
        "theorems_at_grid_max": [verdict_json(check_theorem1(&model, top)), verdict_json(check_theorem2(&model, top))],
        "files": [file],
    }))
}

fn orbit_summary(file: &str, start: &CompactState, orbit: &Orbit) -> Value {
    json!({
        "file": file,
        "start": start,
        "direction": orbit.direction,
        "stop": orbit.stop,
        "samples": orbit.samples.len(),
        "end": orbit.last().state,
    })
}

pub fn cmd_portrait(cfg: &RunConfig, out: &Output) -> Result<Value> {
    let model = cfg.build_model()?;
    let lines = fixed_lines(model.l())?;
    let mut files = vec![out.file("fixed_lines.csv", |w, d| write_fixed_lines(&lines, w, d))?];
    let system = CompactSystem::new(&model);
    let directions: &[Direction] = match cfg.portrait.direction {
        PortraitDirection::Forward => &[Direction::Forward],
        PortraitDirection::Backward => &[Direction::Backward],
        PortraitDirection::Both => &[Direction::Forward, Direction::Backward],
    };
    let p = &cfg.portrait;
    let mut orbits = Vec::new();
    let mut index = 0;
    for &omega in &p.omega {
        for &u in &p.u {
            for &q in &p.q {
                let start = CompactState::new(u, q, omega);
                for &dir in directions {
                    let orbit = integrate_compact(&system, &start, &cfg.compact_settings(dir))
                        .with_context(|| format!("orbit from (U, Q, Omega) = ({u}, {q}, {omega})"))?;
                    let tag = match dir {
                        Direction::Forward => "fwd",
                        Direction::Backward => "bwd",
                    };
                    let name = format!("orbit_{index:03}_{tag}.csv");
                    out.file(&name, |w, d| write_orbit(&orbit, w, d))?;
                    orbits.push(orbit_summary(&name, &start, &orbit));
                    files.push(name);
                }
                index += 1;
            }
        }
    }
    Ok(json!({
        "model": model.label(),
        "fixed_lines": lines,
        "orbits": orbits,
        "files": files,
    }))
}

pub fn cmd_check(cfg: &RunConfig, out: &Output) -> Result<Value> {
    let model = cfg.build_model()?;
    let omega_c = cfg.omega_c("check")?;
    let crit = omega_crit(&model)?;
    let verdicts = vec![check_theorem1(&model, omega_c)?, check_theorem2(&model, omega_c)?];
    let file = out.json("verdicts.json", &verdicts)?;
    Ok(json!({
        "model": model.label(),
        "omega_c": omega_c,
        "omega_crit": crit.value,
        "omega_crit_warning": crit.warning,
        "verdicts": verdicts,
        "files": [file],
    }))
}

/// Built-in families at exponent `l`, with the low-`ω` index `n₀`.
pub fn builtin_models(l: f64) -> Result<Vec<(String, f64)>> {
    let models = [
        DistributionModel::king(l)?,
        DistributionModel::wilson(l)?,
        DistributionModel::truncated_exponential(2, l)?,
        DistributionModel::polytrope(1.0, 1.0, l)?,
        DistributionModel::polytrope(3.0, 1.0, l)?,
        DistributionModel::polytrope(5.0 + 3.0 * l, 1.0, l)?,
    ];
    models.iter().map(|m| Ok((m.label(), m.low_omega_index()?))).collect()
}

pub fn cmd_models(l: f64, out: &Output) -> Result<Value> {
    let rows = builtin_models(l)?;
    println!("{:<40} {:>22}", "family", "n0");
    for (label, n0) in &rows {
        println!("{label:<40} {n0:>22.15}");
    }
    let file = out.file("models.csv", |w, d| {
        let mut csv = csv_writer(w);
        csv.write_record(["family", "l", "n0"])?;
        for (label, n0) in &rows {
            csv.write_record([label.clone(), vpsteady::export::fmt_digits(l, d), vpsteady::export::fmt_digits(*n0, d)])?;
        }
        csv.flush()?;
        Ok(())
    })?;
    let list: Vec<Value> = rows.iter().map(|(f, n0)| json!({ "family": f, "n0": n0 })).collect();
    Ok(json!({ "l": l, "models": list, "files": [file] }))
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}
