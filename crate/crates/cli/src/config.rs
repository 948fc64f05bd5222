//! TOML run configuration. Every block rejects unknown keys; defaults are
//! filled in so the resolved config can be echoed into `summary.json`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vpsteady::compact::Direction;
use vpsteady::physical::LengthSpec;
use vpsteady::{
    CompactSettings, DistributionModel, Family, Interpolation, Regularity, SolveSettings,
    SweepSettings, Table,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub portrait: PortraitBlock,
    #[serde(default)]
    pub output: OutputBlock,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Polytrope,
    TruncatedExponential,
    King,
    Wilson,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: FamilyName,
    #[serde(default)]
    pub l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    /// Two-column `(E, phi)` CSV for tabulated models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpolation: Option<Interpolation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularity: Option<RegularityConfig>,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityConfig {
    pub k: f64,
    pub k_prime: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder_index: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// `ω_c` grid for `sweep`: either explicit `values` or `start`/`stop`/`count`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub r_max: LengthSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_floor: Option<f64>,
    pub startup_radius: LengthSpec,
    pub mass_convergence_tol: f64,
    pub max_steps: usize,
    pub growth_factor: f64,
    pub refine_tol: f64,
    /// Sweep worker threads; 0 uses every core.
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortraitDirection {
    Forward,
    Backward,
    #[default]
    Both,
}

/// Orbit bundle: the cartesian product of `u × q × omega` starting points,
/// all inside the open cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortraitBlock {
    pub u: Vec<f64>,
    pub q: Vec<f64>,
    pub omega: Vec<f64>,
    pub direction: PortraitDirection,
    pub lambda_max: f64,
    pub omega_floor: f64,
    pub attraction_tol: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    /// Output directory; `--out` takes precedence.
    pub dir: PathBuf,
    /// Significant digits in CSV files, 1 to 17.
    pub precision: usize,
}

fn default_quad_tol() -> f64 {
    vpsteady::model::DEFAULT_QUAD_TOL
}

impl Default for RunBlock {
    fn default() -> Self {
        let s = SolveSettings::default();
        let w = SweepSettings::default();
        Self {
            omega_c: None,
            grid: None,
            rel_tol: s.rel_tol,
            abs_tol: s.abs_tol,
            r_max: s.r_max,
            omega_floor: s.omega_floor,
            startup_radius: s.startup_radius,
            mass_convergence_tol: s.mass_convergence_tol,
            max_steps: s.max_steps,
            growth_factor: w.growth_factor,
            refine_tol: w.refine_tol,
            threads: 0,
        }
    }
}

impl Default for PortraitBlock {
    fn default() -> Self {
        let c = CompactSettings::default();
        Self {
            u: vec![0.2, 0.5, 0.8],
            q: vec![0.2, 0.5, 0.8],
            omega: vec![0.5],
            direction: PortraitDirection::Both,
            lambda_max: 200.0,
            omega_floor: c.omega_floor,
            attraction_tol: c.attraction_tol,
            rel_tol: c.rel_tol,
            abs_tol: c.abs_tol,
        }
    }
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: PathBuf::from("."), precision: vpsteady::export::FULL_PRECISION }
    }
}

/// Parses and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_str(&text, base_dir).with_context(|| format!("invalid config {}", path.display()))
}

pub fn parse_str(text: &str, base_dir: PathBuf) -> Result<RunConfig> {
    let mut cfg: RunConfig = toml::from_str(text)?;
    cfg.base_dir = base_dir;
    cfg.validate()?;
    Ok(cfg)
}

fn positive(key: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        bail!("{key} must be positive and finite (got {v})");
    }
    Ok(())
}

impl ModelConfig {
    /// Builds the distribution model; `base_dir` anchors a relative table path.
    pub fn build(&self, base_dir: &Path) -> Result<DistributionModel> {
        if !(self.l > -1.0) || !self.l.is_finite() {
            bail!("model.l: l must exceed -1 (got {})", self.l);
        }
        positive("model.quad_tol", self.quad_tol)?;
        let fam = self.family;
        let only = |key: &str, set: bool, owner: FamilyName| -> Result<()> {
            if set && fam != owner {
                bail!("model.{key} is not used by family {fam:?}; remove it");
            }
            Ok(())
        };
        only("n", self.n.is_some(), FamilyName::Polytrope)?;
        only("phi_minus", self.phi_minus.is_some(), FamilyName::Polytrope)?;
        only("p", self.p.is_some(), FamilyName::TruncatedExponential)?;
        only("table", self.table.is_some(), FamilyName::Tabulated)?;
        only("interpolation", self.interpolation.is_some(), FamilyName::Tabulated)?;
        only("regularity", self.regularity.is_some(), FamilyName::Tabulated)?;

        let (family, regularity) = match fam {
            FamilyName::Polytrope => {
                let n = self.n.context("model.n is required for family polytrope")?;
                (Family::Polytrope { n, phi_minus: self.phi_minus.unwrap_or(1.0) }, None)
            }
            FamilyName::TruncatedExponential => {
                let p = self.p.context("model.p is required for family truncated_exponential")?;
                (Family::TruncatedExponential { p }, None)
            }
            FamilyName::King => (Family::TruncatedExponential { p: 0 }, None),
            FamilyName::Wilson => (Family::TruncatedExponential { p: 1 }, None),
            FamilyName::Tabulated => {
                let path = self.table.as_ref().context("model.table is required for family tabulated")?;
                let reg = self
                    .regularity
                    .context("model.regularity (k, k_prime) is required for family tabulated")?;
                let path = base_dir.join(path);
                let interp = self.interpolation.unwrap_or(Interpolation::MonotoneCubic);
                let table = Table::from_csv_path(&path, interp)
                    .with_context(|| format!("model.table: cannot load {}", path.display()))?;
                let reg = Regularity { k: reg.k, k_prime: reg.k_prime, holder_index: reg.holder_index };
                (Family::Tabulated(table), Some(reg))
            }
        };
        let model = DistributionModel::new(self.l, family, regularity).context("model")?;
        Ok(model.with_quadrature_tolerance(self.quad_tol))
    }
}

impl GridConfig {
    pub fn values(&self) -> Result<Vec<f64>> {
        if let Some(v) = &self.values {
            if self.start.is_some() || self.stop.is_some() || self.count.is_some() {
                bail!("run.grid: give either values or start/stop/count, not both");
            }
            if v.is_empty() {
                bail!("run.grid.values is empty");
            }
            return Ok(v.clone());
        }
        let start = self.start.context("run.grid.start is required")?;
        let stop = self.stop.context("run.grid.stop is required")?;
        let count = self.count.context("run.grid.count is required")?;
        positive("run.grid.start", start)?;
        positive("run.grid.stop", stop)?;
        if count < 2 || stop <= start {
            bail!("run.grid needs count >= 2 and stop > start");
        }
        let t = |i: usize| i as f64 / (count - 1) as f64;
        Ok((0..count)
            .map(|i| match (i, self.spacing) {
                (0, _) => start,
                (i, _) if i == count - 1 => stop,
                (_, Spacing::Linear) => start + (stop - start) * t(i),
                (_, Spacing::Log) => (start.ln() + (stop / start).ln() * t(i)).exp(),
            })
            .collect())
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.build(&self.base_dir)?;
        if let Some(w) = self.run.omega_c {
            positive("run.omega_c", w)?;
        }
        if let Some(g) = &self.run.grid {
            g.values()?;
        }
        self.solve_settings().validate().context("run")?;
        if !(self.run.growth_factor > 1.0) {
            bail!("run.growth_factor must exceed 1 (got {})", self.run.growth_factor);
        }
        positive("run.refine_tol", self.run.refine_tol)?;

        let p = &self.portrait;
        for (key, list) in [("portrait.u", &p.u), ("portrait.q", &p.q), ("portrait.omega", &p.omega)] {
            if list.is_empty() {
                bail!("{key} is empty");
            }
            if list.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
                bail!("{key} entries must lie strictly inside (0, 1)");
            }
        }
        if p.omega.iter().any(|w| *w <= p.omega_floor || *w >= 1.0 - p.omega_floor) {
            bail!("portrait.omega entries must lie strictly inside (omega_floor, 1 - omega_floor)");
        }
        positive("portrait.lambda_max", p.lambda_max)?;
        positive("portrait.omega_floor", p.omega_floor)?;
        positive("portrait.attraction_tol", p.attraction_tol)?;
        positive("portrait.rel_tol", p.rel_tol)?;
        positive("portrait.abs_tol", p.abs_tol)?;

        if !(1..=vpsteady::export::FULL_PRECISION).contains(&self.output.precision) {
            bail!("output.precision must be between 1 and 17 (got {})", self.output.precision);
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<DistributionModel> {
        self.model.build(&self.base_dir)
    }

    pub fn omega_c(&self, command: &str) -> Result<f64> {
        self.run.omega_c.with_context(|| format!("run.omega_c is required for {command}"))
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        self.run.grid.as_ref().context("run.grid is required for sweep")?.values()
    }

    pub fn solve_settings(&self) -> SolveSettings {
        let r = &self.run;
        SolveSettings {
            rel_tol: r.rel_tol,
            abs_tol: r.abs_tol,
            r_max: r.r_max,
            omega_floor: r.omega_floor,
            startup_radius: r.startup_radius,
            mass_convergence_tol: r.mass_convergence_tol,
            max_steps: r.max_steps,
        }
    }

    pub fn sweep_settings(&self) -> SweepSettings {
        SweepSettings {
            solve: self.solve_settings(),
            growth_factor: self.run.growth_factor,
            refine_tol: self.run.refine_tol,
        }
    }

    pub fn compact_settings(&self, direction: Direction) -> CompactSettings {
        let p = &self.portrait;
        CompactSettings {
            rel_tol: p.rel_tol,
            abs_tol: p.abs_tol,
            omega_floor: p.omega_floor,
            lambda_max: p.lambda_max,
            attraction_tol: p.attraction_tol,
            direction,
            ..CompactSettings::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_str(text, PathBuf::new())
    }

    #[test]
    fn minimal_polytrope_gets_defaults() {
        let cfg = parse("[model]\nfamily = \"polytrope\"\nn = 1.0\n").unwrap();
        assert_eq!(cfg.model.l, 0.0);
        assert_eq!(cfg.run, RunBlock::default());
        assert_eq!(cfg.output.precision, 17);
        assert_eq!(cfg.solve_settings(), SolveSettings::default());
    }

    #[test]
    fn partial_blocks_keep_other_defaults() {
        let cfg = parse("[model]\nfamily = \"king\"\n[run]\nomega_c = 2.0\nr_max = { absolute = 50.0 }\n").unwrap();
        assert_eq!(cfg.run.omega_c, Some(2.0));
        assert_eq!(cfg.run.r_max, LengthSpec::Absolute(50.0));
        assert_eq!(cfg.run.rel_tol, 1e-10);
    }

    #[test]
    fn rejections_name_the_key() {
        let cases = [
            ("[model]\nfamily = \"king\"\nl = -1.5\n", "l must exceed -1"),
            ("[model]\nfamily = \"king\"\ncolour = 1\n", "colour"),
            ("[model]\nfamily = \"king\"\n[run]\nrel_tol = -1.0\n", "rel_tol"),
            ("[model]\nfamily = \"king\"\nn = 2.0\n", "model.n"),
            ("[model]\nfamily = \"polytrope\"\n", "model.n is required"),
            ("[model]\nfamily = \"tabulated\"\ntable = \"x.csv\"\n", "model.regularity"),
            ("[model]\nfamily = \"wilson\"\n[output]\nprecision = 30\n", "output.precision"),
            ("[model]\nfamily = \"wilson\"\n[run.grid]\nstart = 1.0\n", "run.grid.stop"),
        ];
        for (text, needle) in cases {
            let err = format!("{:#}", parse(text).unwrap_err());
            assert!(err.contains(needle), "{err:?} lacks {needle:?}");
        }
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = format!("{:#}", parse("[model]\nfamily = \"king\"\nl = \n").unwrap_err());
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn grids() {
        let g = GridConfig { start: Some(1.0), stop: Some(100.0), count: Some(3), spacing: Spacing::Log, ..Default::default() };
        let v = g.values().unwrap();
        assert!((v[1] - 10.0).abs() < 1e-12 && v[2] == 100.0);
        let g = GridConfig { start: Some(1.0), stop: Some(2.0), count: Some(5), ..Default::default() };
        assert_eq!(g.values().unwrap()[1], 1.25);
    }
}
