//! Run configuration, read from TOML.
//!
//! Every section and key is optional; omitted values take the defaults of
//! [`RunConfig::default`]. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::domain::Rect;
use crate::equivalence::{default_delta, SetupParams};
use crate::symbols::{Symbol, DEFAULT_GALLERY};
use crate::weights::Weight;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightSection {
    /// `gaussian:m`, `radial-poly:a2,a4` or `custom`.
    pub id: String,
    /// Sampled `x,y,phi` file for `custom`, relative to the config file.
    pub csv: Option<PathBuf>,
    pub probe_c: f64,
}

impl Default for WeightSection {
    fn default() -> Self {
        Self {
            id: "gaussian:1".into(),
            csv: None,
            probe_c: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSection {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self {
            x_min: -3.0,
            x_max: 3.0,
            y_min: -3.0,
            y_max: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    /// Defaults to `0.9 min(1/2, alpha)`.
    pub delta: Option<f64>,
    pub alpha: f64,
    pub probe: usize,
    pub scan_divisor: f64,
    /// Separation constants for the partition.
    pub partition_r: Vec<f64>,
    /// Dilation multiplier `m` of the overlap count.
    pub overlap_m: f64,
    /// Optional lattice CSV to load instead of building one.
    pub import: Option<PathBuf>,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self {
            delta: None,
            alpha: 0.5,
            probe: 201,
            scan_divisor: 5.0,
            partition_r: vec![2.0, 4.0],
            overlap_m: 1.0,
            import: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    pub basis_size: usize,
    pub n_radial: usize,
    pub n_angular: usize,
    pub r_max: Option<f64>,
    pub disk_radial: usize,
    pub disk_angular: usize,
    /// Transform and heatmap grid points per side.
    pub grid: usize,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            basis_size: 64,
            n_radial: 200,
            n_angular: 128,
            r_max: None,
            disk_radial: 24,
            disk_angular: 48,
            grid: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SymbolsSection {
    /// Gallery ids, optionally suffixed `@d` to set the dimension.
    pub list: Vec<String>,
    /// Dimension for `identity` and `scalar:` ids without a suffix.
    pub d: usize,
}

impl Default for SymbolsSection {
    fn default() -> Self {
        Self {
            list: DEFAULT_GALLERY.iter().map(|(id, d)| format!("{id}@{d}")).collect(),
            d: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    pub p_set: Vec<f64>,
    pub svg: bool,
    /// Resolution per side of the `rho` and kernel heatmaps.
    pub heatmap: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self {
            p_set: vec![0.5, 1.0, 2.0],
            svg: true,
            heatmap: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Worker threads; `0` uses all cores. Outputs do not depend on it.
    pub threads: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub weight: WeightSection,
    pub domain: DomainSection,
    pub lattice: LatticeSection,
    pub kernel: KernelSection,
    pub symbols: SymbolsSection,
    pub report: ReportSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            threads: 0,
            seed: 0,
            output: PathBuf::from("out"),
            weight: WeightSection::default(),
            domain: DomainSection::default(),
            lattice: LatticeSection::default(),
            kernel: KernelSection::default(),
            symbols: SymbolsSection::default(),
            report: ReportSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

fn field(name: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("field `{name}`: {reason}"))
}

fn in_range<T: PartialOrd + std::fmt::Display + Copy>(name: &str, v: T, lo: T, hi: T) -> Result<()> {
    if v < lo || v > hi {
        return Err(field(name, format!("{v} outside [{lo}, {hi}]")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let at = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!("line {line}: ")
                })
                .unwrap_or_default();
            Error::Config(format!("{at}{}", e.message()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        in_range("threads", self.threads, 0, 1024)?;
        let d = &self.domain;
        if !self.rect().is_valid() {
            return Err(field(
                "domain",
                format!("empty box [{}, {}] x [{}, {}]", d.x_min, d.x_max, d.y_min, d.y_max),
            ));
        }
        in_range("weight.probe_c", self.weight.probe_c, 1e-6, 1e6)?;
        if self.weight.id != "custom" {
            Weight::parse(&self.weight.id).map_err(|e| field("weight.id", e))?;
        } else if self.weight.csv.is_none() {
            return Err(field("weight.csv", "required for a custom weight"));
        }
        let l = &self.lattice;
        in_range("lattice.alpha", l.alpha, 1e-3, 1.0)?;
        let bound = 0.5f64.min(l.alpha);
        if !(self.delta() > 0.0 && self.delta() < bound) {
            return Err(field("lattice.delta", format!("{} outside (0, {bound})", self.delta())));
        }
        in_range("lattice.probe", l.probe, 11, 2001)?;
        in_range("lattice.scan_divisor", l.scan_divisor, 1.0, 100.0)?;
        in_range("lattice.overlap_m", l.overlap_m, 1.0, 10.0)?;
        for &r in &l.partition_r {
            if !(r > 1.0 && r <= 100.0) {
                return Err(field("lattice.partition_r", format!("{r} outside (1, 100]")));
            }
        }
        let k = &self.kernel;
        in_range("kernel.basis_size", k.basis_size, 1, 512)?;
        in_range("kernel.n_radial", k.n_radial, 8, 4000)?;
        in_range("kernel.n_angular", k.n_angular, 8, 4096)?;
        if let Some(r) = k.r_max {
            in_range("kernel.r_max", r, 1e-3, 1e4)?;
        }
        in_range("kernel.disk_radial", k.disk_radial, 2, 400)?;
        in_range("kernel.disk_angular", k.disk_angular, 4, 800)?;
        in_range("kernel.grid", k.grid, 2, 401)?;
        in_range("symbols.d", self.symbols.d, 1, 16)?;
        if self.symbols.list.is_empty() {
            return Err(field("symbols.list", "empty"));
        }
        self.symbols().map_err(|e| field("symbols.list", e))?;
        if self.report.p_set.is_empty() {
            return Err(field("report.p_set", "empty"));
        }
        for &p in &self.report.p_set {
            if !(p > 0.0 && p <= 100.0) {
                return Err(field("report.p_set", format!("{p} outside (0, 100]")));
            }
        }
        in_range("report.heatmap", self.report.heatmap, 2, 1001)?;
        Ok(())
    }

    pub fn rect(&self) -> Rect {
        let d = &self.domain;
        Rect::new(d.x_min, d.x_max, d.y_min, d.y_max)
    }

    pub fn delta(&self) -> f64 {
        self.lattice.delta.unwrap_or_else(|| default_delta(self.lattice.alpha))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output)
    }

    pub fn lattice_import(&self) -> Option<PathBuf> {
        self.lattice.import.as_deref().map(|p| self.resolve(p))
    }

    pub fn weight(&self) -> Result<Weight> {
        if self.weight.id == "custom" {
            let path = self
                .weight
                .csv
                .as_deref()
                .ok_or_else(|| field("weight.csv", "missing"))?;
            Weight::from_csv(self.resolve(path))
        } else {
            Weight::parse(&self.weight.id)
        }
    }

    pub fn symbols(&self) -> Result<Vec<Symbol>> {
        self.symbols
            .list
            .iter()
            .map(|entry| {
                let (id, d) = match entry.rsplit_once('@') {
                    Some((id, d)) => {
                        let d: usize = d
                            .trim()
                            .parse()
                            .map_err(|_| Error::param("d", format!("bad dimension suffix in {entry:?}")))?;
                        (id, d)
                    }
                    None => (entry.as_str(), natural_dimension(entry).unwrap_or(self.symbols.d)),
                };
                Symbol::parse(id, d)
            })
            .collect()
    }

    pub fn setup_params(&self) -> Result<SetupParams> {
        let k = &self.kernel;
        Ok(SetupParams {
            weight: self.weight()?,
            rect: self.rect(),
            delta: self.delta(),
            alpha: self.lattice.alpha,
            basis_size: k.basis_size,
            n_radial: k.n_radial,
            n_angular: k.n_angular,
            r_max: k.r_max,
            disk_radial: k.disk_radial,
            disk_angular: k.disk_angular,
            probe: self.lattice.probe,
            scan_divisor: self.lattice.scan_divisor,
            grid_n: k.grid,
            seed: self.seed,
        })
    }
}

/// Dimension implied by the id itself, for kinds that fix it.
fn natural_dimension(id: &str) -> Option<usize> {
    let (name, args) = id.split_once(':')?;
    match name.trim() {
        "diag" => Some(args.split(',').count()),
        "rotating-projector" => Some(2),
        "matrix" => Some(args.split(';').count()),
        _ => None,
    }
}
