//! Rate-distribution experiments over random network draws.
//!
//! For each draw, per-user downlink rates `log2(1 + SINR)` are evaluated in
//! closed form at every antenna count of the grid, so all grid points see
//! the same networks. Draws run in parallel and are merged by draw index.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{downlink_sinrs, rate_from_sinr};
use crate::error::{Error, Result};
use crate::network::{generate_network, NetworkConfig};
use crate::precoding::{no_lsfp, zf_lsfp, Precoding, ZfVariant};
use crate::rng::derive_seed;
use crate::stats::{nearest_rank, EmpiricalCdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[serde(alias = "none", alias = "no-lsfp")]
    NoLsfp,
    #[serde(alias = "zf", alias = "zf-lsfp")]
    ZfLsfp,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::NoLsfp => "nolsfp",
            Scheme::ZfLsfp => "zf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "nolsfp" | "no-lsfp" | "no" => Ok(Scheme::NoLsfp),
            "zf" | "zflsfp" | "zf-lsfp" => Ok(Scheme::ZfLsfp),
            other => Err(Error::Config(format!("unknown scheme {other:?}; use none or zf"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantChoice {
    Eta,
    Mu,
}

impl From<VariantChoice> for ZfVariant {
    fn from(v: VariantChoice) -> Self {
        match v {
            VariantChoice::Eta => ZfVariant::Eta,
            VariantChoice::Mu => ZfVariant::Mu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkSection {
    cells: usize,
    users: usize,
    #[serde(default = "default_antennas")]
    antennas: usize,
    tau: usize,
    #[serde(default = "default_radius")]
    cell_radius: f64,
    #[serde(default = "default_exponent")]
    pathloss_exponent: f64,
    #[serde(default = "default_sigma")]
    shadow_sigma_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowersSection {
    rho_f: f64,
    rho_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_draws")]
    draws: usize,
    #[serde(default = "default_grid")]
    antenna_grid: Vec<usize>,
    #[serde(default = "default_variant")]
    zf_variant: VariantChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    network: NetworkSection,
    powers: PowersSection,
    experiment: ExperimentSection,
}

fn default_antennas() -> usize {
    100
}
fn default_radius() -> f64 {
    1000.0
}
fn default_exponent() -> f64 {
    3.8
}
fn default_sigma() -> f64 {
    8.0
}
fn default_draws() -> usize {
    10_000
}
fn default_grid() -> Vec<usize> {
    vec![100, 1_000, 10_000, 100_000]
}
fn default_variant() -> VariantChoice {
    VariantChoice::Mu
}

/// Everything a run needs: the network model plus experiment controls.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub draws: usize,
    pub antenna_grid: Vec<usize>,
    pub zf_variant: ZfVariant,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            network: NetworkConfig::default(),
            draws: default_draws(),
            antenna_grid: default_grid(),
            zf_variant: ZfVariant::Mu,
        }
    }
}

impl ExperimentConfig {
    /// Parses the `[network]`, `[powers]`, `[experiment]` TOML layout.
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let network = NetworkConfig {
            cells: f.network.cells,
            users: f.network.users,
            antennas: f.network.antennas,
            tau: f.network.tau,
            rho_f: f.powers.rho_f,
            rho_r: f.powers.rho_r,
            cell_radius: f.network.cell_radius,
            pathloss_exponent: f.network.pathloss_exponent,
            shadow_sigma_db: f.network.shadow_sigma_db,
            seed: f.experiment.seed,
        };
        let cfg = Self {
            network,
            draws: f.experiment.draws,
            antenna_grid: f.experiment.antenna_grid,
            zf_variant: f.experiment.zf_variant.into(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        let n = &self.network;
        let f = ConfigFile {
            network: NetworkSection {
                cells: n.cells,
                users: n.users,
                antennas: n.antennas,
                tau: n.tau,
                cell_radius: n.cell_radius,
                pathloss_exponent: n.pathloss_exponent,
                shadow_sigma_db: n.shadow_sigma_db,
            },
            powers: PowersSection { rho_f: n.rho_f, rho_r: n.rho_r },
            experiment: ExperimentSection {
                seed: n.seed,
                draws: self.draws,
                antenna_grid: self.antenna_grid.clone(),
                zf_variant: match self.zf_variant {
                    ZfVariant::Eta => VariantChoice::Eta,
                    ZfVariant::Mu => VariantChoice::Mu,
                },
            },
        };
        toml::to_string(&f).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.draws == 0 {
            return Err(Error::Config("draws must be at least 1".into()));
        }
        if self.antenna_grid.is_empty() || self.antenna_grid.contains(&0) {
            return Err(Error::Config("antenna_grid must be non-empty with M >= 1".into()));
        }
        Ok(())
    }

    /// Network config of draw `d`: same parameters, draw-specific seed.
    pub fn draw_network(&self, draw: usize) -> NetworkConfig {
        NetworkConfig { seed: derive_seed(self.network.seed, draw as u64), ..self.network.clone() }
    }
}

/// Rates of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfPoint {
    pub antennas: usize,
    /// `(draw, k, l, rate)` in draw order.
    pub rates: Vec<(usize, usize, usize, f64)>,
    pub cdf: EmpiricalCdf,
    /// Minimum rate of each kept draw.
    pub min_rates: Vec<f64>,
    pub min_cdf: EmpiricalCdf,
}

impl CdfPoint {
    /// 5th percentile of the per-user rate, nearest rank.
    pub fn outage_rate(&self) -> f64 {
        nearest_rank(self.cdf.samples(), 5.0)
    }

    /// CSV with header `draw,k,l,rate`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("draw,k,l,rate\n");
        for (d, k, l, r) in &self.rates {
            let _ = writeln!(out, "{d},{k},{l},{r:e}");
        }
        out
    }

    /// CSV with header `draw,min_rate` in draw order.
    pub fn min_rate_csv(&self, draws: &[usize]) -> String {
        let mut out = String::from("draw,min_rate\n");
        for (d, r) in draws.iter().zip(&self.min_rates) {
            let _ = writeln!(out, "{d},{r:e}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfResult {
    pub scheme: Scheme,
    pub points: Vec<CdfPoint>,
    /// Draw indices that were kept.
    pub draws: Vec<usize>,
    /// Draws skipped because a zero-forcing matrix was singular.
    pub skipped: usize,
    pub total: usize,
}

impl CdfResult {
    /// CSV with header `scheme,M,draws,skipped,outage_rate,median_rate,median_min_rate`.
    pub fn summary_csv(results: &[CdfResult]) -> String {
        let mut out = String::from("scheme,M,draws,skipped,outage_rate,median_rate,median_min_rate\n");
        for r in results {
            for p in &r.points {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:e},{:e},{:e}",
                    r.scheme.label(),
                    p.antennas,
                    r.draws.len(),
                    r.skipped,
                    p.outage_rate(),
                    p.cdf.percentile(50.0),
                    p.min_cdf.percentile(50.0)
                );
            }
        }
        out
    }

    /// Writes `cdf_<scheme>_M<m>.csv` per grid point and
    /// `min_rate_<scheme>_M<m>.csv` into `dir`; returns the paths.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for p in &self.points {
            let path = dir.join(format!("cdf_{}_M{}.csv", self.scheme.label(), p.antennas));
            std::fs::write(&path, p.to_csv())?;
            paths.push(path);
            let path = dir.join(format!("min_rate_{}_M{}.csv", self.scheme.label(), p.antennas));
            std::fs::write(&path, p.min_rate_csv(&self.draws))?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// More than 10% singular draws invalidates a run.
pub fn check_skipped(skipped: usize, total: usize) -> Result<()> {
    if skipped * 10 > total {
        return Err(Error::TooManySingular { skipped, total });
    }
    Ok(())
}

enum DrawOutcome {
    Rates(Vec<Vec<f64>>),
    Singular,
}

/// Closed-form downlink rates of every user for every grid point, over
/// `config.draws` network draws.
pub fn run_cdf_experiment(config: &ExperimentConfig, scheme: Scheme) -> Result<CdfResult> {
    config.validate()?;
    let n = &config.network;
    let grid = &config.antenna_grid;
    let outcomes: Vec<DrawOutcome> = (0..config.draws)
        .into_par_iter()
        .map(|d| -> Result<DrawOutcome> {
            let fading = generate_network(&config.draw_network(d))?;
            let fixed: Option<Precoding> = match scheme {
                Scheme::ZfLsfp => match zf_lsfp(&fading, n.rho_r, n.tau, config.zf_variant) {
                    Ok(p) => Some(p),
                    Err(Error::SingularMatrix { .. }) => return Ok(DrawOutcome::Singular),
                    Err(e) => return Err(e),
                },
                Scheme::NoLsfp => None,
            };
            let mut per_m = Vec::with_capacity(grid.len());
            for &m in grid {
                let p = match &fixed {
                    Some(p) => p.clone(),
                    None => no_lsfp(&fading, n.rho_r, n.tau, m).precoding,
                };
                let e = downlink_sinrs(&fading, &p, n.rho_f, n.rho_r, n.tau, m)?;
                per_m.push(e.iter().map(|e| rate_from_sinr(e.sinr)).collect());
            }
            Ok(DrawOutcome::Rates(per_m))
        })
        .collect::<Result<_>>()?;

    let total = outcomes.len();
    let skipped = outcomes.iter().filter(|o| matches!(o, DrawOutcome::Singular)).count();
    check_skipped(skipped, total)?;
    let cells = n.cells;
    let mut draws = Vec::with_capacity(total - skipped);
    type Samples = (Vec<(usize, usize, usize, f64)>, Vec<f64>);
    let mut points: Vec<Samples> = grid.iter().map(|_| (Vec::new(), Vec::new())).collect();
    for (d, o) in outcomes.into_iter().enumerate() {
        if let DrawOutcome::Rates(per_m) = o {
            draws.push(d);
            for (gi, rates) in per_m.into_iter().enumerate() {
                let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
                points[gi].1.push(min);
                for (i, r) in rates.into_iter().enumerate() {
                    points[gi].0.push((d, i / cells, i % cells, r));
                }
            }
        }
    }
    let points = grid
        .iter()
        .zip(points)
        .map(|(&m, (rates, min_rates))| {
            let all: Vec<f64> = rates.iter().map(|r| r.3).collect();
            CdfPoint {
                antennas: m,
                cdf: EmpiricalCdf::new(&all),
                min_cdf: EmpiricalCdf::new(&min_rates),
                rates,
                min_rates,
            }
        })
        .collect();
    Ok(CdfResult { scheme, points, draws, skipped, total })
}
