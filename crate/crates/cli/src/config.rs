//! Run configuration: flags, an optional key-value file, then defaults.

use crate::Usage;
use clap::Args;
use s6holo::surface::CurveDef;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const OUTPUT_ENV: &str = "S6HOLO_OUTPUT_DIR";
pub const MAX_EIGENPAIRS_DEFAULT: usize = 60;

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Curve name (geodesic-s2, boruvka, boruvka-raw) or a curve file
    #[arg(long)]
    pub curve: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=8))]
    pub mesh_level: Option<u8>,
    /// Number of lowest eigenpairs to compute
    #[arg(long)]
    pub eigenpairs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: $S6HOLO_OUTPUT_DIR, else ./s6holo-out)
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Key-value config file; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub cluster_tol: Option<f64>,
    #[arg(long)]
    pub null_torsion_tol: Option<f64>,
    #[arg(long)]
    pub align_tol: Option<f64>,
    #[arg(long)]
    pub chern_gate: Option<f64>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    curve: Option<String>,
    mesh_level: Option<u8>,
    eigenpairs: Option<usize>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    cluster_tol: Option<f64>,
    null_torsion_tol: Option<f64>,
    align_tol: Option<f64>,
    chern_gate: Option<f64>,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub cluster_tol: f64,
    pub null_torsion_tol: f64,
    pub align_tol: f64,
    pub chern_gate: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            cluster_tol: s6holo::jacobi::CLUSTER_TOL,
            null_torsion_tol: 1e-6,
            align_tol: 1e-13,
            chern_gate: s6holo::frenet::CHERN_GATE,
        }
    }
}

/// Per-command fallbacks for the curve and mesh level.
pub struct Defaults {
    pub curve: &'static str,
    pub mesh_level: u8,
}

#[derive(Serialize, Debug, Clone)]
pub struct RunConfig {
    pub curve: String,
    pub mesh_level: u8,
    pub eigenpairs: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    #[serde(skip)]
    pub output: PathBuf,
    #[serde(skip)]
    pub curve_def: CurveDef,
}

fn read_file(path: &Path) -> Result<FileConfig, Usage> {
    let text = std::fs::read_to_string(path).map_err(|e| Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Usage(format!("config {}: {e}", path.display())))
}

/// A known name, or else a path to a curve description file.
pub fn resolve_curve(value: &str) -> Result<CurveDef, Usage> {
    if s6holo::surface::linear_curve_by_name(value).is_ok() {
        return Ok(CurveDef::named(value));
    }
    let path = Path::new(value);
    if !path.is_file() {
        return Err(Usage(format!(
            "unknown curve '{value}': expected geodesic-s2, boruvka, boruvka-raw or a curve file"
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Usage(format!("cannot read curve file {value}: {e}")))?;
    CurveDef::parse(&text).map_err(|e| Usage(format!("curve file {value}: {e}")))
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs, defaults: &Defaults) -> Result<RunConfig, Usage> {
        let file = match &args.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let d = Tolerances::default();
        let tolerances = Tolerances {
            cluster_tol: args.cluster_tol.or(file.cluster_tol).unwrap_or(d.cluster_tol),
            null_torsion_tol: args.null_torsion_tol.or(file.null_torsion_tol).unwrap_or(d.null_torsion_tol),
            align_tol: args.align_tol.or(file.align_tol).unwrap_or(d.align_tol),
            chern_gate: args.chern_gate.or(file.chern_gate).unwrap_or(d.chern_gate),
        };
        for (name, v) in [
            ("cluster_tol", tolerances.cluster_tol),
            ("null_torsion_tol", tolerances.null_torsion_tol),
            ("align_tol", tolerances.align_tol),
            ("chern_gate", tolerances.chern_gate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Usage(format!("{name} must be positive, got {v}")));
            }
        }
        let mesh_level = args.mesh_level.or(file.mesh_level).unwrap_or(defaults.mesh_level);
        if mesh_level > 8 {
            return Err(Usage(format!("mesh_level must be in 0..=8, got {mesh_level}")));
        }
        let eigenpairs = args.eigenpairs.or(file.eigenpairs).unwrap_or(MAX_EIGENPAIRS_DEFAULT);
        if eigenpairs == 0 {
            return Err(Usage("eigenpairs must be at least 1".into()));
        }
        let curve = args.curve.clone().or(file.curve).unwrap_or_else(|| defaults.curve.to_string());
        let curve_def = resolve_curve(&curve)?;
        let output = args
            .output
            .clone()
            .or(file.output)
            .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("s6holo-out"));
        Ok(RunConfig {
            curve,
            mesh_level,
            eigenpairs,
            seed: args.seed.or(file.seed).unwrap_or(0),
            tolerances,
            output,
            curve_def,
        })
    }

    pub fn output_dir(&self) -> anyhow::Result<&Path> {
        std::fs::create_dir_all(&self.output)?;
        Ok(&self.output)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const D: Defaults = Defaults { curve: "boruvka", mesh_level: 5 };

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("s6holo-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("run.toml");
        std::fs::write(&p, "curve = \"geodesic-s2\"\nmesh_level = 3\nseed = 9\ncluster_tol = 0.2\n").unwrap();
        let args = CommonArgs { config: Some(p), mesh_level: Some(2), ..Default::default() };
        let c = RunConfig::resolve(&args, &D).unwrap();
        assert_eq!((c.curve.as_str(), c.mesh_level, c.seed), ("geodesic-s2", 2, 9));
        assert_eq!(c.tolerances.cluster_tol, 0.2);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let bad_tol = CommonArgs { align_tol: Some(0.0), ..Default::default() };
        assert!(RunConfig::resolve(&bad_tol, &D).is_err());
        let bad_curve = CommonArgs { curve: Some("enneper".into()), ..Default::default() };
        assert!(RunConfig::resolve(&bad_curve, &D).unwrap_err().0.contains("unknown curve"));
    }
}
