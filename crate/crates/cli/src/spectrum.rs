use crate::checks::{self, FrenetBlock, GeometryBlock};
use crate::config::RunConfig;
use crate::report::{first_failure, fmt_f64, to_json, Verdict, SCHEMA};
use crate::Usage;
use s6holo::jacobi::{assemble_jacobi, solve_spectrum, SpectrumReport, NULL_WINDOW};
use s6holo::ledger::{spectral_predictions, Count, SpectralPrediction};
use s6holo::mesh::build_mesh;
use s6holo::surface::{CurveMeta, CurveProvider};
use serde::Serialize;

/// Nullity of the totally geodesic sphere: the SO(7) motions not fixing it.
const GEODESIC_NULLITY: usize = 12;
const LAMBDA1_TOL: f64 = 0.1;

#[derive(Serialize)]
struct LedgerBlock {
    genus: u32,
    degree: i64,
    chi: i64,
    predicted: SpectralPrediction,
    measured_m1: usize,
    measured_nullity: usize,
    /// The null window reaches the last computed eigenvalue, so the count may grow with more eigenpairs.
    nullity_truncated: bool,
}

#[derive(Serialize)]
struct SpectrumJson<'a> {
    schema: u32,
    command: &'static str,
    config: &'a RunConfig,
    curve: &'a CurveMeta,
    geometry: Option<GeometryBlock>,
    frenet: Option<FrenetBlock>,
    spectral: &'a SpectrumReport,
    ledger: LedgerBlock,
    verdicts: &'a [Verdict],
    passed: bool,
}

fn write_csv(path: &std::path::Path, r: &SpectrumReport) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "eigenvalue", "cluster"])?;
    for (i, (v, c)) in r.eigenvalues.iter().zip(&r.assignment).enumerate() {
        w.write_record([i.to_string(), fmt_f64(*v), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(cfg: &RunConfig) -> anyhow::Result<i32> {
    let curve = cfg.curve_def.build()?;
    let meta = curve.meta().clone();
    let mesh = build_mesh(&curve, cfg.mesh_level as usize)?;
    let dim = 4 * mesh.params.len();
    if cfg.eigenpairs > dim {
        return Err(Usage(format!(
            "--eigenpairs {} exceeds the dimension {dim} of the level-{} problem",
            cfg.eigenpairs, cfg.mesh_level
        ))
        .into());
    }

    let (geometry, frenet, degree) = if meta.totally_geodesic {
        (None, None, meta.degree.unwrap_or(1) as i64)
    } else {
        let geo = checks::geometry(&curve, &mesh)?;
        let fr = checks::frenet(&curve, &mesh, cfg.tolerances.null_torsion_tol, cfg.tolerances.chern_gate)
            .map_err(|e| anyhow::anyhow!("frame analysis failed: {e}"))?;
        if !fr.torsion.is_null_torsion {
            anyhow::bail!(
                "curve is not null-torsion: max|tau| = {:.3e} exceeds {:e}; align it first",
                fr.torsion.max_abs_tau,
                cfg.tolerances.null_torsion_tol
            );
        }
        let d = fr.chern.d;
        (Some(geo), Some(fr), d)
    };

    let asm = assemble_jacobi(&curve, &mesh)?;
    let (spectrum, _) = solve_spectrum(&asm, cfg.eigenpairs, cfg.tolerances.cluster_tol)?;
    let chi = mesh.euler_characteristic();
    let predicted = spectral_predictions(meta.genus, degree as u32);
    let truncated = spectrum.eigenvalues.last().is_some_and(|v| *v < NULL_WINDOW);

    let geodesic = meta.totally_geodesic;
    let (c_low, c_null) = if geodesic { (3, 3) } else { (5, 6) };
    let mut verdicts = Vec::new();
    let l1 = spectrum.lambda1_value;
    verdicts.push(Verdict::new(
        c_low,
        "lambda1_at_minus_two",
        (l1 + 2.0).abs() <= LAMBDA1_TOL,
        format!("lowest cluster center {l1:.6} (want -2 within {LAMBDA1_TOL})"),
    ));
    let m1_ok = match predicted.m1 {
        Count::Exact(m) => spectrum.m1 as i64 == m,
        Count::AtLeast(m) => spectrum.m1 as i64 >= m,
    };
    let m1_complete = spectrum.clusters.len() > 1;
    verdicts.push(Verdict::new(
        c_low,
        "m1_vs_4d",
        m1_ok && m1_complete,
        format!(
            "m1 = {} (predicted {}, d = {degree}){}",
            spectrum.m1,
            predicted.m1,
            if m1_complete { "" } else { "; lowest cluster not closed, raise --eigenpairs" }
        ),
    ));
    let n = spectrum.nullity_count;
    let bound = (2 * degree + chi) as usize;
    let note = if truncated { "; window reaches the last eigenpair, count is a lower bound" } else { "" };
    if geodesic {
        verdicts.push(Verdict::new(
            c_null,
            "nullity_vs_2d_plus_chi",
            n == GEODESIC_NULLITY && !truncated,
            format!("|lambda| < {NULL_WINDOW} count {n} (equality case {GEODESIC_NULLITY}, bound 2d + chi = {bound}){note}"),
        ));
        verdicts.push(Verdict::skipped(7, "lambda2_bound", "totally geodesic convention"));
    } else {
        verdicts.push(Verdict::new(
            c_null,
            "nullity_vs_2d_plus_chi",
            n >= bound,
            format!("|lambda| < {NULL_WINDOW} count {n} (bound 2d + chi = {bound}){note}"),
        ));
        if degree == 6 && meta.genus == 0 {
            let lo = -5.0 / 3.0 - 0.1;
            let l2 = spectrum.lambda2.unwrap_or(f64::NAN);
            verdicts.push(Verdict::new(
                7,
                "lambda2_bound",
                l2 >= lo && l2 < 0.0,
                format!("lambda2 = {l2:.6} (want in [{lo:.6}, 0))"),
            ));
        } else {
            verdicts.push(Verdict::skipped(7, "lambda2_bound", "bound stated for the degree-6 sphere only"));
        }
    }

    println!("curve {} at mesh level {} ({} unknowns, {} eigenpairs)", meta.name, cfg.mesh_level, dim, spectrum.eigenvalues.len());
    for c in &spectrum.clusters {
        println!("  cluster {:>12.6} x{}", c.center, c.multiplicity);
    }
    println!("m1 = {}, nullity = {}{}", spectrum.m1, n, if truncated { " (lower bound)" } else { "" });
    if let Some(l2) = spectrum.lambda2 {
        println!("lambda2 = {l2:.6}");
    }
    for v in &verdicts {
        println!("{}", v.line());
    }

    let failure = first_failure(&verdicts).cloned();
    let out = cfg.output_dir()?;
    write_csv(&out.join("eigenvalues.csv"), &spectrum)?;
    let report = SpectrumJson {
        schema: SCHEMA,
        command: "spectrum",
        config: cfg,
        curve: &meta,
        geometry,
        frenet,
        spectral: &spectrum,
        ledger: LedgerBlock {
            genus: meta.genus,
            degree,
            chi,
            predicted,
            measured_m1: spectrum.m1,
            measured_nullity: n,
            nullity_truncated: truncated,
        },
        verdicts: &verdicts,
        passed: failure.is_none(),
    };
    std::fs::write(out.join("report.json"), to_json(&report)?)?;
    println!("wrote {} and {}", out.join("eigenvalues.csv").display(), out.join("report.json").display());
    Ok(match failure {
        None => 0,
        Some(v) => {
            eprintln!("spectrum check failed: criterion {} ({}): {}", v.criterion, v.check, v.detail);
            1
        }
    })
}
