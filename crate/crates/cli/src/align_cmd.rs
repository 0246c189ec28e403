use crate::config::RunConfig;
use crate::report::{first_failure, to_json, Verdict, SCHEMA};
use s6holo::align::{align_rotation, AlignmentOutcome, AlignmentProblem};
use s6holo::frenet::{null_torsion_test, NullTorsionReport};
use s6holo::mesh::build_mesh;
use s6holo::surface::{format_rotation, CurveProvider, Mat7};
use serde::Serialize;

#[derive(Serialize)]
struct AlignJson<'a> {
    schema: u32,
    command: &'static str,
    config: &'a RunConfig,
    outcome: &'a AlignmentOutcome,
    /// Row-major.
    rotation: Vec<f64>,
    torsion: Option<NullTorsionReport>,
    verdicts: &'a [Verdict],
    passed: bool,
}

pub fn run(cfg: &RunConfig) -> anyhow::Result<i32> {
    let curve = cfg.curve_def.build()?;
    let mesh = build_mesh(&curve, cfg.mesh_level as usize)?;
    let mut problem = AlignmentProblem::new(&curve, &mesh, Mat7::identity())?;
    problem.tol = cfg.tolerances.align_tol;
    problem.seed = cfg.seed;
    let outcome = align_rotation(&problem);
    let aligned_def = cfg.curve_def.then_rotate(&outcome.rotation);
    let aligned = aligned_def.build()?;

    let mut verdicts = vec![Verdict::new(
        4,
        "alignment_objective",
        outcome.residual <= cfg.tolerances.align_tol,
        format!(
            "objective {:.3e} after {} iterations from start {} (tol {:e})",
            outcome.residual, outcome.iterations, outcome.start, cfg.tolerances.align_tol
        ),
    )];
    let torsion = if aligned.meta().totally_geodesic {
        verdicts.push(Verdict::skipped(4, "null_torsion", "totally geodesic convention"));
        None
    } else {
        let t = null_torsion_test(&aligned, &mesh, cfg.tolerances.null_torsion_tol);
        match t {
            Ok(t) => {
                verdicts.push(Verdict::new(
                    4,
                    "null_torsion",
                    t.is_null_torsion,
                    format!("max|tau| = {:.3e} after alignment (tol {:e})", t.max_abs_tau, cfg.tolerances.null_torsion_tol),
                ));
                Some(t)
            }
            Err(e) => {
                verdicts.push(Verdict::new(4, "null_torsion", false, e.to_string()));
                None
            }
        }
    };

    for v in &verdicts {
        println!("{}", v.line());
    }
    let out = cfg.output_dir()?;
    std::fs::write(out.join("rotation.txt"), format_rotation(&outcome.rotation))?;
    std::fs::write(out.join("aligned.curve"), aligned_def.to_text())?;
    let failure = first_failure(&verdicts).cloned();
    let rotation: Vec<f64> = (0..49).map(|k| outcome.rotation[(k / 7, k % 7)]).collect();
    let report = AlignJson {
        schema: SCHEMA,
        command: "align",
        config: cfg,
        outcome: &outcome,
        rotation,
        torsion,
        verdicts: &verdicts,
        passed: failure.is_none(),
    };
    std::fs::write(out.join("align.json"), to_json(&report)?)?;
    println!(
        "wrote {}, {} and {}",
        out.join("rotation.txt").display(),
        out.join("aligned.curve").display(),
        out.join("align.json").display()
    );
    Ok(match failure {
        None => 0,
        Some(v) => {
            eprintln!("align failed: criterion {} ({}): {}", v.criterion, v.check, v.detail);
            1
        }
    })
}
