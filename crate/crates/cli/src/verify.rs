use crate::checks::{self, FrenetBlock, GeometryBlock};
use crate::config::RunConfig;
use crate::report::{first_failure, to_json, Verdict, SCHEMA};
use s6holo::identities::{identity_residuals, random_trial_fields, IdentityReport, Residual};
use s6holo::jacobi::{assemble_jacobi, random_smooth_field, second_variation_crosscheck};
use s6holo::mesh::build_mesh;
use s6holo::octonion::{algebra_invariants, nearly_kahler_convergence, AlgebraReport, NearlyKahlerReport, G2};
use s6holo::surface::CurveProvider;
use serde::Serialize;

const ALGEBRA_SAMPLES: usize = 1000;
const NK_SAMPLES: usize = 200;
const NK_STEP: f64 = 1e-2;
const TRIAL_FIELDS: usize = 10;
/// Residuals this small at both levels are exact up to rounding and carry no convergence rate.
const ROUNDING_FLOOR: f64 = 1e-12;

#[derive(Serialize)]
struct NearlyKahler {
    coarse: NearlyKahlerReport,
    fine: NearlyKahlerReport,
    ratio: f64,
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    schema: u32,
    command: &'static str,
    config: &'a RunConfig,
    algebra: AlgebraReport,
    nearly_kahler: Option<NearlyKahler>,
    geometry: Option<GeometryBlock>,
    frenet: Option<FrenetBlock>,
    identities: Vec<IdentityReport>,
    b_dual_discrepancy: Option<f64>,
    second_variation_max_rel: Option<f64>,
    verdicts: &'a [Verdict],
    passed: bool,
}

fn ratio_verdict(name: &str, coarse: &Residual, fine: &Residual, levels: (u8, u8)) -> Verdict {
    let check = format!("{name}_convergence");
    if coarse.max_abs <= ROUNDING_FLOOR && fine.max_abs <= ROUNDING_FLOOR {
        return Verdict::new(8, &check, true, format!("exact to rounding ({:.1e}, {:.1e})", coarse.max_abs, fine.max_abs));
    }
    let r = coarse.max_abs / fine.max_abs;
    Verdict::new(
        8,
        &check,
        r >= 3.0,
        format!("max residual {:.3e} at level {} -> {:.3e} at level {}, factor {r:.2} (need >= 3)", coarse.max_abs, levels.0, fine.max_abs, levels.1),
    )
}

pub fn run(cfg: &RunConfig) -> anyhow::Result<i32> {
    let curve = cfg.curve_def.build()?;
    let geodesic = curve.meta().totally_geodesic;
    let mut verdicts = Vec::new();

    let algebra = algebra_invariants(G2::standard(), ALGEBRA_SAMPLES, cfg.seed);
    verdicts.push(Verdict::new(
        1,
        "algebra_invariants",
        algebra.max_residual() <= 1e-10,
        format!(
            "antisymmetry {:.1e}, norm identity {:.1e}, J^2 {:.1e}, Upsilon volume {:.1e} on {ALGEBRA_SAMPLES} samples (tol 1e-10)",
            algebra.antisymmetry, algebra.norm_identity, algebra.j_squared, algebra.upsilon_volume
        ),
    ));

    let nearly_kahler = match nearly_kahler_convergence(NK_SAMPLES, NK_STEP, cfg.seed) {
        Ok((coarse, fine, _)) => {
            let r1 = coarse.d_omega / fine.d_omega;
            let r2 = coarse.d_re_upsilon / fine.d_re_upsilon;
            let ok = (3.0..=5.0).contains(&r1) && (3.0..=5.0).contains(&r2);
            verdicts.push(Verdict::new(
                2,
                "nearly_kahler_fd",
                ok,
                format!("halving h = {NK_STEP}: dOmega ratio {r1:.3}, dRe(Upsilon) ratio {r2:.3} (window [3, 5])"),
            ));
            Some(NearlyKahler { ratio: r1.min(r2), coarse, fine })
        }
        Err(e) => {
            verdicts.push(Verdict::new(2, "nearly_kahler_fd", false, e.to_string()));
            None
        }
    };

    let mesh = build_mesh(&curve, cfg.mesh_level as usize)?;
    let (mut geometry, mut frenet) = (None, None);
    if geodesic {
        verdicts.extend(checks::skipped_frame_checks());
    } else {
        let geo = checks::geometry(&curve, &mesh)?;
        match checks::frenet(&curve, &mesh, cfg.tolerances.null_torsion_tol, cfg.tolerances.chern_gate) {
            Ok(fr) => {
                verdicts.extend(checks::frame_verdicts(&curve, &mesh, &geo, &fr, cfg.tolerances.null_torsion_tol));
                frenet = Some(fr);
            }
            Err(e) => verdicts.push(Verdict::new(4, "frenet_frames", false, e.to_string())),
        }
        geometry = Some(geo);
    }

    // identity residuals at the configured level and one finer
    let coarse_level = cfg.mesh_level.min(7);
    let levels = (coarse_level, coarse_level + 1);
    let fields = random_trial_fields(TRIAL_FIELDS, 3, cfg.seed);
    let mut identities = Vec::new();
    let coarse_mesh = if coarse_level == cfg.mesh_level { mesh.clone() } else { build_mesh(&curve, coarse_level as usize)? };
    let fine_mesh = build_mesh(&curve, levels.1 as usize)?;
    match (identity_residuals(&curve, &coarse_mesh, &fields), identity_residuals(&curve, &fine_mesh, &fields)) {
        (Ok(a), Ok(b)) => {
            let (ra, rb) = (&a.residuals, &b.residuals);
            for (name, x, y) in [
                ("psi_codifferential", &ra.psi_codifferential, &rb.psi_codifferential),
                ("omega_codifferential", &ra.omega_codifferential, &rb.omega_codifferential),
                ("normal_curvature", &ra.normal_curvature, &rb.normal_curvature),
                ("commutator", &ra.commutator, &rb.commutator),
                ("trace_transfer", &ra.trace_transfer, &rb.trace_transfer),
            ] {
                verdicts.push(ratio_verdict(name, x, y, levels));
            }
            let psi = ra.psi_codifferential.relative;
            verdicts.push(Verdict::new(
                8,
                "psi_codifferential_residual",
                psi <= 1e-2,
                format!("relative residual {psi:.3e} at level {} (tol 1e-2)", levels.0),
            ));
            identities = vec![a, b];
        }
        (Err(e), _) | (_, Err(e)) => verdicts.push(Verdict::new(8, "identity_residuals", false, e.to_string())),
    }

    let (mut b_dual, mut second_variation) = (None, None);
    match assemble_jacobi(&curve, &mesh) {
        Ok(asm) => {
            match asm.b_dual_discrepancy() {
                Some(x) => {
                    verdicts.push(Verdict::new(8, "b_dual_assembly", x <= 1e-8, format!("relative discrepancy {x:.3e} (tol 1e-8)")));
                    b_dual = Some(x);
                }
                None => verdicts.push(Verdict::skipped(8, "b_dual_assembly", "no normal complex structure")),
            }
            let mut rng = s6holo::rng(cfg.seed);
            let mut worst: Option<f64> = None;
            for _ in 0..TRIAL_FIELDS {
                let eta = random_smooth_field(&mesh, asm.bases.clone(), 3, &mut rng);
                match second_variation_crosscheck(&asm, &eta) {
                    Ok((_, _, rel)) => worst = Some(worst.unwrap_or(0.0).max(rel)),
                    Err(_) => break,
                }
            }
            match worst {
                Some(w) => verdicts.push(Verdict::new(
                    8,
                    "second_variation",
                    w <= 1e-3,
                    format!("max relative error {w:.3e} over {TRIAL_FIELDS} fields at level {} (tol 1e-3)", cfg.mesh_level),
                )),
                None => verdicts.push(Verdict::skipped(8, "second_variation", "no normal complex structure")),
            }
            second_variation = worst;
        }
        Err(e) => verdicts.push(Verdict::new(8, "jacobi_assembly", false, e.to_string())),
    }

    for v in &verdicts {
        println!("{}", v.line());
    }
    let failure = first_failure(&verdicts).cloned();
    let report = VerifyReport {
        schema: SCHEMA,
        command: "verify",
        config: cfg,
        algebra,
        nearly_kahler,
        geometry,
        frenet,
        identities,
        b_dual_discrepancy: b_dual,
        second_variation_max_rel: second_variation,
        verdicts: &verdicts,
        passed: failure.is_none(),
    };
    let path = cfg.output_dir()?.join("verify.json");
    std::fs::write(&path, to_json(&report)?)?;
    println!("report: {}", path.display());
    Ok(match failure {
        None => {
            println!("verify: all checks passed");
            0
        }
        Some(v) => {
            eprintln!("verify failed: criterion {} ({}): {}", v.criterion, v.check, v.detail);
            1
        }
    })
}
