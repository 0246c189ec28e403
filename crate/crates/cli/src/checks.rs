//! Geometry and frame checks shared by `verify` and `spectrum`.

use crate::report::Verdict;
use s6holo::frenet::{binormal_map, chern_degree_gated, null_torsion_test, ChernReport, NullTorsionReport};
use s6holo::ledger::chern_ledger;
use s6holo::mesh::SurfaceMesh;
use s6holo::surface::{intrinsic_curvature, local_jet, CurveProvider};
use serde::Serialize;
use std::f64::consts::PI;

pub const GEODESIC_SKIP: &str = "totally geodesic convention";
const FRAME_CHECKS: [&str; 5] = ["constant_curvature", "area", "null_torsion", "chern_integers", "binormal_quadric"];

#[derive(Serialize, Debug, Clone)]
pub struct GeometryBlock {
    pub vertices: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub area: f64,
    /// area / (4 pi)
    pub degree: f64,
}

#[derive(Serialize, Debug, Clone)]
pub struct FrenetBlock {
    pub torsion: NullTorsionReport,
    pub chern: ChernReport,
}

pub fn geometry(curve: &dyn CurveProvider, mesh: &SurfaceMesh) -> anyhow::Result<GeometryBlock> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in &mesh.params {
        let (_, jet) = local_jet(curve, x, 3)?;
        let k = intrinsic_curvature(&jet)?;
        lo = lo.min(k);
        hi = hi.max(k);
    }
    let area = mesh.area();
    Ok(GeometryBlock { vertices: mesh.params.len(), k_min: lo, k_max: hi, area, degree: area / (4.0 * PI) })
}

pub fn frenet(curve: &dyn CurveProvider, mesh: &SurfaceMesh, tau_tol: f64, gate: f64) -> anyhow::Result<FrenetBlock> {
    let torsion = null_torsion_test(curve, mesh, tau_tol)?;
    let chern = chern_degree_gated(curve, mesh, gate)?;
    Ok(FrenetBlock { torsion, chern })
}

pub fn skipped_frame_checks() -> Vec<Verdict> {
    FRAME_CHECKS.iter().map(|c| Verdict::skipped(4, c, GEODESIC_SKIP)).collect()
}

/// Curvature, area, torsion, Chern and binormal checks against the curve's declared data.
pub fn frame_verdicts(
    curve: &dyn CurveProvider,
    mesh: &SurfaceMesh,
    geo: &GeometryBlock,
    fr: &FrenetBlock,
    tau_tol: f64,
) -> Vec<Verdict> {
    let meta = curve.meta();
    let mut out = Vec::new();
    match meta.curvature {
        Some(k) => {
            let err = (geo.k_min - k).abs().max((geo.k_max - k).abs());
            out.push(Verdict::new(4, "constant_curvature", err <= 1e-8, format!("max|K - {k:.6}| = {err:.3e} (tol 1e-8)")));
        }
        None => out.push(Verdict::skipped(4, "constant_curvature", "no declared curvature")),
    }
    let d = meta.degree.map(i64::from).unwrap_or(fr.chern.d);
    let want_area = 4.0 * PI * d as f64;
    let rel = (geo.area - want_area).abs() / want_area;
    out.push(Verdict::new(4, "area", rel <= 1e-3, format!("area {:.10} vs 4 pi d = {want_area:.10}, relative {rel:.3e} (tol 1e-3)", geo.area)));
    let t = &fr.torsion;
    out.push(Verdict::new(
        4,
        "null_torsion",
        t.is_null_torsion,
        format!("max|tau| = {:.3e} over {} points (tol {tau_tol:e})", t.max_abs_tau, t.evaluated),
    ));
    let c = &fr.chern;
    let res = c.residuals.iter().fold(0.0f64, |a, b| a.max(*b));
    let expected = chern_ledger(meta.genus, d as u32).ok().map(|e| (e.c1_lt, e.c1_ln, e.c1_lb));
    let got = (c.c1_lt, c.c1_ln, c.c1_lb);
    out.push(Verdict::new(
        4,
        "chern_integers",
        Some(got) == expected && res <= 1e-3,
        format!("c1(L_T, L_N, L_B) = {got:?}, expected {expected:?}, rounding residual {res:.3e} (tol 1e-3)"),
    ));
    match binormal_map(curve, mesh, Some(d)) {
        Ok(b) => out.push(Verdict::new(
            4,
            "binormal_quadric",
            b.max_quadric_residual <= 1e-10 && b.d_fs == d,
            format!("quadric residual {:.3e} (tol 1e-10), Fubini-Study degree {} (expected {d})", b.max_quadric_residual, b.d_fs),
        )),
        Err(e) => out.push(Verdict::new(4, "binormal_quadric", false, e.to_string())),
    }
    out
}
