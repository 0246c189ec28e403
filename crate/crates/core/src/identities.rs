//! Finite-difference covariant calculus on normal-bundle-valued tensors and
//! residuals of the pointwise identities relating Psi, Omega and the Jacobi
//! operator.
//!
//! Around each sample point we lay a (2R+1)^2 grid in a gnomonic chart with
//! step h and store, per grid point, the geometry (frame e1, e2 = J e1,
//! connection form, projectors, J-hat). A tensor with k tangent slots is kept
//! as 2^k ambient vectors per grid point, its values on the frame. Each
//! covariant derivative is a fourth-order central difference followed by the
//! normal projection and the frame-connection correction, and shrinks the grid
//! by the stencil half-width.

use crate::frenet::{adapt_frame_at, herm, CVec7};
use crate::mesh::{build_mesh, SurfaceMesh};
use crate::octonion::{G2, ImOct};
use crate::surface::{evaluate_jet, normal_splitting_geometry, Chart, CurveProvider, Mat7, PointGeometry};
use crate::Error;
use nalgebra::{Matrix2, Vector2, Vector3};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

/// Half-width of the fourth-order central difference stencil.
pub const STENCIL: i64 = 2;
/// Grid half-width; enough for three nested derivatives.
pub const GRID_RADIUS: i64 = 3 * STENCIL;
/// Number of coarse icosphere vertices used as sample points.
pub const SAMPLE_LEVEL: usize = 2;
/// Mesh level whose vertices carry the quadrature for the integral identity.
pub const ENERGY_LEVEL: usize = 3;
/// Largest finite-difference step (coarse meshes would leave the chart).
pub const MAX_STEP: f64 = 0.1;

// ---------------------------------------------------------------------------
// Trial fields

/// Ambient polynomial F on the parameter sphere; the trial section is P_N F.
#[derive(Clone, Debug)]
pub struct TrialField {
    pub terms: Vec<([u32; 3], ImOct)>,
}

impl TrialField {
    pub fn random<R: Rng>(rng: &mut R, degree: u32) -> Self {
        let mut terms = Vec::new();
        for a in 0..=degree {
            for b in 0..=degree - a {
                for c in 0..=degree - a - b {
                    terms.push(([a, b, c], ImOct::from_fn(|_, _| rng.random_range(-1.0..1.0))));
                }
            }
        }
        TrialField { terms }
    }

    pub fn eval(&self, x: &Vector3<f64>) -> ImOct {
        self.terms
            .iter()
            .map(|(e, c)| c * (x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32)))
            .sum()
    }
}

pub fn random_trial_fields(count: usize, degree: u32, seed: u64) -> Vec<TrialField> {
    let mut rng = crate::rng(seed);
    (0..count).map(|_| TrialField::random(&mut rng, degree)).collect()
}

// ---------------------------------------------------------------------------
// Grid geometry

#[derive(Clone, Debug)]
struct GridPoint {
    x: Vector3<f64>,
    /// Chart components of e1 (unit chart s-direction) and e2 = J e1.
    dir: [[f64; 2]; 2],
    /// omega(e_a) = <nabla_{e_a} e1, e2>.
    omega: [f64; 2],
    ii: [ImOct; 3],
    k: f64,
    proj_n: Mat7,
    j_hat: Mat7,
    /// Projector onto E_N (zero on a totally geodesic surface).
    proj_en: Mat7,
    proj_b: Mat7,
}

struct Patch {
    r: i64,
    h: f64,
    pts: Vec<GridPoint>,
}

impl Patch {
    fn new(curve: &dyn CurveProvider, center: &Vector3<f64>, h: f64, r: i64) -> Result<Self, Error> {
        let chart = Chart::gnomonic(center);
        let oct = G2::standard();
        let flat = curve.flat_normal_structure();
        let n = 2 * r + 1;
        let mut pts = Vec::with_capacity((n * n) as usize);
        for i in -r..=r {
            for j in -r..=r {
                let uv = [i as f64 * h, j as f64 * h];
                let jet = evaluate_jet(curve, &chart, uv, 2)?;
                let g = PointGeometry::from_jet(&jet)?;
                let e1 = g.e[0];
                let e2 = oct.cross(&g.p, &e1);
                let du = g.du;
                let metric = Matrix2::new(du[0].dot(&du[0]), du[0].dot(&du[1]), du[1].dot(&du[0]), du[1].dot(&du[1]));
                let ginv = metric.try_inverse().ok_or_else(|| Error::DegenerateMetric(format!("{uv:?}")))?;
                let dir = [e1, e2].map(|v| {
                    let c = ginv * Vector2::new(du[0].dot(&v), du[1].dot(&v));
                    [c[0], c[1]]
                });
                let (uss, ust) = (jet.partial(2, 0), jet.partial(1, 1));
                let ns = du[0].norm();
                let omega = dir.map(|c| (uss * c[0] + ust * c[1]).dot(&e2) / ns);
                // II in the (e1, J e1) frame
                let ii = [g.second_form(&e1, &e1), g.second_form(&e1, &e2), g.second_form(&e2, &e2)];
                let proj_n = g.normal_projector();
                let (j_hat, proj_en, proj_b) = match flat {
                    Some(j) => (j, Mat7::zeros(), proj_n),
                    None => {
                        let s = normal_splitting_geometry(&g)?;
                        (s.j_hat, s.proj_n, s.proj_b)
                    }
                };
                pts.push(GridPoint {
                    x: chart.point_value(uv)?,
                    dir,
                    omega,
                    ii,
                    k: g.gauss_curvature_extrinsic(),
                    proj_n,
                    j_hat,
                    proj_en,
                    proj_b,
                });
            }
        }
        Ok(Patch { r, h, pts })
    }

    fn at(&self, i: i64, j: i64) -> &GridPoint {
        let n = 2 * self.r + 1;
        &self.pts[((i + self.r) * n + (j + self.r)) as usize]
    }
}

// ---------------------------------------------------------------------------
// Tensor fields on a patch

/// Normal-valued tensor with `rank` tangent slots on a grid of half-width `r`.
/// Component index: slot m contributes bit m; slot 0 is the outermost derivative.
#[derive(Clone, Debug)]
struct Field {
    r: i64,
    rank: usize,
    data: Vec<ImOct>,
}

impl Field {
    fn from_fn(r: i64, rank: usize, mut f: impl FnMut(i64, i64, usize) -> ImOct) -> Self {
        let nc = 1usize << rank;
        let mut data = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize * nc);
        for i in -r..=r {
            for j in -r..=r {
                for c in 0..nc {
                    data.push(f(i, j, c));
                }
            }
        }
        Field { r, rank, data }
    }

    fn get(&self, i: i64, j: i64, c: usize) -> ImOct {
        let n = 2 * self.r + 1;
        let cell = ((i + self.r) * n + (j + self.r)) as usize;
        self.data[(cell << self.rank) + c]
    }

    fn center(&self, c: usize) -> ImOct {
        self.get(0, 0, c)
    }
}

/// Components of a tensor in slot positions.
fn idx(slots: &[usize]) -> usize {
    slots.iter().enumerate().map(|(m, b)| b << m).sum()
}

/// J e_k = sign * e_{other}: J e1 = e2, J e2 = -e1.
fn j_slot(k: usize) -> (f64, usize) {
    if k == 0 {
        (1.0, 1)
    } else {
        (-1.0, 0)
    }
}

fn nabla(p: &Patch, f: &Field) -> Field {
    let r = f.r - STENCIL;
    let h12 = 12.0 * p.h;
    Field::from_fn(r, f.rank + 1, |i, j, c| {
        let a = c & 1;
        let old = c >> 1;
        let g = p.at(i, j);
        let d = |di: i64, dj: i64| {
            (f.get(i + di, j + dj, old) - f.get(i - di, j - dj, old)) * 8.0
                - (f.get(i + 2 * di, j + 2 * dj, old) - f.get(i - 2 * di, j - 2 * dj, old))
        };
        let ds = d(1, 0) / h12;
        let dt = d(0, 1) / h12;
        let mut v = g.proj_n * (ds * g.dir[a][0] + dt * g.dir[a][1]);
        // nabla_{e_a} e1 = w e2, nabla_{e_a} e2 = -w e1
        let w = g.omega[a];
        for m in 0..f.rank {
            let flipped = old ^ (1 << m);
            if old >> m & 1 == 0 {
                v -= f.get(i, j, flipped) * w;
            } else {
                v += f.get(i, j, flipped) * w;
            }
        }
        v
    })
}

/// Psi(X) = nabla_{JX} eta - J-hat nabla_X eta, from the first covariant derivative.
fn psi_from(p: &Patch, d: &Field) -> Field {
    Field::from_fn(d.r, 1, |i, j, b| {
        let (s, bb) = j_slot(b);
        d.get(i, j, bb) * s - p.at(i, j).j_hat * d.get(i, j, b)
    })
}

/// -sum_a T(e_a, e_a, ...) for a tensor of rank >= 2.
fn neg_trace(f: &Field) -> Field {
    Field::from_fn(f.r, f.rank - 2, |i, j, c| -(f.get(i, j, c << 2) + f.get(i, j, 3 | (c << 2))))
}

fn b_operator(g: &GridPoint, eta: &ImOct) -> ImOct {
    let mut out = ImOct::zeros();
    for (k, w) in [1.0, 2.0, 1.0].iter().enumerate() {
        out += g.ii[k] * (w * g.ii[k].dot(eta));
    }
    out
}

/// L eta = -Laplacian eta - B eta - 2 eta, from eta and its second derivative.
fn jacobi_from(p: &Patch, eta: &Field, dd: &Field) -> Field {
    Field::from_fn(dd.r, 0, |i, j, _| {
        let lap = dd.get(i, j, 0) + dd.get(i, j, 3);
        let e = eta.get(i, j, 0);
        -lap - b_operator(p.at(i, j), &e) - e * 2.0
    })
}

// ---------------------------------------------------------------------------
// Residual bookkeeping

#[derive(Clone, Copy, Debug, Default, serde::Serialize)]
pub struct Residual {
    /// max |lhs - rhs| over samples and trial fields.
    pub max_abs: f64,
    /// max of max(|lhs|, |rhs|, reference) over the same set.
    pub scale: f64,
    pub relative: f64,
}

impl Residual {
    fn add(&mut self, lhs: &ImOct, rhs: &ImOct) {
        self.add_ref(lhs, rhs, 0.0);
    }

    /// `reference` keeps the scale meaningful when both sides vanish identically.
    fn add_ref(&mut self, lhs: &ImOct, rhs: &ImOct, reference: f64) {
        self.max_abs = self.max_abs.max((lhs - rhs).norm());
        self.scale = self.scale.max(lhs.norm().max(rhs.norm()).max(reference));
    }

    fn merge(mut self, o: &Residual) -> Residual {
        self.max_abs = self.max_abs.max(o.max_abs);
        self.scale = self.scale.max(o.scale);
        self
    }

    fn finish(mut self) -> Residual {
        self.relative = if self.scale > 0.0 { self.max_abs / self.scale } else { self.max_abs };
        self
    }
}

#[derive(Clone, Copy, Debug, Default, serde::Serialize)]
pub struct PointResiduals {
    /// codifferential of Psi against -J-hat (L eta + 2 eta)
    pub psi_codifferential: Residual,
    /// codifferential of Omega against -Psi_{L eta} + (2K - 2) Psi^B
    pub omega_codifferential: Residual,
    /// finite-difference normal curvature against (K - 1) J-hat eta^N
    pub normal_curvature: Residual,
    /// commutation of second derivatives of an anti-J-linear form
    pub commutator: Residual,
    /// J-hat Psi of the codifferential against the trace of the second derivative
    pub trace_transfer: Residual,
}

impl PointResiduals {
    fn merge(self, o: &PointResiduals) -> PointResiduals {
        PointResiduals {
            psi_codifferential: self.psi_codifferential.merge(&o.psi_codifferential),
            omega_codifferential: self.omega_codifferential.merge(&o.omega_codifferential),
            normal_curvature: self.normal_curvature.merge(&o.normal_curvature),
            commutator: self.commutator.merge(&o.commutator),
            trace_transfer: self.trace_transfer.merge(&o.trace_transfer),
        }
    }

    fn finish(self) -> PointResiduals {
        PointResiduals {
            psi_codifferential: self.psi_codifferential.finish(),
            omega_codifferential: self.omega_codifferential.finish(),
            normal_curvature: self.normal_curvature.finish(),
            commutator: self.commutator.finish(),
            trace_transfer: self.trace_transfer.finish(),
        }
    }

    /// Largest relative residual of the five identities.
    pub fn worst(&self) -> f64 {
        [
            self.psi_codifferential.relative,
            self.omega_codifferential.relative,
            self.normal_curvature.relative,
            self.commutator.relative,
            self.trace_transfer.relative,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Integrands of the Omega energy identity at the patch center.
struct Energy {
    omega_sq: f64,
    pairing: f64,
}

fn sample_field(p: &Patch, field: &TrialField) -> Field {
    Field::from_fn(p.r, 0, |i, j, _| {
        let g = p.at(i, j);
        g.proj_n * field.eval(&g.x)
    })
}

fn patch_residuals(p: &Patch, field: &TrialField, out: &mut PointResiduals) -> Energy {
    let g0 = p.at(0, 0);
    let kk = g0.k;
    let eta = sample_field(p, field);
    let d1 = nabla(p, &eta);
    let d2 = nabla(p, &d1);
    let psi = psi_from(p, &d1);

    // codifferential of Psi
    let dpsi = nabla(p, &psi);
    let lhs = neg_trace(&dpsi).center(0);
    let lap = d2.center(0) + d2.center(3);
    let e0 = eta.center(0);
    let rhs = -(g0.j_hat * (-lap - b_operator(g0, &e0)));
    out.psi_codifferential.add(&lhs, &rhs);

    // Omega(X, Y) = (nabla_{JX} Psi)(JY) - (nabla_X Psi)(Y)
    let omega = Field::from_fn(dpsi.r, 2, |i, j, c| {
        let (a, b) = (c & 1, c >> 1);
        let (sa, ab) = j_slot(a);
        let (sb, bb) = j_slot(b);
        dpsi.get(i, j, idx(&[ab, bb])) * (sa * sb) - dpsi.get(i, j, c)
    });
    let domega = nabla(p, &omega);
    let leta = jacobi_from(p, &eta, &d2);
    let psi_l = psi_from(p, &nabla(p, &leta));
    let mut energy = Energy { omega_sq: 0.0, pairing: 0.0 };
    for b in 0..2 {
        let lhs = -(domega.center(idx(&[0, 0, b])) + domega.center(idx(&[1, 1, b])));
        let rhs = -psi_l.center(b) + g0.proj_b * psi.center(b) * (2.0 * kk - 2.0);
        out.omega_codifferential.add(&lhs, &rhs);
        let psi_b = psi.center(b);
        energy.pairing += 2.0 * psi_b.dot(&(psi_l.center(b) + g0.proj_b * psi_b * (2.0 - 2.0 * kk)));
    }
    for c in 0..4 {
        energy.omega_sq += omega.center(c).norm_squared();
    }

    // normal curvature R(e1, e2) eta
    let lhs = d2.center(idx(&[0, 1])) - d2.center(idx(&[1, 0]));
    let rhs = g0.j_hat * (g0.proj_en * e0) * (kk - 1.0);
    out.normal_curvature.add_ref(&lhs, &rhs, e0.norm());

    // second derivatives of alpha = Psi: t(x, y, z) = (nabla^2_{x,y} alpha)(z)
    let a1 = dpsi;
    let a2 = nabla(p, &a1);
    let t = |x: usize, y: usize, z: usize| a2.center(idx(&[x, y, z]));
    let codiff = neg_trace(&a1);
    let psi_codiff = psi_from(p, &nabla(p, &codiff));
    for b in 0..2 {
        let (sb, bb) = j_slot(b);
        let mut lhs = ImOct::zeros();
        let mut swapped = ImOct::zeros();
        for i in 0..2 {
            let (si, ib) = j_slot(i);
            lhs += t(i, bb, ib) * (sb * si) - t(i, b, i);
            swapped += t(bb, i, ib) * (sb * si) - t(b, i, i);
        }
        let alpha = psi.center(b);
        let rhs = swapped - alpha * 2.0 - g0.proj_b * alpha * (2.0 * kk - 2.0);
        out.commutator.add(&lhs, &rhs);
        out.trace_transfer.add(&(g0.j_hat * psi_codiff.center(b)), &swapped);
    }
    energy
}

// ---------------------------------------------------------------------------
// Difference tensor between the two normal holomorphic structures

/// (max |S(f2)|, max |S(conj f3) - f2 / 2|) on Z-bar = (e1 + i e2) / 2 over the sample points.
pub fn difference_tensor_residuals(curve: &dyn CurveProvider, points: &[Vector3<f64>]) -> Result<(f64, f64), Error> {
    let oct = G2::standard();
    let res: Vec<(f64, f64)> = points
        .par_iter()
        .map(|x| {
            let fr = adapt_frame_at(curve, x)?;
            let p = fr.p;
            let pn = {
                let mut m = Mat7::identity();
                for v in [&p, &fr.e[0], &fr.e[1]] {
                    m -= v * v.transpose();
                }
                m
            };
            // (nabla-perp - D-perp)_X xi = P_N (p x (X x xi)) / 2, complex bilinear in (X, xi)
            let diff = |xr: &ImOct, xi_: &ImOct, vr: &ImOct, vi: &ImOct| -> CVec7 {
                let c = |a: &ImOct, b: &ImOct| pn * oct.cross(&p, &oct.cross(a, b)) * 0.5;
                let re = c(xr, vr) - c(xi_, vi);
                let im = c(xr, vi) + c(xi_, vr);
                crate::frenet::complexify(&re, &im)
            };
            let (zr, zi) = (fr.e[0] * 0.5, fr.e[1] * 0.5);
            let f2 = fr.f(1);
            let f3 = fr.f(2);
            let re = |v: &CVec7| v.map(|z| z.re);
            let im = |v: &CVec7| v.map(|z| z.im);
            let s_f2 = diff(&zr, &zi, &re(&f2), &im(&f2));
            let f3c = f3.map(|z| z.conj());
            let s_f3 = diff(&zr, &zi, &re(&f3c), &im(&f3c));
            let r3 = s_f3 - f2 * Complex64::new(0.5, 0.0);
            Ok((herm(&s_f2, &s_f2).re.sqrt(), herm(&r3, &r3).re.sqrt()))
        })
        .collect::<Result<_, Error>>()?;
    Ok(res.iter().fold((0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1))))
}

// ---------------------------------------------------------------------------
// Report

#[derive(Clone, Debug, serde::Serialize)]
pub struct EnergyCheck {
    /// integral of |Omega|^2
    pub omega_energy: f64,
    /// 2 * integral of <Psi, Psi_{L eta} + (2 - 2K) Psi^B>
    pub pairing: f64,
    pub relative: f64,
    pub quadrature_level: usize,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct IdentityReport {
    pub curve: String,
    pub level: usize,
    /// Finite-difference step in chart units.
    pub step: f64,
    pub samples: usize,
    pub fields: usize,
    pub residuals: PointResiduals,
    /// (|S(f2)|, |S(conj f3) - zeta-bar f2 / 2|); None on a totally geodesic surface.
    pub difference_tensor: Option<(f64, f64)>,
    pub energy: Option<EnergyCheck>,
}

fn sample_points(mesh: &SurfaceMesh) -> Vec<Vector3<f64>> {
    let n = (10 * 4usize.pow(SAMPLE_LEVEL as u32) + 2).min(mesh.params.len());
    mesh.params[..n].to_vec()
}

pub fn fd_step(mesh: &SurfaceMesh) -> f64 {
    mesh.parameter_spacing().min(MAX_STEP)
}

/// Pointwise identity residuals at the coarse sample vertices, with the
/// finite-difference step equal to the mesh spacing.
pub fn pointwise_residuals(curve: &dyn CurveProvider, mesh: &SurfaceMesh, fields: &[TrialField]) -> Result<PointResiduals, Error> {
    let h = fd_step(mesh);
    let pts = sample_points(mesh);
    let per: Vec<PointResiduals> = pts
        .par_iter()
        .map(|x| {
            let patch = Patch::new(curve, x, h, GRID_RADIUS)?;
            let mut acc = PointResiduals::default();
            for f in fields {
                patch_residuals(&patch, f, &mut acc);
            }
            Ok(acc)
        })
        .collect::<Result<_, Error>>()?;
    Ok(per.iter().fold(PointResiduals::default(), |a, b| a.merge(b)).finish())
}

/// Integral identity int |Omega|^2 = 2 int <Psi, Psi_{L eta} + (2 - 2K) Psi^B>, summed over the
/// trial fields, with vertex-lumped quadrature on a level-3 mesh.
pub fn energy_identity(curve: &dyn CurveProvider, h: f64, fields: &[TrialField]) -> Result<EnergyCheck, Error> {
    let q = build_mesh(curve, ENERGY_LEVEL)?;
    let parts: Vec<(f64, f64)> = q
        .params
        .par_iter()
        .zip(q.vertex_area.par_iter())
        .map(|(x, w)| {
            let patch = Patch::new(curve, x, h, GRID_RADIUS)?;
            let mut scratch = PointResiduals::default();
            let mut s = (0.0, 0.0);
            for f in fields {
                let e = patch_residuals(&patch, f, &mut scratch);
                s.0 += w * e.omega_sq;
                s.1 += w * e.pairing;
            }
            Ok(s)
        })
        .collect::<Result<_, Error>>()?;
    let (a, b) = parts.iter().fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    Ok(EnergyCheck { omega_energy: a, pairing: b, relative: (a - b).abs() / a.abs().max(b.abs()).max(1e-300), quadrature_level: ENERGY_LEVEL })
}

pub fn identity_residuals(curve: &dyn CurveProvider, mesh: &SurfaceMesh, fields: &[TrialField]) -> Result<IdentityReport, Error> {
    if mesh.curve != curve.meta().name {
        return Err(Error::InvalidArgument(format!("mesh built for {} used with {}", mesh.curve, curve.meta().name)));
    }
    let residuals = pointwise_residuals(curve, mesh, fields)?;
    let pts = sample_points(mesh);
    let difference_tensor =
        if curve.flat_normal_structure().is_some() { None } else { Some(difference_tensor_residuals(curve, &pts)?) };
    let energy = Some(energy_identity(curve, fd_step(mesh), fields)?);
    Ok(IdentityReport {
        curve: curve.meta().name.clone(),
        level: mesh.level,
        step: fd_step(mesh),
        samples: pts.len(),
        fields: fields.len(),
        residuals,
        difference_tensor,
        energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::LinearCurve;

    #[test]
    fn flat_patch_has_vanishing_connection_terms_on_geodesic() {
        let c = LinearCurve::geodesic_s2();
        let x = Vector3::new(0.3, -0.2, 0.9).normalize();
        let p = Patch::new(&c, &x, 0.05, 2).unwrap();
        let g = p.at(0, 0);
        assert!((g.k - 1.0).abs() < 1e-12);
        assert!(g.ii.iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn derivative_of_constant_projection_is_tangent_free() {
        let c = LinearCurve::boruvka();
        let x = Vector3::new(0.1, 0.7, -0.4).normalize();
        let p = Patch::new(&c, &x, 0.02, STENCIL).unwrap();
        let f = TrialField { terms: vec![([0, 0, 0], ImOct::from_fn(|i, _| i as f64 - 2.0))] };
        let eta = sample_field(&p, &f);
        let d = nabla(&p, &eta);
        for c in 0..2 {
            let v = d.center(c);
            assert!((p.at(0, 0).proj_n * v - v).norm() < 1e-12);
        }
    }
}
