//! Piecewise-linear discretization of the Jacobi operator on normal sections.
//!
//! Unknowns are 4 coefficients per vertex in an orthonormal basis of that
//! vertex's normal space. Inside a triangle the ambient field is interpolated
//! linearly and projected onto the normal space at each quadrature point.

use crate::eigen::{cluster, smallest_eigenpairs, BlockMatrix, BlockPattern, Cluster, EigenOptions, Eigenpairs, BLOCK};
use crate::mesh::{push_forward, triangle_point, SurfaceMesh};
use crate::octonion::ImOct;
use crate::surface::{local_jet, normal_basis, CurveProvider, FrameSeries, Mat7, PointGeometry};
use crate::taylor::tvalue;
use crate::Error;
use nalgebra::{Matrix2, Vector2, Vector3};
use rand::Rng;
use rayon::prelude::*;
use std::sync::Arc;

/// Default clustering tolerance and required inter-cluster gap.
pub const CLUSTER_TOL: f64 = 0.15;
pub const CLUSTER_GAP: f64 = 0.3;
/// Half-width of the window counted as null eigenvalues.
pub const NULL_WINDOW: f64 = 0.05;

/// Geometry at one quadrature point.
#[derive(Clone, Debug)]
pub struct QuadGeometry {
    pub p: ImOct,
    /// Orthonormal tangent frame; e2 = J e1 whenever a normal complex structure exists.
    pub e: [ImOct; 2],
    /// II(e1,e1), II(e1,e2), II(e2,e2).
    pub ii: [ImOct; 3],
    pub proj_n: Mat7,
    /// Tangent vectors d/d(lambda_1), d/d(lambda_2) of the triangle parametrization.
    pub dl: [ImOct; 2],
    pub weight: f64,
    /// J-hat and its ambient derivatives along e1, e2.
    pub j_hat: Option<(Mat7, [Mat7; 2])>,
}

impl QuadGeometry {
    pub fn project_normal(&self, w: &ImOct) -> ImOct {
        self.proj_n * w
    }

    pub fn second_form(&self, x: &ImOct, y: &ImOct) -> ImOct {
        let (x1, x2) = (self.e[0].dot(x), self.e[1].dot(x));
        let (y1, y2) = (self.e[0].dot(y), self.e[1].dot(y));
        self.ii[0] * (x1 * y1) + self.ii[1] * (x1 * y2 + x2 * y1) + self.ii[2] * (x2 * y2)
    }

    /// Differentials of the barycentric coordinates applied to a tangent vector.
    pub fn dlambda(&self, x: &ImOct) -> [f64; 3] {
        let g = Matrix2::new(
            self.dl[0].dot(&self.dl[0]),
            self.dl[0].dot(&self.dl[1]),
            self.dl[1].dot(&self.dl[0]),
            self.dl[1].dot(&self.dl[1]),
        );
        let r = g.try_inverse().unwrap_or_else(Matrix2::zeros) * Vector2::new(self.dl[0].dot(x), self.dl[1].dot(x));
        [r[0], r[1], -r[0] - r[1]]
    }

    /// Ricci-equation curvature R-perp(e1, e2) on the normal space.
    pub fn normal_curvature(&self) -> Mat7 {
        let a = [self.ii[0], self.ii[1]];
        let b = [self.ii[1], self.ii[2]];
        let mut r = Mat7::zeros();
        for k in 0..2 {
            r += a[k] * b[k].transpose() - b[k] * a[k].transpose();
        }
        r
    }
}

fn j_hat_of(e: &[ImOct]) -> Mat7 {
    (e[3] * e[2].transpose() - e[2] * e[3].transpose()) - (e[5] * e[4].transpose() - e[4] * e[5].transpose())
}

pub fn quad_geometry(curve: &dyn CurveProvider, x: &Vector3<f64>, dx: &[Vector3<f64>; 2], weight: f64) -> Result<QuadGeometry, Error> {
    let flat = curve.flat_normal_structure();
    let order = if flat.is_some() { 2 } else { 3 };
    let (chart, jet) = local_jet(curve, x, order)?;
    let g = PointGeometry::from_jet(&jet)?;
    let dl = [push_forward(&chart, &g.du, &dx[0]), push_forward(&chart, &g.du, &dx[1])];
    let proj_n = g.normal_projector();
    if let Some(j) = flat {
        return Ok(QuadGeometry { p: g.p, e: g.e, ii: g.ii, proj_n, dl, weight, j_hat: Some((j, [Mat7::zeros(); 2])) });
    }
    if g.holomorphicity_residual() > 1e-6 {
        return Ok(QuadGeometry { p: g.p, e: g.e, ii: g.ii, proj_n, dl, weight, j_hat: None });
    }
    let fs = FrameSeries::build(&jet, 1)?;
    let e: Vec<ImOct> = (0..6).map(|i| fs.value(i)).collect();
    let mut dj = [Mat7::zeros(); 2];
    for (k, d) in dj.iter_mut().enumerate() {
        let de: Vec<ImOct> = (0..6).map(|i| fs.derivative(&fs.e[i], k)).collect();
        let pair = |a: usize, b: usize| -> Mat7 {
            de[b] * e[a].transpose() + e[b] * de[a].transpose() - de[a] * e[b].transpose() - e[a] * de[b].transpose()
        };
        *d = pair(2, 3) - pair(4, 5);
    }
    Ok(QuadGeometry {
        p: g.p,
        e: [e[0], e[1]],
        ii: [tvalue(&fs.ii[0]), tvalue(&fs.ii[1]), tvalue(&fs.ii[2])],
        proj_n,
        dl,
        weight,
        j_hat: Some((j_hat_of(&e), dj)),
    })
}

// ---------------------------------------------------------------------------

/// Coefficients of a normal field in the per-vertex bases.
#[derive(Clone, Debug)]
pub struct NormalSectionField {
    pub coeffs: Vec<f64>,
    pub bases: Arc<Vec<[ImOct; 4]>>,
}

impl NormalSectionField {
    pub fn zeros(bases: Arc<Vec<[ImOct; 4]>>) -> Self {
        NormalSectionField { coeffs: vec![0.0; bases.len() * BLOCK], bases }
    }

    /// Projects an ambient field given per vertex onto the normal bases.
    pub fn from_ambient(bases: Arc<Vec<[ImOct; 4]>>, f: impl Fn(usize) -> ImOct) -> Self {
        let mut coeffs = vec![0.0; bases.len() * BLOCK];
        for (v, b) in bases.iter().enumerate() {
            let w = f(v);
            for a in 0..BLOCK {
                coeffs[v * BLOCK + a] = b[a].dot(&w);
            }
        }
        NormalSectionField { coeffs, bases }
    }

    pub fn from_coeffs(bases: Arc<Vec<[ImOct; 4]>>, coeffs: Vec<f64>) -> Result<Self, Error> {
        if coeffs.len() != bases.len() * BLOCK {
            return Err(Error::InvalidArgument(format!("expected {} coefficients, got {}", bases.len() * BLOCK, coeffs.len())));
        }
        Ok(NormalSectionField { coeffs, bases })
    }

    pub fn ambient(&self, v: usize) -> ImOct {
        let b = &self.bases[v];
        (0..BLOCK).fold(ImOct::zeros(), |acc, a| acc + b[a] * self.coeffs[v * BLOCK + a])
    }

    /// Largest |<eta, p>| + |P_T eta| over vertices, relative to |eta|.
    pub fn max_tangency(&self, mesh: &SurfaceMesh) -> f64 {
        (0..self.bases.len())
            .map(|v| {
                let w = self.ambient(v);
                let n = w.norm();
                if n == 0.0 {
                    return 0.0;
                }
                let [e1, e2] = mesh.vertex_frames[v];
                (mesh.positions[v].dot(&w).abs() + e1.dot(&w).abs() + e2.dot(&w).abs()) / n
            })
            .fold(0.0, f64::max)
    }
}

/// Normal section obtained from a random low-degree polynomial field on the parameter sphere.
pub fn random_smooth_field(mesh: &SurfaceMesh, bases: Arc<Vec<[ImOct; 4]>>, degree: usize, rng: &mut impl Rng) -> NormalSectionField {
    let monomials: Vec<[usize; 3]> = (0..=degree)
        .flat_map(|a| (0..=degree - a).flat_map(move |b| (0..=degree - a - b).map(move |c| [a, b, c])))
        .collect();
    let coefs: Vec<ImOct> = monomials.iter().map(|_| ImOct::from_fn(|_, _| rng.random_range(-1.0..1.0))).collect();
    NormalSectionField::from_ambient(bases, |v| {
        let x = &mesh.params[v];
        monomials
            .iter()
            .zip(&coefs)
            .fold(ImOct::zeros(), |acc, (m, c)| acc + c * (x[0].powi(m[0] as i32) * x[1].powi(m[1] as i32) * x[2].powi(m[2] as i32)))
    })
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct OperatorAssembly {
    pub stiffness: BlockMatrix,
    /// B + R with R = 2 (identity on normal sections).
    pub potential: BlockMatrix,
    pub mass: BlockMatrix,
    /// B from contractions of the second fundamental form.
    pub b_direct: BlockMatrix,
    /// B from J-hat R-perp(e1, e2); absent without a normal complex structure.
    pub b_dual: Option<BlockMatrix>,
    /// Quadratic form of |D-hat eta|^2 (sum over an orthonormal tangent frame).
    pub dhat: Option<BlockMatrix>,
    pub bases: Arc<Vec<[ImOct; 4]>>,
}

struct Accum {
    s: BlockMatrix,
    m: BlockMatrix,
    b: BlockMatrix,
    bd: BlockMatrix,
    d: BlockMatrix,
    complex: bool,
}

impl Accum {
    fn new(pat: &Arc<BlockPattern>) -> Self {
        Accum {
            s: BlockMatrix::zeros(pat.clone()),
            m: BlockMatrix::zeros(pat.clone()),
            b: BlockMatrix::zeros(pat.clone()),
            bd: BlockMatrix::zeros(pat.clone()),
            d: BlockMatrix::zeros(pat.clone()),
            complex: true,
        }
    }

    fn merge(mut self, o: Accum) -> Self {
        self.s.add_assign(&o.s);
        self.m.add_assign(&o.m);
        self.b.add_assign(&o.b);
        self.bd.add_assign(&o.bd);
        self.d.add_assign(&o.d);
        self.complex &= o.complex;
        self
    }
}

type Local = [[f64; 12]; 12];

fn scatter(target: &mut BlockMatrix, tri: &[usize; 3], local: &Local) {
    for a in 0..3 {
        for b in 0..3 {
            let mut blk = [[0.0; BLOCK]; BLOCK];
            for (i, row) in blk.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = local[a * BLOCK + i][b * BLOCK + j];
                }
            }
            target.add_block(tri[a], tri[b], &blk);
        }
    }
}

fn gram(out: &mut Local, w: f64, u: &[ImOct; 12], v: &[ImOct; 12]) {
    for a in 0..12 {
        for b in 0..12 {
            out[a][b] += w * u[a].dot(&v[b]);
        }
    }
}

/// Basis functions phi and their covariant derivatives along e1, e2 at a quadrature point.
pub fn element_basis(q: &QuadGeometry, bary: &[f64; 3], n: [&[ImOct; 4]; 3]) -> ([ImOct; 12], [[ImOct; 12]; 2]) {
    let mut phi = [ImOct::zeros(); 12];
    let mut dphi = [[ImOct::zeros(); 12]; 2];
    let dl = [q.dlambda(&q.e[0]), q.dlambda(&q.e[1])];
    for k in 0..3 {
        for a in 0..BLOCK {
            let nv = &n[k][a];
            let pn = q.project_normal(nv);
            let pt = q.e[0] * q.e[0].dot(nv) + q.e[1] * q.e[1].dot(nv);
            let i = k * BLOCK + a;
            phi[i] = pn * bary[k];
            for x in 0..2 {
                // nabla-perp_X P_N(f) = P_N(d_X f) - II(X, P_T f)
                dphi[x][i] = pn * dl[x][k] - q.second_form(&q.e[x], &pt) * bary[k];
            }
        }
    }
    (phi, dphi)
}

pub fn assemble_jacobi(curve: &dyn CurveProvider, mesh: &SurfaceMesh) -> Result<OperatorAssembly, Error> {
    if mesh.curve != curve.meta().name {
        return Err(Error::Inconsistent(format!("mesh built for '{}', curve is '{}'", mesh.curve, curve.meta().name)));
    }
    let bases: Vec<[ImOct; 4]> = mesh
        .params
        .par_iter()
        .map(|x| {
            let (_, jet) = local_jet(curve, x, 2)?;
            Ok(normal_basis(&PointGeometry::from_jet(&jet)?))
        })
        .collect::<Result<_, Error>>()?;
    let bases = Arc::new(bases);
    let pat = Arc::new(BlockPattern::from_triangles(mesh.params.len(), &mesh.triangles));
    let nq = crate::mesh::QUAD_BARY.len();
    let acc = mesh
        .triangles
        .par_iter()
        .enumerate()
        .try_fold(
            || Accum::new(&pat),
            |mut acc, (ti, tri)| -> Result<Accum, Error> {
                let vs = [&mesh.params[tri[0]], &mesh.params[tri[1]], &mesh.params[tri[2]]];
                let n = [&bases[tri[0]], &bases[tri[1]], &bases[tri[2]]];
                let mut ls = [[0.0; 12]; 12];
                let mut lm = [[0.0; 12]; 12];
                let mut lb = [[0.0; 12]; 12];
                let mut lbd = [[0.0; 12]; 12];
                let mut ld = [[0.0; 12]; 12];
                for qi in 0..nq {
                    let qp = &mesh.quad[ti * nq + qi];
                    let (x, dx) = triangle_point(vs, &qp.bary);
                    let q = quad_geometry(curve, &x, &dx, qp.weight)?;
                    let w = q.weight;
                    let (phi, dphi) = element_basis(&q, &qp.bary, n);
                    gram(&mut lm, w, &phi, &phi);
                    gram(&mut ls, w, &dphi[0], &dphi[0]);
                    gram(&mut ls, w, &dphi[1], &dphi[1]);
                    let proj: Vec<[f64; 12]> = q.ii.iter().map(|h| std::array::from_fn(|a| h.dot(&phi[a]))).collect();
                    for a in 0..12 {
                        for b in 0..12 {
                            lb[a][b] += w * (proj[0][a] * proj[0][b] + 2.0 * proj[1][a] * proj[1][b] + proj[2][a] * proj[2][b]);
                        }
                    }
                    match &q.j_hat {
                        Some((j, dj)) => {
                            let jr = j * q.normal_curvature();
                            let jrphi: [ImOct; 12] = std::array::from_fn(|a| jr * phi[a]);
                            gram(&mut lbd, w, &phi, &jrphi);
                            // D-hat_X = nabla_{JX} - (nabla-perp_X J-hat) - J-hat nabla_X, with J e1 = e2, J e2 = -e1
                            for x in 0..2 {
                                let nj = q.proj_n * dj[x] * q.proj_n;
                                let dh: [ImOct; 12] = std::array::from_fn(|a| {
                                    let jx = if x == 0 { dphi[1][a] } else { -dphi[0][a] };
                                    jx - nj * phi[a] - j * dphi[x][a]
                                });
                                gram(&mut ld, w, &dh, &dh);
                            }
                        }
                        None => acc.complex = false,
                    }
                }
                scatter(&mut acc.s, tri, &ls);
                scatter(&mut acc.m, tri, &lm);
                scatter(&mut acc.b, tri, &lb);
                scatter(&mut acc.bd, tri, &lbd);
                scatter(&mut acc.d, tri, &ld);
                Ok(acc)
            },
        )
        .try_reduce(|| Accum::new(&pat), |a, b| Ok(a.merge(b)))?;
    let potential = BlockMatrix::combine(&[(1.0, &acc.b), (2.0, &acc.m)]);
    for (name, mat) in [("stiffness", &acc.s), ("mass", &acc.m), ("potential", &potential)] {
        let err = mat.symmetry_error();
        if err > 1e-12 {
            return Err(Error::Inconsistent(format!("{name} matrix asymmetric ({err:e})")));
        }
    }
    let (b_dual, dhat) = if acc.complex { (Some(acc.bd), Some(acc.d)) } else { (None, None) };
    Ok(OperatorAssembly { stiffness: acc.s, potential, mass: acc.m, b_direct: acc.b, b_dual, dhat, bases })
}

impl OperatorAssembly {
    /// stiffness - potential.
    pub fn jacobi(&self) -> BlockMatrix {
        BlockMatrix::combine(&[(1.0, &self.stiffness), (-1.0, &self.potential)])
    }

    pub fn dim(&self) -> usize {
        self.mass.dim()
    }

    /// max |B_direct - B_dual| / max |B_direct|.
    pub fn b_dual_discrepancy(&self) -> Option<f64> {
        let bd = self.b_dual.as_ref()?;
        let diff = BlockMatrix::combine(&[(1.0, &self.b_direct), (-1.0, bd)]);
        let scale = self.b_direct.max_abs();
        Some(if scale == 0.0 { diff.max_abs() } else { diff.max_abs() / scale })
    }
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, serde::Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub clusters: Vec<Cluster>,
    pub cluster_tol: f64,
    pub lambda1_value: f64,
    pub m1: usize,
    /// Eigenvalues with |lambda| < NULL_WINDOW.
    pub nullity_count: usize,
    /// Center of the second cluster.
    pub lambda2: Option<f64>,
    pub max_residual: f64,
    /// Cluster index of each eigenvalue.
    #[serde(skip)]
    pub assignment: Vec<usize>,
}

pub fn spectrum_from_values(values: &[f64], cluster_tol: f64, max_residual: f64) -> SpectrumReport {
    let clusters = cluster(values, cluster_tol);
    let mut assignment = Vec::with_capacity(values.len());
    for (i, c) in clusters.iter().enumerate() {
        assignment.extend(std::iter::repeat_n(i, c.multiplicity));
    }
    SpectrumReport {
        eigenvalues: values.to_vec(),
        lambda1_value: clusters.first().map(|c| c.center).unwrap_or(f64::NAN),
        m1: clusters.first().map(|c| c.multiplicity).unwrap_or(0),
        nullity_count: values.iter().filter(|v| v.abs() < NULL_WINDOW).count(),
        lambda2: clusters.get(1).map(|c| c.center),
        clusters,
        cluster_tol,
        max_residual,
        assignment,
    }
}

pub fn solve_eigenpairs(asm: &OperatorAssembly, k: usize, opts: &EigenOptions) -> Result<Eigenpairs, Error> {
    smallest_eigenpairs(&asm.jacobi(), &asm.mass, k, opts)
}

pub fn solve_spectrum(asm: &OperatorAssembly, k: usize, cluster_tol: f64) -> Result<(SpectrumReport, Eigenpairs), Error> {
    if cluster_tol <= 0.0 || cluster_tol.is_nan() {
        return Err(Error::InvalidArgument(format!("cluster tolerance {cluster_tol} must be positive")));
    }
    let pairs = solve_eigenpairs(asm, k, &EigenOptions::default())?;
    Ok((spectrum_from_values(&pairs.values, cluster_tol, pairs.max_residual), pairs))
}

/// (q_direct, q_formula, rel_err) for one normal section.
pub fn second_variation_crosscheck(asm: &OperatorAssembly, eta: &NormalSectionField) -> Result<(f64, f64, f64), Error> {
    let d = asm
        .dhat
        .as_ref()
        .ok_or_else(|| Error::Inconsistent("no normal complex structure on this curve".into()))?;
    if eta.coeffs.len() != asm.dim() {
        return Err(Error::InvalidArgument("field does not match the assembly".into()));
    }
    let x = &eta.coeffs;
    let mass = asm.mass.form(x, x);
    let q_direct = asm.stiffness.form(x, x) - asm.potential.form(x, x);
    let q_formula = 0.5 * d.form(x, x) - 2.0 * mass;
    let rel = (q_direct - q_formula).abs() / (q_direct.abs() + q_formula.abs() + 1e-300);
    Ok((q_direct, q_formula, if q_direct == 0.0 && q_formula == 0.0 { 0.0 } else { rel }))
}

/// Number of generalized eigenvalues of (|D-hat|^2 form, mass) below tol, with the values computed.
pub fn dhat_kernel_dim(asm: &OperatorAssembly, tol: f64) -> Result<(usize, Vec<f64>), Error> {
    let d = asm
        .dhat
        .as_ref()
        .ok_or_else(|| Error::Inconsistent("no normal complex structure on this curve".into()))?;
    let mut k = 32.min(asm.dim());
    loop {
        let opts = EigenOptions { shift: 1.0, ..Default::default() };
        let pairs = smallest_eigenpairs(d, &asm.mass, k, &opts)?;
        let count = pairs.values.iter().filter(|v| **v < tol).count();
        if count < k || k == asm.dim() {
            return Ok((count, pairs.values));
        }
        k = (2 * k).min(asm.dim());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;
    use crate::surface::LinearCurve;

    #[test]
    fn geodesic_potential_is_two_mass() {
        let c = LinearCurve::geodesic_s2();
        let m = build_mesh(&c, 1).unwrap();
        let asm = assemble_jacobi(&c, &m).unwrap();
        let diff = BlockMatrix::combine(&[(1.0, &asm.potential), (-2.0, &asm.mass)]);
        assert!(diff.max_abs() < 1e-14);
        assert!(asm.b_direct.max_abs() < 1e-14);
    }
}
