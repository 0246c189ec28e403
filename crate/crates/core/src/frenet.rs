//! Adapted frames along holomorphic curves, torsion, bundle curvatures,
//! Chern integrals and the binormal map.

use crate::mesh::SurfaceMesh;
use crate::octonion::{G2, ImOct};
use crate::surface::{
    evaluate_jet, local_jet, normal_splitting_geometry, Chart, CurveProvider, FrameSeries, Jet, Mat7, PointGeometry,
};
use crate::taylor::TVec;
use crate::Error;
use nalgebra::{SVector, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;

pub type CVec7 = SVector<Complex64, 7>;

/// Hermitian product h(a, b) = sum a_k conj(b_k).
pub fn herm(a: &CVec7, b: &CVec7) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

pub fn complexify(re: &ImOct, im: &ImOct) -> CVec7 {
    CVec7::from_fn(|k, _| Complex64::new(re[k], im[k]))
}

/// f = (a - i b) / 2.
pub fn half_pair(a: &ImOct, b: &ImOct) -> CVec7 {
    complexify(&(a * 0.5), &(b * -0.5))
}

#[derive(Clone, Debug)]
pub struct AdaptedFrame {
    pub p: ImOct,
    pub e: [ImOct; 6],
    pub kappa: Complex64,
    pub mu: Complex64,
    pub tau: Complex64,
    /// gamma_jj evaluated on (e1, e2), j = 1..3.
    pub gamma_diag: [[Complex64; 2]; 3],
    /// Derivatives of e1..e6 along e1 and e2 (ambient).
    pub de: [[ImOct; 6]; 2],
}

impl AdaptedFrame {
    pub fn f(&self, k: usize) -> CVec7 {
        half_pair(&self.e[2 * k], &self.e[2 * k + 1])
    }

    /// Derivative of f_{k+1} along e_{dir+1}.
    pub fn df(&self, k: usize, dir: usize) -> CVec7 {
        half_pair(&self.de[dir][2 * k], &self.de[dir][2 * k + 1])
    }

    /// Levi-Civita derivative of f_{k+1} along e_{dir+1} in S^6.
    pub fn nabla_f(&self, k: usize, dir: usize) -> CVec7 {
        let f = self.f(k);
        let x = self.e[dir];
        let fx: Complex64 = f.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        self.df(k, dir) + self.p.map(|v| Complex64::new(v, 0.0)) * fx
    }

    /// gamma_{j i}(e_dir) = 2 h(nabla f_i, f_j), 0-based.
    pub fn gamma(&self, j: usize, i: usize, dir: usize) -> Complex64 {
        herm(&self.nabla_f(i, dir), &self.f(j)) * 2.0
    }

    /// zeta_k(X) = 2 h(X, f_k) for a real vector X.
    pub fn zeta(&self, k: usize, x: &ImOct) -> Complex64 {
        herm(&x.map(|v| Complex64::new(v, 0.0)), &self.f(k)) * 2.0
    }

    pub fn j_hat(&self) -> Mat7 {
        let [_, _, e3, e4, e5, e6] = self.e;
        (e4 * e3.transpose() - e3 * e4.transpose()) - (e6 * e5.transpose() - e5 * e6.transpose())
    }
}

fn frame_from_series(fs: &FrameSeries) -> AdaptedFrame {
    let p = crate::taylor::tvalue(&fs.p);
    let e: [ImOct; 6] = std::array::from_fn(|i| fs.value(i));
    let de: [[ImOct; 6]; 2] = std::array::from_fn(|d| std::array::from_fn(|i| fs.derivative(&fs.e[i], d)));
    let mut fr = AdaptedFrame {
        p,
        e,
        kappa: Complex64::new(0.0, 0.0),
        mu: Complex64::new(0.0, 0.0),
        tau: Complex64::new(0.0, 0.0),
        gamma_diag: [[Complex64::new(0.0, 0.0); 2]; 3],
        de,
    };
    fr.kappa = fr.gamma(1, 0, 0);
    fr.mu = fr.gamma(2, 0, 0);
    fr.tau = fr.gamma(2, 1, 0);
    fr.gamma_diag = std::array::from_fn(|j| std::array::from_fn(|d| fr.gamma(j, j, d)));
    fr
}

fn check_holomorphic(jet: &Jet) -> Result<PointGeometry, Error> {
    let g = PointGeometry::from_jet(jet)?;
    let r = g.holomorphicity_residual();
    if r > 1e-6 {
        return Err(Error::NotHolomorphic(r));
    }
    Ok(g)
}

pub fn adapt_frame(curve: &dyn CurveProvider, chart: &Chart, uv: [f64; 2]) -> Result<AdaptedFrame, Error> {
    let jet = evaluate_jet(curve, chart, uv, 3)?;
    adapt_frame_jet(&jet)
}

pub fn adapt_frame_jet(jet: &Jet) -> Result<AdaptedFrame, Error> {
    let g = check_holomorphic(jet)?;
    let scale = 1.0 + g.ii.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let n = g.ii[0].norm();
    if n < crate::surface::II_ZERO_TOL * scale {
        return Err(Error::DegeneratePoint(format!("|II(e1,e1)| = {n:e}")));
    }
    Ok(frame_from_series(&FrameSeries::build(jet, 1)?))
}

/// Frame at a parameter-sphere point (gnomonic chart centred there).
pub fn adapt_frame_at(curve: &dyn CurveProvider, x: &Vector3<f64>) -> Result<AdaptedFrame, Error> {
    let (_, jet) = local_jet(curve, x, 3)?;
    adapt_frame_jet(&jet)
}

/// Rotates (f2, f3) by the unitary [[1, -conj w], [w, 1]] / sqrt(1 + |w|^2) with w = amount * z,
/// z the local holomorphic coordinate zeta_1 at the base point. At the base point this adds
/// `amount` to tau and leaves kappa, mu untouched.
pub fn inject_torsion(fs: &FrameSeries, amount: Complex64) -> FrameSeries {
    use crate::taylor::Taylor;
    let order = fs.order();
    // chart offsets (s, t) -> tangent vector s d_s u + t d_t u; zeta_1 of it
    // e_i = sum_a dir[i][a] d_a u, so d_a u = sum_i m[a][i] e_i with m = dir^{-1}
    let d = nalgebra::Matrix2::new(fs.dir[0][0], fs.dir[1][0], fs.dir[0][1], fs.dir[1][1]);
    let m = d.try_inverse().expect("frame directions are independent");
    // offset s along d_s u has components (m[(0,0)], m[(1,0)]) in (e1, e2)
    let zs = Complex64::new(m[(0, 0)], m[(1, 0)]);
    let zt = Complex64::new(m[(0, 1)], m[(1, 1)]);
    let wre = Taylor::linear(0.0, (amount * zs).re, (amount * zt).re, order);
    let wim = Taylor::linear(0.0, (amount * zs).im, (amount * zt).im, order);
    let norm = (wre * wre + wim * wim + 1.0).sqrt().recip();
    let [_, _, e3, e4, e5, e6] = &fs.e;
    // f2' = (f2 + w f3) n ; with f = (a - i b)/2 and w = x + i y:
    // w f3 -> real part x e5 + y e6, "b" part x e6 - y e5
    let e3n: TVec<7> = std::array::from_fn(|n| (e3[n] + e5[n] * wre + e6[n] * wim) * norm);
    let e4n: TVec<7> = std::array::from_fn(|n| (e4[n] + e6[n] * wre - e5[n] * wim) * norm);
    // f3' = (f3 - conj(w) f2) n
    let e5n: TVec<7> = std::array::from_fn(|n| (e5[n] - e3[n] * wre + e4[n] * wim) * norm);
    let e6n: TVec<7> = std::array::from_fn(|n| (e6[n] - e4[n] * wre - e3[n] * wim) * norm);
    let mut out = fs.clone();
    out.e[2] = e3n;
    out.e[3] = e4n;
    out.e[4] = e5n;
    out.e[5] = e6n;
    out
}

/// Frame invariants straight from a (possibly synthetic) frame series.
pub fn frame_from(fs: &FrameSeries) -> AdaptedFrame {
    frame_from_series(fs)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct BundleCurvatures {
    pub k_t: f64,
    pub k_n: f64,
    pub k_b: f64,
}

pub fn bundle_curvatures(frame: &AdaptedFrame) -> BundleCurvatures {
    let k2 = frame.kappa.norm_sqr();
    let t2 = frame.tau.norm_sqr();
    BundleCurvatures { k_t: 1.0 - 2.0 * k2, k_n: 2.0 * k2 - 2.0 * t2 - 0.5, k_b: 2.0 * t2 - 0.5 }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct NullTorsionReport {
    pub is_null_torsion: bool,
    pub max_abs_tau: f64,
    pub evaluated: usize,
    pub degenerate: usize,
    pub all_degenerate: bool,
}

/// Evaluates tau at every quadrature point; points where II vanishes are counted and skipped.
pub fn null_torsion_test(curve: &dyn CurveProvider, mesh: &SurfaceMesh, tol: f64) -> Result<NullTorsionReport, Error> {
    let results: Vec<Result<Option<f64>, Error>> = mesh
        .quad
        .par_iter()
        .map(|q| match adapt_frame_at(curve, &q.x) {
            Ok(f) => Ok(Some(f.tau.norm())),
            Err(Error::DegeneratePoint(_)) => Ok(None),
            Err(e) => Err(Error::Inconsistent(format!("at parameter {:?}: {e}", q.x.as_slice()))),
        })
        .collect();
    let taus: Vec<Option<f64>> = results.into_iter().collect::<Result<_, _>>()?;
    Ok(tau_report(&taus, tol))
}

pub fn tau_report(taus: &[Option<f64>], tol: f64) -> NullTorsionReport {
    let evaluated = taus.iter().filter(|t| t.is_some()).count();
    let max_abs_tau = taus.iter().flatten().fold(0.0, |a: f64, b| a.max(*b));
    let all_degenerate = evaluated == 0;
    NullTorsionReport {
        is_null_torsion: !all_degenerate && max_abs_tau <= tol,
        max_abs_tau,
        evaluated,
        degenerate: taus.len() - evaluated,
        all_degenerate,
    }
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, serde::Serialize)]
pub struct ChernReport {
    pub c1_lt: i64,
    pub c1_ln: i64,
    pub c1_lb: i64,
    pub d: i64,
    pub phi2_zeros: i64,
    pub chi: i64,
    /// (1/2 pi) integrals before rounding.
    pub integrals: [f64; 3],
    /// |integral - nearest integer| for each bundle.
    pub residuals: [f64; 3],
    pub area: f64,
    /// area / (4 pi)
    pub area_degree: f64,
    pub max_pointwise_sum: f64,
}

pub const CHERN_GATE: f64 = 0.05;

pub fn chern_degree(curve: &dyn CurveProvider, mesh: &SurfaceMesh) -> Result<ChernReport, Error> {
    chern_degree_gated(curve, mesh, CHERN_GATE)
}

pub fn chern_degree_gated(curve: &dyn CurveProvider, mesh: &SurfaceMesh, gate: f64) -> Result<ChernReport, Error> {
    let vals: Vec<(f64, BundleCurvatures)> = mesh
        .quad
        .par_iter()
        .map(|q| Ok((q.weight, bundle_curvatures(&adapt_frame_at(curve, &q.x)?))))
        .collect::<Result<_, Error>>()?;
    let mut sums = [0.0; 3];
    let mut area = 0.0;
    let mut max_sum: f64 = 0.0;
    for (w, b) in &vals {
        sums[0] += w * b.k_t;
        sums[1] += w * b.k_n;
        sums[2] += w * b.k_b;
        area += w;
        max_sum = max_sum.max((b.k_t + b.k_n + b.k_b).abs());
    }
    let tau = 2.0 * std::f64::consts::PI;
    let integrals = sums.map(|s| s / tau);
    let rounded = integrals.map(|x| x.round());
    let residuals: [f64; 3] = std::array::from_fn(|i| (integrals[i] - rounded[i]).abs());
    let worst = residuals.iter().fold(0.0f64, |a, b| a.max(*b));
    if worst > gate {
        return Err(Error::MeshTooCoarse(worst));
    }
    let [lt, ln, lb] = rounded.map(|x| x as i64);
    if lt + ln + lb != 0 {
        return Err(Error::Inconsistent(format!("Chern numbers ({lt}, {ln}, {lb}) do not sum to zero")));
    }
    let chi = mesh.euler_characteristic();
    let d = -lb;
    Ok(ChernReport {
        c1_lt: lt,
        c1_ln: ln,
        c1_lb: lb,
        d,
        phi2_zeros: d - 3 * chi,
        chi,
        integrals,
        residuals,
        area,
        area_degree: area / (2.0 * tau),
        max_pointwise_sum: max_sum,
    })
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, serde::Serialize)]
pub struct BinormalReport {
    /// z = e5 - i e6 at every quadrature point.
    #[serde(skip)]
    pub coords: Vec<CVec7>,
    pub max_quadric_residual: f64,
    /// (1/pi) integral of the pulled-back Fubini-Study area form (unit-radius normalisation).
    pub degree_integral: f64,
    pub d_fs: i64,
    /// max |P Z_{e2} - i P Z_{e1}| relative to |P Z_{e1}|, P the projection off Z.
    pub cauchy_riemann: f64,
}

/// Derivative of the unit binormal line representative along e1, e2 with its gauge-invariant part.
fn binormal_data(fs: &FrameSeries) -> (CVec7, [CVec7; 2]) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = complexify(&(fs.value(4) * s), &(fs.value(5) * -s));
    let dz: [CVec7; 2] = std::array::from_fn(|d| {
        let a = fs.derivative(&fs.e[4], d) * s;
        let b = fs.derivative(&fs.e[5], d) * -s;
        let w = complexify(&a, &b);
        w - z * herm(&w, &z)
    });
    (z, dz)
}

pub fn binormal_map(curve: &dyn CurveProvider, mesh: &SurfaceMesh, expected_d: Option<i64>) -> Result<BinormalReport, Error> {
    let data: Vec<(f64, CVec7, f64, f64)> = mesh
        .quad
        .par_iter()
        .map(|q| {
            let (_, jet) = local_jet(curve, &q.x, 3)?;
            check_holomorphic(&jet)?;
            let fs = FrameSeries::build(&jet, 1)?;
            let (z, dz) = binormal_data(&fs);
            let rho = -herm(&dz[0], &dz[1]).im;
            let cr = (dz[1] - dz[0] * Complex64::new(0.0, 1.0)).norm() / dz[0].norm().max(1e-300);
            Ok((q.weight, z * Complex64::from(std::f64::consts::SQRT_2), rho, cr))
        })
        .collect::<Result<_, Error>>()?;
    let mut integral = 0.0;
    let mut quad_res: f64 = 0.0;
    let mut cr: f64 = 0.0;
    let mut coords = Vec::with_capacity(data.len());
    for (w, z, rho, c) in data {
        integral += w * rho;
        let s: Complex64 = z.iter().map(|v| v * v).sum();
        quad_res = quad_res.max(s.norm());
        cr = cr.max(c);
        coords.push(z);
    }
    let degree_integral = integral / std::f64::consts::PI;
    let d_fs = degree_integral.round() as i64;
    if quad_res > 1e-10 {
        return Err(Error::Inconsistent(format!("binormal quadric residual {quad_res:e}")));
    }
    if let Some(d) = expected_d {
        if d != d_fs {
            return Err(Error::Inconsistent(format!("Fubini-Study degree {d_fs} differs from d = {d}")));
        }
    }
    Ok(BinormalReport { coords, max_quadric_residual: quad_res, degree_integral, d_fs, cauchy_riemann: cr })
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, serde::Serialize)]
pub struct ParallelismReport {
    /// Mean parameter edge length.
    pub h: f64,
    pub max_nabla_j_hat: f64,
    pub max_d_j: f64,
    /// Max residual of nabla f_i - sum_j gamma_ji f_j - torsion_i over vertices and i.
    pub torsion_split: f64,
    /// Max |(1/2) p x (X x f_i) - torsion_i(X)|, the algebraic half of the same check.
    pub torsion_algebraic: f64,
}

/// Normal-space data needed at a mesh vertex.
#[derive(Clone, Debug)]
pub struct VertexNormalData {
    pub p: ImOct,
    pub proj_n: Mat7,
    pub j_hat: Mat7,
}

fn vertex_normal_data(curve: &dyn CurveProvider, x: &Vector3<f64>) -> Result<VertexNormalData, Error> {
    let (_, jet) = local_jet(curve, x, 2)?;
    let g = PointGeometry::from_jet(&jet)?;
    let s = normal_splitting_geometry(&g)?;
    Ok(VertexNormalData { p: g.p, proj_n: g.normal_projector(), j_hat: s.j_hat })
}

/// Edge-based finite differences of J-hat and of J restricted to the normal bundle.
pub fn parallelism_fd(
    mesh: &SurfaceMesh,
    data: &[VertexNormalData],
    edges: &[(usize, usize)],
) -> (f64, f64) {
    let oct = G2::standard();
    let jt = |p: &ImOct| -> Mat7 {
        Mat7::from_fn(|i, j| oct.cross(p, &crate::octonion::basis(j + 1))[i])
    };
    edges
        .par_iter()
        .map(|&(a, b)| {
            let (da, db) = (&data[a], &data[b]);
            let chord = mesh.positions[b] - mesh.positions[a];
            let l = chord.norm();
            let pn = (da.proj_n + db.proj_n) * 0.5;
            let x = chord / l;
            let nj = pn * (db.j_hat - da.j_hat) * pn / l;
            let ja = da.proj_n * jt(&da.p) * da.proj_n;
            let jb = db.proj_n * jt(&db.p) * db.proj_n;
            let pm = ((da.p + db.p) * 0.5).normalize();
            let jm = pn * jt(&pm) * pn;
            // (D_X J) xi = P d_X(J xi) - J P d_X xi - 1/2 P[p x (X x J xi)] + 1/2 J P[p x (X x xi)]
            let mut dj = pn * (jb - ja) * pn / l;
            for k in 0..7 {
                let xi = pn * crate::octonion::basis(k + 1);
                let jxi = jm * xi;
                let c1 = pn * oct.cross(&pm, &oct.cross(&x, &jxi));
                let c2 = jm * (pn * oct.cross(&pm, &oct.cross(&x, &xi)));
                let col = dj.column(k) - c1 * 0.5 + c2 * 0.5;
                dj.set_column(k, &col);
            }
            (nj.norm(), dj.norm())
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
}

/// Both halves of the torsion split for f1, f2, f3 along e1, e2.
pub fn torsion_split_residual(fr: &AdaptedFrame) -> (f64, f64) {
    let oct = G2::standard();
    let mut split: f64 = 0.0;
    let mut alg: f64 = 0.0;
    let c = |v: f64| Complex64::new(v, 0.0);
    for dir in 0..2 {
        let x = fr.e[dir];
        let z1 = fr.zeta(0, &x);
        let fbar = |k: usize| fr.f(k).map(|v| v.conj());
        let torsion = [
            (fbar(2) * fr.zeta(1, &x) - fbar(1) * fr.zeta(2, &x)) * c(0.5),
            (fbar(0) * fr.zeta(2, &x) - fbar(2) * z1) * c(0.5),
            (fbar(1) * z1 - fbar(0) * fr.zeta(1, &x)) * c(0.5),
        ];
        for i in 0..3 {
            let mut r = fr.nabla_f(i, dir);
            for j in 0..3 {
                r -= fr.f(j) * fr.gamma(j, i, dir);
            }
            split = split.max((r - torsion[i]).norm());
            let f = fr.f(i);
            let re = f.map(|v| v.re);
            let im = f.map(|v| v.im);
            let t_re = oct.cross(&fr.p, &oct.cross(&x, &re)) * 0.5;
            let t_im = oct.cross(&fr.p, &oct.cross(&x, &im)) * 0.5;
            let t = t_re.map(c) + t_im.map(|v| Complex64::new(0.0, v));
            alg = alg.max((t - torsion[i]).norm());
        }
    }
    (split, alg)
}

pub fn connection_parallelism_residuals(curve: &dyn CurveProvider, mesh: &SurfaceMesh) -> Result<ParallelismReport, Error> {
    let data: Vec<VertexNormalData> = mesh
        .params
        .par_iter()
        .map(|x| vertex_normal_data(curve, x))
        .collect::<Result<_, Error>>()?;
    let (nj, dj) = parallelism_fd(mesh, &data, &mesh.edges());
    let (split, alg) = mesh
        .params
        .par_iter()
        .map(|x| adapt_frame_at(curve, x).map(|f| torsion_split_residual(&f)))
        .collect::<Result<Vec<_>, Error>>()?
        .into_iter()
        .fold((0.0f64, 0.0f64), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Ok(ParallelismReport {
        h: mesh.parameter_spacing(),
        max_nabla_j_hat: nj,
        max_d_j: dj,
        torsion_split: split,
        torsion_algebraic: alg,
    })
}

/// |nabla-perp_{e_dir} J-hat| (Frobenius) of a frame series, analytically.
pub fn nabla_j_hat_norm(fs: &FrameSeries, dir: usize) -> f64 {
    let p = crate::taylor::tvalue(&fs.p);
    let e: Vec<ImOct> = (0..6).map(|i| fs.value(i)).collect();
    let de: Vec<ImOct> = (0..6).map(|i| fs.derivative(&fs.e[i], dir)).collect();
    let mut pn = Mat7::identity() - p * p.transpose();
    for v in &e[..2] {
        pn -= v * v.transpose();
    }
    let pair = |a: usize, b: usize| -> Mat7 {
        de[b] * e[a].transpose() + e[b] * de[a].transpose() - de[a] * e[b].transpose() - e[a] * de[b].transpose()
    };
    let dj = pair(2, 3) - pair(4, 5);
    (pn * dj * pn).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::LinearCurve;

    #[test]
    fn boruvka_frame_gauge() {
        let c = LinearCurve::boruvka();
        let f = adapt_frame_at(&c, &Vector3::new(0.3, -0.5, 0.8).normalize()).unwrap();
        assert!(f.kappa.im.abs() < 1e-12 && f.kappa.re > 0.0);
        assert!((f.kappa.norm_sqr() - 5.0 / 12.0).abs() < 1e-10);
        assert!(f.mu.norm() < 1e-10);
        let u = G2::standard().upsilon(&f.p, &f.e[0], &f.e[2], &f.e[4]);
        assert!(u.im.abs() < 1e-12 && u.re > 0.0);
    }
}
