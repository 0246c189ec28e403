//! Parametrized surfaces in S^6: providers, charts, jets and pointwise geometry.

use crate::octonion::{G2, ImOct};
use crate::taylor::{self, tconst, tdot, tds, tdt, tnormalize, tscale, tsub, tvalue, Ring, TVec, Taylor};
use crate::Error;
use nalgebra::{Matrix2, Matrix4, SMatrix, Vector3};
use std::sync::{Arc, LazyLock};

pub type Mat7 = SMatrix<f64, 7, 7>;

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct CurveMeta {
    pub name: String,
    pub genus: u32,
    /// Expected degree of the binormal map (area / 4 pi), when known.
    pub degree: Option<u32>,
    /// Expected constant Gauss curvature, when known.
    pub curvature: Option<f64>,
    pub totally_geodesic: bool,
}

/// Analytic map from the parameter sphere into the unit sphere of Im O.
///
/// `map` receives a point of the unit 2-sphere written as Taylor series in local
/// chart offsets and must return the image as series of the same order.
pub trait CurveProvider: Send + Sync {
    fn meta(&self) -> &CurveMeta;

    fn map(&self, x: &TVec<3>) -> TVec<7>;

    fn map_point(&self, x: &Vector3<f64>) -> ImOct {
        let xs: TVec<3> = std::array::from_fn(|i| Taylor::constant(x[i], 0));
        tvalue(&self.map(&xs))
    }

    fn jet_order(&self) -> usize {
        taylor::MAX_ORDER
    }

    /// Two stereographic charts for genus-0 parameter domains.
    fn atlas(&self) -> Vec<Chart> {
        vec![Chart::StereoNorth, Chart::StereoSouth]
    }

    /// A parallel complex structure on the normal bundle when the surface is
    /// totally geodesic (the second fundamental form gives no splitting there).
    fn flat_normal_structure(&self) -> Option<Mat7> {
        None
    }
}

// ---------------------------------------------------------------------------
// Charts

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Chart {
    /// Projection from (0,0,1); w = 0 is the south pole.
    StereoNorth,
    /// Projection from (0,0,-1), holomorphic transition w' = 1/w.
    StereoSouth,
    /// (c + s a + t b)/|.| with a x b = c.
    Gnomonic { center: Vector3<f64>, a: Vector3<f64>, b: Vector3<f64> },
}

impl Chart {
    pub fn gnomonic(center: &Vector3<f64>) -> Chart {
        let c = center.normalize();
        let trial = if c.x.abs() < 0.6 { Vector3::x() } else { Vector3::y() };
        let a = (trial - c * c.dot(&trial)).normalize();
        let b = c.cross(&a);
        Chart::Gnomonic { center: c, a, b }
    }

    pub fn domain_radius(&self) -> f64 {
        match self {
            Chart::StereoNorth | Chart::StereoSouth => 2.0,
            Chart::Gnomonic { .. } => 1.0,
        }
    }

    /// Parameter point as Taylor series in offsets (s, t) around uv.
    pub fn point(&self, uv: [f64; 2], order: usize) -> Result<TVec<3>, Error> {
        let r = (uv[0] * uv[0] + uv[1] * uv[1]).sqrt();
        if !(r < self.domain_radius()) {
            return Err(Error::OutOfDomain(format!("{uv:?} in {self:?}")));
        }
        let u = Taylor::linear(uv[0], 1.0, 0.0, order);
        let v = Taylor::linear(uv[1], 0.0, 1.0, order);
        Ok(match self {
            Chart::StereoNorth | Chart::StereoSouth => {
                let q = u * u + v * v;
                let inv = (q + 1.0).recip();
                let sign = if matches!(self, Chart::StereoNorth) { 1.0 } else { -1.0 };
                [u * inv * 2.0, v * inv * (2.0 * sign), (q + (-1.0)) * inv * sign]
            }
            Chart::Gnomonic { center, a, b } => {
                let y: TVec<3> = std::array::from_fn(|i| u * a[i] + v * b[i] + center[i]);
                tnormalize(&y)
            }
        })
    }

    pub fn point_value(&self, uv: [f64; 2]) -> Result<Vector3<f64>, Error> {
        Ok(tvalue(&self.point(uv, 0)?))
    }

    /// Chart coordinates of a parameter-sphere point (None if outside the domain).
    pub fn inverse(&self, x: &Vector3<f64>) -> Option<[f64; 2]> {
        let uv = match self {
            Chart::StereoNorth => {
                let d = 1.0 - x.z;
                if d.abs() < 1e-14 {
                    return None;
                }
                [x.x / d, x.y / d]
            }
            Chart::StereoSouth => {
                let d = 1.0 + x.z;
                if d.abs() < 1e-14 {
                    return None;
                }
                [x.x / d, -x.y / d]
            }
            Chart::Gnomonic { center, a, b } => {
                let d = x.dot(center);
                if d <= 0.0 {
                    return None;
                }
                [x.dot(a) / d, x.dot(b) / d]
            }
        };
        if (uv[0] * uv[0] + uv[1] * uv[1]).sqrt() < self.domain_radius() {
            Some(uv)
        } else {
            None
        }
    }
}

/// Transition between two charts of an atlas.
pub fn transition(from: &Chart, to: &Chart, uv: [f64; 2]) -> Result<[f64; 2], Error> {
    let x = from.point_value(uv)?;
    to.inverse(&x).ok_or_else(|| Error::OutOfDomain(format!("{uv:?} not covered by {to:?}")))
}

// ---------------------------------------------------------------------------
// Jets

#[derive(Clone, Debug)]
pub struct Jet {
    pub series: TVec<7>,
}

impl Jet {
    pub fn order(&self) -> usize {
        self.series[0].order()
    }

    pub fn position(&self) -> ImOct {
        tvalue(&self.series)
    }

    /// d^{i+j} u / ds^i dt^j.
    pub fn partial(&self, i: usize, j: usize) -> ImOct {
        ImOct::from_fn(|k, _| self.series[k].partial(i, j))
    }
}

pub fn evaluate_jet(curve: &dyn CurveProvider, chart: &Chart, uv: [f64; 2], order: usize) -> Result<Jet, Error> {
    if order > curve.jet_order() {
        return Err(Error::OrderTooHigh { requested: order, max: curve.jet_order() });
    }
    let x = chart.point(uv, order)?;
    Ok(Jet { series: curve.map(&x) })
}

/// Jet at a parameter point x in the gnomonic chart centred there.
pub fn local_jet(curve: &dyn CurveProvider, x: &Vector3<f64>, order: usize) -> Result<(Chart, Jet), Error> {
    let chart = Chart::gnomonic(x);
    let jet = evaluate_jet(curve, &chart, [0.0, 0.0], order)?;
    Ok((chart, jet))
}

// ---------------------------------------------------------------------------
// Providers

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseMap {
    /// x -> (x1, x2, x3, 0, 0, 0, 0), the unit sphere of span(e1, e2, e3).
    Geodesic,
    /// x -> sqrt(4 pi / 7) Y_3(x), real orthonormal degree-3 spherical harmonics.
    Harmonic3,
}

/// sqrt(4 pi / 7) times the seven real orthonormal degree-3 harmonics, as
/// homogeneous cubics (valid on the unit sphere).
pub fn harmonic3<R: Ring>(x: &[R; 3]) -> [R; 7] {
    use std::f64::consts::PI;
    let (a, b, c) = (x[0], x[1], x[2]);
    let n = (4.0 * PI / 7.0).sqrt();
    let k3 = 0.25 * (35.0 / (2.0 * PI)).sqrt();
    let k2 = 0.5 * (105.0 / PI).sqrt();
    let k1 = 0.25 * (21.0 / (2.0 * PI)).sqrt();
    let k0 = 0.25 * (7.0 / PI).sqrt();
    let aa = a * a;
    let bb = b * b;
    let cc = c * c;
    let w = cc * 4.0 - aa - bb;
    [
        (aa * 3.0 - bb) * b * (n * k3),
        a * b * c * (n * k2),
        b * w * (n * k1),
        c * (cc * 2.0 - aa * 3.0 - bb * 3.0) * (n * k0),
        a * w * (n * k1),
        (aa - bb) * c * (n * 0.5 * k2),
        (aa - bb * 3.0) * a * (n * k3),
    ]
}

/// A base map followed by a fixed orthogonal matrix acting on R^7.
#[derive(Clone, Debug)]
pub struct LinearCurve {
    meta: CurveMeta,
    base: BaseMap,
    rotation: Mat7,
}

impl LinearCurve {
    pub fn new(meta: CurveMeta, base: BaseMap, rotation: Mat7) -> Self {
        LinearCurve { meta, base, rotation }
    }

    pub fn geodesic_s2() -> Self {
        let meta = CurveMeta {
            name: "geodesic-s2".into(),
            genus: 0,
            degree: Some(1),
            curvature: Some(1.0),
            totally_geodesic: true,
        };
        LinearCurve::new(meta, BaseMap::Geodesic, Mat7::identity())
    }

    /// The degree-3 harmonic immersion in the standard harmonic basis.
    pub fn boruvka_raw() -> Self {
        let meta = CurveMeta {
            name: "boruvka-raw".into(),
            genus: 0,
            degree: Some(6),
            curvature: Some(1.0 / 6.0),
            totally_geodesic: false,
        };
        LinearCurve::new(meta, BaseMap::Harmonic3, Mat7::identity())
    }

    /// The harmonic immersion rotated so that it is J-holomorphic.
    pub fn boruvka() -> Self {
        let mut c = LinearCurve::boruvka_raw();
        c.meta.name = "boruvka".into();
        c.rotation = BORUVKA_ALIGNMENT.rotation;
        c
    }

    pub fn base(&self) -> BaseMap {
        self.base
    }

    pub fn rotation(&self) -> &Mat7 {
        &self.rotation
    }

    /// Same base, image composed with `r` on the left.
    pub fn rotated(&self, r: &Mat7, name: &str) -> Self {
        let mut c = self.clone();
        c.rotation = r * self.rotation;
        c.meta.name = name.into();
        c
    }
}

impl CurveProvider for LinearCurve {
    fn meta(&self) -> &CurveMeta {
        &self.meta
    }

    fn map(&self, x: &TVec<3>) -> TVec<7> {
        let zero = Taylor::constant(0.0, x[0].order());
        let raw: TVec<7> = match self.base {
            BaseMap::Geodesic => [x[0], x[1], x[2], zero, zero, zero, zero],
            BaseMap::Harmonic3 => harmonic3(x),
        };
        std::array::from_fn(|i| {
            let mut s = zero;
            for j in 0..7 {
                let r = self.rotation[(i, j)];
                if r != 0.0 {
                    s += raw[j] * r;
                }
            }
            s
        })
    }

    fn map_point(&self, x: &Vector3<f64>) -> ImOct {
        let xs = [x[0], x[1], x[2]];
        let raw = match self.base {
            BaseMap::Geodesic => ImOct::from_column_slice(&[x[0], x[1], x[2], 0.0, 0.0, 0.0, 0.0]),
            BaseMap::Harmonic3 => ImOct::from_column_slice(&harmonic3(&xs)),
        };
        self.rotation * raw
    }

    fn flat_normal_structure(&self) -> Option<Mat7> {
        if self.base != BaseMap::Geodesic {
            return None;
        }
        // constant structure on span(e4..e7): e4 -> e5, e6 -> e7
        let mut j = Mat7::zeros();
        j[(4, 3)] = 1.0;
        j[(3, 4)] = -1.0;
        j[(6, 5)] = 1.0;
        j[(5, 6)] = -1.0;
        Some(self.rotation * j * self.rotation.transpose())
    }
}

/// Named base curves: `geodesic-s2`, `boruvka`, `boruvka-raw`.
pub fn linear_curve_by_name(name: &str) -> Result<LinearCurve, Error> {
    match name {
        "geodesic-s2" => Ok(LinearCurve::geodesic_s2()),
        "boruvka" => Ok(LinearCurve::boruvka()),
        "boruvka-raw" => Ok(LinearCurve::boruvka_raw()),
        _ => Err(Error::UnknownCurve(name.into())),
    }
}

pub fn curve_by_name(name: &str) -> Result<Arc<dyn CurveProvider>, Error> {
    Ok(Arc::new(linear_curve_by_name(name)?))
}

/// A named base curve with an optional rotation applied on the left.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveDef {
    pub base: String,
    pub rotation: Option<Mat7>,
}

impl CurveDef {
    pub fn named(base: &str) -> Self {
        CurveDef { base: base.into(), rotation: None }
    }

    /// Parses a curve description file:
    ///
    /// ```text
    /// # comment
    /// base = boruvka-raw
    /// rotation = <49 decimals, row-major>
    /// ```
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut base = None;
        let mut rotation = None;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key = value, got '{line}'")))?;
            match k.trim() {
                "base" => base = Some(v.trim().to_string()),
                "rotation" => rotation = Some(parse_rotation(v)?),
                other => return Err(Error::Parse(format!("unknown key '{other}'"))),
            }
        }
        let base = base.ok_or_else(|| Error::Parse("missing 'base'".into()))?;
        linear_curve_by_name(&base)?;
        Ok(CurveDef { base, rotation })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("base = {}\n", self.base);
        if let Some(r) = &self.rotation {
            out.push_str("rotation = ");
            out.push_str(&format_rotation(r).split_whitespace().collect::<Vec<_>>().join(" "));
            out.push('\n');
        }
        out
    }

    /// Composes `r` on the left of the current rotation.
    pub fn then_rotate(&self, r: &Mat7) -> Self {
        let total = match &self.rotation {
            Some(r0) => r * r0,
            None => *r,
        };
        CurveDef { base: self.base.clone(), rotation: Some(total) }
    }

    pub fn build(&self) -> Result<LinearCurve, Error> {
        let curve = linear_curve_by_name(&self.base)?;
        Ok(match &self.rotation {
            Some(r) => curve.rotated(r, &format!("{}+rotation", self.base)),
            None => curve,
        })
    }
}

pub fn curve_from_str(text: &str) -> Result<Arc<dyn CurveProvider>, Error> {
    Ok(Arc::new(CurveDef::parse(text)?.build()?))
}

/// 49 whitespace-separated decimals, row-major; must be orthogonal to 1e-10.
pub fn parse_rotation(text: &str) -> Result<Mat7, Error> {
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}"))))
        .collect::<Result<_, _>>()?;
    if vals.len() != 49 {
        return Err(Error::Parse(format!("rotation needs 49 entries, got {}", vals.len())));
    }
    let r = Mat7::from_row_slice(&vals);
    let err = (r.transpose() * r - Mat7::identity()).abs().max();
    if err > 1e-10 {
        return Err(Error::Parse(format!("rotation not orthogonal (error {err:e})")));
    }
    Ok(r)
}

pub fn format_rotation(r: &Mat7) -> String {
    let mut out = String::new();
    for i in 0..7 {
        let row: Vec<String> = (0..7).map(|j| format!("{:.17e}", r[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Algebraic alignment of the harmonic immersion

#[derive(Clone, Debug)]
pub struct HarmonicAlignment {
    pub rotation: Mat7,
    /// Max deviation of the rotated structure constants from the table.
    pub table_residual: f64,
    /// Ratio of the second-smallest to smallest singular value of the invariance system.
    pub kernel_gap: f64,
}

pub static BORUVKA_ALIGNMENT: LazyLock<HarmonicAlignment> = LazyLock::new(harmonic_alignment);

/// Infinitesimal action of so(3) on R^7 induced by the harmonic map: du(x)(Lx) = rho(L) u(x).
pub fn harmonic_rep() -> [Mat7; 3] {
    let gens = so3_generators();
    let mut rng = crate::rng(11);
    let m = 21;
    let mut u = SMatrix::<f64, 7, 21>::zeros();
    let mut vs = [SMatrix::<f64, 7, 21>::zeros(); 3];
    for s in 0..m {
        let x = Vector3::from_fn(|_, _| rand::Rng::random_range(&mut rng, -1.0..1.0)).normalize();
        let xs: TVec<3> = std::array::from_fn(|i| Taylor::constant(x[i], 0));
        u.set_column(s, &tvalue(&harmonic3(&xs)));
        for (k, g) in gens.iter().enumerate() {
            let lx = g * x;
            let xt: TVec<3> = std::array::from_fn(|i| Taylor::linear(x[i], lx[i], 0.0, 1));
            let y = harmonic3(&xt);
            vs[k].set_column(s, &ImOct::from_fn(|i, _| y[i].partial(1, 0)));
        }
    }
    let gram = (u * u.transpose()).try_inverse().expect("harmonic samples span R^7");
    std::array::from_fn(|k| vs[k] * u.transpose() * gram)
}

fn so3_generators() -> [nalgebra::Matrix3<f64>; 3] {
    let mut g = [nalgebra::Matrix3::zeros(); 3];
    for (k, m) in g.iter_mut().enumerate() {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        m[(j, i)] = 1.0;
        m[(i, j)] = -1.0;
    }
    g
}

fn triples() -> Vec<[usize; 3]> {
    let mut t = Vec::with_capacity(35);
    for a in 0..7 {
        for b in a + 1..7 {
            for c in b + 1..7 {
                t.push([a, b, c]);
            }
        }
    }
    t
}

/// Full antisymmetric tensor from coefficients on sorted triples.
fn three_form_tensor(coef: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; 343];
    for (n, &[a, b, c]) in triples().iter().enumerate() {
        let v = coef[n];
        for (p, s) in [([a, b, c], 1.0), ([b, c, a], 1.0), ([c, a, b], 1.0), ([b, a, c], -1.0), ([a, c, b], -1.0), ([c, b, a], -1.0)] {
            t[p[0] * 49 + p[1] * 7 + p[2]] = s * v;
        }
    }
    t
}

fn harmonic_alignment() -> HarmonicAlignment {
    let rho = harmonic_rep();
    let tr = triples();
    // rows: (generator, triple); columns: basis 3-forms
    let mut a = nalgebra::DMatrix::<f64>::zeros(105, 35);
    for col in 0..35 {
        let mut unit = vec![0.0; 35];
        unit[col] = 1.0;
        let t = three_form_tensor(&unit);
        for (k, l) in rho.iter().enumerate() {
            for (row, &[i, j, kk]) in tr.iter().enumerate() {
                let mut s = 0.0;
                for m in 0..7 {
                    s += l[(m, i)] * t[m * 49 + j * 7 + kk] + l[(m, j)] * t[i * 49 + m * 7 + kk] + l[(m, kk)] * t[i * 49 + j * 7 + m];
                }
                a[(k * 35 + row, col)] = s;
            }
        }
    }
    let eig = (a.transpose() * &a).symmetric_eigen();
    let mut order: Vec<usize> = (0..35).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let kernel_gap = eig.eigenvalues[order[1]].sqrt() / eig.eigenvalues[order[0]].abs().sqrt().max(1e-300);
    let coef: Vec<f64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
    let t = three_form_tensor(&coef);
    let xcross = |x: &ImOct, y: &ImOct| -> ImOct {
        ImOct::from_fn(|k, _| {
            let mut s = 0.0;
            for i in 0..7 {
                for j in 0..7 {
                    s += t[i * 49 + j * 7 + k] * x[i] * y[j];
                }
            }
            s
        })
    };
    let b1 = crate::octonion::basis(1);
    let b2 = crate::octonion::basis(2);
    let scale = 1.0 / xcross(&b1, &b2).norm();
    let xc = |x: &ImOct, y: &ImOct| xcross(x, y) * scale;
    let b3 = xc(&b1, &b2);
    let mut b4 = crate::octonion::basis(4);
    for k in [1, 2, 3, 5, 6, 7] {
        let mut w = crate::octonion::basis(k);
        for v in [&b1, &b2, &b3] {
            w -= v * v.dot(&w);
        }
        if w.norm() > 0.5 {
            b4 = w;
            break;
        }
    }
    for v in [&b1, &b2, &b3] {
        b4 -= v * v.dot(&b4);
    }
    b4 /= b4.norm();
    let b = [b1, b2, b3, b4, xc(&b1, &b4), xc(&b2, &b4), xc(&b4, &b3)];
    let mut q = Mat7::zeros();
    for (i, bi) in b.iter().enumerate() {
        q.set_row(i, &bi.transpose());
    }
    if q.determinant() < 0.0 {
        q = -q;
    }
    // structure constants of the pulled-back cross product vs the table
    let g = G2::standard();
    let mut table_residual: f64 = 0.0;
    for i in 0..7 {
        for j in 0..7 {
            let bi = q.transpose() * crate::octonion::basis(i + 1);
            let bj = q.transpose() * crate::octonion::basis(j + 1);
            let lhs = q * xc(&bi, &bj);
            let rhs = g.cross(&crate::octonion::basis(i + 1), &crate::octonion::basis(j + 1));
            table_residual = table_residual.max((lhs - rhs).abs().max());
        }
    }
    HarmonicAlignment { rotation: q, table_residual, kernel_gap }
}

// ---------------------------------------------------------------------------
// Pointwise geometry from an order-2 jet

/// First and second order data at one point, in plain floating point.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub p: ImOct,
    /// Chart partials d_s u, d_t u.
    pub du: [ImOct; 2],
    pub metric: Matrix2<f64>,
    /// Orthonormal tangent frame; e1 along d_s u, e2 by Gram-Schmidt (chart orientation).
    pub e: [ImOct; 2],
    /// e_i = coef[(0,i)] d_s u + coef[(1,i)] d_t u.
    pub coef: Matrix2<f64>,
    /// II(e1,e1), II(e1,e2), II(e2,e2).
    pub ii: [ImOct; 3],
}

impl PointGeometry {
    pub fn from_jet(jet: &Jet) -> Result<Self, Error> {
        if jet.order() < 2 {
            return Err(Error::OrderTooHigh { requested: 2, max: jet.order() });
        }
        let p = jet.position();
        let du = [jet.partial(1, 0), jet.partial(0, 1)];
        let metric = Matrix2::new(du[0].dot(&du[0]), du[0].dot(&du[1]), du[1].dot(&du[0]), du[1].dot(&du[1]));
        if metric.determinant() <= 1e-12 {
            return Err(Error::DegenerateMetric(format!("det g = {:e}", metric.determinant())));
        }
        let n0 = du[0].norm();
        let e1 = du[0] / n0;
        let w = du[1] - e1 * e1.dot(&du[1]);
        let n1 = w.norm();
        let e2 = w / n1;
        // du0 = n0 e1 ; du1 = <du1,e1> e1 + n1 e2
        let m = Matrix2::new(n0, du[1].dot(&e1), 0.0, n1);
        let coef = m.try_inverse().ok_or_else(|| Error::DegenerateMetric("singular frame".into()))?;
        let h = [jet.partial(2, 0), jet.partial(1, 1), jet.partial(0, 2)];
        let hess = |i: usize, j: usize| -> ImOct {
            let (a0, a1) = (coef[(0, i)], coef[(1, i)]);
            let (b0, b1) = (coef[(0, j)], coef[(1, j)]);
            h[0] * (a0 * b0) + h[1] * (a0 * b1 + a1 * b0) + h[2] * (a1 * b1)
        };
        let mut g = PointGeometry { p, du, metric, e: [e1, e2], coef, ii: [ImOct::zeros(); 3] };
        g.ii = [g.project_normal(&hess(0, 0)), g.project_normal(&hess(0, 1)), g.project_normal(&hess(1, 1))];
        Ok(g)
    }

    pub fn at(curve: &dyn CurveProvider, chart: &Chart, uv: [f64; 2]) -> Result<Self, Error> {
        PointGeometry::from_jet(&evaluate_jet(curve, chart, uv, 2)?)
    }

    pub fn project_normal(&self, w: &ImOct) -> ImOct {
        w - self.p * self.p.dot(w) - self.e[0] * self.e[0].dot(w) - self.e[1] * self.e[1].dot(w)
    }

    pub fn project_tangent(&self, w: &ImOct) -> ImOct {
        self.e[0] * self.e[0].dot(w) + self.e[1] * self.e[1].dot(w)
    }

    pub fn normal_projector(&self) -> Mat7 {
        let mut m = Mat7::identity();
        for v in [&self.p, &self.e[0], &self.e[1]] {
            m -= v * v.transpose();
        }
        m
    }

    /// II(X, Y) for tangent vectors.
    pub fn second_form(&self, x: &ImOct, y: &ImOct) -> ImOct {
        let (x1, x2) = (self.e[0].dot(x), self.e[1].dot(x));
        let (y1, y2) = (self.e[0].dot(y), self.e[1].dot(y));
        self.ii[0] * (x1 * y1) + self.ii[1] * (x1 * y2 + x2 * y1) + self.ii[2] * (x2 * y2)
    }

    /// Chart direction (ds, dt) of a tangent vector.
    pub fn chart_direction(&self, x: &ImOct) -> [f64; 2] {
        let (x1, x2) = (self.e[0].dot(x), self.e[1].dot(x));
        [self.coef[(0, 0)] * x1 + self.coef[(0, 1)] * x2, self.coef[(1, 0)] * x1 + self.coef[(1, 1)] * x2]
    }

    pub fn holomorphicity_residual(&self) -> f64 {
        let g = G2::standard();
        self.project_normal(&g.cross(&self.p, &self.e[0])).norm() + self.project_normal(&g.cross(&self.p, &self.e[1])).norm()
    }

    /// R-perp(e1, e2) as an ambient operator (zero off the normal space), from the Ricci equation.
    pub fn normal_curvature(&self) -> Mat7 {
        let ii1 = [self.ii[0], self.ii[1]];
        let ii2 = [self.ii[1], self.ii[2]];
        let mut r = Mat7::zeros();
        for k in 0..2 {
            r += ii1[k] * ii2[k].transpose() - ii2[k] * ii1[k].transpose();
        }
        r
    }

    pub fn gauss_curvature_extrinsic(&self) -> f64 {
        1.0 + self.ii[0].dot(&self.ii[2]) - self.ii[1].norm_squared()
    }
}

/// Orthonormal basis of the normal space at a point.
pub fn normal_basis(g: &PointGeometry) -> [ImOct; 4] {
    let mut out = [ImOct::zeros(); 4];
    let mut taken = vec![g.p, g.e[0], g.e[1]];
    let mut n = 0;
    let mut cands: Vec<ImOct> = (1..=7).map(crate::octonion::basis).collect();
    while n < 4 {
        let mut best = ImOct::zeros();
        let mut best_norm = 0.0;
        let mut best_k = 0;
        for (k, c) in cands.iter().enumerate() {
            let mut w = *c;
            for _ in 0..2 {
                for t in &taken {
                    w -= t * t.dot(&w);
                }
            }
            if w.norm() > best_norm {
                best_norm = w.norm();
                best = w;
                best_k = k;
            }
        }
        cands.remove(best_k);
        let v = best / best_norm;
        taken.push(v);
        out[n] = v;
        n += 1;
    }
    out
}

// ---------------------------------------------------------------------------
// Fundamental forms and normal splitting

#[derive(Clone, Debug, serde::Serialize)]
pub struct FundamentalForms {
    /// Intrinsic Gauss curvature (from metric derivatives).
    pub k: f64,
    /// h^alpha_ij for alpha over `normal_basis`, (ij) in (11, 12, 22).
    pub h: [[f64; 3]; 4],
    #[serde(skip)]
    pub normal_basis: [ImOct; 4],
    /// |II(e1,e1) + II(e2,e2)| / 2.
    pub mean_curvature: f64,
    /// |1 - K - |II11|^2 - |II12|^2| for minimal surfaces; the general Gauss identity otherwise.
    pub gauss_residual: f64,
    /// Second-normal component of the SU(3) covariant derivative of II(e1,e1) along e1,
    /// when the surface is holomorphic with nondegenerate II; otherwise None.
    pub iii_residual: Option<f64>,
    /// Normal curvature R-perp(e1,e2) in `normal_basis`.
    #[serde(skip)]
    pub r_perp: Matrix4<f64>,
}

/// Intrinsic curvature from the Brioschi formula; needs an order-3 jet.
pub fn intrinsic_curvature(jet: &Jet) -> Result<f64, Error> {
    if jet.order() < 3 {
        return Err(Error::OrderTooHigh { requested: 3, max: jet.order() });
    }
    let us = tds(&jet.series);
    let ut = tdt(&jet.series);
    let e = tdot(&us, &us);
    let f = tdot(&us, &ut);
    let g = tdot(&ut, &ut);
    let (ev, fv, gv) = (e.value(), f.value(), g.value());
    let det_g = ev * gv - fv * fv;
    if det_g <= 1e-12 {
        return Err(Error::DegenerateMetric(format!("det g = {det_g:e}")));
    }
    let (e_u, e_v) = (e.partial(1, 0), e.partial(0, 1));
    let (f_u, f_v) = (f.partial(1, 0), f.partial(0, 1));
    let (g_u, g_v) = (g.partial(1, 0), g.partial(0, 1));
    let e_vv = e.partial(0, 2);
    let f_uv = f.partial(1, 1);
    let g_uu = g.partial(2, 0);
    let m1 = nalgebra::Matrix3::new(
        -0.5 * e_vv + f_uv - 0.5 * g_uu, 0.5 * e_u, f_u - 0.5 * e_v,
        f_v - 0.5 * g_u, ev, fv,
        0.5 * g_v, fv, gv,
    );
    let m2 = nalgebra::Matrix3::new(0.0, 0.5 * e_v, 0.5 * g_u, 0.5 * e_v, ev, fv, 0.5 * g_u, fv, gv);
    Ok((m1.determinant() - m2.determinant()) / (det_g * det_g))
}

pub fn fundamental_forms(curve: &dyn CurveProvider, chart: &Chart, uv: [f64; 2]) -> Result<FundamentalForms, Error> {
    let jet = evaluate_jet(curve, chart, uv, 3)?;
    let g = PointGeometry::from_jet(&jet)?;
    let k = intrinsic_curvature(&jet)?;
    let nb = match normal_splitting_geometry(&g) {
        Ok(s) => [s.e_n[0], s.e_n[1], s.e_b[0], s.e_b[1]],
        Err(_) => normal_basis(&g),
    };
    let mut h = [[0.0; 3]; 4];
    for a in 0..4 {
        for ij in 0..3 {
            h[a][ij] = nb[a].dot(&g.ii[ij]);
        }
    }
    let r = g.normal_curvature();
    let r_perp = Matrix4::from_fn(|a, b| nb[a].dot(&(r * nb[b])));
    let gauss_residual = (k - g.gauss_curvature_extrinsic()).abs();
    let iii_residual = if g.holomorphicity_residual() < 1e-6 && g.ii[0].norm() > 1e-8 {
        FrameSeries::build(&jet, 1).ok().map(|fs| fs.iii_residual())
    } else {
        None
    };
    Ok(FundamentalForms {
        k,
        h,
        normal_basis: nb,
        mean_curvature: 0.5 * (g.ii[0] + g.ii[2]).norm(),
        gauss_residual,
        iii_residual,
        r_perp,
    })
}

pub fn holomorphicity_residual(curve: &dyn CurveProvider, chart: &Chart, uv: [f64; 2]) -> Result<f64, Error> {
    Ok(PointGeometry::at(curve, chart, uv)?.holomorphicity_residual())
}

#[derive(Clone, Debug)]
pub struct NormalSplitting {
    /// (e3, e4) with e3 along II(e1,e1) and e4 = J e3.
    pub e_n: [ImOct; 2],
    /// (e5, e6) with e6 = J e5.
    pub e_b: [ImOct; 2],
    /// J on E_N, -J on E_B, zero off the normal space.
    pub j_hat: Mat7,
    pub proj_n: Mat7,
    pub proj_b: Mat7,
}

impl NormalSplitting {
    pub fn split(&self, eta: &ImOct) -> (ImOct, ImOct) {
        (self.proj_n * eta, self.proj_b * eta)
    }
}

/// Relative threshold below which II counts as vanishing.
pub const II_ZERO_TOL: f64 = 1e-6;

pub fn normal_splitting_geometry(g: &PointGeometry) -> Result<NormalSplitting, Error> {
    let scale = 1.0 + g.ii.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let n11 = g.ii[0].norm();
    if n11 < II_ZERO_TOL * scale || n11 < 1e-10 {
        return Err(Error::DegeneratePoint(format!("|II(e1,e1)| = {n11:e}")));
    }
    let res = g.holomorphicity_residual();
    if res > 1e-6 {
        return Err(Error::NotHolomorphic(res));
    }
    let oct = G2::standard();
    let e3 = g.ii[0] / n11;
    let e4 = oct.cross(&g.p, &e3);
    let mut best = ImOct::zeros();
    for k in 1..=7 {
        let mut w = crate::octonion::basis(k);
        for _ in 0..2 {
            for t in [&g.p, &g.e[0], &g.e[1], &e3, &e4] {
                w -= t * t.dot(&w);
            }
        }
        if w.norm() > best.norm() {
            best = w;
        }
    }
    let e5 = best / best.norm();
    let e6 = oct.cross(&g.p, &e5);
    let proj_n = e3 * e3.transpose() + e4 * e4.transpose();
    let proj_b = e5 * e5.transpose() + e6 * e6.transpose();
    let j_hat = (e4 * e3.transpose() - e3 * e4.transpose()) - (e6 * e5.transpose() - e5 * e6.transpose());
    Ok(NormalSplitting { e_n: [e3, e4], e_b: [e5, e6], j_hat, proj_n, proj_b })
}

pub fn normal_splitting(curve: &dyn CurveProvider, chart: &Chart, uv: [f64; 2]) -> Result<NormalSplitting, Error> {
    normal_splitting_geometry(&PointGeometry::at(curve, chart, uv)?)
}

// ---------------------------------------------------------------------------
// Frame fields as Taylor series (for analytic derivatives of frames)

/// Adapted frame e1..e6 as truncated series around a chart point.
///
/// e1 is the unit chart s-direction, e2 = J e1, e3 is the unit direction of
/// II(e1,e1), e4 = J e3, e5 spans the rest of the normal space with e6 = J e5,
/// rotated so that Upsilon(e1, e3, e5) is real and positive.
#[derive(Clone, Debug)]
pub struct FrameSeries {
    pub p: TVec<7>,
    pub e: [TVec<7>; 6],
    /// II(e1,e1), II(e1,e2), II(e2,e2) as series.
    pub ii: [TVec<7>; 3],
    /// Chart direction of e1 and e2 at the base point.
    pub dir: [[f64; 2]; 2],
}

fn tcross(a: &TVec<7>, b: &TVec<7>) -> TVec<7> {
    G2::standard().cross_with(a, b)
}

impl FrameSeries {
    /// `order` is the order of the returned frame series; the jet must have order + 2.
    pub fn build(jet: &Jet, order: usize) -> Result<Self, Error> {
        if jet.order() < order + 2 {
            return Err(Error::OrderTooHigh { requested: order + 2, max: jet.order() });
        }
        let u = &jet.series;
        let us = tds(u);
        let ut = tdt(u);
        let p = taylor::ttruncate(u, order);
        let e1 = taylor::ttruncate(&tnormalize(&us), order);
        let e2 = tcross(&p, &e1);
        // d_a u = sum_i m[i][a] e_i  (tangent part only)
        let usl = taylor::ttruncate(&us, order);
        let utl = taylor::ttruncate(&ut, order);
        let m00 = tdot(&e1, &usl);
        let m01 = tdot(&e1, &utl);
        let m10 = tdot(&e2, &usl);
        let m11 = tdot(&e2, &utl);
        let det = m00 * m11 - m01 * m10;
        if det.value().abs() < 1e-9 {
            return Err(Error::NotHolomorphic(det.value()));
        }
        let inv = det.recip();
        // c[a][i]: e_i = sum_a c[a][i] d_a u
        let c = [[m11 * inv, -(m01 * inv)], [-(m10 * inv), m00 * inv]];
        let uss = taylor::ttruncate(&tds(&us), order);
        let ust = taylor::ttruncate(&tdt(&us), order);
        let utt = taylor::ttruncate(&tdt(&ut), order);
        let hess = |i: usize, j: usize| -> TVec<7> {
            let k00 = c[0][i] * c[0][j];
            let k01 = c[0][i] * c[1][j] + c[1][i] * c[0][j];
            let k11 = c[1][i] * c[1][j];
            std::array::from_fn(|n| uss[n] * k00 + ust[n] * k01 + utt[n] * k11)
        };
        let proj_n = |w: &TVec<7>| -> TVec<7> {
            let mut r = *w;
            for b in [&p, &e1, &e2] {
                r = tsub(&r, &tscale(b, &tdot(b, w)));
            }
            r
        };
        let ii = [proj_n(&hess(0, 0)), proj_n(&hess(0, 1)), proj_n(&hess(1, 1))];
        let n11 = tdot(&ii[0], &ii[0]).value().sqrt();
        if n11 < 1e-8 {
            return Err(Error::DegeneratePoint(format!("|II(e1,e1)| = {n11:e}")));
        }
        let e3 = tnormalize(&ii[0]);
        let e4 = tcross(&p, &e3);
        // seed e5 with the standard basis vector most transverse at the base point
        let base: Vec<ImOct> = [&p, &e1, &e2, &e3, &e4].iter().map(|v| tvalue(v)).collect();
        let mut best_k = 1;
        let mut best_n = -1.0;
        for k in 1..=7 {
            let mut w = crate::octonion::basis(k);
            for b in &base {
                w -= b * b.dot(&w);
            }
            if w.norm() > best_n {
                best_n = w.norm();
                best_k = k;
            }
        }
        let mut w = tconst(&crate::octonion::basis(best_k), order);
        for _ in 0..2 {
            for b in [&p, &e1, &e2, &e3, &e4] {
                w = tsub(&w, &tscale(b, &tdot(b, &w)));
            }
        }
        let e5r = tnormalize(&w);
        let e6r = tcross(&p, &e5r);
        // Upsilon(e1, e3, e5) = *phi(p, e1, e3, e5) + i phi(e1, e3, e5); phi(e1,e3,.) = <e1 x e3, .>
        let x13 = tcross(&e1, &e3);
        let im5 = tdot(&x13, &e5r);
        let im6 = tdot(&x13, &e6r);
        // Upsilon is (3,0), so Upsilon(e1,e3,e6) = i Upsilon(e1,e3,e5): re5 = im6
        let (re5, im5v) = (im6, im5);
        let r = (re5 * re5 + im5v * im5v).sqrt();
        if r.value() < 1e-8 {
            return Err(Error::Inconsistent("Upsilon(e1,e3,.) vanishes on E_B".into()));
        }
        let rinv = r.recip();
        let (cs, sn) = (re5 * rinv, -(im5v * rinv));
        let e5: TVec<7> = std::array::from_fn(|n| e5r[n] * cs + e6r[n] * sn);
        let e6 = tcross(&p, &e5);
        let cv = [[c[0][0].value(), c[1][0].value()], [c[0][1].value(), c[1][1].value()]];
        Ok(FrameSeries { p, e: [e1, e2, e3, e4, e5, e6], ii, dir: cv })
    }

    pub fn order(&self) -> usize {
        self.p[0].order()
    }

    pub fn value(&self, i: usize) -> ImOct {
        tvalue(&self.e[i])
    }

    /// Derivative of a vector series along frame direction e_{k+1} (k = 0, 1) at the base point.
    pub fn derivative(&self, f: &TVec<7>, k: usize) -> ImOct {
        let [a, b] = self.dir[k];
        ImOct::from_fn(|n, _| a * f[n].partial(1, 0) + b * f[n].partial(0, 1))
    }

    /// |P_B D-perp_{e1} II(e1,e1)| where D-perp is the normal part of the SU(3) connection.
    pub fn iii_residual(&self) -> f64 {
        let p = tvalue(&self.p);
        let e1 = self.value(0);
        let xi = tvalue(&self.ii[0]);
        let d = self.derivative(&self.ii[0], 0) + p * xi.dot(&e1);
        let oct = G2::standard();
        let corr = oct.cross(&p, &oct.cross(&e1, &xi)) * 0.5;
        let dd = d - corr;
        let e5 = self.value(4);
        let e6 = self.value(5);
        (e5 * e5.dot(&dd) + e6 * e6.dot(&dd)).norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stereographic_transition_is_inversion() {
        let uv = [0.4, -0.5];
        let w = transition(&Chart::StereoNorth, &Chart::StereoSouth, uv).unwrap();
        let r2 = uv[0] * uv[0] + uv[1] * uv[1];
        assert!((w[0] - uv[0] / r2).abs() < 1e-12);
        assert!((w[1] + uv[1] / r2).abs() < 1e-12);
    }

    #[test]
    fn out_of_domain_rejected() {
        let c = LinearCurve::geodesic_s2();
        assert!(matches!(evaluate_jet(&c, &Chart::StereoNorth, [3.0, 0.0], 2), Err(Error::OutOfDomain(_))));
        assert!(matches!(evaluate_jet(&c, &Chart::StereoNorth, [0.1, 0.0], 5), Err(Error::OrderTooHigh { .. })));
    }

    #[test]
    fn rotation_round_trip() {
        let r = BORUVKA_ALIGNMENT.rotation;
        let back = parse_rotation(&format_rotation(&r)).unwrap();
        assert!((back - r).abs().max() < 1e-15);
    }
}
