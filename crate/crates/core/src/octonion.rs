//! G2 algebra on the imaginary octonions and the SU(3)-structure of the unit 6-sphere.
//!
//! The cross product is driven by a Fano table held as data. Forms are evaluated
//! directly on vectors; nothing is stored as a dense tensor except where noted.

use crate::Error;
use nalgebra::SVector;
use num_complex::Complex64;
use rand::Rng;
use std::sync::LazyLock;

pub type ImOct = SVector<f64, 7>;

/// Basis vector e_i, 1-based to match the table notation.
pub fn basis(i: usize) -> ImOct {
    let mut v = ImOct::zeros();
    v[i - 1] = 1.0;
    v
}

/// Seven oriented lines (i, j, k) meaning e_i x e_j = e_k, 1-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct G2Table {
    lines: [[usize; 3]; 7],
}

impl G2Table {
    /// Fano table containing (1,2,3). Oriented so that, with the standard orientation
    /// of R^7, the form built from the Hodge dual is of type (3,0) for J(x) = p x x.
    pub fn standard() -> Self {
        G2Table {
            lines: [[1, 2, 3], [1, 4, 5], [1, 6, 7], [2, 4, 6], [2, 7, 5], [3, 7, 4], [3, 6, 5]],
        }
    }

    /// Validates that every unordered pair of distinct indices lies on exactly one line.
    pub fn from_lines(lines: [[usize; 3]; 7]) -> Result<Self, Error> {
        let mut seen = [[false; 7]; 7];
        for l in &lines {
            for &i in l {
                if !(1..=7).contains(&i) {
                    return Err(Error::InvalidTable(format!("index {i} out of range")));
                }
            }
            for (a, b) in [(l[0], l[1]), (l[1], l[2]), (l[0], l[2])] {
                if a == b {
                    return Err(Error::InvalidTable(format!("repeated index in {l:?}")));
                }
                let (a, b) = (a - 1, b - 1);
                if seen[a][b] {
                    return Err(Error::InvalidTable(format!("pair ({},{}) on two lines", a + 1, b + 1)));
                }
                seen[a][b] = true;
                seen[b][a] = true;
            }
        }
        Ok(G2Table { lines })
    }

    pub fn lines(&self) -> &[[usize; 3]; 7] {
        &self.lines
    }
}

/// Cross product, associative and coassociative forms for one table.
#[derive(Clone, Debug)]
pub struct G2 {
    table: G2Table,
    // 0-based copy of the lines
    lines0: [[usize; 3]; 7],
    // complement quadruple of each line (sorted) and the sign of (quad, line) as a permutation
    quads: [([usize; 4], f64); 7],
}

static STANDARD: LazyLock<G2> = LazyLock::new(|| G2::new(G2Table::standard()));

impl G2 {
    pub fn new(table: G2Table) -> Self {
        let mut lines0 = [[0usize; 3]; 7];
        let mut quads = [([0usize; 4], 0.0); 7];
        for (n, l) in table.lines.iter().enumerate() {
            let l0 = [l[0] - 1, l[1] - 1, l[2] - 1];
            lines0[n] = l0;
            let mut q = [0usize; 4];
            let mut m = 0;
            for i in 0..7 {
                if !l0.contains(&i) {
                    q[m] = i;
                    m += 1;
                }
            }
            let perm = [q[0], q[1], q[2], q[3], l0[0], l0[1], l0[2]];
            quads[n] = (q, permutation_sign(&perm));
        }
        G2 { table, lines0, quads }
    }

    pub fn standard() -> &'static G2 {
        &STANDARD
    }

    pub fn table(&self) -> &G2Table {
        &self.table
    }

    pub fn cross(&self, x: &ImOct, y: &ImOct) -> ImOct {
        let mut z = ImOct::zeros();
        for &[a, b, c] in &self.lines0 {
            z[c] += x[a] * y[b] - x[b] * y[a];
            z[a] += x[b] * y[c] - x[c] * y[b];
            z[b] += x[c] * y[a] - x[a] * y[c];
        }
        z
    }

    /// Generic-scalar cross product (used with truncated Taylor series).
    pub fn cross_with<T>(&self, x: &[T; 7], y: &[T; 7]) -> [T; 7]
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<Output = T>,
    {
        let mut z = [T::default(); 7];
        for &[a, b, c] in &self.lines0 {
            z[c] = z[c] + (x[a] * y[b] - x[b] * y[a]);
            z[a] = z[a] + (x[b] * y[c] - x[c] * y[b]);
            z[b] = z[b] + (x[c] * y[a] - x[a] * y[c]);
        }
        z
    }

    /// phi(x, y, z) = <x x y, z>.
    pub fn assoc_form(&self, x: &ImOct, y: &ImOct, z: &ImOct) -> f64 {
        self.cross(x, y).dot(z)
    }

    /// Hodge dual of phi (standard orientation), evaluated on four vectors.
    pub fn coassoc_form(&self, w: &ImOct, x: &ImOct, y: &ImOct, z: &ImOct) -> f64 {
        let mut s = 0.0;
        for (q, sign) in &self.quads {
            let m = nalgebra::Matrix4::new(
                w[q[0]], x[q[0]], y[q[0]], z[q[0]],
                w[q[1]], x[q[1]], y[q[1]], z[q[1]],
                w[q[2]], x[q[2]], y[q[2]], z[q[2]],
                w[q[3]], x[q[3]], y[q[3]], z[q[3]],
            );
            s += sign * m.determinant();
        }
        s
    }

    /// J_p(v) = p x v for unit p and v tangent at p.
    pub fn almost_complex(&self, p: &ImOct, v: &ImOct) -> Result<ImOct, Error> {
        check_tangent(p, v)?;
        Ok(self.cross(p, v))
    }

    /// (Omega(v1, v2), Upsilon(v1, v2, v3)) at p.
    pub fn su3_forms(&self, p: &ImOct, v1: &ImOct, v2: &ImOct, v3: &ImOct) -> Result<(f64, Complex64), Error> {
        for v in [v1, v2, v3] {
            check_tangent(p, v)?;
        }
        Ok((self.omega(p, v1, v2), self.upsilon(p, v1, v2, v3)))
    }

    /// Unchecked Omega(x, y) = <p x x, y>.
    pub fn omega(&self, p: &ImOct, x: &ImOct, y: &ImOct) -> f64 {
        self.assoc_form(p, x, y)
    }

    /// Unchecked Upsilon(a, b, c) = *phi(p, a, b, c) + i phi(a, b, c).
    pub fn upsilon(&self, p: &ImOct, a: &ImOct, b: &ImOct, c: &ImOct) -> Complex64 {
        Complex64::new(self.coassoc_form(p, a, b, c), self.assoc_form(a, b, c))
    }

    /// (i/8) Upsilon ^ conj(Upsilon) on a tangent 6-frame, i.e. (1/4)(Re ^ Im)(frame).
    pub fn upsilon_volume(&self, p: &ImOct, frame: &[ImOct; 6]) -> f64 {
        let mut total = 0.0;
        for s in shuffles_3_of_6() {
            let (a, b) = (s.0, s.1);
            let re = self.coassoc_form(p, &frame[a[0]], &frame[a[1]], &frame[a[2]]);
            let im = self.assoc_form(&frame[b[0]], &frame[b[1]], &frame[b[2]]);
            total += s.2 * re * im;
        }
        0.25 * total
    }

    /// (Omega ^ Omega)(a, b, c, d).
    pub fn omega_squared(&self, p: &ImOct, v: &[ImOct; 4]) -> f64 {
        let o = |i: usize, j: usize| self.omega(p, &v[i], &v[j]);
        2.0 * (o(0, 1) * o(2, 3) - o(0, 2) * o(1, 3) + o(0, 3) * o(1, 2))
    }
}

fn check_tangent(p: &ImOct, v: &ImOct) -> Result<(), Error> {
    let np = p.norm();
    if (np - 1.0).abs() > 1e-10 {
        return Err(Error::NotTangent(format!("base point has norm {np}")));
    }
    let d = p.dot(v);
    if d.abs() > 1e-10 {
        return Err(Error::NotTangent(format!("<v, p> = {d:e}")));
    }
    Ok(())
}

pub fn permutation_sign(p: &[usize]) -> f64 {
    let mut s = 1.0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                s = -s;
            }
        }
    }
    s
}

fn shuffles_3_of_6() -> Vec<([usize; 3], [usize; 3], f64)> {
    let mut out = Vec::with_capacity(20);
    for a in 0..6 {
        for b in a + 1..6 {
            for c in b + 1..6 {
                let rest: Vec<usize> = (0..6).filter(|i| *i != a && *i != b && *i != c).collect();
                let perm = [a, b, c, rest[0], rest[1], rest[2]];
                out.push(([a, b, c], [rest[0], rest[1], rest[2]], permutation_sign(&perm)));
            }
        }
    }
    out
}

pub fn cross(x: &ImOct, y: &ImOct) -> ImOct {
    G2::standard().cross(x, y)
}

pub fn assoc_form(x: &ImOct, y: &ImOct, z: &ImOct) -> f64 {
    G2::standard().assoc_form(x, y, z)
}

pub fn coassoc_form(w: &ImOct, x: &ImOct, y: &ImOct, z: &ImOct) -> f64 {
    G2::standard().coassoc_form(w, x, y, z)
}

pub fn almost_complex(p: &ImOct, v: &ImOct) -> Result<ImOct, Error> {
    G2::standard().almost_complex(p, v)
}

pub fn su3_forms(p: &ImOct, v1: &ImOct, v2: &ImOct, v3: &ImOct) -> Result<(f64, Complex64), Error> {
    G2::standard().su3_forms(p, v1, v2, v3)
}

/// A unit base point with a vector tangent to the sphere there.
#[derive(Clone, Copy, Debug)]
pub struct TangentVectorS6 {
    base: ImOct,
    vec: ImOct,
}

impl TangentVectorS6 {
    pub fn new(base: ImOct, vec: ImOct) -> Result<Self, Error> {
        if (base.norm() - 1.0).abs() > 1e-12 || base.dot(&vec).abs() > 1e-12 {
            return Err(Error::NotTangent(format!(
                "|p| - 1 = {:e}, <v,p> = {:e}",
                base.norm() - 1.0,
                base.dot(&vec)
            )));
        }
        Ok(TangentVectorS6 { base, vec })
    }

    pub fn base(&self) -> &ImOct {
        &self.base
    }

    pub fn vec(&self) -> &ImOct {
        &self.vec
    }
}

pub fn random_vector<R: Rng>(rng: &mut R) -> ImOct {
    ImOct::from_fn(|_, _| rng.random_range(-1.0..1.0))
}

pub fn random_unit<R: Rng>(rng: &mut R) -> ImOct {
    loop {
        let v = random_vector(rng);
        let n = v.norm();
        if n > 1e-3 {
            return v / n;
        }
    }
}

pub fn project_tangent(p: &ImOct, v: &ImOct) -> ImOct {
    v - p * p.dot(v)
}

pub fn random_tangent<R: Rng>(rng: &mut R, p: &ImOct) -> ImOct {
    project_tangent(p, &random_vector(rng))
}

/// Orthonormal tangent frame (v1, J v1, v2, J v2, v3, J v3) at p.
pub fn random_adapted_frame<R: Rng>(rng: &mut R, p: &ImOct) -> [ImOct; 6] {
    let g = G2::standard();
    let mut out = [ImOct::zeros(); 6];
    let mut k = 0;
    while k < 6 {
        let mut v = random_tangent(rng, p);
        for w in &out[..k] {
            v -= w * w.dot(&v);
        }
        let n = v.norm();
        if n < 1e-3 {
            continue;
        }
        v /= n;
        out[k] = v;
        out[k + 1] = g.cross(p, &v);
        k += 2;
    }
    out
}

// ---------------------------------------------------------------------------
// Pointwise algebra invariants

#[derive(Clone, Debug, serde::Serialize)]
pub struct AlgebraReport {
    pub samples: usize,
    /// max |x x y + y x x|
    pub antisymmetry: f64,
    /// max ||x x y|^2 - |x|^2 |y|^2 + <x, y>^2|
    pub norm_identity: f64,
    /// max |J(J v) + v| for tangent v
    pub j_squared: f64,
    /// max |(i/8) Upsilon ^ conj(Upsilon) - vol| on random tangent 6-tuples
    pub upsilon_volume: f64,
}

impl AlgebraReport {
    pub fn max_residual(&self) -> f64 {
        self.antisymmetry.max(self.norm_identity).max(self.j_squared).max(self.upsilon_volume)
    }
}

/// Volume form of S^6 at p: det(p, v1, ..., v6).
pub fn volume_form(p: &ImOct, v: &[ImOct; 6]) -> f64 {
    let mut m = nalgebra::SMatrix::<f64, 7, 7>::zeros();
    m.set_column(0, p);
    for (k, w) in v.iter().enumerate() {
        m.set_column(k + 1, w);
    }
    m.determinant()
}

pub fn algebra_invariants(g: &G2, samples: usize, seed: u64) -> AlgebraReport {
    let mut rng = crate::rng(seed);
    let mut r = AlgebraReport { samples, antisymmetry: 0.0, norm_identity: 0.0, j_squared: 0.0, upsilon_volume: 0.0 };
    for _ in 0..samples {
        let x = random_vector(&mut rng);
        let y = random_vector(&mut rng);
        let xy = g.cross(&x, &y);
        r.antisymmetry = r.antisymmetry.max((xy + g.cross(&y, &x)).abs().max());
        let lhs = xy.norm_squared();
        let rhs = x.norm_squared() * y.norm_squared() - x.dot(&y).powi(2);
        r.norm_identity = r.norm_identity.max((lhs - rhs).abs());
        let p = random_unit(&mut rng);
        let v = random_tangent(&mut rng, &p);
        let jjv = g.cross(&p, &g.cross(&p, &v));
        r.j_squared = r.j_squared.max((jjv + v).abs().max());
        let frame: [ImOct; 6] = std::array::from_fn(|_| random_tangent(&mut rng, &p));
        let vol = volume_form(&p, &frame);
        r.upsilon_volume = r.upsilon_volume.max((g.upsilon_volume(&p, &frame) - vol).abs());
    }
    r
}

// ---------------------------------------------------------------------------
// Finite-difference check of the nearly-Kähler identities.

/// Geodesic through p with initial velocity v, and parallel transport of w along it.
fn transport(p: &ImOct, v: &ImOct, t: f64, w: &ImOct) -> (ImOct, ImOct) {
    let speed = v.norm();
    if speed == 0.0 {
        return (*p, *w);
    }
    let vh = v / speed;
    let th = t * speed;
    let (s, c) = th.sin_cos();
    let q = p * c + vh * s;
    let a = w.dot(&vh);
    let wt = w + (vh * (c - 1.0) - p * s) * a;
    (q, wt)
}

/// Covariant derivative (nabla_v alpha)(ws) by a central difference along the geodesic.
fn covariant_fd<F>(p: &ImOct, v: &ImOct, ws: &[ImOct], h: f64, alpha: &F) -> f64
where
    F: Fn(&ImOct, &[ImOct]) -> f64,
{
    let eval = |t: f64| {
        let mut q = *p;
        let moved: Vec<ImOct> = ws
            .iter()
            .map(|w| {
                let (qq, wt) = transport(p, v, t, w);
                q = qq;
                wt
            })
            .collect();
        if ws.is_empty() {
            q = transport(p, v, t, &ImOct::zeros()).0;
        }
        alpha(&q, &moved)
    };
    (eval(h) - eval(-h)) / (2.0 * h)
}

/// d(alpha)(v_0, ..., v_k) = sum_i (-1)^i (nabla_{v_i} alpha)(..., v_i omitted, ...).
fn exterior_derivative_fd<F>(p: &ImOct, vs: &[ImOct], h: f64, alpha: &F) -> f64
where
    F: Fn(&ImOct, &[ImOct]) -> f64,
{
    let mut s = 0.0;
    for i in 0..vs.len() {
        let rest: Vec<ImOct> = vs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * covariant_fd(p, &vs[i], &rest, h, alpha);
    }
    s
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct NearlyKahlerReport {
    pub h: f64,
    pub samples: usize,
    /// max |d Omega - 3 Im Upsilon|
    pub d_omega: f64,
    /// max |d Re Upsilon - 2 Omega ^ Omega|
    pub d_re_upsilon: f64,
}

impl NearlyKahlerReport {
    pub fn max_residual(&self) -> f64 {
        self.d_omega.max(self.d_re_upsilon)
    }
}

/// Samples random points and tangent simplices (deterministic in `seed`).
pub fn verify_nearly_kahler(sample_count: usize, h: f64, seed: u64) -> Result<NearlyKahlerReport, Error> {
    if !(h > 0.0 && h <= 0.1) {
        return Err(Error::InvalidArgument(format!("step h = {h} outside (0, 0.1]")));
    }
    if sample_count == 0 {
        return Err(Error::InvalidArgument("sample_count must be at least 1".into()));
    }
    let g = G2::standard();
    let mut rng = crate::rng(seed);
    let omega = |q: &ImOct, w: &[ImOct]| g.omega(q, &w[0], &w[1]);
    let re_ups = |q: &ImOct, w: &[ImOct]| g.coassoc_form(q, &w[0], &w[1], &w[2]);
    let mut d_omega: f64 = 0.0;
    let mut d_re: f64 = 0.0;
    for _ in 0..sample_count {
        let p = random_unit(&mut rng);
        let v: Vec<ImOct> = (0..4).map(|_| random_tangent(&mut rng, &p)).collect();
        let lhs = exterior_derivative_fd(&p, &v[..3], h, &omega);
        let rhs = 3.0 * g.assoc_form(&v[0], &v[1], &v[2]);
        d_omega = d_omega.max((lhs - rhs).abs());
        let lhs = exterior_derivative_fd(&p, &v, h, &re_ups);
        let rhs = 2.0 * g.omega_squared(&p, &[v[0], v[1], v[2], v[3]]);
        d_re = d_re.max((lhs - rhs).abs());
    }
    Ok(NearlyKahlerReport { h, samples: sample_count, d_omega, d_re_upsilon: d_re })
}

/// Residuals at h and h/2 with the same samples; returns (coarse, fine, ratio).
pub fn nearly_kahler_convergence(
    sample_count: usize,
    h: f64,
    seed: u64,
) -> Result<(NearlyKahlerReport, NearlyKahlerReport, f64), Error> {
    let a = verify_nearly_kahler(sample_count, h, seed)?;
    let b = verify_nearly_kahler(sample_count, h / 2.0, seed)?;
    let ratio = a.max_residual() / b.max_residual();
    Ok((a, b, ratio))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rejects_duplicate_pairs() {
        let mut l = *G2Table::standard().lines();
        l[1] = [1, 2, 5];
        assert!(G2Table::from_lines(l).is_err());
        assert!(G2Table::from_lines(*G2Table::standard().lines()).is_ok());
    }

    #[test]
    fn transport_keeps_tangency_and_length() {
        let mut rng = crate::rng(3);
        let p = random_unit(&mut rng);
        let v = random_tangent(&mut rng, &p);
        let w = random_tangent(&mut rng, &p);
        let (q, wt) = transport(&p, &v, 0.3, &w);
        assert!(q.dot(&wt).abs() < 1e-14);
        assert!((wt.norm() - w.norm()).abs() < 1e-14);
    }
}
