//! Icosphere meshes of the parameter sphere, pushed through a curve provider.

use crate::octonion::ImOct;
use crate::surface::{local_jet, CurveProvider, PointGeometry};
use crate::Error;
use nalgebra::{Matrix2, Vector3};
use rayon::prelude::*;
use std::collections::HashMap;
use std::fmt::Write as _;

/// Barycentric coordinates of the symmetric 3-point rule (weights 1/3 each).
pub const QUAD_BARY: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

pub const MAX_LEVEL: usize = 8;

#[derive(Clone, Debug)]
pub struct QuadPoint {
    pub tri: usize,
    pub bary: [f64; 3],
    /// Point of the parameter sphere.
    pub x: Vector3<f64>,
    /// Surface-area weight (already includes the Jacobian of u).
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub level: usize,
    pub curve: String,
    pub params: Vec<Vector3<f64>>,
    pub positions: Vec<ImOct>,
    pub triangles: Vec<[usize; 3]>,
    pub quad: Vec<QuadPoint>,
    /// Orthonormal tangent frame at each vertex.
    pub vertex_frames: Vec<[ImOct; 2]>,
    /// Lumped area attached to each vertex (sum of weight * barycentric).
    pub vertex_area: Vec<f64>,
}

/// Icosahedron subdivided `level` times, vertices on the unit sphere, faces outward.
pub fn icosphere(level: usize) -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vector3<f64>> = [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|c| Vector3::new(c[0], c[1], c[2]).normalize())
    .collect();
    let mut f: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::with_capacity(f.len() * 3 / 2);
        let mut next = Vec::with_capacity(f.len() * 4);
        let mut midpoint = |a: usize, b: usize, v: &mut Vec<Vector3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                v.push((v[a] + v[b]).normalize());
                v.len() - 1
            })
        };
        for &[a, b, c] in &f {
            let ab = midpoint(a, b, &mut v);
            let bc = midpoint(b, c, &mut v);
            let ca = midpoint(c, a, &mut v);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        f = next;
    }
    (v, f)
}

/// Point of a flat triangle centrally projected to the sphere, with d/d(lambda_1), d/d(lambda_2).
pub fn triangle_point(v: [&Vector3<f64>; 3], bary: &[f64; 3]) -> (Vector3<f64>, [Vector3<f64>; 2]) {
    let y = v[0] * bary[0] + v[1] * bary[1] + v[2] * bary[2];
    let r = y.norm();
    let x = y / r;
    let d = |w: Vector3<f64>| (w - x * x.dot(&w)) / r;
    (x, [d(v[0] - v[2]), d(v[1] - v[2])])
}

/// Ambient image of a parameter tangent vector w at x, given the gnomonic jet at x.
pub fn push_forward(chart: &crate::surface::Chart, du: &[ImOct; 2], w: &Vector3<f64>) -> ImOct {
    match chart {
        crate::surface::Chart::Gnomonic { a, b, .. } => du[0] * a.dot(w) + du[1] * b.dot(w),
        _ => unreachable!("local jets use gnomonic charts"),
    }
}

pub fn build_mesh(curve: &dyn CurveProvider, level: usize) -> Result<SurfaceMesh, Error> {
    if level > MAX_LEVEL {
        return Err(Error::InvalidArgument(format!("mesh level {level} outside [0, {MAX_LEVEL}]")));
    }
    let (params, triangles) = icosphere(level);
    let vertex_data: Vec<(ImOct, [ImOct; 2])> = params
        .par_iter()
        .map(|x| {
            let (_, jet) = local_jet(curve, x, 2)?;
            let g = PointGeometry::from_jet(&jet)?;
            Ok((g.p, g.e))
        })
        .collect::<Result<_, Error>>()?;
    let quad: Vec<QuadPoint> = triangles
        .par_iter()
        .enumerate()
        .map(|(ti, tri)| {
            let vs = [&params[tri[0]], &params[tri[1]], &params[tri[2]]];
            let mut out = Vec::with_capacity(3);
            for bary in QUAD_BARY {
                let (x, dx) = triangle_point(vs, &bary);
                let (chart, jet) = local_jet(curve, &x, 1)?;
                let du = [jet.partial(1, 0), jet.partial(0, 1)];
                let a = push_forward(&chart, &du, &dx[0]);
                let b = push_forward(&chart, &du, &dx[1]);
                let g = Matrix2::new(a.dot(&a), a.dot(&b), a.dot(&b), b.dot(&b));
                let det = g.determinant();
                if det <= 0.0 {
                    return Err(Error::DegenerateMetric(format!("triangle {ti}")));
                }
                out.push(QuadPoint { tri: ti, bary, x, weight: det.sqrt() / 6.0 });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, Error>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut vertex_area = vec![0.0; params.len()];
    for q in &quad {
        let t = triangles[q.tri];
        for k in 0..3 {
            vertex_area[t[k]] += q.weight * q.bary[k];
        }
    }
    let (positions, vertex_frames) = vertex_data.into_iter().unzip();
    Ok(SurfaceMesh {
        level,
        curve: curve.meta().name.clone(),
        params,
        positions,
        triangles,
        quad,
        vertex_frames,
        vertex_area,
    })
}

impl SurfaceMesh {
    pub fn area(&self) -> f64 {
        self.quad.iter().map(|q| q.weight).sum()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.params.len() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    /// Mean edge length on the parameter sphere.
    pub fn parameter_spacing(&self) -> f64 {
        let e = self.edges();
        e.iter().map(|&(a, b)| (self.params[a] - self.params[b]).norm()).sum::<f64>() / e.len() as f64
    }

    /// Smallest signed triangle area on the parameter sphere (positive iff all faces outward).
    pub fn min_parameter_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let (a, b, c) = (&self.params[t[0]], &self.params[t[1]], &self.params[t[2]]);
                0.5 * (b - a).cross(&(c - a)).dot(&((a + b + c) / 3.0))
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Line-based text export:
    ///
    /// ```text
    /// mesh <curve> level <L>
    /// vertices <V>
    /// v x1 x2 x3 u1..u7 e1_1..e1_7 e2_1..e2_7      (V lines)
    /// triangles <F>
    /// t i j k                                       (F lines, 0-based)
    /// ```
    pub fn export_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mesh {} level {}", self.curve, self.level);
        let _ = writeln!(s, "vertices {}", self.params.len());
        for i in 0..self.params.len() {
            s.push('v');
            let x = &self.params[i];
            for c in x.iter().chain(self.positions[i].iter()).chain(self.vertex_frames[i][0].iter()).chain(self.vertex_frames[i][1].iter()) {
                let _ = write!(s, " {c:.16e}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "t {} {} {}", t[0], t[1], t[2]);
        }
        s
    }
}
