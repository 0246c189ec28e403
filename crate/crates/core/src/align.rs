//! Riemannian descent on SO(7) for rotations that make an immersion J-holomorphic.

use crate::mesh::SurfaceMesh;
use crate::octonion::{G2, ImOct};
use crate::surface::{local_jet, CurveProvider, Mat7, PointGeometry};
use crate::Error;
use rand::Rng;
use rayon::prelude::*;

/// Cached tangent data of the unrotated immersion at the quadrature points.
#[derive(Clone, Debug)]
struct Sample {
    p: ImOct,
    e: [ImOct; 2],
    w: f64,
}

#[derive(Clone, Debug)]
pub struct AlignmentProblem {
    samples: Vec<Sample>,
    pub init: Mat7,
    pub max_iters: usize,
    pub tol: f64,
    pub starts: usize,
    pub seed: u64,
    /// Central-difference step in the Lie algebra.
    pub fd_step: f64,
}

impl AlignmentProblem {
    pub fn new(curve: &dyn CurveProvider, mesh: &SurfaceMesh, init: Mat7) -> Result<Self, Error> {
        check_rotation(&init)?;
        let samples = mesh
            .quad
            .iter()
            .map(|q| {
                let (_, jet) = local_jet(curve, &q.x, 1)?;
                let p = jet.position();
                let a = jet.partial(1, 0);
                let b = jet.partial(0, 1);
                let e1 = a.normalize();
                let w = b - e1 * e1.dot(&b);
                if w.norm() < 1e-9 {
                    return Err(Error::DegenerateMetric(format!("{:?}", q.x.as_slice())));
                }
                Ok(Sample { p, e: [e1, w.normalize()], w: q.weight })
            })
            .collect::<Result<_, Error>>()?;
        Ok(AlignmentProblem {
            samples,
            init,
            max_iters: 5000,
            tol: 1e-13,
            starts: 8,
            seed: 0,
            fd_step: 1e-6,
        })
    }

    pub fn from_geometry(points: &[PointGeometry], weights: &[f64], init: Mat7) -> Result<Self, Error> {
        check_rotation(&init)?;
        let samples = points.iter().zip(weights).map(|(g, w)| Sample { p: g.p, e: g.e, w: *w }).collect();
        Ok(AlignmentProblem { samples, init, max_iters: 5000, tol: 1e-13, starts: 8, seed: 0, fd_step: 1e-6 })
    }
}

fn check_rotation(r: &Mat7) -> Result<(), Error> {
    let err = (r.transpose() * r - Mat7::identity()).abs().max();
    if err > 1e-10 || r.determinant() < 0.0 {
        return Err(Error::InvalidArgument(format!("initial matrix not in SO(7) (orthogonality error {err:e})")));
    }
    Ok(())
}

/// sum_q w_q sum_i |P_N(J(R e_i))|^2 for the rotated immersion R u.
pub fn objective(problem: &AlignmentProblem, r: &Mat7) -> f64 {
    let oct = G2::standard();
    let rt = r.transpose();
    let mut total = 0.0;
    for s in &problem.samples {
        let rp = r * s.p;
        for e in &s.e {
            // pull J(R e) back by R^T and project off span(p, e1, e2)
            let mut v = rt * oct.cross(&rp, &(r * e));
            for b in [&s.p, &s.e[0], &s.e[1]] {
                v -= b * b.dot(&v);
            }
            total += s.w * v.norm_squared();
        }
    }
    total
}

/// Basis of so(7): E_ij - E_ji for i < j.
pub fn so7_basis() -> Vec<Mat7> {
    let mut out = Vec::with_capacity(21);
    for i in 0..7 {
        for j in i + 1..7 {
            let mut m = Mat7::zeros();
            m[(i, j)] = 1.0;
            m[(j, i)] = -1.0;
            out.push(m);
        }
    }
    out
}

pub fn exp_skew(a: &Mat7) -> Mat7 {
    a.exp()
}

pub fn reorthonormalize(r: &Mat7) -> Mat7 {
    let svd = r.svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    u * vt
}

fn gradient(problem: &AlignmentProblem, r: &Mat7, basis: &[Mat7]) -> Mat7 {
    let h = problem.fd_step;
    let mut g = Mat7::zeros();
    for b in basis {
        let fp = objective(problem, &(r * exp_skew(&(b * h))));
        let fm = objective(problem, &(r * exp_skew(&(b * -h))));
        g += b * ((fp - fm) / (2.0 * h));
    }
    // coordinates are w.r.t. E_ij - E_ji, whose squared norm is 2
    g * 0.5
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct AlignmentOutcome {
    #[serde(skip)]
    pub rotation: Mat7,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub start: usize,
    /// Objective values at accepted iterates of the winning start (every 10th, plus the last).
    pub history: Vec<f64>,
}

/// One descent run from `r0`.
pub fn descend(problem: &AlignmentProblem, r0: &Mat7) -> AlignmentOutcome {
    let basis = so7_basis();
    let mut r = *r0;
    let mut f = objective(problem, &r);
    let mut history = vec![f];
    if f <= problem.tol {
        return AlignmentOutcome { rotation: r, residual: f, iterations: 0, converged: true, start: 0, history };
    }
    let mut g = gradient(problem, &r, &basis);
    let mut step = 1.0 / (1.0 + g.norm());
    let mut prev: Option<(Mat7, Mat7)> = None;
    let mut it = 0;
    let mut checkpoint = f;
    while it < problem.max_iters && f > problem.tol {
        it += 1;
        // Barzilai-Borwein guess in the body frame
        if let Some((s_prev, g_prev)) = prev {
            let y = g - g_prev;
            let sy = s_prev.dot(&y);
            if sy > 0.0 {
                step = (s_prev.norm_squared() / sy).clamp(1e-8, 1e4);
            }
        }
        let gn2 = g.norm_squared();
        let mut t = step;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = r * exp_skew(&(g * -t));
            let fc = objective(problem, &cand);
            if fc <= f - 1e-4 * t * gn2 {
                // transport is trivial in the body frame; store the step for BB
                let s = g * -t;
                r = cand;
                f = fc;
                accepted = true;
                let g_new = gradient(problem, &r, &basis);
                prev = Some((s, g));
                g = g_new;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        if it % 50 == 0 {
            r = reorthonormalize(&r);
            f = objective(problem, &r);
        }
        if it % 10 == 0 {
            history.push(f);
        }
        // plateau: less than 0.1% progress over 100 accepted steps
        if it % 100 == 0 {
            if checkpoint - f < 1e-3 * checkpoint {
                break;
            }
            checkpoint = f;
        }
    }
    history.push(f);
    AlignmentOutcome { rotation: r, residual: f, iterations: it, converged: f <= problem.tol, start: 0, history }
}

pub fn random_rotation<R: Rng>(rng: &mut R) -> Mat7 {
    let a = Mat7::from_fn(|_, _| rng.random_range(-1.0..1.0));
    let q = reorthonormalize(&a);
    if q.determinant() < 0.0 {
        let mut q = q;
        let c = -q.column(0);
        q.set_column(0, &c);
        q
    } else {
        q
    }
}

/// Multi-start descent; start 0 uses `problem.init`, the rest random rotations from the seed.
pub fn align_rotation(problem: &AlignmentProblem) -> AlignmentOutcome {
    let f0 = objective(problem, &problem.init);
    if f0 <= problem.tol {
        return AlignmentOutcome {
            rotation: problem.init,
            residual: f0,
            iterations: 0,
            converged: true,
            start: 0,
            history: vec![f0],
        };
    }
    let mut rng = crate::rng(problem.seed);
    let mut inits = vec![problem.init];
    for _ in 1..problem.starts.max(1) {
        inits.push(random_rotation(&mut rng));
    }
    let runs: Vec<AlignmentOutcome> = inits
        .par_iter()
        .enumerate()
        .map(|(k, r0)| {
            let mut o = descend(problem, r0);
            o.start = k;
            o
        })
        .collect();
    runs.into_iter()
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .expect("at least one start")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_skew_is_rotation() {
        let mut rng = crate::rng(5);
        let mut a = Mat7::zeros();
        for b in so7_basis() {
            a += b * rng.random_range(-1.0..1.0);
        }
        let r = exp_skew(&a);
        assert!((r.transpose() * r - Mat7::identity()).abs().max() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }
}
