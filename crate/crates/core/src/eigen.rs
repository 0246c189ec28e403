//! Sparse symmetric block matrices and the generalized eigensolver.
//!
//! Matrices have one 4x4 block per pair of adjacent mesh vertices. The lowest
//! eigenpairs of `A v = lambda M v` come from a block Rayleigh-Ritz iteration
//! whose expansion step is the shifted inverse `(A + shift M)^{-1} M`, factored
//! once by sparse Cholesky. Small problems use a dense solve instead.

use crate::Error;
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatMut, MatRef, Side};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use std::sync::Arc;

pub const BLOCK: usize = 4;

/// Vertex adjacency (CSR, each row sorted and containing the diagonal).
#[derive(Clone, Debug, PartialEq)]
pub struct BlockPattern {
    pub offsets: Vec<usize>,
    pub cols: Vec<usize>,
}

impl BlockPattern {
    pub fn from_triangles(vertices: usize, triangles: &[[usize; 3]]) -> Self {
        let mut adj: Vec<Vec<usize>> = (0..vertices).map(|v| vec![v]).collect();
        for t in triangles {
            for a in 0..3 {
                for b in 0..3 {
                    if a != b {
                        adj[t[a]].push(t[b]);
                    }
                }
            }
        }
        let mut offsets = Vec::with_capacity(vertices + 1);
        let mut cols = Vec::new();
        offsets.push(0);
        for mut row in adj {
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(&row);
            offsets.push(cols.len());
        }
        BlockPattern { offsets, cols }
    }

    pub fn vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.cols[self.offsets[i]..self.offsets[i + 1]];
        row.binary_search(&j).ok().map(|k| self.offsets[i] + k)
    }
}

#[derive(Clone, Debug)]
pub struct BlockMatrix {
    pub pattern: Arc<BlockPattern>,
    /// Row-major 4x4 blocks aligned with `pattern.cols`.
    pub vals: Vec<[f64; 16]>,
}

impl BlockMatrix {
    pub fn zeros(pattern: Arc<BlockPattern>) -> Self {
        let vals = vec![[0.0; 16]; pattern.cols.len()];
        BlockMatrix { pattern, vals }
    }

    pub fn dim(&self) -> usize {
        self.pattern.vertices() * BLOCK
    }

    /// Adds `local[a][b]` to block (i, j). Panics if (i, j) is not in the pattern.
    pub fn add_block(&mut self, i: usize, j: usize, local: &[[f64; BLOCK]; BLOCK]) {
        let k = self.pattern.find(i, j).expect("block outside pattern");
        let blk = &mut self.vals[k];
        for a in 0..BLOCK {
            for b in 0..BLOCK {
                blk[a * BLOCK + b] += local[a][b];
            }
        }
    }

    pub fn add_assign(&mut self, other: &BlockMatrix) {
        for (a, b) in self.vals.iter_mut().zip(&other.vals) {
            for k in 0..16 {
                a[k] += b[k];
            }
        }
    }

    /// sum_i c_i A_i over matrices sharing one pattern.
    pub fn combine(terms: &[(f64, &BlockMatrix)]) -> BlockMatrix {
        let mut out = BlockMatrix::zeros(terms[0].1.pattern.clone());
        for (c, m) in terms {
            assert!(Arc::ptr_eq(&out.pattern, &m.pattern) || *out.pattern == *m.pattern);
            for (a, b) in out.vals.iter_mut().zip(&m.vals) {
                for k in 0..16 {
                    a[k] += c * b[k];
                }
            }
        }
        out
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        match self.pattern.find(r / BLOCK, c / BLOCK) {
            Some(k) => self.vals[k][(r % BLOCK) * BLOCK + c % BLOCK],
            None => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for i in 0..p.vertices() {
            let mut acc = [0.0; BLOCK];
            for k in p.offsets[i]..p.offsets[i + 1] {
                let j = p.cols[k];
                let blk = &self.vals[k];
                let xj = &x[j * BLOCK..j * BLOCK + BLOCK];
                for a in 0..BLOCK {
                    acc[a] += blk[a * BLOCK] * xj[0] + blk[a * BLOCK + 1] * xj[1] + blk[a * BLOCK + 2] * xj[2] + blk[a * BLOCK + 3] * xj[3];
                }
            }
            y[i * BLOCK..i * BLOCK + BLOCK].copy_from_slice(&acc);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.matvec(x, &mut y);
        y
    }

    /// x^T A y.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.apply(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().flat_map(|b| b.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max |A - A^T| / max |A|.
    pub fn symmetry_error(&self) -> f64 {
        let p = &self.pattern;
        let mut err: f64 = 0.0;
        for i in 0..p.vertices() {
            for k in p.offsets[i]..p.offsets[i + 1] {
                let j = p.cols[k];
                let kt = p.find(j, i).expect("pattern is symmetric");
                for a in 0..BLOCK {
                    for b in 0..BLOCK {
                        err = err.max((self.vals[k][a * BLOCK + b] - self.vals[kt][b * BLOCK + a]).abs());
                    }
                }
            }
        }
        let scale = self.max_abs();
        if scale == 0.0 { 0.0 } else { err / scale }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim()];
        for i in 0..self.pattern.vertices() {
            let k = self.pattern.find(i, i).expect("diagonal block");
            for a in 0..BLOCK {
                d[i * BLOCK + a] = self.vals[k][a * BLOCK + a];
            }
        }
        d
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let p = &self.pattern;
        for i in 0..p.vertices() {
            for k in p.offsets[i]..p.offsets[i + 1] {
                let j = p.cols[k];
                for a in 0..BLOCK {
                    for b in 0..BLOCK {
                        m[(i * BLOCK + a, j * BLOCK + b)] = self.vals[k][a * BLOCK + b];
                    }
                }
            }
        }
        m
    }

    pub fn to_sparse(&self) -> Result<SparseColMat<usize, f64>, Error> {
        let p = &self.pattern;
        let mut trip = Vec::with_capacity(self.vals.len() * 16);
        for i in 0..p.vertices() {
            for k in p.offsets[i]..p.offsets[i + 1] {
                let j = p.cols[k];
                for a in 0..BLOCK {
                    for b in 0..BLOCK {
                        trip.push(Triplet::new(i * BLOCK + a, j * BLOCK + b, self.vals[k][a * BLOCK + b]));
                    }
                }
            }
        }
        SparseColMat::try_new_from_triplets(self.dim(), self.dim(), &trip).map_err(|e| Error::Solver(format!("{e:?}")))
    }
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct EigenOptions {
    /// A + shift M must be positive definite.
    pub shift: f64,
    /// Block size of each expansion (at least the largest expected exact degeneracy).
    pub block: usize,
    /// Bound on |A y - theta M y| in the diag(M)^{-1} norm.
    pub tol: f64,
    pub max_basis: usize,
    pub max_expansions: usize,
    pub seed: u64,
    /// Dimension at or below which the dense solver is used.
    pub dense_limit: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { shift: 3.0, block: 30, tol: 1e-8, max_basis: 360, max_expansions: 200, seed: 0, dense_limit: 1200 }
    }
}

#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    /// Column-major n x k, M-orthonormal.
    pub vectors: Vec<f64>,
    pub n: usize,
    /// Largest residual norm among the returned pairs.
    pub max_residual: f64,
    pub expansions: usize,
}

impl Eigenpairs {
    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.n..(j + 1) * self.n]
    }
}

/// k smallest eigenpairs of A v = lambda M v.
pub fn smallest_eigenpairs(a: &BlockMatrix, m: &BlockMatrix, k: usize, opts: &EigenOptions) -> Result<Eigenpairs, Error> {
    let n = a.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("requested {k} eigenpairs of a problem of dimension {n}")));
    }
    if n <= opts.dense_limit {
        return dense_eigenpairs(a, m, k);
    }
    sparse_eigenpairs(a, m, k, opts)
}

pub fn dense_eigenpairs(a: &BlockMatrix, m: &BlockMatrix, k: usize) -> Result<Eigenpairs, Error> {
    let n = a.dim();
    let ad = a.to_dense();
    let md = m.to_dense();
    let chol = md.cholesky().ok_or_else(|| Error::Solver("mass matrix not positive definite".into()))?;
    let l = chol.l();
    let li = l.clone().try_inverse().ok_or_else(|| Error::Solver("singular mass factor".into()))?;
    let mut c = &li * ad * li.transpose();
    c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lt_inv = li.transpose();
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(n * k);
    for &i in order.iter().take(k) {
        values.push(eig.eigenvalues[i]);
        let v = &lt_inv * eig.eigenvectors.column(i);
        vectors.extend(v.iter());
    }
    let mut out = Eigenpairs { values, vectors, n, max_residual: 0.0, expansions: 0 };
    out.max_residual = residuals(a, m, &out).into_iter().fold(0.0, f64::max);
    Ok(out)
}

/// Residual norms |A v - lambda M v| weighted by diag(M)^{-1}.
pub fn residuals(a: &BlockMatrix, m: &BlockMatrix, pairs: &Eigenpairs) -> Vec<f64> {
    let dm = m.diagonal();
    (0..pairs.values.len())
        .map(|j| {
            let v = pairs.vector(j);
            let av = a.apply(v);
            let mv = m.apply(v);
            av.iter()
                .zip(&mv)
                .zip(&dm)
                .map(|((x, y), d)| {
                    let r = x - pairs.values[j] * y;
                    r * r / d
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

fn view(buf: &[f64], n: usize, cols: usize) -> MatRef<'_, f64> {
    MatRef::from_column_major_slice(&buf[..n * cols], n, cols)
}

fn view_mut(buf: &mut [f64], n: usize, cols: usize) -> MatMut<'_, f64> {
    MatMut::from_column_major_slice_mut(&mut buf[..n * cols], n, cols)
}

fn apply_cols(a: &BlockMatrix, x: &[f64], n: usize, cols: usize) -> Vec<f64> {
    let mut y = vec![0.0; n * cols];
    for j in 0..cols {
        a.matvec(&x[j * n..(j + 1) * n], &mut y[j * n..(j + 1) * n]);
    }
    y
}

/// Orthogonalize the columns of z against the M-orthonormal basis v (with mv = M v),
/// then M-orthonormalize them among themselves, dropping directions that were
/// (numerically) already in the span.
fn extend_basis(m: &BlockMatrix, v: &[f64], mv: &[f64], cols: usize, z: &mut Vec<f64>, n: usize) -> usize {
    let mut r = z.len() / n;
    // unit M-norm columns, so the drop threshold below is absolute
    let mz = apply_cols(m, z, n, r);
    for j in 0..r {
        let nrm: f64 = z[j * n..(j + 1) * n].iter().zip(&mz[j * n..(j + 1) * n]).map(|(a, b)| a * b).sum::<f64>().sqrt();
        if nrm > 0.0 {
            z[j * n..(j + 1) * n].iter_mut().for_each(|x| *x /= nrm);
        }
    }
    for pass in 0..2 {
        for _ in 0..2 {
            if cols > 0 && r > 0 {
                let c: Mat<f64> = view(mv, n, cols).transpose() * view(z, n, r);
                let corr: Mat<f64> = view(v, n, cols) * &c;
                let mut zm = view_mut(z, n, r);
                zm -= &corr;
            }
        }
        if r == 0 {
            return 0;
        }
        let mz = apply_cols(m, z, n, r);
        let g: Mat<f64> = view(z, n, r).transpose() * view(&mz, n, r);
        let gn = DMatrix::from_fn(r, r, |i, j| 0.5 * (g[(i, j)] + g[(j, i)]));
        let eig = SymmetricEigen::new(gn);
        // first pass drops near-dependent directions; the second only re-whitens
        let floor = if pass == 0 { 1e-10 } else { 1e-3 };
        let keep: Vec<usize> = (0..r).filter(|&i| eig.eigenvalues[i] > floor).collect();
        let t = Mat::<f64>::from_fn(r, keep.len(), |i, j| eig.eigenvectors[(i, keep[j])] / eig.eigenvalues[keep[j]].sqrt());
        let znew: Mat<f64> = view(z, n, r) * &t;
        r = keep.len();
        z.clear();
        for j in 0..r {
            z.extend(znew.col(j).iter());
        }
    }
    r
}

fn sparse_eigenpairs(a: &BlockMatrix, m: &BlockMatrix, k: usize, opts: &EigenOptions) -> Result<Eigenpairs, Error> {
    let n = a.dim();
    let shifted = BlockMatrix::combine(&[(1.0, a), (opts.shift, m)]).to_sparse()?;
    let llt = shifted
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Solver(format!("shifted matrix not positive definite ({e:?}); shift {}", opts.shift)))?;
    let b = opts.block.max(1).min(n);
    let cap = opts.max_basis.max(k + 2 * b).min(n);
    let dm = m.diagonal();

    let mut v: Vec<f64> = Vec::with_capacity(n * cap);
    let mut mv: Vec<f64> = Vec::with_capacity(n * cap);
    let mut h = DMatrix::<f64>::zeros(0, 0);
    let mut rng = crate::rng(opts.seed);
    let mut z: Vec<f64> = (0..n * b).map(|_| rng.random_range(-1.0..1.0)).collect();

    for expansion in 1..=opts.max_expansions {
        let cols = v.len() / n;
        let r = extend_basis(m, &v, &mv, cols, &mut z, n);
        if r == 0 {
            // Krylov space exhausted: refill with random directions
            z = (0..n * b).map(|_| rng.random_range(-1.0..1.0)).collect();
            continue;
        }
        let az = apply_cols(a, &z, n, r);
        let mz = apply_cols(m, &z, n, r);
        let new_cols = cols + r;
        let mut h2 = DMatrix::<f64>::zeros(new_cols, new_cols);
        h2.view_mut((0, 0), (cols, cols)).copy_from(&h);
        let cross: Mat<f64> = view(&v, n, cols).transpose() * view(&az, n, r);
        let inner: Mat<f64> = view(&z, n, r).transpose() * view(&az, n, r);
        for i in 0..cols {
            for j in 0..r {
                h2[(i, cols + j)] = cross[(i, j)];
                h2[(cols + j, i)] = cross[(i, j)];
            }
        }
        for i in 0..r {
            for j in 0..r {
                h2[(cols + i, cols + j)] = 0.5 * (inner[(i, j)] + inner[(j, i)]);
            }
        }
        h = h2;
        v.extend_from_slice(&z);
        mv.extend_from_slice(&mz);
        let cols = new_cols;
        if cols < k {
            let mut zz = vec![0.0; n * r];
            zz.copy_from_slice(&mz);
            llt.solve_in_place(view_mut(&mut zz, n, r));
            z = zz;
            continue;
        }

        // Rayleigh-Ritz
        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..cols).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let want = (k + b).min(cols);
        let s = Mat::<f64>::from_fn(cols, want, |i, j| eig.eigenvectors[(i, order[j])]);
        let theta: Vec<f64> = order.iter().take(want).map(|&i| eig.eigenvalues[i]).collect();
        let y: Mat<f64> = view(&v, n, cols) * &s;
        let my: Mat<f64> = view(&mv, n, cols) * &s;
        // residuals A y - theta M y of every retained Ritz pair
        let mut res = vec![0.0; want];
        let mut rvec = vec![0.0; n * want];
        let mut ycol = vec![0.0; n];
        for j in 0..want {
            for (i, yi) in ycol.iter_mut().enumerate() {
                *yi = y[(i, j)];
            }
            let r = &mut rvec[j * n..(j + 1) * n];
            a.matvec(&ycol, r);
            let mut acc = 0.0;
            for i in 0..n {
                r[i] -= theta[j] * my[(i, j)];
                acc += r[i] * r[i] / dm[i];
            }
            res[j] = acc.sqrt();
        }
        let unconverged: Vec<usize> = (0..k).filter(|&j| res[j] > opts.tol).collect();
        if unconverged.is_empty() {
            let mut vectors = Vec::with_capacity(n * k);
            for j in 0..k {
                vectors.extend(y.col(j).iter());
            }
            let max_residual = res[..k].iter().fold(0.0f64, |a, b| a.max(*b));
            return Ok(Eigenpairs { values: theta[..k].to_vec(), vectors, n, max_residual, expansions: expansion });
        }
        // next block: shifted-inverse corrections (A + shift M)^{-1} r of the lowest
        // unconverged pairs, padded with pairs just past the wanted range. This spans
        // the same space as the inverse images of the Ritz vectors without cancellation.
        let mut pick = unconverged.clone();
        let mut extra = k;
        while pick.len() < b && extra < want {
            pick.push(extra);
            extra += 1;
        }
        pick.truncate(b);
        let mut zz = vec![0.0; n * pick.len()];
        for (c, &j) in pick.iter().enumerate() {
            zz[c * n..(c + 1) * n].copy_from_slice(&rvec[j * n..(j + 1) * n]);
        }
        llt.solve_in_place(view_mut(&mut zz, n, pick.len()));
        z = zz;

        if cols + pick.len() > cap {
            // thick restart on the leading Ritz vectors
            let keep = want;
            v.clear();
            mv.clear();
            for j in 0..keep {
                v.extend(y.col(j).iter());
                mv.extend(my.col(j).iter());
            }
            h = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&theta[..keep]));
        }
    }
    Err(Error::Solver(format!("eigensolver did not converge in {} expansions", opts.max_expansions)))
}

// ---------------------------------------------------------------------------
// Clustering

#[derive(Clone, Debug, serde::Serialize)]
pub struct Cluster {
    pub center: f64,
    pub multiplicity: usize,
    pub min: f64,
    pub max: f64,
    /// Distance to the next cluster; None for the last one.
    pub gap: Option<f64>,
}

/// Single-linkage clustering of ascending values: consecutive values closer than `tol` share a cluster.
pub fn cluster(values: &[f64], tol: f64) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > tol {
            let part = &values[start..i];
            if !part.is_empty() {
                out.push(Cluster {
                    center: part.iter().sum::<f64>() / part.len() as f64,
                    multiplicity: part.len(),
                    min: part[0],
                    max: part[part.len() - 1],
                    gap: None,
                });
            }
            start = i;
        }
    }
    for i in 0..out.len().saturating_sub(1) {
        out[i].gap = Some(out[i + 1].min - out[i].max);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_pattern(v: usize) -> Arc<BlockPattern> {
        let tris: Vec<[usize; 3]> = (0..v - 2).map(|i| [i, i + 1, i + 2]).collect();
        Arc::new(BlockPattern::from_triangles(v, &tris))
    }

    #[test]
    fn clusters_split_on_gaps() {
        let c = cluster(&[-2.0, -1.99, -1.0, 0.0, 0.01, 0.02], 0.15);
        assert_eq!(c.iter().map(|c| c.multiplicity).collect::<Vec<_>>(), vec![2, 1, 3]);
        assert!((c[0].gap.unwrap() - 0.99).abs() < 1e-12);
        assert!(c[2].gap.is_none());
    }

    #[test]
    fn sparse_and_dense_agree() {
        let pat = path_pattern(200);
        let mut a = BlockMatrix::zeros(pat.clone());
        let mut m = BlockMatrix::zeros(pat.clone());
        let mut rng = crate::rng(3);
        for i in 0..200 {
            let mut d = [[0.0; 4]; 4];
            let mut e = [[0.0; 4]; 4];
            for q in 0..4 {
                d[q][q] = 2.0 + 0.1 * q as f64;
                e[q][q] = 1.0;
            }
            a.add_block(i, i, &d);
            m.add_block(i, i, &e);
            if i + 1 < 200 {
                let w: f64 = rng.random_range(0.5..1.0);
                let off = [[-w, 0.0, 0.0, 0.0], [0.0, -w, 0.0, 0.0], [0.0, 0.0, -w, 0.0], [0.0, 0.0, 0.0, -w]];
                a.add_block(i, i + 1, &off);
                a.add_block(i + 1, i, &off);
                let s = [[0.1, 0.0, 0.0, 0.0], [0.0, 0.1, 0.0, 0.0], [0.0, 0.0, 0.1, 0.0], [0.0, 0.0, 0.0, 0.1]];
                m.add_block(i, i + 1, &s);
                m.add_block(i + 1, i, &s);
            }
        }
        let dense = dense_eigenpairs(&a, &m, 12).unwrap();
        let opts = EigenOptions { dense_limit: 0, block: 8, shift: 1.0, ..Default::default() };
        let sparse = smallest_eigenpairs(&a, &m, 12, &opts).unwrap();
        for (x, y) in dense.values.iter().zip(&sparse.values) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
        assert!(sparse.max_residual <= 1e-8);
    }

    #[test]
    fn too_many_eigenpairs_rejected() {
        let pat = path_pattern(3);
        let a = BlockMatrix::zeros(pat.clone());
        assert!(matches!(smallest_eigenpairs(&a, &a, 13, &EigenOptions::default()), Err(Error::InvalidArgument(_))));
    }
}
