//! Smallest eigenpairs of hermitian positive semidefinite operators.
//!
//! Small problems are solved densely. Larger ones use block LOBPCG with SVQB
//! orthonormalisation and a seeded random start, so results are reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{hermitian_eigen, CMat, C64};

/// A hermitian operator applied to blocks of column vectors.
pub trait HermitianOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &CMat) -> CMat;
    /// Upper bound on the spectral norm.
    fn norm_bound(&self) -> f64;

    fn to_dense(&self) -> CMat {
        self.apply(&CMat::identity(self.dim(), self.dim()))
    }
}

/// An explicit hermitian matrix.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    m: CMat,
    bound: f64,
}

impl DenseOperator {
    pub fn new(m: CMat) -> Self {
        let bound = (0..m.nrows()).map(|i| m.row(i).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
        Self { m, bound }
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }
}

impl HermitianOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.m.nrows()
    }
    fn apply(&self, x: &CMat) -> CMat {
        &self.m * x
    }
    fn norm_bound(&self) -> f64 {
        self.bound
    }
    fn to_dense(&self) -> CMat {
        self.m.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    /// Residual tolerance relative to the operator norm bound.
    pub tol: f64,
    pub max_iter: usize,
    /// Problems up to this dimension are diagonalised densely.
    pub dense_threshold: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 3000, dense_threshold: 1024, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

/// The `m` smallest eigenpairs, ascending, with orthonormal vectors.
pub fn smallest_eigenpairs<A: HermitianOperator + ?Sized>(
    op: &A,
    m: usize,
    opts: &SolverOptions,
) -> Result<EigenPairs, String> {
    let n = op.dim();
    if m == 0 || m > n {
        return Err(format!("requested {m} eigenpairs of a {n}-dimensional operator"));
    }
    if !(opts.tol > 0.0) {
        return Err("solver tolerance must be positive".into());
    }
    if n <= opts.dense_threshold || n <= 3 * (m + 4) {
        let (values, vectors) = hermitian_eigen(op.to_dense());
        return Ok(EigenPairs { values: values[..m].to_vec(), vectors: vectors.columns(0, m).clone_owned() });
    }
    lobpcg(op, m, opts)
}

/// Orthonormal basis for the column span of `s`; directions with relative
/// weight below `1e-12` are dropped.
fn svqb(s: &CMat) -> CMat {
    let g_full = s.adjoint() * s;
    let gmax = (0..s.ncols()).map(|i| g_full[(i, i)].re).fold(0.0, f64::max);
    // negligible columns carry no direction and would overflow the scaling
    let live: Vec<usize> = (0..s.ncols()).filter(|&i| g_full[(i, i)].re > 1e-28 * gmax).collect();
    let k = live.len();
    let g = CMat::from_fn(k, k, |i, j| g_full[(live[i], live[j])]);
    let d: Vec<f64> = (0..k).map(|i| 1.0 / g[(i, i)].re.sqrt()).collect();
    let gs = CMat::from_fn(k, k, |i, j| g[(i, j)] * d[i] * d[j]);
    let (theta, q) = hermitian_eigen(gs);
    let tmax = theta.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..k).filter(|&i| theta[i] > 1e-12 * tmax).collect();
    let mut c = CMat::zeros(s.ncols(), keep.len());
    for (j, &kj) in keep.iter().enumerate() {
        for i in 0..k {
            c[(live[i], j)] = q[(i, kj)] * (d[i] / theta[kj].sqrt());
        }
    }
    s * &c
}

fn diag_c(v: &[f64]) -> CMat {
    CMat::from_diagonal(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|&l| C64::new(l, 0.0))))
}

fn hstack(blocks: &[&CMat]) -> CMat {
    let rows = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut off = 0;
    for b in blocks {
        out.columns_mut(off, b.ncols()).copy_from(b);
        off += b.ncols();
    }
    out
}

fn lobpcg<A: HermitianOperator + ?Sized>(op: &A, m: usize, opts: &SolverOptions) -> Result<EigenPairs, String> {
    let n = op.dim();
    let b = (m + 4).min(n);
    let bound = op.norm_bound().max(f64::MIN_POSITIVE);
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let x0 = CMat::from_fn(n, b, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im)
    });
    let mut x = svqb(&x0);
    let mut ax = op.apply(&x);
    if x.ncols() < b {
        return Err("random start block is rank deficient".into());
    }
    // Rayleigh-Ritz on the start block
    let (vals, c) = hermitian_eigen(x.adjoint() * &ax);
    x = &x * &c;
    ax = &ax * &c;
    let mut lambda = vals;
    let mut p: Option<CMat> = None;
    let mut worst = f64::INFINITY;

    for _ in 0..opts.max_iter {
        let mut r = &ax - &x * diag_c(&lambda);
        worst = (0..m).map(|j| r.column(j).norm()).fold(0.0, f64::max);
        if worst <= opts.tol * bound {
            let values = lambda[..m].to_vec();
            return Ok(EigenPairs { values, vectors: x.columns(0, m).clone_owned() });
        }
        // project the residual off the current block for stability
        let proj = x.adjoint() * &r;
        r -= &x * proj;
        let s = match &p {
            Some(pp) => hstack(&[&x, &r, pp]),
            None => hstack(&[&x, &r]),
        };
        let q = svqb(&svqb(&s));
        // applied afresh: products carried through an ill-conditioned basis lose accuracy
        let aq = op.apply(&q);
        if q.ncols() < b {
            return Err("search subspace collapsed".into());
        }
        let t = q.adjoint() * &aq;
        let t = (&t + t.adjoint()) * C64::new(0.5, 0.0);
        let (theta, c) = hermitian_eigen(t);
        let cb = c.columns(0, b).clone_owned();
        let x_new = &q * &cb;
        let ax_new = &aq * &cb;
        let overlap = x.adjoint() * &x_new;
        let p_new = &x_new - &x * &overlap;
        p = Some(p_new);
        x = x_new;
        ax = ax_new;
        lambda = theta[..b].to_vec();
    }
    Err(format!("LOBPCG did not converge in {} iterations (worst residual {worst:.3e}, target {:.3e})", opts.max_iter, opts.tol * bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::haar_unitary;

    fn diag(vals: &[f64]) -> DenseOperator {
        DenseOperator::new(CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            vals.len(),
            vals.iter().map(|&v| C64::new(v, 0.0)),
        )))
    }

    #[test]
    fn diagonal_operator_dense() {
        let op = diag(&[3.0, 0.0, 2.0, 1.0]);
        let ep = smallest_eigenpairs(&op, 2, &SolverOptions::default()).unwrap();
        assert_eq!(ep.values, vec![0.0, 1.0]);
    }

    #[test]
    fn lobpcg_matches_dense_on_rotated_spectrum() {
        let n = 120;
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let u = haar_unitary(n, &mut rng);
        let vals: Vec<f64> = (0..n).map(|i| if i < 3 { 1e-13 * i as f64 } else { 0.5 + i as f64 * 0.1 }).collect();
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(n, vals.iter().map(|&v| C64::new(v, 0.0))));
        let op = DenseOperator::new(&u * d * u.adjoint());
        let opts = SolverOptions { dense_threshold: 0, tol: 1e-10, ..Default::default() };
        let ep = smallest_eigenpairs(&op, 5, &opts).unwrap();
        for (i, v) in ep.values.iter().enumerate() {
            assert!((v - vals[i]).abs() < 1e-8, "{i}: {v} vs {}", vals[i]);
        }
        let gram = ep.vectors.adjoint() * &ep.vectors;
        assert!((gram - CMat::identity(5, 5)).norm() < 1e-10);
        let resid = op.apply(&ep.vectors)
            - &ep.vectors * CMat::from_diagonal(&nalgebra::DVector::from_iterator(5, ep.values.iter().map(|&v| C64::new(v, 0.0))));
        for j in 0..5 {
            assert!(resid.column(j).norm() <= 1e-10 * op.norm_bound());
        }
        let again = smallest_eigenpairs(&op, 5, &opts).unwrap();
        assert_eq!(again.values, ep.values);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let n = 80;
        let op = diag(&(0..n).map(|i| i as f64).collect::<Vec<_>>());
        let opts = SolverOptions { dense_threshold: 0, max_iter: 1, tol: 1e-14, ..Default::default() };
        assert!(smallest_eigenpairs(&op, 2, &opts).is_err());
    }

    #[test]
    fn rejects_bad_requests() {
        let op = diag(&[1.0, 2.0]);
        assert!(smallest_eigenpairs(&op, 3, &SolverOptions::default()).is_err());
        assert!(smallest_eigenpairs(&op, 1, &SolverOptions { tol: 0.0, ..Default::default() }).is_err());
    }
}
