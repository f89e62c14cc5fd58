//! Small dense complex linear-algebra helpers shared by the lattice code.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// `exp(i theta)`.
#[inline]
pub fn phase(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// Eigen-decomposition of a hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: CMat) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Unitary factor of the polar decomposition `m = U H`, and the smallest singular value.
///
/// Computed as `M (M^H M)^{-1/2}`, which keeps exact block structure; accurate whenever
/// the smallest singular value is not tiny.
pub fn polar_unitary(m: &CMat) -> (CMat, f64) {
    if m.nrows() == 1 && m.ncols() == 1 {
        let z = m[(0, 0)];
        let a = z.norm();
        let u = if a > 0.0 { z / a } else { ONE };
        return (CMat::from_element(1, 1, u), a);
    }
    // U = M (M^H M)^{-1/2}
    let (vals, v) = hermitian_eigen(m.adjoint() * m);
    let smin = vals.iter().copied().fold(f64::INFINITY, f64::min).max(0.0).sqrt();
    if smin == 0.0 {
        return (CMat::identity(m.nrows(), m.ncols()), 0.0);
    }
    let inv_sqrt = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| C64::new(1.0 / l.sqrt(), 0.0)),
    ));
    (m * &v * inv_sqrt * v.adjoint(), smin)
}

/// Iteration cap for nalgebra's SVD.
pub const SVD_MAX_ITER: usize = 10_000;

/// Singular values, or `None` if the iteration did not converge.
pub fn singular_values(m: &CMat) -> Option<Vec<f64>> {
    m.clone().try_svd(false, false, f64::EPSILON, SVD_MAX_ITER).map(|s| s.singular_values.iter().copied().collect())
}

/// Hermitian `H = -i log U` for a unitary `U`, principal branch.
///
/// Returns `None` when an eigenphase sits within `margin` of the branch cut at `pi`.
pub fn unitary_log(u: &CMat, margin: f64) -> Option<CMat> {
    let n = u.nrows();
    if n == 1 {
        let theta = u[(0, 0)].arg();
        if std::f64::consts::PI - theta.abs() < margin {
            return None;
        }
        return Some(CMat::from_element(1, 1, C64::new(theta, 0.0)));
    }
    // the commuting hermitian parts (U + U^H)/2 and (U - U^H)/2i share an eigenbasis:
    // diagonalise the first, then the second inside each degenerate cluster
    let ua = u.adjoint();
    let re = (u + &ua) * C64::new(0.5, 0.0);
    let im = (u - &ua) * C64::new(0.0, -0.5);
    let (vals, mut q) = hermitian_eigen(re);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && vals[end] - vals[end - 1] < 1e-8 {
            end += 1;
        }
        if end - start > 1 {
            let block = q.columns(start, end - start).into_owned();
            let (_, w) = hermitian_eigen(block.adjoint() * &im * &block);
            q.columns_mut(start, end - start).copy_from(&(block * w));
        }
        start = end;
    }
    let mut thetas = Vec::with_capacity(n);
    for k in 0..n {
        let v = q.column(k);
        let theta = v.dotc(&(u * v)).arg();
        if std::f64::consts::PI - theta.abs() < margin {
            return None;
        }
        thetas.push(theta);
    }
    let mut h = CMat::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let mut acc = ZERO;
            for (k, theta) in thetas.iter().enumerate() {
                acc += q[(r, k)] * q[(c, k)].conj() * *theta;
            }
            h[(r, c)] = acc;
        }
    }
    // symmetrise away roundoff
    let ha = h.adjoint();
    Some((h + ha) * C64::new(0.5, 0.0))
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases of
/// `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for c in 0..n {
        let d = r[(c, c)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for row in 0..n {
            q[(row, c)] *= ph;
        }
    }
    q
}

/// Orthonormalise the columns of `m` in order (modified Gram-Schmidt, two passes).
pub fn orthonormalize_columns(m: &CMat) -> CMat {
    let mut q = m.clone();
    for c in 0..q.ncols() {
        for _pass in 0..2 {
            for p in 0..c {
                let proj = q.column(p).dotc(&q.column(c));
                let col_p = q.column(p).clone_owned();
                let mut col_c = q.column_mut(c);
                col_c.axpy(-proj, &col_p, ONE);
            }
        }
        let nrm = q.column(c).norm();
        q.column_mut(c).scale_mut(1.0 / nrm);
    }
    q
}

/// Deterministic basis of the column span of an orthonormal `psi`.
///
/// Rows are chosen by pivoted Gram-Schmidt on the row vectors of `psi`
/// (earliest row among the near-maximal ones), and the basis is rotated so that
/// the selected `r x r` block is hermitian positive definite. The result depends
/// only on the spanned subspace, not on the input basis.
pub fn canonical_frame(psi: &CMat) -> CMat {
    let (rows, r) = (psi.nrows(), psi.ncols());
    if r == 0 {
        return psi.clone();
    }
    let mut resid = psi.clone();
    let mut pivots = Vec::with_capacity(r);
    for _ in 0..r {
        let norms: Vec<f64> = (0..rows).map(|i| resid.row(i).norm_squared()).collect();
        let max = norms.iter().copied().fold(0.0, f64::max);
        let pick = norms
            .iter()
            .position(|&v| v >= max * (1.0 - 1e-9))
            .expect("nonempty frame");
        pivots.push(pick);
        let q = resid.row(pick).clone_owned() / C64::new(norms[pick].sqrt(), 0.0);
        // resid <- resid - (resid q^H) q
        let coeff = &resid * q.adjoint();
        resid -= coeff * q;
    }
    let block = CMat::from_fn(r, r, |i, j| psi[(pivots[i], j)]);
    let svd = block.svd(true, true);
    let w = svd.u.expect("u");
    let z = svd.v_t.expect("v_t").adjoint();
    psi * z * w.adjoint()
}

/// Frobenius norm of `a^H a - 1`.
pub fn unitarity_defect(a: &CMat) -> f64 {
    let n = a.ncols();
    (a.adjoint() * a - CMat::identity(n, n)).norm()
}
