//! Closed-form data for the constant-flux fields `c1 = k (e12 - e34)`.
//!
//! In the gauge of [`LinkField::flux`](crate::gauge::LinkField::flux) a plane with flux
//! `q` has `A_b = 2 pi q s` and sections quasi-periodic as `psi(s+1, t) = exp(-2 pi i q t) psi(s, t)`.
//! With a twist `(t_a, t_b)` its `|q|` zero modes of `D_a - i sign(q) D_b` are the theta series
//!
//! `psi_j(s,t) = sum_l exp(-2 pi i t_a (l + s)) exp(-(pi/|q|)(j + q l + q s + t_b)^2) exp(2 pi i (j + q l) t)`.
//!
//! Harmonic `(0,1)`-forms are products of a plane-1 mode (flux `k`) and a plane-2 mode
//! (flux `-k`) in the `d zbar_1` component for `k > 0`, and in `d zbar_2` for `k < 0`.
//! Nothing here calls the lattice solvers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TwoForm;
use crate::linalg::{orthonormalize_columns, phase, singular_values, CMat, C64};

/// Default number of theta-series terms on each side of the centre.
pub const DEFAULT_TRUNCATION: usize = 7;

/// Largest accepted relative change of a mode's norm when one more term is added.
pub const NORMALIZATION_DRIFT: f64 = 1e-8;

/// Predictions for one flux `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePrediction {
    pub k: i64,
    pub r: usize,
    pub gap: f64,
    /// Coefficients of the dual curvature in `dxi_{mu nu}`, times the identity.
    pub curvature: [f64; 6],
}

pub fn predict(k: i64) -> Result<OraclePrediction> {
    nonzero(k)?;
    Ok(OraclePrediction { k, r: (k * k) as usize, gap: oracle_gap(k)?, curvature: oracle_transform_curvature(k)?.c })
}

fn nonzero(k: i64) -> Result<()> {
    if k == 0 {
        return Err(Error::Oracle("flux k must be nonzero".into()));
    }
    Ok(())
}

/// Values of the `j`-th plane zero mode on the `N x N` plane sites, row-major in `(s, t)`.
fn plane_mode(q: i64, j: i64, twist: [f64; 2], side: usize, terms: usize) -> Vec<C64> {
    let qa = q.unsigned_abs() as f64;
    let qf = q as f64;
    let nf = side as f64;
    let mut out = Vec::with_capacity(side * side);
    for a in 0..side {
        let s = a as f64 / nf;
        for b in 0..side {
            let t = b as f64 / nf;
            let mut acc = C64::new(0.0, 0.0);
            for l in -(terms as i64)..=(terms as i64) {
                let lf = l as f64;
                let n = j as f64 + qf * lf;
                let gauss = (-(PI / qa) * (n + qf * s + twist[1]).powi(2)).exp();
                acc += phase(-2.0 * PI * twist[0] * (lf + s) + 2.0 * PI * n * t) * gauss;
            }
            out.push(acc);
        }
    }
    out
}

fn raw_modes(k: i64, xi: [f64; 4], side: usize, terms: usize) -> CMat {
    let ka = k.unsigned_abs() as usize;
    let n2 = side * side;
    let sec = n2 * n2;
    let sector = if k > 0 { 0 } else { 1 };
    let left: Vec<Vec<C64>> = (0..ka as i64).map(|j| plane_mode(k, j, [xi[0], xi[1]], side, terms)).collect();
    let right: Vec<Vec<C64>> = (0..ka as i64).map(|j| plane_mode(-k, j, [xi[2], xi[3]], side, terms)).collect();
    let mut m = CMat::zeros(2 * sec, ka * ka);
    for (i, l) in left.iter().enumerate() {
        for (j, r) in right.iter().enumerate() {
            let col = i * ka + j;
            for a in 0..n2 {
                for b in 0..n2 {
                    m[(sector * sec + a * n2 + b, col)] = l[a] * r[b];
                }
            }
        }
    }
    m
}

/// Orthonormal `2 N^4 x k^2` frame of continuum harmonic `(0,1)`-forms sampled on the
/// lattice, in the section layout of the degree-one Laplacian (rank one, colour fastest).
pub fn landau_zero_modes(k: i64, xi: [f64; 4], side: usize, truncation: usize) -> Result<CMat> {
    nonzero(k)?;
    if truncation < 3 {
        return Err(Error::Oracle(format!("theta truncation must be at least 3, got {truncation}")));
    }
    if side < 2 {
        return Err(Error::Oracle(format!("need N >= 2, got {side}")));
    }
    let m = raw_modes(k, xi, side, truncation);
    let more = raw_modes(k, xi, side, truncation + 1);
    for c in 0..m.ncols() {
        let (a, b) = (m.column(c).norm(), more.column(c).norm());
        let drift = (a - b).abs() / b;
        if drift > NORMALIZATION_DRIFT || !drift.is_finite() {
            return Err(Error::Oracle(format!(
                "theta series with {truncation} terms drifts by {drift:.2e} in mode {c}; increase the truncation"
            )));
        }
    }
    Ok(orthonormalize_columns(&m))
}

/// Smallest singular value of `a^H b` for two orthonormal frames: `1` when they span the
/// same subspace, `|<a, b>|` for single vectors.
pub fn frame_overlap(a: &CMat, b: &CMat) -> Result<f64> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::InvalidInput(format!(
            "frames of shape {}x{} and {}x{} cannot be compared",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let sv = singular_values(&(a.adjoint() * b)).ok_or_else(|| Error::Oracle("overlap SVD did not converge".into()))?;
    Ok(sv.into_iter().fold(f64::INFINITY, f64::min))
}

/// First nonzero eigenvalue of the continuum degree-one Laplacian: the plane operators
/// have ladders `pi |k| n` (zero-mode sector) and `pi |k| (n + 1)`, so the gap is `pi |k|`.
pub fn oracle_gap(k: i64) -> Result<f64> {
    nonzero(k)?;
    Ok(PI * k.unsigned_abs() as f64)
}

/// Constant dual curvature `-(2 pi / k)(dxi_12 - dxi_34)` times the identity of rank `k^2`.
pub fn oracle_transform_curvature(k: i64) -> Result<TwoForm<f64>> {
    nonzero(k)?;
    let c = -2.0 * PI / k as f64;
    Ok(TwoForm::new([c, 0.0, 0.0, 0.0, 0.0, -c]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sd_asd_split;

    fn max_orthonormality_defect(m: &CMat) -> f64 {
        let g = m.adjoint() * m - CMat::identity(m.ncols(), m.ncols());
        g.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn unit_flux_has_one_normalised_section() {
        let f = landau_zero_modes(1, [0.0; 4], 6, DEFAULT_TRUNCATION).unwrap();
        assert_eq!(f.ncols(), 1);
        assert!((f.column(0).norm() - 1.0).abs() < 1e-12);
        // sector 0 only
        let sec = 6usize.pow(4);
        assert!(f.rows(sec, sec).norm() == 0.0);
    }

    #[test]
    fn frames_are_orthonormal() {
        for k in [1, 2, -1, -2] {
            let f = landau_zero_modes(k, [0.1, 0.3, 0.7, 0.2], 5, DEFAULT_TRUNCATION).unwrap();
            assert_eq!(f.ncols(), (k * k) as usize);
            assert!(max_orthonormality_defect(&f) < 1e-10);
        }
    }

    #[test]
    fn shifting_xi_by_a_period_keeps_the_subspace() {
        let n = 6;
        let a = landau_zero_modes(1, [0.2, 0.1, 0.0, 0.4], n, DEFAULT_TRUNCATION).unwrap();
        let b = landau_zero_modes(1, [1.2, 0.1, 0.0, 0.4], n, DEFAULT_TRUNCATION).unwrap();
        // the twisted family at xi + e_1 is gauge equivalent through exp(-2 pi i x_1 / N)
        let sec = n.pow(4);
        let mut g = b.clone();
        for (row, z) in g.column_mut(0).iter_mut().enumerate() {
            let x1 = (row % sec) / n.pow(3);
            *z *= phase(2.0 * PI * x1 as f64 / n as f64);
        }
        assert!(frame_overlap(&a, &g).unwrap() > 1.0 - 1e-10);
        let c = landau_zero_modes(2, [0.2, 1.1, 0.0, 0.4], n, DEFAULT_TRUNCATION).unwrap();
        let d = landau_zero_modes(2, [0.2, 0.1, 0.0, 0.4], n, DEFAULT_TRUNCATION).unwrap();
        let mut g = c.clone();
        for (row, mut r) in g.row_iter_mut().enumerate() {
            let x2 = (row % sec) / n.pow(2) % n;
            r *= phase(2.0 * PI * x2 as f64 / n as f64);
        }
        assert!(frame_overlap(&g, &d).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn short_truncation_is_rejected() {
        assert!(matches!(landau_zero_modes(1, [0.0; 4], 4, 2), Err(Error::Oracle(_))));
        assert!(landau_zero_modes(0, [0.0; 4], 4, 7).is_err());
    }

    #[test]
    fn gap_grows_with_flux() {
        assert!(oracle_gap(2).unwrap() > 1.5 * oracle_gap(1).unwrap());
        assert_eq!(oracle_gap(-2).unwrap(), oracle_gap(2).unwrap());
        assert!(oracle_gap(0).is_err());
    }

    #[test]
    fn dual_curvature_is_anti_self_dual() {
        let f = oracle_transform_curvature(1).unwrap();
        assert!((f.c[0] + 2.0 * PI).abs() < 1e-15);
        let (sd, _) = sd_asd_split(&f);
        assert!(sd.norm() < 1e-15);
        let p = predict(2).unwrap();
        assert_eq!(p.r, 4);
        // tr F_12 / 2 pi over the unit plane is c1 = -k
        assert!((p.curvature[0] * p.r as f64 / (2.0 * PI) + 2.0).abs() < 1e-12);
    }
}
