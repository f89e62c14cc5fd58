//! Conventions for the flat unit four-torus and its dual.
//!
//! Coordinates `x1..x4` in `[0,1)`, flat metric, orientation `dx1^dx2^dx3^dx4`,
//! complex structure `z1 = x1 + i x2`, `z2 = x3 + i x4`. The dual torus uses the
//! same conventions in `xi1..xi4`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

/// Coordinate planes `(mu, nu)`, `mu < nu`, in the fixed component order
/// `12, 13, 14, 23, 24, 34` (zero-based indices).
pub const PLANES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Position of plane `(mu, nu)` in [`PLANES`] and the sign picked up by ordering it.
pub fn plane_index(mu: usize, nu: usize) -> Option<(usize, f64)> {
    let (a, b, sign) = if mu < nu { (mu, nu, 1.0) } else { (nu, mu, -1.0) };
    PLANES.iter().position(|&p| p == (a, b)).map(|i| (i, sign))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TorusRole {
    Base,
    Dual,
}

/// A discretised unit four-torus with `side` sites per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusSpec {
    side: usize,
    role: TorusRole,
}

impl TorusSpec {
    pub fn new(side: usize, role: TorusRole) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidInput(format!("torus needs at least 2 sites per direction, got {side}")));
        }
        Ok(Self { side, role })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn role(&self) -> TorusRole {
        self.role
    }

    pub fn volume(&self) -> usize {
        self.side.pow(4)
    }

    /// Lattice spacing `1/side`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.side as f64
    }

    /// Grid point `i/side` for integer coordinates.
    pub fn point(&self, coords: [usize; 4]) -> [f64; 4] {
        coords.map(|c| c as f64 / self.side as f64)
    }
}

/// Values a two-form can take: real numbers or (hermitian) matrices.
pub trait FormCoefficient: Clone {
    /// `sa * a + sb * b`
    fn combine(a: &Self, sa: f64, b: &Self, sb: f64) -> Self;
    fn norm_sqr(&self) -> f64;
}

impl FormCoefficient for f64 {
    fn combine(a: &Self, sa: f64, b: &Self, sb: f64) -> Self {
        sa * a + sb * b
    }
    fn norm_sqr(&self) -> f64 {
        self * self
    }
}

impl FormCoefficient for CMat {
    fn combine(a: &Self, sa: f64, b: &Self, sb: f64) -> Self {
        a * C64::new(sa, 0.0) + b * C64::new(sb, 0.0)
    }
    fn norm_sqr(&self) -> f64 {
        self.norm_squared()
    }
}

/// A two-form stored by its six independent components in [`PLANES`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoForm<T> {
    pub c: [T; 6],
}

impl<T: FormCoefficient> TwoForm<T> {
    pub fn new(c: [T; 6]) -> Self {
        Self { c }
    }

    /// Component `F_{mu nu}` with antisymmetry applied.
    pub fn get(&self, mu: usize, nu: usize) -> Option<T> {
        let (i, sign) = plane_index(mu, nu)?;
        Some(T::combine(&self.c[i], sign, &self.c[i], 0.0))
    }

    /// Componentwise squared l2 norm.
    pub fn norm_sqr(&self) -> f64 {
        self.c.iter().map(FormCoefficient::norm_sqr).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { c: std::array::from_fn(|i| T::combine(&self.c[i], 1.0, &other.c[i], 1.0)) }
    }
}

impl TwoForm<f64> {
    pub fn zero() -> Self {
        Self { c: [0.0; 6] }
    }

    /// Single basis element `dx_mu ^ dx_nu` (zero-based, `mu != nu`).
    pub fn basis(mu: usize, nu: usize) -> Self {
        let mut f = Self::zero();
        let (i, sign) = plane_index(mu, nu).expect("distinct directions");
        f.c[i] = sign;
        f
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { c: self.c.map(|v| v * s) }
    }
}

/// Orthogonal split of a two-form into self-dual and anti-self-dual parts.
///
/// Self-dual basis: `e12+e34, e13-e24, e14+e23`; anti-self-dual:
/// `e12-e34, e13+e24, e14-e23`.
pub fn sd_asd_split<T: FormCoefficient>(f: &TwoForm<T>) -> (TwoForm<T>, TwoForm<T>) {
    let [c12, c13, c14, c23, c24, c34] = &f.c;
    let s1 = T::combine(c12, 0.5, c34, 0.5);
    let s2 = T::combine(c13, 0.5, c24, -0.5);
    let s3 = T::combine(c14, 0.5, c23, 0.5);
    let neg = |t: &T| T::combine(t, -1.0, t, 0.0);
    let sd = TwoForm { c: [s1.clone(), s2.clone(), s3.clone(), s3, neg(&s2), s1] };
    let asd = TwoForm { c: std::array::from_fn(|i| T::combine(&f.c[i], 1.0, &sd.c[i], -1.0)) };
    (sd, asd)
}

/// `||SD part||^2` without materialising the split.
pub fn sd_norm_sqr<T: FormCoefficient>(f: &TwoForm<T>) -> f64 {
    let [c12, c13, c14, c23, c24, c34] = &f.c;
    2.0 * (T::combine(c12, 0.5, c34, 0.5).norm_sqr()
        + T::combine(c13, 0.5, c24, -0.5).norm_sqr()
        + T::combine(c14, 0.5, c23, 0.5).norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &TwoForm<f64>, b: &TwoForm<f64>) -> bool {
        a.c.iter().zip(b.c.iter()).all(|(x, y)| (x - y).abs() < 1e-14)
    }

    #[test]
    fn basis_asd_element() {
        let f = TwoForm::basis(0, 1).add(&TwoForm::basis(2, 3).scaled(-1.0));
        let (sd, asd) = sd_asd_split(&f);
        assert!(close(&sd, &TwoForm::zero()));
        assert!(close(&asd, &f));
    }

    #[test]
    fn kahler_form_is_self_dual() {
        let f = TwoForm::basis(0, 1).add(&TwoForm::basis(2, 3));
        let (sd, asd) = sd_asd_split(&f);
        assert!(close(&sd, &f));
        assert!(close(&asd, &TwoForm::zero()));
    }

    #[test]
    fn single_plane_splits_evenly() {
        let (sd, asd) = sd_asd_split(&TwoForm::basis(0, 1));
        assert!(close(&sd, &TwoForm::new([0.5, 0.0, 0.0, 0.0, 0.0, 0.5])));
        assert!(close(&asd, &TwoForm::new([0.5, 0.0, 0.0, 0.0, 0.0, -0.5])));
    }

    #[test]
    fn antisymmetric_access() {
        let f = TwoForm::basis(0, 2);
        assert_eq!(f.get(2, 0), Some(-1.0));
        assert_eq!(f.get(1, 1), None);
    }

    #[test]
    fn torus_needs_two_sites() {
        assert!(TorusSpec::new(1, TorusRole::Base).is_err());
        assert_eq!(TorusSpec::new(3, TorusRole::Dual).unwrap().volume(), 81);
    }

    #[test]
    fn matrix_valued_split_matches_scalar_split() {
        let c: [CMat; 6] = std::array::from_fn(|i| CMat::from_element(1, 1, C64::new(i as f64 + 1.0, 0.0)));
        let (sd, _) = sd_asd_split(&TwoForm::new(c));
        let (sd_r, _) = sd_asd_split(&TwoForm::new([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        for i in 0..6 {
            assert!((sd.c[i][(0, 0)].re - sd_r.c[i]).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn split_is_orthogonal_and_idempotent(v in proptest::array::uniform6(-10.0f64..10.0)) {
            let f = TwoForm::new(v);
            let (sd, asd) = sd_asd_split(&f);
            let total = f.norm_sqr();
            let parts = sd.norm_sqr() + asd.norm_sqr();
            prop_assert!((total - parts).abs() <= 1e-12 * total.max(1e-300));
            let (sd2, asd2) = sd_asd_split(&sd);
            prop_assert!(close(&sd2, &sd));
            prop_assert!(asd2.norm() < 1e-13);
            prop_assert!((sd_norm_sqr(&f) - sd.norm_sqr()).abs() <= 1e-12 * total.max(1.0));
            let sum = sd.add(&asd);
            prop_assert!(close(&sum, &f));
        }
    }
}
