//! Dolbeault complex built from covariant forward differences.
//!
//! `(D_mu psi)(x) = N (U_mu(x) psi(x+mu) - psi(x))`, `dbar_1 = (D_1 + i D_2)/2`,
//! `dbar_2 = (D_3 + i D_4)/2`, `D0 psi = (dbar_1 psi, dbar_2 psi)`,
//! `D1 (phi_1, phi_2) = dbar_1 phi_2 - dbar_2 phi_1`.
//!
//! Sections are stored site-major with colour fastest; `(0,1)`-forms are `[phi_1; phi_2]`.
//! The complex is finite dimensional, so its index `dim Omega0 - dim Omega01 + dim Omega02`
//! vanishes identically: a nonzero kernel of the degree-one Laplacian always comes with a
//! kernel in degree zero or two. This discretisation therefore never certifies IT1.

use crate::eigen::HermitianOperator;
use crate::gauge::LinkField;
use crate::linalg::{CMat, C64, I, ZERO};

/// The forward-difference operators `D0`, `D1` of a fixed link field.
#[derive(Debug, Clone)]
pub struct DolbeaultOps {
    field: LinkField,
}

impl DolbeaultOps {
    pub fn assemble(field: &LinkField) -> Self {
        Self { field: field.clone() }
    }

    pub fn field(&self) -> &LinkField {
        &self.field
    }

    /// `N^4 n`, the dimension of `Omega^0` and `Omega^{0,2}`.
    pub fn section_dim(&self) -> usize {
        self.field.lattice().volume() * self.field.rank()
    }

    /// `D_mu` or, with `adjoint`, `D_mu^H` applied to one section.
    fn covariant(&self, psi: &[C64], mu: usize, adjoint: bool) -> Vec<C64> {
        let lat = self.field.lattice();
        let n = self.field.rank();
        let scale = self.field.side() as f64;
        let mut out = vec![ZERO; psi.len()];
        for site in 0..lat.volume() {
            let o = &mut out[site * n..(site + 1) * n];
            if adjoint {
                // (D^H phi)(x) = N (U(x-mu)^H phi(x-mu) - phi(x))
                let prev = lat.step(site, mu, false);
                let u = self.field.link(prev, mu);
                for a in 0..n {
                    let mut acc = ZERO;
                    for b in 0..n {
                        acc += u[(b, a)].conj() * psi[prev * n + b];
                    }
                    o[a] = (acc - psi[site * n + a]) * scale;
                }
            } else {
                let next = lat.step(site, mu, true);
                let u = self.field.link(site, mu);
                for a in 0..n {
                    let mut acc = ZERO;
                    for b in 0..n {
                        acc += u[(a, b)] * psi[next * n + b];
                    }
                    o[a] = (acc - psi[site * n + a]) * scale;
                }
            }
        }
        out
    }

    /// `dbar_a` (a = 0 for `z1`, 1 for `z2`) or its adjoint.
    pub fn dbar(&self, psi: &[C64], a: usize, adjoint: bool) -> Vec<C64> {
        let (mu, nu) = (2 * a, 2 * a + 1);
        let x = self.covariant(psi, mu, adjoint);
        let y = self.covariant(psi, nu, adjoint);
        let c = if adjoint { -I } else { I };
        x.iter().zip(y.iter()).map(|(p, q)| (p + c * q) * 0.5).collect()
    }

    pub fn d0(&self, psi: &[C64]) -> Vec<C64> {
        let mut out = self.dbar(psi, 0, false);
        out.extend(self.dbar(psi, 1, false));
        out
    }

    pub fn d0_adjoint(&self, phi: &[C64]) -> Vec<C64> {
        let m = self.section_dim();
        let a = self.dbar(&phi[..m], 0, true);
        let b = self.dbar(&phi[m..], 1, true);
        a.iter().zip(b.iter()).map(|(x, y)| x + y).collect()
    }

    pub fn d1(&self, phi: &[C64]) -> Vec<C64> {
        let m = self.section_dim();
        let a = self.dbar(&phi[m..], 0, false);
        let b = self.dbar(&phi[..m], 1, false);
        a.iter().zip(b.iter()).map(|(x, y)| x - y).collect()
    }

    pub fn d1_adjoint(&self, chi: &[C64]) -> Vec<C64> {
        let mut out: Vec<C64> = self.dbar(chi, 1, true).into_iter().map(|v| -v).collect();
        out.extend(self.dbar(chi, 0, true));
        out
    }

    /// Laplacian of the given degree applied to one vector.
    pub fn laplacian_apply(&self, degree: usize, v: &[C64]) -> Vec<C64> {
        match degree {
            0 => self.d0_adjoint(&self.d0(v)),
            1 => {
                let a = self.d0(&self.d0_adjoint(v));
                let b = self.d1_adjoint(&self.d1(v));
                a.iter().zip(b.iter()).map(|(x, y)| x + y).collect()
            }
            _ => self.d1(&self.d1_adjoint(v)),
        }
    }

    pub fn laplacian(&self, degree: usize) -> NaiveLaplacian<'_> {
        assert!(degree <= 2, "Dolbeault degree must be 0, 1 or 2");
        NaiveLaplacian { ops: self, degree }
    }
}

/// Matrix-free `Delta^0`, `Delta^1` or `Delta^2` of the forward-difference complex.
pub struct NaiveLaplacian<'a> {
    ops: &'a DolbeaultOps,
    degree: usize,
}

impl HermitianOperator for NaiveLaplacian<'_> {
    fn dim(&self) -> usize {
        if self.degree == 1 {
            2 * self.ops.section_dim()
        } else {
            self.ops.section_dim()
        }
    }

    fn apply(&self, x: &CMat) -> CMat {
        let d = self.dim();
        let mut out = CMat::zeros(d, x.ncols());
        for j in 0..x.ncols() {
            let col = &x.as_slice()[j * d..(j + 1) * d];
            let y = self.ops.laplacian_apply(self.degree, col);
            out.column_mut(j).copy_from_slice(&y);
        }
        out
    }

    /// `||D_mu|| <= 2N`, hence `||dbar_a|| <= 2N` and every Laplacian is below `16 N^2`.
    fn norm_bound(&self) -> f64 {
        let n = self.ops.field.side() as f64;
        16.0 * n * n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{smallest_eigenpairs, SolverOptions};
    use crate::linalg::{hermitian_eigenvalues, phase};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    fn random_vec(len: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect()
    }

    fn dot(a: &[C64], b: &[C64]) -> C64 {
        a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
    }

    fn norm(a: &[C64]) -> f64 {
        a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn dimensions() {
        let ops = DolbeaultOps::assemble(&LinkField::trivial(3, 2).unwrap());
        let psi = random_vec(ops.section_dim(), 1);
        assert_eq!(ops.section_dim(), 162);
        assert_eq!(ops.d0(&psi).len(), 324);
        assert_eq!(ops.d1(&ops.d0(&psi)).len(), 162);
    }

    #[test]
    fn adjoints_are_adjoint() {
        let f = LinkField::constant_flux(3, 1).unwrap().random_gauge_transform(4);
        let ops = DolbeaultOps::assemble(&f);
        let m = ops.section_dim();
        let (psi, phi, chi) = (random_vec(m, 1), random_vec(2 * m, 2), random_vec(m, 3));
        assert!((dot(&ops.d0(&psi), &phi) - dot(&psi, &ops.d0_adjoint(&phi))).norm() < 1e-9);
        assert!((dot(&ops.d1(&phi), &chi) - dot(&phi, &ops.d1_adjoint(&chi))).norm() < 1e-9);
    }

    #[test]
    fn constants_are_holomorphic_for_trivial_field() {
        let ops = DolbeaultOps::assemble(&LinkField::trivial(4, 1).unwrap());
        let psi = vec![C64::new(0.3, -0.2); ops.section_dim()];
        assert!(norm(&ops.d0(&psi)) == 0.0);
    }

    #[test]
    fn plane_wave_is_an_eigenvector() {
        let n = 5;
        let f = LinkField::trivial(n, 1).unwrap();
        let ops = DolbeaultOps::assemble(&f);
        let lat = f.lattice();
        let psi: Vec<C64> = (0..lat.volume()).map(|i| phase(2.0 * PI * lat.coords(i)[0] as f64 / n as f64)).collect();
        let lambda = (C64::new(n as f64, 0.0) * (phase(2.0 * PI / n as f64) - 1.0)).norm_sqr() / 4.0;
        let out = ops.laplacian_apply(0, &psi);
        let resid: Vec<C64> = out.iter().zip(psi.iter()).map(|(o, p)| o - p * lambda).collect();
        assert!(norm(&resid) < 1e-10 * norm(&psi));
        // mixed momenta partially cancel in (D_1 + i D_2)/2, so the second eigenvalue lies below it
        let ep = smallest_eigenpairs(&ops.laplacian(0), 2, &SolverOptions::default()).unwrap();
        assert!(ep.values[0].abs() < 1e-10);
        assert!(ep.values[1] > 1e-3 && ep.values[1] < lambda);
    }

    #[test]
    fn twisted_constants_are_not_holomorphic() {
        let n = 4;
        let f = LinkField::trivial(n, 1).unwrap().poincare_twist([0.5, 0.0, 0.0, 0.0]);
        let ops = DolbeaultOps::assemble(&f);
        let psi = vec![C64::new(1.0, 0.0); ops.section_dim()];
        assert!(norm(&ops.d0(&psi)) > 0.1);
        let ev = hermitian_eigenvalues(ops.laplacian(0).to_dense());
        assert!(ev[0] > 0.1);
    }

    #[test]
    fn trivial_field_kernels() {
        let ops = DolbeaultOps::assemble(&LinkField::trivial(3, 1).unwrap());
        let count = |d| hermitian_eigenvalues(ops.laplacian(d).to_dense()).iter().filter(|&&v| v < 1e-9).count();
        assert_eq!(count(0), 1);
        assert_eq!(count(1), 2);
        assert_eq!(count(2), 1);
    }

    #[test]
    fn complex_property_holds_for_constructors() {
        for f in [
            LinkField::trivial(4, 1).unwrap(),
            LinkField::constant_flux(4, 1).unwrap(),
            LinkField::constant_flux(4, 2).unwrap().poincare_twist([0.1, 0.2, 0.3, 0.4]),
        ] {
            let ops = DolbeaultOps::assemble(&f);
            let psi = random_vec(ops.section_dim(), 8);
            assert!(norm(&ops.d1(&ops.d0(&psi))) <= 1e-12 * norm(&psi) * 16.0);
        }
    }

    #[test]
    fn degree_one_spectrum_is_union_of_the_others() {
        let f = LinkField::constant_flux(3, 1).unwrap().poincare_twist([0.2, 0.0, 0.4, 0.1]);
        let ops = DolbeaultOps::assemble(&f);
        let mut union = hermitian_eigenvalues(ops.laplacian(0).to_dense());
        union.extend(hermitian_eigenvalues(ops.laplacian(2).to_dense()));
        union.sort_by(f64::total_cmp);
        let d1 = hermitian_eigenvalues(ops.laplacian(1).to_dense());
        for (a, b) in union.iter().zip(d1.iter()) {
            assert!((a - b).abs() < 1e-8 * 16.0 * 9.0);
        }
    }
}
