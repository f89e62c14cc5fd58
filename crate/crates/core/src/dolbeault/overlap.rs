//! Chirally exact (Ginsparg-Wilson) Laplacians on a single periodic 2-plane.
//!
//! Spinor index `(p*n + c)*2 + s` with plane site `p = i*N + j`, colour `c` and
//! chirality `s` (0 = `+`, the function sector; 1 = `-`, the `d zbar` sector).
//! `gamma_1 = sigma_x`, `gamma_2 = sigma_y`, `gamma_5 = sigma_z`.

use crate::linalg::{hermitian_eigen, CMat, C64, I, ONE, ZERO};

/// Wilson mass of the kernel operator.
pub const WILSON_MASS: f64 = 1.0;

/// Links of one periodic `N x N` plane: `links[p] = [U_a(p), U_b(p)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneField {
    pub side: usize,
    pub rank: usize,
    pub links: Vec<[CMat; 2]>,
}

impl PlaneField {
    pub fn site(&self, i: usize, j: usize) -> usize {
        (i % self.side) * self.side + (j % self.side)
    }

    fn neighbour(&self, p: usize, dir: usize) -> usize {
        let (i, j) = (p / self.side, p % self.side);
        if dir == 0 {
            self.site(i + 1, j)
        } else {
            self.site(i, j + 1)
        }
    }
}

/// Chiral blocks of `(N^2/4)(D + D^H)` for the overlap operator `D = 1 + gamma_5 sign(H)`,
/// `H = gamma_5 (D_W - m0)`. Both are hermitian PSD of size `N^2 n`.
#[derive(Debug, Clone)]
pub struct PlaneLaplacians {
    pub plus: CMat,
    pub minus: CMat,
}

impl PlaneLaplacians {
    pub fn chirality(&self, s: usize) -> &CMat {
        if s == 0 {
            &self.plus
        } else {
            &self.minus
        }
    }
}

fn gamma(a: usize) -> [[C64; 2]; 2] {
    if a == 0 {
        [[ZERO, ONE], [ONE, ZERO]]
    } else {
        [[ZERO, -I], [I, ZERO]]
    }
}

/// Wilson-Dirac operator `sum_a [ (T_a - T_a^H)/2 (x) gamma_a - (T_a + T_a^H - 2)/2 ]`.
pub fn wilson_dirac(p: &PlaneField) -> CMat {
    let n = p.rank;
    let sites = p.side * p.side;
    let dim = 2 * sites * n;
    let idx = |site: usize, c: usize, s: usize| (site * n + c) * 2 + s;
    let mut d = CMat::zeros(dim, dim);
    for site in 0..sites {
        for c in 0..n {
            for s in 0..2 {
                d[(idx(site, c, s), idx(site, c, s))] += C64::new(2.0, 0.0);
            }
        }
        for a in 0..2 {
            let g = gamma(a);
            let nb = p.neighbour(site, a);
            let u = &p.links[site][a];
            for c in 0..n {
                for c2 in 0..n {
                    let t = u[(c, c2)];
                    if t == ZERO {
                        continue;
                    }
                    // T[(site,c),(nb,c2)] = t and T^H[(nb,c2),(site,c)] = conj(t)
                    for s in 0..2 {
                        for s2 in 0..2 {
                            let gs = g[s][s2] * 0.5;
                            d[(idx(site, c, s), idx(nb, c2, s2))] += t * gs;
                            d[(idx(nb, c2, s), idx(site, c, s2))] -= t.conj() * gs;
                        }
                        d[(idx(site, c, s), idx(nb, c2, s))] -= t * 0.5;
                        d[(idx(nb, c2, s), idx(site, c, s))] -= t.conj() * 0.5;
                    }
                }
            }
        }
    }
    d
}

pub fn plane_laplacians(p: &PlaneField) -> PlaneLaplacians {
    let n = p.rank;
    let sites = p.side * p.side;
    let dim = 2 * sites * n;
    let mut h = wilson_dirac(p);
    for k in 0..dim {
        h[(k, k)] -= C64::new(WILSON_MASS, 0.0);
    }
    // H = gamma_5 (D_W - m0): flip the sign of the s = 1 rows
    for r in (1..dim).step_by(2) {
        h.row_mut(r).neg_mut();
    }
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let (vals, v) = hermitian_eigen(h);
    let mut vs = v.clone();
    for (k, &lam) in vals.iter().enumerate() {
        if lam < 0.0 {
            vs.column_mut(k).neg_mut();
        }
    }
    let eps = vs * v.adjoint();
    // gamma_5 eps
    let mut g5e = eps;
    for r in (1..dim).step_by(2) {
        g5e.row_mut(r).neg_mut();
    }
    let scale = C64::new((p.side * p.side) as f64 / 4.0 * WILSON_MASS * WILSON_MASS, 0.0);
    let mut sum = &g5e + g5e.adjoint();
    for k in 0..dim {
        sum[(k, k)] += C64::new(2.0, 0.0);
    }
    let block = |s: usize| {
        let m = CMat::from_fn(dim / 2, dim / 2, |i, j| sum[(2 * i + s, 2 * j + s)] * scale);
        (&m + m.adjoint()) * C64::new(0.5, 0.0)
    };
    PlaneLaplacians { plus: block(0), minus: block(1) }
}

/// Eigen-decompositions of both chiral blocks.
#[derive(Debug, Clone)]
pub struct PlaneSpectrum {
    pub values: [Vec<f64>; 2],
    pub vectors: [CMat; 2],
}

pub fn plane_spectrum(p: &PlaneField) -> PlaneSpectrum {
    let lap = plane_laplacians(p);
    let (v0, e0) = hermitian_eigen(lap.plus);
    let (v1, e1) = hermitian_eigen(lap.minus);
    PlaneSpectrum { values: [v0, v1], vectors: [e0, e1] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::phase;
    use std::f64::consts::PI;

    /// Abelian plane with constant plaquette `exp(2 pi i k / N^2)` twisted by `(t0, t1)`.
    fn flux_plane(side: usize, k: i64, t: [f64; 2]) -> PlaneField {
        let nf = side as f64;
        let kf = k as f64;
        let mut links = Vec::new();
        for i in 0..side {
            for j in 0..side {
                let ua = if i == side - 1 { phase(-2.0 * PI * kf * j as f64 / nf) } else { ONE };
                let ub = phase(2.0 * PI * kf * i as f64 / (nf * nf));
                links.push([
                    CMat::from_element(1, 1, ua * phase(2.0 * PI * t[0] / nf)),
                    CMat::from_element(1, 1, ub * phase(2.0 * PI * t[1] / nf)),
                ]);
            }
        }
        PlaneField { side, rank: 1, links }
    }

    fn kernel(vals: &[f64]) -> usize {
        vals.iter().filter(|&&v| v < 1e-8).count()
    }

    #[test]
    fn free_plane_has_constant_zero_modes() {
        let s = plane_spectrum(&flux_plane(6, 0, [0.0, 0.0]));
        assert_eq!(kernel(&s.values[0]), 1);
        assert_eq!(kernel(&s.values[1]), 1);
    }

    #[test]
    fn flux_zero_modes_have_definite_chirality() {
        for k in [1i64, 2] {
            let s = plane_spectrum(&flux_plane(8, k, [0.3, 0.1]));
            assert_eq!(kernel(&s.values[0]), 0);
            assert_eq!(kernel(&s.values[1]), k as usize);
            let s = plane_spectrum(&flux_plane(8, -k, [0.0, 0.0]));
            assert_eq!(kernel(&s.values[0]), k as usize);
            assert_eq!(kernel(&s.values[1]), 0);
        }
    }

    #[test]
    fn landau_gap_is_close_to_continuum() {
        let s = plane_spectrum(&flux_plane(8, 1, [0.0, 0.0]));
        let gap = s.values[0][0];
        assert!((gap - PI).abs() < 0.05 * PI, "gap {gap}");
        assert!((s.values[1][1] - PI).abs() < 0.05 * PI);
    }

    #[test]
    fn laplacians_are_psd_and_bounded() {
        let p = flux_plane(5, 1, [0.2, 0.7]);
        let s = plane_spectrum(&p);
        let bound = (p.side * p.side) as f64;
        for vals in &s.values {
            assert!(vals[0] > -1e-10);
            assert!(*vals.last().unwrap() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn paired_spectra_of_both_chiralities_agree() {
        // modes at 0 and at the top N^2 are chiral; everything in between is paired
        let s = plane_spectrum(&flux_plane(6, 1, [0.1, 0.4]));
        let paired = |v: &&f64| **v > 1e-8 && **v < 36.0 - 1e-8;
        let a: Vec<f64> = s.values[0].iter().filter(paired).copied().collect();
        let b: Vec<f64> = s.values[1].iter().filter(paired).copied().collect();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
