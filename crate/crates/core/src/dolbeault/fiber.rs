//! Per-fibre spectral problems of the twisted Dolbeault family.
//!
//! The default discretisation builds the four-dimensional Laplacians from two
//! commuting plane operators, one for the `z1` plane (links `U_1, U_2`, one copy
//! per `(x3, x4)` slice) and one for the `z2` plane (links `U_3, U_4`, one copy
//! per `(x1, x2)` slice):
//!
//! ```text
//! Delta^0 = P1+ + P2+,   Delta^1 = (P1- + P2+) (+) (P1+ + P2-),   Delta^2 = P1- + P2-
//! ```
//!
//! When every link is diagonal and the plane links of each colour do not depend
//! on the transverse coordinates, the spectra and zero modes factor into plane
//! eigenpairs, which is much cheaper and is used automatically.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::naive::DolbeaultOps;
use super::overlap::{plane_laplacians, plane_spectrum, PlaneField, PlaneSpectrum};
use crate::eigen::{smallest_eigenpairs, HermitianOperator, SolverOptions};
use crate::error::{Error, Result};
use crate::gauge::{Lattice4, LinkField};
use crate::linalg::{phase, CMat, C64, ZERO};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    /// Ginsparg-Wilson plane operators combined as above.
    #[default]
    Overlap,
    /// Covariant forward differences; kept for comparison, cannot certify IT1.
    ForwardDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    /// Use the factorised solver whenever the field allows it.
    #[default]
    Auto,
    /// Always solve the full four-dimensional problems.
    Generic,
}

/// Thresholds and solver choices shared by every fibre solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralSettings {
    pub discretization: Discretization,
    pub path: SolverPath,
    /// Number of lowest eigenvalues kept per Laplacian.
    pub eigencount: usize,
    /// Absolute kernel threshold; `None` means `tau_ker_rel * ||Delta||_est`.
    pub tau_ker: Option<f64>,
    pub tau_ker_rel: f64,
    pub rho_gap: f64,
    pub solver: SolverOptions,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        Self {
            discretization: Discretization::Overlap,
            path: SolverPath::Auto,
            eigencount: 8,
            tau_ker: None,
            tau_ker_rel: 1e-6,
            rho_gap: 50.0,
            solver: SolverOptions::default(),
        }
    }
}

impl SpectralSettings {
    pub fn validate(&self) -> Result<()> {
        if self.eigencount == 0 {
            return Err(Error::Config("eigencount must be at least 1".into()));
        }
        if let Some(t) = self.tau_ker {
            if !(t > 0.0) {
                return Err(Error::Config(format!("tau_ker must be positive, got {t}")));
            }
        }
        for (name, v) in [("tau_ker_rel", self.tau_ker_rel), ("rho_gap", self.rho_gap), ("solver.tol", self.solver.tol)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.solver.max_iter == 0 {
            return Err(Error::Config("solver.max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// One degree-one eigenmode. Sector 0 is `phi_1` (`d zbar_1`), sector 1 is `phi_2`.
#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    /// `left (x) right` in colour `color`: `left` over `(x1,x2)`, `right` over `(x3,x4)`.
    Kron { color: usize, sector: usize, left: nalgebra::DVector<C64>, right: nalgebra::DVector<C64> },
    /// Full `2 N^4 n` vector `[phi_1; phi_2]`.
    Dense(nalgebra::DVector<C64>),
}

/// Dimensions needed to interpret [`Mode`]s.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeLayout {
    pub side: usize,
    pub rank: usize,
}

impl ModeLayout {
    pub fn section_dim(&self) -> usize {
        self.side.pow(4) * self.rank
    }

    pub fn dense(&self, m: &Mode) -> nalgebra::DVector<C64> {
        match m {
            Mode::Dense(v) => v.clone(),
            Mode::Kron { color, sector, left, right } => {
                let sec = self.section_dim();
                let n2 = self.side * self.side;
                let mut v = nalgebra::DVector::from_element(2 * sec, ZERO);
                for a in 0..n2 {
                    for b in 0..n2 {
                        v[sector * sec + (a * n2 + b) * self.rank + color] = left[a] * right[b];
                    }
                }
                v
            }
        }
    }

    pub fn inner(&self, a: &Mode, b: &Mode) -> C64 {
        match (a, b) {
            (
                Mode::Kron { color: c1, sector: s1, left: l1, right: r1 },
                Mode::Kron { color: c2, sector: s2, left: l2, right: r2 },
            ) => {
                if c1 != c2 || s1 != s2 {
                    ZERO
                } else {
                    l1.dotc(l2) * r1.dotc(r2)
                }
            }
            _ => self.dense(a).dotc(&self.dense(b)),
        }
    }

    /// Apply the gauge transformation `exp(-2 pi i x_mu / N)` relating the twist at
    /// `xi + e_mu` to the twist at `xi`.
    pub fn shift(&self, m: &Mode, mu: usize) -> Mode {
        let n = self.side;
        let g = |x: usize| phase(-2.0 * PI * x as f64 / n as f64);
        match m {
            Mode::Kron { color, sector, left, right } => {
                let (mut l, mut r) = (left.clone(), right.clone());
                let coord = |p: usize, first: bool| if first { p / n } else { p % n };
                if mu < 2 {
                    for p in 0..l.len() {
                        l[p] *= g(coord(p, mu == 0));
                    }
                } else {
                    for p in 0..r.len() {
                        r[p] *= g(coord(p, mu == 2));
                    }
                }
                Mode::Kron { color: *color, sector: *sector, left: l, right: r }
            }
            Mode::Dense(v) => {
                let lat = Lattice4::new(n);
                let sec = self.section_dim();
                let mut out = v.clone();
                for (k, z) in out.iter_mut().enumerate() {
                    let site = (k % sec) / self.rank;
                    *z *= g(lat.coords(site)[mu]);
                }
                Mode::Dense(out)
            }
        }
    }

    /// `A^H B` for two lists of modes.
    pub fn overlap(&self, a: &[Mode], b: &[Mode]) -> CMat {
        CMat::from_fn(a.len(), b.len(), |i, j| self.inner(&a[i], &b[j]))
    }

    pub fn to_matrix(&self, modes: &[Mode]) -> CMat {
        let mut m = CMat::zeros(2 * self.section_dim(), modes.len());
        for (j, mode) in modes.iter().enumerate() {
            m.column_mut(j).copy_from(&self.dense(mode));
        }
        m
    }
}

/// Lowest eigenvalues of the three Laplacians at one fibre, and the degree-one
/// eigenmodes matching `delta1`.
#[derive(Debug, Clone)]
pub struct FiberSolution {
    pub delta0: Vec<f64>,
    pub delta1: Vec<f64>,
    pub delta2: Vec<f64>,
    pub modes: Vec<Mode>,
}

/// Sum of per-slice plane operators acting on four-dimensional sections.
struct SliceSum<'a> {
    side: usize,
    rank: usize,
    /// `p1[b]` acts on the `(x1,x2)` slice at `b = x3*N + x4`.
    p1: Vec<&'a CMat>,
    /// `p2[a]` acts on the `(x3,x4)` slice at `a = x1*N + x2`.
    p2: Vec<&'a CMat>,
    bound: f64,
}

impl HermitianOperator for SliceSum<'_> {
    fn dim(&self) -> usize {
        self.side.pow(4) * self.rank
    }

    fn apply(&self, x: &CMat) -> CMat {
        let n2 = self.side * self.side;
        let n = self.rank;
        let k = x.ncols();
        let mut out = CMat::zeros(x.nrows(), k);
        let mut sub = CMat::zeros(n2 * n, k);
        for b in 0..n2 {
            for a in 0..n2 {
                for c in 0..n {
                    sub.row_mut(a * n + c).copy_from(&x.row((a * n2 + b) * n + c));
                }
            }
            let y = self.p1[b] * &sub;
            for a in 0..n2 {
                for c in 0..n {
                    let mut row = out.row_mut((a * n2 + b) * n + c);
                    row += y.row(a * n + c);
                }
            }
        }
        for a in 0..n2 {
            let rows = x.rows(a * n2 * n, n2 * n);
            let y = self.p2[a] * rows;
            let mut dst = out.rows_mut(a * n2 * n, n2 * n);
            dst += y;
        }
        out
    }

    fn norm_bound(&self) -> f64 {
        self.bound
    }
}

const SECTORS: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

/// Per-colour plane fields of a factorisable field.
#[derive(Debug, Clone)]
struct SeparableField {
    planes: Vec<(PlaneField, PlaneField)>,
}

/// Entry-wise tolerance of the factorisation test. Berry fields of factorised inputs
/// factorise only up to roundoff.
const SEPARABLE_TOL: f64 = 1e-12;

fn is_diagonal(u: &CMat) -> bool {
    (0..u.nrows()).all(|i| (0..u.ncols()).all(|j| i == j || u[(i, j)].norm() <= SEPARABLE_TOL))
}

fn separable(field: &LinkField) -> Option<SeparableField> {
    let lat = field.lattice();
    let n = field.side();
    let rank = field.rank();
    if !field.links().iter().all(is_diagonal) {
        return None;
    }
    for site in 0..lat.volume() {
        let x = lat.coords(site);
        let base12 = lat.index([x[0], x[1], 0, 0]);
        let base34 = lat.index([0, 0, x[2], x[3]]);
        for mu in 0..4 {
            let base = if mu < 2 { base12 } else { base34 };
            if (field.link(site, mu) - field.link(base, mu)).camax() > SEPARABLE_TOL {
                return None;
            }
        }
    }
    let plane = |c: usize, dirs: (usize, usize), at: &dyn Fn(usize, usize) -> [usize; 4]| PlaneField {
        side: n,
        rank: 1,
        links: (0..n * n)
            .map(|p| {
                let s = lat.index(at(p / n, p % n));
                [
                    CMat::from_element(1, 1, field.link(s, dirs.0)[(c, c)]),
                    CMat::from_element(1, 1, field.link(s, dirs.1)[(c, c)]),
                ]
            })
            .collect(),
    };
    let planes = (0..rank)
        .map(|c| (plane(c, (0, 1), &|i, j| [i, j, 0, 0]), plane(c, (2, 3), &|i, j| [0, 0, i, j])))
        .collect();
    Some(SeparableField { planes })
}

fn twist_plane(p: &PlaneField, t: [f64; 2]) -> PlaneField {
    let n = p.side as f64;
    let ph = [phase(2.0 * PI * t[0] / n), phase(2.0 * PI * t[1] / n)];
    PlaneField {
        side: p.side,
        rank: p.rank,
        links: p.links.iter().map(|[a, b]| [a * ph[0], b * ph[1]]).collect(),
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Separable(SeparableField),
    Generic,
    Naive,
}

/// Solves the fibre problems of one link field for any twist `xi`.
#[derive(Debug, Clone)]
pub struct FiberSolver {
    field: LinkField,
    settings: SpectralSettings,
    engine: Engine,
}

/// Grid point `xi = idx / m` in lexicographic order (`xi_1` slowest).
pub fn grid_point(m: usize, k: usize) -> [f64; 4] {
    Lattice4::new(m).coords(k).map(|i| i as f64 / m as f64)
}

impl FiberSolver {
    pub fn new(field: &LinkField, settings: &SpectralSettings) -> Result<Self> {
        settings.validate()?;
        let engine = match settings.discretization {
            Discretization::ForwardDifference => Engine::Naive,
            Discretization::Overlap => match (settings.path, separable(field)) {
                (SolverPath::Auto, Some(s)) => Engine::Separable(s),
                _ => Engine::Generic,
            },
        };
        Ok(Self { field: field.clone(), settings: *settings, engine })
    }

    pub fn field(&self) -> &LinkField {
        &self.field
    }

    pub fn settings(&self) -> &SpectralSettings {
        &self.settings
    }

    pub fn is_factorised(&self) -> bool {
        matches!(self.engine, Engine::Separable(_))
    }

    pub fn layout(&self) -> ModeLayout {
        ModeLayout { side: self.field.side(), rank: self.field.rank() }
    }

    /// Analytic upper bound on the norm of every Laplacian.
    pub fn norm_bound(&self) -> f64 {
        let n = self.field.side() as f64;
        match self.engine {
            Engine::Naive => 16.0 * n * n,
            _ => 2.0 * n * n,
        }
    }

    pub fn tau_ker(&self) -> f64 {
        self.settings.tau_ker.unwrap_or(self.settings.tau_ker_rel * self.norm_bound())
    }

    fn count(&self, dim: usize) -> usize {
        self.settings.eigencount.min(dim)
    }

    fn solver_error(xi: [f64; 4], degree: usize, detail: String) -> Error {
        Error::SolverFailure { xi, degree, detail }
    }

    pub fn solve(&self, xi: [f64; 4]) -> Result<FiberSolution> {
        match &self.engine {
            Engine::Separable(s) => {
                let spectra: Vec<(PlaneSpectrum, PlaneSpectrum)> = s
                    .planes
                    .iter()
                    .map(|(p1, p2)| {
                        (plane_spectrum(&twist_plane(p1, [xi[0], xi[1]])), plane_spectrum(&twist_plane(p2, [xi[2], xi[3]])))
                    })
                    .collect();
                let refs: Vec<(&PlaneSpectrum, &PlaneSpectrum)> = spectra.iter().map(|(a, b)| (a, b)).collect();
                Ok(self.combine(&refs))
            }
            Engine::Generic => self.solve_generic(xi),
            Engine::Naive => self.solve_naive(xi),
        }
    }

    /// Solutions at every point of the `m^4` grid, in lexicographic order.
    pub fn solve_grid(&self, m: usize) -> Result<Vec<FiberSolution>> {
        if m < 1 {
            return Err(Error::InvalidInput("dual grid needs at least one point per direction".into()));
        }
        match &self.engine {
            Engine::Separable(s) => {
                // plane problems depend on (xi1, xi2) or (xi3, xi4) only
                let mf = m as f64;
                let planes = |which: usize| -> Vec<Vec<PlaneSpectrum>> {
                    (0..m * m)
                        .into_par_iter()
                        .map(|q| {
                            let t = [(q / m) as f64 / mf, (q % m) as f64 / mf];
                            s.planes
                                .iter()
                                .map(|pp| plane_spectrum(&twist_plane(if which == 0 { &pp.0 } else { &pp.1 }, t)))
                                .collect()
                        })
                        .collect()
                };
                let first = planes(0);
                let second = planes(1);
                Ok((0..m.pow(4))
                    .into_par_iter()
                    .map(|k| {
                        let (q1, q2) = (k / (m * m), k % (m * m));
                        let refs: Vec<(&PlaneSpectrum, &PlaneSpectrum)> =
                            first[q1].iter().zip(second[q2].iter()).collect();
                        self.combine(&refs)
                    })
                    .collect())
            }
            _ => (0..m.pow(4)).into_par_iter().map(|k| self.solve(grid_point(m, k))).collect(),
        }
    }

    fn combine(&self, spectra: &[(&PlaneSpectrum, &PlaneSpectrum)]) -> FiberSolution {
        let layout = self.layout();
        let count = self.count(layout.section_dim());
        // (value, sector, colour, i, j); the lowest `count` sums use i, j < count
        let candidates = |s1: usize, s2: usize| {
            let mut out = Vec::new();
            for (c, (a, b)) in spectra.iter().enumerate() {
                let (va, vb) = (&a.values[s1], &b.values[s2]);
                for i in 0..count.min(va.len()) {
                    for j in 0..count.min(vb.len()) {
                        out.push((va[i] + vb[j], c, i, j));
                    }
                }
            }
            out
        };
        let lowest = |mut v: Vec<(f64, usize, usize, usize)>| {
            v.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2, x.3).cmp(&(y.1, y.2, y.3))));
            v.truncate(count);
            v
        };
        let values = |s: (usize, usize)| lowest(candidates(s.0, s.1)).iter().map(|t| t.0).collect::<Vec<_>>();
        let mut d1: Vec<(f64, usize, usize, usize, usize)> = Vec::new();
        for (sector, &(s1, s2)) in [SECTORS[1], SECTORS[2]].iter().enumerate() {
            d1.extend(lowest(candidates(s1, s2)).into_iter().map(|(v, c, i, j)| (v, sector, c, i, j)));
        }
        d1.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2, x.3, x.4).cmp(&(y.1, y.2, y.3, y.4))));
        d1.truncate(count);
        let modes = d1
            .iter()
            .map(|&(_, sector, c, i, j)| {
                let (s1, s2) = SECTORS[1 + sector];
                Mode::Kron {
                    color: c,
                    sector,
                    left: spectra[c].0.vectors[s1].column(i).clone_owned(),
                    right: spectra[c].1.vectors[s2].column(j).clone_owned(),
                }
            })
            .collect();
        FiberSolution {
            delta0: values(SECTORS[0]),
            delta1: d1.iter().map(|t| t.0).collect(),
            delta2: values(SECTORS[3]),
            modes,
        }
    }

    fn solve_generic(&self, xi: [f64; 4]) -> Result<FiberSolution> {
        let f = self.field.poincare_twist(xi);
        let lat = f.lattice();
        let n = f.side();
        let n2 = n * n;
        let slice = |dirs: (usize, usize), at: &dyn Fn(usize, usize) -> [usize; 4]| PlaneField {
            side: n,
            rank: f.rank(),
            links: (0..n2)
                .map(|p| {
                    let s = lat.index(at(p / n, p % n));
                    [f.link(s, dirs.0).clone(), f.link(s, dirs.1).clone()]
                })
                .collect(),
        };
        let p1: Vec<_> = (0..n2)
            .map(|b| plane_laplacians(&slice((0, 1), &|i, j| [i, j, b / n, b % n])))
            .collect();
        let p2: Vec<_> = (0..n2)
            .map(|a| plane_laplacians(&slice((2, 3), &|i, j| [a / n, a % n, i, j])))
            .collect();
        let layout = self.layout();
        let count = self.count(layout.section_dim());
        let mut sectors = Vec::with_capacity(4);
        for (k, &(s1, s2)) in SECTORS.iter().enumerate() {
            let op = SliceSum {
                side: n,
                rank: f.rank(),
                p1: p1.iter().map(|l| l.chirality(s1)).collect(),
                p2: p2.iter().map(|l| l.chirality(s2)).collect(),
                bound: self.norm_bound(),
            };
            let degree = [0, 1, 1, 2][k];
            let opts = SolverOptions { seed: self.settings.solver.seed.wrapping_add(k as u64), ..self.settings.solver };
            sectors.push(smallest_eigenpairs(&op, count, &opts).map_err(|e| Self::solver_error(xi, degree, e))?);
        }
        let sec = layout.section_dim();
        let mut d1: Vec<(f64, usize, usize)> = Vec::new();
        for sector in 0..2 {
            d1.extend(sectors[1 + sector].values.iter().enumerate().map(|(i, &v)| (v, sector, i)));
        }
        d1.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        d1.truncate(count);
        let modes = d1
            .iter()
            .map(|&(_, sector, i)| {
                let mut v = nalgebra::DVector::from_element(2 * sec, ZERO);
                v.rows_mut(sector * sec, sec).copy_from(&sectors[1 + sector].vectors.column(i));
                Mode::Dense(v)
            })
            .collect();
        Ok(FiberSolution {
            delta0: sectors[0].values.clone(),
            delta1: d1.iter().map(|t| t.0).collect(),
            delta2: sectors[3].values.clone(),
            modes,
        })
    }

    fn solve_naive(&self, xi: [f64; 4]) -> Result<FiberSolution> {
        let ops = DolbeaultOps::assemble(&self.field.poincare_twist(xi));
        let sec = ops.section_dim();
        let mut out = Vec::with_capacity(3);
        for degree in 0..3 {
            let lap = ops.laplacian(degree);
            let count = self.count(lap.dim());
            let opts = SolverOptions { seed: self.settings.solver.seed.wrapping_add(degree as u64), ..self.settings.solver };
            out.push(smallest_eigenpairs(&lap, count, &opts).map_err(|e| Self::solver_error(xi, degree, e))?);
        }
        let modes = (0..out[1].values.len()).map(|i| Mode::Dense(out[1].vectors.column(i).clone_owned())).collect();
        debug_assert_eq!(out[1].vectors.nrows(), 2 * sec);
        Ok(FiberSolution {
            delta0: out[0].values.clone(),
            delta1: out[1].values.clone(),
            delta2: out[2].values.clone(),
            modes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(path: SolverPath) -> SpectralSettings {
        SpectralSettings { path, ..Default::default() }
    }

    #[test]
    fn constructors_are_separable() {
        let f = LinkField::constant_flux(4, 1).unwrap();
        assert!(separable(&f).is_some());
        let s = LinkField::direct_sum(&[f.clone(), f.poincare_twist([0.5, 0.0, 0.25, 0.0])]).unwrap();
        assert!(separable(&s).is_some());
        assert!(separable(&f.random_gauge_transform(3)).is_none());
    }

    #[test]
    fn factorised_and_generic_solvers_agree() {
        let f = LinkField::constant_flux(4, 1).unwrap();
        let xi = [0.25, 0.5, 0.0, 0.75];
        let fast = FiberSolver::new(&f, &settings(SolverPath::Auto)).unwrap();
        let slow = FiberSolver::new(&f, &settings(SolverPath::Generic)).unwrap();
        assert!(fast.is_factorised() && !slow.is_factorised());
        let (a, b) = (fast.solve(xi).unwrap(), slow.solve(xi).unwrap());
        for (x, y) in [(&a.delta0, &b.delta0), (&a.delta1, &b.delta1), (&a.delta2, &b.delta2)] {
            for (u, v) in x.iter().zip(y.iter()) {
                assert!((u - v).abs() < 1e-9, "{u} vs {v}");
            }
        }
        // the zero modes span the same line
        let layout = fast.layout();
        let o = layout.overlap(&a.modes[..1], &b.modes[..1]);
        assert!((o[(0, 0)].norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn grid_solve_matches_pointwise_solve() {
        let f = LinkField::constant_flux(4, 1).unwrap();
        let s = FiberSolver::new(&f, &SpectralSettings::default()).unwrap();
        let grid = s.solve_grid(2).unwrap();
        for k in [0, 5, 15] {
            let p = s.solve(grid_point(2, k)).unwrap();
            assert_eq!(p.delta1, grid[k].delta1);
        }
    }

    #[test]
    fn mode_shift_matches_twist_by_a_full_period() {
        let f = LinkField::constant_flux(4, 1).unwrap();
        for path in [SolverPath::Auto, SolverPath::Generic] {
            let s = FiberSolver::new(&f, &settings(path)).unwrap();
            let layout = s.layout();
            let base = s.solve([0.0, 0.25, 0.0, 0.0]).unwrap();
            for mu in 0..4 {
                let mut xi = [0.0, 0.25, 0.0, 0.0];
                xi[mu] += 1.0;
                let moved = s.solve(xi).unwrap();
                let shifted = layout.shift(&base.modes[0], mu);
                let o = layout.inner(&shifted, &moved.modes[0]);
                assert!((o.norm() - 1.0).abs() < 1e-9, "mu={mu}: {}", o.norm());
            }
        }
    }

    #[test]
    fn kron_modes_expand_consistently() {
        let f = LinkField::direct_sum(&[
            LinkField::constant_flux(4, 1).unwrap(),
            LinkField::constant_flux(4, 1).unwrap().poincare_twist([0.5, 0.0, 0.0, 0.5]),
        ])
        .unwrap();
        let s = FiberSolver::new(&f, &SpectralSettings::default()).unwrap();
        let layout = s.layout();
        let sol = s.solve([0.1, 0.2, 0.3, 0.4]).unwrap();
        let dense = layout.to_matrix(&sol.modes);
        let gram = dense.adjoint() * &dense;
        let analytic = layout.overlap(&sol.modes, &sol.modes);
        assert!((gram - &analytic).norm() < 1e-10);
        assert!((analytic - CMat::identity(sol.modes.len(), sol.modes.len())).norm() < 1e-9);
    }

    #[test]
    fn settings_validation() {
        let mut s = SpectralSettings::default();
        assert!(s.validate().is_ok());
        s.tau_ker = Some(0.0);
        assert!(s.validate().is_err());
        s.tau_ker = None;
        s.rho_gap = -1.0;
        assert!(s.validate().is_err());
    }
}
