//! The transformed bundle over the dual torus: Berry links from zero-mode frames,
//! their curvature and invariants, the double transform and the irreducibility test.
//!
//! The dual grid is `{0, 1/M, ..., (M-1)/M}^4` indexed like [`Lattice4`]. The link
//! `V_mu(xi)` is the unitary polar factor of `Psi(xi)^H Psi(xi + e_mu/M)`: it transports
//! from `xi + e_mu/M` back to `xi`, so the Berry links form an ordinary [`LinkField`]
//! with `N' = M` and rank `r`.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohomology::{transform_numbers, ChernNumbers};
use crate::dolbeault::{classify_solutions, FiberSolution, FiberSolver, It1Report, Mode, ModeLayout, SpectralSettings};
use crate::error::{Error, Result};
use crate::gauge::{
    asd_residual_of, chern_weil, read_header, read_matrix_row_major, round_chern, write_header,
    write_matrix_row_major, CurvatureField, Lattice4, LinkField,
};
use crate::geometry::PLANES;
use crate::linalg::{phase, polar_unitary, singular_values, CMat, C64, ONE};

const BUNDLE_MAGIC: &[u8; 4] = b"NFBB";

/// Overlaps whose smallest singular value falls below this are rejected.
pub const MIN_OVERLAP_SINGULAR: f64 = 0.1;

/// Default tolerance for rounding Chern-Weil integrals.
pub const ROUNDING_TOL: f64 = 0.2;

/// Default tolerance on Wilson-loop traces in the double transform.
pub const WILSON_TOL: f64 = 0.15;

/// Transformed bundle on the `M^4` dual grid.
#[derive(Debug, Clone)]
pub struct BerryBundle {
    /// Berry links as a field on the dual lattice.
    pub field: LinkField,
    /// Smallest singular value over all frame overlaps (1 for synthetic bundles).
    pub min_overlap: f64,
    /// Zero-mode frames per grid point, lexicographic; empty for synthetic bundles.
    pub frames: Vec<Vec<Mode>>,
    pub layout: Option<ModeLayout>,
}

impl BerryBundle {
    /// Wraps explicit dual links, e.g. synthetic data.
    pub fn from_field(field: LinkField) -> Self {
        Self { field, min_overlap: 1.0, frames: Vec::new(), layout: None }
    }

    pub fn grid(&self) -> usize {
        self.field.side()
    }

    pub fn rank(&self) -> usize {
        self.field.rank()
    }

    pub fn link(&self, site: usize, mu: usize) -> &CMat {
        self.field.link(site, mu)
    }

    /// Same layout as the link-field format, with magic `NFBB`.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        write_header(w, BUNDLE_MAGIC, &[self.grid() as u32, self.rank() as u32])?;
        w.write_all(&self.min_overlap.to_le_bytes())?;
        for u in self.field.links() {
            write_matrix_row_major(w, u)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let dims = read_header(r, BUNDLE_MAGIC, 2)?;
        let (m, rank) = (dims[0] as usize, dims[1] as usize);
        if m < 2 || rank == 0 || m > 4096 || rank > 4096 {
            return Err(Error::Format(format!("implausible dimensions M={m}, r={rank}")));
        }
        let min_overlap = crate::gauge::read_f64(r)?;
        let links = (0..4 * m.pow(4)).map(|_| read_matrix_row_major(r, rank)).collect::<Result<Vec<_>>>()?;
        Ok(Self { field: LinkField::from_links(m, rank, links)?, min_overlap, frames: Vec::new(), layout: None })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Transform of `field` on the `m^4` dual grid together with its IT1 report.
pub fn transform_with_report(field: &LinkField, m: usize, settings: &SpectralSettings) -> Result<(BerryBundle, It1Report)> {
    if m < 2 {
        return Err(Error::InvalidInput(format!("dual grid needs M >= 2, got {m}")));
    }
    let solver = FiberSolver::new(field, settings)?;
    let sols = solver.solve_grid(m)?;
    let report = classify_solutions(&solver, m, &sols);
    let bundle = bundle_from_solutions(&solver, m, sols, &report)?;
    Ok((bundle, report))
}

/// Berry bundle from fibre solutions already classified by `report`.
pub fn bundle_from_solutions(solver: &FiberSolver, m: usize, sols: Vec<FiberSolution>, report: &It1Report) -> Result<BerryBundle> {
    if !report.is_it1 {
        return Err(Error::NotIt1(format!(
            "{} of {} grid points fail, first at index {:?}",
            report.failures.len(),
            report.points.len(),
            report.failures.first()
        )));
    }
    let r = report.rank.unwrap_or(0);
    if r == 0 {
        return Err(Error::NotIt1("degree-one kernel is empty on the whole grid".into()));
    }
    let layout = solver.layout();
    let frames: Vec<Vec<Mode>> = sols.into_iter().map(|s| s.modes.into_iter().take(r).collect()).collect();
    let lat = Lattice4::new(m);
    let links: Vec<(CMat, f64)> = (0..4 * lat.volume())
        .into_par_iter()
        .map(|l| {
            let (site, mu) = (l / 4, l % 4);
            let x = lat.coords(site);
            let next = lat.step(site, mu, true);
            let ahead: Vec<Mode> = if x[mu] + 1 == m {
                frames[next].iter().map(|md| layout.shift(md, mu)).collect()
            } else {
                frames[next].clone()
            };
            polar_unitary(&layout.overlap(&frames[site], &ahead))
        })
        .collect();
    let mut min_overlap = f64::INFINITY;
    for (l, (_, s)) in links.iter().enumerate() {
        if *s < MIN_OVERLAP_SINGULAR {
            return Err(Error::SingularOverlap { site: lat.coords(l / 4), mu: l % 4 + 1, sigma: *s });
        }
        min_overlap = min_overlap.min(*s);
    }
    let field = LinkField::from_links(m, r, links.into_iter().map(|(u, _)| u).collect())?;
    Ok(BerryBundle { field, min_overlap, frames, layout: Some(layout) })
}

/// Berry bundle of `field` on the `m^4` dual grid. Requires IT1 with `r >= 1`.
pub fn transform_bundle(field: &LinkField, m: usize, settings: &SpectralSettings) -> Result<BerryBundle> {
    transform_with_report(field, m, settings).map(|(b, _)| b)
}

/// `F_hat_{mu nu}(xi) = -i M^2 log` of the dual plaquette.
pub fn berry_curvature(b: &BerryBundle) -> Result<CurvatureField> {
    b.field.curvature().map_err(|e| match e {
        Error::CurvatureTooLarge { site, mu, nu } => Error::DualGridTooCoarse { site, mu, nu },
        other => other,
    })
}

/// `||SD part of F_hat|| / ||F_hat||` over the dual grid.
pub fn transform_asd_residual(b: &BerryBundle) -> Result<f64> {
    Ok(asd_residual_of(&berry_curvature(b)?))
}

/// Unrounded Chern-Weil integrals of the transformed bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawInvariants {
    pub rank: usize,
    pub c1: [f64; 6],
    pub ch2: f64,
}

pub fn raw_invariants(b: &BerryBundle) -> Result<RawInvariants> {
    let (c1, ch2) = chern_weil(&berry_curvature(b)?);
    Ok(RawInvariants { rank: b.rank(), c1, ch2 })
}

/// `(rank, c1, ch2)` rounded to integers within `tol`.
pub fn transform_invariants(b: &BerryBundle, tol: f64) -> Result<ChernNumbers> {
    let raw = raw_invariants(b)?;
    round_chern(raw.rank, raw.c1, raw.ch2, tol)
}

/// Traces of all straight Wilson loops, direction-major then lexicographic base site
/// with the loop coordinate fixed to 0.
pub fn wilson_traces(f: &LinkField) -> Vec<C64> {
    let lat = f.lattice();
    let mut out = Vec::new();
    for mu in 0..4 {
        for site in 0..lat.volume() {
            if lat.coords(site)[mu] == 0 {
                out.push(f.wilson_loop(mu, site).trace());
            }
        }
    }
    out
}

/// Comparison of a field with its double transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleTransformReport {
    pub grid: usize,
    pub rank: usize,
    pub original: ChernNumbers,
    pub intermediate: ChernNumbers,
    pub returned: ChernNumbers,
    pub predicted_intermediate: ChernNumbers,
    pub invariants_match: bool,
    /// Largest `|tr W - tr W'|` over all straight Wilson loops.
    pub max_wilson_deviation: f64,
    pub wilson_tol: f64,
    pub wilson_match: bool,
    /// The transformed field failed IT1: a theorem-violation flag.
    pub theorem_violation: Option<String>,
}

impl DoubleTransformReport {
    pub fn passed(&self) -> bool {
        self.invariants_match && self.wilson_match && self.theorem_violation.is_none()
    }
}

/// Transform of the Berry field back onto an `n^4` grid. The dual family uses the same
/// twist sign: with the Berry links transporting towards smaller `xi`, this returns the
/// original field, while the pullback along `x -> -x` returns the field twisted by `-zeta`.
pub fn inverse_transform(b: &BerryBundle, n: usize, settings: &SpectralSettings) -> Result<BerryBundle> {
    transform_bundle(&b.field, n, settings)
}

/// Transforms `f` on the `m^4` grid, transforms the result back onto the original
/// `N^4` lattice and compares invariants and Wilson-loop traces.
pub fn double_transform_check(f: &LinkField, m: usize, settings: &SpectralSettings, tol: f64, wilson_tol: f64) -> Result<DoubleTransformReport> {
    let b = transform_bundle(f, m, settings)?;
    compare_double_transform(f, &b, settings, tol, wilson_tol).map(|(r, _)| r)
}

/// Double-transform comparison for an already computed transform `b` of `f`. Also
/// returns the field that came back, when the back-transform exists.
pub fn compare_double_transform(
    f: &LinkField,
    b: &BerryBundle,
    settings: &SpectralSettings,
    tol: f64,
    wilson_tol: f64,
) -> Result<(DoubleTransformReport, Option<LinkField>)> {
    let m = b.grid();
    let original = f.chern_numbers(tol)?;
    let intermediate = transform_invariants(&b, tol)?;
    let predicted_intermediate = transform_numbers(&original)?;
    let n = f.side();
    let back = match inverse_transform(b, n, settings) {
        Ok(back) => back,
        Err(Error::NotIt1(msg)) => {
            let report = DoubleTransformReport {
                grid: m,
                rank: b.rank(),
                original,
                intermediate,
                returned: ChernNumbers::new(0, [0; 6], 0),
                predicted_intermediate,
                invariants_match: false,
                max_wilson_deviation: f64::INFINITY,
                wilson_tol,
                wilson_match: false,
                theorem_violation: Some(format!("transformed field is not IT1: {msg}")),
            };
            return Ok((report, None));
        }
        Err(e) => return Err(e),
    };
    let returned = transform_invariants(&back, tol)?;
    let max_wilson_deviation = if back.rank() == f.rank() {
        wilson_traces(f).iter().zip(wilson_traces(&back.field).iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let report = DoubleTransformReport {
        grid: m,
        rank: b.rank(),
        invariants_match: returned == original && intermediate == predicted_intermediate,
        original,
        intermediate,
        returned,
        predicted_intermediate,
        max_wilson_deviation,
        wilson_tol,
        wilson_match: max_wilson_deviation <= wilson_tol,
        theorem_violation: None,
    };
    Ok((report, Some(back.field)))
}

/// Flat-twist memory: the double transform of `f` twisted by `zeta` against that of `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistMemoryReport {
    pub zeta: [f64; 4],
    /// Mean over loops of `tr W_twisted / tr W_untwisted` per direction (real, imaginary).
    pub ratios: [[f64; 2]; 4],
    /// `|ratio_mu - exp(2 pi i zeta_mu)|` per direction.
    pub deviations: [f64; 4],
    pub tol: f64,
    pub passed: bool,
}

pub fn twist_memory_check(f: &LinkField, m: usize, zeta: [f64; 4], settings: &SpectralSettings, tol: f64) -> Result<TwistMemoryReport> {
    let n = f.side();
    let plain = inverse_transform(&transform_bundle(f, m, settings)?, n, settings)?;
    let twisted = inverse_transform(&transform_bundle(&f.poincare_twist(zeta), m, settings)?, n, settings)?;
    let (wa, wb) = (wilson_traces(&plain.field), wilson_traces(&twisted.field));
    let per_dir = wa.len() / 4;
    let mut ratios = [[0.0; 2]; 4];
    let mut deviations = [0.0; 4];
    for mu in 0..4 {
        let mut acc = C64::new(0.0, 0.0);
        for k in mu * per_dir..(mu + 1) * per_dir {
            acc += wb[k] / wa[k];
        }
        let ratio = acc / per_dir as f64;
        ratios[mu] = [ratio.re, ratio.im];
        deviations[mu] = (ratio - phase(2.0 * std::f64::consts::PI * zeta[mu])).norm();
    }
    Ok(TwistMemoryReport { zeta, ratios, deviations, tol, passed: deviations.iter().all(|&d| d <= tol) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Irreducible,
    Reducible,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrreducibilityReport {
    pub verdict: Verdict,
    pub algebra_dim: usize,
    pub commutant_dim: usize,
    pub generators: usize,
    pub tol: f64,
}

/// Transport to the base point along the staircase `0 -> xi` (direction 1 first).
fn transport_to_origin(f: &LinkField, target: [usize; 4]) -> CMat {
    let lat = f.lattice();
    let mut t = CMat::identity(f.rank(), f.rank());
    let mut site = 0;
    for (mu, &steps) in target.iter().enumerate() {
        for _ in 0..steps {
            t *= f.link(site, mu);
            site = lat.step(site, mu, true);
        }
    }
    t
}

/// Generators of the holonomy algebra at `xi = 0`: curvatures at `samples` grid points
/// conjugated to the origin, plus the straight Wilson loops through the origin.
/// Curvatures share one scale factor so that roundoff-sized components stay negligible.
pub fn holonomy_generators(b: &BerryBundle, samples: usize) -> Result<Vec<CMat>> {
    let curv = berry_curvature(b)?;
    let lat = b.field.lattice();
    let vol = lat.volume();
    let count = samples.clamp(1, vol);
    let mut gens = Vec::new();
    for j in 0..count {
        let site = j * vol / count;
        let t = transport_to_origin(&b.field, lat.coords(site));
        for c in &curv[site].c {
            gens.push(&t * c * t.adjoint());
        }
    }
    let scale = gens.iter().map(|g| g.norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        for g in gens.iter_mut() {
            *g /= C64::new(scale, 0.0);
        }
    }
    for mu in 0..4 {
        gens.push(b.field.wilson_loop(mu, 0));
    }
    Ok(gens)
}

/// Numerical rank of `a` relative to its largest singular value, and whether a singular
/// value falls within a factor 10 of the threshold. Non-convergence counts as ambiguous.
fn numerical_rank(a: &CMat, tol: f64, reference: Option<f64>) -> (usize, bool) {
    if a.ncols() == 0 || a.nrows() == 0 {
        return (0, false);
    }
    let Some(sv) = singular_values(a) else {
        return (0, true);
    };
    let smax = reference.unwrap_or_else(|| sv.iter().copied().fold(0.0, f64::max));
    if smax == 0.0 {
        return (0, false);
    }
    let rank = sv.iter().filter(|&&s| s > tol * smax).count();
    let ambiguous = sv.iter().any(|&s| s > tol * smax / 10.0 && s < tol * smax * 10.0);
    (rank, ambiguous)
}

/// Orthonormal basis of the span of the given `r x r` matrices, via pivoted
/// Gram-Schmidt on their vectorisations after the rank has been fixed by SVD.
fn span_basis(mats: &[CMat], tol: f64) -> (Vec<CMat>, bool) {
    let Some(r) = mats.first().map(|m| m.nrows()) else {
        return (Vec::new(), false);
    };
    let a = CMat::from_fn(r * r, mats.len(), |i, j| mats[j][(i % r, i / r)]);
    let (rank, ambiguous) = numerical_rank(&a, tol, None);
    let mut basis: Vec<nalgebra::DVector<C64>> = Vec::with_capacity(rank);
    let mut rest: Vec<nalgebra::DVector<C64>> = (0..a.ncols()).map(|j| a.column(j).into_owned()).collect();
    while basis.len() < rank {
        let (k, norm) = rest.iter().enumerate().map(|(k, v)| (k, v.norm())).fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if norm <= 0.0 {
            break;
        }
        let q = rest.swap_remove(k) / C64::new(norm, 0.0);
        for v in rest.iter_mut() {
            let c = q.dotc(v);
            *v -= &q * c;
        }
        basis.push(q);
    }
    (basis.into_iter().map(|v| CMat::from_fn(r, r, |i, j| v[i + j * r])).collect(), ambiguous)
}

/// Dimension of the unital associative algebra generated by `gens`.
pub fn generated_algebra_dim(gens: &[CMat], tol: f64) -> (usize, bool) {
    let r = gens.first().map_or(1, |g| g.nrows());
    let mut mats: Vec<CMat> = vec![CMat::identity(r, r)];
    mats.extend(gens.iter().cloned());
    let (mut basis, mut ambiguous) = span_basis(&mats, tol);
    loop {
        let mut next = basis.clone();
        for a in &basis {
            for b in &basis {
                next.push(a * b);
            }
        }
        let (grown, amb) = span_basis(&next, tol);
        ambiguous |= amb;
        if grown.len() == basis.len() || grown.len() == r * r {
            return (grown.len(), ambiguous);
        }
        basis = grown;
    }
}

/// Dimension of `{X : [g, X] = 0 for all g}`.
pub fn commutant_dim(gens: &[CMat], tol: f64) -> (usize, bool) {
    let r = gens.first().map_or(1, |g| g.nrows());
    let rr = r * r;
    if gens.is_empty() {
        return (rr, false);
    }
    // vec(gX - Xg) = (I (x) g - g^T (x) I) vec(X), column-major vec
    let mut rows = CMat::zeros(rr * gens.len(), rr);
    for (k, g) in gens.iter().enumerate() {
        for col in 0..rr {
            let (a, b) = (col % r, col / r);
            // X = E_ab: gX - Xg has column b equal to g[:, a], row a equal to -g[b, :]
            for i in 0..r {
                rows[(k * rr + i + b * r, col)] += g[(i, a)];
                rows[(k * rr + a + i * r, col)] -= g[(b, i)];
            }
        }
    }
    // measured against the generators themselves, so commuting families are not
    // mistaken for noise-dominated ones
    let scale = gens.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let (rank, ambiguous) = numerical_rank(&rows, tol, Some(scale));
    (rr - rank, ambiguous)
}

/// Decides whether the holonomy algebra at the origin is all of `M_r(C)`.
pub fn irreducibility_test(b: &BerryBundle, samples: usize, tol: f64) -> Result<IrreducibilityReport> {
    if b.rank() == 0 {
        return Err(Error::InvalidInput("irreducibility test needs r >= 1".into()));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidInput(format!("rank threshold must lie in (0, 1), got {tol}")));
    }
    let gens = holonomy_generators(b, samples)?;
    Ok(verdict_for(&gens, b.rank(), tol))
}

/// Verdict from an explicit list of generators.
pub fn verdict_for(gens: &[CMat], r: usize, tol: f64) -> IrreducibilityReport {
    let (algebra_dim, amb_a) = if r == 1 { (1, false) } else { generated_algebra_dim(gens, tol) };
    let (commutant_dim, amb_c) = if r == 1 { (1, false) } else { commutant_dim(gens, tol) };
    let verdict = if amb_a || amb_c {
        Verdict::Indeterminate
    } else if algebra_dim == r * r {
        Verdict::Irreducible
    } else {
        Verdict::Reducible
    };
    IrreducibilityReport { verdict, algebra_dim, commutant_dim, generators: gens.len(), tol }
}

/// Rank-2 Berry data with constant links `exp(i theta sigma_x)` along `xi_1` and
/// `exp(i theta sigma_z)` along `xi_2`.
pub fn pauli_pair_bundle(m: usize, theta: f64) -> Result<BerryBundle> {
    let (c, s) = (theta.cos(), theta.sin());
    let zero = C64::new(0.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let ux = CMat::from_row_slice(2, 2, &[ONE * c, i * s, i * s, ONE * c]);
    let uz = CMat::from_row_slice(2, 2, &[phase(theta), zero, zero, phase(-theta)]);
    let id = CMat::identity(2, 2);
    let lat = Lattice4::new(m);
    let links = (0..4 * lat.volume())
        .map(|l| match l % 4 {
            0 => ux.clone(),
            1 => uz.clone(),
            _ => id.clone(),
        })
        .collect();
    Ok(BerryBundle::from_field(LinkField::from_links(m, 2, links)?))
}

/// U(1) Berry data whose curvature is a constant `F_12` only.
pub fn pure_f12_bundle(m: usize) -> Result<BerryBundle> {
    Ok(BerryBundle::from_field(LinkField::flux(m, 1, 0)?))
}

/// Per-plane flux sums `(1/2 pi M^2) sum_xi tr F_hat_{mu nu}` through the origin planes.
pub fn plane_fluxes(b: &BerryBundle) -> Result<[f64; 6]> {
    let mut out = [0.0; 6];
    for (k, &(mu, nu)) in PLANES.iter().enumerate() {
        out[k] = b.field.plane_flux(mu, nu, 0).map_err(|e| match e {
            Error::CurvatureTooLarge { site, mu, nu } => Error::DualGridTooCoarse { site, mu, nu },
            other => other,
        })?;
    }
    Ok(out)
}
