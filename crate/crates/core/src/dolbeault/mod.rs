//! Twisted Dolbeault complexes, their Laplacians, the IT1 classifier and zero-mode frames.

mod fiber;
pub mod naive;
pub mod overlap;

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use fiber::{grid_point, Discretization, FiberSolution, FiberSolver, Mode, ModeLayout, SolverPath, SpectralSettings};
pub use naive::{DolbeaultOps, NaiveLaplacian};

use crate::error::{Error, Result};
use crate::gauge::{read_c64, read_f64, read_header, write_c64, write_header, Lattice4, LinkField};
use crate::linalg::{canonical_frame, CMat};

const FRAME_MAGIC: &[u8; 4] = b"NFZM";

/// Lowest part of one Laplacian's spectrum at one fibre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub degree: usize,
    pub eigenvalues: Vec<f64>,
    pub kernel_dim: usize,
    /// `lambda_{r+1} / (lambda_r + tau_ker)` with `lambda_0 = 0`; `None` if the
    /// kept eigenvalues are all below the threshold.
    pub gap_ratio: Option<f64>,
}

impl SpectralReport {
    pub fn new(degree: usize, eigenvalues: Vec<f64>, tau: f64) -> Self {
        let kernel_dim = eigenvalues.iter().take_while(|&&v| v < tau).count();
        let gap_ratio = eigenvalues.get(kernel_dim).map(|&next| {
            let last = if kernel_dim == 0 { 0.0 } else { eigenvalues[kernel_dim - 1] };
            next / (last.max(0.0) + tau)
        });
        Self { degree, eigenvalues, kernel_dim, gap_ratio }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    /// Only degree one has a kernel, separated by a clear gap.
    Ok,
    /// `Delta^0` has a kernel: a flat factor / holomorphic section.
    KernelInDegree0,
    /// `Delta^2` has a kernel.
    KernelInDegree2,
    /// The degree-one cluster is not separated by `rho_gap`.
    Indeterminate,
    /// Gapped, but the cluster size differs from the majority rank.
    RankMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub index: [usize; 4],
    pub xi: [f64; 4],
    pub delta0: SpectralReport,
    pub delta1: SpectralReport,
    pub delta2: SpectralReport,
    pub status: PointStatus,
}

/// Result of the IT1 test over a dual grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct It1Report {
    pub grid: usize,
    pub tau_ker: f64,
    pub rho_gap: f64,
    pub discretization: Discretization,
    pub is_it1: bool,
    /// Common kernel size of `Delta^1` (rank of the transform) when IT1 holds.
    pub rank: Option<usize>,
    /// Grid indices of every failing point, lexicographic.
    pub failures: Vec<[usize; 4]>,
    pub min_gap_ratio: f64,
    pub min_lambda0: f64,
    pub min_lambda2: f64,
    pub points: Vec<PointReport>,
}

impl It1Report {
    pub fn failure_contains(&self, idx: [usize; 4]) -> bool {
        self.failures.contains(&idx)
    }
}

fn classify_point(sol: &FiberSolution, tau: f64, rho: f64) -> (SpectralReport, SpectralReport, SpectralReport, PointStatus) {
    let r0 = SpectralReport::new(0, sol.delta0.clone(), tau);
    let r1 = SpectralReport::new(1, sol.delta1.clone(), tau);
    let r2 = SpectralReport::new(2, sol.delta2.clone(), tau);
    let status = if r0.kernel_dim > 0 {
        PointStatus::KernelInDegree0
    } else if r2.kernel_dim > 0 {
        PointStatus::KernelInDegree2
    } else if r1.gap_ratio.is_none_or(|g| g < rho) {
        PointStatus::Indeterminate
    } else {
        PointStatus::Ok
    };
    (r0, r1, r2, status)
}

/// Classifies already computed fibre solutions on an `m^4` grid.
pub fn classify_solutions(solver: &FiberSolver, m: usize, sols: &[FiberSolution]) -> It1Report {
    let tau = solver.tau_ker();
    let rho = solver.settings().rho_gap;
    let lat = Lattice4::new(m);
    let mut points: Vec<PointReport> = sols
        .iter()
        .enumerate()
        .map(|(k, sol)| {
            let (delta0, delta1, delta2, status) = classify_point(sol, tau, rho);
            PointReport { index: lat.coords(k), xi: grid_point(m, k), delta0, delta1, delta2, status }
        })
        .collect();
    // the majority cluster size among gapped points; ties go to the smaller rank
    let mut counts = std::collections::BTreeMap::new();
    for p in points.iter().filter(|p| p.status == PointStatus::Ok) {
        *counts.entry(p.delta1.kernel_dim).or_insert(0usize) += 1;
    }
    let majority = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(&r, _)| r);
    for p in points.iter_mut() {
        if p.status == PointStatus::Ok && Some(p.delta1.kernel_dim) != majority {
            p.status = PointStatus::RankMismatch;
        }
    }
    let failures: Vec<[usize; 4]> = points.iter().filter(|p| p.status != PointStatus::Ok).map(|p| p.index).collect();
    let is_it1 = failures.is_empty() && !points.is_empty();
    let fold_min = |f: &dyn Fn(&PointReport) -> Option<f64>| points.iter().filter_map(f).fold(f64::INFINITY, f64::min);
    It1Report {
        grid: m,
        tau_ker: tau,
        rho_gap: rho,
        discretization: solver.settings().discretization,
        is_it1,
        rank: if is_it1 { majority } else { None },
        min_gap_ratio: fold_min(&|p| p.delta1.gap_ratio),
        min_lambda0: fold_min(&|p| p.delta0.eigenvalues.first().copied()),
        min_lambda2: fold_min(&|p| p.delta2.eigenvalues.first().copied()),
        failures,
        points,
    }
}

/// Runs the IT1 test for `field` on the `m^4` dual grid.
pub fn classify_it1(field: &LinkField, m: usize, settings: &SpectralSettings) -> Result<It1Report> {
    let solver = FiberSolver::new(field, settings)?;
    let sols = solver.solve_grid(m)?;
    Ok(classify_solutions(&solver, m, &sols))
}

/// One fibre of the transformed bundle: an orthonormal `2 N^4 n x r` frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroModeFrame {
    pub side: usize,
    pub rank: usize,
    pub xi: [f64; 4],
    pub matrix: CMat,
}

impl ZeroModeFrame {
    pub fn r(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        write_header(w, FRAME_MAGIC, &[self.side as u32, self.rank as u32, self.r() as u32])?;
        for x in self.xi {
            w.write_all(&x.to_le_bytes())?;
        }
        // column-major
        for z in self.matrix.iter() {
            write_c64(w, *z)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let d = read_header(r, FRAME_MAGIC, 3)?;
        let (side, rank, cols) = (d[0] as usize, d[1] as usize, d[2] as usize);
        if side < 2 || rank == 0 || side > 512 || rank > 512 || cols > 4096 {
            return Err(Error::Format(format!("implausible frame dimensions N={side} n={rank} r={cols}")));
        }
        let mut xi = [0.0; 4];
        for x in xi.iter_mut() {
            *x = read_f64(r)?;
        }
        let rows = 2 * side.pow(4) * rank;
        let data = (0..rows * cols).map(|_| read_c64(r)).collect::<Result<Vec<_>>>()?;
        Ok(Self { side, rank, xi, matrix: CMat::from_vec(rows, cols, data) })
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

/// Orthonormal frame of the `r`-dimensional low cluster of `Delta^1` at the twist `xi`,
/// in the canonical basis of [`canonical_frame`].
pub fn zero_mode_frame(field: &LinkField, xi: [f64; 4], r: usize, settings: &SpectralSettings) -> Result<ZeroModeFrame> {
    let solver = FiberSolver::new(field, settings)?;
    let sol = solver.solve(xi)?;
    let tau = solver.tau_ker();
    let rep = SpectralReport::new(1, sol.delta1.clone(), tau);
    if rep.kernel_dim != r || rep.gap_ratio.is_none_or(|g| g < settings.rho_gap) {
        return Err(Error::NotIt1(format!(
            "degree-one cluster at xi={xi:?} has {} modes below {tau:.3e} (gap ratio {:?}), expected {r}",
            rep.kernel_dim, rep.gap_ratio
        )));
    }
    let psi = solver.layout().to_matrix(&sol.modes[..r]);
    Ok(ZeroModeFrame { side: field.side(), rank: field.rank(), xi, matrix: canonical_frame(&psi) })
}
