//! U(n) link fields on the periodic lattice `(Z/N)^4`.
//!
//! Site index `((x1*N + x2)*N + x3)*N + x4`. Links `U_mu(x)` parallel transport
//! from `x + mu` back to `x`; plaquettes are `U_mu(x) U_nu(x+mu) U_mu(x+nu)^H U_nu(x)^H`.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::cohomology::ChernNumbers;
use crate::error::{Error, Result};
use crate::geometry::{sd_norm_sqr, TwoForm, PLANES};
use crate::linalg::{haar_unitary, phase, unitarity_defect, unitary_log, CMat, C64, ONE, ZERO};

/// Eigenphases closer than this to `pi` are treated as sitting on the log branch cut.
pub const BRANCH_MARGIN: f64 = 1e-6;

/// Guard for the relative ASD residual of flat fields.
pub const RESIDUAL_EPS: f64 = 1e-14;

const LINK_MAGIC: &[u8; 4] = b"NFRG";
const FORMAT_VERSION: u32 = 1;

/// Periodic four-dimensional lattice with `side` sites per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice4 {
    pub side: usize,
}

impl Lattice4 {
    pub fn new(side: usize) -> Self {
        Self { side }
    }

    pub fn volume(&self) -> usize {
        self.side.pow(4)
    }

    pub fn index(&self, x: [usize; 4]) -> usize {
        let n = self.side;
        ((x[0] * n + x[1]) * n + x[2]) * n + x[3]
    }

    pub fn coords(&self, mut i: usize) -> [usize; 4] {
        let n = self.side;
        let mut x = [0; 4];
        for d in (0..4).rev() {
            x[d] = i % n;
            i /= n;
        }
        x
    }

    /// Neighbour of site `i` one step in direction `mu` (backwards if `forward` is false).
    pub fn step(&self, i: usize, mu: usize, forward: bool) -> usize {
        let mut x = self.coords(i);
        x[mu] = if forward { (x[mu] + 1) % self.side } else { (x[mu] + self.side - 1) % self.side };
        self.index(x)
    }
}

/// Hermitian lattice curvature `F_{mu nu}(x)` at every site, in site order.
pub type CurvatureField = Vec<TwoForm<CMat>>;

/// A U(n) connection on the periodic lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkField {
    lattice: Lattice4,
    rank: usize,
    links: Vec<CMat>,
}

impl LinkField {
    /// Builds a field from links ordered by site, then direction. Links must be unitary to 1e-10.
    pub fn from_links(side: usize, rank: usize, links: Vec<CMat>) -> Result<Self> {
        if side < 2 || rank == 0 {
            return Err(Error::InvalidInput(format!("need N >= 2 and n >= 1, got N={side}, n={rank}")));
        }
        let lattice = Lattice4::new(side);
        if links.len() != 4 * lattice.volume() {
            return Err(Error::InvalidInput(format!("expected {} links, got {}", 4 * lattice.volume(), links.len())));
        }
        for (i, u) in links.iter().enumerate() {
            if u.nrows() != rank || u.ncols() != rank {
                return Err(Error::InvalidInput(format!("link {i} is not {rank}x{rank}")));
            }
            let d = unitarity_defect(u);
            if !(d <= 1e-10) {
                return Err(Error::InvalidInput(format!("link {i} is not unitary (defect {d:.2e})")));
            }
        }
        Ok(Self { lattice, rank, links })
    }

    pub fn trivial(side: usize, rank: usize) -> Result<Self> {
        let vol = Lattice4::new(side).volume();
        Self::from_links(side, rank, vec![CMat::identity(rank, rank); 4 * vol])
    }

    /// Rank-one field with constant plaquettes `exp(2 pi i k12 / N^2)` in the 12-plane and
    /// `exp(2 pi i k34 / N^2)` in the 34-plane; all other plaquettes are 1.
    pub fn flux(side: usize, k12: i64, k34: i64) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidInput(format!("need N >= 2, got {side}")));
        }
        let lat = Lattice4::new(side);
        let nf = side as f64;
        let mut links = Vec::with_capacity(4 * lat.volume());
        for i in 0..lat.volume() {
            let x = lat.coords(i);
            for (a, b, k) in [(0usize, 1usize, k12), (2, 3, k34)] {
                let kf = k as f64;
                let ua = if x[a] == side - 1 { phase(-2.0 * PI * kf * x[b] as f64 / nf) } else { ONE };
                let ub = phase(2.0 * PI * kf * x[a] as f64 / (nf * nf));
                links.push(CMat::from_element(1, 1, ua));
                links.push(CMat::from_element(1, 1, ub));
            }
        }
        Self::from_links(side, 1, links)
    }

    /// Constant-flux instanton with `c1 = k (e12 - e34)`.
    pub fn constant_flux(side: usize, k: i64) -> Result<Self> {
        Self::flux(side, k, -k)
    }

    pub fn side(&self) -> usize {
        self.lattice.side
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn lattice(&self) -> Lattice4 {
        self.lattice
    }

    pub fn link(&self, site: usize, mu: usize) -> &CMat {
        &self.links[4 * site + mu]
    }

    pub fn links(&self) -> &[CMat] {
        &self.links
    }

    /// Largest `||U^H U - 1||_F` over all links.
    pub fn max_unitarity_defect(&self) -> f64 {
        self.links.iter().map(unitarity_defect).fold(0.0, f64::max)
    }

    /// Tensor with the flat line bundle of holonomy `exp(2 pi i xi_mu)` around cycle `mu`.
    pub fn poincare_twist(&self, xi: [f64; 4]) -> Self {
        let n = self.side() as f64;
        let ph: [C64; 4] = std::array::from_fn(|mu| phase(2.0 * PI * xi[mu] / n));
        let links = self.links.iter().enumerate().map(|(i, u)| u * ph[i % 4]).collect();
        Self { lattice: self.lattice, rank: self.rank, links }
    }

    /// Block-diagonal sum of fields on the same lattice.
    pub fn direct_sum(fields: &[LinkField]) -> Result<Self> {
        let first = fields.first().ok_or_else(|| Error::InvalidInput("direct sum of no fields".into()))?;
        if let Some(bad) = fields.iter().find(|f| f.side() != first.side()) {
            return Err(Error::InvalidInput(format!(
                "direct sum needs equal N, got {} and {}",
                first.side(),
                bad.side()
            )));
        }
        let rank: usize = fields.iter().map(|f| f.rank).sum();
        let links = (0..first.links.len())
            .map(|l| {
                let mut m = CMat::zeros(rank, rank);
                let mut off = 0;
                for f in fields {
                    m.view_mut((off, off), (f.rank, f.rank)).copy_from(&f.links[l]);
                    off += f.rank;
                }
                m
            })
            .collect();
        Ok(Self { lattice: first.lattice, rank, links })
    }

    /// `U_mu(x) -> g(x) U_mu(x) g(x+mu)^H`.
    pub fn gauge_transform(&self, g: &[CMat]) -> Result<Self> {
        if g.len() != self.lattice.volume() {
            return Err(Error::InvalidInput("gauge transformation has the wrong number of sites".into()));
        }
        let lat = self.lattice;
        let links = self
            .links
            .iter()
            .enumerate()
            .map(|(l, u)| {
                let (site, mu) = (l / 4, l % 4);
                &g[site] * u * g[lat.step(site, mu, true)].adjoint()
            })
            .collect();
        Ok(Self { lattice: lat, rank: self.rank, links })
    }

    /// Pullback along `x -> -x`: `U'_mu(x) = U_mu(-x - mu)^H`.
    pub fn reflect(&self) -> Self {
        let lat = self.lattice;
        let n = self.side();
        let mut links = Vec::with_capacity(self.links.len());
        for site in 0..lat.volume() {
            let x = lat.coords(site);
            for mu in 0..4 {
                let mut y = x.map(|c| (n - c) % n);
                y[mu] = (y[mu] + n - 1) % n;
                links.push(self.link(lat.index(y), mu).adjoint());
            }
        }
        Self { lattice: lat, rank: self.rank, links }
    }

    /// Gauge transformation by Haar-random `g(x)` drawn in site order from ChaCha20 seeded with `seed`.
    pub fn random_gauge_transform(&self, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let g: Vec<CMat> = (0..self.lattice.volume()).map(|_| haar_unitary(self.rank, &mut rng)).collect();
        self.gauge_transform(&g).expect("one gauge matrix per site")
    }

    pub fn plaquette(&self, site: usize, mu: usize, nu: usize) -> CMat {
        let lat = self.lattice;
        let xm = lat.step(site, mu, true);
        let xn = lat.step(site, nu, true);
        self.link(site, mu) * self.link(xm, nu) * self.link(xn, mu).adjoint() * self.link(site, nu).adjoint()
    }

    /// `F_{mu nu}(x) = -i N^2 log(plaquette)`, principal branch.
    pub fn curvature(&self) -> Result<CurvatureField> {
        let n2 = (self.side() * self.side()) as f64;
        (0..self.lattice.volume())
            .map(|site| {
                let mut comps: Vec<CMat> = Vec::with_capacity(6);
                for &(mu, nu) in &PLANES {
                    let h = unitary_log(&self.plaquette(site, mu, nu), BRANCH_MARGIN).ok_or(
                        Error::CurvatureTooLarge { site: self.lattice.coords(site), mu: mu + 1, nu: nu + 1 },
                    )?;
                    comps.push(h * C64::new(n2, 0.0));
                }
                Ok(TwoForm::new(comps.try_into().expect("six planes")))
            })
            .collect()
    }

    pub fn asd_residual(&self) -> Result<f64> {
        Ok(asd_residual_of(&self.curvature()?))
    }

    /// Ordered product of the `N` links along the straight cycle through `site` in direction `mu`.
    pub fn wilson_loop(&self, mu: usize, site: usize) -> CMat {
        let mut w = CMat::identity(self.rank, self.rank);
        let mut s = site;
        for _ in 0..self.side() {
            w *= self.link(s, mu);
            s = self.lattice.step(s, mu, true);
        }
        w
    }

    /// Sum of `tr F_{mu nu} / (2 pi N^2)` over the 2-plane through `site`: the flux quantum.
    pub fn plane_flux(&self, mu: usize, nu: usize, site: usize) -> Result<f64> {
        let n = self.side();
        let mut total = 0.0;
        let mut row = site;
        for _ in 0..n {
            let mut s = row;
            for _ in 0..n {
                let h = unitary_log(&self.plaquette(s, mu, nu), BRANCH_MARGIN)
                    .ok_or(Error::CurvatureTooLarge { site: self.lattice.coords(s), mu: mu + 1, nu: nu + 1 })?;
                total += h.trace().re;
                s = self.lattice.step(s, nu, true);
            }
            row = self.lattice.step(row, mu, true);
        }
        Ok(total / (2.0 * PI))
    }

    /// Integer Chern data from the lattice Chern-Weil integrals.
    pub fn chern_numbers(&self, tol: f64) -> Result<ChernNumbers> {
        let (c1, ch2) = chern_weil(&self.curvature()?);
        round_chern(self.rank, c1, ch2, tol)
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        write_header(w, LINK_MAGIC, &[self.side() as u32, self.rank as u32])?;
        for u in &self.links {
            write_matrix_row_major(w, u)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let dims = read_header(r, LINK_MAGIC, 2)?;
        let (side, rank) = (dims[0] as usize, dims[1] as usize);
        if side < 2 || rank == 0 || side > 4096 || rank > 4096 {
            return Err(Error::Format(format!("implausible dimensions N={side}, n={rank}")));
        }
        let count = 4 * side.pow(4);
        let links = (0..count).map(|_| read_matrix_row_major(r, rank)).collect::<Result<Vec<_>>>()?;
        Self::from_links(side, rank, links)
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

/// `||SD part|| / max(||F||, eps)` with l2 norms over sites and components.
pub fn asd_residual_of(curv: &[TwoForm<CMat>]) -> f64 {
    let mut sd = 0.0;
    let mut total = 0.0;
    for f in curv {
        sd += sd_norm_sqr(f);
        total += f.norm_sqr();
    }
    sd.sqrt() / total.sqrt().max(RESIDUAL_EPS)
}

/// Mean over sites of `tr F / 2 pi` per plane, and `(1/8 pi^2) int tr F^F`.
pub fn chern_weil(curv: &[TwoForm<CMat>]) -> ([f64; 6], f64) {
    let vol = curv.len() as f64;
    let mut c1 = [0.0; 6];
    let mut ff = 0.0;
    for f in curv {
        for (i, c) in c1.iter_mut().enumerate() {
            *c += f.c[i].trace().re;
        }
        let [f12, f13, f14, f23, f24, f34] = &f.c;
        ff += 2.0 * ((f12 * f34).trace().re - (f13 * f24).trace().re + (f14 * f23).trace().re);
    }
    (c1.map(|v| v / (2.0 * PI * vol)), ff / (8.0 * PI * PI * vol))
}

fn round_checked(v: f64, tol: f64, what: &str) -> Result<i64> {
    let r = v.round();
    if (v - r).abs() > tol || !v.is_finite() {
        return Err(Error::ResolutionInsufficient(format!("{what} = {v:.4} is not within {tol} of an integer")));
    }
    Ok(r as i64)
}

pub fn round_chern(rank: usize, c1: [f64; 6], ch2: f64, tol: f64) -> Result<ChernNumbers> {
    let mut out = [0i64; 6];
    for (i, &v) in c1.iter().enumerate() {
        let (mu, nu) = PLANES[i];
        out[i] = round_checked(v, tol, &format!("c1[{}{}]", mu + 1, nu + 1))?;
    }
    Ok(ChernNumbers::new(rank as i64, out, round_checked(ch2, tol, "ch2")?))
}

pub(crate) fn write_header(w: &mut impl Write, magic: &[u8; 4], dims: &[u32]) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for d in dims {
        w.write_all(&d.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_header(r: &mut impl Read, magic: &[u8; 4], ndims: usize) -> Result<Vec<u32>> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    (0..ndims).map(|_| read_u32(r)).collect()
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn write_c64(w: &mut impl Write, z: C64) -> Result<()> {
    w.write_all(&z.re.to_le_bytes())?;
    w.write_all(&z.im.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_c64(r: &mut impl Read) -> Result<C64> {
    Ok(C64::new(read_f64(r)?, read_f64(r)?))
}

pub(crate) fn write_matrix_row_major(w: &mut impl Write, m: &CMat) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            write_c64(w, m[(i, j)])?;
        }
    }
    Ok(())
}

pub(crate) fn read_matrix_row_major(r: &mut impl Read, n: usize) -> Result<CMat> {
    let mut m = CMat::from_element(n, n, ZERO);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = read_c64(r)?;
        }
    }
    Ok(m)
}
