//! Integer arithmetic in the K3 lattice `U^3 + E8(-1)^2` and the Mukai lattice.
//!
//! Basis order: `e1, f1, e2, f2, e3, f3` (three hyperbolic planes, `e.f = 1`),
//! then the simple roots of the two `E8(-1)` blocks.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RANK: usize = 22;

/// Cartan matrix of E8 (Bourbaki labelling, branch node attached to root 4).
const E8_CARTAN: [[i64; 8]; 8] = [
    [2, 0, -1, 0, 0, 0, 0, 0],
    [0, 2, 0, -1, 0, 0, 0, 0],
    [-1, 0, 2, -1, 0, 0, 0, 0],
    [0, -1, -1, 2, -1, 0, 0, 0],
    [0, 0, 0, -1, 2, -1, 0, 0],
    [0, 0, 0, 0, -1, 2, -1, 0],
    [0, 0, 0, 0, 0, -1, 2, -1],
    [0, 0, 0, 0, 0, 0, -1, 2],
];

/// The K3 lattice with its Gram matrix, validated once at construction.
#[derive(Debug, Clone)]
pub struct K3Lattice {
    gram: [[i64; RANK]; RANK],
}

fn build_gram() -> [[i64; RANK]; RANK] {
    let mut g = [[0i64; RANK]; RANK];
    for p in 0..3 {
        g[2 * p][2 * p + 1] = 1;
        g[2 * p + 1][2 * p] = 1;
    }
    for block in 0..2 {
        let off = 6 + 8 * block;
        for i in 0..8 {
            for j in 0..8 {
                g[off + i][off + j] = -E8_CARTAN[i][j];
            }
        }
    }
    g
}

/// Exact determinant by fraction-free Gaussian elimination.
pub fn bareiss_determinant(m: &[Vec<i64>]) -> i128 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&i| a[i][k] != 0) {
                Some(i) => {
                    a.swap(i, k);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

impl K3Lattice {
    pub fn new() -> Result<Self> {
        let gram = build_gram();
        let rows: Vec<Vec<i64>> = gram.iter().map(|r| r.to_vec()).collect();
        let det = bareiss_determinant(&rows);
        if det.abs() != 1 {
            return Err(Error::InvalidInput(format!("K3 Gram matrix not unimodular (det {det})")));
        }
        for i in 0..RANK {
            if gram[i][i] % 2 != 0 {
                return Err(Error::InvalidInput("K3 Gram matrix not even".into()));
            }
            for j in 0..RANK {
                if gram[i][j] != gram[j][i] {
                    return Err(Error::InvalidInput("K3 Gram matrix not symmetric".into()));
                }
            }
        }
        let lat = Self { gram };
        if lat.signature() != (3, 19) {
            return Err(Error::InvalidInput(format!("K3 lattice signature {:?}", lat.signature())));
        }
        Ok(lat)
    }

    /// Shared, validated instance.
    pub fn standard() -> &'static K3Lattice {
        static LATTICE: OnceLock<K3Lattice> = OnceLock::new();
        LATTICE.get_or_init(|| K3Lattice::new().expect("standard K3 lattice is valid"))
    }

    pub fn gram(&self) -> &[[i64; RANK]; RANK] {
        &self.gram
    }

    pub fn determinant(&self) -> i128 {
        bareiss_determinant(&self.gram.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    /// `(positive, negative)` inertia.
    pub fn signature(&self) -> (usize, usize) {
        let m = DMatrix::from_fn(RANK, RANK, |i, j| self.gram[i][j] as f64);
        let ev = m.symmetric_eigenvalues();
        let pos = ev.iter().filter(|&&v| v > 1e-9).count();
        let neg = ev.iter().filter(|&&v| v < -1e-9).count();
        (pos, neg)
    }

    pub fn pair(&self, a: &K3Class, b: &K3Class) -> i64 {
        let mut s = 0;
        for i in 0..RANK {
            if a.0[i] == 0 {
                continue;
            }
            for j in 0..RANK {
                s += a.0[i] * self.gram[i][j] * b.0[j];
            }
        }
        s
    }
}

/// Integer coordinates of a class in `H^2(K3, Z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct K3Class(#[serde(with = "coords")] pub [i64; RANK]);

mod coords {
    use super::RANK;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[i64; RANK], s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[i64; RANK], D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        let n = v.len();
        v.try_into().map_err(|_| D::Error::custom(format!("expected {RANK} coordinates, got {n}")))
    }
}

impl K3Class {
    pub fn zero() -> Self {
        Self([0; RANK])
    }

    pub fn from_slice(v: &[i64]) -> Result<Self> {
        let arr: [i64; RANK] = v
            .try_into()
            .map_err(|_| Error::InvalidInput(format!("K3 class needs {RANK} coordinates, got {}", v.len())))?;
        Ok(Self(arr))
    }

    /// `e_p` of hyperbolic plane `p` (0, 1 or 2).
    pub fn e(p: usize) -> Self {
        let mut c = Self::zero();
        c.0[2 * p] = 1;
        c
    }

    /// `f_p` of hyperbolic plane `p`.
    pub fn f(p: usize) -> Self {
        let mut c = Self::zero();
        c.0[2 * p + 1] = 1;
        c
    }

    pub fn add(&self, o: &Self) -> Self {
        Self(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }

    pub fn scale(&self, k: i64) -> Self {
        Self(self.0.map(|v| v * k))
    }

    pub fn dot(&self, o: &Self) -> i64 {
        K3Lattice::standard().pair(self, o)
    }

    pub fn square(&self) -> i64 {
        self.dot(self)
    }
}

/// `(r, l, s)` with `s = r + int ch2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MukaiVector {
    pub r: i64,
    pub l: K3Class,
    pub s: i64,
}

impl MukaiVector {
    pub fn new(r: i64, l: K3Class, s: i64) -> Self {
        Self { r, l, s }
    }

    /// From rank, first Chern class and `c2`: `ch2 = l^2/2 - c2` (`l^2` is even).
    pub fn from_chern(r: i64, l: K3Class, c2: i64) -> Self {
        Self { r, l, s: r + l.square() / 2 - c2 }
    }

    /// `c2 = r + l^2/2 - s`; always integral since the lattice is even.
    pub fn c2(&self) -> i64 {
        self.r + self.l.square() / 2 - self.s
    }
}

pub fn mukai_pairing(v: &MukaiVector, w: &MukaiVector) -> i64 {
    v.l.dot(&w.l) - v.r * w.s - w.r * v.s
}

/// Expected dimension `<v,v> + 2` of the moduli space of sheaves with vector `v`.
pub fn moduli_dimension(v: &MukaiVector) -> i64 {
    mukai_pairing(v, v) + 2
}

/// Numerical conditions on a polarisation `H` and a class `l`, plus the derived `c2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub h_square: i64,
    pub l_dot_h: i64,
    pub l_square: i64,
    pub h_square_is_2: bool,
    pub l_orthogonal_to_h: bool,
    pub l_square_is_minus_12: bool,
    /// `l^2/4 + 2`, kept as a fraction `(numerator, denominator)` in lowest terms.
    pub c2_num: i64,
    pub c2_den: i64,
    pub c2_is_minus_1: bool,
    /// Dimension of the moduli space for rank 2, `c1 = l`, the derived `c2` (if integral).
    pub moduli_dimension: Option<i64>,
    pub all_hold: bool,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

pub fn check_conditions(h: &K3Class, l: &K3Class) -> ConditionReport {
    let h2 = h.square();
    let lh = l.dot(h);
    let l2 = l.square();
    let (num, den) = (l2 + 8, 4);
    let g = gcd(num, den).max(1);
    let (c2_num, c2_den) = (num / g, den / g);
    let c2_int = (c2_den == 1).then_some(c2_num);
    let moduli = c2_int.map(|c2| moduli_dimension(&MukaiVector::from_chern(2, *l, c2)));
    let checks = [h2 == 2, lh == 0, l2 == -12, c2_int == Some(-1)];
    ConditionReport {
        h_square: h2,
        l_dot_h: lh,
        l_square: l2,
        h_square_is_2: checks[0],
        l_orthogonal_to_h: checks[1],
        l_square_is_minus_12: checks[2],
        c2_num,
        c2_den,
        c2_is_minus_1: checks[3],
        moduli_dimension: moduli,
        all_hold: checks.iter().all(|&b| b),
    }
}
