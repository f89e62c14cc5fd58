//! Exact exterior-algebra calculus on `H*(T^4)`, `H*(T^4^)` and their product.
//!
//! Generators are ordered `e1 < e2 < e3 < e4 < f1 < f2 < f3 < f4` where `f_i`
//! denotes the dual-torus class `e^_i`; a monomial is a bitmask over these eight
//! generators written in increasing order. Orientation: `int e1234 f1234 = +1`.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PLANES;

const X_MASK: u8 = 0x0F;
const Y_MASK: u8 = 0xF0;

/// Which torus (or product) a class lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Space {
    X,
    Y,
    XY,
}

impl Space {
    fn allowed(self) -> u8 {
        match self {
            Space::X => X_MASK,
            Space::Y => Y_MASK,
            Space::XY => 0xFF,
        }
    }

    /// Bit offset of the degree-one generators of a single torus.
    fn offset(self) -> Result<usize> {
        match self {
            Space::X => Ok(0),
            Space::Y => Ok(4),
            Space::XY => Err(Error::InvalidInput("expected a class on X or Y, got X x Y".into())),
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Space::X => "X",
            Space::Y => "Y",
            Space::XY => "XxY",
        };
        f.write_str(s)
    }
}

/// Sign of `a ^ b` relative to the ordered monomial `a | b` (zero if they overlap).
fn wedge_sign(a: u8, b: u8) -> i64 {
    if a & b != 0 {
        return 0;
    }
    let mut swaps = 0u32;
    for j in 0..8 {
        if b & (1 << j) != 0 {
            // generators of `a` above j must move past it
            swaps += ((a as u32) >> (j + 1)).count_ones();
        }
    }
    if swaps % 2 == 0 {
        1
    } else {
        -1
    }
}

/// A rational cohomology class, sparse over monomials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohClass {
    space: Space,
    terms: BTreeMap<u8, Rational64>,
}

impl CohClass {
    pub fn zero(space: Space) -> Self {
        Self { space, terms: BTreeMap::new() }
    }

    pub fn scalar(space: Space, value: i64) -> Self {
        Self::zero(space).with_term(0, Rational64::from_integer(value))
    }

    /// Monomial from zero-based generator indices (0..4 are `e`, 4..8 are `e^`),
    /// in the order given.
    pub fn monomial(space: Space, gens: &[usize], coeff: i64) -> Result<Self> {
        let mut mask = 0u8;
        let mut sign = 1i64;
        for &g in gens {
            if g >= 8 {
                return Err(Error::InvalidInput(format!("generator index {g} out of range")));
            }
            let bit = 1u8 << g;
            sign *= wedge_sign(mask, bit);
            mask |= bit;
        }
        if mask & !space.allowed() != 0 {
            return Err(Error::InvalidInput(format!("generators {gens:?} do not live on {space}")));
        }
        Ok(Self::zero(space).with_term(mask, Rational64::from_integer(sign * coeff)))
    }

    /// `e_mu ^ e_nu` on `X` or `e^_mu ^ e^_nu` on `Y` (zero-based directions).
    pub fn plane(space: Space, mu: usize, nu: usize, coeff: i64) -> Result<Self> {
        let off = space.offset()?;
        Self::monomial(space, &[off + mu, off + nu], coeff)
    }

    /// Top class `e1234` on X or `e^1234` on Y.
    pub fn top(space: Space, coeff: i64) -> Result<Self> {
        let off = space.offset()?;
        Self::monomial(space, &[off, off + 1, off + 2, off + 3], coeff)
    }

    fn with_term(mut self, mask: u8, c: Rational64) -> Self {
        self.add_term(mask, c);
        self
    }

    fn add_term(&mut self, mask: u8, c: Rational64) {
        if c == Rational64::from_integer(0) {
            return;
        }
        let entry = self.terms.entry(mask).or_insert_with(|| Rational64::from_integer(0));
        *entry += c;
        if *entry == Rational64::from_integer(0) {
            self.terms.remove(&mask);
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of an ordered monomial given by its bitmask.
    pub fn coefficient(&self, mask: u8) -> Rational64 {
        self.terms.get(&mask).copied().unwrap_or_else(|| Rational64::from_integer(0))
    }

    pub fn terms(&self) -> impl Iterator<Item = (u8, Rational64)> + '_ {
        self.terms.iter().map(|(&m, &c)| (m, c))
    }

    pub fn degree_part(&self, degree: u32) -> Self {
        let mut out = Self::zero(self.space);
        for (&m, &c) in &self.terms {
            if m.count_ones() == degree {
                out.add_term(m, c);
            }
        }
        out
    }

    fn check_space(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch { left: self.space.to_string(), right: other.space.to_string() });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_space(other)?;
        let mut out = self.clone();
        for (&m, &c) in &other.terms {
            out.add_term(m, c);
        }
        Ok(out)
    }

    pub fn scale(&self, s: Rational64) -> Self {
        let mut out = Self::zero(self.space);
        for (&m, &c) in &self.terms {
            out.add_term(m, c * s);
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(Rational64::from_integer(-1))
    }

    /// Cup product; graded-anticommutative in the eight degree-one generators.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        self.check_space(other)?;
        let mut out = Self::zero(self.space);
        for (&a, &ca) in &self.terms {
            for (&b, &cb) in &other.terms {
                let s = wedge_sign(a, b);
                if s != 0 {
                    out.add_term(a | b, ca * cb * Rational64::from_integer(s));
                }
            }
        }
        Ok(out)
    }

    /// Pull a class on X or Y back to `X x Y` (same monomials).
    pub fn pullback_to_product(&self) -> Result<Self> {
        if self.space == Space::XY {
            return Err(Error::InvalidInput("class already lives on X x Y".into()));
        }
        Ok(Self { space: Space::XY, terms: self.terms.clone() })
    }
}

impl fmt::Display for CohClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (&m, &c) in &self.terms {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            if m == 0 {
                continue;
            }
            for g in 0..8 {
                if m & (1 << g) != 0 {
                    if g < 4 {
                        write!(f, "e{}", g + 1)?;
                    } else {
                        write!(f, "f{}", g - 3)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// `ch = rank + c1 + ch2 * [top]`. On a torus the Todd class is 1, so
/// `chi(E (x) flat) = ch2`.
pub fn chern_character(rank: i64, c1: &CohClass, ch2_int: i64) -> Result<CohClass> {
    let space = c1.space;
    space.offset()?;
    if !c1.degree_part(2).add(&c1.neg()).map(|d| d.is_zero()).unwrap_or(false) {
        return Err(Error::InvalidInput("c1 must be a pure degree-2 class".into()));
    }
    CohClass::scalar(space, rank).add(c1)?.add(&CohClass::top(space, ch2_int)?)
}

/// `exp(P)`, `P = sum_i e_i ^ e^_i`, on `X x Y`. Trivial on `X x {0}` and `{0} x Y`.
pub fn poincare_class() -> CohClass {
    exp_of_pairing(false)
}

/// `exp(sum_i e^_i ^ e_i)`: the Poincaré class with the roles of the factors exchanged.
pub fn dual_poincare_class() -> CohClass {
    exp_of_pairing(true)
}

fn exp_of_pairing(dual_order: bool) -> CohClass {
    let mut p = CohClass::zero(Space::XY);
    for i in 0..4 {
        let gens = if dual_order { [4 + i, i] } else { [i, 4 + i] };
        p = p.add(&CohClass::monomial(Space::XY, &gens, 1).expect("valid generators")).expect("same space");
    }
    let mut total = CohClass::scalar(Space::XY, 1);
    let mut power = CohClass::scalar(Space::XY, 1);
    let mut factorial = 1i64;
    for m in 1..=4 {
        power = power.wedge(&p).expect("same space");
        factorial *= m;
        total = total.add(&power.scale(Rational64::new(1, factorial))).expect("same space");
    }
    total
}

/// Integration over the X fibre of `X x Y -> Y`: keep terms `e1234 ^ e^_T`, map them to `e^_T`.
pub fn pushforward_to_y(c: &CohClass) -> Result<CohClass> {
    if c.space != Space::XY {
        return Err(Error::InvalidInput("pushforward expects a class on X x Y".into()));
    }
    let mut out = CohClass::zero(Space::Y);
    for (m, v) in c.terms() {
        if m & X_MASK == X_MASK {
            out.add_term(m & Y_MASK, v);
        }
    }
    Ok(out)
}

/// Integration over the Y fibre of `X x Y -> X`: `e_S ^ e^1234 -> e_S`.
pub fn pushforward_to_x(c: &CohClass) -> Result<CohClass> {
    if c.space != Space::XY {
        return Err(Error::InvalidInput("pushforward expects a class on X x Y".into()));
    }
    let mut out = CohClass::zero(Space::X);
    for (m, v) in c.terms() {
        if m & Y_MASK == Y_MASK {
            out.add_term(m & X_MASK, v);
        }
    }
    Ok(out)
}

/// Chern character of the transform: `-pushforward_Y(ch(E) ^ ch(Q))` (td = 1 on tori).
pub fn fm_transform_coh(ch_e: &CohClass) -> Result<CohClass> {
    if ch_e.space != Space::X {
        return Err(Error::InvalidInput("transform expects a class on X".into()));
    }
    let prod = ch_e.pullback_to_product()?.wedge(&poincare_class())?;
    Ok(pushforward_to_y(&prod)?.neg())
}

/// Transform from Y back to X with the generators of the Poincaré class swapped.
pub fn fm_transform_coh_dual(ch_f: &CohClass) -> Result<CohClass> {
    if ch_f.space != Space::Y {
        return Err(Error::InvalidInput("dual transform expects a class on Y".into()));
    }
    let prod = ch_f.pullback_to_product()?.wedge(&dual_poincare_class())?;
    Ok(pushforward_to_x(&prod)?.neg())
}

fn to_integer(v: Rational64, what: &str) -> Result<i64> {
    if v.is_integer() {
        Ok(v.to_integer())
    } else {
        Err(Error::InvalidInput(format!("{what} = {v} is not integral")))
    }
}

/// `int ch`, the index of the twisted Dolbeault operator on X (or Y).
pub fn euler_characteristic(ch: &CohClass) -> Result<i64> {
    let off = ch.space.offset()?;
    let top = 0x0Fu8 << off;
    to_integer(ch.coefficient(top), "integral of ch")
}

/// Integer Chern data `(rank, c1, int ch2)` of a class on a four-torus, with
/// `c1` indexed by [`PLANES`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChernNumbers {
    pub rank: i64,
    pub c1: [i64; 6],
    pub ch2: i64,
}

impl ChernNumbers {
    pub fn new(rank: i64, c1: [i64; 6], ch2: i64) -> Self {
        Self { rank, c1, ch2 }
    }

    /// Rank-one data with `c1 = k (e12 - e34)` and `ch2 = -k^2`.
    pub fn constant_flux(k: i64) -> Self {
        Self { rank: 1, c1: [k, 0, 0, 0, 0, -k], ch2: -k * k }
    }

    pub fn from_class(c: &CohClass) -> Result<Self> {
        let off = c.space.offset()?;
        for (m, _) in c.terms() {
            if m.count_ones() % 2 == 1 {
                return Err(Error::InvalidInput(format!("odd-degree term in Chern character {c}")));
            }
        }
        let rank = to_integer(c.coefficient(0), "rank")?;
        let mut c1 = [0i64; 6];
        for (i, &(mu, nu)) in PLANES.iter().enumerate() {
            let mask = (1u8 << (off + mu)) | (1u8 << (off + nu));
            c1[i] = to_integer(c.coefficient(mask), "c1 component")?;
        }
        let ch2 = to_integer(c.coefficient(0x0F << off), "ch2")?;
        Ok(Self { rank, c1, ch2 })
    }

    pub fn to_class(&self, space: Space) -> Result<CohClass> {
        let mut c1 = CohClass::zero(space);
        for (i, &(mu, nu)) in PLANES.iter().enumerate() {
            c1 = c1.add(&CohClass::plane(space, mu, nu, self.c1[i])?)?;
        }
        chern_character(self.rank, &c1, self.ch2)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            rank: self.rank + other.rank,
            c1: std::array::from_fn(|i| self.c1[i] + other.c1[i]),
            ch2: self.ch2 + other.ch2,
        }
    }
}

/// Integer transform of Chern data from X to Y.
pub fn transform_numbers(ch: &ChernNumbers) -> Result<ChernNumbers> {
    ChernNumbers::from_class(&fm_transform_coh(&ch.to_class(Space::X)?)?)
}

/// Integer transform of Chern data from Y back to X.
pub fn transform_numbers_dual(ch: &ChernNumbers) -> Result<ChernNumbers> {
    ChernNumbers::from_class(&fm_transform_coh_dual(&ch.to_class(Space::Y)?)?)
}
