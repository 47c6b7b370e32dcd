//! Graded p-adic groups: ℚ_p^d, the Heisenberg groups ℍ_d and the Engel group 𝔼_4.
//!
//! Coordinate order: ℚ_p^d is (x_1..x_d); ℍ_d is (x_1..x_d, y_1..y_d, z);
//! 𝔼_4 is (x, y1, y2, y3). The law is written once over [`CoordRing`] and
//! instantiated for exact rationals and for residues mod p^N.

use num_rational::BigRational;
use num_traits::{One, Zero};
use std::fmt;

use crate::error::{Error, Result};
use crate::padic::{self, enumerate_cosets, p_pow, vp, PNorm, PadicScalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKind {
    Abelian { d: usize },
    Heisenberg { d: usize },
    Engel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupDescriptor {
    kind: GroupKind,
    p: u64,
}

impl GroupDescriptor {
    pub fn new(kind: GroupKind, p: u64) -> Result<Self> {
        padic::check_prime(p)?;
        match kind {
            GroupKind::Abelian { d } | GroupKind::Heisenberg { d } if d == 0 => {
                Err(Error::domain("dimension must be positive"))
            }
            // ½ appears in the law
            GroupKind::Heisenberg { .. } | GroupKind::Engel if p == 2 => {
                Err(Error::domain("ℍ_d and 𝔼_4 need an odd prime"))
            }
            _ => Ok(GroupDescriptor { kind, p }),
        }
    }

    pub fn abelian(p: u64, d: usize) -> Result<Self> {
        Self::new(GroupKind::Abelian { d }, p)
    }
    pub fn heisenberg(p: u64, d: usize) -> Result<Self> {
        Self::new(GroupKind::Heisenberg { d }, p)
    }
    pub fn engel(p: u64) -> Result<Self> {
        Self::new(GroupKind::Engel, p)
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }
    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            GroupKind::Abelian { d } => d,
            GroupKind::Heisenberg { d } => 2 * d + 1,
            GroupKind::Engel => 4,
        }
    }

    /// Dilation weights ν_k.
    pub fn weights(&self) -> Vec<u32> {
        match self.kind {
            GroupKind::Abelian { d } => vec![1; d],
            GroupKind::Heisenberg { d } => {
                let mut w = vec![1; 2 * d];
                w.push(2);
                w
            }
            GroupKind::Engel => vec![1, 1, 2, 3],
        }
    }

    pub fn max_weight(&self) -> u32 {
        self.weights().into_iter().max().unwrap_or(1)
    }

    /// Homogeneous dimension Q = Σ ν_k.
    pub fn homogeneous_dim(&self) -> u32 {
        self.weights().iter().sum()
    }

    /// ϰ = |G_0 / G_1| = p^Q.
    pub fn kappa(&self) -> f64 {
        (self.p as f64).powi(self.homogeneous_dim() as i32)
    }

    /// Whether e_k spans a central one-parameter subgroup.
    pub fn is_central(&self, k: usize) -> bool {
        match self.kind {
            GroupKind::Abelian { .. } => true,
            GroupKind::Heisenberg { d } => k == 2 * d,
            GroupKind::Engel => k == 3,
        }
    }

    pub fn is_abelian(&self) -> bool {
        matches!(self.kind, GroupKind::Abelian { .. })
    }

    /// Short name used in CSV headers: `qp2`, `heisenberg1`, `engel`.
    pub fn tag(&self) -> String {
        match self.kind {
            GroupKind::Abelian { d } => format!("qp{d}"),
            GroupKind::Heisenberg { d } => format!("heisenberg{d}"),
            GroupKind::Engel => "engel".into(),
        }
    }

    pub fn from_tag(tag: &str, p: u64) -> Result<Self> {
        let num = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse(format!("bad group tag {tag:?}")))
        };
        if let Some(d) = tag.strip_prefix("qp") {
            Self::abelian(p, num(d)?)
        } else if let Some(d) = tag.strip_prefix("heisenberg") {
            Self::heisenberg(p, num(d)?)
        } else if tag == "engel" {
            Self::engel(p)
        } else {
            Err(Error::Parse(format!("bad group tag {tag:?}")))
        }
    }

    /// Haar measure of the shell G_n ∖ G_{n+1}: p^{−Qn}(1 − p^{−Q}).
    pub fn shell_measure(&self, n: i64) -> BigRational {
        let q = self.homogeneous_dim() as i64;
        p_pow(self.p, -q * n) * (BigRational::one() - p_pow(self.p, -q))
    }

    /// |G_n| = p^{−Qn}.
    pub fn subgroup_measure(&self, n: i64) -> BigRational {
        p_pow(self.p, -(self.homogeneous_dim() as i64) * n)
    }
}

impl fmt::Display for GroupDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            GroupKind::Abelian { d } => write!(f, "Q_{}^{}", self.p, d),
            GroupKind::Heisenberg { d } => write!(f, "H_{}(Q_{})", d, self.p),
            GroupKind::Engel => write!(f, "E_4(Q_{})", self.p),
        }
    }
}

/// The ring operations the group law needs.
pub trait CoordRing {
    type E: Clone;
    fn zero(&self) -> Self::E;
    fn add(&self, a: &Self::E, b: &Self::E) -> Self::E;
    fn sub(&self, a: &Self::E, b: &Self::E) -> Self::E;
    fn mul(&self, a: &Self::E, b: &Self::E) -> Self::E;
    fn half(&self, a: &Self::E) -> Self::E;
}

pub struct Rationals;

impl CoordRing for Rationals {
    type E = BigRational;
    fn zero(&self) -> BigRational {
        BigRational::zero()
    }
    fn add(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a + b
    }
    fn sub(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a - b
    }
    fn mul(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a * b
    }
    fn half(&self, a: &BigRational) -> BigRational {
        a / BigRational::from_integer(2.into())
    }
}

/// ℤ / m with m = p^N, p odd when `half` is used.
#[derive(Debug, Clone, Copy)]
pub struct ModRing {
    pub m: u64,
    half_inv: u64,
}

impl ModRing {
    pub fn new(m: u64) -> Self {
        // (m+1)/2 is 2^{-1} for odd m; unused for even m
        ModRing { m, half_inv: (m / 2 + 1) % m.max(1) }
    }
    #[inline]
    pub fn reduce(&self, a: u64) -> u64 {
        a % self.m
    }
}

impl CoordRing for ModRing {
    type E = u64;
    #[inline]
    fn zero(&self) -> u64 {
        0
    }
    #[inline]
    fn add(&self, a: &u64, b: &u64) -> u64 {
        ((*a as u128 + *b as u128) % self.m as u128) as u64
    }
    #[inline]
    fn sub(&self, a: &u64, b: &u64) -> u64 {
        ((*a as u128 + self.m as u128 - (*b % self.m) as u128) % self.m as u128) as u64
    }
    #[inline]
    fn mul(&self, a: &u64, b: &u64) -> u64 {
        ((*a as u128 * *b as u128) % self.m as u128) as u64
    }
    #[inline]
    fn half(&self, a: &u64) -> u64 {
        self.mul(a, &self.half_inv)
    }
}

/// a·b in coordinates.
pub fn law<R: CoordRing>(kind: GroupKind, r: &R, a: &[R::E], b: &[R::E]) -> Vec<R::E> {
    match kind {
        GroupKind::Abelian { .. } => a.iter().zip(b).map(|(s, t)| r.add(s, t)).collect(),
        GroupKind::Heisenberg { d } => {
            let mut out: Vec<R::E> = a.iter().zip(b).map(|(s, t)| r.add(s, t)).collect();
            // z + z' + ½(x·y' − y·x')
            let mut sym = r.zero();
            for j in 0..d {
                sym = r.add(&sym, &r.mul(&a[j], &b[d + j]));
                sym = r.sub(&sym, &r.mul(&a[d + j], &b[j]));
            }
            out[2 * d] = r.add(&out[2 * d], &r.half(&sym));
            out
        }
        GroupKind::Engel => {
            let (x, y1, y2, y3) = (&a[0], &a[1], &a[2], &a[3]);
            let (xp, y1p, y2p, y3p) = (&b[0], &b[1], &b[2], &b[3]);
            let xy1p = r.mul(x, y1p);
            let x2y1p = r.half(&r.mul(x, &xy1p));
            vec![
                r.add(x, xp),
                r.add(y1, y1p),
                r.sub(&r.add(y2, y2p), &xy1p),
                r.sub(&r.add(&r.add(y3, y3p), &x2y1p), &r.mul(x, y2p)),
            ]
        }
    }
}

/// a⁻¹ in coordinates. Negation for ℚ_p^d and ℍ_d; for 𝔼_4 the law is not
/// in exponential coordinates and the inverse picks up correction terms.
pub fn inverse<R: CoordRing>(kind: GroupKind, r: &R, a: &[R::E]) -> Vec<R::E> {
    let z = r.zero();
    let neg = |v: &R::E| r.sub(&z, v);
    match kind {
        GroupKind::Abelian { .. } | GroupKind::Heisenberg { .. } => a.iter().map(neg).collect(),
        GroupKind::Engel => {
            let (x, y1, y2, y3) = (&a[0], &a[1], &a[2], &a[3]);
            let xy1 = r.mul(x, y1);
            vec![
                neg(x),
                neg(y1),
                r.sub(&neg(y2), &xy1),
                r.sub(&r.sub(&neg(y3), &r.mul(x, y2)), &r.half(&r.mul(x, &xy1))),
            ]
        }
    }
}

/// Level of a coordinate tuple: the largest n with the element in G_n
/// (`None` for the identity).
pub fn level_of(p: u64, weights: &[u32], coords: &[BigRational]) -> Option<i64> {
    coords
        .iter()
        .zip(weights)
        .filter_map(|(c, &w)| vp(c, p).map(|v| v.div_euclid(w as i64)))
        .min()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupElement {
    desc: GroupDescriptor,
    coords: Vec<BigRational>,
}

impl GroupElement {
    pub fn new(desc: GroupDescriptor, coords: Vec<BigRational>) -> Result<Self> {
        if coords.len() != desc.dim() {
            return Err(Error::DimensionMismatch { expected: desc.dim(), got: coords.len() });
        }
        Ok(GroupElement { desc, coords })
    }

    pub fn from_ints(desc: GroupDescriptor, coords: &[i64]) -> Result<Self> {
        Self::new(desc, coords.iter().map(|&c| BigRational::from_integer(c.into())).collect())
    }

    pub fn identity(desc: GroupDescriptor) -> Self {
        GroupElement { desc, coords: vec![BigRational::zero(); desc.dim()] }
    }

    /// exp(t e_k): t in coordinate k, zero elsewhere.
    pub fn basis(desc: GroupDescriptor, k: usize, t: BigRational) -> Result<Self> {
        if k >= desc.dim() {
            return Err(Error::DimensionMismatch { expected: desc.dim(), got: k + 1 });
        }
        let mut coords = vec![BigRational::zero(); desc.dim()];
        coords[k] = t;
        Ok(GroupElement { desc, coords })
    }

    pub fn descriptor(&self) -> GroupDescriptor {
        self.desc
    }
    pub fn coords(&self) -> &[BigRational] {
        &self.coords
    }
    pub fn is_identity(&self) -> bool {
        self.coords.iter().all(Zero::is_zero)
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.desc != other.desc {
            return Err(Error::domain(format!("elements of {} and {}", self.desc, other.desc)));
        }
        Ok(())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(GroupElement {
            desc: self.desc,
            coords: law(self.desc.kind, &Rationals, &self.coords, &other.coords),
        })
    }

    pub fn inverse(&self) -> Self {
        GroupElement { desc: self.desc, coords: inverse(self.desc.kind, &Rationals, &self.coords) }
    }

    /// D_γ: coordinate k scaled by γ^{ν_k}.
    pub fn dilate(&self, gamma: &BigRational) -> Result<Self> {
        if gamma.is_zero() {
            return Err(Error::domain("dilation by zero"));
        }
        let coords = self
            .coords
            .iter()
            .zip(self.desc.weights())
            .map(|(c, w)| c * num_traits::pow(gamma.clone(), w as usize))
            .collect();
        Ok(GroupElement { desc: self.desc, coords })
    }

    pub fn dilate_padic(&self, gamma: &PadicScalar) -> Result<Self> {
        if gamma.prime() != self.desc.p {
            return Err(Error::domain("dilation scalar over a different prime"));
        }
        self.dilate(&gamma.to_rational())
    }

    /// Largest n with the element in G_n; `None` for the identity.
    pub fn level(&self) -> Option<i64> {
        level_of(self.desc.p, &self.desc.weights(), &self.coords)
    }

    /// Homogeneous quasi-norm |x|_G = p^{−level}.
    pub fn quasi_norm(&self) -> PNorm {
        PNorm { p: self.desc.p, exponent: self.level().map(|n| -n) }
    }

    /// Vilenkin norm |x|_𝒢 = |x|_G^Q.
    pub fn vilenkin_norm(&self) -> PNorm {
        let q = self.desc.homogeneous_dim() as i64;
        PNorm { p: self.desc.p, exponent: self.level().map(|n| -n * q) }
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", padic::format_rational(c))?;
        }
        write!(f, ")")
    }
}

pub fn group_law(a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
    a.mul(b)
}

pub fn dilate(gamma: &PadicScalar, a: &GroupElement) -> Result<GroupElement> {
    a.dilate_padic(gamma)
}

pub fn quasi_norm(a: &GroupElement) -> PNorm {
    a.quasi_norm()
}

pub fn vilenkin_norm(a: &GroupElement) -> PNorm {
    a.vilenkin_norm()
}

pub fn shell_measure(desc: &GroupDescriptor, n: i64) -> BigRational {
    desc.shell_measure(n)
}

/// Left cosets of G_{L_in} inside G_{L_out}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CosetWindow {
    desc: GroupDescriptor,
    l_out: i64,
    l_in: i64,
}

impl CosetWindow {
    /// Depth (L_in − L_out) is capped so a window never holds more than 2^26 cells.
    pub fn new(desc: GroupDescriptor, l_out: i64, l_in: i64) -> Result<Self> {
        if l_out > l_in {
            return Err(Error::window(format!("L_out = {l_out} > L_in = {l_in}")));
        }
        let w = CosetWindow { desc, l_out, l_in };
        let q = desc.homogeneous_dim() as f64;
        if (l_in - l_out) as f64 * q * (desc.p as f64).log2() > 26.0 {
            return Err(Error::window(format!("window {w} has too many cells")));
        }
        Ok(w)
    }

    pub fn descriptor(&self) -> GroupDescriptor {
        self.desc
    }
    pub fn l_out(&self) -> i64 {
        self.l_out
    }
    pub fn l_in(&self) -> i64 {
        self.l_in
    }
    pub fn depth(&self) -> u32 {
        (self.l_in - self.l_out) as u32
    }

    pub fn cell_count(&self) -> usize {
        (self.desc.p as usize).pow(self.desc.homogeneous_dim() * self.depth())
    }

    /// |G_{L_in}|.
    pub fn cell_measure(&self) -> BigRational {
        self.desc.subgroup_measure(self.l_in)
    }

    /// |G_{L_out}|.
    pub fn total_measure(&self) -> BigRational {
        self.desc.subgroup_measure(self.l_out)
    }

    /// Canonical representatives, index-aligned with [`crate::cells::CellGroup`].
    pub fn reps(&self) -> Result<Vec<GroupElement>> {
        let coords = enumerate_cosets(self.desc.p, &self.desc.weights(), self.l_out, self.l_in)?;
        Ok(coords.into_iter().map(|c| GroupElement { desc: self.desc, coords: c }).collect())
    }

    pub fn with_levels(&self, l_out: i64, l_in: i64) -> Result<Self> {
        Self::new(self.desc, l_out, l_in)
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        g.descriptor() == self.desc && g.level().is_none_or(|n| n >= self.l_out)
    }
}

impl fmt::Display for CosetWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [G_{} / G_{}]", self.desc, self.l_out, self.l_in)
    }
}
