//! Exact arithmetic in ℚ_p at finite digit precision.
//!
//! Group coordinates are carried as [`BigRational`]s (every p-adic number we
//! ever touch is a truncated expansion, hence rational); [`PadicScalar`] is the
//! digit view used for norms, fractional parts and square classes.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Exact p-adic valuation of a nonzero integer.
pub fn vp_int(n: &BigInt, p: u64) -> u64 {
    debug_assert!(!n.is_zero());
    let pb = BigInt::from(p);
    let mut n = n.clone();
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(&pb);
        if !r.is_zero() {
            return v;
        }
        n = q;
        v += 1;
    }
}

/// v_p of a rational; `None` for zero.
pub fn vp(r: &BigRational, p: u64) -> Option<i64> {
    if r.is_zero() {
        return None;
    }
    Some(vp_int(r.numer(), p) as i64 - vp_int(r.denom(), p) as i64)
}

/// p^e as an exact rational (e may be negative).
pub fn p_pow(p: u64, e: i64) -> BigRational {
    let base = BigInt::from(p).pow(e.unsigned_abs() as u32);
    if e >= 0 {
        BigRational::from_integer(base)
    } else {
        BigRational::new(BigInt::one(), base)
    }
}

pub(crate) fn big_pow(p: u64, e: u32) -> BigInt {
    BigInt::from(p).pow(e)
}

/// Residue of r ∈ ℤ_p modulo p^k, in [0, p^k).
pub fn residue(r: &BigRational, p: u64, k: u32) -> Result<BigInt> {
    if let Some(v) = vp(r, p) {
        if v < 0 {
            return Err(Error::domain(format!("{r} is not a p-adic integer")));
        }
    }
    let m = big_pow(p, k);
    let inv = mod_inverse(&r.denom().mod_floor(&m), &m)
        .ok_or_else(|| Error::domain("denominator not invertible mod p^k"))?;
    Ok((r.numer() * inv).mod_floor(&m))
}

/// Residue of r ∈ ℤ_p modulo m = p^k as u64 (m must fit).
pub(crate) fn residue_u64(r: &BigRational, p: u64, k: u32) -> Result<u64> {
    residue(r, p, k)?
        .to_u64()
        .ok_or_else(|| Error::Precision("residue does not fit in u64".into()))
}

pub(crate) fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.extended_gcd(m);
    if !e.gcd.is_one() {
        return None;
    }
    Some(e.x.mod_floor(m))
}

/// p-adic fractional part {r}_p ∈ [0,1) of a rational whose denominator may
/// contain non-p factors (those are units and are inverted p-adically).
pub fn frac_p(r: &BigRational, p: u64) -> BigRational {
    let v = match vp(r, p) {
        None => return BigRational::zero(),
        Some(v) if v >= 0 => return BigRational::zero(),
        Some(v) => v,
    };
    let k = (-v) as u32;
    // r = a / (p^k b) with p ∤ b; {r} = (a b^{-1} mod p^k) / p^k
    let pk = big_pow(p, k);
    let b = r.denom() / &pk;
    let binv = mod_inverse(&b.mod_floor(&pk), &pk).expect("unit part invertible");
    let a = (r.numer() * binv).mod_floor(&pk);
    BigRational::new(a, pk)
}

/// {r}_p as f64 (for phases e^{2πi{·}}).
pub fn frac_p_f64(r: &BigRational, p: u64) -> f64 {
    frac_p(r, p).to_f64().unwrap_or(0.0)
}

pub fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
}

pub(crate) fn check_prime(p: u64) -> Result<()> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(Error::domain(format!("{p} is not prime")))
    }
}

/// An exact power of p, or zero. `p^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PNorm {
    pub p: u64,
    /// `None` encodes the norm of zero.
    pub exponent: Option<i64>,
}

impl PNorm {
    pub fn zero(p: u64) -> Self {
        PNorm { p, exponent: None }
    }
    pub fn pow(p: u64, exponent: i64) -> Self {
        PNorm { p, exponent: Some(exponent) }
    }
    pub fn to_f64(self) -> f64 {
        match self.exponent {
            None => 0.0,
            Some(e) => (self.p as f64).powi(e as i32),
        }
    }
    pub fn to_rational(self) -> BigRational {
        match self.exponent {
            None => BigRational::zero(),
            Some(e) => p_pow(self.p, e),
        }
    }
}

impl PartialOrd for PNorm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.p != other.p {
            return None;
        }
        Some(match (self.exponent, other.exponent) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Less,
            (Some(_), None) => Ordering::Greater,
            (Some(a), Some(b)) => a.cmp(&b),
        })
    }
}

/// A p-adic number p^v · (d_0 + d_1 p + … + d_{N−1} p^{N−1}), d_0 ≠ 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PadicScalar {
    p: u64,
    /// `None` for zero.
    valuation: Option<i64>,
    digits: Vec<u64>,
    precision: u32,
}

impl PadicScalar {
    pub fn zero(p: u64, precision: u32) -> Self {
        PadicScalar { p, valuation: None, digits: vec![0; precision as usize], precision }
    }

    pub fn prime(&self) -> u64 {
        self.p
    }
    pub fn valuation(&self) -> Option<i64> {
        self.valuation
    }
    pub fn unit_digits(&self) -> &[u64] {
        &self.digits
    }
    pub fn precision(&self) -> u32 {
        self.precision
    }
    pub fn is_zero(&self) -> bool {
        self.valuation.is_none()
    }

    /// Digits of the rational r to `precision` significant digits.
    pub fn from_rational(r: &BigRational, p: u64, precision: u32) -> Result<Self> {
        check_prime(p)?;
        if precision == 0 {
            return Err(Error::Precision("precision must be positive".into()));
        }
        let Some(v) = vp(r, p) else {
            return Ok(Self::zero(p, precision));
        };
        let unit = r * p_pow(p, -v);
        let mut n = residue(&unit, p, precision)?;
        let pb = BigInt::from(p);
        let digits = (0..precision)
            .map(|_| {
                let (q, d) = n.div_rem(&pb);
                n = q;
                d.to_u64().expect("digit < p")
            })
            .collect();
        Ok(PadicScalar { p, valuation: Some(v), digits, precision })
    }

    /// The truncated expansion as an exact rational.
    pub fn to_rational(&self) -> BigRational {
        let Some(v) = self.valuation else {
            return BigRational::zero();
        };
        let pb = BigInt::from(self.p);
        let unit = self
            .digits
            .iter()
            .rev()
            .fold(BigInt::zero(), |acc, &d| acc * &pb + BigInt::from(d));
        BigRational::from_integer(unit) * p_pow(self.p, v)
    }

    pub fn norm(&self) -> PNorm {
        PNorm { p: self.p, exponent: self.valuation.map(|v| -v) }
    }

    pub fn fractional_part(&self) -> BigRational {
        frac_p(&self.to_rational(), self.p)
    }

    /// Absolute precision: the value is known modulo p^{abs_precision}.
    fn abs_precision(&self) -> Option<i64> {
        self.valuation.map(|v| v + self.precision as i64)
    }

    fn with_abs_precision(r: BigRational, p: u64, abs: i64, fallback: u32) -> Self {
        match vp(&r, p) {
            Some(v) if v < abs => {
                let n = (abs - v) as u32;
                Self::from_rational(&r, p, n).expect("valid prime")
            }
            _ => Self::zero(p, fallback),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_prime(other)?;
        let p = self.p;
        let n = self.precision.min(other.precision);
        match (self.abs_precision(), other.abs_precision()) {
            (None, _) => Ok(other.clone()),
            (_, None) => Ok(self.clone()),
            (Some(a), Some(b)) => {
                let s = self.to_rational() + other.to_rational();
                Ok(Self::with_abs_precision(s, p, a.min(b), n))
            }
        }
    }

    pub fn neg(&self) -> Self {
        match self.valuation {
            None => self.clone(),
            Some(v) => {
                let r = -self.to_rational();
                let mut out = Self::from_rational(&r, self.p, self.precision).expect("valid");
                out.valuation = Some(v);
                out
            }
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_prime(other)?;
        let n = self.precision.min(other.precision);
        Self::from_rational(&(self.to_rational() * other.to_rational()), self.p, n)
    }

    fn same_prime(&self, other: &Self) -> Result<()> {
        if self.p != other.p {
            return Err(Error::domain(format!("mixed primes {} and {}", self.p, other.p)));
        }
        Ok(())
    }
}

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.valuation {
            None => write!(f, "0 (mod p^{})", self.precision),
            Some(v) => {
                write!(f, "{}^{} · (", self.p, v)?;
                for (i, d) in self.digits.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{d}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Expansion of a/b to N significant digits.
pub fn padic_from_rational(a: i64, b: i64, p: u64, n: u32) -> Result<PadicScalar> {
    if b == 0 {
        return Err(Error::domain("zero denominator"));
    }
    PadicScalar::from_rational(&BigRational::new(a.into(), b.into()), p, n)
}

pub fn norm(x: &PadicScalar) -> PNorm {
    x.norm()
}

pub fn fractional_part(x: &PadicScalar) -> BigRational {
    x.fractional_part()
}

/// The four classes of ℚ_p^× / (ℚ_p^×)² for odd p.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SquareClass {
    One,
    NonResidue,
    P,
    PNonResidue,
}

impl SquareClass {
    /// ε as a rational, given the chosen non-residue u₀.
    pub fn value(self, p: u64) -> BigRational {
        let u0 = BigRational::from_integer(smallest_nonresidue(p).into());
        let pr = BigRational::from_integer(p.into());
        match self {
            SquareClass::One => BigRational::one(),
            SquareClass::NonResidue => u0,
            SquareClass::P => pr,
            SquareClass::PNonResidue => pr * u0,
        }
    }

    /// v_p(ε) ∈ {0, 1}.
    pub fn valuation(self) -> i64 {
        match self {
            SquareClass::One | SquareClass::NonResidue => 0,
            SquareClass::P | SquareClass::PNonResidue => 1,
        }
    }

    pub const ALL: [SquareClass; 4] =
        [SquareClass::One, SquareClass::NonResidue, SquareClass::P, SquareClass::PNonResidue];
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1u64 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = ((r as u128 * b as u128) % m as u128) as u64;
        }
        b = ((b as u128 * b as u128) % m as u128) as u64;
        e >>= 1;
    }
    r
}

pub fn is_qr_mod_p(a: u64, p: u64) -> bool {
    pow_mod(a % p, (p - 1) / 2, p) == 1
}

/// Smallest positive quadratic non-residue modulo an odd prime.
pub fn smallest_nonresidue(p: u64) -> u64 {
    (2..p).find(|&a| !is_qr_mod_p(a, p)).unwrap_or(1)
}

/// Square root of a unit residue a (a QR mod p) in ℤ/p^n, Hensel-lifted from
/// the smaller root mod p.
fn sqrt_unit_mod(a: &BigInt, p: u64, n: u32) -> BigInt {
    let a0 = a.mod_floor(&BigInt::from(p)).to_u64().expect("small");
    let r0 = (1..p).find(|r| r * r % p == a0).expect("quadratic residue");
    let m = big_pow(p, n);
    let two = BigInt::from(2);
    let mut r = BigInt::from(r0);
    let mut k = 1u32;
    while k < n {
        k = (2 * k).min(n);
        let mk = big_pow(p, k);
        let f = (&r * &r - a).mod_floor(&mk);
        let inv = mod_inverse(&(&two * &r).mod_floor(&mk), &mk).expect("2r unit");
        r = (&r - f * inv).mod_floor(&mk);
    }
    r.mod_floor(&m)
}

/// λ = ε·μ² with ε one of the four square-class representatives.
pub fn square_class(lambda: &PadicScalar) -> Result<(SquareClass, PadicScalar)> {
    let p = lambda.p;
    if p == 2 {
        return Err(Error::domain("square classes implemented for odd p only"));
    }
    let Some(v) = lambda.valuation else {
        return Err(Error::domain("zero has no square class"));
    };
    let n = lambda.precision;
    let unit = residue(&(lambda.to_rational() * p_pow(p, -v)), p, n)?;
    let u0 = smallest_nonresidue(p);
    let residue_class = is_qr_mod_p(unit.mod_floor(&BigInt::from(p)).to_u64().expect("small"), p);
    let m = big_pow(p, n);
    let target = if residue_class {
        unit
    } else {
        let inv = mod_inverse(&BigInt::from(u0), &m).expect("unit");
        (unit * inv).mod_floor(&m)
    };
    let root = sqrt_unit_mod(&target, p, n);
    let class = match (v.rem_euclid(2) == 1, residue_class) {
        (false, true) => SquareClass::One,
        (false, false) => SquareClass::NonResidue,
        (true, true) => SquareClass::P,
        (true, false) => SquareClass::PNonResidue,
    };
    let mu_val = v.div_euclid(2);
    let mu = BigRational::from_integer(root) * p_pow(p, mu_val);
    Ok((class, PadicScalar::from_rational(&mu, p, n)?))
}

/// Coset representatives of ∏_k p^{ν_k L_in}ℤ_p inside ∏_k p^{ν_k L_out}ℤ_p,
/// in mixed-radix order with the first coordinate varying fastest.
pub fn enumerate_cosets(
    p: u64,
    weights: &[u32],
    l_out: i64,
    l_in: i64,
) -> Result<Vec<Vec<BigRational>>> {
    if l_out > l_in {
        return Err(Error::domain(format!("L_out = {l_out} > L_in = {l_in}")));
    }
    let depth = (l_in - l_out) as u32;
    let radices: Vec<u64> = weights
        .iter()
        .map(|&w| p.checked_pow(w * depth).ok_or_else(|| Error::Precision("radix overflow".into())))
        .collect::<Result<_>>()?;
    let total = radices
        .iter()
        .try_fold(1u64, |acc, &r| acc.checked_mul(r))
        .filter(|&t| t <= 1 << 26)
        .ok_or_else(|| Error::window("too many cosets to enumerate"))?;
    let scales: Vec<BigRational> = weights.iter().map(|&w| p_pow(p, w as i64 * l_out)).collect();
    Ok((0..total)
        .map(|mut idx| {
            radices
                .iter()
                .zip(&scales)
                .map(|(&r, s)| {
                    let m = idx % r;
                    idx /= r;
                    s * BigRational::from_integer(m.into())
                })
                .collect()
        })
        .collect())
}

/// Parse "a", "-a" or "a/b".
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((a, b)) => {
            let a: BigInt = a.trim().parse().map_err(|_| bad())?;
            let b: BigInt = b.trim().parse().map_err(|_| bad())?;
            if b.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(a, b))
        }
        None => Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    /// Long division oracle: digits of a/b mod p^n by repeated d = a·b^{-1} mod p.
    fn long_division(mut a: i64, b: i64, p: i64, n: usize) -> Vec<u64> {
        let binv = (1..p).find(|x| (x * b).rem_euclid(p) == 1).unwrap();
        (0..n)
            .map(|_| {
                let d = (a * binv).rem_euclid(p);
                a = (a - d * b) / p;
                d as u64
            })
            .collect()
    }

    #[test]
    fn spec_examples() {
        let x = padic_from_rational(1, 1, 3, 4).unwrap();
        assert_eq!((x.valuation(), x.unit_digits()), (Some(0), &[1, 0, 0, 0][..]));
        let x = padic_from_rational(1, 2, 3, 4).unwrap();
        assert_eq!(long_division(1, 2, 3, 4), vec![2, 1, 1, 1]);
        assert_eq!((x.valuation(), x.unit_digits()), (Some(0), &[2, 1, 1, 1][..]));
        let x = padic_from_rational(9, 1, 3, 4).unwrap();
        assert_eq!((x.valuation(), x.unit_digits()), (Some(2), &[1, 0, 0, 0][..]));
        assert!(padic_from_rational(1, 0, 3, 4).is_err());
    }

    #[test]
    fn norms() {
        let n = |a, b| norm(&padic_from_rational(a, b, 3, 6).unwrap()).to_rational();
        assert_eq!(n(3, 1), q(1, 3));
        assert_eq!(n(1, 3), q(3, 1));
        assert_eq!(n(0, 1), q(0, 1));
    }

    #[test]
    fn fractional_parts() {
        let fp = |a, b| fractional_part(&padic_from_rational(a, b, 3, 8).unwrap());
        assert_eq!(fp(7, 2), q(0, 1));
        assert_eq!(fp(1, 3), q(1, 3));
        // 5/9 = 2·3^{-2} + 1·3^{-1}: digit oracle
        let x = padic_from_rational(5, 9, 3, 8).unwrap();
        assert_eq!(&x.unit_digits()[..2], &[2, 1]);
        assert_eq!(fp(5, 9), q(2, 9) + q(1, 3));
        // non-p part of the denominator is a unit: {1/6}_3 = {(1/2)/3} = 2/3
        assert_eq!(frac_p(&q(1, 6), 3), q(2, 3));
    }

    #[test]
    fn square_classes() {
        let (e, mu) = square_class(&padic_from_rational(4, 1, 5, 8).unwrap()).unwrap();
        assert_eq!(e, SquareClass::One);
        // Hensel oracle: μ² ≡ 4 mod 5^8 with μ ≡ 2 mod 5
        assert_eq!(mu.to_rational(), q(2, 1));
        let (e, mu) = square_class(&padic_from_rational(5, 1, 5, 8).unwrap()).unwrap();
        assert_eq!(e, SquareClass::P);
        assert_eq!(mu.norm().exponent, Some(0));
        let (e, mu) = square_class(&padic_from_rational(2, 1, 5, 8).unwrap()).unwrap();
        assert_eq!(smallest_nonresidue(5), 2);
        assert_eq!((e, mu.to_rational()), (SquareClass::NonResidue, q(1, 1)));
        assert!(square_class(&PadicScalar::zero(5, 4)).is_err());
        assert!(square_class(&padic_from_rational(3, 1, 2, 4).unwrap()).is_err());
    }

    #[test]
    fn cosets() {
        let c = enumerate_cosets(3, &[1], 0, 1).unwrap();
        assert_eq!(c, vec![vec![q(0, 1)], vec![q(1, 1)], vec![q(2, 1)]]);
        assert_eq!(enumerate_cosets(3, &[1, 1, 2], 0, 1).unwrap().len(), 81);
        assert_eq!(enumerate_cosets(5, &[1, 1, 2, 3], 0, 1).unwrap().len(), 78125);
        let c = enumerate_cosets(2, &[1], -1, 0).unwrap();
        assert_eq!(c, vec![vec![q(0, 1)], vec![q(1, 2)]]);
        assert!(enumerate_cosets(3, &[1], 1, 0).is_err());
    }

    #[test]
    fn parse_roundtrip() {
        for s in ["0", "-7", "5/9", "-1/27"] {
            assert_eq!(format_rational(&parse_rational(s).unwrap()), s);
        }
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn scalar() -> impl Strategy<Value = (i64, i64)> {
            (-2000i64..2000, 1i64..500)
        }

        proptest! {
            #[test]
            fn norm_is_multiplicative_and_ultrametric(
                (a, b) in scalar(), (c, d) in scalar(), p in prop::sample::select(vec![2u64, 3, 5, 7])
            ) {
                let x = padic_from_rational(a, b, p, 12).unwrap();
                let y = padic_from_rational(c, d, p, 12).unwrap();
                let exact = |a: i64, b: i64| q(a, b);
                let nx = norm(&x);
                let ny = norm(&y);
                let prod = PadicScalar::from_rational(&(exact(a, b) * exact(c, d)), p, 12).unwrap();
                prop_assert_eq!(norm(&prod).to_rational(), nx.to_rational() * ny.to_rational());
                let sum = PadicScalar::from_rational(&(exact(a, b) + exact(c, d)), p, 12).unwrap();
                let ns = norm(&sum);
                let m = if nx > ny { nx } else { ny };
                prop_assert!(ns <= m);
                if nx != ny {
                    prop_assert_eq!(ns, m);
                }
            }

            #[test]
            fn rational_roundtrip((a, b) in scalar(), p in prop::sample::select(vec![3u64, 5, 7])) {
                prop_assume!(b % p as i64 != 0);
                let n = 10u32;
                let x = padic_from_rational(a, b, p, n).unwrap();
                let back = x.to_rational();
                let diff = back - q(a, b);
                if !diff.is_zero() {
                    let v = x.valuation().unwrap();
                    prop_assert!(vp(&diff, p).unwrap() >= v + n as i64);
                }
            }

            #[test]
            fn square_class_reconstructs((a, b) in scalar(), p in prop::sample::select(vec![3u64, 5, 7, 11])) {
                prop_assume!(a != 0);
                let n = 16u32;
                let lam = padic_from_rational(a, b, p, n).unwrap();
                let (eps, mu) = square_class(&lam).unwrap();
                let recon = eps.value(p) * mu.to_rational() * mu.to_rational();
                let diff = recon - lam.to_rational();
                let v = lam.valuation().unwrap();
                if !diff.is_zero() {
                    prop_assert!(vp(&diff, p).unwrap() >= v + n as i64);
                }
                prop_assert_eq!(2 * mu.valuation().unwrap() + eps.valuation(), v);
            }

            #[test]
            fn scalar_arithmetic_matches_rationals((a, b) in scalar(), (c, d) in scalar()) {
                let p = 5;
                let x = padic_from_rational(a, b, p, 10).unwrap();
                let y = padic_from_rational(c, d, p, 10).unwrap();
                let s = x.add(&y).unwrap();
                let direct = PadicScalar::from_rational(&(x.to_rational() + y.to_rational()), p, 10).unwrap();
                prop_assert_eq!(s.valuation(), if s.is_zero() { None } else { direct.valuation() });
                let m = x.mul(&y).unwrap();
                prop_assert_eq!(m.norm().exponent, match (x.valuation(), y.valuation()) {
                    (Some(u), Some(w)) => Some(-(u + w)),
                    _ => None,
                });
                let z = x.sub(&x).unwrap();
                prop_assert!(z.is_zero());
            }
        }
    }
}
