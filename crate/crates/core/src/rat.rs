//! Exact rational scalars.
//!
//! `Rat` is an arbitrary-precision rational with a small-fraction fast path:
//! values whose numerator and denominator fit in `i64` are stored inline and
//! manipulated with checked machine arithmetic; anything larger is promoted
//! to `BigInt` pairs. Every value is kept reduced with a positive denominator,
//! so equality is structural.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

#[derive(Clone, PartialEq, Eq, Hash)]
enum Repr {
    /// Reduced fraction, denominator > 0.
    Small(i64, i64),
    /// Reduced fraction, denominator > 0, at least one component outside i64.
    Big(Box<(BigInt, BigInt)>),
}

/// Exact rational number, always in lowest terms with positive denominator.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Rat(Repr);

impl Rat {
    pub fn zero() -> Self {
        Rat(Repr::Small(0, 1))
    }

    pub fn one() -> Self {
        Rat(Repr::Small(1, 1))
    }

    pub fn from_int(n: i64) -> Self {
        Rat(Repr::Small(n, 1))
    }

    /// Build `n/d`. Panics if `d == 0`.
    pub fn new(n: i64, d: i64) -> Self {
        assert!(d != 0, "zero denominator");
        Rat(reduce_small(n, d))
    }

    pub fn from_big(n: BigInt, d: BigInt) -> Self {
        assert!(!d.is_zero(), "zero denominator");
        Rat(reduce_big(n, d))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small(0, _))
    }

    pub fn is_one(&self) -> bool {
        matches!(self.0, Repr::Small(1, 1))
    }

    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small(n, _) => *n < 0,
            Repr::Big(b) => b.0.is_negative(),
        }
    }

    /// Multiplicative inverse. Panics on zero.
    pub fn recip(&self) -> Self {
        match &self.0 {
            Repr::Small(n, d) => {
                assert!(*n != 0, "division by zero");
                Rat(reduce_small(*d, *n))
            }
            Repr::Big(b) => Rat(reduce_big(b.1.clone(), b.0.clone())),
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Rat::one();
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    fn to_big(&self) -> (BigInt, BigInt) {
        match &self.0 {
            Repr::Small(n, d) => (BigInt::from(*n), BigInt::from(*d)),
            Repr::Big(b) => (b.0.clone(), b.1.clone()),
        }
    }

    /// Render as `p/q` (or just `p` when `q == 1`).
    pub fn to_frac_string(&self) -> String {
        match &self.0 {
            Repr::Small(n, 1) => format!("{n}"),
            Repr::Small(n, d) => format!("{n}/{d}"),
            Repr::Big(b) => {
                if b.1 == BigInt::from(1) {
                    format!("{}", b.0)
                } else {
                    format!("{}/{}", b.0, b.1)
                }
            }
        }
    }

    /// Parse `p` or `p/q`.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let n: BigInt = p.trim().parse().ok()?;
            let d: BigInt = q.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Rat::from_big(n, d))
        } else {
            let n: BigInt = s.parse().ok()?;
            Some(Rat::from_big(n, BigInt::from(1)))
        }
    }
}

fn reduce_small(n: i64, d: i64) -> Repr {
    if n == 0 {
        return Repr::Small(0, 1);
    }
    // i64::MIN has no absolute value in i64; route through BigInt.
    if n == i64::MIN || d == i64::MIN {
        return reduce_big(BigInt::from(n), BigInt::from(d));
    }
    let g = n.abs().gcd(&d.abs());
    let (mut n, mut d) = (n / g, d / g);
    if d < 0 {
        n = -n;
        d = -d;
    }
    Repr::Small(n, d)
}

fn reduce_big(n: BigInt, d: BigInt) -> Repr {
    if n.is_zero() {
        return Repr::Small(0, 1);
    }
    let g = n.gcd(&d);
    let (mut n, mut d) = (n / &g, d / &g);
    if d.is_negative() {
        n = -n;
        d = -d;
    }
    demote(n, d)
}

fn demote(n: BigInt, d: BigInt) -> Repr {
    match (n.to_i64(), d.to_i64()) {
        (Some(ns), Some(ds)) => Repr::Small(ns, ds),
        _ => Repr::Big(Box::new((n, d))),
    }
}

fn add_impl(a: &Rat, b: &Rat) -> Rat {
    if let (Repr::Small(an, ad), Repr::Small(bn, bd)) = (&a.0, &b.0) {
        // a/b + c/d = (ad + cb)/(bd), all checked.
        if let (Some(x), Some(y), Some(den)) = (
            an.checked_mul(*bd),
            bn.checked_mul(*ad),
            ad.checked_mul(*bd),
        ) {
            if let Some(num) = x.checked_add(y) {
                return Rat(reduce_small(num, den));
            }
        }
    }
    let (an, ad) = a.to_big();
    let (bn, bd) = b.to_big();
    Rat(reduce_big(&an * &bd + &bn * &ad, ad * bd))
}

fn mul_impl(a: &Rat, b: &Rat) -> Rat {
    if a.is_zero() || b.is_zero() {
        return Rat::zero();
    }
    if let (Repr::Small(an, ad), Repr::Small(bn, bd)) = (&a.0, &b.0) {
        // Cross-reduce before multiplying to keep factors small.
        let g1 = an.abs().gcd(&bd.abs());
        let g2 = bn.abs().gcd(&ad.abs());
        let (an, bd) = (an / g1, bd / g1);
        let (bn, ad) = (bn / g2, ad / g2);
        if let (Some(num), Some(den)) = (an.checked_mul(bn), ad.checked_mul(bd)) {
            return Rat(reduce_small(num, den));
        }
    }
    let (an, ad) = a.to_big();
    let (bn, bd) = b.to_big();
    Rat(reduce_big(an * bn, ad * bd))
}

impl Add for &Rat {
    type Output = Rat;
    fn add(self, rhs: &Rat) -> Rat {
        add_impl(self, rhs)
    }
}

impl Sub for &Rat {
    type Output = Rat;
    fn sub(self, rhs: &Rat) -> Rat {
        add_impl(self, &(-rhs))
    }
}

impl Mul for &Rat {
    type Output = Rat;
    fn mul(self, rhs: &Rat) -> Rat {
        mul_impl(self, rhs)
    }
}

impl Div for &Rat {
    type Output = Rat;
    fn div(self, rhs: &Rat) -> Rat {
        mul_impl(self, &rhs.recip())
    }
}

impl Neg for &Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        match &self.0 {
            Repr::Small(n, d) => {
                if *n == i64::MIN {
                    Rat(reduce_big(-BigInt::from(*n), BigInt::from(*d)))
                } else {
                    Rat(Repr::Small(-n, *d))
                }
            }
            Repr::Big(b) => Rat(demote(-b.0.clone(), b.1.clone())),
        }
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        -&self
    }
}

impl AddAssign<&Rat> for Rat {
    fn add_assign(&mut self, rhs: &Rat) {
        *self = add_impl(self, rhs);
    }
}

impl SubAssign<&Rat> for Rat {
    fn sub_assign(&mut self, rhs: &Rat) {
        *self = add_impl(self, &(-rhs));
    }
}

impl MulAssign<&Rat> for Rat {
    fn mul_assign(&mut self, rhs: &Rat) {
        *self = mul_impl(self, rhs);
    }
}

impl PartialOrd for Rat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rat {
    fn cmp(&self, other: &Self) -> Ordering {
        let d = self - other;
        if d.is_zero() {
            Ordering::Equal
        } else if d.is_negative() {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_frac_string())
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_frac_string())
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Self {
        Rat::from_int(n)
    }
}

impl serde::Serialize for Rat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_frac_string())
    }
}

impl<'de> serde::Deserialize<'de> for Rat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Rat::parse(&s).ok_or_else(|| serde::de::Error::custom("invalid rational"))
    }
}

/// `n!` as a `Rat`.
pub fn factorial(n: u32) -> Rat {
    let mut acc = BigInt::from(1);
    for k in 2..=n as u64 {
        acc *= k;
    }
    Rat::from_big(acc, BigInt::from(1))
}

/// Binomial coefficient as a `Rat`.
pub fn binomial(n: i64, k: u32) -> Rat {
    let mut acc = Rat::one();
    for j in 0..k as i64 {
        acc = &acc * &Rat::new(n - j, j + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_and_sign() {
        assert_eq!(Rat::new(2, 4), Rat::new(1, 2));
        assert_eq!(Rat::new(1, -2), Rat::new(-1, 2));
        assert_eq!(Rat::new(-3, -6), Rat::new(1, 2));
        assert_eq!(Rat::new(0, 5), Rat::zero());
    }

    #[test]
    fn field_ops() {
        let a = Rat::new(1, 2);
        let b = Rat::new(1, 3);
        assert_eq!(&a + &b, Rat::new(5, 6));
        assert_eq!(&a - &b, Rat::new(1, 6));
        assert_eq!(&a * &b, Rat::new(1, 6));
        assert_eq!(&a / &b, Rat::new(3, 2));
        assert_eq!(-&a, Rat::new(-1, 2));
    }

    #[test]
    fn overflow_promotes() {
        let big = Rat::from_int(i64::MAX);
        let sq = &big * &big;
        let back = &sq / &big;
        assert_eq!(back, big);
        let s = &big + &big;
        assert_eq!(&s - &big, big);
    }

    #[test]
    fn parse_roundtrip() {
        for s in ["3", "-7/2", "0", "123456789012345678901234567890/7"] {
            let r = Rat::parse(s).unwrap();
            assert_eq!(Rat::parse(&r.to_frac_string()).unwrap(), r);
        }
        assert!(Rat::parse("1/0").is_none());
    }

    #[test]
    fn factorial_binomial() {
        assert_eq!(factorial(5), Rat::from_int(120));
        assert_eq!(binomial(5, 2), Rat::from_int(10));
        assert_eq!(binomial(-1, 3), Rat::from_int(-1));
    }

    #[test]
    fn ordering() {
        assert!(Rat::new(1, 3) < Rat::new(1, 2));
        assert!(Rat::new(-1, 2) < Rat::zero());
    }
}
