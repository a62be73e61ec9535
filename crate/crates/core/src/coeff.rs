//! Truncated multi-parameter series scalars.
//!
//! A `Coeff` is an element of Q[[h, q0, k1, k2, k3]] truncated at the orders
//! in a [`Trunc`] context: `h` is the deformation parameter, `q0` the
//! elliptic nome, and the `k` slots are central-charge markers (one slot per
//! tensor leg, so coproduct legs can carry independent central values).
//! Zero coefficients are never stored.
//!
//! Each value also carries *validity* orders: the `h`-orders (resp.
//! `q0`-orders) up to which its coefficients are exact. Fresh values are
//! valid to the truncation orders; dividing by `h` loses one `h`-order.
//! Binary operations intersect validities, and equality comparisons are made
//! on the common valid region.

use crate::rat::Rat;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Global truncation orders for a verification run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trunc {
    /// Maximum stored power of the deformation parameter h.
    pub n_h: u32,
    /// Maximum stored power of the nome q0.
    pub n_q: u32,
    /// Maximum stored *total* degree in the central markers k.
    pub n_k: u32,
}

impl Trunc {
    pub fn new(n_h: u32, n_q: u32, n_k: u32) -> Self {
        Trunc { n_h, n_q, n_k }
    }
}

/// Exponent of a single monomial `h^h q0^q k1^k[0] k2^k[1] k3^k[2]`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Expo {
    pub h: u32,
    pub q: u32,
    pub k: [u32; 3],
}

impl Expo {
    pub const ZERO: Expo = Expo { h: 0, q: 0, k: [0, 0, 0] };

    pub fn h(h: u32) -> Self {
        Expo { h, ..Expo::ZERO }
    }

    pub fn hq(h: u32, q: u32) -> Self {
        Expo { h, q, k: [0, 0, 0] }
    }

    pub fn k_total(&self) -> u32 {
        self.k[0] + self.k[1] + self.k[2]
    }

    fn try_add(&self, o: &Expo, t: &Trunc) -> Option<Expo> {
        let e = Expo {
            h: self.h + o.h,
            q: self.q + o.q,
            k: [self.k[0] + o.k[0], self.k[1] + o.k[1], self.k[2] + o.k[2]],
        };
        if e.h <= t.n_h && e.q <= t.n_q && e.k_total() <= t.n_k {
            Some(e)
        } else {
            None
        }
    }

    /// Total grading used for exp/log termination: every parameter counts.
    pub fn grade(&self) -> u32 {
        self.h + self.q + self.k_total()
    }
}

/// Truncated series scalar.
#[derive(Clone, PartialEq, Eq)]
pub struct Coeff {
    terms: BTreeMap<Expo, Rat>,
    pub valid_h: u32,
    pub valid_q: u32,
}

impl Coeff {
    pub fn zero(t: &Trunc) -> Self {
        Coeff { terms: BTreeMap::new(), valid_h: t.n_h, valid_q: t.n_q }
    }

    pub fn one(t: &Trunc) -> Self {
        Coeff::from_rat(Rat::one(), t)
    }

    pub fn from_rat(r: Rat, t: &Trunc) -> Self {
        let mut c = Coeff::zero(t);
        if !r.is_zero() {
            c.terms.insert(Expo::ZERO, r);
        }
        c
    }

    pub fn from_int(n: i64, t: &Trunc) -> Self {
        Coeff::from_rat(Rat::from_int(n), t)
    }

    /// Single monomial `r * h^h q0^q`.
    pub fn monomial(r: Rat, e: Expo, t: &Trunc) -> Self {
        let mut c = Coeff::zero(t);
        if !r.is_zero() && e.h <= t.n_h && e.q <= t.n_q && e.k_total() <= t.n_k {
            c.terms.insert(e, r);
        }
        c
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, e: &Expo) -> Rat {
        self.terms.get(e).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn constant_term(&self) -> Rat {
        self.coeff(&Expo::ZERO)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Expo, &Rat)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Lowest h-power present, or None if zero.
    pub fn h_order(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.h).min()
    }

    fn set(&mut self, e: Expo, r: Rat) {
        if r.is_zero() {
            self.terms.remove(&e);
        } else {
            self.terms.insert(e, r);
        }
    }

    pub fn add_term(&mut self, e: Expo, r: &Rat, t: &Trunc) {
        if e.h > t.n_h || e.q > t.n_q || e.k_total() > t.n_k {
            return;
        }
        let cur = self.coeff(&e);
        self.set(e, &cur + r);
    }

    pub fn add(&self, o: &Coeff, t: &Trunc) -> Coeff {
        let mut r = self.clone();
        r.valid_h = self.valid_h.min(o.valid_h);
        r.valid_q = self.valid_q.min(o.valid_q);
        for (e, v) in &o.terms {
            r.add_term(*e, v, t);
        }
        r
    }

    pub fn sub(&self, o: &Coeff, t: &Trunc) -> Coeff {
        self.add(&o.neg(), t)
    }

    pub fn neg(&self) -> Coeff {
        let mut r = self.clone();
        for v in r.terms.values_mut() {
            *v = -&*v;
        }
        r
    }

    pub fn scale(&self, s: &Rat) -> Coeff {
        if s.is_zero() {
            return Coeff { terms: BTreeMap::new(), valid_h: self.valid_h, valid_q: self.valid_q };
        }
        let mut r = self.clone();
        for v in r.terms.values_mut() {
            *v = &*v * s;
        }
        r
    }

    pub fn mul(&self, o: &Coeff, t: &Trunc) -> Coeff {
        let mut r = Coeff::zero(t);
        r.valid_h = self.valid_h.min(o.valid_h);
        r.valid_q = self.valid_q.min(o.valid_q);
        if self.is_zero() || o.is_zero() {
            return r;
        }
        for (ea, va) in &self.terms {
            for (eb, vb) in &o.terms {
                if let Some(e) = ea.try_add(eb, t) {
                    let p = va * vb;
                    if !p.is_zero() {
                        let cur = r.coeff(&e);
                        r.set(e, &cur + &p);
                    }
                }
            }
        }
        r
    }

    /// Multiply by `h^n`. Validity grows by `n` (low orders become exactly known).
    pub fn mul_hbar_pow(&self, n: u32, t: &Trunc) -> Coeff {
        let mut r = Coeff::zero(t);
        r.valid_h = (self.valid_h + n).min(t.n_h);
        r.valid_q = self.valid_q;
        for (e, v) in &self.terms {
            let mut e2 = *e;
            e2.h += n;
            if e2.h <= t.n_h {
                r.terms.insert(e2, v.clone());
            }
        }
        r
    }

    /// Exact division by `h`. Fails if some term has h-power 0.
    pub fn div_hbar(&self, _t: &Trunc) -> Result<Coeff, String> {
        let mut r = Coeff {
            terms: BTreeMap::new(),
            valid_h: self.valid_h.saturating_sub(1),
            valid_q: self.valid_q,
        };
        for (e, v) in &self.terms {
            if e.h == 0 {
                return Err(format!("not divisible by h: term {:?} -> {}", e, v));
            }
            let mut e2 = *e;
            e2.h -= 1;
            r.terms.insert(e2, v.clone());
        }
        Ok(r)
    }

    /// Multiply by `q0^n`.
    pub fn mul_q_pow(&self, n: u32, t: &Trunc) -> Coeff {
        let mut r = Coeff::zero(t);
        r.valid_h = self.valid_h;
        r.valid_q = (self.valid_q + n).min(t.n_q);
        for (e, v) in &self.terms {
            let mut e2 = *e;
            e2.q += n;
            if e2.q <= t.n_q {
                r.terms.insert(e2, v.clone());
            }
        }
        r
    }

    /// Multiply by the central marker in the given tensor slot.
    pub fn mul_kappa(&self, slot: usize, n: u32, t: &Trunc) -> Coeff {
        let mut r = Coeff::zero(t);
        r.valid_h = self.valid_h;
        r.valid_q = self.valid_q;
        for (e, v) in &self.terms {
            let mut e2 = *e;
            e2.k[slot] += n;
            if e2.k_total() <= t.n_k {
                r.terms.insert(e2, v.clone());
            }
        }
        r
    }

    /// h -> -h (negates odd h-power terms).
    pub fn substitute_hbar_negate(&self) -> Coeff {
        let mut r = self.clone();
        for (e, v) in r.terms.iter_mut() {
            if e.h % 2 == 1 {
                *v = -&*v;
            }
        }
        r
    }

    /// Drop all terms with nonzero central markers (specialize K = 0).
    pub fn kappa_zero(&self) -> Coeff {
        let mut r = self.clone();
        r.terms.retain(|e, _| e.k_total() == 0);
        r
    }

    /// Move the k-slot contents: slot 0 exponents are relocated to `slot`.
    /// Used when embedding a single-leg value into a tensor leg.
    pub fn kappa_to_slot(&self, slot: usize) -> Coeff {
        if slot == 0 {
            return self.clone();
        }
        let mut r = Coeff { terms: BTreeMap::new(), valid_h: self.valid_h, valid_q: self.valid_q };
        for (e, v) in &self.terms {
            let mut e2 = *e;
            let n = e2.k[0];
            e2.k[0] = 0;
            e2.k[slot] += n;
            r.terms.insert(e2, v.clone());
        }
        r
    }

    /// Merge all k-slots into slot 0 (multiplication map on central markers).
    pub fn kappa_merge(&self, t: &Trunc) -> Coeff {
        let mut r = Coeff::zero(t);
        r.valid_h = self.valid_h;
        r.valid_q = self.valid_q;
        for (e, v) in &self.terms {
            let e2 = Expo { h: e.h, q: e.q, k: [e.k_total(), 0, 0] };
            r.add_term(e2, v, t);
        }
        r
    }

    /// exp of a series with strictly positive grading in every term.
    pub fn exp(&self, t: &Trunc) -> Result<Coeff, String> {
        if self.terms.keys().any(|e| e.grade() == 0) {
            return Err("exp argument has a constant term".into());
        }
        let max_grade = (t.n_h + t.n_q + t.n_k) as usize;
        let mut acc = Coeff::one(t);
        acc.valid_h = self.valid_h;
        acc.valid_q = self.valid_q;
        let mut pow = Coeff::one(t);
        let mut fact = Rat::one();
        for k in 1..=max_grade {
            pow = pow.mul(self, t);
            if pow.is_zero() {
                break;
            }
            fact = &fact * &Rat::from_int(k as i64);
            acc = acc.add(&pow.scale(&fact.recip()), t);
        }
        Ok(acc)
    }

    /// log of a series with constant term exactly 1.
    pub fn log(&self, t: &Trunc) -> Result<Coeff, String> {
        if !self.constant_term().is_one() {
            return Err("log argument must have constant term 1".into());
        }
        let x = self.sub(&Coeff::one(t), t);
        if x.terms.keys().any(|e| e.grade() == 0) {
            return Err("log argument has extra grade-0 terms".into());
        }
        let max_grade = (t.n_h + t.n_q + t.n_k) as usize;
        let mut acc = Coeff::zero(t);
        acc.valid_h = self.valid_h;
        acc.valid_q = self.valid_q;
        let mut pow = Coeff::one(t);
        for k in 1..=max_grade {
            pow = pow.mul(&x, t);
            if pow.is_zero() {
                break;
            }
            let sign = if k % 2 == 1 { Rat::one() } else { -Rat::one() };
            acc = acc.add(&pow.scale(&(&sign / &Rat::from_int(k as i64))), t);
        }
        Ok(acc)
    }

    /// Multiplicative inverse of a series with nonzero constant term.
    pub fn invert(&self, t: &Trunc) -> Result<Coeff, String> {
        let c0 = self.constant_term();
        if c0.is_zero() {
            return Err("inverting a series with zero constant term".into());
        }
        let inv0 = c0.recip();
        // self = c0 (1 + x), inverse = (1/c0) sum (-x)^k
        let x = self.scale(&inv0).sub(&Coeff::one(t), t);
        let max_grade = (t.n_h + t.n_q + t.n_k) as usize;
        let mut acc = Coeff::one(t);
        acc.valid_h = self.valid_h;
        acc.valid_q = self.valid_q;
        let mut pow = Coeff::one(t);
        for _ in 1..=max_grade {
            pow = pow.mul(&x, t).neg();
            if pow.is_zero() {
                break;
            }
            acc = acc.add(&pow, t);
        }
        Ok(acc.scale(&inv0))
    }

    /// Structural equality on the jointly valid region.
    pub fn eq_valid(&self, o: &Coeff) -> bool {
        self.mismatch(o).is_none()
    }

    /// First differing term on the jointly valid region, if any.
    pub fn mismatch(&self, o: &Coeff) -> Option<(Expo, Rat, Rat)> {
        let vh = self.valid_h.min(o.valid_h);
        let vq = self.valid_q.min(o.valid_q);
        let keys: std::collections::BTreeSet<Expo> =
            self.terms.keys().chain(o.terms.keys()).cloned().collect();
        for e in keys {
            if e.h > vh || e.q > vq {
                continue;
            }
            let a = self.coeff(&e);
            let b = o.coeff(&e);
            if a != b {
                return Some((e, a, b));
            }
        }
        None
    }

    /// Restrict validity (used when an operation is only trusted to lower order).
    pub fn restrict_valid_h(mut self, vh: u32) -> Coeff {
        self.valid_h = self.valid_h.min(vh);
        self
    }
}

impl fmt::Debug for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, v) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}", v.to_frac_string())?;
            if e.h > 0 {
                write!(f, "*h^{}", e.h)?;
            }
            if e.q > 0 {
                write!(f, "*q0^{}", e.q)?;
            }
            for (i, kp) in e.k.iter().enumerate() {
                if *kp > 0 {
                    write!(f, "*k{}^{}", i + 1, kp)?;
                }
            }
        }
        Ok(())
    }
}

/// A `Coeff` together with a global power of `h` (possibly negative).
/// Appears as the value type of the Hopf pairing, where `<h+, h->` carries
/// a `2/h` factor.
#[derive(Clone, Debug)]
pub struct HLaurent {
    /// Global h-offset: the represented value is `h^off * body`.
    pub off: i32,
    pub body: Coeff,
}

impl HLaurent {
    pub fn zero(t: &Trunc) -> Self {
        HLaurent { off: 0, body: Coeff::zero(t) }
    }

    pub fn from_coeff(c: Coeff) -> Self {
        HLaurent { off: 0, body: c }
    }

    pub fn is_zero(&self) -> bool {
        self.body.is_zero()
    }

    pub fn mul(&self, o: &HLaurent, t: &Trunc) -> HLaurent {
        HLaurent { off: self.off + o.off, body: self.body.mul(&o.body, t) }
    }

    pub fn scale(&self, s: &Rat) -> HLaurent {
        HLaurent { off: self.off, body: self.body.scale(s) }
    }

    /// Align two values to a common offset (the smaller one) and add.
    pub fn add(&self, o: &HLaurent, t: &Trunc) -> HLaurent {
        let off = self.off.min(o.off);
        let a = self.shift_to(off, t);
        let b = o.shift_to(off, t);
        HLaurent { off, body: a.body.add(&b.body, t) }
    }

    fn shift_to(&self, off: i32, t: &Trunc) -> HLaurent {
        assert!(off <= self.off);
        let n = (self.off - off) as u32;
        HLaurent { off, body: self.body.mul_hbar_pow(n, t) }
    }

    /// Equality as Laurent series in h, on the common valid region.
    pub fn eq_valid(&self, o: &HLaurent, t: &Trunc) -> bool {
        let off = self.off.min(o.off);
        let a = self.shift_to(off, t);
        let b = o.shift_to(off, t);
        a.body.eq_valid(&b.body)
    }

    /// If the offset is negative, check divisibility and normalize to offset 0.
    pub fn to_coeff(&self, t: &Trunc) -> Result<Coeff, String> {
        let mut cur = self.clone();
        while cur.off < 0 {
            cur = HLaurent { off: cur.off + 1, body: cur.body.div_hbar(t)? };
        }
        Ok(cur.body.mul_hbar_pow(cur.off as u32, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> Trunc {
        Trunc::new(10, 3, 2)
    }

    fn hbar(t_: &Trunc) -> Coeff {
        Coeff::monomial(Rat::one(), Expo::h(1), t_)
    }

    #[test]
    fn truncated_product() {
        let t = t();
        // (1+h)(1-h) = 1-h^2
        let a = Coeff::one(&t).add(&hbar(&t), &t);
        let b = Coeff::one(&t).sub(&hbar(&t), &t);
        let p = a.mul(&b, &t);
        let mut expect = Coeff::one(&t);
        expect.add_term(Expo::h(2), &(-Rat::one()), &t);
        assert!(p.eq_valid(&expect));
    }

    #[test]
    fn exp_log_inverse_pair() {
        let t = t();
        let x = hbar(&t).add(&Coeff::monomial(Rat::new(1, 3), Expo::hq(2, 1), &t), &t);
        let e = x.exp(&t).unwrap();
        let l = e.log(&t).unwrap();
        assert!(l.eq_valid(&x));
        // exp(h) * exp(-h) = 1 at full order
        let e1 = hbar(&t).exp(&t).unwrap();
        let e2 = hbar(&t).neg().exp(&t).unwrap();
        assert!(e1.mul(&e2, &t).eq_valid(&Coeff::one(&t)));
    }

    #[test]
    fn invert_unit() {
        let t = t();
        let a = Coeff::from_int(2, &t).add(&hbar(&t), &t);
        let inv = a.invert(&t).unwrap();
        assert!(a.mul(&inv, &t).eq_valid(&Coeff::one(&t)));
    }

    #[test]
    fn hbar_parity_involution() {
        let t = t();
        let x = hbar(&t).add(&hbar(&t).mul(&hbar(&t), &t), &t);
        let y = x.substitute_hbar_negate();
        assert_eq!(y.coeff(&Expo::h(1)), -Rat::one());
        assert_eq!(y.coeff(&Expo::h(2)), Rat::one());
        assert!(y.substitute_hbar_negate().eq_valid(&x));
    }

    #[test]
    fn validity_tracking() {
        let t = t();
        let x = hbar(&t);
        let y = x.div_hbar(&t).unwrap();
        assert_eq!(y.valid_h, t.n_h - 1);
        let z = y.mul_hbar_pow(1, &t);
        assert_eq!(z.valid_h, t.n_h);
        assert!(x.div_hbar(&t).unwrap().eq_valid(&Coeff::one(&t)));
        assert!(Coeff::one(&t).div_hbar(&t).is_err());
    }

    #[test]
    fn kappa_slots() {
        let t = t();
        let x = Coeff::one(&t).mul_kappa(0, 1, &t).mul_hbar_pow(1, &t);
        let y = x.kappa_to_slot(2);
        assert!(y.terms().all(|(e, _)| e.k == [0, 0, 1]));
        let m = y.kappa_merge(&t);
        assert!(m.terms().all(|(e, _)| e.k == [1, 0, 0]));
        assert!(x.kappa_zero().is_zero());
    }

    #[test]
    fn hlaurent_pairing_values() {
        let t = t();
        // (2/h) * (h/2) = 1
        let a = HLaurent { off: -1, body: Coeff::from_int(2, &t) };
        let b = HLaurent { off: 1, body: Coeff::from_rat(Rat::new(1, 2), &t) };
        let p = a.mul(&b, &t);
        assert!(p.to_coeff(&t).unwrap().eq_valid(&Coeff::one(&t)));
    }
}
