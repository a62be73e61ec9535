//! Tate-normalized theta series and its logarithmic derivative.
//!
//! `theta(t) = prod_{n>=0}(1 - q0^n t) prod_{n>=1}(1 - q0^n / t)` is kept as
//! a Laurent polynomial in the multiplicative coordinate `t` per `q0`-order.
//! With the formal substitution `t = exp(z)` everything becomes an exact
//! element of Q[[q0]]((z)); in particular
//! `zeta(z) = d/dz log theta(e^z) = 1/z + 1/2 + odd regular part`,
//! all over exact rationals with no transcendental constants.

use crate::coeff::{Coeff, Expo, Trunc};
use crate::laurent::LaurentWindow;
use crate::rat::{factorial, Rat};
use std::collections::BTreeMap;

/// Laurent polynomial in `t` per q0-order: map `(q0 order, t power) -> Rat`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaSeries {
    pub terms: BTreeMap<(u32, i64), Rat>,
    pub q_order: u32,
}

impl ThetaSeries {
    fn one(q_order: u32) -> Self {
        let mut s = ThetaSeries { terms: BTreeMap::new(), q_order };
        s.terms.insert((0, 0), Rat::one());
        s
    }

    fn add_term(&mut self, key: (u32, i64), r: Rat) {
        if r.is_zero() {
            return;
        }
        let cur = self.terms.remove(&key).unwrap_or_else(Rat::zero);
        let s = &cur + &r;
        if !s.is_zero() {
            self.terms.insert(key, s);
        }
    }

    fn mul(&self, o: &ThetaSeries) -> ThetaSeries {
        let mut r = ThetaSeries { terms: BTreeMap::new(), q_order: self.q_order };
        for ((da, ka), va) in &self.terms {
            for ((db, kb), vb) in &o.terms {
                let d = da + db;
                if d <= self.q_order {
                    r.add_term((d, ka + kb), va * vb);
                }
            }
        }
        r
    }

    /// The product expansion of theta, exact through `q_order` in q0.
    pub fn build(q_order: u32) -> ThetaSeries {
        let mut s = ThetaSeries::one(q_order);
        // n = 0 factor: (1 - t)
        let mut f0 = ThetaSeries::one(q_order);
        f0.add_term((0, 1), -Rat::one());
        s = s.mul(&f0);
        for n in 1..=q_order {
            let mut f = ThetaSeries::one(q_order);
            f.add_term((n, 1), -Rat::one());
            s = s.mul(&f);
            let mut g = ThetaSeries::one(q_order);
            g.add_term((n, -1), -Rat::one());
            s = s.mul(&g);
        }
        s
    }

    /// `t d/dt` applied termwise.
    pub fn t_ddt(&self) -> ThetaSeries {
        let mut r = ThetaSeries { terms: BTreeMap::new(), q_order: self.q_order };
        for ((d, k), v) in &self.terms {
            r.add_term((*d, *k), v * &Rat::from_int(*k));
        }
        r
    }

    /// Substitute `t -> q0 t` and retruncate. Only trustworthy up to
    /// `q_order - max negative t-degree`.
    pub fn substitute_t_q0t(&self) -> ThetaSeries {
        let mut r = ThetaSeries { terms: BTreeMap::new(), q_order: self.q_order };
        for ((d, k), v) in &self.terms {
            let nd = *d as i64 + *k;
            if (0..=self.q_order as i64).contains(&nd) {
                r.add_term((nd as u32, *k), v.clone());
            }
        }
        r
    }

    /// Multiply by `-1/t`.
    pub fn neg_t_inv(&self) -> ThetaSeries {
        let mut r = ThetaSeries { terms: BTreeMap::new(), q_order: self.q_order };
        for ((d, k), v) in &self.terms {
            r.add_term((*d, *k - 1), -v.clone());
        }
        r
    }

    /// Quasi-periodicity `theta(q0 t) = -t^{-1} theta(t)`, valid per q0-order
    /// up to `check_order` (which must leave margin for the substitution).
    pub fn quasi_periodicity_holds(&self, check_order: u32) -> bool {
        let lhs = self.substitute_t_q0t();
        let rhs = self.neg_t_inv();
        let keys: std::collections::BTreeSet<(u32, i64)> =
            lhs.terms.keys().chain(rhs.terms.keys()).cloned().collect();
        for (d, k) in keys {
            if d > check_order {
                continue;
            }
            let a = lhs.terms.get(&(d, k)).cloned().unwrap_or_else(Rat::zero);
            let b = rhs.terms.get(&(d, k)).cloned().unwrap_or_else(Rat::zero);
            if a != b {
                return false;
            }
        }
        true
    }

    /// Expand with `t = e^z`: a z-power series with q0-series coefficients,
    /// to z-order `z_hi`.
    pub fn z_expansion(&self, z_hi: i64, t: &Trunc) -> Vec<Coeff> {
        let n = z_hi.max(0) as usize;
        let mut out = vec![Coeff::zero(t); n + 1];
        for ((d, k), v) in &self.terms {
            if *d > t.n_q {
                continue;
            }
            // t^k = e^{kz} = sum (k z)^m / m!
            for m in 0..=n {
                let r = &(v * &Rat::from_int(*k).pow(m as u32)) / &factorial(m as u32);
                if !r.is_zero() {
                    out[m] = out[m].add(&Coeff::monomial(r, Expo::hq(0, *d), t), t);
                }
            }
        }
        out
    }
}

/// Power-series division over `Coeff` coefficients (unit denominator).
fn cs_div(a: &[Coeff], b: &[Coeff], t: &Trunc) -> Vec<Coeff> {
    let n = a.len().min(b.len());
    let b0inv = b[0].invert(t).expect("unit constant term");
    let mut q = vec![Coeff::zero(t); n];
    for i in 0..n {
        let mut acc = a[i].clone();
        for j in 0..i {
            acc = acc.sub(&q[j].mul(&b[i - j], t), t);
        }
        q[i] = acc.mul(&b0inv, t);
    }
    q
}

/// The exact expansion of `zeta(z) = d/dz log theta(e^z)` as a windowed
/// Laurent series: `1/z + 1/2 + (odd regular part)`, coefficients in
/// Q[[q0]], stored for modes `-1 ..= z_hi`.
pub fn zeta_series(theta: &ThetaSeries, z_hi: i64, t: &Trunc) -> LaurentWindow {
    // numerator: (t theta')(e^z); denominator: theta(e^z) = -z * u(z)
    let margin = 2;
    let num = theta.t_ddt().z_expansion(z_hi + margin, t);
    let den = theta.z_expansion(z_hi + margin + 1, t);
    assert!(den[0].is_zero(), "theta(e^z) must vanish at z=0");
    // u(z) = -theta(e^z)/z
    let u: Vec<Coeff> = den[1..].iter().map(|c| c.neg()).collect();
    // zeta = num / (-z u) = -(num/u) / z
    let ratio = cs_div(&num, &u, t);
    let mut out = LaurentWindow::zero();
    for (m, c) in ratio.iter().enumerate() {
        let v = c.neg();
        if !v.is_zero() {
            out.set(m as i64 - 1, v);
        }
    }
    out.lo = -1;
    out.truncate_hi(z_hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> Trunc {
        Trunc::new(2, 3, 0)
    }

    #[test]
    fn theta_quasi_periodicity() {
        let q = 3;
        // compute with margin so the substitution is complete at order q
        let th = ThetaSeries::build(2 * q + 3);
        assert!(th.quasi_periodicity_holds(q));
    }

    #[test]
    fn theta_q0_zero_is_one_minus_t() {
        let th = ThetaSeries::build(4);
        let q0: Vec<_> = th.terms.iter().filter(|((d, _), _)| *d == 0).collect();
        assert_eq!(q0.len(), 2);
        assert_eq!(th.terms.get(&(0, 0)), Some(&Rat::one()));
        assert_eq!(th.terms.get(&(0, 1)), Some(&(-Rat::one())));
    }

    #[test]
    fn zeta_pole_and_half() {
        let t = t();
        let th = ThetaSeries::build(2 * t.n_q + 3);
        let z = zeta_series(&th, 6, &t);
        // residue term 1/z with coefficient exactly 1 at every q0-order
        assert!(z.coeff(-1, &t).eq_valid(&Coeff::one(&t)));
        // constant term 1/2 at q0^0; the q0-corrections of the even part
        // vanish because zeta - 1/2 is odd
        let c0 = z.coeff(0, &t);
        assert_eq!(c0.coeff(&Expo::ZERO), Rat::new(1, 2));
        // full evenness check: zeta(z) + zeta(-z) = 1
        for m in 0..=2 {
            let even_mode = 2 * m; // even regular modes must vanish except 0
            if even_mode == 0 {
                assert!(c0.sub(&Coeff::from_rat(Rat::new(1, 2), &t), &t).is_zero());
            } else {
                assert!(z.coeff(even_mode, &t).is_zero(), "mode {even_mode}");
            }
        }
    }

    #[test]
    fn zeta_q0_zero_matches_bernoulli() {
        // at q0 = 0: zeta = 1/z + 1/2 + z/12 - z^3/720 + z^5/30240
        let t = Trunc::new(0, 0, 0);
        let th = ThetaSeries::build(3);
        let z = zeta_series(&th, 6, &t);
        let expect = [
            (-1, Rat::one()),
            (0, Rat::new(1, 2)),
            (1, Rat::new(1, 12)),
            (3, Rat::new(-1, 720)),
            (5, Rat::new(1, 30240)),
        ];
        for (m, r) in expect {
            assert_eq!(z.coeff(m, &t).constant_term(), r, "mode {m}");
        }
        assert!(z.coeff(2, &t).is_zero());
        assert!(z.coeff(4, &t).is_zero());
    }
}
