//! Operator power series in the derivation.
//!
//! The deformed structure maps used throughout are analytic series in the
//! derivation with h-weighted coefficients: `q^{a d} = exp(a h d)`,
//! `T = sinh(h d)/(h d)`, `(q^d - 1)/d`, `-tanh(h d / 2)`, and bivariate
//! divided differences `(F(d_z) - F(-d_w))/(d_z + d_w)`. An [`OpSeries`]
//! stores the `Coeff` multiplying each power of the derivation; truncation
//! terminates every expansion because each derivation power arrives with at
//! least one power of `h` (or is cut by the global order).

use crate::coeff::{Coeff, Expo, Trunc};
use crate::rat::{factorial, Rat};
use std::collections::BTreeMap;

/// Exact univariate power-series helpers over `Rat` (coefficient lists).
pub mod ps {
    use crate::rat::{factorial, Rat};

    pub fn mul(a: &[Rat], b: &[Rat], n: usize) -> Vec<Rat> {
        let mut c = vec![Rat::zero(); n + 1];
        for i in 0..=n.min(a.len().saturating_sub(1)) {
            if a[i].is_zero() {
                continue;
            }
            for j in 0..=(n - i).min(b.len().saturating_sub(1)) {
                let p = &a[i] * &b[j];
                c[i + j] += &p;
            }
        }
        c
    }

    /// Series division, requires `b[0] != 0`.
    pub fn div(a: &[Rat], b: &[Rat], n: usize) -> Vec<Rat> {
        assert!(!b[0].is_zero());
        let mut q = vec![Rat::zero(); n + 1];
        for i in 0..=n {
            let mut acc = if i < a.len() { a[i].clone() } else { Rat::zero() };
            for j in 0..i {
                if i - j < b.len() {
                    acc -= &(&q[j] * &b[i - j]);
                }
            }
            q[i] = &acc / &b[0];
        }
        q
    }

    pub fn exp_cx(c: &Rat, n: usize) -> Vec<Rat> {
        (0..=n).map(|k| &c.pow(k as u32) / &factorial(k as u32)).collect()
    }

    pub fn sinh(n: usize) -> Vec<Rat> {
        (0..=n)
            .map(|k| if k % 2 == 1 { factorial(k as u32).recip() } else { Rat::zero() })
            .collect()
    }

    pub fn cosh(n: usize) -> Vec<Rat> {
        (0..=n)
            .map(|k| if k % 2 == 0 { factorial(k as u32).recip() } else { Rat::zero() })
            .collect()
    }

    /// Coefficients of `tanh(x/2)`.
    pub fn tanh_half(n: usize) -> Vec<Rat> {
        let half = Rat::new(1, 2);
        let s: Vec<Rat> = sinh(n).iter().enumerate().map(|(k, c)| c * &half.pow(k as u32)).collect();
        let c: Vec<Rat> = cosh(n).iter().enumerate().map(|(k, v)| v * &half.pow(k as u32)).collect();
        div(&s, &c, n)
    }

    /// Coefficients of `1/(1 + e^x)`.
    pub fn inv_one_plus_exp(n: usize) -> Vec<Rat> {
        let mut denom = exp_cx(&Rat::one(), n);
        denom[0] = Rat::from_int(2);
        let mut one = vec![Rat::zero(); n + 1];
        one[0] = Rat::one();
        div(&one, &denom, n)
    }
}

/// `sum_j c[j] * d^j` with `Coeff` weights.
#[derive(Clone, Debug)]
pub struct OpSeries {
    pub c: Vec<Coeff>,
}

impl OpSeries {
    pub fn identity(t: &Trunc) -> OpSeries {
        OpSeries { c: vec![Coeff::one(t)] }
    }

    /// Largest derivation power with a nonzero weight.
    pub fn max_power(&self) -> usize {
        self.c.iter().rposition(|x| !x.is_zero()).unwrap_or(0)
    }

    /// `q^{a d} = exp(a h d)`, integer multiplier `a`.
    pub fn q_pow_d(a: i64, t: &Trunc) -> OpSeries {
        let n = t.n_h as usize;
        let c = (0..=n)
            .map(|j| {
                let r = &Rat::from_int(a).pow(j as u32) / &factorial(j as u32);
                Coeff::monomial(r, Expo::h(j as u32), t)
            })
            .collect();
        OpSeries { c }
    }

    /// `q^{a K d} = exp(a h kappa d)` with the central marker in slot 0.
    pub fn q_pow_kd(a: i64, t: &Trunc) -> OpSeries {
        let n = (t.n_h as usize).min(t.n_k as usize);
        let c = (0..=n)
            .map(|j| {
                let r = &Rat::from_int(a).pow(j as u32) / &factorial(j as u32);
                Coeff::monomial(
                    r,
                    Expo { h: j as u32, q: 0, k: [j as u32, 0, 0] },
                    t,
                )
            })
            .collect();
        OpSeries { c }
    }

    /// `T = sinh(h d)/(h d)`.
    pub fn t_op(t: &Trunc) -> OpSeries {
        let n = t.n_h as usize;
        let mut c = vec![Coeff::zero(t); n + 1];
        for j in (0..=n).step_by(2) {
            c[j] = Coeff::monomial(factorial(j as u32 + 1).recip(), Expo::h(j as u32), t);
        }
        OpSeries { c }
    }

    /// `f_eps(d) = (q^{eps d} - 1)/d = sum h^{j+1} eps^{j+1} d^j/(j+1)!`.
    pub fn f_op(eps: i64, t: &Trunc) -> OpSeries {
        let n = t.n_h as usize;
        let c = (0..n)
            .map(|j| {
                let r = &Rat::from_int(eps).pow(j as u32 + 1) / &factorial(j as u32 + 1);
                Coeff::monomial(r, Expo::h(j as u32 + 1), t)
            })
            .collect();
        OpSeries { c }
    }

    /// `rho+ = (1 - q^d)/(1 + q^d) = -tanh(h d / 2)`.
    pub fn rho_plus(t: &Trunc) -> OpSeries {
        let n = t.n_h as usize;
        let th = ps::tanh_half(n);
        let c = (0..=n)
            .map(|j| Coeff::monomial(-th[j].clone(), Expo::h(j as u32), t))
            .collect();
        OpSeries { c }
    }

    /// `T_plus = (1 - q^{-d})/d`, `T_minus = (1 - q^d)/d`.
    pub fn t_plusminus(sign_plus: bool, t: &Trunc) -> OpSeries {
        let eps = if sign_plus { -1 } else { 1 };
        let mut f = OpSeries::f_op(eps, t);
        for v in f.c.iter_mut() {
            *v = v.neg();
        }
        f
    }

    /// `(q^d - 1)(1 - q^{-d})/(2 h d)`: the leading part of the rho- map.
    pub fn rho_minus_op(t: &Trunc) -> OpSeries {
        // (e^x - 1)(1 - e^{-x})/x at x = h d, then divided by 2h.
        let n = t.n_h as usize + 1;
        let ex = ps::exp_cx(&Rat::one(), n);
        let emx = ps::exp_cx(&(-Rat::one()), n);
        let mut a = ex.clone();
        a[0] = &a[0] - &Rat::one();
        let mut b = vec![Rat::zero(); n + 1];
        b[0] = Rat::one();
        for (i, v) in emx.iter().enumerate() {
            b[i] = &b[i] - v;
        }
        let prod = ps::mul(&a, &b, n); // starts at x^2
        assert!(prod[0].is_zero() && prod[1].is_zero());
        // prod/x = sum prod[j+1] x^j ; with x = h d and overall 1/(2h):
        // coefficient of d^j is prod[j+1] h^j / 2
        let mut c = Vec::new();
        for j in 0..n {
            let r = &prod[j + 1] / &Rat::from_int(2);
            c.push(Coeff::monomial(r, Expo::h(j as u32), t));
        }
        OpSeries { c }
    }

    pub fn scale(&self, s: &Rat) -> OpSeries {
        OpSeries { c: self.c.iter().map(|x| x.scale(s)).collect() }
    }

    pub fn add(&self, o: &OpSeries, t: &Trunc) -> OpSeries {
        let n = self.c.len().max(o.c.len());
        let z = Coeff::zero(t);
        let c = (0..n)
            .map(|j| {
                let a = self.c.get(j).unwrap_or(&z);
                let b = o.c.get(j).unwrap_or(&z);
                a.add(b, t)
            })
            .collect();
        OpSeries { c }
    }

    pub fn compose_mul(&self, o: &OpSeries, t: &Trunc) -> OpSeries {
        let n = self.c.len() + o.c.len();
        let mut c = vec![Coeff::zero(t); n];
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.c.iter().enumerate() {
                let p = a.mul(b, t);
                if !p.is_zero() {
                    c[i + j] = c[i + j].add(&p, t);
                }
            }
        }
        // prune top zero weights
        while c.len() > 1 && c.last().map(|x| x.is_zero()) == Some(true) {
            c.pop();
        }
        OpSeries { c }
    }
}

/// Bivariate operator series `sum c_{ij} dz^i dw^j`.
#[derive(Clone, Debug)]
pub struct BivarOp {
    pub c: BTreeMap<(usize, usize), Coeff>,
}

impl BivarOp {
    pub fn zero() -> BivarOp {
        BivarOp { c: BTreeMap::new() }
    }

    fn add_term(&mut self, key: (usize, usize), v: &Coeff, t: &Trunc) {
        let cur = self.c.remove(&key);
        let s = match cur {
            Some(x) => x.add(v, t),
            None => v.clone(),
        };
        if s.is_zero() {
            self.c.remove(&key);
        } else {
            self.c.insert(key, s);
        }
    }

    /// `(F(x) - F(-y)) / (x + y)` for a univariate operator series `F`:
    /// expands to `sum_n F_n sum_{i=0}^{n-1} (-1)^i x^{n-1-i} y^i`.
    pub fn divided_difference(f: &OpSeries, t: &Trunc) -> BivarOp {
        let mut out = BivarOp::zero();
        for (n, fn_) in f.c.iter().enumerate() {
            if fn_.is_zero() {
                continue;
            }
            for i in 0..n {
                let sign = if i % 2 == 0 { Rat::one() } else { -Rat::one() };
                out.add_term((n - 1 - i, i), &fn_.scale(&sign), t);
            }
        }
        out
    }

    /// Divide a bivariate series by `(x + y)`, verifying exact divisibility.
    pub fn div_x_plus_y(g: &BivarOp, t: &Trunc) -> Result<BivarOp, String> {
        // g_{a,b} = h_{a-1,b} + h_{a,b-1}; solve h_{a,b} = g_{a+1,b} - h_{a+1,b-1}
        let a_max = g.c.keys().map(|(a, _)| *a).max().unwrap_or(0);
        let b_max = g.c.keys().map(|(_, b)| *b).max().unwrap_or(0);
        let get = |c: &BTreeMap<(usize, usize), Coeff>, a: usize, b: usize| -> Coeff {
            c.get(&(a, b)).cloned().unwrap_or_else(|| Coeff::zero(t))
        };
        let mut h: BTreeMap<(usize, usize), Coeff> = BTreeMap::new();
        for a in (0..=a_max.max(1) - 1).rev() {
            for b in 0..=b_max {
                let mut v = get(&g.c, a + 1, b);
                if b > 0 {
                    v = v.sub(&get(&h, a + 1, b - 1), t);
                }
                if !v.is_zero() {
                    h.insert((a, b), v);
                }
            }
        }
        // remainder check: g_{0,b} must equal h_{0,b-1}
        for b in 0..=b_max {
            let lhs = get(&g.c, 0, b);
            let rhs = if b > 0 { get(&h, 0, b - 1) } else { Coeff::zero(t) };
            if !lhs.eq_valid(&rhs) {
                return Err(format!("not divisible by (dz+dw): residual at y^{b}"));
            }
        }
        Ok(BivarOp { c: h })
    }

    pub fn scale(&self, s: &Rat) -> BivarOp {
        BivarOp { c: self.c.iter().map(|(k, v)| (*k, v.scale(s))).collect() }
    }

    pub fn add(&self, o: &BivarOp, t: &Trunc) -> BivarOp {
        let mut r = self.clone();
        for (k, v) in &o.c {
            r.add_term(*k, v, t);
        }
        r
    }

    /// Substitute `x -> -y, y -> -x` (the flip-conjugate of the operator).
    pub fn flip_swap_negate(&self) -> BivarOp {
        let mut r = BivarOp::zero();
        for ((a, b), v) in &self.c {
            let sign = if (a + b) % 2 == 0 { Rat::one() } else { -Rat::one() };
            r.c.insert((*b, *a), v.scale(&sign));
        }
        r
    }

    /// Every term with h-order 0 removed must vanish; used for `1/h`-scaled
    /// operators: returns the operator divided by h.
    pub fn div_hbar(&self, t: &Trunc) -> Result<BivarOp, String> {
        let mut r = BivarOp::zero();
        for (k, v) in &self.c {
            r.c.insert(*k, v.div_hbar(t)?);
        }
        Ok(r)
    }
}
