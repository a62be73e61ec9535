//! Jet-variable calculus: polynomials in formal jet variables g0, g1, ...
//! (placeholders for a kernel and its successive derivatives), the shift
//! derivation `D = sum_i g_{i+1} d/dg_i`, the triangular recursion producing
//! the power-sum table, and the formal ODE solutions phi, psi together with
//! the auxiliary series u.
//!
//! Everything here is curve-independent: jets are substituted with concrete
//! kernels only later.

use crate::rat::{factorial, Rat};
use std::collections::BTreeMap;
use std::fmt;

/// Monomial in jet variables: sorted `(variable index, exponent)` pairs,
/// exponents nonzero.
pub type JetMono = Vec<(u8, u32)>;

/// Context for jet computations.
#[derive(Clone, Copy, Debug)]
pub struct JetCtx {
    /// Number of stored h-orders is `n_h + 1`.
    pub n_h: usize,
    /// Highest admissible jet variable index.
    pub depth: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub enum JetError {
    DepthExhausted { needed: u8 },
    NotDivisible,
}

impl fmt::Display for JetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JetError::DepthExhausted { needed } => {
                write!(f, "jet depth exhausted: would need g{needed}")
            }
            JetError::NotDivisible => write!(f, "series not divisible by h"),
        }
    }
}

/// Polynomial in jet variables with exact rational coefficients.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct JetPoly {
    terms: BTreeMap<JetMono, Rat>,
}

impl JetPoly {
    pub fn zero() -> Self {
        JetPoly::default()
    }

    pub fn constant(r: Rat) -> Self {
        let mut p = JetPoly::zero();
        if !r.is_zero() {
            p.terms.insert(Vec::new(), r);
        }
        p
    }

    pub fn one() -> Self {
        JetPoly::constant(Rat::one())
    }

    pub fn var(i: u8) -> Self {
        let mut p = JetPoly::zero();
        p.terms.insert(vec![(i, 1)], Rat::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&JetMono, &Rat)> {
        self.terms.iter()
    }

    pub fn max_var(&self) -> Option<u8> {
        self.terms
            .keys()
            .filter_map(|m| m.last().map(|(v, _)| *v))
            .max()
    }

    fn add_term(&mut self, m: JetMono, r: Rat) {
        if r.is_zero() {
            return;
        }
        let cur = self.terms.remove(&m).unwrap_or_else(Rat::zero);
        let s = &cur + &r;
        if !s.is_zero() {
            self.terms.insert(m, s);
        }
    }

    pub fn add(&self, o: &JetPoly) -> JetPoly {
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(m.clone(), c.clone());
        }
        r
    }

    pub fn sub(&self, o: &JetPoly) -> JetPoly {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> JetPoly {
        let mut r = self.clone();
        for v in r.terms.values_mut() {
            *v = -&*v;
        }
        r
    }

    pub fn scale(&self, s: &Rat) -> JetPoly {
        if s.is_zero() {
            return JetPoly::zero();
        }
        let mut r = self.clone();
        for v in r.terms.values_mut() {
            *v = &*v * s;
        }
        r
    }

    pub fn mul(&self, o: &JetPoly) -> JetPoly {
        let mut r = JetPoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                r.add_term(mono_mul(ma, mb), ca * cb);
            }
        }
        r
    }

    /// The derivation `D = sum_i g_{i+1} d/dg_i`. Errors when a term would
    /// need a jet variable beyond `depth`.
    pub fn apply_d(&self, depth: u8) -> Result<JetPoly, JetError> {
        let mut r = JetPoly::zero();
        for (m, c) in &self.terms {
            for (pos, &(v, e)) in m.iter().enumerate() {
                if v + 1 > depth {
                    return Err(JetError::DepthExhausted { needed: v + 1 });
                }
                // d/dg_v then multiply by g_{v+1}
                let mut m2: JetMono = Vec::with_capacity(m.len() + 1);
                for (j, &(w, f)) in m.iter().enumerate() {
                    if j == pos {
                        if f > 1 {
                            m2.push((w, f - 1));
                        }
                    } else {
                        m2.push((w, f));
                    }
                }
                let m2 = mono_mul(&m2, &[(v + 1, 1)]);
                r.add_term(m2, c * &Rat::from_int(e as i64));
            }
        }
        Ok(r)
    }

    /// Substitute g_i -> (-1)^i g_i.
    pub fn parity_flip_vars(&self) -> JetPoly {
        let mut r = JetPoly::zero();
        for (m, c) in &self.terms {
            let odd: u32 = m.iter().filter(|(v, _)| v % 2 == 1).map(|(_, e)| *e).sum();
            let c2 = if odd % 2 == 1 { -c.clone() } else { c.clone() };
            r.add_term(m.clone(), c2);
        }
        r
    }

    /// Evaluate with g0 = c and all higher jets zero.
    pub fn eval_constant_jet(&self, c: &Rat) -> Rat {
        let mut acc = Rat::zero();
        for (m, coef) in &self.terms {
            if m.iter().any(|(v, _)| *v > 0) {
                continue;
            }
            let e = m.first().map(|(_, e)| *e).unwrap_or(0);
            acc += &(coef * &c.pow(e));
        }
        acc
    }
}

fn mono_mul(a: &[(u8, u32)], b: &[(u8, u32)]) -> JetMono {
    let mut map: BTreeMap<u8, u32> = BTreeMap::new();
    for &(v, e) in a.iter().chain(b.iter()) {
        *map.entry(v).or_insert(0) += e;
    }
    map.into_iter().collect()
}

impl fmt::Debug for JetPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}", c.to_frac_string())?;
            for (v, e) in m {
                write!(f, "*g{v}")?;
                if *e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        Ok(())
    }
}

/// Series in h with `JetPoly` coefficients, stored to order `n_h`.
#[derive(Clone, PartialEq, Debug)]
pub struct JetSeries {
    /// `c[n]` is the coefficient of `h^n`.
    pub c: Vec<JetPoly>,
}

impl JetSeries {
    pub fn zero(ctx: &JetCtx) -> Self {
        JetSeries { c: vec![JetPoly::zero(); ctx.n_h + 1] }
    }

    pub fn one(ctx: &JetCtx) -> Self {
        let mut s = JetSeries::zero(ctx);
        s.c[0] = JetPoly::one();
        s
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|p| p.is_zero())
    }

    pub fn add(&self, o: &JetSeries) -> JetSeries {
        let n = self.c.len().min(o.c.len());
        JetSeries { c: (0..n).map(|i| self.c[i].add(&o.c[i])).collect() }
    }

    pub fn sub(&self, o: &JetSeries) -> JetSeries {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> JetSeries {
        JetSeries { c: self.c.iter().map(|p| p.neg()).collect() }
    }

    pub fn scale(&self, r: &Rat) -> JetSeries {
        JetSeries { c: self.c.iter().map(|p| p.scale(r)).collect() }
    }

    pub fn mul(&self, o: &JetSeries) -> JetSeries {
        let n = self.c.len().min(o.c.len());
        let mut c = vec![JetPoly::zero(); n];
        for i in 0..n {
            if self.c[i].is_zero() {
                continue;
            }
            for j in 0..n - i {
                if o.c[j].is_zero() {
                    continue;
                }
                c[i + j] = c[i + j].add(&self.c[i].mul(&o.c[j]));
            }
        }
        JetSeries { c }
    }

    pub fn apply_d(&self, depth: u8) -> Result<JetSeries, JetError> {
        let c = self
            .c
            .iter()
            .map(|p| p.apply_d(depth))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(JetSeries { c })
    }

    /// h -> -h.
    pub fn hbar_negate(&self) -> JetSeries {
        JetSeries {
            c: self
                .c
                .iter()
                .enumerate()
                .map(|(n, p)| if n % 2 == 1 { p.neg() } else { p.clone() })
                .collect(),
        }
    }

    /// g_i -> (-1)^i g_i.
    pub fn parity_flip_vars(&self) -> JetSeries {
        JetSeries { c: self.c.iter().map(|p| p.parity_flip_vars()).collect() }
    }

    /// Multiply by h (drops the top order).
    pub fn mul_hbar(&self) -> JetSeries {
        let mut c = vec![JetPoly::zero(); self.c.len()];
        for i in 1..self.c.len() {
            c[i] = self.c[i - 1].clone();
        }
        JetSeries { c }
    }

    /// Exact division by h. The order-0 part must vanish; result is known to
    /// one order less, padded with an explicitly zero top coefficient that
    /// callers must not rely on: the returned series has length reduced by 1.
    pub fn div_hbar(&self) -> Result<JetSeries, JetError> {
        if !self.c[0].is_zero() {
            return Err(JetError::NotDivisible);
        }
        Ok(JetSeries { c: self.c[1..].to_vec() })
    }

    /// log of a series with constant term exactly 1.
    pub fn log(&self) -> JetSeries {
        assert_eq!(self.c[0], JetPoly::one(), "log needs unit constant term");
        let mut x = self.clone();
        x.c[0] = JetPoly::zero();
        let mut acc = JetSeries { c: vec![JetPoly::zero(); self.c.len()] };
        let mut pow = x.clone();
        for k in 1..=self.order() {
            let sign = if k % 2 == 1 { Rat::one() } else { -Rat::one() };
            acc = acc.add(&pow.scale(&(&sign / &Rat::from_int(k as i64))));
            pow = pow.mul(&x);
        }
        acc
    }

    /// exp of a series with zero constant term.
    pub fn exp(&self) -> JetSeries {
        assert!(self.c[0].is_zero(), "exp needs zero constant term");
        let ctx = JetCtx { n_h: self.order(), depth: 0 };
        let mut acc = JetSeries::one(&ctx);
        let mut pow = JetSeries::one(&ctx);
        for k in 1..=self.order() {
            pow = pow.mul(self);
            acc = acc.add(&pow.scale(&factorial(k as u32).recip()));
        }
        acc
    }

    /// Inverse of a series with constant term exactly 1.
    pub fn invert_unit(&self) -> JetSeries {
        assert_eq!(self.c[0], JetPoly::one(), "invert needs unit constant term");
        let mut x = self.clone();
        x.c[0] = JetPoly::zero();
        let ctx = JetCtx { n_h: self.order(), depth: 0 };
        let mut acc = JetSeries::one(&ctx);
        let mut pow = JetSeries::one(&ctx);
        for _ in 1..=self.order() {
            pow = pow.mul(&x).neg();
            acc = acc.add(&pow);
        }
        acc
    }

    /// Evaluate all jet polynomials with g0 = c, higher jets zero, giving a
    /// plain rational series in h.
    pub fn eval_constant_jet(&self, v: &Rat) -> Vec<Rat> {
        self.c.iter().map(|p| p.eval_constant_jet(v)).collect()
    }
}

/// Table of the triangular recursion: `table[n][k]` is the polynomial
/// multiplying the k-th power of the two-point kernel in the n-th derivative
/// sum. Base row: only `table[0][1] = 1`; recursion
/// `P_k^(n+1) = D P_k^(n) + (k-1) P_{k-1}^(n) + g0 (k+1) P_{k+1}^(n)`.
pub fn pk_table(n_max: usize, k_max: usize, depth: u8) -> Result<Vec<Vec<JetPoly>>, JetError> {
    let mut table = vec![vec![JetPoly::zero(); k_max + 2]; n_max + 1];
    if k_max >= 1 {
        table[0][1] = JetPoly::one();
    }
    for n in 0..n_max {
        for k in 0..=k_max {
            let dp = table[n][k].apply_d(depth)?;
            let mut next = dp;
            if k >= 1 {
                next = next.add(&table[n][k - 1].scale(&Rat::from_int(k as i64 - 1)));
            }
            next = next.add(
                &table[n][k + 1]
                    .mul(&JetPoly::var(0))
                    .scale(&Rat::from_int(k as i64 + 1)),
            );
            table[n + 1][k] = next;
        }
    }
    for row in table.iter_mut() {
        row.truncate(k_max + 1);
    }
    Ok(table)
}

/// Solutions of the pair of formal ODEs
/// `d psi/dh = D psi - 1 - g0 psi^2`, `d phi/dh = D phi - g0 psi`,
/// with zero initial values, solved term by term in h.
#[derive(Clone, Debug)]
pub struct JetSolution {
    pub phi: JetSeries,
    pub psi: JetSeries,
    /// odd part of phi divided by h: `(phi(h) - phi(-h)) / 2h`.
    pub psi0: JetSeries,
    /// `psi(-h, g)`.
    pub psi_plus: JetSeries,
    /// `psi(h, g)` (same as `psi`).
    pub psi_minus: JetSeries,
}

pub fn solve_phi_psi(ctx: &JetCtx) -> Result<JetSolution, JetError> {
    let n = ctx.n_h;
    let mut psi = JetSeries::zero(ctx);
    let mut phi = JetSeries::zero(ctx);
    let g0 = JetPoly::var(0);
    for m in 0..n {
        // coefficient of h^m on the right-hand sides, then divide by m+1
        let dpsi = psi.c[m].apply_d(ctx.depth)?;
        let mut rhs_psi = dpsi;
        if m == 0 {
            rhs_psi = rhs_psi.sub(&JetPoly::one());
        }
        // [psi^2]_m from orders < = m already known (psi has no order-0 term,
        // so only indices 1..m contribute)
        let mut sq = JetPoly::zero();
        for i in 1..m {
            sq = sq.add(&psi.c[i].mul(&psi.c[m - i]));
        }
        rhs_psi = rhs_psi.sub(&g0.mul(&sq));
        psi.c[m + 1] = rhs_psi.scale(&Rat::new(1, m as i64 + 1));

        let dphi = phi.c[m].apply_d(ctx.depth)?;
        let rhs_phi = dphi.sub(&g0.mul(&psi.c[m]));
        phi.c[m + 1] = rhs_phi.scale(&Rat::new(1, m as i64 + 1));
    }
    let psi_minus = psi.clone();
    let psi_plus = psi.hbar_negate();
    let odd = phi.sub(&phi.hbar_negate()).scale(&Rat::new(1, 2));
    let psi0 = odd.div_hbar()?;
    Ok(JetSolution { phi, psi, psi0, psi_plus, psi_minus })
}

/// The series `u(h, t, g) = sum_{k>=0} t^k u_k` with
/// `u_k = sum_{n>=1} h^n/n! * P_k^(n-1)`, stored per t-power.
pub struct USeries {
    /// `tk[k]` is the coefficient of `t^k`, a jet series in h.
    pub tk: Vec<JetSeries>,
}

pub fn build_u(ctx: &JetCtx) -> Result<USeries, JetError> {
    let n = ctx.n_h;
    let table = pk_table(n.saturating_sub(1), n + 1, ctx.depth)?;
    let mut tk = Vec::new();
    for k in 0..=n + 1 {
        let mut s = JetSeries::zero(ctx);
        for m in 1..=n {
            let p = &table[m - 1][k];
            if !p.is_zero() {
                s.c[m] = p.scale(&factorial(m as u32).recip());
            }
        }
        tk.push(s);
    }
    Ok(USeries { tk })
}

impl USeries {
    /// Residual of the defining transport equation
    /// `du/dh = t + D u + (t^2 + g0) du/dt`, one jet series per t-power.
    /// All entries are zero when the table is consistent; the residual is
    /// only meaningful to order `n_h - 1` in h (the derivative loses one).
    pub fn transport_residual(&self, ctx: &JetCtx) -> Result<Vec<JetSeries>, JetError> {
        let kmax = self.tk.len() - 1;
        let mut res = Vec::new();
        for k in 0..=kmax {
            // du/dh at t-power k
            let mut lhs = JetSeries::zero(ctx);
            for m in 0..ctx.n_h {
                lhs.c[m] = self.tk[k].c[m + 1].scale(&Rat::from_int(m as i64 + 1));
            }
            let mut rhs = JetSeries::zero(ctx);
            if k == 1 {
                rhs.c[0] = JetPoly::one();
            }
            rhs = rhs.add(&self.tk[k].apply_d(ctx.depth)?);
            // (t^2 + g0) du/dt contributes at t-power k from u_{k-1} and u_{k+1}
            if k >= 1 {
                rhs = rhs.add(&self.tk[k - 1].scale(&Rat::from_int(k as i64 - 1)));
            }
            if k + 1 <= kmax {
                let term = self.tk[k + 1].scale(&Rat::from_int(k as i64 + 1));
                let g0 = {
                    let mut s = JetSeries::zero(ctx);
                    s.c[0] = JetPoly::var(0);
                    s
                };
                rhs = rhs.add(&g0.mul(&term));
            }
            let mut r = lhs.sub(&rhs);
            // top h-order of the residual is not determined; drop it
            r.c.truncate(ctx.n_h);
            res.push(r);
        }
        Ok(res)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> JetCtx {
        JetCtx { n_h: 8, depth: 10 }
    }

    /// Minimal independent univariate power-series helpers for oracles.
    mod ps {
        use crate::rat::{factorial, Rat};

        pub fn mul(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
            let n = a.len().min(b.len());
            let mut c = vec![Rat::zero(); n];
            for i in 0..n {
                for j in 0..n - i {
                    let p = &a[i] * &b[j];
                    c[i + j] += &p;
                }
            }
            c
        }

        pub fn div(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
            assert!(!b[0].is_zero());
            let n = a.len().min(b.len());
            let mut q = vec![Rat::zero(); n];
            for i in 0..n {
                let mut acc = a[i].clone();
                for j in 0..i {
                    acc -= &(&q[j] * &b[i - j]);
                }
                q[i] = &acc / &b[0];
            }
            q
        }

        pub fn log1p(a: &[Rat]) -> Vec<Rat> {
            // log of a unit series: integrate a'/a
            assert!(a[0].is_one());
            let n = a.len();
            let da: Vec<Rat> = (1..n).map(|i| &a[i] * &Rat::from_int(i as i64)).collect();
            let ratio = div(&da, &a[..n - 1]);
            let mut out = vec![Rat::zero(); n];
            for i in 0..n - 1 {
                out[i + 1] = &ratio[i] / &Rat::from_int(i as i64 + 1);
            }
            out
        }

        /// sinh(c x), cosh(c x) to order n.
        pub fn sinh(c: &Rat, n: usize) -> Vec<Rat> {
            (0..=n)
                .map(|k| {
                    if k % 2 == 1 {
                        &c.pow(k as u32) / &factorial(k as u32)
                    } else {
                        Rat::zero()
                    }
                })
                .collect()
        }

        pub fn cosh(c: &Rat, n: usize) -> Vec<Rat> {
            (0..=n)
                .map(|k| {
                    if k % 2 == 0 {
                        &c.pow(k as u32) / &factorial(k as u32)
                    } else {
                        Rat::zero()
                    }
                })
                .collect()
        }
    }

    #[test]
    fn pk_base_and_low_rows() {
        let table = pk_table(4, 6, 10).unwrap();
        // row 0: only k=1 entry, equal to 1
        assert_eq!(table[0][1], JetPoly::one());
        for (k, p) in table[0].iter().enumerate() {
            if k != 1 {
                assert!(p.is_zero(), "row 0, k={k}");
            }
        }
        // row 1: P_0 = g0, P_2 = 1, others zero
        assert_eq!(table[1][0], JetPoly::var(0));
        assert_eq!(table[1][2], JetPoly::one());
        assert!(table[1][1].is_zero() && table[1][3].is_zero());
        // row 2: P_0 = g1, P_1 = 2 g0, P_3 = 2
        assert_eq!(table[2][0], JetPoly::var(1));
        assert_eq!(table[2][1], JetPoly::var(0).scale(&Rat::from_int(2)));
        assert_eq!(table[2][3], JetPoly::constant(Rat::from_int(2)));
        assert!(table[2][2].is_zero());
    }

    #[test]
    fn pk_degree_bound() {
        let table = pk_table(6, 9, 12).unwrap();
        for (n, row) in table.iter().enumerate() {
            for (k, p) in row.iter().enumerate() {
                if k > n + 1 {
                    assert!(p.is_zero(), "P_{k}^{n} should vanish");
                }
            }
        }
    }

    #[test]
    fn pk_depth_exhaustion_is_loud() {
        assert!(matches!(
            pk_table(5, 6, 2),
            Err(JetError::DepthExhausted { .. })
        ));
    }

    #[test]
    fn ode_leading_terms() {
        let sol = solve_phi_psi(&ctx()).unwrap();
        // psi = -h - (g0/3) h^3 - (g1/12) h^4 + ...
        assert_eq!(sol.psi.c[1], JetPoly::constant(-Rat::one()));
        assert!(sol.psi.c[2].is_zero());
        assert_eq!(sol.psi.c[3], JetPoly::var(0).scale(&Rat::new(-1, 3)));
        assert_eq!(sol.psi.c[4], JetPoly::var(1).scale(&Rat::new(-1, 12)));
        // phi = (g0/2) h^2 + (g1/6) h^3 + ...
        assert!(sol.phi.c[1].is_zero());
        assert_eq!(sol.phi.c[2], JetPoly::var(0).scale(&Rat::new(1, 2)));
        assert_eq!(sol.phi.c[3], JetPoly::var(1).scale(&Rat::new(1, 6)));
    }

    #[test]
    fn ode_resubstitution() {
        let c = ctx();
        let sol = solve_phi_psi(&c).unwrap();
        let g0 = {
            let mut s = JetSeries::zero(&c);
            s.c[0] = JetPoly::var(0);
            s
        };
        // d psi/dh - (D psi - 1 - g0 psi^2) = 0 through order n_h - 1
        let mut dpsi = JetSeries::zero(&c);
        for m in 0..c.n_h {
            dpsi.c[m] = sol.psi.c[m + 1].scale(&Rat::from_int(m as i64 + 1));
        }
        let mut rhs = sol.psi.apply_d(c.depth).unwrap();
        rhs.c[0] = rhs.c[0].sub(&JetPoly::one());
        rhs = rhs.sub(&g0.mul(&sol.psi.mul(&sol.psi)));
        let mut res = dpsi.sub(&rhs);
        res.c.truncate(c.n_h);
        assert!(res.is_zero(), "psi residual {:?}", res);

        let mut dphi = JetSeries::zero(&c);
        for m in 0..c.n_h {
            dphi.c[m] = sol.phi.c[m + 1].scale(&Rat::from_int(m as i64 + 1));
        }
        let mut rhs = sol.phi.apply_d(c.depth).unwrap();
        rhs = rhs.sub(&g0.mul(&sol.psi));
        let mut res = dphi.sub(&rhs);
        res.c.truncate(c.n_h);
        assert!(res.is_zero(), "phi residual {:?}", res);
    }

    #[test]
    fn constant_jet_closed_forms() {
        // with g0 = -1/4 and higher jets absent, the Riccati equation has
        // solution psi = -2 tanh(h/2) and phi = -log cosh(h/2)
        let c = JetCtx { n_h: 10, depth: 12 };
        let sol = solve_phi_psi(&c).unwrap();
        let quarter = Rat::new(-1, 4);
        let psi_vals = sol.psi.eval_constant_jet(&quarter);
        let phi_vals = sol.phi.eval_constant_jet(&quarter);

        let half = Rat::new(1, 2);
        let n = c.n_h;
        let sh = ps::sinh(&half, n);
        let ch = ps::cosh(&half, n);
        let tanh_half = ps::div(&sh, &ch);
        let minus2tanh: Vec<Rat> = tanh_half.iter().map(|r| &Rat::from_int(-2) * r).collect();
        assert_eq!(psi_vals, minus2tanh);

        let log_cosh = ps::log1p(&ch);
        let neg_log_cosh: Vec<Rat> = log_cosh.iter().map(|r| -r).collect();
        assert_eq!(phi_vals, neg_log_cosh);
    }

    #[test]
    fn parity_laws() {
        let c = JetCtx { n_h: 10, depth: 12 };
        let sol = solve_phi_psi(&c).unwrap();
        // phi(-h, (-1)^i g_i) = phi(h, g_i)
        let phi_flip = sol.phi.hbar_negate().parity_flip_vars();
        assert_eq!(phi_flip, sol.phi);
        // psi(-h, (-1)^i g_i) = -psi(h, g_i)
        let psi_flip = sol.psi.hbar_negate().parity_flip_vars();
        assert_eq!(psi_flip, sol.psi.neg());
    }

    #[test]
    fn u_transport_and_log_identity() {
        let c = JetCtx { n_h: 8, depth: 10 };
        let u = build_u(&c).unwrap();
        // u = h t + O(h^2) at t-power 1
        assert_eq!(u.tk[1].c[1], JetPoly::one());
        for r in u.transport_residual(&c).unwrap() {
            assert!(r.is_zero(), "transport residual {:?}", r);
        }

        // u equals phi - log(1 + t psi) per t-power
        let sol = solve_phi_psi(&c).unwrap();
        // log(1 + t psi) = sum_{k>=1} (-1)^(k+1) (t psi)^k / k
        let mut log_tk: Vec<JetSeries> = vec![JetSeries::zero(&c); u.tk.len()];
        let mut psi_pow = JetSeries::one(&c);
        for k in 1..u.tk.len() {
            psi_pow = psi_pow.mul(&sol.psi);
            let sign = if k % 2 == 1 { Rat::one() } else { -Rat::one() };
            log_tk[k] = psi_pow.scale(&(&sign / &Rat::from_int(k as i64)));
        }
        for k in 0..u.tk.len() {
            let expect = if k == 0 { sol.phi.clone() } else { log_tk[k].neg() };
            assert_eq!(u.tk[k], expect, "t-power {k}");
        }
    }

    #[test]
    fn psi0_leading() {
        let c = JetCtx { n_h: 8, depth: 10 };
        let sol = solve_phi_psi(&c).unwrap();
        // psi0 = (phi(h)-phi(-h))/2h starts at h^2 with the g1/6 coefficient
        assert!(sol.psi0.c[0].is_zero() && sol.psi0.c[1].is_zero());
        assert_eq!(sol.psi0.c[2], JetPoly::var(1).scale(&Rat::new(1, 6)));
    }
}
