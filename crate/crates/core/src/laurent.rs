//! Windowed Laurent series and per-point mode functions.
//!
//! A `LaurentWindow` stores the modes of a local Laurent expansion on
//! `[lo, hi]`. `lo` is a *true* support bound (everything below is genuinely
//! zero, which is what "finite principal part" gives us), while `hi` is a
//! truncation horizon: coefficients above it exist but are not tracked.
//! Window arithmetic keeps both honest: products add the true bounds and
//! shrink the horizon by the convolution-completeness rule.
//!
//! `INF` is a saturating stand-in for "exact in that direction".

use crate::coeff::{Coeff, Trunc};
use crate::rat::Rat;
use std::collections::BTreeMap;

/// Sentinel for unbounded window data (kept far from i64 overflow).
pub const INF: i64 = i64::MAX / 8;

pub fn sat_add(a: i64, b: i64) -> i64 {
    (a.saturating_add(b)).clamp(-INF, INF)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowError {
    pub what: String,
}

impl std::fmt::Display for WindowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "insufficient window: {}", self.what)
    }
}

impl std::error::Error for WindowError {}

/// Residue pairing data at one marked point: `<z^a, z^b> = weight * [a + b == s0]`.
#[derive(Clone, Copy, Debug)]
pub struct ResPairing {
    pub s0: i64,
    pub weight: i64,
}

/// One-point windowed Laurent series.
#[derive(Clone, PartialEq)]
pub struct LaurentWindow {
    /// True lower support bound.
    pub lo: i64,
    /// Truncation horizon: all modes in `lo..=hi` are stored exactly.
    pub hi: i64,
    coeffs: BTreeMap<i64, Coeff>,
}

impl LaurentWindow {
    /// The zero series, exact everywhere.
    pub fn zero() -> Self {
        LaurentWindow { lo: INF, hi: INF, coeffs: BTreeMap::new() }
    }

    /// Single mode `c * z^m`, exact everywhere.
    pub fn monomial(m: i64, c: Coeff) -> Self {
        let mut s = LaurentWindow::zero();
        if !c.is_zero() {
            s.lo = m;
            s.coeffs.insert(m, c);
        }
        s
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, m: i64, t: &Trunc) -> Coeff {
        self.coeffs.get(&m).cloned().unwrap_or_else(|| Coeff::zero(t))
    }

    pub fn modes(&self) -> impl Iterator<Item = (&i64, &Coeff)> {
        self.coeffs.iter()
    }

    pub fn set(&mut self, m: i64, c: Coeff) {
        if c.is_zero() {
            self.coeffs.remove(&m);
        } else {
            self.lo = self.lo.min(m);
            self.coeffs.insert(m, c);
        }
    }

    pub fn add_mode(&mut self, m: i64, c: &Coeff, t: &Trunc) {
        let cur = self.coeff(m, t);
        let s = cur.add(c, t);
        self.lo = self.lo.min(m);
        if s.is_zero() {
            self.coeffs.remove(&m);
        } else {
            self.coeffs.insert(m, s);
        }
    }

    /// Declare a horizon (narrowing only) and drop stored modes above it.
    pub fn truncate_hi(mut self, hi: i64) -> Self {
        self.hi = self.hi.min(hi);
        let keep = self.hi;
        self.coeffs.retain(|m, _| *m <= keep);
        self
    }

    pub fn add(&self, o: &LaurentWindow, t: &Trunc) -> LaurentWindow {
        let mut r = LaurentWindow {
            lo: self.lo.min(o.lo),
            hi: self.hi.min(o.hi),
            coeffs: self.coeffs.clone(),
        };
        for (m, c) in &o.coeffs {
            if *m <= r.hi {
                let cur = r.coeffs.remove(m).unwrap_or_else(|| Coeff::zero(t));
                let s = cur.add(c, t);
                if !s.is_zero() {
                    r.coeffs.insert(*m, s);
                }
            }
        }
        r.coeffs.retain(|m, _| *m <= r.hi);
        r
    }

    pub fn neg(&self) -> LaurentWindow {
        let mut r = self.clone();
        for v in r.coeffs.values_mut() {
            *v = v.neg();
        }
        r
    }

    pub fn scale(&self, s: &Coeff, t: &Trunc) -> LaurentWindow {
        let mut r = LaurentWindow { lo: self.lo, hi: self.hi, coeffs: BTreeMap::new() };
        for (m, c) in &self.coeffs {
            let p = c.mul(s, t);
            if !p.is_zero() {
                r.coeffs.insert(*m, p);
            }
        }
        r
    }

    pub fn scale_rat(&self, s: &Rat) -> LaurentWindow {
        let mut r = LaurentWindow { lo: self.lo, hi: self.hi, coeffs: BTreeMap::new() };
        for (m, c) in &self.coeffs {
            let p = c.scale(s);
            if !p.is_zero() {
                r.coeffs.insert(*m, p);
            }
        }
        r
    }

    /// Truncated product with the completeness rule
    /// `hi = min(a.hi + b.lo, b.hi + a.lo)`.
    pub fn mul(&self, o: &LaurentWindow, t: &Trunc) -> LaurentWindow {
        let lo = sat_add(self.lo, o.lo);
        let hi = sat_add(self.hi, o.lo).min(sat_add(o.hi, self.lo));
        let mut r = LaurentWindow { lo, hi, coeffs: BTreeMap::new() };
        for (ma, ca) in &self.coeffs {
            for (mb, cb) in &o.coeffs {
                let m = ma + mb;
                if m > hi {
                    continue;
                }
                let p = ca.mul(cb, t);
                if !p.is_zero() {
                    let cur = r.coeffs.remove(&m).unwrap_or_else(|| Coeff::zero(t));
                    let s = cur.add(&p, t);
                    if !s.is_zero() {
                        r.coeffs.insert(m, s);
                    }
                }
            }
        }
        r
    }

    /// Shift all modes by `k` (multiplication by `z^k`).
    pub fn shift(&self, k: i64) -> LaurentWindow {
        LaurentWindow {
            lo: sat_add(self.lo, k),
            hi: sat_add(self.hi, k),
            coeffs: self.coeffs.iter().map(|(m, c)| (m + k, c.clone())).collect(),
        }
    }

    /// Apply a mode-wise map `m -> factor(m)` (diagonal operator).
    pub fn map_modes(&self, mut f: impl FnMut(i64, &Coeff) -> Coeff) -> LaurentWindow {
        let mut r = LaurentWindow { lo: self.lo, hi: self.hi, coeffs: BTreeMap::new() };
        for (m, c) in &self.coeffs {
            let v = f(*m, c);
            if !v.is_zero() {
                r.coeffs.insert(*m, v);
            }
        }
        r
    }

    /// Exact mismatch against another window on the common trusted range.
    pub fn mismatch(&self, o: &LaurentWindow, t: &Trunc) -> Option<(i64, Coeff, Coeff)> {
        let hi = self.hi.min(o.hi);
        let keys: std::collections::BTreeSet<i64> =
            self.coeffs.keys().chain(o.coeffs.keys()).cloned().collect();
        for m in keys {
            if m > hi {
                continue;
            }
            let a = self.coeff(m, t);
            let b = o.coeff(m, t);
            if !a.eq_valid(&b) {
                return Some((m, a, b));
            }
        }
        None
    }
}

impl std::fmt::Debug for LaurentWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LW[lo={},hi={}]{{", self.lo, self.hi)?;
        for (m, c) in &self.coeffs {
            write!(f, " z^{m}:({c:?})")?;
        }
        write!(f, " }}")
    }
}

/// Element of the direct sum of local fields: one windowed expansion per
/// marked point.
#[derive(Clone, PartialEq, Debug)]
pub struct ModeFunction {
    pub per_point: Vec<LaurentWindow>,
}

impl ModeFunction {
    pub fn zero(points: usize) -> Self {
        ModeFunction { per_point: vec![LaurentWindow::zero(); points] }
    }

    /// Single local mode at one point.
    pub fn local_mode(points: usize, p: usize, m: i64, c: Coeff) -> Self {
        let mut f = ModeFunction::zero(points);
        f.per_point[p] = LaurentWindow::monomial(m, c);
        f
    }

    pub fn points(&self) -> usize {
        self.per_point.len()
    }

    pub fn is_zero(&self) -> bool {
        self.per_point.iter().all(|w| w.is_zero())
    }

    pub fn add(&self, o: &ModeFunction, t: &Trunc) -> ModeFunction {
        ModeFunction {
            per_point: self
                .per_point
                .iter()
                .zip(&o.per_point)
                .map(|(a, b)| a.add(b, t))
                .collect(),
        }
    }

    pub fn sub(&self, o: &ModeFunction, t: &Trunc) -> ModeFunction {
        self.add(&o.neg(), t)
    }

    pub fn neg(&self) -> ModeFunction {
        ModeFunction { per_point: self.per_point.iter().map(|w| w.neg()).collect() }
    }

    pub fn scale(&self, s: &Coeff, t: &Trunc) -> ModeFunction {
        ModeFunction { per_point: self.per_point.iter().map(|w| w.scale(s, t)).collect() }
    }

    pub fn scale_rat(&self, s: &Rat) -> ModeFunction {
        ModeFunction { per_point: self.per_point.iter().map(|w| w.scale_rat(s)).collect() }
    }

    /// Pointwise product (functions multiply componentwise at each point).
    pub fn mul(&self, o: &ModeFunction, t: &Trunc) -> ModeFunction {
        ModeFunction {
            per_point: self
                .per_point
                .iter()
                .zip(&o.per_point)
                .map(|(a, b)| a.mul(b, t))
                .collect(),
        }
    }

    pub fn mismatch(&self, o: &ModeFunction, t: &Trunc) -> Option<(usize, i64, Coeff, Coeff)> {
        for (p, (a, b)) in self.per_point.iter().zip(&o.per_point).enumerate() {
            if let Some((m, x, y)) = a.mismatch(b, t) {
                return Some((p, m, x, y));
            }
        }
        None
    }

    pub fn eq_window(&self, o: &ModeFunction, t: &Trunc) -> bool {
        self.mismatch(o, t).is_none()
    }
}

/// Residue pairing `<f, g> = sum_p w_p * sum_j f_p[j] g_p[s0 - j]`.
/// Errors when a window is too narrow to capture every contribution.
pub fn pair(
    f: &ModeFunction,
    g: &ModeFunction,
    pairing: &[ResPairing],
    t: &Trunc,
) -> Result<Coeff, WindowError> {
    let mut acc = Coeff::zero(t);
    for (p, pr) in pairing.iter().enumerate() {
        let (fw, gw) = (&f.per_point[p], &g.per_point[p]);
        if fw.is_zero() || gw.is_zero() {
            continue;
        }
        // contributions j in [fw.lo, s0 - gw.lo]; all must be stored
        if sat_add(pr.s0, -gw.lo) > fw.hi || sat_add(pr.s0, -fw.lo) > gw.hi {
            return Err(WindowError {
                what: format!(
                    "pairing at point {p}: windows f=[{},{}] g=[{},{}] s0={}",
                    fw.lo, fw.hi, gw.lo, gw.hi, pr.s0
                ),
            });
        }
        let w = Rat::from_int(pr.weight);
        for (j, c) in fw.modes() {
            let gj = gw.coeff(pr.s0 - j, t);
            if !gj.is_zero() {
                acc = acc.add(&c.mul(&gj, t).scale(&w), t);
            }
        }
    }
    Ok(acc)
}
