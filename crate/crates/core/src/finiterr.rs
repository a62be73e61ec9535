//! Finite elements of R (x) R: coefficient matrices over pairs of function
//! ring basis indices, with exact extraction from kernels, leg-wise
//! derivation action, and expansion back to two-variable kernels.
//!
//! Membership of a kernel in R (x) R is certified constructively: contract
//! both legs against the complement basis to get candidate coefficients,
//! re-expand, and subtract. A zero residual on the validity window certifies
//! membership at that window.

use crate::coeff::{Coeff, Trunc};
use crate::curve::{CurveModel, ModelError};
use crate::kernel::{Kernel2, Mismatch, Region, VBox};
use crate::laurent::{ModeFunction, INF};
use crate::opseries::{BivarOp, OpSeries};
use crate::rat::Rat;
use std::collections::BTreeMap;

/// `sum_{ij} c[(i,j)] e^i (x) e^j` with basis indices of the ambient model.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct FiniteRR {
    pub c: BTreeMap<(usize, usize), Coeff>,
}

impl FiniteRR {
    pub fn zero() -> FiniteRR {
        FiniteRR::default()
    }

    pub fn from_dyad(i: usize, j: usize, v: Coeff) -> FiniteRR {
        let mut f = FiniteRR::zero();
        if !v.is_zero() {
            f.c.insert((i, j), v);
        }
        f
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    pub fn add_term(&mut self, key: (usize, usize), v: &Coeff, t: &Trunc) {
        if v.is_zero() {
            return;
        }
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

    pub fn add(&self, o: &FiniteRR, t: &Trunc) -> FiniteRR {
        let mut r = self.clone();
        for (k, v) in &o.c {
            r.add_term(*k, v, t);
        }
        r
    }

    pub fn sub(&self, o: &FiniteRR, t: &Trunc) -> FiniteRR {
        self.add(&o.neg(), t)
    }

    pub fn neg(&self) -> FiniteRR {
        FiniteRR { c: self.c.iter().map(|(k, v)| (*k, v.neg())).collect() }
    }

    pub fn scale(&self, s: &Coeff, t: &Trunc) -> FiniteRR {
        let mut r = FiniteRR::zero();
        for (k, v) in &self.c {
            let p = v.mul(s, t);
            if !p.is_zero() {
                r.c.insert(*k, p);
            }
        }
        r
    }

    pub fn scale_rat(&self, s: &Rat) -> FiniteRR {
        let mut r = FiniteRR::zero();
        for (k, v) in &self.c {
            let p = v.scale(s);
            if !p.is_zero() {
                r.c.insert(*k, p);
            }
        }
        r
    }

    /// Transpose of the two legs (the tilde operation on finite elements).
    pub fn transpose(&self) -> FiniteRR {
        FiniteRR { c: self.c.iter().map(|((i, j), v)| ((*j, *i), v.clone())).collect() }
    }

    pub fn is_antisymmetric(&self, t: &Trunc) -> bool {
        self.add(&self.transpose(), t).is_zero()
    }

    /// Leg-wise derivation via the stored basis matrix `d e^i = sum a[i][j] e^j`.
    /// Errors if the support would run past the stored index window.
    pub fn d_leg(&self, leg: usize, model: &CurveModel, t: &Trunc) -> Result<FiniteRR, ModelError> {
        let top = model.idx.len() - 1;
        let mut r = FiniteRR::zero();
        for ((i, j), v) in &self.c {
            let src = if leg == 0 { *i } else { *j };
            if src >= top {
                return Err(ModelError::Invariant(format!(
                    "derivation on R-basis index {src} exceeds the stored window (margin exhausted)"
                )));
            }
            for (k, a) in &model.a_mat[src] {
                let key = if leg == 0 { (*k, *j) } else { (*i, *k) };
                r.add_term(key, &v.mul(a, t), t);
            }
        }
        Ok(r)
    }

    /// Apply a bivariate operator series in the two leg derivations.
    pub fn apply_bivar(
        &self,
        op: &BivarOp,
        model: &CurveModel,
        t: &Trunc,
    ) -> Result<FiniteRR, ModelError> {
        // group by x-power: compute d_z^a once, then walk d_w^b
        let a_max = op.c.keys().map(|(a, _)| *a).max().unwrap_or(0);
        let b_max = op.c.keys().map(|(_, b)| *b).max().unwrap_or(0);
        let mut out = FiniteRR::zero();
        let mut xa = self.clone();
        for a in 0..=a_max {
            if a > 0 {
                xa = xa.d_leg(0, model, t)?;
            }
            let mut xab = xa.clone();
            for b in 0..=b_max {
                if b > 0 {
                    xab = xab.d_leg(1, model, t)?;
                }
                if let Some(c) = op.c.get(&(a, b)) {
                    out = out.add(&xab.scale(c, t), t);
                }
            }
        }
        Ok(out)
    }

    /// Apply a univariate operator series to one leg.
    pub fn apply_op_leg(
        &self,
        leg: usize,
        op: &OpSeries,
        model: &CurveModel,
        t: &Trunc,
    ) -> Result<FiniteRR, ModelError> {
        let mut out = self.scale(&op.c[0], t);
        let mut cur = self.clone();
        for j in 1..=op.max_power() {
            cur = cur.d_leg(leg, model, t)?;
            if !op.c[j].is_zero() {
                out = out.add(&cur.scale(&op.c[j], t), t);
            }
        }
        Ok(out)
    }

    /// Expand to a `Finite`-region kernel using the model's stored basis
    /// expansions.
    pub fn expand(&self, model: &CurveModel) -> Kernel2 {
        let t = &model.trunc;
        let max_pole = model.idx.len() as i64 + 1;
        let vb = VBox {
            m: crate::kernel::Axis { lo: -max_pole, hi: model.mode_hi },
            n: crate::kernel::Axis { lo: -max_pole, hi: model.mode_hi },
            s: crate::kernel::Axis { lo: -2 * max_pole, hi: INF },
        };
        // trust on s is limited by the leg horizons; contains() combines
        // m/n constraints so an explicit s cap is redundant here
        model.kernel_from_dyads(
            Region::Finite,
            self.c
                .iter()
                .map(|((i, j), v)| (model.r_basis[*i].clone(), model.r_basis[*j].clone(), v.clone())),
            vb,
        )
    }

    /// Contract against a pair of mode functions:
    /// `sum c_ij <e^i, f> <e^j, g>`.
    pub fn pair_both(
        &self,
        f: &ModeFunction,
        g: &ModeFunction,
        model: &CurveModel,
        t: &Trunc,
    ) -> Result<Coeff, ModelError> {
        let mut acc = Coeff::zero(t);
        for ((i, j), v) in &self.c {
            let a = model.pair2(&model.r_basis[*i], f)?;
            if a.is_zero() {
                continue;
            }
            let b = model.pair2(&model.r_basis[*j], g)?;
            if b.is_zero() {
                continue;
            }
            acc = acc.add(&v.mul(&a, t).mul(&b, t), t);
        }
        Ok(acc)
    }

    /// Contract the given leg against a mode function, returning the other
    /// leg as a basis-coefficient vector.
    pub fn contract_leg(
        &self,
        leg: usize,
        f: &ModeFunction,
        model: &CurveModel,
        t: &Trunc,
    ) -> Result<Vec<Coeff>, ModelError> {
        let mut out = vec![Coeff::zero(t); model.idx.len()];
        for ((i, j), v) in &self.c {
            let (con, keep) = if leg == 0 { (*i, *j) } else { (*j, *i) };
            let a = model.pair2(&model.r_basis[con], f)?;
            if !a.is_zero() {
                out[keep] = out[keep].add(&v.mul(&a, t), t);
            }
        }
        Ok(out)
    }

    /// The mode function `sum_i (sum_j c_ij <e^j, f>) e^i` (leg-2 contraction
    /// re-assembled on leg 1).
    pub fn contract_leg2_to_mode(
        &self,
        f: &ModeFunction,
        model: &CurveModel,
        t: &Trunc,
    ) -> Result<ModeFunction, ModelError> {
        let coeffs = self.contract_leg(1, f, model, t)?;
        let mut acc = ModeFunction::zero(model.points);
        for w in acc.per_point.iter_mut() {
            w.hi = model.mode_hi;
        }
        for (i, c) in coeffs.iter().enumerate() {
            if !c.is_zero() {
                acc = acc.add(&model.r_basis[i].scale(c, t), t);
            }
        }
        Ok(acc)
    }

    /// Evaluate on the diagonal: the one-variable series `sum c_ij e^i e^j (z)`.
    pub fn diagonal(&self, model: &CurveModel) -> Result<Vec<crate::laurent::LaurentWindow>, ModelError> {
        let k = self.expand(model);
        let mut out = Vec::new();
        for p in 0..model.points {
            out.push(k.diag_component(p, &model.trunc)?);
        }
        Ok(out)
    }
}

/// Result of extracting the finite part of a kernel.
pub struct Extraction {
    pub element: FiniteRR,
    /// Residual kernel (input minus re-expansion); zero on the window iff
    /// the kernel is a finite element there.
    pub residual: Kernel2,
}

impl Extraction {
    pub fn certified(&self, t: &Trunc) -> Result<(), Mismatch> {
        match self.residual.mismatch(&Kernel2::zero(self.residual.points, self.residual.region), t)
        {
            None => Ok(()),
            Some(m) => Err(m),
        }
    }
}

/// Extract the candidate finite element of a kernel by pairing both legs
/// against the complement basis, then certify by re-expansion.
pub fn extract_rr(k: &Kernel2, model: &CurveModel) -> Result<Extraction, ModelError> {
    let t = &model.trunc;
    let mut element = FiniteRR::zero();
    for (j, lj) in model.l_basis.iter().enumerate() {
        // contract leg 2 first to keep windows wide
        let leg1 = k.contract_leg2(lj, &model.pairing, t)?;
        if leg1.is_zero() {
            continue;
        }
        for (i, li) in model.l_basis.iter().enumerate() {
            let v = crate::laurent::pair(&leg1, li, &model.pairing, t)?;
            if !v.is_zero() {
                element.c.insert((i, j), v);
            }
        }
    }
    let residual = k.sub(&element.expand(model), t);
    Ok(Extraction { element, residual })
}
