//! Disjoint non-Δ₂ sequences and the ℓ^∞ / ℓ¹ embeddings built from them.

use std::collections::BTreeMap;

use super::{Check, Combination, Evaluator, ProbeError, Quantity, Relation, WitnessKind, WitnessSequence};
use crate::conditions::{conjugate_delta2_verdict, delta2_verdict, Approach, Localization, Status};
use crate::function_rep::{Domain, PiecewiseFunction};
use crate::mo_function::{Conjugate, MoFunction, MusielakOrlicz};
use crate::norms::{modular_value, orlicz_norm, NormConfig};
use crate::operators::{volterra_certificate, BoundednessCertificate};

/// `I(f_n) ≤ 2^{-n}` together with `I((1+η) f_n) > 1` certifies `‖f_n‖ ≥ 1/(1+η)`.
pub const NON_DELTA2_ETA: f64 = 0.05;
/// Preferred norm deficit: `‖f_n‖ ≥ 1 − TIGHT` when the chain reaches far enough.
const TIGHT: f64 = 1e-9;
const CHAIN_LEN: usize = 128;

/// `height · χ_(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Block {
    lo: f64,
    hi: f64,
    height: f64,
    chain_index: usize,
}

impl Block {
    fn function(&self, dom: &Domain) -> Result<PiecewiseFunction, ProbeError> {
        Ok(PiecewiseFunction::indicator(dom.alpha, dom.beta, self.lo, self.hi, self.height)?)
    }
}

/// Disjoint intervals `(x ∓ r 2^{-j}, x ∓ r 2^{-j-1})` accumulating at the localization point.
fn chain(dom: &Domain, loc: &Localization) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let sign = match loc.approach {
        Approach::FromLeft => -1.0,
        Approach::FromRight => 1.0,
    };
    let r = loc.radius.min(dom.length()).max(0.0);
    for j in 0..CHAIN_LEN {
        let a = loc.x + sign * r * 0.5f64.powi(j as i32);
        let b = loc.x + sign * r * 0.5f64.powi(j as i32 + 1);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if !(lo < hi) || lo < dom.alpha || hi > dom.beta || lo == loc.x || hi == loc.x {
            break;
        }
        out.push((lo, hi));
    }
    out
}

fn block_modular(phi: &dyn MusielakOrlicz, lo: f64, hi: f64, s: f64) -> Result<f64, ProbeError> {
    let d = phi.domain();
    let f = PiecewiseFunction::indicator(d.alpha, d.beta, lo, hi, s)?;
    Ok(modular_value(phi, &f, 1.0)?)
}

/// Bracket `[s_lo, s_hi]` around the height with `I(s χ) = 1`.
fn unit_level(phi: &dyn MusielakOrlicz, lo: f64, hi: f64) -> Result<Option<(f64, f64)>, ProbeError> {
    let m = |s: f64| block_modular(phi, lo, hi, s);
    let (mut a, mut b) = (1.0f64, 1.0f64);
    if m(1.0)? > 1.0 {
        for _ in 0..1100 {
            a *= 0.5;
            if a == 0.0 {
                return Ok(None);
            }
            if m(a)? <= 1.0 {
                break;
            }
            b = a;
        }
    } else {
        for _ in 0..1100 {
            b *= 2.0;
            if !b.is_finite() {
                return Ok(None);
            }
            if m(b)? > 1.0 {
                break;
            }
            a = b;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if m(mid)? <= 1.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Some((a, b)))
}

/// Pick disjoint blocks along the chain with `I(f_n) ≤ 2^{-n}` and `I((1+η) f_n) > 1`,
/// preferring heights within `TIGHT` of the unit level.
fn build_blocks(phi: &dyn MusielakOrlicz, loc: &Localization, n: usize) -> Result<Vec<Block>, ProbeError> {
    let dom = phi.domain();
    let links = chain(dom, loc);
    let mut levels: Vec<Option<Option<(f64, f64)>>> = vec![None; links.len()];
    let mut level = |j: usize| -> Result<Option<(f64, f64)>, ProbeError> {
        if levels[j].is_none() {
            levels[j] = Some(unit_level(phi, links[j].0, links[j].1)?);
        }
        Ok(levels[j].unwrap())
    };
    let mut blocks = Vec::with_capacity(n);
    let mut next = 0usize;
    for k in 1..=n {
        let target = 0.5f64.powi(k as i32);
        let mut found = None;
        for tight in [true, false] {
            for j in next..links.len() {
                let Some((s_lo, s_hi)) = level(j)? else { continue };
                let s = if tight { s_lo * (1.0 - TIGHT) } else { s_hi / (1.0 + NON_DELTA2_ETA) * (1.0 + 1e-9) };
                let (lo, hi) = links[j];
                if block_modular(phi, lo, hi, s)? <= target
                    && block_modular(phi, lo, hi, (1.0 + NON_DELTA2_ETA) * s)? > 1.0
                {
                    found = Some(Block { lo, hi, height: s, chain_index: j });
                    break;
                }
            }
            if found.is_some() {
                break;
            }
        }
        let Some(b) = found else {
            return Err(ProbeError::ConstructionFailed {
                reason: format!("no chain interval gives I(f_{k}) ≤ 2^-{k} with I(1.05 f_{k}) > 1"),
                best: None,
            });
        };
        next = b.chain_index + 1;
        blocks.push(b);
    }
    Ok(blocks)
}

fn localization(v: &crate::conditions::ConditionVerdict, what: &str) -> Result<Localization, ProbeError> {
    match (v.status, v.witness) {
        (Status::Fails, Some(w)) => Ok(w),
        (Status::Fails, None) => Err(ProbeError::Precondition(format!("{what} fails but no localization is known"))),
        (s, _) => Err(ProbeError::Precondition(format!("{what} is {s}, a failure is required"))),
    }
}

/// Checks of the non-Δ₂ certificate pair for `members[offset + n]`, optionally on derivatives.
fn non_delta2_checks(
    ev: &Evaluator,
    n: usize,
    offset: usize,
    derivative: bool,
    conjugate: bool,
) -> Result<Vec<Check>, ProbeError> {
    let mut checks = Vec::new();
    let of = |i: usize| Combination { terms: vec![(offset + i, 1.0)], derivative };
    for i in 0..n {
        let target = 0.5f64.powi(i as i32 + 1);
        checks.push(ev.check(
            "modular-bound",
            Some(i),
            Quantity::Modular { of: of(i), scale: 1.0, conjugate },
            Relation::Le,
            Quantity::Constant { value: target },
            0.0,
        )?);
        checks.push(ev.check(
            "scaled-modular-exceeds-one",
            Some(i),
            Quantity::Modular { of: of(i), scale: 1.0 + NON_DELTA2_ETA, conjugate },
            Relation::Gt,
            Quantity::Constant { value: 1.0 },
            0.0,
        )?);
    }
    for i in 0..n {
        for j in i + 1..n {
            checks.push(ev.check(
                "disjoint-supports",
                Some(i),
                Quantity::SupportOverlap { i: offset + i, j: offset + j, derivative },
                Relation::Le,
                Quantity::Constant { value: 0.0 },
                0.0,
            )?);
        }
    }
    let all = Combination { terms: (0..n).map(|i| (offset + i, 1.0)).collect(), derivative };
    checks.push(ev.check(
        "sum-modular-bound",
        None,
        Quantity::Modular { of: all.clone(), scale: 1.0, conjugate },
        Relation::Le,
        Quantity::Constant { value: 1.0 },
        0.0,
    )?);
    checks.push(ev.check(
        "sum-scaled-modular-exceeds-one",
        None,
        Quantity::Modular { of: all, scale: 1.0 + NON_DELTA2_ETA, conjugate },
        Relation::Gt,
        Quantity::Constant { value: 1.0 },
        0.0,
    )?);
    Ok(checks)
}

fn block_parameters(blocks: &[Block], prefix: &str) -> BTreeMap<String, f64> {
    let mut p = BTreeMap::new();
    for (i, b) in blocks.iter().enumerate() {
        p.insert(format!("{prefix}lo_{}", i + 1), b.lo);
        p.insert(format!("{prefix}hi_{}", i + 1), b.hi);
        p.insert(format!("{prefix}height_{}", i + 1), b.height);
    }
    p
}

/// Disjoint nonnegative steps `f_1..f_N` with `I_Φ(f_n) ≤ 2^{-n}` and `‖f_n‖_Φ ≥ 1/1.05`.
pub fn non_delta2_witness(phi: &MoFunction, n: usize) -> Result<WitnessSequence, ProbeError> {
    if n == 0 {
        return Err(ProbeError::Precondition("N must be at least 1".into()));
    }
    let loc = localization(&delta2_verdict(phi), "Δ₂")?;
    let blocks = build_blocks(phi, &loc, n)?;
    let dom = phi.domain();
    let members = blocks.iter().map(|b| b.function(dom)).collect::<Result<Vec<_>, _>>()?;
    let ev = Evaluator::new(phi, &members);
    let checks = non_delta2_checks(&ev, n, 0, false, false)?;
    let mut parameters = block_parameters(&blocks, "");
    parameters.insert("eta".into(), NON_DELTA2_ETA);
    Ok(WitnessSequence { kind: WitnessKind::NonDelta2, truncation: n, members, parameters, checks })
}

fn norm_tol(scale: f64) -> f64 {
    NormConfig::default().rel_tol * scale.max(1.0)
}

/// Antiderivatives `g_k` of a non-Δ₂ sequence with the Volterra constant.
#[derive(Debug, Clone)]
pub struct LinfEmbedding {
    pub base: WitnessSequence,
    pub certificate: BoundednessCertificate,
    pub g: Vec<PiecewiseFunction>,
}

impl LinfEmbedding {
    pub fn build(phi: &MoFunction, n: usize) -> Result<Self, ProbeError> {
        let certificate = volterra_certificate(phi)?;
        let base = non_delta2_witness(phi, n)?;
        let g = base.members.iter().map(|f| f.antiderivative()).collect();
        Ok(LinfEmbedding { base, certificate, g })
    }

    /// The constant `l` of the sandwich: the Volterra norm bound.
    pub fn l(&self) -> f64 {
        self.certificate.bound_on_norm
    }

    /// Certify `‖a‖_∞ ≤ ‖Σ a_k g_k‖_{1,Φ} ≤ (1+l)‖a‖_∞`.
    pub fn certify(&self, phi: &MoFunction, a: &[f64]) -> Result<WitnessSequence, ProbeError> {
        let n = self.g.len();
        if a.len() != n {
            return Err(ProbeError::Precondition(format!("{} coefficients for {n} members", a.len())));
        }
        let members = self.g.clone();
        let ev = Evaluator::new(phi, &members);
        let mut checks = non_delta2_checks(&ev, n, 0, true, false)?;
        let sup = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let l = self.l();
        let sum = Combination::of(a.iter().copied().enumerate().collect(), false);
        let tol = norm_tol(sup);
        checks.push(ev.check(
            "lower-sandwich",
            None,
            Quantity::Sobolev { of: sum.clone() },
            Relation::Ge,
            Quantity::Constant { value: sup },
            tol,
        )?);
        checks.push(ev.check(
            "upper-sandwich",
            None,
            Quantity::Sobolev { of: sum },
            Relation::Le,
            Quantity::Constant { value: (1.0 + l) * sup },
            tol,
        )?);
        let mut parameters = self.base.parameters.clone();
        parameters.insert("l".into(), l);
        for (i, v) in a.iter().enumerate() {
            parameters.insert(format!("a_{}", i + 1), *v);
        }
        Ok(WitnessSequence { kind: WitnessKind::LinfEmbed, truncation: n, members, parameters, checks })
    }
}

pub fn linf_embedding(phi: &MoFunction, n: usize, a: &[f64]) -> Result<WitnessSequence, ProbeError> {
    LinfEmbedding::build(phi, n)?.certify(phi, a)
}

/// Dual non-Δ₂ sequence `f_k` for `Φ*`, near-norming `g_k` and `h_k = ∫g_k`.
#[derive(Debug, Clone)]
pub struct L1Embedding {
    pub certificate: BoundednessCertificate,
    pub eps_dual: f64,
    pub f: Vec<PiecewiseFunction>,
    pub g: Vec<PiecewiseFunction>,
    pub h: Vec<PiecewiseFunction>,
    parameters: BTreeMap<String, f64>,
}

/// Nonnegative `g` on the block with `I_Φ(g) ≤ 1` and `∫ f g ≥ ‖f‖⁰_{Φ*} − tol`,
/// from `g = (Φ*)'(x, θ)` on `m` subcells.
fn near_norming(phi: &MoFunction, f: &PiecewiseFunction, b: &Block, tol: f64) -> Result<(PiecewiseFunction, f64), ProbeError> {
    let dom = phi.domain();
    let cfg = NormConfig::default();
    let dual = orlicz_norm(&Conjugate(phi), f, &cfg)?.value;
    let mut best = f64::NEG_INFINITY;
    // a flat g is close to optimal when Φ barely varies across the block
    let level = |tau: f64| -> Result<f64, ProbeError> {
        Ok(modular_value(phi, &PiecewiseFunction::indicator(dom.alpha, dom.beta, b.lo, b.hi, tau)?, 1.0)?)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while level(hi)? <= 1.0 && hi < 1e300 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if level(mid)? <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let flat = PiecewiseFunction::indicator(dom.alpha, dom.beta, b.lo, b.hi, lo)?;
    let pairing = f.inner(&flat)?;
    if pairing >= dual - tol {
        return Ok((flat, pairing));
    }
    best = best.max(pairing);
    for m in [16usize, 64, 256, 1024] {
        let bps: Vec<f64> = (0..=m).map(|i| b.lo + (b.hi - b.lo) * i as f64 / m as f64).collect();
        let mids: Vec<f64> = bps.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let build = |theta: f64| -> Result<PiecewiseFunction, ProbeError> {
            let mut full = vec![dom.alpha];
            let mut vals = vec![0.0];
            for (w, &x) in bps.windows(2).zip(&mids) {
                let v = phi.conjugate_derivative(x, theta);
                vals.push(if v.is_finite() { v } else { 0.0 });
                let _ = w;
            }
            full.extend(bps.iter().copied());
            vals.push(0.0);
            full.push(dom.beta);
            // drop degenerate cells at the domain ends
            let mut p = Vec::new();
            let mut v = Vec::new();
            for i in 0..full.len() - 1 {
                if full[i + 1] > full[i] {
                    if p.is_empty() {
                        p.push(full[i]);
                    }
                    p.push(full[i + 1]);
                    v.push(vals[i]);
                }
            }
            Ok(PiecewiseFunction::step(p, &v)?)
        };
        let modular = |theta: f64| -> Result<f64, ProbeError> { Ok(modular_value(phi, &build(theta)?, 1.0)?) };
        // I_Φ(g(θ)) is nondecreasing in θ; take the largest θ with modular ≤ 1
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while modular(hi)? <= 1.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                break;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if modular(mid)? <= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let g = build(lo)?;
        let pairing = f.inner(&g)?;
        best = best.max(pairing);
        if pairing >= dual - tol {
            return Ok((g, pairing));
        }
    }
    Err(ProbeError::ConstructionFailed {
        reason: format!("near-norming pairing {best} stays below ‖f‖⁰ − {tol} = {}", dual - tol),
        best: Some(best),
    })
}

impl L1Embedding {
    pub fn build(phi: &MoFunction, n: usize, eps_dual: f64) -> Result<Self, ProbeError> {
        if !(eps_dual > 0.0) {
            return Err(ProbeError::Precondition("ε_dual must be positive".into()));
        }
        let loc = localization(&conjugate_delta2_verdict(phi), "Δ₂ of the conjugate")?;
        let certificate = volterra_certificate(phi)?;
        let conj = Conjugate(phi);
        let blocks = build_blocks(&conj, &loc, n)?;
        let dom = phi.domain();
        let mut f = Vec::with_capacity(n);
        let mut g = Vec::with_capacity(n);
        for (k, b) in blocks.iter().enumerate() {
            let fk = b.function(dom)?;
            let (gk, _) = near_norming(phi, &fk, b, eps_dual * 0.5f64.powi(k as i32 + 1))?;
            f.push(fk);
            g.push(gk);
        }
        let h = g.iter().map(|x| x.antiderivative()).collect();
        let parameters = block_parameters(&blocks, "dual_");
        Ok(L1Embedding { certificate, eps_dual, f, g, h, parameters })
    }

    pub fn l(&self) -> f64 {
        self.certificate.bound_on_norm
    }

    /// Certify `½(‖a‖₁ − ε) ≤ ‖Σ a_k h_k‖_{1,Φ} ≤ (1+l)‖a‖₁`.
    pub fn certify(&self, phi: &MoFunction, a: &[f64]) -> Result<WitnessSequence, ProbeError> {
        let n = self.h.len();
        if a.len() != n {
            return Err(ProbeError::Precondition(format!("{} coefficients for {n} members", a.len())));
        }
        let mut members = self.h.clone();
        members.extend(self.f.iter().cloned());
        let ev = Evaluator::new(phi, &members);
        let mut checks = non_delta2_checks(&ev, n, n, false, true)?;
        for k in 0..n {
            let tol_k = self.eps_dual * 0.5f64.powi(k as i32 + 1);
            checks.push(ev.check(
                "near-norming-modular",
                Some(k),
                Quantity::Modular { of: Combination::derivative_of(k), scale: 1.0, conjugate: false },
                Relation::Le,
                Quantity::Constant { value: 1.0 },
                0.0,
            )?);
            checks.push(ev.check(
                "near-norming-pairing",
                Some(k),
                Quantity::Pairing { left: Combination::derivative_of(k), right: Combination::member(n + k) },
                Relation::Ge,
                Quantity::Sum {
                    terms: vec![
                        (1.0, Quantity::Orlicz { of: Combination::member(n + k), conjugate: true }),
                        (-1.0, Quantity::Constant { value: tol_k }),
                    ],
                },
                1e-9,
            )?);
        }
        let l1: f64 = a.iter().map(|v| v.abs()).sum();
        let l = self.l();
        let sum = Combination::of(a.iter().copied().enumerate().collect(), false);
        let tol = norm_tol(l1);
        checks.push(ev.check(
            "lower-sandwich",
            None,
            Quantity::Sobolev { of: sum.clone() },
            Relation::Ge,
            Quantity::Constant { value: 0.5 * (l1 - self.eps_dual) },
            tol,
        )?);
        checks.push(ev.check(
            "upper-sandwich",
            None,
            Quantity::Sobolev { of: sum },
            Relation::Le,
            Quantity::Constant { value: (1.0 + l) * l1 },
            tol,
        )?);
        let mut parameters = self.parameters.clone();
        parameters.insert("l".into(), l);
        parameters.insert("eps_dual".into(), self.eps_dual);
        for (i, v) in a.iter().enumerate() {
            parameters.insert(format!("a_{}", i + 1), *v);
        }
        Ok(WitnessSequence { kind: WitnessKind::L1Embed, truncation: n, members, parameters, checks })
    }
}

pub fn l1_embedding(phi: &MoFunction, n: usize, a: &[f64], eps_dual: f64) -> Result<WitnessSequence, ProbeError> {
    L1Embedding::build(phi, n, eps_dual)?.certify(phi, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ve(p: &str) -> MoFunction {
        MoFunction::variable_exponent(p, Domain::unit()).unwrap()
    }

    fn assert_passed(w: &WitnessSequence) {
        let failed: Vec<_> = w.failed().map(|c| (c.name.clone(), c.member, c.lhs_value, c.rhs_value)).collect();
        assert!(failed.is_empty(), "{failed:?}");
    }

    #[test]
    fn non_delta2_sequences() {
        let phi = ve("1/(1-x)");
        for n in [4, 6] {
            let w = non_delta2_witness(&phi, n).unwrap();
            assert_eq!(w.members.len(), n);
            assert_passed(&w);
            assert!(w.verify(&phi).unwrap().ok);
        }
        assert!(matches!(non_delta2_witness(&ve("2"), 4), Err(ProbeError::Precondition(_))));
    }

    #[test]
    fn linf_sandwich() {
        let phi = ve("1/(1-x)");
        let emb = LinfEmbedding::build(&phi, 3).unwrap();
        let w = emb.certify(&phi, &[1.0, 0.0, 0.0]).unwrap();
        assert_passed(&w);
        let w = emb.certify(&phi, &[0.0, 0.0, 0.0]).unwrap();
        let upper = w.checks_named("upper-sandwich").next().unwrap();
        assert_eq!(upper.lhs_value, 0.0);
        assert!(emb.certify(&phi, &[1.0]).is_err());
    }

    #[test]
    fn l1_sandwich() {
        let phi = ve("1+x");
        let emb = L1Embedding::build(&phi, 3, 0.01).unwrap();
        let w = emb.certify(&phi, &[0.0, 1.0, 0.0]).unwrap();
        assert_passed(&w);
        let lower = w.checks_named("lower-sandwich").next().unwrap();
        assert!(lower.lhs_value >= 0.5);
        assert!(matches!(L1Embedding::build(&ve("2"), 2, 0.01), Err(ProbeError::Precondition(_))));
    }
}
