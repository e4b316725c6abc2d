//! Uniform convexity: a defect scan for the function, failure pairs in the
//! Sobolev space, and a sampled modulus of convexity.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Check, Combination, Evaluator, ProbeError, Quantity, Relation, WitnessKind, WitnessSequence};
use crate::conditions::{condition_v, Status};
use crate::function_rep::{integrate_split, PiecewiseFunction};
use crate::mo_function::{MoFunction, MusielakOrlicz};
use crate::norms::{luxemburg_norm, modular_value, NormConfig};

/// `c_k = 0.2 · 2^{-(k−1)}`.
pub const DEFAULT_C_SCHEDULE: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcGrid {
    pub u_min: f64,
    pub u_max: f64,
    pub u_points: usize,
    pub x_points: usize,
}

impl Default for UcGrid {
    fn default() -> Self {
        UcGrid { u_min: 1e-4, u_max: 1e4, u_points: 200, x_points: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefectTrend {
    Vanishing,
    NonVanishing,
    Unclear,
}

/// `defects[i] = ∫ Φ(x, P_i(x)) dx` where `P_i(x)` is the largest gap `u − v > ε u`
/// whose midpoint loses less than `c_i` of the average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcDefect {
    pub eps: f64,
    pub schedule: Vec<f64>,
    #[serde(with = "crate::ext::reals")]
    pub defects: Vec<f64>,
    /// Whether the largest gap ran into the top of the `u` grid somewhere.
    pub saturated: Vec<bool>,
    pub trend: DefectTrend,
    /// Where the widest gap survives at the smallest `c`.
    pub x_peak: f64,
}

fn log_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp()).collect()
}

/// `1 − Φ((u+v)/2) / ((Φ(u)+Φ(v))/2)`, `+∞` when the average is degenerate.
fn midpoint_loss(phi: &dyn MusielakOrlicz, x: f64, u: f64, v: f64) -> f64 {
    let avg = 0.5 * (phi.value(x, u) + phi.value(x, v));
    if !(avg > 0.0) || !avg.is_finite() {
        return f64::INFINITY;
    }
    1.0 - phi.value(x, 0.5 * (u + v)) / avg
}

fn check_schedule(eps: f64, schedule: &[f64], eps_hi: f64) -> Result<(), ProbeError> {
    if !(eps > 0.0 && eps < eps_hi) {
        return Err(ProbeError::Precondition(format!("ε = {eps} outside (0, {eps_hi})")));
    }
    if schedule.is_empty() || schedule.iter().any(|c| !(*c > 0.0)) || schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(ProbeError::Precondition("the c schedule must be positive and strictly decreasing".into()));
    }
    Ok(())
}

pub fn uc_falsifier(phi: &dyn MusielakOrlicz, eps: f64, schedule: &[f64], grid: &UcGrid) -> Result<UcDefect, ProbeError> {
    check_schedule(eps, schedule, 1.0)?;
    let dom = phi.domain();
    let mut us = vec![0.0];
    us.extend(log_points(grid.u_min, grid.u_max, grid.u_points));
    let top = *us.last().unwrap();
    let xs = dom.midpoints(grid.x_points);
    let dx = dom.length() / grid.x_points as f64;
    let nc = schedule.len();
    let mut defects = vec![0.0; nc];
    let mut saturated = vec![false; nc];
    let mut gap_last = vec![0.0; xs.len()];
    for (ix, &x) in xs.iter().enumerate() {
        // best[i] = (gap, u) for c_i
        let mut best = vec![(0.0f64, 0.0f64); nc];
        for (i, &u) in us.iter().enumerate() {
            for &v in &us[..i] {
                if !(u - v > eps * u) {
                    continue;
                }
                let loss = midpoint_loss(phi, x, u, v);
                for (ci, &c) in schedule.iter().enumerate() {
                    if loss < c && u - v > best[ci].0 {
                        best[ci] = (u - v, u);
                    }
                }
            }
        }
        for ci in 0..nc {
            let (gap, u) = best[ci];
            if gap > 0.0 {
                let w = phi.value(x, gap) * dx;
                defects[ci] += w;
                if ci == nc - 1 {
                    gap_last[ix] = gap;
                }
                if u == top {
                    saturated[ci] = true;
                }
            }
        }
    }
    let first = defects[0];
    let last = defects[nc - 1];
    let max = defects.iter().copied().fold(0.0, f64::max);
    let min = defects.iter().copied().fold(f64::INFINITY, f64::min);
    let decreasing = defects.windows(2).all(|w| w[1] <= w[0]);
    let trend = if saturated.iter().all(|s| *s) || (min > 1e-6 && last >= 0.5 * max) {
        DefectTrend::NonVanishing
    } else if last <= 1e-9 * first.max(1.0) || (decreasing && last <= 1e-3 * first) {
        DefectTrend::Vanishing
    } else {
        DefectTrend::Unclear
    };
    // widest gap at the smallest c; the first such x on ties
    let x_peak = gap_last
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .fold(None::<(usize, f64)>, |acc, (i, w)| match acc {
            Some((_, b)) if b >= *w => acc,
            _ => Some((i, *w)),
        })
        .map(|(i, _)| xs[i])
        .unwrap_or(0.5 * (dom.alpha + dom.beta));
    Ok(UcDefect { eps, schedule: schedule.to_vec(), defects, saturated, trend, x_peak })
}

const PAIR_CELLS: usize = 256;
const PAIR_U_CAP: f64 = 10.0;
const PAIR_U_POINTS: usize = 60;
const CELL_SAMPLES: usize = 5;

/// Constant pair `u > v` on one cell.
#[derive(Debug, Clone, Copy)]
struct CellPair {
    lo: f64,
    hi: f64,
    u: f64,
    v: f64,
}

fn integral(phi: &dyn MusielakOrlicz, lo: f64, hi: f64, g: impl Fn(f64) -> f64) -> Result<f64, ProbeError> {
    let dom = phi.domain();
    Ok(integrate_split(&g, lo, hi, phi.singularities(), &dom.quadrature)?)
}

/// Per cell, the widest qualifying pair for `c`.
fn qualifying_cells(phi: &dyn MusielakOrlicz, eps: f64, c: f64) -> Vec<CellPair> {
    let dom = phi.domain();
    let mut us = vec![0.0];
    us.extend(log_points(1e-4, PAIR_U_CAP, PAIR_U_POINTS));
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for (i, &u) in us.iter().enumerate() {
        for &v in &us[..i] {
            if u - v > eps * u {
                pairs.push((u, v));
            }
        }
    }
    pairs.sort_by(|a, b| (b.0 - b.1).total_cmp(&(a.0 - a.1)));
    let h = dom.length() / PAIR_CELLS as f64;
    let mut out = Vec::new();
    for j in 0..PAIR_CELLS {
        let lo = dom.alpha + h * j as f64;
        let hi = if j + 1 == PAIR_CELLS { dom.beta } else { lo + h };
        if phi.singularities().iter().any(|s| *s >= lo && *s <= hi) {
            continue;
        }
        let samples: Vec<f64> =
            (0..CELL_SAMPLES).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / CELL_SAMPLES as f64).collect();
        if let Some(&(u, v)) = pairs.iter().find(|(u, v)| {
            samples.iter().all(|&x| {
                let l = midpoint_loss(phi, x, *u, *v);
                l < c && phi.value(x, *u).is_finite()
            })
        }) {
            out.push(CellPair { lo, hi, u, v });
        }
    }
    out
}

fn pair_mass(phi: &dyn MusielakOrlicz, p: &CellPair, lo: f64, hi: f64, g: impl Fn(f64, &CellPair) -> f64) -> Result<f64, ProbeError> {
    integral(phi, lo, hi, |x| g(x, p))
}

/// Cut the ordered cells so that the cumulative mass of `g` reaches `target`;
/// returns the pieces `(lo, hi, pair)` covering that mass.
fn take_mass(
    phi: &dyn MusielakOrlicz,
    cells: &[CellPair],
    target: f64,
    g: &dyn Fn(f64, &CellPair) -> f64,
) -> Result<Option<Vec<CellPair>>, ProbeError> {
    let mut acc = 0.0;
    let mut out = Vec::new();
    for p in cells {
        let m = pair_mass(phi, p, p.lo, p.hi, g)?;
        if acc + m < target {
            acc += m;
            out.push(*p);
            continue;
        }
        let need = target - acc;
        let (mut a, mut b) = (p.lo, p.hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if pair_mass(phi, p, p.lo, mid, g)? < need {
                a = mid;
            } else {
                b = mid;
            }
        }
        out.push(CellPair { hi: b, ..*p });
        return Ok(Some(out));
    }
    Ok(None)
}

struct PairBuild {
    x_tilde: PiecewiseFunction,
    y_tilde: PiecewiseFunction,
    partition: Vec<f64>,
    sigma: f64,
    beta: f64,
}

fn step_on(alpha: f64, beta: f64, pieces: &[(f64, f64, f64)]) -> Result<PiecewiseFunction, ProbeError> {
    let mut bps = vec![alpha];
    let mut vals = Vec::new();
    for &(lo, hi, v) in pieces {
        if lo > *bps.last().unwrap() {
            bps.push(lo);
            vals.push(0.0);
        }
        if hi > *bps.last().unwrap() {
            bps.push(hi);
            vals.push(v);
        }
    }
    if beta > *bps.last().unwrap() {
        bps.push(beta);
        vals.push(0.0);
    }
    Ok(PiecewiseFunction::step(bps, &vals)?)
}

/// Replace each constancy interval of the common partition by `2n` alternating
/// subcells, with `n` chosen so every partial integral stays below `2^{-k}/2`.
fn oscillate(
    x: &PiecewiseFunction,
    y: &PiecewiseFunction,
    k: usize,
) -> Result<(PiecewiseFunction, PiecewiseFunction, Vec<f64>), ProbeError> {
    let x = x.refine_to(y.breakpoints());
    let y = y.refine_to(x.breakpoints());
    let partition = x.breakpoints().to_vec();
    let scale = 2f64.powi(k as i32);
    let mut bps = vec![partition[0]];
    let (mut xv, mut yv) = (Vec::new(), Vec::new());
    for (i, w) in partition.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let (cx, cy) = (x.pieces()[i][0], y.pieces()[i][0]);
        let m = cx.abs().max(cy.abs());
        let n = if m == 0.0 { 1 } else { ((m * (b - a) * scale).ceil() as usize).max(1) };
        let cells = 2 * n;
        for j in 0..cells {
            let hi = if j + 1 == cells { b } else { a + (b - a) * (j + 1) as f64 / cells as f64 };
            if hi <= *bps.last().unwrap() {
                continue;
            }
            bps.push(hi);
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            xv.push(s * cx);
            yv.push(s * cy);
        }
    }
    Ok((PiecewiseFunction::step(bps.clone(), &xv)?, PiecewiseFunction::step(bps, &yv)?, partition))
}

fn build_pair(phi: &MoFunction, eps: f64, c: f64, gamma: f64, k: usize) -> Result<Option<PairBuild>, ProbeError> {
    let dom = phi.domain();
    let cells = qualifying_cells(phi, eps, c);
    let gap = |x: f64, p: &CellPair| phi.value(x, p.u - p.v);
    let Some(e) = take_mass(phi, &cells, gamma, &gap)? else { return Ok(None) };
    let diff = |x: f64, p: &CellPair| phi.value(x, p.u) - phi.value(x, p.v);
    let mut alpha = 0.0;
    for p in &e {
        alpha += pair_mass(phi, p, p.lo, p.hi, diff)?;
    }
    let f_part = take_mass(phi, &e, 0.5 * alpha, &diff)?.unwrap_or_else(|| e.clone());
    let split = f_part.last().map(|p| (f_part.len() - 1, p.hi)).unwrap();
    let mut xh = Vec::new();
    let mut yh = Vec::new();
    for (i, p) in e.iter().enumerate() {
        if i < split.0 {
            xh.push((p.lo, p.hi, p.u));
            yh.push((p.lo, p.hi, p.v));
        } else if i == split.0 {
            xh.push((p.lo, split.1, p.u));
            yh.push((p.lo, split.1, p.v));
            xh.push((split.1, p.hi, p.v));
            yh.push((split.1, p.hi, p.u));
        } else {
            xh.push((p.lo, p.hi, p.v));
            yh.push((p.lo, p.hi, p.u));
        }
    }
    let x_hat = step_on(dom.alpha, dom.beta, &xh)?;
    let y_hat = step_on(dom.alpha, dom.beta, &yh)?;
    let beta = modular_value(phi, &x_hat, 1.0)?;
    if !(beta < 1.0) {
        return Ok(None);
    }
    // G: a gap of the domain outside E, kept away from singular points
    let mut occupied: Vec<(f64, f64)> = e.iter().map(|p| (p.lo, p.hi)).collect();
    occupied.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut gaps = Vec::new();
    let mut cursor = dom.alpha;
    for &(lo, hi) in &occupied {
        if lo > cursor {
            gaps.push((cursor, lo));
        }
        cursor = cursor.max(hi);
    }
    if dom.beta > cursor {
        gaps.push((cursor, dom.beta));
    }
    let min_len = 0.1 * dom.length();
    let g = gaps
        .iter()
        .copied()
        .find(|(a, b)| b - a >= min_len)
        .or_else(|| gaps.iter().copied().max_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0))))
        .ok_or_else(|| ProbeError::ConstructionFailed { reason: "no room outside E".into(), best: None })?;
    let sing = phi.singularities();
    let (mut ga, mut gb) = g;
    if let Some(&s) = sing.iter().filter(|s| **s > ga && **s < gb).min_by(|a, b| a.total_cmp(b)) {
        gb = s;
    }
    let len = gb - ga;
    let touches = |p: f64| sing.iter().any(|s| (s - p).abs() <= 1e-12 * dom.length().max(1.0));
    let (ta, tb) = (touches(ga), touches(gb));
    if ta {
        ga += 0.25 * len;
    }
    if tb {
        gb -= 0.25 * len;
    }
    let need = 1.0 - beta;
    let g_mass = |s: f64| integral(phi, ga, gb, |x| phi.value(x, s));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while g_mass(hi)? < need {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(ProbeError::ConstructionFailed { reason: "the filler level is unbounded".into(), best: None });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g_mass(mid)? <= need {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sigma = lo;
    let filler = step_on(dom.alpha, dom.beta, &[(ga, gb, sigma)])?;
    let x_t = x_hat.add(&filler)?;
    let y_t = y_hat.add(&filler)?;
    let (x_tilde, y_tilde, partition) = oscillate(&x_t, &y_t, k)?;
    Ok(Some(PairBuild { x_tilde, y_tilde, partition, sigma, beta }))
}

/// Pairs `f_k = ∫ x̃_k`, `g_k = ∫ ỹ_k` in the Sobolev space with norms tending to
/// one, separated by `γ` and with midpoints of norm at least `1 − c_k`.
/// Members are ordered `[f_1, g_1, f_2, g_2, …]`.
pub fn uc_failure_sobolev_pairs(phi: &MoFunction, eps: f64, k_max: usize) -> Result<WitnessSequence, ProbeError> {
    if k_max == 0 {
        return Err(ProbeError::Precondition("K must be at least 1".into()));
    }
    let schedule: Vec<f64> = (0..k_max).map(|k| 0.2 * 0.5f64.powi(k as i32)).collect();
    let defect = uc_falsifier(phi, eps, &schedule, &UcGrid::default())?;
    if defect.trend != DefectTrend::NonVanishing {
        return Err(ProbeError::Precondition(format!(
            "uniform convexity defect is {:?}, a nonvanishing defect is required",
            defect.trend
        )));
    }
    let v = condition_v(phi);
    if v.verdict.status != Status::Holds {
        return Err(ProbeError::Precondition(format!("condition (V) is {}", v.verdict.status)));
    }
    let mut capacity = f64::INFINITY;
    for &c in &schedule {
        let mut m = 0.0;
        for p in qualifying_cells(phi, eps, c) {
            m += pair_mass(phi, &p, p.lo, p.hi, |x, p| phi.value(x, p.u - p.v))?;
        }
        capacity = capacity.min(m);
    }
    if !(capacity > 0.0) {
        return Err(ProbeError::ConstructionFailed { reason: "no qualifying pairs on the grid".into(), best: Some(0.0) });
    }
    let mut gamma = 0.25f64.min(0.5 * capacity);
    let builds = 'outer: loop {
        let mut out = Vec::with_capacity(k_max);
        for (i, &c) in schedule.iter().enumerate() {
            match build_pair(phi, eps, c, gamma, i + 1)? {
                Some(b) => out.push(b),
                None => {
                    gamma *= 0.5;
                    if gamma < 1e-12 {
                        return Err(ProbeError::ConstructionFailed {
                            reason: "no separation γ keeps the pair modular below one".into(),
                            best: None,
                        });
                    }
                    continue 'outer;
                }
            }
        }
        break out;
    };

    let mut members = Vec::with_capacity(2 * k_max);
    for b in &builds {
        members.push(b.x_tilde.antiderivative());
        members.push(b.y_tilde.antiderivative());
    }
    let ev = Evaluator::new(phi, &members);
    let mut checks: Vec<Check> = Vec::new();
    let mut parameters = BTreeMap::new();
    parameters.insert("gamma".to_string(), gamma);
    parameters.insert("eps".to_string(), eps);
    let tol = NormConfig::default().rel_tol;
    for (i, b) in builds.iter().enumerate() {
        let k = i + 1;
        let (fi, gi) = (2 * i, 2 * i + 1);
        let c = schedule[i];
        let small = 0.5f64.powi(k as i32);
        parameters.insert(format!("c_{k}"), c);
        parameters.insert(format!("sigma_{k}"), b.sigma);
        parameters.insert(format!("beta_{k}"), b.beta);
        for (name, m) in [("f", fi), ("g", gi)] {
            for (rel, target) in [(Relation::Ge, 1.0 - 1e-6), (Relation::Le, 1.0 + 1e-6)] {
                checks.push(ev.check(
                    &format!("derivative-modular-{name}"),
                    Some(k),
                    Quantity::Modular { of: Combination::derivative_of(m), scale: 1.0, conjugate: false },
                    rel,
                    Quantity::Constant { value: target },
                    0.0,
                )?);
            }
            checks.push(ev.check(
                &format!("norm-lower-{name}"),
                Some(k),
                Quantity::Sobolev { of: Combination::member(m) },
                Relation::Ge,
                Quantity::Constant { value: 1.0 - 1e-6 },
                0.0,
            )?);
            checks.push(ev.check(
                &format!("norm-upper-{name}"),
                Some(k),
                Quantity::Sobolev { of: Combination::member(m) },
                Relation::Le,
                Quantity::Sum {
                    terms: vec![
                        (1.0, Quantity::Constant { value: 1.0 + 1e-6 }),
                        (1.0, Quantity::ConstantNorm { value: small }),
                    ],
                },
                0.0,
            )?);
            checks.push(ev.check(
                &format!("sup-small-{name}"),
                Some(k),
                Quantity::SupAbs { of: Combination::member(m) },
                Relation::Lt,
                Quantity::Constant { value: small },
                0.0,
            )?);
            checks.push(ev.check(
                &format!("oscillation-balanced-{name}"),
                Some(k),
                Quantity::IntervalIntegralMax { of: Combination::derivative_of(m), partition: b.partition.clone() },
                Relation::Le,
                Quantity::Constant { value: 0.0 },
                1e-12,
            )?);
        }
        checks.push(ev.check(
            "midpoint-norm",
            Some(k),
            Quantity::Sobolev { of: Combination::of(vec![(fi, 0.5), (gi, 0.5)], false) },
            Relation::Ge,
            Quantity::Constant { value: 1.0 - c },
            tol,
        )?);
        checks.push(ev.check(
            "separation-modular",
            Some(k),
            Quantity::Modular { of: Combination::of(vec![(fi, 1.0), (gi, -1.0)], true), scale: 1.0, conjugate: false },
            Relation::Ge,
            Quantity::Constant { value: gamma },
            1e-9 * gamma,
        )?);
        checks.push(ev.check(
            "separation-norm",
            Some(k),
            Quantity::Sobolev { of: Combination::of(vec![(fi, 1.0), (gi, -1.0)], false) },
            Relation::Ge,
            Quantity::Constant { value: gamma },
            tol,
        )?);
    }
    Ok(WitnessSequence { kind: WitnessKind::UcFailurePair, truncation: k_max, members, parameters, checks })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusConfig {
    pub trials: usize,
    pub seed: u64,
    /// Cells of the random step functions.
    pub cells: usize,
}

impl Default for ModulusConfig {
    fn default() -> Self {
        ModulusConfig { trials: 32, seed: 0, cells: 16 }
    }
}

/// Sampled `1 − sup ‖(f+g)/2‖` over unit pairs with `‖f − g‖ ≥ ε`; an upper
/// estimate of the modulus of convexity of `L^Φ`.
pub fn uc_modulus_estimate(phi: &dyn MusielakOrlicz, eps: f64, cfg: &ModulusConfig) -> Result<f64, ProbeError> {
    if !(eps > 0.0 && eps < 2.0) {
        return Err(ProbeError::Precondition(format!("ε = {eps} outside (0, 2)")));
    }
    let dom = phi.domain();
    let ncfg = NormConfig { abs_tol: 1e-13, rel_tol: 1e-13, ..NormConfig::default() };
    let norm = |f: &PiecewiseFunction| -> Result<f64, ProbeError> { Ok(luxemburg_norm(phi, f, &ncfg)?.value) };
    let unit = |f: &PiecewiseFunction| -> Result<Option<PiecewiseFunction>, ProbeError> {
        let n = norm(f)?;
        Ok(if n > 0.0 && n.is_finite() { Some(f.scale(1.0 / n)) } else { None })
    };
    let mut best_mid = 0.0f64;
    let mid_norm = |f: &PiecewiseFunction, g: &PiecewiseFunction| -> Result<f64, ProbeError> {
        norm(&PiecewiseFunction::linear_combination(&[(0.5, f), (0.5, g)])?)
    };

    // flat pairs on the two halves
    let m = 0.5 * (dom.alpha + dom.beta);
    if let (Some(f), Some(g)) = (
        unit(&PiecewiseFunction::indicator(dom.alpha, dom.beta, dom.alpha, m, 1.0)?)?,
        unit(&PiecewiseFunction::indicator(dom.alpha, dom.beta, m, dom.beta, 1.0)?)?,
    ) {
        if norm(&f.sub(&g)?)? >= eps {
            best_mid = best_mid.max(mid_norm(&f, &g)?);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cells = cfg.cells.max(1);
    let bps: Vec<f64> = (0..=cells).map(|i| dom.alpha + dom.length() * i as f64 / cells as f64).collect();
    let random_step = |rng: &mut ChaCha8Rng| -> Result<PiecewiseFunction, ProbeError> {
        let vals: Vec<f64> = (0..cells).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Ok(PiecewiseFunction::step(bps.clone(), &vals)?)
    };
    for _ in 0..cfg.trials {
        let (Some(f), Some(h)) = (unit(&random_step(&mut rng)?)?, unit(&random_step(&mut rng)?)?) else { continue };
        let g_at = |theta: f64| -> Result<Option<PiecewiseFunction>, ProbeError> {
            unit(&PiecewiseFunction::linear_combination(&[(theta.cos(), &f), (theta.sin(), &h)])?)
        };
        let dist = |theta: f64| -> Result<f64, ProbeError> {
            Ok(match g_at(theta)? {
                Some(g) => norm(&f.sub(&g)?)?,
                None => 0.0,
            })
        };
        let (mut lo, mut hi) = (0.0f64, std::f64::consts::PI);
        if dist(hi)? < eps {
            continue;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if dist(mid)? >= eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if let Some(g) = g_at(hi)? {
            best_mid = best_mid.max(mid_norm(&f, &g)?);
        }
    }
    Ok((1.0 - best_mid).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_rep::Domain;

    #[test]
    fn falsifier_examples() {
        let lin = MoFunction::orlicz("t", Domain::unit()).unwrap();
        let d = uc_falsifier(&lin, 0.5, &DEFAULT_C_SCHEDULE, &UcGrid::default()).unwrap();
        assert_eq!(d.trend, DefectTrend::NonVanishing);

        let quad = MoFunction::orlicz("t^2/2", Domain::unit()).unwrap();
        let d = uc_falsifier(&quad, 0.5, &DEFAULT_C_SCHEDULE, &UcGrid::default()).unwrap();
        assert!(d.defects[0] > 0.0);
        assert!(d.defects[1..].iter().all(|v| *v == 0.0), "{:?}", d.defects);
        assert_eq!(d.trend, DefectTrend::Vanishing);

        let ve = MoFunction::variable_exponent("1/(1-x)", Domain::unit()).unwrap();
        let d = uc_falsifier(&ve, 0.5, &DEFAULT_C_SCHEDULE, &UcGrid::default()).unwrap();
        assert_eq!(d.trend, DefectTrend::NonVanishing);
        assert!(d.x_peak < 0.1, "{d:?}");

        assert!(uc_falsifier(&quad, 1.5, &DEFAULT_C_SCHEDULE, &UcGrid::default()).is_err());
        assert!(uc_falsifier(&quad, 0.5, &[0.1, 0.2], &UcGrid::default()).is_err());
    }

    #[test]
    fn modulus_examples() {
        let cfg = ModulusConfig::default();
        let l2 = MoFunction::variable_exponent("2", Domain::unit()).unwrap();
        let m = uc_modulus_estimate(&l2, 1.0, &cfg).unwrap();
        let exact = 1.0 - 3f64.sqrt() / 2.0;
        assert!(m >= 0.95 * exact && m <= exact + 1e-9, "{m} vs {exact}");
        let lin = MoFunction::orlicz("t", Domain::unit()).unwrap();
        assert!(uc_modulus_estimate(&lin, 1.0, &cfg).unwrap() <= 1e-9);
        assert!(uc_modulus_estimate(&l2, 1e-6, &cfg).unwrap() < 1e-9);
        assert!(uc_modulus_estimate(&l2, 0.0, &cfg).is_err());
    }

    #[test]
    fn failure_pairs_for_exponent_approaching_one() {
        let phi = MoFunction::variable_exponent("1/(1-x)", Domain::unit()).unwrap();
        let w = uc_failure_sobolev_pairs(&phi, 0.5, 3).unwrap();
        let failed: Vec<_> = w.failed().map(|c| (c.name.clone(), c.member, c.lhs_value, c.rhs_value)).collect();
        assert!(failed.is_empty(), "{failed:?}");
        assert!(w.parameters["gamma"] > 0.0);
        for (k, c) in [0.2, 0.1, 0.05].iter().enumerate() {
            assert_eq!(w.parameters[&format!("c_{}", k + 1)], *c);
        }
    }

    #[test]
    fn failure_pairs_need_a_defect() {
        let phi = MoFunction::variable_exponent("2", Domain::unit()).unwrap();
        assert!(matches!(uc_failure_sobolev_pairs(&phi, 0.5, 2), Err(ProbeError::Precondition(_))));
    }
}
