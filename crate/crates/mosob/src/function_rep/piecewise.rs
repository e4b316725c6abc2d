//! Piecewise-polynomial functions on a bounded interval.
//!
//! On the cell `[γ_i, γ_{i+1}]` the function is `Σ_j c_ij (x − γ_i)^j`, i.e.
//! coefficients are stored in powers of the distance to the left breakpoint.
//! The serialized form is
//!
//! ```json
//! {"breakpoints": [0.0, 0.5, 1.0], "pieces": [[1.0], [0.0, 2.0]]}
//! ```
//!
//! with an optional `"continuous"` flag that is recomputed on load.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PiecewiseError {
    #[error("breakpoints must be finite and strictly increasing")]
    BadBreakpoints,
    #[error("expected {expected} pieces for {cells} cells, found {found}")]
    PieceCount { expected: usize, cells: usize, found: usize },
    #[error("coefficients must be finite")]
    NonFinite,
    #[error("function has a jump of {jump} at x = {at}; its distributional derivative is not a function")]
    NotWeaklyDifferentiable { at: f64, jump: f64 },
    #[error("functions live on different intervals")]
    DomainMismatch,
}

/// Relative size of a jump below which two cells are treated as continuous.
const JUMP_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPiecewise")]
pub struct PiecewiseFunction {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<f64>>,
    continuous: bool,
}

#[derive(Deserialize)]
struct RawPiecewise {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<f64>>,
    #[serde(default)]
    #[allow(dead_code)]
    continuous: Option<bool>,
}

impl TryFrom<RawPiecewise> for PiecewiseFunction {
    type Error = PiecewiseError;
    fn try_from(r: RawPiecewise) -> Result<Self, Self::Error> {
        PiecewiseFunction::new(r.breakpoints, r.pieces)
    }
}

fn eval_poly(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * s + k)
}

fn deriv_poly(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter().enumerate().skip(1).map(|(j, &k)| j as f64 * k).collect()
}

fn trim(mut c: Vec<f64>) -> Vec<f64> {
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    if c.is_empty() {
        c.push(0.0);
    }
    c
}

/// Re-centre `Σ c_j s^j` at `s = h`: returns `d` with `Σ d_j u^j = Σ c_j (u+h)^j`.
fn taylor_shift(c: &[f64], h: f64) -> Vec<f64> {
    if h == 0.0 {
        return c.to_vec();
    }
    let mut d = c.to_vec();
    let n = d.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            d[j] += h * d[j + 1];
        }
    }
    d
}

fn is_zero_poly(c: &[f64]) -> bool {
    c.iter().all(|&k| k == 0.0)
}

fn poly_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|j| a.get(j).copied().unwrap_or(0.0) - b.get(j).copied().unwrap_or(0.0))
        .collect()
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|j| a.get(j).copied().unwrap_or(0.0) + b.get(j).copied().unwrap_or(0.0))
        .collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Real roots of the polynomial strictly inside `(0, len)`, sorted.
fn roots_in(c: &[f64], len: f64) -> Vec<f64> {
    let c = trim(c.to_vec());
    match c.len() {
        1 => vec![],
        2 => {
            let s = -c[0] / c[1];
            if s > 0.0 && s < len {
                vec![s]
            } else {
                vec![]
            }
        }
        n => {
            // Sign-change scan on a fine sub-grid, then bisection.
            let m = 64 * n;
            let mut roots = Vec::new();
            let mut prev_s = 0.0;
            let mut prev_v = eval_poly(&c, 0.0);
            for i in 1..=m {
                let s = len * i as f64 / m as f64;
                let v = eval_poly(&c, s);
                if v == 0.0 && i < m {
                    roots.push(s);
                } else if prev_v * v < 0.0 {
                    let (mut lo, mut hi) = (prev_s, s);
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        if eval_poly(&c, mid) * prev_v > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    roots.push(0.5 * (lo + hi));
                }
                prev_s = s;
                prev_v = v;
            }
            roots.retain(|&r| r > 0.0 && r < len);
            roots
        }
    }
}

impl PiecewiseFunction {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self, PiecewiseError> {
        if breakpoints.len() < 2
            || breakpoints.iter().any(|b| !b.is_finite())
            || breakpoints.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(PiecewiseError::BadBreakpoints);
        }
        let cells = breakpoints.len() - 1;
        if pieces.len() != cells {
            return Err(PiecewiseError::PieceCount {
                expected: cells,
                cells,
                found: pieces.len(),
            });
        }
        if pieces.iter().flatten().any(|c| !c.is_finite()) {
            return Err(PiecewiseError::NonFinite);
        }
        let pieces: Vec<Vec<f64>> = pieces.into_iter().map(trim).collect();
        let mut f = PiecewiseFunction { breakpoints, pieces, continuous: false };
        f.continuous = f.first_jump().is_none();
        Ok(f)
    }

    /// Constant `c` on `[a, b]`.
    pub fn constant(a: f64, b: f64, c: f64) -> Self {
        PiecewiseFunction::new(vec![a, b], vec![vec![c]]).expect("valid interval")
    }

    /// Step function with `values[i]` on `[breakpoints[i], breakpoints[i+1])`.
    pub fn step(breakpoints: Vec<f64>, values: &[f64]) -> Result<Self, PiecewiseError> {
        PiecewiseFunction::new(breakpoints, values.iter().map(|&v| vec![v]).collect())
    }

    /// `height · χ_[lo, hi)` on `[a, b]`.
    pub fn indicator(a: f64, b: f64, lo: f64, hi: f64, height: f64) -> Result<Self, PiecewiseError> {
        let mut bps = vec![a];
        let mut vals = Vec::new();
        if lo > a {
            bps.push(lo);
            vals.push(0.0);
        }
        vals.push(height);
        if hi < b {
            bps.push(hi);
            vals.push(0.0);
        }
        bps.push(b);
        PiecewiseFunction::step(bps, &vals)
    }

    /// Build from coefficients in powers of `x` (not of `x − γ_i`).
    pub fn from_global(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self, PiecewiseError> {
        if breakpoints.len() < 2 || pieces.len() + 1 != breakpoints.len() {
            return PiecewiseFunction::new(breakpoints, pieces);
        }
        let local = pieces
            .iter()
            .zip(&breakpoints)
            .map(|(c, &a)| taylor_shift(c, a))
            .collect();
        PiecewiseFunction::new(breakpoints, local)
    }

    /// Single polynomial on `[a, b]`, coefficients in powers of `x`.
    pub fn polynomial(a: f64, b: f64, global: &[f64]) -> Self {
        PiecewiseFunction::from_global(vec![a, b], vec![global.to_vec()]).expect("valid interval")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    pub fn alpha(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn beta(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn cells(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_continuous(&self) -> bool {
        self.continuous
    }

    pub fn degree(&self) -> usize {
        self.pieces.iter().map(|c| c.len() - 1).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|c| is_zero_poly(c))
    }

    /// Cell `(a, b, coefficients)` iterator.
    pub fn cell_iter(&self) -> impl Iterator<Item = (f64, f64, &[f64])> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.pieces)
            .map(|(w, c)| (w[0], w[1], c.as_slice()))
    }

    fn cell_of(&self, x: f64) -> usize {
        let n = self.pieces.len();
        match self.breakpoints.binary_search_by(|b| b.total_cmp(&x)) {
            Ok(i) => i.min(n - 1),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 1),
        }
    }

    /// Value at `x`; at a breakpoint the right-hand cell is used (left-hand at `β`).
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.cell_of(x);
        eval_poly(&self.pieces[i], x - self.breakpoints[i])
    }

    fn left_limit(&self, i: usize) -> f64 {
        // value of cell i at its right end
        eval_poly(&self.pieces[i], self.breakpoints[i + 1] - self.breakpoints[i])
    }

    fn first_jump(&self) -> Option<(f64, f64)> {
        for i in 0..self.pieces.len() - 1 {
            let l = self.left_limit(i);
            let r = self.pieces[i + 1][0];
            let scale = 1.0 + l.abs().max(r.abs());
            if (l - r).abs() > JUMP_TOL * scale {
                return Some((self.breakpoints[i + 1], r - l));
            }
        }
        None
    }

    /// Cell-wise classical derivative; errors on interior jumps.
    pub fn weak_derivative(&self) -> Result<PiecewiseFunction, PiecewiseError> {
        if let Some((at, jump)) = self.first_jump() {
            return Err(PiecewiseError::NotWeaklyDifferentiable { at, jump });
        }
        PiecewiseFunction::new(
            self.breakpoints.clone(),
            self.pieces.iter().map(|c| deriv_poly(c)).collect(),
        )
    }

    /// `F(x) = ∫_α^x f`, continuous with `F(α) = 0`.
    pub fn antiderivative(&self) -> PiecewiseFunction {
        let mut acc = 0.0;
        let mut pieces = Vec::with_capacity(self.pieces.len());
        for (a, b, c) in self.cell_iter() {
            let mut p = Vec::with_capacity(c.len() + 1);
            p.push(acc);
            for (j, &k) in c.iter().enumerate() {
                p.push(k / (j as f64 + 1.0));
            }
            acc = eval_poly(&p, b - a);
            pieces.push(p);
        }
        let mut f = PiecewiseFunction::new(self.breakpoints.clone(), pieces)
            .expect("antiderivative of a valid function");
        f.continuous = true;
        f
    }

    /// `∫_α^β f`.
    pub fn integral(&self) -> f64 {
        self.cell_iter()
            .map(|(a, b, c)| {
                let l = b - a;
                c.iter()
                    .enumerate()
                    .map(|(j, &k)| k * l.powi(j as i32 + 1) / (j as f64 + 1.0))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Integral over each cell.
    pub fn cell_integrals(&self) -> Vec<f64> {
        self.cell_iter()
            .map(|(a, b, c)| {
                let l = b - a;
                c.iter()
                    .enumerate()
                    .map(|(j, &k)| k * l.powi(j as i32 + 1) / (j as f64 + 1.0))
                    .sum::<f64>()
            })
            .collect()
    }

    /// Both functions re-expressed on the union of their breakpoints.
    pub fn common_refinement(
        &self,
        other: &PiecewiseFunction,
    ) -> Result<(PiecewiseFunction, PiecewiseFunction), PiecewiseError> {
        if self.alpha() != other.alpha() || self.beta() != other.beta() {
            return Err(PiecewiseError::DomainMismatch);
        }
        let mut bps: Vec<f64> = self.breakpoints.iter().chain(&other.breakpoints).copied().collect();
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        Ok((self.refine_to(&bps), other.refine_to(&bps)))
    }

    /// Re-express on a finer grid containing all current breakpoints.
    pub fn refine_to(&self, bps: &[f64]) -> PiecewiseFunction {
        let pieces = bps
            .windows(2)
            .map(|w| {
                let i = self.cell_of(0.5 * (w[0] + w[1]));
                taylor_shift(&self.pieces[i], w[0] - self.breakpoints[i])
            })
            .collect();
        let mut f = PiecewiseFunction::new(bps.to_vec(), pieces).expect("refinement of valid grid");
        f.continuous = self.continuous;
        f
    }

    /// Insert extra breakpoints (clipped to the interior).
    pub fn with_breakpoints(&self, extra: &[f64]) -> PiecewiseFunction {
        let mut bps = self.breakpoints.clone();
        bps.extend(extra.iter().copied().filter(|&x| x > self.alpha() && x < self.beta()));
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        self.refine_to(&bps)
    }

    fn zip_with(
        &self,
        other: &PiecewiseFunction,
        op: impl Fn(&[f64], &[f64]) -> Vec<f64>,
    ) -> Result<PiecewiseFunction, PiecewiseError> {
        let (f, g) = self.common_refinement(other)?;
        let pieces = f.pieces.iter().zip(&g.pieces).map(|(a, b)| op(a, b)).collect();
        PiecewiseFunction::new(f.breakpoints, pieces)
    }

    pub fn add(&self, other: &PiecewiseFunction) -> Result<PiecewiseFunction, PiecewiseError> {
        self.zip_with(other, poly_add)
    }

    pub fn sub(&self, other: &PiecewiseFunction) -> Result<PiecewiseFunction, PiecewiseError> {
        self.zip_with(other, poly_sub)
    }

    /// Pointwise product (degrees add).
    pub fn mul(&self, other: &PiecewiseFunction) -> Result<PiecewiseFunction, PiecewiseError> {
        self.zip_with(other, poly_mul)
    }

    pub fn scale(&self, c: f64) -> PiecewiseFunction {
        let pieces = self.pieces.iter().map(|p| p.iter().map(|k| k * c).collect()).collect();
        let mut f = PiecewiseFunction::new(self.breakpoints.clone(), pieces).expect("scaled");
        f.continuous = self.continuous || c == 0.0;
        f
    }

    /// `Σ c_i f_i` over functions on a common interval.
    pub fn linear_combination(
        terms: &[(f64, &PiecewiseFunction)],
    ) -> Result<PiecewiseFunction, PiecewiseError> {
        let (c0, f0) = terms.first().expect("at least one term");
        let mut acc = f0.scale(*c0);
        for (c, f) in &terms[1..] {
            acc = acc.add(&f.scale(*c))?;
        }
        Ok(acc)
    }

    /// Split every cell at the sign changes of the given per-cell polynomials.
    fn split_at_roots(&self, selector: &[Vec<f64>]) -> Vec<f64> {
        let mut bps = vec![self.alpha()];
        for ((a, b, _), sel) in self.cell_iter().zip(selector) {
            for r in roots_in(sel, b - a) {
                let x = a + r;
                if x > *bps.last().unwrap() && x < b {
                    bps.push(x);
                }
            }
            bps.push(b);
        }
        bps
    }

    pub fn abs(&self) -> PiecewiseFunction {
        let bps = self.split_at_roots(&self.pieces);
        let f = self.refine_to(&bps);
        let pieces = f
            .cell_iter()
            .map(|(a, b, c)| {
                let mid = eval_poly(c, 0.5 * (b - a));
                if mid < 0.0 {
                    c.iter().map(|k| -k).collect()
                } else {
                    c.to_vec()
                }
            })
            .collect();
        let mut out = PiecewiseFunction::new(bps, pieces).expect("abs");
        out.continuous = out.continuous || self.continuous;
        out
    }

    fn lattice(&self, other: &PiecewiseFunction, take_max: bool) -> Result<PiecewiseFunction, PiecewiseError> {
        let (f, g) = self.common_refinement(other)?;
        let diffs: Vec<Vec<f64>> = f.pieces.iter().zip(&g.pieces).map(|(a, b)| poly_sub(a, b)).collect();
        let bps = f.split_at_roots(&diffs);
        let (f, g) = (f.refine_to(&bps), g.refine_to(&bps));
        let pieces = f
            .cell_iter()
            .zip(g.pieces.iter())
            .map(|((a, b, pf), pg)| {
                let s = 0.5 * (b - a);
                let f_bigger = eval_poly(pf, s) >= eval_poly(pg, s);
                if f_bigger == take_max {
                    pf.to_vec()
                } else {
                    pg.clone()
                }
            })
            .collect();
        PiecewiseFunction::new(bps, pieces)
    }

    /// Pointwise minimum `f ∧ g`.
    pub fn min(&self, other: &PiecewiseFunction) -> Result<PiecewiseFunction, PiecewiseError> {
        self.lattice(other, false)
    }

    /// Pointwise maximum `f ∨ g`.
    pub fn max(&self, other: &PiecewiseFunction) -> Result<PiecewiseFunction, PiecewiseError> {
        self.lattice(other, true)
    }

    /// `max |f|`, exact up to root isolation of the derivative.
    pub fn sup_abs(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (a, b, c) in self.cell_iter() {
            let l = b - a;
            best = best.max(eval_poly(c, 0.0).abs()).max(eval_poly(c, l).abs());
            for r in roots_in(&deriv_poly(c), l) {
                best = best.max(eval_poly(c, r).abs());
            }
        }
        best
    }

    /// Length of `{f ≠ 0}` (a nonzero polynomial vanishes only at finitely many points).
    pub fn support_measure(&self) -> f64 {
        self.cell_iter().filter(|(_, _, c)| !is_zero_poly(c)).map(|(a, b, _)| b - a).sum()
    }

    /// Length of `{f ≠ 0} ∩ {g ≠ 0}`.
    pub fn support_overlap(&self, other: &PiecewiseFunction) -> Result<f64, PiecewiseError> {
        let (f, g) = self.common_refinement(other)?;
        Ok(f
            .cell_iter()
            .zip(&g.pieces)
            .filter(|((_, _, p), q)| !is_zero_poly(p) && !is_zero_poly(q))
            .map(|((a, b, _), _)| b - a)
            .sum())
    }

    /// `∫ f g` exactly.
    pub fn inner(&self, other: &PiecewiseFunction) -> Result<f64, PiecewiseError> {
        Ok(self.mul(other)?.integral())
    }

    /// Smallest and largest breakpoints of the cells where `f ≠ 0`.
    pub fn support_hull(&self) -> Option<(f64, f64)> {
        let mut it = self.cell_iter().filter(|(_, _, c)| !is_zero_poly(c));
        let first = it.next()?;
        let last = it.last().unwrap_or(first);
        Some((first.0, last.1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weak_derivative_examples() {
        let x = PiecewiseFunction::polynomial(0.0, 1.0, &[0.0, 1.0]);
        let d = x.weak_derivative().unwrap();
        assert_eq!(d.eval(0.3), 1.0);

        let tent = PiecewiseFunction::from_global(
            vec![0.0, 0.5, 1.0],
            vec![vec![0.5, -1.0], vec![-0.5, 1.0]],
        )
        .unwrap();
        assert!(tent.is_continuous());
        let d = tent.weak_derivative().unwrap();
        assert_eq!(d.eval(0.25), -1.0);
        assert_eq!(d.eval(0.75), 1.0);

        let step = PiecewiseFunction::indicator(0.0, 1.0, 0.0, 0.5, 1.0).unwrap();
        assert!(matches!(
            step.weak_derivative(),
            Err(PiecewiseError::NotWeaklyDifferentiable { at, .. }) if at == 0.5
        ));
    }

    #[test]
    fn antiderivative_examples() {
        let one = PiecewiseFunction::constant(0.0, 1.0, 1.0);
        let f = one.antiderivative();
        assert_eq!(f.eval(0.3), 0.3);
        let sq = PiecewiseFunction::step(vec![0.0, 0.5, 1.0], &[1.0, -1.0]).unwrap();
        let tent = sq.antiderivative();
        assert_abs_diff_eq!(tent.eval(0.5), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(tent.eval(1.0), 0.0, epsilon = 1e-15);
        let two_x = PiecewiseFunction::polynomial(0.0, 1.0, &[0.0, 2.0]);
        let f = two_x.antiderivative();
        assert_abs_diff_eq!(f.eval(0.7), 0.49, epsilon = 1e-15);
    }

    #[test]
    fn lattice_examples() {
        let f = PiecewiseFunction::indicator(0.0, 1.0, 0.0, 0.5, 1.0).unwrap();
        let g = PiecewiseFunction::indicator(0.0, 1.0, 0.5, 1.0, 1.0).unwrap();
        let m = f.min(&g).unwrap();
        assert!(m.is_zero());
        assert_eq!(f.support_overlap(&g).unwrap(), 0.0);

        let x = PiecewiseFunction::polynomial(0.0, 1.0, &[0.0, 1.0]);
        let half = PiecewiseFunction::constant(0.0, 1.0, 0.5);
        let mx = x.max(&half).unwrap();
        assert!(mx.breakpoints().contains(&0.5));
        assert_eq!(mx.eval(0.2), 0.5);
        assert_eq!(mx.eval(0.8), 0.8);

        let neg = PiecewiseFunction::constant(0.0, 1.0, -3.0);
        assert_eq!(neg.abs(), PiecewiseFunction::constant(0.0, 1.0, 3.0));

        let quad = PiecewiseFunction::polynomial(0.0, 1.0, &[0.06, -0.5, 1.0]); // roots .2, .3
        let a = quad.abs();
        assert_eq!(a.cells(), 3);
        assert_abs_diff_eq!(a.breakpoints()[1], 0.2, epsilon = 1e-12);
        assert!(a.eval(0.25) > 0.0);
    }

    #[test]
    fn sup_and_integrals() {
        let quad = PiecewiseFunction::polynomial(0.0, 1.0, &[0.0, 1.0, -1.0]);
        assert_abs_diff_eq!(quad.sup_abs(), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(quad.integral(), 1.0 / 6.0, epsilon = 1e-15);
        let x = PiecewiseFunction::polynomial(0.0, 1.0, &[0.0, 1.0]);
        let y = PiecewiseFunction::polynomial(0.0, 1.0, &[1.0, -1.0]);
        assert_abs_diff_eq!(x.inner(&y).unwrap(), 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let f = PiecewiseFunction::from_global(
            vec![0.0, 0.1, 1.0 / 3.0, 1.0],
            vec![vec![0.1], vec![1.0 / 7.0, 2.0f64.sqrt()], vec![std::f64::consts::PI]],
        )
        .unwrap();
        let s = serde_json::to_string(&f).unwrap();
        let g: PiecewiseFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
        assert!(serde_json::from_str::<PiecewiseFunction>(
            r#"{"breakpoints":[0,1,0.5],"pieces":[[1],[2]]}"#
        )
        .is_err());
    }
}
