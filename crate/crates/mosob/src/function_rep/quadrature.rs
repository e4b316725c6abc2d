//! Gauss-Legendre rules and adaptive composite integration.

use std::collections::BTreeMap;
use std::collections::BinaryHeap;
use std::cmp::Ordering;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("quadrature did not converge (estimate {partial}, error estimate {error:e})")]
    NoConvergence { partial: f64, error: f64 },
    #[error("integrand is not a number at x = {x}")]
    NotANumber { x: f64 },
}

impl QuadratureError {
    pub fn partial(&self) -> Option<f64> {
        match self {
            QuadratureError::NoConvergence { partial, .. } => Some(*partial),
            QuadratureError::NotANumber { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Fixed number of equal sub-cells per integration interval.
    Fixed { cells: usize },
    /// Bisect the worst sub-interval until the summed error estimate is below `abs_tol`.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub scheme: Scheme,
    pub order: usize,
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { scheme: Scheme::Adaptive, order: 16, abs_tol: 1e-10, max_depth: 40 }
    }
}

/// Nodes and weights on [-1, 1].
#[derive(Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    fn compute(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussRule { nodes, weights }
    }

    /// Integral of `f` over `[a, b]`; `Err(x)` carries a NaN location.
    pub fn apply(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<f64, f64> {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = 0.0;
        for (z, w) in self.nodes.iter().zip(&self.weights) {
            let x = c + h * z;
            let v = f(x);
            if v.is_nan() {
                return Err(x);
            }
            if v == f64::INFINITY {
                return Ok(f64::INFINITY);
            }
            s += w * v;
        }
        Ok(s * h)
    }
}

// Legendre polynomial P_n and its derivative at z.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Cached rule of the given order.
pub fn gauss_rule(order: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<BTreeMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(order).or_insert_with(|| Arc::new(GaussRule::compute(order))).clone()
}

struct Segment {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    err: f64,
    depth: u32,
}

impl Segment {
    fn value(&self) -> f64 {
        self.left + self.right
    }
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

const MAX_SEGMENTS: usize = 20_000;
const STAGNATION_WINDOW: usize = 256;
/// Error floor relative to the running value, near the rounding level of a sum.
const REL_FLOOR: f64 = 1e-14;

/// Integral of `f` over `[a, b]`. A `+∞` integrand value that persists on
/// sub-intervals down to the depth cap makes the result `+∞`.
pub fn integrate(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, QuadratureError> {
    if b <= a {
        return Ok(0.0);
    }
    let rule = gauss_rule(cfg.order);
    let gl = |lo: f64, hi: f64| rule.apply(f, lo, hi).map_err(|x| QuadratureError::NotANumber { x });

    if let Scheme::Fixed { cells } = cfg.scheme {
        let n = cells.max(1);
        let h = (b - a) / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let lo = a + h * i as f64;
            let hi = if i + 1 == n { b } else { lo + h };
            s += gl(lo, hi)?;
        }
        return Ok(s);
    }

    let make = |lo: f64, hi: f64, whole: f64, depth: u32| -> Result<Segment, QuadratureError> {
        let m = 0.5 * (lo + hi);
        let left = gl(lo, m)?;
        let right = gl(m, hi)?;
        let sum = left + right;
        let err = if sum.is_infinite() || whole.is_infinite() {
            f64::INFINITY
        } else {
            (whole - sum).abs()
        };
        Ok(Segment { a: lo, b: hi, left, right, err, depth })
    };

    let whole = gl(a, b)?;
    let first = make(a, b, whole, 0)?;
    // Running error total; infinite estimates are counted separately so the
    // sum never sees `inf - inf`.
    let mut finite_err = 0.0;
    let mut inf_count = 0usize;
    let account = |e: f64, sign: f64, fe: &mut f64, ic: &mut usize| {
        if e.is_infinite() {
            if sign > 0.0 {
                *ic += 1
            } else {
                *ic -= 1
            }
        } else {
            *fe += sign * e;
        }
    };
    account(first.err, 1.0, &mut finite_err, &mut inf_count);
    let mut running = first.value();
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut frozen: Vec<Segment> = Vec::new();

    let tol = |running: f64| if running.is_finite() { cfg.abs_tol.max(REL_FLOOR * running.abs()) } else { cfg.abs_tol };
    let mut splits = 0usize;
    let mut checkpoint = f64::INFINITY;
    while inf_count > 0 || finite_err > tol(running) {
        // stop once the error estimate has settled at a noise floor
        if splits % STAGNATION_WINDOW == 0 && splits > 0 && inf_count == 0 {
            if finite_err > 0.9 * checkpoint {
                break;
            }
            checkpoint = finite_err;
        }
        let Some(seg) = heap.pop() else { break };
        let m = 0.5 * (seg.a + seg.b);
        let splittable = seg.depth < cfg.max_depth && m > seg.a && m < seg.b;
        if !splittable || heap.len() + frozen.len() > MAX_SEGMENTS {
            if seg.value().is_infinite() {
                return Ok(f64::INFINITY);
            }
            frozen.push(seg);
            continue;
        }
        splits += 1;
        account(seg.err, -1.0, &mut finite_err, &mut inf_count);
        let l = make(seg.a, m, seg.left, seg.depth + 1)?;
        let r = make(m, seg.b, seg.right, seg.depth + 1)?;
        account(l.err, 1.0, &mut finite_err, &mut inf_count);
        account(r.err, 1.0, &mut finite_err, &mut inf_count);
        running += l.value() + r.value() - seg.value();
        heap.push(l);
        heap.push(r);
    }
    let total_err = finite_err.max(0.0);

    let value: f64 = heap.iter().chain(frozen.iter()).map(|s| s.value()).sum();
    if value.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if total_err > tol(value) {
        return Err(QuadratureError::NoConvergence { partial: value, error: total_err });
    }
    Ok(value)
}

/// Integral over `[a, b]` split at the given interior points; the tolerance
/// is shared out in proportion to length.
pub fn integrate_split(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    splits: &[f64],
    cfg: &QuadratureConfig,
) -> Result<f64, QuadratureError> {
    let mut pts = vec![a];
    let mut inner: Vec<f64> = splits.iter().copied().filter(|&s| s > a && s < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(b);
    let total = b - a;
    let mut sum = 0.0;
    let mut partial_err: Option<QuadratureError> = None;
    for w in pts.windows(2) {
        let mut c = *cfg;
        c.abs_tol = cfg.abs_tol * (w[1] - w[0]) / total;
        match integrate(f, w[0], w[1], &c) {
            Ok(v) => sum += v,
            Err(QuadratureError::NoConvergence { partial, error }) => {
                sum += partial;
                let e = match partial_err {
                    Some(QuadratureError::NoConvergence { error: e0, .. }) => e0 + error,
                    _ => error,
                };
                partial_err = Some(QuadratureError::NoConvergence { partial: 0.0, error: e });
            }
            Err(e) => return Err(e),
        }
        if sum.is_infinite() {
            return Ok(f64::INFINITY);
        }
    }
    match partial_err {
        Some(QuadratureError::NoConvergence { error, .. }) => {
            Err(QuadratureError::NoConvergence { partial: sum, error })
        }
        _ => Ok(sum),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_is_exact_for_polynomials() {
        let r = gauss_rule(16);
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // exact up to degree 31
        let v = r.apply(&|x: f64| x.powi(30), -1.0, 1.0).unwrap();
        assert!((v - 2.0 / 31.0).abs() < 1e-14);
        let v = r.apply(&|x: f64| 3.0 * x * x, 0.0, 2.0).unwrap();
        assert!((v - 8.0).abs() < 1e-13);
        let r5 = gauss_rule(5);
        assert_eq!(r5.nodes[2], 0.0);
        assert!((r5.weights[2] - 128.0 / 225.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaks_and_infinity() {
        let cfg = QuadratureConfig::default();
        let v = integrate(&|x: f64| 1.0 / (1e-4 + (x - 0.3).powi(2)), 0.0, 1.0, &cfg).unwrap();
        let exact = ((0.7f64 / 1e-2).atan() + (0.3f64 / 1e-2).atan()) / 1e-2;
        assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
        let v = integrate(&|x: f64| if x > 0.5 { f64::INFINITY } else { 1.0 }, 0.0, 1.0, &cfg)
            .unwrap();
        assert_eq!(v, f64::INFINITY);
        let v = integrate(&|x: f64| x.sqrt(), 0.0, 1.0, &cfg).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn split_integration() {
        let cfg = QuadratureConfig::default();
        let f = |x: f64| if x < 0.25 { 1.0 } else { 3.0 };
        let v = integrate_split(&f, 0.0, 1.0, &[0.25], &cfg).unwrap();
        assert!((v - 2.5).abs() < 1e-14);
    }
}
