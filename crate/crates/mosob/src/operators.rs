//! Integral operators `Au(x) = ∫ k(x,y) u(y) dy` between modular spaces:
//! boundedness certificates and empirical norm estimates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{condition_v, Status};
use crate::expr::{Expr, ParseError, Var, Vars};
use crate::function_rep::quadrature::gauss_rule;
use crate::function_rep::{PiecewiseError, PiecewiseFunction};
use crate::mo_function::{MoFunction, MusielakOrlicz};
use crate::norms::{luxemburg_norm, NormConfig, NormError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("kernel expression: {0}")]
    Kernel(#[from] ParseError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Piecewise(#[from] PiecewiseError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Kernel {
    /// `k(x,y) = χ_(α,x)(y)`.
    Volterra,
    Expression { k: Expr },
}

impl Kernel {
    /// Parse `k(x, y)`; the word `volterra` selects the Volterra kernel.
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        if src.trim().eq_ignore_ascii_case("volterra") {
            return Ok(Kernel::Volterra);
        }
        let k = Expr::parse(src)?;
        k.check_vars(&[Var::X, Var::Y])?;
        Ok(Kernel::Expression { k })
    }

    pub fn eval(&self, alpha: f64, x: f64, y: f64) -> f64 {
        match self {
            Kernel::Volterra => {
                if y > alpha && y < x {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Expression { k } => k.eval(&Vars::xy(x, y)),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Kernel::Volterra => "volterra".to_string(),
            Kernel::Expression { k } => k.to_string(),
        }
    }
}

/// Constants establishing `‖Au‖_{Φ₂} ≤ bound_on_norm · ‖u‖_{Φ₁}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessCertificate {
    pub certified: bool,
    /// `b + b(β−α) + 1 + ∫Φ₂(x,b) dx`.
    pub l: f64,
    pub b: f64,
    pub integral_at_b: f64,
    /// Kernel scale `λ` at which the product-space modular was controlled.
    pub scale: f64,
    /// `I_ψ(λk)` (an upper bound for the Volterra certificate).
    #[serde(with = "crate::ext::real")]
    pub i_psi_of_kernel: f64,
    /// Upper bound on the Luxemburg norm of `k` in `L^ψ`.
    #[serde(with = "crate::ext::real")]
    pub kernel_norm_bound: f64,
    #[serde(with = "crate::ext::real")]
    pub bound_on_norm: f64,
}

/// `l = b + b(β−α) + 1 + ∫Φ(x,b) dx`, the constant of the embedding sandwiches.
pub fn embedding_constant(b: f64, length: f64, integral_at_b: f64) -> f64 {
    b + b * length + 1.0 + integral_at_b
}

/// Exact antiderivative `x ↦ ∫_α^x u`.
pub fn apply_volterra(u: &PiecewiseFunction) -> PiecewiseFunction {
    u.antiderivative()
}

/// Certificate for the Volterra operator on `L^Φ`, from condition (V).
///
/// With `Φ*(x,c) ≤ M` a.e. and `∫Φ(x,b) < ∞`, `c₁ = c·min(1, b/M)` gives
/// `Φ*(x,c₁) ≤ b`, hence `I_ψ(c₁k) ≤ (β−α)∫Φ(x,b) dx`.
pub fn volterra_certificate(phi: &MoFunction) -> Result<BoundednessCertificate, OperatorError> {
    let v = condition_v(phi);
    let consts = match (v.verdict.status, v.constants) {
        (Status::Holds, Some(c)) => c,
        _ => return Err(OperatorError::Precondition("condition (V) is not established".into())),
    };
    let len = phi.domain().length();
    let c1 = consts.c * (consts.b / consts.conj_bound).min(1.0);
    let modular_bound = len * consts.integral_at_b;
    let kernel_norm_bound = modular_bound.max(1.0) / c1;
    let l = embedding_constant(consts.b, len, consts.integral_at_b);
    Ok(BoundednessCertificate {
        certified: true,
        l,
        b: consts.b,
        integral_at_b: consts.integral_at_b,
        scale: c1,
        i_psi_of_kernel: modular_bound,
        kernel_norm_bound,
        bound_on_norm: l * kernel_norm_bound,
    })
}

/// Number of Gauss cells per axis for the 2-D modular (16 nodes each).
const KERNEL_CELLS: usize = 8;

/// `I_ψ(λk) = ∫∫ Φ₂(x, Φ₁*(y, λ|k(x,y)|)) dy dx` on a tensor Gauss grid;
/// the Volterra kernel is integrated over `y < x` exactly.
pub fn kernel_modular(phi1: &dyn MusielakOrlicz, phi2: &dyn MusielakOrlicz, k: &Kernel, lambda: f64) -> f64 {
    let dom = phi2.domain();
    let rule = gauss_rule(16);
    let cells = |a: f64, b: f64| -> Vec<(f64, f64)> {
        let mut pts = vec![a];
        for i in 1..KERNEL_CELLS {
            pts.push(a + (b - a) * i as f64 / KERNEL_CELLS as f64);
        }
        pts.push(b);
        pts.windows(2).map(|w| (w[0], w[1])).collect()
    };
    let nodes = |a: f64, b: f64| -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(KERNEL_CELLS * rule.nodes.len());
        for (ca, cb) in cells(a, b) {
            let (c, h) = (0.5 * (ca + cb), 0.5 * (cb - ca));
            for (z, w) in rule.nodes.iter().zip(&rule.weights) {
                out.push((c + h * z, w * h));
            }
        }
        out
    };
    let integrand = |x: f64, y: f64, kv: f64| phi2.value(x, phi1.conjugate_value(y, lambda * kv.abs()));
    let mut total = 0.0;
    for (x, wx) in nodes(dom.alpha, dom.beta) {
        let inner: f64 = match k {
            Kernel::Volterra => nodes(dom.alpha, x).into_iter().map(|(y, wy)| wy * integrand(x, y, 1.0)).sum(),
            Kernel::Expression { .. } => nodes(dom.alpha, dom.beta)
                .into_iter()
                .map(|(y, wy)| {
                    let kv = k.eval(dom.alpha, x, y);
                    if kv == 0.0 {
                        0.0
                    } else {
                        wy * integrand(x, y, kv)
                    }
                })
                .sum(),
        };
        total += wx * inner;
        if total.is_infinite() {
            return f64::INFINITY;
        }
    }
    total
}

/// Certificate for a general kernel: find `b` with `∫Φ₂(x,b) < ∞` and the
/// largest `λ` on a dyadic schedule (refined by bisection) with `I_ψ(λk) ≤ 1`.
/// An uncertified result is returned, not an error, when no scale works.
pub fn kernel_certificate(phi1: &MoFunction, phi2: &MoFunction, k: &Kernel) -> BoundednessCertificate {
    let dom = phi2.domain();
    let mut b = 1.0f64;
    let mut integral = None;
    for _ in 0..=30 {
        let g = |x: f64| phi2.value(x, b);
        if let Ok(v) = dom.integrate(&g, phi2.singularities()) {
            if v.is_finite() {
                integral = Some(v);
                break;
            }
        }
        b *= 0.5;
    }
    let uncertified = |b: f64, integral: f64| BoundednessCertificate {
        certified: false,
        l: embedding_constant(b, dom.length(), integral),
        b,
        integral_at_b: integral,
        scale: 0.0,
        i_psi_of_kernel: f64::INFINITY,
        kernel_norm_bound: f64::INFINITY,
        bound_on_norm: f64::INFINITY,
    };
    let Some(integral) = integral else {
        return uncertified(b, f64::INFINITY);
    };
    let l = embedding_constant(b, dom.length(), integral);
    let m = |lam: f64| kernel_modular(phi1, phi2, k, lam);
    let done = |scale: f64, i: f64, norm: f64| BoundednessCertificate {
        certified: true,
        l,
        b,
        integral_at_b: integral,
        scale,
        i_psi_of_kernel: i,
        kernel_norm_bound: norm,
        bound_on_norm: l * norm,
    };
    // bracket: lo with I ≤ 1, hi with I > 1
    let (mut lo, mut hi);
    let at_one = m(1.0);
    if at_one <= 1.0 {
        lo = 1.0;
        hi = f64::NAN;
        for _ in 0..40 {
            let cand = 2.0 * lo;
            if m(cand) <= 1.0 {
                lo = cand;
            } else {
                hi = cand;
                break;
            }
        }
        if hi.is_nan() {
            let i = m(lo);
            let norm = if i == 0.0 { 0.0 } else { 1.0 / lo };
            return done(lo, i, norm);
        }
    } else {
        hi = 1.0;
        lo = f64::NAN;
        for _ in 0..40 {
            let cand = 0.5 * hi;
            if m(cand) <= 1.0 {
                lo = cand;
                break;
            }
            hi = cand;
        }
        if lo.is_nan() {
            return uncertified(b, integral);
        }
    }
    for _ in 0..20 {
        let mid = (lo * hi).sqrt();
        if m(mid) <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    done(lo, m(lo), 1.0 / lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub trials: usize,
    pub seed: u64,
    /// Cells of the random step inputs.
    pub cells: usize,
    /// Grid for the power iteration and for sampling `Au` of expression kernels.
    pub grid: usize,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig { trials: 16, seed: 0, cells: 32, grid: 2048 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorEstimate {
    pub value: f64,
    pub random_trials: f64,
    pub power_iteration: Option<f64>,
}

/// `c` with `Φ(x,t) = c t²` at sampled points, if any.
fn quadratic_scale(phi: &dyn MusielakOrlicz) -> Option<f64> {
    let dom = phi.domain();
    let c = phi.value(dom.alpha + 0.5 * dom.length(), 1.0);
    if !(c > 0.0 && c.is_finite()) {
        return None;
    }
    for x in dom.midpoints(16) {
        for t in [1e-3, 0.1, 0.5, 1.0, 2.0, 10.0, 1e3] {
            let v = phi.value(x, t);
            if !((v - c * t * t).abs() <= 1e-12 * c * t * t) {
                return None;
            }
        }
    }
    Some(c)
}

/// `‖K‖₂` for the midpoint discretization on `n` points, by power iteration on `KᵀK`.
pub fn power_iteration_l2(alpha: f64, beta: f64, k: &Kernel, n: usize) -> f64 {
    let h = (beta - alpha) / n as f64;
    let xs: Vec<f64> = (0..n).map(|i| alpha + h * (i as f64 + 0.5)).collect();
    let (apply, apply_t): (Box<dyn Fn(&[f64]) -> Vec<f64>>, Box<dyn Fn(&[f64]) -> Vec<f64>>) = match k {
        Kernel::Volterra => {
            // (Ku)_i = h (Σ_{j<i} u_j + u_i/2)
            let fwd = move |u: &[f64]| {
                let mut acc = 0.0;
                u.iter()
                    .map(|&v| {
                        let r = h * (acc + 0.5 * v);
                        acc += v;
                        r
                    })
                    .collect()
            };
            let bwd = move |u: &[f64]| {
                let mut out = vec![0.0; u.len()];
                let mut acc = 0.0;
                for i in (0..u.len()).rev() {
                    out[i] = h * (acc + 0.5 * u[i]);
                    acc += u[i];
                }
                out
            };
            (Box::new(fwd), Box::new(bwd))
        }
        Kernel::Expression { .. } => {
            let m: Vec<f64> = xs
                .iter()
                .flat_map(|&x| xs.iter().map(move |&y| (x, y)))
                .map(|(x, y)| h * k.eval(alpha, x, y))
                .collect();
            let m2 = m.clone();
            let fwd = move |u: &[f64]| m.chunks(n).map(|row| row.iter().zip(u).map(|(a, b)| a * b).sum()).collect();
            let bwd = move |u: &[f64]| {
                let mut out = vec![0.0; n];
                for (row, &ui) in m2.chunks(n).zip(u) {
                    for (o, a) in out.iter_mut().zip(row) {
                        *o += a * ui;
                    }
                }
                out
            };
            (Box::new(fwd), Box::new(bwd))
        }
    };
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (i as f64 * 0.7).sin()).collect();
    let mut sigma2 = 0.0;
    for _ in 0..500 {
        let nv = norm(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|a| *a /= nv);
        let w = apply_t(&apply(&v));
        let s = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let converged = (s - sigma2).abs() <= 1e-13 * s.abs();
        sigma2 = s;
        v = w;
        if converged {
            break;
        }
    }
    sigma2.max(0.0).sqrt()
}

/// `Au` for a step function `u` and an expression kernel, as a piecewise
/// linear interpolant of samples.
fn apply_expression(k: &Kernel, u: &PiecewiseFunction, grid: usize) -> Result<PiecewiseFunction, PiecewiseError> {
    let (a, b) = (u.alpha(), u.beta());
    let rule = gauss_rule(8);
    let cells: Vec<(f64, f64, f64)> = u.cell_iter().map(|(ca, cb, c)| (ca, cb, c[0])).collect();
    let at = |x: f64| -> f64 {
        let mut s = 0.0;
        for &(ca, cb, c) in &cells {
            if c == 0.0 {
                continue;
            }
            let (m, h) = (0.5 * (ca + cb), 0.5 * (cb - ca));
            for (z, w) in rule.nodes.iter().zip(&rule.weights) {
                s += c * w * h * k.eval(a, x, m + h * z);
            }
        }
        s
    };
    let bps: Vec<f64> = (0..=grid).map(|i| a + (b - a) * i as f64 / grid as f64).collect();
    let vals: Vec<f64> = bps.iter().map(|&x| at(x)).collect();
    let pieces = bps
        .windows(2)
        .zip(vals.windows(2))
        .map(|(x, v)| vec![v[0], (v[1] - v[0]) / (x[1] - x[0])])
        .collect();
    PiecewiseFunction::new(bps, pieces)
}

/// Empirical lower bound on `‖A‖ : L^{Φ₁} → L^{Φ₂}`: the best ratio over
/// random heavy-tailed step inputs, plus power iteration when both
/// functions are multiples of the same `c t²`.
pub fn estimate_operator_norm(
    phi1: &MoFunction,
    phi2: &MoFunction,
    k: &Kernel,
    cfg: &EstimateConfig,
) -> Result<OperatorEstimate, OperatorError> {
    if cfg.trials == 0 {
        return Err(OperatorError::Precondition("at least one trial is needed".into()));
    }
    let dom = phi1.domain();
    let ncfg = NormConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cauchy = Cauchy::new(0.0, 1.0).expect("valid scale");
    let bps: Vec<f64> = (0..=cfg.cells)
        .map(|i| dom.alpha + dom.length() * i as f64 / cfg.cells as f64)
        .collect();
    let mut best = 0.0f64;
    for _ in 0..cfg.trials {
        let vals: Vec<f64> = (0..cfg.cells).map(|_| cauchy.sample(&mut rng)).collect();
        let u = PiecewiseFunction::step(bps.clone(), &vals)?;
        let nu = luxemburg_norm(phi1, &u, &ncfg)?.value;
        if nu == 0.0 {
            continue;
        }
        let au = match k {
            Kernel::Volterra => apply_volterra(&u),
            Kernel::Expression { .. } => apply_expression(k, &u, 256)?,
        };
        let na = luxemburg_norm(phi2, &au, &ncfg)?.value;
        best = best.max(na / nu);
    }
    let power = match (quadratic_scale(phi1), quadratic_scale(phi2)) {
        (Some(c1), Some(c2)) if (c1 - c2).abs() <= 1e-12 * c1 => {
            Some(power_iteration_l2(dom.alpha, dom.beta, k, cfg.grid))
        }
        _ => None,
    };
    Ok(OperatorEstimate { value: best.max(power.unwrap_or(0.0)), random_trials: best, power_iteration: power })
}
