//! Musielak-Orlicz functions `Φ(x, t)` and their pointwise calculus.
//!
//! Values are `f64` with `f64::INFINITY` as the single extended value; every
//! routine here treats it as saturating (`∞ + a = ∞`, `0 · Φ = 0` is never
//! formed).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{range_on, Expr, Node, ParseError, RangeEstimate, Var, Vars};
use crate::function_rep::Domain;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MoError {
    #[error("x = {x} lies outside the interval [{alpha}, {beta}]")]
    OutsideDomain { x: f64, alpha: f64, beta: f64 },
    #[error("argument t = {0} must be nonnegative")]
    NegativeArgument(f64),
    #[error("Φ({x}, {t}) is infinite; no derivative there")]
    ExtendedValue { x: f64, t: f64 },
    #[error("level {level} exceeds sup_u Φ({x}, u)")]
    UnreachableLevel { x: f64, level: f64 },
    #[error("invalid function: {0}")]
    Invalid(String),
    #[error("expression error in `{field}`: {error}")]
    Expression { field: String, error: ParseError },
}

/// Interface shared by concrete families and derived functions such as the conjugate.
pub trait MusielakOrlicz: Send + Sync {
    fn domain(&self) -> &Domain;

    /// `Φ(x, t)` for `t ≥ 0`; no argument checks.
    fn value(&self, x: f64, t: f64) -> f64;

    /// Right derivative in `t`.
    fn derivative(&self, x: f64, t: f64) -> f64 {
        let h = 1e-7 * t.max(1e-3);
        let a = self.value(x, t);
        let b = self.value(x, t + h);
        if a.is_infinite() || b.is_infinite() {
            f64::INFINITY
        } else {
            (b - a) / h
        }
    }

    /// `Φ*(x, t) = sup_s (st − Φ(x, s))`.
    fn conjugate_value(&self, x: f64, t: f64) -> f64 {
        legendre(&|s| self.value(x, s), t)
    }

    /// Right derivative of `Φ*` in `t`.
    fn conjugate_derivative(&self, x: f64, t: f64) -> f64 {
        let h = 1e-7 * t.max(1e-3);
        let a = self.conjugate_value(x, t);
        let b = self.conjugate_value(x, t + h);
        if a.is_infinite() || b.is_infinite() {
            f64::INFINITY
        } else {
            (b - a) / h
        }
    }

    /// Points of `[α, β]` where the parameters blow up; used as quadrature split points.
    fn singularities(&self) -> &[f64] {
        &[]
    }

    fn describe(&self) -> String;
}

/// The complementary function `Φ*`, evaluated through `conjugate_value`.
pub struct Conjugate<'a>(pub &'a dyn MusielakOrlicz);

impl MusielakOrlicz for Conjugate<'_> {
    fn domain(&self) -> &Domain {
        self.0.domain()
    }
    fn value(&self, x: f64, t: f64) -> f64 {
        self.0.conjugate_value(x, t)
    }
    fn derivative(&self, x: f64, t: f64) -> f64 {
        self.0.conjugate_derivative(x, t)
    }
    fn singularities(&self) -> &[f64] {
        self.0.singularities()
    }
    fn describe(&self) -> String {
        format!("conjugate of {}", self.0.describe())
    }
}

/// Numerical Legendre transform `sup_{s ≥ 0} (st − f(s))` of a convex,
/// nondecreasing `f` with `f(0) = 0` (values may be `+∞`).
///
/// The maximizer is bracketed on the lattice `s = 2^k`: upwards until the
/// slope `f(s)/s` reaches `t` (the increments stop growing), downwards
/// until three consecutive decreases. The sup is declared `+∞` when
/// `f(s)/s` stalls below `t` across ten doublings (increments keep doubling).
/// Golden-section search refines the lattice argmax.
pub fn legendre(f: &dyn Fn(f64) -> f64, t: f64) -> f64 {
    if !(t > 0.0) {
        return 0.0;
    }
    let g = |s: f64| {
        let v = f(s);
        if v == f64::INFINITY {
            f64::NEG_INFINITY
        } else {
            s * t - v
        }
    };

    const STALL: usize = 10;
    let mut lattice: Vec<(f64, f64)> = Vec::new();
    // Upward walk.
    let mut s = 1.0f64;
    let mut ratios: Vec<f64> = Vec::new();
    loop {
        let v = f(s);
        let gs = if v == f64::INFINITY { f64::NEG_INFINITY } else { s * t - v };
        lattice.push((s, gs));
        if v == f64::INFINITY {
            break;
        }
        let r = v / s;
        if r >= t {
            break;
        }
        ratios.push(r);
        if ratios.len() > STALL {
            let old = ratios[ratios.len() - 1 - STALL];
            let rel = (r - old) / (t - r);
            if rel <= 1e-9 && s > 1e6 {
                return f64::INFINITY;
            }
        }
        if s > 1e300 {
            return f64::INFINITY;
        }
        s *= 2.0;
    }
    // Downward walk.
    let mut s = 0.5f64;
    let mut dec = 0;
    let mut last = lattice[0].1;
    while s > 1e-300 {
        let gs = g(s);
        lattice.push((s, gs));
        if gs < last {
            dec += 1;
            if dec >= 3 {
                break;
            }
        } else {
            dec = 0;
        }
        last = gs;
        s *= 0.5;
    }
    lattice.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (imax, &(s_best, g_best)) = lattice
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("nonempty lattice");
    if g_best == f64::NEG_INFINITY {
        return 0.0;
    }
    let lo = if imax == 0 { 0.0 } else { lattice[imax - 1].0 };
    let hi = if imax + 1 == lattice.len() { 2.0 * s_best } else { lattice[imax + 1].0 };
    let (_, gv) = golden_max(&g, lo, hi, 1e-13);
    gv.max(g_best).max(0.0)
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
pub fn golden_max(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, rel_tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut g1 = g(x1);
    let mut g2 = g(x2);
    for _ in 0..200 {
        if hi - lo <= rel_tol * hi.abs().max(1e-300) {
            break;
        }
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + INV_PHI * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - INV_PHI * (hi - lo);
            g1 = g(x1);
        }
    }
    if g1 >= g2 {
        (x1, g1)
    } else {
        (x2, g2)
    }
}

/// `inf {u ≥ 0 : f(u) ≥ level}` for nondecreasing `f`; `None` if the level is never reached.
/// The returned point is the upper end of the final bracket, so `f(u) ≥ level`.
pub fn inverse(f: &dyn Fn(f64) -> f64, level: f64, abs_tol: f64) -> Option<f64> {
    if !(level > 0.0) {
        return Some(0.0);
    }
    let mut hi = 1.0f64;
    while f(hi) < level {
        hi *= 2.0;
        if hi > 1e300 {
            return None;
        }
    }
    let mut lo = 0.0f64;
    while hi > 1e-300 && f(0.5 * hi) >= level {
        hi *= 0.5;
    }
    if hi > 1e-300 {
        lo = 0.5 * hi;
    }
    if f(lo) >= level {
        return Some(lo);
    }
    loop {
        let width = hi - lo;
        if width <= abs_tol.min(1e-13 * hi) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Exponent `p(x)` with cached range over the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentField {
    pub expr: Expr,
    pub range: RangeEstimate,
}

impl ExponentField {
    pub fn new(expr: Expr, domain: &Domain, grid: usize) -> Self {
        let range = range_on(&expr, domain.alpha, domain.beta, grid);
        ExponentField { expr, range }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.expr.eval_x(x)
    }

    pub fn lower(&self) -> f64 {
        self.range.min
    }

    pub fn upper(&self) -> f64 {
        self.range.max
    }
}

/// Nonnegative weight `a(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightField {
    pub expr: Expr,
    pub range: RangeEstimate,
    #[serde(with = "crate::ext::real")]
    pub integral: f64,
    pub integrable_on_domain: bool,
}

impl WeightField {
    pub fn new(expr: Expr, domain: &Domain, grid: usize, singularities: &[f64]) -> Self {
        let range = range_on(&expr, domain.alpha, domain.beta, grid);
        let g = |x: f64| expr.eval_x(x).max(0.0);
        let (integral, integrable_on_domain) = match domain.integrate(&g, singularities) {
            Ok(v) if v.is_finite() => (v, true),
            Ok(v) => (v, false),
            Err(e) => (e.partial().unwrap_or(f64::NAN), false),
        };
        WeightField { expr, range, integral, integrable_on_domain }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.expr.eval_x(x)
    }
}

/// Samples `values[i][j] = Φ(xs[i], ts[j])`; piecewise linear in `t`, linear in `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    #[serde(with = "crate::ext::real_rows")]
    pub values: Vec<Vec<f64>>,
}

impl Table {
    fn validate(&self) -> Result<(), MoError> {
        let bad = |m: &str| Err(MoError::Invalid(format!("tabulated: {m}")));
        if self.xs.is_empty() || self.xs.windows(2).any(|w| w[1] <= w[0]) {
            return bad("x samples must be strictly increasing");
        }
        if self.ts.len() < 2 || self.ts[0] != 0.0 || self.ts.windows(2).any(|w| w[1] <= w[0]) {
            return bad("t samples must start at 0 and increase strictly");
        }
        if self.values.len() != self.xs.len() {
            return bad("one row of values per x sample");
        }
        for row in &self.values {
            if row.len() != self.ts.len() {
                return bad("each row needs one value per t sample");
            }
            if row[0] != 0.0 {
                return bad("Φ(x, 0) must be 0");
            }
            let mut prev_slope = 0.0;
            for j in 1..row.len() {
                if row[j].is_nan() || row[j] < row[j - 1] {
                    return bad("rows must be nondecreasing");
                }
                if row[j].is_infinite() {
                    if row[j..].iter().any(|v| v.is_finite()) {
                        return bad("+inf must persist once reached");
                    }
                    break;
                }
                let slope = (row[j] - row[j - 1]) / (self.ts[j] - self.ts[j - 1]);
                if slope < prev_slope * (1.0 - 1e-12) - 1e-15 {
                    return bad("rows must be convex");
                }
                prev_slope = slope;
            }
        }
        Ok(())
    }

    fn row_value(&self, i: usize, t: f64) -> f64 {
        let row = &self.values[i];
        let ts = &self.ts;
        let n = ts.len();
        let j = match ts.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(j) => return row[j],
            Err(j) => j,
        };
        if j >= n {
            let (a, b) = (row[n - 2], row[n - 1]);
            if b.is_infinite() {
                return f64::INFINITY;
            }
            let slope = (b - a) / (ts[n - 1] - ts[n - 2]);
            return b + slope * (t - ts[n - 1]);
        }
        let (a, b) = (row[j - 1], row[j]);
        if b.is_infinite() {
            return f64::INFINITY;
        }
        let w = (t - ts[j - 1]) / (ts[j] - ts[j - 1]);
        a + w * (b - a)
    }

    fn value(&self, x: f64, t: f64) -> f64 {
        let xs = &self.xs;
        if xs.len() == 1 || x <= xs[0] {
            return self.row_value(0, t);
        }
        if x >= *xs.last().unwrap() {
            return self.row_value(xs.len() - 1, t);
        }
        let i = xs.partition_point(|&v| v <= x) - 1;
        let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
        let a = self.row_value(i, t);
        let b = self.row_value(i + 1, t);
        match (w == 0.0, w == 1.0) {
            (true, _) => a,
            (_, true) => b,
            _ if a.is_infinite() || b.is_infinite() => f64::INFINITY,
            _ => (1.0 - w) * a + w * b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Family {
    Orlicz { phi: Expr },
    VariableExponent { p: ExponentField },
    DoublePhase { p: ExponentField, r: ExponentField, a: WeightField },
    Tabulated(Table),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalculusConfig {
    /// Absolute bisection tolerance on arguments of the generalized inverse.
    pub inverse_abs_tol: f64,
    /// Step of the one-sided difference quotient for tabulated functions.
    pub difference_step: f64,
    /// Grid size of the range analysis for exponent fields.
    pub range_grid: usize,
}

impl Default for CalculusConfig {
    fn default() -> Self {
        CalculusConfig { inverse_abs_tol: 1e-10, difference_step: 1e-7, range_grid: 2048 }
    }
}

/// A concrete Musielak-Orlicz function.
#[derive(Debug, Clone)]
pub struct MoFunction {
    family: Family,
    domain: Domain,
    singularities: Vec<f64>,
    config: CalculusConfig,
    // d/dt of the Orlicz expression
    orlicz_derivative: Option<Node>,
}

fn expr_err(field: &str) -> impl Fn(ParseError) -> MoError + '_ {
    move |error| MoError::Expression { field: field.to_string(), error }
}

impl MoFunction {
    /// `φ(t)` given as an expression in `t`.
    pub fn orlicz(phi: &str, domain: Domain) -> Result<Self, MoError> {
        let e = Expr::parse(phi).map_err(expr_err("phi"))?;
        e.check_vars(&[Var::T]).map_err(expr_err("phi"))?;
        MoFunction::from_family(Family::Orlicz { phi: e }, domain, vec![], CalculusConfig::default())
    }

    /// `t^{p(x)}/p(x)`.
    pub fn variable_exponent(p: &str, domain: Domain) -> Result<Self, MoError> {
        let e = Expr::parse(p).map_err(expr_err("p"))?;
        e.check_vars(&[Var::X]).map_err(expr_err("p"))?;
        let cfg = CalculusConfig::default();
        let p = ExponentField::new(e, &domain, cfg.range_grid);
        MoFunction::from_family(Family::VariableExponent { p }, domain, vec![], cfg)
    }

    /// `t^{p(x)} + a(x) t^{r(x)}`.
    pub fn double_phase(p: &str, r: &str, a: &str, domain: Domain) -> Result<Self, MoError> {
        let cfg = CalculusConfig::default();
        let mut fields = Vec::new();
        for (name, src) in [("p", p), ("r", r), ("a", a)] {
            let e = Expr::parse(src).map_err(expr_err(name))?;
            e.check_vars(&[Var::X]).map_err(expr_err(name))?;
            fields.push(e);
        }
        let a = WeightField::new(fields.pop().unwrap(), &domain, cfg.range_grid, &[]);
        let r = ExponentField::new(fields.pop().unwrap(), &domain, cfg.range_grid);
        let p = ExponentField::new(fields.pop().unwrap(), &domain, cfg.range_grid);
        MoFunction::from_family(Family::DoublePhase { p, r, a }, domain, vec![], cfg)
    }

    pub fn tabulated(table: Table, domain: Domain) -> Result<Self, MoError> {
        MoFunction::from_family(Family::Tabulated(table), domain, vec![], CalculusConfig::default())
    }

    /// General constructor; `declared` singular points are merged with detected ones.
    pub fn from_family(
        family: Family,
        domain: Domain,
        declared: Vec<f64>,
        config: CalculusConfig,
    ) -> Result<Self, MoError> {
        let mut singularities = declared;
        let orlicz_derivative = match &family {
            Family::Orlicz { phi } => Some(phi.diff(Var::T)),
            _ => None,
        };
        match &family {
            Family::VariableExponent { p } => {
                if p.range.max.is_infinite() {
                    singularities.push(p.range.argmax);
                }
            }
            Family::DoublePhase { p, r, a } => {
                for f in [&p.range, &r.range, &a.range] {
                    if f.max.is_infinite() {
                        singularities.push(f.argmax);
                    }
                }
            }
            _ => {}
        }
        singularities.retain(|s| domain.contains(*s));
        singularities.sort_by(f64::total_cmp);
        singularities.dedup();
        let f = MoFunction { family, domain, singularities, config, orlicz_derivative };
        f.validate()?;
        Ok(f)
    }

    /// Rebuild with new declared singular points (e.g. from a spec file).
    pub fn with_singularities(mut self, extra: &[f64]) -> Self {
        self.singularities.extend(extra.iter().copied().filter(|s| self.domain.contains(*s)));
        self.singularities.sort_by(f64::total_cmp);
        self.singularities.dedup();
        self
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn config(&self) -> &CalculusConfig {
        &self.config
    }

    fn validate(&self) -> Result<(), MoError> {
        let invalid = |m: String| Err(MoError::Invalid(m));
        let xs = self.domain.midpoints(257);
        match &self.family {
            Family::Orlicz { phi } => {
                let f = |t: f64| phi.eval(&Vars::xt(0.0, t));
                if f(0.0).abs() > 1e-14 {
                    return invalid(format!("φ(0) = {} must vanish", f(0.0)));
                }
                let ts: Vec<f64> = (0..=60).map(|i| 10f64.powf(-6.0 + 12.0 * i as f64 / 60.0)).collect();
                for w in ts.windows(2) {
                    let (s, t) = (w[0], w[1]);
                    let (fs, ft, fm) = (f(s), f(t), f(0.5 * (s + t)));
                    if fs.is_nan() || ft.is_nan() || fs < -1e-14 {
                        return invalid(format!("φ undefined or negative near t = {s}"));
                    }
                    if ft.is_finite() && fs > ft * (1.0 + 1e-12) + 1e-14 {
                        return invalid(format!("φ decreases near t = {s}"));
                    }
                    if ft.is_finite() && fm > 0.5 * (fs + ft) * (1.0 + 1e-9) + 1e-14 {
                        return invalid(format!("φ is not convex near t = {s}"));
                    }
                }
            }
            Family::VariableExponent { p } => {
                if p.lower() < 1.0 - 1e-12 || p.lower().is_nan() {
                    return invalid(format!("p(x) must be ≥ 1, found inf p = {}", p.lower()));
                }
            }
            Family::DoublePhase { p, r, a } => {
                if p.lower() < 1.0 - 1e-12 {
                    return invalid(format!("p(x) must be ≥ 1, found inf p = {}", p.lower()));
                }
                if a.range.min < -1e-14 {
                    return invalid(format!("a(x) must be ≥ 0, found {}", a.range.min));
                }
                for &x in &xs {
                    let (px, rx) = (p.eval(x), r.eval(x));
                    if !(px <= rx * (1.0 + 1e-12)) {
                        return invalid(format!("need p(x) ≤ r(x); at x = {x}: p = {px}, r = {rx}"));
                    }
                    if !rx.is_finite() {
                        return invalid(format!("r(x) must be finite; at x = {x}: r = {rx}"));
                    }
                }
            }
            Family::Tabulated(t) => t.validate()?,
        }
        Ok(())
    }

    /// Derivative of `Φ*` for the variable-exponent family: `t^{q-1} = t^{1/(p-1)}`.
    fn varexp_conjugate(p: f64, t: f64) -> f64 {
        if t == 0.0 {
            0.0
        } else if p <= 1.0 {
            if t <= 1.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else if p.is_infinite() {
            t
        } else {
            let q = p / (p - 1.0);
            t.powf(q) / q
        }
    }
}

#[inline]
fn power(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        if p == 0.0 {
            1.0
        } else {
            0.0
        }
    } else if p.is_infinite() {
        if t < 1.0 {
            0.0
        } else if t == 1.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else if p == 2.0 {
        t * t
    } else {
        t.powf(p)
    }
}

impl MusielakOrlicz for MoFunction {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn value(&self, x: f64, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        match &self.family {
            Family::Orlicz { phi } => phi.eval(&Vars::xt(x, t)),
            Family::VariableExponent { p } => {
                let px = p.eval(x);
                if px.is_infinite() {
                    if t <= 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    power(t, px) / px
                }
            }
            Family::DoublePhase { p, r, a } => {
                let ax = a.eval(x).max(0.0);
                let base = power(t, p.eval(x));
                if ax == 0.0 {
                    base
                } else {
                    base + ax * power(t, r.eval(x))
                }
            }
            Family::Tabulated(tab) => tab.value(x, t),
        }
    }

    fn derivative(&self, x: f64, t: f64) -> f64 {
        match &self.family {
            Family::Orlicz { .. } => {
                let d = self.orlicz_derivative.as_ref().expect("set for Orlicz");
                let v = d.eval(&Vars::xt(x, t));
                if v.is_nan() {
                    // e.g. 0 * inf at t = 0; fall back to a difference quotient
                    let h = self.config.difference_step;
                    (self.value(x, t + h) - self.value(x, t)) / h
                } else {
                    v
                }
            }
            Family::VariableExponent { p } => {
                let px = p.eval(x);
                if px.is_infinite() {
                    if t < 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    power(t, px - 1.0)
                }
            }
            Family::DoublePhase { p, r, a } => {
                let (px, rx, ax) = (p.eval(x), r.eval(x), a.eval(x).max(0.0));
                let base = px * power(t, px - 1.0);
                if ax == 0.0 {
                    base
                } else {
                    base + ax * rx * power(t, rx - 1.0)
                }
            }
            Family::Tabulated(tab) => {
                let h = self.config.difference_step;
                let (a, b) = (tab.value(x, t), tab.value(x, t + h));
                if b.is_infinite() {
                    f64::INFINITY
                } else {
                    (b - a) / h
                }
            }
        }
    }

    fn conjugate_value(&self, x: f64, t: f64) -> f64 {
        match &self.family {
            Family::VariableExponent { p } => MoFunction::varexp_conjugate(p.eval(x), t),
            _ => legendre(&|s| self.value(x, s), t),
        }
    }

    fn conjugate_derivative(&self, x: f64, t: f64) -> f64 {
        match &self.family {
            Family::VariableExponent { p } => {
                let px = p.eval(x);
                if px <= 1.0 {
                    if t < 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else if px.is_infinite() {
                    1.0
                } else {
                    power(t, 1.0 / (px - 1.0))
                }
            }
            _ => {
                let h = 1e-7 * t.max(1e-3);
                let a = self.conjugate_value(x, t);
                let b = self.conjugate_value(x, t + h);
                if a.is_infinite() || b.is_infinite() {
                    f64::INFINITY
                } else {
                    (b - a) / h
                }
            }
        }
    }

    fn singularities(&self) -> &[f64] {
        &self.singularities
    }

    fn describe(&self) -> String {
        match &self.family {
            Family::Orlicz { phi } => format!("Orlicz φ(t) = {phi}"),
            Family::VariableExponent { p } => format!("variable exponent p(x) = {}", p.expr),
            Family::DoublePhase { p, r, a } => {
                format!("double phase p(x) = {}, r(x) = {}, a(x) = {}", p.expr, r.expr, a.expr)
            }
            Family::Tabulated(t) => format!("tabulated ({} x {} samples)", t.xs.len(), t.ts.len()),
        }
    }
}

fn check_args(phi: &dyn MusielakOrlicz, x: f64, t: f64) -> Result<(), MoError> {
    let d = phi.domain();
    if !d.contains(x) || x.is_nan() {
        return Err(MoError::OutsideDomain { x, alpha: d.alpha, beta: d.beta });
    }
    if !(t >= 0.0) {
        return Err(MoError::NegativeArgument(t));
    }
    Ok(())
}

/// `Φ(x, t)` with argument checks.
pub fn evaluate(phi: &dyn MusielakOrlicz, x: f64, t: f64) -> Result<f64, MoError> {
    check_args(phi, x, t)?;
    Ok(phi.value(x, t))
}

/// `Φ'(x, t)`; an error where `Φ(x, t) = +∞`.
pub fn right_derivative(phi: &dyn MusielakOrlicz, x: f64, t: f64) -> Result<f64, MoError> {
    check_args(phi, x, t)?;
    if phi.value(x, t).is_infinite() {
        return Err(MoError::ExtendedValue { x, t });
    }
    Ok(phi.derivative(x, t))
}

/// `Φ*(x, t)`; `+∞` is a valid result.
pub fn conjugate(phi: &dyn MusielakOrlicz, x: f64, t: f64) -> Result<f64, MoError> {
    check_args(phi, x, t)?;
    Ok(phi.conjugate_value(x, t))
}

/// `Φ^{-1}(x, t) = inf {u : Φ(x, u) ≥ t}`.
pub fn generalized_inverse(phi: &dyn MusielakOrlicz, x: f64, t: f64) -> Result<f64, MoError> {
    check_args(phi, x, t)?;
    inverse(&|u| phi.value(x, u), t, 1e-10).ok_or(MoError::UnreachableLevel { x, level: t })
}

/// Sampling grid for [`dominates`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    pub log_spaced: bool,
    pub x_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { t_min: 1e-6, t_max: 1e6, t_points: 120, log_spaced: true, x_points: 512 }
    }
}

impl GridSpec {
    pub fn ts(&self) -> Vec<f64> {
        let n = self.t_points.max(2);
        (0..n)
            .map(|i| {
                let w = i as f64 / (n - 1) as f64;
                if self.log_spaced {
                    let (a, b) = (self.t_min.max(1e-300).ln(), self.t_max.ln());
                    (a + w * (b - a)).exp()
                } else {
                    self.t_min + w * (self.t_max - self.t_min)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Domination {
    /// `∫ sup_t (Φ₂(x,Kt) − Φ₁(x,t))₊ dx` stays within the budget on the grid.
    Holds { integral: f64 },
    /// The budget is exceeded; the largest gap sits at `(x, t)`.
    Violated { x: f64, t: f64, gap: f64, integral: f64 },
    /// Within budget on the grid, but the gap still grows at the top of the t-grid.
    Inconclusive { x: f64, t: f64, integral: f64 },
}

/// Grid semidecision of `Φ₂ ≺ Φ₁`: `Φ₂(x, Kt) ≤ Φ₁(x, t) + h(x)` with `∫h ≤ h_budget`.
pub fn dominates(
    phi1: &dyn MusielakOrlicz,
    phi2: &dyn MusielakOrlicz,
    k: f64,
    h_budget: f64,
    grid: &GridSpec,
) -> Domination {
    let dom = phi1.domain();
    let xs = dom.midpoints(grid.x_points.max(1));
    let dx = dom.length() / xs.len() as f64;
    let ts = grid.ts();
    let top = ts.len() - 1;
    let mut integral = 0.0;
    let mut worst = (xs[0], ts[0], 0.0f64);
    let mut open_top: Option<(f64, f64)> = None;
    for &x in &xs {
        let mut best = 0.0f64;
        let mut best_t = ts[0];
        let mut best_j = 0;
        for (j, &t) in ts.iter().enumerate() {
            let a = phi2.value(x, k * t);
            let b = phi1.value(x, t);
            let gap = if b.is_infinite() {
                0.0
            } else if a.is_infinite() {
                f64::INFINITY
            } else {
                (a - b).max(0.0)
            };
            if gap > best {
                best = gap;
                best_t = t;
                best_j = j;
            }
        }
        integral += best * dx;
        if best > worst.2 {
            worst = (x, best_t, best);
        }
        if best > 0.0 && best_j == top && open_top.is_none() {
            open_top = Some((x, best_t));
        }
    }
    if integral > h_budget {
        Domination::Violated { x: worst.0, t: worst.1, gap: worst.2, integral }
    } else if let Some((x, t)) = open_top {
        Domination::Inconclusive { x, t, integral }
    } else {
        Domination::Holds { integral }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> Domain {
        Domain::unit()
    }

    #[test]
    fn evaluate_examples() {
        let p2 = MoFunction::variable_exponent("2", unit()).unwrap();
        assert_eq!(evaluate(&p2, 0.5, 3.0).unwrap(), 4.5);
        let dp = MoFunction::double_phase("2", "4", "x", unit()).unwrap();
        assert_eq!(evaluate(&dp, 0.5, 1.0).unwrap(), 1.5);
        let lin = MoFunction::orlicz("t", unit()).unwrap();
        assert_eq!(evaluate(&lin, 0.3, 7.0).unwrap(), 7.0);
        assert!(matches!(evaluate(&lin, 1.5, 1.0), Err(MoError::OutsideDomain { .. })));
        assert!(matches!(evaluate(&lin, 0.5, -1.0), Err(MoError::NegativeArgument(_))));
    }

    #[test]
    fn derivative_examples() {
        let p3 = MoFunction::variable_exponent("3", unit()).unwrap();
        assert_eq!(right_derivative(&p3, 0.5, 2.0).unwrap(), 4.0);
        let dp = MoFunction::double_phase("2", "4", "1", unit()).unwrap();
        assert_eq!(right_derivative(&dp, 0.5, 1.0).unwrap(), 6.0);
        let lin = MoFunction::orlicz("t", unit()).unwrap();
        assert_eq!(right_derivative(&lin, 0.5, 0.7).unwrap(), 1.0);
    }

    #[test]
    fn conjugate_examples() {
        let p3 = MoFunction::variable_exponent("3", unit()).unwrap();
        assert_relative_eq!(conjugate(&p3, 0.5, 1.0).unwrap(), 2.0 / 3.0, max_relative = 1e-15);
        let lin = MoFunction::orlicz("t", unit()).unwrap();
        assert_eq!(conjugate(&lin, 0.5, 0.5).unwrap(), 0.0);
        assert_eq!(conjugate(&lin, 0.5, 2.0).unwrap(), f64::INFINITY);
        let sq = MoFunction::orlicz("t^2/2", unit()).unwrap();
        assert_relative_eq!(conjugate(&sq, 0.5, 3.0).unwrap(), 4.5, max_relative = 1e-12);
    }

    #[test]
    fn inverse_examples() {
        let sq = MoFunction::orlicz("t^2", unit()).unwrap();
        assert_relative_eq!(generalized_inverse(&sq, 0.5, 4.0).unwrap(), 2.0, max_relative = 1e-12);
        let lin = MoFunction::orlicz("t", unit()).unwrap();
        assert_eq!(generalized_inverse(&lin, 0.5, 0.0).unwrap(), 0.0);
        let p2 = MoFunction::variable_exponent("2", unit()).unwrap();
        assert_relative_eq!(generalized_inverse(&p2, 0.5, 2.0).unwrap(), 2.0, max_relative = 1e-12);
        let tab = Table { xs: vec![0.5], ts: vec![0.0, 1.0, 2.0], values: vec![vec![0.0, 1.0, f64::INFINITY]] };
        let tab = MoFunction::tabulated(tab, unit()).unwrap();
        assert_relative_eq!(generalized_inverse(&tab, 0.5, 1.0).unwrap(), 1.0, max_relative = 1e-12);
        // a level no finite u reaches is still met by the jump to +∞
        assert_relative_eq!(generalized_inverse(&tab, 0.5, 5.0).unwrap(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn domination_examples() {
        let sq = MoFunction::orlicz("t^2", unit()).unwrap();
        let lin = MoFunction::orlicz("t", unit()).unwrap();
        let grid = GridSpec { t_min: 0.0, t_max: 10.0, t_points: 201, log_spaced: false, x_points: 16 };
        assert!(matches!(dominates(&sq, &sq, 1.0, 0.0, &grid), Domination::Holds { .. }));
        match dominates(&lin, &sq, 1.0, 1.0, &grid) {
            Domination::Violated { t, .. } => assert_eq!(t, 10.0),
            other => panic!("{other:?}"),
        }
        match dominates(&sq, &lin, 1.0, 1.0, &grid) {
            Domination::Holds { integral } => assert!((integral - 0.25).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tabulated_is_piecewise_linear() {
        let tab = Table {
            xs: vec![0.0, 1.0],
            ts: vec![0.0, 1.0, 2.0],
            values: vec![vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 6.0]],
        };
        let f = MoFunction::tabulated(tab, unit()).unwrap();
        assert_relative_eq!(f.value(0.0, 1.5), 2.0);
        assert_relative_eq!(f.value(0.5, 1.0), 1.5);
        assert_relative_eq!(f.value(0.0, 3.0), 5.0);
        assert_relative_eq!(f.derivative(0.0, 1.0), 2.0, max_relative = 1e-6);
        let bad = Table { xs: vec![0.0], ts: vec![0.0, 1.0, 2.0], values: vec![vec![0.0, 2.0, 3.0]] };
        assert!(MoFunction::tabulated(bad, unit()).is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(MoFunction::variable_exponent("0.5 + x", unit()).is_err());
        assert!(MoFunction::double_phase("3", "2", "1", unit()).is_err());
        assert!(MoFunction::double_phase("2", "3", "x - 0.5", unit()).is_err());
        assert!(MoFunction::orlicz("sqrt(t)", unit()).is_err());
        assert!(MoFunction::orlicz("t + 1", unit()).is_err());
        assert!(MoFunction::variable_exponent("2 + t", unit()).is_err());
    }

    #[test]
    fn infinite_exponent_endpoint() {
        let f = MoFunction::variable_exponent("1/(1-x)", unit()).unwrap();
        assert_eq!(f.singularities(), &[1.0]);
        assert_eq!(f.value(1.0, 0.5), 0.0);
        assert_eq!(f.value(1.0, 2.0), f64::INFINITY);
        assert_eq!(f.conjugate_value(1.0, 2.0), 2.0);
    }

    #[test]
    fn numeric_legendre_matches_closed_form() {
        for p in [1.5, 2.0, 3.0, 7.0] {
            let q = p / (p - 1.0);
            for t in [1e-3, 0.05, 0.7, 1.0, 3.3, 40.0, 1e3] {
                let v = legendre(&|s: f64| s.powf(p) / p, t);
                let exact = t.powf(q) / q;
                assert_relative_eq!(v, exact, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn numeric_biconjugate_recovers_function() {
        let f = MoFunction::double_phase("2", "4", "x", unit()).unwrap();
        let star = Conjugate(&f);
        for t in [0.01, 0.3, 1.0, 2.5] {
            let bi = star.conjugate_value(0.5, t);
            assert_relative_eq!(bi, f.value(0.5, t), max_relative = 1e-6);
        }
        // linear growth: conjugate is 0 then +inf
        let lin = MoFunction::orlicz("2*t", unit()).unwrap();
        assert_eq!(lin.conjugate_value(0.1, 1.5), 0.0);
        assert_eq!(lin.conjugate_value(0.1, 2.5), f64::INFINITY);
    }
}
