//! Finite truncations of witness sequences, each carrying the inequalities
//! it is meant to satisfy as re-checkable certificates.

mod embed;
mod uc;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::function_rep::{PiecewiseError, PiecewiseFunction, QuadratureError};
use crate::mo_function::{Conjugate, MusielakOrlicz};
use crate::norms::{luxemburg_norm, modular_value, orlicz_norm, NormConfig, NormError};
use crate::operators::OperatorError;

pub use embed::{l1_embedding, linf_embedding, non_delta2_witness, L1Embedding, LinfEmbedding, NON_DELTA2_ETA};
pub use uc::{
    uc_failure_sobolev_pairs, uc_falsifier, uc_modulus_estimate, DefectTrend, ModulusConfig, UcDefect, UcGrid,
    DEFAULT_C_SCHEDULE,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbeError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("construction failed: {reason}")]
    ConstructionFailed { reason: String, best: Option<f64> },
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Piecewise(#[from] PiecewiseError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessKind {
    NonDelta2,
    LinfEmbed,
    L1Embed,
    UcFailurePair,
}

/// `Σ c_i · members[i]`, or the weak derivative of that sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    pub terms: Vec<(usize, f64)>,
    #[serde(default)]
    pub derivative: bool,
}

impl Combination {
    pub fn member(i: usize) -> Self {
        Combination { terms: vec![(i, 1.0)], derivative: false }
    }

    pub fn derivative_of(i: usize) -> Self {
        Combination { terms: vec![(i, 1.0)], derivative: true }
    }

    pub fn of(terms: Vec<(usize, f64)>, derivative: bool) -> Self {
        Combination { terms, derivative }
    }
}

/// A number computed from the members of a witness sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "quantity", rename_all = "kebab-case")]
pub enum Quantity {
    Constant {
        #[serde(with = "crate::ext::real")]
        value: f64,
    },
    /// `I(scale · f)` for `Φ`, or for `Φ*` when `conjugate`.
    Modular { of: Combination, scale: f64, #[serde(default)] conjugate: bool },
    Luxemburg { of: Combination, #[serde(default)] conjugate: bool },
    Orlicz { of: Combination, #[serde(default)] conjugate: bool },
    /// `‖f‖_Φ + ‖f'‖_Φ`.
    Sobolev { of: Combination },
    /// Luxemburg norm of the constant function `value`.
    ConstantNorm { value: f64 },
    /// `∫ f g`.
    Pairing { left: Combination, right: Combination },
    /// `max |f|`, exact for piecewise polynomials.
    SupAbs { of: Combination },
    /// Length of `{f_i ≠ 0} ∩ {f_j ≠ 0}`, or of the derivatives.
    SupportOverlap { i: usize, j: usize, #[serde(default)] derivative: bool },
    /// `max_l |∫_{γ_{l−1}}^{γ_l} f|` over the given partition.
    IntervalIntegralMax { of: Combination, partition: Vec<f64> },
    /// `Σ c_i q_i`.
    Sum { terms: Vec<(f64, Quantity)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }
}

/// `lhs relation rhs`; `slack` is positive when the inequality holds with room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub member: Option<usize>,
    pub lhs: Quantity,
    pub relation: Relation,
    pub rhs: Quantity,
    /// Allowed violation for non-strict relations.
    pub tol: f64,
    #[serde(with = "crate::ext::real")]
    pub lhs_value: f64,
    #[serde(with = "crate::ext::real")]
    pub rhs_value: f64,
    #[serde(with = "crate::ext::real")]
    pub slack: f64,
    pub passed: bool,
}

fn slack_of(rel: Relation, lhs: f64, rhs: f64) -> f64 {
    match rel {
        Relation::Le | Relation::Lt => rhs - lhs,
        Relation::Ge | Relation::Gt => lhs - rhs,
    }
}

fn passes(rel: Relation, slack: f64, tol: f64) -> bool {
    match rel {
        Relation::Lt | Relation::Gt => slack > 0.0,
        Relation::Le | Relation::Ge => slack >= -tol,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessSequence {
    pub kind: WitnessKind,
    pub truncation: usize,
    pub members: Vec<PiecewiseFunction>,
    #[serde(with = "crate::ext::real_map")]
    pub parameters: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
}

/// Recomputed slack for one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub name: String,
    pub member: Option<usize>,
    #[serde(with = "crate::ext::real")]
    pub recorded_slack: f64,
    #[serde(with = "crate::ext::real")]
    pub recomputed_slack: f64,
    pub passed: bool,
    pub reproduced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
    pub ok: bool,
}

/// Evaluates quantities against the members of a sequence.
pub struct Evaluator<'a> {
    phi: &'a dyn MusielakOrlicz,
    members: &'a [PiecewiseFunction],
    cfg: NormConfig,
}

impl<'a> Evaluator<'a> {
    pub fn new(phi: &'a dyn MusielakOrlicz, members: &'a [PiecewiseFunction]) -> Self {
        Evaluator { phi, members, cfg: NormConfig::default() }
    }

    fn combine(&self, c: &Combination) -> Result<PiecewiseFunction, ProbeError> {
        let mut terms = Vec::with_capacity(c.terms.len());
        for &(i, coef) in &c.terms {
            let f = self
                .members
                .get(i)
                .ok_or_else(|| ProbeError::Precondition(format!("no member {i}")))?;
            terms.push((coef, f));
        }
        if terms.is_empty() {
            let d = self.phi.domain();
            return Ok(PiecewiseFunction::constant(d.alpha, d.beta, 0.0));
        }
        let f = PiecewiseFunction::linear_combination(&terms)?;
        Ok(if c.derivative { f.weak_derivative()? } else { f })
    }

    fn modular_of(&self, f: &PiecewiseFunction, scale: f64, conjugate: bool) -> Result<f64, ProbeError> {
        let v = if conjugate {
            modular_value(&Conjugate(self.phi), f, scale)?
        } else {
            modular_value(self.phi, f, scale)?
        };
        Ok(v)
    }

    pub fn eval(&self, q: &Quantity) -> Result<f64, ProbeError> {
        let conj = Conjugate(self.phi);
        let space = |c: bool| -> &dyn MusielakOrlicz { if c { &conj } else { self.phi } };
        Ok(match q {
            Quantity::Constant { value } => *value,
            Quantity::Modular { of, scale, conjugate } => self.modular_of(&self.combine(of)?, *scale, *conjugate)?,
            Quantity::Luxemburg { of, conjugate } => luxemburg_norm(space(*conjugate), &self.combine(of)?, &self.cfg)?.value,
            Quantity::Orlicz { of, conjugate } => orlicz_norm(space(*conjugate), &self.combine(of)?, &self.cfg)?.value,
            Quantity::Sobolev { of } => {
                let f = self.combine(of)?;
                let df = f.weak_derivative()?;
                luxemburg_norm(self.phi, &f, &self.cfg)?.value + luxemburg_norm(self.phi, &df, &self.cfg)?.value
            }
            Quantity::ConstantNorm { value } => {
                let d = self.phi.domain();
                luxemburg_norm(self.phi, &PiecewiseFunction::constant(d.alpha, d.beta, *value), &self.cfg)?.value
            }
            Quantity::Pairing { left, right } => self.combine(left)?.inner(&self.combine(right)?)?,
            Quantity::SupAbs { of } => self.combine(of)?.sup_abs(),
            Quantity::SupportOverlap { i, j, derivative } => {
                let f = self.combine(&Combination::of(vec![(*i, 1.0)], *derivative))?;
                f.support_overlap(&self.combine(&Combination::of(vec![(*j, 1.0)], *derivative))?)?
            }
            Quantity::IntervalIntegralMax { of, partition } => {
                let f = self.combine(of)?.antiderivative();
                partition
                    .windows(2)
                    .map(|w| (f.eval(w[1]) - f.eval(w[0])).abs())
                    .fold(0.0, f64::max)
            }
            Quantity::Sum { terms } => {
                let mut s = 0.0;
                for (c, q) in terms {
                    s += c * self.eval(q)?;
                }
                s
            }
        })
    }

    /// Evaluate both sides and build the check.
    pub fn check(
        &self,
        name: &str,
        member: Option<usize>,
        lhs: Quantity,
        relation: Relation,
        rhs: Quantity,
        tol: f64,
    ) -> Result<Check, ProbeError> {
        let (lv, rv) = (self.eval(&lhs)?, self.eval(&rhs)?);
        let slack = slack_of(relation, lv, rv);
        Ok(Check {
            name: name.to_string(),
            member,
            lhs,
            relation,
            rhs,
            tol,
            lhs_value: lv,
            rhs_value: rv,
            slack,
            passed: passes(relation, slack, tol),
        })
    }
}

impl WitnessSequence {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Checks with the given name, in member order.
    pub fn checks_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
        self.checks.iter().filter(move |c| c.name == name)
    }

    /// Recompute every check from the members and compare with the recorded slack.
    pub fn verify(&self, phi: &dyn MusielakOrlicz) -> Result<VerifyReport, ProbeError> {
        let ev = Evaluator::new(phi, &self.members);
        let mut rows = Vec::with_capacity(self.checks.len());
        for c in &self.checks {
            let (lv, rv) = (ev.eval(&c.lhs)?, ev.eval(&c.rhs)?);
            let slack = slack_of(c.relation, lv, rv);
            let scale = 1.0f64.max(c.lhs_value.abs()).max(c.rhs_value.abs());
            let reproduced = if slack.is_finite() && c.slack.is_finite() {
                (slack - c.slack).abs() <= 1e-6 * scale
            } else {
                slack == c.slack
            };
            let passed = passes(c.relation, slack, c.tol);
            rows.push(VerifyRow {
                name: c.name.clone(),
                member: c.member,
                recorded_slack: c.slack,
                recomputed_slack: slack,
                passed: passed && c.passed,
                reproduced,
            });
        }
        let ok = rows.iter().all(|r| r.passed && r.reproduced);
        Ok(VerifyReport { rows, ok })
    }
}
