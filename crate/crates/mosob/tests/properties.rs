use mosob::conditions::{delta2_verdict, space_verdicts, Status};
use mosob::function_rep::{Domain, PiecewiseFunction};
use mosob::mo_function::{conjugate, MoFunction, MusielakOrlicz};
use mosob::norms::{holder_pairing, luxemburg_norm, modular_value, NormConfig};
use mosob::operators::{apply_volterra, estimate_operator_norm, volterra_certificate, EstimateConfig, Kernel};
use mosob::probes::{non_delta2_witness, WitnessSequence, DEFAULT_C_SCHEDULE};
use proptest::prelude::*;

fn unit() -> Domain {
    Domain::unit()
}

fn step(values: &[f64]) -> PiecewiseFunction {
    let n = values.len();
    PiecewiseFunction::step((0..=n).map(|i| i as f64 / n as f64).collect(), values).unwrap()
}

fn exponent(a: f64, b: f64) -> MoFunction {
    MoFunction::variable_exponent(&format!("{a} + {b}*x"), unit()).unwrap()
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, 1..8).prop_filter("nonzero", |v| v.iter().any(|c| c.abs() > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn luxemburg_is_homogeneous(a in 1.1..3.0f64, b in 0.0..2.0f64, v in values(), c in 0.1..10.0f64) {
        let phi = exponent(a, b);
        let cfg = NormConfig::default();
        let f = step(&v);
        let n1 = luxemburg_norm(&phi, &f, &cfg).unwrap().value;
        let n2 = luxemburg_norm(&phi, &f.scale(-c), &cfg).unwrap().value;
        prop_assert!((n2 - c * n1).abs() <= 1e-7 * c * n1);
    }

    #[test]
    fn luxemburg_triangle(a in 1.1..3.0f64, b in 0.0..2.0f64, v in values(), w in values()) {
        let phi = exponent(a, b);
        let cfg = NormConfig::default();
        let (f, g) = (step(&v), step(&w));
        let s = luxemburg_norm(&phi, &f.add(&g).unwrap(), &cfg).unwrap().value;
        let nf = luxemburg_norm(&phi, &f, &cfg).unwrap().value;
        let ng = luxemburg_norm(&phi, &g, &cfg).unwrap().value;
        prop_assert!(s <= nf + ng + 1e-8 * (nf + ng));
    }

    #[test]
    fn unit_ball_matches_modular(a in 1.1..3.0f64, b in 0.0..2.0f64, v in values()) {
        let phi = exponent(a, b);
        let f = step(&v);
        let m = modular_value(&phi, &f, 1.0).unwrap();
        prop_assume!((m - 1.0).abs() > 1e-6);
        let n = luxemburg_norm(&phi, &f, &NormConfig::default()).unwrap().value;
        prop_assert_eq!(n <= 1.0, m <= 1.0);
    }

    #[test]
    fn fenchel_young(a in 1.1..4.0f64, b in 0.0..2.0f64, x in 0.0..1.0f64, s in 0.01..20.0f64, t in 0.01..20.0f64) {
        let phi = exponent(a, b);
        let star = conjugate(&phi, x, t).unwrap();
        prop_assert!(phi.value(x, s) + star >= s * t * (1.0 - 1e-9));
    }

    #[test]
    fn holder_inequality(v in values(), w in values(), p in 1.2..4.0f64) {
        let phi = exponent(p, 0.5);
        let r = holder_pairing(&phi, &step(&v), &step(&w), &NormConfig::default()).unwrap();
        let tol = 1e-6 * r.integral.max(1.0);
        prop_assert!(r.slack_luxemburg_orlicz >= -tol);
        prop_assert!(r.slack_orlicz_luxemburg >= -tol);
    }

    // a numeric verdict may be inconclusive but never contradicts the exact one
    #[test]
    fn numeric_delta2_agrees_with_closed_form(p in 1.1..6.0f64) {
        let exact = delta2_verdict(&MoFunction::variable_exponent(&p.to_string(), unit()).unwrap()).status;
        let numeric = delta2_verdict(&MoFunction::orlicz(&format!("t^{p}/{p}"), unit()).unwrap()).status;
        prop_assert_eq!(exact, Status::Holds);
        prop_assert!(numeric != Status::Fails);
    }

    #[test]
    fn space_verdicts_are_consistent(a in 1.0..3.0f64, b in -0.5..2.0f64) {
        prop_assume!(a + b >= 1.0);
        let v = space_verdicts(&exponent(a, b));
        for props in [&v.lebesgue, &v.sobolev] {
            if props.uniformly_convex.status == Status::Holds {
                prop_assert_eq!(props.reflexive.status, Status::Holds);
            }
            if props.reflexive.status == Status::Holds {
                prop_assert_eq!(props.contains_l1.status, Status::Fails);
                prop_assert_eq!(props.contains_linf.status, Status::Fails);
            }
        }
    }

    #[test]
    fn volterra_is_linear_and_positive(v in values(), w in values(), c in -3.0..3.0f64, x in 0.0..1.0f64) {
        let (f, g) = (step(&v), step(&w));
        let lhs = apply_volterra(&f.scale(c).add(&g).unwrap()).eval(x);
        let rhs = c * apply_volterra(&f).eval(x) + apply_volterra(&g).eval(x);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        prop_assert!(apply_volterra(&f.abs()).eval(x) >= 0.0);
    }

    #[test]
    fn oscillation_integrates_to_zero_per_interval(v in prop::collection::vec(0.1..3.0f64, 2..6), n in 1usize..5) {
        // alternating ±c on 2n equal subcells of each constancy interval
        let cells = v.len();
        let mut bps = Vec::new();
        let mut vals = Vec::new();
        for (i, c) in v.iter().enumerate() {
            for j in 0..2 * n {
                bps.push((i as f64 + j as f64 / (2 * n) as f64) / cells as f64);
                vals.push(if j % 2 == 0 { *c } else { -*c });
            }
        }
        bps.push(1.0);
        let f = PiecewiseFunction::step(bps, &vals).unwrap().antiderivative();
        for i in 0..=cells {
            prop_assert!(f.eval(i as f64 / cells as f64).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn certified_bound_dominates_estimate(a in 1.2..3.0f64, b in 0.0..1.0f64) {
        let phi = exponent(a, b);
        let cert = volterra_certificate(&phi).unwrap();
        let cfg = EstimateConfig { trials: 4, cells: 8, ..EstimateConfig::default() };
        let est = estimate_operator_norm(&phi, &phi, &Kernel::Volterra, &cfg).unwrap();
        prop_assert!(est.value <= cert.bound_on_norm);
    }
}

#[test]
fn c_schedule_decreases() {
    assert!(DEFAULT_C_SCHEDULE.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn witness_survives_serialization_and_detects_tampering() {
    let phi = MoFunction::variable_exponent("1/(1-x)", unit()).unwrap();
    let w = non_delta2_witness(&phi, 3).unwrap();
    assert!(w.all_passed());
    let json = serde_json::to_string(&w).unwrap();
    let back: WitnessSequence = serde_json::from_str(&json).unwrap();
    assert_eq!(back, w);
    assert!(back.verify(&phi).unwrap().ok);

    let mut tampered = back;
    tampered.members[0] = tampered.members[0].scale(1.5);
    assert!(!tampered.verify(&phi).unwrap().ok);
}
