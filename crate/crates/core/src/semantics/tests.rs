use super::*;
use crate::indexing::HorizonFunction;
use crate::syntax::parse;

fn nat(h: IndexPoint) -> StagedStructure {
    StagedStructure::naturals(h).unwrap()
}

fn f(s: &StagedStructure, text: &str) -> Formula {
    parse(text, &s.signature()).unwrap()
}

fn ctx(v: &[IndexPoint]) -> Context {
    Context::new(v.to_vec())
}

const FLAGSHIP: &str = "forall y0. exists y1. Lt(y0, y1)";

#[test]
fn classical_examples() {
    let s = nat(50);
    assert!(eval_classical(&s, &f(&s, "exists y0. Even(y0)"), &[], 5).unwrap());
    for bound in [5, 10, 20] {
        assert!(!eval_classical(&s, &f(&s, FLAGSHIP), &[], bound).unwrap());
    }
    let e = StagedStructure::from_json(
        r#"{"universe": {"stages": [["a"], ["a", "b"]]}, "headroom": 4, "relations": {"P": {"tuples": [["a"]]}}}"#,
    )
    .unwrap();
    assert!(!eval_classical(&e, &f(&e, "forall y0. P(y0)"), &[], 4).unwrap());
    assert!(matches!(
        eval_classical(&s, &f(&s, FLAGSHIP), &[], 51),
        Err(SemanticsError::HeadroomExceeded {
            requested: 51,
            headroom: 50
        })
    ));
}

#[test]
fn flagship_reflection_with_fallback_horizon() {
    let s = nat(50);
    let r = eval_reflection(
        &s,
        &f(&s, FLAGSHIP),
        &Valuation::empty(),
        &LargenessRelation::fallback(),
        &mut HorizonChooser,
    )
    .unwrap();
    assert!(r.verdict);
    assert_eq!(
        r.trace,
        vec![
            TraceEntry {
                context: ctx(&[]),
                chosen: 1
            },
            TraceEntry {
                context: ctx(&[1]),
                chosen: 2
            }
        ]
    );
    assert_eq!(r.max_index_used, 2);
}

#[test]
fn true_has_empty_trace() {
    let s = nat(5);
    let r = eval_reflection(
        &s,
        &Formula::True,
        &Valuation::empty(),
        &LargenessRelation::fallback(),
        &mut HorizonChooser,
    )
    .unwrap();
    assert!(r.verdict);
    assert!(r.trace.is_empty());
    assert_eq!(r.max_index_used, 0);
}

#[test]
fn constant_saturation_horizon_matches_classical() {
    let s = StagedStructure::from_json(
        r#"{"universe": {"stages": [["a"], ["a", "b"], ["a", "b", "c"]]}, "headroom": 5,
            "relations": {"R": {"tuples": [["a", "b"], ["b", "c"], ["c", "c"]]}, "P": {"tuples": [["b"]]}}}"#,
    )
    .unwrap();
    let rel = LargenessRelation::new(HorizonFunction::constant(3));
    for text in [
        "forall y0. exists y1. R(y0, y1)",
        "exists y0. forall y1. (R(y1, y0) -> P(y1))",
        "forall y0. (P(y0) | exists y1. R(y1, y0))",
        "exists y0. (P(y0) & ~R(y0, y0))",
    ] {
        let phi = f(&s, text);
        let r = eval_reflection(&s, &phi, &Valuation::empty(), &rel, &mut HorizonChooser).unwrap();
        assert_eq!(
            r.verdict,
            eval_classical(&s, &phi, &[], 3).unwrap(),
            "{text}"
        );
    }
}

#[test]
fn chooser_violation_and_headroom() {
    struct Low;
    impl IndexChooser for Low {
        fn choose(&mut self, _: &[IndexPoint], _: IndexPoint) -> IndexPoint {
            1
        }
    }
    let s = nat(10);
    let err = eval_reflection(
        &s,
        &f(&s, FLAGSHIP),
        &Valuation::empty(),
        &LargenessRelation::fallback(),
        &mut Low,
    )
    .unwrap_err();
    assert_eq!(
        err,
        SemanticsError::ChooserViolation {
            context: ctx(&[1]),
            chosen: 1,
            horizon: 2
        }
    );

    let s = nat(2);
    let deep = f(&s, "forall y0. forall y1. forall y2. y0 = y2");
    let err = eval_reflection(
        &s,
        &deep,
        &Valuation::empty(),
        &LargenessRelation::fallback(),
        &mut HorizonChooser,
    )
    .unwrap_err();
    assert_eq!(
        err,
        SemanticsError::HeadroomExceeded {
            requested: 3,
            headroom: 2
        }
    );
}

#[test]
fn undefined_function_is_stage_escape() {
    let s = StagedStructure::from_json(
        r#"{"universe": {"builtin": "naturals"}, "headroom": 3, "functions": {"s": {"graph": [["0", "1"], ["1", "2"]]}}}"#,
    )
    .unwrap();
    let phi = f(&s, "forall y0. ~(s(y0) = y0)");
    assert!(matches!(
        eval_classical(&s, &phi, &[], 3),
        Err(SemanticsError::StageEscape(_))
    ));
    // Stage 2 only needs s(0) and s(1).
    let rel = LargenessRelation::new(HorizonFunction::constant(2));
    assert!(
        eval_reflection(&s, &phi, &Valuation::empty(), &rel, &mut HorizonChooser)
            .unwrap()
            .verdict
    );
}

#[test]
fn valuation_checks_stages() {
    let s = nat(5);
    assert!(Valuation::new(&s, vec![Element(3)], ctx(&[3])).is_err());
    assert!(Valuation::new(&s, vec![Element(3)], ctx(&[4])).is_ok());
    let v = Valuation::at_least_stages(&s, vec![Element(2), Element(0)]).unwrap();
    assert_eq!(v.context(), &ctx(&[3, 1]));
    let err = eval_reflection(
        &s,
        &f(&s, "Lt(y0, y1)"),
        &Valuation::empty(),
        &LargenessRelation::fallback(),
        &mut HorizonChooser,
    );
    assert!(matches!(err, Err(SemanticsError::Syntax(_))));
    let r = eval_reflection(
        &s,
        &f(&s, "Lt(y1, y0)"),
        &v,
        &LargenessRelation::fallback(),
        &mut HorizonChooser,
    )
    .unwrap();
    assert!(r.verdict);
    assert_eq!(r.max_index_used, 3);
}

/// Least `t` with `all(1..=s)` constant for `s` in `t..=top`, by a direct
/// downward scan.
fn scan(top: IndexPoint, pred: impl Fn(IndexPoint) -> bool) -> IndexPoint {
    let v = |s: IndexPoint| (0..s).all(&pred);
    let mut t = top;
    while t > 1 && v(t - 1) == v(top) {
        t -= 1;
    }
    t
}

#[test]
fn witness_closure_of_single_quantifiers() {
    let s = nat(50);
    let r = witness_close(&s, &[f(&s, "exists y0. Even(y0)")], 50).unwrap();
    assert_eq!(r.horizon.get(&ctx(&[])), 1);
    assert_eq!(scan(50, |b| b % 2 == 1), 1);
    let r = witness_close(&s, &[f(&s, "forall y0. Even(y0)")], 50).unwrap();
    assert_eq!(r.horizon.get(&ctx(&[])), 2);
    assert_eq!(scan(50, |b| b % 2 == 0), 2);
    assert!(r.truncated.is_empty());
}

#[test]
fn witness_closure_of_flagship() {
    let s = nat(50);
    let phi = f(&s, FLAGSHIP);
    let r = witness_close(&s, std::slice::from_ref(&phi), 50).unwrap();
    assert_eq!(r.horizon.get(&ctx(&[])), 1);
    assert_eq!(r.window_top[&ctx(&[])], 48);
    for i in 1..=48 {
        // Oracle: for every a < i the inner universal over stage s is
        // `no b < s exceeds a`, which stops holding at s = a + 2.
        let expected = (0..i).map(|a| scan(50, |b| b <= a)).max().unwrap();
        assert_eq!(expected, i + 1);
        assert_eq!(r.horizon.get(&ctx(&[i])), expected, "context ({i})");
    }
    assert_eq!(r.truncated, vec![ctx(&[49])]);
    assert!(horizon_monotonicity_violations(&r.horizon).is_empty());
    let res = eval_reflection(
        &s,
        &phi,
        &Valuation::empty(),
        &r.relation(),
        &mut HorizonChooser,
    )
    .unwrap();
    assert!(res.verdict);
}

#[test]
fn exhausted_when_root_has_no_window() {
    // Every stage adds an element outside P, so the universal verdict can
    // only be compared against the top, where it has just changed.
    let s = StagedStructure::from_json(
        r#"{"universe": {"stages": [["a"], ["a", "b"], ["a", "b", "c"]]}, "headroom": 3,
            "relations": {"P": {"tuples": [["a"], ["b"]]}}}"#,
    )
    .unwrap();
    let err = witness_close(&s, &[f(&s, "forall y0. P(y0)")], 3).unwrap_err();
    match err {
        SemanticsError::Exhausted(cases) => {
            assert_eq!(cases.len(), 1);
            assert_eq!(cases[0].context, ctx(&[]));
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn independence_checks() {
    let s = nat(50);
    let phi = f(&s, FLAGSHIP);
    let report = witness_close(&s, std::slice::from_ref(&phi), 50).unwrap();
    let ind = check_independence(&s, &phi, &report, 20, 1).unwrap();
    assert!(ind.all_agree && ind.default_verdict);
    assert_eq!(ind.verdicts.len(), 20);

    let broken = WitnessClosureReport {
        horizon: HorizonFunction::constant(1),
        stable_from: vec![],
        window_top: BTreeMap::new(),
        truncated: vec![],
        headroom: 2,
        passes: 0,
    };
    let phi = f(&s, "forall y0. Even(y0)");
    let ind = check_independence(&s, &phi, &broken, 20, 1).unwrap();
    assert!(ind.default_verdict);
    assert!(!ind.all_agree);
}

#[test]
fn relativize_examples() {
    let s = nat(5);
    let names = vec!["O0".to_string(), "O1".to_string()];
    let out = relativize(&f(&s, FLAGSHIP), &names).unwrap();
    assert_eq!(
        out.to_string(),
        "forall y0. (O0(y0) -> exists y1. (O1(y1) & Lt(y0, y1)))"
    );
    let qf = f(&s, "Lt(y0, y1) | Even(y0)");
    assert_eq!(relativize(&qf, &names).unwrap(), qf);
    assert_eq!(
        relativize(&f(&s, FLAGSHIP), &names[..1]),
        Err(SemanticsError::DepthExceeded {
            depth: 2,
            predicates: 1
        })
    );
}

#[test]
fn omega_relativization_agrees_on_flagship() {
    let s = nat(50);
    let phi = f(&s, FLAGSHIP);
    let r = eval_reflection(
        &s,
        &phi,
        &Valuation::empty(),
        &LargenessRelation::fallback(),
        &mut HorizonChooser,
    )
    .unwrap();
    let idx = relativization_indices(&r, 0).unwrap();
    assert_eq!(idx, vec![1, 2]);
    let (s2, psi) = omega_relativization(&s, &phi, &idx).unwrap();
    assert_eq!(eval_classical(&s2, &psi, &[], 50).unwrap(), r.verdict);
}

#[test]
fn locality_examples() {
    let s = nat(50);
    let rep = locality_report(&s, &[f(&s, FLAGSHIP)], &LargenessRelation::fallback()).unwrap();
    assert_eq!(rep.max_index_used, 2);
    assert_eq!(rep.contexts, vec![ctx(&[]), ctx(&[1]), ctx(&[1, 2])]);
    assert_eq!(rep.contexts_visited, 3);

    let v = Valuation::new(&s, vec![Element(1), Element(2)], ctx(&[4, 7])).unwrap();
    let rep = locality_report_at(
        &s,
        &[f(&s, "Lt(y0, y1)")],
        &LargenessRelation::fallback(),
        &v,
    )
    .unwrap();
    assert_eq!(rep.max_index_used, 7);

    let rep = locality_report(&s, &[], &LargenessRelation::fallback()).unwrap();
    assert_eq!(rep.max_index_used, 0);
    assert_eq!(rep.contexts_visited, 0);
}
