//! Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use dynmod::holapprox::{
    check_suitable, differentiate, sqrt2_approximant, FunctionApproximation, SuitableIndexSet,
    SQRT2_GUARD,
};
use dynmod::indexing::{Context, IndexPoint, LargenessRelation};
use dynmod::kripke::{
    check_context_coherence, check_persistence, force, force_textbook, witness_close_kripke,
    KripkeDoc, KripkeStagedModel,
};
use dynmod::semantics::{
    check_independence_at, eval_classical, eval_reflection, locality_report_at,
    omega_relativization, relativization_indices, witness_close, witness_close_at, HorizonChooser,
    SemanticsError, Valuation, WitnessClosureReport,
};
use dynmod::structures::{naturals_evens_constraints, product, Element, StagedStructure};
use dynmod::syntax::{enumerate_stratum, parse, sample_formula, Formula, Signature};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force, kripke_doc, preorders_up_to_iso, random_structure, up_closed, Layout};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn main() {
    let mut all = true;
    let mut report = |n: usize, name: &str, o: Outcome| {
        all &= o.pass;
        println!(
            "{} [{n}] {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    };
    report(1, "paradox exhaustion", paradox());
    report(2, "flagship divergence", flagship());
    let corpus = Corpus::build();
    let (o3, closed) = oracle_equivalence(&corpus);
    report(3, "oracle equivalence", o3);
    report(4, "index independence", independence(&corpus, &closed));
    report(5, "witness-closure regression", closure_regression());
    report(6, "relativization agreement", relativization());
    report(7, "kripke laws and forcing", kripke());
    report(8, "hol coherence", hol());
    report(9, "locality", locality(&corpus, &closed));
    if !all {
        std::process::exit(1);
    }
}

fn paradox() -> Outcome {
    let start = Instant::now();
    let mut mismatches = 0;
    let mut both = Vec::new();
    for i in 1..=50u32 {
        for j in 1..=50u32 {
            let r = naturals_evens_constraints(i, j).unwrap();
            // Stage i of the naturals is {0..i-1}; stage j of the evens is {0, 2, .., 2j-2}.
            let nat: Vec<u32> = (0..i).collect();
            let ev: Vec<u32> = (0..j).map(|n| 2 * n).collect();
            let subset = ev.iter().all(|x| nat.contains(x));
            let doubled: Vec<u32> = nat.iter().map(|x| 2 * x).collect();
            let bijection = doubled == ev;
            if r.subset_holds != subset || r.bijection_holds != bijection || !r.extensional_agrees {
                mismatches += 1;
            }
            if r.subset_holds && r.bijection_holds {
                both.push((i, j));
            }
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        mismatches == 0 && both == [(1, 1)] && elapsed < Duration::from_secs(1),
        format!("{mismatches} mismatches over 2500 pairs, both hold at {both:?}, {elapsed:.2?}"),
    )
}

fn naturals(headroom: IndexPoint) -> StagedStructure {
    StagedStructure::naturals(headroom).unwrap()
}

fn flagship() -> Outcome {
    let s = naturals(50);
    let phi = parse("forall y0. exists y1. Lt(y0, y1)", &s.signature()).unwrap();
    let report = match witness_close(&s, std::slice::from_ref(&phi), 50) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("closure failed: {e}")),
    };
    let refl = eval_reflection(
        &s,
        &phi,
        &Valuation::empty(),
        &report.relation(),
        &mut HorizonChooser,
    )
    .unwrap();
    let classical: Vec<bool> = [5, 10, 20]
        .iter()
        .map(|&b| eval_classical(&s, &phi, &[], b).unwrap())
        .collect();
    Outcome::new(
        refl.verdict && classical.iter().all(|&c| !c),
        format!(
            "reflection {}, classical at 5/10/20 {classical:?}",
            refl.verdict
        ),
    )
}

/// A structure of the oracle corpus with its formulas.
struct Case {
    label: String,
    json: String,
    saturation: IndexPoint,
    headroom: IndexPoint,
    formulas: Vec<Formula>,
}

struct Corpus {
    cases: Vec<Case>,
}

impl Corpus {
    fn build() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let layouts: Vec<(Layout, usize)> = vec![
            (
                Layout {
                    sizes: vec![1, 2, 3],
                    headroom: 4,
                    relations: vec![("P", 1, false)],
                    constant: false,
                    equality: false,
                },
                3,
            ),
            (
                Layout {
                    sizes: vec![2, 4, 4, 5],
                    headroom: 5,
                    relations: vec![("P", 1, true)],
                    constant: false,
                    equality: false,
                },
                3,
            ),
            (
                Layout {
                    sizes: vec![1, 3, 4],
                    headroom: 4,
                    relations: vec![("R", 2, false)],
                    constant: false,
                    equality: false,
                },
                2,
            ),
            (
                Layout {
                    sizes: vec![2, 4, 6],
                    headroom: 4,
                    relations: vec![("P", 1, false), ("R", 2, true)],
                    constant: false,
                    equality: true,
                },
                2,
            ),
            (
                Layout {
                    sizes: vec![1, 2, 4, 5],
                    headroom: 5,
                    relations: vec![("P", 1, false), ("Q", 1, false), ("R", 2, false)],
                    constant: true,
                    equality: false,
                },
                2,
            ),
            (
                Layout {
                    sizes: vec![3],
                    headroom: 2,
                    relations: vec![("R", 2, true)],
                    constant: false,
                    equality: true,
                },
                2,
            ),
        ];
        let mut cases = Vec::new();
        for (n, (layout, k)) in layouts.into_iter().enumerate() {
            let json = random_structure(&mut rng, &layout);
            let s = StagedStructure::from_json(&json).unwrap();
            let sig = s.signature();
            let mut formulas = enumerate_stratum(&sig, k).unwrap();
            if k < 3 {
                for _ in 0..100 {
                    let free = rng.gen_range(0..=2);
                    formulas.push(sample_formula(&mut rng, &sig, free, 3));
                }
            }
            cases.push(Case {
                label: format!("S{n}"),
                saturation: s.universe().saturation().unwrap(),
                headroom: layout.headroom,
                json,
                formulas,
            });
        }
        Corpus { cases }
    }

    fn formula_count(&self) -> usize {
        self.cases.iter().map(|c| c.formulas.len()).sum()
    }
}

/// Every valuation of the formula's free variables over the saturation
/// stage, each at context `(sat, ..., sat)`.
fn bases(s: &StagedStructure, phi: &Formula, sat: IndexPoint) -> Vec<Valuation> {
    let n = phi.free_bound();
    let top = s.stage_elements(sat).unwrap();
    product(&vec![top; n])
        .into_iter()
        .map(|e| Valuation::new(s, e, Context::new(vec![sat; n])).unwrap())
        .collect()
}

/// Closure reports per case and formula.
type Closed = Vec<Vec<Result<WitnessClosureReport, SemanticsError>>>;

fn oracle_equivalence(corpus: &Corpus) -> (Outcome, Closed) {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut failures: Vec<String> = Vec::new();
    let mut closed = Vec::new();
    for case in &corpus.cases {
        let s = StagedStructure::from_json(&case.json).unwrap();
        let mut reports = Vec::new();
        for phi in &case.formulas {
            let vals = bases(&s, phi, case.saturation);
            let report = witness_close_at(&s, std::slice::from_ref(phi), case.headroom, &vals);
            match &report {
                Err(e) => failures.push(format!("{} `{phi}`: closure failed: {e}", case.label)),
                Ok(r) => {
                    let rel = r.relation();
                    for v in &vals {
                        checked += 1;
                        let refl = eval_reflection(&s, phi, v, &rel, &mut HorizonChooser)
                            .map(|r| r.verdict);
                        let classical = eval_classical(&s, phi, v.elements(), case.saturation);
                        let oracle = brute_force(&s, phi, v.elements(), case.saturation);
                        if refl.as_ref().ok() != Some(&oracle)
                            || classical.as_ref().ok() != Some(&oracle)
                        {
                            failures.push(format!(
                                "{} `{phi}` at {:?}: reflection {refl:?}, classical {classical:?}, oracle {oracle}",
                                case.label,
                                v.elements()
                            ));
                        }
                    }
                }
            }
            reports.push(report);
        }
        closed.push(reports);
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty()
        && corpus.cases.len() >= 5
        && corpus.formula_count() >= 200
        && elapsed < Duration::from_secs(30);
    let mut detail = format!(
        "{} structures, {} formulas, {checked} valuations, {} disagreements, {elapsed:.2?}",
        corpus.cases.len(),
        corpus.formula_count(),
        failures.len()
    );
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; first: {f}"));
    }
    (Outcome::new(pass, detail), closed)
}

fn independence(corpus: &Corpus, closed: &Closed) -> Outcome {
    let mut runs = 0usize;
    let mut failures = Vec::new();
    for (case, reports) in corpus.cases.iter().zip(closed) {
        let s = StagedStructure::from_json(&case.json).unwrap();
        for (n, (phi, report)) in case.formulas.iter().zip(reports).enumerate() {
            let Ok(report) = report else {
                failures.push(format!("{} `{phi}`: no closure", case.label));
                continue;
            };
            for v in bases(&s, phi, case.saturation) {
                runs += 1;
                match check_independence_at(&s, phi, &v, report, 20, 1000 + n as u64) {
                    Ok(r) if r.all_agree => {}
                    other => failures.push(format!(
                        "{} `{phi}` at {:?}: {other:?}",
                        case.label,
                        v.elements()
                    )),
                }
            }
        }
    }
    let mut detail = format!(
        "{runs} formula/valuation pairs x 20 seeds, {} disagreements",
        failures.len()
    );
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; first: {f}"));
    }
    Outcome::new(failures.is_empty(), detail)
}

/// Least `h` such that the verdict over stage `s` is the same for every
/// `s` in `[h, top]`, scanning down from `top`.
fn downward_scan(verdict: impl Fn(IndexPoint) -> bool, top: IndexPoint) -> IndexPoint {
    let v = verdict(top);
    let mut h = top;
    while h > 1 && verdict(h - 1) == v {
        h -= 1;
    }
    h
}

fn closure_regression() -> Outcome {
    let headroom = 50;
    let s = naturals(headroom);
    let sig = s.signature();
    let even = |e: u32| e.is_multiple_of(2);
    // Verdicts over stage s = {0..s-1}, computed directly.
    let exists_even = downward_scan(|st| (0..st).any(even), headroom);
    let forall_even = downward_scan(|st| (0..st).all(even), headroom);
    let mut got = Vec::new();
    for text in ["exists y0. Even(y0)", "forall y0. Even(y0)"] {
        let phi = parse(text, &sig).unwrap();
        match witness_close(&s, &[phi], headroom) {
            Ok(r) => got.push(r.horizon.get(&Context::empty())),
            Err(e) => return Outcome::new(false, format!("`{text}`: {e}")),
        }
    }
    let flagship = parse("forall y0. exists y1. Lt(y0, y1)", &sig).unwrap();
    let flag = witness_close(&s, &[flagship], headroom);
    let pass = got == [exists_even, forall_even] && got == [1, 2] && flag.is_ok();
    Outcome::new(
        pass,
        format!(
            "h(()) = {got:?}, oracle {:?}, flagship closure {}",
            [exists_even, forall_even],
            match &flag {
                Ok(r) => format!("ok in {} passes, {} truncated", r.passes, r.truncated.len()),
                Err(e) => e.to_string(),
            }
        ),
    )
}

fn relativization() -> Outcome {
    let s = naturals(50);
    let sig = s.signature();
    let rel = LargenessRelation::fallback();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut failures = Vec::new();
    for _ in 0..100 {
        let ops = rng.gen_range(1..=6);
        let phi = sample_formula(&mut rng, &sig, 0, ops);
        let outcome = (|| -> Result<(bool, bool), SemanticsError> {
            let r = eval_reflection(&s, &phi, &Valuation::empty(), &rel, &mut HorizonChooser)?;
            let indices = relativization_indices(&r, 0)?;
            let (s2, psi) = omega_relativization(&s, &phi, &indices)?;
            Ok((r.verdict, eval_classical(&s2, &psi, &[], 50)?))
        })();
        match outcome {
            Ok((a, b)) if a == b => {}
            other => failures.push(format!("`{phi}`: {other:?}")),
        }
    }
    let mut detail = format!("100 formulas, {} disagreements", failures.len());
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; first: {f}"));
    }
    Outcome::new(failures.is_empty(), detail)
}

fn kripke() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for (ok, note) in [
        kripke_mutations(),
        forcing_persistence(),
        forcing_agreement(),
    ] {
        pass &= ok;
        notes.push(note);
    }
    Outcome::new(pass, notes.join("; "))
}

fn frames() -> Vec<Vec<Vec<bool>>> {
    (1..=4).flat_map(preorders_up_to_iso).collect()
}

fn load(json: &str) -> KripkeStagedModel {
    KripkeStagedModel::from_doc_unchecked(&KripkeDoc::from_json(json).unwrap()).unwrap()
}

/// Injects single violations into otherwise lawful models on every frame and
/// compares the reports with the violations expected from the frame.
fn kripke_mutations() -> (bool, String) {
    let mut injected = 0;
    let mut failures = Vec::new();
    for leq in frames() {
        let n = leq.len();
        let has_b = vec![true; n];
        for target in 0..n {
            // Persistence: drop P(a) at `target` only.
            let p: Vec<Vec<&str>> = (0..n)
                .map(|k| {
                    if k == target {
                        vec!["b"]
                    } else {
                        vec!["a", "b"]
                    }
                })
                .collect();
            let k = load(&kripke_doc(&leq, &has_b, &p, 3));
            let mut expected: Vec<(String, String)> = (0..n)
                .filter(|&lo| lo != target && leq[lo][target])
                .map(|lo| (format!("k{lo}"), format!("k{target}")))
                .collect();
            expected.sort();
            let found = check_persistence(&k);
            let mut got: Vec<(String, String)> = found
                .iter()
                .map(|v| (v.lower.clone(), v.upper.clone()))
                .collect();
            got.sort();
            if got != expected || found.iter().any(|v| v.tuple != ["a"] || v.relation != "P") {
                failures.push(format!("persistence on {leq:?} at k{target}: {got:?}"));
            }
            if !check_context_coherence(&k).is_empty() {
                failures.push(format!("spurious coherence violation on {leq:?}"));
            }
            injected += usize::from(!expected.is_empty());

            // Coherence: Q holds of `a` at (2) but not at (1) on `target`.
            let alone = (0..n).all(|o| o == target || !(leq[o][target] && leq[target][o]));
            if !alone {
                continue;
            }
            let mut doc: serde_json::Value =
                serde_json::from_str(&kripke_doc(&leq, &has_b, &vec![vec![]; n], 3)).unwrap();
            for k2 in 0..n {
                let state = if k2 == target {
                    serde_json::json!({"family": {"1": [], "2": [["a"]]}, "arity": 1})
                } else if leq[target][k2] {
                    serde_json::json!({"tuples": [["a"]], "arity": 1})
                } else {
                    serde_json::json!({"tuples": [], "arity": 1})
                };
                doc["relationStates"]["Q"][format!("k{k2}")] = state;
            }
            let k = load(&doc.to_string());
            let found = check_context_coherence(&k);
            let ok = found.len() == 1
                && found[0].node == format!("k{target}")
                && found[0].relation == "Q"
                && found[0].tuple == ["a"];
            if !ok || !check_persistence(&k).is_empty() {
                failures.push(format!("coherence on {leq:?} at k{target}: {found:?}"));
            }
            injected += 1;
        }
    }
    if let Some(f) = failures.first() {
        return (
            false,
            format!("mutation: {} failures, first {f}", failures.len()),
        );
    }
    (true, format!("{injected} injected violations caught"))
}

/// Forcing is persistent: `k <= k'` and `k ||- phi[v]` give `k' ||- phi[v]`.
fn forcing_persistence() -> (bool, String) {
    let frames = frames();
    let sig = Signature::new(false).with_relation("P", 1).unwrap();
    let formulas = enumerate_stratum(&sig, 3).unwrap();
    let results: Vec<(usize, Vec<String>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = frames
            .iter()
            .enumerate()
            .map(|(fi, leq)| {
                let formulas = &formulas;
                scope.spawn(move || persistence_on_frame(fi, leq, formulas))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let checks: usize = results.iter().map(|r| r.0).sum();
    let failures: Vec<&String> = results.iter().flat_map(|r| &r.1).collect();
    let note = format!(
        "persistence: {} frames x {} formulas, {checks} checks, {} failures",
        frames.len(),
        formulas.len(),
        failures.len()
    );
    match failures.first() {
        Some(f) => (false, format!("{note}, first {f}")),
        None => (true, note),
    }
}

fn persistence_on_frame(
    fi: usize,
    leq: &[Vec<bool>],
    formulas: &[Formula],
) -> (usize, Vec<String>) {
    let n = leq.len();
    let mut rng = ChaCha8Rng::seed_from_u64(fi as u64);
    let rel = LargenessRelation::fallback();
    let mut checks = 0;
    let mut failures = Vec::new();
    for _ in 0..2 {
        let has_b = up_closed(&mut rng, leq);
        let pa = up_closed(&mut rng, leq);
        let pb: Vec<bool> = up_closed(&mut rng, leq)
            .iter()
            .zip(&has_b)
            .map(|(x, y)| *x && *y)
            .collect();
        let p: Vec<Vec<&str>> = (0..n)
            .map(|k| {
                [("a", pa[k]), ("b", pb[k])]
                    .iter()
                    .filter(|x| x.1)
                    .map(|x| x.0)
                    .collect()
            })
            .collect();
        let k = KripkeStagedModel::from_json(&kripke_doc(leq, &has_b, &p, 5)).unwrap();
        for phi in formulas {
            let free = phi.free_bound();
            // Valuations over every element of the model; a node only sees those it has.
            let mut elements: Vec<Element> = (0..n)
                .flat_map(|m| k.structure(m).universe().top().to_vec())
                .collect();
            elements.sort();
            elements.dedup();
            for elems in product(&vec![elements.as_slice(); free]) {
                let forced: Vec<Option<bool>> = (0..n)
                    .map(|node| {
                        let v =
                            Valuation::at_least_stages(k.structure(node), elems.clone()).ok()?;
                        Some(force(&k, &k.nodes()[node], phi, &v, &rel).unwrap())
                    })
                    .collect();
                for a in 0..n {
                    for b in 0..n {
                        if !leq[a][b] {
                            continue;
                        }
                        checks += 1;
                        if forced[a] == Some(true) && forced[b] != Some(true) {
                            failures.push(format!(
                                "`{phi}` {elems:?} forced at k{a} but not at k{b} on {leq:?}"
                            ));
                        }
                    }
                }
            }
        }
    }
    (checks, failures)
}

/// Reflection forcing with a witness-closed horizon against textbook forcing
/// at the saturation stage.
fn forcing_agreement() -> (bool, String) {
    let doc = r#"{"nodes": ["r", "m", "t", "u"], "order": [["r", "m"], ["m", "t"], ["r", "u"]],
        "structures": {
          "r": {"universe": {"stages": [["a"], ["a", "b"]]}, "headroom": 4},
          "m": {"universe": {"stages": [["a"], ["a", "b"], ["a", "b", "c"]]}, "headroom": 4},
          "t": {"universe": {"stages": [["a"], ["a", "b"], ["a", "b", "c"]]}, "headroom": 4},
          "u": {"universe": {"stages": [["a", "b"], ["a", "b", "d"]]}, "headroom": 4}},
        "relationStates": {
          "P": {"r": {"tuples": [["a"]]}, "m": {"tuples": [["a"], ["c"]]}, "t": {"tuples": [["a"], ["b"], ["c"]]},
                "u": {"tuples": [["a"], ["d"]]}},
          "R": {"r": {"tuples": [["a", "b"]]}, "m": {"tuples": [["a", "b"], ["b", "c"]]},
                "t": {"tuples": [["a", "b"], ["b", "c"], ["c", "a"]]}, "u": {"tuples": [["a", "b"], ["b", "b"]]}}}}"#;
    let k = KripkeStagedModel::from_json(doc).unwrap();
    let sig = k.signature();
    let saturation = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut failures = Vec::new();
    for _ in 0..100 {
        let ops = rng.gen_range(1..=4);
        let phi = sample_formula(&mut rng, &sig, 0, ops);
        let report = match witness_close_kripke(&k, std::slice::from_ref(&phi), 4) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("`{phi}`: {e}"));
                continue;
            }
        };
        let rel = report.relation();
        for node in k.nodes() {
            let a = force(&k, node, &phi, &Valuation::empty(), &rel);
            let b = force_textbook(&k, node, &phi, &[], saturation);
            if a.as_ref().ok() != b.as_ref().ok() || a.is_err() {
                failures.push(format!("`{phi}` at {node}: {a:?} vs {b:?}"));
            }
        }
    }
    let note = format!(
        "force vs textbook: 100 sentences x 4 nodes, {} disagreements",
        failures.len()
    );
    match failures.first() {
        Some(f) => (false, format!("{note}, first {f}")),
        None => (true, note),
    }
}

fn hol() -> Outcome {
    let mut problems = Vec::new();

    let dbl: Vec<u32> = (0..20).map(|n| 2 * n).collect();
    let h = SuitableIndexSet::above_maximum(&dbl, 20);
    for i in 1..=20 {
        for j in 1..=20 {
            if h.contains(i, j) != (j + 1 >= 2 * i) {
                problems.push(format!("suitable({i}, {j})"));
            }
        }
    }
    if !check_suitable(&dbl, &h, 20)
        .map(|r| r.passed())
        .unwrap_or(false)
    {
        problems.push("check_suitable(doubling) failed".into());
    }

    let bound = 10u32;
    type Map = Box<dyn Fn(u32) -> u32>;
    let maps: Vec<(&str, Map)> = vec![
        ("doubling", Box::new(|n| 2 * n)),
        ("identity", Box::new(|n| n)),
        ("zero", Box::new(|_| 0)),
        ("square", Box::new(|n| n * n)),
        ("parity", Box::new(|n| n % 2)),
        ("reverse", Box::new(|n| 9u32.saturating_sub(n))),
    ];
    let mut compositions = 0;
    for (name, f) in &maps {
        let tables: BTreeMap<(u32, u32), FunctionApproximation> = (1..=bound)
            .flat_map(|i| (1..=bound).map(move |j| (i, j)))
            .filter_map(|(i, j)| {
                FunctionApproximation::from_fn(i, j, f)
                    .ok()
                    .map(|a| ((i, j), a))
            })
            .collect();
        for (&(i, j), big) in &tables {
            if big.restrict(i, j).as_ref() != Ok(big) {
                problems.push(format!("{name}: identity restriction at ({i}, {j})"));
            }
            for (&(i2, j2), mid) in tables.range(..=(i, j)) {
                if i2 > i || j2 > j {
                    continue;
                }
                if big.restrict(i2, j2).as_ref() != Ok(mid) {
                    problems.push(format!("{name}: ({i}, {j}) -> ({i2}, {j2})"));
                }
                for (&(i3, j3), small) in tables.range(..=(i2, j2)) {
                    if i3 > i2 || j3 > j2 {
                        continue;
                    }
                    compositions += 1;
                    if big
                        .restrict(i2, j2)
                        .and_then(|m| m.restrict(i3, j3))
                        .as_ref()
                        != Ok(small)
                    {
                        problems.push(format!(
                            "{name}: ({i}, {j}) -> ({i2}, {j2}) -> ({i3}, {j3})"
                        ));
                    }
                }
            }
        }
    }

    for k in 0..=SQRT2_GUARD {
        let a = sqrt2_approximant(k).unwrap();
        let digits: String = a.as_str().chars().filter(|c| *c != '.').collect();
        let r: u128 = digits.parse().unwrap();
        let target = 2 * 10u128.pow(2 * k as u32);
        if a.fractional_digits() != k || r * r > target || (r + 1) * (r + 1) <= target {
            problems.push(format!("sqrt2({k}) = {a}"));
        }
    }

    let kids: Vec<String> = differentiate(&"1.41".parse().unwrap())
        .iter()
        .map(ToString::to_string)
        .collect();
    let expected: Vec<String> = (0..10).map(|d| format!("1.41{d}")).collect();
    if kids != expected {
        problems.push(format!("differentiate(1.41) = {kids:?}"));
    }

    let mut detail = format!("{compositions} restriction chains over {} maps", maps.len());
    if let Some(p) = problems.first() {
        detail.push_str(&format!("; {} problems, first {p}", problems.len()));
    }
    Outcome::new(problems.is_empty(), detail)
}

/// Locality reports for the whole corpus, as JSON, from a fresh closure
/// computation when `closed` is `None`.
fn locality_json(
    corpus: &Corpus,
    closed: Option<&Closed>,
) -> Result<(String, IndexPoint, bool), String> {
    let mut out = Vec::new();
    let mut max_used = 0;
    let mut within = true;
    for (ci, case) in corpus.cases.iter().enumerate() {
        let s = StagedStructure::from_json(&case.json).unwrap();
        for (fi, phi) in case.formulas.iter().enumerate() {
            let vals = bases(&s, phi, case.saturation);
            let fresh;
            let report = match closed {
                Some(c) => c[ci][fi].as_ref().map_err(|e| e.to_string())?,
                None => {
                    fresh = witness_close_at(&s, std::slice::from_ref(phi), case.headroom, &vals)
                        .map_err(|e| e.to_string())?;
                    &fresh
                }
            };
            let rel = report.relation();
            for v in &vals {
                let r = locality_report_at(&s, std::slice::from_ref(phi), &rel, v)
                    .map_err(|e| e.to_string())?;
                max_used = max_used.max(r.max_index_used);
                within &= r.max_index_used <= case.headroom;
                out.push(serde_json::to_value(&r).unwrap());
            }
        }
    }
    Ok((serde_json::to_string(&out).unwrap(), max_used, within))
}

fn locality(corpus: &Corpus, closed: &Closed) -> Outcome {
    let first = locality_json(corpus, Some(closed));
    let second = locality_json(&Corpus::build(), None);
    match (first, second) {
        (Ok((a, max_used, within)), Ok((b, _, _))) => Outcome::new(
            within && a == b,
            format!(
                "max index used {max_used}, {} bytes, identical across runs: {}",
                a.len(),
                a == b
            ),
        ),
        (Err(e), _) | (_, Err(e)) => Outcome::new(false, e),
    }
}
