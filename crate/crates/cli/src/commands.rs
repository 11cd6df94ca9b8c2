use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context as _, Result};
use dynmod::holapprox::{
    check_suitable, differentiate, omega_stage, smap_omega, sqrt2_approximant,
    FunctionApproximation, SuitableIndexSet,
};
use dynmod::indexing::{Context, HorizonFunction, LargenessRelation};
use dynmod::kripke::{
    check_context_coherence, check_persistence, force, force_textbook, witness_close_kripke,
    KripkeDoc, KripkeStagedModel,
};
use dynmod::semantics::{
    check_independence_at, eval_classical, eval_reflection, locality_report_at, witness_close_at,
    HorizonChooser, SemanticsError, Valuation, WitnessClosureReport,
};
use dynmod::structures::{
    classify_system, naturals_evens_constraints, RelationFamily, StagedStructure, SystemMap,
    UniverseKind,
};
use dynmod::syntax::{parse, parse_inferring, Formula, Signature};
use serde_json::{json, Value};

use crate::{
    CheckArgs, Cli, Command, Demo, EvalArgs, FormulaSource, Hol, HorizonKind, KripkeCommand,
    KripkeEvalArgs, Mode, ParseArgs,
};

/// Text to print and the exit code to finish with.
pub struct Output {
    pub text: String,
    pub code: u8,
}

impl Output {
    fn ok(text: String) -> Self {
        Output { text, code: 0 }
    }
}

pub fn run(cli: &Cli) -> Result<Output> {
    let json = cli.json;
    match &cli.command {
        Command::Parse(a) => parse_cmd(a, json),
        Command::Eval(a) => eval_cmd(a, json),
        Command::Horizon(a) => horizon_cmd(a, json),
        Command::Independence(a) => independence_cmd(a, json),
        Command::Locality(a) => locality_cmd(a, json),
        Command::Check(a) => check_cmd(a, json),
        Command::Demo(Demo::Paradox { i, j }) => {
            let r = naturals_evens_constraints(*i, *j)?;
            Ok(Output::ok(if json {
                render(&serde_json::to_value(r)?)
            } else {
                format!(
                    "subset={} bijection={}\n",
                    r.subset_holds, r.bijection_holds
                )
            }))
        }
        Command::Kripke(KripkeCommand::Check { frame }) => kripke_check(frame, json),
        Command::Kripke(KripkeCommand::Eval(a)) => kripke_eval(a, json),
        Command::Hol(h) => hol_cmd(h, json).map(Output::ok),
    }
}

fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_structure(path: &Path) -> Result<StagedStructure> {
    StagedStructure::from_json(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn formula_texts(src: &FormulaSource) -> Result<Vec<String>> {
    match (&src.formula, &src.formulas) {
        (Some(f), _) => Ok(vec![f.clone()]),
        (None, Some(path)) => Ok(read(path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect()),
        (None, None) => bail!("one of --formula or --formulas is required"),
    }
}

fn formulas(src: &FormulaSource, sig: &Signature) -> Result<Vec<Formula>> {
    formula_texts(src)?
        .iter()
        .map(|t| parse(t, sig).with_context(|| format!("in `{t}`")))
        .collect()
}

/// Labels for the free variables, each placed at the least stage holding it.
fn valuation(s: &StagedStructure, text: Option<&str>) -> Result<Valuation> {
    let Some(text) = text.filter(|t| !t.trim().is_empty()) else {
        return Ok(Valuation::empty());
    };
    let mut elements = Vec::new();
    let mut stages = Vec::new();
    for label in text.split(',').map(str::trim) {
        let e = s.universe().lookup_or_range(label)?;
        elements.push(e);
        stages.push(
            s.universe()
                .first_stage(e)
                .expect("looked-up elements lie in a stage"),
        );
    }
    Ok(Valuation::new(s, elements, Context::new(stages))?)
}

fn horizon_table(h: &HorizonFunction) -> Value {
    let table: BTreeMap<String, u32> = h.table().iter().map(|(c, &i)| (c.to_string(), i)).collect();
    json!(table)
}

/// Headroom for reflection, checked against the structure.
fn reflection_headroom(s: &StagedStructure, a: &EvalArgs) -> Result<u32> {
    let headroom = a.headroom.unwrap_or(s.headroom());
    if headroom < 2 {
        bail!("reflection needs a headroom of at least 2, got {headroom}");
    }
    if headroom > s.headroom() {
        return Err(SemanticsError::HeadroomExceeded {
            requested: headroom,
            headroom: s.headroom(),
        }
        .into());
    }
    Ok(headroom)
}

fn closure(
    s: &StagedStructure,
    phis: &[Formula],
    v: &Valuation,
    headroom: u32,
) -> Result<WitnessClosureReport> {
    Ok(witness_close_at(
        s,
        phis,
        headroom,
        std::slice::from_ref(v),
    )?)
}

/// Evaluates every formula and returns one record per formula.
fn evaluate(
    s: &StagedStructure,
    phis: &[Formula],
    a: &EvalArgs,
    v: &Valuation,
) -> Result<Vec<Value>> {
    let mut out = Vec::new();
    match a.mode {
        Mode::Classical => {
            let bound = a.bound.or(a.headroom).unwrap_or(s.headroom());
            for phi in phis {
                let verdict = eval_classical(s, phi, v.elements(), bound)?;
                out.push(json!({
                    "formula": phi.to_string(),
                    "verdict": verdict,
                    "trace": [],
                    "maxIndexUsed": bound,
                    "horizonTable": {},
                }));
            }
        }
        Mode::Reflection => {
            let headroom = reflection_headroom(s, a)?;
            let h = match a.horizon {
                HorizonKind::Closed => closure(s, phis, v, headroom)?.horizon,
                HorizonKind::Fallback => HorizonFunction::fallback(),
            };
            let rel = LargenessRelation::new(h.clone());
            for phi in phis {
                let r = eval_reflection(s, phi, v, &rel, &mut HorizonChooser)?;
                if r.max_index_used > headroom {
                    return Err(SemanticsError::HeadroomExceeded {
                        requested: r.max_index_used,
                        headroom,
                    }
                    .into());
                }
                out.push(json!({
                    "formula": phi.to_string(),
                    "verdict": r.verdict,
                    "trace": r.trace,
                    "maxIndexUsed": r.max_index_used,
                    "horizonTable": horizon_table(&h),
                }));
            }
        }
    }
    Ok(out)
}

/// One object for a single formula, an array otherwise.
fn records(src: &FormulaSource, mut rs: Vec<Value>) -> Value {
    if src.formula.is_some() && rs.len() == 1 {
        rs.pop().unwrap()
    } else {
        Value::Array(rs)
    }
}

fn trace_text(out: &mut String, r: &Value) {
    for t in r["trace"].as_array().into_iter().flatten() {
        let ctx: Vec<String> = t["context"]
            .as_array()
            .into_iter()
            .flatten()
            .map(|i| i.to_string())
            .collect();
        let _ = writeln!(
            out,
            "  forall at ({}) -> stage {}",
            ctx.join(","),
            t["chosen"]
        );
    }
}

fn parse_cmd(a: &ParseArgs, json: bool) -> Result<Output> {
    let parsed: Vec<(Formula, Signature)> = match &a.structure {
        Some(path) => {
            let sig = load_structure(path)?.signature();
            formulas(&a.source, &sig)?
                .into_iter()
                .map(|f| (f, sig.clone()))
                .collect()
        }
        None => formula_texts(&a.source)?
            .iter()
            .map(|t| parse_inferring(t).with_context(|| format!("in `{t}`")))
            .collect::<Result<_>>()?,
    };
    let rs: Vec<Value> = parsed
        .iter()
        .map(|(f, _)| {
            json!({
                "formula": f.to_string(),
                "canonical": f.canonical().to_string(),
                "freeVariables": f.free_variables(),
                "stratum": f.stratum(),
                "quantifierDepth": f.quantifier_depth(),
            })
        })
        .collect();
    if json {
        return Ok(Output::ok(render(&records(&a.source, rs))));
    }
    let mut out = String::new();
    for r in &rs {
        let _ = writeln!(
            out,
            "{}\n  canonical: {}\n  stratum: {}, quantifier depth: {}",
            r["formula"].as_str().unwrap(),
            r["canonical"].as_str().unwrap(),
            r["stratum"],
            r["quantifierDepth"]
        );
    }
    Ok(Output::ok(out))
}

fn eval_cmd(a: &EvalArgs, json: bool) -> Result<Output> {
    let s = load_structure(&a.structure)?;
    let phis = formulas(&a.source, &s.signature())?;
    let v = valuation(&s, a.valuation.as_deref())?;
    let rs = evaluate(&s, &phis, a, &v)?;
    if json {
        return Ok(Output::ok(render(&records(&a.source, rs))));
    }
    let mut out = String::new();
    for r in &rs {
        let _ = writeln!(
            out,
            "{}\n  verdict: {}\n  maxIndexUsed: {}",
            r["formula"].as_str().unwrap(),
            r["verdict"],
            r["maxIndexUsed"]
        );
        trace_text(&mut out, r);
    }
    Ok(Output::ok(out))
}

fn horizon_cmd(a: &EvalArgs, json: bool) -> Result<Output> {
    let s = load_structure(&a.structure)?;
    let phis = formulas(&a.source, &s.signature())?;
    let v = valuation(&s, a.valuation.as_deref())?;
    let headroom = reflection_headroom(&s, a)?;
    let report = closure(&s, &phis, &v, headroom)?;
    let rel = report.relation();
    let window_top: BTreeMap<String, u32> = report
        .window_top
        .iter()
        .map(|(c, &i)| (c.to_string(), i))
        .collect();
    let truncated: Vec<String> = report.truncated.iter().map(ToString::to_string).collect();
    let mut rs = Vec::new();
    for phi in &phis {
        let r = eval_reflection(&s, phi, &v, &rel, &mut HorizonChooser)?;
        rs.push(json!({
            "formula": phi.to_string(),
            "verdict": r.verdict,
            "trace": r.trace,
            "maxIndexUsed": r.max_index_used,
            "horizonTable": horizon_table(&report.horizon),
            "windowTop": window_top,
            "truncated": truncated,
            "stableFrom": report.stable_from,
            "headroom": headroom,
            "passes": report.passes,
        }));
    }
    if json {
        return Ok(Output::ok(render(&records(&a.source, rs))));
    }
    let mut out = String::new();
    for (c, i) in report.horizon.table() {
        let top = report
            .window_top
            .get(c)
            .map_or(String::new(), |t| format!(" (window top {t})"));
        let _ = writeln!(out, "h{c} = {i}{top}");
    }
    if !truncated.is_empty() {
        let _ = writeln!(out, "truncated: {}", truncated.join(" "));
    }
    for r in &rs {
        let _ = writeln!(
            out,
            "{}: {} (maxIndexUsed {})",
            r["formula"].as_str().unwrap(),
            r["verdict"],
            r["maxIndexUsed"]
        );
    }
    Ok(Output::ok(out))
}

fn independence_cmd(a: &EvalArgs, json: bool) -> Result<Output> {
    let Some(seed) = a.seed.or((a.trials == 0).then_some(0)) else {
        bail!("--seed is required when --trials is positive");
    };
    let s = load_structure(&a.structure)?;
    let phis = formulas(&a.source, &s.signature())?;
    let v = valuation(&s, a.valuation.as_deref())?;
    let headroom = reflection_headroom(&s, a)?;
    let report = closure(&s, &phis, &v, headroom)?;
    let mut rs = Vec::new();
    let mut agree = true;
    for phi in &phis {
        let r = check_independence_at(&s, phi, &v, &report, a.trials, seed)?;
        agree &= r.all_agree;
        let mut value = serde_json::to_value(&r)?;
        value["formula"] = json!(phi.to_string());
        rs.push(value);
    }
    let text = if json {
        render(&records(&a.source, rs))
    } else {
        let mut out = String::new();
        for r in &rs {
            let _ = writeln!(
                out,
                "{}: default {}, {} trials, all agree: {}",
                r["formula"].as_str().unwrap(),
                r["defaultVerdict"],
                a.trials,
                r["allAgree"]
            );
        }
        out
    };
    Ok(Output {
        text,
        code: if agree { 0 } else { 3 },
    })
}

fn locality_cmd(a: &EvalArgs, json: bool) -> Result<Output> {
    let s = load_structure(&a.structure)?;
    let phis = formulas(&a.source, &s.signature())?;
    let v = valuation(&s, a.valuation.as_deref())?;
    let headroom = reflection_headroom(&s, a)?;
    let report = closure(&s, &phis, &v, headroom)?;
    let r = locality_report_at(&s, &phis, &report.relation(), &v)?;
    if json {
        let mut value = serde_json::to_value(&r)?;
        value["headroom"] = json!(headroom);
        return Ok(Output::ok(render(&value)));
    }
    let contexts: Vec<String> = r.contexts.iter().map(ToString::to_string).collect();
    Ok(Output::ok(format!(
        "maxIndexUsed: {} (headroom {headroom})\ncontexts visited: {}\n  {}\nverdicts: {:?}\n",
        r.max_index_used,
        r.contexts_visited,
        contexts.join(" "),
        r.verdicts
    )))
}

fn family_kind(f: &RelationFamily) -> &'static str {
    match f {
        RelationFamily::Builtin(_) => "builtin",
        RelationFamily::LimitRestricted(_) => "limitRestricted",
        RelationFamily::ExplicitFamily(_) => "explicitFamily",
    }
}

fn check_cmd(a: &CheckArgs, json: bool) -> Result<Output> {
    if a.structure.is_none() && a.system.is_none() {
        bail!("give --structure, --system, or both");
    }
    let mut report = serde_json::Map::new();
    let mut text = String::new();
    if let Some(path) = &a.structure {
        let s = load_structure(path)?;
        let u = s.universe();
        let universe = match u.kind() {
            UniverseKind::Builtin(b) => serde_json::to_value(b)?,
            UniverseKind::Explicit(_) => json!("explicit"),
        };
        let relations: BTreeMap<&String, Value> = s
            .relations()
            .iter()
            .map(|(n, r)| (n, json!({"arity": r.arity, "kind": family_kind(&r.family)})))
            .collect();
        report.insert(
            "structure".into(),
            json!({
                "universe": universe,
                "headroom": s.headroom(),
                "saturation": u.saturation(),
                "relations": relations,
                "laws": "ok",
            }),
        );
        let _ = writeln!(
            text,
            "structure: {} relations, headroom {}, laws ok",
            relations.len(),
            s.headroom()
        );
        if let Some(sat) = u.saturation() {
            let _ = writeln!(text, "  saturates at stage {sat}");
        }
    }
    if let Some(path) = &a.system {
        let map = SystemMap::from_json(&read(path)?)?;
        let class = classify_system(&map)?;
        let value = serde_json::to_value(&class)?;
        let _ = writeln!(text, "system: {}", value["class"].as_str().unwrap_or("?"));
        report.insert("system".into(), value);
    }
    Ok(Output::ok(if json {
        render(&Value::Object(report))
    } else {
        text
    }))
}

fn kripke_check(frame: &Path, json: bool) -> Result<Output> {
    let doc = KripkeDoc::from_json(&read(frame)?)?;
    let k = KripkeStagedModel::from_doc_unchecked(&doc)?;
    let persistence = check_persistence(&k);
    let coherence = check_context_coherence(&k);
    let code = if persistence.is_empty() && coherence.is_empty() {
        0
    } else {
        2
    };
    let text = if json {
        render(&json!({"nodes": k.nodes(), "persistence": persistence, "coherence": coherence}))
    } else {
        let mut out = format!("{} nodes\n", k.nodes().len());
        for v in &persistence {
            let _ = writeln!(out, "persistence: {v}");
        }
        for v in &coherence {
            let _ = writeln!(out, "coherence: {v}");
        }
        if code == 0 {
            out.push_str("laws ok\n");
        }
        out
    };
    Ok(Output { text, code })
}

fn kripke_eval(a: &KripkeEvalArgs, json: bool) -> Result<Output> {
    let k = KripkeStagedModel::from_json(&read(&a.frame)?)?;
    let phis = formulas(&a.source, &k.signature())?;
    let nodes: Vec<String> = match &a.node {
        Some(n) => {
            k.node_index(n)?;
            vec![n.clone()]
        }
        None => k.nodes().to_vec(),
    };
    let headroom = a.headroom.unwrap_or(k.headroom());
    let (rel, table) = match a.mode {
        Mode::Reflection => {
            let report = witness_close_kripke(&k, &phis, headroom)?;
            let table = horizon_table(&report.horizon);
            (Some(report.relation()), table)
        }
        Mode::Classical => (None, json!({})),
    };
    let mut rs = Vec::new();
    for phi in &phis {
        let mut verdicts = BTreeMap::new();
        for node in &nodes {
            let forced = match &rel {
                Some(rel) => force(&k, node, phi, &Valuation::empty(), rel)?,
                None => force_textbook(&k, node, phi, &[], a.bound.unwrap_or(headroom))?,
            };
            verdicts.insert(node.clone(), forced);
        }
        rs.push(json!({"formula": phi.to_string(), "forced": verdicts, "horizonTable": table}));
    }
    if json {
        return Ok(Output::ok(render(&records(&a.source, rs))));
    }
    let mut out = String::new();
    for r in &rs {
        let _ = writeln!(out, "{}", r["formula"].as_str().unwrap());
        for (node, v) in r["forced"].as_object().unwrap() {
            let _ = writeln!(
                out,
                "  {node}: {}",
                if v.as_bool() == Some(true) {
                    "forced"
                } else {
                    "not forced"
                }
            );
        }
    }
    Ok(Output::ok(out))
}

fn table(text: &str) -> Result<Vec<u32>> {
    text.split(',')
        .map(|x| {
            x.trim().parse::<u32>().map_err(|_| {
                anyhow!(dynmod::holapprox::HolError::InvalidTable(format!(
                    "`{x}` is not a number"
                )))
            })
        })
        .collect()
}

fn hol_cmd(h: &Hol, json: bool) -> Result<String> {
    match h {
        Hol::Restrict {
            table: t,
            codomain,
            i,
            j,
        } => {
            let values = table(t)?;
            let f = FunctionApproximation::new(values.len() as u32, *codomain, values)?;
            let r = f.restrict(*i, *j)?;
            Ok(if json {
                render(&json!({"domain": r.domain(), "codomain": r.codomain(), "table": r.table()}))
            } else {
                format!("{}->{}: {:?}\n", r.domain(), r.codomain(), r.table())
            })
        }
        Hol::Suitable { table: t, bound } => {
            let f = table(t)?;
            let set = SuitableIndexSet::above_maximum(&f, *bound);
            let report = check_suitable(&f, &set, *bound)?;
            let members: Vec<(u32, u32)> = set.members().collect();
            Ok(if json {
                render(&json!({"members": members, "report": report, "passed": report.passed()}))
            } else {
                format!(
                    "{} members, coherent: {}\n",
                    report.members,
                    report.passed()
                )
            })
        }
        Hol::Omega { n, m } => {
            let o = omega_stage(*n);
            let mut value = json!({"n": o.n, "elements": o.elements});
            if let Some(m) = m {
                value["m"] = json!(m);
                value["subset"] = json!(o.is_subset_of(&omega_stage(*m)));
                value["successorMap"] = json!(smap_omega(*n, *m));
            }
            Ok(if json {
                render(&value)
            } else {
                let mut out = format!("{n} = {:?}\n", o.elements);
                if let Some(m) = m {
                    let _ = writeln!(out, "{n} subset of {m}: {}", value["subset"]);
                    let _ = writeln!(out, "{n} -> {m}: {}", value["successorMap"]);
                }
                out
            })
        }
        Hol::Sqrt2 { k } => {
            let a = sqrt2_approximant(*k)?;
            let kids = differentiate(&a);
            Ok(if json {
                render(&json!({"approximant": a, "refinements": kids}))
            } else {
                let kids: Vec<String> = kids.iter().map(ToString::to_string).collect();
                format!("{a}\n  refinements: {}\n", kids.join(" "))
            })
        }
    }
}
