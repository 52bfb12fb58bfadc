mod support {
    pub mod jdl_oracle;
}

use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;
use support::jdl_oracle::{agrees, reference, Gen};
use worldgrid_core::jdl::{
    evaluate, parse_expr, parse_file, parse_jdl, requirement_satisfied, Env, Expr, Value,
};

fn corpus() -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/jdl");
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "jdl"))
        .collect();
    files.sort();
    assert!(files.len() >= 5, "fixture corpus missing from {}", dir.display());
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect()
}

#[test]
fn corpus_round_trips_to_a_fixpoint() {
    for (name, text) in corpus() {
        let file = parse_file(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let printed = file.to_string();
        let again = parse_file(&printed).unwrap_or_else(|e| panic!("{name} reprint: {e}\n{printed}"));
        assert_eq!(file, again, "{name}");
        assert_eq!(printed, again.to_string(), "{name}");
        let d = parse_jdl(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(parse_jdl(&d.to_file().to_string()).unwrap(), d, "{name}");
    }
}

#[test]
fn fixture_details() {
    let c: std::collections::BTreeMap<_, _> = corpus().into_iter().collect();
    let cmsim = parse_jdl(&c["cmsim_demo_22.jdl"]).unwrap();
    assert_eq!(cmsim.input_data[0].as_str(), "demo_22.ntpl");
    assert_eq!(cmsim.extra_str("OutputSE").as_deref(), Some("se_padova"));
    let lit = parse_jdl(&c["literals.jdl"]).unwrap();
    assert_eq!(lit.job_seed, -7);
    assert_eq!(lit.job_profile, "cmkin");
    assert_eq!(lit.arguments, ["--quote", "\"x\"", "--tab", "here"]);
    assert_eq!(evaluate(&lit.requirements, &Env::new()), Value::Bool(true));
}

#[test]
fn evaluator_matches_reference_on_10k_expressions() {
    let mut g = Gen::new(0x5eed);
    let mut undefined = 0;
    for i in 0..10_000 {
        let e = g.expr(5);
        assert!(e.is_closed());
        let want = reference(&e);
        let got = evaluate(&e, &Env::new());
        assert!(agrees(&got, &want), "#{i}: {e} gave {got}, reference {want:?}");
        let reparsed = parse_expr(&e.to_string()).unwrap();
        assert!(agrees(&evaluate(&reparsed, &Env::new()), &want), "#{i}: reprint of {e}");
        undefined += usize::from(got.is_undefined());
    }
    assert!(undefined > 500, "generator should hit UNDEFINED often, got {undefined}");
}

fn ce_env(tags: &[&str], ett: f64) -> Env {
    Env::new()
        .with("RunTimeEnvironment", Value::list(tags.iter().copied()))
        .with("EstimatedTraversalTime", Value::Num(ett))
        .with("LRMSType", Value::Str("PBS".into()))
}

const TAGS: [&str; 5] = ["ATLAS-3.2.1", "CMS", "CMS-1.2", "LHCb", "ALICE"];

fn tags() -> impl Strategy<Value = Vec<&'static str>> {
    proptest::sample::subsequence(TAGS.to_vec(), 0..=TAGS.len())
}

proptest! {
    #[test]
    fn member_conjunct_only_narrows(
        ces in proptest::collection::vec((tags(), 0.0f64..10_000.0), 1..20),
        base in 0usize..3,
        tag in 0usize..TAGS.len(),
    ) {
        let base = [
            parse_expr("true").unwrap(),
            parse_expr("other.EstimatedTraversalTime < 5000").unwrap(),
            parse_expr(r#"other.LRMSType == "PBS" || other.Missing"#).unwrap(),
        ][base]
            .clone();
        let narrowed = base
            .clone()
            .and(Expr::member(Expr::str(TAGS[tag]), Expr::attr("RunTimeEnvironment")));
        for (t, ett) in &ces {
            let env = ce_env(t, *ett);
            if requirement_satisfied(&narrowed, &env) {
                prop_assert!(requirement_satisfied(&base, &env));
                prop_assert!(t.contains(&TAGS[tag]));
            }
        }
    }
}
