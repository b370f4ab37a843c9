use std::collections::HashMap;
use std::io::Write;
use std::process::{Command, Output};

use thermoform::catalog::{self, CatalogParams, KEYS};
use thermoform::io::export_system;

fn thermoform(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermoform"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn records(args: &[&str]) -> HashMap<String, String> {
    let mut full = args.to_vec();
    full.extend(["--format", "records"]);
    let out = thermoform(&full);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut map = HashMap::new();
    for line in text.lines() {
        let (k, v) = line.split_once('\t').expect("key<TAB>value");
        assert!(map.insert(k.to_string(), v.to_string()).is_none(), "duplicate key {k}");
    }
    map
}

fn num(map: &HashMap<String, String>, key: &str) -> f64 {
    map.get(key).unwrap_or_else(|| panic!("missing {key}")).parse().unwrap()
}

fn temp_system(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn trivial_weights_have_pressure_log_n() {
    for (weights, n) in [("1,1", 2.0f64), ("1,1,1", 3.0)] {
        let r = records(&["pressure", "--depth", "8", "--weights", weights]);
        assert!((num(&r, "upper") - n.ln()).abs() < 1e-12);
        assert!((num(&r, "lower") - n.ln()).abs() < 1e-12);
        assert!((num(&r, "point") - n.ln()).abs() < 1e-12);
        assert_eq!(r["upper.kind"], "certified-bound");
        assert_eq!(r["point.kind"], "point-estimate");
    }
}

#[test]
fn similarity_dimension_matches_closed_form() {
    let r = records(&["dimension", "--tol", "1e-6", "similarity(N=3, r=1/2, d=2)"]);
    let exact = 3f64.ln() / 2f64.ln();
    assert!((num(&r, "dimension.point") - exact).abs() <= 1e-6);
    assert!(num(&r, "dimension.lower") <= exact + 1e-9 && exact <= num(&r, "dimension.upper") + 1e-9);
}

#[test]
fn nottot_has_one_period_two_class() {
    let r = records(&["classes", "--cap", "64", "nottot"]);
    assert_eq!(r["classes"], "1");
    assert_eq!(r["class.1.size"], "4");
    assert_eq!(r["class.1.transitive"], "true");
    assert_eq!(r["class.1.period"], "2");
    assert_eq!(r["class.1.primitive"], "false");
    assert_eq!(r["search_complete"], "false");
    assert_eq!(r["factor.1.irreducibility"], "irreducible-certified");
}

#[test]
fn exports_survive_a_file_round_trip_byte_for_byte() {
    for key in KEYS {
        let out = thermoform(&["catalog", "export", key]);
        assert!(out.status.success());
        let exported = String::from_utf8(out.stdout).unwrap();
        let expected = export_system(&catalog::build(key, &CatalogParams::default()).unwrap().system);
        assert_eq!(exported, expected, "{key}");
        let file = temp_system(&exported);
        let again = thermoform(&["recode", "--blocks", "1", file.path().to_str().unwrap()]);
        assert!(again.status.success());
        assert_eq!(String::from_utf8(again.stdout).unwrap(), exported, "{key}");
    }
}

#[test]
fn tiny_entries_round_trip() {
    let text = "alphabet 2\nfactors 1\nfactor 1 dim 2 beta 1\nmatrix 1 1\n4e-6 0\n0 1\nmatrix 1 2\n0 1\n1 0\n";
    let file = temp_system(text);
    let out = thermoform(&["recode", "--blocks", "1", file.path().to_str().unwrap()]);
    let exported = String::from_utf8(out.stdout).unwrap();
    let file2 = temp_system(&exported);
    let out2 = thermoform(&["recode", "--blocks", "1", file2.path().to_str().unwrap()]);
    assert_eq!(String::from_utf8(out2.stdout).unwrap(), exported);
    assert!(exported.contains("4e-6"));
}

#[test]
fn recode_matches_the_library() {
    let out = thermoform(&["recode", "--blocks", "2", "nottot"]);
    let expected = export_system(&catalog::recode_system(&catalog::nottot_system(1.0, 1.0), 2).unwrap());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), expected);
}

#[test]
fn exit_codes_follow_the_error_kind() {
    assert_eq!(thermoform(&["pressure", "--weights", "1,1"]).status.code(), Some(0));

    let zero = temp_system("alphabet 2\nfactors 1\nfactor 1 dim 2 beta 1\nmatrix 1 1\n0 0\n0 0\nmatrix 1 2\n1 0\n0 1\n");
    let out = thermoform(&["pressure", zero.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("factor 1, generator 1"));

    let garbled = temp_system("alphabet 2\nfactors one\n");
    let out = thermoform(&["pressure", garbled.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    assert_eq!(thermoform(&["pressure", "no-such-entry"]).status.code(), Some(2));
    assert_eq!(thermoform(&["pressure", "--depth", "30", "nottot"]).status.code(), Some(3));
    assert_eq!(
        thermoform(&["pressure", "--depth", "12", "--max-terms", "1000", "nottot"]).status.code(),
        Some(3)
    );
    assert_eq!(thermoform(&["reduce", "--ell", "3,1", "nottot"]).status.code(), Some(2));
    assert_eq!(thermoform(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn records_reproduce_bit_for_bit() {
    for args in [
        &["pressure", "--seed", "5", "random(N=3, d=2, k=2)"][..],
        &["mixing", "nottot"][..],
        &["gibbs", "--depth", "6", "--split", "2,2,2", "--table", "nottot"][..],
        &["dimension", "--depth", "6", "similarity"][..],
    ] {
        let mut full = args.to_vec();
        full.extend(["--format", "records"]);
        let a = thermoform(&full);
        let b = thermoform(&full);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn thread_cap_does_not_change_results() {
    let args = ["pressure", "--depth", "10", "nottot", "--format", "records"];
    let default = thermoform(&args);
    for threads in ["0", "1", "3"] {
        let capped = Command::new(env!("CARGO_BIN_EXE_thermoform"))
            .args(args)
            .env("THERMOFORM_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(capped.stdout, default.stdout, "THERMOFORM_THREADS={threads}");
    }
    let bad = Command::new(env!("CARGO_BIN_EXE_thermoform"))
        .args(args)
        .env("THERMOFORM_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn every_numeric_result_is_labeled() {
    let labels = ["certified-bound", "point-estimate", "heuristic"];
    for args in [
        &["pressure", "nottot"][..],
        &["gibbs", "--diagnose", "nottot"][..],
        &["mixing", "--weights", "1,2"][..],
        &["proximal", "nottot"][..],
        &["classes", "nottot-recoded"][..],
    ] {
        let r = records(args);
        for (k, v) in &r {
            let unlabeled = k.starts_with("param.") || k.starts_with("appendix.") || k.starts_with("note.");
            let word = k == "word" || k.contains("witness");
            if unlabeled || word || k.ends_with(".kind") || v.parse::<f64>().is_err() {
                continue;
            }
            let kind = r.get(&format!("{k}.kind")).unwrap_or_else(|| panic!("{k} has no label"));
            assert!(labels.contains(&kind.as_str()));
        }
    }
}

#[test]
fn proximal_words() {
    assert_eq!(records(&["proximal", "--depth", "4", "nottot"])["word"], "1122");
    assert_eq!(records(&["proximal", "--depth", "4", "rotation"])["word"], "none");
}

#[test]
fn recoded_nottot_splits_into_primitive_classes() {
    let r = records(&["classes", "--dims", "1,1", "nottot-recoded"]);
    assert_eq!(r["classes"], "2");
    for c in 1..=2 {
        assert_eq!(r[&format!("class.{c}.primitive")], "true");
        assert_eq!(r[&format!("class.{c}.exponent")], "1");
    }
}

#[test]
fn rational_entries_are_noted() {
    let file = temp_system("alphabet 2\nfactors 1\nfactor 1 dim 1 beta 1\nmatrix 1 1\n1/3\nmatrix 1 2\n1/2\n");
    let r = records(&["pressure", "--depth", "4", file.path().to_str().unwrap()]);
    assert!(r.iter().any(|(k, v)| k.starts_with("note.") && v.contains("1/3")));
    assert!((num(&r, "point") - (1.0f64 / 3.0 + 0.5).ln()).abs() < 1e-12);
}

#[test]
fn text_reports_end_with_wall_time() {
    let out = thermoform(&["pressure", "--weights", "1,1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("command: pressure"));
    assert!(text.trim_end().lines().last().unwrap().starts_with("wall time:"));
    assert!(text.contains("[certified-bound]"));
}

#[test]
fn catalog_list_names_every_entry() {
    let r = records(&["catalog", "list"]);
    for key in KEYS {
        assert!(r.contains_key(&format!("{key}.alphabet")));
        assert!(r.contains_key(&format!("{key}.fact.1")));
    }
}

#[test]
fn nottot_mixture_weight_is_reported() {
    let r = records(&["gibbs", "--depth", "10", "--mixture", "nottot"]);
    assert_eq!(r["mixture.classes"], "2");
    let w = num(&r, "mixture.weight");
    assert!((0.0..=1.0).contains(&w));
    assert_eq!(r["mixture.weight.kind"], "point-estimate");
}

#[test]
fn seed_subspaces_from_the_file_join_the_search() {
    let (c, s) = (0.5, 3f64.sqrt() / 2.0);
    let base = format!(
        "alphabet 2\nfactors 1\nfactor 1 dim 2 beta 1\nmatrix 1 1\n{c} {}\n{s} {c}\nmatrix 1 2\n{} {}\n{s} {}\n",
        -s, -c, -s, -c
    );
    let plain = temp_system(&base);
    let seeded = temp_system(&format!("{base}seed-subspace 1 dim 1\n1 0.3\n"));
    let a = records(&["classes", plain.path().to_str().unwrap()]);
    let b = records(&["classes", seeded.path().to_str().unwrap()]);
    assert_eq!(a["classes"], "2");
    assert_eq!(b["classes"], "3");
    assert_eq!(b["class.3.size"], "3");
    assert_eq!(b["class.3.period"], "1");
    assert_eq!(b["class.3.primitive"], "true");
}
