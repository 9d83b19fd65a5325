use std::path::PathBuf;
use std::process::{Command, Output};

fn theory(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../theories");
    root.join(name).display().to_string()
}

fn ualg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ualg")).args(args).env_remove("UALG_WORKERS").output().expect("ualg runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn cartesian_context_governs_a_word_with_repeats() {
    let out = ualg(&["ctx", "rel", "--structure", "cartesian", "x y z", "y x y x x"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "true");
}

#[test]
fn bijective_context_governs_a_permutation_only() {
    let yes = ualg(&["ctx", "rel", "--structure", "bijective", "x y z", "y z x"]);
    assert_eq!(stdout(&yes).trim(), "true");
    let no = ualg(&["ctx", "rel", "--structure", "bijective", "x y z", "y z"]);
    assert_eq!(stdout(&no).trim(), "false");
}

#[test]
fn left_surjective_terminal_context_keeps_first_occurrences() {
    let out = ualg(&["ctx", "terminal", "--structure", "left-surjective", "x y x"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "x y");
}

#[test]
fn injective_word_with_repeats_has_no_terminal_context() {
    let out = ualg(&["ctx", "terminal", "--structure", "injective", "x y x"]);
    assert_eq!(stdout(&out).trim(), "none");
}

#[test]
fn sorted_letters_are_accepted() {
    let out = ualg(&["ctx", "rel", "--structure", "surjective", "x:A y:B", "y:B x:A y:B"]);
    assert_eq!(stdout(&out).trim(), "true");
}

#[test]
fn delta_check_separates_families_from_the_negative_control() {
    let good = ualg(&["delta", "check", "--family", "bijections", "--max", "4"]);
    assert_eq!(code(&good), 0, "{}", stdout(&good));
    assert!(stdout(&good).starts_with("pass"));
    let bad = ualg(&["delta", "check", "--family", "increasing", "--max", "3"]);
    assert_eq!(code(&bad), 2);
    assert!(stdout(&bad).contains("similarity"));
}

#[test]
fn eckmann_hilton_commutativity_is_proved() {
    let eh = theory("eckmann_hilton.ua");
    let out = ualg(&["prove", &eh, "--goal", "m(x, y) ~ m(y, x) ctx [ x:M y:M ]"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("proved m(x, y) ~ m(y, x)"));
    assert!(text.contains("axiom interchange"));
}

#[test]
fn monoid_commutativity_is_not_proved() {
    let monoid = theory("monoid.ua");
    let out = ualg(&["prove", &monoid, "--goal", "mul(x, y) ~ mul(y, x) ctx [ x:M y:M ]", "--depth", "2"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).starts_with("inconclusive"));
}

#[test]
fn injective_projection_is_refuted_by_invariant() {
    let proj = theory("projection.ua");
    let out = ualg(&["prove", &proj, "--structure", "injective", "--goal", "f(x, y) ~ f(y, x) ctx [ x:M y:M ]"]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout(&out).trim(), "refuted-by-invariant");
}

#[test]
fn noncommutative_monoid_is_found() {
    let monoid = theory("monoid.ua");
    let out = ualg(&["countermodel", &monoid, "--goal", "mul(x, y) ~ mul(y, x) ctx [ x:M y:M ]"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("table mul"));
}

#[test]
fn eckmann_hilton_has_no_noncommutative_model() {
    let eh = theory("eckmann_hilton.ua");
    let out = ualg(&["countermodel", &eh, "--goal", "m(x, y) ~ m(y, x) ctx [ x:M y:M ]", "--max-size", "2"]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout(&out).trim(), "none");
}

#[test]
fn injective_projection_keeps_classes_apart() {
    let proj = theory("projection.ua");
    let out = ualg(&["universal", &proj, "--structure", "injective", "--hom", "M M -> M"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let classes: usize = text.split_whitespace().nth(5).and_then(|n| n.parse().ok()).expect("class count");
    assert!(classes >= 2, "{text}");
}

#[test]
fn universal_goal_reports_whether_sides_merge() {
    let eh = theory("eckmann_hilton.ua");
    let merged = ualg(&["universal", &eh, "--hom", "M M -> M", "--goal", "m(x, y) ~ m(y, x) ctx [ x:M y:M ]"]);
    assert_eq!(code(&merged), 0);
    assert!(stdout(&merged).contains("goal sides merged: true"));
    let monoid = theory("monoid.ua");
    let apart = ualg(&["universal", &monoid, "--hom", "M M -> M", "--goal", "mul(x, y) ~ mul(y, x) ctx [ x:M y:M ]"]);
    assert_eq!(code(&apart), 1);
    assert!(stdout(&apart).contains("goal sides merged: false"));
}

#[test]
fn json_format_emits_one_record_per_line() {
    let monoid = theory("monoid.ua");
    let out = ualg(&["--format", "json", "countermodel", &monoid, "--max-size", "2"]);
    for line in stdout(&out).lines() {
        let record: serde_json::Value = serde_json::from_str(line).expect("json record");
        assert!(record["model"]["tables"]["mul"].is_array());
    }
}

#[test]
fn errors_exit_with_three() {
    assert_eq!(code(&ualg(&["prove", "no-such-file.ua", "--goal", "x ~ x ctx [ x:M ]"])), 3);
    let monoid = theory("monoid.ua");
    assert_eq!(code(&ualg(&["prove", &monoid, "--goal", "mul(x ~ x ctx [ x:M ]"])), 3);
    assert_eq!(code(&ualg(&["delta", "check", "--family", "nonsense"])), 3);
    assert_eq!(code(&ualg(&["ctx", "rel", "--structure", "cartesian", "x x", "x"])), 3);
    assert_eq!(code(&ualg(&["selftest", "--only", "12"])), 3);
    assert_eq!(code(&ualg(&["no-such-command"])), 3);
    assert_eq!(code(&ualg(&["--workers", "0", "selftest", "--only", "1"])), 3);
}

#[test]
fn axioms_outside_an_overridden_structure_are_rejected() {
    let proj = theory("projection.ua");
    let out = ualg(&["prove", &proj, "--structure", "surjective", "--goal", "f(x, y) ~ x ctx [ x:M y:M ]"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(code(&ualg(&["--help"])), 0);
}
