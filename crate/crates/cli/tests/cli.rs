use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use rwre_core::curve::Measure;
use rwre_core::envmodel::specfile::read_spec;
use rwre_core::envmodel::{SampledField, SiteField};
use rwre_core::experiment::{self, exit, ExperimentRecipe, Params, RecipeKind};

fn specs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

fn lab(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_rwre-lab")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn same_artifacts(a: &Path, b: &Path) {
    let ma = experiment::verify_run(a).unwrap();
    let mb = experiment::verify_run(b).unwrap();
    assert_eq!(ma.hash, mb.hash);
    assert_eq!(ma.files, mb.files);
    for f in &ma.files {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn cli_and_library_produce_identical_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = specs().join("symmetric.spec");
    let s = spec.to_str().unwrap();

    let cli = tmp.path().join("cli-mc");
    let (code, _) = lab(&[
        "mc-tail", "--spec", s, "--seed", "4", "--n-max", "500", "--walkers", "4000", "--measure", "mixed-theta",
        "--workers", "3", "--out", cli.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let lib = experiment::run(&ExperimentRecipe {
        kind: RecipeKind::McTail,
        spec: Some(spec.clone()),
        params: Params {
            seed: 4,
            n_max: Some(500),
            walkers: Some(4000),
            measure: Some(Measure::MixedTheta),
            ..Params::default()
        },
        out: tmp.path().join("lib-mc"),
        workers: Some(1),
    })
    .unwrap();
    same_artifacts(&cli, &lib.dir);

    let cli = tmp.path().join("cli-exp");
    assert_eq!(lab(&["exponents", "--spec", s, "--out", cli.to_str().unwrap()]).0, 0);
    let lib = experiment::run(&ExperimentRecipe {
        kind: RecipeKind::Exponents,
        spec: Some(spec),
        params: Params::default(),
        out: tmp.path().join("lib-exp"),
        workers: None,
    })
    .unwrap();
    same_artifacts(&cli, &lib.dir);
    let json = std::fs::read_to_string(cli.join("exponents.json")).unwrap();
    assert!(json.contains("\"exponent_annealed\": 3.7999"));
}

#[test]
fn exact_tail_first_row_is_the_one_step_formula() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = specs().join("symmetric.spec");
    let out = tmp.path().join("tail");
    let (code, _) = lab(&[
        "exact-tail", "--spec", spec.to_str().unwrap(), "--n-max", "1", "--measure", "annealed", "--envs", "50",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(out.join("curve.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    // Averaged over environments the first step is killed with probability r·p = 1/4.
    let estimate: f64 = row[2].parse().unwrap();
    assert_eq!(row[1], "1");
    assert!((estimate - 0.75).abs() < 0.15, "{estimate}");
    let quenched = tmp.path().join("q");
    let (code, _) = lab(&[
        "exact-tail", "--spec", spec.to_str().unwrap(), "--n-max", "1", "--seed", "8", "--out",
        quenched.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(quenched.join("bracket.csv")).unwrap();
    let value: f64 = csv.lines().nth(2).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    let field = SampledField::new(Arc::new(read_spec(&spec).unwrap()), 8);
    let up = field.omega_plus(0);
    let kept = |x: i64| if field.obstacle_1d(x) { 0.5 } else { 1.0 };
    assert!((value - (up * kept(1) + (1.0 - up) * kept(-1))).abs() < 1e-15);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let t = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();
    let bad = t("bad.spec");
    std::fs::write(&bad, "format_version = 1\nd = 1\np = half\n").unwrap();
    assert_eq!(lab(&["exponents", "--spec", &bad, "--out", &t("a")]).0, exit::PARSE);
    let drift = t("drift.spec");
    std::fs::write(
        &drift,
        "format_version = 1\nd = 1\np = 0.5\nr = 0.5\neps0 = 0.05\nindependence = true\n0.5 : 0.6 0.4\n0.5 : 0.7 0.3\n",
    )
    .unwrap();
    assert_eq!(lab(&["validate", "--spec", &drift, "--out", &t("v")]).0, exit::VALIDATION);
    let spec = specs().join("symmetric.spec");
    let s = spec.to_str().unwrap();
    assert_eq!(lab(&["exponents", "--spec", s, "--out", &t("v")]).0, exit::REFUSED);
    let (code, _) = lab(&[
        "trap-frequency", "--spec", s, "--depth", "3", "--b1", "5", "--b2", "5", "--n-max", "1000", "--envs", "10",
        "--out", &t("tf"),
    ]);
    assert_eq!(code, exit::VALIDATION);
    assert_eq!(lab(&["no-such-command"]).0, exit::PARSE);

    assert_eq!(lab(&["exact-tail", "--spec", s, "--n-max", "3000", "--gap-tol", "1e-3", "--out", &t("q")]).0, 0);
    let fit = |theory: &str, tol: &str, name: &str| {
        lab(&[
            "fit", "--input", &t("q"), "--n-lo", "100", "--n-hi", "3000", "--theory", theory, "--tolerance", tol,
            "--out", &t(name),
        ])
        .0
    };
    assert_eq!(fit("5", "0.01", "f1"), exit::FAIL);
    assert_eq!(fit("0.5", "100", "f2"), exit::OK);
    let few = lab(&["fit", "--input", &t("q"), "--n-lo", "2000", "--n-hi", "3000", "--theory", "0.5", "--out", &t("f3")]);
    assert_eq!(few.0, exit::INCONCLUSIVE);

    assert_eq!(lab(&["report", "--out", &t("r"), &t("q"), &t("f1")]).0, exit::FAIL);
    let report = std::fs::read_to_string(tmp.path().join("r/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 4);
    assert_eq!(lab(&["rerun", &t("q"), "--out", &t("q2")]).0, 0);
    same_artifacts(&tmp.path().join("q"), &tmp.path().join("q2"));
}
