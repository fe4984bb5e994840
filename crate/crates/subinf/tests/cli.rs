use std::path::Path;
use std::process::{Command, Output};

use subinf::acceptance::{a2_with, Knobs};
use subinf::config::{Overrides, ProblemConfig};
use subinf::Failure;
use subinf_core::fields::horizontal_hessian;
use subinf_core::ScalarField;

fn subinf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subinf"))
        .args(args)
        .env("SUBINF_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn solve_line(out: &Path, boundary: &str) -> Output {
    subinf(&[
        "solve",
        "--geometry",
        "euclidean:1",
        "--box",
        "0:1",
        "--h",
        "0.0625",
        "--boundary",
        boundary,
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn solve_writes_field_and_reproducible_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = solve_line(out, "linear:0,1");
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("converged true"));
    }
    let ma = std::fs::read_to_string(a.join("manifest.toml")).unwrap();
    let mb = std::fs::read_to_string(b.join("manifest.toml")).unwrap();
    assert_eq!(ma, mb);
    let manifest: toml::Table = ma.parse().unwrap();
    assert_eq!(manifest["problem"]["geometry"].as_str(), Some("euclidean:1"));
    assert!(manifest["result"]["max_error"].as_float().unwrap() <= 1e-6);
    let fa = std::fs::read(a.join("solution.field")).unwrap();
    assert_eq!(fa, std::fs::read(b.join("solution.field")).unwrap());
}

#[test]
fn comparison_of_shifted_solutions_has_zero_margin() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(solve_line(&a, "linear:0,1").status.success());
    assert!(solve_line(&b, "linear:0.1,1").status.success());
    let o = subinf(&[
        "verify",
        "comparison",
        "--input",
        a.join("solution.field").to_str().unwrap(),
        "--other",
        b.join("solution.field").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let margin: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("margin "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(margin.abs() <= 1e-12, "{text}");
    assert!(text.ends_with("status pass\n"));
}

#[test]
fn malformed_geometry_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[problem]\ngeometry = \"heisenberg7\"\nh = 0.25\nboundary = \"constant:0\"\n").unwrap();
    let o = subinf(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("geometry") && err.contains("line 2"), "{err}");
}

#[test]
fn config_errors_carry_lines() {
    let src = "[problem]\ngeometry = \"euclidean:2\"\nlower = [0.0]\nh = 0.25\nboundary = \"constant:0\"\n";
    let e = ProblemConfig::parse(src, Path::new("."), &Overrides::default()).unwrap_err();
    assert!(matches!(&e, Failure::Config(m) if m.contains("line 3") && m.contains("lower")), "{e}");

    let e = ProblemConfig::parse("[problem]\nbogus = 1\n", Path::new("."), &Overrides::default()).unwrap_err();
    assert!(matches!(&e, Failure::Config(m) if m.contains("line 2")), "{e}");

    let src = "[problem]\ngeometry = \"euclidean:1\"\nh = 0.25\nboundary = \"constant:0\"\n[solver]\nk_max = 2\n";
    let e = ProblemConfig::parse(src, Path::new("."), &Overrides::default()).unwrap_err();
    assert!(matches!(&e, Failure::Config(m) if m.contains("line 6") && m.contains("k_max")), "{e}");
}

#[test]
fn overrides_win_over_the_file() {
    let src = "[problem]\ngeometry = \"euclidean:1\"\nh = 0.25\nboundary = \"constant:0\"\n";
    let o = Overrides {
        h: Some(0.125),
        ..Overrides::default()
    };
    let c = ProblemConfig::parse(src, Path::new("."), &o).unwrap();
    assert_eq!(c.domain.h(), 0.125);
    let round = ProblemConfig::parse(&c.to_toml(), Path::new("."), &Overrides::default()).unwrap();
    assert_eq!(round.to_toml(), c.to_toml());
}

#[test]
fn empty_acceptance_directory_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = subinf(&["acceptance", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_subinf"))
        .args(["acceptance", "/nonexistent"])
        .env("SUBINF_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_criterion_file_prints_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("a8.toml");
    std::fs::write(&f, "[criterion]\nid = \"A8\"\nsamples = 5\n").unwrap();
    let o = subinf(&["acceptance", f.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("A8  PASS"), "{text}");

    std::fs::write(&f, "[criterion]\nid = \"A8\"\nsamplez = 5\n").unwrap();
    let o = subinf(&["acceptance", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

/// `⟨D²u Du, Du⟩` with a first-order forward-difference gradient.
fn forward_difference_laplacian(u: &ScalarField) -> ScalarField {
    let d = u.domain();
    let hess = horizontal_hessian(u);
    let v = u.values();
    let values = (0..d.len())
        .map(|i| {
            if !d.interior_nodes().contains(&i) {
                return 0.0;
            }
            let p: Vec<f64> = (0..d.dim())
                .map(|a| (v[d.neighbor(i, a, 1).unwrap()] - v[i]) / d.h())
                .collect();
            hess.matrix(i).quadratic_form(&p)
        })
        .collect();
    ScalarField::from_values(d.clone(), values).unwrap()
}

#[test]
fn first_order_gradient_fails_the_refinement_criterion() {
    let knobs = Knobs {
        id: "A2".into(),
        ..Knobs::default()
    };
    let good = a2_with(&knobs, &subinf_core::fields::infinity_laplacian).unwrap();
    assert!(good.iter().all(|c| c.passed()), "{good:?}");
    let bad = a2_with(&knobs, &forward_difference_laplacian).unwrap();
    let ratio = &bad[0];
    assert!(!ratio.passed(), "{ratio:?}");
}

#[test]
fn distance_between_two_points() {
    let o = subinf(&[
        "distance", "--geometry", "euclidean:2", "--box", "0,0:1,1", "--h", "0.125", "--from", "0,0", "--to", "1,0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let d: f64 = stdout(&o).trim().parse().unwrap();
    assert!((d - 1.0).abs() <= 1e-12);
}

#[test]
fn gap_table_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p.toml");
    std::fs::write(&cfg, "[problem]\ngeometry = \"euclidean:1\"\nh = 0.03125\nboundary = \"constant:0\"\n").unwrap();
    let o = subinf(&["table", "gap", "--config", cfg.to_str().unwrap(), "--values", "0.2,0.1,0.05"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let gaps: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(gaps.len(), 3);
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn subelliptic_check_passes_for_the_infinity_laplacian() {
    let o = subinf(&["verify", "subelliptic", "--geometry", "heisenberg1", "--samples", "500", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).ends_with("status pass\n"));
}

#[test]
fn convolve_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    assert!(solve_line(&a, "linear:0,1").status.success());
    let out = dir.path().join("c");
    let o = subinf(&[
        "convolve",
        "--input",
        a.join("solution.field").to_str().unwrap(),
        "--eps",
        "0.05",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["convolved.field", "argmax.dat", "manifest.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn checks_reject_nan_and_render_one_line() {
    use subinf::acceptance::{Check, Cmp, CriterionReport};
    assert!(!Check::new("x", f64::NAN, Cmp::Le, 1.0).passed());
    assert!(!Check::new("x", f64::NAN, Cmp::Ge, 1.0).passed());
    assert!(Check::new("x", 1.0, Cmp::Le, 1.0).passed());
    assert!(!Check::new("x", 1.0, Cmp::Lt, 1.0).passed());
    let r = CriterionReport {
        id: "A1".into(),
        title: "t",
        checks: vec![Check::new("a", 1.0, Cmp::Le, 2.0), Check::new("b", 3.0, Cmp::Le, 2.0)],
        seconds: 0.0,
    };
    assert!(!r.passed());
    let line = r.line();
    assert!(line.starts_with("A1  FAIL") && !line.contains('\n'), "{line}");
    let empty = CriterionReport { checks: vec![], ..r };
    assert!(!empty.passed());
}
