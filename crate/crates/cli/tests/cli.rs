use std::process::{Command, Output};

use copulab::mixing::beta_coeff_on;
use copulab::CopulaModel;

fn copulab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_copulab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Data lines of a CSV with `#` comments, header dropped.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn coeffs_of_fgm() {
    let o = copulab(&["coeffs", "--copula", r#"{"type":"fgm","theta":0.9}"#]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("# copulab "));
    let rho = rows(&text)
        .into_iter()
        .find(|r| r[0] == "spearman_rho")
        .expect("spearman row");
    assert!((rho[1].parse::<f64>().unwrap() - 0.3).abs() < 1e-9);
    assert_eq!(rho.len(), 5);
}

#[test]
fn mixing_tilde_predictions() {
    let o = copulab(&[
        "mixing",
        "--copula",
        r#"{"type":"frank","lambda":3}"#,
        "--perturb",
        "tilde:0.5",
        "--n-max",
        "4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("n,beta,phi,psi,predicted_beta\n"));
    let table = rows(&text);
    assert_eq!(table.len(), 4);
    let b1 = beta_coeff_on(&CopulaModel::frank(3.0).unwrap(), 128).unwrap();
    let pred1: f64 = table[0][4].parse().unwrap();
    assert!((pred1 - 0.5 * b1).abs() < 1e-12);
    for r in &table {
        let beta: f64 = r[1].parse().unwrap();
        let pred: f64 = r[4].parse().unwrap();
        assert!((beta - pred).abs() < 1e-9, "{r:?}");
    }
}

#[test]
fn mixing_hat_writes_inf() {
    let o = copulab(&["mixing", "--copula", r#"{"type":"pi"}"#, "--perturb", "hat:0.5", "--n-max", "2", "--grid", "16"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(rows(&stdout(&o)).iter().all(|r| r[3] == "inf"));
}

#[test]
fn c5_regions_have_two_zero_corners() {
    let o = copulab(&["regions", "--noise", "c5-m-uniform", "--resolution", "128"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let grid: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(grid.len(), 128);
    assert!(grid.iter().all(|r| r.len() == 128));
    // row = current state, column = next state
    assert_eq!(grid[0][127], "0");
    assert_eq!(grid[127][0], "0");
    assert_eq!(grid[0][0], "1");
    assert_eq!(grid[127][127], "1");
    assert_eq!(grid[64][64], "1");
}

#[test]
fn regions_plot_script() {
    let dir = std::env::temp_dir().join(format!("copulab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let data = dir.join("c6.csv");
    let script = dir.join("c6.gp");
    let o = copulab(&[
        "regions",
        "--noise",
        "c6-indep-uniform",
        "--resolution",
        "32",
        "--two-step",
        "--out",
        data.to_str().unwrap(),
        "--plot",
        script.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&data).unwrap();
    assert!(!csv.lines().filter(|l| !l.starts_with('#')).any(|l| l.contains('0')));
    let gp = std::fs::read_to_string(&script).unwrap();
    assert!(gp.contains("with image"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn simulate_is_deterministic() {
    let args = ["simulate", "--copula", r#"{"type":"frank","lambda":2}"#, "--len", "500", "--seed", "9"];
    let a = copulab(&args);
    let b = copulab(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("# seed: 9\n# model: Frank(2)\n# generator: ChaCha8"));
    assert_eq!(rows(&text).len(), 500);
}

#[test]
fn malformed_specs_exit_1_naming_the_field() {
    for (args, field) in [
        (vec!["coeffs", "--copula", r#"{"type":"frank"}"#], "copula.lambda"),
        (vec!["coeffs", "--copula", r#"{"type":"fgm","theta":3}"#], "copula.theta"),
        (
            vec!["coeffs", "--copula", r#"{"type":"mixture","weights":[0.5,0.5],"components":[{"type":"pi"},{"type":"zz"}]}"#],
            "copula.components[1].type",
        ),
        (vec!["coeffs", "--copula", r#"{"type":"pi"}"#, "--perturb", "tilde:2"], "perturb"),
        (vec!["noise-eval", "--noise", "c5", "--marginals", "uniform:0,1,cauchy:0,1,uniform:0,1"], "marginals"),
        (vec!["noise-eval", "--noise", "c9"], "noise"),
        (vec!["mixing", "--copula", r#"{"type":"pi"}"#, "--grid", "8"], "grid"),
    ] {
        let o = copulab(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains(&format!("`{field}`")), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn invalid_density_exits_2() {
    let o = copulab(&[
        "validate",
        "--copula",
        r#"{"type":"m-density","variant":1,"h":"poly:[0,5]","g":"poly:[-1,2]"}"#,
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn validate_passes_for_perturbations() {
    for p in ["tilde:0.3", "hat:0.6", "mesiar:0.8", "dolati"] {
        let o = copulab(&["validate", "--copula", r#"{"type":"frank","lambda":-4}"#, "--perturb", p]);
        assert!(o.status.success(), "{p}: {}", stderr(&o));
        assert!(rows(&stdout(&o)).iter().all(|r| r[4] == "true"));
    }
}

#[test]
fn noise_eval_grid() {
    let o = copulab(&["noise-eval", "--noise", "c6-indep-uniform", "--grid", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = rows(&stdout(&o));
    assert_eq!(table.len(), 25);
    let last = table.last().unwrap();
    assert_eq!(last, &["1", "1", "1"]);
    let o = copulab(&[
        "noise-eval",
        "--noise",
        "c7",
        "--copula",
        r#"{"type":"pi"}"#,
        "--marginals",
        "uniform:0,1,uniform:0,1,normal:0,1,normal:0,1",
        "--grid",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mid: f64 = rows(&stdout(&o))[4][2].parse().unwrap();
    assert!((mid - 0.25).abs() < 1e-8, "{mid}");
}

#[test]
fn perturb_eval_identities() {
    let o = copulab(&["perturb-eval", "--copula", r#"{"type":"fgm","theta":0.6}"#, "--perturb", "hat:0.3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = rows(&stdout(&o));
    assert_eq!(table.len(), 5);
    assert!(table.iter().all(|r| r[1] == "hat" && r[4].parse::<f64>().unwrap() < 1e-6));
}
