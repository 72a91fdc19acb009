use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn toprank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toprank"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_str(&stdout(o)).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

const FOUR: &str = "x,y\n0.9,1\n0.7,-1\n0.3,1\n0.1,-1\n";

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let model = configs().join("model.toml");
    let model = model.to_str().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (path, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let o = toprank(&[
            "simulate",
            "--config",
            model,
            "--n",
            "200",
            "--seed",
            seed,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).starts_with("n = 200, n+ = "));
    }
    let (a, b, c) = (fs::read(a).unwrap(), fs::read(b).unwrap(), fs::read(c).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(String::from_utf8(a).unwrap().starts_with("x1,y\n"));
}

#[test]
fn simulate_to_stdout_keeps_the_summary_off_the_csv() {
    let model = configs().join("model.toml");
    let o = toprank(&["simulate", "--config", model.to_str().unwrap(), "--n", "3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 4);
    assert!(stderr(&o).contains("n = 3"));
}

#[test]
fn simulate_rejects_empty_samples_and_bad_models() {
    let dir = TempDir::new().unwrap();
    let model = configs().join("model.toml");
    let o = toprank(&["simulate", "--config", model.to_str().unwrap(), "--n", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let bad = write(&dir, "bad.toml", "[model]\nmarginal = \"uniform\"\neta = \"cubic\"\n");
    let o = toprank(&["simulate", "--config", &bad, "--n", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn simulate_constant_one_gives_only_positives() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "one.toml",
        "[model]\nmarginal = \"uniform\"\neta = \"constant(1)\"\n",
    );
    let out = dir.path().join("d.csv");
    let o = toprank(&[
        "simulate",
        "--config",
        &cfg,
        "--n",
        "50",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("n- = 0"));
    let text = fs::read_to_string(out).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",1")));
}

#[test]
fn eval_four_point_sample() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "four.csv", FOUR);
    let o = toprank(&["eval", &data, "--score", "x", "--u0", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&o);
    let f = |k: &str| r[k].as_f64().unwrap_or_else(|| panic!("{k}"));
    assert!((f("m_hat") - 7.0 / 24.0).abs() < 1e-12);
    assert_eq!(f("q_hat"), 0.3);
    assert_eq!(f("beta_hat"), 1.0);
    assert_eq!(f("alpha_hat"), 0.5);
    assert_eq!(f("auc_hat"), 0.75);
    assert_eq!(f("l_hat"), 0.25);
}

#[test]
fn eval_global_rate_matches_auc() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "four.csv", FOUR);
    let o = toprank(&["eval", &data, "--score", "x", "--u0", "global"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&o);
    assert_eq!(r["locauc_hat"], r["auc_hat"]);
}

#[test]
fn eval_with_a_scorer_file() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "four.csv", FOUR);
    let scorer = write(&dir, "s.json", r#"{"kind": "linear", "weights": [-1.0]}"#);
    let o = toprank(&["eval", &data, "--scorer", &scorer, "--u0", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(json(&o)["auc_hat"].as_f64().unwrap(), 0.25);
    let wide = write(&dir, "w.json", r#"{"kind": "linear", "weights": [1.0, 1.0]}"#);
    let o = toprank(&["eval", &data, "--scorer", &wide, "--u0", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("feature"));
}

#[test]
fn eval_is_invariant_under_increasing_maps_except_for_the_threshold() {
    let dir = TempDir::new().unwrap();
    let mapped: String = FOUR
        .lines()
        .map(|l| match l.split_once(',') {
            Some((x, y)) if x != "x" => format!("{},{y}\n", x.parse::<f64>().unwrap().powi(3) + 2.0),
            _ => format!("{l}\n"),
        })
        .collect();
    let a = json(&toprank(&[
        "eval",
        &write(&dir, "a.csv", FOUR),
        "--score",
        "x",
        "--u0",
        "0.5",
    ]));
    let b = json(&toprank(&[
        "eval",
        &write(&dir, "b.csv", &mapped),
        "--score",
        "x",
        "--u0",
        "0.5",
    ]));
    let (Value::Object(a), Value::Object(b)) = (a, b) else {
        panic!("reports are objects")
    };
    for (k, v) in &a {
        if k != "q_hat" {
            assert_eq!(v, &b[k], "{k}");
        }
    }
    assert_eq!(b["q_hat"].as_f64().unwrap(), 0.3f64.powi(3) + 2.0);
}

#[test]
fn eval_input_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let single = write(&dir, "single.csv", "x,y\n0.1,1\n0.2,1\n");
    let o = toprank(&["eval", &single, "--score", "x", "--u0", "0.5"]);
    assert_eq!(o.status.code(), Some(2));

    let tied = write(&dir, "tied.csv", "x,y\n0.5,1\n0.5,-1\n0.2,1\n0.1,-1\n");
    let o = toprank(&["eval", &tied, "--score", "x", "--u0", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("t_wilcoxon") && stderr(&o).contains("ties"),
        "{}",
        stderr(&o)
    );
    let o = toprank(&["eval", &tied, "--score", "x", "--u0", "0.5", "--no-rank-stats"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let data = write(&dir, "four.csv", FOUR);
    let o = toprank(&["eval", &data, "--score", "z", "--u0", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = toprank(&["eval", &data, "--score", "x", "--u0", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn roc_grid_and_orientation() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "four.csv", FOUR);
    let o = toprank(&["roc", &data, "--score", "x", "--grid", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(rows[0], "u,alpha,beta,d_beta");
    assert_eq!(rows.len(), 2);

    let reversed = write(&dir, "r.json", r#"{"kind": "linear", "weights": [-1.0]}"#);
    let out = dir.path().join("roc.csv");
    let o = toprank(&[
        "roc",
        &data,
        "--scorer",
        &reversed,
        "--grid",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out).unwrap();
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[1] >= v[2], "{line}");
        // the mass line through (alpha, d_beta) has rate u; here p_hat = 1/2
        assert!((0.5 * v[3] + 0.5 * v[1] - v[0]).abs() < 1e-12, "{line}");
    }
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn erm_selects_the_better_member() {
    let dir = TempDir::new().unwrap();
    let model = configs().join("model.toml");
    let data = dir.path().join("d.csv");
    let o = toprank(&[
        "simulate",
        "--config",
        model.to_str().unwrap(),
        "--n",
        "2000",
        "--seed",
        "3",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let problem = write(
        &dir,
        "p.toml",
        "criterion = \"L_HAT\"\nu0 = 0.2\nbudget = 2\n\n[family]\nkind = \"finite\"\n\n\
         [[family.members]]\nkind = \"linear\"\nweights = [-1.0]\n\n\
         [[family.members]]\nkind = \"linear\"\nweights = [1.0]\n",
    );
    let out = dir.path().join("r.json");
    let o = toprank(&[
        "erm",
        data.to_str().unwrap(),
        "--problem",
        &problem,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(r["model"]["index"], 1);
    assert_eq!(r["evaluations"], 2);
}

fn study(kind: &str, config: &str, out: &Path, workers: &str) -> Output {
    toprank(&["--workers", workers, kind, config, "--out-dir", out.to_str().unwrap()])
}

#[test]
fn identity_suite_config_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("identities.toml");
    let o = study("identities", cfg.to_str().unwrap(), dir.path(), "4");
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(!stdout(&o).contains("[FAIL]"));
    assert!(dir.path().join("identities.csv").exists());
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("identities.json")).unwrap()).unwrap();
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

const SMALL_RATES: &str = r#"
[model]
marginal = "uniform"
eta = "linear"

[family]
kind = "zigzag"
center = 0.8
delta_min = 0.05
delta_max = 0.15
count = 3
mirrored = false

[criterion]
name = "L_HAT"
u0 = 0.2

[grid]
n = [200, 400]
reps = 1
seed = 5
"#;

#[test]
fn single_replication_studies_warn_but_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "small.toml", SMALL_RATES);
    let o = study("rates", &cfg, dir.path(), "2");
    assert!(matches!(o.status.code(), Some(0) | Some(1)), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    assert!(dir.path().join("small.csv").exists());
}

#[test]
fn studies_do_not_depend_on_the_worker_count() {
    let cfg_text = SMALL_RATES.replace("reps = 1", "reps = 20");
    let decomp_text = "v = 0.8\n\n[model]\nmarginal = \"uniform\"\neta = \"linear\"\n\n\
                       [grid]\nn = [100, 200, 400]\nreps = 50\nseed = 9\n";
    for (kind, text) in [("rates", cfg_text.as_str()), ("decomp", decomp_text)] {
        let dir = TempDir::new().unwrap();
        let cfg = write(&dir, "s.toml", text);
        let one = dir.path().join("one");
        let four = dir.path().join("four");
        let a = study(kind, &cfg, &one, "1");
        let b = study(kind, &cfg, &four, "4");
        assert!(a.status.code().is_some_and(|c| c < 2), "{}", stderr(&a));
        assert_eq!(a.status.code(), b.status.code());
        for file in ["s.csv", "s.json"] {
            assert_eq!(
                fs::read(one.join(file)).unwrap(),
                fs::read(four.join(file)).unwrap(),
                "{kind} {file}"
            );
        }
    }
}

#[test]
fn seed_override_changes_the_study() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "s.toml", &SMALL_RATES.replace("reps = 1", "reps = 5"));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    study("rates", &cfg, &a, "2");
    toprank(&["rates", &cfg, "--out-dir", b.to_str().unwrap(), "--seed", "6"]);
    assert_ne!(fs::read(a.join("s.csv")).unwrap(), fs::read(b.join("s.csv")).unwrap());
}

#[test]
fn bad_study_configs_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "s.toml", &SMALL_RATES.replace("n = [200, 400]", "n = [400, 200]"));
    let o = study("rates", &cfg, dir.path(), "1");
    assert_eq!(o.status.code(), Some(2));
    let cfg = write(&dir, "t.toml", &format!("{SMALL_RATES}\nunknown = 1\n"));
    let o = study("rates", &cfg, dir.path(), "1");
    assert_eq!(o.status.code(), Some(2));
    let o = study("decomp", "/nonexistent.toml", dir.path(), "1");
    assert_eq!(o.status.code(), Some(2));
}
