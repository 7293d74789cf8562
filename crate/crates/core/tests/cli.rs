use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn example(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(name)
        .display()
        .to_string()
}

fn df_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_df-lab"))
        .args(args)
        .env_remove("DF_LAB_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn without_clock(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_clock_seconds");
    v
}

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn file(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

#[test]
fn bounds_prints_the_value() {
    let out = df_lab(&["bounds", "--K", "0.0833333", "--S", "0"]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.0");
    let out = df_lab(&["bounds", "--S", "0.5", "--cpn"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), format!("{:?}", 1.0 / 24.0));
    let out = df_lab(&["bounds", "--k1", "1.25"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0.5");
}

#[test]
fn input_errors_exit_with_2() {
    let ball = example("ball2.json");
    for args in [
        vec!["certify", "--spec", &ball, "--eta", "1.5"],
        vec!["certify", "--eta", "0.5"],
        vec!["index", "--spec", &ball, "--resolution", "0.9"],
        vec!["decay", "--spec", &ball, "--point", "1,0,0,0", "--eta", "1", "--tgrid", "1e-4:1e-2"],
        vec!["os-check", "--spec", &ball, "--K", "1", "--c", "2", "--eta", "0.5"],
        vec!["oka", "--spec", &ball, "--format", "csv"],
        vec!["bounds", "--K", "-1", "--S", "0"],
        vec!["frobnicate"],
        vec!["certify", "--spec", "/nonexistent/spec.json", "--eta", "0.5"],
    ] {
        let out = df_lab(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
        assert!(!stderr(&out).is_empty());
    }
}

#[test]
fn malformed_spec_reports_location() {
    let dir = Dir::new();
    let path = dir.file("bad.json");
    std::fs::write(&path, "{\n  \"n\": 2,\n  \"rho\": \"abs2(z1) +\",\n  \"box\": [[-1, 1], [-1, 1], [-1, 1], [-1, 1]]\n}\n").unwrap();
    let out = df_lab(&["oka", "--spec", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("end of input"), "{}", stderr(&out));

    std::fs::write(&path, "{\n  \"n\": 2,\n  \"rho\": \"x1\"\n  \"box\": []\n}\n").unwrap();
    let out = df_lab(&["oka", "--spec", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));

    std::fs::write(&path, r#"{"n": 2, "rho": "x1", "box": [[-1, 1]], "colar_width": 0.1}"#).unwrap();
    let out = df_lab(&["oka", "--spec", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("colar_width"), "{}", stderr(&out));
}

#[test]
fn ball_certifies_at_0_9() {
    let dir = Dir::new();
    let out_path = dir.file("r.json");
    let out = df_lab(&[
        "certify",
        "--spec",
        &example("ball2.json"),
        "--eta",
        "0.9",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(&out_path);
    assert_eq!(r["results"]["result"]["verdict"], "Certified");
    assert_eq!(r["command"], "certify");
    assert_eq!(r["config"]["spec"]["n"], 2);
    assert_eq!(r["config"]["params"]["eta"], 0.9);
}

#[test]
fn refutation_and_failure_exit_codes() {
    let dir = Dir::new();
    let out_path = dir.file("r.json");
    // the ball's Levi ratio is 1/t ≥ 10 on the collar, below K = 20
    let out = df_lab(&[
        "sandwich",
        "--spec",
        &example("ball2.json"),
        "--K",
        "20",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(report(&out_path)["results"]["error"].as_str().unwrap().contains("violated"));

    // on the egg the flux density vanishes along the normal through (1, 0)
    let out = df_lab(&[
        "decay",
        "--spec",
        &example("egg2.json"),
        "--point",
        "1,0,0,0",
        "--eta",
        "1",
        "--tgrid",
        "1e-4:1e-2:5",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("5 of 5"));
}

#[test]
fn reports_are_deterministic() {
    let dir = Dir::new();
    let (a, b, c) = (dir.file("a.json"), dir.file("b.json"), dir.file("c.json"));
    let egg = example("egg2.json");
    let run = |path: &Path, threads: &str| {
        let out = df_lab(&["--threads", threads, "levi-map", "--spec", &egg, "--out", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    };
    run(&a, "1");
    run(&b, "1");
    run(&c, "3");
    let ra = without_clock(report(&a));
    assert_eq!(ra, without_clock(report(&b)));
    assert_eq!(ra, without_clock(report(&c)));
    assert_eq!(
        serde_json::to_string_pretty(&ra).unwrap(),
        serde_json::to_string_pretty(&without_clock(report(&b))).unwrap()
    );
}

#[test]
fn seed_precedence() {
    let dir = Dir::new();
    let path = dir.file("r.json");
    let ball = example("ball2.json");
    let run = |env: Option<&str>, flag: Option<&str>| -> Value {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_df-lab"));
        cmd.args(["oka", "--spec", &ball, "--out", path.to_str().unwrap()]);
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        match env {
            Some(v) => cmd.env("DF_LAB_SEED", v),
            None => cmd.env_remove("DF_LAB_SEED"),
        };
        let out = cmd.output().unwrap();
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        report(&path)
    };
    assert_eq!(run(None, None)["seed"], 20120401);
    let env = run(Some("5"), None);
    assert_eq!(env["seed"], 5);
    assert_eq!(env["config"]["spec"]["seed"], 5);
    assert_eq!(run(Some("5"), Some("9"))["seed"], 9);

    let mut cmd = Command::new(env!("CARGO_BIN_EXE_df-lab"));
    let out = cmd
        .args(["oka", "--spec", &ball])
        .env("DF_LAB_SEED", "abc")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn csv_series_have_headers() {
    let dir = Dir::new();
    let path = dir.file("r.csv");
    let out = df_lab(&[
        "levi-map",
        "--spec",
        &example("ball2.json"),
        "--count",
        "20",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x1,y1,x2,y2,eig1,rank,weak");
    assert_eq!(lines.count(), 20);
}

#[test]
fn inline_spec_is_accepted() {
    let out = df_lab(&[
        "ma-mass",
        "--spec",
        r#"{"n": 1, "rho": "abs2(z1) - 1", "box": [[-1.1, 1.1], [-1.1, 1.1]]}"#,
        "--eta",
        "1",
        "--t",
        "0.5",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    // ∫_{|z|² < 1/2} 4 dV = 2π
    let v = r["results"]["value"].as_f64().unwrap();
    let se = r["results"]["std_err"].as_f64().unwrap();
    assert!((v - 2.0 * std::f64::consts::PI).abs() < 4.0 * se, "{v} ± {se}");
}
