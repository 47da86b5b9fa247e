use std::path::Path;
use std::process::{Command, Output};

fn zakai(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zakai"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &str = r#"
scheme = "adi-milstein"
seed = 7
mu_x = 0.0
mu_y = 0.0
rho_x = 0.0
rho_y = 0.0
rho_xy = 0.0
x_min = 0.0
x_max = 2.0
y_min = 0.0
y_max = 2.5
h_x = 0.5
h_y = 0.5
x0 = 1.0
y0 = 1.0
horizon = 0.5
k = 0.125
"#;

#[test]
fn solve_smoke_writes_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let o = zakai(dir.path(), &["--config", cfg.to_str().unwrap(), "solve"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.path().join("field.csv")).unwrap();
    assert_eq!(rdr.records().count(), 3 * 4);
    for name in ["summary.json", "manifest.json", "config.toml"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}

#[test]
fn manifest_config_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY.replace("rho_x = 0.0", "rho_x = 0.3")).unwrap();
    let first = dir.path().join("a");
    assert_eq!(zakai(&first, &["--config", cfg.to_str().unwrap(), "solve"]).status.code(), Some(0));
    let second = dir.path().join("b");
    let recorded = first.join("config.toml");
    assert_eq!(zakai(&second, &["--config", recorded.to_str().unwrap(), "solve"]).status.code(), Some(0));
    let a = std::fs::read_to_string(first.join("field.csv")).unwrap();
    let b = std::fs::read_to_string(second.join("field.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let o = zakai(dir.path(), &["--preset", "paper-sec5", "--seed", "1", "--set", "bogus_key=1", "solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus_key"), "{}", stderr(&o));
}

#[test]
fn mistyped_value_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = zakai(dir.path(), &["--preset", "paper-sec5", "--seed", "1", "--set", "h_x=\"wide\"", "solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("h_x"), "{}", stderr(&o));
}

#[test]
fn forced_iteration_failure_exits_numerical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let o = zakai(
        dir.path(),
        &[
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "scheme=\"implicit-milstein\"",
            "--set",
            "solver=\"krylov\"",
            "--set",
            "tol=1e-30",
            "--set",
            "max_iter=1",
            "solve",
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn unknown_preset_and_missing_seed_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = zakai(dir.path(), &["--preset", "nope", "--seed", "1", "solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope"));
    let o = zakai(dir.path(), &["--preset", "paper-sec5", "solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
}

fn recorded_config(dir: &Path) -> toml::Table {
    std::fs::read_to_string(dir.join("config.toml")).unwrap().parse().unwrap()
}

fn assert_keys(t: &toml::Table, expected: &[(&str, f64)]) {
    for (key, value) in expected {
        let got = t[*key].as_float().unwrap_or_else(|| panic!("{key} not a float"));
        assert!((got - value).abs() < 1e-15, "{key}: {got} vs {value}");
    }
}

#[test]
fn constant_preset_reproduces_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let o = zakai(dir.path(), &["--preset", "paper-sec5", "--seed", "3", "--set", "k=0.0625", "solve"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let t = recorded_config(dir.path());
    assert_keys(
        &t,
        &[
            ("horizon", 1.0),
            ("x0", 2.0),
            ("y0", 2.0),
            ("mu_x", 0.0809),
            ("mu_y", 0.0809),
            ("rho_x", 0.2),
            ("rho_y", 0.2),
            ("rho_xy", 0.45),
        ],
    );
    assert_eq!(t["seed"].as_integer(), Some(3));
}

#[test]
fn stochastic_volatility_preset_reproduces_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let o = zakai(dir.path(), &["--preset", "paper-sec6", "--seed", "3", "solve"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_keys(
        &recorded_config(dir.path()),
        &[
            ("horizon", 1.0),
            ("x0", 2.0),
            ("y0", 1.4),
            ("r", 0.05),
            ("xi", 0.5),
            ("theta", 0.4),
            ("kappa", 2.0),
            ("rho_11", 0.3),
            ("rho_21", 0.2),
            ("rho_3", 0.5),
        ],
    );
}

#[test]
fn levy_check_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = zakai(
        dir.path(),
        &["--seed", "5", "--set", "samples=2000", "--set", "m_sub=16", "--set", "k=0.0625", "levy-check"],
    );
    assert!(matches!(o.status.code(), Some(0) | Some(3)), "{}", stderr(&o));
    for name in ["levy.csv", "levy.json", "manifest.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}
