use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pathlift::catalog::{flat_cases, oracle_functions, sphere_cases};
use pathlift::ibp::{AdaptedCheck, AdaptedIntegral, Convention, IbpCheck, McSettings};
use pathlift::oracle::OracleMethod;
use pathlift::submersion::{BaseField, SubmersionCase};
use pathlift::{Kind, Manifold};
use pathlift_cli::config::{
    self, CmKernelSuite, DevelopCheck, Experiment, HeatMoment, Invariants, LiftCheck, OracleIbp, OutputSpec, Submersion, WeakOrder,
};
use pathlift_cli::RunConfig;
use serde_json::Value;

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn regenerate() -> bool {
    std::env::var("PATHLIFT_REGENERATE_GOLDEN").is_ok_and(|v| v == "1")
}

fn kind_name(m: &Manifold) -> &'static str {
    match m.kind() {
        Kind::Euclidean => "flat",
        Kind::Sphere => "sphere",
        Kind::Hyperbolic => "hyperbolic",
    }
}

fn mc(n_paths: usize, seed: u64) -> McSettings {
    McSettings { n_paths, seed, workers: None }
}

fn config(stem: &str, experiment: Experiment) -> (String, RunConfig) {
    (stem.to_string(), RunConfig { experiment, output: OutputSpec { stem: stem.into(), ..OutputSpec::default() } })
}

/// The committed config for every acceptance run.
fn acceptance_configs() -> Vec<(String, RunConfig)> {
    let mut out = vec![config(
        "c01-03-cm-kernel-suite",
        Experiment::CmKernelSuite(CmKernelSuite { n_steps: 1000, dim: 3, cases: 100, competitors: 100, seed: 1, rk4_levels: vec![4, 8, 16, 32] }),
    )];
    for m in [Manifold::sphere(2).unwrap(), Manifold::hyperbolic(2).unwrap()] {
        let name = format!("c04-develop-check-{}", kind_name(&m));
        out.push(config(&name, Experiment::DevelopCheck(DevelopCheck { manifold: m, n_steps: 1000, mc: mc(1000, 4) })));
    }
    for case in sphere_cases() {
        out.push(config(
            &format!("c05-lift-check-{}", case.field.name()),
            Experiment::LiftCheck(LiftCheck { manifold: case.manifold, field: case.field.clone(), levels: vec![250, 500, 1000], mc: mc(1000, 5) }),
        ));
    }
    out.push(config("c06-heat-moment", Experiment::HeatMoment(HeatMoment { n_steps: 2000, mc: mc(100_000, 6) })));
    out.push(config("c06-weak-order", Experiment::WeakOrder(WeakOrder { levels: vec![16, 32, 64, 128], mc: mc(100_000, 7), min_order: 0.8 })));
    for (i, case) in flat_cases().into_iter().enumerate() {
        out.push(config(
            &format!("c07-adapted-ibp-flat-{}", i + 1),
            Experiment::AdaptedIbp(AdaptedCheck {
                manifold: case.manifold,
                n_steps: 100,
                mc: mc(100_000, 70 + i as u64),
                direction: i % 2,
                f: case.f,
                g: case.g,
                integral: AdaptedIntegral::Transported,
                bias_allowance: None,
                oracle_tolerance: 1e-3,
            }),
        ));
    }
    let rot = &sphere_cases()[0];
    for alpha in 0..2 {
        out.push(config(
            &format!("c07-adapted-ibp-sphere-z{}", alpha + 1),
            Experiment::AdaptedIbp(AdaptedCheck {
                manifold: rot.manifold,
                n_steps: 1000,
                mc: mc(100_000, 77),
                direction: alpha,
                f: rot.f.clone(),
                g: rot.g.clone(),
                integral: AdaptedIntegral::Transported,
                bias_allowance: None,
                oracle_tolerance: 1e-3,
            }),
        ));
    }
    for (i, case) in flat_cases().into_iter().enumerate() {
        out.push(config(
            &format!("c08-ibp-flat-{}", i + 1),
            Experiment::Ibp(IbpCheck {
                manifold: case.manifold,
                n_steps: 100,
                mc: mc(100_000, 80 + i as u64),
                field: case.field,
                f: case.f,
                g: case.g,
                convention: Convention::DERIVED,
                bias_allowance: Some(0.0),
                exact_oracle: true,
            }),
        ));
    }
    for case in sphere_cases() {
        out.push(config(
            &format!("c08-ibp-sphere-{}", case.field.name()),
            Experiment::Ibp(IbpCheck {
                manifold: case.manifold,
                n_steps: 1000,
                mc: mc(100_000, 5),
                field: case.field,
                f: case.f,
                g: case.g,
                convention: Convention::DERIVED,
                bias_allowance: None,
                exact_oracle: true,
            }),
        ));
    }
    let sphere = Manifold::sphere(2).unwrap();
    let (f, g) = oracle_functions(&sphere);
    out.push(config(
        "c09-oracle-ibp-sphere",
        Experiment::OracleIbp(OracleIbp {
            manifold: sphere,
            n_small: 2,
            fields: sphere_cases().into_iter().map(|c| c.field).collect(),
            f,
            g,
            method: OracleMethod::default(),
            tolerance: None,
            expect: Some(Convention::DERIVED),
        }),
    ));
    let flat = Manifold::euclidean(2).unwrap();
    let (f, g) = oracle_functions(&flat);
    out.push(config(
        "c09-oracle-ibp-flat",
        Experiment::OracleIbp(OracleIbp {
            manifold: flat,
            n_small: 2,
            fields: vec![pathlift::VectorField::Identity, pathlift::VectorField::Constant { c: vec![1.0, -0.5] }],
            f,
            g,
            method: OracleMethod::default(),
            tolerance: None,
            expect: None,
        }),
    ));
    let affine = BaseField::Affine { a: [[0.5, -1.0], [2.0, 0.3]], b: [0.1, -0.4] };
    for (case, seed) in [(SubmersionCase::Product, 10), (SubmersionCase::Warped, 11)] {
        let name = format!("c10-submersion-{}", if case == SubmersionCase::Product { "product" } else { "warped" });
        out.push(config(&name, Experiment::Submersion(Submersion { case, field: affine.clone(), n_points: 1000, seed })));
    }
    for case in sphere_cases().into_iter().chain(flat_cases().into_iter().take(1)) {
        out.push(config(
            &format!("c11-invariants-{}-{}", kind_name(&case.manifold), case.field.name()),
            Experiment::Invariants(Invariants { manifold: case.manifold, field: case.field, f: case.f, g: case.g, n_steps: 400, mc: mc(1000, 11) }),
        ));
    }
    out
}

#[test]
fn committed_configs_match_the_acceptance_runs() {
    let dir = workspace().join("configs");
    let expected = acceptance_configs();
    if regenerate() {
        std::fs::create_dir_all(&dir).unwrap();
        for (name, cfg) in &expected {
            std::fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(cfg).unwrap() + "\n").unwrap();
        }
    }
    let mut committed: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".json"))
        .collect();
    committed.sort();
    let mut names: Vec<String> = expected.iter().map(|(n, _)| format!("{n}.json")).collect();
    names.sort();
    assert_eq!(committed, names);
    for (name, cfg) in &expected {
        let text = std::fs::read_to_string(dir.join(format!("{name}.json"))).unwrap();
        let parsed = RunConfig::from_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(serde_json::to_value(&parsed).unwrap(), serde_json::to_value(cfg).unwrap(), "{name}");
    }
}

#[test]
fn shipped_schema_is_current() {
    let path = workspace().join("docs/run-config.schema.json");
    let schema = config::schema();
    if regenerate() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &schema).unwrap();
    }
    assert_eq!(std::fs::read_to_string(&path).unwrap(), schema);
}

fn pathlift(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pathlift"));
    cmd.args(args).env_remove("PATHLIFT_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn small_ibp() -> RunConfig {
    let (_, mut cfg) = acceptance_configs().into_iter().find(|(n, _)| n == "c08-ibp-flat-1").unwrap();
    if let Experiment::Ibp(c) = &mut cfg.experiment {
        c.mc.n_paths = 2000;
        c.n_steps = 20;
    }
    cfg
}

fn json_of(cfg: &RunConfig) -> String {
    serde_json::to_string(cfg).unwrap()
}

fn read_result(dir: &Path, stem: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json"))).unwrap()).unwrap()
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    for (name, text) in [
        ("truncated.json", "{\"experiment\": {\"kind\": \"ibp\"".to_string()),
        ("unknown-key.json", json_of(&small_ibp()).replacen("\"n_steps\"", "\"n_stepz\": 1, \"n_steps\"", 1)),
        ("unknown-kind.json", json_of(&small_ibp()).replacen("\"ibp\"", "\"ibb\"", 1)),
        ("bad-range.json", json_of(&small_ibp()).replacen("\"n_paths\":2000", "\"n_paths\":1", 1)),
    ] {
        let cfg = write_config(tmp.path(), name, &text);
        let r = pathlift(&["run", &cfg, "--out", o], &[]);
        assert_eq!(r.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&r.stderr));
        assert!(!out.exists(), "{name} produced output");
    }
    let cfg = write_config(tmp.path(), "ok.json", &json_of(&small_ibp()));
    let r = pathlift(&["run", &cfg, "--out", o], &[("PATHLIFT_SEED", "abc")]);
    assert_eq!(r.status.code(), Some(2));
    let r = pathlift(&["run", &tmp.path().join("missing.json").to_string_lossy(), "--out", o], &[]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn flat_ibp_passes_with_term_breakdown() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ibp.json", &json_of(&small_ibp()));
    let r = pathlift(&["run", &cfg, "--out", tmp.path().to_str().unwrap(), "--workers", "1"], &[]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let v = read_result(tmp.path(), "c08-ibp-flat-1");
    assert_eq!(v["verdict"], true);
    assert_eq!(v["kind"], "ibp");
    assert_eq!(v["workers"], 1);
    for term in ["minus_xg", "ito", "divergence", "nabla_part", "curvature_part"] {
        assert!(v["report"]["terms"][term]["mean"].is_number(), "missing {term}");
    }
    assert!(v["report"]["exact"]["value"].is_number());
    assert!(String::from_utf8_lossy(&r.stderr).contains("no sweep to plot"));
    assert!(!tmp.path().join("c08-ibp-flat-1-sweep0.svg").exists());
}

#[test]
fn reruns_are_bit_identical_and_seed_override_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ibp.json", &json_of(&small_ibp()));
    let payload = |dir: &str, env: &[(&str, &str)]| {
        let out = tmp.path().join(dir);
        let r = pathlift(&["run", &cfg, "--out", out.to_str().unwrap(), "--workers", "2"], env);
        assert_eq!(r.status.code(), Some(0));
        let mut v = read_result(&out, "c08-ibp-flat-1");
        v.as_object_mut().unwrap().remove("wall_clock_seconds");
        v
    };
    let a = payload("a", &[]);
    let b = payload("b", &[]);
    assert_eq!(a, b);
    assert_eq!(a["seed"]["source"], "config");
    let c = payload("c", &[("PATHLIFT_SEED", "12345")]);
    assert_eq!(c["seed"]["value"], 12345);
    assert_eq!(c["seed"]["source"], "env");
    assert_eq!(c["experiment"]["mc"]["seed"], 12345);
    assert_ne!(a["report"]["lhs"], c["report"]["lhs"]);
}

#[test]
fn kernel_suite_writes_sweep_and_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        experiment: Experiment::CmKernelSuite(CmKernelSuite { n_steps: 400, dim: 2, cases: 3, competitors: 5, seed: 3, rk4_levels: vec![4, 8, 16, 32] }),
        output: OutputSpec { stem: "kernel".into(), ..OutputSpec::default() },
    };
    let path = write_config(tmp.path(), "k.json", &json_of(&cfg));
    let r = pathlift(&["run", &path, "--out", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let v = read_result(tmp.path(), "kernel");
    assert!(v["report"]["flat_error"].as_f64().unwrap() <= 1e-10);
    let slope = v["sweeps"][0]["slope"].as_f64().unwrap();
    assert!((slope + 4.0).abs() <= 0.3, "slope {slope}");
    let svg = std::fs::read_to_string(tmp.path().join("kernel-sweep0.svg")).unwrap();
    assert!(svg.contains(&format!("fitted slope {slope:.2}")));
    assert!(std::fs::read_to_string(tmp.path().join("kernel-sweep0.csv")).unwrap().starts_with("n_steps,"));
}

#[test]
fn failed_experiment_exits_1_with_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        experiment: Experiment::WeakOrder(WeakOrder { levels: vec![4, 8], mc: mc(200, 1), min_order: 50.0 }),
        output: OutputSpec { stem: "weak".into(), plots: false, ..OutputSpec::default() },
    };
    let path = write_config(tmp.path(), "w.json", &json_of(&cfg));
    let r = pathlift(&["run", &path, "--out", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(r.status.code(), Some(1));
    let v = read_result(tmp.path(), "weak");
    assert_eq!(v["verdict"], false);
    assert!(v["report"]["weak_order"]["order"].is_number());
    assert!(!tmp.path().join("weak-sweep0.svg").exists());
}

#[test]
fn submersion_writes_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        experiment: Experiment::Submersion(Submersion { case: SubmersionCase::Warped, field: BaseField::Swirl, n_points: 20, seed: 2 }),
        output: OutputSpec { stem: "warped".into(), ..OutputSpec::default() },
    };
    let path = write_config(tmp.path(), "s.json", &json_of(&cfg));
    let r = pathlift(&["run", &path, "--out", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let table = std::fs::read_to_string(tmp.path().join("warped.csv")).unwrap();
    assert_eq!(table.lines().count(), 21);
    assert!(table.starts_with("y1,y2,y3,div_total,div_base,rho"));
}

#[test]
fn schema_subcommand_prints_schema() {
    let r = pathlift(&["schema"], &[]);
    assert_eq!(r.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(v["title"], "RunConfig");
}
