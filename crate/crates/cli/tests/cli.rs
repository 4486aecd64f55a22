use std::path::Path;
use std::process::{Command, Output};

const FIG1: &str = r#"
[model]
base = "fig1"
dim = 1
domain = { center = [0.5], radius = 0.5 }
reference = { weights = [1.0], atoms = [[0.5]] }
grid = { lo = [-3.0], hi = [4.0], spacing = 0.05 }

[envelopes]
theta_grid = 16
refine_steps = 5

[cstar]
value = 0.0589
search = { budget = 50, refine_steps = 20 }

[figure1]
resolution = 8

[entropy]
samples = 300
ladder = [0.5, 0.25]

[slice]
ball_samples = 500
instances = 3
instance_samples = 200
hilbert_k = 8
mixture_samples = 10
"#;

fn mixgeo(args: &[&str], dir: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mixgeo"));
    cmd.args(args).current_dir(dir);
    match threads {
        Some(t) => cmd.env("MIXGEO_THREADS", t),
        None => cmd.env_remove("MIXGEO_THREADS"),
    };
    cmd.output().unwrap()
}

fn setup(extra: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), format!("{FIG1}\n{extra}")).unwrap();
    dir
}

#[test]
fn figure1_writes_reproducible_outputs() {
    let dir = setup("");
    let run = |out: &str| {
        let o = mixgeo(&["figure1", "--config", "c.toml", "--seed", "3", "--out", out], dir.path(), Some("2"));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        o.stdout
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    let summary: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(summary["provenance"]["seed"], 3);
    assert_eq!(summary["summary"]["sanity_violations"], 0);
    for f in ["figure1_a_hellinger.csv", "figure1_b_pseudo.csv", "figure1_summary.json"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let csv = std::fs::read_to_string(dir.path().join("a/figure1_a_hellinger.csv")).unwrap();
    assert!(csv.starts_with("# command=figure1\n# config_hash="));
    assert!(csv.contains("# seed=3\n") && csv.contains("# grid=") && csv.contains("# c_star=none"));
}

#[test]
fn json_configs_are_accepted() {
    let dir = setup("");
    let toml_text = std::fs::read_to_string(dir.path().join("c.toml")).unwrap();
    let value: toml::Value = toml::from_str(&toml_text).unwrap();
    std::fs::write(dir.path().join("c.json"), serde_json::to_string(&value).unwrap()).unwrap();
    let o = mixgeo(&["figure1", "--config", "c.json", "--out", "j"], dir.path(), None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = setup("[gauss]\nbogus = 1\n");
    let o = mixgeo(&["gauss", "--config", "c.toml"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
    let dir = setup("");
    let o = mixgeo(&["gauss", "--config", "c.toml"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2), "gauss needs a gaussian base");
    let o = mixgeo(&["figure1", "--config", "missing.toml"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
    let o = mixgeo(&["figure1", "--config", "c.toml"], dir.path(), Some("zero"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_slice_ratio_exits_with_two() {
    let dir = setup("");
    let text = std::fs::read_to_string(dir.path().join("c.toml")).unwrap();
    let text = text.replace("[slice]\n", "[slice]\nball_delta = 1.0\nball_rho = 4.0\n");
    std::fs::write(dir.path().join("c.toml"), text).unwrap();
    let o = mixgeo(&["slice", "--config", "c.toml"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scale precondition"));
}

#[test]
fn cap_abort_exits_with_three_and_keeps_partial_csv() {
    let dir = setup("");
    let text = std::fs::read_to_string(dir.path().join("c.toml")).unwrap();
    let text = text.replace("[entropy]\n", "[entropy]\nmax_centers = 1\n");
    std::fs::write(dir.path().join("c.toml"), text).unwrap();
    let o = mixgeo(&["entropy", "--config", "c.toml", "--out", "e"], dir.path(), Some("1"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("e/entropy.csv")).unwrap();
    assert!(csv.contains("construction") && !csv.contains("greedy"));
}

#[test]
fn slice_reports_coverage() {
    let dir = setup("");
    let o = mixgeo(&["slice", "--config", "c.toml", "--out", "s"], dir.path(), None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let ball = &v["summary"]["ball"];
    assert_eq!(ball["covered"], ball["samples"]);
    assert_eq!(v["summary"]["hilbert_d0_lower"], 8);
    assert_eq!(v["summary"]["mixture"]["covered"], 10);
}
