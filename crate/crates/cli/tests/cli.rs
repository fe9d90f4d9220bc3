use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const COMMANDS: [&str; 10] = [
    "simulate",
    "optimize",
    "curve",
    "contour",
    "sweep",
    "compare",
    "calibrate",
    "sensitivity",
    "standardize",
    "correction-balance",
];

fn sgc(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgc-cost"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("SGC_PRICE_CATALOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    v.sort();
    v
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` in:\n{text}"))
        .split_whitespace()
        .next()
        .unwrap()
        .trim_end_matches('%')
        .parse()
        .unwrap()
}

#[test]
fn every_command_runs_with_defaults() {
    for cmd in COMMANDS {
        let dir = tempfile::tempdir().unwrap();
        let o = sgc(dir.path(), &[cmd]);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        let files = csv_files(dir.path());
        assert!(!files.is_empty(), "{cmd} wrote no csv");
        let study = cmd.replace('-', "_");
        let name = files[0].file_name().unwrap().to_str().unwrap().to_string();
        let pieces: Vec<&str> = name.trim_end_matches(".csv").rsplitn(2, '_').collect();
        assert_eq!(pieces[0].len(), 12, "{name}");
        assert!(pieces[0].chars().all(|c| c.is_ascii_hexdigit()), "{name}");
        assert!(
            files.iter().any(|f| f
                .file_name()
                .unwrap()
                .to_str()
                .unwrap()
                .starts_with(&format!("{study}_baseline_"))),
            "{cmd}: {files:?}"
        );
    }
}

#[test]
fn optimize_reports_labeling_dominance() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgc(dir.path(), &["optimize", "--target", "1.0"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert_eq!(value(&s, "total_emh"), 2.419);
    assert_eq!(value(&s, "labeling_share"), 80.44);
}

#[test]
fn simulate_writes_one_row_per_meal() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgc(dir.path(), &["simulate", "--meals", "100"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&csv_files(dir.path())[0]).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "meal,accuracy,sampling_emh,billing_emh,total_emh,new_types,rotated_types"
    );
    assert_eq!(lines.count(), 100);
    let s = stdout(&o);
    for key in [
        "rp_end_meal",
        "rp_total_emh",
        "sp_mean_accuracy",
        "sp_mean_emh",
        "sp_accuracy_stddev",
    ] {
        value(&s, key);
    }
}

#[test]
fn calibrate_verifies_its_fit() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgc(dir.path(), &["calibrate", "--sp-accuracy", "0.84"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(value(&s, "residual") < 1e-3);
    assert!(value(&s, "beta") > 0.0);
}

#[test]
fn outputs_are_byte_stable() {
    for args in [
        vec!["simulate", "--meals", "60"],
        vec!["simulate", "--meals", "60", "--seed", "9"],
        vec!["curve"],
        vec!["sweep", "--parameter", "R"],
        vec!["compare"],
    ] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        assert!(sgc(a.path(), &args).status.success());
        assert!(sgc(b.path(), &args).status.success());
        let (fa, fb) = (csv_files(a.path()), csv_files(b.path()));
        assert_eq!(fa.len(), fb.len());
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(x.file_name(), y.file_name());
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{args:?}");
        }
    }
}

#[test]
fn run_id_tracks_arguments() {
    let dir = tempfile::tempdir().unwrap();
    assert!(sgc(dir.path(), &["optimize", "--target", "0.9"]).status.success());
    assert!(sgc(dir.path(), &["optimize", "--target", "0.95"]).status.success());
    assert_eq!(csv_files(dir.path()).len(), 2);
}

#[test]
fn unknown_command_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgc(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).to_lowercase().contains("usage"));
}

#[test]
fn infeasible_target_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgc(dir.path(), &["optimize", "--target", "1.5"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr(&o).lines().count(), 1);
    let o = sgc(dir.path(), &["calibrate", "--sp-accuracy", "0.85"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn scenario_validation_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[model.labeling]\nalpha = 1.5\n").unwrap();
    let o = sgc(dir.path(), &["--scenario", path.to_str().unwrap(), "optimize"]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("`alpha`") && e.contains("[0, 1]"), "{e}");
}

#[test]
fn scenario_typo_is_reported_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.toml");
    std::fs::write(&path, "[canteen]\nt_types = 30\ncustomer = 500\n").unwrap();
    let o = sgc(dir.path(), &["--scenario", path.to_str().unwrap(), "optimize"]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("line 3") && e.contains("customer"), "{e}");
}

#[test]
fn scenario_overrides_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    std::fs::write(
        &path,
        "[canteen]\nname = \"wide\"\nt_types = 50\n\n[model]\nsna_upper_bound = 0.9\n",
    )
    .unwrap();
    let o = sgc(
        dir.path(),
        &["--scenario", path.to_str().unwrap(), "--echo-config", "optimize"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let e = stderr(&o);
    assert!(e.contains("sna_upper_bound = 0.9"), "{e}");
    assert!(e.contains("t_types = 50"), "{e}");
    assert!(csv_files(dir.path())[0]
        .to_str()
        .unwrap()
        .contains("optimize_wide_"));
}

#[test]
fn price_catalog_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = tempfile::tempdir().unwrap();
    let catalog = inputs.path().join("prices.csv");
    std::fs::write(
        &catalog,
        "label,system,unit_price,count_rule\nserver,rfid,100,fixed-1\nserver,cv,1,fixed-1\n",
    )
    .unwrap();
    let run = |env: Option<&Path>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_sgc-cost"));
        c.arg("--out").arg(dir.path()).args(["compare", "--start", "1", "--end", "1"]);
        match env {
            Some(p) => c.env("SGC_PRICE_CATALOG", p),
            None => c.env_remove("SGC_PRICE_CATALOG"),
        };
        let o = c.output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o)
    };
    let default = run(None);
    let custom = run(Some(&catalog));
    assert_ne!(default, custom);
    let files = csv_files(dir.path());
    assert_eq!(files.len(), 2, "catalog must change the run id");
}

#[test]
fn typical_canteen_preset() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgc(dir.path(), &["--canteen", "type-ii", "compare"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(value(&stdout(&o), "rfid_cheaper_from"), 0.8);
    let o = sgc(dir.path(), &["--canteen", "type-v", "compare"]);
    assert_eq!(o.status.code(), Some(2));
}
