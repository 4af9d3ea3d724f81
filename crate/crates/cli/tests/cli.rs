use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fusion_pollination_cli::config::Scenario;

fn fpsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpsim")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let o = fpsim(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn err_code(args: &[&str]) -> String {
    let o = fpsim(args);
    assert!(!o.status.success());
    let e = String::from_utf8_lossy(&o.stderr).to_string();
    e.split_once('[')
        .and_then(|(_, r)| r.split_once(']'))
        .map(|(c, _)| c.to_string())
        .unwrap_or(e)
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_conf(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.conf");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn baseline_writes_its_artifacts_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["baseline", "--seed", "9", "--out", s(&a)]);
    ok(&["baseline", "--seed", "9", "--out", s(&b)]);
    let ta = tree(&a);
    let names: Vec<_> = ta.keys().map(|p| p.to_str().unwrap().to_string()).collect();
    assert_eq!(names, ["coverage.csv", "foodflow.csv", "season.csv", "totals.txt"]);
    assert_eq!(ta, tree(&b));

    let season = String::from_utf8(ta[Path::new("season.csv")].clone()).unwrap();
    assert_eq!(season.lines().count(), 1 + 153);
    let foodflow = String::from_utf8(ta[Path::new("foodflow.csv")].clone()).unwrap();
    assert_eq!(foodflow.lines().count(), 1 + 245);
    let coverage = String::from_utf8(ta[Path::new("coverage.csv")].clone()).unwrap();
    assert_eq!(coverage.lines().count(), 64);
    assert!(coverage.lines().all(|l| l.split(',').count() == 72));
}

#[test]
fn dump_paths_adds_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(
        tmp.path(),
        "[colony]\nseason_start = 150\nseason_end = 160\n[scouting]\nn_scouts = 5\n",
    );
    ok(&["baseline", "--config", s(&conf), "--out", s(tmp.path()), "--dump-paths"]);
    let t = fs::read_to_string(tmp.path().join("trajectories.csv")).unwrap();
    assert_eq!(t.lines().next().unwrap(), "scout_id,step,x,y");
    assert!(t.lines().count() > 1);
}

#[test]
fn different_seeds_differ() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["baseline", "--seed", "1", "--out", s(&a)]);
    ok(&["baseline", "--seed", "2", "--out", s(&b)]);
    assert_ne!(
        fs::read(a.join("season.csv")).unwrap(),
        fs::read(b.join("season.csv")).unwrap()
    );
}

#[test]
fn fi_run_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["fi", "--seed", "3", "--out", s(&a)]);
    ok(&["fi", "--seed", "3", "--out", s(&b)]);
    assert_eq!(tree(&a), tree(&b));
    for f in [
        "fi_plan.csv",
        "loop_trace.csv",
        "comparison.csv",
        "regions.csv",
        "monitor.txt",
        "baseline/season.csv",
        "fi/season.csv",
        "fi/field.map",
    ] {
        assert!(a.join(f).is_file(), "{f} missing");
    }
    let cmp = fs::read_to_string(a.join("comparison.csv")).unwrap();
    let pii = cmp.lines().find(|l| l.starts_with("pii,")).unwrap();
    let shown: f64 = pii.split(',').nth(3).unwrap().parse().unwrap();
    assert!(shown > 0.0);

    let plan = fs::read_to_string(a.join("fi_plan.csv")).unwrap();
    assert_eq!(plan.lines().filter(|l| l.starts_with("control,")).count(), 1);

    ok(&["report", s(&a)]);
    let report = fs::read_to_string(a.join("report.csv")).unwrap();
    let metrics: std::collections::BTreeSet<&str> =
        report.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(metrics.len(), 6);
    assert_eq!(report.lines().count(), 1 + 6 * 2 * 153);
    ok(&["report", s(&a)]);
    assert_eq!(report, fs::read_to_string(a.join("report.csv")).unwrap());
}

#[test]
fn fi_without_budget_or_headroom_reports_zero_pii() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(
        tmp.path(),
        "[supervisor]\nmax_artificial_patches = 0\nmax_uplift_c = 0\nmax_extra_light_h = 0\n",
    );
    let out = tmp.path().join("o");
    ok(&["fi", "--config", s(&conf), "--out", s(&out)]);
    let cmp = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert!(cmp.lines().any(|l| l == "pii,0.5,0.5,0.00,weighted"), "{cmp}");
    assert_eq!(
        fs::read(out.join("baseline/season.csv")).unwrap(),
        fs::read(out.join("fi/season.csv")).unwrap()
    );
}

#[test]
fn fi_with_softmax_classifier() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(
        tmp.path(),
        "[classifier]\nkind = \"softmax\"\ntraining_samples = 300\n[supervisor]\nmax_iterations = 2\n",
    );
    ok(&["fi", "--config", s(&conf), "--out", s(tmp.path())]);
    assert!(tmp.path().join("loop_trace.csv").is_file());
}

#[test]
fn report_on_empty_dir_names_missing_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(err_code(&["report", s(tmp.path())]), "MissingArtifacts");
}

#[test]
fn missing_map_and_config_are_named() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(tmp.path(), "[landscape]\nmap = \"nowhere.map\"\n");
    assert_eq!(
        err_code(&["baseline", "--config", s(&conf), "--out", s(tmp.path())]),
        "MapNotFound"
    );
    let gone = tmp.path().join("gone.conf");
    assert_eq!(
        err_code(&["baseline", "--config", s(&gone), "--out", s(tmp.path())]),
        "ConfigNotFound"
    );
    assert_eq!(err_code(&["baseline"]), "NoOutputDir");
}

#[test]
fn bad_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(tmp.path(), "[scouting]\nn_scoutz = 4\n");
    assert_eq!(
        err_code(&["baseline", "--config", s(&conf), "--out", s(tmp.path())]),
        "ConfigParse"
    );
    let conf = write_conf(tmp.path(), "[colony]\nforager_fraction = 1.5\n");
    assert_eq!(
        err_code(&["baseline", "--config", s(&conf), "--out", s(tmp.path())]),
        "BadValue"
    );
}

#[test]
fn weather_file_with_a_gap_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("day,max_temp_c,sunshine_h\n");
    for d in 1..=365 {
        if d != 120 {
            csv.push_str(&format!("{d},18.5,6\n"));
        }
    }
    fs::write(tmp.path().join("w.csv"), &csv).unwrap();
    let conf = write_conf(tmp.path(), "[weather]\nsource = \"w.csv\"\n");
    assert_eq!(
        err_code(&["baseline", "--config", s(&conf), "--out", s(tmp.path())]),
        "MissingDay"
    );

    let conf = write_conf(tmp.path(), "[weather]\nsource = \"absent.csv\"\n");
    assert_eq!(
        err_code(&["baseline", "--config", s(&conf), "--out", s(tmp.path())]),
        "WeatherNotFound"
    );
}

#[test]
fn train_monitor_on_a_baseline_export() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["baseline", "--seed", "4", "--out", s(tmp.path())]);
    let o = ok(&["train-monitor", "--seed", "4", s(&tmp.path().join("season.csv"))]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("r_squared"));
    let line = text.lines().find(|l| l.starts_with("held_out_r_squared = ")).unwrap();
    let r2: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(r2 > 0.5, "{text}");
}

#[test]
fn bundled_scenario_matches_the_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/desk.toml");
    let mut sc = Scenario::load(&path).unwrap();
    assert!(sc.out.take().is_some());
    assert_eq!(format!("{sc:?}"), format!("{:?}", Scenario::default()));
}
