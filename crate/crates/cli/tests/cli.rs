use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn egesim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egesim"))
        .args(args)
        .output()
        .expect("spawn egesim")
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("job.cfg");
    fs::write(&path, body).unwrap();
    path
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const MINIMAL: &str = "l = 6\nn = 5\nk = 3\nensemble_size = 10\nmaster_seed = 4\nenergy_grid_points = 51\n";

#[test]
fn minimal_run_writes_four_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let out_dir = dir.path().join("out");
    let out = egesim(&["run", cfg.to_str().unwrap(), "--output-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<String> = fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["currents.csv", "spectral.csv", "summary.json", "transmission_avg.csv"]);

    let currents = read(&out_dir.join("currents.csv"));
    let lines: Vec<&str> = currents.lines().collect();
    assert_eq!(lines[0], "index,seed,current_ege,current_csege");
    assert_eq!(lines.len(), 11);
    for (i, line) in lines[1..].iter().enumerate() {
        assert!(line.starts_with(&format!("{i},")));
    }

    let spectral = read(&out_dir.join("spectral.csv"));
    let lines: Vec<&str> = spectral.lines().collect();
    assert_eq!(lines[0], "index,flavor,j,re_eps,im_eps,re_ups,im_ups,tau,t_at_res");
    assert_eq!(lines.len(), 1 + 10 * 2 * 6);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(&first[..3], ["0", "ege", "1"]);
    let seventh: Vec<&str> = lines[7].split(',').collect();
    assert_eq!(&seventh[..3], ["0", "csege", "1"]);

    let t = read(&out_dir.join("transmission_avg.csv"));
    let lines: Vec<&str> = t.lines().collect();
    assert_eq!(lines[0], "energy,t_mean_ege,t_sem_ege,t_mean_csege,t_sem_csege");
    assert_eq!(lines.len(), 52);
    let energies: Vec<f64> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(energies.windows(2).all(|w| w[0] < w[1]));

    let summary: Value = serde_json::from_str(&read(&out_dir.join("summary.json"))).unwrap();
    for flavor in ["ege", "csege"] {
        let s = &summary["flavor_summaries"][flavor];
        for key in ["mean_current", "sem", "mode", "bin_width", "band_halfwidth", "defective_count"] {
            assert!(s.get(key).is_some(), "{flavor}.{key}");
        }
    }
    assert_eq!(summary["config"]["l"], 6);
    assert_eq!(summary["config"]["centro_sampling"], "orbit");
    assert!(summary["invariant_report"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn invalid_particle_number_exits_one_naming_n() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let out = egesim(&["run", cfg.to_str().unwrap(), "--n", "6"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`n`"));

    let cfg = write_config(dir.path(), "l = 6\nn = 5\nk = 3\neta = -1\n");
    let out = egesim(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`eta`"));

    let out = egesim(&["run", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let target = blocker.join("sub");
    let out = egesim(&["run", cfg.to_str().unwrap(), "--output-dir", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn repeated_runs_are_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let mut outputs = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let d = dir.path().join(name);
        let out = egesim(&[
            "run",
            cfg.to_str().unwrap(),
            "--workers",
            workers,
            "--output-dir",
            d.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        outputs.push((read(&d.join("currents.csv")), read(&d.join("spectral.csv")), read(&d.join("transmission_avg.csv"))));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn summary_json_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let first = dir.path().join("first");
    assert!(egesim(&["run", cfg.to_str().unwrap(), "--output-dir", first.to_str().unwrap()])
        .status
        .success());
    let second = dir.path().join("second");
    let out = egesim(&[
        "run",
        first.join("summary.json").to_str().unwrap(),
        "--output-dir",
        second.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["currents.csv", "spectral.csv", "transmission_avg.csv"] {
        assert_eq!(read(&first.join(f)), read(&second.join(f)), "{f}");
    }
}

#[test]
fn golden_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = egesim(&[
        "run",
        golden("job.cfg").to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(read(&out_dir.join("currents.csv")), read(&golden("currents.csv")));

    let ours = read(&out_dir.join("transmission_avg.csv"));
    let want = read(&golden("transmission_avg.csv"));
    let (ours, want): (Vec<&str>, Vec<&str>) = (ours.lines().collect(), want.lines().collect());
    assert_eq!(ours.len(), want.len());
    assert_eq!(ours[0], want[0]);
    for (a, b) in ours[1..].iter().zip(&want[1..]) {
        for (x, y) in a.split(',').zip(b.split(',')) {
            let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
            assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1e-300), "{x} vs {y}");
        }
    }
}

#[test]
fn sweep_writes_cell_directories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "l = 4\ncells = all\nensemble_size = 4\nenergy_grid_points = 21\n");
    let out_dir = dir.path().join("grid");
    let out = egesim(&["sweep", cfg.to_str().unwrap(), "--output-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for (n, k) in [(1, 1), (2, 1), (2, 2), (3, 1), (3, 2), (3, 3)] {
        assert!(out_dir.join(format!("n{n}_k{k}/currents.csv")).is_file());
    }
    let grid: Value = serde_json::from_str(&read(&out_dir.join("grid_summary.json"))).unwrap();
    assert_eq!(grid["cells"].as_array().unwrap().len(), 6);
    assert!(grid["max_mean_current"]["ege"]["n"].is_u64());

    let bad = write_config(dir.path(), "l = 4\ncells = 2:1, 2:3\n");
    let out = egesim(&["sweep", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n=2 k=3"));
}

#[test]
fn check_passes_and_detects_a_sign_fault() {
    let out = egesim(&["check", "--samples", "20", "--oracle-draws", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);

    let out = egesim(&["check", "--samples", "5", "--oracle-draws", "1", "--inject-sign-fault"]);
    assert_eq!(out.status.code(), Some(4));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["commutator"]);
}

#[test]
fn check_accepts_small_systems() {
    let out = egesim(&["check", "--l", "4", "--n", "2", "--k", "2", "--samples", "10", "--oracle-draws", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}
