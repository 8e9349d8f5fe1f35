use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tensegrity_evo::experiment::GenomeArtifact;

fn tensevo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tensevo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn tiny_config(out: &Path, regimes: &str) -> String {
    format!(
        r#"{{
  "schema_version": 1,
  "sim": {{"settle_duration": 0.5}},
  "evolution": {{"population_size": 4, "generations": 1, "sim_duration": 2.0}},
  "regimes": {regimes},
  "run_count": 1,
  "seed_list": [],
  "output_directory": "{}"
}}"#,
        out.display()
    )
}

#[test]
fn zero_runs_give_empty_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(
        dir.path(),
        &format!(r#"{{"schema_version": 1, "run_count": 0, "output_directory": "{}"}}"#, out.display()),
    );
    let o = tensevo(&["evolve", "--config", &config]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(out.join("summary.txt").is_file());
}

#[test]
fn config_errors_exit_1_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "{\n  \"schema_version\": 1,\n  \"run_count\": 1,\n  \"bogus\": 3\n}");
    let o = tensevo(&["evolve", "--config", &config]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bogus") && err.contains("line 4"), "{err}");

    let o = tensevo(&["evolve", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = tensevo(&["evolve"]);
    assert_eq!(o.status.code(), Some(1));
    let o = tensevo(&["fly"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn evolve_is_reproducible_resumable_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let ca = write_config(&dir.path().join("."), &tiny_config(&a, r#"["HIGH", "LOW"]"#));
    let o = tensevo(&["evolve", "--config", &ca]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cb_dir = dir.path().join("cb");
    fs::create_dir(&cb_dir).unwrap();
    let cb = write_config(&cb_dir, &tiny_config(&b, r#"["HIGH", "LOW"]"#));
    let o = tensevo(&["evolve", "--config", &cb, "--workers", "2"]);
    assert!(o.status.success());

    for run in ["HIGH_seed1", "LOW_seed2"] {
        for file in ["history.csv", "best_genome.json"] {
            let x = fs::read(a.join(run).join(file)).unwrap();
            let y = fs::read(b.join(run).join(file)).unwrap();
            assert_eq!(x, y, "{run}/{file}");
        }
        assert!(a.join(run).join("done").is_file());
    }
    assert_eq!(fs::read(a.join("summary.csv")).unwrap(), fs::read(b.join("summary.csv")).unwrap());

    // A completed run is not redone; an interrupted one is.
    let marker_time = fs::metadata(a.join("HIGH_seed1/history.csv")).unwrap().modified().unwrap();
    fs::remove_file(a.join("LOW_seed2/done")).unwrap();
    fs::write(a.join("LOW_seed2/history.csv"), "truncated").unwrap();
    let o = tensevo(&["evolve", "--config", &ca]);
    assert!(o.status.success());
    assert_eq!(fs::metadata(a.join("HIGH_seed1/history.csv")).unwrap().modified().unwrap(), marker_time);
    assert_eq!(
        fs::read(a.join("LOW_seed2/history.csv")).unwrap(),
        fs::read(b.join("LOW_seed2/history.csv")).unwrap()
    );

    let genome = a.join("HIGH_seed1/best_genome.json");
    let stored = GenomeArtifact::load(&genome).unwrap();
    let traj = dir.path().join("traj/high.csv");
    let o = tensevo(&["replay", "--genome", genome.to_str().unwrap(), "--config", &ca, "--out", traj.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let printed: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("fitness: "))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(printed.to_bits(), stored.fitness.to_bits());
    let csv = fs::read_to_string(&traj).unwrap();
    assert!(csv.starts_with("t,com_x,com_y,com_z,contact_count,n0x,n0y,n0z,"));
    // 2 s at 100 Hz, both ends included.
    assert_eq!(csv.lines().count(), 1 + 201);

    // Cross-regime probe: the config only knows LOW.
    let low_dir = dir.path().join("low");
    fs::create_dir(&low_dir).unwrap();
    let cl = write_config(&low_dir, &tiny_config(&a, r#"["LOW"]"#));
    let probe = dir.path().join("probe.csv");
    let o = tensevo(&["replay", "--genome", genome.to_str().unwrap(), "--config", &cl, "--out", probe.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("regime: LOW"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("HIGH"));
    assert!(probe.is_file());
}

#[test]
fn replay_of_missing_genome_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &tiny_config(&dir.path().join("out"), r#"["LOW"]"#));
    let out = dir.path().join("t.csv");
    let missing = dir.path().join("none.json");
    let o = tensevo(&["replay", "--genome", missing.to_str().unwrap(), "--config", &config, "--out", out.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
    assert!(!out.exists());
    let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1);

    fs::write(&missing, "{\"genome_hex\": \"zz\"}").unwrap();
    let o = tensevo(&["replay", "--genome", missing.to_str().unwrap(), "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn dump_module_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("nested/b.json");
    assert!(tensevo(&["dump-module", "--out", a.to_str().unwrap()]).status.success());
    assert!(tensevo(&["dump-module", "--out", b.to_str().unwrap()]).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&a).unwrap()).unwrap();
    assert_eq!(doc["nodes"].as_array().unwrap().len(), 12);
    assert_eq!(doc["struts"].as_array().unwrap().len(), 6);
    assert_eq!(doc["cables"].as_array().unwrap().len(), 24);
    let faces = doc["faces"].as_array().unwrap();
    assert_eq!(faces.len(), 8);
    let k = 1.0 / 3f64.sqrt();
    for f in faces {
        let n: Vec<f64> = f["outward_normal"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        for c in n {
            assert!((c.abs() - k).abs() < 1e-12);
        }
    }
}
