use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shapemanifold::mesh::read_stl;
use shapemanifold::{flatten, load_stl};
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_shapemanifold"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("config.json"), config).unwrap();
        Self { dir }
    }

    fn small() -> Self {
        Self::new(
            r#"{
                "out": "out",
                "sampling": { "n_train": 40, "n_full": 8, "n_reduced": 8, "seed": 5 },
                "optimizer": { "starts": 2, "budget": 60 }
            }"#,
        )
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn run(&self, args: &[&str]) -> Output {
        bin()
            .arg("--config")
            .arg(self.dir.path().join("config.json"))
            .arg("--out")
            .arg(self.out())
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    }
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn fail_line(out: &Output) -> String {
    assert!(!out.status.success());
    assert_ne!(out.status.code(), Some(0));
    let err = stderr(out);
    let line = err
        .lines()
        .find(|l| l.starts_with("error:"))
        .unwrap_or_else(|| panic!("no diagnostic in {err:?}"));
    line.to_string()
}

fn index_rows(dir: &Path) -> Vec<Vec<f64>> {
    let mut reader = csv::Reader::from_path(dir.join("index.csv")).unwrap();
    reader
        .records()
        .map(|r| {
            r.unwrap()
                .iter()
                .skip(1)
                .map(|v| v.parse().unwrap())
                .collect()
        })
        .collect()
}

#[test]
fn zero_morph_reproduces_reference() {
    let ws = Workspace::small();
    let path = ws.out().join("zero.stl");
    ws.ok(&[
        "morph",
        "--mu",
        "0,0,0,0,0",
        "--output",
        path.to_str().unwrap(),
    ]);
    let morphed = load_stl(&std::fs::read(&path).unwrap()).unwrap();
    let reference = shapemanifold_cli::config::default_hull().unwrap();
    // the binary STL stores f32 coordinates
    let diff = (flatten(&morphed) - flatten(&reference)).amax();
    assert!(diff < 1e-6, "{diff}");
}

#[test]
fn out_of_bounds_morph_warns_and_writes() {
    let ws = Workspace::small();
    let out = bin()
        .arg("--config")
        .arg(ws.dir.path().join("config.json"))
        .arg("--out")
        .arg(ws.out())
        .args(["morph", "--mu", "5,0,0,0,0", "--format", "ascii"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("outside its bounds"));
    let text = std::fs::read(ws.out().join("morph/morphed.stl")).unwrap();
    assert!(text.starts_with(b"solid"));
    assert!(read_stl(&text).is_ok());
}

#[test]
fn missing_reference_names_the_path() {
    let ws = Workspace::new(r#"{ "reference": "does/not/exist.stl" }"#);
    let line = fail_line(&ws.run(&["morph", "--mu", "0,0,0,0,0"]));
    assert!(line.contains("exist.stl"), "{line}");
}

#[test]
fn wrong_parameter_count_is_rejected() {
    let ws = Workspace::small();
    let line = fail_line(&ws.run(&["morph", "--mu", "0,0"]));
    assert!(line.contains("dimension mismatch"), "{line}");
}

#[test]
fn downstream_stage_without_inputs_fails_cleanly() {
    let ws = Workspace::small();
    let line = fail_line(&ws.run(&["evaluate", "--sampling", "reduced"]));
    assert!(line.contains("build-manifold"), "{line}");
}

#[test]
fn corrupt_artifact_is_rejected() {
    let ws = Workspace::small();
    ws.ok(&["build-manifold"]);
    let pod = ws.out().join("manifold/geometry_pod.bin");
    let mut bytes = std::fs::read(&pod).unwrap();
    bytes[8] = bytes[8].wrapping_add(7);
    std::fs::write(&pod, &bytes).unwrap();
    let line = fail_line(&ws.run(&["evaluate", "--sampling", "reduced"]));
    assert!(line.contains("version"), "{line}");

    bytes[0] = b'X';
    std::fs::write(&pod, &bytes).unwrap();
    let line = fail_line(&ws.run(&["evaluate", "--sampling", "reduced"]));
    assert!(line.contains("magic"), "{line}");
}

#[test]
fn tiny_training_set_warns() {
    let ws = Workspace::new(r#"{ "sampling": { "n_train": 2 } }"#);
    let out = ws.ok(&["build-manifold"]);
    assert!(stderr(&out).contains("only 2 training geometries"));
    assert!(ws.out().join("manifold/reduced_space.json").exists());
}

#[test]
fn single_sample_database() {
    let ws = Workspace::small();
    ws.ok(&["evaluate", "--sampling", "full", "-n", "1"]);
    let rows = index_rows(&ws.out().join("db_full"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].len(), 6);
}

#[test]
fn identical_databases_decay_identically() {
    let ws = Workspace::small();
    ws.ok(&["evaluate", "--sampling", "full"]);
    let db = ws.out().join("db_full");
    ws.ok(&[
        "compare-decay",
        "--full",
        db.to_str().unwrap(),
        "--reduced",
        db.to_str().unwrap(),
    ]);
    let mut reader = csv::Reader::from_path(ws.out().join("compare/decay_comparison.csv")).unwrap();
    let mut count = 0;
    for record in reader.records() {
        let r = record.unwrap();
        assert_eq!(r.get(1), r.get(3));
        assert_eq!(r.get(2), r.get(4));
        count += 1;
    }
    assert!(count > 0);
    let mut reader = csv::Reader::from_path(ws.out().join("compare/thresholds.csv")).unwrap();
    for record in reader.records() {
        let r = record.unwrap();
        assert_eq!(r.get(1), r.get(2));
    }
}

#[test]
fn empty_database_is_reported() {
    let ws = Workspace::small();
    ws.ok(&["evaluate", "--sampling", "full", "-n", "2"]);
    let empty = ws.dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    std::fs::write(
        empty.join("index.csv"),
        "sample_id,mu_0,mu_1,mu_2,mu_3,mu_4,objective\n",
    )
    .unwrap();
    std::fs::write(
        empty.join("fields.bin"),
        shapemanifold::artifact::encode_vectors(&[]).unwrap(),
    )
    .unwrap();
    let db = ws.out().join("db_full");
    let line = fail_line(&ws.run(&[
        "compare-decay",
        "--full",
        db.to_str().unwrap(),
        "--reduced",
        empty.to_str().unwrap(),
    ]));
    assert!(line.contains("empty"), "{line}");
}

#[test]
fn predict_at_training_sample_matches_database() {
    let ws = Workspace::small();
    ws.ok(&["build-manifold"]);
    ws.ok(&["evaluate", "--sampling", "reduced"]);
    ws.ok(&["build-rom"]);
    let rows = index_rows(&ws.out().join("db_reduced"));
    for row in rows.iter().take(3) {
        let (mu, objective) = row.split_at(row.len() - 1);
        let mu: Vec<String> = mu.iter().map(|v| format!("{v:e}")).collect();
        let out = ws.ok(&["predict", "--mu", &mu.join(",")]);
        let json: serde_json::Value = serde_json::from_slice(
            &std::fs::read(ws.out().join("prediction/prediction.json")).unwrap(),
        )
        .unwrap();
        let predicted = json["objective"].as_f64().unwrap();
        assert!(
            (predicted - objective[0]).abs() <= 1e-8 * objective[0].abs().max(1.0),
            "{predicted} vs {}",
            objective[0]
        );
        let printed: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
        assert_eq!(printed, predicted);
    }
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let ws = Workspace::small();
    ws.ok(&["run"]);
    for file in [
        "manifold/geometry_pod.bin",
        "manifold/reduced_space.json",
        "manifold/decay.csv",
        "manifold/alpha.csv",
        "manifold/params.csv",
        "db_full/index.csv",
        "db_full/fields.bin",
        "db_reduced/index.csv",
        "compare/decay_comparison.csv",
        "compare/thresholds.csv",
        "rom/basis.bin",
        "rom/rom.json",
        "optimize/trace.csv",
        "optimize/optimal.stl",
        "optimize/result.json",
    ] {
        assert!(ws.out().join(file).exists(), "missing {file}");
    }
}

#[test]
fn help_lists_commands() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in [
        "morph",
        "build-manifold",
        "evaluate",
        "compare-decay",
        "build-rom",
        "predict",
        "optimize",
    ] {
        assert!(text.contains(cmd), "{cmd}");
    }
}
