use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus")
}

fn callfuse(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_callfuse"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn missing_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = callfuse(&["all"], &dir.path().join("nope.json"), dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // relative paths resolve against the copy's directory, which is empty
    let cfg = dir.path().join("config.json");
    std::fs::copy(corpus().join("config.json"), &cfg).unwrap();
    let out = callfuse(&["ingest"], &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"reference": 3}"#).unwrap();
    assert_eq!(callfuse(&["all"], &cfg, dir.path()).status.code(), Some(1));

    let out = callfuse(&["metrics", "--threshold", "1.5"], &corpus().join("config.json"), &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn stage_before_its_inputs_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = callfuse(&["fuse"], &corpus().join("config.json"), dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn all_equals_the_stages_in_sequence() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = corpus().join("config.json");
    assert!(callfuse(&["all"], &cfg, a.path()).status.success());
    for stage in ["extract-static", "ingest", "fuse", "metrics", "dataset", "train", "report"] {
        let out = callfuse(&[stage], &cfg, b.path());
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(v == &fb[k], "{} differs", k.display());
    }
}

#[test]
fn metrics_writes_one_document_per_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = corpus().join("config.json");
    for stage in ["extract-static", "ingest", "fuse", "metrics"] {
        assert!(callfuse(&[stage], &cfg, dir.path()).status.success());
    }
    for v in ["v3", "B1", "B2", "B3"] {
        let docs: BTreeSet<String> = std::fs::read_dir(dir.path().join("metrics").join(v))
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".json"))
            .collect();
        assert_eq!(docs, BTreeSet::from(["0_00.json", "0_05.json", "0_20.json", "0_30.json"].map(String::from)));
    }
}

#[test]
fn non_buggy_records_come_only_from_the_reference() {
    let dir = tempfile::tempdir().unwrap();
    assert!(callfuse(&["all"], &corpus().join("config.json"), dir.path()).status.success());
    let labels = std::fs::read_to_string(dir.path().join("datasets/labels.csv")).unwrap();
    let mut buggy = BTreeSet::new();
    let mut clean = BTreeSet::new();
    for line in labels.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let file = f[0].split(':').next().unwrap().to_string();
        match f[2] {
            "1" => {
                assert_ne!(f[3], "v3");
                buggy.insert((file, f[1].to_string()));
            }
            _ => {
                assert_eq!(f[3], "v3");
                clean.insert((file, f[1].to_string()));
            }
        }
    }
    assert!(buggy.is_disjoint(&clean));
    let rows = labels.lines().count() - 1;
    for name in ["0_00_s.csv", "0_00_h.csv", "0_00_s+h.csv"] {
        let data = std::fs::read_to_string(dir.path().join("datasets").join(name)).unwrap();
        assert_eq!(data.lines().count() - 1, rows, "{name}");
    }
}
