use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use alseg::io::{self, Matrix, SceneSpec};
use alseg::selection::{fds_select, rank_candidates, SelectionConfig, Strategy};
use alseg::uncertainty::{default_levels, score_hmmu};
use alseg::{FeatureField, PointCloud, ProbabilityField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn alseg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alseg"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = alseg(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn failure(dir: &Path, args: &[&str]) -> String {
    let out = alseg(dir, args);
    assert!(!out.status.success(), "{args:?} should fail");
    let err = String::from_utf8(out.stderr).unwrap();
    let line = err.lines().find(|l| l.starts_with("alseg: error[")).unwrap_or_else(|| panic!("unstable prefix: {err}"));
    line.to_string()
}

fn scene(dir: &Path, name: &str, n: usize, seed: u64) -> PointCloud {
    let path = dir.join(name);
    ok(dir, &["gen", "--points", &n.to_string(), "--seed", &seed.to_string(), "--out", path.to_str().unwrap()]);
    io::load_ply(path).unwrap()
}

fn random_probs(rng: &mut ChaCha8Rng, n: usize, c: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(n * c);
    for _ in 0..n {
        let row: Vec<f32> = (0..c).map(|_| rng.gen::<f32>().powi(3)).collect();
        let s: f32 = row.iter().sum();
        out.extend(row.iter().map(|v| v / s));
    }
    out
}

#[test]
fn gen_is_deterministic_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--points", "50000", "--classes", "8", "--seed", "1", "--out", "a.ply"]);
    ok(d, &["gen", "--points", "50000", "--classes", "8", "--seed", "1", "--out", "b.ply"]);
    let a = fs::read(d.join("a.ply")).unwrap();
    assert_eq!(a, fs::read(d.join("b.ply")).unwrap());
    assert!(String::from_utf8_lossy(&a[..200]).contains("element vertex 50000\n"));
    assert_eq!(io::load_ply(d.join("a.ply")).unwrap().len(), 50_000);
    let err = failure(d, &["gen", "--points", "4", "--classes", "8", "--out", "c.ply"]);
    assert!(err.contains("infeasible spec"), "{err}");
    assert!(!d.join("c.ply").exists());
}

#[test]
fn score_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cloud = scene(d, "s.ply", 4000, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let probs = random_probs(&mut rng, cloud.len(), 8);
    io::save_matrix(&Matrix::f32(cloud.len(), 8, probs.clone()).unwrap(), d.join("p.mtx")).unwrap();
    let out = ok(d, &["score", "--cloud", "s.ply", "--probs", "p.mtx", "--strategy", "hmmu", "--out", "sc.mtx"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("effective config"));

    let field = ProbabilityField::new(probs.iter().map(|&v| f64::from(v)).collect(), 8).unwrap();
    let want = score_hmmu(&cloud, &field, &default_levels()).unwrap().fused;
    let got = io::load_matrix(d.join("sc.mtx")).unwrap();
    assert_eq!((got.rows, got.cols), (cloud.len(), 1));
    assert_eq!(got, Matrix::from_f64(want.len(), 1, &want).unwrap());

    let uniform = vec![0.125f32; cloud.len() * 8];
    io::save_matrix(&Matrix::f32(cloud.len(), 8, uniform).unwrap(), d.join("u.mtx")).unwrap();
    ok(d, &["score", "--cloud", "s.ply", "--probs", "u.mtx", "--out", "z.mtx"]);
    assert!(io::load_matrix(d.join("z.mtx")).unwrap().to_f64().iter().all(|&v| v == 0.0));

    let err = failure(d, &["score", "--cloud", "s.ply", "--probs", "p.mtx", "--strategy", "foo", "--out", "x.mtx"]);
    assert!(err.contains("random, entropy, lc, mmu, hmmu, hmmu_fds"), "{err}");
    io::save_matrix(&Matrix::f32(10, 8, vec![0.125; 80]).unwrap(), d.join("short.mtx")).unwrap();
    let err = failure(d, &["score", "--cloud", "s.ply", "--probs", "short.mtx", "--out", "x.mtx"]);
    assert!(err.contains("error[dimension-mismatch]"), "{err}");
}

#[test]
fn select_forced_suppression_and_zero_budget() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cloud = PointCloud::new(vec![[0.0; 3], [0.05, 0.0, 0.0]], vec![[0.5; 3]; 2], None).unwrap();
    io::save_ply(&cloud, d.join("two.ply")).unwrap();
    io::save_matrix(&Matrix::f32(2, 1, vec![0.1, 0.2]).unwrap(), d.join("s.mtx")).unwrap();
    io::save_matrix(&Matrix::f32(2, 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap(), d.join("f.mtx")).unwrap();
    let base = ["select", "--cloud", "two.ply", "--scores", "s.mtx", "--features", "f.mtx"];
    ok(d, &[&base[..], &["--k", "2", "--out", "sel.txt", "--report", "r.json"]].concat());
    assert_eq!(fs::read_to_string(d.join("sel.txt")).unwrap(), "0\n");
    let report: Value = serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["exhausted"], true);
    assert_eq!(report["suppressed"][0]["index"], 1);
    assert_eq!(report["suppressed"][0]["neighbor"], 0);

    ok(d, &[&base[..], &["--k", "0", "--out", "empty.txt"]].concat());
    assert_eq!(fs::read_to_string(d.join("empty.txt")).unwrap(), "");
    let err = failure(d, &[&base[..], &["--k", "-3", "--out", "neg.txt"]].concat());
    assert!(err.contains("non-negative"), "{err}");
}

/// Rechecks every selected pair against the raw inputs.
fn audit(cloud: &PointCloud, feats: &[f32], dim: usize, selected: &[usize], r: f64, tau: f64) -> bool {
    let row = |i: usize| -> Vec<f64> { feats[i * dim..(i + 1) * dim].iter().map(|&v| f64::from(v)).collect() };
    for (a, &i) in selected.iter().enumerate() {
        for &j in &selected[a + 1..] {
            let (p, q) = (cloud.positions[i], cloud.positions[j]);
            let dist = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
            let (fi, fj) = (row(i), row(j));
            let dot: f64 = fi.iter().zip(&fj).map(|(x, y)| x * y).sum();
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let sim = dot / (norm(&fi) * norm(&fj));
            if dist < r && sim > tau {
                return false;
            }
        }
    }
    true
}

#[test]
fn select_report_passes_an_independent_audit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cloud = scene(d, "s.ply", 3000, 5);
    let n = cloud.len();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let scores: Vec<f32> = (0..n).map(|_| rng.gen()).collect();
    let dim = 3;
    // two feature prototypes so many neighbors are near-duplicates
    let feats: Vec<f32> = (0..n)
        .flat_map(|i| {
            let base = if cloud.positions[i][2] > 1.0 { [1.0, 0.2, 0.0] } else { [0.0, 1.0, 0.3] };
            base.map(|v: f32| v + rng.gen_range(-0.1..0.1))
        })
        .collect();
    io::save_matrix(&Matrix::f32(n, 1, scores.clone()).unwrap(), d.join("s.mtx")).unwrap();
    io::save_matrix(&Matrix::f32(n, dim, feats.clone()).unwrap(), d.join("f.mtx")).unwrap();
    io::save_selection(&[3, 17, 99], d.join("labeled.txt")).unwrap();
    let args = [
        "select", "--cloud", "s.ply", "--scores", "s.mtx", "--features", "f.mtx", "--labeled", "labeled.txt",
        "--k", "200", "--fds-radius", "0.5", "--out", "sel.txt", "--report", "r.json",
    ];
    ok(d, &args);
    let selected = io::load_selection(d.join("sel.txt")).unwrap();
    assert_eq!(selected.len(), 200);
    assert!(![3, 17, 99].iter().any(|i| selected.contains(i)));
    assert!(audit(&cloud, &feats, dim, &selected, 0.5, 0.8));

    let report: Value = serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    let listed: Vec<usize> = report["selected"].as_array().unwrap().iter().map(|p| p["index"].as_u64().unwrap() as usize).collect();
    assert_eq!(listed, selected);
    for p in report["selected"].as_array().unwrap() {
        let i = p["index"].as_u64().unwrap() as usize;
        assert_eq!(p["score"].as_f64().unwrap(), f64::from(scores[i]));
    }
    let suppressed = report["suppressed"].as_array().unwrap();
    assert!(!suppressed.is_empty());
    for s in suppressed {
        assert!(s["distance"].as_f64().unwrap() < 0.5 && s["similarity"].as_f64().unwrap() > 0.8);
    }

    // the CLI selection is the library's
    let wide = |v: &[f32]| v.iter().map(|&x| f64::from(x)).collect::<Vec<f64>>();
    let unlabeled: Vec<usize> = (0..n).filter(|i| ![3, 17, 99].contains(i)).collect();
    let ranked = rank_candidates(&wide(&scores), &unlabeled, Strategy::HmmuFds.direction());
    let cfg = SelectionConfig { budget_k: 200, radius: 0.5, ..SelectionConfig::default() };
    let lib = fds_select(&ranked, &cloud, &FeatureField::new(wide(&feats), dim).unwrap(), &cfg).unwrap();
    assert_eq!(lib.selected, selected);

    ok(d, &[&args[..13], &["--out", "sel2.txt"]].concat());
    assert_eq!(fs::read(d.join("sel.txt")).unwrap(), fs::read(d.join("sel2.txt")).unwrap());
}

#[test]
fn simulate_writes_one_report_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d, "s.ply", 20_000, 2);
    ok(d, &["simulate", "--cloud", "s.ply", "--strategies", "hmmu_fds", "--seeds", "1", "--steps", "10", "--out", "r.json"]);
    let results: Value = serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    let runs = results["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 1);
    let its = runs[0]["iterations"].as_array().unwrap();
    assert_eq!(its.len(), 5);
    let counts: Vec<u64> = its.iter().map(|r| r["labeled_count"].as_u64().unwrap()).collect();
    assert_eq!(counts, vec![4, 8, 12, 16, 20]);
    assert_eq!(results["comparison"]["rows"][0]["strategy"], "hmmu_fds");

    let unlabeled = PointCloud { gt_labels: None, ..io::load_ply(d.join("s.ply")).unwrap() };
    io::save_ply(&unlabeled, d.join("bare.ply")).unwrap();
    let err = failure(d, &["simulate", "--cloud", "bare.ply", "--out", "x.json"]);
    assert!(err.contains("error[missing-labels]"), "{err}");
    let err = failure(d, &["simulate", "--cloud", "s.ply", "--strategies", "random,random", "--out", "x.json"]);
    assert!(err.contains("twice"), "{err}");
}

#[test]
fn config_file_and_flags_merge() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d, "s.ply", 2000, 4);
    fs::write(d.join("bad.json"), r#"{"fds": {"tau": 1.5}}"#).unwrap();
    let err = failure(d, &["simulate", "--cloud", "s.ply", "--config", "bad.json", "--out", "x.json"]);
    assert!(err.contains("error[config]") && err.contains("tau out of range [0,1]"), "{err}");
    let err = failure(d, &["simulate", "--cloud", "s.ply", "--tau", "2", "--out", "x.json"]);
    assert!(err.contains("tau out of range [0,1]"), "{err}");

    fs::write(d.join("cfg.json"), r#"{"budget": {"iterations": 2}, "trainer": {"steps": 5, "seed": 7}}"#).unwrap();
    ok(d, &["simulate", "--cloud", "s.ply", "--config", "cfg.json", "--iterations", "3", "--strategies", "mmu", "--out", "r.json"]);
    let results: Value = serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(results["config"]["budget"]["iterations"], 3);
    assert_eq!(results["config"]["trainer"]["steps"], 5);
    assert_eq!(results["seeds"], serde_json::json!([7]));
}

#[test]
fn eval_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cloud = PointCloud::new(vec![[0.0; 3]; 4], vec![[0.0; 3]; 4], Some(vec![0, 0, 1, 1])).unwrap();
    io::save_ply(&cloud, d.join("c.ply")).unwrap();
    let miou = |name: &str, m: Matrix| -> f64 {
        io::save_matrix(&m, d.join(name)).unwrap();
        ok(d, &["eval", "--pred", name, "--cloud", "c.ply", "--out", "m.json"]);
        let v: Value = serde_json::from_str(&fs::read_to_string(d.join("m.json")).unwrap()).unwrap();
        v["miou"].as_f64().unwrap()
    };
    assert_eq!(miou("gt.mtx", Matrix::u32(4, 1, vec![0, 0, 1, 1]).unwrap()), 1.0);
    let fixture = miou("p.mtx", Matrix::u32(4, 1, vec![0, 1, 1, 1]).unwrap());
    assert!((fixture - 7.0 / 12.0).abs() < 1e-12);
    let probs = Matrix::f32(4, 2, vec![0.9, 0.1, 0.4, 0.6, 0.2, 0.8, 0.3, 0.7]).unwrap();
    assert_eq!(miou("probs.mtx", probs), fixture);
    assert_eq!(miou("float.mtx", Matrix::f32(4, 1, vec![0.0, 1.0, 1.0, 1.0]).unwrap()), fixture);

    io::save_matrix(&Matrix::u32(3, 1, vec![0, 0, 1]).unwrap(), d.join("short.mtx")).unwrap();
    let err = failure(d, &["eval", "--pred", "short.mtx", "--cloud", "c.ply", "--out", "m.json"]);
    assert!(err.contains("dimension-mismatch"), "{err}");
    let err = failure(d, &["eval", "--pred", "missing.mtx", "--cloud", "c.ply", "--out", "m.json"]);
    assert!(err.contains("error[io]"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = alseg(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("alseg: error[usage]"));
    assert!(alseg(dir.path(), &["--help"]).status.success());
}

#[test]
fn library_scene_spec_matches_gen_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let from_cli = scene(dir.path(), "s.ply", 1500, 9);
    let lib = io::gen_synthetic(&SceneSpec { n_points: 1500, seed: 9, ..SceneSpec::default() }).unwrap();
    assert_eq!(io::encode_ply(&lib).unwrap(), fs::read_to_string(dir.path().join("s.ply")).unwrap());
    assert_eq!(from_cli.gt_labels, lib.gt_labels);
}
