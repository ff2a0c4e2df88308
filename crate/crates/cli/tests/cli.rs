use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn entk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entk")).args(args).arg("--output-dir").arg(dir).env_remove("ENTK_THREADS").output().expect("run entk")
}

fn write_images(path: &Path, n: usize) {
    let rows: Vec<String> =
        (0..n).map(|i| (0..16).map(|p| format!("{}", ((i * 16 + p) as f64 * 0.37).sin())).collect::<Vec<_>>().join(",")).collect();
    fs::write(path, rows.join("\n") + "\n").unwrap();
}

fn read_tensor(path: &Path) -> (Vec<usize>, Vec<f64>) {
    let t = entk_core::data::Tensor::load(path).unwrap();
    (t.dims, t.data)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gram_of_three_inputs_is_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("x.csv");
    write_images(&inputs, 3);
    let out = entk(dir.path(), &["gram", "--inputs", inputs.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["gram_ntk.entk", "gram_nngp.entk"] {
        let (dims, data) = read_tensor(&dir.path().join(name));
        assert_eq!(dims, vec![3, 3]);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(data[i * 3 + j], data[j * 3 + i]);
            }
        }
    }
    let meta = json(&dir.path().join("gram.json"));
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert!(!dir.path().join("gram.ckpt").exists());
}

#[test]
fn resumed_and_restarted_grams_match() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("x.csv");
    write_images(&inputs, 4);
    let x = inputs.to_str().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(entk(&a, &["gram", "--inputs", x, "--arch", "classifier_cnn"]).status.success());

    let out = entk(&b, &["gram", "--inputs", x, "--arch", "classifier_cnn", "--max-rows", "2"]);
    assert!(out.status.success());
    assert!(b.join("gram.ckpt").exists() && !b.join("gram_ntk.entk").exists());
    let out = entk(&b, &["gram", "--inputs", x, "--arch", "classifier_cnn"]);
    assert!(out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert_eq!(fs::read(a.join("gram_ntk.entk")).unwrap(), fs::read(b.join("gram_ntk.entk")).unwrap());

    entk(&b, &["gram", "--inputs", x, "--arch", "classifier_cnn", "--max-rows", "1"]);
    let mut text = fs::read_to_string(b.join("gram.ckpt")).unwrap();
    text.push_str("1 zz\n");
    fs::write(b.join("gram.ckpt"), text).unwrap();
    let out = entk(&b, &["gram", "--inputs", x, "--arch", "classifier_cnn"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: discarding checkpoint"));
    assert_eq!(fs::read(a.join("gram_nngp.entk")).unwrap(), fs::read(b.join("gram_nngp.entk")).unwrap());
}

#[test]
fn predict_runs_with_one_training_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = entk(dir.path(), &["predict", "--dataset", "molecules", "--train-sizes", "1,5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&dir.path().join("predict.json"));
    let results = doc["results"].as_array().unwrap();
    assert_eq!(results.len(), 4);
    for r in results {
        for key in ["train_size", "kernel", "metric", "value", "ridge", "jitter"] {
            assert!(r.get(key).is_some(), "missing {key}");
        }
        assert_eq!(r["metric"], "mae");
        assert!(r["value"].as_f64().unwrap().is_finite());
    }
    for key in ["command", "version", "config_hash", "seed", "dataset"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn predict_on_image_files_reports_rotation_invariance() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("x.csv");
    write_images(&images, 8);
    let labels = dir.path().join("y.csv");
    fs::write(&labels, "0\n1\n2\n0\n1\n2\n0\n1\n").unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "[predict]\ndataset = 'images'\nimages = '{}'\nlabels = '{}'\nn_train = 5\ntrain_sizes = [1, 5]\ninvariance = true\n",
            images.display(),
            labels.display()
        ),
    )
    .unwrap();
    let out = entk(dir.path(), &["predict", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&dir.path().join("predict.json"));
    let g = &doc["invariance"]["gcnn"];
    assert_eq!(g["argmax_unchanged"], true);
    assert!(g["max_value_change"].as_f64().unwrap() < 1e-10);
    assert_eq!(doc["results"][0]["metric"], "accuracy");
}

#[test]
fn mc_rows_are_sorted_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["mc", "--widths", "16,8", "--samples", "4"];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(entk(&a, &args).status.success());
    assert!(entk(&b, &args).status.success());
    let csv = fs::read_to_string(a.join("mc.csv")).unwrap();
    assert_eq!(csv, fs::read_to_string(b.join("mc.csv")).unwrap());
    let widths: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(widths, ["8", "8", "16", "16"]);
}

#[test]
fn verify_passes_by_default_and_flags_zero_padding() {
    let dir = tempfile::tempdir().unwrap();
    let out = entk(dir.path(), &["verify", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&dir.path().join("verify.json"));
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["thm4"]["gaps"].as_array().unwrap().len(), 9);

    let out = entk(dir.path(), &["verify", "--trials", "1", "--padding", "zero"]);
    assert_eq!(out.status.code(), Some(1));
    let doc = json(&dir.path().join("verify.json"));
    assert!(doc["thm6"].as_array().unwrap().iter().all(|r| r["conforming"] == false));
}

#[test]
fn featurize_writes_padded_features() {
    let dir = tempfile::tempdir().unwrap();
    let xyz = dir.path().join("m.xyz");
    fs::write(&xyz, "3\n-1.5\nO 0 0 0\nH 0.76 0.59 0\nH -0.76 0.59 0\n2\n-0.5\nH 0 0 0\nF 0 0 0.92\n").unwrap();
    let out = entk(dir.path(), &["featurize", "--xyz", xyz.to_str().unwrap(), "--grid-band", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (dims, data) = read_tensor(&dir.path().join("features.entk"));
    assert_eq!(dims[..3], [2, 3, 10]);
    // the hydrogen fluoride has no third atom
    let per_atom = dims[2] * dims[3];
    let third = (dims[1] + 2) * per_atom;
    assert!(data[third..third + per_atom].iter().all(|&v| v == 0.0));
    let (_, e) = read_tensor(&dir.path().join("energies.entk"));
    assert_eq!(e, vec![-1.5, -0.5]);
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = entk(dir.path(), &["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(json(&dir.path().join("selftest.json"))["pass"], true);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[mc]\nwidht = [8]\n").unwrap();
    assert_eq!(entk(dir.path(), &["mc", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(entk(dir.path(), &["gram", "--inputs", "/nonexistent.csv"]).status.code(), Some(2));
    assert_eq!(entk(dir.path(), &["gram"]).status.code(), Some(2));

    let inputs = dir.path().join("nan.csv");
    fs::write(&inputs, format!("NaN{}\n", ",0".repeat(15))).unwrap();
    assert_eq!(entk(dir.path(), &["gram", "--inputs", inputs.to_str().unwrap()]).status.code(), Some(3));
}
