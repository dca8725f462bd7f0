//! End-to-end tests of the `fieldmosaic` binary: the synth -> run -> eval ->
//! stats flow and the exit-code contract (0 success, 1 usage/config, 2 data
//! validation, 3 topology).

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fieldmosaic"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, labels: &Path, out_dir: &Path, provider: &str) -> std::path::PathBuf {
    let config = serde_json::json!({
        "raster": labels,
        "tile_size": 128,
        "overlap": 32,
        "provider": provider,
        "refine": {"min_area_px": 4},
        "merge": {"min_mosaic_area_px": 4},
        "vectorize": {"min_area_ha": 0.02, "min_hole_ha": 0.005},
        "output_dir": out_dir,
        "workers": 1,
        "seed": 3
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

#[test]
fn synth_run_eval_stats_flow() {
    let dir = tempfile::tempdir().unwrap();
    let synth_dir = dir.path().join("syn24");
    let out = run(&[
        "synth",
        "--out",
        synth_dir.to_str().unwrap(),
        "--seed",
        "3",
        "--width",
        "192",
        "--height",
        "192",
        "--sites",
        "15",
        "--fraction",
        "0.1",
        "--tile-size",
        "128",
        "--overlap",
        "32",
    ]);
    assert_code(&out, 0);
    for name in ["labels.bin", "labels.json", "ground_truth.geojson", "predictions.json"] {
        assert!(synth_dir.join(name).exists(), "missing {name}");
    }

    // full pipeline over the file provider
    let run_dir = dir.path().join("run");
    let config = write_config(
        dir.path(),
        &synth_dir.join("labels.json"),
        &run_dir,
        &format!("file:{}", synth_dir.join("predictions.json").display()),
    );
    let out = run(&["run", "--config", config.to_str().unwrap()]);
    assert_code(&out, 0);
    assert!(run_dir.join("fields.geojson").exists());
    assert!(run_dir.join("manifest.json").exists());

    // evaluation of the pipeline output against the ground truth
    let eval_out = dir.path().join("eval.json");
    let out = run(&[
        "eval",
        "--gt-labels",
        synth_dir.join("labels.json").to_str().unwrap(),
        "--pred-geojson",
        run_dir.join("fields.geojson").to_str().unwrap(),
        "--out",
        eval_out.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&eval_out).unwrap()).unwrap();
    let map50 = report["map50"].as_f64().unwrap();
    assert!(map50 > 0.9, "noiseless oracle should evaluate near-perfectly, got {map50}");
    assert_eq!(report["per_threshold"].as_array().unwrap().len(), 10);

    // size statistics of the final layer
    let out = run(&[
        "stats",
        "--geojson",
        run_dir.join("fields.geojson").to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let stats: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("stats prints JSON");
    assert_eq!(stats["edges_ha"].as_array().unwrap().len(), 7);
    assert!(stats["total_fields"].as_u64().unwrap() > 0);
}

#[test]
fn plan_prints_the_expected_windows() {
    let out = run(&[
        "plan",
        "--width",
        "1024",
        "--height",
        "1024",
        "--tile-size",
        "512",
        "--overlap",
        "128",
    ]);
    assert_code(&out, 0);
    let plan: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(plan["tiles"].as_array().unwrap().len(), 9);
}

#[test]
fn vectorize_subcommand_round_trips_labels() {
    let dir = tempfile::tempdir().unwrap();
    let synth_dir = dir.path().join("syn");
    assert_code(
        &run(&[
            "synth",
            "--out",
            synth_dir.to_str().unwrap(),
            "--seed",
            "9",
            "--width",
            "128",
            "--height",
            "128",
            "--sites",
            "8",
        ]),
        0,
    );
    let geojson = dir.path().join("fields.geojson");
    let out = run(&[
        "vectorize",
        "--labels",
        synth_dir.join("labels.json").to_str().unwrap(),
        "--out",
        geojson.to_str().unwrap(),
        "--min-area-ha",
        "0.0",
    ]);
    assert_code(&out, 0);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&geojson).unwrap()).unwrap();
    assert!(!doc["features"].as_array().unwrap().is_empty());
}

#[test]
fn usage_errors_exit_1() {
    assert_code(&run(&["plan"]), 1); // neither raster nor extent
    assert_code(&run(&["definitely-not-a-command"]), 1);
    assert_code(&run(&["run", "--config", "/nonexistent/config.json"]), 1);
}

#[test]
fn workers_env_var_is_consulted_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let synth_dir = dir.path().join("syn");
    assert_code(
        &run(&[
            "synth",
            "--out",
            synth_dir.to_str().unwrap(),
            "--width",
            "96",
            "--height",
            "96",
            "--sites",
            "5",
        ]),
        0,
    );
    let config = write_config(
        dir.path(),
        &synth_dir.join("labels.json"),
        &dir.path().join("out"),
        "synth:sites=5,fraction=0.1,seed=0",
    );
    // the env var only applies when the config leaves workers automatic
    let text = std::fs::read_to_string(&config).unwrap().replace("\"workers\": 1", "\"workers\": 0");
    std::fs::write(&config, text).unwrap();
    // a valid value is accepted
    let out = bin()
        .args(["run", "--config", config.to_str().unwrap()])
        .env("FIELDMOSAIC_WORKERS", "2")
        .output()
        .unwrap();
    assert_code(&out, 0);
    // a garbage value is a config error
    let out = bin()
        .args(["run", "--config", config.to_str().unwrap()])
        .env("FIELDMOSAIC_WORKERS", "lots")
        .output()
        .unwrap();
    assert_code(&out, 1);
}

#[test]
fn config_errors_exit_1_before_stages() {
    let dir = tempfile::tempdir().unwrap();
    let synth_dir = dir.path().join("syn");
    assert_code(
        &run(&[
            "synth",
            "--out",
            synth_dir.to_str().unwrap(),
            "--width",
            "96",
            "--height",
            "96",
            "--sites",
            "5",
        ]),
        0,
    );
    let out_dir = dir.path().join("out");
    let config = write_config(
        dir.path(),
        &synth_dir.join("labels.json"),
        &out_dir,
        "file:/nonexistent/predictions.json",
    );
    let out = run(&["run", "--config", config.to_str().unwrap()]);
    assert_code(&out, 1);
    assert!(!out_dir.exists(), "no stage may run on config errors");
}

#[test]
fn data_validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    // Prediction file whose RLE does not sum to the window area.
    let preds = serde_json::json!({
        "tile_size": 8,
        "overlap": 0,
        "tiles": [{
            "tile_index": 0,
            "window": {"x0": 0, "y0": 0, "w": 8, "h": 8},
            "instances": [{"rle": [63], "bbox": [0, 0, 0, 0], "score": 0.5, "area_px": 0}]
        }]
    });
    let pred_path = dir.path().join("bad.json");
    std::fs::write(&pred_path, preds.to_string()).unwrap();

    let synth_dir = dir.path().join("syn");
    assert_code(
        &run(&[
            "synth",
            "--out",
            synth_dir.to_str().unwrap(),
            "--width",
            "8",
            "--height",
            "8",
            "--sites",
            "2",
            "--tile-size",
            "8",
            "--overlap",
            "0",
        ]),
        0,
    );
    let config = serde_json::json!({
        "raster": synth_dir.join("labels.json"),
        "tile_size": 8,
        "overlap": 0,
        "provider": format!("file:{}", pred_path.display()),
        "output_dir": dir.path().join("out"),
    });
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, config.to_string()).unwrap();
    let out = run(&["run", "--config", config_path.to_str().unwrap()]);
    assert_code(&out, 2);
}
