use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use handcontact::contact::ContactMap;
use handcontact::HandParams;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_handcontact"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn arg(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "status {:?}\nstderr: {}",
        output.status,
        String::from_utf8_lossy(&output.stderr)
    );
}

/// A one-grasp dataset with zero perturbation and a short optimizer budget.
fn fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let config = dir.join("run.toml");
    std::fs::write(
        &config,
        "[optim]\niterations = 30\n\n[perturb]\nsigma_theta = 0.0\nsigma_translation = 0.0\nsigma_rotation = 0.0\n",
    )
    .unwrap();
    let dataset = dir.join("dataset");
    assert_success(&run(&["perturb", "--grasps", "1", "--config", arg(&config), "--out", arg(&dataset)]));
    (config, dataset)
}

#[test]
fn zero_sigma_perturbation_reproduces_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let (_, dataset) = fixture(dir.path());
    let sample = dataset.join("samples/sample_0000");
    assert_eq!(
        HandParams::load(&sample.join("true_params.json")).unwrap(),
        HandParams::load(&sample.join("perturbed_params.json")).unwrap()
    );
    assert!(dataset.join("run_manifest.json").exists());
}

#[test]
fn fixed_point_optimization_stays_put() {
    let dir = tempfile::tempdir().unwrap();
    let (config, dataset) = fixture(dir.path());
    let sample = dataset.join("samples/sample_0000");
    let truth = sample.join("true_params.json");
    let out = dir.path().join("opt");
    let reference = format!("reference:{}", truth.display());
    assert_success(&run(&[
        "optimize",
        "--object",
        arg(&dataset.join("objects/object_0000.obj")),
        "--init",
        arg(&truth),
        "--targets",
        &reference,
        "--config",
        arg(&config),
        "--out",
        arg(&out),
    ]));
    for name in [
        "refined_params.json",
        "refined_hand.obj",
        "loss_trace.csv",
        "contact_before_object.json",
        "contact_after_hand.json",
        "loss.json",
        "run_manifest.json",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }
    let refined = HandParams::load(&out.join("refined_params.json")).unwrap();
    let start = HandParams::load(&truth).unwrap();
    let moved = (refined.to_vector() - start.to_vector()).amax();
    assert!(moved < 0.05, "parameters moved by {moved}");
    let trace = std::fs::read_to_string(out.join("loss_trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("iteration,loss"));
}

#[test]
fn file_object_only_and_csv_targets_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let (config, dataset) = fixture(dir.path());
    let sample = dataset.join("samples/sample_0000");
    let object_map = sample.join("target_object_contact.json");
    let hand_map = sample.join("target_hand_contact.json");
    let object_csv = dir.path().join("object_contact.csv");
    ContactMap::load(&object_map).unwrap().save_csv(&object_csv).unwrap();
    let sources = [
        format!("file:{},{}", object_map.display(), hand_map.display()),
        format!("object-only:{}", object_map.display()),
        format!("object-only:{}", object_csv.display()),
    ];
    for (k, source) in sources.iter().enumerate() {
        let out = dir.path().join(format!("out{k}"));
        assert_success(&run(&[
            "optimize",
            "--object",
            arg(&dataset.join("objects/object_0000.obj")),
            "--init",
            arg(&sample.join("perturbed_params.json")),
            "--targets",
            source,
            "--config",
            arg(&config),
            "--restarts",
            "2",
            "--object-points",
            "200",
            "--out",
            arg(&out),
        ]));
        let after = ContactMap::load(&out.join("contact_after_object.json")).unwrap();
        assert_eq!(after.len(), ContactMap::load(&object_map).unwrap().len());
    }
}

#[test]
fn missing_inputs_exit_with_status_two_and_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no_such_object.obj");
    let output = run(&[
        "optimize",
        "--object",
        arg(&missing),
        "--init",
        "init.json",
        "--targets",
        "reference:init.json",
        "--out",
        arg(&dir.path().join("out")),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("no_such_object.obj"));

    let output = run(&["evaluate", "--dataset", arg(&dir.path().join("nowhere")), "--refined", "r", "--out", "o"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("nowhere"));
}

#[test]
fn output_directory_requires_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("hand");
    assert_success(&run(&["export-hand", "--out", arg(&out)]));
    let again = run(&["export-hand", "--out", arg(&out)]);
    assert_eq!(again.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    assert_success(&run(&["export-hand", "--out", arg(&out), "--force"]));
}

#[test]
fn malformed_targets_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (_, dataset) = fixture(dir.path());
    let output = run(&[
        "optimize",
        "--object",
        arg(&dataset.join("objects/object_0000.obj")),
        "--init",
        arg(&dataset.join("samples/sample_0000/true_params.json")),
        "--targets",
        "guess:anything",
        "--out",
        arg(&dir.path().join("out")),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("--targets"));
}

#[test]
fn evaluating_the_truth_gives_zero_mpjpe() {
    let dir = tempfile::tempdir().unwrap();
    let (_, dataset) = fixture(dir.path());
    let truth = dataset.join("samples/sample_0000/true_params.json");
    let out = dir.path().join("eval");
    let output = run(&[
        "evaluate",
        "--object",
        arg(&dataset.join("objects/object_0000.obj")),
        "--truth",
        arg(&truth),
        "--pred",
        arg(&truth),
        "--out",
        arg(&out),
    ]);
    assert_success(&output);
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "after");
    assert_eq!(row[3], "0.000000");
    assert!(out.join("report.md").exists() && out.join("report.json").exists());
}

#[test]
fn dataset_evaluation_reads_refined_directory() {
    let dir = tempfile::tempdir().unwrap();
    let (_, dataset) = fixture(dir.path());
    let refined = dir.path().join("refined");
    std::fs::create_dir(&refined).unwrap();
    std::fs::copy(dataset.join("samples/sample_0000/true_params.json"), refined.join("sample_0000.json")).unwrap();
    let out = dir.path().join("eval");
    assert_success(&run(&["evaluate", "--dataset", arg(&dataset), "--refined", arg(&refined), "--out", arg(&out)]));
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn features_cover_sampled_object_points_and_every_hand_vertex() {
    let dir = tempfile::tempdir().unwrap();
    let (_, dataset) = fixture(dir.path());
    let out = dir.path().join("features");
    assert_success(&run(&[
        "features",
        "--object",
        arg(&dataset.join("objects/object_0000.obj")),
        "--init",
        arg(&dataset.join("samples/sample_0000/true_params.json")),
        "--samples",
        "64",
        "--seed",
        "3",
        "--out",
        arg(&out),
    ]));
    let csv = std::fs::read_to_string(out.join("features.csv")).unwrap();
    let object_rows = csv.lines().skip(1).filter(|l| l.split(',').nth(1) == Some("0")).count();
    assert_eq!(object_rows, 64);
    let hand_vertices = handcontact::synthetic::synthetic_hand().n_vertices();
    assert_eq!(csv.lines().count(), 1 + 64 + hand_vertices);
}
