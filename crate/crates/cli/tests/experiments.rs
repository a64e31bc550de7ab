//! End-to-end runs of each experiment kind into temporary directories.

use polarlab_cli::{config::parse_config, run::run_experiment};
use std::fs;

fn run_into(dir: &tempfile::TempDir, text: &str) -> polarlab_cli::run::RunManifest {
    let config_text = format!("output_dir = \"{}\"\n{}", dir.path().display(), text);
    let config = parse_config(&config_text).expect("config parses");
    run_experiment(&config).expect("experiment runs")
}

#[test]
fn sweep_writes_the_documented_header() {
    let dir = tempfile::tempdir().unwrap();
    run_into(
        &dir,
        r#"
            experiment = "sweep"
            seed = 11
            [model]
            lambda = 0.5
            mu = 0.5
            [sweep]
            tau_grid = [0.3, 0.7]
            n_list = [4]
            runs = 50
            max_steps = 100000
        "#,
    );
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,tau,runs,polarized,p_hat,ci95,mean_steps,nontrivialized"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn pde_density_has_one_row_per_snapshot_node() {
    let dir = tempfile::tempdir().unwrap();
    run_into(
        &dir,
        r#"
            experiment = "pde"
            seed = 1
            [model]
            tau = 0.45
            lambda = 0.5
            mu = 0.5
            [pde]
            grid_size = 100
            t_max = 25
            snapshot_times = [0, 10, 20]
        "#,
    );
    let text = fs::read_to_string(dir.path().join("density.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,x,f");
    assert_eq!(text.lines().count() - 1, 3 * 101);
}

#[test]
fn martingale_reports_the_n4_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    run_into(
        &dir,
        r#"
            experiment = "martingale"
            seed = 5
            [model]
            tau = 0.5
            lambda = 0.5
            mu = 0.5
            [martingale]
            n = 4
            budget = 100000
        "#,
    );
    let value: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("counterexample.json")).unwrap())
            .unwrap();
    assert_eq!(value["found"], true);
    assert!(value["delta"].as_f64().unwrap() < -1e-9);
    assert_eq!(value["config"].as_array().unwrap().len(), 4);
}

#[test]
fn rule_check_flags_bounded_confidence() {
    let dir = tempfile::tempdir().unwrap();
    run_into(
        &dir,
        r#"
            experiment = "rule-check"
            seed = 5
            [model]
            tau = 0.5
            lambda = 0.5
            mu = 0.5
            [rule_check]
            rule = "bounded-confidence"
            samples = 2000
        "#,
    );
    let value: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("rule_report.json")).unwrap())
            .unwrap();
    assert_eq!(value["report"]["fixed_points_ok"], false);
    assert_eq!(value["report"]["order_invariance_ok"], true);
}

#[test]
fn force_check_reaches_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    run_into(
        &dir,
        r#"
            experiment = "force-check"
            seed = 9
            [model]
            tau = 0.6
            lambda = 0.5
            mu = 0.5
            [force_check]
            n = 5
            trials = 100
        "#,
    );
    let value: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("force_check.json")).unwrap())
            .unwrap();
    assert_eq!(value["all_reached"], true);
    assert_eq!(value["reached"], 100);
}

#[test]
fn multidim_emits_point_clouds() {
    let dir = tempfile::tempdir().unwrap();
    run_into(
        &dir,
        r#"
            experiment = "multidim"
            seed = 3
            [model]
            tau = 0.5
            lambda = 0.5
            mu = 0.5
            [multidim]
            n = 40
            domain = "hypercube"
            dim = 2
            max_rounds = 2000
            snapshot_every = 100
        "#,
    );
    let text = fs::read_to_string(dir.path().join("points.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "round,agent,x1,x2");
    // initial cloud + at least the final cloud
    assert!(text.lines().count() > 2 * 40);
}

#[test]
fn manifest_lists_every_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = run_into(
        &dir,
        r#"
            experiment = "simulate"
            seed = 21
            [model]
            tau = 0.4
            lambda = 0.5
            mu = 0.5
            [simulate]
            n = 10
        "#,
    );
    let mut on_disk: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    on_disk.sort();
    assert_eq!(manifest.output_files, on_disk);
    assert!(on_disk.contains(&"trajectory.csv".to_string()));
    assert!(on_disk.contains(&"manifest.json".to_string()));
}

#[test]
fn reruns_are_byte_identical() {
    let text = r#"
        experiment = "sweep"
        seed = 77
        [model]
        lambda = 0.5
        mu = 0.5
        [sweep]
        tau_grid = [0.4, 0.6]
        n_list = [6]
        runs = 100
        max_steps = 100000
    "#;
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_into(&dir_a, text);
    run_into(&dir_b, text);
    let a = fs::read(dir_a.path().join("sweep.csv")).unwrap();
    let b = fs::read(dir_b.path().join("sweep.csv")).unwrap();
    assert_eq!(a, b);
}
