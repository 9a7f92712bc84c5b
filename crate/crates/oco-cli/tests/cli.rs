use std::process::Command;

use oco_cli::csv::{format_csv, HEADER};
use oco_cli::runner::csv_name;
use oco_cli::{run_experiment, ExperimentConfig, RunOptions};

fn config(learner: &str, env: &str, run: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&format!("[learner]\n{learner}\n[environment]\n{env}\n[run]\n{run}\n")).unwrap()
}

#[test]
fn osd_on_guessing_game_writes_one_row_per_round() {
    let cfg = config(
        "name = \"osd\"\nstepsize = \"decaying\"\ndiameter = 2.0\nlipschitz = 2.0",
        "name = \"guessing-game\"",
        "horizon = 100\nname = \"osd\"",
    );
    let dir = tempfile::tempdir().unwrap();
    let summary = run_experiment(&cfg, &RunOptions { master_seed: None, out_dir: Some(dir.path().to_path_buf()) }).unwrap();
    let text = std::fs::read_to_string(dir.path().join(csv_name("osd", 0))).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 101);
    assert_eq!(lines[0], HEADER);
    let rows = &summary.seeds[0].rows;
    // squared losses are nonnegative, so both cumulative columns never decrease
    for w in rows.windows(2) {
        assert!(w[1].cum_loss >= w[0].cum_loss);
        assert!(w[1].competitor_cum_loss >= w[0].competitor_cum_loss);
    }
    assert_eq!(text, format_csv(rows));
}

#[test]
fn ftl_on_failure_stream_loses_almost_every_round() {
    let cfg = config("name = \"ftl\"\nlo = [-1.0]\nhi = [1.0]", "name = \"ftl-failure\"", "horizon = 50\ncompetitor = \"fixed\"\nu = [0.0]");
    let summary = run_experiment(&cfg, &RunOptions::default()).unwrap();
    assert!(summary.seeds[0].final_regret >= 48.0, "{}", summary.seeds[0].final_regret);
}

#[test]
fn kt_moves_towards_absolute_loss_minimizer() {
    let cfg = config("name = \"kt\"", "name = \"fixed-convex\"\nloss = \"absolute\"\ntarget = [10.0]", "horizon = 100\ncompetitor = \"none\"");
    let summary = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let first = summary.seeds[0].predictions.iter().position(|x| x[0] >= 5.0).unwrap();
    assert!(first < 10, "reached 5 at round {}", first + 1);
}

#[test]
fn runs_are_byte_identical_across_repeats_and_thread_counts() {
    let cfg = config(
        "name = \"adahedge\"",
        "name = \"switching\"\ndim = 4\nblock = 7",
        "horizon = 300\nseeds = 6\nmaster_seed = 99\nbound = \"adahedge\"",
    );
    let csvs = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let summary = pool.install(|| run_experiment(&cfg, &RunOptions::default())).unwrap();
        summary.seeds.iter().map(|s| format_csv(&s.rows)).collect::<Vec<_>>()
    };
    let a = csvs(1);
    assert_eq!(a, csvs(1));
    assert_eq!(a, csvs(4));
    // distinct seeds give distinct games
    assert_ne!(a[0], a[1]);
}

#[test]
fn seed_override_changes_the_stream() {
    let cfg = config("name = \"ftl\"", "name = \"guessing-game\"", "horizon = 20\nmaster_seed = 1");
    let base = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let same = run_experiment(&cfg, &RunOptions { master_seed: Some(1), out_dir: None }).unwrap();
    let other = run_experiment(&cfg, &RunOptions { master_seed: Some(2), out_dir: None }).unwrap();
    assert_eq!(base.seeds[0].rows, same.seeds[0].rows);
    assert_ne!(base.seeds[0].rows, other.seeds[0].rows);
}

#[test]
fn adagrad_zero_gradients_give_zero_bound() {
    let cfg = config(
        "name = \"adagrad\"",
        "name = \"fixed-convex\"\nloss = \"linear\"\ntarget = [0.0, 0.0]",
        "horizon = 10\nbound = \"adagrad\"",
    );
    let summary = run_experiment(&cfg, &RunOptions::default()).unwrap();
    assert!(summary.seeds[0].rows.iter().all(|r| r.bound == Some(0.0) && r.regret == 0.0));
    assert!(summary.passed);
}

#[test]
fn config_errors_are_reported() {
    let bad = ExperimentConfig::parse("[learner]\nname = \"osd\"\n[environment]\nname = \"switching\"\ndim = 3\n[run]\nhorizon = 5\ncompetitor = \"best-on-grid\"\n")
        .unwrap();
    assert!(run_experiment(&bad, &RunOptions::default()).is_err());
    let mismatch = config("name = \"eg\"\ndim = 3", "name = \"switching\"\ndim = 4", "horizon = 5");
    assert!(run_experiment(&mismatch, &RunOptions::default()).is_err());
    let missing = config("name = \"ons\"", "name = \"ftl-failure\"", "horizon = 5");
    assert!(run_experiment(&missing, &RunOptions::default()).is_err());
}

fn oco(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_oco")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    };
    let good = write(
        "good.toml",
        "[learner]\nname = \"ftl\"\n[environment]\nname = \"guessing-game\"\n[run]\nhorizon = 200\nseeds = 3\nname = \"g\"\nbound = \"ftl-guessing\"\n",
    );
    let violated = write(
        "bad-bound.toml",
        "[learner]\nname = \"ftl\"\nlo = [-1.0]\nhi = [1.0]\n[environment]\nname = \"ftl-failure\"\n[run]\nhorizon = 200\nbound = \"sqrt-t\"\nbound_coef = 1.0\n",
    );
    let broken = write("broken.toml", "[learner]\nname = \"ftl\"\nwobble = 1\n[environment]\nname = \"ftl-failure\"\n[run]\nhorizon = 5\n");
    let out = dir.path().join("csv");
    let (code, stdout) = oco(&["run", &good, "--out", out.to_str().unwrap(), "--seed", "4"]);
    assert_eq!(code, 0, "{stdout}");
    for i in 0..3 {
        assert!(out.join(csv_name("g", i)).exists());
    }
    assert_eq!(oco(&["bounds", &good]).0, 0);
    assert_eq!(oco(&["bounds", &violated]).0, 1);
    assert_eq!(oco(&["run", &broken, "--out", out.to_str().unwrap()]).0, 2);
    assert_eq!(oco(&["bounds", "/nonexistent/config.toml"]).0, 2);
    assert_eq!(oco(&["accept", "no-such-suite"]).0, 2);
    let (code, stdout) = oco(&["accept", "lambert"]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("[PASS] 17 lambert"));
    let (code, stdout) = oco(&["accept", "list"]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), 18);
}
