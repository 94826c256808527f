//! End-to-end checks of the binary: file round trips, exit codes,
//! determinism across reruns and thread counts, and the seed override.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn domlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_domlab"))
        .current_dir(dir)
        .env_remove("DOMLAB_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn gen_then_solve_round_trips_the_ladder() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&domlab(
        dir.path(),
        &["gen", "--type", "dir", "--K", "10", "--c", "20", "-o", "dir.json"],
    ));
    let game: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("dir.json")).unwrap()).unwrap();
    assert_eq!(game["kind"], "dir");
    assert_eq!(game["K"], 10);
    assert_eq!(game["c"], 20.0);

    let solved = domlab(dir.path(), &["solve", "dir.json"]);
    assert_ok(&solved);
    let report = stdout_json(&solved);
    assert_eq!(report["L0"], 18);
    assert!((report["Delta"].as_f64().unwrap() - 0.05).abs() <= 1e-9);
    assert_eq!(report["dominance_solvable"], true);
    assert_eq!(report["survivor_profile"], serde_json::json!([10, 10]));
    // One action per iteration, alternating players starting with player 1.
    let rounds = report["rounds"].as_array().unwrap();
    assert_eq!(rounds.len(), 18);
    for (i, round) in rounds.iter().enumerate() {
        let removed = round["removed"].as_array().unwrap();
        assert_eq!(removed.len(), 1);
        assert_eq!(removed[0][0], (i % 2 + 1) as u64);
        assert_eq!(removed[0][1], (i / 2 + 1) as u64);
    }
}

#[test]
fn gen_lemons_defaults_match_the_documented_instance() {
    let dir = tempfile::tempdir().unwrap();
    let out = domlab(
        dir.path(),
        &["gen", "--type", "lemons", "--sellers", "4", "--c1", "1.5", "--c2", "1.5"],
    );
    assert_ok(&out);
    let game = stdout_json(&out);
    assert_eq!(game["qualities"], serde_json::json!([3.0, 4.0, 5.0, 6.0]));
    assert_eq!(
        game["price_set"],
        serde_json::json!([2.0, 3.0, 4.0, 5.0, 6.0])
    );
    assert_eq!(game["quality_noise_std"], 0.0);
}

#[test]
fn gen_random_is_deterministic_and_env_seed_overrides_the_default() {
    let dir = tempfile::tempdir().unwrap();
    let flags = ["gen", "--type", "random", "--actions", "3,4"];
    let default_run = domlab(dir.path(), &flags);
    assert_ok(&default_run);
    let with_flag = domlab(dir.path(), &[&flags[..], &["--seed", "9"][..]].concat());
    assert_ok(&with_flag);
    assert_ne!(default_run.stdout, with_flag.stdout);

    let with_env = Command::new(env!("CARGO_BIN_EXE_domlab"))
        .current_dir(dir.path())
        .env("DOMLAB_SEED", "9")
        .args(flags)
        .output()
        .unwrap();
    assert_ok(&with_env);
    assert_eq!(with_env.stdout, with_flag.stdout);

    // An explicit flag still beats the environment.
    let flag_beats_env = Command::new(env!("CARGO_BIN_EXE_domlab"))
        .current_dir(dir.path())
        .env("DOMLAB_SEED", "123")
        .args([&flags[..], &["--seed", "9"][..]].concat())
        .output()
        .unwrap();
    assert_ok(&flag_beats_env);
    assert_eq!(flag_beats_env.stdout, with_flag.stdout);
}

#[test]
fn simulate_reruns_and_thread_counts_leave_bytes_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&domlab(
        dir.path(),
        &["gen", "--type", "dir", "--K", "4", "--c", "8", "-o", "g.json"],
    ));
    let base = [
        "simulate",
        "--game",
        "g.json",
        "--algo",
        "exp3dh:b=0.2,beta=6",
        "--algo",
        "exp3",
        "--T",
        "400",
        "--noise-std",
        "0.1",
        "--seeds",
        "2",
    ];
    assert_ok(&domlab(dir.path(), &[&base[..], &["-o", "a"][..]].concat()));
    assert_ok(&domlab(dir.path(), &[&base[..], &["-o", "a"][..]].concat()));
    assert_ok(&domlab(
        dir.path(),
        &[&base[..], &["--jobs", "4", "-o", "b"][..]].concat(),
    ));

    let names: Vec<String> = {
        let mut list: Vec<String> = fs::read_dir(dir.path().join("a"))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n.ends_with(".csv"))
            .collect();
        list.sort();
        list
    };
    assert_eq!(names.len(), 4);
    assert!(names.contains(&"exp3__seed0.csv".to_string()));
    assert!(names.contains(&"exp3dh-b-0-2-beta-6__seed1.csv".to_string()));
    for name in &names {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between thread counts");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 4);
}

#[test]
fn construct_and_verify_agree_on_the_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&domlab(
        dir.path(),
        &["gen", "--type", "dir", "--K", "3", "--c", "9", "-o", "dir3.json"],
    ));
    assert_ok(&domlab(
        dir.path(),
        &["construct-ce", "--K", "3", "--c", "9", "--eps", "0.011111", "-o", "ce.json"],
    ));
    let pass = domlab(
        dir.path(),
        &["verify-ce", "--game", "dir3.json", "--dist", "ce.json", "--eps", "0.011112"],
    );
    assert_ok(&pass);
    let report = stdout_json(&pass);
    assert_eq!(report["pass"], true);
    assert!(report["gap"].as_f64().unwrap() <= 0.011112);

    let fail = domlab(
        dir.path(),
        &["verify-ce", "--game", "dir3.json", "--dist", "ce.json", "--eps", "1e-6"],
    );
    assert_eq!(exit_code(&fail), 1);
    assert_eq!(stdout_json(&fail)["pass"], false);
}

#[test]
fn bounds_prints_a_growing_level_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = domlab(
        dir.path(),
        &[
            "bounds", "--K", "3", "--N", "2", "--sigma", "0.1", "--beta", "4", "--b", "0.5",
            "--Delta", "0.5", "--eps", "0.5", "--delta", "0.01", "--levels", "4",
        ],
    );
    assert_ok(&out);
    let report = stdout_json(&out);
    let table = report["table"].as_array().unwrap();
    assert_eq!(table.len(), 4);
    assert_eq!(table[0]["horizon"], report["T1"]);
    let horizons: Vec<u64> = table
        .iter()
        .map(|row| row["horizon"].as_u64().unwrap())
        .collect();
    assert!(horizons.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn plot_reads_labels_from_the_manifest_and_bands_multi_seed_series() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&domlab(
        dir.path(),
        &["gen", "--type", "dir", "--K", "3", "--c", "9", "-o", "g.json"],
    ));
    assert_ok(&domlab(
        dir.path(),
        &[
            "simulate", "--game", "g.json", "--algo", "exp3dh:b=0.2,beta=4", "--T", "200",
            "--seeds", "3", "--noise-std", "0.1", "-o", "runs",
        ],
    ));
    let mut csvs: Vec<String> = fs::read_dir(dir.path().join("runs"))
        .unwrap()
        .map(|e| format!("runs/{}", e.unwrap().file_name().into_string().unwrap()))
        .filter(|n| n.ends_with(".csv"))
        .collect();
    csvs.sort();
    let mut args = vec!["plot"];
    args.extend(csvs.iter().map(String::as_str));
    args.extend(["-o", "fig.svg"]);
    assert_ok(&domlab(dir.path(), &args));
    let svg = fs::read_to_string(dir.path().join("fig.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("exp3dh:b=0.2,beta=4"), "legend uses the manifest label");
    assert!(svg.contains("<polygon"), "multi-seed series draws a band");
    assert!(svg.contains("<polyline"));
}

#[test]
fn usage_and_runtime_failures_use_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Missing conditional flag.
    assert_eq!(
        exit_code(&domlab(dir.path(), &["gen", "--type", "dir", "--K", "3"])),
        2
    );
    // Unknown flag.
    assert_eq!(exit_code(&domlab(dir.path(), &["solve", "--bogus"])), 2);
    // Unknown subcommand.
    assert_eq!(exit_code(&domlab(dir.path(), &["frobnicate"])), 2);
    // Missing input file.
    assert_eq!(exit_code(&domlab(dir.path(), &["solve", "missing.json"])), 1);
    // Capability mismatch: gradient feedback against the sampled market game.
    assert_ok(&domlab(
        dir.path(),
        &[
            "gen", "--type", "lemons", "--sellers", "3", "--c1", "1.5", "--c2", "1.5",
            "--quality-noise-std", "1", "-o", "lem.json",
        ],
    ));
    let mismatch = domlab(
        dir.path(),
        &[
            "simulate", "--game", "lem.json", "--algo", "ew:eta0=1,b=0.5", "--T", "10",
            "--feedback", "exact", "-o", "x",
        ],
    );
    assert_eq!(exit_code(&mismatch), 1);
    // Infeasible equilibrium target.
    assert_eq!(
        exit_code(&domlab(
            dir.path(),
            &["construct-ce", "--K", "3", "--c", "2", "--eps", "1e-12"]
        )),
        1
    );
}
