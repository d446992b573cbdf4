//! End-to-end checks of the `gpu-dse` binary: exit codes, file outputs,
//! and rerun determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gpu_dse(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpu-dse"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn config_preset_then_simulate_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = gpu_dse(&["config", "--preset", "tx2", "--out", "tx2.toml"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("tx2.toml").exists());

    let out = gpu_dse(
        &[
            "gen-workload",
            "--archetype",
            "dense_linear_algebra",
            "--scale",
            "tiny",
            "--seed",
            "1",
            "--out",
            "k.toml",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let out = gpu_dse(
        &[
            "simulate",
            "--config",
            "tx2.toml",
            "--kernel",
            "k.toml",
            "--out",
            "r.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    // A tiny dense kernel runs 8 blocks.
    assert_eq!(result["blocks_executed"], 8);
    assert!(stdout(&out).contains("total_cycles="));
}

#[test]
fn simulate_accepts_preset_names_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    gpu_dse(
        &[
            "gen-workload",
            "--archetype",
            "graph_traversal",
            "--scale",
            "tiny",
            "--seed",
            "9",
            "--out",
            "k.toml",
        ],
        dir.path(),
    );
    let run = |out: &str| {
        gpu_dse(
            &[
                "simulate",
                "--config",
                "xavier",
                "--kernel",
                "k.toml",
                "--out",
                out,
            ],
            dir.path(),
        )
    };
    let a = run("a.json");
    let b = run("b.json");
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(
        fs::read(dir.path().join("a.json")).unwrap(),
        fs::read(dir.path().join("b.json")).unwrap()
    );
}

#[test]
fn missing_kernel_file_is_a_domain_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = gpu_dse(
        &["simulate", "--config", "tx2", "--kernel", "nope.toml"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nope.toml"), "{}", stderr(&out));
}

#[test]
fn sweep_writes_outputs_and_classify_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    gpu_dse(
        &[
            "gen-workload",
            "--archetype",
            "dynamic_programming",
            "--scale",
            "tiny",
            "--seed",
            "4",
            "--out",
            "dp.toml",
        ],
        dir.path(),
    );
    fs::write(
        dir.path().join("plan.toml"),
        r#"base = "tx2"
mode = "single"
workloads = ["dp.toml"]

[[axes]]
param = "l2_size"
values = [131072, 262144, 524288, 1048576]

[[axes]]
param = "warp_schedulers"
values = [1, 2, 4]
"#,
    )
    .unwrap();
    let out = gpu_dse(
        &["sweep", "--plan", "plan.toml", "--out-dir", "out", "--jobs", "2"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("out/sweep.csv").exists());
    assert!(dir.path().join("out/sweep.json").exists());
    assert!(dir.path().join("out/fig3c.dat").exists());
    assert!(dir.path().join("out/fig3h.dat").exists());
    let csv = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert!(csv.starts_with("axis,value,workload,cycles,slowdown"));

    let out = gpu_dse(&["classify", "--results", "out"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("l2_size"), "{text}");
    assert!(text.contains("num_sms"), "{text}");
}

#[test]
fn sweep_with_invalid_base_exits_one_with_violations() {
    let dir = tempfile::tempdir().unwrap();
    gpu_dse(
        &[
            "gen-workload",
            "--archetype",
            "structured_grid",
            "--scale",
            "tiny",
            "--seed",
            "2",
            "--out",
            "k.toml",
        ],
        dir.path(),
    );
    // 3 SMs with 2 per cluster violates divisibility.
    let out = gpu_dse(&["config", "--preset", "tx2", "--out", "bad.toml"], dir.path());
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("bad.toml")).unwrap();
    let text = text.replace("num_sms = 2", "num_sms = 3");
    let text = text.replace("sms_per_cluster = 1", "sms_per_cluster = 2");
    fs::write(dir.path().join("bad.toml"), text).unwrap();
    fs::write(
        dir.path().join("plan.toml"),
        r#"base = "bad.toml"
mode = "single"
workloads = ["k.toml"]
"#,
    )
    .unwrap();
    let out = gpu_dse(&["sweep", "--plan", "plan.toml", "--out-dir", "out"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("num_sms"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = gpu_dse(&["classify", "--results", ".", "--epsilon", "-1"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let out = gpu_dse(&["simulate", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn setups_comparison_report() {
    let dir = tempfile::tempdir().unwrap();
    for (archetype, name) in [("dense_linear_algebra", "dla.toml"), ("graph_traversal", "gt.toml")] {
        gpu_dse(
            &[
                "gen-workload",
                "--archetype",
                archetype,
                "--scale",
                "tiny",
                "--seed",
                "6",
                "--out",
                name,
            ],
            dir.path(),
        );
    }
    let out = gpu_dse(
        &[
            "setups",
            "--platform",
            "tx2",
            "--workloads",
            "dla.toml,gt.toml",
            "--out-dir",
            "cmp",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("reduced_die"));
    assert!(text.contains("increased_perf_a"));
    assert!(text.contains("area_delta"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cmp/setups.json")).unwrap())
            .unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn trace_dump_has_cache_access_lines() {
    let dir = tempfile::tempdir().unwrap();
    gpu_dse(
        &[
            "gen-workload",
            "--archetype",
            "structured_grid",
            "--scale",
            "tiny",
            "--seed",
            "8",
            "--out",
            "k.toml",
        ],
        dir.path(),
    );
    let out = gpu_dse(
        &[
            "simulate",
            "--config",
            "tx2",
            "--kernel",
            "k.toml",
            "--trace",
            "trace.txt",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let trace = fs::read_to_string(dir.path().join("trace.txt")).unwrap();
    let first = trace.lines().next().expect("has lines");
    let fields: Vec<&str> = first.split_whitespace().collect();
    assert_eq!(fields.len(), 5, "cycle sm level line hit/miss: {first}");
    assert!(fields[2] == "L1" || fields[2] == "L2");
    assert!(fields[4] == "hit" || fields[4] == "miss");
    assert!(trace.lines().any(|l| l.contains(" L2 ")));
}

#[test]
fn cycle_cap_env_aborts_runs() {
    let dir = tempfile::tempdir().unwrap();
    gpu_dse(
        &[
            "gen-workload",
            "--archetype",
            "dense_linear_algebra",
            "--scale",
            "small",
            "--seed",
            "1",
            "--out",
            "k.toml",
        ],
        dir.path(),
    );
    let out = Command::new(env!("CARGO_BIN_EXE_gpu-dse"))
        .args(["simulate", "--config", "tx2", "--kernel", "k.toml"])
        .env("GPU_DSE_CYCLE_CAP", "10")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("cycle cap"), "{}", stderr(&out));
}
