use std::process::{Command, Output};

fn entangle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entangle"))
        .args(args)
        .env_remove("ENTANGLE_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn table_csv() {
    let o = entangle(&["table"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "w,M,l,k,bitwidth,abft_bitwidth");
    assert_eq!(lines.len(), 15);
    assert!(lines.contains(&"32,3,11,10,21,30"));
    assert!(lines.contains(&"32,11,3,2,29,28"));
    assert!(lines.contains(&"32,16,2,2,30,28"));
}

#[test]
fn exhaustive_bitflips_all_detected() {
    let o = entangle(&[
        "run",
        "--method",
        "entangle",
        "--M",
        "3",
        "--N",
        "16",
        "--kernel",
        "conv",
        "--scenario",
        "all-bitflips",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,M,w,N,kernel,scenario,detected,recovered,correct,ns_encode,ns_apply,ns_check"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1536);
    assert!(rows.iter().all(|r| r.split(',').nth(6) == Some("true")));
}

#[test]
fn abft_clean_run() {
    let o = entangle(&["run", "--method", "abft", "--scenario", "none", "--reps", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[6] == "false" && r[8] == "true"));
}

#[test]
fn too_few_streams_is_a_usage_error() {
    let o = entangle(&["run", "--M", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 3"));
    assert_eq!(entangle(&["run", "--kernel", "fft"]).status.code(), Some(1));
    assert_eq!(entangle(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn seeded_runs_repeat() {
    let args = ["run", "--scenario", "random-overwrite", "--reps", "20", "--seed", "5"];
    let strip = |o: &Output| -> Vec<String> {
        stdout(o)
            .lines()
            .map(|l| l.split(',').take(9).collect::<Vec<_>>().join(","))
            .collect()
    };
    let a = entangle(&args);
    let b = entangle(&args);
    assert!(a.status.success());
    assert_eq!(strip(&a), strip(&b));
    let env = Command::new(env!("CARGO_BIN_EXE_entangle"))
        .args(&args[..5])
        .env("ENTANGLE_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(strip(&env), strip(&a));
}

#[test]
fn double_faults_are_reported_not_enforced() {
    let o = entangle(&["run", "--scenario", "double-cancel", "--N", "8", "--reps", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(6) == Some("false")));
}

#[test]
fn identity_bench_emits_rows() {
    let o = entangle(&[
        "bench",
        "--workload",
        "identity",
        "--N",
        "8,16",
        "--reps",
        "5",
        "--budget-ms",
        "0",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "workload,method,M,N,median_ns,overhead_pct_vs_plain");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("identity,plain,3,8,"));
}

#[test]
fn curves_csv_and_file_output() {
    let dir = std::env::temp_dir().join(format!("entangle-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("curves.csv");
    let o = entangle(&[
        "curves",
        "--workload",
        "gemm",
        "--M",
        "3,8",
        "--N",
        "1000",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "workload,M,N,entangle_ratio,abft_ratio");
    assert!(lines[1].starts_with("gemm,3,1000,0.002,"));
    assert_eq!(lines.len(), 3);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn roundtrip_subcommand() {
    let o = entangle(&["roundtrip", "--M", "4", "--w", "64", "--reps", "10"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().nth(1), Some("4,64,64,10,0"));
}
