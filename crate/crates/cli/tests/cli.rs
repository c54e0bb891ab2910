use std::process::{Command, Output};

fn noma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noma-irsa"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let res = noma(&[
        "sweep",
        "--loads",
        "0.8,1.2",
        "--min-losses",
        "20",
        "--s1-baseline",
        "--census",
        "--max-frames",
        "2000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("G,m,n,L,gamma_db,dist,"));
    assert!(lines[1].starts_with("0.8,160,200,3,3,\"2:0.5,3:0.5\","));
    let census = std::fs::read_to_string(dir.path().join("run.census.csv")).unwrap();
    assert_eq!(census.lines().count(), 7);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(
        &cfg,
        "# small frames\nslots = 50\nlevels = 2\nloads = 0.5\nmin-losses = 10\nseed = 4\n",
    )
    .unwrap();
    let res = noma(&["sweep", "--config", cfg.to_str().unwrap(), "--levels", "1"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8(res.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("0.5,25,50,1,"), "{row}");
    assert!(row.ends_with(",4"), "{row}");
}

#[test]
fn unwritable_output_fails_fast() {
    let res = noma(&[
        "sweep",
        "--loads",
        "0.4",
        "--out",
        "/nonexistent-dir/sub/out.csv",
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("error"));
}

#[test]
fn rejects_empty_grid_and_bad_input() {
    assert!(!noma(&["sweep", "--loads", ""]).status.success());
    assert!(!noma(&["sweep", "--dist", "2:0.5,3:0.4", "--loads", "0.4"]).status.success());
    assert!(!noma(&["sweep", "--slot-grid", "100,200"]).status.success());
    assert!(!noma(&["sweep", "--loads", "0.4", "--slot-grid", "100"]).status.success());
}

#[test]
fn fit_rejects_single_frame_length() {
    let res = noma(&["fit", "--slot-grid", "100", "--load", "0.4"]);
    assert!(!res.status.success());
}

#[test]
fn fit_prints_coefficients() {
    let res = noma(&[
        "fit",
        "--slot-grid",
        "50,100,200",
        "--load",
        "0.4",
        "--min-losses",
        "50",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("a0 = ") && text.contains("a1 = "), "{text}");
}
