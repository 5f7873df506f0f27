use std::path::Path;
use std::process::{Command, Output};

fn dftbeam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dftbeam")).args(args).output().unwrap()
}

fn out_dir(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

#[test]
fn snr_range_gives_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = dftbeam(&[
        "--out",
        out_dir(dir.path()),
        "--no-timestamp",
        "campaign",
        "--estimator",
        "refined",
        "--snr",
        "4:30:2",
        "--trials",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("campaign.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("estimator,snr_db,mse_theta,mse_r,rate_mean,rate_p10,rate_p90,n_trials")
    );
    let snrs: Vec<f64> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f[0], "refined");
            f[1].parse().unwrap()
        })
        .collect();
    assert_eq!(snrs.len(), 14);
    assert_eq!(snrs[0], 4.0);
    assert_eq!(snrs[13], 30.0);
}

#[test]
fn missing_config_exits_2_and_names_the_path() {
    let o = dftbeam(&["--config", "/definitely/not/here.toml", "pattern"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/definitely/not/here.toml"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(dftbeam(&["campaign", "--bogus"]).status.code(), Some(2));
    assert_eq!(dftbeam(&["campaign", "--snr", "5:1:1"]).status.code(), Some(2));
    assert_eq!(dftbeam(&["campaign", "--estimator", "oracle"]).status.code(), Some(2));
    assert_eq!(dftbeam(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(dftbeam(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_config_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[train]\nrho = 1.5\n").unwrap();
    let o = dftbeam(&[
        "--config",
        path.to_str().unwrap(),
        "--out",
        out_dir(dir.path()),
        "train",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::write(&path, "[array]\nelements = 64\n").unwrap();
    let o = dftbeam(&["--config", path.to_str().unwrap(), "pattern"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("elements"));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = dftbeam(&[
            "--out",
            out_dir(d.path()),
            "--seed",
            "9",
            "--no-timestamp",
            "--format",
            "both",
            "campaign",
            "--estimator",
            "coarse,refined,full_csi",
            "--snr",
            "10,20",
            "--trials",
            "4",
            "--users",
            "2",
        ]);
        assert!(o.status.success());
    }
    for f in ["campaign.csv", "campaign_records.jsonl"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn timestamp_line_is_on_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let o = dftbeam(&["--out", out_dir(dir.path()), "-q", "pattern", "--theta", "0.1"]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("pattern.csv")).unwrap();
    assert!(text.starts_with("# generated_unix="));
    assert_eq!(text.lines().count(), 2 + 512);
}

#[test]
fn width_shrinks_with_range() {
    let dir = tempfile::tempdir().unwrap();
    let o = dftbeam(&[
        "--out",
        out_dir(dir.path()),
        "--no-timestamp",
        "width-sweep",
        "--axis",
        "r",
        "--from",
        "5",
        "--to",
        "60",
        "--points",
        "12",
    ]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    let slope: f64 = stdout
        .split("slope vs 1/r = ")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(slope > 0.5 && slope < 1.0, "{stdout}");
    let mut rdr = csv::Reader::from_path(dir.path().join("width_sweep.csv")).unwrap();
    let widths: Vec<f64> = rdr.records().map(|r| r.unwrap()[2].parse().unwrap()).collect();
    assert_eq!(widths.len(), 12);
    assert!(widths.first() > widths.last());
}

#[test]
fn training_stages_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, file) in [("train", "coarse.csv"), ("refine", "refined.csv"), ("mle", "mle.csv")] {
        let o = dftbeam(&[
            "--out",
            out_dir(dir.path()),
            "--no-timestamp",
            cmd,
            "--theta",
            "-0.2",
            "--range",
            "6",
            "--snr",
            "25",
        ]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        let mut rdr = csv::Reader::from_path(dir.path().join(file)).unwrap();
        let row = rdr.records().next().unwrap().unwrap();
        let theta_hat: f64 = row[4].parse().unwrap();
        assert!((theta_hat + 0.2).abs() < 0.01, "{cmd}: {theta_hat}");
    }
}

#[test]
fn existing_output_is_replaced_whole() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("rayleigh.csv");
    std::fs::write(&target, "x".repeat(100_000)).unwrap();
    let o = dftbeam(&[
        "--out",
        out_dir(dir.path()),
        "--no-timestamp",
        "rayleigh",
        "--points",
        "3",
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&target).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(!text.contains('x'));
    let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(leftovers, 1);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "").unwrap();
    let o = dftbeam(&["--out", file.join("sub").to_str().unwrap(), "pattern"]);
    assert_eq!(o.status.code(), Some(1));
}
