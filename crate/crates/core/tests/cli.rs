use invdet::cli::{run, Command, RunConfig};

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("invdet").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn zeta_example_prints_value_and_table() {
    let (code, out, _) = invoke(&["zeta", "--field", "GAUSSIAN", "--s", "1", "--limit", "10"]);
    assert_eq!(code, 0);
    assert!(out.contains("value: 2.5861"), "{out}");
    let (code, csv, _) = invoke(&["zeta", "--field", "GAUSSIAN", "--s", "1", "--limit", "10", "--format", "csv"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,z,cumulative,zeta1");
    assert_eq!(lines.len(), 11);
    let last: f64 = lines[10].split(',').nth(3).unwrap().parse().unwrap();
    assert!((last - 2.586111).abs() < 1e-6);
}

#[test]
fn units_example() {
    let (code, csv, _) = invoke(&["units", "--field", "REAL_QUADRATIC_5", "--radius", "10", "--format", "csv"]);
    assert_eq!(code, 0);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("M,count,predicted,residual,complete"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[1], "18");
    let predicted: f64 = row[2].parse().unwrap();
    assert!((predicted - 19.14).abs() < 0.005);
}

#[test]
fn detsum_example() {
    let (code, out, _) = invoke(&["detsum", "--field", "GAUSSIAN", "--radius", "2", "--m", "2"]);
    assert_eq!(code, 0);
    assert!(out.contains("7.0000"), "{out}");
    let (_, csv, _) = invoke(&["detsum", "--field", "GAUSSIAN", "--radius", "2", "--m", "2", "--format", "csv"]);
    assert_eq!(csv, "M,m,value,point_count,min_abs_det\n2,2,7,12,1\n");
}

#[test]
fn csv_floats_round_trip() {
    let (_, csv, _) = invoke(&["detsum", "--field", "REAL_QUADRATIC_5", "--radius", "7.3", "--m", "2", "--format", "csv"]);
    let value: f64 = csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    let k = invdet::numberfield::catalog_lookup("REAL_QUADRATIC_5").unwrap();
    let lattice = invdet::lattice::canonical_embedding_lattice(&k).unwrap();
    let direct = invdet::detsum::inverse_det_sum(&lattice, 7.3, 2.0, invdet::lattice::DEFAULT_BUDGET).unwrap();
    assert_eq!(value.to_bits(), direct.value.to_bits());
}

#[test]
fn output_is_identical_across_thread_counts_and_reruns() {
    let args = ["detsum", "--field", "CYCLOTOMIC_5", "--radius", "6,9,12", "--m", "4", "--format", "csv"];
    let (_, a, _) = invoke(&[&args[..], &["--threads", "1"]].concat());
    let (_, b, _) = invoke(&[&args[..], &["--threads", "4"]].concat());
    let (_, c, _) = invoke(&[&args[..], &["--threads", "4"]].concat());
    assert_eq!(a, b);
    assert_eq!(b, c);
}

#[test]
fn exit_codes() {
    assert_eq!(invoke(&["--bogus"]).0, 64);
    assert_eq!(invoke(&["detsum", "--field", "GAUSSIAN", "--m", "2", "--radius", "2", "--nope"]).0, 64);
    assert_eq!(invoke(&["--help"]).0, 0);
    assert_eq!(invoke(&["--version"]).0, 0);
    let (code, _, err) = invoke(&["units", "--field", "NOPE", "--radius", "10"]);
    assert_eq!(code, 1);
    assert_eq!(err.lines().count(), 1);
    assert_eq!(invoke(&["detsum", "--field", "GAUSSIAN", "--radius", "30", "--m", "2", "--budget", "10"]).0, 2);
    // too few antennas for the quasi-orthogonal bounds
    assert_eq!(invoke(&["report", "--algebra", "ALAMOUTI", "--nr", "1", "--radius", "20"]).0, 1);
}

#[test]
fn invalid_combinations_are_rejected() {
    for args in [
        &["detsum", "--field", "GAUSSIAN", "--algebra", "ALAMOUTI", "--radius", "2", "--m", "2"][..],
        &["detsum", "--field", "GAUSSIAN", "--m", "2"],
        &["detsum", "--field", "GAUSSIAN", "--radius", "2", "--t-start", "3", "--t-end", "4", "--m", "2"],
        &["detsum", "--field", "GAUSSIAN", "--radius", "2", "--m=-1"],
        &["report", "--field", "GAUSSIAN", "--nr", "2"],
        &["report", "--algebra", "ALAMOUTI", "--m", "4"],
        &["report", "--field", "GAUSSIAN", "--m", "4", "--lower-slack", "3"],
        &["units", "--field", "GAUSSIAN", "--radius", "10", "--threads", "0"],
    ] {
        let argv: Vec<&str> = std::iter::once("invdet").chain(args.iter().copied()).collect();
        let cfg = RunConfig::parse_from(&argv).unwrap();
        assert!(cfg.validate().is_err(), "{args:?}");
        assert_eq!(invoke(args).0, 1, "{args:?}");
    }
}

#[test]
fn run_config_round_trips() {
    for args in [
        &["zeta", "--field", "GAUSSIAN", "--limit", "10"][..],
        &["--format", "json", "units", "--field", "REAL_QUADRATIC_5", "--t-start", "2", "--t-end", "5"],
        &["detsum", "--algebra", "ALAMOUTI", "--radius", "3,4.5", "--m", "4", "--truncated", "--threads", "2"],
        &["qo", "detsum", "--algebra", "HAMILTON_SQRT5", "--radius", "5", "--out", "x.csv"],
        &["report", "--field", "REAL_QUADRATIC_5", "--m", "2", "--upper-slack", "3", "--long"],
        &["field", "info"],
        &["lattice", "vol", "--field", "GAUSSIAN", "--m", "2"],
        &["compare", "--qo", "ALAMOUTI", "--nf", "GAUSSIAN", "--budget", "77"],
    ] {
        let argv: Vec<&str> = std::iter::once("invdet").chain(args.iter().copied()).collect();
        let cfg = RunConfig::parse_from(&argv).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }
    let cfg = RunConfig::parse_from(["invdet", "compare", "--qo", "ALAMOUTI", "--nf", "GAUSSIAN", "--budget", "77"]).unwrap();
    assert_eq!(cfg.budget, 77);
    assert!(matches!(cfg.command, Command::Compare { nr: 2, .. }));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ideals.csv");
    let (code, stdout, _) = invoke(&[
        "ideals",
        "--field",
        "GAUSSIAN",
        "--limit",
        "100,1000",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("M,count,main_term,abs_error,relative_error\n"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn json_output_has_summary_and_rows() {
    let (code, out, _) = invoke(&["lattice", "vol", "--algebra", "ALAMOUTI", "--format", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let rows = v["rows"].as_array().unwrap();
    let volume = rows.iter().find(|r| r["property"] == "volume").unwrap();
    assert!((volume["value"].as_f64().unwrap() - 4.0).abs() < 1e-12);
}

#[test]
fn qo_check_reports_unit_determinant_minimum() {
    let (code, csv, _) = invoke(&["qo", "check", "--algebra", "HAMILTON_SQRT5", "--format", "csv"]);
    assert_eq!(code, 0);
    let get = |key: &str| {
        csv.lines().find_map(|l| l.strip_prefix(&format!("{key},"))).unwrap_or_else(|| panic!("{key} missing")).to_string()
    };
    assert_eq!(get("index_of_1_plus_u"), "16");
    assert_eq!(get("abs_det_of_1_plus_u"), "4");
    assert_eq!(get("min_abs_det"), "1");
}

#[test]
fn report_long_format() {
    let (code, csv, _) = invoke(&[
        "report", "--field", "GAUSSIAN", "--m", "4", "--t-start", "3", "--t-end", "4", "--format", "csv", "--long",
    ]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "M,series,value");
    // measured, measured_slack, lower, upper at three radii
    assert_eq!(lines.len(), 1 + 3 * 4);
}
