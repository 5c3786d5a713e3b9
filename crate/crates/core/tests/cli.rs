use sqss::cli::{run, EXIT_DETECTED, EXIT_OK, EXIT_USAGE};

fn call(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(
        std::iter::once("sqss").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn json(args: &[&str]) -> (i32, serde_json::Value) {
    let (code, out, err) = call(args);
    (
        code,
        serde_json::from_str(&out).unwrap_or_else(|e| panic!("{e}: {out} {err}")),
    )
}

#[test]
fn honest_measure_resend_exits_zero() {
    let (code, v) = json(&[
        "run",
        "--protocol",
        "measure-resend",
        "--adversary",
        "none",
        "--runs",
        "10",
        "--N",
        "200",
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["summary"]["max_error_rate"], 0.0);
    assert_eq!(v["runs"].as_array().unwrap().len(), 10);
}

#[test]
fn solution1_detection_exits_two() {
    let (code, v) = json(&[
        "run",
        "--protocol",
        "randomization",
        "--adversary",
        "intercept-resend",
        "--solution1",
        "--runs",
        "5",
    ]);
    assert_eq!(code, EXIT_DETECTED);
    for r in v["runs"].as_array().unwrap() {
        assert_eq!(r["verdict"]["abort_reason"], "Case3Deficient");
    }
}

#[test]
fn trojan_with_filters_exits_two() {
    let (code, v) = json(&[
        "run",
        "--protocol",
        "measure-resend",
        "--adversary",
        "trojan-horse",
        "--solution2",
        "--runs",
        "3",
        "--N",
        "40",
    ]);
    assert_eq!(code, EXIT_DETECTED);
    assert_eq!(v["tally"]["photons_flagged"], 120);
}

#[test]
fn usage_errors() {
    for args in [
        &["run", "--N", "0"][..],
        &["run", "--runs", "0"],
        &[
            "run",
            "--protocol",
            "measure-resend",
            "--adversary",
            "intercept-resend",
        ],
        &[
            "run",
            "--adversary",
            "trojan-horse",
            "--protocol",
            "measure-resend",
            "--spies-per-slot",
            "0",
        ],
        &["run", "--significance", "2", "--solution1"],
        &["run", "--format", "xml"],
        &["oracle", "case5-conditional"],
        &["bogus"],
    ] {
        let (code, _, err) = call(args);
        assert_eq!(code, EXIT_USAGE, "{args:?}");
        assert!(!err.is_empty());
    }
}

#[test]
fn same_config_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..2)
        .map(|i| dir.path().join(format!("r{i}.json")))
        .collect();
    for p in &paths {
        let code = call(&[
            "run",
            "--adversary",
            "intercept-resend",
            "--m",
            "1",
            "--runs",
            "20",
            "--N",
            "100",
            "--trace",
            "--output",
            p.to_str().unwrap(),
        ])
        .0;
        assert_eq!(code, EXIT_DETECTED);
    }
    let a = std::fs::read(&paths[0]).unwrap();
    assert_eq!(a, std::fs::read(&paths[1]).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert!(!v["runs"][0]["events"].as_array().unwrap().is_empty());
    let other = call(&[
        "run",
        "--adversary",
        "intercept-resend",
        "--m",
        "1",
        "--runs",
        "20",
        "--N",
        "100",
        "--seed",
        "7",
    ]);
    assert_ne!(String::from_utf8(a).unwrap(), other.1);
}

#[test]
fn csv_has_one_row_per_run() {
    let (code, out, _) = call(&["run", "--runs", "4", "--N", "50", "--format", "csv"]);
    assert_eq!(code, EXIT_OK);
    let mut reader = csv::Reader::from_reader(out.as_bytes());
    let headers = reader.headers().unwrap().clone();
    assert!(headers.iter().any(|h| h == "abort_reason"));
    let rows: Vec<_> = reader.records().collect::<Result<_, _>>().unwrap();
    assert_eq!(rows.len(), 4);
    let pass = headers.iter().position(|h| h == "pass").unwrap();
    assert!(rows.iter().all(|r| &r[pass] == "true"));
}

#[test]
fn oracle_catalogue() {
    let (code, v) = json(&["oracle", "ghz-like-zzz"]);
    assert_eq!(code, EXIT_OK);
    let d = v["distribution"].as_object().unwrap();
    assert_eq!(d.len(), 4);
    for k in ["000", "011", "110", "101"] {
        assert_eq!(d[k], 0.25);
    }
    let (_, v) = json(&["oracle", "case3-conditional"]);
    assert_eq!(v["distribution"]["(0,PhiPlus)"], 0.5);
    assert_eq!(v["distribution"]["(1,PsiPlus)"], 0.5);
    let (_, v) = json(&["oracle", "joint-on-psi-prime"]);
    assert_eq!(v["distribution"], serde_json::json!({"0": 1.0}));
}
