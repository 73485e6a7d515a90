use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn weylkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weylkit")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of a CSV report as (header, rows).
fn csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn eig_matches_free_dirichlet_spectrum() {
    let input = fixture("free_jacobi.json");
    let o = weylkit(&["--input", input.to_str().unwrap(), "eig", "--ell", "11"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = csv(&stdout(&o));
    assert_eq!(rows.len(), 10);
    let li = column(&h, "lambda");
    for (j, r) in rows.iter().enumerate() {
        let lam: f64 = r[li].parse().unwrap();
        let exact = 2.0 - 2.0 * ((j + 1) as f64 * std::f64::consts::PI / 11.0).cos();
        assert!((lam - exact).abs() < 1e-8, "j={j}: {lam} vs {exact}");
    }
}

#[test]
fn validate_flags_non_hermitian_b() {
    let input = fixture("broken.json");
    let o = weylkit(&["--input", input.to_str().unwrap(), "validate"]);
    assert_eq!(o.status.code(), Some(2));
    let (h, rows) = csv(&stdout(&o));
    let (ci, si, ki) = (column(&h, "check"), column(&h, "status"), column(&h, "k"));
    assert!(rows.iter().any(|r| r[ci] == "pointwise" && r[si] == "BNonHermitian" && r[ki] == "3"));

    let good = fixture("free_jacobi.json");
    assert_eq!(weylkit(&["--input", good.to_str().unwrap(), "validate"]).status.code(), Some(0));
}

#[test]
fn mfun_grid_is_herglotz() {
    let input = fixture("free_jacobi.json");
    let o = weylkit(&[
        "--input",
        input.to_str().unwrap(),
        "mfun",
        "--ell",
        "11",
        "--z-grid=-1:5:10,0.1:1:10",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = csv(&stdout(&o));
    assert_eq!(rows.len(), 100);
    let (ii, zr, zi, mi, ok) = (
        column(&h, "index"),
        column(&h, "z_re"),
        column(&h, "z_im"),
        column(&h, "m00_im"),
        column(&h, "herglotz_ok"),
    );
    for (n, r) in rows.iter().enumerate() {
        // ordered by grid index, real part fastest
        assert_eq!(r[ii], n.to_string());
        let x: f64 = r[zr].parse().unwrap();
        let y: f64 = r[zi].parse().unwrap();
        assert!((x - (-1.0 + 6.0 * (n % 10) as f64 / 9.0)).abs() < 1e-15);
        assert!((y - (0.1 + 0.9 * (n / 10) as f64 / 9.0)).abs() < 1e-15);
        assert!(r[mi].parse::<f64>().unwrap() > 0.0);
        assert_eq!(r[ok], "1");
    }
}

#[test]
fn usage_errors_exit_with_one() {
    let input = fixture("free_jacobi.json");
    let p = input.to_str().unwrap();
    assert_eq!(weylkit(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(weylkit(&["eig", "--ell", "11"]).status.code(), Some(1));
    assert_eq!(weylkit(&["--input", p, "mfun", "--ell", "0", "--z", "1,1"]).status.code(), Some(1));
    assert_eq!(weylkit(&["--input", p, "mfun", "--ell", "5", "--z", "1,0"]).status.code(), Some(1));
    assert_eq!(weylkit(&["--input", "/nonexistent.json", "validate"]).status.code(), Some(1));
    assert_eq!(weylkit(&["--help"]).status.code(), Some(0));
}

#[test]
fn reruns_are_byte_identical_without_timestamp() {
    let input = fixture("free_jacobi.json");
    let args = [
        "--input",
        input.to_str().unwrap(),
        "--no-timestamp",
        "disk",
        "--z-grid",
        "0:2:4,0.2:0.8:3",
        "--ell",
        "4,8",
    ];
    let a = weylkit(&args);
    let b = weylkit(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(!stdout(&a).contains("generated-unix"));

    let stamped = weylkit(&args[..2].iter().chain(&args[3..]).copied().collect::<Vec<_>>());
    let text = stdout(&stamped);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# generated-unix: "));
    assert_eq!(lines.collect::<Vec<_>>().join("\n") + "\n", stdout(&a));
}

#[test]
fn json_output_parses_and_round_trips_numbers() {
    let input = fixture("free_jacobi.json");
    let p = input.to_str().unwrap();
    let csv_out = weylkit(&["--input", p, "mfun", "--ell", "7", "--z", "0.5,0.25"]);
    let json_out = weylkit(&["--input", p, "--format", "json", "mfun", "--ell", "7", "--z", "0.5,0.25"]);
    let doc: serde_json::Value = serde_json::from_slice(&json_out.stdout).unwrap();
    assert_eq!(doc["command"], "mfun");
    let cols: Vec<&str> = doc["columns"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let mi = cols.iter().position(|c| *c == "m00_re").unwrap();
    let from_json = doc["rows"][0][mi].as_f64().unwrap();
    let (h, rows) = csv(&stdout(&csv_out));
    let from_csv: f64 = rows[0][column(&h, "m00_re")].parse().unwrap();
    assert_eq!(from_json.to_bits(), from_csv.to_bits());
}

#[test]
fn green_certificate_and_pairs() {
    let input = fixture("free_jacobi.json");
    let o = weylkit(&[
        "--input",
        input.to_str().unwrap(),
        "green",
        "--z",
        "0.4,0.6",
        "--window=-3,3",
        "--pairs",
        "0:1,1:0,2:2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let res: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# max_delta_residual: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(res < 1e-9);
    let (_, rows) = csv(&text);
    assert_eq!(rows.len(), 3);
}
