use std::fs::{self, File};
use std::process::{Command, Output};

use ublr::reconstruction::{read_container, CompressionReport};
use ublr_bench::{ASPECT_HEADER, SWEEP_HEADER};

fn ublr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ublr")).args(args).env_remove("UBLR_SEED").output().unwrap()
}

const SYNTHETIC: [&str; 12] =
    ["compress", "--op", "synthetic", "--n", "96", "--b", "8", "--k", "2", "--p", "3", "--method"];

fn report(out: &Output) -> CompressionReport {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn compress_writes_a_report_and_container() {
    let dir = tempfile::tempdir().unwrap();
    let save = dir.path().join("a2.ublr");
    let mut args = SYNTHETIC.to_vec();
    args.extend(["A2", "--seed", "4", "--save", save.to_str().unwrap()]);
    let out = ublr(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!((r.config.n, r.config.b, r.config.m, r.config.seed), (96, 8, 12, 4));
    assert!(r.relative_error.unwrap() < 1e-9);
    assert_eq!(r.matvecs.total, r.matvecs.phase_i + r.matvecs.phase_ii + r.matvecs.phase_iii);
    let rep = read_container(File::open(&save).unwrap()).unwrap();
    assert_eq!(rep.tessellation().n(), 96);
}

#[test]
fn seed_comes_from_the_environment() {
    let mut args = SYNTHETIC.to_vec();
    args.push("A3");
    let out = Command::new(env!("CARGO_BIN_EXE_ublr")).args(&args).env("UBLR_SEED", "17").output().unwrap();
    assert!(out.status.success());
    assert_eq!(report(&out).config.seed, 17);
}

#[test]
fn missing_fields_exit_with_config_status() {
    let out = ublr(&["compress", "--op", "laplace2d", "--method", "A1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`n`"));
    let out = ublr(&["compress", "--op", "slab-schur", "--nx", "8", "--ny", "8", "--method", "A1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`nz`"));
}

#[test]
fn tolerance_violations_exit_with_numerical_status() {
    let out = ublr(&[
        "compress",
        "--op",
        "laplace2d",
        "--n",
        "256",
        "--b",
        "16",
        "--k",
        "2",
        "--p",
        "2",
        "--method",
        "A3",
        "--max-rel-error",
        "1e-12",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(report(&out).relative_error.unwrap() > 1e-12);
}

#[test]
fn sweep_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = ublr(&[
        "sweep",
        "--op",
        "synthetic",
        "--n",
        "96",
        "--b",
        "8",
        "--k",
        "2",
        "--p",
        "3",
        "--method",
        "A1,B2",
        "--seed",
        "1,2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), SWEEP_HEADER);
    let rows: Vec<_> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        assert!(row[17].parse::<f64>().unwrap() < 1e-9);
        assert!(row[18].is_empty());
    }
}

#[test]
fn empty_sweep_writes_the_header() {
    let out = ublr(&["sweep", "--op", "synthetic", "--n", "96", "--b", "8", "--method", ""]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), SWEEP_HEADER.join(",") + "\n");
}

#[test]
fn aspect_ratios_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rho.csv");
    let out = ublr(&[
        "aspect-ratios",
        "--b",
        "16",
        "--d",
        "1",
        "--extra-cols",
        "0,1",
        "--seed",
        "1,2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), ASPECT_HEADER.join(","));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * (2 * 16 + 3));
    assert_eq!(rows.iter().filter(|r| r[0] == "summary_median").count(), 2);
    for r in rows.iter().filter(|r| r[0] == "block") {
        let base: f64 = r[8].parse().unwrap();
        let opt: f64 = r[9].parse().unwrap();
        assert!(opt <= base && opt >= 1.0);
    }
}
