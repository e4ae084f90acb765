use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tryinfo::kernels::{read_kernel_csv, KernelSpec, TwoPathBeta};
use tryinfo::table::SweepTable;
use tryinfo::Grid1D;

fn tryinfo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tryinfo")).args(args).output().expect("binary runs")
}

fn tryinfo_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tryinfo")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_table(path: &Path) -> SweepTable {
    SweepTable::read_csv(std::io::BufReader::new(std::fs::File::open(path).unwrap())).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = "[grid]\nn = 64\n[sweep_beta]\ncount = 6\n[null]\ncount = 12\n";

#[test]
fn sweep_beta_single_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let o = tryinfo(&["sweep-beta", "--count", "1", "--grid-n", "128", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = read_table(&out);
    assert_eq!(
        t.columns(),
        ["beta", "H_X", "H_Y", "H_Y_given_x0", "I_XY", "lnAy_minus_H", "D_KL_prior", "residual_identity"]
    );
    assert_eq!(t.rows().len(), 1);
    assert!(t.column("residual_identity").unwrap()[0] < 1e-12);
    assert!(t.column("I_XY").unwrap()[0] > 0.0);
    assert_eq!(t.get_meta("grid_n"), Some("128"));
    assert_eq!(t.get_meta("detector"), Some("point"));
}

#[test]
fn sweep_beta_rows_satisfy_identity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("b.csv");
    let o = tryinfo(&["sweep-beta", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = read_table(&out);
    let beta = t.column("beta").unwrap();
    assert_eq!(beta, vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5]);
    for (l, r) in t.column("lnAy_minus_H").unwrap().iter().zip(t.column("D_KL_prior").unwrap()) {
        assert!((l - r).abs() < 1e-12);
    }
}

#[test]
fn sweep_beta_window_detector_and_weighted_prior() {
    let dir = tempfile::tempdir().unwrap();
    let weights: Vec<String> = (0..64).map(|i| format!("{}", 1.0 + (i % 5) as f64)).collect();
    write(dir.path(), "prior.txt", &weights.join("\n"));
    let cfg = write(
        dir.path(),
        "c.toml",
        "[grid]\nn = 64\n[sweep_beta]\ncount = 3\n[detector]\nhalf_width = 2\n[prior]\nkind = \"weights\"\nfile = \"prior.txt\"\n",
    );
    let o = tryinfo_in(dir.path(), &["sweep-beta", "--config", cfg.to_str().unwrap(), "--out", "o.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = read_table(&dir.path().join("o.csv"));
    assert_eq!(t.get_meta("detector"), Some("window"));
    assert_eq!(t.get_meta("window_points"), Some("5"));
    assert!(t.get_meta("prior").unwrap().starts_with("weights:"));
    assert!(t.column("residual_identity").unwrap().iter().all(|r| *r < 1e-12));
}

#[test]
fn null_sweep_writes_one_file_per_floor() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("null.csv");
    let o = tryinfo(&["null-sweep", "--count", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut tables = Vec::new();
    for b in ["1e-4", "1e-3", "1e-2"] {
        let p = dir.path().join(format!("null_b{b}.csv"));
        assert!(p.exists(), "missing {}", p.display());
        tables.push(read_table(&p));
    }
    for t in &tables {
        assert_eq!(t.rows().len(), 10);
        let f = t.column("F_cond").unwrap();
        let p = t.column("P_det").unwrap();
        let l = t.column("F_launch").unwrap();
        for i in 0..f.len() {
            assert!(l[i] >= p[i] * f[i]);
        }
        let eps = t.column("eps_bar").unwrap();
        assert!(eps.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(t.get_meta("eps_spacing"), Some("log"));
    }
    // Smaller floors give more information at the same shallow depth.
    let f_first = |t: &SweepTable| t.column("F_cond").unwrap()[0];
    assert!(f_first(&tables[0]) > f_first(&tables[1]));
    assert!(f_first(&tables[1]) > f_first(&tables[2]));
}

#[test]
fn null_sweep_single_floor_to_stdout() {
    let o = tryinfo(&["null-sweep", "--b", "1e-3", "--count", "5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = SweepTable::read_csv(o.stdout.as_slice()).unwrap();
    assert_eq!(t.rows().len(), 5);
    assert_eq!(t.get_meta("b"), Some("1.0000000000000000e-3"));
    let h = t.column("H_cond").unwrap();
    assert!(h.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn coherence_table() {
    let o = tryinfo(&["coherence"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = SweepTable::read_csv(o.stdout.as_slice()).unwrap();
    assert_eq!(t.columns(), ["M", "S_truncated", "S_unitary_reference"]);
    let s = t.column("S_truncated").unwrap();
    let r = t.column("S_unitary_reference").unwrap();
    assert_eq!(s.len(), 12);
    assert_eq!(s[0], 0.0);
    assert!((s[11] - r[11]).abs() < 1e-12);
    assert!(r.iter().all(|v| (v - r[0]).abs() < 1e-10));
    let w: Vec<f64> = (0..12).map(|k| (-(k as f64) / 2.0).exp()).collect();
    let z: f64 = w.iter().sum();
    let oracle: f64 = -w.iter().map(|v| v / z * (v / z).ln()).sum::<f64>();
    assert!((r[0] - oracle).abs() < 1e-12);
    assert!(s.windows(2).all(|p| p[0] < p[1]));
}

#[test]
fn check_identities_passes_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("report.csv");
    let o = tryinfo(&["check-identities", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(out).unwrap();
    for name in [
        "mi_symmetry",
        "chain_rule_x",
        "chain_rule_y",
        "score_mean_zero",
        "fisher_analytic_vs_kl",
        "unitary_invariance",
    ] {
        assert!(text.contains(&format!("\n{name},")), "{name} missing from report");
    }
    assert!(!text.contains("FAIL"));
}

#[test]
fn check_identities_tight_tolerance_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let o = tryinfo(&["check-identities", "--config", cfg.to_str().unwrap(), "--tolerance", "1e-16"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let report = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(report.contains("FAIL"));
    assert!(report.contains("PASS"));
    assert!(stderr(&o).contains("identity check failed"));
}

fn joint_csv(scale: f64) -> String {
    let mut s = String::from("x,y,p\n");
    let p = [[0.1, 0.2, 0.05], [0.25, 0.15, 0.25]];
    for (i, row) in p.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", i as f64, j as f64 * 0.5, v * scale));
        }
    }
    s
}

#[test]
fn check_identities_on_joint_file() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "j.csv", &joint_csv(1.0));
    let o = tryinfo(&["check-identities", "--joint", good.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains("joint_shape=2x3"));

    let bad = write(dir.path(), "bad.csv", &joint_csv(1.5));
    let o = tryinfo(&["check-identities", "--joint", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("invalid input"));

    let o = tryinfo(&["check-identities", "--joint", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("missing.csv"));
}

#[test]
fn kernel_dump_small_real_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.csv");
    let o = tryinfo(&["kernel-dump", "--grid-n", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some("x,y,re,im,abs2"));
    let rows = read_kernel_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 49);
    assert!(rows.iter().all(|r| r.im == 0.0));
    let meta = std::fs::read_to_string(dir.path().join("k.csv.meta")).unwrap();
    assert!(meta.contains("kernel=two-path-beta"));
    assert!(meta.contains("grid_n=7"));
}

#[test]
fn kernel_dump_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.csv");
    let o = tryinfo(&["kernel-dump", "--grid-n", "33", "--beta", "1.7", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = read_kernel_csv(std::io::BufReader::new(std::fs::File::open(&out).unwrap())).unwrap();
    let g = Grid1D::new(-3.0, 3.0, 33).unwrap();
    let k = KernelSpec::TwoPathBeta(TwoPathBeta::new(1.7, 1.3, 0.65).unwrap()).build(g, g).unwrap();
    let abs2 = k.abs2();
    assert_eq!(rows.len(), abs2.len());
    for (r, a) in rows.iter().zip(&abs2) {
        assert!((r.abs2 - a).abs() <= 1e-15 * a.max(1.0));
    }
}

#[test]
fn kernel_dump_default_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.csv");
    let o = tryinfo(&["kernel-dump", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let lines = std::fs::read_to_string(out).unwrap().lines().count();
    assert_eq!(lines, 512 * 512 + 1);
}

#[test]
fn kernel_dump_slit_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", "[grid]\nlo = -1.0\nhi = 1.0\nn = 9\n[kernel]\nkind = \"discrete-slits\"\n");
    let o = tryinfo(&["kernel-dump", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read_kernel_csv(o.stdout.as_slice()).unwrap().len(), 81);

    // Coarse slit sampling across a wide detector range trips the phase guard.
    let cfg = write(
        dir.path(),
        "a.toml",
        "[grid]\nlo = -300.0\nhi = 300.0\nn = 9\n[kernel]\nkind = \"aperture\"\nslit_width = 0.5\ncells_per_width = 2\n",
    );
    let o = tryinfo(&["kernel-dump", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("slit samples"), "{}", stderr(&o));
}

#[test]
fn io_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("no_such_dir").join("k.csv");
    let o = tryinfo(&["kernel-dump", "--grid-n", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("no_such_dir"));

    let o = tryinfo(&["coherence", "--config", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn validation_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[kernel]\nsigma = -1.0\n");
    let o = tryinfo(&["sweep-beta", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("kernel.sigma"));

    let cfg = write(dir.path(), "syntax.toml", "[grid\n");
    assert_eq!(code(&tryinfo(&["coherence", "--config", cfg.to_str().unwrap()])), 1);

    assert_eq!(code(&tryinfo(&["sweep-beta", "--grid-n", "1"])), 1);
    assert_eq!(code(&tryinfo(&["null-sweep", "--b", "0"])), 1);
    assert_eq!(code(&tryinfo(&["sweep-beta", "--fd-delta", "-1"])), 1);
    assert_eq!(code(&tryinfo(&["no-such-command"])), 1);
    assert_eq!(code(&tryinfo(&["--help"])), 0);

    let cfg = write(dir.path(), "slits.toml", "[kernel]\nkind = \"discrete-slits\"\n");
    let o = tryinfo(&["sweep-beta", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("two-path-beta"));
}

#[test]
fn timestamp_is_opt_in() {
    let plain = tryinfo(&["coherence", "--modes", "4"]);
    assert!(!String::from_utf8(plain.stdout).unwrap().contains("timestamp"));
    let stamped = tryinfo(&["coherence", "--modes", "4", "--timestamp"]);
    let t = SweepTable::read_csv(stamped.stdout.as_slice()).unwrap();
    assert!(t.get_meta("timestamp_unix").unwrap().parse::<u64>().unwrap() > 0);
}

#[test]
fn repeated_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let c = cfg.to_str().unwrap();
    let a = tryinfo(&["null-sweep", "--config", c, "--workers", "1"]).stdout;
    let b = tryinfo(&["null-sweep", "--config", c, "--workers", "5"]).stdout;
    assert_eq!(a, b);
}
