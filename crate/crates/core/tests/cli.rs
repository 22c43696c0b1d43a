use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hjb_core::cli::{convergence_study, l2_summary, ExperimentConfig};
use hjb_core::mlp::{mlp_estimate, path_stream, sample_gaussian, HamiltonianMode, IndexPath, MlpContext, MlpParams};
use hjb_core::netcalc::io::load;
use hjb_core::problem::{families, ControlProblem};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn hjb(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hjb"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run hjb")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_owned).collect()).collect()
}

fn header(path: &Path) -> Vec<String> {
    csv::Reader::from_path(path).unwrap().headers().unwrap().iter().map(str::to_owned).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let k = header(path).iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    csv_rows(path).into_iter().map(|r| r[k].clone()).collect()
}

/// Writes `problem` next to a config whose body follows the `problem` line.
fn write_config(dir: &Path, problem: &ControlProblem, body: &str) -> PathBuf {
    fs::write(dir.join("problem.toml"), problem.to_toml_string().unwrap()).unwrap();
    let path = dir.join("config.toml");
    fs::write(&path, format!("problem = \"problem.toml\"\n{body}")).unwrap();
    path
}

#[test]
fn shipped_configs_round_trip() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::from_file(&path).unwrap();
            let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap(), path.parent().unwrap()).unwrap();
            assert_eq!(cfg, again, "{}", path.display());
        }
    }
    let err = ExperimentConfig::from_toml_str("seed = 1\nunknown_key = 3\n", Path::new("."));
    assert!(err.is_err());
}

#[test]
fn hamiltonian_self_test_fails_and_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = hjb(&["hamiltonian-check"], &configs().join("hamiltonian_selftest.toml"), dir.path());
    assert_eq!(bad.status.code(), Some(1));
    let statuses = column(&dir.path().join("hamiltonian_check.csv"), "status");
    assert!(statuses.iter().any(|s| s == "FAIL"));
    assert!(statuses.iter().any(|s| s == "PASS"));

    let good = hjb(&["hamiltonian-check"], &configs().join("hamiltonian_check.toml"), dir.path());
    assert_eq!(good.status.code(), Some(0));
    assert!(column(&dir.path().join("hamiltonian_check.csv"), "status").iter().all(|s| s == "PASS"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    fs::write(&path, "problem = \"missing.toml\"\n[mlp]\nlevels = 1\nbranching = 1\n").unwrap();
    let out = hjb(&["solve"], &path, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn solve_with_zero_levels_returns_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &families::p1(2, hjb_core::problem::PsiSpec::Bspline { c: 1.0 }),
        "points = [[0.0, 0.0], [0.5, -1.0]]\n[mlp]\nlevels = 0\nbranching = 3\n",
    );
    let out = hjb(&["solve"], &cfg, &dir.path().join("out"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("out/solve.csv");
    for name in ["value", "grad1", "grad2"] {
        assert!(column(&csv, name).iter().all(|v| v.parse::<f64>().unwrap() == 0.0));
    }
}

#[test]
fn heat_solve_reproduces_analytic_values_and_repeats_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let g = vec![1.0, -0.5, 0.25];
    let cfg = write_config(
        dir.path(),
        &families::heat(g.clone()),
        "seed = 4\npoints = [[0.1, 0.2, 0.3], [-1.0, 0.0, 2.0]]\n[mlp]\nlevels = 2\nbranching = 4\n[oracle]\nkind = \"heat\"\nsamples = 20000\n",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(hjb(&["solve"], &cfg, &a).status.success());
    assert!(hjb(&["solve"], &cfg, &b).status.success());
    assert_eq!(fs::read(a.join("solve.csv")).unwrap(), fs::read(b.join("solve.csv")).unwrap());

    let csv = a.join("solve.csv");
    let oracle = column(&csv, "oracle_value");
    let stderr = column(&csv, "oracle_stderr");
    for (k, x) in [[0.1, 0.2, 0.3], [-1.0, 0.0, 2.0]].iter().enumerate() {
        let exact: f64 = g.iter().zip(x).map(|(gi, xi)| gi * xi).sum();
        let se: f64 = stderr[k].parse().unwrap();
        assert!((oracle[k].parse::<f64>().unwrap() - exact).abs() <= 3.0 * se);
    }
    assert!(column(&csv, "wall_ms").iter().all(|v| v == "0"));

    let c = dir.path().join("c");
    let out = Command::new(env!("CARGO_BIN_EXE_hjb"))
        .args(["solve", "--seed", "5", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&c)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_ne!(column(&csv, "value"), column(&c.join("solve.csv"), "value"));
    assert!(column(&c.join("solve.csv"), "seed").iter().all(|s| s == "5"));
}

#[test]
fn freeze_with_zero_levels_writes_the_zero_network() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &families::p1(3, hjb_core::problem::PsiSpec::Bspline { c: 1.0 }),
        "[domain]\nlo = [-1.0, -1.0, -1.0]\nhi = [1.0, 1.0, 1.0]\ncount = 5\n[mlp]\nlevels = 0\nbranching = 2\nh_mode = \"network\"\n[hamnet]\ndelta = 1e-2\n",
    );
    let out_dir = dir.path().join("out");
    let out = hjb(&["freeze"], &cfg, &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let net = load(&out_dir.join("frozen_net.json")).unwrap();
    assert_eq!(net.size(), 0);
    assert_eq!(net.realize(&[0.3, -0.1, 0.9]).unwrap(), vec![0.0; 4]);
    assert!(column(&out_dir.join("freeze_report.csv"), "status").iter().all(|s| s == "PASS"));
}

#[test]
fn convergence_on_a_trivial_problem_has_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &families::heat(vec![0.0; 2]),
        "points = [[0.0, 1.0], [2.0, -1.0]]\n[mlp]\nlevels = 1\nbranching = 1\n[oracle]\nkind = \"heat\"\nsamples = 1000\n[convergence]\nlevels = [1, 2, 3]\nseeds = 3\n",
    );
    let out_dir = dir.path().join("out");
    let out = hjb(&["convergence"], &cfg, &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let errors = column(&out_dir.join("convergence.csv"), "rel_l2_error");
    assert_eq!(errors.len(), 9);
    assert!(errors.iter().all(|e| e.parse::<f64>().unwrap() == 0.0));
}

#[test]
fn one_level_error_is_the_terminal_block_error() {
    // H(t, x, 0) = 0 here, so the level-0 corrections vanish and N = 1 keeps
    // only the M terminal draws labelled (0, -i).
    let prob = families::cole_hopf(3, 2.0);
    let ctx = MlpContext::exact(&prob, prob.truncation_level().unwrap());
    let base = MlpParams { levels: 1, branching: 5, alpha_time: 0.5, seed: 70, h_mode: HamiltonianMode::ExactTruncated };
    let points = vec![vec![0.0, 0.5, -0.5], vec![1.0, -1.0, 0.25], vec![-0.3, 0.2, 0.1]];
    let reference = vec![0.3, 0.2, 0.25];
    let study = convergence_study(&ctx, &base, &[(1, 5)], 4, 0.0, &points, &reference).unwrap();
    for (k, err) in study[0].errors.iter().enumerate() {
        let seed = 70 + k as u64;
        let terminal: Vec<f64> = points
            .iter()
            .map(|x| {
                let mean = (1..=5)
                    .map(|i| {
                        let z = sample_gaussian(&mut path_stream(seed, &IndexPath::root().child(0, -i)), 3);
                        let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + b).collect();
                        prob.psi_value(&y)
                    })
                    .sum::<f64>()
                    / 5.0;
                let est = mlp_estimate(&ctx, &MlpParams { seed, ..base.clone() }, 0.0, x).unwrap().value;
                assert!((est - mean).abs() <= 1e-14, "{est} vs {mean}");
                mean
            })
            .collect();
        let want = l2_summary(&terminal, &reference).rel_error;
        assert!((err - want).abs() <= 1e-14);
    }
}
