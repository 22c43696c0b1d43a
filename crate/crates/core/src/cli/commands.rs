use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{BlocksCheckSection, ExperimentConfig, OracleKind, OracleSection};
use super::suites::{blocks_suite, hamiltonian_suite, hamnet_suite, Relation, SuiteRow};
use crate::error::{Error, Result};
use crate::hamnet::{build_hamiltonian_net, ProblemNets};
use crate::mlp::{count_indices, freeze_to_net, mlp_estimate, HamiltonianMode, MlpContext, MlpParams, NetworkModel};
use crate::netcalc::{self, NeuralNet};
use crate::oracle::{cole_hopf_value, fd_solve_1d, heat_value, FdGrid, OracleResult};
use crate::problem::{families, ControlProblem};

/// Options shared by every subcommand.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    /// Record wall-clock times; off by default so reports are byte-stable.
    pub timing: bool,
}

/// Files written and the number of failing rows.
#[derive(Clone, Debug, Default)]
pub struct CommandReport {
    pub files: Vec<PathBuf>,
    pub failures: usize,
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    w.write_record(header).map_err(|e| Error::Format(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn write_suite(path: &Path, rows: &[SuiteRow]) -> Result<usize> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(rows.iter().filter(|r| !r.passed()).count())
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

fn prepare(opts: &RunOptions) -> Result<()> {
    std::fs::create_dir_all(&opts.out)?;
    Ok(())
}

fn seed_of(cfg: &ExperimentConfig, opts: &RunOptions) -> u64 {
    opts.seed.unwrap_or(cfg.seed)
}

/// Network model for network-mode runs: exact component nets and the
/// Hamiltonian network at the configured δ.
pub fn network_model(prob: &ControlProblem, delta: f64) -> Result<NetworkModel> {
    let pnets = ProblemNets::exact(prob)?;
    let ham = build_hamiltonian_net(&pnets, prob, prob.truncation_level()?, delta)?;
    Ok(NetworkModel { hamiltonian: ham.net, psi: pnets.net_psi })
}

fn context<'a>(prob: &'a ControlProblem, params: &MlpParams, cfg: &ExperimentConfig) -> Result<MlpContext<'a>> {
    let r = prob.truncation_level()?;
    match params.h_mode {
        HamiltonianMode::ExactTruncated => Ok(MlpContext::exact(prob, r)),
        HamiltonianMode::Network => {
            let delta = cfg.hamnet.as_ref().ok_or_else(|| Error::Config("network mode needs a [hamnet] section".into()))?.delta;
            MlpContext::with_networks(prob, r, network_model(prob, delta)?)
        }
    }
}

/// Reference values at every point from the selected oracle.
pub fn oracle_values(prob: &ControlProblem, sec: &OracleSection, t: f64, points: &[Vec<f64>], seed: u64) -> Result<Option<Vec<OracleResult>>> {
    match sec.kind {
        OracleKind::None => Ok(None),
        OracleKind::ColeHopf => points.iter().map(|x| cole_hopf_value(prob, t, x, sec.samples, seed)).collect::<Result<_>>().map(Some),
        OracleKind::Heat => points.iter().map(|x| heat_value(prob, t, x, sec.samples, seed)).collect::<Result<_>>().map(Some),
        OracleKind::Fd1d => {
            let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            let mut grid = FdGrid::around(prob, lo, hi);
            grid.nx = sec.fd_nx;
            let sol = fd_solve_1d(prob, &grid)?;
            points.iter().map(|x| sol.query(t, x[0])).collect::<Result<_>>().map(Some)
        }
    }
}

/// L²(Q) error by the uniform average over the points, with a 95%
/// half-width from the delta method, and the error relative to the
/// reference's L²(Q) norm.
pub struct L2Summary {
    pub l2_error: f64,
    pub half_width: f64,
    pub rel_error: f64,
}

pub fn l2_summary(estimates: &[f64], reference: &[f64]) -> L2Summary {
    let n = estimates.len() as f64;
    let sq: Vec<f64> = estimates.iter().zip(reference).map(|(e, r)| (e - r).powi(2)).collect();
    let mean = sq.iter().sum::<f64>() / n;
    let var = if n > 1.0 { sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let l2 = mean.sqrt();
    let half_width = if l2 > 0.0 { 1.96 * (var / n).sqrt() / (2.0 * l2) } else { 0.0 };
    let norm = (reference.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    L2Summary { l2_error: l2, half_width, rel_error: if norm > 0.0 { l2 / norm } else { l2 } }
}

pub fn cmd_hamiltonian_check(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<CommandReport> {
    prepare(opts)?;
    let sec = cfg.hamiltonian_check.clone().unwrap_or_default();
    let mut problems = Vec::new();
    if cfg.problem.is_some() {
        let p = cfg.load_problem()?;
        problems.push((p.family.clone(), p));
    }
    if sec.builtins || problems.is_empty() {
        problems.extend(families::all_builtin().into_iter().map(|p| (p.family.clone(), p)));
    }
    let rows = hamiltonian_suite(&problems, &sec, seed_of(cfg, opts))?;
    let path = opts.out.join("hamiltonian_check.csv");
    let failures = write_suite(&path, &rows)?;
    Ok(CommandReport { files: vec![path], failures })
}

pub fn cmd_blocks_check(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<CommandReport> {
    prepare(opts)?;
    let sec: BlocksCheckSection = cfg.blocks_check.clone().unwrap_or_default();
    let seed = seed_of(cfg, opts);
    let mut rows = blocks_suite(&sec, seed)?;
    if let (Some(_), Some(h)) = (&cfg.problem, &cfg.hamnet) {
        let prob = cfg.load_problem()?;
        rows.extend(hamnet_suite(&prob.family, &prob, &[h.delta], sec.hamnet_samples, 10.0, seed)?);
    }
    let path = opts.out.join("blocks_check.csv");
    let failures = write_suite(&path, &rows)?;
    Ok(CommandReport { files: vec![path], failures })
}

fn run_header(d: usize, with_oracle: bool) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(numbered("x", d));
    h.push("value".into());
    h.extend(numbered("grad", d));
    h.extend(["N", "M", "alpha", "seed", "samples", "wall_ms"].map(String::from));
    if with_oracle {
        h.extend(["oracle", "oracle_value", "oracle_stderr"].map(String::from));
        h.extend(numbered("oracle_grad", d));
        h.push("abs_err".into());
    }
    h
}

pub fn cmd_solve(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<CommandReport> {
    prepare(opts)?;
    let prob = cfg.load_problem()?;
    let seed = seed_of(cfg, opts);
    let params = cfg.mlp_section()?.params(seed);
    let points = cfg.evaluation_points(prob.d)?;
    let ctx = context(&prob, &params, cfg)?;
    let oracle = match &cfg.oracle {
        Some(sec) => oracle_values(&prob, sec, cfg.t, &points, seed)?,
        None => None,
    };
    let mut rows = Vec::with_capacity(points.len());
    let mut values = Vec::with_capacity(points.len());
    for (k, x) in points.iter().enumerate() {
        let start = Instant::now();
        let e = mlp_estimate(&ctx, &params, cfg.t, x)?;
        let wall = if opts.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        let mut r = vec![fmt(cfg.t)];
        r.extend(x.iter().map(|v| fmt(*v)));
        r.push(fmt(e.value));
        r.extend(e.gradient.iter().map(|v| fmt(*v)));
        r.extend([
            e.meta.levels.to_string(),
            e.meta.branching.to_string(),
            fmt(e.meta.alpha_time),
            e.meta.seed.to_string(),
            e.meta.gaussian_draws.to_string(),
            fmt(wall),
        ]);
        if let Some(o) = &oracle {
            let o = &o[k];
            r.extend([o.oracle.clone(), fmt(o.value), fmt(o.stderr)]);
            r.extend(o.gradient.iter().map(|v| fmt(*v)));
            r.push(fmt((e.value - o.value).abs()));
        }
        values.push(e.value);
        rows.push(r);
    }
    let run = opts.out.join("solve.csv");
    write_csv(&run, &run_header(prob.d, oracle.is_some()), &rows)?;
    let mut files = vec![run];
    let mut failures = 0;
    if let Some(o) = &oracle {
        let refs: Vec<f64> = o.iter().map(|r| r.value).collect();
        let s = l2_summary(&values, &refs);
        let bound = cfg.oracle.as_ref().and_then(|o| o.max_rel_error);
        let status = match bound {
            Some(b) if s.rel_error <= b => "PASS",
            Some(_) => {
                failures += 1;
                "FAIL"
            }
            None => "",
        };
        let header = ["metric", "value", "half_width", "bound", "status"].map(String::from);
        let b = bound.map(fmt).unwrap_or_default();
        let summary = vec![
            vec!["l2_error".into(), fmt(s.l2_error), fmt(s.half_width), String::new(), String::new()],
            vec!["rel_l2_error".into(), fmt(s.rel_error), String::new(), b, status.into()],
        ];
        let path = opts.out.join("solve_summary.csv");
        write_csv(&path, &header, &summary)?;
        files.push(path);
    }
    Ok(CommandReport { files, failures })
}

/// Largest per-channel deviation |a − b| / max(1, |b|).
fn relative_deviation(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs() / v.abs().max(1.0)).fold(0.0, f64::max)
}

fn estimate_vector(ctx: &MlpContext<'_>, params: &MlpParams, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    let e = mlp_estimate(ctx, params, t, x)?;
    let mut v = vec![e.value];
    v.extend(e.gradient);
    Ok(v)
}

pub fn cmd_freeze(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<CommandReport> {
    prepare(opts)?;
    let prob = cfg.load_problem()?;
    let seed = seed_of(cfg, opts);
    let params = cfg.mlp_section()?.params(seed);
    let ctx = context(&prob, &params, cfg)?;
    let frozen = freeze_to_net(&ctx, &params, cfg.t)?;
    let net_path = opts.out.join("frozen_net.json");
    netcalc::io::save(&frozen, &net_path)?;
    let reloaded = netcalc::io::load(&net_path)?;

    let points = cfg.evaluation_points(prob.d)?;
    let mut rows = Vec::new();
    for (k, x) in points.iter().enumerate() {
        let dev = relative_deviation(&frozen.realize(x)?, &estimate_vector(&ctx, &params, cfg.t, x)?);
        rows.push(SuiteRow::new("freeze", format!("point {k}"), "rel_deviation", dev, Relation::AtMost, 1e-9));
    }
    let size_gap = (frozen.size() as f64 - reloaded.size() as f64).abs();
    rows.push(SuiteRow::new("freeze", "file", "size_gap_after_reload", size_gap, Relation::AtMost, 0.0));
    let report = opts.out.join("freeze_report.csv");
    let failures = write_suite(&report, &rows)?;

    let model = ctx.networks.as_ref().expect("network mode");
    let summary = opts.out.join("freeze_summary.csv");
    let entries: Vec<Vec<String>> = [
        ("size", frozen.size().to_string()),
        ("depth", frozen.depth().to_string()),
        ("width", frozen.width().to_string()),
        ("index_count", count_indices(params.levels as u32, params.branching as u64)?.to_string()),
        ("size_hamiltonian", model.hamiltonian.size().to_string()),
        ("size_psi", model.psi.size().to_string()),
    ]
    .into_iter()
    .map(|(k, v)| vec![k.to_string(), v])
    .collect();
    write_csv(&summary, &["quantity".into(), "value".into()], &entries)?;
    Ok(CommandReport { files: vec![net_path, report, summary], failures })
}

/// Ordinary least-squares slope of ln(y) against ln(x).
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

/// One scaling measurement at dimension d.
pub struct ScalingPoint {
    pub d: usize,
    pub size_frozen: usize,
    pub size_hamiltonian: usize,
    pub depth: usize,
    /// max |frozen value − closed-form-H estimate| over the sample points.
    pub error: f64,
}

pub fn scaling_point(family: &str, d: usize, params: &MlpParams, delta: f64, points: usize) -> Result<ScalingPoint> {
    let prob = families::by_name(family, d)?;
    let r = prob.truncation_level()?;
    let model = network_model(&prob, delta)?;
    let size_hamiltonian = model.hamiltonian.size();
    let ctx = MlpContext::with_networks(&prob, r, model)?;
    let mut p = params.clone();
    p.h_mode = HamiltonianMode::Network;
    let frozen: NeuralNet = freeze_to_net(&ctx, &p, 0.0)?;
    let exact_ctx = MlpContext::exact(&prob, r);
    let mut exact = p.clone();
    exact.h_mode = HamiltonianMode::ExactTruncated;
    let q = super::config::SamplingBox { lo: vec![-1.0; d], hi: vec![1.0; d], count: points };
    let mut error = 0.0f64;
    for x in q.sample(params.seed) {
        let v = frozen.realize(&x)?[0];
        error = error.max((v - mlp_estimate(&exact_ctx, &exact, 0.0, &x)?.value).abs());
    }
    Ok(ScalingPoint { d, size_frozen: frozen.size(), size_hamiltonian, depth: frozen.depth(), error })
}

pub fn cmd_scaling(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<CommandReport> {
    prepare(opts)?;
    let sec = cfg.scaling.as_ref().ok_or_else(|| Error::Config("missing [scaling] section".into()))?;
    let delta = cfg.hamnet.as_ref().ok_or_else(|| Error::Config("scaling needs a [hamnet] section".into()))?.delta;
    let params = cfg.mlp_section()?.params(seed_of(cfg, opts));
    let mut rows = Vec::new();
    let mut pts = Vec::new();
    for &d in &sec.dims {
        let p = scaling_point(&sec.family, d, &params, delta, sec.points)?;
        rows.push(vec![
            d.to_string(),
            fmt(delta),
            p.size_frozen.to_string(),
            p.size_hamiltonian.to_string(),
            p.depth.to_string(),
            fmt(p.error),
        ]);
        pts.push(p);
    }
    if let Some(&d0) = sec.dims.first() {
        for &dl in &sec.delta_sweep {
            let p = scaling_point(&sec.family, d0, &params, dl, sec.points)?;
            rows.push(vec![
                d0.to_string(),
                fmt(dl),
                p.size_frozen.to_string(),
                p.size_hamiltonian.to_string(),
                p.depth.to_string(),
                fmt(p.error),
            ]);
        }
    }
    let header = ["d", "delta", "size_frozen", "size_hamiltonian", "depth", "error"].map(String::from);
    let table = opts.out.join("scaling.csv");
    write_csv(&table, &header, &rows)?;
    let mut files = vec![table];
    let mut failures = 0;
    if pts.len() >= 2 {
        let xs: Vec<f64> = pts.iter().map(|p| p.d as f64).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.size_frozen as f64).collect();
        let slope = log_log_slope(&xs, &ys);
        let row = SuiteRow::new("scaling", sec.family.clone(), "size_slope", slope, Relation::AtMost, sec.max_slope);
        let path = opts.out.join("scaling_summary.csv");
        failures = write_suite(&path, &[row])?;
        files.push(path);
    }
    Ok(CommandReport { files, failures })
}

/// Mean relative L²(Q) error per N with its standard error over seeds.
pub struct ConvergenceLevel {
    pub levels: usize,
    pub branching: usize,
    pub errors: Vec<f64>,
}

impl ConvergenceLevel {
    pub fn mean(&self) -> f64 {
        self.errors.iter().sum::<f64>() / self.errors.len() as f64
    }

    pub fn stderr(&self) -> f64 {
        let n = self.errors.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let m = self.mean();
        (self.errors.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    }
}

/// Relative L²(Q) errors of the estimator at each N over `seeds` seeds
/// starting at `seed`; all points of one run share the seed.
pub fn convergence_study(
    ctx: &MlpContext<'_>,
    base: &MlpParams,
    levels: &[(usize, usize)],
    seeds: usize,
    t: f64,
    points: &[Vec<f64>],
    reference: &[f64],
) -> Result<Vec<ConvergenceLevel>> {
    levels
        .iter()
        .map(|&(n, m)| {
            let errors = (0..seeds as u64)
                .map(|k| {
                    let p = MlpParams { levels: n, branching: m, seed: base.seed.wrapping_add(k), ..base.clone() };
                    let est: Vec<f64> = points.iter().map(|x| mlp_estimate(ctx, &p, t, x).map(|e| e.value)).collect::<Result<_>>()?;
                    Ok(l2_summary(&est, reference).rel_error)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(ConvergenceLevel { levels: n, branching: m, errors })
        })
        .collect()
}

pub fn cmd_convergence(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<CommandReport> {
    prepare(opts)?;
    let prob = cfg.load_problem()?;
    let sec = cfg.convergence.as_ref().ok_or_else(|| Error::Config("missing [convergence] section".into()))?;
    let oracle_sec = cfg.oracle.as_ref().ok_or_else(|| Error::Config("convergence needs an [oracle] section".into()))?;
    let seed = seed_of(cfg, opts);
    let base = cfg.mlp_section()?.params(seed);
    let points = cfg.evaluation_points(prob.d)?;
    let reference: Vec<f64> = match oracle_values(&prob, oracle_sec, cfg.t, &points, seed)? {
        Some(r) => r.iter().map(|o| o.value).collect(),
        None => return Err(Error::Config("convergence needs an oracle other than `none`".into())),
    };
    let ctx = context(&prob, &base, cfg)?;
    let levels: Vec<(usize, usize)> = sec.levels.iter().map(|&n| (n, sec.branching_for(n))).collect();
    let study = convergence_study(&ctx, &base, &levels, sec.seeds, cfg.t, &points, &reference)?;

    let mut rows = Vec::new();
    for lvl in &study {
        for (k, e) in lvl.errors.iter().enumerate() {
            rows.push(vec![lvl.levels.to_string(), lvl.branching.to_string(), (seed.wrapping_add(k as u64)).to_string(), fmt(*e)]);
        }
    }
    let table = opts.out.join("convergence.csv");
    write_csv(&table, &["N", "M", "seed", "rel_l2_error"].map(String::from), &rows)?;
    let means: Vec<Vec<String>> = study
        .iter()
        .map(|l| vec![l.levels.to_string(), l.branching.to_string(), fmt(l.mean()), fmt(l.stderr())])
        .collect();
    let per_level = opts.out.join("convergence_levels.csv");
    write_csv(&per_level, &["N", "M", "mean_rel_l2_error", "stderr"].map(String::from), &means)?;
    let summary: Vec<SuiteRow> = study
        .windows(2)
        .map(|w| {
            let case = format!("N={} -> N={}", w[0].levels, w[1].levels);
            SuiteRow::new("convergence", case, "mean_rel_l2_error", w[1].mean(), Relation::AtMost, w[0].mean())
        })
        .collect();
    let path = opts.out.join("convergence_summary.csv");
    let failures = write_suite(&path, &summary)?;
    Ok(CommandReport { files: vec![table, per_level, path], failures })
}
