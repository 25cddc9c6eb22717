//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error, 3 configuration error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::adversarial::LossReport;
use crate::error::{Error, Result};
use crate::estimators::Method;
use crate::experiments::config::ConfigFile;
use crate::experiments::{
    aniso_comparison, fmt_num, loglog_fit, phase_sweep, run_risk, write_aniso, write_csv,
    write_sweep, write_table, ExperimentConfig,
};
use crate::selftest;

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "advreg", version, about = "Adversarial sup-norm regression experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Adversarial loss of the (plug-in) predictor for one fit.
    EvalLoss(CommonArgs),
    /// Ideal adversarial loss of the configured function.
    IdealLoss(CommonArgs),
    /// Fit the base estimator and tabulate it on the lattice.
    Fit(CommonArgs),
    /// Monte Carlo risk at every sample size.
    Risk(CommonArgs),
    /// Risk at every sample size plus the log-log rate fit.
    RateFit(CommonArgs),
    /// Risk decomposition over the `sweep.q` grid.
    PhaseSweep(CommonArgs),
    /// Anisotropic versus isotropic ideal losses over the `sweep.q` grid.
    AnisoCompare(CommonArgs),
    /// Run the built-in invariant suites.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; never changes results.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Override lattice points per axis.
    #[arg(long)]
    pub resolution: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    #[arg(long)]
    pub jobs: Option<usize>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn main_with_args<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::InvalidParameter("--jobs must be >= 1".into()));
        }
        b = b.num_threads(j);
    }
    let pool = b
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn load(args: &CommonArgs) -> Result<ExperimentConfig> {
    let mut file = ConfigFile::load(&args.config)?;
    if let Some(s) = args.seed {
        file.seed = s;
    }
    if let Some(r) = args.resolution {
        file.lattice.points_per_axis = Some(r);
    }
    let cfg = ExperimentConfig::from_file(&file)?;
    cfg.perturbation(cfg.q).map_err(|e| Error::Config(e.to_string()))?;
    Ok(cfg)
}

/// Dispatch one command; returns the `key=value` summary line.
pub fn run(cmd: Command) -> Result<String> {
    match cmd {
        Command::Selftest(a) => with_pool(a.jobs, run_selftest),
        Command::EvalLoss(a) => dispatch(&a, eval_loss),
        Command::IdealLoss(a) => dispatch(&a, ideal_loss),
        Command::Fit(a) => dispatch(&a, fit),
        Command::Risk(a) => dispatch(&a, risk),
        Command::RateFit(a) => dispatch(&a, rate),
        Command::PhaseSweep(a) => dispatch(&a, sweep),
        Command::AnisoCompare(a) => dispatch(&a, aniso),
    }
}

fn dispatch(
    args: &CommonArgs,
    op: fn(&ExperimentConfig, Option<&Path>) -> Result<String>,
) -> Result<String> {
    let cfg = load(args)?;
    let seed = cfg.seed;
    with_pool(args.jobs, || op(&cfg, args.out.as_deref())).map_err(|e| match e {
        Error::EmptyNeighborhood { point } => Error::InvalidParameter(format!(
            "empty perturbation neighborhood at {point:?} (reproduce with seed {seed})"
        )),
        other => other,
    })
}

fn report_csv(report: &LossReport<f64>, path: &Path) -> Result<()> {
    let d = report.argmax_x.len();
    let mut header: Vec<String> = vec!["value".into()];
    header.extend((1..=d).map(|i| format!("x_{i}")));
    header.extend((1..=d).map(|i| format!("delta_{i}")));
    header.push("grid_spacing".into());
    let mut row = vec![fmt_num(report.value)];
    row.extend(report.argmax_x.iter().copied().map(fmt_num));
    row.extend(report.argmax_delta.iter().copied().map(fmt_num));
    row.push(fmt_num(report.grid_spacing));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(path, &header, [row])
}

fn loss_summary(r: &LossReport<f64>) -> String {
    let join = |v: &[f64]| v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(";");
    format!(
        "value={} argmax_x={} argmax_delta={} grid_spacing={}",
        fmt_num(r.value),
        join(&r.argmax_x),
        join(&r.argmax_delta),
        fmt_num(r.grid_spacing)
    )
}

fn eval_loss(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<String> {
    let lattice = cfg.lattice()?;
    let n = cfg.ns[0];
    let attack = cfg.attack(cfg.q_at(n), &lattice)?;
    let base = cfg.fit_base(n, 0, &lattice)?;
    let report = if cfg.plug_in {
        attack.adversarial_loss(&cfg.function, &attack.plug_in(&base)?)?
    } else {
        attack.adversarial_loss(&cfg.function, &base)?
    };
    if let Some(p) = out {
        report_csv(&report, p)?;
    }
    Ok(format!("{} n={n} plug_in={}", loss_summary(&report), cfg.plug_in))
}

fn ideal_loss(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<String> {
    let lattice = cfg.lattice()?;
    let q = cfg.q_at(cfg.ns[0]);
    let report = cfg.attack(q, &lattice)?.ideal_loss(&cfg.function)?;
    if let Some(p) = out {
        report_csv(&report, p)?;
    }
    Ok(format!("{} q={}", loss_summary(&report), fmt_num(q)))
}

fn method_summary(m: &Method<f64>) -> String {
    match m {
        Method::LocalPoly { degree, bandwidth } => {
            format!("method=local_poly degree={degree} bandwidth={}", fmt_num(*bandwidth))
        }
        Method::AnisoKernel { bandwidths } => format!(
            "method=aniso_kernel bandwidths={}",
            bandwidths.iter().map(|h| fmt_num(*h)).collect::<Vec<_>>().join(";")
        ),
        Method::Constant(c) => format!("method=constant value={}", fmt_num(*c)),
        Method::Exact { .. } => "method=exact".into(),
        Method::Ideal { .. } => "method=ideal".into(),
        Method::PlugIn { base } => format!("plug_in_of=({})", method_summary(base)),
        Method::Tabulated => "method=tabulated".into(),
    }
}

fn fit(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<String> {
    let lattice = cfg.lattice()?;
    let n = cfg.ns[0];
    let base = cfg.fit_base(n, 0, &lattice)?;
    let fx: Vec<f64> = lattice.points().map(|x| cfg.function.eval(&x)).collect();
    let bx = base.values_on(&lattice);
    let px = if cfg.plug_in {
        let attack = cfg.attack(cfg.q_at(n), &lattice)?;
        Some(attack.plug_in(&base)?.values_on(&lattice))
    } else {
        None
    };
    let std = fx.iter().zip(&bx).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if let Some(p) = out {
        let d = lattice.dim();
        let mut header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
        header.extend(["truth".to_string(), "base".to_string()]);
        if px.is_some() {
            header.push("plug_in".into());
        }
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = (0..lattice.len()).map(|i| {
            let mut row: Vec<String> = lattice.point(i).into_iter().map(fmt_num).collect();
            row.push(fmt_num(fx[i]));
            row.push(fmt_num(bx[i]));
            if let Some(px) = &px {
                row.push(fmt_num(px[i]));
            }
            row
        });
        write_table(p, &header, rows)?;
    }
    Ok(format!(
        "{} training_n={} standard_loss={}",
        method_summary(base.method()),
        base.training_n(),
        fmt_num(std)
    ))
}

fn risk(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<String> {
    let res = run_risk(cfg)?;
    if let Some(p) = out {
        write_csv(res.records(), p)?;
    }
    let last = res.risks.last().expect("n grid is nonempty");
    Ok(format!(
        "n={} mean={} stderr={} standard_risk={} ideal_loss={} q={}",
        last.n,
        fmt_num(last.mean),
        fmt_num(last.stderr),
        fmt_num(last.mean_standard),
        fmt_num(last.ideal_loss),
        fmt_num(last.q)
    ))
}

fn rate(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<String> {
    if cfg.ns.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: cfg.ns.len(),
        });
    }
    let res = run_risk(cfg)?;
    if let Some(p) = out {
        write_csv(res.records(), p)?;
    }
    let ns: Vec<usize> = res.risks.iter().map(|r| r.n).collect();
    let means: Vec<f64> = res.risks.iter().map(|r| r.mean).collect();
    let fit = crate::experiments::rate_fit(&ns, &means)?;
    Ok(format!(
        "slope={} intercept={} max_residual={}",
        fmt_num(fit.slope),
        fmt_num(fit.intercept),
        fmt_num(fit.max_residual)
    ))
}

fn sweep(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<String> {
    let rows = phase_sweep(cfg, &cfg.sweep_q)?;
    if let Some(p) = out {
        write_sweep(&rows, p)?;
    }
    let slopes: Vec<f64> = rows.iter().filter_map(|r| r.local_slope).collect();
    let last = slopes.last().copied().map(fmt_num).unwrap_or_else(|| "NaN".into());
    Ok(format!(
        "rows={} standard_risk={} final_local_slope={last}",
        rows.len(),
        fmt_num(rows[0].standard_risk)
    ))
}

fn aniso(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<String> {
    let rows = aniso_comparison(cfg, &cfg.sweep_q)?;
    if let Some(p) = out {
        write_aniso(&rows, p)?;
    }
    let pos: Vec<_> = rows.iter().filter(|r| r.q > 0.0).collect();
    let lq: Vec<f64> = pos.iter().map(|r| r.q.ln()).collect();
    let slope = |ys: Vec<f64>| {
        loglog_fit(&lq, &ys)
            .map(|f| fmt_num(f.slope))
            .unwrap_or_else(|_| "NaN".into())
    };
    Ok(format!(
        "rows={} aniso_slope={} iso_slope={}",
        rows.len(),
        slope(pos.iter().map(|r| r.aniso_ideal).collect()),
        slope(pos.iter().map(|r| r.iso_ideal).collect())
    ))
}

fn run_selftest() -> Result<String> {
    let suites = selftest::run_all()?;
    let checks: usize = suites.iter().map(|s| s.checks).sum();
    let failures: Vec<&String> = suites.iter().flat_map(|s| s.failures.iter()).collect();
    for f in &failures {
        eprintln!("selftest failure: {f}");
    }
    if failures.is_empty() {
        Ok(format!("selftest=pass suites={} checks={checks}", suites.len()))
    } else {
        Err(Error::InvalidParameter(format!(
            "selftest=fail checks={checks} failures={}",
            failures.len()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_subcommands() {
        let c = Cli::try_parse_from(["advreg", "ideal-loss", "--config", "c.cfg", "--out", "r.csv"]).unwrap();
        match c.command {
            Command::IdealLoss(a) => {
                assert_eq!(a.config, PathBuf::from("c.cfg"));
                assert_eq!(a.out, Some(PathBuf::from("r.csv")));
            }
            other => panic!("parsed {other:?}"),
        }
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(main_with_args(["advreg"]), EXIT_USAGE);
        assert_eq!(main_with_args(["advreg", "risk"]), EXIT_USAGE);
        assert_eq!(main_with_args(["advreg", "frobnicate"]), EXIT_USAGE);
    }

    #[test]
    fn config_errors_exit_three() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[function]\nlabel = \"f1\"\n[estimator]\nbandwith = 0.3\n").unwrap();
        let p = path.to_str().unwrap();
        assert_eq!(main_with_args(["advreg", "risk", "--config", p]), EXIT_CONFIG);
        assert_eq!(
            main_with_args(["advreg", "risk", "--config", "/no/such/file.toml"]),
            EXIT_CONFIG
        );
    }
}
