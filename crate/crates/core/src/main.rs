use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qfboot::bootstrap::{bootstrap_distribution, QuantileGrid};
use qfboot::diagnostics::assumption_report;
use qfboot::gmm::{
    conditional_spline_model, kernel_from_str, mst_bootstrap_pvalue, panel_ab_model, GmmConfig,
    MomentModel, MstMethod, MstResult, Residual, WeightMatrix,
};
use qfboot::reference::weighted_chisq_sample;
use qfboot::sim::{
    run_figure1, run_study, run_table, write_figure_csv, write_study_csv, Scale, SimConfig, TableId,
    FIGURE1_EPS,
};
use qfboot::stats::{quadratic_form_stat, Sample};
use qfboot::weights::{RngState, WeightScheme};
use qfboot::{Error, Result};

#[derive(Parser)]
#[command(name = "qfboot", version, about = "Weighted bootstrap for quadratic forms of sample averages")]
struct Cli {
    /// Worker threads (defaults to rayon's choice). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bootstrap quantiles of n ||mean Z||^2 for a CSV sample.
    Bootstrap {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "gaussian")]
        scheme: WeightScheme,
        #[arg(long, default_value_t = 999)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "0.9,0.95,0.975,0.99")]
        levels: String,
        /// Statistic to compute a p-value for.
        #[arg(long, allow_hyphen_values = true)]
        observed: Option<f64>,
    },
    /// Monte Carlo quantiles of sum_j lambda_j chi2_1.
    Oracle {
        #[arg(long)]
        spectrum: String,
        #[arg(long, default_value = "0.9,0.95,0.975,0.99")]
        levels: String,
        #[arg(long, default_value = "1000000", value_parser = parse_count)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Growth-rate ratios and spectrum of the sample second moment.
    Diagnose {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.0)]
        kappa: f64,
    },
    /// GMM specification test with bootstrap p-value.
    GmmTest {
        #[command(flatten)]
        common: MstArgs,
        #[arg(long, value_enum, default_value_t = WeightArg::TwoStep)]
        weight_matrix: WeightArg,
    },
    /// GEL specification test with bootstrap p-value.
    GelTest {
        #[command(flatten)]
        common: MstArgs,
        #[arg(long, default_value = "el")]
        kernel: String,
    },
    /// Runs one Monte Carlo study from a key = value config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV (standard output if absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduces one of the simulation tables.
    Table {
        #[arg(long)]
        which: TableId,
        #[arg(long, default_value = "desk")]
        scale: Scale,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Override the Monte Carlo replication count.
        #[arg(long, requires = "boot_reps")]
        mc_reps: Option<usize>,
        /// Override the bootstrap replication count.
        #[arg(long, requires = "mc_reps")]
        boot_reps: Option<usize>,
    },
    /// log(K/K^B) against the covariance inflation eps.
    Figure {
        /// Base config; its v entry is replaced by each inflation.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct MstArgs {
    #[arg(long)]
    data: PathBuf,
    /// panel:T (columns y_1..y_T) or spline:K (columns y, x_1..x_q, w).
    #[arg(long)]
    model: String,
    /// Parameter box, shared by all coordinates.
    #[arg(long, allow_hyphen_values = true)]
    bounds: Option<String>,
    #[arg(long, default_value = "gaussian")]
    scheme: WeightScheme,
    #[arg(long, default_value_t = 499)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Identity,
    TwoStep,
}

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 1.0 && v.fract() == 0.0 && v <= 1e15 => Ok(v as usize),
        _ => Err(format!("'{s}' is not a positive integer")),
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad number '{t}'")))
        })
        .collect()
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn build_model(spec: &str, bounds: Option<&str>, data: &Sample) -> Result<Box<dyn MomentModel>> {
    let bad = || Error::InvalidArgument(format!("bad model '{spec}' (expected panel:T or spline:K)"));
    let (kind, arg) = spec.split_once(':').ok_or_else(bad)?;
    let arg: usize = arg.trim().parse().map_err(|_| bad())?;
    let bounds = bounds.map(parse_list).transpose()?;
    let pair = match bounds.as_deref() {
        None => None,
        Some([lo, hi]) => Some((*lo, *hi)),
        Some(_) => return Err(Error::InvalidArgument("--bounds takes lo,hi".into())),
    };
    match kind.trim() {
        "panel" => {
            let mut m = panel_ab_model(arg)?;
            if let Some((lo, hi)) = pair {
                m = m.with_bounds(lo, hi);
            }
            Ok(Box::new(m))
        }
        "spline" => {
            if data.d() < 3 {
                return Err(Error::InvalidArgument(
                    "spline model needs columns y, x_1..x_q, w".into(),
                ));
            }
            let q = data.d() - 2;
            let (lo, hi) = pair.unwrap_or((-10.0, 10.0));
            let m = conditional_spline_model(Residual::linear(q), arg, data, data.d() - 1, vec![(lo, hi); q])?;
            Ok(Box::new(m))
        }
        _ => Err(bad()),
    }
}

fn write_mst(result: &MstResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    let mut header = vec!["stat".to_string(), "pvalue".to_string()];
    header.extend(result.levels.iter().map(|a| format!("quantile@{a}")));
    w.write_record(&header)?;
    let mut row = vec![result.stat.to_string(), result.pvalue.to_string()];
    row.extend(result.quantiles.iter().map(|q| q.to_string()));
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

fn run_mst(common: &MstArgs, method: MstMethod) -> Result<()> {
    let data = Sample::from_csv_path(&common.data)?;
    let model = build_model(&common.model, common.bounds.as_deref(), &data)?;
    let result = mst_bootstrap_pvalue(
        model.as_ref(),
        &data,
        &method,
        common.scheme,
        common.reps,
        RngState::new(common.seed, 0, 0),
    )?;
    write_mst(&result)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bootstrap {
            data,
            scheme,
            reps,
            seed,
            levels,
            observed,
        } => {
            let sample = Sample::from_csv_path(&data)?;
            let grid = QuantileGrid::parse(&levels)?;
            let dist = bootstrap_distribution(&sample, scheme, reps, RngState::new(seed, 0, 0))?;
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            let mut header = vec!["q_n".to_string(), "reps".to_string()];
            header.extend(grid.levels().iter().map(|a| format!("quantile@{a}")));
            let mut row = vec![quadratic_form_stat(&sample).to_string(), reps.to_string()];
            for &a in grid.levels() {
                row.push(dist.quantile(a)?.to_string());
            }
            if let Some(t) = observed {
                header.extend(["observed".to_string(), "pvalue".to_string()]);
                row.extend([t.to_string(), dist.pvalue(t).to_string()]);
            }
            w.write_record(&header)?;
            w.write_record(&row)?;
            w.flush()?;
        }
        Command::Oracle {
            spectrum,
            levels,
            draws,
            seed,
        } => {
            let spectrum = parse_list(&spectrum)?;
            let grid = QuantileGrid::parse(&levels)?;
            let mut sample = weighted_chisq_sample(&spectrum, draws, RngState::new(seed, 0, 0))?;
            sample.sort_by(f64::total_cmp);
            let dist = qfboot::bootstrap::BootstrapDistribution::from_replicates(
                sample,
                WeightScheme::Gaussian,
                RngState::new(seed, 0, 0),
            )?;
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            w.write_record(["level", "quantile"])?;
            for &a in grid.levels() {
                w.write_record([a.to_string(), dist.quantile(a)?.to_string()])?;
            }
            w.flush()?;
        }
        Command::Diagnose { data, gamma, kappa } => {
            let sample = Sample::from_csv_path(&data)?;
            let report = assumption_report(&sample, gamma, kappa)?;
            let mut out = io::stdout().lock();
            for (k, v) in report.to_key_values() {
                writeln!(out, "{k}={v}")?;
            }
        }
        Command::GmmTest {
            common,
            weight_matrix,
        } => {
            let wm = match weight_matrix {
                WeightArg::Identity => WeightMatrix::Identity,
                WeightArg::TwoStep => WeightMatrix::TwoStep,
            };
            run_mst(&common, MstMethod::Gmm(GmmConfig::new(wm)))?;
        }
        Command::GelTest { common, kernel } => {
            run_mst(&common, MstMethod::Gel(kernel_from_str(&kernel)?))?;
        }
        Command::Simulate { config, out } => {
            let cfg = SimConfig::from_path(&config)?;
            let result = run_study(&cfg)?;
            write_study_csv(&cfg, &result, output(out.as_ref())?)?;
        }
        Command::Table {
            which,
            scale,
            out,
            seed,
            mc_reps,
            boot_reps,
        } => {
            let scale = match (mc_reps, boot_reps) {
                (Some(mc_reps), Some(boot_reps)) => Scale::Custom { mc_reps, boot_reps },
                _ => scale,
            };
            std::fs::create_dir_all(&out)?;
            let table = run_table(which, scale, seed)?;
            table.write_csv(BufWriter::new(File::create(out.join(format!("{which}.csv")))?))?;
        }
        Command::Figure { config, eps, out } => {
            let cfg = SimConfig::from_path(&config)?;
            let eps = match eps {
                Some(s) => parse_list(&s)?,
                None => FIGURE1_EPS.to_vec(),
            };
            let rows = run_figure1(&cfg, &eps)?;
            write_figure_csv(&rows, output(out.as_ref())?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
