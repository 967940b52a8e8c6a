//! `shapecon` command-line tool: fits the shape-constrained estimators to CSV
//! data, tabulates antitonic efficiencies and runs the seeded Monte Carlo
//! studies.
//!
//! Exit status is 0 on success, 1 on a runtime failure and 2 on a usage
//! error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};
use serde::Serialize;

use shapecon::convexm::{
    alternating_fit, antitonic_score_on_grid, are_star, convex_loss_from_score, fisher_info,
    istar, m_estimate, ols, AlternatingConfig, ConvexLoss, DensityModel, LinearModelData,
    PlScore, Symmetry, SCORE_GRID,
};
use shapecon::grenander::grenander_fit;
use shapecon::harness::{
    read_columns, run_experiment, write_artifacts, write_json, Distribution, ExperimentConfig,
    ExperimentId,
};
use shapecon::logconcave::{logconcave_mle, smoothed_mle};
use shapecon::shape::SortedSample;

#[derive(Parser, Debug)]
#[command(name = "shapecon", version, about = "Shape-constrained density estimation and convex M-estimation")]
struct Cli {
    /// Input CSV: one numeric column for densities, or covariates followed
    /// by the response for regression.
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Output file (fits) or directory (experiments).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Seed of the random streams.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Print JSON to standard output instead of a text summary.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Grenander estimator of a decreasing density on (0, ∞).
    FitGrenander,
    /// Log-concave maximum likelihood estimator.
    FitLcmle,
    /// Log-concave MLE smoothed to match the sample variance.
    FitSmoothed,
    /// Antitonic projection of an error model's score.
    Score {
        /// gaussian, laplace, logistic or cauchy.
        #[arg(long, default_value = "cauchy")]
        model: String,
        /// Number of grid points on [0, 1].
        #[arg(long, default_value_t = SCORE_GRID)]
        grid: usize,
    },
    /// Fisher information, antitonic information and their ratio.
    Are {
        /// Models to tabulate; all four families when omitted.
        #[arg(long, value_delimiter = ',')]
        model: Vec<String>,
    },
    /// Linear-regression M-estimation.
    Mest {
        /// ols, lad, huber:<k>, model:<name> or alternating.
        #[arg(long, default_value = "alternating")]
        loss: String,
        /// Fit without an intercept column.
        #[arg(long)]
        no_intercept: bool,
    },
    /// Replicated Monte Carlo study.
    Experiment {
        /// grenander-risk, lcmle-rate, uniform-adaptation, marshall,
        /// are-table, mest-variance or holder-counterexample.
        #[arg(long)]
        id: ExperimentId,
        /// Comma-separated, strictly increasing sample sizes.
        #[arg(long, value_delimiter = ',')]
        n_grid: Option<Vec<usize>>,
        /// Replicates per sample size; the study's default when omitted.
        #[arg(long)]
        replicates: Option<usize>,
        /// Distribution such as exp:1, truncated-decreasing:4,1 or
        /// gaussian-mixture:0.5,-2,1;0.5,2,1.
        #[arg(long)]
        dist: Option<Distribution>,
    },
}

/// Runtime failure carrying its message.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn usage_error(msg: &str) -> ! {
    Cli::command().error(ErrorKind::MissingRequiredArgument, msg).exit()
}

fn input_path(cli: &Cli) -> &Path {
    cli.input.as_deref().unwrap_or_else(|| usage_error("this subcommand needs --input <csv>"))
}

fn read_sample(cli: &Cli) -> Result<SortedSample, Failure> {
    let rows = read_columns(input_path(cli))?;
    if rows.iter().any(|r| r.len() != 1) {
        return Err(Failure("density input must have exactly one column".into()));
    }
    let x: Vec<f64> = rows.into_iter().map(|r| r[0]).collect();
    Ok(SortedSample::new(&x)?)
}

/// Writes `value` as JSON to `--output` if set, and to stdout with `--json`.
fn emit<T: Serialize>(cli: &Cli, value: &T, text: impl FnOnce() -> String) -> Result<(), Failure> {
    if let Some(p) = &cli.output {
        write_json(p, value)?;
    }
    if cli.json {
        println!("{}", serde_json::to_string_pretty(value)?);
    } else {
        print!("{}", text());
    }
    Ok(())
}

fn parse_loss(text: &str) -> Result<Option<ConvexLoss>, Failure> {
    let (name, arg) = text.split_once(':').map_or((text, None), |(a, b)| (a, Some(b)));
    Ok(match (name, arg) {
        ("ols", None) => Some(ConvexLoss::squared()),
        ("lad", None) => Some(ConvexLoss::absolute()),
        ("huber", Some(k)) => {
            let k: f64 = k.parse().map_err(|_| Failure(format!("bad Huber threshold '{k}'")))?;
            Some(ConvexLoss::from_score(PlScore::huber(k)?))
        }
        ("model", Some(m)) => {
            let model = DensityModel::from_name(m)?;
            Some(convex_loss_from_score(&antitonic_score_on_grid(&model, SCORE_GRID)?))
        }
        ("alternating", None) => None,
        _ => usage_error(&format!("unknown loss '{text}'")),
    })
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ")
}

#[derive(Serialize)]
struct AreRow {
    model: String,
    fisher_info: f64,
    antitonic_info: f64,
    are_star: f64,
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::FitGrenander => {
            let g = grenander_fit(&read_sample(cli)?)?;
            emit(cli, &g, || {
                let mut s = format!("Grenander estimate with {} steps\nright_end level\n", g.levels().len());
                for (b, l) in g.breakpoints().iter().zip(g.levels()) {
                    s += &format!("{b:.6} {l:.6}\n");
                }
                s
            })
        }
        Command::FitLcmle => {
            let f = logconcave_mle(&read_sample(cli)?)?;
            emit(cli, &f, || {
                let mut s = format!("log-concave MLE with {} knots\nknot log_density\n", f.knots().len());
                for (k, v) in f.knots().iter().zip(f.logvals()) {
                    s += &format!("{k:.6} {v:.6}\n");
                }
                s
            })
        }
        Command::FitSmoothed => {
            let f = smoothed_mle(&read_sample(cli)?)?;
            emit(cli, &f, || {
                let (m, v) = f.moments();
                format!(
                    "smoothed log-concave MLE: {} knots, a_hat {:.6e}, mean {m:.6}, variance {v:.6}\n",
                    f.base.knots().len(),
                    f.a_hat
                )
            })
        }
        Command::Score { model, grid } => {
            let m = DensityModel::from_name(model)?;
            let psi = antitonic_score_on_grid(&m, *grid)?;
            emit(cli, &psi, || {
                format!(
                    "antitonic score of {model}: {} pieces, information {:.6}, max |slope| {:.6}\n",
                    psi.slopes().len(),
                    psi.information(),
                    psi.max_abs_slope()
                )
            })
        }
        Command::Are { model } => {
            let names: Vec<String> = if model.is_empty() {
                ["gaussian", "laplace", "logistic", "cauchy"].map(String::from).to_vec()
            } else {
                model.clone()
            };
            let mut rows = Vec::new();
            for name in names {
                let m = DensityModel::from_name(&name)?;
                rows.push(AreRow {
                    fisher_info: fisher_info(&m)?,
                    antitonic_info: istar(&m)?,
                    are_star: are_star(&m)?,
                    model: name,
                });
            }
            emit(cli, &rows, || {
                let mut s = String::from("model fisher_info antitonic_info are_star\n");
                for r in &rows {
                    s += &format!("{} {:.6} {:.6} {:.6}\n", r.model, r.fisher_info, r.antitonic_info, r.are_star);
                }
                s
            })
        }
        Command::Mest { loss, no_intercept } => {
            let loss = parse_loss(loss)?;
            let rows = read_columns(input_path(cli))?;
            let p = rows[0].len() - 1;
            let y: Vec<f64> = rows.iter().map(|r| r[p]).collect();
            let x: Vec<Vec<f64>> = rows.iter().map(|r| r[..p].to_vec()).collect();
            let data = LinearModelData::new(&x, y, !no_intercept)?;
            match loss {
                None => {
                    let config = AlternatingConfig {
                        symmetry: if *no_intercept { Symmetry::Symmetric } else { Symmetry::Auto },
                        ..Default::default()
                    };
                    let fit = alternating_fit(&data, &config)?;
                    emit(cli, &fit, || {
                        format!(
                            "beta {}\nvariance_factor {:.6}\nrounds {}\n",
                            fmt_vec(&fit.estimate.beta),
                            fit.estimate.variance_factor,
                            fit.rounds
                        )
                    })
                }
                Some(l) => {
                    let fit = if l == ConvexLoss::squared() { ols(&data)? } else { m_estimate(&data, &l)? };
                    emit(cli, &fit, || {
                        format!("beta {}\niterations {}\n", fmt_vec(&fit.beta), fit.iterations)
                    })
                }
            }
        }
        Command::Experiment { id, n_grid, replicates, dist } => {
            let mut config = ExperimentConfig::new(*id);
            config.seed = cli.seed;
            if let Some(g) = n_grid {
                config.n_grid = g.clone();
            }
            if let Some(r) = replicates {
                config.replicates = *r;
            }
            if let Some(d) = dist {
                config.dist = d.clone();
            }
            if let Err(e) = config.validate() {
                Cli::command().error(ErrorKind::ValueValidation, e.to_string()).exit();
            }
            let report = run_experiment(&config)?;
            if let Some(dir) = &cli.output {
                write_artifacts(&report, dir)?;
            }
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("{} (seed {}, {} replicates, {})", id, config.seed, config.replicates, config.dist);
                println!("n metric mean median std_error scaled");
                for r in report.table.rows() {
                    println!("{} {} {:.6e} {:.6e} {:.3e} {:.6}", r.n, r.metric, r.mean, r.median, r.std_error, r.scaled);
                }
                for s in &report.slopes {
                    println!("slope {} {:.4} ± {:.4}", s.metric, s.fit.slope, s.fit.std_error);
                }
                for c in &report.checks {
                    let n = c.n.map_or(String::new(), |n| format!(" n={n}"));
                    let verdict = if c.holds { "holds" } else { "FAILS" };
                    println!("check {}{n}: {:.6} vs {:.6} {verdict}", c.name, c.value, c.reference);
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
