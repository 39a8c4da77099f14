use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use menger_core::estimators::{continuous_curvature_sq, curvature_over_ulambda, McOptions};
use menger_core::harness::{self, Experiment, HarnessConfig, RatioParams, RatioRow, Suite, SuiteReport};
use menger_core::measure::{gen_four_corner_cantor, gen_lipschitz_graph, gen_plane_patch, gen_sphere};
use menger_core::multiscale::{jones_flatness_continuous, jones_flatness_discrete};
use menger_core::planes::beta2;
use menger_core::{rng, Ball, Vector, WeightedPointCloud};

#[derive(Parser)]
#[command(name = "menger", version, about = "Menger-type curvature and multiscale flatness of point-cloud measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Plane,
    Sphere,
    Graph,
    Cantor,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Discrete,
    Continuous,
}

#[derive(clap::Args, Serialize)]
struct InputArgs {
    /// Point-cloud CSV (`dim=D` header, rows `c_1,...,c_D,weight`).
    #[arg(long)]
    input: PathBuf,
    /// Intrinsic dimension.
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// `cx,cy,...:r`; defaults to a ball enclosing the support.
    #[arg(long)]
    ball: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic measure as CSV.
    Generate {
        #[arg(value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 1)]
        d: usize,
        /// Ambient dimension.
        #[arg(long = "D", default_value_t = 2)]
        ambient: usize,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        level: u32,
        #[arg(long, default_value_t = 1.0)]
        lipschitz: f64,
    },
    /// Beta number of a ball.
    Beta {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Jones-type flatness of a ball.
    Flatness {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value_t = Mode::Discrete)]
        mode: Mode,
        #[arg(long)]
        alpha0: Option<f64>,
        /// Scale ratio of the continuous quadrature.
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        /// Base points used by the continuous quadrature.
        #[arg(long)]
        subsample: Option<usize>,
    },
    /// Curvature integral of a ball, optionally over separated simplices.
    Curvature {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long)]
        lambda: Option<f64>,
        /// Sum over all tuples exactly when there are at most this many.
        #[arg(long, default_value_t = 1e7)]
        exact_limit: f64,
    },
    /// Run a verification suite; exits 1 if any check fails.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long)]
        alpha0: Option<f64>,
    },
    /// Tabulate an inequality ratio over seeded balls.
    Ratio {
        /// thm12, thm13, prop11 or prop43.
        experiment: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Comma-separated separation parameters.
        #[arg(long, default_value = "0.2,0.4,0.8")]
        lambda: String,
        #[arg(long)]
        alpha0: Option<f64>,
        #[arg(long, default_value_t = 20)]
        balls: usize,
    },
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    command: &'a str,
    seed: u64,
    config: C,
    result: R,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("MENGER_THREADS") {
        let n: usize = v.parse().with_context(|| format!("MENGER_THREADS={v}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn emit_json<C: Serialize, R: Serialize>(cli: &Cli, command: &str, config: C, result: R) -> Result<()> {
    let env = Envelope {
        command,
        seed: cli.seed,
        config,
        result,
    };
    emit(cli, &(serde_json::to_string_pretty(&env)? + "\n"))
}

fn load(path: &Path, d: usize) -> Result<WeightedPointCloud> {
    WeightedPointCloud::read_csv(path, d).with_context(|| format!("reading {}", path.display()))
}

fn parse_ball(spec: &str, dim: usize) -> Result<Ball> {
    let (c, r) = spec.split_once(':').ok_or_else(|| anyhow!("ball `{spec}`: expected cx,cy,...:r"))?;
    let coords = c
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("ball center `{c}`"))?;
    if coords.len() != dim {
        bail!("ball center has {} coordinates, cloud has dimension {dim}", coords.len());
    }
    let r: f64 = r.trim().parse().with_context(|| format!("ball radius `{r}`"))?;
    Ok(Ball::new(Vector::new(coords)?, r)?)
}

fn ball_for(input: &InputArgs, cloud: &WeightedPointCloud) -> Result<Ball> {
    match &input.ball {
        Some(s) => parse_ball(s, cloud.dim()),
        None => Ok(harness::enclosing_ball(cloud)),
    }
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Generate {
            kind,
            d,
            ambient,
            n,
            level,
            lipschitz,
        } => {
            let mut r = ChaCha8Rng::seed_from_u64(rng::derive(cli.seed, rng::streams::GENERATOR));
            let cloud = match kind {
                Kind::Plane => gen_plane_patch(*d, *ambient, *n, &mut r)?,
                Kind::Sphere => gen_sphere(*ambient, *n, &mut r)?,
                Kind::Graph => gen_lipschitz_graph(*d, *ambient, *lipschitz, *n, &mut r)?,
                Kind::Cantor => gen_four_corner_cantor(*level)?,
            };
            emit(cli, &cloud.to_csv_string())?;
        }
        Command::Beta { input } => {
            let cloud = load(&input.input, input.d)?;
            let b = ball_for(input, &cloud)?;
            let res = beta2(&cloud, &b, input.d)?;
            emit_json(cli, "beta", (input, &b), res)?;
        }
        Command::Flatness {
            input,
            mode,
            alpha0,
            rho,
            subsample,
        } => {
            let cloud = load(&input.input, input.d)?;
            let b = ball_for(input, &cloud)?;
            let a = alpha0.unwrap_or(harness::WORKING_ALPHA0);
            let report = match mode {
                Mode::Discrete => {
                    let family = harness::family_for(&cloud, &b, a, input.d);
                    jones_flatness_discrete(&cloud, &b, &family, input.d)?
                }
                Mode::Continuous => jones_flatness_continuous(&cloud, &b, input.d, *rho, *subsample)?,
            };
            #[derive(Serialize)]
            struct Cfg<'a> {
                input: &'a InputArgs,
                ball: &'a Ball,
                mode: Mode,
                alpha0: f64,
                rho: f64,
            }
            let cfg = Cfg {
                input,
                ball: &b,
                mode: *mode,
                alpha0: a,
                rho: *rho,
            };
            emit_json(cli, "flatness", cfg, report)?;
        }
        Command::Curvature {
            input,
            samples,
            lambda,
            exact_limit,
        } => {
            if *samples == 0 {
                bail!("--samples must be positive");
            }
            let cloud = load(&input.input, input.d)?;
            let b = ball_for(input, &cloud)?;
            let opts = McOptions {
                n_samples: *samples,
                seed: cli.seed,
                exact_limit: *exact_limit,
            };
            #[derive(Serialize)]
            struct Cfg<'a> {
                input: &'a InputArgs,
                ball: &'a Ball,
                options: McOptions,
                lambda: Option<f64>,
            }
            let cfg = Cfg {
                input,
                ball: &b,
                options: opts,
                lambda: *lambda,
            };
            match lambda {
                Some(l) => {
                    let est = curvature_over_ulambda(&cloud, &b, *l, input.d, &opts)?;
                    emit_json(cli, "curvature", cfg, est)?;
                }
                None => {
                    let est = continuous_curvature_sq(&cloud, Some(&b), input.d, &opts)?;
                    emit_json(cli, "curvature", cfg, est)?;
                }
            }
        }
        Command::Verify { suite, samples, alpha0 } => {
            let suite: Suite = suite.parse().map_err(|e: String| anyhow!(e))?;
            if *samples == 0 {
                bail!("--samples must be positive");
            }
            let cfg = HarnessConfig {
                seed: cli.seed,
                mc_samples: *samples,
                alpha0: *alpha0,
                ..HarnessConfig::default()
            };
            let report = harness::run_suite(suite, &cfg);
            emit(cli, &render_report(&report, cli.format)?)?;
            for name in report.failures() {
                eprintln!("FAILED {name}");
            }
            return Ok(report.passed);
        }
        Command::Ratio {
            experiment,
            input,
            d,
            samples,
            lambda,
            alpha0,
            balls,
        } => {
            let exp: Experiment = experiment.parse().map_err(|e: String| anyhow!(e))?;
            if *samples == 0 || *balls == 0 {
                bail!("--samples and --balls must be positive");
            }
            let lambdas = lambda
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .with_context(|| format!("--lambda `{lambda}`"))?;
            if lambdas.iter().any(|l| !(*l > 0.0)) {
                bail!("--lambda values must be positive");
            }
            let cloud = load(input, *d)?;
            let params = RatioParams {
                d: *d,
                seed: cli.seed,
                n_balls: *balls,
                mc_samples: *samples,
                alpha0: alpha0.unwrap_or(harness::WORKING_ALPHA0),
                ..RatioParams::default()
            };
            let rows = harness::ratio_experiment(&cloud, exp, &params, &lambdas);
            match cli.format {
                Format::Csv => emit(cli, &rows_csv(&rows))?,
                Format::Json => emit_json(cli, "ratio", (experiment, &params, &lambdas), &rows)?,
            }
        }
    }
    Ok(true)
}

fn rows_csv(rows: &[RatioRow]) -> String {
    let mut s = String::from(RatioRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct ReportOut<'a> {
    #[serde(flatten)]
    report: &'a SuiteReport,
    failures: Vec<&'a str>,
}

fn render_report(report: &SuiteReport, format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => {
            let out = ReportOut {
                report,
                failures: report.failures(),
            };
            serde_json::to_string_pretty(&out)? + "\n"
        }
        Format::Csv => {
            let mut s = String::from("name,passed,value,limit,detail\n");
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            for c in &report.checks {
                s.push_str(&format!(
                    "{},{},{},{},\"{}\"\n",
                    c.name,
                    c.passed,
                    opt(c.value),
                    opt(c.limit),
                    c.detail.replace('"', "'")
                ));
            }
            s
        }
    })
}
