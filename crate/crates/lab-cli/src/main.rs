use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dyadic_lab::battery::Stage;
use dyadic_lab::calibration::{self, Calibration};
use dyadic_lab::entropy::shannon_entropy;
use dyadic_lab::experiment::{
    experiment_inequalities, experiment_katz_tao, experiment_theorem11, ExperimentReport,
    GeneratorSpec,
};
use dyadic_lab::geometry::conical::{conical_scan, exceptional_set};
use dyadic_lab::geometry::distance::{distance_set_count, pinned_scan, PinPolicy};
use dyadic_lab::geometry::projection::projected_entropy;
use dyadic_lab::geometry::Direction;
use dyadic_lab::io;
use dyadic_lab::regular::{
    generate_random_regular, measure_to_set, regularity_constant_with, set_to_measure, Exponent,
    RandomRegularSpec, VerifierOptions,
};
use dyadic_lab::scenery::measure_scenery;
use dyadic_lab::{DyadicMeasure, GridSet};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lab-cli", version = env!("CARGO_PKG_VERSION"), about = "Dyadic entropy and distance-set experiments")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a point set (or the uniform measure on it).
    Generate(GenerateArgs),
    /// Compute the regularity constant of a point set.
    VerifyRegular {
        input: PathBuf,
        /// Fixed exponent; fitted when omitted.
        #[arg(long)]
        s: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dyadic entropies H(μ, D_k) of a set or measure file.
    Entropy {
        input: PathBuf,
        /// Depths, comma separated; all depths when omitted.
        #[arg(long, value_delimiter = ',')]
        k: Vec<u32>,
    },
    /// Scenery atoms over depths [a, b) with projected entropies.
    Scenery {
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        a: u32,
        /// Defaults to N - q.
        #[arg(long)]
        b: Option<u32>,
        #[arg(long)]
        q: u32,
        /// Directions (radians) for projected entropies, planar input only.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2])]
        theta: Vec<f64>,
    },
    /// Pinned distance counts of every (or sampled) pin of a set.
    PinnedScan {
        input: PathBuf,
        #[arg(long)]
        t: f64,
        #[command(flatten)]
        pins: PinArgs,
    },
    /// Size of the distance set dist(A, B) at the common scale.
    DistCount { a: PathBuf, b: PathBuf },
    /// Well-surrounded scan and the exceptional set.
    Conical {
        input: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        rmin: f64,
        /// With `--kappa`, compare the exceptional set against 2^{(1-κ)sN}.
        #[arg(long, requires = "kappa")]
        s: Option<f64>,
        #[arg(long, requires = "s")]
        kappa: Option<f64>,
        #[command(flatten)]
        pins: PinArgs,
    },
    #[command(subcommand)]
    Experiment(Experiment),
    /// Fit the constants on the calibration battery.
    Calibrate,
}

#[derive(Subcommand)]
enum Experiment {
    /// Exceptional pins of a regular set across scales.
    Theorem11 {
        #[command(flatten)]
        generator: PatternArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![6, 8, 10])]
        scales: Vec<u32>,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 0.0)]
        max_fraction: f64,
        /// `all`, `auto`, or a sample size; sampling reuses `--seed`.
        #[arg(long, default_value = "auto")]
        pins: String,
    },
    /// Maximal pinned counts of the Katz–Tao example.
    KatzTao {
        #[arg(long, value_delimiter = ',', default_values_t = vec![4, 6, 8, 10, 12])]
        scales: Vec<u32>,
    },
    /// Entropy inequalities over the battery against frozen constants.
    Inequalities {
        /// Defaults to the committed constants file.
        #[arg(long)]
        constants: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = StageArg::Acceptance)]
        stage: StageArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Calibration,
    Acceptance,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pattern {
    ThreeQuadrant,
    Full,
    Cantor,
    KatzTao,
    Random,
}

#[derive(Args)]
struct PatternArgs {
    #[arg(long, value_enum)]
    pattern: Pattern,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long = "C", default_value_t = 4.0)]
    c: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl PatternArgs {
    fn spec(&self) -> Result<GeneratorSpec> {
        Ok(match self.pattern {
            Pattern::ThreeQuadrant => GeneratorSpec::ThreeQuadrant,
            Pattern::Full => GeneratorSpec::FullGrid,
            Pattern::Cantor => GeneratorSpec::MiddleHalfCantor,
            Pattern::KatzTao => GeneratorSpec::KatzTao,
            Pattern::Random => GeneratorSpec::Random {
                s: self.s.context("--pattern random needs --s")?,
                c_target: self.c,
                seed: self.seed,
            },
        })
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    generator: PatternArgs,
    #[arg(long)]
    scale: u32,
    /// Dimension for the random pattern.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Write the uniform measure on the set instead of the set.
    #[arg(long)]
    measure: bool,
}

#[derive(Args)]
struct PinArgs {
    /// `all`, `auto`, or a sample size.
    #[arg(long, default_value = "auto")]
    pins: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl PinArgs {
    fn policy(&self) -> Result<PinPolicy> {
        pin_policy(&self.pins, self.seed)
    }
}

fn pin_policy(pins: &str, seed: u64) -> Result<PinPolicy> {
    Ok(match pins {
        "all" => PinPolicy::All,
        "auto" => PinPolicy::Auto { seed },
        n => PinPolicy::Sample {
            n: n.parse().with_context(|| format!("--pins expects all, auto or a count, got `{n}`"))?,
            seed,
        },
    })
}

enum Loaded {
    Set(GridSet),
    Measure(DyadicMeasure),
}

fn load(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    let ctx = || format!("parsing {}", path.display());
    if first.starts_with("measure") {
        Ok(Loaded::Measure(io::parse_measure(&text).with_context(ctx)?))
    } else {
        Ok(Loaded::Set(io::parse_grid_set(&text).with_context(ctx)?))
    }
}

fn load_set(path: &Path) -> Result<GridSet> {
    match load(path)? {
        Loaded::Set(s) => Ok(s),
        Loaded::Measure(m) => Ok(measure_to_set(&m)?),
    }
}

fn load_measure(path: &Path) -> Result<DyadicMeasure> {
    match load(path)? {
        Loaded::Set(s) => Ok(set_to_measure(&s)),
        Loaded::Measure(m) => Ok(m),
    }
}

struct Output {
    path: Option<PathBuf>,
    format: Format,
}

impl Output {
    fn text(&self, s: &str) -> Result<()> {
        match &self.path {
            Some(p) => std::fs::write(p, s).with_context(|| format!("writing {}", p.display())),
            None => {
                print!("{s}");
                Ok(())
            }
        }
    }

    fn json<T: serde::Serialize>(&self, value: &T) -> Result<()> {
        self.text(&(serde_json::to_string_pretty(value)? + "\n"))
    }

    fn csv(&self, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        self.text(&String::from_utf8(w.into_inner()?)?)
    }

    fn report(&self, report: &ExperimentReport) -> Result<ExitCode> {
        match self.format {
            Format::Json => self.json(report)?,
            Format::Csv => self.csv(
                &["criterion", "verdict", "parameters", "detail"],
                report.verdicts.iter().map(|v| {
                    vec![
                        v.criterion.clone(),
                        serde_json::to_value(v.verdict).unwrap().as_str().unwrap().to_string(),
                        serde_json::to_string(&v.parameters).unwrap(),
                        v.detail.clone(),
                    ]
                }),
            )?,
        }
        Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let out = Output {
        path: cli.out,
        format: cli.format,
    };
    match cli.command {
        Command::Generate(g) => {
            let spec = g.generator.spec()?;
            let set = match spec {
                GeneratorSpec::Random { s, c_target, seed } => generate_random_regular(&RandomRegularSpec {
                    dim: g.dim,
                    scale: g.scale,
                    s,
                    c_target,
                    seed,
                })?,
                _ => spec.generate(g.scale)?,
            };
            if g.measure {
                out.text(&io::format_measure(&set_to_measure(&set)))?;
            } else {
                out.text(&io::format_grid_set(&set))?;
            }
        }
        Command::VerifyRegular { input, s, seed } => {
            let set = load_set(&input)?;
            let exponent = s.map_or(Exponent::Fit, Exponent::Fixed);
            let opts = VerifierOptions {
                seed,
                ..VerifierOptions::default()
            };
            let report = regularity_constant_with(&set, exponent, &opts)?;
            match out.format {
                Format::Json => out.json(&report)?,
                Format::Csv => out.csv(
                    &["k", "expected", "min_count", "max_count", "mean_count", "constant"],
                    report.per_k.iter().map(|r| {
                        vec![
                            r.k.to_string(),
                            r.expected.to_string(),
                            r.min_count.to_string(),
                            r.max_count.to_string(),
                            r.mean_count.to_string(),
                            r.constant.to_string(),
                        ]
                    }),
                )?,
            }
        }
        Command::Entropy { input, k } => {
            let mu = load_measure(&input)?;
            let ks = if k.is_empty() { (1..=mu.depth()).collect() } else { k };
            let rows = ks
                .iter()
                .map(|&k| Ok((k, shannon_entropy(&mu, k)?.bits)))
                .collect::<Result<Vec<_>>>()?;
            match out.format {
                Format::Json => out.json(
                    &rows
                        .iter()
                        .map(|&(k, h)| json!({"k": k, "entropy": h, "normalized": if k > 0 { json!(h / k as f64) } else { json!(null) }}))
                        .collect::<Vec<_>>(),
                )?,
                Format::Csv => out.csv(
                    &["k", "entropy", "normalized"],
                    rows.iter().map(|&(k, h)| {
                        let norm = if k > 0 { (h / k as f64).to_string() } else { String::new() };
                        vec![k.to_string(), h.to_string(), norm]
                    }),
                )?,
            }
        }
        Command::Scenery { input, a, b, q, theta } => {
            let mu = load_measure(&input)?;
            let b = match b {
                Some(b) => b,
                None => mu.depth().checked_sub(q).context("q exceeds the measure depth")?,
            };
            let scn = measure_scenery(&mu, a, b, q)?;
            let dirs = if mu.dim() == 2 {
                theta.iter().map(|&t| Ok(Direction::new(t)?)).collect::<Result<Vec<_>>>()?
            } else {
                Vec::new()
            };
            let rows = scn
                .atoms()
                .iter()
                .map(|atom| {
                    let h = shannon_entropy(&atom.view, q)?.bits / q as f64;
                    let proj = dirs
                        .iter()
                        .map(|&v| Ok(projected_entropy(&atom.view, v, q)?))
                        .collect::<Result<Vec<f64>>>()?;
                    Ok((format!("{:016x}", dyadic_lab::scenery::ViewKey::of(&atom.view).digest()), atom.weight, h, proj))
                })
                .collect::<Result<Vec<_>>>()?;
            match out.format {
                Format::Json => out.json(&json!({
                    "q": q,
                    "window": [a, b],
                    "directions": dirs.iter().map(|d| d.theta()).collect::<Vec<_>>(),
                    "atoms": rows.iter().map(|(id, w, h, p)| json!({"id": id, "weight": w, "entropy": h, "projected": p})).collect::<Vec<_>>(),
                }))?,
                Format::Csv => {
                    let mut header = vec!["atom".to_string(), "weight".into(), "entropy".into()];
                    header.extend(dirs.iter().map(|d| format!("proj_{:.6}", d.theta())));
                    let header: Vec<&str> = header.iter().map(String::as_str).collect();
                    out.csv(
                        &header,
                        rows.iter().map(|(id, w, h, p)| {
                            let mut r = vec![id.clone(), w.to_string(), h.to_string()];
                            r.extend(p.iter().map(f64::to_string));
                            r
                        }),
                    )?
                }
            }
        }
        Command::PinnedScan { input, t, pins } => {
            let set = load_set(&input)?;
            let scan = pinned_scan(&set, t, pins.policy()?)?;
            match out.format {
                Format::Json => out.json(&scan)?,
                Format::Csv => out.csv(
                    &["index", "x", "y", "count", "exceptional"],
                    scan.per_pin.iter().map(|p| {
                        vec![
                            p.index.to_string(),
                            p.point[0].to_string(),
                            p.point[1].to_string(),
                            p.count.to_string(),
                            ((p.count as f64) < scan.threshold).to_string(),
                        ]
                    }),
                )?,
            }
        }
        Command::DistCount { a, b } => {
            let (a, b) = (load_set(&a)?, load_set(&b)?);
            let n = distance_set_count(&a, &b)?;
            match out.format {
                Format::Json => out.json(&json!({"scale": a.scale(), "count": n}))?,
                Format::Csv => out.csv(&["scale", "count"], [vec![a.scale().to_string(), n.to_string()]])?,
            }
        }
        Command::Conical {
            input,
            beta,
            rmin,
            s,
            kappa,
            pins,
        } => {
            let set = load_set(&input)?;
            let scan = conical_scan(&set, beta, rmin, pins.policy()?)?;
            let exponents = s.zip(kappa);
            let exc = exceptional_set(&set, beta, rmin, exponents)?;
            match out.format {
                Format::Json => out.json(&json!({"scan": scan, "exceptional": exc}))?,
                Format::Csv => out.csv(
                    &["index", "x", "y", "well_surrounded"],
                    scan.per_pin.iter().map(|p| {
                        vec![
                            p.index.to_string(),
                            p.point[0].to_string(),
                            p.point[1].to_string(),
                            p.well_surrounded.to_string(),
                        ]
                    }),
                )?,
            }
        }
        Command::Experiment(e) => {
            let report = match e {
                Experiment::Theorem11 {
                    generator,
                    scales,
                    t,
                    max_fraction,
                    pins,
                } => experiment_theorem11(
                    &generator.spec()?,
                    &scales,
                    t,
                    pin_policy(&pins, generator.seed)?,
                    max_fraction,
                )?,
                Experiment::KatzTao { scales } => experiment_katz_tao(&scales)?,
                Experiment::Inequalities { constants, stage } => {
                    let path = constants.unwrap_or_else(calibration::default_path);
                    let (cal, hash) = Calibration::load(&path)?;
                    let stage = match stage {
                        StageArg::Calibration => Stage::Calibration,
                        StageArg::Acceptance => Stage::Acceptance,
                    };
                    experiment_inequalities(&cal, &hash, stage)?
                }
            };
            return out.report(&report);
        }
        Command::Calibrate => {
            if out.format == Format::Csv {
                bail!("calibrate writes JSON only");
            }
            let cal = calibration::calibrate()?;
            match &out.path {
                Some(p) => cal.save(p)?,
                None => print!("{}", cal.to_json()?),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
