use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fovsearch::metrics::{AlignmentScoring, Normalization};
use fovsearch::Pixel;
use fovsearch_cli::commands::{self, EvalOptions, Outcome};
use fovsearch_cli::config::{parse_grid, DetectorKind, FoveaSpec, Policy, RunConfig, Settings};

#[derive(Parser)]
#[command(name = "fovsearch", version, about = "Foveated semantic visual search simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cut the multi-scale fovea around a focal point and write the layers.
    Foveate {
        #[arg(long)]
        image: PathBuf,
        /// Focal pixel as `x,y`.
        #[arg(long, allow_hyphen_values = true)]
        focal: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Run one search episode per scene file.
    Search {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Score model scanpaths against reference scanpaths.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also report pairwise agreement within the reference cohort.
        #[arg(long)]
        consistency: bool,
        /// Image size `HxW` used to map fixations to grid cells.
        #[arg(long, default_value = "1050x1680")]
        image_size: String,
        /// Sequence-score normalization: `max` or `mean` sequence length.
        #[arg(long, default_value = "max")]
        normalization: String,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Pixel cost of every named preset.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "1050x1680")]
        image_size: String,
    },
    /// Generate synthetic target-present scenes.
    GenScenes {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[command(flatten)]
        run: RunFlags,
    },
}

#[derive(Args, Default)]
struct RunFlags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Preset name, or a comma-separated list to sweep.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    levels: Option<u32>,
    #[arg(long)]
    base: Option<u32>,
    /// Belief grid as `YxX`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    max_fix: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_enum)]
    detector: Option<DetectorKind>,
    #[arg(long)]
    bridge_dir: Option<PathBuf>,
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum)]
    policy: Option<Policy>,
    /// Stop once the selected cell's target expectation reaches this value
    /// instead of using the ground-truth oracle.
    #[arg(long)]
    stop_confidence: Option<f64>,
}

impl RunFlags {
    fn resolve(self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        let flags = Settings {
            seed: self.seed,
            preset: self.preset,
            levels: self.levels,
            base: self.base,
            grid: self.grid,
            max_fix: self.max_fix,
            threshold: self.threshold,
            detector: self.detector,
            bridge_dir: self.bridge_dir,
            trace: self.trace.then_some(true),
            jobs: self.jobs,
            policy: self.policy,
            stop_confidence: self.stop_confidence,
            classes: None,
            model: None,
        };
        RunConfig::resolve(file.overlay(flags))
    }
}

fn parse_focal(s: &str) -> Result<Pixel> {
    let (x, y) = s.split_once(',').with_context(|| format!("focal point {s:?} is not x,y"))?;
    Ok(Pixel::new(x.trim().parse()?, y.trim().parse()?))
}

fn parse_size(s: &str) -> Result<(u32, u32)> {
    let (h, w) = parse_grid(s)?;
    Ok((u32::try_from(h)?, u32::try_from(w)?))
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Foveate { image, focal, out, run } => {
            let cfg = run.resolve()?;
            let [(_, fovea)] = cfg.foveas.as_slice() else {
                bail!("foveate takes a single fovea configuration");
            };
            let fovea: FoveaSpec = *fovea;
            let files = commands::cmd_foveate(&image, parse_focal(&focal)?, fovea, &out)?;
            println!("wrote {} layers to {}", files.len(), out.display());
            Ok(Outcome::Success)
        }
        Command::Search { scenes, out, run } => {
            let cfg = run.resolve()?;
            let result = commands::cmd_search(&scenes, &out, &cfg)?;
            for s in &result.summaries {
                println!(
                    "{}: found {:.1}% of {} scenes ({} skipped), {} px/fixation ({:.2}% of the image)",
                    s.preset,
                    100.0 * s.found_rate,
                    s.scenes,
                    s.skipped,
                    s.pixels,
                    s.pixel_percent
                );
            }
            Ok(result.outcome)
        }
        Command::Eval {
            model,
            reference,
            out,
            consistency,
            image_size,
            normalization,
            run,
        } => {
            let cfg = run.resolve()?;
            let normalization = match normalization.as_str() {
                "max" => Normalization::MaxLength,
                "mean" => Normalization::MeanLength,
                other => bail!("unknown normalization {other:?}"),
            };
            let opts = EvalOptions {
                grid: cfg.grid,
                image_size: parse_size(&image_size)?,
                scoring: AlignmentScoring {
                    normalization,
                    ..AlignmentScoring::default()
                },
                consistency,
                max_fixations: cfg.max_fixations,
            };
            let r = commands::cmd_eval(&model, &reference, &out, &opts)?;
            let m = &r.model.means;
            println!(
                "SemSS {:.3}  SemFED {:.3}  SS {:.3}  FED {:.3}  over {} scenes ({} excluded)",
                m.sem_ss, m.sem_fed, m.ss, m.fed, r.model.n_scenes, r.warnings
            );
            if let Some(c) = &r.consistency {
                let m = &c.means;
                println!(
                    "reference consistency: SemSS {:.3}  SemFED {:.3}  SS {:.3}  FED {:.3}  ({} pairs)",
                    m.sem_ss, m.sem_fed, m.ss, m.fed, c.n_pairs
                );
            }
            Ok(if r.warnings > 0 { Outcome::Partial } else { Outcome::Success })
        }
        Command::Report { out, image_size } => {
            print!("{}", commands::cmd_report(&out, parse_size(&image_size)?)?);
            Ok(Outcome::Success)
        }
        Command::GenScenes { out, count, run } => {
            let cfg = run.resolve()?;
            commands::cmd_gen_scenes(&out, count, cfg.seed, &cfg)?;
            println!("wrote {count} scenes to {}", out.display());
            Ok(Outcome::Success)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
