//! Batch CLI for the daily-basis event-detection pipeline.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::{FixedOffset, NaiveDate};
use clap::{Args, Parser, Subcommand};

use diurnal::config::{DayRange, PrepOptions};
use diurnal::detect::Method;
use diurnal::error::Result;
use diurnal::ingest::Modality;
use diurnal::pipeline::{
    self, BuildModelCommand, DetectCommand, EvaluateCommand, ResidualCommand, ScorePlotCommand,
    SynthCommand, ThresholdSpec,
};
use diurnal::synth::SynthConfig;
use diurnal::trend::SmoothOrder;

#[derive(Parser)]
#[command(
    name = "diurnal",
    about = "Daily-basis PCA model of sensor behavior and rain-event detection",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic corpus (measurements + ground truth).
    Synth(SynthArgs),
    /// Train the daily basis per modality and write model files.
    BuildModel(BuildModelArgs),
    /// Score days with the Basic/Highpass/Delta methods and flag events.
    Detect(DetectArgs),
    /// Compare flagged days with ground truth; emit report and PR curves.
    Evaluate(EvaluateArgs),
    /// Render figures from existing outputs (score series, residual trace).
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for measurements.csv and ground_truth.csv.
    #[arg(long)]
    out_dir: PathBuf,
    /// Days in the corpus.
    #[arg(long, default_value_t = 200)]
    days: usize,
    /// Sensors in the corpus.
    #[arg(long, default_value_t = 10)]
    sensors: usize,
    /// Event days drawn at random.
    #[arg(long, default_value_t = 40)]
    events: usize,
    /// Explicit comma-separated event days (overrides --events).
    #[arg(long, value_delimiter = ',')]
    event_days: Vec<NaiveDate>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// First day of the corpus.
    #[arg(long, default_value = "2005-09-17")]
    start_date: NaiveDate,
    /// Per-minute noise std in deg C.
    #[arg(long)]
    noise_std: Option<f64>,
    /// Rain transient depth in deg C.
    #[arg(long)]
    rain_drop: Option<f64>,
    /// Rain transient duration in 10-minute slots.
    #[arg(long)]
    rain_duration: Option<usize>,
    /// Soil diurnal lag in hours.
    #[arg(long)]
    soil_lag: Option<f64>,
    /// Soil attenuation factor in (0, 1].
    #[arg(long)]
    soil_attenuation: Option<f64>,
    /// Probability of a high-jitter bad sensor-day.
    #[arg(long)]
    bad_day_rate: Option<f64>,
    /// Probability of a cloudy (disturbed) day.
    #[arg(long)]
    disturbance_rate: Option<f64>,
}

#[derive(Args)]
struct RangeArgs {
    #[arg(long)]
    train_start: Option<NaiveDate>,
    #[arg(long)]
    train_end: Option<NaiveDate>,
}

#[derive(Args)]
struct PrepArgs {
    /// Fixed UTC offset defining the local day, e.g. -05:00.
    #[arg(long, default_value = "-05:00")]
    tz_offset: FixedOffset,
    /// Censoring cut in MAD units.
    #[arg(long, default_value_t = 4.0)]
    k_mad: f64,
    /// Retained expansion components.
    #[arg(long, default_value_t = 4)]
    components: usize,
    /// Smoothing window in days (odd).
    #[arg(long, default_value_t = 7)]
    smooth_window: i64,
    /// Smoothing passes.
    #[arg(long, default_value_t = 3)]
    smooth_iterations: usize,
    /// smooth-then-average or average-then-smooth.
    #[arg(long, default_value = "smooth-then-average")]
    smooth_order: SmoothOrder,
}

impl PrepArgs {
    fn to_options(&self) -> PrepOptions {
        PrepOptions {
            utc_offset: self.tz_offset,
            k_mad: self.k_mad,
            components: self.components,
            smooth_window_days: self.smooth_window,
            smooth_iterations: self.smooth_iterations,
            smooth_order: self.smooth_order,
        }
    }
}

#[derive(Args)]
struct BuildModelArgs {
    #[arg(long)]
    measurements: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Modalities to model.
    #[arg(long, value_delimiter = ',', default_values_t = vec![Modality::AirTemperature, Modality::SoilTemperature], value_parser = parse_modality)]
    modalities: Vec<Modality>,
    #[command(flatten)]
    range: RangeArgs,
    #[command(flatten)]
    prep: PrepArgs,
}

fn parse_modality(s: &str) -> Result<Modality> {
    s.parse()
}

fn parse_method(s: &str) -> Result<Method> {
    s.parse()
}

fn parse_threshold(s: &str) -> Result<ThresholdSpec> {
    s.parse()
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    measurements: PathBuf,
    #[arg(long)]
    model_air: PathBuf,
    #[arg(long)]
    model_soil: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Methods to score.
    #[arg(long, value_delimiter = ',', default_values_t = vec![Method::Basic, Method::Highpass, Method::Delta], value_parser = parse_method)]
    methods: Vec<Method>,
    /// Score threshold, or `calibrate` to pick the operating point from
    /// ground truth (maximize recall at the precision floor).
    #[arg(long, default_value = "calibrate", value_parser = parse_threshold)]
    threshold: ThresholdSpec,
    /// Ground-truth CSV (needed for calibration).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Precipitation threshold defining event days.
    #[arg(long, default_value_t = 3.0)]
    min_precip: f64,
    /// Precision floor for calibration.
    #[arg(long, default_value_t = 0.5)]
    min_precision: f64,
    #[arg(long)]
    calib_start: Option<NaiveDate>,
    #[arg(long)]
    calib_end: Option<NaiveDate>,
    #[arg(long)]
    score_start: Option<NaiveDate>,
    #[arg(long)]
    score_end: Option<NaiveDate>,
    /// Also export the e/s/E/S/D series CSV.
    #[arg(long)]
    export_series: bool,
    #[command(flatten)]
    prep: PrepArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    min_precip: f64,
    #[arg(long)]
    eval_start: Option<NaiveDate>,
    #[arg(long)]
    eval_end: Option<NaiveDate>,
    /// Day slack when matching flags to truth (0 or 1).
    #[arg(long, default_value_t = 0)]
    slack_days: u32,
    /// Override the threshold recorded in the scores file.
    #[arg(long)]
    threshold: Option<f64>,
    /// Also render SVG figures.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Scores CSV to plot.
    #[arg(long, required_unless_present = "residual")]
    scores: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 3.0)]
    min_precip: f64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Render a measurement-vs-model residual trace instead.
    #[arg(long)]
    residual: bool,
    #[arg(long, required_if_eq("residual", "true"))]
    measurements: Option<PathBuf>,
    #[arg(long, required_if_eq("residual", "true"))]
    model: Option<PathBuf>,
    #[arg(long, required_if_eq("residual", "true"))]
    sensor: Option<String>,
    #[arg(long, required_if_eq("residual", "true"))]
    day: Option<NaiveDate>,
    #[command(flatten)]
    prep: PrepArgs,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => {
            let mut synth = SynthConfig {
                n_sensors: args.sensors,
                n_days: args.days,
                n_events: args.events,
                start_day: args.start_date,
                seed: args.seed,
                event_days: if args.event_days.is_empty() {
                    None
                } else {
                    Some(args.event_days.iter().copied().collect::<BTreeSet<_>>())
                },
                ..SynthConfig::default()
            };
            if let Some(v) = args.noise_std {
                synth.noise_std_c = v;
            }
            if let Some(v) = args.rain_drop {
                synth.rain_drop_c = v;
            }
            if let Some(v) = args.rain_duration {
                synth.rain_duration_slots = v;
            }
            if let Some(v) = args.soil_lag {
                synth.soil_lag_hours = v;
            }
            if let Some(v) = args.soil_attenuation {
                synth.soil_attenuation = v;
            }
            if let Some(v) = args.bad_day_rate {
                synth.bad_day_rate = v;
            }
            if let Some(v) = args.disturbance_rate {
                synth.disturbance_rate = v;
            }
            let out = pipeline::cmd_synth(&SynthCommand {
                out_dir: args.out_dir,
                synth,
            })?;
            println!(
                "wrote {} and {} ({} event days)",
                out.measurements.display(),
                out.ground_truth.display(),
                out.event_days
            );
            Ok(())
        }
        Command::BuildModel(args) => {
            let cmd = BuildModelCommand {
                measurements: args.measurements,
                out_dir: args.out_dir,
                modalities: args.modalities,
                train_range: DayRange::new(args.range.train_start, args.range.train_end)?,
                prep: args.prep.to_options(),
            };
            for s in pipeline::cmd_build_model(&cmd)? {
                println!(
                    "{}: {} training days ({} censored, {} degenerate); \
                     first component {:.2}% of variance, {} components {:.2}%; wrote {}",
                    s.modality,
                    s.trained_days,
                    s.censored_days,
                    s.degenerate_days,
                    100.0 * s.first_component_fraction,
                    s.retained_components,
                    100.0 * s.retained_fraction,
                    s.model_path.display()
                );
            }
            Ok(())
        }
        Command::Detect(args) => {
            let cmd = DetectCommand {
                measurements: args.measurements,
                model_air: args.model_air,
                model_soil: args.model_soil,
                out_dir: args.out_dir,
                methods: args.methods,
                threshold: args.threshold,
                truth: args.truth,
                min_precip_mm: args.min_precip,
                min_precision: args.min_precision,
                calib_range: DayRange::new(args.calib_start, args.calib_end)?,
                score_range: DayRange::new(args.score_start, args.score_end)?,
                export_series: args.export_series,
                prep: args.prep.to_options(),
            };
            let summary = pipeline::cmd_detect(&cmd)?;
            for (method, threshold) in &summary.thresholds {
                let flagged = summary.results[method].flagged_days.len();
                match summary.calibrations.get(method) {
                    Some(c) => println!(
                        "{method}: threshold {threshold} (calibrated: precision {:.3}, recall {:.3}), {flagged} days flagged",
                        c.precision, c.recall
                    ),
                    None => println!("{method}: threshold {threshold}, {flagged} days flagged"),
                }
            }
            println!("wrote {}", summary.scores_path.display());
            Ok(())
        }
        Command::Evaluate(args) => {
            let cmd = EvaluateCommand {
                scores: args.scores,
                truth: args.truth,
                out_dir: args.out_dir.clone(),
                min_precip_mm: args.min_precip,
                eval_range: DayRange::new(args.eval_start, args.eval_end)?,
                slack_days: args.slack_days,
                threshold_override: args.threshold,
                svg: args.svg,
            };
            for r in pipeline::cmd_evaluate(&cmd)? {
                let precision = r
                    .precision
                    .map(|p| format!("{:.3}", p))
                    .unwrap_or_else(|| "undefined".into());
                let recall = r
                    .recall
                    .map(|p| format!("{:.3}", p))
                    .unwrap_or_else(|| "undefined".into());
                println!(
                    "{}: precision {precision}, recall {recall}, {} false negatives \
                     (tp {}, fp {}, {} days evaluated)",
                    r.method, r.false_negatives, r.true_positives, r.false_positives,
                    r.evaluated_days
                );
            }
            println!("wrote {}", args.out_dir.join("report.json").display());
            Ok(())
        }
        Command::Report(args) => {
            if args.residual {
                let cmd = ResidualCommand {
                    measurements: args.measurements.expect("required by clap"),
                    model: args.model.expect("required by clap"),
                    sensor_id: args.sensor.expect("required by clap"),
                    day: args.day.expect("required by clap"),
                    out_dir: args.out_dir,
                    prep: args.prep.to_options(),
                };
                let (csv, svg) = pipeline::cmd_report_residual(&cmd)?;
                println!("wrote {} and {}", csv.display(), svg.display());
            } else {
                let cmd = ScorePlotCommand {
                    scores: args.scores.expect("required by clap"),
                    truth: args.truth,
                    min_precip_mm: args.min_precip,
                    out_dir: args.out_dir,
                };
                let path = pipeline::cmd_report_scores(&cmd)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error path too
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
