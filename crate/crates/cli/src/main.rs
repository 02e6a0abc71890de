//! Command-line front end for the journey-detection pipeline.
//!
//! Machine-readable output goes to `--out` (or stdout when omitted); the
//! human-readable summary goes to stderr, so piped output stays clean.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use journeys_core::config;
use journeys_core::controller::StateTimeline;
use journeys_core::geo::LocationSeq;
use journeys_core::motion::filter_accel;
use journeys_core::noise::{dynamic_noise_sweep, static_noise_stats, NoiseRun};
use journeys_core::pipeline::segment_trace;
use journeys_core::power::{fit_discharge, simulate_battery, PowerProfile};
use journeys_core::spool;
use journeys_core::synth::{generate_synthetic, SyntheticScenario};
use journeys_core::trace;
use journeys_core::tuning::{
    anneal, cost, random_search, validate_detection, AnnealingConfig, LabeledAccelRun,
};

#[derive(Parser)]
#[command(name = "journeys", version, about = "GPS journey detection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a trace directory into journeys.
    Segment(SegmentArgs),
    /// Simulate battery discharge over a sensing timeline.
    SimulateBattery(SimulateArgs),
    /// Tune the motion detector on a labeled accelerometer corpus.
    Tune(TuneArgs),
    /// GPS noise analyses.
    Noise(NoiseArgs),
    /// Generate a synthetic trace from a scenario file.
    Synth(SynthArgs),
    /// Score detected journeys against a ground-truth diary.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SegmentArgs {
    /// Trace directory containing gps.csv (and accel.csv).
    trace: PathBuf,
    /// Run the duty-cycling controller instead of always-on GPS.
    #[arg(long)]
    battery_aware: bool,
    /// Parameter file (flat key = value); defaults to $JOURNEYS_CONFIG.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Write the journey JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the tentative segment spool (JSON lines).
    #[arg(long)]
    spool: Option<PathBuf>,
    /// Also write the sensing timeline CSV (battery-aware mode only).
    #[arg(long)]
    timeline: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Timeline CSV (t_s,state) as written by `segment --timeline`.
    #[arg(long)]
    timeline: PathBuf,
    /// Device preset: t1, t2, s1 or s2.
    #[arg(long, conflicts_with_all = ["idle_rate", "accel_rate", "gps_rate"])]
    profile: Option<String>,
    #[arg(long, requires_all = ["accel_rate", "gps_rate"])]
    idle_rate: Option<f64>,
    #[arg(long)]
    accel_rate: Option<f64>,
    #[arg(long)]
    gps_rate: Option<f64>,
    /// Multiplier on the GPS rate (e.g. 1.3 for indoor/assisted sensing).
    #[arg(long, default_value_t = 1.0)]
    gps_scale: f64,
    #[arg(long, default_value_t = 100.0)]
    start_level: f64,
    /// Write the discharge curve CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fit a recorded battery CSV (t_ms,level_pct[,voltage_mv]) and report
    /// its discharge rate instead of simulating.
    #[arg(long)]
    fit: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    /// Corpus directory: labels.csv (file,label,onset_t_ms) plus accel CSVs.
    #[arg(long)]
    runs: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = TuneMethod::Anneal)]
    method: TuneMethod,
    /// Write the best-parameter JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TuneMethod {
    Anneal,
    Random,
}

#[derive(Args)]
struct NoiseArgs {
    #[command(subcommand)]
    mode: NoiseMode,
}

#[derive(Subcommand)]
enum NoiseMode {
    /// Scatter of a static recording around its mean position.
    Static {
        /// GPS CSV of the static recording.
        #[arg(long)]
        gps: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Velocity deviation versus averaging-window size.
    Dynamic {
        /// Directory with runs.csv (file,nominal_mps) plus GPS CSVs.
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, default_value_t = 10)]
        w_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output trace directory (gps.csv, accel.csv, diary.csv).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Journey JSON as written by `segment`.
    #[arg(long)]
    journeys: PathBuf,
    /// Ground-truth diary CSV (start_t_ms,end_t_ms[,diag_m]).
    #[arg(long)]
    diary: PathBuf,
    /// Endpoint tolerance in seconds.
    #[arg(long, default_value_t = 60.0)]
    tol_s: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_output(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            std::io::stdout().write_all(content.as_bytes()).context("writing stdout")?;
            Ok(())
        }
    }
}

fn cmd_segment(args: SegmentArgs) -> Result<()> {
    let params = config::load_config(args.params.as_deref())?;
    let bundle = trace::load_trace(&args.trace)?;
    let output = segment_trace(&bundle, &params, args.battery_aware)?;

    if let Some(spool_path) = &args.spool {
        spool::write_spool_records(spool_path, &output.spool)?;
    }
    if let Some(tl_path) = &args.timeline {
        let tl = output
            .timeline
            .as_ref()
            .ok_or_else(|| anyhow!("--timeline needs --battery-aware"))?;
        trace::save_timeline(tl_path, tl)?;
    }

    eprintln!("{} journey(s) from {}", output.journeys.len(), args.trace.display());
    for (i, j) in output.journeys.iter().enumerate() {
        eprintln!(
            "  {}: {} .. {}  extent {:.0} m, path {:.0} m, {} points",
            i + 1,
            j.start_t,
            j.end_t,
            j.diagonal(),
            j.path_length,
            j.len()
        );
    }
    let json = serde_json::to_string_pretty(&trace::journeys_to_json(&output.journeys))?;
    write_output(args.out.as_deref(), &(json + "\n"))
}

fn load_timeline_profile(args: &SimulateArgs) -> Result<PowerProfile> {
    let profile = match (&args.profile, args.idle_rate, args.accel_rate, args.gps_rate) {
        (Some(name), ..) => PowerProfile::preset(name)
            .ok_or_else(|| anyhow!("unknown profile {name:?}; presets: t1, t2, s1, s2"))?,
        (None, Some(i), Some(a), Some(g)) => PowerProfile::new(i, a, g),
        _ => bail!("give --profile or all of --idle-rate/--accel-rate/--gps-rate"),
    };
    let profile = profile.with_gps_scaled(args.gps_scale);
    profile.validate().map_err(|e| anyhow!(e))?;
    Ok(profile)
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    if let Some(battery_csv) = &args.fit {
        let samples = trace::load_battery_csv(battery_csv)?;
        let (rate, quad) = fit_discharge(&samples)?;
        eprintln!(
            "fitted discharge of {}: {:.4} %/h (quadratic term {:.3e})",
            battery_csv.display(),
            rate,
            quad
        );
        let content = format!("linear_rate_pct_per_h,quad_coeff\n{rate},{quad}\n");
        return write_output(args.out.as_deref(), &content);
    }
    let profile = load_timeline_profile(&args)?;
    let timeline: StateTimeline = trace::load_timeline(&args.timeline)?;
    let curve = simulate_battery(&timeline, &profile, args.start_level);
    eprintln!(
        "simulated {:.1} h: {:.1}% -> {:.1}% (fitted {:.2} %/h)",
        timeline.span().map(|(a, b)| (b - a) as f64 / 3.6e6).unwrap_or(0.0),
        args.start_level,
        curve.points.last().map(|p| p.1).unwrap_or(args.start_level),
        curve.linear_rate
    );
    let mut content = String::from("t_s,level_pct\n");
    for (t, level) in &curve.points {
        content.push_str(&format!("{},{}\n", *t as f64 / 1000.0, level));
    }
    write_output(args.out.as_deref(), &content)
}

/// Loads a labeled corpus: `labels.csv` rows `file,label,onset_t_ms` with
/// label `motion` or `still`, onset blank for still runs.
fn load_labeled_runs(dir: &Path) -> Result<Vec<LabeledAccelRun>> {
    let manifest = dir.join("labels.csv");
    let text = std::fs::read_to_string(&manifest)
        .with_context(|| format!("reading {}", manifest.display()))?;
    let mut runs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("file,")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            bail!("{}:{}: expected file,label[,onset_t_ms]", manifest.display(), i + 1);
        }
        let motion = match fields[1].trim() {
            "motion" => true,
            "still" => false,
            other => bail!("{}:{}: unknown label {other:?}", manifest.display(), i + 1),
        };
        let onset_t = match fields.get(2).map(|s| s.trim()) {
            Some("") | None => None,
            Some(s) => Some(s.parse::<i64>().with_context(|| {
                format!("{}:{}: invalid onset_t_ms", manifest.display(), i + 1)
            })?),
        };
        let samples = trace::load_accel_file(&dir.join(fields[0].trim()))?;
        runs.push(LabeledAccelRun {
            samples: samples.iter().map(filter_accel).collect(),
            motion,
            onset_t,
        });
    }
    Ok(runs)
}

fn cmd_tune(args: TuneArgs) -> Result<()> {
    let runs = load_labeled_runs(&args.runs)?;
    let cfg = AnnealingConfig { epochs: args.epochs, seed: args.seed, ..AnnealingConfig::default() };
    let (params, outcome) = match args.method {
        TuneMethod::Anneal => anneal(&runs, &cfg)?,
        TuneMethod::Random => random_search(&runs, &cfg)?,
    };
    let c = cost(&outcome);
    eprintln!(
        "best cost {:.4} (FNR {:.3}, FPR {:.3}) over {} runs",
        c,
        outcome.fnr,
        outcome.fpr,
        runs.len()
    );
    let report = serde_json::json!({
        "params": params,
        "outcome": outcome,
        "cost": c,
    });
    write_output(args.out.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))
}

fn cmd_noise(args: NoiseArgs) -> Result<()> {
    match args.mode {
        NoiseMode::Static { gps, out } => {
            let (fixes, _) = trace::load_gps_file(&gps)?;
            let seq = LocationSeq::from_samples(fixes)
                .map_err(|e| anyhow!("{}: {e}", gps.display()))?;
            let stats = static_noise_stats(&seq)?;
            eprintln!(
                "mean ({:.7}, {:.7}), max deviation ({:.2e}, {:.2e}) deg",
                stats.mean.lat, stats.mean.lon, stats.max_dev_lat, stats.max_dev_lon
            );
            let content = format!(
                "mean_lat,mean_lon,max_dev_lat,max_dev_lon\n{},{},{},{}\n",
                stats.mean.lat, stats.mean.lon, stats.max_dev_lat, stats.max_dev_lon
            );
            write_output(out.as_deref(), &content)
        }
        NoiseMode::Dynamic { runs, w_max, out } => {
            let manifest = runs.join("runs.csv");
            let text = std::fs::read_to_string(&manifest)
                .with_context(|| format!("reading {}", manifest.display()))?;
            let mut noise_runs = Vec::new();
            for (i, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("file,"))
                {
                    continue;
                }
                let (file, nominal) = line
                    .split_once(',')
                    .ok_or_else(|| anyhow!("{}:{}: expected file,nominal_mps", manifest.display(), i + 1))?;
                let (fixes, _) = trace::load_gps_file(&runs.join(file.trim()))?;
                noise_runs.push(NoiseRun {
                    seq: LocationSeq::from_samples(fixes)
                        .map_err(|e| anyhow!("{file}: {e}"))?,
                    nominal_mps: nominal.trim().parse::<f64>().with_context(|| {
                        format!("{}:{}: invalid nominal_mps", manifest.display(), i + 1)
                    })?,
                });
            }
            let sweep = dynamic_noise_sweep(&noise_runs, 1..=w_max);
            for (w, dev) in &sweep {
                eprintln!("w={w}: mean deviation {dev:.3} m/s");
            }
            let mut content = String::from("w,mean_dev_mps\n");
            for (w, dev) in &sweep {
                content.push_str(&format!("{w},{dev}\n"));
            }
            write_output(out.as_deref(), &content)
        }
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.scenario)
        .with_context(|| format!("reading {}", args.scenario.display()))?;
    let scenario: SyntheticScenario = serde_json::from_str(&text)
        .map_err(|e| anyhow!("{}: {e}", args.scenario.display()))?;
    let (bundle, diary) = generate_synthetic(&scenario, args.seed)?;
    trace::save_trace(&args.out, &bundle)?;
    trace::save_diary(&args.out.join("diary.csv"), &diary)?;
    eprintln!(
        "wrote {} fixes, {} status rows, {} accel samples, {} diary journey(s) to {}",
        bundle.gps.len(),
        bundle.sat_status.len(),
        bundle.accel.len(),
        diary.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let journeys = trace::load_journeys(&args.journeys)?;
    let diary = trace::load_diary(&args.diary)?;
    let report = validate_detection(&journeys, &diary, args.tol_s)?;
    eprintln!(
        "{} diary journey(s): {} full, {} clipped, {} missed",
        diary.len(),
        report.full,
        report.clipped,
        report.missed
    );
    write_output(args.out.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Segment(args) => cmd_segment(args),
        Command::SimulateBattery(args) => cmd_simulate(args),
        Command::Tune(args) => cmd_tune(args),
        Command::Noise(args) => cmd_noise(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Validate(args) => cmd_validate(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
