//! Command-line front end for the ring-array AoA experiment harness.
//!
//! Exit codes: 0 on success, 2 for configuration problems (bad flags,
//! unreadable or invalid config files), 3 when the flagged-trial budget
//! is exceeded, 1 for anything else.

use clap::{Args, Parser, Subcommand};
use oam_aoa_cli::capacity::{capacity_sweep, CapacityPoint};
use oam_aoa_cli::config::{ChannelChoice, ExperimentConfig, RunSetup, SignModeChoice};
use oam_aoa_cli::csvout::{num, CsvFile};
use oam_aoa_cli::experiments::{
    estimate_once, log_log_slope, nmse_sweep, scaling_table, NmseSweep, ScalingRow, TrialRecord,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "oam-aoa",
    version,
    about = "Simulate a multi-mode ring-array radio link and estimate its pose misalignment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one estimation frame and report the recovered angles.
    Estimate(CommonArgs),
    /// Sweep SNR, estimating repeatedly, and write NMSE statistics.
    NmseSweep(CommonArgs),
    /// Compare link capacity with and without estimate-driven steering.
    CapacitySweep(CommonArgs),
    /// Measure per-stage estimator cost against mode and carrier counts.
    Scaling(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file; built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report and CSV files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the number of trials per sweep point.
    #[arg(long)]
    trials: Option<u32>,
    /// Comma-separated SNR list in dB; "inf" selects the noiseless path.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_list: Option<Vec<f64>>,
    /// How the estimator resolves the azimuth sign ambiguity.
    #[arg(long, value_enum)]
    sign_mode: Option<SignModeChoice>,
    /// Channel model used for frame synthesis.
    #[arg(long, value_enum)]
    channel: Option<ChannelChoice>,
}

enum AppError {
    Config(String),
    Io(String),
    Flagged { worst: f64, limit: f64 },
}

impl AppError {
    fn code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Io(_) => 1,
            AppError::Flagged { .. } => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            AppError::Config(m) => format!("configuration error: {m}"),
            AppError::Io(m) => format!("io error: {m}"),
            AppError::Flagged { worst, limit } => format!(
                "flagged-trial fraction {worst:.4} exceeds the configured limit {limit:.4}"
            ),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Estimate(args) => do_estimate(&args),
        Command::NmseSweep(args) => do_nmse(&args),
        Command::CapacitySweep(args) => do_capacity(&args),
        Command::Scaling(args) => do_scaling(&args),
    }
}

fn load_setup(args: &CommonArgs) -> Result<RunSetup, AppError> {
    let mut cfg = ExperimentConfig::load(args.config.as_deref()).map_err(AppError::Config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(list) = &args.snr_list {
        cfg.snr_list_db = list.clone();
    }
    if let Some(mode) = args.sign_mode {
        cfg.sign_mode = mode;
    }
    if let Some(ch) = args.channel {
        cfg.channel = ch;
    }
    cfg.resolve().map_err(AppError::Config)
}

fn ensure_out(dir: &Path) -> Result<(), AppError> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::Io(format!("{}: {e}", dir.display())))
}

/// Comment lines shared by every output file, tying it to its exact
/// configuration without any run-dependent content.
fn file_comments(setup: &RunSetup) -> Vec<String> {
    vec![
        "ring-array AoA experiment harness".to_string(),
        format!("config: {}", setup.config.canonical()),
        format!("fingerprint: {}", setup.config.fingerprint()),
    ]
}

fn write_text(path: &Path, text: &str) -> Result<(), AppError> {
    std::fs::write(path, text).map_err(|e| AppError::Io(format!("{}: {e}", path.display())))
}

const RECORDS_HEADER: &str =
    "snr_db,trial,phi_deg,theta_deg,r_wrapped_rad,gamma_rad,xi_wrapped_rad,delta_m,excluded,flags";

fn record_row(rec: &TrialRecord) -> String {
    let opt = |v: Option<f64>| num(v.unwrap_or(f64::NAN));
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        num(rec.snr_db),
        rec.trial,
        opt(rec.phi_deg),
        opt(rec.theta_deg),
        opt(rec.r_wrapped),
        opt(rec.gamma),
        opt(rec.xi_wrapped),
        opt(rec.delta_m),
        u8::from(rec.excluded),
        rec.flags,
    )
}

fn write_records(
    path: &Path,
    setup: &RunSetup,
    records: &[TrialRecord],
) -> Result<(), AppError> {
    let mut csv = CsvFile::create(path, &file_comments(setup), RECORDS_HEADER)
        .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
    for rec in records {
        csv.row(&record_row(rec))
            .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
    }
    csv.finish()
        .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))
}

fn angle_line(label: &str, est: Option<f64>, truth: f64) -> String {
    match est {
        Some(v) => format!("{label}: est {v:.6}  true {truth:.6}\n"),
        None => format!("{label}: est unresolved  true {truth:.6}\n"),
    }
}

fn do_estimate(args: &CommonArgs) -> Result<(), AppError> {
    let setup = load_setup(args)?;
    ensure_out(&args.out)?;
    // The SNR comes from the command line alone: without --snr-list the
    // command runs the single noiseless frame.
    let snr_db = args
        .snr_list
        .as_ref()
        .and_then(|v| v.first().copied())
        .unwrap_or(f64::INFINITY);
    let (report, record) = estimate_once(&setup, snr_db).map_err(AppError::Config)?;

    let angles = match (record.phi_deg, record.theta_deg) {
        (Some(p), Some(t)) => format!("({p:.6}\u{b0}, {t:.6}\u{b0})"),
        _ => "(unresolved)".to_string(),
    };
    println!("pose estimate (azimuth, elevation): {angles}");
    println!("flags: {}", report.flags);

    let mut text = String::new();
    let _ = write!(
        text,
        "ring-array pose estimate\n\
         fingerprint: {}\n\
         channel: {}  sign mode: {}  snapshots: {}\n\
         snr_db: {}\n\n",
        setup.config.fingerprint(),
        setup.config.channel.name(),
        setup.config.sign_mode.name(),
        report.snapshots,
        num(snr_db),
    );
    text.push_str(&format!("pose estimate (azimuth, elevation): {angles}\n"));
    text.push_str(&angle_line(
        "azimuth (deg)",
        record.phi_deg,
        setup.config.azimuth_deg,
    ));
    text.push_str(&angle_line(
        "elevation (deg)",
        record.theta_deg,
        setup.config.elevation_deg,
    ));
    let opt = |v: Option<f64>| v.map_or("unresolved".to_string(), |x| format!("{x:.12}"));
    let _ = write!(
        text,
        "\nintermediates:\n\
         range phase (rad, wrapped): {}\n\
         tilt angle gamma (rad): {}\n\
         reference phase (rad, wrapped): {}\n\
         path offset (m): {}\n\n\
         flags: {}\n\
         excluded grid entries: {}\n\
         excluded reference entries: {}\n\
         azimuth branch: {}\n\
         range convention: {}\n",
        opt(report.r_wrapped),
        opt(report.gamma),
        opt(report.xi_wrapped),
        opt(report.delta_m),
        report.flags,
        report.excluded_grid_entries,
        report.excluded_ref_entries,
        report.azimuth_branch,
        report.range_convention,
    );
    write_text(&args.out.join("report.txt"), &text)?;
    write_records(&args.out.join("records.csv"), &setup, &[record.clone()])?;

    let limit = setup.config.max_flagged_fraction;
    if record.excluded && 1.0 > limit {
        return Err(AppError::Flagged { worst: 1.0, limit });
    }
    Ok(())
}

fn do_nmse(args: &CommonArgs) -> Result<(), AppError> {
    let setup = load_setup(args)?;
    ensure_out(&args.out)?;
    let NmseSweep { points, records } = nmse_sweep(&setup).map_err(AppError::Config)?;

    let path = args.out.join("nmse.csv");
    let mut csv = CsvFile::create(
        &path,
        &file_comments(&setup),
        "snr_db,nmse_phi,nmse_theta,trials,flagged_fraction",
    )
    .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
    for pt in &points {
        csv.row(&format!(
            "{},{},{},{},{}",
            num(pt.snr_db),
            num(pt.nmse_phi),
            num(pt.nmse_theta),
            pt.trials,
            num(pt.flagged_fraction),
        ))
        .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
    }
    csv.finish()
        .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
    write_records(&args.out.join("records.csv"), &setup, &records)?;

    let mut text = String::from("NMSE sweep\n\nsnr_db  nmse_phi       nmse_theta     flagged\n");
    for pt in &points {
        let _ = writeln!(
            text,
            "{:6}  {:13.6e}  {:13.6e}  {:7.4}",
            pt.snr_db, pt.nmse_phi, pt.nmse_theta, pt.flagged_fraction
        );
        println!(
            "snr {:5} dB: nmse_phi {:.6e}, nmse_theta {:.6e}, flagged {:.4}",
            pt.snr_db, pt.nmse_phi, pt.nmse_theta, pt.flagged_fraction
        );
    }
    write_text(&args.out.join("report.txt"), &text)?;

    let limit = setup.config.max_flagged_fraction;
    let worst = points
        .iter()
        .map(|p| p.flagged_fraction)
        .fold(0.0f64, f64::max);
    if worst > limit {
        return Err(AppError::Flagged { worst, limit });
    }
    Ok(())
}

fn do_capacity(args: &CommonArgs) -> Result<(), AppError> {
    let setup = load_setup(args)?;
    ensure_out(&args.out)?;
    let points: Vec<CapacityPoint> = capacity_sweep(&setup).map_err(AppError::Config)?;

    let path = args.out.join("capacity.csv");
    let mut comments = file_comments(&setup);
    comments.push(
        "model: aligned element channel is the exact spherical-wave sum at zero offset"
            .to_string(),
    );
    comments.push(
        "model: misalignment and steering act as first-order phase screens on the receive ring"
            .to_string(),
    );
    comments
        .push("flagged estimation trials fall back to the uncorrected channel".to_string());
    let mut csv = CsvFile::create(
        &path,
        &comments,
        "snr_db,cap_aligned,cap_misaligned,cap_steered_est,cap_steered_true",
    )
    .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
    for pt in &points {
        csv.row(&format!(
            "{},{},{},{},{}",
            num(pt.snr_db),
            num(pt.cap_aligned),
            num(pt.cap_misaligned),
            num(pt.cap_steered_est),
            num(pt.cap_steered_true),
        ))
        .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
    }
    csv.finish()
        .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;

    let mut text = String::from(
        "capacity sweep (bits per channel use)\n\nsnr_db  aligned   misaligned  steered_est  steered_true\n",
    );
    for pt in &points {
        let _ = writeln!(
            text,
            "{:6}  {:8.4}  {:10.4}  {:11.4}  {:12.4}",
            pt.snr_db, pt.cap_aligned, pt.cap_misaligned, pt.cap_steered_est, pt.cap_steered_true
        );
        println!(
            "snr {:5} dB: aligned {:.4}, misaligned {:.4}, steered (est) {:.4}, steered (true) {:.4}",
            pt.snr_db, pt.cap_aligned, pt.cap_misaligned, pt.cap_steered_est, pt.cap_steered_true
        );
    }
    write_text(&args.out.join("report.txt"), &text)?;

    let limit = setup.config.max_flagged_fraction;
    let worst = points
        .iter()
        .map(|p| p.flagged as f64 / p.trials.max(1) as f64)
        .fold(0.0f64, f64::max);
    if worst > limit {
        return Err(AppError::Flagged { worst, limit });
    }
    Ok(())
}

fn do_scaling(args: &CommonArgs) -> Result<(), AppError> {
    let setup = load_setup(args)?;
    ensure_out(&args.out)?;
    let rows: Vec<ScalingRow> = scaling_table(&setup).map_err(AppError::Config)?;

    let path = args.out.join("scaling.csv");
    let mut csv = CsvFile::create(
        &path,
        &file_comments(&setup),
        "axis,size,r_stage_cmacs,gamma_stage_cmacs,xi_stage_cmacs,snapshots",
    )
    .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
    for row in &rows {
        csv.row(&format!(
            "{},{},{},{},{},{}",
            row.axis, row.size, row.r_cmacs, row.gamma_cmacs, row.xi_cmacs, row.snapshots
        ))
        .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
    }
    csv.finish()
        .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;

    let slope = |axis: &str, pick: fn(&ScalingRow) -> u64| {
        let pts: Vec<(usize, u64)> = rows
            .iter()
            .filter(|r| r.axis == axis)
            .map(|r| (r.size, pick(r)))
            .collect();
        log_log_slope(&pts)
    };
    let r_slope = slope("modes", |r| r.r_cmacs);
    let g_slope = slope("carriers", |r| r.gamma_cmacs);
    let mut text = String::from("estimator stage cost scaling\n\n");
    let _ = writeln!(
        text,
        "range stage vs mode count: log-log slope {r_slope:.4}"
    );
    let _ = writeln!(
        text,
        "tilt stage vs carrier count: log-log slope {g_slope:.4}"
    );
    println!("range stage vs mode count: log-log slope {r_slope:.4}");
    println!("tilt stage vs carrier count: log-log slope {g_slope:.4}");
    write_text(&args.out.join("report.txt"), &text)?;
    Ok(())
}
