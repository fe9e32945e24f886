//! Command-line front end. Every subcommand writes machine-readable files to
//! `--out` and a short summary to stdout. Exit codes: 0 success, 2 invalid
//! input, 3 failed run.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fock::DEFAULT_CUTOFF;
use crate::ingest;
use crate::interference::{raw_visibility, read_calibration, VisibilityModel};
use crate::optimizer::{self, CurveRow};
use crate::oracle;
use crate::phase_ref::{self, DriftConfig};
use crate::rates::{self, LinkBudget};
use crate::sim;
use crate::source::SourceModel;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

const BUNDLED_EXPERIMENT: &str = include_str!("../data/field_trial.csv");
const BUNDLED_EXPERIMENT_NAME: &str = "field_trial.csv";

#[derive(Debug, Parser)]
#[command(name = "relay-qkd", version, about = "Rates, simulation and data tools for the five-node relay")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Seed for every random stream (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form rate report.
    Rates {
        /// Preset name or TOML path.
        #[arg(long, default_value = "trial_100km")]
        config: String,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        e_extra: Option<f64>,
    },
    /// Monte Carlo run of the protocol; writes tally.json and tally.csv.
    Simulate {
        #[arg(long, default_value = "trial_100km")]
        config: String,
        #[arg(long)]
        rounds: Option<u64>,
        /// Multinomial sampling instead of visiting rounds.
        #[arg(long)]
        aggregate: bool,
        /// Add instrument phase drift scaled to the link length.
        #[arg(long)]
        drift: bool,
        #[arg(long, conflicts_with = "target_qber")]
        e_extra: Option<f64>,
        /// Choose the extra flip rate so the expected QBER hits this value.
        #[arg(long)]
        target_qber: Option<f64>,
        /// Keep per-round records and sift them.
        #[arg(long, conflicts_with = "aggregate")]
        records: bool,
    },
    /// Optimized key rate against distance; one CSV per extra-error level.
    Scan {
        #[arg(long, default_value = "trial_100km")]
        config: String,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 1000.0)]
        to: f64,
        #[arg(long, default_value_t = 20.0)]
        step: f64,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        levels: Vec<f64>,
        #[arg(long)]
        fixed_split: bool,
        /// Perfect detectors and a pure, lossless source.
        #[arg(long)]
        ideal: bool,
    },
    /// Optimize intensity and loss split at one distance.
    Optimize {
        #[arg(long, default_value = "trial_100km")]
        config: String,
        #[arg(long)]
        distance: f64,
        #[arg(long)]
        fixed_split: bool,
        #[arg(long)]
        ideal: bool,
    },
    /// Raw visibility against intensity ratio for each calibration row.
    Visibility {
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long, default_value_t = 0.0015)]
        g2: f64,
        #[arg(long, default_value_t = 1.0)]
        t_p: f64,
        /// I_QD / I_laser values.
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5,10,20,50")]
        ratios: Vec<f64>,
    },
    /// Simulate drift, estimate it from reference pulses, report the residual.
    Phase {
        /// Seconds of drift.
        #[arg(long, default_value_t = 0.1)]
        duration: f64,
        /// Sampling step in seconds; defaults to a tenth of the interval.
        #[arg(long)]
        dt: Option<f64>,
        /// Total fiber length used to scale diffusion and delay.
        #[arg(long, default_value_t = 100.0)]
        distance: f64,
        #[arg(long)]
        diffusion: Option<f64>,
        #[arg(long)]
        ref_photons: Option<f64>,
        #[arg(long)]
        interval: Option<f64>,
        #[arg(long)]
        residual_freq: Option<f64>,
    },
    /// Decoy analysis and key length for experiment count tables.
    Ingest {
        /// Experiment CSV; `field_trial.csv` resolves to the bundled table.
        #[arg(long, default_value = BUNDLED_EXPERIMENT_NAME)]
        data: String,
        #[arg(long, default_value_t = rates::DEFAULT_F_EC)]
        f: f64,
    },
    /// Fock-space click statistics against the closed-form gains.
    OracleCheck {
        #[arg(long, default_value = "trial_100km")]
        config: String,
        #[arg(long, default_value_t = 20)]
        draws: usize,
        /// Largest accepted relative difference.
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            // A bare invocation prints help but is still a usage error.
            return if e.kind() == clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                EXIT_VALIDATION
            } else {
                code
            };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            let _ = writeln!(std::io::stdout(), "{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

/// Runs a parsed command and returns its human summary.
pub fn execute(cli: &Cli) -> Result<String> {
    if cli.threads == Some(0) {
        return Err(Error::invalid("--threads must be at least 1"));
    }
    fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(e.to_string()))?
            .install(|| dispatch(cli)),
        None => dispatch(cli),
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn load(config: &str, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=0.5).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must lie in [0, 0.5], got {v}")))
    }
}

/// Template and source for the optimizer: the config's detector and source,
/// or ideal components.
fn scan_inputs(cfg: &RunConfig, ideal: bool) -> Result<(LinkBudget, SourceModel)> {
    if ideal {
        Ok((
            LinkBudget::symmetric(1.0, 1.0, 1.0, cfg.links.p_d, cfg.links.e_extra),
            SourceModel::ideal(1.0)?,
        ))
    } else {
        Ok((cfg.links, cfg.source_model()?))
    }
}

#[derive(Serialize)]
struct RatesOutput<'a> {
    config: Option<&'a str>,
    links: LinkBudget,
    source: SourceModel,
    protocol: rates::ProtocolConstants,
    report: rates::RateReport,
}

#[derive(Serialize)]
struct SimulateOutput {
    config: Option<String>,
    n_rounds: u64,
    seed: u64,
    aggregate: bool,
    drift: Option<DriftConfig>,
    e_extra_flip: f64,
    analytic_q_mumu: f64,
    analytic_e_mumu: f64,
    summary: sim::TallySummary,
    observed: std::collections::BTreeMap<String, sim::ObservedRate>,
    tally: sim::Tally,
    sift: Option<sim::SiftResult>,
}

#[derive(Serialize)]
struct VisibilityRow {
    window_ps: f64,
    ratio_qd_over_laser: f64,
    g2: f64,
    raw_visibility: f64,
    optimal_ratio: f64,
    raw_visibility_at_optimum: f64,
}

#[derive(Serialize)]
struct PhaseOutput {
    drift: DriftConfig,
    duration_s: f64,
    dt_s: f64,
    intervals: usize,
    residual_error: f64,
}

#[derive(Serialize)]
struct OracleOutput {
    tolerance: f64,
    worst_rel_diff: f64,
    passed: bool,
    cutoff: u8,
    checks: Vec<oracle::GainCheck>,
}

fn dispatch(cli: &Cli) -> Result<String> {
    let out = &cli.out;
    match &cli.command {
        Command::Rates { config, mu, e_extra } => {
            let mut cfg = load(config, cli.seed)?;
            if let Some(m) = mu {
                cfg.protocol.mu = *m;
            }
            if let Some(e) = e_extra {
                check_unit("e_extra", *e)?;
                cfg.links.e_extra = *e;
            }
            cfg.validate()?;
            let src = cfg.source_model()?;
            let report = rates::rate_report(&cfg.links, &src, &cfg.protocol)?;
            let path = write_json(
                out,
                "rates.json",
                &RatesOutput { config: cfg.name.as_deref(), links: cfg.links, source: src, protocol: cfg.protocol, report },
            )?;
            Ok(format!(
                "Q_mu = {:.4e}  E_mu = {:.4}  e_ph = {:.4}  rate = {:.4e} bit/pulse\nwrote {}",
                report.q_mu_total,
                report.e_mu_total,
                report.e_phase_bound,
                report.rate_per_pulse,
                path.display()
            ))
        }
        Command::Simulate { config, rounds, aggregate, drift, e_extra, target_qber, records } => {
            let mut cfg = load(config, cli.seed)?;
            if let Some(n) = rounds {
                cfg.sim.n_rounds = *n;
            }
            let src = cfg.source_model()?;
            let analytic_q = rates::gain_qmu(cfg.protocol.mu, &cfg.links, &src)?.total;
            let intrinsic = rates::error_emu(cfg.protocol.mu, &cfg.links, &src, &cfg.protocol)?.e_mu;
            if let Some(e) = e_extra {
                check_unit("e_extra", *e)?;
                cfg.links.e_extra = *e;
            }
            if let Some(t) = target_qber {
                cfg.links.e_extra = sim::calibrate_extra_error(*t, intrinsic)?;
            }
            if *drift {
                let km = -10.0 * (cfg.links.eta1 * cfg.links.eta2).log10() * 2.0 / optimizer::DEFAULT_ATTENUATION_DB_PER_KM;
                cfg.drift = Some(cfg.drift.unwrap_or_else(|| DriftConfig::for_distance(km)));
            }
            cfg.sim.retain_records = *records;
            cfg.validate()?;
            let sc = cfg.sim_config()?;
            let (tally, sift) = if *aggregate {
                (sim::run_protocol_aggregate(&sc)?, None)
            } else {
                let o = sim::run_protocol(&sc)?;
                let sift = if *records { sim::sift_and_map(&o.records, cfg.protocol.d_phases).ok() } else { None };
                (o.tally, sift)
            };
            let summary = tally.summary();
            let e_total = intrinsic + cfg.links.e_extra * (1.0 - 2.0 * intrinsic);
            let output = SimulateOutput {
                config: cfg.name.clone(),
                n_rounds: sc.n_rounds,
                seed: sc.seed,
                aggregate: *aggregate,
                drift: sc.drift,
                e_extra_flip: cfg.links.e_extra,
                analytic_q_mumu: analytic_q,
                analytic_e_mumu: e_total,
                summary,
                observed: sim::observed_rates(&tally),
                tally,
                sift,
            };
            let json = write_json(out, "tally.json", &output)?;
            let csv_path = out.join("tally.csv");
            sim::write_summary_csv(&csv_path, &[summary])?;
            let q_obs = summary.m_mumu as f64 / summary.n_mumu.max(1) as f64;
            Ok(format!(
                "{} rounds: M_mumu = {} (Q = {:.4e}, model {:.4e}), raw key {} bits, QBER {} (model {:.4})\nwrote {} and {}",
                summary.n,
                summary.m_mumu,
                q_obs,
                analytic_q,
                summary.raw_key_length,
                summary.qber.map_or("undefined".to_string(), |q| format!("{q:.4}")),
                e_total,
                json.display(),
                csv_path.display()
            ))
        }
        Command::Scan { config, from, to, step, levels, fixed_split, ideal } => {
            if step.is_nan() || *step <= 0.0 || to < from || *from < 0.0 {
                return Err(Error::invalid("need 0 <= from <= to and step > 0"));
            }
            for l in levels {
                check_unit("level", *l)?;
            }
            let cfg = load(config, cli.seed)?;
            let (template, src) = scan_inputs(&cfg, *ideal)?;
            let n = ((to - from) / step).floor() as usize;
            let distances: Vec<f64> = (0..=n).map(|k| from + step * k as f64).collect();
            let curves = optimizer::scan_distance(
                &distances,
                levels,
                &template,
                &src,
                &cfg.protocol,
                !fixed_split,
                &cfg.optimizer,
            )?;
            let mut lines = Vec::new();
            for c in &curves {
                let path = out.join(format!("curve_e{:.3}.csv", c.e_extra));
                let rows: Vec<CurveRow> = c.points.iter().map(CurveRow::from).collect();
                optimizer::write_curve_csv(&path, &rows)?;
                let reach = c.points.last().map_or("none".to_string(), |p| format!("{} km", p.total_distance));
                lines.push(format!("e_extra {:.3}: last positive point {reach}, wrote {}", c.e_extra, path.display()));
            }
            Ok(lines.join("\n"))
        }
        Command::Optimize { config, distance, fixed_split, ideal } => {
            let cfg = load(config, cli.seed)?;
            let (template, src) = scan_inputs(&cfg, *ideal)?;
            let r = optimizer::optimize_at_distance(*distance, &template, &src, &cfg.protocol, !fixed_split, &cfg.optimizer)?;
            let path = write_json(out, "optimize.json", &r)?;
            let mut s = format!(
                "{} km: rate {:.4e} bit/pulse at mu {:.4e}, split {:.3} ({} evaluations)\nwrote {}",
                distance,
                r.best.rate,
                r.best.params.mu,
                r.best.loss_split,
                r.evaluations,
                path.display()
            );
            if let Some(d) = &r.diagnostic {
                s.push_str(&format!("\nnote: {d}"));
            }
            Ok(s)
        }
        Command::Visibility { calibration, g2, t_p, ratios } => {
            let rows = read_calibration(calibration)?;
            let mut out_rows = Vec::new();
            for row in &rows {
                for &ratio in ratios {
                    let m = VisibilityModel {
                        v_corrected: row.v_corrected,
                        g2: *g2,
                        sigma_a: row.sigma_a,
                        t_g: row.t_g,
                        t_p: *t_p,
                        ratio_qd_over_laser: ratio,
                    };
                    m.validate()?;
                    let opt = m.optimal_ratio();
                    let at_opt = if opt.is_finite() {
                        raw_visibility(&VisibilityModel { ratio_qd_over_laser: opt, ..m })
                    } else {
                        m.v_corrected
                    };
                    out_rows.push(VisibilityRow {
                        window_ps: row.window_ps,
                        ratio_qd_over_laser: ratio,
                        g2: *g2,
                        raw_visibility: raw_visibility(&m),
                        optimal_ratio: opt,
                        raw_visibility_at_optimum: at_opt,
                    });
                }
            }
            let path = out.join("visibility.csv");
            let mut w = csv::Writer::from_path(&path)?;
            for r in &out_rows {
                w.serialize(r)?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            let json = write_json(out, "visibility.json", &out_rows)?;
            Ok(format!(
                "{} calibration rows x {} ratios\nwrote {} and {}",
                rows.len(),
                ratios.len(),
                path.display(),
                json.display()
            ))
        }
        Command::Phase { duration, dt, distance, diffusion, ref_photons, interval, residual_freq } => {
            let mut d = DriftConfig::for_distance(*distance);
            if let Some(v) = diffusion {
                d.diffusion = *v;
            }
            if let Some(v) = ref_photons {
                d.ref_photons = *v;
            }
            if let Some(v) = interval {
                d.interval = *v;
            }
            if let Some(v) = residual_freq {
                d.residual_freq = *v;
            }
            d.validate()?;
            let dt = dt.unwrap_or(d.interval / 10.0);
            let seed = cli.seed.unwrap_or(1);
            let path = phase_ref::simulate_drift(&d, *duration, dt, seed)?;
            let track = phase_ref::track_phase(&path, &d, seed.wrapping_add(1))?;
            let residual = phase_ref::compensation_residual(&path, &track, &d)?;
            let csv_path = out.join("phase_path.csv");
            phase_ref::write_path_csv(&csv_path, &phase_ref::path_rows(&path, &track, &d))?;
            let json = write_json(
                out,
                "phase.json",
                &PhaseOutput { drift: d, duration_s: *duration, dt_s: dt, intervals: track.len(), residual_error: residual },
            )?;
            Ok(format!(
                "{} intervals, residual misalignment error {:.3e}\nwrote {} and {}",
                track.len(),
                residual,
                csv_path.display(),
                json.display()
            ))
        }
        Command::Ingest { data, f } => {
            if *f < 1.0 {
                return Err(Error::invalid("f must be at least 1"));
            }
            let path = Path::new(data);
            let records = if path.exists() {
                ingest::load_experiment_records(path)?
            } else if data == BUNDLED_EXPERIMENT_NAME {
                ingest::parse_experiment_records(BUNDLED_EXPERIMENT)?
            } else {
                return Err(Error::invalid(format!("no such data file: {data}")));
            };
            let rows: Vec<ingest::IngestRow> =
                records.iter().map(|r| ingest::ingest_record(r, *f)).collect::<Result<_>>()?;
            let csv_path = out.join("ingest.csv");
            ingest::write_ingest_csv(&csv_path, &rows)?;
            let json = write_json(out, "ingest.json", &rows)?;
            let mut lines: Vec<String> = rows
                .iter()
                .map(|r| format!("{:>6} km: e_p {:.4}  rate {:.4e} bit/pulse", r.distance_km, r.e_p, r.per_pulse_rate))
                .collect();
            lines.push(format!("wrote {} and {}", csv_path.display(), json.display()));
            Ok(lines.join("\n"))
        }
        Command::OracleCheck { config, draws, tolerance } => {
            let cfg = load(config, cli.seed)?;
            let src = cfg.source_model()?;
            let mut checks = vec![oracle::check_gain(cfg.protocol.mu, &cfg.links, &src)?];
            checks.extend(oracle::gain_suite(*draws, cfg.seed)?);
            let worst = checks.iter().map(|c| c.rel_diff).fold(0.0, f64::max);
            let passed = worst <= *tolerance;
            let path = write_json(
                out,
                "oracle_check.json",
                &OracleOutput { tolerance: *tolerance, worst_rel_diff: worst, passed, cutoff: DEFAULT_CUTOFF, checks },
            )?;
            let verdict = if passed { "within" } else { "OUTSIDE" };
            let msg = format!(
                "{} settings, worst relative difference {:.3e} ({verdict} {tolerance})\nwrote {}",
                draws + 1,
                worst,
                path.display()
            );
            if passed {
                Ok(msg)
            } else {
                Err(Error::undefined(msg))
            }
        }
    }
}
