//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::codec::codewords_to_csv;
use crate::control::{controls_to_csv, simulate_soi_control, simulate_uniform_control, ControlConfig};
use crate::error::{param, LabError, Result};
use crate::eval::{
    delayed_channel_mse, lookahead_mse, mc_mse, points_to_csv, Lookahead, McConfig, RateDistortionPoint, Scheme,
};
use crate::idrf::{idrf_limit, lower_bound_dn_with, upper_bound_dn, ClosedForms, EndSearch};
use crate::output::{fmt_sig, write_atomic};
use crate::soi::{soi_encode, SoiConfig};
use crate::uniform::{QuantizerSchedule, UniformConfig, UniformEncoder};
use crate::wiener::grid_steps;

pub const SEED_ENV: &str = "WIENER_LAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "wiener-lab", version, about = "Causal rate-constrained coding of the Wiener process")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form distortion-rate curves.
    Analytic(AnalyticArgs),
    /// Monte Carlo MSE of a codec.
    Simulate(SimulateArgs),
    /// Finite-horizon bounds and limit of the informational tradeoff.
    Idrf(IdrfArgs),
    /// One-sample look-ahead decoders.
    Lookahead(LookaheadArgs),
    /// SOI over a channel with a fixed delay.
    Delay(DelayArgs),
    /// Impulse control over a rate-limited link.
    Control(ControlArgs),
    /// The four MSE-versus-rate curves: two closed forms, two simulations.
    #[command(name = "sweep-fig3")]
    SweepFig3(SweepArgs),
}

#[derive(Debug, Args)]
struct OutArgs {
    /// CSV destination; metadata goes next to it with a `.json` extension.
    /// Without it the CSV is written to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct McArgs {
    /// Rates in bits/s: a comma list or `start:stop:step` (stop excluded).
    #[arg(long = "rates", visible_alias = "rate", default_value = "1")]
    rates: String,
    /// Simulated seconds per replication [default: 10000/R].
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Master seed; the WIENER_LAB_SEED environment variable overrides it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Grid spacing in seconds [default: scheme specific].
    #[arg(long = "step-h")]
    step_h: Option<f64>,
    /// Replication workers; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    /// Disable the Brownian-bridge crossing check of the threshold sampler.
    #[arg(long = "no-bridge")]
    no_bridge: bool,
}

#[derive(Debug, Args)]
struct AnalyticArgs {
    /// Comma list from: dop, ddet, noncausal, dch.
    #[arg(long, default_value = "dop,ddet,noncausal")]
    curves: String,
    #[arg(long, default_value = "0.5:10.5:0.5")]
    rates: String,
    /// Channel delay for the `dch` curve.
    #[arg(long, default_value_t = 0.0)]
    delay: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum SchemeArg {
    Soi,
    Uniform,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "soi")]
    scheme: SchemeArg,
    /// Bits per sample for the uniform scheme.
    #[arg(long, default_value_t = 1)]
    bits: u32,
    #[command(flatten)]
    mc: McArgs,
    /// Write the codewords of replication 0 (first rate) as `time,bit`.
    #[arg(long = "codewords-out")]
    codewords_out: Option<PathBuf>,
    /// Write the uniform quantizer schedule (first rate).
    #[arg(long = "schedule-out")]
    schedule_out: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct IdrfArgs {
    #[arg(long, default_value = "1")]
    f: String,
    #[arg(long, default_value = "1")]
    rs: String,
    #[arg(long, default_value = "100,1000,10000")]
    n: String,
    /// Comma list from: lower, upper, limit.
    #[arg(long, default_value = "lower,upper,limit")]
    kinds: String,
    /// Search the two end intervals of the lower bound independently.
    #[arg(long)]
    asymmetric: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum LookaheadArg {
    SoiMidpoint,
    Uniform,
    UniformSampling,
}

#[derive(Debug, Args)]
struct LookaheadArgs {
    #[arg(long, value_enum, default_value = "soi-midpoint")]
    scheme: LookaheadArg,
    #[arg(long, default_value_t = 1)]
    bits: u32,
    #[command(flatten)]
    mc: McArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct DelayArgs {
    /// Delays in seconds, list or range. Rows are labelled `soi_delay_<delay>`.
    #[arg(long, default_value = "0,0.2,0.5")]
    delays: String,
    #[command(flatten)]
    mc: McArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct ControlArgs {
    #[arg(long, value_enum, default_value = "soi")]
    controller: SchemeArg,
    #[command(flatten)]
    mc: McArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, default_value = "1:6:1")]
    rates: String,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 30)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long = "step-h")]
    step_h: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    out: OutArgs,
}

/// Configuration echoed into the metadata file.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub rates: Vec<f64>,
    /// `None` means the per-rate default `10000/R`.
    pub horizon: Option<f64>,
    pub reps: Option<usize>,
    pub step_h: Option<f64>,
    pub master_seed: Option<u64>,
    pub delays: Vec<f64>,
    pub n_list: Vec<usize>,
    pub f_list: Vec<f64>,
    pub rs_list: Vec<f64>,
    pub variant: Option<String>,
    pub bits: Option<u32>,
    pub bridge: Option<bool>,
    pub output: Option<String>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    input_hash: String,
    output_hash: String,
}

/// `sha256("blob <len>\0" ‖ bytes)` in hex, as git hashes file contents.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Parses `a,b,c` or `start:stop:step` (stop excluded).
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let bad = |what: &str| param(format!("cannot parse {what} in `{text}`"));
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("range (expected start:stop:step)"));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad("number")))
            .collect::<Result<_>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() {
            return Err(bad("range step"));
        }
        let count = ((stop - start) / step - 1e-9).ceil().max(0.0) as usize;
        if count > 1_000_000 {
            return Err(bad("range size"));
        }
        (0..count).map(|k| start + k as f64 * step).collect()
    } else {
        text.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad("number")))
            .collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(param(format!("`{text}` is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("finite number"));
    }
    Ok(values)
}

fn parse_counts(text: &str) -> Result<Vec<usize>> {
    parse_list(text)?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(param(format!("expected a positive integer, got {v}")))
            }
        })
        .collect()
}

fn parse_rates(text: &str) -> Result<Vec<f64>> {
    let rates = parse_list(text)?;
    if rates.iter().any(|&r| r <= 0.0) {
        return Err(param("rates must be positive"));
    }
    Ok(rates)
}

fn resolve_seed(flag: u64, env: Option<&str>) -> Result<u64> {
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| param(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        None => Ok(flag),
    }
}

fn default_jobs(jobs: Option<usize>) -> usize {
    jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn horizon_for(horizon: Option<f64>, rate: f64) -> f64 {
    horizon.unwrap_or(1e4 / rate)
}

struct Ctx<'a> {
    env_seed: Option<&'a str>,
}

impl McArgs {
    fn settings(&self, ctx: &Ctx) -> Result<(Vec<f64>, u64, usize)> {
        Ok((
            parse_rates(&self.rates)?,
            resolve_seed(self.seed, ctx.env_seed)?,
            default_jobs(self.jobs),
        ))
    }

    fn mc(&self, rate: f64, seed: u64, jobs: usize) -> McConfig {
        let mut c = McConfig::new(horizon_for(self.horizon, rate), self.reps, seed)
            .with_jobs(jobs)
            .with_bridge(!self.no_bridge);
        c.step_h = self.step_h;
        c
    }

    fn echo(&self, command: &str, rates: &[f64], seed: u64, out: &OutArgs) -> ExperimentConfig {
        ExperimentConfig {
            command: command.into(),
            rates: rates.to_vec(),
            horizon: self.horizon,
            reps: Some(self.reps),
            step_h: self.step_h,
            master_seed: Some(seed),
            bridge: Some(!self.no_bridge),
            output: out.out.as_ref().map(|p| p.display().to_string()),
            ..Default::default()
        }
    }
}

fn emit(csv: &str, out: &OutArgs, config: &ExperimentConfig) -> Result<()> {
    match &out.out {
        None => {
            print!("{csv}");
            Ok(())
        }
        Some(path) => {
            write_atomic(path, csv.as_bytes())?;
            let config_json = serde_json::to_vec(config).map_err(|e| LabError::Numerical(e.to_string()))?;
            let meta = Metadata {
                tool: "wiener-lab",
                version: env!("CARGO_PKG_VERSION"),
                config,
                input_hash: content_hash(&config_json),
                output_hash: content_hash(csv.as_bytes()),
            };
            let mut json = serde_json::to_string_pretty(&meta).map_err(|e| LabError::Numerical(e.to_string()))?;
            json.push('\n');
            write_atomic(&metadata_path(path), json.as_bytes())?;
            Ok(())
        }
    }
}

/// `curves.csv` → `curves.json`.
pub fn metadata_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn analytic(a: &AnalyticArgs) -> Result<()> {
    let rates = parse_rates(&a.rates)?;
    let curves: Vec<&str> = a.curves.split(',').map(str::trim).collect();
    for c in &curves {
        if !matches!(*c, "dop" | "ddet" | "noncausal" | "dch") {
            return Err(param(format!("unknown curve `{c}` (expected dop, ddet, noncausal, dch)")));
        }
    }
    let mut csv = String::from("curve,R,value\n");
    for c in &curves {
        for &r in &rates {
            let f = ClosedForms::new(r)?;
            let v = match *c {
                "dop" => f.dop,
                "ddet" => f.ddet,
                "noncausal" => f.dnoncausal,
                _ => f.dch(a.delay)?,
            };
            let _ = writeln!(csv, "{c},{},{}", fmt_sig(r), fmt_sig(v));
        }
    }
    let config = ExperimentConfig {
        command: "analytic".into(),
        rates,
        delays: vec![a.delay],
        variant: Some(a.curves.clone()),
        output: a.out.out.as_ref().map(|p| p.display().to_string()),
        ..Default::default()
    };
    emit(&csv, &a.out, &config)
}

fn simulate(a: &SimulateArgs, ctx: &Ctx) -> Result<()> {
    let (rates, seed, jobs) = a.mc.settings(ctx)?;
    let scheme = match a.scheme {
        SchemeArg::Soi => Scheme::Soi,
        SchemeArg::Uniform => Scheme::UniformLloyd { bits: a.bits },
    };
    let points = rates
        .iter()
        .map(|&r| mc_mse(scheme, r, &a.mc.mc(r, seed, jobs)))
        .collect::<Result<Vec<_>>>()?;
    let first = a.mc.mc(rates[0], seed, jobs);
    let stream = crate::eval::replication_seed(&first, 0);
    if let Some(path) = &a.codewords_out {
        let codewords = match scheme {
            Scheme::Soi => {
                let c = SoiConfig::new(rates[0])?;
                let h = first.step_h.unwrap_or_else(|| c.default_step_h());
                soi_encode(stream, c, first.horizon, h, first.bridge)?.codewords
            }
            Scheme::UniformLloyd { bits } => {
                let c = UniformConfig::new(rates[0], bits)?;
                let h = first.step_h.unwrap_or_else(|| c.default_step_h());
                let steps = grid_steps(first.horizon, h);
                let schedule = QuantizerSchedule::design(c, steps / c.stride(h)?)?;
                UniformEncoder::new(&schedule, h)?
                    .encode(&mut stream.generator(), steps, &mut ())
                    .codewords
            }
        };
        write_atomic(path, codewords_to_csv(&codewords).as_bytes())?;
    }
    if let Some(path) = &a.schedule_out {
        let c = UniformConfig::new(rates[0], a.bits)?;
        let h = first.step_h.unwrap_or_else(|| c.default_step_h());
        let schedule = QuantizerSchedule::design(c, grid_steps(first.horizon, h) / c.stride(h)?)?;
        write_atomic(path, schedule.to_csv().as_bytes())?;
    }
    let mut config = a.mc.echo("simulate", &rates, seed, &a.out);
    config.variant = Some(scheme.label().into());
    config.bits = matches!(scheme, Scheme::UniformLloyd { .. }).then_some(a.bits);
    emit(&points_to_csv(&points), &a.out, &config)
}

fn idrf(a: &IdrfArgs) -> Result<()> {
    let fs = parse_rates(&a.f)?;
    let rss = parse_list(&a.rs)?;
    let ns = parse_counts(&a.n)?;
    let kinds: Vec<&str> = a.kinds.split(',').map(str::trim).collect();
    for k in &kinds {
        if !matches!(*k, "lower" | "upper" | "limit") {
            return Err(param(format!("unknown kind `{k}` (expected lower, upper, limit)")));
        }
    }
    let search = if a.asymmetric { EndSearch::Asymmetric } else { EndSearch::Symmetric };
    let mut csv = String::from("R,f,Rs,N,kind,value\n");
    for &f in &fs {
        for &rs in &rss {
            let r = fmt_sig(f * rs);
            for k in &kinds {
                match *k {
                    "limit" => {
                        let v = idrf_limit(f, rs)?;
                        let _ = writeln!(csv, "{r},{},{},,limit,{}", fmt_sig(f), fmt_sig(rs), fmt_sig(v));
                    }
                    kind => {
                        for &n in &ns {
                            let sol = if kind == "lower" {
                                lower_bound_dn_with(f, rs, n, search)?
                            } else {
                                upper_bound_dn(f, rs, n)?
                            };
                            let _ = writeln!(
                                csv,
                                "{r},{},{},{n},{},{}",
                                fmt_sig(f),
                                fmt_sig(rs),
                                sol.kind.label(),
                                fmt_sig(sol.value)
                            );
                        }
                    }
                }
            }
        }
    }
    let config = ExperimentConfig {
        command: "idrf".into(),
        n_list: ns,
        f_list: fs,
        rs_list: rss,
        variant: Some(format!("{}{}", a.kinds, if a.asymmetric { ";asymmetric" } else { "" })),
        output: a.out.out.as_ref().map(|p| p.display().to_string()),
        ..Default::default()
    };
    emit(&csv, &a.out, &config)
}

fn lookahead(a: &LookaheadArgs, ctx: &Ctx) -> Result<()> {
    let (rates, seed, jobs) = a.mc.settings(ctx)?;
    let scheme = match a.scheme {
        LookaheadArg::SoiMidpoint => Lookahead::SoiMidpoint,
        LookaheadArg::Uniform => Lookahead::UniformInterpolation { bits: a.bits },
        LookaheadArg::UniformSampling => Lookahead::UniformSamplingOnly { bits: a.bits },
    };
    let points = rates
        .iter()
        .map(|&r| lookahead_mse(scheme, r, &a.mc.mc(r, seed, jobs)))
        .collect::<Result<Vec<_>>>()?;
    let mut config = a.mc.echo("lookahead", &rates, seed, &a.out);
    config.variant = Some(scheme.label().into());
    emit(&points_to_csv(&points), &a.out, &config)
}

fn delay(a: &DelayArgs, ctx: &Ctx) -> Result<()> {
    let (rates, seed, jobs) = a.mc.settings(ctx)?;
    let delays = parse_list(&a.delays)?;
    let mut points = Vec::new();
    for &r in &rates {
        for &d in &delays {
            let mut p = delayed_channel_mse(r, d, &a.mc.mc(r, seed, jobs))?;
            p.method = format!("{}_{}", p.method, fmt_sig(d));
            points.push(p);
        }
    }
    let mut config = a.mc.echo("delay", &rates, seed, &a.out);
    config.delays = delays;
    emit(&points_to_csv(&points), &a.out, &config)
}

fn control(a: &ControlArgs, ctx: &Ctx) -> Result<()> {
    let (rates, seed, jobs) = a.mc.settings(ctx)?;
    let outcomes = rates
        .iter()
        .map(|&r| {
            let mut c = ControlConfig::new(horizon_for(a.mc.horizon, r), a.mc.reps, seed).with_jobs(jobs);
            c.step_h = a.mc.step_h;
            c.bridge = !a.mc.no_bridge;
            match a.controller {
                SchemeArg::Soi => simulate_soi_control(r, &c),
                SchemeArg::Uniform => simulate_uniform_control(r, &c),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut config = a.mc.echo("control", &rates, seed, &a.out);
    config.variant = Some(format!("{:?}", a.controller).to_lowercase());
    emit(&controls_to_csv(&outcomes), &a.out, &config)
}

/// Rows `curve,R,mse,ci` for the closed forms and both simulated codecs.
pub fn sweep_figure3(rates: &[f64], horizon: Option<f64>, reps: usize, seed: u64, step_h: Option<f64>, jobs: usize) -> Result<String> {
    let mut rows: Vec<(&str, f64, f64, f64)> = Vec::new();
    for &r in rates {
        let f = ClosedForms::new(r)?;
        let mut cfg = McConfig::new(horizon_for(horizon, r), reps, seed).with_jobs(jobs);
        cfg.step_h = step_h;
        let soi: RateDistortionPoint = mc_mse(Scheme::Soi, r, &cfg)?;
        let lloyd = mc_mse(Scheme::UniformLloyd { bits: 1 }, r, &cfg)?;
        rows.push(("dop", r, f.dop, 0.0));
        rows.push(("ddet", r, f.ddet, 0.0));
        rows.push(("soi", r, soi.mse, soi.ci_halfwidth));
        rows.push(("greedy_lloyd_max", r, lloyd.mse, lloyd.ci_halfwidth));
    }
    let mut csv = String::from("curve,R,mse,ci\n");
    for (c, r, m, ci) in rows {
        let _ = writeln!(csv, "{c},{},{},{}", fmt_sig(r), fmt_sig(m), fmt_sig(ci));
    }
    Ok(csv)
}

fn sweep(a: &SweepArgs, ctx: &Ctx) -> Result<()> {
    let rates = parse_rates(&a.rates)?;
    let seed = resolve_seed(a.seed, ctx.env_seed)?;
    let csv = sweep_figure3(&rates, a.horizon, a.reps, seed, a.step_h, default_jobs(a.jobs))?;
    let config = ExperimentConfig {
        command: "sweep-fig3".into(),
        rates,
        horizon: a.horizon,
        reps: Some(a.reps),
        step_h: a.step_h,
        master_seed: Some(seed),
        bridge: Some(true),
        output: a.out.out.as_ref().map(|p| p.display().to_string()),
        ..Default::default()
    };
    emit(&csv, &a.out, &config)
}

fn dispatch(cli: &Cli, ctx: &Ctx) -> Result<()> {
    match &cli.command {
        Command::Analytic(a) => analytic(a),
        Command::Simulate(a) => simulate(a, ctx),
        Command::Idrf(a) => idrf(a),
        Command::Lookahead(a) => lookahead(a, ctx),
        Command::Delay(a) => delay(a, ctx),
        Command::Control(a) => control(a, ctx),
        Command::SweepFig3(a) => sweep(a, ctx),
    }
}

/// Exit code for an error: 2 for bad parameters, 1 otherwise.
pub fn exit_code(err: &LabError) -> i32 {
    match err {
        LabError::Parameter(_) => 2,
        LabError::Replication { source, .. } => exit_code(source),
        _ => 1,
    }
}

/// Runs the command line `argv` (program name first) with an explicit
/// value for the seed override variable.
pub fn run_with_env<I, T>(argv: I, env_seed: Option<&str>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli, &Ctx { env_seed }) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs the command line `argv`, honouring `WIENER_LAB_SEED`.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env = std::env::var(SEED_ENV).ok();
    run_with_env(argv, env.as_deref())
}
