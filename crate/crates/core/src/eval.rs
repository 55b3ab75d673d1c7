//! Monte Carlo evaluation of the codecs: long-run MSE, rate accounting,
//! the sampling/quantization decomposition, look-ahead and delayed
//! decoders.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::Serialize;

use crate::codec::{ReconstructionTrace, SampleEvent};
use crate::error::{ensure_positive, param, LabError, Result};
use crate::output::fmt_sig;
use crate::rng::SeedStream;
use crate::soi::{soi_decode, soi_encode_recorded, SoiConfig, SoiEncoder, SoiObserver};
use crate::stats::{Replications, Summary};
use crate::uniform::{greedy_lloyd_encode_with, QuantizerSchedule, UniformConfig, UniformEncoder, UniformObserver};
use crate::wiener::{generate_path, grid_steps, WienerPath};

/// Settings shared by every Monte Carlo experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McConfig {
    pub horizon: f64,
    pub reps: usize,
    pub master_seed: u64,
    /// Grid spacing; `None` picks the scheme's default.
    pub step_h: Option<f64>,
    pub jobs: usize,
    /// Brownian-bridge crossing check in the threshold sampler.
    pub bridge: bool,
}

impl McConfig {
    pub fn new(horizon: f64, reps: usize, master_seed: u64) -> Self {
        Self {
            horizon,
            reps,
            master_seed,
            step_h: None,
            jobs: 1,
            bridge: true,
        }
    }

    pub fn with_step_h(mut self, h: f64) -> Self {
        self.step_h = Some(h);
        self
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs;
        self
    }

    pub fn with_bridge(mut self, bridge: bool) -> Self {
        self.bridge = bridge;
        self
    }

    fn replications(&self) -> Result<Replications> {
        Replications::new(self.master_seed, self.reps, self.jobs)
    }

    fn check_horizon(&self, rate: f64) -> Result<()> {
        ensure_positive("horizon", self.horizon)?;
        if self.horizon * (1.0 + 1e-12) < 100.0 / rate {
            return Err(param(format!(
                "horizon {} is shorter than 100/R = {}",
                self.horizon,
                100.0 / rate
            )));
        }
        if let Some(h) = self.step_h {
            ensure_positive("step_h", h)?;
        }
        Ok(())
    }
}

/// Which codec a Monte Carlo run exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Soi,
    UniformLloyd { bits: u32 },
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Soi => "soi",
            Self::UniformLloyd { .. } => "uniform_lloyd",
        }
    }
}

/// One estimated point of a distortion-rate curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateDistortionPoint {
    pub method: String,
    pub rate: f64,
    /// Sampling frequency (mean frequency for event-triggered schemes).
    pub f: f64,
    /// Bits per sample.
    pub rs: f64,
    pub mse: f64,
    pub ci_halfwidth: f64,
    pub std_err: f64,
    pub reps: usize,
    pub horizon: f64,
}

impl RateDistortionPoint {
    fn from_summary(method: &str, rate: f64, f: f64, rs: f64, s: Summary, horizon: f64) -> Self {
        Self {
            method: method.to_string(),
            rate,
            f,
            rs,
            mse: s.mean,
            ci_halfwidth: s.ci_halfwidth(),
            std_err: s.std_err,
            reps: s.reps,
            horizon,
        }
    }

    pub fn summary(&self) -> Summary {
        Summary {
            mean: self.mse,
            std_err: self.std_err,
            reps: self.reps,
        }
    }
}

pub const POINT_CSV_HEADER: &str = "method,R,f,Rs,reps,horizon,mse,ci";

pub fn points_to_csv(points: &[RateDistortionPoint]) -> String {
    let mut out = format!("{POINT_CSV_HEADER}\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.method,
            fmt_sig(p.rate),
            fmt_sig(p.f),
            fmt_sig(p.rs),
            p.reps,
            fmt_sig(p.horizon),
            fmt_sig(p.mse),
            fmt_sig(p.ci_halfwidth)
        );
    }
    out
}

struct SquaredOffset(f64);

impl SoiObserver for SquaredOffset {
    #[inline]
    fn on_step(&mut self, _: f64, offset: f64) {
        self.0 += offset * offset;
    }
}

fn soi_setup(rate: f64, cfg: &McConfig) -> Result<SoiEncoder> {
    let config = SoiConfig::new(rate)?;
    cfg.check_horizon(rate)?;
    let h = cfg.step_h.unwrap_or_else(|| config.default_step_h());
    SoiEncoder::new(config, h, cfg.bridge)
}

/// SOI Monte Carlo result with its rate accounting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoiStats {
    pub point: RateDistortionPoint,
    /// Codeword bits per second.
    pub bit_rate: Summary,
    /// Mean time between samples.
    pub mean_interval: Summary,
}

/// Long-run MSE, bit rate and mean sampling interval of the SOI code.
pub fn soi_stats(rate: f64, cfg: &McConfig) -> Result<SoiStats> {
    let encoder = soi_setup(rate, cfg)?;
    let results = cfg.replications()?.run(|seed| {
        let mut sq = SquaredOffset(0.0);
        let enc = encoder.encode(&mut seed.generator(), cfg.horizon, &mut sq);
        let count = enc.codewords.len();
        if count == 0 {
            return Err(LabError::Numerical("no samples within the horizon".into()));
        }
        let last = enc.events[count - 1].time;
        Ok((sq.0 / enc.steps as f64, count as f64 / enc.horizon(), last / count as f64))
    })?;
    let col = |k: usize| -> Vec<f64> {
        results
            .iter()
            .map(|r| match k {
                0 => r.0,
                1 => r.1,
                _ => r.2,
            })
            .collect()
    };
    let mse = Summary::from_samples(&col(0))?;
    Ok(SoiStats {
        point: RateDistortionPoint::from_summary("soi", rate, rate, 1.0, mse, cfg.horizon),
        bit_rate: Summary::from_samples(&col(1))?,
        mean_interval: Summary::from_samples(&col(2))?,
    })
}

struct UniformSetup {
    config: UniformConfig,
    schedule: QuantizerSchedule,
    step_h: f64,
    steps: usize,
}

fn uniform_setup(rate: f64, bits: u32, cfg: &McConfig) -> Result<UniformSetup> {
    let config = UniformConfig::new(rate, bits)?;
    cfg.check_horizon(rate)?;
    let step_h = cfg.step_h.unwrap_or_else(|| config.default_step_h());
    let steps = grid_steps(cfg.horizon, step_h);
    let stride = config.stride(step_h)?;
    let schedule = QuantizerSchedule::design(config, steps / stride)?;
    Ok(UniformSetup {
        config,
        schedule,
        step_h,
        steps,
    })
}

/// Long-run MSE of `scheme` at rate `R`.
pub fn mc_mse(scheme: Scheme, rate: f64, cfg: &McConfig) -> Result<RateDistortionPoint> {
    match scheme {
        Scheme::Soi => Ok(soi_stats(rate, cfg)?.point),
        Scheme::UniformLloyd { bits } => {
            let setup = uniform_setup(rate, bits, cfg)?;
            let encoder = UniformEncoder::new(&setup.schedule, setup.step_h)?;
            let mses = cfg
                .replications()?
                .run(|seed| Ok(encoder.encode(&mut seed.generator(), setup.steps, &mut ()).mse))?;
            let s = Summary::from_samples(&mses)?;
            Ok(RateDistortionPoint::from_summary(
                scheme.label(),
                rate,
                setup.config.frequency(),
                f64::from(bits),
                s,
                cfg.horizon,
            ))
        }
    }
}

/// Per-second split of the squared error into the part accrued since the
/// last sample and the error already present at the sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionReport {
    /// Time average of `(W_t − W_τi)²`.
    pub sampling_term: f64,
    /// Time average of `(W_τi − Ŵ_τi)²` held over each interval.
    pub quantization_term: f64,
    /// Remainder `total − sampling − quantization`.
    pub cross_term: f64,
    /// Time average of `(W_t − Ŵ_t)²`.
    pub total: f64,
}

/// Decomposes the tracking error of a decoded path.
///
/// `trace` must hold one breakpoint per event after the initial one, and
/// the events must lie on the path's grid.
pub fn distortion_decomposition(
    path: &WienerPath,
    events: &[SampleEvent],
    trace: &ReconstructionTrace,
) -> Result<DecompositionReport> {
    let bp = trace.breakpoints();
    if bp.len() != events.len() + 1 {
        return Err(LabError::Input(format!(
            "{} events but {} decoded levels",
            events.len(),
            bp.len() - 1
        )));
    }
    let n = path.len();
    let mut prev_step = 0;
    for (i, e) in events.iter().enumerate() {
        if e.step >= n || (i > 0 && e.step <= prev_step) || e.step == 0 {
            return Err(LabError::Input(format!(
                "event {i} at step {} is not inside the path grid in order",
                e.step
            )));
        }
        prev_step = e.step;
    }
    let (mut s_samp, mut s_quant, mut s_total) = (0.0, 0.0, 0.0);
    let mut next = 0usize;
    let mut w_tau = 0.0;
    let mut what_tau = 0.0;
    for (j, &w) in path.values.iter().enumerate() {
        if next < events.len() && events[next].step == j {
            w_tau = path.values[j];
            what_tau = bp[next + 1].1;
            next += 1;
        }
        let a = w - w_tau;
        let b = w_tau - what_tau;
        let c = w - what_tau;
        s_samp += a * a;
        s_quant += b * b;
        s_total += c * c;
    }
    let len = n as f64;
    let (sampling_term, quantization_term, total) = (s_samp / len, s_quant / len, s_total / len);
    Ok(DecompositionReport {
        sampling_term,
        quantization_term,
        cross_term: total - sampling_term - quantization_term,
        total,
    })
}

/// Decomposition averaged over replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionSummary {
    pub sampling: Summary,
    pub quantization: Summary,
    pub cross: Summary,
    pub total: Summary,
    /// Largest quantization term seen in any replication.
    pub max_quantization: f64,
}

pub fn mc_decomposition(scheme: Scheme, rate: f64, cfg: &McConfig) -> Result<DecompositionSummary> {
    let reports = match scheme {
        Scheme::Soi => {
            let config = SoiConfig::new(rate)?;
            cfg.check_horizon(rate)?;
            let h = cfg.step_h.unwrap_or_else(|| config.default_step_h());
            cfg.replications()?.run(|seed| {
                let (enc, path) = soi_encode_recorded(seed, config, cfg.horizon, h, cfg.bridge)?;
                let trace = soi_decode(&enc.codewords, config.threshold())?;
                distortion_decomposition(&path, &enc.events, &trace)
            })?
        }
        Scheme::UniformLloyd { bits } => {
            let setup = uniform_setup(rate, bits, cfg)?;
            cfg.replications()?.run(|seed| {
                let path = generate_path(cfg.horizon, setup.step_h, seed)?;
                let enc = greedy_lloyd_encode_with(&path, &setup.schedule)?;
                distortion_decomposition(&path, &enc.events, &enc.trace)
            })?
        }
    };
    let col = |f: fn(&DecompositionReport) -> f64| -> Vec<f64> { reports.iter().map(f).collect() };
    Ok(DecompositionSummary {
        sampling: Summary::from_samples(&col(|r| r.sampling_term))?,
        quantization: Summary::from_samples(&col(|r| r.quantization_term))?,
        cross: Summary::from_samples(&col(|r| r.cross_term))?,
        total: Summary::from_samples(&col(|r| r.total))?,
        max_quantization: reports.iter().map(|r| r.quantization_term).fold(0.0, f64::max),
    })
}

/// One-sample look-ahead decoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookahead {
    /// SOI: the level midway between consecutive samples.
    SoiMidpoint,
    /// Uniform + greedy Lloyd-Max: linear interpolation between decoded
    /// sample values.
    UniformInterpolation { bits: u32 },
    /// Uniform sampling with exact sample values, linearly interpolated.
    UniformSamplingOnly { bits: u32 },
}

impl Lookahead {
    pub fn label(&self) -> &'static str {
        match self {
            Self::SoiMidpoint => "soi_midpoint",
            Self::UniformInterpolation { .. } => "uniform_interpolation",
            Self::UniformSamplingOnly { .. } => "uniform_sampling_interpolation",
        }
    }
}

/// Segment sums for the midpoint decoder; the open final segment falls
/// back to the causal estimate.
struct Midpoint {
    beta: f64,
    n: f64,
    s1: f64,
    s2: f64,
    total: f64,
}

impl SoiObserver for Midpoint {
    #[inline]
    fn on_step(&mut self, _: f64, offset: f64) {
        self.n += 1.0;
        self.s1 += offset;
        self.s2 += offset * offset;
    }

    fn on_sample(&mut self, _: &SampleEvent, sign: i8) {
        let half = 0.5 * f64::from(sign) * self.beta;
        self.total += self.s2 - 2.0 * half * self.s1 + self.n * half * half;
        self.n = 0.0;
        self.s1 = 0.0;
        self.s2 = 0.0;
    }
}

/// Buffers one sampling interval and scores it by linear interpolation
/// once the closing sample is known.
struct Interpolator {
    buf: Vec<f64>,
    start_w: f64,
    start_level: f64,
    use_decoded: bool,
    total: f64,
}

impl Interpolator {
    fn flush(&mut self, end: Option<(f64, f64)>) {
        let len = self.buf.len() as f64;
        let (a, b) = match (end, self.use_decoded) {
            (Some((_, lv)), true) => (self.start_level, lv),
            (Some((w, _)), false) => (self.start_w, w),
            (None, true) => (self.start_level, self.start_level),
            (None, false) => (self.start_w, self.start_w),
        };
        for (j, &w) in self.buf.iter().enumerate() {
            let est = a + (b - a) * (j as f64 / len);
            self.total += (w - est) * (w - est);
        }
        self.buf.clear();
    }
}

impl UniformObserver for Interpolator {
    #[inline]
    fn on_step(&mut self, value: f64, _: f64) {
        self.buf.push(value);
    }

    fn on_sample(&mut self, event: &SampleEvent, level: f64) {
        self.flush(Some((event.value, level)));
        self.start_w = event.value;
        self.start_level = level;
    }
}

/// Long-run MSE of a look-ahead decoder.
pub fn lookahead_mse(scheme: Lookahead, rate: f64, cfg: &McConfig) -> Result<RateDistortionPoint> {
    match scheme {
        Lookahead::SoiMidpoint => {
            let encoder = soi_setup(rate, cfg)?;
            let beta = encoder.config().threshold();
            let mses = cfg.replications()?.run(|seed| {
                let mut m = Midpoint {
                    beta,
                    n: 0.0,
                    s1: 0.0,
                    s2: 0.0,
                    total: 0.0,
                };
                let enc = encoder.encode(&mut seed.generator(), cfg.horizon, &mut m);
                Ok((m.total + m.s2) / enc.steps as f64)
            })?;
            let s = Summary::from_samples(&mses)?;
            Ok(RateDistortionPoint::from_summary(scheme.label(), rate, rate, 1.0, s, cfg.horizon))
        }
        Lookahead::UniformInterpolation { bits } | Lookahead::UniformSamplingOnly { bits } => {
            let use_decoded = matches!(scheme, Lookahead::UniformInterpolation { .. });
            let setup = uniform_setup(rate, bits, cfg)?;
            let encoder = UniformEncoder::new(&setup.schedule, setup.step_h)?;
            let mses = cfg.replications()?.run(|seed| {
                let mut it = Interpolator {
                    buf: Vec::with_capacity(encoder.stride()),
                    start_w: 0.0,
                    start_level: 0.0,
                    use_decoded,
                    total: 0.0,
                };
                encoder.encode(&mut seed.generator(), setup.steps, &mut it);
                it.flush(None);
                Ok(it.total / setup.steps as f64)
            })?;
            let s = Summary::from_samples(&mses)?;
            Ok(RateDistortionPoint::from_summary(
                scheme.label(),
                rate,
                setup.config.frequency(),
                f64::from(bits),
                s,
                cfg.horizon,
            ))
        }
    }
}

/// SOI decoder that applies each innovation `delay` seconds after it was
/// generated.
struct Delayed {
    step_h: f64,
    delay: f64,
    step: usize,
    pending: VecDeque<(f64, f64)>,
    applied: f64,
    sq: f64,
}

impl SoiObserver for Delayed {
    #[inline]
    fn on_step(&mut self, anchor: f64, offset: f64) {
        let t = self.step as f64 * self.step_h;
        while let Some(&(at, level)) = self.pending.front() {
            if at > t {
                break;
            }
            self.applied = level;
            self.pending.pop_front();
        }
        let e = anchor + offset - self.applied;
        self.sq += e * e;
        self.step += 1;
    }

    fn on_sample(&mut self, event: &SampleEvent, _: i8) {
        self.pending.push_back((event.time + self.delay, event.value));
    }
}

/// Long-run MSE of SOI when every codeword reaches the decoder `delay`
/// seconds late.
pub fn delayed_channel_mse(rate: f64, delay: f64, cfg: &McConfig) -> Result<RateDistortionPoint> {
    if !(delay.is_finite() && delay >= 0.0) {
        return Err(param(format!("delay must be non-negative, got {delay}")));
    }
    let encoder = soi_setup(rate, cfg)?;
    let h = encoder.step_h();
    let mses = cfg.replications()?.run(|seed| {
        let mut d = Delayed {
            step_h: h,
            delay,
            step: 0,
            pending: VecDeque::new(),
            applied: 0.0,
            sq: 0.0,
        };
        let enc = encoder.encode(&mut seed.generator(), cfg.horizon, &mut d);
        Ok(d.sq / enc.steps as f64)
    })?;
    let s = Summary::from_samples(&mses)?;
    Ok(RateDistortionPoint::from_summary("soi_delay", rate, rate, 1.0, s, cfg.horizon))
}

/// Seed stream of replication `index` under `cfg`, for single-path dumps.
pub fn replication_seed(cfg: &McConfig, index: usize) -> SeedStream {
    SeedStream::replication(cfg.master_seed, index)
}
