//! Uniform sampling with the greedy Lloyd-Max innovation compressor.
//!
//! At every sampling instant the encoder quantizes the innovation
//! `W_τi − Ŵ_τ(i−1)` with a Lloyd-Max quantizer designed for the current
//! prior of that innovation. The prior for the next step is the error pdf of
//! the current quantizer smoothed by the `N(0, interval)` increment.
//!
//! The priors do not depend on the realized path, so the whole quantizer
//! sequence is designed once per configuration ([`QuantizerSchedule`]) and
//! shared by every replication.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, OnceLock};

use crate::codec::{CodewordRecord, ReconstructionTrace, SampleEvent};
use crate::error::{ensure_positive, param, LabError, Result};
use crate::lloyd::{induced_error_pdf, lloyd_max, LloydStatus, Quantizer};
use crate::pdf::{innovation_prior_update, PdfGrid, DEFAULT_BINS, DEFAULT_HALF_WIDTH_SD};
use crate::rng::StreamRng;
use crate::wiener::WienerPath;

/// Lloyd iteration tolerance on the expected squared error.
pub const LLOYD_TOL: f64 = 1e-12;
pub const LLOYD_MAX_ITER: usize = 500;
/// Change between consecutive unit-interval quantizers below which the prior
/// recursion is taken to have reached its fixed point.
const STATIONARY_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformConfig {
    rate: f64,
    bits_per_sample: u32,
}

impl UniformConfig {
    pub fn new(rate: f64, bits_per_sample: u32) -> Result<Self> {
        ensure_positive("rate", rate)?;
        if !(1..=16).contains(&bits_per_sample) {
            return Err(param(format!(
                "bits per sample must be in 1..=16, got {bits_per_sample}"
            )));
        }
        Ok(Self {
            rate,
            bits_per_sample,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn bits_per_sample(&self) -> u32 {
        self.bits_per_sample
    }

    pub fn levels(&self) -> usize {
        1 << self.bits_per_sample
    }

    /// Sampling interval `Rs/R`.
    pub fn interval(&self) -> f64 {
        f64::from(self.bits_per_sample) / self.rate
    }

    /// Sampling frequency `f = R/Rs`.
    pub fn frequency(&self) -> f64 {
        1.0 / self.interval()
    }

    /// Default grid spacing: a thousand steps per sampling interval.
    pub fn default_step_h(&self) -> f64 {
        self.interval() / 1000.0
    }

    /// Grid steps per sampling interval at spacing `step_h`.
    pub fn stride(&self, step_h: f64) -> Result<usize> {
        ensure_positive("step_h", step_h)?;
        let ratio = self.interval() / step_h;
        let stride = ratio.round();
        if stride < 1.0 || (ratio - stride).abs() > 1e-6 * ratio {
            return Err(param(format!(
                "sampling interval {} is not a whole number of steps of {step_h}",
                self.interval()
            )));
        }
        Ok(stride as usize)
    }
}

/// The greedy quantizer for each sampling step.
#[derive(Debug, Clone)]
pub struct QuantizerSchedule {
    config: UniformConfig,
    /// `quantizers[i]` serves step `i + 1`; steps past the end reuse the
    /// last entry, which is the fixed point of the recursion when
    /// `stationary` is set.
    quantizers: Vec<Quantizer>,
    prior_variances: Vec<f64>,
    error_variances: Vec<f64>,
    stationary: bool,
    warnings: usize,
}

impl QuantizerSchedule {
    /// Designs quantizers for steps `1..=steps`.
    pub fn design(config: UniformConfig, steps: usize) -> Result<Self> {
        Self::design_with_bins(config, steps, DEFAULT_BINS)
    }

    /// Designs for an arbitrary bin count. The recursion is run once per
    /// `(bits, bins)` at unit interval and cached; other intervals are exact
    /// rescalings of it (Brownian scaling).
    pub fn design_with_bins(config: UniformConfig, steps: usize, bins: usize) -> Result<Self> {
        let unit = unit_schedule(config.bits_per_sample(), config.levels(), steps.max(1), bins)?;
        let interval = config.interval();
        let c = interval.sqrt();
        let take = unit.quantizers.len().min(steps.max(1));
        let take = if unit.stationary { unit.quantizers.len() } else { take };
        Ok(Self {
            config,
            quantizers: unit.quantizers[..take].iter().map(|q| q.scaled(c)).collect(),
            prior_variances: unit.prior_variances[..take].iter().map(|v| v * interval).collect(),
            error_variances: unit.error_variances[..take].iter().map(|v| v * interval).collect(),
            stationary: unit.stationary,
            warnings: unit.warnings,
        })
    }

    pub fn config(&self) -> &UniformConfig {
        &self.config
    }

    /// Quantizer for sampling step `i ≥ 1`.
    pub fn quantizer(&self, step: usize) -> &Quantizer {
        let idx = step.saturating_sub(1).min(self.quantizers.len() - 1);
        &self.quantizers[idx]
    }

    /// Distinct quantizers designed before the recursion settled.
    pub fn designed(&self) -> &[Quantizer] {
        &self.quantizers
    }

    pub fn is_stationary(&self) -> bool {
        self.stationary
    }

    /// Variance of the prior used at each designed step.
    pub fn prior_variances(&self) -> &[f64] {
        &self.prior_variances
    }

    /// Variance of the induced quantization error at each designed step.
    pub fn error_variances(&self) -> &[f64] {
        &self.error_variances
    }

    /// Lloyd runs that stopped at the iteration cap.
    pub fn warnings(&self) -> usize {
        self.warnings
    }

    /// `step,boundary_list,rep_list,error` rows, lists separated by `;`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,boundary_list,rep_list,error\n");
        for (i, q) in self.quantizers.iter().enumerate() {
            let join = |v: &[f64]| {
                v.iter()
                    .map(|x| crate::output::fmt_sig(*x))
                    .collect::<Vec<_>>()
                    .join(";")
            };
            let _ = writeln!(
                out,
                "{},{},{},{}",
                i + 1,
                join(&q.boundaries),
                join(&q.representatives),
                crate::output::fmt_sig(q.expected_sq_error)
            );
        }
        out
    }
}

/// Schedule for a unit sampling interval.
#[derive(Debug)]
struct UnitSchedule {
    quantizers: Vec<Quantizer>,
    prior_variances: Vec<f64>,
    error_variances: Vec<f64>,
    stationary: bool,
    warnings: usize,
}

type UnitCache = Mutex<HashMap<(u32, usize), Arc<UnitSchedule>>>;

fn unit_schedule(bits: u32, levels: usize, steps: usize, bins: usize) -> Result<Arc<UnitSchedule>> {
    static CACHE: OnceLock<UnitCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(s) = map.get(&(bits, bins)) {
        if s.stationary || s.quantizers.len() >= steps {
            return Ok(Arc::clone(s));
        }
    }
    let fresh = Arc::new(design_unit(levels, steps, bins)?);
    map.insert((bits, bins), Arc::clone(&fresh));
    Ok(fresh)
}

fn design_unit(levels: usize, steps: usize, bins: usize) -> Result<UnitSchedule> {
    let mut prior = PdfGrid::gaussian(0.0, 1.0, bins, DEFAULT_HALF_WIDTH_SD)?;
    let mut quantizers: Vec<Quantizer> = Vec::new();
    let mut prior_variances = Vec::new();
    let mut error_variances = Vec::new();
    let mut stationary = false;
    let mut warnings = 0;
    for _ in 0..steps {
        let outcome = lloyd_max(&prior, levels, LLOYD_TOL, LLOYD_MAX_ITER)?;
        if outcome.status == LloydStatus::MaxIterations {
            warnings += 1;
        }
        let q = outcome.quantizer;
        let error_pdf = induced_error_pdf(&prior, &q)?;
        prior_variances.push(prior.variance());
        error_variances.push(error_pdf.variance());
        let settled = quantizers.last().is_some_and(|last| same_quantizer(last, &q));
        quantizers.push(q);
        if settled {
            stationary = true;
            break;
        }
        prior = innovation_prior_update(&error_pdf, 1.0)?;
    }
    Ok(UnitSchedule {
        quantizers,
        prior_variances,
        error_variances,
        stationary,
        warnings,
    })
}

fn same_quantizer(a: &Quantizer, b: &Quantizer) -> bool {
    let tol = STATIONARY_TOL;
    a.representatives
        .iter()
        .zip(&b.representatives)
        .chain(a.boundaries.iter().zip(&b.boundaries))
        .all(|(x, y)| (x - y).abs() <= tol)
}

/// Output of one greedy Lloyd-Max run over a path.
#[derive(Debug, Clone)]
pub struct UniformEncoding {
    pub events: Vec<SampleEvent>,
    pub codewords: Vec<CodewordRecord>,
    pub trace: ReconstructionTrace,
    /// Decoder level `Ŵ` at each sample.
    pub reconstructions: Vec<f64>,
    /// Time-averaged squared error over the path's rectangle grid.
    pub mse: f64,
    /// `len · h`, the length of the rectangle grid.
    pub horizon: f64,
}

/// Runs the greedy Lloyd-Max pipeline over `path` with a designed schedule.
pub fn greedy_lloyd_encode_with(
    path: &WienerPath,
    schedule: &QuantizerSchedule,
) -> Result<UniformEncoding> {
    let config = schedule.config();
    let h = path.step_h;
    let stride = config.stride(h)?;
    let n = path.len();
    if n <= stride {
        return Err(LabError::Parameter(format!(
            "path of {n} points is shorter than one sampling interval ({stride} steps)"
        )));
    }
    let bits = config.bits_per_sample();
    let mut events = Vec::new();
    let mut codewords = Vec::new();
    let mut reconstructions = Vec::new();
    let mut trace = ReconstructionTrace::new();
    let mut level = 0.0_f64;
    let mut sq = 0.0_f64;
    for (k, &w) in path.values.iter().enumerate() {
        if k > 0 && k % stride == 0 {
            let i = k / stride;
            let q = schedule.quantizer(i);
            let innovation = w - level;
            let cell = q.index(innovation);
            level += q.representatives[cell];
            let time = k as f64 * h;
            events.push(SampleEvent {
                step: k,
                time,
                value: w,
            });
            codewords.push(CodewordRecord {
                time,
                bits: cell as u32,
                length: bits,
            });
            reconstructions.push(level);
            trace.push(time, level)?;
        }
        let e = w - level;
        sq += e * e;
    }
    let horizon = n as f64 * h;
    Ok(UniformEncoding {
        events,
        codewords,
        trace,
        reconstructions,
        mse: sq * h / horizon,
        horizon,
    })
}

/// Designs the schedule for `path` and encodes it.
pub fn greedy_lloyd_encode(
    path: &WienerPath,
    config: UniformConfig,
) -> Result<(UniformEncoding, QuantizerSchedule)> {
    let stride = config.stride(path.step_h)?;
    let steps = path.len().saturating_sub(1) / stride;
    let schedule = QuantizerSchedule::design(config, steps)?;
    let enc = greedy_lloyd_encode_with(path, &schedule)?;
    Ok((enc, schedule))
}

/// Sees the uniform encoder's grid as it is produced.
///
/// `on_sample` fires at a sampling index after the decoder level has been
/// updated and before `on_step` for the same index.
pub trait UniformObserver {
    fn on_step(&mut self, value: f64, level: f64);
    fn on_sample(&mut self, _event: &SampleEvent, _level: f64) {}
}

impl UniformObserver for () {
    #[inline]
    fn on_step(&mut self, _: f64, _: f64) {}
}

/// Summary of a streamed run over grid indices `0..steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformRun {
    pub codewords: Vec<CodewordRecord>,
    pub steps: usize,
    pub step_h: f64,
    /// Rectangle-rule time average of `(W − Ŵ)²`.
    pub mse: f64,
}

/// Greedy Lloyd-Max encoder that draws the source on the fly.
#[derive(Debug, Clone, Copy)]
pub struct UniformEncoder<'a> {
    schedule: &'a QuantizerSchedule,
    step_h: f64,
    stride: usize,
}

impl<'a> UniformEncoder<'a> {
    pub fn new(schedule: &'a QuantizerSchedule, step_h: f64) -> Result<Self> {
        let stride = schedule.config().stride(step_h)?;
        Ok(Self {
            schedule,
            step_h,
            stride,
        })
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Runs grid indices `0..steps`, drawing increments from `rng` in the
    /// same order as [`crate::wiener::generate_path`].
    pub fn encode<O: UniformObserver>(
        &self,
        rng: &mut StreamRng,
        steps: usize,
        observer: &mut O,
    ) -> UniformRun {
        let h = self.step_h;
        let sd = h.sqrt();
        let bits = self.schedule.config().bits_per_sample();
        let mut codewords = Vec::with_capacity(steps / self.stride);
        let mut w = 0.0_f64;
        let mut level = 0.0_f64;
        let mut sq = 0.0_f64;
        let mut next_sample = self.stride;
        for k in 0..steps {
            if k > 0 {
                w += sd * rng.normal();
            }
            if k == next_sample {
                next_sample += self.stride;
                let q = self.schedule.quantizer(k / self.stride);
                let cell = q.index(w - level);
                level += q.representatives[cell];
                let time = k as f64 * h;
                codewords.push(CodewordRecord {
                    time,
                    bits: cell as u32,
                    length: bits,
                });
                observer.on_sample(&SampleEvent { step: k, time, value: w }, level);
            }
            observer.on_step(w, level);
            let e = w - level;
            sq += e * e;
        }
        UniformRun {
            codewords,
            steps,
            step_h: h,
            mse: if steps > 0 { sq / steps as f64 } else { 0.0 },
        }
    }
}
