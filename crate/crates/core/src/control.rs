//! Rate-constrained impulse control of `dX = Z dt + dW`.
//!
//! The sampler watches `X` and sends a codeword over the rate-limited link;
//! on arrival the controller applies an impulse `Z` that jumps the state.
//! The cost is the time-averaged `X²`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::codec::SampleEvent;
use crate::error::{ensure_positive, param, Result};
use crate::output::fmt_sig;
use crate::rng::{SeedStream, StreamRng};
use crate::soi::{SoiConfig, SoiEncoder, SoiObserver};
use crate::stats::{Replications, Summary};
use crate::uniform::{QuantizerSchedule, UniformConfig};
use crate::wiener::grid_steps;

/// Grid states and impulses of one controlled run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ControlTrace {
    pub step_h: f64,
    /// `X` at grid index `k` (post-impulse at impulse indices).
    pub states: Vec<f64>,
    pub impulse_times: Vec<f64>,
    /// `Z` applied at each impulse.
    pub impulses: Vec<f64>,
    /// `X` just before each impulse.
    pub pre_impulse: Vec<f64>,
    /// `X` just after each impulse.
    pub post_impulse: Vec<f64>,
}

impl ControlTrace {
    fn record_impulse(&mut self, time: f64, before: f64, z: f64, after: f64) {
        self.impulse_times.push(time);
        self.pre_impulse.push(before);
        self.impulses.push(z);
        self.post_impulse.push(after);
    }
}

/// Controller settings shared by both loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlConfig {
    pub horizon: f64,
    pub reps: usize,
    pub master_seed: u64,
    pub step_h: Option<f64>,
    pub jobs: usize,
    pub bridge: bool,
}

impl ControlConfig {
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

    fn validate(&self) -> Result<Replications> {
        ensure_positive("horizon", self.horizon)?;
        if let Some(h) = self.step_h {
            ensure_positive("step_h", h)?;
        }
        Replications::new(self.master_seed, self.reps, self.jobs)
    }
}

/// Averages over replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlOutcome {
    pub controller: String,
    pub rate: f64,
    pub cost: Summary,
    /// Impulses per second.
    pub impulse_rate: Summary,
    /// Time average of the post-impulse `X²`, i.e. what the impulse could
    /// not cancel, per impulse.
    pub residual: Summary,
    /// Largest `|X_τ+|` seen in any replication.
    pub max_post_impulse: f64,
}

pub const CONTROL_CSV_HEADER: &str = "controller,R,cost,ci";

pub fn controls_to_csv(outcomes: &[ControlOutcome]) -> String {
    let mut out = format!("{CONTROL_CSV_HEADER}\n");
    for o in outcomes {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            o.controller,
            fmt_sig(o.rate),
            fmt_sig(o.cost.mean),
            fmt_sig(o.cost.ci_halfwidth())
        );
    }
    out
}

struct RunTotals {
    cost: f64,
    impulses: usize,
    residual_sq: f64,
    max_post: f64,
    horizon: f64,
}

fn summarize(controller: &str, rate: f64, runs: &[RunTotals]) -> Result<ControlOutcome> {
    let col = |f: &dyn Fn(&RunTotals) -> f64| -> Vec<f64> { runs.iter().map(f).collect() };
    Ok(ControlOutcome {
        controller: controller.to_string(),
        rate,
        cost: Summary::from_samples(&col(&|r| r.cost))?,
        impulse_rate: Summary::from_samples(&col(&|r| r.impulses as f64 / r.horizon))?,
        residual: Summary::from_samples(&col(&|r| {
            if r.impulses == 0 {
                0.0
            } else {
                r.residual_sq / r.impulses as f64
            }
        }))?,
        max_post_impulse: runs.iter().map(|r| r.max_post).fold(0.0, f64::max),
    })
}

/// Plant driven by the SOI loop. Between impulses the plant moves with the
/// Wiener increments, so `X` is the sampler's in-band offset plus the last
/// post-impulse state.
struct SoiPlant<'a> {
    beta: f64,
    post: f64,
    x: f64,
    sq: f64,
    impulses: usize,
    residual_sq: f64,
    max_post: f64,
    trace: Option<&'a mut ControlTrace>,
}

impl SoiObserver for SoiPlant<'_> {
    #[inline]
    fn on_step(&mut self, _: f64, offset: f64) {
        self.x = self.post + offset;
        self.sq += self.x * self.x;
        if let Some(t) = self.trace.as_deref_mut() {
            t.states.push(self.x);
        }
    }

    fn on_sample(&mut self, event: &SampleEvent, sign: i8) {
        // the sampled state sits on the threshold; the decoded innovation
        // is the same ±β, and Z cancels it
        let innovation = f64::from(sign) * self.beta;
        let before = self.post + innovation;
        let z = -innovation;
        let after = before + z;
        self.post = after;
        self.impulses += 1;
        self.residual_sq += after * after;
        self.max_post = self.max_post.max(after.abs());
        if let Some(t) = self.trace.as_deref_mut() {
            t.record_impulse(event.time, before, z, after);
        }
    }
}

fn soi_run(encoder: &SoiEncoder, horizon: f64, rng: &mut StreamRng, trace: Option<&mut ControlTrace>) -> RunTotals {
    let mut plant = SoiPlant {
        beta: encoder.config().threshold(),
        post: 0.0,
        x: 0.0,
        sq: 0.0,
        impulses: 0,
        residual_sq: 0.0,
        max_post: 0.0,
        trace,
    };
    let enc = encoder.encode(rng, horizon, &mut plant);
    RunTotals {
        cost: if enc.steps > 0 { plant.sq / enc.steps as f64 } else { 0.0 },
        impulses: plant.impulses,
        residual_sq: plant.residual_sq,
        max_post: plant.max_post,
        horizon: enc.horizon(),
    }
}

fn soi_encoder(rate: f64, cfg: &ControlConfig) -> Result<SoiEncoder> {
    let config = SoiConfig::new(rate)?;
    let h = cfg.step_h.unwrap_or_else(|| config.default_step_h());
    SoiEncoder::new(config, h, cfg.bridge)
}

/// Event-triggered loop: an SOI bit at each threshold crossing of `X`,
/// impulse `Z = −(received innovation)`.
pub fn simulate_soi_control(rate: f64, cfg: &ControlConfig) -> Result<ControlOutcome> {
    let reps = cfg.validate()?;
    let encoder = soi_encoder(rate, cfg)?;
    let runs = reps.run(|seed| Ok(soi_run(&encoder, cfg.horizon, &mut seed.generator(), None)))?;
    summarize("soi", rate, &runs)
}

/// One recorded SOI-controlled run.
pub fn soi_control_trace(rate: f64, horizon: f64, step_h: f64, seed: SeedStream) -> Result<ControlTrace> {
    ensure_positive("horizon", horizon)?;
    let encoder = SoiEncoder::new(SoiConfig::new(rate)?, step_h, true)?;
    let mut trace = ControlTrace {
        step_h,
        ..Default::default()
    };
    soi_run(&encoder, horizon, &mut seed.generator(), Some(&mut trace));
    Ok(trace)
}

fn uniform_run(
    schedule: &QuantizerSchedule,
    stride: usize,
    step_h: f64,
    steps: usize,
    rng: &mut StreamRng,
    mut trace: Option<&mut ControlTrace>,
) -> RunTotals {
    let sd = step_h.sqrt();
    let mut x = 0.0_f64;
    let mut sq = 0.0;
    let mut impulses = 0;
    let mut residual_sq = 0.0;
    let mut max_post = 0.0_f64;
    for k in 0..steps {
        if k > 0 {
            x += sd * rng.normal();
        }
        if k > 0 && k % stride == 0 {
            let q = schedule.quantizer(k / stride);
            let z = -q.representatives[q.index(x)];
            let before = x;
            x += z;
            impulses += 1;
            residual_sq += x * x;
            max_post = max_post.max(x.abs());
            if let Some(t) = trace.as_deref_mut() {
                t.record_impulse(k as f64 * step_h, before, z, x);
            }
        }
        sq += x * x;
        if let Some(t) = trace.as_deref_mut() {
            t.states.push(x);
        }
    }
    RunTotals {
        cost: if steps > 0 { sq / steps as f64 } else { 0.0 },
        impulses,
        residual_sq,
        max_post,
        horizon: steps as f64 * step_h,
    }
}

fn uniform_setup(rate: f64, cfg: &ControlConfig) -> Result<(QuantizerSchedule, usize, f64, usize)> {
    let config = UniformConfig::new(rate, 1)?;
    let h = cfg.step_h.unwrap_or_else(|| config.default_step_h());
    let stride = config.stride(h)?;
    let steps = grid_steps(cfg.horizon, h);
    if steps == 0 {
        return Err(param(format!("horizon {} is shorter than one grid step", cfg.horizon)));
    }
    let schedule = QuantizerSchedule::design(config, steps / stride)?;
    Ok((schedule, stride, h, steps))
}

/// Periodic loop: every `1/R` seconds the 1-bit greedy Lloyd-Max index of
/// `X` is sent and the controller applies minus its representative.
pub fn simulate_uniform_control(rate: f64, cfg: &ControlConfig) -> Result<ControlOutcome> {
    let reps = cfg.validate()?;
    let (schedule, stride, h, steps) = uniform_setup(rate, cfg)?;
    let runs = reps.run(|seed| Ok(uniform_run(&schedule, stride, h, steps, &mut seed.generator(), None)))?;
    summarize("uniform_lloyd", rate, &runs)
}

/// One recorded uniformly sampled controlled run.
pub fn uniform_control_trace(rate: f64, horizon: f64, step_h: f64, seed: SeedStream) -> Result<ControlTrace> {
    let cfg = ControlConfig::new(horizon, 2, seed.master_seed).with_step_h(step_h);
    ensure_positive("horizon", horizon)?;
    let (schedule, stride, h, steps) = uniform_setup(rate, &cfg)?;
    let mut trace = ControlTrace {
        step_h: h,
        ..Default::default()
    };
    uniform_run(&schedule, stride, h, steps, &mut seed.generator(), Some(&mut trace));
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soi_impulses_reset_the_state() {
        let tr = soi_control_trace(1.0, 50.0, 1e-3, SeedStream::new(1, 0)).unwrap();
        assert!(!tr.impulses.is_empty());
        for ((&b, &z), &a) in tr.pre_impulse.iter().zip(&tr.impulses).zip(&tr.post_impulse) {
            assert_eq!(a, 0.0);
            assert_eq!(b + z, a);
            assert_eq!(b.abs(), 1.0);
        }
        assert!(tr.states.iter().all(|x| x.abs() < 1.0));
    }

    #[test]
    fn uniform_state_jumps_by_the_impulse() {
        let tr = uniform_control_trace(1.0, 20.0, 1e-3, SeedStream::new(2, 0)).unwrap();
        assert_eq!(tr.impulses.len(), 19);
        for ((&b, &z), &a) in tr.pre_impulse.iter().zip(&tr.impulses).zip(&tr.post_impulse) {
            assert_eq!(b + z, a);
            assert!(z != 0.0);
        }
        for (i, &t) in tr.impulse_times.iter().enumerate() {
            let k = (t / tr.step_h).round() as usize;
            assert_eq!(tr.states[k], tr.post_impulse[i]);
        }
    }

    #[test]
    fn csv_format() {
        let s = Summary {
            mean: 0.25,
            std_err: 0.0,
            reps: 2,
        };
        let o = ControlOutcome {
            controller: "soi".into(),
            rate: 1.5,
            cost: s,
            impulse_rate: s,
            residual: s,
            max_post_impulse: 0.0,
        };
        assert_eq!(controls_to_csv(&[o]), "controller,R,cost,ci\nsoi,1.5,0.25,0\n");
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(simulate_soi_control(1.0, &ControlConfig::new(-1.0, 4, 0)).is_err());
        assert!(simulate_uniform_control(1.0, &ControlConfig::new(10.0, 1, 0)).is_err());
    }
}
