//! Discretized standard Wiener paths and symmetric threshold exits.
//!
//! Paths live on a uniform grid of spacing `step_h`. Threshold sampling uses
//! the segment-restart convention: each segment starts at zero, runs until
//! the first grid point whose magnitude reaches the threshold, and the exit
//! value is snapped to `±threshold` before the next segment begins.

use crate::error::{ensure_positive, param, Result};
use crate::rng::{SeedStream, StreamRng};

/// A sampled path `W_0 = 0, W_h, W_2h, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    pub step_h: f64,
    pub values: Vec<f64>,
    pub seed: SeedStream,
}

impl WienerPath {
    /// Wraps externally built values, checking the path invariants.
    pub fn from_values(step_h: f64, values: Vec<f64>, seed: SeedStream) -> Result<Self> {
        ensure_positive("step_h", step_h)?;
        match values.first() {
            None => Err(param("a path needs at least one value")),
            Some(&v) if v != 0.0 => Err(param(format!("path must start at 0, got {v}"))),
            Some(_) => Ok(Self {
                step_h,
                values,
                seed,
            }),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time of the last grid point.
    pub fn horizon(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step_h
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }

    /// Brownian rescaling `c·W_{t/c²}`: the values are multiplied by `c`
    /// and the grid spacing by `c²`.
    pub fn rescaled(&self, c: f64) -> Self {
        Self {
            step_h: self.step_h * c * c,
            values: self.values.iter().map(|v| v * c).collect(),
            seed: self.seed,
        }
    }
}

/// Number of grid steps covering `horizon` at spacing `step_h`.
pub fn grid_steps(horizon: f64, step_h: f64) -> usize {
    // The small relative slack keeps 1.0 / 0.001 from landing on 999.
    (horizon / step_h * (1.0 + 1e-12)).floor() as usize
}

/// Generates `⌊horizon/step_h⌋ + 1` grid values of a standard Wiener path.
pub fn generate_path(horizon: f64, step_h: f64, seed: SeedStream) -> Result<WienerPath> {
    ensure_positive("horizon", horizon)?;
    ensure_positive("step_h", step_h)?;
    if step_h > horizon {
        return Err(param(format!(
            "step_h {step_h} exceeds horizon {horizon}"
        )));
    }
    let n = grid_steps(horizon, step_h);
    let mut rng = seed.generator();
    let sd = step_h.sqrt();
    let mut values = Vec::with_capacity(n + 1);
    let mut w = 0.0;
    values.push(w);
    for _ in 0..n {
        w += sd * rng.normal();
        values.push(w);
    }
    Ok(WienerPath {
        step_h,
        values,
        seed,
    })
}

/// First grid crossing of a symmetric threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitEvent {
    /// Grid index, relative to the segment start, of the first crossing.
    pub exit_step: usize,
    /// `+1` for the upper barrier, `-1` for the lower one.
    pub sign: i8,
    /// Seconds from the segment start.
    pub elapsed: f64,
    /// Unsnapped grid value at `exit_step`.
    pub raw_value: f64,
}

impl ExitEvent {
    /// Exit value under the segment-restart convention.
    pub fn snapped_value(&self, threshold: f64) -> f64 {
        f64::from(self.sign) * threshold
    }
}

/// Result of running a segment with a step budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentOutcome {
    Exited(ExitEvent),
    /// The budget ran out with every visited point strictly inside.
    Truncated { steps: usize },
}

/// Scans an existing sequence (starting at the segment origin) for the
/// first index whose distance from `values[0]` reaches `threshold`.
pub fn first_exit(values: &[f64], threshold: f64, step_h: f64) -> Option<ExitEvent> {
    let origin = *values.first()?;
    values.iter().enumerate().skip(1).find_map(|(k, &v)| {
        let d = v - origin;
        (d.abs() >= threshold).then(|| ExitEvent {
            exit_step: k,
            sign: if d >= 0.0 { 1 } else { -1 },
            elapsed: k as f64 * step_h,
            raw_value: d,
        })
    })
}

/// Grid scanner for symmetric threshold exits of fresh Wiener segments.
///
/// With `bridge` set, a step that stays inside the band is still declared
/// an exit with the Brownian-bridge probability `exp(-2ab/h)` of having
/// touched a barrier in between, where `a` and `b` are the distances of the
/// two endpoints to that barrier.
#[derive(Debug, Clone, Copy)]
pub struct ExitScanner {
    threshold: f64,
    step_h: f64,
    sd: f64,
    bridge: bool,
}

/// How a scanned segment ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum ScanEnd {
    Exit { steps: usize, sign: i8, raw: f64 },
    Truncated { steps: usize },
}

impl ExitScanner {
    pub fn new(threshold: f64, step_h: f64, bridge: bool) -> Result<Self> {
        ensure_positive("threshold", threshold)?;
        ensure_positive("step_h", step_h)?;
        if step_h >= threshold * threshold {
            return Err(param(format!(
                "step_h {step_h} must be much smaller than threshold² {}",
                threshold * threshold
            )));
        }
        Ok(Self {
            threshold,
            step_h,
            sd: step_h.sqrt(),
            bridge,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn step_h(&self) -> f64 {
        self.step_h
    }

    pub fn bridge(&self) -> bool {
        self.bridge
    }

    /// Runs one segment from zero. `visit` receives every grid value that is
    /// strictly inside the band, starting with the initial zero, so it is
    /// called exactly `steps` times for an exit at `steps` and `budget`
    /// times on truncation.
    #[inline]
    pub(crate) fn scan(
        &self,
        rng: &mut StreamRng,
        budget: usize,
        mut visit: impl FnMut(f64),
    ) -> ScanEnd {
        if budget == 0 {
            return ScanEnd::Truncated { steps: 0 };
        }
        let beta = self.threshold;
        let mut x = 0.0_f64;
        visit(x);
        for k in 1..budget {
            let next = x + self.sd * rng.normal();
            if next.abs() >= beta {
                return ScanEnd::Exit {
                    steps: k,
                    sign: if next >= 0.0 { 1 } else { -1 },
                    raw: next,
                };
            }
            if self.bridge {
                if let Some(sign) = self.bridge_crossing(x, next, rng) {
                    return ScanEnd::Exit {
                        steps: k,
                        sign,
                        raw: next,
                    };
                }
            }
            x = next;
            visit(x);
        }
        ScanEnd::Truncated { steps: budget }
    }

    #[inline]
    fn bridge_crossing(&self, from: f64, to: f64, rng: &mut StreamRng) -> Option<i8> {
        // exp(-40) is far below any resolvable probability
        const CUTOFF: f64 = 40.0;
        let beta = self.threshold;
        let up = 2.0 * (beta - from) * (beta - to) / self.step_h;
        let down = 2.0 * (beta + from) * (beta + to) / self.step_h;
        if up > CUTOFF && down > CUTOFF {
            return None;
        }
        let p_up = if up > CUTOFF { 0.0 } else { (-up).exp() };
        let p_down = if down > CUTOFF { 0.0 } else { (-down).exp() };
        let u = rng.uniform();
        if u < p_up {
            Some(1)
        } else if u < p_up + p_down {
            Some(-1)
        } else {
            None
        }
    }
}

/// Simulates a fresh segment until it leaves `(-threshold, threshold)` or
/// `max_steps` grid steps elapse. Returns the outcome together with the
/// segment values, the raw exit value included as the last element.
pub fn segment_until_exit(
    threshold: f64,
    step_h: f64,
    max_steps: usize,
    seed: SeedStream,
) -> Result<(SegmentOutcome, Vec<f64>)> {
    let scanner = ExitScanner::new(threshold, step_h, false)?;
    let mut rng = seed.generator();
    let mut values = Vec::new();
    // budget counts visited points; the exit point is at most max_steps
    let end = scanner.scan(&mut rng, max_steps + 1, |v| values.push(v));
    let outcome = match end {
        ScanEnd::Exit { steps, sign, raw } => {
            values.push(raw);
            SegmentOutcome::Exited(ExitEvent {
                exit_step: steps,
                sign,
                elapsed: steps as f64 * step_h,
                raw_value: raw,
            })
        }
        ScanEnd::Truncated { steps } => SegmentOutcome::Truncated {
            steps: steps.saturating_sub(1),
        },
    };
    Ok((outcome, values))
}
