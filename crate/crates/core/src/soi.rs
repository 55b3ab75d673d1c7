//! Sign-of-innovation coding: symmetric threshold sampling at `±sqrt(1/R)`,
//! a 1-bit compressor sending the sign of each innovation, and a decoder
//! that accumulates the received `±β` steps.

use crate::codec::{check_monotone, CodewordRecord, ReconstructionTrace, SampleEvent};
use crate::error::{ensure_positive, LabError, Result};
use crate::rng::{SeedStream, StreamRng};
use crate::wiener::{grid_steps, ExitScanner, ScanEnd, WienerPath};

/// Rate `R` in bits per second and the threshold it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoiConfig {
    rate: f64,
    threshold: f64,
}

impl SoiConfig {
    pub fn new(rate: f64) -> Result<Self> {
        ensure_positive("rate", rate)?;
        Ok(Self {
            rate,
            threshold: (1.0 / rate).sqrt(),
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `β = sqrt(1/R)`.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Default grid spacing `min(1e-3, β²/1000)`.
    pub fn default_step_h(&self) -> f64 {
        (self.threshold * self.threshold / 1000.0).min(1e-3)
    }
}

/// The 1-bit compressor: `1` iff the innovation is non-negative.
#[inline]
pub fn sign_bit(innovation: f64) -> bool {
    innovation >= 0.0
}

/// Sees the encoder's grid as it is produced.
///
/// `on_step` is called once per grid index `0..n` with the decoder level
/// `Ŵ` (`anchor`) and the error `W − Ŵ` (`offset`); `on_sample` fires when a
/// codeword is generated, before the steps of the following segment.
pub trait SoiObserver {
    fn on_step(&mut self, anchor: f64, offset: f64);
    fn on_sample(&mut self, _event: &SampleEvent, _sign: i8) {}
}

impl SoiObserver for () {
    #[inline]
    fn on_step(&mut self, _: f64, _: f64) {}
}

/// Output of one encoding run.
#[derive(Debug, Clone, PartialEq)]
pub struct SoiEncoding {
    pub events: Vec<SampleEvent>,
    pub codewords: Vec<CodewordRecord>,
    /// Grid steps simulated; the run covers `[0, steps·h)`.
    pub steps: usize,
    pub step_h: f64,
}

impl SoiEncoding {
    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.step_h
    }
}

/// Threshold sampler + SOI compressor over streamed Wiener segments.
#[derive(Debug, Clone, Copy)]
pub struct SoiEncoder {
    config: SoiConfig,
    scanner: ExitScanner,
}

impl SoiEncoder {
    pub fn new(config: SoiConfig, step_h: f64, bridge: bool) -> Result<Self> {
        Ok(Self {
            config,
            scanner: ExitScanner::new(config.threshold(), step_h, bridge)?,
        })
    }

    pub fn config(&self) -> &SoiConfig {
        &self.config
    }

    pub fn step_h(&self) -> f64 {
        self.scanner.step_h()
    }

    /// Encodes `[0, horizon)`. Segments are drawn from `rng` one after
    /// another; the final partial interval produces no codeword.
    pub fn encode<O: SoiObserver>(
        &self,
        rng: &mut StreamRng,
        horizon: f64,
        observer: &mut O,
    ) -> SoiEncoding {
        let h = self.scanner.step_h();
        let beta = self.config.threshold();
        let n = if horizon > 0.0 { grid_steps(horizon, h) } else { 0 };
        let mut events = Vec::new();
        let mut codewords = Vec::new();
        let mut idx = 0usize;
        let mut anchor = 0.0_f64;
        while idx < n {
            let level = anchor;
            let end = self
                .scanner
                .scan(rng, n - idx, |x| observer.on_step(level, x));
            match end {
                ScanEnd::Exit { steps, sign, .. } => {
                    idx += steps;
                    anchor += f64::from(sign) * beta;
                    let time = idx as f64 * h;
                    let event = SampleEvent {
                        step: idx,
                        time,
                        value: anchor,
                    };
                    observer.on_sample(&event, sign);
                    events.push(event);
                    codewords.push(CodewordRecord::one_bit(time, sign_bit(f64::from(sign))));
                }
                ScanEnd::Truncated { .. } => break,
            }
        }
        SoiEncoding {
            events,
            codewords,
            steps: n,
            step_h: h,
        }
    }
}

/// Encodes a fresh Wiener source drawn from `seed` over `[0, horizon)`.
pub fn soi_encode(
    seed: SeedStream,
    config: SoiConfig,
    horizon: f64,
    step_h: f64,
    bridge: bool,
) -> Result<SoiEncoding> {
    if horizon < 0.0 || horizon.is_nan() {
        return Err(LabError::Parameter(format!("horizon must be non-negative, got {horizon}")));
    }
    let encoder = SoiEncoder::new(config, step_h, bridge)?;
    Ok(encoder.encode(&mut seed.generator(), horizon, &mut ()))
}

/// Records the effective source path (segment-restart convention) seen by
/// the encoder.
#[derive(Debug, Default)]
pub struct PathRecorder {
    values: Vec<f64>,
}

impl PathRecorder {
    pub fn into_path(self, step_h: f64, seed: SeedStream) -> Result<WienerPath> {
        WienerPath::from_values(step_h, self.values, seed)
    }
}

impl SoiObserver for PathRecorder {
    #[inline]
    fn on_step(&mut self, anchor: f64, offset: f64) {
        self.values.push(anchor + offset);
    }
}

/// Encodes and also returns the path the encoder saw.
pub fn soi_encode_recorded(
    seed: SeedStream,
    config: SoiConfig,
    horizon: f64,
    step_h: f64,
    bridge: bool,
) -> Result<(SoiEncoding, WienerPath)> {
    let encoder = SoiEncoder::new(config, step_h, bridge)?;
    let mut rec = PathRecorder::default();
    let enc = encoder.encode(&mut seed.generator(), horizon, &mut rec);
    let path = rec.into_path(step_h, seed)?;
    Ok((enc, path))
}

/// Accumulates the received `±β` innovations into `Ŵ`.
pub fn soi_decode(codewords: &[CodewordRecord], threshold: f64) -> Result<ReconstructionTrace> {
    ensure_positive("threshold", threshold)?;
    check_monotone(codewords)?;
    let mut trace = ReconstructionTrace::new();
    let mut level = 0.0;
    for c in codewords {
        if c.length != 1 {
            return Err(LabError::Input(format!(
                "SOI codewords are 1 bit, got length {}",
                c.length
            )));
        }
        level += if c.bits & 1 == 1 { threshold } else { -threshold };
        trace.push(c.time, level)?;
    }
    Ok(trace)
}

/// Long-run MSE of the SOI code, `1/(6R)`.
pub fn soi_analytic_distortion(rate: f64) -> Result<f64> {
    ensure_positive("rate", rate)?;
    Ok(1.0 / (6.0 * rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_matches_rate() {
        for r in [0.1, 0.5, 1.0, 3.0, 17.0] {
            let c = SoiConfig::new(r).unwrap();
            assert!((c.threshold().powi(2) * r - 1.0).abs() < 1e-12);
        }
        assert!(SoiConfig::new(0.0).is_err());
        assert!((SoiConfig::new(1.0).unwrap().default_step_h() - 1e-3).abs() < 1e-15);
        assert!((SoiConfig::new(5.0).unwrap().default_step_h() - 2e-4).abs() < 1e-15);
    }

    #[test]
    fn innovation_bits() {
        let beta = 0.7;
        let bits: Vec<bool> = [beta, -beta, beta].iter().map(|&i| sign_bit(i)).collect();
        assert_eq!(bits, vec![true, false, true]);
    }

    #[test]
    fn decode_two_codewords() {
        let cws = [
            CodewordRecord::one_bit(0.5, true),
            CodewordRecord::one_bit(1.4, false),
        ];
        let tr = soi_decode(&cws, 1.0).unwrap();
        assert_eq!(tr.level_at(0.2), 0.0);
        assert_eq!(tr.level_at(0.5), 1.0);
        assert_eq!(tr.level_at(1.0), 1.0);
        assert_eq!(tr.level_at(1.4), 0.0);
        assert_eq!(tr.level_at(50.0), 0.0);
    }

    #[test]
    fn decode_empty_and_errors() {
        let tr = soi_decode(&[], 1.0).unwrap();
        assert_eq!(tr.breakpoints(), &[(0.0, 0.0)]);
        assert_eq!(tr.level_at(3.0), 0.0);
        let backwards = [
            CodewordRecord::one_bit(2.0, true),
            CodewordRecord::one_bit(1.0, true),
        ];
        assert!(matches!(soi_decode(&backwards, 1.0), Err(LabError::Input(_))));
        let long = [CodewordRecord {
            time: 1.0,
            bits: 2,
            length: 2,
        }];
        assert!(soi_decode(&long, 1.0).is_err());
    }

    #[test]
    fn zero_horizon_is_empty() {
        let c = SoiConfig::new(1.0).unwrap();
        let enc = soi_encode(SeedStream::new(1, 0), c, 0.0, 1e-3, false).unwrap();
        assert!(enc.codewords.is_empty());
        assert_eq!(enc.steps, 0);
    }

    #[test]
    fn analytic_values() {
        assert!((soi_analytic_distortion(1.0).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((soi_analytic_distortion(2.0).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        let d = soi_analytic_distortion(0.8).unwrap();
        assert!((soi_analytic_distortion(2.4).unwrap() - d / 3.0).abs() < 1e-15);
        assert!(soi_analytic_distortion(-1.0).is_err());
    }

    #[test]
    fn round_trip_is_exact_at_sample_times() {
        let c = SoiConfig::new(2.0).unwrap();
        let (enc, path) = soi_encode_recorded(SeedStream::new(3, 1), c, 200.0, 5e-4, false).unwrap();
        assert!(enc.codewords.len() > 100);
        assert_eq!(path.len(), enc.steps);
        let trace = soi_decode(&enc.codewords, c.threshold()).unwrap();
        for ev in &enc.events {
            assert_eq!(trace.level_at(ev.time), path.values[ev.step]);
            assert_eq!(ev.value, path.values[ev.step]);
        }
        // samples form a ±β walk
        let mut prev = 0.0;
        for ev in &enc.events {
            assert!(((ev.value - prev).abs() - c.threshold()).abs() < 1e-12);
            prev = ev.value;
        }
    }

    #[test]
    fn error_stays_inside_band() {
        let c = SoiConfig::new(1.0).unwrap();
        struct MaxErr(f64);
        impl SoiObserver for MaxErr {
            fn on_step(&mut self, _: f64, offset: f64) {
                self.0 = self.0.max(offset.abs());
            }
        }
        let enc = SoiEncoder::new(c, 1e-3, true).unwrap();
        let mut m = MaxErr(0.0);
        enc.encode(&mut SeedStream::new(8, 8).generator(), 500.0, &mut m);
        assert!(m.0 < 1.0);
    }
}
