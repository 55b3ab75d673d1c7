//! Types shared by the causal codecs: sample events, binary codewords and
//! the decoder's piecewise-constant reconstruction.

use std::fmt::Write as _;

use crate::error::{LabError, Result};

/// A codeword-generating sample: grid index, time and sampled value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleEvent {
    pub step: usize,
    pub time: f64,
    pub value: f64,
}

/// A binary codeword emitted at `time`. `bits` holds the codeword
/// most-significant bit first in its low `length` bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodewordRecord {
    pub time: f64,
    pub bits: u32,
    pub length: u32,
}

impl CodewordRecord {
    pub fn one_bit(time: f64, bit: bool) -> Self {
        Self {
            time,
            bits: u32::from(bit),
            length: 1,
        }
    }

    /// Codeword as a `0`/`1` string.
    pub fn bit_string(&self) -> String {
        (0..self.length)
            .rev()
            .map(|k| if (self.bits >> k) & 1 == 1 { '1' } else { '0' })
            .collect()
    }
}

/// Total number of bits in a codeword stream.
pub fn total_bits(codewords: &[CodewordRecord]) -> u64 {
    codewords.iter().map(|c| u64::from(c.length)).sum()
}

pub(crate) fn check_monotone(codewords: &[CodewordRecord]) -> Result<()> {
    for pair in codewords.windows(2) {
        if pair[1].time < pair[0].time {
            return Err(LabError::Input(format!(
                "codeword times must be non-decreasing: {} after {}",
                pair[1].time, pair[0].time
            )));
        }
    }
    Ok(())
}

/// Serializes a stream as `time,bit` CSV, times with 9 decimals.
pub fn codewords_to_csv(codewords: &[CodewordRecord]) -> String {
    let mut out = String::from("time,bit\n");
    for c in codewords {
        let _ = writeln!(out, "{:.9},{}", c.time, c.bit_string());
    }
    out
}

/// Parses the output of [`codewords_to_csv`].
pub fn codewords_from_csv(text: &str) -> Result<Vec<CodewordRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("time,bit") => {}
        other => {
            return Err(LabError::Input(format!(
                "expected header `time,bit`, found {other:?}"
            )))
        }
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let (time, bits) = line
                .split_once(',')
                .ok_or_else(|| LabError::Input(format!("malformed codeword line {line:?}")))?;
            let time: f64 = time
                .parse()
                .map_err(|_| LabError::Input(format!("bad time in {line:?}")))?;
            if bits.is_empty() || bits.len() > 32 || !bits.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(LabError::Input(format!("bad bit string in {line:?}")));
            }
            let value = u32::from_str_radix(bits, 2).expect("validated binary digits");
            Ok(CodewordRecord {
                time,
                bits: value,
                length: bits.len() as u32,
            })
        })
        .collect()
}

/// The decoder's estimate `Ŵ_t`: piecewise constant, right-continuous,
/// starting with the breakpoint `(0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionTrace {
    breakpoints: Vec<(f64, f64)>,
}

impl Default for ReconstructionTrace {
    fn default() -> Self {
        Self {
            breakpoints: vec![(0.0, 0.0)],
        }
    }
}

impl ReconstructionTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a level change at `time`; times must not decrease.
    pub fn push(&mut self, time: f64, level: f64) -> Result<()> {
        let (last, _) = *self.breakpoints.last().expect("trace is never empty");
        if time < last {
            return Err(LabError::Input(format!(
                "breakpoint at {time} precedes {last}"
            )));
        }
        self.breakpoints.push((time, level));
        Ok(())
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    /// `Ŵ_t`. Simultaneous breakpoints resolve to the last one pushed.
    pub fn level_at(&self, t: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&(time, _)| time <= t);
        if idx == 0 {
            0.0
        } else {
            self.breakpoints[idx - 1].1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_strings() {
        let c = CodewordRecord {
            time: 0.0,
            bits: 0b010,
            length: 3,
        };
        assert_eq!(c.bit_string(), "010");
        assert_eq!(CodewordRecord::one_bit(1.0, true).bit_string(), "1");
    }

    #[test]
    fn csv_format() {
        let cws = vec![
            CodewordRecord::one_bit(0.5, true),
            CodewordRecord::one_bit(1.25, false),
        ];
        let csv = codewords_to_csv(&cws);
        assert_eq!(csv, "time,bit\n0.500000000,1\n1.250000000,0\n");
        assert_eq!(codewords_from_csv(&csv).unwrap(), cws);
        assert!(codewords_from_csv("t,b\n").is_err());
        assert!(codewords_from_csv("time,bit\n1.0,2\n").is_err());
    }

    #[test]
    fn trace_lookup() {
        let mut tr = ReconstructionTrace::new();
        tr.push(0.5, 1.0).unwrap();
        tr.push(1.4, 0.0).unwrap();
        assert_eq!(tr.level_at(0.0), 0.0);
        assert_eq!(tr.level_at(0.49), 0.0);
        assert_eq!(tr.level_at(0.5), 1.0);
        assert_eq!(tr.level_at(1.39), 1.0);
        assert_eq!(tr.level_at(1.4), 0.0);
        assert_eq!(tr.level_at(100.0), 0.0);
        assert!(tr.push(1.0, 2.0).is_err());
    }
}
