//! Browser bindings: each export returns a JSON string for the page to plot.

use serde::Serialize;
use wasm_bindgen::prelude::*;
use wiener_lab::idrf::ClosedForms;
use wiener_lab::lloyd::lloyd_max;
use wiener_lab::pdf::PdfGrid;
use wiener_lab::rng::SeedStream;
use wiener_lab::soi::{soi_decode, soi_encode_recorded, SoiConfig};

const MAX_POINTS: usize = 2000;

#[derive(Serialize)]
struct Trace {
    t: Vec<f64>,
    w: Vec<f64>,
    estimate: Vec<f64>,
    samples: usize,
    mse: f64,
}

#[derive(Serialize)]
struct Curves {
    rates: Vec<f64>,
    dop: Vec<f64>,
    ddet: Vec<f64>,
    noncausal: Vec<f64>,
}

#[derive(Serialize)]
struct Levels {
    boundaries: Vec<f64>,
    representatives: Vec<f64>,
    error: f64,
}

fn json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

pub fn soi_trace_json(rate: f64, horizon: f64, seed: u64) -> Result<String, String> {
    let c = SoiConfig::new(rate).map_err(|e| e.to_string())?;
    let h = c.default_step_h();
    let (enc, path) = soi_encode_recorded(SeedStream::new(seed, 0), c, horizon, h, true).map_err(|e| e.to_string())?;
    let trace = soi_decode(&enc.codewords, c.threshold()).map_err(|e| e.to_string())?;
    let stride = path.values.len().div_ceil(MAX_POINTS).max(1);
    let mut out = Trace {
        t: Vec::new(),
        w: Vec::new(),
        estimate: Vec::new(),
        samples: enc.codewords.len(),
        mse: 0.0,
    };
    let mut sq = 0.0;
    for (k, &w) in path.values.iter().enumerate() {
        let t = k as f64 * h;
        let e = trace.level_at(t);
        sq += (w - e) * (w - e);
        if k % stride == 0 {
            out.t.push(t);
            out.w.push(w);
            out.estimate.push(e);
        }
    }
    out.mse = sq / path.values.len().max(1) as f64;
    json(&out)
}

pub fn curves_json(r_max: f64, points: usize) -> Result<String, String> {
    if points < 2 || !(r_max > 0.0) {
        return Err("need r_max > 0 and at least 2 points".into());
    }
    let mut c = Curves { rates: Vec::new(), dop: Vec::new(), ddet: Vec::new(), noncausal: Vec::new() };
    for k in 1..=points {
        let r = r_max * k as f64 / points as f64;
        let f = ClosedForms::new(r).map_err(|e| e.to_string())?;
        c.rates.push(r);
        c.dop.push(f.dop);
        c.ddet.push(f.ddet);
        c.noncausal.push(f.dnoncausal);
    }
    json(&c)
}

pub fn gaussian_quantizer_json(bits: u32) -> Result<String, String> {
    if !(1..=8).contains(&bits) {
        return Err(format!("bits must be in 1..=8, got {bits}"));
    }
    let pdf = PdfGrid::gaussian(0.0, 1.0, 4096, 8.0).map_err(|e| e.to_string())?;
    let q = lloyd_max(&pdf, 1 << bits, 1e-12, 2000).map_err(|e| e.to_string())?.quantizer;
    json(&Levels {
        boundaries: q.boundaries,
        representatives: q.representatives,
        error: q.expected_sq_error,
    })
}

#[wasm_bindgen]
pub fn soi_trace(rate: f64, horizon: f64, seed: u64) -> Result<String, String> {
    soi_trace_json(rate, horizon, seed)
}

#[wasm_bindgen]
pub fn distortion_curves(r_max: f64, points: usize) -> Result<String, String> {
    curves_json(r_max, points)
}

#[wasm_bindgen]
pub fn gaussian_quantizer(bits: u32) -> Result<String, String> {
    gaussian_quantizer_json(bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_is_decimated_and_tracks() {
        let v: serde_json::Value = serde_json::from_str(&soi_trace_json(1.0, 50.0, 3).unwrap()).unwrap();
        let n = v["t"].as_array().unwrap().len();
        assert!(n <= MAX_POINTS + 1 && n > 100);
        assert!(v["samples"].as_u64().unwrap() > 10);
        assert!(v["mse"].as_f64().unwrap() < 1.0);
    }

    #[test]
    fn curves_keep_their_order() {
        let v: serde_json::Value = serde_json::from_str(&curves_json(4.0, 8).unwrap()).unwrap();
        for k in 0..8 {
            let g = |c: &str| v[c][k].as_f64().unwrap();
            assert!(g("dop") < g("noncausal") && g("noncausal") < g("ddet"));
        }
        assert!(curves_json(4.0, 1).is_err());
    }

    #[test]
    fn one_bit_levels() {
        let v: serde_json::Value = serde_json::from_str(&gaussian_quantizer_json(1).unwrap()).unwrap();
        let r = v["representatives"][1].as_f64().unwrap();
        assert!((r - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-3);
        assert!(gaussian_quantizer_json(0).is_err());
    }
}
