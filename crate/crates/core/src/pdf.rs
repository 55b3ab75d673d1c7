//! Piecewise-constant probability densities on uniform grids.
//!
//! A [`PdfGrid`] is a histogram density: constant inside each of its equal
//! width cells. Moments, partial moments and the Gaussian smoothing below are
//! computed exactly for that representation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{ensure_positive, param, LabError, Result};

/// Default number of cells for tracked priors.
pub const DEFAULT_BINS: usize = 4096;
/// Default half-width of a tracked prior, in standard deviations.
pub const DEFAULT_HALF_WIDTH_SD: f64 = 8.0;
/// Mass allowed to fall outside a grid before it is widened.
pub const OVERFLOW_TOLERANCE: f64 = 1e-6;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdfGrid {
    lo: f64,
    hi: f64,
    densities: Vec<f64>,
}

impl PdfGrid {
    /// Builds a grid from non-negative cell densities, renormalizing them.
    pub fn from_densities(lo: f64, hi: f64, densities: Vec<f64>) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(param(format!("pdf support [{lo}, {hi}] is empty")));
        }
        if densities.len() < 8 {
            return Err(param(format!("pdf grid needs at least 8 cells, got {}", densities.len())));
        }
        if densities.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(param("pdf densities must be finite and non-negative"));
        }
        let mut grid = Self { lo, hi, densities };
        let mass = grid.mass();
        if mass <= 0.0 {
            return Err(param("pdf has zero mass"));
        }
        grid.densities.iter_mut().for_each(|d| *d /= mass);
        Ok(grid)
    }

    fn from_masses(lo: f64, hi: f64, masses: Vec<f64>) -> Result<Self> {
        let w = (hi - lo) / masses.len() as f64;
        Self::from_densities(lo, hi, masses.into_iter().map(|m| m / w).collect())
    }

    /// `N(mean, variance)` on `mean ± half_width_sd·sd`, with cell masses
    /// taken from the exact CDF.
    pub fn gaussian(mean: f64, variance: f64, bins: usize, half_width_sd: f64) -> Result<Self> {
        ensure_positive("variance", variance)?;
        ensure_positive("half_width_sd", half_width_sd)?;
        let sd = variance.sqrt();
        let (lo, hi) = (mean - half_width_sd * sd, mean + half_width_sd * sd);
        let w = (hi - lo) / bins as f64;
        let masses = (0..bins)
            .map(|k| {
                let a = (lo + k as f64 * w - mean) / sd;
                let b = (lo + (k + 1) as f64 * w - mean) / sd;
                normal_cdf(b) - normal_cdf(a)
            })
            .collect();
        Self::from_masses(lo, hi, masses)
    }

    /// Uniform density on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        Self::from_densities(lo, hi, vec![1.0; bins])
    }

    /// All mass in the cell containing `at`, on the grid `[lo, hi]`.
    pub fn point_mass(at: f64, lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(lo <= at && at < hi) {
            return Err(param(format!("point {at} outside [{lo}, {hi})")));
        }
        let mut masses = vec![0.0; bins];
        let w = (hi - lo) / bins as f64;
        masses[(((at - lo) / w) as usize).min(bins - 1)] = 1.0;
        Self::from_masses(lo, hi, masses)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn bins(&self) -> usize {
        self.densities.len()
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.densities.len() as f64
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    /// Left edge of cell `k`.
    pub fn edge(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.width()
    }

    pub fn cell_mass(&self, k: usize) -> f64 {
        self.densities[k] * self.width()
    }

    pub fn mass(&self) -> f64 {
        let w = self.width();
        self.densities.iter().map(|d| d * w).sum()
    }

    pub fn mean(&self) -> f64 {
        let w = self.width();
        (0..self.bins())
            .map(|k| self.cell_mass(k) * (self.edge(k) + 0.5 * w))
            .sum()
    }

    pub fn second_moment(&self) -> f64 {
        let w = self.width();
        (0..self.bins())
            .map(|k| {
                let c = self.edge(k) + 0.5 * w;
                self.cell_mass(k) * (c * c + w * w / 12.0)
            })
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (self.second_moment() - m * m).max(0.0)
    }

    /// Total-variation distance to a reference distribution given by its
    /// CDF, counting reference mass outside the support.
    pub fn tv_distance_to_cdf(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let mut diff = cdf(self.lo) + (1.0 - cdf(self.hi));
        for k in 0..self.bins() {
            let reference = cdf(self.edge(k + 1)) - cdf(self.edge(k));
            diff += (self.cell_mass(k) - reference).abs();
        }
        0.5 * diff
    }

    /// Cumulative partial moments for fast interval queries.
    pub fn moments(&self) -> PartialMoments<'_> {
        let n = self.bins();
        let w = self.width();
        let mut p0 = Vec::with_capacity(n + 1);
        let mut p1 = Vec::with_capacity(n + 1);
        let mut p2 = Vec::with_capacity(n + 1);
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        p0.push(0.0);
        p1.push(0.0);
        p2.push(0.0);
        for k in 0..n {
            let d = self.densities[k];
            let (a, b) = (self.edge(k), self.edge(k) + w);
            s0 += d * w;
            s1 += d * (b * b - a * a) / 2.0;
            s2 += d * (b * b * b - a * a * a) / 3.0;
            p0.push(s0);
            p1.push(s1);
            p2.push(s2);
        }
        PartialMoments {
            grid: self,
            p0,
            p1,
            p2,
        }
    }
}

/// `∫_{lo}^{x} t^j p(t) dt` for `j = 0, 1, 2`, evaluated at arbitrary `x`.
pub struct PartialMoments<'a> {
    grid: &'a PdfGrid,
    p0: Vec<f64>,
    p1: Vec<f64>,
    p2: Vec<f64>,
}

impl PartialMoments<'_> {
    /// Moments `(m0, m1, m2)` of the mass below `x`.
    pub fn below(&self, x: f64) -> (f64, f64, f64) {
        let g = self.grid;
        if x <= g.lo {
            return (0.0, 0.0, 0.0);
        }
        let n = g.bins();
        if x >= g.hi {
            return (self.p0[n], self.p1[n], self.p2[n]);
        }
        let k = (((x - g.lo) / g.width()) as usize).min(n - 1);
        let a = g.edge(k);
        let d = g.densities[k];
        (
            self.p0[k] + d * (x - a),
            self.p1[k] + d * (x * x - a * a) / 2.0,
            self.p2[k] + d * (x * x * x - a * a * a) / 3.0,
        )
    }

    /// Moments of the mass in `[a, b]`.
    pub fn between(&self, a: f64, b: f64) -> (f64, f64, f64) {
        let (a0, a1, a2) = self.below(a);
        let (b0, b1, b2) = self.below(b);
        (b0 - a0, b1 - a1, b2 - a2)
    }

    /// Smallest `x` with `P(X ≤ x) ≥ p`, restricted to `[a, b]`.
    pub fn quantile_within(&self, a: f64, b: f64, p: f64) -> f64 {
        let (m_a, _, _) = self.below(a);
        let (m_b, _, _) = self.below(b);
        let target = m_a + p * (m_b - m_a);
        let (mut lo, mut hi) = (a, b);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.below(mid).0 < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Accumulates uniform mass slabs onto a target grid.
pub(crate) struct MassAccumulator {
    pub lo: f64,
    pub hi: f64,
    width: f64,
    pub masses: Vec<f64>,
    pub outside: f64,
}

impl MassAccumulator {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Self {
            lo,
            hi,
            width: (hi - lo) / bins as f64,
            masses: vec![0.0; bins],
            outside: 0.0,
        }
    }

    /// Spreads `mass` uniformly over `[a, b]`.
    pub fn deposit(&mut self, a: f64, b: f64, mass: f64) {
        if mass == 0.0 {
            return;
        }
        if b <= a {
            // degenerate slab: treat as a point
            if a < self.lo || a >= self.hi {
                self.outside += mass;
            } else {
                let k = (((a - self.lo) / self.width) as usize).min(self.masses.len() - 1);
                self.masses[k] += mass;
            }
            return;
        }
        let density = mass / (b - a);
        let (ca, cb) = (a.max(self.lo), b.min(self.hi));
        if cb <= ca {
            self.outside += mass;
            return;
        }
        self.outside += density * ((ca - a) + (b - cb));
        let n = self.masses.len();
        let first = (((ca - self.lo) / self.width) as usize).min(n - 1);
        let mut k = first;
        loop {
            let left = self.lo + k as f64 * self.width;
            let right = if k + 1 == n { self.hi } else { left + self.width };
            let overlap = cb.min(right) - ca.max(left);
            if overlap > 0.0 {
                self.masses[k] += density * overlap;
            }
            if right >= cb || k + 1 == n {
                break;
            }
            k += 1;
        }
    }
}

/// Mass that cell offset `d` receives from a uniform cell of width `w`
/// smoothed by `N(0, sd²)`.
fn smoothed_cell_kernel(d: i64, w: f64, sd: f64) -> f64 {
    let g = |t: f64| t * normal_cdf(t) + normal_pdf(t);
    let s = w / sd;
    let x = d as f64 * s;
    (sd / w) * (g(x + s) - 2.0 * g(x) + g(x - s))
}

fn convolve_onto(
    source: &PdfGrid,
    sd: f64,
    lo: f64,
    hi: f64,
    bins: usize,
) -> (Vec<f64>, f64) {
    let mut acc = MassAccumulator::new(lo, hi, bins);
    for k in 0..source.bins() {
        acc.deposit(source.edge(k), source.edge(k + 1), source.cell_mass(k));
    }
    let w = (hi - lo) / bins as f64;
    let reach = ((9.0 * sd) / w).ceil() as i64 + 1;
    let kernel: Vec<f64> = (-reach..=reach)
        .map(|d| smoothed_cell_kernel(d, w, sd).max(0.0))
        .collect();
    let n = bins as i64;
    let mut out = vec![0.0; bins];
    let mut outside = acc.outside;
    for (j, &m) in acc.masses.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let j = j as i64;
        let mut kept = 0.0;
        let start = (j - reach).max(0);
        let stop = (j + reach).min(n - 1);
        for t in start..=stop {
            let kv = kernel[(t - j + reach) as usize];
            out[t as usize] += m * kv;
            kept += kv;
        }
        outside += m * (1.0 - kept).max(0.0);
    }
    (out, outside)
}

/// Prior of the next quantization innovation: `error_pdf ⊛ N(0, v)`,
/// re-centered on a grid spanning ±8 standard deviations of the result.
/// If more than [`OVERFLOW_TOLERANCE`] of the mass would fall outside,
/// the grid is widened once.
pub fn innovation_prior_update(error_pdf: &PdfGrid, increment_variance: f64) -> Result<PdfGrid> {
    ensure_positive("increment_variance", increment_variance)?;
    let mean = error_pdf.mean();
    let sd_out = (error_pdf.variance() + increment_variance).sqrt();
    let sd_inc = increment_variance.sqrt();
    let bins = error_pdf.bins();
    let mut half = DEFAULT_HALF_WIDTH_SD * sd_out;
    let mut last_outside = 0.0;
    for _ in 0..2 {
        let (lo, hi) = (mean - half, mean + half);
        let (masses, outside) = convolve_onto(error_pdf, sd_inc, lo, hi, bins);
        if outside <= OVERFLOW_TOLERANCE {
            return PdfGrid::from_masses(lo, hi, masses);
        }
        last_outside = outside;
        half *= 2.0;
    }
    Err(LabError::GridOverflow {
        mass_outside: last_outside,
    })
}
