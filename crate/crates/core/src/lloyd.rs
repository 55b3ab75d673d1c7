//! Lloyd-Max scalar quantizer design against a [`PdfGrid`] prior.

use crate::error::{param, Result};
use crate::pdf::{MassAccumulator, PdfGrid};

/// Cell masses below this are treated as empty.
const EMPTY_CELL: f64 = 1e-14;

/// A scalar quantizer: `M − 1` increasing boundaries and `M`
/// representatives, with its expected squared error under the design pdf.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer {
    pub boundaries: Vec<f64>,
    pub representatives: Vec<f64>,
    pub expected_sq_error: f64,
    pub cell_probabilities: Vec<f64>,
}

impl Quantizer {
    /// The same quantizer for a source scaled by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            boundaries: self.boundaries.iter().map(|b| b * c).collect(),
            representatives: self.representatives.iter().map(|r| r * c).collect(),
            expected_sq_error: self.expected_sq_error * c * c,
            cell_probabilities: self.cell_probabilities.clone(),
        }
    }

    /// Evaluates fixed boundaries and representatives against `pdf`.
    pub fn evaluate(pdf: &PdfGrid, boundaries: Vec<f64>, representatives: Vec<f64>) -> Result<Self> {
        if representatives.len() < 2 || boundaries.len() + 1 != representatives.len() {
            return Err(param(format!(
                "{} boundaries do not match {} representatives",
                boundaries.len(),
                representatives.len()
            )));
        }
        if boundaries.windows(2).any(|w| w[1] < w[0]) {
            return Err(param("quantizer boundaries must increase"));
        }
        let moments = pdf.moments();
        let edges = cell_edges(pdf, &boundaries);
        let mut probs = Vec::with_capacity(representatives.len());
        let mut err = 0.0;
        for (k, &r) in representatives.iter().enumerate() {
            let (m0, m1, m2) = moments.between(edges[k], edges[k + 1]);
            probs.push(m0);
            err += m2 - 2.0 * r * m1 + r * r * m0;
        }
        Ok(Self {
            boundaries,
            representatives,
            expected_sq_error: err.max(0.0),
            cell_probabilities: probs,
        })
    }

    pub fn levels(&self) -> usize {
        self.representatives.len()
    }

    /// Cell index of `x`; boundary points belong to the upper cell.
    pub fn index(&self, x: f64) -> usize {
        self.boundaries.partition_point(|&b| b <= x)
    }

    pub fn quantize(&self, x: f64) -> f64 {
        self.representatives[self.index(x)]
    }

    /// Bits per codeword for a power-of-two level count.
    pub fn bits(&self) -> u32 {
        self.levels().next_power_of_two().trailing_zeros()
    }
}

fn cell_edges(pdf: &PdfGrid, boundaries: &[f64]) -> Vec<f64> {
    let mut edges = Vec::with_capacity(boundaries.len() + 2);
    edges.push(pdf.lo());
    edges.extend(boundaries.iter().map(|b| b.clamp(pdf.lo(), pdf.hi())));
    edges.push(pdf.hi());
    edges
}

/// Whether a design run met its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LloydStatus {
    Converged,
    /// `max_iter` reached; the quantizer is the last iterate.
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct LloydOutcome {
    pub quantizer: Quantizer,
    pub status: LloydStatus,
    pub iterations: usize,
    /// Expected squared error after each iteration, starting with the
    /// initial quantile partition.
    pub error_history: Vec<f64>,
    /// Number of empty cells that were merged and re-split.
    pub resplits: usize,
}

/// One centroid + midpoint pass from the given boundaries.
fn centroids(pdf: &PdfGrid, boundaries: &[f64], previous: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
    let moments = pdf.moments();
    let edges = cell_edges(pdf, boundaries);
    let mut reps = Vec::with_capacity(edges.len() - 1);
    let mut probs = Vec::with_capacity(edges.len() - 1);
    for k in 0..edges.len() - 1 {
        let (m0, m1, _) = moments.between(edges[k], edges[k + 1]);
        probs.push(m0);
        reps.push(if m0 > EMPTY_CELL {
            m1 / m0
        } else {
            previous.map_or(0.5 * (edges[k] + edges[k + 1]), |p| p[k])
        });
    }
    (reps, probs)
}

/// Merges each empty cell with its heavier neighbour and re-splits the
/// merged cell at its median. Returns the number of cells repaired.
fn repair_empty_cells(pdf: &PdfGrid, boundaries: &mut [f64], probs: &[f64]) -> usize {
    let moments = pdf.moments();
    let m = probs.len();
    let mut repaired = 0;
    for k in 0..m {
        let edges = cell_edges(pdf, boundaries);
        let (mass, _, _) = moments.between(edges[k], edges[k + 1]);
        if mass > EMPTY_CELL {
            continue;
        }
        let left = (k > 0).then(|| moments.between(edges[k - 1], edges[k]).0);
        let right = (k + 1 < m).then(|| moments.between(edges[k + 1], edges[k + 2]).0);
        let use_left = match (left, right) {
            (Some(l), Some(r)) => l >= r,
            (Some(_), None) => true,
            _ => false,
        };
        let (first, a, b) = if use_left {
            (k - 1, edges[k - 1], edges[k + 1])
        } else {
            (k, edges[k], edges[k + 2])
        };
        if moments.between(a, b).0 <= EMPTY_CELL {
            continue;
        }
        // the shared boundary of the merged pair sits at index `first`
        boundaries[first] = moments.quantile_within(a, b, 0.5);
        repaired += 1;
    }
    repaired
}

/// Designs an `levels`-cell Lloyd-Max quantizer for `pdf`, alternating
/// centroid and midpoint conditions until the expected squared error
/// changes by less than `tol`.
pub fn lloyd_max(pdf: &PdfGrid, levels: usize, tol: f64, max_iter: usize) -> Result<LloydOutcome> {
    if levels < 2 {
        return Err(param(format!("a quantizer needs at least 2 levels, got {levels}")));
    }
    if !(tol > 0.0) {
        return Err(param(format!("tolerance must be positive, got {tol}")));
    }
    let moments = pdf.moments();
    // start from the equal-probability partition
    let mut boundaries: Vec<f64> = (1..levels)
        .map(|k| moments.quantile_within(pdf.lo(), pdf.hi(), k as f64 / levels as f64))
        .collect();
    drop(moments);
    let (mut reps, _) = centroids(pdf, &boundaries, None);
    let mut current = Quantizer::evaluate(pdf, boundaries.clone(), reps.clone())?;
    let mut history = vec![current.expected_sq_error];
    let mut resplits = 0;
    let mut status = LloydStatus::MaxIterations;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        boundaries = reps.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let (mut new_reps, probs) = centroids(pdf, &boundaries, Some(&reps));
        if probs.iter().any(|&p| p <= EMPTY_CELL) {
            let fixed = repair_empty_cells(pdf, &mut boundaries, &probs);
            if fixed > 0 {
                resplits += fixed;
                new_reps = centroids(pdf, &boundaries, Some(&reps)).0;
            }
        }
        reps = new_reps;
        let next = Quantizer::evaluate(pdf, boundaries.clone(), reps.clone())?;
        let change = (current.expected_sq_error - next.expected_sq_error).abs();
        history.push(next.expected_sq_error);
        current = next;
        if change < tol {
            status = LloydStatus::Converged;
            break;
        }
    }
    // report the quantizer in its stationary form: midpoints of the final
    // representatives
    let boundaries: Vec<f64> = reps.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let (reps_final, _) = centroids(pdf, &boundaries, Some(&reps));
    let candidate = Quantizer::evaluate(pdf, boundaries, reps_final)?;
    if candidate.expected_sq_error <= current.expected_sq_error {
        current = candidate;
    }
    Ok(LloydOutcome {
        quantizer: current,
        status,
        iterations,
        error_history: history,
        resplits,
    })
}

/// Pdf of `X − q(X)` for `X ~ prior`, on a grid with the prior's cell count
/// spanning the shifted cells.
pub fn induced_error_pdf(prior: &PdfGrid, q: &Quantizer) -> Result<PdfGrid> {
    let edges = cell_edges(prior, &q.boundaries);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (k, &r) in q.representatives.iter().enumerate() {
        if edges[k + 1] > edges[k] {
            lo = lo.min(edges[k] - r);
            hi = hi.max(edges[k + 1] - r);
        }
    }
    if !(lo < hi) {
        return Err(param("quantizer cells do not cover the prior support"));
    }
    let mut acc = MassAccumulator::new(lo, hi, prior.bins());
    let w = prior.width();
    let mut cell = 0usize;
    for j in 0..prior.bins() {
        let mass = prior.cell_mass(j);
        if mass == 0.0 {
            continue;
        }
        let (a, b) = (prior.edge(j), prior.edge(j) + w);
        let density = mass / w;
        while cell + 1 < edges.len() - 1 && edges[cell + 1] <= a {
            cell += 1;
        }
        let mut k = cell;
        while k < q.levels() && edges[k] < b {
            let (pa, pb) = (a.max(edges[k]), b.min(edges[k + 1]));
            if pb > pa {
                let r = q.representatives[k];
                acc.deposit(pa - r, pb - r, density * (pb - pa));
            }
            k += 1;
        }
    }
    let masses = acc.masses;
    let width = (hi - lo) / masses.len() as f64;
    PdfGrid::from_densities(lo, hi, masses.into_iter().map(|m| m / width).collect())
}
