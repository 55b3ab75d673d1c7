//! Informational distortion-rate quantities for sampled Wiener processes.
//!
//! The finite-horizon program chooses sampling intervals `T_0..T_N` with
//! mean `1/f` and per-sample distortions `D_1..D_N` subject to the rate
//! constraint
//!
//! ```text
//! z(D) = (1/N)·(Σ_{i=1}^{N−1} log(1 + T_i/D_i) + log(T_0/D_N)) ≤ 2·Rs
//! ```
//!
//! (base-2 logs) and the chain condition `D_{i−1} + T_{i−1} ≥ D_i`. Its value
//! is `(f/N)·(Σ T_i²/2 + Σ T_i·D_i)`. Dropping the chain condition makes the
//! inner problem convex with the closed-form minimizer
//!
//! ```text
//! D_i = (−T_i + sqrt(T_i² + 4x))/2,   D_N = x/T_N,   x = λ·log e,
//! ```
//!
//! where the multiplier is fixed by `z(D) = 2·Rs`. Lower and upper bounds on
//! the finite-N value follow from that minimizer; both converge to
//! `1/(2f) + 1/(f(2^{2Rs} − 1))`.

use std::f64::consts::{LOG2_E, PI};

use serde::Serialize;

use crate::error::{ensure_positive, param, LabError, Result};

/// Largest horizon (number of samples) accepted by the finite-N solvers.
pub const MAX_N: usize = 100_000;
const LAMBDA_REL_WIDTH: f64 = 1e-12;
const MAX_DOUBLINGS: usize = 200;
const MAX_HALVINGS: usize = 2000;

/// Sampling intervals `T_0, …, T_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalAllocation {
    intervals: Vec<f64>,
}

impl IntervalAllocation {
    pub fn new(intervals: Vec<f64>) -> Result<Self> {
        if intervals.len() < 2 {
            return Err(param("an interval allocation needs N ≥ 1 (at least two intervals)"));
        }
        if intervals.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(param("sampling intervals must be finite and non-negative"));
        }
        Ok(Self { intervals })
    }

    /// The equal allocation `T_i = N/(f(N+1))`, `i = 0..=N`.
    pub fn uniform(f: f64, n: usize) -> Result<Self> {
        ensure_positive("f", f)?;
        check_n(n, 1)?;
        let t = n as f64 / (f * (n as f64 + 1.0));
        Self::new(vec![t; n + 1])
    }

    /// `T_0 = first`, `T_N = last`, interior intervals equal to
    /// `(N/f − first − last)/(N − 1)`.
    pub fn with_ends(f: f64, n: usize, first: f64, last: f64) -> Result<Self> {
        ensure_positive("f", f)?;
        check_n(n, 2)?;
        let budget = n as f64 / f;
        if first < 0.0 || last < 0.0 || first + last > budget {
            return Err(param(format!(
                "end intervals {first} + {last} exceed the budget {budget}"
            )));
        }
        let interior = ((budget - first - last) / (n as f64 - 1.0)).max(0.0);
        let mut v = vec![interior; n + 1];
        v[0] = first;
        v[n] = last;
        Self::new(v)
    }

    pub fn n(&self) -> usize {
        self.intervals.len() - 1
    }

    pub fn intervals(&self) -> &[f64] {
        &self.intervals
    }

    /// `N / Σ T_i`.
    pub fn frequency(&self) -> f64 {
        self.n() as f64 / self.intervals.iter().sum::<f64>()
    }
}

fn check_n(n: usize, min: usize) -> Result<()> {
    if n < min || n > MAX_N {
        Err(param(format!("N must be in {min}..={MAX_N}, got {n}")))
    } else {
        Ok(())
    }
}

/// Per-sample distortions `D_1, …, D_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionAllocation {
    values: Vec<f64>,
}

impl DistortionAllocation {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(param("a distortion allocation needs N ≥ 1 entries"));
        }
        if values.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(param("distortions must be finite and non-negative"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// First `i` (1-based) violating `D_{i−1} + T_{i−1} ≥ D_i` with `D_0 = 0`,
    /// allowing a relative slack of `rel_tol`.
    pub fn chain_violation(&self, t: &IntervalAllocation, rel_tol: f64) -> Option<usize> {
        let tv = t.intervals();
        let mut prev = 0.0;
        for (k, &d) in self.values.iter().enumerate() {
            let cap = prev + tv[k];
            if d > cap * (1.0 + rel_tol) + f64::MIN_POSITIVE {
                return Some(k + 1);
            }
            prev = d;
        }
        None
    }
}

fn check_lengths(d: &DistortionAllocation, t: &IntervalAllocation) -> Result<()> {
    if d.values.len() != t.n() {
        Err(LabError::Input(format!(
            "{} distortions for N = {} intervals",
            d.values.len(),
            t.n()
        )))
    } else {
        Ok(())
    }
}

/// Rate functional `z(D)` in bits per sample (twice the per-sample rate).
pub fn z_of(d: &DistortionAllocation, t: &IntervalAllocation) -> Result<f64> {
    check_lengths(d, t)?;
    let n = t.n();
    let tv = t.intervals();
    let dv = d.values();
    if dv.iter().any(|&x| x <= 0.0) {
        return Err(LabError::Numerical("z diverges at a zero distortion".into()));
    }
    if tv[0] <= 0.0 {
        return Err(LabError::Numerical("z diverges at T_0 = 0".into()));
    }
    let interior: f64 = (1..n).map(|i| (1.0 + tv[i] / dv[i - 1]).log2()).sum();
    Ok((interior + (tv[0] / dv[n - 1]).log2()) / n as f64)
}

/// `(f/N)(Σ_{i=0}^{N} T_i²/2 + Σ_{i=1}^{N} T_i·D_i)`.
pub fn dn_objective(t: &IntervalAllocation, d: &DistortionAllocation, f: f64) -> Result<f64> {
    check_lengths(d, t)?;
    let tv = t.intervals();
    let sampling: f64 = tv.iter().map(|x| x * x / 2.0).sum();
    let quantization: f64 = d.values.iter().zip(&tv[1..]).map(|(d, t)| t * d).sum();
    Ok(f / t.n() as f64 * (sampling + quantization))
}

/// Minimizer of the relaxed inner problem at `x = λ·log e`.
fn distortions_at(t: &[f64], x: f64) -> Vec<f64> {
    let n = t.len() - 1;
    let mut d: Vec<f64> = t[1..n]
        .iter()
        .map(|&ti| 2.0 * x / ((ti * ti + 4.0 * x).sqrt() + ti))
        .collect();
    d.push(x / t[n]);
    d
}

/// `z(D*(x))`, written to avoid cancellation for small `x`.
fn z_at(t: &[f64], x: f64) -> f64 {
    let n = t.len() - 1;
    let log4x = (4.0 * x).log2();
    let interior: f64 = t[1..n]
        .iter()
        .map(|&ti| 2.0 * ((ti * ti + 4.0 * x).sqrt() + ti).log2() - log4x)
        .sum();
    (interior + (t[0] * t[n] / x).log2()) / n as f64
}

/// Multiplier `λ*` and distortions `D*` meeting `z(D*) = 2·Rs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSolution {
    pub lambda: f64,
    pub distortions: DistortionAllocation,
}

impl LambdaSolution {
    /// `λ*·log e`, the combination appearing in the closed forms.
    pub fn lambda_log_e(&self) -> f64 {
        self.lambda * LOG2_E
    }
}

/// Solves the complementary-slackness equation by bracketing bisection.
///
/// The bracket starts at `λ ∈ [0, 1]` and is doubled until the sign of
/// `z − 2Rs` changes; the lower end is pulled towards 0 by halving when the
/// root lies below 1. Bisection is geometric because `λ*` spans many
/// decades as `Rs` varies.
pub fn solve_lambda(t: &IntervalAllocation, rs: f64) -> Result<LambdaSolution> {
    if !(rs.is_finite() && rs >= 1.0) {
        return Err(param(format!("Rs must be at least 1 bit per sample, got {rs}")));
    }
    let tv = t.intervals();
    let n = t.n();
    if tv[0] <= 0.0 || tv[n] <= 0.0 {
        return Err(param("solve_lambda needs T_0 > 0 and T_N > 0"));
    }
    let target = 2.0 * rs;
    let g = |lambda: f64| z_at(tv, lambda * LOG2_E) - target;

    let mut hi = 1.0_f64;
    let mut doublings = 0;
    while g(hi) > 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(LabError::Numerical(format!(
                "λ bracket did not close after {MAX_DOUBLINGS} doublings"
            )));
        }
    }
    let mut lo = hi / 2.0;
    let mut halvings = 0;
    while g(lo) <= 0.0 {
        hi = lo;
        lo /= 2.0;
        halvings += 1;
        if halvings > MAX_HALVINGS || lo == 0.0 {
            return Err(LabError::Numerical("λ* underflows".into()));
        }
    }
    while hi / lo - 1.0 > LAMBDA_REL_WIDTH {
        let mid = (lo * hi).sqrt();
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = (lo * hi).sqrt();
    Ok(LambdaSolution {
        lambda,
        distortions: DistortionAllocation::new(distortions_at(tv, lambda * LOG2_E))?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    LowerBound,
    UpperBound,
    Limit,
    ClosedForm,
}

impl SolutionKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::LowerBound => "lower_bound",
            Self::UpperBound => "upper_bound",
            Self::Limit => "limit",
            Self::ClosedForm => "closed_form",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdrfSolution {
    pub allocation: IntervalAllocation,
    pub distortions: DistortionAllocation,
    pub lambda_star: f64,
    pub value: f64,
    pub kind: SolutionKind,
}

impl IdrfSolution {
    pub fn lambda_log_e(&self) -> f64 {
        self.lambda_star * LOG2_E
    }

    /// `z(D*)`; equals `2·Rs` to solver precision for the bound kinds.
    pub fn rate_functional(&self) -> Result<f64> {
        z_of(&self.distortions, &self.allocation)
    }
}

/// Lower-bound objective for given end intervals.
fn lower_bound_at(f: f64, rs: f64, n: usize, first: f64, last: f64) -> Result<(f64, IntervalAllocation, LambdaSolution)> {
    let alloc = IntervalAllocation::with_ends(f, n, first, last)?;
    let sol = solve_lambda(&alloc, rs)?;
    let x = sol.lambda_log_e();
    let interior = alloc.intervals()[1];
    let nf = n as f64;
    let value = f / 2.0
        * ((first * first + last * last + 2.0 * x) / nf
            + (nf - 1.0) / nf * interior * (interior * interior + 4.0 * x).sqrt());
    Ok((value, alloc, sol))
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
fn golden_section(mut a: f64, mut b: f64, tol: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// How the end intervals of the lower bound are searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EndSearch {
    /// `T_0 = T_N`, one golden-section search.
    #[default]
    Symmetric,
    /// Independent `T_0`, `T_N` by cyclic golden-section coordinate descent.
    Asymmetric,
}

fn validate_f_rs(f: f64, rs: f64) -> Result<()> {
    ensure_positive("f", f)?;
    if !(rs.is_finite() && rs >= 1.0) {
        return Err(param(format!("Rs must be at least 1, got {rs}")));
    }
    Ok(())
}

/// Finite-N lower bound: chain condition dropped, interior intervals equal,
/// end intervals optimized.
pub fn lower_bound_dn(f: f64, rs: f64, n: usize) -> Result<IdrfSolution> {
    lower_bound_dn_with(f, rs, n, EndSearch::Symmetric)
}

pub fn lower_bound_dn_with(f: f64, rs: f64, n: usize, search: EndSearch) -> Result<IdrfSolution> {
    validate_f_rs(f, rs)?;
    check_n(n, 2)?;
    let nf = n as f64;
    let tol = 1e-10 * nf / f;
    let (first, last) = match search {
        EndSearch::Symmetric => {
            let half = nf / (2.0 * f);
            let (a, _) = golden_section(0.0, half, tol, |a| Ok(lower_bound_at(f, rs, n, a, a)?.0))?;
            (a, a)
        }
        EndSearch::Asymmetric => {
            let budget = nf / f;
            let start = nf / (f * (nf + 1.0));
            let (mut t0, mut tn) = (start, start);
            let mut best = lower_bound_at(f, rs, n, t0, tn)?.0;
            for _ in 0..50 {
                let (a, _) = golden_section(0.0, budget - tn, tol, |a| Ok(lower_bound_at(f, rs, n, a, tn)?.0))?;
                t0 = a;
                let (b, v) = golden_section(0.0, budget - t0, tol, |b| Ok(lower_bound_at(f, rs, n, t0, b)?.0))?;
                tn = b;
                let done = (best - v).abs() <= 1e-15 * best.abs();
                best = v;
                if done {
                    break;
                }
            }
            (t0, tn)
        }
    };
    let (mut value, mut alloc, mut sol) = lower_bound_at(f, rs, n, first, last)?;
    // The equal allocation is a point of the searched family; never report
    // a worse value than it gives.
    let even = nf / (f * (nf + 1.0));
    let (v_even, a_even, s_even) = lower_bound_at(f, rs, n, even, even)?;
    if v_even < value {
        (value, alloc, sol) = (v_even, a_even, s_even);
    }
    Ok(IdrfSolution {
        allocation: alloc,
        distortions: sol.distortions.clone(),
        lambda_star: sol.lambda,
        value,
        kind: SolutionKind::LowerBound,
    })
}

/// Finite-N upper bound from the feasible equal allocation.
pub fn upper_bound_dn(f: f64, rs: f64, n: usize) -> Result<IdrfSolution> {
    validate_f_rs(f, rs)?;
    check_n(n, 2)?;
    let alloc = IntervalAllocation::uniform(f, n)?;
    let sol = solve_lambda(&alloc, rs)?;
    if let Some(i) = sol.distortions.chain_violation(&alloc, 1e-12) {
        return Err(LabError::Numerical(format!(
            "equal allocation violates D_(i-1) + T_(i-1) >= D_i at i = {i} (N = {n})"
        )));
    }
    let nf = n as f64;
    let t = alloc.intervals()[0];
    let x = sol.lambda_log_e();
    let value = nf / (f * (nf + 1.0) * (nf + 1.0))
        + x * f / nf
        + (nf - 1.0) / (2.0 * (nf + 1.0)) * (t * t + 4.0 * x).sqrt();
    Ok(IdrfSolution {
        allocation: alloc,
        distortions: sol.distortions,
        lambda_star: sol.lambda,
        value,
        kind: SolutionKind::UpperBound,
    })
}

/// `1/(2f) + 1/(f(2^{2Rs} − 1))`.
pub fn idrf_limit(f: f64, rs: f64) -> Result<f64> {
    validate_f_rs(f, rs)?;
    Ok(1.0 / (2.0 * f) + 1.0 / (f * ((2.0 * rs).exp2() - 1.0)))
}

/// Limit of `λ*·log e` as `N → ∞`.
pub fn lambda_log_e_limit(f: f64, rs: f64) -> Result<f64> {
    validate_f_rs(f, rs)?;
    let g = (2.0 * rs).exp2() - 1.0;
    Ok(1.0 / (f * f * g * g) + 1.0 / (f * f * g))
}

/// Closed-form distortion-rate values at rate `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedForms {
    pub rate: f64,
    /// Operational optimum with free timing, `1/(6R)`.
    pub dop: f64,
    /// Deterministic-sampling optimum, `5/(6R)`.
    pub ddet: f64,
    /// Non-causal (infinite delay) optimum, `2·log₂e/(π²R)`.
    pub dnoncausal: f64,
}

impl ClosedForms {
    pub fn new(rate: f64) -> Result<Self> {
        ensure_positive("rate", rate)?;
        Ok(Self {
            rate,
            dop: 1.0 / (6.0 * rate),
            ddet: 5.0 / (6.0 * rate),
            dnoncausal: 2.0 * LOG2_E / (PI * PI * rate),
        })
    }

    /// Threshold sampling at frequency `f` with a 1-bit compressor, `1/(6f)`.
    pub fn dop_f_rs(f: f64) -> Result<f64> {
        ensure_positive("f", f)?;
        Ok(1.0 / (6.0 * f))
    }

    /// MSE with a fixed channel delay `δ`, `1/(6R) + δ`.
    pub fn dch(&self, delay: f64) -> Result<f64> {
        if !(delay.is_finite() && delay >= 0.0) {
            return Err(param(format!("delay must be non-negative, got {delay}")));
        }
        Ok(self.dop + delay)
    }
}

/// Which `(f, Rs)` tradeoff to minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tradeoff {
    /// Operational, threshold sampling: `1/(6f)`.
    Odfrf,
    /// Informational, deterministic sampling: [`idrf_limit`].
    Idfrf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffOptimum {
    pub f: f64,
    pub rs: u32,
    pub value: f64,
}

/// Value of a tradeoff at `(f, Rs)`.
pub fn tradeoff_value(which: Tradeoff, f: f64, rs: u32) -> Result<f64> {
    match which {
        Tradeoff::Odfrf => {
            if rs == 0 {
                return Err(param("Rs must be at least 1"));
            }
            ClosedForms::dop_f_rs(f)
        }
        Tradeoff::Idfrf => idrf_limit(f, f64::from(rs)),
    }
}

/// Grid search over `Rs ∈ {1, …, 8}` with `f = R/Rs`.
pub fn minimize_over_f_rs(rate: f64, which: Tradeoff) -> Result<TradeoffOptimum> {
    if !(rate.is_finite() && rate >= 1.0) {
        return Err(param(format!("rate must be at least 1 bit/s, got {rate}")));
    }
    let mut best: Option<TradeoffOptimum> = None;
    for rs in 1..=8u32 {
        let f = rate / f64::from(rs);
        let value = tradeoff_value(which, f, rs)?;
        if best.is_none_or(|b| value < b.value) {
            best = Some(TradeoffOptimum { f, rs, value });
        }
    }
    Ok(best.expect("non-empty grid"))
}
