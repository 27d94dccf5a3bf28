//! Log-likelihood of a two-port record and the likelihood-equation solver.

use log::warn;

use super::roots::brent;
use super::{record_diagnostics, Bins, EstimationResult, Method, WeakValueSource};
use crate::error::{Error, Result};
use crate::spectrum::MeasurementRecord;

/// Default search interval for the delay, seconds.
pub const DEFAULT_BRACKET: (f64, f64) = (-1e-15, 1e-15);

/// Default root tolerance, seconds.
pub const DEFAULT_TOLERANCE: f64 = 1e-21;

// Smallest nonzero delay resolved by the candidate scan.
const SCAN_FLOOR_EXPONENT: f64 = -24.0;

/// Which form of the likelihood equation to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LikelihoodForm {
    /// ∂L/∂g with the exact trigonometric ζ.
    #[default]
    Full,
    /// Second-order expansion in gω, valid only while |A_w|gω ≪ 1.
    WeakExpansion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactOptions {
    pub bracket: (f64, f64),
    pub tol: f64,
    pub form: LikelihoodForm,
    /// Number of ×10 bracket expansions tried when no root is found.
    pub max_expansions: usize,
    /// Density of the logarithmic candidate scan.
    pub points_per_decade: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            bracket: DEFAULT_BRACKET,
            tol: DEFAULT_TOLERANCE,
            form: LikelihoodForm::Full,
            max_expansions: 3,
            points_per_decade: 150,
        }
    }
}

impl Bins {
    pub(crate) fn log_likelihood(&self, g: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &o) in self.omega.iter().enumerate() {
            let (s, c) = (g * o).sin_cos();
            for j in 0..2 {
                let q = self.q[j][i];
                if q == 0.0 {
                    continue;
                }
                let z = c * c + s * s * self.abs2[j][i] + 2.0 * s * c * self.im[j][i];
                if !(z > 0.0) {
                    return f64::NEG_INFINITY;
                }
                acc += q * z.ln();
            }
        }
        acc
    }

    /// Exact score ∂L/∂g. Infinite or NaN at a pole where ζ vanishes.
    pub(crate) fn score(&self, g: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &o) in self.omega.iter().enumerate() {
            let (s, c) = (g * o).sin_cos();
            let sin2 = 2.0 * s * c;
            let cos2 = c * c - s * s;
            for j in 0..2 {
                let q = self.q[j][i];
                if q == 0.0 {
                    continue;
                }
                let (a2, im) = (self.abs2[j][i], self.im[j][i]);
                let z = c * c + s * s * a2 + sin2 * im;
                acc += q * o * (sin2 * (a2 - 1.0) + 2.0 * cos2 * im) / z;
            }
        }
        acc
    }

    /// Weak-regime likelihood equation. NaN where a denominator is not
    /// positive, i.e. outside the region where the expansion is meaningful.
    pub(crate) fn weak_residual(&self, g: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &o) in self.omega.iter().enumerate() {
            for j in 0..2 {
                let q = self.q[j][i];
                if q == 0.0 {
                    continue;
                }
                let (m, im) = (self.abs2[j][i] - 1.0, self.im[j][i]);
                let go = g * o;
                let den = m * go * go + 2.0 * im * go + 1.0;
                if !(den > 0.0) {
                    return f64::NAN;
                }
                let num = -2.0 * im * o * go * go + m * o * go + im * o;
                acc += q * num / den;
            }
        }
        acc
    }

    fn residual(&self, form: LikelihoodForm, g: f64) -> f64 {
        match form {
            LikelihoodForm::Full => self.score(g),
            LikelihoodForm::WeakExpansion => self.weak_residual(g),
        }
    }
}

/// L(g) = Σ_j Σ_bins Q_j log ζ_j(ω, g), the g-dependent part of the record
/// log-likelihood. The port overlaps and the source spectrum only add a
/// constant, so they are omitted. Returns −∞ when a bin with events has zero
/// model probability.
pub fn log_likelihood(g: f64, record: &MeasurementRecord, model: &impl WeakValueSource) -> Result<f64> {
    Ok(Bins::new(record, model)?.log_likelihood(g))
}

/// [`log_likelihood`] at every point of `grid`, sharing one pass over the
/// record.
pub fn log_likelihood_grid(
    grid: &[f64],
    record: &MeasurementRecord,
    model: &impl WeakValueSource,
) -> Result<Vec<f64>> {
    let bins = Bins::new(record, model)?;
    Ok(grid.iter().map(|&g| bins.log_likelihood(g)).collect())
}

/// Exact likelihood equation ∂L/∂g.
pub fn score(g: f64, record: &MeasurementRecord, model: &impl WeakValueSource) -> Result<f64> {
    Ok(Bins::new(record, model)?.score(g))
}

/// Left side of the weak-regime likelihood equation
/// Σ_j Σ Q_j [−2 Im A ω³g² + (|A|²−1)ω²g + Im A ω] / [(|A|²−1)ω²g² + 2 Im A gω + 1].
pub fn likelihood_equation_residual(
    g: f64,
    record: &MeasurementRecord,
    model: &impl WeakValueSource,
) -> Result<f64> {
    let bins = Bins::new(record, model)?;
    let max_aw = bins
        .abs2
        .iter()
        .flatten()
        .cloned()
        .fold(1.0, f64::max)
        .sqrt();
    let strength = g.abs() * bins.max_omega() * max_aw;
    if strength > 0.1 {
        warn!("|A_w| g omega reaches {strength:.3}; the weak-regime expansion is unreliable");
    }
    let r = bins.weak_residual(g);
    if r.is_nan() {
        return Err(Error::Model(format!(
            "likelihood equation denominator is not positive at g = {g:e} s"
        )));
    }
    Ok(r)
}

fn scan_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    if lo < 0.0 && hi > 0.0 {
        pts.push(0.0);
    }
    let top = lo.abs().max(hi.abs()).log10();
    let n = ((top - SCAN_FLOOR_EXPONENT) * per_decade as f64).ceil() as usize;
    for k in 0..=n {
        let v = 10f64.powf(SCAN_FLOOR_EXPONENT + k as f64 / per_decade as f64);
        for x in [v, -v] {
            if x > lo && x < hi {
                pts.push(x);
            }
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

/// Maximum-likelihood delay: the root of the likelihood equation with the
/// highest likelihood.
///
/// The bracket is scanned on a grid that is logarithmic in |g|; every
/// downward zero crossing (a local maximum of L) is refined with Brent's
/// method, and the candidate with the largest exact log-likelihood wins.
/// When the bracket holds no maximum it is widened ×10 up to
/// `max_expansions` times. Weak values may depend on frequency.
pub fn solve_exact(
    record: &MeasurementRecord,
    model: &impl WeakValueSource,
    opts: &ExactOptions,
) -> Result<EstimationResult> {
    let (mut lo, mut hi) = opts.bracket;
    if !(lo < hi) || !(opts.tol > 0.0) {
        return Err(Error::domain(format!(
            "need lo < hi and tol > 0, got [{lo}, {hi}] and {}",
            opts.tol
        )));
    }
    let bins = Bins::new(record, model)?;
    let f = |g: f64| bins.residual(opts.form, g);

    let mut tried = (lo, hi);
    for _ in 0..=opts.max_expansions {
        tried = (lo, hi);
        let grid = scan_grid(lo, hi, opts.points_per_decade.max(1));
        let values: Vec<f64> = grid.iter().map(|&g| f(g)).collect();

        let mut best: Option<(f64, super::roots::Root)> = None;
        for k in 0..grid.len() {
            let candidate = if values[k] == 0.0 {
                Some(super::roots::Root {
                    x: grid[k],
                    fx: 0.0,
                    iterations: 0,
                    bracket_width: 0.0,
                })
            } else if k + 1 < grid.len() && values[k] > 0.0 && values[k + 1] < 0.0 {
                brent(f, grid[k], grid[k + 1], opts.tol, 200)
            } else {
                None
            };
            if let Some(root) = candidate {
                let ll = bins.log_likelihood(root.x);
                if best.as_ref().map_or(true, |(b, _)| ll > *b) {
                    best = Some((ll, root));
                }
            }
        }

        if let Some((_, root)) = best {
            let mut diagnostics = record_diagnostics(record)?;
            diagnostics.likelihood_residual = Some(root.fx);
            diagnostics.bracket_width = Some(root.bracket_width);
            diagnostics.iterations = Some(root.iterations);
            return EstimationResult::new(root.x, Method::Exact, diagnostics);
        }
        lo *= if lo < 0.0 { 10.0 } else { 0.1 };
        hi *= if hi > 0.0 { 10.0 } else { 0.1 };
    }
    let (lo, hi) = tried;
    Err(Error::Bracketing {
        lo,
        hi,
        residual_lo: f(lo),
        residual_hi: f(hi),
    })
}
