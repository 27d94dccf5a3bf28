//! Closed-form estimators built from spectral moments.

use log::warn;

use super::{record_diagnostics, Bins, EstimationResult, Method, WeakValueSource};
use super::quartic::{DCoefficient, QuarticForm};
use crate::error::{Error, Result};
use crate::polarization::{ideal_weak_values, Port};
use crate::spectrum::MeasurementRecord;

/// Sign fixed against the forward model: as printed, the balanced-port
/// formula returns −τ to first order.
pub const JWM_SIGN: f64 = -1.0;

fn check_phi(phi: f64) -> Result<()> {
    if phi > 0.0 && phi < std::f64::consts::PI {
        Ok(())
    } else {
        Err(Error::domain(format!("postselection angle {phi} outside (0, pi)")))
    }
}

fn check_variance(variance: f64) -> Result<f64> {
    if variance > 0.0 && variance.is_finite() {
        Ok(variance)
    } else {
        Err(Error::domain(format!("spectral variance must be positive, got {variance}")))
    }
}

// First moments about the pooled mean frequency. Differences of port means
// taken this way avoid cancelling two numbers of size ω₀.
struct Centered {
    reference: f64,
    p: [f64; 2],
    c: [f64; 2],
}

impl Centered {
    fn new(record: &MeasurementRecord) -> Result<Self> {
        let total = record.total();
        if !(total > 0.0) {
            return Err(Error::Degenerate("record has no events".into()));
        }
        let omegas = record.port1().omegas();
        let w = [record.port1().weights(), record.port2().weights()];
        let reference = omegas
            .iter()
            .enumerate()
            .map(|(i, o)| (w[0][i] + w[1][i]) * o)
            .sum::<f64>()
            / total;
        let mut p = [0.0; 2];
        let mut c = [0.0; 2];
        for j in 0..2 {
            p[j] = w[j].iter().sum::<f64>() / total;
            c[j] = omegas.iter().zip(w[j]).map(|(o, q)| q * (o - reference)).sum::<f64>() / total;
        }
        Ok(Self { reference, p, c })
    }

    /// ω̄_j − reference.
    fn offset(&self, port: Port) -> Result<f64> {
        let j = port.index();
        if self.p[j] > 0.0 {
            Ok(self.c[j] / self.p[j])
        } else {
            Err(Error::Degenerate(format!("port {} recorded no events", j + 1)))
        }
    }
}

fn finish(tau: f64, method: Method, record: &MeasurementRecord) -> Result<EstimationResult> {
    EstimationResult::new(tau, method, record_diagnostics(record)?)
}

/// τ̂ = [sin²(φ/2)⟨ω⟩₁ − cos²(φ/2)⟨ω⟩₂] / [tan(φ/2)⟨ω²⟩₁ + cot(φ/2)⟨ω²⟩₂]
/// with sub-normalized moments.
pub fn first_order(record: &MeasurementRecord, phi: f64) -> Result<EstimationResult> {
    check_phi(phi)?;
    let m1 = record.moments(Port::One)?;
    let m2 = record.moments(Port::Two)?;
    let (s, c) = (phi / 2.0).sin_cos();
    let t = s / c;
    let num = s * s * m1.m1 - c * c * m2.m1;
    let den = t * m1.m2 + m2.m2 / t;
    if den == 0.0 {
        return Err(Error::Degenerate("first-order denominator vanishes".into()));
    }
    finish(num / den, Method::FirstOrder, record)
}

/// −E/D of the quartic with arbitrary, possibly frequency-dependent, weak
/// values: Σ Im A ⟨ω⟩ / Σ [2(Im A)² − |A|² + 1]⟨ω²⟩ as bin sums.
pub fn first_order_general(
    record: &MeasurementRecord,
    model: &impl WeakValueSource,
) -> Result<EstimationResult> {
    let q = Bins::new(record, model)?.quartic(QuarticForm::Published, DCoefficient::Consistent);
    if q.d == 0.0 {
        return Err(Error::Degenerate("first-order denominator vanishes".into()));
    }
    finish(-q.e / q.d, Method::FirstOrder, record)
}

fn warn_unbalanced(p: [f64; 2]) {
    if !(0.3..=0.7).contains(&p[0]) {
        warn!(
            "port probabilities {:.3}/{:.3} are far from balanced; the simplified estimator assumes phi near pi/2",
            p[0], p[1]
        );
    }
}

/// Balanced-port estimator that needs no postselection angle:
/// `JWM_SIGN · (P_f1⟨ω⟩₂ − P_f2⟨ω⟩₁) / Δω²`.
///
/// `variance` defaults to the variance of the pooled port spectra, which
/// equals the source variance for any lossless postselection.
pub fn jwm_simplified(record: &MeasurementRecord, variance: Option<f64>) -> Result<EstimationResult> {
    let p = record.port_probabilities()?;
    warn_unbalanced(p);
    let var = check_variance(match variance {
        Some(v) => v,
        None => record.pooled_variance()?,
    })?;
    // P_f1⟨ω⟩₂ − P_f2⟨ω⟩₁, with the ω_ref·P_f1·P_f2 terms cancelled exactly.
    let m = Centered::new(record)?;
    let tau = JWM_SIGN * (m.p[0] * m.c[1] - m.p[1] * m.c[0]) / var;
    finish(tau, Method::JwmSimplified, record)
}

/// Earlier balanced-port formula, kept for comparison:
/// ¼[(ω̄₂ − ω̄₁)/Δω² − (P_f2 − P_f1)/Δω] with normalized means.
pub fn strubi_reference(record: &MeasurementRecord, variance: Option<f64>) -> Result<EstimationResult> {
    let p = record.port_probabilities()?;
    warn_unbalanced(p);
    let var = check_variance(match variance {
        Some(v) => v,
        None => record.pooled_variance()?,
    })?;
    let m = Centered::new(record)?;
    let shift = m.offset(Port::Two)? - m.offset(Port::One)?;
    let tau = 0.25 * (shift / var - (p[1] - p[0]) / var.sqrt());
    finish(tau, Method::StrubiReference, record)
}

// ω̄₂ − ω₀ and ω₀, with ω₀ defaulting to ω̄₁.
fn shift_and_center(record: &MeasurementRecord, omega0: Option<f64>) -> Result<(f64, f64)> {
    let m = Centered::new(record)?;
    let a2 = m.offset(Port::Two)?;
    match omega0 {
        Some(w) if w > 0.0 && w.is_finite() => Ok((a2 - (w - m.reference), w)),
        Some(w) => Err(Error::domain(format!("center frequency must be positive, got {w}"))),
        None => {
            let a1 = m.offset(Port::One)?;
            Ok((a2 - a1, m.reference + a1))
        }
    }
}

/// Small-φ form of the first-order estimator with normalized moments:
/// (φ/2)(ω̄₁ − ω̄₂) / (⟨ω²⟩̄₁ + ⟨ω²⟩̄₂ − 2ω₀ω̄₂). `omega0` defaults to ω̄₁.
pub fn wva_first_order(
    record: &MeasurementRecord,
    phi: f64,
    omega0: Option<f64>,
) -> Result<EstimationResult> {
    check_phi(phi)?;
    if phi > 0.2 {
        warn!("phi = {phi} is not small; the amplification-regime formula is unreliable");
    }
    let m1 = record.moments(Port::One)?;
    let m2 = record.moments(Port::Two)?;
    let (_, w0) = shift_and_center(record, omega0)?;
    let c = Centered::new(record)?;
    let split = c.offset(Port::One)? - c.offset(Port::Two)?;
    let den = m1.m2_bar()? + m2.m2_bar()? - 2.0 * w0 * m2.m1_bar()?;
    if den == 0.0 {
        return Err(Error::Degenerate("denominator vanishes".into()));
    }
    finish(0.5 * phi * split / den, Method::WvaFirstOrder, record)
}

/// τ̂ = δω / (2 Im A_w2 Δω²).
pub fn wva_mean_shift(delta_omega: f64, im_aw2: f64, variance: f64) -> Result<f64> {
    if im_aw2 == 0.0 || !im_aw2.is_finite() {
        return Err(Error::domain("imaginary part of the weak value must be nonzero"));
    }
    let var = check_variance(variance)?;
    Ok(delta_omega / (2.0 * im_aw2 * var))
}

/// Shift of the amplified port's mean frequency, ω̄₂ − ω₀. `omega0`
/// defaults to ω̄₁.
pub fn pointer_shift(record: &MeasurementRecord, omega0: Option<f64>) -> Result<f64> {
    Ok(shift_and_center(record, omega0)?.0)
}

/// Mean-shift estimate from a record, with Im A_w2 = −cot(φ/2) and the
/// pooled spectral variance.
pub fn wva_mean_shift_estimate(
    record: &MeasurementRecord,
    phi: f64,
    omega0: Option<f64>,
) -> Result<EstimationResult> {
    let aw2 = ideal_weak_values(phi)?.aw2;
    let shift = pointer_shift(record, omega0)?;
    let tau = wva_mean_shift(shift, aw2.im, record.pooled_variance()?)?;
    finish(tau, Method::WvaMeanShift, record)
}
