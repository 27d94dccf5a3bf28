//! Maximum-likelihood time-delay estimators.
//!
//! Every estimator works from a [`MeasurementRecord`] alone; none of them
//! needs the source spectrum. The family, from most to least rigorous:
//!
//! * [`solve_exact`]: root of the likelihood equation.
//! * [`solve_quartic`]: root of its quartic truncation.
//! * [`first_order`]: the linear solution −E/D.
//! * [`jwm_simplified`] and [`strubi_reference`]: balanced-port shortcuts
//!   that do not need the postselection angle.
//! * [`wva_first_order`] and [`wva_mean_shift`]: unbalanced-port forms.
//!
//! Internally τ is in seconds and ω in rad/s.

mod closed_form;
mod likelihood;
mod quartic;
mod roots;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::{Port, Postselection, QwpModel, WeakValuePair};
use crate::spectrum::{MeasurementRecord, SpectralMoments};

pub use closed_form::{
    first_order, first_order_general, jwm_simplified, pointer_shift, strubi_reference,
    wva_first_order, wva_mean_shift, wva_mean_shift_estimate, JWM_SIGN,
};
pub use likelihood::{
    likelihood_equation_residual, log_likelihood, log_likelihood_grid, score, solve_exact, ExactOptions,
    LikelihoodForm, DEFAULT_BRACKET, DEFAULT_TOLERANCE,
};
pub use quartic::{
    estimate_quartic, quartic_coefficients, quartic_coefficients_with, real_roots, solve_quartic,
    DCoefficient, QuarticCoefficients, QuarticForm,
};

/// Estimator identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Quartic,
    FirstOrder,
    JwmSimplified,
    StrubiReference,
    WvaFirstOrder,
    WvaMeanShift,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Exact,
        Method::Quartic,
        Method::FirstOrder,
        Method::JwmSimplified,
        Method::StrubiReference,
        Method::WvaFirstOrder,
        Method::WvaMeanShift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Quartic => "quartic",
            Method::FirstOrder => "first_order",
            Method::JwmSimplified => "jwm_simplified",
            Method::StrubiReference => "strubi_reference",
            Method::WvaFirstOrder => "wva_first_order",
            Method::WvaMeanShift => "wva_mean_shift",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator '{s}'")))
    }
}

/// Solver and record diagnostics attached to an estimate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Likelihood-equation value at the estimate (rad/s).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub likelihood_residual: Option<f64>,
    /// Final bracket width of the root search (s).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub port_probabilities: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub moments_used: Vec<SpectralMoments>,
    /// Real roots of the quartic (s), when that solver ran.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub candidate_roots: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub tau_hat: f64,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl EstimationResult {
    pub(crate) fn new(tau_hat: f64, method: Method, diagnostics: Diagnostics) -> Result<Self> {
        if !tau_hat.is_finite() {
            return Err(Error::Model(format!("{method} produced a non-finite estimate")));
        }
        Ok(Self {
            tau_hat,
            method,
            diagnostics,
        })
    }
}

/// Weak values the estimators assume for each bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeakValueModel {
    /// Same weak values at every frequency.
    Constant(WeakValuePair),
    /// Re-evaluated per bin, for a dispersive quarter-wave plate.
    Postselection(Postselection),
}

impl WeakValueModel {
    /// Ideal quarter-wave plate at postselection angle `phi`.
    pub fn ideal(phi: f64) -> Result<Self> {
        Ok(WeakValueModel::Constant(crate::polarization::ideal_weak_values(phi)?))
    }

    pub fn for_plate(phi: f64, qwp: QwpModel) -> Result<Self> {
        let ps = Postselection::new(phi, qwp)?;
        if ps.is_achromatic() {
            Ok(WeakValueModel::Constant(ps.weak_values(0.0)?))
        } else {
            Ok(WeakValueModel::Postselection(ps))
        }
    }

    pub fn at(&self, omega: f64) -> Result<WeakValuePair> {
        match self {
            WeakValueModel::Constant(w) => Ok(*w),
            WeakValueModel::Postselection(ps) => ps.weak_values(omega),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, WeakValueModel::Constant(_))
    }

    /// Exchanges the port labels.
    pub fn swapped(&self) -> SwappedModel {
        SwappedModel(*self)
    }
}

/// A [`WeakValueModel`] with its port labels exchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwappedModel(WeakValueModel);

/// Anything that yields a weak-value pair per frequency.
pub trait WeakValueSource {
    fn pair_at(&self, omega: f64) -> Result<WeakValuePair>;
}

impl WeakValueSource for WeakValueModel {
    fn pair_at(&self, omega: f64) -> Result<WeakValuePair> {
        self.at(omega)
    }
}

impl WeakValueSource for SwappedModel {
    fn pair_at(&self, omega: f64) -> Result<WeakValuePair> {
        Ok(self.0.at(omega)?.swapped())
    }
}

/// Per-bin data shared by the likelihood-based estimators: sub-normalized
/// weights Q_j, bin frequency, and |A_wj|², Im A_wj.
#[derive(Debug, Clone)]
pub(crate) struct Bins {
    pub omega: Vec<f64>,
    pub q: [Vec<f64>; 2],
    pub abs2: [Vec<f64>; 2],
    pub im: [Vec<f64>; 2],
}

impl Bins {
    pub fn new(record: &MeasurementRecord, model: &impl WeakValueSource) -> Result<Self> {
        let total = record.total();
        if !(total > 0.0) {
            return Err(Error::Degenerate("record has no events".into()));
        }
        let omegas = record.port1().omegas();
        let w1 = record.port(Port::One).weights();
        let w2 = record.port(Port::Two).weights();
        let mut bins = Bins {
            omega: Vec::with_capacity(omegas.len()),
            q: [Vec::new(), Vec::new()],
            abs2: [Vec::new(), Vec::new()],
            im: [Vec::new(), Vec::new()],
        };
        for ((&o, &a), &b) in omegas.iter().zip(w1).zip(w2) {
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let pair = model.pair_at(o)?;
            if !pair.is_finite() {
                return Err(Error::SingularWeakValue(format!("non-finite weak value at omega {o}")));
            }
            bins.omega.push(o);
            bins.q[0].push(a / total);
            bins.q[1].push(b / total);
            bins.abs2[0].push(pair.aw1.norm_sqr());
            bins.abs2[1].push(pair.aw2.norm_sqr());
            bins.im[0].push(pair.aw1.im);
            bins.im[1].push(pair.aw2.im);
        }
        Ok(bins)
    }

    pub fn max_omega(&self) -> f64 {
        self.omega.iter().cloned().fold(0.0, f64::max)
    }
}

fn record_diagnostics(record: &MeasurementRecord) -> Result<Diagnostics> {
    Ok(Diagnostics {
        port_probabilities: Some(record.port_probabilities()?),
        moments_used: vec![record.moments(Port::One)?, record.moments(Port::Two)?],
        ..Diagnostics::default()
    })
}

/// Runs all seven estimators on a record.
///
/// `phi` is the assumed postselection angle and `qwp` the assumed plate;
/// only [`Method::Exact`] and [`Method::Quartic`] use a dispersive plate
/// model, the closed forms always take ideal weak values.
pub fn estimate_all(
    record: &MeasurementRecord,
    phi: f64,
    qwp: QwpModel,
) -> Vec<(Method, Result<EstimationResult>)> {
    Method::ALL
        .into_iter()
        .map(|m| (m, estimate(record, m, phi, qwp)))
        .collect()
}

/// Runs one estimator with default settings.
pub fn estimate(
    record: &MeasurementRecord,
    method: Method,
    phi: f64,
    qwp: QwpModel,
) -> Result<EstimationResult> {
    match method {
        Method::Exact => {
            let model = WeakValueModel::for_plate(phi, qwp)?;
            solve_exact(record, &model, &ExactOptions::default())
        }
        Method::Quartic => {
            let model = WeakValueModel::for_plate(phi, qwp)?;
            estimate_quartic(record, &model, QuarticForm::Published)
        }
        Method::FirstOrder => first_order(record, phi),
        Method::JwmSimplified => jwm_simplified(record, None),
        Method::StrubiReference => strubi_reference(record, None),
        Method::WvaFirstOrder => wva_first_order(record, phi, None),
        Method::WvaMeanShift => wva_mean_shift_estimate(record, phi, None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        assert!("nope".parse::<Method>().is_err());
    }

    #[test]
    fn non_finite_estimate_is_rejected() {
        assert!(EstimationResult::new(f64::NAN, Method::Exact, Diagnostics::default()).is_err());
    }
}
