//! JSON run configuration. Physical quantities carry their unit in the key
//! name; unknown keys are rejected and missing keys take the defaults below.
//!
//! ```json
//! {
//!   "source": { "shape": "gaussian", "center_nm": 780, "fwhm_nm": 17.6,
//!               "min_nm": 690, "max_nm": 900, "step_nm": 0.1 },
//!   "phi_actual_rad": 1.6417963,
//!   "phi_assumed_rad": null,
//!   "qwp": { "model": "ideal" },
//!   "photons": 10000000,
//!   "noise": "multinomial",
//!   "seed": 0,
//!   "tau_fs": 0.01,
//!   "theta_rad": null,
//!   "plates": { "h1_mm": null, "h2_mm": 1.0, "pivot": "azimuth",
//!               "dispersion": { "model": "sellmeier", ... } }
//! }
//! ```
//!
//! `phi_assumed_rad` defaults to `phi_actual_rad` and `h1_mm` to a zero-order
//! half-wave pair at the source center. Give at most one of `tau_fs` and
//! `theta_rad`; with `theta_rad` the delay follows from the plate pivot.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::QwpModel;
use crate::simulator::{ExperimentConfig, NoiseModel, SourceConfig, DEFAULT_PHOTONS, PHI_JWM};
use crate::spectrum::wavelength_to_angular_frequency;
use crate::waveplate::{pivot_delay, IndexModel, PivotAxis, PlateStack};

/// Quarter-wave plate in front of the beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum QwpConfig {
    #[default]
    Ideal,
    /// Quarter wave only at `design_nm`.
    Dispersive {
        #[serde(default = "default_center_nm")]
        design_nm: f64,
    },
    Absent,
}

fn default_center_nm() -> f64 {
    780.0
}

impl QwpConfig {
    pub fn model(&self) -> Result<QwpModel> {
        match *self {
            QwpConfig::Ideal => Ok(QwpModel::Ideal),
            QwpConfig::Absent => Ok(QwpModel::Absent),
            QwpConfig::Dispersive { design_nm } => {
                QwpModel::dispersive_at(wavelength_to_angular_frequency(design_nm)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlateConfig {
    pub h1_mm: Option<f64>,
    pub h2_mm: f64,
    pub pivot: PivotAxis,
    pub dispersion: IndexModel,
}

impl Default for PlateConfig {
    fn default() -> Self {
        Self {
            h1_mm: None,
            h2_mm: 1.0,
            pivot: PivotAxis::Azimuth,
            dispersion: IndexModel::quartz(),
        }
    }
}

impl PlateConfig {
    pub fn stack(&self, center_nm: f64) -> Result<PlateStack> {
        match self.h1_mm {
            Some(h1) => PlateStack::new(h1 * 1e-3, self.h2_mm * 1e-3, self.dispersion),
            None => PlateStack::zero_order_half_wave(self.h2_mm * 1e-3, center_nm * 1e-9, self.dispersion),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub source: SourceConfig,
    pub phi_actual_rad: f64,
    pub phi_assumed_rad: Option<f64>,
    pub qwp: QwpConfig,
    /// 0 selects noise-free expected weights.
    pub photons: u64,
    pub noise: NoiseModel,
    pub seed: u64,
    pub tau_fs: Option<f64>,
    pub theta_rad: Option<f64>,
    pub plates: PlateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            source: SourceConfig::default(),
            phi_actual_rad: PHI_JWM,
            phi_assumed_rad: None,
            qwp: QwpConfig::Ideal,
            photons: DEFAULT_PHOTONS,
            noise: NoiseModel::Multinomial,
            seed: 0,
            tau_fs: None,
            theta_rad: None,
            plates: PlateConfig::default(),
        }
    }
}

/// A validated run: simulator settings plus the plate pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedRun {
    pub experiment: ExperimentConfig,
    pub stack: PlateStack,
    pub axis: PivotAxis,
}

impl RunConfig {
    pub fn from_json(text: &str, name: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format {
            path: name.to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        let invalid = |e: Error| Error::Config(e.to_string());
        let stack = self.plates.stack(self.source.center_nm).map_err(invalid)?;
        let tau_true = match (self.tau_fs, self.theta_rad) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give tau_fs or theta_rad, not both".into()))
            }
            (Some(t), None) => t * 1e-15,
            (None, Some(theta)) => pivot_delay(theta, &stack, self.source.center_nm * 1e-9, self.plates.pivot)?,
            (None, None) => 0.0,
        };
        let experiment = ExperimentConfig {
            source: self.source,
            phi_actual: self.phi_actual_rad,
            phi_assumed: self.phi_assumed_rad.unwrap_or(self.phi_actual_rad),
            qwp: self.qwp.model().map_err(invalid)?,
            photons: self.photons,
            noise: self.noise,
            seed: self.seed,
            tau_true,
        };
        experiment.validate()?;
        Ok(ResolvedRun {
            experiment,
            stack,
            axis: self.plates.pivot,
        })
    }

    /// The configuration with every derived default written out, for
    /// reproducibility sidecars.
    pub fn resolved(&self) -> Result<Self> {
        let run = self.resolve()?;
        let mut out = *self;
        out.phi_assumed_rad = Some(run.experiment.phi_assumed);
        out.plates.h1_mm = Some(run.stack.h1 * 1e3);
        if self.theta_rad.is_none() {
            out.tau_fs = Some(run.experiment.tau_true * 1e15);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_document_takes_defaults() {
        let c = RunConfig::from_json("{}", "t").unwrap();
        assert_eq!(c, RunConfig::default());
        let r = c.resolve().unwrap();
        assert_eq!(r.experiment.source.center_nm, 780.0);
        assert_eq!(r.experiment.source.fwhm_nm, 17.6);
        assert_eq!(r.experiment.phi_assumed, PHI_JWM);
        assert_eq!(r.experiment.tau_true, 0.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        for doc in [
            r#"{"tau": 1}"#,
            r#"{"source": {"center": 780}}"#,
            r#"{"qwp": {"model": "dispersive", "tau0": 1}}"#,
            r#"{"plates": {"dispersion": {"model": "constant", "n_o": 1.5, "n_e": 1.6, "n": 1}}}"#,
        ] {
            let e = RunConfig::from_json(doc, "t").unwrap_err();
            assert!(e.is_input_error(), "{doc}: {e}");
        }
    }

    #[test]
    fn parse_error_has_line() {
        match RunConfig::from_json("{\n\"seed\": 1,\n\"photons\": -3\n}", "cfg.json").unwrap_err() {
            Error::Format { line, path, .. } => {
                assert_eq!(line, 3);
                assert_eq!(path, "cfg.json");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn theta_sets_delay_from_pivot() {
        let c = RunConfig::from_json(r#"{"theta_rad": 0.03}"#, "t").unwrap();
        let r = c.resolve().unwrap();
        let expect = pivot_delay(0.03, &r.stack, 780e-9, PivotAxis::Azimuth).unwrap();
        assert_eq!(r.experiment.tau_true, expect);
        let both = RunConfig::from_json(r#"{"theta_rad": 0.03, "tau_fs": 1}"#, "t").unwrap();
        assert!(both.resolve().is_err());
    }

    #[test]
    fn dispersive_plate_and_constant_indices() {
        let doc = r#"{
            "qwp": {"model": "dispersive"},
            "tau_fs": 0.01,
            "plates": {"h1_mm": 2.0, "h2_mm": 1.5,
                       "dispersion": {"model": "constant", "n_o": 1.544, "n_e": 1.553}}
        }"#;
        let r = RunConfig::from_json(doc, "t").unwrap().resolve().unwrap();
        match r.experiment.qwp {
            QwpModel::Dispersive { tau0 } => {
                let w0 = wavelength_to_angular_frequency(780.0).unwrap();
                assert_relative_eq!(tau0 * w0, std::f64::consts::FRAC_PI_4, max_relative = 1e-14);
            }
            q => panic!("{q:?}"),
        }
        assert_eq!(r.stack.h1, 2e-3);
        assert_relative_eq!(r.experiment.tau_true, 1e-17, max_relative = 1e-14);
    }

    #[test]
    fn resolved_round_trips() {
        let c = RunConfig { seed: 17, tau_fs: Some(0.02), ..RunConfig::default() };
        let full = c.resolved().unwrap();
        let json = serde_json::to_string_pretty(&full).unwrap();
        let back = RunConfig::from_json(&json, "t").unwrap();
        assert_eq!(back, full);
        assert_eq!(back.resolve().unwrap(), full.resolve().unwrap());
        let (a, b) = (back.resolve().unwrap(), c.resolve().unwrap());
        assert_eq!(a.experiment, b.experiment);
        assert_relative_eq!(a.stack.h1, b.stack.h1, max_relative = 1e-15);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let c = RunConfig { phi_actual_rad: 4.0, ..RunConfig::default() };
        assert!(matches!(c.resolve().unwrap_err(), Error::Config(_)));
        let mut bad_plate = RunConfig::default();
        bad_plate.plates.h2_mm = -1.0;
        assert!(matches!(bad_plate.resolve().unwrap_err(), Error::Config(_)));
    }
}
