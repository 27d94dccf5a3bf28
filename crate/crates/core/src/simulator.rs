//! Synthetic experiments: noise-free and shot-noise records, pivot-angle
//! sweeps, Monte Carlo SNR and the analytic WVA precision formulas.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate, first_order, Method};
use crate::polarization::{Port, Postselection, QwpModel};
use crate::spectrum::{
    port_distribution, wavelength_to_angular_frequency, LineShape, MeasurementRecord,
    RecordMetadata, Spectrum,
};
use crate::waveplate::{pivot_delay, PivotAxis, PlateStack};

/// Default number of detected events per simulated record.
pub const DEFAULT_PHOTONS: u64 = 10_000_000;

/// Smallest trial count accepted by [`snr_sweep`].
pub const MIN_TRIALS: usize = 30;

/// Postselection angle of the balanced (JWM) configuration, π/2 + 0.071.
pub const PHI_JWM: f64 = std::f64::consts::FRAC_PI_2 + 0.071;

/// Postselection angle of the WVA configuration.
pub const PHI_WVA: f64 = 0.03;

/// Source line on a uniform wavelength grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceConfig {
    pub shape: LineShape,
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub min_nm: f64,
    pub max_nm: f64,
    pub step_nm: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            shape: LineShape::Gaussian,
            center_nm: 780.0,
            fwhm_nm: 17.6,
            min_nm: 690.0,
            max_nm: 900.0,
            step_nm: 0.1,
        }
    }
}

impl SourceConfig {
    pub fn spectrum(&self) -> Result<Spectrum> {
        Spectrum::line(
            self.shape,
            self.center_nm,
            self.fwhm_nm,
            self.min_nm,
            self.max_nm,
            self.step_nm,
        )
    }

    /// Angular frequency of the line center, the ω₀ in α = ω₀τ.
    pub fn omega0(&self) -> Result<f64> {
        wavelength_to_angular_frequency(self.center_nm)
    }
}

/// How detected events are distributed over the (bin × port) cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Exactly `photons` events, multinomial over all cells.
    #[default]
    Multinomial,
    /// Independent Poisson counts with mean `photons` times the cell probability.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub source: SourceConfig,
    /// Postselection angle of the simulated apparatus (rad).
    pub phi_actual: f64,
    /// Angle the estimators assume (rad).
    pub phi_assumed: f64,
    pub qwp: QwpModel,
    /// Detected events; 0 returns expected probabilities without noise.
    pub photons: u64,
    pub noise: NoiseModel,
    pub seed: u64,
    /// True delay (s).
    pub tau_true: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: SourceConfig::default(),
            phi_actual: PHI_JWM,
            phi_assumed: PHI_JWM,
            qwp: QwpModel::Ideal,
            photons: DEFAULT_PHOTONS,
            noise: NoiseModel::Multinomial,
            seed: 0,
            tau_true: 0.0,
        }
    }
}

impl ExperimentConfig {
    /// Noise-free configuration with matched angles.
    pub fn noise_free(phi: f64, qwp: QwpModel, tau_true: f64) -> Self {
        Self {
            phi_actual: phi,
            phi_assumed: phi,
            qwp,
            photons: 0,
            tau_true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pi = std::f64::consts::PI;
        for (name, phi) in [("phi_actual", self.phi_actual), ("phi_assumed", self.phi_assumed)] {
            if !(phi > 0.0 && phi < pi) {
                return Err(Error::Config(format!("{name} = {phi} must lie in (0, pi)")));
            }
        }
        if !(self.source.step_nm > 0.0) {
            return Err(Error::Config(format!(
                "grid step must be positive, got {} nm",
                self.source.step_nm
            )));
        }
        if !self.tau_true.is_finite() {
            return Err(Error::Config("tau_true must be finite".into()));
        }
        self.qwp.validate()
    }

    fn postselection(&self) -> Result<Postselection> {
        Postselection::new(self.phi_actual, self.qwp)
    }
}

/// Expected port distributions; draws from it share one forward-model pass.
#[derive(Debug, Clone)]
pub struct ExpectedRecord {
    record: MeasurementRecord,
}

impl ExpectedRecord {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let source = config.source.spectrum()?;
        let ps = config.postselection()?;
        let p1 = port_distribution(&source, config.tau_true, &ps, Port::One)?;
        let p2 = port_distribution(&source, config.tau_true, &ps, Port::Two)?;
        let record = MeasurementRecord::new(p1, p2)?.with_metadata(RecordMetadata {
            phi_nominal: Some(config.phi_actual),
            seed: None,
            qwp: Some(config.qwp),
        });
        if !(record.total() > 0.0) {
            return Err(Error::Model("postselected probabilities underflow to zero".into()));
        }
        Ok(Self { record })
    }

    pub fn record(&self) -> &MeasurementRecord {
        &self.record
    }

    /// One noisy realization with `photons` events.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        photons: u64,
        noise: NoiseModel,
        rng: &mut R,
    ) -> Result<MeasurementRecord> {
        if photons == 0 {
            return Err(Error::domain("a noisy draw needs at least one photon"));
        }
        let w1 = self.record.port1().weights();
        let w2 = self.record.port2().weights();
        let total = self.record.total();
        let n = w1.len();
        let mut counts = vec![0.0; 2 * n];
        match noise {
            NoiseModel::Multinomial => {
                // Sequential conditional binomials.
                let mut left = photons;
                let mut mass = 1.0;
                let last = 2 * n - 1;
                for (k, p) in w1.iter().chain(w2).enumerate() {
                    if left == 0 {
                        break;
                    }
                    let p = p / total;
                    let c = if k == last || p >= mass {
                        left
                    } else {
                        rng.sample(binomial(left, p / mass)?)
                    };
                    counts[k] = c as f64;
                    left -= c;
                    mass = (mass - p).max(0.0);
                }
            }
            NoiseModel::Poisson => {
                for (k, p) in w1.iter().chain(w2).enumerate() {
                    let mean = photons as f64 * p / total;
                    if mean > 0.0 {
                        let d = Poisson::new(mean)
                            .map_err(|e| Error::Model(format!("Poisson mean {mean}: {e}")))?;
                        counts[k] = rng.sample(d);
                    }
                }
            }
        }
        let events = counts.iter().sum::<f64>() as u64;
        let grid = self.record.grid_nm().to_vec();
        let q2 = counts.split_off(n);
        let record = MeasurementRecord::from_counts(
            Spectrum::new(grid.clone(), counts)?,
            Spectrum::new(grid, q2)?,
            events,
        )?;
        Ok(record.with_metadata(self.record.metadata.clone()))
    }
}

fn binomial(n: u64, p: f64) -> Result<Binomial> {
    Binomial::new(n, p.clamp(0.0, 1.0)).map_err(|e| Error::Model(format!("binomial p = {p}: {e}")))
}

/// Generator for trial `stream` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulated record for `config`. Deterministic in the seed.
pub fn simulate(config: &ExperimentConfig) -> Result<MeasurementRecord> {
    simulate_trial(config, 0)
}

/// Realization number `stream` of the experiment.
pub fn simulate_trial(config: &ExperimentConfig, stream: u64) -> Result<MeasurementRecord> {
    let expected = ExpectedRecord::new(config)?;
    if config.photons == 0 {
        return Ok(expected.record);
    }
    let mut rng = trial_rng(config.seed, stream);
    let mut record = expected.draw(config.photons, config.noise, &mut rng)?;
    record.metadata.seed = Some(config.seed);
    Ok(record)
}

/// One row of a pivot-angle sweep. Delays in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta_rad: f64,
    pub tau_theory_s: f64,
    pub tau_exact_s: f64,
    pub tau_first_order_s: f64,
    /// Present for balanced postselection only.
    pub tau_jwm_s: Option<f64>,
}

/// True when `phi` is closer to balanced than to orthogonal postselection.
pub fn is_balanced(phi: f64) -> bool {
    phi > std::f64::consts::FRAC_PI_4
}

/// Simulates and estimates one record per pivot angle.
///
/// Row k uses random stream k. The exact estimator is given the configured
/// plate model; the first-order and JWM forms assume an ideal plate.
pub fn sweep_theta(
    thetas: &[f64],
    stack: &PlateStack,
    axis: PivotAxis,
    config: &ExperimentConfig,
) -> Result<Vec<SweepRow>> {
    if thetas.is_empty() {
        return Err(Error::domain("sweep needs at least one angle"));
    }
    let lambda_m = config.source.center_nm * 1e-9;
    thetas
        .iter()
        .enumerate()
        .map(|(k, &theta)| {
            let tau = pivot_delay(theta, stack, lambda_m, axis)?;
            let cfg = ExperimentConfig {
                tau_true: tau,
                ..*config
            };
            let record = simulate_trial(&cfg, k as u64)?;
            let phi = cfg.phi_assumed;
            let exact = estimate(&record, Method::Exact, phi, cfg.qwp)?.tau_hat;
            let fo = first_order(&record, phi)?.tau_hat;
            let jwm = if is_balanced(phi) {
                Some(estimate(&record, Method::JwmSimplified, phi, QwpModel::Ideal)?.tau_hat)
            } else {
                None
            };
            Ok(SweepRow {
                theta_rad: theta,
                tau_theory_s: tau,
                tau_exact_s: exact,
                tau_first_order_s: fo,
                tau_jwm_s: jwm,
            })
        })
        .collect()
}

/// Monte Carlo signal-to-noise ratio at one (α, assumed angle) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    pub alpha: f64,
    /// 10·log₁₀(τ²/MSE); +∞ when every trial is exact.
    pub snr_db: f64,
    pub trials: usize,
    pub phi_assumed: f64,
    /// Mean estimate minus τ (s).
    pub bias_s: f64,
    /// Standard deviation of the estimates (s).
    pub std_s: f64,
}

/// SNR of the first-order estimator over `trials` shot-noise records per α.
///
/// τ = α/ω₀ with ω₀ at the line center. The records simulated for one α
/// are shared by every assumed angle. Trial t of alpha index i draws from
/// stream (i << 32) | t, so results do not depend on thread scheduling.
pub fn snr_sweep(
    alphas: &[f64],
    phi_actual: f64,
    phi_assumed: &[f64],
    trials: usize,
    config: &ExperimentConfig,
) -> Result<Vec<SnrPoint>> {
    if trials < MIN_TRIALS {
        return Err(Error::domain(format!(
            "SNR needs at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    if config.photons == 0 {
        return Err(Error::domain("SNR needs a finite photon budget"));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
        return Err(Error::domain(format!("alpha must be positive, got {a}")));
    }
    let omega0 = config.source.omega0()?;
    let mut out = Vec::with_capacity(alphas.len() * phi_assumed.len());
    for (i, &alpha) in alphas.iter().enumerate() {
        let tau = alpha / omega0;
        let cfg = ExperimentConfig {
            phi_actual,
            tau_true: tau,
            ..*config
        };
        let expected = ExpectedRecord::new(&cfg)?;
        let estimates: Vec<Vec<f64>> = (0..trials as u64)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(cfg.seed, ((i as u64) << 32) | t);
                let record = expected.draw(cfg.photons, cfg.noise, &mut rng)?;
                phi_assumed
                    .iter()
                    .map(|&phi| Ok(first_order(&record, phi)?.tau_hat))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        for (j, &phi) in phi_assumed.iter().enumerate() {
            let est: Vec<f64> = estimates.iter().map(|e| e[j]).collect();
            out.push(snr_point(alpha, tau, phi, &est));
        }
    }
    Ok(out)
}

fn snr_point(alpha: f64, tau: f64, phi_assumed: f64, estimates: &[f64]) -> SnrPoint {
    let n = estimates.len() as f64;
    let mse = estimates.iter().map(|e| (e - tau).powi(2)).sum::<f64>() / n;
    let mean = estimates.iter().sum::<f64>() / n;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    let snr_db = if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (tau * tau / mse).log10()
    };
    SnrPoint {
        alpha,
        snr_db,
        trials: estimates.len(),
        phi_assumed,
        bias_s: mean - tau,
        std_s: var.sqrt(),
    }
}

fn check_positive(pairs: &[(&str, f64)]) -> Result<()> {
    for (name, v) in pairs {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(Error::domain(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// C = λ₀Δ(δλ)/(4Δλ²). All arguments in nm.
pub fn resolution_factor(lambda0_nm: f64, delta_lambda_nm: f64, resolution_nm: f64) -> Result<f64> {
    check_positive(&[
        ("lambda0", lambda0_nm),
        ("delta_lambda", delta_lambda_nm),
        ("resolution", resolution_nm),
    ])?;
    Ok(lambda0_nm * resolution_nm / (4.0 * delta_lambda_nm * delta_lambda_nm))
}

/// Uncertainty of α from the spectrometer resolution:
/// Δα = C·(α² + β²)²/(αβ²).
pub fn wva_uncertainty(
    alpha: f64,
    beta: f64,
    lambda0_nm: f64,
    delta_lambda_nm: f64,
    resolution_nm: f64,
) -> Result<f64> {
    let c = resolution_factor(lambda0_nm, delta_lambda_nm, resolution_nm)?;
    if alpha == 0.0 || beta == 0.0 {
        return Err(Error::domain("alpha and beta must be nonzero; use alpha_min"));
    }
    let s = alpha * alpha + beta * beta;
    Ok(c * s * s / (alpha * beta * beta))
}

/// Smallest resolvable α at postselection offset ε:
/// α_min = √[(√(1 − 4C) − 2C + 1)/(2C)]·ε. Requires C < 1/4.
pub fn alpha_min(epsilon: f64, lambda0_nm: f64, delta_lambda_nm: f64, resolution_nm: f64) -> Result<f64> {
    check_positive(&[("epsilon", epsilon)])?;
    let c = resolution_factor(lambda0_nm, delta_lambda_nm, resolution_nm)?;
    if c >= 0.25 {
        return Err(Error::domain(format!("resolution factor {c} must be below 1/4")));
    }
    Ok(((((1.0 - 4.0 * c).sqrt() - 2.0 * c + 1.0) / (2.0 * c)).sqrt()) * epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::postselection_probabilities_exact;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn zero_delay_balanced_ports_are_half_source() {
        let cfg = ExperimentConfig::noise_free(FRAC_PI_2, QwpModel::Ideal, 0.0);
        let rec = simulate(&cfg).unwrap();
        let src = cfg.source.spectrum().unwrap();
        for k in 0..src.len() {
            assert_relative_eq!(rec.port1().weights()[k], 0.5 * src.weights()[k], max_relative = 1e-14);
            assert_relative_eq!(rec.port2().weights()[k], 0.5 * src.weights()[k], max_relative = 1e-14);
        }
    }

    #[test]
    fn noise_free_totals_match_quadrature() {
        let cfg = ExperimentConfig::noise_free(PHI_JWM, QwpModel::Ideal, 1e-17);
        let rec = simulate(&cfg).unwrap();
        let (p1, p2) = postselection_probabilities_exact(&cfg.source.spectrum().unwrap(), 1e-17, PHI_JWM).unwrap();
        assert!((rec.port1().total() - p1).abs() < 1e-12);
        assert!((rec.port2().total() - p2).abs() < 1e-12);
        assert!((rec.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn seeded_draws_are_reproducible() {
        let cfg = ExperimentConfig {
            photons: 100_000,
            seed: 42,
            tau_true: 1e-17,
            ..ExperimentConfig::default()
        };
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate(&ExperimentConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.total_events, Some(100_000));
        assert_eq!(a.total(), 100_000.0);
    }

    #[test]
    fn poisson_counts_are_integral() {
        let cfg = ExperimentConfig {
            photons: 50_000,
            noise: NoiseModel::Poisson,
            ..ExperimentConfig::default()
        };
        let rec = simulate(&cfg).unwrap();
        let all = rec.port1().weights().iter().chain(rec.port2().weights());
        assert!(all.clone().all(|c| c.fract() == 0.0 && *c >= 0.0));
        // Total is Poisson(5e4): within 6 standard deviations.
        assert!((rec.total() - 50_000.0).abs() < 6.0 * 50_000f64.sqrt());
    }

    #[test]
    fn multinomial_cell_frequencies() {
        let cfg = ExperimentConfig {
            photons: 1_000_000,
            phi_actual: 0.5,
            phi_assumed: 0.5,
            ..ExperimentConfig::default()
        };
        let expected = ExpectedRecord::new(&cfg).unwrap();
        let rec = simulate(&cfg).unwrap();
        let p2 = expected.record().port2().total();
        let n = 1e6;
        let sd = (n * p2 * (1.0 - p2)).sqrt();
        assert!((rec.port2().total() - n * p2).abs() < 5.0 * sd);
    }

    #[test]
    fn invalid_configs() {
        let bad_phi = ExperimentConfig { phi_actual: 0.0, ..ExperimentConfig::default() };
        assert!(simulate(&bad_phi).is_err());
        let mut bad_step = ExperimentConfig::default();
        bad_step.source.step_nm = 0.0;
        assert!(simulate(&bad_step).is_err());
        let cfg = ExperimentConfig::default();
        assert!(snr_sweep(&[0.01], 0.03, &[0.03], 10, &cfg).is_err());
        assert!(snr_sweep(&[0.0], 0.03, &[0.03], 30, &cfg).is_err());
        assert!(sweep_theta(&[], &PlateStack::default(), PivotAxis::Azimuth, &cfg).is_err());
    }

    #[test]
    fn snr_point_definition() {
        let p = snr_point(0.01, 2.0, 0.03, &[1.0, 3.0]);
        assert_relative_eq!(p.snr_db, 10.0 * 4f64.log10(), max_relative = 1e-14);
        assert_eq!(p.bias_s, 0.0);
        assert_eq!(p.std_s, 1.0);
        assert_eq!(snr_point(0.01, 2.0, 0.03, &[2.0; 30]).snr_db, f64::INFINITY);
    }

    #[test]
    fn snr_sweep_is_deterministic() {
        let cfg = ExperimentConfig { photons: 100_000, seed: 9, ..ExperimentConfig::default() };
        let a = snr_sweep(&[0.01, 0.02], PHI_WVA, &[0.03, 0.05], 30, &cfg).unwrap();
        let b = snr_sweep(&[0.01, 0.02], PHI_WVA, &[0.03, 0.05], 30, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|p| p.trials == 30));
    }

    #[test]
    fn noise_free_sweep_tracks_theory() {
        let stack = PlateStack::default();
        let cfg = ExperimentConfig::noise_free(PHI_JWM, QwpModel::Ideal, 0.0);
        let rows = sweep_theta(&[0.0, 0.02, 0.04], &stack, PivotAxis::Azimuth, &cfg).unwrap();
        assert_eq!(rows[0].tau_theory_s, 0.0);
        assert!(rows[0].tau_exact_s.abs() < 4e-28);
        for r in &rows[1..] {
            assert_relative_eq!(r.tau_exact_s, r.tau_theory_s, max_relative = 1e-3);
            assert!(r.tau_jwm_s.is_some());
        }
    }

    #[test]
    fn alpha_min_paper_value() {
        let a = alpha_min(1.0, 780.0, 17.6, 0.1).unwrap();
        assert!((a - 3.7).abs() < 0.05, "{a}");
        assert_relative_eq!(alpha_min(0.0027, 780.0, 17.6, 0.1).unwrap(), 0.0027 * a, max_relative = 1e-14);
        assert!(alpha_min(1.0, 780.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn wva_uncertainty_scalings() {
        let d = wva_uncertainty(0.01, 0.02, 780.0, 17.6, 0.1).unwrap();
        assert_relative_eq!(wva_uncertainty(0.01, 0.02, 780.0, 17.6, 0.2).unwrap(), 2.0 * d, max_relative = 1e-14);
        assert_relative_eq!(wva_uncertainty(0.01, 0.02, 780.0, 35.2, 0.1).unwrap(), d / 4.0, max_relative = 1e-14);
        assert!(wva_uncertainty(0.0, 0.02, 780.0, 17.6, 0.1).is_err());
        assert!(wva_uncertainty(0.01, 0.0, 780.0, 17.6, 0.1).is_err());
    }

    #[test]
    fn wva_uncertainty_minimized_near_beta_equal_alpha() {
        let alpha = 0.01;
        let (best, _) = (1..=4000)
            .map(|k| {
                let beta = k as f64 * 1e-5;
                (beta, wva_uncertainty(alpha, beta, 780.0, 17.6, 0.1).unwrap())
            })
            .fold((0.0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        assert!((best - alpha).abs() <= 1e-5, "{best}");
    }

    proptest! {
        #[test]
        fn alpha_min_is_fixed_point(eps in 1e-4f64..0.1, res in 0.01f64..0.3) {
            let a = alpha_min(eps, 780.0, 17.6, res).unwrap();
            let d = wva_uncertainty(a, eps, 780.0, 17.6, res).unwrap();
            prop_assert!((d - a).abs() <= 1e-9 * a);
        }
    }
}
