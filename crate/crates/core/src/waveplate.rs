//! Retardance of birefringent plates under oblique incidence, and the delay
//! produced by pivoting one plate of a crossed pair.
//!
//! Lengths are in metres here, wavelengths included. The plate frame puts
//! the optic axis along Z and the entrance surface in the X–Z plane; light
//! enters at the origin and leaves at (x, h, z).

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::SPEED_OF_LIGHT;

/// Two-term Sellmeier law n² = a + bλ²/(λ² − c) + dλ²/(λ² − e), λ in µm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sellmeier {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "c_um2")]
    pub c: f64,
    pub d: f64,
    #[serde(rename = "e_um2")]
    pub e: f64,
}

impl Sellmeier {
    pub fn index(&self, lambda_m: f64) -> Result<f64> {
        let l2 = (lambda_m * 1e6).powi(2);
        let n2 = self.a + self.b * l2 / (l2 - self.c) + self.d * l2 / (l2 - self.e);
        if n2 > 0.0 && n2.is_finite() {
            Ok(n2.sqrt())
        } else {
            Err(Error::Geometry(format!(
                "dispersion model is invalid at {:.1} nm",
                lambda_m * 1e9
            )))
        }
    }
}

/// Ordinary and extraordinary refractive indices of the plate material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum IndexModel {
    Sellmeier { ordinary: Sellmeier, extraordinary: Sellmeier },
    Constant { n_o: f64, n_e: f64 },
}

/// Indices at one wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Indices {
    pub n_o: f64,
    pub n_e: f64,
}

impl Indices {
    pub fn birefringence(&self) -> f64 {
        self.n_e - self.n_o
    }

    /// (n_o + n_e)/2.
    pub fn average(&self) -> f64 {
        0.5 * (self.n_o + self.n_e)
    }
}

impl IndexModel {
    /// Crystalline quartz, room temperature (G. Ghosh, Opt. Commun. 163,
    /// 95 (1999)).
    pub fn quartz() -> Self {
        IndexModel::Sellmeier {
            ordinary: Sellmeier {
                a: 1.286_041_41,
                b: 1.070_440_83,
                c: 1.005_859_97e-2,
                d: 1.102_022_42,
                e: 100.0,
            },
            extraordinary: Sellmeier {
                a: 1.288_518_04,
                b: 1.095_099_24,
                c: 1.021_018_64e-2,
                d: 1.156_624_75,
                e: 100.0,
            },
        }
    }

    pub fn at(&self, lambda_m: f64) -> Result<Indices> {
        if !(lambda_m > 0.0) {
            return Err(Error::domain(format!("wavelength must be positive, got {lambda_m}")));
        }
        let idx = match self {
            IndexModel::Sellmeier { ordinary, extraordinary } => Indices {
                n_o: ordinary.index(lambda_m)?,
                n_e: extraordinary.index(lambda_m)?,
            },
            IndexModel::Constant { n_o, n_e } => Indices { n_o: *n_o, n_e: *n_e },
        };
        if !(idx.n_o >= 1.0 && idx.n_e >= 1.0) || idx.n_o == idx.n_e {
            return Err(Error::Geometry(format!(
                "indices n_o = {}, n_e = {} do not describe a birefringent crystal",
                idx.n_o, idx.n_e
            )));
        }
        Ok(idx)
    }
}

impl Default for IndexModel {
    fn default() -> Self {
        IndexModel::quartz()
    }
}

/// Two plates of one material with crossed optic axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateStack {
    pub h1: f64,
    pub h2: f64,
    pub index: IndexModel,
}

impl PlateStack {
    pub fn new(h1: f64, h2: f64, index: IndexModel) -> Result<Self> {
        if !(h1 > 0.0 && h2 > 0.0) || !h1.is_finite() || !h2.is_finite() {
            return Err(Error::Geometry(format!(
                "plate thicknesses must be positive, got {h1} and {h2}"
            )));
        }
        Ok(Self { h1, h2, index })
    }

    /// Compound zero-order half-wave plate at `lambda_m`: plate 2 has
    /// thickness `h2` and plate 1 is thicker by λ/(2Δn).
    pub fn zero_order_half_wave(h2: f64, lambda_m: f64, index: IndexModel) -> Result<Self> {
        let dn = index.at(lambda_m)?.birefringence().abs();
        Self::new(h2 + lambda_m / (2.0 * dn), h2, index)
    }

    pub fn total_thickness(&self) -> f64 {
        self.h1 + self.h2
    }
}

impl Default for PlateStack {
    /// Quartz half-wave pair for 780 nm with a 1 mm second plate.
    fn default() -> Self {
        Self::zero_order_half_wave(1e-3, 780e-9, IndexModel::quartz())
            .expect("quartz is birefringent at 780 nm")
    }
}

/// Azimuth ξ and elevation ψ of the ray inside the first plate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltAngles {
    xi: f64,
    psi: f64,
}

impl TiltAngles {
    pub fn new(xi: f64, psi: f64) -> Result<Self> {
        let half = std::f64::consts::FRAC_PI_2;
        if !(xi.abs() < half && psi.abs() < half) {
            return Err(Error::Geometry(format!(
                "tilt angles must lie in (-pi/2, pi/2), got xi = {xi}, psi = {psi}"
            )));
        }
        Ok(Self { xi, psi })
    }

    pub fn normal() -> Self {
        Self { xi: 0.0, psi: 0.0 }
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    // √(1 − sin²ξ sin²ψ)
    fn skew(&self) -> Result<f64> {
        let k = 1.0 - (self.xi.sin() * self.psi.sin()).powi(2);
        if k > 0.0 {
            Ok(k.sqrt())
        } else {
            Err(Error::Geometry("sin^2(xi) sin^2(psi) must be below 1".into()))
        }
    }
}

/// C = (x² + y²)/√(x² + y² + z²) for an exit point in the plate frame.
pub fn effective_path_length(x: f64, y: f64, z: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Geometry(format!("exit point must have y > 0, got {y}")));
    }
    let r2 = x * x + y * y;
    Ok(r2 / (r2 + z * z).sqrt())
}

/// Single-plate retardance in its published closed form,
/// δ = 2πΔn·h·cos ψ / (λ √(cos ξ (1 − sin²ξ sin²ψ))).
///
/// Off normal incidence this differs from the exit-point geometry at second
/// order in ξ; see [`single_plate_retardance_geometric`].
pub fn single_plate_retardance(lambda_m: f64, h: f64, indices: Indices, tilt: TiltAngles) -> Result<f64> {
    let k = tilt.xi.cos() * tilt.skew()?.powi(2);
    if !(k > 0.0) {
        return Err(Error::Geometry("denominator is not positive".into()));
    }
    Ok(2.0 * std::f64::consts::PI * indices.birefringence() * h * tilt.psi.cos() / (lambda_m * k.sqrt()))
}

/// Single-plate retardance from the exit point (h tan ξ, h, h tan ψ):
/// δ = 2πΔn·h·cos ψ / (λ cos ξ √(1 − sin²ξ sin²ψ)). Two of these with ξ and
/// ψ exchanged difference to [`compound_retardance`].
pub fn single_plate_retardance_geometric(
    lambda_m: f64,
    h: f64,
    indices: Indices,
    tilt: TiltAngles,
) -> Result<f64> {
    tilt.skew()?;
    let c = effective_path_length(h * tilt.xi.tan(), h, h * tilt.psi.tan())?;
    Ok(2.0 * std::f64::consts::PI * indices.birefringence() * c / lambda_m)
}

/// Retardance of the crossed pair. The second plate sees ξ and ψ exchanged
/// and refraction between the plates is neglected:
/// δ = 2πΔn (h₁ cos ψ/cos ξ − h₂ cos ξ/cos ψ) / (λ √(1 − sin²ξ sin²ψ)).
pub fn compound_retardance(lambda_m: f64, stack: &PlateStack, tilt: TiltAngles) -> Result<f64> {
    let idx = stack.index.at(lambda_m)?;
    let (cx, cp) = (tilt.xi.cos(), tilt.psi.cos());
    let path = (stack.h1 * cp / cx - stack.h2 * cx / cp) / tilt.skew()?;
    Ok(2.0 * std::f64::consts::PI * idx.birefringence() * path / lambda_m)
}

/// Which internal angle the pivot changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotAxis {
    /// ψ = 0, ξ = θ/n: the retardance grows.
    #[default]
    Azimuth,
    /// ξ = 0, ψ = θ/n: the retardance shrinks.
    Elevation,
}

impl PivotAxis {
    pub fn sign(self) -> f64 {
        match self {
            PivotAxis::Azimuth => 1.0,
            PivotAxis::Elevation => -1.0,
        }
    }

    /// Internal tilt for external incidence angle `theta` (small-angle
    /// refraction, θ/n).
    pub fn tilt(self, theta: f64, n: f64) -> Result<TiltAngles> {
        match self {
            PivotAxis::Azimuth => TiltAngles::new(theta / n, 0.0),
            PivotAxis::Elevation => TiltAngles::new(0.0, theta / n),
        }
    }
}

/// Delay from pivoting by `theta` (rad): τ = ±Δn(h₁ + h₂)θ²/(2cn²), with n
/// the average index at `lambda_m`.
///
/// This is the oblique-incidence retardance change ±πΔn(h₁+h₂)θ²/(λn²)
/// divided by ω = 2πc/λ; the wavelength enters only through the indices.
pub fn pivot_delay(theta: f64, stack: &PlateStack, lambda_m: f64, axis: PivotAxis) -> Result<f64> {
    if theta.abs() > 0.2 {
        warn!("pivot angle {theta} rad is outside the small-angle regime");
    }
    let idx = stack.index.at(lambda_m)?;
    let n = idx.average();
    Ok(axis.sign() * idx.birefringence() * stack.total_thickness() * theta * theta
        / (2.0 * SPEED_OF_LIGHT * n * n))
}

/// Pivot angle (rad, ≥ 0) that produces delay `tau` with the azimuth pivot.
pub fn theta_for_delay(tau: f64, stack: &PlateStack, lambda_m: f64) -> Result<f64> {
    let per_rad2 = pivot_delay(1.0, stack, lambda_m, PivotAxis::Azimuth)?;
    let ratio = tau / per_rad2;
    if ratio < 0.0 {
        return Err(Error::domain(format!("delay {tau} s has the wrong sign for this plate pair")));
    }
    Ok(ratio.sqrt())
}
