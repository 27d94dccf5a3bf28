//! Polarization states and weak values of the two-port postselection.
//!
//! The ancilla is the photon polarization in the {|H⟩, |V⟩} basis and the
//! measured observable is σ_Z = |H⟩⟨H| − |V⟩⟨V|. The initial state is the
//! diagonal state (|H⟩ + |V⟩)/√2 prepared by the input polarizer.
//!
//! Postselection is a quarter-wave plate followed by a polarizing beam
//! splitter rotated by γ = π/4 − φ/2. With an ideal quarter-wave plate the
//! two ports project onto (|H⟩ ± e^{iφ}|V⟩)/√2. A real plate has retardance
//! proportional to frequency, which makes both the postselected states and
//! the weak values frequency dependent.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Normalization tolerance for [`PolarizationState`].
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Output port of the polarizing beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    One,
    Two,
}

impl Port {
    pub const BOTH: [Port; 2] = [Port::One, Port::Two];

    pub fn index(self) -> usize {
        match self {
            Port::One => 0,
            Port::Two => 1,
        }
    }
}

/// Normalized Jones vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState {
    h: Complex64,
    v: Complex64,
}

impl PolarizationState {
    pub fn new(h: Complex64, v: Complex64) -> Result<Self> {
        let norm = h.norm_sqr() + v.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::domain(format!(
                "polarization state has squared norm {norm}, expected 1"
            )));
        }
        Ok(Self { h, v })
    }

    /// Builds a state from arbitrary nonzero amplitudes by normalizing them.
    pub fn normalized(h: Complex64, v: Complex64) -> Result<Self> {
        let norm = (h.norm_sqr() + v.norm_sqr()).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::domain("cannot normalize a zero or non-finite Jones vector"));
        }
        Ok(Self {
            h: h / norm,
            v: v / norm,
        })
    }

    pub fn horizontal() -> Self {
        Self {
            h: Complex64::new(1.0, 0.0),
            v: Complex64::new(0.0, 0.0),
        }
    }

    pub fn vertical() -> Self {
        Self {
            h: Complex64::new(0.0, 0.0),
            v: Complex64::new(1.0, 0.0),
        }
    }

    /// The preselected state (|H⟩ + |V⟩)/√2.
    pub fn diagonal() -> Self {
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { h: a, v: a }
    }

    pub fn h(&self) -> Complex64 {
        self.h
    }

    pub fn v(&self) -> Complex64 {
        self.v
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.h.conj() * other.h + self.v.conj() * other.v
    }

    /// ⟨self|σ_Z|other⟩
    pub fn sigma_z_element(&self, other: &Self) -> Complex64 {
        self.h.conj() * other.h - self.v.conj() * other.v
    }

    /// Applies a Jones matrix. The matrix must be unitary for the result to
    /// stay normalized; this is checked.
    pub fn transform(&self, m: &Matrix2<Complex64>) -> Result<Self> {
        Self::new(
            m[(0, 0)] * self.h + m[(0, 1)] * self.v,
            m[(1, 0)] * self.h + m[(1, 1)] * self.v,
        )
    }

    /// Equality up to a global phase: |⟨a|b⟩| = 1.
    pub fn same_ray(&self, other: &Self, tol: f64) -> bool {
        (self.inner(other).norm() - 1.0).abs() <= tol
    }
}

/// Weak values of σ_Z for the two postselection ports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakValuePair {
    pub aw1: Complex64,
    pub aw2: Complex64,
}

impl WeakValuePair {
    pub fn new(aw1: Complex64, aw2: Complex64) -> Self {
        Self { aw1, aw2 }
    }

    pub fn get(&self, port: Port) -> Complex64 {
        match port {
            Port::One => self.aw1,
            Port::Two => self.aw2,
        }
    }

    /// Labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            aw1: self.aw2,
            aw2: self.aw1,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.aw1.re.is_finite()
            && self.aw1.im.is_finite()
            && self.aw2.re.is_finite()
            && self.aw2.im.is_finite()
    }
}

/// Quarter-wave plate used in front of the beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QwpModel {
    /// Exactly a quarter wave at every frequency.
    Ideal,
    /// Retardance 2ωτ₀, a quarter wave only at ω₀ = (π/4)/τ₀.
    Dispersive { tau0: f64 },
    /// No plate; linear postselection only.
    Absent,
}

impl QwpModel {
    /// Dispersive plate designed as a quarter wave at `omega0` (rad/s).
    pub fn dispersive_at(omega0: f64) -> Result<Self> {
        if !(omega0 > 0.0) || !omega0.is_finite() {
            return Err(Error::domain(format!("design frequency must be positive, got {omega0}")));
        }
        Ok(QwpModel::Dispersive {
            tau0: FRAC_PI_4 / omega0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            QwpModel::Dispersive { tau0 } if !(tau0 > 0.0) || !tau0.is_finite() => Err(
                Error::domain(format!("dispersive QWP needs tau0 > 0, got {tau0}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Weak values with an ideal quarter-wave plate:
/// (i·tan(φ/2), −i·cot(φ/2)).
pub fn ideal_weak_values(phi: f64) -> Result<WeakValuePair> {
    if !(phi > 0.0 && phi < PI) {
        return Err(Error::SingularWeakValue(format!(
            "postselection angle phi = {phi} must lie in (0, pi)"
        )));
    }
    let t = (phi / 2.0).tan();
    Ok(WeakValuePair::new(I * t, -I / t))
}

/// Jones matrix of a quarter-wave plate with its axis at 45°, evaluated at
/// angular frequency `omega` for a plate with design constant `tau0`.
pub fn qwp_jones_matrix(omega: f64, tau0: f64) -> Matrix2<Complex64> {
    let (s, c) = (omega * tau0).sin_cos();
    let c = Complex64::new(c, 0.0);
    let ms = Complex64::new(0.0, -s);
    Matrix2::new(c, ms, ms, c)
}

/// Weak values with a frequency-dependent quarter-wave plate and a beam
/// splitter rotated by `gamma`.
pub fn dispersive_weak_values(gamma: f64, omega: f64, tau0: f64) -> Result<WeakValuePair> {
    if !(gamma > 0.0 && gamma < FRAC_PI_2) {
        return Err(Error::domain(format!(
            "beam splitter angle gamma = {gamma} must lie in (0, pi/2)"
        )));
    }
    weak_values_rotated(gamma, omega * tau0)
}

// Shared by the dispersive and plate-free cases; `retardance_half` is ωτ₀.
fn weak_values_rotated(gamma: f64, retardance_half: f64) -> Result<WeakValuePair> {
    let (sg, cg) = gamma.sin_cos();
    let den1 = cg + sg;
    let den2 = sg - cg;
    if den2.abs() <= 1e-15 || den1.abs() <= 1e-15 {
        return Err(Error::SingularWeakValue(format!(
            "gamma = {gamma} makes a postselected state orthogonal to the initial state"
        )));
    }
    let phase = Complex64::from_polar(1.0, 2.0 * retardance_half);
    Ok(WeakValuePair::new(
        phase * ((cg - sg) / den1),
        phase * ((cg + sg) / den2),
    ))
}

/// Linear polarization selected by each beam-splitter port:
/// port 1 → cos γ|H⟩ + sin γ|V⟩, port 2 → sin γ|H⟩ − cos γ|V⟩.
pub fn postselection_state(gamma: f64, port: Port) -> Result<PolarizationState> {
    if !(0.0..=FRAC_PI_2).contains(&gamma) {
        return Err(Error::domain(format!(
            "beam splitter angle gamma = {gamma} must lie in [0, pi/2]"
        )));
    }
    Ok(rotated_state(gamma, port))
}

// Same states for any rotation; a splitter turned the other way (γ < 0)
// realizes φ > π/2.
fn rotated_state(gamma: f64, port: Port) -> PolarizationState {
    let (s, c) = gamma.sin_cos();
    let (h, v) = match port {
        Port::One => (c, s),
        Port::Two => (s, -c),
    };
    PolarizationState {
        h: Complex64::new(h, 0.0),
        v: Complex64::new(v, 0.0),
    }
}

/// Ideal-plate postselected states (|H⟩ ± e^{iφ}|V⟩)/√2.
pub fn ideal_postselection_state(phi: f64, port: Port) -> PolarizationState {
    let sign = match port {
        Port::One => 1.0,
        Port::Two => -1.0,
    };
    let a = std::f64::consts::FRAC_1_SQRT_2;
    PolarizationState {
        h: Complex64::new(a, 0.0),
        v: Complex64::from_polar(sign * a, phi),
    }
}

/// Beam-splitter rotation that realizes postselection angle `phi`.
pub fn gamma_for_phi(phi: f64) -> f64 {
    FRAC_PI_4 - phi / 2.0
}

/// Response of one port at one frequency: the postselection probability
/// |⟨φ_f|φ_i⟩|² and the weak value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortResponse {
    pub overlap_sq: f64,
    pub weak_value: Complex64,
}

/// The complete two-port postselection: angle plus quarter-wave plate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Postselection {
    phi: f64,
    qwp: QwpModel,
}

impl Postselection {
    pub fn new(phi: f64, qwp: QwpModel) -> Result<Self> {
        if !(phi > 0.0 && phi < PI) {
            return Err(Error::domain(format!(
                "postselection angle phi = {phi} must lie in (0, pi)"
            )));
        }
        qwp.validate()?;
        Ok(Self { phi, qwp })
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn qwp(&self) -> QwpModel {
        self.qwp
    }

    /// True when weak values do not depend on frequency.
    pub fn is_achromatic(&self) -> bool {
        !matches!(self.qwp, QwpModel::Dispersive { .. })
    }

    /// Port probabilities |⟨φ_fj|φ_i⟩|². These are frequency independent for
    /// every plate model: the plate only rotates the phase of the overlap.
    pub fn overlaps(&self) -> [f64; 2] {
        match self.qwp {
            QwpModel::Ideal => {
                let (s, c) = (self.phi / 2.0).sin_cos();
                [c * c, s * s]
            }
            QwpModel::Dispersive { .. } | QwpModel::Absent => {
                let s2g = (2.0 * gamma_for_phi(self.phi)).sin();
                [0.5 * (1.0 + s2g), 0.5 * (1.0 - s2g)]
            }
        }
    }

    pub fn weak_values(&self, omega: f64) -> Result<WeakValuePair> {
        match self.qwp {
            QwpModel::Ideal => ideal_weak_values(self.phi),
            QwpModel::Dispersive { tau0 } => {
                weak_values_rotated(gamma_for_phi(self.phi), omega * tau0)
            }
            QwpModel::Absent => weak_values_rotated(gamma_for_phi(self.phi), 0.0),
        }
    }

    pub fn response(&self, port: Port, omega: f64) -> Result<PortResponse> {
        let aw = self.weak_values(omega)?;
        Ok(PortResponse {
            overlap_sq: self.overlaps()[port.index()],
            weak_value: aw.get(port),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c_close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn ideal_weak_values_at_balanced_point() {
        let w = ideal_weak_values(FRAC_PI_2).unwrap();
        assert!(c_close(w.aw1, I, 1e-15));
        assert!(c_close(w.aw2, -I, 1e-15));
    }

    #[test]
    fn ideal_weak_values_wva_setting() {
        let w = ideal_weak_values(0.03).unwrap();
        assert!(c_close(w.aw1, I * 0.015f64.tan(), 1e-15));
        assert!(c_close(w.aw2, -I / 0.015f64.tan(), 1e-15));
        assert!(w.aw2.im < -66.0);
    }

    #[test]
    fn ideal_weak_values_reject_singular_angles() {
        for phi in [0.0, -0.1, PI, 4.0, f64::NAN] {
            assert!(matches!(ideal_weak_values(phi), Err(Error::SingularWeakValue(_))));
        }
    }

    #[test]
    fn ideal_weak_values_match_state_definition() {
        let init = PolarizationState::diagonal();
        for phi in [0.03, 0.5, 1.2, FRAC_PI_2 + 0.071, 3.0] {
            let w = ideal_weak_values(phi).unwrap();
            for port in Port::BOTH {
                let f = ideal_postselection_state(phi, port);
                let aw = f.sigma_z_element(&init) / f.inner(&init);
                assert!(c_close(aw, w.get(port), 1e-12), "phi {phi} port {port:?}");
            }
        }
    }

    #[test]
    fn qwp_matrix_examples() {
        let m = qwp_jones_matrix(0.0, 1e-15);
        assert_eq!(m, Matrix2::identity());
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let m = qwp_jones_matrix(FRAC_PI_4, 1.0);
        assert!(c_close(m[(0, 0)], Complex64::new(r, 0.0), 1e-15));
        assert!(c_close(m[(0, 1)], Complex64::new(0.0, -r), 1e-15));
        assert!(c_close(m[(1, 0)], Complex64::new(0.0, -r), 1e-15));
        assert!(c_close(m[(1, 1)], Complex64::new(r, 0.0), 1e-15));
    }

    #[test]
    fn qwp_matrix_is_unitary_on_random_samples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let omega = rng.random_range(1e14..1e16);
            let tau0 = rng.random_range(1e-17..1e-14);
            let m = qwp_jones_matrix(omega, tau0);
            let p = m * m.adjoint();
            let err = (p - Matrix2::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn dispersive_reduces_to_ideal_at_design_frequency() {
        let tau0 = 1.0e-16;
        let omega0 = FRAC_PI_4 / tau0;
        for k in 1..=100 {
            let gamma = FRAC_PI_4 * k as f64 / 101.0;
            let phi = FRAC_PI_2 - 2.0 * gamma;
            let d = dispersive_weak_values(gamma, omega0, tau0).unwrap();
            let i = ideal_weak_values(phi).unwrap();
            assert!(c_close(d.aw1, i.aw1, 1e-10), "gamma {gamma}");
            assert!(c_close(d.aw2, i.aw2, 1e-10), "gamma {gamma}");
        }
    }

    #[test]
    fn dispersive_weak_values_edge_cases() {
        let tau0 = 2.0e-16;
        let omega = 3.0e15;
        let e = Complex64::from_polar(1.0, 2.0 * omega * tau0);
        // gamma = 0 itself is outside the open domain; the limit is checked
        // through the shared kernel.
        let w = weak_values_rotated(0.0, omega * tau0).unwrap();
        assert!(c_close(w.aw1, e, 1e-14));
        assert!(c_close(w.aw2, -e, 1e-14));
        assert!(matches!(
            dispersive_weak_values(FRAC_PI_4, omega, tau0),
            Err(Error::SingularWeakValue(_))
        ));
        let g = 0.3;
        let m1 = dispersive_weak_values(g, 2.0e15, tau0).unwrap().aw1.norm();
        let m2 = dispersive_weak_values(g, 3.0e15, tau0).unwrap().aw1.norm();
        assert_abs_diff_eq!(m1, m2, epsilon = 1e-14);
    }

    #[test]
    fn dispersive_weak_values_match_jones_route() {
        // Weak values from the back-propagated states U†|φ_f⟩.
        let init = PolarizationState::diagonal();
        let tau0 = 3.25e-16;
        for gamma in [0.05, 0.4, 0.7, 1.2, -0.0355] {
            for omega in [2.1e15, 2.4e15, 2.7e15] {
                let u = qwp_jones_matrix(omega, tau0);
                for port in Port::BOTH {
                    let f = rotated_state(gamma, port);
                    let fb = f.transform(&u.adjoint()).unwrap();
                    let aw = fb.sigma_z_element(&init) / fb.inner(&init);
                    let expected = weak_values_rotated(gamma, omega * tau0).unwrap();
                    assert!(c_close(aw, expected.get(port), 1e-12));
                    if gamma > 0.0 && gamma < FRAC_PI_2 {
                        let w = dispersive_weak_values(gamma, omega, tau0).unwrap();
                        assert_eq!(w, expected);
                    }
                    if gamma.abs() >= FRAC_PI_4 {
                        continue;
                    }
                    let ps = Postselection::new(FRAC_PI_2 - 2.0 * gamma, QwpModel::Dispersive { tau0 }).unwrap();
                    assert_abs_diff_eq!(
                        fb.inner(&init).norm_sqr(),
                        ps.overlaps()[port.index()],
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn postselection_state_examples() {
        let p1 = postselection_state(0.0, Port::One).unwrap();
        let p2 = postselection_state(0.0, Port::Two).unwrap();
        assert!(p1.same_ray(&PolarizationState::horizontal(), 1e-15));
        assert!(p2.same_ray(&PolarizationState::vertical(), 1e-15));
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let plus = PolarizationState::new(Complex64::new(r, 0.0), Complex64::new(r, 0.0)).unwrap();
        let minus = PolarizationState::new(Complex64::new(r, 0.0), Complex64::new(-r, 0.0)).unwrap();
        assert!(postselection_state(FRAC_PI_4, Port::One).unwrap().same_ray(&plus, 1e-15));
        assert!(postselection_state(FRAC_PI_4, Port::Two).unwrap().same_ray(&minus, 1e-15));
        assert!(postselection_state(-0.1, Port::One).is_err());
    }

    #[test]
    fn qwp_then_rotated_splitter_realizes_ideal_states() {
        // At the design frequency the plate maps the ideal states onto the
        // linear ones selected by the rotated splitter.
        let tau0 = 1.0e-16;
        let omega0 = FRAC_PI_4 / tau0;
        let u = qwp_jones_matrix(omega0, tau0);
        for phi in [0.03, 0.8, FRAC_PI_2 + 0.071] {
            let gamma = gamma_for_phi(phi);
            for port in Port::BOTH {
                let back = rotated_state(gamma, port).transform(&u.adjoint()).unwrap();
                assert!(back.same_ray(&ideal_postselection_state(phi, port), 1e-12));
            }
        }
    }

    #[test]
    fn state_constructor_checks_norm() {
        assert!(PolarizationState::new(Complex64::new(1.0, 0.0), Complex64::new(0.1, 0.0)).is_err());
        assert!(PolarizationState::normalized(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)).is_err());
        let s = PolarizationState::normalized(Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)).unwrap();
        assert_abs_diff_eq!(s.inner(&s).re, 1.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn ideal_weak_value_identities(phi in 1e-3f64..(PI - 1e-3)) {
            let w = ideal_weak_values(phi).unwrap();
            let prod = w.aw1 * w.aw2;
            prop_assert!((prod - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            let (s, c) = (phi / 2.0).sin_cos();
            let avg = w.aw1 * (c * c) + w.aw2 * (s * s);
            prop_assert!(avg.norm() < 1e-12);
        }

        #[test]
        fn postselected_ports_are_orthogonal(gamma in 0.0f64..=FRAC_PI_2) {
            let a = postselection_state(gamma, Port::One).unwrap();
            let b = postselection_state(gamma, Port::Two).unwrap();
            prop_assert!(a.inner(&b).norm() < 1e-12);
        }
    }
}
