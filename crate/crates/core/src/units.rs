//! Physical constants, CGS-Gaussian / rationalized-MKS unit systems, and
//! packet validity (regime) checks.
//!
//! Internally every phase computation runs with ħ = 1; conversion to radians
//! from physical inputs happens once, at the experiment-module boundary,
//! by dividing the accumulated action by ħ in the input unit system.

use crate::error::{invalid, Result};

/// Speed of light (cm/s).
pub const SPEED_OF_LIGHT_CGS: f64 = 2.997_924_58e10;
/// Speed of light (m/s).
pub const SPEED_OF_LIGHT_MKS: f64 = 2.997_924_58e8;
/// Reduced Planck constant (erg s).
pub const HBAR_CGS: f64 = 1.054_571_817e-27;
/// Reduced Planck constant (J s).
pub const HBAR_MKS: f64 = 1.054_571_817e-34;
/// Planck constant (erg s).
pub const PLANCK_CGS: f64 = 6.626_070_15e-27;
/// Elementary charge (statC); 1.602176634e-19 C * 2.99792458e9 statC/C.
pub const ELEMENTARY_CHARGE_CGS: f64 = 4.803_204_712_57e-10;
/// Elementary charge (C).
pub const ELEMENTARY_CHARGE_MKS: f64 = 1.602_176_634e-19;
/// Electron mass (g).
pub const ELECTRON_MASS_CGS: f64 = 9.109_383_7015e-28;
/// Electron mass (kg).
pub const ELECTRON_MASS_MKS: f64 = 9.109_383_7015e-31;
/// statC per Coulomb.
pub const STATC_PER_COULOMB: f64 = 2.997_924_58e9;

/// Default tolerance for the many-wavelengths-per-packet condition.
pub const DEFAULT_TOL_WAVELENGTH: f64 = 1e-2;
/// Default tolerance for the negligible-spreading condition.
pub const DEFAULT_TOL_SPREAD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemTag {
    CgsGaussian,
    RationalizedMks,
}

/// A set of constants the experiment modules compute with. "Natural" systems
/// carry ħ = 1 exactly; phases computed there are already in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    pub tag: SystemTag,
    pub c: f64,
    pub hbar: f64,
    pub e_charge: f64,
    pub m_electron: f64,
}

impl UnitSystem {
    /// Physical CGS-Gaussian constants (magnetic experiment default).
    pub fn cgs() -> Self {
        UnitSystem {
            tag: SystemTag::CgsGaussian,
            c: SPEED_OF_LIGHT_CGS,
            hbar: HBAR_CGS,
            e_charge: ELEMENTARY_CHARGE_CGS,
            m_electron: ELECTRON_MASS_CGS,
        }
    }

    /// Physical rationalized-MKS constants (electric experiment default).
    pub fn mks() -> Self {
        UnitSystem {
            tag: SystemTag::RationalizedMks,
            c: SPEED_OF_LIGHT_MKS,
            hbar: HBAR_MKS,
            e_charge: ELEMENTARY_CHARGE_MKS,
            m_electron: ELECTRON_MASS_MKS,
        }
    }

    /// All constants set to one; convenient for algorithm-level tests.
    pub fn natural() -> Self {
        UnitSystem {
            tag: SystemTag::CgsGaussian,
            c: 1.0,
            hbar: 1.0,
            e_charge: 1.0,
            m_electron: 1.0,
        }
    }

    pub fn new(tag: SystemTag, c: f64, hbar: f64, e_charge: f64, m_electron: f64) -> Result<Self> {
        if !(c > 0.0 && hbar > 0.0 && e_charge > 0.0 && m_electron > 0.0) {
            return Err(invalid("all unit-system constants must be strictly positive"));
        }
        Ok(UnitSystem { tag, c, hbar, e_charge, m_electron })
    }
}

/// The quantity kinds this crate converts between CGS and MKS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantityKind {
    Length,
    Time,
    Mass,
    Speed,
    Charge,
    Energy,
    Action,
    MagneticField,
    Dimensionless,
}

/// Multiplicative factor taking a CGS value to its MKS value.
fn cgs_to_mks_factor(kind: QuantityKind) -> f64 {
    match kind {
        QuantityKind::Length => 1e-2,                    // cm -> m
        QuantityKind::Time => 1.0,                       // s -> s
        QuantityKind::Mass => 1e-3,                      // g -> kg
        QuantityKind::Speed => 1e-2,                     // cm/s -> m/s
        QuantityKind::Charge => 1.0 / STATC_PER_COULOMB, // statC -> C
        QuantityKind::Energy => 1e-7,                    // erg -> J
        QuantityKind::Action => 1e-7,                    // erg s -> J s
        QuantityKind::MagneticField => 1e-4,             // G -> T
        QuantityKind::Dimensionless => 1.0,
    }
}

/// Convert `value` of the given kind between the two unit systems.
pub fn convert(value: f64, kind: QuantityKind, from: SystemTag, to: SystemTag) -> f64 {
    match (from, to) {
        (SystemTag::CgsGaussian, SystemTag::RationalizedMks) => value * cgs_to_mks_factor(kind),
        (SystemTag::RationalizedMks, SystemTag::CgsGaussian) => value / cgs_to_mks_factor(kind),
        _ => value,
    }
}

/// The parameters entering the two packet validity conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRegime {
    /// Packet width (length).
    pub sigma: f64,
    /// Particle mass.
    pub mass: f64,
    /// Mean speed.
    pub speed: f64,
    /// Evolution time.
    pub duration: f64,
    /// Reduced Planck constant in the same unit system (1 in natural mode).
    pub hbar: f64,
}

impl PacketRegime {
    /// Regime in natural units (ħ = 1).
    pub fn natural(sigma: f64, mass: f64, speed: f64, duration: f64) -> Self {
        PacketRegime { sigma, mass, speed, duration, hbar: 1.0 }
    }

    pub fn with_hbar(sigma: f64, mass: f64, speed: f64, duration: f64, hbar: f64) -> Self {
        PacketRegime { sigma, mass, speed, duration, hbar }
    }
}

/// Outcome of [`check_regime`]; reporting only, never a failure by itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport {
    /// de Broglie wavelength over packet width, h/(m v sigma).
    pub wavelength_ratio: f64,
    /// Spreading measure ħ T / (2 m sigma^2).
    pub spreading_ratio: f64,
    pub wavelength_pass: bool,
    pub spreading_pass: bool,
}

impl RegimeReport {
    pub fn pass(&self) -> bool {
        self.wavelength_pass && self.spreading_pass
    }
}

/// Evaluate both packet validity ratios against the given tolerances.
///
/// The wavelength condition demands many de Broglie oscillations inside the
/// packet width: ratio = (2 pi ħ / (m v)) / sigma. The spreading condition
/// demands ħ T / (2 m sigma^2) small so the width stays frozen over the run.
/// A failing ratio only clears the corresponding flag; errors are reserved
/// for non-positive inputs.
pub fn check_regime(
    regime: &PacketRegime,
    tol_wavelength: f64,
    tol_spread: f64,
) -> Result<RegimeReport> {
    if !(regime.sigma > 0.0 && regime.mass > 0.0 && regime.speed > 0.0 && regime.duration >= 0.0) {
        return Err(invalid("regime fields must be positive (duration may be zero)"));
    }
    if !(regime.hbar > 0.0) {
        return Err(invalid("hbar must be positive"));
    }
    if !(tol_wavelength > 0.0 && tol_spread > 0.0) {
        return Err(invalid("regime tolerances must be positive"));
    }
    let two_pi = 2.0 * core::f64::consts::PI;
    let wavelength = two_pi * regime.hbar / (regime.mass * regime.speed);
    let wavelength_ratio = wavelength / regime.sigma;
    let spreading_ratio = regime.hbar * regime.duration / (2.0 * regime.mass * regime.sigma * regime.sigma);
    Ok(RegimeReport {
        wavelength_ratio,
        spreading_ratio,
        wavelength_pass: wavelength_ratio < tol_wavelength,
        spreading_pass: spreading_ratio < tol_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shell_piece_parameters_pass_both_conditions() {
        // sigma = 2 pi a / n_a for a = 1 cm, n_a = 1000; piece of ~6.45e6
        // electron masses at the 1 cm/s drift speed, 0.3 s traverse.
        let sigma = 2.0 * core::f64::consts::PI * 1.0 / 1000.0;
        let mass = 6.4532e6 * ELECTRON_MASS_CGS;
        let regime = PacketRegime::with_hbar(sigma, mass, 1.0, 0.3, HBAR_CGS);
        let report = check_regime(&regime, DEFAULT_TOL_WAVELENGTH, DEFAULT_TOL_SPREAD).unwrap();
        // ~ 1/6000 wavelengths-per-width ratio.
        assert!(report.wavelength_ratio > 1.0 / 8000.0 && report.wavelength_ratio < 1.0 / 4000.0,
            "wavelength ratio {}", report.wavelength_ratio);
        assert!(report.pass(), "{report:?}");
    }

    #[test]
    fn infinite_speed_limit_passes() {
        let regime = PacketRegime::natural(1.0, 1.0, f64::INFINITY, 1.0);
        let report = check_regime(&regime, 1e-2, 1e-3).unwrap();
        assert_eq!(report.wavelength_ratio, 0.0);
        assert!(report.wavelength_pass);
    }

    #[test]
    fn spreading_ratio_matches_high_precision_evaluation() {
        // sigma = 1e-8 cm, m = m_e, v = 1 cm/s, T = 1 s.
        // Frozen from a 40-digit evaluation of hbar*T/(2 m sigma^2).
        let regime = PacketRegime::with_hbar(1e-8, ELECTRON_MASS_CGS, 1.0, 1.0, HBAR_CGS);
        let report = check_regime(&regime, 1e-2, 1e-3).unwrap();
        let expected = 5.788381802527149e15;
        assert!((report.spreading_ratio / expected - 1.0).abs() < 1e-12);
        assert!(!report.spreading_pass);
    }

    #[test]
    fn non_positive_field_is_invalid_input() {
        let regime = PacketRegime::natural(0.0, 1.0, 1.0, 1.0);
        assert!(check_regime(&regime, 1e-2, 1e-3).is_err());
    }

    #[test]
    fn natural_mode_has_unit_hbar() {
        assert_eq!(UnitSystem::natural().hbar, 1.0);
    }

    #[test]
    fn constants_must_be_positive() {
        assert!(UnitSystem::new(SystemTag::CgsGaussian, 1.0, 0.0, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn unit_round_trip(value in 1e-20f64..1e20, kind_idx in 0usize..8) {
            let kinds = [
                QuantityKind::Length, QuantityKind::Time, QuantityKind::Mass,
                QuantityKind::Speed, QuantityKind::Charge, QuantityKind::Energy,
                QuantityKind::Action, QuantityKind::MagneticField,
            ];
            let kind = kinds[kind_idx];
            let there = convert(value, kind, SystemTag::CgsGaussian, SystemTag::RationalizedMks);
            let back = convert(there, kind, SystemTag::RationalizedMks, SystemTag::CgsGaussian);
            prop_assert!((back / value - 1.0).abs() < 1e-12);
        }

        #[test]
        fn widening_packet_never_flips_wavelength_pass_to_fail(
            sigma in 1e-6f64..1e3,
            grow in 1.0f64..1e6,
            mass in 1e-3f64..1e3,
            speed in 1e-3f64..1e3,
        ) {
            let narrow = PacketRegime::natural(sigma, mass, speed, 1.0);
            let wide = PacketRegime::natural(sigma * grow, mass, speed, 1.0);
            let a = check_regime(&narrow, 1e-2, 1e-3).unwrap();
            let b = check_regime(&wide, 1e-2, 1e-3).unwrap();
            prop_assert!(!a.wavelength_pass || b.wavelength_pass);
        }
    }
}
