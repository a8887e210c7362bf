//! Unit-safe scalars and the handful of conversions the models need.
//!
//! Everything is stored in SI. Human-facing I/O uses nm, mW, dB and dB/cm,
//! so each newtype has explicit constructors/accessors for those units.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// `10^(x/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `10·log10(x)`. Returns `-inf` for zero and `NaN` for negative input.
pub fn linear_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Vacuum wavelength, stored in meters.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Wavelength(f64);

impl Wavelength {
    pub fn from_meters(m: f64) -> Self {
        debug_assert!(m > 0.0, "wavelength must be positive");
        Self(m)
    }

    pub fn from_nm(nm: f64) -> Self {
        Self::from_meters(nm * 1e-9)
    }

    pub fn meters(self) -> f64 {
        self.0
    }

    pub fn nm(self) -> f64 {
        self.0 * 1e9
    }

    /// Optical frequency `c/λ`, Hz.
    pub fn frequency_hz(self) -> f64 {
        SPEED_OF_LIGHT / self.0
    }

    pub fn from_frequency_hz(nu: f64) -> Self {
        Self::from_meters(SPEED_OF_LIGHT / nu)
    }

    /// Photon energy `hc/λ`, J.
    pub fn photon_energy(self) -> f64 {
        PLANCK * self.frequency_hz()
    }

    /// Detuning of `self` from a pump at `pump`: `ω = 2πc(1/λ − 1/λ_p)`.
    ///
    /// Positive detuning is the blue (anti-Stokes) side.
    pub fn detuning_from(self, pump: Wavelength) -> AngularDetuning {
        AngularDetuning(2.0 * PI * SPEED_OF_LIGHT * (1.0 / self.0 - 1.0 / pump.0))
    }

    /// The energy-conserving partner wavelength about `pump`.
    pub fn conjugate_about(self, pump: Wavelength) -> Wavelength {
        self.detuning_from(pump).negate().wavelength(pump)
    }
}

/// Signed angular-frequency offset from the pump, rad/s. Positive values are
/// on the anti-Stokes (higher frequency, shorter wavelength) side; zero is the
/// pump itself.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct AngularDetuning(pub f64);

impl AngularDetuning {
    pub fn rad_per_s(self) -> f64 {
        self.0
    }

    pub fn negate(self) -> Self {
        Self(-self.0)
    }

    /// Inverse of [`Wavelength::detuning_from`].
    pub fn wavelength(self, pump: Wavelength) -> Wavelength {
        let inv = 1.0 / pump.meters() + self.0 / (2.0 * PI * SPEED_OF_LIGHT);
        Wavelength::from_meters(1.0 / inv)
    }
}

/// Optical power in watts.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct PowerLevel(f64);

impl PowerLevel {
    pub fn from_watts(w: f64) -> Self {
        debug_assert!(w >= 0.0, "power must be non-negative");
        Self(w)
    }

    pub fn from_mw(mw: f64) -> Self {
        Self::from_watts(mw * 1e-3)
    }

    pub fn from_dbm(dbm: f64) -> Self {
        Self::from_mw(db_to_linear(dbm))
    }

    pub fn watts(self) -> f64 {
        self.0
    }

    pub fn mw(self) -> f64 {
        self.0 * 1e3
    }

    pub fn dbm(self) -> f64 {
        linear_to_db(self.mw())
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self(self.0 * factor)
    }
}

/// Intensity attenuation coefficient α, m⁻¹ (so intensity decays as `e^{-αz}`).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct LossCoefficient(f64);

impl LossCoefficient {
    pub fn per_meter(alpha: f64) -> Self {
        debug_assert!(alpha >= 0.0, "loss must be non-negative");
        Self(alpha)
    }

    /// From dB/cm: `α[m⁻¹] = 100 · x · ln(10)/10`.
    pub fn from_db_per_cm(db_cm: f64) -> Self {
        Self::per_meter(db_cm * std::f64::consts::LN_10 / 10.0 * 100.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn per_cm(self) -> f64 {
        self.0 / 100.0
    }

    pub fn db_per_cm(self) -> f64 {
        self.per_cm() * 10.0 / std::f64::consts::LN_10
    }

    /// Power transmission over `length` meters.
    pub fn transmission(self, length: f64) -> f64 {
        (-self.0 * length).exp()
    }
}
