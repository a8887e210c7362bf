//! Spontaneous four-wave mixing in a straight waveguide under CW pumping.
//!
//! Two flux models are provided. [`flux_exact`] is the full expression built
//! on the complex modulation-instability gain `g(ω)`; [`flux_lowpower`] is its
//! second-order expansion in `γP`, `(γPL)² sinc²(β₂ω²L/2)`. The integrated
//! pair rate uses the latter with the loss-reduced length in the prefactor and
//! the physical length in the phase-matching argument.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{AngularDetuning, LossCoefficient, PowerLevel, Wavelength, SPEED_OF_LIGHT};

/// How loss shortens the interaction length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectiveLength {
    /// `L·exp(−αL)`.
    #[default]
    Attenuated,
    /// `(1 − exp(−αL))/α`.
    Textbook,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveguideSpec {
    /// Physical length, m.
    pub length: f64,
    /// Effective mode area, m².
    pub effective_area: f64,
    /// Kerr index, m²/W.
    pub n2: f64,
    /// Group-velocity dispersion β₂, s²/m (signed).
    pub gvd: f64,
    pub loss: LossCoefficient,
    pub effective_length: EffectiveLength,
}

impl WaveguideSpec {
    pub fn new(
        length: f64,
        effective_area: f64,
        n2: f64,
        gvd: f64,
        loss: LossCoefficient,
    ) -> Result<Self> {
        let spec = Self {
            length,
            effective_area,
            n2,
            gvd,
            loss,
            effective_length: EffectiveLength::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 500×220 nm² silicon wire: A_eff = 0.064 µm², β₂ = −0.7 ps²/m, 4 dB/cm,
    /// n₂ = 4.4·10⁻¹⁸ m²/W (γ ≈ 280 W⁻¹m⁻¹ at 1540 nm).
    pub fn silicon_wire(length: f64) -> Self {
        Self {
            length,
            effective_area: 0.064e-12,
            n2: 4.4e-18,
            gvd: -0.7e-24,
            loss: LossCoefficient::from_db_per_cm(4.0),
            effective_length: EffectiveLength::Attenuated,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::invalid("waveguide.length_mm", "must be > 0"));
        }
        if !(self.effective_area > 0.0) {
            return Err(Error::invalid(
                "waveguide.effective_area_um2",
                "must be > 0",
            ));
        }
        if !(self.n2 >= 0.0) {
            return Err(Error::invalid("waveguide.n2_m2_per_w", "must be >= 0"));
        }
        if !self.gvd.is_finite() {
            return Err(Error::invalid("waveguide.gvd_ps2_per_m", "must be finite"));
        }
        if !(self.loss.value() >= 0.0) {
            return Err(Error::invalid("waveguide.loss_db_per_cm", "must be >= 0"));
        }
        Ok(())
    }

    /// `γ = 2πn₂/(λA_eff)`, W⁻¹m⁻¹.
    pub fn nonlinearity(&self, wavelength: Wavelength) -> f64 {
        2.0 * PI * self.n2 / (wavelength.meters() * self.effective_area)
    }

    /// Effective length under the configured convention.
    pub fn effective_length(&self) -> f64 {
        self.effective_length_with(self.effective_length)
    }

    pub fn effective_length_with(&self, convention: EffectiveLength) -> f64 {
        let al = self.loss.value() * self.length;
        match convention {
            EffectiveLength::Attenuated => self.length * (-al).exp(),
            EffectiveLength::Textbook if al == 0.0 => self.length,
            EffectiveLength::Textbook => -(-al).exp_m1() / self.loss.value(),
        }
    }

    /// `Δω = sqrt(2π/(|β₂|L))`, rad/s: the detuning of the first phase-matching zero.
    pub fn pair_bandwidth(&self) -> Result<f64> {
        if self.gvd == 0.0 {
            return Err(Error::Degenerate(
                "β₂ = 0: pair bandwidth is unbounded".into(),
            ));
        }
        Ok((2.0 * PI / (self.gvd.abs() * self.length)).sqrt())
    }

    /// Wavelength span of one sideband (pump to first zero), and of both
    /// sidebands together, in nm.
    pub fn pair_bandwidth_nm(&self, pump: Wavelength) -> Result<(f64, f64)> {
        let dw = AngularDetuning(self.pair_bandwidth()?);
        let blue = dw.wavelength(pump).nm();
        let red = dw.negate().wavelength(pump).nm();
        let linear = pump.meters().powi(2) * dw.rad_per_s() / (2.0 * PI * SPEED_OF_LIGHT) * 1e9;
        Ok((linear, red - blue))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PumpSpec {
    pub wavelength: Wavelength,
    pub power: PowerLevel,
}

impl PumpSpec {
    pub fn new(wavelength: Wavelength, power: PowerLevel) -> Self {
        Self { wavelength, power }
    }

    pub fn with_power(self, power: PowerLevel) -> Self {
        Self { power, ..self }
    }
}

/// Phenomenological uncorrelated-photon term: singles = pairs·excess + a·P.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Photons/s per W of pump.
    pub linear_coefficient: f64,
    /// Multiplier on the pair contribution to singles.
    pub quadratic_excess: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            linear_coefficient: 0.0,
            quadratic_excess: 1.0,
        }
    }
}

/// Modulation-instability gain `g = sqrt((γP)² − (κ/2)²)` with phase
/// mismatch `κ = β₂ω² + 2γP`. Purely imaginary outside the gain band.
pub fn mi_gain(wg: &WaveguideSpec, pump: &PumpSpec, detuning: AngularDetuning) -> Complex64 {
    let gp = wg.nonlinearity(pump.wavelength) * pump.power.watts();
    let w = detuning.rad_per_s();
    let half_kappa = 0.5 * wg.gvd * w * w + gp;
    // (γP)² − (κ/2)² factored to avoid cancellation at small ω
    let g2 = (gp - half_kappa) * (gp + half_kappa);
    if g2 >= 0.0 {
        Complex64::new(g2.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-g2).sqrt())
    }
}

/// `|γP sinh(g z)/g|²`, photons/(Hz·s).
pub fn flux_exact(wg: &WaveguideSpec, pump: &PumpSpec, detuning: AngularDetuning, z: f64) -> f64 {
    let gp = wg.nonlinearity(pump.wavelength) * pump.power.watts();
    let g = mi_gain(wg, pump, detuning);
    let gz = g * z;
    let sinh_over_g = if gz.norm() < 1e-4 {
        // sinh(x)/x = 1 + x²/6 + O(x⁴)
        (Complex64::new(1.0, 0.0) + gz * gz / 6.0) * z
    } else {
        gz.sinh() / g
    };
    (gp * sinh_over_g).norm_sqr()
}

/// Unnormalized `sin(x)/x`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `(γPL)² sinc²(β₂ω²L/2)` with a single length `l_used`.
pub fn flux_lowpower(
    wg: &WaveguideSpec,
    pump: &PumpSpec,
    detuning: AngularDetuning,
    l_used: f64,
) -> f64 {
    let gp = wg.nonlinearity(pump.wavelength) * pump.power.watts();
    let w = detuning.rad_per_s();
    (gp * l_used).powi(2) * sinc(0.5 * wg.gvd * w * w * l_used).powi(2)
}

/// Spectral density used for the integrated rate: the effective length sets
/// the amplitude and the physical length the phase-matching envelope.
pub fn flux_model(wg: &WaveguideSpec, pump: &PumpSpec, detuning: AngularDetuning) -> f64 {
    let gp = wg.nonlinearity(pump.wavelength) * pump.power.watts();
    let w = detuning.rad_per_s();
    (gp * wg.effective_length()).powi(2) * sinc(0.5 * wg.gvd * w * w * wg.length).powi(2)
}

/// Flux at zero detuning, `(γPL_eff)²`.
pub fn peak_flux(wg: &WaveguideSpec, pump: &PumpSpec) -> f64 {
    (wg.nonlinearity(pump.wavelength) * pump.power.watts() * wg.effective_length()).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairRate {
    /// Pairs/s, each pair counted once.
    pub rate: f64,
    /// Width (Hz) of a flat band at the peak density holding the same rate.
    pub equivalent_flat_width_hz: f64,
    pub abs_error: f64,
    pub lobes: usize,
}

const MAX_LOBES: usize = 100_000;

/// `∫₀^∞ sinc²(u²) du`, integrated lobe by lobe between the zeros `u² = kπ`
/// with the mean `1/(6U³)` tail appended.
fn sinc_sq_of_square_integral(rel_tol: f64) -> Result<(f64, f64, usize)> {
    let f = |u: f64| sinc(u * u).powi(2);
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut lo = 0.0;
    for k in 1..=MAX_LOBES {
        let hi = (k as f64 * PI).sqrt();
        let out = quadrature::double_exponential::integrate(f, lo, hi, 1e-14);
        sum += out.integral;
        err += out.error_estimate;
        lo = hi;
        let tail = 1.0 / (6.0 * hi.powi(3));
        if tail < 0.1 * rel_tol * sum {
            return Ok((sum + tail, err + tail * 0.1, k));
        }
    }
    Err(Error::Numerical(format!(
        "phase-matching integral did not converge after {MAX_LOBES} lobes (partial {sum:.6e}, error {err:.2e})"
    )))
}

/// Total pair rate `(1/2π)∫₀^∞ f(ω) dω` over one sideband, using [`flux_model`].
pub fn total_pair_rate(wg: &WaveguideSpec, pump: &PumpSpec) -> Result<PairRate> {
    let peak = peak_flux(wg, pump);
    if peak == 0.0 {
        return Ok(PairRate {
            rate: 0.0,
            equivalent_flat_width_hz: f64::NAN,
            abs_error: 0.0,
            lobes: 0,
        });
    }
    if wg.gvd == 0.0 {
        return Err(Error::Degenerate(
            "β₂ = 0: pair rate diverges without phase-matching cutoff".into(),
        ));
    }
    // u = ω·sqrt(|β₂|L/2)
    let scale = (0.5 * wg.gvd.abs() * wg.length).sqrt();
    let (integral, err, lobes) = sinc_sq_of_square_integral(1e-6)?;
    let width_rad = integral / scale;
    let width_hz = width_rad / (2.0 * PI);
    Ok(PairRate {
        rate: peak * width_hz,
        equivalent_flat_width_hz: width_hz,
        abs_error: peak * err / scale / (2.0 * PI),
        lobes,
    })
}

/// Singles flux in one band: one photon per pair plus the linear noise term.
pub fn photon_flux_model(pump: &PumpSpec, pair_rate: f64, noise: &NoiseModel) -> f64 {
    pair_rate * noise.quadratic_excess + noise.linear_coefficient * pump.power.watts()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxModel {
    Exact,
    LowPower,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluxSpectrum {
    pub pump: Wavelength,
    pub detunings: Vec<AngularDetuning>,
    /// photons/(Hz·s)
    pub density: Vec<f64>,
    pub model: FluxModel,
}

/// Symmetric, strictly increasing grid on `[-max, max]`.
pub fn detuning_grid(max: f64, points: usize) -> Vec<AngularDetuning> {
    assert!(points >= 2 && max > 0.0);
    let step = 2.0 * max / (points - 1) as f64;
    (0..points)
        .map(|i| AngularDetuning(-max + step * i as f64))
        .collect()
}

impl FluxSpectrum {
    /// Exact: [`flux_exact`] at `z = L_eff`. LowPower: [`flux_model`].
    pub fn compute(
        wg: &WaveguideSpec,
        pump: &PumpSpec,
        grid: Vec<AngularDetuning>,
        model: FluxModel,
    ) -> Result<Self> {
        if grid.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::invalid(
                "spectrum grid",
                "must be strictly increasing",
            ));
        }
        let z = wg.effective_length();
        let density = grid
            .iter()
            .map(|&w| match model {
                FluxModel::Exact => flux_exact(wg, pump, w, z),
                FluxModel::LowPower => flux_model(wg, pump, w),
            })
            .collect();
        Ok(Self {
            pump: pump.wavelength,
            detunings: grid,
            density,
            model,
        })
    }

    /// Columns `detuning_rad_s, wavelength_nm, flux_per_Hz_s`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["detuning_rad_s", "wavelength_nm", "flux_per_Hz_s"])?;
        for (d, f) in self.detunings.iter().zip(&self.density) {
            w.serialize((d.rad_per_s(), d.wavelength(self.pump).nm(), f))?;
        }
        w.flush().map_err(|e| Error::io("spectrum csv", e))?;
        Ok(())
    }
}

/// Frequency symmetry `1/λs + 1/λi = 2/λp` to 1 part in 10⁹.
pub fn check_energy_conservation(
    pump: Wavelength,
    signal: Wavelength,
    idler: Wavelength,
) -> Result<()> {
    let target = 2.0 / pump.meters();
    let sum = 1.0 / signal.meters() + 1.0 / idler.meters();
    if ((sum - target) / target).abs() > 1e-9 {
        return Err(Error::invalid(
            "signal/idler",
            format!(
                "energy conservation violated: 1/λs + 1/λi differs from 2/λp by {:.3e} relative",
                (sum - target) / target
            ),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn straight() -> WaveguideSpec {
        WaveguideSpec::silicon_wire(11.3e-3)
    }

    fn pump_mw(mw: f64) -> PumpSpec {
        PumpSpec::new(Wavelength::from_nm(1540.0), PowerLevel::from_mw(mw))
    }

    #[test]
    fn nonlinearity_examples() {
        let wg = straight();
        let g = wg.nonlinearity(Wavelength::from_nm(1540.0));
        assert!((g - 280.5).abs() < 0.05, "{g}");
        let mut wide = wg.clone();
        wide.effective_area *= 2.0;
        assert!((wide.nonlinearity(Wavelength::from_nm(1540.0)) - g / 2.0).abs() < 1e-9);
        let mut linear = wg;
        linear.n2 = 0.0;
        assert_eq!(linear.nonlinearity(Wavelength::from_nm(1540.0)), 0.0);
    }

    #[test]
    fn effective_length_conventions() {
        let wg = straight();
        assert!((wg.effective_length() - 3.99e-3).abs() < 0.005e-3);
        assert!((wg.effective_length_with(EffectiveLength::Textbook) - 7.02e-3).abs() < 0.005e-3);
        let mut lossless = wg;
        lossless.loss = LossCoefficient::per_meter(0.0);
        assert_eq!(lossless.effective_length(), lossless.length);
        assert_eq!(
            lossless.effective_length_with(EffectiveLength::Textbook),
            lossless.length
        );
    }

    #[test]
    fn gain_at_zero_detuning_vanishes() {
        let g = mi_gain(&straight(), &pump_mw(100.0), AngularDetuning(0.0));
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn gain_small_power_series() {
        // g = i|b|·sqrt(1 + 2γP/b), b = β₂ω²/2; expand to first order in γP/b
        let wg = straight();
        let pump = pump_mw(1e-3);
        let gp = wg.nonlinearity(pump.wavelength) * pump.power.watts();
        for w in [1e12, 5e12, 2e13] {
            let b = 0.5 * wg.gvd * w * w;
            let g = mi_gain(&wg, &pump, AngularDetuning(w));
            let series = b.abs() * (1.0 + gp / b);
            assert!(g.re.abs() < 1e-30);
            let eps = gp / b.abs();
            assert!(((g.im - series) / series).abs() < 2.0 * eps * eps, "w={w}");
        }
    }

    #[test]
    fn peak_gain_is_gamma_p_at_phase_matching() {
        let wg = straight();
        let pump = pump_mw(500.0);
        let gp = wg.nonlinearity(pump.wavelength) * pump.power.watts();
        let w_pm = (-2.0 * gp / wg.gvd).sqrt();
        let best = (1..4000)
            .map(|i| {
                let w = w_pm * 2.0 * i as f64 / 4000.0;
                (w, mi_gain(&wg, &pump, AngularDetuning(w)).re)
            })
            .fold((0.0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
        assert!((best.1 - gp).abs() / gp < 1e-5);
        assert!((best.0 - w_pm).abs() / w_pm < 1e-3);
        let at = mi_gain(&wg, &pump, AngularDetuning(w_pm)).re;
        assert!((at - gp).abs() / gp < 1e-12);
    }

    #[test]
    fn exact_flux_examples() {
        let wg = straight();
        let pump = pump_mw(5.0);
        assert_eq!(flux_exact(&wg, &pump, AngularDetuning(1e12), 0.0), 0.0);
        let f = flux_exact(&wg, &pump, AngularDetuning(1e11), 4e-3);
        let gp = wg.nonlinearity(pump.wavelength) * 5e-3;
        assert!((f - (gp * 4e-3).powi(2)).abs() / f < 1e-4);
        assert!((f - 3.14e-5).abs() < 0.01e-5, "{f}");
    }

    #[test]
    fn exact_agrees_with_lowpower_in_main_lobe() {
        let wg = straight();
        let gamma = wg.nonlinearity(Wavelength::from_nm(1540.0));
        let z = wg.length;
        // γPz = 1e-2
        let pump = pump_mw(1e-2 / (gamma * z) * 1e3);
        let edge = (2.0 * 1.25 / (wg.gvd.abs() * z)).sqrt();
        for w in detuning_grid(edge, 101) {
            let e = flux_exact(&wg, &pump, w, z);
            let l = flux_lowpower(&wg, &pump, w, z);
            assert!((e / l - 1.0).abs() < 0.01, "ω={:e} ratio {}", w.0, e / l);
        }
    }

    #[test]
    fn lowpower_examples() {
        let wg = straight();
        let pump = pump_mw(5.0);
        let gp = wg.nonlinearity(pump.wavelength) * 5e-3;
        let f0 = flux_lowpower(&wg, &pump, AngularDetuning(0.0), wg.length);
        assert!((f0 - (gp * wg.length).powi(2)).abs() / f0 < 1e-15);
        // first zero: β₂ω²L/2 = π
        let zero = (2.0 * PI / (wg.gvd.abs() * wg.length)).sqrt();
        assert!((zero - 2.818e13).abs() < 0.001e13);
        assert!(flux_lowpower(&wg, &pump, AngularDetuning(zero), wg.length) < 1e-30 * f0.max(1.0));
        let f2 = flux_lowpower(&wg, &pump_mw(10.0), AngularDetuning(1e13), wg.length);
        let f1 = flux_lowpower(&wg, &pump, AngularDetuning(1e13), wg.length);
        assert!((f2 / f1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn bandwidth_examples() {
        let wg = straight();
        let dw = wg.pair_bandwidth().unwrap();
        assert!((dw - 2.82e13).abs() < 0.005e13);
        let (one_side, both) = wg.pair_bandwidth_nm(Wavelength::from_nm(1540.0)).unwrap();
        assert!((one_side - 35.5).abs() < 0.1, "{one_side}");
        assert!(both > 2.0 * one_side * 0.99 && both < 2.0 * one_side * 1.01);
        let mut long = wg.clone();
        long.length *= 4.0;
        assert!((long.pair_bandwidth().unwrap() - dw / 2.0).abs() / dw < 1e-12);
        let mut normal = wg.clone();
        normal.gvd = -normal.gvd;
        assert_eq!(normal.pair_bandwidth().unwrap(), dw);
        let mut flat = wg;
        flat.gvd = 0.0;
        assert!(matches!(flat.pair_bandwidth(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn total_rate_matches_closed_form() {
        // ∫₀^∞ sin²(u²)/u⁴ du = 2√π/3
        let wg = straight();
        let pump = pump_mw(5.0);
        let r = total_pair_rate(&wg, &pump).unwrap();
        let scale = (0.5 * wg.gvd.abs() * wg.length).sqrt();
        let closed = peak_flux(&wg, &pump) / (2.0 * PI) * (2.0 * PI.sqrt() / 3.0) / scale;
        assert!(
            (r.rate - closed).abs() / closed < 1e-4,
            "{} vs {}",
            r.rate,
            closed
        );
        assert!((r.rate - 9.4e7).abs() < 0.05e7, "{}", r.rate);
        assert_eq!(total_pair_rate(&wg, &pump_mw(0.0)).unwrap().rate, 0.0);
    }

    #[test]
    fn total_rate_quadratic_in_power() {
        let wg = straight();
        let a = total_pair_rate(&wg, &pump_mw(6.0)).unwrap().rate;
        let b = total_pair_rate(&wg, &pump_mw(3.0)).unwrap().rate;
        assert!((a / b - 4.0).abs() < 1e-12);
    }

    #[test]
    fn singles_model() {
        let pump = pump_mw(5.0);
        let noise = NoiseModel::default();
        assert_eq!(photon_flux_model(&pump, 1e6, &noise), 1e6);
        let noisy = NoiseModel {
            linear_coefficient: 1e8,
            ..noise
        };
        assert_eq!(photon_flux_model(&pump_mw(0.0), 0.0, &noisy), 0.0);
        assert!((photon_flux_model(&pump, 1e6, &noisy) - 1.5e6).abs() < 1e-6);
    }

    #[test]
    fn spectrum_csv_header_and_rows() {
        let wg = straight();
        let s = FluxSpectrum::compute(
            &wg,
            &pump_mw(5.0),
            detuning_grid(3e13, 5),
            FluxModel::LowPower,
        )
        .unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "detuning_rad_s,wavelength_nm,flux_per_Hz_s"
        );
        assert_eq!(lines.count(), 5);
        assert!(FluxSpectrum::compute(
            &wg,
            &pump_mw(5.0),
            vec![AngularDetuning(1.0), AngularDetuning(1.0)],
            FluxModel::Exact
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn fluxes_non_negative(mw in 0.0f64..1000.0, w in -1e14f64..1e14, z in 0.0f64..0.02) {
            let wg = straight();
            let p = pump_mw(mw);
            prop_assert!(flux_exact(&wg, &p, AngularDetuning(w), z) >= 0.0);
            prop_assert!(flux_lowpower(&wg, &p, AngularDetuning(w), z) >= 0.0);
        }

        #[test]
        fn lowpower_even_in_detuning_and_dispersion(mw in 0.1f64..50.0, w in 0.0f64..1e14) {
            let wg = straight();
            let mut flipped = wg.clone();
            flipped.gvd = -wg.gvd;
            let p = pump_mw(mw);
            let a = flux_lowpower(&wg, &p, AngularDetuning(w), wg.length);
            prop_assert_eq!(a, flux_lowpower(&wg, &p, AngularDetuning(-w), wg.length));
            prop_assert_eq!(a, flux_lowpower(&flipped, &p, AngularDetuning(w), wg.length));
        }

        #[test]
        fn envelope_decays_across_main_lobe(frac in 0.0f64..0.999) {
            let wg = straight();
            let p = pump_mw(5.0);
            let dw = wg.pair_bandwidth().unwrap();
            let a = flux_lowpower(&wg, &p, AngularDetuning(frac * dw), wg.length);
            let b = flux_lowpower(&wg, &p, AngularDetuning((frac + 0.001) * dw), wg.length);
            prop_assert!(b <= a);
            prop_assert!(flux_lowpower(&wg, &p, AngularDetuning(dw), wg.length) < flux_lowpower(&wg, &p, AngularDetuning(0.0), wg.length));
        }
    }
}
