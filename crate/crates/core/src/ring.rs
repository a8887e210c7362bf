//! All-pass racetrack micro-ring: round-trip phase, intensity buildup,
//! transmission, finesse, resonance-enhanced pair generation, and inversion of
//! measured (buildup, finesse) into coupler transmission and round-trip loss.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{linear_to_db, PowerLevel, Wavelength, SPEED_OF_LIGHT};
use crate::waveguide::{check_energy_conservation, PumpSpec, WaveguideSpec};

/// How the buildup factors enter the resonant pair-flux expression.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnhancementReading {
    /// Factors are field amplitudes, `A = sqrt(F_int)`.
    #[default]
    Amplitude,
    /// Factors are the intensity buildup `F_int` itself.
    Intensity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RingSpec {
    /// Round-trip length, m.
    pub round_trip_length: f64,
    /// Coupler intensity transmission T (power coupled across per pass).
    pub coupler_transmission: f64,
    /// Round-trip intensity loss η.
    pub round_trip_loss: f64,
    pub reference_resonance: Wavelength,
    /// Free spectral range in wavelength at the reference resonance, m.
    pub fsr: f64,
    /// Second resonance of each doublet, this far (m) to the red.
    pub split_offset: Option<f64>,
    /// Linewidth (m) used for the pair-rate integral instead of the cold FWHM.
    pub fwhm_override: Option<f64>,
    pub reading: EnhancementReading,
}

impl RingSpec {
    pub fn new(
        round_trip_length: f64,
        coupler_transmission: f64,
        round_trip_loss: f64,
        reference_resonance: Wavelength,
        fsr: f64,
    ) -> Result<Self> {
        let ring = Self {
            round_trip_length,
            coupler_transmission,
            round_trip_loss,
            reference_resonance,
            fsr,
            split_offset: None,
            fwhm_override: None,
            reading: EnhancementReading::default(),
        };
        ring.validate()?;
        Ok(ring)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.round_trip_length > 0.0) {
            return Err(Error::invalid("ring.round_trip_length_um", "must be > 0"));
        }
        if !(self.coupler_transmission > 0.0 && self.coupler_transmission < 0.5) {
            return Err(Error::invalid(
                "ring.coupler_transmission",
                "must be in (0, 0.5)",
            ));
        }
        if !(self.round_trip_loss >= 0.0 && self.round_trip_loss < 0.5) {
            return Err(Error::invalid(
                "ring.round_trip_loss",
                "must be in [0, 0.5)",
            ));
        }
        if !(self.fsr > 0.0) {
            return Err(Error::invalid("ring.fsr_nm", "must be > 0"));
        }
        if let Some(s) = self.split_offset {
            if !(s >= 0.0) {
                return Err(Error::invalid("ring.split_offset_pm", "must be >= 0"));
            }
        }
        if let Some(w) = self.fwhm_override {
            if !(w > 0.0) {
                return Err(Error::invalid("ring.fwhm_override_pm", "must be > 0"));
            }
        }
        Ok(())
    }

    /// Free spectral range in frequency, Hz.
    pub fn fsr_hz(&self) -> f64 {
        SPEED_OF_LIGHT * self.fsr / self.reference_resonance.meters().powi(2)
    }

    /// `Φ = 2π(ν − ν_ref)/FSR_ν`; zero at the reference resonance.
    pub fn round_trip_phase(&self, wavelength: Wavelength) -> f64 {
        2.0 * PI * (wavelength.frequency_hz() - self.reference_resonance.frequency_hz())
            / self.fsr_hz()
    }

    /// Intensity buildup at a given round-trip phase.
    pub fn enhancement_at_phase(&self, phase: f64) -> f64 {
        let t = self.coupler_transmission;
        let half = 0.5 * (t + self.round_trip_loss);
        let s = (0.5 * phase).sin();
        t / (half * half + 4.0 * s * s)
    }

    fn phases(&self, wavelength: Wavelength) -> (f64, Option<f64>) {
        let main = self.round_trip_phase(wavelength);
        let partner = self.split_offset.map(|offset| {
            let shifted = Wavelength::from_meters(wavelength.meters() - offset);
            self.round_trip_phase(shifted)
        });
        (main, partner)
    }

    /// `F ≈ T/((T/2 + η/2)² + 4 sin²(Φ/2))`. With a split offset the larger of
    /// the two doublet members is returned.
    pub fn field_enhancement(&self, wavelength: Wavelength) -> f64 {
        match self.phases(wavelength) {
            (p, None) => self.enhancement_at_phase(p),
            (p, Some(q)) => self
                .enhancement_at_phase(p)
                .max(self.enhancement_at_phase(q)),
        }
    }

    fn all_pass(&self, phase: f64) -> Complex64 {
        let t = (1.0 - self.coupler_transmission).sqrt();
        let a = (1.0 - self.round_trip_loss).sqrt();
        let e = Complex64::from_polar(1.0, phase);
        (t - a * e) / (1.0 - t * a * e)
    }

    /// Bus intensity transmission; doublet members act in series.
    pub fn transmission(&self, wavelength: Wavelength) -> f64 {
        match self.phases(wavelength) {
            (p, None) => self.all_pass(p).norm_sqr(),
            (p, Some(q)) => (self.all_pass(p) * self.all_pass(q)).norm_sqr(),
        }
    }

    /// `finesse = 2π/(T + η)` and `fwhm = fsr/finesse` (m).
    pub fn finesse_and_fwhm(&self) -> Result<(f64, f64)> {
        let s = self.coupler_transmission + self.round_trip_loss;
        if !(s > 0.0) {
            return Err(Error::Degenerate("T + η must be > 0".into()));
        }
        let finesse = 2.0 * PI / s;
        Ok((finesse, self.fsr / finesse))
    }

    /// The linewidth used by [`ring_pair_rate`].
    pub fn effective_fwhm(&self) -> Result<f64> {
        match self.fwhm_override {
            Some(w) => Ok(w),
            None => Ok(self.finesse_and_fwhm()?.1),
        }
    }

    /// Resonance `m` orders away from the reference (positive = blue).
    pub fn resonance(&self, order: i64) -> Wavelength {
        Wavelength::from_frequency_hz(
            self.reference_resonance.frequency_hz() + order as f64 * self.fsr_hz(),
        )
    }

    /// Order of the resonance nearest `wavelength`.
    pub fn nearest_order(&self, wavelength: Wavelength) -> i64 {
        (self.round_trip_phase(wavelength) / (2.0 * PI)).round() as i64
    }

    pub fn resonances(&self, lo: Wavelength, hi: Wavelength) -> Result<Vec<Resonance>> {
        let (_, fwhm) = self.finesse_and_fwhm()?;
        let lowest = (self.round_trip_phase(hi) / (2.0 * PI)).ceil() as i64;
        let highest = (self.round_trip_phase(lo) / (2.0 * PI)).floor() as i64;
        let mut out = Vec::new();
        for m in lowest..=highest {
            let center = self.resonance(m);
            let mut members = vec![center];
            if let Some(offset) = self.split_offset.filter(|&o| o > 0.0) {
                members.push(Wavelength::from_meters(center.meters() + offset));
            }
            for c in members {
                if c >= lo && c <= hi {
                    out.push(Resonance {
                        center: c,
                        fwhm,
                        enhancement: self.field_enhancement(c),
                    });
                }
            }
        }
        out.sort_by(|a, b| a.center.partial_cmp(&b.center).unwrap());
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resonance {
    pub center: Wavelength,
    /// m
    pub fwhm: f64,
    pub enhancement: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingRegime {
    Under,
    Critical,
    Over,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub coupler_transmission: f64,
    pub round_trip_loss: f64,
    pub regime: CouplingRegime,
}

/// Solve `4T/(T+η)² = F` and `2π/(T+η) = finesse` for `(T, η)`.
///
/// With `T + η` fixed by the finesse the buildup equation is linear in `T`,
/// so the solution is unique. A real solution needs `η ≥ 0`, i.e.
/// `F ≤ 2·finesse/π`. `F = finesse/π` is critical coupling.
pub fn calibrate_from_measurement(enhancement: f64, finesse: f64) -> Result<Calibration> {
    if !(enhancement > 0.0) {
        return Err(Error::invalid("ring.calibrate.enhancement", "must be > 0"));
    }
    if !(finesse > 2.0 * PI) {
        return Err(Error::invalid(
            "ring.calibrate.finesse",
            "must exceed 2π (T + η < 1)",
        ));
    }
    let sum = 2.0 * PI / finesse;
    let t = enhancement * sum * sum / 4.0;
    let eta = sum - t;
    let bound = 2.0 * finesse / PI;
    if eta < -1e-12 * sum {
        return Err(Error::invalid(
            "ring.calibrate",
            format!("no real solution: buildup {enhancement} exceeds 2·finesse/π = {bound:.3}"),
        ));
    }
    let eta = eta.max(0.0);
    if t >= 0.5 || eta >= 0.5 {
        return Err(Error::invalid(
            "ring.calibrate",
            "solution outside T, η < 0.5",
        ));
    }
    let regime = if (t - eta).abs() <= 0.01 * sum {
        CouplingRegime::Critical
    } else if t < eta {
        CouplingRegime::Under
    } else {
        CouplingRegime::Over
    };
    Ok(Calibration {
        coupler_transmission: t,
        round_trip_loss: eta,
        regime,
    })
}

pub fn intracavity_power(ring: &RingSpec, pump: &PumpSpec) -> PowerLevel {
    pump.power.scaled(ring.field_enhancement(pump.wavelength))
}

/// Signal/idler pairs frequency-symmetric about the pump for each detuning (Hz).
pub fn conjugate_pairs(pump: Wavelength, offsets_hz: &[f64]) -> Vec<(Wavelength, Wavelength)> {
    let nu = pump.frequency_hz();
    offsets_hz
        .iter()
        .map(|d| {
            (
                Wavelength::from_frequency_hz(nu - d),
                Wavelength::from_frequency_hz(nu + d),
            )
        })
        .collect()
}

/// Resonant pair spectral density, photons/(Hz·s):
/// `(B_p² B_s B_i γ P L_ring)²` with `B` read per [`EnhancementReading`].
pub fn ring_pair_flux(
    ring: &RingSpec,
    wg: &WaveguideSpec,
    pump: &PumpSpec,
    signal: Wavelength,
    idler: Wavelength,
) -> Result<f64> {
    check_energy_conservation(pump.wavelength, signal, idler)?;
    let factor = |w: Wavelength| {
        let f = ring.field_enhancement(w);
        match ring.reading {
            EnhancementReading::Amplitude => f.sqrt(),
            EnhancementReading::Intensity => f,
        }
    };
    let b_p = factor(pump.wavelength);
    let gpl = wg.nonlinearity(pump.wavelength) * pump.power.watts() * ring.round_trip_length;
    Ok((b_p * b_p * factor(signal) * factor(idler) * gpl).powi(2))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RingPairRate {
    /// pairs/s
    pub rate: f64,
    /// photons/(Hz·s) with signal and idler on their resonance centers
    pub peak_flux: f64,
    pub signal: Wavelength,
    pub idler: Wavelength,
    /// Hz
    pub linewidth_hz: f64,
}

/// Integrated Lorentzian-pair weight: `∫ L(δ)² dδ = (π/4)·FWHM` for a
/// unit-peak Lorentzian.
pub const LORENTZIAN_PAIR_FACTOR: f64 = PI / 4.0;

/// Pair rate with the pump on resonance, integrating over the adjacent
/// signal/idler resonance pair.
pub fn ring_pair_rate(
    ring: &RingSpec,
    wg: &WaveguideSpec,
    pump: &PumpSpec,
) -> Result<RingPairRate> {
    let (_, cold_fwhm) = ring.finesse_and_fwhm()?;
    let order = ring.nearest_order(pump.wavelength);
    let detune = ring.round_trip_phase(pump.wavelength) - 2.0 * PI * order as f64;
    let half_width_phase = PI * cold_fwhm / ring.fsr;
    if detune.abs() > half_width_phase {
        return Err(Error::invalid(
            "pump.wavelength_nm",
            format!(
                "pump must sit within half a linewidth of a resonance (detuned {detune:.3e} rad)"
            ),
        ));
    }
    let nu_p = pump.wavelength.frequency_hz();
    let signal = Wavelength::from_frequency_hz(nu_p - ring.fsr_hz());
    let idler = Wavelength::from_frequency_hz(nu_p + ring.fsr_hz());
    let peak_flux = ring_pair_flux(ring, wg, pump, signal, idler)?;
    let fwhm = ring.effective_fwhm()?;
    let linewidth_hz = SPEED_OF_LIGHT * fwhm / signal.meters().powi(2);
    Ok(RingPairRate {
        rate: peak_flux * LORENTZIAN_PAIR_FACTOR * linewidth_hz,
        peak_flux,
        signal,
        idler,
        linewidth_hz,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityRatio {
    /// Against `(γPL)²` with the straight guide's physical length.
    pub vs_physical_length: f64,
    /// Against `(γPL_eff)²`.
    pub vs_effective_length: f64,
}

/// Peak spectral density of the ring over that of a straight waveguide at
/// the same pump power.
pub fn spectral_density_ratio(
    ring: &RingSpec,
    ring_wg: &WaveguideSpec,
    straight: &WaveguideSpec,
    pump: &PumpSpec,
) -> Result<DensityRatio> {
    let rate = ring_pair_rate(ring, ring_wg, pump)?;
    let gp = straight.nonlinearity(pump.wavelength) * pump.power.watts();
    if gp == 0.0 {
        return Err(Error::Degenerate("straight-waveguide flux is zero".into()));
    }
    Ok(DensityRatio {
        vs_physical_length: rate.peak_flux / (gp * straight.length).powi(2),
        vs_effective_length: rate.peak_flux / (gp * straight.effective_length()).powi(2),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RingSpectrumRow {
    pub wavelength_nm: f64,
    pub transmission_db: f64,
    pub enhancement: f64,
}

pub fn ring_spectrum(
    ring: &RingSpec,
    lo: Wavelength,
    hi: Wavelength,
    points: usize,
) -> Vec<RingSpectrumRow> {
    assert!(points >= 2);
    let step = (hi.meters() - lo.meters()) / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let w = Wavelength::from_meters(lo.meters() + step * i as f64);
            RingSpectrumRow {
                wavelength_nm: w.nm(),
                transmission_db: linear_to_db(ring.transmission(w)),
                enhancement: ring.field_enhancement(w),
            }
        })
        .collect()
}

pub fn write_spectrum_csv<W: Write>(rows: &[RingSpectrumRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("ring spectrum csv", e))?;
    Ok(())
}

pub fn write_resonances_csv<W: Write>(resonances: &[Resonance], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["center_nm", "fwhm_pm", "enhancement"])?;
    for r in resonances {
        w.serialize((r.center.nm(), r.fwhm * 1e12, r.enhancement))?;
    }
    w.flush().map_err(|e| Error::io("resonance csv", e))?;
    Ok(())
}
