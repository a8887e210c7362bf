//! Sagnac loop: a waveguide loop closed by one directional coupler.
//!
//! Port convention: the pump enters port 1. Port 1 is the reflection port and
//! port 2 the transmission port. Through-coupling has amplitude `√(1−κ)`,
//! cross-coupling `i√κ`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{db_to_linear, linear_to_db, PowerLevel, Wavelength};
use crate::waveguide::{check_energy_conservation, total_pair_rate, PumpSpec, WaveguideSpec};

/// Piecewise-linear power-coupling ratio κ(λ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplerModel {
    anchors: Vec<(Wavelength, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplerRatio {
    pub kappa: f64,
    /// The wavelength lies outside the anchor span.
    pub extrapolated: bool,
}

impl CouplerModel {
    pub fn new(anchors: Vec<(Wavelength, f64)>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::invalid(
                "sagnac.coupler_anchors",
                "need at least one anchor",
            ));
        }
        if anchors.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::invalid(
                "sagnac.coupler_anchors",
                "wavelengths must be strictly increasing",
            ));
        }
        if anchors.iter().any(|&(_, k)| !(k > 0.0 && k < 1.0)) {
            return Err(Error::invalid(
                "sagnac.coupler_anchors",
                "κ must be in (0, 1)",
            ));
        }
        Ok(Self { anchors })
    }

    /// Anchors at 1520/1540/1560 nm with κ = 0.52/0.62/0.72.
    pub fn measured() -> Self {
        Self::new(vec![
            (Wavelength::from_nm(1520.0), 0.52),
            (Wavelength::from_nm(1540.0), 0.62),
            (Wavelength::from_nm(1560.0), 0.72),
        ])
        .expect("static anchors")
    }

    /// Wavelength-independent coupler.
    pub fn flat(kappa: f64) -> Result<Self> {
        Self::new(vec![(Wavelength::from_nm(1550.0), kappa)])
    }

    pub fn anchors(&self) -> &[(Wavelength, f64)] {
        &self.anchors
    }

    pub fn ratio(&self, wavelength: Wavelength) -> Result<CouplerRatio> {
        let a = &self.anchors;
        if a.len() == 1 {
            return Ok(CouplerRatio {
                kappa: a[0].1,
                extrapolated: false,
            });
        }
        let x = wavelength.meters();
        let first = a[0].0.meters();
        let last = a[a.len() - 1].0.meters();
        let seg = a
            .windows(2)
            .position(|w| x <= w[1].0.meters())
            .unwrap_or(a.len() - 2);
        let (x0, k0) = (a[seg].0.meters(), a[seg].1);
        let (x1, k1) = (a[seg + 1].0.meters(), a[seg + 1].1);
        let kappa = k0 + (k1 - k0) * (x - x0) / (x1 - x0);
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::invalid(
                "sagnac.coupler_anchors",
                format!("κ extrapolates to {kappa:.3} at {:.2} nm", wavelength.nm()),
            ));
        }
        Ok(CouplerRatio {
            kappa,
            extrapolated: x < first || x > last,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SagnacSpec {
    pub loop_guide: WaveguideSpec,
    pub coupler: CouplerModel,
    /// Extra passive loss on the output path, dB, applied to the pump and to
    /// each pair photon.
    pub excess_loss_db: f64,
}

impl SagnacSpec {
    pub fn new(loop_guide: WaveguideSpec, coupler: CouplerModel) -> Self {
        Self {
            loop_guide,
            coupler,
            excess_loss_db: 0.0,
        }
    }

    /// 10 mm narrow loop with the measured coupler dispersion.
    pub fn measured() -> Self {
        Self::new(WaveguideSpec::silicon_wire(10e-3), CouplerModel::measured())
    }

    pub fn validate(&self) -> Result<()> {
        self.loop_guide.validate()?;
        if !(self.excess_loss_db >= 0.0) {
            return Err(Error::invalid("sagnac.excess_loss_db", "must be >= 0"));
        }
        Ok(())
    }

    fn excess_transmission(&self) -> f64 {
        db_to_linear(-self.excess_loss_db)
    }
}

/// Pump fraction leaving the transmission port of an ideal loop: `(1−2κ)²`.
pub fn pump_transmission_fraction(kappa: f64) -> f64 {
    (1.0 - 2.0 * kappa).powi(2)
}

/// Extinction at the transmission port, dB. `+inf` for a balanced coupler.
pub fn extinction_db(kappa: f64) -> f64 {
    let f = pump_transmission_fraction(kappa);
    if f == 0.0 {
        f64::INFINITY
    } else {
        -linear_to_db(f)
    }
}

pub fn pump_extinction(spec: &SagnacSpec, pump: Wavelength) -> Result<f64> {
    Ok(extinction_db(spec.coupler.ratio(pump)?.kappa))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PortStatistics {
    pub p_both_transmit: f64,
    pub p_both_reflect: f64,
    /// Sum of both split configurations.
    pub p_split: f64,
    /// pairs/s generated inside the loop
    pub generated_pair_rate: f64,
    /// pump fraction leaving the transmission port, including loop and excess loss
    pub transmitted_pump_fraction: f64,
}

impl PortStatistics {
    /// Pairs/s leaving the transmission port with both photons.
    pub fn transmitted_pair_rate(&self) -> f64 {
        self.generated_pair_rate * self.p_both_transmit
    }
}

/// Exit amplitudes `[both transmit, both reflect, signal reflect/idler transmit,
/// signal transmit/idler reflect]`, real after dropping a common phase.
///
/// The pair is generated clockwise with weight `(1−κp)` or counter-clockwise
/// with weight `−κp` (the pump crosses twice).
pub fn exit_amplitudes(kp: f64, ks: f64, ki: f64) -> [f64; 4] {
    let (tp, rp) = (1.0 - kp, kp);
    let (ts, cs) = (1.0 - ks, ks);
    let (ti, ci) = (1.0 - ki, ki);
    [
        tp * (ts * ti).sqrt() + rp * (cs * ci).sqrt(),
        -(tp * (cs * ci).sqrt() + rp * (ts * ti).sqrt()),
        tp * (cs * ti).sqrt() - rp * (ts * ci).sqrt(),
        tp * (ts * ci).sqrt() - rp * (cs * ti).sqrt(),
    ]
}

/// Port probabilities for a pair from `(κp, κs, κi)`.
pub fn port_probabilities(kp: f64, ks: f64, ki: f64) -> (f64, f64, f64) {
    let a = exit_amplitudes(kp, ks, ki);
    let norm = (1.0 - kp).powi(2) + kp * kp;
    let p = a.map(|x| x * x / norm);
    (p[0], p[1], p[2] + p[3])
}

pub fn pair_port_statistics(
    spec: &SagnacSpec,
    pump: &PumpSpec,
    signal: Wavelength,
    idler: Wavelength,
) -> Result<PortStatistics> {
    check_energy_conservation(pump.wavelength, signal, idler)?;
    let kp = spec.coupler.ratio(pump.wavelength)?.kappa;
    let ks = spec.coupler.ratio(signal)?.kappa;
    let ki = spec.coupler.ratio(idler)?.kappa;
    let (bt, br, split) = port_probabilities(kp, ks, ki);
    let loop_rate = total_pair_rate(&spec.loop_guide, pump)?.rate;
    let excess = spec.excess_transmission();
    Ok(PortStatistics {
        p_both_transmit: bt,
        p_both_reflect: br,
        p_split: split,
        generated_pair_rate: ((1.0 - kp).powi(2) + kp * kp) * loop_rate * excess * excess,
        transmitted_pump_fraction: pump_transmission_fraction(kp)
            * spec.loop_guide.loss.transmission(spec.loop_guide.length)
            * excess,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SagnacSweepRow {
    pub power_mw_in: f64,
    pub pump_out_uw: f64,
    pub pair_flux_mhz: f64,
    pub extinction_db: f64,
}

pub fn transmitted_pump_vs_pair_flux(
    spec: &SagnacSpec,
    pump_wavelength: Wavelength,
    powers: &[PowerLevel],
    signal: Wavelength,
    idler: Wavelength,
) -> Result<Vec<SagnacSweepRow>> {
    if powers.is_empty() {
        return Err(Error::invalid(
            "sagnac.sweep.powers_mw",
            "sweep must be non-empty",
        ));
    }
    let ext = pump_extinction(spec, pump_wavelength)?;
    powers
        .iter()
        .map(|&p| {
            let stats =
                pair_port_statistics(spec, &PumpSpec::new(pump_wavelength, p), signal, idler)?;
            Ok(SagnacSweepRow {
                power_mw_in: p.mw(),
                pump_out_uw: p.watts() * stats.transmitted_pump_fraction * 1e6,
                pair_flux_mhz: stats.transmitted_pair_rate() * 1e-6,
                extinction_db: ext,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SagnacSweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("sagnac sweep csv", e))?;
    Ok(())
}

/// Comparison of the loop against a straight waveguide pumped at the same
/// wavelength.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StraightComparison {
    /// How much less pump leaves the loop than the straight guide when both
    /// deliver the same transmitted pair flux, dB.
    pub pump_suppression_db: f64,
    /// Straight-guide pair flux over loop-transmitted pair flux at equal input power.
    pub efficiency_drop: f64,
}

/// Both fluxes are quadratic in power, so the comparison does not depend on
/// the flux level.
pub fn compare_with_straight(
    spec: &SagnacSpec,
    straight: &WaveguideSpec,
    pump_wavelength: Wavelength,
    signal: Wavelength,
    idler: Wavelength,
) -> Result<StraightComparison> {
    let pump = PumpSpec::new(pump_wavelength, PowerLevel::from_mw(1.0));
    let stats = pair_port_statistics(spec, &pump, signal, idler)?;
    let loop_flux = stats.transmitted_pair_rate();
    let straight_flux = total_pair_rate(straight, &pump)?.rate;
    if loop_flux == 0.0 || straight_flux == 0.0 {
        return Err(Error::Degenerate("zero pair flux in comparison".into()));
    }
    let straight_out = straight.loss.transmission(straight.length);
    let ratio = straight_out / stats.transmitted_pump_fraction * (loop_flux / straight_flux).sqrt();
    Ok(StraightComparison {
        pump_suppression_db: linear_to_db(ratio),
        efficiency_drop: straight_flux / loop_flux,
    })
}
