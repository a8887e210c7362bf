//! Power-dependent loss budget of a silicon wire: linear scattering,
//! two-photon absorption and free-carrier absorption, compared with the
//! phase-matched parametric gain `γP`.
//!
//! The loss is evaluated pointwise at one representative power; there is no
//! longitudinal attenuation.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::units::{PowerLevel, Wavelength, PLANCK, SPEED_OF_LIGHT};
use crate::waveguide::WaveguideSpec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonlinearLossSpec {
    /// β_TPA, m/W.
    pub tpa_coefficient: f64,
    /// σ_FCA, m².
    pub fca_cross_section: f64,
    /// Free-carrier lifetime, s.
    pub carrier_lifetime: f64,
    /// Pump photon energy, J.
    pub photon_energy: f64,
}

impl NonlinearLossSpec {
    /// β_TPA = 5·10⁻¹² m/W, σ = 1.45·10⁻²¹ m².
    pub fn silicon(carrier_lifetime: f64, pump: Wavelength) -> Self {
        Self {
            tpa_coefficient: 5e-12,
            fca_cross_section: 1.45e-21,
            carrier_lifetime,
            photon_energy: pump.photon_energy(),
        }
    }

    pub fn with_lifetime(self, carrier_lifetime: f64) -> Self {
        Self {
            carrier_lifetime,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tpa_coefficient >= 0.0) {
            return Err(Error::invalid("loss.tpa_m_per_w", "must be >= 0"));
        }
        if !(self.fca_cross_section >= 0.0) {
            return Err(Error::invalid("loss.fca_cross_section_m2", "must be >= 0"));
        }
        if !(self.carrier_lifetime > 0.0 && self.carrier_lifetime <= 100e-9) {
            return Err(Error::invalid(
                "loss.carrier_lifetimes_ns",
                "must be in (0, 100] ns",
            ));
        }
        if !(self.photon_energy > 0.0) {
            return Err(Error::invalid("photon_energy", "must be > 0"));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> Wavelength {
        Wavelength::from_meters(PLANCK * SPEED_OF_LIGHT / self.photon_energy)
    }

    /// Steady-state carrier density `β P² τ / (2hν A²)`, m⁻³.
    pub fn carrier_density(&self, wg: &WaveguideSpec, power: PowerLevel) -> f64 {
        let p = power.watts();
        self.tpa_coefficient * p * p * self.carrier_lifetime
            / (2.0 * self.photon_energy * wg.effective_area * wg.effective_area)
    }
}

/// Loss and gain rates, m⁻¹.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub linear: f64,
    pub tpa: f64,
    pub fca: f64,
    pub mi_gain_line: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.linear + self.tpa + self.fca
    }
}

pub fn loss_breakdown(
    wg: &WaveguideSpec,
    nl: &NonlinearLossSpec,
    power: PowerLevel,
) -> LossBreakdown {
    let p = power.watts();
    LossBreakdown {
        linear: wg.loss.value(),
        tpa: nl.tpa_coefficient * p / wg.effective_area,
        fca: nl.fca_cross_section * nl.carrier_density(wg, power),
        mi_gain_line: wg.nonlinearity(nl.wavelength()) * p,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Crossover {
    TpaVsLinear,
    FcaVsLinear,
    GainVsTotalLoss,
}

impl Crossover {
    fn balance(self, b: &LossBreakdown) -> f64 {
        match self {
            Crossover::TpaVsLinear => b.tpa - b.linear,
            Crossover::FcaVsLinear => b.fca - b.linear,
            Crossover::GainVsTotalLoss => b.mi_gain_line - b.total(),
        }
    }
}

const SEARCH_LO_W: f64 = 1e-6;
const SEARCH_HI_W: f64 = 10.0;

/// Power at which the selected balance changes sign, bisected in log-power
/// to 10⁻⁴ relative on `[1 µW, 10 W]`.
pub fn crossover_power(
    wg: &WaveguideSpec,
    nl: &NonlinearLossSpec,
    which: Crossover,
) -> Result<PowerLevel> {
    let h = |w: f64| which.balance(&loss_breakdown(wg, nl, PowerLevel::from_watts(w)));
    let (mut lo, mut hi) = (SEARCH_LO_W, SEARCH_HI_W);
    let (h_lo, h_hi) = (h(lo), h(hi));
    let no_crossing = |detail: &str| Error::NoCrossing {
        lo_mw: SEARCH_LO_W * 1e3,
        hi_mw: SEARCH_HI_W * 1e3,
        detail: format!("{which:?}: {detail}"),
    };
    if h_lo == 0.0 {
        return Ok(PowerLevel::from_watts(lo));
    }
    if h_lo > 0.0 && h_hi > 0.0 {
        return Err(no_crossing(
            "balance already positive at the lower bound (crossover below range)",
        ));
    }
    if h_lo.signum() == h_hi.signum() {
        return Err(no_crossing("balance does not change sign"));
    }
    while hi / lo > 1.0 + 1e-4 {
        let mid = (lo * hi).sqrt();
        if h(mid).signum() == h_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(PowerLevel::from_watts((lo * hi).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fig1Row {
    pub power_mw: f64,
    /// cm⁻¹
    pub linear: f64,
    pub tpa: f64,
    pub fca: f64,
    pub gain: f64,
    pub tau_ns: f64,
}

/// `n` log-spaced powers from `lo_mw` to `hi_mw`.
pub fn log_power_grid(lo_mw: f64, hi_mw: f64, n: usize) -> Vec<PowerLevel> {
    assert!(n >= 2 && lo_mw > 0.0 && hi_mw > lo_mw);
    let (a, b) = (lo_mw.ln(), hi_mw.ln());
    (0..n)
        .map(|i| PowerLevel::from_mw((a + (b - a) * i as f64 / (n - 1) as f64).exp()))
        .collect()
}

/// Every loss curve for every lifetime, in cm⁻¹. Rows are grouped by lifetime.
pub fn fig1_table(
    wg: &WaveguideSpec,
    nl: &NonlinearLossSpec,
    powers: &[PowerLevel],
    lifetimes: &[f64],
) -> Result<Vec<Fig1Row>> {
    if powers.is_empty() || lifetimes.is_empty() {
        return Err(Error::invalid(
            "fig1 grid",
            "powers and lifetimes must be non-empty",
        ));
    }
    let mut rows = Vec::with_capacity(powers.len() * lifetimes.len());
    for &tau in lifetimes {
        let spec = nl.with_lifetime(tau);
        spec.validate()?;
        for &p in powers {
            let b = loss_breakdown(wg, &spec, p);
            rows.push(Fig1Row {
                power_mw: p.mw(),
                linear: b.linear / 100.0,
                tpa: b.tpa / 100.0,
                fca: b.fca / 100.0,
                gain: b.mi_gain_line / 100.0,
                tau_ns: tau * 1e9,
            });
        }
    }
    Ok(rows)
}

pub fn write_fig1_csv<W: Write>(rows: &[Fig1Row], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("fig1 csv", e))?;
    Ok(())
}
