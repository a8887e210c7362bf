//! Browser bindings for the static demo page. Curves come back as flat
//! `[x0, y0, x1, y1, ...]` arrays.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use wasm_bindgen::prelude::*;

use sipair::detection::{snr, snr_peak, CoincidenceSetup};
use sipair::ring::{calibrate_from_measurement, ring_pair_rate, ring_spectrum, RingSpec};
use sipair::units::{PowerLevel, Wavelength};
use sipair::waveguide::{
    detuning_grid, total_pair_rate, FluxModel, FluxSpectrum, PumpSpec, WaveguideSpec,
};

fn js(e: sipair::error::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn pump(mw: f64) -> PumpSpec {
    PumpSpec::new(Wavelength::from_nm(1540.0), PowerLevel::from_mw(mw))
}

fn calibrated_ring(enhancement: f64, finesse: f64) -> Result<RingSpec, JsError> {
    let cal = calibrate_from_measurement(enhancement, finesse).map_err(js)?;
    RingSpec::new(
        43e-6,
        cal.coupler_transmission,
        cal.round_trip_loss,
        Wavelength::from_nm(1540.0),
        12e-9,
    )
    .map_err(js)
}

/// Ring transmission (dB) against wavelength (nm), calibrated from buildup and finesse.
#[wasm_bindgen]
pub fn ring_transmission(
    enhancement: f64,
    finesse: f64,
    lo_nm: f64,
    hi_nm: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    if !(lo_nm < hi_nm) || points < 2 {
        return Err(JsError::new("need lo < hi and at least 2 points"));
    }
    let ring = calibrated_ring(enhancement, finesse)?;
    let rows = ring_spectrum(
        &ring,
        Wavelength::from_nm(lo_nm),
        Wavelength::from_nm(hi_nm),
        points,
    );
    Ok(rows
        .iter()
        .flat_map(|r| [r.wavelength_nm, r.transmission_db])
        .collect())
}

/// Ring pair rate in MHz for the 43 µm ring at `power_mw`.
#[wasm_bindgen]
pub fn ring_pair_rate_mhz(enhancement: f64, finesse: f64, power_mw: f64) -> Result<f64, JsError> {
    let ring = calibrated_ring(enhancement, finesse)?;
    let guide = WaveguideSpec::silicon_wire(43e-6);
    Ok(ring_pair_rate(&ring, &guide, &pump(power_mw))
        .map_err(js)?
        .rate
        * 1e-6)
}

/// Straight-guide pair spectral density, photons/(Hz s), against signal
/// wavelength (nm).
#[wasm_bindgen]
pub fn waveguide_flux(
    length_mm: f64,
    power_mw: f64,
    max_detuning: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    let wg = WaveguideSpec::silicon_wire(length_mm * 1e-3);
    wg.validate().map_err(js)?;
    let p = pump(power_mw);
    let spectrum = FluxSpectrum::compute(
        &wg,
        &p,
        detuning_grid(max_detuning, points),
        FluxModel::Exact,
    )
    .map_err(js)?;
    Ok(spectrum
        .detunings
        .iter()
        .zip(&spectrum.density)
        .flat_map(|(w, f)| [w.wavelength(p.wavelength).nm(), *f])
        .collect())
}

#[wasm_bindgen]
pub fn waveguide_pair_rate_mhz(length_mm: f64, power_mw: f64) -> Result<f64, JsError> {
    let wg = WaveguideSpec::silicon_wire(length_mm * 1e-3);
    wg.validate().map_err(js)?;
    Ok(total_pair_rate(&wg, &pump(power_mw)).map_err(js)?.rate * 1e-6)
}

fn setup(id: &str, extra_loss_db: f64) -> Result<CoincidenceSetup, JsError> {
    let mut s = match id {
        "setup1" => CoincidenceSetup::setup1(),
        "setup2" => CoincidenceSetup::setup2(),
        "setup2-straight" => CoincidenceSetup::setup2_straight(),
        other => return Err(JsError::new(&format!("unknown setup `{other}`"))),
    };
    s.stokes.collection_loss_db += extra_loss_db;
    s.anti_stokes.collection_loss_db += extra_loss_db;
    s.validate().map_err(js)?;
    Ok(s)
}

/// SNR against generated pair rate (MHz) on a log grid.
#[wasm_bindgen]
pub fn snr_curve(
    setup_id: &str,
    extra_loss_db: f64,
    lo_mhz: f64,
    hi_mhz: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    if !(lo_mhz > 0.0 && lo_mhz < hi_mhz) || points < 2 {
        return Err(JsError::new("need 0 < lo < hi and at least 2 points"));
    }
    let s = setup(setup_id, extra_loss_db)?;
    let step = (hi_mhz / lo_mhz).ln() / (points - 1) as f64;
    let mut out = Vec::with_capacity(2 * points);
    for k in 0..points {
        let mhz = lo_mhz * (step * k as f64).exp();
        out.push(mhz);
        out.push(snr(&s, mhz * 1e6).map_err(js)?);
    }
    Ok(out)
}

/// `[optimal rate in MHz, SNR there]`.
#[wasm_bindgen]
pub fn snr_optimum(setup_id: &str, extra_loss_db: f64) -> Result<Vec<f64>, JsError> {
    let peak = snr_peak(&setup(setup_id, extra_loss_db)?).map_err(js)?;
    Ok(vec![peak.pair_rate * 1e-6, peak.snr_max])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_are_interleaved() {
        let t = ring_transmission(110.0, 345.0, 1535.0, 1545.0, 11)
            .or(Err(()))
            .unwrap();
        assert_eq!(t.len(), 22);
        assert!((t[0] - 1535.0).abs() < 1e-9);
        let s = snr_curve("setup1", 0.0, 0.1, 100.0, 5).or(Err(())).unwrap();
        assert!((s[8] - 100.0).abs() < 1e-9);
        let opt = snr_optimum("setup2", 0.0).or(Err(())).unwrap();
        assert!((opt[1] - 251.4).abs() < 0.1);
        let rate = waveguide_pair_rate_mhz(11.3, 5.0).or(Err(())).unwrap();
        assert!((rate - 93.7).abs() < 0.1);
        let f = waveguide_flux(11.3, 5.0, 6e13, 101).or(Err(())).unwrap();
        assert_eq!(f.len(), 202);
    }
}
