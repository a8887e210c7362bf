//! Command execution: every output is rendered in memory first, then written
//! together with a manifest that can be fed back in as a config.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{fit_pair_flux_curve, fit_quadratic, FluxCurveModel, FluxCurveParams};
use crate::config::{Config, FitKind, ManifestSection, Structure};
use crate::detection::{
    accidental_coincidences, duty_and_reconstruction_factor, monte_carlo_histogram, snr, snr_peak,
    summarize, true_coincidences, write_summary_csv,
};
use crate::error::{Error, Result};
use crate::loss::{fig1_table, log_power_grid, write_fig1_csv};
use crate::ring::{
    intracavity_power, ring_pair_rate, ring_spectrum, spectral_density_ratio, write_resonances_csv,
    write_spectrum_csv,
};
use crate::sagnac::{
    compare_with_straight, pair_port_statistics, pump_extinction, transmitted_pump_vs_pair_flux,
    write_sweep_csv,
};
use crate::units::{PowerLevel, Wavelength, SPEED_OF_LIGHT};
use crate::waveguide::{
    detuning_grid, peak_flux, photon_flux_model, total_pair_rate, FluxSpectrum,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    SimulateWaveguide,
    SimulateSagnac,
    SimulateRing,
    SimulateCoincidence,
    Fit,
    Fig1,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SimulateWaveguide => "simulate-waveguide",
            Command::SimulateSagnac => "simulate-sagnac",
            Command::SimulateRing => "simulate-ring",
            Command::SimulateCoincidence => "simulate-coincidence",
            Command::Fit => "fit",
            Command::Fig1 => "fig1",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    /// `(file name, contents)` in write order; the manifest is last.
    pub files: Vec<(String, Vec<u8>)>,
    /// Human-readable summary for stdout.
    pub report: String,
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn conjugate_pair(pump: Wavelength, signal_nm: f64) -> (Wavelength, Wavelength) {
    let s = Wavelength::from_nm(signal_nm);
    (s, s.conjugate_about(pump))
}

/// Generated pair rate delivered by the configured structure at the nominal
/// pump power, pairs/s.
pub fn structure_pair_rate(config: &Config) -> Result<f64> {
    let pump = config.pump()?;
    match config.experiment.structure {
        Structure::Straight => Ok(total_pair_rate(&config.waveguide.spec()?, &pump)?.rate),
        Structure::Sagnac => {
            let (s, i) = conjugate_pair(pump.wavelength, config.sagnac.signal_nm);
            Ok(pair_port_statistics(&config.sagnac()?, &pump, s, i)?.transmitted_pair_rate())
        }
        Structure::Ring => {
            Ok(ring_pair_rate(&config.ring.spec()?, &config.ring_guide()?, &pump)?.rate)
        }
    }
}

pub fn run(command: Command, config: &Config) -> Result<RunOutput> {
    config.validate()?;
    let mut files = Vec::new();
    let mut report = String::new();
    match command {
        Command::SimulateWaveguide => waveguide(config, &mut files, &mut report)?,
        Command::SimulateSagnac => sagnac(config, &mut files, &mut report)?,
        Command::SimulateRing => ring(config, &mut files, &mut report)?,
        Command::SimulateCoincidence => coincidence(config, &mut files, &mut report)?,
        Command::Fit => fit(config, &mut files, &mut report)?,
        Command::Fig1 => fig1(config, &mut files, &mut report)?,
    }
    let mut resolved = config.clone();
    resolved.manifest = Some(ManifestSection {
        version: VERSION.to_string(),
        command: command.name().to_string(),
        seed: config.coincidence.seed,
    });
    files.push(("manifest.toml".into(), resolved.to_toml()?.into_bytes()));
    Ok(RunOutput { files, report })
}

fn waveguide(
    config: &Config,
    files: &mut Vec<(String, Vec<u8>)>,
    report: &mut String,
) -> Result<()> {
    let wg = config.waveguide.spec()?;
    let pump = config.pump()?;
    let noise = config.noise.model()?;
    let grid = detuning_grid(
        config.spectrum.max_detuning_rad_per_s,
        config.spectrum.points,
    );
    let spectrum = FluxSpectrum::compute(&wg, &pump, grid, config.spectrum.model)?;
    files.push(("spectrum.csv".into(), csv_bytes(|b| spectrum.write_csv(b))?));

    let mut sweep = csv::Writer::from_writer(Vec::new());
    sweep.write_record([
        "power_mw",
        "peak_flux_per_Hz_s",
        "pair_rate_mhz",
        "singles_rate_mhz",
    ])?;
    for p in config.sweep()? {
        let pp = pump.with_power(p);
        let rate = total_pair_rate(&wg, &pp)?.rate;
        sweep.serialize((
            p.mw(),
            peak_flux(&wg, &pp),
            rate * 1e-6,
            photon_flux_model(&pp, rate, &noise) * 1e-6,
        ))?;
    }
    files.push(("waveguide_sweep.csv".into(), into_bytes(sweep)?));

    let rate = total_pair_rate(&wg, &pump)?;
    let (one_side, two_side) = wg.pair_bandwidth_nm(pump.wavelength)?;
    let lam = pump.wavelength.meters();
    let flat_nm = rate.equivalent_flat_width_hz * lam * lam / SPEED_OF_LIGHT * 1e9;
    let _ = writeln!(
        report,
        "nonlinearity        {:.1} /W/m",
        wg.nonlinearity(pump.wavelength)
    );
    let _ = writeln!(
        report,
        "effective length    {:.3} mm",
        wg.effective_length() * 1e3
    );
    let _ = writeln!(
        report,
        "peak flux at {:.2} mW  {:.3e} photons/(Hz s)",
        pump.power.mw(),
        peak_flux(&wg, &pump)
    );
    let _ = writeln!(report, "total pair rate     {:.2} MHz", rate.rate * 1e-6);
    let _ = writeln!(report, "flat-equivalent width {:.1} nm", flat_nm);
    let _ = writeln!(
        report,
        "phase-matching width {one_side:.1} nm per sideband ({two_side:.1} nm both sides)"
    );
    Ok(())
}

fn into_bytes(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| Error::io("csv buffer", std::io::Error::other(e.to_string())))
}

fn sagnac(config: &Config, files: &mut Vec<(String, Vec<u8>)>, report: &mut String) -> Result<()> {
    let spec = config.sagnac()?;
    let pump = config.pump()?;
    let (s, i) = conjugate_pair(pump.wavelength, config.sagnac.signal_nm);
    let rows = transmitted_pump_vs_pair_flux(&spec, pump.wavelength, &config.sweep()?, s, i)?;
    files.push((
        "sagnac_sweep.csv".into(),
        csv_bytes(|b| write_sweep_csv(&rows, b))?,
    ));

    let stats = pair_port_statistics(&spec, &pump, s, i)?;
    let cmp = compare_with_straight(&spec, &config.waveguide.spec()?, pump.wavelength, s, i)?;
    let kp = spec.coupler.ratio(pump.wavelength)?;
    let _ = writeln!(
        report,
        "coupler at pump     κ = {:.3}{}",
        kp.kappa,
        if kp.extrapolated {
            " (extrapolated)"
        } else {
            ""
        }
    );
    let _ = writeln!(
        report,
        "pump extinction     {:.2} dB",
        pump_extinction(&spec, pump.wavelength)?
    );
    let _ = writeln!(
        report,
        "pair ports          transmit {:.4}  reflect {:.4}  split {:.4}",
        stats.p_both_transmit, stats.p_both_reflect, stats.p_split
    );
    let _ = writeln!(
        report,
        "transmitted pairs   {:.3} MHz at {:.2} mW",
        stats.transmitted_pair_rate() * 1e-6,
        pump.power.mw()
    );
    let _ = writeln!(
        report,
        "pump suppression vs straight guide at equal pair flux  {:.2} dB",
        cmp.pump_suppression_db
    );
    let _ = writeln!(
        report,
        "efficiency drop vs straight guide  {:.2}x",
        cmp.efficiency_drop
    );
    Ok(())
}

fn ring(config: &Config, files: &mut Vec<(String, Vec<u8>)>, report: &mut String) -> Result<()> {
    let ring = config.ring.spec()?;
    let guide = config.ring_guide()?;
    let pump = config.pump()?;
    let [lo, hi] = config.ring.window_nm;
    let (lo, hi) = (Wavelength::from_nm(lo), Wavelength::from_nm(hi));
    let rows = ring_spectrum(&ring, lo, hi, config.ring.points);
    files.push((
        "ring_spectrum.csv".into(),
        csv_bytes(|b| write_spectrum_csv(&rows, b))?,
    ));
    let resonances = ring.resonances(lo, hi)?;
    files.push((
        "resonances.csv".into(),
        csv_bytes(|b| write_resonances_csv(&resonances, b))?,
    ));

    let mut sweep = csv::Writer::from_writer(Vec::new());
    sweep.write_record([
        "power_mw",
        "intracavity_mw",
        "peak_flux_per_Hz_s",
        "pair_rate_mhz",
    ])?;
    for p in config.sweep()? {
        let pp = pump.with_power(p);
        let r = ring_pair_rate(&ring, &guide, &pp)?;
        sweep.serialize((
            p.mw(),
            intracavity_power(&ring, &pp).mw(),
            r.peak_flux,
            r.rate * 1e-6,
        ))?;
    }
    files.push(("ring_sweep.csv".into(), into_bytes(sweep)?));

    let (finesse, fwhm) = ring.finesse_and_fwhm()?;
    let rate = ring_pair_rate(&ring, &guide, &pump)?;
    let ratio = spectral_density_ratio(&ring, &guide, &config.waveguide.spec()?, &pump)?;
    let _ = writeln!(
        report,
        "coupler T           {:.5}",
        ring.coupler_transmission
    );
    let _ = writeln!(report, "round-trip loss     {:.5}", ring.round_trip_loss);
    let _ = writeln!(report, "finesse             {finesse:.1}");
    let _ = writeln!(report, "FWHM                {:.2} pm", fwhm * 1e12);
    let _ = writeln!(
        report,
        "buildup at pump     {:.1}",
        ring.field_enhancement(pump.wavelength)
    );
    let _ = writeln!(
        report,
        "intracavity power   {:.2} mW",
        intracavity_power(&ring, &pump).mw()
    );
    let _ = writeln!(report, "pair rate           {:.2} MHz", rate.rate * 1e-6);
    let _ = writeln!(
        report,
        "density ratio vs straight  {:.0} (physical length)  {:.0} (effective length)",
        ratio.vs_physical_length, ratio.vs_effective_length
    );
    Ok(())
}

fn coincidence(
    config: &Config,
    files: &mut Vec<(String, Vec<u8>)>,
    report: &mut String,
) -> Result<()> {
    let setup = config.detection.setup()?;
    let rate = match config.coincidence.pair_rate_mhz {
        Some(mhz) if mhz >= 0.0 => mhz * 1e6,
        Some(_) => return Err(Error::invalid("coincidence.pair_rate_mhz", "must be >= 0")),
        None => structure_pair_rate(config)?,
    };
    let params = config.coincidence.params(rate)?;
    let hist = monte_carlo_histogram(&setup, &params)?;
    files.push(("histogram.csv".into(), csv_bytes(|b| hist.write_csv(b))?));
    let summary = summarize(&setup, &params, &hist)?;
    files.push((
        "coincidence_summary.csv".into(),
        csv_bytes(|b| write_summary_csv(&summary, b))?,
    ));

    let mut curve = csv::Writer::from_writer(Vec::new());
    curve.write_record(["pair_rate_mhz", "c_a", "c_p", "snr"])?;
    let n = config.coincidence.snr_curve_points;
    let max = config.coincidence.snr_curve_max_mhz * 1e6;
    for k in 0..n {
        let r = max * (k + 1) as f64 / n as f64;
        curve.serialize((
            r * 1e-6,
            accidental_coincidences(&setup, r),
            true_coincidences(&setup, r),
            snr(&setup, r)?,
        ))?;
    }
    files.push(("snr_curve.csv".into(), into_bytes(curve)?));

    let _ = writeln!(report, "pair rate           {:.3} MHz", rate * 1e-6);
    let _ = writeln!(
        report,
        "reconstruction factor  {:.3e}",
        duty_and_reconstruction_factor(&setup)
    );
    let _ = writeln!(report, "accidentals/bin     {:.3e}", summary.c_a);
    let _ = writeln!(report, "true/bin            {:.3e}", summary.c_p);
    let _ = writeln!(report, "SNR                 {:.2}", summary.snr);
    if let Ok(peak) = snr_peak(&setup) {
        let _ = writeln!(
            report,
            "SNR optimum         {:.1} at {:.3} MHz",
            peak.snr_max,
            peak.pair_rate * 1e-6
        );
    }
    let _ = writeln!(
        report,
        "Monte-Carlo         {} gates, reconstructed flux {:.3} MHz",
        hist.n_gates,
        summary.reconstructed_flux * 1e-6
    );
    Ok(())
}

/// Reads `power_mw,value` rows.
pub fn read_fit_input(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(format!("reading {}", path.display()), io),
        other => Error::invalid("fit.input", format!("{other:?}")),
    })?;
    let mut out = Vec::new();
    for rec in r.deserialize::<(f64, f64)>() {
        out.push(rec.map_err(|e| Error::invalid("fit.input", e.to_string()))?);
    }
    Ok(out)
}

fn fit(config: &Config, files: &mut Vec<(String, Vec<u8>)>, report: &mut String) -> Result<()> {
    let input =
        config.fit.input.as_ref().ok_or_else(|| {
            Error::invalid("fit.input", "path to a power_mw,value CSV is required")
        })?;
    let points = read_fit_input(Path::new(input))?;
    match config.fit.kind {
        FitKind::Quadratic => {
            let q = fit_quadratic(&points, config.fit.with_offset, config.fit.weighting)?;
            files.push(("fit_report.csv".into(), csv_bytes(|b| q.fit.write_csv(b))?));
            let mut lf = csv::Writer::from_writer(Vec::new());
            lf.write_record(["power_mw", "linear_fraction"])?;
            for row in &q.linear_fraction {
                lf.serialize(row)?;
            }
            files.push(("linear_fraction.csv".into(), into_bytes(lf)?));
            for ((n, v), e) in q.fit.names.iter().zip(&q.fit.values).zip(&q.fit.std_errors) {
                let _ = writeln!(report, "{n:<8} {v:.6e} ± {e:.2e}");
            }
        }
        FitKind::PairFlux => {
            let pump = config.pump_wavelength()?;
            let model = FluxCurveModel {
                nonlinearity: config.waveguide.spec()?.nonlinearity(pump),
                pump,
            };
            let start = FluxCurveParams {
                effective_length: config.fit.start_effective_length_mm * 1e-3,
                bandwidth: config.fit.start_bandwidth_nm * 1e-9,
                correction: config.fit.start_correction,
            };
            let watts: Vec<_> = points
                .iter()
                .map(|&(mw, y)| (PowerLevel::from_mw(mw).watts(), y))
                .collect();
            let f = fit_pair_flux_curve(
                &watts,
                &model,
                start,
                config.fit.free_mask()?,
                config.fit.weighting,
            )?;
            files.push(("fit_report.csv".into(), csv_bytes(|b| f.fit.write_csv(b))?));
            let _ = writeln!(
                report,
                "effective length  {:.3} mm",
                f.params.effective_length * 1e3
            );
            let _ = writeln!(
                report,
                "bandwidth         {:.2} nm",
                f.params.bandwidth * 1e9
            );
            let _ = writeln!(report, "correction        {:.3}", f.params.correction);
            let _ = writeln!(
                report,
                "scale             {:.4e} ± {:.2e} m^3",
                f.scale, f.scale_std_error
            );
            if !f.identifiable {
                let _ = writeln!(
                    report,
                    "warning: free parameters are not separately identifiable (rank {})",
                    f.rank
                );
            }
        }
    }
    Ok(())
}

fn fig1(config: &Config, files: &mut Vec<(String, Vec<u8>)>, report: &mut String) -> Result<()> {
    let f = &config.fig1;
    let wg = config.waveguide.spec()?;
    let nl = config.nonlinear_loss(f.lifetimes_ns[0])?;
    let powers = log_power_grid(f.power_min_mw, f.power_max_mw, f.points);
    let lifetimes: Vec<f64> = f.lifetimes_ns.iter().map(|t| t * 1e-9).collect();
    let rows = fig1_table(&wg, &nl, &powers, &lifetimes)?;
    files.push(("fig1.csv".into(), csv_bytes(|b| write_fig1_csv(&rows, b))?));
    let _ = writeln!(
        report,
        "{} rows over {} lifetimes",
        rows.len(),
        lifetimes.len()
    );
    Ok(())
}

/// Write all files into `dir`. Each file goes to a temporary name first; if
/// any write fails the temporaries are removed and nothing is renamed.
pub fn write_outputs(dir: &Path, output: &RunOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut staged = Vec::new();
    for (name, bytes) in &output.files {
        let tmp = dir.join(format!(".{name}.partial"));
        if let Err(e) = fs::write(&tmp, bytes) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            let _ = fs::remove_file(&tmp);
            return Err(Error::io(format!("writing {}", tmp.display()), e));
        }
        staged.push((tmp, dir.join(name)));
    }
    let mut written = Vec::new();
    for (tmp, dest) in staged {
        fs::rename(&tmp, &dest)
            .map_err(|e| Error::io(format!("renaming to {}", dest.display()), e))?;
        written.push(dest);
    }
    Ok(written)
}
