//! TOML experiment configuration.
//!
//! Every physical key carries its unit as a suffix. A config may name a
//! built-in `preset`; the preset table is the base and the file's own keys
//! are merged over it, followed by command-line `key.path=value` overrides.

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::detection::{ChannelSpec, CoincidenceSetup, DetectorSpec, MonteCarloParams};
use crate::error::{Error, Result};
use crate::loss::NonlinearLossSpec;
use crate::ring::{calibrate_from_measurement, EnhancementReading, RingSpec};
use crate::sagnac::{CouplerModel, SagnacSpec};
use crate::units::{LossCoefficient, PowerLevel, Wavelength};
use crate::waveguide::{EffectiveLength, FluxModel, NoiseModel, PumpSpec, WaveguideSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    #[default]
    Straight,
    Sagnac,
    Ring,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetupId {
    #[default]
    Setup1,
    Setup2,
    Setup2Straight,
}

impl SetupId {
    pub fn setup(self) -> CoincidenceSetup {
        match self {
            SetupId::Setup1 => CoincidenceSetup::setup1(),
            SetupId::Setup2 => CoincidenceSetup::setup2(),
            SetupId::Setup2Straight => CoincidenceSetup::setup2_straight(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub pump: PumpSection,
    #[serde(default)]
    pub waveguide: WaveguideSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub sagnac: SagnacSection,
    #[serde(default)]
    pub ring: RingSection,
    #[serde(default)]
    pub detection: DetectionSection,
    #[serde(default)]
    pub coincidence: CoincidenceSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub fig1: Fig1Section,
    /// Written by a run; carried along when a manifest is used as a config.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<ManifestSection>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub structure: Structure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpSection {
    pub wavelength_nm: f64,
    pub power_mw: f64,
    /// Input powers for sweep outputs; absent means just `power_mw`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_mw: Option<Vec<f64>>,
}

impl Default for PumpSection {
    fn default() -> Self {
        Self {
            wavelength_nm: 1540.0,
            power_mw: 5.0,
            sweep_mw: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveguideSection {
    pub length_mm: f64,
    pub effective_area_um2: f64,
    pub n2_m2_per_w: f64,
    pub gvd_ps2_per_m: f64,
    pub loss_db_per_cm: f64,
    pub effective_length: EffectiveLength,
}

impl Default for WaveguideSection {
    fn default() -> Self {
        Self {
            length_mm: 11.3,
            effective_area_um2: 0.064,
            n2_m2_per_w: 4.4e-18,
            gvd_ps2_per_m: -0.7,
            loss_db_per_cm: 4.0,
            effective_length: EffectiveLength::Attenuated,
        }
    }
}

impl WaveguideSection {
    fn spec_with_length(&self, length_m: f64, key: &str) -> Result<WaveguideSpec> {
        if !(self.loss_db_per_cm >= 0.0) {
            return Err(Error::invalid("waveguide.loss_db_per_cm", "must be >= 0"));
        }
        let mut wg = WaveguideSpec::new(
            length_m,
            self.effective_area_um2 * 1e-12,
            self.n2_m2_per_w,
            self.gvd_ps2_per_m * 1e-24,
            LossCoefficient::from_db_per_cm(self.loss_db_per_cm),
        )
        .map_err(|e| match e {
            Error::Invalid { key: k, constraint } if k == "waveguide.length_mm" => Error::Invalid {
                key: key.into(),
                constraint,
            },
            other => other,
        })?;
        wg.effective_length = self.effective_length;
        Ok(wg)
    }

    pub fn spec(&self) -> Result<WaveguideSpec> {
        self.spec_with_length(self.length_mm * 1e-3, "waveguide.length_mm")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub max_detuning_rad_per_s: f64,
    pub points: usize,
    pub model: FluxModel,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            max_detuning_rad_per_s: 6e13,
            points: 601,
            model: FluxModel::Exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Uncorrelated photons/s per mW of pump in each band.
    pub linear_per_mw: f64,
    pub quadratic_excess: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            linear_per_mw: 0.0,
            quadratic_excess: 1.0,
        }
    }
}

impl NoiseSection {
    pub fn model(&self) -> Result<NoiseModel> {
        if !(self.linear_per_mw >= 0.0) {
            return Err(Error::invalid("noise.linear_per_mw", "must be >= 0"));
        }
        if !(self.quadratic_excess >= 0.0) {
            return Err(Error::invalid("noise.quadratic_excess", "must be >= 0"));
        }
        Ok(NoiseModel {
            linear_coefficient: self.linear_per_mw * 1e3,
            quadratic_excess: self.quadratic_excess,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SagnacSection {
    pub loop_length_mm: f64,
    /// `[wavelength_nm, κ]` pairs.
    pub coupler_anchors: Vec<[f64; 2]>,
    pub excess_loss_db: f64,
    /// Representative signal; the idler is its frequency conjugate.
    pub signal_nm: f64,
}

impl Default for SagnacSection {
    fn default() -> Self {
        Self {
            loop_length_mm: 10.0,
            coupler_anchors: vec![[1520.0, 0.52], [1540.0, 0.62], [1560.0, 0.72]],
            excess_loss_db: 0.0,
            signal_nm: 1550.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RingSection {
    pub round_trip_length_um: f64,
    /// Direct coupler transmission; when absent, calibrated from
    /// `calibrate_enhancement` and `calibrate_finesse`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupler_transmission: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub round_trip_loss: Option<f64>,
    pub calibrate_enhancement: f64,
    pub calibrate_finesse: f64,
    pub reference_resonance_nm: f64,
    pub fsr_nm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_offset_pm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fwhm_override_pm: Option<f64>,
    pub reading: EnhancementReading,
    pub window_nm: [f64; 2],
    pub points: usize,
}

impl Default for RingSection {
    fn default() -> Self {
        Self {
            round_trip_length_um: 43.0,
            coupler_transmission: None,
            round_trip_loss: None,
            calibrate_enhancement: 110.0,
            calibrate_finesse: 345.0,
            reference_resonance_nm: 1540.0,
            fsr_nm: 12.0,
            split_offset_pm: None,
            fwhm_override_pm: None,
            reading: EnhancementReading::Amplitude,
            window_nm: [1525.0, 1555.0],
            points: 30001,
        }
    }
}

impl RingSection {
    pub fn spec(&self) -> Result<RingSpec> {
        let (t, eta) = match (self.coupler_transmission, self.round_trip_loss) {
            (Some(t), Some(e)) => (t, e),
            (None, None) => {
                let c =
                    calibrate_from_measurement(self.calibrate_enhancement, self.calibrate_finesse)?;
                (c.coupler_transmission, c.round_trip_loss)
            }
            _ => {
                return Err(Error::invalid(
                    "ring.coupler_transmission",
                    "set both coupler_transmission and round_trip_loss, or neither",
                ))
            }
        };
        if !(self.reference_resonance_nm > 0.0) {
            return Err(Error::invalid("ring.reference_resonance_nm", "must be > 0"));
        }
        let mut ring = RingSpec::new(
            self.round_trip_length_um * 1e-6,
            t,
            eta,
            Wavelength::from_nm(self.reference_resonance_nm),
            self.fsr_nm * 1e-9,
        )?;
        ring.split_offset = self.split_offset_pm.map(|p| p * 1e-12);
        ring.fwhm_override = self.fwhm_override_pm.map(|p| p * 1e-12);
        ring.reading = self.reading;
        ring.validate()?;
        if !(self.window_nm[0] > 0.0 && self.window_nm[1] > self.window_nm[0]) {
            return Err(Error::invalid(
                "ring.window_nm",
                "must be [lo, hi] with 0 < lo < hi",
            ));
        }
        if self.points < 2 {
            return Err(Error::invalid("ring.points", "must be >= 2"));
        }
        Ok(ring)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub efficiency: f64,
    pub dark_rate_per_ns: f64,
    pub gate_ns: f64,
    pub trigger_rate_hz: f64,
    pub collection_loss_db: f64,
}

impl From<ChannelSpec> for ChannelSection {
    fn from(c: ChannelSpec) -> Self {
        Self {
            efficiency: c.detector.efficiency,
            dark_rate_per_ns: c.detector.dark_rate,
            gate_ns: c.detector.gate,
            trigger_rate_hz: c.detector.trigger_rate,
            collection_loss_db: c.collection_loss_db,
        }
    }
}

impl From<ChannelSection> for ChannelSpec {
    fn from(c: ChannelSection) -> Self {
        Self {
            detector: DetectorSpec {
                efficiency: c.efficiency,
                dark_rate: c.dark_rate_per_ns,
                gate: c.gate_ns,
                trigger_rate: c.trigger_rate_hz,
            },
            collection_loss_db: c.collection_loss_db,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSection {
    pub setup: SetupId,
    /// Replaces the named setup's channel entirely when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stokes: Option<ChannelSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anti_stokes: Option<ChannelSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_bin_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_resolution_ns: Option<f64>,
}

impl DetectionSection {
    pub fn setup(&self) -> Result<CoincidenceSetup> {
        let mut s = self.setup.setup();
        if let Some(c) = self.stokes {
            s.stokes = c.into();
        }
        if let Some(c) = self.anti_stokes {
            s.anti_stokes = c.into();
        }
        if let Some(t) = self.time_bin_ns {
            s.time_bin = t;
        }
        if let Some(t) = self.timing_resolution_ns {
            s.timing_resolution = t;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoincidenceSection {
    pub n_gates: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Generated pair rate; when absent it is computed from the structure at `pump.power_mw`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_rate_mhz: Option<f64>,
    pub noise_rate_stokes_mhz: f64,
    pub noise_rate_anti_stokes_mhz: f64,
    pub jitter_sigma_ns: f64,
    /// Upper end of the analytic SNR-vs-rate curve, MHz.
    pub snr_curve_max_mhz: f64,
    pub snr_curve_points: usize,
}

impl Default for CoincidenceSection {
    fn default() -> Self {
        Self {
            n_gates: 1_000_000,
            seed: None,
            pair_rate_mhz: None,
            noise_rate_stokes_mhz: 0.0,
            noise_rate_anti_stokes_mhz: 0.0,
            jitter_sigma_ns: 0.0,
            snr_curve_max_mhz: 100.0,
            snr_curve_points: 200,
        }
    }
}

impl CoincidenceSection {
    pub fn params(&self, pair_rate: f64) -> Result<MonteCarloParams> {
        let seed = self.seed.ok_or_else(|| {
            Error::invalid(
                "coincidence.seed",
                "required for Monte-Carlo runs (set it or pass --seed)",
            )
        })?;
        let p = MonteCarloParams {
            pair_rate,
            noise_rate_stokes: self.noise_rate_stokes_mhz * 1e6,
            noise_rate_anti_stokes: self.noise_rate_anti_stokes_mhz * 1e6,
            n_gates: self.n_gates,
            seed,
            jitter_sigma: self.jitter_sigma_ns,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    #[default]
    Quadratic,
    PairFlux,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub kind: FitKind,
    /// CSV with columns `power_mw,value`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub with_offset: bool,
    pub weighting: crate::analysis::Weighting,
    /// Any of "effective_length", "bandwidth", "correction".
    pub free: Vec<String>,
    pub start_effective_length_mm: f64,
    pub start_bandwidth_nm: f64,
    pub start_correction: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            kind: FitKind::Quadratic,
            input: None,
            with_offset: false,
            weighting: crate::analysis::Weighting::Poisson,
            free: vec!["correction".into()],
            start_effective_length_mm: 4.0,
            start_bandwidth_nm: 18.0,
            start_correction: 1.0,
        }
    }
}

impl FitSection {
    pub fn free_mask(&self) -> Result<crate::analysis::FreeMask> {
        let mut m = [false; 3];
        for name in &self.free {
            let i = match name.as_str() {
                "effective_length" => 0,
                "bandwidth" => 1,
                "correction" => 2,
                other => {
                    return Err(Error::invalid(
                        "fit.free",
                        format!("unknown parameter `{other}` (expected effective_length, bandwidth, correction)"),
                    ))
                }
            };
            m[i] = true;
        }
        Ok(crate::analysis::FreeMask(m))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig1Section {
    pub power_min_mw: f64,
    pub power_max_mw: f64,
    pub points: usize,
    pub lifetimes_ns: Vec<f64>,
}

impl Default for Fig1Section {
    fn default() -> Self {
        Self {
            power_min_mw: 0.1,
            power_max_mw: 1000.0,
            points: 201,
            lifetimes_ns: vec![0.5, 1.0, 2.0, 5.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSection {
    pub version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Config {
    pub fn pump_wavelength(&self) -> Result<Wavelength> {
        if !(self.pump.wavelength_nm > 0.0 && self.pump.wavelength_nm.is_finite()) {
            return Err(Error::invalid("pump.wavelength_nm", "must be > 0"));
        }
        Ok(Wavelength::from_nm(self.pump.wavelength_nm))
    }

    pub fn pump(&self) -> Result<PumpSpec> {
        if !(self.pump.power_mw >= 0.0 && self.pump.power_mw.is_finite()) {
            return Err(Error::invalid("pump.power_mw", "must be finite and >= 0"));
        }
        Ok(PumpSpec::new(
            self.pump_wavelength()?,
            PowerLevel::from_mw(self.pump.power_mw),
        ))
    }

    pub fn sweep(&self) -> Result<Vec<PowerLevel>> {
        let raw = match &self.pump.sweep_mw {
            None => vec![self.pump.power_mw],
            Some(v) if v.is_empty() => {
                return Err(Error::invalid("pump.sweep_mw", "sweep must be non-empty"))
            }
            Some(v) => v.clone(),
        };
        raw.iter()
            .map(|&p| {
                if p >= 0.0 && p.is_finite() {
                    Ok(PowerLevel::from_mw(p))
                } else {
                    Err(Error::invalid(
                        "pump.sweep_mw",
                        "powers must be finite and >= 0",
                    ))
                }
            })
            .collect()
    }

    pub fn sagnac(&self) -> Result<SagnacSpec> {
        let s = &self.sagnac;
        let anchors = s
            .coupler_anchors
            .iter()
            .map(|&[nm, k]| {
                if nm > 0.0 {
                    Ok((Wavelength::from_nm(nm), k))
                } else {
                    Err(Error::invalid(
                        "sagnac.coupler_anchors",
                        "wavelengths must be > 0",
                    ))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let loop_guide = self
            .waveguide
            .spec_with_length(s.loop_length_mm * 1e-3, "sagnac.loop_length_mm")?;
        let mut spec = SagnacSpec::new(loop_guide, CouplerModel::new(anchors)?);
        spec.excess_loss_db = s.excess_loss_db;
        spec.validate()?;
        if !(s.signal_nm > 0.0) {
            return Err(Error::invalid("sagnac.signal_nm", "must be > 0"));
        }
        Ok(spec)
    }

    /// The waveguide section with its length replaced by the ring round trip.
    pub fn ring_guide(&self) -> Result<WaveguideSpec> {
        self.waveguide.spec_with_length(
            self.ring.round_trip_length_um * 1e-6,
            "ring.round_trip_length_um",
        )
    }

    pub fn nonlinear_loss(&self, lifetime_ns: f64) -> Result<NonlinearLossSpec> {
        let spec = NonlinearLossSpec::silicon(lifetime_ns * 1e-9, self.pump_wavelength()?);
        spec.validate()?;
        Ok(spec)
    }

    /// Check every section that any command reads.
    pub fn validate(&self) -> Result<()> {
        self.pump()?;
        self.sweep()?;
        self.waveguide.spec()?;
        self.noise.model()?;
        if self.spectrum.points < 2 {
            return Err(Error::invalid("spectrum.points", "must be >= 2"));
        }
        if !(self.spectrum.max_detuning_rad_per_s > 0.0) {
            return Err(Error::invalid(
                "spectrum.max_detuning_rad_per_s",
                "must be > 0",
            ));
        }
        self.sagnac()?;
        self.ring.spec()?;
        self.ring_guide()?;
        self.detection.setup()?;
        if self.coincidence.snr_curve_points < 2 || !(self.coincidence.snr_curve_max_mhz > 0.0) {
            return Err(Error::invalid(
                "coincidence.snr_curve_points",
                "need >= 2 points and a positive max",
            ));
        }
        self.fit.free_mask()?;
        let f = &self.fig1;
        if !(f.power_min_mw > 0.0 && f.power_max_mw > f.power_min_mw) || f.points < 2 {
            return Err(Error::invalid(
                "fig1.power_min_mw",
                "need 0 < power_min_mw < power_max_mw and points >= 2",
            ));
        }
        for &t in &f.lifetimes_ns {
            self.nonlinear_loss(t).map_err(|_| {
                Error::invalid("fig1.lifetimes_ns", "each lifetime must be in (0, 100] ns")
            })?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Numerical(format!("config serialization: {e}")))
    }
}

/// Recursively overlay `over` onto `base`; tables merge, everything else replaces.
pub fn merge_tables(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge_tables(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Apply `section.key=value`; the value is parsed as a TOML literal and
/// falls back to a bare string.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::invalid("--override", format!("`{assignment}` is not KEY=VALUE")))?;
    let path = path.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    let mut keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::invalid(
            "--override",
            format!("bad key path `{path}`"),
        ));
    }
    let last = keys.pop().expect("non-empty path");
    let mut cur = table;
    for k in keys {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::invalid(path, format!("`{k}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

pub fn parse_table(text: &str, origin: &str) -> Result<Table> {
    toml::from_str::<Table>(text).map_err(|e| Error::invalid(origin, e.message().to_string()))
}

/// Merge preset, file and overrides, then deserialize and validate.
///
/// `preset_flag` wins over a `preset` key in the file.
pub fn resolve(
    file: Option<Table>,
    preset_flag: Option<&str>,
    overrides: &[String],
) -> Result<Config> {
    let file = file.unwrap_or_default();
    let preset_name = preset_flag.map(str::to_string).or_else(|| {
        file.get("preset")
            .and_then(Value::as_str)
            .map(str::to_string)
    });
    let mut table = match &preset_name {
        Some(name) => crate::presets::preset_table(name)?,
        None => Table::new(),
    };
    merge_tables(&mut table, file);
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    if let Some(name) = preset_name {
        table.insert("preset".into(), Value::String(name));
    }
    let config: Config = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::invalid("config", e.message().to_string()))?;
    config.validate()?;
    Ok(config)
}
