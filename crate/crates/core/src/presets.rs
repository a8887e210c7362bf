//! Built-in experiment presets for the three measured structures.

use toml::Table;

use crate::error::{Error, Result};

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    /// Where the values come from.
    pub provenance: &'static [&'static str],
    pub toml: &'static str,
}

const WIRE_NOTES: &str = "waveguide: 500×220 nm² wire, A_eff 0.064 µm², n₂ 4.4e-18 m²/W (γ ≈ 280 /W/m at 1540 nm), β₂ −0.7 ps²/m, 4 dB/cm";
const SETUP1_NOTES: &str =
    "detection setup 1: 50 ns gates at 100 kHz, 10% detectors, −22.2/−21.2 dB overall, dark 5.6e-5/4.4e-5 per ns, 0.5 ns bins";
const SETUP2_NOTES: &str =
    "detection setup 2: −20.7/−19.0 dB overall, dark 1.4e-5/3e-5 per ns, same gating";

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "paper-straight-setup1",
        summary: "11.3 mm straight wire, 1540 nm pump, first detection setup",
        provenance: &[
            WIRE_NOTES,
            "length 11.3 mm; pump 1540 nm; nominal 5 mW operating point",
            SETUP1_NOTES,
        ],
        toml: r#"
[experiment]
structure = "straight"

[pump]
wavelength_nm = 1540.0
power_mw = 5.0
sweep_mw = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]

[waveguide]
length_mm = 11.3

[detection]
setup = "setup1"
"#,
    },
    Preset {
        name: "paper-sagnac-setup1",
        summary: "10 mm Sagnac loop with dispersive 62/38 coupler, first detection setup",
        provenance: &[
            WIRE_NOTES,
            "loop 10 mm; coupler κ = 0.52/0.62/0.72 at 1520/1540/1560 nm (measured)",
            "representative pair: 1550 nm signal with its conjugate idler",
            SETUP1_NOTES,
        ],
        toml: r#"
[experiment]
structure = "sagnac"

[pump]
wavelength_nm = 1540.0
power_mw = 5.0
sweep_mw = [1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 15.0]

[sagnac]
loop_length_mm = 10.0
coupler_anchors = [[1520.0, 0.52], [1540.0, 0.62], [1560.0, 0.72]]
signal_nm = 1550.0

[detection]
setup = "setup1"
"#,
    },
    Preset {
        name: "paper-ring-setup2",
        summary: "43 µm racetrack ring, buildup 110 and finesse 345, second detection setup",
        provenance: &[
            WIRE_NOTES,
            "ring: 43 µm round trip, FSR 12 nm, resonances 1528.0/1540.0/1552.1 nm",
            "calibration targets: buildup 110, finesse 345 (cold FWHM ≈ 35 pm)",
            "pump 0.4 mW on the 1540 nm resonance",
            SETUP2_NOTES,
        ],
        toml: r#"
[experiment]
structure = "ring"

[pump]
wavelength_nm = 1540.0
power_mw = 0.4
sweep_mw = [0.1, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0]

[ring]
round_trip_length_um = 43.0
calibrate_enhancement = 110.0
calibrate_finesse = 345.0
reference_resonance_nm = 1540.0
fsr_nm = 12.0

[detection]
setup = "setup2"
"#,
    },
    Preset {
        name: "paper-straight-setup2",
        summary: "11.3 mm straight wire measured with the second detection setup",
        provenance: &[
            WIRE_NOTES,
            "length 11.3 mm; pump 1540 nm",
            "detection setup 2 with 0.5 dB extra coupling loss per channel (−21.2/−19.5 dB)",
        ],
        toml: r#"
[experiment]
structure = "straight"

[pump]
wavelength_nm = 1540.0
power_mw = 5.0
sweep_mw = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]

[waveguide]
length_mm = 11.3

[detection]
setup = "setup2-straight"
"#,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn preset_table(name: &str) -> Result<Table> {
    let p = find(name).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        Error::invalid(
            "preset",
            format!("unknown preset `{name}` (known: {})", known.join(", ")),
        )
    })?;
    crate::config::parse_table(p.toml, name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_table, resolve, SetupId, Structure};
    use crate::units::Wavelength;

    #[test]
    fn catalog_contains_measured_structures() {
        for name in [
            "paper-straight-setup1",
            "paper-sagnac-setup1",
            "paper-ring-setup2",
        ] {
            assert!(find(name).is_some(), "{name}");
        }
        assert!(preset_table("nope").is_err());
    }

    #[test]
    fn presets_round_trip_through_serialization() {
        for p in PRESETS {
            let c = resolve(None, Some(p.name), &[]).unwrap();
            let text = c.to_toml().unwrap();
            let back = resolve(Some(parse_table(&text, "t").unwrap()), None, &[]).unwrap();
            assert_eq!(back, c, "{}", p.name);
        }
    }

    #[test]
    fn preset_values_spot_check() {
        let c = resolve(None, Some("paper-straight-setup1"), &[]).unwrap();
        let wg = c.waveguide.spec().unwrap();
        let gamma = wg.nonlinearity(Wavelength::from_nm(1540.0));
        assert!((gamma - 280.0).abs() < 1.0);
        assert!((wg.gvd + 0.7e-24).abs() < 1e-36);
        let d = c.detection.setup().unwrap();
        assert_eq!(d.gate(), 50.0);
        assert_eq!(d.trigger_rate(), 1e5);
        let ring = resolve(None, Some("paper-ring-setup2"), &[]).unwrap();
        assert_eq!(ring.experiment.structure, Structure::Ring);
        assert_eq!(ring.detection.setup, SetupId::Setup2);
        assert_eq!(ring.pump.power_mw, 0.4);
    }
}
