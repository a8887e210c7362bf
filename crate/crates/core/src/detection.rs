//! Gated two-channel coincidence counting: analytic accidental/true rates,
//! SNR and its optimum, flux reconstruction, and a seeded Monte-Carlo
//! coincidence histogram.
//!
//! Time inside this module is in ns; pair rates cross the API in pairs/s.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::db_to_linear;

const NS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub efficiency: f64,
    /// counts/ns
    pub dark_rate: f64,
    /// ns
    pub gate: f64,
    /// Hz
    pub trigger_rate: f64,
}

impl DetectorSpec {
    /// 10% efficiency, 50 ns gates at 100 kHz.
    pub fn gated_ingaas(dark_rate: f64) -> Self {
        Self {
            efficiency: 0.1,
            dark_rate,
            gate: 50.0,
            trigger_rate: 1e5,
        }
    }

    pub fn duty_cycle(&self) -> f64 {
        self.gate * NS * self.trigger_rate
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::invalid(
                format!("{key}.efficiency"),
                "must be in [0, 1]",
            ));
        }
        if !(self.dark_rate >= 0.0) {
            return Err(Error::invalid(
                format!("{key}.dark_rate_per_ns"),
                "must be >= 0",
            ));
        }
        if !(self.gate > 0.0) {
            return Err(Error::invalid(format!("{key}.gate_ns"), "must be > 0"));
        }
        if !(self.trigger_rate > 0.0) || self.duty_cycle() > 1.0 {
            return Err(Error::invalid(
                format!("{key}.trigger_rate_hz"),
                "gate × trigger rate must be in (0, 1]",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub detector: DetectorSpec,
    /// Out-coupling, filtering and demultiplexing loss for the band, dB.
    pub collection_loss_db: f64,
}

impl ChannelSpec {
    /// Overall efficiency `η_det·10^(−loss/10)`.
    pub fn efficiency(&self) -> f64 {
        self.detector.efficiency * db_to_linear(-self.collection_loss_db)
    }

    pub fn dark_rate(&self) -> f64 {
        self.detector.dark_rate
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        self.detector.validate(&format!("{key}.detector"))?;
        if !(self.collection_loss_db >= 0.0) {
            return Err(Error::invalid(
                format!("{key}.collection_loss_db"),
                "must be >= 0",
            ));
        }
        if !(self.efficiency() > 0.0) {
            return Err(Error::invalid(
                format!("{key}.detector.efficiency"),
                "overall efficiency must be > 0",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceSetup {
    pub stokes: ChannelSpec,
    pub anti_stokes: ChannelSpec,
    /// ns
    pub time_bin: f64,
    /// ns
    pub timing_resolution: f64,
}

impl CoincidenceSetup {
    fn with_losses(loss_s: f64, dk_s: f64, loss_a: f64, dk_a: f64) -> Self {
        Self {
            stokes: ChannelSpec {
                detector: DetectorSpec::gated_ingaas(dk_s),
                collection_loss_db: loss_s,
            },
            anti_stokes: ChannelSpec {
                detector: DetectorSpec::gated_ingaas(dk_a),
                collection_loss_db: loss_a,
            },
            time_bin: 0.5,
            timing_resolution: 1.5,
        }
    }

    /// Straight waveguide and Sagnac runs: −22.2 dB / −21.2 dB overall.
    pub fn setup1() -> Self {
        Self::with_losses(12.2, 5.6e-5, 11.2, 4.4e-5)
    }

    /// Ring runs: −20.7 dB / −19.0 dB overall.
    pub fn setup2() -> Self {
        Self::with_losses(10.7, 1.4e-5, 9.0, 3e-5)
    }

    /// Second detector setup with the straight waveguide: 0.5 dB more
    /// coupling loss per channel than the ring.
    pub fn setup2_straight() -> Self {
        Self::with_losses(11.2, 1.4e-5, 9.5, 3e-5)
    }

    pub fn validate(&self) -> Result<()> {
        self.stokes.validate("detection.stokes")?;
        self.anti_stokes.validate("detection.anti_stokes")?;
        if !(self.time_bin > 0.0) {
            return Err(Error::invalid("detection.time_bin_ns", "must be > 0"));
        }
        if !(self.timing_resolution > 0.0) {
            return Err(Error::invalid(
                "detection.timing_resolution_ns",
                "must be > 0",
            ));
        }
        let (s, a) = (self.stokes.detector, self.anti_stokes.detector);
        if s.gate != a.gate || s.trigger_rate != a.trigger_rate {
            return Err(Error::invalid(
                "detection.anti_stokes.detector",
                "gate and trigger rate must match the Stokes channel",
            ));
        }
        if self.time_bin > s.gate {
            return Err(Error::invalid(
                "detection.time_bin_ns",
                "must not exceed the gate",
            ));
        }
        Ok(())
    }

    pub fn gate(&self) -> f64 {
        self.stokes.detector.gate
    }

    pub fn trigger_rate(&self) -> f64 {
        self.stokes.detector.trigger_rate
    }
}

/// `γ_e·η + dk`, per ns.
pub fn detection_probability_per_ns(channel: &ChannelSpec, pair_rate: f64) -> f64 {
    pair_rate * NS * channel.efficiency() + channel.dark_rate()
}

/// Expected accidental coincidences in one time bin.
pub fn accidental_coincidences(setup: &CoincidenceSetup, pair_rate: f64) -> f64 {
    detection_probability_per_ns(&setup.stokes, pair_rate)
        * detection_probability_per_ns(&setup.anti_stokes, pair_rate)
        * setup.time_bin.powi(2)
}

/// Expected true coincidences in the peak bin.
pub fn true_coincidences(setup: &CoincidenceSetup, pair_rate: f64) -> f64 {
    pair_rate * NS * setup.stokes.efficiency() * setup.anti_stokes.efficiency() * setup.time_bin
}

pub fn snr(setup: &CoincidenceSetup, pair_rate: f64) -> Result<f64> {
    let ca = accidental_coincidences(setup, pair_rate);
    if !(ca > 0.0) {
        return Err(Error::Degenerate(
            "no accidental coincidences: dark rates and flux are zero".into(),
        ));
    }
    Ok(1.0 + true_coincidences(setup, pair_rate) / ca)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SnrPeak {
    /// pairs/s
    pub pair_rate: f64,
    pub snr_max: f64,
    /// Maximizer found by golden-section search, pairs/s.
    pub searched_rate: f64,
}

/// Maximize `f` on `[a, b]`, assuming unimodality.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `γ_e* = sqrt(dk_s·dk_a/(η_s·η_a))`, cross-checked by a golden-section
/// search in log rate.
pub fn snr_peak(setup: &CoincidenceSetup) -> Result<SnrPeak> {
    let (es, ea) = (setup.stokes.efficiency(), setup.anti_stokes.efficiency());
    let (ds, da) = (setup.stokes.dark_rate(), setup.anti_stokes.dark_rate());
    if !(es > 0.0 && ea > 0.0 && ds > 0.0 && da > 0.0) {
        return Err(Error::Degenerate(
            "SNR peak needs nonzero efficiencies and dark rates".into(),
        ));
    }
    let rate = (ds * da / (es * ea)).sqrt() / NS;
    let snr_max = snr(setup, rate)?;
    let log_snr = |x: f64| snr(setup, x.exp()).unwrap_or(f64::NEG_INFINITY);
    let searched_rate =
        golden_section_max(log_snr, (rate * 1e-4).ln(), (rate * 1e4).ln(), 1e-9).exp();
    Ok(SnrPeak {
        pair_rate: rate,
        snr_max,
        searched_rate,
    })
}

/// Generated-to-detected conversion `η_s·η_a·gate·trigger`.
pub fn duty_and_reconstruction_factor(setup: &CoincidenceSetup) -> f64 {
    setup.stokes.efficiency() * setup.anti_stokes.efficiency() * setup.stokes.detector.duty_cycle()
}

/// Generated pair flux (pairs/s) from a detected true-coincidence rate (1/s).
pub fn reconstruct_pair_flux(setup: &CoincidenceSetup, detected_rate: f64) -> f64 {
    detected_rate / duty_and_reconstruction_factor(setup)
}

/// Mean detections per gate of a gated detector, at most one per gate:
/// `1 − exp(−(η·rate + dk)·gate)` with `rate` in photons/s.
pub fn saturation_model(channel: &ChannelSpec, photon_rate: f64) -> f64 {
    let mean =
        (channel.efficiency() * photon_rate * NS + channel.dark_rate()) * channel.detector.gate;
    -(-mean).exp_m1()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloParams {
    /// pairs/s
    pub pair_rate: f64,
    /// Uncorrelated noise photons/s reaching each channel before its losses.
    pub noise_rate_stokes: f64,
    pub noise_rate_anti_stokes: f64,
    pub n_gates: u64,
    pub seed: u64,
    /// Gaussian timing jitter on the recorded delay, ns.
    pub jitter_sigma: f64,
}

impl MonteCarloParams {
    pub fn new(pair_rate: f64, n_gates: u64, seed: u64) -> Self {
        Self {
            pair_rate,
            noise_rate_stokes: 0.0,
            noise_rate_anti_stokes: 0.0,
            n_gates,
            seed,
            jitter_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_gates == 0 {
            return Err(Error::invalid("coincidence.n_gates", "must be >= 1"));
        }
        for (v, key) in [
            (self.pair_rate, "coincidence.pair_rate_mhz"),
            (self.noise_rate_stokes, "coincidence.noise_rate_stokes_mhz"),
            (
                self.noise_rate_anti_stokes,
                "coincidence.noise_rate_anti_stokes_mhz",
            ),
            (self.jitter_sigma, "coincidence.jitter_sigma_ns"),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(key, "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoincidenceHistogram {
    /// ns
    pub bin_width: f64,
    /// ns
    pub gate: f64,
    pub counts: Vec<u64>,
    pub peak_bin: usize,
    pub n_gates: u64,
    pub seed: u64,
    pub singles_stokes: u64,
    pub singles_anti_stokes: u64,
}

impl CoincidenceHistogram {
    fn empty(setup: &CoincidenceSetup, params: &MonteCarloParams) -> Self {
        let half = (setup.gate() / setup.time_bin).round() as usize;
        Self {
            bin_width: setup.time_bin,
            gate: setup.gate(),
            counts: vec![0; 2 * half + 1],
            peak_bin: half,
            n_gates: 0,
            seed: params.seed,
            singles_stokes: 0,
            singles_anti_stokes: 0,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_gates += other.n_gates;
        self.singles_stokes += other.singles_stokes;
        self.singles_anti_stokes += other.singles_anti_stokes;
        self
    }

    /// Center of bin `i`, ns (anti-Stokes minus Stokes detection time).
    pub fn delay(&self, i: usize) -> f64 {
        (i as f64 - self.peak_bin as f64) * self.bin_width
    }

    pub fn bin_of(&self, delay: f64) -> Option<usize> {
        let k = (delay / self.bin_width).round() as i64 + self.peak_bin as i64;
        (0..self.counts.len() as i64)
            .contains(&k)
            .then_some(k as usize)
    }

    /// `∫_bin (gate − |x|)₊ dx`: relative exposure of bin `i` to uncorrelated
    /// coincidences.
    pub fn overlap_weight(&self, i: usize) -> f64 {
        let lo = self.delay(i) - 0.5 * self.bin_width;
        let hi = lo + self.bin_width;
        let g = self.gate;
        // antiderivative of (g − |x|) clipped to [−g, g]
        let prim = |x: f64| {
            let x = x.clamp(-g, g);
            g * x - 0.5 * x * x.abs()
        };
        prim(hi) - prim(lo)
    }

    /// Coincidence counts in the peak window minus the background expected
    /// there, with the background level fitted to all bins outside the window.
    pub fn peak_excess(&self, half_window: f64) -> f64 {
        let inside = |i: usize| self.delay(i).abs() <= half_window + 1e-12;
        let (mut n_in, mut n_out, mut w_in, mut w_out) = (0.0, 0.0, 0.0, 0.0);
        for (i, &c) in self.counts.iter().enumerate() {
            let w = self.overlap_weight(i);
            if inside(i) {
                n_in += c as f64;
                w_in += w;
            } else {
                n_out += c as f64;
                w_out += w;
            }
        }
        let background = if w_out > 0.0 {
            n_out / w_out * w_in
        } else {
            0.0
        };
        n_in - background
    }

    /// Half-width of the peak window: the bin itself, widened to 3σ of jitter.
    pub fn default_window(&self, jitter_sigma: f64) -> f64 {
        (3.0 * jitter_sigma).max(0.0)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["delay_ns", "counts"])?;
        for (i, c) in self.counts.iter().enumerate() {
            w.serialize((self.delay(i), c))?;
        }
        w.flush().map_err(|e| Error::io("histogram csv", e))?;
        Ok(())
    }
}

/// Gates per seeded sub-stream. Fixed so results do not depend on how many
/// workers process the chunks.
pub const CHUNK_GATES: u64 = 1 << 16;

struct GateSampler {
    gate: f64,
    pairs: Option<Poisson<f64>>,
    extra_s: Option<Poisson<f64>>,
    extra_a: Option<Poisson<f64>>,
    eta_s: f64,
    eta_a: f64,
    jitter: Option<Normal<f64>>,
}

fn poisson(mean: f64) -> Option<Poisson<f64>> {
    (mean > 0.0).then(|| Poisson::new(mean).expect("finite positive mean"))
}

impl GateSampler {
    fn new(setup: &CoincidenceSetup, p: &MonteCarloParams) -> Self {
        let gate = setup.gate();
        let (eta_s, eta_a) = (setup.stokes.efficiency(), setup.anti_stokes.efficiency());
        // uncorrelated detections: surviving noise photons plus dark counts
        let extra_s = (p.noise_rate_stokes * NS * eta_s + setup.stokes.dark_rate()) * gate;
        let extra_a =
            (p.noise_rate_anti_stokes * NS * eta_a + setup.anti_stokes.dark_rate()) * gate;
        Self {
            gate,
            pairs: poisson(p.pair_rate * NS * gate),
            extra_s: poisson(extra_s),
            extra_a: poisson(extra_a),
            eta_s,
            eta_a,
            jitter: (p.jitter_sigma > 0.0)
                .then(|| Normal::new(0.0, p.jitter_sigma).expect("positive sigma")),
        }
    }

    fn earliest_uncorrelated<R: Rng>(&self, dist: &Option<Poisson<f64>>, rng: &mut R) -> f64 {
        let mut first = f64::INFINITY;
        if let Some(d) = dist {
            let n = d.sample(rng) as u64;
            for _ in 0..n {
                first = first.min(rng.random::<f64>() * self.gate);
            }
        }
        first
    }

    /// Earliest Stokes and anti-Stokes detection times in one gate.
    fn gate<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let mut ts = self.earliest_uncorrelated(&self.extra_s, rng);
        let mut ta = self.earliest_uncorrelated(&self.extra_a, rng);
        if let Some(d) = &self.pairs {
            let n = d.sample(rng) as u64;
            for _ in 0..n {
                let t = rng.random::<f64>() * self.gate;
                if rng.random::<f64>() < self.eta_s {
                    ts = ts.min(t);
                }
                if rng.random::<f64>() < self.eta_a {
                    ta = ta.min(t);
                }
            }
        }
        (ts, ta)
    }
}

fn run_chunk(
    setup: &CoincidenceSetup,
    params: &MonteCarloParams,
    sampler: &GateSampler,
    chunk: u64,
) -> CoincidenceHistogram {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(chunk);
    let mut h = CoincidenceHistogram::empty(setup, params);
    let start = chunk * CHUNK_GATES;
    let gates = CHUNK_GATES.min(params.n_gates - start);
    for _ in 0..gates {
        let (ts, ta) = sampler.gate(&mut rng);
        h.singles_stokes += ts.is_finite() as u64;
        h.singles_anti_stokes += ta.is_finite() as u64;
        if ts.is_finite() && ta.is_finite() {
            let mut delay = ta - ts;
            if let Some(j) = &sampler.jitter {
                delay += j.sample(&mut rng);
            }
            if let Some(b) = h.bin_of(delay) {
                h.counts[b] += 1;
            }
        }
    }
    h.n_gates = gates;
    h
}

/// Simulate `n_gates` detection gates and histogram the Stokes/anti-Stokes
/// delay. Bit-identical for a given seed regardless of thread count.
pub fn monte_carlo_histogram(
    setup: &CoincidenceSetup,
    params: &MonteCarloParams,
) -> Result<CoincidenceHistogram> {
    setup.validate()?;
    params.validate()?;
    let sampler = GateSampler::new(setup, params);
    let chunks = params.n_gates.div_ceil(CHUNK_GATES);
    let empty = || CoincidenceHistogram::empty(setup, params);
    #[cfg(feature = "parallel")]
    let h = {
        use rayon::prelude::*;
        (0..chunks)
            .into_par_iter()
            .map(|c| run_chunk(setup, params, &sampler, c))
            .reduce(empty, CoincidenceHistogram::merge)
    };
    #[cfg(not(feature = "parallel"))]
    let h = (0..chunks)
        .map(|c| run_chunk(setup, params, &sampler, c))
        .fold(empty(), CoincidenceHistogram::merge);
    Ok(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoincidenceSummary {
    pub c_a: f64,
    pub c_p: f64,
    pub snr: f64,
    /// pairs/s reconstructed from the simulated peak excess
    pub reconstructed_flux: f64,
}

pub fn summarize(
    setup: &CoincidenceSetup,
    params: &MonteCarloParams,
    hist: &CoincidenceHistogram,
) -> Result<CoincidenceSummary> {
    let excess = hist.peak_excess(hist.default_window(params.jitter_sigma));
    let seconds = hist.n_gates as f64 / setup.trigger_rate();
    Ok(CoincidenceSummary {
        c_a: accidental_coincidences(setup, params.pair_rate),
        c_p: true_coincidences(setup, params.pair_rate),
        snr: snr(setup, params.pair_rate)?,
        reconstructed_flux: reconstruct_pair_flux(setup, excess / seconds),
    })
}

pub fn write_summary_csv<W: Write>(summary: &CoincidenceSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.serialize(summary)?;
    w.flush().map_err(|e| Error::io("summary csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn detection_probability_examples() {
        let s = CoincidenceSetup::setup1();
        assert_eq!(detection_probability_per_ns(&s.stokes, 0.0), 5.6e-5);
        let p = detection_probability_per_ns(&s.stokes, 7e6);
        assert!((p - 9.82e-5).abs() < 0.005e-5, "{p}");
        let mut dead = s.stokes;
        dead.detector.efficiency = 0.0;
        assert_eq!(detection_probability_per_ns(&dead, 1e9), 5.6e-5);
    }

    #[test]
    fn coincidence_examples() {
        let s = CoincidenceSetup::setup1();
        let ca = accidental_coincidences(&s, 7e6);
        let cp = true_coincidences(&s, 7e6);
        assert!((ca - 2.38e-9).abs() < 0.005e-9, "{ca}");
        assert!((cp - 1.60e-7).abs() < 0.005e-7, "{cp}");
        let mut wide = s;
        wide.time_bin = 1.0;
        assert!((accidental_coincidences(&wide, 7e6) / ca - 4.0).abs() < 1e-12);
        assert!((true_coincidences(&s, 14e6) / cp - 2.0).abs() < 1e-12);
        let mut dark_free = s;
        dark_free.stokes.detector.dark_rate = 0.0;
        dark_free.anti_stokes.detector.dark_rate = 0.0;
        assert_eq!(accidental_coincidences(&dark_free, 0.0), 0.0);
        assert!(snr(&dark_free, 0.0).is_err());
    }

    #[test]
    fn snr_examples() {
        let s = CoincidenceSetup::setup1();
        let v = snr(&s, 7e6).unwrap();
        assert!((v - 68.0).abs() <= 2.0, "{v}");
        // swapping which dark rate sits on which band
        let mut swapped = s;
        swapped.stokes.detector.dark_rate = 4.4e-5;
        swapped.anti_stokes.detector.dark_rate = 5.6e-5;
        assert!((snr(&swapped, 7e6).unwrap() - 68.0).abs() <= 2.0);
        // asymptotics
        let eta = s.stokes.efficiency() * s.anti_stokes.efficiency();
        let big = 1e13;
        let expected = 1.0 + eta / (eta * big * NS * s.time_bin);
        assert!((snr(&s, big).unwrap() - expected).abs() / expected < 1e-3);
        assert!(snr(&s, 1.0).unwrap() - 1.0 < 1e-3);
    }

    #[test]
    fn snr_peak_examples() {
        let peak = snr_peak(&CoincidenceSetup::setup2()).unwrap();
        assert!(
            (peak.pair_rate - 1.98e6).abs() < 0.01e6,
            "{}",
            peak.pair_rate
        );
        assert!((peak.snr_max - 251.0).abs() < 1.0, "{}", peak.snr_max);
        assert!((peak.searched_rate / peak.pair_rate - 1.0).abs() < 1e-3);

        let mut sym = CoincidenceSetup::setup2();
        sym.anti_stokes = sym.stokes;
        let p = snr_peak(&sym).unwrap();
        let expected = sym.stokes.dark_rate() / sym.stokes.efficiency() / NS;
        assert!((p.pair_rate / expected - 1.0).abs() < 1e-12);

        let mut scaled = CoincidenceSetup::setup2();
        scaled.stokes.detector.dark_rate *= 3.0;
        scaled.anti_stokes.detector.dark_rate *= 3.0;
        let q = snr_peak(&scaled).unwrap();
        assert!((q.pair_rate / peak.pair_rate - 3.0).abs() < 1e-9);

        let straight = snr_peak(&CoincidenceSetup::setup2_straight()).unwrap();
        assert!(
            (straight.snr_max - 225.0).abs() / 225.0 < 0.15,
            "{}",
            straight.snr_max
        );

        let mut no_dark = CoincidenceSetup::setup2();
        no_dark.stokes.detector.dark_rate = 0.0;
        assert!(snr_peak(&no_dark).is_err());
    }

    #[test]
    fn duty_factor_examples() {
        let f1 = duty_and_reconstruction_factor(&CoincidenceSetup::setup1());
        assert!((f1 - 2.29e-7).abs() < 0.005e-7, "{f1}");
        let f2 = duty_and_reconstruction_factor(&CoincidenceSetup::setup2());
        assert!((f2 - 5.36e-7).abs() < 0.005e-7, "{f2}");
        let s = CoincidenceSetup::setup1();
        assert!((reconstruct_pair_flux(&s, f1 * 7e6) - 7e6).abs() < 1e-6);
    }

    #[test]
    fn saturation_examples() {
        let mut ch = CoincidenceSetup::setup1().stokes;
        ch.detector.dark_rate = 0.0;
        assert!((saturation_model(&ch, 1e15) - 1.0).abs() < 1e-9);
        let small = 1e3;
        let slope = ch.efficiency() * NS * ch.detector.gate;
        assert!((saturation_model(&ch, small) / (slope * small) - 1.0).abs() < 1e-6);
        let half = std::f64::consts::LN_2 / slope;
        assert!((saturation_model(&ch, half) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn setup_validation() {
        assert!(CoincidenceSetup::setup1().validate().is_ok());
        let mut s = CoincidenceSetup::setup1();
        s.anti_stokes.detector.gate = 20.0;
        assert!(s.validate().is_err());
        let mut s = CoincidenceSetup::setup1();
        s.stokes.detector.trigger_rate = 1e8;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("trigger_rate_hz"), "{err}");
    }

    #[test]
    fn overlap_weights_cover_triangle() {
        let s = CoincidenceSetup::setup1();
        let h = CoincidenceHistogram::empty(&s, &MonteCarloParams::new(0.0, 1, 0));
        assert_eq!(h.counts.len(), 201);
        let total: f64 = (0..h.counts.len()).map(|i| h.overlap_weight(i)).sum();
        assert!((total - 50.0 * 50.0).abs() < 1e-9);
        assert!((h.overlap_weight(h.peak_bin) - (50.0 * 0.5 - 0.25 * 0.25)).abs() < 1e-12);
    }

    #[test]
    fn empty_when_nothing_fires() {
        let mut s = CoincidenceSetup::setup1();
        s.stokes.detector.dark_rate = 0.0;
        s.anti_stokes.detector.dark_rate = 0.0;
        let h = monte_carlo_histogram(&s, &MonteCarloParams::new(0.0, 100_000, 1)).unwrap();
        assert!(h.counts.iter().all(|&c| c == 0));
        assert_eq!(h.n_gates, 100_000);
        assert!(monte_carlo_histogram(&s, &MonteCarloParams::new(0.0, 0, 1)).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let s = CoincidenceSetup::setup1();
        let p = MonteCarloParams::new(7e6, 300_000, 42);
        let a = monte_carlo_histogram(&s, &p).unwrap();
        let b = monte_carlo_histogram(&s, &p).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_histogram(&s, &MonteCarloParams { seed: 43, ..p }).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn independent_of_worker_count() {
        let s = CoincidenceSetup::setup1();
        let p = MonteCarloParams::new(7e6, 500_000, 9);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| monte_carlo_histogram(&s, &p).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    /// Expected counts per bin from the rate-product formulas.
    fn oracle(
        s: &CoincidenceSetup,
        p: &MonteCarloParams,
        h: &CoincidenceHistogram,
        i: usize,
    ) -> f64 {
        let pa = detection_probability_per_ns(&s.stokes, p.pair_rate);
        let pb = detection_probability_per_ns(&s.anti_stokes, p.pair_rate);
        let n = p.n_gates as f64;
        let mut e = n * pa * pb * h.overlap_weight(i);
        if i == h.peak_bin {
            e += n * true_coincidences(s, p.pair_rate) * s.gate() / s.time_bin;
        }
        e
    }

    #[test]
    fn histogram_matches_rate_products() {
        let s = CoincidenceSetup::setup1();
        let p = MonteCarloParams::new(7e6, 10_000_000, 2024);
        let h = monte_carlo_histogram(&s, &p).unwrap();
        let mut observed = 0.0;
        let mut expected = 0.0;
        for i in (0..h.counts.len()).filter(|&i| i != h.peak_bin) {
            observed += h.counts[i] as f64;
            expected += oracle(&s, &p, &h, i);
        }
        assert!(
            (observed - expected).abs() < 3.0 * expected.sqrt(),
            "{observed} vs {expected}"
        );
        let peak = oracle(&s, &p, &h, h.peak_bin);
        let got = h.counts[h.peak_bin] as f64;
        assert!((got - peak).abs() < 3.0 * peak.sqrt(), "{got} vs {peak}");
    }

    #[test]
    fn reconstruction_round_trip() {
        let mut s = CoincidenceSetup::setup1();
        s.stokes.collection_loss_db = 0.0;
        s.anti_stokes.collection_loss_db = 0.0;
        s.stokes.detector.efficiency = 0.5;
        s.anti_stokes.detector.efficiency = 0.5;
        let rate = 2e5;
        let p = MonteCarloParams::new(rate, 20_000_000, 7);
        let h = monte_carlo_histogram(&s, &p).unwrap();
        let summary = summarize(&s, &p, &h).unwrap();
        assert!(
            (summary.reconstructed_flux / rate - 1.0).abs() < 0.02,
            "{}",
            summary.reconstructed_flux
        );
        let mut buf = Vec::new();
        write_summary_csv(&summary, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("c_a,c_p,snr,reconstructed_flux\n"));
    }

    #[test]
    fn jitter_spreads_peak() {
        let s = CoincidenceSetup::setup1();
        let p = MonteCarloParams {
            jitter_sigma: 1.5,
            ..MonteCarloParams::new(7e6, 2_000_000, 3)
        };
        let h = monte_carlo_histogram(&s, &p).unwrap();
        let window = h.default_window(p.jitter_sigma);
        let excess = h.peak_excess(window);
        let expected =
            p.n_gates as f64 * true_coincidences(&s, p.pair_rate) * s.gate() / s.time_bin;
        assert!(
            (excess - expected).abs() < 4.0 * (expected + 20.0).sqrt(),
            "{excess} vs {expected}"
        );
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("delay_ns,counts\n"));
        assert_eq!(text.lines().count(), 202);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn snr_at_least_one(rate in prop_oneof![Just(0.0), 1e3f64..1e10]) {
            let v = snr(&CoincidenceSetup::setup1(), rate).unwrap();
            prop_assert!(v >= 1.0);
            prop_assert_eq!(v == 1.0, rate == 0.0);
        }

        #[test]
        fn snr_unimodal_about_closed_form(
            ls in 5.0f64..15.0, la in 5.0f64..15.0,
            ds in 1e-6f64..1e-4, da in 1e-6f64..1e-4,
        ) {
            let mut s = CoincidenceSetup::setup2();
            s.stokes.collection_loss_db = ls;
            s.anti_stokes.collection_loss_db = la;
            s.stokes.detector.dark_rate = ds;
            s.anti_stokes.detector.dark_rate = da;
            let peak = snr_peak(&s).unwrap();
            prop_assert!((peak.searched_rate / peak.pair_rate - 1.0).abs() < 1e-3);
            // monotone on either side of the peak
            let grid: Vec<f64> = (-30..=30).map(|k| peak.pair_rate * 10f64.powf(k as f64 / 10.0)).collect();
            let vals: Vec<f64> = grid.iter().map(|&r| snr(&s, r).unwrap()).collect();
            for k in 0..30 {
                prop_assert!(vals[k] <= vals[k + 1]);
                prop_assert!(vals[30 + k] >= vals[31 + k]);
            }
        }
    }
}
