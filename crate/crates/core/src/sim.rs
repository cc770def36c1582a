//! Monte Carlo orchestration.
//!
//! A trial is one frame with a fresh channel realization, fresh beamformer
//! phases, fresh data and fresh noise. Every trial owns an RNG stream derived
//! from `(master seed, trial index)` only, so results do not depend on the
//! order in which trials are executed or on how they are spread over threads.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::array::{
    draw_phase_schedule, select_directions, steering_vector, ArrayGeometry, BeamformerBank,
    DopplerParams,
};
use crate::channel::{
    self, add_noise, channel_response, doppler_spread_estimate, draw_paths_with_density,
    AodDensity, PathSet, PropagationMode,
};
use crate::coding::{
    beamformer_assignment, build_alamouti_frame, build_nodiv_frame, build_ssd_frame,
    pilot_sequence, ssd_rotation_matrix, BeamSplit, Constellation, PilotBlock, MAX_SSD_K,
};
use crate::receiver::{
    receive_alamouti_frame, receive_nodiv_frame, receive_ssd_frame, BlockLayout, CsiMode,
    DetectionResult, MlDetector,
};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    SsdDc,
    AlamoutiDc,
    NodivDc,
}

/// A transmit scheme as named in configuration files: `ssd_dc`,
/// `ssd_dc_k<K>`, `alamouti_dc` or `nodiv_dc`. A bare `ssd_dc` takes its block
/// count from the configuration's `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    pub k: Option<usize>,
}

impl SchemeSpec {
    pub const fn new(kind: SchemeKind) -> Self {
        Self { kind, k: None }
    }

    pub const fn ssd(k: usize) -> Self {
        Self {
            kind: SchemeKind::SsdDc,
            k: Some(k),
        }
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.k) {
            (SchemeKind::SsdDc, Some(k)) => write!(f, "ssd_dc_k{k}"),
            (SchemeKind::SsdDc, None) => f.write_str("ssd_dc"),
            (SchemeKind::AlamoutiDc, _) => f.write_str("alamouti_dc"),
            (SchemeKind::NodivDc, _) => f.write_str("nodiv_dc"),
        }
    }
}

impl FromStr for SchemeSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ssd_dc" => Ok(SchemeSpec::new(SchemeKind::SsdDc)),
            "alamouti_dc" => Ok(SchemeSpec::new(SchemeKind::AlamoutiDc)),
            "nodiv_dc" => Ok(SchemeSpec::new(SchemeKind::NodivDc)),
            other => other
                .strip_prefix("ssd_dc_k")
                .and_then(|k| k.parse().ok())
                .map(SchemeSpec::ssd)
                .ok_or_else(|| {
                    format!("unknown scheme `{other}` (expected ssd_dc, ssd_dc_k<K>, alamouti_dc or nodiv_dc)")
                }),
        }
    }
}

/// Full simulation configuration. [`Default`] gives the reference scenario:
/// 64 antennas at 0.45 wavelengths, 5.5 GHz, 100 m/s, 1 Msym/s, 16 pilots,
/// 64 data symbols per block, QPSK.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub schemes: Vec<SchemeSpec>,
    pub num_antennas: usize,
    pub spacing: f64,
    pub num_beams: usize,
    /// SSD block count `K`; also the block count of the conventional frame,
    /// and `K·J` is the Alamouti data length.
    pub k: usize,
    /// Data symbols per block `J`.
    pub j: usize,
    pub pilot_len: usize,
    pub mode: PropagationMode,
    /// Path count in continuum mode.
    pub num_paths: usize,
    pub aod_density: AodDensity,
    pub carrier_hz: f64,
    pub speed_mps: f64,
    pub symbol_rate_hz: f64,
    pub snr_db: Vec<f64>,
    pub seed: u64,
    pub max_trials: u64,
    pub target_errors: u64,
    pub csi: CsiMode,
    /// Real antenna taper; `None` means uniform weights.
    pub weights: Option<Vec<f64>>,
    pub fit_window_db: (f64, f64),
    pub parallel: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            schemes: vec![
                SchemeSpec::new(SchemeKind::SsdDc),
                SchemeSpec::new(SchemeKind::AlamoutiDc),
                SchemeSpec::new(SchemeKind::NodivDc),
            ],
            num_antennas: 64,
            spacing: 0.45,
            num_beams: 8,
            k: 2,
            j: 64,
            pilot_len: 16,
            mode: PropagationMode::Aligned,
            num_paths: 128,
            aod_density: AodDensity::UniformAngle,
            carrier_hz: 5.5e9,
            speed_mps: 100.0,
            symbol_rate_hz: 1e6,
            snr_db: (0..=6).map(|i| 5.0 * i as f64).collect(),
            seed: 1,
            max_trials: 2_000_000,
            target_errors: 200,
            csi: CsiMode::Estimated,
            weights: None,
            fit_window_db: (15.0, 25.0),
            parallel: true,
        }
    }
}

impl SimConfig {
    /// Checks ranges and cross-field constraints; errors name the config key.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: usize| {
            if v == 0 {
                Err(Error::config(key, "must be at least 1"))
            } else {
                Ok(())
            }
        };
        let positive_f = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(
                    key,
                    format!("must be a positive number, got {v}"),
                ))
            }
        };
        if self.schemes.is_empty() {
            return Err(Error::config("scheme", "at least one scheme is required"));
        }
        positive("m", self.num_antennas)?;
        if !(self.spacing > 0.0 && self.spacing <= 1.0) {
            return Err(Error::config(
                "spacing",
                format!("{} outside (0, 1]", self.spacing),
            ));
        }
        positive("q", self.num_beams)?;
        positive("j", self.j)?;
        positive("np", self.pilot_len)?;
        positive("paths", self.num_paths)?;
        positive_f("carrier_hz", self.carrier_hz)?;
        positive_f("symbol_rate_hz", self.symbol_rate_hz)?;
        if !(self.speed_mps.is_finite() && self.speed_mps >= 0.0) {
            return Err(Error::config("speed_mps", "must be a non-negative number"));
        }
        if !(1..=MAX_SSD_K).contains(&self.k) {
            return Err(Error::config(
                "k",
                format!("{} outside 1..={MAX_SSD_K}", self.k),
            ));
        }
        for s in &self.schemes {
            match s.kind {
                SchemeKind::SsdDc => {
                    if let Some(k) = s.k {
                        if !(1..=MAX_SSD_K).contains(&k) {
                            return Err(Error::config(
                                "scheme",
                                format!("{s}: K outside 1..={MAX_SSD_K}"),
                            ));
                        }
                    }
                }
                SchemeKind::AlamoutiDc => {
                    if self.num_beams < 2 {
                        return Err(Error::config("q", "alamouti_dc needs at least 2 beams"));
                    }
                    if !(self.k * self.j).is_multiple_of(2) {
                        return Err(Error::config(
                            "j",
                            "alamouti_dc needs an even data length k·j",
                        ));
                    }
                }
                SchemeKind::NodivDc => {}
            }
        }
        if self.snr_db.is_empty() {
            return Err(Error::config("snr_db_list", "SNR grid is empty"));
        }
        if self
            .snr_db
            .iter()
            .any(|s| s.is_nan() || *s == f64::NEG_INFINITY)
        {
            return Err(Error::config("snr_db_list", "SNR values must be numbers"));
        }
        if self.max_trials == 0 {
            return Err(Error::config("max_trials", "must be at least 1"));
        }
        if self.target_errors == 0 {
            return Err(Error::config("target_errors", "must be at least 1"));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.num_antennas {
                return Err(Error::config(
                    "weights",
                    format!("expected {} entries, got {}", self.num_antennas, w.len()),
                ));
            }
            if w.iter().any(|x| !x.is_finite()) || w.iter().all(|&x| x == 0.0) {
                return Err(Error::config("weights", "must be finite and not all zero"));
            }
        }
        let (lo, hi) = self.fit_window_db;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::config(
                "fit_window_db",
                "needs two increasing finite values",
            ));
        }
        Ok(())
    }

    pub fn doppler(&self) -> Result<DopplerParams> {
        DopplerParams::from_symbol_rate(self.carrier_hz, self.speed_mps, self.symbol_rate_hz)
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.num_antennas, self.spacing)
    }

    pub fn antenna_weights(&self) -> Vec<C64> {
        match &self.weights {
            Some(w) => w.iter().map(|&x| C64::new(x, 0.0)).collect(),
            None => vec![C64::new(1.0, 0.0); self.num_antennas],
        }
    }

    /// Scheme with its block count made explicit.
    pub fn resolve(&self, spec: SchemeSpec) -> SchemeSpec {
        match spec.kind {
            SchemeKind::SsdDc => SchemeSpec::ssd(spec.k.unwrap_or(self.k)),
            _ => SchemeSpec::new(spec.kind),
        }
    }
}

/// RNG for one trial: ChaCha8 keyed by the master seed, stream = trial index.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

/// Errors and data symbols of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialOutcome {
    pub errors: u64,
    pub symbols: u64,
}

/// Receiver half of a trial, applied to the noisy samples.
type Detector<'a> = Box<dyn Fn(&[C64]) -> Result<DetectionResult> + 'a>;

/// What each beam sends over one stretch of the frame.
struct Segment<'a> {
    start: usize,
    len: usize,
    /// Phase-schedule row in force.
    block: usize,
    /// Signal on each beam, indexed from `start`; beams sharing a stream
    /// share a slice.
    beam_signals: Vec<&'a [C64]>,
}

/// Direction-dependent quantities reused by every trial of a beam-indexed
/// mode: Doppler phasors on the frame clock and the array couplings.
struct FastPropagator {
    /// `exp(j·ω_d·T_s·n·cos ϑ_q)` for each beam over the longest frame.
    ramps: Vec<Vec<C64>>,
    /// `a(ϑ_p)ᵀ·diag(w)·a*(ϑ_q)`, row `p`, column `q`.
    coupling: Vec<Vec<C64>>,
}

fn ramp_tables(cosines: &[f64], len: usize, dp: &DopplerParams) -> Vec<Vec<C64>> {
    cosines
        .iter()
        .map(|c| {
            let step = dp.phase_step() * c;
            (0..len).map(|n| C64::cis(step * n as f64)).collect()
        })
        .collect()
}

fn coupling_matrix(path_aods: &[f64], bank: &BeamformerBank) -> Result<Vec<Vec<C64>>> {
    let geom = bank.geometry();
    let beams: Vec<Vec<C64>> = bank
        .directions()
        .iter()
        .zip(0..)
        .map(|(&t, _)| {
            steering_vector(t, geom).map(|a| {
                a.iter()
                    .zip(bank.weights())
                    .map(|(a, w)| w * a.conj())
                    .collect::<Vec<C64>>()
            })
        })
        .collect::<Result<_>>()?;
    path_aods
        .iter()
        .map(|&t| {
            let a = steering_vector(t, geom)?;
            Ok(beams
                .iter()
                .map(|u| a.iter().zip(u).map(|(a, u)| a * u).sum())
                .collect())
        })
        .collect()
}

/// Evaluates `r(n) = Σ_q s_q(n)·e^{−jω T n cos ϑ_q}·Σ_p α_p·ζ·e^{−jπφ_{k,q}}·G_pq·e^{jω T n cos θ_p}`.
fn superpose(
    paths: &PathSet,
    bank: &BeamformerBank,
    coupling: &[Vec<C64>],
    path_ramps: &[Vec<C64>],
    beam_ramps: &[Vec<C64>],
    segments: &[Segment<'_>],
    frame_len: usize,
) -> Result<Vec<C64>> {
    let ideal = paths.mode() == PropagationMode::Ideal;
    let q_count = bank.num_beams();
    let mut out = vec![C64::default(); frame_len];
    let mut coeff = vec![vec![C64::default(); q_count]; paths.len()];
    for seg in segments {
        let zeta = bank.zeta();
        for (p, path) in paths.paths().iter().enumerate() {
            for q in 0..q_count {
                coeff[p][q] = if ideal && p != q {
                    C64::default()
                } else {
                    path.gain * zeta * coupling[p][q] * C64::cis(-PI * bank.phase(seg.block, q)?)
                };
            }
        }
        for i in 0..seg.len {
            let n = seg.start + i;
            let mut acc = C64::default();
            for q in 0..q_count {
                let s = seg.beam_signals[q][i];
                if s == C64::default() {
                    continue;
                }
                let field: C64 = if ideal {
                    coeff[q][q] * path_ramps[q][n]
                } else {
                    coeff.iter().zip(path_ramps).map(|(c, e)| c[q] * e[n]).sum()
                };
                acc += s * beam_ramps[q][n].conj() * field;
            }
            out[n] = acc;
        }
    }
    Ok(out)
}

fn mean(x: &[C64]) -> C64 {
    x.iter().sum::<C64>() / x.len() as f64
}

/// Composes the array, channel, coding and receiver stages for one
/// configuration and holds everything that does not change between trials.
pub struct Simulator {
    config: SimConfig,
    geometry: ArrayGeometry,
    doppler: DopplerParams,
    template: BeamformerBank,
    split: Option<BeamSplit>,
    constellation: Constellation,
    pilot: PilotBlock,
    reference_power: f64,
    detectors: Vec<(usize, MlDetector)>,
    fast: Option<FastPropagator>,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let geometry = config.geometry()?;
        let doppler = config.doppler()?;
        let directions = select_directions(config.num_beams)?;
        let template = BeamformerBank::new(
            geometry,
            directions,
            config.antenna_weights(),
            vec![vec![0.0; config.num_beams]],
        )?;
        let split = if config.num_beams >= 2 {
            Some(beamformer_assignment(config.num_beams)?)
        } else {
            None
        };
        let constellation = Constellation::qpsk();
        let pilot = pilot_sequence(config.pilot_len)?;
        let reference_power = channel::mean_channel_power(&template, config.num_beams);

        let mut detectors: Vec<(usize, MlDetector)> = Vec::new();
        let mut max_len = 0;
        for spec in &config.schemes {
            let spec = config.resolve(*spec);
            if let (SchemeKind::SsdDc, Some(k)) = (spec.kind, spec.k) {
                if !detectors.iter().any(|(dk, _)| *dk == k) {
                    detectors.push((
                        k,
                        MlDetector::new(&ssd_rotation_matrix(k)?, &constellation)?,
                    ));
                }
            }
            max_len = max_len.max(Self::frame_len_of(&config, spec));
        }
        let fast = if config.mode.is_beam_indexed() {
            let cosines: Vec<f64> = template.directions().iter().map(|t| t.cos()).collect();
            Some(FastPropagator {
                ramps: ramp_tables(&cosines, max_len, &doppler),
                coupling: coupling_matrix(template.directions(), &template)?,
            })
        } else {
            None
        };
        Ok(Self {
            config,
            geometry,
            doppler,
            template,
            split,
            constellation,
            pilot,
            reference_power,
            detectors,
            fast,
        })
    }

    fn frame_len_of(config: &SimConfig, spec: SchemeSpec) -> usize {
        match spec.kind {
            SchemeKind::SsdDc => spec.k.unwrap_or(config.k) * (config.pilot_len + config.j),
            SchemeKind::NodivDc => config.k * (config.pilot_len + config.j),
            SchemeKind::AlamoutiDc => 2 * config.pilot_len + config.k * config.j,
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn doppler(&self) -> &DopplerParams {
        &self.doppler
    }

    /// Analytic mean received symbol power used as the SNR reference.
    pub fn reference_power(&self) -> f64 {
        self.reference_power
    }

    /// Data symbols carried by one frame of `scheme`.
    pub fn symbols_per_frame(&self, scheme: SchemeSpec) -> usize {
        match scheme.kind {
            SchemeKind::SsdDc => scheme.k.unwrap_or(self.config.k) * self.config.j,
            _ => self.config.k * self.config.j,
        }
    }

    fn detector(&self, k: usize) -> Result<&MlDetector> {
        self.detectors
            .iter()
            .find(|(dk, _)| *dk == k)
            .map(|(_, d)| d)
            .ok_or_else(|| Error::InvalidArgument(format!("no detector prepared for K = {k}")))
    }

    fn random_bits<R: Rng>(rng: &mut R, n: usize) -> Vec<bool> {
        (0..n).map(|_| rng.random()).collect()
    }

    /// Noise-free received frame for the given segments. Uses the cached
    /// tables in beam-indexed modes and builds them per call otherwise.
    fn received(
        &self,
        paths: &PathSet,
        bank: &BeamformerBank,
        segments: &[Segment<'_>],
        len: usize,
    ) -> Result<Vec<C64>> {
        match &self.fast {
            Some(fast) => superpose(
                paths,
                bank,
                &fast.coupling,
                &fast.ramps,
                &fast.ramps,
                segments,
                len,
            ),
            None => {
                let path_cos: Vec<f64> = paths.paths().iter().map(|p| p.aod.cos()).collect();
                let beam_cos: Vec<f64> = bank.directions().iter().map(|t| t.cos()).collect();
                let aods: Vec<f64> = paths.paths().iter().map(|p| p.aod).collect();
                let coupling = coupling_matrix(&aods, bank)?;
                let path_ramps = ramp_tables(&path_cos, len, &self.doppler);
                let beam_ramps = ramp_tables(&beam_cos, len, &self.doppler);
                superpose(
                    paths,
                    bank,
                    &coupling,
                    &path_ramps,
                    &beam_ramps,
                    segments,
                    len,
                )
            }
        }
    }

    /// One full frame of `scheme` at `snr_db`: draw paths and phases, build
    /// and transmit the frame, add noise, estimate, detect and count.
    pub fn run_trial(
        &self,
        scheme: SchemeSpec,
        snr_db: f64,
        trial_index: u64,
    ) -> Result<TrialOutcome> {
        let (_, outcome) = self.run_trial_detailed(scheme, snr_db, trial_index)?;
        Ok(outcome)
    }

    /// [`run_trial`](Self::run_trial) that also returns the detector output.
    pub fn run_trial_detailed(
        &self,
        scheme: SchemeSpec,
        snr_db: f64,
        trial_index: u64,
    ) -> Result<(DetectionResult, TrialOutcome)> {
        let cfg = &self.config;
        let scheme = cfg.resolve(scheme);
        let mut rng = trial_rng(cfg.seed, trial_index);
        let q = cfg.num_beams;

        let paths = draw_paths_with_density(
            cfg.mode,
            cfg.aod_density,
            &mut rng,
            &self.template,
            cfg.num_paths,
        )?;
        let rows = match scheme.kind {
            SchemeKind::SsdDc => scheme.k.unwrap_or(cfg.k),
            _ => 1,
        };
        let bank = self
            .template
            .with_phases(draw_phase_schedule(rows, q, &mut rng))?;
        let perfect = cfg.csi == CsiMode::Perfect;
        let bps = self.constellation.bits_per_symbol();

        let (clean, truth, detect): (Vec<C64>, Vec<usize>, Detector<'_>) = match scheme.kind {
            SchemeKind::SsdDc | SchemeKind::NodivDc => {
                let k = if scheme.kind == SchemeKind::SsdDc {
                    rows
                } else {
                    cfg.k
                };
                let bits = Self::random_bits(&mut rng, bps * k * cfg.j);
                let frame = if scheme.kind == SchemeKind::SsdDc {
                    build_ssd_frame(
                        &bits,
                        &ssd_rotation_matrix(k)?,
                        cfg.j,
                        &self.pilot,
                        &self.constellation,
                    )?
                } else {
                    build_nodiv_frame(&bits, k, cfg.j, &self.pilot, &self.constellation)?
                };
                let bl = frame.block_len();
                let segments: Vec<Segment<'_>> = frame
                    .blocks
                    .iter()
                    .enumerate()
                    .map(|(b, s)| Segment {
                        start: b * bl,
                        len: bl,
                        block: b,
                        beam_signals: vec![&s[..]; q],
                    })
                    .collect();
                let clean = self.received(&paths, &bank, &segments, k * bl)?;
                let layout = BlockLayout {
                    blocks: k,
                    pilot_len: cfg.pilot_len,
                    data_len: cfg.j,
                };
                let h_true: Option<Vec<C64>> = if perfect {
                    let ones = vec![C64::new(1.0, 0.0); bl];
                    let probe: Vec<Segment<'_>> = (0..k)
                        .map(|b| Segment {
                            start: b * bl,
                            len: bl,
                            block: b,
                            beam_signals: vec![&ones[..]; q],
                        })
                        .collect();
                    let r = self.received(&paths, &bank, &probe, k * bl)?;
                    Some(
                        (0..k)
                            .map(|b| mean(&r[b * bl + cfg.pilot_len..(b + 1) * bl]))
                            .collect(),
                    )
                } else {
                    None
                };
                let detect: Detector<'_> = if scheme.kind == SchemeKind::SsdDc {
                    let det = self.detector(k)?;
                    Box::new(move |rx| {
                        receive_ssd_frame(
                            rx,
                            layout,
                            &self.pilot,
                            det,
                            &self.constellation,
                            h_true.as_deref(),
                        )
                    })
                } else {
                    Box::new(move |rx| {
                        receive_nodiv_frame(
                            rx,
                            layout,
                            &self.pilot,
                            &self.constellation,
                            h_true.as_deref(),
                        )
                    })
                };
                (clean, frame.symbols, detect)
            }
            SchemeKind::AlamoutiDc => {
                let split = self.split.as_ref().ok_or_else(|| {
                    Error::InvalidArgument("alamouti_dc needs at least 2 beams".into())
                })?;
                let bits = Self::random_bits(&mut rng, bps * cfg.k * cfg.j);
                let frame = build_alamouti_frame(&bits, &self.pilot, &self.constellation)?;
                let mut signals: Vec<&[C64]> = vec![&frame.stream1[..]; q];
                for &b in &split.even {
                    signals[b] = &frame.stream2[..];
                }
                let len = frame.len();
                let segments = [Segment {
                    start: 0,
                    len,
                    block: 0,
                    beam_signals: signals,
                }];
                let clean = self.received(&paths, &bank, &segments, len)?;
                let h_true = if perfect {
                    let ones = vec![C64::new(1.0, 0.0); len];
                    let zeros = vec![C64::default(); len];
                    let stream_gain = |beams: &[usize]| -> Result<C64> {
                        let mut sig: Vec<&[C64]> = vec![&zeros[..]; q];
                        for &b in beams {
                            sig[b] = &ones[..];
                        }
                        let probe = [Segment {
                            start: 0,
                            len,
                            block: 0,
                            beam_signals: sig,
                        }];
                        Ok(mean(
                            &self.received(&paths, &bank, &probe, len)?[frame.data_start()..],
                        ))
                    };
                    Some((stream_gain(&split.odd)?, stream_gain(&split.even)?))
                } else {
                    None
                };
                let half = frame.half_len;
                let detect: Detector<'_> = Box::new(move |rx| {
                    receive_alamouti_frame(rx, &self.pilot, half, &self.constellation, h_true)
                });
                (clean, frame.symbols, detect)
            }
        };

        let rx = add_noise(&clean, snr_db, self.reference_power, &mut rng)?;
        let result = detect(&rx.samples)?;
        let (errors, total) = result.symbol_errors(&truth)?;
        Ok((
            result,
            TrialOutcome {
                errors: errors as u64,
                symbols: total as u64,
            },
        ))
    }

    /// Runs trials `[first, first + count)` and sums their outcomes.
    pub fn run_batch(
        &self,
        scheme: SchemeSpec,
        snr_db: f64,
        first: u64,
        count: u64,
    ) -> Result<BatchTotals> {
        let one = |t: u64| -> Result<BatchTotals> {
            let o = self.run_trial(scheme, snr_db, t)?;
            Ok(BatchTotals {
                trials: 1,
                symbols: o.symbols,
                errors: o.errors,
                errors_sq: o.errors * o.errors,
            })
        };
        if self.config.parallel {
            (first..first + count)
                .into_par_iter()
                .map(one)
                .try_reduce(BatchTotals::default, |a, b| Ok(a.merge(b)))
        } else {
            (first..first + count)
                .map(one)
                .try_fold(BatchTotals::default(), |a, b| Ok(a.merge(b?)))
        }
    }

    /// SER at one SNR for one scheme, stopping at the error target or the
    /// trial cap, whichever comes first.
    pub fn run_point(&self, scheme: SchemeSpec, snr_db: f64) -> Result<SerPoint> {
        let cfg = &self.config;
        let scheme = cfg.resolve(scheme);
        let mut totals = BatchTotals::default();
        while totals.errors < cfg.target_errors && totals.trials < cfg.max_trials {
            let batch =
                next_batch_size(&totals, cfg.target_errors).min(cfg.max_trials - totals.trials);
            totals = totals.merge(self.run_batch(scheme, snr_db, totals.trials, batch)?);
        }
        Ok(SerPoint::from_totals(
            scheme.to_string(),
            snr_db,
            &totals,
            cfg.target_errors,
        ))
    }

    /// Sweeps every configured scheme over the SNR grid.
    pub fn run_sweep(&self) -> Result<SweepResult> {
        let mut grid = self.config.snr_db.clone();
        grid.sort_by(f64::total_cmp);
        let mut points = Vec::new();
        let mut fits = Vec::new();
        for &spec in &self.config.schemes {
            let spec = self.config.resolve(spec);
            let mut curve = Vec::with_capacity(grid.len());
            for &snr in &grid {
                curve.push(self.run_point(spec, snr)?);
            }
            let pairs: Vec<(f64, f64)> = curve.iter().map(|p| (p.snr_db, p.ser)).collect();
            fits.push(DiversityFit {
                scheme: spec.to_string(),
                window_db: self.config.fit_window_db,
                order: diversity_order_fit(&pairs, self.config.fit_window_db).ok(),
            });
            points.extend(curve);
        }
        Ok(SweepResult { points, fits })
    }
}

/// Runs the whole sweep described by `config`.
pub fn run_sweep(config: &SimConfig) -> Result<SweepResult> {
    Simulator::new(config.clone())?.run_sweep()
}

/// Integer sums over a set of trials. Merging is associative and
/// commutative, so any grouping of trials gives the same totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BatchTotals {
    pub trials: u64,
    pub symbols: u64,
    pub errors: u64,
    /// Sum of squared per-trial error counts.
    pub errors_sq: u64,
}

impl BatchTotals {
    pub fn merge(self, other: Self) -> Self {
        Self {
            trials: self.trials + other.trials,
            symbols: self.symbols + other.symbols,
            errors: self.errors + other.errors,
            errors_sq: self.errors_sq + other.errors_sq,
        }
    }
}

const MIN_BATCH: u64 = 16;
const MAX_BATCH: u64 = 8192;

/// Batch size from the counts so far; depends only on integers, so the
/// stopping point is reproducible.
fn next_batch_size(totals: &BatchTotals, target: u64) -> u64 {
    let want = if totals.errors == 0 {
        totals.trials.max(MIN_BATCH)
    } else {
        let remaining = target.saturating_sub(totals.errors);
        (remaining * totals.trials).div_ceil(totals.errors)
    };
    want.clamp(MIN_BATCH, MAX_BATCH)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerPoint {
    pub scheme: String,
    pub snr_db: f64,
    pub trials: u64,
    pub symbols: u64,
    pub errors: u64,
    pub ser: f64,
    /// Standard error of `ser` from the spread of per-frame error counts.
    pub ser_stderr: f64,
    /// False when the trial cap was hit before the error target.
    pub target_met: bool,
}

impl SerPoint {
    pub fn from_totals(scheme: String, snr_db: f64, t: &BatchTotals, target_errors: u64) -> Self {
        let ser = if t.symbols == 0 {
            0.0
        } else {
            t.errors as f64 / t.symbols as f64
        };
        let ser_stderr = if t.trials < 2 {
            0.0
        } else {
            let n = t.trials as f64;
            let per_frame = t.symbols as f64 / n;
            let mean = t.errors as f64 / n;
            let var = ((t.errors_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt() / per_frame
        };
        Self {
            scheme,
            snr_db,
            trials: t.trials,
            symbols: t.symbols,
            errors: t.errors,
            ser,
            ser_stderr,
            target_met: t.errors >= target_errors,
        }
    }

    /// Normal-approximation 95% interval.
    pub fn confidence_95(&self) -> (f64, f64) {
        let h = 1.96 * self.ser_stderr;
        ((self.ser - h).max(0.0), self.ser + h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityFit {
    pub scheme: String,
    pub window_db: (f64, f64),
    /// `None` when fewer than two non-zero points fall in the window.
    pub order: Option<f64>,
}

/// Points grouped by scheme in configuration order, each group sorted by SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SerPoint>,
    pub fits: Vec<DiversityFit>,
}

impl SweepResult {
    /// Scheme labels in order of first appearance.
    pub fn schemes(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for p in &self.points {
            if !out.contains(&p.scheme.as_str()) {
                out.push(&p.scheme);
            }
        }
        out
    }

    pub fn curve(&self, scheme: &str) -> Vec<&SerPoint> {
        self.points.iter().filter(|p| p.scheme == scheme).collect()
    }

    pub fn point(&self, scheme: &str, snr_db: f64) -> Option<&SerPoint> {
        self.points
            .iter()
            .find(|p| p.scheme == scheme && p.snr_db == snr_db)
    }

    pub fn fit(&self, scheme: &str) -> Option<&DiversityFit> {
        self.fits.iter().find(|f| f.scheme == scheme)
    }
}

/// Least-squares slope of `log₁₀(SER)` against SNR over the points inside
/// `window_db` (inclusive) with non-zero SER, expressed as decades per 10 dB
/// and negated so that a falling curve has positive order.
pub fn diversity_order_fit(points: &[(f64, f64)], window_db: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window_db;
    let used: Vec<(f64, f64)> = points
        .iter()
        .filter(|(snr, ser)| *snr >= lo && *snr <= hi && *ser > 0.0)
        .map(|&(snr, ser)| (snr, ser.log10()))
        .collect();
    if used.len() < 2 {
        return Err(Error::FitUnavailable(format!(
            "{} usable points in {lo}–{hi} dB, need 2",
            used.len()
        )));
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::FitUnavailable(
            "all usable points share one SNR".into(),
        ));
    }
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(-10.0 * sxy / sxx)
}

/// Parameters for measuring the Doppler spread of the conventional scheme's
/// equivalent channel in continuum mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadStudy {
    pub spacing: f64,
    pub num_beams: usize,
    pub num_paths: usize,
    pub aod_density: AodDensity,
    /// Series length in samples.
    pub samples: usize,
    /// Symbols between consecutive samples of the series.
    pub stride: usize,
    pub realizations: usize,
    pub seed: u64,
}

impl Default for SpreadStudy {
    fn default() -> Self {
        Self {
            spacing: 0.45,
            num_beams: 8,
            num_paths: 128,
            aod_density: AodDensity::UniformAngle,
            samples: 4096,
            stride: 50,
            realizations: 50,
            seed: 7,
        }
    }
}

impl SpreadStudy {
    /// Mean RMS Doppler spread (Hz) over the realizations for an array of
    /// `num_antennas` elements with uniform weights.
    pub fn mean_spread(&self, num_antennas: usize, dp: &DopplerParams) -> Result<f64> {
        let geom = ArrayGeometry::new(num_antennas, self.spacing)?;
        let template = BeamformerBank::new(
            geom,
            select_directions(self.num_beams)?,
            vec![C64::new(1.0, 0.0); num_antennas],
            vec![vec![0.0; self.num_beams]],
        )?;
        let times: Vec<usize> = (0..self.samples).map(|i| i * self.stride).collect();
        let interval = dp.symbol_interval() * self.stride as f64;
        let mut acc = 0.0;
        for r in 0..self.realizations {
            let mut rng = trial_rng(self.seed, r as u64);
            let paths = draw_paths_with_density(
                PropagationMode::Continuum,
                self.aod_density,
                &mut rng,
                &template,
                self.num_paths,
            )?;
            let bank = template.with_phases(draw_phase_schedule(1, self.num_beams, &mut rng))?;
            let series = channel_response(&paths, &bank, 0, dp, &times)?;
            acc += doppler_spread_estimate(&series, interval)?;
        }
        Ok(acc / self.realizations as f64)
    }
}
