//! Multipath channel realizations, propagation through the time-varying
//! channel, the large-array equivalent channel, receiver noise and a Doppler
//! spread metric.
//!
//! The angular integral of the received-signal model is discretised as a sum
//! over a finite [`PathSet`]. Three propagation modes are offered:
//!
//! - [`PropagationMode::Ideal`] keeps only the self-beam terms, which is the
//!   large-array limit in which every beam sees a time-invariant channel;
//! - [`PropagationMode::Aligned`] places one path on each beam direction and
//!   keeps all finite-array cross-beam leakage and residual Doppler;
//! - [`PropagationMode::Continuum`] draws random departure angles.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::array::{
    phase_ramp_from, steering_vector, ArrayGeometry, BeamformerBank, DopplerParams, TransmitMatrix,
};
use crate::{Error, Result, C64};

/// Noise is never scaled below this SNR; larger requests are clamped.
pub const MAX_SNR_DB: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PropagationMode {
    Ideal,
    Aligned,
    Continuum,
}

impl PropagationMode {
    /// Whether paths are indexed by beam, so that path `q` leaves along beam `q`.
    pub fn is_beam_indexed(self) -> bool {
        matches!(self, PropagationMode::Ideal | PropagationMode::Aligned)
    }

    pub fn name(self) -> &'static str {
        match self {
            PropagationMode::Ideal => "ideal",
            PropagationMode::Aligned => "aligned",
            PropagationMode::Continuum => "continuum",
        }
    }
}

impl fmt::Display for PropagationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PropagationMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ideal" => Ok(PropagationMode::Ideal),
            "aligned" => Ok(PropagationMode::Aligned),
            "continuum" => Ok(PropagationMode::Continuum),
            other => Err(format!(
                "unknown mode `{other}` (expected ideal, aligned or continuum)"
            )),
        }
    }
}

/// Density of departure angles in continuum mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AodDensity {
    /// Uniform in angle on `(0, π)` (classical Jakes).
    #[default]
    UniformAngle,
    /// Uniform in `cos θ` on `(−1, 1)`.
    UniformCosine,
}

impl AodDensity {
    pub fn name(self) -> &'static str {
        match self {
            AodDensity::UniformAngle => "uniform_angle",
            AodDensity::UniformCosine => "uniform_cosine",
        }
    }
}

impl FromStr for AodDensity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uniform_angle" => Ok(AodDensity::UniformAngle),
            "uniform_cosine" => Ok(AodDensity::UniformCosine),
            other => Err(format!(
                "unknown AOD density `{other}` (expected uniform_angle or uniform_cosine)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    /// Angle of departure in `(0, π)`.
    pub aod: f64,
    pub gain: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    paths: Vec<Path>,
    mode: PropagationMode,
}

impl PathSet {
    pub fn new(paths: Vec<Path>, mode: PropagationMode) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidArgument("path set is empty".into()));
        }
        if let Some(p) = paths.iter().find(|p| !(p.aod > 0.0 && p.aod < PI)) {
            return Err(Error::Domain(format!("path AOD {} outside (0, π)", p.aod)));
        }
        Ok(Self { paths, mode })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn mode(&self) -> PropagationMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

/// Draws a channel realization with unit total mean power.
///
/// Ideal and aligned modes place one path on each beam direction with gain
/// `CN(0, 1/Q)`; `num_paths` is then only checked to be non-zero. Continuum
/// mode draws `num_paths` angles from `density` with gains `CN(0, 1/P)`.
pub fn draw_paths<R: Rng + ?Sized>(
    mode: PropagationMode,
    rng: &mut R,
    bank: &BeamformerBank,
    num_paths: usize,
) -> Result<PathSet> {
    draw_paths_with_density(mode, AodDensity::UniformAngle, rng, bank, num_paths)
}

pub fn draw_paths_with_density<R: Rng + ?Sized>(
    mode: PropagationMode,
    density: AodDensity,
    rng: &mut R,
    bank: &BeamformerBank,
    num_paths: usize,
) -> Result<PathSet> {
    if num_paths == 0 {
        return Err(Error::InvalidArgument(
            "path count must be at least 1".into(),
        ));
    }
    let paths = if mode.is_beam_indexed() {
        let var = 1.0 / bank.num_beams() as f64;
        bank.directions()
            .iter()
            .map(|&aod| Path {
                aod,
                gain: complex_gaussian(rng, var),
            })
            .collect()
    } else {
        let var = 1.0 / num_paths as f64;
        (0..num_paths)
            .map(|_| {
                let aod = loop {
                    let t = match density {
                        AodDensity::UniformAngle => rng.random_range(0.0..PI),
                        AodDensity::UniformCosine => rng.random_range(-1.0f64..1.0).acos(),
                    };
                    if t > 0.0 && t < PI {
                        break t;
                    }
                };
                Path {
                    aod,
                    gain: complex_gaussian(rng, var),
                }
            })
            .collect()
    };
    PathSet::new(paths, mode)
}

fn beam_path(paths: &PathSet, beam: usize) -> Result<&Path> {
    paths.paths.get(beam).ok_or(Error::IndexOutOfRange {
        what: "beam-indexed path",
        index: beam,
        limit: paths.len(),
    })
}

/// Noise-free received signal `r = Σ_q Σ_p α_p·a(θ_p)ᵀ·X_q·Φ(cos θ_p)`.
///
/// All matrices must cover the same frame-time window. In ideal mode only the
/// term where path `q` meets beam `q` is kept.
pub fn propagate(
    paths: &PathSet,
    matrices: &[TransmitMatrix],
    geom: &ArrayGeometry,
    dp: &DopplerParams,
) -> Result<Vec<C64>> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::InvalidArgument("no transmit matrices".into()))?;
    let (len, start) = (first.cols(), first.start());
    for x in matrices {
        if x.cols() != len {
            return Err(Error::DimensionMismatch {
                what: "transmit matrix columns",
                expected: len,
                actual: x.cols(),
            });
        }
        if x.start() != start {
            return Err(Error::InvalidArgument(
                "transmit matrices cover different time windows".into(),
            ));
        }
        if x.rows() != geom.num_antennas() {
            return Err(Error::DimensionMismatch {
                what: "transmit matrix rows",
                expected: geom.num_antennas(),
                actual: x.rows(),
            });
        }
    }

    let mut out = vec![C64::default(); len];
    let couple = |path: &Path, x: &TransmitMatrix| -> Result<(C64, Vec<C64>)> {
        let a = steering_vector(path.aod, geom)?;
        let g: C64 = a.iter().zip(x.antenna_factor()).map(|(a, u)| a * u).sum();
        let ramp = phase_ramp_from(path.aod.cos(), start, len, dp)?;
        Ok((path.gain * g, ramp))
    };

    if paths.mode() == PropagationMode::Ideal {
        for x in matrices {
            let (c, ramp) = couple(beam_path(paths, x.beam())?, x)?;
            for ((o, v), e) in out.iter_mut().zip(x.time_factor()).zip(&ramp) {
                *o += c * v * e;
            }
        }
        return Ok(out);
    }

    for path in paths.paths() {
        let mut gains = Vec::with_capacity(matrices.len());
        let mut ramp = Vec::new();
        for x in matrices {
            let (c, r) = couple(path, x)?;
            gains.push(c);
            ramp = r;
        }
        for (n, o) in out.iter_mut().enumerate() {
            let mix: C64 = matrices
                .iter()
                .zip(&gains)
                .map(|(x, g)| g * x.time_factor()[n])
                .sum();
            *o += mix * ramp[n];
        }
    }
    Ok(out)
}

/// Large-array equivalent channel `ζ·(Σ_m w_m)·Σ_{q∈S} α(ϑ_q)·e^{−jπφ_{k,q}}`
/// for the beams in `beams` during block `block`.
pub fn equivalent_channel_oracle(
    paths: &PathSet,
    bank: &BeamformerBank,
    block: usize,
    beams: &[usize],
) -> Result<C64> {
    if !paths.mode().is_beam_indexed() {
        return Err(Error::UnsupportedMode(format!(
            "equivalent channel needs beam-indexed paths, got {}",
            paths.mode()
        )));
    }
    let mut acc = C64::default();
    for &q in beams {
        let alpha = beam_path(paths, q)?.gain;
        acc += alpha * C64::cis(-PI * bank.phase(block, q)?);
    }
    Ok(acc * bank.zeta() * bank.weight_sum())
}

/// [`equivalent_channel_oracle`] over every beam of the bank.
pub fn equivalent_channel_all(paths: &PathSet, bank: &BeamformerBank, block: usize) -> Result<C64> {
    let all: Vec<usize> = (0..bank.num_beams()).collect();
    equivalent_channel_oracle(paths, bank, block, &all)
}

/// Analytic `E|h_eq|²` for a stream carried by `subset_size` of the bank's
/// beams, under unit total path power split evenly over the beams.
pub fn mean_channel_power(bank: &BeamformerBank, subset_size: usize) -> f64 {
    let z = bank.zeta();
    z * z * bank.weight_sum().norm_sqr() * subset_size as f64 / bank.num_beams() as f64
}

/// Time series of the conventional scheme's channel, `r(n)/s(n)` when every
/// beam carries the same stream under phase row `block`, evaluated at the
/// given frame-time sample indices.
pub fn channel_response(
    paths: &PathSet,
    bank: &BeamformerBank,
    block: usize,
    dp: &DopplerParams,
    times: &[usize],
) -> Result<Vec<C64>> {
    let geom = bank.geometry();
    let mut terms: Vec<(C64, f64)> = Vec::new();
    let weights = bank.weights();
    for q in 0..bank.num_beams() {
        let b = bank.beamformer(block, q)?;
        let u: Vec<C64> = weights.iter().zip(&b).map(|(w, b)| w * b.conj()).collect();
        let cos_beam = bank.directions()[q].cos();
        let selected: Vec<&Path> = if paths.mode() == PropagationMode::Ideal {
            vec![beam_path(paths, q)?]
        } else {
            paths.paths().iter().collect()
        };
        for p in selected {
            let a = steering_vector(p.aod, geom)?;
            let g: C64 = a.iter().zip(&u).map(|(a, u)| a * u).sum();
            terms.push((p.gain * g, p.aod.cos() - cos_beam));
        }
    }
    let step = dp.phase_step();
    Ok(times
        .iter()
        .map(|&n| {
            terms
                .iter()
                .map(|(c, eps)| c * C64::cis(step * n as f64 * eps))
                .sum()
        })
        .collect())
}

/// Received samples and the per-sample noise variance that was added.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock {
    pub samples: Vec<C64>,
    pub noise_variance: f64,
}

/// `σ² = P_ref·10^(−SNR/10)`, with the SNR clamped at [`MAX_SNR_DB`].
pub fn noise_variance(snr_db: f64, reference_power: f64) -> Result<f64> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(format!(
            "SNR {snr_db} dB is not usable"
        )));
    }
    if !(reference_power > 0.0 && reference_power.is_finite()) {
        return Err(Error::InvalidArgument(
            "reference power must be positive".into(),
        ));
    }
    Ok(reference_power * 10f64.powf(-snr_db.min(MAX_SNR_DB) / 10.0))
}

/// Adds circular complex white Gaussian noise at the given average SNR
/// relative to `reference_power`.
pub fn add_noise<R: Rng + ?Sized>(
    clean: &[C64],
    snr_db: f64,
    reference_power: f64,
    rng: &mut R,
) -> Result<ReceivedBlock> {
    let var = noise_variance(snr_db, reference_power)?;
    let samples = clean
        .iter()
        .map(|&x| x + complex_gaussian(rng, var))
        .collect();
    Ok(ReceivedBlock {
        samples,
        noise_variance: var,
    })
}

/// Minimum series length accepted by [`doppler_spread_estimate`].
pub const MIN_SPREAD_SAMPLES: usize = 64;

/// RMS Doppler spread (Hz) of a channel time series sampled every
/// `sample_interval` seconds.
///
/// The mean is removed, the periodogram taken, and the spread measured about
/// the power-weighted mean frequency. A constant series has zero spread.
pub fn doppler_spread_estimate(series: &[C64], sample_interval: f64) -> Result<f64> {
    if series.len() < MIN_SPREAD_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_SPREAD_SAMPLES} samples, got {}",
            series.len()
        )));
    }
    if sample_interval.is_nan() || sample_interval <= 0.0 {
        return Err(Error::InvalidArgument(
            "sample interval must be positive".into(),
        ));
    }
    let n = series.len();
    let mean: C64 = series.iter().sum::<C64>() / n as f64;
    let mut buf: Vec<C64> = series.iter().map(|x| x - mean).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let df = 1.0 / (n as f64 * sample_interval);
    let freq = |i: usize| {
        if i < n.div_ceil(2) {
            i as f64 * df
        } else {
            (i as f64 - n as f64) * df
        }
    };
    let power: Vec<f64> = buf.iter().map(|x| x.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    let peak = power.iter().cloned().fold(0.0, f64::max);
    if total <= 0.0 || peak <= 1e-24 * (n * n) as f64 {
        return Ok(0.0);
    }
    let centre = power
        .iter()
        .enumerate()
        .map(|(i, p)| freq(i) * p)
        .sum::<f64>()
        / total;
    let var = power
        .iter()
        .enumerate()
        .map(|(i, p)| (freq(i) - centre).powi(2) * p)
        .sum::<f64>()
        / total;
    Ok(var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{select_directions, transmit_matrix, transmit_matrix_at};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dp() -> DopplerParams {
        DopplerParams::from_symbol_rate(5.5e9, 100.0, 1e6).unwrap()
    }

    fn bank(m: usize, q: usize, blocks: usize, seed: u64) -> BeamformerBank {
        let g = ArrayGeometry::new(m, 0.45).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BeamformerBank::draw(
            g,
            select_directions(q).unwrap(),
            vec![C64::new(1.0, 0.0); m],
            blocks,
            &mut rng,
        )
        .unwrap()
    }

    fn random_symbols(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
        (0..n).map(|_| complex_gaussian(rng, 1.0)).collect()
    }

    #[test]
    fn aligned_paths_sit_on_beams() {
        let b = bank(16, 1, 1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut power = 0.0;
        let draws = 20_000;
        for _ in 0..draws {
            let p = draw_paths(PropagationMode::Aligned, &mut rng, &b, 1).unwrap();
            assert_eq!(p.len(), 1);
            assert_eq!(p.paths()[0].aod, b.directions()[0]);
            power += p.paths()[0].gain.norm_sqr();
        }
        assert!((power / draws as f64 - 1.0).abs() < 0.03);
    }

    #[test]
    fn continuum_total_power_is_unity() {
        let b = bank(16, 8, 1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 10_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let p = draw_paths(PropagationMode::Continuum, &mut rng, &b, 100).unwrap();
            assert_eq!(p.len(), 100);
            assert!(p.paths().iter().all(|p| p.aod > 0.0 && p.aod < PI));
            acc += p.paths().iter().map(|p| p.gain.norm_sqr()).sum::<f64>();
        }
        assert!((acc / draws as f64 - 1.0).abs() < 0.05);
        assert!(draw_paths(PropagationMode::Continuum, &mut rng, &b, 0).is_err());
    }

    #[test]
    fn uniform_cosine_density_draws() {
        let b = bank(16, 8, 1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = draw_paths_with_density(
            PropagationMode::Continuum,
            AodDensity::UniformCosine,
            &mut rng,
            &b,
            4000,
        )
        .unwrap();
        let mean_cos = p.paths().iter().map(|p| p.aod.cos()).sum::<f64>() / 4000.0;
        assert!(mean_cos.abs() < 0.05);
        let mean_cos_sq = p.paths().iter().map(|p| p.aod.cos().powi(2)).sum::<f64>() / 4000.0;
        // uniform cosine gives E[cos²] = 1/3; uniform angle would give 1/2
        assert!((mean_cos_sq - 1.0 / 3.0).abs() < 0.03);
    }

    #[test]
    fn draws_are_deterministic() {
        let b = bank(16, 4, 1, 1);
        for mode in [PropagationMode::Aligned, PropagationMode::Continuum] {
            let a = draw_paths(mode, &mut ChaCha8Rng::seed_from_u64(9), &b, 12).unwrap();
            let c = draw_paths(mode, &mut ChaCha8Rng::seed_from_u64(9), &b, 12).unwrap();
            assert_eq!(a, c);
        }
    }

    #[test]
    fn ideal_propagation_equals_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let q = 1 + trial % 8;
            let b = bank(32, q, 3, trial as u64);
            let paths = draw_paths(PropagationMode::Ideal, &mut rng, &b, q).unwrap();
            let g = *b.geometry();
            for block in 0..3 {
                let s = random_symbols(&mut rng, 40);
                let start = block * 40;
                let xs: Vec<_> = (0..q)
                    .map(|beam| transmit_matrix_at(&b, block, beam, &s, start, &dp()).unwrap())
                    .collect();
                let r = propagate(&paths, &xs, &g, &dp()).unwrap();
                let h = equivalent_channel_all(&paths, &b, block).unwrap();
                for (x, y) in r.iter().zip(&s) {
                    assert!((x - h * y).norm() <= 1e-12 * (h * y).norm().max(1e-3));
                }
            }
        }
    }

    #[test]
    fn aligned_single_beam_cancels_doppler() {
        let b = bank(24, 1, 1, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let paths = draw_paths(PropagationMode::Aligned, &mut rng, &b, 1).unwrap();
        let s = vec![C64::new(1.0, 0.0); 50];
        let x = transmit_matrix(&b, 0, 0, &s, &dp()).unwrap();
        let r = propagate(&paths, &[x], b.geometry(), &dp()).unwrap();
        let alpha = paths.paths()[0].gain;
        let expect = alpha * b.zeta() * b.weight_sum() * C64::cis(-PI * b.phase(0, 0).unwrap());
        for v in r {
            assert!((v - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn propagate_matches_dense_double_sum() {
        // Brute force over the dense matrices: Σ_p α_p Σ_m Σ_q a_m(θ_p) X_q[m][n] e^{jω T n cos θ_p}.
        let b = bank(5, 3, 1, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let paths = draw_paths(PropagationMode::Continuum, &mut rng, &b, 6).unwrap();
        let s = random_symbols(&mut rng, 9);
        let start = 3;
        let xs: Vec<_> = (0..3)
            .map(|q| transmit_matrix_at(&b, 0, q, &s, start, &dp()).unwrap())
            .collect();
        let r = propagate(&paths, &xs, b.geometry(), &dp()).unwrap();
        for n in 0..9 {
            let mut acc = C64::default();
            for p in paths.paths() {
                for x in &xs {
                    let dense = x.to_dense();
                    for m in 0..5 {
                        let a = C64::cis(2.0 * PI * 0.45 * m as f64 * p.aod.cos());
                        let ramp =
                            C64::cis(dp().omega_d() * 1e-6 * (start + n) as f64 * p.aod.cos());
                        acc += p.gain * a * dense[m][n] * ramp;
                    }
                }
            }
            assert!((acc - r[n]).norm() < 1e-12);
        }
        let resp = channel_response(&paths, &b, 0, &dp(), &[start, start + 4]).unwrap();
        let ones = vec![C64::new(1.0, 0.0); 5];
        let xs1: Vec<_> = (0..3)
            .map(|q| transmit_matrix_at(&b, 0, q, &ones, start, &dp()).unwrap())
            .collect();
        let r1 = propagate(&paths, &xs1, b.geometry(), &dp()).unwrap();
        assert!((resp[0] - r1[0]).norm() < 1e-12);
        assert!((resp[1] - r1[4]).norm() < 1e-12);
    }

    #[test]
    fn propagate_rejects_mismatch() {
        let b = bank(4, 2, 1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let paths = draw_paths(PropagationMode::Aligned, &mut rng, &b, 2).unwrap();
        let x0 = transmit_matrix(&b, 0, 0, &[C64::new(1.0, 0.0); 3], &dp()).unwrap();
        let x1 = transmit_matrix(&b, 0, 1, &[C64::new(1.0, 0.0); 4], &dp()).unwrap();
        assert!(matches!(
            propagate(&paths, &[x0, x1], b.geometry(), &dp()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(propagate(&paths, &[], b.geometry(), &dp()).is_err());
    }

    #[test]
    fn oracle_examples() {
        let g = ArrayGeometry::new(16, 0.45).unwrap();
        let b = BeamformerBank::new(
            g,
            vec![PI / 2.0],
            vec![C64::new(1.0, 0.0); 16],
            vec![vec![0.0]],
        )
        .unwrap();
        let alpha = C64::new(0.3, -0.9);
        let paths = PathSet::new(
            vec![Path {
                aod: PI / 2.0,
                gain: alpha,
            }],
            PropagationMode::Aligned,
        )
        .unwrap();
        let h = equivalent_channel_all(&paths, &b, 0).unwrap();
        assert!((h - alpha * b.zeta() * 16.0).norm() < 1e-14);

        let two = bank(16, 2, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let paths = draw_paths(PropagationMode::Aligned, &mut rng, &two, 2).unwrap();
        let scale = two.zeta() * two.weight_sum();
        for q in 0..2 {
            let h = equivalent_channel_oracle(&paths, &two, 0, &[q]).unwrap();
            let expect = scale * paths.paths()[q].gain * C64::cis(-PI * two.phase(0, q).unwrap());
            assert!((h - expect).norm() < 1e-14);
        }
        let h0 = equivalent_channel_all(&paths, &two, 0).unwrap();
        let h1 = equivalent_channel_all(&paths, &two, 1).unwrap();
        assert!((h0 - h1).norm() > 1e-6);

        let cont = draw_paths(PropagationMode::Continuum, &mut rng, &two, 5).unwrap();
        assert!(matches!(
            equivalent_channel_all(&cont, &two, 0),
            Err(Error::UnsupportedMode(_))
        ));
    }

    #[test]
    fn aligned_channel_energy_matches_analytic() {
        let b = bank(64, 8, 1, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let subsets: [Vec<usize>; 3] = [(0..8).collect(), vec![0, 2, 4, 6], vec![1, 3, 5, 7]];
        for subset in subsets {
            let draws = 20_000;
            let mut acc = 0.0;
            for _ in 0..draws {
                let paths = draw_paths(PropagationMode::Aligned, &mut rng, &b, 8).unwrap();
                let phases = crate::array::draw_phase_schedule(1, 8, &mut rng);
                let bk = b.with_phases(phases).unwrap();
                acc += equivalent_channel_oracle(&paths, &bk, 0, &subset)
                    .unwrap()
                    .norm_sqr();
            }
            let analytic = mean_channel_power(&b, subset.len());
            assert!((acc / draws as f64 / analytic - 1.0).abs() < 0.03);
        }
        // ζ²(Σw)²/Q·|S| with uniform weights is M·|S|/Q²
        assert!((mean_channel_power(&b, 8) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn noise_examples() {
        let clean: Vec<C64> = (0..32).map(|i| C64::new(i as f64, -1.0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rx = add_noise(&clean, f64::INFINITY, 1.0, &mut rng).unwrap();
        for (a, b) in rx.samples.iter().zip(&clean) {
            assert!((a - b).norm() < 1e-12);
        }
        let zeros = vec![C64::default(); 1_000_000];
        let rx = add_noise(&zeros, 0.0, 1.0, &mut rng).unwrap();
        assert_eq!(rx.noise_variance, 1.0);
        let var = rx.samples.iter().map(|x| x.norm_sqr()).sum::<f64>() / zeros.len() as f64;
        assert!((var - 1.0).abs() < 0.01);

        let a = add_noise(&clean, 7.0, 2.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = add_noise(&clean, 7.0, 2.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert!(add_noise(&clean, f64::NAN, 1.0, &mut rng).is_err());
        assert!(add_noise(&clean, 10.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn spread_examples() {
        let ts = 1e-4;
        let n = 1000;
        let constant = vec![C64::new(0.7, 0.2); n];
        assert_eq!(doppler_spread_estimate(&constant, ts).unwrap(), 0.0);

        let tone = |f: f64| -> Vec<C64> {
            (0..n)
                .map(|i| C64::cis(2.0 * PI * f * ts * i as f64))
                .collect()
        };
        let single = doppler_spread_estimate(&tone(500.0), ts).unwrap();
        assert!(single < 1e-6, "{single}");

        let pair: Vec<C64> = tone(500.0)
            .iter()
            .zip(tone(-500.0))
            .map(|(a, b)| a + b)
            .collect();
        let spread = doppler_spread_estimate(&pair, ts).unwrap();
        assert!((spread - 500.0).abs() < 1e-6, "{spread}");

        assert!(doppler_spread_estimate(&constant[..63], ts).is_err());
    }
}
