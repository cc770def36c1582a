//! Base-station processing: pilot-based least-squares channel estimates and
//! the per-scheme detectors.

use std::fmt;
use std::str::FromStr;

use crate::coding::{Constellation, PilotBlock, SsdCode, MAX_SSD_K};
use crate::{Error, Result, C64};

/// Where the detector's channel knowledge comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CsiMode {
    /// Least-squares estimates from each segment's own pilot.
    #[default]
    Estimated,
    /// The large-array equivalent channel, known exactly.
    Perfect,
}

impl CsiMode {
    pub fn name(self) -> &'static str {
        match self {
            CsiMode::Estimated => "estimated",
            CsiMode::Perfect => "perfect",
        }
    }
}

impl fmt::Display for CsiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CsiMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "estimated" => Ok(CsiMode::Estimated),
            "perfect" => Ok(CsiMode::Perfect),
            other => Err(format!(
                "unknown CSI mode `{other}` (expected estimated or perfect)"
            )),
        }
    }
}

/// `ĥ = pᴴr / pᴴp`.
pub fn ls_channel_estimate(r_pilot: &[C64], pilot: &PilotBlock) -> Result<C64> {
    let p = pilot.symbols();
    if r_pilot.len() != p.len() {
        return Err(Error::DimensionMismatch {
            what: "pilot segment",
            expected: p.len(),
            actual: r_pilot.len(),
        });
    }
    let energy: f64 = p.iter().map(|x| x.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(Error::InvalidArgument("pilot has zero energy".into()));
    }
    let corr: C64 = p.iter().zip(r_pilot).map(|(p, r)| p.conj() * r).sum();
    Ok(corr / energy)
}

/// Exhaustive ML detector for one SSD code.
///
/// Candidates are enumerated in lexicographic order of their constellation
/// indices with the first symbol most significant; on equal metric the lowest
/// candidate index wins.
#[derive(Debug, Clone)]
pub struct MlDetector {
    k: usize,
    num_points: usize,
    /// `Θ·d̃` for every candidate, flattened `candidates × K`.
    codebook: Vec<C64>,
}

impl MlDetector {
    pub fn new(code: &SsdCode, constellation: &Constellation) -> Result<Self> {
        let k = code.k();
        if k > MAX_SSD_K {
            return Err(Error::InvalidArgument(format!(
                "K = {k} exceeds {MAX_SSD_K}"
            )));
        }
        let num_points = constellation.len();
        let candidates = num_points.pow(k as u32);
        let mut codebook = Vec::with_capacity(candidates * k);
        let mut d = vec![C64::default(); k];
        for c in 0..candidates {
            for (pos, slot) in d.iter_mut().enumerate() {
                *slot = constellation.point(candidate_digit(c, pos, k, num_points));
            }
            codebook.extend(code.apply(&d));
        }
        Ok(Self {
            k,
            num_points,
            codebook,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_candidates(&self) -> usize {
        self.codebook.len() / self.k
    }

    /// Codebook pre-multiplied by `diag(ĥ)`, reusable across codewords that
    /// share the same channel.
    pub fn scaled_codebook(&self, h: &[C64]) -> Result<Vec<C64>> {
        if h.len() != self.k {
            return Err(Error::DimensionMismatch {
                what: "channel estimates",
                expected: self.k,
                actual: h.len(),
            });
        }
        Ok(self
            .codebook
            .chunks(self.k)
            .flat_map(|row| row.iter().zip(h).map(|(x, h)| x * h))
            .collect())
    }

    /// Best candidate index for `y` against a codebook from
    /// [`scaled_codebook`](Self::scaled_codebook).
    pub fn search(&self, y: &[C64], scaled: &[C64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, row) in scaled.chunks(self.k).enumerate() {
            let mut dist = 0.0;
            let mut pruned = false;
            for (y, x) in y.iter().zip(row) {
                dist += (y - x).norm_sqr();
                if dist >= best_d {
                    pruned = true;
                    break;
                }
            }
            if !pruned {
                best = c;
                best_d = dist;
            }
        }
        best
    }

    /// Constellation indices of candidate `c`.
    pub fn candidate_symbols(&self, c: usize) -> Vec<usize> {
        (0..self.k)
            .map(|pos| candidate_digit(c, pos, self.k, self.num_points))
            .collect()
    }

    pub fn detect(&self, y: &[C64], h: &[C64]) -> Result<Vec<usize>> {
        if y.len() != self.k {
            return Err(Error::DimensionMismatch {
                what: "received SSD vector",
                expected: self.k,
                actual: y.len(),
            });
        }
        let scaled = self.scaled_codebook(h)?;
        Ok(self.candidate_symbols(self.search(y, &scaled)))
    }
}

fn candidate_digit(c: usize, pos: usize, k: usize, base: usize) -> usize {
    (c / base.pow((k - 1 - pos) as u32)) % base
}

/// `argmin_d̃ ‖y − diag(ĥ)·Θ·d̃‖` over all `|C|^K` candidates.
pub fn ml_detect_ssd(
    y: &[C64],
    h_hat: &[C64],
    code: &SsdCode,
    constellation: &Constellation,
) -> Result<Vec<usize>> {
    MlDetector::new(code, constellation)?.detect(y, h_hat)
}

/// Alamouti combining of the two data segments `r_a = h₁x₁ + h₂x₂` and
/// `r_b = −h₁x₂* + h₂x₁*`. Returns soft estimates of `x₁` and `x₂`.
pub fn alamouti_combine(
    r_a: &[C64],
    r_b: &[C64],
    h1: C64,
    h2: C64,
) -> Result<(Vec<C64>, Vec<C64>)> {
    if r_a.len() != r_b.len() {
        return Err(Error::DimensionMismatch {
            what: "Alamouti segment",
            expected: r_a.len(),
            actual: r_b.len(),
        });
    }
    let gain = h1.norm_sqr() + h2.norm_sqr();
    if gain == 0.0 {
        return Err(Error::DetectionInfeasible(
            "both Alamouti channels are zero".into(),
        ));
    }
    let x1 = r_a
        .iter()
        .zip(r_b)
        .map(|(a, b)| (h1.conj() * a + h2 * b.conj()) / gain)
        .collect();
    let x2 = r_a
        .iter()
        .zip(r_b)
        .map(|(a, b)| (h2.conj() * a - h1 * b.conj()) / gain)
        .collect();
    Ok((x1, x2))
}

/// One-tap equalizer `r/ĥ`.
pub fn nodiv_equalize(r_data: &[C64], h_hat: C64) -> Result<Vec<C64>> {
    if h_hat == C64::default() {
        return Err(Error::DetectionInfeasible(
            "channel estimate is zero".into(),
        ));
    }
    Ok(r_data.iter().map(|r| r / h_hat).collect())
}

/// Number of positions where `detected` differs from `truth`, and the total.
pub fn count_symbol_errors<T: PartialEq>(detected: &[T], truth: &[T]) -> Result<(usize, usize)> {
    if detected.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            what: "detected symbols",
            expected: truth.len(),
            actual: detected.len(),
        });
    }
    let errors = detected.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok((errors, truth.len()))
}

/// One estimate per pilot segment: per block for block frames, per stream for
/// Alamouti.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub values: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Hard decisions as constellation indices, in information order.
    pub symbols: Vec<usize>,
    pub bits: Vec<bool>,
    pub estimate: ChannelEstimate,
}

impl DetectionResult {
    fn new(symbols: Vec<usize>, constellation: &Constellation, estimate: ChannelEstimate) -> Self {
        let bits = constellation.bits_from_indices(&symbols);
        Self {
            symbols,
            bits,
            estimate,
        }
    }

    pub fn symbol_errors(&self, truth: &[usize]) -> Result<(usize, usize)> {
        count_symbol_errors(&self.symbols, truth)
    }
}

/// Geometry of a received block frame: `blocks` segments of `pilot_len`
/// pilots followed by `data_len` data symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub blocks: usize,
    pub pilot_len: usize,
    pub data_len: usize,
}

impl BlockLayout {
    pub fn block_len(&self) -> usize {
        self.pilot_len + self.data_len
    }

    pub fn frame_len(&self) -> usize {
        self.blocks * self.block_len()
    }
}

fn block_estimates(
    samples: &[C64],
    layout: BlockLayout,
    pilot: &PilotBlock,
    perfect: Option<&[C64]>,
) -> Result<Vec<C64>> {
    if samples.len() != layout.frame_len() {
        return Err(Error::DimensionMismatch {
            what: "received frame",
            expected: layout.frame_len(),
            actual: samples.len(),
        });
    }
    match perfect {
        Some(h) if h.len() != layout.blocks => Err(Error::DimensionMismatch {
            what: "perfect CSI values",
            expected: layout.blocks,
            actual: h.len(),
        }),
        Some(h) => Ok(h.to_vec()),
        None => samples
            .chunks(layout.block_len())
            .map(|b| ls_channel_estimate(&b[..layout.pilot_len], pilot))
            .collect(),
    }
}

/// Detects an SSD frame: stacks `y(i) = [r_1(N_p+i), …, r_K(N_p+i)]` and runs
/// ML detection per codeword. `perfect` replaces the pilot estimates.
pub fn receive_ssd_frame(
    samples: &[C64],
    layout: BlockLayout,
    pilot: &PilotBlock,
    detector: &MlDetector,
    constellation: &Constellation,
    perfect: Option<&[C64]>,
) -> Result<DetectionResult> {
    if layout.blocks != detector.k() {
        return Err(Error::DimensionMismatch {
            what: "SSD blocks",
            expected: detector.k(),
            actual: layout.blocks,
        });
    }
    let h = block_estimates(samples, layout, pilot, perfect)?;
    let scaled = detector.scaled_codebook(&h)?;
    let bl = layout.block_len();
    let mut y = vec![C64::default(); layout.blocks];
    let mut symbols = Vec::with_capacity(layout.blocks * layout.data_len);
    for i in 0..layout.data_len {
        for (k, slot) in y.iter_mut().enumerate() {
            *slot = samples[k * bl + layout.pilot_len + i];
        }
        let c = detector.search(&y, &scaled);
        symbols.extend(detector.candidate_symbols(c));
    }
    Ok(DetectionResult::new(
        symbols,
        constellation,
        ChannelEstimate { values: h },
    ))
}

/// Detects a conventional frame with a one-tap equalizer per block.
pub fn receive_nodiv_frame(
    samples: &[C64],
    layout: BlockLayout,
    pilot: &PilotBlock,
    constellation: &Constellation,
    perfect: Option<&[C64]>,
) -> Result<DetectionResult> {
    let h = block_estimates(samples, layout, pilot, perfect)?;
    let bl = layout.block_len();
    let mut per_block = Vec::with_capacity(layout.blocks);
    for (k, &hk) in h.iter().enumerate() {
        let data = &samples[k * bl + layout.pilot_len..(k + 1) * bl];
        per_block.push(nodiv_equalize(data, hk)?);
    }
    // information order: codeword i occupies position i of every block
    let mut symbols = Vec::with_capacity(layout.blocks * layout.data_len);
    for i in 0..layout.data_len {
        for block in &per_block {
            symbols.push(constellation.nearest(block[i]));
        }
    }
    Ok(DetectionResult::new(
        symbols,
        constellation,
        ChannelEstimate { values: h },
    ))
}

/// Detects an Alamouti frame `[p|0; 0|p; x₁|x₂; −x₂*|x₁*]` of total length
/// `2·N_p + 2·half_len`.
pub fn receive_alamouti_frame(
    samples: &[C64],
    pilot: &PilotBlock,
    half_len: usize,
    constellation: &Constellation,
    perfect: Option<(C64, C64)>,
) -> Result<DetectionResult> {
    let np = pilot.len();
    let expected = 2 * np + 2 * half_len;
    if samples.len() != expected {
        return Err(Error::DimensionMismatch {
            what: "received Alamouti frame",
            expected,
            actual: samples.len(),
        });
    }
    let (h1, h2) = match perfect {
        Some(h) => h,
        None => (
            ls_channel_estimate(&samples[..np], pilot)?,
            ls_channel_estimate(&samples[np..2 * np], pilot)?,
        ),
    };
    let r_a = &samples[2 * np..2 * np + half_len];
    let r_b = &samples[2 * np + half_len..];
    let (x1, x2) = alamouti_combine(r_a, r_b, h1, h2)?;
    let symbols = x1
        .iter()
        .chain(&x2)
        .map(|&z| constellation.nearest(z))
        .collect();
    Ok(DetectionResult::new(
        symbols,
        constellation,
        ChannelEstimate {
            values: vec![h1, h2],
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_gaussian;
    use crate::coding::{pilot_sequence, ssd_rotation_matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn ls_examples() {
        let p = pilot_sequence(16).unwrap();
        let r: Vec<C64> = p.symbols().iter().map(|x| x * c(0.0, 3.0)).collect();
        assert!((ls_channel_estimate(&r, &p).unwrap() - c(0.0, 3.0)).norm() < 1e-14);
        let one = PilotBlock::new(vec![c(0.6, 0.8)]).unwrap();
        let z = c(1.5, -0.2);
        assert!((ls_channel_estimate(&[z], &one).unwrap() - z / c(0.6, 0.8)).norm() < 1e-15);
        assert!(ls_channel_estimate(&r[..3], &p).is_err());
        let dead = PilotBlock::new(vec![C64::default(); 2]).unwrap();
        assert!(ls_channel_estimate(&[c(1.0, 0.0); 2], &dead).is_err());
    }

    #[test]
    fn ls_error_variance_is_sigma2_over_np() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sigma2 = 0.01; // 20 dB relative to unit channel power
        for np in [8, 16, 32] {
            let p = pilot_sequence(np).unwrap();
            let trials = 10_000;
            let mut acc = 0.0;
            for _ in 0..trials {
                let h = complex_gaussian(&mut rng, 1.0);
                let r: Vec<C64> = p
                    .symbols()
                    .iter()
                    .map(|x| h * x + complex_gaussian(&mut rng, sigma2))
                    .collect();
                acc += (ls_channel_estimate(&r, &p).unwrap() - h).norm_sqr();
            }
            let ratio = acc / trials as f64 / (sigma2 / np as f64);
            assert!((ratio - 1.0).abs() < 0.1, "N_p={np}: {ratio}");
        }
    }

    /// Independent enumeration: nested digits, Θ·d evaluated on the fly.
    fn brute_force(y: &[C64], h: &[C64], code: &SsdCode, q: &Constellation) -> Vec<usize> {
        let k = code.k();
        let total = q.len().pow(k as u32);
        let mut best = (f64::INFINITY, vec![]);
        for c in 0..total {
            let mut digits = vec![0; k];
            let mut rest = c;
            for pos in (0..k).rev() {
                digits[pos] = rest % q.len();
                rest /= q.len();
            }
            let mut metric = 0.0;
            for row in 0..k {
                let mut x = C64::default();
                for col in 0..k {
                    x += code.matrix()[row][col] * q.point(digits[col]);
                }
                metric += (y[row] - h[row] * x).norm_sqr();
            }
            if metric < best.0 {
                best = (metric, digits);
            }
        }
        best.1
    }

    #[test]
    fn ml_noise_free_recovers_data() {
        let q = Constellation::qpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for k in 1..=4 {
            let code = ssd_rotation_matrix(k).unwrap();
            for _ in 0..50 {
                let d: Vec<usize> = (0..k).map(|_| rng.random_range(0..4)).collect();
                let h: Vec<C64> = (0..k).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
                let x = code.apply(&d.iter().map(|&i| q.point(i)).collect::<Vec<_>>());
                let y: Vec<C64> = x.iter().zip(&h).map(|(x, h)| x * h).collect();
                assert_eq!(ml_detect_ssd(&y, &h, &code, &q).unwrap(), d);
            }
        }
    }

    #[test]
    fn ml_k1_is_scalar_slicing() {
        let q = Constellation::qpsk();
        let code = ssd_rotation_matrix(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let h = complex_gaussian(&mut rng, 1.0);
            let y = complex_gaussian(&mut rng, 1.0);
            assert_eq!(
                ml_detect_ssd(&[y], &[h], &code, &q).unwrap(),
                vec![q.nearest(y / h)]
            );
        }
    }

    #[test]
    fn ml_matches_brute_force_k2() {
        let q = Constellation::qpsk();
        let code = ssd_rotation_matrix(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..300 {
            let h: Vec<C64> = (0..2).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            let y: Vec<C64> = (0..2).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            assert_eq!(
                ml_detect_ssd(&y, &h, &code, &q).unwrap(),
                brute_force(&y, &h, &code, &q)
            );
        }
    }

    #[test]
    fn ml_ties_go_to_lowest_candidate() {
        let q = Constellation::qpsk();
        let code = ssd_rotation_matrix(2).unwrap();
        // zero channel: every candidate has the same metric
        let det = MlDetector::new(&code, &q).unwrap();
        assert_eq!(
            det.detect(&[c(1.0, 0.0); 2], &[C64::default(); 2]).unwrap(),
            vec![0, 0]
        );
        assert_eq!(det.num_candidates(), 16);
        assert!(det.detect(&[c(1.0, 0.0)], &[c(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn alamouti_examples() {
        let (x1, x2) = (
            vec![c(0.3, -0.7), c(1.0, 1.0)],
            vec![c(-0.5, 0.1), c(0.0, -1.0)],
        );
        let one = c(1.0, 0.0);
        let zero = C64::default();
        let neg_conj: Vec<C64> = x2.iter().map(|x| -x.conj()).collect();
        let (a, b) = alamouti_combine(&x1, &neg_conj, one, zero).unwrap();
        assert_eq!((a, b), (x1.clone(), x2.clone()));

        // h1 = 0, h2 = 1: r_a = x2, r_b = x1*
        let conj1: Vec<C64> = x1.iter().map(|x| x.conj()).collect();
        let (a, b) = alamouti_combine(&x2, &conj1, zero, one).unwrap();
        for i in 0..2 {
            assert!((a[i] - x1[i]).norm() < 1e-15 && (b[i] - x2[i]).norm() < 1e-15);
        }
        assert!(matches!(
            alamouti_combine(&x1, &x2, zero, zero),
            Err(Error::DetectionInfeasible(_))
        ));
    }

    #[test]
    fn alamouti_noise_free_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..500 {
            let h1 = complex_gaussian(&mut rng, 1.0);
            let h2 = complex_gaussian(&mut rng, 1.0);
            let x1 = complex_gaussian(&mut rng, 1.0);
            let x2 = complex_gaussian(&mut rng, 1.0);
            let ra = h1 * x1 + h2 * x2;
            let rb = -h1 * x2.conj() + h2 * x1.conj();
            let (a, b) = alamouti_combine(&[ra], &[rb], h1, h2).unwrap();
            assert!((a[0] - x1).norm() < 1e-12);
            assert!((b[0] - x2).norm() < 1e-12);
        }
    }

    #[test]
    fn equalizer_examples() {
        let h = c(0.4, -1.1);
        let x = vec![c(0.7, 0.7), c(-0.7, 0.7)];
        let r: Vec<C64> = x.iter().map(|x| x * h).collect();
        let out = nodiv_equalize(&r, h).unwrap();
        assert!((out[0] - x[0]).norm() < 1e-15);
        let half = nodiv_equalize(&r, h * 2.0).unwrap();
        let q = Constellation::qpsk();
        for (z, x) in half.iter().zip(&x) {
            assert!((z - x / 2.0).norm() < 1e-15);
            assert_eq!(q.point(q.nearest(*z)), q.point(q.nearest(*x)));
        }
        assert!(nodiv_equalize(&[], h).unwrap().is_empty());
        assert!(nodiv_equalize(&r, C64::default()).is_err());
    }

    #[test]
    fn error_counting() {
        let a: Vec<usize> = (0..128).map(|i| i % 4).collect();
        assert_eq!(count_symbol_errors(&a, &a).unwrap(), (0, 128));
        let wrong: Vec<usize> = a.iter().map(|x| (x + 1) % 4).collect();
        assert_eq!(count_symbol_errors(&wrong, &a).unwrap(), (128, 128));
        let mut one = a.clone();
        one[77] = (one[77] + 2) % 4;
        assert_eq!(count_symbol_errors(&one, &a).unwrap(), (1, 128));
        assert!(count_symbol_errors(&a[1..], &a).is_err());
    }
}
