//! Constellation mapping, the signal-space-diversity rotation code, the
//! Alamouti stream pair, and frame assembly for the three transmit schemes.
//!
//! Bits map to QPSK with Gray labelling: the first bit of each pair selects the
//! sign of the in-phase part and the second the sign of the quadrature part,
//! `0 → +` and `1 → −`, so `00 → (1+j)/√2`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::{Error, Result, C64};

/// Largest SSD block size; ML detection enumerates `|C|^K` candidates.
pub const MAX_SSD_K: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<C64>,
    bits_per_symbol: usize,
}

impl Constellation {
    /// Unit-energy Gray-labelled QPSK. Point index `i` carries bits
    /// `(i >> 1, i & 1)`.
    pub fn qpsk() -> Self {
        let points = (0..4)
            .map(|i| {
                let re = if i & 2 == 0 { 1.0 } else { -1.0 };
                let im = if i & 1 == 0 { 1.0 } else { -1.0 };
                C64::new(re, im) * FRAC_1_SQRT_2
            })
            .collect();
        Self {
            points,
            bits_per_symbol: 2,
        }
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> C64 {
        self.points[index]
    }

    /// Groups bits MSB-first into symbol indices.
    pub fn indices_from_bits(&self, bits: &[bool]) -> Result<Vec<usize>> {
        if !bits.len().is_multiple_of(self.bits_per_symbol) {
            return Err(Error::InvalidArgument(format!(
                "bit count {} is not a multiple of {}",
                bits.len(),
                self.bits_per_symbol
            )));
        }
        Ok(bits
            .chunks(self.bits_per_symbol)
            .map(|c| c.iter().fold(0, |acc, &b| (acc << 1) | b as usize))
            .collect())
    }

    pub fn bits_from_indices(&self, indices: &[usize]) -> Vec<bool> {
        let k = self.bits_per_symbol;
        indices
            .iter()
            .flat_map(|&i| (0..k).rev().map(move |s| (i >> s) & 1 == 1))
            .collect()
    }

    /// Index of the nearest point; ties go to the lower index.
    pub fn nearest(&self, z: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}

/// Gray-mapped unit-energy QPSK symbols for an even number of bits.
pub fn qpsk_map(bits: &[bool]) -> Result<Vec<C64>> {
    let c = Constellation::qpsk();
    Ok(c.indices_from_bits(bits)?
        .into_iter()
        .map(|i| c.point(i))
        .collect())
}

/// Nearest-point decisions: the decoded bits and the hard symbols.
pub fn qpsk_slice(soft: &[C64]) -> (Vec<bool>, Vec<C64>) {
    let c = Constellation::qpsk();
    let idx: Vec<usize> = soft.iter().map(|&z| c.nearest(z)).collect();
    let hard = idx.iter().map(|&i| c.point(i)).collect();
    (c.bits_from_indices(&idx), hard)
}

/// Rotation code `Θ`: the leading `K×K` block of
/// `F^H_{K̃}·diag(1, e^{jπ/(2K̃)}, …, e^{jπ(K̃−1)/(2K̃)})` with `K̃` the next
/// power of two. Unitary when `K` is itself a power of two.
#[derive(Debug, Clone, PartialEq)]
pub struct SsdCode {
    k: usize,
    k_tilde: usize,
    theta: Vec<Vec<C64>>,
}

impl SsdCode {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn k_tilde(&self) -> usize {
        self.k_tilde
    }

    /// Row-major `K×K` matrix.
    pub fn matrix(&self) -> &[Vec<C64>] {
        &self.theta
    }

    pub fn apply(&self, d: &[C64]) -> Vec<C64> {
        self.theta
            .iter()
            .map(|row| row.iter().zip(d).map(|(t, x)| t * x).sum())
            .collect()
    }
}

pub fn ssd_rotation_matrix(k: usize) -> Result<SsdCode> {
    if !(1..=MAX_SSD_K).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "SSD block size K = {k} outside 1..={MAX_SSD_K}"
        )));
    }
    let k_tilde = k.next_power_of_two();
    let kt = k_tilde as f64;
    let scale = 1.0 / kt.sqrt();
    let theta = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| {
                    let dft = 2.0 * PI * (a * b) as f64 / kt;
                    let rot = PI * b as f64 / (2.0 * kt);
                    C64::cis(dft + rot) * scale
                })
                .collect()
        })
        .collect();
    Ok(SsdCode { k, k_tilde, theta })
}

/// `x(i) = Θ·d(i)`.
pub fn ssd_encode(code: &SsdCode, d_block: &[C64]) -> Result<Vec<C64>> {
    if d_block.len() != code.k {
        return Err(Error::DimensionMismatch {
            what: "SSD input block",
            expected: code.k,
            actual: d_block.len(),
        });
    }
    Ok(code.apply(d_block))
}

/// Known constant-modulus training sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBlock {
    symbols: Vec<C64>,
}

impl PilotBlock {
    pub fn new(symbols: Vec<C64>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidArgument("pilot block is empty".into()));
        }
        Ok(Self { symbols })
    }

    pub fn symbols(&self) -> &[C64] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Root-1 Zadoff-Chu sequence: `exp(−jπ·n(n+1)/N_p)` for odd `N_p` and
/// `exp(−jπ·n²/N_p)` for even `N_p`.
pub fn pilot_sequence(len: usize) -> Result<PilotBlock> {
    if len == 0 {
        return Err(Error::InvalidArgument(
            "pilot length must be at least 1".into(),
        ));
    }
    let nf = len as f64;
    let symbols = (0..len)
        .map(|n| {
            let n = n as f64;
            let e = if len % 2 == 1 { n * (n + 1.0) } else { n * n };
            C64::cis(-PI * e / nf)
        })
        .collect();
    PilotBlock::new(symbols)
}

/// Frame made of `K` blocks `s_k = [p; x_k]`, as used by the SSD and the
/// conventional scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFrame {
    /// Transmitted blocks, each `pilot_len + data_len` long.
    pub blocks: Vec<Vec<C64>>,
    /// Constellation indices of the information symbols `d`, in order.
    pub symbols: Vec<usize>,
    pub pilot_len: usize,
    /// Data symbols per block, `J`.
    pub data_len: usize,
}

impl BlockFrame {
    pub fn block_len(&self) -> usize {
        self.pilot_len + self.data_len
    }

    /// The data part `x_k` of block `k`.
    pub fn data(&self, k: usize) -> &[C64] {
        &self.blocks[k][self.pilot_len..]
    }
}

fn check_bits(bits: &[bool], expected: usize) -> Result<()> {
    if bits.len() != expected {
        return Err(Error::DimensionMismatch {
            what: "frame bit count",
            expected,
            actual: bits.len(),
        });
    }
    Ok(())
}

fn assemble_blocks(pilot: &PilotBlock, data: Vec<Vec<C64>>) -> Vec<Vec<C64>> {
    data.into_iter()
        .map(|x| pilot.symbols.iter().copied().chain(x).collect())
        .collect()
}

/// SSD frame: `d` is cut into `J` codewords `d(i)` of length `K`, each is
/// rotated by `Θ`, and block `k` carries `x_k = [x_k(1), …, x_k(J)]`.
pub fn build_ssd_frame(
    bits: &[bool],
    code: &SsdCode,
    data_len: usize,
    pilot: &PilotBlock,
    constellation: &Constellation,
) -> Result<BlockFrame> {
    let k = code.k;
    check_bits(bits, constellation.bits_per_symbol * k * data_len)?;
    let symbols = constellation.indices_from_bits(bits)?;
    let mut data = vec![Vec::with_capacity(data_len); k];
    for codeword in symbols.chunks(k) {
        let d: Vec<C64> = codeword.iter().map(|&i| constellation.point(i)).collect();
        for (block, x) in data.iter_mut().zip(code.apply(&d)) {
            block.push(x);
        }
    }
    Ok(BlockFrame {
        blocks: assemble_blocks(pilot, data),
        symbols,
        pilot_len: pilot.len(),
        data_len,
    })
}

/// Conventional frame with the SSD layout: codeword `i` still spans the `K`
/// blocks, but without rotation, so `x_k(i) = d(i)_k`.
pub fn build_nodiv_frame(
    bits: &[bool],
    k: usize,
    data_len: usize,
    pilot: &PilotBlock,
    constellation: &Constellation,
) -> Result<BlockFrame> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one block".into()));
    }
    check_bits(bits, constellation.bits_per_symbol * k * data_len)?;
    let symbols = constellation.indices_from_bits(bits)?;
    let mut data = vec![Vec::with_capacity(data_len); k];
    for codeword in symbols.chunks(k) {
        for (block, &i) in data.iter_mut().zip(codeword) {
            block.push(constellation.point(i));
        }
    }
    Ok(BlockFrame {
        blocks: assemble_blocks(pilot, data),
        symbols,
        pilot_len: pilot.len(),
        data_len,
    })
}

/// Orthogonal space-time block code spread over beam groups.
///
/// Implementors map a run of data symbols onto one time segment per stream.
/// [`Alamouti`] is the two-stream case; larger codes would add further
/// streams and beam groups.
pub trait OrthogonalStbc {
    fn num_streams(&self) -> usize;

    /// Encodes `data` into `num_streams()` equally long time segments.
    fn encode(&self, data: &[C64]) -> Result<Vec<Vec<C64>>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Alamouti;

impl OrthogonalStbc for Alamouti {
    fn num_streams(&self) -> usize {
        2
    }

    /// `d = [x₁; x₂]` becomes `s₁ = [x₁; −x₂*]` and `s₂ = [x₂; x₁*]`.
    fn encode(&self, data: &[C64]) -> Result<Vec<Vec<C64>>> {
        if !data.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "Alamouti needs an even symbol count, got {}",
                data.len()
            )));
        }
        let (x1, x2) = data.split_at(data.len() / 2);
        let s1 = x1
            .iter()
            .copied()
            .chain(x2.iter().map(|x| -x.conj()))
            .collect();
        let s2 = x2
            .iter()
            .copied()
            .chain(x1.iter().map(|x| x.conj()))
            .collect();
        Ok(vec![s1, s2])
    }
}

/// Per-symbol Alamouti code matrix: rows are time slots, columns streams.
pub fn alamouti_code_matrix(a: C64, b: C64) -> [[C64; 2]; 2] {
    [[a, b], [-b.conj(), a.conj()]]
}

/// Alamouti frame `s₁ = [p; 0; x₁; −x₂*]`, `s₂ = [0; p; x₂; x₁*]` with
/// time-division pilots.
#[derive(Debug, Clone, PartialEq)]
pub struct AlamoutiFrame {
    pub stream1: Vec<C64>,
    pub stream2: Vec<C64>,
    pub symbols: Vec<usize>,
    pub pilot_len: usize,
    /// `N/2`, the length of each of `x₁` and `x₂`.
    pub half_len: usize,
}

impl AlamoutiFrame {
    pub fn len(&self) -> usize {
        self.stream1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stream1.is_empty()
    }

    /// Frame-time index where the data segments begin.
    pub fn data_start(&self) -> usize {
        2 * self.pilot_len
    }
}

pub fn build_alamouti_frame(
    bits: &[bool],
    pilot: &PilotBlock,
    constellation: &Constellation,
) -> Result<AlamoutiFrame> {
    let symbols = constellation.indices_from_bits(bits)?;
    if symbols.is_empty() || symbols.len() % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "Alamouti frame needs an even, non-zero symbol count, got {}",
            symbols.len()
        )));
    }
    let d: Vec<C64> = symbols.iter().map(|&i| constellation.point(i)).collect();
    let mut streams = Alamouti.encode(&d)?.into_iter();
    let (data1, data2) = (streams.next().unwrap(), streams.next().unwrap());
    let np = pilot.len();
    let silence = vec![C64::default(); np];
    let stream1 = pilot
        .symbols
        .iter()
        .chain(&silence)
        .chain(&data1)
        .copied()
        .collect();
    let stream2 = silence
        .iter()
        .chain(&pilot.symbols)
        .chain(&data2)
        .copied()
        .collect();
    Ok(AlamoutiFrame {
        stream1,
        stream2,
        half_len: symbols.len() / 2,
        symbols,
        pilot_len: np,
    })
}

/// 0-based positions of the 1st, 3rd, … beams (`odd`) and 2nd, 4th, … beams
/// (`even`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeamSplit {
    pub odd: Vec<usize>,
    pub even: Vec<usize>,
}

pub fn beamformer_assignment(num_beams: usize) -> Result<BeamSplit> {
    if num_beams < 2 {
        return Err(Error::InvalidArgument(format!(
            "Alamouti needs at least two beams, got {num_beams}"
        )));
    }
    Ok(BeamSplit {
        odd: (0..num_beams).step_by(2).collect(),
        even: (1..num_beams).step_by(2).collect(),
    })
}
