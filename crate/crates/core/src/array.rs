//! Array-domain signal construction: steering vectors, matched-filter
//! beamformers with random phases, antenna weighting, Doppler
//! pre-compensation ramps and per-beam transmit matrices.
//!
//! Angles are angles of departure measured from the array axis, so broadside
//! is `π/2` and a path leaving at `θ` carries a Doppler factor of `cos θ`.

use std::f64::consts::PI;

use rand::Rng;

use crate::{Error, Result, C64};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Uniform linear array: element count and spacing in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    num_antennas: usize,
    spacing: f64,
}

impl ArrayGeometry {
    pub fn new(num_antennas: usize, spacing: f64) -> Result<Self> {
        if num_antennas == 0 {
            return Err(Error::InvalidArgument(
                "array needs at least one antenna".into(),
            ));
        }
        if !(spacing > 0.0 && spacing <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "normalized spacing {spacing} outside (0, 1]"
            )));
        }
        Ok(Self {
            num_antennas,
            spacing,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }
}

/// Carrier, mobility and sampling constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerParams {
    carrier_hz: f64,
    speed_mps: f64,
    symbol_interval: f64,
    max_doppler_hz: f64,
    omega_d: f64,
}

impl DopplerParams {
    pub fn new(carrier_hz: f64, speed_mps: f64, symbol_interval: f64) -> Result<Self> {
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        if !finite_pos(carrier_hz) || !finite_pos(symbol_interval) {
            return Err(Error::InvalidArgument(
                "carrier frequency and symbol interval must be positive".into(),
            ));
        }
        if !(speed_mps.is_finite() && speed_mps >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "speed {speed_mps} must be non-negative"
            )));
        }
        let max_doppler_hz = speed_mps * carrier_hz / SPEED_OF_LIGHT;
        Ok(Self {
            carrier_hz,
            speed_mps,
            symbol_interval,
            max_doppler_hz,
            omega_d: 2.0 * PI * max_doppler_hz,
        })
    }

    pub fn from_symbol_rate(carrier_hz: f64, speed_mps: f64, symbol_rate_hz: f64) -> Result<Self> {
        if !(symbol_rate_hz.is_finite() && symbol_rate_hz > 0.0) {
            return Err(Error::InvalidArgument(
                "symbol rate must be positive".into(),
            ));
        }
        Self::new(carrier_hz, speed_mps, 1.0 / symbol_rate_hz)
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn speed_mps(&self) -> f64 {
        self.speed_mps
    }

    pub fn symbol_interval(&self) -> f64 {
        self.symbol_interval
    }

    /// Maximum Doppler shift `v·f_c/c` in Hz.
    pub fn max_doppler_hz(&self) -> f64 {
        self.max_doppler_hz
    }

    pub fn omega_d(&self) -> f64 {
        self.omega_d
    }

    /// Phase advance per symbol at unit Doppler factor, `ω_d·T_s`.
    pub fn phase_step(&self) -> f64 {
        self.omega_d * self.symbol_interval
    }
}

fn check_direction(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < PI {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "direction {theta} rad outside (0, π)"
        )))
    }
}

/// Array response `a(θ)`: element `m` is `exp(j·2π·d·m·cos θ)`.
pub fn steering_vector(theta: f64, geom: &ArrayGeometry) -> Result<Vec<C64>> {
    check_direction(theta)?;
    let step = 2.0 * PI * geom.spacing * theta.cos();
    Ok((0..geom.num_antennas)
        .map(|m| C64::cis(step * m as f64))
        .collect())
}

/// `ζ = 1/sqrt(Q·Σ|w_m|²)`, which makes the superposition of all `Q` weighted
/// beams carry unit power per symbol.
pub fn normalization_coefficient(num_beams: usize, weights: &[C64]) -> Result<f64> {
    if num_beams == 0 {
        return Err(Error::InvalidArgument("need at least one beam".into()));
    }
    let energy: f64 = weights.iter().map(|w| w.norm_sqr()).sum();
    if energy.is_nan() || energy <= 0.0 || !energy.is_finite() {
        return Err(Error::InvalidArgument(
            "antenna weights must be non-zero".into(),
        ));
    }
    Ok(1.0 / (num_beams as f64 * energy).sqrt())
}

/// Matched-filter beamformer `ζ·a(θ)·exp(jπφ)` with the phase given in units of π.
pub fn make_beamformer(
    theta: f64,
    phase_units_of_pi: f64,
    zeta: f64,
    geom: &ArrayGeometry,
) -> Result<Vec<C64>> {
    let rot = C64::cis(PI * phase_units_of_pi) * zeta;
    Ok(steering_vector(theta, geom)?
        .into_iter()
        .map(|a| a * rot)
        .collect())
}

/// Diagonal of `Φ(ε)`: element `n` is `exp(j·ω_d·T_s·n·ε)`.
pub fn phase_ramp(epsilon: f64, len: usize, dp: &DopplerParams) -> Result<Vec<C64>> {
    phase_ramp_from(epsilon, 0, len, dp)
}

/// Same as [`phase_ramp`] but with the time origin shifted to sample `start`,
/// so that consecutive segments of one transmission share a common clock.
pub fn phase_ramp_from(
    epsilon: f64,
    start: usize,
    len: usize,
    dp: &DopplerParams,
) -> Result<Vec<C64>> {
    if len == 0 {
        return Err(Error::InvalidArgument(
            "phase ramp length must be at least 1".into(),
        ));
    }
    let step = dp.phase_step() * epsilon;
    Ok((start..start + len)
        .map(|n| C64::cis(step * n as f64))
        .collect())
}

/// Fixed grid of beam directions: `cos ϑ_q = −1 + (2q−1)/Q` for `q = 1..Q`,
/// i.e. the centres of `Q` equal-width bins partitioning `(−1, 1)` in cosine.
pub fn select_directions(num_beams: usize) -> Result<Vec<f64>> {
    if num_beams == 0 {
        return Err(Error::InvalidArgument(
            "need at least one beam direction".into(),
        ));
    }
    let q = num_beams as f64;
    Ok((1..=num_beams)
        .map(|i| (-1.0 + (2.0 * i as f64 - 1.0) / q).acos())
        .collect())
}

/// The set of `Q` beamformers used for one transmission, together with the
/// random-phase schedule.
///
/// `phases` holds one row per block; a single row means every block shares one
/// phase realization (the conventional and Alamouti schemes).
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerBank {
    geometry: ArrayGeometry,
    directions: Vec<f64>,
    phases: Vec<Vec<f64>>,
    weights: Vec<C64>,
    zeta: f64,
}

impl BeamformerBank {
    pub fn new(
        geometry: ArrayGeometry,
        directions: Vec<f64>,
        weights: Vec<C64>,
        phases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        for &theta in &directions {
            check_direction(theta)?;
        }
        if weights.len() != geometry.num_antennas {
            return Err(Error::DimensionMismatch {
                what: "antenna weights",
                expected: geometry.num_antennas,
                actual: weights.len(),
            });
        }
        if phases.is_empty() {
            return Err(Error::InvalidArgument(
                "phase schedule needs at least one row".into(),
            ));
        }
        if let Some(row) = phases.iter().find(|r| r.len() != directions.len()) {
            return Err(Error::DimensionMismatch {
                what: "phase schedule row",
                expected: directions.len(),
                actual: row.len(),
            });
        }
        let zeta = normalization_coefficient(directions.len(), &weights)?;
        Ok(Self {
            geometry,
            directions,
            phases,
            weights,
            zeta,
        })
    }

    /// Builds a bank whose phases are drawn i.i.d. uniform on `[0, 2)`, one row
    /// per block.
    pub fn draw<R: Rng + ?Sized>(
        geometry: ArrayGeometry,
        directions: Vec<f64>,
        weights: Vec<C64>,
        blocks: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let phases = draw_phase_schedule(blocks, directions.len(), rng);
        Self::new(geometry, directions, weights, phases)
    }

    /// Same beams and weights with a different phase schedule.
    pub fn with_phases(&self, phases: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            self.geometry,
            self.directions.clone(),
            self.weights.clone(),
            phases,
        )
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn directions(&self) -> &[f64] {
        &self.directions
    }

    pub fn weights(&self) -> &[C64] {
        &self.weights
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn num_beams(&self) -> usize {
        self.directions.len()
    }

    /// Number of rows in the phase schedule.
    pub fn num_phase_rows(&self) -> usize {
        self.phases.len()
    }

    pub fn weight_sum(&self) -> C64 {
        self.weights.iter().sum()
    }

    /// Random phase `φ_{k,q}` in units of π. A single-row schedule serves
    /// every block.
    pub fn phase(&self, block: usize, beam: usize) -> Result<f64> {
        let row = if self.phases.len() == 1 { 0 } else { block };
        let row = self.phases.get(row).ok_or(Error::IndexOutOfRange {
            what: "block",
            index: block,
            limit: self.phases.len(),
        })?;
        row.get(beam).copied().ok_or(Error::IndexOutOfRange {
            what: "beam",
            index: beam,
            limit: self.directions.len(),
        })
    }

    /// Beamformer `b_k(ϑ_q)`.
    pub fn beamformer(&self, block: usize, beam: usize) -> Result<Vec<C64>> {
        let phase = self.phase(block, beam)?;
        make_beamformer(self.directions[beam], phase, self.zeta, &self.geometry)
    }
}

/// Phase schedule with `blocks` rows of `beams` entries, uniform on `[0, 2)`.
pub fn draw_phase_schedule<R: Rng + ?Sized>(
    blocks: usize,
    beams: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    (0..blocks)
        .map(|_| (0..beams).map(|_| rng.random_range(0.0..2.0)).collect())
        .collect()
}

/// Signal matrix `X_q = diag(w)·b*(ϑ_q)·sᵀ·Φ(−cos ϑ_q)` sent on one beam.
///
/// The matrix is rank one, so it is held as its antenna factor
/// `diag(w)·b*(ϑ_q)` and its time factor `sᵀ·Φ(−cos ϑ_q)`. `start` is the
/// frame-time index of the first column.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitMatrix {
    beam: usize,
    start: usize,
    antenna: Vec<C64>,
    time: Vec<C64>,
}

impl TransmitMatrix {
    pub fn beam(&self) -> usize {
        self.beam
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn rows(&self) -> usize {
        self.antenna.len()
    }

    pub fn cols(&self) -> usize {
        self.time.len()
    }

    pub fn antenna_factor(&self) -> &[C64] {
        &self.antenna
    }

    pub fn time_factor(&self) -> &[C64] {
        &self.time
    }

    pub fn entry(&self, m: usize, n: usize) -> C64 {
        self.antenna[m] * self.time[n]
    }

    /// Row-major dense copy, `rows × cols`.
    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        self.antenna
            .iter()
            .map(|&u| self.time.iter().map(|&v| u * v).collect())
            .collect()
    }
}

pub fn transmit_matrix(
    bank: &BeamformerBank,
    block: usize,
    beam: usize,
    s: &[C64],
    dp: &DopplerParams,
) -> Result<TransmitMatrix> {
    transmit_matrix_at(bank, block, beam, s, 0, dp)
}

/// [`transmit_matrix`] for a segment whose first symbol is sent at frame time
/// `start`; the compensation ramp runs on the frame clock.
pub fn transmit_matrix_at(
    bank: &BeamformerBank,
    block: usize,
    beam: usize,
    s: &[C64],
    start: usize,
    dp: &DopplerParams,
) -> Result<TransmitMatrix> {
    if s.is_empty() {
        return Err(Error::InvalidArgument("transmitted block is empty".into()));
    }
    let b = bank.beamformer(block, beam)?;
    let antenna = bank
        .weights
        .iter()
        .zip(&b)
        .map(|(w, b)| w * b.conj())
        .collect();
    let ramp = phase_ramp_from(-bank.directions[beam].cos(), start, s.len(), dp)?;
    let time = s.iter().zip(&ramp).map(|(x, r)| x * r).collect();
    Ok(TransmitMatrix {
        beam,
        start,
        antenna,
        time,
    })
}
