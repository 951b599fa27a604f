//! Smooth random inputs as truncated Fourier series.
//!
//! A signal is `i(t) = sum_l a_l cos(2 pi l t + theta_l)` for
//! `l = 0..=L`: harmonics of period one, real amplitudes, phases in
//! `[0, 2 pi)`. Ensembles draw amplitudes from `Normal(0, sigma^2)` and
//! phases uniformly, using a seeded ChaCha8 stream so a
//! `(seed, n, L, sigma)` tuple always produces the same sample.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::InputSignal;

/// One realization of the input process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSignal")]
pub struct FourierSignal {
    amplitudes: Vec<f64>,
    phases: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSignal {
    amplitudes: Vec<f64>,
    phases: Vec<f64>,
}

impl TryFrom<RawSignal> for FourierSignal {
    type Error = Error;

    fn try_from(raw: RawSignal) -> Result<Self> {
        FourierSignal::new(raw.amplitudes, raw.phases)
    }
}

fn normalize_phase(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl FourierSignal {
    /// Phases are wrapped into `[0, 2 pi)`.
    pub fn new(amplitudes: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        Error::check_len("phases", amplitudes.len(), phases.len())?;
        if amplitudes.is_empty() {
            return Err(Error::invalid("a Fourier signal needs at least the l = 0 mode"));
        }
        if amplitudes.iter().chain(&phases).any(|v| !v.is_finite()) {
            return Err(Error::invalid("Fourier coefficients must be finite"));
        }
        let phases = phases.into_iter().map(normalize_phase).collect();
        Ok(Self { amplitudes, phases })
    }

    /// The identically zero signal with `n_modes + 1` coefficients.
    pub fn zero(n_modes: usize) -> Self {
        Self {
            amplitudes: vec![0.0; n_modes + 1],
            phases: vec![0.0; n_modes + 1],
        }
    }

    /// `i(t) = c`, carried by the `l = 0` mode.
    pub fn constant(c: f64) -> Self {
        // cos(pi) = -1 exactly, so negative constants keep their sign
        // without a negative amplitude.
        let (a, th) = if c < 0.0 { (-c, std::f64::consts::PI) } else { (c, 0.0) };
        Self {
            amplitudes: vec![a],
            phases: vec![th],
        }
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Highest harmonic `L`.
    pub fn n_modes(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        self.amplitudes
            .iter()
            .zip(&self.phases)
            .enumerate()
            .map(|(l, (&a, &th))| a * (TAU * l as f64 * t + th).cos())
            .sum()
    }

    /// Upper bound on `|di/dt|`, `sum_l |a_l| 2 pi l`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(l, a)| a.abs() * TAU * l as f64)
            .sum()
    }
}

impl InputSignal for FourierSignal {
    fn value_at(&self, t: f64) -> f64 {
        self.evaluate(t)
    }
}

/// The probability measure on inputs: `L`, the amplitude spread and the
/// seed of the generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputEnsembleSpec {
    pub n_modes: usize,
    pub amplitude_sigma: f64,
    pub seed: u64,
}

impl InputEnsembleSpec {
    pub const DEFAULT_MODES: usize = 10;

    /// `sigma = 1 / sqrt(L + 1)`, which keeps the signal RMS of order one
    /// independent of `L`.
    pub fn new(n_modes: usize, seed: u64) -> Self {
        Self {
            n_modes,
            amplitude_sigma: Self::default_sigma(n_modes),
            seed,
        }
    }

    pub fn default_sigma(n_modes: usize) -> f64 {
        1.0 / ((n_modes + 1) as f64).sqrt()
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude_sigma.is_finite() && self.amplitude_sigma > 0.0) {
            return Err(Error::invalid(format!(
                "amplitude_sigma must be positive, got {}",
                self.amplitude_sigma
            )));
        }
        Ok(())
    }
}

impl Default for InputEnsembleSpec {
    fn default() -> Self {
        Self::new(Self::DEFAULT_MODES, 0)
    }
}

/// Draws `n` i.i.d. signals. For each signal the stream yields all
/// amplitudes `a_0..a_L`, then all phases `theta_0..theta_L`.
pub fn sample_inputs(spec: &InputEnsembleSpec, n: usize) -> Result<Vec<FourierSignal>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let amp = Normal::new(0.0, spec.amplitude_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let phase = Uniform::new(0.0, TAU).map_err(|e| Error::invalid(e.to_string()))?;
    let modes = spec.n_modes + 1;
    Ok((0..n)
        .map(|_| {
            let amplitudes: Vec<f64> = (0..modes).map(|_| amp.sample(&mut rng)).collect();
            let phases: Vec<f64> = (0..modes).map(|_| normalize_phase(rng.sample(phase))).collect();
            FourierSignal { amplitudes, phases }
        })
        .collect())
}
