//! Gibbs-sampler simulated annealing over reconstruction triples.
//!
//! Each iteration draws one position uniformly and resamples `y_i`, `z_i`,
//! `w_i` in turn from their Boltzmann conditionals at the current inverse
//! temperature. Conditionals are formed from single-substitution energy
//! deltas, so the partition function is never needed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::energy::{
    compute_energy, AnnealState, DeltaBounds, DistortionMeasure, EnergyBreakdown, EnergyError,
    LagrangianWeights,
};
use crate::stats::{Role, Sequence, Symbol};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnnealError {
    #[error(transparent)]
    Energy(#[from] EnergyError),

    #[error("exhaustive search over {alphabet}^(3*{n}) triples exceeds the 2^24 limit")]
    InstanceTooLarge { alphabet: usize, n: usize },

    #[error("invalid annealing schedule: {0}")]
    InvalidSchedule(String),

    #[error("inverse temperature must be finite and nonnegative, got {0}")]
    InvalidBeta(f64),
}

pub type Result<T> = std::result::Result<T, AnnealError>;

/// Inverse-temperature schedule `β_t`, `t = 1, 2, …`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnnealSchedule {
    /// `β_t = ln(⌊t/n⌋ + 1) / T0`.
    Logarithmic { t0: f64 },
    /// `β_t = c · t^exponent`; `c` defaults to `2n`.
    PowerLaw {
        #[serde(default)]
        c: Option<f64>,
        exponent: f64,
    },
    Constant { beta: f64 },
}

impl AnnealSchedule {
    /// `T(t) = 1 / (2n · t^(1/10))`.
    pub fn default_power_law() -> Self {
        AnnealSchedule::PowerLaw {
            c: None,
            exponent: 0.1,
        }
    }

    /// Logarithmic schedule with `T0 = margin · n · max Δ`, `margin > 1`.
    pub fn logarithmic_from_bounds(bounds: &DeltaBounds, n: usize, margin: f64) -> Self {
        AnnealSchedule::Logarithmic {
            t0: margin * n as f64 * bounds.max(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            AnnealSchedule::Logarithmic { t0 } => t0.is_finite() && t0 > 0.0,
            AnnealSchedule::PowerLaw { c, exponent } => {
                c.is_none_or(|c| c.is_finite() && c >= 0.0)
                    && exponent.is_finite()
                    && exponent >= 0.0
            }
            AnnealSchedule::Constant { beta } => beta.is_finite() && beta >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(AnnealError::InvalidSchedule(format!("{self:?}")))
        }
    }

    pub fn beta(&self, t: u64, n: usize) -> f64 {
        match *self {
            AnnealSchedule::Logarithmic { t0 } => ((t / n as u64) as f64 + 1.0).ln() / t0,
            AnnealSchedule::PowerLaw { c, exponent } => {
                c.unwrap_or(2.0 * n as f64) * (t.max(1) as f64).powf(exponent)
            }
            AnnealSchedule::Constant { beta } => beta,
        }
    }
}

/// Boltzmann conditional of one coordinate, `p(a) ∝ exp(−β·ΔE(a))`.
pub fn conditional_pmf(state: &AnnealState, role: Role, position: usize, beta: f64) -> Result<Vec<f64>> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(AnnealError::InvalidBeta(beta));
    }
    let deltas = (0..state.alphabet_size())
        .map(|a| state.energy_delta(role, position, a as Symbol))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(softmin(&deltas, beta))
}

fn softmin(deltas: &[f64], beta: f64) -> Vec<f64> {
    let min = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = deltas.iter().map(|d| (-beta * (d - min)).exp()).collect();
    let sum: f64 = weights.iter().sum();
    weights.into_iter().map(|p| p / sum).collect()
}

/// Energy snapshot taken during a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: u64,
    pub energy: EnergyBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealReport {
    pub y: Sequence,
    pub z: Sequence,
    pub w: Sequence,
    /// Energies at iterations `0, n, 2n, …`, plus a closing entry at `r` when
    /// `r` is not a multiple of `n`. The last entry is always the final state.
    pub trace: Vec<TracePoint>,
    pub energy: EnergyBreakdown,
    pub iterations: u64,
    pub seed: u64,
}

impl AnnealReport {
    pub fn running_minimum(&self) -> f64 {
        self.trace.iter().map(|p| p.energy.total).fold(f64::INFINITY, f64::min)
    }
}

/// A single annealing chain: state, generator and iteration counter.
pub struct Chain {
    state: AnnealState,
    schedule: AnnealSchedule,
    rng: ChaCha8Rng,
    t: u64,
}

impl Chain {
    pub fn new(state: AnnealState, schedule: AnnealSchedule, seed: u64) -> Result<Self> {
        schedule.validate()?;
        Ok(Self {
            state,
            schedule,
            rng: ChaCha8Rng::seed_from_u64(seed),
            t: 0,
        })
    }

    pub fn state(&self) -> &AnnealState {
        &self.state
    }

    pub fn iteration(&self) -> u64 {
        self.t
    }

    pub fn into_state(self) -> AnnealState {
        self.state
    }

    /// One iteration: draw `i`, then resample `y_i`, `z_i`, `w_i`.
    pub fn step(&mut self) {
        self.t += 1;
        let n = self.state.len();
        let beta = self.schedule.beta(self.t, n);
        let i = self.rng.gen_range(0..n);
        for role in Role::ALL {
            self.resample(role, i, beta);
        }
    }

    fn resample(&mut self, role: Role, i: usize, beta: f64) {
        let current = self.state.sequence(role).get(i);
        let alphabet = self.state.alphabet_size();
        let mut pending: SmallVec<[_; 4]> = SmallVec::new();
        let mut deltas: SmallVec<[f64; 8]> = SmallVec::new();
        for a in 0..alphabet as Symbol {
            if a == current {
                deltas.push(0.0);
            } else {
                let update = self.state.evaluate(role, i, a);
                deltas.push(update.delta);
                pending.push((a, update));
            }
        }
        let min = deltas.iter().copied().fold(f64::INFINITY, f64::min);
        let weights: SmallVec<[f64; 8]> = deltas.iter().map(|d| (-beta * (d - min)).exp()).collect();
        let sum: f64 = weights.iter().sum();
        let mut u = self.rng.gen::<f64>() * sum;
        let mut choice = alphabet - 1;
        for (a, w) in weights.iter().enumerate() {
            if u < *w {
                choice = a;
                break;
            }
            u -= *w;
        }
        if choice as Symbol != current {
            let (_, update) = pending
                .into_iter()
                .find(|(a, _)| *a as usize == choice)
                .expect("candidate evaluated");
            self.state.commit(update);
        }
    }

    fn checkpoint(&mut self) -> EnergyBreakdown {
        #[cfg(debug_assertions)]
        {
            let err = self.state.audit().expect("cached tables match rebuild");
            debug_assert!(err < 1e-9, "cached energy drifted by {err}");
        }
        self.state.resync();
        self.state.energy()
    }
}

/// Runs `r` iterations from `y = z = w = x`.
#[allow(clippy::too_many_arguments)]
pub fn anneal(
    x: &Sequence,
    weights: &LagrangianWeights,
    distortion: &DistortionMeasure,
    k: usize,
    k1: usize,
    schedule: &AnnealSchedule,
    r: u64,
    seed: u64,
) -> Result<AnnealReport> {
    let state = AnnealState::new(x, *weights, distortion.clone(), k, k1)?;
    let mut chain = Chain::new(state, *schedule, seed)?;
    let n = x.len() as u64;
    let mut trace = vec![TracePoint {
        iteration: 0,
        energy: chain.checkpoint(),
    }];
    while chain.t < r {
        chain.step();
        if chain.t % n == 0 && chain.t < r {
            trace.push(TracePoint {
                iteration: chain.t,
                energy: chain.checkpoint(),
            });
        }
    }
    let state = chain.into_state();
    let energy = state.recompute_energy()?;
    if r > 0 {
        trace.push(TracePoint {
            iteration: r,
            energy,
        });
    } else {
        trace[0].energy = energy;
    }
    let (y, z, w) = state.into_triple();
    Ok(AnnealReport {
        y,
        z,
        w,
        trace,
        energy,
        iterations: r,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimizer {
    pub y: Sequence,
    pub z: Sequence,
    pub w: Sequence,
    pub energy: EnergyBreakdown,
}

const EXHAUSTIVE_LIMIT: u64 = 1 << 24;

/// Global minimum of the energy by enumeration of all `A^(3n)` triples.
/// Ties go to the lexicographically smallest concatenation `y ‖ z ‖ w`.
pub fn exhaustive_minimize(
    x: &Sequence,
    weights: &LagrangianWeights,
    distortion: &DistortionMeasure,
    k: usize,
    k1: usize,
) -> Result<Minimizer> {
    let (n, a) = (x.len(), x.alphabet_size());
    let too_large = AnnealError::InstanceTooLarge { alphabet: a, n };
    let count = (a as u64)
        .checked_pow(3 * n as u32)
        .filter(|&c| c <= EXHAUSTIVE_LIMIT)
        .ok_or(too_large)?;
    let decode = |mut m: u64| -> [Sequence; 3] {
        let mut digits = vec![0 as Symbol; 3 * n];
        for d in digits.iter_mut().rev() {
            *d = (m % a as u64) as Symbol;
            m /= a as u64;
        }
        let mk = |s: &[Symbol]| Sequence::new(s.to_vec(), a).expect("digits in alphabet");
        [mk(&digits[..n]), mk(&digits[n..2 * n]), mk(&digits[2 * n..])]
    };
    // validates orders and weights once up front
    compute_energy(x, x, x, x, weights, distortion, k, k1)?;
    let (best, index) = (0..count)
        .into_par_iter()
        .map(|m| {
            let [y, z, w] = decode(m);
            let e = compute_energy(x, &y, &z, &w, weights, distortion, k, k1)
                .expect("validated instance")
                .total;
            (e, m)
        })
        .reduce(
            || (f64::INFINITY, u64::MAX),
            |p, q| match p.0.total_cmp(&q.0) {
                std::cmp::Ordering::Less => p,
                std::cmp::Ordering::Greater => q,
                std::cmp::Ordering::Equal => {
                    if p.1 <= q.1 {
                        p
                    } else {
                        q
                    }
                }
            },
        );
    debug_assert!(best.is_finite());
    let [y, z, w] = decode(index);
    let energy = compute_energy(x, &y, &z, &w, weights, distortion, k, k1)?;
    Ok(Minimizer { y, z, w, energy })
}
