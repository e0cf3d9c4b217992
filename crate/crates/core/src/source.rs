//! Finite-state Markov test sources.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{Sequence, StatsError, Symbol};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    #[error("invalid transition matrix: {0}")]
    InvalidTransition(String),

    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// A stationary Markov chain over `0..A` and the length/seed of one draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovSourceSpec {
    pub alphabet: usize,
    /// Row-stochastic `A × A` matrix, `transition[a][b] = P(b | a)`.
    pub transition: Vec<Vec<f64>>,
    pub n: usize,
    pub seed: u64,
}

impl MarkovSourceSpec {
    /// Binary chain that flips state with probability `p`.
    pub fn symmetric_binary(p: f64, n: usize, seed: u64) -> Self {
        Self {
            alphabet: 2,
            transition: vec![vec![1.0 - p, p], vec![p, 1.0 - p]],
            n,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        let bad = |m: String| Err(SourceError::InvalidTransition(m));
        if self.transition.len() != self.alphabet {
            return bad(format!("{} rows for alphabet {}", self.transition.len(), self.alphabet));
        }
        for (a, row) in self.transition.iter().enumerate() {
            if row.len() != self.alphabet {
                return bad(format!("row {a} has {} entries", row.len()));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return bad(format!("row {a} has a negative or non-finite entry"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return bad(format!("row {a} sums to {sum}"));
            }
        }
        if self.n == 0 {
            return Err(StatsError::Empty.into());
        }
        Ok(())
    }

    /// Stationary law by power iteration from the uniform vector.
    pub fn stationary(&self) -> Vec<f64> {
        let a = self.alphabet;
        let mut pi = vec![1.0 / a as f64; a];
        for _ in 0..10_000 {
            let mut next = vec![0.0; a];
            for (i, row) in self.transition.iter().enumerate() {
                for (j, p) in row.iter().enumerate() {
                    next[j] += pi[i] * p;
                }
            }
            let diff: f64 = next.iter().zip(&pi).map(|(x, y)| (x - y).abs()).sum();
            pi = next;
            if diff < 1e-15 {
                break;
            }
        }
        pi
    }
}

fn draw(rng: &mut impl Rng, pmf: &[f64]) -> Symbol {
    let mut u = rng.gen::<f64>();
    for (s, &p) in pmf.iter().enumerate() {
        if u < p {
            return s as Symbol;
        }
        u -= p;
    }
    // rounding leftovers land on the last symbol with positive mass
    pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0) as Symbol
}

/// Draws one stationary-start realisation of the chain.
pub fn generate_markov(spec: &MarkovSourceSpec) -> Result<Sequence, SourceError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut symbols = Vec::with_capacity(spec.n);
    let mut state = draw(&mut rng, &spec.stationary());
    symbols.push(state);
    for _ in 1..spec.n {
        state = draw(&mut rng, &spec.transition[state as usize]);
        symbols.push(state);
    }
    Ok(Sequence::new(symbols, spec.alphabet)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flips(s: &Sequence) -> usize {
        s.symbols().windows(2).filter(|w| w[0] != w[1]).count()
    }

    #[test]
    fn p_zero_is_constant() {
        for seed in 0..10 {
            let s = generate_markov(&MarkovSourceSpec::symmetric_binary(0.0, 500, seed)).unwrap();
            assert_eq!(flips(&s), 0);
        }
    }

    #[test]
    fn flip_rate_concentrates() {
        let n = 100_000;
        let s = generate_markov(&MarkovSourceSpec::symmetric_binary(0.2, n, 4)).unwrap();
        let rate = flips(&s) as f64 / (n - 1) as f64;
        // 0.005 is about 4 binomial standard deviations at this n
        assert!((rate - 0.2).abs() < 0.005, "flip rate {rate}");
    }

    #[test]
    fn half_flip_is_uncorrelated() {
        let n = 100_000;
        let s = generate_markov(&MarkovSourceSpec::symmetric_binary(0.5, n, 9)).unwrap();
        let v: Vec<f64> = s.symbols().iter().map(|&b| if b == 1 { 1.0 } else { -1.0 }).collect();
        let corr: f64 = v.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (n - 1) as f64;
        assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "pair correlation {corr}");
        let ones = s.symbols().iter().filter(|&&b| b == 1).count() as f64;
        assert!((ones / n as f64 - 0.5).abs() < 3.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn deterministic_and_validated() {
        let spec = MarkovSourceSpec::symmetric_binary(0.2, 1000, 1);
        assert_eq!(generate_markov(&spec).unwrap(), generate_markov(&spec).unwrap());
        let mut bad = spec.clone();
        bad.transition[0][0] = 0.7;
        assert!(matches!(generate_markov(&bad), Err(SourceError::InvalidTransition(_))));
        assert_eq!(spec.stationary(), vec![0.5, 0.5]);
    }
}
