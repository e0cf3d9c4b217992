//! The six-term Lagrangian energy over reconstruction triples.
//!
//! `E(y, z, w) = γ1·H_k(y) + γ2·H_k(z) + γ0·H_{k,k1}(w|y,z)
//!             + α1·d(x,y) + α2·d(x,z) + α0·d(x,w)`
//!
//! [`AnnealState`] caches the count tables of a triple so that the energy
//! change of a single-symbol substitution costs `O(k + k1)` table lookups.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{
    CountMatrix, JointCountMatrix, Role, Sequence, StatsError, Symbol, Triple,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error(transparent)]
    Stats(#[from] StatsError),

    #[error("Lagrangian weight {name} = {value} must be finite and nonnegative")]
    InvalidWeight { name: &'static str, value: f64 },

    #[error("invalid distortion matrix: {0}")]
    InvalidDistortion(String),
}

pub type Result<T> = std::result::Result<T, EnergyError>;

/// Coefficients of the rate and distortion terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagrangianWeights {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha0: f64,
}

impl LagrangianWeights {
    pub fn new(
        gamma1: f64,
        gamma2: f64,
        gamma0: f64,
        alpha1: f64,
        alpha2: f64,
        alpha0: f64,
    ) -> Result<Self> {
        let w = Self {
            gamma1,
            gamma2,
            gamma0,
            alpha1,
            alpha2,
            alpha0,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn unit() -> Self {
        Self::uniform(1.0)
    }

    pub fn uniform(v: f64) -> Self {
        Self {
            gamma1: v,
            gamma2: v,
            gamma0: v,
            alpha1: v,
            alpha2: v,
            alpha0: v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.named() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(EnergyError::InvalidWeight { name, value });
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma0", self.gamma0),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha0", self.alpha0),
        ]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            gamma1: self.gamma1 * s,
            gamma2: self.gamma2 * s,
            gamma0: self.gamma0 * s,
            alpha1: self.alpha1 * s,
            alpha2: self.alpha2 * s,
            alpha0: self.alpha0 * s,
        }
    }
}

/// Single-letter distortion `d(x, x̂)` as a row-major `A × A` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionMeasure {
    alphabet: usize,
    matrix: Vec<f64>,
}

impl DistortionMeasure {
    pub fn new(alphabet: usize, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != alphabet * alphabet {
            return Err(EnergyError::InvalidDistortion(format!(
                "expected {} entries, got {}",
                alphabet * alphabet,
                matrix.len()
            )));
        }
        if let Some(bad) = matrix.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(EnergyError::InvalidDistortion(format!("entry {bad}")));
        }
        Ok(Self { alphabet, matrix })
    }

    pub fn hamming(alphabet: usize) -> Self {
        let matrix = (0..alphabet * alphabet)
            .map(|i| if i / alphabet == i % alphabet { 0.0 } else { 1.0 })
            .collect();
        Self { alphabet, matrix }
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    #[inline]
    pub fn get(&self, x: Symbol, xhat: Symbol) -> f64 {
        self.matrix[x as usize * self.alphabet + xhat as usize]
    }

    pub fn max(&self) -> f64 {
        self.matrix.iter().copied().fold(0.0, f64::max)
    }
}

/// `(1/n) Σ d(x_i, y_i)`.
pub fn average_distortion(x: &Sequence, y: &Sequence, d: &DistortionMeasure) -> Result<f64> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(vec![x.len(), y.len()]).into());
    }
    check_alphabet(d, &[x, y])?;
    Ok(distortion_sum(x, y, d) / x.len() as f64)
}

fn distortion_sum(x: &Sequence, y: &Sequence, d: &DistortionMeasure) -> f64 {
    x.symbols()
        .iter()
        .zip(y.symbols())
        .map(|(&a, &b)| d.get(a, b))
        .sum()
}

fn check_alphabet(d: &DistortionMeasure, seqs: &[&Sequence]) -> Result<()> {
    if seqs.iter().any(|s| s.alphabet_size() != d.alphabet_size()) {
        let mut sizes: Vec<usize> = seqs.iter().map(|s| s.alphabet_size()).collect();
        sizes.push(d.alphabet_size());
        return Err(StatsError::AlphabetMismatch(sizes).into());
    }
    Ok(())
}

/// The six energy components and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub hk_y: f64,
    pub hk_z: f64,
    pub hkk1_w: f64,
    pub d_y: f64,
    pub d_z: f64,
    pub d_w: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn from_components(
        wts: &LagrangianWeights,
        [hk_y, hk_z, hkk1_w, d_y, d_z, d_w]: [f64; 6],
    ) -> Self {
        let total = wts.gamma1 * hk_y
            + wts.gamma2 * hk_z
            + wts.gamma0 * hkk1_w
            + wts.alpha1 * d_y
            + wts.alpha2 * d_z
            + wts.alpha0 * d_w;
        Self {
            hk_y,
            hk_z,
            hkk1_w,
            d_y,
            d_z,
            d_w,
            total,
        }
    }

    pub fn components(&self) -> [f64; 6] {
        [self.hk_y, self.hk_z, self.hkk1_w, self.d_y, self.d_z, self.d_w]
    }
}

/// Full evaluation from freshly built count tables.
#[allow(clippy::too_many_arguments)]
pub fn compute_energy(
    x: &Sequence,
    y: &Sequence,
    z: &Sequence,
    w: &Sequence,
    wts: &LagrangianWeights,
    d: &DistortionMeasure,
    k: usize,
    k1: usize,
) -> Result<EnergyBreakdown> {
    let n = x.len();
    if [y.len(), z.len(), w.len()].iter().any(|&l| l != n) {
        return Err(StatsError::LengthMismatch(vec![n, y.len(), z.len(), w.len()]).into());
    }
    check_alphabet(d, &[x, y, z, w])?;
    let hk_y = CountMatrix::build(y, k)?.conditional_entropy();
    let hk_z = CountMatrix::build(z, k)?.conditional_entropy();
    let hkk1_w = JointCountMatrix::build(w, y, z, k, k1)?.conditional_entropy();
    Ok(EnergyBreakdown::from_components(
        wts,
        [
            hk_y,
            hk_z,
            hkk1_w,
            distortion_sum(x, y, d) / n as f64,
            distortion_sum(x, z, d) / n as f64,
            distortion_sum(x, w, d) / n as f64,
        ],
    ))
}

/// Upper bounds on the largest single-substitution energy change in each of
/// `y`, `z` and `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaBounds {
    pub delta1: f64,
    pub delta2: f64,
    pub delta0: f64,
}

impl DeltaBounds {
    pub fn max(&self) -> f64 {
        self.delta1.max(self.delta2).max(self.delta0)
    }
}

/// Analytic bound on single-substitution energy changes.
///
/// Moving one count between columns changes `N·H(column)` by at most
/// `log2(n) + log2(e) ≤ 2·log2(n·A)` bits per affected position. A
/// substitution in `y` moves one count at each of `k+1` positions of its own
/// table and `2k1+1` positions of the joint table; one in `w` moves `k+1`
/// joint counts. The distortion term moves by at most `d_max / n`.
pub fn delta_bound(
    wts: &LagrangianWeights,
    d: &DistortionMeasure,
    k: usize,
    k1: usize,
    n: usize,
    alphabet: usize,
) -> DeltaBounds {
    let n_f = n as f64;
    let per_position = 2.0 * (n_f * alphabet as f64).log2() / n_f;
    let own = (k + 1) as f64 * per_position;
    let side_joint = (2 * k1 + 1) as f64 * per_position;
    let dmax = d.max() / n_f;
    DeltaBounds {
        delta1: wts.gamma1 * own + wts.gamma0 * side_joint + wts.alpha1 * dmax,
        delta2: wts.gamma2 * own + wts.gamma0 * side_joint + wts.alpha2 * dmax,
        delta0: wts.gamma0 * own + wts.alpha0 * dmax,
    }
}

/// A reconstruction triple with cached count tables and running energy sums.
#[derive(Debug, Clone)]
pub struct AnnealState {
    x: Sequence,
    y: Sequence,
    z: Sequence,
    w: Sequence,
    hy: CountMatrix,
    hz: CountMatrix,
    hw: JointCountMatrix,
    dist_sums: [f64; 3],
    weights: LagrangianWeights,
    distortion: DistortionMeasure,
    k: usize,
    k1: usize,
}

/// A substitution evaluated but not yet committed.
pub(crate) struct PendingUpdate {
    role: Role,
    position: usize,
    symbol: Symbol,
    own: Option<(f64, crate::stats::MovesBuf)>,
    joint: (f64, crate::stats::MovesBuf),
    dist: f64,
    pub(crate) delta: f64,
}

impl AnnealState {
    /// State with `y = z = w = x`.
    pub fn new(
        x: &Sequence,
        weights: LagrangianWeights,
        distortion: DistortionMeasure,
        k: usize,
        k1: usize,
    ) -> Result<Self> {
        Self::from_triple(x, x.clone(), x.clone(), x.clone(), weights, distortion, k, k1)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_triple(
        x: &Sequence,
        y: Sequence,
        z: Sequence,
        w: Sequence,
        weights: LagrangianWeights,
        distortion: DistortionMeasure,
        k: usize,
        k1: usize,
    ) -> Result<Self> {
        weights.validate()?;
        let n = x.len();
        if [y.len(), z.len(), w.len()].iter().any(|&l| l != n) {
            return Err(StatsError::LengthMismatch(vec![n, y.len(), z.len(), w.len()]).into());
        }
        check_alphabet(&distortion, &[x, &y, &z, &w])?;
        let hy = CountMatrix::build(&y, k)?;
        let hz = CountMatrix::build(&z, k)?;
        let hw = JointCountMatrix::build(&w, &y, &z, k, k1)?;
        let dist_sums = [
            distortion_sum(x, &y, &distortion),
            distortion_sum(x, &z, &distortion),
            distortion_sum(x, &w, &distortion),
        ];
        Ok(Self {
            x: x.clone(),
            y,
            z,
            w,
            hy,
            hz,
            hw,
            dist_sums,
            weights,
            distortion,
            k,
            k1,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn alphabet_size(&self) -> usize {
        self.x.alphabet_size()
    }

    pub fn source(&self) -> &Sequence {
        &self.x
    }

    pub fn sequence(&self, role: Role) -> &Sequence {
        match role {
            Role::Y => &self.y,
            Role::Z => &self.z,
            Role::W => &self.w,
        }
    }

    pub fn y(&self) -> &Sequence {
        &self.y
    }

    pub fn z(&self) -> &Sequence {
        &self.z
    }

    pub fn w(&self) -> &Sequence {
        &self.w
    }

    pub fn weights(&self) -> &LagrangianWeights {
        &self.weights
    }

    pub fn distortion(&self) -> &DistortionMeasure {
        &self.distortion
    }

    pub fn orders(&self) -> (usize, usize) {
        (self.k, self.k1)
    }

    pub fn counts_y(&self) -> &CountMatrix {
        &self.hy
    }

    pub fn counts_z(&self) -> &CountMatrix {
        &self.hz
    }

    pub fn counts_joint(&self) -> &JointCountMatrix {
        &self.hw
    }

    pub fn into_triple(self) -> (Sequence, Sequence, Sequence) {
        (self.y, self.z, self.w)
    }

    /// Energy from the running sums.
    pub fn energy(&self) -> EnergyBreakdown {
        let n = self.len() as f64;
        EnergyBreakdown::from_components(
            &self.weights,
            [
                self.hy.running_entropy(),
                self.hz.running_entropy(),
                self.hw.running_entropy(),
                self.dist_sums[0] / n,
                self.dist_sums[1] / n,
                self.dist_sums[2] / n,
            ],
        )
    }

    /// Energy recomputed from scratch (independent of the cached tables).
    pub fn recompute_energy(&self) -> Result<EnergyBreakdown> {
        compute_energy(
            &self.x,
            &self.y,
            &self.z,
            &self.w,
            &self.weights,
            &self.distortion,
            self.k,
            self.k1,
        )
    }

    /// Rebuilds every cached table and compares with the incremental ones.
    /// Returns the largest absolute energy-component discrepancy, or an error
    /// message if a table differs.
    pub fn audit(&self) -> std::result::Result<f64, String> {
        let rebuilt = |r: std::result::Result<CountMatrix, StatsError>| r.map_err(|e| e.to_string());
        if rebuilt(CountMatrix::build(&self.y, self.k))? != self.hy {
            return Err("y count table diverged from rebuild".into());
        }
        if rebuilt(CountMatrix::build(&self.z, self.k))? != self.hz {
            return Err("z count table diverged from rebuild".into());
        }
        let hw = JointCountMatrix::build(&self.w, &self.y, &self.z, self.k, self.k1)
            .map_err(|e| e.to_string())?;
        if hw != self.hw {
            return Err("joint count table diverged from rebuild".into());
        }
        let fresh = self.recompute_energy().map_err(|e| e.to_string())?;
        let cached = self.energy();
        Ok(fresh
            .components()
            .iter()
            .zip(cached.components())
            .map(|(a, b)| (a - b).abs())
            .chain(std::iter::once((fresh.total - cached.total).abs()))
            .fold(0.0, f64::max))
    }

    /// Replaces the running entropy sums with exact recomputations.
    pub fn resync(&mut self) {
        self.hy.resync();
        self.hz.resync();
        self.hw.resync();
        self.dist_sums = [
            distortion_sum(&self.x, &self.y, &self.distortion),
            distortion_sum(&self.x, &self.z, &self.distortion),
            distortion_sum(&self.x, &self.w, &self.distortion),
        ];
    }

    pub(crate) fn evaluate(&self, role: Role, position: usize, symbol: Symbol) -> PendingUpdate {
        let n = self.len() as f64;
        let tri = Triple {
            w: &self.w,
            y: &self.y,
            z: &self.z,
        };
        let joint = self.hw.cost_delta(tri, role, position, symbol);
        let (own, gamma, alpha, current) = match role {
            Role::Y => (
                Some(self.hy.cost_delta(&self.y, position, symbol)),
                self.weights.gamma1,
                self.weights.alpha1,
                self.y.get(position),
            ),
            Role::Z => (
                Some(self.hz.cost_delta(&self.z, position, symbol)),
                self.weights.gamma2,
                self.weights.alpha2,
                self.z.get(position),
            ),
            Role::W => (None, 0.0, self.weights.alpha0, self.w.get(position)),
        };
        let xi = self.x.get(position);
        let dist = self.distortion.get(xi, symbol) - self.distortion.get(xi, current);
        let own_cost = own.as_ref().map_or(0.0, |(c, _)| *c);
        let delta = (gamma * own_cost + self.weights.gamma0 * joint.0 + alpha * dist) / n;
        PendingUpdate {
            role,
            position,
            symbol,
            own,
            joint,
            dist,
            delta,
        }
    }

    /// `E(after) − E(before)` for the hypothetical substitution
    /// `role[position] ← symbol`, using only the touched contexts.
    pub fn energy_delta(&self, role: Role, position: usize, symbol: Symbol) -> Result<f64> {
        self.sequence(role).check_substitution(position, symbol)?;
        if self.sequence(role).get(position) == symbol {
            return Ok(0.0);
        }
        Ok(self.evaluate(role, position, symbol).delta)
    }

    pub(crate) fn commit(&mut self, update: PendingUpdate) {
        let PendingUpdate {
            role,
            position,
            symbol,
            own,
            joint,
            dist,
            ..
        } = update;
        self.hw.commit(&joint.1, joint.0);
        let idx = match role {
            Role::Y => 0,
            Role::Z => 1,
            Role::W => 2,
        };
        if let Some((cost, moves)) = own {
            match role {
                Role::Y => self.hy.commit(&moves, cost),
                Role::Z => self.hz.commit(&moves, cost),
                Role::W => unreachable!(),
            }
        }
        self.dist_sums[idx] += dist;
        let seq = match role {
            Role::Y => &mut self.y,
            Role::Z => &mut self.z,
            Role::W => &mut self.w,
        };
        seq.set(position, symbol).expect("validated substitution");
    }

    /// Commits `role[position] ← symbol`, keeping tables and sums in step.
    pub fn substitute(&mut self, role: Role, position: usize, symbol: Symbol) -> Result<()> {
        self.sequence(role).check_substitution(position, symbol)?;
        if self.sequence(role).get(position) != symbol {
            let update = self.evaluate(role, position, symbol);
            self.commit(update);
        }
        Ok(())
    }
}

/// `E(after) − E(before)` for one substitution on an [`AnnealState`].
pub fn energy_delta(state: &AnnealState, role: Role, position: usize, symbol: Symbol) -> Result<f64> {
    state.energy_delta(role, position, symbol)
}
