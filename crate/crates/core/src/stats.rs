//! Empirical context statistics over cyclic sequences.
//!
//! A [`CountMatrix`] holds, for every length-`k` context `b`, how often each
//! symbol follows `b` in a sequence read cyclically. A [`JointCountMatrix`]
//! does the same for a sequence `w` whose context is its own `k`-past together
//! with centred `(2k1+1)`-windows of two side sequences `y` and `z`.
//!
//! Counts are stored raw (not divided by `n`). The conditional empirical
//! entropy is `Σ_b (n_b / n) · H(column_b)` in bits per symbol.
//!
//! Both tables support single-symbol substitutions in time independent of
//! `n`: only the contexts of the `O(k + k1)` positions whose window contains
//! the substituted index are touched.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;
use smallvec::SmallVec;
use thiserror::Error;

/// Alphabet symbol, `0..A`.
pub type Symbol = u8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("alphabet size must be in 2..=256, got {0}")]
    InvalidAlphabet(usize),

    #[error("sequence must contain at least one symbol")]
    Empty,

    #[error("symbol {symbol} outside alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },

    #[error("invalid context orders k = {k}, k1 = {k1} for length {n}")]
    InvalidOrder { k: usize, k1: usize, n: usize },

    #[error("negative count {0}")]
    InvalidCounts(f64),

    #[error("sequence lengths differ: {0:?}")]
    LengthMismatch(Vec<usize>),

    #[error("alphabet sizes differ: {0:?}")]
    AlphabetMismatch(Vec<usize>),

    #[error("position {position} out of range for length {n}")]
    PositionOutOfRange { position: usize, n: usize },

    #[error("context of {width} symbols over alphabet {alphabet} does not fit a 64-bit key")]
    ContextTooWide { width: usize, alphabet: usize },
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// A finite-alphabet sequence read with the cyclic convention
/// `y[i] = y[i mod n]` at both ends.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sequence {
    symbols: Vec<Symbol>,
    alphabet_size: usize,
}

impl Sequence {
    pub fn new(symbols: Vec<Symbol>, alphabet_size: usize) -> Result<Self> {
        if !(2..=256).contains(&alphabet_size) {
            return Err(StatsError::InvalidAlphabet(alphabet_size));
        }
        if symbols.is_empty() {
            return Err(StatsError::Empty);
        }
        if let Some(&bad) = symbols.iter().find(|&&s| s as usize >= alphabet_size) {
            return Err(StatsError::SymbolOutOfRange {
                symbol: bad as usize,
                alphabet: alphabet_size,
            });
        }
        Ok(Self {
            symbols,
            alphabet_size,
        })
    }

    /// Parses a string of decimal digits, e.g. `"0011"`.
    pub fn from_digits(digits: &str, alphabet_size: usize) -> Result<Self> {
        let symbols = digits
            .chars()
            .map(|c| {
                c.to_digit(10)
                    .map(|d| d as Symbol)
                    .ok_or(StatsError::SymbolOutOfRange {
                        symbol: c as usize,
                        alphabet: alphabet_size,
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(symbols, alphabet_size)
    }

    pub fn zeros(n: usize, alphabet_size: usize) -> Result<Self> {
        Self::new(vec![0; n], alphabet_size)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn into_symbols(self) -> Vec<Symbol> {
        self.symbols
    }

    /// Symbol at a possibly out-of-range index, wrapped cyclically.
    pub fn at(&self, i: isize) -> Symbol {
        self.symbols[i.rem_euclid(self.len() as isize) as usize]
    }

    pub fn get(&self, i: usize) -> Symbol {
        self.symbols[i]
    }

    pub fn set(&mut self, position: usize, symbol: Symbol) -> Result<()> {
        self.check_substitution(position, symbol)?;
        self.symbols[position] = symbol;
        Ok(())
    }

    /// Cyclic left rotation by `j`.
    pub fn rotate(&self, j: usize) -> Self {
        let mut symbols = self.symbols.clone();
        let n = symbols.len();
        symbols.rotate_left(j % n);
        Self {
            symbols,
            alphabet_size: self.alphabet_size,
        }
    }

    pub(crate) fn check_substitution(&self, position: usize, symbol: Symbol) -> Result<()> {
        if position >= self.len() {
            return Err(StatsError::PositionOutOfRange {
                position,
                n: self.len(),
            });
        }
        if symbol as usize >= self.alphabet_size {
            return Err(StatsError::SymbolOutOfRange {
                symbol: symbol as usize,
                alphabet: self.alphabet_size,
            });
        }
        Ok(())
    }

    #[inline]
    fn wrapped(&self, i: isize, over: Option<(usize, Symbol)>) -> Symbol {
        let p = i.rem_euclid(self.len() as isize) as usize;
        match over {
            Some((q, s)) if q == p => s,
            _ => self.symbols[p],
        }
    }

    /// Base-A packing of `len` symbols starting at `start`, oldest symbol most
    /// significant.
    #[inline]
    fn pack(&self, start: isize, len: usize, over: Option<(usize, Symbol)>) -> u64 {
        let a = self.alphabet_size as u64;
        let mut key = 0u64;
        for j in 0..len as isize {
            key = key * a + self.wrapped(start + j, over) as u64;
        }
        key
    }
}

/// The entropy functional: entropy in bits of the pmf proportional to `v`.
/// Zero for the all-zero vector; `0·log 0 = 0`.
pub fn entropy_functional(v: &[f64]) -> Result<f64> {
    if let Some(&bad) = v.iter().find(|&&c| c < 0.0 || c.is_nan()) {
        return Err(StatsError::InvalidCounts(bad));
    }
    let total: f64 = v.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok(v
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| (c / total) * (total / c).log2())
        .sum())
}

/// Lookup table for `c · log2(c)` on small integers.
#[derive(Debug, Clone)]
struct XLogX {
    table: Vec<f64>,
}

impl XLogX {
    fn new(max: usize) -> Self {
        let table = (0..=max + 1)
            .map(|c| if c == 0 { 0.0 } else { c as f64 * (c as f64).log2() })
            .collect();
        Self { table }
    }

    #[inline]
    fn get(&self, c: i64) -> f64 {
        match self.table.get(c as usize) {
            Some(&v) => v,
            None => c as f64 * (c as f64).log2(),
        }
    }

    /// `N·H(column)` where `N` is the column sum.
    #[inline]
    fn column_cost<I: IntoIterator<Item = i64>>(&self, column: I) -> f64 {
        let mut total = 0;
        let mut acc = 0.0;
        for c in column {
            total += c;
            acc += self.get(c);
        }
        self.get(total) - acc
    }
}

/// One context column before and after a substitution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnChange {
    pub context: u64,
    pub old: Vec<u32>,
    pub new: Vec<u32>,
}

/// A single count moved from `(old_key, old_sym)` to `(new_key, new_sym)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Move {
    old_key: u64,
    old_sym: Symbol,
    new_key: u64,
    new_sym: Symbol,
}

pub(crate) type MovesBuf = SmallVec<[Move; 16]>;

/// Sparse context → count-column table. Slots of contexts that drop to zero
/// are kept and simply contribute nothing.
#[derive(Debug, Clone)]
struct ContextTable {
    alphabet: usize,
    n: usize,
    slots: FxHashMap<u64, u32>,
    counts: Vec<u32>,
    totals: Vec<u32>,
    /// Running `Σ_b N_b·H(column_b)`, maintained across substitutions.
    cost: f64,
    xlogx: XLogX,
}

impl ContextTable {
    fn new(alphabet: usize, n: usize) -> Self {
        Self {
            alphabet,
            n,
            slots: FxHashMap::default(),
            counts: Vec::new(),
            totals: Vec::new(),
            cost: 0.0,
            xlogx: XLogX::new(n),
        }
    }

    fn slot_or_insert(&mut self, key: u64) -> usize {
        let next = self.totals.len() as u32;
        let slot = *self.slots.entry(key).or_insert(next);
        if slot == next {
            self.counts.extend(std::iter::repeat_n(0, self.alphabet));
            self.totals.push(0);
        }
        slot as usize
    }

    fn increment(&mut self, key: u64, sym: Symbol) {
        let slot = self.slot_or_insert(key);
        self.counts[slot * self.alphabet + sym as usize] += 1;
        self.totals[slot] += 1;
    }

    fn decrement(&mut self, key: u64, sym: Symbol) {
        let slot = self.slots[&key] as usize;
        self.counts[slot * self.alphabet + sym as usize] -= 1;
        self.totals[slot] -= 1;
    }

    fn column(&self, key: u64) -> Option<&[u32]> {
        self.slots.get(&key).and_then(|&slot| {
            let slot = slot as usize;
            (self.totals[slot] > 0)
                .then(|| &self.counts[slot * self.alphabet..(slot + 1) * self.alphabet])
        })
    }

    fn occupied(&self) -> impl Iterator<Item = (u64, &[u32])> + '_ {
        self.slots.iter().filter_map(move |(&key, &slot)| {
            let slot = slot as usize;
            (self.totals[slot] > 0)
                .then(|| (key, &self.counts[slot * self.alphabet..(slot + 1) * self.alphabet]))
        })
    }

    fn total(&self) -> u64 {
        self.totals.iter().map(|&t| t as u64).sum()
    }

    fn to_map(&self) -> BTreeMap<u64, Vec<u32>> {
        self.occupied().map(|(k, c)| (k, c.to_vec())).collect()
    }

    /// Exact recomputation of `Σ_b N_b·H(column_b)` from the columns.
    /// Summed in key order so the result does not depend on insertion order.
    fn fresh_cost(&self) -> f64 {
        let mut costs: Vec<(u64, f64)> = self
            .occupied()
            .map(|(key, col)| (key, self.xlogx.column_cost(col.iter().map(|&c| c as i64))))
            .collect();
        costs.sort_unstable_by_key(|&(key, _)| key);
        costs.into_iter().map(|(_, c)| c).sum()
    }

    fn entropy(&self) -> f64 {
        self.fresh_cost() / self.n as f64
    }

    /// Change of `Σ_b N_b·H(column_b)` if `moves` were applied.
    fn cost_delta(&self, moves: &[Move]) -> f64 {
        let mut keys: SmallVec<[u64; 32]> = SmallVec::new();
        for m in moves {
            if m.old_key == m.new_key && m.old_sym == m.new_sym {
                continue;
            }
            for key in [m.old_key, m.new_key] {
                if !keys.contains(&key) {
                    keys.push(key);
                }
            }
        }
        let mut delta = 0.0;
        let mut column: SmallVec<[i64; 8]> = SmallVec::new();
        for &key in &keys {
            column.clear();
            match self.slots.get(&key) {
                Some(&slot) => {
                    let slot = slot as usize;
                    column.extend(
                        self.counts[slot * self.alphabet..(slot + 1) * self.alphabet]
                            .iter()
                            .map(|&c| c as i64),
                    );
                }
                None => column.resize(self.alphabet, 0),
            }
            let before = self.xlogx.column_cost(column.iter().copied());
            for m in moves {
                if m.old_key == key {
                    column[m.old_sym as usize] -= 1;
                }
                if m.new_key == key {
                    column[m.new_sym as usize] += 1;
                }
            }
            delta += self.xlogx.column_cost(column.iter().copied()) - before;
        }
        delta
    }

    fn apply_moves(&mut self, moves: &[Move], cost_delta: f64) {
        for m in moves {
            if m.old_key == m.new_key && m.old_sym == m.new_sym {
                continue;
            }
            self.decrement(m.old_key, m.old_sym);
            self.increment(m.new_key, m.new_sym);
        }
        self.cost += cost_delta;
    }

    /// Applies `moves` and reports every column whose counts changed.
    fn apply_with_changes(&mut self, moves: &[Move]) -> Vec<ColumnChange> {
        let mut keys: Vec<u64> = Vec::new();
        for m in moves {
            for key in [m.old_key, m.new_key] {
                if !keys.contains(&key) {
                    keys.push(key);
                }
            }
        }
        let zero = vec![0u32; self.alphabet];
        let before: Vec<Vec<u32>> = keys
            .iter()
            .map(|&k| self.column(k).map_or_else(|| zero.clone(), <[u32]>::to_vec))
            .collect();
        let delta = self.cost_delta(moves);
        self.apply_moves(moves, delta);
        keys.into_iter()
            .zip(before)
            .filter_map(|(key, old)| {
                let new = self.column(key).map_or_else(|| zero.clone(), <[u32]>::to_vec);
                (old != new).then_some(ColumnChange {
                    context: key,
                    old,
                    new,
                })
            })
            .collect()
    }
}

fn check_width(alphabet: usize, width: usize) -> Result<()> {
    match (alphabet as u64).checked_pow(width as u32) {
        Some(_) => Ok(()),
        None => Err(StatsError::ContextTooWide { width, alphabet }),
    }
}

/// Counts of `(context, symbol)` pairs for an order-`k` cyclic context model.
#[derive(Debug, Clone)]
pub struct CountMatrix {
    k: usize,
    table: ContextTable,
}

impl CountMatrix {
    pub fn build(y: &Sequence, k: usize) -> Result<Self> {
        let n = y.len();
        if k >= n {
            return Err(StatsError::InvalidOrder { k, k1: 0, n });
        }
        check_width(y.alphabet_size(), k)?;
        let mut table = ContextTable::new(y.alphabet_size(), n);
        for i in 0..n {
            let (key, sym) = Self::key_at(y, k, i, None);
            table.increment(key, sym);
        }
        table.cost = table.fresh_cost();
        Ok(Self { k, table })
    }

    #[inline]
    fn key_at(y: &Sequence, k: usize, i: usize, over: Option<(usize, Symbol)>) -> (u64, Symbol) {
        let i = i as isize;
        (y.pack(i - k as isize, k, over), y.wrapped(i, over))
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn alphabet_size(&self) -> usize {
        self.table.alphabet
    }

    /// Sum of all counts; always `n`.
    pub fn total(&self) -> u64 {
        self.table.total()
    }

    /// Column for a packed context, `None` if the context never occurs.
    pub fn column(&self, context: u64) -> Option<&[u32]> {
        self.table.column(context)
    }

    pub fn occupied(&self) -> impl Iterator<Item = (u64, &[u32])> + '_ {
        self.table.occupied()
    }

    /// Occupied columns keyed by packed context, in key order.
    pub fn to_map(&self) -> BTreeMap<u64, Vec<u32>> {
        self.table.to_map()
    }

    /// `H_k(y)` in bits per symbol, recomputed from the counts.
    pub fn conditional_entropy(&self) -> f64 {
        self.table.entropy()
    }

    /// `H_k(y)` from the incrementally maintained running sum.
    pub(crate) fn running_entropy(&self) -> f64 {
        self.table.cost / self.table.n as f64
    }

    pub(crate) fn resync(&mut self) {
        self.table.cost = self.table.fresh_cost();
    }

    fn moves(&self, y: &Sequence, position: usize, symbol: Symbol) -> MovesBuf {
        let n = y.len();
        let over = Some((position, symbol));
        (0..=self.k)
            .map(|d| {
                let j = (position + d) % n;
                let (old_key, old_sym) = Self::key_at(y, self.k, j, None);
                let (new_key, new_sym) = Self::key_at(y, self.k, j, over);
                Move {
                    old_key,
                    old_sym,
                    new_key,
                    new_sym,
                }
            })
            .collect()
    }

    /// Change of `n·H_k` if `y[position]` became `symbol`.
    pub(crate) fn cost_delta(&self, y: &Sequence, position: usize, symbol: Symbol) -> (f64, MovesBuf) {
        let moves = self.moves(y, position, symbol);
        (self.table.cost_delta(&moves), moves)
    }

    pub(crate) fn commit(&mut self, moves: &[Move], cost_delta: f64) {
        self.table.apply_moves(moves, cost_delta);
    }

    /// Updates the table for `y[position] ← symbol`. `y` is the sequence
    /// *before* the substitution; the caller writes the symbol afterwards.
    pub fn apply_substitution(
        &mut self,
        y: &Sequence,
        position: usize,
        symbol: Symbol,
    ) -> Result<Vec<ColumnChange>> {
        y.check_substitution(position, symbol)?;
        let moves = self.moves(y, position, symbol);
        Ok(self.table.apply_with_changes(&moves))
    }
}

impl PartialEq for CountMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.table.to_map() == other.table.to_map()
    }
}

/// Which of the three sequences a substitution targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Y,
    Z,
    W,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Y, Role::Z, Role::W];
}

/// Counts of `w_i` given `(w_{i-k}^{i-1}, y_{i-k1}^{i+k1}, z_{i-k1}^{i+k1})`.
///
/// Context keys pack the `w`-past, then the `y`-window, then the `z`-window,
/// each oldest-first in base `A`.
#[derive(Debug, Clone)]
pub struct JointCountMatrix {
    k: usize,
    k1: usize,
    table: ContextTable,
}

/// Borrowed `(w, y, z)` triple used for joint context extraction.
#[derive(Debug, Clone, Copy)]
pub struct Triple<'a> {
    pub w: &'a Sequence,
    pub y: &'a Sequence,
    pub z: &'a Sequence,
}

impl<'a> Triple<'a> {
    fn check(&self) -> Result<()> {
        let lens = [self.w.len(), self.y.len(), self.z.len()];
        if lens.iter().any(|&l| l != lens[0]) {
            return Err(StatsError::LengthMismatch(lens.to_vec()));
        }
        let alph = [
            self.w.alphabet_size(),
            self.y.alphabet_size(),
            self.z.alphabet_size(),
        ];
        if alph.iter().any(|&a| a != alph[0]) {
            return Err(StatsError::AlphabetMismatch(alph.to_vec()));
        }
        Ok(())
    }

    fn sequence(&self, role: Role) -> &'a Sequence {
        match role {
            Role::Y => self.y,
            Role::Z => self.z,
            Role::W => self.w,
        }
    }
}

impl JointCountMatrix {
    pub fn build(w: &Sequence, y: &Sequence, z: &Sequence, k: usize, k1: usize) -> Result<Self> {
        let tri = Triple { w, y, z };
        tri.check()?;
        let n = w.len();
        if k1 > k || k >= n || 2 * k1 + 1 > n {
            return Err(StatsError::InvalidOrder { k, k1, n });
        }
        check_width(w.alphabet_size(), k + 2 * (2 * k1 + 1))?;
        let mut table = ContextTable::new(w.alphabet_size(), n);
        for i in 0..n {
            let (key, sym) = Self::key_at(tri, k, k1, i, None);
            table.increment(key, sym);
        }
        table.cost = table.fresh_cost();
        Ok(Self { k, k1, table })
    }

    #[inline]
    fn key_at(
        tri: Triple<'_>,
        k: usize,
        k1: usize,
        i: usize,
        over: Option<(Role, usize, Symbol)>,
    ) -> (u64, Symbol) {
        let pick = |role: Role| match over {
            Some((r, p, s)) if r == role => Some((p, s)),
            _ => None,
        };
        let a = tri.w.alphabet_size() as u64;
        let win = 2 * k1 + 1;
        let scale = a.pow(win as u32);
        let i = i as isize;
        let mut key = tri.w.pack(i - k as isize, k, pick(Role::W));
        key = key * scale + tri.y.pack(i - k1 as isize, win, pick(Role::Y));
        key = key * scale + tri.z.pack(i - k1 as isize, win, pick(Role::Z));
        (key, tri.w.wrapped(i, pick(Role::W)))
    }

    pub fn orders(&self) -> (usize, usize) {
        (self.k, self.k1)
    }

    pub fn alphabet_size(&self) -> usize {
        self.table.alphabet
    }

    pub fn total(&self) -> u64 {
        self.table.total()
    }

    pub fn column(&self, context: u64) -> Option<&[u32]> {
        self.table.column(context)
    }

    pub fn occupied(&self) -> impl Iterator<Item = (u64, &[u32])> + '_ {
        self.table.occupied()
    }

    pub fn to_map(&self) -> BTreeMap<u64, Vec<u32>> {
        self.table.to_map()
    }

    /// `H_{k,k1}(w | y, z)` in bits per symbol.
    pub fn conditional_entropy(&self) -> f64 {
        self.table.entropy()
    }

    pub(crate) fn running_entropy(&self) -> f64 {
        self.table.cost / self.table.n as f64
    }

    pub(crate) fn resync(&mut self) {
        self.table.cost = self.table.fresh_cost();
    }

    fn moves(&self, tri: Triple<'_>, role: Role, position: usize, symbol: Symbol) -> MovesBuf {
        let n = tri.w.len();
        let over = Some((role, position, symbol));
        let positions = |j: usize| -> usize {
            match role {
                // w_i is the predicted symbol at i and part of the past of i+1..=i+k
                Role::W => (position + j) % n,
                // y_i / z_i sit in the centred windows of i-k1..=i+k1
                Role::Y | Role::Z => (position + n * (self.k1 + 1) + j - self.k1) % n,
            }
        };
        let count = match role {
            Role::W => self.k + 1,
            Role::Y | Role::Z => 2 * self.k1 + 1,
        };
        (0..count)
            .map(|j| {
                let p = positions(j);
                let (old_key, old_sym) = Self::key_at(tri, self.k, self.k1, p, None);
                let (new_key, new_sym) = Self::key_at(tri, self.k, self.k1, p, over);
                Move {
                    old_key,
                    old_sym,
                    new_key,
                    new_sym,
                }
            })
            .collect()
    }

    pub(crate) fn cost_delta(
        &self,
        tri: Triple<'_>,
        role: Role,
        position: usize,
        symbol: Symbol,
    ) -> (f64, MovesBuf) {
        let moves = self.moves(tri, role, position, symbol);
        (self.table.cost_delta(&moves), moves)
    }

    pub(crate) fn commit(&mut self, moves: &[Move], cost_delta: f64) {
        self.table.apply_moves(moves, cost_delta);
    }

    /// Updates the table for a substitution in the sequence named by `role`.
    /// The sequences are in their state *before* the substitution.
    pub fn apply_substitution(
        &mut self,
        w: &Sequence,
        y: &Sequence,
        z: &Sequence,
        role: Role,
        position: usize,
        symbol: Symbol,
    ) -> Result<Vec<ColumnChange>> {
        let tri = Triple { w, y, z };
        tri.check()?;
        tri.sequence(role).check_substitution(position, symbol)?;
        let moves = self.moves(tri, role, position, symbol);
        Ok(self.table.apply_with_changes(&moves))
    }
}

impl PartialEq for JointCountMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.k1 == other.k1 && self.table.to_map() == other.table.to_map()
    }
}

/// `H_k(y)`.
pub fn conditional_entropy(counts: &CountMatrix) -> f64 {
    counts.conditional_entropy()
}

/// `H_{k,k1}(w | y, z)`.
pub fn conditional_entropy_joint(counts: &JointCountMatrix) -> f64 {
    counts.conditional_entropy()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(s: &str) -> Sequence {
        Sequence::from_digits(s, 2).unwrap()
    }

    fn random_seq(rng: &mut impl Rng, n: usize, a: usize) -> Sequence {
        Sequence::new((0..n).map(|_| rng.gen_range(0..a) as u8).collect(), a).unwrap()
    }

    /// Direct double loop over positions and contexts.
    fn naive_counts(y: &Sequence, k: usize) -> BTreeMap<u64, Vec<u32>> {
        let a = y.alphabet_size();
        let n = y.len() as isize;
        let mut out = BTreeMap::new();
        for ctx in 0..(a as u64).pow(k as u32) {
            let mut col = vec![0u32; a];
            for i in 0..n {
                let mut key = 0u64;
                for j in (1..=k as isize).rev() {
                    key = key * a as u64 + y.at(i - j) as u64;
                }
                if key == ctx {
                    col[y.at(i) as usize] += 1;
                }
            }
            if col.iter().any(|&c| c > 0) {
                out.insert(ctx, col);
            }
        }
        out
    }

    #[test]
    fn counts_of_0011() {
        let m = CountMatrix::build(&seq("0011"), 1).unwrap();
        assert_eq!(m.column(0), Some(&[1, 1][..]));
        assert_eq!(m.column(1), Some(&[1, 1][..]));
        assert_eq!(m.to_map(), naive_counts(&seq("0011"), 1));
    }

    #[test]
    fn counts_of_constant() {
        let m = CountMatrix::build(&seq("0000"), 2).unwrap();
        assert_eq!(m.to_map().len(), 1);
        assert_eq!(m.column(0), Some(&[4, 0][..]));
        assert_eq!(m.conditional_entropy(), 0.0);
    }

    #[test]
    fn order_must_be_below_length() {
        assert!(matches!(
            CountMatrix::build(&seq("0101"), 4),
            Err(StatsError::InvalidOrder { .. })
        ));
    }

    #[test]
    fn counts_match_naive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let a = rng.gen_range(2..=4);
            let n = rng.gen_range(4..40);
            let k = rng.gen_range(0..4.min(n));
            let y = random_seq(&mut rng, n, a);
            assert_eq!(CountMatrix::build(&y, k).unwrap().to_map(), naive_counts(&y, k));
        }
    }

    #[test]
    fn entropy_functional_values() {
        assert_eq!(entropy_functional(&[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(entropy_functional(&[0.0, 0.0]).unwrap(), 0.0);
        let h = entropy_functional(&[3.0, 1.0]).unwrap();
        let expected = 0.75 * (4.0f64 / 3.0).log2() + 0.25 * 2.0;
        assert!((h - expected).abs() < 1e-15);
        assert!((h - 0.811278).abs() < 1e-6);
        assert!(matches!(
            entropy_functional(&[1.0, -1.0]),
            Err(StatsError::InvalidCounts(_))
        ));
    }

    #[test]
    fn conditional_entropy_examples() {
        for k in 0..3 {
            assert_eq!(CountMatrix::build(&seq("0000"), k).unwrap().conditional_entropy(), 0.0);
        }
        assert!((CountMatrix::build(&seq("0011"), 1).unwrap().conditional_entropy() - 1.0).abs() < 1e-15);
        assert_eq!(CountMatrix::build(&seq("0101"), 1).unwrap().conditional_entropy(), 0.0);
    }

    #[test]
    fn joint_counts_examples() {
        let z = seq("0000");
        let j = JointCountMatrix::build(&z, &z, &z, 1, 0).unwrap();
        assert_eq!(j.to_map().len(), 1);
        assert_eq!(j.to_map().values().next().unwrap(), &vec![4, 0]);

        let w = seq("0101");
        let j = JointCountMatrix::build(&w, &z, &z, 0, 0).unwrap();
        assert_eq!(j.to_map().len(), 1);
        assert_eq!(j.column(0), Some(&[2, 2][..]));
        assert!((j.conditional_entropy() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn joint_entropy_zero_when_w_equals_y() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let y = random_seq(&mut rng, 30, 3);
            let z = random_seq(&mut rng, 30, 3);
            let j = JointCountMatrix::build(&y, &y, &z, 2, 1).unwrap();
            assert!(j.occupied().all(|(_, col)| col.iter().filter(|&&c| c > 0).count() == 1));
            assert_eq!(j.conditional_entropy(), 0.0);
        }
    }

    #[test]
    fn joint_rejects_mismatched_lengths() {
        assert!(matches!(
            JointCountMatrix::build(&seq("0101"), &seq("010"), &seq("0101"), 1, 0),
            Err(StatsError::LengthMismatch(_))
        ));
    }

    #[test]
    fn self_substitution_touches_nothing() {
        let y = seq("0110100111");
        let mut m = CountMatrix::build(&y, 3).unwrap();
        for i in 0..y.len() {
            assert!(m.apply_substitution(&y, i, y.get(i)).unwrap().is_empty());
        }
        let mut j = JointCountMatrix::build(&y, &y, &y, 3, 1).unwrap();
        for role in Role::ALL {
            assert!(j.apply_substitution(&y, &y, &y, role, 4, 1).unwrap().is_empty());
        }
    }

    #[test]
    fn substitution_rejects_bad_input() {
        let y = seq("0110");
        let mut m = CountMatrix::build(&y, 1).unwrap();
        assert!(matches!(
            m.apply_substitution(&y, 4, 0),
            Err(StatsError::PositionOutOfRange { .. })
        ));
        assert!(matches!(
            m.apply_substitution(&y, 0, 2),
            Err(StatsError::SymbolOutOfRange { .. })
        ));
    }

    /// Columns differing between two rebuilt tables.
    fn diff(
        a: &BTreeMap<u64, Vec<u32>>,
        b: &BTreeMap<u64, Vec<u32>>,
        alphabet: usize,
    ) -> BTreeMap<u64, (Vec<u32>, Vec<u32>)> {
        let zero = vec![0; alphabet];
        a.keys()
            .chain(b.keys())
            .filter_map(|k| {
                let x = a.get(k).unwrap_or(&zero);
                let y = b.get(k).unwrap_or(&zero);
                (x != y).then(|| (*k, (x.clone(), y.clone())))
            })
            .collect()
    }

    #[test]
    fn substitution_matches_rebuild_and_diff() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let mut y = random_seq(&mut rng, 32, 2);
            let k = 3;
            let mut m = CountMatrix::build(&y, k).unwrap();
            let before = m.to_map();
            let i = rng.gen_range(0..32);
            let s = rng.gen_range(0..2);
            let changes = m.apply_substitution(&y, i, s).unwrap();
            y.set(i, s).unwrap();
            let rebuilt = CountMatrix::build(&y, k).unwrap();
            assert_eq!(m, rebuilt);
            assert!(changes.len() <= 2 * k + 1);
            let got: BTreeMap<_, _> = changes.into_iter().map(|c| (c.context, (c.old, c.new))).collect();
            assert_eq!(got, diff(&before, &rebuilt.to_map(), 2));
        }
    }

    #[test]
    fn joint_substitution_matches_rebuild_and_diff() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (k, k1) = (3, 1);
        for _ in 0..500 {
            let a = rng.gen_range(2..=3);
            let mut seqs = [0; 3].map(|_| random_seq(&mut rng, 24, a));
            let [w, y, z] = &seqs;
            let mut j = JointCountMatrix::build(w, y, z, k, k1).unwrap();
            let before = j.to_map();
            let role = Role::ALL[rng.gen_range(0..3)];
            let i = rng.gen_range(0..24);
            let s = rng.gen_range(0..a) as u8;
            let changes = j.apply_substitution(w, y, z, role, i, s).unwrap();
            let idx = match role {
                Role::W => 0,
                Role::Y => 1,
                Role::Z => 2,
            };
            seqs[idx].set(i, s).unwrap();
            let [w, y, z] = &seqs;
            let rebuilt = JointCountMatrix::build(w, y, z, k, k1).unwrap();
            assert_eq!(j, rebuilt);
            let positions = if role == Role::W { k + 1 } else { 2 * k1 + 1 };
            assert!(changes.len() <= 2 * positions);
            let got: BTreeMap<_, _> = changes.into_iter().map(|c| (c.context, (c.old, c.new))).collect();
            assert_eq!(got, diff(&before, &rebuilt.to_map(), a));
        }
    }

    #[test]
    fn running_cost_tracks_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut y = random_seq(&mut rng, 64, 3);
        let mut m = CountMatrix::build(&y, 2).unwrap();
        for _ in 0..2000 {
            let i = rng.gen_range(0..64);
            let s = rng.gen_range(0..3);
            let (d, moves) = m.cost_delta(&y, i, s);
            m.commit(&moves, d);
            y.set(i, s).unwrap();
        }
        assert!((m.running_entropy() - CountMatrix::build(&y, 2).unwrap().conditional_entropy()).abs() < 1e-9);
    }
}
