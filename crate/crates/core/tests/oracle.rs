//! Cross-checks against a deliberately naive reimplementation: contexts as
//! symbol vectors, probabilities as f64 ratios, no incremental state.

use std::collections::HashMap;

use mdsa::energy::compute_energy;
use mdsa::stats::{conditional_entropy_joint, CountMatrix, JointCountMatrix};
use mdsa::{exhaustive_minimize, DistortionMeasure, LagrangianWeights, Sequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cyc(s: &[u8], i: isize) -> u8 {
    s[i.rem_euclid(s.len() as isize) as usize]
}

fn entropy_of(columns: HashMap<Vec<u8>, Vec<u64>>, n: usize) -> f64 {
    let mut h = 0.0;
    for col in columns.values() {
        let total: u64 = col.iter().sum();
        for &c in col.iter().filter(|&&c| c > 0) {
            let p = c as f64 / total as f64;
            h -= total as f64 / n as f64 * p * p.log2();
        }
    }
    h
}

fn naive_hk(y: &[u8], a: usize, k: usize) -> f64 {
    let mut cols: HashMap<Vec<u8>, Vec<u64>> = HashMap::new();
    for i in 0..y.len() as isize {
        let ctx: Vec<u8> = (1..=k as isize).map(|j| cyc(y, i - j)).collect();
        cols.entry(ctx).or_insert_with(|| vec![0; a])[y[i as usize] as usize] += 1;
    }
    entropy_of(cols, y.len())
}

fn naive_hkk1(w: &[u8], y: &[u8], z: &[u8], a: usize, k: usize, k1: usize) -> f64 {
    let mut cols: HashMap<Vec<u8>, Vec<u64>> = HashMap::new();
    let k1 = k1 as isize;
    for i in 0..w.len() as isize {
        let mut ctx: Vec<u8> = (1..=k as isize).map(|j| cyc(w, i - j)).collect();
        ctx.extend((-k1..=k1).map(|j| cyc(y, i + j)));
        ctx.extend((-k1..=k1).map(|j| cyc(z, i + j)));
        cols.entry(ctx).or_insert_with(|| vec![0; a])[w[i as usize] as usize] += 1;
    }
    entropy_of(cols, w.len())
}

fn hamming(x: &[u8], y: &[u8]) -> f64 {
    x.iter().zip(y).filter(|(a, b)| a != b).count() as f64 / x.len() as f64
}

fn naive_energy(x: &[u8], t: [&[u8]; 3], wts: &LagrangianWeights, k: usize, k1: usize) -> f64 {
    let [y, z, w] = t;
    wts.gamma1 * naive_hk(y, 2, k)
        + wts.gamma2 * naive_hk(z, 2, k)
        + wts.gamma0 * naive_hkk1(w, y, z, 2, k, k1)
        + wts.alpha1 * hamming(x, y)
        + wts.alpha2 * hamming(x, z)
        + wts.alpha0 * hamming(x, w)
}

fn seq(s: &[u8], a: usize) -> Sequence {
    Sequence::new(s.to_vec(), a).unwrap()
}

/// Minimum energy over all 2^12 triples for x = 0011, k = 1, k1 = 0, unit
/// weights, Hamming distortion.
const FIXTURE_MINIMUM: f64 = 1.0;

#[test]
fn fixture_x0011_exhaustive_minimum() {
    let x = [0u8, 0, 1, 1];
    let wts = LagrangianWeights::unit();
    let d = DistortionMeasure::hamming(2);
    let xs = seq(&x, 2);
    let mut best = (f64::INFINITY, 0u32);
    for m in 0..1u32 << 12 {
        let bits: Vec<u8> = (0..12).rev().map(|b| (m >> b & 1) as u8).collect();
        let (y, z, w) = (&bits[..4], &bits[4..8], &bits[8..]);
        let naive = naive_energy(&x, [y, z, w], &wts, 1, 0);
        let lib = compute_energy(&xs, &seq(y, 2), &seq(z, 2), &seq(w, 2), &wts, &d, 1, 0)
            .unwrap()
            .total;
        assert!((naive - lib).abs() < 1e-12, "triple {m:012b}: {naive} vs {lib}");
        if naive < best.0 - 1e-12 {
            best = (naive, m);
        }
    }
    assert!((best.0 - FIXTURE_MINIMUM).abs() < 1e-12, "minimum {}", best.0);
    let min = exhaustive_minimize(&xs, &wts, &d, 1, 0).unwrap();
    assert!((min.energy.total - FIXTURE_MINIMUM).abs() < 1e-12);
    let check = naive_energy(&x, [min.y.symbols(), min.z.symbols(), min.w.symbols()], &wts, 1, 0);
    assert!((check - FIXTURE_MINIMUM).abs() < 1e-12);
}

#[test]
fn library_entropies_match_naive_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let a = rng.gen_range(2..=4);
        let n = rng.gen_range(3..60);
        let k = rng.gen_range(0..n.min(5));
        let k1 = rng.gen_range(0..=k.min((n - 1) / 2));
        let draw = |rng: &mut ChaCha8Rng| -> Vec<u8> {
            (0..n).map(|_| rng.gen_range(0..a) as u8).collect()
        };
        let (y, z, w) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let hk = CountMatrix::build(&seq(&y, a), k).unwrap().conditional_entropy();
        assert!((hk - naive_hk(&y, a, k)).abs() < 1e-12);
        let joint = JointCountMatrix::build(&seq(&w, a), &seq(&y, a), &seq(&z, a), k, k1).unwrap();
        let naive = naive_hkk1(&w, &y, &z, a, k, k1);
        assert!((conditional_entropy_joint(&joint) - naive).abs() < 1e-12, "n={n} k={k} k1={k1}");
    }
}

#[test]
fn exhaustive_agrees_with_naive_search_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = DistortionMeasure::hamming(2);
    for _ in 0..3 {
        let x: Vec<u8> = (0..4).map(|_| rng.gen_range(0..2)).collect();
        let mut r = || rng.gen_range(0.0..2.0);
        let wts = LagrangianWeights::new(r(), r(), r(), r(), r(), r()).unwrap();
        let naive_min = (0..1u32 << 12)
            .map(|m| {
                let bits: Vec<u8> = (0..12).rev().map(|b| (m >> b & 1) as u8).collect();
                naive_energy(&x, [&bits[..4], &bits[4..8], &bits[8..]], &wts, 1, 0)
            })
            .fold(f64::INFINITY, f64::min);
        let lib = exhaustive_minimize(&seq(&x, 2), &wts, &d, 1, 0).unwrap();
        assert!((lib.energy.total - naive_min).abs() < 1e-12);
    }
}
