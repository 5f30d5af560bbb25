//! Small shared utilities: deterministic seed derivation and basic statistics.

/// One round of the splitmix64 mixer.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives an independent child seed from `base` and a sequence of tags.
///
/// Used everywhere a reproducible sub-stream is needed (replicates, folds,
/// restarts, noise components). The chain is platform-independent, so equal
/// inputs give byte-identical downstream output on every target.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(base ^ 0xa076_1d64_78bd_642f);
    for &t in tags {
        s = splitmix64(s ^ splitmix64(t));
    }
    s
}

/// Arithmetic mean; 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 when fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Splits `0..n` into `k` contiguous-in-shuffled-order folds after a seeded
/// shuffle. Returns per-fold index lists; fold sizes differ by at most one.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = crate::util::rng_from_seed(seed);
    idx.shuffle(&mut rng);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, ix) in idx.into_iter().enumerate() {
        folds[i % k].push(ix);
    }
    folds
}

/// The crate-wide deterministic generator: ChaCha8 seeded from a `u64`.
pub fn rng_from_seed(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
