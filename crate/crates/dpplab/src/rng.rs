//! Seeded random streams. Each (seed, replica) pair gets its own ChaCha stream,
//! so Monte Carlo results do not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

pub type Rng = ChaCha12Rng;

pub fn stream(seed: u64, replica: u64) -> Rng {
    let mut r = Rng::seed_from_u64(seed);
    r.set_stream(replica);
    r
}

/// Seed of one subcommand's randomness: splitmix64 of the root seed xor an FNV-1a hash of the tag.
/// Replica `i` then draws from `stream(derive_seed(root, tag), i)`.
pub fn derive_seed(root: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = (root ^ h).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Run `f` on `count` independent replicas in parallel; results come back in replica order.
pub fn replicas<T, F>(seed: u64, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Rng, usize) -> T + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut r = stream(seed, i as u64);
            f(&mut r, i)
        })
        .collect()
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (v / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map({
            let mut r = stream(7, 3);
            move |_| r.random()
        }).collect();
        let b: Vec<u64> = (0..4).map({
            let mut r = stream(7, 3);
            move |_| r.random()
        }).collect();
        let mut c = stream(7, 4);
        assert_eq!(a, b);
        assert_ne!(a[0], c.random::<u64>());
    }

    #[test]
    fn replicas_keep_order() {
        let v = replicas(1, 100, |r, i| (i, r.random::<u32>()));
        let w = replicas(1, 100, |r, i| (i, r.random::<u32>()));
        assert_eq!(v, w);
        assert!(v.iter().enumerate().all(|(k, (i, _))| k == *i));
    }

    #[test]
    fn derived_seeds_separate_tags() {
        assert_eq!(derive_seed(7, "relaxation"), derive_seed(7, "relaxation"));
        assert_ne!(derive_seed(7, "relaxation"), derive_seed(7, "dsp-check"));
        assert_ne!(derive_seed(7, "relaxation"), derive_seed(8, "relaxation"));
    }
}
