//! Seedable generators for distributions, joints, subgroups and linear maps.
//!
//! Random weights are normalized standard exponentials, i.e. a flat
//! Dirichlet draw over a uniformly chosen support of prescribed size.

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dist::Dist;
use crate::error::{PfrError, Result};
use crate::group::{check_dim, group_size, GroupElem, LinearMap, SubgroupBasis};
use crate::joint::{JointDist, MAX_ARITY};

pub type PfrRng = ChaCha8Rng;

pub const DEFAULT_LABELS: [&str; MAX_ARITY] = ["X", "Y", "Z", "W"];

pub fn rng_from_seed(seed: u64) -> PfrRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for the `index`-th instance of a batch, so that instances can be
/// generated independently and in parallel.
pub fn instance_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// `k` positive weights summing to one.
pub fn exponential_weights<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..k)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln() + 1e-12)
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// `k` distinct values below `bound`, ascending.
pub fn distinct_values<R: Rng>(rng: &mut R, bound: u64, k: usize) -> Vec<u64> {
    let mut v: Vec<u64> = if bound <= usize::MAX as u64 && (bound as usize) <= (1 << 26) {
        sample(rng, bound as usize, k)
            .into_iter()
            .map(|i| i as u64)
            .collect()
    } else {
        let mut set = std::collections::BTreeSet::new();
        while set.len() < k {
            set.insert(rng.gen_range(0..bound));
        }
        set.into_iter().collect()
    };
    v.sort_unstable();
    v
}

/// Random distribution on F_2^n with exactly `support` atoms.
pub fn random_dist<R: Rng>(rng: &mut R, n: u32, support: usize) -> Result<Dist> {
    check_dim(n)?;
    let size = group_size(n);
    if support == 0 || support > size {
        return Err(PfrError::InvalidParameter(format!(
            "support size {support} outside 1..={size}"
        )));
    }
    let atoms = distinct_values(rng, size as u64, support);
    let weights = exponential_weights(rng, support);
    Dist::from_entries(n, atoms.into_iter().map(|a| a as GroupElem).zip(weights))
}

/// Random distribution with a support size drawn uniformly from `1..=2^n`.
pub fn random_dist_any_support<R: Rng>(rng: &mut R, n: u32) -> Result<Dist> {
    check_dim(n)?;
    let support = rng.gen_range(1..=group_size(n));
    random_dist(rng, n, support)
}

/// Uniform distribution on a random subset of the given size.
pub fn random_uniform<R: Rng>(rng: &mut R, n: u32, size: usize) -> Result<Dist> {
    check_dim(n)?;
    if size == 0 || size > group_size(n) {
        return Err(PfrError::InvalidParameter(format!(
            "set size {size} outside 1..={}",
            group_size(n)
        )));
    }
    let atoms: Vec<GroupElem> = distinct_values(rng, group_size(n) as u64, size)
        .into_iter()
        .map(|a| a as GroupElem)
        .collect();
    Dist::uniform_on(&atoms, n)
}

/// Random joint distribution of the given arity with `support` atoms.
pub fn random_joint<R: Rng>(
    rng: &mut R,
    n: u32,
    arity: usize,
    support: usize,
) -> Result<JointDist> {
    if arity == 0 || arity > MAX_ARITY {
        return Err(PfrError::InvalidParameter(format!(
            "arity {arity} outside 1..={MAX_ARITY}"
        )));
    }
    check_dim(n)?;
    let bits = n as usize * arity;
    if bits > 63 {
        return Err(PfrError::InvalidParameter("joint too wide".into()));
    }
    let cells = 1u64 << bits;
    if support == 0 || support as u64 > cells {
        return Err(PfrError::InvalidParameter(format!(
            "support size {support} outside 1..={cells}"
        )));
    }
    let keys = distinct_values(rng, cells, support);
    let weights = exponential_weights(rng, support);
    JointDist::from_keyed(
        n,
        DEFAULT_LABELS[..arity]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        keys.into_iter().zip(weights),
    )
}

/// Random subgroup of F_2^n of exactly the given rank.
pub fn random_subgroup<R: Rng>(rng: &mut R, n: u32, rank: usize) -> Result<SubgroupBasis> {
    let mut h = SubgroupBasis::trivial(n)?;
    if rank > n as usize {
        return Err(PfrError::RankTooLarge(rank));
    }
    while h.rank() < rank {
        let x = rng.gen_range(0..group_size(n)) as GroupElem;
        h.insert(x)?;
    }
    Ok(h)
}

/// Uniformly random linear map `F_2^in -> F_2^out`.
pub fn random_linear_map<R: Rng>(rng: &mut R, in_dim: u32, out_dim: u32) -> Result<LinearMap> {
    check_dim(out_dim)?;
    let images = (0..in_dim)
        .map(|_| rng.gen_range(0..group_size(out_dim)) as GroupElem)
        .collect();
    LinearMap::new(in_dim, out_dim, images)
}

/// Random surjective linear map; requires `out_dim <= in_dim`.
pub fn random_surjection<R: Rng>(rng: &mut R, in_dim: u32, out_dim: u32) -> Result<LinearMap> {
    if out_dim > in_dim {
        return Err(PfrError::InvalidParameter(format!(
            "no surjection from F_2^{in_dim} onto F_2^{out_dim}"
        )));
    }
    loop {
        let map = random_linear_map(rng, in_dim, out_dim)?;
        if map.image()?.rank() == out_dim as usize {
            return Ok(map);
        }
    }
}

/// Each element kept independently with probability `density`; never empty.
pub fn random_subset<R: Rng>(rng: &mut R, set: &[GroupElem], density: f64) -> Vec<GroupElem> {
    loop {
        let kept: Vec<GroupElem> = set
            .iter()
            .copied()
            .filter(|_| rng.gen::<f64>() < density)
            .collect();
        if !kept.is_empty() || set.is_empty() {
            return kept;
        }
    }
}
