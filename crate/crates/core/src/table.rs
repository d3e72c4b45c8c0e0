//! Weight storage shared by [`Dist`](crate::dist::Dist) and
//! [`JointDist`](crate::joint::JointDist).
//!
//! A table is either a dense vector indexed by key or a sorted list of
//! `(key, weight)` pairs holding positive weights only. Both forms iterate
//! their positive entries in ascending key order, so every reduction over a
//! table performs the same floating-point operations in the same order
//! whichever form is in use.

use std::collections::BTreeMap;

/// Tables up to this many key bits are always stored densely.
const ALWAYS_DENSE_BITS: u32 = 12;
/// Tables above this many key bits are never stored densely.
pub const MAX_DENSE_BITS: u32 = 24;
/// Scratch accumulation into a dense buffer is used up to this many bits.
const SCRATCH_DENSE_BITS: u32 = 22;

#[derive(Clone, Debug)]
pub enum Table {
    Dense(Vec<f64>),
    Sparse(Vec<(u64, f64)>),
}

/// Storage rule: small tables are dense; large tables are dense only when at
/// least one slot in eight is occupied.
pub fn prefer_dense(bits: u32, nnz: usize) -> bool {
    bits <= ALWAYS_DENSE_BITS
        || (bits <= MAX_DENSE_BITS && nnz.saturating_mul(8) >= (1usize << bits))
}

impl Table {
    /// Builds a table from (key, weight) contributions, summing duplicates.
    /// Non-positive totals are dropped.
    pub fn accumulate<I>(bits: u32, entries: I) -> Table
    where
        I: IntoIterator<Item = (u64, f64)>,
    {
        let iter = entries.into_iter();
        let (lower, _) = iter.size_hint();
        if bits <= SCRATCH_DENSE_BITS && (1usize << bits) <= (16 * lower).max(1 << 16) {
            let mut dense = vec![0.0; 1usize << bits];
            for (k, w) in iter {
                dense[k as usize] += w;
            }
            Table::Dense(dense).normalized_form(bits)
        } else {
            let mut map: BTreeMap<u64, f64> = BTreeMap::new();
            for (k, w) in iter {
                *map.entry(k).or_insert(0.0) += w;
            }
            let sparse: Vec<(u64, f64)> = map.into_iter().filter(|&(_, w)| w > 0.0).collect();
            Table::Sparse(sparse).normalized_form(bits)
        }
    }

    /// Re-encodes the table in the form chosen by [`prefer_dense`].
    pub fn normalized_form(self, bits: u32) -> Table {
        let nnz = self.nnz();
        if prefer_dense(bits, nnz) {
            self.into_dense(bits)
        } else {
            self.into_sparse()
        }
    }

    pub fn into_dense(self, bits: u32) -> Table {
        match self {
            Table::Dense(mut v) => {
                for w in v.iter_mut() {
                    if !(*w > 0.0) {
                        *w = 0.0;
                    }
                }
                Table::Dense(v)
            }
            Table::Sparse(entries) => {
                let mut v = vec![0.0; 1usize << bits];
                for (k, w) in entries {
                    v[k as usize] = w;
                }
                Table::Dense(v)
            }
        }
    }

    pub fn into_sparse(self) -> Table {
        match self {
            Table::Dense(v) => Table::Sparse(
                v.into_iter()
                    .enumerate()
                    .filter(|&(_, w)| w > 0.0)
                    .map(|(k, w)| (k as u64, w))
                    .collect(),
            ),
            s => s,
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, Table::Dense(_))
    }

    pub fn nnz(&self) -> usize {
        match self {
            Table::Dense(v) => v.iter().filter(|&&w| w > 0.0).count(),
            Table::Sparse(e) => e.len(),
        }
    }

    /// Positive entries in ascending key order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = (u64, f64)> + '_> {
        match self {
            Table::Dense(v) => Box::new(
                v.iter()
                    .enumerate()
                    .filter(|&(_, &w)| w > 0.0)
                    .map(|(k, &w)| (k as u64, w)),
            ),
            Table::Sparse(e) => Box::new(e.iter().copied()),
        }
    }

    pub fn get(&self, key: u64) -> f64 {
        match self {
            Table::Dense(v) => v.get(key as usize).copied().unwrap_or(0.0),
            Table::Sparse(e) => e
                .binary_search_by_key(&key, |&(k, _)| k)
                .map(|i| e[i].1)
                .unwrap_or(0.0),
        }
    }

    pub fn total(&self) -> f64 {
        self.iter().map(|(_, w)| w).sum()
    }

    pub fn max_weight(&self) -> f64 {
        self.iter().map(|(_, w)| w).fold(0.0, f64::max)
    }

    pub fn scale(&mut self, factor: f64) {
        match self {
            Table::Dense(v) => v.iter_mut().for_each(|w| *w *= factor),
            Table::Sparse(e) => e.iter_mut().for_each(|(_, w)| *w *= factor),
        }
    }

    /// Zeroes every weight at or below `threshold`.
    pub fn drop_below(&mut self, threshold: f64) {
        match self {
            Table::Dense(v) => v.iter_mut().for_each(|w| {
                if *w <= threshold {
                    *w = 0.0
                }
            }),
            Table::Sparse(e) => e.retain(|&(_, w)| w > threshold),
        }
    }
}

/// Shannon entropy in nats of a (normalized) weight stream. Entries at or
/// below `1e-15 * max` are treated as zero.
pub fn entropy_of_weights<I>(weights: I, max: f64) -> f64
where
    I: Iterator<Item = f64>,
{
    let floor = 1e-15 * max;
    weights
        .filter(|&p| p > floor)
        .map(|p| -p * p.ln())
        .sum::<f64>()
        .max(0.0)
}
