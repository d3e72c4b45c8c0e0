//! From a set with small doubling to an explicit cover by cosets of a
//! subgroup no larger than the set.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descent::{entropic_pfr, extract_subgroup, PfrConfig};
use crate::dist::Dist;
use crate::error::{PfrError, Result};
use crate::group::{group_size, GroupElem, SubgroupBasis};
use crate::io::SetInput;
use crate::ruzsa::{rdist, DEFAULT_ETA};

pub const DEFAULT_C_EXPONENT: f64 = 12.0;
/// Tolerance of the check `d[U_A;U_A] <= log K`.
pub const BRIDGE_TOL: f64 = 1e-10;

struct Bitset(Vec<u64>);

impl Bitset {
    fn new(bits: usize) -> Self {
        Self(vec![0; bits.div_ceil(64)])
    }

    fn get(&self, i: GroupElem) -> bool {
        (self.0[i as usize / 64] >> (i % 64)) & 1 == 1
    }

    fn set(&mut self, i: GroupElem) {
        self.0[i as usize / 64] |= 1 << (i % 64);
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn union(mut self, other: Self) -> Self {
        self.0.iter_mut().zip(other.0).for_each(|(a, b)| *a |= b);
        self
    }
}

/// `A + A` by exhaustive pair enumeration.
pub fn sumset(a: &SetInput) -> Vec<GroupElem> {
    let size = group_size(a.ambient_dim);
    let bits = a
        .elements
        .par_iter()
        .fold(
            || Bitset::new(size),
            |mut acc, &x| {
                for &y in &a.elements {
                    acc.set(x ^ y);
                }
                acc
            },
        )
        .reduce(|| Bitset::new(size), Bitset::union);
    (0..size as GroupElem).filter(|&x| bits.get(x)).collect()
}

/// `|A + A| / |A|`.
pub fn doubling_constant(a: &SetInput) -> f64 {
    sumset(a).len() as f64 / a.len() as f64
}

/// The shift `x0` maximizing `|A ∩ (H + x0)|`, smallest on ties, with the
/// overlap.
pub fn best_shift(a: &SetInput, h: &SubgroupBasis) -> Result<(GroupElem, usize)> {
    if h.ambient_dim() != a.ambient_dim {
        return Err(PfrError::DimensionMismatch {
            expected: a.ambient_dim,
            found: h.ambient_dim(),
        });
    }
    let mut counts = std::collections::BTreeMap::new();
    for &x in &a.elements {
        *counts.entry(h.reduce(x)).or_insert(0usize) += 1;
    }
    // The canonical representative is the smallest member of its coset, and
    // the map iterates representatives in increasing order.
    let (rep, overlap) = counts.into_iter().fold(
        (0, 0),
        |best, (r, c)| if c > best.1 { (r, c) } else { best },
    );
    Ok((rep, overlap))
}

/// Greedy maximal packing: `a` is kept when `a + S` misses every kept
/// `a_i + S`. Then `A` lies in the union of the `a_i + S + S`.
pub fn ruzsa_cover(a: &SetInput, s: &[GroupElem]) -> Result<Vec<GroupElem>> {
    if s.is_empty() {
        return Err(PfrError::Empty);
    }
    let members: HashSet<GroupElem> = a.elements.iter().copied().collect();
    if let Some(&x) = s.iter().find(|x| !members.contains(x)) {
        return Err(PfrError::InvalidParameter(format!(
            "{x:#x} is in S but not in A"
        )));
    }
    let mut covered = Bitset::new(group_size(a.ambient_dim));
    let mut kept = Vec::new();
    for &x in &a.elements {
        if s.iter().all(|&y| !covered.get(x ^ y)) {
            s.iter().for_each(|&y| covered.set(x ^ y));
            kept.push(x);
        }
    }
    Ok(kept)
}

/// Every element of `A` lies in some `t + H`.
pub fn verify_cover(a: &SetInput, h: &SubgroupBasis, translates: &[GroupElem]) -> bool {
    let reps: HashSet<GroupElem> = translates.iter().map(|&t| h.reduce(t)).collect();
    a.elements.iter().all(|&x| reps.contains(&h.reduce(x)))
}

/// The translates `a + S` are pairwise disjoint.
pub fn verify_packing(a: &SetInput, s: &[GroupElem], kept: &[GroupElem]) -> bool {
    let mut seen = Bitset::new(group_size(a.ambient_dim));
    let mut total = 0;
    for &x in kept {
        for &y in s {
            seen.set(x ^ y);
            total += 1;
        }
    }
    seen.count() == total
}

/// `d[U_A;U_A] <= log K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropicBridge {
    pub d_aa: f64,
    pub log_k: f64,
    pub holds: bool,
}

pub fn entropic_bridge(a: &SetInput) -> Result<EntropicBridge> {
    let u = a.uniform()?;
    let d_aa = rdist(&u, &u)?;
    let log_k = doubling_constant(a).ln();
    Ok(EntropicBridge {
        d_aa,
        log_k,
        holds: d_aa <= log_k + BRIDGE_TOL,
    })
}

#[derive(Clone, Debug)]
pub struct CoverConfig {
    pub pfr: PfrConfig,
    pub eta: f64,
    pub c_exponent: f64,
}

impl Default for CoverConfig {
    fn default() -> Self {
        Self {
            pfr: PfrConfig::default(),
            eta: DEFAULT_ETA,
            c_exponent: DEFAULT_C_EXPONENT,
        }
    }
}

/// Cosets `t + H'` covering `A`, with the checks
/// `|translates| <= 2 K^C`, `|H'| <= |A|` and exact membership.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosetCover {
    pub subgroup: SubgroupBasis,
    pub translates: Vec<GroupElem>,
    pub doubling: f64,
    pub c_exponent: f64,
    pub translate_bound: f64,
    pub certified: bool,
    pub set_size: usize,
    pub subgroup_size: u64,
    pub cover_verified: bool,
    /// Subgroup found by the descent, before shrinking.
    pub entropic_subgroup: SubgroupBasis,
    pub shift: GroupElem,
    pub overlap: usize,
    pub packing: usize,
    pub packing_verified: bool,
    pub bridge: EntropicBridge,
    pub descent_converged: bool,
    pub descent_steps: usize,
    pub final_distance: f64,
    /// Which state the subgroup was read from: `final`, `history-<i>` or `initial`.
    pub source: String,
}

/// Cover of `A` by cosets of `H` (shrunk below `|A|` when necessary).
pub fn cover_from_subgroup(
    a: &SetInput,
    h: &SubgroupBasis,
) -> Result<(SubgroupBasis, Vec<GroupElem>, GroupElem, usize, usize, bool)> {
    let (x0, overlap) = best_shift(a, h)?;
    let s: Vec<GroupElem> = a
        .elements
        .iter()
        .copied()
        .filter(|&x| h.reduce(x) == x0)
        .collect();
    let kept = ruzsa_cover(a, &s)?;
    let packing_ok = verify_packing(a, &s, &kept);
    let (hp, translates) = if h.size() > a.len() as u64 {
        let hp = h.shrink_to_size(a.len() as u64);
        let extra = SubgroupBasis::span(h.complement_rows(&hp), a.ambient_dim)?.enumerate()?;
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for &t in &kept {
            for &c in &extra {
                if seen.insert(hp.reduce(t ^ c)) {
                    out.push(t ^ c);
                }
            }
        }
        out.sort_unstable();
        (hp, out)
    } else {
        (h.clone(), kept.clone())
    };
    Ok((hp, translates, x0, overlap, kept.len(), packing_ok))
}

pub fn pfr_pipeline(a: &SetInput, cfg: &CoverConfig) -> Result<CosetCover> {
    let u = a.uniform()?;
    let doubling = doubling_constant(a);
    let bridge = entropic_bridge(a)?;
    let translate_bound = 2.0 * doubling.powf(cfg.c_exponent);

    let mut pfr_cfg = cfg.pfr.clone();
    pfr_cfg.descent.keep_history = true;
    let run = entropic_pfr(&u, &u, cfg.eta, &pfr_cfg)?;
    let state = &run.state;

    let mut sources: Vec<(String, Dist)> = vec![("final".into(), state.x1.clone())];
    if !state.converged {
        sources.push(("final-x2".into(), state.x2.clone()));
        for (i, (h1, h2)) in state.history.iter().enumerate().rev() {
            sources.push((format!("history-{i}"), h1.clone()));
            sources.push((format!("history-{i}-x2"), h2.clone()));
        }
        sources.push(("initial".into(), u.clone()));
    }

    let mut best: Option<CosetCover> = None;
    for (source, x) in sources {
        let fit = extract_subgroup(&x, pfr_cfg.theta)?;
        let (hp, translates, shift, overlap, packing, packing_verified) =
            cover_from_subgroup(a, &fit.subgroup)?;
        let cover_verified = verify_cover(a, &hp, &translates);
        let subgroup_size = hp.size();
        let certified = cover_verified
            && subgroup_size <= a.len() as u64
            && translates.len() as f64 <= translate_bound;
        let cover = CosetCover {
            subgroup: hp,
            translates,
            doubling,
            c_exponent: cfg.c_exponent,
            translate_bound,
            certified,
            set_size: a.len(),
            subgroup_size,
            cover_verified,
            entropic_subgroup: fit.subgroup,
            shift,
            overlap,
            packing,
            packing_verified,
            bridge: bridge.clone(),
            descent_converged: state.converged,
            descent_steps: state.trace.len(),
            final_distance: state.k,
            source,
        };
        let better = match &best {
            None => true,
            Some(b) => {
                (cover.certified && !b.certified)
                    || (cover.certified == b.certified
                        && cover.translates.len() < b.translates.len())
            }
        };
        if better {
            best = Some(cover);
        }
    }
    best.ok_or(PfrError::Empty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_subgroup, random_subset, random_uniform, rng_from_seed};

    fn set(n: u32, e: &[GroupElem]) -> SetInput {
        SetInput::new(n, e.to_vec()).unwrap()
    }

    #[test]
    fn doubling_examples() {
        let h = SubgroupBasis::span([0b0011, 0b0101], 4).unwrap();
        let hs = SetInput::new(4, h.enumerate().unwrap()).unwrap();
        assert_eq!(doubling_constant(&hs), 1.0);
        let coset = SetInput::new(
            4,
            h.enumerate().unwrap().into_iter().map(|x| x ^ 8).collect(),
        )
        .unwrap();
        assert_eq!(doubling_constant(&coset), 1.0);
        // A + A = F_2^2 by enumerating the nine pairs.
        let a = set(2, &[0, 1, 2]);
        let mut pairs: Vec<GroupElem> = [0, 1, 2]
            .iter()
            .flat_map(|x| [0, 1, 2].map(|y| x ^ y))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        assert_eq!(sumset(&a), pairs);
        assert!((doubling_constant(&a) - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn best_shift_matches_scan() {
        let mut rng = rng_from_seed(9);
        for _ in 0..20 {
            let h = random_subgroup(&mut rng, 6, 2).unwrap();
            let a = SetInput::new(6, random_uniform(&mut rng, 6, 20).unwrap().support()).unwrap();
            let (x0, overlap) = best_shift(&a, &h).unwrap();
            let score = |x: GroupElem| a.elements.iter().filter(|&&y| h.contains(x ^ y)).count();
            let scan_best = (0..64).map(score).max().unwrap();
            let scan_x = (0..64).find(|&x| score(x) == scan_best).unwrap();
            assert_eq!((x0, overlap), (scan_x, scan_best));
        }
        let h = SubgroupBasis::span([1, 2], 3).unwrap();
        assert_eq!(best_shift(&set(3, &[0, 3]), &h).unwrap(), (0, 2));
        assert_eq!(best_shift(&set(3, &[5, 6]), &h).unwrap(), (4, 2));
    }

    #[test]
    fn packing_examples() {
        let h = SubgroupBasis::span([1, 2], 4).unwrap();
        let hs = h.enumerate().unwrap();
        let a = SetInput::new(4, hs.clone()).unwrap();
        assert_eq!(ruzsa_cover(&a, &hs).unwrap(), vec![0]);
        let mut two = hs.clone();
        two.extend(hs.iter().map(|x| x ^ 8));
        let a2 = SetInput::new(4, two).unwrap();
        assert_eq!(ruzsa_cover(&a2, &hs).unwrap().len(), 2);
        assert!(ruzsa_cover(&a2, &[]).is_err());
        assert!(ruzsa_cover(&a, &[8]).is_err());
    }

    #[test]
    fn random_packing_covers() {
        let mut rng = rng_from_seed(12);
        for _ in 0..10 {
            let h = random_subgroup(&mut rng, 6, 3).unwrap();
            let a = SetInput::new(6, random_uniform(&mut rng, 6, 24).unwrap().support()).unwrap();
            let (x0, _) = best_shift(&a, &h).unwrap();
            let s: Vec<GroupElem> = a
                .elements
                .iter()
                .copied()
                .filter(|&x| h.reduce(x) == x0)
                .collect();
            let kept = ruzsa_cover(&a, &s).unwrap();
            assert!(verify_packing(&a, &s, &kept));
            assert!(verify_cover(&a, &h, &kept));
            let a_plus_s: HashSet<GroupElem> = a
                .elements
                .iter()
                .flat_map(|x| s.iter().map(move |y| x ^ y))
                .collect();
            assert!(kept.len() <= a_plus_s.len() / s.len());
        }
    }

    #[test]
    fn subgroup_pipeline() {
        let h = SubgroupBasis::span([0b000011, 0b001100], 6).unwrap();
        let a = SetInput::new(6, h.enumerate().unwrap()).unwrap();
        let c = pfr_pipeline(&a, &CoverConfig::default()).unwrap();
        assert!(c.certified && c.cover_verified);
        assert_eq!(c.subgroup, h);
        assert_eq!(c.translates, vec![0]);
        assert_eq!(c.doubling, 1.0);
        assert!(c.bridge.holds);
    }

    #[test]
    fn subsampled_subgroup_pipeline() {
        let mut rng = rng_from_seed(2);
        let h = random_subgroup(&mut rng, 6, 4).unwrap();
        let a = SetInput::new(6, random_subset(&mut rng, &h.enumerate().unwrap(), 0.5)).unwrap();
        let c = pfr_pipeline(&a, &CoverConfig::default()).unwrap();
        assert!(c.certified);
        assert!(c.subgroup_size <= a.len() as u64);
        assert!(c.packing_verified);
    }
}
