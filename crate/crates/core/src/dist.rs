//! Probability distributions on F_2^n.

use std::collections::BTreeSet;

use crate::error::{PfrError, Result};
use crate::group::{check_dim, check_elem, group_size, GroupElem, LinearMap, SubgroupBasis};
use crate::table::{entropy_of_weights, Table};
use crate::wht;

/// Pre-clamp deviations of a WHT convolution above this are reported.
pub const CLAMP_REPORT_THRESHOLD: f64 = 1e-9;

/// A probability distribution on F_2^n, dense or sparse.
#[derive(Clone, Debug)]
pub struct Dist {
    dim: u32,
    table: Table,
}

/// Result of a convolution together with the round-off that had to be clamped.
#[derive(Clone, Debug)]
pub struct Convolution {
    pub dist: Dist,
    /// Largest magnitude of a negative or sub-threshold entry zeroed after the
    /// inverse transform (0 for the pair-enumeration path).
    pub clamp_deviation: f64,
    pub used_transform: bool,
}

impl Convolution {
    pub fn deviation_exceeds_report_threshold(&self) -> bool {
        self.clamp_deviation > CLAMP_REPORT_THRESHOLD
    }
}

fn validate_weight(w: f64) -> Result<()> {
    if !w.is_finite() || w < 0.0 {
        return Err(PfrError::InvalidDistribution(format!(
            "weight {w} is negative or not finite"
        )));
    }
    Ok(())
}

impl Dist {
    /// Normalizes a table and wraps it. The table must carry positive mass.
    pub(crate) fn from_table(dim: u32, mut table: Table) -> Result<Self> {
        let total = table.total();
        if !(total > 0.0) || !total.is_finite() {
            return Err(PfrError::InvalidDistribution("total mass is zero".into()));
        }
        table.scale(1.0 / total);
        Ok(Self {
            dim,
            table: table.normalized_form(dim),
        })
    }

    /// Dense weights of length `2^dim`, normalized to mass 1.
    pub fn from_weights(dim: u32, weights: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if weights.len() != group_size(dim) {
            return Err(PfrError::InvalidDistribution(format!(
                "expected {} weights, got {}",
                group_size(dim),
                weights.len()
            )));
        }
        for &w in &weights {
            validate_weight(w)?;
        }
        Self::from_table(dim, Table::Dense(weights))
    }

    /// Builds from `(element, weight)` pairs; duplicates are summed.
    pub fn from_entries<I>(dim: u32, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (GroupElem, f64)>,
    {
        check_dim(dim)?;
        let mut items = Vec::new();
        for (x, w) in entries {
            check_elem(x, dim)?;
            validate_weight(w)?;
            items.push((x as u64, w));
        }
        Self::from_table(dim, Table::accumulate(dim, items))
    }

    pub fn point_mass(dim: u32, g: GroupElem) -> Result<Self> {
        Self::from_entries(dim, [(g, 1.0)])
    }

    /// Uniform distribution on a set (duplicates ignored).
    pub fn uniform_on(set: &[GroupElem], dim: u32) -> Result<Self> {
        let unique: BTreeSet<GroupElem> = set.iter().copied().collect();
        if unique.is_empty() {
            return Err(PfrError::Empty);
        }
        let w = 1.0 / unique.len() as f64;
        Self::from_entries(dim, unique.into_iter().map(|x| (x, w)))
    }

    pub fn uniform_on_subgroup(h: &SubgroupBasis) -> Result<Self> {
        Self::uniform_on(&h.enumerate()?, h.ambient_dim())
    }

    pub fn uniform_on_coset(h: &SubgroupBasis, shift: GroupElem) -> Result<Self> {
        let elems: Vec<GroupElem> = h.enumerate()?.into_iter().map(|x| x ^ shift).collect();
        Self::uniform_on(&elems, h.ambient_dim())
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn is_dense(&self) -> bool {
        self.table.is_dense()
    }

    pub fn prob(&self, x: GroupElem) -> f64 {
        self.table.get(x as u64)
    }

    /// Positive entries in ascending element order.
    pub fn iter(&self) -> impl Iterator<Item = (GroupElem, f64)> + '_ {
        self.table.iter().map(|(k, w)| (k as GroupElem, w))
    }

    pub fn support(&self) -> Vec<GroupElem> {
        self.iter().map(|(x, _)| x).collect()
    }

    pub fn support_size(&self) -> usize {
        self.table.nnz()
    }

    pub fn total_mass(&self) -> f64 {
        self.table.total()
    }

    /// Most likely element, smallest on ties.
    pub fn mode(&self) -> (GroupElem, f64) {
        self.iter().fold(
            (0, -1.0),
            |best, (x, p)| if p > best.1 { (x, p) } else { best },
        )
    }

    pub fn to_dense_vec(&self) -> Vec<f64> {
        let mut v = vec![0.0; group_size(self.dim)];
        for (x, p) in self.iter() {
            v[x as usize] = p;
        }
        v
    }

    pub fn to_dense(&self) -> Dist {
        Dist {
            dim: self.dim,
            table: self.table.clone().into_dense(self.dim),
        }
    }

    pub fn to_sparse(&self) -> Dist {
        Dist {
            dim: self.dim,
            table: self.table.clone().into_sparse(),
        }
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy_of_weights(self.iter().map(|(_, p)| p), self.table.max_weight())
    }

    fn check_same_dim(&self, other: &Dist) -> Result<()> {
        if self.dim != other.dim {
            return Err(PfrError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    /// Distribution of `X' + Y'` for independent copies.
    pub fn xor_convolve(&self, other: &Dist) -> Result<Dist> {
        Ok(self.xor_convolve_detailed(other)?.dist)
    }

    /// Convolution by support-pair enumeration when the supports are small
    /// (`|supp X| * |supp Y| < n * 2^n`), by the fast Walsh-Hadamard transform
    /// otherwise. Transform output is clamped at zero and renormalized.
    pub fn xor_convolve_detailed(&self, other: &Dist) -> Result<Convolution> {
        self.check_same_dim(other)?;
        let n = self.dim;
        let pairs = self.support_size().saturating_mul(other.support_size());
        if pairs < (n as usize).max(1) * group_size(n) {
            let b: Vec<(GroupElem, f64)> = other.iter().collect();
            let items = self
                .iter()
                .flat_map(|(x, p)| b.iter().map(move |&(y, q)| ((x ^ y) as u64, p * q)));
            let dist = Dist::from_table(n, Table::accumulate(n, items))?;
            return Ok(Convolution {
                dist,
                clamp_deviation: 0.0,
                used_transform: false,
            });
        }
        let mut c = wht::xor_convolution(&self.to_dense_vec(), &other.to_dense_vec());
        let (dist, clamp_deviation) = Self::clamped(n, &mut c)?;
        Ok(Convolution {
            dist,
            clamp_deviation,
            used_transform: true,
        })
    }

    /// Zeroes transform round-off (negatives and entries below `1e-15 * max`)
    /// and renormalizes.
    pub(crate) fn clamped(dim: u32, values: &mut [f64]) -> Result<(Dist, f64)> {
        let max = values.iter().copied().fold(0.0, f64::max);
        let floor = 1e-15 * max;
        let mut deviation: f64 = 0.0;
        for v in values.iter_mut() {
            if *v <= floor {
                deviation = deviation.max(v.abs());
                *v = 0.0;
            }
        }
        Ok((
            Dist::from_table(dim, Table::Dense(values.to_vec()))?,
            deviation,
        ))
    }

    /// `X + g`.
    pub fn translate(&self, g: GroupElem) -> Result<Dist> {
        check_elem(g, self.dim)?;
        let items: Vec<(u64, f64)> = self.iter().map(|(x, p)| ((x ^ g) as u64, p)).collect();
        Dist::from_table(self.dim, Table::accumulate(self.dim, items))
    }

    /// Image distribution under a linear map.
    pub fn map(&self, map: &LinearMap) -> Result<Dist> {
        if map.in_dim != self.dim {
            return Err(PfrError::DimensionMismatch {
                expected: map.in_dim,
                found: self.dim,
            });
        }
        let items: Vec<(u64, f64)> = self.iter().map(|(x, p)| (map.apply(x) as u64, p)).collect();
        Dist::from_table(map.out_dim, Table::accumulate(map.out_dim, items))
    }

    /// `(X | X + Y = g)` for independent `X ~ self`, `Y ~ other`:
    /// weights proportional to `p_X(x) p_Y(x + g)`.
    pub fn conditioned_on_sum(&self, other: &Dist, g: GroupElem) -> Result<Dist> {
        self.check_same_dim(other)?;
        check_elem(g, self.dim)?;
        let items: Vec<(u64, f64)> = self
            .iter()
            .filter_map(|(x, p)| {
                let q = other.prob(x ^ g);
                (q > 0.0).then_some((x as u64, p * q))
            })
            .collect();
        if items.is_empty() {
            return Err(PfrError::ZeroMass);
        }
        Dist::from_table(self.dim, Table::accumulate(self.dim, items))
    }

    /// Restriction to `{x : p(x) > rel * max p}`, renormalized.
    pub fn pruned(&self, rel: f64) -> Dist {
        let mut table = self.table.clone();
        table.drop_below(rel * self.table.max_weight());
        Dist::from_table(self.dim, table).expect("pruning keeps the mode")
    }

    /// Largest pointwise difference of the two mass functions.
    pub fn max_abs_diff(&self, other: &Dist) -> f64 {
        let mut keys: BTreeSet<GroupElem> = self.support().into_iter().collect();
        keys.extend(other.support());
        keys.into_iter()
            .map(|x| (self.prob(x) - other.prob(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Exact equality of the positive entries.
    pub fn same_as(&self, other: &Dist) -> bool {
        self.dim == other.dim && self.iter().eq(other.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn uniform_entropies() {
        assert_eq!(Dist::uniform_on(&[0], 3).unwrap().entropy(), 0.0);
        let h = SubgroupBasis::span([0b0011, 0b0101], 4).unwrap();
        assert!(close(
            Dist::uniform_on_subgroup(&h).unwrap().entropy(),
            4f64.ln(),
            1e-12
        ));
        assert!(close(
            Dist::uniform_on(&[0, 1, 2], 2).unwrap().entropy(),
            3f64.ln(),
            1e-12
        ));
        let full: Vec<u32> = (0..16).collect();
        assert!(close(
            Dist::uniform_on(&full, 4).unwrap().entropy(),
            4.0 * LN_2,
            1e-12
        ));
        assert!(matches!(Dist::uniform_on(&[], 2), Err(PfrError::Empty)));
    }

    #[test]
    fn half_quarter_quarter() {
        let d = Dist::from_weights(2, vec![0.5, 0.25, 0.25, 0.0]).unwrap();
        // 1/2 ln 2 + 2 * 1/4 ln 4
        let direct = 0.5 * 2f64.ln() + 0.5 * 4f64.ln();
        assert!(close(d.entropy(), direct, 1e-15));
        assert!(close(d.entropy(), 1.5 * LN_2, 1e-12));
    }

    #[test]
    fn convolution_examples() {
        let x = Dist::from_weights(3, vec![0.1, 0.2, 0.0, 0.3, 0.1, 0.1, 0.1, 0.1]).unwrap();
        let shifted = x
            .xor_convolve(&Dist::point_mass(3, 0b101).unwrap())
            .unwrap();
        assert!(shifted.max_abs_diff(&x.translate(0b101).unwrap()) < 1e-15);

        let h = SubgroupBasis::span([0b011, 0b110], 3).unwrap();
        let uh = Dist::uniform_on_subgroup(&h).unwrap();
        assert!(uh.xor_convolve(&uh).unwrap().max_abs_diff(&uh) < 1e-15);

        // 9-pair enumeration: 0 arises from the 3 diagonal pairs, every
        // other element from 2 ordered pairs.
        let u3 = Dist::uniform_on(&[0, 1, 2], 2).unwrap();
        let c = u3.xor_convolve(&u3).unwrap();
        assert!(close(c.prob(0), 1.0 / 3.0, 1e-15));
        for z in 1..4 {
            assert!(close(c.prob(z), 2.0 / 9.0, 1e-15));
        }
    }

    #[test]
    fn transform_path_matches_pair_path() {
        let a = Dist::from_weights(4, (0..16).map(|i| 1.0 + (i % 5) as f64).collect()).unwrap();
        let b = Dist::from_weights(4, (0..16).map(|i| 1.0 + (i % 3) as f64).collect()).unwrap();
        let fast = a.xor_convolve_detailed(&b).unwrap();
        assert!(fast.used_transform);
        for z in 0..16u32 {
            let direct: f64 = (0..16u32).map(|x| a.prob(x) * b.prob(x ^ z)).sum();
            assert!(close(fast.dist.prob(z), direct, 1e-15));
        }
    }

    #[test]
    fn dense_and_sparse_agree() {
        let d = Dist::from_weights(
            5,
            (0..32)
                .map(|i| if i % 3 == 0 { i as f64 } else { 0.0 })
                .collect(),
        )
        .unwrap();
        let s = d.to_sparse();
        assert!(!s.is_dense());
        assert_eq!(d.entropy(), s.entropy());
        let e = Dist::uniform_on(&[1, 7, 30], 5).unwrap().to_sparse();
        assert!(
            d.xor_convolve(&e)
                .unwrap()
                .max_abs_diff(&s.xor_convolve(&e).unwrap())
                < 1e-15
        );
    }

    #[test]
    fn mismatch_and_validation() {
        let a = Dist::point_mass(3, 1).unwrap();
        let b = Dist::point_mass(4, 1).unwrap();
        assert!(matches!(
            a.xor_convolve(&b),
            Err(PfrError::DimensionMismatch { .. })
        ));
        assert!(Dist::from_weights(1, vec![-0.1, 1.1]).is_err());
        assert!(Dist::from_weights(1, vec![0.0, 0.0]).is_err());
        assert!(Dist::point_mass(2, 4).is_err());
    }

    #[test]
    fn fibre_of_sum() {
        let x = Dist::uniform_on(&[0, 1, 2], 2).unwrap();
        let y = Dist::uniform_on(&[0, 1], 2).unwrap();
        // x + y = 3 forces x in {2, 3} intersect supp = {2} (y = 1).
        let f = x.conditioned_on_sum(&y, 3).unwrap();
        assert_eq!(f.support(), vec![2]);
        assert!(matches!(
            x.conditioned_on_sum(&Dist::point_mass(2, 0).unwrap(), 3),
            Err(PfrError::ZeroMass)
        ));
    }

    #[test]
    fn pruning_drops_negligible_mass() {
        let d = Dist::from_weights(2, vec![1.0, 1e-16, 0.5, 0.0]).unwrap();
        let p = d.pruned(1e-13);
        assert_eq!(p.support(), vec![0, 2]);
        assert!(close(p.total_mass(), 1.0, 1e-15));
    }
}
