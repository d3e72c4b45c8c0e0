//! Joint distributions on (F_2^n)^k for small k, with the entropy calculus:
//! marginals, conditional entropy, (conditional) mutual information,
//! linear pushforwards and conditioning on an axis value.
//!
//! Outcomes are packed into a `u64` key with axis `i` occupying bits
//! `[i*n, (i+1)*n)`.

use serde::{Deserialize, Serialize};

use crate::dist::Dist;
use crate::error::{PfrError, Result};
use crate::group::{check_dim, check_elem, GroupElem};
use crate::table::{entropy_of_weights, Table};

pub const MAX_ARITY: usize = 4;

#[derive(Clone, Debug)]
pub struct JointDist {
    dim: u32,
    labels: Vec<String>,
    table: Table,
}

/// A GF(2)-linear map between axis tuples: every output axis is the XOR of a
/// set of input axes, e.g. `(x1, x2, y1, y2) -> (x1+x2, y1+x2, x1+x2+y1+y2)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisMap {
    pub outputs: Vec<(String, Vec<usize>)>,
}

impl AxisMap {
    pub fn new<S: Into<String>>(outputs: Vec<(S, Vec<usize>)>) -> Self {
        Self {
            outputs: outputs.into_iter().map(|(l, a)| (l.into(), a)).collect(),
        }
    }

    pub fn identity(labels: &[String]) -> Self {
        Self {
            outputs: labels
                .iter()
                .enumerate()
                .map(|(i, l)| (l.clone(), vec![i]))
                .collect(),
        }
    }
}

#[inline]
fn mask(dim: u32) -> u64 {
    if dim == 0 {
        0
    } else {
        (1u64 << dim) - 1
    }
}

fn check_shape(dim: u32, arity: usize) -> Result<()> {
    check_dim(dim)?;
    if arity == 0 || arity > MAX_ARITY {
        return Err(PfrError::InvalidParameter(format!(
            "arity {arity} outside 1..={MAX_ARITY}"
        )));
    }
    if dim as usize * arity > 64 {
        return Err(PfrError::InvalidParameter(format!(
            "{arity} axes of dimension {dim} exceed 64 key bits"
        )));
    }
    Ok(())
}

impl JointDist {
    pub(crate) fn from_table(dim: u32, labels: Vec<String>, mut table: Table) -> Result<Self> {
        check_shape(dim, labels.len())?;
        let total = table.total();
        if !(total > 0.0) || !total.is_finite() {
            return Err(PfrError::InvalidDistribution("total mass is zero".into()));
        }
        table.scale(1.0 / total);
        let bits = dim * labels.len() as u32;
        Ok(Self {
            dim,
            labels,
            table: table.normalized_form(bits),
        })
    }

    /// Builds from packed keys; duplicates are summed, mass is normalized.
    pub(crate) fn from_keyed<I>(dim: u32, labels: Vec<String>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, f64)>,
    {
        check_shape(dim, labels.len())?;
        let bits = dim * labels.len() as u32;
        Self::from_table(dim, labels, Table::accumulate(bits, entries))
    }

    /// Builds from outcome tuples and weights; duplicates are summed.
    pub fn from_entries<I, L>(dim: u32, labels: &[L], entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<GroupElem>, f64)>,
        L: AsRef<str>,
    {
        let labels: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
        check_shape(dim, labels.len())?;
        let mut keyed = Vec::new();
        for (values, w) in entries {
            if values.len() != labels.len() {
                return Err(PfrError::InvalidDistribution(format!(
                    "outcome has {} coordinates, expected {}",
                    values.len(),
                    labels.len()
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(PfrError::InvalidDistribution(format!(
                    "weight {w} is negative or not finite"
                )));
            }
            for &v in &values {
                check_elem(v, dim)?;
            }
            keyed.push((pack(&values, dim), w));
        }
        Self::from_keyed(dim, labels, keyed)
    }

    /// Independent product of the given marginals.
    pub fn product<L: AsRef<str>>(dists: &[&Dist], labels: &[L]) -> Result<Self> {
        if dists.len() != labels.len() || dists.is_empty() {
            return Err(PfrError::InvalidParameter(
                "need one label per factor".into(),
            ));
        }
        let dim = dists[0].dim();
        for d in dists {
            if d.dim() != dim {
                return Err(PfrError::DimensionMismatch {
                    expected: dim,
                    found: d.dim(),
                });
            }
        }
        let mut entries: Vec<(u64, f64)> = vec![(0, 1.0)];
        for (i, d) in dists.iter().enumerate() {
            let shift = i as u32 * dim;
            entries = entries
                .iter()
                .flat_map(|&(k, w)| {
                    d.iter()
                        .map(move |(x, p)| (k | ((x as u64) << shift), w * p))
                })
                .collect();
        }
        let labels = labels.iter().map(|l| l.as_ref().to_string()).collect();
        Self::from_keyed(dim, labels, entries)
    }

    /// Lifts a distribution to an arity-1 joint.
    pub fn from_dist<L: AsRef<str>>(d: &Dist, label: L) -> Result<Self> {
        Self::product(&[d], &[label])
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn arity(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_dense(&self) -> bool {
        self.table.is_dense()
    }

    pub fn to_dense(&self) -> Self {
        let bits = self.dim * self.arity() as u32;
        Self {
            dim: self.dim,
            labels: self.labels.clone(),
            table: self.table.clone().into_dense(bits),
        }
    }

    pub fn to_sparse(&self) -> Self {
        Self {
            dim: self.dim,
            labels: self.labels.clone(),
            table: self.table.clone().into_sparse(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.table.total()
    }

    pub fn support_size(&self) -> usize {
        self.table.nnz()
    }

    pub fn axis(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| PfrError::UnknownAxis(label.to_string()))
    }

    pub fn axes(&self, labels: &[&str]) -> Result<Vec<usize>> {
        labels.iter().map(|l| self.axis(l)).collect()
    }

    #[inline]
    pub fn value(&self, key: u64, axis: usize) -> GroupElem {
        ((key >> (axis as u32 * self.dim)) & mask(self.dim)) as GroupElem
    }

    pub fn values(&self, key: u64) -> Vec<GroupElem> {
        (0..self.arity()).map(|a| self.value(key, a)).collect()
    }

    /// Positive entries as packed keys, ascending.
    pub fn iter_keyed(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.table.iter()
    }

    /// Positive entries as outcome tuples.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<GroupElem>, f64)> + '_ {
        self.table.iter().map(|(k, w)| (self.values(k), w))
    }

    pub fn prob(&self, values: &[GroupElem]) -> f64 {
        if values.len() != self.arity() {
            return 0.0;
        }
        self.table.get(pack(values, self.dim))
    }

    fn check_axes(&self, axes: &[usize]) -> Result<()> {
        for (i, &a) in axes.iter().enumerate() {
            if a >= self.arity() {
                return Err(PfrError::UnknownAxis(format!("#{a}")));
            }
            if axes[..i].contains(&a) {
                return Err(PfrError::OverlappingAxes);
            }
        }
        Ok(())
    }

    fn check_disjoint(&self, sets: &[&[usize]]) -> Result<()> {
        for s in sets {
            self.check_axes(s)?;
        }
        for i in 0..sets.len() {
            for j in i + 1..sets.len() {
                if sets[i].iter().any(|a| sets[j].contains(a)) {
                    return Err(PfrError::OverlappingAxes);
                }
            }
        }
        Ok(())
    }

    #[inline]
    fn project(&self, key: u64, axes: &[usize]) -> u64 {
        axes.iter().enumerate().fold(0u64, |acc, (j, &a)| {
            acc | ((self.value(key, a) as u64) << (j as u32 * self.dim))
        })
    }

    fn projected_table(&self, axes: &[usize]) -> Table {
        let bits = self.dim * axes.len() as u32;
        let entries: Vec<(u64, f64)> = self
            .table
            .iter()
            .map(|(k, w)| (self.project(k, axes), w))
            .collect();
        Table::accumulate(bits, entries)
    }

    /// Joint of the selected axes, in the given order.
    pub fn marginal(&self, axes: &[usize]) -> Result<JointDist> {
        if axes.is_empty() {
            return Err(PfrError::InvalidParameter(
                "marginal needs at least one axis".into(),
            ));
        }
        self.check_axes(axes)?;
        let labels = axes.iter().map(|&a| self.labels[a].clone()).collect();
        JointDist::from_table(self.dim, labels, self.projected_table(axes))
    }

    pub fn marginal_dist(&self, axis: usize) -> Result<Dist> {
        self.check_axes(&[axis])?;
        Dist::from_table(self.dim, self.projected_table(&[axis]))
    }

    /// The underlying distribution of an arity-1 joint.
    pub fn to_dist(&self) -> Result<Dist> {
        if self.arity() != 1 {
            return Err(PfrError::InvalidParameter(format!(
                "arity {} joint is not a single variable",
                self.arity()
            )));
        }
        Dist::from_table(self.dim, self.table.clone())
    }

    /// `H[axes]`; zero for the empty set.
    pub(crate) fn entropy_of(&self, axes: &[usize]) -> f64 {
        if axes.is_empty() {
            return 0.0;
        }
        let t = self.projected_table(axes);
        entropy_of_weights(t.iter().map(|(_, w)| w), t.max_weight())
    }

    /// Entropy of the marginal on `axes`.
    pub fn joint_entropy(&self, axes: &[usize]) -> Result<f64> {
        if axes.is_empty() {
            return Err(PfrError::InvalidParameter(
                "joint entropy needs at least one axis".into(),
            ));
        }
        self.check_axes(axes)?;
        Ok(self.entropy_of(axes))
    }

    /// `H[target | given] = H[target, given] - H[given]`.
    pub fn cond_entropy(&self, target: &[usize], given: &[usize]) -> Result<f64> {
        self.check_disjoint(&[target, given])?;
        let both: Vec<usize> = target.iter().chain(given).copied().collect();
        Ok(self.entropy_of(&both) - self.entropy_of(given))
    }

    /// `I[a : b] = H[a] + H[b] - H[a, b]`.
    pub fn mutual_info(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        self.cond_mutual_info(a, b, &[])
    }

    /// `I[a : b | c] = H[a, c] + H[b, c] - H[a, b, c] - H[c]`.
    pub fn cond_mutual_info(&self, a: &[usize], b: &[usize], given: &[usize]) -> Result<f64> {
        self.check_disjoint(&[a, b, given])?;
        let ac: Vec<usize> = a.iter().chain(given).copied().collect();
        let bc: Vec<usize> = b.iter().chain(given).copied().collect();
        let abc: Vec<usize> = a.iter().chain(b).chain(given).copied().collect();
        Ok(self.entropy_of(&ac) + self.entropy_of(&bc)
            - self.entropy_of(&abc)
            - self.entropy_of(given))
    }

    /// Image under an axis-wise XOR map.
    pub fn pushforward(&self, map: &AxisMap) -> Result<JointDist> {
        if map.outputs.is_empty() {
            return Err(PfrError::MalformedMap("map has no outputs".into()));
        }
        for (label, inputs) in &map.outputs {
            if inputs.is_empty() {
                return Err(PfrError::MalformedMap(format!(
                    "output `{label}` selects no input axes"
                )));
            }
            for &i in inputs {
                if i >= self.arity() {
                    return Err(PfrError::MalformedMap(format!(
                        "output `{label}` refers to missing axis #{i}"
                    )));
                }
            }
            let mut sorted = inputs.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(PfrError::MalformedMap(format!(
                    "output `{label}` repeats an input axis"
                )));
            }
        }
        let labels: Vec<String> = map.outputs.iter().map(|(l, _)| l.clone()).collect();
        check_shape(self.dim, labels.len())?;
        let entries: Vec<(u64, f64)> = self
            .table
            .iter()
            .map(|(k, w)| {
                let key = map
                    .outputs
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (j, (_, inputs))| {
                        let v = inputs.iter().fold(0, |x, &i| x ^ self.value(k, i));
                        acc | ((v as u64) << (j as u32 * self.dim))
                    });
                (key, w)
            })
            .collect();
        JointDist::from_keyed(self.dim, labels, entries)
    }

    /// Slice `axis = value`, renormalized, with that axis removed.
    pub fn condition(&self, axis: usize, value: GroupElem) -> Result<JointDist> {
        self.check_axes(&[axis])?;
        check_elem(value, self.dim)?;
        if self.arity() == 1 {
            return Err(PfrError::InvalidParameter(
                "cannot condition a single variable on itself".into(),
            ));
        }
        let rest: Vec<usize> = (0..self.arity()).filter(|&a| a != axis).collect();
        let entries: Vec<(u64, f64)> = self
            .table
            .iter()
            .filter(|&(k, _)| self.value(k, axis) == value)
            .map(|(k, w)| (self.project(k, &rest), w))
            .collect();
        if entries.is_empty() {
            return Err(PfrError::ZeroMass);
        }
        let labels = rest.iter().map(|&a| self.labels[a].clone()).collect();
        JointDist::from_keyed(self.dim, labels, entries)
    }

    /// Every positive-mass value `z` of the `given` axes (packed) with its
    /// probability and the conditional distribution of the single `target`
    /// axis.
    pub fn slices(&self, target: usize, given: &[usize]) -> Result<Vec<(u64, f64, Dist)>> {
        self.check_disjoint(&[&[target], given])?;
        let mut grouped: std::collections::BTreeMap<u64, Vec<(u64, f64)>> =
            std::collections::BTreeMap::new();
        for (k, w) in self.table.iter() {
            grouped
                .entry(self.project(k, given))
                .or_default()
                .push((self.value(k, target) as u64, w));
        }
        grouped
            .into_iter()
            .map(|(z, items)| {
                let pz: f64 = items.iter().map(|&(_, w)| w).sum();
                Ok((
                    z,
                    pz,
                    Dist::from_table(self.dim, Table::accumulate(self.dim, items))?,
                ))
            })
            .collect()
    }
}

/// Packs coordinates into a key, first coordinate in the low bits.
pub fn pack(values: &[GroupElem], dim: u32) -> u64 {
    values
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, &v)| acc | ((v as u64) << (i as u32 * dim)))
}

/// A conditional variable `(target | given)` over a joint distribution.
#[derive(Clone, Debug)]
pub struct CondDist {
    pub base: JointDist,
    pub target: usize,
    pub given: Vec<usize>,
}

impl CondDist {
    pub fn new(base: JointDist, target: usize, given: Vec<usize>) -> Result<Self> {
        base.check_disjoint(&[&[target], &given])?;
        Ok(Self {
            base,
            target,
            given,
        })
    }

    /// `(X | nothing)`.
    pub fn unconditioned(x: &Dist) -> Result<Self> {
        Self::new(JointDist::from_dist(x, "X")?, 0, Vec::new())
    }

    pub fn dim(&self) -> u32 {
        self.base.dim()
    }

    pub fn slices(&self) -> Result<Vec<(u64, f64, Dist)>> {
        self.base.slices(self.target, &self.given)
    }
}
