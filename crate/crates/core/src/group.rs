//! Arithmetic and linear algebra over F_2^n.
//!
//! Elements are plain `u32` words; the ambient dimension travels with the
//! containers (subgroups, distributions) rather than with each element.
//! Addition is XOR and every element is its own inverse.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{PfrError, Result};

/// An element of F_2^n, stored as the low `n` bits of a word.
pub type GroupElem = u32;

/// Largest supported ambient dimension.
pub const MAX_DIM: u32 = 24;

pub fn check_dim(n: u32) -> Result<()> {
    if n > MAX_DIM {
        return Err(PfrError::UnsupportedDimension(n));
    }
    Ok(())
}

#[inline]
pub fn group_size(n: u32) -> usize {
    1usize << n
}

pub fn check_elem(x: GroupElem, n: u32) -> Result<()> {
    if n < 32 && (x >> n) != 0 {
        return Err(PfrError::ElementOutOfRange {
            elem: x as u64,
            dim: n,
        });
    }
    Ok(())
}

/// Parses `0b0101`, `0x5` or plain decimal.
pub fn parse_elem(s: &str) -> Result<GroupElem> {
    let s = s.trim();
    let parsed = if let Some(bits) = s.strip_prefix("0b").or_else(|| s.strip_prefix("0B")) {
        u32::from_str_radix(&bits.replace('_', ""), 2)
    } else if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u32::from_str_radix(&hex.replace('_', ""), 16)
    } else {
        s.parse::<u32>()
    };
    parsed.map_err(|e| PfrError::Parse(format!("bad group element `{s}`: {e}")))
}

/// Binary form padded to `n` digits, e.g. `0b0101`.
pub fn format_elem(x: GroupElem, n: u32) -> String {
    if n == 0 {
        return "0b0".to_string();
    }
    format!("0b{:0width$b}", x, width = n as usize)
}

/// A subgroup of F_2^n given by its reduced row-echelon basis.
///
/// Rows are sorted by strictly decreasing leading bit and every pivot bit is
/// cleared from all other rows, so the basis is canonical: two subgroups are
/// equal iff their bases are equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubgroupBasis {
    ambient_dim: u32,
    rows: Vec<GroupElem>,
}

#[inline]
fn leading_bit(x: GroupElem) -> u32 {
    31 - x.leading_zeros()
}

impl SubgroupBasis {
    /// The trivial subgroup `{0}`.
    pub fn trivial(n: u32) -> Result<Self> {
        check_dim(n)?;
        Ok(Self {
            ambient_dim: n,
            rows: Vec::new(),
        })
    }

    /// The whole group F_2^n.
    pub fn full(n: u32) -> Result<Self> {
        check_dim(n)?;
        let rows = (0..n).rev().map(|b| 1 << b).collect();
        Ok(Self {
            ambient_dim: n,
            rows,
        })
    }

    /// RREF basis of the span of `elems`.
    pub fn span<I>(elems: I, n: u32) -> Result<Self>
    where
        I: IntoIterator<Item = GroupElem>,
    {
        let mut basis = Self::trivial(n)?;
        for x in elems {
            basis.insert(x)?;
        }
        Ok(basis)
    }

    /// Adds `x` to the spanning set. Returns `true` if the rank grew.
    pub fn insert(&mut self, x: GroupElem) -> Result<bool> {
        check_elem(x, self.ambient_dim)?;
        let r = self.reduce(x);
        if r == 0 {
            return Ok(false);
        }
        let pivot = leading_bit(r);
        for row in self.rows.iter_mut() {
            if (*row >> pivot) & 1 == 1 {
                *row ^= r;
            }
        }
        let pos = self
            .rows
            .iter()
            .position(|&row| leading_bit(row) < pivot)
            .unwrap_or(self.rows.len());
        self.rows.insert(pos, r);
        Ok(true)
    }

    /// Canonical coset representative of `x + H`; it is the smallest member of the coset.
    pub fn reduce(&self, mut x: GroupElem) -> GroupElem {
        for &row in &self.rows {
            if (x >> leading_bit(row)) & 1 == 1 {
                x ^= row;
            }
        }
        x
    }

    pub fn contains(&self, x: GroupElem) -> bool {
        self.reduce(x) == 0
    }

    pub fn ambient_dim(&self) -> u32 {
        self.ambient_dim
    }

    pub fn rows(&self) -> &[GroupElem] {
        &self.rows
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn size(&self) -> u64 {
        1u64 << self.rows.len()
    }

    pub fn pivots(&self) -> impl Iterator<Item = u32> + '_ {
        self.rows.iter().map(|&r| leading_bit(r))
    }

    /// Element with index `i`: XOR of the rows picked out by the bits of `i`,
    /// bit 0 selecting the row with the smallest pivot.
    pub fn element(&self, i: u64) -> GroupElem {
        let r = self.rows.len();
        let mut x = 0;
        for b in 0..r {
            if (i >> b) & 1 == 1 {
                x ^= self.rows[r - 1 - b];
            }
        }
        x
    }

    /// All members of the subgroup, sorted ascending.
    pub fn enumerate(&self) -> Result<Vec<GroupElem>> {
        if self.rank() > MAX_DIM as usize {
            return Err(PfrError::RankTooLarge(self.rank()));
        }
        Ok((0..self.size()).map(|i| self.element(i)).collect())
    }

    /// Drops highest-pivot rows until `2^rank <= bound`.
    pub fn shrink_to_size(&self, bound: u64) -> Self {
        let bound = bound.max(1);
        let mut rows = self.rows.clone();
        while (1u64 << rows.len()) > bound {
            rows.remove(0);
        }
        Self {
            ambient_dim: self.ambient_dim,
            rows,
        }
    }

    pub fn is_subgroup_of(&self, other: &SubgroupBasis) -> bool {
        self.rows.iter().all(|&r| other.contains(r))
    }

    /// Basis rows of `self` that are missing from `sub`, as a spanning set for
    /// coset representatives of `sub` inside `self`.
    pub fn complement_rows(&self, sub: &SubgroupBasis) -> Vec<GroupElem> {
        let mut acc = sub.clone();
        let mut extra = Vec::new();
        for &r in &self.rows {
            if acc.insert(r).unwrap_or(false) {
                extra.push(r);
            }
        }
        extra
    }
}

impl fmt::Display for SubgroupBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|&r| format_elem(r, self.ambient_dim))
            .collect();
        write!(f, "<{}> in F_2^{}", rows.join(", "), self.ambient_dim)
    }
}

#[derive(Serialize, Deserialize)]
struct SubgroupRepr {
    ambient_dim: u32,
    rows: Vec<String>,
}

impl Serialize for SubgroupBasis {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SubgroupRepr {
            ambient_dim: self.ambient_dim,
            rows: self
                .rows
                .iter()
                .map(|&r| format_elem(r, self.ambient_dim))
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SubgroupBasis {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = SubgroupRepr::deserialize(deserializer)?;
        let elems = repr
            .rows
            .iter()
            .map(|s| parse_elem(s))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        SubgroupBasis::span(elems, repr.ambient_dim).map_err(serde::de::Error::custom)
    }
}

/// A GF(2)-linear map F_2^m -> F_2^k, stored as the images of the unit vectors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearMap {
    pub in_dim: u32,
    pub out_dim: u32,
    pub images: Vec<GroupElem>,
}

impl LinearMap {
    pub fn new(in_dim: u32, out_dim: u32, images: Vec<GroupElem>) -> Result<Self> {
        check_dim(in_dim)?;
        check_dim(out_dim)?;
        if images.len() != in_dim as usize {
            return Err(PfrError::MalformedMap(format!(
                "expected {in_dim} basis images, got {}",
                images.len()
            )));
        }
        for &img in &images {
            check_elem(img, out_dim)?;
        }
        Ok(Self {
            in_dim,
            out_dim,
            images,
        })
    }

    pub fn identity(n: u32) -> Result<Self> {
        Self::new(n, n, (0..n).map(|b| 1 << b).collect())
    }

    pub fn zero(in_dim: u32, out_dim: u32) -> Result<Self> {
        Self::new(in_dim, out_dim, vec![0; in_dim as usize])
    }

    /// `(x, y) -> x + y` on `F_2^n x F_2^n`, first coordinate in the low bits.
    pub fn pair_sum(n: u32) -> Result<Self> {
        let images = (0..2 * n).map(|b| 1 << (b % n)).collect();
        Self::new(2 * n, n, images)
    }

    /// Builds a map from its full value table, rejecting anything non-linear.
    pub fn from_table(in_dim: u32, out_dim: u32, table: &[GroupElem]) -> Result<Self> {
        if table.len() != group_size(in_dim) {
            return Err(PfrError::MalformedMap(format!(
                "table has {} entries, expected {}",
                table.len(),
                group_size(in_dim)
            )));
        }
        let images: Vec<GroupElem> = (0..in_dim).map(|b| table[1 << b]).collect();
        let map = Self::new(in_dim, out_dim, images)?;
        if table
            .iter()
            .enumerate()
            .any(|(x, &y)| map.apply(x as GroupElem) != y)
        {
            return Err(PfrError::NonLinearMap);
        }
        Ok(map)
    }

    #[inline]
    pub fn apply(&self, x: GroupElem) -> GroupElem {
        let mut y = 0;
        let mut bits = x;
        while bits != 0 {
            let b = bits.trailing_zeros();
            y ^= self.images[b as usize];
            bits &= bits - 1;
        }
        y
    }

    pub fn image(&self) -> Result<SubgroupBasis> {
        SubgroupBasis::span(self.images.iter().copied(), self.out_dim)
    }

    pub fn kernel(&self) -> Result<SubgroupBasis> {
        // Gaussian elimination on (image | unit vector) pairs.
        let mut pairs: Vec<(GroupElem, GroupElem)> = (0..self.in_dim)
            .map(|b| (self.images[b as usize], 1 << b))
            .collect();
        let mut kernel = Vec::new();
        let mut pivots: Vec<(GroupElem, GroupElem)> = Vec::new();
        for (mut img, mut src) in pairs.drain(..) {
            for &(p_img, p_src) in &pivots {
                if img & (1 << leading_bit(p_img)) != 0 {
                    img ^= p_img;
                    src ^= p_src;
                }
            }
            if img == 0 {
                kernel.push(src);
            } else {
                pivots.push((img, src));
            }
        }
        SubgroupBasis::span(kernel, self.in_dim)
    }
}
