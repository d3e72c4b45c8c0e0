//! Entropic Ruzsa distance, its conditional variants, the tau functional and
//! checkers for the standard entropic sumset inequalities.
//!
//! Over F_2^n subtraction is addition, so every difference below is an XOR.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::Dist;
use crate::error::{PfrError, Result};
use crate::group::GroupElem;
use crate::joint::{AxisMap, CondDist, JointDist};
use crate::table::entropy_of_weights;

/// Inequalities hold when `rhs - lhs >= -SLACK_TOL`.
pub const SLACK_TOL: f64 = 1e-9;

pub const DEFAULT_ETA: f64 = 1.0 / 9.0;

/// Supremum of admissible `eta`, `1 / (4 + sqrt 17)`.
pub fn max_eta() -> f64 {
    1.0 / (4.0 + 17f64.sqrt())
}

/// `d[X;Y] = H[X' + Y'] - H[X']/2 - H[Y']/2` for independent copies.
pub fn rdist(x: &Dist, y: &Dist) -> Result<f64> {
    let s = x.xor_convolve(y)?;
    Ok(s.entropy() - 0.5 * x.entropy() - 0.5 * y.entropy())
}

/// Reference pair and weight of the tau functional.
#[derive(Clone, Debug)]
pub struct RefPair {
    pub x0_1: Dist,
    pub x0_2: Dist,
    pub eta: f64,
}

impl RefPair {
    pub fn new(x0_1: Dist, x0_2: Dist, eta: f64) -> Result<Self> {
        if x0_1.dim() != x0_2.dim() {
            return Err(PfrError::DimensionMismatch {
                expected: x0_1.dim(),
                found: x0_2.dim(),
            });
        }
        if !(eta > 0.0 && eta < max_eta()) {
            return Err(PfrError::InvalidParameter(format!(
                "eta {eta} outside (0, 1/(4+sqrt 17))"
            )));
        }
        Ok(Self { x0_1, x0_2, eta })
    }

    pub fn with_default_eta(x0_1: Dist, x0_2: Dist) -> Result<Self> {
        Self::new(x0_1, x0_2, DEFAULT_ETA)
    }

    pub fn dim(&self) -> u32 {
        self.x0_1.dim()
    }

    /// `d[X0_1; X0_2]`.
    pub fn base_distance(&self) -> Result<f64> {
        rdist(&self.x0_1, &self.x0_2)
    }
}

/// `tau[X1;X2] = d[X1;X2] + eta d[X0_1;X1] + eta d[X0_2;X2]`.
pub fn tau(x1: &Dist, x2: &Dist, r: &RefPair) -> Result<f64> {
    Ok(tau_parts(x1, x2, r)?.tau(r.eta))
}

/// The three distances making up tau.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauParts {
    pub d12: f64,
    pub d_ref1: f64,
    pub d_ref2: f64,
}

impl TauParts {
    pub fn tau(&self, eta: f64) -> f64 {
        self.d12 + eta * self.d_ref1 + eta * self.d_ref2
    }
}

pub fn tau_parts(x1: &Dist, x2: &Dist, r: &RefPair) -> Result<TauParts> {
    Ok(TauParts {
        d12: rdist(x1, x2)?,
        d_ref1: rdist(&r.x0_1, x1)?,
        d_ref2: rdist(&r.x0_2, x2)?,
    })
}

/// `d[X|Z; Y|W] = sum_{z,w} p(z) p(w) d[(X|Z=z); (Y|W=w)]`.
pub fn cond_rdist(a: &CondDist, b: &CondDist) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(PfrError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let left: Vec<Slice> = a
        .slices()?
        .iter()
        .map(|(_, p, d)| Slice::new(*p, d))
        .collect();
    let right: Vec<Slice> = b
        .slices()?
        .iter()
        .map(|(_, p, d)| Slice::new(*p, d))
        .collect();
    average_rdist(a.dim(), &left, &right)
}

/// A weighted conditional slice: its probability, atoms and entropy.
#[derive(Clone, Debug)]
pub(crate) struct Slice {
    pub weight: f64,
    pub dist: Dist,
    pub atoms: Vec<(GroupElem, f64)>,
    pub entropy: f64,
}

impl Slice {
    pub fn new(weight: f64, d: &Dist) -> Self {
        Self {
            weight,
            dist: d.clone(),
            atoms: d.iter().collect(),
            entropy: d.entropy(),
        }
    }
}

/// Scratch space reused across many small pair-enumeration convolutions.
struct PairScratch {
    buf: Vec<f64>,
    touched: Vec<GroupElem>,
}

impl PairScratch {
    fn new(dim: u32) -> Self {
        Self {
            buf: vec![0.0; 1usize << dim],
            touched: Vec::new(),
        }
    }

    fn sum_entropy(&mut self, a: &[(GroupElem, f64)], b: &[(GroupElem, f64)]) -> f64 {
        for &(x, p) in a {
            for &(y, q) in b {
                let z = (x ^ y) as usize;
                if self.buf[z] == 0.0 {
                    self.touched.push(z as GroupElem);
                }
                self.buf[z] += p * q;
            }
        }
        self.touched.sort_unstable();
        let max = self
            .touched
            .iter()
            .map(|&z| self.buf[z as usize])
            .fold(0.0, f64::max);
        let h = entropy_of_weights(self.touched.iter().map(|&z| self.buf[z as usize]), max);
        for &z in &self.touched {
            self.buf[z as usize] = 0.0;
        }
        self.touched.clear();
        h
    }
}

const SCRATCH_MAX_DIM: u32 = 20;

/// `sum_{i,j} w_i w_j d[L_i; R_j]`.
pub(crate) fn average_rdist(dim: u32, left: &[Slice], right: &[Slice]) -> Result<f64> {
    let matrix = pairwise_rdist(dim, left, right)?;
    let mut total = 0.0;
    for (l, row) in left.iter().zip(&matrix) {
        let inner: f64 = right.iter().zip(row).map(|(r, d)| r.weight * d).sum();
        total += l.weight * inner;
    }
    Ok(total)
}

/// Matrix of `d[L_i; R_j]`, parallel over the left slices.
pub(crate) fn pairwise_rdist(dim: u32, left: &[Slice], right: &[Slice]) -> Result<Vec<Vec<f64>>> {
    let threshold = (dim as usize).max(1) << dim;
    left.par_iter()
        .map_init(
            || None::<PairScratch>,
            |scratch, l| {
                right
                    .iter()
                    .map(|r| {
                        let h_sum = if dim <= SCRATCH_MAX_DIM
                            && l.atoms.len() * r.atoms.len() < threshold
                        {
                            scratch
                                .get_or_insert_with(|| PairScratch::new(dim))
                                .sum_entropy(&l.atoms, &r.atoms)
                        } else {
                            l.dist.xor_convolve(&r.dist)?.entropy()
                        };
                        Ok(h_sum - 0.5 * l.entropy - 0.5 * r.entropy)
                    })
                    .collect::<Result<Vec<f64>>>()
            },
        )
        .collect()
}

/// The same quantity through independent copies `(X',Z')`, `(Y',W')`:
/// `H[X'+Y' | Z',W'] - H[X'|Z']/2 - H[Y'|W']/2`, with the joint of
/// `(X'+Y', Z', W')` enumerated explicitly.
pub fn cond_rdist_alt(a: &CondDist, b: &CondDist) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(PfrError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let pairs = |c: &CondDist| -> Vec<(GroupElem, u64, f64)> {
        let mut m: BTreeMap<(u64, GroupElem), f64> = BTreeMap::new();
        for (key, w) in c.base.iter_keyed() {
            let z = c.given.iter().enumerate().fold(0u64, |acc, (j, &g)| {
                acc | ((c.base.value(key, g) as u64) << (j as u32 * c.base.dim()))
            });
            *m.entry((z, c.base.value(key, c.target))).or_insert(0.0) += w;
        }
        m.into_iter().map(|((z, x), w)| (x, z, w)).collect()
    };
    let xa = pairs(a);
    let yb = pairs(b);
    let mut sum_zw: BTreeMap<(u64, u64, GroupElem), f64> = BTreeMap::new();
    for &(x, z, p) in &xa {
        for &(y, w, q) in &yb {
            *sum_zw.entry((z, w, x ^ y)).or_insert(0.0) += p * q;
        }
    }
    let entropy = |weights: Vec<f64>| {
        let max = weights.iter().copied().fold(0.0, f64::max);
        entropy_of_weights(weights.into_iter(), max)
    };
    let marginal = |items: &[(GroupElem, u64, f64)]| {
        let mut m: BTreeMap<u64, f64> = BTreeMap::new();
        for &(_, z, p) in items {
            *m.entry(z).or_insert(0.0) += p;
        }
        m.into_values().collect::<Vec<f64>>()
    };
    let h_z = entropy(marginal(&xa));
    let h_w = entropy(marginal(&yb));
    let h_xz = entropy(xa.iter().map(|t| t.2).collect());
    let h_yw = entropy(yb.iter().map(|t| t.2).collect());
    let h_szw = entropy(sum_zw.into_values().collect());
    Ok((h_szw - h_z - h_w) - 0.5 * (h_xz - h_z) - 0.5 * (h_yw - h_w))
}

/// One evaluated inequality `lhs <= rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IneqReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

impl IneqReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack,
            holds: slack >= -SLACK_TOL,
        }
    }
}

/// `d[X;Y] <= d[X;Z] + d[Z;Y]`.
pub fn check_triangle(x: &Dist, y: &Dist, z: &Dist) -> Result<IneqReport> {
    Ok(IneqReport::new(
        "triangle",
        rdist(x, y)?,
        rdist(x, z)? + rdist(z, y)?,
    ))
}

/// `H[X+Y+Z] - H[X+Y] <= H[Y+Z] - H[Y]` for independent `X, Y, Z`.
pub fn check_madiman(x: &Dist, y: &Dist, z: &Dist) -> Result<IneqReport> {
    let xy = x.xor_convolve(y)?;
    let yz = y.xor_convolve(z)?;
    let xyz = xy.xor_convolve(z)?;
    Ok(IneqReport::new(
        "madiman",
        xyz.entropy() - xy.entropy(),
        yz.entropy() - y.entropy(),
    ))
}

/// `d[X|Z; Y|W] <= d[X;Y] + I[X:Z]/2 + I[Y:W]/2`. Axis 0 of each joint is
/// the variable, the remaining axes are conditioned on.
pub fn check_lemma51(xz: &JointDist, yw: &JointDist) -> Result<IneqReport> {
    let rest = |j: &JointDist| (1..j.arity()).collect::<Vec<usize>>();
    let a = CondDist::new(xz.clone(), 0, rest(xz))?;
    let b = CondDist::new(yw.clone(), 0, rest(yw))?;
    let lhs = cond_rdist(&a, &b)?;
    let d = rdist(&xz.marginal_dist(0)?, &yw.marginal_dist(0)?)?;
    let i_xz = xz.mutual_info(&[0], &a.given)?;
    let i_yw = yw.mutual_info(&[0], &b.given)?;
    Ok(IneqReport::new("lemma51", lhs, d + 0.5 * i_xz + 0.5 * i_yw))
}

/// Joint of `(Y, Y+Z)` for independent `Y, Z`.
fn with_sum(y: &Dist, z: &Dist) -> Result<JointDist> {
    JointDist::product(&[y, z], &["Y", "Z"])?
        .pushforward(&AxisMap::new(vec![("Y", vec![0]), ("Y+Z", vec![0, 1])]))
}

/// Both parts, with `Y, Z` independent:
/// `d[X;Y+Z] - d[X;Y] <= (H[Y+Z] - H[Y])/2` and
/// `d[X;Y|Y+Z] - d[X;Y] <= (H[Y+Z] - H[Z])/2`.
pub fn check_lemma52(x: &Dist, y: &Dist, z: &Dist) -> Result<[IneqReport; 2]> {
    let yz = y.xor_convolve(z)?;
    let d_xy = rdist(x, y)?;
    let first = IneqReport::new(
        "lemma52-sum",
        rdist(x, &yz)? - d_xy,
        0.5 * (yz.entropy() - y.entropy()),
    );
    let cond = CondDist::new(with_sum(y, z)?, 0, vec![1])?;
    let d_cond = cond_rdist(&CondDist::unconditioned(x)?, &cond)?;
    let second = IneqReport::new(
        "lemma52-fibre",
        d_cond - d_xy,
        0.5 * (yz.entropy() - z.entropy()),
    );
    Ok([first, second])
}

/// `d[X; Y+Z | Y+Z+Z'] - d[X;Y] <= (H[Y+Z+Z'] + H[Y+Z] - H[Y] - H[Z'])/2`
/// with `X, Y, Z, Z'` independent.
pub fn check_lemma71(x: &Dist, y: &Dist, z: &Dist, zp: &Dist) -> Result<IneqReport> {
    let joint =
        JointDist::product(&[y, z, zp], &["Y", "Z", "Z'"])?.pushforward(&AxisMap::new(vec![
            ("Y+Z", vec![0, 1]),
            ("Y+Z+Z'", vec![0, 1, 2]),
        ]))?;
    let h_yz = joint.joint_entropy(&[0])?;
    let h_yzz = joint.joint_entropy(&[1])?;
    let cond = CondDist::new(joint, 0, vec![1])?;
    let lhs = cond_rdist(&CondDist::unconditioned(x)?, &cond)? - rdist(x, y)?;
    Ok(IneqReport::new(
        "lemma71",
        lhs,
        0.5 * (h_yzz + h_yz - y.entropy() - zp.entropy()),
    ))
}

/// `|H[X] - H[Y]| <= 2 d[X;Y]`.
pub fn check_rdist_diff(x: &Dist, y: &Dist) -> Result<IneqReport> {
    Ok(IneqReport::new(
        "rdist-diff",
        (x.entropy() - y.entropy()).abs(),
        2.0 * rdist(x, y)?,
    ))
}

/// `H[X|Y,Z] <= H[X|Z]` on an arity-3 joint `(X, Y, Z)`.
pub fn check_submodularity(j: &JointDist) -> Result<IneqReport> {
    if j.arity() != 3 {
        return Err(PfrError::InvalidParameter(
            "submodularity needs an arity-3 joint".into(),
        ));
    }
    Ok(IneqReport::new(
        "submodularity",
        j.cond_entropy(&[0], &[1, 2])?,
        j.cond_entropy(&[0], &[2])?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::SubgroupBasis;
    use crate::random::{random_dist, random_joint, rng_from_seed};

    fn u012() -> Dist {
        Dist::uniform_on(&[0, 1, 2], 2).unwrap()
    }

    #[test]
    fn distance_examples() {
        let h = SubgroupBasis::span([0b0110, 0b1011], 4).unwrap();
        let uh = Dist::uniform_on_subgroup(&h).unwrap();
        assert!(rdist(&uh, &uh).unwrap().abs() < 1e-12);
        let a = Dist::point_mass(4, 3).unwrap();
        let b = Dist::point_mass(4, 9).unwrap();
        assert!(rdist(&a, &b).unwrap().abs() < 1e-15);
        // Convolution (1/3, 2/9, 2/9, 2/9) minus log 3.
        let conv: f64 =
            -(1.0f64 / 3.0) * (1.0f64 / 3.0).ln() - 3.0 * (2.0 / 9.0) * (2.0f64 / 9.0).ln();
        let d = rdist(&u012(), &u012()).unwrap();
        assert!((d - (conv - 3f64.ln())).abs() < 1e-12);
        assert!((d - 0.2703).abs() < 5e-5);
        let c1 = Dist::uniform_on_coset(&h, 1).unwrap();
        assert!(rdist(&c1, &uh).unwrap().abs() < 1e-12);
    }

    #[test]
    fn tau_examples() {
        let h = SubgroupBasis::span([1, 2], 3).unwrap();
        let uh = Dist::uniform_on_subgroup(&h).unwrap();
        let r = RefPair::with_default_eta(uh.clone(), uh.clone()).unwrap();
        assert!(tau(&uh, &uh, &r).unwrap().abs() < 1e-12);
        let mut rng = rng_from_seed(3);
        let x0_1 = random_dist(&mut rng, 4, 7).unwrap();
        let x0_2 = random_dist(&mut rng, 4, 5).unwrap();
        let r = RefPair::with_default_eta(x0_1.clone(), x0_2.clone()).unwrap();
        let d = rdist(&x0_1, &x0_2).unwrap();
        assert!((tau(&x0_2, &x0_1, &r).unwrap() - (1.0 + 2.0 * DEFAULT_ETA) * d).abs() < 1e-12);
        let (x1, x2) = (
            random_dist(&mut rng, 4, 3).unwrap(),
            random_dist(&mut rng, 4, 11).unwrap(),
        );
        let parts = tau_parts(&x1, &x2, &r).unwrap();
        let direct = rdist(&x1, &x2).unwrap()
            + DEFAULT_ETA * rdist(&x0_1, &x1).unwrap()
            + DEFAULT_ETA * rdist(&x0_2, &x2).unwrap();
        assert!((parts.tau(DEFAULT_ETA) - direct).abs() < 1e-12);
        assert!(RefPair::new(x0_1.clone(), x0_2.clone(), 0.2).is_err());
        assert!(RefPair::new(x0_1, x0_2, 0.0).is_err());
    }

    #[test]
    fn conditioning_on_constants_is_plain_distance() {
        let mut rng = rng_from_seed(11);
        let x = random_dist(&mut rng, 3, 5).unwrap();
        let y = random_dist(&mut rng, 3, 6).unwrap();
        let c = Dist::point_mass(3, 4).unwrap();
        let xz = CondDist::new(
            JointDist::product(&[&x, &c], &["X", "Z"]).unwrap(),
            0,
            vec![1],
        )
        .unwrap();
        let yw = CondDist::new(
            JointDist::product(&[&y, &c], &["Y", "W"]).unwrap(),
            0,
            vec![1],
        )
        .unwrap();
        let d = rdist(&x, &y).unwrap();
        assert!((cond_rdist(&xz, &yw).unwrap() - d).abs() < 1e-12);
        assert!((cond_rdist_alt(&xz, &yw).unwrap() - d).abs() < 1e-12);
    }

    #[test]
    fn full_conditioning_matches_alternative_form() {
        let mut rng = rng_from_seed(12);
        let x = random_dist(&mut rng, 3, 6).unwrap();
        let diag = JointDist::from_entries(3, &["X", "Z"], x.iter().map(|(v, p)| (vec![v, v], p)))
            .unwrap();
        let xz = CondDist::new(diag, 0, vec![1]).unwrap();
        let yw = CondDist::new(random_joint(&mut rng, 3, 2, 17).unwrap(), 0, vec![1]).unwrap();
        let a = cond_rdist(&xz, &yw).unwrap();
        let b = cond_rdist_alt(&xz, &yw).unwrap();
        assert!((a - b).abs() < 1e-10);
        // Point-mass slices on the left: the average of H[(Y|w)]/2 over w.
        let direct: f64 = yw
            .slices()
            .unwrap()
            .iter()
            .map(|(_, p, d)| p * 0.5 * d.entropy())
            .sum();
        assert!((a - direct).abs() < 1e-12);
    }

    #[test]
    fn coset_fibres_have_zero_distance() {
        let h = SubgroupBasis::span([0b0011, 0b0101], 4).unwrap();
        let x = Dist::uniform_on_coset(&h, 0b1000).unwrap();
        let y = Dist::uniform_on_coset(&h, 0b0001).unwrap();
        let s = x.xor_convolve(&y).unwrap();
        for (g, _) in s.iter() {
            let fx = x.conditioned_on_sum(&y, g).unwrap();
            let fy = y.conditioned_on_sum(&x, g).unwrap();
            assert!(rdist(&fx, &fy).unwrap().abs() < 1e-12);
        }
        let pair = JointDist::product(&[&x, &y], &["X", "Y"]).unwrap();
        let xs = pair
            .pushforward(&AxisMap::new(vec![("X", vec![0]), ("S", vec![0, 1])]))
            .unwrap();
        let ys = pair
            .pushforward(&AxisMap::new(vec![("Y", vec![1]), ("S", vec![0, 1])]))
            .unwrap();
        let a = CondDist::new(xs, 0, vec![1]).unwrap();
        let b = CondDist::new(ys, 0, vec![1]).unwrap();
        assert!(cond_rdist(&a, &b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn checker_equality_cases() {
        let mut rng = rng_from_seed(5);
        let x = random_dist(&mut rng, 4, 6).unwrap();
        let y = random_dist(&mut rng, 4, 9).unwrap();
        let delta = Dist::point_mass(4, 5).unwrap();
        let t = check_triangle(&x, &x, &x).unwrap();
        assert!(t.holds && (t.slack - t.lhs).abs() < 1e-12);
        let coset = Dist::uniform_on_coset(&SubgroupBasis::span([3, 12], 4).unwrap(), 1).unwrap();
        let t = check_triangle(&coset, &coset, &coset).unwrap();
        assert!(t.lhs.abs() < 1e-12 && t.rhs.abs() < 1e-12);
        assert!(check_triangle(&x, &y, &delta).unwrap().holds);

        let m = check_madiman(&x, &y, &delta).unwrap();
        assert!(m.slack.abs() < 1e-12);
        let full = Dist::uniform_on(&(0..16).collect::<Vec<_>>(), 4).unwrap();
        let m = check_madiman(&full, &full, &full).unwrap();
        assert!(m.lhs.abs() < 1e-12 && m.rhs.abs() < 1e-12);

        let [a, b] = check_lemma52(&x, &y, &delta).unwrap();
        assert!(a.slack.abs() < 1e-12);
        // Conditioning on Y + c pins Y down, leaving d[X; point] = H[X]/2.
        let expected = rdist(&x, &y).unwrap() - 0.5 * (x.entropy() - y.entropy());
        assert!(b.holds && (b.slack - expected).abs() < 1e-12);
        let h = SubgroupBasis::span([3, 12], 4).unwrap();
        let uh = Dist::uniform_on_subgroup(&h).unwrap();
        let [a, _] = check_lemma52(&x, &uh, &uh).unwrap();
        assert!(a.lhs.abs() < 1e-12 && a.rhs.abs() < 1e-12);

        let l = check_lemma71(&x, &y, &delta, &Dist::point_mass(4, 2).unwrap()).unwrap();
        assert!(l.holds && (l.slack - expected).abs() < 1e-12);
        let l = check_lemma71(&uh, &uh, &uh, &uh).unwrap();
        assert!(l.lhs.abs() < 1e-12 && l.rhs.abs() < 1e-12);

        let r = check_rdist_diff(&delta, &uh).unwrap();
        assert!(r.slack.abs() < 1e-12);
    }

    #[test]
    fn lemma51_cases() {
        let mut rng = rng_from_seed(8);
        let x = random_dist(&mut rng, 3, 5).unwrap();
        let y = random_dist(&mut rng, 3, 4).unwrap();
        let z = random_dist(&mut rng, 3, 3).unwrap();
        let xz = JointDist::product(&[&x, &z], &["X", "Z"]).unwrap();
        let yw = JointDist::product(&[&y, &z], &["Y", "W"]).unwrap();
        let r = check_lemma51(&xz, &yw).unwrap();
        assert!(r.slack.abs() < 1e-12);
        let diag = JointDist::from_entries(3, &["X", "Z"], x.iter().map(|(v, p)| (vec![v, v], p)))
            .unwrap();
        assert!(check_lemma51(&diag, &yw).unwrap().holds);
    }

    #[test]
    fn report_threshold() {
        assert!(IneqReport::new("t", 1.0, 1.0 - 5e-10).holds);
        assert!(!IneqReport::new("t", 1.0, 1.0 - 2e-9).holds);
    }
}
