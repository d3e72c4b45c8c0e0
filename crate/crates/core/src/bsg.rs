//! Average conditioned distance of a correlated pair (BSG bound) and
//! conditionally independent trials.

use serde::{Deserialize, Serialize};

use crate::error::{PfrError, Result};
use crate::joint::{AxisMap, JointDist};
use crate::ruzsa::{rdist, SLACK_TOL};

/// `sum_z p(z) d[(A|Z=z); (B|Z=z)] <= 3 I[A:B] + 2 H[Z] - H[A] - H[B]`
/// with `Z = A + B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsgReport {
    pub lhs: f64,
    pub i_ab: f64,
    pub h_z: f64,
    pub h_a: f64,
    pub h_b: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Evaluates both sides for an arity-2 joint `(A, B)`.
pub fn bsg_check(j: &JointDist) -> Result<BsgReport> {
    if j.arity() != 2 {
        return Err(PfrError::InvalidParameter(
            "bsg_check needs an arity-2 joint".into(),
        ));
    }
    let abz = j.pushforward(&AxisMap::new(vec![
        ("A", vec![0]),
        ("B", vec![1]),
        ("Z", vec![0, 1]),
    ]))?;
    let mut lhs = 0.0;
    let a_slices = abz.slices(0, &[2])?;
    let b_slices = abz.slices(1, &[2])?;
    for ((za, pz, a), (zb, _, b)) in a_slices.iter().zip(&b_slices) {
        debug_assert_eq!(za, zb);
        lhs += pz * rdist(a, b)?;
    }
    let i_ab = abz.mutual_info(&[0], &[1])?;
    let h_z = abz.joint_entropy(&[2])?;
    let h_a = abz.joint_entropy(&[0])?;
    let h_b = abz.joint_entropy(&[1])?;
    let rhs = 3.0 * i_ab + 2.0 * h_z - h_a - h_b;
    let slack = rhs - lhs;
    Ok(BsgReport {
        lhs,
        i_ab,
        h_z,
        h_a,
        h_b,
        rhs,
        slack,
        holds: slack >= -SLACK_TOL,
    })
}

/// `H[X1, X2, Y] = 2 H[X,Y] - H[Y]` for two copies of `X` that are
/// conditionally independent given `Y`. Axis 0 is `X`, axis 1 is `Y`.
pub fn cond_indep_trials_entropy(j: &JointDist) -> Result<f64> {
    if j.arity() != 2 {
        return Err(PfrError::InvalidParameter(
            "trials need an arity-2 joint".into(),
        ));
    }
    Ok(2.0 * j.joint_entropy(&[0, 1])? - j.joint_entropy(&[1])?)
}

/// The explicit joint of `(X1, X2, Y)` with
/// `p(x1, x2, y) = p(x1, y) p(x2, y) / p(y)`.
pub fn cond_indep_trials_joint(j: &JointDist) -> Result<JointDist> {
    if j.arity() != 2 {
        return Err(PfrError::InvalidParameter(
            "trials need an arity-2 joint".into(),
        ));
    }
    let mut entries = Vec::new();
    for (y, py, x_given_y) in j.slices(0, &[1])? {
        let atoms: Vec<_> = x_given_y.iter().collect();
        for &(x1, p1) in &atoms {
            for &(x2, p2) in &atoms {
                entries.push((vec![x1, x2, y as u32], py * p1 * p2));
            }
        }
    }
    JointDist::from_entries(j.dim(), &["X1", "X2", "Y"], entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Dist;
    use crate::group::SubgroupBasis;
    use crate::random::{random_dist, random_joint, rng_from_seed};

    #[test]
    fn independent_subgroup_pair_is_tight() {
        let h = SubgroupBasis::span([0b0011, 0b0110], 4).unwrap();
        let uh = Dist::uniform_on_subgroup(&h).unwrap();
        let r = bsg_check(&JointDist::product(&[&uh, &uh], &["A", "B"]).unwrap()).unwrap();
        assert!(r.lhs.abs() < 1e-12 && r.rhs.abs() < 1e-12 && r.holds);
    }

    #[test]
    fn diagonal_pair() {
        let x = random_dist(&mut rng_from_seed(1), 3, 5).unwrap();
        let diag = JointDist::from_entries(3, &["A", "B"], x.iter().map(|(v, p)| (vec![v, v], p)))
            .unwrap();
        let r = bsg_check(&diag).unwrap();
        // Z = 0 almost surely, so the left side is d[X;X] and the right 3H - 2H.
        assert!((r.lhs - rdist(&x, &x).unwrap()).abs() < 1e-12);
        assert!((r.rhs - x.entropy()).abs() < 1e-12);
        assert!(r.holds);
    }

    #[test]
    fn trials_formula_matches_explicit_joint() {
        let mut rng = rng_from_seed(4);
        for _ in 0..10 {
            let j = random_joint(&mut rng, 3, 2, 20).unwrap();
            let t = cond_indep_trials_joint(&j).unwrap();
            let explicit = t.joint_entropy(&[0, 1, 2]).unwrap();
            assert!((explicit - cond_indep_trials_entropy(&j).unwrap()).abs() < 1e-10);
        }
        let x = random_dist(&mut rng, 3, 6).unwrap();
        let y = random_dist(&mut rng, 3, 4).unwrap();
        let ind = JointDist::product(&[&x, &y], &["X", "Y"]).unwrap();
        let h = cond_indep_trials_entropy(&ind).unwrap();
        assert!((h - (2.0 * x.entropy() + y.entropy())).abs() < 1e-12);
        let diag = JointDist::from_entries(3, &["X", "Y"], x.iter().map(|(v, p)| (vec![v, v], p)))
            .unwrap();
        assert!((cond_indep_trials_entropy(&diag).unwrap() - x.entropy()).abs() < 1e-12);
    }
}
