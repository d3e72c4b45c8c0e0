//! The fibring identity: for independent `Z1, Z2` and a homomorphism `pi`,
//!
//! `d[Z1;Z2] = d[pi Z1; pi Z2] + d[Z1|pi Z1; Z2|pi Z2]
//!            + I[Z1+Z2 : (pi Z1, pi Z2) | pi(Z1+Z2)]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dist::Dist;
use crate::error::{PfrError, Result};
use crate::group::{check_dim, GroupElem, LinearMap};
use crate::ruzsa::{average_rdist, rdist, Slice};
use crate::table::entropy_of_weights;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FibringReport {
    pub d_total: f64,
    pub d_projected: f64,
    pub d_fibre: f64,
    pub info_term: f64,
    pub residual: f64,
}

/// Fibres `(Z | pi Z = a)` with their probabilities, ordered by `a`.
fn fibres(z: &Dist, pi: &LinearMap) -> Result<Vec<Slice>> {
    let mut groups: BTreeMap<GroupElem, Vec<(GroupElem, f64)>> = BTreeMap::new();
    for (x, p) in z.iter() {
        groups.entry(pi.apply(x)).or_default().push((x, p));
    }
    groups
        .into_values()
        .map(|atoms| {
            let w: f64 = atoms.iter().map(|a| a.1).sum();
            Ok(Slice::new(w, &Dist::from_entries(z.dim(), atoms)?))
        })
        .collect()
}

/// Entropy of a list of keyed contributions after merging equal keys.
fn merged_entropy(mut items: Vec<(u64, f64)>) -> f64 {
    items.sort_unstable_by_key(|e| e.0);
    let mut merged: Vec<f64> = Vec::with_capacity(items.len());
    let mut last = None;
    for (k, w) in items {
        if last == Some(k) {
            *merged.last_mut().expect("nonempty") += w;
        } else {
            merged.push(w);
            last = Some(k);
        }
    }
    let max = merged.iter().copied().fold(0.0, f64::max);
    entropy_of_weights(merged.into_iter(), max)
}

/// All four terms of the identity, with `Z1, Z2` independent. The fibre term
/// is computed by averaging distances of fibres.
pub fn fibring_decompose(z1: &Dist, z2: &Dist, pi: &LinearMap) -> Result<FibringReport> {
    if z1.dim() != z2.dim() {
        return Err(PfrError::DimensionMismatch {
            expected: z1.dim(),
            found: z2.dim(),
        });
    }
    if pi.in_dim != z1.dim() {
        return Err(PfrError::DimensionMismatch {
            expected: pi.in_dim,
            found: z1.dim(),
        });
    }
    let sum = z1.xor_convolve(z2)?;
    let (a, b) = (z1.map(pi)?, z2.map(pi)?);
    let d_total = sum.entropy() - 0.5 * z1.entropy() - 0.5 * z2.entropy();
    let d_projected = rdist(&a, &b)?;
    let d_fibre = average_rdist(z1.dim(), &fibres(z1, pi)?, &fibres(z2, pi)?)?;

    // pi(Z1+Z2) is a function of Z1+Z2 and of (pi Z1, pi Z2), so
    // I[D : (A,B) | A+B] = H[D] + H[A,B] - H[D,A,B] - H[A+B].
    let (m, k) = (z1.dim(), pi.out_dim);
    let b_atoms: Vec<(GroupElem, GroupElem, f64)> =
        z2.iter().map(|(y, q)| (y, pi.apply(y), q)).collect();
    let triples: Vec<(u64, f64)> = z1
        .iter()
        .flat_map(|(x, p)| {
            let px = pi.apply(x) as u64;
            b_atoms.iter().map(move |&(y, py, q)| {
                (
                    ((x ^ y) as u64) | (px << m) | ((py as u64) << (m + k)),
                    p * q,
                )
            })
        })
        .collect();
    let h_dab = merged_entropy(triples);
    let h_proj_sum = sum.map(pi)?.entropy();
    let info_term = sum.entropy() + a.entropy() + b.entropy() - h_dab - h_proj_sum;

    Ok(FibringReport {
        d_total,
        d_projected,
        d_fibre,
        info_term,
        residual: d_total - d_projected - d_fibre - info_term,
    })
}

/// Law of `(Y, Y')` for independent `Y, Y'` on F_2^n, encoded in F_2^(2n)
/// with `Y` in the low bits.
pub fn pair_dist(low: &Dist, high: &Dist) -> Result<Dist> {
    if low.dim() != high.dim() {
        return Err(PfrError::DimensionMismatch {
            expected: low.dim(),
            found: high.dim(),
        });
    }
    let n = low.dim();
    check_dim(2 * n)?;
    let h: Vec<(GroupElem, f64)> = high.iter().collect();
    Dist::from_entries(
        2 * n,
        low.iter()
            .flat_map(|(x, p)| h.iter().map(move |&(y, q)| (x | (y << n), p * q))),
    )
}

/// The identity for `Z1 = (Y1, Y3)`, `Z2 = (Y2, Y4)` and `pi(x, y) = x + y`:
/// `d_total` is then `d[Y1;Y2] + d[Y3;Y4]`.
pub fn cor_fibre(y1: &Dist, y2: &Dist, y3: &Dist, y4: &Dist) -> Result<FibringReport> {
    let z1 = pair_dist(y1, y3)?;
    let z2 = pair_dist(y2, y4)?;
    fibring_decompose(&z1, &z2, &LinearMap::pair_sum(y1.dim())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::SubgroupBasis;
    use crate::joint::JointDist;
    use crate::random::{random_surjection, random_uniform, rng_from_seed};

    #[test]
    fn identity_and_zero_maps() {
        let mut rng = rng_from_seed(2);
        let z1 = random_uniform(&mut rng, 4, 6).unwrap();
        let z2 = random_uniform(&mut rng, 4, 9).unwrap();
        let id = fibring_decompose(&z1, &z2, &LinearMap::identity(4).unwrap()).unwrap();
        assert!(id.d_fibre.abs() < 1e-12 && id.info_term.abs() < 1e-12);
        assert!((id.d_projected - id.d_total).abs() < 1e-12);
        let zero = fibring_decompose(&z1, &z2, &LinearMap::zero(4, 2).unwrap()).unwrap();
        assert!(zero.d_projected.abs() < 1e-12 && zero.info_term.abs() < 1e-12);
        assert!((zero.d_fibre - zero.d_total).abs() < 1e-12);
    }

    /// Every term from scratch: the fibre distance from explicit
    /// conditionals and the information term from the four-axis joint.
    #[test]
    fn random_surjection_matches_enumeration() {
        let mut rng = rng_from_seed(9);
        for _ in 0..20 {
            let z1 = random_uniform(&mut rng, 4, 7).unwrap();
            let z2 = random_uniform(&mut rng, 4, 5).unwrap();
            let pi = random_surjection(&mut rng, 4, 2).unwrap();
            let r = fibring_decompose(&z1, &z2, &pi).unwrap();
            assert!(r.residual.abs() < 1e-9);

            let mut fibre = 0.0;
            for a in 0..4u32 {
                for b in 0..4u32 {
                    let pa: f64 = z1
                        .iter()
                        .filter(|&(x, _)| pi.apply(x) == a)
                        .map(|e| e.1)
                        .sum();
                    let pb: f64 = z2
                        .iter()
                        .filter(|&(y, _)| pi.apply(y) == b)
                        .map(|e| e.1)
                        .sum();
                    if pa > 0.0 && pb > 0.0 {
                        let fa =
                            Dist::from_entries(4, z1.iter().filter(|&(x, _)| pi.apply(x) == a))
                                .unwrap();
                        let fb =
                            Dist::from_entries(4, z2.iter().filter(|&(y, _)| pi.apply(y) == b))
                                .unwrap();
                        fibre += pa * pb * rdist(&fa, &fb).unwrap();
                    }
                }
            }
            assert!((fibre - r.d_fibre).abs() < 1e-12);

            let j = JointDist::from_entries(
                4,
                &["Z1", "Z2"],
                z1.iter()
                    .flat_map(|(x, p)| z2.iter().map(move |(y, q)| (vec![x, y], p * q)))
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            let proj = |v: u32| {
                (0..4)
                    .filter(|&i| v >> i & 1 == 1)
                    .fold(0, |acc, i| acc ^ pi.images[i])
            };
            let four = JointDist::from_entries(
                4,
                &["D", "A", "B", "S"],
                j.iter().map(|(v, p)| {
                    (
                        vec![v[0] ^ v[1], proj(v[0]), proj(v[1]), proj(v[0] ^ v[1])],
                        p,
                    )
                }),
            )
            .unwrap();
            let info = four.cond_mutual_info(&[0], &[1, 2], &[3]).unwrap();
            assert!((info - r.info_term).abs() < 1e-12);
            assert!(info >= -1e-9);
        }
    }

    #[test]
    fn point_mass_projection_has_no_information_term() {
        let h = SubgroupBasis::span([0b0011], 4).unwrap();
        let pi = LinearMap::new(4, 2, vec![0b01, 0b01, 0b10, 0b00]).unwrap();
        let z1 = Dist::uniform_on_subgroup(&h).unwrap();
        assert_eq!(z1.map(&pi).unwrap().support_size(), 1);
        let z2 = random_uniform(&mut rng_from_seed(4), 4, 10).unwrap();
        let r = fibring_decompose(&z1, &z2, &pi).unwrap();
        assert!(r.info_term.abs() < 1e-9 && r.residual.abs() < 1e-9);
    }

    #[test]
    fn cor_fibre_total_is_sum_of_distances() {
        let mut rng = rng_from_seed(6);
        let ys: Vec<Dist> = (0..4)
            .map(|i| random_uniform(&mut rng, 4, 3 + i).unwrap())
            .collect();
        let r = cor_fibre(&ys[0], &ys[1], &ys[2], &ys[3]).unwrap();
        let expect = rdist(&ys[0], &ys[1]).unwrap() + rdist(&ys[2], &ys[3]).unwrap();
        assert!((r.d_total - expect).abs() < 1e-10);
        assert!(r.residual.abs() < 1e-9);

        let h = SubgroupBasis::span([0b0101, 0b1100], 4).unwrap();
        let uh = Dist::uniform_on_subgroup(&h).unwrap();
        let r = cor_fibre(&uh, &uh, &uh, &uh).unwrap();
        for v in [r.d_total, r.d_projected, r.d_fibre, r.info_term] {
            assert!(v.abs() < 1e-12);
        }
    }
}
