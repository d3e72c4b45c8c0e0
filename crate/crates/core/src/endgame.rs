//! Endgame quantities for independent `X1, X2` and fresh copies
//! `X1~, X2~`:
//!
//! `U = X1 + X2`, `V = X1~ + X2`, `W = X1 + X1~`, `S = X1 + X2 + X1~ + X2~`,
//!
//! with `U + V + W = 0`, and the search over conditioned pairs built from a
//! triple summing to zero.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::Dist;
use crate::error::{PfrError, Result};
use crate::group::GroupElem;
use crate::joint::{AxisMap, JointDist};
use crate::ruzsa::{rdist, RefPair};
use crate::table::Table;
use crate::wht;

/// Largest dimension for which the dense `8^n` table is built.
pub const MAX_DENSE_ENDGAME_DIM: u32 = 7;
/// Default cap on support 4-tuples enumerated by the sparse path.
pub const DEFAULT_MAX_SPARSE_WORK: u64 = 200_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableMethod {
    /// Dense when the dimension allows it and the supports are large.
    Auto,
    /// One transform-based convolution per `(u, v)`.
    Dense,
    /// Enumeration of support 4-tuples.
    Sparse,
}

#[derive(Clone, Copy, Debug)]
pub struct EndgameConfig {
    pub method: TableMethod,
    pub max_dense_dim: u32,
    pub max_sparse_work: u64,
}

impl Default for EndgameConfig {
    fn default() -> Self {
        Self {
            method: TableMethod::Auto,
            max_dense_dim: MAX_DENSE_ENDGAME_DIM,
            max_sparse_work: DEFAULT_MAX_SPARSE_WORK,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EndgameTables {
    /// Joint law of `(U, V, S)`.
    pub joint_uvs: JointDist,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub h_s: f64,
    pub k: f64,
}

/// Scalar part of [`EndgameTables`], for reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndgameSummary {
    pub dim: u32,
    pub support_size: usize,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub h_s: f64,
    pub k: f64,
}

impl EndgameTables {
    pub fn summary(&self) -> EndgameSummary {
        EndgameSummary {
            dim: self.joint_uvs.dim(),
            support_size: self.joint_uvs.support_size(),
            i1: self.i1,
            i2: self.i2,
            i3: self.i3,
            h_s: self.h_s,
            k: self.k,
        }
    }

    /// Joint law of `(U, V, W, S)` with `W = U + V`.
    pub fn joint_uvws(&self) -> Result<JointDist> {
        self.joint_uvs.pushforward(&AxisMap::new(vec![
            ("U", vec![0]),
            ("V", vec![1]),
            ("W", vec![0, 1]),
            ("S", vec![2]),
        ]))
    }
}

#[inline]
fn key(u: GroupElem, v: GroupElem, s: GroupElem, n: u32) -> u64 {
    u as u64 | ((v as u64) << n) | ((s as u64) << (2 * n))
}

/// `p(u, v, s) = sum_{x2} p2(x2) p1(u+x2) p1(v+x2) p2(s+u+v+x2)`, one
/// convolution of `q(x2) = p2(x2) p1(u+x2) p1(v+x2)` with `p2` per `(u, v)`.
fn dense_uvs(p1: &Dist, p2: &Dist) -> Table {
    let n = p1.dim();
    let size = 1usize << n;
    let a = p1.to_dense_vec();
    let b = p2.to_dense_vec();
    let b_support: Vec<usize> = (0..size).filter(|&x| b[x] > 0.0).collect();
    let mut fb = b.clone();
    wht::wht_in_place(&mut fb);
    let mut fb_ind: Vec<f64> = b.iter().map(|&w| if w > 0.0 { 1.0 } else { 0.0 }).collect();
    wht::wht_in_place(&mut fb_ind);

    let rows: Vec<Vec<(u64, f64)>> = (0..size)
        .into_par_iter()
        .map(|u| {
            let mut out = Vec::new();
            let mut q = vec![0.0; size];
            let mut ind = vec![0.0; size];
            for v in 0..size {
                let mut nnz = 0usize;
                for x2 in 0..size {
                    let w = b[x2] * a[u ^ x2] * a[v ^ x2];
                    q[x2] = w;
                    ind[x2] = if w > 0.0 { 1.0 } else { 0.0 };
                    nnz += (w > 0.0) as usize;
                }
                if nnz == 0 {
                    continue;
                }
                let uv = u ^ v;
                if nnz * b_support.len() < (n as usize).max(1) * size {
                    let mut r = vec![0.0; size];
                    for x2 in (0..size).filter(|&x| q[x] > 0.0) {
                        for &y in &b_support {
                            r[x2 ^ y] += q[x2] * b[y];
                        }
                    }
                    for (t, &w) in r.iter().enumerate() {
                        if w > 0.0 {
                            out.push((
                                key(u as GroupElem, v as GroupElem, (t ^ uv) as GroupElem, n),
                                w,
                            ));
                        }
                    }
                } else {
                    wht::wht_in_place(&mut q);
                    wht::wht_in_place(&mut ind);
                    for i in 0..size {
                        q[i] *= fb[i];
                        ind[i] *= fb_ind[i];
                    }
                    wht::iwht_in_place(&mut q);
                    wht::iwht_in_place(&mut ind);
                    // `ind` counts contributing pairs exactly up to round-off,
                    // which separates structural zeros from tiny masses.
                    for t in 0..size {
                        if ind[t] > 0.5 && q[t] > 0.0 {
                            out.push((
                                key(u as GroupElem, v as GroupElem, (t ^ uv) as GroupElem, n),
                                q[t],
                            ));
                        }
                    }
                }
            }
            out
        })
        .collect();
    let bits = 3 * n;
    let mut dense = vec![0.0; 1usize << bits];
    for row in rows {
        for (k, w) in row {
            dense[k as usize] = w;
        }
    }
    Table::Dense(dense)
}

fn sparse_uvs(p1: &Dist, p2: &Dist) -> Table {
    let n = p1.dim();
    let a: Vec<(GroupElem, f64)> = p1.iter().collect();
    let b: Vec<(GroupElem, f64)> = p2.iter().collect();
    let chunks: Vec<HashMap<u64, f64>> = b
        .par_iter()
        .map(|&(x2, q2)| {
            let mut acc: HashMap<u64, f64> = HashMap::new();
            for &(x1, q1) in &a {
                let u = x1 ^ x2;
                for &(y1, r1) in &a {
                    let v = y1 ^ x2;
                    let w = q2 * q1 * r1;
                    for &(y2, r2) in &b {
                        *acc.entry(key(u, v, u ^ y1 ^ y2, n)).or_insert(0.0) += w * r2;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total: HashMap<u64, f64> = HashMap::new();
    for chunk in chunks {
        let mut items: Vec<(u64, f64)> = chunk.into_iter().collect();
        items.sort_unstable_by_key(|e| e.0);
        for (k, w) in items {
            *total.entry(k).or_insert(0.0) += w;
        }
    }
    let mut items: Vec<(u64, f64)> = total.into_iter().collect();
    items.sort_unstable_by_key(|e| e.0);
    Table::Sparse(items)
}

/// Joint law of `(U, V, S)` and the conditional informations
/// `I1 = I[U:V|S]`, `I2 = I[W:U|S]`, `I3 = I[V:W|S]`, with `W = U + V`.
pub fn endgame_tables(x1: &Dist, x2: &Dist) -> Result<EndgameTables> {
    endgame_tables_with(x1, x2, &EndgameConfig::default())
}

pub fn endgame_tables_with(x1: &Dist, x2: &Dist, cfg: &EndgameConfig) -> Result<EndgameTables> {
    if x1.dim() != x2.dim() {
        return Err(PfrError::DimensionMismatch {
            expected: x1.dim(),
            found: x2.dim(),
        });
    }
    let n = x1.dim();
    if 3 * n > 63 {
        return Err(PfrError::CostGuard(format!(
            "a joint of three F_2^{n} variables does not fit a 64-bit key"
        )));
    }
    let (s1, s2) = (x1.support_size() as u64, x2.support_size() as u64);
    let work = s1.saturating_mul(s1).saturating_mul(s2).saturating_mul(s2);
    let dense_cost = (n as u64).max(1).saturating_mul(1u64 << (3 * n).min(62));
    let dense_ok = n <= cfg.max_dense_dim;
    let use_dense = match cfg.method {
        TableMethod::Dense => {
            if !dense_ok {
                return Err(PfrError::CostGuard(format!(
                    "dense endgame table refused at n = {n} (limit {})",
                    cfg.max_dense_dim
                )));
            }
            true
        }
        TableMethod::Sparse => false,
        TableMethod::Auto => dense_ok && work >= dense_cost,
    };
    if !use_dense && work > cfg.max_sparse_work {
        return Err(PfrError::CostGuard(format!(
            "sparse endgame enumeration needs {work} support tuples (limit {})",
            cfg.max_sparse_work
        )));
    }
    let table = if use_dense {
        dense_uvs(x1, x2)
    } else {
        sparse_uvs(x1, x2)
    };
    let joint_uvs = JointDist::from_table(n, vec!["U".into(), "V".into(), "S".into()], table)?;
    let wus = joint_uvs.pushforward(&AxisMap::new(vec![
        ("W", vec![0, 1]),
        ("U", vec![0]),
        ("S", vec![2]),
    ]))?;
    let vws = joint_uvs.pushforward(&AxisMap::new(vec![
        ("V", vec![1]),
        ("W", vec![0, 1]),
        ("S", vec![2]),
    ]))?;
    let i1 = joint_uvs.cond_mutual_info(&[0], &[1], &[2])?;
    let i2 = wus.cond_mutual_info(&[0], &[1], &[2])?;
    let i3 = vws.cond_mutual_info(&[0], &[1], &[2])?;
    let h_s = joint_uvs.joint_entropy(&[2])?;
    Ok(EndgameTables {
        joint_uvs,
        i1,
        i2,
        i3,
        h_s,
        k: rdist(x1, x2)?,
    })
}

/// Which conditioned pair the search picked: `T'_1 = (T_alpha | T_gamma = t)`,
/// `T'_2 = (T_beta | T_gamma = t)`; indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndgameChoice {
    pub alpha: usize,
    pub beta: usize,
    pub gamma: usize,
    pub t: GroupElem,
}

#[derive(Clone, Debug)]
pub struct AbstractEndgame {
    pub t1p: Dist,
    pub t2p: Dist,
    pub choice: EndgameChoice,
    /// `psi` of the returned pair.
    pub psi: f64,
    /// `delta + (eta/3)(delta + sum_{i,j} (d[X0_i;T_j] - d[X0_i;X_i]))`.
    pub bound: f64,
    pub delta: f64,
    /// Mean of `psi` over permutations of the conditioning-averaged values.
    pub average: f64,
}

impl AbstractEndgame {
    /// The certificate `psi <= bound + 1e-9`.
    pub fn certified(&self) -> bool {
        self.psi <= self.bound + 1e-9
    }
}

/// Baselines `d[X0_1;X1]`, `d[X0_2;X2]` used by `psi`.
#[derive(Clone, Debug)]
pub struct PsiContext<'a> {
    pub reference: &'a RefPair,
    pub base1: f64,
    pub base2: f64,
}

impl<'a> PsiContext<'a> {
    pub fn new(reference: &'a RefPair, x1: &Dist, x2: &Dist) -> Result<Self> {
        Ok(Self {
            reference,
            base1: rdist(&reference.x0_1, x1)?,
            base2: rdist(&reference.x0_2, x2)?,
        })
    }

    /// `psi[Y1;Y2] = d[Y1;Y2] + eta (d[X0_1;Y1] - d[X0_1;X1]) + eta (d[X0_2;Y2] - d[X0_2;X2])`.
    pub fn psi(&self, y1: &Dist, y2: &Dist) -> Result<f64> {
        let eta = self.reference.eta;
        Ok(rdist(y1, y2)?
            + eta * (rdist(&self.reference.x0_1, y1)? - self.base1)
            + eta * (rdist(&self.reference.x0_2, y2)? - self.base2))
    }
}

const PERMUTATIONS: [(usize, usize, usize); 6] = [
    (1, 2, 0),
    (2, 1, 0),
    (0, 2, 1),
    (2, 0, 1),
    (0, 1, 2),
    (1, 0, 2),
];

/// Every conditioned pair `((T_alpha|T_gamma=t), (T_beta|T_gamma=t))` with
/// its weight `p(T_gamma = t)` and `psi`, in `(gamma, alpha, beta, t)` order.
pub fn endgame_pairs(
    t: &JointDist,
    ctx: &PsiContext,
) -> Result<Vec<(EndgameChoice, f64, Dist, Dist, f64)>> {
    let triple = triple_of(t)?;
    let mut jobs = Vec::new();
    for &(alpha, beta, gamma) in &PERMUTATIONS {
        for (tv, p, ya) in triple.slices(alpha, &[gamma])? {
            let tv = tv as GroupElem;
            // T_alpha + T_beta = T_gamma, so the partner is a translate.
            let yb = ya.translate(tv)?;
            jobs.push((
                EndgameChoice {
                    alpha: alpha + 1,
                    beta: beta + 1,
                    gamma: gamma + 1,
                    t: tv,
                },
                p,
                ya,
                yb,
            ));
        }
    }
    jobs.into_par_iter()
        .map(|(c, p, ya, yb)| {
            let psi = ctx.psi(&ya, &yb)?;
            Ok((c, p, ya, yb, psi))
        })
        .collect()
}

fn triple_of(t: &JointDist) -> Result<JointDist> {
    if t.arity() != 2 {
        return Err(PfrError::InvalidParameter(
            "abstract endgame needs the pair (T1, T2)".into(),
        ));
    }
    t.pushforward(&AxisMap::new(vec![
        ("T1", vec![0]),
        ("T2", vec![1]),
        ("T3", vec![0, 1]),
    ]))
}

/// Exhaustive search over the six permutations and all conditioning
/// values; returns the exact argmin of `psi`, ties resolved by the first
/// `(gamma, alpha, beta, t)` in lexicographic order.
pub fn abstract_endgame(
    t: &JointDist,
    reference: &RefPair,
    x1: &Dist,
    x2: &Dist,
) -> Result<AbstractEndgame> {
    let ctx = PsiContext::new(reference, x1, x2)?;
    abstract_endgame_in(t, &ctx)
}

pub fn abstract_endgame_in(t: &JointDist, ctx: &PsiContext) -> Result<AbstractEndgame> {
    let triple = triple_of(t)?;
    if triple.support_size() == 0 {
        return Err(PfrError::Empty);
    }
    let delta = triple.mutual_info(&[0], &[1])?
        + triple.mutual_info(&[0], &[2])?
        + triple.mutual_info(&[1], &[2])?;
    let mut ref_sum = 0.0;
    for j in 0..3 {
        let tj = triple.marginal_dist(j)?;
        ref_sum += rdist(&ctx.reference.x0_1, &tj)? - ctx.base1;
        ref_sum += rdist(&ctx.reference.x0_2, &tj)? - ctx.base2;
    }
    let eta = ctx.reference.eta;
    let bound = delta + eta / 3.0 * (delta + ref_sum);

    let mut pairs = endgame_pairs(t, ctx)?;
    pairs.sort_by(|a, b| {
        let ka = (a.0.gamma, a.0.alpha, a.0.beta, a.0.t);
        let kb = (b.0.gamma, b.0.alpha, b.0.beta, b.0.t);
        ka.cmp(&kb)
    });
    let average = pairs.iter().map(|e| e.1 * e.4).sum::<f64>() / 6.0;
    let best = pairs
        .into_iter()
        .reduce(|best, e| if e.4 < best.4 { e } else { best })
        .ok_or(PfrError::Empty)?;
    Ok(AbstractEndgame {
        t1p: best.2,
        t2p: best.3,
        choice: best.0,
        psi: best.4,
        bound,
        delta,
        average,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::SubgroupBasis;
    use crate::random::{random_dist, random_joint, random_uniform, rng_from_seed};

    /// Four-fold enumeration of `(x1, x2, x1~, x2~)`.
    fn brute_uvs(p1: &Dist, p2: &Dist) -> Vec<f64> {
        let n = p1.dim();
        let size = 1usize << n;
        let a = p1.to_dense_vec();
        let b = p2.to_dense_vec();
        let mut out = vec![0.0; 1 << (3 * n)];
        for x1 in 0..size {
            for x2 in 0..size {
                for y1 in 0..size {
                    for y2 in 0..size {
                        let w = a[x1] * b[x2] * a[y1] * b[y2];
                        if w > 0.0 {
                            let (u, v, s) = (x1 ^ x2, y1 ^ x2, x1 ^ x2 ^ y1 ^ y2);
                            out[key(u as u32, v as u32, s as u32, n) as usize] += w;
                        }
                    }
                }
            }
        }
        out
    }

    fn max_dev(t: &EndgameTables, oracle: &[f64]) -> f64 {
        let mut dev: f64 = 0.0;
        for (k, &w) in oracle.iter().enumerate() {
            let vals = t.joint_uvs.values(k as u64);
            dev = dev.max((t.joint_uvs.prob(&vals) - w).abs());
        }
        dev
    }

    #[test]
    fn tables_match_brute_force() {
        let mut rng = rng_from_seed(21);
        for n in [2u32, 3] {
            for _ in 0..4 {
                let x1 = random_uniform(&mut rng, n, 1 + n as usize).unwrap();
                let x2 = random_dist(&mut rng, n, 1 << (n - 1)).unwrap();
                let oracle = brute_uvs(&x1, &x2);
                for method in [TableMethod::Dense, TableMethod::Sparse] {
                    let cfg = EndgameConfig {
                        method,
                        ..Default::default()
                    };
                    let t = endgame_tables_with(&x1, &x2, &cfg).unwrap();
                    assert!(max_dev(&t, &oracle) < 1e-12, "{method:?}");
                    assert!((t.i2 - t.i3).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn subgroup_inputs_give_zero_informations() {
        let h = SubgroupBasis::span([0b011, 0b110], 3).unwrap();
        let uh = Dist::uniform_on_subgroup(&h).unwrap();
        let t = endgame_tables(&uh, &uh).unwrap();
        for v in [t.i1, t.i2, t.i3, t.k] {
            assert!(v.abs() < 1e-12);
        }
        assert!((t.h_s - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn dense_refused_above_limit() {
        let x = Dist::point_mass(8, 0).unwrap();
        let cfg = EndgameConfig {
            method: TableMethod::Dense,
            ..Default::default()
        };
        assert!(matches!(
            endgame_tables_with(&x, &x, &cfg),
            Err(PfrError::CostGuard(_))
        ));
        let guarded = EndgameConfig {
            max_sparse_work: 10,
            ..Default::default()
        };
        let y = random_uniform(&mut rng_from_seed(1), 9, 4).unwrap();
        assert!(matches!(
            endgame_tables_with(&y, &y, &guarded),
            Err(PfrError::CostGuard(_))
        ));
    }

    fn reference(n: u32, seed: u64) -> (RefPair, Dist, Dist) {
        let mut rng = rng_from_seed(seed);
        let r = RefPair::with_default_eta(
            random_dist(&mut rng, n, 5).unwrap(),
            random_dist(&mut rng, n, 6).unwrap(),
        )
        .unwrap();
        let x1 = random_dist(&mut rng, n, 4).unwrap();
        let x2 = random_dist(&mut rng, n, 7).unwrap();
        (r, x1, x2)
    }

    #[test]
    fn independent_triple_finds_zero_distance_pair() {
        // T1, T2 independent uniform on cosets of one subgroup: every
        // conditioned pair is a coset pair.
        let h = SubgroupBasis::span([0b001, 0b010], 3).unwrap();
        let t1 = Dist::uniform_on_coset(&h, 0b100).unwrap();
        let t = JointDist::product(&[&t1, &t1], &["T1", "T2"]).unwrap();
        let (r, x1, x2) = reference(3, 2);
        let out = abstract_endgame(&t, &r, &x1, &x2).unwrap();
        assert!(out.delta.abs() < 1e-12);
        assert!(rdist(&out.t1p, &out.t2p).unwrap().abs() < 1e-12);
        assert!(out.certified());
    }

    #[test]
    fn point_masses() {
        let t = JointDist::from_entries(3, &["T1", "T2"], vec![(vec![3, 5], 1.0)]).unwrap();
        let (r, x1, x2) = reference(3, 3);
        let out = abstract_endgame(&t, &r, &x1, &x2).unwrap();
        assert!(rdist(&out.t1p, &out.t2p).unwrap().abs() < 1e-15);
        assert_eq!(out.t1p.support_size(), 1);
        assert!(out.certified());
    }

    #[test]
    fn random_triples_satisfy_certificate_and_are_exact_argmin() {
        let (r, x1, x2) = reference(3, 4);
        let ctx = PsiContext::new(&r, &x1, &x2).unwrap();
        let mut rng = rng_from_seed(40);
        for _ in 0..10 {
            let t = random_joint(&mut rng, 3, 2, 12).unwrap();
            let out = abstract_endgame(&t, &r, &x1, &x2).unwrap();
            assert!(out.certified(), "{} > {}", out.psi, out.bound);
            assert!(out.average <= out.bound + 1e-9);
            // Oracle: condition explicitly for every permutation and value.
            let triple = t
                .pushforward(&AxisMap::new(vec![
                    ("T1", vec![0]),
                    ("T2", vec![1]),
                    ("T3", vec![0, 1]),
                ]))
                .unwrap();
            let mut best = f64::INFINITY;
            for (a, b, g) in [
                (0, 1, 2),
                (1, 0, 2),
                (0, 2, 1),
                (2, 0, 1),
                (1, 2, 0),
                (2, 1, 0),
            ] {
                let gm = triple.marginal_dist(g).unwrap();
                for (tv, _) in gm.iter() {
                    let slice = triple.condition(g, tv).unwrap();
                    let (ia, ib) = (if a < g { a } else { a - 1 }, if b < g { b } else { b - 1 });
                    let ya = slice.marginal_dist(ia).unwrap();
                    let yb = slice.marginal_dist(ib).unwrap();
                    best = best.min(ctx.psi(&ya, &yb).unwrap());
                }
            }
            assert!((best - out.psi).abs() < 1e-12);
        }
    }
}
