//! Small worked examples: the three set configurations used to exercise
//! the move classes, and a corpus of coset unions for end-to-end runs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::descent::{
    descend_with, extract_subgroup, probe_classes, ClassProbe, DescentConfig, DescentState,
    MoveKind, MoveRegistry, SelectionRule, SubgroupCertificate, SubgroupFit,
};
use crate::dist::Dist;
use crate::error::{PfrError, Result};
use crate::group::{check_dim, group_size, GroupElem, SubgroupBasis};
use crate::io::SetInput;
use crate::random::{random_subgroup, random_subset, rng_from_seed, PfrRng};
use crate::ruzsa::{tau, RefPair, DEFAULT_ETA};

pub const DEMO_DIM: u32 = 6;
pub const DEMO_SEED: u64 = 42;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoParams {
    pub n: u32,
    /// Rank of the subgroup `H`.
    pub rank: usize,
    /// Cosets per set (demos 2 and 3).
    pub m: usize,
    /// Subsampling density.
    pub density: f64,
    pub seed: u64,
}

impl DemoParams {
    pub fn default_for(id: u8) -> Result<Self> {
        let p = match id {
            1 => Self {
                n: DEMO_DIM,
                rank: 4,
                m: 1,
                density: 0.5,
                seed: DEMO_SEED,
            },
            2 => Self {
                n: DEMO_DIM,
                rank: 2,
                m: 3,
                density: 1.0,
                seed: DEMO_SEED,
            },
            3 => Self {
                n: DEMO_DIM,
                rank: 2,
                m: 3,
                density: 1.0 / 3.0,
                seed: DEMO_SEED,
            },
            _ => {
                return Err(PfrError::InvalidParameter(format!(
                    "unknown demo {id}; expected 1, 2 or 3"
                )))
            }
        };
        Ok(p)
    }
}

/// A pair of sets `(A1, A2)` with the subgroup they were built from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Demo {
    pub id: u8,
    pub params: DemoParams,
    pub description: String,
    pub subgroup: SubgroupBasis,
    pub a1: SetInput,
    pub a2: SetInput,
}

impl Demo {
    pub fn x1(&self) -> Result<Dist> {
        self.a1.uniform()
    }

    pub fn x2(&self) -> Result<Dist> {
        self.a2.uniform()
    }

    /// Reference pair `(U_A1, U_A2)`; runs start from it.
    pub fn reference(&self, eta: f64) -> Result<RefPair> {
        RefPair::new(self.x1()?, self.x2()?, eta)
    }

    pub fn default_reference(&self) -> Result<RefPair> {
        self.reference(DEFAULT_ETA)
    }
}

/// `count` linearly independent random vectors of F_2^n.
pub fn random_independent(rng: &mut PfrRng, n: u32, count: usize) -> Result<Vec<GroupElem>> {
    if count > n as usize {
        return Err(PfrError::RankTooLarge(count));
    }
    let mut span = SubgroupBasis::trivial(n)?;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = rng.gen_range(1..group_size(n)) as GroupElem;
        if span.insert(v)? {
            out.push(v);
        }
    }
    Ok(out)
}

fn union_of_cosets(h: &SubgroupBasis, reps: &[GroupElem]) -> Result<Vec<GroupElem>> {
    let elems = h.enumerate()?;
    let mut out: Vec<GroupElem> = reps
        .iter()
        .flat_map(|&r| elems.iter().map(move |&x| x ^ r))
        .collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn subsample(rng: &mut PfrRng, set: Vec<GroupElem>, density: f64) -> Vec<GroupElem> {
    if density >= 1.0 {
        set
    } else {
        random_subset(rng, &set, density)
    }
}

pub fn demo(id: u8, params: &DemoParams) -> Result<Demo> {
    check_dim(params.n)?;
    if !(params.density > 0.0 && params.density <= 1.0) {
        return Err(PfrError::InvalidParameter(format!(
            "density {} outside (0, 1]",
            params.density
        )));
    }
    let mut rng = rng_from_seed(params.seed);
    let n = params.n;
    match id {
        1 => {
            let h = random_subgroup(&mut rng, n, params.rank)?;
            let a = subsample(&mut rng, h.enumerate()?, params.density);
            let set = SetInput::new(n, a)?;
            Ok(Demo {
                id,
                params: params.clone(),
                description: format!(
                    "random density-{} subset of a rank-{} subgroup",
                    params.density, params.rank
                ),
                subgroup: h,
                a1: set.clone(),
                a2: set,
            })
        }
        2 | 3 => {
            // Coset representatives 0, b_1..b_{m-1} and 0, c_1..c_{m-1} with
            // all b, c and the basis of H independent.
            let extra = 2 * (params.m.max(1) - 1);
            if params.rank + extra > n as usize {
                return Err(PfrError::InvalidParameter(format!(
                    "rank {} plus {} coset directions exceeds dimension {n}",
                    params.rank, extra
                )));
            }
            let basis = random_independent(&mut rng, n, params.rank + extra)?;
            let (hb, dirs) = basis.split_at(params.rank);
            let h = SubgroupBasis::span(hb.iter().copied(), n)?;
            let half = params.m - 1;
            let xs: Vec<GroupElem> = std::iter::once(0)
                .chain(dirs[..half].iter().copied())
                .collect();
            let ys: Vec<GroupElem> = std::iter::once(0)
                .chain(dirs[half..].iter().copied())
                .collect();
            let a1 = subsample(&mut rng, union_of_cosets(&h, &xs)?, params.density);
            let a2 = subsample(&mut rng, union_of_cosets(&h, &ys)?, params.density);
            let description = if id == 2 {
                format!(
                    "unions of {} independent cosets of a rank-{} subgroup",
                    params.m, params.rank
                )
            } else {
                format!(
                    "density-{:.3} subsets of unions of {} independent cosets of a rank-{} subgroup",
                    params.density, params.m, params.rank
                )
            };
            Ok(Demo {
                id,
                params: params.clone(),
                description,
                subgroup: h,
                a1: SetInput::new(n, a1)?,
                a2: SetInput::new(n, a2)?,
            })
        }
        _ => Err(PfrError::InvalidParameter(format!(
            "unknown demo {id}; expected 1, 2 or 3"
        ))),
    }
}

pub fn default_demo(id: u8) -> Result<Demo> {
    demo(id, &DemoParams::default_for(id)?)
}

/// Move class expected to give the first accepted decrease.
pub fn expected_first_move(id: u8) -> Result<MoveKind> {
    match id {
        1 => Ok(MoveKind::SumSelf),
        2 => Ok(MoveKind::FibreCross),
        3 => Ok(MoveKind::Endgame),
        _ => Err(PfrError::InvalidParameter(format!(
            "unknown demo {id}; expected 1, 2 or 3"
        ))),
    }
}

/// Class scores at the starting pair, every class evaluated.
#[derive(Clone, Debug, Serialize)]
pub struct InitialProbe {
    pub class: String,
    pub best_tau: Option<f64>,
    /// `tau_0 - best_tau`; positive when the class improves.
    pub drop: Option<f64>,
    pub improves: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DemoRun {
    pub demo: Demo,
    pub eta: f64,
    pub tau0: f64,
    pub initial_probes: Vec<InitialProbe>,
    pub first_move: Option<MoveKind>,
    pub expected_first_move: MoveKind,
    pub first_move_matches: bool,
    /// Every sum and fibre class fails at the starting pair.
    pub sum_fibre_rejected: bool,
    pub state: DescentState,
    pub fit: SubgroupFit,
    pub certificate: SubgroupCertificate,
}

/// Descends from `(U_A1, U_A2)` with that pair as reference and reads a
/// subgroup off the final `X1`.
pub fn run_demo(
    demo: Demo,
    registry: &MoveRegistry,
    eta: f64,
    cfg: &DescentConfig,
    theta: f64,
) -> Result<DemoRun> {
    let reference = demo.reference(eta)?;
    let (x1, x2) = (demo.x1()?, demo.x2()?);
    let tau0 = tau(&x1, &x2, &reference)?;
    let probe_cfg = DescentConfig {
        selection: SelectionRule::BestOverall,
        ..cfg.clone()
    };
    let (probes, _) = probe_classes(registry, &x1, &x2, &reference, tau0, &probe_cfg)?;
    let initial_probes: Vec<InitialProbe> = probes
        .into_iter()
        .map(|p: ClassProbe| {
            let drop = p.best_tau.map(|t| tau0 - t);
            InitialProbe {
                class: p.class,
                best_tau: p.best_tau,
                drop,
                improves: drop.is_some_and(|d| d > cfg.eps_step),
                skipped: p.skipped,
            }
        })
        .collect();
    let sum_fibre_rejected = initial_probes
        .iter()
        .filter(|p| p.class != MoveKind::Endgame.name())
        .all(|p| !p.improves);
    let state = descend_with(registry, &x1, &x2, &reference, cfg)?;
    let fit = extract_subgroup(&state.x1, theta)?;
    let certificate = SubgroupCertificate::new(fit.subgroup.clone(), &reference)?;
    let expected = expected_first_move(demo.id)?;
    let first_move = state.first_move();
    Ok(DemoRun {
        demo,
        eta,
        tau0,
        initial_probes,
        first_move,
        expected_first_move: expected,
        first_move_matches: first_move == Some(expected),
        sum_fibre_rejected,
        state,
        fit,
        certificate,
    })
}

/// One set of the end-to-end corpus: a union of at most four cosets of a
/// random subgroup, optionally subsampled at density at least 1/2.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub seed: u64,
    pub subgroup: SubgroupBasis,
    pub cosets: usize,
    pub density: f64,
    pub set: SetInput,
}

pub fn coset_union_corpus(seed: u64, count: usize, n: u32) -> Result<Vec<CorpusEntry>> {
    (0..count)
        .map(|i| {
            let s = crate::random::instance_seed(seed, i as u64);
            let mut rng = rng_from_seed(s);
            let rank = rng.gen_range(1..=(n as usize / 2).max(1));
            let h = random_subgroup(&mut rng, n, rank)?;
            let cosets = rng.gen_range(1..=4usize);
            let reps: Vec<GroupElem> = (0..cosets)
                .map(|_| rng.gen_range(0..group_size(n)) as GroupElem)
                .collect();
            let density = if rng.gen_bool(0.5) {
                1.0
            } else {
                rng.gen_range(0.5..1.0)
            };
            let set = SetInput::new(n, subsample(&mut rng, union_of_cosets(&h, &reps)?, density))?;
            Ok(CorpusEntry {
                seed: s,
                subgroup: h,
                cosets,
                density,
                set,
            })
        })
        .collect()
}
