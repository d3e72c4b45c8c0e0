//! Move classes: each proposes candidate pairs `(X1', X2')` built from the
//! current pair and scores them by tau.
//!
//! Tildes denote independent copies: `X1~` is a fresh copy of `X1`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::Dist;
use crate::endgame::{
    abstract_endgame_in, endgame_tables_with, EndgameChoice, EndgameConfig, PsiContext,
};
use crate::error::{PfrError, Result};
use crate::group::GroupElem;
use crate::ruzsa::{pairwise_rdist, rdist, RefPair, Slice};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MoveKind {
    /// `(X1 + X2~, X2 + X1~)`.
    SumCross,
    /// `(X1 + X1~, X2 + X2~)`.
    SumSelf,
    /// `((X1 | X1 + X2~ = g), (X2 | X2 + X1~ = g'))`.
    FibreCross,
    /// `((X1 | X1 + X1~ = g), (X2 | X2 + X2~ = g'))`.
    FibreSelf,
    /// A conditioned pair from `(U, V, W | S = s)`.
    Endgame,
}

impl MoveKind {
    pub const ALL: [MoveKind; 5] = [
        MoveKind::SumCross,
        MoveKind::SumSelf,
        MoveKind::FibreCross,
        MoveKind::FibreSelf,
        MoveKind::Endgame,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MoveKind::SumCross => "SUM_CROSS",
            MoveKind::SumSelf => "SUM_SELF",
            MoveKind::FibreCross => "FIBRE_CROSS",
            MoveKind::FibreSelf => "FIBRE_SELF",
            MoveKind::Endgame => "ENDGAME",
        }
    }
}

impl fmt::Display for MoveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A move and its parameters: conditioning values `(g, g')` for fibres,
/// `(s, permutation, t)` for endgame pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub kind: MoveKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<GroupElem>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_prime: Option<GroupElem>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<GroupElem>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub choice: Option<EndgameChoice>,
}

impl Move {
    fn plain(kind: MoveKind) -> Self {
        Self {
            kind,
            g: None,
            g_prime: None,
            s: None,
            choice: None,
        }
    }
}

/// A candidate pair with its tau value.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub mv: Move,
    pub x1: Arc<Dist>,
    pub x2: Arc<Dist>,
    pub tau: f64,
}

/// Everything a move class needs about the current state.
pub struct MoveContext<'a> {
    pub x1: &'a Dist,
    pub x2: &'a Dist,
    pub reference: &'a RefPair,
    pub budget: usize,
    pub endgame: EndgameConfig,
    /// `d[X0_1; X1]`, `d[X0_2; X2]`.
    pub base1: f64,
    pub base2: f64,
    /// `X1` and `X2` are the same distribution.
    pub identical: bool,
}

impl<'a> MoveContext<'a> {
    pub fn new(
        x1: &'a Dist,
        x2: &'a Dist,
        reference: &'a RefPair,
        budget: usize,
        endgame: EndgameConfig,
    ) -> Result<Self> {
        if budget == 0 {
            return Err(PfrError::InvalidParameter(
                "budget must be at least 1".into(),
            ));
        }
        Ok(Self {
            x1,
            x2,
            reference,
            budget,
            endgame,
            base1: rdist(&reference.x0_1, x1)?,
            base2: rdist(&reference.x0_2, x2)?,
            identical: x1.same_as(x2),
        })
    }

    fn tau_of(&self, y1: &Dist, y2: &Dist) -> Result<f64> {
        let eta = self.reference.eta;
        Ok(rdist(y1, y2)?
            + eta * rdist(&self.reference.x0_1, y1)?
            + eta * rdist(&self.reference.x0_2, y2)?)
    }
}

/// One family of candidate pairs, selectable by name.
pub trait MoveStrategy: Send + Sync {
    fn kind(&self) -> MoveKind;

    fn name(&self) -> &'static str {
        self.kind().name()
    }

    /// Classes of a higher tier are only consulted when no lower tier
    /// improves tau (under tiered selection).
    fn tier(&self) -> u8 {
        0
    }

    /// All candidates of this class, scored. An empty list means the class
    /// does not apply to the current state.
    fn candidates(&self, ctx: &MoveContext) -> Result<Vec<Candidate>>;
}

struct SumCross;
struct SumSelf;
struct FibreCross;
struct FibreSelf;
struct Endgame;

impl MoveStrategy for SumCross {
    fn kind(&self) -> MoveKind {
        MoveKind::SumCross
    }

    fn candidates(&self, ctx: &MoveContext) -> Result<Vec<Candidate>> {
        // With X1 = X2 the cross and self families coincide.
        if ctx.identical {
            return Ok(Vec::new());
        }
        let s = Arc::new(ctx.x1.xor_convolve(ctx.x2)?);
        let tau = ctx.tau_of(&s, &s)?;
        Ok(vec![Candidate {
            mv: Move::plain(MoveKind::SumCross),
            x1: s.clone(),
            x2: s,
            tau,
        }])
    }
}

impl MoveStrategy for SumSelf {
    fn kind(&self) -> MoveKind {
        MoveKind::SumSelf
    }

    fn candidates(&self, ctx: &MoveContext) -> Result<Vec<Candidate>> {
        let y1 = Arc::new(ctx.x1.xor_convolve(ctx.x1)?);
        let y2 = if ctx.identical {
            y1.clone()
        } else {
            Arc::new(ctx.x2.xor_convolve(ctx.x2)?)
        };
        let tau = ctx.tau_of(&y1, &y2)?;
        Ok(vec![Candidate {
            mv: Move::plain(MoveKind::SumSelf),
            x1: y1,
            x2: y2,
            tau,
        }])
    }
}

/// The `budget` most likely values of a distribution, by decreasing mass
/// then increasing value.
pub fn top_values(d: &Dist, budget: usize) -> Vec<GroupElem> {
    let mut atoms: Vec<(GroupElem, f64)> = d.iter().collect();
    atoms.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    atoms.into_iter().take(budget).map(|a| a.0).collect()
}

/// Fibres `(X | X + Y~ = g)` for the top values of `X + Y`.
fn fibres(x: &Dist, y: &Dist, budget: usize) -> Result<Vec<(GroupElem, Dist)>> {
    let s = x.xor_convolve(y)?;
    top_values(&s, budget)
        .into_iter()
        .map(|g| Ok((g, x.conditioned_on_sum(y, g)?)))
        .collect()
}

/// Scores every pair of a left fibre and a right fibre.
fn fibre_grid(
    ctx: &MoveContext,
    kind: MoveKind,
    left: Vec<(GroupElem, Dist)>,
    right: Vec<(GroupElem, Dist)>,
) -> Result<Vec<Candidate>> {
    let eta = ctx.reference.eta;
    let dim = ctx.x1.dim();
    let ref1: Vec<f64> = left
        .par_iter()
        .map(|(_, d)| rdist(&ctx.reference.x0_1, d))
        .collect::<Result<_>>()?;
    let ref2: Vec<f64> = right
        .par_iter()
        .map(|(_, d)| rdist(&ctx.reference.x0_2, d))
        .collect::<Result<_>>()?;
    let ls: Vec<Slice> = left.iter().map(|(_, d)| Slice::new(1.0, d)).collect();
    let rs: Vec<Slice> = right.iter().map(|(_, d)| Slice::new(1.0, d)).collect();
    let matrix = pairwise_rdist(dim, &ls, &rs)?;
    let la: Vec<Arc<Dist>> = left.iter().map(|(_, d)| Arc::new(d.clone())).collect();
    let ra: Vec<Arc<Dist>> = right.iter().map(|(_, d)| Arc::new(d.clone())).collect();
    let mut out = Vec::with_capacity(left.len() * right.len());
    for (i, (g, _)) in left.iter().enumerate() {
        for (j, (gp, _)) in right.iter().enumerate() {
            let tau = matrix[i][j] + eta * ref1[i] + eta * ref2[j];
            out.push(Candidate {
                mv: Move {
                    kind,
                    g: Some(*g),
                    g_prime: Some(*gp),
                    s: None,
                    choice: None,
                },
                x1: la[i].clone(),
                x2: ra[j].clone(),
                tau,
            });
        }
    }
    Ok(out)
}

impl MoveStrategy for FibreCross {
    fn kind(&self) -> MoveKind {
        MoveKind::FibreCross
    }

    fn candidates(&self, ctx: &MoveContext) -> Result<Vec<Candidate>> {
        if ctx.identical {
            return Ok(Vec::new());
        }
        let left = fibres(ctx.x1, ctx.x2, ctx.budget)?;
        let right = fibres(ctx.x2, ctx.x1, ctx.budget)?;
        fibre_grid(ctx, MoveKind::FibreCross, left, right)
    }
}

impl MoveStrategy for FibreSelf {
    fn kind(&self) -> MoveKind {
        MoveKind::FibreSelf
    }

    fn candidates(&self, ctx: &MoveContext) -> Result<Vec<Candidate>> {
        let left = fibres(ctx.x1, ctx.x1, ctx.budget)?;
        let right = if ctx.identical {
            left.clone()
        } else {
            fibres(ctx.x2, ctx.x2, ctx.budget)?
        };
        fibre_grid(ctx, MoveKind::FibreSelf, left, right)
    }
}

impl MoveStrategy for Endgame {
    fn kind(&self) -> MoveKind {
        MoveKind::Endgame
    }

    fn tier(&self) -> u8 {
        1
    }

    fn candidates(&self, ctx: &MoveContext) -> Result<Vec<Candidate>> {
        let tables = endgame_tables_with(ctx.x1, ctx.x2, &ctx.endgame)?;
        let s_dist = tables.joint_uvs.marginal_dist(2)?;
        let psi_ctx = PsiContext {
            reference: ctx.reference,
            base1: ctx.base1,
            base2: ctx.base2,
        };
        let shift = ctx.reference.eta * (ctx.base1 + ctx.base2);
        top_values(&s_dist, ctx.budget)
            .into_par_iter()
            .map(|s| {
                let t = tables.joint_uvs.condition(2, s)?;
                let found = abstract_endgame_in(&t, &psi_ctx)?;
                Ok(Candidate {
                    mv: Move {
                        kind: MoveKind::Endgame,
                        g: None,
                        g_prime: None,
                        s: Some(s),
                        choice: Some(found.choice),
                    },
                    x1: Arc::new(found.t1p),
                    x2: Arc::new(found.t2p),
                    // psi differs from tau by the constant eta (d[X0_1;X1] + d[X0_2;X2]).
                    tau: found.psi + shift,
                })
            })
            .collect()
    }
}

/// Move classes by name, in the fixed order used for tie-breaking.
pub struct MoveRegistry {
    strategies: Vec<Box<dyn MoveStrategy>>,
}

impl Default for MoveRegistry {
    fn default() -> Self {
        Self {
            strategies: vec![
                Box::new(SumCross),
                Box::new(SumSelf),
                Box::new(FibreCross),
                Box::new(FibreSelf),
                Box::new(Endgame),
            ],
        }
    }
}

impl MoveRegistry {
    pub fn empty() -> Self {
        Self {
            strategies: Vec::new(),
        }
    }

    pub fn register(&mut self, strategy: Box<dyn MoveStrategy>) {
        self.strategies.push(strategy);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.iter().map(|s| s.name()).collect()
    }

    /// A registry with only the named classes, in default order.
    pub fn select(names: &[String]) -> Result<Self> {
        let all = Self::default();
        for n in names {
            if !all.names().iter().any(|k| k.eq_ignore_ascii_case(n)) {
                return Err(PfrError::UnknownStrategy(n.clone()));
            }
        }
        Ok(Self {
            strategies: all
                .strategies
                .into_iter()
                .filter(|s| names.iter().any(|n| n.eq_ignore_ascii_case(s.name())))
                .collect(),
        })
    }

    pub fn strategies(&self) -> &[Box<dyn MoveStrategy>] {
        &self.strategies
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::SubgroupBasis;

    #[test]
    fn subgroup_state_is_a_fixed_point() {
        let h = SubgroupBasis::span([0b0011, 0b0101], 4).unwrap();
        let uh = Dist::uniform_on_subgroup(&h).unwrap();
        let r = RefPair::with_default_eta(uh.clone(), uh.clone()).unwrap();
        let ctx = MoveContext::new(&uh, &uh, &r, 64, EndgameConfig::default()).unwrap();
        for s in MoveRegistry::default().strategies() {
            for c in s.candidates(&ctx).unwrap() {
                assert!(c.tau.abs() < 1e-12, "{}", s.name());
                assert!(rdist(&c.x1, &uh).unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn registry_selection() {
        let r = MoveRegistry::select(&["endgame".into(), "SUM_SELF".into()]).unwrap();
        assert_eq!(r.names(), vec!["SUM_SELF", "ENDGAME"]);
        assert!(matches!(
            MoveRegistry::select(&["NOPE".into()]),
            Err(PfrError::UnknownStrategy(_))
        ));
        assert_eq!(
            serde_json::to_string(&MoveKind::FibreCross).unwrap(),
            "\"FIBRE_CROSS\""
        );
    }
}
