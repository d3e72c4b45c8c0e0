//! Greedy minimization of the tau functional over pairs of distributions.
//!
//! Each iteration scores the candidates of the registered move classes,
//! accepts the best one if it lowers tau by more than `eps_step`, and
//! stops once `d[X1;X2] <= eps_d` or nothing improves. By default the
//! endgame classes are consulted only when the sum and fibre classes fail.

mod diagnostics;
mod extract;
mod moves;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use diagnostics::{minimizer_diagnostics, Diagnostics};
pub use extract::{
    entropic_pfr, extract_subgroup, PfrConfig, PfrRun, SubgroupCertificate, SubgroupFit,
    DEFAULT_THETA,
};
pub use moves::{top_values, Candidate, Move, MoveContext, MoveKind, MoveRegistry, MoveStrategy};

use crate::dist::Dist;
use crate::endgame::EndgameConfig;
use crate::error::{PfrError, Result};
use crate::ruzsa::{rdist, tau_parts, RefPair};

pub const DEFAULT_EPS_D: f64 = 1e-4;
pub const DEFAULT_EPS_STEP: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_BUDGET: usize = 64;
/// Relative weight below which atoms are dropped after each accepted move.
pub const PRUNE_REL: f64 = 1e-13;
/// Candidates of later classes must beat earlier ones by this much.
pub const CLASS_TIE_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct DescentConfig {
    pub eps_d: f64,
    pub eps_step: f64,
    pub max_iter: usize,
    pub budget: usize,
    pub selection: SelectionRule,
    pub endgame: EndgameConfig,
    /// Keep the pair reached after every accepted move.
    pub keep_history: bool,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            eps_d: DEFAULT_EPS_D,
            eps_step: DEFAULT_EPS_STEP,
            max_iter: DEFAULT_MAX_ITER,
            budget: DEFAULT_BUDGET,
            selection: SelectionRule::default(),
            endgame: EndgameConfig::default(),
            keep_history: false,
        }
    }
}

impl DescentConfig {
    fn validate(&self) -> Result<()> {
        if !(self.eps_d >= 0.0) || !(self.eps_step >= 0.0) {
            return Err(PfrError::InvalidParameter(
                "eps_d and eps_step must be non-negative".into(),
            ));
        }
        if self.budget == 0 {
            return Err(PfrError::InvalidParameter(
                "budget must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Best candidate of one class at one iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassProbe {
    pub class: String,
    pub candidates: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_move: Option<Move>,
    /// Reason the class produced nothing, e.g. a cost-guard refusal.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub mv: Move,
    pub tau_before: f64,
    pub tau_after: f64,
    pub k_after: f64,
    pub probes: Vec<ClassProbe>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `d[X1;X2] <= eps_d`.
    Converged,
    /// No candidate lowered tau by more than `eps_step`.
    NoProgress,
    MaxIter,
}

#[derive(Clone, Debug, Serialize)]
pub struct DescentState {
    #[serde(skip)]
    pub reference: RefPair,
    pub x1: Dist,
    pub x2: Dist,
    pub k: f64,
    pub tau: f64,
    pub trace: Vec<TraceStep>,
    pub stop: StopReason,
    pub converged: bool,
    /// Probes of the final iteration when it accepted nothing.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub last_probe: Vec<ClassProbe>,
    /// Minimizer estimates, present when the run stopped with `k > eps_d`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    /// Pairs after each accepted move, when `keep_history` is set.
    #[serde(skip)]
    pub history: Vec<(Dist, Dist)>,
}

impl DescentState {
    /// Class of the first accepted move.
    pub fn first_move(&self) -> Option<MoveKind> {
        self.trace.first().map(|s| s.mv.kind)
    }
}

/// How the accepted candidate is chosen among the classes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Best candidate of the sum and fibre classes; endgame classes are
    /// consulted only when none of those lowers tau by more than `eps_step`.
    #[default]
    Tiered,
    /// Best candidate over every class.
    BestOverall,
}

/// Scores the classes against the current pair and returns the probes with
/// the best candidate found. Within a class the first minimal candidate
/// wins; across classes the earlier class wins unless beaten by
/// `CLASS_TIE_TOL`.
pub fn probe_classes(
    registry: &MoveRegistry,
    x1: &Dist,
    x2: &Dist,
    reference: &RefPair,
    tau_now: f64,
    cfg: &DescentConfig,
) -> Result<(Vec<ClassProbe>, Option<Candidate>)> {
    let ctx = MoveContext::new(x1, x2, reference, cfg.budget, cfg.endgame)?;
    let mut tiers: Vec<u8> = registry.strategies().iter().map(|s| s.tier()).collect();
    tiers.sort_unstable();
    tiers.dedup();
    let mut probes = Vec::new();
    let mut best: Option<Candidate> = None;
    for tier in tiers {
        let improving = best
            .as_ref()
            .is_some_and(|b| b.tau < tau_now - cfg.eps_step);
        for strategy in registry.strategies().iter().filter(|s| s.tier() == tier) {
            let mut probe = ClassProbe {
                class: strategy.name().into(),
                candidates: 0,
                best_tau: None,
                best_move: None,
                skipped: None,
            };
            if improving && cfg.selection == SelectionRule::Tiered {
                probe.skipped = Some("not evaluated: an earlier tier lowers tau".into());
                probes.push(probe);
                continue;
            }
            let cands = match strategy.candidates(&ctx) {
                Ok(c) => c,
                Err(PfrError::CostGuard(msg)) => {
                    probe.skipped = Some(msg);
                    probes.push(probe);
                    continue;
                }
                Err(e) => return Err(e),
            };
            probe.candidates = cands.len();
            let mut class_best: Option<Candidate> = None;
            for c in cands {
                if class_best.as_ref().is_none_or(|b| c.tau < b.tau) {
                    class_best = Some(c);
                }
            }
            match &class_best {
                Some(c) => {
                    probe.best_tau = Some(c.tau);
                    probe.best_move = Some(c.mv.clone());
                }
                None => probe.skipped = Some("not applicable".into()),
            }
            probes.push(probe);
            if let Some(c) = class_best {
                if best
                    .as_ref()
                    .is_none_or(|b| c.tau < b.tau - CLASS_TIE_TOL)
                {
                    best = Some(c);
                }
            }
        }
    }
    Ok((probes, best))
}

pub fn descend(
    x1: &Dist,
    x2: &Dist,
    reference: &RefPair,
    cfg: &DescentConfig,
) -> Result<DescentState> {
    descend_with(&MoveRegistry::default(), x1, x2, reference, cfg)
}

pub fn descend_with(
    registry: &MoveRegistry,
    x1: &Dist,
    x2: &Dist,
    reference: &RefPair,
    cfg: &DescentConfig,
) -> Result<DescentState> {
    cfg.validate()?;
    for d in [x1.dim(), x2.dim()] {
        if d != reference.dim() {
            return Err(PfrError::DimensionMismatch {
                expected: reference.dim(),
                found: d,
            });
        }
    }
    let mut cur1 = Arc::new(x1.clone());
    let mut cur2 = Arc::new(x2.clone());
    let parts = tau_parts(&cur1, &cur2, reference)?;
    let mut k = parts.d12;
    let mut tau = parts.tau(reference.eta);
    let mut trace = Vec::new();
    let mut last_probe = Vec::new();
    let mut history = Vec::new();
    let mut stop = StopReason::MaxIter;
    for _ in 0..=cfg.max_iter {
        if k <= cfg.eps_d {
            stop = StopReason::Converged;
            break;
        }
        if trace.len() == cfg.max_iter {
            break;
        }
        let (probes, best) = probe_classes(registry, &cur1, &cur2, reference, tau, cfg)?;
        let accepted = best.filter(|c| c.tau < tau - cfg.eps_step);
        let Some(c) = accepted else {
            last_probe = probes;
            stop = StopReason::NoProgress;
            break;
        };
        let same = Arc::ptr_eq(&c.x1, &c.x2);
        cur1 = Arc::new(c.x1.pruned(PRUNE_REL));
        cur2 = if same {
            cur1.clone()
        } else {
            Arc::new(c.x2.pruned(PRUNE_REL))
        };
        let parts = tau_parts(&cur1, &cur2, reference)?;
        let tau_after = parts.tau(reference.eta);
        if cfg.keep_history {
            history.push(((*cur1).clone(), (*cur2).clone()));
        }
        trace.push(TraceStep {
            mv: c.mv,
            tau_before: tau,
            tau_after,
            k_after: parts.d12,
            probes,
        });
        tau = tau_after;
        k = parts.d12;
    }
    let converged = stop == StopReason::Converged;
    let diagnostics = if converged {
        None
    } else {
        Some(minimizer_diagnostics(
            &cur1,
            &cur2,
            reference,
            &cfg.endgame,
        )?)
    };
    Ok(DescentState {
        reference: reference.clone(),
        x1: Arc::unwrap_or_clone(cur1),
        x2: Arc::unwrap_or_clone(cur2),
        k,
        tau,
        trace,
        stop,
        converged,
        last_probe,
        diagnostics,
        history,
    })
}

/// `d[X1;X2]` of a state, recomputed from its distributions.
pub fn state_distance(state: &DescentState) -> Result<f64> {
    rdist(&state.x1, &state.x2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::SubgroupBasis;
    use crate::random::{random_dist, rng_from_seed};

    #[test]
    fn subgroup_pair_returns_immediately() {
        let h = SubgroupBasis::span([0b0011, 0b1100], 4).unwrap();
        let uh = Dist::uniform_on_subgroup(&h).unwrap();
        let r = RefPair::with_default_eta(uh.clone(), uh.clone()).unwrap();
        let s = descend(&uh, &uh, &r, &DescentConfig::default()).unwrap();
        assert!(s.converged && s.trace.is_empty() && s.k.abs() < 1e-12);
        assert!(s.diagnostics.is_none());
    }

    #[test]
    fn trace_is_strictly_decreasing() {
        let mut rng = rng_from_seed(11);
        for _ in 0..3 {
            let a = random_dist(&mut rng, 4, 6).unwrap();
            let b = random_dist(&mut rng, 4, 5).unwrap();
            let r = RefPair::with_default_eta(a.clone(), b.clone()).unwrap();
            let cfg = DescentConfig {
                max_iter: 6,
                budget: 8,
                ..Default::default()
            };
            let s = descend(&b, &a, &r, &cfg).unwrap();
            for step in &s.trace {
                assert!(step.tau_after < step.tau_before - cfg.eps_step);
            }
            assert!(s.trace.len() <= 6);
            assert!((state_distance(&s).unwrap() - s.k).abs() < 1e-12);
            assert_eq!(s.converged, s.k <= cfg.eps_d);
            assert_eq!(s.diagnostics.is_some(), !s.converged);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let x = Dist::point_mass(3, 0).unwrap();
        let r = RefPair::with_default_eta(x.clone(), x.clone()).unwrap();
        let cfg = DescentConfig {
            budget: 0,
            ..Default::default()
        };
        assert!(descend(&x, &x, &r, &cfg).is_err());
        let y = Dist::point_mass(4, 0).unwrap();
        assert!(descend(&y, &y, &r, &DescentConfig::default()).is_err());
    }
}
