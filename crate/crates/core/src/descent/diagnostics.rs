//! Quantities an exact tau-minimizer must satisfy, evaluated at a state.
//!
//! With `U = X1 + X2`, `V = X1~ + X2`, `W = X1 + X1~`,
//! `S = X1 + X2 + X1~ + X2~`: `I1 = I[U:V|S]`, `I2 = I[W:U|S]`,
//! `I3 = I[V:W|S]`. At a minimizer every report below holds; at other
//! states they are informative only.

use serde::{Deserialize, Serialize};

use crate::dist::Dist;
use crate::endgame::{endgame_tables_with, EndgameConfig, EndgameSummary};
use crate::error::{PfrError, Result};
use crate::fibring::{cor_fibre, FibringReport};
use crate::joint::CondDist;
use crate::ruzsa::{cond_rdist, rdist, IneqReport, RefPair};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub eta: f64,
    pub k: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endgame: Option<EndgameSummary>,
    /// Set when the endgame tables were refused by the cost guard.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endgame_skipped: Option<String>,
    pub reports: Vec<IneqReport>,
    /// `d[X1+X2~; X2+X1~] + d[X1|X1+X2~; X2|X2+X1~] + I1 = 2k`.
    pub cross_identity: FibringReport,
    /// `d[X1+X1~; X2+X2~] + d[X1|X1+X1~; X2|X2+X2~] + I2 = 2k`.
    pub self_identity: FibringReport,
}

impl Diagnostics {
    pub fn report(&self, name: &str) -> Option<&IneqReport> {
        self.reports.iter().find(|r| r.name == name)
    }
}

pub fn minimizer_diagnostics(
    x1: &Dist,
    x2: &Dist,
    reference: &RefPair,
    cfg: &EndgameConfig,
) -> Result<Diagnostics> {
    let eta = reference.eta;
    let k = rdist(x1, x2)?;
    let cross_identity = cor_fibre(x1, x2, x2, x1)?;
    let self_identity = cor_fibre(x1, x2, x1, x2)?;
    let d11 = rdist(x1, x1)?;
    let d22 = rdist(x2, x2)?;
    let tables = match endgame_tables_with(x1, x2, cfg) {
        Ok(t) => t,
        Err(PfrError::CostGuard(msg)) => {
            return Ok(Diagnostics {
                eta,
                k,
                endgame: None,
                endgame_skipped: Some(msg),
                reports: Vec::new(),
                cross_identity,
                self_identity,
            })
        }
        Err(e) => return Err(e),
    };
    let (i1, i2, i3, h_s) = (tables.i1, tables.i2, tables.i3, tables.h_s);
    let gap = 2.0 * eta * k - i1;
    let (h1, h2) = (x1.entropy(), x2.entropy());

    let uvws = tables.joint_uvws()?;
    let mut total = 0.0;
    for (x0, base) in [(&reference.x0_1, x1), (&reference.x0_2, x2)] {
        let d0 = rdist(x0, base)?;
        let x0c = CondDist::unconditioned(x0)?;
        for axis in 0..3 {
            total += cond_rdist(&x0c, &CondDist::new(uvws.clone(), axis, vec![3])?)? - d0;
        }
    }
    let delta = i1 + i2 + i3;

    let reports = vec![
        IneqReport::new("first-est", i1, 2.0 * eta * k),
        IneqReport::new(
            "second-est",
            i2,
            2.0 * eta * k + 2.0 * eta * gap / (1.0 - eta),
        ),
        IneqReport::new(
            "third-est",
            i3,
            2.0 * eta * k + 2.0 * eta * gap / (1.0 - eta),
        ),
        IneqReport::new("hs-bound", h_s, 0.5 * h1 + 0.5 * h2 + (2.0 + eta) * k - i1),
        IneqReport::new("x12", d11 + d22, 2.0 * k + 2.0 * gap / (1.0 - eta)),
        IneqReport::new(
            "uvw-s",
            delta,
            6.0 * eta * k - (1.0 - 5.0 * eta) / (1.0 - eta) * gap,
        ),
        IneqReport::new("total-dist", total, 3.0 * h_s - 1.5 * h1 - 1.5 * h2),
        IneqReport::new(
            "total-dist-k",
            3.0 * h_s - 1.5 * h1 - 1.5 * h2,
            (6.0 - 3.0 * eta) * k + 3.0 * gap,
        ),
        IneqReport::new("endgame-average", k, delta + eta / 3.0 * (delta + total)),
        IneqReport::new("closure", k, (8.0 * eta + eta * eta) * k),
    ];
    Ok(Diagnostics {
        eta,
        k,
        endgame: Some(tables.summary()),
        endgame_skipped: None,
        reports,
        cross_identity,
        self_identity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_dist, rng_from_seed};

    #[test]
    fn identities_hold_at_any_state() {
        let mut rng = rng_from_seed(5);
        let x1 = random_dist(&mut rng, 3, 5).unwrap();
        let x2 = random_dist(&mut rng, 3, 4).unwrap();
        let r = RefPair::with_default_eta(x2.clone(), x1.clone()).unwrap();
        let d = minimizer_diagnostics(&x1, &x2, &r, &EndgameConfig::default()).unwrap();
        let summary = d.endgame.as_ref().unwrap();
        for id in [&d.cross_identity, &d.self_identity] {
            assert!(id.residual.abs() < 1e-9);
            assert!((id.d_total - 2.0 * d.k).abs() < 1e-9);
        }
        assert!((d.cross_identity.info_term - summary.i1).abs() < 1e-9);
        assert!((d.self_identity.info_term - summary.i2).abs() < 1e-9);
        // Lower-level inequalities that hold at every state.
        assert!(d.report("total-dist").unwrap().holds);
        assert_eq!(d.reports.len(), 10);
    }
}
