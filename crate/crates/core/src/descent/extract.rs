//! Subgroup extraction from a near-minimizer and the entropic PFR run.

use serde::{Deserialize, Serialize};

use crate::dist::Dist;
use crate::error::{PfrError, Result};
use crate::group::SubgroupBasis;
use crate::ruzsa::{rdist, RefPair};

use super::{descend, DescentConfig, DescentState};

pub const DEFAULT_THETA: f64 = 0.5;
/// Tolerance on the distance bounds of the certificate.
pub const CERTIFICATE_TOL: f64 = 1e-6;

/// A subgroup `H` with `d1 = d[X0_1;U_H]`, `d2 = d[X0_2;U_H]` and the
/// checks `d1 + d2 <= 11 d[X0_1;X0_2]`, `d1, d2 <= 6 d[X0_1;X0_2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgroupCertificate {
    pub subgroup: SubgroupBasis,
    pub d1: f64,
    pub d2: f64,
    pub base_distance: f64,
    pub sum_bound: f64,
    pub sum_holds: bool,
    pub each_bound: f64,
    pub each_holds: bool,
}

impl SubgroupCertificate {
    pub fn new(subgroup: SubgroupBasis, reference: &RefPair) -> Result<Self> {
        let uh = Dist::uniform_on_subgroup(&subgroup)?;
        let d1 = rdist(&reference.x0_1, &uh)?;
        let d2 = rdist(&reference.x0_2, &uh)?;
        let k0 = reference.base_distance()?;
        let sum_bound = 11.0 * k0;
        let each_bound = 6.0 * k0;
        Ok(Self {
            subgroup,
            d1,
            d2,
            base_distance: k0,
            sum_bound,
            sum_holds: d1 + d2 <= sum_bound + CERTIFICATE_TOL,
            each_bound,
            each_holds: d1 <= each_bound + CERTIFICATE_TOL && d2 <= each_bound + CERTIFICATE_TOL,
        })
    }

    pub fn holds(&self) -> bool {
        self.sum_holds && self.each_holds
    }
}

/// Subgroup read off a distribution together with `d[X;U_H]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgroupFit {
    pub subgroup: SubgroupBasis,
    pub mode: u32,
    pub distance: f64,
}

/// `H = span{x + x* : p(x) >= theta p(x*)}` with `x*` the most likely value
/// (smallest on ties).
pub fn extract_subgroup(x: &Dist, theta: f64) -> Result<SubgroupFit> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(PfrError::InvalidParameter(format!(
            "theta {theta} outside (0, 1]"
        )));
    }
    let (mode, pmax) = x.mode();
    let threshold = theta * pmax * (1.0 - 1e-12);
    let subgroup = SubgroupBasis::span(
        x.iter()
            .filter(|&(_, p)| p >= threshold)
            .map(|(v, _)| v ^ mode),
        x.dim(),
    )?;
    let distance = rdist(x, &Dist::uniform_on_subgroup(&subgroup)?)?;
    Ok(SubgroupFit {
        subgroup,
        mode,
        distance,
    })
}

#[derive(Clone, Debug)]
pub struct PfrConfig {
    pub descent: DescentConfig,
    pub theta: f64,
}

impl Default for PfrConfig {
    fn default() -> Self {
        Self {
            descent: DescentConfig::default(),
            theta: DEFAULT_THETA,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PfrRun {
    pub state: DescentState,
    pub fit: SubgroupFit,
    pub certificate: SubgroupCertificate,
}

/// Descends from `(X0_2, X0_1)` and certifies the subgroup extracted from
/// the final `X1`.
pub fn entropic_pfr(x0_1: &Dist, x0_2: &Dist, eta: f64, cfg: &PfrConfig) -> Result<PfrRun> {
    let reference = RefPair::new(x0_1.clone(), x0_2.clone(), eta)?;
    let state = descend(x0_2, x0_1, &reference, &cfg.descent)?;
    let fit = extract_subgroup(&state.x1, cfg.theta)?;
    let certificate = SubgroupCertificate::new(fit.subgroup.clone(), &reference)?;
    Ok(PfrRun {
        state,
        fit,
        certificate,
    })
}
