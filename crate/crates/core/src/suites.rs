//! Randomized suites over the inequality checkers and the exact identities.
//!
//! Each suite samples an [`Instance`] from a per-instance seed and evaluates
//! it to a list of [`IneqReport`]s. Identities are reported as
//! `|lhs - rhs| <= 0`, so the shared slack tolerance applies to them too.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bsg::{bsg_check, cond_indep_trials_entropy, cond_indep_trials_joint};
use crate::dist::Dist;
use crate::endgame::endgame_tables;
use crate::error::{PfrError, Result};
use crate::fibring::{cor_fibre, fibring_decompose};
use crate::group::{group_size, LinearMap};
use crate::joint::{CondDist, JointDist};
use crate::random::{
    instance_seed, random_dist, random_joint, random_linear_map, rng_from_seed, PfrRng,
};
use crate::ruzsa::{
    check_lemma51, check_lemma52, check_lemma71, check_madiman, check_rdist_diff,
    check_submodularity, check_triangle, cond_rdist, cond_rdist_alt, rdist, IneqReport,
};

pub const DEFAULT_SUITE_DIM: u32 = 5;
pub const DEFAULT_TRIALS: usize = 500;
pub const DEFAULT_SUITE_SEED: u64 = 42;
pub const MAX_SUITE_DIM: u32 = 8;
/// Cap on the support size of sampled distributions and joints.
pub const MAX_SUPPORT: usize = 64;
/// Per-factor dimension cap for suites that work on `F_2^n x F_2^n`.
pub const PAIR_FACTOR_DIM: u32 = 4;

/// A sampled input, serializable for replay.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Instance {
    pub suite: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dists: Vec<Dist>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joints: Vec<JointDist>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<LinearMap>,
}

impl Instance {
    fn new(suite: &str, seed: u64) -> Self {
        Self {
            suite: suite.to_string(),
            seed,
            dists: Vec::new(),
            joints: Vec::new(),
            map: None,
        }
    }

    fn dist(&self, i: usize) -> Result<&Dist> {
        self.dists
            .get(i)
            .ok_or_else(|| PfrError::InvalidParameter(format!("instance lacks distribution {i}")))
    }

    fn joint(&self, i: usize) -> Result<&JointDist> {
        self.joints
            .get(i)
            .ok_or_else(|| PfrError::InvalidParameter(format!("instance lacks joint {i}")))
    }
}

pub trait CheckSuite: Send + Sync {
    fn name(&self) -> &'static str;
    /// Draws an instance at dimension `n`. With `point_masses` every sampled
    /// law is a point mass.
    fn sample(&self, rng: &mut PfrRng, seed: u64, n: u32, point_masses: bool) -> Result<Instance>;
    fn evaluate(&self, instance: &Instance) -> Result<Vec<IneqReport>>;
}

fn support_size(rng: &mut PfrRng, cells: u64, point_masses: bool) -> usize {
    if point_masses {
        1
    } else {
        rng.gen_range(1..=cells.min(MAX_SUPPORT as u64) as usize)
    }
}

fn sample_dist(rng: &mut PfrRng, n: u32, point_masses: bool) -> Result<Dist> {
    let k = support_size(rng, group_size(n) as u64, point_masses);
    random_dist(rng, n, k)
}

fn sample_dists(rng: &mut PfrRng, n: u32, count: usize, point_masses: bool) -> Result<Vec<Dist>> {
    (0..count)
        .map(|_| sample_dist(rng, n, point_masses))
        .collect()
}

fn sample_joint(rng: &mut PfrRng, n: u32, arity: usize, point_masses: bool) -> Result<JointDist> {
    let k = support_size(rng, 1u64 << (n as usize * arity), point_masses);
    random_joint(rng, n, arity, k)
}

fn identity(name: &str, a: f64, b: f64) -> IneqReport {
    IneqReport::new(name, (a - b).abs(), 0.0)
}

macro_rules! suite {
    ($ty:ident, $name:literal) => {
        pub struct $ty;
        impl $ty {
            pub const NAME: &'static str = $name;
        }
    };
}

suite!(TriangleSuite, "triangle");
suite!(MadimanSuite, "madiman");
suite!(Lemma51Suite, "lemma51");
suite!(Lemma52Suite, "lemma52");
suite!(Lemma71Suite, "lemma71");
suite!(RdistDiffSuite, "rdist-diff");
suite!(SubmodularitySuite, "submodularity");
suite!(BsgSuite, "bsg");
suite!(FibringSuite, "fibring");
suite!(CorFibreSuite, "cor-fibre");
suite!(CondRdistAltSuite, "cond-rdist-alt");
suite!(ChainRuleSuite, "chain-rule");
suite!(TrialsSuite, "trials");
suite!(EndgameSuite, "endgame-i2-i3");

/// Implements `name` and a `sample` drawing `$k` independent distributions.
macro_rules! dist_suite {
    ($ty:ident, $k:expr) => {
        fn name(&self) -> &'static str {
            $ty::NAME
        }
        fn sample(&self, rng: &mut PfrRng, seed: u64, n: u32, pm: bool) -> Result<Instance> {
            let mut inst = Instance::new(self.name(), seed);
            inst.dists = sample_dists(rng, n, $k, pm)?;
            Ok(inst)
        }
    };
}

impl CheckSuite for TriangleSuite {
    dist_suite!(TriangleSuite, 3);
    fn evaluate(&self, i: &Instance) -> Result<Vec<IneqReport>> {
        Ok(vec![check_triangle(i.dist(0)?, i.dist(1)?, i.dist(2)?)?])
    }
}

impl CheckSuite for MadimanSuite {
    dist_suite!(MadimanSuite, 3);
    fn evaluate(&self, i: &Instance) -> Result<Vec<IneqReport>> {
        Ok(vec![check_madiman(i.dist(0)?, i.dist(1)?, i.dist(2)?)?])
    }
}

impl CheckSuite for Lemma52Suite {
    dist_suite!(Lemma52Suite, 3);
    fn evaluate(&self, i: &Instance) -> Result<Vec<IneqReport>> {
        Ok(check_lemma52(i.dist(0)?, i.dist(1)?, i.dist(2)?)?.to_vec())
    }
}

impl CheckSuite for Lemma71Suite {
    dist_suite!(Lemma71Suite, 4);
    fn evaluate(&self, i: &Instance) -> Result<Vec<IneqReport>> {
        Ok(vec![check_lemma71(
            i.dist(0)?,
            i.dist(1)?,
            i.dist(2)?,
            i.dist(3)?,
        )?])
    }
}

impl CheckSuite for RdistDiffSuite {
    dist_suite!(RdistDiffSuite, 2);
    fn evaluate(&self, i: &Instance) -> Result<Vec<IneqReport>> {
        Ok(vec![check_rdist_diff(i.dist(0)?, i.dist(1)?)?])
    }
}

impl CheckSuite for Lemma51Suite {
    fn name(&self) -> &'static str {
        Self::NAME
    }
    fn sample(&self, rng: &mut PfrRng, seed: u64, n: u32, pm: bool) -> Result<Instance> {
        let mut inst = Instance::new(self.name(), seed);
        for _ in 0..2 {
            let arity = rng.gen_range(2..=3);
            inst.joints.push(sample_joint(rng, n, arity, pm)?);
        }
        Ok(inst)
    }
    fn evaluate(&self, i: &Instance) -> Result<Vec<IneqReport>> {
        Ok(vec![check_lemma51(i.joint(0)?, i.joint(1)?)?])
    }
}

impl CheckSuite for SubmodularitySuite {
    fn name(&self) -> &'static str {
        Self::NAME
    }
    fn sample(&self, rng: &mut PfrRng, seed: u64, n: u32, pm: bool) -> Result<Instance> {
        let mut inst = Instance::new(self.name(), seed);
        inst.joints.push(sample_joint(rng, n, 3, pm)?);
        Ok(inst)
    }
    fn evaluate(&self, i: &Instance) -> Result<Vec<IneqReport>> {
        Ok(vec![check_submodularity(i.joint(0)?)?])
    }
}

/// Implements `name` and a `sample` drawing one arity-2 joint.
macro_rules! pair_joint_suite {
    ($ty:ident) => {
        fn name(&self) -> &'static str {
            $ty::NAME
        }
        fn sample(&self, rng: &mut PfrRng, seed: u64, n: u32, pm: bool) -> Result<Instance> {
            let mut inst = Instance::new(self.name(), seed);
            inst.joints.push(sample_joint(rng, n, 2, pm)?);
            Ok(inst)
        }
    };
}

impl CheckSuite for BsgSuite {
    pair_joint_suite!(BsgSuite);
    fn evaluate(&self, i: &Instance) -> Result<Vec<IneqReport>> {
        let r = bsg_check(i.joint(0)?)?;
        Ok(vec![IneqReport::new(self.name(), r.lhs, r.rhs)])
    }
}

impl CheckSuite for TrialsSuite {
    pair_joint_suite!(TrialsSuite);
    fn evaluate(&self, i: &Instance) -> Result<Vec<IneqReport>> {
        let j = i.joint(0)?;
        let explicit = cond_indep_trials_joint(j)?.joint_entropy(&[0, 1, 2])?;
        Ok(vec![identity(
            self.name(),
            cond_indep_trials_entropy(j)?,
            explicit,
        )])
    }
}

impl CheckSuite for ChainRuleSuite {
    pair_joint_suite!(ChainRuleSuite);
    /// `H[X,Y] = H[Y] + sum_y p(y) H[X | Y=y]`.
    fn evaluate(&self, i: &Instance) -> Result<Vec<IneqReport>> {
        let j = i.joint(0)?;
        let averaged: f64 = j
            .slices(0, &[1])?
            .iter()
            .map(|(_, p, d)| p * d.entropy())
            .sum();
        let rhs = j.joint_entropy(&[1])? + averaged;
        Ok(vec![identity(self.name(), j.joint_entropy(&[0, 1])?, rhs)])
    }
}

impl CheckSuite for CondRdistAltSuite {
    fn name(&self) -> &'static str {
        Self::NAME
    }
    fn sample(&self, rng: &mut PfrRng, seed: u64, n: u32, pm: bool) -> Result<Instance> {
        let mut inst = Instance::new(self.name(), seed);
        inst.joints = vec![sample_joint(rng, n, 2, pm)?, sample_joint(rng, n, 2, pm)?];
        Ok(inst)
    }
    fn evaluate(&self, i: &Instance) -> Result<Vec<IneqReport>> {
        let a = CondDist::new(i.joint(0)?.clone(), 0, vec![1])?;
        let b = CondDist::new(i.joint(1)?.clone(), 0, vec![1])?;
        Ok(vec![identity(
            self.name(),
            cond_rdist(&a, &b)?,
            cond_rdist_alt(&a, &b)?,
        )])
    }
}

impl CheckSuite for FibringSuite {
    fn name(&self) -> &'static str {
        Self::NAME
    }
    /// `Z1, Z2` on `F_2^m x F_2^m` with `m = min(n, 4)` and a random linear
    /// map onto `F_2^k`, `1 <= k <= 2m`.
    fn sample(&self, rng: &mut PfrRng, seed: u64, n: u32, pm: bool) -> Result<Instance> {
        let dim = 2 * n.min(PAIR_FACTOR_DIM);
        let mut inst = Instance::new(self.name(), seed);
        inst.dists = sample_dists(rng, dim, 2, pm)?;
        let out = rng.gen_range(1..=dim);
        inst.map = Some(random_linear_map(rng, dim, out)?);
        Ok(inst)
    }
    fn evaluate(&self, i: &Instance) -> Result<Vec<IneqReport>> {
        let pi = i
            .map
            .as_ref()
            .ok_or_else(|| PfrError::InvalidParameter("fibring instance lacks a map".into()))?;
        let r = fibring_decompose(i.dist(0)?, i.dist(1)?, pi)?;
        Ok(vec![
            IneqReport::new("fibring-residual", r.residual.abs(), 0.0),
            IneqReport::new("fibring-info", 0.0, r.info_term),
        ])
    }
}

impl CheckSuite for CorFibreSuite {
    fn name(&self) -> &'static str {
        Self::NAME
    }
    fn sample(&self, rng: &mut PfrRng, seed: u64, n: u32, pm: bool) -> Result<Instance> {
        let mut inst = Instance::new(self.name(), seed);
        inst.dists = sample_dists(rng, n.min(PAIR_FACTOR_DIM), 4, pm)?;
        Ok(inst)
    }
    fn evaluate(&self, i: &Instance) -> Result<Vec<IneqReport>> {
        let y: Vec<&Dist> = (0..4).map(|k| i.dist(k)).collect::<Result<_>>()?;
        let r = cor_fibre(y[0], y[1], y[2], y[3])?;
        let direct = rdist(y[0], y[1])? + rdist(y[2], y[3])?;
        Ok(vec![
            IneqReport::new("cor-fibre-residual", r.residual.abs(), 0.0),
            identity("cor-fibre-total", r.d_total, direct),
        ])
    }
}

impl CheckSuite for EndgameSuite {
    fn name(&self) -> &'static str {
        Self::NAME
    }
    fn sample(&self, rng: &mut PfrRng, seed: u64, n: u32, pm: bool) -> Result<Instance> {
        let mut inst = Instance::new(self.name(), seed);
        inst.dists = sample_dists(rng, n.min(PAIR_FACTOR_DIM), 2, pm)?;
        Ok(inst)
    }
    fn evaluate(&self, i: &Instance) -> Result<Vec<IneqReport>> {
        let (x1, x2) = (i.dist(0)?, i.dist(1)?);
        let t = endgame_tables(x1, x2)?;
        Ok(vec![
            identity("endgame-i2-i3", t.i2, t.i3),
            identity("endgame-k", t.k, rdist(x1, x2)?),
        ])
    }
}

/// Ordered collection of suites; runs follow registration order.
pub struct SuiteRegistry {
    suites: Vec<Box<dyn CheckSuite>>,
}

impl Default for SuiteRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(TriangleSuite));
        r.register(Box::new(MadimanSuite));
        r.register(Box::new(Lemma51Suite));
        r.register(Box::new(Lemma52Suite));
        r.register(Box::new(Lemma71Suite));
        r.register(Box::new(RdistDiffSuite));
        r.register(Box::new(SubmodularitySuite));
        r.register(Box::new(BsgSuite));
        r.register(Box::new(FibringSuite));
        r.register(Box::new(CorFibreSuite));
        r.register(Box::new(CondRdistAltSuite));
        r.register(Box::new(ChainRuleSuite));
        r.register(Box::new(TrialsSuite));
        r.register(Box::new(EndgameSuite));
        r
    }
}

impl SuiteRegistry {
    pub fn empty() -> Self {
        Self { suites: Vec::new() }
    }

    /// Adds a suite, replacing any suite of the same name in place.
    pub fn register(&mut self, suite: Box<dyn CheckSuite>) {
        match self.suites.iter().position(|s| s.name() == suite.name()) {
            Some(i) => self.suites[i] = suite,
            None => self.suites.push(suite),
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.suites.iter().map(|s| s.name()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&dyn CheckSuite> {
        self.suites
            .iter()
            .find(|s| s.name().eq_ignore_ascii_case(name))
            .map(|s| s.as_ref())
    }

    /// Keeps only the named suites, in registration order.
    pub fn select(self, names: &[String]) -> Result<Self> {
        for n in names {
            if !self.suites.iter().any(|s| s.name().eq_ignore_ascii_case(n)) {
                return Err(PfrError::UnknownStrategy(n.clone()));
            }
        }
        let suites = self
            .suites
            .into_iter()
            .filter(|s| names.iter().any(|n| n.eq_ignore_ascii_case(s.name())))
            .collect();
        Ok(Self { suites })
    }

    pub fn suites(&self) -> &[Box<dyn CheckSuite>] {
        &self.suites
    }
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub seed: u64,
    pub n: u32,
    pub trials: usize,
    pub point_masses: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SUITE_SEED,
            n: DEFAULT_SUITE_DIM,
            trials: DEFAULT_TRIALS,
            point_masses: false,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(PfrError::InvalidParameter(
                "trials must be at least 1".into(),
            ));
        }
        if self.n == 0 || self.n > MAX_SUITE_DIM {
            return Err(PfrError::InvalidParameter(format!(
                "suite dimension {} outside 1..={MAX_SUITE_DIM}",
                self.n
            )));
        }
        Ok(())
    }
}

/// One evaluated report, tagged with its suite and instance index.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteRecord {
    pub suite: String,
    pub index: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub report: IneqReport,
}

/// The first failing report with the instance that produced it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Counterexample {
    pub suite: String,
    pub index: usize,
    pub report: IneqReport,
    pub instance: Instance,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SuiteOutcome {
    pub records: Vec<SuiteRecord>,
    pub counterexample: Option<Counterexample>,
    pub suites_run: Vec<String>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }

    pub fn min_slack(&self, suite: &str) -> Option<f64> {
        self.records
            .iter()
            .filter(|r| r.suite == suite)
            .map(|r| r.report.slack)
            .reduce(f64::min)
    }
}

fn name_key(name: &str) -> u64 {
    name.bytes().fold(0xCBF2_9CE4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Seed of instance `index` of the named suite.
pub fn suite_instance_seed(seed: u64, suite: &str, index: usize) -> u64 {
    instance_seed(seed ^ name_key(suite), index as u64)
}

/// Samples and evaluates one instance.
pub fn run_instance(
    suite: &dyn CheckSuite,
    cfg: &SuiteConfig,
    index: usize,
) -> Result<(Instance, Vec<IneqReport>)> {
    let seed = suite_instance_seed(cfg.seed, suite.name(), index);
    let mut rng = rng_from_seed(seed);
    let inst = suite.sample(&mut rng, seed, cfg.n, cfg.point_masses)?;
    let reports = suite.evaluate(&inst)?;
    Ok((inst, reports))
}

/// Runs one suite over `cfg.trials` instances in parallel.
pub fn run_suite(
    suite: &dyn CheckSuite,
    cfg: &SuiteConfig,
) -> Result<(Vec<SuiteRecord>, Option<Counterexample>)> {
    cfg.validate()?;
    let results: Vec<(usize, u64, Vec<IneqReport>, Option<Instance>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|index| {
            let (inst, reports) = run_instance(suite, cfg, index)?;
            let keep = reports.iter().any(|r| !r.holds).then(|| inst.clone());
            Ok((index, inst.seed, reports, keep))
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::new();
    let mut counterexample = None;
    for (index, seed, reports, inst) in results {
        if counterexample.is_none() {
            if let Some(inst) = inst {
                let report = reports
                    .iter()
                    .find(|r| !r.holds)
                    .cloned()
                    .expect("a failing report");
                counterexample = Some(Counterexample {
                    suite: suite.name().to_string(),
                    index,
                    report,
                    instance: inst,
                });
            }
        }
        records.extend(reports.into_iter().map(|report| SuiteRecord {
            suite: suite.name().to_string(),
            index,
            seed,
            report,
        }));
    }
    Ok((records, counterexample))
}

/// Runs the suites in order, stopping after the first suite with a violation.
pub fn run_suites(registry: &SuiteRegistry, cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    cfg.validate()?;
    let mut out = SuiteOutcome::default();
    for suite in registry.suites() {
        let (records, cex) = run_suite(suite.as_ref(), cfg)?;
        out.records.extend(records);
        out.suites_run.push(suite.name().to_string());
        if cex.is_some() {
            out.counterexample = cex;
            break;
        }
    }
    Ok(out)
}

/// Replays a serialized instance through the suite it names.
pub fn replay(registry: &SuiteRegistry, instance: &Instance) -> Result<Vec<IneqReport>> {
    registry
        .get(&instance.suite)
        .ok_or_else(|| PfrError::UnknownStrategy(instance.suite.clone()))?
        .evaluate(instance)
}
