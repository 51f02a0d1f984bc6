//! Effort accounting, Path/Effort Efficiency, the Interactive Navigation
//! Score, the shaped reward, aggregation and significance tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::physics::StepOutcome;
use crate::GRAVITY;

/// One-time reward for reaching the goal.
pub const SUCCESS_REWARD: f64 = 10.0;
/// Per-step displacements below this many meters are treated as numerical noise.
pub const JITTER_FLOOR: f64 = 1e-4;
/// Default alpha reporting grid.
pub const DEFAULT_ALPHA_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("step outcome has {got} bodies, ledger tracks {expected}")]
    BodyCountMismatch { expected: usize, got: usize },
    #[error("successful episode with zero robot path length")]
    ZeroPathWithSuccess,
    #[error("ideal path length must be positive and finite, got {0}")]
    InvalidIdealLength(f64),
    #[error("alpha must lie in [0, 1], got {0}")]
    AlphaOutOfRange(f64),
}

/// Per-episode effort accumulators.
///
/// Index 0 is the robot; the remaining entries are movable objects followed
/// by door leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortLedger {
    pub path_lengths: Vec<f64>,
    pub masses: Vec<f64>,
    /// Sum over steps of the per-step applied force magnitude, N.
    pub force_sum: f64,
    pub steps: u64,
    /// Robot weight `m_0 g`, N.
    pub gravity_force: f64,
    pub interaction_steps: u64,
}

impl EffortLedger {
    pub fn new(masses: Vec<f64>) -> Self {
        assert!(!masses.is_empty(), "ledger needs the robot mass");
        Self {
            path_lengths: vec![0.0; masses.len()],
            gravity_force: masses[0] * GRAVITY,
            masses,
            force_sum: 0.0,
            steps: 0,
            interaction_steps: 0,
        }
    }

    pub fn robot_path_length(&self) -> f64 {
        self.path_lengths[0]
    }

    /// Accumulates one physics step.
    pub fn record_step(&mut self, outcome: &StepOutcome) -> Result<(), MetricsError> {
        if outcome.displacements.len() != self.path_lengths.len() {
            return Err(MetricsError::BodyCountMismatch {
                expected: self.path_lengths.len(),
                got: outcome.displacements.len(),
            });
        }
        for (l, d) in self.path_lengths.iter_mut().zip(&outcome.displacements) {
            if *d >= JITTER_FLOOR {
                *l += d;
            }
        }
        self.force_sum += outcome.total_force();
        self.steps += 1;
        if outcome.interacted {
            self.interaction_steps += 1;
        }
        Ok(())
    }

    /// Sum of `m_i * l_i` over all bodies, robot included.
    pub fn displaced_mass(&self) -> f64 {
        self.masses.iter().zip(&self.path_lengths).map(|(m, l)| m * l).sum()
    }
}

/// `P_eff = 1_suc * L* / l_0`, clamped to at most 1.
pub fn path_efficiency(ledger: &EffortLedger, l_star: f64, success: bool) -> Result<f64, MetricsError> {
    if !(l_star > 0.0 && l_star.is_finite()) {
        return Err(MetricsError::InvalidIdealLength(l_star));
    }
    if !success {
        return Ok(0.0);
    }
    let l0 = ledger.robot_path_length();
    if l0 <= 0.0 {
        return Err(MetricsError::ZeroPathWithSuccess);
    }
    Ok((l_star / l0.max(l_star)).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffortTerms {
    pub e_eff: f64,
    /// `m_0 l_0 / sum m_i l_i`; 1 when nothing moved.
    pub kinematic: f64,
    /// `T G / (T G + sum F_t)`.
    pub dynamic: f64,
}

pub fn effort_efficiency(ledger: &EffortLedger) -> EffortTerms {
    let total = ledger.displaced_mass();
    let kinematic = if total > 0.0 { ledger.masses[0] * ledger.path_lengths[0] / total } else { 1.0 };
    let tg = ledger.steps as f64 * ledger.gravity_force;
    let dynamic = if tg + ledger.force_sum > 0.0 { tg / (tg + ledger.force_sum) } else { 1.0 };
    EffortTerms { e_eff: 0.5 * (kinematic + dynamic), kinematic, dynamic }
}

/// `INS_alpha = alpha * P_eff + (1 - alpha) * E_eff`.
pub fn ins(p_eff: f64, e_eff: f64, alpha: f64) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(MetricsError::AlphaOutOfRange(alpha));
    }
    // exact endpoints
    if alpha == 1.0 {
        return Ok(p_eff);
    }
    if alpha == 0.0 {
        return Ok(e_eff);
    }
    Ok(alpha * p_eff + (1.0 - alpha) * e_eff)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardTerms {
    pub success: f64,
    pub potential: f64,
    pub interaction: f64,
    pub total: f64,
}

/// `R = R_suc + R_pot + R_int` for one step.
pub fn reward(gd_prev: f64, gd_now: f64, interacted: bool, success_this_step: bool, k_int: f64) -> RewardTerms {
    let success = if success_this_step { SUCCESS_REWARD } else { 0.0 };
    let potential = gd_prev - gd_now;
    let interaction = if interacted { -k_int } else { 0.0 };
    RewardTerms { success, potential, interaction, total: success + potential + interaction }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub success: bool,
    pub l_star: f64,
    pub p_eff: f64,
    pub e_eff: f64,
    pub kinematic_term: f64,
    pub dynamic_term: f64,
    /// `(alpha, INS_alpha)` pairs.
    pub ins: Vec<(f64, f64)>,
}

impl MetricReport {
    pub fn compute(ledger: &EffortLedger, l_star: f64, success: bool, alphas: &[f64]) -> Result<Self, MetricsError> {
        let p_eff = path_efficiency(ledger, l_star, success)?;
        let e = effort_efficiency(ledger);
        let ins = alphas
            .iter()
            .map(|&a| ins(p_eff, e.e_eff, a).map(|v| (a, v)))
            .collect::<Result<_, _>>()?;
        Ok(Self { success, l_star, p_eff, e_eff: e.e_eff, kinematic_term: e.kinematic, dynamic_term: e.dynamic, ins })
    }

    pub fn ins_at(&self, alpha: f64) -> f64 {
        self.ins
            .iter()
            .find(|(a, _)| *a == alpha)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| alpha * self.p_eff + (1.0 - alpha) * self.e_eff)
    }
}

/// Minimal per-episode input to [`aggregate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeScore {
    pub agent: String,
    pub robot: String,
    pub k_param: f64,
    pub success: bool,
    pub p_eff: f64,
    pub e_eff: f64,
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub agent: String,
    pub robot: String,
    pub k_param: f64,
    pub alpha: f64,
    pub ins_mean: f64,
    pub ins_std: f64,
    pub p_eff_mean: f64,
    pub e_eff_mean: f64,
    pub success_rate: f64,
    pub n: usize,
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

/// Mean and sample standard deviation, summed in sorted order so the result
/// does not depend on input order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sorted_sum(values.to_vec()) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = sorted_sum(values.iter().map(|v| (v - mean) * (v - mean)).collect()) / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Per (agent, robot, parameter) group and alpha: mean/std of INS and the
/// means of P_eff, E_eff and success. Rows are ordered by group key, then by
/// position in `alphas`.
pub fn aggregate(scores: &[EpisodeScore], alphas: &[f64]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String, f64)> =
        scores.iter().map(|s| (s.agent.clone(), s.robot.clone(), s.k_param)).collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    keys.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1 && a.2.to_bits() == b.2.to_bits());
    let mut rows = Vec::with_capacity(keys.len() * alphas.len());
    for (agent, robot, k) in keys {
        let group: Vec<&EpisodeScore> = scores
            .iter()
            .filter(|s| s.agent == agent && s.robot == robot && s.k_param.to_bits() == k.to_bits())
            .collect();
        let n = group.len();
        let p: Vec<f64> = group.iter().map(|s| s.p_eff).collect();
        let e: Vec<f64> = group.iter().map(|s| s.e_eff).collect();
        let (p_mean, _) = mean_std(&p);
        let (e_mean, _) = mean_std(&e);
        let success_rate = group.iter().filter(|s| s.success).count() as f64 / n as f64;
        for &alpha in alphas {
            let values: Vec<f64> = group
                .iter()
                .map(|s| ins(s.p_eff, s.e_eff, alpha).unwrap_or(f64::NAN))
                .collect();
            let (ins_mean, ins_std) = mean_std(&values);
            rows.push(SummaryRow {
                agent: agent.clone(),
                robot: robot.clone(),
                k_param: k,
                alpha,
                ins_mean,
                ins_std,
                p_eff_mean: p_mean,
                e_eff_mean: e_mean,
                success_rate,
                n,
            });
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
    /// Set when a sample is too small or has zero variance.
    pub degenerate: bool,
}

fn two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

fn degenerate(mean_diff: f64) -> TTest {
    if mean_diff == 0.0 {
        TTest { t: 0.0, p: 1.0, df: f64::NAN, degenerate: true }
    } else {
        TTest { t: f64::INFINITY.copysign(mean_diff), p: 0.0, df: f64::NAN, degenerate: true }
    }
}

/// Welch two-sample t-test, two-sided.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> TTest {
    let (ma, sa) = mean_std(a);
    let (mb, sb) = mean_std(b);
    if a.len() < 2 || b.len() < 2 {
        return degenerate(if a.is_empty() || b.is_empty() { 0.0 } else { ma - mb });
    }
    let (va, vb) = (sa * sa / a.len() as f64, sb * sb / b.len() as f64);
    let se2 = va + vb;
    if se2 == 0.0 {
        return degenerate(ma - mb);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    TTest { t, p: two_sided_p(t, df), df, degenerate: false }
}

/// One-sample t-test of `values` against mean `mu`, two-sided.
pub fn one_sample_t_test(values: &[f64], mu: f64) -> TTest {
    let (m, s) = mean_std(values);
    if values.len() < 2 {
        return degenerate(if values.is_empty() { 0.0 } else { m - mu });
    }
    if s == 0.0 {
        return degenerate(m - mu);
    }
    let n = values.len() as f64;
    let t = (m - mu) / (s / n.sqrt());
    let df = n - 1.0;
    TTest { t, p: two_sided_p(t, df), df, degenerate: false }
}

/// Both variants used for train/test comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestPair {
    pub welch: TTest,
    /// One-sample test of the paired differences against zero.
    pub paired: TTest,
}

/// Welch test on the two samples and a one-sample test on their paired
/// differences (pairs truncated to the shorter sample).
pub fn t_test(a: &[f64], b: &[f64]) -> TTestPair {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    TTestPair { welch: welch_t_test(a, b), paired: one_sample_t_test(&diffs, 0.0) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{Contact, BodyRef, StepOutcome, WorldState, Twist};
    use crate::geometry::Pose;

    fn outcome(displacements: Vec<f64>, force: Option<f64>) -> StepOutcome {
        let contacts: Vec<Contact> = force.into_iter().map(|f| Contact { body: BodyRef::Object(1), force: f }).collect();
        StepOutcome {
            state: WorldState { robot: Pose::default(), twist: Twist::default(), objects: vec![], doors: vec![], t: 1 },
            interacted: !contacts.is_empty(),
            contacts,
            displacements,
            chain: vec![],
        }
    }

    #[test]
    fn record_step_examples() {
        let mut l = EffortLedger::new(vec![6.3, 0.5, 45.0]);
        l.record_step(&outcome(vec![0.05, 0.0, 0.0], None)).unwrap();
        assert_eq!(l.path_lengths[0], 0.05);
        assert_eq!(l.force_sum, 0.0);
        l.record_step(&outcome(vec![0.03, 0.03, 0.0], Some(2.4525))).unwrap();
        assert_eq!(l.path_lengths[1], 0.03);
        assert_eq!(l.force_sum, 2.4525);
        l.record_step(&outcome(vec![0.0, 0.0, 0.0], Some(15.0))).unwrap();
        assert_eq!(l.path_lengths[2], 0.0);
        assert_eq!(l.force_sum, 2.4525 + 15.0);
        assert_eq!(l.steps, 3);
        assert_eq!(l.interaction_steps, 2);
        assert!(l.record_step(&outcome(vec![0.0], None)).is_err());
    }

    #[test]
    fn jitter_is_filtered() {
        let mut l = EffortLedger::new(vec![1.0]);
        l.record_step(&outcome(vec![5e-5], None)).unwrap();
        assert_eq!(l.path_lengths[0], 0.0);
    }

    #[test]
    fn path_efficiency_examples() {
        let mut l = EffortLedger::new(vec![10.0]);
        assert_eq!(path_efficiency(&l, 4.0, false).unwrap(), 0.0);
        assert_eq!(path_efficiency(&l, 4.0, true), Err(MetricsError::ZeroPathWithSuccess));
        l.path_lengths[0] = 5.0;
        assert!((path_efficiency(&l, 4.0, true).unwrap() - 0.8).abs() < 1e-15);
        l.path_lengths[0] = 4.0;
        assert_eq!(path_efficiency(&l, 4.0, true).unwrap(), 1.0);
        l.path_lengths[0] = 3.0;
        assert_eq!(path_efficiency(&l, 4.0, true).unwrap(), 1.0);
    }

    #[test]
    fn effort_examples() {
        let mut l = EffortLedger::new(vec![10.0, 2.0]);
        l.steps = 1;
        let e = effort_efficiency(&l);
        assert_eq!((e.kinematic, e.dynamic, e.e_eff), (1.0, 1.0, 1.0));
        l.path_lengths = vec![5.0, 2.5];
        let e = effort_efficiency(&l);
        assert!((e.e_eff - 0.5 * (50.0 / 55.0 + 1.0)).abs() < 1e-15);
        let mut l = EffortLedger::new(vec![10.0, 2.0]);
        l.steps = 1000;
        l.path_lengths = vec![3.0, 0.0];
        l.force_sum = 98_100.0;
        let e = effort_efficiency(&l);
        assert!((l.gravity_force - 98.1).abs() < 1e-12);
        assert!((e.e_eff - 0.75).abs() < 1e-12);
    }

    #[test]
    fn ins_examples() {
        assert_eq!(ins(0.3, 0.9, 1.0).unwrap(), 0.3);
        assert_eq!(ins(0.3, 0.9, 0.0).unwrap(), 0.9);
        assert!((ins(0.8, 0.9, 0.5).unwrap() - 0.85).abs() < 1e-15);
        assert!(ins(0.8, 0.9, 1.5).is_err());
    }

    #[test]
    fn reward_examples() {
        assert!((reward(3.0, 2.8, false, false, 0.1).total - 0.2).abs() < 1e-12);
        assert_eq!(reward(2.0, 2.0, true, false, 1.0).total, -1.0);
        assert!((reward(0.3, 0.1, false, true, 0.0).total - 10.2).abs() < 1e-12);
    }

    fn score(p: f64, e: f64) -> EpisodeScore {
        EpisodeScore { agent: "a".into(), robot: "r".into(), k_param: 0.0, success: p > 0.0, p_eff: p, e_eff: e }
    }

    #[test]
    fn aggregate_examples() {
        let rows = aggregate(&[score(0.6, 0.9)], &[1.0]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].ins_mean, 0.6);
        assert_eq!(rows[0].ins_std, 0.0);
        let rows = aggregate(&[score(0.6, 0.9), score(0.8, 0.9)], &[1.0]);
        assert!((rows[0].ins_mean - 0.7).abs() < 1e-15);
        let rows = aggregate(&[score(0.6, 0.9), score(0.8, 0.9)], &DEFAULT_ALPHA_GRID);
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.n == 2));
    }

    #[test]
    fn aggregate_is_order_insensitive() {
        let a = vec![score(0.1, 0.3), score(0.7, 0.2), score(0.33, 0.9)];
        let mut b = a.clone();
        b.reverse();
        assert_eq!(aggregate(&a, &DEFAULT_ALPHA_GRID), aggregate(&b, &DEFAULT_ALPHA_GRID));
    }

    #[test]
    fn t_test_examples() {
        let r = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        assert_eq!((r.t, r.p), (0.0, 1.0));
        // scipy.stats.ttest_ind(equal_var=False): t = -1.0, p = 0.34659350708733405
        let r = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!((r.t + 1.0).abs() < 1e-12);
        assert!((r.df - 8.0).abs() < 1e-12);
        assert!((r.p - 0.34659350708733405).abs() < 1e-9, "{}", r.p);
        let r = welch_t_test(&[0.0, 0.0, 0.0], &[10.0, 10.0, 10.0]);
        assert!(r.p < 0.01 && r.degenerate);
        // scipy.stats.ttest_1samp([1, 2, 3, 4], 0): t = 3.872983346207417, p = 0.030466291662170977
        let r = one_sample_t_test(&[1.0, 2.0, 3.0, 4.0], 0.0);
        assert!((r.t - 3.872983346207417).abs() < 1e-12);
        assert!((r.p - 0.030466291662170977).abs() < 1e-9);
    }
}
