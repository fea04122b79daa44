//! Anchor indices, merged indices, step targets and the sandwich constant.
//!
//! Given `d` and a separation profile `a`, the anchors obey
//! `n_1 = 1, n_{i+1} = min{ n : d_n / a_n² ≤ d_{n_i} }`. Between consecutive
//! anchors at least two apart a middle index `n_{i+1} − 1` is inserted; the
//! merged, strictly increasing list is `m`, and the targets `e_j` on
//! `Z_j = Y_{m_j}` are
//!
//! * `e_j = c d_{n_i} / a_{m_{j+1}}` at an anchor `j = j_i`,
//! * `e_j = c d_{n_i}` at a middle index.
//!
//! They contract like `e_{j+1} ≤ a_{m_{j+1}} e_j`.
//!
//! Finite horizon `N`: once no admissible anchor is left, the recursion
//! behaves as if `n_{I+1} = N + 1`, so a last middle index `N` closes the
//! chain. If instead the last anchor sits at `N`, its target has no
//! `a_{m_{J+1}}` to divide by and is set to `c d_N`.

use serde::{Deserialize, Serialize};

use crate::analytics::SeparationProfile;
use crate::error::{Error, Result};
use crate::space::ErrorSequence;

/// Relative slack used when comparing `d_n / a_n²` against `d_{n_i}`.
const RECURSION_RTOL: f64 = 1e-12;

/// Absolute slack of the step contraction check.
pub const STEP_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMode {
    /// Minimum over all `n ≥ 1`, as the recursion is written.
    Literal,
    /// Minimum over `n > n_i`.
    #[default]
    Strict,
}

impl std::str::FromStr for PlanMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "literal" => Ok(PlanMode::Literal),
            "strict" => Ok(PlanMode::Strict),
            other => Err(format!("unknown mode `{other}` (expected literal|strict)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexPlan {
    /// Anchors `n_1, n_2, …`; a stalled plan ends with the repeated anchor.
    pub n: Vec<usize>,
    /// `j_i` for every non-stalled anchor.
    pub j: Vec<usize>,
    /// Merged indices `m_1 < m_2 < …`.
    pub m: Vec<usize>,
    pub mode: PlanMode,
    /// `Some(i)` when `n_{i+1} ≤ n_i` was produced (literal mode only).
    pub stalled: Option<usize>,
    pub horizon: usize,
    /// A middle index `N` was appended after the last anchor.
    pub closed_at_horizon: bool,
    /// The j-rule skips the middle index when `n_{i+1} = n_i + 1`.
    pub amended_j_rule: bool,
}

impl IndexPlan {
    /// Anchors that take part in the step construction.
    pub fn anchors(&self) -> &[usize] {
        match self.stalled {
            Some(_) => &self.n[..self.n.len() - 1],
            None => &self.n,
        }
    }
}

fn check_inputs(d: &ErrorSequence, profile: &SeparationProfile) -> Result<()> {
    if d.is_empty() {
        return Err(Error::HorizonExhausted("empty error sequence".into()));
    }
    if !d.is_positive() {
        return Err(Error::InvalidSequence("index recursion needs d > 0 on the horizon".into()));
    }
    if profile.len() < d.len() {
        return Err(Error::MismatchedInputs(format!(
            "profile has {} entries but d has {}",
            profile.len(),
            d.len()
        )));
    }
    Ok(())
}

/// Runs the anchor recursion and builds `j` and `m`.
///
/// A literal-mode stall is returned as [`Error::StalledPlan`] carrying the
/// partial plan.
pub fn build_index_plan(d: &ErrorSequence, profile: &SeparationProfile, mode: PlanMode) -> Result<IndexPlan> {
    check_inputs(d, profile)?;
    let horizon = d.len();
    let ratio = |n: usize| d.d(n) / (profile.a(n) * profile.a(n));
    for n in 1..horizon {
        if ratio(n + 1) > ratio(n) * (1.0 + RECURSION_RTOL) {
            return Err(Error::InvalidProfile(format!(
                "d_n / a_n^2 increases between n = {n} and n = {}",
                n + 1
            )));
        }
    }

    let mut n = vec![1usize];
    let mut stalled = None;
    loop {
        let current = *n.last().expect("n_1 exists");
        let start = match mode {
            PlanMode::Literal => 1,
            PlanMode::Strict => current + 1,
        };
        let bound = d.d(current) * (1.0 + RECURSION_RTOL);
        // the admissible set is an up-set, so the first hit is the minimum
        let Some(next) = (start..=horizon).find(|&k| ratio(k) <= bound) else {
            break;
        };
        n.push(next);
        if next <= current {
            stalled = Some(n.len() - 1);
            break;
        }
    }

    let mut plan = IndexPlan {
        n,
        j: Vec::new(),
        m: Vec::new(),
        mode,
        stalled,
        horizon,
        closed_at_horizon: false,
        amended_j_rule: true,
    };
    let anchors = plan.anchors().to_vec();
    let mut j = 1;
    for (i, &anchor) in anchors.iter().enumerate() {
        plan.j.push(j);
        plan.m.push(anchor);
        let next = match anchors.get(i + 1) {
            Some(&next) => Some(next),
            None if stalled.is_none() && anchor < horizon => {
                plan.closed_at_horizon = true;
                Some(horizon + 1)
            }
            None => None,
        };
        if let Some(next) = next {
            if next > anchor + 1 {
                plan.m.push(next - 1);
                j += 2;
            } else {
                j += 1;
            }
        }
    }

    match stalled {
        Some(stall_index) => Err(Error::StalledPlan {
            stall_index,
            plan: Box::new(plan),
        }),
        None => Ok(plan),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepSequence {
    pub e: Vec<f64>,
    /// `Z_j = Y_{z_j}`.
    pub z: Vec<usize>,
    /// `j = j_i` for some anchor `i`.
    pub anchor: Vec<bool>,
    pub c: f64,
}

impl StepSequence {
    /// Hand-assembled steps, e.g. for checking [`verify_step_inequality`].
    pub fn from_parts(e: Vec<f64>, z: Vec<usize>, anchor: Vec<bool>, c: f64) -> Result<Self> {
        if e.len() != z.len() || e.len() != anchor.len() {
            return Err(Error::MismatchedInputs("e, z and anchor must have equal length".into()));
        }
        Ok(Self { e, z, anchor, c })
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    /// `(z_j, e_j)` pairs, the witness targets.
    pub fn targets(&self) -> Vec<(usize, f64)> {
        self.z.iter().copied().zip(self.e.iter().copied()).collect()
    }
}

pub fn build_step_sequence(
    plan: &IndexPlan,
    d: &ErrorSequence,
    profile: &SeparationProfile,
    c: f64,
) -> Result<StepSequence> {
    if plan.stalled.is_some() {
        return Err(Error::PlanStalled);
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidSequence(format!("c must lie in (0, 1], got {c}")));
    }
    if plan.n.is_empty() || plan.m.is_empty() {
        return Err(Error::HorizonExhausted("plan has no anchors".into()));
    }
    if let Some(&top) = plan.m.iter().max() {
        if top > profile.len() || top > d.len() {
            return Err(Error::HorizonExhausted(format!(
                "index {top} lies beyond the profile or the error sequence"
            )));
        }
    }
    let mut e = Vec::with_capacity(plan.m.len());
    let mut anchor = Vec::with_capacity(plan.m.len());
    let mut i = 0;
    for (idx, _) in plan.m.iter().enumerate() {
        let j = idx + 1;
        if i + 1 < plan.j.len() && j >= plan.j[i + 1] {
            i += 1;
        }
        let dn = d.d(plan.n[i]);
        if j == plan.j[i] {
            let value = match plan.m.get(idx + 1) {
                Some(&next) => c / profile.a(next) * dn,
                None => c * dn,
            };
            e.push(value);
            anchor.push(true);
        } else {
            e.push(c * dn);
            anchor.push(false);
        }
    }
    Ok(StepSequence {
        e,
        z: plan.m.clone(),
        anchor,
        c,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepCase {
    /// `j` is a middle index, `j + 1` the next anchor.
    MiddleToAnchor,
    /// `j` is an anchor followed by a middle index (equality case).
    AnchorToMiddle,
    /// Two consecutive anchors.
    AnchorToAnchor,
}

impl StepCase {
    pub fn number(self) -> u8 {
        match self {
            StepCase::MiddleToAnchor => 1,
            StepCase::AnchorToMiddle => 2,
            StepCase::AnchorToAnchor => 3,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StepCheck {
    pub j: usize,
    pub case: StepCase,
    /// `e_{j+1}`.
    pub lhs: f64,
    /// `a_{m_{j+1}} e_j`.
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepReport {
    pub checks: Vec<StepCheck>,
    pub pass: bool,
}

/// Checks `e_{j+1} ≤ a_{m_{j+1}} e_j + 1e-12` for every consecutive pair.
pub fn verify_step_inequality(steps: &StepSequence, profile: &SeparationProfile) -> Result<StepReport> {
    let mut checks = Vec::new();
    for idx in 0..steps.len().saturating_sub(1) {
        let next_m = steps.z[idx + 1];
        if next_m == 0 || next_m > profile.len() {
            return Err(Error::MismatchedInputs(format!(
                "step index {next_m} outside the profile"
            )));
        }
        let case = match (steps.anchor[idx], steps.anchor[idx + 1]) {
            (false, _) => StepCase::MiddleToAnchor,
            (true, false) => StepCase::AnchorToMiddle,
            (true, true) => StepCase::AnchorToAnchor,
        };
        let lhs = steps.e[idx + 1];
        let rhs = profile.a(next_m) * steps.e[idx];
        checks.push(StepCheck {
            j: idx + 1,
            case,
            lhs,
            rhs,
            slack: rhs - lhs,
            pass: lhs <= rhs + STEP_TOL,
        });
    }
    Ok(StepReport {
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TildeAContributor {
    /// Position of the staircase in the supplied family.
    pub staircase: usize,
    /// Anchor position `i` (1-based).
    pub i: usize,
    /// `n_{i+1} − 1`.
    pub index: usize,
    pub a: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TildeA {
    /// `max a_{n_{i+1}−1}^{-3}`; a lower bound on the supremum over every staircase.
    pub value: f64,
    pub contributors: Vec<TildeAContributor>,
    /// Pairs with `n_{i+1} − 1 = 0`.
    pub skipped_zero: usize,
    pub skipped_beyond_horizon: usize,
}

impl TildeA {
    /// `min(4, ã)`.
    pub fn capped(&self) -> f64 {
        self.value.min(4.0)
    }
}

pub fn compute_tilde_a(plans: &[(&IndexPlan, &SeparationProfile)]) -> Result<TildeA> {
    let mut seen: Vec<(TildeAContributor, f64)> = Vec::new();
    let mut skipped_zero = 0;
    let mut skipped_beyond_horizon = 0;
    let mut pair_count = 0;
    for (s, (plan, profile)) in plans.iter().enumerate() {
        let mut pairs: Vec<(usize, usize)> = plan.n.windows(2).map(|w| (w[0], w[1])).collect();
        if plan.stalled.is_none() && plan.closed_at_horizon {
            pairs.push((*plan.n.last().expect("anchors"), plan.horizon + 1));
        }
        pair_count += pairs.len();
        for (i, (_, next)) in pairs.into_iter().enumerate() {
            let index = next - 1;
            if index == 0 {
                skipped_zero += 1;
                continue;
            }
            if index > profile.len() {
                skipped_beyond_horizon += 1;
                continue;
            }
            let a = profile.a(index);
            seen.push((
                TildeAContributor {
                    staircase: s,
                    i: i + 1,
                    index,
                    a,
                },
                a.powi(-3),
            ));
        }
    }
    if pair_count == 0 && !plans.is_empty() && plans.iter().all(|(p, _)| p.stalled.is_none()) {
        // a single anchor at the horizon: the witness meets c d_1 exactly and
        // every a-value is at most 1
        return Ok(TildeA {
            value: 1.0,
            contributors: Vec::new(),
            skipped_zero,
            skipped_beyond_horizon,
        });
    }
    let value = seen
        .iter()
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    if seen.is_empty() {
        return Err(Error::NoContributors);
    }
    let contributors = seen
        .into_iter()
        .filter(|(_, v)| *v >= value * (1.0 - 1e-12))
        .map(|(c, _)| c)
        .collect();
    Ok(TildeA {
        value,
        contributors,
        skipped_zero,
        skipped_beyond_horizon,
    })
}

/// JSON form of a plan and, when available, its steps.
#[derive(Clone, Debug, Serialize)]
pub struct PlanDocument {
    pub n: Vec<usize>,
    pub j: Vec<usize>,
    pub m: Vec<usize>,
    pub mode: PlanMode,
    pub stalled: bool,
    pub e: Vec<f64>,
    pub z: Vec<usize>,
    pub amended_j_rule: bool,
}

impl PlanDocument {
    pub fn new(plan: &IndexPlan, steps: Option<&StepSequence>) -> Self {
        Self {
            n: plan.n.clone(),
            j: plan.j.clone(),
            m: plan.m.clone(),
            mode: plan.mode,
            stalled: plan.stalled.is_some(),
            e: steps.map(|s| s.e.clone()).unwrap_or_default(),
            z: steps.map(|s| s.z.clone()).unwrap_or_default(),
            amended_j_rule: plan.amended_j_rule,
        }
    }
}
