//! Separation quantities of a staircase and the two admissibility conditions
//! on `(chain, d)`.
//!
//! The inner quantity is the minimum ratio `ρ(q, Y_l) / ‖q‖` over nonzero `q`
//! in `span⟨q_l, …, q_L⟩`. In the Euclidean norm it is the sine of the
//! smallest principal angle between that span and `Y_l`, i.e. the smallest
//! singular value of `P_{Y_l}^⊥ Q` for an orthonormal basis `Q` of the span.
//! For other norms it is estimated by sampling directions and refining the
//! best ones, which yields an upper bound on the infimum.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::distance::{self, DescentOptions, Method};
use crate::error::{Error, Result};
use crate::space::{ErrorSequence, Subspace, SubspaceChain};

/// Smallest admissible separation value.
pub const SEPARATION_EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct EstimationOptions {
    pub sphere_samples: usize,
    /// Number of best samples refined by pattern search.
    pub refine_best: usize,
    pub descent: DescentOptions,
    pub tol: f64,
    pub seed: u64,
}

impl Default for EstimationOptions {
    fn default() -> Self {
        Self {
            sphere_samples: 4096,
            refine_best: 16,
            descent: DescentOptions::default(),
            tol: 1e-10,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    /// Principal-angle value, or a single-vector span measured by a certified solver.
    Exact { method: Method },
    /// Best of sampled and refined directions; an upper bound on the infimum.
    Estimated { samples: usize, refined: usize },
    /// Supplied by the caller.
    Given,
}

impl Provenance {
    pub fn is_exact(&self) -> bool {
        matches!(self, Provenance::Exact { .. })
    }
}

#[derive(Clone, Debug)]
pub struct SpanRatio {
    pub value: f64,
    pub provenance: Provenance,
    /// Direction attaining `value`, normalized to unit norm in the chain's norm.
    pub witness: DVector<f64>,
}

/// Splits one seed into independent streams per `(l, last)` pair.
pub(crate) fn derive_seed(seed: u64, a: usize, b: usize) -> u64 {
    let mut z = seed
        ^ (a as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (b as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_span(chain: &SubspaceChain, l: usize, last: usize) -> Result<()> {
    if l == 0 || l > last || last > chain.staircase().len() || l > chain.horizon() {
        return Err(Error::EmptySpan { l, last });
    }
    Ok(())
}

/// `inf { ρ(q, Y_l) / ‖q‖ : 0 ≠ q ∈ span⟨q_l..q_last⟩ }`, exact for `p = 2`.
pub fn min_ratio_over_span(
    chain: &SubspaceChain,
    l: usize,
    last: usize,
    opts: &EstimationOptions,
) -> Result<SpanRatio> {
    check_span(chain, l, last)?;
    if chain.space().is_euclidean() {
        principal_angle_ratio(chain, l, last)
    } else if l == last {
        single_vector_ratio(chain, l, opts)
    } else {
        estimate_min_ratio(chain, l, last, opts)
    }
}

/// Euclidean value through the smallest singular value of `P^⊥ Q`.
fn principal_angle_ratio(chain: &SubspaceChain, l: usize, last: usize) -> Result<SpanRatio> {
    let image = chain.weighted_image()?;
    let span = Subspace::new(image.staircase()[l - 1..last].to_vec())?;
    let y = image.subspace(l);
    let q = span.orthonormal();
    let mut residual = q.clone();
    for mut col in residual.column_iter_mut() {
        let c = col.clone_owned();
        col.copy_from(&y.complement(&c));
    }
    let svd = residual.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let (idx, sigma) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("span is non-empty");
    let direction = q * v_t.row(idx).transpose();
    let mut witness = chain.space().unweigh(&direction);
    let scale = chain.space().norm_unchecked(witness.as_slice());
    witness /= scale;
    Ok(SpanRatio {
        value: sigma,
        provenance: Provenance::Exact {
            method: Method::Projection,
        },
        witness,
    })
}

fn ratio_of(chain: &SubspaceChain, l: usize, q: &DVector<f64>, opts: &EstimationOptions) -> Result<(f64, bool)> {
    let norm = chain.space().norm_unchecked(q.as_slice());
    if norm == 0.0 {
        return Ok((f64::INFINITY, false));
    }
    let r = distance::distance_with(chain.space(), q, chain.subspace(l), &opts.descent)?;
    Ok((r.value / norm, r.certified))
}

fn single_vector_ratio(chain: &SubspaceChain, l: usize, opts: &EstimationOptions) -> Result<SpanRatio> {
    let q = chain.q(l);
    let (value, certified) = ratio_of(chain, l, q, opts)?;
    let norm = chain.space().norm_unchecked(q.as_slice());
    let provenance = if certified {
        Provenance::Exact {
            method: Method::Simplex,
        }
    } else {
        Provenance::Estimated {
            samples: 1,
            refined: 0,
        }
    };
    Ok(SpanRatio {
        value,
        provenance,
        witness: q / norm,
    })
}

/// Sampling estimator, available for every norm (including `p = 2`, where it
/// serves as a cross-check of the principal-angle value).
pub fn estimate_min_ratio(
    chain: &SubspaceChain,
    l: usize,
    last: usize,
    opts: &EstimationOptions,
) -> Result<SpanRatio> {
    check_span(chain, l, last)?;
    let span = &chain.staircase()[l - 1..last];
    let k = span.len();
    let assemble = |beta: &[f64]| {
        let mut q = DVector::zeros(chain.space().dim());
        for (b, v) in beta.iter().zip(span) {
            q.axpy(*b, v, 1.0);
        }
        q
    };
    let eval = |beta: &[f64]| ratio_of(chain, l, &assemble(beta), opts).map(|r| r.0);

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, l, last));
    let mut scored: Vec<(f64, Vec<f64>)> = Vec::with_capacity(opts.sphere_samples);
    for _ in 0..opts.sphere_samples.max(1) {
        let mut beta: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let n = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
        if n == 0.0 {
            continue;
        }
        beta.iter_mut().for_each(|b| *b /= n);
        scored.push((eval(&beta)?, beta));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let refined = opts.refine_best.min(scored.len());
    let mut best = scored[0].clone();
    for (value, beta) in scored.into_iter().take(refined) {
        let candidate = pattern_search(beta, value, &eval)?;
        if candidate.0 < best.0 {
            best = candidate;
        }
    }
    let q = assemble(&best.1);
    let norm = chain.space().norm_unchecked(q.as_slice());
    Ok(SpanRatio {
        value: best.0,
        provenance: Provenance::Estimated {
            samples: opts.sphere_samples,
            refined,
        },
        witness: q / norm,
    })
}

/// Compass search on the coefficient sphere; derivative-free so it also copes
/// with the kinks of the 1- and sup-norms.
fn pattern_search(
    mut beta: Vec<f64>,
    mut value: f64,
    eval: &dyn Fn(&[f64]) -> Result<f64>,
) -> Result<(f64, Vec<f64>)> {
    let mut h = 0.1;
    let mut budget = 4000 * beta.len();
    while h > 1e-9 && budget > 0 {
        let mut improved = false;
        for i in 0..beta.len() {
            for sign in [1.0, -1.0] {
                let mut cand = beta.clone();
                cand[i] += sign * h;
                let n = cand.iter().map(|b| b * b).sum::<f64>().sqrt();
                cand.iter_mut().for_each(|b| *b /= n);
                let v = eval(&cand)?;
                budget = budget.saturating_sub(1);
                if v < value {
                    value = v;
                    beta = cand;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    Ok((value, beta))
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileEntry {
    /// `a_n`.
    pub value: f64,
    /// Level `l ≥ n` attaining the outer minimum.
    pub attained_at: usize,
    pub provenance: Provenance,
}

/// `a_1 ≤ a_2 ≤ …` truncated at the last staircase vector.
#[derive(Clone, Debug, Serialize)]
pub struct SeparationProfile {
    pub entries: Vec<ProfileEntry>,
    /// Index of the last staircase vector entering the tails.
    pub tail_end: usize,
    pub horizon: usize,
}

impl SeparationProfile {
    /// Wraps caller-supplied values; they must be non-decreasing in `(0, 1]`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let len = values.len();
        let profile = Self {
            entries: values
                .into_iter()
                .enumerate()
                .map(|(i, value)| ProfileEntry {
                    value,
                    attained_at: i + 1,
                    provenance: Provenance::Given,
                })
                .collect(),
            tail_end: len,
            horizon: len,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `a_n`, 1-based.
    pub fn a(&self, n: usize) -> f64 {
        self.entries[n - 1].value
    }

    pub fn is_certified(&self) -> bool {
        self.entries.iter().all(|e| e.provenance.is_exact())
    }

    pub fn min(&self) -> f64 {
        self.entries.iter().map(|e| e.value).fold(f64::INFINITY, f64::min)
    }

    fn validate(&self) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            if !(e.value > SEPARATION_EPS && e.value <= 1.0) {
                return Err(Error::InvalidProfile(format!(
                    "a_{} = {} outside (0, 1]",
                    i + 1,
                    e.value
                )));
            }
        }
        if let Some(i) = self.entries.windows(2).position(|w| w[1].value < w[0].value) {
            return Err(Error::InvalidProfile(format!(
                "a_{} > a_{}: profile must be non-decreasing",
                i + 1,
                i + 2
            )));
        }
        Ok(())
    }
}

/// `a_n = min_{l ∈ [n, K]} min_ratio_over_span(l, K)` where `K` is the number
/// of staircase vectors.
pub fn separation_profile(chain: &SubspaceChain, opts: &EstimationOptions) -> Result<SeparationProfile> {
    profile_with(chain, opts, min_ratio_over_span)
}

/// Same as [`separation_profile`] but every span goes through the sampling
/// estimator.
pub fn estimate_separation_profile(
    chain: &SubspaceChain,
    opts: &EstimationOptions,
) -> Result<SeparationProfile> {
    profile_with(chain, opts, estimate_min_ratio)
}

type SpanFn = fn(&SubspaceChain, usize, usize, &EstimationOptions) -> Result<SpanRatio>;

fn profile_with(chain: &SubspaceChain, opts: &EstimationOptions, span_ratio: SpanFn) -> Result<SeparationProfile> {
    let last = chain.staircase().len();
    if last == 0 {
        return Err(Error::EmptySpan { l: 1, last: 0 });
    }
    let ratios = (1..=last)
        .map(|l| span_ratio(chain, l, last, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut entries: Vec<ProfileEntry> = Vec::with_capacity(last);
    // an estimated ratio anywhere in the tail makes the minimum an estimate
    let mut estimated: Option<Provenance> = None;
    for (i, r) in ratios.into_iter().enumerate().rev() {
        if estimated.is_none() && !r.provenance.is_exact() {
            estimated = Some(r.provenance.clone());
        }
        // rounding may push a ratio an ulp or two above 1
        let value = if r.value > 1.0 && r.value <= 1.0 + SEPARATION_EPS {
            1.0
        } else {
            r.value
        };
        let mut entry = match entries.last() {
            Some(next) if next.value <= value => next.clone(),
            _ => ProfileEntry {
                value,
                attained_at: i + 1,
                provenance: r.provenance,
            },
        };
        if let Some(p) = &estimated {
            if entry.provenance.is_exact() {
                entry.provenance = p.clone();
            }
        }
        entries.push(entry);
    }
    entries.reverse();
    let profile = SeparationProfile {
        entries,
        tail_end: last,
        horizon: chain.horizon(),
    };
    profile.validate()?;
    Ok(profile)
}

/// `inf_n a_n ≥ threshold`; by monotonicity this is `a_1 ≥ threshold`.
pub fn check_uniform_separation(profile: &SeparationProfile, threshold: f64) -> bool {
    profile.min() >= threshold
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionKind {
    /// `d_n > Σ_{k>n} d_k`.
    Geometric,
    /// `‖q‖ ≤ (d_{k−1}/d_k) ρ(q, Y_k)` on tail spans.
    SpanRatio,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionFailure {
    pub index: usize,
    pub witness: Option<Vec<f64>>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub kind: ConditionKind,
    pub pass: bool,
    pub failures: Vec<ConditionFailure>,
    /// Smallest `rhs − lhs` seen; `null` in JSON when nothing was checked.
    pub margin: f64,
}

impl ConditionReport {
    fn new(kind: ConditionKind, failures: Vec<ConditionFailure>, margin: f64) -> Self {
        Self {
            kind,
            pass: failures.is_empty(),
            failures,
            margin,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GeometricMode {
    /// Literal finite tail sums.
    #[default]
    Truncated,
    /// For a geometric input, compares against the infinite tail `d_n r/(1−r)`;
    /// other inputs fall back to truncated sums.
    IdealizedGeometric,
}

/// Common ratio if `d` is a positive geometric sequence of length ≥ 2.
fn geometric_ratio(d: &[f64]) -> Option<f64> {
    if d.len() < 2 || d.iter().any(|x| *x <= 0.0) {
        return None;
    }
    let r = d[1] / d[0];
    d.windows(2)
        .all(|w| ((w[1] / w[0]) - r).abs() <= 1e-9 * r)
        .then_some(r)
}

pub fn check_geometric_condition(d: &ErrorSequence, mode: GeometricMode) -> ConditionReport {
    let values = d.values();
    let mut failures = Vec::new();
    let mut margin = f64::INFINITY;
    let ratio = match mode {
        GeometricMode::IdealizedGeometric => geometric_ratio(values),
        GeometricMode::Truncated => None,
    };
    let mut tail: f64 = 0.0;
    let mut tails = vec![0.0; values.len()];
    for (i, v) in values.iter().enumerate().rev() {
        tails[i] = tail;
        tail += v;
    }
    for (i, &dn) in values.iter().enumerate() {
        if dn <= 0.0 {
            continue;
        }
        let rhs = match ratio {
            Some(r) if r >= 1.0 => f64::INFINITY,
            Some(r) => dn * r / (1.0 - r),
            None => tails[i],
        };
        margin = margin.min(dn - rhs);
        // the idealized tail for r = 1/2 equals d_n up to rounding
        let holds = match ratio {
            Some(r) => r < 0.5 && dn > rhs,
            None => dn > rhs,
        };
        if !holds {
            failures.push(ConditionFailure {
                index: i + 1,
                witness: None,
                lhs: dn,
                rhs,
            });
        }
    }
    ConditionReport::new(ConditionKind::Geometric, failures, margin)
}

/// Tests `‖q‖ ≤ (d_{k−1}/d_k) ρ(q, Y_k)` for `q ∈ span⟨q_k, …⟩`, `k ≥ 2`.
///
/// Euclidean chains are checked exactly through the principal-angle value
/// (the failure witness is the minimizing direction); other norms test
/// `samples` random directions per level and can only falsify.
pub fn check_span_ratio_condition(
    chain: &SubspaceChain,
    d: &ErrorSequence,
    samples: usize,
    opts: &EstimationOptions,
) -> Result<ConditionReport> {
    if !d.is_positive() {
        return Err(Error::InvalidSequence("span-ratio condition needs d > 0".into()));
    }
    let last = chain.staircase().len();
    let top = d.len().min(last).min(chain.horizon());
    let mut failures = Vec::new();
    let mut margin = f64::INFINITY;
    let mut record = |k: usize, q: &DVector<f64>, lhs: f64, rho: f64| {
        let rhs = d.d(k - 1) / d.d(k) * rho;
        margin = margin.min((rhs - lhs) / lhs);
        if lhs > rhs + 1e-12 * lhs {
            failures.push(ConditionFailure {
                index: k,
                witness: Some(q.iter().copied().collect()),
                lhs,
                rhs,
            });
        }
    };
    for k in 2..=top {
        if chain.space().is_euclidean() {
            let r = principal_angle_ratio(chain, k, last)?;
            record(k, &r.witness, 1.0, r.value);
        } else {
            let span = &chain.staircase()[k - 1..last];
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed ^ 0x5EED, k, last));
            for _ in 0..samples {
                let mut q = DVector::zeros(chain.space().dim());
                for v in span {
                    let b: f64 = rng.sample(StandardNormal);
                    q.axpy(b, v, 1.0);
                }
                let lhs = chain.space().norm_unchecked(q.as_slice());
                if lhs == 0.0 {
                    continue;
                }
                let rho = distance::distance_with(chain.space(), &q, chain.subspace(k), &opts.descent)?.value;
                record(k, &q, lhs, rho);
            }
        }
    }
    Ok(ConditionReport::new(ConditionKind::SpanRatio, failures, margin))
}
