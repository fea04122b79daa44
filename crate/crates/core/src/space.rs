//! Finite-dimensional normed spaces, subspaces and strictly nested chains.
//!
//! A [`SubspaceChain`] carries subspaces `Y_1 ⊂ … ⊂ Y_N` together with a
//! staircase `q_1, q_2, …` where `q_k ∈ Y_{k+1} \ Y_k` for `k < N`. The chain
//! may additionally hold a closing element `q_N ∉ Y_N`; without it nothing in
//! the span of the staircase can sit at positive distance from `Y_N`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::distance;
use crate::error::{Error, Result};

/// Absolute residual (scaled by `max(1, ‖v‖)`) below which a vector counts as
/// lying in a subspace.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// Exponent of a weighted p-norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Norm {
    L1,
    L2,
    LInf,
    /// `1 < p < ∞`, `p != 2`.
    Lp(f64),
}

impl Norm {
    pub fn from_p(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidSpace(format!("p must lie in [1, inf], got {p}")));
        }
        Ok(if p == 1.0 {
            Norm::L1
        } else if p == 2.0 {
            Norm::L2
        } else if p.is_infinite() {
            Norm::LInf
        } else {
            Norm::Lp(p)
        })
    }

    pub fn p(self) -> f64 {
        match self {
            Norm::L1 => 1.0,
            Norm::L2 => 2.0,
            Norm::LInf => f64::INFINITY,
            Norm::Lp(p) => p,
        }
    }

    /// Unweighted p-norm of a slice.
    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => v.iter().map(|x| x.abs()).sum(),
            Norm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::LInf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            Norm::Lp(p) => {
                // scale by the max entry so large p does not overflow
                let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                if scale == 0.0 {
                    return 0.0;
                }
                scale * v.iter().map(|x| (x.abs() / scale).powf(p)).sum::<f64>().powf(1.0 / p)
            }
        }
    }
}

impl Serialize for Norm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Norm::LInf => s.serialize_str("inf"),
            other => s.serialize_f64(other.p()),
        }
    }
}

impl<'de> Deserialize<'de> for Norm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let p = match Raw::deserialize(d)? {
            Raw::Num(p) => p,
            Raw::Str(s) if s.eq_ignore_ascii_case("inf") => f64::INFINITY,
            Raw::Str(s) => return Err(serde::de::Error::custom(format!("unknown norm `{s}`"))),
        };
        Norm::from_p(p).map_err(serde::de::Error::custom)
    }
}

/// `R^dim` with the norm `v ↦ ‖W v‖_p`, `W = diag(weights)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormedSpace {
    dim: usize,
    #[serde(rename = "p")]
    norm: Norm,
    weights: Option<Vec<f64>>,
}

impl NormedSpace {
    pub fn new(dim: usize, norm: Norm, weights: Option<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpace("dimension must be positive".into()));
        }
        if let Some(w) = &weights {
            if w.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: w.len(),
                });
            }
            if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return Err(Error::InvalidSpace(format!("weights must be positive, got {bad}")));
            }
        }
        Ok(Self { dim, norm, weights })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(dim, Norm::L2, None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn is_euclidean(&self) -> bool {
        self.norm == Norm::L2
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<()> {
        if len == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: len,
            })
        }
    }

    /// Applies `W`, i.e. maps into the coordinates where the norm is a plain p-norm.
    pub fn weigh(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.weights {
            Some(w) => DVector::from_iterator(v.len(), v.iter().zip(w).map(|(x, w)| x * w)),
            None => v.clone(),
        }
    }

    pub fn unweigh(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.weights {
            Some(w) => DVector::from_iterator(v.len(), v.iter().zip(w).map(|(x, w)| x / w)),
            None => v.clone(),
        }
    }

    /// Weighted norm, assuming the length was already checked.
    pub(crate) fn norm_unchecked(&self, v: &[f64]) -> f64 {
        match &self.weights {
            None => self.norm.eval(v),
            Some(w) => {
                let scaled: Vec<f64> = v.iter().zip(w).map(|(x, w)| x * w).collect();
                self.norm.eval(&scaled)
            }
        }
    }
}

/// Weighted p-norm of `v`.
pub fn norm_of(space: &NormedSpace, v: &DVector<f64>) -> Result<f64> {
    space.check_dim(v.len())?;
    Ok(space.norm_unchecked(v.as_slice()))
}

/// Linear span of an ordered list of linearly independent vectors, with a
/// cached Euclidean-orthonormal basis.
#[derive(Clone, Debug)]
pub struct Subspace {
    basis: Vec<DVector<f64>>,
    orthonormal: DMatrix<f64>,
}

impl Subspace {
    pub fn new(basis: Vec<DVector<f64>>) -> Result<Self> {
        let Some(first) = basis.first() else {
            return Err(Error::RankDeficientBasis { rank: 0, count: 0 });
        };
        let n = first.len();
        if let Some(bad) = basis.iter().find(|b| b.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: bad.len(),
            });
        }
        if basis.iter().flat_map(|b| b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpace("basis entries must be finite".into()));
        }
        let (q, rank) = orthonormalize(&basis);
        if rank != basis.len() {
            return Err(Error::RankDeficientBasis {
                rank,
                count: basis.len(),
            });
        }
        Ok(Self {
            basis,
            orthonormal: q,
        })
    }

    /// Span of the first `k` coordinate directions of `R^n`.
    pub fn coordinate(n: usize, k: usize) -> Result<Self> {
        Self::new((0..k).map(|i| unit(n, i)).collect())
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.orthonormal.nrows()
    }

    pub fn basis(&self) -> &[DVector<f64>] {
        &self.basis
    }

    pub fn basis_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.basis)
    }

    /// Orthonormal columns spanning the same set as the basis.
    pub fn orthonormal(&self) -> &DMatrix<f64> {
        &self.orthonormal
    }

    /// Euclidean orthogonal projection; applied twice to clean up rounding.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let q = &self.orthonormal;
        let y = q * (q.transpose() * x);
        let r = x - &y;
        y + q * (q.transpose() * r)
    }

    /// Euclidean component of `x` orthogonal to the subspace.
    pub fn complement(&self, x: &DVector<f64>) -> DVector<f64> {
        x - self.project(x)
    }

    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        self.complement(x).norm()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.residual(x) <= MEMBERSHIP_TOL * x.norm().max(1.0)
    }

    /// Largest Euclidean residual of `other`'s basis vectors from `self`.
    pub fn containment_residual(&self, other: &Subspace) -> f64 {
        other.basis.iter().map(|b| self.residual(b)).fold(0.0, f64::max)
    }

    pub fn contains_subspace(&self, other: &Subspace) -> bool {
        other.basis.iter().all(|b| self.contains(b))
    }

    /// Maps every basis vector through `f`.
    pub fn map(&self, f: impl Fn(&DVector<f64>) -> DVector<f64>) -> Result<Self> {
        Self::new(self.basis.iter().map(f).collect())
    }
}

/// Modified Gram–Schmidt with one re-orthogonalization pass. Returns the
/// orthonormal columns and the number of independent input vectors.
fn orthonormalize(vectors: &[DVector<f64>]) -> (DMatrix<f64>, usize) {
    let n = vectors.first().map_or(0, |v| v.len());
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let scale = v.norm();
        if scale == 0.0 {
            continue;
        }
        let mut w = v / scale;
        for _ in 0..2 {
            for q in &cols {
                let t = q.dot(&w);
                w.axpy(-t, q, 1.0);
            }
        }
        let r = w.norm();
        if r > 1e-10 {
            cols.push(w / r);
        }
    }
    let rank = cols.len();
    let q = if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    (q, rank)
}

pub(crate) fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

/// Strictly nested subspaces with their staircase vectors.
#[derive(Clone, Debug)]
pub struct SubspaceChain {
    space: NormedSpace,
    subspaces: Vec<Subspace>,
    staircase: Vec<DVector<f64>>,
}

impl SubspaceChain {
    /// Assembles a chain without checking any invariant; see [`validate_chain`].
    pub fn new_unchecked(
        space: NormedSpace,
        subspaces: Vec<Subspace>,
        staircase: Vec<DVector<f64>>,
    ) -> Self {
        Self {
            space,
            subspaces,
            staircase,
        }
    }

    pub fn space(&self) -> &NormedSpace {
        &self.space
    }

    /// Number of subspaces `N`.
    pub fn horizon(&self) -> usize {
        self.subspaces.len()
    }

    pub fn subspaces(&self) -> &[Subspace] {
        &self.subspaces
    }

    /// `Y_k`, 1-based.
    pub fn subspace(&self, k: usize) -> &Subspace {
        &self.subspaces[k - 1]
    }

    /// `q_1, …`, either `N - 1` interior vectors or those plus the closing `q_N`.
    pub fn staircase(&self) -> &[DVector<f64>] {
        &self.staircase
    }

    /// `q_k`, 1-based.
    pub fn q(&self, k: usize) -> &DVector<f64> {
        &self.staircase[k - 1]
    }

    pub fn closing(&self) -> Option<&DVector<f64>> {
        (self.staircase.len() == self.horizon()).then(|| &self.staircase[self.horizon() - 1])
    }

    /// Same chain with every basis and staircase vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Ok(Self {
            space: self.space.clone(),
            subspaces: self
                .subspaces
                .iter()
                .map(|s| s.map(|b| b * factor))
                .collect::<Result<_>>()?,
            staircase: self.staircase.iter().map(|q| q * factor).collect(),
        })
    }

    /// The chain expressed in weighted coordinates, where the norm is unweighted.
    pub(crate) fn weighted_image(&self) -> Result<Self> {
        if self.space.weights().is_none() {
            return Ok(self.clone());
        }
        let space = NormedSpace::new(self.space.dim(), self.space.norm(), None)?;
        Ok(Self {
            subspaces: self
                .subspaces
                .iter()
                .map(|s| s.map(|b| self.space.weigh(b)))
                .collect::<Result<_>>()?,
            staircase: self.staircase.iter().map(|q| self.space.weigh(q)).collect(),
            space,
        })
    }
}

/// `Y_k = span(e_1..e_k)` for `k = 1..=horizon`, `q_k = e_{k+1}` including the
/// closing vector `q_N = e_{N+1}`.
pub fn make_coordinate_chain(space: &NormedSpace, horizon: usize) -> Result<SubspaceChain> {
    if horizon == 0 {
        return Err(Error::EmptyChain);
    }
    if horizon >= space.dim() {
        return Err(Error::HorizonTooLarge {
            horizon,
            dim: space.dim(),
        });
    }
    let n = space.dim();
    let subspaces = (1..=horizon)
        .map(|k| Subspace::coordinate(n, k))
        .collect::<Result<_>>()?;
    let staircase = (1..=horizon).map(|k| unit(n, k)).collect();
    Ok(SubspaceChain::new_unchecked(space.clone(), subspaces, staircase))
}

/// Builds and validates a chain from explicit bases.
///
/// Without a staircase, `q_k` is the normalized Euclidean component, outside
/// `Y_k`, of the basis vector of `Y_{k+1}` that sticks out the most; the
/// closing `q_N` is built the same way from the coordinate directions when
/// `Y_N` is a proper subspace.
pub fn make_chain_from_bases(
    space: &NormedSpace,
    bases: Vec<Vec<DVector<f64>>>,
    staircase: Option<Vec<DVector<f64>>>,
) -> Result<SubspaceChain> {
    if bases.is_empty() {
        return Err(Error::EmptyChain);
    }
    let mut subspaces = Vec::with_capacity(bases.len());
    for basis in bases {
        for b in &basis {
            space.check_dim(b.len())?;
        }
        subspaces.push(Subspace::new(basis)?);
    }
    // structural checks first so synthesis only sees a nested chain
    for k in 1..subspaces.len() {
        let (lo, hi) = (&subspaces[k - 1], &subspaces[k]);
        if !hi.contains_subspace(lo) {
            return Err(Error::NotNested {
                k,
                residual: hi.containment_residual(lo),
            });
        }
        if hi.dim() <= lo.dim() {
            return Err(Error::NotStrict { k });
        }
    }
    let staircase = match staircase {
        Some(q) => {
            for v in &q {
                space.check_dim(v.len())?;
            }
            q
        }
        None => synthesize_staircase(space.dim(), &subspaces),
    };
    let n = subspaces.len();
    if staircase.len() + 1 != n && staircase.len() != n {
        return Err(Error::BadStaircase {
            k: staircase.len().min(n),
            reason: format!("expected {} or {} vectors, got {}", n - 1, n, staircase.len()),
        });
    }
    let chain = SubspaceChain::new_unchecked(space.clone(), subspaces, staircase);
    let report = validate_chain(&chain);
    if let Some(defect) = report.first_defect() {
        return Err(defect);
    }
    Ok(chain)
}

fn synthesize_staircase(n: usize, subspaces: &[Subspace]) -> Vec<DVector<f64>> {
    let outermost = |y: &Subspace, candidates: &mut dyn Iterator<Item = DVector<f64>>| {
        let mut best: Option<DVector<f64>> = None;
        for v in candidates {
            let r = y.complement(&v);
            if best.as_ref().is_none_or(|b| r.norm() > b.norm() + 1e-12) {
                best = Some(r);
            }
        }
        best.map(|r| r.normalize())
    };
    let mut q: Vec<DVector<f64>> = subspaces
        .windows(2)
        .filter_map(|w| outermost(&w[0], &mut w[1].basis().iter().cloned()))
        .collect();
    let last = subspaces.last().expect("non-empty chain");
    if last.dim() < n {
        if let Some(closing) = outermost(last, &mut (0..n).map(|i| unit(n, i))) {
            q.push(closing);
        }
    }
    q
}

/// A single structural defect found by [`validate_chain`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChainDefect {
    NotNested { k: usize, residual: f64 },
    NotStrict { k: usize, margin: f64 },
    BadStaircase { k: usize, residual: f64, distance: f64 },
    DimensionMismatch { k: usize },
}

impl From<ChainDefect> for Error {
    fn from(d: ChainDefect) -> Self {
        match d {
            ChainDefect::NotNested { k, residual } => Error::NotNested { k, residual },
            ChainDefect::NotStrict { k, .. } => Error::NotStrict { k },
            ChainDefect::BadStaircase {
                k,
                residual,
                distance,
            } => Error::BadStaircase {
                k,
                reason: format!("membership residual {residual:.3e}, distance from Y_{k} {distance:.3e}"),
            },
            ChainDefect::DimensionMismatch { .. } => Error::MismatchedInputs(
                "chain vectors do not match the ambient dimension".into(),
            ),
        }
    }
}

/// Per-level measurements; `nesting_residual` and `strictness_margin` refer to
/// the step `Y_k → Y_{k+1}` and are absent at the last level.
#[derive(Clone, Debug, Serialize)]
pub struct LevelCheck {
    pub k: usize,
    pub nesting_residual: Option<f64>,
    pub strictness_margin: Option<f64>,
    /// Residual of `q_k` from `Y_{k+1}` (absent for the closing vector).
    pub staircase_residual: Option<f64>,
    /// `ρ(q_k, Y_k)` in the chain's norm.
    pub staircase_distance: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainValidation {
    pub levels: Vec<LevelCheck>,
    pub defects: Vec<ChainDefect>,
    pub pass: bool,
}

impl ChainValidation {
    pub fn first_defect(&self) -> Option<Error> {
        self.defects.first().cloned().map(Error::from)
    }
}

pub fn validate_chain(chain: &SubspaceChain) -> ChainValidation {
    let n = chain.horizon();
    let dim = chain.space().dim();
    let mut levels = Vec::with_capacity(n);
    let mut defects = Vec::new();
    for k in 1..=n {
        let y = chain.subspace(k);
        if y.ambient_dim() != dim {
            defects.push(ChainDefect::DimensionMismatch { k });
            continue;
        }
        let mut level = LevelCheck {
            k,
            nesting_residual: None,
            strictness_margin: None,
            staircase_residual: None,
            staircase_distance: None,
        };
        if k < n {
            let next = chain.subspace(k + 1);
            let residual = next.containment_residual(y);
            let scale = y.basis().iter().map(|b| b.norm()).fold(1.0, f64::max);
            level.nesting_residual = Some(residual);
            if residual > MEMBERSHIP_TOL * scale {
                defects.push(ChainDefect::NotNested { k, residual });
            }
            let margin = y.containment_residual(next);
            let next_scale = next.basis().iter().map(|b| b.norm()).fold(1.0, f64::max);
            level.strictness_margin = Some(margin);
            if margin <= MEMBERSHIP_TOL * next_scale || next.dim() <= y.dim() {
                defects.push(ChainDefect::NotStrict { k, margin });
            }
        }
        if let Some(q) = chain.staircase().get(k - 1) {
            if q.len() != dim {
                defects.push(ChainDefect::DimensionMismatch { k });
                levels.push(level);
                continue;
            }
            let scale = q.norm().max(1.0);
            let residual = (k < n).then(|| chain.subspace(k + 1).residual(q));
            let dist = distance::distance(chain.space(), q, y)
                .map(|r| r.value)
                .unwrap_or(0.0);
            level.staircase_residual = residual;
            level.staircase_distance = Some(dist);
            let outside = residual.is_some_and(|r| r > MEMBERSHIP_TOL * scale);
            if outside || dist <= MEMBERSHIP_TOL * scale {
                defects.push(ChainDefect::BadStaircase {
                    k,
                    residual: residual.unwrap_or(0.0),
                    distance: dist,
                });
            }
        } else if k < n {
            defects.push(ChainDefect::BadStaircase {
                k,
                residual: f64::NAN,
                distance: 0.0,
            });
        }
        levels.push(level);
    }
    if chain.staircase().len() > n {
        defects.push(ChainDefect::BadStaircase {
            k: n + 1,
            residual: f64::NAN,
            distance: 0.0,
        });
    }
    ChainValidation {
        pass: defects.is_empty(),
        levels,
        defects,
    }
}

/// Prescribed approximation errors `d_1 ≥ … ≥ d_N ≥ 0` and a scale `c ∈ (0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSequence {
    values: Vec<f64>,
    c: f64,
}

impl ErrorSequence {
    pub fn new(values: Vec<f64>, c: f64) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidSequence(format!("c must lie in (0, 1], got {c}")));
        }
        if let Some(bad) = values.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::InvalidSequence(format!(
                "values must be finite and non-negative, got {bad}"
            )));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::NotNonIncreasing { index: i + 2 });
        }
        Ok(Self { values, c })
    }

    pub fn unscaled(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 1.0)
    }

    /// `d_n = ratio^n` for `n = 1..=len`.
    pub fn geometric(ratio: f64, len: usize, c: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidSequence(format!("ratio must lie in (0, 1], got {ratio}")));
        }
        Self::new((1..=len).map(|n| ratio.powi(n as i32)).collect(), c)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `d_n`, 1-based.
    pub fn d(&self, n: usize) -> f64 {
        self.values[n - 1]
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn is_positive(&self) -> bool {
        self.values.iter().all(|d| *d > 0.0)
    }

    pub fn with_c(&self, c: f64) -> Result<Self> {
        Self::new(self.values.clone(), c)
    }
}

/// JSON form of a chain: `{"dim", "p", "weights", "bases", "staircase"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainDocument {
    pub dim: usize,
    pub p: Norm,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    pub bases: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub staircase: Option<Vec<Vec<f64>>>,
}

impl ChainDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn into_chain(self) -> Result<SubspaceChain> {
        let space = NormedSpace::new(self.dim, self.p, self.weights)?;
        let to_vec = |v: Vec<f64>| DVector::from_vec(v);
        let bases = self
            .bases
            .into_iter()
            .map(|b| b.into_iter().map(to_vec).collect())
            .collect();
        let staircase = self
            .staircase
            .map(|q| q.into_iter().map(to_vec).collect());
        make_chain_from_bases(&space, bases, staircase)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn norm_examples() {
        let e2 = NormedSpace::euclidean(3).unwrap();
        assert_eq!(norm_of(&e2, &dvector![3.0, 4.0, 0.0]).unwrap(), 5.0);
        let inf = NormedSpace::new(3, Norm::LInf, None).unwrap();
        assert_eq!(norm_of(&inf, &dvector![1.0, -7.0, 2.0]).unwrap(), 7.0);
        let w1 = NormedSpace::new(2, Norm::L1, Some(vec![2.0, 1.0])).unwrap();
        assert_eq!(norm_of(&w1, &dvector![1.0, 1.0]).unwrap(), 3.0);
    }

    #[test]
    fn norm_rejects_wrong_length() {
        let e2 = NormedSpace::euclidean(3).unwrap();
        assert!(matches!(
            norm_of(&e2, &dvector![1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, actual: 2 })
        ));
    }

    #[test]
    fn general_p_norm_matches_definition() {
        let s = NormedSpace::new(2, Norm::Lp(3.0), None).unwrap();
        let v = norm_of(&s, &dvector![1.0, 2.0]).unwrap();
        assert!((v - 9f64.powf(1.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn invalid_spaces() {
        assert!(NormedSpace::new(0, Norm::L2, None).is_err());
        assert!(NormedSpace::new(2, Norm::L2, Some(vec![1.0, 0.0])).is_err());
        assert!(NormedSpace::new(2, Norm::L2, Some(vec![1.0])).is_err());
        assert!(Norm::from_p(0.5).is_err());
    }

    #[test]
    fn norm_serde_accepts_inf() {
        let n: Norm = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(n, Norm::LInf);
        let n: Norm = serde_json::from_str("1.5").unwrap();
        assert_eq!(n, Norm::Lp(1.5));
        assert_eq!(serde_json::to_string(&Norm::LInf).unwrap(), "\"inf\"");
    }

    #[test]
    fn coordinate_chain_shape() {
        let s = NormedSpace::euclidean(4).unwrap();
        let chain = make_coordinate_chain(&s, 3).unwrap();
        for k in 1..=3 {
            assert_eq!(chain.subspace(k).dim(), k);
            assert_eq!(chain.q(k), &unit(4, k));
        }
        assert!(chain.closing().is_some());
        assert!(validate_chain(&chain).pass);
    }

    #[test]
    fn coordinate_chain_horizon_guard() {
        let s = NormedSpace::euclidean(2).unwrap();
        assert!(matches!(
            make_coordinate_chain(&s, 2),
            Err(Error::HorizonTooLarge { horizon: 2, dim: 2 })
        ));
        let big = NormedSpace::euclidean(10).unwrap();
        assert!(validate_chain(&make_coordinate_chain(&big, 3).unwrap()).pass);
    }

    #[test]
    fn synthesized_staircase_is_orthogonal_complement() {
        let s = NormedSpace::euclidean(3).unwrap();
        let chain = make_chain_from_bases(
            &s,
            vec![
                vec![dvector![1.0, 0.0, 0.0]],
                vec![dvector![1.0, 0.0, 0.0], dvector![1.0, 1.0, 0.0]],
            ],
            None,
        )
        .unwrap();
        assert!((chain.q(1) - dvector![0.0, 1.0, 0.0]).norm() < 1e-14);
        // closing vector leaves Y_2
        assert!((chain.q(2) - dvector![0.0, 0.0, 1.0]).norm() < 1e-14);
    }

    #[test]
    fn same_span_is_not_strict() {
        let s = NormedSpace::euclidean(2).unwrap();
        let err = make_chain_from_bases(
            &s,
            vec![vec![dvector![1.0, 0.0]], vec![dvector![2.0, 0.0]]],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotStrict { k: 1 }));
    }

    #[test]
    fn incomparable_spans_are_not_nested() {
        let s = NormedSpace::euclidean(2).unwrap();
        let err = make_chain_from_bases(
            &s,
            vec![vec![dvector![0.0, 1.0]], vec![dvector![1.0, 0.0]]],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotNested { k: 1, .. }));
    }

    #[test]
    fn supplied_staircase_is_checked() {
        let s = NormedSpace::euclidean(3).unwrap();
        let bases = vec![
            vec![dvector![1.0, 0.0, 0.0]],
            vec![dvector![1.0, 0.0, 0.0], dvector![0.0, 1.0, 0.0]],
        ];
        // q_1 outside Y_2
        let err = make_chain_from_bases(&s, bases.clone(), Some(vec![dvector![0.0, 0.0, 1.0]]))
            .unwrap_err();
        assert!(matches!(err, Error::BadStaircase { k: 1, .. }));
        // q_1 inside Y_1
        let err = make_chain_from_bases(&s, bases, Some(vec![dvector![3.0, 0.0, 0.0]])).unwrap_err();
        assert!(matches!(err, Error::BadStaircase { k: 1, .. }));
    }

    #[test]
    fn duplicated_subspace_flags_strictness() {
        let s = NormedSpace::euclidean(3).unwrap();
        let y1 = Subspace::coordinate(3, 1).unwrap();
        let chain = SubspaceChain::new_unchecked(
            s,
            vec![y1.clone(), y1],
            vec![unit(3, 1)],
        );
        let report = validate_chain(&chain);
        assert!(!report.pass);
        assert!(report
            .defects
            .iter()
            .any(|d| matches!(d, ChainDefect::NotStrict { k: 1, .. })));
    }

    #[test]
    fn staircase_inside_previous_level_reports_zero_distance() {
        let s = NormedSpace::new(3, Norm::LInf, None).unwrap();
        let chain = SubspaceChain::new_unchecked(
            s,
            vec![
                Subspace::coordinate(3, 1).unwrap(),
                Subspace::coordinate(3, 2).unwrap(),
            ],
            vec![unit(3, 0)],
        );
        let report = validate_chain(&chain);
        let defect = report
            .defects
            .iter()
            .find_map(|d| match d {
                ChainDefect::BadStaircase { k: 1, distance, .. } => Some(*distance),
                _ => None,
            })
            .expect("bad staircase flagged");
        assert!(defect.abs() < 1e-12);
    }

    #[test]
    fn error_sequence_validation() {
        assert!(ErrorSequence::new(vec![1.0, 0.5, 0.5, 0.0], 1.0).is_ok());
        assert!(matches!(
            ErrorSequence::new(vec![1.0, 2.0], 1.0),
            Err(Error::NotNonIncreasing { index: 2 })
        ));
        assert!(ErrorSequence::new(vec![1.0], 0.0).is_err());
        assert!(ErrorSequence::new(vec![1.0], 1.5).is_err());
        assert!(ErrorSequence::new(vec![-1.0], 1.0).is_err());
    }

    #[test]
    fn chain_document_roundtrip() {
        let text = r#"{"dim": 3, "p": "inf", "weights": null,
            "bases": [[[1,0,0]], [[1,0,0],[1,1,0]]], "staircase": null}"#;
        let chain = ChainDocument::from_json(text).unwrap().into_chain().unwrap();
        assert_eq!(chain.horizon(), 2);
        assert_eq!(chain.space().norm(), Norm::LInf);
    }

    #[test]
    fn rank_deficient_basis_rejected() {
        let err = Subspace::new(vec![dvector![1.0, 1.0], dvector![2.0, 2.0]]).unwrap_err();
        assert!(matches!(err, Error::RankDeficientBasis { rank: 1, count: 2 }));
    }
}
