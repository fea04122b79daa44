//! Elements with prescribed distances to a Euclidean chain.
//!
//! For targets `e_1 ≥ … ≥ e_J` on `Y_{z_1} ⊂ … ⊂ Y_{z_J}` the staircase is
//! split into groups `[z_j, z_{j+1})`. Only coefficients with `k ≥ z_j` move
//! `ρ(x, Y_{z_j})`, so the system is triangular and is solved from the last
//! group backwards: a least-squares fit of the group against the fixed tail
//! leaves a residual orthogonal to every group direction, and the anchor
//! coefficient then lifts `ρ` from that minimum to `e_j` in closed form.
//! When each `q_k` adds exactly one dimension the minimum equals `e_{j+1}`
//! and the result is exact; otherwise damped sweeps try to close the gap.

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::distance::distance;
use crate::error::{Error, Result};
use crate::space::{make_coordinate_chain, ErrorSequence, NormedSpace, SubspaceChain};

const SOLVE_RTOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 500;
const STAGNATION_SWEEPS: usize = 50;
const DAMPING: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessMethod {
    /// Closed form on a coordinate chain.
    TelescopingExact,
    /// Group back-substitution met every target.
    BackSubstitution,
    /// Back-substitution followed by damped sweeps.
    DampedIteration,
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    /// `c_k` on the staircase vectors `q_k`.
    pub coefficients: Vec<f64>,
    /// `x = Σ c_k q_k`.
    #[serde(serialize_with = "ser_dvector")]
    pub vector: DVector<f64>,
    /// `(z_j, e_j)`.
    pub targets: Vec<(usize, f64)>,
    /// `ρ(x, Y_{z_j})`.
    pub achieved: Vec<f64>,
    /// `max |achieved − target|`.
    pub residual: f64,
    pub method: WitnessMethod,
    /// Relative target error below `1e-8`.
    pub converged: bool,
}

fn ser_dvector<S: Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

impl Witness {
    /// Same witness with the vector shifted by `delta`; achieved values are
    /// recomputed on `chain`.
    pub fn perturbed(&self, chain: &SubspaceChain, delta: &DVector<f64>) -> Result<Self> {
        chain.space().check_dim(delta.len())?;
        let vector = &self.vector + delta;
        let achieved = self
            .targets
            .iter()
            .map(|&(z, _)| Ok(distance(chain.space(), &vector, chain.subspace(z))?.value))
            .collect::<Result<Vec<_>>>()?;
        let residual = max_abs_error(&achieved, &self.targets);
        Ok(Self {
            vector,
            achieved,
            residual,
            ..self.clone()
        })
    }
}

fn max_abs_error(achieved: &[f64], targets: &[(usize, f64)]) -> f64 {
    achieved
        .iter()
        .zip(targets)
        .map(|(a, (_, e))| (a - e).abs())
        .fold(0.0, f64::max)
}

/// Witness on the coordinate chain of `R^dim`: `c_k = c·sqrt(d_k² − d_{k+1}²)`
/// with `d_{N+1} = 0`, so that `ρ(x, Y_k) = c·d_k`.
pub fn witness_coordinate_exact(d: &ErrorSequence, c: f64, dim: usize) -> Result<Witness> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidSequence(format!("c must lie in (0, 1], got {c}")));
    }
    let space = NormedSpace::euclidean(dim)?;
    let chain = make_coordinate_chain(&space, d.len())?;
    let n = d.len();
    let mut coefficients = Vec::with_capacity(n);
    for k in 1..=n {
        let next = if k < n { d.d(k + 1) } else { 0.0 };
        let radicand = d.d(k) * d.d(k) - next * next;
        if radicand < 0.0 {
            return Err(Error::NotNonIncreasing { index: k + 1 });
        }
        coefficients.push(c * radicand.sqrt());
    }
    let vector = assemble(&chain, &coefficients);
    let targets: Vec<(usize, f64)> = (1..=n).map(|k| (k, c * d.d(k))).collect();
    let achieved = achieved_distances_of(&chain, &vector)?;
    Ok(Witness {
        residual: max_abs_error(&achieved, &targets),
        coefficients,
        vector,
        targets,
        achieved,
        method: WitnessMethod::TelescopingExact,
        converged: true,
    })
}

fn assemble(chain: &SubspaceChain, coefficients: &[f64]) -> DVector<f64> {
    let mut x = DVector::zeros(chain.space().dim());
    for (c, q) in coefficients.iter().zip(chain.staircase()) {
        x.axpy(*c, q, 1.0);
    }
    x
}

fn check_targets(chain: &SubspaceChain, targets: &[(usize, f64)]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::TargetsNotMonotonic("no targets".into()));
    }
    for (j, &(z, e)) in targets.iter().enumerate() {
        if z == 0 || z > chain.horizon() {
            return Err(Error::MismatchedInputs(format!(
                "target index {z} outside 1..={}",
                chain.horizon()
            )));
        }
        if !(e.is_finite() && e > 0.0) {
            return Err(Error::TargetsNotMonotonic(format!("e_{} = {e} is not positive", j + 1)));
        }
        if j > 0 {
            let (pz, pe) = targets[j - 1];
            if z <= pz {
                return Err(Error::TargetsNotMonotonic(format!(
                    "subspace indices must increase, got {pz} then {z}"
                )));
            }
            if e > pe {
                return Err(Error::TargetsNotMonotonic(format!(
                    "e_{} = {e} exceeds e_{} = {pe}",
                    j + 1,
                    j
                )));
            }
        }
    }
    Ok(())
}

/// Finds `x` in the staircase span with `ρ(x, Y_{z_j}) = e_j`.
///
/// Needs a Euclidean (possibly weighted) norm; the chain must carry a
/// staircase vector at or beyond the last target index.
pub fn witness_solve(chain: &SubspaceChain, targets: &[(usize, f64)]) -> Result<Witness> {
    if !chain.space().is_euclidean() {
        return Err(Error::InvalidSpace(
            "witness construction needs the Euclidean norm (p = 2)".into(),
        ));
    }
    check_targets(chain, targets)?;
    let frame = chain.weighted_image()?;
    let k_total = frame.staircase().len();
    let last_z = targets.last().expect("checked non-empty").0;
    if last_z > k_total {
        return Err(Error::MismatchedInputs(format!(
            "no staircase vector outside Y_{last_z}; supply the closing vector"
        )));
    }

    let mut coefficients = vec![0.0; k_total];
    back_substitute(&frame, targets, &mut coefficients);
    let mut method = WitnessMethod::BackSubstitution;
    let achieved = achieved_in_frame(&frame, targets, &coefficients);
    if relative_error(&achieved, targets) >= SOLVE_RTOL {
        method = WitnessMethod::DampedIteration;
        let (best, stalled) = refine(&frame, targets, coefficients);
        coefficients = best;
        if stalled {
            let witness = finish(chain, targets, coefficients, method)?;
            return Err(Error::NoProgress {
                residual: witness.residual,
                witness: Box::new(witness),
            });
        }
    }
    finish(chain, targets, coefficients, method)
}

fn finish(
    chain: &SubspaceChain,
    targets: &[(usize, f64)],
    coefficients: Vec<f64>,
    method: WitnessMethod,
) -> Result<Witness> {
    let vector = assemble(chain, &coefficients);
    let achieved = targets
        .iter()
        .map(|&(z, _)| Ok(distance(chain.space(), &vector, chain.subspace(z))?.value))
        .collect::<Result<Vec<_>>>()?;
    let converged = relative_error(&achieved, targets) < SOLVE_RTOL;
    Ok(Witness {
        residual: max_abs_error(&achieved, targets),
        coefficients,
        vector,
        targets: targets.to_vec(),
        achieved,
        method,
        converged,
    })
}

fn relative_error(achieved: &[f64], targets: &[(usize, f64)]) -> f64 {
    achieved
        .iter()
        .zip(targets)
        .map(|(a, (_, e))| (a - e).abs() / e)
        .fold(0.0, f64::max)
}

fn achieved_in_frame(frame: &SubspaceChain, targets: &[(usize, f64)], coefficients: &[f64]) -> Vec<f64> {
    let x = assemble(frame, coefficients);
    targets
        .iter()
        .map(|&(z, _)| frame.subspace(z).residual(&x))
        .collect()
}

fn back_substitute(frame: &SubspaceChain, targets: &[(usize, f64)], coefficients: &mut [f64]) {
    let k_total = frame.staircase().len();
    let dim = frame.space().dim();
    for j in (0..targets.len()).rev() {
        let (z, e) = targets[j];
        let end = targets.get(j + 1).map_or(k_total + 1, |t| t.0);
        let y = frame.subspace(z);
        let mut tail = DVector::zeros(dim);
        for k in end..=k_total {
            tail.axpy(coefficients[k - 1], frame.q(k), 1.0);
        }
        let tail = y.complement(&tail);
        let group: Vec<DVector<f64>> = (z..end).map(|k| y.complement(frame.q(k))).collect();
        let g = DMatrix::from_columns(&group);
        // least squares: min ‖g c + tail‖
        let svd = g.clone().svd(true, true);
        let best = svd
            .solve(&(-&tail), 1e-12 * g.norm().max(1.0))
            .unwrap_or_else(|_| DVector::zeros(group.len()));
        let residual = &g * &best + &tail;
        let floor = residual.norm();
        for (i, k) in (z..end).enumerate() {
            coefficients[k - 1] = best[i];
        }
        let lead = group[0].norm();
        if e > floor && lead > 0.0 {
            let lift = (e * e - floor * floor).sqrt() / lead;
            // the lead direction may have a component along the residual only
            // through rounding; pick the sign that does not cancel it
            let sign = if residual.dot(&group[0]) < 0.0 { -1.0 } else { 1.0 };
            coefficients[z - 1] += sign * lift;
        }
    }
}

/// Damped sweeps; returns the best coefficients and whether the loop gave up
/// on stagnation.
fn refine(frame: &SubspaceChain, targets: &[(usize, f64)], mut coefficients: Vec<f64>) -> (Vec<f64>, bool) {
    let k_total = frame.staircase().len();
    let mut best_err = relative_error(&achieved_in_frame(frame, targets, &coefficients), targets);
    let mut best = coefficients.clone();
    let mut stagnant = 0;
    for _ in 0..MAX_SWEEPS {
        for j in (0..targets.len()).rev() {
            let (z, e) = targets[j];
            let end = targets.get(j + 1).map_or(k_total + 1, |t| t.0);
            let now = achieved_in_frame(frame, &targets[j..=j], &coefficients)[0];
            if now > 0.0 {
                let factor = (e / now).powf(DAMPING);
                for c in &mut coefficients[z - 1..end - 1] {
                    *c *= factor;
                }
            } else {
                coefficients[z - 1] = e;
            }
        }
        let err = relative_error(&achieved_in_frame(frame, targets, &coefficients), targets);
        if err < best_err * (1.0 - 1e-3) {
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        if err < best_err {
            best_err = err;
            best = coefficients.clone();
        }
        if best_err < SOLVE_RTOL {
            return (best, false);
        }
        if stagnant >= STAGNATION_SWEEPS {
            return (best, true);
        }
    }
    (best, false)
}

fn achieved_distances_of(chain: &SubspaceChain, x: &DVector<f64>) -> Result<Vec<f64>> {
    chain
        .subspaces()
        .iter()
        .map(|y| Ok(distance(chain.space(), x, y)?.value))
        .collect()
}

/// `ρ(x, Y_n)` for every `n = 1..=N`.
pub fn achieved_distances(witness: &Witness, chain: &SubspaceChain) -> Result<Vec<f64>> {
    chain.space().check_dim(witness.vector.len())?;
    achieved_distances_of(chain, &witness.vector)
}
