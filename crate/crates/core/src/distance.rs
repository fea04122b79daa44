//! Best-approximation distance `ρ(x, Y) = inf_{y ∈ Y} ‖x − y‖`.
//!
//! `p = 2` is an orthogonal projection, `p ∈ {1, ∞}` a linear program solved by
//! [`crate::simplex`], and every other `p` a backtracking descent over the
//! coefficients of an orthonormal basis of `Y`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::simplex::{EqualityProgram, EqualityStatus, LinearProgram, LpStatus};
use crate::space::{Norm, NormedSpace, Subspace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Projection,
    Simplex,
    Descent,
    BruteForce,
}

#[derive(Clone, Debug)]
pub struct DistanceResult {
    pub value: f64,
    /// Best point of `Y` found.
    pub minimizer: DVector<f64>,
    pub method: Method,
    /// The value is the infimum (up to rounding), not merely an upper bound.
    pub certified: bool,
    /// False when the descent path hit its iteration cap.
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct DescentOptions {
    pub max_iters: usize,
    pub step_tol: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            step_tol: 1e-10,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

fn check(space: &NormedSpace, x: &DVector<f64>, y: &Subspace) -> Result<()> {
    space.check_dim(x.len())?;
    space.check_dim(y.ambient_dim())
}

/// Dispatches on the norm of `space`.
pub fn distance(space: &NormedSpace, x: &DVector<f64>, y: &Subspace) -> Result<DistanceResult> {
    distance_with(space, x, y, &DescentOptions::default())
}

pub fn distance_with(
    space: &NormedSpace,
    x: &DVector<f64>,
    y: &Subspace,
    opts: &DescentOptions,
) -> Result<DistanceResult> {
    check(space, x, y)?;
    match space.norm() {
        Norm::L2 => distance_euclidean(space, x, y),
        Norm::L1 | Norm::LInf => match distance_lp(space, x, y) {
            // the programs are always well posed, so these signal numerical breakdown
            Err(Error::SimplexCycleGuard(_) | Error::InvalidProgram(_)) => distance_descent(space, x, y, opts),
            other => other,
        },
        Norm::Lp(_) => distance_descent(space, x, y, opts),
    }
}

/// Orthogonal projection of `x` onto `Y` in the standard inner product.
pub fn project_euclidean(x: &DVector<f64>, y: &Subspace) -> Result<DVector<f64>> {
    if x.len() != y.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: y.ambient_dim(),
            actual: x.len(),
        });
    }
    Ok(y.project(x))
}

fn distance_euclidean(space: &NormedSpace, x: &DVector<f64>, y: &Subspace) -> Result<DistanceResult> {
    let minimizer = match space.weights() {
        None => y.project(x),
        Some(_) => {
            let wy = y.map(|b| space.weigh(b))?;
            space.unweigh(&wy.project(&space.weigh(x)))
        }
    };
    let value = space.norm_unchecked((x - &minimizer).as_slice());
    Ok(DistanceResult {
        value,
        minimizer,
        method: Method::Projection,
        certified: true,
        converged: true,
    })
}

/// `p ∈ {1, ∞}` by linear programming in the coefficients of an orthonormal
/// basis of the (weighted) subspace.
///
/// The sup norm goes through the dual `max uᵀw  s.t.  Mᵀw = 0, ‖w‖₁ ≤ 1`,
/// which has only `dim Y + 1` rows; the primal coefficients are its simplex
/// multipliers and the dual value certifies the result from below.
/// The `ℓ¹` norm uses the primal over split coefficients `α = α⁺ − α⁻`, with
/// the error bound variables written as their value at `α = 0` plus a free
/// shift so that every right-hand side stays non-negative.
pub fn distance_lp(space: &NormedSpace, x: &DVector<f64>, y: &Subspace) -> Result<DistanceResult> {
    check(space, x, y)?;
    let u = space.weigh(x);
    // an orthonormal basis keeps the programs well conditioned
    let wy = if space.weights().is_some() {
        y.map(|b| space.weigh(b))?
    } else {
        y.clone()
    };
    let m = wy.orthonormal();
    // Shifting by the projection and rescaling leaves the minimization
    // unchanged but makes every tolerance relative to the distance itself.
    let mut shift = m.transpose() * &u;
    let first = &u - m * &shift;
    let correction = m.transpose() * &first;
    shift += &correction;
    let residual = &u - m * &shift;
    let scale = residual.amax();
    let rounding = ROUNDING_ULPS * f64::EPSILON * u.amax();
    if scale <= rounding {
        // x lies in Y up to rounding; the projection is as good as it gets
        let minimizer = space.unweigh(&(m * shift));
        return Ok(DistanceResult {
            value: space.norm_unchecked((x - &minimizer).as_slice()),
            minimizer,
            method: Method::Projection,
            certified: true,
            converged: true,
        });
    }
    let target = residual / scale;
    let (alpha, lower) = match space.norm() {
        Norm::LInf => sup_norm_dual(&target, m)?,
        Norm::L1 => (l1_primal(&target, m)?, None),
        other => {
            return Err(Error::InvalidProgram(format!(
                "LP path needs p in {{1, inf}}, got {}",
                other.p()
            )))
        }
    };
    let minimizer = space.unweigh(&(m * (shift + alpha * scale)));
    let value = space.norm_unchecked((x - &minimizer).as_slice());
    let certified = match lower {
        Some(lower) => value - lower * scale <= CERTIFY_TOL * value + rounding,
        None => true,
    };
    Ok(DistanceResult {
        value,
        minimizer,
        method: Method::Simplex,
        certified,
        converged: true,
    })
}

/// Relative gap allowed between the sup-norm value and its dual lower bound,
/// on top of a rounding floor of [`ROUNDING_ULPS`] ulps of `‖x‖`.
const CERTIFY_TOL: f64 = 1e-9;
const ROUNDING_ULPS: f64 = 64.0;

fn sup_norm_dual(u: &DVector<f64>, m: &DMatrix<f64>) -> Result<(DVector<f64>, Option<f64>)> {
    let (n, k) = m.shape();
    // columns w⁺_i then w⁻_i; rows Mᵀw = 0 then Σ(w⁺ + w⁻) = 1
    let mut a = DMatrix::zeros(k + 1, 2 * n);
    let mut c = DVector::zeros(2 * n);
    for i in 0..n {
        for j in 0..k {
            a[(j, i)] = m[(i, j)];
            a[(j, n + i)] = -m[(i, j)];
        }
        a[(k, i)] = 1.0;
        a[(k, n + i)] = 1.0;
        c[i] = u[i];
        c[n + i] = -u[i];
    }
    let mut b = DVector::zeros(k + 1);
    b[k] = 1.0;
    let sol = EqualityProgram::new(a, b, c)?.solve()?;
    if sol.status != EqualityStatus::Optimal {
        return Err(Error::InvalidProgram(format!("sup-norm dual ended {:?}", sol.status)));
    }
    Ok((sol.multipliers.rows(0, k).into_owned(), Some(sol.objective)))
}

fn l1_primal(u: &DVector<f64>, m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (n, k) = m.shape();
    // columns α⁺, α⁻, s⁺, s⁻ with the bound t_i = |u_i| − s⁺_i + s⁻_i
    let mut lp = LinearProgram::new(2 * n, 2 * k + 2 * n);
    for i in 0..n {
        for j in 0..k {
            lp.set(2 * i, j, -m[(i, j)]);
            lp.set(2 * i, k + j, m[(i, j)]);
            lp.set(2 * i + 1, j, m[(i, j)]);
            lp.set(2 * i + 1, k + j, -m[(i, j)]);
        }
        for row in [2 * i, 2 * i + 1] {
            lp.set(row, 2 * k + i, 1.0);
            lp.set(row, 2 * k + n + i, -1.0);
        }
        lp.b[2 * i] = (u[i].abs() - u[i]).max(0.0);
        lp.b[2 * i + 1] = (u[i].abs() + u[i]).max(0.0);
        lp.c[2 * k + i] = 1.0;
        lp.c[2 * k + n + i] = -1.0;
    }
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::InvalidProgram("distance LP reported unbounded".into()));
    }
    Ok(DVector::from_iterator(k, (0..k).map(|j| sol.z[j] - sol.z[k + j])))
}

/// (Sub)gradient of `β ↦ ‖r‖_p` with respect to the residual `r`.
fn norm_gradient(norm: Norm, r: &DVector<f64>, value: f64) -> DVector<f64> {
    match norm {
        Norm::L1 => r.map(|x| if x == 0.0 { 0.0 } else { x.signum() }),
        Norm::L2 => r / value,
        Norm::LInf => {
            let i = r.iamax();
            let mut g = DVector::zeros(r.len());
            g[i] = r[i].signum();
            g
        }
        Norm::Lp(p) => {
            let scale = r.amax();
            // ψ_i = sign(r_i) |r_i|^{p-1} / ‖r‖_p^{p-1}, evaluated relative to max|r|
            let ratio = value / scale;
            r.map(|x| x.signum() * ((x.abs() / scale) / ratio).powf(p - 1.0))
        }
    }
}

/// Backtracking descent in the coefficients of an orthonormal basis of the
/// weighted subspace, started at the Euclidean projection.
pub fn distance_descent(
    space: &NormedSpace,
    x: &DVector<f64>,
    y: &Subspace,
    opts: &DescentOptions,
) -> Result<DistanceResult> {
    check(space, x, y)?;
    let norm = space.norm();
    let u = space.weigh(x);
    let wy = if space.weights().is_some() {
        y.map(|b| space.weigh(b))?
    } else {
        y.clone()
    };
    let q = wy.orthonormal();
    let f = |beta: &DVector<f64>| norm.eval((&u - q * beta).as_slice());

    let mut beta = q.transpose() * &u;
    let mut value = f(&beta);
    let mut step = 1.0;
    let mut converged = false;
    for _ in 0..opts.max_iters {
        if value == 0.0 {
            converged = true;
            break;
        }
        let r = &u - q * &beta;
        let g = -(q.transpose() * norm_gradient(norm, &r, value));
        let gnorm2 = g.norm_squared();
        if gnorm2 == 0.0 {
            converged = true;
            break;
        }
        step *= 2.0;
        let mut accepted = None;
        while step * gnorm2.sqrt() >= opts.step_tol {
            let cand = &beta - &g * step;
            let fc = f(&cand);
            if fc <= value - opts.sufficient_decrease * step * gnorm2 {
                accepted = Some((cand, fc));
                break;
            }
            step *= opts.shrink;
        }
        match accepted {
            Some((cand, fc)) => {
                let moved = step * gnorm2.sqrt();
                beta = cand;
                value = fc;
                if moved < opts.step_tol {
                    converged = true;
                    break;
                }
            }
            None => {
                converged = true;
                break;
            }
        }
    }
    let minimizer = space.unweigh(&(q * &beta));
    let value = space.norm_unchecked((x - &minimizer).as_slice());
    Ok(DistanceResult {
        value,
        minimizer,
        method: Method::Descent,
        certified: false,
        converged,
    })
}

/// Grid minimum of `‖x − Σ α_j b_j‖` over `α ∈ [−box, box]^k` with the given
/// spacing. Always an upper bound on `ρ(x, Y)`.
pub fn brute_force_distance(
    space: &NormedSpace,
    x: &DVector<f64>,
    y: &Subspace,
    bound: f64,
    step: f64,
) -> Result<f64> {
    check(space, x, y)?;
    let k = y.dim();
    if k > 3 {
        return Err(Error::TooManyBasisVectors(k));
    }
    if !(bound > 0.0 && step > 0.0) {
        return Err(Error::InvalidProgram("box and step must be positive".into()));
    }
    let points = ((2.0 * bound) / step + 1e-9).floor() as usize + 1;
    let axis = |i: usize| -bound + i as f64 * step;
    let basis = y.basis();
    let mut best = f64::INFINITY;
    let mut buf = x.clone();
    let total = points.pow(k as u32);
    for flat in 0..total {
        buf.copy_from(x);
        let mut rest = flat;
        for b in basis {
            let a = axis(rest % points);
            rest /= points;
            buf.axpy(-a, b, 1.0);
        }
        best = best.min(space.norm_unchecked(buf.as_slice()));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn l1_optimum_may_exceed_projection_residual() {
        // projection residual (0.8, −0.4); the optimum (1, 0) is larger in the first entry
        let s = NormedSpace::new(2, Norm::L1, None).unwrap();
        let y = Subspace::new(vec![dvector![1.0, 2.0]]).unwrap();
        let r = distance(&s, &dvector![1.0, 0.0], &y).unwrap();
        assert_eq!(r.method, Method::Simplex);
        assert!((r.value - 1.0).abs() < 1e-12, "{}", r.value);
    }

    fn span(vs: Vec<DVector<f64>>) -> Subspace {
        Subspace::new(vs).unwrap()
    }

    #[test]
    fn orthogonal_direction() {
        let s = NormedSpace::euclidean(3).unwrap();
        let r = distance(&s, &dvector![0.0, 0.0, 1.0], &span(vec![dvector![1.0, 0.0, 0.0]])).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        assert_eq!(r.method, Method::Projection);
        assert!(r.certified);
    }

    #[test]
    fn diagonal_projection() {
        let s = NormedSpace::euclidean(2).unwrap();
        let y = span(vec![dvector![1.0, 1.0]]);
        let x = dvector![1.0, 0.0];
        let r = distance(&s, &x, &y).unwrap();
        assert!((r.value - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        let p = project_euclidean(&x, &y).unwrap();
        assert!((p - dvector![0.5, 0.5]).norm() < 1e-15);
        let grid = brute_force_distance(&s, &x, &y, 2.0, 1e-4).unwrap();
        assert!((grid - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4);
    }

    #[test]
    fn coordinate_projection_and_idempotence() {
        let y = Subspace::coordinate(3, 2).unwrap();
        let p = project_euclidean(&dvector![3.0, 4.0, 5.0], &y).unwrap();
        assert_eq!(p, dvector![3.0, 4.0, 0.0]);
        let inside = dvector![1.0, -2.0, 0.0];
        assert_eq!(project_euclidean(&inside, &y).unwrap(), inside);
        let r = project_euclidean(&dvector![1.0, 2.0, 3.0], &y).unwrap();
        let resid = dvector![1.0, 2.0, 3.0] - r;
        for b in y.basis() {
            assert!(b.dot(&resid).abs() <= 1e-9);
        }
    }

    #[test]
    fn sup_norm_examples() {
        let s = NormedSpace::new(3, Norm::LInf, None).unwrap();
        let r = distance(&s, &dvector![1.0, 1.0, 1.0], &span(vec![dvector![1.0, 0.0, 0.0]])).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert_eq!(r.method, Method::Simplex);

        let s2 = NormedSpace::new(2, Norm::LInf, None).unwrap();
        let y = span(vec![dvector![1.0, 1.0]]);
        let r = distance_lp(&s2, &dvector![2.0, 0.0], &y).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!((r.minimizer.clone() - dvector![1.0, 1.0]).norm() < 1e-12);

        let inside = distance_lp(&s2, &dvector![3.0, 3.0], &y).unwrap();
        assert!(inside.value.abs() < 1e-12);
    }

    #[test]
    fn l1_example() {
        let s = NormedSpace::new(2, Norm::L1, None).unwrap();
        let r = distance_lp(&s, &dvector![1.0, 1.0], &span(vec![dvector![1.0, 0.0]])).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_euclidean_distance() {
        // ‖(2a, b)‖ with Y = span{e1}: distance of (1, 1) is 1 regardless of the e1 weight
        let s = NormedSpace::new(2, Norm::L2, Some(vec![2.0, 3.0])).unwrap();
        let r = distance(&s, &dvector![1.0, 1.0], &span(vec![dvector![1.0, 0.0]])).unwrap();
        assert!((r.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn descent_matches_lp_for_nearby_p() {
        let y = span(vec![dvector![1.0, 2.0, 0.5], dvector![0.0, 1.0, -1.0]]);
        let x = dvector![1.0, -1.0, 2.0];
        let p3 = NormedSpace::new(3, Norm::Lp(3.0), None).unwrap();
        let r = distance(&p3, &x, &y).unwrap();
        assert_eq!(r.method, Method::Descent);
        assert!(!r.certified);
        assert!(r.converged);
        let grid = brute_force_distance(&p3, &x, &y, 4.0, 0.01).unwrap();
        assert!(r.value <= grid + 1e-9);
        assert!(grid - r.value < 0.05);
    }

    #[test]
    fn brute_force_guard_and_refinement() {
        let s = NormedSpace::euclidean(5).unwrap();
        let y = Subspace::coordinate(5, 4).unwrap();
        assert!(matches!(
            brute_force_distance(&s, &DVector::zeros(5), &y, 1.0, 0.1),
            Err(Error::TooManyBasisVectors(4))
        ));
        let s2 = NormedSpace::new(2, Norm::LInf, None).unwrap();
        let y = span(vec![dvector![1.0, 0.3]]);
        let x = dvector![0.7, -0.2];
        let coarse = brute_force_distance(&s2, &x, &y, 2.0, 0.1).unwrap();
        let fine = brute_force_distance(&s2, &x, &y, 2.0, 0.05).unwrap();
        assert!(fine <= coarse);
    }

    #[test]
    fn dimension_mismatch() {
        let s = NormedSpace::euclidean(3).unwrap();
        let y = Subspace::coordinate(3, 1).unwrap();
        assert!(matches!(
            distance(&s, &dvector![1.0, 2.0], &y),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
