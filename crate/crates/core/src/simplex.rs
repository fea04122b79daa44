//! Dense tableau simplex for `max cᵀz  s.t.  A z ≤ b, z ≥ 0` with `b ≥ 0`.
//!
//! The origin is always feasible in this form, so the slack basis starts a
//! single phase. Entering and leaving variables follow Bland's rule, which
//! cannot cycle.
//!
//! [`EqualityProgram`] covers `max cᵀz  s.t.  A z = b, z ≥ 0` for programs
//! with few rows and many columns. It is a two-phase revised simplex that
//! refactors the basis at every pivot, so no rounding drift accumulates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;
const REL_PIVOT_EPS: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct LinearProgram {
    /// Row-major constraint matrix, `rows × cols`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub z: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            a: vec![0.0; rows * cols],
            b: vec![0.0; rows],
            c: vec![0.0; cols],
            rows,
            cols,
        }
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.a[row * self.cols + col] = value;
    }

    /// `50 · (rows + cols)` pivots.
    pub fn default_pivot_cap(&self) -> usize {
        50 * (self.rows + self.cols)
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.solve_with_cap(self.default_pivot_cap())
    }

    pub fn solve_with_cap(&self, cap: usize) -> Result<LpSolution> {
        if self.a.len() != self.rows * self.cols || self.b.len() != self.rows || self.c.len() != self.cols {
            return Err(Error::InvalidProgram("inconsistent shapes".into()));
        }
        if let Some(bad) = self.b.iter().find(|b| b.is_nan() || **b < 0.0) {
            return Err(Error::InvalidProgram(format!(
                "right-hand side must be non-negative, got {bad}"
            )));
        }
        Tableau::new(self).run(cap)
    }
}

struct Tableau {
    m: usize,
    n: usize,
    width: usize,
    /// `m` constraint rows then the objective row; last column is the rhs.
    t: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn new(lp: &LinearProgram) -> Self {
        let (m, n) = (lp.rows, lp.cols);
        let width = n + m + 1;
        let mut t = vec![0.0; (m + 1) * width];
        for i in 0..m {
            let row = &mut t[i * width..(i + 1) * width];
            row[..n].copy_from_slice(&lp.a[i * n..(i + 1) * n]);
            row[n + i] = 1.0;
            row[width - 1] = lp.b[i];
        }
        let obj = &mut t[m * width..];
        for (o, c) in obj.iter_mut().zip(&lp.c) {
            *o = -c;
        }
        Self {
            m,
            n,
            width,
            t,
            basis: (n..n + m).collect(),
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn run(mut self, cap: usize) -> Result<LpSolution> {
        let mut pivots = 0;
        loop {
            let obj_row = self.m;
            let Some(enter) = (0..self.width - 1).find(|&j| self.at(obj_row, j) < -PIVOT_EPS) else {
                return Ok(self.solution(LpStatus::Optimal, pivots));
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, enter);
                if a > PIVOT_EPS {
                    let ratio = self.at(i, self.width - 1) / a;
                    let better = match leave {
                        None => true,
                        Some((r, best)) => {
                            ratio < best - 1e-15 * best.abs().max(1.0)
                                || (ratio <= best + 1e-15 * best.abs().max(1.0)
                                    && self.basis[i] < self.basis[r])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((row, _)) = leave else {
                return Ok(self.solution(LpStatus::Unbounded, pivots));
            };
            if pivots >= cap {
                return Err(Error::SimplexCycleGuard(cap));
            }
            self.pivot(row, enter);
            pivots += 1;
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.t[row * w + col];
        for j in 0..w {
            self.t[row * w + j] /= p;
        }
        self.t[row * w + col] = 1.0;
        let pivot_row: Vec<f64> = self.t[row * w..(row + 1) * w].to_vec();
        for i in 0..=self.m {
            if i == row {
                continue;
            }
            let f = self.t[i * w + col];
            if f == 0.0 {
                continue;
            }
            let target = &mut self.t[i * w..(i + 1) * w];
            for (x, p) in target.iter_mut().zip(&pivot_row) {
                *x -= f * p;
            }
            target[col] = 0.0;
        }
        self.basis[row] = col;
    }

    fn solution(&self, status: LpStatus, pivots: usize) -> LpSolution {
        let mut z = vec![0.0; self.n];
        for (i, &var) in self.basis.iter().enumerate() {
            if var < self.n {
                z[var] = self.at(i, self.width - 1);
            }
        }
        LpSolution {
            status,
            z,
            objective: self.at(self.m, self.width - 1),
            pivots,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EqualityStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct EqualitySolution {
    pub status: EqualityStatus,
    pub z: DVector<f64>,
    pub objective: f64,
    /// Simplex multipliers `y` with `Bᵀ y = c_B`; an optimal dual solution.
    pub multipliers: DVector<f64>,
    pub pivots: usize,
}

/// `max cᵀz  s.t.  A z = b, z ≥ 0`.
#[derive(Clone, Debug)]
pub struct EqualityProgram {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

struct Revised<'a> {
    /// `[A | I]` with rows flipped so that `b ≥ 0`.
    a: DMatrix<f64>,
    b: &'a DVector<f64>,
    cols: usize,
    basis: Vec<usize>,
    pivots: usize,
    cap: usize,
}

struct Basic {
    x: DVector<f64>,
    y: DVector<f64>,
}

impl Revised<'_> {
    fn is_artificial(&self, j: usize) -> bool {
        j >= self.cols
    }

    fn basic(&self, cost: &DVector<f64>) -> Result<(Basic, nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>)> {
        let m = self.a.nrows();
        let bmat = DMatrix::from_fn(m, m, |i, k| self.a[(i, self.basis[k])]);
        let lu = bmat.clone().lu();
        let x = lu
            .solve(self.b)
            .ok_or_else(|| Error::InvalidProgram("singular basis".into()))?;
        let cb = DVector::from_iterator(m, self.basis.iter().map(|&j| cost[j]));
        let y = bmat
            .transpose()
            .lu()
            .solve(&cb)
            .ok_or_else(|| Error::InvalidProgram("singular basis".into()))?;
        Ok((Basic { x, y }, lu))
    }

    /// Runs to optimality for `cost`; returns `false` on unboundedness.
    fn run(&mut self, cost: &DVector<f64>, artificials_enter: bool) -> Result<(bool, Basic)> {
        let tol = 1e-10 * (1.0 + cost.amax());
        let zero_tol = 1e-12 * (1.0 + self.b.amax());
        loop {
            let (basic, lu) = self.basic(cost)?;
            let enter = (0..self.a.ncols()).find(|&j| {
                (artificials_enter || !self.is_artificial(j))
                    && !self.basis.contains(&j)
                    && cost[j] - self.a.column(j).dot(&basic.y) > tol
            });
            let Some(enter) = enter else {
                return Ok((true, basic));
            };
            let d = lu
                .solve(&self.a.column(enter).clone_owned())
                .ok_or_else(|| Error::InvalidProgram("singular basis".into()))?;
            // relative threshold: tiny pivots make the next basis nearly singular
            let pivot_tol = REL_PIVOT_EPS * d.amax();
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..d.len() {
                let ratio = if !artificials_enter && self.is_artificial(self.basis[i]) && d[i].abs() > pivot_tol {
                    // an artificial stuck in the basis at level zero must leave first
                    0.0
                } else if d[i] > pivot_tol {
                    // degenerate levels must tie exactly for Bland's rule to work
                    if basic.x[i] <= zero_tol {
                        0.0
                    } else {
                        basic.x[i] / d[i]
                    }
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((r, best)) => {
                        let slack = 1e-12 * best.max(1e-300);
                        ratio < best - slack || (ratio <= best + slack && self.basis[i] < self.basis[r])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((row, _)) = leave else {
                return Ok((false, basic));
            };
            if self.pivots >= self.cap {
                return Err(Error::SimplexCycleGuard(self.cap));
            }
            self.basis[row] = enter;
            self.pivots += 1;
        }
    }
}

impl EqualityProgram {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() || a.ncols() != c.len() {
            return Err(Error::InvalidProgram("inconsistent shapes".into()));
        }
        Ok(Self { a, b, c })
    }

    /// `50 · (rows + cols)` pivots.
    pub fn default_pivot_cap(&self) -> usize {
        50 * (self.a.nrows() + self.a.ncols())
    }

    pub fn solve(&self) -> Result<EqualitySolution> {
        self.solve_with_cap(self.default_pivot_cap())
    }

    pub fn solve_with_cap(&self, cap: usize) -> Result<EqualitySolution> {
        let (m, n) = self.a.shape();
        let signs: Vec<f64> = self.b.iter().map(|v| if *v < 0.0 { -1.0 } else { 1.0 }).collect();
        let mut a = DMatrix::zeros(m, n + m);
        for i in 0..m {
            for j in 0..n {
                a[(i, j)] = signs[i] * self.a[(i, j)];
            }
            a[(i, n + i)] = 1.0;
        }
        let b = DVector::from_iterator(m, self.b.iter().zip(&signs).map(|(v, s)| v * s));
        let mut solver = Revised {
            a,
            b: &b,
            cols: n,
            basis: (n..n + m).collect(),
            pivots: 0,
            cap,
        };

        let phase1 = DVector::from_fn(n + m, |j, _| if j >= n { -1.0 } else { 0.0 });
        let (_, basic) = solver.run(&phase1, true)?;
        let infeasibility: f64 = solver
            .basis
            .iter()
            .zip(basic.x.iter())
            .filter(|(j, _)| **j >= n)
            .map(|(_, x)| x.max(0.0))
            .sum();
        let empty = |status, pivots| EqualitySolution {
            status,
            z: DVector::zeros(n),
            objective: f64::NAN,
            multipliers: DVector::zeros(m),
            pivots,
        };
        if infeasibility > 1e-9 * (1.0 + b.amax()) {
            return Ok(empty(EqualityStatus::Infeasible, solver.pivots));
        }

        let cost = DVector::from_fn(n + m, |j, _| if j < n { self.c[j] } else { 0.0 });
        let (bounded, basic) = solver.run(&cost, false)?;
        if !bounded {
            return Ok(empty(EqualityStatus::Unbounded, solver.pivots));
        }
        let mut z = DVector::zeros(n);
        for (&j, &x) in solver.basis.iter().zip(basic.x.iter()) {
            if j < n {
                z[j] = x.max(0.0);
            }
        }
        let multipliers = DVector::from_iterator(m, basic.y.iter().zip(&signs).map(|(y, s)| y * s));
        Ok(EqualitySolution {
            status: EqualityStatus::Optimal,
            objective: self.c.dot(&z),
            z,
            multipliers,
            pivots: solver.pivots,
        })
    }
}
