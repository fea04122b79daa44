//! Sup-norm distances from grid samples to polynomials of growing degree.
//!
//! On a finite grid the polynomials eventually interpolate anything, so the
//! plateau of a discontinuous target only shows over a bounded degree range.

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::distance::{distance, Method};
use crate::error::{Error, Result};
use crate::space::{Norm, NormedSpace, Subspace};

pub const DEMO_LABEL: &str = "finite-resolution illustration: polynomials are dense in C[0,1], \
     yet a discontinuous target keeps a positive sup-norm distance over the degree range shown";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemoTarget {
    /// `exp(3t)`.
    Exp,
    /// `0` on `[0, 1/2)`, `1` on `[1/2, 1]`.
    Step,
    /// `t² − t + 1/4`.
    Quadratic,
}

impl DemoTarget {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            DemoTarget::Exp => (3.0 * t).exp(),
            DemoTarget::Step => {
                if t < 0.5 {
                    0.0
                } else {
                    1.0
                }
            }
            DemoTarget::Quadratic => t * t - t + 0.25,
        }
    }
}

impl std::str::FromStr for DemoTarget {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "exp" => Ok(DemoTarget::Exp),
            "step" => Ok(DemoTarget::Step),
            "quadratic" => Ok(DemoTarget::Quadratic),
            other => Err(format!("unknown target `{other}` (expected exp|step|quadratic)")),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DemoConfig {
    /// Number of grid points on `[0, 1]`.
    pub grid: usize,
    /// Largest `n`; `Y_n` holds the polynomials of degree `< n`.
    pub levels: usize,
    pub target: DemoTarget,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            grid: 257,
            levels: 12,
            target: DemoTarget::Step,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DemoRow {
    pub n: usize,
    pub degree: usize,
    pub distance: f64,
    pub method: Method,
    pub certified: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DemoReport {
    pub label: String,
    pub grid: usize,
    pub target: DemoTarget,
    pub rows: Vec<DemoRow>,
    /// Smallest distance over the levels shown.
    pub plateau: f64,
}

impl DemoReport {
    pub fn distances(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.distance).collect()
    }

    /// CSV with header `n,degree,distance,certified`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["n", "degree", "distance", "certified"])?;
        for r in &self.rows {
            out.write_record([
                r.n.to_string(),
                r.degree.to_string(),
                format!("{:e}", r.distance),
                r.certified.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Grid `t_i = i / (grid − 1)`.
pub fn grid_points(grid: usize) -> Vec<f64> {
    (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect()
}

/// Monomials in `s = 2t − 1` up to degree `levels − 1`, sampled on the grid.
pub fn vandermonde_columns(grid: usize, levels: usize) -> Vec<DVector<f64>> {
    let s: Vec<f64> = grid_points(grid).into_iter().map(|t| 2.0 * t - 1.0).collect();
    (0..levels)
        .map(|deg| DVector::from_iterator(grid, s.iter().map(|x| x.powi(deg as i32))))
        .collect()
}

pub fn demo_dense_chain(config: &DemoConfig) -> Result<DemoReport> {
    if config.grid < 2 || config.levels == 0 || config.levels >= config.grid {
        return Err(Error::DegreeExceedsGrid {
            levels: config.levels,
            grid: config.grid,
        });
    }
    let space = NormedSpace::new(config.grid, Norm::LInf, None)?;
    let f = DVector::from_iterator(
        config.grid,
        grid_points(config.grid).into_iter().map(|t| config.target.eval(t)),
    );
    let columns = vandermonde_columns(config.grid, config.levels);
    let mut rows = Vec::with_capacity(config.levels);
    for n in 1..=config.levels {
        let y = Subspace::new(columns[..n].to_vec())?;
        let r = distance(&space, &f, &y)?;
        rows.push(DemoRow {
            n,
            degree: n - 1,
            distance: r.value,
            method: r.method,
            certified: r.certified,
        });
    }
    let plateau = rows.iter().map(|r| r.distance).fold(f64::INFINITY, f64::min);
    Ok(DemoReport {
        label: DEMO_LABEL.into(),
        grid: config.grid,
        target: config.target,
        rows,
        plateau,
    })
}
