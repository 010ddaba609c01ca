use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Potential, SpatialGrid};

/// Forcing potentials used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Forcing {
    /// `Psi = 0` on (0,1).
    Zero,
    /// `Psi(x) = x` on (0,1).
    Linear,
    /// `Psi(x) = x^2 / 2` on (0,1).
    HalfSquare,
    /// `Psi(x1, x2) = x1 + x2` on (0,1)^2.
    Sum2d,
}

impl Forcing {
    pub fn dim(self) -> usize {
        match self {
            Forcing::Zero | Forcing::Linear | Forcing::HalfSquare => 1,
            Forcing::Sum2d => 2,
        }
    }

    pub fn value(self, x: &[f64]) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Linear => x[0],
            Forcing::HalfSquare => 0.5 * x[0] * x[0],
            Forcing::Sum2d => x[0] + x[1],
        }
    }

    /// `grad Psi`; the second component is zero in 1D.
    pub fn gradient(self, x: &[f64]) -> [f64; 2] {
        match self {
            Forcing::Zero => [0.0, 0.0],
            Forcing::Linear => [1.0, 0.0],
            Forcing::HalfSquare => [x[0], 0.0],
            Forcing::Sum2d => [1.0, 1.0],
        }
    }

    pub fn potential(self, grid: &SpatialGrid) -> Result<Potential> {
        if grid.dim() != self.dim() {
            return Err(Error::InvalidConfig(format!(
                "forcing {self} lives in {}D, grid is {}D",
                self.dim(),
                grid.dim()
            )));
        }
        Potential::from_function(grid, |x| self.value(x))
    }

    pub fn name(self) -> &'static str {
        match self {
            Forcing::Zero => "zero",
            Forcing::Linear => "linear",
            Forcing::HalfSquare => "half-square",
            Forcing::Sum2d => "sum-2d",
        }
    }
}

impl fmt::Display for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Forcing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "zero" | "0" => Ok(Forcing::Zero),
            "linear" | "x" => Ok(Forcing::Linear),
            "half-square" | "x2/2" => Ok(Forcing::HalfSquare),
            "sum-2d" | "x1+x2" => Ok(Forcing::Sum2d),
            other => Err(Error::Parse(format!("unknown forcing '{other}'"))),
        }
    }
}
