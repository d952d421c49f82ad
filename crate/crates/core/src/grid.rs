use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid t_k = k/n on [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    n_steps: usize,
}

impl Grid {
    pub fn new(n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::Config("grid needs at least one step".into()));
        }
        Ok(Self { n_steps })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.n_steps as f64
    }

    /// Index of `t` if it lies on the grid (up to rounding).
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = t * self.n_steps as f64;
        let k = x.round();
        if !(0.0..=self.n_steps as f64).contains(&k) || (x - k).abs() > 1e-9 {
            return Err(Error::PartitionOffGrid(t));
        }
        Ok(k as usize)
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.n_steps != other.n_steps {
            return Err(Error::GridMismatch(self.n_steps, other.n_steps));
        }
        Ok(())
    }

    /// Grid with `factor` times as many steps.
    pub fn refine(&self, factor: usize) -> Grid {
        Grid { n_steps: self.n_steps * factor.max(1) }
    }
}
