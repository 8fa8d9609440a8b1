//! Horizontal grid, time grid, and the shared finite-difference rules.
//!
//! All fields live on collocated nodes `(i, j)` with `i = 0..=I`, `j = 0..=J`.
//! Arrays are `ndarray::Array2<f64>` of shape `(J + 1, I + 1)` indexed
//! `[(j, i)]`, so a row is a line of constant `y` and is contiguous in `x`.
//!
//! One horizontal derivative rule is used everywhere: centered differences at
//! interior nodes and one-sided two-point differences at boundary nodes.

use ndarray::Array2;

use crate::{Error, Result};

/// Uniform collocated grid on the rectangle `[0, L1] x [0, L2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    /// Number of intervals along x.
    pub i_count: usize,
    /// Number of intervals along y.
    pub j_count: usize,
    /// Node spacing along x.
    pub dx: f64,
    /// Node spacing along y.
    pub dy: f64,
}

impl Grid2D {
    /// Build a grid with `i_count` x `j_count` intervals over `l1` x `l2`.
    pub fn new(l1: f64, l2: f64, i_count: usize, j_count: usize) -> Result<Self> {
        if !(l1.is_finite() && l2.is_finite()) || l1 <= 0.0 || l2 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "domain lengths must be positive and finite, got L1 = {l1}, L2 = {l2}"
            )));
        }
        if i_count < 4 || j_count < 4 {
            return Err(Error::InvalidParameter(format!(
                "need at least 4 intervals per direction, got I = {i_count}, J = {j_count}"
            )));
        }
        Ok(Grid2D {
            i_count,
            j_count,
            dx: l1 / i_count as f64,
            dy: l2 / j_count as f64,
        })
    }

    /// Number of nodes along x.
    pub fn nx(&self) -> usize {
        self.i_count + 1
    }

    /// Number of nodes along y.
    pub fn ny(&self) -> usize {
        self.j_count + 1
    }

    /// x coordinate of node `i`.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    /// y coordinate of node `j`.
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy
    }

    /// Domain length along x.
    pub fn l1(&self) -> f64 {
        self.i_count as f64 * self.dx
    }

    /// Domain length along y.
    pub fn l2(&self) -> f64 {
        self.j_count as f64 * self.dy
    }

    /// Zero array with this grid's node shape.
    pub fn zeros(&self) -> Array2<f64> {
        Array2::zeros((self.ny(), self.nx()))
    }

    /// Check that `a` has this grid's node shape.
    pub fn check_shape(&self, context: &str, a: &Array2<f64>) -> Result<()> {
        if a.dim() != (self.ny(), self.nx()) {
            return Err(Error::ShapeMismatch {
                context: context.to_string(),
                expected: format!("({}, {})", self.ny(), self.nx()),
                got: format!("{:?}", a.dim()),
            });
        }
        Ok(())
    }

    /// x-derivative at node `(i, j)`: centered inside, one-sided on the edge.
    #[inline]
    pub fn ddx_at(&self, f: &Array2<f64>, i: usize, j: usize) -> f64 {
        if i == 0 {
            (f[(j, 1)] - f[(j, 0)]) / self.dx
        } else if i == self.i_count {
            (f[(j, i)] - f[(j, i - 1)]) / self.dx
        } else {
            (f[(j, i + 1)] - f[(j, i - 1)]) / (2.0 * self.dx)
        }
    }

    /// y-derivative at node `(i, j)`: centered inside, one-sided on the edge.
    #[inline]
    pub fn ddy_at(&self, f: &Array2<f64>, i: usize, j: usize) -> f64 {
        if j == 0 {
            (f[(1, i)] - f[(0, i)]) / self.dy
        } else if j == self.j_count {
            (f[(j, i)] - f[(j - 1, i)]) / self.dy
        } else {
            (f[(j + 1, i)] - f[(j - 1, i)]) / (2.0 * self.dy)
        }
    }

    /// x-derivative of a whole field.
    pub fn ddx(&self, f: &Array2<f64>) -> Array2<f64> {
        let mut out = self.zeros();
        for j in 0..self.ny() {
            for i in 0..self.nx() {
                out[(j, i)] = self.ddx_at(f, i, j);
            }
        }
        out
    }

    /// y-derivative of a whole field.
    pub fn ddy(&self, f: &Array2<f64>) -> Array2<f64> {
        let mut out = self.zeros();
        for j in 0..self.ny() {
            for i in 0..self.nx() {
                out[(j, i)] = self.ddy_at(f, i, j);
            }
        }
        out
    }

    /// Divergence `du/dx + dv/dy` at an interior node (centered stencils).
    #[inline]
    pub fn divergence_at(&self, u: &Array2<f64>, v: &Array2<f64>, i: usize, j: usize) -> f64 {
        debug_assert!(i >= 1 && i < self.i_count && j >= 1 && j < self.j_count);
        (u[(j, i + 1)] - u[(j, i - 1)]) / (2.0 * self.dx)
            + (v[(j + 1, i)] - v[(j - 1, i)]) / (2.0 * self.dy)
    }

    /// Maximum of `|du/dx + dv/dy|` over interior nodes.
    pub fn max_interior_divergence(&self, u: &Array2<f64>, v: &Array2<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 1..self.j_count {
            for i in 1..self.i_count {
                worst = worst.max(self.divergence_at(u, v, i, j).abs());
            }
        }
        worst
    }

    /// Mean of `|du/dx + dv/dy|` over interior nodes.
    pub fn mean_abs_interior_divergence(&self, u: &Array2<f64>, v: &Array2<f64>) -> f64 {
        let mut total = 0.0;
        for j in 1..self.j_count {
            for i in 1..self.i_count {
                total += self.divergence_at(u, v, i, j).abs();
            }
        }
        total / ((self.i_count - 1) * (self.j_count - 1)) as f64
    }
}

/// Uniform time grid: `step_count` steps of size `dt` up to `t_final`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    /// Number of time steps.
    pub step_count: usize,
    /// Step size.
    pub dt: f64,
}

impl TimeGrid {
    /// Build from a final time and a step count.
    pub fn new(t_final: f64, step_count: usize) -> Result<Self> {
        if !t_final.is_finite() || t_final <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        if step_count == 0 {
            return Err(Error::InvalidParameter(
                "step count must be positive".into(),
            ));
        }
        Ok(TimeGrid {
            step_count,
            dt: t_final / step_count as f64,
        })
    }

    /// Time after `k` steps.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Final time.
    pub fn t_final(&self) -> f64 {
        self.time(self.step_count)
    }
}
