//! Time step of the depth-independent (barotropic) mode.
//!
//! This mode carries no gravity-wave restoring term; instead it obeys the
//! incompressibility constraint `du/dx + dv/dy = 0`, with the pressure `phi`
//! acting as a Lagrange multiplier. One step consists of
//!
//! 1. a predictor: Coriolis, pressure-gradient and nonlinear forcing applied
//!    explicitly, advection by the mean flow applied as an implicit upwind
//!    sweep from the west edge;
//! 2. a correction: a Neumann problem for the pressure increment whose
//!    gradient removes the predictor's divergence and restores the normal
//!    boundary values;
//! 3. exact re-imposition of the prescribed boundary values.

use ndarray::Array2;

use crate::baroclinic::sweep_x_increasing;
use crate::boundary::{BoundaryProvider, TraceLine, TraceVariable};
use crate::grid::Grid2D;
use crate::modes::PhysicalParams;
use crate::poisson::{NeumannData, PoissonSolution, PoissonSolver};
use crate::{Error, Result};

/// Boundary values consumed by one barotropic step.
///
/// Normal components (`u` west/east, `v` south/north) are enforced by the
/// projection; `v_west` is the tangential value carried in by the mean-flow
/// advection at the inflow edge.
#[derive(Debug, Clone)]
pub struct ZeroModeBc {
    pub u_west: Vec<f64>,
    pub u_east: Vec<f64>,
    pub v_west: Vec<f64>,
    pub v_south: Vec<f64>,
    pub v_north: Vec<f64>,
}

impl ZeroModeBc {
    /// Fetch all five lines for time level `step` from `provider`.
    pub fn from_provider(provider: &BoundaryProvider, step: usize, grid: &Grid2D) -> Result<Self> {
        let (nx, ny) = (grid.nx(), grid.ny());
        Ok(ZeroModeBc {
            u_west: provider.provide(step, 0, TraceVariable::U, TraceLine::West, ny)?,
            u_east: provider.provide(step, 0, TraceVariable::U, TraceLine::East, ny)?,
            v_west: provider.provide(step, 0, TraceVariable::V, TraceLine::West, ny)?,
            v_south: provider.provide(step, 0, TraceVariable::V, TraceLine::South, nx)?,
            v_north: provider.provide(step, 0, TraceVariable::V, TraceLine::North, nx)?,
        })
    }

    fn check(&self, grid: &Grid2D) -> Result<()> {
        for (name, line, want) in [
            ("u_west", &self.u_west, grid.ny()),
            ("u_east", &self.u_east, grid.ny()),
            ("v_west", &self.v_west, grid.ny()),
            ("v_south", &self.v_south, grid.nx()),
            ("v_north", &self.v_north, grid.nx()),
        ] {
            if line.len() != want {
                return Err(Error::ShapeMismatch {
                    context: format!("barotropic boundary data {name}"),
                    expected: want.to_string(),
                    got: line.len().to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Diagnostics of one barotropic step or projection.
#[derive(Debug, Clone, Copy)]
pub struct ZeroModeReport {
    /// Compatibility defect removed from the pressure problem.
    pub compatibility_defect: f64,
    /// Relative residual of the pressure solve.
    pub relative_residual: f64,
    /// Iterative refinement steps taken by the pressure solve.
    pub refinement_steps: usize,
    /// Max interior `|du/dx + dv/dy|` after the correction.
    pub max_interior_divergence: f64,
}

/// Explicit forcing + implicit upwind advection by the mean flow.
///
/// Returns the predicted `(u*, v*)` with the west inflow column set to the
/// prescribed values. The south/north rows are left free: the projection
/// measures its Neumann data there as the defect between `v*` and the
/// prescribed normal values, and its correction is what lands the rows on
/// those values. Zeroing the defect beforehand would hide the true normal
/// pressure gradient at the edge from the pressure solve.
#[allow(clippy::too_many_arguments)]
pub(crate) fn predictor(
    u: &Array2<f64>,
    v: &Array2<f64>,
    phi: &Array2<f64>,
    g0x: &Array2<f64>,
    g0y: &Array2<f64>,
    bc: &ZeroModeBc,
    grid: &Grid2D,
    params: &PhysicalParams,
    dt: f64,
) -> (Array2<f64>, Array2<f64>) {
    let mut dpx = grid.ddx(phi);
    let mut dpy = grid.ddy(phi);
    extrapolate_tangential_edges(&mut dpx, &mut dpy, grid);

    let mut rhs_u = v.mapv(|val| params.f * val);
    rhs_u -= &dpx;
    rhs_u -= g0x;
    let mut rhs_v = u.mapv(|val| -params.f * val);
    rhs_v -= &dpy;
    rhs_v -= g0y;

    let courant = params.u0 * dt / grid.dx;
    let u_star = sweep_x_increasing(u, Some(&rhs_u), &bc.u_west, courant, dt);
    let v_star = sweep_x_increasing(v, Some(&rhs_v), &bc.v_west, courant, dt);
    (u_star, v_star)
}

/// Pressure increment whose gradient corrects `(u, v)` toward zero interior
/// divergence and the prescribed normal boundary values.
fn projection_increment(
    u: &Array2<f64>,
    v: &Array2<f64>,
    bc: &ZeroModeBc,
    grid: &Grid2D,
    solver: &PoissonSolver,
    dt: f64,
) -> Result<PoissonSolution> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut data = NeumannData::zeros(grid);
    for j in 0..ny {
        data.west[j] = (u[(j, 0)] - bc.u_west[j]) / dt;
        data.east[j] = (u[(j, nx - 1)] - bc.u_east[j]) / dt;
    }
    for i in 0..nx {
        data.south[i] = (v[(0, i)] - bc.v_south[i]) / dt;
        data.north[i] = (v[(ny - 1, i)] - bc.v_north[i]) / dt;
    }
    let mut rhs = grid.zeros();
    for j in 1..grid.j_count {
        for i in 1..grid.i_count {
            rhs[(j, i)] = grid.divergence_at(u, v, i, j) / dt;
        }
    }
    solver.solve(&rhs, &data)
}

/// Replace the tangential pressure-gradient components on boundary lines
/// (`d_x phi` along the south/north rows, `d_y phi` along the west/east
/// columns) with the interior gradient field linearly extrapolated to the
/// line.
///
/// The pressure's edge values encode accumulated one-sided Neumann data, a
/// measurement whose stencil differs from the interior one by O(h); the
/// tangential velocities along those lines are the only fields with neither
/// a boundary datum nor a divergence constraint, so driving them with the
/// formal edge gradient integrates that O(h) mismatch step after step.
/// Normal components keep the formal gradient: for the correction it is what
/// lands them exactly on the prescribed boundary data.
fn extrapolate_tangential_edges(gx: &mut Array2<f64>, gy: &mut Array2<f64>, grid: &Grid2D) {
    let (nx, ny) = (grid.nx(), grid.ny());
    for i in 0..nx {
        gx[(0, i)] = 2.0 * gx[(1, i)] - gx[(2, i)];
        gx[(ny - 1, i)] = 2.0 * gx[(ny - 2, i)] - gx[(ny - 3, i)];
    }
    for j in 0..ny {
        gy[(j, 0)] = 2.0 * gy[(j, 1)] - gy[(j, 2)];
        gy[(j, nx - 1)] = 2.0 * gy[(j, nx - 2)] - gy[(j, nx - 3)];
    }
}

/// Subtract `dt * grad(dphi)` from the velocity, with tangential edge
/// components taken from the extrapolated interior gradient.
fn apply_correction(
    u: &mut Array2<f64>,
    v: &mut Array2<f64>,
    dphi: &Array2<f64>,
    grid: &Grid2D,
    dt: f64,
) {
    let mut gx = grid.ddx(dphi);
    let mut gy = grid.ddy(dphi);
    extrapolate_tangential_edges(&mut gx, &mut gy, grid);
    u.zip_mut_with(&gx, |a, g| *a -= dt * g);
    v.zip_mut_with(&gy, |a, g| *a -= dt * g);
}

/// Project `(u, v)` onto the space of fields with zero interior divergence
/// and the prescribed normal boundary values. (`v_west` is not touched; it
/// is advective, not normal, data.) The `dt` scaling cancels internally, so
/// any positive value gives the same projection.
pub fn project_velocities(
    u: &mut Array2<f64>,
    v: &mut Array2<f64>,
    bc: &ZeroModeBc,
    grid: &Grid2D,
    solver: &PoissonSolver,
    dt: f64,
) -> Result<ZeroModeReport> {
    bc.check(grid)?;
    let sol = projection_increment(u, v, bc, grid, solver, dt)?;
    apply_correction(u, v, &sol.phi, grid, dt);
    let (nx, ny) = (grid.nx(), grid.ny());
    for j in 0..ny {
        u[(j, 0)] = bc.u_west[j];
        u[(j, nx - 1)] = bc.u_east[j];
    }
    for i in 0..nx {
        v[(0, i)] = bc.v_south[i];
        v[(ny - 1, i)] = bc.v_north[i];
    }
    Ok(ZeroModeReport {
        compatibility_defect: sol.compatibility_defect,
        relative_residual: sol.relative_residual,
        refinement_steps: sol.refinement_steps,
        max_interior_divergence: grid.max_interior_divergence(u, v),
    })
}

/// Advance the barotropic mode one step in place.
///
/// `g0x` and `g0y` are the nonlinear/background forcing arrays entering the
/// momentum tendencies with a minus sign. The boundary values `bc` are the
/// ones at the *new* time level.
#[allow(clippy::too_many_arguments)]
pub fn step_zero_mode(
    u: &mut Array2<f64>,
    v: &mut Array2<f64>,
    phi: &mut Array2<f64>,
    g0x: &Array2<f64>,
    g0y: &Array2<f64>,
    bc: &ZeroModeBc,
    grid: &Grid2D,
    params: &PhysicalParams,
    dt: f64,
    solver: &PoissonSolver,
) -> Result<ZeroModeReport> {
    bc.check(grid)?;
    grid.check_shape("barotropic u", u)?;
    grid.check_shape("barotropic v", v)?;
    grid.check_shape("barotropic phi", phi)?;
    grid.check_shape("barotropic forcing x", g0x)?;
    grid.check_shape("barotropic forcing y", g0y)?;

    let (mut u_star, mut v_star) = predictor(u, v, phi, g0x, g0y, bc, grid, params, dt);
    let sol = projection_increment(&u_star, &v_star, bc, grid, solver, dt)?;
    apply_correction(&mut u_star, &mut v_star, &sol.phi, grid, dt);

    // Exact boundary re-imposition: columns first, rows last so the
    // south/north values win the corners.
    let (nx, ny) = (grid.nx(), grid.ny());
    for j in 0..ny {
        u_star[(j, 0)] = bc.u_west[j];
        u_star[(j, nx - 1)] = bc.u_east[j];
        v_star[(j, 0)] = bc.v_west[j];
    }
    for i in 0..nx {
        v_star[(0, i)] = bc.v_south[i];
        v_star[(ny - 1, i)] = bc.v_north[i];
    }

    *phi += &sol.phi;
    *u = u_star;
    *v = v_star;
    Ok(ZeroModeReport {
        compatibility_defect: sol.compatibility_defect,
        relative_residual: sol.relative_residual,
        refinement_steps: sol.refinement_steps,
        max_interior_divergence: grid.max_interior_divergence(u, v),
    })
}
