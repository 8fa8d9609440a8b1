//! Direct solver for the collocated Neumann pressure system.
//!
//! The correction potential `phi` satisfies, on the full node set of a
//! [`Grid2D`](crate::grid::Grid2D):
//!
//! * interior nodes: `div(grad(phi)) = r`, where both operators follow the
//!   module-wide rule (centered differences at interior nodes, one-sided
//!   two-point differences at boundary nodes), giving a wide five-point
//!   stencil;
//! * boundary edges: the one-sided normal derivative equals prescribed data,
//!   e.g. `(phi[j,1] - phi[j,0]) / dx = g_w[j]` on the west edge;
//! * corners: the sum of the two adjacent outward normal-derivative
//!   conditions.
//!
//! Eliminating the edge unknowns with the boundary rows reduces the interior
//! equations to a Kronecker-sum system `Ax U + U Ay^T = R` over interior
//! nodes, which is solved directly by real-Schur reduction of the two 1-D
//! operators followed by quasi-triangular back-substitution. Both operators
//! annihilate constants, so the system carries a one-dimensional
//! compatibility constraint; the right-hand side is projected onto the
//! compatible subspace first (the removed amount is reported as
//! [`PoissonSolution::compatibility_defect`]) and the lone singular direction
//! is pseudo-zeroed during back-substitution. A short iterative-refinement
//! loop drives the reduced residual to near machine precision, and the
//! returned potential is pinned to zero mean.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

use crate::grid::Grid2D;
use crate::{Error, Result};

/// Relative residual the refinement loop tries to reach.
const TARGET_RESIDUAL: f64 = 1e-12;
/// Relative residual above which the solve is reported as stalled.
const ACCEPT_RESIDUAL: f64 = 1e-10;
/// Maximum number of refinement sweeps.
const MAX_REFINEMENTS: usize = 25;

/// Prescribed one-sided normal-derivative data on the four edges.
///
/// `west`/`east` are indexed by `j = 0..=J`, `south`/`north` by `i = 0..=I`.
/// Sign convention: each entry is the one-sided difference pointing into the
/// domain, e.g. `west[j] = (phi[j,1] - phi[j,0]) / dx`.
#[derive(Debug, Clone)]
pub struct NeumannData {
    pub west: Vec<f64>,
    pub east: Vec<f64>,
    pub south: Vec<f64>,
    pub north: Vec<f64>,
}

impl NeumannData {
    /// All-zero data of the right lengths for `grid`.
    pub fn zeros(grid: &Grid2D) -> Self {
        NeumannData {
            west: vec![0.0; grid.ny()],
            east: vec![0.0; grid.ny()],
            south: vec![0.0; grid.nx()],
            north: vec![0.0; grid.nx()],
        }
    }

    fn check(&self, grid: &Grid2D) -> Result<()> {
        for (name, v, want) in [
            ("west", &self.west, grid.ny()),
            ("east", &self.east, grid.ny()),
            ("south", &self.south, grid.nx()),
            ("north", &self.north, grid.nx()),
        ] {
            if v.len() != want {
                return Err(Error::ShapeMismatch {
                    context: format!("Neumann data {name}"),
                    expected: want.to_string(),
                    got: v.len().to_string(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("Neumann data {name}"),
                });
            }
        }
        Ok(())
    }
}

/// Result of one pressure solve.
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    /// Zero-mean potential on the full node set, shape `(J + 1, I + 1)`.
    pub phi: Array2<f64>,
    /// Amount removed from the right-hand side to make the singular system
    /// compatible (weighted mean of the interior equations).
    pub compatibility_defect: f64,
    /// Final max-norm residual of the reduced system relative to the
    /// right-hand side.
    pub relative_residual: f64,
    /// Number of refinement sweeps performed after the direct solve.
    pub refinement_steps: usize,
}

/// One reduced 1-D operator together with its Schur factorization and the
/// coefficients that couple its rows to the boundary data.
struct Reduced1D {
    a: DMatrix<f64>,
    q: DMatrix<f64>,
    q_t: DMatrix<f64>,
    t: DMatrix<f64>,
    /// Coefficient of the low-side data value in each interior row.
    c_lo: DVector<f64>,
    /// Coefficient of the high-side data value in each interior row.
    c_hi: DVector<f64>,
    /// Left null vector (the operator annihilates constants).
    w_null: DVector<f64>,
}

impl Reduced1D {
    fn build(intervals: usize, h: f64) -> Result<Self> {
        let (a, c_lo, c_hi) = assemble_1d(intervals, h);
        let (q, t) = nalgebra::linalg::Schur::new(a.clone()).unpack();
        let svd = a.clone().svd(true, false);
        let smax = svd.singular_values.max();
        let (idx, smin) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .map(|(i, s)| (i, *s))
            .expect("non-empty singular spectrum");
        if smin > 1e-8 * smax {
            return Err(Error::InvalidParameter(format!(
                "reduced 1-D pressure operator lost its constant null space \
                 (smallest/largest singular value = {:.3e})",
                smin / smax
            )));
        }
        let w_null = svd.u.expect("u requested").column(idx).into_owned();
        let q_t = q.transpose();
        Ok(Reduced1D {
            a,
            q,
            q_t,
            t,
            c_lo,
            c_hi,
            w_null,
        })
    }
}

/// Contribution of the (possibly substituted) gradient at `node` to an
/// interior row. Boundary gradients are the data themselves; centered
/// gradients touching an edge unknown substitute it via the boundary row
/// (`phi_0 = phi_1 - h g_lo`, `phi_n = phi_{n-1} + h g_hi`).
#[allow(clippy::too_many_arguments)]
fn add_grad_contrib(
    node: usize,
    coef: f64,
    n: usize,
    h: f64,
    row: usize,
    a: &mut DMatrix<f64>,
    c_lo: &mut DVector<f64>,
    c_hi: &mut DVector<f64>,
) {
    if node == 0 {
        c_lo[row] += coef;
    } else if node == n {
        c_hi[row] += coef;
    } else {
        for (nbr, c2) in [(node + 1, coef * 0.5 / h), (node - 1, -(coef * 0.5 / h))] {
            if nbr == 0 {
                a[(row, 0)] += c2;
                c_lo[row] += -c2 * h;
            } else if nbr == n {
                a[(row, n - 2)] += c2;
                c_hi[row] += c2 * h;
            } else {
                a[(row, nbr - 1)] += c2;
            }
        }
    }
}

/// Reduced 1-D second-difference operator over interior nodes `1..n-1` plus
/// the data-coupling vectors, such that the x-part of `div(grad phi)` at
/// interior node `i` equals `row_i(phi_int) + c_lo[i-1] g_lo + c_hi[i-1] g_hi`.
fn assemble_1d(n: usize, h: f64) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let m = n - 1;
    let mut a = DMatrix::zeros(m, m);
    let mut c_lo = DVector::zeros(m);
    let mut c_hi = DVector::zeros(m);
    for i in 1..n {
        let row = i - 1;
        add_grad_contrib(i + 1, 0.5 / h, n, h, row, &mut a, &mut c_lo, &mut c_hi);
        add_grad_contrib(i - 1, -0.5 / h, n, h, row, &mut a, &mut c_lo, &mut c_hi);
    }
    (a, c_lo, c_hi)
}

/// Solve `(T + lam (x) I) V = W` where `T` is real-Schur form, `lam` is a
/// `k x k` diagonal block of the other factor and `W` is `m x k`.
/// Near-singular diagonal combinations are pseudo-zeroed.
fn solve_shifted(
    t: &DMatrix<f64>,
    lam: &DMatrix<f64>,
    w: &DMatrix<f64>,
    scale: f64,
) -> DMatrix<f64> {
    let m = t.nrows();
    let k = lam.nrows();
    let block_tol = 1e-14 * scale;
    let sing_tol = 1e-12 * scale;
    let mut v = DMatrix::zeros(m, k);
    let mut p = m as isize - 1;
    while p >= 0 {
        let pu = p as usize;
        let (bs, p0) = if pu > 0 && t[(pu, pu - 1)].abs() > block_tol {
            (2, pu - 1)
        } else {
            (1, pu)
        };
        let mut wblk = w.rows(p0, bs).into_owned();
        let below = m - (p0 + bs);
        if below > 0 {
            wblk -= t.view((p0, p0 + bs), (bs, below)) * v.rows(p0 + bs, below);
        }
        if bs == 1 && k == 1 {
            let denom = t[(p0, p0)] + lam[(0, 0)];
            v[(p0, 0)] = if denom.abs() > sing_tol {
                wblk[(0, 0)] / denom
            } else {
                0.0
            };
        } else {
            let tb = t.view((p0, p0), (bs, bs)).into_owned();
            // Column-major vec of `Tb Vb + Vb Lam^T = Wb`.
            let kmat =
                DMatrix::identity(k, k).kronecker(&tb) + lam.kronecker(&DMatrix::identity(bs, bs));
            let wv = DVector::from_column_slice(wblk.as_slice());
            let sol = kmat
                .svd(true, true)
                .solve(&wv, sing_tol)
                .unwrap_or_else(|_| DVector::zeros(bs * k));
            v.view_mut((p0, 0), (bs, k))
                .copy_from(&DMatrix::from_column_slice(bs, k, sol.as_slice()));
        }
        p = p0 as isize - 1;
    }
    v
}

/// Direct solver for the reduced pressure system on one grid.
///
/// Construction performs the two Schur factorizations; [`solve`](Self::solve)
/// reuses them, so a solver should be built once per grid and kept.
pub struct PoissonSolver {
    grid: Grid2D,
    x: Reduced1D,
    y: Reduced1D,
    ay_t: DMatrix<f64>,
    wx_sum: f64,
    wy_sum: f64,
}

impl PoissonSolver {
    pub fn new(grid: &Grid2D) -> Result<Self> {
        let x = Reduced1D::build(grid.i_count, grid.dx)?;
        let y = Reduced1D::build(grid.j_count, grid.dy)?;
        let ay_t = y.a.transpose();
        let wx_sum = x.w_null.sum();
        let wy_sum = y.w_null.sum();
        Ok(PoissonSolver {
            grid: grid.clone(),
            x,
            y,
            ay_t,
            wx_sum,
            wy_sum,
        })
    }

    /// One pass of the direct Sylvester solve `Ax U + U Ay^T = rhs`.
    fn sylvester(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let s = &self.x.q_t * rhs * &self.y.q;
        let mx = self.x.t.nrows();
        let my = self.y.t.nrows();
        // Tolerances must follow the operator's own magnitude (~1/h^2), not
        // an absolute floor: physical spacings make every entry tiny.
        let scale = self.x.t.amax().max(self.y.t.amax()).max(f64::MIN_POSITIVE);
        let block_tol = 1e-14 * scale;
        let mut v = DMatrix::zeros(mx, my);
        let mut q = my as isize - 1;
        while q >= 0 {
            let qu = q as usize;
            let (bs, q0) = if qu > 0 && self.y.t[(qu, qu - 1)].abs() > block_tol {
                (2, qu - 1)
            } else {
                (1, qu)
            };
            let mut rhs_blk = s.columns(q0, bs).into_owned();
            let right = my - (q0 + bs);
            if right > 0 {
                rhs_blk -= v.columns(q0 + bs, right)
                    * self.y.t.view((q0, q0 + bs), (bs, right)).transpose();
            }
            let lam = self.y.t.view((q0, q0), (bs, bs)).into_owned();
            let vb = solve_shifted(&self.x.t, &lam, &rhs_blk, scale);
            v.view_mut((0, q0), (mx, bs)).copy_from(&vb);
            q = q0 as isize - 1;
        }
        &self.x.q * v * &self.y.q_t
    }

    /// Solve for the zero-mean potential given the interior right-hand side
    /// (full-shape array; only interior nodes are read) and edge data.
    pub fn solve(&self, interior_rhs: &Array2<f64>, data: &NeumannData) -> Result<PoissonSolution> {
        let grid = &self.grid;
        grid.check_shape("pressure rhs", interior_rhs)?;
        data.check(grid)?;
        let (ii, jj) = (grid.i_count, grid.j_count);
        let (mx, my) = (ii - 1, jj - 1);

        // Reduced right-hand side: move the data couplings of the substituted
        // edge unknowns across.
        let mut r = DMatrix::zeros(mx, my);
        for q in 0..my {
            let j = q + 1;
            for p in 0..mx {
                let i = p + 1;
                let val = interior_rhs[(j, i)]
                    - self.x.c_lo[p] * data.west[j]
                    - self.x.c_hi[p] * data.east[j]
                    - self.y.c_lo[q] * data.south[i]
                    - self.y.c_hi[q] * data.north[i];
                if !val.is_finite() {
                    return Err(Error::NonFinite {
                        context: "pressure right-hand side".into(),
                    });
                }
                r[(p, q)] = val;
            }
        }

        // Compatibility projection: remove the component seen by the left
        // null vectors of the two 1-D operators.
        let denom = self.wx_sum * self.wy_sum;
        let mu = if denom.abs() > 1e-10 * (self.x.w_null.amax() * self.y.w_null.amax()).max(1e-300)
        {
            (self.x.w_null.transpose() * &r * &self.y.w_null)[(0, 0)] / denom
        } else {
            0.0
        };
        r.add_scalar_mut(-mu);

        let r_scale = r.amax();
        let mut u = DMatrix::zeros(mx, my);
        let mut rel = 0.0;
        let mut steps = 0;
        if r_scale > 0.0 {
            u = self.sylvester(&r);
            let mut res = &r - (&self.x.a * &u + &u * &self.ay_t);
            rel = res.amax() / r_scale;
            while rel > TARGET_RESIDUAL && steps < MAX_REFINEMENTS {
                let du = self.sylvester(&res);
                u += du;
                res = &r - (&self.x.a * &u + &u * &self.ay_t);
                let new_rel = res.amax() / r_scale;
                steps += 1;
                if new_rel >= rel {
                    break;
                }
                rel = new_rel;
            }
            if rel > ACCEPT_RESIDUAL {
                return Err(Error::PressureSolveStalled {
                    residual: rel,
                    tolerance: ACCEPT_RESIDUAL,
                });
            }
        }

        // Reconstruct the full field: interior from U, edges from the
        // boundary rows, corners from the summed outward closure.
        let mut phi = grid.zeros();
        for q in 0..my {
            for p in 0..mx {
                phi[(q + 1, p + 1)] = u[(p, q)];
            }
        }
        let (dx, dy) = (grid.dx, grid.dy);
        for j in 1..jj {
            phi[(j, 0)] = phi[(j, 1)] - dx * data.west[j];
            phi[(j, ii)] = phi[(j, ii - 1)] + dx * data.east[j];
        }
        for i in 1..ii {
            phi[(0, i)] = phi[(1, i)] - dy * data.south[i];
            phi[(jj, i)] = phi[(jj - 1, i)] + dy * data.north[i];
        }
        let closure = 1.0 / (1.0 / dx + 1.0 / dy);
        phi[(0, 0)] =
            (phi[(0, 1)] / dx + phi[(1, 0)] / dy - (data.west[0] + data.south[0])) * closure;
        phi[(0, ii)] =
            (phi[(0, ii - 1)] / dx + phi[(1, ii)] / dy + (data.east[0] - data.south[ii])) * closure;
        phi[(jj, 0)] =
            (phi[(jj, 1)] / dx + phi[(jj - 1, 0)] / dy + (data.north[0] - data.west[jj])) * closure;
        phi[(jj, ii)] =
            (phi[(jj, ii - 1)] / dx + phi[(jj - 1, ii)] / dy + (data.east[jj] + data.north[ii]))
                * closure;

        let mean = phi.sum() / phi.len() as f64;
        phi.mapv_inplace(|v| v - mean);

        Ok(PoissonSolution {
            phi,
            compatibility_defect: mu,
            relative_residual: rel,
            refinement_steps: steps,
        })
    }
}
