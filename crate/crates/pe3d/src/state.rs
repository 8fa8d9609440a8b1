//! Modal prognostic state and the characteristic changes of variables.
//!
//! All horizontal fields are `Array2<f64>` with shape `(J + 1, I + 1)` and
//! index order `[(j, i)]`, matching [`crate::grid::Grid2D`].
//!
//! Prognostic variables per vertical mode:
//!
//! * mode `0`: `u_0`, `v_0` and the barotropic pressure `phi_0`,
//! * mode `n >= 1`: `u_n`, `v_n` and the buoyancy amplitude `psi_n`.
//!
//! Baroclinic pressure and vertical velocity are diagnostic:
//! `phi_n = -psi_n / lambda_n` and `w_n = -(d_x u_n + d_y v_n) / lambda_n`.
//!
//! The advective part of a baroclinic mode diagonalizes in two views:
//!
//! * x-view: `xi = u - psi/N` (speed `U0 + N/lambda_n`),
//!   `eta = u + psi/N` (speed `U0 - N/lambda_n`), `v` (speed `U0`);
//! * y-view: `alpha = v + psi/N` (speed `-N/lambda_n`),
//!   `beta = v - psi/N` (speed `+N/lambda_n`), with `u` carried unchanged.

use ndarray::Array2;

use crate::grid::Grid2D;
use crate::modes::{evaluate_mode, BasisKind, PhysicalParams};
use crate::{Error, Result};

/// Complete prognostic state of all retained vertical modes.
#[derive(Debug, Clone)]
pub struct ModalState {
    /// Highest retained baroclinic mode index.
    pub n_max: usize,
    /// Zonal velocity amplitudes `u_n`, `n = 0..=n_max`.
    pub u: Vec<Array2<f64>>,
    /// Meridional velocity amplitudes `v_n`, `n = 0..=n_max`.
    pub v: Vec<Array2<f64>>,
    /// Barotropic pressure `phi_0`.
    pub phi0: Array2<f64>,
    /// Buoyancy amplitudes `psi_n`; entry `n - 1` holds mode `n`.
    pub psi: Vec<Array2<f64>>,
}

impl ModalState {
    /// All-zero state on the given grid.
    pub fn zeros(grid: &Grid2D, n_max: usize) -> Self {
        ModalState {
            n_max,
            u: (0..=n_max).map(|_| grid.zeros()).collect(),
            v: (0..=n_max).map(|_| grid.zeros()).collect(),
            phi0: grid.zeros(),
            psi: (1..=n_max).map(|_| grid.zeros()).collect(),
        }
    }

    /// Validate that every array matches the grid shape.
    pub fn check_shape(&self, grid: &Grid2D) -> Result<()> {
        if self.u.len() != self.n_max + 1
            || self.v.len() != self.n_max + 1
            || self.psi.len() != self.n_max
        {
            return Err(Error::ShapeMismatch {
                context: "modal state mode count".into(),
                expected: format!("{} modes", self.n_max + 1),
                got: format!(
                    "u:{} v:{} psi:{}",
                    self.u.len(),
                    self.v.len(),
                    self.psi.len()
                ),
            });
        }
        for (name, arr) in self.iter_named() {
            grid.check_shape(&name, arr)?;
        }
        Ok(())
    }

    /// Buoyancy amplitude of baroclinic mode `n >= 1`.
    pub fn psi_n(&self, n: usize) -> Result<&Array2<f64>> {
        if n == 0 || n > self.n_max {
            return Err(Error::BarotropicModeForbidden("psi_n"));
        }
        Ok(&self.psi[n - 1])
    }

    /// Mutable buoyancy amplitude of baroclinic mode `n >= 1`.
    pub fn psi_n_mut(&mut self, n: usize) -> Result<&mut Array2<f64>> {
        if n == 0 || n > self.n_max {
            return Err(Error::BarotropicModeForbidden("psi_n_mut"));
        }
        Ok(&mut self.psi[n - 1])
    }

    /// Diagnostic baroclinic pressure `phi_n = -psi_n / lambda_n`, `n >= 1`.
    pub fn phi_n(&self, n: usize, params: &PhysicalParams) -> Result<Array2<f64>> {
        let psi = self.psi_n(n)?;
        Ok(psi.mapv(|p| -p / params.lambda(n)))
    }

    /// Diagnostic vertical-velocity amplitude
    /// `w_n = -(d_x u_n + d_y v_n) / lambda_n`, `n >= 1`.
    pub fn w_n(&self, n: usize, grid: &Grid2D, params: &PhysicalParams) -> Result<Array2<f64>> {
        if n == 0 || n > self.n_max {
            return Err(Error::BarotropicModeForbidden("w_n"));
        }
        let mut w = grid.ddx(&self.u[n]);
        w += &grid.ddy(&self.v[n]);
        let lam = params.lambda(n);
        w.mapv_inplace(|d| -d / lam);
        Ok(w)
    }

    /// Named views over every prognostic array (for shape / finiteness scans).
    pub fn iter_named(&self) -> impl Iterator<Item = (String, &Array2<f64>)> {
        let us = self
            .u
            .iter()
            .enumerate()
            .map(|(n, a)| (format!("u[{n}]"), a));
        let vs = self
            .v
            .iter()
            .enumerate()
            .map(|(n, a)| (format!("v[{n}]"), a));
        let ps = self
            .psi
            .iter()
            .enumerate()
            .map(|(m, a)| (format!("psi[{}]", m + 1), a));
        us.chain(vs)
            .chain(std::iter::once(("phi0".to_string(), &self.phi0)))
            .chain(ps)
    }

    /// Error with the offending field name if any value is non-finite.
    pub fn check_finite(&self, step: usize) -> Result<()> {
        for (name, arr) in self.iter_named() {
            if arr.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { step, field: name });
            }
        }
        Ok(())
    }

    /// Evaluate one physical field on the horizontal grid at depth `z`.
    pub fn slice_at_depth(
        &self,
        field: PhysicalField,
        z: f64,
        grid: &Grid2D,
        params: &PhysicalParams,
    ) -> Result<Array2<f64>> {
        let mut out = grid.zeros();
        match field {
            PhysicalField::U | PhysicalField::V => {
                let amps = if field == PhysicalField::U {
                    &self.u
                } else {
                    &self.v
                };
                for (n, amp) in amps.iter().enumerate() {
                    let basis = evaluate_mode(BasisKind::U, n, z, params);
                    out.zip_mut_with(amp, |o, a| *o += a * basis);
                }
            }
            PhysicalField::Phi => {
                let basis0 = evaluate_mode(BasisKind::U, 0, z, params);
                out.zip_mut_with(&self.phi0, |o, a| *o += a * basis0);
                for n in 1..=self.n_max {
                    let basis = evaluate_mode(BasisKind::U, n, z, params);
                    let phi = self.phi_n(n, params)?;
                    out.zip_mut_with(&phi, |o, a| *o += a * basis);
                }
            }
            PhysicalField::Psi => {
                for n in 1..=self.n_max {
                    let basis = evaluate_mode(BasisKind::W, n, z, params);
                    out.zip_mut_with(self.psi_n(n)?, |o, a| *o += a * basis);
                }
            }
            PhysicalField::W => {
                for n in 1..=self.n_max {
                    let basis = evaluate_mode(BasisKind::W, n, z, params);
                    let w = self.w_n(n, grid, params)?;
                    out.zip_mut_with(&w, |o, a| *o += a * basis);
                }
            }
        }
        Ok(out)
    }
}

/// Physical (reconstructed) fields of the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhysicalField {
    /// Zonal velocity.
    U,
    /// Meridional velocity.
    V,
    /// Vertical velocity.
    W,
    /// Pressure.
    Phi,
    /// Buoyancy.
    Psi,
}

impl PhysicalField {
    pub fn name(self) -> &'static str {
        match self {
            PhysicalField::U => "u",
            PhysicalField::V => "v",
            PhysicalField::W => "w",
            PhysicalField::Phi => "phi",
            PhysicalField::Psi => "psi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "u" => PhysicalField::U,
            "v" => PhysicalField::V,
            "w" => PhysicalField::W,
            "phi" => PhysicalField::Phi,
            "psi" => PhysicalField::Psi,
            _ => return None,
        })
    }
}

/// X-view characteristics of one baroclinic mode: `xi = u - psi/N`,
/// `eta = u + psi/N`.
pub fn to_characteristics_x(
    u: &Array2<f64>,
    psi: &Array2<f64>,
    n_buoy: f64,
) -> (Array2<f64>, Array2<f64>) {
    let mut xi = u.clone();
    xi.zip_mut_with(psi, |x, p| *x -= p / n_buoy);
    let mut eta = u.clone();
    eta.zip_mut_with(psi, |e, p| *e += p / n_buoy);
    (xi, eta)
}

/// Invert the x-view: `u = (xi + eta)/2`, `psi = N (eta - xi)/2`.
pub fn from_characteristics_x(
    xi: &Array2<f64>,
    eta: &Array2<f64>,
    n_buoy: f64,
) -> (Array2<f64>, Array2<f64>) {
    let mut u = xi.clone();
    u.zip_mut_with(eta, |a, b| *a = 0.5 * (*a + b));
    let mut psi = eta.clone();
    psi.zip_mut_with(xi, |a, b| *a = 0.5 * n_buoy * (*a - b));
    (u, psi)
}

/// Y-view characteristics of one baroclinic mode: `alpha = v + psi/N`
/// (speed `-N/lambda_n`), `beta = v - psi/N` (speed `+N/lambda_n`).
pub fn to_characteristics_y(
    v: &Array2<f64>,
    psi: &Array2<f64>,
    n_buoy: f64,
) -> (Array2<f64>, Array2<f64>) {
    let mut alpha = v.clone();
    alpha.zip_mut_with(psi, |a, p| *a += p / n_buoy);
    let mut beta = v.clone();
    beta.zip_mut_with(psi, |b, p| *b -= p / n_buoy);
    (alpha, beta)
}

/// Invert the y-view: `v = (alpha + beta)/2`, `psi = N (alpha - beta)/2`.
pub fn from_characteristics_y(
    alpha: &Array2<f64>,
    beta: &Array2<f64>,
    n_buoy: f64,
) -> (Array2<f64>, Array2<f64>) {
    let mut v = alpha.clone();
    v.zip_mut_with(beta, |a, b| *a = 0.5 * (*a + b));
    let mut psi = alpha.clone();
    psi.zip_mut_with(beta, |a, b| *a = 0.5 * n_buoy * (*a - b));
    (v, psi)
}

/// Unweighted discrete L2 norm `sqrt(sum f_ij^2)`.
pub fn l2_norm(field: &Array2<f64>) -> f64 {
    field.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Max-abs norm.
pub fn linf_norm(field: &Array2<f64>) -> f64 {
    field.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> PhysicalParams {
        PhysicalParams::new(20.0, 1e-4, 1e-2, 1e4).unwrap()
    }

    fn grid() -> Grid2D {
        Grid2D::new(1e6, 5e5, 8, 6).unwrap()
    }

    #[test]
    fn x_view_point_example() {
        let g = grid();
        let u = Array2::from_elem((g.ny(), g.nx()), 3.0);
        let psi = Array2::from_elem((g.ny(), g.nx()), 0.02);
        let (xi, eta) = to_characteristics_x(&u, &psi, 0.01);
        assert!((xi[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((eta[(0, 0)] - 5.0).abs() < 1e-14);
        let (u2, psi2) = from_characteristics_x(&xi, &eta, 0.01);
        assert!((u2[(3, 4)] - 3.0).abs() < 1e-14);
        assert!((psi2[(3, 4)] - 0.02).abs() < 1e-14);
    }

    #[test]
    fn y_view_point_example() {
        let g = grid();
        let v = Array2::from_elem((g.ny(), g.nx()), 1.0);
        let psi = Array2::from_elem((g.ny(), g.nx()), 0.01);
        let (alpha, beta) = to_characteristics_y(&v, &psi, 0.01);
        assert!((alpha[(0, 0)] - 2.0).abs() < 1e-14);
        assert!(beta[(0, 0)].abs() < 1e-14);
    }

    #[test]
    fn diagnostics_reject_mode_zero() {
        let g = grid();
        let p = params();
        let s = ModalState::zeros(&g, 3);
        assert!(matches!(
            s.phi_n(0, &p),
            Err(Error::BarotropicModeForbidden(_))
        ));
        assert!(matches!(
            s.w_n(0, &g, &p),
            Err(Error::BarotropicModeForbidden(_))
        ));
        assert!(matches!(s.psi_n(4), Err(Error::BarotropicModeForbidden(_))));
    }

    #[test]
    fn w_diagnostic_on_linear_fields() {
        // u = a*x, v = b*y have exact one-sided and centered derivatives, so
        // w_n = -(a + b)/lambda_n everywhere.
        let g = grid();
        let p = params();
        let mut s = ModalState::zeros(&g, 2);
        let (a, b) = (3e-6, -2e-6);
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                s.u[1][(j, i)] = a * g.x(i);
                s.v[1][(j, i)] = b * g.y(j);
            }
        }
        let w = s.w_n(1, &g, &p).unwrap();
        let want = -(a + b) / p.lambda(1);
        for v in w.iter() {
            assert!((v - want).abs() < 1e-12 * want.abs());
        }
    }

    #[test]
    fn blow_up_reports_field_name() {
        let g = grid();
        let mut s = ModalState::zeros(&g, 2);
        s.v[2][(1, 1)] = f64::INFINITY;
        match s.check_finite(17) {
            Err(Error::BlowUp { step, field }) => {
                assert_eq!(step, 17);
                assert_eq!(field, "v[2]");
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn reconstruction_combines_modes_with_basis_values() {
        let g = grid();
        let p = params();
        let mut s = ModalState::zeros(&g, 2);
        s.u[0].fill(2.0);
        s.u[1].fill(3.0);
        let got = s
            .slice_at_depth(PhysicalField::U, -p.depth, &g, &p)
            .unwrap();
        let want = 2.0 / p.depth.sqrt() - 3.0 * (2.0 / p.depth).sqrt();
        assert!((got[(2, 5)] - want).abs() < 1e-14);

        // phi combines phi0 (U_0) with the diagnostic -psi_n/lambda_n (U_n).
        s.phi0.fill(10.0);
        s.psi_n_mut(1).unwrap().fill(0.5);
        let got = s.slice_at_depth(PhysicalField::Phi, 0.0, &g, &p).unwrap();
        let want = 10.0 / p.depth.sqrt() + (-0.5 / p.lambda(1)) * (2.0 / p.depth).sqrt();
        assert!((got[(0, 0)] - want).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn characteristic_transforms_are_involutions(
            u0 in -50.0f64..50.0,
            psi0 in -1.0f64..1.0,
            n_buoy in 1e-3f64..1e-1,
        ) {
            let g = Grid2D::new(1.0, 1.0, 4, 4).unwrap();
            let u = Array2::from_elem((g.ny(), g.nx()), u0);
            let psi = Array2::from_elem((g.ny(), g.nx()), psi0);
            let (xi, eta) = to_characteristics_x(&u, &psi, n_buoy);
            let (u2, psi2) = from_characteristics_x(&xi, &eta, n_buoy);
            prop_assert!((u2[(0, 0)] - u0).abs() <= 1e-12 * u0.abs().max(1.0));
            prop_assert!((psi2[(0, 0)] - psi0).abs() <= 1e-12 * psi0.abs().max(1.0));
            let (al, be) = to_characteristics_y(&u, &psi, n_buoy);
            let (v2, psi3) = from_characteristics_y(&al, &be, n_buoy);
            prop_assert!((v2[(0, 0)] - u0).abs() <= 1e-12 * u0.abs().max(1.0));
            prop_assert!((psi3[(0, 0)] - psi0).abs() <= 1e-12 * psi0.abs().max(1.0));
        }
    }
}
