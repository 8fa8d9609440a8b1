//! Modal projections of the advective nonlinearity and source assembly.
//!
//! For an advected quantity `theta` the physical-space nonlinearity is
//!
//! ```text
//! B(theta) = u d_x(theta) + v d_y(theta) + w d_z(theta).
//! ```
//!
//! Expanding every field in the vertical basis and projecting `B` back onto a
//! basis function turns the `z`-integrals of triple products into finite
//! convolutions over mode indices, because products of two cosines / sines
//! reduce to cosines and sines of sum and difference frequencies. With
//! `s1 = 1/sqrt(H)` and `s2 = 1/sqrt(2H)` the exact weights are `s1` whenever
//! the barotropic function joins the product and `s2` otherwise. The
//! convolution formulas below are validated against direct quadrature by
//! [`quadrature_oracle`].
//!
//! Truncation note: coefficients above `n_max` are treated as zero, so each
//! sum runs only while every participating index stays within the retained
//! band.

use ndarray::{Array2, Zip};
use rayon::prelude::*;

use crate::grid::Grid2D;
use crate::modes::{evaluate_mode, simpson_weights, BasisKind, PhysicalParams};
use crate::state::ModalState;
use crate::{Error, Result};

/// Which modal projection of the nonlinearity to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BIntegralKind {
    /// `B(u)` projected on `U_0`: advective forcing of `u_0`.
    UZero,
    /// `B(v)` projected on `U_0`: advective forcing of `v_0`.
    VZero,
    /// `B(u)` projected on `U_n`, `n >= 1`.
    UMode(usize),
    /// `B(v)` projected on `U_n`, `n >= 1`.
    VMode(usize),
    /// `B(psi)` projected on `W_n`, `n >= 1`.
    PsiMode(usize),
}

impl BIntegralKind {
    fn validate(self, n_max: usize) -> Result<()> {
        match self {
            BIntegralKind::UZero | BIntegralKind::VZero => Ok(()),
            BIntegralKind::UMode(n) | BIntegralKind::VMode(n) | BIntegralKind::PsiMode(n) => {
                if n == 0 {
                    Err(Error::BarotropicModeForbidden(
                        "baroclinic projection index",
                    ))
                } else if n > n_max {
                    Err(Error::InvalidParameter(format!(
                        "projection index {n} exceeds retained band {n_max}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Horizontal derivatives of every modal coefficient plus the diagnostic
/// vertical-velocity amplitudes, shared by all projections of one state.
pub struct ModalDerivatives {
    /// `d_x u_n`, `d_y u_n` for `n = 0..=n_max`.
    pub dxu: Vec<Array2<f64>>,
    pub dyu: Vec<Array2<f64>>,
    /// `d_x v_n`, `d_y v_n` for `n = 0..=n_max`.
    pub dxv: Vec<Array2<f64>>,
    pub dyv: Vec<Array2<f64>>,
    /// `d_x psi_n`, `d_y psi_n`; entry `n - 1` holds mode `n`.
    pub dxpsi: Vec<Array2<f64>>,
    pub dypsi: Vec<Array2<f64>>,
    /// Diagnostic `w_n`; entry `n - 1` holds mode `n`.
    pub w: Vec<Array2<f64>>,
}

impl ModalDerivatives {
    /// Differentiate every prognostic array of `state` once.
    pub fn compute(state: &ModalState, grid: &Grid2D, params: &PhysicalParams) -> Result<Self> {
        state.check_shape(grid)?;
        let dxu = state.u.iter().map(|a| grid.ddx(a)).collect();
        let dyu = state.u.iter().map(|a| grid.ddy(a)).collect();
        let dxv = state.v.iter().map(|a| grid.ddx(a)).collect();
        let dyv = state.v.iter().map(|a| grid.ddy(a)).collect();
        let dxpsi = state.psi.iter().map(|a| grid.ddx(a)).collect();
        let dypsi = state.psi.iter().map(|a| grid.ddy(a)).collect();
        let w = (1..=state.n_max)
            .map(|n| state.w_n(n, grid, params))
            .collect::<Result<Vec<_>>>()?;
        Ok(ModalDerivatives {
            dxu,
            dyu,
            dxv,
            dyv,
            dxpsi,
            dypsi,
            w,
        })
    }
}

/// `out += coef * (u_a * dx_b + v_a * dy_b)` pointwise.
fn add_advection(
    out: &mut Array2<f64>,
    coef: f64,
    ua: &Array2<f64>,
    va: &Array2<f64>,
    dxb: &Array2<f64>,
    dyb: &Array2<f64>,
) {
    Zip::from(out)
        .and(ua)
        .and(va)
        .and(dxb)
        .and(dyb)
        .for_each(|o, &u, &v, &dx, &dy| {
            *o += coef * (u * dx + v * dy);
        });
}

/// `out += coef * w * theta` pointwise (vertical-transport contribution).
fn add_stretch(out: &mut Array2<f64>, coef: f64, w: &Array2<f64>, theta: &Array2<f64>) {
    Zip::from(out)
        .and(w)
        .and(theta)
        .for_each(|o, &wv, &tv| *o += coef * wv * tv);
}

/// Evaluate one modal projection of the nonlinearity using precomputed
/// derivatives.
#[allow(clippy::needless_range_loop)] // `m` indexes parallel mode arrays and enters coefficients
pub fn b_integral_with(
    state: &ModalState,
    d: &ModalDerivatives,
    kind: BIntegralKind,
    params: &PhysicalParams,
) -> Result<Array2<f64>> {
    kind.validate(state.n_max)?;
    let n_max = state.n_max;
    let s1 = 1.0 / params.depth.sqrt();
    let s2 = 1.0 / (2.0 * params.depth).sqrt();
    let mut out = Array2::zeros(state.phi0.raw_dim());

    match kind {
        BIntegralKind::UZero | BIntegralKind::VZero => {
            let (theta, dxt, dyt) = if kind == BIntegralKind::UZero {
                (&state.u, &d.dxu, &d.dyu)
            } else {
                (&state.v, &d.dxv, &d.dyv)
            };
            for m in 0..=n_max {
                add_advection(&mut out, s1, &state.u[m], &state.v[m], &dxt[m], &dyt[m]);
            }
            for m in 1..=n_max {
                add_stretch(&mut out, -s1 * params.lambda(m), &d.w[m - 1], &theta[m]);
            }
        }
        BIntegralKind::UMode(n) | BIntegralKind::VMode(n) => {
            let (theta, dxt, dyt) = if matches!(kind, BIntegralKind::UMode(_)) {
                (&state.u, &d.dxu, &d.dyu)
            } else {
                (&state.v, &d.dxv, &d.dyv)
            };
            add_advection(&mut out, s1, &state.u[0], &state.v[0], &dxt[n], &dyt[n]);
            add_advection(&mut out, s1, &state.u[n], &state.v[n], &dxt[0], &dyt[0]);
            for m in 1..n {
                add_advection(
                    &mut out,
                    s2,
                    &state.u[n - m],
                    &state.v[n - m],
                    &dxt[m],
                    &dyt[m],
                );
            }
            for m in (n + 1)..=n_max {
                add_advection(
                    &mut out,
                    s2,
                    &state.u[m - n],
                    &state.v[m - n],
                    &dxt[m],
                    &dyt[m],
                );
            }
            for m in 1..=(n_max - n) {
                add_advection(
                    &mut out,
                    s2,
                    &state.u[m + n],
                    &state.v[m + n],
                    &dxt[m],
                    &dyt[m],
                );
            }
            for m in 1..n {
                add_stretch(&mut out, s2 * params.lambda(m), &d.w[n - m - 1], &theta[m]);
            }
            for m in (n + 1)..=n_max {
                add_stretch(&mut out, -s2 * params.lambda(m), &d.w[m - n - 1], &theta[m]);
            }
            for m in 1..=(n_max - n) {
                add_stretch(&mut out, -s2 * params.lambda(m), &d.w[m + n - 1], &theta[m]);
            }
        }
        BIntegralKind::PsiMode(n) => {
            add_advection(
                &mut out,
                s1,
                &state.u[0],
                &state.v[0],
                &d.dxpsi[n - 1],
                &d.dypsi[n - 1],
            );
            for m in 1..n {
                add_advection(
                    &mut out,
                    s2,
                    &state.u[n - m],
                    &state.v[n - m],
                    &d.dxpsi[m - 1],
                    &d.dypsi[m - 1],
                );
            }
            for m in (n + 1)..=n_max {
                add_advection(
                    &mut out,
                    s2,
                    &state.u[m - n],
                    &state.v[m - n],
                    &d.dxpsi[m - 1],
                    &d.dypsi[m - 1],
                );
            }
            for m in 1..=(n_max - n) {
                add_advection(
                    &mut out,
                    -s2,
                    &state.u[m + n],
                    &state.v[m + n],
                    &d.dxpsi[m - 1],
                    &d.dypsi[m - 1],
                );
            }
            for m in 1..n {
                add_stretch(
                    &mut out,
                    s2 * params.lambda(m),
                    &d.w[n - m - 1],
                    &state.psi[m - 1],
                );
            }
            for m in 1..=(n_max - n) {
                add_stretch(
                    &mut out,
                    s2 * params.lambda(m),
                    &d.w[m + n - 1],
                    &state.psi[m - 1],
                );
            }
            for m in (n + 1)..=n_max {
                add_stretch(
                    &mut out,
                    -s2 * params.lambda(m),
                    &d.w[m - n - 1],
                    &state.psi[m - 1],
                );
            }
        }
    }
    Ok(out)
}

/// Evaluate one modal projection of the nonlinearity from scratch.
pub fn b_integral(
    state: &ModalState,
    kind: BIntegralKind,
    grid: &Grid2D,
    params: &PhysicalParams,
) -> Result<Array2<f64>> {
    let d = ModalDerivatives::compute(state, grid, params)?;
    b_integral_with(state, &d, kind, params)
}

/// Reference evaluation of the same projection by direct vertical quadrature.
///
/// The fields are synthesized pointwise in `z` on `z_intervals` uniform
/// levels, the nonlinearity is formed in physical space, and the result is
/// integrated against the target basis function with composite Simpson
/// quadrature. Horizontal derivatives intentionally reuse the same finite
/// differences as the production path: the convolution formulas only
/// restructure the vertical integrals, which is what this oracle probes.
#[allow(clippy::needless_range_loop)] // level index enters both the weights and the basis arguments
pub fn quadrature_oracle(
    state: &ModalState,
    kind: BIntegralKind,
    grid: &Grid2D,
    params: &PhysicalParams,
    z_intervals: usize,
) -> Result<Array2<f64>> {
    kind.validate(state.n_max)?;
    let n_max = state.n_max;
    let d = ModalDerivatives::compute(state, grid, params)?;
    let m_z = if z_intervals.is_multiple_of(2) {
        z_intervals.max(4)
    } else {
        (z_intervals + 1).max(4)
    };
    let h = params.depth;
    let hz = h / m_z as f64;
    let weights = simpson_weights(m_z, hz);

    let shape = state.phi0.raw_dim();
    let mut out = Array2::<f64>::zeros(shape);
    let mut uz = Array2::<f64>::zeros(shape);
    let mut vz = Array2::<f64>::zeros(shape);
    let mut wz = Array2::<f64>::zeros(shape);
    let mut dxt = Array2::<f64>::zeros(shape);
    let mut dyt = Array2::<f64>::zeros(shape);
    let mut dzt = Array2::<f64>::zeros(shape);

    for l in 0..=m_z {
        let z = -h + hz * l as f64;
        uz.fill(0.0);
        vz.fill(0.0);
        wz.fill(0.0);
        dxt.fill(0.0);
        dyt.fill(0.0);
        dzt.fill(0.0);

        for m in 0..=n_max {
            let um = evaluate_mode(BasisKind::U, m, z, params);
            uz.zip_mut_with(&state.u[m], |o, &a| *o += a * um);
            vz.zip_mut_with(&state.v[m], |o, &a| *o += a * um);
        }
        for m in 1..=n_max {
            let wm = evaluate_mode(BasisKind::W, m, z, params);
            wz.zip_mut_with(&d.w[m - 1], |o, &a| *o += a * wm);
        }

        match kind {
            BIntegralKind::UZero
            | BIntegralKind::VZero
            | BIntegralKind::UMode(_)
            | BIntegralKind::VMode(_) => {
                let zonal = matches!(kind, BIntegralKind::UZero | BIntegralKind::UMode(_));
                let (coef, dxc, dyc) = if zonal {
                    (&state.u, &d.dxu, &d.dyu)
                } else {
                    (&state.v, &d.dxv, &d.dyv)
                };
                for m in 0..=n_max {
                    let um = evaluate_mode(BasisKind::U, m, z, params);
                    dxt.zip_mut_with(&dxc[m], |o, &a| *o += a * um);
                    dyt.zip_mut_with(&dyc[m], |o, &a| *o += a * um);
                }
                // d/dz U_m = -lambda_m W_m.
                for m in 1..=n_max {
                    let dm = -params.lambda(m) * evaluate_mode(BasisKind::W, m, z, params);
                    dzt.zip_mut_with(&coef[m], |o, &a| *o += a * dm);
                }
            }
            BIntegralKind::PsiMode(_) => {
                for m in 1..=n_max {
                    let wm = evaluate_mode(BasisKind::W, m, z, params);
                    dxt.zip_mut_with(&d.dxpsi[m - 1], |o, &a| *o += a * wm);
                    dyt.zip_mut_with(&d.dypsi[m - 1], |o, &a| *o += a * wm);
                }
                // d/dz W_m = lambda_m U_m.
                for m in 1..=n_max {
                    let dm = params.lambda(m) * evaluate_mode(BasisKind::U, m, z, params);
                    dzt.zip_mut_with(&state.psi[m - 1], |o, &a| *o += a * dm);
                }
            }
        }

        let basis = match kind {
            BIntegralKind::UZero | BIntegralKind::VZero => {
                evaluate_mode(BasisKind::U, 0, z, params)
            }
            BIntegralKind::UMode(n) | BIntegralKind::VMode(n) => {
                evaluate_mode(BasisKind::U, n, z, params)
            }
            BIntegralKind::PsiMode(n) => evaluate_mode(BasisKind::W, n, z, params),
        };
        let scale = weights[l] * basis;
        Zip::from(&mut out)
            .and(&uz)
            .and(&vz)
            .and(&dxt)
            .and(&dyt)
            .for_each(|o, &u, &v, &dx, &dy| *o += scale * (u * dx + v * dy));
        Zip::from(&mut out)
            .and(&wz)
            .and(&dzt)
            .for_each(|o, &w, &dz| *o += scale * w * dz);
    }
    Ok(out)
}

/// Per-mode forcing tendencies in characteristic variables.
///
/// `xi`, `v` and `eta` are the right-hand sides of the transport equations
/// for `xi = u - psi/N`, `v`, and `eta = u + psi/N`; an explicit update adds
/// `dt` times the entry.
pub struct CharacteristicSources {
    pub xi: Array2<f64>,
    pub v: Array2<f64>,
    pub eta: Array2<f64>,
}

/// All forcing tendencies needed for one time step.
pub struct SourceBundle {
    /// Barotropic forcing `g0x = I_0(u)`; it appears with a minus sign on the
    /// right-hand side of the `u_0` momentum equation.
    pub g0x: Array2<f64>,
    /// Barotropic forcing `g0y = I_0(v) + f * U0 * sqrt(H)`; the second term
    /// is the rotation of the background stream. Enters the `v_0` equation
    /// with a minus sign.
    pub g0y: Array2<f64>,
    /// Characteristic sources of mode `n` at entry `n - 1`.
    pub modes: Vec<CharacteristicSources>,
}

/// Assemble every forcing tendency of the current state.
///
/// Mode `n >= 1` receives
///
/// ```text
/// s_xi  = f v_n - I_u(n) + I_psi(n)/N,
/// s_v   = -f u_n - I_v(n),
/// s_eta = f v_n - I_u(n) - I_psi(n)/N,
/// ```
///
/// obtained by pairing the momentum and buoyancy forcings with the
/// characteristic weights `(1, 0, -1/N)` and `(1, 0, +1/N)`.
pub fn assemble_sources(
    state: &ModalState,
    grid: &Grid2D,
    params: &PhysicalParams,
) -> Result<SourceBundle> {
    let d = ModalDerivatives::compute(state, grid, params)?;
    let g0x = b_integral_with(state, &d, BIntegralKind::UZero, params)?;
    let mut g0y = b_integral_with(state, &d, BIntegralKind::VZero, params)?;
    let background = params.f * params.u0 * params.depth.sqrt();
    g0y.mapv_inplace(|v| v + background);

    let modes = (1..=state.n_max)
        .into_par_iter()
        .map(|n| -> Result<CharacteristicSources> {
            let iu = b_integral_with(state, &d, BIntegralKind::UMode(n), params)?;
            let iv = b_integral_with(state, &d, BIntegralKind::VMode(n), params)?;
            let ipsi = b_integral_with(state, &d, BIntegralKind::PsiMode(n), params)?;
            let f = params.f;
            let inv_n = 1.0 / params.n_buoy;

            let mut xi = Array2::zeros(state.phi0.raw_dim());
            Zip::from(&mut xi)
                .and(&state.v[n])
                .and(&iu)
                .and(&ipsi)
                .for_each(|o, &vv, &a, &b| *o = f * vv - a + inv_n * b);
            let mut sv = Array2::zeros(state.phi0.raw_dim());
            Zip::from(&mut sv)
                .and(&state.u[n])
                .and(&iv)
                .for_each(|o, &uu, &a| *o = -f * uu - a);
            let mut eta = Array2::zeros(state.phi0.raw_dim());
            Zip::from(&mut eta)
                .and(&state.v[n])
                .and(&iu)
                .and(&ipsi)
                .for_each(|o, &vv, &a, &b| *o = f * vv - a - inv_n * b);
            Ok(CharacteristicSources { xi, v: sv, eta })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SourceBundle { g0x, g0y, modes })
}
