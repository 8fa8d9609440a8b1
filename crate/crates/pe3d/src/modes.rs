//! Vertical eigenmodes of the rigid-lid channel and projections onto them.
//!
//! On `z` in `[-H, 0]` the basis is
//!
//! ```text
//! U_0 = 1/sqrt(H),   U_n(z) = sqrt(2/H) cos(lambda_n z),
//!                    W_n(z) = sqrt(2/H) sin(lambda_n z),   lambda_n = n*pi/H,
//! ```
//!
//! orthonormal in `L2(-H, 0)`. Horizontal velocities and pressure expand in
//! `U_n`; vertical velocity and buoyancy expand in `W_n`, which vanishes at
//! both lid and bottom. Mode `n >= 1` is advected with speeds
//! `U0 +/- N/lambda_n`, and its regime is decided by the sign of
//! `U0 - N/lambda_n`.

use crate::{Error, Result};

/// Relative tolerance of the resonance rejection test.
const RESONANCE_REL_TOL: f64 = 1e-9;

/// Background state and stratification of the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Mean zonal advection speed.
    pub u0: f64,
    /// Coriolis parameter.
    pub f: f64,
    /// Buoyancy frequency.
    pub n_buoy: f64,
    /// Channel depth.
    pub depth: f64,
}

impl PhysicalParams {
    /// Validate and build. Rejects non-positive `U0`, `N`, `H` and resonant
    /// stratification where `H*N/(pi*U0)` is an integer, which would make a
    /// characteristic speed vanish.
    pub fn new(u0: f64, f: f64, n_buoy: f64, depth: f64) -> Result<Self> {
        for (name, v) in [("U0", u0), ("f", f), ("N", n_buoy), ("H", depth)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite, got {v}"
                )));
            }
        }
        for (name, v) in [("U0", u0), ("N", n_buoy), ("H", depth)] {
            if v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let ratio = depth * n_buoy / (std::f64::consts::PI * u0);
        if (ratio - ratio.round()).abs() <= RESONANCE_REL_TOL * ratio.abs().max(1.0) {
            return Err(Error::ResonantStratification {
                value: ratio,
                tol: RESONANCE_REL_TOL,
            });
        }
        Ok(PhysicalParams {
            u0,
            f,
            n_buoy,
            depth,
        })
    }

    /// Vertical eigenvalue `lambda_n = n*pi/H`.
    pub fn lambda(&self, n: usize) -> f64 {
        n as f64 * std::f64::consts::PI / self.depth
    }

    /// Internal gravity-wave speed `N/lambda_n` of mode `n >= 1`.
    pub fn wave_speed(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::BarotropicModeForbidden("wave_speed"));
        }
        Ok(self.n_buoy / self.lambda(n))
    }

    /// Classify a mode by the sign of `U0 - N/lambda_n`.
    pub fn classify(&self, n: usize) -> ModeKind {
        if n == 0 {
            return ModeKind::Barotropic;
        }
        if self.u0 - self.n_buoy / self.lambda(n) < 0.0 {
            ModeKind::Subcritical
        } else {
            ModeKind::Supercritical
        }
    }

    /// Largest subcritical mode index (0 when even mode 1 is supercritical).
    pub fn critical_index(&self) -> usize {
        (self.depth * self.n_buoy / (std::f64::consts::PI * self.u0)).floor() as usize
    }
}

/// Advection regime of a vertical mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    /// `n = 0`: no vertical structure, handled by the pressure-correction step.
    Barotropic,
    /// `U0 - N/lambda_n < 0`: one characteristic enters from the outflow side.
    Subcritical,
    /// `U0 - N/lambda_n > 0`: all characteristics enter from the inflow side.
    Supercritical,
}

/// Which basis family to evaluate or project on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// Cosine family `U_n` (horizontal velocity, pressure).
    U,
    /// Sine family `W_n` (vertical velocity, buoyancy).
    W,
}

/// Evaluate basis function `n` of the given family at depth `z` in `[-H, 0]`.
pub fn evaluate_mode(kind: BasisKind, n: usize, z: f64, params: &PhysicalParams) -> f64 {
    let h = params.depth;
    match kind {
        BasisKind::U => {
            if n == 0 {
                1.0 / h.sqrt()
            } else {
                (2.0 / h).sqrt() * (params.lambda(n) * z).cos()
            }
        }
        BasisKind::W => {
            debug_assert!(n >= 1, "W_0 is identically zero");
            (2.0 / h).sqrt() * (params.lambda(n) * z).sin()
        }
    }
}

/// Uniform sample depths `z_l = -H + l*H/m` for `l = 0..=m`.
pub fn sample_depths(m: usize, params: &PhysicalParams) -> Vec<f64> {
    let h = params.depth;
    (0..=m).map(|l| -h + h * l as f64 / m as f64).collect()
}

/// Composite Simpson weights for `m` uniform intervals of width `h_z`
/// (`m` must be even).
pub(crate) fn simpson_weights(m: usize, h_z: f64) -> Vec<f64> {
    debug_assert!(m >= 2 && m.is_multiple_of(2));
    let mut w = vec![2.0; m + 1];
    for l in (1..m).step_by(2) {
        w[l] = 4.0;
    }
    w[0] = 1.0;
    w[m] = 1.0;
    for wl in &mut w {
        *wl *= h_z / 3.0;
    }
    w
}

/// Project samples of a profile on the uniform grid over `[-H, 0]` onto basis
/// function `n`, using composite Simpson quadrature. An odd interval count is
/// first refined by a factor of 4 with linear interpolation of the samples.
pub fn project_coefficient(
    samples: &[f64],
    kind: BasisKind,
    n: usize,
    params: &PhysicalParams,
) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two profile samples".into(),
        ));
    }
    let m = samples.len() - 1;
    let needed = 2 * n + 2;
    if m < needed.max(4) {
        return Err(Error::GridTooCoarse {
            intervals: m,
            n,
            needed: needed.max(4),
        });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "profile samples".into(),
        });
    }

    let refined;
    let (values, m_eff): (&[f64], usize) = if m.is_multiple_of(2) {
        (samples, m)
    } else {
        let mq = 4 * m;
        let mut v = Vec::with_capacity(mq + 1);
        for l in 0..=mq {
            let t = l as f64 / 4.0;
            let base = (t.floor() as usize).min(m - 1);
            let frac = t - base as f64;
            v.push(samples[base] * (1.0 - frac) + samples[base + 1] * frac);
        }
        refined = v;
        (&refined, mq)
    };

    let h_z = params.depth / m_eff as f64;
    let weights = simpson_weights(m_eff, h_z);
    let mut acc = 0.0;
    for l in 0..=m_eff {
        let z = -params.depth + h_z * l as f64;
        acc += weights[l] * values[l] * evaluate_mode(kind, n, z, params);
    }
    Ok(acc)
}

/// Evaluate a truncated modal expansion at depth `z`.
///
/// For `BasisKind::U`, `coeffs[m]` multiplies `U_m` (starting at `m = 0`);
/// for `BasisKind::W`, `coeffs[m]` multiplies `W_{m+1}` (starting at `m = 1`).
pub fn synthesize_profile(coeffs: &[f64], kind: BasisKind, z: f64, params: &PhysicalParams) -> f64 {
    let offset = match kind {
        BasisKind::U => 0,
        BasisKind::W => 1,
    };
    coeffs
        .iter()
        .enumerate()
        .map(|(m, c)| c * evaluate_mode(kind, m + offset, z, params))
        .sum()
}
