//! Full simulations, the built-in reference initial state, the one-way
//! nested experiment and its comparison metrics.

use std::collections::VecDeque;

use ndarray::{s, Array2};
use rayon::prelude::*;

use crate::boundary::{record_level, BoundaryProvider, SubRect, TraceSet};
use crate::grid::{Grid2D, TimeGrid};
use crate::modes::{evaluate_mode, project_coefficient, sample_depths, BasisKind, PhysicalParams};
use crate::nonlinear::assemble_sources;
use crate::poisson::PoissonSolver;
use crate::state::{linf_norm, ModalState, PhysicalField};
use crate::zero_mode::{step_zero_mode, ZeroModeBc};
use crate::{Error, Result};

/// Depth of the horizontal comparison plane, in meters.
pub const COMPARISON_DEPTH: f64 = -2500.0;

/// Vertical Simpson intervals used to project the initial state. Fixed and
/// fine, so the modal coefficients do not depend on the run's diagnostic
/// level count.
const INIT_QUAD_INTERVALS: usize = 2048;

/// Which initial state a driver starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    /// The built-in analytic test flow projected onto the retained modes.
    Analytic,
    /// All prognostic fields identically zero.
    Zero,
}

/// Everything one simulation needs besides its boundary provider.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: PhysicalParams,
    pub grid: Grid2D,
    pub time: TimeGrid,
    /// Highest retained baroclinic mode (0 = barotropic only).
    pub n_max: usize,
    /// Vertical segments used for physical-space reconstruction and norms.
    pub levels: usize,
    /// Emit norm samples (and snapshots) every `cadence` steps.
    pub cadence: usize,
    /// Initial state selected by the drivers.
    pub initial: InitialKind,
}

impl RunConfig {
    /// Build the configured initial state.
    pub fn initial_state(&self) -> Result<ModalState> {
        match self.initial {
            InitialKind::Analytic => initial_condition(&self.grid, &self.params, self.n_max),
            InitialKind::Zero => Ok(ModalState::zeros(&self.grid, self.n_max)),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cadence == 0 {
            return Err(Error::InvalidParameter(
                "output cadence must be at least 1".into(),
            ));
        }
        if self.levels < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 vertical levels, got {}",
                self.levels
            )));
        }
        if self.n_max > 64 {
            return Err(Error::InvalidParameter(format!(
                "mode count {} is unreasonably large for direct convolutions",
                self.n_max
            )));
        }
        Ok(())
    }
}

/// Reported (never enforced) time-step diagnostic of the partially implicit
/// scheme: the ratio `dt / (dx^2 + dy^2)^2` and the bound `dt <= 1/8`.
#[derive(Debug, Clone, Copy)]
pub struct StabilityDiagnostic {
    pub dt: f64,
    pub ratio: f64,
    pub dt_bound: f64,
    pub within_bound: bool,
}

pub fn stability_diagnostic(grid: &Grid2D, dt: f64) -> StabilityDiagnostic {
    let denom = (grid.dx * grid.dx + grid.dy * grid.dy).powi(2);
    StabilityDiagnostic {
        dt,
        ratio: dt / denom,
        dt_bound: 0.125,
        within_bound: dt <= 0.125,
    }
}

/// Modal-space L2 norms (Parseval: these equal the physical volume norms)
/// of the prognostic and diagnostic variables at one sample time.
#[derive(Debug, Clone, Copy)]
pub struct NormSample {
    pub step: usize,
    pub time: f64,
    pub u_l2: f64,
    pub v_l2: f64,
    pub psi_l2: f64,
    pub w_l2: f64,
    pub phi_l2: f64,
}

fn sample_norms(
    state: &ModalState,
    grid: &Grid2D,
    params: &PhysicalParams,
    step: usize,
    time: f64,
) -> Result<NormSample> {
    let area = grid.dx * grid.dy;
    let sq = |a: &Array2<f64>| a.iter().map(|x| x * x).sum::<f64>();
    let u_l2 = (state.u.iter().map(&sq).sum::<f64>() * area).sqrt();
    let v_l2 = (state.v.iter().map(&sq).sum::<f64>() * area).sqrt();
    let psi_l2 = (state.psi.iter().map(&sq).sum::<f64>() * area).sqrt();
    let mut phi_sq = sq(&state.phi0);
    let mut w_sq = 0.0;
    for n in 1..=state.n_max {
        let lam = params.lambda(n);
        phi_sq += sq(state.psi_n(n)?) / (lam * lam);
        w_sq += sq(&state.w_n(n, grid, params)?);
    }
    Ok(NormSample {
        step,
        time,
        u_l2,
        v_l2,
        psi_l2,
        w_l2: (w_sq * area).sqrt(),
        phi_l2: (phi_sq * area).sqrt(),
    })
}

/// Output of one simulation.
#[derive(Debug)]
pub struct Trajectory {
    pub final_state: ModalState,
    pub norm_series: Vec<NormSample>,
    /// Mean |du0/dx + dv0/dy| over the interior, one entry per time level.
    pub divergence_mean: Vec<f64>,
    /// Max |du0/dx + dv0/dy| over the interior, one entry per time level.
    pub divergence_max: Vec<f64>,
    /// Mean |divergence| restricted to the interior of the requested
    /// subrectangle, when one was given.
    pub divergence_rect_mean: Option<Vec<f64>>,
    /// Boundary traces recorded along the requested subrectangle.
    pub traces: Option<TraceSet>,
    pub stability: StabilityDiagnostic,
}

fn rect_mean_divergence(grid: &Grid2D, rect: &SubRect, u: &Array2<f64>, v: &Array2<f64>) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for j in rect.j0 + 1..rect.j0 + rect.j_count {
        for i in rect.i0 + 1..rect.i0 + rect.i_count {
            total += grid.divergence_at(u, v, i, j).abs();
            count += 1;
        }
    }
    total / count as f64
}

/// Advance `initial` through every step of `config`.
///
/// `record_rect` switches on trace recording along that subrectangle;
/// `divergence_rect` adds a divergence series restricted to one. `on_sample`
/// runs at step 0, every `cadence`-th step, and the final step.
pub fn run_simulation<F>(
    config: &RunConfig,
    provider: &BoundaryProvider,
    initial: ModalState,
    record_rect: Option<&SubRect>,
    divergence_rect: Option<&SubRect>,
    mut on_sample: F,
) -> Result<Trajectory>
where
    F: FnMut(usize, f64, &ModalState) -> Result<()>,
{
    config.validate()?;
    let grid = &config.grid;
    let params = &config.params;
    let dt = config.time.dt;
    let steps = config.time.step_count;

    initial.check_shape(grid)?;
    if initial.n_max != config.n_max {
        return Err(Error::InvalidParameter(format!(
            "initial state retains {} modes, config asks for {}",
            initial.n_max, config.n_max
        )));
    }
    initial.check_finite(0)?;
    if let BoundaryProvider::Playback(traces) = provider {
        traces.check_compatible(grid, dt)?;
    }

    let stability = stability_diagnostic(grid, dt);
    let solver = PoissonSolver::new(grid)?;
    let mut state = initial;

    let mut traces = match record_rect {
        Some(rect) => {
            rect.validate(grid)?;
            let mut set = TraceSet::new(dt, grid.dx, grid.dy);
            record_level(&mut set, &state, rect, params)?;
            Some((set, *rect))
        }
        None => None,
    };
    if let Some(rect) = divergence_rect {
        rect.validate(grid)?;
    }

    let mut divergence_mean = Vec::with_capacity(steps + 1);
    let mut divergence_max = Vec::with_capacity(steps + 1);
    let mut divergence_rect_mean = divergence_rect.map(|_| Vec::with_capacity(steps + 1));
    let push_divergence = |state: &ModalState,
                           mean: &mut Vec<f64>,
                           max: &mut Vec<f64>,
                           rect_mean: &mut Option<Vec<f64>>| {
        mean.push(grid.mean_abs_interior_divergence(&state.u[0], &state.v[0]));
        max.push(grid.max_interior_divergence(&state.u[0], &state.v[0]));
        if let (Some(series), Some(rect)) = (rect_mean.as_mut(), divergence_rect) {
            series.push(rect_mean_divergence(grid, rect, &state.u[0], &state.v[0]));
        }
    };
    push_divergence(
        &state,
        &mut divergence_mean,
        &mut divergence_max,
        &mut divergence_rect_mean,
    );

    let mut norm_series = vec![sample_norms(&state, grid, params, 0, 0.0)?];
    on_sample(0, 0.0, &state)?;

    for k in 0..steps {
        let step_to = k + 1;
        // Non-finite values surfacing inside a step are the run diverging,
        // not malformed input; classify them as such.
        let blow_up = |e: Error| match e {
            Error::NonFinite { context } => Error::BlowUp {
                step: step_to,
                field: context,
            },
            other => other,
        };
        let sources = assemble_sources(&state, grid, params)?;

        let bc0 = ZeroModeBc::from_provider(provider, step_to, grid)?;
        {
            let ModalState { u, v, phi0, .. } = &mut state;
            step_zero_mode(
                &mut u[0],
                &mut v[0],
                phi0,
                &sources.g0x,
                &sources.g0y,
                &bc0,
                grid,
                params,
                dt,
                &solver,
            )
            .map_err(blow_up)?;
        }

        {
            let ModalState { u, v, psi, .. } = &mut state;
            u[1..]
                .par_iter_mut()
                .zip(v[1..].par_iter_mut())
                .zip(psi.par_iter_mut())
                .enumerate()
                .try_for_each(|(idx, ((un, vn), psin))| {
                    crate::baroclinic::step_mode(
                        idx + 1,
                        un,
                        vn,
                        psin,
                        &sources.modes[idx],
                        provider,
                        step_to,
                        grid,
                        params,
                        dt,
                    )
                })
                .map_err(blow_up)?;
        }

        state.check_finite(step_to)?;
        push_divergence(
            &state,
            &mut divergence_mean,
            &mut divergence_max,
            &mut divergence_rect_mean,
        );
        if let Some((set, rect)) = &mut traces {
            record_level(set, &state, rect, params)?;
        }
        if step_to == steps || step_to % config.cadence == 0 {
            let time = config.time.time(step_to);
            norm_series.push(sample_norms(&state, grid, params, step_to, time)?);
            on_sample(step_to, time, &state)?;
        }
    }

    Ok(Trajectory {
        final_state: state,
        norm_series,
        divergence_mean,
        divergence_max,
        divergence_rect_mean,
        traces: traces.map(|(set, _)| set),
        stability,
    })
}

/// Bitwise restriction of a state to a subrectangle.
pub fn restrict_state(state: &ModalState, rect: &SubRect) -> ModalState {
    let window = s![
        rect.j0..=rect.j0 + rect.j_count,
        rect.i0..=rect.i0 + rect.i_count
    ];
    let cut = |a: &Array2<f64>| a.slice(window).to_owned();
    ModalState {
        n_max: state.n_max,
        u: state.u.iter().map(&cut).collect(),
        v: state.v.iter().map(&cut).collect(),
        phi0: cut(&state.phi0),
        psi: state.psi.iter().map(&cut).collect(),
    }
}

// ---------------------------------------------------------------------------
// Reference initial state
// ---------------------------------------------------------------------------

/// Analytic value of the built-in initial state at a physical point.
/// `u` and `v` are the deviations from the constant background `U0`.
pub fn reference_field(
    field: PhysicalField,
    x: f64,
    y: f64,
    z: f64,
    l1: f64,
    l2: f64,
    params: &PhysicalParams,
) -> f64 {
    use std::f64::consts::PI;
    let h = params.depth;
    let (a2x, a4x) = (2.0 * PI * x / l1, 4.0 * PI * x / l1);
    let (a2y, a4y) = (2.0 * PI * y / l2, 4.0 * PI * y / l2);
    match field {
        PhysicalField::U => {
            (x / l1) * (2.0 * PI / l2) * a2x.sin() * a2y.cos()
                + a4x.sin() * a4y.cos() * (PI * z / h).cos()
        }
        PhysicalField::V => {
            -(a2x.sin() + a2x * a2x.cos()) * a2y.sin() / l1
                + (l2 / l1) * (a4x.sin().powi(2) + a4x.sin() * a4y.sin() * (PI * z / h).cos())
        }
        PhysicalField::W => {
            -(4.0 * h / l1) * (a4x.sin() + a4x.cos()) * a4y.cos() * (PI * z / h).sin()
        }
        PhysicalField::Phi => {
            params.u0 * a2x.sin() * a2y.sin() * ((PI * z / h).cos() - (2.0 * PI * z / h).cos())
        }
        PhysicalField::Psi => {
            (PI * params.u0 / h)
                * a2x.sin()
                * a2y.sin()
                * (2.0 * (2.0 * PI * z / h).sin() - (PI * z / h).sin())
        }
    }
}

/// Project the reference initial state onto the first `n_max + 1` modes.
///
/// The analytic fields factor into horizontal envelopes times five vertical
/// profiles, so each profile is Simpson-projected once and the coefficients
/// are assembled per node; this is the same projection applied column by
/// column, just computed without redundancy.
pub fn initial_condition(
    grid: &Grid2D,
    params: &PhysicalParams,
    n_max: usize,
) -> Result<ModalState> {
    use std::f64::consts::PI;
    let h = params.depth;
    let depths = sample_depths(INIT_QUAD_INTERVALS, params);
    let profile = |f: &dyn Fn(f64) -> f64| depths.iter().map(|&z| f(z)).collect::<Vec<f64>>();
    let ones = profile(&|_| 1.0);
    let cos1 = profile(&|z| (PI * z / h).cos());
    let cos2 = profile(&|z| (2.0 * PI * z / h).cos());
    let sin1 = profile(&|z| (PI * z / h).sin());
    let sin2 = profile(&|z| (2.0 * PI * z / h).sin());

    let mut p_one_u = Vec::with_capacity(n_max + 1);
    let mut p_cos1_u = Vec::with_capacity(n_max + 1);
    let mut p_cos2_u = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        p_one_u.push(project_coefficient(&ones, BasisKind::U, n, params)?);
        p_cos1_u.push(project_coefficient(&cos1, BasisKind::U, n, params)?);
        p_cos2_u.push(project_coefficient(&cos2, BasisKind::U, n, params)?);
    }
    let mut p_sin1_w = Vec::with_capacity(n_max);
    let mut p_sin2_w = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        p_sin1_w.push(project_coefficient(&sin1, BasisKind::W, n, params)?);
        p_sin2_w.push(project_coefficient(&sin2, BasisKind::W, n, params)?);
    }
    let phi0_profile = p_cos1_u[0] - p_cos2_u[0];

    let (l1, l2) = (grid.l1(), grid.l2());
    let mut state = ModalState::zeros(grid, n_max);
    for j in 0..grid.ny() {
        let y = grid.y(j);
        let (a2y, a4y) = (2.0 * PI * y / l2, 4.0 * PI * y / l2);
        for i in 0..grid.nx() {
            let x = grid.x(i);
            let (a2x, a4x) = (2.0 * PI * x / l1, 4.0 * PI * x / l1);

            let env_u_flat = (x / l1) * (2.0 * PI / l2) * a2x.sin() * a2y.cos();
            let env_u_cos1 = a4x.sin() * a4y.cos();
            let env_v_flat =
                -(a2x.sin() + a2x * a2x.cos()) * a2y.sin() / l1 + (l2 / l1) * a4x.sin().powi(2);
            let env_v_cos1 = (l2 / l1) * a4x.sin() * a4y.sin();
            let env_phi = params.u0 * a2x.sin() * a2y.sin();
            let env_psi = (PI * params.u0 / h) * a2x.sin() * a2y.sin();

            for n in 0..=n_max {
                state.u[n][(j, i)] = env_u_flat * p_one_u[n] + env_u_cos1 * p_cos1_u[n];
                state.v[n][(j, i)] = env_v_flat * p_one_u[n] + env_v_cos1 * p_cos1_u[n];
            }
            state.phi0[(j, i)] = env_phi * phi0_profile;
            for n in 1..=n_max {
                state.psi[n - 1][(j, i)] = env_psi * (2.0 * p_sin2_w[n - 1] - p_sin1_w[n - 1]);
            }
        }
    }
    Ok(state)
}

// ---------------------------------------------------------------------------
// Comparison metrics
// ---------------------------------------------------------------------------

/// Norm used by the comparison metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    Linf,
}

/// Discrete norm of a horizontal field: `L2` is area-weighted root sum of
/// squares, `Linf` the maximum magnitude.
pub fn field_norm(field: &Array2<f64>, kind: NormKind, grid: &Grid2D) -> f64 {
    match kind {
        NormKind::L2 => (field.iter().map(|x| x * x).sum::<f64>() * grid.dx * grid.dy).sqrt(),
        NormKind::Linf => linf_norm(field),
    }
}

/// `||inner - outer|| / ||outer||`; NaN when the denominator vanishes.
pub fn relative_error(
    inner: &Array2<f64>,
    outer: &Array2<f64>,
    kind: NormKind,
    grid: &Grid2D,
) -> f64 {
    let diff = inner - outer;
    let denom = field_norm(outer, kind, grid);
    if denom == 0.0 {
        return f64::NAN;
    }
    field_norm(&diff, kind, grid) / denom
}

/// The five compared physical variables, in report order.
pub const COMPARED_FIELDS: [PhysicalField; 5] = [
    PhysicalField::U,
    PhysicalField::V,
    PhysicalField::W,
    PhysicalField::Psi,
    PhysicalField::Phi,
];

/// One variable at one sample time in one norm.
#[derive(Debug, Clone, Copy)]
pub struct VariableComparison {
    pub outer_norm: f64,
    pub inner_norm: f64,
    /// NaN when `outer_norm` is zero (flagged, never silently dropped).
    pub relative_error: f64,
}

/// All comparisons at one sample time. First index follows
/// [`COMPARED_FIELDS`], second is `[L2, Linf]`.
#[derive(Debug, Clone, Copy)]
pub struct ComparisonSample {
    pub step: usize,
    pub time: f64,
    /// Metrics on the horizontal plane at [`COMPARISON_DEPTH`].
    pub slice: [[VariableComparison; 2]; 5],
    /// Metrics over the full 3-D volume (trapezoid in the vertical).
    pub volume: [[VariableComparison; 2]; 5],
}

/// Comparison of a nested run against the host run restricted to the guest
/// domain, plus the mean-divergence series of all three computed cases.
pub struct ComparisonReport {
    pub depth: f64,
    pub samples: Vec<ComparisonSample>,
    pub divergence_outer: Vec<f64>,
    pub divergence_inner_direct: Vec<f64>,
    pub divergence_inner_nested: Vec<f64>,
}

/// Modal amplitude arrays of one physical variable, with the basis family
/// and the index of the first mode.
fn modal_amplitudes(
    state: &ModalState,
    field: PhysicalField,
    grid: &Grid2D,
    params: &PhysicalParams,
) -> Result<(BasisKind, usize, Vec<Array2<f64>>)> {
    Ok(match field {
        PhysicalField::U => (BasisKind::U, 0, state.u.clone()),
        PhysicalField::V => (BasisKind::U, 0, state.v.clone()),
        PhysicalField::Phi => {
            let mut amps = vec![state.phi0.clone()];
            for n in 1..=state.n_max {
                amps.push(state.phi_n(n, params)?);
            }
            (BasisKind::U, 0, amps)
        }
        PhysicalField::Psi => (BasisKind::W, 1, state.psi.clone()),
        PhysicalField::W => {
            let mut amps = Vec::with_capacity(state.n_max);
            for n in 1..=state.n_max {
                amps.push(state.w_n(n, grid, params)?);
            }
            (BasisKind::W, 1, amps)
        }
    })
}

fn reconstruct_at(
    amps: &(BasisKind, usize, Vec<Array2<f64>>),
    z: f64,
    grid: &Grid2D,
    params: &PhysicalParams,
) -> Array2<f64> {
    let (kind, first, arrays) = amps;
    let mut out = grid.zeros();
    for (m, amp) in arrays.iter().enumerate() {
        let basis = evaluate_mode(*kind, first + m, z, params);
        out.zip_mut_with(amp, |o, a| *o += a * basis);
    }
    out
}

/// All comparison metrics between a restricted host state and a guest state
/// living on the same grid.
pub fn compare_states(
    outer: &ModalState,
    inner: &ModalState,
    grid: &Grid2D,
    params: &PhysicalParams,
    levels: usize,
    step: usize,
    time: f64,
) -> Result<ComparisonSample> {
    let zero = VariableComparison {
        outer_norm: 0.0,
        inner_norm: 0.0,
        relative_error: 0.0,
    };
    let mut slice = [[zero; 2]; 5];
    let mut volume = [[zero; 2]; 5];
    let dz = params.depth / levels as f64;
    let area = grid.dx * grid.dy;

    for (vi, field) in COMPARED_FIELDS.iter().enumerate() {
        let amps_outer = modal_amplitudes(outer, *field, grid, params)?;
        let amps_inner = modal_amplitudes(inner, *field, grid, params)?;

        let outer_slice = reconstruct_at(&amps_outer, COMPARISON_DEPTH, grid, params);
        let inner_slice = reconstruct_at(&amps_inner, COMPARISON_DEPTH, grid, params);
        for (ki, kind) in [NormKind::L2, NormKind::Linf].iter().enumerate() {
            slice[vi][ki] = VariableComparison {
                outer_norm: field_norm(&outer_slice, *kind, grid),
                inner_norm: field_norm(&inner_slice, *kind, grid),
                relative_error: relative_error(&inner_slice, &outer_slice, *kind, grid),
            };
        }

        // Volume norms: trapezoid in z over `levels + 1` reconstruction
        // planes.
        let (mut o_sq, mut i_sq, mut d_sq) = (0.0, 0.0, 0.0);
        let (mut o_inf, mut i_inf, mut d_inf) = (0.0f64, 0.0f64, 0.0f64);
        for l in 0..=levels {
            let z = -params.depth + dz * l as f64;
            let weight = if l == 0 || l == levels { 0.5 * dz } else { dz };
            let o = reconstruct_at(&amps_outer, z, grid, params);
            let i = reconstruct_at(&amps_inner, z, grid, params);
            let d = &i - &o;
            let ssum = |a: &Array2<f64>| a.iter().map(|x| x * x).sum::<f64>();
            o_sq += weight * ssum(&o);
            i_sq += weight * ssum(&i);
            d_sq += weight * ssum(&d);
            o_inf = o_inf.max(linf_norm(&o));
            i_inf = i_inf.max(linf_norm(&i));
            d_inf = d_inf.max(linf_norm(&d));
        }
        let rel = |num: f64, den: f64| if den == 0.0 { f64::NAN } else { num / den };
        volume[vi][0] = VariableComparison {
            outer_norm: (o_sq * area).sqrt(),
            inner_norm: (i_sq * area).sqrt(),
            relative_error: rel((d_sq * area).sqrt(), (o_sq * area).sqrt()),
        };
        volume[vi][1] = VariableComparison {
            outer_norm: o_inf,
            inner_norm: i_inf,
            relative_error: rel(d_inf, o_inf),
        };
    }
    Ok(ComparisonSample {
        step,
        time,
        slice,
        volume,
    })
}

/// Result of the full nested experiment.
pub struct NestedExperiment {
    pub outer: Trajectory,
    pub inner_nested: Trajectory,
    pub inner_direct: Trajectory,
    pub report: ComparisonReport,
    pub inner_grid: Grid2D,
}

/// Run the host simulation with homogeneous boundary values while recording
/// traces along `rect`, then replay them on the guest domain, and also run
/// the guest domain directly with homogeneous values as a control. Compare
/// guest against restricted host at every sample time.
pub fn run_nested_experiment<FO, FI>(
    config: &RunConfig,
    rect: &SubRect,
    outer_initial: ModalState,
    mut outer_sink: FO,
    mut inner_sink: FI,
) -> Result<NestedExperiment>
where
    FO: FnMut(usize, f64, &ModalState) -> Result<()>,
    FI: FnMut(usize, f64, &ModalState) -> Result<()>,
{
    config.validate()?;
    rect.validate(&config.grid)?;
    let inner_grid = rect.inner_grid(&config.grid)?;
    let inner_initial = restrict_state(&outer_initial, rect);
    let params = config.params;
    let levels = config.levels;

    // Host run: homogeneous boundary, trace recording, restricted samples.
    let mut restricted: VecDeque<(usize, f64, ModalState)> = VecDeque::new();
    let mut outer = run_simulation(
        config,
        &BoundaryProvider::Homogeneous,
        outer_initial,
        Some(rect),
        Some(rect),
        |step, time, state| {
            restricted.push_back((step, time, restrict_state(state, rect)));
            outer_sink(step, time, state)
        },
    )?;
    let traces = outer.traces.take().expect("recording was requested");

    let inner_config = RunConfig {
        params,
        grid: inner_grid.clone(),
        time: config.time,
        n_max: config.n_max,
        levels,
        cadence: config.cadence,
        initial: config.initial,
    };

    // Guest run fed by the recorded traces, compared on the fly.
    let mut samples = Vec::new();
    let playback = BoundaryProvider::Playback(traces);
    let inner_nested = run_simulation(
        &inner_config,
        &playback,
        inner_initial.clone(),
        None,
        None,
        |step, time, state| {
            let (outer_step, _, outer_state) = restricted
                .pop_front()
                .ok_or_else(|| Error::TraceMismatch("sample cadence mismatch".into()))?;
            if outer_step != step {
                return Err(Error::TraceMismatch(format!(
                    "host sampled step {outer_step}, guest step {step}"
                )));
            }
            samples.push(compare_states(
                &outer_state,
                state,
                &inner_grid,
                &params,
                levels,
                step,
                time,
            )?);
            inner_sink(step, time, state)
        },
    )?;

    // Control: the guest domain run directly with homogeneous values.
    let inner_direct = run_simulation(
        &inner_config,
        &BoundaryProvider::Homogeneous,
        inner_initial,
        None,
        None,
        |_, _, _| Ok(()),
    )?;

    let report = ComparisonReport {
        depth: COMPARISON_DEPTH,
        samples,
        divergence_outer: outer
            .divergence_rect_mean
            .clone()
            .expect("rect divergence was requested"),
        divergence_inner_direct: inner_direct.divergence_mean.clone(),
        divergence_inner_nested: inner_nested.divergence_mean.clone(),
    };
    Ok(NestedExperiment {
        outer,
        inner_nested,
        inner_direct,
        report,
        inner_grid,
    })
}
