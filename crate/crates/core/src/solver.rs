//! Explicit finite-difference evolution of the regularized problems.
//!
//! Forward Euler in time, coefficients frozen at the current level, central
//! differences in space (three-point second differences, four-corner mixed
//! difference). Dirichlet data is imposed on every boundary node of the cube
//! or half-cube at each new time level.

use std::sync::Arc;

use crate::coefficients::{CoefficientParams, Family};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{Domain, Field, Grid, SpaceTimeSolution};
use crate::linalg::{SymMatrix, Vector};

pub const CFL_SAFETY: f64 = 0.4;

/// Relative mismatch allowed between boundary and initial data on the corner set.
const CORNER_TOL: f64 = 1e-9;

pub type DataFn = Arc<dyn Fn(&Vector, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ProblemSpec {
    pub params: CoefficientParams,
    pub domain: Domain,
    /// Dirichlet data, evaluated at boundary nodes for every new time level.
    pub boundary: DataFn,
    /// Initial data, evaluated at `t_start`.
    pub initial: DataFn,
    /// A-priori bound on `|Du|`; defaults to the largest data gradient plus one.
    pub gradient_cap: Option<f64>,
    /// Fixed time step; defaults to the CFL step for the gradient cap.
    pub dt: Option<f64>,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("params", &self.params)
            .field("domain", &self.domain)
            .field("gradient_cap", &self.gradient_cap)
            .field("dt", &self.dt)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Same function as boundary and initial data.
    pub fn with_data<F>(params: CoefficientParams, domain: Domain, data: F) -> Self
    where
        F: Fn(&Vector, f64) -> f64 + Send + Sync + 'static,
    {
        let data: DataFn = Arc::new(data);
        Self {
            params,
            domain,
            boundary: data.clone(),
            initial: data,
            gradient_cap: None,
            dt: None,
        }
    }

    pub fn with_params(&self, params: CoefficientParams) -> Self {
        Self {
            params,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub exec: Exec,
    /// Upper bound on stored time intervals; levels are kept at a fixed stride.
    pub max_stored_intervals: usize,
    /// Radius of the cylinder on which `sup |u_t|` is tracked at every step.
    pub monitor_radius: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            exec: Exec::default(),
            max_stored_intervals: 256,
            monitor_radius: Some(0.5),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    /// Levels at every `stride`-th step, including both ends.
    pub solution: SpaceTimeSolution,
    pub dt_used: f64,
    pub steps: usize,
    pub stride: usize,
    pub gradient_cap: f64,
    pub max_observed_gradient: f64,
    /// `cfl_dt` at the largest observed gradient divided by `dt_used`.
    pub cfl_margin: f64,
    /// `sup |u_t|` over the monitor cylinder, from consecutive fine steps.
    pub sup_ut: Option<f64>,
}

/// `safety h^2 / (2 dim Lambda (eps^2 + G^2)^{k/2})`.
pub fn cfl_dt(params: &CoefficientParams, dim: usize, h: f64, gradient_cap: f64) -> Result<f64> {
    if !(h > 0.0) || !(gradient_cap >= 0.0) || dim == 0 {
        return Err(Error::InvalidParams(format!(
            "cfl_dt needs h > 0, G >= 0, dim >= 1 (got h = {h}, G = {gradient_cap}, dim = {dim})"
        )));
    }
    let mut q = Vector::zeros(dim.min(crate::linalg::MAX_DIM));
    q[0] = gradient_cap;
    let mult = params.multiplier(&q)?;
    let big_lambda = params.ellipticity().big_lambda;
    Ok(CFL_SAFETY * h * h / (2.0 * dim as f64 * big_lambda * mult))
}

fn check_params(params: &CoefficientParams) -> Result<()> {
    if !(params.epsilon > 0.0) {
        return Err(Error::InvalidParams(format!(
            "the solver evolves regularized problems only (eps = {})",
            params.epsilon
        )));
    }
    if params.degeneracy_exponent() < 0.0 {
        return Err(Error::InvalidParams(format!(
            "the solver needs a nonnegative degeneracy exponent (got {})",
            params.degeneracy_exponent()
        )));
    }
    if let Family::PLaplace { p } | Family::GeneralQuasilinear { p, .. } = params.family {
        if p < 2.0 {
            return Err(Error::InvalidParams(format!("p = {p} is below 2")));
        }
    }
    Ok(())
}

/// Frozen geometry shared by every step of one solve.
struct Layout {
    grid: Grid,
    points: Vec<Vector>,
    interior: Vec<bool>,
    row: usize,
    inv_h: f64,
    inv_h2: f64,
}

impl Layout {
    fn new(grid: Grid) -> Self {
        let n = grid.node_count();
        Self {
            points: (0..n).map(|i| grid.point(i)).collect(),
            interior: (0..n).map(|i| grid.is_interior(i)).collect(),
            row: grid.axis_len(0),
            inv_h: 1.0 / grid.h(),
            inv_h2: 1.0 / (grid.h() * grid.h()),
            grid,
        }
    }

    /// Central gradient and Hessian at an interior node by direct indexing.
    #[inline]
    fn jet(&self, u: &[f64], n: usize) -> (Vector, SymMatrix) {
        let c = u[n];
        let (e, w) = (u[n + 1], u[n - 1]);
        if self.grid.dim() == 1 {
            let q = Vector::from_slice(&[0.5 * (e - w) * self.inv_h]);
            let m = SymMatrix::diagonal(&[(e - 2.0 * c + w) * self.inv_h2]);
            return (q, m);
        }
        let r = self.row;
        let (nn, s) = (u[n + r], u[n - r]);
        let q = Vector::from_slice(&[0.5 * (e - w) * self.inv_h, 0.5 * (nn - s) * self.inv_h]);
        let mut m = SymMatrix::zeros(2);
        m.set(0, 0, (e - 2.0 * c + w) * self.inv_h2);
        m.set(1, 1, (nn - 2.0 * c + s) * self.inv_h2);
        m.set(0, 1, 0.25 * (u[n + r + 1] - u[n + r - 1] - u[n - r + 1] + u[n - r - 1]) * self.inv_h2);
        (q, m)
    }
}

/// Per-node output of one step: new value and gradient norm at the old level.
type NodeUpdate = (f64, f64);

fn advance(
    layout: &Layout,
    spec: &ProblemSpec,
    u: &[f64],
    dt: f64,
    t_new: f64,
    out: &mut [NodeUpdate],
    exec: Exec,
) {
    exec.fill(out, |n| {
        if layout.interior[n] {
            let (q, m) = layout.jet(u, n);
            (u[n] + dt * spec.params.evolution_rate(&q, &m), q.norm())
        } else {
            ((spec.boundary)(&layout.points[n], t_new), 0.0)
        }
    });
}

/// One forward Euler step from `state` at `prev_time`.
pub fn step(state: &Field, prev_time: f64, dt: f64, spec: &ProblemSpec, exec: Exec) -> Result<Field> {
    check_params(&spec.params)?;
    let layout = Layout::new(*state.grid());
    let mut out = vec![(0.0, 0.0); state.values().len()];
    let t_new = prev_time + dt;
    advance(&layout, spec, state.values(), dt, t_new, &mut out, exec);
    let values: Vec<f64> = out.into_iter().map(|(v, _)| v).collect();
    if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Divergence {
            node,
            point: layout.points[node].as_slice().to_vec(),
            t: t_new,
            value,
        });
    }
    Field::new(*state.grid(), values)
}

/// Largest discrete gradient of the data on the parabolic boundary.
fn data_gradient_bound(spec: &ProblemSpec, grid: &Grid) -> Result<f64> {
    let mut bound: f64 = 0.0;
    let init = crate::grid::sample(|x, t| (spec.initial)(x, t), grid, grid.t_start())?;
    let norms = crate::stencil::gradient_norm(&init)?;
    bound = norms.values().iter().fold(bound, |m, v| m.max(*v));
    for t in [grid.t_start(), grid.t_end()] {
        let b = crate::grid::sample(|x, t| (spec.boundary)(x, t), grid, t)?;
        let norms = crate::stencil::gradient_norm(&b)?;
        for n in 0..grid.node_count() {
            if !grid.is_interior(n) {
                bound = bound.max(norms.at(n));
            }
        }
    }
    Ok(bound)
}

fn check_corners(spec: &ProblemSpec, grid: &Grid) -> Result<()> {
    let t0 = grid.t_start();
    for n in 0..grid.node_count() {
        if grid.is_interior(n) {
            continue;
        }
        let x = grid.point(n);
        let (b, i) = ((spec.boundary)(&x, t0), (spec.initial)(&x, t0));
        if (b - i).abs() > CORNER_TOL * (1.0 + b.abs().max(i.abs())) {
            return Err(Error::InvalidParams(format!(
                "boundary ({b}) and initial ({i}) data disagree at x = {:?}, t = {t0}",
                x.as_slice()
            )));
        }
    }
    Ok(())
}

/// Fine step count `K` and storage stride `s` with `s | K`.
fn schedule(span: f64, dt_max: f64, fixed_dt: Option<f64>, max_stored: usize) -> Result<(usize, usize)> {
    let max_stored = max_stored.max(1);
    match fixed_dt {
        Some(dt) => {
            let ratio = span / dt;
            let k = ratio.round();
            if !(dt > 0.0) || k < 1.0 || (ratio - k).abs() > 1e-9 * ratio {
                return Err(Error::InvalidGrid(format!("time span {span} is not a multiple of dt = {dt}")));
            }
            let k = k as usize;
            let mut s = k.div_ceil(max_stored);
            while k % s != 0 {
                s += 1;
            }
            Ok((k, s))
        }
        None => {
            let k_min = (span / dt_max).ceil().max(1.0) as usize;
            let s = k_min.div_ceil(max_stored);
            Ok((s * k_min.div_ceil(s), s))
        }
    }
}

pub fn solve(spec: &ProblemSpec, options: &SolveOptions) -> Result<SolveReport> {
    check_params(&spec.params)?;
    let probe = Grid::new(spec.domain, 1)?;
    let dim = probe.dim();
    let h = probe.h();
    check_corners(spec, &probe)?;
    let cap = match spec.gradient_cap {
        Some(g) if g >= 0.0 && g.is_finite() => g,
        Some(g) => return Err(Error::InvalidParams(format!("gradient cap {g} must be >= 0"))),
        None => data_gradient_bound(spec, &probe)? + 1.0,
    };
    let dt_max = cfl_dt(&spec.params, dim, h, cap)?;
    if let Some(dt) = spec.dt {
        if dt > dt_max * (1.0 + 1e-12) {
            return Err(Error::InvalidParams(format!("dt = {dt} exceeds the CFL step {dt_max}")));
        }
    }
    let (steps, stride) = schedule(spec.domain.width(), dt_max, spec.dt, options.max_stored_intervals)?;
    let fine = Grid::new(spec.domain, steps)?;
    let stored_grid = Grid::new(spec.domain, steps / stride)?;
    let dt = fine.dt();
    let layout = Layout::new(fine);

    let monitor: Vec<usize> = match options.monitor_radius {
        Some(r) => (0..fine.node_count()).filter(|&n| fine.in_ball(n, r)).collect(),
        None => Vec::new(),
    };
    let monitor_r = options.monitor_radius.unwrap_or(0.0);

    let t0 = fine.t_start();
    let mut u: Vec<f64> = layout.points.iter().map(|x| (spec.initial)(x, t0)).collect();
    if let Some((node, &value)) = u.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Divergence {
            node,
            point: layout.points[node].as_slice().to_vec(),
            t: t0,
            value,
        });
    }
    let mut stored = vec![Field::from_raw(stored_grid, u.clone())];
    let mut out = vec![(0.0, 0.0); u.len()];
    let mut max_grad: f64 = 0.0;
    let mut sup_ut: Option<f64> = None;

    for k in 0..steps {
        let t_new = fine.time(k + 1);
        advance(&layout, spec, &u, dt, t_new, &mut out, options.exec);
        let mut level_grad: f64 = 0.0;
        for (n, &(v, g)) in out.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Divergence {
                    node: n,
                    point: layout.points[n].as_slice().to_vec(),
                    t: t_new,
                    value: v,
                });
            }
            level_grad = level_grad.max(g);
        }
        max_grad = max_grad.max(level_grad);
        if level_grad > 2.0 * cap {
            return Err(Error::CflViolation {
                observed: level_grad,
                cap,
                t: fine.time(k),
            });
        }
        if !monitor.is_empty() && Grid::in_time_window(t_new, monitor_r) {
            let sup = monitor
                .iter()
                .map(|&n| ((out[n].0 - u[n]) / dt).abs())
                .fold(0.0, f64::max);
            sup_ut = Some(sup_ut.map_or(sup, |s: f64| s.max(sup)));
        }
        for (dst, &(v, _)) in u.iter_mut().zip(out.iter()) {
            *dst = v;
        }
        if (k + 1) % stride == 0 {
            stored.push(Field::from_raw(stored_grid, u.clone()));
        }
    }

    let final_grad = (0..u.len())
        .filter(|&n| layout.interior[n])
        .map(|n| layout.jet(&u, n).0.norm())
        .fold(0.0, f64::max);
    max_grad = max_grad.max(final_grad);
    let cfl_margin = cfl_dt(&spec.params, dim, h, max_grad)? / dt;
    Ok(SolveReport {
        solution: SpaceTimeSolution::new(stored_grid, stored)?,
        dt_used: dt,
        steps,
        stride,
        gradient_cap: cap,
        max_observed_gradient: max_grad,
        cfl_margin,
        sup_ut,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub report: SolveReport,
    pub sup_ut: f64,
}

/// One solve per `eps`, same grid and data, in the order given.
pub fn epsilon_sweep(template: &ProblemSpec, eps_list: &[f64], options: &SolveOptions) -> Result<Vec<SweepEntry>> {
    if eps_list.is_empty() {
        return Err(Error::InvalidParams("empty epsilon list".into()));
    }
    if eps_list.iter().any(|e| !(*e > 0.0)) || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParams(format!(
            "epsilon list {eps_list:?} must be positive and strictly decreasing"
        )));
    }
    if options.monitor_radius.is_none() {
        return Err(Error::InvalidParams("epsilon sweep needs a monitor radius".into()));
    }
    let inner = SolveOptions {
        exec: Exec::Sequential,
        ..*options
    };
    let results = options.exec.map_items(eps_list, |&eps| {
        let spec = template.with_params(template.params.with_epsilon(eps));
        solve(&spec, &inner).map(|report| SweepEntry {
            epsilon: eps,
            sup_ut: report.sup_ut.unwrap_or(0.0),
            report,
        })
    });
    results.into_iter().collect()
}

/// Regularization parameter seen by `u(r x, r^2 rho^k t) / (r rho)`.
pub fn rescaled_params(params: &CoefficientParams, rho: f64) -> CoefficientParams {
    params.with_epsilon(params.epsilon / rho)
}

/// `v(x, t) = u(r x, r^2 rho^k t) / (r rho)` sampled on `target`, bilinear in
/// space and linear in time; `k` is the family's intrinsic time exponent.
pub fn intrinsic_rescale(
    solution: &SpaceTimeSolution,
    params: &CoefficientParams,
    r: f64,
    rho: f64,
    target: &Grid,
    exec: Exec,
) -> Result<SpaceTimeSolution> {
    if !(r > 0.0 && rho > 0.0) {
        return Err(Error::InvalidParams(format!("rescaling needs r, rho > 0 (got {r}, {rho})")));
    }
    let src = solution.grid();
    if target.dim() != src.dim() {
        return Err(Error::InvalidParams("source and target dimensions differ".into()));
    }
    let time_scale = r * r * rho.powf(params.intrinsic_time_exponent());
    let levels = (0..=target.steps())
        .map(|k| {
            let t = target.time(k);
            let s = time_scale * t;
            let tb = crate::grid::bracket(s, src.t_start(), src.dt(), src.steps() + 1);
            let values = exec.map(target.node_count(), |n| {
                let x = target.point(n);
                let y = x.scale(r);
                let outside = || Error::OutsideCylinder {
                    point: y.as_slice().to_vec(),
                    t: s,
                };
                let (l, w) = tb.ok_or_else(outside)?;
                let a = solution.level(l).interpolate(&y).ok_or_else(outside)?;
                let b = solution.level(l + 1).interpolate(&y).ok_or_else(outside)?;
                Ok(((1.0 - w) * a + w * b) / (r * rho))
            });
            let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
            Field::new(*target, values)
        })
        .collect::<Result<Vec<Field>>>()?;
    SpaceTimeSolution::new(*target, levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::SmoothOperatorF;
    use crate::exact::ExactSolution;

    #[test]
    fn cfl_examples() {
        let heat = CoefficientParams::p_laplace(2.0, 0.1).unwrap();
        assert!((cfl_dt(&heat, 1, 0.1, 7.0).unwrap() - 2e-3).abs() < 1e-15);
        let p3 = CoefficientParams::p_laplace(3.0, 0.1).unwrap();
        let dt = cfl_dt(&p3, 2, 0.05, 1.0).unwrap();
        let oracle = 0.4 * 0.0025 / (8.0 * 1.01f64.sqrt());
        assert!((dt - oracle).abs() < 1e-18);
        assert!((dt - 1.2438e-4).abs() < 1e-8);
        assert!(cfl_dt(&p3, 2, 0.05, 2.0).unwrap() < dt);
    }

    #[test]
    fn schedule_divides() {
        let (k, s) = schedule(1.0, 1e-3, None, 256).unwrap();
        assert_eq!(k % s, 0);
        assert!(1.0 / k as f64 <= 1e-3);
        assert!(k / s <= 256);
        let (k, s) = schedule(1.0, 1.0, Some(1.0 / 1000.0), 256).unwrap();
        assert_eq!((k, k % s), (1000, 0));
    }

    #[test]
    fn affine_state_is_static() {
        let params = CoefficientParams::p_laplace(3.0, 0.1).unwrap();
        let f = |x: &Vector, _t: f64| 0.5 + 2.0 * x[0] - x[1];
        let spec = ProblemSpec::with_data(params, Domain::cylinder(2, 0.5, 0.1), f);
        let g = Grid::new(spec.domain, 10).unwrap();
        let u0 = crate::grid::sample(f, &g, g.t_start()).unwrap();
        let u1 = step(&u0, g.t_start(), 1e-4, &spec, Exec::Sequential).unwrap();
        assert!(u0.max_abs_diff(&u1) < 1e-13);
    }

    #[test]
    fn heat_eigenmode_decays() {
        let params = CoefficientParams::p_laplace(2.0, 0.1).unwrap();
        let pi = std::f64::consts::PI;
        let f = move |x: &Vector, _t: f64| (pi * x[0]).sin();
        let spec = ProblemSpec::with_data(params, Domain::cylinder(1, 1.0, 0.01), f);
        let g = Grid::new(spec.domain, 10).unwrap();
        let u0 = crate::grid::sample(f, &g, g.t_start()).unwrap();
        let dt = cfl_dt(&spec.params, 1, 0.01, 1.0).unwrap();
        let u1 = step(&u0, g.t_start(), dt, &spec, Exec::Sequential).unwrap();
        // Discrete symbol of the three-point Laplacian, and its continuum limit.
        let h = 0.01f64;
        let discrete = 1.0 - dt * (2.0 - 2.0 * (pi * h).cos()) / (h * h);
        for n in 1..g.node_count() - 1 {
            assert!((u1.at(n) - u0.at(n) * discrete).abs() < 1e-13, "node {n}");
            let continuum = u0.at(n) * (1.0 - pi * pi * dt);
            assert!((u1.at(n) - continuum).abs() < pi.powi(4) * h * h / 12.0 * dt * 1.01, "node {n}");
        }
    }

    #[test]
    fn constant_data_stays_constant() {
        let params = CoefficientParams::p_laplace(3.0, 0.05).unwrap();
        let spec = ProblemSpec::with_data(params, Domain::cylinder(2, 0.5, 0.125), |_: &Vector, _| 2.5);
        let report = solve(&spec, &SolveOptions::default()).unwrap();
        for level in report.solution.levels() {
            assert!(level.values().iter().all(|&v| v == 2.5));
        }
        assert_eq!(report.sup_ut, Some(0.0));
    }

    #[test]
    fn rejects_unregularized_and_inconsistent_data() {
        let params = CoefficientParams::p_laplace(3.0, 0.0).unwrap();
        let spec = ProblemSpec::with_data(params, Domain::cylinder(2, 0.5, 0.125), |_: &Vector, _| 0.0);
        assert!(matches!(solve(&spec, &SolveOptions::default()), Err(Error::InvalidParams(_))));

        let params = CoefficientParams::p_laplace(3.0, 0.1).unwrap();
        let mut spec = ProblemSpec::with_data(params, Domain::cylinder(2, 0.5, 0.125), |_: &Vector, _| 0.0);
        spec.initial = Arc::new(|_: &Vector, _| 1.0);
        assert!(matches!(solve(&spec, &SolveOptions::default()), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn cap_violation_aborts() {
        let params = CoefficientParams::p_laplace(3.0, 0.1).unwrap();
        let mut spec =
            ProblemSpec::with_data(params, Domain::cylinder(2, 0.5, 0.125), |x: &Vector, _| 3.0 * x[0]);
        spec.gradient_cap = Some(1.0);
        assert!(matches!(solve(&spec, &SolveOptions::default()), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn sequential_and_parallel_solves_agree() {
        let sol = ExactSolution::fully_nonlinear(2, 1.0).unwrap();
        let params = CoefficientParams::fully_nonlinear(1.0, SmoothOperatorF::trace(), 0.1).unwrap();
        let spec = ProblemSpec::with_data(params, Domain::cylinder(2, 0.5, 0.0625), move |x: &Vector, t| {
            sol.value(x, t)
        });
        let seq = solve(&spec, &SolveOptions { exec: Exec::Sequential, ..Default::default() }).unwrap();
        let par = solve(&spec, &SolveOptions { exec: Exec::Parallel, ..Default::default() }).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn identity_rescale() {
        let params = CoefficientParams::p_laplace(3.0, 0.1).unwrap();
        let g = Grid::new(Domain::cylinder(2, 0.5, 0.125), 4).unwrap();
        let sol = SpaceTimeSolution::sample(|x: &Vector, t| x[0] * x[1] + t, g);
        let out = intrinsic_rescale(&sol, &params, 1.0, 1.0, &g, Exec::Sequential).unwrap();
        for (a, b) in sol.levels().iter().zip(out.levels()) {
            assert!(a.max_abs_diff(b) < 1e-14);
        }
        let bigger = Grid::new(Domain::cylinder(2, 1.0, 0.125), 4).unwrap();
        assert!(matches!(
            intrinsic_rescale(&sol, &params, 1.0, 1.0, &bigger, Exec::Sequential),
            Err(Error::OutsideCylinder { .. })
        ));
    }
}
