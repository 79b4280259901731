//! Command dispatch: one config in, one record out.

use std::time::Instant;

use degenlab_core::bernstein::{
    check_domination, defect_report, delta_ladder, delta_sweep, fuzz_jets, rescale_to_unit, select_beta,
    BernsteinConfig,
};
use degenlab_core::coefficients::{CoefficientParams, Family, SmoothOperatorF};
use degenlab_core::exact::{
    build_barrier, fully_nonlinear_constant, p_laplace_constant, ExactSolution, HalfCylinderSample,
};
use degenlab_core::grid::Domain;
use degenlab_core::regularity::{
    default_alpha, fit_time_lipschitz, mixed_gradient_time_check, mixed_time_exponent, scaling_exponents,
};
use degenlab_core::solver::{epsilon_sweep, solve, ProblemSpec, SolveOptions};
use degenlab_core::{Error, Exec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::checks;
use crate::config::{Command, ExperimentConfig};
use crate::record::{ResultRecord, Table};

/// How a run ended, mapped onto the process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    VerdictFailure,
    ConfigError,
    Divergence,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::VerdictFailure => 1,
            Outcome::ConfigError => 2,
            Outcome::Divergence => 3,
        }
    }
}

/// Where an error happened, for the summary.
fn locate(e: &Error) -> Option<String> {
    match e {
        Error::Divergence { node, point, t, .. } => Some(format!("node {node} (x = {point:?}, t = {t})")),
        Error::NonFinite { node, .. } | Error::NotInterior { node } => Some(format!("node {node}")),
        Error::OutsideCylinder { point, t } => Some(format!("x = {point:?}, t = {t}")),
        Error::CflViolation { t, .. } => Some(format!("t = {t}")),
        _ => None,
    }
}

fn diverged(e: &Error) -> bool {
    matches!(e, Error::Divergence { .. } | Error::CflViolation { .. } | Error::NonFinite { .. })
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    exec: Exec,
    rec: ResultRecord,
    divergence: bool,
}

impl Ctx<'_> {
    /// Records a module error; the command keeps going where it can.
    fn fail(&mut self, stage: &str, e: Error) {
        self.divergence |= diverged(&e);
        let loc = locate(&e);
        self.rec.error(stage, loc, e.to_string());
    }

    fn options(&self) -> SolveOptions {
        SolveOptions {
            exec: self.exec,
            max_stored_intervals: self.cfg.problem.max_stored_intervals,
            monitor_radius: Some(self.cfg.sweep.monitor_radius),
        }
    }

    fn spec(&mut self) -> Option<ProblemSpec> {
        match self.cfg.problem_spec() {
            Ok(s) => Some(s),
            Err(e) => {
                self.rec.error("config", Some(e.path.clone()), e.message);
                None
            }
        }
    }
}

/// Runs the config's command. The config must carry a command.
pub fn run(cfg: &ExperimentConfig, exec: Exec) -> (ResultRecord, Outcome) {
    let command = cfg.command.expect("run needs a command");
    // Where results land is not an input to the experiment.
    let mut hashed = cfg.clone();
    hashed.output_dir = Default::default();
    let canonical = crate::config::serialize_config(&hashed);
    let start = Instant::now();
    let mut ctx = Ctx {
        cfg,
        exec,
        rec: ResultRecord::new(command, &canonical, cfg.seed),
        divergence: false,
    };
    match command {
        Command::Solve => cmd_solve(&mut ctx),
        Command::SweepEps => cmd_sweep(&mut ctx),
        Command::Exponents => cmd_exponents(&mut ctx),
        Command::BernsteinCheck => cmd_bernstein(&mut ctx),
        Command::JetFuzz => cmd_jet_fuzz(&mut ctx),
        Command::BarrierCheck => cmd_barrier(&mut ctx),
        Command::ScalingCheck => cmd_scaling(&mut ctx),
        Command::Convergence => cmd_convergence(&mut ctx),
    }
    ctx.rec.wall_clock = start.elapsed();
    let outcome = if ctx.divergence {
        Outcome::Divergence
    } else if ctx.rec.passed() {
        Outcome::Pass
    } else {
        Outcome::VerdictFailure
    };
    (ctx.rec, outcome)
}

fn cmd_solve(ctx: &mut Ctx) {
    let Some(spec) = ctx.spec() else { return };
    let report = match solve(&spec, &ctx.options()) {
        Ok(r) => r,
        Err(e) => return ctx.fail("solve", e),
    };
    let rec = &mut ctx.rec;
    rec.metric("steps", report.steps as f64);
    rec.metric("dt", report.dt_used);
    rec.metric("gradient_cap", report.gradient_cap);
    rec.metric("max_observed_gradient", report.max_observed_gradient);
    rec.metric("cfl_margin", report.cfl_margin);
    if let Some(s) = report.sup_ut {
        rec.metric("sup_ut", s);
    }
    rec.verdict("cfl_respected", report.cfl_margin >= 1.0);

    let last = report.solution.last();
    let g = last.grid();
    let exact = if ctx.cfg.problem.data == crate::config::DataKind::Exact {
        ctx.cfg.exact_solution()
    } else {
        None
    };
    let mut cols: Vec<&str> = ["x1", "x2"][..g.dim()].to_vec();
    cols.push("u");
    if exact.is_some() {
        cols.extend(["exact", "error"]);
    }
    let mut table = Table::new(&cols);
    for n in 0..g.node_count() {
        let x = g.point(n);
        let mut row = x.as_slice().to_vec();
        row.push(last.at(n));
        if let Some(sol) = &exact {
            let e = sol.value(&x, g.t_end());
            row.extend([e, last.at(n) - e]);
        }
        table.push(row);
    }
    rec.table("solve_final", table);
    if let Some(sol) = &exact {
        rec.metric("final_sup_error", checks::final_sup_error(&report.solution, sol));
    }
}

fn cmd_sweep(ctx: &mut Ctx) {
    let Some(spec) = ctx.spec() else { return };
    let entries = match epsilon_sweep(&spec, &ctx.cfg.sweep.eps, &ctx.options()) {
        Ok(v) => v,
        Err(e) => return ctx.fail("sweep", e),
    };
    let mut table = Table::new(&["eps", "sup_ut", "cfl_margin"]);
    for e in &entries {
        table.push(vec![e.epsilon, e.sup_ut, e.report.cfl_margin]);
    }
    let sups: Vec<f64> = entries.iter().map(|e| e.sup_ut).collect();
    let spread = checks::relative_spread(&sups);
    let tol = &ctx.cfg.tolerances;
    let rec = &mut ctx.rec;
    rec.table("sweep_eps_ut", table);
    rec.metric("spread", spread);
    rec.metric("sup_ut_min", sups.iter().copied().fold(f64::INFINITY, f64::min));
    rec.metric("sup_ut_max", sups.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    rec.verdict("spread", spread <= tol.spread);
    if ctx.cfg.problem.data == crate::config::DataKind::Exact {
        if let Some(sol) = ctx.cfg.exact_solution() {
            let center = sol.time_coefficient();
            rec.metric("band_center", center);
            rec.verdict("band", checks::within_band(&sups, center, tol.band));
        }
    }
}

fn cmd_exponents(ctx: &mut Ctx) {
    let cfg = ctx.cfg;
    let tol = &cfg.tolerances;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);

    let mut holder = Table::new(&["p", "fitted", "predicted", "deviation", "r_squared"]);
    let mut holder_ok = true;
    for &p in &cfg.exponents.p_values {
        let fit = ExactSolution::p_laplace(cfg.problem.dim, p).and_then(|sol| checks::holder_analytic(&sol, 1.0 / 64.0, 0.5));
        match fit {
            Ok(fit) => {
                let fit = fit.with_prediction(default_alpha(p));
                let dev = fit.deviation().unwrap_or(f64::INFINITY);
                holder_ok &= dev <= tol.holder_analytic;
                holder.push(vec![p, fit.fitted_exponent, default_alpha(p), dev, fit.r_squared]);
            }
            Err(e) => {
                holder_ok = false;
                ctx.fail("holder_analytic", e);
            }
        }
    }
    ctx.rec.table("exponents_holder", holder);
    ctx.rec.verdict("holder_analytic", holder_ok);

    let mut nu_err: f64 = 0.0;
    for _ in 0..cfg.exponents.algebra_samples {
        let p = 10.0 - rng.random_range(0.0..8.0);
        match scaling_exponents(default_alpha(p), p) {
            Ok((_, nu)) => nu_err = nu_err.max((nu - 1.0).abs()),
            Err(e) => return ctx.fail("scaling_exponents", e),
        }
    }
    let mut mixed_err: f64 = 0.0;
    for _ in 0..cfg.exponents.algebra_samples {
        let gamma = 5.0 - rng.random_range(0.0..5.0);
        let e = mixed_time_exponent(1.0 / (1.0 + gamma), 1.0);
        mixed_err = mixed_err.max((e - 1.0 / (2.0 + gamma)).abs());
    }
    ctx.rec.metric("nu_max_error", nu_err);
    ctx.rec.metric("mixed_max_error", mixed_err);
    ctx.rec.verdict("nu_equals_one", nu_err <= tol.algebra);
    ctx.rec.verdict("mixed_exponent", mixed_err <= tol.algebra);

    let mut dom = Table::new(&["family", "gamma_or_p", "p", "beta", "lhs", "claimed_min", "margin"]);
    let mut dom_ok = true;
    let mut min_margin = f64::INFINITY;
    for i in 0..cfg.exponents.domination_samples {
        let family = checks::random_family(&mut rng, i);
        let beta = match select_beta(&family) {
            Ok(b) => b,
            Err(e) => return ctx.fail("select_beta", e),
        };
        let r = check_domination(&family, beta);
        dom_ok &= r.passes && r.identity_holds && r.margin >= 0.0;
        min_margin = min_margin.min(r.margin);
        let (code, a, p) = match family {
            Family::PLaplace { p } => (0.0, p, p),
            Family::FullyNonlinear { gamma, .. } => (1.0, gamma, f64::NAN),
            Family::GeneralQuasilinear { gamma, p } => (2.0, gamma, p),
        };
        dom.push(vec![code, a, p, beta, r.lhs, r.claimed_min, r.margin]);
    }
    ctx.rec.table("exponents_domination", dom);
    ctx.rec.metric("domination_min_margin", min_margin);
    ctx.rec.verdict("domination", dom_ok);

    if cfg.exponents.solver_fit {
        exponents_on_solver(ctx);
    }
}

fn exponents_on_solver(ctx: &mut Ctx) {
    let cfg = ctx.cfg;
    let Some(spec) = ctx.spec() else { return };
    let report = match solve(&spec, &ctx.options()) {
        Ok(r) => r,
        Err(e) => return ctx.fail("solve", e),
    };
    let p = cfg.problem.p;
    match checks::holder_on_solution(&report.solution, 0.5) {
        Ok(fit) => {
            let dev = (fit.fitted_exponent - default_alpha(p)).abs();
            ctx.rec.metric("holder_solver_fitted", fit.fitted_exponent);
            ctx.rec.metric("holder_solver_deviation", dev);
            ctx.rec.verdict("holder_solver", dev <= cfg.tolerances.holder_solver);
        }
        Err(e) => ctx.fail("holder_solver", e),
    }
    match fit_time_lipschitz(&report.solution, 0.5) {
        Ok(fit) => {
            ctx.rec.metric("time_lipschitz_fitted", fit.fitted_exponent);
            ctx.rec.metric("time_lipschitz_constant", fit.max_ratio);
        }
        Err(e) => ctx.fail("time_lipschitz", e),
    }
    match mixed_gradient_time_check(&report.solution, default_alpha(p), 1.0, 0.5) {
        Ok(m) => {
            ctx.rec.metric("mixed_max_ratio", m.max_ratio);
            ctx.rec.metric("mixed_chain_violations", m.chain_violations as f64);
            ctx.rec.verdict("mixed_finite", m.finite);
        }
        Err(e) => ctx.fail("mixed_check", e),
    }
}

fn cmd_bernstein(ctx: &mut Ctx) {
    let Some(spec) = ctx.spec() else { return };
    let report = match solve(&spec, &ctx.options()) {
        Ok(r) => r,
        Err(e) => return ctx.fail("solve", e),
    };
    let (exec, section) = (ctx.exec, &ctx.cfg.bernstein);
    let unit = match rescale_to_unit(&report.solution, &spec.params, section.time_steps, exec) {
        Ok(u) => u,
        Err(e) => return ctx.fail("rescale", e),
    };
    ctx.rec.metric("rescale_r", unit.r);
    ctx.rec.metric("rescale_rho", unit.rho);
    ctx.rec.metric("rescaled_epsilon", unit.params.epsilon);
    let ladder = delta_ladder(section.ladder_lo, section.ladder_hi);
    let sweep = match delta_sweep(&unit.solution, &unit.params, &ladder, exec) {
        Ok(s) => s,
        Err(e) => {
            ctx.rec.verdict("finite_delta", false);
            return ctx.fail("delta_sweep", e);
        }
    };
    let mut table = Table::new(&["delta", "margin"]);
    for &(d, m) in &sweep.trace {
        table.push(vec![d, m]);
    }
    let r = &sweep.report;
    let rec = &mut ctx.rec;
    rec.table("bernstein_delta", table);
    rec.metric("delta", sweep.delta);
    rec.metric("a", r.a);
    rec.metric("beta", r.beta);
    rec.metric("max_v", r.max_v.value);
    rec.metric("margin", r.margin);
    rec.metric("max_defect", r.max_defect);
    rec.metric("min_defect", r.min_defect);
    rec.metric("positive_defect_nodes", r.positive_defect_nodes as f64);
    rec.metric("max_on_cutoff_zero_set", f64::from(u8::from(r.max_on_cutoff_zero_set)));
    rec.metric("max_at_vanishing_ut", f64::from(u8::from(r.max_at_vanishing_ut)));
    rec.verdict("finite_delta", sweep.delta.is_finite());
    rec.verdict("a_le_two_delta", r.verdict && r.a_le_two_delta);

    let doubled = BernsteinConfig::for_solution(&unit.solution, &unit.params, 2.0 * sweep.delta)
        .and_then(|c| defect_report(&unit.solution, &c, &unit.params, exec));
    match doubled {
        Ok(d) => {
            ctx.rec.metric("doubled_margin", d.margin);
            ctx.rec.verdict("doubled_delta_preserved", d.verdict && d.a_le_two_delta);
        }
        Err(e) => ctx.fail("doubled_delta", e),
    }
}

fn cmd_jet_fuzz(ctx: &mut Ctx) {
    let f = &ctx.cfg.fuzz;
    let mut rng = ChaCha20Rng::seed_from_u64(ctx.cfg.seed);
    let mut families: Vec<(f64, f64, Family)> = Vec::new();
    for &p in &f.p_values {
        families.push((0.0, p, Family::PLaplace { p }));
    }
    for &gamma in &f.gamma_values {
        let operator = SmoothOperatorF::trace();
        families.push((1.0, gamma, Family::FullyNonlinear { gamma, operator }));
    }
    let mut table = Table::new(&[
        "family",
        "parameter",
        "epsilon",
        "samples",
        "cs_violations",
        "ut_violations",
        "max_cs_ratio",
        "max_ut_ratio",
    ]);
    let (mut total, mut cs, mut ut) = (0usize, 0usize, 0usize);
    for (code, param, family) in families {
        let jets = checks::jet_samples(&mut rng, f.dim, f.samples, f.aligned_fraction);
        for &eps in &f.epsilons {
            let report = CoefficientParams::new(family.clone(), eps).and_then(|params| fuzz_jets(&params, &jets, ctx.exec));
            match report {
                Ok(r) => {
                    total += r.samples;
                    cs += r.cs_violations;
                    ut += r.ut_violations;
                    table.push(vec![
                        code,
                        param,
                        eps,
                        r.samples as f64,
                        r.cs_violations as f64,
                        r.ut_violations as f64,
                        r.max_cs_ratio,
                        r.max_ut_ratio,
                    ]);
                }
                Err(e) => ctx.fail("fuzz", e),
            }
        }
    }
    let rec = &mut ctx.rec;
    rec.table("jet_fuzz_families", table);
    rec.metric("samples", total as f64);
    rec.metric("cs_violations", cs as f64);
    rec.metric("ut_violations", ut as f64);
    rec.verdict("cauchy_schwarz", cs == 0);
    rec.verdict("ut_bound", ut == 0);
}

fn cmd_barrier(ctx: &mut Ctx) {
    let b = &ctx.cfg.barrier;
    let tol = ctx.cfg.tolerances.barrier_defect;
    let phi = match ctx.cfg.barrier_datum() {
        Ok(p) => p,
        Err(e) => return ctx.rec.error("config", Some(e.path), e.message),
    };
    let dim = phi.dim();
    let params = match CoefficientParams::p_laplace(b.p, b.epsilon) {
        Ok(p) => p,
        Err(e) => return ctx.fail("params", e),
    };
    let bound = b.bound_u.unwrap_or_else(|| phi.sup_on_unit_half_cylinder());
    let search = HalfCylinderSample::new(dim, b.sample_h)
        .and_then(|sample| build_barrier(phi, &params, bound, &sample, tol, ctx.exec));
    let search = match search {
        Ok(s) => s,
        Err(e) => {
            ctx.rec.verdict("supersolution", false);
            return ctx.fail("build_barrier", e);
        }
    };
    let mut table = Table::new(&["beta", "a", "min_defect", "min_flat_margin", "min_lateral_margin"]);
    for (beta, a, r) in &search.trace {
        table.push(vec![
            *beta,
            *a,
            r.min_supersolution_defect,
            r.min_flat_margin,
            r.min_lateral_margin,
        ]);
    }
    let (barrier, report) = (search.barrier, search.report);
    let a_eff = barrier.a * barrier.beta;
    let rec = &mut ctx.rec;
    rec.table("barrier_search", table);
    rec.metric("a", barrier.a);
    rec.metric("beta", barrier.beta);
    rec.metric("a_eff", a_eff);
    rec.metric("bound_u", bound);
    rec.metric("min_supersolution_defect", report.min_supersolution_defect);
    rec.metric("sample_points", report.sample_points as f64);
    rec.verdict("supersolution", report.min_supersolution_defect >= -tol);
    rec.verdict("barrier_ordering", report.passes(tol));

    if b.solve_h > 0.0 {
        let spec = ProblemSpec::with_data(params, Domain::half_cylinder(dim, 1.0, b.solve_h), move |x, t| {
            phi.value(x, t)
        });
        let options = SolveOptions {
            monitor_radius: None,
            ..ctx.options()
        };
        match solve(&spec, &options) {
            Ok(r) => {
                let bound = checks::half_cube_bound(&r.solution, &phi, a_eff);
                ctx.rec.metric("half_cube_steps", r.steps as f64);
                ctx.rec.metric("half_cube_max_ratio", bound.max_ratio);
                ctx.rec.metric("half_cube_min_slack", bound.min_slack);
                ctx.rec.verdict("half_cube_bound", bound.min_slack >= 0.0);
            }
            Err(e) => ctx.fail("half_cube_solve", e),
        }
    }
}

fn cmd_scaling(ctx: &mut Ctx) {
    let cfg = ctx.cfg;
    let s = &cfg.scaling;
    let tol = &cfg.tolerances;

    // The closed forms against the constants quoted for n = 2.
    let c23 = p_laplace_constant(2, 3.0);
    let big_c = fully_nonlinear_constant(2, 1.0);
    ctx.rec.metric("c_2_3", c23);
    ctx.rec.metric("fully_nonlinear_c_2_1", big_c);
    ctx.rec.verdict(
        "exact_constants",
        (c23 - 4.5).abs() <= tol.algebra && (big_c - 3.375).abs() <= tol.algebra,
    );

    let points = checks::annulus_points(s.annulus_points, 0.3, 0.9);
    let mut table = Table::new(&["family", "parameter", "residual", "rescaled_residual", "nu_error"]);
    let mut residual_ok = true;
    let mut rescaled_ok = true;
    let mut nu_ok = true;
    let mut cases: Vec<(f64, f64, ExactSolution, CoefficientParams)> = Vec::new();
    for &p in &s.p_values {
        match (ExactSolution::p_laplace(2, p), CoefficientParams::p_laplace(p, 0.0)) {
            (Ok(sol), Ok(params)) => cases.push((0.0, p, sol, params)),
            (Err(e), _) | (_, Err(e)) => ctx.fail("exact", e),
        }
    }
    for gamma in [0.5, 1.0, 2.0] {
        let params = CoefficientParams::fully_nonlinear(gamma, SmoothOperatorF::trace(), 0.0);
        match (ExactSolution::fully_nonlinear(2, gamma), params) {
            (Ok(sol), Ok(params)) => cases.push((1.0, gamma, sol, params)),
            (Err(e), _) | (_, Err(e)) => ctx.fail("exact", e),
        }
    }
    for (code, param, sol, params) in cases {
        let direct = checks::max_residual(&sol, &params, &points);
        let rescaled_points: Vec<_> = points.iter().map(|x| x.scale(1.0 / s.r)).collect();
        let rescaled = checks::max_residual(&sol.rescaled(s.r, s.rho), &params, &rescaled_points);
        let nu = if code == 0.0 {
            scaling_exponents(default_alpha(param), param).map(|(_, nu)| (nu - 1.0).abs())
        } else {
            Ok(0.0)
        };
        match (direct, rescaled, nu) {
            (Ok(d), Ok(r), Ok(n)) => {
                residual_ok &= d <= tol.residual;
                rescaled_ok &= r <= tol.residual;
                nu_ok &= n <= tol.algebra;
                table.push(vec![code, param, d, r, n]);
            }
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => {
                residual_ok = false;
                ctx.fail("residual", e);
            }
        }
    }
    ctx.rec.table("scaling_residuals", table);
    ctx.rec.verdict("exact_residual", residual_ok);
    ctx.rec.verdict("rescaled_residual", rescaled_ok);
    ctx.rec.verdict("nu_equals_one", nu_ok);

    if s.comparison {
        match checks::comparison_suite(tol.comparison_slack, ctx.exec) {
            Ok(cases) => {
                let mut table = Table::new(&["case", "boundary_gap", "min_gap"]);
                let mut ok = true;
                for (i, c) in cases.iter().enumerate() {
                    ok &= c.passes;
                    table.push(vec![i as f64, c.boundary_gap, c.min_gap]);
                }
                ctx.rec.table("scaling_comparison", table);
                ctx.rec.verdict("comparison_principle", ok);
            }
            Err(e) => ctx.fail("comparison", e),
        }
    }
}

fn cmd_convergence(ctx: &mut Ctx) {
    let cfg = ctx.cfg;
    let Some(exact) = cfg.exact_solution().filter(|_| cfg.problem.data == crate::config::DataKind::Exact) else {
        return ctx
            .rec
            .error("config", Some("problem.data".into()), "convergence needs closed-form data");
    };
    let mut table = Table::new(&["h", "steps", "sup_error"]);
    let mut errors = Vec::new();
    for level in 0..=cfg.convergence.refinements {
        let mut c = cfg.clone();
        c.problem.h = cfg.problem.h / 2f64.powi(level as i32);
        let spec = match c.problem_spec() {
            Ok(s) => s,
            Err(e) => return ctx.rec.error("config", Some(e.path), e.message),
        };
        match solve(&spec, &ctx.options()) {
            Ok(r) => {
                let err = checks::final_sup_error(&r.solution, &exact);
                table.push(vec![c.problem.h, r.steps as f64, err]);
                errors.push(err);
            }
            Err(e) => return ctx.fail("solve", e),
        }
    }
    ctx.rec.table("convergence_errors", table);
    let mut ok = true;
    for (i, w) in errors.windows(2).enumerate() {
        let ratio = w[0] / w[1];
        ctx.rec.metric(format!("ratio_{i}"), ratio);
        ok &= ratio >= cfg.tolerances.refinement_ratio;
    }
    ctx.rec.verdict("refinement_ratio", ok);
}
