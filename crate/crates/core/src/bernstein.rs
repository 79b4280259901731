//! Pointwise and conclusion-level checks of the Bernstein argument for
//! `sup |u_t|`.
//!
//! The argument studies `v = eta^2 u_t^2 + delta A (eps^2 + |Du|^2)^{(2-beta)/2}`
//! with `A = sup |eta u_t|`. Exponent domination fixes `beta`; for large
//! `delta` the maximum of `v` sits where `eta = 0` or `u_t = 0`, so
//! `A^2 <= max v <= 2 delta A`, i.e. `A <= 2 delta`. The nodewise sign of
//! `v_t - Lv` is only reported; the asserted check is the conclusion.

use crate::coefficients::{a_tensor, a_tensor_gradient, CoefficientParams, Family};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{Domain, Field, Grid, SpaceTimeSolution};
use crate::linalg::{Jet, SymMatrix, Vector};
use crate::solver::intrinsic_rescale;
use crate::stencil;

/// `beta = max{3 - p, 0}` for the p-Laplace family, `max{1 - gamma, 0}` otherwise.
pub fn select_beta(family: &Family) -> Result<f64> {
    match family {
        Family::PLaplace { p } if *p > 2.0 => Ok((3.0 - p).max(0.0)),
        Family::FullyNonlinear { gamma, .. } | Family::GeneralQuasilinear { gamma, .. } if *gamma > 0.0 => {
            Ok((1.0 - gamma).max(0.0))
        }
        _ => Err(Error::InvalidParams(format!(
            "beta selection needs p > 2 or gamma > 0, got {family:?}"
        ))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DominationReport {
    /// Exponent of the good term.
    pub lhs: f64,
    /// Exponents of the three terms to be absorbed.
    pub terms: [f64; 3],
    /// The closed form claimed for their minimum.
    pub claimed_min: f64,
    /// `min(terms) == claimed_min` exactly.
    pub identity_holds: bool,
    /// `claimed_min - lhs`, evaluated as `(beta - beta_min) / 2` so that the
    /// threshold case cancels exactly.
    pub margin: f64,
    pub passes: bool,
}

/// Compares the good-term exponent with the three absorbed exponents.
///
/// * p-Laplace: `(p-beta-2)/2` against `{p-2, 3(p-2)/2, (2p-5)/2}`, min `(2p-5)/2`.
/// * fully nonlinear: `-(gamma+beta)/2` against `{0, gamma/2, -1/2}`, min `-1/2`.
/// * general quasilinear: `(gamma-beta)/2` against `{gamma, 3 gamma/2, (2 gamma-1)/2}`,
///   min `(2 gamma-1)/2`.
pub fn check_domination(family: &Family, beta: f64) -> DominationReport {
    let (lhs, terms, claimed_min, beta_min) = match family {
        Family::PLaplace { p } => (
            (p - beta - 2.0) / 2.0,
            [p - 2.0, 3.0 * (p - 2.0) / 2.0, (2.0 * p - 5.0) / 2.0],
            (2.0 * p - 5.0) / 2.0,
            3.0 - p,
        ),
        Family::FullyNonlinear { gamma, .. } => (
            -(gamma + beta) / 2.0,
            [0.0, gamma / 2.0, -0.5],
            -0.5,
            1.0 - gamma,
        ),
        Family::GeneralQuasilinear { gamma, .. } => (
            (gamma - beta) / 2.0,
            [*gamma, 3.0 * gamma / 2.0, (2.0 * gamma - 1.0) / 2.0],
            (2.0 * gamma - 1.0) / 2.0,
            1.0 - gamma,
        ),
    };
    let min = terms.iter().copied().fold(f64::INFINITY, f64::min);
    let margin = (beta - beta_min) / 2.0;
    let identity_holds = min == claimed_min;
    DominationReport {
        lhs,
        terms,
        claimed_min,
        identity_holds,
        margin,
        passes: identity_holds && margin >= 0.0,
    }
}

/// Relative slack for the jet inequalities.
pub const JET_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `(xi^T M q)^2 <= (eps^2 + |q|^2) |M xi|^2`.
pub fn jet_cauchy_schwarz(jet: &Jet, epsilon: f64, xi: &Vector) -> InequalityReport {
    let m_xi = jet.m.mul_vec(xi);
    let lhs = m_xi.dot(&jet.q).powi(2);
    let rhs = (epsilon * epsilon + jet.q.norm_sq()) * m_xi.norm_sq();
    InequalityReport {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + JET_SLACK),
    }
}

/// `|u_t| <= sqrt(n) Lambda_p s^{k/2} |M|` (quasilinear) or
/// `|u_t| <= n Lambda s^{gamma/2} |M|` (fully nonlinear), with `|M|` the
/// Frobenius norm and `u_t` required to equal the equation value.
pub fn jet_ut_bound(jet: &Jet, params: &CoefficientParams) -> Result<InequalityReport> {
    let expected = params.evolution_rate(&jet.q, &jet.m);
    if (jet.tau - expected).abs() > JET_SLACK * (1.0 + expected.abs()) {
        return Err(Error::InconsistentJet {
            given: jet.tau,
            expected,
        });
    }
    let n = jet.dim() as f64;
    let big_lambda = params.ellipticity().big_lambda;
    let dim_factor = match params.family {
        Family::FullyNonlinear { .. } => n,
        _ => n.sqrt(),
    };
    let rhs = dim_factor * big_lambda * params.multiplier(&jet.q)? * jet.m.frobenius();
    let lhs = jet.tau.abs();
    Ok(InequalityReport {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + JET_SLACK),
    })
}

/// One fuzz input: gradient, Hessian and Cauchy–Schwarz direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JetSample {
    pub q: Vector,
    pub m: SymMatrix,
    pub xi: Vector,
}

impl JetSample {
    /// Rank-one `M = c q q^T` probed along `xi = q`: the Cauchy–Schwarz
    /// equality configuration.
    pub fn aligned(q: Vector, c: f64) -> Self {
        Self {
            q,
            m: SymMatrix::outer(&q).scale(c),
            xi: q,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FuzzReport {
    pub samples: usize,
    pub cs_violations: usize,
    pub ut_violations: usize,
    /// Largest `lhs / rhs` seen, for each inequality.
    pub max_cs_ratio: f64,
    pub max_ut_ratio: f64,
}

impl FuzzReport {
    pub fn passes(&self) -> bool {
        self.cs_violations == 0 && self.ut_violations == 0
    }
}

/// Both jet inequalities on every sample, with `tau` set from the equation.
pub fn fuzz_jets(params: &CoefficientParams, samples: &[JetSample], exec: Exec) -> Result<FuzzReport> {
    let results = exec.map_items(samples, |s| -> Result<(InequalityReport, InequalityReport)> {
        let tau = params.evolution_rate(&s.q, &s.m);
        let jet = Jet::new(s.q, s.m, tau)?;
        Ok((jet_cauchy_schwarz(&jet, params.epsilon, &s.xi), jet_ut_bound(&jet, params)?))
    });
    let ratio = |r: &InequalityReport| if r.rhs > 0.0 { r.lhs / r.rhs } else if r.lhs > 0.0 { f64::INFINITY } else { 0.0 };
    let mut report = FuzzReport::default();
    for r in results {
        let (cs, ut) = r?;
        report.samples += 1;
        report.cs_violations += usize::from(!cs.holds);
        report.ut_violations += usize::from(!ut.holds);
        report.max_cs_ratio = report.max_cs_ratio.max(ratio(&cs));
        report.max_ut_ratio = report.max_ut_ratio.max(ratio(&ut));
    }
    Ok(report)
}

/// Smooth step `S(z) = f(z) / (f(z) + f(1-z))`, `f(z) = exp(-1/z)`, with its
/// first two derivatives.
fn smooth_step(z: f64) -> (f64, f64, f64) {
    if z <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if z >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let f = |z: f64| {
        let e = (-1.0 / z).exp();
        (e, e / (z * z), e * (1.0 / z.powi(4) - 2.0 / z.powi(3)))
    };
    let (a, a1, a2) = f(z);
    let (b, b1, b2) = f(1.0 - z);
    let (b1, b2) = (-b1, b2);
    let d = a + b;
    let num = a1 * b - a * b1;
    let num1 = a2 * b - a * b2;
    (a / d, num / (d * d), (num1 * d - 2.0 * num * (a1 + b1)) / (d * d * d))
}

/// `eta(x, t) = prod_a b(x_a) c(t)` with `b = 1` on `|s| <= 1/2`, `b = 0` on
/// `|s| >= 0.95`, and `c = 1` on `t >= -1/4`, `c = 0` on `t <= -0.95^2`. It is
/// identically one on `Q_{1/2}` and supported in `Q_{0.95}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Self { inner: 0.5, outer: 0.95 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffJet {
    pub eta: f64,
    pub eta_t: f64,
    pub grad: Vector,
    pub hessian: SymMatrix,
}

impl Cutoff {
    fn space_profile(&self, s: f64) -> (f64, f64, f64) {
        let w = self.outer - self.inner;
        let (st, st1, st2) = smooth_step((s.abs() - self.inner) / w);
        let sign = if s < 0.0 { -1.0 } else { 1.0 };
        (1.0 - st, -sign * st1 / w, -st2 / (w * w))
    }

    fn time_profile(&self, t: f64) -> (f64, f64) {
        let (lo, hi) = (-self.outer * self.outer, -self.inner * self.inner);
        let (c, c1, _) = smooth_step((t - lo) / (hi - lo));
        (c, c1 / (hi - lo))
    }

    pub fn evaluate(&self, x: &Vector, t: f64) -> CutoffJet {
        let n = x.dim();
        let prof: Vec<(f64, f64, f64)> = (0..n).map(|a| self.space_profile(x[a])).collect();
        let (c, c_t) = self.time_profile(t);
        let product_except = |skip: &[usize]| -> f64 {
            (0..n).filter(|a| !skip.contains(a)).map(|a| prof[a].0).product()
        };
        let space: f64 = product_except(&[]);
        let mut grad = Vector::zeros(n);
        let mut hessian = SymMatrix::zeros(n);
        for a in 0..n {
            grad[a] = prof[a].1 * product_except(&[a]) * c;
            for b in 0..=a {
                let v = if a == b {
                    prof[a].2 * product_except(&[a])
                } else {
                    prof[a].1 * prof[b].1 * product_except(&[a, b])
                };
                hessian.set(a, b, v * c);
            }
        }
        CutoffJet {
            eta: space * c,
            eta_t: space * c_t,
            grad,
            hessian,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BernsteinConfig {
    pub delta: f64,
    pub beta: f64,
    pub cutoff: Cutoff,
    /// `sup |eta u_t|` over the run.
    pub a: f64,
    /// `|u_t|` at or below this counts as vanishing in the dichotomy diagnostic.
    pub ut_tolerance: f64,
}

impl BernsteinConfig {
    /// Config with `A` measured on `solution` and `beta` from the family rule.
    pub fn for_solution(solution: &SpaceTimeSolution, params: &CoefficientParams, delta: f64) -> Result<Self> {
        let beta = select_beta(&params.family)?;
        let cutoff = Cutoff::default();
        if !(delta > 0.0) {
            return Err(Error::InvalidParams(format!("delta = {delta} must be positive")));
        }
        Ok(Self {
            delta,
            beta,
            cutoff,
            a: sup_eta_ut(solution, &cutoff)?,
            ut_tolerance: 1e-8,
        })
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..*self }
    }
}

/// Backward-difference `u_t` at every level from 1 on.
fn time_derivatives(solution: &SpaceTimeSolution) -> Result<Vec<Field>> {
    (1..=solution.grid().steps())
        .map(|k| stencil::time_derivative(solution, k))
        .collect()
}

/// `sup |eta u_t|` over levels with a backward difference.
pub fn sup_eta_ut(solution: &SpaceTimeSolution, cutoff: &Cutoff) -> Result<f64> {
    let g = solution.grid();
    let mut sup: f64 = 0.0;
    for (i, ut) in time_derivatives(solution)?.iter().enumerate() {
        let t = g.time(i + 1);
        for n in 0..g.node_count() {
            sup = sup.max((cutoff.evaluate(&g.point(n), t).eta * ut.at(n)).abs());
        }
    }
    Ok(sup)
}

/// `v = eta^2 u_t^2 + delta A (eps^2 + |Du|^2)^{(2-beta)/2}` at levels `1..=steps`
/// (index `i` holds level `i + 1`).
pub fn auxiliary_v(solution: &SpaceTimeSolution, config: &BernsteinConfig, params: &CoefficientParams) -> Result<Vec<Field>> {
    let g = *solution.grid();
    let eps2 = params.epsilon * params.epsilon;
    let uts = time_derivatives(solution)?;
    uts.iter()
        .enumerate()
        .map(|(i, ut)| {
            let level = solution.level(i + 1);
            let t = g.time(i + 1);
            let values = (0..g.node_count())
                .map(|n| {
                    let eta = config.cutoff.evaluate(&g.point(n), t).eta;
                    let q = stencil::gradient_at(level, n);
                    let s = eps2 + q.norm_sq();
                    (eta * ut.at(n)).powi(2) + config.delta * config.a * s.powf(1.0 - 0.5 * config.beta)
                })
                .collect();
            Field::new(g, values)
        })
        .collect()
}

/// `Lw = a^{ij}(Du) w_ij + a^{ij}_{q_l}(Du) u_ij w_l`; for the fully nonlinear
/// family `a^{ij} = s^{gamma/2} F_ij(D^2u)` and the lower-order coefficient is
/// `gamma s^{gamma/2 - 1} F(D^2u) u_l`.
fn linearized(params: &CoefficientParams, q: &Vector, m: &SymMatrix, w_grad: &Vector, w_hess: &SymMatrix) -> Result<f64> {
    match &params.family {
        Family::FullyNonlinear { gamma, operator } => {
            let s = params.epsilon * params.epsilon + q.norm_sq();
            let mult = params.multiplier(q)?;
            let second = mult * operator.derivative(m).contract(w_hess);
            let first = gamma * mult / s * operator.evaluate(m) * q.dot(w_grad);
            Ok(second + first)
        }
        _ => {
            let a = a_tensor(params, q)?;
            let da = a_tensor_gradient(params, q)?;
            let first: f64 = (0..q.dim()).map(|l| da[l].contract(m) * w_grad[l]).sum();
            Ok(a.contract(w_hess) + first)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxLocation {
    pub node: usize,
    pub level: usize,
    pub point: Vector,
    pub t: f64,
    pub value: f64,
    pub eta: f64,
    pub ut: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DefectReport {
    pub a: f64,
    pub delta: f64,
    pub beta: f64,
    pub max_v: MaxLocation,
    /// The maximum of `v` sits where `eta` vanishes.
    pub max_on_cutoff_zero_set: bool,
    /// The maximum of `v` sits where `|u_t| <= ut_tolerance`.
    pub max_at_vanishing_ut: bool,
    pub max_defect: f64,
    pub min_defect: f64,
    /// Interior nodes with `v_t - Lv > 0`.
    pub positive_defect_nodes: usize,
    pub evaluated_nodes: usize,
    /// Nodes without a full space-time stencil.
    pub skipped_nodes: usize,
    /// `2 delta A - max v`.
    pub margin: f64,
    /// `max v <= 2 delta A`, which with `A^2 <= max v` gives `A <= 2 delta`.
    pub verdict: bool,
    pub a_le_two_delta: bool,
}

pub fn defect_report(
    solution: &SpaceTimeSolution,
    config: &BernsteinConfig,
    params: &CoefficientParams,
    exec: Exec,
) -> Result<DefectReport> {
    let g = *solution.grid();
    let v = auxiliary_v(solution, config, params)?;
    let uts = time_derivatives(solution)?;

    let mut max_v = MaxLocation {
        node: 0,
        level: 1,
        point: g.point(0),
        t: g.time(1),
        value: f64::NEG_INFINITY,
        eta: 0.0,
        ut: 0.0,
    };
    for (i, field) in v.iter().enumerate() {
        for (n, &val) in field.values().iter().enumerate() {
            if val > max_v.value {
                let t = g.time(i + 1);
                max_v = MaxLocation {
                    node: n,
                    level: i + 1,
                    point: g.point(n),
                    t,
                    value: val,
                    eta: config.cutoff.evaluate(&g.point(n), t).eta,
                    ut: uts[i].at(n),
                };
            }
        }
    }

    // Defect at interior nodes of levels with a backward difference of v.
    let interior = g.interior_nodes();
    let per_level = exec.map(v.len().saturating_sub(1), |j| -> Result<(f64, f64, usize, usize)> {
        let (i, level) = (j + 1, j + 2);
        let u = solution.level(level);
        let (mut hi, mut lo, mut pos, mut count) = (f64::NEG_INFINITY, f64::INFINITY, 0usize, 0usize);
        for &n in &interior {
            let q = stencil::gradient_at(u, n);
            let m = stencil::hessian_at(u, n)?;
            let w_grad = stencil::gradient_at(&v[i], n);
            let w_hess = stencil::hessian_at(&v[i], n)?;
            let v_t = (v[i].at(n) - v[i - 1].at(n)) / g.dt();
            let d = v_t - linearized(params, &q, &m, &w_grad, &w_hess)?;
            hi = hi.max(d);
            lo = lo.min(d);
            pos += usize::from(d > 0.0);
            count += 1;
        }
        Ok((hi, lo, pos, count))
    });
    let (mut max_defect, mut min_defect, mut positive, mut evaluated) = (f64::NEG_INFINITY, f64::INFINITY, 0, 0);
    for r in per_level {
        let (hi, lo, pos, count) = r?;
        max_defect = max_defect.max(hi);
        min_defect = min_defect.min(lo);
        positive += pos;
        evaluated += count;
    }
    let total = g.node_count() * (g.steps() + 1);

    let margin = 2.0 * config.delta * config.a - max_v.value;
    Ok(DefectReport {
        a: config.a,
        delta: config.delta,
        beta: config.beta,
        max_on_cutoff_zero_set: max_v.eta == 0.0,
        max_at_vanishing_ut: max_v.ut.abs() <= config.ut_tolerance,
        max_v,
        max_defect,
        min_defect,
        positive_defect_nodes: positive,
        evaluated_nodes: evaluated,
        skipped_nodes: total - evaluated,
        margin,
        verdict: margin >= 0.0,
        a_le_two_delta: config.a <= 2.0 * config.delta,
    })
}

/// Doubling ladder `2^lo, ..., 2^hi`.
pub fn delta_ladder(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(k)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaSweep {
    pub delta: f64,
    pub report: DefectReport,
    /// `(delta, margin)` for every rung tried, in ladder order.
    pub trace: Vec<(f64, f64)>,
}

/// Smallest `delta` in the increasing ladder whose verdict holds.
pub fn delta_sweep(
    solution: &SpaceTimeSolution,
    params: &CoefficientParams,
    ladder: &[f64],
    exec: Exec,
) -> Result<DeltaSweep> {
    if ladder.is_empty() || ladder.windows(2).any(|w| !(w[1] > w[0])) || ladder[0] <= 0.0 {
        return Err(Error::InvalidParams("delta ladder must be positive and increasing".into()));
    }
    let base = BernsteinConfig::for_solution(solution, params, ladder[0])?;
    let mut trace = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for &delta in ladder {
        let report = defect_report(solution, &base.with_delta(delta), params, exec)?;
        trace.push((delta, report.margin));
        best = best.max(report.margin);
        if report.verdict {
            return Ok(DeltaSweep { delta, report, trace });
        }
    }
    Err(Error::NoPassingDelta { best_margin: best })
}

/// A solution rescaled onto `Q_1` so that its gradient is below one.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitScaled {
    pub solution: SpaceTimeSolution,
    pub params: CoefficientParams,
    pub r: f64,
    pub rho: f64,
}

/// `v(x, t) = u(r x, r^2 rho^k t) / (r rho)` with `r` the source extent and
/// `rho = C_0 + 1`, `C_0 = max |Du|` over the stored levels. Spacing `h / r`
/// maps target nodes onto source nodes.
pub fn rescale_to_unit(
    solution: &SpaceTimeSolution,
    params: &CoefficientParams,
    time_steps: usize,
    exec: Exec,
) -> Result<UnitScaled> {
    let src = solution.grid();
    if src.half_space() {
        return Err(Error::InvalidParams("unit rescaling expects a full cylinder".into()));
    }
    let mut c0: f64 = 0.0;
    for level in solution.levels() {
        c0 = c0.max(stencil::gradient_norm(level)?.values().iter().fold(0.0, |m, v| m.max(*v)));
    }
    let rho = c0 + 1.0;
    let r = src.extent();
    let target = Grid::new(Domain::cylinder(src.dim(), 1.0, src.h() / r), time_steps)?;
    Ok(UnitScaled {
        solution: intrinsic_rescale(solution, params, r, rho, &target, exec)?,
        params: crate::solver::rescaled_params(params, rho),
        r,
        rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::SmoothOperatorF;

    fn fnl(gamma: f64) -> Family {
        Family::FullyNonlinear {
            gamma,
            operator: SmoothOperatorF::trace(),
        }
    }

    #[test]
    fn beta_examples() {
        assert_eq!(select_beta(&Family::PLaplace { p: 3.0 }).unwrap(), 0.0);
        assert_eq!(select_beta(&Family::PLaplace { p: 2.5 }).unwrap(), 0.5);
        assert_eq!(select_beta(&fnl(0.25)).unwrap(), 0.75);
        assert!(select_beta(&Family::PLaplace { p: 2.0 }).is_err());
    }

    #[test]
    fn domination_examples() {
        let r = check_domination(&Family::PLaplace { p: 3.0 }, 0.0);
        assert_eq!((r.lhs, r.claimed_min, r.margin), (0.5, 0.5, 0.0));
        assert!(r.passes);
        let r = check_domination(&Family::PLaplace { p: 4.0 }, 0.0);
        assert_eq!((r.lhs, r.claimed_min, r.margin), (1.0, 1.5, 0.5));
        let r = check_domination(&fnl(2.0), 0.5);
        assert_eq!(r.lhs, -1.25);
        assert!(r.passes && r.lhs <= r.claimed_min);
        let r = check_domination(&Family::PLaplace { p: 3.0 }, -0.5);
        assert!(!r.passes);
    }

    #[test]
    fn cauchy_schwarz_cases() {
        let m = SymMatrix::from_rows(&[&[1.0, 0.3], &[0.3, -2.0]]).unwrap();
        let jet = Jet::new(Vector::zeros(2), m, 0.0).unwrap();
        let r = jet_cauchy_schwarz(&jet, 0.1, &Vector::from_slice(&[0.4, 0.7]));
        assert!(r.holds && r.lhs == 0.0);

        let s = JetSample::aligned(Vector::from_slice(&[0.6, -0.8]), 1.7);
        let jet = Jet::new(s.q, s.m, 0.0).unwrap();
        let r = jet_cauchy_schwarz(&jet, 0.0, &s.xi);
        assert!(r.holds);
        assert!((r.lhs - r.rhs).abs() <= 1e-14 * r.rhs);
    }

    #[test]
    fn ut_bound_requires_consistent_tau() {
        let params = CoefficientParams::p_laplace(3.0, 0.1).unwrap();
        let m = SymMatrix::from_rows(&[&[1.0, 0.3], &[0.3, -2.0]]).unwrap();
        let q = Vector::from_slice(&[0.2, 0.5]);
        let bad = Jet::new(q, m, 100.0).unwrap();
        assert!(matches!(jet_ut_bound(&bad, &params), Err(Error::InconsistentJet { .. })));
        let good = Jet::new(q, m, params.evolution_rate(&q, &m)).unwrap();
        assert!(jet_ut_bound(&good, &params).unwrap().holds);
        let zero = Jet::new(q, SymMatrix::zeros(2), 0.0).unwrap();
        assert!(jet_ut_bound(&zero, &params).unwrap().holds);
    }

    #[test]
    fn smooth_step_derivatives() {
        for z in [0.1, 0.3, 0.5, 0.77, 0.95] {
            let h = 1e-5;
            let (_, d1, d2) = smooth_step(z);
            let fd1 = (smooth_step(z + h).0 - smooth_step(z - h).0) / (2.0 * h);
            let fd2 = (smooth_step(z + h).1 - smooth_step(z - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-7, "z = {z}");
            assert!((d2 - fd2).abs() < 1e-6, "z = {z}");
        }
        assert_eq!(smooth_step(0.5).0, 0.5);
    }

    #[test]
    fn cutoff_shape_and_derivatives() {
        let c = Cutoff::default();
        let v = |a: f64, b: f64| Vector::from_slice(&[a, b]);
        assert_eq!(c.evaluate(&v(0.5, -0.5), -0.25).eta, 1.0);
        assert_eq!(c.evaluate(&v(0.96, 0.0), 0.0).eta, 0.0);
        assert_eq!(c.evaluate(&v(0.0, 0.0), -0.95).eta, 0.0);
        let (x, t, h) = (v(0.7, -0.6), -0.5, 1e-5);
        let jet = c.evaluate(&x, t);
        let fd_t = (c.evaluate(&x, t + h).eta - c.evaluate(&x, t - h).eta) / (2.0 * h);
        assert!((jet.eta_t - fd_t).abs() < 1e-7);
        for a in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            let fd = (c.evaluate(&xp, t).eta - c.evaluate(&xm, t).eta) / (2.0 * h);
            assert!((jet.grad[a] - fd).abs() < 1e-7);
            let gfd = c.evaluate(&xp, t).grad.sub(&c.evaluate(&xm, t).grad).scale(0.5 / h);
            for b in 0..2 {
                assert!((jet.hessian.get(a, b) - gfd[b]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn time_constant_solution() {
        let g = Grid::new(Domain::cylinder(2, 1.0, 0.125), 16).unwrap();
        let st = SpaceTimeSolution::sample(|x, _| 0.3 * x[0] + 0.2 * x[1] * x[1], g);
        let params = CoefficientParams::p_laplace(3.0, 0.1).unwrap();
        let sweep = delta_sweep(&st, &params, &delta_ladder(-4, 4), Exec::Sequential).unwrap();
        assert_eq!(sweep.delta, 1.0 / 16.0);
        assert_eq!(sweep.report.a, 0.0);
        assert!(sweep.report.max_at_vanishing_ut);
        let cfg = BernsteinConfig::for_solution(&st, &params, 1.0).unwrap();
        for f in auxiliary_v(&st, &cfg, &params).unwrap() {
            assert!(f.values().iter().all(|&v| v == 0.0));
        }
    }
}
