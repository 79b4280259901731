//! Closed-form solutions, the residual oracle and the flat-boundary barrier.
//!
//! The radial solutions are
//!
//! * `u = a |x - x0|^{p'} + b (t - t0) + c` for the p-Laplace equation, with
//!   `b = a^{p-1} n (p')^{p-1}`;
//! * `u = a |x - x0|^{1 + 1/(1+gamma)} + b (t - t0) + c` for
//!   `u_t = |Du|^gamma tr(D^2 u)`, with
//!   `b = a^{1+gamma} (1 + 1/(1+gamma))^{1+gamma} (n - 1 + 1/(1+gamma))`.
//!
//! `a = 1` and `x0 = t0 = c = 0` give the canonical solutions. The time
//! coefficient is carried explicitly (not recomputed from `a`) so that the
//! residual oracle checks rescaled solutions independently.

use crate::coefficients::CoefficientParams;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{SymMatrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExactFamily {
    PLaplaceRadial { n: usize, p: f64 },
    FullyNonlinearRadial { n: usize, gamma: f64 },
}

/// `n (p')^{p-1}`.
pub fn p_laplace_constant(n: usize, p: f64) -> f64 {
    let conj = p / (p - 1.0);
    n as f64 * conj.powf(p - 1.0)
}

/// `(1 + 1/(1+gamma))^{1+gamma} (n - 1 + 1/(1+gamma))`.
pub fn fully_nonlinear_constant(n: usize, gamma: f64) -> f64 {
    let k = 1.0 / (1.0 + gamma);
    (1.0 + k).powf(1.0 + gamma) * (n as f64 - 1.0 + k)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactSolution {
    family: ExactFamily,
    amplitude: f64,
    time_coeff: f64,
    center: Vector,
    t0: f64,
    offset: f64,
}

/// Value and analytic derivatives at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactJet {
    pub value: f64,
    pub gradient: Vector,
    pub hessian: SymMatrix,
    pub u_t: f64,
}

impl ExactSolution {
    pub fn p_laplace(n: usize, p: f64) -> Result<Self> {
        if !(p > 2.0) || n == 0 {
            return Err(Error::InvalidParams(format!(
                "p-Laplace radial solution needs p > 2 and n >= 1 (got p = {p}, n = {n})"
            )));
        }
        Ok(Self::canonical(ExactFamily::PLaplaceRadial { n, p }, p_laplace_constant(n, p), n))
    }

    pub fn fully_nonlinear(n: usize, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || n == 0 {
            return Err(Error::InvalidParams(format!(
                "fully nonlinear radial solution needs gamma > 0 and n >= 1 (got gamma = {gamma}, n = {n})"
            )));
        }
        Ok(Self::canonical(
            ExactFamily::FullyNonlinearRadial { n, gamma },
            fully_nonlinear_constant(n, gamma),
            n,
        ))
    }

    fn canonical(family: ExactFamily, time_coeff: f64, n: usize) -> Self {
        Self {
            family,
            amplitude: 1.0,
            time_coeff,
            center: Vector::zeros(n.min(crate::linalg::MAX_DIM)),
            t0: 0.0,
            offset: 0.0,
        }
    }

    pub fn family(&self) -> ExactFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        match self.family {
            ExactFamily::PLaplaceRadial { n, .. } | ExactFamily::FullyNonlinearRadial { n, .. } => n,
        }
    }

    /// Spatial power: `p'` or `1 + 1/(1+gamma)`.
    pub fn power(&self) -> f64 {
        match self.family {
            ExactFamily::PLaplaceRadial { p, .. } => p / (p - 1.0),
            ExactFamily::FullyNonlinearRadial { gamma, .. } => 1.0 + 1.0 / (1.0 + gamma),
        }
    }

    /// The constant `u_t`.
    pub fn time_coefficient(&self) -> f64 {
        self.time_coeff
    }

    /// `c_{n,p}` or `C(n, gamma)`, independent of any reparameterization.
    pub fn family_constant(&self) -> f64 {
        match self.family {
            ExactFamily::PLaplaceRadial { n, p } => p_laplace_constant(n, p),
            ExactFamily::FullyNonlinearRadial { n, gamma } => fully_nonlinear_constant(n, gamma),
        }
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    /// Translate by `(dx, dt)` and add a constant.
    pub fn translated(&self, dx: &Vector, dt: f64, dc: f64) -> Self {
        Self {
            center: self.center.add(dx),
            t0: self.t0 + dt,
            offset: self.offset + dc,
            ..*self
        }
    }

    /// `v(x, t) = u(r x, r^2 rho^{k} t) / (r rho)` with `k = 2 - p` (p-Laplace)
    /// or `k = -gamma` (fully nonlinear).
    pub fn rescaled(&self, r: f64, rho: f64) -> Self {
        let k = match self.family {
            ExactFamily::PLaplaceRadial { p, .. } => 2.0 - p,
            ExactFamily::FullyNonlinearRadial { gamma, .. } => -gamma,
        };
        let time_scale = r * r * rho.powf(k);
        let s = self.power();
        Self {
            family: self.family,
            amplitude: self.amplitude * r.powf(s) / (r * rho),
            time_coeff: self.time_coeff * time_scale / (r * rho),
            center: self.center.scale(1.0 / r),
            t0: self.t0 / time_scale,
            offset: self.offset / (r * rho),
        }
    }

    pub fn value(&self, x: &Vector, t: f64) -> f64 {
        let d = x.sub(&self.center);
        self.amplitude * d.norm().powf(self.power()) + self.time_coeff * (t - self.t0) + self.offset
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        let d = x.sub(&self.center);
        let r = d.norm();
        if r == 0.0 {
            return Vector::zeros(d.dim());
        }
        let s = self.power();
        d.scale(self.amplitude * s * r.powf(s - 2.0))
    }

    /// Value, gradient, Hessian and `u_t`; the Hessian is singular at the center.
    pub fn evaluate(&self, x: &Vector, t: f64) -> Result<ExactJet> {
        let d = x.sub(&self.center);
        let r = d.norm();
        if r == 0.0 {
            return Err(Error::Singular("Hessian requested at the center of a radial solution"));
        }
        let s = self.power();
        let n = d.dim();
        let dhat = d.scale(1.0 / r);
        let hessian = SymMatrix::identity(n)
            .add(&SymMatrix::outer(&dhat).scale(s - 2.0))
            .scale(self.amplitude * s * r.powf(s - 2.0));
        Ok(ExactJet {
            value: self.value(x, t),
            gradient: self.gradient(x),
            hessian,
            u_t: self.time_coeff,
        })
    }
}

/// `u_t - (equation right-hand side)` evaluated with analytic derivatives.
pub fn residual_oracle(sol: &ExactSolution, params: &CoefficientParams, x: &Vector, t: f64) -> Result<f64> {
    let jet = sol.evaluate(x, t)?;
    Ok(jet.u_t - params.evolution_rate(&jet.gradient, &jet.hessian))
}

/// Boundary datum `phi = c + g.x + x^T H x / 2 + tau t`, which covers the
/// affine and quadratic data used with the barrier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticDatum {
    pub constant: f64,
    pub linear: Vector,
    pub hessian: SymMatrix,
    pub time_rate: f64,
}

impl QuadraticDatum {
    pub fn zero(dim: usize) -> Self {
        Self {
            constant: 0.0,
            linear: Vector::zeros(dim),
            hessian: SymMatrix::zeros(dim),
            time_rate: 0.0,
        }
    }

    /// `phi(x, t) = x_axis`.
    pub fn coordinate(dim: usize, axis: usize) -> Self {
        Self {
            linear: Vector::unit(dim, axis),
            ..Self::zero(dim)
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.dim()
    }

    pub fn value(&self, x: &Vector, t: f64) -> f64 {
        self.constant + self.linear.dot(x) + 0.5 * self.hessian.quad_form(x) + self.time_rate * t
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        self.linear.add(&self.hessian.mul_vec(x))
    }

    /// `sup |phi|` over `{|x|_inf <= 1, x_n >= 0} x [-1, 0]`, by vertex and
    /// dense sampling of the box.
    pub fn sup_on_unit_half_cylinder(&self) -> f64 {
        let n = self.dim();
        let steps = 64usize;
        let mut sup: f64 = 0.0;
        let count = (steps + 1).pow(n as u32);
        for idx in 0..count {
            let mut x = Vector::zeros(n);
            let mut rem = idx;
            for a in 0..n {
                let i = rem % (steps + 1);
                rem /= steps + 1;
                let frac = i as f64 / steps as f64;
                x[a] = if a + 1 == n { frac } else { 2.0 * frac - 1.0 };
            }
            for t in [-1.0, 0.0] {
                sup = sup.max(self.value(&x, t).abs());
            }
        }
        sup
    }
}

/// `v(x, t) = A (1 - |x + e_n|^{-beta}) - A t + phi(x, t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Barrier {
    pub a: f64,
    pub beta: f64,
    pub phi: QuadraticDatum,
    /// Level the barrier must dominate on the lateral and bottom boundary.
    pub bound_u: f64,
}

impl Barrier {
    pub fn new(a: f64, beta: f64, phi: QuadraticDatum, bound_u: f64) -> Result<Self> {
        if !(a > 0.0 && beta > 0.0) {
            return Err(Error::InvalidParams(format!("barrier needs A > 0 and beta > 0 (got {a}, {beta})")));
        }
        Ok(Self { a, beta, phi, bound_u })
    }

    fn shifted(x: &Vector) -> Vector {
        let mut y = *x;
        let n = y.dim();
        y[n - 1] += 1.0;
        y
    }

    pub fn value(&self, x: &Vector, t: f64) -> f64 {
        let y = Self::shifted(x);
        self.a * (1.0 - y.norm().powf(-self.beta)) - self.a * t + self.phi.value(x, t)
    }

    pub fn time_derivative(&self) -> f64 {
        -self.a + self.phi.time_rate
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        let y = Self::shifted(x);
        let r = y.norm();
        y.scale(self.beta * self.a * r.powf(-self.beta - 2.0)).add(&self.phi.gradient(x))
    }

    pub fn hessian(&self, x: &Vector) -> SymMatrix {
        let y = Self::shifted(x);
        let r = y.norm();
        let n = y.dim();
        let radial = SymMatrix::identity(n)
            .scale(self.beta * self.a * r.powf(-self.beta - 2.0))
            .sub(&SymMatrix::outer(&y).scale(self.beta * (self.beta + 2.0) * self.a * r.powf(-self.beta - 4.0)));
        radial.add(&self.phi.hessian)
    }

    /// `v_t - a_eps(Dv) : D^2 v`, nonnegative for a supersolution.
    pub fn supersolution_defect(&self, params: &CoefficientParams, x: &Vector) -> f64 {
        self.time_derivative() - params.evolution_rate(&self.gradient(x), &self.hessian(x))
    }
}

/// Uniform sample of the closed half-cylinder `Q_1^+` with spacing `h` in
/// space and time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfCylinderSample {
    pub dim: usize,
    pub h: f64,
}

impl HalfCylinderSample {
    pub fn new(dim: usize, h: f64) -> Result<Self> {
        let m = 1.0 / h;
        if !(1..=2).contains(&dim) || !(h > 0.0) || (m - m.round()).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!("sample needs dim in {{1, 2}} and 1/h integral (h = {h})")));
        }
        Ok(Self { dim, h })
    }

    fn cells(&self) -> usize {
        (1.0 / self.h).round() as usize
    }

    /// Spatial sample points, tangential axes over `[-1, 1]`, normal axis over `[0, 1]`.
    pub fn points(&self) -> Vec<Vector> {
        let m = self.cells() as isize;
        let normal: Vec<f64> = (0..=m).map(|i| i as f64 * self.h).collect();
        let tangential: Vec<f64> = (-m..=m).map(|i| i as f64 * self.h).collect();
        match self.dim {
            1 => normal.iter().map(|&xn| Vector::from_slice(&[xn])).collect(),
            _ => normal
                .iter()
                .flat_map(|&xn| tangential.iter().map(move |&x1| Vector::from_slice(&[x1, xn])))
                .collect(),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        let m = self.cells();
        (0..=m).map(|k| -1.0 + k as f64 * self.h).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierReport {
    /// `min (v_t - a_eps(Dv) : D^2 v)` over the sample.
    pub min_supersolution_defect: f64,
    /// `min (v - phi)` on `{x_n = 0}`.
    pub min_flat_margin: f64,
    /// `min (v - bound_u)` on the lateral and bottom boundary off `{x_n = 0}`.
    pub min_lateral_margin: f64,
    pub sample_points: usize,
}

impl BarrierReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.min_supersolution_defect >= -tol && self.min_flat_margin >= -tol && self.min_lateral_margin >= -tol
    }
}

/// Checks the three barrier conditions at every sample point.
pub fn verify_barrier(
    barrier: &Barrier,
    params: &CoefficientParams,
    sample: &HalfCylinderSample,
    exec: Exec,
) -> BarrierReport {
    let points = sample.points();
    let times = sample.times();
    let n = sample.dim;
    let on_lateral = |x: &Vector| {
        let xn = x[n - 1];
        (xn >= 1.0 - 1e-12) || (0..n - 1).any(|a| x[a].abs() >= 1.0 - 1e-12)
    };
    let per_point = exec.map_items(&points, |x| {
        // v_t and D^2 v do not depend on t, so the defect is computed once per point.
        let defect = barrier.supersolution_defect(params, x);
        let mut flat = f64::INFINITY;
        let mut lateral = f64::INFINITY;
        let xn = x[n - 1];
        for (k, &t) in times.iter().enumerate() {
            let v = barrier.value(x, t);
            if xn == 0.0 {
                flat = flat.min(v - barrier.phi.value(x, t));
            } else if on_lateral(x) || k == 0 {
                lateral = lateral.min(v - barrier.bound_u);
            }
        }
        (defect, flat, lateral)
    });
    let mut report = BarrierReport {
        min_supersolution_defect: f64::INFINITY,
        min_flat_margin: f64::INFINITY,
        min_lateral_margin: f64::INFINITY,
        sample_points: points.len() * times.len(),
    };
    for (d, f, l) in per_point {
        report.min_supersolution_defect = report.min_supersolution_defect.min(d);
        report.min_flat_margin = report.min_flat_margin.min(f);
        report.min_lateral_margin = report.min_lateral_margin.min(l);
    }
    report
}

pub const BARRIER_BETA_CAP: f64 = 1024.0;
pub const BARRIER_A_CAP: f64 = 1048576.0;

/// A verified barrier together with the search trace that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct BarrierSearch {
    pub barrier: Barrier,
    pub report: BarrierReport,
    /// Every `(beta, A)` tried, with its report, in search order.
    pub trace: Vec<(f64, f64, BarrierReport)>,
}

/// Doubling search over `beta` (outer) and `A` (inner) starting from 1, until
/// the sampled barrier conditions hold within `tol`.
pub fn build_barrier(
    phi: QuadraticDatum,
    params: &CoefficientParams,
    bound_u: f64,
    sample: &HalfCylinderSample,
    tol: f64,
    exec: Exec,
) -> Result<BarrierSearch> {
    if phi.dim() != sample.dim {
        return Err(Error::InvalidParams("datum and sample dimensions differ".into()));
    }
    let mut trace = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut beta = 1.0;
    while beta <= BARRIER_BETA_CAP {
        let mut a = 1.0;
        while a <= BARRIER_A_CAP {
            let barrier = Barrier::new(a, beta, phi, bound_u)?;
            let report = verify_barrier(&barrier, params, sample, exec);
            trace.push((beta, a, report));
            if report.passes(tol) {
                return Ok(BarrierSearch { barrier, report, trace });
            }
            best = best.max(
                report
                    .min_supersolution_defect
                    .min(report.min_flat_margin)
                    .min(report.min_lateral_margin),
            );
            a *= 2.0;
        }
        beta *= 2.0;
    }
    Err(Error::BarrierSearchFailed {
        condition: "no (beta, A) below the caps satisfies all three conditions",
        best,
    })
}
