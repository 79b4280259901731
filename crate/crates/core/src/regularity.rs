//! Exponent algebra and exponent measurement.
//!
//! The algebra is the intrinsic-scaling bookkeeping: a spatial gradient
//! exponent `alpha` for the p-Laplace evolution corresponds to the pair
//! `mu = alpha / (2 + alpha (2 - p))`, `nu = (1 + alpha) / (2 + alpha (2 - p))`,
//! and combining `C^{1,alpha}` in space with `C^{0,beta}` in time for `u`
//! gives `Du` Hölder in time with exponent `alpha beta / (1 + alpha)`.
//!
//! Measurements are log-log least squares fits on sampled differences.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, SpaceTimeSolution};
use crate::linalg::Vector;
use crate::stencil;

pub const MIN_PAIRS: usize = 8;

/// `(mu, nu)` for spatial exponent `alpha` and growth `p`.
pub fn scaling_exponents(alpha: f64, p: f64) -> Result<(f64, f64)> {
    let denom = 2.0 + alpha * (2.0 - p);
    if !(denom > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParams(format!(
            "2 + alpha (2 - p) = {denom} must be positive (alpha = {alpha}, p = {p})"
        )));
    }
    Ok((alpha / denom, (1.0 + alpha) / denom))
}

/// `alpha beta / (1 + alpha)`.
pub fn mixed_time_exponent(alpha: f64, beta: f64) -> f64 {
    alpha * beta / (1.0 + alpha)
}

/// The optimal spatial exponent `1 / (p - 1)` used as the default `alpha`.
/// Only the planar case is settled; in higher dimensions it is a conjecture.
pub fn default_alpha(p: f64) -> f64 {
    1.0 / (p - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentReport {
    pub fitted_exponent: f64,
    /// `exp` of the fitted intercept.
    pub fitted_constant: f64,
    pub r_squared: f64,
    pub predicted_exponent: Option<f64>,
    pub pair_count: usize,
    /// Largest observed `difference / separation^1`, for Lipschitz fits.
    pub max_ratio: f64,
}

impl ExponentReport {
    pub fn with_prediction(self, predicted: f64) -> Self {
        Self {
            predicted_exponent: Some(predicted),
            ..self
        }
    }

    pub fn deviation(&self) -> Option<f64> {
        self.predicted_exponent.map(|p| (self.fitted_exponent - p).abs())
    }
}

/// Least squares fit of `log y = a + b log x` over pairs with `x, y > 0`.
fn log_log_fit(pairs: &[(f64, f64)]) -> Result<ExponentReport> {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < MIN_PAIRS {
        return Err(Error::DegenerateFit(format!(
            "{} usable pairs, at least {MIN_PAIRS} needed",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("all separations are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    let max_ratio = pairs
        .iter()
        .filter(|(x, _)| *x > 0.0)
        .map(|(x, y)| y / x)
        .fold(0.0, f64::max);
    Ok(ExponentReport {
        fitted_exponent: slope,
        fitted_constant: intercept.exp(),
        r_squared,
        predicted_exponent: None,
        pair_count: pts.len(),
        max_ratio,
    })
}

/// Radii `4h * sqrt(2)^k` up to `r_max`. Even rungs land on axis nodes and odd
/// rungs on diagonal nodes of a grid with spacing `h`.
pub fn radius_ladder(h: f64, r_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let r = 4.0 * h * 2f64.powf(0.5 * k as f64);
        if r > r_max * (1.0 + 1e-12) {
            return out;
        }
        out.push(r);
        k += 1;
    }
}

fn probe_directions(dim: usize) -> Vec<Vector> {
    match dim {
        1 => vec![Vector::from_slice(&[1.0]), Vector::from_slice(&[-1.0])],
        _ => {
            let d = std::f64::consts::FRAC_1_SQRT_2;
            vec![
                Vector::from_slice(&[1.0, 0.0]),
                Vector::from_slice(&[-1.0, 0.0]),
                Vector::from_slice(&[0.0, 1.0]),
                Vector::from_slice(&[0.0, -1.0]),
                Vector::from_slice(&[d, d]),
                Vector::from_slice(&[-d, d]),
                Vector::from_slice(&[d, -d]),
                Vector::from_slice(&[-d, -d]),
            ]
        }
    }
}

/// Hölder fit of a gradient map: `|Du(c + r e) - Du(c)|` against `r` for
/// every radius and probe direction on which `gradient` is defined.
pub fn fit_holder_sampler<G>(gradient: G, center: &Vector, radii: &[f64]) -> Result<ExponentReport>
where
    G: Fn(&Vector) -> Option<Vector>,
{
    let g0 = gradient(center)
        .ok_or_else(|| Error::DegenerateFit("gradient unavailable at the center".into()))?;
    let mut pairs = Vec::new();
    for &r in radii {
        for e in probe_directions(center.dim()) {
            if let Some(g) = gradient(&center.add(&e.scale(r))) {
                pairs.push((r, g.sub(&g0).norm()));
            }
        }
    }
    log_log_fit(&pairs)
}

/// Hölder fit on gridded gradient components, interpolated bilinearly.
pub fn fit_spatial_holder(gradient_fields: &[Field], center: &Vector, radii: &[f64]) -> Result<ExponentReport> {
    let dim = center.dim();
    if gradient_fields.len() != dim {
        return Err(Error::InvalidParams(format!(
            "{} gradient components for a {dim}-dimensional center",
            gradient_fields.len()
        )));
    }
    fit_holder_sampler(
        |x| {
            let mut g = Vector::zeros(dim);
            for (a, f) in gradient_fields.iter().enumerate() {
                g[a] = f.interpolate(x)?;
            }
            Some(g)
        },
        center,
        radii,
    )
}

/// Time separations, in stored steps, used by the temporal fits.
fn separation_ladder(max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut j = 1usize;
    while j <= max {
        out.push(j);
        j = (j + 1).max((j as f64 * 1.5).round() as usize);
    }
    out
}

/// Levels whose time lies in `(-r^2, 0]` and nodes with `|x|_inf <= r`.
fn window(solution: &SpaceTimeSolution, r: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    let g = solution.grid();
    let levels: Vec<usize> = (0..=g.steps()).filter(|&k| Grid::in_time_window(g.time(k), r)).collect();
    let nodes: Vec<usize> = (0..g.node_count()).filter(|&n| g.in_ball(n, r)).collect();
    if levels.len() < 2 || nodes.is_empty() {
        return Err(Error::EmptyCylinder { r });
    }
    Ok((levels, nodes))
}

/// Fit of `sup_x |u(x, t) - u(x, s)|` against `|t - s|` on `Q_r`.
pub fn fit_time_lipschitz(solution: &SpaceTimeSolution, r: f64) -> Result<ExponentReport> {
    let g = solution.grid();
    let (levels, nodes) = window(solution, r)?;
    let first = levels[0];
    let last = *levels.last().expect("nonempty window");
    let mut pairs = Vec::new();
    for j in separation_ladder(last - first) {
        let mut sup: f64 = 0.0;
        for k in first..=last - j {
            let (a, b) = (solution.level(k), solution.level(k + j));
            for &n in &nodes {
                sup = sup.max((b.at(n) - a.at(n)).abs());
            }
        }
        pairs.push((g.time(first + j) - g.time(first), sup));
    }
    log_log_fit(&pairs).map(|r| r.with_prediction(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixedCheckReport {
    /// `alpha beta / (1 + alpha)`.
    pub exponent: f64,
    /// `max |Du(x,t) - Du(x,s)| / |t - s|^exponent` over the samples.
    pub max_ratio: f64,
    pub samples: usize,
    /// Samples whose probe point left the grid.
    pub skipped: usize,
    /// Samples where `|d| l` exceeded the four-term bound from the proof.
    pub chain_violations: usize,
    pub finite: bool,
}

/// Samples `(x, t, s)` with `t` the final level in `Q_r`, `s` on a geometric
/// ladder below it, and `x` an interior node of `Q_r`. For `d = Du(x,t) - Du(x,s)`
/// the probe `y = x + l d/|d|`, `l = |t-s|^{beta/(1+alpha)} / 4`, gives
/// `|d| l <= |R_t| + |R_s| + |u(y,t) - u(y,s)| + |u(x,t) - u(x,s)|` with `R`
/// the first-order Taylor remainders from `x` to `y`; that identity-level
/// bound is checked at every sample.
pub fn mixed_gradient_time_check(
    solution: &SpaceTimeSolution,
    alpha: f64,
    beta: f64,
    r: f64,
) -> Result<MixedCheckReport> {
    if !(alpha > 0.0 && alpha <= 1.0 && beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "alpha = {alpha} and beta = {beta} must lie in (0, 1]"
        )));
    }
    let g = solution.grid();
    let (levels, nodes) = window(solution, r)?;
    let exponent = mixed_time_exponent(alpha, beta);
    let last = *levels.last().expect("nonempty window");
    let first = levels[0];
    let ut = solution.level(last);
    let mut report = MixedCheckReport {
        exponent,
        max_ratio: 0.0,
        samples: 0,
        skipped: 0,
        chain_violations: 0,
        finite: true,
    };
    let interior: Vec<usize> = nodes.into_iter().filter(|&n| g.is_interior(n)).collect();
    for j in separation_ladder(last - first) {
        let us = solution.level(last - j);
        let tau = g.time(last) - g.time(last - j);
        for &n in &interior {
            let x = g.point(n);
            let (dt_grad, ds_grad) = (stencil::gradient_at(ut, n), stencil::gradient_at(us, n));
            let d = dt_grad.sub(&ds_grad);
            let dn = d.norm();
            report.samples += 1;
            let ratio = dn / tau.powf(exponent);
            report.finite &= ratio.is_finite();
            report.max_ratio = report.max_ratio.max(ratio);
            if dn == 0.0 {
                continue;
            }
            let l = 0.25 * tau.powf(beta / (1.0 + alpha));
            let step = d.scale(l / dn);
            let y = x.add(&step);
            let (Some(uyt), Some(uys)) = (ut.interpolate(&y), us.interpolate(&y)) else {
                report.skipped += 1;
                continue;
            };
            let (uxt, uxs) = (ut.at(n), us.at(n));
            let rt = uyt - uxt - dt_grad.dot(&step);
            let rs = uys - uxs - ds_grad.dot(&step);
            let bound = rt.abs() + rs.abs() + (uyt - uys).abs() + (uxt - uxs).abs();
            if dn * l > bound * (1.0 + 1e-12) + 1e-14 {
                report.chain_violations += 1;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactSolution;
    use crate::grid::Domain;

    #[test]
    fn scaling_examples() {
        let (mu, nu) = scaling_exponents(0.5, 3.0).unwrap();
        assert!((mu - 1.0 / 3.0).abs() < 1e-15 && (nu - 1.0).abs() < 1e-15);
        let (mu, nu) = scaling_exponents(0.25, 3.0).unwrap();
        assert!((mu - 1.0 / 7.0).abs() < 1e-15 && (nu - 5.0 / 7.0).abs() < 1e-15);
        assert!(scaling_exponents(1.0, 4.0).is_err());
    }

    #[test]
    fn mixed_examples() {
        assert_eq!(mixed_time_exponent(1.0, 1.0), 0.5);
        assert!((mixed_time_exponent(0.5, 1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((mixed_time_exponent(1.0 / 3.0, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn exact_gradient_exponent() {
        for p in [2.5, 3.0, 4.0] {
            let sol = ExactSolution::p_laplace(2, p).unwrap();
            let rep = fit_holder_sampler(|x| Some(sol.gradient(x)), &Vector::zeros(2), &radius_ladder(1.0 / 64.0, 0.5))
                .unwrap();
            assert!((rep.fitted_exponent - 1.0 / (p - 1.0)).abs() < 1e-10, "p = {p}");
            assert!((rep.fitted_constant - p / (p - 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_gradient_is_degenerate() {
        let g = Grid::new(Domain::cylinder(2, 0.5, 1.0 / 32.0), 1).unwrap();
        let lin = crate::grid::sample(|x, _| 2.0 * x[0] - x[1], &g, 0.0).unwrap();
        let grad = stencil::gradient(&lin).unwrap();
        assert!(matches!(
            fit_spatial_holder(&grad, &Vector::zeros(2), &radius_ladder(g.h(), 0.4)),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn exact_time_fit() {
        let sol = ExactSolution::p_laplace(2, 3.0).unwrap();
        let g = Grid::new(Domain::cylinder(2, 0.75, 1.0 / 8.0), 90).unwrap();
        let st = SpaceTimeSolution::sample(|x, t| sol.value(x, t), g);
        let rep = fit_time_lipschitz(&st, 0.5).unwrap();
        assert!((rep.fitted_exponent - 1.0).abs() < 1e-6);
        assert!((rep.fitted_constant - 4.5).abs() < 1e-6);
        assert!((rep.max_ratio - 4.5).abs() < 1e-6);

        let flat = SpaceTimeSolution::sample(|x, _| x[0], g);
        assert!(matches!(fit_time_lipschitz(&flat, 0.5), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn time_independent_gradient_has_zero_ratio() {
        let sol = ExactSolution::p_laplace(2, 3.0).unwrap();
        let g = Grid::new(Domain::cylinder(2, 0.75, 1.0 / 16.0), 36).unwrap();
        let st = SpaceTimeSolution::sample(|x, t| sol.value(x, t), g);
        let rep = mixed_gradient_time_check(&st, 0.5, 1.0, 0.5).unwrap();
        assert!(rep.max_ratio < 1e-9 && rep.finite);
        assert_eq!(rep.chain_violations, 0);
    }

    #[test]
    fn separable_field_ratio_is_stable() {
        // u = |x|^{1+a} g(t), g(t) = 1 + t: Du(x,t) - Du(x,s) = (t - s) D|x|^{1+a}.
        let a = 0.5;
        let run = |h: f64| {
            let g = Grid::new(Domain::cylinder(2, 0.75, h), 36).unwrap();
            let st = SpaceTimeSolution::sample(|x, t| x.norm().powf(1.0 + a) * (1.0 + t), g);
            mixed_gradient_time_check(&st, a, 1.0, 0.5).unwrap()
        };
        let (coarse, fine) = (run(1.0 / 16.0), run(1.0 / 32.0));
        assert!(coarse.finite && fine.finite);
        assert!(coarse.max_ratio > 0.0);
        assert!((coarse.max_ratio / fine.max_ratio - 1.0).abs() < 0.1, "{coarse:?} {fine:?}");
        assert_eq!(fine.chain_violations, 0);
    }
}
