//! Measurements shared by the commands and the acceptance suite.

use degenlab_core::bernstein::JetSample;
use degenlab_core::coefficients::{CoefficientParams, Family, SmoothOperatorF};
use degenlab_core::exact::{residual_oracle, ExactSolution, QuadraticDatum};
use degenlab_core::grid::{Domain, SpaceTimeSolution};
use degenlab_core::linalg::{SymMatrix, Vector};
use degenlab_core::regularity::{fit_holder_sampler, fit_spatial_holder, radius_ladder, ExponentReport};
use degenlab_core::solver::{solve, ProblemSpec, SolveOptions};
use degenlab_core::{stencil, Exec, Result};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

/// `max / min - 1` over positive values; zero for fewer than two.
pub fn relative_spread(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.len() < 2 {
        0.0
    } else {
        hi / lo - 1.0
    }
}

/// Every value lies in `center (1 -/+ band)`.
pub fn within_band(values: &[f64], center: f64, band: f64) -> bool {
    values
        .iter()
        .all(|v| *v >= center * (1.0 - band) && *v <= center * (1.0 + band))
}

/// Largest `|u(x, 0) - exact(x, 0)|` over all nodes of the final level.
pub fn final_sup_error(solution: &SpaceTimeSolution, exact: &ExactSolution) -> f64 {
    let last = solution.last();
    let g = last.grid();
    let t = g.t_end();
    (0..g.node_count())
        .map(|n| (last.at(n) - exact.value(&g.point(n), t)).abs())
        .fold(0.0, f64::max)
}

/// Points on the annulus `r_lo <= |x| <= r_hi`: radii evenly spread, angles
/// stepped by the golden angle.
pub fn annulus_points(count: usize, r_lo: f64, r_hi: f64) -> Vec<Vector> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let r = r_lo + (r_hi - r_lo) * (k as f64 + 0.5) / count as f64;
            let a = golden * k as f64;
            Vector::from_slice(&[r * a.cos(), r * a.sin()])
        })
        .collect()
}

/// Largest `|residual|` over `points` at a few times in `(-1, 0]`.
pub fn max_residual(sol: &ExactSolution, params: &CoefficientParams, points: &[Vector]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in points {
        for t in [-0.5, -0.125, 0.0] {
            worst = worst.max(residual_oracle(sol, params, x, t)?.abs());
        }
    }
    Ok(worst)
}

/// Hölder fit of the closed-form gradient about the origin.
pub fn holder_analytic(sol: &ExactSolution, h: f64, r_max: f64) -> Result<ExponentReport> {
    let center = Vector::zeros(sol.dim());
    fit_holder_sampler(|x| Some(sol.gradient(x)), &center, &radius_ladder(h, r_max))
}

/// Hölder fit of the discrete gradient of the final level about the origin.
pub fn holder_on_solution(solution: &SpaceTimeSolution, r_max: f64) -> Result<ExponentReport> {
    let last = solution.last();
    let grad = stencil::gradient(last)?;
    let center = Vector::zeros(last.grid().dim());
    fit_spatial_holder(&grad, &center, &radius_ladder(last.grid().h(), r_max))
}

/// `|u - phi(x', 0, t)|` against `A_eff x_n` at interior nodes of a half-cube run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfCubeBound {
    /// Largest `|u - phi(x', 0, t)| / x_n`.
    pub max_ratio: f64,
    /// Smallest `A_eff x_n - |u - phi(x', 0, t)|`.
    pub min_slack: f64,
    pub nodes: usize,
}

pub fn half_cube_bound(solution: &SpaceTimeSolution, phi: &QuadraticDatum, a_eff: f64) -> HalfCubeBound {
    let g = solution.grid();
    let axis = g.dim() - 1;
    let interior = g.interior_nodes();
    let mut out = HalfCubeBound {
        max_ratio: 0.0,
        min_slack: f64::INFINITY,
        nodes: 0,
    };
    for k in 0..=g.steps() {
        let t = g.time(k);
        let level = solution.level(k);
        for &n in &interior {
            let x = g.point(n);
            let xn = x.as_slice()[axis];
            let mut foot = x;
            foot.as_mut_slice()[axis] = 0.0;
            let d = (level.at(n) - phi.value(&foot, t)).abs();
            out.max_ratio = out.max_ratio.max(d / xn);
            out.min_slack = out.min_slack.min(a_eff * xn - d);
            out.nodes += 1;
        }
    }
    out
}

/// One pair of runs with ordered data.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonCase {
    pub name: &'static str,
    /// Smallest `u - v` on the parabolic boundary.
    pub boundary_gap: f64,
    /// Smallest `u - v` anywhere.
    pub min_gap: f64,
    pub passes: bool,
}

type Data = fn(&Vector, f64) -> f64;

fn ordered_pair(
    name: &'static str,
    params: CoefficientParams,
    domain: Domain,
    upper: Data,
    lower: Data,
    slack: f64,
    exec: Exec,
) -> Result<ComparisonCase> {
    let mut su = ProblemSpec::with_data(params.clone(), domain, upper);
    let mut sl = ProblemSpec::with_data(params, domain, lower);
    // A shared cap gives both runs the same time step.
    su.gradient_cap = Some(3.0);
    sl.gradient_cap = Some(3.0);
    let options = SolveOptions {
        exec,
        max_stored_intervals: usize::MAX,
        monitor_radius: None,
    };
    let (ru, rl) = (solve(&su, &options)?, solve(&sl, &options)?);
    let g = *ru.solution.grid();
    let mut boundary_gap = f64::INFINITY;
    let mut min_gap = f64::INFINITY;
    for (k, (a, b)) in ru.solution.levels().iter().zip(rl.solution.levels()).enumerate() {
        for n in 0..g.node_count() {
            let d = a.at(n) - b.at(n);
            min_gap = min_gap.min(d);
            if k == 0 || !g.is_interior(n) {
                boundary_gap = boundary_gap.min(d);
            }
        }
    }
    Ok(ComparisonCase {
        name,
        boundary_gap,
        min_gap,
        passes: ru.steps == rl.steps && min_gap >= boundary_gap.min(0.0) - slack,
    })
}

fn exact_p3(x: &Vector, t: f64) -> f64 {
    ExactSolution::p_laplace(2, 3.0).expect("p = 3 is valid").value(x, t)
}

fn exact_p3_bumped(x: &Vector, t: f64) -> f64 {
    let bump = 0.05 * (1.0 - x.norm_sq() / 1.2).max(0.0).powi(3) * (1.0 + t);
    exact_p3(x, t) + bump
}

fn heat_upper(x: &Vector, t: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let s = x.as_slice();
    (pi * s[0] / 2.0).cos() * (pi * s[1] / 2.0).cos() * (1.0 + 0.5 * t) + 0.2 + t
}

fn heat_lower(x: &Vector, t: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let s = x.as_slice();
    0.5 * (pi * s[0] / 2.0).cos() * (pi * s[1] / 2.0).cos() + t
}

fn line_upper(x: &Vector, t: f64) -> f64 {
    let s = x.as_slice()[0];
    (2.0 * s).sin() + 0.3 * (1.0 - s * s) + 0.1 * t
}

fn line_lower(x: &Vector, t: f64) -> f64 {
    (2.0 * x.as_slice()[0]).sin() + 0.1 * t
}

/// Three ordered pairs: a bumped closed-form solution in 2-D, the heat
/// equation in 2-D, and `p = 3` in 1-D with data touching on the boundary.
pub fn comparison_suite(slack: f64, exec: Exec) -> Result<Vec<ComparisonCase>> {
    let p3 = CoefficientParams::p_laplace(3.0, 0.05)?;
    let heat = CoefficientParams::p_laplace(2.0, 0.05)?;
    Ok(vec![
        ordered_pair(
            "p3_bump_2d",
            p3.clone(),
            Domain::cylinder(2, 0.75, 1.0 / 16.0),
            exact_p3_bumped,
            exact_p3,
            slack,
            exec,
        )?,
        ordered_pair(
            "heat_2d",
            heat,
            Domain::cylinder(2, 1.0, 1.0 / 16.0),
            heat_upper,
            heat_lower,
            slack,
            exec,
        )?,
        ordered_pair(
            "p3_line_1d",
            p3,
            Domain::cylinder(1, 1.0, 1.0 / 32.0),
            line_upper,
            line_lower,
            slack,
            exec,
        )?,
    ])
}

fn log_uniform(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo..hi))
}

fn random_vector(rng: &mut ChaCha20Rng, dim: usize) -> Vector {
    let mut v = Vector::zeros(dim);
    for c in v.as_mut_slice() {
        *c = rng.random_range(-1.0..1.0);
    }
    v
}

/// Fuzz jets: generic `(q, M, xi)` with magnitudes spread over several
/// decades, a share of exactly zero gradients, and a fraction of rank-one
/// aligned configurations where Cauchy–Schwarz is an equality.
pub fn jet_samples(rng: &mut ChaCha20Rng, dim: usize, count: usize, aligned_fraction: f64) -> Vec<JetSample> {
    (0..count)
        .map(|_| {
            let scale = log_uniform(rng, -4.0, 1.0);
            let mut q = random_vector(rng, dim).scale(scale);
            if rng.random_bool(0.01) {
                q = Vector::zeros(dim);
            }
            if rng.random_bool(aligned_fraction) {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                return JetSample::aligned(q, sign * log_uniform(rng, -2.0, 2.0));
            }
            let mscale = log_uniform(rng, -2.0, 2.0);
            let mut m = SymMatrix::zeros(dim);
            for i in 0..dim {
                for j in i..dim {
                    m.set(i, j, mscale * rng.random_range(-1.0..1.0));
                }
            }
            JetSample {
                q,
                m,
                xi: random_vector(rng, dim),
            }
        })
        .collect()
}

/// A random member of one of the three families, cycling through them.
pub fn random_family(rng: &mut ChaCha20Rng, index: usize) -> Family {
    match index % 3 {
        0 => Family::PLaplace {
            p: rng.random_range(2.0..10.0_f64).max(2.0 + 1e-9),
        },
        1 => Family::FullyNonlinear {
            gamma: rng.random_range(1e-9..5.0),
            operator: SmoothOperatorF::trace(),
        },
        _ => Family::GeneralQuasilinear {
            gamma: rng.random_range(1e-9..5.0),
            p: rng.random_range(2.0..10.0),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn spread_and_band() {
        assert_eq!(relative_spread(&[2.0, 2.2, 2.1]), 0.10000000000000009);
        assert_eq!(relative_spread(&[3.0]), 0.0);
        assert!(within_band(&[4.05, 4.95], 4.5, 0.1 + 1e-12));
        assert!(!within_band(&[4.0], 4.5, 0.1));
    }

    #[test]
    fn annulus_sample_stays_inside() {
        let pts = annulus_points(100, 0.3, 0.9);
        assert_eq!(pts.len(), 100);
        assert!(pts.iter().all(|x| (0.3..=0.9).contains(&x.norm())));
    }

    #[test]
    fn jets_are_reproducible_and_mixed() {
        let a = jet_samples(&mut ChaCha20Rng::seed_from_u64(7), 2, 500, 0.2);
        let b = jet_samples(&mut ChaCha20Rng::seed_from_u64(7), 2, 500, 0.2);
        assert_eq!(a, b);
        let aligned = a.iter().filter(|s| s.xi == s.q && s.q.norm() > 0.0).count();
        assert!(aligned > 50 && aligned < 150, "{aligned}");
    }

    #[test]
    fn half_cube_bound_of_datum_itself() {
        use degenlab_core::grid::{Grid, SpaceTimeSolution};
        let phi = QuadraticDatum::coordinate(2, 0);
        let g = Grid::new(Domain::half_cylinder(2, 1.0, 0.25), 4).unwrap();
        let sol = SpaceTimeSolution::sample(|x, t| phi.value(x, t), g);
        let b = half_cube_bound(&sol, &phi, 1.0);
        assert_eq!(b.max_ratio, 0.0);
        assert!(b.min_slack > 0.0 && b.nodes > 0);
    }
}
