//! Finite-difference derivatives on grid fields and sup norms on cylinders.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, SpaceTimeSolution};
use crate::linalg::{SymMatrix, Vector};

fn check_stencil_support(grid: &Grid) -> Result<()> {
    for axis in 0..grid.dim() {
        let nodes = grid.axis_len(axis);
        if nodes < 3 {
            return Err(Error::TooFewNodes { axis, nodes });
        }
    }
    Ok(())
}

fn unit_offset(axis: usize, step: isize) -> [isize; 2] {
    let mut d = [0isize; 2];
    d[axis] = step;
    d
}

/// First derivative along `axis`: central in the interior, second-order
/// one-sided at the ends of the axis.
fn partial(field: &Field, node: usize, axis: usize) -> f64 {
    let g = field.grid();
    let h = g.h();
    let u = field.values();
    let i = g.multi_index(node)[axis];
    let n = g.axis_len(axis);
    let at = |s: isize| u[g.offset(node, unit_offset(axis, s)).expect("stencil on grid")];
    if i > 0 && i + 1 < n {
        (at(1) - at(-1)) / (2.0 * h)
    } else if i == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
    } else {
        (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
    }
}

/// Discrete gradient at one node.
pub fn gradient_at(field: &Field, node: usize) -> Vector {
    let dim = field.grid().dim();
    let mut q = Vector::zeros(dim);
    for a in 0..dim {
        q[a] = partial(field, node, a);
    }
    q
}

/// Discrete gradient, one field per spatial component.
pub fn gradient(field: &Field) -> Result<Vec<Field>> {
    let g = *field.grid();
    check_stencil_support(&g)?;
    Ok((0..g.dim())
        .map(|a| {
            let values = (0..g.node_count()).map(|n| partial(field, n, a)).collect();
            Field::from_raw(g, values)
        })
        .collect())
}

/// Discrete gradient magnitude at every node.
pub fn gradient_norm(field: &Field) -> Result<Field> {
    let g = *field.grid();
    check_stencil_support(&g)?;
    let values = (0..g.node_count()).map(|n| gradient_at(field, n).norm()).collect();
    Ok(Field::from_raw(g, values))
}

/// Three-point second differences and the four-corner mixed difference at an
/// interior node; the result is symmetric by construction.
pub fn hessian_at(field: &Field, node: usize) -> Result<SymMatrix> {
    let g = field.grid();
    if !g.is_interior(node) {
        return Err(Error::NotInterior { node });
    }
    Ok(hessian_interior(field.values(), g, node))
}

pub(crate) fn hessian_interior(u: &[f64], g: &Grid, node: usize) -> SymMatrix {
    let h2 = g.h() * g.h();
    let dim = g.dim();
    let mut m = SymMatrix::zeros(dim);
    let at = |d: [isize; 2]| u[g.offset(node, d).expect("interior stencil")];
    let c = u[node];
    for a in 0..dim {
        let e = unit_offset(a, 1);
        let w = unit_offset(a, -1);
        m.set(a, a, (at(e) - 2.0 * c + at(w)) / h2);
    }
    if dim == 2 {
        let mixed = (at([1, 1]) - at([-1, 1]) - at([1, -1]) + at([-1, -1])) / (4.0 * h2);
        m.set(0, 1, mixed);
    }
    m
}

/// Hessians on the interior nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianField {
    grid: Grid,
    values: Vec<Option<SymMatrix>>,
}

impl HessianField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `None` on boundary nodes.
    pub fn get(&self, node: usize) -> Option<&SymMatrix> {
        self.values[node].as_ref()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &SymMatrix)> {
        self.values.iter().enumerate().filter_map(|(n, m)| m.as_ref().map(|m| (n, m)))
    }
}

pub fn hessian(field: &Field) -> Result<HessianField> {
    let g = *field.grid();
    check_stencil_support(&g)?;
    let values = (0..g.node_count())
        .map(|n| g.is_interior(n).then(|| hessian_interior(field.values(), &g, n)))
        .collect();
    Ok(HessianField { grid: g, values })
}

/// Backward difference `(u^k - u^{k-1}) / dt`.
pub fn time_derivative(solution: &SpaceTimeSolution, level: usize) -> Result<Field> {
    if level == 0 || level >= solution.levels().len() {
        return Err(Error::NoPreviousLevel { level });
    }
    let g = *solution.grid();
    let dt = g.dt();
    let cur = solution.level(level).values();
    let prev = solution.level(level - 1).values();
    let values = cur.iter().zip(prev).map(|(a, b)| (a - b) / dt).collect();
    Ok(Field::from_raw(g, values))
}

fn check_radius(grid: &Grid, r: f64) -> Result<()> {
    if !(r > 0.0) || r > grid.extent() * (1.0 + 1e-12) {
        return Err(Error::InvalidParams(format!(
            "cylinder radius {r} must lie in (0, {}]",
            grid.extent()
        )));
    }
    Ok(())
}

/// Largest `|u|` over nodes with `|x|_inf <= r` of a single field.
pub fn field_sup_norm(field: &Field, r: f64) -> Result<f64> {
    check_radius(field.grid(), r)?;
    field.sup_abs_in_ball(r).ok_or(Error::EmptyCylinder { r })
}

fn sup_over_cylinder<F>(solution: &SpaceTimeSolution, r: f64, first_level: usize, value: F) -> Result<f64>
where
    F: Fn(usize, usize) -> f64,
{
    let g = solution.grid();
    check_radius(g, r)?;
    let ball: Vec<usize> = (0..g.node_count()).filter(|&n| g.in_ball(n, r)).collect();
    let mut sup: Option<f64> = None;
    for k in first_level..=g.steps() {
        if !Grid::in_time_window(g.time(k), r) {
            continue;
        }
        for &n in &ball {
            let v = value(k, n).abs();
            sup = Some(sup.map_or(v, |s: f64| s.max(v)));
        }
    }
    sup.ok_or(Error::EmptyCylinder { r })
}

/// `max |u|` over `Q_r = {|x|_inf <= r} x (-r^2, 0]`.
pub fn sup_norm_on_cylinder(solution: &SpaceTimeSolution, r: f64) -> Result<f64> {
    sup_over_cylinder(solution, r, 0, |k, n| solution.level(k).at(n))
}

/// `max |u_t|` over `Q_r`, with `u_t` the backward difference.
pub fn sup_time_derivative_on_cylinder(solution: &SpaceTimeSolution, r: f64) -> Result<f64> {
    let dt = solution.grid().dt();
    sup_over_cylinder(solution, r, 1, |k, n| {
        (solution.level(k).at(n) - solution.level(k - 1).at(n)) / dt
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample, Domain};

    fn grid2(h: f64) -> Grid {
        Grid::new(Domain::cylinder(2, 1.0, h), 8).unwrap()
    }

    #[test]
    fn gradient_of_constant_and_linear() {
        let g = grid2(0.1);
        let c = sample(|_, _| 3.0, &g, 0.0).unwrap();
        for comp in gradient(&c).unwrap() {
            assert!(comp.values().iter().all(|&v| v == 0.0));
        }
        let lin = sample(|x, _| x[0], &g, 0.0).unwrap();
        let grad = gradient(&lin).unwrap();
        for n in g.interior_nodes() {
            assert!((grad[0].at(n) - 1.0).abs() < 1e-13);
            assert_eq!(grad[1].at(n), 0.0);
        }
    }

    #[test]
    fn gradient_exact_on_quadratic() {
        let g = grid2(0.1);
        let f = sample(|x, _| x.norm_sq(), &g, 0.0).unwrap();
        let node = g.node_at_lattice([3, 4]).unwrap();
        // Direct stencil: ((0.4^2 + 0.4^2) - (0.2^2 + 0.4^2)) / 0.2 = 0.6, and likewise 0.8.
        let q = gradient_at(&f, node);
        assert!((q[0] - 0.6).abs() < 1e-13);
        assert!((q[1] - 0.8).abs() < 1e-13);
    }

    #[test]
    fn one_sided_gradient_exact_on_quadratic_boundary() {
        let g = grid2(0.1);
        let f = sample(|x, _| x[0] * x[0] + 2.0 * x[1], &g, 0.0).unwrap();
        let corner = g.node_at_lattice([-10, -10]).unwrap();
        let q = gradient_at(&f, corner);
        assert!((q[0] + 2.0).abs() < 1e-12);
        assert!((q[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hessian_bilinear_and_quadratic() {
        let g = grid2(0.1);
        let f = sample(|x, _| x[0] * x[1], &g, 0.0).unwrap();
        let hf = hessian(&f).unwrap();
        for (_, m) in hf.iter() {
            assert!(m.get(0, 0).abs() < 1e-12 && m.get(1, 1).abs() < 1e-12);
            assert!((m.get(0, 1) - 1.0).abs() < 1e-12);
            assert!(m.is_symmetric());
        }
        let q = sample(|x, _| x.norm_sq(), &g, 0.0).unwrap();
        for (_, m) in hessian(&q).unwrap().iter() {
            assert!((m.get(0, 0) - 2.0).abs() < 1e-11);
            assert!((m.get(1, 1) - 2.0).abs() < 1e-11);
            assert!(m.get(0, 1).abs() < 1e-11);
        }
    }

    #[test]
    fn hessian_of_power_is_second_order() {
        // |x|^{3/2}: analytic Hessian s|x|^{s-2}(I + (s-2) x x^T / |x|^2), s = 3/2.
        let s = 1.5;
        let analytic = |x: &Vector| {
            let r = x.norm();
            let xhat = x.scale(1.0 / r);
            SymMatrix::identity(2)
                .add(&SymMatrix::outer(&xhat).scale(s - 2.0))
                .scale(s * r.powf(s - 2.0))
        };
        let err_at = |h: f64| {
            let g = Grid::new(Domain::cylinder(2, 1.0, h), 1).unwrap();
            let f = sample(|x, _| x.norm().powf(s), &g, 0.0).unwrap();
            let node = g.node_at_lattice([(0.3 / h).round() as isize, (0.4 / h).round() as isize]).unwrap();
            hessian_at(&f, node).unwrap().sub(&analytic(&g.point(node))).frobenius()
        };
        let (e1, e2) = (err_at(0.01), err_at(0.005));
        assert!(e1 < 1e-3, "error {e1}");
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.3, "observed order {order}");
    }

    #[test]
    fn hessian_rejects_boundary_and_tiny_grids() {
        let g = grid2(0.1);
        let f = Field::constant(g, 0.0);
        assert!(matches!(hessian_at(&f, 0), Err(Error::NotInterior { node: 0 })));
        let tiny = Grid::new(
            Domain {
                half_space: true,
                ..Domain::cylinder(1, 1.0, 1.0)
            },
            1,
        )
        .unwrap();
        assert!(matches!(hessian(&Field::constant(tiny, 0.0)), Err(Error::TooFewNodes { .. })));
    }

    #[test]
    fn backward_time_differences() {
        let g = Grid::with_dt(Domain::cylinder(1, 1.0, 0.5), 0.01).unwrap();
        let constant = SpaceTimeSolution::sample(|_, _| 2.0, g);
        assert!(time_derivative(&constant, 5).unwrap().values().iter().all(|&v| v == 0.0));
        let linear = SpaceTimeSolution::sample(|_, t| 4.5 * t, g);
        for v in time_derivative(&linear, 7).unwrap().values() {
            assert!((v - 4.5).abs() < 1e-10);
        }
        let quad = SpaceTimeSolution::sample(|_, t| t * t, g);
        let k = g.level_of(-0.5).unwrap();
        for v in time_derivative(&quad, k).unwrap().values() {
            assert!((v + 1.01).abs() < 1e-10, "{v}");
        }
        assert!(matches!(time_derivative(&quad, 0), Err(Error::NoPreviousLevel { level: 0 })));
    }

    #[test]
    fn cylinder_sup_norms() {
        let g = Grid::with_dt(Domain::cylinder(2, 1.0, 0.125), 1.0 / 64.0).unwrap();
        let zero = SpaceTimeSolution::sample(|_, _| 0.0, g);
        assert_eq!(sup_norm_on_cylinder(&zero, 0.5).unwrap(), 0.0);
        let neg = SpaceTimeSolution::sample(|_, _| -3.0, g);
        assert_eq!(sup_norm_on_cylinder(&neg, 0.5).unwrap(), 3.0);
        let exact = SpaceTimeSolution::sample(|x, t| x.norm().powf(1.5) + 4.5 * t, g);
        let s = sup_time_derivative_on_cylinder(&exact, 0.5).unwrap();
        assert!((s - 4.5).abs() < 1e-10);
        assert!(sup_norm_on_cylinder(&exact, 2.0).is_err());
    }
}
