//! Uniform space-time grids over cubes and half-cubes, and the fields that
//! live on them.
//!
//! Nodes are laid out axis-0 fastest. On a full cube every axis carries the
//! coordinates `(i - m) h` for `i = 0..=2m` where `m = extent / h`; on a
//! half-cube the last axis carries `i h` for `i = 0..=m`.

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Relative slack used when deciding whether a time or a ratio is on-grid.
const GRID_SNAP: f64 = 1e-9;

/// Spatial box and time window before a time step is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub dim: usize,
    /// Half-width of the spatial cube.
    pub extent: f64,
    pub h: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Restrict the last coordinate to `x_n >= 0`.
    pub half_space: bool,
}

impl Domain {
    /// The cylinder `Q_r = (-r, r)^dim x (-r^2, 0]` sampled with spacing `h`.
    pub fn cylinder(dim: usize, r: f64, h: f64) -> Self {
        Self {
            dim,
            extent: r,
            h,
            t_start: -r * r,
            t_end: 0.0,
            half_space: false,
        }
    }

    /// The half-cylinder `Q_r^+`.
    pub fn half_cylinder(dim: usize, r: f64, h: f64) -> Self {
        Self {
            half_space: true,
            ..Self::cylinder(dim, r, h)
        }
    }

    pub fn width(&self) -> f64 {
        self.t_end - self.t_start
    }

    fn cells(&self) -> Result<usize> {
        if !(1..=2).contains(&self.dim) {
            return Err(Error::InvalidGrid(format!("dimension {} not in {{1, 2}}", self.dim)));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing h = {} must be positive", self.h)));
        }
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(Error::InvalidGrid(format!("extent {} must be positive", self.extent)));
        }
        let ratio = self.extent / self.h;
        let m = ratio.round();
        if m < 1.0 || (ratio - m).abs() > GRID_SNAP * ratio.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "extent / h = {ratio} is not a positive integer"
            )));
        }
        if !(self.t_start < self.t_end && self.t_end <= 0.0) {
            return Err(Error::InvalidGrid(format!(
                "time span ({}, {}) must satisfy t_start < t_end <= 0",
                self.t_start, self.t_end
            )));
        }
        Ok(m as usize)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    domain: Domain,
    cells: usize,
    steps: usize,
    dt: f64,
}

impl Grid {
    /// Grid with `steps` equal time steps across the domain's time span.
    pub fn new(domain: Domain, steps: usize) -> Result<Self> {
        let cells = domain.cells()?;
        if steps == 0 {
            return Err(Error::InvalidGrid("at least one time step is required".into()));
        }
        Ok(Self {
            domain,
            cells,
            steps,
            dt: domain.width() / steps as f64,
        })
    }

    /// Grid with a prescribed step; the span must be a positive multiple of it.
    pub fn with_dt(domain: Domain, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidGrid(format!("time step {dt} must be positive")));
        }
        let ratio = domain.width() / dt;
        let k = ratio.round();
        if k < 1.0 || (ratio - k).abs() > GRID_SNAP * ratio.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "time span {} is not a multiple of dt = {dt}",
                domain.width()
            )));
        }
        Self::new(domain, k as usize)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }
    pub fn dim(&self) -> usize {
        self.domain.dim
    }
    pub fn extent(&self) -> f64 {
        self.domain.extent
    }
    pub fn h(&self) -> f64 {
        self.domain.h
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn half_space(&self) -> bool {
        self.domain.half_space
    }
    pub fn t_start(&self) -> f64 {
        self.domain.t_start
    }
    pub fn t_end(&self) -> f64 {
        self.domain.t_end
    }

    /// `extent / h`.
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn axis_len(&self, axis: usize) -> usize {
        if self.domain.half_space && axis + 1 == self.domain.dim {
            self.cells + 1
        } else {
            2 * self.cells + 1
        }
    }

    /// Index of the coordinate origin along `axis`.
    pub fn axis_origin(&self, axis: usize) -> usize {
        if self.domain.half_space && axis + 1 == self.domain.dim {
            0
        } else {
            self.cells
        }
    }

    pub fn node_count(&self) -> usize {
        (0..self.dim()).map(|a| self.axis_len(a)).product()
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        (i as f64 - self.axis_origin(axis) as f64) * self.domain.h
    }

    /// Per-axis indices of a flat node index.
    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        let n0 = self.axis_len(0);
        match self.dim() {
            1 => [node, 0],
            _ => [node % n0, node / n0],
        }
    }

    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        match self.dim() {
            1 => idx[0],
            _ => idx[0] + self.axis_len(0) * idx[1],
        }
    }

    /// Node index offset by `delta` along each axis, if it stays on the grid.
    pub fn offset(&self, node: usize, delta: [isize; 2]) -> Option<usize> {
        let idx = self.multi_index(node);
        let mut out = [0usize; 2];
        for a in 0..self.dim() {
            let j = idx[a] as isize + delta[a];
            if j < 0 || j >= self.axis_len(a) as isize {
                return None;
            }
            out[a] = j as usize;
        }
        Some(self.flat_index(out))
    }

    pub fn point(&self, node: usize) -> Vector {
        let idx = self.multi_index(node);
        let mut x = Vector::zeros(self.dim());
        for a in 0..self.dim() {
            x[a] = self.coord(a, idx[a]);
        }
        x
    }

    /// Node with the given per-axis integer coordinates `x = k h`.
    pub fn node_at_lattice(&self, k: [isize; 2]) -> Option<usize> {
        let mut idx = [0usize; 2];
        for a in 0..self.dim() {
            let j = k[a] + self.axis_origin(a) as isize;
            if j < 0 || j >= self.axis_len(a) as isize {
                return None;
            }
            idx[a] = j as usize;
        }
        Some(self.flat_index(idx))
    }

    pub fn is_interior(&self, node: usize) -> bool {
        let idx = self.multi_index(node);
        (0..self.dim()).all(|a| idx[a] > 0 && idx[a] + 1 < self.axis_len(a))
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&n| self.is_interior(n)).collect()
    }

    pub fn time(&self, level: usize) -> f64 {
        if level == self.steps {
            self.domain.t_end
        } else {
            self.domain.t_start + level as f64 * self.dt
        }
    }

    /// Level whose time equals `t` up to rounding.
    pub fn level_of(&self, t: f64) -> Result<usize> {
        let k = ((t - self.domain.t_start) / self.dt).round();
        if k < 0.0 || k > self.steps as f64 {
            return Err(Error::OffGridTime { t });
        }
        let k = k as usize;
        if (self.time(k) - t).abs() > GRID_SNAP * self.dt.max(t.abs()) {
            return Err(Error::OffGridTime { t });
        }
        Ok(k)
    }

    /// `|x|_inf <= r` for the node, with a rounding allowance.
    pub fn in_ball(&self, node: usize, r: f64) -> bool {
        self.point(node).max_abs() <= r + GRID_SNAP * self.domain.h
    }

    /// Time `t` lies in `(-r^2, 0]`.
    pub fn in_time_window(t: f64, r: f64) -> bool {
        let eps = GRID_SNAP * r * r;
        t > -r * r + eps && t <= eps
    }

    /// Same spatial layout, possibly different time stepping.
    pub fn same_space(&self, other: &Grid) -> bool {
        self.domain.dim == other.domain.dim
            && self.domain.h == other.domain.h
            && self.domain.extent == other.domain.extent
            && self.domain.half_space == other.domain.half_space
    }
}

/// Cell index and fractional position of `y` on an axis with `len` nodes
/// starting at `start` with spacing `h`; `None` outside the axis.
pub(crate) fn bracket(y: f64, start: f64, h: f64, len: usize) -> Option<(usize, f64)> {
    let s = (y - start) / h;
    let last = (len - 1) as f64;
    if s < -GRID_SNAP || s > last + GRID_SNAP {
        return None;
    }
    let s = s.clamp(0.0, last);
    let i = (s.floor() as usize).min(len - 2);
    Some((i, s - i as f64))
}

/// Scalar values on every node of a grid at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::NodeCountMismatch {
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { node, value });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.node_count()],
        }
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, node: usize) -> f64 {
        self.values[node]
    }

    /// Largest `|value|` over nodes with `|x|_inf <= r`.
    pub fn sup_abs_in_ball(&self, r: f64) -> Option<f64> {
        (0..self.values.len())
            .filter(|&n| self.grid.in_ball(n, r))
            .map(|n| self.values[n].abs())
            .reduce(f64::max)
    }

    /// Bilinear (linear in 1-D) interpolation; `None` off the grid.
    pub fn interpolate(&self, y: &Vector) -> Option<f64> {
        let g = &self.grid;
        let u = &self.values;
        let mut idx = [(0usize, 0.0f64); 2];
        for (a, slot) in idx.iter_mut().enumerate().take(g.dim()) {
            *slot = bracket(y[a], g.coord(a, 0), g.h(), g.axis_len(a))?;
        }
        Some(match g.dim() {
            1 => {
                let (i, w) = idx[0];
                (1.0 - w) * u[i] + w * u[i + 1]
            }
            _ => {
                let ((i, wx), (j, wy)) = (idx[0], idx[1]);
                let at = |a: usize, b: usize| u[g.flat_index([a, b])];
                (1.0 - wy) * ((1.0 - wx) * at(i, j) + wx * at(i + 1, j))
                    + wy * ((1.0 - wx) * at(i, j + 1) + wx * at(i + 1, j + 1))
            }
        })
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// A stack of fields, one per time level of a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeSolution {
    grid: Grid,
    levels: Vec<Field>,
}

impl SpaceTimeSolution {
    pub fn new(grid: Grid, levels: Vec<Field>) -> Result<Self> {
        if levels.len() != grid.steps() + 1 {
            return Err(Error::InvalidGrid(format!(
                "{} levels for {} time steps",
                levels.len(),
                grid.steps()
            )));
        }
        if levels.iter().any(|f| !f.grid.same_space(&grid)) {
            return Err(Error::InvalidGrid("level grid does not match the solution grid".into()));
        }
        let levels = levels
            .into_iter()
            .map(|f| Field { grid, values: f.values })
            .collect();
        Ok(Self { grid, levels })
    }

    /// Samples `f` at every level of `grid`.
    pub fn sample<F>(f: F, grid: Grid) -> Self
    where
        F: Fn(&Vector, f64) -> f64,
    {
        let levels = (0..=grid.steps())
            .map(|k| {
                let t = grid.time(k);
                let values = (0..grid.node_count()).map(|n| f(&grid.point(n), t)).collect();
                Field { grid, values }
            })
            .collect();
        Self { grid, levels }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn levels(&self) -> &[Field] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> &Field {
        &self.levels[k]
    }

    pub fn last(&self) -> &Field {
        self.levels.last().expect("a solution has at least one level")
    }
}

/// Evaluates `f` at every node at time `t`, which must be a grid time level.
pub fn sample<F>(f: F, grid: &Grid, t: f64) -> Result<Field>
where
    F: Fn(&Vector, f64) -> f64,
{
    let level = grid.level_of(t)?;
    let t = grid.time(level);
    let values = (0..grid.node_count()).map(|n| f(&grid.point(n), t)).collect();
    Field::new(*grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2() -> Grid {
        Grid::new(Domain::cylinder(2, 1.0, 0.1), 40).unwrap()
    }

    #[test]
    fn rejects_non_integer_extent_ratio() {
        let d = Domain {
            h: 0.3,
            ..Domain::cylinder(1, 1.0, 0.1)
        };
        assert!(matches!(Grid::new(d, 4), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn rejects_span_not_multiple_of_dt() {
        let d = Domain::cylinder(1, 1.0, 0.1);
        assert!(Grid::with_dt(d, 0.3).is_err());
        assert_eq!(Grid::with_dt(d, 0.25).unwrap().steps(), 4);
    }

    #[test]
    fn sample_zero_and_identity() {
        let g = grid2();
        let zero = sample(|_, _| 0.0, &g, -0.5).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));

        let g1 = Grid::new(Domain::cylinder(1, 1.0, 0.1), 10).unwrap();
        let id = sample(|x, _| x[0], &g1, 0.0).unwrap();
        for n in 0..g1.node_count() {
            assert_eq!(id.at(n), g1.coord(0, n));
        }
    }

    #[test]
    fn sample_exact_solution_value() {
        let g = grid2();
        let f = sample(|x, t| x.norm().powf(1.5) + 4.5 * t, &g, -0.25).unwrap();
        let node = g.node_at_lattice([4, 3]).unwrap();
        let expected = 0.5f64.powf(1.5) - 1.125;
        assert!((f.at(node) - expected).abs() < 1e-15);
        assert!((f.at(node) + 0.771_446).abs() < 1e-6);
    }

    #[test]
    fn sample_rejects_off_grid_time() {
        let g = grid2();
        assert!(matches!(sample(|_, _| 0.0, &g, -0.013), Err(Error::OffGridTime { .. })));
    }

    #[test]
    fn half_space_layout() {
        let g = Grid::new(Domain::half_cylinder(2, 1.0, 0.25), 4).unwrap();
        assert_eq!(g.axis_len(0), 9);
        assert_eq!(g.axis_len(1), 5);
        assert!(g.point(0)[1] == 0.0);
        assert_eq!(g.point(g.node_count() - 1).as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn field_rejects_non_finite() {
        let g = Grid::new(Domain::cylinder(1, 1.0, 0.5), 1).unwrap();
        assert!(matches!(
            Field::new(g, vec![0.0, f64::NAN, 0.0, 0.0, 0.0]),
            Err(Error::NonFinite { node: 1, .. })
        ));
        assert!(matches!(Field::new(g, vec![0.0; 3]), Err(Error::NodeCountMismatch { .. })));
    }
}
