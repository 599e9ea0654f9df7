use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Largest supported grid dimension.
pub const MAX_GRID_DIM: usize = 3;
/// Upper bound on `n^d`.
pub const MAX_NODES: usize = 20_000_000;

const BALL_TOL: f64 = 1e-12;

/// Role of a lattice node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// In the closed ball with its whole stencil in the closed ball.
    Interior,
    /// In the closed ball with a stencil neighbour outside it; holds data.
    Dirichlet,
    /// Outside the ball; unused.
    Exterior,
}

/// Cartesian lattice over `[-1, 1]^d` with `n` (odd) nodes per axis, the
/// origin a node, last axis fastest in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    h: f64,
    strides: [usize; MAX_GRID_DIM],
    kinds: Vec<NodeKind>,
    interior: Vec<usize>,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_GRID_DIM {
            return Err(Error::UnsupportedGrid { d: dim });
        }
        if n.is_multiple_of(2) || n < 5 {
            return Err(Error::InvalidGrid(format!(
                "nodes per axis must be odd and at least 5, got {n}"
            )));
        }
        let total = n
            .checked_pow(dim as u32)
            .filter(|&t| t <= MAX_NODES)
            .ok_or_else(|| Error::InvalidGrid(format!("{n}^{dim} nodes exceed the limit {MAX_NODES}")))?;
        let h = 2.0 / (n - 1) as f64;
        let mut strides = [0; MAX_GRID_DIM];
        let mut s = 1;
        for axis in (0..dim).rev() {
            strides[axis] = s;
            s *= n;
        }
        let mut grid = Self {
            dim,
            n,
            h,
            strides,
            kinds: vec![NodeKind::Exterior; total],
            interior: Vec::new(),
        };
        let inside = |g: &Grid, idx: &[i64]| -> bool {
            if idx.iter().any(|&i| i < 0 || i >= n as i64) {
                return false;
            }
            let r2: f64 = idx.iter().map(|&i| g.coord(i as usize).powi(2)).sum();
            r2 <= 1.0 + BALL_TOL
        };
        let mut multi = [0i64; MAX_GRID_DIM];
        for flat in 0..total {
            grid.unflatten_into(flat, &mut multi);
            let here = &multi[..dim];
            if !inside(&grid, here) {
                continue;
            }
            let mut all_in = true;
            let mut probe = [0i64; MAX_GRID_DIM];
            'axes: for axis in 0..dim {
                for step in [-1i64, 1] {
                    probe[..dim].copy_from_slice(here);
                    probe[axis] += step;
                    if !inside(&grid, &probe[..dim]) {
                        all_in = false;
                        break 'axes;
                    }
                }
            }
            grid.kinds[flat] = if all_in {
                NodeKind::Interior
            } else {
                NodeKind::Dirichlet
            };
        }
        grid.interior = (0..total).filter(|&i| grid.kinds[i] == NodeKind::Interior).collect();
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, flat: usize) -> NodeKind {
        self.kinds[flat]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    /// Interior node indices in increasing order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Index of the origin.
    pub fn center(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Coordinate of axis index `i`.
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.h
    }

    fn unflatten_into(&self, mut flat: usize, out: &mut [i64; MAX_GRID_DIM]) {
        for axis in 0..self.dim {
            out[axis] = (flat / self.strides[axis]) as i64;
            flat %= self.strides[axis];
        }
    }

    /// Per-axis indices of a flat index.
    pub fn multi_index(&self, flat: usize) -> [usize; MAX_GRID_DIM] {
        let mut m = [0i64; MAX_GRID_DIM];
        self.unflatten_into(flat, &mut m);
        m.map(|v| v as usize)
    }

    /// Flat index of per-axis indices; `None` outside the array.
    pub fn flat_index(&self, multi: &[i64]) -> Option<usize> {
        let mut flat = 0;
        for axis in 0..self.dim {
            let i = multi[axis];
            if i < 0 || i >= self.n as i64 {
                return None;
            }
            flat += i as usize * self.strides[axis];
        }
        Some(flat)
    }

    /// Point of a flat index; entries past `dim` are zero.
    pub fn point(&self, flat: usize) -> [f64; MAX_GRID_DIM] {
        let m = self.multi_index(flat);
        let mut x = [0.0; MAX_GRID_DIM];
        for axis in 0..self.dim {
            x[axis] = self.coord(m[axis]);
        }
        x
    }

    /// Indices of interior and Dirichlet nodes.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.kinds[i] != NodeKind::Exterior)
    }
}

/// A nonnegative field on a [`Grid`]; exterior values are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Grid) -> Self {
        let len = grid.len();
        Self {
            grid,
            values: vec![0.0; len],
        }
    }

    /// Samples `f` at interior and Dirichlet nodes.
    pub fn sample(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let mut field = Self::zeros(grid);
        let d = field.grid.dim();
        for i in 0..field.grid.len() {
            if field.grid.kind(i) == NodeKind::Exterior {
                continue;
            }
            let x = field.grid.point(i);
            let v = f(&x[..d]);
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Negative(format!(
                    "field value {v} at node {i} ({:?})",
                    &x[..d]
                )));
            }
            field.values[i] = v;
        }
        Ok(field)
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Negative(format!("field value {v} at node {i}")));
        }
        let mut values = values;
        for (v, k) in values.iter_mut().zip(grid.kinds()) {
            if *k == NodeKind::Exterior {
                *v = 0.0;
            }
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> GridField {
        let values = self
            .values
            .iter()
            .zip(self.grid.kinds())
            .map(|(&v, k)| if *k == NodeKind::Exterior { 0.0 } else { f(v) })
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Writes the text dump: a header `dim n h gamma`, then one value per line.
    pub fn write_dump(&self, writer: impl Write, gamma: f64) -> Result<()> {
        let mut w = BufWriter::new(writer);
        writeln!(w, "{} {} {:.16e} {:.16e}", self.dim(), self.n(), self.h(), gamma)?;
        for v in &self.values {
            writeln!(w, "{v:.16e}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path, gamma: f64) -> Result<()> {
        self.write_dump(File::create(path)?, gamma)
    }

    /// Reads a dump written by [`GridField::write_dump`]; returns the field and `gamma`.
    pub fn read_dump(reader: impl std::io::Read) -> Result<(Self, f64)> {
        let mut lines = BufReader::new(reader).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty field dump".into()))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(Error::Parse(format!("bad header `{header}`")));
        }
        let parse_err = |s: &str| Error::Parse(format!("bad header field `{s}`"));
        let dim: usize = parts[0].parse().map_err(|_| parse_err(parts[0]))?;
        let n: usize = parts[1].parse().map_err(|_| parse_err(parts[1]))?;
        let h: f64 = parts[2].parse().map_err(|_| parse_err(parts[2]))?;
        let gamma: f64 = parts[3].parse().map_err(|_| parse_err(parts[3]))?;
        let grid = Grid::new(dim, n)?;
        if h != grid.h() {
            return Err(Error::Parse(format!("spacing {h} does not match n = {n}")));
        }
        let mut values = Vec::with_capacity(grid.len());
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            values.push(t.parse::<f64>().map_err(|e| Error::Parse(format!("`{t}`: {e}")))?);
        }
        Ok((Self::from_values(grid, values)?, gamma))
    }

    pub fn load(path: &Path) -> Result<(Self, f64)> {
        Self::read_dump(File::open(path)?)
    }
}
