//! Uniform-grid piecewise-linear (1D) and piecewise-bilinear (2D) functions.
//!
//! Nodes are numbered with the x index running fastest. Evaluation clamps
//! coordinates into the domain; along a clamped axis the interpolant is flat,
//! so the slope there is zero. On a cell interface the slope is taken from
//! the cell with the smaller index.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Axis-aligned box `[lower, upper]` split into `cells` uniform cells per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells: Vec<usize>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        let d = lower.len();
        if !(1..=2).contains(&d) || upper.len() != d || cells.len() != d {
            return Err(Error::InvalidDomain(format!(
                "dimension must be 1 or 2 with matching lengths (got {}, {}, {})",
                lower.len(),
                upper.len(),
                cells.len()
            )));
        }
        for k in 0..d {
            if !(lower[k].is_finite() && upper[k].is_finite()) || upper[k] <= lower[k] {
                return Err(Error::InvalidDomain(format!(
                    "axis {k}: need finite lower < upper, got [{}, {}]",
                    lower[k], upper[k]
                )));
            }
            if cells[k] == 0 {
                return Err(Error::InvalidDomain(format!("axis {k}: zero cells")));
            }
        }
        Ok(Self { lower, upper, cells })
    }

    pub fn interval(lower: f64, upper: f64, cells: usize) -> Result<Self> {
        Self::new(vec![lower], vec![upper], vec![cells])
    }

    pub fn rectangle(lower: [f64; 2], upper: [f64; 2], cells: [usize; 2]) -> Result<Self> {
        Self::new(lower.to_vec(), upper.to_vec(), cells.to_vec())
    }

    /// Same box with a different number of cells per axis.
    pub fn with_cells(&self, cells: Vec<usize>) -> Result<Self> {
        Self::new(self.lower.clone(), self.upper.clone(), cells)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.cells[axis] as f64
    }

    /// Smallest cell width over all axes.
    pub fn min_spacing(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).fold(f64::INFINITY, f64::min)
    }

    pub fn nodes_per_axis(&self, axis: usize) -> usize {
        self.cells[axis] + 1
    }

    pub fn node_count(&self) -> usize {
        self.cells.iter().map(|c| c + 1).product()
    }

    /// Volume (length in 1D, area in 2D).
    pub fn measure(&self) -> f64 {
        (0..self.dim()).map(|k| self.upper[k] - self.lower[k]).product()
    }

    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        if i == self.cells[axis] {
            return self.upper[axis];
        }
        self.lower[axis] + (self.upper[axis] - self.lower[axis]) * i as f64 / self.cells[axis] as f64
    }

    /// Multi-index of a flat node index.
    pub fn node_multi_index(&self, node: usize) -> [usize; 2] {
        let nx = self.nodes_per_axis(0);
        [node % nx, node / nx]
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i + j * self.nodes_per_axis(0)
    }

    pub fn node_coord(&self, node: usize) -> Vec<f64> {
        let [i, j] = self.node_multi_index(node);
        match self.dim() {
            1 => vec![self.axis_coord(0, i)],
            _ => vec![self.axis_coord(0, i), self.axis_coord(1, j)],
        }
    }

    /// All node coordinates, flattened as `node * dim + axis`.
    pub fn node_coords(&self) -> Vec<f64> {
        (0..self.node_count()).flat_map(|n| self.node_coord(n)).collect()
    }

    /// True when the node lies on a face whose outward normal is `axis`.
    pub fn on_normal_boundary(&self, node: usize, axis: usize) -> bool {
        let idx = self.node_multi_index(node)[axis];
        idx == 0 || idx == self.cells[axis]
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, &v)| v.clamp(self.lower[k], self.upper[k]))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(k, &v)| v >= self.lower[k] && v <= self.upper[k])
    }

    /// Composite trapezoidal weights, one per node.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        (0..self.node_count())
            .map(|n| {
                let mi = self.node_multi_index(n);
                (0..self.dim())
                    .map(|k| {
                        let h = self.spacing(k);
                        if mi[k] == 0 || mi[k] == self.cells[k] {
                            0.5 * h
                        } else {
                            h
                        }
                    })
                    .product()
            })
            .collect()
    }

    fn locate(&self, axis: usize, x: f64) -> (usize, f64, bool) {
        let (l, u, n) = (self.lower[axis], self.upper[axis], self.cells[axis]);
        let inside = x >= l && x <= u;
        let xc = x.clamp(l, u);
        let mut s = (xc - l) / (u - l) * n as f64;
        // node coordinates round-trip to integer cell coordinates
        let r = s.round();
        if (s - r).abs() <= 8.0 * f64::EPSILON * r.max(1.0) {
            s = r;
        }
        let fl = s.floor();
        let mut i = fl as usize;
        let mut t = s - fl;
        if i >= n {
            i = n - 1;
            t = 1.0;
        } else if t == 0.0 && i > 0 {
            i -= 1;
            t = 1.0;
        }
        (i, t, inside)
    }

    /// Interpolation stencil at `x` (clamped into the domain).
    pub fn stencil(&self, x: &[f64]) -> Result<Stencil> {
        if x.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "point of length {} in {}D domain",
                x.len(),
                self.dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("evaluation point {x:?}")));
        }
        Ok(self.stencil_unchecked(x))
    }

    pub(crate) fn stencil_unchecked(&self, x: &[f64]) -> Stencil {
        let (i, tx, in_x) = self.locate(0, x[0]);
        let hx = self.spacing(0);
        let sx = if in_x { 1.0 / hx } else { 0.0 };
        if self.dim() == 1 {
            return Stencil {
                len: 2,
                nodes: [i, i + 1, 0, 0],
                weights: [1.0 - tx, tx, 0.0, 0.0],
                grads: [[-sx, 0.0], [sx, 0.0], [0.0; 2], [0.0; 2]],
            };
        }
        let (j, ty, in_y) = self.locate(1, x[1]);
        let hy = self.spacing(1);
        let sy = if in_y { 1.0 / hy } else { 0.0 };
        let nx = self.nodes_per_axis(0);
        let base = i + j * nx;
        Stencil {
            len: 4,
            nodes: [base, base + 1, base + nx, base + nx + 1],
            weights: [
                (1.0 - tx) * (1.0 - ty),
                tx * (1.0 - ty),
                (1.0 - tx) * ty,
                tx * ty,
            ],
            grads: [
                [-(1.0 - ty) * sx, -(1.0 - tx) * sy],
                [(1.0 - ty) * sx, -tx * sy],
                [-ty * sx, (1.0 - tx) * sy],
                [ty * sx, tx * sy],
            ],
        }
    }
}

/// Nodes, basis values and basis gradients of the multilinear interpolant at
/// one point. Gradients vanish along clamped axes.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub len: usize,
    pub nodes: [usize; 4],
    pub weights: [f64; 4],
    pub grads: [[f64; 2]; 4],
}

impl Stencil {
    /// Interpolates a scalar nodal array.
    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        (0..self.len).map(|a| self.weights[a] * values[self.nodes[a]]).sum()
    }

    /// Gradient of the interpolant of a scalar nodal array.
    #[inline]
    pub fn apply_grad(&self, values: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for a in 0..self.len {
            let v = values[self.nodes[a]];
            g[0] += self.grads[a][0] * v;
            g[1] += self.grads[a][1] * v;
        }
        g
    }
}

/// Nodal piecewise-multilinear function, possibly vector-valued.
///
/// Values are stored node-major: `values[node * codomain_dim + component]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    domain: Domain,
    values: Vec<f64>,
    codomain_dim: usize,
}

impl GridFunction {
    pub fn new(domain: Domain, values: Vec<f64>, codomain_dim: usize) -> Result<Self> {
        if codomain_dim == 0 || values.len() != domain.node_count() * codomain_dim {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} nodes x {} components",
                values.len(),
                domain.node_count(),
                codomain_dim
            )));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("nodal value at index {p}")));
        }
        Ok(Self { domain, values, codomain_dim })
    }

    pub fn scalar(domain: Domain, values: Vec<f64>) -> Result<Self> {
        Self::new(domain, values, 1)
    }

    pub fn zeros(domain: Domain, codomain_dim: usize) -> Self {
        let n = domain.node_count() * codomain_dim;
        Self { domain, values: vec![0.0; n], codomain_dim }
    }

    pub fn constant(domain: Domain, value: f64) -> Self {
        let n = domain.node_count();
        Self { domain, values: vec![value; n], codomain_dim: 1 }
    }

    /// Nodal interpolation of a scalar function.
    pub fn sample(f: impl Fn(&[f64]) -> f64, domain: &Domain) -> Result<Self> {
        let values = (0..domain.node_count())
            .map(|n| {
                let x = domain.node_coord(n);
                let v = f(&x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite(format!("sampled function at {x:?}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { domain: domain.clone(), values, codomain_dim: 1 })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn codomain_dim(&self) -> usize {
        self.codomain_dim
    }

    /// Interpolant value at `x`, one entry per component.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let st = self.domain.stencil(x)?;
        Ok(self.eval_stencil(&st))
    }

    pub(crate) fn eval_stencil(&self, st: &Stencil) -> Vec<f64> {
        let m = self.codomain_dim;
        (0..m)
            .map(|c| (0..st.len).map(|a| st.weights[a] * self.values[st.nodes[a] * m + c]).sum())
            .collect()
    }

    /// Scalar evaluation for single-component functions.
    #[inline]
    pub fn eval_scalar_stencil(&self, st: &Stencil) -> f64 {
        debug_assert_eq!(self.codomain_dim, 1);
        st.apply(&self.values)
    }

    /// Spatial Jacobian at `x`, row-major `d x codomain_dim`:
    /// entry `[axis * codomain_dim + c]` is the derivative of component `c`
    /// along `axis`.
    pub fn eval_slope(&self, x: &[f64]) -> Result<Vec<f64>> {
        let st = self.domain.stencil(x)?;
        let (d, m) = (self.domain.dim(), self.codomain_dim);
        let mut out = vec![0.0; d * m];
        for a in 0..st.len {
            for k in 0..d {
                for c in 0..m {
                    out[k * m + c] += st.grads[a][k] * self.values[st.nodes[a] * m + c];
                }
            }
        }
        Ok(out)
    }

    /// Trapezoidal approximation of the L1 norm, summed over components.
    pub fn l1_norm(&self) -> f64 {
        let m = self.codomain_dim;
        self.domain
            .trapezoid_weights()
            .iter()
            .enumerate()
            .map(|(n, w)| w * self.values[n * m..(n + 1) * m].iter().map(|v| v.abs()).sum::<f64>())
            .sum()
    }

    /// Total variation of a scalar function. In 2D this is the anisotropic
    /// variation along grid lines, each line weighted by its trapezoidal width.
    pub fn bv_seminorm(&self) -> Result<f64> {
        if self.codomain_dim != 1 {
            return Err(Error::ShapeMismatch(
                "total variation requires a scalar function".into(),
            ));
        }
        let v = &self.values;
        let dom = &self.domain;
        if dom.dim() == 1 {
            return Ok(v.windows(2).map(|w| (w[1] - w[0]).abs()).sum());
        }
        let (nx, ny) = (dom.nodes_per_axis(0), dom.nodes_per_axis(1));
        let line_weight = |axis: usize, i: usize| {
            let h = dom.spacing(axis);
            if i == 0 || i == dom.cells()[axis] {
                0.5 * h
            } else {
                h
            }
        };
        let mut tv = 0.0;
        for j in 0..ny {
            let row: f64 = (0..nx - 1)
                .map(|i| (v[dom.node_index(i + 1, j)] - v[dom.node_index(i, j)]).abs())
                .sum();
            tv += line_weight(1, j) * row;
        }
        for i in 0..nx {
            let col: f64 = (0..ny - 1)
                .map(|j| (v[dom.node_index(i, j + 1)] - v[dom.node_index(i, j)]).abs())
                .sum();
            tv += line_weight(0, i) * col;
        }
        Ok(tv)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.check_congruent(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { domain: self.domain.clone(), values, codomain_dim: self.codomain_dim })
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.check_congruent(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { domain: self.domain.clone(), values, codomain_dim: self.codomain_dim })
    }

    pub fn scale(&self, alpha: f64) -> GridFunction {
        let values = self.values.iter().map(|v| alpha * v).collect();
        Self { domain: self.domain.clone(), values, codomain_dim: self.codomain_dim }
    }

    fn check_congruent(&self, other: &GridFunction) -> Result<()> {
        if self.domain != other.domain || self.codomain_dim != other.codomain_dim {
            return Err(Error::ShapeMismatch("grid functions live on different grids".into()));
        }
        Ok(())
    }

    /// Writes the function as CSV with columns `x[,y],v0[,v1..]`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let m = self.codomain_dim;
        let names: Vec<String> = (0..m).map(|c| format!("v{c}")).collect();
        let cols: Vec<Vec<f64>> = (0..m)
            .map(|c| (0..self.domain.node_count()).map(|n| self.values[n * m + c]).collect())
            .collect();
        let named: Vec<(&str, &[f64])> =
            names.iter().map(String::as_str).zip(cols.iter().map(Vec::as_slice)).collect();
        write_csv_table(w, &self.domain, &named)
    }

    /// Reads a function written by [`GridFunction::write_csv`] on a known
    /// domain. Coordinates must match the domain nodes.
    pub fn read_csv<R: BufRead>(domain: &Domain, r: R) -> Result<Self> {
        let table = read_csv_table(domain, r)?;
        let m = table.columns.len();
        if m == 0 {
            return Err(Error::Parse("no value columns".into()));
        }
        let mut values = vec![0.0; domain.node_count() * m];
        for (c, (_, col)) in table.columns.iter().enumerate() {
            for (n, v) in col.iter().enumerate() {
                values[n * m + c] = *v;
            }
        }
        Self::new(domain.clone(), values, m)
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes one row per domain node: coordinates followed by the named columns.
pub fn write_csv_table<W: Write>(
    mut w: W,
    domain: &Domain,
    columns: &[(&str, &[f64])],
) -> std::io::Result<()> {
    let n = domain.node_count();
    for (name, col) in columns {
        if col.len() != n {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("column {name} has {} rows, expected {n}", col.len()),
            ));
        }
    }
    let mut header = String::from(if domain.dim() == 1 { "x" } else { "x,y" });
    for (name, _) in columns {
        header.push(',');
        header.push_str(name);
    }
    writeln!(w, "{header}")?;
    let mut line = String::new();
    for node in 0..n {
        line.clear();
        for (k, c) in domain.node_coord(node).iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&fmt_f64(*c));
        }
        for (_, col) in columns {
            let _ = write!(line, ",{}", fmt_f64(col[node]));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Named value columns read back from a grid CSV.
#[derive(Clone, Debug)]
pub struct CsvTable {
    pub columns: Vec<(String, Vec<f64>)>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_slice())
    }
}

/// Reads a grid CSV, skipping leading `#` comment lines, and checks the
/// coordinate columns against the domain nodes.
pub fn read_csv_table<R: BufRead>(domain: &Domain, r: R) -> Result<CsvTable> {
    let d = domain.dim();
    let mut lines = r.lines().map(|l| l.map_err(|e| Error::Parse(e.to_string())));
    let header = loop {
        match lines.next() {
            Some(l) => {
                let l = l?;
                if !l.starts_with('#') && !l.trim().is_empty() {
                    break l;
                }
            }
            None => return Err(Error::Parse("empty csv".into())),
        }
    };
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.len() < d {
        return Err(Error::Parse(format!("header {header:?} lacks coordinate columns")));
    }
    let mut columns: Vec<(String, Vec<f64>)> =
        names[d..].iter().map(|n| (n.clone(), Vec::new())).collect();
    let mut row = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{f:?}: {e}"))))
            .collect::<Result<_>>()?;
        if fields.len() != names.len() {
            return Err(Error::Parse(format!("row {row} has {} fields", fields.len())));
        }
        if row >= domain.node_count() {
            return Err(Error::Parse("more rows than grid nodes".into()));
        }
        let expect = domain.node_coord(row);
        for k in 0..d {
            let tol = 1e-12 * (1.0 + expect[k].abs());
            if (fields[k] - expect[k]).abs() > tol {
                return Err(Error::Parse(format!(
                    "row {row}: coordinate {} does not match node {}",
                    fields[k], expect[k]
                )));
            }
        }
        for (c, v) in fields[d..].iter().enumerate() {
            columns[c].1.push(*v);
        }
        row += 1;
    }
    if row != domain.node_count() {
        return Err(Error::Parse(format!("{row} rows for {} nodes", domain.node_count())));
    }
    Ok(CsvTable { columns })
}
