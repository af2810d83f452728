//! Spatial content of the transforms: high-resolution transport fields and
//! the low-resolution polynomial baseline.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::pgrid::{read_csv_table, write_csv_table, Domain, GridFunction, Stencil};
use crate::pspace::{lagrange_weights, ParamNodeSet};

/// Per-parameter-node vector field on a grid, one scalar grid function per
/// spatial component.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportField {
    param_nodes: ParamNodeSet,
    domain: Domain,
    components: Vec<Vec<GridFunction>>,
    slip: bool,
}

impl TransportField {
    /// The zero field, i.e. the identity transform.
    pub fn zeros(param_nodes: ParamNodeSet, domain: Domain, slip: bool) -> Self {
        let d = domain.dim();
        let components = (0..param_nodes.len())
            .map(|_| (0..d).map(|_| GridFunction::zeros(domain.clone(), 1)).collect())
            .collect();
        Self { param_nodes, domain, components, slip }
    }

    /// Builds a field from explicit components; with `slip` the normal
    /// boundary values are projected to zero.
    pub fn from_components(
        param_nodes: ParamNodeSet,
        components: Vec<Vec<GridFunction>>,
        slip: bool,
    ) -> Result<Self> {
        let domain = components
            .first()
            .and_then(|c| c.first())
            .map(|g| g.domain().clone())
            .ok_or_else(|| Error::ShapeMismatch("field without components".into()))?;
        if components.len() != param_nodes.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} field slices for {} parameter nodes",
                components.len(),
                param_nodes.len()
            )));
        }
        for slice in &components {
            if slice.len() != domain.dim()
                || slice.iter().any(|g| g.domain() != &domain || g.codomain_dim() != 1)
            {
                return Err(Error::ShapeMismatch(
                    "field components must be scalar functions on one shared grid".into(),
                ));
            }
        }
        let field = Self { param_nodes, domain, components, slip };
        Ok(if slip { field.project_slip() } else { field })
    }

    /// Samples `f(eta_index, x)` at every field node.
    pub fn sample(
        param_nodes: ParamNodeSet,
        domain: Domain,
        slip: bool,
        f: impl Fn(usize, &[f64]) -> Vec<f64>,
    ) -> Result<Self> {
        let d = domain.dim();
        let mut components = Vec::with_capacity(param_nodes.len());
        for e in 0..param_nodes.len() {
            let mut vals = vec![Vec::with_capacity(domain.node_count()); d];
            for n in 0..domain.node_count() {
                let v = f(e, &domain.node_coord(n));
                if v.len() != d {
                    return Err(Error::ShapeMismatch(format!("field sample of length {}", v.len())));
                }
                for k in 0..d {
                    vals[k].push(v[k]);
                }
            }
            components.push(
                vals.into_iter()
                    .map(|v| GridFunction::scalar(domain.clone(), v))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Self::from_components(param_nodes, components, slip)
    }

    pub fn param_nodes(&self) -> &ParamNodeSet {
        &self.param_nodes
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn slip(&self) -> bool {
        self.slip
    }

    pub fn component(&self, eta_index: usize, axis: usize) -> &GridFunction {
        &self.components[eta_index][axis]
    }

    /// Field velocity at `x` for parameter node `eta_index`.
    pub fn field_eval(&self, eta_index: usize, x: &[f64]) -> Result<Vec<f64>> {
        if eta_index >= self.param_nodes.len() {
            return Err(Error::IndexOutOfRange { index: eta_index, len: self.param_nodes.len() });
        }
        let st = self.domain.stencil(x)?;
        Ok(self.components[eta_index].iter().map(|g| g.eval_scalar_stencil(&st)).collect())
    }

    #[inline]
    pub(crate) fn eval_at(&self, eta_index: usize, st: &Stencil, out: &mut [f64]) {
        for (k, g) in self.components[eta_index].iter().enumerate() {
            out[k] = g.eval_scalar_stencil(st);
        }
    }

    /// Jacobian row-major `[component][axis]`.
    #[inline]
    pub(crate) fn jacobian_at(&self, eta_index: usize, st: &Stencil) -> [[f64; 2]; 2] {
        let mut j = [[0.0; 2]; 2];
        for (k, g) in self.components[eta_index].iter().enumerate() {
            j[k] = st.apply_grad(g.values());
        }
        j
    }

    /// Zeroes the normal component on the boundary. Idempotent.
    pub fn project_slip(&self) -> Self {
        let mut out = self.clone();
        out.slip = true;
        out.zero_normal_boundary();
        out
    }

    fn zero_normal_boundary(&mut self) {
        let dom = self.domain.clone();
        for slice in &mut self.components {
            for (k, g) in slice.iter_mut().enumerate() {
                let vals = g.values_mut();
                for (n, v) in vals.iter_mut().enumerate() {
                    if dom.on_normal_boundary(n, k) {
                        *v = 0.0;
                    }
                }
            }
        }
    }

    /// True for nodal values pinned by the slip condition.
    pub fn is_constrained(&self, axis: usize, node: usize) -> bool {
        self.slip && self.domain.on_normal_boundary(node, axis)
    }

    /// Largest operator norm of the interpolant's Jacobian over all cells and
    /// parameter nodes. The Jacobian is affine on each cell, so its norm
    /// peaks at a cell corner.
    pub fn lipschitz_estimate(&self) -> f64 {
        let dom = &self.domain;
        let mut best: f64 = 0.0;
        for slice in &self.components {
            if dom.dim() == 1 {
                let h = dom.spacing(0);
                let v = slice[0].values();
                for w in v.windows(2) {
                    best = best.max((w[1] - w[0]).abs() / h);
                }
                continue;
            }
            let (hx, hy) = (dom.spacing(0), dom.spacing(1));
            let (cx, cy) = (dom.cells()[0], dom.cells()[1]);
            let at = |k: usize, i: usize, j: usize| slice[k].values()[dom.node_index(i, j)];
            for j in 0..cy {
                for i in 0..cx {
                    for (a, b) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                        let mut m = [[0.0; 2]; 2];
                        for (k, row) in m.iter_mut().enumerate() {
                            row[0] = (at(k, i + 1, j + b) - at(k, i, j + b)) / hx;
                            row[1] = (at(k, i + a, j + 1) - at(k, i + a, j)) / hy;
                        }
                        best = best.max(spectral_norm_2x2(m));
                    }
                }
            }
        }
        best
    }

    /// Raw nodal arrays, `[eta][component] -> values`.
    pub fn nodal_values(&self) -> Vec<Vec<Vec<f64>>> {
        self.components
            .iter()
            .map(|s| s.iter().map(|g| g.values().to_vec()).collect())
            .collect()
    }

    /// `self - alpha * direction`, followed by slip projection.
    pub fn updated(&self, direction: &[Vec<Vec<f64>>], alpha: f64) -> Result<Self> {
        if direction.len() != self.components.len() {
            return Err(Error::ShapeMismatch("update direction has wrong shape".into()));
        }
        let mut out = self.clone();
        for (slice, dslice) in out.components.iter_mut().zip(direction) {
            if dslice.len() != slice.len() {
                return Err(Error::ShapeMismatch("update direction has wrong shape".into()));
            }
            for (g, dv) in slice.iter_mut().zip(dslice) {
                if dv.len() != g.values().len() {
                    return Err(Error::ShapeMismatch("update direction has wrong shape".into()));
                }
                for (v, d) in g.values_mut().iter_mut().zip(dv) {
                    *v -= alpha * d;
                }
                if let Some(p) = g.values().iter().position(|v| !v.is_finite()) {
                    return Err(Error::Numerical {
                        stage: "field update",
                        detail: format!("non-finite nodal value at {p}"),
                    });
                }
            }
        }
        if out.slip {
            out.zero_normal_boundary();
        }
        Ok(out)
    }

    /// Writes one component slice as a checkpoint: a `#` line naming the
    /// parameter node and component, then the grid CSV.
    pub fn write_component_csv<W: Write>(
        &self,
        eta_index: usize,
        axis: usize,
        mut w: W,
    ) -> std::io::Result<()> {
        writeln!(
            w,
            "# eta={},component={}",
            crate::pgrid::fmt_f64(self.param_nodes.nodes()[eta_index]),
            axis
        )?;
        write_csv_table(w, &self.domain, &[("v0", self.components[eta_index][axis].values())])
    }
}

/// Parses a checkpoint written by [`TransportField::write_component_csv`].
/// Returns the parameter node value, the component index and the values.
pub fn read_component_csv<R: BufRead>(domain: &Domain, mut r: R) -> Result<(f64, usize, GridFunction)> {
    let mut first = String::new();
    r.read_line(&mut first).map_err(|e| Error::Parse(e.to_string()))?;
    let meta = first
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("checkpoint lacks '# eta=..,component=..' line".into()))?;
    let mut eta = None;
    let mut comp = None;
    for part in meta.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad checkpoint header {meta:?}")))?;
        match k.trim() {
            "eta" => eta = v.trim().parse::<f64>().ok(),
            "component" => comp = v.trim().parse::<usize>().ok(),
            _ => {}
        }
    }
    let (eta, comp) = eta
        .zip(comp)
        .ok_or_else(|| Error::Parse(format!("bad checkpoint header {meta:?}")))?;
    let table = read_csv_table(domain, r)?;
    let values = table
        .column("v0")
        .ok_or_else(|| Error::Parse("checkpoint lacks v0 column".into()))?
        .to_vec();
    Ok((eta, comp, GridFunction::scalar(domain.clone(), values)?))
}

pub(crate) fn spectral_norm_2x2(m: [[f64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = m;
    let fro2 = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    ((fro2 + disc) / 2.0).sqrt()
}

/// Low-resolution transforms: for every pair of snapshot nodes a tensor
/// polynomial map `x -> X(eta; gamma, x)`, combined over gamma by Lagrange
/// interpolation in the target parameter.
///
/// Each polynomial is stored by its values at `degree + 1` equispaced anchors
/// per axis. With `frozen_boundary`, anchors on faces normal to a component
/// keep that component at the face coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct LowResTransform {
    param_nodes: ParamNodeSet,
    domain: Domain,
    degree: usize,
    frozen_boundary: bool,
    anchors: Vec<ParamNodeSet>,
    /// `[eta][gamma][component][anchor]`, flattened.
    values: Vec<f64>,
}

impl LowResTransform {
    /// Identity map for every pair.
    pub fn identity(
        param_nodes: ParamNodeSet,
        domain: Domain,
        degree: usize,
        frozen_boundary: bool,
    ) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidSettings("low-resolution degree must be >= 1".into()));
        }
        let anchors = (0..domain.dim())
            .map(|k| {
                ParamNodeSet::new(
                    (0..=degree)
                        .map(|i| {
                            let (l, u) = (domain.lower()[k], domain.upper()[k]);
                            if i == degree {
                                u
                            } else {
                                l + (u - l) * i as f64 / degree as f64
                            }
                        })
                        .collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let mut t = Self {
            param_nodes,
            domain,
            degree,
            frozen_boundary,
            anchors,
            values: Vec::new(),
        };
        let per_pair: Vec<f64> = (0..t.dim())
            .flat_map(|k| (0..t.anchor_count()).map(move |a| (k, a)))
            .map(|(k, a)| t.anchor_coord(a)[k])
            .collect();
        let pairs = t.param_nodes.len() * t.param_nodes.len();
        t.values = (0..pairs).flat_map(|_| per_pair.iter().copied()).collect();
        Ok(t)
    }

    pub fn param_nodes(&self) -> &ParamNodeSet {
        &self.param_nodes
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn frozen_boundary(&self) -> bool {
        self.frozen_boundary
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn anchor_count(&self) -> usize {
        (self.degree + 1).pow(self.dim() as u32)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn anchor_coord(&self, anchor: usize) -> Vec<f64> {
        let p = self.degree + 1;
        (0..self.dim())
            .map(|k| {
                let idx = if k == 0 { anchor % p } else { anchor / p };
                self.anchors[k].nodes()[idx]
            })
            .collect()
    }

    /// Flat index of a coefficient.
    pub fn index(&self, eta: usize, gamma: usize, comp: usize, anchor: usize) -> usize {
        let m = self.param_nodes.len();
        ((eta * m + gamma) * self.dim() + comp) * self.anchor_count() + anchor
    }

    pub fn is_frozen(&self, comp: usize, anchor: usize) -> bool {
        if !self.frozen_boundary {
            return false;
        }
        let p = self.degree + 1;
        let idx = if comp == 0 { anchor % p } else { anchor / p };
        idx == 0 || idx == self.degree
    }

    /// Frozen flag for every flat coefficient.
    pub fn frozen_mask(&self) -> Vec<bool> {
        let per_pair = self.dim() * self.anchor_count();
        (0..self.values.len())
            .map(|i| {
                let r = i % per_pair;
                self.is_frozen(r / self.anchor_count(), r % self.anchor_count())
            })
            .collect()
    }

    /// Tensor Lagrange basis over the anchors at `x`.
    pub fn anchor_basis(&self, x: &[f64]) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> =
            (0..self.dim()).map(|k| lagrange_weights(&self.anchors[k], x[k])).collect();
        if self.dim() == 1 {
            return per_axis.into_iter().next().unwrap_or_default();
        }
        let p = self.degree + 1;
        (0..self.anchor_count()).map(|a| per_axis[0][a % p] * per_axis[1][a / p]).collect()
    }

    /// `X(eta; gamma, x)` for one stored pair.
    pub fn eval_pair(&self, eta: usize, gamma: usize, x: &[f64]) -> Vec<f64> {
        let basis = self.anchor_basis(x);
        self.eval_pair_with(eta, gamma, &basis)
    }

    pub(crate) fn eval_pair_with(&self, eta: usize, gamma: usize, basis: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|k| {
                let start = self.index(eta, gamma, k, 0);
                basis.iter().zip(&self.values[start..start + basis.len()]).map(|(b, v)| b * v).sum()
            })
            .collect()
    }

    /// Transformed point for snapshot `eta_index` and target `mu`.
    pub fn lowres_eval(&self, eta_index: usize, mu: f64, x: &[f64]) -> Result<Vec<f64>> {
        if eta_index >= self.param_nodes.len() {
            return Err(Error::IndexOutOfRange { index: eta_index, len: self.param_nodes.len() });
        }
        if x.len() != self.dim() {
            return Err(Error::ShapeMismatch("point dimension".into()));
        }
        let ell = lagrange_weights(&self.param_nodes, mu);
        let basis = self.anchor_basis(x);
        let mut out = vec![0.0; self.dim()];
        for (g, l) in ell.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.eval_pair_with(eta_index, g, &basis)) {
                *o += l * v;
            }
        }
        Ok(out)
    }

    /// `self - alpha * direction`; frozen coefficients are left untouched.
    pub fn updated(&self, direction: &[f64], alpha: f64) -> Result<Self> {
        if direction.len() != self.values.len() {
            return Err(Error::ShapeMismatch("low-resolution update has wrong length".into()));
        }
        let mask = self.frozen_mask();
        let mut out = self.clone();
        for ((v, d), frozen) in out.values.iter_mut().zip(direction).zip(mask) {
            if !frozen {
                *v -= alpha * d;
            }
        }
        if out.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                stage: "low-resolution update",
                detail: "non-finite anchor value".into(),
            });
        }
        Ok(out)
    }

    /// Replaces the coefficient vector (frozen entries must keep their value).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::ShapeMismatch("low-resolution coefficient count".into()));
        }
        let mask = self.frozen_mask();
        if values.iter().zip(&self.values).zip(mask).any(|((a, b), f)| f && a != b) {
            return Err(Error::InvalidSettings("frozen anchors cannot change".into()));
        }
        Ok(Self { values, ..self.clone() })
    }

    /// Writes `eta,gamma,component,anchor,value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "eta,gamma,component,anchor,value")?;
        let m = self.param_nodes.len();
        for e in 0..m {
            for g in 0..m {
                for k in 0..self.dim() {
                    for a in 0..self.anchor_count() {
                        writeln!(
                            w,
                            "{e},{g},{k},{a},{}",
                            crate::pgrid::fmt_f64(self.values[self.index(e, g, k, a)])
                        )?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Loads coefficients written by [`LowResTransform::write_csv`] into a
    /// transform with the same layout.
    pub fn read_values_csv<R: BufRead>(&self, r: R) -> Result<Self> {
        let mut values = self.values.clone();
        let mut seen = 0;
        for (ln, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if ln == 0 || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(Error::Parse(format!("line {ln}: expected 5 fields")));
            }
            let idx = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Parse(e.to_string()));
            let (e, g, k, a) = (idx(f[0])?, idx(f[1])?, idx(f[2])?, idx(f[3])?);
            let v: f64 = f[4].trim().parse().map_err(|e: std::num::ParseFloatError| Error::Parse(e.to_string()))?;
            let m = self.param_nodes.len();
            if e >= m || g >= m || k >= self.dim() || a >= self.anchor_count() {
                return Err(Error::Parse(format!("line {ln}: index out of range")));
            }
            values[self.index(e, g, k, a)] = v;
            seen += 1;
        }
        if seen != values.len() {
            return Err(Error::Parse(format!("{seen} coefficients for {}", values.len())));
        }
        Ok(Self { values, ..self.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(nodes: &[f64]) -> ParamNodeSet {
        ParamNodeSet::new(nodes.to_vec()).unwrap()
    }

    #[test]
    fn field_eval_examples() {
        let dom = Domain::interval(0.0, 1.0, 1).unwrap();
        let zero = TransportField::zeros(p(&[0.5]), dom.clone(), true);
        assert_eq!(zero.field_eval(0, &[0.3]).unwrap(), vec![0.0]);
        assert!(matches!(zero.field_eval(1, &[0.3]), Err(Error::IndexOutOfRange { .. })));

        let lin = TransportField::from_components(
            p(&[0.5]),
            vec![vec![GridFunction::scalar(dom.clone(), vec![0.0, 2.0]).unwrap()]],
            false,
        )
        .unwrap();
        assert_relative_eq!(lin.field_eval(0, &[0.25]).unwrap()[0], 0.5);
        let slip = lin.project_slip();
        assert_eq!(slip.field_eval(0, &[1.0]).unwrap(), vec![0.0]);
        assert_eq!(slip.field_eval(0, &[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn slip_projection() {
        let dom = Domain::interval(0.0, 1.0, 4).unwrap();
        let f = TransportField::sample(p(&[0.1]), dom, false, |_, _| vec![1.0]).unwrap();
        let s = f.project_slip();
        assert_eq!(s.component(0, 0).values(), &[0.0, 1.0, 1.0, 1.0, 0.0]);
        assert_eq!(s.project_slip(), s);

        let dom2 = Domain::rectangle([0.0, 0.0], [1.0, 1.0], [3, 2]).unwrap();
        let f2 = TransportField::sample(p(&[0.1]), dom2.clone(), false, |_, _| vec![1.0, 1.0])
            .unwrap()
            .project_slip();
        for n in 0..dom2.node_count() {
            let [i, j] = dom2.node_multi_index(n);
            let vx = f2.component(0, 0).values()[n];
            let vy = f2.component(0, 1).values()[n];
            assert_eq!(vx, if i == 0 || i == 3 { 0.0 } else { 1.0 }, "x at {i},{j}");
            assert_eq!(vy, if j == 0 || j == 2 { 0.0 } else { 1.0 }, "y at {i},{j}");
        }
    }

    #[test]
    fn lipschitz_examples() {
        let dom = Domain::interval(0.0, 1.0, 1).unwrap();
        assert_eq!(TransportField::zeros(p(&[0.0]), dom.clone(), true).lipschitz_estimate(), 0.0);
        let f = TransportField::from_components(
            p(&[0.0]),
            vec![vec![GridFunction::scalar(dom, vec![0.0, 1.0]).unwrap()]],
            false,
        )
        .unwrap();
        assert_relative_eq!(f.lipschitz_estimate(), 1.0);

        let dom2 = Domain::interval(0.0, 2.0, 2).unwrap();
        let g = TransportField::from_components(
            p(&[0.0]),
            vec![vec![GridFunction::scalar(dom2, vec![0.0, 0.5, 2.0]).unwrap()]],
            false,
        )
        .unwrap();
        assert_relative_eq!(g.lipschitz_estimate(), 1.5);
    }

    #[test]
    fn lipschitz_2d_rotation_field() {
        // (x, y) -> (-y, x) has Jacobian norm 1
        let dom = Domain::rectangle([-1.0, -1.0], [1.0, 1.0], [4, 4]).unwrap();
        let f = TransportField::sample(p(&[0.0]), dom, false, |_, x| vec![-x[1], x[0]]).unwrap();
        assert_relative_eq!(f.lipschitz_estimate(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn spectral_norm_matches_power_iteration() {
        let m = [[1.0, 2.0], [-0.5, 3.0]];
        let mut v: [f64; 2] = [1.0, 0.3];
        for _ in 0..200 {
            let w = [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]];
            let u = [m[0][0] * w[0] + m[1][0] * w[1], m[0][1] * w[0] + m[1][1] * w[1]];
            let n = (u[0] * u[0] + u[1] * u[1]).sqrt();
            v = [u[0] / n, u[1] / n];
        }
        let w = [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]];
        assert_relative_eq!(spectral_norm_2x2(m), (w[0] * w[0] + w[1] * w[1]).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn lowres_identity_and_single_node() {
        let dom = Domain::interval(-1.5, 1.5, 8).unwrap();
        let t = LowResTransform::identity(p(&[0.6]), dom.clone(), 3, true).unwrap();
        for x in [-1.5, -0.3, 0.2, 1.5] {
            assert_relative_eq!(t.lowres_eval(0, 0.9, &[x]).unwrap()[0], x, epsilon = 1e-14);
        }
        let mut vals = t.values().to_vec();
        vals[1] = -0.2;
        vals[2] = 0.9;
        let bent = t.with_values(vals).unwrap();
        let a = bent.lowres_eval(0, 0.7, &[0.3]).unwrap();
        let b = bent.lowres_eval(0, 0.95, &[0.3]).unwrap();
        assert_eq!(a, b);
        assert_relative_eq!(bent.lowres_eval(0, 0.9, &[-1.5]).unwrap()[0], -1.5, epsilon = 1e-14);
        assert_relative_eq!(bent.lowres_eval(0, 0.9, &[1.5]).unwrap()[0], 1.5, epsilon = 1e-14);
    }

    #[test]
    fn lowres_frozen_anchors() {
        let dom = Domain::interval(-1.5, 1.5, 8).unwrap();
        let t = LowResTransform::identity(p(&[-0.2, 0.2]), dom, 2, true).unwrap();
        let mask = t.frozen_mask();
        assert_eq!(mask.len(), 4 * 3);
        assert_eq!(&mask[..3], &[true, false, true]);
        let mut v = t.values().to_vec();
        v[0] = 0.0;
        assert!(t.with_values(v).is_err());
        let moved = t.updated(&[1.0; 12], 0.1).unwrap();
        assert_eq!(moved.values()[0], -1.5);
        assert_relative_eq!(moved.values()[1], -0.1);
    }

    #[test]
    fn lowres_2d_identity() {
        let dom = Domain::rectangle([-1.0, -1.0], [1.0, 1.0], [4, 4]).unwrap();
        let t = LowResTransform::identity(p(&[0.1, 0.2]), dom, 2, true).unwrap();
        let y = t.lowres_eval(1, 0.15, &[0.3, -0.7]).unwrap();
        assert_relative_eq!(y[0], 0.3, epsilon = 1e-14);
        assert_relative_eq!(y[1], -0.7, epsilon = 1e-14);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let dom = Domain::rectangle([-1.0, -1.0], [1.0, 1.0], [3, 3]).unwrap();
        let f = TransportField::sample(p(&[0.2]), dom.clone(), true, |_, x| vec![x[1], x[0] * x[0]])
            .unwrap();
        let mut buf = Vec::new();
        f.write_component_csv(0, 1, &mut buf).unwrap();
        let (eta, k, g) = read_component_csv(&dom, buf.as_slice()).unwrap();
        assert_eq!((eta, k), (0.2, 1));
        assert_eq!(&g, f.component(0, 1));

        let t = LowResTransform::identity(p(&[0.6]), Domain::interval(-1.5, 1.5, 4).unwrap(), 3, true)
            .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(t.read_values_csv(buf.as_slice()).unwrap(), t);
    }
}
