//! Polynomial transform curves: Newton-basis collocation of the transport
//! ODE, solved by fixed-point iteration with scaling continuation.
//!
//! A curve through `x` at `mu` is `X(xi) = sum_i a_i w_i(xi)` with `w_0 = 1`
//! and `w_i(xi) = (xi - mu) prod_{j < i} (xi - eta_j)`; `a_0 = x` always.
//! One fixed-point application evaluates the current curve at the nodes,
//! samples the field there and solves `X'(eta_i) = Phi(X(eta_i), eta_i)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::par;
use crate::pspace::{lebesgue_constant, ParamNodeSet};
use crate::transport::TransportField;

/// Conditioning above which the collocation matrix counts as singular.
const MAX_CONDITION: f64 = 1e12;

/// Fixed-point iteration count and scaling stages.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveSettings {
    pub iterations: usize,
    pub scalings: Vec<f64>,
}

impl SolveSettings {
    pub fn new(iterations: usize, scalings: Vec<f64>) -> Result<Self> {
        let s = Self { iterations, scalings };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidSettings("at least one fixed-point iteration".into()));
        }
        if let Some(&last) = self.scalings.last() {
            let increasing = self.scalings.windows(2).all(|w| w[0] < w[1]);
            let in_range = self.scalings.iter().all(|&s| s > 0.0 && s <= 1.0);
            if !increasing || !in_range || last != 1.0 {
                return Err(Error::InvalidSettings(format!(
                    "scalings must increase within (0, 1] and end at 1, got {:?}",
                    self.scalings
                )));
            }
        }
        Ok(())
    }

    /// Scalings actually used; empty means the single stage `s = 1`.
    pub fn stages(&self) -> Vec<f64> {
        if self.scalings.is_empty() {
            vec![1.0]
        } else {
            self.scalings.clone()
        }
    }
}

/// Newton basis on `{mu} ∪ nodes` and the factorized collocation matrix
/// `M_ij = w_j'(eta_i)`.
#[derive(Clone, Debug)]
pub struct NewtonBasis {
    mu: f64,
    nodes: Vec<f64>,
    omega_prime: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl NewtonBasis {
    pub fn build(mu: f64, nodes: &[f64]) -> Result<Self> {
        if !mu.is_finite() || nodes.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("curve basis nodes".into()));
        }
        if nodes.is_empty() {
            return Err(Error::InvalidSettings("empty curve node set".into()));
        }
        if let Some(&node) = nodes.iter().find(|&&v| v == mu) {
            return Err(Error::NodeCollision { mu, node });
        }
        let mut basis = Self {
            mu,
            nodes: nodes.to_vec(),
            omega_prime: DMatrix::zeros(0, 0),
            inverse: DMatrix::zeros(0, 0),
        };
        let n = nodes.len();
        let m = DMatrix::from_fn(n, n, |i, j| basis.omega_deriv(j + 1, nodes[i]));
        let sv = m.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::SingularBasis { condition });
        }
        let inverse = m
            .clone()
            .lu()
            .try_inverse()
            .ok_or(Error::SingularBasis { condition: f64::INFINITY })?;
        basis.omega_prime = m;
        basis.inverse = inverse;
        Ok(basis)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Collocation nodes `eta_1..eta_n` (after any scaling).
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn omega_prime(&self) -> &DMatrix<f64> {
        &self.omega_prime
    }

    /// Shift of the `i`-th Newton factor: `mu` then `eta_1, eta_2, ...`.
    #[inline]
    fn shift(&self, i: usize) -> f64 {
        if i == 0 {
            self.mu
        } else {
            self.nodes[i - 1]
        }
    }

    /// `w_i(xi)`.
    pub fn omega(&self, i: usize, xi: f64) -> f64 {
        (0..i).map(|j| xi - self.shift(j)).product()
    }

    /// All `w_0..w_n` at `xi`.
    pub fn omegas(&self, xi: f64) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.len() + 1);
        let mut acc = 1.0;
        w.push(acc);
        for i in 0..self.len() {
            acc *= xi - self.shift(i);
            w.push(acc);
        }
        w
    }

    /// `w_i'(xi)` by the product rule.
    pub fn omega_deriv(&self, i: usize, xi: f64) -> f64 {
        (0..i)
            .map(|l| (0..i).filter(|&j| j != l).map(|j| xi - self.shift(j)).product::<f64>())
            .sum()
    }

    /// Solves `M a = r` per component; `r` and `a` are laid out `[i * d + k]`.
    #[inline]
    fn solve_into(&self, r: &[f64], d: usize, a: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            for k in 0..d {
                a[i * d + k] = (0..n).map(|j| self.inverse[(i, j)] * r[j * d + k]).sum();
            }
        }
    }

    /// Solves `M^T r = a` per component.
    #[inline]
    fn solve_transpose_into(&self, a: &[f64], d: usize, r: &mut [f64]) {
        let n = self.len();
        for j in 0..n {
            for k in 0..d {
                r[j * d + k] = (0..n).map(|i| self.inverse[(i, j)] * a[i * d + k]).sum();
            }
        }
    }

    /// Horner evaluation of one point's curve, coefficients `[i * d + k]`.
    #[inline]
    pub(crate) fn eval_point(&self, a: &[f64], d: usize, xi: f64, out: &mut [f64]) {
        if xi == self.mu {
            out.copy_from_slice(&a[..d]);
            return;
        }
        let n = self.len();
        for k in 0..d {
            let mut acc = a[n * d + k];
            for i in (0..n).rev() {
                acc = a[i * d + k] + (xi - self.shift(i)) * acc;
            }
            out[k] = acc;
        }
    }
}

/// `build_basis` in free-function form.
pub fn build_basis(mu: f64, nodes: &ParamNodeSet) -> Result<NewtonBasis> {
    NewtonBasis::build(mu, nodes.nodes())
}

/// A batch of curves sharing one basis. Coefficients are stored per point as
/// `[(i * d + k)]`, points consecutive.
#[derive(Clone, Debug)]
pub struct NewtonCurve {
    basis: NewtonBasis,
    dim: usize,
    coeffs: Vec<f64>,
}

impl NewtonCurve {
    /// The constant curve `X ≡ x` for every point of `x_batch` (`[p * d + k]`).
    pub fn constant(basis: NewtonBasis, dim: usize, x_batch: &[f64]) -> Result<Self> {
        if dim == 0 || !x_batch.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch("point batch length".into()));
        }
        let stride = (basis.len() + 1) * dim;
        let points = x_batch.len() / dim;
        let mut coeffs = vec![0.0; points * stride];
        for p in 0..points {
            coeffs[p * stride..p * stride + dim].copy_from_slice(&x_batch[p * dim..(p + 1) * dim]);
        }
        Ok(Self { basis, dim, coeffs })
    }

    /// Wraps explicit coefficients.
    pub fn from_coeffs(basis: NewtonBasis, dim: usize, coeffs: Vec<f64>) -> Result<Self> {
        let stride = (basis.len() + 1) * dim;
        if dim == 0 || !coeffs.len().is_multiple_of(stride) {
            return Err(Error::ShapeMismatch("curve coefficient count".into()));
        }
        Ok(Self { basis, dim, coeffs })
    }

    pub fn basis(&self) -> &NewtonBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn stride(&self) -> usize {
        (self.basis.len() + 1) * self.dim
    }

    pub fn point_count(&self) -> usize {
        self.coeffs.len() / self.stride()
    }

    /// Initial points `a_0`.
    pub fn initial_points(&self) -> Vec<f64> {
        let (s, d) = (self.stride(), self.dim);
        self.coeffs.chunks(s).flat_map(|c| c[..d].iter().copied()).collect()
    }

    /// Curve values at `xi` for all points, `[p * d + k]`.
    pub fn eval(&self, xi: f64) -> Vec<f64> {
        let (s, d) = (self.stride(), self.dim);
        let mut out = vec![0.0; self.point_count() * d];
        for (a, o) in self.coeffs.chunks(s).zip(out.chunks_mut(d)) {
            self.basis.eval_point(a, d, xi, o);
        }
        out
    }
}

/// `eval_curve` in free-function form.
pub fn eval_curve(curve: &NewtonCurve, xi: f64) -> Vec<f64> {
    curve.eval(xi)
}

/// One fixed-point application for a single point: evaluates the previous
/// curve at the nodes of `basis`, samples the field and solves for the new
/// coefficients. Unclamped node values are appended to `tape` when given.
fn apply_point(
    prev: &NewtonBasis,
    prev_a: &[f64],
    basis: &NewtonBasis,
    field: &TransportField,
    out_a: &mut [f64],
    mut tape: Option<&mut Vec<f64>>,
) -> Result<()> {
    let d = field.dim();
    let n = basis.len();
    let mut v = [0.0; 2];
    let mut phi = [0.0; 2];
    let mut r = [0.0; 2 * 8];
    let mut r_heap;
    let r: &mut [f64] = if n * d <= r.len() {
        &mut r[..n * d]
    } else {
        r_heap = vec![0.0; n * d];
        &mut r_heap
    };
    for i in 0..n {
        prev.eval_point(prev_a, d, basis.nodes[i], &mut v[..d]);
        if v[..d].iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical {
                stage: "curve solve",
                detail: format!("non-finite curve value at node {}", basis.nodes[i]),
            });
        }
        if let Some(t) = tape.as_deref_mut() {
            t.extend_from_slice(&v[..d]);
        }
        let st = field.domain().stencil_unchecked(&v[..d]);
        field.eval_at(i, &st, &mut phi[..d]);
        r[i * d..(i + 1) * d].copy_from_slice(&phi[..d]);
    }
    out_a[..d].copy_from_slice(&prev_a[..d]);
    basis.solve_into(r, d, &mut out_a[d..]);
    Ok(())
}

/// One application of the fixed-point map to every curve of the batch.
pub fn apply_f(basis: &NewtonBasis, field: &TransportField, curve: &NewtonCurve) -> Result<NewtonCurve> {
    check_field(basis, field)?;
    if curve.dim != field.dim() {
        return Err(Error::ShapeMismatch("curve and field dimensions differ".into()));
    }
    let d = curve.dim;
    let stride_in = curve.stride();
    let stride = (basis.len() + 1) * d;
    let blocks = par::try_map_indexed(curve.point_count(), |p| {
        let mut out = vec![0.0; stride];
        apply_point(
            &curve.basis,
            &curve.coeffs[p * stride_in..(p + 1) * stride_in],
            basis,
            field,
            &mut out,
            None,
        )?;
        Ok(out)
    })?;
    Ok(NewtonCurve { basis: basis.clone(), dim: d, coeffs: blocks.concat() })
}

fn check_field(basis: &NewtonBasis, field: &TransportField) -> Result<()> {
    if field.param_nodes().len() != basis.len() {
        return Err(Error::ShapeMismatch(format!(
            "field has {} parameter nodes, basis {}",
            field.param_nodes().len(),
            basis.len()
        )));
    }
    Ok(())
}

/// The scaled bases of all continuation stages for one `(mu, nodes)` pair,
/// plus the iteration count. Reused across points and field updates.
#[derive(Clone, Debug)]
pub struct CurvePlan {
    stages: Vec<NewtonBasis>,
    iterations: usize,
}

impl CurvePlan {
    pub fn new(nodes: &ParamNodeSet, mu: f64, settings: &SolveSettings) -> Result<Self> {
        settings.validate()?;
        let stages = settings
            .stages()
            .into_iter()
            .map(|s| {
                let scaled: Vec<f64> = nodes
                    .nodes()
                    .iter()
                    .map(|&eta| if s == 1.0 { eta } else { mu + s * (eta - mu) })
                    .collect();
                NewtonBasis::build(mu, &scaled)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { stages, iterations: settings.iterations })
    }

    pub fn mu(&self) -> f64 {
        self.stages[0].mu
    }

    pub fn final_basis(&self) -> &NewtonBasis {
        self.stages.last().expect("at least one stage")
    }

    pub fn stages(&self) -> &[NewtonBasis] {
        &self.stages
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn applications(&self) -> usize {
        self.stages.len() * self.iterations
    }

    /// Final-stage coefficients for one point. With a tape, the curve values
    /// at the nodes of every application are recorded in order.
    pub(crate) fn solve_point(
        &self,
        field: &TransportField,
        x: &[f64],
        mut tape: Option<&mut Vec<f64>>,
    ) -> Result<Vec<f64>> {
        let d = x.len();
        let stride = (self.stages[0].len() + 1) * d;
        let mut cur = vec![0.0; stride];
        cur[..d].copy_from_slice(x);
        let mut next = vec![0.0; stride];
        let mut prev_basis = &self.stages[0];
        for basis in &self.stages {
            for _ in 0..self.iterations {
                apply_point(prev_basis, &cur, basis, field, &mut next, tape.as_deref_mut())?;
                std::mem::swap(&mut cur, &mut next);
                prev_basis = basis;
            }
        }
        Ok(cur)
    }

    /// Reverse pass for one point. `abar` is the adjoint of the final
    /// coefficients `a_1..a_n` (`[(i - 1) * d + k]`); field nodal adjoints are
    /// passed to `sink(eta_index, component, node, value)`.
    pub(crate) fn backprop_point(
        &self,
        field: &TransportField,
        tape: &[f64],
        abar: &[f64],
        sink: &mut impl FnMut(usize, usize, usize, f64),
    ) {
        let d = field.dim();
        let n = self.stages[0].len();
        debug_assert_eq!(tape.len(), self.applications() * n * d);
        let mut abar = abar.to_vec();
        let mut rbar = vec![0.0; n * d];
        let mut vbar = [0.0; 2];
        for app in (0..self.applications()).rev() {
            let stage = app / self.iterations;
            let basis = &self.stages[stage];
            let prev = if app == 0 {
                None
            } else {
                Some(&self.stages[(app - 1) / self.iterations])
            };
            basis.solve_transpose_into(&abar, d, &mut rbar);
            let mut prev_bar = vec![0.0; n * d];
            for i in 0..n {
                let ri = &rbar[i * d..(i + 1) * d];
                if ri.iter().all(|&c| c == 0.0) {
                    continue;
                }
                let v = &tape[(app * n + i) * d..(app * n + i + 1) * d];
                let st = field.domain().stencil_unchecked(v);
                for (c, &rc) in ri.iter().enumerate() {
                    if rc == 0.0 {
                        continue;
                    }
                    for a in 0..st.len {
                        sink(i, c, st.nodes[a], st.weights[a] * rc);
                    }
                }
                let Some(prev) = prev else { continue };
                let jac = field.jacobian_at(i, &st);
                for ax in 0..d {
                    vbar[ax] = (0..d).map(|c| ri[c] * jac[c][ax]).sum();
                }
                let w = prev.omegas(basis.nodes[i]);
                for j in 1..=n {
                    for ax in 0..d {
                        prev_bar[(j - 1) * d + ax] += w[j] * vbar[ax];
                    }
                }
            }
            abar = prev_bar;
        }
    }
}

/// Solves the curve problem for every point of `x_batch` (`[p * d + k]`).
pub fn solve_curve(
    basis_nodes: &ParamNodeSet,
    mu: f64,
    field: &TransportField,
    x_batch: &[f64],
    settings: &SolveSettings,
) -> Result<NewtonCurve> {
    let plan = CurvePlan::new(basis_nodes, mu, settings)?;
    solve_with_plan(&plan, field, x_batch)
}

pub fn solve_with_plan(plan: &CurvePlan, field: &TransportField, x_batch: &[f64]) -> Result<NewtonCurve> {
    check_field(plan.final_basis(), field)?;
    let d = field.dim();
    if !x_batch.len().is_multiple_of(d) {
        return Err(Error::ShapeMismatch("point batch length".into()));
    }
    let blocks = par::try_map_indexed(x_batch.len() / d, |p| {
        plan.solve_point(field, &x_batch[p * d..(p + 1) * d], None)
    })?;
    Ok(NewtonCurve { basis: plan.final_basis().clone(), dim: d, coeffs: blocks.concat() })
}

/// `Λ(nodes) · L(field) · |I|`; below one the fixed-point map contracts.
pub fn contraction_bound(nodes: &ParamNodeSet, field: &TransportField) -> f64 {
    let l = field.lipschitz_estimate();
    if l == 0.0 {
        return 0.0;
    }
    lebesgue_constant(nodes) * l * nodes.interval_length()
}
