//! Hand-written reverse pass through reconstruction and curve solves.
//!
//! Every snapshot-grid point is independent: the forward pass records the
//! curve values fed to the field at each fixed-point application, and the
//! backward pass replays them in reverse. Per-point contributions are
//! collected in parallel and summed in point order.

use crate::curves::CurvePlan;
use crate::error::{Error, Result};
use crate::par;
use crate::pspace::lagrange_weights;
use crate::transport::TransportField;
use crate::tsi::{aggregate, ObjectiveMode, Transform, TrainingSet, TsiModel};

/// Derivative of the objective with respect to every field nodal value,
/// laid out `[level][eta][component][node]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGradient {
    pub levels: Vec<Vec<Vec<Vec<f64>>>>,
}

impl FieldGradient {
    pub fn zeros_like(fields: &[TransportField]) -> Self {
        Self {
            levels: fields
                .iter()
                .map(|f| {
                    (0..f.param_nodes().len())
                        .map(|_| vec![vec![0.0; f.domain().node_count()]; f.dim()])
                        .collect()
                })
                .collect(),
        }
    }

    /// Euclidean norm over all entries.
    pub fn norm(&self) -> f64 {
        self.flat().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.levels.iter().flatten().flatten().flatten().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.flat().all(|v| v == 0.0)
    }
}

/// Objective value with its derivative.
#[derive(Clone, Debug)]
pub struct Gradient<G> {
    pub value: f64,
    pub grad: G,
}

/// Per-point output of the combined forward/backward kernel.
struct PointResult {
    abs_err: f64,
    contributions: Vec<(usize, f64)>,
}

/// Residual sign with `sign(0) = 0`.
#[inline]
fn sign(e: f64) -> f64 {
    if e > 0.0 {
        1.0
    } else if e < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Runs `kernel` at every snapshot-grid node; returns the weighted L1 error
/// and adds the contributions into `acc`.
fn sweep(
    model: &TsiModel,
    target: &[f64],
    acc: &mut [f64],
    kernel: &(dyn Fn(&[f64], f64, f64, &mut Vec<(usize, f64)>) -> Result<f64> + Sync),
) -> Result<f64> {
    let dom = model.domain();
    let weights = dom.trapezoid_weights();
    let results = par::try_map_indexed(dom.node_count(), |p| {
        let x = dom.node_coord(p);
        let mut contributions = Vec::new();
        let abs_err = kernel(&x, weights[p], target[p], &mut contributions)? * weights[p];
        Ok(PointResult { abs_err, contributions })
    })?;
    let mut total = 0.0;
    for r in results {
        total += r.abs_err;
        for (i, v) in r.contributions {
            acc[i] += v;
        }
    }
    Ok(total)
}

/// Transformed points `X(eta_m)` and, for each level, the taped solve.
struct Forward {
    y: Vec<f64>,
    level_tapes: Vec<Vec<f64>>,
}

fn forward_highres(
    fields: &[TransportField],
    plan: &CurvePlan,
    etas: &[f64],
    x: &[f64],
) -> Result<Forward> {
    let d = x.len();
    let basis = plan.final_basis();
    let mut y: Vec<f64> = etas.iter().flat_map(|_| x.iter().copied()).collect();
    let mut level_tapes = Vec::with_capacity(fields.len());
    let mut v = [0.0; 2];
    for field in fields {
        let mut tape = Vec::new();
        let a = plan.solve_point(field, x, Some(&mut tape))?;
        for (m, &eta) in etas.iter().enumerate() {
            basis.eval_point(&a, d, eta, &mut v[..d]);
            for k in 0..d {
                y[m * d + k] += v[k] - x[k];
            }
        }
        level_tapes.push(tape);
    }
    if y.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical { stage: "transform", detail: format!("non-finite transform at {x:?}") });
    }
    Ok(Forward { y, level_tapes })
}

/// Reconstruction at one point from transformed coordinates, plus the
/// adjoint `dRecon/dX_m` per snapshot node.
fn reconstruct_point(model: &TsiModel, ell: &[f64], y: &[f64], dy: &mut [f64]) -> f64 {
    let dom = model.domain();
    let d = dom.dim();
    let mut recon = 0.0;
    for (m, (s, l)) in model.snapshots().snapshots().iter().zip(ell).enumerate() {
        let st = dom.stencil_unchecked(&y[m * d..(m + 1) * d]);
        recon += l * st.apply(s.values());
        let g = st.apply_grad(s.values());
        for k in 0..d {
            dy[m * d + k] = l * g[k];
        }
    }
    recon
}

/// Accumulates the gradient of the weighted L1 error at `mu` into `acc`
/// (flat field layout with `offsets[level]`); returns the error.
fn highres_mu(
    model: &TsiModel,
    fields: &[TransportField],
    offsets: &[usize],
    mu: f64,
    target: &[f64],
    acc: &mut [f64],
) -> Result<f64> {
    let plan = model.plan(mu)?.expect("high-resolution plan");
    let etas = model.snapshots().param_nodes().nodes().to_vec();
    let ell = lagrange_weights(model.snapshots().param_nodes(), mu);
    let d = model.domain().dim();
    let n = plan.final_basis().len();
    let omegas: Vec<Vec<f64>> = etas.iter().map(|&e| plan.final_basis().omegas(e)).collect();
    let kernel = |x: &[f64], w: f64, t: f64, out: &mut Vec<(usize, f64)>| -> Result<f64> {
        let fw = forward_highres(fields, &plan, &etas, x)?;
        let mut dy = vec![0.0; etas.len() * d];
        let recon = reconstruct_point(model, &ell, &fw.y, &mut dy);
        let e = t - recon;
        let s = sign(e);
        if s == 0.0 {
            return Ok(e.abs());
        }
        let coef = -w * s;
        let mut abar = vec![0.0; n * d];
        for m in 0..etas.len() {
            for i in 1..=n {
                for k in 0..d {
                    abar[(i - 1) * d + k] += omegas[m][i] * coef * dy[m * d + k];
                }
            }
        }
        if abar.iter().all(|&v| v == 0.0) {
            return Ok(e.abs());
        }
        for (lvl, field) in fields.iter().enumerate() {
            let nodes = field.domain().node_count();
            let base = offsets[lvl];
            plan.backprop_point(field, &fw.level_tapes[lvl], &abar, &mut |eta, c, node, v| {
                out.push((base + (eta * d + c) * nodes + node, v));
            });
        }
        Ok(e.abs())
    };
    sweep(model, target, acc, &kernel)
}

/// Parameters of `P_T` that enter the derivative: all of them for the sum,
/// the first maximizer (in increasing parameter order) for the supremum.
fn active_params(mode: ObjectiveMode, training: &TrainingSet, errors: Option<&[f64]>) -> Vec<usize> {
    let order = training.params().sorted_order();
    match (mode, errors) {
        (ObjectiveMode::Sum, _) | (ObjectiveMode::Sup, None) => order,
        (ObjectiveMode::Sup, Some(errs)) => {
            let mut best = order[0];
            for &i in &order {
                if errs[i] > errs[best] {
                    best = i;
                }
            }
            vec![best]
        }
    }
}

/// Reverse-mode derivative with respect to all field levels' nodal values.
pub fn gradient(model: &TsiModel, training: &TrainingSet) -> Result<Gradient<FieldGradient>> {
    let fields = match model.transform() {
        Transform::HighRes(f) => f,
        Transform::LowRes(_) => {
            return Err(Error::Unsupported("field gradient of a low-resolution model".into()))
        }
    };
    if training.targets()[0].domain() != model.domain() {
        return Err(Error::ShapeMismatch("targets and snapshots live on different grids".into()));
    }
    let d = model.domain().dim();
    let mut offsets = Vec::with_capacity(fields.len());
    let mut total = 0;
    for f in fields {
        offsets.push(total);
        total += f.param_nodes().len() * d * f.domain().node_count();
    }
    let mut acc = vec![0.0; total];
    let mut errors = vec![0.0; training.params().len()];
    let value = match model.objective_mode() {
        ObjectiveMode::Sum => {
            for i in training.params().sorted_order() {
                let mu = training.params().nodes()[i];
                errors[i] = highres_mu(model, fields, &offsets, mu, training.targets()[i].values(), &mut acc)?;
            }
            aggregate(ObjectiveMode::Sum, training.params(), &errors)
        }
        ObjectiveMode::Sup => {
            errors = crate::tsi::training_errors(model, training)?;
            let mut scratch = vec![0.0; total];
            for i in active_params(ObjectiveMode::Sup, training, Some(&errors)) {
                let mu = training.params().nodes()[i];
                highres_mu(model, fields, &offsets, mu, training.targets()[i].values(), &mut scratch)?;
            }
            acc = scratch;
            aggregate(ObjectiveMode::Sup, training.params(), &errors)
        }
    };
    let mut grad = FieldGradient::zeros_like(fields);
    for (lvl, field) in fields.iter().enumerate() {
        let nodes = field.domain().node_count();
        for (eta, slice) in grad.levels[lvl].iter_mut().enumerate() {
            for (c, comp) in slice.iter_mut().enumerate() {
                let start = offsets[lvl] + (eta * d + c) * nodes;
                comp.copy_from_slice(&acc[start..start + nodes]);
                for (node, v) in comp.iter_mut().enumerate() {
                    if field.is_constrained(c, node) {
                        *v = 0.0;
                    }
                }
            }
        }
    }
    if grad.flat().any(|v| !v.is_finite()) {
        return Err(Error::Numerical { stage: "gradient", detail: "non-finite field gradient".into() });
    }
    Ok(Gradient { value, grad })
}

/// Reverse-mode derivative with respect to the low-resolution anchor
/// values, in the transform's flat coefficient order. Frozen anchors get 0.
pub fn lowres_gradient(model: &TsiModel, training: &TrainingSet) -> Result<Gradient<Vec<f64>>> {
    let t = match model.transform() {
        Transform::LowRes(t) => t,
        Transform::HighRes(_) => {
            return Err(Error::Unsupported("anchor gradient of a high-resolution model".into()))
        }
    };
    if training.targets()[0].domain() != model.domain() {
        return Err(Error::ShapeMismatch("targets and snapshots live on different grids".into()));
    }
    let d = model.domain().dim();
    let pm = model.snapshots().param_nodes();
    let m_count = pm.len();
    let mut acc = vec![0.0; t.values().len()];
    let errors = crate::tsi::training_errors(model, training)?;
    let active = active_params(model.objective_mode(), training, Some(&errors));
    for i in active {
        let mu = training.params().nodes()[i];
        let ell = lagrange_weights(pm, mu);
        let kernel = |x: &[f64], w: f64, tv: f64, out: &mut Vec<(usize, f64)>| -> Result<f64> {
            let basis = t.anchor_basis(x);
            let mut y = vec![0.0; m_count * d];
            for m in 0..m_count {
                for (g, l) in ell.iter().enumerate() {
                    for (k, v) in t.eval_pair_with(m, g, &basis).into_iter().enumerate() {
                        y[m * d + k] += l * v;
                    }
                }
            }
            let mut dy = vec![0.0; m_count * d];
            let recon = reconstruct_point(model, &ell, &y, &mut dy);
            let e = tv - recon;
            let s = sign(e);
            if s == 0.0 {
                return Ok(e.abs());
            }
            let coef = -w * s;
            for m in 0..m_count {
                for (g, l) in ell.iter().enumerate() {
                    for k in 0..d {
                        let ybar = coef * dy[m * d + k] * l;
                        if ybar == 0.0 {
                            continue;
                        }
                        let start = t.index(m, g, k, 0);
                        for (a, b) in basis.iter().enumerate() {
                            out.push((start + a, ybar * b));
                        }
                    }
                }
            }
            Ok(e.abs())
        };
        sweep(model, training.targets()[i].values(), &mut acc, &kernel)?;
    }
    for (v, frozen) in acc.iter_mut().zip(t.frozen_mask()) {
        if frozen {
            *v = 0.0;
        }
    }
    if acc.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical { stage: "gradient", detail: "non-finite anchor gradient".into() });
    }
    Ok(Gradient { value: aggregate(model.objective_mode(), training.params(), &errors), grad: acc })
}
