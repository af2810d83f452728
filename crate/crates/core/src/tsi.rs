//! Transformed snapshot interpolation and the L1 training objective.

use crate::curves::{solve_with_plan, CurvePlan, SolveSettings};
use crate::error::{Error, Result};
use crate::par;
use crate::pgrid::{Domain, GridFunction};
use crate::pspace::{lagrange_weights, ParamNodeSet};
use crate::transport::{LowResTransform, TransportField};

/// Snapshots `u(., eta)` for `eta` in `P_m`, all on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    param_nodes: ParamNodeSet,
    snapshots: Vec<GridFunction>,
}

impl SnapshotSet {
    pub fn new(param_nodes: ParamNodeSet, snapshots: Vec<GridFunction>) -> Result<Self> {
        check_functions(&param_nodes, &snapshots, "snapshot")?;
        Ok(Self { param_nodes, snapshots })
    }

    pub fn param_nodes(&self) -> &ParamNodeSet {
        &self.param_nodes
    }

    pub fn snapshots(&self) -> &[GridFunction] {
        &self.snapshots
    }

    pub fn domain(&self) -> &Domain {
        self.snapshots[0].domain()
    }

    /// Every snapshot multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            param_nodes: self.param_nodes.clone(),
            snapshots: self.snapshots.iter().map(|s| s.scale(alpha)).collect(),
        }
    }
}

/// Training parameters `P_T` and the exact solutions there.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    params: ParamNodeSet,
    targets: Vec<GridFunction>,
}

impl TrainingSet {
    pub fn new(params: ParamNodeSet, targets: Vec<GridFunction>) -> Result<Self> {
        check_functions(&params, &targets, "target")?;
        Ok(Self { params, targets })
    }

    pub fn params(&self) -> &ParamNodeSet {
        &self.params
    }

    pub fn targets(&self) -> &[GridFunction] {
        &self.targets
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            params: self.params.clone(),
            targets: self.targets.iter().map(|s| s.scale(alpha)).collect(),
        }
    }
}

fn check_functions(nodes: &ParamNodeSet, fs: &[GridFunction], what: &str) -> Result<()> {
    if fs.len() != nodes.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} {what}s for {} parameters",
            fs.len(),
            nodes.len()
        )));
    }
    let dom = fs[0].domain();
    if fs.iter().any(|f| f.domain() != dom || f.codomain_dim() != 1) {
        return Err(Error::ShapeMismatch(format!("{what}s must be scalar on one grid")));
    }
    Ok(())
}

/// Transform representation.
#[derive(Clone, Debug, PartialEq)]
pub enum Transform {
    /// Transport fields, one per resolution level; the curves of all levels
    /// are summed as displacements.
    HighRes(Vec<TransportField>),
    LowRes(LowResTransform),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ObjectiveMode {
    #[default]
    Sum,
    Sup,
}

/// Snapshots plus a trainable transform.
#[derive(Clone, Debug)]
pub struct TsiModel {
    snapshots: SnapshotSet,
    transform: Transform,
    solve: SolveSettings,
    objective_mode: ObjectiveMode,
}

impl TsiModel {
    pub fn new(
        snapshots: SnapshotSet,
        transform: Transform,
        solve: SolveSettings,
        objective_mode: ObjectiveMode,
    ) -> Result<Self> {
        solve.validate()?;
        let d = snapshots.domain().dim();
        match &transform {
            Transform::HighRes(levels) => {
                let first = levels
                    .first()
                    .ok_or_else(|| Error::InvalidSettings("at least one field level".into()))?;
                for f in levels {
                    if f.param_nodes() != first.param_nodes() || f.dim() != d {
                        return Err(Error::ShapeMismatch(
                            "field levels must share parameter nodes and dimension".into(),
                        ));
                    }
                }
            }
            Transform::LowRes(t) => {
                if t.param_nodes() != snapshots.param_nodes() || t.dim() != d {
                    return Err(Error::ShapeMismatch(
                        "low-resolution transform must use the snapshot nodes".into(),
                    ));
                }
            }
        }
        Ok(Self { snapshots, transform, solve, objective_mode })
    }

    pub fn snapshots(&self) -> &SnapshotSet {
        &self.snapshots
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn solve_settings(&self) -> &SolveSettings {
        &self.solve
    }

    pub fn objective_mode(&self) -> ObjectiveMode {
        self.objective_mode
    }

    pub fn domain(&self) -> &Domain {
        self.snapshots.domain()
    }

    /// Same model with another transform.
    pub fn with_transform(&self, transform: Transform) -> Result<Self> {
        Self::new(self.snapshots.clone(), transform, self.solve.clone(), self.objective_mode)
    }

    pub fn with_snapshots(&self, snapshots: SnapshotSet) -> Result<Self> {
        Self::new(snapshots, self.transform.clone(), self.solve.clone(), self.objective_mode)
    }

    pub fn with_objective_mode(&self, mode: ObjectiveMode) -> Self {
        Self { objective_mode: mode, ..self.clone() }
    }

    pub fn fields(&self) -> Option<&[TransportField]> {
        match &self.transform {
            Transform::HighRes(f) => Some(f),
            Transform::LowRes(_) => None,
        }
    }

    pub(crate) fn plan(&self, mu: f64) -> Result<Option<CurvePlan>> {
        match &self.transform {
            Transform::HighRes(levels) => {
                Ok(Some(CurvePlan::new(levels[0].param_nodes(), mu, &self.solve)?))
            }
            Transform::LowRes(_) => Ok(None),
        }
    }

    /// Transformed coordinates of one point for every snapshot node,
    /// written to `out[m * d + k]`.
    pub(crate) fn transform_point(
        &self,
        plan: Option<&CurvePlan>,
        mu: f64,
        x: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let d = x.len();
        let etas = self.snapshots.param_nodes.nodes();
        match (&self.transform, plan) {
            (Transform::HighRes(levels), Some(plan)) => {
                for (m, _) in etas.iter().enumerate() {
                    out[m * d..(m + 1) * d].copy_from_slice(x);
                }
                let mut y = [0.0; 2];
                let basis = plan.final_basis();
                for field in levels {
                    let a = plan.solve_point(field, x, None)?;
                    for (m, &eta) in etas.iter().enumerate() {
                        basis.eval_point(&a, d, eta, &mut y[..d]);
                        for k in 0..d {
                            out[m * d + k] += y[k] - x[k];
                        }
                    }
                }
            }
            (Transform::LowRes(t), _) => {
                for m in 0..etas.len() {
                    out[m * d..(m + 1) * d].copy_from_slice(&t.lowres_eval(m, mu, x)?);
                }
            }
            (Transform::HighRes(_), None) => unreachable!("high-resolution model without plan"),
        }
        Ok(())
    }
}

/// Transformed snapshot-grid nodes, one batch (`[p * d + k]`) per snapshot
/// node, before clamping.
pub fn transform_points(model: &TsiModel, mu: f64, x_batch: &[f64]) -> Result<Vec<Vec<f64>>> {
    let d = model.domain().dim();
    if !x_batch.len().is_multiple_of(d) {
        return Err(Error::ShapeMismatch("point batch length".into()));
    }
    let m = model.snapshots.param_nodes.len();
    let plan = model.plan(mu)?;
    let per_point = par::try_map_indexed(x_batch.len() / d, |p| {
        let mut out = vec![0.0; m * d];
        model.transform_point(plan.as_ref(), mu, &x_batch[p * d..(p + 1) * d], &mut out)?;
        Ok(out)
    })?;
    Ok((0..m)
        .map(|e| per_point.iter().flat_map(|o| o[e * d..(e + 1) * d].iter().copied()).collect())
        .collect())
}

/// Points `X(eta; mu, x)` of a high-resolution transform for arbitrary
/// `eta`, one batch (`[p * d + k]`) per entry of `etas`.
pub fn sample_curves(model: &TsiModel, mu: f64, etas: &[f64], x_batch: &[f64]) -> Result<Vec<Vec<f64>>> {
    let levels = model
        .fields()
        .ok_or_else(|| Error::Unsupported("curves of a low-resolution transform".into()))?;
    let plan = model.plan(mu)?.expect("high-resolution model has a plan");
    let mut out: Vec<Vec<f64>> = etas.iter().map(|_| x_batch.to_vec()).collect();
    for field in levels {
        let curve = solve_with_plan(&plan, field, x_batch)?;
        for (o, &eta) in out.iter_mut().zip(etas) {
            for ((v, y), x) in o.iter_mut().zip(curve.eval(eta)).zip(x_batch) {
                *v += y - x;
            }
        }
    }
    Ok(out)
}

/// The reconstruction `u_m(., mu)` at every snapshot-grid node.
pub fn reconstruct(model: &TsiModel, mu: f64) -> Result<GridFunction> {
    let dom = model.domain().clone();
    let d = dom.dim();
    let ell = lagrange_weights(&model.snapshots.param_nodes, mu);
    let plan = model.plan(mu)?;
    let snaps = &model.snapshots.snapshots;
    let values = par::try_map_indexed(dom.node_count(), |p| {
        let x = dom.node_coord(p);
        let mut y = vec![0.0; snaps.len() * d];
        model.transform_point(plan.as_ref(), mu, &x, &mut y)?;
        let mut acc = 0.0;
        for (m, (s, l)) in snaps.iter().zip(&ell).enumerate() {
            let st = dom.stencil_unchecked(&y[m * d..(m + 1) * d]);
            acc += l * s.eval_scalar_stencil(&st);
        }
        Ok(acc)
    })?;
    GridFunction::scalar(dom, values).map_err(|e| match e {
        Error::NonFinite(s) => Error::Numerical { stage: "reconstruction", detail: s },
        other => other,
    })
}

/// Reconstruction from explicitly given transformed coordinates, one batch
/// (`[p * d + k]`, snapshot-grid nodes) per snapshot node.
pub fn reconstruct_transformed(snapshots: &SnapshotSet, mu: f64, transformed: &[Vec<f64>]) -> Result<GridFunction> {
    let dom = snapshots.domain();
    let d = dom.dim();
    if transformed.len() != snapshots.snapshots.len()
        || transformed.iter().any(|t| t.len() != dom.node_count() * d)
    {
        return Err(Error::ShapeMismatch("one transformed batch per snapshot".into()));
    }
    if transformed.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("transformed coordinates".into()));
    }
    let ell = lagrange_weights(&snapshots.param_nodes, mu);
    let values = (0..dom.node_count())
        .map(|p| {
            snapshots
                .snapshots
                .iter()
                .zip(&ell)
                .zip(transformed)
                .map(|((s, l), t)| l * s.eval_scalar_stencil(&dom.stencil_unchecked(&t[p * d..(p + 1) * d])))
                .sum()
        })
        .collect();
    GridFunction::scalar(dom.clone(), values)
}

/// Per-parameter L1 errors in the order of `P_T`.
pub fn training_errors(model: &TsiModel, training: &TrainingSet) -> Result<Vec<f64>> {
    if training.targets[0].domain() != model.domain() {
        return Err(Error::ShapeMismatch("targets and snapshots live on different grids".into()));
    }
    training
        .params
        .nodes()
        .iter()
        .zip(&training.targets)
        .map(|(&mu, target)| Ok(target.sub(&reconstruct(model, mu)?)?.l1_norm()))
        .collect()
}

/// Aggregates per-parameter errors in increasing parameter order.
pub(crate) fn aggregate(mode: ObjectiveMode, params: &ParamNodeSet, errors: &[f64]) -> f64 {
    let order = params.sorted_order();
    match mode {
        ObjectiveMode::Sum => order.iter().map(|&i| errors[i]).sum(),
        ObjectiveMode::Sup => order.iter().map(|&i| errors[i]).fold(0.0, f64::max),
    }
}

/// Training objective: summed or worst-case L1 reconstruction error.
pub fn objective(model: &TsiModel, training: &TrainingSet) -> Result<f64> {
    let errors = training_errors(model, training)?;
    Ok(aggregate(model.objective_mode, &training.params, &errors))
}
