//! Gradient descent on the transform: plain steps, Laplace-smoothed steps
//! and multilevel steps.

mod gradient;
mod poisson;

pub use gradient::{gradient, lowres_gradient, FieldGradient, Gradient};
pub use poisson::PoissonSolver;

use crate::error::{Error, Result};
use crate::pgrid::Domain;
use crate::pspace::ParamNodeSet;
use crate::transport::TransportField;
use crate::tsi::{Transform, TrainingSet, TsiModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Smoother {
    Plain,
    Laplace,
    Multilevel,
}

impl std::str::FromStr for Smoother {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Self::Plain),
            "laplace" => Ok(Self::Laplace),
            "multilevel" => Ok(Self::Multilevel),
            _ => Err(Error::InvalidSettings(format!(
                "unknown smoother {s:?} (expected plain, laplace or multilevel)"
            ))),
        }
    }
}

impl std::fmt::Display for Smoother {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Plain => "plain",
            Self::Laplace => "laplace",
            Self::Multilevel => "multilevel",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentSettings {
    pub step: f64,
    pub steps: usize,
    pub smoother: Smoother,
    /// Number of field levels; only meaningful for the multilevel smoother.
    pub levels: usize,
}

impl DescentSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.step >= 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidSettings(format!("step size {}", self.step)));
        }
        if self.levels == 0 {
            return Err(Error::InvalidSettings("at least one level".into()));
        }
        Ok(())
    }
}

/// Field grids of a dyadic hierarchy ending at `top`: level `l` of `levels`
/// has `top.cells >> (levels - 1 - l)` cells per axis.
pub fn level_domains(top: &Domain, levels: usize) -> Result<Vec<Domain>> {
    (0..levels)
        .map(|l| {
            let shift = levels - 1 - l;
            let cells: Vec<usize> = top.cells().iter().map(|&c| c >> shift).collect();
            if top.cells().iter().zip(&cells).any(|(&c, &cl)| cl == 0 || cl << shift != c) {
                return Err(Error::InvalidSettings(format!(
                    "{:?} cells cannot be halved {shift} times",
                    top.cells()
                )));
            }
            top.with_cells(cells)
        })
        .collect()
}

/// Level count reaching `top` from `base` cells per axis by halving.
pub fn level_count(top: &Domain, base: usize) -> Result<usize> {
    let c = top.cells()[0];
    if base == 0 || !c.is_multiple_of(base) || !(c / base).is_power_of_two() || top.cells().iter().any(|&k| k != c) {
        return Err(Error::InvalidSettings(format!(
            "cells {:?} are not a dyadic refinement of {base}",
            top.cells()
        )));
    }
    Ok((c / base).trailing_zeros() as usize + 1)
}

/// Zero fields on every level of the hierarchy.
pub fn zero_levels(param_nodes: &ParamNodeSet, top: &Domain, levels: usize, slip: bool) -> Result<Vec<TransportField>> {
    Ok(level_domains(top, levels)?
        .into_iter()
        .map(|d| TransportField::zeros(param_nodes.clone(), d, slip))
        .collect())
}

fn fields_of(model: &TsiModel) -> Result<&[TransportField]> {
    model
        .fields()
        .ok_or_else(|| Error::Unsupported("smoothed steps need a high-resolution transform".into()))
}

fn apply_directions(model: &TsiModel, dirs: &FieldGradient, alpha: f64) -> Result<TsiModel> {
    let fields = fields_of(model)?;
    let updated = fields
        .iter()
        .zip(&dirs.levels)
        .map(|(f, d)| f.updated(d, alpha))
        .collect::<Result<Vec<_>>>()?;
    model.with_transform(Transform::HighRes(updated))
}

/// One step along the negative raw gradient (fields or low-resolution
/// anchors). Returns the new model and the objective before the step.
pub fn plain_step(model: &TsiModel, training: &TrainingSet, settings: &DescentSettings) -> Result<(TsiModel, f64)> {
    settings.validate()?;
    match model.transform() {
        Transform::HighRes(_) => {
            let g = gradient(model, training)?;
            Ok((apply_directions(model, &g.grad, settings.step)?, g.value))
        }
        Transform::LowRes(t) => {
            let g = lowres_gradient(model, training)?;
            let t = t.updated(&g.grad, settings.step)?;
            Ok((model.with_transform(Transform::LowRes(t))?, g.value))
        }
    }
}

/// Smooths a raw gradient level by level: `d = K^{-1} g`.
pub fn smooth(grad: &FieldGradient, solvers: &[PoissonSolver]) -> Result<FieldGradient> {
    if solvers.len() != grad.levels.len() {
        return Err(Error::ShapeMismatch("one Poisson solver per field level".into()));
    }
    let levels = grad
        .levels
        .iter()
        .zip(solvers)
        .map(|(lvl, s)| {
            lvl.iter()
                .map(|slice| slice.iter().enumerate().map(|(k, g)| s.solve(k, g)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldGradient { levels })
}

/// One Laplace-smoothed step; `solvers` holds one solver per field level.
pub fn laplace_step(
    model: &TsiModel,
    training: &TrainingSet,
    settings: &DescentSettings,
    solvers: &[PoissonSolver],
) -> Result<(TsiModel, f64)> {
    settings.validate()?;
    let fields = fields_of(model)?;
    if solvers.len() != fields.len() || solvers.iter().zip(fields).any(|(s, f)| s.domain() != f.domain()) {
        return Err(Error::ShapeMismatch("Poisson solver grid does not match the field grid".into()));
    }
    let g = gradient(model, training)?;
    let d = smooth(&g.grad, solvers)?;
    Ok((apply_directions(model, &d, settings.step)?, g.value))
}

/// One simultaneous plain step on every level of a multilevel model.
pub fn multilevel_step(model: &TsiModel, training: &TrainingSet, settings: &DescentSettings) -> Result<(TsiModel, f64)> {
    settings.validate()?;
    fields_of(model)?;
    plain_step(model, training, settings)
}

/// Runs `settings.steps` steps; the trace holds the objective before each.
pub fn train(model: &TsiModel, training: &TrainingSet, settings: &DescentSettings) -> Result<(TsiModel, Vec<f64>)> {
    settings.validate()?;
    let solvers = match settings.smoother {
        Smoother::Laplace => fields_of(model)?
            .iter()
            .map(|f| PoissonSolver::new(f.domain()))
            .collect::<Result<Vec<_>>>()?,
        Smoother::Multilevel => {
            let n = fields_of(model)?.len();
            if n != settings.levels {
                return Err(Error::InvalidSettings(format!(
                    "model has {n} field levels, settings ask for {}",
                    settings.levels
                )));
            }
            Vec::new()
        }
        Smoother::Plain => Vec::new(),
    };
    let mut current = model.clone();
    let mut trace = Vec::with_capacity(settings.steps);
    for _ in 0..settings.steps {
        let (next, value) = match settings.smoother {
            Smoother::Plain => plain_step(&current, training, settings)?,
            Smoother::Laplace => laplace_step(&current, training, settings, &solvers)?,
            Smoother::Multilevel => multilevel_step(&current, training, settings)?,
        };
        trace.push(value);
        current = next;
    }
    Ok((current, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hierarchy_shapes() {
        let top = Domain::interval(-1.5, 1.5, 32).unwrap();
        assert_eq!(level_count(&top, 4).unwrap(), 4);
        let doms = level_domains(&top, 4).unwrap();
        let cells: Vec<usize> = doms.iter().map(|d| d.cells()[0]).collect();
        assert_eq!(cells, vec![4, 8, 16, 32]);
        let sq = Domain::rectangle([-1.0, -1.0], [1.0, 1.0], [64, 64]).unwrap();
        assert_eq!(level_count(&sq, 4).unwrap(), 5);
        assert!(level_count(&Domain::interval(0.0, 1.0, 24).unwrap(), 4).is_err());
    }

    #[test]
    fn smoother_names() {
        for s in [Smoother::Plain, Smoother::Laplace, Smoother::Multilevel] {
            assert_eq!(s.to_string().parse::<Smoother>().unwrap(), s);
        }
        assert!("newton".parse::<Smoother>().is_err());
    }
}
