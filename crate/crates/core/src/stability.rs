//! Sensitivity of the reconstruction to transform perturbations along the
//! convex homotopy `X_s = (1 - s) X0 + s X1`.

use crate::error::{Error, Result};
use crate::pgrid::{Domain, GridFunction};
use crate::pspace::lebesgue_constant;
use crate::tsi::{reconstruct_transformed, transform_points, SnapshotSet, TsiModel};

pub const DEFAULT_S_QUAD: usize = 16;
pub const DEFAULT_DERIV_FLOOR: f64 = 1e-8;

/// Two transforms evaluated at the nodes of a grid, laid out `[p * d + k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformPair {
    domain: Domain,
    x0: Vec<f64>,
    x1: Vec<f64>,
}

impl TransformPair {
    pub fn new(domain: Domain, x0: Vec<f64>, x1: Vec<f64>) -> Result<Self> {
        let n = domain.node_count() * domain.dim();
        if x0.len() != n || x1.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "transform batches of length {} and {}, expected {n}",
                x0.len(),
                x1.len()
            )));
        }
        if x0.iter().chain(&x1).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("transform pair".into()));
        }
        Ok(Self { domain, x0, x1 })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn x1(&self) -> &[f64] {
        &self.x1
    }

    pub fn reversed(&self) -> Self {
        Self { domain: self.domain.clone(), x0: self.x1.clone(), x1: self.x0.clone() }
    }
}

/// Jacobian determinant of a nodal map by central differences, one-sided at
/// the boundary.
fn jacobian_dets(domain: &Domain, x: &[f64]) -> Vec<f64> {
    let d = domain.dim();
    let nodes_x = domain.nodes_per_axis(0);
    let deriv = |node: usize, axis: usize, comp: usize| -> f64 {
        let mi = domain.node_multi_index(node);
        let last = domain.cells()[axis];
        let step = if axis == 0 { 1 } else { nodes_x };
        let h = domain.spacing(axis);
        let (lo, hi, span) = if mi[axis] == 0 {
            (node, node + step, h)
        } else if mi[axis] == last {
            (node - step, node, h)
        } else {
            (node - step, node + step, 2.0 * h)
        };
        (x[hi * d + comp] - x[lo * d + comp]) / span
    };
    (0..domain.node_count())
        .map(|n| {
            if d == 1 {
                deriv(n, 0, 0)
            } else {
                deriv(n, 0, 0) * deriv(n, 1, 1) - deriv(n, 1, 0) * deriv(n, 0, 1)
            }
        })
        .collect()
}

/// Midpoint-rule mean over `s` of `max_x |X1 - X0| / |det DX_s|`; any
/// determinant below `deriv_floor` in magnitude makes the factor infinite.
pub fn stability_factor(pair: &TransformPair, s_quad: usize, deriv_floor: f64) -> Result<f64> {
    if s_quad == 0 {
        return Err(Error::InvalidSettings("s_quad must be at least 1".into()));
    }
    if !(deriv_floor > 0.0) {
        return Err(Error::InvalidSettings("deriv_floor must be positive".into()));
    }
    let d = pair.domain.dim();
    let speed: Vec<f64> = pair
        .x0
        .chunks(d)
        .zip(pair.x1.chunks(d))
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (v - u) * (v - u)).sum::<f64>().sqrt())
        .collect();
    if speed.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for q in 0..s_quad {
        let s = (q as f64 + 0.5) / s_quad as f64;
        let xs: Vec<f64> = pair.x0.iter().zip(&pair.x1).map(|(a, b)| (1.0 - s) * a + s * b).collect();
        let mut worst: f64 = 0.0;
        for (det, v) in jacobian_dets(&pair.domain, &xs).into_iter().zip(&speed) {
            if !(det.abs() >= deriv_floor) {
                return Ok(f64::INFINITY);
            }
            worst = worst.max(v / det.abs());
        }
        total += worst;
    }
    Ok(total / s_quad as f64)
}

/// Outcome of a perturbation-bound check.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub mu: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub lebesgue: f64,
    /// Stability factor per snapshot node.
    pub factors: Vec<f64>,
    /// Total variation per snapshot.
    pub variations: Vec<f64>,
    /// L1 errors of the two reconstructions against the reference.
    pub target_errors: (f64, f64),
}

impl std::fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "mu = {}", self.mu)?;
        writeln!(f, "lhs = {:.6e}", self.lhs)?;
        writeln!(f, "rhs = {:.6e}", self.rhs)?;
        writeln!(f, "holds = {}", self.holds)?;
        writeln!(f, "lebesgue = {:.6e}", self.lebesgue)?;
        for (i, (s, v)) in self.factors.iter().zip(&self.variations).enumerate() {
            writeln!(f, "snapshot {i}: factor = {s:.6e}, variation = {v:.6e}")?;
        }
        write!(
            f,
            "reference errors = {:.6e}, {:.6e}",
            self.target_errors.0, self.target_errors.1
        )
    }
}

/// Relative slack applied when comparing the two sides.
pub const BOUND_TOLERANCE: f64 = 1e-8;

/// Bound check for explicit transform pairs, one per snapshot node.
pub fn check_stability_bound_pairs(
    snapshots: &SnapshotSet,
    mu: f64,
    pairs: &[TransformPair],
    reference: &GridFunction,
    s_quad: usize,
    deriv_floor: f64,
) -> Result<StabilityReport> {
    if pairs.len() != snapshots.param_nodes().len() {
        return Err(Error::ShapeMismatch("one transform pair per snapshot".into()));
    }
    if pairs.iter().any(|p| p.domain() != snapshots.domain()) || reference.domain() != snapshots.domain() {
        return Err(Error::ShapeMismatch("transform pairs must live on the snapshot grid".into()));
    }
    let t0: Vec<Vec<f64>> = pairs.iter().map(|p| p.x0.clone()).collect();
    let t1: Vec<Vec<f64>> = pairs.iter().map(|p| p.x1.clone()).collect();
    let r0 = reconstruct_transformed(snapshots, mu, &t0)?;
    let r1 = reconstruct_transformed(snapshots, mu, &t1)?;
    let lhs = r0.sub(&r1)?.l1_norm();
    let lebesgue = lebesgue_constant(&snapshots.param_nodes().widened(&[mu]));
    let factors = pairs
        .iter()
        .map(|p| stability_factor(p, s_quad, deriv_floor))
        .collect::<Result<Vec<_>>>()?;
    let variations = snapshots
        .snapshots()
        .iter()
        .map(|s| s.bv_seminorm())
        .collect::<Result<Vec<_>>>()?;
    let worst = factors
        .iter()
        .zip(&variations)
        .map(|(s, v)| if *v == 0.0 { 0.0 } else { s * v })
        .fold(0.0, f64::max);
    let rhs = lebesgue * worst;
    Ok(StabilityReport {
        mu,
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + BOUND_TOLERANCE),
        lebesgue,
        factors,
        variations,
        target_errors: (reference.sub(&r0)?.l1_norm(), reference.sub(&r1)?.l1_norm()),
    })
}

/// Bound check for two models that share snapshots and differ in their
/// transforms.
pub fn check_stability_bound(
    model0: &TsiModel,
    model1: &TsiModel,
    mu: f64,
    reference: &GridFunction,
    s_quad: usize,
) -> Result<StabilityReport> {
    if model0.snapshots() != model1.snapshots() {
        return Err(Error::ShapeMismatch("models must share their snapshots".into()));
    }
    let dom = model0.domain().clone();
    let nodes = dom.node_coords();
    let t0 = transform_points(model0, mu, &nodes)?;
    let t1 = transform_points(model1, mu, &nodes)?;
    let pairs = t0
        .into_iter()
        .zip(t1)
        .map(|(a, b)| TransformPair::new(dom.clone(), a, b))
        .collect::<Result<Vec<_>>>()?;
    check_stability_bound_pairs(model0.snapshots(), mu, &pairs, reference, s_quad, DEFAULT_DERIV_FLOOR)
}
