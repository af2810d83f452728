#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsi_core::optim::FieldGradient;
use tsi_core::{
    Domain, GridFunction, ObjectiveMode, ParamNodeSet, SnapshotSet, SolveSettings, TrainingSet,
    Transform, TransportField, TsiModel,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn p(nodes: &[f64]) -> ParamNodeSet {
    ParamNodeSet::new(nodes.to_vec()).unwrap()
}

pub fn step(mu: f64, dom: &Domain) -> GridFunction {
    GridFunction::sample(|x| if x[0] <= mu { 1.0 } else { -1.0 }, dom).unwrap()
}

/// Two opposite ramps separated by a flat zero region.
pub fn ramps(mu: f64, dom: &Domain) -> GridFunction {
    let (l, r) = (-1.5, 1.5);
    GridFunction::sample(
        |x| {
            let x = x[0];
            if x <= -(1.0 - mu) {
                (x - l) / (-(1.0 - mu) - l)
            } else if x >= 1.0 - mu {
                (x - r) / ((1.0 - mu) - r)
            } else {
                0.0
            }
        },
        dom,
    )
    .unwrap()
}

pub fn disc(mu: f64, dom: &Domain) -> GridFunction {
    GridFunction::sample(
        |x| {
            let (c, s) = ((1.5 * mu).cos(), (1.5 * mu).sin());
            let (r, q) = (c * x[0] + s * x[1], -s * x[0] + c * x[1]);
            if (r / (2.0 * mu)).powi(2) + (q / mu).powi(2) <= 1.0 {
                1.0
            } else {
                0.0
            }
        },
        dom,
    )
    .unwrap()
}

/// Random field with values of size `amp`, slip-projected.
pub fn random_field(
    rng: &mut impl Rng,
    nodes: &ParamNodeSet,
    dom: &Domain,
    amp: f64,
) -> TransportField {
    let comps = (0..nodes.len())
        .map(|_| {
            (0..dom.dim())
                .map(|_| {
                    let v = (0..dom.node_count()).map(|_| rng.gen_range(-amp..amp)).collect();
                    GridFunction::scalar(dom.clone(), v).unwrap()
                })
                .collect()
        })
        .collect();
    TransportField::from_components(nodes.clone(), comps, true).unwrap()
}

pub fn model(
    snaps: SnapshotSet,
    fields: Vec<TransportField>,
    iterations: usize,
    scalings: Vec<f64>,
) -> TsiModel {
    TsiModel::new(
        snaps,
        Transform::HighRes(fields),
        SolveSettings::new(iterations, scalings).unwrap(),
        ObjectiveMode::Sum,
    )
    .unwrap()
}

pub fn training(params: &[f64], dom: &Domain, f: impl Fn(f64, &Domain) -> GridFunction) -> TrainingSet {
    TrainingSet::new(p(params), params.iter().map(|&m| f(m, dom)).collect()).unwrap()
}

/// Flat coordinates `(level, eta, component, node)` of a gradient.
pub fn coords(g: &FieldGradient) -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::new();
    for (l, lvl) in g.levels.iter().enumerate() {
        for (e, slice) in lvl.iter().enumerate() {
            for (c, comp) in slice.iter().enumerate() {
                for n in 0..comp.len() {
                    out.push((l, e, c, n));
                }
            }
        }
    }
    out
}

/// Outcome of a finite-difference comparison at one coordinate.
#[derive(Debug)]
pub enum FdCheck {
    Agree,
    Kink,
    Mismatch { fd: f64, grad: f64 },
}

/// Central differences of `f` against `grad`; a coordinate is treated as a
/// kink when the one-sided quotients disagree.
pub fn fd_check(f: impl Fn(f64) -> f64, grad: f64, h: f64, rel: f64) -> FdCheck {
    let (fp, f0, fm) = (f(h), f(0.0), f(-h));
    let fwd = (fp - f0) / h;
    let bwd = (f0 - fm) / h;
    let scale = fwd.abs().max(bwd.abs());
    if (fwd - bwd).abs() > 1e-3 * scale + 1e-7 {
        return FdCheck::Kink;
    }
    let fd = (fp - fm) / (2.0 * h);
    if (fd - grad).abs() <= rel * fd.abs().max(grad.abs()) + 1e-8 {
        FdCheck::Agree
    } else {
        FdCheck::Mismatch { fd, grad }
    }
}

/// Picks up to `nonzero` coordinates with a nonzero derivative and fills up
/// to `nonzero + zero` with vanishing ones.
pub fn pick_coords(
    rng: &mut impl Rng,
    g: &FieldGradient,
    nonzero: usize,
    zero: usize,
) -> Vec<(usize, usize, usize, usize)> {
    use rand::seq::SliceRandom;
    let all = coords(g);
    let (mut nz, mut z): (Vec<_>, Vec<_>) =
        all.into_iter().partition(|&(l, e, c, n)| g.levels[l][e][c][n] != 0.0);
    nz.shuffle(rng);
    z.shuffle(rng);
    nz.truncate(nonzero);
    z.truncate(zero + nonzero - nz.len());
    nz.extend(z);
    nz
}

/// `model` with one field nodal value shifted by `t`.
pub fn nudged(model: &TsiModel, at: (usize, usize, usize, usize), t: f64) -> TsiModel {
    let (l, e, c, n) = at;
    let fields = model.fields().unwrap();
    let mut out = fields.to_vec();
    let mut dir: Vec<Vec<Vec<f64>>> = fields[l].nodal_values();
    for v in dir.iter_mut().flatten().flatten() {
        *v = 0.0;
    }
    dir[e][c][n] = -1.0;
    out[l] = fields[l].updated(&dir, t).unwrap();
    model.with_transform(Transform::HighRes(out)).unwrap()
}

/// Runs the finite-difference comparison on picked coordinates; returns
/// (agreed with nonzero derivative, agreed in total, kinks) and panics on
/// any mismatch.
pub fn check_field_gradient(
    model: &TsiModel,
    train: &TrainingSet,
    seed: u64,
    nonzero: usize,
    zero: usize,
) -> (usize, usize, usize) {
    let g = tsi_core::optim::gradient(model, train).unwrap();
    let mut r = rng(seed);
    let picked = pick_coords(&mut r, &g.grad, nonzero, zero);
    let (mut nonzero_ok, mut ok, mut kinks) = (0, 0, 0);
    for at in picked {
        let (l, e, c, n) = at;
        let grad = g.grad.levels[l][e][c][n];
        let f = |t: f64| tsi_core::tsi::objective(&nudged(model, at, t), train).unwrap();
        match fd_check(f, grad, 1e-6, 1e-4) {
            FdCheck::Agree => {
                ok += 1;
                nonzero_ok += usize::from(grad != 0.0);
            }
            FdCheck::Kink => kinks += 1,
            FdCheck::Mismatch { fd, grad } => panic!("coordinate {at:?}: fd {fd} vs gradient {grad}"),
        }
    }
    (nonzero_ok, ok, kinks)
}
