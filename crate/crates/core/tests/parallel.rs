mod common;

use common::*;
use tsi_core::optim::{gradient, train, zero_levels, DescentSettings, Smoother};
use tsi_core::par;
use tsi_core::tsi::{reconstruct, transform_points};
use tsi_core::{Domain, SnapshotSet};

#[test]
fn parallel_and_sequential_paths_agree_bitwise() {
    let dom = Domain::rectangle([-1.0, -1.0], [1.0, 1.0], [24, 24]).unwrap();
    let pm = p(&[0.4, 0.6]);
    let snaps = SnapshotSet::new(pm.clone(), vec![disc(0.4, &dom), disc(0.6, &dom)]).unwrap();
    let mut r = rng(41);
    let m = model(snaps, vec![random_field(&mut r, &pm, &dom, 0.1)], 4, vec![0.5, 1.0]);
    let t = training(&[0.5, 0.45], &dom, disc);

    let run = || {
        let x = dom.node_coords();
        let moved = transform_points(&m, 0.5, &x).unwrap();
        let recon = reconstruct(&m, 0.5).unwrap();
        let g = gradient(&m, &t).unwrap();
        (moved, recon, g.value, g.grad)
    };
    let a = run();
    let b = par::sequential(run);
    assert_eq!(a, b);
}

#[test]
fn training_is_thread_count_independent() {
    let dom = Domain::interval(-1.5, 1.5, 64).unwrap();
    let pm = p(&[-0.2, 0.2]);
    let snaps = SnapshotSet::new(pm.clone(), vec![step(-0.2, &dom), step(0.2, &dom)]).unwrap();
    let m = model(snaps, zero_levels(&pm, &dom, 3, true).unwrap(), 5, vec![]);
    let t = training(&[0.0, 0.1], &dom, step);
    let s = DescentSettings { step: 0.3, steps: 5, smoother: Smoother::Multilevel, levels: 3 };
    let (ma, ta) = train(&m, &t, &s).unwrap();
    let (mb, tb) = par::sequential(|| train(&m, &t, &s).unwrap());
    assert_eq!(ta, tb);
    assert_eq!(ma.transform(), mb.transform());
}
