mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use tsi_core::curves::{apply_f, contraction_bound, solve_curve, NewtonBasis, NewtonCurve};
use tsi_core::{Domain, ParamNodeSet, SolveSettings, TransportField};

/// Smooth random field `amp * sin(freq * x + phase_eta)` per component.
fn smooth_field(rng: &mut impl Rng, nodes: &ParamNodeSet, dom: &Domain, amp: f64) -> TransportField {
    let d = dom.dim();
    let coefs: Vec<Vec<(f64, f64, f64)>> = (0..nodes.len())
        .map(|_| {
            (0..d)
                .map(|_| (rng.gen_range(0.5..1.0), rng.gen_range(0.5..3.0), rng.gen_range(0.0..6.3)))
                .collect()
        })
        .collect();
    TransportField::sample(nodes.clone(), dom.clone(), false, |e, x| {
        coefs[e]
            .iter()
            .map(|&(a, f, ph)| amp * a * (f * x.iter().sum::<f64>() + ph).sin())
            .collect()
    })
    .unwrap()
}

fn sup_distance(a: &NewtonCurve, b: &NewtonCurve, xis: &[f64]) -> f64 {
    let d = a.dim();
    xis.iter()
        .map(|&xi| {
            let (va, vb) = (a.eval(xi), b.eval(xi));
            va.chunks(d)
                .zip(vb.chunks(d))
                .map(|(p, q)| p.iter().zip(q).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

fn samples(interval: (f64, f64), extra: &[f64]) -> Vec<f64> {
    let (lo, hi) = interval;
    (0..=64).map(|i| lo + (hi - lo) * i as f64 / 64.0).chain(extra.iter().copied()).collect()
}

fn random_curve(rng: &mut impl Rng, basis: &NewtonBasis, x: &[f64], d: usize, amp: f64) -> NewtonCurve {
    let n = basis.len();
    let stride = (n + 1) * d;
    let mut coeffs = vec![0.0; x.len() / d * stride];
    for (p, chunk) in coeffs.chunks_mut(stride).enumerate() {
        chunk[..d].copy_from_slice(&x[p * d..(p + 1) * d]);
        for c in &mut chunk[d..] {
            *c = rng.gen_range(-amp..amp);
        }
    }
    NewtonCurve::from_coeffs(basis.clone(), d, coeffs).unwrap()
}

#[test]
fn empirical_contraction_and_convergence() {
    let mut r = rng(21);
    let mut checked = 0;
    for case in 0..20 {
        let dim2 = case % 4 == 3;
        let dom = if dim2 {
            Domain::rectangle([-2.0, -2.0], [2.0, 2.0], [24, 24]).unwrap()
        } else {
            Domain::interval(-2.0, 2.0, 64).unwrap()
        };
        let d = dom.dim();
        let nodes = ParamNodeSet::with_interval(vec![0.6, 0.7], (0.6, 0.96)).unwrap();
        let mu = 0.86;
        let raw = smooth_field(&mut rng(1000 + case), &nodes, &dom, 1.0);
        let unit = contraction_bound(&nodes, &raw);
        let target = r.gen_range(0.1..0.6);
        let field = smooth_field(&mut rng(1000 + case), &nodes, &dom, target / unit);
        let bound = contraction_bound(&nodes, &field);
        assert!(bound < 1.0);
        let basis = NewtonBasis::build(mu, nodes.nodes()).unwrap();
        let x: Vec<f64> = (0..8 * d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let xis = samples(nodes.interval(), &[0.6, 0.7, mu]);
        for _ in 0..5 {
            let a = random_curve(&mut r, &basis, &x, d, 0.5);
            let b = random_curve(&mut r, &basis, &x, d, 0.5);
            let fa = apply_f(&basis, &field, &a).unwrap();
            let fb = apply_f(&basis, &field, &b).unwrap();
            let ratio = sup_distance(&fa, &fb, &xis) / sup_distance(&a, &b, &xis);
            assert!(ratio <= bound + 1e-10, "case {case}: ratio {ratio} > bound {bound}");
        }
        let settings = SolveSettings::new(50, vec![]).unwrap();
        let sol = solve_curve(&nodes, mu, &field, &x, &settings).unwrap();
        let again = apply_f(&basis, &field, &sol).unwrap();
        let residual = sup_distance(&sol, &again, &xis);
        assert!(residual <= 1e-10, "case {case}: residual {residual}");
        checked += 1;
    }
    assert_eq!(checked, 20);
}

/// Root of `X = x + tau * lambda * X` by bisection.
fn bisect(x: f64, tau_lambda: f64) -> f64 {
    let g = |y: f64| y - x - tau_lambda * y;
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (g(lo) < 0.0) == (g(mid) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn implicit_euler_equivalence() {
    let mut r = rng(22);
    let dom = Domain::interval(-2.0, 2.0, 16).unwrap();
    for _ in 0..100 {
        let mu: f64 = r.gen_range(-1.0..1.0);
        let eta = mu + r.gen_range(0.05..0.5) * if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        let tau = eta - mu;
        let lambda = r.gen_range(-0.5..0.5) / tau.abs();
        let x: f64 = r.gen_range(-0.5..0.5);
        let nodes = p(&[eta]);
        let field = TransportField::sample(nodes.clone(), dom.clone(), false, |_, y| vec![lambda * y[0]]).unwrap();
        let settings = SolveSettings::new(60, vec![]).unwrap();
        let curve = solve_curve(&nodes, mu, &field, &[x], &settings).unwrap();
        let got = curve.eval(eta)[0];
        let oracle = bisect(x, tau * lambda);
        assert!((got - oracle).abs() <= 1e-12, "x {x}, tau*lambda {}: {got} vs {oracle}", tau * lambda);
        assert!((oracle - x / (1.0 - tau * lambda)).abs() <= 1e-12);
    }
}

#[test]
fn ideal_collision_field_reproduces_jump_trajectory() {
    // single node at eta, field d/deta of the ideal map, here a pure
    // translation speed of the left jump: X(eta) = x + (eta - mu) * c
    let dom = Domain::interval(-1.0, 1.0, 64).unwrap();
    let nodes = p(&[0.8]);
    let c = -1.0;
    let field = TransportField::sample(nodes.clone(), dom.clone(), false, |_, _| vec![c]).unwrap();
    let settings = SolveSettings::new(5, vec![0.7, 1.0]).unwrap();
    let x = [-0.5];
    let curve = solve_curve(&nodes, 0.5, &field, &x, &settings).unwrap();
    assert!((curve.eval(0.8)[0] - (-0.5 + 0.3 * c)).abs() < 1e-14);
}

#[test]
fn semigroup_for_constant_fields() {
    let dom = Domain::interval(-5.0, 5.0, 8).unwrap();
    let nodes = p(&[0.6, 0.7]);
    let field = TransportField::sample(nodes.clone(), dom, false, |e, _| vec![0.2 + 0.1 * e as f64]).unwrap();
    let settings = SolveSettings::new(2, vec![]).unwrap();
    let x = [0.3];
    let first = solve_curve(&nodes, 0.9, &field, &x, &settings).unwrap();
    let nu = 0.65;
    let moved = first.eval(nu);
    let second = solve_curve(&nodes, nu, &field, &moved, &settings).unwrap();
    for eta in [0.6, 0.7] {
        assert!((first.eval(eta)[0] - second.eval(eta)[0]).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn eval_at_mu_is_bit_exact(
        mu in -1.0f64..1.0,
        gaps in proptest::collection::vec(0.05f64..0.5, 1..4),
        coeffs in proptest::collection::vec(-10.0f64..10.0, 8),
        x in -3.0f64..3.0,
    ) {
        let nodes: Vec<f64> = gaps.iter().scan(mu, |s, g| { *s += g; Some(*s) }).collect();
        let basis = NewtonBasis::build(mu, &nodes).unwrap();
        let n = nodes.len();
        let mut a = vec![x];
        a.extend_from_slice(&coeffs[..n]);
        let curve = NewtonCurve::from_coeffs(basis, 1, a).unwrap();
        prop_assert_eq!(curve.eval(mu), vec![x]);
    }

    #[test]
    fn horner_matches_explicit_sum(
        mu in -1.0f64..1.0,
        gaps in proptest::collection::vec(0.05f64..0.5, 1..4),
        coeffs in proptest::collection::vec(-3.0f64..3.0, 4),
        xi in -2.0f64..2.0,
    ) {
        let nodes: Vec<f64> = gaps.iter().scan(mu, |s, g| { *s += g; Some(*s) }).collect();
        let basis = NewtonBasis::build(mu, &nodes).unwrap();
        let n = nodes.len();
        let a = coeffs[..=n].to_vec();
        let explicit: f64 = (0..=n).map(|i| a[i] * basis.omega(i, xi)).sum();
        let curve = NewtonCurve::from_coeffs(basis, 1, a).unwrap();
        prop_assert!((curve.eval(xi)[0] - explicit).abs() <= 1e-10 * (1.0 + explicit.abs()));
    }
}
