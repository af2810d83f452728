mod common;

use proptest::prelude::*;
use tsi_core::pspace::{lagrange_weights, lebesgue_constant};
use tsi_core::{Domain, GridFunction, ParamNodeSet, TransportField};

fn grid_1d() -> impl Strategy<Value = GridFunction> {
    (1usize..24).prop_flat_map(|cells| {
        proptest::collection::vec(-5.0f64..5.0, cells + 1).prop_map(move |v| {
            GridFunction::scalar(Domain::interval(-1.5, 1.5, cells).unwrap(), v).unwrap()
        })
    })
}

fn grid_2d() -> impl Strategy<Value = GridFunction> {
    (1usize..8, 1usize..8).prop_flat_map(|(cx, cy)| {
        proptest::collection::vec(-5.0f64..5.0, (cx + 1) * (cy + 1)).prop_map(move |v| {
            GridFunction::scalar(Domain::rectangle([-1.0, 0.0], [1.0, 0.5], [cx, cy]).unwrap(), v).unwrap()
        })
    })
}

fn any_grid() -> impl Strategy<Value = GridFunction> {
    prop_oneof![grid_1d(), grid_2d()]
}

fn distinct_nodes() -> impl Strategy<Value = Vec<f64>> {
    (proptest::collection::vec(0.05f64..0.6, 1..6), -2.0f64..2.0)
        .prop_map(|(gaps, start)| gaps.iter().scan(start, |s, g| { *s += g; Some(*s) }).collect())
}

proptest! {
    #[test]
    fn eval_is_exact_at_nodes(f in any_grid()) {
        let dom = f.domain().clone();
        for n in 0..dom.node_count() {
            prop_assert_eq!(f.eval(&dom.node_coord(n)).unwrap()[0], f.values()[n]);
        }
    }

    #[test]
    fn eval_respects_clamping(f in any_grid(), x in -4.0f64..4.0, y in -4.0f64..4.0) {
        let dom = f.domain().clone();
        let pt: Vec<f64> = [x, y][..dom.dim()].to_vec();
        prop_assert_eq!(f.eval(&pt).unwrap(), f.eval(&dom.clamp(&pt)).unwrap());
    }

    #[test]
    fn l1_homogeneous_and_subadditive(f in grid_1d(), alpha in -3.0f64..3.0, shift in -2.0f64..2.0) {
        let g = GridFunction::sample(|x| (3.0 * x[0]).sin() + shift, f.domain()).unwrap();
        prop_assert!((f.scale(alpha).l1_norm() - alpha.abs() * f.l1_norm()).abs() <= 1e-12 * (1.0 + f.l1_norm()));
        prop_assert!(f.add(&g).unwrap().l1_norm() <= f.l1_norm() + g.l1_norm() + 1e-12);
    }

    #[test]
    fn bv_of_monotone_is_endpoint_difference(mut v in proptest::collection::vec(-5.0f64..5.0, 2..30)) {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let (a, b) = (v[0], v[n - 1]);
        let f = GridFunction::scalar(Domain::interval(0.0, 1.0, n - 1).unwrap(), v).unwrap();
        prop_assert!((f.bv_seminorm().unwrap() - (b - a).abs()).abs() <= 1e-12 * (1.0 + (b - a).abs()));
    }

    #[test]
    fn slope_matches_central_differences(f in any_grid(), s in 0.05f64..0.95, t in 0.05f64..0.95) {
        let dom = f.domain().clone();
        // a point strictly inside a cell
        let cell = [dom.cells()[0] / 2, dom.cells().get(1).map_or(0, |c| c / 2)];
        let pt: Vec<f64> = (0..dom.dim())
            .map(|k| dom.axis_coord(k, cell[k]) + [s, t][k] * dom.spacing(k))
            .collect();
        let slope = f.eval_slope(&pt).unwrap();
        let h = 1e-6 * dom.min_spacing();
        for k in 0..dom.dim() {
            let mut a = pt.clone();
            let mut b = pt.clone();
            a[k] += h;
            b[k] -= h;
            let fd = (f.eval(&a).unwrap()[0] - f.eval(&b).unwrap()[0]) / (2.0 * h);
            prop_assert!((fd - slope[k]).abs() <= 1e-8 * (1.0 + slope[k].abs()) + 1e-6);
        }
    }

    #[test]
    fn lagrange_unit_vectors_and_partition_of_unity(nodes in distinct_nodes(), mu in -3.0f64..3.0) {
        let p = ParamNodeSet::new(nodes.clone()).unwrap();
        for (k, &eta) in nodes.iter().enumerate() {
            let w = lagrange_weights(&p, eta);
            for (j, v) in w.iter().enumerate() {
                let unit = if j == k { 1.0 } else { 0.0 };
                prop_assert!((v - unit).abs() <= 1e-14);
            }
        }
        let w = lagrange_weights(&p, mu);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn lagrange_reproduces_polynomials(nodes in distinct_nodes(), coeffs in proptest::collection::vec(-2.0f64..2.0, 6), t in 0.0f64..1.0) {
        let p = ParamNodeSet::new(nodes.clone()).unwrap();
        let (lo, hi) = p.interval();
        let mu = lo + t * (hi - lo);
        let deg = nodes.len() - 1;
        let poly = |x: f64| coeffs[..=deg].iter().rev().fold(0.0, |acc, c| acc * x + c);
        let w = lagrange_weights(&p, mu);
        let interp: f64 = w.iter().zip(&nodes).map(|(l, &e)| l * poly(e)).sum();
        prop_assert!((interp - poly(mu)).abs() <= 1e-10 * (1.0 + poly(mu).abs()) * 10.0);
    }

    #[test]
    fn lebesgue_monotone_under_widening(nodes in distinct_nodes(), grow in 0.0f64..2.0) {
        let p = ParamNodeSet::new(nodes).unwrap();
        let (lo, hi) = p.interval();
        let wide = ParamNodeSet::with_interval(p.nodes().to_vec(), (lo - grow, hi + 0.5 * grow)).unwrap();
        prop_assert!(lebesgue_constant(&wide) >= lebesgue_constant(&p) - 1e-12);
        prop_assert!(lebesgue_constant(&p) >= 1.0);
    }

    #[test]
    fn slip_projection_idempotent(f in any_grid()) {
        let dom = f.domain().clone();
        let comps = vec![(0..dom.dim()).map(|_| f.clone()).collect()];
        let field = TransportField::from_components(ParamNodeSet::new(vec![0.3]).unwrap(), comps, false).unwrap();
        let once = field.project_slip();
        prop_assert_eq!(once.project_slip(), once.clone());
        for k in 0..dom.dim() {
            for n in 0..dom.node_count() {
                if dom.on_normal_boundary(n, k) {
                    prop_assert_eq!(once.component(0, k).values()[n], 0.0);
                } else {
                    prop_assert_eq!(once.component(0, k).values()[n], f.values()[n]);
                }
            }
        }
    }

    #[test]
    fn field_eval_clamps(f in any_grid(), x in -4.0f64..4.0, y in -4.0f64..4.0) {
        let dom = f.domain().clone();
        let comps = vec![(0..dom.dim()).map(|_| f.clone()).collect()];
        let field = TransportField::from_components(ParamNodeSet::new(vec![0.3]).unwrap(), comps, true).unwrap();
        let pt: Vec<f64> = [x, y][..dom.dim()].to_vec();
        prop_assert_eq!(field.field_eval(0, &pt).unwrap(), field.field_eval(0, &dom.clamp(&pt)).unwrap());
    }

    #[test]
    fn lipschitz_bounds_difference_quotients(
        f in any_grid(),
        pts in proptest::collection::vec((-2.0f64..2.0, -1.0f64..1.0, -2.0f64..2.0, -1.0f64..1.0), 20),
    ) {
        let dom = f.domain().clone();
        let comps = vec![(0..dom.dim()).map(|k| f.scale(1.0 + k as f64)).collect()];
        let field = TransportField::from_components(ParamNodeSet::new(vec![0.3]).unwrap(), comps, false).unwrap();
        let l = field.lipschitz_estimate();
        for (a, b, c, d) in pts {
            let x: Vec<f64> = [a, b][..dom.dim()].to_vec();
            let y: Vec<f64> = [c, d][..dom.dim()].to_vec();
            let (fx, fy) = (field.field_eval(0, &x).unwrap(), field.field_eval(0, &y).unwrap());
            let num: f64 = fx.iter().zip(&fy).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            let den: f64 = x.iter().zip(&y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            prop_assert!(num <= l * den + 1e-10);
        }
    }
}
