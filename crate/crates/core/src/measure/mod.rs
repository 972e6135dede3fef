//! State spaces, test functions, finite-support measures and the bounded
//! Lipschitz distance between them.

pub mod bl;
pub mod discrete;
pub mod function;
pub mod space;
pub mod transport;

pub use bl::{bl_distance, bl_distance_with, BlOptions, BlOutcome, Resolution};
pub use discrete::{empirical_measure, DiscreteMeasure, WEIGHT_TOL};
pub use function::{grid_points, standard_test_suite, suite_function, FunctionKind, Phase, PointSet, TestFunction};
pub use space::{Point, PointKey, StateSpace, MAX_DIM};

#[cfg(test)]
mod props {
    use proptest::prelude::*;

    use super::*;

    fn probability(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
            let s: f64 = w.iter().sum();
            let mut v: Vec<f64> = w.iter().map(|x| x / s).collect();
            let head: f64 = v[..v.len() - 1].iter().sum();
            let last = v.len() - 1;
            v[last] = 1.0 - head;
            v
        })
    }

    fn measure_on(atoms: Vec<f64>, weights: Vec<f64>) -> DiscreteMeasure {
        let pts = atoms.into_iter().map(Point::scalar).collect();
        DiscreteMeasure::new(StateSpace::RealLine, pts, weights).unwrap()
    }

    fn real_measure() -> impl Strategy<Value = DiscreteMeasure> {
        (1usize..7).prop_flat_map(|n| {
            (prop::collection::vec(-3.0f64..3.0, n), probability(n)).prop_map(|(a, w)| measure_on(a, w))
        })
    }

    proptest! {
        #[test]
        fn integrate_is_linear_in_f(m in real_measure(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let s = StateSpace::RealLine;
            let f = TestFunction::clamp_linear(&s, -1.0, 1.0).unwrap();
            let g = TestFunction::trig(&s, 2, Phase::Sin);
            let lhs: f64 = m.atoms().iter().zip(m.weights())
                .map(|(p, w)| w * (a * f.eval_raw(p) + b * g.eval_raw(p))).sum();
            let rhs = a * m.integrate(&f).unwrap() + b * m.integrate(&g).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }

        #[test]
        fn integrate_is_linear_in_m(p in real_measure(), q in real_measure(), t in 0.0f64..1.0) {
            let f = TestFunction::trig(&StateSpace::RealLine, 1, Phase::Cos);
            let mix = p.mix(&q, t).unwrap();
            let lhs = mix.integrate(&f).unwrap();
            let rhs = t * p.integrate(&f).unwrap() + (1.0 - t) * q.integrate(&f).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }

        #[test]
        fn integral_bounded_by_sup_norm(m in real_measure()) {
            for f in standard_test_suite(&StateSpace::RealLine) {
                prop_assert!(m.integrate(&f).unwrap().abs() <= f.sup_norm + 1e-12);
            }
        }

        #[test]
        fn bl_triangle_and_symmetry(p in real_measure(), q in real_measure(), r in real_measure()) {
            let pq = bl_distance(&p, &q).unwrap();
            let qp = bl_distance(&q, &p).unwrap();
            let qr = bl_distance(&q, &r).unwrap();
            let pr = bl_distance(&p, &r).unwrap();
            prop_assert!((pq - qp).abs() <= 1e-10);
            prop_assert!(pr <= pq + qr + 1e-10);
            prop_assert!((0.0..=2.0).contains(&pq));
        }

        #[test]
        fn bl_dominates_every_admissible_function(p in real_measure(), q in real_measure()) {
            let d = bl_distance(&p, &q).unwrap();
            let s = StateSpace::RealLine;
            let probes = [
                TestFunction::clamp_linear(&s, -1.0, 1.0).unwrap(),
                TestFunction::piecewise(&s, vec![-1.0, 0.0, 1.0], vec![-0.5, 0.5, -0.5]).unwrap(),
            ];
            for f in &probes {
                let gap = (p.integrate(f).unwrap() - q.integrate(f).unwrap()).abs();
                prop_assert!(gap <= d + 1e-12);
            }
        }

        #[test]
        fn bl_scalar_equals_truncated_transport(p in real_measure(), q in real_measure()) {
            let dp = bl_distance(&p, &q).unwrap();
            let ot = transport::transport_cost(p.weights(), q.weights(), |i, j| {
                p.atoms()[i].l1(&q.atoms()[j]).min(2.0)
            });
            prop_assert!((dp - ot).abs() <= 1e-10, "dp {} ot {}", dp, ot);
        }

        #[test]
        fn bl_zero_iff_equal_on_finite_space(w in probability(3), v in probability(3)) {
            let s = StateSpace::finite(vec![-1.0, 0.0, 1.0]).unwrap();
            let p = DiscreteMeasure::on_alphabet(&s, w.clone()).unwrap();
            let q = DiscreteMeasure::on_alphabet(&s, v.clone()).unwrap();
            let d = bl_distance(&p, &q).unwrap();
            let differ = w.iter().zip(&v).any(|(a, b)| (a - b).abs() > 1e-9);
            prop_assert_eq!(d > 1e-12, differ);
            prop_assert_eq!(bl_distance(&p, &p).unwrap(), 0.0);
        }
    }

    /// Median BL distance between an empirical sample and its source decreases
    /// across sample sizes 10², 10³, 10⁴.
    #[test]
    fn empirical_distance_shrinks_with_sample_size() {
        use rand::Rng;
        let s = StateSpace::finite(vec![0.0, 1.0, 2.0]).unwrap();
        let m = DiscreteMeasure::on_alphabet(&s, vec![0.2, 0.5, 0.3]).unwrap();
        let mut medians = Vec::new();
        for (k, n) in [100usize, 1000, 10_000].into_iter().enumerate() {
            let mut ds: Vec<f64> = (0..41)
                .map(|rep| {
                    let mut rng = crate::seed::rng_from_seed(crate::seed::derive_seed(k as u64, rep, 0));
                    let pts: Vec<Point> = (0..n)
                        .map(|_| {
                            let u: f64 = rng.random();
                            Point::scalar(if u < 0.2 { 0.0 } else if u < 0.7 { 1.0 } else { 2.0 })
                        })
                        .collect();
                    bl_distance(&empirical_measure(&s, &pts).unwrap(), &m).unwrap()
                })
                .collect();
            ds.sort_by(f64::total_cmp);
            medians.push(ds[20]);
        }
        assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
    }
}
