mod common;

use common::*;
use proptest::prelude::*;

use scalar_deform::deform::{verify_deformed_el, ClosedForm, Deformation};
use scalar_deform::expr::{evaluate_dual, parse, Expression};
use scalar_deform::geometry::{
    contract_with_spray, energy, lagrange_differential, liouville_apply, spray_apply,
    vertical_differential, ScalarField, SemiSpray,
};
use scalar_deform::theorem::{classify, DeformationClass};

fn expr_and_point(seed: u64, depth: usize) -> (Expression, scalar_deform::geometry::PhasePoint) {
    let mut r = rng(seed);
    let e = random_expr(&mut r, &names(2), depth);
    let p = random_point(&mut r, 2, -1.0, 1.0);
    (e, p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn symbolic_matches_dual(seed in any::<u64>(), var in 0usize..4) {
        let (e, p) = expr_and_point(seed, 4);
        let v = &names(2)[var];
        let b = p.binding();
        let s = e.partial(v).eval(&b).unwrap();
        let (_, d) = evaluate_dual(&e, &b, v).unwrap();
        prop_assert!((s - d).abs() <= 1e-10 * (1.0 + s.abs()), "{e}: {s} vs {d}");
    }

    #[test]
    fn symbolic_matches_central_differences(seed in any::<u64>(), var in 0usize..4) {
        let (e, p) = expr_and_point(seed, 3);
        let v = &names(2)[var];
        let b = p.binding();
        let s = e.partial(v).eval(&b).unwrap();
        let at = b.get(v).unwrap();
        let h = 1e-6;
        let fd = (e.eval(&b.clone().with(v, at + h)).unwrap()
            - e.eval(&b.clone().with(v, at - h)).unwrap()) / (2.0 * h);
        prop_assert!((s - fd).abs() <= 1e-5 * (1.0 + s.abs()), "{e}: {s} vs {fd}");
    }

    #[test]
    fn mixed_partials_commute(seed in any::<u64>(), i in 0usize..4, j in 0usize..4) {
        let (e, p) = expr_and_point(seed, 3);
        let vars = names(2);
        let b = p.binding();
        let ij = e.partial(&vars[i]).partial(&vars[j]).eval(&b).unwrap();
        let ji = e.partial(&vars[j]).partial(&vars[i]).eval(&b).unwrap();
        prop_assert!((ij - ji).abs() <= 1e-9 * (1.0 + ij.abs()));
    }

    #[test]
    fn print_parse_round_trip(seed in any::<u64>()) {
        let (e, p) = expr_and_point(seed, 4);
        let printed = e.to_string();
        let back = parse(&printed, &names(2)).unwrap();
        prop_assert_eq!(back.to_string(), printed);
        let b = p.binding();
        let (u, v) = (e.eval(&b).unwrap(), back.eval(&b).unwrap());
        prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()));
    }

    #[test]
    fn spray_contractions(seed in any::<u64>()) {
        let mut r = rng(seed);
        let vars = names(2);
        let s = SemiSpray::new((0..2).map(|_| random_expr(&mut r, &vars, 2)).collect()).unwrap();
        let l = ScalarField::new(2, random_expr(&mut r, &vars, 3)).unwrap();
        let p = random_point(&mut r, 2, -1.0, 1.0);
        let a = contract_with_spray(&s, &vertical_differential(&l)).unwrap().eval(&p).unwrap();
        let c = liouville_apply(&l).eval(&p).unwrap();
        prop_assert!(relative(a, c) <= 1e-12);
        let delta = lagrange_differential(&s, &l).unwrap();
        let lhs = contract_with_spray(&s, &delta).unwrap().eval(&p).unwrap();
        let rhs = spray_apply(&s, &energy(&l)).unwrap().eval(&p).unwrap();
        prop_assert!(relative(lhs, rhs) <= 1e-9);
    }

    #[test]
    fn power_shift_recovered(gamma in -2.0f64..2.0, a in 0.0f64..2.0) {
        prop_assume!(gamma.abs() > 0.05 && (gamma + 1.0).abs() > 0.05);
        let cloud: Vec<(f64, f64)> = (0..64)
            .map(|k| {
                let l = 1.0 + 4.0 * k as f64 / 63.0;
                (l, gamma / (l + a))
            })
            .collect();
        match classify(&cloud, 1e-6).chosen {
            DeformationClass::PowerShift { gamma: g, a: s } => {
                prop_assert!((g - gamma).abs() <= 1e-6 && (s - a).abs() <= 1e-6, "{g} {s}");
            }
            // γ = −2 with a shift is also the Möbius law −2/(L + a).
            DeformationClass::Moebius { c, d } if (gamma + 2.0).abs() < 1e-6 => {
                prop_assert!((d / c - a).abs() <= 1e-6);
            }
            other => prop_assert!(false, "{other}"),
        }
    }

    #[test]
    fn moebius_normalization_invariant(r in 0.2f64..3.0, k in 0.1f64..10.0) {
        let cloud = |c: f64, d: f64| -> Vec<(f64, f64)> {
            (0..64)
                .map(|i| {
                    let l = 1.0 + 4.0 * i as f64 / 63.0;
                    (l, -2.0 * c / (c * l + d))
                })
                .collect()
        };
        let a = classify(&cloud(1.0, r), 1e-6).chosen;
        let b = classify(&cloud(k, k * r), 1e-6).chosen;
        match (&a, &b) {
            (DeformationClass::Moebius { c: c1, d: d1 }, DeformationClass::Moebius { c: c2, d: d2 }) => {
                prop_assert!((c1 - c2).abs() <= 1e-9 && (d1 - d2).abs() <= 1e-9);
                prop_assert!((c1.abs().max(d1.abs()) - 1.0).abs() <= 1e-12 && *c1 >= 0.0);
            }
            // f = −2/(L + r) is also PowerShift{γ = −2, a = r}; both are fine
            // as long as the two scalings agree.
            _ => prop_assert_eq!(a.family(), b.family()),
        }
    }

    #[test]
    fn affine_images_stay_lagrangian(scale in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], shift in -5.0f64..5.0) {
        let problem = bundled("lienard");
        let phi = Deformation::ClosedForm(ClosedForm {
            class: DeformationClass::PowerShift { gamma: 0.5, a: 0.0 },
            scale,
            shift,
            interval: (0.1, 100.0),
        });
        let plan = problem.plan.clone().with_count(50);
        let r = verify_deformed_el(&problem.system, &phi, &plan, 1e-9).unwrap();
        prop_assert!(r.direct.passed, "{}", r.direct.max_residual);
    }
}
