//! Property suites for the geometry, problem, KKT and CQ invariants. Each
//! case draws a seed and builds its instance from a seeded generator.

mod common;

use common::*;
use manikkt_core::cq::{self, CqTolerances};
use manikkt_core::kkt::{self, KktTolerances, MultiplierSet, Multipliers};
use manikkt_core::manifold::{self, tangent_basis};
use manikkt_core::problem::affine_field;
use manikkt_core::{
    ball_constraint, frechet_objective, Chart, ConstrainedProblem, ManifoldKind, Point, ScalarField, TangentVector,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn any_manifold(rng: &mut ChaCha8Rng) -> ManifoldKind {
    let n = rng.random_range(2..7);
    if rng.random_bool(0.7) {
        sphere(n)
    } else {
        ManifoldKind::euclidean(n).unwrap()
    }
}

fn any_point(m: ManifoldKind, rng: &mut ChaCha8Rng) -> Point {
    if m.is_sphere() {
        random_sphere_point(m, rng)
    } else {
        let c: Vec<f64> = (0..m.ambient_dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
        point(m, &c)
    }
}

fn tangency(v: &TangentVector) -> f64 {
    let p = v.base();
    if p.manifold().is_sphere() {
        dot(&v.to_vec(), &p.to_vec()).abs()
    } else {
        0.0
    }
}

/// Active gradients at `p` as columns: `count` random ones, or fewer
/// distinct ones repeated when `dependent`.
fn constraint_gradients(p: &Point, count: usize, dependent: bool, rng: &mut ChaCha8Rng) -> Vec<TangentVector> {
    let mut grads: Vec<TangentVector> = Vec::new();
    for i in 0..count {
        if dependent && i > 0 && rng.random_bool(0.5) {
            let prev = grads[rng.random_range(0..i)].clone();
            grads.push(prev.scale(rng.random_range(0.5..2.0)));
        } else {
            grads.push(random_tangent(p, rng));
        }
    }
    grads
}

/// Random problem with every constraint active at `p` and an objective
/// gradient that is either a planted KKT combination or arbitrary.
fn random_problem(seed: u64) -> (ConstrainedProblem, Point) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = sphere(rng.random_range(3..6));
    let p = random_sphere_point(m, &mut rng);
    let n_ineq = rng.random_range(0..4);
    let n_eq = rng.random_range(0..3);
    let dependent = rng.random_bool(0.3);
    let grads = constraint_gradients(&p, n_ineq + n_eq, dependent, &mut rng);
    let grad_f = if rng.random_bool(0.5) {
        let mut g = TangentVector::zero(&p);
        for (i, gi) in grads.iter().enumerate() {
            let c = if i < n_ineq { rng.random_range(0.0..2.0) } else { rng.random_range(-2.0..2.0) };
            g = g.axpy(-c, gi).unwrap();
        }
        g
    } else {
        random_tangent(&p, &mut rng)
    };
    let ineq = grads[..n_ineq].iter().map(|g| active_affine(&p, g)).collect();
    let eq = grads[n_ineq..].iter().map(|g| active_affine(&p, g)).collect();
    (ConstrainedProblem::new(active_affine(&p, &grad_f), ineq, eq).unwrap(), p)
}

fn set_kind(set: &MultiplierSet) -> &'static str {
    match set {
        MultiplierSet::Empty { .. } => "empty",
        MultiplierSet::Singleton(_) => "singleton",
        MultiplierSet::BoundedPolytope(_) => "bounded",
        MultiplierSet::Unbounded { .. } => "unbounded",
    }
}

fn rel_diff(a: &Multipliers, b: &Multipliers) -> f64 {
    a.max_abs_diff(b) / b.norm().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exp_log_inverse_both_ways(seed in any::<u64>(), t in 0.0..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = any_manifold(&mut rng);
        let p = any_point(m, &mut rng);
        let v = random_unit_tangent(&p, &mut rng).scale(t);
        let q = manifold::exp(&p, &v).unwrap();
        let back = manifold::log(&p, &q).unwrap();
        prop_assert!((back.vec() - v.vec()).amax() <= 1e-10);
        prop_assert!(tangency(&back) <= 1e-10);
        let q2 = manifold::exp(&p, &manifold::log(&p, &q).unwrap()).unwrap();
        prop_assert!((q2.coords() - q.coords()).amax() <= 1e-10);
    }

    #[test]
    fn geodesics_have_unit_speed(seed in any::<u64>(), t in 0.0..3.1f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = any_manifold(&mut rng);
        let p = any_point(m, &mut rng);
        let v = random_unit_tangent(&p, &mut rng);
        let q = manifold::exp(&p, &v.scale(t)).unwrap();
        prop_assert!((manifold::dist(&p, &q).unwrap() - t).abs() <= 1e-10);
        if m.is_sphere() {
            prop_assert!((sphere_dist(&p.to_vec(), &q.to_vec()) - t).abs() <= 1e-10);
        }
    }

    #[test]
    fn tangent_outputs_are_tangent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = sphere(rng.random_range(2..7));
        let p = random_sphere_point(m, &mut rng);
        let w: Vec<f64> = (0..m.ambient_dim()).map(|_| rng.random_range(-5.0..5.0)).collect();
        prop_assert!(tangency(&manifold::tangent_project(&p, &w).unwrap()) <= 1e-10);
        let data: Vec<Point> = (0..5).map(|_| random_sphere_point(m, &mut rng)).collect();
        let c = random_sphere_point(m, &mut rng);
        prop_assume!(dot(&c.to_vec(), &p.to_vec()) > -0.99);
        prop_assume!(data.iter().all(|d| dot(&d.to_vec(), &p.to_vec()) > -0.99));
        let fields = [
            frechet_objective(&data).unwrap(),
            ball_constraint(&c, 0.7).unwrap(),
            affine_field(m, &w, 0.3).unwrap(),
        ];
        for f in &fields {
            prop_assert!(tangency(&f.gradient(&p).unwrap()) <= 1e-10);
        }
        for e in tangent_basis(&p) {
            prop_assert!(tangency(&e) <= 1e-10);
        }
    }

    #[test]
    fn chart_round_trip(seed in any::<u64>(), t in 0.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = any_manifold(&mut rng);
        let p = any_point(m, &mut rng);
        let chart = Chart::normal(p.clone(), 1.5).unwrap();
        let q = manifold::exp(&p, &random_unit_tangent(&p, &mut rng).scale(t)).unwrap();
        let x = chart.forward(&q).unwrap();
        prop_assert!((x.norm() - t).abs() <= 1e-10);
        prop_assert!((chart.backward(&x).unwrap().coords() - q.coords()).amax() <= 1e-10);
    }

    #[test]
    fn frechet_value_ignores_data_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = sphere(3);
        let p = random_sphere_point(m, &mut rng);
        let mut data: Vec<Point> = (0..rng.random_range(2..30)).map(|_| random_sphere_point(m, &mut rng)).collect();
        let f1 = frechet_objective(&data).unwrap().value(&p).unwrap();
        for i in (1..data.len()).rev() {
            data.swap(i, rng.random_range(0..=i));
        }
        let f2 = frechet_objective(&data).unwrap().value(&p).unwrap();
        prop_assert_eq!(f1, f2);
    }

    #[test]
    fn ball_constraint_convex_along_feasible_geodesics(seed in any::<u64>(), r in 0.05..1.5f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = sphere(rng.random_range(3..6));
        let c = random_sphere_point(m, &mut rng);
        let g = ball_constraint(&c, r).unwrap();
        let a = manifold::exp(&c, &random_unit_tangent(&c, &mut rng).scale(r * rng.random::<f64>())).unwrap();
        let b = manifold::exp(&c, &random_unit_tangent(&c, &mut rng).scale(r * rng.random::<f64>())).unwrap();
        let mid = manifold::exp(&a, &manifold::log(&a, &b).unwrap().scale(0.5)).unwrap();
        let bound = g.value(&a).unwrap().max(g.value(&b).unwrap());
        prop_assert!(g.value(&mid).unwrap() <= bound + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn chart_transition_is_well_conditioned(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = sphere(rng.random_range(3..6));
        let a = random_sphere_point(m, &mut rng);
        let b = manifold::exp(&a, &random_unit_tangent(&a, &mut rng).scale(0.2)).unwrap();
        let ca = Chart::normal(a.clone(), 1.0).unwrap();
        let cb = Chart::normal(b, 1.0).unwrap();
        let d = ca.dim();
        let x0 = DVector::from_fn(d, |_, _| rng.random_range(-0.2..0.2));
        let transition = |x: &DVector<f64>| cb.forward(&ca.backward(x).unwrap()).unwrap();
        let h = 1e-6;
        let mut jac = DMatrix::zeros(d, d);
        for k in 0..d {
            let mut xp = x0.clone();
            xp[k] += h;
            let mut xm = x0.clone();
            xm[k] -= h;
            jac.set_column(k, &((transition(&xp) - transition(&xm)) / (2.0 * h)));
        }
        let sv = jac.singular_values();
        prop_assert!(sv.min() > 0.0);
        prop_assert!(sv.max() / sv.min() < 1e6);
    }

    #[test]
    fn certified_multipliers_satisfy_kkt(seed in any::<u64>()) {
        let (prob, p) = random_problem(seed);
        let tol = KktTolerances::default();
        let report = kkt::find_multipliers(&prob, &p, tol).unwrap();
        prop_assert!(report.multipliers.is_some() != report.farkas_witness.is_some());
        if let Some(mult) = &report.multipliers {
            prop_assert!(report.stationarity_sq <= tol.kkt_tol * tol.kkt_tol);
            prop_assert!(mult.mu.iter().all(|&x| x >= 0.0));
            let check = kkt::kkt_residual(&prob, &p, mult, tol.act_tol).unwrap();
            prop_assert!(check.stationarity_sq.sqrt() <= tol.kkt_tol);
        }
    }

    #[test]
    fn multipliers_and_witness_are_exclusive(seed in any::<u64>()) {
        let (prob, p) = random_problem(seed);
        let tol = KktTolerances::default();
        let report = kkt::find_multipliers(&prob, &p, tol).unwrap();
        if let Some(d) = &report.farkas_witness {
            // a certified witness bounds every multiplier residual from below
            let delta = -manifold::inner(&prob.objective().gradient(&p).unwrap(), d).unwrap();
            prop_assert!(delta > 10.0 * tol.kkt_tol);
            let ls = kkt::least_squares_multipliers(&prob, &p, tol.act_tol).unwrap();
            let clipped = Multipliers::new(ls.mu.iter().map(|x| x.max(0.0)).collect(), ls.lambda.clone());
            let res = kkt::kkt_residual(&prob, &p, &clipped, tol.act_tol).unwrap();
            prop_assert!(res.stationarity_sq.sqrt() > 10.0 * tol.kkt_tol);
        }
    }

    #[test]
    fn multipliers_scale_with_the_objective(seed in any::<u64>(), alpha in 0.01..100.0f64) {
        let (prob, p) = random_problem(seed);
        let tol = KktTolerances::default();
        let scaled = prob.with_objective(prob.objective().scaled(alpha)).unwrap();
        let base = kkt::multiplier_set_analysis(&prob, &p, None, tol, 1e-8).unwrap();
        let other = kkt::multiplier_set_analysis(&scaled, &p, None, tol, 1e-8).unwrap();
        prop_assume!(!matches!(base, MultiplierSet::Empty { .. }) || alpha >= 1.0);
        prop_assert_eq!(set_kind(&base), set_kind(&other));
        if let (MultiplierSet::Singleton(a), MultiplierSet::Singleton(b)) = (&base, &other) {
            prop_assert!(rel_diff(b, &a.scale(alpha)) <= 1e-9);
        }
        let ra = kkt::find_multipliers(&prob, &p, tol).unwrap();
        let rb = kkt::find_multipliers(&scaled, &p, KktTolerances { kkt_tol: tol.kkt_tol * alpha, ..tol }).unwrap();
        if let (Some(a), Some(b), MultiplierSet::Singleton(_)) = (&ra.multipliers, &rb.multipliers, &base) {
            prop_assert!(rel_diff(b, &a.scale(alpha)) <= 1e-9);
        }
    }

    #[test]
    fn linearizing_cone_is_a_cone(seed in any::<u64>()) {
        let (prob, p) = random_problem(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let tol_lin = 1e-9;
        let grads: Vec<TangentVector> =
            prob.inequalities().iter().chain(prob.equalities()).map(|g| g.gradient(&p).unwrap()).collect();
        let q = prob.num_inequalities();
        // members from the MFCQ vector, the zero vector and random draws
        let mut candidates = vec![TangentVector::zero(&p)];
        if let Some(v) = cq::check_mfcq(&prob, &p, CqTolerances::default()).unwrap().vector {
            candidates.push(v);
        }
        for _ in 0..20 {
            candidates.push(random_unit_tangent(&p, &mut rng));
        }
        for v in candidates {
            if !cq::linearizing_cone_contains(&prob, &p, &v, 1e-8, tol_lin).unwrap() {
                continue;
            }
            for alpha in [0.5, 2.0, 10.0] {
                let w = v.scale(alpha);
                for (i, g) in grads.iter().enumerate() {
                    let (a, b) = (manifold::inner(g, &w).unwrap(), alpha * manifold::inner(g, &v).unwrap());
                    prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
                    if i < q {
                        prop_assert!(b <= alpha * tol_lin * v.norm().max(1.0));
                    }
                }
                prop_assert!(cq::linearizing_cone_contains(&prob, &p, &w, 1e-8, tol_lin).unwrap());
            }
        }
    }

    #[test]
    fn licq_implies_mfcq_and_routes_agree(seed in any::<u64>()) {
        let (prob, p) = random_problem(seed);
        let tol = CqTolerances::default();
        let licq = cq::check_licq(&prob, &p, tol).unwrap();
        let mfcq = cq::check_mfcq(&prob, &p, tol).unwrap();
        let dual = cq::mfcq_dual_check(&prob, &p, tol).unwrap();
        prop_assert!(!licq.holds || mfcq.holds);
        prop_assert_eq!(mfcq.holds, dual.holds);
        if let Some(v) = &mfcq.vector {
            prop_assert!(cq::is_mfcq_vector(&prob, &p, v, tol.act_tol).unwrap());
        }
    }

    #[test]
    fn singleton_exactly_under_licq(seed in any::<u64>()) {
        let (prob, p) = random_problem(seed);
        let set = kkt::multiplier_set_analysis(&prob, &p, None, KktTolerances::default(), 1e-8).unwrap();
        let licq = cq::check_licq(&prob, &p, CqTolerances::default()).unwrap().holds;
        if !matches!(set, MultiplierSet::Empty { .. }) {
            prop_assert_eq!(matches!(set, MultiplierSet::Singleton(_)), licq);
        }
    }
}

#[test]
fn two_identical_inequalities_give_a_segment() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let m = sphere(3);
    let p = random_sphere_point(m, &mut rng);
    let grad = random_unit_tangent(&p, &mut rng);
    let g = active_affine(&p, &grad);
    let prob = ConstrainedProblem::new(active_affine(&p, &grad.scale(-2.0)), vec![g.clone(), g], vec![]).unwrap();
    let tol = CqTolerances::default();
    assert!(!cq::check_licq(&prob, &p, tol).unwrap().holds);
    assert!(cq::check_mfcq(&prob, &p, tol).unwrap().holds);
    match kkt::multiplier_set_analysis(&prob, &p, None, KktTolerances::default(), 1e-8).unwrap() {
        MultiplierSet::BoundedPolytope(vertices) => {
            assert_eq!(vertices.len(), 2);
            for v in &vertices {
                assert!((v.mu[0] + v.mu[1] - 2.0).abs() <= 1e-10);
            }
        }
        other => panic!("expected a segment, got {other:?}"),
    }
}

#[test]
fn sampled_tangent_cone_covers_interior_directions() {
    // at an interior point every direction is tangent
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = sphere(3);
    let c = random_sphere_point(m, &mut rng);
    let p = manifold::exp(&c, &random_unit_tangent(&c, &mut rng).scale(0.2)).unwrap();
    let g: ScalarField = ball_constraint(&c, 0.6).unwrap();
    let prob = ConstrainedProblem::new(g.clone(), vec![g], vec![]).unwrap();
    let sample = cq::sample_tangent_cone(&prob, &p, 400, 11, 1e-8).unwrap();
    assert_eq!(sample.samples.len(), 400);
    let basis = tangent_basis(&p);
    let angles: Vec<f64> = sample
        .samples
        .iter()
        .map(|v| {
            let x = manifold::inner(v, &basis[0]).unwrap();
            let y = manifold::inner(v, &basis[1]).unwrap();
            y.atan2(x)
        })
        .collect();
    let mut sorted = angles.clone();
    sorted.sort_by(f64::total_cmp);
    let mut gap = sorted[0] + 2.0 * PI - sorted[sorted.len() - 1];
    for w in sorted.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    assert!(gap < PI / 6.0, "largest angular gap {gap}");
}

#[test]
fn sampled_directions_follow_great_circles() {
    // with a single equality the feasible set is a great circle through p
    let m = sphere(3);
    let p = point(m, &[0.0, 0.0, 1.0]);
    let h = affine_field(m, &[0.0, 1.0, 0.0], 0.0).unwrap();
    let prob = ConstrainedProblem::new(h.clone(), vec![], vec![h]).unwrap();
    let sample = cq::sample_tangent_cone(&prob, &p, 200, 5, 1e-8).unwrap();
    assert!(!sample.samples.is_empty());
    for v in &sample.samples {
        let u = normalize(&v.to_vec());
        assert!(u[1].abs() <= 1e-4, "sample {u:?} leaves the circle plane");
    }
}
