use std::sync::Arc;

use proptest::prelude::*;

use diffext::extension::palais_extend;
use diffext::flows::damped_translation;
use diffext::geom::{invert_radial_profile, linear_factorize, transition_profile, Matrix, Vector};
use diffext::linearize::local_linearize;
use diffext::maps::{construct_builtin, Affine, BallDiffeo, Builtin, Region, SmoothMap};

fn vector(n: usize, range: f64) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-range..range, n).prop_map(|v| Vector::from_slice(&v))
}

fn gl_plus(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0..2.0f64, n * n)
        .prop_map(move |v| Matrix::from_rows(&v.chunks(n).map(<[f64]>::to_vec).collect::<Vec<_>>()))
        .prop_filter("det > 0.05", |m| m.determinant() > 0.05)
}

fn fd_jacobian(map: &SmoothMap, x: &Vector, h: f64) -> Matrix {
    let n = x.dim();
    let mut cols = vec![vec![0.0; n]; n];
    for (j, col) in cols.iter_mut().enumerate() {
        let e = Vector::basis(n, j).scale(h);
        let d = &map.eval(&(x + &e)).unwrap() - &map.eval(&(x - &e)).unwrap();
        for (i, c) in col.iter_mut().enumerate() {
            *c = d[i] / (2.0 * h);
        }
    }
    Matrix::from_rows(&cols).transpose()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn factorization_reconstructs((n, a) in (2usize..=4).prop_flat_map(|n| (Just(n), gl_plus(n)))) {
        let f = linear_factorize(&a).unwrap();
        let err = (&f.reconstruct() - &a).max_abs();
        prop_assert!(err <= 1e-12 * a.max_abs().max(1.0), "n = {n}, err = {err:e}");
        let skew = &f.skew + &f.skew.transpose();
        prop_assert!(skew.max_abs() <= 1e-12);
        prop_assert!((&f.sym - &f.sym.transpose()).max_abs() <= 1e-12);
    }

    #[test]
    fn radial_profile_inverts(a in 0.0..1.0f64, w in 0.05..1.0f64, c0 in 0.05..1.0f64, lift in 0.0..2.0f64, r in 0.0..3.0f64) {
        let phi = transition_profile(a, a + w, c0, c0 + lift).unwrap();
        let y = phi.radial(r);
        prop_assert!((invert_radial_profile(&phi, y) - r).abs() <= 1e-12 * (1.0 + r));
        prop_assert!(phi.radial_deriv(r) > 0.0);
    }

    #[test]
    fn damped_translation_is_rigid_on_payload_and_identity_off_tube(
        q in vector(2, 3.0), d in vector(2, 3.0), eps in 0.1..0.6f64, u in vector(2, 1.0),
    ) {
        let p = &q + &d;
        let map = damped_translation(&q, &p, eps, 1.25 * eps).unwrap();
        let x = q.axpy(eps / 1.0f64.max(u.norm()), &u);
        let moved = map.eval(&x).unwrap();
        let scale = 1.0 + q.norm().max(p.norm());
        prop_assert!(moved.distance(&(&x + &d)) <= 1e-13 * scale);
        prop_assert!(map.inverse(&moved).unwrap().distance(&x) <= 1e-9);
        // a point beyond the tube around [q, p]
        let far = p.axpy(1.3 * eps + d.norm(), &Vector::basis(2, 0)).axpy(2.0 * eps + d.norm(), &Vector::basis(2, 1));
        prop_assert_eq!(map.eval(&far).unwrap(), far);
    }

    #[test]
    fn affine_inverse_round_trips(a in gl_plus(3), b in vector(3, 5.0), x in vector(3, 5.0)) {
        let m = Affine { matrix: a, offset: b }.into_map().unwrap();
        let y = m.eval(&x).unwrap();
        prop_assert!(m.inverse(&y).unwrap().distance(&x) <= 1e-9 * (1.0 + x.norm()));
    }

    #[test]
    fn twist_jacobian_matches_differences(angle in -3.0..3.0f64, x in vector(2, 1.2)) {
        let c = Vector::zeros(2);
        let b = Builtin::Twist { angle, center: c.clone(), inner: 0.3, outer: 1.0, plane: [0, 1] };
        let map = construct_builtin(2, b, Region::ball(c, 2.0)).unwrap();
        let j = map.jacobian(&x).unwrap();
        let fd = fd_jacobian(&map, &x, 1e-6);
        prop_assert!((&j - &fd).max_abs() <= 1e-6 * j.max_abs().max(1.0));
        prop_assert!(j.determinant() > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn extension_agrees_inside_and_is_identity_far_away(
        angle in -3.0..3.0f64, eps in 0.15..0.6f64, x in vector(2, 0.7), theta in 0.0..6.3f64, gap in 0.0..2.0f64,
    ) {
        let c = Vector::from_slice(&[0.3, -0.4]);
        let b = Builtin::Rotation { angle, center: c.clone(), plane: [0, 1] };
        let h = construct_builtin(2, b, Region::ball(c.clone(), 1.5)).unwrap().shared();
        let ball = BallDiffeo::new(h.clone(), c.clone(), 1.0, 0.5).unwrap();
        let ext = palais_extend(&ball, eps).unwrap();
        let inside = c.axpy(1.0 / 1.0f64.max(x.norm()), &x);
        prop_assert!(ext.eval(&inside).unwrap().distance(&h.eval(&inside).unwrap()) <= 1e-12);
        // A = B̄(c, 1) for a rotation about c
        let out = c.axpy(1.0 + eps * (1.0 + 1e-9) + gap, &Vector::from_slice(&[theta.cos(), theta.sin()]));
        prop_assert_eq!(ext.eval(&out).unwrap(), out.clone());
        let y = ext.eval(&inside).unwrap();
        prop_assert!(ext.inverse(&y).unwrap().distance(&inside) <= 1e-8);
    }

    #[test]
    fn linearization_is_identity_near_center(shear in -1.0..1.0f64, theta in 0.0..6.3f64, t in 0.0..1.0f64) {
        let c = Vector::zeros(2);
        let b = Builtin::Shear { amount: shear, center: c.clone(), plane: [0, 1] };
        let h: Arc<SmoothMap> = construct_builtin(2, b, Region::ball(c.clone(), 1.5)).unwrap().shared();
        let ball = BallDiffeo::new(h.clone(), c.clone(), 1.0, 0.5).unwrap();
        let r = local_linearize(&ball).unwrap();
        let u = Vector::from_slice(&[theta.cos(), theta.sin()]);
        let near = u.scale(t * r.delta);
        prop_assert!(r.map.eval(&near).unwrap().distance(&near) <= 1e-13);
        let outer = u.scale(0.5 + 0.5 * t);
        prop_assert!(r.map.eval(&outer).unwrap().distance(&h.eval(&outer).unwrap()) <= 1e-12);
    }
}
