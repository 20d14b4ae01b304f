use granular::collision::{post_collision_n, post_collision_sigma, pre_collision};
use granular::restitution::RestitutionModel;
use granular::vec3::{add, dot, norm, norm2, sub, Vec3};
use proptest::prelude::*;

fn vel() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-50.0f64..50.0)
}

fn unit() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1.0f64..1.0).prop_filter("nonzero", |a| norm(*a) > 1e-3).prop_map(|a| {
        let l = norm(a);
        [a[0] / l, a[1] / l, a[2] / l]
    })
}

fn law() -> impl Strategy<Value = RestitutionModel> {
    prop_oneof![
        (0.01f64..10.0).prop_map(|a| RestitutionModel::viscoelastic(a).unwrap()),
        (0.05f64..1.0).prop_map(|e| RestitutionModel::constant(e).unwrap()),
    ]
}

proptest! {
    #[test]
    fn energy_never_increases(v in vel(), vs in vel(), n in unit(), m in law()) {
        let out = post_collision_n(v, vs, n, &m).unwrap();
        let before = norm2(v) + norm2(vs);
        let after = norm2(out.v_prime) + norm2(out.vstar_prime);
        prop_assert!(after <= before * (1.0 + 8.0 * f64::EPSILON));
        prop_assert!(out.energy_change <= 0.0);
        prop_assert!(((after - before) - out.energy_change).abs() <= 16.0 * f64::EPSILON * before);
    }

    #[test]
    fn normal_velocity_reverses_and_shrinks(v in vel(), vs in vel(), n in unit(), m in law()) {
        let un = dot(sub(v, vs), n);
        let out = post_collision_n(v, vs, n, &m).unwrap();
        let un_after = dot(sub(out.v_prime, out.vstar_prime), n);
        let scale = norm(v) + norm(vs);
        prop_assert!((un_after + out.e_used * un).abs() <= 1e-12 * scale);
    }

    #[test]
    fn pre_inverts_post(v in vel(), vs in vel(), n in unit(), m in law()) {
        let out = post_collision_n(v, vs, n, &m).unwrap();
        let (pv, pvs) = pre_collision(out.v_prime, out.vstar_prime, n, &m).unwrap();
        let scale = norm(v) + norm(vs);
        prop_assert!(norm(sub(pv, v)) <= 1e-9 * scale);
        prop_assert!(norm(sub(pvs, vs)) <= 1e-9 * scale);
    }

    #[test]
    fn sigma_form_conserves_momentum(v in vel(), vs in vel(), s in unit(), m in law()) {
        prop_assume!(norm(sub(v, vs)) > 1e-6);
        let out = post_collision_sigma(v, vs, s, &m).unwrap();
        let p0 = add(v, vs);
        let p1 = add(out.v_prime, out.vstar_prime);
        prop_assert!(norm(sub(p0, p1)) <= 1e-13 * (norm(v) + norm(vs)));
    }
}

#[test]
fn elastic_collision_preserves_energy() {
    let m = RestitutionModel::elastic();
    let out = post_collision_n([1.0, 2.0, 3.0], [-0.5, 0.25, 4.0], [0.6, 0.8, 0.0], &m).unwrap();
    let before = 14.0 + 0.25 + 0.0625 + 16.0;
    let after = norm2(out.v_prime) + norm2(out.vstar_prime);
    assert!((after - before).abs() <= 2.0 * f64::EPSILON * before);
    assert_eq!(out.energy_change, 0.0);
}
