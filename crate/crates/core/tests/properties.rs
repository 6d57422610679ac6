use arnold_cert::dynamics::{branch_decompose, NoiseKernel, NoisyMapParams};
use arnold_cert::rigor::{parse_enclosure, DecimalInterval};
use arnold_cert::rigor::{cos_point, sin_point};
use arnold_cert::ulam::{assemble_annealed, assemble_deterministic, assemble_noise, Partition};
use arnold_cert::IVal;
use proptest::prelude::*;

/// Whether the exact value `s + e` (with `|e|` at most half an ulp of `s`)
/// lies in `x`.
fn holds(x: IVal, s: f64, e: f64) -> bool {
    let lo_ok = x.lo() < s || (x.lo() == s && e >= 0.0);
    let hi_ok = x.hi() > s || (x.hi() == s && e <= 0.0);
    lo_ok && hi_ok
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, -1.0..1.0f64, (-40i32..40).prop_map(|k| 2f64.powi(k) / 3.0)]
}

fn ival() -> impl Strategy<Value = (IVal, f64)> {
    (finite(), 0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, w, t)| {
        let x = IVal::new(a, a + w * a.abs().max(1.0));
        let p = x.lo() + t * (x.hi() - x.lo());
        (x, p.clamp(x.lo(), x.hi()))
    })
}

proptest! {
    #[test]
    fn point_arithmetic_is_exactly_enclosed(a in finite(), b in finite()) {
        let (x, y) = (IVal::point(a), IVal::point(b));
        let (s, e) = two_sum(a, b);
        prop_assert!(holds(x + y, s, e));
        let (s, e) = two_sum(a, -b);
        prop_assert!(holds(x - y, s, e));
        let p = a * b;
        prop_assert!(holds(x * y, p, a.mul_add(b, -p)));
        if b != 0.0 {
            let q = a / b;
            let r = (-q).mul_add(b, a);
            let sign = if r == 0.0 { 0.0 } else { r.signum() * b.signum() };
            prop_assert!(holds(x.checked_div(y).unwrap(), q, sign));
        }
        let m = a.abs();
        let r = m.sqrt();
        let rem = (-r).mul_add(r, m);
        prop_assert!(holds(IVal::point(m).sqrt().unwrap(), r, rem));
    }

    #[test]
    fn operations_are_inclusion_monotone((x, p) in ival(), (y, q) in ival()) {
        let (px, qy) = (IVal::point(p), IVal::point(q));
        prop_assert!((px + qy).subset_of(x + y));
        prop_assert!((px - qy).subset_of(x - y));
        prop_assert!((px * qy).subset_of(x * y));
        prop_assert!(px.sin().subset_of(x.sin()));
        prop_assert!(px.cos_2pi().subset_of(x.cos_2pi()));
        prop_assert!(px.sqr().subset_of(x.sqr()));
    }

    #[test]
    fn pythagoras_is_enclosed(a in -100.0..100.0f64) {
        let (s, c) = (sin_point(a), cos_point(a));
        prop_assert!((s.sqr() + c.sqr()).contains(1.0));
        prop_assert!(s.width() <= 1e-14 && c.width() <= 1e-14);
    }

    #[test]
    fn decimal_round_trip_is_outward(a in finite(), w in 0.0..1e-3f64, digits in 3usize..18) {
        let x = IVal::new(a, a + w);
        let back = DecimalInterval::from_ival(x, digits).to_ival().unwrap();
        prop_assert!(x.subset_of(back));
        let d = DecimalInterval::from_ival(x, digits);
        prop_assert!(parse_enclosure(&d.lo).unwrap().lo() <= x.lo());
        prop_assert!(parse_enclosure(&d.hi).unwrap().hi() >= x.hi());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lift_is_odd_about_the_half_turn(tau in 0.5..1.0f64, eps in 0.0..2.0f64, x in 0.5..1.0f64) {
        let a = NoisyMapParams::new(tau, eps, 0.1).unwrap().lift();
        let b = NoisyMapParams::new(1.0 - tau, eps, 0.1).unwrap().lift();
        prop_assert!((a.eval_point(x) + b.eval_point(1.0 - x)).contains(2.0));
    }

    #[test]
    fn branch_inverse_encloses_preimage(tau in 0.0..1.0f64, eps in 1.01..1.8f64, t in 0.0..1.0f64) {
        let p = NoisyMapParams::new(tau, eps, 0.1).unwrap();
        let bd = branch_decompose(&p).unwrap();
        let lift = p.lift();
        for (b, br) in bd.branches.iter().enumerate() {
            let ya = lift.approx(br.lo);
            let yb = lift.approx(br.hi);
            let y = ya + t * (yb - ya);
            if let Some(z) = bd.inverse(b, y) {
                prop_assert!(z.lo() >= br.lo && z.hi() <= br.hi);
                prop_assert!(lift.eval(z).contains(y), "branch {} y {} z {:?}", b, y, z);
                let d = lift.derivative(IVal::new(br.lo, br.hi).intersect(z).unwrap());
                prop_assert!(d.contains_zero() || (d.lo() > 0.0) == (br.sign > 0));
            }
        }
    }

    #[test]
    fn deterministic_ulam_is_stochastic(tau in 0.0..1.0f64, eps in 0.0..1.6f64, n in 8usize..96) {
        prop_assume!((eps - 1.0).abs() > 1e-3);
        let p = NoisyMapParams::new(tau, eps, 0.1).unwrap();
        let m = assemble_deterministic(&p, &Partition::new(n).unwrap()).unwrap();
        for j in 0..n {
            prop_assert!(m.column_sum(j).contains(1.0), "column {} sums to {:?}", j, m.column_sum(j));
            for (_, e) in m.column_entries(j) {
                prop_assert!(e.hi() >= 0.0 && e.lo() >= -1e-12);
            }
        }
    }

    #[test]
    fn annealed_ulam_is_stochastic(tau in 0.0..1.0f64, eps in 0.0..1.6f64, xi in 0.02..1.0f64, n in 8usize..64) {
        prop_assume!((eps - 1.0).abs() > 1e-3);
        let p = NoisyMapParams::new(tau, eps, xi).unwrap();
        let m = assemble_annealed(&p, &Partition::new(n).unwrap()).unwrap();
        for j in 0..n {
            prop_assert!(m.column_sum(j).contains(1.0));
        }
    }

    #[test]
    fn noise_matrix_is_circulant(xi in 0.02..1.0f64, n in 4usize..64) {
        let m = assemble_noise(&NoiseKernel::new(xi), &Partition::new(n).unwrap()).unwrap();
        for j in 0..n {
            prop_assert!(m.column_sum(j).contains(1.0));
            for i in 0..n {
                prop_assert_eq!(m.entry(i, j), m.entry((i + 1) % n, (j + 1) % n));
            }
        }
    }
}
