use arnold_cert::dynamics::NoisyMapParams;
use arnold_cert::montecarlo::{orbit_histogram, rotation_mc, ulam_mc, McConfig};
use arnold_cert::ulam::{assemble_annealed, Partition};

#[test]
fn sampled_ulam_matches_certified_entries() {
    let p = NoisyMapParams::new(0.709, 1.4, 0.1).unwrap();
    let n = 64;
    let part = Partition::new(n).unwrap();
    let samples = 100_000;
    let cfg = McConfig { samples_per_cell: samples, ..McConfig::default() };
    let mc = ulam_mc(&p, &part, &cfg).unwrap();
    let m = assemble_annealed(&p, &part).unwrap();
    let mut inside = 0;
    for j in 0..n {
        assert_eq!(mc.row_count(j), samples);
        for i in 0..n {
            let e = m.entry(i, j);
            let q = mc.entry(j, i);
            let pm = e.mid().clamp(0.0, 1.0);
            let sigma = (pm * (1.0 - pm) / samples as f64).sqrt();
            let gap = (e.lo() - q).max(q - e.hi()).max(0.0);
            if gap <= 5.0 * sigma {
                inside += 1;
            }
        }
    }
    let frac = inside as f64 / (n * n) as f64;
    assert!(frac >= 0.99, "only {frac} of entries within 5 sigma");
}

#[test]
fn fixed_seed_reproduces_results() {
    let p = NoisyMapParams::new(0.709, 1.4, 0.05).unwrap();
    let cfg = McConfig { n_ic: 20, n_it: 2000, n_bins: 50, ..McConfig::default() };
    let a = orbit_histogram(&p, &cfg).unwrap();
    let b = orbit_histogram(&p, &cfg).unwrap();
    assert_eq!(a.density, b.density);
    let c = orbit_histogram(&p, &McConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(a.density, c.density);
    let r1 = rotation_mc(&p, &cfg, 16).unwrap();
    let r2 = rotation_mc(&p, &cfg, 16).unwrap();
    assert_eq!(r1, r2);
    let u1 = ulam_mc(&p, &Partition::new(16).unwrap(), &cfg).unwrap();
    let u2 = ulam_mc(&p, &Partition::new(16).unwrap(), &cfg).unwrap();
    assert_eq!(u1.rows, u2.rows);
}

#[test]
fn histogram_is_a_density() {
    let p = NoisyMapParams::new(0.3, 0.5, 0.2).unwrap();
    let cfg = McConfig { n_ic: 20, n_it: 5000, n_bins: 40, ..McConfig::default() };
    let h = orbit_histogram(&p, &cfg).unwrap();
    let mass: f64 = h.density.iter().sum::<f64>() / h.n_bins as f64;
    assert!((mass - 1.0).abs() < 1e-12);
    assert!(h.l1_envelope() > 0.0 && h.l1_envelope() < 1.0);
}

#[test]
fn rejects_empty_budgets() {
    let p = NoisyMapParams::new(0.3, 0.5, 0.2).unwrap();
    assert!(orbit_histogram(&p, &McConfig { n_it: 0, ..McConfig::default() }).is_err());
    assert!(rotation_mc(&p, &McConfig::default(), 0).is_err());
}
