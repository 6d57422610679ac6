//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.
//!
//! Runs in release mode in a few minutes on one core:
//! `cargo test --release --test acceptance`.

use arnold_cert::certify::{
    certify_mixing, check_coverage, cover_interval, extend_mixing_map, stationary_measure, CertifiedDensity,
};
use arnold_cert::cli::compare_measures;
use arnold_cert::dynamics::{NoiseKernel, NoisyMapParams};
use arnold_cert::montecarlo::{l1_distance, orbit_histogram, rotation_mc, t_statistic, McConfig};
use arnold_cert::response::{
    adjoint, derivative_at, derivative_with, prove_nonmonotone, rotation_at, rotation_with, DerivativeEnclosure,
    GridPlan, Relation, Verdict,
};
use arnold_cert::ulam::{assemble_deterministic, assemble_noise, Partition};
use arnold_cert::IVal;
use rand::{Rng, SeedableRng};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

const EPS: f64 = 1.4;
const XI: f64 = 0.01;
const TAUS: [f64; 10] = [0.707, 0.708, 0.709, 0.710, 0.711, 0.712, 0.713, 0.714, 0.715, 0.716];

/// Published enclosures of the rotation number at `TAUS`, where given.
const PUBLISHED: [(f64, f64, f64); 5] = [
    (0.707, 0.780594, 0.780604),
    (0.709, 0.775291, 0.775302),
    (0.710, 0.771833, 0.771844),
    (0.715, 0.759288, 0.759344),
    (0.716, 0.759915, 0.759970),
];

const PLAN: GridPlan = GridPlan { coarse: 1024, coarse_limit: 4096, fine: 16384, n_max: 2000 };
const DOUBLE_FINE: usize = 32768;
const DERIVATIVE_TAU: f64 = 0.709;

struct Row {
    tau: f64,
    rho: IVal,
    rho_double: IVal,
    density_gap: f64,
    density_radii: f64,
    seconds: f64,
}

struct Sweep {
    rows: Vec<Row>,
    derivative: DerivativeEnclosure,
    density: CertifiedDensity,
}

fn l1_mid(a: &CertifiedDensity, b: &CertifiedDensity) -> f64 {
    l1_distance(&a.midpoints(), &b.midpoints())
}

fn max_rad(d: &CertifiedDensity) -> f64 {
    d.values.iter().map(|v| v.rad()).fold(0.0, f64::max)
}

/// Certified sweep over `TAUS` on the fine grid and on one twice as fine; both
/// densities share the resolvent certificate.
fn sweep() -> Result<&'static Sweep, String> {
    static S: OnceLock<Result<Sweep, String>> = OnceLock::new();
    S.get_or_init(|| run_sweep().map_err(|e| e.to_string())).as_ref().map_err(Clone::clone)
}

fn run_sweep() -> arnold_cert::Result<Sweep> {
    {
        let mut rows = Vec::new();
        let mut extra = None;
        for &tau in &TAUS {
            let t0 = Instant::now();
            let p = NoisyMapParams::new(tau, EPS, XI)?;
            let (cert, dens, rot) = rotation_at(&p, &PLAN)?;
            let seconds = t0.elapsed().as_secs_f64();
            let double = stationary_measure(&p, &Partition::new(DOUBLE_FINE)?, &cert)?;
            let rot_double = rotation_with(&double, &p, &adjoint(&double, &p)?)?;
            let density_gap = l1_mid(&dens, &double);
            let density_radii = dens.l1_error.hi() + double.l1_error.hi() + max_rad(&dens) + max_rad(&double);
            if tau == DERIVATIVE_TAU {
                let adj = adjoint(&double, &p)?;
                let d = derivative_with(&p, &double, &cert, &adj, 4)?;
                extra = Some((d, dens));
            }
            println!(
                "  tau={tau:.3} rho=[{:.7}, {:.7}] width={:.2e} ({seconds:.1}s), N={DOUBLE_FINE} width={:.2e}",
                rot.value.lo(),
                rot.value.hi(),
                rot.value.width(),
                rot_double.value.width()
            );
            rows.push(Row { tau, rho: rot.value, rho_double: rot_double.value, density_gap, density_radii, seconds });
        }
        let (derivative, density) = extra.expect("derivative parameter is in the sweep");
        Ok(Sweep { rows, derivative, density })
    }
}

fn row(s: &'static Sweep, tau: f64) -> &'static Row {
    s.rows.iter().find(|r| r.tau == tau).expect("tau in the sweep")
}

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn table_reproduction() -> Outcome {
    let s = sweep()?;
    let mut bad = Vec::new();
    for &(tau, lo, hi) in &PUBLISHED {
        let r = row(s, tau);
        if !r.rho.overlaps(IVal::new(lo, hi)) {
            bad.push(format!("tau={tau} misses [{lo}, {hi}]"));
        }
    }
    let widest = s.rows.iter().map(|r| r.rho.width()).fold(0.0, f64::max);
    let slowest = s.rows.iter().map(|r| r.seconds).fold(0.0, f64::max);
    if widest > 5e-3 {
        bad.push(format!("width {widest:.2e} > 5e-3"));
    }
    if slowest > 600.0 {
        bad.push(format!("{slowest:.0}s per tau"));
    }
    check(
        bad.is_empty(),
        format!(
            "{} published rows intersected, max width {widest:.2e}, max {slowest:.1}s per tau, N={} {}",
            PUBLISHED.len(),
            PLAN.fine,
            bad.join("; ")
        ),
    )
}

fn nonmonotonicity() -> Outcome {
    let rows: Vec<(f64, IVal)> = sweep()?.rows.iter().map(|r| (r.tau, r.rho)).collect();
    let rep = prove_nonmonotone(&rows).map_err(|e| e.to_string())?;
    let dec = rep
        .consecutive
        .iter()
        .find(|c| c.relation == Relation::Decrease && c.tau_j <= 0.715)
        .map(|c| (c.tau_i, c.tau_j));
    let inc = rep.consecutive.iter().any(|c| c.relation == Relation::Increase && c.tau_i == 0.715 && c.tau_j == 0.716);
    let out = std::env::temp_dir().join(format!("arnold-cert-nonmonotone-{}.json", std::process::id()));
    let args = ["arnold-cert", "prove-nonmonotone", "--eps", "1.4", "--xi", "0.01", "--tau", "0.714:0.716:0.001", "--coarse", "2048", "-o"];
    let code = arnold_cert::cli::run(args.iter().map(|s| s.into()).chain([out.clone().into_os_string()]));
    let _ = std::fs::remove_file(&out);
    check(
        rep.verdict == Verdict::NonMonotone && dec.is_some() && inc && code == 0,
        format!("decrease {dec:?}, increase 0.715->0.716 {inc}, CLI exit {code}"),
    )
}

fn mixing_certificate() -> Outcome {
    let t0 = Instant::now();
    let p = NoisyMapParams::new(0.7502, 1.4, 0.1).unwrap();
    let cert = certify_mixing(&p, &Partition::new(1024).unwrap(), 2000).map_err(|e| e.to_string())?;
    let theta = extend_mixing_map(&cert, &p.kernel()).map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    check(
        cert.is_true_operator() && theta.lo() >= 2e-4 && secs <= 900.0,
        format!("N=1024 n={} alpha<={:.4} theta>={:.4e} ({secs:.1}s)", cert.n, cert.alpha.hi(), theta.lo()),
    )
}

fn coverage() -> Outcome {
    let proof = cover_interval(1.4, 0.1, 0.75, 0.752, &Partition::new(512).unwrap(), 2000, 10).map_err(|e| e.to_string())?;
    let json = serde_json::to_string(&proof).unwrap();
    let reread = serde_json::from_str(&json).unwrap();
    let covered = check_coverage(&reread).map_err(|e| e.to_string())?;
    check(
        proof.complete && proof.centers.len() <= 10 && covered.lo() <= 0.75 && covered.hi() >= 0.752,
        format!("{} centers, checker covers [{:.6}, {:.6}]", proof.centers.len(), covered.lo(), covered.hi()),
    )
}

fn trivial_cases() -> Outcome {
    let plan = GridPlan { coarse: 256, coarse_limit: 1024, fine: 2048, n_max: 2000 };
    let p = NoisyMapParams::new(0.3, 0.0, 0.1).unwrap();
    let (_, dens, rot) = rotation_at(&p, &plan).map_err(|e| e.to_string())?;
    let ones = vec![1.0; dens.values.len()];
    let dist = l1_distance(&dens.midpoints(), &ones);
    // With no projection error the radius is the resolvent times the residual.
    let residual_only = dens.l1_error.hi() <= dens.resolvent_grid * dens.residual * (1.0 + 1e-9) && dens.l1_error.hi() < 1e-9;
    let tight = rot.value.width() < 1e-9;
    let d = derivative_at(&p, &plan, 4).map_err(|e| e.to_string())?;
    let q = NoisyMapParams::new(0.3, 1.4, 1.0).unwrap();
    let c = certify_mixing(&q, &Partition::new(64).unwrap(), 10).map_err(|e| e.to_string())?;
    check(
        dist <= dens.l1_error.hi() + max_rad(&dens)
            && residual_only
            && tight
            && rot.value.contains(0.3)
            && d.value.contains(1.0)
            && d.value.width() < 1e-9
            && c.n == 1,
        format!(
            "eps=0: |f-1|={dist:.1e} error={:.1e} rho={:?} D={:?}; xi=1: n={}",
            dens.l1_error.hi(),
            rot.value,
            d.value,
            c.n
        ),
    )
}

fn oracle() -> Outcome {
    let n = 16;
    let p = NoisyMapParams::new(0.709, 1.4, 0.01).unwrap();
    let m = assemble_deterministic(&p, &Partition::new(n).unwrap()).map_err(|e| e.to_string())?;
    let samples = 1_000_000 / n;
    // Each cell boundary has at most three preimages; a midpoint rule
    // misplaces at most one sample per preimage.
    let tol = 6.0 / samples as f64 + 1e-12;
    let mut worst = 0.0f64;
    let mut misses = 0;
    for j in 0..n {
        let mut counts = vec![0u64; n];
        for s in 0..samples {
            let x = (j as f64 + (s as f64 + 0.5) / samples as f64) / n as f64;
            let y = x + p.tau - p.eps / std::f64::consts::TAU * (std::f64::consts::TAU * x).sin();
            let y = y - y.floor();
            counts[((y * n as f64) as usize).min(n - 1)] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let q = c as f64 / samples as f64;
            let e = m.entry(i, j);
            let gap = (e.lo() - q).max(q - e.hi()).max(0.0);
            worst = worst.max(gap);
            if gap > tol {
                misses += 1;
            }
        }
    }
    let noise = assemble_noise(&NoiseKernel::new(0.2), &Partition::new(10).unwrap()).map_err(|e| e.to_string())?;
    let circulant = (0..10).all(|j| {
        (0..10).all(|i| {
            let want = match (i + 10 - j) % 10 {
                0 => 0.5,
                1 | 9 => 0.25,
                _ => 0.0,
            };
            noise.entry(i, j).contains(want)
        })
    });
    check(
        misses == 0 && circulant,
        format!("{misses} entries off oracle (worst gap {worst:.1e}, tol {tol:.1e}), circulant {circulant}"),
    )
}

fn symmetry() -> Outcome {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let plan = GridPlan { coarse: 128, coarse_limit: 2048, fine: 1024, n_max: 2000 };
    let mut bad = Vec::new();
    for _ in 0..20 {
        let tau: f64 = rng.random_range(0.01..0.99);
        let eps: f64 = rng.random_range(0.0..1.4);
        let xi: f64 = rng.random_range(0.05..0.5);
        let a = rotation_at(&NoisyMapParams::new(tau, eps, xi).unwrap(), &plan).map_err(|e| e.to_string())?;
        let b = rotation_at(&NoisyMapParams::new(1.0 - tau, eps, xi).unwrap(), &plan).map_err(|e| e.to_string())?;
        let mirrored = IVal::new(1.0 - b.2.value.hi(), 1.0 - b.2.value.lo());
        if !a.2.value.overlaps(mirrored) {
            bad.push(format!("({tau}, {eps}, {xi})"));
        }
    }
    check(bad.is_empty(), format!("20 random parameter triples, {} violations {}", bad.len(), bad.join(" ")))
}

fn linear_response() -> Outcome {
    let s = sweep()?;
    let d = &s.derivative;
    let h = 1e-3;
    let quotient = |a: IVal, b: IVal| IVal::new((b.lo() - a.hi()) / h, (b.hi() - a.lo()) / h);
    let (r0, r1, r2) = (row(s, 0.708).rho, row(s, 0.709).rho, row(s, 0.710).rho);
    let forward = quotient(r1, r2);
    let backward = quotient(r0, r1);
    // Curvature allowance: the derivative at the left end differs from the
    // forward quotient by at most the spread of neighbouring quotients.
    let allowance = (forward.hi() - backward.lo()).abs().max((backward.hi() - forward.lo()).abs());
    let widened = forward.inflate(allowance);
    check(
        d.value.overlaps(widened) && d.value.hi() < 0.0,
        format!(
            "D=[{:.3}, {:.3}] forward quotient [{:.3}, {:.3}] allowance {allowance:.3}",
            d.value.lo(),
            d.value.hi(),
            forward.lo(),
            forward.hi()
        ),
    )
}

fn monte_carlo() -> Outcome {
    let s = sweep()?;
    let t0 = Instant::now();
    let p = NoisyMapParams::new(DERIVATIVE_TAU, EPS, XI).unwrap();
    let cfg = McConfig { n_ic: 1000, n_it: 100_000, n_bins: 1000, ..McConfig::default() };
    let hist = orbit_histogram(&p, &cfg).map_err(|e| e.to_string())?;
    let cmp = compare_measures(&s.density.values, s.density.l1_error.hi(), &hist);
    let orbit_secs = t0.elapsed().as_secs_f64();
    let profile = |xi: f64| -> Result<(Vec<f64>, f64), String> {
        let t0 = Instant::now();
        let stats = TAUS
            .iter()
            .map(|&t| rotation_mc(&NoisyMapParams::new(t, EPS, xi).unwrap(), &cfg, 1000))
            .collect::<arnold_cert::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        Ok((stats.windows(2).map(|w| t_statistic(&w[0], &w[1])).collect(), t0.elapsed().as_secs_f64()))
    };
    let (t_low, secs_low) = profile(0.01)?;
    let (t_high, secs_high) = profile(0.05)?;
    let non_monotone = t_low.iter().any(|&t| t < -3.0) && t_low.iter().any(|&t| t > 3.0);
    let monotone = t_high.iter().all(|&t| t > -3.0);
    let slowest = orbit_secs.max(secs_low).max(secs_high);
    check(
        cmp.within && non_monotone && monotone && slowest <= 300.0,
        format!(
            "L1 {:.2e} <= {:.2e} + {:.2e}: {}; xi=0.01 t in [{:.0}, {:.0}]; xi=0.05 min t {:.0}; max {slowest:.0}s",
            cmp.distance,
            cmp.radius,
            cmp.envelope,
            cmp.within,
            t_low.iter().copied().fold(f64::INFINITY, f64::min),
            t_low.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            t_high.iter().copied().fold(f64::INFINITY, f64::min)
        ),
    )
}

fn refinement() -> Outcome {
    let s = sweep()?;
    let bad: Vec<String> = s
        .rows
        .iter()
        .filter(|r| !r.rho.overlaps(r.rho_double) || r.density_gap > r.density_radii)
        .map(|r| format!("{}", r.tau))
        .collect();
    let worst = s.rows.iter().map(|r| r.density_gap / r.density_radii).fold(0.0, f64::max);
    check(
        bad.is_empty(),
        format!(
            "N={DOUBLE_FINE} vs {}: rotation and density agree at {} tau, max gap/radius {worst:.2} {}",
            PLAN.fine,
            TAUS.len() - bad.len(),
            bad.join(" ")
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("table-2 rotation numbers", table_reproduction),
        ("non-monotonicity proof", nonmonotonicity),
        ("mixing certificate and extension", mixing_certificate),
        ("coverage of [0.75, 0.752]", coverage),
        ("trivial exactness", trivial_cases),
        ("quadrature oracle and noise circulant", oracle),
        ("rotation symmetry", symmetry),
        ("linear response vs finite differences", linear_response),
        ("Monte Carlo cross-validation", monte_carlo),
        ("refinement consistency", refinement),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panic: {}", msg.unwrap_or_default()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{secs:.1}s]", k + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{secs:.1}s]", k + 1)
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
