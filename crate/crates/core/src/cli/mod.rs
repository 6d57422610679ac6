//! Command-line driver. `run` parses arguments, executes one subcommand and
//! returns the process exit code: 0 when the proof or computation
//! succeeded, 2 when it was inconclusive, 1 on error.

mod args;

pub use args::{parse_tau_range, Cli, Command, Common};

use crate::certify::{
    analyze_mixing, certify_resolvent, check_coverage, cover_interval, power_iteration, stationary_measure,
    CertificateFile, CoverageProof, POWER_MAX_ITER, POWER_TOL,
};
use crate::dynamics::NoisyMapParams;
use crate::error::{Error, Result};
use crate::montecarlo::{l1_distance, orbit_histogram, rebin, rotation_mc, t_statistic, ulam_mc};
use crate::response::{adjoint, derivative_with, prove_nonmonotone, rotation_at, rotation_with, GridPlan, Verdict};
use crate::rigor::{add_up, DecimalInterval, IVal};
use crate::ulam::{assemble_annealed, Partition};
use clap::Parser;
use serde_json::{json, Value};
use std::ffi::OsString;
use std::io::Write;
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const THREADS_ENV: &str = "ARNOLD_CERT_THREADS";

const DIGITS: usize = 17;

fn dec(x: IVal) -> DecimalInterval {
    DecimalInterval::from_ival(x, DIGITS)
}

/// Outcome of one subcommand before it is written out.
struct Outcome {
    status: &'static str,
    code: i32,
    result: Value,
    csv: Option<String>,
}

impl Outcome {
    fn ok(result: Value) -> Self {
        Outcome { status: "ok", code: EXIT_OK, result, csv: None }
    }

    fn inconclusive(result: Value) -> Self {
        Outcome { status: "inconclusive", code: EXIT_INCONCLUSIVE, result, csv: None }
    }

    fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let raw: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let raw = match args::splice_config(raw) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let cli = match Cli::try_parse_from(raw) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let common = cli.command.common();
    if let Some(k) = common.threads {
        // Ignore the error if a pool already exists (repeated calls in tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
    }
    let start = Instant::now();
    let out = dispatch(&cli.command)?;
    let envelope = json!({
        "command": cli.command.name(),
        "status": out.status,
        "code_version": env!("CARGO_PKG_VERSION"),
        "timestamp": chrono::Utc::now().to_rfc3339(),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "threads": rayon::current_num_threads(),
        "config": serde_json::to_value(&cli.command).map_err(Error::from)?,
        "result": out.result,
    });
    let text = serde_json::to_string_pretty(&envelope).map_err(Error::from)?;
    match &common.output {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => {
            let mut so = std::io::stdout().lock();
            writeln!(so, "{text}")?;
        }
    }
    if let (Some(path), Some(csv)) = (&common.csv, &out.csv) {
        std::fs::write(path, csv)?;
    }
    Ok(out.code)
}

fn params(tau: f64, eps: f64, xi: f64) -> Result<NoisyMapParams> {
    NoisyMapParams::new(tau, eps, xi)
}

fn plan(coarse: usize, fine: usize, n_max: usize) -> GridPlan {
    GridPlan { coarse, coarse_limit: coarse.max(8192), fine, n_max }
}

fn dispatch(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::CertifyMixing { map, cells, n_max, .. } => {
            let p = params(map.tau, map.eps, map.xi)?;
            let cert = analyze_mixing(&p, &Partition::new(*cells)?, *n_max)?;
            if !cert.is_true_operator() {
                return Ok(Outcome::inconclusive(json!({
                    "reason": format!("no alpha < 1 at N = {cells}; refine"),
                    "best_n": cert.n,
                    "best_alpha_hi": cert.alpha.hi(),
                })));
            }
            let file = CertificateFile::new(&cert)?;
            file.check()?;
            Ok(Outcome::ok(json!({
                "certificate": file,
                "scope": cert.scope,
                "contraction": cert.contraction,
                "rates": cert.rates,
                "resolvent": cert.resolvent,
            })))
        }
        Command::Cover { eps, xi, tau, cells, n_max, max_centers, .. } => {
            let (lo, hi) = args::parse_interval(tau)?;
            let proof = cover_interval(*eps, *xi, lo, hi, &Partition::new(*cells)?, *n_max, *max_centers)?;
            let value = serde_json::to_value(&proof).map_err(Error::from)?;
            Ok(if proof.complete { Outcome::ok(value) } else { Outcome::inconclusive(value) })
        }
        Command::Check { file, .. } => {
            let text = std::fs::read_to_string(file)?;
            let v: Value = serde_json::from_str(&text)?;
            let body = v.get("result").cloned().unwrap_or(v);
            if let Ok(proof) = serde_json::from_value::<CoverageProof>(body.clone()) {
                let covered = check_coverage(&proof)?;
                let ok = covered.lo() < proof.tau_lo && covered.hi() > proof.tau_hi;
                let r = json!({ "kind": "coverage", "covered": dec(covered), "centers": proof.centers.len(), "complete": ok });
                return Ok(if ok { Outcome::ok(r) } else { Outcome::inconclusive(r) });
            }
            let cert_value = body.get("certificate").cloned().unwrap_or(body);
            let cert: CertificateFile = serde_json::from_value(cert_value)?;
            let theta = cert.check()?;
            Ok(Outcome::ok(json!({ "kind": "mixing", "theta_lo": theta })))
        }
        Command::Stationary { map, grid, fast, .. } => {
            let p = params(map.tau, map.eps, map.xi)?;
            if *fast {
                let m = assemble_annealed(&p, &Partition::new(grid.cells)?)?;
                let (f, it, step) = power_iteration(&m, POWER_TOL, POWER_MAX_ITER);
                let csv = density_csv(f.iter().map(|&v| (v, v)));
                return Ok(Outcome::ok(json!({ "mode": "fast", "N": grid.cells, "iterations": it, "last_step": step })).with_csv(csv));
            }
            let cert = certify_resolvent(&p, grid.coarse, grid.coarse.max(8192), grid.n_max)?;
            let dens = stationary_measure(&p, &Partition::new(grid.cells)?, &cert)?;
            let csv = density_csv(dens.values.iter().map(|v| (v.lo(), v.hi())));
            let mass: IVal = dens.values.iter().copied().sum::<IVal>().div_scalar(grid.cells as f64)?;
            Ok(Outcome::ok(json!({
                "mode": "certified",
                "N": grid.cells,
                "coarse_N": cert.n_cells,
                "l1_error": dec(dens.l1_error),
                "residual": dens.residual,
                "mass": dec(mass),
                "iterations": dens.iterations,
                "resolvent": cert.resolvent,
            }))
            .with_csv(csv))
        }
        Command::Rotation { map, grid, fast, .. } => {
            let p = params(map.tau, map.eps, map.xi)?;
            if *fast {
                let m = assemble_annealed(&p, &Partition::new(grid.cells)?)?;
                let (f, _, _) = power_iteration(&m, POWER_TOL, POWER_MAX_ITER);
                let obs = crate::dynamics::observable(&p);
                let n = grid.cells;
                let est = (0..n).map(|i| obs.cell_average(i, n).mid() * f[i]).sum::<f64>() / n as f64;
                return Ok(Outcome::ok(json!({ "mode": "fast", "N": n, "estimate": est })));
            }
            let (_, _, rot) = rotation_at(&p, &plan(grid.coarse, grid.cells, grid.n_max))?;
            Ok(Outcome::ok(json!({
                "mode": "certified",
                "tau": p.tau, "eps": p.eps, "xi": p.xi, "N": rot.n_cells,
                "value": dec(rot.value),
                "crude": dec(rot.crude),
                "density_error": rot.density_error,
                "quadrature_error": rot.quadrature_error,
            })))
        }
        Command::SweepRotation { eps, xi, tau, grid, .. } => {
            let taus = parse_tau_range(tau)?;
            let rows = sweep(*eps, *xi, &taus, grid)?;
            let ok = rows.iter().all(|r| r.1.is_ok());
            let out = json!({ "rows": rows_json(&rows, *eps, *xi, grid.cells) });
            let csv = sweep_csv(&rows, *eps, *xi, grid.cells);
            Ok(if ok { Outcome::ok(out) } else { Outcome::inconclusive(out) }.with_csv(csv))
        }
        Command::ProveNonmonotone { eps, xi, tau, grid, .. } => {
            let taus = parse_tau_range(tau)?;
            let rows = sweep(*eps, *xi, &taus, grid)?;
            let csv = sweep_csv(&rows, *eps, *xi, grid.cells);
            let certified: Vec<(f64, IVal)> = rows.iter().filter_map(|(t, r)| r.as_ref().ok().map(|v| (*t, *v))).collect();
            let table = rows_json(&rows, *eps, *xi, grid.cells);
            match prove_nonmonotone(&certified) {
                Ok(rep) => {
                    let body = json!({ "rows": table, "witness": rep });
                    Ok(if rep.verdict == Verdict::NonMonotone { Outcome::ok(body) } else { Outcome::inconclusive(body) }
                        .with_csv(csv))
                }
                Err(Error::Inconclusive(msg)) => {
                    Ok(Outcome::inconclusive(json!({ "rows": table, "reason": msg })).with_csv(csv))
                }
                Err(e) => Err(e),
            }
        }
        Command::Derivative { map, grid, m_blocks, .. } => {
            let p = params(map.tau, map.eps, map.xi)?;
            let cert = certify_resolvent(&p, grid.coarse, grid.coarse.max(8192), grid.n_max)?;
            let dens = stationary_measure(&p, &Partition::new(grid.cells)?, &cert)?;
            let adj = adjoint(&dens, &p)?;
            let d = derivative_with(&p, &dens, &cert, &adj, *m_blocks)?;
            let rot = rotation_with(&dens, &p, &adj)?;
            Ok(Outcome::ok(json!({
                "tau": p.tau, "eps": p.eps, "xi": p.xi, "N": d.n_cells, "coarse_N": cert.n_cells,
                "value": dec(d.value),
                "discrete": dec(d.discrete),
                "budget": d.budget,
                "neumann_terms": d.neumann_terms,
                "neumann_estimate": d.neumann_estimate,
                "tail_bound": dec(d.tail_bound),
                "rotation": dec(rot.value),
            })))
        }
        Command::McUlam { map, cells, mc, .. } => {
            let p = params(map.tau, map.eps, map.xi)?;
            let cfg = mc.config();
            let m = ulam_mc(&p, &Partition::new(*cells)?, &cfg)?;
            let st = m.stationary(1e-14, POWER_MAX_ITER);
            let mut csv = String::from("from,to,probability\n");
            for (j, row) in m.rows.iter().enumerate() {
                for &(i, c) in row {
                    csv.push_str(&format!("{j},{i},{}\n", c as f64 / m.samples as f64));
                }
            }
            Ok(Outcome::ok(json!({
                "N": cells, "samples_per_cell": m.samples, "seed": cfg.seed,
                "stationary": st,
            }))
            .with_csv(csv))
        }
        Command::McOrbit { map, mc, .. } => {
            let p = params(map.tau, map.eps, map.xi)?;
            let cfg = mc.config();
            let h = orbit_histogram(&p, &cfg)?;
            let csv = histogram_csv(&h.bin_centers(), &h.density);
            Ok(Outcome::ok(json!({
                "bins": h.n_bins, "samples": h.samples, "seed": cfg.seed, "l1_envelope": h.l1_envelope(),
            }))
            .with_csv(csv))
        }
        Command::McRotation { eps, xi, tau, mc, realizations, .. } => {
            let cfg = mc.config();
            let taus = parse_tau_range(tau)?;
            let stats = taus
                .iter()
                .map(|&t| rotation_mc(&params(t, *eps, *xi)?, &cfg, *realizations))
                .collect::<Result<Vec<_>>>()?;
            let t: Vec<f64> = stats.windows(2).map(|w| t_statistic(&w[0], &w[1])).collect();
            let mut csv = String::from("tau,mean,std,realizations,n_it\n");
            for s in &stats {
                csv.push_str(&format!("{},{},{},{},{}\n", s.tau, s.mean, s.std, s.realizations, s.n_it));
            }
            Ok(Outcome::ok(json!({ "rows": stats, "t_consecutive": t, "seed": cfg.seed })).with_csv(csv))
        }
        Command::CompareMeasures { map, grid, mc, .. } => {
            let p = params(map.tau, map.eps, map.xi)?;
            let cert = certify_resolvent(&p, grid.coarse, grid.coarse.max(8192), grid.n_max)?;
            let dens = stationary_measure(&p, &Partition::new(grid.cells)?, &cert)?;
            let cfg = mc.config();
            let h = orbit_histogram(&p, &cfg)?;
            let c = compare_measures(&dens.values, dens.l1_error.hi(), &h);
            let body = json!({
                "N": grid.cells, "bins": h.n_bins, "samples": h.samples, "seed": cfg.seed,
                "l1_distance": c.distance, "certified_radius": c.radius, "statistical_envelope": c.envelope,
                "within": c.within,
            });
            let csv = histogram_csv(&h.bin_centers(), &h.density);
            Ok(if c.within { Outcome::ok(body) } else { Outcome::inconclusive(body) }.with_csv(csv))
        }
    }
}

/// Result of comparing a certified density with an orbit histogram.
#[derive(Clone, Copy, Debug)]
pub struct MeasureComparison {
    pub distance: f64,
    pub radius: f64,
    pub envelope: f64,
    pub within: bool,
}

/// L1 distance after averaging the certified density over the histogram
/// bins. Averaging is an L1 contraction, so the certified radius still
/// applies; the radii of the cell enclosures are added on top.
pub fn compare_measures(values: &[IVal], l1_error: f64, h: &crate::montecarlo::Histogram) -> MeasureComparison {
    let mids: Vec<f64> = values.iter().map(|v| v.mid()).collect();
    let rad = values.iter().map(|v| v.rad()).fold(0.0, f64::max);
    let projected = rebin(&mids, h.n_bins);
    let distance = l1_distance(&projected, &h.density);
    let radius = add_up(l1_error, rad);
    let envelope = h.l1_envelope();
    MeasureComparison { distance, radius, envelope, within: distance <= radius + envelope }
}

type Row = (f64, std::result::Result<IVal, String>);

fn sweep(eps: f64, xi: f64, taus: &[f64], grid: &args::Grid) -> Result<Vec<Row>> {
    use rayon::prelude::*;
    let pl = plan(grid.coarse, grid.cells, grid.n_max);
    taus.par_iter()
        .map(|&t| {
            let p = params(t, eps, xi)?;
            Ok((t, rotation_at(&p, &pl).map(|r| r.2.value).map_err(|e| e.to_string())))
        })
        .collect()
}

fn rows_json(rows: &[Row], eps: f64, xi: f64, n: usize) -> Value {
    Value::Array(
        rows.iter()
            .map(|(t, r)| match r {
                Ok(v) => json!({ "tau": t, "eps": eps, "xi": xi, "N": n, "value": dec(*v), "status": "certified" }),
                Err(e) => json!({ "tau": t, "eps": eps, "xi": xi, "N": n, "status": "failed", "error": e }),
            })
            .collect(),
    )
}

fn sweep_csv(rows: &[Row], eps: f64, xi: f64, n: usize) -> String {
    let mut s = String::from("tau,eps,xi,N,rho_lo,rho_hi,status\n");
    for (t, r) in rows {
        match r {
            Ok(v) => {
                let d = dec(*v);
                s.push_str(&format!("{t},{eps},{xi},{n},{},{},certified\n", d.lo, d.hi));
            }
            Err(_) => s.push_str(&format!("{t},{eps},{xi},{n},,,failed\n")),
        }
    }
    s
}

fn density_csv(values: impl Iterator<Item = (f64, f64)>) -> String {
    let v: Vec<(f64, f64)> = values.collect();
    let n = v.len();
    let mut s = String::from("cell_center,density_lo,density_hi\n");
    for (i, (lo, hi)) in v.into_iter().enumerate() {
        s.push_str(&format!("{},{},{}\n", (i as f64 + 0.5) / n as f64, lo, hi));
    }
    s
}

fn histogram_csv(centers: &[f64], density: &[f64]) -> String {
    let mut s = String::from("bin_center,density\n");
    for (c, d) in centers.iter().zip(density) {
        s.push_str(&format!("{c},{d}\n"));
    }
    s
}
