//! Mixing certificates, certified stationary densities and parameter-interval
//! coverage.
//!
//! Notation: `L = rho * L_T` is the annealed operator, `pi` the projection on
//! cell averages, `Q = pi L` and `M` its matrix on an `N`-cell partition,
//! `d = 1/N`. For zero-average `g` the following bounds are used:
//!
//! * `|(I - pi) L g|_1 <= (d / xi) |g|_1`, since `Var(L g) <= (2 / xi) |g|_1`
//!   and `|(I - pi) u|_1 <= (d / 2) Var(u)`;
//! * `|L (I - pi) L g|_1 <= K |g|_1` with `K = (1 + eps) (d / xi)^2 / 2`,
//!   from `|int_I w (u - avg u)| <= Lip(w) d^2 Var_I(u) / 8` on each cell;
//! * `|Q^j g|_1 <= min(1, c C_{j-1}) |g|_1` where `c` is the contraction of
//!   the kernel on zero-mass densities and `C_j` bounds `M^j` on zero-mass
//!   grid vectors.
//!
//! Telescoping `L^n - Q^n = sum_k L^k (L - Q) Q^{n-1-k}` gives the rate of
//! the true operator, and the same two constants give resolvent bounds.

mod cover;
mod file;

pub use cover::{check_coverage, cover_interval, CoverageEntry, CoverageProof};
pub use file::CertificateFile;

use crate::dynamics::{NoiseKernel, NoisyMapParams};
use crate::error::{Error, Result};
use crate::rigor::{add_up, div_up, mul_up, sub_down, IVal};
use crate::ulam::{assemble_annealed, discretization_error, NonnegScratch, Partition, StochasticIntervalMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Stop iterating basis vectors once the discrete rate drops below this.
const RATE_TARGET: f64 = 0.05;
/// Power iteration stopping threshold on successive L1 differences.
pub const POWER_TOL: f64 = 1e-14;
pub const POWER_MAX_ITER: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    DiscreteOnly,
    TrueOperator,
}

/// `|L^n g|_1 <= alpha |g|_1` on zero-average `g`, plus the data it came from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixingCertificate {
    pub params: NoisyMapParams,
    pub n_cells: usize,
    pub n: usize,
    pub alpha: IVal,
    /// Bound on `|Q^n|` on zero-average densities.
    pub alpha_discrete: IVal,
    pub scope: Scope,
    pub e_n: IVal,
    /// Kernel contraction on zero-mass densities.
    pub contraction: f64,
    /// `C_j` for `j = 0, 1, ..`: bounds on `M^j` restricted to zero mass.
    pub rates: Vec<f64>,
    /// Upper bound on `sum_j |Q^j|` over zero-average densities.
    pub resolvent_discrete: f64,
    /// Upper bound on `sum_j |L^j|` over zero-average densities.
    pub resolvent: f64,
}

impl MixingCertificate {
    pub fn is_true_operator(&self) -> bool {
        self.scope == Scope::TrueOperator && self.alpha.hi() < 1.0
    }

    /// Same map and noise up to `tau`.
    fn compatible(&self, p: &NoisyMapParams) -> bool {
        self.params.eps == p.eps && self.params.xi == p.xi
    }
}

/// `d / xi` and `K = (1 + eps) (d / xi)^2 / 2` for an `N`-cell grid.
pub fn perturbation_constants(p: &NoisyMapParams, n_cells: usize) -> (f64, f64) {
    let dx = IVal::ONE.checked_div(IVal::point(n_cells as f64) * IVal::point(p.xi)).expect("N xi > 0");
    let k = (dx.sqr() * IVal::point(p.lip_upper())).scale(0.5);
    (dx.hi(), k.hi())
}

/// Iterations without halving the step before the float floor is assumed.
const POWER_STALL: usize = 1000;

/// Float power iteration for the fixed point of `M`, normalized to mass 1.
/// Stops when the L1 step drops below `tol`, after `max_iter` steps, or when
/// the step has stopped shrinking. Returns the vector, the iteration count and
/// the last L1 step.
pub fn power_iteration(m: &StochasticIntervalMatrix, tol: f64, max_iter: usize) -> (Vec<f64>, usize, f64) {
    let n = m.n();
    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    let mut diff = f64::INFINITY;
    let (mut best, mut best_it) = (f64::INFINITY, 0);
    let mut it = 0;
    while it < max_iter {
        m.apply_f64(&x, &mut y);
        let mass: f64 = y.iter().sum::<f64>() / n as f64;
        let mut d = 0.0;
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi = (*yi / mass).max(0.0);
            d += (*yi - xi).abs();
        }
        std::mem::swap(&mut x, &mut y);
        it += 1;
        diff = d / n as f64;
        if diff < tol {
            break;
        }
        if diff < best / 2.0 {
            (best, best_it) = (diff, it);
        } else if it - best_it > POWER_STALL {
            break;
        }
    }
    (x, it, diff)
}

/// `C_j` for `j = 0..=J`, where `J` is the first step with `C_J <= target` or
/// `max_steps`.
fn discrete_rates(m: &StochasticIntervalMatrix, max_steps: usize, target: f64) -> Vec<f64> {
    let n = m.n();
    let (w, _, _) = power_iteration(m, 1e-13, 100_000);
    let mut state: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .map(|a| {
            let mut e = vec![0.0; n];
            e[a] = n as f64;
            (e.clone(), e)
        })
        .collect();
    let mut rates = vec![1.0];
    // Error factor for a plain sum of n nonnegative terms.
    let sum_fac = 1.0 + (n as f64 + 2.0) * f64::EPSILON;
    for _ in 0..max_steps {
        let d: Vec<f64> = state
            .par_iter_mut()
            .map_init(
                || (NonnegScratch::default(), vec![0.0; n], vec![0.0; n]),
                |(scratch, lo, hi), (xl, xh)| {
                    m.apply_nonneg_bounds(xl, xh, lo, hi, scratch);
                    std::mem::swap(xl, lo);
                    std::mem::swap(xh, hi);
                    let mut s = 0.0;
                    for i in 0..n {
                        s += (xh[i] - w[i]).max(w[i] - xl[i]).max(0.0).next_up();
                    }
                    (s * sum_fac / n as f64).next_up()
                },
            )
            .collect();
        let c = d.into_iter().fold(0.0, f64::max);
        rates.push(c);
        if c <= target {
            break;
        }
    }
    rates
}

/// Extend `C_0..=C_m` to `len` entries by submultiplicativity.
fn extend_rates(rates: &[f64], len: usize) -> Vec<f64> {
    let m = rates.len() - 1;
    let mut out: Vec<f64> = rates.iter().map(|c| c.min(1.0)).collect();
    for j in out.len()..len {
        let mut best: f64 = 1.0;
        for i in 1..=m {
            best = best.min(mul_up(out[i], out[j - i]));
        }
        out.push(best);
    }
    out
}

fn rate(rates: &[f64], j: usize) -> f64 {
    rates.get(j).copied().unwrap_or(1.0)
}

/// Bound on `|Q^j|` on zero-average densities.
fn a_bound(rates: &[f64], c: f64, j: usize) -> f64 {
    if j == 0 {
        1.0
    } else {
        mul_up(c, rate(rates, j - 1)).min(1.0)
    }
}

/// Rate of the true operator after `n` steps.
fn alpha_true(rates: &[f64], c: f64, dx: f64, k: f64, n: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..n.saturating_sub(1) {
        s = add_up(s, a_bound(rates, c, j));
    }
    add_up(add_up(a_bound(rates, c, n), mul_up(dx, a_bound(rates, c, n - 1))), mul_up(k, s))
}

/// `sum_j C_j <= sum_{j<m} C_j / (1 - C_m)`.
fn discrete_resolvent(rates: &[f64]) -> f64 {
    let m = rates.len() - 1;
    let cm = rates[m];
    if m == 0 || cm >= 1.0 {
        return f64::INFINITY;
    }
    let mut s = 0.0;
    for &c in &rates[..m] {
        s = add_up(s, c.min(1.0));
    }
    div_up(s, sub_down(1.0, cm))
}

/// Analyse `L` on the `part` grid: discrete rates, the best `(n, alpha)` and
/// resolvent bounds. The result may have discrete-only scope.
pub fn analyze_mixing(p: &NoisyMapParams, part: &Partition, n_max: usize) -> Result<MixingCertificate> {
    p.require_noise()?;
    if n_max == 0 {
        return Err(Error::InvalidParams("n_max must be at least 1".into()));
    }
    let kernel = p.kernel();
    let c = kernel.contraction();
    let m = assemble_annealed(p, part)?;
    let rates = if c == 0.0 { vec![1.0] } else { discrete_rates(&m, n_max, RATE_TARGET) };
    let (dx, k) = perturbation_constants(p, part.n());
    let horizon = if c == 0.0 { 1 } else { n_max.min(4 * rates.len()) };
    let ext = extend_rates(&rates, horizon + 1);
    let mut best: Option<(usize, f64, f64)> = None;
    for n in 1..=horizon {
        let a = alpha_true(&ext, c, dx, k, n);
        if a < 1.0 {
            let score = (1.0 - a) / n as f64;
            if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((n, a, score));
            }
        }
    }
    let rm = if c == 0.0 { 0.0 } else { discrete_resolvent(&rates) };
    let rn = if c == 0.0 { 1.0 } else { add_up(1.0, mul_up(c, rm)) };
    let kappa = add_up(dx, mul_up(rn, k));
    let mut r_true = if kappa < 1.0 { div_up(rn, sub_down(1.0, kappa)) } else { f64::INFINITY };
    let e_n = discretization_error(&kernel, part);
    let (n, alpha, scope) = match best {
        Some((n, a, _)) => {
            let mut s = 0.0;
            for j in 0..n {
                s = add_up(s, if j == 0 { 1.0 } else { alpha_true(&ext, c, dx, k, j).min(1.0) });
            }
            r_true = r_true.min(div_up(s, sub_down(1.0, a)));
            (n, a, Scope::TrueOperator)
        }
        None => {
            // Report the best discrete contraction.
            let n = (1..=horizon)
                .min_by(|&x, &y| a_bound(&ext, c, x).total_cmp(&a_bound(&ext, c, y)))
                .unwrap_or(1);
            (n, alpha_true(&ext, c, dx, k, n), Scope::DiscreteOnly)
        }
    };
    Ok(MixingCertificate {
        params: *p,
        n_cells: part.n(),
        n,
        alpha: IVal::new(0.0, alpha),
        alpha_discrete: IVal::new(0.0, a_bound(&ext, c, n)),
        scope,
        e_n,
        contraction: c,
        rates,
        resolvent_discrete: rn,
        resolvent: r_true,
    })
}

/// A true-operator mixing certificate, or an error asking for refinement.
pub fn certify_mixing(p: &NoisyMapParams, part: &Partition, n_max: usize) -> Result<MixingCertificate> {
    let cert = analyze_mixing(p, part, n_max)?;
    if !cert.is_true_operator() {
        return Err(Error::NoCertificate {
            n: part.n(),
            reason: format!(
                "no alpha < 1 within {n_max} steps (best {:.4} at n = {})",
                cert.alpha.hi(),
                cert.n
            ),
        });
    }
    Ok(cert)
}

/// Doubling `N` from `n_start` up to `n_limit` until the resolvent of the true
/// operator is bounded.
pub fn certify_resolvent(p: &NoisyMapParams, n_start: usize, n_limit: usize, n_max: usize) -> Result<MixingCertificate> {
    let mut n = n_start;
    loop {
        let cert = analyze_mixing(p, &Partition::new(n)?, n_max)?;
        if cert.resolvent.is_finite() {
            return Ok(cert);
        }
        if 2 * n > n_limit {
            return Err(Error::NoCertificate {
                n,
                reason: format!("resolvent not bounded up to N = {n_limit}"),
            });
        }
        n *= 2;
    }
}

/// Radius `theta = (1 - alpha) / (2 n |rho|_BV)` of the `tau`-ball on which
/// the certificate persists. The lower end is the certified radius.
pub fn extend_mixing_map(cert: &MixingCertificate, kernel: &NoiseKernel) -> Result<IVal> {
    if !cert.is_true_operator() {
        return Err(Error::IncompatibleCertificate(format!(
            "alpha = {} is not below 1 for the true operator",
            cert.alpha.hi()
        )));
    }
    let num = IVal::ONE - IVal::point(cert.alpha.hi());
    let den = kernel.bv_norm.scale(2.0 * cert.n as f64);
    num.checked_div(den)
}

/// Rate after replacing the kernel by one at L1 distance `l1_dist`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseExtension {
    pub alpha: IVal,
    pub valid: bool,
}

pub fn extend_mixing_noise(cert: &MixingCertificate, l1_dist: IVal) -> NoiseExtension {
    let alpha = IVal::new(cert.alpha.lo(), cert.alpha.hi()) + l1_dist.scale(cert.n as f64);
    NoiseExtension { alpha, valid: alpha.hi() < 1.0 }
}

/// L1 distance between centered uniform densities of widths `a` and `b`.
pub fn uniform_l1_distance(a: f64, b: f64) -> IVal {
    let (s, l) = if a <= b { (a, b) } else { (b, a) };
    (IVal::ONE - IVal::point(s).div_scalar(l).expect("positive width")).scale(2.0)
}

/// Piecewise-constant density with a certified L1 radius.
#[derive(Clone, Debug)]
pub struct CertifiedDensity {
    pub params: NoisyMapParams,
    pub part: Partition,
    /// Enclosures of the cell values of a density of mass exactly 1.
    pub values: Vec<IVal>,
    pub l1_error: IVal,
    /// `|M f - f|_1` over the enclosure.
    pub residual: f64,
    pub iterations: usize,
    /// Bound on the resolvent of the true operator.
    pub resolvent: f64,
    /// Bound on the resolvent of `M` on zero-mass grid vectors.
    pub resolvent_grid: f64,
    pub matrix: Arc<StochasticIntervalMatrix>,
}

impl CertifiedDensity {
    pub fn midpoints(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.mid()).collect()
    }
}

/// Fine-grid resolvent bound from the true-operator bound `r_true`.
pub fn grid_resolvent(p: &NoisyMapParams, n_cells: usize, r_true: f64) -> f64 {
    let (dx, k) = perturbation_constants(p, n_cells);
    let kappa = add_up(dx, mul_up(r_true, k));
    if kappa < 1.0 {
        div_up(r_true, sub_down(1.0, kappa))
    } else {
        f64::INFINITY
    }
}

/// Certified stationary density on `part`, using the resolvent bound of `cert`.
pub fn stationary_measure(p: &NoisyMapParams, part: &Partition, cert: &MixingCertificate) -> Result<CertifiedDensity> {
    if !cert.compatible(p) {
        return Err(Error::IncompatibleCertificate(format!(
            "certificate is for eps = {}, xi = {}",
            cert.params.eps, cert.params.xi
        )));
    }
    if cert.params.tau != p.tau {
        return Err(Error::IncompatibleCertificate(format!(
            "certificate is for tau = {}, not {}",
            cert.params.tau, p.tau
        )));
    }
    if !cert.resolvent.is_finite() {
        return Err(Error::IncompatibleCertificate("certificate carries no resolvent bound".into()));
    }
    let m = Arc::new(assemble_annealed(p, part)?);
    stationary_from_matrix(p, part, m, cert.resolvent)
}

pub(crate) fn stationary_from_matrix(
    p: &NoisyMapParams,
    part: &Partition,
    m: Arc<StochasticIntervalMatrix>,
    r_true: f64,
) -> Result<CertifiedDensity> {
    let n = part.n();
    let r_grid = grid_resolvent(p, n, r_true);
    let (fhat, iterations) = if p.eps == 0.0 {
        (vec![1.0; n], 0)
    } else {
        let (x, it, _) = power_iteration(&m, POWER_TOL, POWER_MAX_ITER);
        (x, it)
    };
    // Rescale to an enclosure of a mass-one vector.
    let sum: IVal = fhat.iter().map(|&v| IVal::point(v)).sum();
    let mass = sum.div_scalar(n as f64)?;
    let values: Vec<IVal> = fhat.iter().map(|&v| IVal::point(v).checked_div(mass)).collect::<Result<_>>()?;
    let image = m.apply(&values)?;
    let res: Vec<IVal> = image.iter().zip(&values).map(|(a, b)| *a - *b).collect();
    let residual = crate::rigor::l1_norm_upper(&res);
    let grid_part = mul_up(r_grid, residual);
    let (dx, k) = perturbation_constants(p, n);
    let proj = if p.eps == 0.0 {
        // Lebesgue measure is invariant, so the grid fixed point is exact.
        0.0
    } else {
        // f - f_N = (I - L)^{-1} (I - pi) L f_N
        add_up(dx, mul_up(r_true, k)).min(mul_up(r_true, dx))
    };
    let l1 = add_up(proj, grid_part).min(2.0);
    Ok(CertifiedDensity {
        params: *p,
        part: *part,
        values,
        l1_error: IVal::new(0.0, l1),
        residual,
        iterations,
        resolvent: r_true,
        resolvent_grid: r_grid,
        matrix: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_width_noise_mixes_in_one_step() {
        let p = NoisyMapParams::new(0.3, 1.4, 1.0).unwrap();
        let part = Partition::new(64).unwrap();
        let c = certify_mixing(&p, &part, 10).unwrap();
        assert_eq!(c.n, 1);
        assert!(c.alpha.contains(1.0 / 64.0));
        assert!(c.alpha.hi() <= 1.0 / 64.0 * (1.0 + 1e-12));
    }

    #[test]
    fn theta_formula() {
        let p = NoisyMapParams::new(0.3, 1.4, 0.1).unwrap();
        let cert = MixingCertificate {
            params: p,
            n_cells: 64,
            n: 10,
            alpha: IVal::new(0.0, 0.5),
            alpha_discrete: IVal::new(0.0, 0.4),
            scope: Scope::TrueOperator,
            e_n: IVal::point(0.1),
            contraction: 1.0,
            rates: vec![1.0],
            resolvent_discrete: 1.0,
            resolvent: 1.0,
        };
        let t = extend_mixing_map(&cert, &p.kernel()).unwrap();
        assert!(t.contains(0.5 / 420.0) && t.lo() <= 0.5 / 420.0);
        let e = extend_mixing_noise(&MixingCertificate { alpha: IVal::new(0.0, 0.8), ..cert }, IVal::point(0.01));
        assert!(e.alpha.contains(0.9) && e.valid);
    }

    #[test]
    fn uniform_distance() {
        let d = uniform_l1_distance(0.1, 0.11);
        assert!(d.contains(2.0 * (1.0 - 0.1 / 0.11)));
    }

    #[test]
    fn submultiplicative_extension() {
        let r = extend_rates(&[1.0, 0.5, 0.2], 5);
        assert_eq!(rate(&r, 2), 0.2);
        assert!((rate(&r, 4) - 0.04).abs() < 1e-15);
        assert!((rate(&r, 3) - 0.1).abs() < 1e-15);
    }
}
