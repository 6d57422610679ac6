use super::{certify_mixing, extend_mixing_map};
use crate::dynamics::NoisyMapParams;
use crate::error::{Error, Result};
use crate::rigor::{format_lower, format_upper, parse_enclosure};
use crate::rigor::{add_down, sub_up, IVal};
use crate::ulam::Partition;
use serde::{Deserialize, Serialize};

const SAFETY: f64 = 0.9;
const RETRIES: usize = 6;

/// One certified center: every `tau'` with `|tau' - tau| < theta` mixes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageEntry {
    /// Exact center, written so that it parses back to the same double.
    pub tau: String,
    pub theta_lo: String,
    pub theta_hi: String,
    pub n: usize,
    pub alpha_hi: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageProof {
    pub eps: f64,
    pub xi: f64,
    #[serde(rename = "N")]
    pub n_cells: usize,
    pub tau_lo: f64,
    pub tau_hi: f64,
    pub centers: Vec<CoverageEntry>,
    /// Interval covered by the overlap chain, if the chain is unbroken.
    pub covered: Option<IVal>,
    /// First uncovered stretch when the budget ran out.
    pub gap: Option<IVal>,
    pub complete: bool,
}

struct Center {
    tau: f64,
    theta: IVal,
    n: usize,
    alpha: f64,
}

fn certify_center(p: &NoisyMapParams, part: &Partition, n_max: usize) -> Result<Center> {
    let cert = certify_mixing(p, part, n_max)?;
    let theta = extend_mixing_map(&cert, &p.kernel())?;
    Ok(Center { tau: p.tau, theta, n: cert.n, alpha: cert.alpha.hi() })
}

fn left(c: &Center) -> f64 {
    sub_up(c.tau, c.theta.lo())
}

fn right(c: &Center) -> f64 {
    add_down(c.tau, c.theta.lo())
}

/// Cover `[tau_lo, tau_hi]` by certified `tau`-balls, stepping adaptively.
/// Stops with a partial proof after `max_centers` centers or when no
/// overlapping center can be certified.
pub fn cover_interval(
    eps: f64,
    xi: f64,
    tau_lo: f64,
    tau_hi: f64,
    part: &Partition,
    n_max: usize,
    max_centers: usize,
) -> Result<CoverageProof> {
    if !(tau_lo < tau_hi) {
        return Err(Error::InvalidParams(format!("empty interval [{tau_lo}, {tau_hi}]")));
    }
    let base = NoisyMapParams::new(tau_lo, eps, xi)?;
    base.require_noise()?;
    let mut chain = vec![certify_center(&base, part, n_max)?];
    let mut gap = None;
    while right(chain.last().unwrap()) <= tau_hi {
        if chain.len() >= max_centers {
            gap = Some(IVal::new(right(chain.last().unwrap()), tau_hi));
            break;
        }
        let prev = chain.last().unwrap();
        let reach = right(prev);
        let mut predicted = prev.theta.lo();
        let mut next = None;
        for _ in 0..RETRIES {
            let tau = (prev.tau + SAFETY * (prev.theta.lo() + predicted)).min(tau_hi);
            if tau <= prev.tau {
                break;
            }
            match certify_center(&base.with_tau(tau), part, n_max) {
                Ok(c) if left(&c) < reach => {
                    next = Some(c);
                    break;
                }
                Ok(c) => predicted = c.theta.lo().min(predicted * 0.5),
                Err(Error::NoCertificate { .. }) | Err(Error::IncompatibleCertificate(_)) => predicted *= 0.5,
                Err(e) => return Err(e),
            }
        }
        match next {
            Some(c) => chain.push(c),
            None => {
                gap = Some(IVal::new(reach, tau_hi));
                break;
            }
        }
    }
    let centers: Vec<CoverageEntry> = chain
        .iter()
        .map(|c| CoverageEntry {
            tau: c.tau.to_string(),
            theta_lo: format_lower(c.theta.lo(), 17),
            theta_hi: format_upper(c.theta.hi(), 17),
            n: c.n,
            alpha_hi: format_upper(c.alpha, 17),
        })
        .collect();
    let mut proof = CoverageProof {
        eps,
        xi,
        n_cells: part.n(),
        tau_lo,
        tau_hi,
        centers,
        covered: None,
        gap,
        complete: false,
    };
    let checked = check_coverage(&proof)?;
    proof.complete = proof.gap.is_none() && checked.lo() < tau_lo && checked.hi() > tau_hi;
    proof.covered = Some(checked);
    Ok(proof)
}

/// Re-verify the overlap chain from the `(center, theta_lo)` pairs alone.
/// Returns an interval contained in the union of the open balls.
pub fn check_coverage(proof: &CoverageProof) -> Result<IVal> {
    let mut balls = Vec::with_capacity(proof.centers.len());
    for e in &proof.centers {
        let c = parse_enclosure(&e.tau)?;
        let t = parse_enclosure(&e.theta_lo)?.lo();
        if !(t > 0.0) {
            return Err(Error::Parse(format!("radius {} is not positive", e.theta_lo)));
        }
        balls.push((sub_up(c.hi(), t), add_down(c.lo(), t)));
    }
    if balls.is_empty() {
        return Err(Error::Inconclusive("no centers".into()));
    }
    balls.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (lo, mut hi) = balls[0];
    for &(l, h) in &balls[1..] {
        if l >= hi {
            return Err(Error::Inconclusive(format!("chain broken between {hi:e} and {l:e}")));
        }
        hi = hi.max(h);
    }
    Ok(IVal::new(lo, hi))
}
