use super::{extend_mixing_map, MixingCertificate};
use crate::error::{Error, Result};
use crate::rigor::{format_lower, format_upper, parse_enclosure};
use crate::rigor::IVal;
use serde::{Deserialize, Serialize};

const DIGITS: usize = 17;

/// On-disk form of a mixing certificate. Every bound is a decimal string
/// rounded outward, so it can be re-checked without the assembly code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub tau: String,
    pub eps: String,
    pub xi: String,
    #[serde(rename = "N")]
    pub n_cells: usize,
    pub n: usize,
    pub alpha_lo: String,
    pub alpha_hi: String,
    pub theta_lo: String,
    pub theta_hi: String,
    pub e_n: String,
    pub timestamp: String,
    pub code_version: String,
}

impl CertificateFile {
    pub fn new(cert: &MixingCertificate) -> Result<Self> {
        let theta = extend_mixing_map(cert, &cert.params.kernel())?;
        let alpha_hi = format_upper(cert.alpha.hi(), DIGITS);
        let xi = cert.params.xi.to_string();
        // Store the smaller of the two radii so the checker, which only sees
        // the rounded strings, always reproduces it.
        let bound = theta.lo().min(radius(parse_enclosure(&alpha_hi)?.hi(), cert.n, parse_enclosure(&xi)?)?.lo());
        let mut t = bound;
        let theta_lo = loop {
            let s = format_lower(t, DIGITS);
            if parse_enclosure(&s)?.hi() <= bound {
                break s;
            }
            t = t.next_down();
        };
        Ok(CertificateFile {
            tau: cert.params.tau.to_string(),
            eps: cert.params.eps.to_string(),
            xi,
            n_cells: cert.n_cells,
            n: cert.n,
            alpha_lo: format_lower(cert.alpha.lo(), DIGITS),
            alpha_hi,
            theta_lo,
            theta_hi: format_upper(theta.hi(), DIGITS),
            e_n: format_upper(cert.e_n.hi(), DIGITS),
            timestamp: chrono::Utc::now().to_rfc3339(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }

    /// Re-derive the radius from `(n, alpha_hi, xi)` and confirm the stored
    /// lower radius does not exceed it. Returns the certified radius.
    pub fn check(&self) -> Result<f64> {
        let alpha = parse_enclosure(&self.alpha_hi)?.hi();
        if alpha >= 1.0 {
            return Err(Error::IncompatibleCertificate(format!("alpha_hi = {} is not below 1", self.alpha_hi)));
        }
        if self.n == 0 {
            return Err(Error::Parse("n must be positive".into()));
        }
        let theta = radius(alpha, self.n, parse_enclosure(&self.xi)?)?;
        let claimed = parse_enclosure(&self.theta_lo)?.hi();
        if claimed > theta.lo() {
            return Err(Error::IncompatibleCertificate(format!(
                "theta_lo = {} exceeds the recomputed bound {:e}",
                self.theta_lo,
                theta.lo()
            )));
        }
        Ok(parse_enclosure(&self.theta_lo)?.lo())
    }
}

/// `(1 - alpha) / (2 n |rho|_BV)` with `|rho|_BV = 1 + 2 / xi` taken at the
/// smallest `xi` of the enclosure.
fn radius(alpha_hi: f64, n: usize, xi: IVal) -> Result<IVal> {
    let bv = (IVal::ONE + IVal::point(2.0).checked_div(IVal::point(xi.lo()))?).hi();
    (IVal::ONE - IVal::point(alpha_hi)).checked_div(IVal::point(bv).scale(2.0 * n as f64))
}
