use super::THREADS_ENV;
use crate::error::{Error, Result};
use crate::montecarlo::McConfig;
use crate::rigor::parse_enclosure;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Parser, Debug, Serialize)]
#[command(name = "arnold-cert", version, about = "Certified numerics for the noisy Arnold circle map")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Worker threads (default: all cores).
    #[arg(long, env = THREADS_ENV)]
    pub threads: Option<usize>,
    /// key=value file with defaults for any long flag; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Write tabular data (densities, sweeps, histograms) here as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Map {
    #[arg(long, allow_hyphen_values = true)]
    pub tau: f64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub xi: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Grid {
    /// Cells of the grid carrying the density.
    #[arg(long = "n", default_value_t = 16384)]
    pub cells: usize,
    /// Starting cells of the grid used for the resolvent certificate.
    #[arg(long, default_value_t = 1024)]
    pub coarse: usize,
    /// Step budget for mixing rates.
    #[arg(long, default_value_t = 2000)]
    pub n_max: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Mc {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Samples per source cell (mc-ulam).
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    /// Orbits or realizations.
    #[arg(long, default_value_t = 1000)]
    pub n_ic: u64,
    /// Iterations per orbit.
    #[arg(long, default_value_t = 100_000)]
    pub n_it: u64,
    #[arg(long, default_value_t = 1000)]
    pub bins: usize,
}

impl Mc {
    pub fn config(&self) -> McConfig {
        McConfig { seed: self.seed, samples_per_cell: self.samples, n_ic: self.n_ic, n_it: self.n_it, n_bins: self.bins }
    }
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Certify mixing of the true operator and the tau-radius it extends to.
    CertifyMixing {
        #[command(flatten)]
        map: Map,
        #[arg(long = "n", default_value_t = 1024)]
        cells: usize,
        #[arg(long, default_value_t = 2000)]
        n_max: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Cover a tau interval `lo:hi` by certified mixing balls.
    Cover {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        xi: f64,
        #[arg(long)]
        tau: String,
        #[arg(long = "n", default_value_t = 512)]
        cells: usize,
        #[arg(long, default_value_t = 2000)]
        n_max: usize,
        #[arg(long, default_value_t = 1000)]
        max_centers: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Re-check a certificate or coverage file without recomputing it.
    Check {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Certified stationary density.
    Stationary {
        #[command(flatten)]
        map: Map,
        #[command(flatten)]
        grid: Grid,
        /// Float estimate only, no certificate.
        #[arg(long)]
        fast: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Certified rotation number.
    Rotation {
        #[command(flatten)]
        map: Map,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        fast: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Rotation enclosures over `--tau a:b:step`.
    SweepRotation {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        xi: f64,
        #[arg(long)]
        tau: String,
        #[command(flatten)]
        grid: Grid,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep and search for a certified decrease followed by an increase.
    ProveNonmonotone {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        xi: f64,
        #[arg(long)]
        tau: String,
        #[command(flatten)]
        grid: Grid,
        #[command(flatten)]
        common: Common,
    },
    /// Certified derivative of the rotation number in tau.
    Derivative {
        #[command(flatten)]
        map: Map,
        #[command(flatten)]
        grid: Grid,
        #[arg(long, default_value_t = 4)]
        m_blocks: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Sampled Ulam matrix.
    McUlam {
        #[command(flatten)]
        map: Map,
        #[arg(long = "n", default_value_t = 64)]
        cells: usize,
        #[command(flatten)]
        mc: Mc,
        #[command(flatten)]
        common: Common,
    },
    /// Histogram of long noisy orbits.
    McOrbit {
        #[command(flatten)]
        map: Map,
        #[command(flatten)]
        mc: Mc,
        #[command(flatten)]
        common: Common,
    },
    /// Rotation-number statistics over noise realizations.
    McRotation {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        xi: f64,
        #[arg(long)]
        tau: String,
        #[arg(long, default_value_t = 1000)]
        realizations: u64,
        #[command(flatten)]
        mc: Mc,
        #[command(flatten)]
        common: Common,
    },
    /// Certified density against an orbit histogram.
    CompareMeasures {
        #[command(flatten)]
        map: Map,
        #[command(flatten)]
        grid: Grid,
        #[command(flatten)]
        mc: Mc,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::CertifyMixing { common, .. }
            | Command::Cover { common, .. }
            | Command::Check { common, .. }
            | Command::Stationary { common, .. }
            | Command::Rotation { common, .. }
            | Command::SweepRotation { common, .. }
            | Command::ProveNonmonotone { common, .. }
            | Command::Derivative { common, .. }
            | Command::McUlam { common, .. }
            | Command::McOrbit { common, .. }
            | Command::McRotation { common, .. }
            | Command::CompareMeasures { common, .. } => common,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::CertifyMixing { .. } => "certify-mixing",
            Command::Cover { .. } => "cover",
            Command::Check { .. } => "check",
            Command::Stationary { .. } => "stationary",
            Command::Rotation { .. } => "rotation",
            Command::SweepRotation { .. } => "sweep-rotation",
            Command::ProveNonmonotone { .. } => "prove-nonmonotone",
            Command::Derivative { .. } => "derivative",
            Command::McUlam { .. } => "mc-ulam",
            Command::McOrbit { .. } => "mc-orbit",
            Command::McRotation { .. } => "mc-rotation",
            Command::CompareMeasures { .. } => "compare-measures",
        }
    }
}

/// Insert the pairs of a `--config` file right after the subcommand, so
/// that flags given on the command line (which come later) override them.
pub(crate) fn splice_config(raw: Vec<OsString>) -> Result<Vec<OsString>> {
    let pos = raw.iter().position(|a| a == "--config" || a.to_string_lossy().starts_with("--config="));
    let Some(pos) = pos else { return Ok(raw) };
    let arg = raw[pos].to_string_lossy().into_owned();
    let path = match arg.strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => raw
            .get(pos + 1)
            .map(|p| p.to_string_lossy().into_owned())
            .ok_or_else(|| Error::InvalidParams("--config needs a path".into()))?,
    };
    let text = std::fs::read_to_string(&path)?;
    let mut extra = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("{path}:{}: expected key=value", ln + 1)))?;
        let k = k.trim().replace('_', "-");
        let v = v.trim();
        if v == "true" {
            extra.push(OsString::from(format!("--{k}")));
        } else if v != "false" {
            extra.push(OsString::from(format!("--{k}={v}")));
        }
    }
    // The subcommand is the first argument after the program name.
    let mut out = raw;
    let at = 2.min(out.len());
    for (i, a) in extra.into_iter().enumerate() {
        out.insert(at + i, a);
    }
    Ok(out)
}

fn decimal_places(s: &str) -> usize {
    s.split_once('.').map_or(0, |(_, f)| f.trim_end_matches(|c: char| !c.is_ascii_digit()).len())
}

/// `lo:hi` as two doubles.
pub fn parse_interval(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 2 {
        return Err(Error::Parse(format!("expected lo:hi, got {s:?}")));
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| Error::Parse(format!("bad number {:?}", parts[0])))?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| Error::Parse(format!("bad number {:?}", parts[1])))?;
    if !(lo < hi) {
        return Err(Error::InvalidParams(format!("range {s:?} is not increasing")));
    }
    Ok((lo, hi))
}

/// `a:b:step` as the doubles nearest to the decimal grid points
/// `a, a + step, .., b`; a single number gives one point.
pub fn parse_tau_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    match parts.len() {
        1 => Ok(vec![parts[0].parse().map_err(|_| Error::Parse(format!("bad number {s:?}")))?]),
        3 => {
            for p in &parts {
                parse_enclosure(p)?;
                if p.contains(['e', 'E']) {
                    return Err(Error::Parse(format!("use plain decimals in ranges, got {p:?}")));
                }
            }
            let d = parts.iter().map(|p| decimal_places(p)).max().unwrap_or(0) as i32;
            let scale = 10f64.powi(d);
            let int = |p: &str| -> Result<i64> {
                let v: f64 = p.parse().map_err(|_| Error::Parse(format!("bad number {p:?}")))?;
                Ok((v * scale).round() as i64)
            };
            let (a, b, c) = (int(parts[0])?, int(parts[1])?, int(parts[2])?);
            if c <= 0 || b < a {
                return Err(Error::InvalidParams(format!("range {s:?} must have a <= b and step > 0")));
            }
            let count = (b - a) / c + 1;
            if count > 1_000_000 {
                return Err(Error::InvalidParams(format!("range {s:?} has too many points")));
            }
            Ok((0..count).map(|i| (a + i * c) as f64 / scale).collect())
        }
        _ => Err(Error::Parse(format!("expected a or a:b:step, got {s:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_ranges_hit_exact_doubles() {
        let t = parse_tau_range("0.707:0.716:0.001").unwrap();
        assert_eq!(t.len(), 10);
        assert_eq!(t[3], 0.710);
        assert_eq!(t[9], 0.716);
        assert_eq!(parse_tau_range("0.3").unwrap(), vec![0.3]);
        assert!(parse_tau_range("0.3:0.2:0.1").is_err());
    }

    #[test]
    fn interval_parse() {
        assert_eq!(parse_interval("0.75:0.752").unwrap(), (0.75, 0.752));
        assert!(parse_interval("0.8:0.75").is_err());
    }
}
