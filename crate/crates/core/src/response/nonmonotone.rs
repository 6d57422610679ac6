use crate::error::{Error, Result};
use crate::rigor::{sub_down, IVal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Decrease,
    Increase,
    Overlap,
}

/// Comparison of rows `i < j`. `margin` is the gap between the enclosures,
/// negative when they overlap or touch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub i: usize,
    pub j: usize,
    pub tau_i: f64,
    pub tau_j: f64,
    pub relation: Relation,
    pub margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// A certified decrease followed by a certified increase.
    NonMonotone,
    /// A certified decrease only: the profile is not non-decreasing.
    DecreaseOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub verdict: Verdict,
    pub consecutive: Vec<PairCheck>,
    pub decrease: PairCheck,
    pub increase: Option<PairCheck>,
}

fn compare(rows: &[(f64, IVal)], i: usize, j: usize) -> PairCheck {
    let (a, b) = (rows[i].1, rows[j].1);
    // Strict disjointness: touching endpoints do not count.
    let (relation, margin) = if b.hi() < a.lo() {
        (Relation::Decrease, sub_down(a.lo(), b.hi()))
    } else if b.lo() > a.hi() {
        (Relation::Increase, sub_down(b.lo(), a.hi()))
    } else {
        (Relation::Overlap, -(a.hi().min(b.hi()) - a.lo().max(b.lo())))
    };
    PairCheck { i, j, tau_i: rows[i].0, tau_j: rows[j].0, relation, margin }
}

/// Look for a certified decrease `i < j` followed by a certified increase
/// `j < k` in rows `(tau, enclosure)` sorted by strictly increasing `tau`.
pub fn prove_nonmonotone(rows: &[(f64, IVal)]) -> Result<WitnessReport> {
    if rows.len() < 3 {
        return Err(Error::InvalidParams(format!("need at least 3 rows, got {}", rows.len())));
    }
    if rows.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err(Error::InvalidParams("tau values must be strictly increasing".into()));
    }
    let consecutive: Vec<PairCheck> = (1..rows.len()).map(|j| compare(rows, j - 1, j)).collect();
    let n = rows.len();
    let mut best: Option<(PairCheck, PairCheck)> = None;
    let mut best_dec: Option<PairCheck> = None;
    for j in 1..n {
        let dec = (0..j)
            .map(|i| compare(rows, i, j))
            .filter(|c| c.relation == Relation::Decrease)
            .max_by(|a, b| a.margin.total_cmp(&b.margin));
        let Some(dec) = dec else { continue };
        if best_dec.is_none_or(|b| dec.margin > b.margin) {
            best_dec = Some(dec);
        }
        let inc = (j + 1..n)
            .map(|k| compare(rows, j, k))
            .filter(|c| c.relation == Relation::Increase)
            .max_by(|a, b| a.margin.total_cmp(&b.margin));
        if let Some(inc) = inc {
            let score = dec.margin.min(inc.margin);
            if best.is_none_or(|(d, i)| score > d.margin.min(i.margin)) {
                best = Some((dec, inc));
            }
        }
    }
    if let Some((decrease, increase)) = best {
        return Ok(WitnessReport { verdict: Verdict::NonMonotone, consecutive, decrease, increase: Some(increase) });
    }
    if let Some(decrease) = best_dec {
        return Ok(WitnessReport { verdict: Verdict::DecreaseOnly, consecutive, decrease, increase: None });
    }
    // Width reduction that would separate the pair whose midpoints decrease most.
    let need = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let (a, b) = (rows[i].1, rows[j].1);
            let drop = a.mid() - b.mid();
            (drop > 0.0).then(|| (a.width() + b.width()) / (2.0 * drop))
        })
        .fold(f64::INFINITY, f64::min);
    Err(Error::Inconclusive(if need.is_finite() {
        format!("no certified decrease; enclosure widths must shrink by a factor of at least {need:.3}")
    } else {
        "no certified decrease; the midpoints never decrease".to_string()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_witness() {
        let rows = [(0.1, IVal::new(0.5, 0.51)), (0.2, IVal::new(0.4, 0.41)), (0.3, IVal::new(0.45, 0.46))];
        let r = prove_nonmonotone(&rows).unwrap();
        assert_eq!(r.verdict, Verdict::NonMonotone);
        assert_eq!((r.decrease.i, r.decrease.j), (0, 1));
        assert_eq!(r.increase.unwrap().j, 2);
        assert!((r.decrease.margin - 0.09).abs() < 1e-12);
    }

    #[test]
    fn constant_rows_are_inconclusive() {
        let rows: Vec<_> = (0..4).map(|i| (i as f64, IVal::new(0.3, 0.4))).collect();
        assert!(matches!(prove_nonmonotone(&rows), Err(Error::Inconclusive(_))));
    }

    #[test]
    fn touching_is_not_disjoint() {
        let rows = [(0.1, IVal::new(0.5, 0.6)), (0.2, IVal::new(0.4, 0.5)), (0.3, IVal::new(0.6, 0.7))];
        assert!(matches!(prove_nonmonotone(&rows), Err(Error::Inconclusive(_))));
    }

    #[test]
    fn decrease_alone() {
        let rows = [(0.1, IVal::new(0.5, 0.51)), (0.2, IVal::new(0.4, 0.41)), (0.3, IVal::new(0.3, 0.31))];
        let r = prove_nonmonotone(&rows).unwrap();
        assert_eq!(r.verdict, Verdict::DecreaseOnly);
    }
}
