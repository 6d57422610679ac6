//! Norm badges and convolution estimates.
//!
//! `f * g` on the circle, with `g` a density or finite measure and `f` a
//! signed measure. The four inequalities used throughout:
//!
//! * `|f*g|_1  <= |g| |f|_1`
//! * `|f*g|_W  <= |f|_W |g|_1`
//! * `|f*g|_1  <= 2 |f|_W |g|_BV` when `f` has zero mass
//! * `|f*g|_BV <= |f|_1 |g|_BV`

use super::IVal;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    L1,
    BV,
    W,
}

/// An upper bound for one norm of some object.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBadge {
    pub kind: NormKind,
    pub value: IVal,
}

impl NormBadge {
    pub fn new(kind: NormKind, upper: f64) -> Self {
        NormBadge { kind, value: IVal::new(0.0, upper.max(0.0)) }
    }

    pub fn upper(&self) -> f64 {
        self.value.hi()
    }
}

/// The known norm bounds for one object, plus whether it has zero mass.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormSet {
    pub badges: Vec<NormBadge>,
    pub zero_mass: bool,
}

impl NormSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, kind: NormKind, upper: f64) -> Self {
        self.insert(NormBadge::new(kind, upper));
        self
    }

    pub fn zero_mass(mut self) -> Self {
        self.zero_mass = true;
        self
    }

    /// Keep the smaller of an existing bound and `b`.
    pub fn insert(&mut self, b: NormBadge) {
        match self.badges.iter_mut().find(|x| x.kind == b.kind) {
            Some(x) if x.upper() <= b.upper() => {}
            Some(x) => *x = b,
            None => self.badges.push(b),
        }
    }

    pub fn get(&self, kind: NormKind) -> Option<f64> {
        self.badges.iter().find(|b| b.kind == kind).map(|b| b.upper())
    }

    fn need(&self, kind: NormKind, lemma: &'static str) -> Result<f64> {
        self.get(kind).ok_or(Error::MissingNorm { lemma, norm: kind_name(kind) })
    }
}

fn kind_name(k: NormKind) -> &'static str {
    match k {
        NormKind::L1 => "L1",
        NormKind::BV => "BV",
        NormKind::W => "Wasserstein",
    }
}

fn prod_up(a: f64, b: f64) -> f64 {
    (IVal::point(a) * IVal::point(b)).hi()
}

/// `|f*g|_1 <= |g| |f|_1`.
pub fn conv_l1(f: &NormSet, g: &NormSet) -> Result<NormBadge> {
    const LEMMA: &str = "the L1 convolution inequality";
    let v = prod_up(f.need(NormKind::L1, LEMMA)?, g.need(NormKind::L1, LEMMA)?);
    Ok(NormBadge::new(NormKind::L1, v))
}

/// `|f*g|_W <= |f|_W |g|_1`.
pub fn conv_w(f: &NormSet, g: &NormSet) -> Result<NormBadge> {
    const LEMMA: &str = "the Wasserstein convolution inequality";
    let v = prod_up(f.need(NormKind::W, LEMMA)?, g.need(NormKind::L1, LEMMA)?);
    Ok(NormBadge::new(NormKind::W, v))
}

/// `|f*g|_1 <= 2 |f|_W |g|_BV` for zero-mass `f`.
pub fn conv_l1_zero_mass(f: &NormSet, g: &NormSet) -> Result<NormBadge> {
    const LEMMA: &str = "the zero-mass regularization inequality";
    if !f.zero_mass {
        return Err(Error::MissingNorm { lemma: LEMMA, norm: "zero-mass" });
    }
    let v = prod_up(2.0 * f.need(NormKind::W, LEMMA)?, g.need(NormKind::BV, LEMMA)?);
    Ok(NormBadge::new(NormKind::L1, v))
}

/// `|f*g|_BV <= |f|_1 |g|_BV`.
pub fn conv_bv(f: &NormSet, g: &NormSet) -> Result<NormBadge> {
    const LEMMA: &str = "the BV regularization inequality";
    let v = prod_up(f.need(NormKind::L1, LEMMA)?, g.need(NormKind::BV, LEMMA)?);
    Ok(NormBadge::new(NormKind::BV, v))
}

/// Every bound on `f*g` that the available norms allow. Fails only when no
/// inequality applies, naming the first one that was tried.
pub fn convolution_norm_bounds(f: &NormSet, g: &NormSet) -> Result<NormSet> {
    let mut out = NormSet::new();
    let mut first_err = None;
    for r in [conv_l1(f, g), conv_w(f, g), conv_l1_zero_mass(f, g), conv_bv(f, g)] {
        match r {
            Ok(b) => out.insert(b),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if out.badges.is_empty() {
        return Err(first_err.expect("at least one inequality was tried"));
    }
    out.zero_mass = f.zero_mass;
    Ok(out)
}
