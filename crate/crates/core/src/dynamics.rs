//! The Arnold circle map `T(x) = x + tau - (eps / 2 pi) sin(2 pi x) mod 1`,
//! its lift, the monotone branches, the uniform noise kernel and the
//! displacement observable whose average is the rotation number.

use crate::error::{Error, Result};
use crate::rigor::{add_up, div_up, sub_down, sub_up, IVal};
use serde::{Deserialize, Serialize};

/// Tangency tolerance: `|eps - 1|` must exceed this.
pub const TANGENCY_TOL: f64 = 1e-9;

/// Parameters of the random system `x -> T(x) + omega`, `omega ~ U[-xi/2, xi/2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyMapParams {
    pub tau: f64,
    pub eps: f64,
    pub xi: f64,
}

impl NoisyMapParams {
    /// Validated parameters. `xi = 0` is accepted here (Monte Carlo runs
    /// without noise) but refused by every certified routine.
    pub fn new(tau: f64, eps: f64, xi: f64) -> Result<Self> {
        if !tau.is_finite() {
            return Err(Error::InvalidParams(format!("tau must be finite, got {tau}")));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::InvalidParams(format!("eps must be finite and >= 0, got {eps}")));
        }
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::InvalidParams(format!("xi must lie in [0, 1], got {xi}")));
        }
        Ok(NoisyMapParams { tau, eps, xi })
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        NoisyMapParams { tau, ..*self }
    }

    /// Error unless the noise is nondegenerate.
    pub fn require_noise(&self) -> Result<()> {
        if self.xi > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams("certified computations need xi > 0".into()))
        }
    }

    pub fn kernel(&self) -> NoiseKernel {
        NoiseKernel::new(self.xi)
    }

    pub fn lift(&self) -> Lift {
        Lift::new(self)
    }

    /// Upper bound on `sup |T'| = 1 + eps`.
    pub fn lip_upper(&self) -> f64 {
        add_up(1.0, self.eps)
    }
}

/// The lift `x + tau - k sin(2 pi x)` with `k = eps / 2 pi` precomputed.
#[derive(Clone, Copy, Debug)]
pub struct Lift {
    pub tau: f64,
    pub eps: f64,
    k: IVal,
    k_f: f64,
}

impl Lift {
    pub fn new(p: &NoisyMapParams) -> Self {
        let k = IVal::point(p.eps).checked_div(IVal::TWO_PI).expect("2 pi is positive");
        Lift { tau: p.tau, eps: p.eps, k, k_f: p.eps / (2.0 * std::f64::consts::PI) }
    }

    /// Enclosure of `eps / 2 pi`.
    pub fn k(&self) -> IVal {
        self.k
    }

    /// Enclosure of the lift over `x`.
    #[inline]
    pub fn eval(&self, x: IVal) -> IVal {
        if self.eps == 0.0 {
            return x + self.tau;
        }
        x + self.tau - self.k * x.sin_2pi()
    }

    #[inline]
    pub fn eval_point(&self, x: f64) -> IVal {
        self.eval(IVal::point(x))
    }

    /// Enclosure of `T'(x) = 1 - eps cos(2 pi x)`.
    pub fn derivative(&self, x: IVal) -> IVal {
        IVal::ONE - x.cos_2pi().scale(self.eps)
    }

    /// Plain floating-point lift, for simulation and root seeding.
    #[inline]
    pub fn approx(&self, x: f64) -> f64 {
        x + self.tau - self.k_f * (2.0 * std::f64::consts::PI * x).sin()
    }

    #[inline]
    pub fn approx_derivative(&self, x: f64) -> f64 {
        1.0 - self.eps * (2.0 * std::f64::consts::PI * x).cos()
    }
}

/// An arc of the circle `[0, 1)`. When `wraps` is set the arc is
/// `[start, 1) U [0, end]`; otherwise `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleArc {
    pub start: f64,
    pub end: f64,
    pub wraps: bool,
}

impl CircleArc {
    pub const FULL: CircleArc = CircleArc { start: 0.0, end: 1.0, wraps: false };

    /// The image on the circle of a lifted enclosure.
    pub fn from_lift(y: IVal) -> CircleArc {
        if y.width() >= 1.0 {
            return CircleArc::FULL;
        }
        let k = y.lo().floor();
        let start = sub_down(y.lo(), k).max(0.0);
        let end = sub_up(y.hi(), k);
        if end < 1.0 {
            CircleArc { start, end, wraps: false }
        } else {
            CircleArc { start, end: sub_up(end, 1.0).max(0.0), wraps: true }
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let x = x - x.floor();
        if self.wraps {
            x >= self.start || x <= self.end
        } else {
            self.start <= x && x <= self.end
        }
    }

    /// Upper bound on the arc length.
    pub fn length(&self) -> f64 {
        if self.wraps {
            add_up(sub_up(1.0, self.start), self.end)
        } else {
            sub_up(self.end, self.start)
        }
    }
}

/// `T` on the circle over an enclosure `x` of points of `[0, 1]`.
pub fn map_eval(p: &NoisyMapParams, x: IVal) -> CircleArc {
    CircleArc::from_lift(p.lift().eval(x))
}

/// Uniform density on `[-xi/2, xi/2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseKernel {
    pub xi: f64,
    pub density_height: IVal,
    pub l1_norm: IVal,
    pub var: IVal,
    pub bv_norm: IVal,
}

impl NoiseKernel {
    pub fn new(xi: f64) -> Self {
        let h = IVal::ONE.div_scalar(xi).unwrap_or(IVal::new(f64::MAX, f64::INFINITY));
        let var = h.scale(2.0);
        NoiseKernel { xi, density_height: h, l1_norm: IVal::ONE, var, bv_norm: var + 1.0 }
    }

    /// Upper bound on `sup |rho * g|_1` over zero-mass `g` with `|g|_1 = 1`.
    ///
    /// Two translates of the kernel at circle distance `s <= 1/2` overlap on
    /// `max(0, xi - s) + max(0, xi - 1 + s)`; the worst case is `s = 1/2`.
    pub fn contraction(&self) -> f64 {
        if self.xi <= 0.5 {
            1.0
        } else {
            // (1 - xi) / xi, rounded up
            div_up(sub_up(1.0, self.xi), self.xi).min(1.0)
        }
    }
}

/// A maximal interval on which the lift is strictly monotone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub lo: f64,
    pub hi: f64,
    /// +1 increasing, -1 decreasing.
    pub sign: i8,
}

/// Monotone pieces of the lift on `[0, 1]` separated by critical points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchDecomposition {
    pub breakpoints: Vec<IVal>,
    pub branches: Vec<Branch>,
    #[serde(skip)]
    lift: Option<LiftParams>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct LiftParams {
    tau: f64,
    eps: f64,
}

/// Critical point enclosure `c1` in `(0, 1/4)` with `cos(2 pi c1) = 1/eps`.
fn critical_point(lift: &Lift) -> IVal {
    let eps = lift.eps;
    let guess = (1.0 / eps).acos() / (2.0 * std::f64::consts::PI);
    // T' < 0 left of c1 and T' > 0 right of it.
    let neg = |x: f64| lift.derivative(IVal::point(x)).hi() < 0.0;
    let pos = |x: f64| lift.derivative(IVal::point(x)).lo() > 0.0;
    let mut lo = guess;
    let mut step = f64::EPSILON * guess.max(1e-300);
    while !neg(lo) {
        lo = (lo - step).max(0.0);
        step *= 2.0;
        if lo == 0.0 {
            break;
        }
    }
    let mut hi = guess;
    let mut step = f64::EPSILON * guess.max(1e-300);
    while !pos(hi) {
        hi = (hi + step).min(0.25);
        step *= 2.0;
        if hi == 0.25 {
            break;
        }
    }
    IVal::new(lo, hi)
}

/// Split `[0, 1]` into monotone branches of the lift.
pub fn branch_decompose(p: &NoisyMapParams) -> Result<BranchDecomposition> {
    let gap = (p.eps - 1.0).abs();
    if gap <= TANGENCY_TOL {
        return Err(Error::Tangency { gap });
    }
    let lp = Some(LiftParams { tau: p.tau, eps: p.eps });
    if p.eps < 1.0 {
        return Ok(BranchDecomposition {
            breakpoints: vec![],
            branches: vec![Branch { lo: 0.0, hi: 1.0, sign: 1 }],
            lift: lp,
        });
    }
    let c1 = critical_point(&p.lift());
    // cos(2 pi (1 - x)) = cos(2 pi x), so the mirror enclosure is exact.
    let c2 = IVal::new(sub_down(1.0, c1.hi()), sub_up(1.0, c1.lo()));
    Ok(BranchDecomposition {
        breakpoints: vec![c1, c2],
        branches: vec![
            Branch { lo: 0.0, hi: c1.lo(), sign: -1 },
            Branch { lo: c1.hi(), hi: c2.lo(), sign: 1 },
            Branch { lo: c2.hi(), hi: 1.0, sign: -1 },
        ],
        lift: lp,
    })
}

impl BranchDecomposition {
    /// Enclosure of the point `z` in branch `b` with lift value `y`, or
    /// `None` when `y` is certainly outside the branch image.
    pub fn inverse(&self, b: usize, y: f64) -> Option<IVal> {
        let lp = self.lift?;
        let p = NoisyMapParams { tau: lp.tau, eps: lp.eps, xi: 0.0 };
        let lift = p.lift();
        let br = self.branches[b];
        let tu = lift.eval_point(br.lo);
        let tv = lift.eval_point(br.hi);
        let (ylo, yhi) = if br.sign > 0 { (tu.lo(), tv.hi()) } else { (tv.lo(), tu.hi()) };
        if y < ylo || y > yhi {
            return None;
        }
        Some(sublevel_boundary(&lift, br.lo, br.hi, br.sign, y))
    }
}

/// Enclosure of the boundary of `{z in [u, v] : lift(z) < y}` on a piece
/// where the lift is strictly monotone with the given sign.
///
/// For increasing pieces the set is `[u, z*)` and for decreasing ones
/// `(z*, v]`; when the set is empty or the whole piece, `z*` is the
/// corresponding endpoint.
pub fn sublevel_boundary(lift: &Lift, u: f64, v: f64, sign: i8, y: f64) -> IVal {
    let tu = lift.eval_point(u);
    let tv = lift.eval_point(v);
    sublevel_boundary_with(lift, u, v, tu, tv, sign > 0, y)
}

/// As [`sublevel_boundary`] with the endpoint images `tu`, `tv` supplied.
pub fn sublevel_boundary_with(lift: &Lift, u: f64, v: f64, tu: IVal, tv: IVal, inc: bool, y: f64) -> IVal {
    if inc {
        if y <= tu.lo() {
            return IVal::point(u);
        }
        if y >= tv.hi() {
            return IVal::point(v);
        }
    } else {
        if y <= tv.lo() {
            return IVal::point(v);
        }
        if y >= tu.hi() {
            return IVal::point(u);
        }
    }
    let z = approx_root(lift, u, v, inc, y);
    // below(z): lift(z) <= y certainly; above(z): lift(z) >= y certainly.
    let below = |z: f64| lift.eval_point(z).hi() <= y;
    let above = |z: f64| lift.eval_point(z).lo() >= y;
    // Left end of the enclosure: for increasing pieces a point with lift <= y,
    // for decreasing ones a point with lift >= y.
    let left_ok = |z: f64| if inc { below(z) } else { above(z) };
    let right_ok = |z: f64| if inc { above(z) } else { below(z) };
    let mut lo = z;
    let mut step = ulp(z);
    while lo > u && !left_ok(lo) {
        lo = (lo - step).max(u);
        step *= 2.0;
    }
    let mut hi = z;
    let mut step = ulp(z);
    while hi < v && !right_ok(hi) {
        hi = (hi + step).min(v);
        step *= 2.0;
    }
    IVal::new(lo.max(u), hi.min(v))
}

#[inline]
fn ulp(x: f64) -> f64 {
    let a = x.abs().max(f64::MIN_POSITIVE);
    a.next_up() - a
}

/// Safeguarded Newton iteration for `lift(z) = y` on a monotone piece.
fn approx_root(lift: &Lift, u: f64, v: f64, inc: bool, y: f64) -> f64 {
    let f = |z: f64| {
        let d = lift.approx(z) - y;
        if inc {
            d
        } else {
            -d
        }
    };
    let (mut a, mut b) = (u, v);
    let fa = f(a);
    let fb = f(b);
    let mut z = if fb != fa { (a - fa * (b - a) / (fb - fa)).clamp(a, b) } else { 0.5 * (a + b) };
    for _ in 0..100 {
        let fz = f(z);
        if fz == 0.0 {
            return z;
        }
        if fz < 0.0 {
            a = z;
        } else {
            b = z;
        }
        if b - a <= 2.0 * ulp(z) {
            break;
        }
        let d = lift.approx_derivative(z);
        let d = if inc { d } else { -d };
        let zn = z - fz / d;
        z = if d > 0.0 && zn > a && zn < b { zn } else { 0.5 * (a + b) };
    }
    z
}

/// The displacement `phi(x) = tau - (eps / 2 pi) sin(2 pi x)`.
#[derive(Clone, Copy, Debug)]
pub struct Observable {
    lift: Lift,
    pub sup_bound: IVal,
    pub lip_bound: IVal,
}

/// The rotation-number observable for `p`.
pub fn observable(p: &NoisyMapParams) -> Observable {
    let lift = p.lift();
    let sup = add_up(p.tau.abs(), lift.k().hi());
    Observable { lift, sup_bound: IVal::new(0.0, sup), lip_bound: IVal::new(0.0, p.eps) }
}

impl Observable {
    pub fn eval(&self, x: IVal) -> IVal {
        if self.lift.eps == 0.0 {
            return IVal::point(self.lift.tau);
        }
        IVal::point(self.lift.tau) - self.lift.k() * x.sin_2pi()
    }

    /// Upper bound on half the oscillation, `eps / 2 pi`.
    pub fn half_osc(&self) -> f64 {
        self.lift.k().hi()
    }

    /// Enclosure of the mean of `phi` over `[a, b]`.
    ///
    /// Uses `cos A - cos B = 2 sin((A+B)/2) sin((B-A)/2)` so the result has
    /// no cancellation for short intervals.
    pub fn average(&self, a: IVal, b: IVal) -> IVal {
        if self.lift.eps == 0.0 {
            return IVal::point(self.lift.tau);
        }
        let w = b - a;
        let s = ((a + b) * IVal::PI).sin() * (w * IVal::PI).sin();
        let mean_sin = (s.checked_div(IVal::PI).expect("pi")).checked_div(w).unwrap_or(IVal::new(-1.0, 1.0));
        IVal::point(self.lift.tau) - self.lift.k() * mean_sin
    }

    /// Mean of `phi` over cell `i` of the `n`-cell partition.
    pub fn cell_average(&self, i: usize, n: usize) -> IVal {
        let a = IVal::ratio(i as f64, n as f64);
        let b = IVal::ratio((i + 1) as f64, n as f64);
        if self.lift.eps == 0.0 {
            return IVal::point(self.lift.tau);
        }
        let w = IVal::ratio(1.0, n as f64);
        let s = ((a + b) * IVal::PI).sin() * (w * IVal::PI).sin();
        let mean_sin = s.checked_div(IVal::PI).expect("pi").scale(n as f64);
        IVal::point(self.lift.tau) - self.lift.k() * mean_sin.intersect(IVal::new(-1.0, 1.0)).unwrap_or(mean_sin)
    }
}
