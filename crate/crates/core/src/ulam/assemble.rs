//! Entry enclosures from closed-form cell integrals.
//!
//! For a source cell `I_j` write `G(y) = N m{z in I_j : T(z) < y}` (lifted)
//! and `H(s) = N int_{I_j} (s - T(z))_+ dz`. The deterministic entry for
//! lifted row `p` is `G(a_{p+1}) - G(a_p)`, and after convolution with the
//! uniform kernel it is `Phi(a_{p+1}) - Phi(a_p)` with
//! `Phi(c) = (H(c + xi/2) - H(c - xi/2)) / xi`. Both are nondecreasing, so
//! enclosures at interval arguments come from the endpoints, and sums of
//! entries telescope.

use super::{Column, Partition, StochasticIntervalMatrix, Structure};
use crate::dynamics::{branch_decompose, sublevel_boundary_with, Lift, NoiseKernel, NoisyMapParams};
use crate::error::Result;
use crate::rigor::{mul_up, sub_up, IVal};
use rayon::prelude::*;

#[derive(Clone, Copy, Debug)]
enum Piece {
    Mono { u: f64, v: f64, inc: bool, tu: IVal, tv: IVal },
    // Short interval around a critical point or an inexact cell endpoint;
    // only crude bounds are used on it.
    Sliver { u: f64, v: f64, range: IVal },
}

struct Ctx {
    lift: Lift,
    n: usize,
    // eps / (2 pi^2)
    k2: IVal,
    crit: Vec<IVal>,
}

struct Cell {
    pieces: Vec<Piece>,
    // bounds on min and max of the lift over the cell
    lo: f64,
    hi: f64,
    // N times the integral of the lift over the cell
    mean: IVal,
}

impl Ctx {
    fn new(p: &NoisyMapParams, n: usize) -> Result<Self> {
        let b = branch_decompose(p)?;
        let lift = p.lift();
        let k2 = IVal::point(p.eps)
            .checked_div(IVal::PI * IVal::PI)
            .expect("pi^2 > 0")
            .scale(0.5);
        Ok(Ctx { lift, n, k2, crit: b.breakpoints })
    }

    fn identity(n: usize) -> Self {
        let p = NoisyMapParams { tau: 0.0, eps: 0.0, xi: 0.0 };
        Ctx { lift: p.lift(), n, k2: IVal::ZERO, crit: vec![] }
    }

    fn edge(&self, p: i64) -> IVal {
        IVal::ratio(p as f64, self.n as f64)
    }

    /// `int_u^z (s - T)` over an interval of width `w` and endpoint sum `m`,
    /// in the cancellation-free form `w (s - m/2 - tau) + k2 sin(pi m) sin(pi w)`.
    fn piece_integral(&self, s: f64, w: IVal, m: IVal) -> IVal {
        let lin = w * (IVal::point(s) - m.scale(0.5) - self.lift.tau);
        if self.lift.eps == 0.0 {
            return lin;
        }
        lin + self.k2 * (IVal::PI * m).sin() * (IVal::PI * w).sin()
    }

    fn cell(&self, j: usize) -> Cell {
        let a = self.edge(j as i64);
        let b = self.edge(j as i64 + 1);
        let mut cuts: Vec<IVal> = vec![a];
        for &c in &self.crit {
            if c.hi() > a.lo() && c.lo() < b.hi() {
                cuts.push(IVal::new(c.lo().max(a.lo()), c.hi().min(b.hi())));
            }
        }
        cuts.push(b);
        cuts.sort_by(|x, y| x.lo().total_cmp(&y.lo()));
        let mut merged: Vec<IVal> = Vec::with_capacity(cuts.len());
        for c in cuts {
            match merged.last_mut() {
                Some(last) if c.lo() <= last.hi() => *last = last.hull(c),
                _ => merged.push(c),
            }
        }
        let mut pieces = Vec::with_capacity(2 * merged.len());
        for (k, c) in merged.iter().enumerate() {
            if c.lo() < c.hi() {
                pieces.push(Piece::Sliver { u: c.lo(), v: c.hi(), range: self.lift.eval(*c) });
            }
            if let Some(next) = merged.get(k + 1) {
                let (u, v) = (c.hi(), next.lo());
                if u < v {
                    pieces.push(self.mono(u, v));
                }
            }
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for pc in &pieces {
            let r = match *pc {
                Piece::Mono { tu, tv, .. } => tu.hull(tv),
                Piece::Sliver { range, .. } => range,
            };
            lo = lo.min(r.lo());
            hi = hi.max(r.hi());
        }
        let w = b - a;
        let m = a + b;
        let int = w * (m.scale(0.5) + self.lift.tau)
            - if self.lift.eps == 0.0 { IVal::ZERO } else { self.k2 * (IVal::PI * m).sin() * (IVal::PI * w).sin() };
        Cell { pieces, lo, hi, mean: int.scale(self.n as f64) }
    }

    fn mono(&self, u: f64, v: f64) -> Piece {
        let tu = self.lift.eval_point(u);
        let tv = self.lift.eval_point(v);
        let inc = if self.crit.is_empty() {
            Some(true)
        } else {
            let d = self.lift.derivative(IVal::point(0.5 * (u + v)));
            if d.lo() > 0.0 {
                Some(true)
            } else if d.hi() < 0.0 {
                Some(false)
            } else {
                None
            }
        };
        match inc {
            Some(inc) => Piece::Mono { u, v, inc, tu, tv },
            None => Piece::Sliver { u, v, range: self.lift.eval(IVal::new(u, v)) },
        }
    }

    /// Enclosure of `G(y)` for a point `y`.
    fn g_point(&self, cell: &Cell, y: f64) -> IVal {
        if y <= cell.lo {
            return IVal::ZERO;
        }
        if y >= cell.hi {
            return IVal::ONE;
        }
        let mut acc = IVal::ZERO;
        for pc in &cell.pieces {
            acc += match *pc {
                Piece::Mono { u, v, inc, tu, tv } => {
                    let z = sublevel_boundary_with(&self.lift, u, v, tu, tv, inc, y);
                    if inc {
                        (z - u).clamp_nonneg()
                    } else {
                        (IVal::point(v) - z).clamp_nonneg()
                    }
                }
                Piece::Sliver { u, v, range } => {
                    if y <= range.lo() {
                        IVal::ZERO
                    } else {
                        IVal::new(0.0, sub_up(v, u))
                    }
                }
            };
        }
        let g = acc.scale(self.n as f64);
        IVal::new(g.lo().clamp(0.0, 1.0), g.hi().clamp(0.0, 1.0))
    }

    fn g(&self, cell: &Cell, y: IVal) -> IVal {
        if y.lo() == y.hi() {
            return self.g_point(cell, y.lo());
        }
        IVal::new(self.g_point(cell, y.lo()).lo(), self.g_point(cell, y.hi()).hi())
    }

    /// Enclosure of `H(s)` for a point `s`.
    fn h_point(&self, cell: &Cell, s: f64) -> IVal {
        if s <= cell.lo {
            return IVal::ZERO;
        }
        let lin = IVal::point(s) - cell.mean;
        if s >= cell.hi {
            return lin.clamp_nonneg();
        }
        let mut acc = IVal::ZERO;
        for pc in &cell.pieces {
            acc += match *pc {
                Piece::Mono { u, v, inc, tu, tv } => {
                    let tmin = if inc { tu } else { tv };
                    if s <= tmin.lo() {
                        continue;
                    }
                    let z = sublevel_boundary_with(&self.lift, u, v, tu, tv, inc, s);
                    let (w, m) = if inc {
                        ((z - u).clamp_nonneg(), z + u)
                    } else {
                        ((IVal::point(v) - z).clamp_nonneg(), z + v)
                    };
                    let cap = mul_up(w.hi(), sub_up(s, tmin.lo()));
                    let val = self.piece_integral(s, w, m);
                    IVal::new(val.lo().max(0.0), val.hi().min(cap).max(0.0))
                }
                Piece::Sliver { u, v, range } => {
                    if s <= range.lo() {
                        continue;
                    }
                    IVal::new(0.0, mul_up(sub_up(v, u), sub_up(s, range.lo())))
                }
            };
        }
        let h = acc.scale(self.n as f64);
        // (s - T)_+ lies between max(0, s - T) and s - min T.
        let floor = lin.lo().max(0.0);
        let cap = sub_up(s, cell.lo);
        IVal::new(h.lo().max(floor).min(cap), h.hi().min(cap).max(floor))
    }

    fn h(&self, cell: &Cell, s: IVal) -> IVal {
        if s.lo() == s.hi() {
            return self.h_point(cell, s.lo());
        }
        IVal::new(self.h_point(cell, s.lo()).lo(), self.h_point(cell, s.hi()).hi())
    }

    /// Enclosure of `Phi(c)` for a point `c`.
    fn phi_point(&self, cell: &Cell, c: f64, xi: f64) -> IVal {
        let half = 0.5 * xi;
        let sp = IVal::point(c) + half;
        let sm = IVal::point(c) - half;
        if sp.hi() <= cell.lo {
            return IVal::ZERO;
        }
        if sm.lo() >= cell.hi {
            return IVal::ONE;
        }
        let v = if sm.hi() <= cell.lo && sp.lo() >= cell.hi {
            (sp - cell.mean).div_scalar(xi).expect("xi > 0")
        } else {
            (self.h(cell, sp) - self.h(cell, sm)).div_scalar(xi).expect("xi > 0")
        };
        IVal::new(v.lo().clamp(0.0, 1.0), v.hi().clamp(0.0, 1.0))
    }

    fn phi(&self, cell: &Cell, c: IVal, xi: f64) -> IVal {
        if c.lo() == c.hi() {
            return self.phi_point(cell, c.lo(), xi);
        }
        IVal::new(self.phi_point(cell, c.lo(), xi).lo(), self.phi_point(cell, c.hi(), xi).hi())
    }

    /// Column with entries `G(a_{p+1} + offset) - G(a_p + offset)`.
    fn deterministic_column(&self, j: usize, offset: IVal) -> Column {
        let cell = self.cell(j);
        let nf = self.n as f64;
        let p0 = ((cell.lo - offset.hi()) * nf).floor() as i64 - 1;
        let p1 = ((cell.hi - offset.lo()) * nf).ceil() as i64 + 1;
        let vals: Vec<IVal> = (p0..=p1).map(|p| self.g(&cell, self.edge(p) + offset)).collect();
        let head: Vec<IVal> = vals.windows(2).map(|w| (w[1] - w[0]).clamp_nonneg()).collect();
        trimmed(p0, head, 0, vec![])
    }

    fn annealed_column(&self, j: usize, xi: f64, run_value: IVal) -> Column {
        let cell = self.cell(j);
        let nf = self.n as f64;
        let half = 0.5 * xi;
        let p0 = ((cell.lo - half) * nf).floor() as i64 - 1;
        let p1 = ((cell.hi + half) * nf).ceil() as i64 + 1;
        // Linear regime: a_p + xi/2 >= max T and a_{p+1} - xi/2 <= min T.
        let lin_lo = |p: i64| (self.edge(p) + half).lo() >= cell.hi;
        let lin_hi = |q: i64| (self.edge(q) - half).hi() <= cell.lo;
        let mut ps = ((cell.hi - half) * nf).floor() as i64 - 2;
        while !lin_lo(ps) {
            ps += 1;
        }
        let mut q = ((cell.lo + half) * nf).ceil() as i64 + 2;
        while !lin_hi(q) && q > ps {
            q -= 1;
        }
        let entry = |lo: IVal, hi: IVal| {
            let e = (hi - lo).clamp_nonneg();
            IVal::new(e.lo().min(run_value.hi()), e.hi().min(run_value.hi()))
        };
        let explicit = |from: i64, to: i64| -> Vec<IVal> {
            let vals: Vec<IVal> = (from..=to).map(|p| self.phi(&cell, self.edge(p), xi)).collect();
            vals.windows(2).map(|w| entry(w[0], w[1])).collect()
        };
        if q > ps && ps >= p0 && q <= p1 {
            let head = explicit(p0, ps);
            let tail = explicit(q, p1);
            trimmed(p0, head, (q - ps) as usize, tail)
        } else {
            trimmed(p0, explicit(p0, p1), 0, vec![])
        }
    }
}

/// Drop exact zeros at both ends of the band.
fn trimmed(mut start: i64, mut head: Vec<IVal>, run: usize, mut tail: Vec<IVal>) -> Column {
    let lead = head.iter().take_while(|e| **e == IVal::ZERO).count();
    head.drain(..lead);
    start += lead as i64;
    if run == 0 && tail.is_empty() {
        while head.last() == Some(&IVal::ZERO) {
            head.pop();
        }
    } else {
        while tail.last() == Some(&IVal::ZERO) {
            tail.pop();
        }
    }
    Column { start, head, run, tail }
}

/// Ulam matrix of the deterministic map.
pub fn assemble_deterministic(p: &NoisyMapParams, part: &Partition) -> Result<StochasticIntervalMatrix> {
    assemble_deterministic_shifted(p, part, IVal::ZERO)
}

/// Ulam matrix of the map followed by a rotation by any point of `shift`.
///
/// The target grid is moved instead of the map, so `shift` may be an
/// interval enclosing an inexact real rotation.
pub fn assemble_deterministic_shifted(
    p: &NoisyMapParams,
    part: &Partition,
    shift: IVal,
) -> Result<StochasticIntervalMatrix> {
    let ctx = Ctx::new(p, part.n())?;
    // G(a_p - s) is the mass sent below a_p by the shifted map.
    let neg = -shift;
    let cols = (0..part.n()).into_par_iter().map(|j| ctx.deterministic_column(j, neg)).collect();
    Ok(StochasticIntervalMatrix::from_columns(part.n(), Structure::Deterministic, IVal::ZERO, cols))
}

/// Circulant Ulam matrix of convolution with the uniform kernel.
pub fn assemble_noise(kernel: &NoiseKernel, part: &Partition) -> Result<StochasticIntervalMatrix> {
    let xi = kernel.xi;
    NoisyMapParams::new(0.0, 0.0, xi)?.require_noise()?;
    let ctx = Ctx::identity(part.n());
    let rv = run_value(part, xi);
    let col = ctx.annealed_column(0, xi, rv);
    Ok(StochasticIntervalMatrix::from_columns(part.n(), Structure::CirculantNoise, rv, vec![col]))
}

/// Ulam matrix of the annealed operator `f -> rho * L_T f`, projected once.
pub fn assemble_annealed(p: &NoisyMapParams, part: &Partition) -> Result<StochasticIntervalMatrix> {
    p.require_noise()?;
    let ctx = Ctx::new(p, part.n())?;
    let rv = run_value(part, p.xi);
    let cols = (0..part.n()).into_par_iter().map(|j| ctx.annealed_column(j, p.xi, rv)).collect();
    Ok(StochasticIntervalMatrix::from_columns(part.n(), Structure::Composed, rv, cols))
}

/// `1 / (N xi)`: the mass an interior cell receives from a unit cell.
fn run_value(part: &Partition, xi: f64) -> IVal {
    IVal::ONE
        .checked_div(IVal::point(part.n() as f64) * IVal::point(xi))
        .expect("N xi > 0")
}

/// `E_N` with `|(L - L_N) f|_1 <= E_N |f|_1`, where `L_N` is the annealed
/// Ulam matrix: the projection error `Var(g) / (2N)` of `g = rho * h` and
/// `Var(rho * h) <= (2 / xi) |h|_1`.
pub fn discretization_error(kernel: &NoiseKernel, part: &Partition) -> IVal {
    kernel.var.div_scalar(2.0 * part.n() as f64).expect("N > 0")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(tau: f64, eps: f64, n: usize) -> Vec<Vec<IVal>> {
        let p = NoisyMapParams::new(tau, eps, 0.1).unwrap();
        assemble_deterministic(&p, &Partition::new(n).unwrap()).unwrap().to_dense()
    }

    #[test]
    fn half_rotation_is_a_shift_by_two() {
        let d = det(0.5, 0.0, 4);
        for j in 0..4 {
            for i in 0..4 {
                let want = if i == (j + 2) % 4 { 1.0 } else { 0.0 };
                assert_eq!(d[i][j], IVal::point(want), "({i},{j})");
            }
        }
    }

    #[test]
    fn quarter_rotation_on_two_cells() {
        let d = det(0.25, 0.0, 2);
        for row in &d {
            for e in row {
                assert!(e.contains(0.5), "{e:?}");
            }
        }
    }

    #[test]
    fn noise_triangle_weights() {
        let m = assemble_noise(&NoiseKernel::new(0.2), &Partition::new(10).unwrap()).unwrap();
        let col = m.column_entries(0);
        let (got, rest): (Vec<(usize, IVal)>, Vec<_>) = col.into_iter().partition(|(_, e)| e.hi() > 1e-12);
        assert!(rest.iter().all(|(_, e)| e.contains(0.0)));
        assert_eq!(got.len(), 3);
        let want = [(0, 0.5), (1, 0.25), (9, 0.25)];
        for (r, w) in want {
            let e = got.iter().find(|(i, _)| *i == r).unwrap().1;
            assert!(e.contains(w) && e.width() < 1e-14, "{r}: {e:?}");
        }
    }

    #[test]
    fn full_width_noise_is_uniform() {
        let m = assemble_noise(&NoiseKernel::new(1.0), &Partition::new(8).unwrap()).unwrap();
        for j in 0..8 {
            for i in 0..8 {
                assert!(m.entry(i, j).contains(0.125), "{:?}", m.entry(i, j));
            }
        }
    }

    #[test]
    fn column_sums_contain_one() {
        let p = NoisyMapParams::new(0.709, 1.4, 0.1).unwrap();
        let part = Partition::new(37).unwrap();
        for m in [assemble_deterministic(&p, &part).unwrap(), assemble_annealed(&p, &part).unwrap()] {
            for j in 0..37 {
                let s = m.column_sum(j);
                assert!(s.contains(1.0) && s.width() < 1e-10, "{j}: {s:?}");
            }
        }
    }

    #[test]
    fn discretization_error_for_full_noise() {
        let e = discretization_error(&NoiseKernel::new(1.0), &Partition::new(64).unwrap());
        assert!(e.contains(1.0 / 64.0) && e.width() == 0.0);
    }
}
