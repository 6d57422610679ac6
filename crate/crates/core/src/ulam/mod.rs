//! Ulam discretization on a uniform partition of the circle.
//!
//! Matrices act on vectors of cell averages (density coordinates), so a
//! column-stochastic matrix preserves `sum_i v_i / N`, the integral. Columns
//! are stored as bands in lifted row coordinates: explicit head entries, a
//! run of identical interior entries, and explicit tail entries. Row indices
//! wrap modulo `N`.

mod assemble;

pub use assemble::{
    assemble_annealed, assemble_deterministic, assemble_deterministic_shifted, assemble_noise,
    discretization_error,
};

use crate::error::{Error, Result};
use crate::rigor::{add_up, IVal};
use serde::{Deserialize, Serialize};

/// `N` equal cells `[i/N, (i+1)/N)` of the circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    n: usize,
}

impl Partition {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams(format!("partition needs N >= 2, got {n}")));
        }
        if n > 1 << 26 {
            return Err(Error::InvalidParams(format!("partition size {n} is too large")));
        }
        Ok(Partition { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Enclosure of the cell width `1/N`.
    pub fn width(&self) -> IVal {
        IVal::ratio(1.0, self.n as f64)
    }

    /// Enclosure of the (lifted) grid point `p/N`.
    pub fn edge(&self, p: i64) -> IVal {
        IVal::ratio(p as f64, self.n as f64)
    }

    /// Index of the cell containing `x` (taken mod 1).
    pub fn cell_of(&self, x: f64) -> usize {
        let f = x - x.floor();
        ((f * self.n as f64) as usize).min(self.n - 1)
    }

    pub fn refine(&self) -> Partition {
        Partition { n: 2 * self.n }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Certified,
    Float,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    Deterministic,
    CirculantNoise,
    Composed,
}

/// One band column: rows `start, start+1, ...` (lifted, taken mod N) get
/// `head`, then `run` copies of the matrix run value, then `tail`.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub start: i64,
    pub head: Vec<IVal>,
    pub run: usize,
    pub tail: Vec<IVal>,
}

impl Column {
    pub fn len(&self) -> usize {
        self.head.len() + self.run + self.tail.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
struct ColumnMid {
    head: Vec<f64>,
    tail: Vec<f64>,
}

/// Finite-rank enclosure of a transfer operator. Entry `(i, j)` is the
/// fraction of the mass of cell `j` sent to cell `i`.
#[derive(Clone, Debug)]
pub struct StochasticIntervalMatrix {
    n: usize,
    mode: Mode,
    structure: Structure,
    run_value: IVal,
    run_mid: f64,
    columns: Vec<Column>,
    mids: Vec<ColumnMid>,
}

fn wrap(p: i64, n: usize) -> usize {
    p.rem_euclid(n as i64) as usize
}

fn add_range<T: Copy + std::ops::AddAssign + std::ops::SubAssign>(d: &mut [T], s: usize, len: usize, x: T, n: usize) {
    let e = s + len;
    if e <= n {
        d[s] += x;
        d[e] -= x;
    } else {
        d[s] += x;
        d[n] -= x;
        d[0] += x;
        d[e - n] -= x;
    }
}

impl StochasticIntervalMatrix {
    pub(crate) fn from_columns(
        n: usize,
        structure: Structure,
        run_value: IVal,
        columns: Vec<Column>,
    ) -> Self {
        debug_assert!(structure == Structure::CirculantNoise && columns.len() == 1 || columns.len() == n);
        let mids = columns
            .iter()
            .map(|c| ColumnMid {
                head: c.head.iter().map(|e| e.mid()).collect(),
                tail: c.tail.iter().map(|e| e.mid()).collect(),
            })
            .collect();
        StochasticIntervalMatrix {
            n,
            mode: Mode::Certified,
            structure,
            run_value,
            run_mid: run_value.mid(),
            columns,
            mids,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn run_value(&self) -> IVal {
        self.run_value
    }

    /// The same matrix with every entry replaced by its midpoint. Not valid
    /// for proofs.
    pub fn to_float(&self) -> Self {
        let columns = self
            .columns
            .iter()
            .zip(&self.mids)
            .map(|(c, m)| Column {
                start: c.start,
                head: m.head.iter().map(|&x| IVal::point(x)).collect(),
                run: c.run,
                tail: m.tail.iter().map(|&x| IVal::point(x)).collect(),
            })
            .collect();
        let mut out = Self::from_columns(self.n, self.structure, IVal::point(self.run_mid), columns);
        out.mode = Mode::Float;
        out
    }

    #[inline]
    fn col(&self, j: usize) -> (i64, &Column, &ColumnMid) {
        if self.structure == Structure::CirculantNoise {
            let c = &self.columns[0];
            (c.start + j as i64, c, &self.mids[0])
        } else {
            let c = &self.columns[j];
            (c.start, c, &self.mids[j])
        }
    }

    /// Band column `j` with its lifted start row.
    pub fn column(&self, j: usize) -> Column {
        let (start, c, _) = self.col(j);
        Column { start, ..c.clone() }
    }

    /// Column `j` as sorted `(row, entry)` pairs with wrapped rows merged.
    pub fn column_entries(&self, j: usize) -> Vec<(usize, IVal)> {
        let (start, c, _) = self.col(j);
        let mut acc: std::collections::BTreeMap<usize, IVal> = Default::default();
        let vals = c
            .head
            .iter()
            .copied()
            .chain(std::iter::repeat_n(self.run_value, c.run))
            .chain(c.tail.iter().copied());
        for (k, e) in vals.enumerate() {
            *acc.entry(wrap(start + k as i64, self.n)).or_insert(IVal::ZERO) += e;
        }
        acc.into_iter().collect()
    }

    /// Entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> IVal {
        self.column_entries(j).into_iter().find(|&(r, _)| r == i).map_or(IVal::ZERO, |(_, e)| e)
    }

    /// Enclosure of the sum of column `j`.
    pub fn column_sum(&self, j: usize) -> IVal {
        let (_, c, _) = self.col(j);
        let h: IVal = c.head.iter().copied().sum();
        let t: IVal = c.tail.iter().copied().sum();
        h + self.run_value.scale(c.run as f64) + t
    }

    /// Dense copy, `[row][col]`. For small `N` only.
    pub fn to_dense(&self) -> Vec<Vec<IVal>> {
        let mut d = vec![vec![IVal::ZERO; self.n]; self.n];
        for j in 0..self.n {
            for (i, e) in self.column_entries(j) {
                d[i][j] = e;
            }
        }
        d
    }

    /// Sparse `(row, col, lo, hi)` triplets.
    pub fn triplets(&self) -> Vec<(usize, usize, f64, f64)> {
        let mut out = Vec::new();
        for j in 0..self.n {
            for (i, e) in self.column_entries(j) {
                out.push((i, j, e.lo(), e.hi()));
            }
        }
        out
    }

    /// Write the triplets as text, one `row col lo hi` line each.
    pub fn write_triplets<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# N={} mode={:?} structure={:?}", self.n, self.mode, self.structure)?;
        for (i, j, lo, hi) in self.triplets() {
            writeln!(w, "{i} {j} {lo:e} {hi:e}")?;
        }
        Ok(())
    }

    /// Number of stored band entries, counting each run as its length.
    pub fn band_len(&self, j: usize) -> usize {
        self.col(j).1.len()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: len });
        }
        Ok(())
    }

    /// Enclosure of `M x` for a point vector `x`.
    pub fn apply_point(&self, x: &[f64]) -> Result<Vec<IVal>> {
        self.check_len(x.len())?;
        let n = self.n;
        let mut y = vec![IVal::ZERO; n];
        let mut diff = vec![IVal::ZERO; n + 1];
        let mut has_run = false;
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let (start, c, _) = self.col(j);
            let mut p = wrap(start, n);
            for e in &c.head {
                y[p] += e.scale(xj);
                p = if p + 1 == n { 0 } else { p + 1 };
            }
            if c.run > 0 {
                has_run = true;
                add_range(&mut diff, p, c.run, IVal::point(xj), n);
                p = (p + c.run) % n;
            }
            for e in &c.tail {
                y[p] += e.scale(xj);
                p = if p + 1 == n { 0 } else { p + 1 };
            }
        }
        if has_run {
            let mut acc = IVal::ZERO;
            for i in 0..n {
                acc += diff[i];
                y[i] += self.run_value * acc;
            }
        }
        Ok(y)
    }

    /// Enclosure of `M x` for an interval vector, via `x = c + r [-1, 1]`.
    pub fn apply(&self, x: &[IVal]) -> Result<Vec<IVal>> {
        self.check_len(x.len())?;
        let c: Vec<f64> = x.iter().map(|v| v.mid()).collect();
        let r: Vec<f64> = x.iter().map(|v| v.rad()).collect();
        let mut y = self.apply_point(&c)?;
        if r.iter().any(|&t| t > 0.0) {
            let e = self.apply_point(&r)?;
            for (yi, ei) in y.iter_mut().zip(e) {
                *yi = yi.inflate(ei.hi());
            }
        }
        Ok(y)
    }

    /// Enclosure of `M^T x` for a point vector `x`.
    pub fn apply_transpose_point(&self, x: &[f64]) -> Result<Vec<IVal>> {
        self.check_len(x.len())?;
        let n = self.n;
        let has_run = (0..self.columns.len()).any(|j| self.columns[j].run > 0);
        let mut prefix = Vec::new();
        if has_run {
            prefix.reserve(n + 1);
            let mut s = IVal::ZERO;
            prefix.push(s);
            for &v in x {
                s += IVal::point(v);
                prefix.push(s);
            }
        }
        let out = (0..n)
            .map(|j| {
                let (start, c, _) = self.col(j);
                let mut p = wrap(start, n);
                let mut acc = IVal::ZERO;
                for e in &c.head {
                    acc += e.scale(x[p]);
                    p = if p + 1 == n { 0 } else { p + 1 };
                }
                if c.run > 0 {
                    let e = p + c.run;
                    let s = if e <= n {
                        prefix[e] - prefix[p]
                    } else {
                        (prefix[n] - prefix[p]) + prefix[e - n]
                    };
                    acc += self.run_value * s;
                    p = e % n;
                }
                for e in &c.tail {
                    acc += e.scale(x[p]);
                    p = if p + 1 == n { 0 } else { p + 1 };
                }
                acc
            })
            .collect();
        Ok(out)
    }

    /// Enclosure of `M^T x` for an interval vector.
    pub fn apply_transpose(&self, x: &[IVal]) -> Result<Vec<IVal>> {
        self.check_len(x.len())?;
        let c: Vec<f64> = x.iter().map(|v| v.mid()).collect();
        let r: Vec<f64> = x.iter().map(|v| v.rad()).collect();
        let mut y = self.apply_transpose_point(&c)?;
        if r.iter().any(|&t| t > 0.0) {
            let e = self.apply_transpose_point(&r)?;
            for (yi, ei) in y.iter_mut().zip(e) {
                *yi = yi.inflate(ei.hi());
            }
        }
        Ok(y)
    }

    /// Floating-point `M x` with midpoint entries.
    pub fn apply_f64(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        assert!(x.len() == n && y.len() == n, "dimension mismatch");
        y.fill(0.0);
        let mut diff = vec![0.0; n + 1];
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let (start, c, m) = self.col(j);
            let mut p = wrap(start, n);
            for &e in &m.head {
                y[p] += e * xj;
                p = if p + 1 == n { 0 } else { p + 1 };
            }
            if c.run > 0 {
                add_range(&mut diff, p, c.run, xj, n);
                p = (p + c.run) % n;
            }
            for &e in &m.tail {
                y[p] += e * xj;
                p = if p + 1 == n { 0 } else { p + 1 };
            }
        }
        let mut acc = 0.0;
        for i in 0..n {
            acc += diff[i];
            y[i] += self.run_mid * acc;
        }
    }

    /// Floating-point `M^T x` with midpoint entries.
    pub fn apply_transpose_f64(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        assert!(x.len() == n && y.len() == n, "dimension mismatch");
        let mut prefix = Vec::with_capacity(n + 1);
        let mut s = 0.0;
        prefix.push(0.0);
        for &v in x {
            s += v;
            prefix.push(s);
        }
        for (j, yj) in y.iter_mut().enumerate() {
            let (start, c, m) = self.col(j);
            let mut p = wrap(start, n);
            let mut acc = 0.0;
            for &e in &m.head {
                acc += e * x[p];
                p = if p + 1 == n { 0 } else { p + 1 };
            }
            if c.run > 0 {
                let e = p + c.run;
                let s = if e <= n { prefix[e] - prefix[p] } else { prefix[n] - prefix[p] + prefix[e - n] };
                acc += self.run_mid * s;
                p = e % n;
            }
            for &e in &m.tail {
                acc += e * x[p];
                p = if p + 1 == n { 0 } else { p + 1 };
            }
            *yj = acc;
        }
    }

    /// Lower and upper bounds of `M x` for a nonnegative vector known to lie
    /// in `[lo, hi]` componentwise. Uses one-ulp widening after every
    /// operation instead of exact error terms.
    pub fn apply_nonneg_bounds(&self, lo: &[f64], hi: &[f64], out_lo: &mut [f64], out_hi: &mut [f64], scratch: &mut NonnegScratch) {
        let n = self.n;
        assert!(lo.len() == n && hi.len() == n && out_lo.len() == n && out_hi.len() == n);
        out_lo.fill(0.0);
        out_hi.fill(0.0);
        scratch.reset(n);
        let NonnegScratch { start_lo, start_hi, end_lo, end_hi } = scratch;
        let mut has_run = false;
        for j in 0..n {
            let (xl, xh) = (lo[j], hi[j]);
            if xh == 0.0 {
                continue;
            }
            let (start, c, _) = self.col(j);
            let mut p = wrap(start, n);
            for e in &c.head {
                out_lo[p] = (out_lo[p] + (e.lo() * xl).next_down()).next_down();
                out_hi[p] = (out_hi[p] + (e.hi() * xh).next_up()).next_up();
                p = if p + 1 == n { 0 } else { p + 1 };
            }
            if c.run > 0 {
                has_run = true;
                let e = p + c.run;
                let bump = |a: &mut [f64], i: usize, v: f64, up: bool| {
                    a[i] = if up { (a[i] + v).next_up() } else { (a[i] + v).next_down() };
                };
                // Rows [p, e) mod n receive x_j.
                let segs: [(usize, usize); 2] = if e <= n { [(p, e), (0, 0)] } else { [(p, n), (0, e - n)] };
                for (s, t) in segs {
                    if s == t {
                        continue;
                    }
                    bump(start_lo, s, xl, false);
                    bump(start_hi, s, xh, true);
                    bump(end_lo, t, xl, true);
                    bump(end_hi, t, xh, false);
                }
                p = e % n;
            }
            for e in &c.tail {
                out_lo[p] = (out_lo[p] + (e.lo() * xl).next_down()).next_down();
                out_hi[p] = (out_hi[p] + (e.hi() * xh).next_up()).next_up();
                p = if p + 1 == n { 0 } else { p + 1 };
            }
        }
        if has_run {
            let (rl, rh) = (self.run_value.lo(), self.run_value.hi());
            let (mut sl, mut sh, mut el, mut eh) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for i in 0..n {
                sl = (sl + start_lo[i]).next_down();
                sh = (sh + start_hi[i]).next_up();
                el = (el + end_lo[i]).next_up();
                eh = (eh + end_hi[i]).next_down();
                // Window sum = started minus ended, each side from one bound
                // vector so input widths are not double counted.
                let wl = (sl - el).next_down().max(0.0);
                let wh = (sh - eh).next_up().max(0.0);
                out_lo[i] = (out_lo[i] + (rl * wl).next_down()).next_down().max(0.0);
                out_hi[i] = (out_hi[i] + (rh * wh).next_up()).next_up();
            }
        }
    }
}

/// Reusable buffers for [`StochasticIntervalMatrix::apply_nonneg_bounds`].
#[derive(Clone, Debug, Default)]
pub struct NonnegScratch {
    start_lo: Vec<f64>,
    start_hi: Vec<f64>,
    end_lo: Vec<f64>,
    end_hi: Vec<f64>,
}

impl NonnegScratch {
    fn reset(&mut self, n: usize) {
        for v in [&mut self.start_lo, &mut self.start_hi, &mut self.end_lo, &mut self.end_hi] {
            v.clear();
            v.resize(n + 1, 0.0);
        }
    }
}

/// Enclosure of `noise * (det * v)`.
pub fn compose_and_apply(
    noise: &StochasticIntervalMatrix,
    det: &StochasticIntervalMatrix,
    v: &[IVal],
) -> Result<Vec<IVal>> {
    if noise.n != det.n {
        return Err(Error::DimensionMismatch { expected: noise.n, got: det.n });
    }
    let w = det.apply(v)?;
    noise.apply(&w)
}

/// Upper bound on `sum |x_i - w_i| / N`.
pub fn l1_distance_upper(x: &[IVal], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for (xi, &wi) in x.iter().zip(w) {
        let d = (xi.hi() - wi).abs().max((wi - xi.lo()).abs());
        s = add_up(s, d.next_up());
    }
    (s / x.len() as f64).next_up()
}
