//! Certified rotation numbers, non-monotonicity witnesses and the derivative
//! of the rotation number with respect to `tau`.
//!
//! Both the rotation number and its derivative are pairings of the
//! displacement `phi` with a density. They are evaluated through the grid
//! solution `Psi` of the adjoint equation `Psi - M^T Psi = pi phi - c`, which
//! turns the pairing error into a residual of the computed density plus a
//! second-order term in the cell width.

mod nonmonotone;

pub use nonmonotone::{prove_nonmonotone, PairCheck, Relation, Verdict, WitnessReport};

use crate::certify::{certify_resolvent, stationary_measure, CertifiedDensity, MixingCertificate};
use crate::dynamics::{observable, NoisyMapParams};
use crate::error::{Error, Result};
use crate::rigor::{add_up, div_up, l1_norm_upper, mul_up, osc_upper, IVal};
use crate::ulam::{assemble_deterministic_shifted, Partition};
use serde::{Deserialize, Serialize};

const ADJOINT_TOL: f64 = 1e-12;
const ADJOINT_MAX_ITER: usize = 1_000_000;
/// Iterations without halving the step before the float floor is assumed.
const ADJOINT_STALL: usize = 500;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RotationEnclosure {
    pub params: NoisyMapParams,
    #[serde(rename = "N")]
    pub n_cells: usize,
    pub value: IVal,
    /// Pairing with the density enclosure widened by `sup|phi - c| * l1_error`.
    pub crude: IVal,
    pub density_error: f64,
    /// Half-width added by the adjoint bound on top of the discrete pairing.
    pub quadrature_error: f64,
}

/// Float solution of the grid adjoint equation with certified error data.
#[derive(Clone, Debug)]
pub struct AdjointSolution {
    pub v: Vec<f64>,
    /// Upper bound on the oscillation of the exact grid solution minus `v`.
    pub osc_error: f64,
    /// Bound on `|Psi(y + xi) - Psi(y)| / xi`.
    pub lambda: f64,
    /// Lipschitz bound of `phi + L^* Psi`.
    pub lambda_a: f64,
    pub iterations: usize,
}

/// Cell averages of `phi` on the density's grid.
fn phi_averages(p: &NoisyMapParams, n: usize) -> Vec<IVal> {
    let obs = observable(p);
    (0..n).map(|i| obs.cell_average(i, n)).collect()
}

/// Solve the adjoint equation for `dens` by centred fixed-point iteration.
pub fn adjoint(dens: &CertifiedDensity, p: &NoisyMapParams) -> Result<AdjointSolution> {
    let n = dens.part.n();
    let m = &dens.matrix;
    let phi = phi_averages(p, n);
    let fhat = dens.midpoints();
    let pm: Vec<f64> = phi.iter().map(|x| x.mid()).collect();
    let c = pm.iter().zip(&fhat).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let g: Vec<f64> = pm.iter().map(|x| x - c).collect();
    let mut v = vec![0.0; n];
    let mut iterations = 0;
    if p.eps != 0.0 {
        let mut w = vec![0.0; n];
        let (mut record, mut since) = (f64::INFINITY, 0);
        while iterations < ADJOINT_MAX_ITER {
            m.apply_transpose_f64(&v, &mut w);
            let mut shift = 0.0;
            for i in 0..n {
                w[i] += g[i];
                shift += w[i] * fhat[i];
            }
            shift /= n as f64;
            let mut step: f64 = 0.0;
            let mut size: f64 = 0.0;
            for i in 0..n {
                w[i] -= shift;
                step = step.max((w[i] - v[i]).abs());
                size = size.max(w[i].abs());
            }
            std::mem::swap(&mut v, &mut w);
            iterations += 1;
            if step <= ADJOINT_TOL * (1.0 + size) {
                break;
            }
            if step < 0.5 * record {
                (record, since) = (step, 0);
            } else {
                since += 1;
                if since > ADJOINT_STALL {
                    break;
                }
            }
        }
    }
    // r = pi phi + M^T v - v, up to a constant
    let mtv = m.apply_transpose_point(&v)?;
    let r: Vec<IVal> = (0..n).map(|i| phi[i] + mtv[i] - v[i]).collect();
    let osc_error = mul_up(dens.resolvent_grid, osc_upper(&r));
    if !osc_error.is_finite() {
        return Err(Error::IncompatibleCertificate("grid resolvent bound is not finite".into()));
    }
    let xi = p.xi;
    let shifts = IVal::point(xi) * IVal::point(n as f64);
    let (k0, k1) = (shifts.lo().floor() as usize, shifts.hi().ceil() as usize);
    let mut jump: f64 = 0.0;
    for k in k0..=k1 {
        let k = k % n;
        for i in 0..n {
            let j = if i + k >= n { i + k - n } else { i + k };
            jump = jump.max((v[j] - v[i]).abs().next_up());
        }
    }
    let lambda = div_up(add_up(jump, osc_error), xi);
    let lambda_a = add_up(p.eps, mul_up(p.lip_upper(), lambda));
    Ok(AdjointSolution { v, osc_error, lambda, lambda_a, iterations })
}

fn check_density(dens: &CertifiedDensity, p: &NoisyMapParams) -> Result<()> {
    if dens.params != *p {
        return Err(Error::IncompatibleCertificate(format!(
            "density is for (tau, eps, xi) = ({}, {}, {})",
            dens.params.tau, dens.params.eps, dens.params.xi
        )));
    }
    Ok(())
}

/// Certified enclosure of the rotation number `int phi f`.
pub fn rotation_number(dens: &CertifiedDensity, p: &NoisyMapParams) -> Result<RotationEnclosure> {
    check_density(dens, p)?;
    let adj = adjoint(dens, p)?;
    rotation_with(dens, p, &adj)
}

pub fn rotation_with(dens: &CertifiedDensity, p: &NoisyMapParams, adj: &AdjointSolution) -> Result<RotationEnclosure> {
    check_density(dens, p)?;
    let n = dens.part.n();
    let phi = phi_averages(p, n);
    let f = &dens.values;
    let center: IVal = phi.iter().zip(f).map(|(a, b)| *a * *b).sum::<IVal>().div_scalar(n as f64)?;
    let l1 = dens.l1_error.hi();
    let crude = center.inflate(mul_up(observable(p).half_osc(), l1));

    let image = dens.matrix.apply(f)?;
    let r: Vec<IVal> = image.iter().zip(f).map(|(a, b)| *a - *b).collect();
    let pair: IVal = adj.v.iter().zip(&r).map(|(&v, &ri)| ri * v).sum::<IVal>().div_scalar(n as f64)?;
    let dx = IVal::ONE.checked_div(IVal::point(n as f64) * IVal::point(p.xi))?.hi();
    let delta = IVal::ratio(1.0, n as f64).hi();
    // |<(I - pi) A, f>| <= Lip(A) d^2 / 8 * Var f, Var f <= 2 / xi
    let second = mul_up(mul_up(adj.lambda_a, delta), dx) / 4.0;
    let second = second.next_up();
    let slack = add_up(second, mul_up(adj.osc_error / 2.0, l1_norm_upper(&r)));
    let dual = (center + pair).inflate(slack);
    let value = dual.intersect(crude).unwrap_or(dual);
    Ok(RotationEnclosure {
        params: *p,
        n_cells: n,
        value,
        crude,
        density_error: l1,
        quadrature_error: slack,
    })
}

/// Grids used for one rotation-number evaluation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GridPlan {
    /// Starting size of the grid that certifies the resolvent.
    pub coarse: usize,
    /// Largest coarse size tried.
    pub coarse_limit: usize,
    /// Grid of the density and the adjoint.
    pub fine: usize,
    /// Step budget for the mixing rates.
    pub n_max: usize,
}

impl Default for GridPlan {
    fn default() -> Self {
        GridPlan { coarse: 1024, coarse_limit: 4096, fine: 16384, n_max: 2000 }
    }
}

/// Certificate, density and rotation enclosure at one parameter.
pub fn rotation_at(p: &NoisyMapParams, plan: &GridPlan) -> Result<(MixingCertificate, CertifiedDensity, RotationEnclosure)> {
    let cert = certify_resolvent(p, plan.coarse, plan.coarse_limit, plan.n_max)?;
    let dens = stationary_measure(p, &Partition::new(plan.fine)?, &cert)?;
    let rot = rotation_number(&dens, p)?;
    Ok((cert, dens, rot))
}

/// Individual error contributions to the derivative enclosure.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct DerivativeBudget {
    /// Grid adjoint error paired with the source term.
    pub adjoint: f64,
    /// Projection defect of the stationary density.
    pub projection: f64,
    /// Second-order projection term through the resolvent.
    pub projection_resolvent: f64,
    /// Residual of the computed density.
    pub residual: f64,
    /// Cell-scale part of the observable paired with the source term.
    pub observable: f64,
    /// Cell-scale part of the observable paired with the response.
    pub observable_resolvent: f64,
}

impl DerivativeBudget {
    pub fn total(&self) -> f64 {
        [self.adjoint, self.projection, self.projection_resolvent, self.residual, self.observable, self.observable_resolvent]
            .into_iter()
            .fold(0.0, add_up)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivativeEnclosure {
    pub params: NoisyMapParams,
    #[serde(rename = "N")]
    pub n_cells: usize,
    pub value: IVal,
    /// `1 + <Psi, h>` on the grid, before the discretization budget.
    pub discrete: IVal,
    pub budget: DerivativeBudget,
    /// Terms of the primal series `sum_k M^k h` used as a cross-check.
    pub neumann_terms: usize,
    pub neumann_estimate: f64,
    /// Bound on the L1 mass of the truncated part of the primal series.
    pub tail_bound: IVal,
}

/// Certified enclosure of `d rho / d tau`. `cert` supplies the resolvent
/// bound of the true operator; `m_blocks` blocks of `cert.n` steps are summed
/// in the primal cross-check.
pub fn response_derivative(
    p: &NoisyMapParams,
    dens: &CertifiedDensity,
    cert: &MixingCertificate,
    m_blocks: usize,
) -> Result<DerivativeEnclosure> {
    check_density(dens, p)?;
    let adj = adjoint(dens, p)?;
    derivative_with(p, dens, cert, &adj, m_blocks)
}

pub fn derivative_with(
    p: &NoisyMapParams,
    dens: &CertifiedDensity,
    cert: &MixingCertificate,
    adj: &AdjointSolution,
    m_blocks: usize,
) -> Result<DerivativeEnclosure> {
    check_density(dens, p)?;
    if cert.params.eps != p.eps || cert.params.xi != p.xi || cert.params.tau != p.tau {
        return Err(Error::IncompatibleCertificate("certificate parameters differ from the density".into()));
    }
    if !dens.resolvent.is_finite() {
        return Err(Error::IncompatibleCertificate("density carries no resolvent bound".into()));
    }
    let n = dens.part.n();
    let xi = p.xi;
    let half = IVal::point(xi * 0.5);
    let plus = assemble_deterministic_shifted(p, &dens.part, half)?;
    let minus = assemble_deterministic_shifted(p, &dens.part, -half)?;
    let hp = plus.apply(&dens.values)?;
    let hm = minus.apply(&dens.values)?;
    let h: Vec<IVal> = hp.iter().zip(&hm).map(|(a, b)| (*a - *b).div_scalar(xi)).collect::<Result<_>>()?;
    let pair: IVal = adj.v.iter().zip(&h).map(|(&v, &hi)| hi * v).sum::<IVal>().div_scalar(n as f64)?;
    let discrete = IVal::ONE + pair;

    let r_true = dens.resolvent;
    let dx = IVal::ONE.checked_div(IVal::point(n as f64) * IVal::point(xi))?.hi();
    let dx2 = mul_up(dx, dx);
    let (lam, lam_a) = (adj.lambda, adj.lambda_a);
    let budget = DerivativeBudget {
        adjoint: mul_up(adj.osc_error / 2.0, l1_norm_upper(&h)).next_up(),
        projection: mul_up(lam, dx),
        projection_resolvent: (mul_up(mul_up(mul_up(p.lip_upper(), r_true), lam), dx2) / 2.0).next_up(),
        residual: mul_up(mul_up(lam, dens.resolvent_grid), dens.residual),
        observable: mul_up(lam_a, dx),
        observable_resolvent: (mul_up(mul_up(lam_a, r_true), dx2) / 2.0).next_up(),
    };
    let value = discrete.inflate(budget.total());

    // Primal cross-check: 1 + <phi, sum_k M^k h>.
    let terms = m_blocks.max(1) * cert.n;
    let phi: Vec<f64> = phi_averages(p, n).iter().map(|x| x.mid()).collect();
    let mut u: Vec<f64> = h.iter().map(|x| x.mid()).collect();
    let mut acc = 0.0;
    let mut next = vec![0.0; n];
    for _ in 0..terms {
        acc += phi.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        dens.matrix.apply_f64(&u, &mut next);
        std::mem::swap(&mut u, &mut next);
    }
    let rest = u.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
    let tail = mul_up(dens.resolvent_grid, rest);
    Ok(DerivativeEnclosure {
        params: *p,
        n_cells: n,
        value,
        discrete,
        budget,
        neumann_terms: terms,
        neumann_estimate: 1.0 + acc,
        tail_bound: IVal::new(0.0, tail),
    })
}

/// Derivative at one parameter with its own certificate and density.
pub fn derivative_at(p: &NoisyMapParams, plan: &GridPlan, m_blocks: usize) -> Result<DerivativeEnclosure> {
    let cert = certify_resolvent(p, plan.coarse, plan.coarse_limit, plan.n_max)?;
    let dens = stationary_measure(p, &Partition::new(plan.fine)?, &cert)?;
    response_derivative(p, &dens, &cert, m_blocks)
}
