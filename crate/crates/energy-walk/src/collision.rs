//! Collision-model embedding of the classical walk: the conditional shift
//! unitary on system (x) ancilla, the one-parameter ancilla family, the
//! reduced channel in closed form and via dilation, and its fixed point.
//!
//! Tensor ordering is |n> (x) |c> with ancilla basis order (+, 0, -). The top
//! boundary mirrors the bottom (|N,+> is left in place and the closed form
//! carries the matching coherence-injection terms), so the closed form and
//! the dilation agree exactly on the truncation.

use ndarray_linalg::Eig;
use num_complex::Complex64;

use crate::classical::classical_step;
use crate::error::{Error, Result};
use crate::ladder::{CMat, DensityOperator, PopulationVector, TransitionRates};
use crate::linalg::{dagger, kron, partial_trace_ancilla, trace_norm_hermitian};

const ANCILLA_DIM: usize = 3;

/// Three-level ancilla state `r_cc' = (1 - mu) p_c delta_cc' + mu sqrt(p_c p_c')`
/// over basis order (+, 0, -).
#[derive(Debug, Clone)]
pub struct AncillaState {
    matrix: CMat,
    pub p_plus: f64,
    pub p_zero: f64,
    pub p_minus: f64,
    pub mu: f64,
}

impl AncillaState {
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn purity(&self) -> f64 {
        self.matrix.dot(&self.matrix).diag().sum().re
    }
}

/// Build the ancilla state for constant rates and coherence parameter `mu`.
pub fn ancilla_state(rates: &TransitionRates, mu: f64) -> Result<AncillaState> {
    let (p_plus, p_zero, p_minus) = rates
        .as_constant()
        .ok_or(Error::LevelDependentUnsupported)?;
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::MuOutOfRange(mu));
    }
    let p = [p_plus, p_zero, p_minus];
    let mut matrix = CMat::zeros((ANCILLA_DIM, ANCILLA_DIM));
    for c in 0..ANCILLA_DIM {
        for c2 in 0..ANCILLA_DIM {
            let coherent = mu * (p[c] * p[c2]).sqrt();
            let diagonal = if c == c2 { (1.0 - mu) * p[c] } else { 0.0 };
            matrix[[c, c2]] = Complex64::new(diagonal + coherent, 0.0);
        }
    }
    Ok(AncillaState { matrix, p_plus, p_zero, p_minus, mu })
}

/// The conditional shift unitary on system (x) ancilla.
///
/// Bulk action: |n,+> -> |n+1,->, |n,-> -> |n-1,+>, |n,0> -> |n,0>.
/// Boundaries: |0,-> -> |0,-> and |N,+> -> |N,+>.
#[derive(Debug, Clone)]
pub struct CollisionUnitary {
    matrix: CMat,
    levels: usize,
}

impl CollisionUnitary {
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn levels(&self) -> usize {
        self.levels
    }
}

// ancilla basis indices
const PLUS: usize = 0;
const LAZY: usize = 1;
const MINUS: usize = 2;

pub fn build_collision_unitary(levels: usize) -> Result<CollisionUnitary> {
    if levels < 2 {
        return Err(Error::TooFewLevels { min: 2, got: levels });
    }
    let dim = levels * ANCILLA_DIM;
    let top = levels - 1;
    let one = Complex64::new(1.0, 0.0);
    let idx = |n: usize, c: usize| n * ANCILLA_DIM + c;
    let mut u = CMat::zeros((dim, dim));
    for n in 0..levels {
        // lazy channel stays put
        u[[idx(n, LAZY), idx(n, LAZY)]] = one;
        // upward channel flips to the downward one
        if n < top {
            u[[idx(n + 1, MINUS), idx(n, PLUS)]] = one;
        } else {
            u[[idx(top, PLUS), idx(top, PLUS)]] = one;
        }
        // downward channel flips to the upward one
        if n > 0 {
            u[[idx(n - 1, PLUS), idx(n, MINUS)]] = one;
        } else {
            u[[idx(0, MINUS), idx(0, MINUS)]] = one;
        }
    }
    Ok(CollisionUnitary { matrix: u, levels })
}

/// Parameters of the reduced channel `Phi_mu`.
#[derive(Debug, Clone)]
pub struct ChannelConfig {
    pub rates: TransitionRates,
    pub mu: f64,
    pub levels: usize,
}

impl ChannelConfig {
    pub fn new(rates: TransitionRates, mu: f64, levels: usize) -> Result<Self> {
        if rates.as_constant().is_none() {
            return Err(Error::LevelDependentUnsupported);
        }
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::MuOutOfRange(mu));
        }
        if rates.levels() != levels {
            return Err(Error::RateShapeMismatch { rates: rates.levels(), state: levels });
        }
        Ok(Self { rates, mu, levels })
    }

    fn triple(&self) -> (f64, f64, f64) {
        self.rates.as_constant().expect("constant rates enforced at construction")
    }
}

/// Raw closed-form action of `Phi_mu` on an arbitrary matrix.
///
/// `p_+ S_+ X S_+^dag + p_0 X + p_- S_- X S_-^dag + p_- P_0 X P_0
///  + p_+ P_N X P_N + mu sqrt(p_+ p_-) (S_+ X P_0 + P_0 X S_- + S_- X P_N + P_N X S_+)`
/// evaluated with index shifts instead of matrix products.
fn apply_closed_raw(x: &CMat, p_plus: f64, p_zero: f64, p_minus: f64, mu: f64) -> CMat {
    let d = x.nrows();
    let top = d - 1;
    let coh = mu * (p_plus * p_minus).sqrt();
    let mut out = CMat::zeros((d, d));
    for m in 0..d {
        for n in 0..d {
            let mut acc = p_zero * x[[m, n]];
            if m >= 1 && n >= 1 {
                acc += p_plus * x[[m - 1, n - 1]];
            }
            if m < top && n < top {
                acc += p_minus * x[[m + 1, n + 1]];
            }
            out[[m, n]] = acc;
        }
    }
    out[[0, 0]] += p_minus * x[[0, 0]];
    out[[top, top]] += p_plus * x[[top, top]];
    if coh != 0.0 {
        // S_+ X P_0 and its adjoint partner
        for m in 1..d {
            out[[m, 0]] += coh * x[[m - 1, 0]];
        }
        for n in 1..d {
            out[[0, n]] += coh * x[[0, n - 1]];
        }
        // S_- X P_N and its adjoint partner
        for m in 0..top {
            out[[m, top]] += coh * x[[m + 1, top]];
        }
        for n in 0..top {
            out[[top, n]] += coh * x[[top, n + 1]];
        }
    }
    out
}

/// Closed-form channel action on an arbitrary (not necessarily positive)
/// matrix; used for propagating coherence corrections and superoperator
/// assembly.
pub fn apply_channel_matrix(x: &CMat, cfg: &ChannelConfig) -> CMat {
    let (p_plus, p_zero, p_minus) = cfg.triple();
    apply_closed_raw(x, p_plus, p_zero, p_minus, cfg.mu)
}

/// One step of the reduced channel in closed form.
pub fn collision_step_closed(rho: &DensityOperator, cfg: &ChannelConfig) -> Result<DensityOperator> {
    if rho.dimension() != cfg.levels {
        return Err(Error::DimensionMismatch { left: rho.dimension(), right: cfg.levels });
    }
    let (p_plus, p_zero, p_minus) = cfg.triple();
    DensityOperator::new(apply_closed_raw(rho.matrix(), p_plus, p_zero, p_minus, cfg.mu))
}

/// One step of the reduced channel via the dilation: partial trace of
/// `U (rho (x) rho_mu) U^dag` over the ancilla. Independent oracle for the
/// closed form.
pub fn collision_step_dilated(
    rho: &DensityOperator,
    cfg: &ChannelConfig,
) -> Result<DensityOperator> {
    if rho.dimension() != cfg.levels {
        return Err(Error::DimensionMismatch { left: rho.dimension(), right: cfg.levels });
    }
    let unitary = build_collision_unitary(cfg.levels)?;
    let ancilla = ancilla_state(&cfg.rates, cfg.mu)?;
    let joint = kron(rho.matrix(), ancilla.matrix());
    let evolved = unitary.matrix.dot(&joint).dot(&dagger(&unitary.matrix));
    DensityOperator::new(partial_trace_ancilla(&evolved, cfg.levels, ANCILLA_DIM))
}

/// `Phi_mu(rho) - Phi_0(rho)`: the coherence-generating part, a traceless
/// Hermitian matrix supported on the (0,1) and (N-1,N) entry pairs after one
/// step from a diagonal state.
pub fn coherent_part(rho: &DensityOperator, cfg: &ChannelConfig) -> Result<CMat> {
    if rho.dimension() != cfg.levels {
        return Err(Error::DimensionMismatch { left: rho.dimension(), right: cfg.levels });
    }
    let (p_plus, p_zero, p_minus) = cfg.triple();
    let full = apply_closed_raw(rho.matrix(), p_plus, p_zero, p_minus, cfg.mu);
    let incoherent = apply_closed_raw(rho.matrix(), p_plus, p_zero, p_minus, 0.0);
    Ok(full - incoherent)
}

/// First-order-in-mu propagation of a diagonal initial state:
/// `Phi_0^t(rho_0) + mu Sigma_t` with
/// `Sigma_t = sqrt(p_+ p_-) sum_j [p_j(0) Phi_0^{t-1-j}(A_0) + p_j(N) Phi_0^{t-1-j}(A_N)]`,
/// `A_0 = |1><0| + |0><1|` and `A_N` its mirror at the top closure.
///
/// The result is Hermitian with unit trace but only perturbatively positive;
/// eigenvalue dips above -1e-6 are tolerated.
pub fn first_order_state(
    pop0: &PopulationVector,
    cfg: &ChannelConfig,
    steps: usize,
) -> Result<DensityOperator> {
    if pop0.levels() != cfg.levels {
        return Err(Error::DimensionMismatch { left: pop0.levels(), right: cfg.levels });
    }
    let (p_plus, p_zero, p_minus) = cfg.triple();
    let d = cfg.levels;
    let top = d - 1;
    let root = (p_plus * p_minus).sqrt();
    let mut pops = pop0.clone();
    let mut correction = CMat::zeros((d, d));
    for _ in 0..steps {
        correction = apply_closed_raw(&correction, p_plus, p_zero, p_minus, 0.0);
        let w0 = Complex64::new(root * pops.prob(0), 0.0);
        let wn = Complex64::new(root * pops.prob(top), 0.0);
        correction[[1, 0]] += w0;
        correction[[0, 1]] += w0;
        correction[[top - 1, top]] += wn;
        correction[[top, top - 1]] += wn;
        pops = classical_step(&pops, &cfg.rates)?;
    }
    let mut out = correction * Complex64::new(cfg.mu, 0.0);
    for (n, &p) in pops.probs().iter().enumerate() {
        out[[n, n]] += Complex64::new(p, 0.0);
    }
    DensityOperator::with_psd_floor(out, -1e-6)
}

const UNIT_EIGENVALUE_TOL: f64 = 1e-10;
const FIXED_POINT_RESIDUAL_TOL: f64 = 1e-13;
const FIXED_POINT_POLISH_MAX: usize = 20_000;

/// Matrix representation of `Phi_mu` on row-major vectorized operators.
pub fn superoperator_matrix(cfg: &ChannelConfig) -> CMat {
    let d = cfg.levels;
    let (p_plus, p_zero, p_minus) = cfg.triple();
    let mut sup = CMat::zeros((d * d, d * d));
    // column k of the superoperator is the vectorized image of a basis matrix
    for i in 0..d {
        for j in 0..d {
            let mut basis = CMat::zeros((d, d));
            basis[[i, j]] = Complex64::new(1.0, 0.0);
            let image = apply_closed_raw(&basis, p_plus, p_zero, p_minus, cfg.mu);
            let col = i * d + j;
            for m in 0..d {
                for n in 0..d {
                    sup[[m * d + n, col]] = image[[m, n]];
                }
            }
        }
    }
    sup
}

/// Stationary state of `Phi_mu`, from the unit-eigenvalue eigenvector of the
/// vectorized channel, polished by direct iteration until the trace-norm
/// residual is at machine scale.
pub fn channel_fixed_point(cfg: &ChannelConfig) -> Result<DensityOperator> {
    let (p_plus, _, p_minus) = cfg.triple();
    if p_minus <= p_plus {
        return Err(Error::UnbiasedRates { p_plus, p_minus });
    }
    let d = cfg.levels;
    let sup = superoperator_matrix(cfg);
    let (eigs, vecs) = sup.eig()?;
    let mut unit_indices = Vec::new();
    let mut closest = f64::INFINITY;
    for (k, lambda) in eigs.iter().enumerate() {
        let dist = (lambda - Complex64::new(1.0, 0.0)).norm();
        closest = closest.min(dist);
        if dist < UNIT_EIGENVALUE_TOL {
            unit_indices.push(k);
        }
    }
    match unit_indices.len() {
        0 => return Err(Error::NoUnitEigenvalue { tol: UNIT_EIGENVALUE_TOL, closest }),
        1 => {}
        _ => return Err(Error::NonUniqueFixedPoint { gap: closest }),
    }
    let v = vecs.column(unit_indices[0]);
    let mut candidate = CMat::zeros((d, d));
    for m in 0..d {
        for n in 0..d {
            candidate[[m, n]] = v[m * d + n];
        }
    }
    // remove the arbitrary eigenvector phase and scale, then Hermitize
    let trace: Complex64 = candidate.diag().sum();
    if trace.norm() < 1e-12 {
        return Err(Error::Linalg("unit eigenvector has vanishing trace".into()));
    }
    candidate = candidate / trace;
    candidate = (&candidate + &dagger(&candidate)) / Complex64::new(2.0, 0.0);
    // polish: the channel contracts toward the fixed point at the rate of the
    // subdominant eigenvalue, so a short iteration removes the eigensolver
    // rounding
    let (pp, pz, pm) = cfg.triple();
    let mut residual = f64::INFINITY;
    for _ in 0..FIXED_POINT_POLISH_MAX {
        let next = apply_closed_raw(&candidate, pp, pz, pm, cfg.mu);
        residual = trace_norm_hermitian(&(&next - &candidate))?;
        candidate = next;
        if residual < FIXED_POINT_RESIDUAL_TOL {
            return DensityOperator::new(candidate);
        }
    }
    Err(Error::NoConvergence { max_iters: FIXED_POINT_POLISH_MAX, residual })
}

/// Convenience: iterate the exact channel from a diagonal initial state.
pub fn quantum_trajectory_states(
    pop0: &PopulationVector,
    cfg: &ChannelConfig,
    steps: usize,
) -> Result<Vec<DensityOperator>> {
    let mut states = Vec::with_capacity(steps + 1);
    states.push(crate::ladder::embed_diagonal(pop0));
    for _ in 0..steps {
        let next = collision_step_closed(states.last().unwrap(), cfg)?;
        states.push(next);
    }
    Ok(states)
}
