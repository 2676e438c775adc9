//! Incoherent energy-space dynamics: the birth-death-lazy map, its matrix and
//! Kraus forms, stationary and Gibbs analysis, spectral gap, Cesaro averaging,
//! and the local detailed-balance construction.
//!
//! The truncated ladder closes reflectively at the top: the upward channel at
//! level N acts as a lazy step, which preserves stochasticity exactly.

use ndarray::prelude::*;
use ndarray_linalg::Eig;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ladder::{
    CMat, EnergySpectrum, PopulationVector, TransitionRates, RATE_SUM_TOL,
};

/// Column-stochastic tridiagonal matrix form of the classical map:
/// `T[m, n]` is the probability of the transition `n -> m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    matrix: Array2<f64>,
}

impl TransitionMatrix {
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        let (rows, cols) = matrix.dim();
        if rows != cols {
            return Err(Error::DimensionMismatch { left: rows, right: cols });
        }
        for ((m, n), &v) in matrix.indexed_iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidRates(format!(
                    "entry ({m}, {n}) = {v} outside [0, 1]"
                )));
            }
            if m.abs_diff(n) > 1 && v != 0.0 {
                return Err(Error::InvalidRates(format!(
                    "entry ({m}, {n}) = {v} breaks tridiagonal structure"
                )));
            }
        }
        for n in 0..cols {
            let sum: f64 = matrix.column(n).sum();
            if (sum - 1.0).abs() > RATE_SUM_TOL {
                return Err(Error::InvalidRates(format!(
                    "column {n} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    /// Apply the matrix to a probability vector (one step of the chain).
    pub fn apply(&self, pop: &PopulationVector) -> Result<PopulationVector> {
        if pop.levels() != self.dimension() {
            return Err(Error::DimensionMismatch {
                left: self.dimension(),
                right: pop.levels(),
            });
        }
        let v = Array1::from_vec(pop.probs().to_vec());
        PopulationVector::new(self.matrix.dot(&v).to_vec())
    }
}

/// One step of the birth-death-lazy recurrence with reflecting top boundary.
pub fn classical_step(pop: &PopulationVector, rates: &TransitionRates) -> Result<PopulationVector> {
    let levels = pop.levels();
    if rates.levels() != levels {
        return Err(Error::RateShapeMismatch { rates: rates.levels(), state: levels });
    }
    let p = pop.probs();
    let top = levels - 1;
    let mut out = vec![0.0; levels];
    out[0] = (rates.p_minus(0) + rates.p_zero(0)) * p[0] + rates.p_minus(1) * p[1];
    for n in 1..top {
        out[n] = rates.p_plus(n - 1) * p[n - 1]
            + rates.p_zero(n) * p[n]
            + rates.p_minus(n + 1) * p[n + 1];
    }
    out[top] = rates.p_plus(top - 1) * p[top - 1]
        + (rates.p_zero(top) + rates.p_plus(top)) * p[top];
    PopulationVector::new(out)
}

/// Iterate `classical_step`, returning the trajectory including the initial
/// state: `steps + 1` vectors.
pub fn classical_trajectory(
    pop0: &PopulationVector,
    rates: &TransitionRates,
    steps: usize,
) -> Result<Vec<PopulationVector>> {
    let mut traj = Vec::with_capacity(steps + 1);
    traj.push(pop0.clone());
    for _ in 0..steps {
        let next = classical_step(traj.last().unwrap(), rates)?;
        traj.push(next);
    }
    Ok(traj)
}

/// Assemble the column-stochastic matrix realizing `classical_step` exactly.
pub fn build_transition_matrix(rates: &TransitionRates) -> Result<TransitionMatrix> {
    let levels = rates.levels();
    let top = levels - 1;
    let mut m = Array2::<f64>::zeros((levels, levels));
    m[[0, 0]] = rates.p_minus(0) + rates.p_zero(0);
    for n in 1..levels {
        m[[n - 1, n]] = rates.p_minus(n);
        m[[n, n]] = rates.p_zero(n);
    }
    for n in 0..top {
        m[[n + 1, n]] = rates.p_plus(n);
    }
    m[[top, top]] += rates.p_plus(top);
    TransitionMatrix::new(m)
}

/// Kraus operators of the constant-rate map on the truncated ladder.
///
/// The top-boundary closure `K_+^b = sqrt(p_+) |N><N|` mirrors the ground
/// boundary operator and restores completeness on the truncation.
#[derive(Debug, Clone)]
pub struct KrausSet {
    pub down_boundary: CMat,
    pub down: CMat,
    pub stay: CMat,
    pub up: CMat,
    pub up_boundary: CMat,
}

impl KrausSet {
    pub fn operators(&self) -> [&CMat; 5] {
        [&self.down_boundary, &self.down, &self.stay, &self.up, &self.up_boundary]
    }

    /// Apply the channel `rho -> sum_k K_k rho K_k^dagger`.
    pub fn apply(&self, rho: &CMat) -> CMat {
        let mut out = CMat::zeros(rho.raw_dim());
        for k in self.operators() {
            let k_dag = k.t().mapv(|z| z.conj());
            out = out + k.dot(rho).dot(&k_dag);
        }
        out
    }
}

/// Kraus operators for constant rates on `levels` levels.
pub fn kraus_operators(rates: &TransitionRates, levels: usize) -> Result<KrausSet> {
    let (p_plus, p_zero, p_minus) = rates
        .as_constant()
        .ok_or(Error::LevelDependentUnsupported)?;
    if rates.levels() != levels {
        return Err(Error::RateShapeMismatch { rates: rates.levels(), state: levels });
    }
    let top = levels - 1;
    let c = |x: f64| Complex64::new(x, 0.0);
    let mut down_boundary = CMat::zeros((levels, levels));
    down_boundary[[0, 0]] = c(p_minus.sqrt());
    let mut down = CMat::zeros((levels, levels));
    for n in 1..levels {
        down[[n - 1, n]] = c(p_minus.sqrt());
    }
    let stay = CMat::eye(levels) * c(p_zero.sqrt());
    let mut up = CMat::zeros((levels, levels));
    for n in 0..top {
        up[[n + 1, n]] = c(p_plus.sqrt());
    }
    let mut up_boundary = CMat::zeros((levels, levels));
    up_boundary[[top, top]] = c(p_plus.sqrt());
    Ok(KrausSet { down_boundary, down, stay, up, up_boundary })
}

/// `Phi(1) - 1` of the constant-rate channel on the truncation; equals
/// `(p_- - p_+) P_0 + (p_+ - p_-) P_N`.
pub fn unitality_defect(rates: &TransitionRates, levels: usize) -> Result<CMat> {
    let kraus = kraus_operators(rates, levels)?;
    let eye = CMat::eye(levels);
    Ok(kraus.apply(&eye) - &eye)
}

/// Which normalization the stationary solution refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryForm {
    /// Exact fixed point of the truncated reflecting chain.
    Truncated,
    /// Semi-infinite ladder; requires `p_+ < p_-` for normalizability.
    Infinite,
}

/// Closed-form stationary distribution.
///
/// Constant rates give the geometric solution with ratio `r = p_+/p_-`;
/// level-dependent rates give the zero-current product form
/// `w(n) = prod_{k<n} p_+(k)/p_-(k+1)`. On the truncation both are
/// normalized over `0..N`, which is the exact fixed point of the reflecting
/// chain.
pub fn stationary_closed_form(
    rates: &TransitionRates,
    form: StationaryForm,
) -> Result<PopulationVector> {
    let levels = rates.levels();
    if let Some((p_plus, _, p_minus)) = rates.as_constant() {
        if form == StationaryForm::Infinite && p_plus >= p_minus {
            return Err(Error::NotNormalizable { p_plus, p_minus });
        }
        if p_minus == 0.0 {
            return Err(Error::InvalidRates("p_minus = 0 leaves no downward channel".into()));
        }
        let r = p_plus / p_minus;
        let mut w = Vec::with_capacity(levels);
        let mut x = 1.0;
        for _ in 0..levels {
            w.push(x);
            x *= r;
        }
        let norm: f64 = w.iter().sum();
        return PopulationVector::new(w.into_iter().map(|v| v / norm).collect());
    }
    let mut w = Vec::with_capacity(levels);
    let mut x = 1.0;
    w.push(x);
    for n in 1..levels {
        let down = rates.p_minus(n);
        if down == 0.0 {
            return Err(Error::InvalidRates(format!(
                "p_minus({n}) = 0 breaks the zero-current product form"
            )));
        }
        x *= rates.p_plus(n - 1) / down;
        w.push(x);
    }
    let norm: f64 = w.iter().sum();
    PopulationVector::new(w.into_iter().map(|v| v / norm).collect())
}

/// Stationary vector found by deterministic power iteration.
#[derive(Debug, Clone)]
pub struct StationaryFixedPoint {
    pub populations: PopulationVector,
    /// Set when the chain's spectral gap is below 1e-12 and the fixed point
    /// is therefore not unique; the returned vector is then seed-dependent.
    pub non_unique: bool,
}

const POWER_ITERATION_TOL: f64 = 1e-13;
const POWER_ITERATION_MAX: usize = 1_000_000;

/// Power iteration seeded with the uniform vector; converges when the
/// total-variation change per sweep drops below 1e-13.
pub fn stationary_numeric(t: &TransitionMatrix) -> Result<StationaryFixedPoint> {
    let d = t.dimension();
    let mut v = Array1::from_elem(d, 1.0 / d as f64);
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_ITERATION_MAX {
        let next = t.matrix().dot(&v);
        residual = 0.5 * v.iter().zip(next.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>();
        v = next;
        if residual < POWER_ITERATION_TOL {
            let populations = PopulationVector::new(v.to_vec())?;
            let gap = spectral_gap(t)?;
            return Ok(StationaryFixedPoint { populations, non_unique: gap < 1e-12 });
        }
    }
    Err(Error::NoConvergence { max_iters: POWER_ITERATION_MAX, residual })
}

/// `1 - |lambda_2|` from a full dense eigendecomposition.
pub fn spectral_gap(t: &TransitionMatrix) -> Result<f64> {
    let m = t.matrix().mapv(|x| Complex64::new(x, 0.0));
    let (eigs, _) = m.eig()?;
    let mut moduli: Vec<f64> = eigs.iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok((1.0 - moduli[1]).max(0.0))
}

/// Entrywise mean over a trajectory of population vectors.
pub fn cesaro_average(trajectory: &[PopulationVector]) -> Result<PopulationVector> {
    let tau = trajectory.len();
    if tau == 0 {
        return Err(Error::EmptyTrajectory);
    }
    let levels = trajectory[0].levels();
    let mut acc = vec![0.0; levels];
    for pop in trajectory {
        if pop.levels() != levels {
            return Err(Error::LengthMismatch { left: levels, right: pop.levels() });
        }
        for (a, &p) in acc.iter_mut().zip(pop.probs()) {
            *a += p;
        }
    }
    PopulationVector::new(acc.into_iter().map(|a| a / tau as f64).collect())
}

/// Rates satisfying local detailed balance at inverse temperature `beta`:
/// `p_+(n) / p_-(n+1) = exp(-beta (E_{n+1} - E_n))` for every gap.
///
/// Gauge fixing: `p_-(n) = c` everywhere and `p_+(n) = c exp(-beta gap(n))`
/// (the last gap is reused above the top level, which the reflecting boundary
/// never exercises), with `c` the largest scale whose lazy remainder
/// `1 - p_+ - p_-` stays at or above `lazy_profile` at every level.
pub fn detailed_balance_rates(
    beta: f64,
    spectrum: &EnergySpectrum,
    lazy_profile: &[f64],
) -> Result<TransitionRates> {
    if beta <= 0.0 {
        return Err(Error::InvalidRates(format!("beta must be positive, got {beta}")));
    }
    let levels = spectrum.levels();
    if lazy_profile.len() != levels {
        return Err(Error::LengthMismatch { left: levels, right: lazy_profile.len() });
    }
    let top = levels - 1;
    let up_weight: Vec<f64> = (0..levels)
        .map(|n| (-beta * spectrum.gap_above(n.min(top - 1))).exp())
        .collect();
    let mut scale = f64::INFINITY;
    let mut binding_level = 0;
    for n in 0..levels {
        let room = 1.0 - lazy_profile[n];
        let c_n = room / (1.0 + up_weight[n]);
        if c_n < scale {
            scale = c_n;
            binding_level = n;
        }
    }
    if !(scale > 0.0) {
        return Err(Error::InfeasibleRates { level: binding_level });
    }
    let uniform = up_weight.iter().all(|&w| w == up_weight[0]);
    if uniform {
        let up = scale * up_weight[0];
        let down = scale;
        return TransitionRates::constant(up, 1.0 - up - down, down, levels);
    }
    let up: Vec<f64> = up_weight.iter().map(|&w| scale * w).collect();
    let down = vec![scale; levels];
    let stay: Vec<f64> = up.iter().map(|&u| 1.0 - u - scale).collect();
    TransitionRates::level_dependent(up, stay, down)
}

/// Effective temperature of the constant-rate chain on a uniform ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveTemperature {
    pub temperature: f64,
    pub beta: f64,
}

/// `T = gap / ln(p_-/p_+)` and its inverse.
pub fn effective_temperature(rates: &TransitionRates, gap: f64) -> Result<EffectiveTemperature> {
    let (p_plus, _, p_minus) = rates
        .as_constant()
        .ok_or(Error::LevelDependentUnsupported)?;
    if gap <= 0.0 {
        return Err(Error::NonPositiveGap(gap));
    }
    if p_plus == 0.0 {
        return Err(Error::ZeroUpRate);
    }
    if p_plus >= p_minus {
        return Err(Error::UnbiasedRates { p_plus, p_minus });
    }
    let temperature = gap / (p_minus / p_plus).ln();
    Ok(EffectiveTemperature { temperature, beta: 1.0 / temperature })
}

/// Partial sums of the ground-level occupation along a trajectory:
/// entry `t - 1` holds `sum_{j < t} p_j(0)`.
pub fn boundary_cumsum(trajectory: &[PopulationVector]) -> Result<Vec<f64>> {
    if trajectory.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut sums = Vec::with_capacity(trajectory.len());
    let mut acc = 0.0;
    for pop in trajectory {
        acc += pop.prob(0);
        sums.push(acc);
    }
    Ok(sums)
}
