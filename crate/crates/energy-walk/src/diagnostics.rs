//! Distance measures, Gibbs matching, trajectory diagnostics, asymptotic
//! deviation, and decay-rate fits: the quantities behind the equilibration
//! and thermalization plots.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::classical::{
    classical_step, stationary_closed_form, StationaryForm,
};
use crate::collision::{apply_channel_matrix, channel_fixed_point, collision_step_closed, ChannelConfig};
use crate::error::{Error, Result};
use crate::ladder::{
    dephase, embed_diagonal, CMat, DensityOperator, EnergySpectrum, PopulationVector,
    TransitionRates,
};
use crate::linalg::trace_norm_hermitian;

/// Top-level occupation above this threshold means the truncation is being
/// felt and results carry a warning.
pub const BOUNDARY_GUARD_TOL: f64 = 1e-8;

/// Half the trace norm of the difference of two density operators.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    if a.dimension() != b.dimension() {
        return Err(Error::DimensionMismatch { left: a.dimension(), right: b.dimension() });
    }
    Ok(0.5 * trace_norm_hermitian(&(a.matrix() - b.matrix()))?)
}

/// Total-variation distance between two classical distributions.
pub fn total_variation(p: &PopulationVector, q: &PopulationVector) -> Result<f64> {
    if p.levels() != q.levels() {
        return Err(Error::LengthMismatch { left: p.levels(), right: q.levels() });
    }
    Ok(0.5
        * p.probs()
            .iter()
            .zip(q.probs())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// Gibbs state matched to a given mean occupation on a uniform ladder.
#[derive(Debug, Clone)]
pub struct GibbsMatch {
    /// Inverse temperature; `+inf` when the mean occupation is zero.
    pub beta: f64,
    /// Boltzmann ratio `q = exp(-beta E)` between adjacent levels.
    pub q: f64,
    /// Geometric populations `(1 - q) q^n` normalized on the truncation.
    pub populations: PopulationVector,
}

/// Invert `mean = q / (1 - q)` for the uniform ladder:
/// `q = mean / (1 + mean)`, `beta = ln(1 + 1/mean) / E`.
pub fn gibbs_match(mean_n: f64, spectrum: &EnergySpectrum) -> Result<GibbsMatch> {
    let gap = spectrum
        .uniform_gap()
        .ok_or_else(|| Error::InvalidSpectrum("gibbs_match requires a uniform spectrum".into()))?;
    let levels = spectrum.levels();
    if mean_n <= 0.0 {
        return Ok(GibbsMatch {
            beta: f64::INFINITY,
            q: 0.0,
            populations: PopulationVector::delta(0, levels)?,
        });
    }
    let q = mean_n / (1.0 + mean_n);
    let beta = (1.0 + 1.0 / mean_n).ln() / gap;
    let mut weights = Vec::with_capacity(levels);
    let mut x = 1.0;
    for _ in 0..levels {
        weights.push(x);
        x *= q;
    }
    let norm: f64 = weights.iter().sum();
    let populations = PopulationVector::new(weights.into_iter().map(|w| w / norm).collect())?;
    Ok(GibbsMatch { beta, q, populations })
}

/// Gibbs populations `exp(-beta E_n) / Z` on an arbitrary truncated spectrum.
pub fn gibbs_populations(beta: f64, spectrum: &EnergySpectrum) -> Result<PopulationVector> {
    let weights: Vec<f64> = spectrum.energies().iter().map(|&e| (-beta * e).exp()).collect();
    let z: f64 = weights.iter().sum();
    PopulationVector::new(weights.into_iter().map(|w| w / z).collect())
}

const BETA_BISECTION_LO: f64 = 1e-8;
const BETA_BISECTION_HI: f64 = 1e3;

/// Match the mean energy on a general spectrum by monotone bisection on beta.
pub fn match_beta_by_mean_energy(mean_energy: f64, spectrum: &EnergySpectrum) -> Result<f64> {
    let mean_at = |beta: f64| -> Result<f64> {
        Ok(gibbs_populations(beta, spectrum)?.mean_energy(spectrum))
    };
    let (mut lo, mut hi) = (BETA_BISECTION_LO, BETA_BISECTION_HI);
    if mean_energy >= mean_at(lo)? {
        return Ok(lo);
    }
    if mean_energy <= mean_at(hi)? {
        return Ok(hi);
    }
    // mean energy is strictly decreasing in beta
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid)? > mean_energy {
            lo = mid;
        } else {
            hi = mid;
        }
        if (mean_at(mid)? - mean_energy).abs() < 1e-12 {
            return Ok(mid);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Trace distance to the Gibbs state with the same mean energy.
pub fn thermal_distance(rho: &DensityOperator, spectrum: &EnergySpectrum) -> Result<f64> {
    let gibbs = if spectrum.uniform_gap().is_some() {
        gibbs_match(rho.mean_occupation(), spectrum)?.populations
    } else {
        let pops = crate::ladder::extract_populations(rho)?;
        let beta = match_beta_by_mean_energy(pops.mean_energy(spectrum), spectrum)?;
        gibbs_populations(beta, spectrum)?
    };
    trace_distance(rho, &embed_diagonal(&gibbs))
}

/// Total-variation form of the thermal distance for classical distributions.
pub fn thermal_distance_classical(pop: &PopulationVector, spectrum: &EnergySpectrum) -> Result<f64> {
    let gibbs = if spectrum.uniform_gap().is_some() {
        gibbs_match(pop.mean_occupation(), spectrum)?.populations
    } else {
        let beta = match_beta_by_mean_energy(pop.mean_energy(spectrum), spectrum)?;
        gibbs_populations(beta, spectrum)?
    };
    total_variation(pop, &gibbs)
}

/// Per-step diagnostics of a classical trajectory.
#[derive(Debug, Clone)]
pub struct ClassicalRecord {
    pub t: usize,
    /// Distance to the stationary distribution.
    pub d_inf: f64,
    /// Distance to the mean-energy-matched Gibbs distribution.
    pub d_th: f64,
    pub mean_n: f64,
    pub beta: f64,
    pub boundary_occ: f64,
    /// `sum_{j < t} p_j(0)` (exclusive of the current step).
    pub boundary_cumsum: f64,
    /// Occupation of the top (truncation) level.
    pub top_occ: f64,
}

#[derive(Debug, Clone)]
pub struct ClassicalSeries {
    pub records: Vec<ClassicalRecord>,
    /// Largest top-level occupation seen along the trajectory.
    pub boundary_guard_max: f64,
}

impl ClassicalSeries {
    pub fn boundary_guard_tripped(&self) -> bool {
        self.boundary_guard_max >= BOUNDARY_GUARD_TOL
    }

    pub fn d_inf_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.d_inf).collect()
    }
}

/// Iterate the classical map and record distances, Gibbs matching, and
/// boundary occupation at every step (including `t = 0`).
pub fn run_classical_trajectory(
    pop0: &PopulationVector,
    rates: &TransitionRates,
    spectrum: &EnergySpectrum,
    steps: usize,
) -> Result<ClassicalSeries> {
    if pop0.levels() != rates.levels() {
        return Err(Error::RateShapeMismatch { rates: rates.levels(), state: pop0.levels() });
    }
    let top = pop0.levels() - 1;
    let stationary = stationary_closed_form(rates, StationaryForm::Truncated)?;
    let mut records = Vec::with_capacity(steps + 1);
    let mut guard_max: f64 = 0.0;
    let mut cumsum = 0.0;
    let mut pop = pop0.clone();
    for t in 0..=steps {
        let mean_n = pop.mean_occupation();
        let beta = if spectrum.uniform_gap().is_some() {
            gibbs_match(mean_n, spectrum)?.beta
        } else {
            match_beta_by_mean_energy(pop.mean_energy(spectrum), spectrum)?
        };
        let top_occ = pop.prob(top);
        guard_max = guard_max.max(top_occ);
        records.push(ClassicalRecord {
            t,
            d_inf: total_variation(&pop, &stationary)?,
            d_th: thermal_distance_classical(&pop, spectrum)?,
            mean_n,
            beta,
            boundary_occ: pop.prob(0),
            boundary_cumsum: cumsum,
            top_occ,
        });
        cumsum += pop.prob(0);
        if t < steps {
            pop = classical_step(&pop, rates)?;
        }
    }
    Ok(ClassicalSeries { records, boundary_guard_max: guard_max })
}

/// Per-step diagnostics of a quantum trajectory.
#[derive(Debug, Clone)]
pub struct QuantumRecord {
    pub t: usize,
    /// Thermal distance of the full state.
    pub d_th: f64,
    /// Thermal distance of the dephased state.
    pub d_th_diag: f64,
    /// Thermal distance of the mu = 0 (classical) trajectory.
    pub d_cl: f64,
    pub mean_n: f64,
    pub beta: f64,
    pub boundary_occ: f64,
    pub boundary_cumsum: f64,
    /// Perturbative upper bound `d_cl + mu sqrt(p_+ p_-) sum_{j<t} p_j(0)`.
    pub bound: f64,
    /// Occupation of the top (truncation) level.
    pub top_occ: f64,
}

#[derive(Debug, Clone)]
pub struct QuantumSeries {
    pub records: Vec<QuantumRecord>,
    pub boundary_guard_max: f64,
}

impl QuantumSeries {
    pub fn boundary_guard_tripped(&self) -> bool {
        self.boundary_guard_max >= BOUNDARY_GUARD_TOL
    }
}

/// Iterate the exact channel from a diagonal initial state and record the
/// full, dephased, and classical thermal distances plus the perturbative
/// bound at every step.
pub fn run_quantum_trajectory(
    pop0: &PopulationVector,
    cfg: &ChannelConfig,
    spectrum: &EnergySpectrum,
    steps: usize,
) -> Result<QuantumSeries> {
    if pop0.levels() != cfg.levels {
        return Err(Error::DimensionMismatch { left: pop0.levels(), right: cfg.levels });
    }
    let (p_plus, _, p_minus) = cfg
        .rates
        .as_constant()
        .ok_or(Error::LevelDependentUnsupported)?;
    let coh = cfg.mu * (p_plus * p_minus).sqrt();
    let top = cfg.levels - 1;
    let mut rho = embed_diagonal(pop0);
    let mut classical = pop0.clone();
    let mut records = Vec::with_capacity(steps + 1);
    let mut guard_max: f64 = 0.0;
    let mut cumsum = 0.0;
    for t in 0..=steps {
        let mean_n = rho.mean_occupation();
        let beta = gibbs_match(mean_n, spectrum)?.beta;
        let d_cl = thermal_distance_classical(&classical, spectrum)?;
        let top_occ = rho.matrix()[[top, top]].re;
        guard_max = guard_max.max(top_occ);
        records.push(QuantumRecord {
            t,
            d_th: thermal_distance(&rho, spectrum)?,
            d_th_diag: thermal_distance(&dephase(&rho), spectrum)?,
            d_cl,
            mean_n,
            beta,
            boundary_occ: rho.matrix()[[0, 0]].re,
            boundary_cumsum: cumsum,
            bound: d_cl + coh * cumsum,
            top_occ,
        });
        cumsum += rho.matrix()[[0, 0]].re;
        if t < steps {
            rho = collision_step_closed(&rho, cfg)?;
            classical = classical_step(&classical, &cfg.rates)?;
        }
    }
    Ok(QuantumSeries { records, boundary_guard_max: guard_max })
}

/// How to compute the long-time thermal deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviationMethod {
    /// Eigendecomposition of the vectorized channel; practical for small
    /// truncations.
    FixedPoint,
    /// Long-time iteration with plateau detection.
    Plateau,
    /// Fixed point when the superoperator is small enough, plateau otherwise.
    Auto,
}

const PLATEAU_WINDOW: usize = 200;
const PLATEAU_SPREAD_TOL: f64 = 1e-9;
const PLATEAU_MAX_STEPS: usize = 100_000;
const FIXED_POINT_MAX_LEVELS: usize = 41;

/// `lim_{t -> inf} d_th(t)` for the exact channel.
pub fn asymptotic_deviation(
    cfg: &ChannelConfig,
    pop0: &PopulationVector,
    spectrum: &EnergySpectrum,
    method: DeviationMethod,
) -> Result<f64> {
    let method = match method {
        DeviationMethod::Auto => {
            if cfg.levels <= FIXED_POINT_MAX_LEVELS {
                DeviationMethod::FixedPoint
            } else {
                DeviationMethod::Plateau
            }
        }
        m => m,
    };
    match method {
        DeviationMethod::FixedPoint => {
            let fp = channel_fixed_point(cfg)?;
            thermal_distance(&fp, spectrum)
        }
        DeviationMethod::Plateau => {
            let mut rho = embed_diagonal(pop0);
            let mut window: VecDeque<f64> = VecDeque::with_capacity(PLATEAU_WINDOW);
            for _ in 0..PLATEAU_MAX_STEPS {
                let d = thermal_distance(&rho, spectrum)?;
                if window.len() == PLATEAU_WINDOW {
                    window.pop_front();
                }
                window.push_back(d);
                if window.len() == PLATEAU_WINDOW {
                    let max = window.iter().cloned().fold(f64::MIN, f64::max);
                    let min = window.iter().cloned().fold(f64::MAX, f64::min);
                    if max - min < PLATEAU_SPREAD_TOL {
                        return Ok(window.iter().sum::<f64>() / window.len() as f64);
                    }
                }
                rho = collision_step_closed(&rho, cfg)?;
            }
            Err(Error::NoConvergence {
                max_iters: PLATEAU_MAX_STEPS,
                residual: PLATEAU_SPREAD_TOL,
            })
        }
        DeviationMethod::Auto => unreachable!(),
    }
}

/// First-order prediction of the asymptotic deviation: propagate the
/// stationary coherence source to its fixed point under the incoherent map
/// and take half the trace norm, scaled by mu.
pub fn first_order_asymptote(cfg: &ChannelConfig) -> Result<f64> {
    let (p_plus, _, p_minus) = cfg
        .rates
        .as_constant()
        .ok_or(Error::LevelDependentUnsupported)?;
    let stationary = stationary_closed_form(&cfg.rates, StationaryForm::Truncated)?;
    let d = cfg.levels;
    let top = d - 1;
    let root = (p_plus * p_minus).sqrt();
    let incoherent = ChannelConfig::new(cfg.rates.clone(), 0.0, cfg.levels)?;
    let w0 = Complex64::new(root * stationary.prob(0), 0.0);
    let wn = Complex64::new(root * stationary.prob(top), 0.0);
    let mut c = CMat::zeros((d, d));
    for _ in 0..PLATEAU_MAX_STEPS {
        let mut next = apply_channel_matrix(&c, &incoherent);
        next[[1, 0]] += w0;
        next[[0, 1]] += w0;
        next[[top - 1, top]] += wn;
        next[[top, top - 1]] += wn;
        let change = trace_norm_hermitian(&(&next - &c))?;
        c = next;
        if change < 1e-14 {
            return Ok(cfg.mu * 0.5 * trace_norm_hermitian(&c)?);
        }
    }
    Err(Error::NoConvergence { max_iters: PLATEAU_MAX_STEPS, residual: 1e-14 })
}

const FIT_WINDOW_LO: f64 = 1e-10;
const FIT_WINDOW_HI: f64 = 0.1;
const FIT_MIN_SAMPLES: usize = 20;

/// Least-squares exponential decay rate over the fit window
/// `1e-10 < value < 0.1`; the value at index `t` is taken at time `t`.
///
/// The model is `ln v = a + s t + alpha ln(t + 1)`: the log-time regressor
/// absorbs the polynomial prefactor of the relaxation tail, which would
/// otherwise bias the plain log-linear slope well away from `-ln|lambda_2|`.
pub fn fit_decay_rate(values: &[f64]) -> Result<f64> {
    let samples: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > FIT_WINDOW_LO && v < FIT_WINDOW_HI)
        .map(|(t, &v)| (t as f64, v.ln()))
        .collect();
    if samples.len() < FIT_MIN_SAMPLES {
        return Err(Error::InsufficientTail { min: FIT_MIN_SAMPLES, found: samples.len() });
    }
    // normal equations for the three regressors (1, t, ln(t + 1))
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for &(t, y) in &samples {
        let row = [1.0, t, (t + 1.0).ln()];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            aty[i] += row[i] * y;
        }
    }
    let coeffs = solve_3x3(ata, aty)
        .ok_or(Error::InsufficientTail { min: FIT_MIN_SAMPLES, found: samples.len() })?;
    Ok(-coeffs[1])
}

fn solve_3x3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..3 {
            if row == col {
                continue;
            }
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    Some([b[0] / a[0][0], b[1] / a[1][1], b[2] / a[2][2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ladder::gaussian_population;

    #[test]
    fn trace_distance_basics() {
        let a = embed_diagonal(&PopulationVector::delta(0, 3).unwrap());
        let b = embed_diagonal(&PopulationVector::delta(1, 3).unwrap());
        assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-14);
        assert!(trace_distance(&a, &a).unwrap() < 1e-15);
    }

    #[test]
    fn trace_distance_reduces_to_total_variation_on_diagonals() {
        let p = gaussian_population(2.0, 2.0, 12).unwrap();
        let q = gaussian_population(5.0, 1.5, 12).unwrap();
        let td = trace_distance(&embed_diagonal(&p), &embed_diagonal(&q)).unwrap();
        let tv = total_variation(&p, &q).unwrap();
        assert!((td - tv).abs() < 1e-14);
    }

    #[test]
    fn total_variation_basics() {
        let p = PopulationVector::delta(0, 4).unwrap();
        let q = PopulationVector::delta(1, 4).unwrap();
        assert_eq!(total_variation(&p, &q).unwrap(), 1.0);
        assert_eq!(total_variation(&p, &p).unwrap(), 0.0);
        let r = PopulationVector::delta(0, 5).unwrap();
        assert!(matches!(
            total_variation(&p, &r),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn gibbs_match_closed_form() {
        let spectrum = EnergySpectrum::uniform(1.0, 40).unwrap();
        let m = gibbs_match(1.0, &spectrum).unwrap();
        assert!((m.q - 0.5).abs() < 1e-14);
        assert!((m.beta - 2f64.ln()).abs() < 1e-14);
        // round trip: the matched populations reproduce the mean
        assert!((m.populations.mean_occupation() - 1.0).abs() < 1e-10);

        let ground = gibbs_match(0.0, &spectrum).unwrap();
        assert!(ground.beta.is_infinite());
        assert_eq!(ground.populations.prob(0), 1.0);
    }

    #[test]
    fn thermal_distance_on_gibbs_state_is_zero() {
        let spectrum = EnergySpectrum::uniform(1.0, 30).unwrap();
        let gibbs = gibbs_match(2.0 / 5.0, &spectrum).unwrap().populations;
        let d = thermal_distance(&embed_diagonal(&gibbs), &spectrum).unwrap();
        assert!(d < 1e-12, "self-match distance {d}");
    }

    #[test]
    fn thermal_distance_matches_classical_form_on_diagonals() {
        let spectrum = EnergySpectrum::uniform(1.0, 21).unwrap();
        let pop = gaussian_population(2.0, 2.0, 21).unwrap();
        let via_rho = thermal_distance(&embed_diagonal(&pop), &spectrum).unwrap();
        let via_pop = thermal_distance_classical(&pop, &spectrum).unwrap();
        assert!((via_rho - via_pop).abs() < 1e-13);
    }

    #[test]
    fn thermal_distance_of_rank_two_coherence() {
        // rho_beta + c (|0><1| + |1><0|) sits at distance exactly |c| from
        // the matched Gibbs state: the perturbation has eigenvalues +-|c|
        let spectrum = EnergySpectrum::uniform(1.0, 25).unwrap();
        let gibbs = gibbs_match(0.4, &spectrum).unwrap().populations;
        let c = 1e-3;
        let mut m = embed_diagonal(&gibbs).matrix().clone();
        m[[0, 1]] += Complex64::new(c, 0.0);
        m[[1, 0]] += Complex64::new(c, 0.0);
        let rho = DensityOperator::new(m).unwrap();
        let d = thermal_distance(&rho, &spectrum).unwrap();
        assert!((d - c).abs() < 1e-10, "distance {d} expected {c}");
    }

    #[test]
    fn classical_series_initial_distance() {
        let levels = 31;
        let spectrum = EnergySpectrum::uniform(1.0, levels).unwrap();
        let rates = TransitionRates::constant(0.2, 0.1, 0.7, levels).unwrap();
        let pop0 = gaussian_population(2.0, 2.0, levels).unwrap();
        let series = run_classical_trajectory(&pop0, &rates, &spectrum, 500).unwrap();
        let stationary = stationary_closed_form(&rates, StationaryForm::Truncated).unwrap();
        let want = total_variation(&pop0, &stationary).unwrap();
        assert!((series.records[0].d_inf - want).abs() < 1e-15);
        // constant detailed-balance rates thermalize
        assert!(series.records.last().unwrap().d_th < 1e-6);
        assert!(!series.boundary_guard_tripped());
    }

    #[test]
    fn quantum_series_mu_zero_collapses() {
        let levels = 15;
        let spectrum = EnergySpectrum::uniform(1.0, levels).unwrap();
        let rates = TransitionRates::constant(0.2, 0.1, 0.7, levels).unwrap();
        let cfg = ChannelConfig::new(rates, 0.0, levels).unwrap();
        let pop0 = gaussian_population(2.0, 2.0, levels).unwrap();
        let series = run_quantum_trajectory(&pop0, &cfg, &spectrum, 200).unwrap();
        for r in &series.records {
            assert!((r.d_th - r.d_th_diag).abs() < 1e-13);
            assert!((r.d_th - r.d_cl).abs() < 1e-13);
        }
    }

    #[test]
    fn quantum_beta_matches_classical_beta() {
        let levels = 15;
        let spectrum = EnergySpectrum::uniform(1.0, levels).unwrap();
        let rates = TransitionRates::constant(0.2, 0.1, 0.7, levels).unwrap();
        let cfg = ChannelConfig::new(rates.clone(), 0.7, levels).unwrap();
        let pop0 = gaussian_population(2.0, 2.0, levels).unwrap();
        let quantum = run_quantum_trajectory(&pop0, &cfg, &spectrum, 300).unwrap();
        let classical = run_classical_trajectory(&pop0, &rates, &spectrum, 300).unwrap();
        for (q, c) in quantum.records.iter().zip(&classical.records) {
            assert!((q.beta - c.beta).abs() < 1e-12);
            assert!((q.mean_n - c.mean_n).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_recovers_synthetic_rate() {
        let values: Vec<f64> = (0..300).map(|t| (-0.1 * t as f64).exp()).collect();
        let rate = fit_decay_rate(&values).unwrap();
        assert!((rate - 0.1).abs() < 1e-6);
    }

    #[test]
    fn fit_needs_enough_samples() {
        let values = vec![0.05; 5];
        assert!(matches!(
            fit_decay_rate(&values),
            Err(Error::InsufficientTail { .. })
        ));
    }

    #[test]
    fn deviation_mu_zero_vanishes() {
        // enough levels that the truncated-geometric mean matches the
        // infinite-ladder value to well below the tolerance
        let levels = 25;
        let spectrum = EnergySpectrum::uniform(1.0, levels).unwrap();
        let rates = TransitionRates::constant(0.2, 0.1, 0.7, levels).unwrap();
        let cfg = ChannelConfig::new(rates, 0.0, levels).unwrap();
        let pop0 = gaussian_population(2.0, 2.0, levels).unwrap();
        let d = asymptotic_deviation(&cfg, &pop0, &spectrum, DeviationMethod::FixedPoint).unwrap();
        assert!(d < 1e-8, "mu = 0 deviation {d}");
    }

    #[test]
    fn bisection_matches_closed_form_on_uniform_spectrum() {
        let spectrum = EnergySpectrum::uniform(1.0, 40).unwrap();
        let mean_n = 0.5;
        let closed = gibbs_match(mean_n, &spectrum).unwrap().beta;
        // treat the uniform ladder as a general spectrum
        let general = EnergySpectrum::from_energies((0..40).map(|n| n as f64).collect()).unwrap();
        let pops = gibbs_match(mean_n, &spectrum).unwrap().populations;
        let beta = match_beta_by_mean_energy(pops.mean_energy(&general), &general).unwrap();
        assert!((beta - closed).abs() < 1e-6, "bisection {beta} vs closed {closed}");
    }
}
