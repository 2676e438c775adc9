//! Truncated energy ladder: spectra, transition rates, classical populations,
//! density operators, and the shift/projector operators acting on them.
//!
//! All types are immutable values validated at construction; every operation
//! is a pure function. Tolerances: Hermiticity and trace 1e-12, positive
//! semidefiniteness floor -1e-10.

use ndarray::prelude::*;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_FLOOR: f64 = -1e-10;
pub const POPULATION_FLOOR: f64 = -1e-14;
pub const RATE_SUM_TOL: f64 = 1e-12;

pub type CMat = Array2<Complex64>;

/// Level energies `E_n` of the ladder, strictly increasing with `E_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySpectrum {
    energies: Vec<f64>,
    uniform_gap: Option<f64>,
}

impl EnergySpectrum {
    /// Equally spaced ladder `E_n = n * gap` on `0..levels`.
    pub fn uniform(gap: f64, levels: usize) -> Result<Self> {
        if gap <= 0.0 {
            return Err(Error::NonPositiveGap(gap));
        }
        if levels < 2 {
            return Err(Error::TooFewLevels { min: 2, got: levels });
        }
        Ok(Self {
            energies: (0..levels).map(|n| n as f64 * gap).collect(),
            uniform_gap: Some(gap),
        })
    }

    /// Arbitrary spectrum. Requires `E_0 = 0` and strict monotonicity.
    pub fn from_energies(energies: Vec<f64>) -> Result<Self> {
        if energies.len() < 2 {
            return Err(Error::TooFewLevels { min: 2, got: energies.len() });
        }
        if energies[0] != 0.0 {
            return Err(Error::InvalidSpectrum(format!(
                "baseline convention requires E_0 = 0, got {}",
                energies[0]
            )));
        }
        for w in energies.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidSpectrum(format!(
                    "energies must be strictly increasing, found {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { energies, uniform_gap: None })
    }

    pub fn levels(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn energy(&self, n: usize) -> f64 {
        self.energies[n]
    }

    /// The gap `E` when the spectrum is equally spaced.
    pub fn uniform_gap(&self) -> Option<f64> {
        self.uniform_gap
    }

    /// Gap `E_{n+1} - E_n` above level `n`.
    pub fn gap_above(&self, n: usize) -> f64 {
        self.energies[n + 1] - self.energies[n]
    }
}

/// Per-level transition probabilities `(p_plus, p_zero, p_minus)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRates {
    up: Vec<f64>,
    stay: Vec<f64>,
    down: Vec<f64>,
    constant: Option<(f64, f64, f64)>,
}

fn check_probability(name: &str, n: usize, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidRates(format!(
            "{name}({n}) = {p} outside [0, 1]"
        )));
    }
    Ok(())
}

impl TransitionRates {
    /// Level-independent rates replicated over `levels` levels.
    pub fn constant(p_plus: f64, p_zero: f64, p_minus: f64, levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::TooFewLevels { min: 2, got: levels });
        }
        check_probability("p_plus", 0, p_plus)?;
        check_probability("p_zero", 0, p_zero)?;
        check_probability("p_minus", 0, p_minus)?;
        let sum = p_plus + p_zero + p_minus;
        if (sum - 1.0).abs() > RATE_SUM_TOL {
            return Err(Error::InvalidRates(format!(
                "p_plus + p_zero + p_minus = {sum}, expected 1"
            )));
        }
        Ok(Self {
            up: vec![p_plus; levels],
            stay: vec![p_zero; levels],
            down: vec![p_minus; levels],
            constant: Some((p_plus, p_zero, p_minus)),
        })
    }

    /// Level-dependent rates; the three vectors must have equal length and
    /// sum to one at every level.
    pub fn level_dependent(up: Vec<f64>, stay: Vec<f64>, down: Vec<f64>) -> Result<Self> {
        let levels = up.len();
        if stay.len() != levels || down.len() != levels {
            return Err(Error::InvalidRates(format!(
                "rate vectors have lengths {}, {}, {}",
                up.len(),
                stay.len(),
                down.len()
            )));
        }
        if levels < 2 {
            return Err(Error::TooFewLevels { min: 2, got: levels });
        }
        for n in 0..levels {
            check_probability("p_plus", n, up[n])?;
            check_probability("p_zero", n, stay[n])?;
            check_probability("p_minus", n, down[n])?;
            let sum = up[n] + stay[n] + down[n];
            if (sum - 1.0).abs() > RATE_SUM_TOL {
                return Err(Error::InvalidRates(format!(
                    "rates at level {n} sum to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { up, stay, down, constant: None })
    }

    pub fn levels(&self) -> usize {
        self.up.len()
    }

    /// The `(p_plus, p_zero, p_minus)` triple when the rates are constant.
    pub fn as_constant(&self) -> Option<(f64, f64, f64)> {
        self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }

    pub fn p_plus(&self, n: usize) -> f64 {
        self.up[n]
    }

    pub fn p_zero(&self, n: usize) -> f64 {
        self.stay[n]
    }

    pub fn p_minus(&self, n: usize) -> f64 {
        self.down[n]
    }
}

/// Classical probability distribution over levels `0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationVector {
    probs: Vec<f64>,
}

impl PopulationVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPopulation("empty vector".into()));
        }
        for (n, &p) in probs.iter().enumerate() {
            if p < POPULATION_FLOOR {
                return Err(Error::InvalidPopulation(format!(
                    "entry {n} = {p} below numerical floor"
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidPopulation(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Point mass at level `n`.
    pub fn delta(n: usize, levels: usize) -> Result<Self> {
        if n >= levels {
            return Err(Error::InvalidPopulation(format!(
                "delta level {n} outside ladder of {levels} levels"
            )));
        }
        let mut probs = vec![0.0; levels];
        probs[n] = 1.0;
        Ok(Self { probs })
    }

    pub fn levels(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.probs[n]
    }

    /// Mean occupation number `sum_n n p(n)`.
    pub fn mean_occupation(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, &p)| n as f64 * p)
            .sum()
    }

    /// Mean energy `sum_n E_n p(n)`.
    pub fn mean_energy(&self, spectrum: &EnergySpectrum) -> f64 {
        self.probs
            .iter()
            .zip(spectrum.energies())
            .map(|(&p, &e)| p * e)
            .sum()
    }
}

/// Normalized discrete Gaussian `p(n) ~ exp(-(n - center)^2 / (2 width^2))`
/// on the truncated support `0..levels`.
pub fn gaussian_population(center: f64, width: f64, levels: usize) -> Result<PopulationVector> {
    if width <= 0.0 {
        return Err(Error::DegenerateWidth(width));
    }
    if levels < 1 {
        return Err(Error::TooFewLevels { min: 1, got: levels });
    }
    let weights: Vec<f64> = (0..levels)
        .map(|n| {
            let d = n as f64 - center;
            (-d * d / (2.0 * width * width)).exp()
        })
        .collect();
    let norm: f64 = weights.iter().sum();
    PopulationVector::new(weights.into_iter().map(|w| w / norm).collect())
}

/// Complex Hermitian positive unit-trace matrix on the truncated ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMat,
}

impl DensityOperator {
    pub fn new(matrix: CMat) -> Result<Self> {
        Self::with_psd_floor(matrix, PSD_FLOOR)
    }

    /// Constructor with a relaxed positivity floor, used for perturbative
    /// states that may dip slightly negative.
    pub fn with_psd_floor(matrix: CMat, floor: f64) -> Result<Self> {
        let (rows, cols) = matrix.dim();
        if rows != cols {
            return Err(Error::InvalidDensity(format!(
                "matrix is {rows}x{cols}, expected square"
            )));
        }
        for i in 0..rows {
            for j in i..cols {
                let delta = (matrix[[i, j]] - matrix[[j, i]].conj()).norm();
                if delta > HERMITICITY_TOL {
                    return Err(Error::InvalidDensity(format!(
                        "not Hermitian at ({i}, {j}): deviation {delta}"
                    )));
                }
            }
        }
        let trace: Complex64 = matrix.diag().sum();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensity(format!("trace is {trace}, expected 1")));
        }
        let (eigs, _) = matrix.eigh(UPLO::Lower)?;
        if let Some(&min) = eigs.iter().reduce(|a, b| if a < b { a } else { b }) {
            if min < floor {
                return Err(Error::InvalidDensity(format!(
                    "smallest eigenvalue {min} below floor {floor}"
                )));
            }
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    /// Mean occupation `sum_n n rho_nn`.
    pub fn mean_occupation(&self) -> f64 {
        self.matrix
            .diag()
            .iter()
            .enumerate()
            .map(|(n, z)| n as f64 * z.re)
            .sum()
    }
}

/// Embed a classical distribution as a diagonal density operator.
pub fn embed_diagonal(pop: &PopulationVector) -> DensityOperator {
    let d = pop.levels();
    let mut m = CMat::zeros((d, d));
    for (n, &p) in pop.probs().iter().enumerate() {
        m[[n, n]] = Complex64::new(p, 0.0);
    }
    DensityOperator { matrix: m }
}

/// Zero all off-diagonal entries, leaving the diagonal untouched.
pub fn dephase(rho: &DensityOperator) -> DensityOperator {
    let d = rho.dimension();
    let mut m = CMat::zeros((d, d));
    for n in 0..d {
        m[[n, n]] = Complex64::new(rho.matrix[[n, n]].re, 0.0);
    }
    DensityOperator { matrix: m }
}

/// Read off the populations `p(n) = Re rho_nn`.
pub fn extract_populations(rho: &DensityOperator) -> Result<PopulationVector> {
    let mut probs = Vec::with_capacity(rho.dimension());
    for (n, z) in rho.matrix.diag().iter().enumerate() {
        if z.re < -1e-10 {
            return Err(Error::NegativePopulation { index: n, value: z.re });
        }
        probs.push(z.re.max(0.0));
    }
    // renormalize rounding in the last digit only; the sum is already 1
    // within the density-operator trace tolerance
    PopulationVector::new(probs)
}

/// Shift operators and boundary projectors on the truncated ladder.
///
/// `S_- S_+ = 1 - P_N` and `S_+ S_- = 1 - P_0`; the deviation from unitarity
/// of the unilateral shift sits entirely in the boundary projectors.
#[derive(Debug, Clone)]
pub struct LadderOperators {
    pub raise_op: CMat,
    pub lower_op: CMat,
    pub ground_projector: CMat,
    pub top_projector: CMat,
}

impl LadderOperators {
    pub fn new(levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::TooFewLevels { min: 2, got: levels });
        }
        let one = Complex64::new(1.0, 0.0);
        let mut raise_op = CMat::zeros((levels, levels));
        for n in 0..levels - 1 {
            raise_op[[n + 1, n]] = one;
        }
        let lower_op = raise_op.t().mapv(|z| z.conj());
        let mut ground_projector = CMat::zeros((levels, levels));
        ground_projector[[0, 0]] = one;
        let mut top_projector = CMat::zeros((levels, levels));
        top_projector[[levels - 1, levels - 1]] = one;
        Ok(Self { raise_op, lower_op, ground_projector, top_projector })
    }
}
