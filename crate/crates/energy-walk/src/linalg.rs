//! Dense complex matrix helpers shared across modules.

use ndarray::prelude::*;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use rand::Rng;

use crate::error::Result;
use crate::ladder::{CMat, DensityOperator};

/// Conjugate transpose.
pub fn dagger(m: &CMat) -> CMat {
    m.t().mapv(|z| z.conj())
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMat::zeros((ar * br, ac * bc));
    for ((i, j), &av) in a.indexed_iter() {
        if av == Complex64::new(0.0, 0.0) {
            continue;
        }
        let mut block = out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
        block.assign(&(b * av));
    }
    out
}

/// Trace norm `sum |lambda_k|` of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &CMat) -> Result<f64> {
    let (eigs, _) = m.eigh(UPLO::Lower)?;
    Ok(eigs.iter().map(|x| x.abs()).sum())
}

/// Partial trace over the second factor of `system (x) ancilla`.
pub fn partial_trace_ancilla(joint: &CMat, system_dim: usize, ancilla_dim: usize) -> CMat {
    let mut out = CMat::zeros((system_dim, system_dim));
    for m in 0..system_dim {
        for n in 0..system_dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..ancilla_dim {
                acc += joint[[m * ancilla_dim + c, n * ancilla_dim + c]];
            }
            out[[m, n]] = acc;
        }
    }
    out
}

/// Random full-rank density operator `G G^dag / tr(G G^dag)` with i.i.d.
/// complex Gaussian-ish entries; used by the oracle-equivalence batteries.
pub fn random_density_operator<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<DensityOperator> {
    let mut g = CMat::zeros((dim, dim));
    for m in 0..dim {
        for n in 0..dim {
            g[[m, n]] = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
    }
    let h = g.dot(&dagger(&g));
    let trace: f64 = (0..dim).map(|i| h[[i, i]].re).sum();
    DensityOperator::new(h.mapv(|z| z / trace))
}
