//! Two-qubit concurrence of two modes restricted to occupations {0, 1}.

use nalgebra::{DMatrix, SymmetricEigen};

use super::state::{FockState, C64};
use super::EngineError;

/// The 4×4 block of a two-mode state on occupations {0,1}², in the order
/// |00⟩, |01⟩, |10⟩, |11⟩, together with its trace.
pub fn qubit_block(state: &FockState, first: &str, second: &str) -> Result<(DMatrix<C64>, f64), EngineError> {
    let two = state.partial_trace(&[first, second])?;
    let reg = two.register();
    let idx: Vec<usize> = [[0, 0], [0, 1], [1, 0], [1, 1]]
        .iter()
        .map(|o| reg.basis_index(o))
        .collect();
    let block = DMatrix::from_fn(4, 4, |r, c| two.entry(idx[r], idx[c]));
    let tr = (0..4).map(|i| block[(i, i)].re).sum();
    Ok((block, tr))
}

fn hermitian_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let n = m.nrows();
    let mut out = DMatrix::<C64>::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let s = C64::new(lam.max(0.0).sqrt(), 0.0);
        out += (v * v.adjoint()) * s;
    }
    out
}

/// Wootters concurrence of a 4×4 two-qubit density matrix (normalized
/// internally).
pub fn wootters(rho: &DMatrix<C64>) -> Result<f64, EngineError> {
    if rho.nrows() != 4 || rho.ncols() != 4 {
        return Err(EngineError::Precondition("concurrence needs a 4×4 matrix".into()));
    }
    let tr: f64 = (0..4).map(|i| rho[(i, i)].re).sum();
    if !(tr > 0.0) {
        return Err(EngineError::Numerical("zero-trace qubit block".into()));
    }
    let rho = rho / C64::new(tr, 0.0);
    // σy ⊗ σy is real and antidiagonal with signs (−1, +1, +1, −1).
    let flip = DMatrix::<C64>::from_fn(4, 4, |r, c| {
        if r + c == 3 {
            C64::new(if r == 0 || r == 3 { -1.0 } else { 1.0 }, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let tilde = &flip * rho.map(|z| z.conj()) * &flip;
    let s = hermitian_sqrt(&rho);
    let r = &s * tilde * &s;
    let h = (&r + r.adjoint()) * C64::new(0.5, 0.0);
    let mut lam: Vec<f64> = SymmetricEigen::new(h)
        .eigenvalues
        .iter()
        .map(|&x| x.max(0.0).sqrt())
        .collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    Ok((lam[0] - lam[1] - lam[2] - lam[3]).max(0.0))
}

/// Concurrence of the {0,1}² block of two modes, renormalized to the block.
pub fn mode_concurrence(state: &FockState, first: &str, second: &str) -> Result<f64, EngineError> {
    let (block, _) = qubit_block(state, first, second)?;
    wootters(&block)
}
