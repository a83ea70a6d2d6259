use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::EngineError;

pub type C64 = Complex64;

/// Default ceiling on density-matrix entries.
pub const DEFAULT_ENTRY_CAP: usize = 1_000_000;

/// Ordered set of bosonic modes sharing one occupation cap.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeRegister {
    labels: Vec<String>,
    n_max: usize,
    entry_cap: usize,
}

impl ModeRegister {
    pub fn new<S: AsRef<str>>(labels: &[S], n_max: usize) -> Result<Self, EngineError> {
        Self::with_cap(labels, n_max, DEFAULT_ENTRY_CAP)
    }

    pub fn with_cap<S: AsRef<str>>(
        labels: &[S],
        n_max: usize,
        entry_cap: usize,
    ) -> Result<Self, EngineError> {
        if n_max < 1 {
            return Err(EngineError::Precondition("n_max must be at least 1".into()));
        }
        let labels: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(EngineError::DuplicateMode(l.clone()));
            }
        }
        let reg = ModeRegister {
            labels,
            n_max,
            entry_cap,
        };
        reg.check_cap()?;
        Ok(reg)
    }

    fn check_cap(&self) -> Result<(), EngineError> {
        let d = self.local_dim() as u128;
        let dim = d.pow(self.labels.len() as u32);
        if dim * dim > self.entry_cap as u128 {
            return Err(EngineError::DimensionCap {
                dim: dim.min(usize::MAX as u128) as usize,
                cap: self.entry_cap,
            });
        }
        Ok(())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn entry_cap(&self) -> usize {
        self.entry_cap
    }

    /// Levels per mode.
    pub fn local_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.local_dim().pow(self.labels.len() as u32)
    }

    pub fn index_of(&self, label: &str) -> Result<usize, EngineError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| EngineError::MissingMode(label.to_string()))
    }

    /// Stride of mode `k` in the flattened basis index; mode 0 is most significant.
    pub fn stride(&self, k: usize) -> usize {
        self.local_dim().pow((self.labels.len() - 1 - k) as u32)
    }

    /// Occupation of mode `k` in basis state `index`.
    pub fn occupation(&self, index: usize, k: usize) -> usize {
        (index / self.stride(k)) % self.local_dim()
    }

    /// Basis index of an occupation tuple.
    pub fn basis_index(&self, occupations: &[usize]) -> usize {
        occupations
            .iter()
            .fold(0, |acc, &n| acc * self.local_dim() + n)
    }

    fn with_labels(&self, labels: Vec<String>) -> Result<Self, EngineError> {
        let reg = ModeRegister {
            labels,
            n_max: self.n_max,
            entry_cap: self.entry_cap,
        };
        reg.check_cap()?;
        Ok(reg)
    }
}

/// Flattened offsets of every local configuration of `modes`, in the order
/// given, with the first listed mode most significant.
fn offsets(reg: &ModeRegister, modes: &[usize]) -> Vec<usize> {
    let d = reg.local_dim();
    let mut out = vec![0usize];
    for &m in modes {
        let s = reg.stride(m);
        out = out
            .iter()
            .flat_map(|&o| (0..d).map(move |n| o + n * s))
            .collect();
    }
    out
}

fn complement(reg: &ModeRegister, modes: &[usize]) -> Vec<usize> {
    (0..reg.len()).filter(|k| !modes.contains(k)).collect()
}

/// Density operator over a [`ModeRegister`], stored row-major.
#[derive(Debug, Clone)]
pub struct FockState {
    register: ModeRegister,
    rho: Vec<C64>,
}

impl FockState {
    pub fn vacuum(register: ModeRegister) -> Result<Self, EngineError> {
        register.check_cap()?;
        let dim = register.dim();
        let mut rho = vec![C64::new(0.0, 0.0); dim * dim];
        rho[0] = C64::new(1.0, 0.0);
        Ok(FockState { register, rho })
    }

    /// Pure state from amplitudes over the register basis.
    pub fn from_amplitudes(register: ModeRegister, amps: &[C64]) -> Result<Self, EngineError> {
        let dim = register.dim();
        if amps.len() != dim {
            return Err(EngineError::Precondition(format!(
                "expected {dim} amplitudes, got {}",
                amps.len()
            )));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if norm <= 0.0 {
            return Err(EngineError::Precondition("zero state vector".into()));
        }
        let mut rho = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                rho[i * dim + j] = amps[i] * amps[j].conj() / norm;
            }
        }
        Ok(FockState { register, rho })
    }

    /// Wraps a raw matrix; the caller vouches for the invariants.
    pub fn from_matrix(register: ModeRegister, rho: Vec<C64>) -> Result<Self, EngineError> {
        let dim = register.dim();
        if rho.len() != dim * dim {
            return Err(EngineError::Precondition(format!(
                "matrix has {} entries, register needs {}",
                rho.len(),
                dim * dim
            )));
        }
        Ok(FockState { register, rho })
    }

    pub fn register(&self) -> &ModeRegister {
        &self.register
    }

    pub fn dim(&self) -> usize {
        self.register.dim()
    }

    pub fn rho(&self) -> &[C64] {
        &self.rho
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.rho[i * self.dim() + j]
    }

    pub fn mode(&self, label: &str) -> Result<usize, EngineError> {
        self.register.index_of(label)
    }

    pub fn trace(&self) -> f64 {
        let d = self.dim();
        (0..d).map(|i| self.rho[i * d + i].re).sum()
    }

    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.rho[i * d + j] - self.rho[j * d + i].conj()).norm());
            }
        }
        worst
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.rho)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.to_matrix();
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Probability that mode `label` holds exactly `n` quanta.
    pub fn population(&self, label: &str, n: usize) -> Result<f64, EngineError> {
        let k = self.mode(label)?;
        let d = self.dim();
        Ok((0..d)
            .filter(|&i| self.register.occupation(i, k) == n)
            .map(|i| self.rho[i * d + i].re)
            .sum())
    }

    /// Occupation distribution of one mode.
    pub fn distribution(&self, label: &str) -> Result<Vec<f64>, EngineError> {
        (0..self.register.local_dim())
            .map(|n| self.population(label, n))
            .collect()
    }

    pub fn mean_occupation(&self, label: &str) -> Result<f64, EngineError> {
        Ok(self
            .distribution(label)?
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum())
    }

    pub fn max_abs_diff(&self, other: &FockState) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.rho
            .iter()
            .zip(&other.rho)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn scale(&mut self, s: f64) {
        for z in &mut self.rho {
            *z *= s;
        }
    }

    /// Divide by the trace; errors when the trace vanishes.
    pub fn normalize(mut self) -> Result<Self, EngineError> {
        let t = self.trace();
        if !(t > 0.0) {
            return Err(EngineError::Numerical("cannot normalize a zero-trace state".into()));
        }
        self.scale(1.0 / t);
        Ok(self)
    }

    /// Append a vacuum mode.
    pub fn extend(&self, label: &str) -> Result<Self, EngineError> {
        if self.register.labels.iter().any(|l| l == label) {
            return Err(EngineError::DuplicateMode(label.to_string()));
        }
        let mut labels = self.register.labels.clone();
        labels.push(label.to_string());
        let register = self.register.with_labels(labels)?;
        let (d_old, loc) = (self.dim(), self.register.local_dim());
        let d_new = d_old * loc;
        let mut rho = vec![C64::new(0.0, 0.0); d_new * d_new];
        for i in 0..d_old {
            for j in 0..d_old {
                rho[(i * loc) * d_new + j * loc] = self.rho[i * d_old + j];
            }
        }
        Ok(FockState { register, rho })
    }

    /// Tensor product with another state on disjoint labels.
    pub fn tensor(&self, other: &FockState) -> Result<Self, EngineError> {
        if self.register.n_max != other.register.n_max {
            return Err(EngineError::Precondition("registers use different n_max".into()));
        }
        let mut labels = self.register.labels.clone();
        for l in &other.register.labels {
            if labels.contains(l) {
                return Err(EngineError::DuplicateMode(l.clone()));
            }
            labels.push(l.clone());
        }
        let register = self.register.with_labels(labels)?;
        let (da, db) = (self.dim(), other.dim());
        let d = da * db;
        let mut rho = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..da {
            for j in 0..da {
                let a = self.rho[i * da + j];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..db {
                    for l in 0..db {
                        rho[(i * db + k) * d + j * db + l] = a * other.rho[k * db + l];
                    }
                }
            }
        }
        Ok(FockState { register, rho })
    }

    /// Reduced state on `keep`, in the order listed.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<Self, EngineError> {
        if keep.is_empty() {
            return Err(EngineError::EmptyKeep);
        }
        let idx = self.indices(keep)?;
        let register = self
            .register
            .with_labels(keep.iter().map(|s| s.to_string()).collect())?;
        let keep_off = offsets(&self.register, &idx);
        let tr_off = offsets(&self.register, &complement(&self.register, &idx));
        let d = self.dim();
        let dk = keep_off.len();
        let mut rho = vec![C64::new(0.0, 0.0); dk * dk];
        for (a, &oa) in keep_off.iter().enumerate() {
            for (b, &ob) in keep_off.iter().enumerate() {
                rho[a * dk + b] = tr_off.iter().map(|&t| self.rho[(oa + t) * d + ob + t]).sum();
            }
        }
        Ok(FockState { register, rho })
    }

    /// `Tr_modes[(E ⊗ 1) ρ]` for a local operator `E` on `modes`; returns the
    /// unnormalized reduced state on the remaining modes, or `None` when no
    /// modes remain, together with the trace.
    pub fn trace_out_with(
        &self,
        modes: &[&str],
        op: &DMatrix<C64>,
    ) -> Result<(f64, Option<FockState>), EngineError> {
        let idx = self.indices(modes)?;
        let loc = offsets(&self.register, &idx);
        if op.nrows() != loc.len() || op.ncols() != loc.len() {
            return Err(EngineError::Precondition("operator size does not match modes".into()));
        }
        let rest_idx = complement(&self.register, &idx);
        let rest = offsets(&self.register, &rest_idx);
        let d = self.dim();
        let dr = rest.len();
        let mut out = vec![C64::new(0.0, 0.0); dr * dr];
        for (a, &ra) in rest.iter().enumerate() {
            for (b, &rb) in rest.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (l, &ol) in loc.iter().enumerate() {
                    for (lp, &olp) in loc.iter().enumerate() {
                        let e = op[(l, lp)];
                        if e != C64::new(0.0, 0.0) {
                            acc += e * self.rho[(olp + ra) * d + ol + rb];
                        }
                    }
                }
                out[a * dr + b] = acc;
            }
        }
        let p: f64 = (0..dr).map(|i| out[i * dr + i].re).sum();
        if rest_idx.is_empty() {
            return Ok((p, None));
        }
        let labels = rest_idx
            .iter()
            .map(|&k| self.register.labels[k].clone())
            .collect();
        let register = self.register.with_labels(labels)?;
        Ok((p, Some(FockState { register, rho: out })))
    }

    /// `Tr[(E ⊗ 1) ρ]`.
    pub fn expectation(&self, modes: &[&str], op: &DMatrix<C64>) -> Result<f64, EngineError> {
        let idx = self.indices(modes)?;
        let loc = offsets(&self.register, &idx);
        if op.nrows() != loc.len() || op.ncols() != loc.len() {
            return Err(EngineError::Precondition("operator size does not match modes".into()));
        }
        let rest = offsets(&self.register, &complement(&self.register, &idx));
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for &r in &rest {
            for (l, &ol) in loc.iter().enumerate() {
                for (lp, &olp) in loc.iter().enumerate() {
                    let e = op[(l, lp)];
                    if e != C64::new(0.0, 0.0) {
                        acc += e * self.rho[(olp + r) * d + ol + r];
                    }
                }
            }
        }
        Ok(acc.re)
    }

    /// `Σ_k K_k ρ K_k†` with every `K_k` acting on `modes`.
    pub fn apply_kraus(&self, modes: &[&str], kraus: &[DMatrix<C64>]) -> Result<Self, EngineError> {
        let idx = self.indices(modes)?;
        let loc = offsets(&self.register, &idx);
        let n = loc.len();
        for k in kraus {
            if k.nrows() != n || k.ncols() != n {
                return Err(EngineError::Precondition("Kraus size does not match modes".into()));
            }
        }
        let rest = offsets(&self.register, &complement(&self.register, &idx));
        let d = self.dim();
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        let mut block = DMatrix::<C64>::zeros(n, n);
        let adj: Vec<DMatrix<C64>> = kraus.iter().map(|k| k.adjoint()).collect();
        for &ra in &rest {
            for &rb in &rest {
                let mut nonzero = false;
                for (l, &ol) in loc.iter().enumerate() {
                    for (lp, &olp) in loc.iter().enumerate() {
                        let v = self.rho[(ol + ra) * d + olp + rb];
                        nonzero |= v != C64::new(0.0, 0.0);
                        block[(l, lp)] = v;
                    }
                }
                if !nonzero {
                    continue;
                }
                for (k, ka) in kraus.iter().zip(&adj) {
                    let nb = k * &block * ka;
                    for (l, &ol) in loc.iter().enumerate() {
                        for (lp, &olp) in loc.iter().enumerate() {
                            out[(ol + ra) * d + olp + rb] += nb[(l, lp)];
                        }
                    }
                }
            }
        }
        Ok(FockState {
            register: self.register.clone(),
            rho: out,
        })
    }

    pub fn apply_unitary(&self, modes: &[&str], u: &DMatrix<C64>) -> Result<Self, EngineError> {
        self.apply_kraus(modes, std::slice::from_ref(u))
    }

    /// Weight of basis states where `modes` jointly satisfy `pred`.
    pub fn weight_where<F: Fn(&[usize]) -> bool>(
        &self,
        modes: &[&str],
        pred: F,
    ) -> Result<f64, EngineError> {
        let idx = self.indices(modes)?;
        let d = self.dim();
        let mut occ = vec![0usize; idx.len()];
        Ok((0..d)
            .filter(|&i| {
                for (o, &k) in occ.iter_mut().zip(&idx) {
                    *o = self.register.occupation(i, k);
                }
                pred(&occ)
            })
            .map(|i| self.rho[i * d + i].re)
            .sum())
    }

    fn indices(&self, modes: &[&str]) -> Result<Vec<usize>, EngineError> {
        let mut idx = Vec::with_capacity(modes.len());
        for m in modes {
            let k = self.register.index_of(m)?;
            if idx.contains(&k) {
                return Err(EngineError::IdenticalModes(m.to_string()));
            }
            idx.push(k);
        }
        Ok(idx)
    }
}
