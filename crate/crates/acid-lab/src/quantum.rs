//! States, measurements, and the canonical entangled objects: density
//! matrices, pure states, POVMs, the maximally entangled state in both
//! normalization conventions, SWAP and the symmetric-subspace projector,
//! purification, and Born-rule sampling.

use crate::matcore::{eigh, partial_trace, psd_sqrt, CMatrix, Keep, MatError, Result};
use num_complex::Complex64;
use rand::Rng;

/// PSD floor for density-matrix validation.
pub const PSD_FLOOR: f64 = -1e-10;

/// Density matrix: Hermitian, PSD within a small floor, unit trace.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validates and normalizes: symmetrizes, checks the spectrum against the
    /// `-1e-10` floor, clips tiny negative eigenvalues, and renormalizes a
    /// trace within `1e-10` of 1.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(MatError::InvalidInput("DensityMatrix: not square".into()));
        }
        if !m.is_finite() {
            return Err(MatError::InvalidInput("DensityMatrix: non-finite".into()));
        }
        if m.herm_defect() > 1e-9 * m.max_abs().max(1.0) {
            return Err(MatError::InvalidInput(
                "DensityMatrix: not Hermitian".into(),
            ));
        }
        let sym = m.symmetrize();
        let tr = sym.trace().re;
        if (tr - 1.0).abs() > 1e-10 {
            return Err(MatError::InvalidInput(format!(
                "DensityMatrix: trace {tr} not within 1e-10 of 1"
            )));
        }
        let eig = eigh(&sym);
        let min = eig.values.first().copied().unwrap_or(0.0);
        if min < PSD_FLOOR {
            return Err(MatError::InvalidInput(format!(
                "DensityMatrix: min eigenvalue {min} below floor"
            )));
        }
        let mat = if min < 0.0 {
            let clipped = eig.apply_spectral(|l| l.max(0.0));
            let t = clipped.trace().re;
            clipped.scale(Complex64::new(1.0 / t, 0.0))
        } else {
            sym.scale(Complex64::new(1.0 / tr, 0.0))
        };
        Ok(Self { mat })
    }

    /// Wraps a matrix that is a valid density matrix by construction
    /// (e.g. `A A†` normalized, or a convex mixture of valid states).
    pub fn from_matrix_unchecked(m: CMatrix) -> Self {
        debug_assert!(m.is_square());
        Self { mat: m }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self::from_matrix_unchecked(CMatrix::identity(d).scale(Complex64::new(1.0 / d as f64, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.mat.rows
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// `√ρ` via spectral decomposition.
    pub fn sqrt(&self) -> CMatrix {
        psd_sqrt(&self.mat)
    }

    pub fn purity(&self) -> f64 {
        self.mat.trace_product(&self.mat).re
    }
}

/// Unit vector in `C^d`.
#[derive(Debug, Clone)]
pub struct PureState {
    amps: Vec<Complex64>,
}

impl PureState {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(MatError::InvalidInput(format!(
                "PureState: norm {norm} not within 1e-12 of 1"
            )));
        }
        Ok(Self { amps })
    }

    /// Normalizes the vector; errors on the zero vector.
    pub fn normalized(mut amps: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-150 {
            return Err(MatError::InvalidInput("PureState: zero vector".into()));
        }
        for z in &mut amps {
            *z /= norm;
        }
        Ok(Self { amps })
    }

    pub(crate) fn from_amplitudes_unchecked(amps: Vec<Complex64>) -> Self {
        Self { amps }
    }

    pub fn basis_state(d: usize, k: usize) -> Self {
        assert!(k < d);
        let mut amps = vec![Complex64::new(0.0, 0.0); d];
        amps[k] = Complex64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Rank-1 projector `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> CMatrix {
        CMatrix::outer(&self.amps, &self.amps)
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_matrix_unchecked(self.projector())
    }

    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        PureState { amps }
    }
}

/// Positive operator-valued measure: PSD effects summing to the identity.
#[derive(Debug, Clone)]
pub struct Povm {
    effects: Vec<CMatrix>,
}

impl Povm {
    pub fn new(effects: Vec<CMatrix>) -> Result<Self> {
        let d = effects
            .first()
            .ok_or_else(|| MatError::InvalidInput("Povm: empty".into()))?
            .rows;
        let mut sum = CMatrix::zeros(d, d);
        for e in &effects {
            if e.rows != d || !e.is_square() {
                return Err(MatError::DimMismatch("Povm: effect dims".into()));
            }
            let min = eigh(e).values.first().copied().unwrap_or(0.0);
            if min < -1e-9 {
                return Err(MatError::InvalidInput(format!(
                    "Povm: effect has eigenvalue {min}"
                )));
            }
            sum = sum.add(e);
        }
        if sum.sub(&CMatrix::identity(d)).max_abs() > 1e-9 {
            return Err(MatError::InvalidInput(
                "Povm: effects do not sum to I".into(),
            ));
        }
        Ok(Self { effects })
    }

    pub(crate) fn from_effects_unchecked(effects: Vec<CMatrix>) -> Self {
        Self { effects }
    }

    /// Two-outcome PVM `(ψ, I − ψ)`.
    pub fn pvm_state(psi: &PureState) -> Self {
        let p = psi.projector();
        let rest = CMatrix::identity(psi.dim()).sub(&p);
        Self {
            effects: vec![p, rest],
        }
    }

    /// PVM measuring in an orthonormal basis given as unitary columns.
    pub fn basis_measurement(u: &CMatrix) -> Self {
        let d = u.rows;
        let effects = (0..d)
            .map(|k| {
                let col: Vec<Complex64> = (0..d).map(|i| u[(i, k)]).collect();
                CMatrix::outer(&col, &col)
            })
            .collect();
        Self { effects }
    }

    /// Standard-basis PVM.
    pub fn computational(d: usize) -> Self {
        Self::basis_measurement(&CMatrix::identity(d))
    }

    pub fn outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn dim(&self) -> usize {
        self.effects[0].rows
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }
}

/// Maximally entangled state on `C^d ⊗ C^d`.
///
/// `Normalized` is the trace-1 state Φ_d; `Unnormalized` is Ψ_d = d·Φ_d.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntangledConvention {
    Normalized,
    Unnormalized,
}

#[derive(Debug, Clone)]
pub struct MaxEntangled {
    pub d: usize,
    pub convention: EntangledConvention,
}

impl MaxEntangled {
    pub fn phi(d: usize) -> Self {
        Self {
            d,
            convention: EntangledConvention::Normalized,
        }
    }

    pub fn psi(d: usize) -> Self {
        Self {
            d,
            convention: EntangledConvention::Unnormalized,
        }
    }

    /// The ket `|Φ_d⟩` (or `|Ψ_d⟩ = √d |Φ_d⟩`).
    pub fn ket(&self) -> Vec<Complex64> {
        let d = self.d;
        let amp = match self.convention {
            EntangledConvention::Normalized => 1.0 / (d as f64).sqrt(),
            EntangledConvention::Unnormalized => 1.0,
        };
        let mut v = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            v[i * d + i] = Complex64::new(amp, 0.0);
        }
        v
    }

    /// The operator `Φ_d` (or `Ψ_d = d·Φ_d`).
    pub fn operator(&self) -> CMatrix {
        let v = self.ket();
        CMatrix::outer(&v, &v)
    }
}

/// `|Φ_d⟩` as a `PureState`.
pub fn phi_state(d: usize) -> PureState {
    PureState::from_amplitudes_unchecked(MaxEntangled::phi(d).ket())
}

/// The SWAP matrix and the symmetric-subspace projector `(I + SWAP)/2`.
pub fn swap_and_sym(d: usize) -> (CMatrix, CMatrix) {
    assert!(d >= 1);
    let swap = CMatrix::from_fn(d * d, d * d, |r, c| {
        let (i, j) = (r / d, r % d);
        let (k, l) = (c / d, c % d);
        if i == l && j == k {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let sym = swap
        .add(&CMatrix::identity(d * d))
        .scale(Complex64::new(0.5, 0.0));
    (swap, sym)
}

/// Standard purification `(√ρ ⊗ I)|Ψ_d⟩` of a density matrix; its reduction
/// on the first register is ρ and it is already unit-norm.
pub fn purify(rho: &DensityMatrix) -> PureState {
    let d = rho.dim();
    let sq = rho.sqrt();
    // (√ρ ⊗ I) Σ_i |ii⟩ has components (a, i) = √ρ[a, i].
    let mut amps = vec![Complex64::new(0.0, 0.0); d * d];
    for a in 0..d {
        for i in 0..d {
            amps[a * d + i] = sq[(a, i)];
        }
    }
    PureState::normalized(amps).expect("purification of a unit-trace state")
}

/// Born-rule outcome distribution of a POVM on a state.
pub fn born_dist(povm: &Povm, rho: &DensityMatrix) -> Result<Vec<f64>> {
    if povm.dim() != rho.dim() {
        return Err(MatError::DimMismatch("born_dist: dims".into()));
    }
    let mut probs = Vec::with_capacity(povm.outcomes());
    let mut total = 0.0;
    for e in povm.effects() {
        let p = e.trace_product(rho.matrix()).re;
        if p < -1e-9 {
            return Err(MatError::NumericalFailure(format!(
                "born_dist: negative probability {p}"
            )));
        }
        let p = p.max(0.0);
        probs.push(p);
        total += p;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(MatError::NumericalFailure(format!(
            "born_dist: probabilities sum to {total}"
        )));
    }
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

/// Inverse-CDF sample from an explicit probability vector.
pub fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// One Born-rule sample.
pub fn born_sample(povm: &Povm, rho: &DensityMatrix, rng: &mut impl Rng) -> Result<usize> {
    let probs = born_dist(povm, rho)?;
    Ok(sample_index(&probs, rng))
}

/// Reduced state of a pure state on `C^{dA} ⊗ C^{dB}`.
pub fn reduced_state(psi: &PureState, keep: Keep, d_a: usize, d_b: usize) -> Result<DensityMatrix> {
    let full = psi.projector();
    let red = partial_trace(&full, keep, d_a, d_b)?;
    Ok(DensityMatrix::from_matrix_unchecked(red))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::{ginibre, haar_state, MeanAccumulator, SeededStream};
    use crate::matcore::trace_norm;

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(CMatrix::identity(2).scale(Complex64::new(0.5, 0.0))).is_ok());
        // Wrong trace.
        assert!(DensityMatrix::new(CMatrix::identity(2)).is_err());
        // Negative eigenvalue beyond floor.
        let mut bad = CMatrix::identity(2).scale(Complex64::new(0.5, 0.0));
        bad[(0, 0)] = Complex64::new(1.5, 0.0);
        bad[(1, 1)] = Complex64::new(-0.5, 0.0);
        assert!(DensityMatrix::new(bad).is_err());
    }

    #[test]
    fn born_on_basis_states() {
        let pvm = Povm::computational(2);
        let rho = PureState::basis_state(2, 0).density();
        let dist = born_dist(&pvm, &rho).unwrap();
        assert!((dist[0] - 1.0).abs() < 1e-12 && dist[1].abs() < 1e-12);
    }

    #[test]
    fn born_on_entangled_projector() {
        let d = 2;
        let phi = phi_state(d);
        let pvm = Povm::pvm_state(&phi);
        let dist = born_dist(&pvm, &phi.density()).unwrap();
        assert!((dist[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn born_on_maximally_mixed() {
        // (ψ, I−ψ) on I/d gives (1/d, 1−1/d).
        let s = SeededStream::new(30);
        let d = 4;
        let psi = haar_state(d, &mut s.rng(0));
        let pvm = Povm::pvm_state(&psi);
        let dist = born_dist(&pvm, &DensityMatrix::maximally_mixed(d)).unwrap();
        assert!((dist[0] - 0.25).abs() < 1e-10);
        assert!((dist[1] - 0.75).abs() < 1e-10);
    }

    #[test]
    fn sampling_matches_distribution() {
        let s = SeededStream::new(31);
        let mut rng = s.rng(0);
        let probs = [0.1, 0.2, 0.3, 0.4];
        let mut counts = [0u64; 4];
        let n = 200_000;
        for _ in 0..n {
            counts[sample_index(&probs, &mut rng)] += 1;
        }
        for k in 0..4 {
            let phat = counts[k] as f64 / n as f64;
            let se = (probs[k] * (1.0 - probs[k]) / n as f64).sqrt();
            assert!((phat - probs[k]).abs() < 5.0 * se);
        }
    }

    #[test]
    fn swap_sym_traces() {
        let (_, sym2) = swap_and_sym(2);
        assert!((sym2.trace().re - 3.0).abs() < 1e-12);
        let (swap3, _) = swap_and_sym(3);
        assert!((trace_norm(&swap3) - 9.0).abs() < 1e-9);
        // SWAP is Hermitian and unitary.
        assert!(swap3.herm_defect() < 1e-15);
        assert!(swap3.matmul(&swap3).sub(&CMatrix::identity(9)).max_abs() < 1e-15);
    }

    #[test]
    fn sym_projector_matches_monte_carlo_pair_average() {
        // Π_sym = d(d+1)/2 · E[ψ⊗ψ], entrywise within 5 standard errors.
        let s = SeededStream::new(32);
        let d = 2;
        let n = 1_000_000u64;
        let mut accs: Vec<MeanAccumulator> = (0..(d * d * d * d * 2))
            .map(|_| MeanAccumulator::default())
            .collect();
        let mut rng = s.rng(0);
        for _ in 0..n {
            let psi = haar_state(d, &mut rng);
            let pp = psi.tensor(&psi).projector();
            for (k, z) in pp.entries.iter().enumerate() {
                accs[2 * k].push(z.re);
                accs[2 * k + 1].push(z.im);
            }
        }
        let (_, sym) = swap_and_sym(d);
        let scale = d as f64 * (d as f64 + 1.0) / 2.0;
        for (k, z) in sym.entries.iter().enumerate() {
            let (re, im) = (accs[2 * k].clone(), accs[2 * k + 1].clone());
            assert!(
                (scale * re.mean() - z.re).abs() < 5.0 * scale * re.std_err() + 1e-9,
                "entry {k} re"
            );
            assert!(
                (scale * im.mean() - z.im).abs() < 5.0 * scale * im.std_err() + 1e-9,
                "entry {k} im"
            );
        }
    }

    #[test]
    fn haar_fourth_moment_table() {
        // E[|⟨i|ψ⟩|²|⟨j|ψ⟩|²] = 2/d(d+1) (i=j), 1/d(d+1) (i≠j) at d=3, N=10^6.
        let s = SeededStream::new(33);
        let d = 3;
        let mut acc_eq = MeanAccumulator::default();
        let mut acc_ne = MeanAccumulator::default();
        let mut rng = s.rng(0);
        for _ in 0..1_000_000 {
            let psi = haar_state(d, &mut rng);
            let a = psi.amplitudes();
            acc_eq.push(a[0].norm_sqr() * a[0].norm_sqr());
            acc_ne.push(a[0].norm_sqr() * a[1].norm_sqr());
        }
        let denom = d as f64 * (d as f64 + 1.0);
        assert!((acc_eq.mean() - 2.0 / denom).abs() < 5.0 * acc_eq.std_err());
        assert!((acc_ne.mean() - 1.0 / denom).abs() < 5.0 * acc_ne.std_err());
    }

    #[test]
    fn transfer_identity() {
        // √n (A⊗I_n)|Φ_n⟩ = √m (I_m⊗Aᵀ)|Φ_m⟩ for random A ∈ C^{m×n}, m,n ≤ 5.
        let s = SeededStream::new(34);
        let mut rng = s.rng(0);
        for &(m, n) in &[(2usize, 2usize), (3, 2), (2, 5), (5, 3), (4, 4)] {
            let a = ginibre(m, n, &mut rng);
            let phi_n = MaxEntangled::phi(n).ket();
            let phi_m = MaxEntangled::phi(m).ket();
            // (A ⊗ I_n) acts on C^m ⊗ C^n ← C^n ⊗ C^n.
            let mut lhs = vec![Complex64::new(0.0, 0.0); m * n];
            for i in 0..n {
                for a_row in 0..m {
                    lhs[a_row * n + i] += a[(a_row, i)] * phi_n[i * n + i];
                }
            }
            let sn = (n as f64).sqrt();
            for z in &mut lhs {
                *z *= sn;
            }
            // (I_m ⊗ Aᵀ) acts on C^m ⊗ C^n ← C^m ⊗ C^m.
            let mut rhs = vec![Complex64::new(0.0, 0.0); m * n];
            for j in 0..m {
                for i in 0..n {
                    rhs[j * n + i] += a[(j, i)] * phi_m[j * m + j];
                }
            }
            let sm = (m as f64).sqrt();
            for z in &mut rhs {
                *z *= sm;
            }
            for k in 0..m * n {
                assert!((lhs[k] - rhs[k]).norm() < 1e-10, "(m,n)=({m},{n}) k={k}");
            }
        }
    }

    #[test]
    fn purify_cases() {
        // I/2 → Φ_2.
        let p = purify(&DensityMatrix::maximally_mixed(2));
        let phi = phi_state(2);
        assert!((p.inner(&phi).norm() - 1.0).abs() < 1e-12);
        // |0⟩⟨0| → |00⟩.
        let p0 = purify(&PureState::basis_state(2, 0).density());
        assert!((p0.amplitudes()[0].norm() - 1.0).abs() < 1e-12);
        // Random ρ at d=3: reduction on the first register recovers ρ.
        let s = SeededStream::new(35);
        let mut rng = s.rng(0);
        let rho = crate::haar::reduced_haar_state(3, 3, &mut rng);
        let pur = purify(&rho);
        let red = reduced_state(&pur, Keep::First, 3, 3).unwrap();
        assert!(red.matrix().sub(rho.matrix()).max_abs() < 1e-9);
    }

    #[test]
    fn povm_validation() {
        let half = CMatrix::identity(2).scale(Complex64::new(0.5, 0.0));
        assert!(Povm::new(vec![half.clone(), half.clone()]).is_ok());
        assert!(Povm::new(vec![half.clone(), half.clone(), half]).is_err());
    }

    #[test]
    fn born_flags_negative_probability() {
        // An effect pair that sums to I but dips below the -1e-9 floor on
        // individual outcomes is a numerical failure at sampling time.
        let bad = CMatrix::from_fn(2, 2, |i, j| {
            if i == 0 && j == 0 {
                Complex64::new(-1e-6, 0.0)
            } else if i == j {
                Complex64::new(0.5, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let rest = CMatrix::identity(2).sub(&bad);
        let povm = Povm::from_effects_unchecked(vec![bad, rest]);
        let rho = PureState::basis_state(2, 0).density();
        assert!(matches!(
            born_dist(&povm, &rho),
            Err(crate::matcore::MatError::NumericalFailure(_))
        ));
    }

    #[test]
    fn pure_state_trace_distance_identities() {
        // ‖ψ−φ‖₁ = 2√(1−tr(ψφ)) and ≤ 2‖|ψ⟩−|φ⟩‖₂ on random pairs.
        let s = SeededStream::new(36);
        let mut rng = s.rng(0);
        for _ in 0..200 {
            let d = 2 + (rand::Rng::gen::<u64>(&mut rng) % 4) as usize;
            let psi = haar_state(d, &mut rng);
            let phi = haar_state(d, &mut rng);
            let td = trace_norm(&psi.projector().sub(&phi.projector()));
            let overlap = psi.inner(&phi).norm_sqr();
            assert!((td - 2.0 * (1.0 - overlap).max(0.0).sqrt()).abs() < 1e-9);
            let l2: f64 = psi
                .amplitudes()
                .iter()
                .zip(phi.amplitudes())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(td <= 2.0 * l2 + 1e-9);
        }
    }
}
