//! Haar-measure sampling: unitaries, pure states, reductions of bipartite
//! states, and random projections, all driven by splittable seeded RNG
//! streams so that parallel workers produce identical results regardless of
//! thread count.

use crate::matcore::CMatrix;
use crate::quantum::{DensityMatrix, PureState};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

/// Master seed plus stream index; identical `(seed, index)` pairs yield
/// identical sample sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeededStream {
    seed: u64,
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent RNG for stream `index`.
    pub fn rng(&self, index: u64) -> ChaCha12Rng {
        let mut r = ChaCha12Rng::seed_from_u64(self.seed);
        r.set_stream(index);
        r
    }
}

pub fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

/// Ginibre matrix: iid standard complex Gaussian entries.
pub fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Haar random unitary via QR of a Ginibre matrix.
///
/// Modified Gram–Schmidt with re-orthogonalization; the R factor has a
/// positive diagonal by construction, which is exactly the phase convention
/// that makes Q Haar-distributed.
pub fn haar_unitary(d: usize, rng: &mut impl Rng) -> CMatrix {
    assert!(d >= 1, "haar_unitary: d >= 1");
    let g = ginibre(d, d, rng);
    let mut cols: Vec<Vec<Complex64>> = (0..d)
        .map(|j| (0..d).map(|i| g[(i, j)]).collect())
        .collect();
    for j in 0..d {
        for _pass in 0..2 {
            for k in 0..j {
                let proj: Complex64 = (0..d).map(|i| cols[k][i].conj() * cols[j][i]).sum();
                for i in 0..d {
                    let v = cols[k][i] * proj;
                    cols[j][i] -= v;
                }
            }
        }
        let norm: f64 = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut cols[j] {
            *z /= norm;
        }
    }
    CMatrix::from_fn(d, d, |i, j| cols[j][i])
}

/// Haar random pure state in `C^d`.
pub fn haar_state(d: usize, rng: &mut impl Rng) -> PureState {
    assert!(d >= 1);
    let mut v: Vec<Complex64> = (0..d).map(|_| complex_gaussian(rng)).collect();
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut v {
        *z /= norm;
    }
    PureState::from_amplitudes_unchecked(v)
}

/// Haar random pure state on `C^d ⊗ C^m`.
pub fn haar_bipartite(d: usize, m: usize, rng: &mut impl Rng) -> PureState {
    haar_state(d * m, rng)
}

/// Reduction to the first factor of a Haar random state on `C^d ⊗ C^m`.
///
/// Computed directly as `A A†` for the `d × m` amplitude matrix, so no
/// eigendecomposition is involved and the result is PSD by construction.
pub fn reduced_haar_state(d: usize, m: usize, rng: &mut impl Rng) -> DensityMatrix {
    let psi = haar_bipartite(d, m, rng);
    let amps = psi.amplitudes();
    let rho = CMatrix::from_fn(d, d, |i, j| {
        (0..m)
            .map(|s| amps[i * m + s] * amps[j * m + s].conj())
            .sum()
    });
    DensityMatrix::from_matrix_unchecked(rho)
}

/// Hermitian projection onto a Haar random `r`-dimensional subspace of `C^d`.
pub fn random_projection(d: usize, r: usize, rng: &mut impl Rng) -> CMatrix {
    assert!(r <= d, "random_projection: rank out of range");
    if r == 0 {
        return CMatrix::zeros(d, d);
    }
    if r == d {
        return CMatrix::identity(d);
    }
    let u = haar_unitary(d, rng);
    let mut p = CMatrix::zeros(d, d);
    for k in 0..r {
        for i in 0..d {
            for j in 0..d {
                p[(i, j)] += u[(i, k)] * u[(j, k)].conj();
            }
        }
    }
    p.symmetrize()
}

/// Density matrix maximally mixed on a Haar random `r`-dimensional subspace.
pub fn random_subspace_mixed(d: usize, r: usize, rng: &mut impl Rng) -> DensityMatrix {
    assert!(r >= 1 && r <= d);
    let p = random_projection(d, r, rng);
    DensityMatrix::from_matrix_unchecked(p.scale(Complex64::new(1.0 / r as f64, 0.0)))
}

/// Running mean and standard error accumulator.
#[derive(Debug, Clone, Default)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanAccumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let delta = other.mean - self.mean;
        let n = n1 + n2;
        self.mean += delta * n2 / n;
        self.m2 += other.m2 + delta * delta * n1 * n2 / n;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            // 1e-8 floor keeps k-sigma comparisons meaningful for samples
            // that are constant up to round-off.
            (self.variance() / self.n as f64).sqrt().max(1e-8)
        }
    }
}
