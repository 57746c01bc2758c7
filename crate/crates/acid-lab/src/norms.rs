//! Superoperator distances: the ACID norm (trace norm of the Choi matrix),
//! Choi ℓ2 distance, the ρ norm and its witness bound, Monte Carlo estimates
//! of the average-case extended trace norm, and multistart lower-bound
//! estimators for the induced trace norm and the diamond norm.
//!
//! The diamond and induced estimators climb with an alternating maximization:
//! for the current pure input ψ, the optimal Hermitian observable B for
//! `‖L(ψ)‖₁ = tr(B L(ψ))` is the eigenvalue-sign matrix of `L(ψ)`, and for
//! fixed B the best ψ is the top eigenvector of the adjoint `L*(B)`. Both
//! half-steps are monotone, every iterate is a feasible pure state, so the
//! returned value never exceeds the true norm (up to eigensolver round-off).

use crate::channels::{Channel, Superop};
use crate::haar::{haar_state, MeanAccumulator, SeededStream};
use crate::matcore::{eigh, trace_norm, CMatrix, MatError, Result, SchattenP};
use crate::quantum::{purify, DensityMatrix, PureState};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

/// ACID norm: trace norm of the Choi matrix.
pub fn acid_norm(s: &Superop) -> f64 {
    trace_norm(s.choi())
}

/// ACID distance `‖J_M − J_N‖₁` between two superoperators of equal dims.
pub fn acid_distance(m: &Superop, n: &Superop) -> Result<f64> {
    Ok(acid_norm(&m.sub(n)?))
}

/// Choi ℓ2 distance `‖J_M − J_N‖₂`.
pub fn choi_l2_distance(m: &Superop, n: &Superop) -> Result<f64> {
    let diff = m.sub(n)?;
    crate::matcore::schatten_norm(diff.choi(), SchattenP::Two)
}

/// The ρ norm `‖L‖_ρ = ‖(I ⊗ √ρᵀ)·(L⊗I)Ψ·(I ⊗ √ρᵀ)‖₁`, computed in the
/// conjugated-Choi form rather than through an explicit purification.
pub fn rho_norm(s: &Superop, rho: &DensityMatrix) -> f64 {
    assert_eq!(s.d_in(), rho.dim(), "rho_norm: dims");
    let d = s.d_in();
    let d_out = s.d_out();
    let sq_t = rho.sqrt().transpose();
    // B[(a,i),(b,j)] = d · Σ_{i',j'} √ρᵀ[i,i'] J[(a,i'),(b,j')] √ρᵀ[j',j]
    let side = d * d_out;
    let mut conj = CMatrix::zeros(side, side);
    for a in 0..d_out {
        for b in 0..d_out {
            for i in 0..d {
                for j in 0..d {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for ip in 0..d {
                        let li = sq_t[(i, ip)];
                        if li.norm_sqr() == 0.0 {
                            continue;
                        }
                        for jp in 0..d {
                            acc += li * s.choi()[(a * d + ip, b * d + jp)] * sq_t[(jp, j)];
                        }
                    }
                    conj[(a * d + i, b * d + j)] = acc * d as f64;
                }
            }
        }
    }
    trace_norm(&conj)
}

/// Witness state from the singular value decomposition of `(L⊗I)Ψ`:
/// `σᵀ = M / (d‖L‖_J)` with `M = tr₁(½ Σ_j s_j (u_j + v_j))`, satisfying
/// `‖L‖_ρ ≤ tr(ρσ)·d·‖L‖_J` for every density matrix ρ.
pub fn sigma_witness(s: &Superop) -> Result<DensityMatrix> {
    if !s.is_hermitian_preserving() {
        return Err(MatError::InvalidInput(
            "sigma_witness: Hermitian-preserving input required".into(),
        ));
    }
    let d = s.d_in();
    let d_out = s.d_out();
    let acid = acid_norm(s);
    if acid < 1e-12 {
        return Err(MatError::InvalidInput(
            "sigma_witness: undefined for the zero superoperator".into(),
        ));
    }
    let big = s.choi().scale(Complex64::new(d as f64, 0.0));
    let svd = crate::matcore::svd_thin(&big, 1e-14);
    let mut m = CMatrix::zeros(d, d);
    for (sv, u, v) in &svd {
        // tr over the first (output) register of |u⟩⟨u| and |v⟩⟨v|.
        for i in 0..d {
            for j in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..d_out {
                    acc += u[a * d + i] * u[a * d + j].conj();
                    acc += v[a * d + i] * v[a * d + j].conj();
                }
                m[(i, j)] += acc * (0.5 * sv);
            }
        }
    }
    let sigma = m
        .transpose()
        .scale(Complex64::new(1.0 / (d as f64 * acid), 0.0))
        .symmetrize();
    let tr = sigma.trace().re;
    Ok(DensityMatrix::from_matrix_unchecked(
        sigma.scale(Complex64::new(1.0 / tr, 0.0)),
    ))
}

/// Sample mean with standard error.
#[derive(Debug, Clone, Serialize)]
pub struct MeanStdErr {
    pub mean: f64,
    pub std_err: f64,
    pub samples: u64,
}

/// `(L ⊗ I_m) ψ` for a pure state ψ on `C^{d_in} ⊗ C^m`, using the signed
/// Kraus terms of `L`.
pub fn apply_extended(
    kraus: &[(f64, CMatrix)],
    d_in: usize,
    d_out: usize,
    m: usize,
    psi: &PureState,
) -> CMatrix {
    assert_eq!(psi.dim(), d_in * m);
    let amps = psi.amplitudes();
    let side = d_out * m;
    let mut out = CMatrix::zeros(side, side);
    for (sign, a) in kraus {
        // w = vec(A V) where V is ψ reshaped to d_in × m.
        let mut w = vec![Complex64::new(0.0, 0.0); side];
        for row in 0..d_out {
            for s in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..d_in {
                    acc += a[(row, i)] * amps[i * m + s];
                }
                w[row * m + s] = acc;
            }
        }
        for r in 0..side {
            if w[r].norm_sqr() == 0.0 {
                continue;
            }
            for c in 0..side {
                out[(r, c)] += w[r] * w[c].conj() * *sign;
            }
        }
    }
    out
}

/// Monte Carlo mean of `‖(L ⊗ I_m)ψ‖₁` over Haar random ψ on `C^{d_in}⊗C^m`.
///
/// Samples are split into fixed-size batches with one RNG stream per batch
/// and merged in batch order, so the result is independent of thread count.
pub fn avg_norm_mc(
    s: &Superop,
    ancilla: usize,
    samples: u64,
    stream: &SeededStream,
) -> Result<MeanStdErr> {
    if samples < 2 {
        return Err(MatError::InvalidInput("avg_norm_mc: samples >= 2".into()));
    }
    let kraus = s.kraus()?.terms;
    let d_in = s.d_in();
    let d_out = s.d_out();
    const BATCH: u64 = 1024;
    let n_batches = samples.div_ceil(BATCH);
    let mut accs: Vec<MeanAccumulator> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.rng(b);
            let mut acc = MeanAccumulator::default();
            let count = BATCH.min(samples - b * BATCH);
            for _ in 0..count {
                let psi = haar_state(d_in * ancilla, &mut rng);
                let y = apply_extended(&kraus, d_in, d_out, ancilla, &psi);
                acc.push(trace_norm(&y));
            }
            acc
        })
        .collect();
    let mut total = MeanAccumulator::default();
    for acc in accs.drain(..) {
        total.merge(&acc);
    }
    Ok(MeanStdErr {
        mean: total.mean(),
        std_err: total.std_err(),
        samples: total.count(),
    })
}

/// Result of a multistart norm estimation.
#[derive(Debug, Clone, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub restarts: usize,
    pub total_iterations: usize,
    /// The maximizing input state, as `[re, im]` amplitude pairs.
    pub best_input: Vec<[f64; 2]>,
}

const ASCENT_TOL: f64 = 1e-9;
const ASCENT_MAX_ITERS: usize = 400;

struct AscentProblem {
    ops: Vec<(f64, CMatrix)>,
    dim_in: usize,
}

impl AscentProblem {
    fn output(&self, psi: &[Complex64]) -> CMatrix {
        let d_out = self.ops[0].1.rows;
        let mut y = CMatrix::zeros(d_out, d_out);
        for (sign, k) in &self.ops {
            let w = k.matvec(psi);
            for r in 0..d_out {
                if w[r].norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..d_out {
                    y[(r, c)] += w[r] * w[c].conj() * *sign;
                }
            }
        }
        y
    }

    fn ascend(&self, mut psi: Vec<Complex64>) -> (f64, Vec<Complex64>, usize) {
        let mut iters = 0;
        let mut best = 0.0f64;
        for it in 0..ASCENT_MAX_ITERS {
            iters = it + 1;
            let y = self.output(&psi);
            let eig = eigh(&y);
            let f: f64 = eig.values.iter().map(|l| l.abs()).sum();
            best = best.max(f);
            // B = Σ sign(λ_k) |w_k⟩⟨w_k| is the optimal observable for ψ.
            let b = eig.apply_spectral(f64::signum);
            let mut h = CMatrix::zeros(self.dim_in, self.dim_in);
            for (sign, k) in &self.ops {
                let t = k.conj_transpose().matmul(&b).matmul(k);
                h = h.add(&t.scale(Complex64::new(*sign, 0.0)));
            }
            let top = eigh(&h);
            let next = top.eigenvector(self.dim_in - 1);
            let gain = top.values[self.dim_in - 1] - f;
            psi = next;
            if gain <= ASCENT_TOL * f.max(1.0) {
                break;
            }
        }
        // Objective at the final feasible iterate.
        let final_f: f64 = eigh(&self.output(&psi))
            .values
            .iter()
            .map(|l| l.abs())
            .sum();
        (best.max(final_f), psi, iters)
    }
}

fn run_multistart(
    problem: &AscentProblem,
    seeds: Vec<Vec<Complex64>>,
) -> (f64, Vec<Complex64>, usize) {
    let results: Vec<(f64, Vec<Complex64>, usize)> = seeds
        .into_par_iter()
        .map(|seed| problem.ascend(seed))
        .collect();
    let total_iters: usize = results.iter().map(|r| r.2).sum();
    let best = results
        .into_iter()
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .expect("at least one seed");
    (best.0, best.1, total_iters)
}

fn pack_state(psi: &[Complex64]) -> Vec<[f64; 2]> {
    psi.iter().map(|z| [z.re, z.im]).collect()
}

/// Lower-bound estimate of the induced trace norm
/// `‖L‖₁ = max_ψ ‖L(ψ)‖₁` by multistart alternating maximization.
pub fn induced_trace_norm_est(
    s: &Superop,
    restarts: usize,
    stream: &SeededStream,
) -> Result<NormEstimate> {
    if !s.is_hermitian_preserving() {
        return Err(MatError::InvalidInput(
            "induced_trace_norm_est: Hermitian-preserving input required".into(),
        ));
    }
    if restarts == 0 {
        return Err(MatError::InvalidInput("restarts >= 1".into()));
    }
    let kraus = s.kraus()?.terms;
    let problem = AscentProblem {
        ops: kraus,
        dim_in: s.d_in(),
    };
    let mut seeds = Vec::with_capacity(restarts);
    seeds.push(PureState::basis_state(s.d_in(), 0).amplitudes().to_vec());
    for r in 1..restarts {
        seeds.push(
            haar_state(s.d_in(), &mut stream.rng(r as u64))
                .amplitudes()
                .to_vec(),
        );
    }
    let (value, best, iters) = run_multistart(&problem, seeds);
    Ok(NormEstimate {
        value,
        restarts,
        total_iterations: iters,
        best_input: pack_state(&best),
    })
}

/// Lower-bound estimate of the diamond norm `‖L‖_⋄ = ‖L ⊗ I_{d_in}‖₁`.
///
/// The ancilla dimension is fixed at `d_in`; the maximally entangled state
/// and a purification of the witness state are always among the seeds, which
/// makes the estimate at least the ACID norm by construction.
pub fn diamond_norm_est(
    s: &Superop,
    restarts: usize,
    stream: &SeededStream,
) -> Result<NormEstimate> {
    if !s.is_hermitian_preserving() {
        return Err(MatError::InvalidInput(
            "diamond_norm_est: Hermitian-preserving input required".into(),
        ));
    }
    if restarts == 0 {
        return Err(MatError::InvalidInput("restarts >= 1".into()));
    }
    let d_in = s.d_in();
    let kraus = s.kraus()?.terms;
    let eye = CMatrix::identity(d_in);
    let ext: Vec<(f64, CMatrix)> = kraus
        .iter()
        .map(|(sign, a)| (*sign, a.kron(&eye)))
        .collect();
    let problem = AscentProblem {
        ops: ext,
        dim_in: d_in * d_in,
    };
    let mut seeds = Vec::with_capacity(restarts);
    seeds.push(crate::quantum::phi_state(d_in).amplitudes().to_vec());
    if restarts > 1 {
        if let Ok(sigma) = sigma_witness(s) {
            seeds.push(purify(&sigma).amplitudes().to_vec());
        }
    }
    let mut r = seeds.len() as u64;
    while seeds.len() < restarts {
        seeds.push(
            haar_state(d_in * d_in, &mut stream.rng(r))
                .amplitudes()
                .to_vec(),
        );
        r += 1;
    }
    let (value, best, iters) = run_multistart(&problem, seeds);
    Ok(NormEstimate {
        value,
        restarts,
        total_iterations: iters,
        best_input: pack_state(&best),
    })
}

/// Upper bound on the diamond norm of a convex-weighted channel difference
/// `L = λM − (1−λ)N`, evaluated as
/// `(1 + ‖(d_in/‖L‖_J)·(tr_out ⊗ I)|J_L| − I‖_∞)·‖L‖_J`.
pub fn jp_bound(lambda: f64, m: &Channel, n: &Channel) -> Result<f64> {
    if lambda <= 0.0 || lambda >= 1.0 {
        return Err(MatError::InvalidInput("jp_bound: lambda in (0,1)".into()));
    }
    let l = m
        .superop()
        .add_weighted(lambda, n.superop(), -(1.0 - lambda))?;
    let acid = acid_norm(&l);
    if acid < 1e-12 {
        return Err(MatError::InvalidInput(
            "jp_bound: undefined for vanishing ACID norm".into(),
        ));
    }
    let abs_choi = eigh(l.choi()).apply_spectral(f64::abs);
    let reduced = crate::matcore::partial_trace(
        &abs_choi,
        crate::matcore::Keep::Second,
        l.d_out(),
        l.d_in(),
    )?;
    let scaled = reduced
        .scale(Complex64::new(l.d_in() as f64 / acid, 0.0))
        .sub(&CMatrix::identity(l.d_in()));
    let inf = crate::matcore::schatten_norm(&scaled, SchattenP::Inf)?;
    Ok((1.0 + inf) * acid)
}

/// Norm summary for a channel difference, with estimator diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct NormReport {
    pub acid: f64,
    pub choi_l2: f64,
    pub induced1_est: f64,
    pub diamond_est: f64,
    pub estimator_restarts: usize,
    pub estimator_iterations: usize,
    pub best_diamond_input: Vec<[f64; 2]>,
}

pub fn norm_report(
    m: &Channel,
    n: &Channel,
    restarts: usize,
    stream: &SeededStream,
) -> Result<NormReport> {
    let diff = m.superop().sub(n.superop())?;
    let induced = induced_trace_norm_est(&diff, restarts, stream)?;
    let diamond = diamond_norm_est(&diff, restarts, stream)?;
    Ok(NormReport {
        acid: acid_norm(&diff),
        choi_l2: choi_l2_distance(m.superop(), n.superop())?,
        induced1_est: induced.value,
        diamond_est: diamond.value,
        estimator_restarts: restarts,
        estimator_iterations: induced.total_iterations + diamond.total_iterations,
        best_diamond_input: diamond.best_input,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{
        make_depol_lb_channel, make_diamond_lb_channel, transpose_superop, Channel,
    };
    use crate::haar::{ginibre, reduced_haar_state};
    use crate::quantum::PureState;
    use rand::Rng;

    fn stream() -> SeededStream {
        SeededStream::new(777)
    }

    fn random_channel(d_in: usize, d_out: usize, rank: usize, rng: &mut impl Rng) -> Channel {
        Channel::haar_random(d_in, d_out, rank, rng).unwrap()
    }

    fn random_hp_superop(d: usize, rng: &mut impl rand::Rng) -> Superop {
        let a = random_channel(d, d, 2, rng);
        let b = random_channel(d, d, 2, rng);
        a.superop().sub(b.superop()).unwrap()
    }

    #[test]
    fn acid_examples() {
        // Watrous pair: distance 2 at every d.
        let (m, n) = Channel::watrous_pair(4).unwrap();
        assert!((acid_distance(m.superop(), n.superop()).unwrap() - 2.0).abs() < 1e-9);
        // Transpose superoperator at d=3: ‖SWAP‖₁/d = 3.
        assert!((acid_norm(&transpose_superop(3)) - 3.0).abs() < 1e-9);
        // Replacement by A = ψ − φ with ψ ⊥ φ: ‖A ⊗ I/d‖₁ = ‖A‖₁ = 2.
        let psi = PureState::basis_state(3, 0);
        let phi = PureState::basis_state(3, 1);
        let mp = Channel::replacement(&psi.density(), 2);
        let np = Channel::replacement(&phi.density(), 2);
        assert!((acid_distance(mp.superop(), np.superop()).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn choi_l2_examples() {
        let dep = Channel::depolarizing(2, 2);
        assert!(choi_l2_distance(dep.superop(), dep.superop()).unwrap() < 1e-12);
        let mut rng = stream().rng(0);
        let fam = make_depol_lb_channel(2, 2, 0.1, &mut rng).unwrap();
        let got = choi_l2_distance(fam.channel.superop(), dep.superop()).unwrap();
        // Eigenvalue arithmetic: four shifts of ±ε/4 give √(4·(0.025)²) = 0.05.
        assert!((got - 0.05).abs() < 1e-9);
        // Watrous pair at d=2 from closed-form spectra:
        // J_M − J_N has 3 eigenvalues 1/3 and one −1.
        let (m, n) = Channel::watrous_pair(2).unwrap();
        let got = choi_l2_distance(m.superop(), n.superop()).unwrap();
        let expect = (3.0 * (1.0f64 / 9.0) + 1.0).sqrt();
        assert!((got - expect).abs() < 1e-9);
        // Cauchy–Schwarz relation to the ACID distance.
        let acid = acid_distance(m.superop(), n.superop()).unwrap();
        assert!(got >= acid / 4.0f64.sqrt() - 1e-9);
    }

    #[test]
    fn rho_norm_at_maximally_mixed_is_acid() {
        let mut rng = stream().rng(1);
        for d in [2usize, 3] {
            let s = random_hp_superop(d, &mut rng);
            let got = rho_norm(&s, &DensityMatrix::maximally_mixed(d));
            assert!((got - acid_norm(&s)).abs() < 1e-9, "d={d}");
        }
    }

    #[test]
    fn rho_norm_matches_purification_route() {
        // Independent oracle: ‖(L⊗I)·purify(ρ)‖₁ via extended Kraus terms.
        let mut rng = stream().rng(11);
        let s = random_hp_superop(3, &mut rng);
        let kraus = s.kraus().unwrap().terms;
        for m in [1usize, 2, 3] {
            let rho = reduced_haar_state(3, m, &mut rng);
            let pur = purify(&rho);
            let oracle = trace_norm(&apply_extended(&kraus, 3, 3, 3, &pur));
            let got = rho_norm(&s, &rho);
            assert!((got - oracle).abs() < 1e-9, "m={m}: {got} vs {oracle}");
        }
    }

    #[test]
    fn rho_norm_cp_map_closed_form() {
        // For completely positive L and any ρ: ‖L‖_ρ = tr((I⊗ρᵀ)(L⊗I)Ψ).
        let mut rng = stream().rng(2);
        let ch = random_channel(3, 3, 2, &mut rng);
        let rho = reduced_haar_state(3, 2, &mut rng);
        let got = rho_norm(ch.superop(), &rho);
        let big = ch.superop().choi().scale(Complex64::new(3.0, 0.0));
        let expect = CMatrix::identity(3)
            .kron(&rho.matrix().transpose())
            .trace_product(&big)
            .re;
        assert!((got - expect).abs() < 1e-9);
    }

    #[test]
    fn rho_norm_cp_expectation_over_invariant_ensemble() {
        // For a completely positive map the ρ norm averages exactly to the
        // ACID norm over any unitarily invariant ensemble.
        let mut rng = stream().rng(13);
        let ch = random_channel(3, 3, 2, &mut rng);
        let acid = acid_norm(ch.superop());
        let mut acc = crate::haar::MeanAccumulator::default();
        for _ in 0..2000 {
            let rho = reduced_haar_state(3, 2, &mut rng);
            acc.push(rho_norm(ch.superop(), &rho));
        }
        assert!((acc.mean() - acid).abs() < 5.0 * acc.std_err() + 1e-9);
    }

    #[test]
    fn rho_norm_reflection_example_vanishes() {
        // L(X) = X − UXU with U = I − 2Π and ρ = 2Π/d: the ρ norm is 0
        // even though the ACID norm is 2.
        let d = 4;
        let mut proj = CMatrix::zeros(d, d);
        proj[(0, 0)] = Complex64::new(1.0, 0.0);
        proj[(1, 1)] = Complex64::new(1.0, 0.0);
        let u = CMatrix::identity(d).sub(&proj.scale(Complex64::new(2.0, 0.0)));
        let id = Channel::identity(d);
        let refl = Channel::unitary(&u).unwrap();
        let l = id.superop().sub(refl.superop()).unwrap();
        let rho = DensityMatrix::new(proj.scale(Complex64::new(2.0 / d as f64, 0.0))).unwrap();
        assert!(rho_norm(&l, &rho).abs() < 1e-9);
        assert!((acid_norm(&l) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn witness_identity_channel() {
        let id = Channel::identity(3);
        let sigma = sigma_witness(id.superop()).unwrap();
        let expect = CMatrix::identity(3).scale(Complex64::new(1.0 / 3.0, 0.0));
        assert!(sigma.matrix().sub(&expect).max_abs() < 1e-9);
    }

    #[test]
    fn witness_bound_holds() {
        let mut rng = stream().rng(3);
        let d = 3;
        for trial in 0..20 {
            let s = random_hp_superop(d, &mut rng);
            let sigma = sigma_witness(&s).unwrap();
            let acid = acid_norm(&s);
            for _ in 0..5 {
                let rho = reduced_haar_state(d, 1 + (trial % 3), &mut rng);
                let lhs = rho_norm(&s, &rho);
                let rhs = rho.matrix().trace_product(sigma.matrix()).re * d as f64 * acid;
                assert!(lhs <= rhs + 1e-8, "lhs={lhs} rhs={rhs}");
            }
        }
    }

    #[test]
    fn witness_replacement_bound_tight() {
        // L(X) = tr(X)A has constant ρ norm ‖A‖₁ for every ρ.
        let psi = PureState::basis_state(2, 0);
        let phi = PureState::basis_state(2, 1);
        let m = Channel::replacement(&psi.density(), 2);
        let n = Channel::replacement(&phi.density(), 2);
        let l = m.superop().sub(n.superop()).unwrap();
        let mut rng = stream().rng(4);
        for _ in 0..10 {
            let rho = reduced_haar_state(2, 2, &mut rng);
            assert!((rho_norm(&l, &rho) - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn witness_rejects_zero_map() {
        let id = Channel::identity(2);
        let zero = id.superop().sub(id.superop()).unwrap();
        assert!(sigma_witness(&zero).is_err());
    }

    #[test]
    fn avg_norm_identity_difference_is_zero() {
        let id = Channel::identity(2);
        let zero = id.superop().sub(id.superop()).unwrap();
        let r = avg_norm_mc(&zero, 2, 100, &stream()).unwrap();
        assert!(r.mean.abs() < 1e-12);
    }

    #[test]
    fn avg_norm_watrous_no_ancilla() {
        // E‖(M−N)ψ‖₁ = 4/(d+1) = 0.8 at d=4 (zero variance for this pair).
        let (m, n) = Channel::watrous_pair(4).unwrap();
        let diff = m.superop().sub(n.superop()).unwrap();
        let r = avg_norm_mc(&diff, 1, 2000, &stream()).unwrap();
        assert!((r.mean - 0.8).abs() < 5.0 * r.std_err + 1e-9);
    }

    #[test]
    fn avg_norm_watrous_full_ancilla_in_bracket() {
        // With m = d the average lies in [2m/(2d+m), 2].
        let d = 4;
        let (m, n) = Channel::watrous_pair(d).unwrap();
        let diff = m.superop().sub(n.superop()).unwrap();
        let r = avg_norm_mc(&diff, d, 2000, &stream()).unwrap();
        let lower = d as f64 / (2.0 * d as f64 + d as f64) * 2.0;
        assert!(r.mean >= lower - 5.0 * r.std_err);
        assert!(r.mean <= 2.0 + 5.0 * r.std_err);
    }

    #[test]
    fn estimators_on_channels_give_one() {
        let mut rng = stream().rng(5);
        let ch = random_channel(3, 2, 2, &mut rng);
        let ind = induced_trace_norm_est(ch.superop(), 4, &stream()).unwrap();
        assert!(ind.value > 1.0 - 1e-6 && ind.value < 1.0 + 1e-7);
        let dia = diamond_norm_est(ch.superop(), 4, &stream()).unwrap();
        assert!(dia.value > 1.0 - 1e-6 && dia.value < 1.0 + 1e-7);
    }

    #[test]
    fn estimators_watrous_values() {
        let (m, n) = Channel::watrous_pair(4).unwrap();
        let diff = m.superop().sub(n.superop()).unwrap();
        let ind = induced_trace_norm_est(&diff, 8, &stream()).unwrap();
        assert!((ind.value - 0.8).abs() < 1e-3, "induced {}", ind.value);
        let dia = diamond_norm_est(&diff, 8, &stream()).unwrap();
        assert!((dia.value - 2.0).abs() < 1e-3, "diamond {}", dia.value);
    }

    #[test]
    fn estimator_transpose_diamond() {
        // The transpose map has ‖L‖_⋄ = d·‖L‖_J/d = 2 at d=2.
        let t = transpose_superop(2);
        let dia = diamond_norm_est(&t, 8, &stream()).unwrap();
        assert!((dia.value - 2.0).abs() < 1e-3);
    }

    #[test]
    fn estimator_rejects_bad_input() {
        let mut rng = stream().rng(6);
        let g = ginibre(4, 4, &mut rng);
        let s = Superop::from_choi(2, 2, g).unwrap();
        assert!(induced_trace_norm_est(&s, 2, &stream()).is_err());
        let id = Channel::identity(2);
        assert!(diamond_norm_est(id.superop(), 0, &stream()).is_err());
    }

    #[test]
    fn estimator_monotone_in_restarts() {
        let mut rng = stream().rng(7);
        let s = random_hp_superop(3, &mut rng);
        let v2 = diamond_norm_est(&s, 2, &stream()).unwrap().value;
        let v8 = diamond_norm_est(&s, 8, &stream()).unwrap().value;
        assert!(v8 >= v2 - 1e-12);
    }

    #[test]
    fn diamond_lb_channel_detectable() {
        // N = identity at d=2, ε = 0.5: the induced-norm estimate of M − N
        // is at least ε (the probe input witnesses it).
        let mut rng = stream().rng(8);
        let n = Channel::identity(2);
        let fam = make_diamond_lb_channel(&n, 0.5, &mut rng).unwrap();
        assert!(fam.channel.superop().validate_cptp().is_cp);
        let diff = fam.channel.superop().sub(n.superop()).unwrap();
        let est = induced_trace_norm_est(&diff, 8, &stream()).unwrap();
        assert!(est.value >= 0.5 - 1e-6, "est {}", est.value);
        // Diamond bound from the construction: ≥ 2ε(1 − 1/d_out).
        let dia = diamond_norm_est(&diff, 8, &stream()).unwrap();
        assert!(dia.value >= 2.0 * 0.5 * (1.0 - 0.5) - 1e-3);
    }

    #[test]
    fn sandwich_diamond_acid() {
        // (1/d)‖L‖_⋄ ≤ ‖L‖_J ≤ ‖L‖_⋄, with the right inequality exact by
        // construction (Φ is always a diamond seed).
        let mut rng = stream().rng(9);
        for _ in 0..10 {
            let s = random_hp_superop(3, &mut rng);
            let acid = acid_norm(&s);
            let dia = diamond_norm_est(&s, 6, &stream()).unwrap().value;
            assert!(dia / 3.0 <= acid + 1e-6);
            assert!(acid <= dia + 1e-9);
        }
    }

    #[test]
    fn jp_bound_examples() {
        let (m, n) = Channel::watrous_pair(4).unwrap();
        // λ = ½: the reduced |J| is I/d for this pair, so the bound is
        // exactly 1 and matches half the diamond distance.
        let bound = jp_bound(0.5, &m, &n).unwrap();
        assert!((bound - 1.0).abs() < 1e-9);
        let diff = m.superop().add_weighted(0.5, n.superop(), -0.5).unwrap();
        let dia = diamond_norm_est(&diff, 6, &stream()).unwrap().value;
        assert!(bound >= dia - 1e-6);
        assert!(bound <= 4.0 * acid_norm(&diff) + 1e-9);
        // M = N is the undefined path.
        assert!(jp_bound(0.5, &m, &m).is_err());
    }

    #[test]
    fn jp_bound_depol_sandwich() {
        let mut rng = stream().rng(10);
        let dep = Channel::depolarizing(2, 2);
        let fam = make_depol_lb_channel(2, 2, 0.1, &mut rng).unwrap();
        let bound = jp_bound(0.5, &fam.channel, &dep).unwrap();
        let diff = fam
            .channel
            .superop()
            .add_weighted(0.5, dep.superop(), -0.5)
            .unwrap();
        let dia = diamond_norm_est(&diff, 6, &stream()).unwrap().value;
        assert!(bound >= dia - 1e-6);
        assert!(bound <= 2.0 * acid_norm(&diff) + 1e-9);
    }

    #[test]
    fn rho_norm_lipschitz_in_fidelity() {
        // ‖L‖_ρ − ‖L‖_σ ≤ 2‖L‖_⋄ √(1 − F(ρ, σ)) on random pairs.
        use crate::matcore::fidelity;
        let mut rng = stream().rng(12);
        let s = random_hp_superop(3, &mut rng);
        let dia = diamond_norm_est(&s, 8, &stream()).unwrap().value;
        for _ in 0..50 {
            let rho = reduced_haar_state(3, 2, &mut rng);
            let sigma = reduced_haar_state(3, 3, &mut rng);
            let lhs = rho_norm(&s, &rho) - rho_norm(&s, &sigma);
            let f = fidelity(rho.matrix(), sigma.matrix()).unwrap();
            let rhs = 2.0 * dia * (1.0 - f).max(0.0).sqrt();
            assert!(lhs <= rhs + 1e-6, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn norm_report_serializes() {
        let (m, n) = Channel::watrous_pair(2).unwrap();
        let report = norm_report(&m, &n, 4, &stream()).unwrap();
        assert!(report.acid <= report.diamond_est + 1e-6);
        let text = serde_json::to_string(&report).unwrap();
        assert!(text.contains("\"acid\""));
    }
}
