//! Superoperators in canonical Choi form, CPTP validation, Kraus
//! decompositions, a zoo of named channels, and the adversarial families
//! used by the certification lower-bound experiments.
//!
//! Conventions, enforced by round-trip tests:
//!
//! * The Choi matrix is trace-normalized, `J_L = (L ⊗ I) Φ_{d_in}
//!   = (1/d_in) Σ_ij L(|i⟩⟨j|) ⊗ |i⟩⟨j|`.
//! * Register ordering is output first, then the input copy: row index
//!   `(a, i) = a·d_in + i`.
//! * A channel's Choi matrix is PSD and its partial trace over the output
//!   register is `I_{d_in}/d_in`.

use crate::haar::{complex_gaussian, haar_state};
use crate::matcore::{eigh, partial_trace, CMatrix, Keep, MatError, Result};
use crate::quantum::{swap_and_sym, DensityMatrix, PureState};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Internal CPTP tolerance for constructed channels.
pub const CPTP_TOL: f64 = 1e-9;
/// Looser tolerance applied when loading hand-authored JSON files.
pub const CPTP_TOL_JSON: f64 = 1e-6;

/// A superoperator stored as its trace-normalized Choi matrix.
#[derive(Debug, Clone)]
pub struct Superop {
    d_in: usize,
    d_out: usize,
    choi: CMatrix,
}

impl Superop {
    pub fn from_choi(d_in: usize, d_out: usize, choi: CMatrix) -> Result<Self> {
        if !choi.is_square() || choi.rows != d_in * d_out {
            return Err(MatError::DimMismatch(format!(
                "Superop: Choi side {} != d_in·d_out = {}",
                choi.rows,
                d_in * d_out
            )));
        }
        if !choi.is_finite() {
            return Err(MatError::InvalidInput("Superop: non-finite Choi".into()));
        }
        Ok(Self { d_in, d_out, choi })
    }

    /// Builds the superoperator from its action on the basis matrices
    /// `|i⟩⟨j|`.
    pub fn from_action(
        d_in: usize,
        d_out: usize,
        mut action: impl FnMut(usize, usize) -> CMatrix,
    ) -> Self {
        let side = d_in * d_out;
        let mut choi = CMatrix::zeros(side, side);
        let scale = 1.0 / d_in as f64;
        for i in 0..d_in {
            for j in 0..d_in {
                let block = action(i, j);
                debug_assert_eq!((block.rows, block.cols), (d_out, d_out));
                for a in 0..d_out {
                    for b in 0..d_out {
                        choi[(a * d_in + i, b * d_in + j)] = block[(a, b)] * scale;
                    }
                }
            }
        }
        Self { d_in, d_out, choi }
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn choi(&self) -> &CMatrix {
        &self.choi
    }

    pub fn is_hermitian_preserving(&self) -> bool {
        self.choi.herm_defect() <= 1e-9 * self.choi.max_abs().max(1.0)
    }

    /// Applies the superoperator: `L(X) = d_in · tr₂(J (I ⊗ Xᵀ))`.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        assert_eq!(
            (x.rows, x.cols),
            (self.d_in, self.d_in),
            "Superop::apply: input dims"
        );
        let d_in = self.d_in;
        let mut out = CMatrix::zeros(self.d_out, self.d_out);
        for a in 0..self.d_out {
            for b in 0..self.d_out {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..d_in {
                    for k in 0..d_in {
                        acc += self.choi[(a * d_in + i, b * d_in + k)] * x[(i, k)];
                    }
                }
                out[(a, b)] = acc * d_in as f64;
            }
        }
        out
    }

    /// Heisenberg-picture adjoint: `tr(B L(X)) = tr(L*(B) X)`.
    pub fn apply_adjoint(&self, b: &CMatrix) -> CMatrix {
        assert_eq!((b.rows, b.cols), (self.d_out, self.d_out));
        let d_in = self.d_in;
        let mut out = CMatrix::zeros(d_in, d_in);
        for u in 0..d_in {
            for v in 0..d_in {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..self.d_out {
                    for c in 0..self.d_out {
                        acc += self.choi[(a * d_in + v, c * d_in + u)] * b[(c, a)];
                    }
                }
                out[(u, v)] = acc * d_in as f64;
            }
        }
        out
    }

    pub fn sub(&self, other: &Superop) -> Result<Superop> {
        if (self.d_in, self.d_out) != (other.d_in, other.d_out) {
            return Err(MatError::DimMismatch("Superop::sub: dims".into()));
        }
        Ok(Superop {
            d_in: self.d_in,
            d_out: self.d_out,
            choi: self.choi.sub(&other.choi),
        })
    }

    pub fn add_weighted(&self, w_self: f64, other: &Superop, w_other: f64) -> Result<Superop> {
        if (self.d_in, self.d_out) != (other.d_in, other.d_out) {
            return Err(MatError::DimMismatch("Superop::add_weighted: dims".into()));
        }
        Ok(Superop {
            d_in: self.d_in,
            d_out: self.d_out,
            choi: self
                .choi
                .scale(Complex64::new(w_self, 0.0))
                .add(&other.choi.scale(Complex64::new(w_other, 0.0))),
        })
    }

    /// Tensor product `S ⊗ T`, acting on `C^{dS_in·dT_in}`.
    pub fn tensor(&self, other: &Superop) -> Superop {
        let (o1, i1) = (self.d_out, self.d_in);
        let (o2, i2) = (other.d_out, other.d_in);
        let d_in = i1 * i2;
        let d_out = o1 * o2;
        let side = d_in * d_out;
        let mut choi = CMatrix::zeros(side, side);
        // J_{S⊗T} is J_S ⊗ J_T with registers permuted from
        // (out1, in1, out2, in2) to (out1, out2, in1, in2).
        for a1 in 0..o1 {
            for i in 0..i1 {
                for a2 in 0..o2 {
                    for k in 0..i2 {
                        let row = ((a1 * o2 + a2) * d_in) + (i * i2 + k);
                        for b1 in 0..o1 {
                            for j in 0..i1 {
                                let left = self.choi[(a1 * i1 + i, b1 * i1 + j)];
                                if left.norm_sqr() == 0.0 {
                                    continue;
                                }
                                for b2 in 0..o2 {
                                    for l in 0..i2 {
                                        let col = ((b1 * o2 + b2) * d_in) + (j * i2 + l);
                                        choi[(row, col)] =
                                            left * other.choi[(a2 * i2 + k, b2 * i2 + l)];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Superop { d_in, d_out, choi }
    }

    /// Composition `self ∘ inner`: first `inner`, then `self`.
    pub fn compose(&self, inner: &Superop) -> Result<Superop> {
        if self.d_in != inner.d_out {
            return Err(MatError::DimMismatch("Superop::compose: inner dims".into()));
        }
        let mut basis = CMatrix::zeros(inner.d_in, inner.d_in);
        Ok(Superop::from_action(inner.d_in, self.d_out, |i, j| {
            basis[(i, j)] = Complex64::new(1.0, 0.0);
            let out = self.apply(&inner.apply(&basis));
            basis[(i, j)] = Complex64::new(0.0, 0.0);
            out
        }))
    }

    /// The dual superoperator `L̄(X) = L(Xᵀ)ᵀ`, whose Choi matrix is the
    /// element-wise complex conjugate of `J_L`.
    pub fn dual(&self) -> Superop {
        Superop {
            d_in: self.d_in,
            d_out: self.d_out,
            choi: self.choi.conj(),
        }
    }

    /// Signed Kraus decomposition from the spectral decomposition of the
    /// Choi matrix; requires a Hermitian Choi matrix.
    pub fn kraus(&self) -> Result<KrausSet> {
        if !self.is_hermitian_preserving() {
            return Err(MatError::InvalidInput(
                "kraus: Choi matrix is not Hermitian".into(),
            ));
        }
        let eig = eigh(&self.choi);
        let mut terms = Vec::new();
        for k in 0..eig.values.len() {
            let lambda = eig.values[k];
            if lambda.abs() <= 1e-12 {
                continue;
            }
            let w = eig.eigenvector(k);
            let coeff = (self.d_in as f64 * lambda.abs()).sqrt();
            let a = CMatrix::from_fn(self.d_out, self.d_in, |row, col| {
                w[row * self.d_in + col] * coeff
            });
            terms.push((lambda.signum(), a));
        }
        Ok(KrausSet {
            d_in: self.d_in,
            d_out: self.d_out,
            terms,
        })
    }

    pub fn validate_cptp(&self) -> CptpReport {
        self.validate_cptp_with_tol(CPTP_TOL)
    }

    pub fn validate_cptp_with_tol(&self, tol: f64) -> CptpReport {
        let min_eig = eigh(&self.choi).values.first().copied().unwrap_or(0.0);
        let reduced = partial_trace(&self.choi, Keep::Second, self.d_out, self.d_in)
            .expect("choi side is d_out·d_in");
        let target =
            CMatrix::identity(self.d_in).scale(Complex64::new(1.0 / self.d_in as f64, 0.0));
        let tp_residual = reduced.sub(&target).max_abs();
        let herm = self.choi.herm_defect();
        CptpReport {
            is_cp: herm <= tol && min_eig >= -tol,
            is_tp: tp_residual <= tol,
            min_eig,
            tp_residual,
        }
    }
}

/// Diagnostic report from `validate_cptp`.
#[derive(Debug, Clone, Serialize)]
pub struct CptpReport {
    pub is_cp: bool,
    pub is_tp: bool,
    pub min_eig: f64,
    pub tp_residual: f64,
}

/// Signed Kraus decomposition of a Hermitian-preserving superoperator.
#[derive(Debug, Clone)]
pub struct KrausSet {
    pub d_in: usize,
    pub d_out: usize,
    /// `(sign, A_j)` with `L(X) = Σ_j sign_j · A_j X A_j†`.
    pub terms: Vec<(f64, CMatrix)>,
}

impl KrausSet {
    pub fn channel_terms(ops: Vec<CMatrix>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| MatError::InvalidInput("KrausSet: empty".into()))?;
        let (d_out, d_in) = (first.rows, first.cols);
        if ops.iter().any(|a| (a.rows, a.cols) != (d_out, d_in)) {
            return Err(MatError::DimMismatch("KrausSet: mixed dims".into()));
        }
        Ok(Self {
            d_in,
            d_out,
            terms: ops.into_iter().map(|a| (1.0, a)).collect(),
        })
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.d_out, self.d_out);
        for (sign, a) in &self.terms {
            let t = a.matmul(x).matmul(&a.conj_transpose());
            out = out.add(&t.scale(Complex64::new(*sign, 0.0)));
        }
        out
    }

    /// Builds the Choi matrix `(1/d_in) Σ_j sign_j |v_{A_j}⟩⟨v_{A_j}|` where
    /// `v_A[(a,i)] = A[a,i]`.
    pub fn to_superop(&self) -> Superop {
        let side = self.d_in * self.d_out;
        let mut choi = CMatrix::zeros(side, side);
        let scale = 1.0 / self.d_in as f64;
        for (sign, a) in &self.terms {
            let v: Vec<Complex64> = (0..self.d_out)
                .flat_map(|row| (0..self.d_in).map(move |col| a[(row, col)]))
                .collect();
            for r in 0..side {
                if v[r].norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..side {
                    choi[(r, c)] += v[r] * v[c].conj() * (sign * scale);
                }
            }
        }
        Superop {
            d_in: self.d_in,
            d_out: self.d_out,
            choi,
        }
    }

    /// `Σ_j sign_j A_j† A_j`, which equals the identity for a channel.
    pub fn completeness_sum(&self) -> CMatrix {
        let mut sum = CMatrix::zeros(self.d_in, self.d_in);
        for (sign, a) in &self.terms {
            sum = sum.add(
                &a.conj_transpose()
                    .matmul(a)
                    .scale(Complex64::new(*sign, 0.0)),
            );
        }
        sum
    }
}

/// A completely positive trace-preserving superoperator.
#[derive(Debug, Clone)]
pub struct Channel {
    sup: Superop,
}

impl Channel {
    pub fn new(sup: Superop) -> Result<Self> {
        Self::with_tol(sup, CPTP_TOL)
    }

    pub fn with_tol(sup: Superop, tol: f64) -> Result<Self> {
        let report = sup.validate_cptp_with_tol(tol);
        if !report.is_cp || !report.is_tp {
            return Err(MatError::InvalidInput(format!(
                "Channel: CPTP validation failed (min_eig {}, tp_residual {})",
                report.min_eig, report.tp_residual
            )));
        }
        Ok(Self { sup })
    }

    pub fn superop(&self) -> &Superop {
        &self.sup
    }

    pub fn into_superop(self) -> Superop {
        self.sup
    }

    pub fn apply_density(&self, rho: &DensityMatrix) -> DensityMatrix {
        DensityMatrix::from_matrix_unchecked(self.sup.apply(rho.matrix()).symmetrize())
    }

    pub fn dual(&self) -> Channel {
        Channel {
            sup: self.sup.dual(),
        }
    }

    pub fn tensor(&self, other: &Channel) -> Channel {
        Channel {
            sup: self.sup.tensor(&other.sup),
        }
    }

    // --- The zoo ---

    pub fn identity(d: usize) -> Channel {
        Channel::unitary(&CMatrix::identity(d)).expect("identity is unitary")
    }

    pub fn unitary(u: &CMatrix) -> Result<Channel> {
        if !u.is_square() {
            return Err(MatError::InvalidInput("unitary: not square".into()));
        }
        let defect = u
            .conj_transpose()
            .matmul(u)
            .sub(&CMatrix::identity(u.rows))
            .max_abs();
        if defect > 1e-10 {
            return Err(MatError::InvalidInput(format!(
                "unitary: U†U deviates from I by {defect}"
            )));
        }
        let k = KrausSet::channel_terms(vec![u.clone()])?;
        Ok(Channel {
            sup: k.to_superop(),
        })
    }

    /// `N(X) = tr(X) σ` for a fixed state σ; `J = σ ⊗ I/d_in`.
    pub fn replacement(sigma: &DensityMatrix, d_in: usize) -> Channel {
        let d_out = sigma.dim();
        let eye = CMatrix::identity(d_in).scale(Complex64::new(1.0 / d_in as f64, 0.0));
        let choi = sigma.matrix().kron(&eye);
        Channel {
            sup: Superop { d_in, d_out, choi },
        }
    }

    /// The completely depolarizing channel `N(X) = tr(X) I/d_out`.
    pub fn depolarizing(d_in: usize, d_out: usize) -> Channel {
        Channel::replacement(&DensityMatrix::maximally_mixed(d_out), d_in)
    }

    /// Erasure channel `I_{d_out} ⊗ tr_{d_in/d_out}`; requires `d_out | d_in`.
    pub fn erasure(d_out: usize, d_in: usize) -> Result<Channel> {
        if d_out == 0 || !d_in.is_multiple_of(d_out) {
            return Err(MatError::InvalidInput(
                "erasure: d_out must divide d_in".into(),
            ));
        }
        let r = d_in / d_out;
        let mut ops = Vec::with_capacity(r);
        for s in 0..r {
            ops.push(CMatrix::from_fn(d_out, d_in, |row, col| {
                if col == row * r + s {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }));
        }
        Ok(Channel {
            sup: KrausSet::channel_terms(ops)?.to_superop(),
        })
    }

    /// Encodes a Boolean function `f: [d] → {0,1}` as the channel that
    /// measures in the standard basis and outputs `|f(j)⟩⟨f(j)|`.
    pub fn boolean_function(f: &[bool]) -> Channel {
        let d = f.len();
        let ops = (0..d)
            .map(|j| {
                CMatrix::from_fn(2, d, |row, col| {
                    if col == j && row == usize::from(f[j]) {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
            })
            .collect();
        Channel {
            sup: KrausSet::channel_terms(ops).expect("nonempty").to_superop(),
        }
    }

    /// Random channel from a Haar isometry: the Kraus operators are blocks
    /// of the first `d_in` columns of a Haar unitary on `C^{d_out·rank}`.
    pub fn haar_random(
        d_in: usize,
        d_out: usize,
        kraus_rank: usize,
        rng: &mut impl Rng,
    ) -> Result<Channel> {
        if d_out * kraus_rank < d_in {
            return Err(MatError::InvalidInput(
                "haar_random: d_out·rank must be at least d_in".into(),
            ));
        }
        let u = crate::haar::haar_unitary(d_out * kraus_rank, rng);
        let ops: Vec<CMatrix> = (0..kraus_rank)
            .map(|k| CMatrix::from_fn(d_out, d_in, |a, i| u[(a * kraus_rank + k, i)]))
            .collect();
        Channel::new(KrausSet::channel_terms(ops)?.to_superop())
    }

    /// Watrous's channel pair: `M(X) = (tr(X)I + Xᵀ)/(d+1)`,
    /// `N(X) = (tr(X)I − Xᵀ)/(d−1)`, with Choi states proportional to the
    /// symmetric and antisymmetric projectors.
    pub fn watrous_pair(d: usize) -> Result<(Channel, Channel)> {
        if d < 2 {
            return Err(MatError::InvalidInput("watrous_pair: d >= 2".into()));
        }
        let (_, sym) = swap_and_sym(d);
        let df = d as f64;
        let jm = sym.scale(Complex64::new(2.0 / (df * (df + 1.0)), 0.0));
        let anti = CMatrix::identity(d * d).sub(&sym);
        let jn = anti.scale(Complex64::new(2.0 / (df * (df - 1.0)), 0.0));
        Ok((
            Channel {
                sup: Superop {
                    d_in: d,
                    d_out: d,
                    choi: jm,
                },
            },
            Channel {
                sup: Superop {
                    d_in: d,
                    d_out: d,
                    choi: jn,
                },
            },
        ))
    }
}

/// The transpose superoperator `L(X) = Xᵀ` (Hermitian-preserving, not CP);
/// its Choi matrix is `SWAP/d`.
pub fn transpose_superop(d: usize) -> Superop {
    let (swap, _) = swap_and_sym(d);
    Superop {
        d_in: d,
        d_out: d,
        choi: swap.scale(Complex64::new(1.0 / d as f64, 0.0)),
    }
}

/// Perturbed channel that behaves like `N` except near a Haar random probe
/// state: `M(X) = (1−ε)N(X) + ε tr(φX)ψ + ε N((I−φ)X(I−φ))` with ψ the
/// eigenstate of the smallest eigenvalue of `N(φ)`.
#[derive(Debug, Clone)]
pub struct DiamondLbChannel {
    pub channel: Channel,
    /// The Haar random probe state φ.
    pub probe: PureState,
    /// The output eigenstate ψ.
    pub output: PureState,
}

pub fn make_diamond_lb_channel(
    n: &Channel,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<DiamondLbChannel> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(MatError::InvalidInput(
            "diamond_lb: epsilon in [0,1]".into(),
        ));
    }
    let d_in = n.superop().d_in();
    let d_out = n.superop().d_out();
    let probe = haar_state(d_in, rng);
    let n_phi = n.superop().apply(&probe.projector());

    // Degeneracy of the smallest eigenvalue is broken by a deterministic
    // 1e-12 Hermitian perturbation seeded from the channel itself.
    let mut pert_rng = ChaCha12Rng::seed_from_u64(choi_fingerprint(n.superop().choi()));
    let pert = CMatrix::from_fn(d_out, d_out, |_, _| complex_gaussian(&mut pert_rng))
        .symmetrize()
        .scale(Complex64::new(1e-12, 0.0));
    let eig = eigh(&n_phi.add(&pert));
    let output = PureState::normalized(eig.eigenvector(0)).expect("unit eigenvector");

    let phi_proj = probe.projector();
    let psi_proj = output.projector();
    let rest = CMatrix::identity(d_in).sub(&phi_proj);
    let mut basis = CMatrix::zeros(d_in, d_in);
    let sup = Superop::from_action(d_in, d_out, |i, j| {
        basis[(i, j)] = Complex64::new(1.0, 0.0);
        let direct = n
            .superop()
            .apply(&basis)
            .scale(Complex64::new(1.0 - epsilon, 0.0));
        let overlap = phi_proj.trace_product(&basis);
        let replace = psi_proj.scale(overlap * epsilon);
        let clipped = rest.matmul(&basis).matmul(&rest);
        let tail = n
            .superop()
            .apply(&clipped)
            .scale(Complex64::new(epsilon, 0.0));
        basis[(i, j)] = Complex64::new(0.0, 0.0);
        direct.add(&replace).add(&tail)
    });
    let channel = Channel::new(sup)?;
    Ok(DiamondLbChannel {
        channel,
        probe,
        output,
    })
}

fn choi_fingerprint(choi: &CMatrix) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for z in &choi.entries {
        for bits in [z.re.to_bits(), z.im.to_bits()] {
            h ^= bits;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
    }
    h
}

/// Member of the depolarizing lower-bound family: `M(X) = tr(X(I−Π))ρ₀ +
/// tr(XΠ)ρ₁` for a Haar random half-dimensional projection Π. Every
/// eigenvalue of the Choi matrix is `(1 ± ε)/(d_in·d_out)`, so the ACID
/// distance to the completely depolarizing channel is exactly ε.
#[derive(Debug, Clone)]
pub struct DepolLbChannel {
    pub channel: Channel,
    pub projection: CMatrix,
    pub epsilon: f64,
}

pub fn make_depol_lb_channel(
    d_in: usize,
    d_out: usize,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<DepolLbChannel> {
    if !d_in.is_multiple_of(2) || !d_out.is_multiple_of(2) || d_in == 0 || d_out == 0 {
        return Err(MatError::InvalidInput(
            "depol_lb: even dims required".into(),
        ));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(MatError::InvalidInput("depol_lb: epsilon in (0,1]".into()));
    }
    let projection = crate::haar::random_projection(d_in, d_in / 2, rng);
    let half = d_out / 2;
    let scale = 1.0 / d_out as f64;
    let rho0 = CMatrix::from_fn(d_out, d_out, |i, j| {
        if i != j {
            Complex64::new(0.0, 0.0)
        } else if i < half {
            Complex64::new((1.0 + epsilon) * scale, 0.0)
        } else {
            Complex64::new((1.0 - epsilon) * scale, 0.0)
        }
    });
    let rho1 = CMatrix::from_fn(d_out, d_out, |i, j| {
        if i != j {
            Complex64::new(0.0, 0.0)
        } else if i < half {
            Complex64::new((1.0 - epsilon) * scale, 0.0)
        } else {
            Complex64::new((1.0 + epsilon) * scale, 0.0)
        }
    });
    let comp = CMatrix::identity(d_in).sub(&projection).transpose();
    let proj_t = projection.transpose();
    let choi = rho0
        .kron(&comp)
        .add(&rho1.kron(&proj_t))
        .scale(Complex64::new(1.0 / d_in as f64, 0.0));
    let channel = Channel::new(Superop { d_in, d_out, choi })?;
    Ok(DepolLbChannel {
        channel,
        projection,
        epsilon,
    })
}

// --- JSON interchange format ---

#[derive(Serialize, Deserialize)]
struct ChannelJson {
    d_in: usize,
    d_out: usize,
    /// Row-major Choi matrix entries as `[re, im]` pairs, trace-1 convention.
    choi: Vec<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    provenance: Option<serde_json::Value>,
}

pub fn channel_to_json(channel: &Channel, provenance: Option<serde_json::Value>) -> String {
    let sup = channel.superop();
    let side = sup.d_in() * sup.d_out();
    let choi = (0..side)
        .map(|r| {
            (0..side)
                .map(|c| {
                    let z = sup.choi()[(r, c)];
                    [z.re, z.im]
                })
                .collect()
        })
        .collect();
    let rec = ChannelJson {
        d_in: sup.d_in(),
        d_out: sup.d_out(),
        choi,
        provenance,
    };
    serde_json::to_string_pretty(&rec).expect("serializable")
}

/// Parses the JSON channel format, validating CPTP at the 1e-6 tolerance.
pub fn channel_from_json(text: &str) -> Result<Channel> {
    let rec: ChannelJson = serde_json::from_str(text)
        .map_err(|e| MatError::InvalidInput(format!("channel JSON: {e}")))?;
    let side = rec.d_in * rec.d_out;
    if rec.choi.len() != side || rec.choi.iter().any(|row| row.len() != side) {
        return Err(MatError::DimMismatch("channel JSON: choi shape".into()));
    }
    let choi = CMatrix::from_fn(side, side, |r, c| {
        Complex64::new(rec.choi[r][c][0], rec.choi[r][c][1])
    });
    let sup = Superop::from_choi(rec.d_in, rec.d_out, choi)?;
    Channel::with_tol(sup, CPTP_TOL_JSON)
}
