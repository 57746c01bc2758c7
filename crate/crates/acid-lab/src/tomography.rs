//! Desk-scale channel tomography in ACID distance: linear-inversion Choi
//! reconstruction from an informationally complete design, followed by
//! Dykstra-corrected alternating projection onto the channel set.
//!
//! The input design is the single-register frame `{|i⟩, (|i⟩+|j⟩)/√2,
//! (|i⟩+i|j⟩)/√2}`; measurement settings mirror it as projective bases on
//! the output register. Post-processing projects in Frobenius norm; the
//! metric change to the trace norm is accounted for by a `√(d_in·d_out)`
//! factor in the reported error bound.

use crate::channels::{Channel, Superop};
use crate::haar::SeededStream;
use crate::matcore::{
    eigh, partial_trace, trace_norm, CMatrix, HermMatrix, Keep, MatError, Result,
};
use crate::quantum::{born_dist, Povm, PureState};
use crate::testers::multinomial_counts;
use num_complex::Complex64;
use serde::Serialize;

/// Pure states `{|i⟩} ∪ {(|i⟩+|j⟩)/√2} ∪ {(|i⟩+i|j⟩)/√2}`, which span the
/// Hermitian matrices on `C^d`.
pub fn frame_states(d: usize) -> Vec<PureState> {
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        out.push(PureState::basis_state(d, i));
    }
    let inv = 1.0 / 2f64.sqrt();
    for i in 0..d {
        for j in (i + 1)..d {
            let mut amps = vec![Complex64::new(0.0, 0.0); d];
            amps[i] = Complex64::new(inv, 0.0);
            amps[j] = Complex64::new(inv, 0.0);
            out.push(PureState::new(amps).expect("unit"));
            let mut amps = vec![Complex64::new(0.0, 0.0); d];
            amps[i] = Complex64::new(inv, 0.0);
            amps[j] = Complex64::new(0.0, inv);
            out.push(PureState::new(amps).expect("unit"));
        }
    }
    out
}

/// Projective measurement settings whose effects span the Hermitian
/// matrices on `C^d`: the standard basis plus, for each pair `(i, j)`, the
/// bases containing `(|i⟩±|j⟩)/√2` and `(|i⟩±i|j⟩)/√2`.
pub fn frame_settings(d: usize) -> Vec<Povm> {
    let mut out = vec![Povm::computational(d)];
    let inv = 1.0 / 2f64.sqrt();
    for i in 0..d {
        for j in (i + 1)..d {
            for imag in [false, true] {
                let u = CMatrix::from_fn(d, d, |r, c| {
                    let one = Complex64::new(1.0, 0.0);
                    let phase = if imag { Complex64::new(0.0, 1.0) } else { one };
                    if c == i {
                        if r == i {
                            Complex64::new(inv, 0.0)
                        } else if r == j {
                            phase * inv
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    } else if c == j {
                        if r == i {
                            Complex64::new(inv, 0.0)
                        } else if r == j {
                            -phase * inv
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    } else if r == c {
                        one
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                });
                out.push(Povm::basis_measurement(&u));
            }
        }
    }
    out
}

/// Orthonormal Hermitian basis of `C^{n×n}` under `tr(AB)`.
fn herm_basis(n: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut e = CMatrix::zeros(n, n);
        e[(i, i)] = Complex64::new(1.0, 0.0);
        out.push(e);
    }
    let inv = 1.0 / 2f64.sqrt();
    for i in 0..n {
        for j in (i + 1)..n {
            let mut re = CMatrix::zeros(n, n);
            re[(i, j)] = Complex64::new(inv, 0.0);
            re[(j, i)] = Complex64::new(inv, 0.0);
            out.push(re);
            let mut im = CMatrix::zeros(n, n);
            im[(i, j)] = Complex64::new(0.0, -inv);
            im[(j, i)] = Complex64::new(0.0, inv);
            out.push(im);
        }
    }
    out
}

/// Solves the normal equations `AᵀA x = Aᵀ b` by Gaussian elimination.
fn solve_normal_equations(a: &[Vec<f64>], b: &[f64], unknowns: usize) -> Result<Vec<f64>> {
    let mut ata = vec![vec![0.0f64; unknowns]; unknowns];
    let mut atb = vec![0.0f64; unknowns];
    for (row, &rhs) in a.iter().zip(b) {
        for i in 0..unknowns {
            if row[i] == 0.0 {
                continue;
            }
            atb[i] += row[i] * rhs;
            for j in i..unknowns {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..unknowns {
        for j in 0..i {
            ata[i][j] = ata[j][i];
        }
    }
    let n = unknowns;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| ata[r1][col].abs().partial_cmp(&ata[r2][col].abs()).unwrap())
            .unwrap();
        if ata[pivot_row][col].abs() < 1e-10 {
            return Err(MatError::InvalidInput(
                "reconstruct_choi: singular design matrix".into(),
            ));
        }
        ata.swap(col, pivot_row);
        atb.swap(col, pivot_row);
        let pivot = ata[col][col];
        for r in (col + 1)..n {
            let f = ata[r][col] / pivot;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                ata[r][c] -= f * ata[col][c];
            }
            atb[r] -= f * atb[col];
        }
    }
    let mut x = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut acc = atb[i];
        for j in (i + 1)..n {
            acc -= ata[i][j] * x[j];
        }
        x[i] = acc / ata[i][i];
    }
    Ok(x)
}

/// Linear-inversion estimate of the Choi matrix of `m`.
///
/// `shots` is the per-setting shot count; `None` replaces sampling with the
/// exact Born probabilities (the infinite-shot limit). The estimator is
/// unbiased: its expectation is `J_M`, and the ℓ2 error shrinks as
/// `shots^{-1/2}`.
pub fn reconstruct_choi(
    m: &Channel,
    shots: Option<u64>,
    stream: &SeededStream,
    stream_index: u64,
) -> Result<HermMatrix> {
    if shots == Some(0) {
        return Err(MatError::InvalidInput(
            "reconstruct_choi: shots >= 1".into(),
        ));
    }
    let d_in = m.superop().d_in();
    let d_out = m.superop().d_out();
    let side = d_in * d_out;
    let inputs = frame_states(d_in);
    let settings = frame_settings(d_out);
    let basis = herm_basis(side);
    let mut rng = stream.rng(stream_index);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for psi in &inputs {
        let rho_in = psi.density();
        let out_state = m.apply_density(&rho_in);
        let psi_t = psi.projector().transpose();
        for povm in &settings {
            let dist = born_dist(povm, &out_state)?;
            let observed: Vec<f64> = match shots {
                None => dist.clone(),
                Some(s) => multinomial_counts(s, &dist, &mut rng)
                    .iter()
                    .map(|&c| c as f64 / s as f64)
                    .collect(),
            };
            for (k, effect) in povm.effects().iter().enumerate() {
                // p = d_in · tr(J · (P ⊗ ψᵀ)).
                let functional = effect.kron(&psi_t).scale(Complex64::new(d_in as f64, 0.0));
                let row: Vec<f64> = basis
                    .iter()
                    .map(|bm| functional.trace_product(bm).re)
                    .collect();
                rows.push(row);
                rhs.push(observed[k]);
            }
        }
    }
    let coeffs = solve_normal_equations(&rows, &rhs, side * side)?;
    let mut est = CMatrix::zeros(side, side);
    for (c, bm) in coeffs.iter().zip(&basis) {
        est = est.add(&bm.scale(Complex64::new(*c, 0.0)));
    }
    Ok(HermMatrix::symmetrized(est))
}

/// Result of the CPTP projection.
#[derive(Debug, Clone, Serialize)]
pub struct CptpProjection {
    /// Frobenius distance moved by the projection.
    pub frobenius_gap: f64,
    pub iterations: u64,
    pub final_step: f64,
}

fn project_tp(y: &CMatrix, d_in: usize, d_out: usize) -> CMatrix {
    let reduced = partial_trace(y, Keep::Second, d_out, d_in).expect("choi dims");
    let target = CMatrix::identity(d_in).scale(Complex64::new(1.0 / d_in as f64, 0.0));
    let delta = reduced.sub(&target);
    let correction = CMatrix::identity(d_out)
        .kron(&delta)
        .scale(Complex64::new(1.0 / d_out as f64, 0.0));
    y.sub(&correction)
}

fn project_psd(y: &CMatrix) -> CMatrix {
    eigh(y).apply_spectral(|l| l.max(0.0))
}

const DYKSTRA_TOL: f64 = 1e-9;
const DYKSTRA_MAX_ITERS: u64 = 20_000;

/// Metric (Frobenius) projection of a Hermitian matrix onto the set of
/// channel Choi matrices, by Dykstra-corrected alternating projections onto
/// the PSD cone and the trace-preserving affine subspace.
pub fn project_to_cptp(
    x: &HermMatrix,
    d_in: usize,
    d_out: usize,
) -> Result<(Channel, CptpProjection)> {
    let side = d_in * d_out;
    if x.dim() != side {
        return Err(MatError::DimMismatch("project_to_cptp: side".into()));
    }
    let target = x.as_matrix().clone();
    let mut iterate = target.clone();
    let mut cone_correction = CMatrix::zeros(side, side);
    let mut step = f64::INFINITY;
    let mut iters = 0;
    while iters < DYKSTRA_MAX_ITERS {
        iters += 1;
        let cone_input = iterate.add(&cone_correction);
        let cone_output = project_psd(&cone_input);
        cone_correction = cone_input.sub(&cone_output);
        let next = project_tp(&cone_output, d_in, d_out);
        step = next.sub(&iterate).frobenius_norm();
        iterate = next;
        if step < DYKSTRA_TOL {
            break;
        }
    }
    if step >= DYKSTRA_TOL {
        return Err(MatError::NumericalFailure(format!(
            "project_to_cptp: no convergence after {DYKSTRA_MAX_ITERS} iterations (last step {step})"
        )));
    }
    // The iterate is TP-exact; polish residual negativity and validate.
    let polished = project_tp(&project_psd(&iterate), d_in, d_out).symmetrize();
    let sup = Superop::from_choi(d_in, d_out, polished)?;
    let channel = Channel::with_tol(sup, 1e-7)?;
    let gap = channel.superop().choi().sub(&target).frobenius_norm();
    Ok((
        channel,
        CptpProjection {
            frobenius_gap: gap,
            iterations: iters,
            final_step: step,
        },
    ))
}

/// One channel-tomography run: reconstruct, project, and report the error
/// chain `‖J_M − Ĵ‖₁` plus the projection gap scaled by `√(d_in·d_out)`.
#[derive(Debug, Clone, Serialize)]
pub struct TomographyRun {
    pub shots_per_setting: Option<u64>,
    pub achieved_acid_error: f64,
    /// `2‖J_M − Ĵ‖₁ + 2√(d_in·d_out)·gap`, the triangle-inequality bound.
    pub reported_error_bound: f64,
    pub reconstruction_trace_dist: f64,
    pub projection: CptpProjection,
    pub queries_used: u64,
}

pub fn tomography_run(
    m: &Channel,
    shots: Option<u64>,
    stream: &SeededStream,
    stream_index: u64,
) -> Result<(Channel, TomographyRun)> {
    let d_in = m.superop().d_in();
    let d_out = m.superop().d_out();
    let est = reconstruct_choi(m, shots, stream, stream_index)?;
    let rec_dist = trace_norm(&est.as_matrix().sub(m.superop().choi()));
    let (channel, projection) = project_to_cptp(&est, d_in, d_out)?;
    let achieved = trace_norm(&channel.superop().choi().sub(m.superop().choi()));
    let scale = ((d_in * d_out) as f64).sqrt();
    let bound = 2.0 * rec_dist + 2.0 * scale * projection.frobenius_gap;
    let settings = frame_settings(d_out).len() as u64 * frame_states(d_in).len() as u64;
    Ok((
        channel,
        TomographyRun {
            shots_per_setting: shots,
            achieved_acid_error: achieved,
            reported_error_bound: bound,
            reconstruction_trace_dist: rec_dist,
            projection,
            queries_used: shots.map_or(0, |s| s * settings),
        },
    ))
}

/// Shot budget found by doubling search: a budget is accepted once
/// `probe_trials` consecutive probe runs all meet the target ACID error.
#[derive(Debug, Clone, Serialize)]
pub struct TomographyCalibration {
    pub shots_per_setting: u64,
    pub probe_trials: u64,
    pub doublings: u64,
}

pub fn calibrate_shot_budget(
    m: &Channel,
    eps_target: f64,
    probe_trials: u64,
    stream: &SeededStream,
) -> Result<TomographyCalibration> {
    if !(0.0..1.0).contains(&eps_target) || eps_target == 0.0 {
        return Err(MatError::InvalidInput(
            "calibrate_shot_budget: eps in (0,1)".into(),
        ));
    }
    let mut shots = 64u64;
    let mut doublings = 0u64;
    loop {
        let ok = (0..probe_trials).all(|t| {
            tomography_run(m, Some(shots), stream, (doublings << 32) | t)
                .map(|(_, run)| run.achieved_acid_error <= eps_target)
                .unwrap_or(false)
        });
        if ok {
            return Ok(TomographyCalibration {
                shots_per_setting: shots,
                probe_trials,
                doublings,
            });
        }
        shots *= 2;
        doublings += 1;
        if shots > (1 << 22) {
            return Err(MatError::Budget(
                "calibrate_shot_budget: budget cap reached".into(),
            ));
        }
    }
}

/// Exports a reconstructed channel in the interchange JSON format with a
/// provenance block.
pub fn export_reconstruction(channel: &Channel, run: &TomographyRun, seed: u64) -> String {
    let provenance = serde_json::json!({
        "shots_per_setting": run.shots_per_setting,
        "seed": seed,
        "reconstruction_trace_dist": run.reconstruction_trace_dist,
        "projection_frobenius_gap": run.projection.frobenius_gap,
        "reported_error_bound": run.reported_error_bound,
    });
    crate::channels::channel_to_json(channel, Some(provenance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{channel_from_json, transpose_superop};
    use rand::Rng;

    fn stream() -> SeededStream {
        SeededStream::new(31337)
    }

    fn random_channel(d_in: usize, d_out: usize, rank: usize, rng: &mut impl Rng) -> Channel {
        Channel::haar_random(d_in, d_out, rank, rng).unwrap()
    }

    #[test]
    fn frame_is_informationally_complete() {
        for d in [2usize, 3] {
            assert_eq!(frame_states(d).len(), d * d);
            assert_eq!(frame_settings(d).len(), 1 + d * (d - 1));
        }
    }

    #[test]
    fn exact_mode_recovers_choi() {
        let mut rng = stream().rng(0);
        for (d_in, d_out) in [(2usize, 2usize), (2, 3), (3, 2)] {
            let ch = random_channel(d_in, d_out, 2, &mut rng);
            let est = reconstruct_choi(&ch, None, &stream(), 0).unwrap();
            let err = est.as_matrix().sub(ch.superop().choi()).max_abs();
            assert!(err < 1e-8, "({d_in},{d_out}): {err}");
        }
    }

    #[test]
    fn sampled_mode_error_shrinks() {
        // shots^{-1/2} scaling: 16x more shots cuts the mean error by ~4;
        // average over repetitions to suppress realization noise.
        let ch = Channel::identity(2);
        let reps = 24u64;
        let mut errs = Vec::new();
        for (i, shots) in [256u64, 4096, 65536].iter().enumerate() {
            let mean: f64 = (0..reps)
                .map(|r| {
                    let est = reconstruct_choi(&ch, Some(*shots), &stream(), (i as u64) << 8 | r)
                        .unwrap();
                    est.as_matrix().sub(ch.superop().choi()).frobenius_norm()
                })
                .sum::<f64>()
                / reps as f64;
            errs.push(mean);
        }
        assert!(errs[1] < errs[0] * 0.45, "{errs:?}");
        assert!(errs[2] < errs[1] * 0.45, "{errs:?}");
        // Identity at 10^4 shots per setting: trace error well below 0.2.
        let est = reconstruct_choi(&ch, Some(10_000), &stream(), 9).unwrap();
        assert!(trace_norm(&est.as_matrix().sub(ch.superop().choi())) <= 0.2);
    }

    #[test]
    fn sampled_mode_is_unbiased() {
        // Mean of many independent low-shot reconstructions approaches J_M.
        let ch = Channel::depolarizing(2, 2);
        let reps = 400;
        let mut mean = CMatrix::zeros(4, 4);
        for i in 0..reps {
            let est = reconstruct_choi(&ch, Some(64), &stream(), 100 + i).unwrap();
            mean = mean.add(est.as_matrix());
        }
        mean = mean.scale(Complex64::new(1.0 / reps as f64, 0.0));
        assert!(mean.sub(ch.superop().choi()).max_abs() < 0.03);
    }

    #[test]
    fn trace_channel_is_trivial() {
        // d_out = 1: the only channel is the trace, J = I/d_in.
        let ch = Channel::depolarizing(3, 1);
        let est = reconstruct_choi(&ch, None, &stream(), 0).unwrap();
        let expect = CMatrix::identity(3).scale(Complex64::new(1.0 / 3.0, 0.0));
        assert!(est.as_matrix().sub(&expect).max_abs() < 1e-8);
    }

    #[test]
    fn projection_fixes_valid_choi() {
        let mut rng = stream().rng(1);
        let ch = random_channel(2, 2, 2, &mut rng);
        let herm = HermMatrix::symmetrized(ch.superop().choi().clone());
        let (out, proj) = project_to_cptp(&herm, 2, 2).unwrap();
        assert!(
            out.superop().choi().sub(ch.superop().choi()).max_abs() < 1e-8,
            "gap {}",
            proj.frobenius_gap
        );
    }

    #[test]
    fn projection_of_noisy_choi_stays_close() {
        let mut rng = stream().rng(2);
        let ch = random_channel(2, 2, 2, &mut rng);
        // Traceless Hermitian noise of Frobenius scale 0.01.
        let noise = crate::haar::ginibre(4, 4, &mut rng).symmetrize();
        let noise = noise.sub(&CMatrix::identity(4).scale(noise.trace() * 0.25));
        let noise = noise.scale(Complex64::new(0.01 / noise.frobenius_norm(), 0.0));
        let x = HermMatrix::symmetrized(ch.superop().choi().add(&noise));
        let (out, _) = project_to_cptp(&x, 2, 2).unwrap();
        assert!(out.superop().validate_cptp().is_cp);
        let moved = out
            .superop()
            .choi()
            .sub(ch.superop().choi())
            .frobenius_norm();
        assert!(moved <= 0.03, "moved {moved}");
    }

    #[test]
    fn projection_moves_transpose_choi() {
        // SWAP/d is the Choi matrix of the transpose map, which is not CP;
        // the projection must move it and produce a valid channel.
        let t = transpose_superop(2);
        let herm = HermMatrix::symmetrized(t.choi().clone());
        let (out, proj) = project_to_cptp(&herm, 2, 2).unwrap();
        let report = out.superop().validate_cptp();
        assert!(report.is_cp && report.is_tp);
        assert!(proj.frobenius_gap > 0.1);
    }

    #[test]
    fn projection_matches_penalty_oracle() {
        // Brute-force metric projection: accelerated gradient descent (with
        // adaptive restart) on a penalized dense parameterization, over an
        // increasing penalty schedule and multiple restarts. The objective
        // is convex for each fixed μ, so the ladder converges to the metric
        // projection as μ grows.
        fn penalty_projection(x: &CMatrix, d_in: usize, d_out: usize) -> CMatrix {
            let side = d_in * d_out;
            let target_tp = CMatrix::identity(d_in).scale(Complex64::new(1.0 / d_in as f64, 0.0));
            let objective = |y: &CMatrix, mu: f64| -> (f64, CMatrix) {
                let neg = eigh(y).apply_spectral(|l| l.min(0.0));
                let reduced = partial_trace(y, Keep::Second, d_out, d_in).unwrap();
                let tp_res = reduced.sub(&target_tp);
                let obj = y.sub(x).frobenius_norm().powi(2)
                    + mu * (neg.frobenius_norm().powi(2) + tp_res.frobenius_norm().powi(2));
                let grad = y
                    .sub(x)
                    .scale(Complex64::new(2.0, 0.0))
                    .add(&neg.scale(Complex64::new(2.0 * mu, 0.0)))
                    .add(
                        &CMatrix::identity(d_out)
                            .kron(&tp_res)
                            .scale(Complex64::new(2.0 * mu, 0.0)),
                    );
                (obj, grad)
            };
            let stream = SeededStream::new(4242);
            let mut best: Option<(f64, CMatrix)> = None;
            for restart in 0..3u64 {
                let mut y = if restart == 0 {
                    x.clone()
                } else {
                    let mut rng = stream.rng(restart);
                    crate::haar::ginibre(side, side, &mut rng)
                        .symmetrize()
                        .scale(Complex64::new(0.3, 0.0))
                        .add(x)
                };
                for mu in [1e2, 1e4, 1e6, 3e7] {
                    let lip = 2.0 + 2.0 * mu * (1.0 + d_out as f64);
                    let step = 1.0 / lip;
                    let mut momentum = y.clone();
                    let mut t_prev = 1.0f64;
                    let (mut obj_prev, _) = objective(&y, mu);
                    for _ in 0..80_000 {
                        let (_, grad) = objective(&momentum, mu);
                        let y_next = momentum.sub(&grad.scale(Complex64::new(step, 0.0)));
                        let (obj_next, gcheck) = objective(&y_next, mu);
                        if obj_next > obj_prev {
                            // Adaptive restart: drop the momentum.
                            momentum = y.clone();
                            t_prev = 1.0;
                            let (_, g) = objective(&momentum, mu);
                            let fallback = momentum.sub(&g.scale(Complex64::new(step, 0.0)));
                            let (obj_fb, _) = objective(&fallback, mu);
                            if obj_fb >= obj_prev {
                                break;
                            }
                            y = fallback.clone();
                            momentum = fallback;
                            obj_prev = obj_fb;
                            continue;
                        }
                        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_prev * t_prev).sqrt());
                        let beta = (t_prev - 1.0) / t_next;
                        momentum = y_next.add(&y_next.sub(&y).scale(Complex64::new(beta, 0.0)));
                        y = y_next;
                        t_prev = t_next;
                        obj_prev = obj_next;
                        if gcheck.frobenius_norm() < 1e-12 {
                            break;
                        }
                    }
                }
                let dist = y.sub(x).frobenius_norm();
                if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                    best = Some((dist, y));
                }
            }
            best.unwrap().1
        }

        let mut rng = stream().rng(3);
        let ch = random_channel(2, 2, 2, &mut rng);
        let noise = crate::haar::ginibre(4, 4, &mut rng)
            .symmetrize()
            .scale(Complex64::new(0.05, 0.0));
        for x in [
            ch.superop().choi().add(&noise),
            transpose_superop(2).choi().clone(),
        ] {
            let herm = HermMatrix::symmetrized(x.clone());
            let (dykstra, _) = project_to_cptp(&herm, 2, 2).unwrap();
            let oracle = penalty_projection(herm.as_matrix(), 2, 2);
            let gap = dykstra.superop().choi().sub(&oracle).frobenius_norm();
            assert!(gap < 1e-7, "projection mismatch {gap}");
        }
    }

    #[test]
    fn tomography_exact_mode() {
        let mut rng = stream().rng(4);
        for ch in [
            Channel::identity(2),
            Channel::depolarizing(3, 3),
            random_channel(3, 2, 2, &mut rng),
        ] {
            let (out, run) = tomography_run(&ch, None, &stream(), 0).unwrap();
            assert!(
                run.achieved_acid_error < 1e-6,
                "{}",
                run.achieved_acid_error
            );
            assert!(out.superop().validate_cptp().is_cp);
            // Triangle-inequality chain holds per run.
            assert!(run.achieved_acid_error <= run.reported_error_bound + 1e-9);
        }
    }

    #[test]
    fn tomography_sampled_meets_target() {
        let ch = Channel::identity(2);
        let cal = calibrate_shot_budget(&ch, 0.25, 4, &stream()).unwrap();
        let trials = 30u64;
        let hits = (0..trials)
            .filter(|&t| {
                let (_, run) =
                    tomography_run(&ch, Some(cal.shots_per_setting), &stream(), 1000 + t).unwrap();
                assert!(run.achieved_acid_error <= run.reported_error_bound + 1e-9);
                run.achieved_acid_error <= 0.25
            })
            .count() as u64;
        assert!(hits * 3 >= trials * 2, "{hits}/{trials}");
    }

    #[test]
    fn export_includes_provenance() {
        let ch = Channel::identity(2);
        let (out, run) = tomography_run(&ch, Some(512), &stream(), 7).unwrap();
        let text = export_reconstruction(&out, &run, stream().seed());
        assert!(text.contains("provenance"));
        assert!(text.contains("shots_per_setting"));
        let back = channel_from_json(&text).unwrap();
        assert!(back.superop().validate_cptp().is_tp);
    }
}
