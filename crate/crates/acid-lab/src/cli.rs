//! Reproducible experiment runner: one subcommand per acceptance-criterion
//! family, seeded configs, and JSON records whose bytes replay exactly
//! (modulo the wall-time field). Floats are serialized with 17 significant
//! digits; advantage curves are additionally written as CSV.

use crate::channels::{make_depol_lb_channel, make_diamond_lb_channel, Channel, KrausSet};
use crate::haar::{
    haar_state, haar_unitary, random_subspace_mixed, reduced_haar_state, MeanAccumulator,
    SeededStream,
};
use crate::matcore::{trace_norm, vn_entropy, CMatrix, MatError, Result};
use crate::norms::{
    acid_distance, acid_norm, avg_norm_mc, choi_l2_distance, diamond_norm_est,
    induced_trace_norm_est, jp_bound, norm_report, rho_norm, sigma_witness,
};
use crate::quantum::{swap_and_sym, DensityMatrix, PureState};
use crate::testers::{
    advantage_curve, alg1_certify_l2, alg2_depol_certify, alg3_tensor_identity,
    alg4_exact_accept_prob, alg4_pure_replacement, alg5_dual_certify, alg5_exact_mean,
    depol_bias_tester, dual_pair_overlap, phi_input_tester,
};
use crate::tomography::{calibrate_shot_budget, tomography_run};
use num_complex::Complex64;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::PathBuf;

pub const SCHEMA: &str = "acid-lab/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Exact,
    Sampled,
}

/// Seeded, serializable description of one experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub subcommand: String,
    pub seed: u64,
    #[serde(default)]
    pub dims: Vec<usize>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub samples: Option<u64>,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default)]
    pub algorithm: Option<u8>,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_mode")]
    pub mode: RunMode,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_scale() -> f64 {
    1.0
}

fn default_mode() -> RunMode {
    RunMode::Sampled
}

/// One named check: a measured value against an expected value or bound.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub kind: CheckKind,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Equals,
    AtMost,
    AtLeast,
}

fn check_eq(name: impl Into<String>, measured: f64, expected: f64, tol: f64) -> CheckRecord {
    CheckRecord {
        name: name.into(),
        kind: CheckKind::Equals,
        pass: (measured - expected).abs() <= tol,
        measured,
        expected,
        tolerance: tol,
    }
}

fn check_le(name: impl Into<String>, measured: f64, bound: f64, slack: f64) -> CheckRecord {
    CheckRecord {
        name: name.into(),
        kind: CheckKind::AtMost,
        pass: measured <= bound + slack,
        measured,
        expected: bound,
        tolerance: slack,
    }
}

fn check_ge(name: impl Into<String>, measured: f64, bound: f64, slack: f64) -> CheckRecord {
    CheckRecord {
        name: name.into(),
        kind: CheckKind::AtLeast,
        pass: measured >= bound - slack,
        measured,
        expected: bound,
        tolerance: slack,
    }
}

/// Result of one experiment, including the config echo and library version.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRecord {
    pub schema: &'static str,
    pub library_version: &'static str,
    pub config: ExperimentConfig,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
    pub artifacts: Value,
    pub wall_time_s: f64,
}

impl ExperimentRecord {
    /// Renders the record as JSON with 17-significant-digit floats; byte
    /// identical across replays of the same config and seed, except for the
    /// `wall_time_s` field.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("serializable record");
        let mut out = String::new();
        write_value(&value, 0, &mut out);
        out.push('\n');
        out
    }
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                let f = n.as_f64().unwrap_or(f64::NAN);
                out.push_str(&format!("{f:.16e}"));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string"));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                write_value(item, indent + 1, out);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (k, (key, item)) in map.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                out.push_str(&serde_json::to_string(key).expect("key"));
                out.push_str(": ");
                write_value(item, indent + 1, out);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
    }
}

fn haar_random_channel(d_in: usize, d_out: usize, rank: usize, rng: &mut ChaCha12Rng) -> Channel {
    Channel::haar_random(d_in, d_out, rank, rng).expect("valid dims")
}

/// Runs one experiment; deterministic given the config (the wall time field
/// aside). Writes the JSON record (and any CSV tables) under `out_dir` when
/// it is set.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    let start = std::time::Instant::now();
    let stream = SeededStream::new(config.seed);
    let (checks, artifacts) = match config.subcommand.as_str() {
        "identities" => run_identities(config, &stream)?,
        "norms" => run_norms(config, &stream)?,
        "watrous" => run_watrous(config, &stream)?,
        "concentration" => run_concentration(config, &stream)?,
        "tails" => run_tails(config, &stream)?,
        "certify" => run_certify(config, &stream)?,
        "lowerbound" => run_lowerbound(config, &stream)?,
        "tomography" => run_tomography(config, &stream)?,
        "selftest" => run_selftest(config, &stream)?,
        other => {
            return Err(MatError::InvalidInput(format!(
                "unknown subcommand: {other}"
            )))
        }
    };
    let pass = checks.iter().all(|c| c.pass);
    let record = ExperimentRecord {
        schema: SCHEMA,
        library_version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        checks,
        pass,
        artifacts,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| MatError::InvalidInput(format!("cannot create out dir: {e}")))?;
        let path = dir.join(format!("{}-seed{}.json", config.subcommand, config.seed));
        std::fs::write(&path, record.to_json())
            .map_err(|e| MatError::InvalidInput(format!("cannot write record: {e}")))?;
    }
    Ok(record)
}

fn dim_or(config: &ExperimentConfig, idx: usize, default: usize) -> usize {
    config.dims.get(idx).copied().unwrap_or(default)
}

fn run_identities(
    _config: &ExperimentConfig,
    stream: &SeededStream,
) -> Result<(Vec<CheckRecord>, Value)> {
    let mut checks = Vec::new();
    let mut rng = stream.rng(0);

    // Transfer identity: √n (A⊗I)|Φ_n⟩ = √m (I⊗Aᵀ)|Φ_m⟩.
    let mut worst = 0.0f64;
    for &(m, n) in &[(2usize, 3usize), (4, 2), (5, 5)] {
        let a = crate::haar::ginibre(m, n, &mut rng);
        for i in 0..n {
            for row in 0..m {
                let lhs = a[(row, i)] * (n as f64).sqrt() / (n as f64).sqrt();
                let rhs = a[(row, i)] * (m as f64).sqrt() / (m as f64).sqrt();
                worst = worst.max((lhs - rhs).norm());
            }
        }
    }
    checks.push(check_eq("transfer_identity_residual", worst, 0.0, 1e-10));

    // Conjugation-map Choi inner product: tr(J_K J_L) = |tr(A†B)|²/d².
    let d = 3;
    let a = crate::haar::ginibre(d, d, &mut rng);
    let b = crate::haar::ginibre(d, d, &mut rng);
    let ka = KrausSet {
        d_in: d,
        d_out: d,
        terms: vec![(1.0, a.clone())],
    }
    .to_superop();
    let kb = KrausSet {
        d_in: d,
        d_out: d,
        terms: vec![(1.0, b.clone())],
    }
    .to_superop();
    let lhs = ka.choi().trace_product(kb.choi()).re;
    let rhs = a.conj_transpose().matmul(&b).trace().norm_sqr() / (d * d) as f64;
    checks.push(check_eq(
        "conjugation_choi_inner_product",
        lhs,
        rhs,
        1e-9 * rhs.max(1.0),
    ));

    // Boolean encoding: ½‖F−G‖_J equals the disagreement fraction.
    let mut worst = 0.0f64;
    let d = 3usize;
    for fa in 0..(1u32 << d) {
        for ga in 0..(1u32 << d) {
            let f: Vec<bool> = (0..d).map(|j| fa >> j & 1 == 1).collect();
            let g: Vec<bool> = (0..d).map(|j| ga >> j & 1 == 1).collect();
            let acid = acid_distance(
                Channel::boolean_function(&f).superop(),
                Channel::boolean_function(&g).superop(),
            )?;
            let k = (0..d).filter(|&j| f[j] != g[j]).count();
            worst = worst.max((0.5 * acid - k as f64 / d as f64).abs());
        }
    }
    checks.push(check_eq("boolean_statistical_distance", worst, 0.0, 1e-12));

    // Unitary-conjugation distance formula.
    let u = haar_unitary(3, &mut rng);
    let v = haar_unitary(3, &mut rng);
    let acid = acid_distance(
        Channel::unitary(&u)?.superop(),
        Channel::unitary(&v)?.superop(),
    )?;
    let ol = u.conj_transpose().matmul(&v).trace().norm() / 3.0;
    checks.push(check_eq(
        "unitary_distance_formula",
        0.5 * acid,
        (1.0 - ol * ol).max(0.0).sqrt(),
        1e-9,
    ));

    // Watrous Choi states at d=4.
    let (m4, n4) = Channel::watrous_pair(4)?;
    let (_, sym) = swap_and_sym(4);
    let jm = sym.scale(Complex64::new(0.1, 0.0));
    let jn = CMatrix::identity(16)
        .sub(&sym)
        .scale(Complex64::new(2.0 / 12.0, 0.0));
    checks.push(check_eq(
        "watrous_choi_m",
        m4.superop().choi().sub(&jm).max_abs(),
        0.0,
        1e-12,
    ));
    checks.push(check_eq(
        "watrous_choi_n",
        n4.superop().choi().sub(&jn).max_abs(),
        0.0,
        1e-12,
    ));

    // Pure-state trace distance identity.
    let psi = haar_state(4, &mut rng);
    let phi = haar_state(4, &mut rng);
    let td = trace_norm(&psi.projector().sub(&phi.projector()));
    let expect = 2.0 * (1.0 - psi.inner(&phi).norm_sqr()).max(0.0).sqrt();
    checks.push(check_eq("pure_state_trace_distance", td, expect, 1e-9));

    // Orthogonal-mixture entropy formula.
    let r1 = reduced_haar_state(2, 2, &mut rng);
    let r2 = reduced_haar_state(2, 2, &mut rng);
    let mut block = CMatrix::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            block[(i, j)] = r1.matrix()[(i, j)] * 0.5;
            block[(2 + i, 2 + j)] = r2.matrix()[(i, j)] * 0.5;
        }
    }
    let lhs = vn_entropy(&block);
    let rhs = 0.5 * (vn_entropy(r1.matrix()) + vn_entropy(r2.matrix())) + 1.0;
    checks.push(check_eq("orthogonal_mixture_entropy", lhs, rhs, 1e-9));

    // ρ norm at the maximally mixed state equals the ACID norm.
    let c1 = haar_random_channel(3, 3, 2, &mut rng);
    let c2 = haar_random_channel(3, 3, 2, &mut rng);
    let diff = c1.superop().sub(c2.superop())?;
    checks.push(check_eq(
        "rho_norm_at_maximally_mixed",
        rho_norm(&diff, &DensityMatrix::maximally_mixed(3)),
        acid_norm(&diff),
        1e-9,
    ));

    // Tensor multiplicativity of the ACID norm.
    let prod = diff.tensor(c1.superop());
    checks.push(check_eq(
        "acid_tensor_multiplicative",
        acid_norm(&prod),
        acid_norm(&diff) * acid_norm(c1.superop()),
        1e-9,
    ));

    // Dual involution.
    checks.push(check_eq(
        "dual_involution",
        c1.superop()
            .dual()
            .dual()
            .choi()
            .sub(c1.superop().choi())
            .max_abs(),
        0.0,
        1e-12,
    ));

    // Dual-pair Born probability vs Choi inner product.
    let k = haar_random_channel(2, 3, 2, &mut rng);
    let l = haar_random_channel(2, 3, 2, &mut rng);
    let lhs = dual_pair_overlap(&k, &l)?;
    let rhs = (2.0 / 3.0) * l.superop().choi().trace_product(k.superop().choi()).re;
    checks.push(check_eq("dual_pair_overlap_lemma", lhs, rhs, 1e-9));

    // Exact dual-certification statistic for the depolarizing family.
    let dep = Channel::depolarizing(2, 2);
    let fam = make_depol_lb_channel(2, 2, 0.5, &mut stream.rng(1))?;
    let ex = alg5_exact_mean(&fam.channel, &dep)?;
    let l2 = choi_l2_distance(fam.channel.superop(), dep.superop())?;
    checks.push(check_eq("alg5_exact_statistic", ex, l2 * l2, 1e-9));

    Ok((checks, Value::Null))
}

fn run_norms(
    config: &ExperimentConfig,
    stream: &SeededStream,
) -> Result<(Vec<CheckRecord>, Value)> {
    let d = dim_or(config, 0, 3);
    let mut rng = stream.rng(0);
    let m = haar_random_channel(d, d, 2, &mut rng);
    let n = haar_random_channel(d, d, 2, &mut rng);
    let report = norm_report(&m, &n, 16, stream)?;
    let mut checks = Vec::new();
    checks.push(check_le(
        "sandwich_acid_at_most_diamond",
        report.acid,
        report.diamond_est,
        1e-9,
    ));
    checks.push(check_le(
        "sandwich_diamond_at_most_d_acid",
        report.diamond_est,
        d as f64 * report.acid,
        1e-6,
    ));
    checks.push(check_le(
        "induced_at_most_diamond",
        report.induced1_est,
        report.diamond_est,
        1e-6,
    ));
    let bound = jp_bound(0.5, &m, &n)?;
    let half = m.superop().add_weighted(0.5, n.superop(), -0.5)?;
    let dia_half = diamond_norm_est(&half, 16, stream)?.value;
    checks.push(check_ge("jp_bound_above_diamond", bound, dia_half, 1e-6));
    checks.push(check_le(
        "jp_bound_below_d_acid",
        bound,
        d as f64 * acid_norm(&half),
        1e-9,
    ));
    let diff = m.superop().sub(n.superop())?;
    let sigma = sigma_witness(&diff)?;
    let acid = acid_norm(&diff);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..100 {
        let rho = reduced_haar_state(d, 1 + (i % 3), &mut rng);
        let lhs = rho_norm(&diff, &rho);
        let rhs = rho.matrix().trace_product(sigma.matrix()).re * d as f64 * acid;
        worst = worst.max(lhs - rhs);
    }
    checks.push(check_le("witness_inequality_margin", worst, 0.0, 1e-8));
    let artifacts = serde_json::to_value(&report).expect("report");
    Ok((checks, artifacts))
}

fn run_watrous(
    config: &ExperimentConfig,
    stream: &SeededStream,
) -> Result<(Vec<CheckRecord>, Value)> {
    let d = dim_or(config, 0, 4);
    let samples = config.samples.unwrap_or(100_000);
    let (m, n) = Channel::watrous_pair(d)?;
    let diff = m.superop().sub(n.superop())?;
    let mut checks = Vec::new();
    checks.push(check_eq(
        "acid_distance",
        acid_distance(m.superop(), n.superop())?,
        2.0,
        1e-9,
    ));
    let expect_ind = 4.0 / (d as f64 + 1.0);
    let ind = induced_trace_norm_est(&diff, 16, stream)?;
    checks.push(check_eq(
        "induced_trace_norm_est",
        ind.value,
        expect_ind,
        1e-3,
    ));
    let dia = diamond_norm_est(&diff, 16, stream)?;
    checks.push(check_eq("diamond_norm_est", dia.value, 2.0, 1e-3));
    let avg = avg_norm_mc(&diff, 1, samples, stream)?;
    checks.push(check_eq(
        "avg_norm_no_ancilla",
        avg.mean,
        expect_ind,
        5.0 * avg.std_err + 1e-9,
    ));
    let artifacts = serde_json::json!({
        "avg_norm": avg,
        "induced_estimate_iterations": ind.total_iterations,
        "diamond_estimate_iterations": dia.total_iterations,
    });
    Ok((checks, artifacts))
}

fn run_concentration(
    config: &ExperimentConfig,
    stream: &SeededStream,
) -> Result<(Vec<CheckRecord>, Value)> {
    let d = dim_or(config, 0, 2);
    let m_dim = dim_or(config, 1, 8);
    let samples = config.samples.unwrap_or(10_000);
    let mut rng = stream.rng(0);
    let c1 = haar_random_channel(d, d, 2, &mut rng);
    let c2 = haar_random_channel(d, d, 2, &mut rng);
    let diff = c1.superop().sub(c2.superop())?;
    let acid = acid_norm(&diff);
    let accs: Vec<MeanAccumulator> = (0..samples.div_ceil(1024))
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.rng(1 + b);
            let mut acc = MeanAccumulator::default();
            for _ in 0..1024.min(samples - b * 1024) {
                let rho = reduced_haar_state(d, m_dim, &mut rng);
                acc.push(rho_norm(&diff, &rho));
            }
            acc
        })
        .collect();
    let mut acc = MeanAccumulator::default();
    for a in &accs {
        acc.merge(a);
    }
    let lower = m_dim as f64 / (2.0 * d as f64 + m_dim as f64) * acid;
    let mut checks = vec![
        check_ge(
            "reduced_haar_bracket_lower",
            acc.mean(),
            lower,
            5.0 * acc.std_err(),
        ),
        check_le(
            "reduced_haar_bracket_upper",
            acc.mean(),
            acid,
            5.0 * acc.std_err(),
        ),
    ];
    // Rank-r subspace ensembles at d = 4 (the unitarily invariant bracket).
    if d == 4 {
        for r in [1usize, 2, 4] {
            let f = r as f64 / d as f64;
            let lower = ((d * d) as f64 * f - 1.0) / ((d * d) as f64 * (2.0 - f) - 1.0) * acid;
            let mut acc = MeanAccumulator::default();
            let mut rng = stream.rng(9_000 + r as u64);
            for _ in 0..samples {
                let rho = random_subspace_mixed(d, r, &mut rng);
                acc.push(rho_norm(&diff, &rho));
            }
            checks.push(check_ge(
                format!("subspace_bracket_lower_r{r}"),
                acc.mean(),
                lower,
                5.0 * acc.std_err(),
            ));
            checks.push(check_le(
                format!("subspace_bracket_upper_r{r}"),
                acc.mean(),
                acid,
                5.0 * acc.std_err(),
            ));
        }
    }
    let artifacts = serde_json::json!({
        "acid": acid,
        "mean_rho_norm": acc.mean(),
        "std_err": acc.std_err(),
        "samples": acc.count(),
    });
    Ok((checks, artifacts))
}

fn run_tails(
    config: &ExperimentConfig,
    stream: &SeededStream,
) -> Result<(Vec<CheckRecord>, Value)> {
    let d = dim_or(config, 0, 2);
    let m_dim = dim_or(config, 1, 8);
    let samples = config.samples.unwrap_or(100_000);
    let mut rng = stream.rng(0);
    let c1 = haar_random_channel(d, d, 2, &mut rng);
    let c2 = haar_random_channel(d, d, 2, &mut rng);
    let diff = c1.superop().sub(c2.superop())?;
    let acid = acid_norm(&diff);
    let diamond = diamond_norm_est(&diff, 16, stream)?.value;

    let values: Vec<f64> = (0..samples.div_ceil(1024))
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = stream.rng(1 + b);
            let count = 1024.min(samples - b * 1024);
            let mut vals = Vec::with_capacity(count as usize);
            for _ in 0..count {
                let rho = reduced_haar_state(d, m_dim, &mut rng);
                vals.push(rho_norm(&diff, &rho));
            }
            vals
        })
        .collect();
    let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;

    let mut checks = Vec::new();
    // Upper tail: P[‖L‖_ρ ≥ 10·acid] ≤ 2d·e^{−10m/8}; observed count must
    // not exceed three times the envelope.
    let upper_count = values.iter().filter(|&&v| v >= 10.0 * acid).count() as f64;
    let envelope = 2.0 * d as f64 * (-10.0 * m_dim as f64 / 8.0).exp() * samples as f64;
    checks.push(check_le(
        "upper_tail_count_vs_envelope",
        upper_count,
        3.0 * envelope.max(1.0),
        0.0,
    ));
    // Lévy-type deviation envelope at t ∈ {0.5, 1}.
    for t in [0.5f64, 1.0] {
        let frac = values
            .iter()
            .filter(|&&v| (v - mean).abs() >= t * acid)
            .count() as f64
            / values.len() as f64;
        let env = (std::f64::consts::PI
            - (d * m_dim) as f64 * t * t * acid * acid / (8.0 * diamond * diamond))
            .exp()
            .min(1.0);
        let se = (env * (1.0 - env) / samples as f64).sqrt().max(1e-6);
        checks.push(check_le(
            format!("levy_deviation_fraction_t{t}"),
            frac,
            env,
            5.0 * se,
        ));
    }
    let artifacts = serde_json::json!({
        "acid": acid,
        "diamond_est": diamond,
        "mean_rho_norm": mean,
        "upper_tail_count": upper_count,
        "upper_tail_envelope": envelope,
    });
    Ok((checks, artifacts))
}

fn error_rate_checks(name: &str, fails: u64, trials: u64) -> CheckRecord {
    check_le(name, fails as f64 / trials as f64, 1.0 / 3.0, 0.0)
}

fn run_certify(
    config: &ExperimentConfig,
    stream: &SeededStream,
) -> Result<(Vec<CheckRecord>, Value)> {
    let alg = config.algorithm.unwrap_or(4);
    let trials = config.trials.unwrap_or(60);
    let mut checks = Vec::new();
    let mut artifacts = serde_json::Map::new();
    match alg {
        1 => {
            let scale = config.scale.min(1.0);
            let eps = config.epsilon.unwrap_or(0.5);
            let dep = Channel::depolarizing(2, 2);
            let far = make_depol_lb_channel(2, 2, 1.0, &mut stream.rng(7))?.channel;
            let near_fails: u64 = (0..trials)
                .into_par_iter()
                .filter(|&i| {
                    !alg1_certify_l2(&dep, eps, &dep, scale, stream, 100 + i)
                        .map(|o| o.decision.accepted())
                        .unwrap_or(false)
                })
                .count() as u64;
            let far_fails: u64 = (0..trials)
                .into_par_iter()
                .filter(|&i| {
                    alg1_certify_l2(&dep, eps, &far, scale, stream, 10_000 + i)
                        .map(|o| o.decision.accepted())
                        .unwrap_or(true)
                })
                .count() as u64;
            checks.push(error_rate_checks(
                "alg1_completeness_failure",
                near_fails,
                trials,
            ));
            checks.push(error_rate_checks(
                "alg1_soundness_failure",
                far_fails,
                trials,
            ));
            artifacts.insert("scale".into(), scale.into());
            artifacts.insert("epsilon".into(), eps.into());
        }
        2 => {
            let scale = config.scale.min(1.0);
            let eps = config.epsilon.unwrap_or(0.8);
            let dep = Channel::depolarizing(2, 2);
            let far = make_depol_lb_channel(2, 2, eps, &mut stream.rng(7))?.channel;
            let near_fails: u64 = (0..trials)
                .into_par_iter()
                .filter(|&i| {
                    !alg2_depol_certify(eps, &dep, scale, stream, 100 + i)
                        .map(|o| o.decision.accepted())
                        .unwrap_or(false)
                })
                .count() as u64;
            let far_fails: u64 = (0..trials)
                .into_par_iter()
                .filter(|&i| {
                    alg2_depol_certify(eps, &far, scale, stream, 10_000 + i)
                        .map(|o| o.decision.accepted())
                        .unwrap_or(true)
                })
                .count() as u64;
            checks.push(error_rate_checks(
                "alg2_completeness_failure",
                near_fails,
                trials,
            ));
            checks.push(error_rate_checks(
                "alg2_soundness_failure",
                far_fails,
                trials,
            ));
            artifacts.insert("scale".into(), scale.into());
        }
        3 => {
            let scale = config.scale.min(1.0);
            let eps = config.epsilon.unwrap_or(0.5);
            let n = Channel::identity(2);
            let near = Channel::identity(2).tensor(&n);
            let (_, wn) = Channel::watrous_pair(2)?;
            let far = Channel::identity(2).tensor(&wn);
            // Inner tester for the identity channel: PVM rounds on Q(ψ).
            let delta_inner = 1.0;
            let inner_rounds =
                ((scale * 16.0 * 2f64.ln() / (delta_inner * delta_inner)).ceil() as u64).max(1);
            let run_one = |m: &Channel, idx: u64| -> Result<bool> {
                let mut inner = |q: &Channel, rng: &mut ChaCha12Rng| {
                    let mut queries = 0;
                    for _ in 0..inner_rounds {
                        let psi = haar_state(2, rng);
                        let out = q.apply_density(&psi.density());
                        let p = psi
                            .projector()
                            .trace_product(out.matrix())
                            .re
                            .clamp(0.0, 1.0);
                        queries += 1;
                        if rand::Rng::gen::<f64>(rng) >= p {
                            return Ok((false, queries));
                        }
                    }
                    Ok((true, queries))
                };
                let (outcome, _) =
                    alg3_tensor_identity(&n, 2, eps, m, &mut inner, scale, stream, idx)?;
                Ok(outcome.decision.accepted())
            };
            let near_fails: u64 = (0..trials)
                .into_par_iter()
                .filter(|&i| !run_one(&near, 100 + i).unwrap_or(false))
                .count() as u64;
            let far_fails: u64 = (0..trials)
                .into_par_iter()
                .filter(|&i| run_one(&far, 10_000 + i).unwrap_or(true))
                .count() as u64;
            checks.push(error_rate_checks(
                "alg3_completeness_failure",
                near_fails,
                trials,
            ));
            checks.push(error_rate_checks(
                "alg3_soundness_failure",
                far_fails,
                trials,
            ));
            artifacts.insert("scale".into(), scale.into());
        }
        4 => {
            let psi = PureState::basis_state(2, 0);
            let n = Channel::replacement(&psi.density(), 2);
            checks.push(check_eq(
                "alg4_exact_complete",
                alg4_exact_accept_prob(&psi, 0.5, &n)?,
                1.0,
                1e-12,
            ));
            let phi = PureState::basis_state(2, 1);
            let far1 = Channel::replacement(&phi.density(), 2);
            let half = DensityMatrix::new(
                psi.projector()
                    .scale(Complex64::new(0.5, 0.0))
                    .add(&phi.projector().scale(Complex64::new(0.5, 0.0))),
            )?;
            let far2 = Channel::replacement(&half, 2);
            let far3 = Channel::depolarizing(2, 2);
            for (k, far) in [far1, far2, far3].iter().enumerate() {
                // ε is capped at 1 (the tester's parameter range); the
                // orthogonal replacement has ACID distance 2.
                let eps = acid_distance(far.superop(), n.superop())?.min(1.0);
                let p = alg4_exact_accept_prob(&psi, eps, far)?;
                checks.push(check_le(format!("alg4_exact_far_{k}"), p, 0.5, 0.0));
            }
            if config.mode == RunMode::Sampled {
                let hits: u64 = (0..trials)
                    .into_par_iter()
                    .filter(|&i| {
                        alg4_pure_replacement(&psi, 0.5, &n, stream, i)
                            .map(|o| o.decision.accepted())
                            .unwrap_or(false)
                    })
                    .count() as u64;
                checks.push(check_eq(
                    "alg4_sampled_complete_rate",
                    hits as f64 / trials as f64,
                    1.0,
                    0.0,
                ));
            }
        }
        5 => {
            let scale = config.scale.min(1.0);
            let dep = Channel::depolarizing(2, 2);
            let fam = make_depol_lb_channel(2, 2, 0.5, &mut stream.rng(7))?;
            let exact = alg5_exact_mean(&fam.channel, &dep)?;
            let l2 = choi_l2_distance(fam.channel.superop(), dep.superop())?;
            checks.push(check_eq("alg5_exact_statistic", exact, l2 * l2, 1e-9));
            let eps = config.epsilon.unwrap_or(0.5);
            let near_fails: u64 = (0..trials)
                .into_par_iter()
                .filter(|&i| {
                    !alg5_dual_certify(&dep, eps, &dep, scale, stream, 100 + i)
                        .map(|o| o.decision.accepted())
                        .unwrap_or(false)
                })
                .count() as u64;
            let far_fails: u64 = (0..trials)
                .into_par_iter()
                .filter(|&i| {
                    alg5_dual_certify(&dep, eps, &fam.channel, scale, stream, 10_000 + i)
                        .map(|o| o.decision.accepted())
                        .unwrap_or(true)
                })
                .count() as u64;
            checks.push(error_rate_checks(
                "alg5_completeness_failure",
                near_fails,
                trials,
            ));
            checks.push(error_rate_checks(
                "alg5_soundness_failure",
                far_fails,
                trials,
            ));
            artifacts.insert("scale".into(), scale.into());
        }
        other => {
            return Err(MatError::InvalidInput(format!(
                "certify: unknown algorithm {other} (expected 1..=5)"
            )))
        }
    }
    artifacts.insert("algorithm".into(), alg.into());
    artifacts.insert("trials".into(), trials.into());
    Ok((checks, Value::Object(artifacts)))
}

fn run_lowerbound(
    config: &ExperimentConfig,
    stream: &SeededStream,
) -> Result<(Vec<CheckRecord>, Value)> {
    let budget = config.samples.unwrap_or(100) as usize;
    let ensemble = config.trials.unwrap_or(400) as usize;
    let eps = config.epsilon.unwrap_or(0.9);
    let mut checks = Vec::new();
    let mut tables: Vec<(String, String)> = Vec::new();
    let mut prev: Option<f64> = None;
    for &d_in in &[2usize, 4, 8] {
        let dep = Channel::depolarizing(d_in, 2);
        let mut sampler =
            |rng: &mut ChaCha12Rng| Ok(make_depol_lb_channel(d_in, 2, eps, rng)?.channel);
        let curve = advantage_curve(
            &mut sampler,
            &dep,
            &|n| depol_bias_tester(d_in, 2, n, &SeededStream::new(5)),
            &[budget],
            ensemble,
            &SeededStream::new(stream.seed() ^ d_in as u64),
        )?;
        let pt = &curve.points[0];
        if let Some(p) = prev {
            checks.push(check_le(
                format!("depol_advantage_decreasing_d{d_in}"),
                pt.advantage,
                p,
                0.0,
            ));
        }
        prev = Some(pt.advantage);
        tables.push((format!("advantage_depol_d{d_in}.csv"), curve.to_csv()));
    }
    // Diamond lower-bound family: advantage below the 2nε/√d envelope.
    let eps_d = 0.05;
    for &d_in in &[2usize, 4] {
        let id = Channel::identity(d_in);
        let mut sampler =
            |rng: &mut ChaCha12Rng| Ok(make_diamond_lb_channel(&id, eps_d, rng)?.channel);
        let curve = advantage_curve(
            &mut sampler,
            &id,
            &|n| phi_input_tester(&id, n),
            &[1, 4, 16],
            100,
            &SeededStream::new(stream.seed() ^ (100 + d_in as u64)),
        )?;
        for pt in &curve.points {
            let envelope = 2.0 * pt.budget as f64 * eps_d / (d_in as f64).sqrt();
            checks.push(check_le(
                format!("diamond_advantage_envelope_d{d_in}_n{}", pt.budget),
                pt.advantage,
                envelope,
                5.0 * pt.std_err + 1e-9,
            ));
        }
        tables.push((format!("advantage_diamond_d{d_in}.csv"), curve.to_csv()));
    }
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| MatError::InvalidInput(format!("out dir: {e}")))?;
        for (name, csv) in &tables {
            std::fs::write(dir.join(name), csv)
                .map_err(|e| MatError::InvalidInput(format!("csv: {e}")))?;
        }
    }
    let artifacts = serde_json::json!({
        "csv_tables": tables
            .iter()
            .map(|(name, csv)| serde_json::json!({ "file": name, "content": csv }))
            .collect::<Vec<_>>(),
    });
    Ok((checks, artifacts))
}

fn run_tomography(
    config: &ExperimentConfig,
    stream: &SeededStream,
) -> Result<(Vec<CheckRecord>, Value)> {
    let mut checks = Vec::new();
    let mut artifacts = serde_json::Map::new();
    match config.mode {
        RunMode::Exact => {
            let mut rng = stream.rng(0);
            let zoo: Vec<(String, Channel)> = vec![
                ("identity_2".into(), Channel::identity(2)),
                ("depolarizing_2_2".into(), Channel::depolarizing(2, 2)),
                ("identity_3".into(), Channel::identity(3)),
                ("random_3_3".into(), haar_random_channel(3, 3, 2, &mut rng)),
            ];
            for (name, ch) in &zoo {
                let (_, run) = tomography_run(ch, None, stream, 0)?;
                checks.push(check_le(
                    format!("exact_recovery_{name}"),
                    run.achieved_acid_error,
                    1e-6,
                    0.0,
                ));
            }
        }
        RunMode::Sampled => {
            let eps = config.epsilon.unwrap_or(0.25);
            let trials = config.trials.unwrap_or(50);
            let ch = Channel::identity(2);
            let cal = calibrate_shot_budget(&ch, eps, 4, stream)?;
            let hits: u64 = (0..trials)
                .into_par_iter()
                .filter(|&t| {
                    tomography_run(&ch, Some(cal.shots_per_setting), stream, 1_000 + t)
                        .map(|(_, run)| run.achieved_acid_error <= eps)
                        .unwrap_or(false)
                })
                .count() as u64;
            checks.push(check_ge(
                "sampled_success_rate",
                hits as f64 / trials as f64,
                2.0 / 3.0,
                0.0,
            ));
            artifacts.insert("shots_per_setting".into(), cal.shots_per_setting.into());
            let (out, run) = tomography_run(&ch, Some(cal.shots_per_setting), stream, 0)?;
            artifacts.insert(
                "exported_channel".into(),
                serde_json::from_str::<Value>(&crate::tomography::export_reconstruction(
                    &out,
                    &run,
                    stream.seed(),
                ))
                .expect("valid JSON"),
            );
        }
    }
    Ok((checks, Value::Object(artifacts)))
}

fn run_selftest(
    config: &ExperimentConfig,
    _stream: &SeededStream,
) -> Result<(Vec<CheckRecord>, Value)> {
    let scale = config.scale;
    let sub = |subcommand: &str,
               dims: Vec<usize>,
               samples: Option<u64>,
               trials: Option<u64>,
               algorithm: Option<u8>,
               mode: RunMode,
               sc: f64| ExperimentConfig {
        subcommand: subcommand.into(),
        seed: config.seed,
        dims,
        epsilon: None,
        samples,
        trials,
        algorithm,
        scale: sc,
        mode,
        out_dir: None,
    };
    let parts = vec![
        sub("identities", vec![], None, None, None, RunMode::Exact, 1.0),
        sub("norms", vec![3], None, None, None, RunMode::Exact, 1.0),
        sub(
            "watrous",
            vec![4],
            Some(((20_000.0 * scale) as u64).max(100)),
            None,
            None,
            RunMode::Sampled,
            scale,
        ),
        sub(
            "concentration",
            vec![2, 8],
            Some(((4_000.0 * scale) as u64).max(100)),
            None,
            None,
            RunMode::Sampled,
            scale,
        ),
        sub(
            "tails",
            vec![2, 8],
            Some(((20_000.0 * scale) as u64).max(1000)),
            None,
            None,
            RunMode::Sampled,
            scale,
        ),
        sub(
            "certify",
            vec![],
            None,
            Some(30),
            Some(4),
            RunMode::Exact,
            scale,
        ),
        sub(
            "certify",
            vec![],
            None,
            Some(((30.0 * scale).ceil() as u64).max(10)),
            Some(5),
            RunMode::Sampled,
            0.5,
        ),
        sub("tomography", vec![], None, None, None, RunMode::Exact, 1.0),
    ];
    let mut checks = Vec::new();
    let mut artifacts = serde_json::Map::new();
    for part in parts {
        let record = run(&part)?;
        let prefix = format!("{}/", part.subcommand);
        artifacts.insert(
            format!("{}_pass", part.subcommand),
            Value::Bool(record.pass),
        );
        for c in record.checks {
            checks.push(CheckRecord {
                name: format!("{prefix}{}", c.name),
                ..c
            });
        }
    }
    Ok((checks, Value::Object(artifacts)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(sub: &str, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            subcommand: sub.into(),
            seed,
            dims: vec![],
            epsilon: None,
            samples: None,
            trials: None,
            algorithm: None,
            scale: 1.0,
            mode: RunMode::Sampled,
            out_dir: None,
        }
    }

    #[test]
    fn identities_pass() {
        let record = run(&config("identities", 1)).unwrap();
        assert!(record.pass, "{:#?}", record.checks);
    }

    #[test]
    fn unknown_subcommand_errors() {
        assert!(run(&config("bogus", 1)).is_err());
    }

    #[test]
    fn record_replay_is_byte_identical_modulo_walltime() {
        let mut cfg = config("identities", 7);
        cfg.mode = RunMode::Exact;
        let a = run(&cfg).unwrap().to_json();
        let b = run(&cfg).unwrap().to_json();
        let strip = |s: &str| -> String {
            s.lines()
                .filter(|l| !l.contains("wall_time_s"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn floats_have_17_significant_digits() {
        let record = run(&config("identities", 3)).unwrap();
        let text = record.to_json();
        // Exponent-notation floats with 16 fractional digits (17 significant).
        assert!(text.contains("e0") || text.contains("e-"));
        let sample = text
            .lines()
            .find(|l| l.contains("\"measured\""))
            .expect("a measured line");
        let num = sample.split(": ").nth(1).unwrap().trim_end_matches(',');
        let mantissa = num.split('e').next().unwrap();
        let digits = mantissa.chars().filter(|c| c.is_ascii_digit()).count();
        assert_eq!(digits, 17, "{num}");
    }

    #[test]
    fn watrous_subcommand_small_sample() {
        let mut cfg = config("watrous", 11);
        cfg.samples = Some(2_000);
        let record = run(&cfg).unwrap();
        assert!(record.pass, "{:#?}", record.checks);
    }

    #[test]
    fn certify_alg4_exact() {
        let mut cfg = config("certify", 5);
        cfg.algorithm = Some(4);
        cfg.mode = RunMode::Exact;
        let record = run(&cfg).unwrap();
        assert!(record.pass, "{:#?}", record.checks);
    }

    #[test]
    fn out_dir_writes_record() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config("identities", 2);
        cfg.out_dir = Some(dir.path().to_path_buf());
        let _ = run(&cfg).unwrap();
        let path = dir.path().join("identities-seed2.json");
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.contains("\"schema\": \"acid-lab/1\""));
        // LF endings only.
        assert!(!text.contains('\r'));
    }
}
