//! End-to-end acceptance checks. Runs as a plain binary (no libtest
//! harness) so the PASS/FAIL lines are always printed; exits non-zero if
//! any criterion fails.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qbench::gradient::{adjoint_gradient, parameter_shift_gradient};
use qbench::harness::{bootstrap_ci, parameter_ratio};
use qbench::models::{CircuitTemplate, ModelSpec, OutputMode};
use qbench::optim::cross_entropy;
use qbench::qasm::{
    circuit_depth, emit_qasm2, estimate_hw_training_time, parse_qasm2, reference_hardware_rows, CircuitLog,
};
use qbench::rl::{
    dqn_train, evaluate_policy, generate_lake, is_solved, optimal_return, DqnConfig, LakeEnv, RlMetrics,
    OPTIMAL_RETURN,
};
use qbench::statevector::{amplitude_embed, normalized_padded, EmbeddingKind};
use qbench::training::{load_dataset, train_sl, DatasetName, SlConfig, SlMetrics};
use qbench::{Circuit, Gate, Model, StateVector, VqcParameters};

const SEEDS: std::ops::Range<u64> = 0..10;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn iris_nn() -> ModelSpec {
    ModelSpec::nn(4, &[9], 3)
}
fn wine_nn() -> ModelSpec {
    ModelSpec::nn(13, &[6], 3)
}
fn wdbc_nn() -> ModelSpec {
    ModelSpec::nn(30, &[3], 2)
}
fn lake_nn() -> ModelSpec {
    ModelSpec::nn(4, &[12], 4)
}
fn iris_vqc() -> ModelSpec {
    ModelSpec::vqc(EmbeddingKind::Angle, 4, 2, 3).unwrap()
}
fn wine_vqc() -> ModelSpec {
    ModelSpec::vqc(EmbeddingKind::Amplitude, 13, 3, 3).unwrap()
}
fn wdbc_vqc() -> ModelSpec {
    ModelSpec::vqc(EmbeddingKind::Amplitude, 30, 4, 2).unwrap()
}
fn lake_vqc() -> ModelSpec {
    ModelSpec::vqc(EmbeddingKind::Angle, 4, 3, 4).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

// 1 ---------------------------------------------------------------------------

fn parameter_counts() -> Verdict {
    let cases = [
        (iris_nn(), 75),
        (wine_nn(), 105),
        (wdbc_nn(), 101),
        (lake_nn(), 112),
        (iris_vqc(), 28),
        (wine_vqc(), 40),
        (wdbc_vqc(), 63),
        (lake_vqc(), 41),
    ];
    let mut detail = String::new();
    let mut pass = true;
    for (spec, want) in cases {
        let model: Model = spec.init(0).unwrap();
        let ok = spec.param_count() == want && model.params().len() == want;
        pass &= ok;
        write!(detail, "{}={} ", spec.label(), model.params().len()).unwrap();
    }
    Verdict::new(pass, detail.trim_end())
}

// 2 ---------------------------------------------------------------------------

fn parameter_ratios() -> Verdict {
    let pairs = [(iris_nn(), iris_vqc(), "0.373"), (wine_nn(), wine_vqc(), "0.381"), (wdbc_nn(), wdbc_vqc(), "0.624"), (lake_nn(), lake_vqc(), "0.366")];
    let mut pass = true;
    let mut got = Vec::new();
    for (nn, vqc, want) in pairs {
        let r = format!("{:.3}", parameter_ratio(vqc.param_count(), nn.param_count()));
        pass &= r == want;
        got.push(format!("{}/{}={r}", vqc.id(), nn.id()));
    }
    Verdict::new(pass, got.join(" "))
}

// 3 ---------------------------------------------------------------------------

fn sl_suite() -> Vec<(DatasetName, ModelSpec, f64, Vec<SlMetrics>)> {
    let suite = [
        (DatasetName::Iris, iris_nn(), 0.968),
        (DatasetName::Iris, iris_vqc(), 0.963),
        (DatasetName::Wine, wine_nn(), 0.978),
        (DatasetName::Wine, wine_vqc(), 0.974),
        (DatasetName::Wdbc, wdbc_nn(), 0.961),
        (DatasetName::Wdbc, wdbc_vqc(), 0.961),
    ];
    let config = SlConfig::default();
    let jobs: Vec<(usize, u64)> = (0..suite.len()).flat_map(|i| SEEDS.map(move |s| (i, s))).collect();
    let runs: Vec<(usize, SlMetrics)> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let (name, spec, _) = &suite[i];
            let ds = load_dataset(*name, config.split_seed(seed)).unwrap();
            (i, train_sl(spec, &ds, &config, seed, None).unwrap().metrics)
        })
        .collect();
    suite
        .into_iter()
        .enumerate()
        .map(|(i, (name, spec, target))| {
            let metrics = runs.iter().filter(|(j, _)| *j == i).map(|(_, m)| m.clone()).collect();
            (name, spec, target, metrics)
        })
        .collect()
}

fn sl_accuracy(results: &[(DatasetName, ModelSpec, f64, Vec<SlMetrics>)]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, spec, target, runs) in results {
        let m = mean(&runs.iter().map(|r| r.test_accuracy).collect::<Vec<_>>());
        let ok = (m - target).abs() <= 0.05;
        pass &= ok;
        parts.push(format!("{} {} {m:.3} (target {target:.3}{})", name.as_str(), spec.id(), if ok { "" } else { ", OUT" }));
    }
    Verdict::new(pass, parts.join("; "))
}

/// Supplementary invariant: mean train loss of the last epoch is below the first.
fn sl_loss_decreases(results: &[(DatasetName, ModelSpec, f64, Vec<SlMetrics>)]) -> Verdict {
    let mut bad = Vec::new();
    for (name, spec, _, runs) in results {
        for r in runs {
            let (first, last) = (r.epochs.first().unwrap(), r.epochs.last().unwrap());
            if last.train_loss >= first.train_loss {
                bad.push(format!("{} {} seed {}", name.as_str(), spec.id(), r.seed));
            }
        }
    }
    let n: usize = results.iter().map(|r| r.3.len()).sum();
    Verdict::new(bad.is_empty(), if bad.is_empty() { format!("{n} runs") } else { format!("violations: {}", bad.join(", ")) })
}

// 4 ---------------------------------------------------------------------------

struct RlResult {
    spec: ModelSpec,
    runs: Vec<(RlMetrics, Model)>,
}

fn rl_suite() -> Vec<RlResult> {
    let config = DqnConfig::default();
    [lake_nn(), lake_vqc()]
        .into_iter()
        .map(|spec| {
            let runs = SEEDS
                .into_par_iter()
                .map(|seed| {
                    let run = dqn_train(&spec, &config, seed, None).unwrap();
                    (run.metrics, run.policy.restore().unwrap())
                })
                .collect();
            RlResult { spec, runs }
        })
        .collect()
}

fn rl_solves(results: &[RlResult]) -> Verdict {
    let solved = |r: &RlResult| r.runs.iter().filter(|(m, _)| m.solved).count();
    let ma = |r: &RlResult| mean(&r.runs.iter().map(|(m, _)| m.final_moving_average).collect::<Vec<_>>());
    let (nn, vqc) = (&results[0], &results[1]);
    let pass = solved(vqc) >= 3 && ma(vqc) >= 0.6 && solved(nn) >= 2;
    Verdict::new(
        pass,
        format!(
            "{} solved {}/10, mean final MA50 {:.3}; {} solved {}/10, mean final MA50 {:.3}",
            vqc.spec.id(),
            solved(vqc),
            ma(vqc),
            nn.spec.id(),
            solved(nn),
            ma(nn)
        ),
    )
}

// 5 ---------------------------------------------------------------------------

fn gradients() -> Verdict {
    let mut worst_ps: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    let instances = 240u64;
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=5usize);
        let layers = rng.gen_range(1..=6);
        let k = rng.gen_range(1..=n);
        let t = if seed % 2 == 0 {
            CircuitTemplate::new(EmbeddingKind::Angle, n, layers, k).unwrap()
        } else {
            CircuitTemplate::new(EmbeddingKind::Amplitude, rng.gen_range((1usize << (n - 1)) + 1..=1 << n), layers, k).unwrap()
        };
        let params = VqcParameters {
            theta: (0..t.theta_len()).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            ..VqcParameters::zeros(&t)
        };
        let input: Vec<f64> = (0..t.input_dim).map(|_| rng.gen_range(0.05..1.0)).collect();
        let adj = adjoint_gradient(&t, &params, &input).unwrap();
        let ps = parameter_shift_gradient(&t, &params, &input, FRAC_PI_2).unwrap();
        let circuit = t.build_circuit(&params, &input).unwrap();
        let measured = t.measured_qubits();
        for p in 0..t.theta_len() {
            let shifted = |d: f64| -> Vec<f64> {
                let mut c: Circuit = circuit.clone();
                for op in c.ops.iter_mut().filter(|op| op.param == Some(p)) {
                    if let Gate::Rot { angle, .. } = op.gate {
                        op.gate = op.gate.with_angle(angle + d);
                    }
                }
                c.expectations(&measured).unwrap()
            };
            let (up, down) = (shifted(1e-5), shifted(-1e-5));
            for q in 0..k {
                let fd = (up[q] - down[q]) / 2e-5;
                let (a, s) = (adj.jacobian.get(q, p), ps.jacobian.get(q, p));
                worst_ps = worst_ps.max((a - s).abs());
                worst_fd = worst_fd.max((a - fd).abs()).max((s - fd).abs());
            }
        }
    }

    // Whole pipeline: raw parameters -> remap -> circuit/net -> head -> softmax -> CE.
    let mut worst_pipe: f64 = 0.0;
    for (i, spec) in [iris_nn(), wine_nn(), wdbc_nn(), iris_vqc(), wine_vqc(), wdbc_vqc()].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
        let mut model: Model = spec.init(i as u64).unwrap();
        let base: Vec<f64> = model.params().iter().map(|p| p + rng.gen_range(-0.3..0.3)).collect();
        let batch: Vec<(Vec<f64>, usize)> = (0..3)
            .map(|_| ((0..spec.n_inputs()).map(|_| rng.gen_range(0.0..1.0)).collect(), rng.gen_range(0..spec.n_outputs())))
            .collect();
        let loss = |m: &Model| -> (f64, Vec<f64>) {
            let mut g = vec![0.0; m.param_count()];
            let mut l = 0.0;
            for (x, y) in &batch {
                let out = m.forward(x, OutputMode::Probabilities).unwrap();
                let (li, dl) = cross_entropy(&out.values, *y).unwrap();
                l += li;
                g.iter_mut().zip(m.backward(out, &dl).unwrap()).for_each(|(a, b)| *a += b);
            }
            (l / batch.len() as f64, g.into_iter().map(|v| v / batch.len() as f64).collect())
        };
        model.set_params(&base).unwrap();
        let (_, grad) = loss(&model);
        for p in 0..base.len() {
            let mut v = base.clone();
            v[p] += 1e-5;
            model.set_params(&v).unwrap();
            let up = loss(&model).0;
            v[p] -= 2e-5;
            model.set_params(&v).unwrap();
            let down = loss(&model).0;
            worst_pipe = worst_pipe.max((grad[p] - (up - down) / 2e-5).abs());
        }
    }
    let pass = worst_ps <= 1e-8 && worst_fd <= 1e-4 && worst_pipe <= 1e-4;
    Verdict::new(
        pass,
        format!(
            "{instances} circuits: max |adjoint-shift| {worst_ps:.1e}, max |analytic-fd| {worst_fd:.1e}; pipeline max |backprop-fd| {worst_pipe:.1e}"
        ),
    )
}

// 6 ---------------------------------------------------------------------------

fn environment_oracle(rl: &[RlResult]) -> Verdict {
    let horizon = DqnConfig::default().max_steps;
    let mut bad_lakes = Vec::new();
    for seed in 0..1000u64 {
        let r = optimal_return(&generate_lake(seed), horizon);
        if (r - OPTIMAL_RETURN).abs() > 1e-12 {
            bad_lakes.push(seed);
        }
    }
    let mut checked = 0;
    let mut mismatched = Vec::new();
    for res in rl {
        for (m, policy) in &res.runs {
            let env = LakeEnv::from_holes(&m.holes, m.seed).unwrap();
            let dp = optimal_return(&env, horizon);
            let greedy = evaluate_policy(policy, &env, 1, horizon).unwrap();
            if (greedy - m.test_reward).abs() > 1e-12 {
                mismatched.push(format!("{} seed {} replay", res.spec.id(), m.seed));
            }
            if m.solved {
                checked += 1;
                if (greedy - dp).abs() > 1e-12 || !is_solved(greedy) {
                    mismatched.push(format!("{} seed {}", res.spec.id(), m.seed));
                }
            }
        }
    }
    let pass = bad_lakes.is_empty() && mismatched.is_empty() && checked > 0;
    Verdict::new(
        pass,
        format!(
            "1000 lakes: {} with optimum != 0.95; {checked} solving policies, {} disagreeing with DP",
            bad_lakes.len(),
            mismatched.len()
        ),
    )
}

// 7 ---------------------------------------------------------------------------

fn statevector_properties() -> Verdict {
    let mut drift: f64 = 0.0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=6usize);
        let mut s = StateVector::zero(n).unwrap();
        for _ in 0..100 {
            let t = rng.gen_range(0..n);
            let a = rng.gen_range(-7.0..7.0);
            let g = match rng.gen_range(0..4) {
                0 => Gate::rx(t, a),
                1 => Gate::ry(t, a),
                2 => Gate::rz(t, a),
                _ if n > 1 => Gate::cnot((t + rng.gen_range(1..n)) % n, t),
                _ => Gate::ry(t, a),
            };
            s.apply(&g).unwrap();
        }
        drift = drift.max((s.norm_sqr() - 1.0).abs());
    }
    let mut worst_fid: f64 = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..100 {
        let d = 2 + i % 31;
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let n = EmbeddingKind::Amplitude.qubits_for(d);
        let target = normalized_padded(&x, n).unwrap();
        let prepared = amplitude_embed(&x, n).unwrap();
        let overlap: num_complex::Complex<f64> = target.iter().zip(prepared.amplitudes()).map(|(t, p)| p * *t).sum();
        worst_fid = worst_fid.min(overlap.norm_sqr());
    }
    Verdict::new(
        drift <= 1e-10 && worst_fid >= 1.0 - 1e-10,
        format!("max norm drift {drift:.1e}; min embedding fidelity 1-{:.1e}", 1.0 - worst_fid),
    )
}

// 8 ---------------------------------------------------------------------------

fn qasm_and_estimate() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    let inputs: [(ModelSpec, usize, Option<usize>); 4] =
        [(iris_vqc(), 4, Some(17)), (lake_vqc(), 4, Some(25)), (wine_vqc(), 13, None), (wdbc_vqc(), 30, None)];
    let mut worst_prob: f64 = 0.0;
    for (spec, dim, want_depth) in inputs {
        let model: Model = spec.init(0).unwrap();
        let mut log = CircuitLog::new("acceptance", 1, 1).with_limit(8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..8 {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
            log.record(1, &model, &x).unwrap();
        }
        let depth = circuit_depth(&log.circuits()[0]);
        if let Some(w) = want_depth {
            pass &= depth == w;
        }
        parts.push(format!("{} depth {depth}", spec.id()));
        for c in log.circuits() {
            let text = emit_qasm2(c).unwrap();
            let parsed = parse_qasm2(&text).unwrap();
            pass &= emit_qasm2(&parsed).unwrap() == text;
            let (a, b) = (c.measured_distribution().unwrap(), parsed.measured_distribution().unwrap());
            for (x, y) in a.iter().zip(&b) {
                worst_prob = worst_prob.max((x - y).abs());
            }
        }
    }
    pass &= worst_prob <= 1e-10;
    parts.push(format!("re-simulation max diff {worst_prob:.1e}"));

    let iris = reference_hardware_rows().unwrap().into_iter().find(|r| r.task == "iris").unwrap();
    let (sim_total, hw_published) = (92.6, 1806.1);
    let circuit_share = (hw_published - sim_total) / (iris.ratio - 1.0);
    let est = estimate_hw_training_time(sim_total, circuit_share, iris.ratio).unwrap();
    let rel = (est - hw_published).abs() / hw_published;
    pass &= rel <= 0.01;
    parts.push(format!("iris estimate {sim_total} -> {est:.1} s (rel err {rel:.1e})"));
    Verdict::new(pass, parts.join("; "))
}

// 9 ---------------------------------------------------------------------------

/// Independent percentile bootstrap: same seeded index draws, running
/// resample means, linear interpolation between order statistics.
fn bootstrap_oracle(values: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64, f64) {
    let n = values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut m = 0.0;
            for i in 0..n {
                m += (values[rng.gen_range(0..n)] - m) / (i + 1) as f64;
            }
            m
        })
        .collect();
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| {
        let h = p * (resamples - 1) as f64;
        let lo = h.floor() as usize;
        stats[lo] + (h - lo as f64) * (stats[(lo + 1).min(resamples - 1)] - stats[lo])
    };
    let mut m = 0.0;
    for (i, v) in values.iter().enumerate() {
        m += (v - m) / (i + 1) as f64;
    }
    let a = (1.0 - level) / 2.0;
    (m, q(a), q(1.0 - a))
}

fn bootstrap() -> Verdict {
    let values = [0.947, 0.895, 1.0, 0.947, 0.842, 1.0, 0.947, 0.895, 0.947, 1.0];
    let a = bootstrap_ci(&values, 1000, 0.95, 0).unwrap();
    let b = bootstrap_ci(&values, 1000, 0.95, 0).unwrap();
    let oracle = bootstrap_oracle(&values, 1000, 0.95, 0);
    let pass = a == b && (a.mean, a.low, a.high) == oracle && a.low <= a.mean && a.mean <= a.high;
    Verdict::new(pass, format!("mean {:.4} [{:.4}, {:.4}], oracle [{:.4}, {:.4}]", a.mean, a.low, a.high, oracle.1, oracle.2))
}

fn main() {
    let mut failed = Vec::new();
    let mut report = |id: &str, name: &str, start: Instant, v: Verdict| {
        println!(
            "criterion {id:<3} {name:<28} {}  ({:.1}s) {}",
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
        if !v.pass {
            failed.push(id.to_string());
        }
    };

    let t = Instant::now();
    report("1", "parameter counts", t, parameter_counts());
    let t = Instant::now();
    report("2", "parameter ratios", t, parameter_ratios());

    let t = Instant::now();
    let sl = sl_suite();
    report("3", "SL accuracy (10 seeds)", t, sl_accuracy(&sl));
    let t = Instant::now();
    report("3b", "SL train loss decreases", t, sl_loss_decreases(&sl));

    let t = Instant::now();
    let rl = rl_suite();
    report("4", "RL solves (10 seeds)", t, rl_solves(&rl));
    let t = Instant::now();
    report("5", "gradient agreement", t, gradients());
    let t = Instant::now();
    report("6", "environment DP oracle", t, environment_oracle(&rl));
    let t = Instant::now();
    report("7", "statevector properties", t, statevector_properties());
    let t = Instant::now();
    report("8", "QASM, depth, HW estimate", t, qasm_and_estimate());
    let t = Instant::now();
    report("9", "bootstrap CI", t, bootstrap());

    if !failed.is_empty() {
        println!("acceptance: failed criteria {}", failed.join(", "));
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
