use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qbench::models::ModelSpec;
use qbench::qasm::{
    circuit_depth, emit_qasm2, estimate_hw_training_time, join_timings, parse_qasm2, ratio_report, read_hardware_times,
    read_manifest, write_archive, CircuitLog, ConcreteCircuit, HardwareRow,
};
use qbench::statevector::{mottonen_gates, EmbeddingKind};
use qbench::{Gate, Model};

fn random_circuit(seed: u64) -> ConcreteCircuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=5usize);
    let gates = (0..rng.gen_range(0..60))
        .map(|_| {
            let t = rng.gen_range(0..n);
            let a = rng.gen_range(-10.0..10.0);
            match rng.gen_range(0..4) {
                0 => Gate::rx(t, a),
                1 => Gate::ry(t, a),
                2 => Gate::rz(t, a),
                _ if n > 1 => Gate::cnot((t + rng.gen_range(1..n)) % n, t),
                _ => Gate::ry(t, a),
            }
        })
        .collect();
    let mut measured: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
    if rng.gen_bool(0.5) {
        measured.reverse();
    }
    ConcreteCircuit::new(n, gates, measured)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn emit_parse_emit_is_fixed_point(seed in any::<u64>()) {
        let c = random_circuit(seed);
        let first = emit_qasm2(&c).unwrap();
        let parsed = parse_qasm2(&first).unwrap();
        prop_assert_eq!(&parsed.gates, &c.gates);
        prop_assert_eq!(&parsed.measured, &c.measured);
        prop_assert_eq!(emit_qasm2(&parsed).unwrap(), first);
    }

    #[test]
    fn reparsed_circuit_reproduces_distribution(seed in any::<u64>()) {
        let c = random_circuit(seed);
        let parsed = parse_qasm2(&emit_qasm2(&c).unwrap()).unwrap();
        let (a, b) = (c.measured_distribution().unwrap(), parsed.measured_distribution().unwrap());
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn estimate_monotone(
        total in 1.0f64..1e4,
        frac_a in 0.0f64..=1.0,
        frac_b in 0.0f64..=1.0,
        r1 in 0.01f64..100.0,
        r2 in 0.01f64..100.0,
    ) {
        let (lo_r, hi_r) = (r1.min(r2), r1.max(r2));
        let sim = frac_a * total;
        prop_assert!(
            estimate_hw_training_time(total, sim, lo_r).unwrap() <= estimate_hw_training_time(total, sim, hi_r).unwrap()
        );
        // Growing the circuit share can only lengthen the estimate when the
        // hardware is at least as slow as the simulator.
        let (lo_s, hi_s) = (frac_a.min(frac_b) * total, frac_a.max(frac_b) * total);
        let r = 1.0 + hi_r;
        prop_assert!(
            estimate_hw_training_time(total, lo_s, r).unwrap() <= estimate_hw_training_time(total, hi_s, r).unwrap()
        );
    }
}

#[test]
fn angle_circuit_depths_follow_layer_formula() {
    let input = [0.1, 0.5, 0.9, 0.3];
    for layers in 1..=6 {
        let spec = ModelSpec::vqc(EmbeddingKind::Angle, 4, layers, 3).unwrap();
        let model: Model = spec.init(0).unwrap();
        let mut log = CircuitLog::new("iris", 1, 1);
        log.record(1, &model, &input).unwrap();
        assert_eq!(circuit_depth(&log.circuits()[0]), 8 * layers + 1, "L={layers}");
    }
}

#[test]
fn mottonen_circuit_survives_round_trip() {
    let x: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
    let c = ConcreteCircuit::new(5, mottonen_gates(&x, 5).unwrap(), (0..5).collect());
    let parsed = parse_qasm2(&emit_qasm2(&c).unwrap()).unwrap();
    let norm: f64 = x.iter().map(|v| v * v).sum();
    for (i, p) in parsed.measured_distribution().unwrap().iter().enumerate() {
        let want = x.get(i).map_or(0.0, |v| v * v / norm);
        assert!((p - want).abs() <= 1e-10);
    }
}

#[test]
fn archive_round_trip_and_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let circuits: Vec<ConcreteCircuit> = (0..4)
        .map(|i| ConcreteCircuit {
            id: format!("iris-e0001-{i:05}"),
            task: "iris".into(),
            epoch: 1,
            sim_seconds: 0.01 * (i + 1) as f64,
            ..random_circuit(i)
        })
        .collect();
    let rows = write_archive(dir.path(), &circuits).unwrap();
    assert_eq!(read_manifest(dir.path()).unwrap(), rows);
    for c in &circuits {
        let text = std::fs::read_to_string(dir.path().join(format!("{}.qasm", c.id))).unwrap();
        assert_eq!(parse_qasm2(&text).unwrap().gates, c.gates);
    }
    let hw_path = dir.path().join("hw.csv");
    std::fs::write(&hw_path, "circuit_id,hardware_seconds\niris-e0001-00000,0.3\niris-e0001-00002,0.9\nunknown,5\n").unwrap();
    let hw: Vec<HardwareRow> = read_hardware_times(&hw_path).unwrap();
    let report = ratio_report(&join_timings(&rows, &hw)).unwrap();
    assert_eq!(report.matched, 2);
    // (0.3 + 0.9) / (0.01 + 0.03) and (30 + 30) / 2
    assert!((report.ratio_of_means - 30.0).abs() < 1e-9);
    assert!((report.mean_of_ratios - 30.0).abs() < 1e-9);
}
