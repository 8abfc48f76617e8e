mod common;

use bearing_pinn::dataio::{CorpusSpec, FaultClass, SignalSegment};
use bearing_pinn::geometry::{BearingGeometry, OperatingCondition};
use bearing_pinn::model::{
    export_embeddings, extract_physics_features, hard_penalty, physics_informed_loss, physics_penalty, soft_penalty,
    ArchConfig, ModelInput, MultimodalNet, PenaltyMode, PhysicsFeatures, PhysicsLossConfig,
};
use bearing_pinn::nn::Tensor;
use proptest::prelude::*;

fn fraction_where(class: FaultClass, pred: impl Fn(&PhysicsFeatures) -> bool) -> f64 {
    let spec = CorpusSpec {
        per_class: 100,
        seed: 77,
        ..CorpusSpec::desk()
    };
    let segs = bearing_pinn::dataio::synthesize(&spec.class_spec(class), 100, spec.window).unwrap();
    let hits = segs
        .iter()
        .filter(|s| pred(&extract_physics_features(s, &spec.geometry, &spec.condition, &common::band()).unwrap()))
        .count();
    hits as f64 / segs.len() as f64
}

#[test]
fn outer_fault_amplitude_dominates_at_bpfo() {
    let f = fraction_where(FaultClass::OuterFault, |p| p.a_bpfo > p.a_bpfi);
    assert!(f >= 0.9, "{f}");
}

#[test]
fn inner_fault_amplitude_dominates_at_bpfi() {
    let f = fraction_where(FaultClass::InnerFault, |p| p.a_bpfi > p.a_bpfo);
    assert!(f >= 0.9, "{f}");
}

#[test]
fn zero_vibration_gives_zero_features() {
    let n = 1024;
    let seg = SignalSegment::new(vec![0.0; n], vec![1.0; n], vec![-1.0; n], FaultClass::Healthy, "x", 8192.0)
        .unwrap();
    let f = extract_physics_features(
        &seg,
        &BearingGeometry::paderborn_6203(),
        &OperatingCondition::paderborn_baseline(),
        &common::band(),
    )
    .unwrap();
    assert_eq!(f, PhysicsFeatures::new(0.0, 0.0));
}

fn cfg(mode: PenaltyMode, lambda: f64, t_bpfo: f64, t_bpfi: f64) -> PhysicsLossConfig {
    PhysicsLossConfig {
        lambda,
        t_bpfo,
        t_bpfi,
        threshold_percentile: 10.0,
        gating: mode,
    }
}

fn one_hot_probs(class: FaultClass) -> [f64; 3] {
    let mut p = [0.1; 3];
    p[class.index()] = 0.8;
    p
}

proptest! {
    #[test]
    fn penalty_is_zero_when_amplitude_meets_threshold(
        a_o in 0.0f64..1.0, a_i in 0.0f64..1.0, t_o in 0.0f64..1.0, t_i in 0.0f64..1.0,
        p in prop::array::uniform3(0.0f64..1.0),
    ) {
        let sum: f64 = p.iter().sum::<f64>() + 1e-9;
        let probs = p.map(|v| v / sum);
        let f = PhysicsFeatures::new(a_o, a_i);
        for mode in [PenaltyMode::HardArgmax, PenaltyMode::SoftProbability] {
            let c = cfg(mode, 1.0, t_o, t_i);
            let pen = physics_penalty(&probs, &f, &c);
            prop_assert!(pen >= 0.0);
            if a_o >= t_o && a_i >= t_i {
                prop_assert_eq!(pen, 0.0);
            }
        }
        let pred = FaultClass::from_index(bearing_pinn::model::argmax(&probs)).unwrap();
        let hard = hard_penalty(pred, &f, &cfg(PenaltyMode::HardArgmax, 1.0, t_o, t_i));
        let own = match pred {
            FaultClass::OuterFault => a_o >= t_o,
            FaultClass::InnerFault => a_i >= t_i,
            FaultClass::Healthy => true,
        };
        if own {
            prop_assert_eq!(hard, 0.0);
        }
    }

    #[test]
    fn loss_strictly_increases_with_lambda(
        logits in prop::collection::vec(-3.0f64..3.0, 6),
        l1 in 0.0f64..2.0, dl in 0.01f64..2.0,
        mode_soft in any::<bool>(),
    ) {
        let z = Tensor::new(vec![2, 3], logits).unwrap();
        let mode = if mode_soft { PenaltyMode::SoftProbability } else { PenaltyMode::HardArgmax };
        // Amplitudes of zero with positive thresholds make every fault-class
        // hinge positive, so some P_i > 0 in either mode unless both rows
        // predict healthy under hard gating.
        let feats = [PhysicsFeatures::new(0.0, 0.0), PhysicsFeatures::new(0.0, 0.0)];
        let a = physics_informed_loss(&z, &[0, 1], &feats, &cfg(mode, l1, 0.5, 0.5)).unwrap();
        prop_assume!(a.mean_penalty > 0.0);
        let b = physics_informed_loss(&z, &[0, 1], &feats, &cfg(mode, l1 + dl, 0.5, 0.5)).unwrap();
        prop_assert!(b.total > a.total);
    }
}

#[test]
fn hard_mode_matches_piecewise_oracle_on_grid() {
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    for class in FaultClass::ALL {
        for &a_o in &grid {
            for &a_i in &grid {
                for &t_o in &grid {
                    for &t_i in &grid {
                        let c = cfg(PenaltyMode::HardArgmax, 1.0, t_o, t_i);
                        let f = PhysicsFeatures::new(a_o, a_i);
                        let oracle = if class == FaultClass::OuterFault && a_o < t_o {
                            t_o - a_o
                        } else if class == FaultClass::InnerFault && a_i < t_i {
                            t_i - a_i
                        } else {
                            0.0
                        };
                        assert_eq!(hard_penalty(class, &f, &c), oracle);
                        assert_eq!(physics_penalty(&one_hot_probs(class), &f, &c), oracle);
                    }
                }
            }
        }
    }
}

#[test]
fn soft_mode_formula() {
    let c = cfg(PenaltyMode::SoftProbability, 1.0, 0.5, 0.4);
    let f = PhysicsFeatures::new(0.2, 0.1);
    let p = [0.2, 0.3, 0.5];
    assert!((soft_penalty(&p, &f, &c) - (0.5 * 0.3 + 0.3 * 0.3)).abs() < 1e-15);
}

#[test]
fn embeddings_match_forward_and_repeat() {
    let arch = ArchConfig::desk(512);
    let net = MultimodalNet::new(&arch).unwrap();
    let corpus = common::corpus(&common::tiny_spec(2, 5));
    let inputs: Vec<ModelInput> = corpus
        .segments
        .iter()
        .zip(&corpus.features)
        .map(|(s, f)| ModelInput::new(s, f))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let rows = || {
        inputs
            .iter()
            .enumerate()
            .map(|(i, x)| (i, corpus.segments[i].label, corpus.segments[i].condition.as_str(), x))
    };
    let p1 = dir.path().join("a.csv");
    let p2 = dir.path().join("b.csv");
    assert_eq!(export_embeddings(&net, rows(), &p1).unwrap(), inputs.len());
    export_embeddings(&net, rows(), &p2).unwrap();
    let text = std::fs::read_to_string(&p1).unwrap();
    assert_eq!(text, std::fs::read_to_string(&p2).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), inputs.len() + 1);
    for (i, line) in lines[1..].iter().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 3 + net.fusion_width());
        let fused = net.predict(&inputs[i]).unwrap().fused;
        let parsed: Vec<f64> = cells[3..].iter().map(|c| c.parse().unwrap()).collect();
        assert_eq!(parsed, fused);
    }
}
