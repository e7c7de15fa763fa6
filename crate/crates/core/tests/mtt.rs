use mttopt::graph::{Edge, EdgeKind, Environment, HetGraph, KpState, Node, NodeType};
use mttopt::instances::{gen_jsp_set, gen_kp_set, toy_job_shop, toy_knapsack, InstanceSet, KpInstance};
use mttopt::jsp::{brute_force_jsp, validate_schedule, JspState};
use mttopt::kp::{solve_kp_dp, validate_kp};
use mttopt::mtt::{
    checkpoint_bytes, checkpoint_from_bytes, cross_entropy, decode_greedy, init_model, kp_demos, jsp_demos,
    load_checkpoint, masked_softmax, save_checkpoint, train_imitation, MttConfig, MttModel, StepSchedule, Tape, TrainOptions,
};
use mttopt::Error;

fn five_item_graph() -> HetGraph {
    let inst = KpInstance::new("five", vec![12, 7, 30, 18, 9], vec![20, 5, 41, 22, 16], 40, 10).unwrap();
    let state = KpState::new(&inst).apply_action(1).unwrap();
    state.encode()
}

fn loss(model: &MttModel, graph: &HetGraph, target: usize) -> f64 {
    let logits = model.forward(graph).unwrap();
    cross_entropy(&logits, target).unwrap().0
}

#[test]
fn gradients_match_central_differences() {
    let graph = five_item_graph();
    let target = 3;
    let mut model = init_model(MttConfig::knapsack(5)).unwrap();
    let mut tape = Tape::new();
    let logits = model.forward_with_tape(&graph, &mut tape).unwrap();
    let (_, dlogits) = cross_entropy(&logits, target).unwrap();
    let analytic = model.backward(&tape, &dlogits).unwrap();

    let h = 1e-4;
    let tensors = model.tensors().to_vec();
    let mut worst = (0.0f64, String::new());
    for spec in &tensors {
        for idx in spec.range() {
            let orig = model.params()[idx];
            model.params_mut()[idx] = orig + h;
            let up = loss(&model, &graph, target);
            model.params_mut()[idx] = orig - h;
            let down = loss(&model, &graph, target);
            model.params_mut()[idx] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (analytic[idx] - numeric).abs() / (analytic[idx].abs() + 1e-8);
            if rel > worst.0 {
                worst = (rel, format!("{}[{}] analytic {} numeric {}", spec.name, idx - spec.offset, analytic[idx], numeric));
            }
        }
    }
    assert!(worst.0 < 1e-3, "worst relative error {:.3e} at {}", worst.0, worst.1);
}

#[test]
fn zero_loss_gradient_gives_zero_parameter_gradient() {
    let graph = five_item_graph();
    let model = init_model(MttConfig::knapsack(5)).unwrap();
    let mut tape = Tape::new();
    let logits = model.forward_with_tape(&graph, &mut tape).unwrap();
    let grads = model.backward(&tape, &vec![0.0; logits.len()]).unwrap();
    assert!(grads.iter().all(|&g| g == 0.0));
}

#[test]
fn backward_without_forward_is_a_state_error() {
    let model = init_model(MttConfig::knapsack(5)).unwrap();
    assert!(matches!(model.backward(&Tape::new(), &[0.0]), Err(Error::State(_))));
}

#[test]
fn masked_logit_gets_no_gradient() {
    let inst = KpInstance::new("m", vec![5, 50, 6], vec![5, 60, 7], 20, 10).unwrap();
    let graph = KpState::new(&inst).encode();
    assert_eq!(graph.mask, vec![true, false, true]);
    let model = init_model(MttConfig::knapsack(2)).unwrap();
    let logits = model.forward(&graph).unwrap();
    assert_eq!(logits[1], f64::NEG_INFINITY);
    let (_, d) = cross_entropy(&logits, 0).unwrap();
    assert_eq!(d[1], 0.0);
    assert!(matches!(cross_entropy(&logits, 1), Err(Error::IllegalAction { .. })));
}

#[test]
fn relabeling_items_relabels_logits() {
    let model = init_model(MttConfig::knapsack(17)).unwrap();
    let weights = vec![12, 7, 30, 18, 9, 25];
    let values = vec![20, 5, 41, 22, 16, 3];
    let perm = [4, 2, 0, 5, 1, 3];
    let a = KpInstance::new("a", weights.clone(), values.clone(), 60, 10).unwrap();
    let b = KpInstance::new(
        "b",
        perm.iter().map(|&i| weights[i]).collect(),
        perm.iter().map(|&i| values[i]).collect(),
        60,
        10,
    )
    .unwrap();
    let la = model.forward(&KpState::new(&a).encode()).unwrap();
    let lb = model.forward(&KpState::new(&b).encode()).unwrap();
    for (k, &i) in perm.iter().enumerate() {
        let rel = (lb[k] - la[i]).abs() / la[i].abs().max(1e-12);
        assert!(rel <= 1e-6, "item {i}: {} vs {}", la[i], lb[k]);
    }
}

#[test]
fn attention_types_are_separate_parameters() {
    let base = init_model(MttConfig::unified(3)).unwrap();
    let mut zeroed = base.clone();
    let names: Vec<_> = zeroed
        .tensors()
        .iter()
        .filter(|t| t.name.contains(".attn.item->capacity."))
        .map(|t| t.range())
        .collect();
    assert_eq!(names.len(), 6);
    for r in names {
        zeroed.params_mut()[r].iter_mut().for_each(|p| *p = 0.0);
    }

    let kp = toy_knapsack();
    let kp_graph = KpState::new(&kp).encode();
    assert_ne!(base.forward(&kp_graph).unwrap(), zeroed.forward(&kp_graph).unwrap());

    let jsp = toy_job_shop();
    let jsp_graph = JspState::new(&jsp).encode();
    assert_eq!(base.forward(&jsp_graph).unwrap(), zeroed.forward(&jsp_graph).unwrap());

    let items_only = HetGraph::from_parts(
        vec![
            Node { ty: NodeType::Item, features: vec![0.2, 0.5] },
            Node { ty: NodeType::Item, features: vec![0.7, 0.1] },
        ],
        vec![],
        vec![0, 1],
        vec![true, true],
    )
    .unwrap();
    assert_eq!(base.forward(&items_only).unwrap(), zeroed.forward(&items_only).unwrap());
}

#[test]
fn missing_relation_is_reported() {
    let mut cfg = MttConfig::knapsack(0);
    cfg.relations.retain(|&r| r != (NodeType::Item, NodeType::Capacity));
    let model = init_model(cfg).unwrap();
    let graph = KpState::new(&toy_knapsack()).encode();
    assert!(matches!(model.forward(&graph), Err(Error::MissingType(_))));

    let kp_model = init_model(MttConfig::knapsack(0)).unwrap();
    let jsp = toy_job_shop();
    assert!(matches!(kp_model.forward(&JspState::new(&jsp).encode()), Err(Error::MissingType(_))));
}

#[test]
fn single_feasible_action_has_probability_one() {
    let inst = KpInstance::new("one", vec![3, 9, 9], vec![1, 2, 3], 5, 1).unwrap();
    let graph = KpState::new(&inst).encode();
    let model = init_model(MttConfig::knapsack(8)).unwrap();
    let p = masked_softmax(&model.forward(&graph).unwrap()).unwrap();
    assert_eq!(p, vec![1.0, 0.0, 0.0]);
}

#[test]
fn all_masked_graph_never_yields_an_action() {
    let inst = KpInstance::new("none", vec![9, 9], vec![1, 2], 5, 1).unwrap();
    let graph = KpState::new(&inst).encode();
    let model = init_model(MttConfig::knapsack(8)).unwrap();
    let logits = model.forward(&graph).unwrap();
    assert!(masked_softmax(&logits).is_err());
}

#[test]
fn untrained_toy_knapsack_decode_is_feasible() {
    let inst = toy_knapsack();
    for seed in 0..20 {
        let model = init_model(MttConfig::knapsack(seed)).unwrap();
        let sol = decode_greedy(&model, KpState::new(&inst)).unwrap();
        assert!(validate_kp(&inst, &sol).unwrap().is_empty());
        assert!(sol.objective <= 11);
    }
}

#[test]
fn untrained_job_shop_decode_is_valid_and_not_below_optimum() {
    let set = gen_jsp_set(3, 3, 10, 4).unwrap();
    let InstanceSet::Jsp { instances, .. } = set else { unreachable!() };
    let model = init_model(MttConfig::job_shop(1)).unwrap();
    for inst in instances.iter().chain([toy_job_shop()].iter()) {
        let sched = decode_greedy(&model, JspState::new(inst)).unwrap();
        assert!(validate_schedule(inst, &sched).unwrap().is_empty());
        let opt = brute_force_jsp(inst).unwrap();
        assert!(sched.makespan >= opt.makespan);
    }
}

#[test]
fn demos_replay_the_oracle() {
    let inst = toy_knapsack();
    let demos = kp_demos(std::slice::from_ref(&inst)).unwrap();
    let opt = solve_kp_dp(&inst).unwrap();
    assert_eq!(demos.len(), opt.selected_indices().len());
    // Ratios: 1.5, 1.33, 1.25, 1.6; the optimum {0, 3} is taken best ratio first.
    assert_eq!(demos.iter().map(|d| d.action).collect::<Vec<_>>(), vec![3, 0]);

    let jsp = toy_job_shop();
    let demos = jsp_demos(std::slice::from_ref(&jsp)).unwrap();
    assert_eq!(demos.len(), 9);
    let mut state = JspState::new(&jsp);
    for d in &demos {
        assert!(d.graph.mask[d.action]);
        state = Environment::apply_action(&state, d.action).unwrap();
    }
    assert_eq!(state.into_schedule().unwrap().makespan, 9);
}

fn small_kp(count: usize, seed: u64) -> Vec<KpInstance> {
    match gen_kp_set(10, count, 2500, 1000, seed).unwrap() {
        InstanceSet::Kp { instances, .. } => instances,
        _ => unreachable!(),
    }
}

#[test]
fn training_is_deterministic_and_learns() {
    let demos = kp_demos(&small_kp(24, 7)).unwrap();
    let opts = TrainOptions { epochs: 30, step_size: 3e-3, batch_size: 16, seed: 1, max_grad_norm: None, schedule: StepSchedule::Constant };
    let mut a = init_model(MttConfig::knapsack(1)).unwrap();
    let mut b = a.clone();
    let ra = train_imitation(&mut a, &demos, &opts).unwrap();
    let rb = train_imitation(&mut b, &demos, &opts).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(a, b);
    assert!(ra.final_loss().unwrap() < ra.initial_loss().unwrap());
}

#[test]
fn one_instance_is_memorized() {
    let demos = kp_demos(&small_kp(1, 3)).unwrap();
    let mut model = init_model(MttConfig::knapsack(2)).unwrap();
    let opts = TrainOptions { epochs: 150, step_size: 1e-2, batch_size: 8, seed: 0, max_grad_norm: None, schedule: StepSchedule::Constant };
    let report = train_imitation(&mut model, &demos, &opts).unwrap();
    assert!(report.final_loss().unwrap() < 0.05, "{:?}", report.final_loss());
}

#[test]
fn zero_step_size_keeps_parameters() {
    let demos = kp_demos(&small_kp(4, 3)).unwrap();
    let mut model = init_model(MttConfig::knapsack(2)).unwrap();
    let before = model.clone();
    let opts = TrainOptions { epochs: 3, step_size: 0.0, batch_size: 4, seed: 0, max_grad_norm: None, schedule: StepSchedule::Constant };
    train_imitation(&mut model, &demos, &opts).unwrap();
    assert_eq!(model, before);
}

#[test]
fn empty_training_set_is_rejected() {
    let mut model = init_model(MttConfig::knapsack(2)).unwrap();
    assert!(train_imitation(&mut model, &[], &TrainOptions::default()).is_err());
}

#[test]
fn checkpoint_round_trips_exactly() {
    let mut model = init_model(MttConfig::unified(12)).unwrap();
    let demos = kp_demos(&small_kp(2, 1)).unwrap();
    let opts = TrainOptions { epochs: 2, ..TrainOptions::default() };
    train_imitation(&mut model, &demos, &opts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&model, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(checkpoint_bytes(&back).unwrap(), std::fs::read(&path).unwrap());
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let model = init_model(MttConfig::knapsack(12)).unwrap();
    let bytes = checkpoint_bytes(&model).unwrap();
    assert!(matches!(checkpoint_from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Format { .. })));
    let mut wrong_magic = bytes.clone();
    wrong_magic[0] = b'X';
    assert!(matches!(checkpoint_from_bytes(&wrong_magic), Err(Error::Format { .. })));
    let mut wrong_version = bytes.clone();
    wrong_version[8] = 9;
    assert!(matches!(checkpoint_from_bytes(&wrong_version), Err(Error::Format { .. })));

    let mut inexact = model.clone();
    inexact.params_mut()[0] = 0.1;
    assert!(checkpoint_bytes(&inexact).is_err());
}

#[test]
fn conjunctive_and_disjunctive_arcs_share_one_relation() {
    let model = init_model(MttConfig::job_shop(0)).unwrap();
    let g = HetGraph::from_parts(
        vec![
            Node { ty: NodeType::Operation, features: vec![1.0, 0.0, 0.0, 0.0] },
            Node { ty: NodeType::Operation, features: vec![0.5, 0.5, 0.0, 0.3] },
        ],
        vec![
            Edge { src: 0, dst: 1, kind: EdgeKind::Conjunctive },
            Edge { src: 1, dst: 0, kind: EdgeKind::Disjunctive },
        ],
        vec![0, 1],
        vec![true, false],
    )
    .unwrap();
    let logits = model.forward(&g).unwrap();
    assert!(logits[0].is_finite() && logits[1] == f64::NEG_INFINITY);
}
