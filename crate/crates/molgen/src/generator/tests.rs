use super::*;
use crate::graph::{is_isomorphic, TypePriority};
use crate::modules::ModuleConfig;
use crate::sequencer::{decompose, reorder};

/// Always stops immediately.
#[derive(Clone)]
struct AlwaysStop;

impl GenerationPolicy for AlwaysStop {
    fn node_decision(
        &mut self,
        _g: &MolecularGraph,
        _f: usize,
        _rng: &mut ChaCha8Rng,
    ) -> Result<NodeDecision> {
        Ok(NodeDecision::Stop)
    }
    fn first_edge(
        &mut self,
        _g: &MolecularGraph,
        _i: usize,
        _j: usize,
        _rng: &mut ChaCha8Rng,
    ) -> Result<usize> {
        unreachable!("never grows")
    }
    fn link_decisions(
        &mut self,
        _g: &MolecularGraph,
        _i: usize,
        _j: usize,
        _c: &[usize],
        _rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Option<usize>>> {
        unreachable!("never grows")
    }
}

/// Grows `budget` vertices of one type (single bonds, no extra links),
/// then stops forever.
#[derive(Clone)]
struct GrowN {
    budget: usize,
    vertex_type: usize,
}

impl GenerationPolicy for GrowN {
    fn node_decision(
        &mut self,
        _g: &MolecularGraph,
        _f: usize,
        _rng: &mut ChaCha8Rng,
    ) -> Result<NodeDecision> {
        if self.budget == 0 {
            return Ok(NodeDecision::Stop);
        }
        self.budget -= 1;
        Ok(NodeDecision::Grow(self.vertex_type))
    }
    fn first_edge(
        &mut self,
        _g: &MolecularGraph,
        _i: usize,
        _j: usize,
        _rng: &mut ChaCha8Rng,
    ) -> Result<usize> {
        Ok(0)
    }
    fn link_decisions(
        &mut self,
        _g: &MolecularGraph,
        _i: usize,
        _j: usize,
        candidates: &[usize],
        _rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Option<usize>>> {
        Ok(vec![None; candidates.len()])
    }
}

/// Never stops.
#[derive(Clone)]
struct NeverStop;

impl GenerationPolicy for NeverStop {
    fn node_decision(
        &mut self,
        _g: &MolecularGraph,
        _f: usize,
        _rng: &mut ChaCha8Rng,
    ) -> Result<NodeDecision> {
        Ok(NodeDecision::Grow(0))
    }
    fn first_edge(
        &mut self,
        _g: &MolecularGraph,
        _i: usize,
        _j: usize,
        _rng: &mut ChaCha8Rng,
    ) -> Result<usize> {
        Ok(0)
    }
    fn link_decisions(
        &mut self,
        _g: &MolecularGraph,
        _i: usize,
        _j: usize,
        candidates: &[usize],
        _rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Option<usize>>> {
        Ok(vec![None; candidates.len()])
    }
}

fn point_h() -> SeedDistribution {
    // QM9 type 0 = H.
    SeedDistribution::point(0, 5)
}

#[test]
fn always_stop_yields_single_vertex() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = generate(&mut AlwaysStop, &point_h(), 29, &mut rng).unwrap();
    assert_eq!(out.graph.vertex_count(), 1);
    assert_eq!(out.graph.edge_count(), 0);
    assert!(out.complete);
    // Seed step plus one stop decision.
    assert_eq!(out.trace.len(), 2);
    assert_eq!(out.trace[1].decision, Decision::Stop);
}

#[test]
fn grow_one_then_stop_yields_labeled_pair() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut policy = GrowN {
        budget: 1,
        vertex_type: 0,
    };
    let out = generate(&mut policy, &point_h(), 29, &mut rng).unwrap();
    assert_eq!(out.graph.vertex_count(), 2);
    assert_eq!(out.graph.edge_count(), 1);
    assert_eq!(out.graph.edge_label(0, 1), Some(0));
    assert!(out.complete);
    // Trace: seed, grow, bond type, stop, stop.
    let kinds: Vec<&str> = out.trace.iter().map(|t| t.module.as_str()).collect();
    assert_eq!(kinds, vec!["d0", "m1", "m2", "m1", "m1"]);
}

#[test]
fn never_stop_hits_cap_and_flags_incomplete() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = generate(&mut NeverStop, &point_h(), 29, &mut rng).unwrap();
    assert_eq!(out.graph.vertex_count(), 29);
    assert!(!out.complete);
    assert!(out.graph.is_connected());
}

#[test]
fn natural_completion_at_cap_is_complete() {
    // Exactly fills vmax and stops by itself: the cap never fires.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut policy = GrowN {
        budget: 4,
        vertex_type: 0,
    };
    let out = generate(&mut policy, &point_h(), 5, &mut rng).unwrap();
    assert_eq!(out.graph.vertex_count(), 5);
    assert!(out.complete);
}

#[test]
fn batch_is_deterministic_and_ordered() {
    let d0 = SeedDistribution::new(vec![0.25, 0.75, 0.0, 0.0, 0.0]).unwrap();
    let policy = GrowN {
        budget: 3,
        vertex_type: 1,
    };
    let mut rng1 = ChaCha8Rng::seed_from_u64(77);
    let batch1 = generate_batch(&policy, 50, &d0, 29, &mut rng1, true).unwrap();
    let mut rng2 = ChaCha8Rng::seed_from_u64(77);
    let batch2 = generate_batch(&policy, 50, &d0, 29, &mut rng2, true).unwrap();
    assert_eq!(batch1.len(), 50);
    for (a, b) in batch1.iter().zip(&batch2) {
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.trace, b.trace);
    }
    // Both seed types appear under this distribution.
    let types: std::collections::HashSet<usize> =
        batch1.iter().map(|o| o.graph.vertex_type(0)).collect();
    assert_eq!(types.len(), 2);
}

#[test]
fn singleton_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let batch = generate_batch(&AlwaysStop, 1, &point_h(), 29, &mut rng, true).unwrap();
    assert_eq!(batch.len(), 1);
}

#[test]
fn replay_reconstructs_decomposed_molecules() {
    // QM9 types: H=0, C=1, N=2, O=3, F=4. A few hand-built molecules.
    let molecules = vec![
        // Water.
        MolecularGraph::from_parts(vec![3, 0, 0], &[(0, 1, 0), (0, 2, 0)]).unwrap(),
        // Methane.
        MolecularGraph::from_parts(
            vec![1, 0, 0, 0, 0],
            &[(0, 1, 0), (0, 2, 0), (0, 3, 0), (0, 4, 0)],
        )
        .unwrap(),
        // Cyclopropane ring (heavy atoms only for the test's sake).
        MolecularGraph::from_parts(vec![1, 1, 1], &[(0, 1, 0), (1, 2, 0), (0, 2, 0)]).unwrap(),
        // Hydrogen cyanide: H-C#N.
        MolecularGraph::from_parts(vec![0, 1, 2], &[(0, 1, 0), (1, 2, 2)]).unwrap(),
    ];
    let prio = TypePriority::identity(5);
    for g in &molecules {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let ordered = reorder(g, &prio, &mut rng).unwrap();
        let d = decompose(&ordered).unwrap();
        assert_eq!(d.m1.len(), 2 * g.vertex_count() - 1);
        assert_eq!(d.m2.len(), g.vertex_count() - 1);

        let mut replay = ReplayPolicy::new(&d);
        let d0 = SeedDistribution::point(ordered.vertex_type(0), 5);
        let mut gen_rng = ChaCha8Rng::seed_from_u64(0);
        let out = generate(&mut replay, &d0, 29, &mut gen_rng).unwrap();
        assert!(out.complete);
        assert!(replay.exhausted());
        // The replayed construction is the ordered molecule itself.
        assert_eq!(out.graph, ordered);
        assert!(is_isomorphic(&out.graph, g));
    }
}

#[test]
fn estimate_d0_frequencies() {
    let methane = MolecularGraph::from_parts(
        vec![1, 0, 0, 0, 0],
        &[(0, 1, 0), (0, 2, 0), (0, 3, 0), (0, 4, 0)],
    )
    .unwrap();
    let all_methane = vec![methane.clone(); 8];
    let d0 = estimate_d0(&all_methane, 5).unwrap();
    assert_eq!(d0.probabilities(), &[0.0, 1.0, 0.0, 0.0, 0.0]);

    let water = MolecularGraph::from_parts(vec![3, 0, 0], &[(0, 1, 0), (0, 2, 0)]).unwrap();
    let mixed = vec![methane.clone(), water.clone(), methane, water];
    let d0 = estimate_d0(&mixed, 5).unwrap();
    assert_eq!(d0.probabilities()[1], 0.5);
    assert_eq!(d0.probabilities()[3], 0.5);

    assert!(estimate_d0(&[], 5).is_err());
}

#[test]
fn d0_draws_match_estimate() {
    let d0 = SeedDistribution::new(vec![0.1, 0.2, 0.3, 0.4, 0.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws = 100_000;
    let mut counts = [0usize; 5];
    for _ in 0..draws {
        counts[d0.sample(&mut rng)] += 1;
    }
    let tv: f64 = counts
        .iter()
        .zip(d0.probabilities())
        .map(|(&c, &p)| (c as f64 / draws as f64 - p).abs())
        .sum::<f64>()
        / 2.0;
    assert!(tv < 0.01, "total variation {tv}");
}

#[test]
fn module_policy_checks_kinds() {
    let spec = DatasetSpec::qm9();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut make = |preset: &str, kind: ModuleKind| {
        let mut cfg = ModuleConfig::preset(preset).unwrap();
        cfg.state_dim = 8;
        cfg.hidden_state = 6;
        cfg.hidden_out = 6;
        cfg.k_max = 2;
        TrainedModule {
            kind,
            mode: spec.mode,
            preset: None,
            priors: None,
            focus_flag: false,
            model: cfg.init_model(&spec, &mut rng).unwrap(),
        }
    };
    let m1 = make("m1-i", ModuleKind::M1);
    let m2 = make("m2-i", ModuleKind::M2);
    let m3 = make("m3-i", ModuleKind::M3);
    assert!(ModulePolicy::new(&m1, &m2, &m3, &spec, 1.0).is_ok());
    assert!(ModulePolicy::new(&m2, &m2, &m3, &spec, 1.0).is_err());

    // End to end with random weights: connected, within cap, reproducible.
    let policy = ModulePolicy::new(&m1, &m2, &m3, &spec, 1.0).unwrap();
    let d0 = SeedDistribution::new(vec![0.2; 5]).unwrap();
    let mut master = ChaCha8Rng::seed_from_u64(11);
    let batch = generate_batch(&policy, 20, &d0, 12, &mut master, false).unwrap();
    for out in &batch {
        assert!(out.graph.vertex_count() <= 12);
        assert!(out.graph.is_connected());
        if !out.complete {
            assert_eq!(out.graph.vertex_count(), 12);
        }
    }
}

#[test]
fn completion_fraction_is_monotone_in_vmax() {
    // Same models, same seeds, rising cap: the set of complete outcomes
    // can only grow, because each item's decision stream is identical up
    // to the point where a lower cap would have fired.
    let spec = DatasetSpec::qm9();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut make = |preset: &str, kind: ModuleKind, stop_bias: f64| {
        let mut cfg = ModuleConfig::preset(preset).unwrap();
        cfg.state_dim = 6;
        cfg.hidden_state = 4;
        cfg.hidden_out = 4;
        cfg.k_max = 2;
        let mut model = cfg.init_model(&spec, &mut rng).unwrap();
        if stop_bias != 0.0 {
            model.output_mlp.b2[0] += stop_bias;
        }
        TrainedModule {
            kind,
            mode: spec.mode,
            preset: None,
            priors: None,
            focus_flag: false,
            model,
        }
    };
    // Bias the stop logit so natural sizes spread across the cap range.
    let m1 = make("m1-i", ModuleKind::M1, 1.6);
    let m2 = make("m2-i", ModuleKind::M2, 0.0);
    // Bias linking toward "disconnected" to keep the graphs sparse.
    let m3 = make("m3-i", ModuleKind::M3, 4.0);
    let policy = ModulePolicy::new(&m1, &m2, &m3, &spec, 1.0).unwrap();
    let d0 = SeedDistribution::new(vec![0.2; 5]).unwrap();

    let mut previous = -1.0;
    for vmax in [29usize, 40, 80, 1000] {
        let mut master = ChaCha8Rng::seed_from_u64(99);
        let batch = generate_batch(&policy, 40, &d0, vmax, &mut master, false).unwrap();
        let fraction =
            batch.iter().filter(|o| o.complete).count() as f64 / batch.len() as f64;
        assert!(
            fraction >= previous,
            "complete fraction fell from {previous} to {fraction} at vmax {vmax}"
        );
        previous = fraction;
    }
    assert!(previous > 0.0);
}
