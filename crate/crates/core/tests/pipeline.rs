//! Cross-module integration: stream parsing feeding the fully dynamic
//! engine, with the brute-force oracles checking the output end to end.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hypersparse::fulldyn::BucketArray;
use hypersparse::hypergraph::{gaussian_probes, is_spectral_sparsifier, Hypergraph};
use hypersparse::multigraph::build_associated_graph;
use hypersparse::oracle::DenseLaplacian;
use hypersparse::sparsify::{Mode, SparsifierChain, SparsifyParams};
use hypersparse::stream::{format_stream, parse_stream, UpdateEvent};
use hypersparse::EdgeId;

fn mixed_stream(seed: u64, updates: usize, n: u32) -> Vec<UpdateEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    let mut live: Vec<u64> = Vec::new();
    let mut next = 0u64;
    for _ in 0..updates {
        if live.len() < 8 || rng.gen_bool(0.7) {
            let arity = rng.gen_range(2..=3);
            let mut verts: Vec<u32> = Vec::new();
            while verts.len() < arity {
                let v = rng.gen_range(0..n);
                if !verts.contains(&v) {
                    verts.push(v);
                }
            }
            events.push(UpdateEvent::Insert {
                weight: 2f64.powi(rng.gen_range(0..3)),
                verts,
            });
            live.push(next);
            next += 1;
        } else {
            let idx = rng.gen_range(0..live.len());
            events.push(UpdateEvent::Delete { id: EdgeId(live.swap_remove(idx)) });
        }
    }
    events
}

#[test]
fn stream_roundtrips_and_replays_through_engine() {
    let events = mixed_stream(5, 120, 10);
    let text = format_stream(&events);
    let parsed = parse_stream(&text).expect("own output parses");
    assert_eq!(parsed.len(), events.len());

    let inserts = events.iter().filter(|e| matches!(e, UpdateEvent::Insert { .. })).count();
    let params = SparsifyParams {
        mode: Mode::Practical { scale: 1e6 },
        spanner_k: Some(2),
        ..SparsifyParams::practical(0.75, 4.0, 10)
    };
    let mut engine = BucketArray::new(10, 3, inserts as u64, 10_000, params, 5);
    let probes = gaussian_probes(10, 300, 77);
    for ev in &parsed {
        match ev {
            UpdateEvent::Insert { weight, verts } => {
                engine.insert(verts, *weight).expect("within capacity");
            }
            UpdateEvent::Delete { id } => {
                engine.delete(*id).expect("live edge");
            }
        }
        engine.validate_buckets().expect("bucket invariants");
        let rep = is_spectral_sparsifier(
            &engine.live_hypergraph(),
            &engine.current_sparsifier(),
            0.75,
            &probes,
        );
        assert!(rep.ok, "spectral deviation {} after replayed update", rep.worst_ratio);
    }
}

#[test]
fn chain_output_energy_matches_laplacian_on_rank_two_input() {
    // On a rank-2 instance, both the input and the sparsifier energies are
    // plain Laplacian quadratic forms, so the oracle can bound them exactly.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 12;
    let mut h = Hypergraph::new(n, 2);
    for _ in 0..500 {
        let u = rng.gen_range(0..n as u32);
        let mut v = rng.gen_range(0..n as u32);
        while v == u {
            v = rng.gen_range(0..n as u32);
        }
        h.insert_hyperedge(&[u, v], 2f64.powi(rng.gen_range(0..3))).unwrap();
    }
    let params = SparsifyParams {
        mode: Mode::Practical { scale: 1.5e5 },
        spanner_k: Some(2),
        ..SparsifyParams::practical(0.75, 4.0, n)
    };
    let chain = SparsifierChain::build(&h, &params, 3).expect("valid params");
    let spars = chain.sparsifier();
    let l_in = DenseLaplacian::from_multigraph(&build_associated_graph(&h)).unwrap();
    let l_out = DenseLaplacian::from_multigraph(&build_associated_graph(&spars)).unwrap();
    for x in gaussian_probes(n, 200, 9) {
        let q_in = l_in.quadratic_form(&x);
        let q_out = l_out.quadratic_form(&x);
        assert!((h.energy(&x).unwrap() - q_in).abs() <= 1e-9 * q_in.abs().max(1.0));
        assert!(
            q_in >= (1.0 - 0.75) * q_out - 1e-9 && q_in <= (1.0 + 0.75) * q_out + 1e-9,
            "energy ratio {} out of band",
            q_in / q_out
        );
    }
}

#[test]
fn deletions_to_empty_keep_every_validator_green() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 10;
    let params = SparsifyParams {
        mode: Mode::Practical { scale: 1e6 },
        spanner_k: Some(2),
        ..SparsifyParams::practical(0.75, 4.0, n)
    };
    let mut engine = BucketArray::new(n, 3, 60, 10_000, params, 21);
    let mut live = Vec::new();
    for _ in 0..60 {
        let u = rng.gen_range(0..n as u32);
        let mut v = rng.gen_range(0..n as u32);
        while v == u {
            v = rng.gen_range(0..n as u32);
        }
        live.push(engine.insert(&[u, v], 1.0).unwrap());
    }
    while let Some(id) = live.pop() {
        engine.delete(id).expect("live edge");
        engine.validate_buckets().expect("bucket invariants");
        for (_, chain) in engine.chains() {
            for (_, sub) in chain.classes() {
                for level in sub.levels() {
                    level.bundle.validate_partition().expect("partition invariant");
                    level.bundle.validate_spanners().expect("cluster invariant");
                }
            }
        }
    }
    assert_eq!(engine.m(), 0);
    assert_eq!(engine.current_sparsifier().m(), 0);
}
