use std::collections::VecDeque;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use relex::corpus::{head_word, parse_corpus, split, synth_corpus, write_corpus, Fractions};
use relex::deppath::{build_merge_tree, shortest_path};
use relex::embed::{init_entity_vectors, skipgram_train, SkipGramConfig, UnigramSampler};
use relex::eval::{kmeans, prf, rand_index, Average, ConfusionCounts, LabelCounts, Partition};
use relex::features::{build_dictionary, encode_known, extract_features};
use relex::gradcheck::random_topology;
use relex::net::{chain_forward, tree_forward, LstmParams, TopoNode, Topology};
use relex::train::{score, AdaGradState, Regularization};
use relex::{rng, Dataset, Token};

fn tree_tokens(parents: &[usize]) -> Vec<Token> {
    let mut toks = vec![Token::new("w0", "NN", -1, "root")];
    for (i, &p) in parents.iter().enumerate() {
        toks.push(Token::new(&format!("w{}", i + 1), "NN", (p % (i + 1)) as i64, "dep"));
    }
    toks
}

fn bfs_distance(tokens: &[Token], a: usize, b: usize) -> usize {
    let n = tokens.len();
    let mut adj = vec![Vec::new(); n];
    for (i, t) in tokens.iter().enumerate() {
        if let Some(p) = t.parent() {
            adj[i].push(p);
            adj[p].push(i);
        }
    }
    let mut dist = vec![usize::MAX; n];
    dist[a] = 0;
    let mut queue = VecDeque::from([a]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist[b]
}

fn small_dataset(seed: u64, n: usize) -> Dataset {
    synth_corpus(n, 3, seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn path_length_matches_bfs(parents in prop::collection::vec(0usize..12, 1..12), a in 0usize..12, b in 0usize..12) {
        let toks = tree_tokens(&parents);
        let (a, b) = (a % toks.len(), b % toks.len());
        let path = shortest_path(&toks, a, b).unwrap();
        prop_assert_eq!(path.len(), bfs_distance(&toks, a, b) + 1);
        prop_assert_eq!(path.nodes.iter().filter(|&&t| t == path.lca).count(), 1);
        prop_assert_eq!((path.nodes[0], *path.nodes.last().unwrap()), (a, b));
        let tree = build_merge_tree(&path);
        prop_assert_eq!(tree.leaf_count(), path.len());
        if path.len() >= 2 {
            prop_assert_eq!(tree.internal_count(), path.len() - 1);
        }
    }

    #[test]
    fn rand_index_symmetric_and_relabel_invariant(
        x in prop::collection::vec(0usize..4, 2..30),
        seed in any::<u64>(),
    ) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<usize> = x.iter().map(|_| *[0usize, 1, 2].choose(&mut r).unwrap()).collect();
        let mut relabel: Vec<usize> = (0..4).collect();
        relabel.shuffle(&mut r);
        let x2: Vec<usize> = x.iter().map(|&c| relabel[c] + 10).collect();
        let (px, py) = (Partition::new(x), Partition::new(y));
        let forward = rand_index(&px, &py).unwrap();
        prop_assert_eq!(forward, rand_index(&py, &px).unwrap());
        prop_assert_eq!(forward, rand_index(&Partition::new(x2), &py).unwrap());
        prop_assert!((0.0..=1.0).contains(&forward));
    }

    #[test]
    fn kmeans_inertia_nonincreasing(
        pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 4..40),
        k in 1usize..5,
        seed in any::<u64>(),
    ) {
        let k = k.min(pts.len());
        let km = kmeans(&pts, k, seed, 50).unwrap();
        prop_assert_eq!(km.partition.len(), pts.len());
        for w in km.inertia.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "{:?}", km.inertia);
        }
    }

    #[test]
    fn score_invariant_under_coordinate_permutation(
        v in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0), 1..12),
        seed in any::<u64>(),
    ) {
        let (a, f, b): (Vec<f64>, Vec<f64>, Vec<f64>) =
            v.iter().fold((vec![], vec![], vec![]), |mut acc, &(x, y, z)| {
                acc.0.push(x);
                acc.1.push(y);
                acc.2.push(z);
                acc
            });
        let mut perm: Vec<usize> = (0..a.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let pick = |x: &[f64]| perm.iter().map(|&i| x[i]).collect::<Vec<_>>();
        let s = score(&a, &f, &b).unwrap();
        let t = score(&pick(&a), &pick(&f), &pick(&b)).unwrap();
        prop_assert!((s - t).abs() <= 1e-12 * (1.0 + s.abs()));
    }

    #[test]
    fn lstm_gates_in_range(leaves in 1usize..6, dim in 1usize..8, seed in any::<u64>()) {
        let mut r = rng::seeded(seed);
        let p = LstmParams::random(dim, &mut r);
        let topo = random_topology(&mut r, leaves);
        let inputs: Vec<Vec<f64>> = (0..leaves)
            .map(|i| (0..dim).map(|j| ((i * 7 + j) as f64).sin() * 3.0).collect())
            .collect();
        let fwd = tree_forward(&p, &topo, &inputs).unwrap();
        for s in &fwd.states {
            let unit = |v: &[f64]| v.iter().all(|&x| x > 0.0 && x < 1.0);
            prop_assert!(unit(&s.i) && unit(&s.o) && s.f.iter().all(|f| unit(f)));
            prop_assert!(s.h.iter().chain(&s.u).all(|&x| x > -1.0 && x < 1.0));
            prop_assert!(s.c.iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn single_child_tree_reproduces_chain(len in 1usize..7, dim in 1usize..6, seed in any::<u64>()) {
        let mut r = rng::seeded(seed);
        let p = LstmParams::random(dim, &mut r);
        let xs: Vec<Vec<f64>> = (0..len)
            .map(|i| (0..dim).map(|j| ((i + 3 * j) as f64 * 0.37).cos()).collect())
            .collect();
        let nodes = (0..len)
            .map(|i| TopoNode { children: if i == 0 { vec![] } else { vec![i - 1] }, input: Some(i) })
            .collect();
        let tree = tree_forward(&p, &Topology::new(nodes).unwrap(), &xs).unwrap();
        let chain = chain_forward(&p, &xs).unwrap();
        for (a, b) in tree.states.iter().zip(&chain) {
            prop_assert_eq!(&a.h, &b.h);
            prop_assert_eq!(&a.c, &b.c);
        }
    }

    #[test]
    fn adagrad_rates_nonincreasing(grads in prop::collection::vec(-3.0f64..3.0, 1..30), l2 in any::<bool>()) {
        let reg = if l2 { Regularization::L2 } else { Regularization::L1 };
        let mut state = AdaGradState::new(1);
        let mut p = 0.5;
        let mut last = f64::INFINITY;
        for g in grads {
            state.update(0, &mut p, g, 0.1, 0.01, reg);
            let rate = state.effective_rate(0, 0.1);
            prop_assert!(rate <= last);
            last = rate;
        }
    }

    #[test]
    fn micro_precision_monotone_in_correct(
        e in 0usize..=5, c in 0usize..=5, g in 0usize..=5, e2 in 0usize..=5, c2 in 0usize..=5, g2 in 0usize..=5,
    ) {
        prop_assume!(c <= e.min(g) && c2 <= e2.min(g2));
        let counts = |extra: usize| ConfusionCounts::from_counts([
            ("a", LabelCounts { extracted: e + extra, correct: c + extra, gold: g + extra }),
            ("b", LabelCounts { extracted: e2, correct: c2, gold: g2 }),
        ]).unwrap();
        let before = prf(&counts(0), Average::Micro).precision;
        let after = prf(&counts(1), Average::Micro).precision;
        prop_assert!(after >= before);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn corpus_round_trip(seed in any::<u64>(), n in 1usize..40) {
        let ds = small_dataset(seed, n);
        let mut buf = Vec::new();
        write_corpus(&ds, &mut buf).unwrap();
        let back = parse_corpus(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(&back.instances, &ds.instances);
        for inst in &ds.instances {
            for m in [&inst.m1, &inst.m2] {
                prop_assert!(m.span().contains(&head_word(m, &inst.tokens)));
            }
        }
    }

    #[test]
    fn unstratified_split_partitions(seed in any::<u64>(), n in 3usize..80) {
        let ds = small_dataset(seed, n);
        let (a, b, c) = split(&ds, Fractions::STANDARD, seed, false).unwrap();
        prop_assert_eq!(a.len() + b.len() + c.len(), ds.len());
        let key = |i: &relex::Instance| serde_json::to_string(i).unwrap();
        let mut all: Vec<String> = a.instances.iter().chain(&b.instances).chain(&c.instances).map(key).collect();
        let mut orig: Vec<String> = ds.instances.iter().map(key).collect();
        all.sort();
        orig.sort();
        prop_assert_eq!(all, orig);
    }

    #[test]
    fn held_out_encoding_stays_in_dictionary(seed in any::<u64>()) {
        let ds = small_dataset(seed, 60);
        let (train, held) = ds.instances.split_at(40);
        let mut dict = build_dictionary(train);
        dict.freeze();
        for inst in held {
            let feats = extract_features(inst);
            prop_assert_eq!(&feats, &extract_features(inst));
            let v = encode_known(&feats, &dict);
            prop_assert!(v.indices().iter().all(|&i| i < dict.len()));
            prop_assert!(v.indices().iter().all(|&i| v.value(i) == 1.0));
            prop_assert_eq!(dict.len(), v.dim());
        }
    }

    #[test]
    fn entity_init_ignores_order(seed in any::<u64>()) {
        let ds = small_dataset(seed, 30);
        let sentences: Vec<Vec<&str>> = ds.instances.iter().map(|i| i.surfaces().collect()).collect();
        let cfg = SkipGramConfig { dim: 4, epochs: 1, seed, ..SkipGramConfig::default() };
        let words = skipgram_train(&sentences, cfg).unwrap();
        let mut shuffled = ds.instances.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = init_entity_vectors(&ds, &words, 1);
        let b = init_entity_vectors(&Dataset::from_instances(shuffled), &words, 1);
        prop_assert_eq!(a.len(), b.len());
        for key in a.vocab() {
            let (x, y) = (a.get(key).unwrap(), b.get(key).unwrap());
            prop_assert!(x.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-12));
        }
    }

    #[test]
    fn sampler_stream_is_seeded(counts in prop::collection::vec(1u64..50, 2..10), seed in any::<u64>()) {
        let s = UnigramSampler::new(&counts, 0.75).unwrap();
        prop_assert!((s.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let draw = || s.sample(20, Some(0), &mut rng::seeded(seed)).unwrap();
        let first = draw();
        prop_assert!(!first.contains(&0));
        prop_assert_eq!(first, draw());
    }
}
