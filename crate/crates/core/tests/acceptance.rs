//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use alldiff_select::csp::{generate_instance, parse_instance, CspInstance, Family};
use alldiff_select::eval::{baselines, constant_rows, evaluate, penalty, EvalInstance};
use alldiff_select::features::{
    estimate_tightness, extract_features, graph_width, ordering_width, width_of_graph, FeatureSet, FeatureVector,
    PrimalGraph,
};
use alldiff_select::harness::{benchmark, label_matrix, Label, Protocol, RuntimeMatrix};
use alldiff_select::learners::{
    copies_for_cost, duplicate_by_cost, stratified_kfold, train_ensemble, Dataset, LabeledExample,
};
use alldiff_select::solver::{
    propagate_gac_alldiff, solve, RunRecord, SearchLimits, Status, VariantId, OP_COST_SECONDS,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gac_variants() -> Vec<VariantId> {
    VariantId::all().into_iter().filter(|v| !v.is_naive()).collect()
}

/// Values of each variable that appear in some all-different assignment, or
/// `None` if there is no such assignment.
fn supported_values(domains: &[Vec<i64>]) -> Option<Vec<BTreeSet<i64>>> {
    fn rec(domains: &[Vec<i64>], i: usize, cur: &mut Vec<i64>, out: &mut Vec<BTreeSet<i64>>, any: &mut bool) {
        if i == domains.len() {
            *any = true;
            for (s, &v) in out.iter_mut().zip(cur.iter()) {
                s.insert(v);
            }
            return;
        }
        for &v in &domains[i] {
            if !cur.contains(&v) {
                cur.push(v);
                rec(domains, i + 1, cur, out, any);
                cur.pop();
            }
        }
    }
    let mut out = vec![BTreeSet::new(); domains.len()];
    let mut any = false;
    rec(domains, 0, &mut Vec::new(), &mut out, &mut any);
    any.then_some(out)
}

fn criterion_1() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let states = 600;
    let mut wipeouts = 0;
    for s in 0..states {
        let n = rng.gen_range(1..=6);
        let domains: Vec<Vec<i64>> = (0..n)
            .map(|_| {
                let mut d: Vec<i64> = (1..=6).filter(|_| rng.gen_bool(0.5)).collect();
                if d.is_empty() {
                    d.push(rng.gen_range(1..=6));
                }
                d
            })
            .collect();
        let expected = supported_values(&domains);
        if expected.is_none() {
            wipeouts += 1;
        }
        for v in gac_variants() {
            let knobs = v.knobs().unwrap();
            let got = propagate_gac_alldiff(&domains, knobs);
            match (&expected, got) {
                (None, Err(_)) => {}
                (Some(exp), Ok(p)) => {
                    let got: Vec<BTreeSet<i64>> = p.domains.iter().map(|d| d.iter().copied().collect()).collect();
                    ensure(&got == exp, || {
                        format!("state {s} {domains:?} under {v}: {got:?} != {exp:?}")
                    })?;
                }
                (exp, got) => {
                    return Err(format!(
                        "state {s} {domains:?} under {v}: oracle {exp:?}, propagator {got:?}"
                    ))
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{states} states ({wipeouts} infeasible) x 8 knob settings in {:.2?}",
        elapsed
    ))
}

fn mixed_corpus(count: usize, seed: u64) -> Vec<CspInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plan = [
        (Family::PigeonHole, 2, 6),
        (Family::LatinSquare, 3, 6),
        (Family::GraphColouring, 6, 20),
        (Family::RandomBinaryDiseq, 8, 30),
        (Family::RandomTable, 4, 12),
    ];
    (0..count)
        .map(|i| {
            let (f, lo, hi) = plan[i % plan.len()];
            generate_instance(f, rng.gen_range(lo..=hi), i as u64).unwrap()
        })
        .collect()
}

fn criterion_2() -> Result<String, String> {
    let corpus = mixed_corpus(100, 2);
    let limits = SearchLimits::deterministic(1e9).with_node_limit(2_000_000);
    let mut naive_finished = 0;
    for inst in &corpus {
        let gac: Vec<RunRecord> = gac_variants()
            .into_iter()
            .map(|v| solve(inst, v, &limits).record)
            .collect();
        ensure(gac[0].status != Status::Timeout, || {
            format!("{} did not finish", inst.name())
        })?;
        for r in &gac[1..] {
            ensure(r.status == gac[0].status && r.nodes == gac[0].nodes, || {
                format!(
                    "{}: {} gives {:?}/{} nodes, {} gives {:?}/{}",
                    inst.name(),
                    gac[0].variant,
                    gac[0].status,
                    gac[0].nodes,
                    r.variant,
                    r.status,
                    r.nodes
                )
            })?;
        }
        let naive = solve(inst, VariantId::Naive, &limits).record;
        if naive.status != Status::Timeout {
            naive_finished += 1;
            ensure(naive.status == gac[0].status, || {
                format!("{}: naive {:?}, gac {:?}", inst.name(), naive.status, gac[0].status)
            })?;
        }
    }
    Ok(format!(
        "100 instances, GAC status and nodes identical; naive finished {naive_finished} and agrees"
    ))
}

fn criterion_3() -> Result<String, String> {
    let limits = SearchLimits::deterministic(1e9);
    let mut naive_nodes = Vec::new();
    for n in 3..=6 {
        let inst = generate_instance(Family::PigeonHole, n, 0).unwrap();
        for v in gac_variants() {
            let r = solve(&inst, v, &limits).record;
            ensure(r.status == Status::Unsat && r.nodes == 0, || {
                format!("PigeonHole({n}) under {v}: {:?} with {} nodes", r.status, r.nodes)
            })?;
        }
        let r = solve(&inst, VariantId::Naive, &limits).record;
        ensure(r.status == Status::Unsat && r.nodes > 0, || {
            format!("PigeonHole({n}) naive: {:?} with {} nodes", r.status, r.nodes)
        })?;
        naive_nodes.push(r.nodes);
    }
    Ok(format!("GAC 0 nodes for n = 3..6; naive nodes {naive_nodes:?}"))
}

fn criterion_4() -> Result<String, String> {
    let formula = |c: f64| ((1.0 + c.log2().ceil()).clamp(1.0, 13.0)) as u32;
    let listed = [(0.25, 1), (1.0, 1), (2.0, 2), (3.0, 3), (1024.0, 12), (3600.0, 13)];
    let mut notes = Vec::new();
    for (cost, listed_copies) in listed {
        let got = copies_for_cost(cost);
        ensure(got == formula(cost), || {
            format!("cost {cost}: {got} copies, formula gives {}", formula(cost))
        })?;
        if got != listed_copies {
            notes.push(format!("cost {cost}: formula gives {got}, listed {listed_copies}"));
        }
    }
    ensure(copies_for_cost(3600.0) == 13, || "cost 3600 must give 13 copies".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let examples: Vec<LabeledExample> = (0..300)
        .map(|i| LabeledExample {
            name: format!("e{i}"),
            features: FeatureVector::new(FeatureSet::Cheap, 0, vec![0.0; 29], vec![]).unwrap(),
            label: VariantId::DEFAULT,
            cost: rng.gen_range(0.0..1e7),
        })
        .collect();
    let dup = duplicate_by_cost(&Dataset::new(examples));
    for i in 0..300 {
        let c = dup.examples.iter().filter(|e| e.name == format!("e{i}")).count();
        ensure((1..=13).contains(&c), || format!("example e{i} copied {c} times"))?;
    }
    let extra = if notes.is_empty() {
        String::new()
    } else {
        format!("; listed value differs from direct evaluation: {}", notes.join(", "))
    };
    Ok(format!("matches the clamped formula, max copies 13{extra}"))
}

fn criterion_5() -> Result<String, String> {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes = rng.gen_range(1..=9);
        let n = rng.gen_range(classes.max(3)..=1000);
        let mut labels: Vec<usize> = (0..classes).collect();
        labels.extend((classes..n).map(|_| rng.gen_range(0..classes)));
        labels.shuffle(&mut rng);
        let folds = stratified_kfold(&labels, 3, seed).map_err(|e| e.to_string())?;
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort();
        ensure(all == (0..n).collect::<Vec<_>>(), || {
            format!("seed {seed}: folds do not partition")
        })?;
        for c in 0..classes {
            let counts: Vec<usize> = folds
                .iter()
                .map(|f| f.iter().filter(|&&i| labels[i] == c).count())
                .collect();
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            ensure(hi - lo <= 1, || {
                format!("seed {seed} class {c}: fold counts {counts:?}")
            })?;
        }
    }
    Ok("100 seeds, every class balanced within 1 across 3 folds".into())
}

fn random_matrix(rng: &mut ChaCha8Rng, instances: usize, limit: f64) -> RuntimeMatrix {
    let mut cells = Vec::new();
    for i in 0..instances {
        for v in VariantId::all() {
            let timeout = rng.gen_bool(0.25);
            cells.push(RunRecord {
                instance: format!("i{i}"),
                variant: v,
                status: if timeout { Status::Timeout } else { Status::Sat },
                cpu_time: if timeout { limit } else { rng.gen_range(0.0..limit) },
                nodes: rng.gen_range(0..1000),
                op_count: 0,
            });
        }
    }
    RuntimeMatrix::from_cells(
        Protocol {
            runs_per_cell: 1,
            limits: SearchLimits::new(limit),
            op_cost_seconds: OP_COST_SECONDS,
        },
        cells,
    )
    .unwrap()
}

fn criterion_6() -> Result<String, String> {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(&mut rng, 30, 3600.0);
        let names = m.instances().to_vec();
        let base = baselines(&m, &names, seed).map_err(|e| e.to_string())?;
        let (oracle, anti, expectation) = (&base[0], &base[1], &base[4]);
        ensure(oracle.total == 0.0, || {
            format!("seed {seed}: oracle total {}", oracle.total)
        })?;
        let constants = constant_rows(&m, &names).map_err(|e| e.to_string())?;
        let mut rows: Vec<_> = constants.iter().chain(&base).cloned().collect();
        for s in 0..5 {
            let mut r = ChaCha8Rng::seed_from_u64(1000 + s);
            let all = VariantId::all();
            let instances: Vec<EvalInstance> = names
                .iter()
                .map(|n| EvalInstance {
                    name: n.clone(),
                    features: FeatureVector::new(FeatureSet::Cheap, 0, vec![0.0; 29], vec![]).unwrap(),
                    feature_time: 0.0,
                })
                .collect();
            rows.push(
                evaluate("arbitrary", &instances, &m, false, |_| all[r.gen_range(0..9)]).map_err(|e| e.to_string())?,
            );
        }
        for row in &rows {
            ensure(anti.total >= row.total, || {
                format!("seed {seed}: {} beats anti-oracle", row.name)
            })?;
            ensure(row.instances.iter().all(|o| o.penalty >= 0.0), || {
                format!("negative penalty in {}", row.name)
            })?;
        }
        let mean = constants.iter().map(|r| r.total).sum::<f64>() / 9.0;
        ensure(
            (expectation.total - mean).abs() <= 1e-9 * mean.abs().max(1e-300),
            || format!("seed {seed}: expectation {} vs mean {mean}", expectation.total),
        )?;
    }
    // Timeout substitution on a constructed matrix.
    let mut cells = Vec::new();
    for (k, v) in VariantId::all().into_iter().enumerate() {
        let (status, t) = match k {
            3 => (Status::Sat, 100.0),
            5 => (Status::Sat, 250.0),
            _ => (Status::Timeout, 3600.0),
        };
        cells.push(RunRecord {
            instance: "x".into(),
            variant: v,
            status,
            cpu_time: t,
            nodes: 1,
            op_count: 1,
        });
    }
    for (k, v) in VariantId::all().into_iter().enumerate() {
        let expected = match k {
            3 => 0.0,
            5 => 150.0,
            _ => 3600.0 - 100.0,
        };
        let p = penalty(v, &cells, 3600.0);
        ensure(p == expected, || format!("{v}: penalty {p}, expected {expected}"))?;
    }
    Ok("20 random matrices: oracle 0, anti-oracle maximal, expectation exact; timeout rule 3600 - fastest".into())
}

fn brute_force_width(g: &PrimalGraph) -> usize {
    fn permute(order: &mut Vec<usize>, k: usize, g: &PrimalGraph, best: &mut usize) {
        if k == order.len() {
            *best = (*best).min(ordering_width(g, order));
            return;
        }
        for i in k..order.len() {
            order.swap(k, i);
            permute(order, k + 1, g, best);
            order.swap(k, i);
        }
    }
    let mut order: Vec<usize> = (0..g.num_vertices()).collect();
    let mut best = usize::MAX;
    permute(&mut order, 0, g, &mut best);
    if best == usize::MAX {
        0
    } else {
        best
    }
}

fn criterion_7() -> Result<String, String> {
    ensure(
        FeatureSet::Full.len() == 37 && FeatureSet::Full.names().len() == 37,
        || "full set size".into(),
    )?;
    ensure(
        FeatureSet::Cheap.len() == 29 && FeatureSet::Cheap.names().len() == 29,
        || "cheap set size".into(),
    )?;
    for inst in mixed_corpus(15, 7) {
        for set in [FeatureSet::Full, FeatureSet::Cheap] {
            let a = serde_json::to_string(&extract_features(&inst, set, 11).features).unwrap();
            let b = serde_json::to_string(&extract_features(&inst, set, 11).features).unwrap();
            ensure(a == b, || format!("{} {set}: runs differ", inst.name()))?;
            let f = extract_features(&inst, set, 11).features;
            ensure(f.len() == set.len(), || {
                format!("{} {set}: {} values", inst.name(), f.len())
            })?;
        }
    }
    let mut exhaustive = 0;
    for n in 0..=5usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        for mask in 0u32..(1 << pairs.len()) {
            let edges = pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &e)| e);
            let g = PrimalGraph::from_edges(n, edges);
            let bf = brute_force_width(&g);
            ensure(graph_width(&g) == bf, || {
                format!("n={n} mask={mask}: {} vs {bf}", graph_width(&g))
            })?;
            let norm = if n == 0 { 0.0 } else { bf as f64 / n as f64 };
            ensure(width_of_graph(&g) == norm, || {
                format!("n={n} mask={mask}: normalised width")
            })?;
            exhaustive += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..200 {
        let n = 6 + i % 3;
        let p = rng.gen_range(0.1..0.9);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|_| rng.gen_bool(p))
            .collect();
        let g = PrimalGraph::from_edges(n, edges);
        let bf = brute_force_width(&g);
        ensure(graph_width(&g) == bf, || {
            format!("random graph {i} (n={n}): {} vs {bf}", graph_width(&g))
        })?;
        ensure(width_of_graph(&g) == bf as f64 / n as f64, || {
            format!("random graph {i}: normalised width")
        })?;
    }
    Ok(format!(
        "37/29 features, byte-identical reruns; width exact on {exhaustive} small graphs and 200 random graphs"
    ))
}

fn criterion_8() -> Result<String, String> {
    let mut report = Vec::new();
    for d in [2usize, 3, 5] {
        let dom: Vec<String> = (1..=d).map(|v| v.to_string()).collect();
        let text = format!("var a : {0}\nvar b : {0}\ndiseq a b\n", dom.join(" "));
        let inst = parse_instance(&text).unwrap();
        let p = 1.0 / d as f64;
        let sd = (p * (1.0 - p) / 1000.0).sqrt();
        let within = (0..100u64)
            .filter(|&seed| (estimate_tightness(&inst, 0, seed) - p).abs() <= 3.0 * sd)
            .count();
        ensure(within >= 99, || format!("d={d}: only {within}/100 seeds within 3 sd"))?;
        report.push(format!("d={d}: {within}/100"));
    }
    Ok(report.join(", "))
}

fn criterion_9() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut corpus = Vec::new();
    for i in 0..100u64 {
        corpus.push(generate_instance(Family::PigeonHole, rng.gen_range(3..=7), i).unwrap());
        corpus.push(generate_instance(Family::RandomBinaryDiseq, rng.gen_range(10..=40), i).unwrap());
    }
    let limits = SearchLimits::deterministic(60.0);
    let matrix = benchmark(&corpus, &limits, 1, None).map_err(|e| e.to_string())?;
    let labels = label_matrix(&matrix);
    let features: Vec<FeatureVector> = corpus
        .iter()
        .map(|c| extract_features(c, FeatureSet::Full, 0).features)
        .collect();

    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut rng);
    let cut = corpus.len() * 7 / 10;
    let (train_idx, test_idx) = order.split_at(cut);

    let examples: Vec<LabeledExample> = train_idx
        .iter()
        .filter_map(|&i| match labels[i].label {
            Label::Best(v) => Some(LabeledExample {
                name: corpus[i].name().to_string(),
                features: features[i].clone(),
                label: v,
                cost: labels[i].cost,
            }),
            Label::DontKnow => None,
        })
        .collect();
    let naive_labels = examples.iter().filter(|e| e.label.is_naive()).count();
    let model = train_ensemble(&Dataset::new(examples), 3, 9, FeatureSet::Full, true).map_err(|e| e.to_string())?;

    let held_out: Vec<EvalInstance> = test_idx
        .iter()
        .map(|&i| EvalInstance {
            name: corpus[i].name().to_string(),
            features: features[i].clone(),
            feature_time: 0.0,
        })
        .collect();
    let names: Vec<String> = held_out.iter().map(|e| e.name.clone()).collect();
    let ensemble = evaluate("meta-classifier", &held_out, &matrix, false, |e| {
        model.select_variant(&e.features).unwrap()
    })
    .map_err(|e| e.to_string())?;
    let base = baselines(&matrix, &names, 9).map_err(|e| e.to_string())?;
    let (oracle, default) = (&base[0], &base[2]);
    let elapsed = start.elapsed();
    ensure(ensemble.total < default.total, || {
        format!("ensemble {} not below default {}", ensemble.total, default.total)
    })?;
    ensure(ensemble.total >= oracle.total, || {
        format!("ensemble {} below oracle", ensemble.total)
    })?;
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "held-out penalty: ensemble {:.6} s, default {:.6} s, oracle {:.6} s ({} training examples, {naive_labels} naive) in {:.2?}",
        ensemble.total,
        default.total,
        oracle.total,
        cut,
        elapsed
    ))
}

/// Synthetic two-family dataset: a common cheap GAC class and a rare naive
/// class whose misclassification is expensive. Features overlap.
fn synthetic(seed: u64) -> (Vec<LabeledExample>, RuntimeMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gac = VariantId::from_index(5).unwrap();
    let limit = 3600.0;
    let mut examples = Vec::new();
    let mut cells = Vec::new();
    for i in 0..200 {
        let rare = i % 10 == 0;
        let (label, cost) = if rare { (VariantId::Naive, 3000.0) } else { (gac, 1.5) };
        let centre = if rare { 1.0 } else { 0.0 };
        let mut values: Vec<f64> = (0..29).map(|_| rng.gen_range(0.0..1.0)).collect();
        values[0] = centre + rng.gen_range(-1.0..1.0);
        values[1] = centre + rng.gen_range(-1.0..1.0);
        let name = format!("s{i}");
        for v in VariantId::all() {
            cells.push(RunRecord {
                instance: name.clone(),
                variant: v,
                status: Status::Sat,
                cpu_time: if v == label { 1.0 } else { 1.0 + cost },
                nodes: 1,
                op_count: 1,
            });
        }
        examples.push(LabeledExample {
            name,
            features: FeatureVector::new(FeatureSet::Cheap, 0, values, vec![]).unwrap(),
            label,
            cost,
        });
    }
    let matrix = RuntimeMatrix::from_cells(
        Protocol {
            runs_per_cell: 1,
            limits: SearchLimits::new(limit),
            op_cost_seconds: OP_COST_SECONDS,
        },
        cells,
    )
    .unwrap();
    (examples, matrix)
}

fn criterion_10() -> Result<String, String> {
    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in 0..10u64 {
        let (examples, matrix) = synthetic(seed);
        let held_in: Vec<EvalInstance> = examples
            .iter()
            .map(|e| EvalInstance {
                name: e.name.clone(),
                features: e.features.clone(),
                feature_time: 0.0,
            })
            .collect();
        let data = Dataset::new(examples);
        let mut totals = [0.0; 2];
        for (slot, dup) in [false, true].into_iter().enumerate() {
            let model = train_ensemble(&data, 3, seed, FeatureSet::Cheap, dup).map_err(|e| e.to_string())?;
            totals[slot] = evaluate("ensemble", &held_in, &matrix, false, |e| {
                model.select_variant(&e.features).unwrap()
            })
            .map_err(|e| e.to_string())?
            .total;
        }
        if totals[1] <= totals[0] {
            wins += 1;
        }
        detail.push(format!("{:.0}/{:.0}", totals[1], totals[0]));
    }
    ensure(wins >= 8, || {
        format!("duplication no worse in only {wins}/10 seeds ({})", detail.join(" "))
    })?;
    Ok(format!(
        "duplication no worse in {wins}/10 seeds (dup/raw: {})",
        detail.join(" ")
    ))
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("1 GAC oracle equivalence", criterion_1),
        ("2 knob invariance", criterion_2),
        ("3 pigeonhole separation", criterion_3),
        ("4 duplication formula", criterion_4),
        ("5 stratification", criterion_5),
        ("6 penalty algebra", criterion_6),
        ("7 feature determinism and counts", criterion_7),
        ("8 tightness estimator", criterion_8),
        ("9 end-to-end directional check", criterion_9),
        ("10 cost-model directional check", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
