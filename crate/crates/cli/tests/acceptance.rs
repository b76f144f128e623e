//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p conductance-cli --test acceptance`.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use conductance_cli::{aggregate, cli_run, run_trials, AggregateReport, ExperimentSpec};
use conductance_core::graph::{cut_conductance, generate, Cut, Family, Graph, VertexId, VertexSet};
use conductance_core::sim::Outcome;
use conductance_core::spectral::{
    build_spectral, heavy_coefficient_sum, verify_cheeger, verify_mixing, verify_side_trap, verify_subset_trap,
};
use conductance_core::tester::{run_tester_with, RunOptions, RunReport, TesterConfig};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gen(f: Family, seed: u64) -> Graph {
    generate(&f, seed).expect("generator")
}

fn clique_side(g: &Graph, k: u32) -> Cut {
    let side = VertexSet::from_vertices(g.degrees(), (1..=k).map(VertexId)).unwrap();
    Cut::new(g, side).unwrap()
}

fn cheeger_sandwich() -> Check {
    let started = Instant::now();
    let mut graphs = Vec::new();
    graphs.extend((2..=8).map(|n| gen(Family::Complete { n }, 0)));
    graphs.extend((4..=12).map(|n| gen(Family::Cycle { n }, 0)));
    graphs.extend((3..=10).map(|n| gen(Family::Path { n }, 0)));
    graphs.extend((3..=5).map(|k| gen(Family::Dumbbell { k }, 0)));
    graphs.extend((0..5).map(|s| gen(Family::RandomRegular { d: 3, n: 10 }, s)));
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    for g in &graphs {
        let r = verify_cheeger(&build_spectral(g).unwrap(), g).unwrap();
        worst = worst.min((r.gap - r.lower).min(r.upper - r.gap));
        failures += usize::from(!r.pass());
    }
    let elapsed = started.elapsed();
    ensure(
        failures == 0 && elapsed < Duration::from_secs(10),
        format!("{} graphs, {failures} violations, min margin {worst:.3e}, {elapsed:.2?}", graphs.len()),
    )
}

fn trap_over_side() -> Check {
    let started = Instant::now();
    let mut detail = Vec::new();
    let mut ok = true;
    for k in [4u32, 5] {
        let g = gen(Family::Dumbbell { k: k as usize }, 0);
        let bundle = build_spectral(&g).unwrap();
        let r = verify_side_trap(&bundle, &clique_side(&g, k), 50).unwrap();
        ok &= r.all_pass() && r.min_slack() >= -1e-9 && r.rows.0.len() == 51;
        detail.push(format!("dumbbell({k}) min slack {:.3e}", r.min_slack()));
    }
    let elapsed = started.elapsed();
    ensure(ok && elapsed < Duration::from_secs(5), format!("{}, {elapsed:.2?}", detail.join(", ")))
}

fn trap_over_subset() -> Check {
    let mut ok = true;
    let mut regions = 0;
    let mut worst = f64::INFINITY;
    for k in [4u32, 5] {
        let g = gen(Family::Dumbbell { k: k as usize }, 0);
        let bundle = build_spectral(&g).unwrap();
        let cut = clique_side(&g, k);
        for drop in cut.side.iter() {
            let region = cut.side.without(g.degrees(), drop);
            let r = verify_subset_trap(&bundle, &cut, &region, 50).unwrap();
            ok &= r.eta > 0.0 && r.eta < 5.0 / 6.0 && r.all_pass() && r.min_slack() >= -1e-9;
            worst = worst.min(r.min_slack());
            regions += 1;
        }
    }
    ensure(ok, format!("{regions} regions, min slack {worst:.3e}"))
}

/// Random connected growth from a random vertex up to a random size.
fn random_connected_set(g: &Graph, rng: &mut ChaCha8Rng) -> VertexSet {
    let n = g.n();
    let target = rng.random_range(1..n);
    let start = VertexId(rng.random_range(1..=n as u32));
    let mut members = vec![start];
    while members.len() < target {
        let frontier: Vec<VertexId> =
            members.iter().flat_map(|&v| g.neighbors(v)).filter(|w| !members.contains(w)).collect();
        match frontier.choose(rng) {
            Some(&w) => members.push(w),
            None => break,
        }
    }
    VertexSet::from_vertices(g.degrees(), members).unwrap()
}

fn heavy_coefficients() -> Check {
    let fixtures = [
        Family::Dumbbell { k: 3 },
        Family::Dumbbell { k: 4 },
        Family::Dumbbell { k: 6 },
        Family::BarbellPath { k: 4, len: 2 },
        Family::BarbellPath { k: 5, len: 3 },
        Family::Cycle { n: 12 },
        Family::Cycle { n: 16 },
        Family::Path { n: 10 },
    ];
    let graphs: Vec<(Graph, _)> = fixtures
        .iter()
        .map(|f| {
            let g = gen(*f, 0);
            let b = build_spectral(&g).unwrap();
            (g, b)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut cuts = 0;
    let mut attempts = 0;
    let mut worst = f64::INFINITY;
    let mut ok = true;
    while cuts < 50 && attempts < 100_000 {
        attempts += 1;
        let (g, bundle) = &graphs[rng.random_range(0..graphs.len())];
        let mut side = random_connected_set(g, &mut rng);
        if 2 * side.volume() > g.total_volume() {
            side = side.complement(g.degrees());
        }
        if side.is_empty() {
            continue;
        }
        let delta = cut_conductance(g, &side).unwrap();
        if delta >= 1.0 / 3.0 {
            continue;
        }
        let sum = heavy_coefficient_sum(bundle, &side, delta);
        let slack = sum - 5.0 / 6.0 * side.volume() as f64;
        worst = worst.min(slack);
        ok &= slack >= -1e-8;
        cuts += 1;
    }
    ensure(ok && cuts == 50, format!("{cuts} cuts from {attempts} draws, min slack {worst:.3e}"))
}

fn mixing_bound() -> Check {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, g) in [
        ("K16", gen(Family::Complete { n: 16 }, 0)),
        ("3-regular n=32", gen(Family::RandomRegular { d: 3, n: 32 }, 1)),
    ] {
        let bundle = build_spectral(&g).unwrap();
        for ell in [1, 5, 20] {
            let r = verify_mixing(&bundle, ell);
            ok &= r.pass();
            detail.push(format!("{name} l={ell} dev {:.2e} <= {:.2e}", r.max_deviation, r.bound));
        }
    }
    ensure(ok, detail.join("; "))
}

fn conservation(runs: &mut Vec<RunReport>) -> Check {
    let families = [Family::Complete { n: 10 }, Family::Cycle { n: 12 }, Family::Dumbbell { k: 5 }];
    let mut ok = true;
    let mut count = 0;
    for seed in 0..10u64 {
        let g = gen(families[seed as usize % 3], seed);
        let mut c = TesterConfig::new(0.5, 0.5, 100 + seed);
        c.overrides.walks = Some(50_000 + seed);
        c.overrides.ell = Some(25);
        c.overrides.source_constant = Some(2.0);
        let r = run_tester_with(&g, &c, &RunOptions { walk_totals: true, endpoints: true, threads: None }).unwrap();
        let k = r.config.resolved.walks;
        let totals_ok = r.walk_totals.as_ref().unwrap().values().all(|t| t.len() == 26 && t.iter().all(|&x| x == k));
        let ends_ok = r.endpoints.as_ref().unwrap().values().all(|row| row.iter().sum::<u64>() == k);
        ok &= r.conservation_ok && totals_ok && ends_ok && r.walk_totals.as_ref().unwrap().len() == r.sources.len();
        count += r.sources.len();
        runs.push(r);
    }
    ensure(ok, format!("10 runs, {count} sources, every step sums to K"))
}

fn tv_from_oracle(g: &Graph, oracle: &[f64], seed: u64, walks: u64) -> (f64, RunReport) {
    let mut c = TesterConfig::new(0.5, 0.5, seed);
    c.overrides.walks = Some(walks);
    c.overrides.ell = Some(20);
    c.overrides.sources = Some(vec![VertexId(1)]);
    let r = run_tester_with(g, &c, &RunOptions { endpoints: true, ..Default::default() }).unwrap();
    let hist = &r.endpoints.as_ref().unwrap()[&VertexId(1)];
    let tv = 0.5 * hist.iter().zip(oracle).map(|(&c, &p)| (c as f64 / walks as f64 - p).abs()).sum::<f64>();
    (tv, r)
}

fn distributional_fidelity(runs: &mut Vec<RunReport>) -> Check {
    let g = gen(Family::Dumbbell { k: 4 }, 0);
    let oracle = build_spectral(&g).unwrap().walk_distribution(VertexId(1), 20).unwrap();
    let walks = 1_000_000u64;
    let tolerance = 3.0 * (g.n() as f64 / walks as f64).sqrt();
    let mut pilot: Vec<f64> = (0..100).map(|s| tv_from_oracle(&g, &oracle, 10_000 + s, walks).0).collect();
    pilot.sort_by(f64::total_cmp);
    let mut tvs = Vec::new();
    for seed in [1, 2, 3, 4, 5] {
        let (tv, r) = tv_from_oracle(&g, &oracle, seed, walks);
        tvs.push(tv);
        runs.push(r);
    }
    let max = tvs.iter().copied().fold(0.0, f64::max);
    ensure(
        max <= tolerance && pilot[99] <= tolerance,
        format!(
            "max TV {max:.2e} <= {tolerance:.2e}; pilot of 100: median {:.2e}, max {:.2e}",
            pilot[49], pilot[99]
        ),
    )
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run_fixture(name: &str) -> (AggregateReport, Vec<RunReport>, Duration) {
    let text = std::fs::read_to_string(fixture(name)).unwrap();
    let spec: ExperimentSpec = serde_json::from_str(&text).unwrap();
    let g = conductance_cli::load_graph(&spec).unwrap();
    let started = Instant::now();
    let reports = run_trials(&spec, &g).unwrap();
    let elapsed = started.elapsed();
    (aggregate(&reports).unwrap(), reports, elapsed)
}

fn end_to_end(runs: &mut Vec<RunReport>, fixtures: &mut Vec<AggregateReport>) -> Check {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, want_accept) in [("k16.json", true), ("expander64.json", true), ("dumbbell12.json", false)] {
        let (agg, reports, elapsed) = run_fixture(name);
        let hit = if want_accept { agg.accept_fraction } else { agg.reject_fraction };
        ok &= agg.trials == 30 && hit >= 2.0 / 3.0 && elapsed < Duration::from_secs(300);
        detail.push(format!(
            "{name}: {} {}/30 in {elapsed:.1?}",
            if want_accept { "accept" } else { "reject" },
            if want_accept { agg.accept_count } else { agg.reject_count }
        ));
        runs.extend(reports);
        fixtures.push(agg);
    }
    ensure(ok, detail.join("; "))
}

fn accounting(runs: &[RunReport]) -> Check {
    let ok = runs.iter().all(|r| {
        let ell = r.config.resolved.ell;
        r.rounds == ell
            && r.stats.len() == ell as usize
            && r.stats.iter().enumerate().all(|(i, s)| s.round == i as u32 + 1 && !s.halted)
            && r.stats.iter().all(|s| s.messages <= 2 * r.graph.m)
            && r.verdicts.iter().all(|v| v.round == ell)
    });
    let peak = runs
        .iter()
        .map(|r| r.stats.iter().map(|s| s.messages as f64 / (2 * r.graph.m) as f64).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    ensure(ok, format!("{} runs, rounds == ell, peak messages/2m = {peak:.3}", runs.len()))
}

fn congestion(fixtures: &[AggregateReport]) -> Check {
    let g = gen(Family::Complete { n: 2 }, 0);
    let mut c = TesterConfig::new(0.5, 1.0, 0);
    c.overrides.sources = Some(vec![VertexId(1), VertexId(2)]);
    c.overrides.congestion_limit = Some(1.0);
    c.overrides.walks = Some(1000);
    c.overrides.ell = Some(30);
    let r = run_tester_with(&g, &c, &RunOptions::default()).unwrap();
    let last = r.stats.last().unwrap();
    let offenders: Vec<VertexId> =
        r.verdicts.iter().filter(|v| v.outcome == Outcome::AbortedCongestion).map(|v| v.vertex).collect();
    let forced_ok = r.outcome == Outcome::AbortedCongestion
        && !offenders.is_empty()
        && last.halted
        && last.max_edge_tuples as f64 > 1.0
        && r.rounds < 30;
    let aborted: usize = fixtures.iter().map(|a| a.aborted_count).sum();
    let trials: usize = fixtures.iter().map(|a| a.trials).sum();
    ensure(
        forced_ok && aborted == 0,
        format!(
            "K2 limit 1 aborted in round {} at {:?}; default limits: {aborted} aborts in {trials} fixture trials",
            r.rounds,
            offenders.iter().map(|v| v.0).collect::<Vec<_>>()
        ),
    )
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str], threads: &str, tag: &str| -> Vec<Vec<u8>> {
        let out = dir.path().join(format!("{tag}-{threads}.json"));
        let csv = dir.path().join(format!("{tag}-{threads}.csv"));
        let transcript = dir.path().join(format!("{tag}-{threads}.jsonl"));
        let mut argv: Vec<String> = vec!["conductance".into()];
        argv.extend(args.iter().map(|s| s.to_string()));
        argv.extend(["--deterministic", "--threads", threads, "--out"].map(String::from));
        argv.push(out.display().to_string());
        let is_test = args.contains(&"test") || args.iter().any(|a| a.ends_with(".json"));
        if is_test {
            argv.extend(["--csv".to_string(), csv.display().to_string()]);
            argv.extend(["--transcript".to_string(), transcript.display().to_string()]);
        }
        assert_eq!(cli_run(&argv), 0, "{argv:?}");
        let mut files = vec![std::fs::read(&out).unwrap()];
        if is_test {
            files.push(std::fs::read(&csv).unwrap());
            files.push(std::fs::read(&transcript).unwrap());
        }
        files
    };
    let dumbbell = fixture("dumbbell12.json").display().to_string();
    let experiments: Vec<(&str, Vec<&str>)> = vec![
        ("dumbbell12", vec!["--config", &dumbbell]),
        ("regular", vec!["test", "--gen", "regular:3:20", "--alpha", "0.4", "--epsilon", "0.5", "--length", "40", "--trials", "6", "--seed", "9"]),
        ("lemmas", vec!["verify-lemmas", "--gen", "dumbbell:5", "--eta", "0.3"]),
        ("mixing", vec!["mixing", "--gen", "regular:3:32", "--graph-seed", "1"]),
    ];
    let mut ok = true;
    let mut bytes = 0;
    for (tag, args) in &experiments {
        let one = run(args, "1", tag);
        let four = run(args, "4", tag);
        ok &= one == four;
        bytes += one.iter().map(Vec::len).sum::<usize>();
    }
    ensure(ok, format!("{} experiments, {bytes} bytes identical across 1 and 4 threads", experiments.len()))
}

fn main() {
    let mut runs = Vec::new();
    let mut fixtures = Vec::new();
    let mut failed = 0;
    let mut report = |id: &str, name: &str, result: Check| {
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {id:<4} {name}: {detail}");
    };
    report("C1", "Cheeger sandwich", cheeger_sandwich());
    report("C2", "trap bound over the whole side", trap_over_side());
    report("C3", "trap bound over a subset", trap_over_subset());
    report("C4", "heavy spectral coefficients", heavy_coefficients());
    report("C5", "pairwise mixing", mixing_bound());
    report("C6", "walk conservation", conservation(&mut runs));
    report("C7", "endpoint distribution", distributional_fidelity(&mut runs));
    report("C8", "end-to-end verdicts", end_to_end(&mut runs, &mut fixtures));
    report("C9", "round and message accounting", accounting(&runs));
    report("C10", "congestion abort", congestion(&fixtures));
    report("C11", "determinism", determinism());
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
