use conductance_core::graph::{generate, Family, VertexId};
use conductance_core::sim::Outcome;
use conductance_core::spectral::build_spectral;
use conductance_core::tester::{run_tester, run_tester_with, RunOptions, TesterConfig};

#[test]
fn endpoint_histogram_tracks_exact_walk() {
    let g = generate(&Family::BarbellPath { k: 4, len: 2 }, 0).unwrap();
    let b = build_spectral(&g).unwrap();
    let walks = 400_000u64;
    for (start, seed) in [(1u32, 1u64), (5, 2), (10, 3)] {
        let exact = b.walk_distribution(VertexId(start), 15).unwrap();
        let mut c = TesterConfig::new(0.5, 0.5, seed);
        c.overrides.walks = Some(walks);
        c.overrides.ell = Some(15);
        c.overrides.sources = Some(vec![VertexId(start)]);
        let r = run_tester_with(&g, &c, &RunOptions { endpoints: true, ..Default::default() }).unwrap();
        let hist = &r.endpoints.unwrap()[&VertexId(start)];
        let tv: f64 = 0.5 * hist.iter().zip(&exact).map(|(&h, &p)| (h as f64 / walks as f64 - p).abs()).sum::<f64>();
        assert!(tv <= 3.0 * (g.n() as f64 / walks as f64).sqrt(), "start {start}: tv {tv}");
    }
}

#[test]
fn rounds_equal_walk_length() {
    let g = generate(&Family::Cycle { n: 9 }, 0).unwrap();
    for ell in [1, 2, 17] {
        let mut c = TesterConfig::new(0.5, 0.5, 4);
        c.overrides.walks = Some(100);
        c.overrides.ell = Some(ell);
        let r = run_tester(&g, &c).unwrap();
        assert_eq!(r.rounds, ell);
        assert_eq!(r.stats.len(), ell as usize);
        assert!(r.stats.iter().all(|s| s.messages <= 2 * g.m()));
        assert!(r.verdicts.iter().all(|v| v.round == ell));
    }
}

#[test]
fn no_sources_means_silence_and_accept() {
    let g = generate(&Family::Dumbbell { k: 5 }, 0).unwrap();
    let mut c = TesterConfig::new(0.5, 0.5, 1);
    c.overrides.source_constant = Some(0.0);
    c.overrides.ell = Some(8);
    let r = run_tester(&g, &c).unwrap();
    assert!(r.sources.is_empty());
    assert!(r.stats.iter().all(|s| s.messages == 0 && s.tuples == 0));
    assert_eq!(r.outcome, Outcome::Accept);
    assert!(r.conservation_ok);
}

#[test]
fn report_round_trips_through_json() {
    let g = generate(&Family::Complete { n: 5 }, 0).unwrap();
    let mut c = TesterConfig::new(0.5, 0.5, 8);
    c.overrides.ell = Some(3);
    let r = run_tester_with(&g, &c, &RunOptions { endpoints: true, walk_totals: true, threads: None }).unwrap();
    let text = serde_json::to_string(&r).unwrap();
    let back: conductance_core::tester::RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
}
