use gewu_transport::harness::{decide, HarnessError, LaneLoss, NetHarness, NetProfile, PRESETS};
use gewu_transport::Lane;

#[test]
fn base_latency_when_lossless_and_jitter_free() {
    let p = NetProfile {
        base_latency_ms: 25,
        ..NetProfile::lan()
    };
    let mut h = NetHarness::new(p).unwrap();
    for (i, lane) in [Lane::Control, Lane::Media, Lane::Signaling].into_iter().enumerate() {
        assert_eq!(h.deliver(lane, i, 1000), vec![1025]);
    }
}

fn schedule(seed: u64) -> Vec<(u64, Lane, u32)> {
    let mut h = NetHarness::new(NetProfile::hostile().with_seed(seed)).unwrap();
    for i in 0..300u32 {
        let lane = [Lane::Control, Lane::Media, Lane::Signaling][(i % 3) as usize];
        h.deliver(lane, i, u64::from(i) * 3);
    }
    h.advance(10_000).unwrap().into_iter().map(|f| (f.at, f.lane, f.item)).collect()
}

#[test]
fn same_seed_same_schedule() {
    assert_eq!(schedule(7), schedule(7));
    assert_ne!(schedule(7), schedule(8));
}

#[test]
fn decisions_are_a_function_of_seed_lane_and_index() {
    let p = NetProfile::hostile().with_seed(3);
    // Independent of whatever else was sent before.
    assert_eq!(decide(&p, Lane::Media, 41, 500), decide(&p, Lane::Media, 41, 500));
    let mut h1 = NetHarness::new(p.clone()).unwrap();
    let mut h2 = NetHarness::new(p.clone()).unwrap();
    for i in 0..10 {
        h2.deliver(Lane::Control, i, 0);
    }
    let a: Vec<_> = (0..50).map(|i| h1.deliver(Lane::Media, i, 100).len()).collect();
    let b: Vec<_> = (0..50).map(|i| h2.deliver(Lane::Media, i, 100).len()).collect();
    assert_eq!(a, b);
}

#[test]
fn thirty_percent_loss_within_three_sigma() {
    // n = 1000, p = 0.7: mean 700, sigma ≈ 14.5, so ±3σ ≈ [656, 744].
    for seed in 0..100 {
        let p = NetProfile {
            seed,
            loss_pct: LaneLoss::uniform(30.0),
            ..NetProfile::lan()
        };
        let mut h = NetHarness::new(p).unwrap();
        for i in 0..1000u32 {
            h.deliver(Lane::Media, i, 0);
        }
        let n = h.advance(1_000_000).unwrap().len();
        assert!((650..=750).contains(&n), "seed {seed}: {n}");
    }
}

#[test]
fn fires_in_schedule_order() {
    let mut h = NetHarness::new(NetProfile {
        base_latency_ms: 0,
        ..NetProfile::lan()
    })
    .unwrap();
    h.deliver(Lane::Media, "five", 5);
    h.deliver(Lane::Media, "three", 3);
    assert!(h.advance(0).unwrap().is_empty());
    let order: Vec<_> = h.advance(10).unwrap().into_iter().map(|f| (f.at, f.item)).collect();
    assert_eq!(order, [(3, "three"), (5, "five")]);
}

#[test]
fn backwards_advance_is_a_clock_regression() {
    let mut h: NetHarness<()> = NetHarness::new(NetProfile::lan()).unwrap();
    h.advance(50).unwrap();
    assert_eq!(
        h.advance(49),
        Err(HarnessError::ClockRegression {
            now: 50,
            requested: 49
        })
    );
}

#[test]
fn signaling_lane_is_an_ordered_stream() {
    let mut h = NetHarness::new(NetProfile::hostile().with_seed(11)).unwrap();
    for i in 0..500u32 {
        h.deliver(Lane::Signaling, i, u64::from(i));
    }
    let got: Vec<u32> = h.advance(100_000).unwrap().into_iter().map(|f| f.item).collect();
    assert_eq!(got, (0..500).collect::<Vec<_>>());
}

#[test]
fn hostile_media_reorders_drops_and_duplicates() {
    let mut h = NetHarness::new(NetProfile::hostile().with_seed(5)).unwrap();
    for i in 0..2000u32 {
        h.deliver(Lane::Media, i, u64::from(i) * 10);
    }
    let got: Vec<u32> = h.advance(1_000_000).unwrap().into_iter().map(|f| f.item).collect();
    let s = h.stats(Lane::Media);
    assert!(s.dropped > 0 && s.duplicated > 0 && s.reordered > 0);
    assert!(got.windows(2).any(|w| w[1] < w[0]));
}

#[test]
fn profiles_load_from_config_text() {
    let p: NetProfile = toml::from_str(
        r#"
        seed = 9
        base_latency_ms = 20
        jitter_ms = 10
        loss_pct = { media = 5.0, control = 5.0 }
        "#,
    )
    .unwrap();
    assert_eq!(p.seed, 9);
    assert_eq!(p.loss_pct.media, 5.0);
    assert_eq!(p.loss_pct.signaling, 0.0);
    assert!(!p.direct_path_blocked);
    p.validate().unwrap();
    assert!(toml::from_str::<NetProfile>("lossy = 3").is_err());
    for name in PRESETS {
        assert!(NetProfile::preset(name).is_some());
    }
    let wifi = NetProfile::preset("lossy-wifi").unwrap();
    assert_eq!((wifi.base_latency_ms, wifi.jitter_ms, wifi.loss_pct.media), (20, 10, 5.0));
    let hostile = NetProfile::preset("hostile").unwrap();
    assert_eq!(
        (hostile.loss_pct.media, hostile.reorder_pct, hostile.duplicate_pct, hostile.direct_path_blocked),
        (30.0, 10.0, 5.0, true)
    );
}
