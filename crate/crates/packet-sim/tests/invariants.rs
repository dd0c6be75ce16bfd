use proptest::prelude::*;
use redlab::RedParams;
use redlab_sim::{run_simulation, FlowSpec, QueuePolicy, SimConfig, TcpTuning, Topology, Traffic};

fn policy() -> impl Strategy<Value = QueuePolicy> {
    prop_oneof![
        (
            5.0..60.0f64,
            1.2..3.0f64,
            0.02..0.5f64,
            prop_oneof![Just(0.002), Just(1.0), 0.01..0.2f64]
        )
            .prop_map(|(b_min, ratio, p_max, w_q)| QueuePolicy::Red {
                params: RedParams {
                    b_min,
                    b_max: b_min * ratio,
                    p_max,
                    ..RedParams::default()
                },
                w_q,
            }),
        (1u32..40).prop_map(|q_th| QueuePolicy::Threshold { q_th }),
        Just(QueuePolicy::DropTail),
    ]
}

fn flow() -> impl Strategy<Value = FlowSpec> {
    (
        prop_oneof![
            Just(Traffic::Compound),
            Just(Traffic::Reno),
            Just(Traffic::Cubic),
            Just(Traffic::Udp),
            Just(Traffic::Http)
        ],
        0.5e6..8e6f64,
        0.005..0.2f64,
        0.0..1.0f64,
        prop::option::of(20_000u64..400_000),
    )
        .prop_map(|(protocol, access_rate, rtt, start_time, bytes)| FlowSpec {
            protocol,
            access_rate,
            rtt_propagation: rtt,
            start_time,
            bytes_to_send: if protocol == Traffic::Http { Some(5000) } else { bytes },
        })
}

fn config() -> impl Strategy<Value = SimConfig> {
    (
        prop_oneof![Just(Topology::Dumbbell), Just(Topology::ParkingLot)],
        1e6..10e6f64,
        5u32..300,
        policy(),
        prop::collection::vec(flow(), 1..7),
        2.0..6.0f64,
        any::<u64>(),
        any::<bool>(),
    )
        .prop_map(
            |(topology, capacity, buffer, queue_policy, flows, duration, seed, slow_start)| SimConfig {
                topology,
                bottleneck_capacity: capacity,
                buffer,
                packet_size: 1500,
                flows,
                queue_policy,
                duration,
                seed,
                sample_interval: 0.1,
                tcp: TcpTuning {
                    slow_start,
                    ..TcpTuning::default()
                },
                measure_from: None,
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn packets_are_conserved_at_every_queue(cfg in config()) {
        let m = run_simulation(&cfg).unwrap();
        for (l, link) in m.links.iter().enumerate() {
            prop_assert!(link.is_conserved(), "link {l}: {link:?}");
            prop_assert!(link.max_queue <= cfg.buffer);
        }
    }

    #[test]
    fn identical_inputs_give_identical_metrics(cfg in config()) {
        let a = run_simulation(&cfg).unwrap();
        let b = run_simulation(&cfg).unwrap();
        prop_assert!(a == b);
    }

    #[test]
    fn threshold_queue_never_exceeds_its_threshold(cfg in config(), q_th in 1u32..30) {
        let cfg = SimConfig { queue_policy: QueuePolicy::Threshold { q_th }, ..cfg };
        let m = run_simulation(&cfg).unwrap();
        prop_assert!(m.max_queue() <= q_th, "max {} > {q_th}", m.max_queue());
    }

    #[test]
    fn utilization_and_loss_are_bounded(cfg in config()) {
        let m = run_simulation(&cfg).unwrap();
        for l in 0..m.links.len() {
            for (_, u) in m.utilization_series(l) {
                prop_assert!((0.0..=100.0 + 1e-9).contains(&u), "utilization {u}");
            }
        }
        let loss = m.loss_pct();
        prop_assert!((0.0..=100.0).contains(&loss));
        let interval_drops: u64 = m.intervals.iter().map(|s| s.drops).sum();
        prop_assert_eq!(interval_drops, m.drops());
    }
}
