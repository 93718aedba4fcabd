mod common;

use common::instances;
use edgebatch_core::format::{instance_to_json, parse_instance};
use edgebatch_core::{
    block_batch_sizes, latency_budget, min_bandwidth_fraction, LinkQuality, SystemConfig, TaskRequest,
};
use proptest::prelude::*;

fn task(snr: f64, bits: u64, deadline_s: f64, waiting_s: f64) -> TaskRequest {
    TaskRequest {
        id: 1,
        link: LinkQuality::Snr { snr },
        feature_bits: bits,
        deadline_s,
        waiting_s,
        exit_point: 1,
        accuracy_req: None,
    }
}

proptest! {
    #[test]
    fn rho_decreases_in_snr_and_grows_with_bits(snr in 1e-3f64..1e4, bump in 1.001f64..10.0, bits in 1u64..1_000_000, extra in 1u64..1000) {
        let c = SystemConfig::new(2e7, 0.25).unwrap();
        let base = min_bandwidth_fraction(&task(snr, bits, 1.0, 0.0), &c).unwrap();
        prop_assert!(min_bandwidth_fraction(&task(snr * bump, bits, 1.0, 0.0), &c).unwrap() < base);
        prop_assert!(min_bandwidth_fraction(&task(snr, bits + extra, 1.0, 0.0), &c).unwrap() > base);
    }

    #[test]
    fn budget_is_capped_by_the_compute_slot(deadline in 0.01f64..5.0, waiting in 0.0f64..2.0, comm in 0.05f64..1.0, comp in 0.05f64..1.0) {
        let c = SystemConfig::new(1e6, 0.25).unwrap().with_slots(comm, comp).unwrap();
        let b = latency_budget(&task(1.0, 1, deadline, waiting), &c);
        prop_assert!(b <= comp);
        if deadline - waiting - comm >= comp {
            prop_assert_eq!(b, comp);
        }
    }

    #[test]
    fn block_sizes_reproduce_exit_counts(exits in prop::collection::vec(1usize..=5, 0..40)) {
        let sizes = block_batch_sizes(&exits, 5).unwrap();
        prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
        for d in 1..=5 {
            let next = if d == 5 { 0 } else { sizes[d] };
            prop_assert_eq!(sizes[d - 1] - next, exits.iter().filter(|&&e| e == d).count());
        }
    }

    #[test]
    fn instance_files_round_trip(inst in instances(8, 1..=4)) {
        let json = instance_to_json(&inst);
        let back = parse_instance(&json).unwrap();
        prop_assert_eq!(back.tasks(), inst.tasks());
        prop_assert_eq!(back.config(), inst.config());
        prop_assert_eq!(back.profile(), inst.profile());
        prop_assert_eq!(instance_to_json(&back), json);
    }
}

#[test]
fn golden_instance_parses() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/formats/instance.example.json")).unwrap();
    let inst = parse_instance(&text).unwrap();
    assert_eq!(inst.len(), 4);
    assert_eq!(edgebatch_core::solve_p2_optimal(&inst).0.selected_ids, vec![1, 2]);
}
