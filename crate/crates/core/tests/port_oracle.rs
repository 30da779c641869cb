mod common;

use common::oracle::{engine, timeline, tiny_instance};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn engine_matches_brute_force_timeline(seed in any::<u64>()) {
        let (oracle, port, arrivals) = tiny_instance(seed);
        prop_assert_eq!(engine(port, &arrivals), timeline(&oracle, &arrivals));
    }
}

#[test]
fn same_instant_arrivals_keep_slice_order() {
    use tsnsim_core::switch::{PortConfig, Selection};
    use tsnsim_core::traffic::Frame;
    let arrivals: Vec<(u64, Frame)> = (0..4).map(|i| (100, Frame::with_wire_size(0, i, 6, 200, 0))).collect();
    let port = PortConfig {
        selection: Selection::Spq,
        ..PortConfig::default()
    };
    let seqs: Vec<u64> = engine(port, &arrivals).iter().map(|d| d.seq).collect();
    assert_eq!(seqs, [0, 1, 2, 3]);
}
