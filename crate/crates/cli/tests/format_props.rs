//! Randomized round-trip invariants of the storage formats.

use proptest::prelude::*;
use tvoir_cli::epochs::{
    read_epochs_binary, read_epochs_csv_dir, write_epochs_binary, write_epochs_csv_dir,
};
use tvoir_core::EpochData;

fn arb_epochs() -> impl Strategy<Value = EpochData> {
    (1usize..4, 1usize..4, 2usize..12)
        .prop_flat_map(|(r, m, t)| {
            (
                prop::collection::vec(-1e6f64..1e6, r * m * t),
                Just((r, m, t)),
                0.1f64..1e4,
            )
        })
        .prop_map(|(samples, (r, m, t), fs)| EpochData::new(samples, r, m, t, fs, None).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn binary_container_round_trips_bit_exactly(data in arb_epochs()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("epochs.bin");
        write_epochs_binary(&data, &path).unwrap();
        let back = read_epochs_binary(&path).unwrap();
        prop_assert_eq!(data.raw(), back.raw());
        prop_assert_eq!(data.fs().to_bits(), back.fs().to_bits());
    }

    #[test]
    fn csv_set_round_trips_at_printed_precision(data in arb_epochs()) {
        let dir = tempfile::tempdir().unwrap();
        write_epochs_csv_dir(&data, dir.path()).unwrap();
        let back = read_epochs_csv_dir(dir.path()).unwrap();
        // 17 significant digits reproduce every f64 exactly
        prop_assert_eq!(data.raw(), back.raw());
    }
}
