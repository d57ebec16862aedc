use proptest::prelude::*;
use tbrisk::data::{column_stats, read_csv, write_csv, Column, ColumnSpec, CsvOptions, Dataset, Role, Schema};

fn schema() -> Schema {
    Schema::new(vec![
        ColumnSpec::new("id", Role::Identifier),
        ColumnSpec::new("facility", Role::Categorical),
        ColumnSpec::new("weight", Role::Numeric),
        ColumnSpec::new("notified", Role::Date),
        ColumnSpec::new("outcome", Role::Target),
    ])
    .unwrap()
}

fn text() -> impl Strategy<Value = Option<String>> {
    prop_oneof![
        1 => Just(None),
        6 => "[a-zA-Z0-9 ,\"'\n;é-]{1,12}"
            .prop_filter("missing tokens and padded text do not survive", |s| {
                !["NA", "NULL", "null"].contains(&s.as_str())
            })
            .prop_map(Some),
    ]
}

fn table() -> impl Strategy<Value = Dataset> {
    (0usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(text(), n),
            prop::collection::vec(prop::option::weighted(0.85, -1e12f64..1e12), n),
            prop::collection::vec(prop::option::weighted(0.9, -20_000i32..40_000), n),
            prop::collection::vec(prop::option::weighted(0.95, prop::sample::select(vec!["LFU", "Cured"])), n),
        )
            .prop_map(move |(facility, weight, dates, outcome)| {
                let ids: Vec<Option<String>> = (0..n).map(|i| Some(format!("P{i:05}"))).collect();
                Dataset::new(
                    schema(),
                    vec![
                        Column::categorical(&ids),
                        Column::categorical(&facility),
                        Column::numeric(&weight),
                        Column::dates(&dates),
                        Column::categorical(&outcome),
                    ],
                )
                .unwrap()
            })
    })
}

fn decoded(ds: &Dataset) -> Vec<Vec<Option<String>>> {
    ds.columns()
        .map(|(_, c)| (0..ds.n_rows()).map(|r| c.cell_str(r).map(|s| s.into_owned())).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn csv_round_trip(ds in table()) {
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &schema(), &CsvOptions::default()).unwrap();
        prop_assert_eq!(back.n_rows(), ds.n_rows());
        prop_assert_eq!(decoded(&back), decoded(&ds));
        for ((_, a), (_, b)) in back.columns().zip(ds.columns()) {
            prop_assert_eq!(a.missing(), b.missing());
        }
        // Numbers survive bit for bit.
        let (w0, w1) = (back.column("weight").unwrap(), ds.column("weight").unwrap());
        for r in 0..ds.n_rows() {
            prop_assert_eq!(w0.numeric_at(r).map(f64::to_bits), w1.numeric_at(r).map(f64::to_bits));
        }
    }

    #[test]
    fn missing_fraction_matches_independent_count(ds in table()) {
        for (spec, col) in ds.columns() {
            let stats = column_stats(&ds, &spec.name).unwrap();
            let counted = (0..ds.n_rows()).filter(|&r| col.cell_str(r).is_none()).count();
            let expected = if ds.n_rows() == 0 { 0.0 } else { counted as f64 / ds.n_rows() as f64 };
            prop_assert!((0.0..=1.0).contains(&stats.missing_fraction));
            prop_assert_eq!(stats.missing_fraction, expected);
            prop_assert_eq!(stats.missing_count, counted);
        }
    }
}
