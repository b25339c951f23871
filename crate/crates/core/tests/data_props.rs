use admercs::data::{normalize_minmax, read_csv, write_csv, Column, LoadOptions};
use admercs::Dataset;
use proptest::prelude::*;

/// CSV text with `n_num` numeric columns, one nominal column and a 0/1 label.
fn csv_strategy() -> impl Strategy<Value = String> {
    (1usize..40, 1usize..4).prop_flat_map(|(rows, n_num)| {
        let row = (
            prop::collection::vec(prop_oneof![-1e6f64..1e6, -1.0f64..1.0, Just(0.0)], n_num),
            prop::sample::select(vec!["red", "green", "blue", "a b", "with,comma"]),
            any::<bool>(),
        );
        prop::collection::vec(row, rows).prop_map(move |rows| {
            let mut text: Vec<String> = vec![{
                let mut h: Vec<String> = (0..n_num).map(|j| format!("x{j}")).collect();
                h.push("colour".into());
                h.push("label".into());
                h.join(",")
            }];
            for (nums, cat, label) in rows {
                let mut cells: Vec<String> = nums.iter().map(|v| v.to_string()).collect();
                cells.push(if cat.contains(',') { format!("\"{cat}\"") } else { cat.to_string() });
                cells.push(if label { "1".into() } else { "0".into() });
                text.push(cells.join(","));
            }
            text.join("\n")
        })
    })
}

fn load(text: &[u8]) -> Dataset {
    read_csv(text, &LoadOptions::with_label("label")).unwrap()
}

proptest! {
    #[test]
    fn load_save_load_round_trip(text in csv_strategy()) {
        let first = load(text.as_bytes());
        let mut buf = Vec::new();
        write_csv(&first, &mut buf).unwrap();
        let second = load(&buf);
        prop_assert_eq!(&first, &second);
        let mut again = Vec::new();
        write_csv(&second, &mut again).unwrap();
        prop_assert_eq!(buf, again);
    }

    #[test]
    fn normalize_is_idempotent_and_bounded(text in csv_strategy()) {
        let d = load(text.as_bytes());
        let once = normalize_minmax(&d);
        let twice = normalize_minmax(&once);
        for j in 0..d.n_attributes() {
            match (once.column(j), twice.column(j)) {
                (Column::Numeric(a), Column::Numeric(b)) => {
                    for (x, y) in a.iter().zip(b) {
                        prop_assert!((0.0..=1.0).contains(x));
                        prop_assert!((x - y).abs() < 1e-12);
                    }
                }
                (Column::Nominal(a), Column::Nominal(b)) => prop_assert_eq!(a, b),
                _ => prop_assert!(false, "kind changed"),
            }
        }
        prop_assert_eq!(once.labels(), d.labels());
    }
}

#[test]
fn kinds_are_inferred() {
    let d = load(b"a,b,label\n1.5,x,0\n2,y,1\n");
    assert!(d.attribute(0).is_numeric());
    assert!(!d.attribute(1).is_numeric());
    assert_eq!(d.labels(), Some(&[false, true][..]));
}

#[test]
fn missing_cells_are_rejected() {
    let opts = LoadOptions::default();
    assert!(read_csv::<f64, _>(&b"a,b\n1,\n2,3\n"[..], &opts).is_err());
    assert!(read_csv::<f64, _>(&b"a,b\n1,NaN\n2,3\n"[..], &opts).is_err());
    assert!(read_csv::<f64, _>(&b"a,b\n1\n"[..], &opts).is_err());
}
