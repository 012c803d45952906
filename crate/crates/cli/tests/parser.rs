use cz_cli::scenario::parse_expression;
use proptest::prelude::*;

const VARS: [&str; 2] = ["x", "y"];

fn expression() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (-5.0f64..5.0).prop_map(|v| format!("{v:.3}")),
        Just("x".to_string()),
        Just("y".to_string()),
        Just("pi".to_string()),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), prop_oneof![Just("+"), Just("-"), Just("*"), Just("/"), Just("^")])
                .prop_map(|(a, b, op)| format!("({a}) {op} ({b})")),
            (inner.clone(), prop_oneof![Just("sin"), Just("cos"), Just("exp"), Just("log"), Just("sqrt"), Just("abs")])
                .prop_map(|(a, f)| format!("{f}({a})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("pow({a}, {b})")),
            inner.prop_map(|a| format!("-{a}")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn arbitrary_text_never_panics(text in "[xy0-9.+*/^()a-z, -]{0,24}") {
        if let Ok(e) = parse_expression(&text, &VARS) {
            match e.try_eval(&[0.3, -1.2]) {
                Ok(v) => prop_assert!(v.is_finite()),
                Err(err) => prop_assert!(err.pos.line >= 1 && err.pos.column >= 1),
            }
        }
    }

    #[test]
    fn printing_and_parsing_is_idempotent(text in expression(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let e = parse_expression(&text, &VARS).unwrap();
        let printed = e.to_string();
        let again = parse_expression(&printed, &VARS).unwrap();
        prop_assert_eq!(again.to_string(), printed.clone());
        let (a, b) = (e.eval(&[x, y]), again.eval(&[x, y]));
        prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()), "{} vs {}: {} {}", text, printed, a, b);
    }
}
