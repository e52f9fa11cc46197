use onetprec_cli::expr::{parse, Arg, Expr, Value};
use proptest::prelude::*;

fn ident() -> impl Strategy<Value = String> {
    "[a-zA-Zνγ_][a-zA-Z0-9_]{0,6}"
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = ident().prop_map(|name| Expr { name, args: Vec::new() });
    leaf.prop_recursive(4, 24, 4, |inner| {
        let value = prop_oneof![
            (-1e6..1e6f64).prop_map(Value::Num),
            (0u32..1000).prop_map(|n| Value::Num(n.into())),
            "[a-zA-Z0-9,.() ]{0,8}".prop_map(Value::Str),
            inner.prop_map(Value::Call),
        ];
        let arg = (prop::option::of(ident()), value).prop_map(|(key, value)| Arg { key, value });
        (ident(), prop::collection::vec(arg, 1..4)).prop_map(|(name, args)| Expr { name, args })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn display_then_parse_is_identity(e in expr()) {
        let text = e.to_string();
        let back = parse(&text).unwrap();
        prop_assert_eq!(&back, &e);
        prop_assert_eq!(back.to_string(), text);
    }

    #[test]
    fn whitespace_is_insignificant(e in expr()) {
        let text = e.to_string();
        let spaced = text.replace(',', " , ").replace('(', " ( ");
        if !text.contains('"') {
            prop_assert_eq!(parse(&spaced).unwrap(), e);
        }
    }

    #[test]
    fn garbage_never_panics(s in "\\PC{0,32}") {
        let _ = parse(&s);
    }
}
