//! Parser robustness and round trips.

mod common;

use cpds::parse::{parse_automaton, parse_model, parse_stack, render_model, render_stack, ModelFile};
use proptest::prelude::*;

proptest! {
    #[test]
    fn arbitrary_text_never_panics(s in "\\PC{0,200}") {
        let _ = parse_model(&s);
    }

    #[test]
    fn model_like_text_never_panics(lines in prop::collection::vec(
        "(order|alphabet|init|target|rule|alt|linkorder|guard|cpush|push|pop|collapse|rew|[a-d]|p[0-3]|[0-9]|\\[|\\]|\\{|\\}|,|=|\\^|\\(|\\)| )*",
        0..8,
    )) {
        let text = lines.join("\n");
        if let Ok(f) = parse_model(&text) {
            let _ = parse_automaton(&text, &f.model);
        }
    }

    #[test]
    fn random_models_round_trip(seed in 0u64..10_000) {
        let mut rng = common::rng(seed);
        let model = common::random_model(&mut rng, common::Shape::SUITE);
        let init = common::random_seeds(&mut rng, &model, 1, 6).pop();
        let f = ModelFile { model, init, targets: Vec::new() };
        let text = render_model(&f);
        let back = parse_model(&text).unwrap();
        prop_assert_eq!(render_model(&back), text);
        let w = &f.init.as_ref().unwrap().stack;
        let rendered = render_stack(w, &f.model.alphabet);
        prop_assert_eq!(&parse_stack(&rendered, f.model.order, &f.model.alphabet).unwrap(), w);
    }
}

#[test]
fn empty_alphabet_is_rejected() {
    assert!(parse_model("order 2\nalphabet\n").is_err());
}
