use proptest::prelude::*;

use gi_core::mutation::{mutate_classic, mutate_swap};
use gi_core::patch::validate;
use gi_core::{apply, crossover, EditOp, Patch, RngStream, SourceUnit};

fn line() -> impl Strategy<Value = String> {
    prop_oneof![
        3 => ("[ ]{0,6}", "[a-z][a-z0-9 =+()]{0,12}").prop_map(|(i, s)| format!("{i}{s}")),
        1 => "[ ]{0,4}".prop_map(|s| s),
        1 => ("[ ]{0,4}", "[a-z ]{0,8}").prop_map(|(i, s)| format!("{i}# {s}")),
    ]
}

fn program() -> impl Strategy<Value = String> {
    (prop::collection::vec(line(), 0..14), any::<bool>()).prop_map(|(lines, trailing)| {
        let mut text = lines.join("\n");
        if trailing {
            text.push('\n');
        }
        text
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn spans_cover_exactly_the_statement_lines(text in program()) {
        let unit = SourceUnit::python(&text);
        let expected: Vec<&str> = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .collect();
        let got: Vec<&str> = (0..unit.len()).map(|i| unit.line(i)).collect();
        prop_assert_eq!(got, expected);
        for w in unit.spans().windows(2) {
            prop_assert!(w[0].end < w[1].start);
        }
    }

    #[test]
    fn classic_mutants_always_apply(text in program(), seed in any::<u64>(), steps in 1usize..8) {
        let unit = SourceUnit::python(&text);
        prop_assume!(!unit.is_empty());
        let mut rng = RngStream::new(seed, "props");
        let mut patch = Patch::identity(&unit);
        for _ in 0..steps {
            let (_, edit) = mutate_classic(&mut rng, &unit).unwrap();
            patch.edits.push(edit);
        }
        prop_assert!(validate(&unit, &patch).is_ok());
        prop_assert!(apply(&unit, &patch).is_ok());
    }

    #[test]
    fn swap_never_pairs_a_line_with_itself(text in program(), seed in any::<u64>()) {
        let unit = SourceUnit::python(&text);
        prop_assume!(unit.len() >= 2);
        match mutate_swap(&mut RngStream::new(seed, "swap"), &unit).unwrap() {
            EditOp::Swap { a, b } => prop_assert!(a < b && b < unit.len()),
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn crossover_children_are_prefix_plus_suffix(text in program(), seed in any::<u64>(), la in 0usize..5, lb in 0usize..5) {
        let unit = SourceUnit::python(&text);
        prop_assume!(!unit.is_empty());
        let mut rng = RngStream::new(seed, "xo");
        let mut make = |n: usize| {
            let mut p = Patch::identity(&unit);
            for _ in 0..n {
                p.edits.push(mutate_classic(&mut rng, &unit).unwrap().1);
            }
            p
        };
        let (a, b) = (make(la), make(lb));
        let child = crossover(&a, &b, &mut rng).unwrap();
        let ok = (0..=a.len()).any(|i| (0..=b.len()).any(|j| {
            let mut edits = a.edits[..i].to_vec();
            edits.extend_from_slice(&b.edits[j..]);
            edits == child.edits
        }));
        prop_assert!(ok);
        prop_assert!(apply(&unit, &child).is_ok());
    }

    #[test]
    fn patch_json_round_trips(text in program(), seed in any::<u64>(), n in 0usize..6) {
        let unit = SourceUnit::python(&text);
        prop_assume!(!unit.is_empty());
        let mut rng = RngStream::new(seed, "json");
        let mut patch = Patch::identity(&unit);
        for _ in 0..n {
            patch.edits.push(mutate_classic(&mut rng, &unit).unwrap().1);
        }
        let back = Patch::from_json(&patch.to_json()).unwrap();
        prop_assert_eq!(&back, &patch);
        prop_assert_eq!(apply(&unit, &back).unwrap(), apply(&unit, &patch).unwrap());
    }
}

#[test]
fn streams_are_reproducible_and_independent() {
    use gi_core::Draw;
    let draws = |seed, id: &str| {
        let mut r = RngStream::new(seed, id);
        (0..32).map(|_| r.below(1000)).collect::<Vec<_>>()
    };
    assert_eq!(draws(7, "a"), draws(7, "a"));
    assert_ne!(draws(7, "a"), draws(7, "b"));
    assert_ne!(draws(7, "a"), draws(8, "a"));
}
