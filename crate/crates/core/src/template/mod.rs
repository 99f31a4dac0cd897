//! Log template extraction: normalize raw messages into a small stable
//! set of template ids.
//!
//! Stage one ([`preprocess`]) lowercases, tokenizes, masks obvious
//! variables (numbers, addresses, ids, paths) behind a wildcard, and
//! stems light suffixes. Stage two ([`TemplateTree`]) arranges the
//! masked tokens in a frequency-ordered prefix tree whose leaf-count
//! pruning absorbs variables the masks missed. Lookups walk the tree in
//! time proportional to the message length, independent of how many
//! templates exist.

mod preprocess;
mod tree;

pub use preprocess::{preprocess, Preprocessed, WILDCARD};
pub use tree::{token_frequencies, Template, TemplateId, TemplateTree, EMPTY_TEMPLATE_ID};

#[cfg(test)]
mod property_tests {
    use super::*;
    use proptest::prelude::*;

    /// A message pattern with fixed words and variable slots.
    #[derive(Debug, Clone)]
    struct Pattern {
        words: Vec<&'static str>,
        variable_slots: Vec<usize>,
    }

    const FIXED: [&str; 12] = [
        "connect", "retry", "disk", "queue", "link", "worker", "timeout", "flush", "cache",
        "node", "session", "drop",
    ];

    fn pattern_strategy() -> impl Strategy<Value = Pattern> {
        (
            proptest::collection::vec(0usize..FIXED.len(), 2..5),
            proptest::collection::vec(any::<bool>(), 2..5),
        )
            .prop_map(|(indices, slots)| {
                let words: Vec<&'static str> = indices.iter().map(|&i| FIXED[i]).collect();
                let variable_slots = slots
                    .iter()
                    .take(words.len())
                    .enumerate()
                    .filter_map(|(i, &v)| v.then_some(i))
                    .collect();
                Pattern {
                    words,
                    variable_slots,
                }
            })
    }

    fn render(pattern: &Pattern, values: &[u32]) -> String {
        let mut out: Vec<String> = pattern.words.iter().map(|w| w.to_string()).collect();
        for (slot, value) in pattern.variable_slots.iter().zip(values) {
            out.insert(*slot, format!("{value}"));
        }
        out.join(" ")
    }

    proptest! {
        /// Messages from the same pattern always share a template id, no
        /// matter which variable values they carry, and replaying any
        /// training message returns its own id.
        #[test]
        fn same_pattern_same_template(
            patterns in proptest::collection::vec(pattern_strategy(), 1..6),
            values in proptest::collection::vec(any::<u32>(), 24),
        ) {
            let mut messages = Vec::new();
            let mut pattern_of = Vec::new();
            let mut value_cursor = values.iter().cycle();
            for (pi, pattern) in patterns.iter().enumerate() {
                for _ in 0..3 {
                    let vals: Vec<u32> = pattern
                        .variable_slots
                        .iter()
                        .map(|_| *value_cursor.next().unwrap())
                        .collect();
                    messages.push(render(pattern, &vals));
                    pattern_of.push(pi);
                }
            }
            let refs: Vec<&str> = messages.iter().map(String::as_str).collect();
            let (tree, ids) = TemplateTree::build(&refs, 50);

            for (i, message) in refs.iter().enumerate() {
                prop_assert_eq!(tree.extract(message), ids[i], "replay of {}", message);
            }
            for i in 0..ids.len() {
                for j in 0..ids.len() {
                    if pattern_of[i] == pattern_of[j] {
                        prop_assert_eq!(
                            ids[i], ids[j],
                            "pattern {} split across ids", pattern_of[i]
                        );
                    }
                }
            }
        }

        /// Pruning never loses messages: supports still add up to the
        /// corpus size and every merged id lands on a surviving template.
        #[test]
        fn prune_conserves_support(
            patterns in proptest::collection::vec(pattern_strategy(), 2..8),
            k in 1usize..6,
        ) {
            let mut messages = Vec::new();
            for (pi, pattern) in patterns.iter().enumerate() {
                for rep in 0..2u32 {
                    let vals: Vec<u32> = pattern
                        .variable_slots
                        .iter()
                        .map(|_| pi as u32 * 100 + rep)
                        .collect();
                    messages.push(render(pattern, &vals));
                }
            }
            let refs: Vec<&str> = messages.iter().map(String::as_str).collect();
            let (tree, ids) = TemplateTree::build(&refs, k);
            let total: u64 = tree.templates().map(|t| t.support).sum();
            prop_assert_eq!(total, refs.len() as u64);
            for id in &ids {
                prop_assert!(tree.template(*id).is_some(), "id {} has no template", id);
            }
        }
    }
}
