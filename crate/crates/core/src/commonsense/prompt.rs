//! Prompt layout for the inference generator and parsing of its completions.
//!
//! The fine-tuned layout is one field per line with no blank lines, ending
//! with the `Before:` cue:
//!
//! ```text
//! Context: <sentence>
//! Event: <mention text>
//! Before:
//! ```
//!
//! The model continues with the before-sentences, an `After:` line, the
//! after-sentences and the stop token.

use serde::{Deserialize, Serialize};

use super::PromptMode;
use crate::error::{Error, Result};

pub const FEWSHOT_EXEMPLARS: usize = 8;

const FEWSHOT_INSTRUCTION: &str = "For the marked event in each context sentence, list short \
sentences describing what plausibly happened right before it and right after it.";

const MIN_FRAGMENT_CHARS: usize = 3;

/// A worked example for few-shot prompting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub context: String,
    pub event: String,
    pub before: Vec<String>,
    pub after: Vec<String>,
}

fn query_block(context: &str, event: &str) -> String {
    format!("Context: {context}\nEvent: {event}\nBefore:")
}

pub fn format_prompt(
    context: &str,
    event: &str,
    mode: PromptMode,
    exemplars: Option<&[Exemplar]>,
) -> Result<String> {
    if event.is_empty() || !context.contains(event) {
        return Err(Error::EventNotInContext {
            event: event.to_string(),
        });
    }
    match mode {
        PromptMode::Finetuned => Ok(query_block(context, event)),
        PromptMode::Fewshot => {
            let exemplars = exemplars.unwrap_or_default();
            if exemplars.len() != FEWSHOT_EXEMPLARS {
                return Err(Error::ExemplarCount {
                    expected: FEWSHOT_EXEMPLARS,
                    actual: exemplars.len(),
                });
            }
            let mut out = String::from(FEWSHOT_INSTRUCTION);
            out.push('\n');
            for ex in exemplars {
                out.push_str(&query_block(&ex.context, &ex.event));
                out.push(' ');
                out.push_str(&ex.before.join(" "));
                out.push_str("\nAfter: ");
                out.push_str(&ex.after.join(" "));
                out.push_str(" END\n");
            }
            out.push_str(&query_block(context, event));
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedCompletion {
    pub before: Vec<String>,
    pub after: Vec<String>,
    /// No `After:` line was found.
    pub missing_after: bool,
}

/// Split a completion (the text generated after the `Before:` cue) into
/// before- and after-sentences.
pub fn parse_completion(text: &str, k: usize, stop: &str) -> ParsedCompletion {
    let text = match (!stop.is_empty()).then(|| text.find(stop)).flatten() {
        Some(idx) => &text[..idx],
        None => text,
    };

    let mut before_lines = Vec::new();
    let mut after_text: Option<String> = None;
    for line in text.lines() {
        match &mut after_text {
            Some(acc) => {
                acc.push('\n');
                acc.push_str(line);
            }
            None => match line.trim_start().strip_prefix("After:") {
                Some(rest) => after_text = Some(rest.to_string()),
                None => before_lines.push(line),
            },
        }
    }
    let before_text = before_lines.join("\n");
    let before_text = before_text.trim_start();
    let before_text = before_text.strip_prefix("Before:").unwrap_or(before_text);

    ParsedCompletion {
        before: split_sentences(before_text, k),
        missing_after: after_text.is_none(),
        after: after_text.map(|a| split_sentences(&a, k)).unwrap_or_default(),
    }
}

fn split_sentences(text: &str, k: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        let boundary = matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|n| n.is_whitespace());
        if boundary {
            out.push(std::mem::take(&mut current));
        }
    }
    out.push(current);
    out.into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| s.chars().count() >= MIN_FRAGMENT_CHARS)
        .take(k)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LOHAN: &str =
        "Lindsay Lohan checks into rehab at Betty Ford Center , rehires longtime lawyer Shawn Holley";

    #[test]
    fn finetuned_prompt_layout() {
        let p = format_prompt(LOHAN, "rehires", PromptMode::Finetuned, None).unwrap();
        assert_eq!(p, format!("Context: {LOHAN}\nEvent: rehires\nBefore:"));
    }

    #[test]
    fn event_must_occur_in_context() {
        assert!(matches!(
            format_prompt(LOHAN, "flying", PromptMode::Finetuned, None),
            Err(Error::EventNotInContext { .. })
        ));
    }

    fn exemplar(i: usize) -> Exemplar {
        Exemplar {
            context: format!("Someone did thing{i} today ."),
            event: format!("thing{i}"),
            before: vec!["A plan was made.".into(), "People prepared.".into()],
            after: vec!["It was over.".into()],
        }
    }

    #[test]
    fn fewshot_requires_eight_exemplars() {
        let seven: Vec<Exemplar> = (0..7).map(exemplar).collect();
        assert!(matches!(
            format_prompt(LOHAN, "rehires", PromptMode::Fewshot, Some(&seven)),
            Err(Error::ExemplarCount { expected: 8, actual: 7 })
        ));
        assert!(format_prompt(LOHAN, "rehires", PromptMode::Fewshot, None).is_err());
    }

    #[test]
    fn fewshot_layout() {
        let eight: Vec<Exemplar> = (0..8).map(exemplar).collect();
        let p = format_prompt(LOHAN, "rehires", PromptMode::Fewshot, Some(&eight)).unwrap();
        assert!(p.starts_with(FEWSHOT_INSTRUCTION));
        assert_eq!(p.matches(" END\n").count(), 8);
        assert!(p.contains(
            "Context: Someone did thing0 today .\nEvent: thing0\nBefore: A plan was made. People prepared.\nAfter: It was over. END\n"
        ));
        assert!(p.ends_with(&format!("Context: {LOHAN}\nEvent: rehires\nBefore:")));
        assert!(!p.contains("\n\n"));
    }

    #[test]
    fn parses_generated_example() {
        let r = parse_completion(
            " She fired her old lawyer. She needs counsel.\nAfter: He gets a good pay. END",
            5,
            "END",
        );
        assert_eq!(r.before, vec!["She fired her old lawyer.", "She needs counsel."]);
        assert_eq!(r.after, vec!["He gets a good pay."]);
        assert!(!r.missing_after);
    }

    #[test]
    fn truncates_to_k() {
        let section: String = (0..7).map(|i| format!("Sentence number {i}. ")).collect();
        let r = parse_completion(&format!("{section}\nAfter: {section} END"), 5, "END");
        assert_eq!(r.before.len(), 5);
        assert_eq!(r.after.len(), 5);
        assert_eq!(r.before[4], "Sentence number 4.");
    }

    #[test]
    fn empty_completion_flags_missing_after() {
        let r = parse_completion("", 5, "END");
        assert!(r.before.is_empty() && r.after.is_empty());
        assert!(r.missing_after);
    }

    #[test]
    fn missing_after_keeps_before() {
        let r = parse_completion(" He left. She cried!", 5, "END");
        assert_eq!(r.before, vec!["He left.", "She cried!"]);
        assert!(r.missing_after);
    }

    #[test]
    fn drops_short_fragments_and_text_after_stop() {
        let r = parse_completion(" A. A real one.\nAfter: Yes it is. END Context: junk.", 5, "END");
        assert_eq!(r.before, vec!["A real one."]);
        assert_eq!(r.after, vec!["Yes it is."]);
    }

    #[test]
    fn decimal_points_do_not_split() {
        let r = parse_completion(" Prices rose 3.5 percent.\nAfter: Done now. END", 5, "END");
        assert_eq!(r.before, vec!["Prices rose 3.5 percent."]);
    }

    fn sentence() -> impl Strategy<Value = String> {
        prop::collection::vec("[a-zA-Z]{1,8}", 1..6).prop_map(|w| format!("{}.", w.join(" ")))
            .prop_filter("min length, no stop token", |s| {
                s.len() >= MIN_FRAGMENT_CHARS && !s.contains("END")
            })
    }

    proptest! {
        #[test]
        fn completion_round_trip(
            before in prop::collection::vec(sentence(), 0..=5),
            after in prop::collection::vec(sentence(), 0..=5),
        ) {
            let text = format!(" {}\nAfter: {} END", before.join(" "), after.join(" "));
            let r = parse_completion(&text, 5, "END");
            prop_assert_eq!(r.before, before);
            prop_assert_eq!(r.after, after);
            prop_assert!(!r.missing_after);
        }
    }
}
