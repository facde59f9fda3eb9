//! Prompt templates and their rendering.
//!
//! Placeholders are `{name}` tokens in the template. Filling is a single
//! pass over the template, so braces inside substituted text are never
//! re-expanded.

use super::PromptError;
use crate::pipelines::ContextBundle;

pub const MC_TEMPLATE: &str = include_str!("assets/mc_prompt.txt");
pub const GEN_TEMPLATE: &str = include_str!("assets/gen_prompt.txt");
pub const SUMMARIZE_TEMPLATE: &str = include_str!("assets/summarize.txt");
pub const PAGINATE_TEMPLATE: &str = include_str!("assets/paginate.txt");
pub const GIST_TEMPLATE: &str = include_str!("assets/gist.txt");
pub const GIST_STRICT_TEMPLATE: &str = include_str!("assets/gist_strict.txt");
pub const LOOKUP_TEMPLATE: &str = include_str!("assets/lookup.txt");

/// Bumped whenever any template text changes; part of artifact cache keys.
pub const TEMPLATE_VERSION: u32 = 1;

pub const MAX_OPTIONS: usize = 4;
pub const MIN_OPTIONS: usize = 2;

/// Substitutes `{name}` placeholders. Unknown placeholders are left as-is.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + values.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let replacement = after.find('}').and_then(|close| {
            let name = &after[..close];
            values.iter().find(|(k, _)| *k == name).map(|(_, v)| (*v, close))
        });
        match replacement {
            Some((value, close)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Question followed by `N. <option>` lines.
pub fn format_question_and_options(question: &str, options: &[String]) -> String {
    let mut out = question.to_string();
    for (i, option) in options.iter().enumerate() {
        out.push('\n');
        out.push_str(&format!("{}. {}", i + 1, option));
    }
    out
}

pub fn render_mc_prompt(context: &ContextBundle, question: &str, options: &[String]) -> Result<String, PromptError> {
    if options.len() > MAX_OPTIONS {
        return Err(PromptError::TooManyOptions(options.len()));
    }
    if options.len() < MIN_OPTIONS {
        return Err(PromptError::TooFewOptions(options.len()));
    }
    if question.trim().is_empty() {
        return Err(PromptError::EmptyQuestion);
    }
    Ok(fill(
        MC_TEMPLATE,
        &[
            ("context", &context.render()),
            ("questionAndOptions", &format_question_and_options(question, options)),
        ],
    ))
}

pub fn render_gen_prompt(context: &ContextBundle, question: &str) -> Result<String, PromptError> {
    if question.trim().is_empty() {
        return Err(PromptError::EmptyQuestion);
    }
    Ok(fill(
        GEN_TEMPLATE,
        &[("context", &context.render()), ("question", question)],
    ))
}

pub fn render_summary_prompt(children: &[&str], max_words: usize) -> String {
    fill(
        SUMMARIZE_TEMPLATE,
        &[
            ("passages", &children.join("\n\n")),
            ("maxWords", &max_words.to_string()),
        ],
    )
}

/// `sentences[i]` is followed by label `i + 1` in the excerpt when
/// `i + 1` is in `labels`.
pub fn render_pagination_prompt(sentences: &[&str], labels: &[usize]) -> String {
    let mut excerpt = String::new();
    for (i, sentence) in sentences.iter().enumerate() {
        if i > 0 {
            excerpt.push(' ');
        }
        excerpt.push_str(sentence);
        if labels.contains(&(i + 1)) {
            excerpt.push_str(&format!(" <{}>", i + 1));
        }
    }
    let labels = labels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", ");
    fill(PAGINATE_TEMPLATE, &[("excerpt", &excerpt), ("labels", &labels)])
}

pub fn render_gist_prompt(page: &str) -> String {
    fill(GIST_TEMPLATE, &[("page", page)])
}

pub fn render_strict_gist_prompt(page: &str, max_words: usize) -> String {
    fill(
        GIST_STRICT_TEMPLATE,
        &[("page", page), ("maxWords", &max_words.to_string())],
    )
}

/// Gists are tagged `<Page N>` with 1-based page numbers.
pub fn render_lookup_prompt(gists: &[&str], question: &str, min_pages: usize, max_pages: usize) -> String {
    let gists = gists
        .iter()
        .enumerate()
        .map(|(i, g)| format!("<Page {}>\n{}", i + 1, g))
        .collect::<Vec<_>>()
        .join("\n\n");
    fill(
        LOOKUP_TEMPLATE,
        &[
            ("gists", &gists),
            ("question", question),
            ("minPages", &min_pages.to_string()),
            ("maxPages", &max_pages.to_string()),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipelines::{BlockOrigin, BlockSource, ContextBlock, Strategy};

    fn bundle(texts: &[&str]) -> ContextBundle {
        ContextBundle::new(
            Strategy::Dos,
            Some(100),
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| ContextBlock {
                    text: t.to_string(),
                    origin: BlockOrigin::OriginalPassage,
                    source: BlockSource::Passage { position: i },
                    token_count: 1,
                    score: None,
                })
                .collect(),
        )
    }

    fn options(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("option {i}")).collect()
    }

    #[test]
    fn fill_is_single_pass() {
        assert_eq!(fill("a {x} b {y} {z}", &[("x", "{y}"), ("y", "2")]), "a {y} b 2 {z}");
        assert_eq!(fill("{unclosed", &[("unclosed", "!")]), "{unclosed");
    }

    #[test]
    fn option_count_limits() {
        let b = bundle(&[]);
        assert_eq!(
            render_mc_prompt(&b, "q", &options(5)),
            Err(PromptError::TooManyOptions(5))
        );
        assert_eq!(
            render_mc_prompt(&b, "q", &options(1)),
            Err(PromptError::TooFewOptions(1))
        );
        assert!(render_mc_prompt(&b, "q", &options(2)).is_ok());
    }

    #[test]
    fn empty_context_keeps_markers() {
        let p = render_mc_prompt(&bundle(&[]), "Why?", &options(4)).unwrap();
        assert!(p.starts_with("[Start of Context]:\n\n\n\n[End of Context]"));
        let lines: Vec<&str> = p.lines().collect();
        let first = lines.iter().position(|l| *l == "1. option 1").unwrap();
        assert_eq!(
            &lines[first..first + 4],
            &["1. option 1", "2. option 2", "3. option 3", "4. option 4"]
        );
    }

    #[test]
    fn blocks_joined_by_blank_line() {
        let p = render_gen_prompt(&bundle(&["First block.", "Second block."]), "Who?").unwrap();
        assert!(p.contains("[Start of Context]:\n\nFirst block.\n\nSecond block.\n\n[End of Context]"));
    }

    #[test]
    fn empty_question_rejected() {
        assert_eq!(
            render_gen_prompt(&bundle(&["x"]), "  "),
            Err(PromptError::EmptyQuestion)
        );
    }

    #[test]
    fn authored_templates_have_no_leftover_placeholders() {
        let rendered = [
            render_summary_prompt(&["a", "b"], 100),
            render_pagination_prompt(&["A.", "B.", "C."], &[2, 3]),
            render_gist_prompt("page"),
            render_strict_gist_prompt("page", 5),
            render_lookup_prompt(&["g1", "g2"], "q?", 1, 6),
        ];
        for r in rendered {
            assert!(!r.contains('{'), "{r}");
        }
    }

    #[test]
    fn pagination_labels_follow_sentences() {
        let p = render_pagination_prompt(&["A.", "B.", "C."], &[2, 3]);
        assert!(p.contains("A. B. <2> C. <3>"));
        assert!(p.ends_with("Candidate labels: 2, 3"));
    }
}
