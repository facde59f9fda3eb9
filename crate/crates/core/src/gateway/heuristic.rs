//! Extractive offline stand-in for a real LM.
//!
//! Recognizes the repo's prompt templates and answers each with a cheap,
//! deterministic heuristic: first sentences for summaries and gists, the
//! last candidate for pagination, word overlap for lookups and QA. Lookups with no overlap name no
//! pages. Useful
//! for smoke-testing the full pipeline without network access.

use std::collections::HashSet;

use super::{parse_integers, LmProvider, LmRequest, ProviderError, ProviderReply};

pub struct ExtractiveMock {
    id: String,
}

impl Default for ExtractiveMock {
    fn default() -> Self {
        Self {
            id: "extractive-mock".into(),
        }
    }
}

fn section<'a>(prompt: &'a str, start: &str, end: &str) -> &'a str {
    let Some(s) = prompt.find(start) else {
        return "";
    };
    let body = &prompt[s + start.len()..];
    let e = body.find(end).unwrap_or(body.len());
    body[..e].trim()
}

fn first_sentence(text: &str) -> &str {
    let text = text.trim();
    for (i, c) in text.char_indices() {
        if matches!(c, '.' | '!' | '?') {
            let next = i + c.len_utf8();
            if text[next..].starts_with(char::is_whitespace) || next == text.len() {
                return &text[..next];
            }
        }
    }
    text
}

fn content_words(text: &str) -> HashSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.chars().count() >= 4)
        .map(str::to_lowercase)
        .collect()
}

fn overlap(a: &HashSet<String>, b: &str) -> usize {
    content_words(b).intersection(a).count()
}

impl ExtractiveMock {
    fn summarize(prompt: &str) -> String {
        section(prompt, "[Start of Passages]:", "[End of Passages]")
            .split("\n\n")
            .map(first_sentence)
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn paginate(prompt: &str) -> String {
        let labels = prompt
            .rfind("Candidate labels:")
            .map(|i| parse_integers(&prompt[i..]))
            .unwrap_or_default();
        match labels.last() {
            Some(l) => format!("Break point: <{l}>"),
            None => "Break point: none".into(),
        }
    }

    fn gist(prompt: &str) -> String {
        let page = section(prompt, "[Start of Page]:", "[End of Page]");
        let first = first_sentence(page);
        if first.len() < page.len() {
            return first.to_string();
        }
        let words: Vec<&str> = page.split_whitespace().collect();
        words[..words.len().div_ceil(2)].join(" ")
    }

    fn lookup(prompt: &str) -> String {
        let q_at = prompt.rfind("\nQuestion: ").unwrap_or(prompt.len());
        let rest = &prompt[(q_at + "\nQuestion: ".len()).min(prompt.len())..];
        let question = &rest[..rest.find("\n\nWhich pages").unwrap_or(rest.len())];
        let wanted = content_words(question);
        let mut scored: Vec<(usize, usize)> = prompt[..q_at]
            .split("<Page ")
            .skip(1)
            .filter_map(|chunk| {
                let close = chunk.find('>')?;
                let page: usize = chunk[..close].parse().ok()?;
                Some((page, overlap(&wanted, &chunk[close + 1..])))
            })
            .collect();
        scored.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let picked: Vec<usize> = scored.iter().filter(|(_, s)| *s > 0).take(2).map(|(p, _)| *p).collect();
        if picked.is_empty() {
            return "Pages: none".into();
        }
        let list = picked.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", ");
        format!("Pages: {list}")
    }

    fn answer_mc(prompt: &str) -> String {
        let context = section(prompt, "[Start of Context]:", "[End of Context]");
        let question = section(prompt, "[Start of Question]:", "[End of Question]");
        let context_words = content_words(context);
        let mut best = (0, 1);
        for line in question.lines() {
            let Some((num, text)) = line.split_once(". ") else {
                continue;
            };
            let Ok(k) = num.trim().parse::<usize>() else {
                continue;
            };
            let score = overlap(&context_words, text);
            if score > best.0 {
                best = (score, k);
            }
        }
        format!("The context best supports this option. [[{}]]", best.1)
    }

    fn answer_gen(prompt: &str) -> String {
        let context = section(prompt, "[Start of Context]:", "[End of Context]");
        let wanted = content_words(section(prompt, "[Start of Question]:", "[End of Question]"));
        let best = context
            .split(". ")
            .map(|s| (overlap(&wanted, s), s))
            .filter(|(score, _)| *score > 0)
            .max_by_key(|(score, _)| *score);
        match best {
            Some((_, sentence)) => sentence.split_whitespace().take(20).collect::<Vec<_>>().join(" "),
            None => "Not found in context.".into(),
        }
    }
}

impl LmProvider for ExtractiveMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn call(&self, req: &LmRequest) -> Result<ProviderReply, ProviderError> {
        let p = req.prompt.as_str();
        let text = if p.starts_with("[Summarization Task]") {
            Self::summarize(p)
        } else if p.starts_with("[Pagination Task]") {
            Self::paginate(p)
        } else if p.starts_with("[Gist Task]") {
            Self::gist(p)
        } else if p.starts_with("[Lookup Task]") {
            Self::lookup(p)
        } else if p.contains("[[1]] or [[2]]") {
            Self::answer_mc(p)
        } else if p.contains("[Start of Context]") {
            Self::answer_gen(p)
        } else {
            "OK".into()
        };
        Ok(ProviderReply::counted(p, text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::parse_mc_answer;
    use crate::gateway::prompts::*;
    use crate::pipelines::{BlockOrigin, BlockSource, ContextBlock, ContextBundle, Strategy};

    fn ask(prompt: &str) -> String {
        ExtractiveMock::default()
            .call(&LmRequest::greedy("m", prompt, 100))
            .unwrap()
            .text
    }

    fn bundle(text: &str) -> ContextBundle {
        ContextBundle::new(
            Strategy::FullDoc,
            None,
            vec![ContextBlock {
                text: text.into(),
                origin: BlockOrigin::FullDocument,
                source: BlockSource::Document,
                token_count: 1,
                score: None,
            }],
        )
    }

    #[test]
    fn handles_each_template() {
        assert_eq!(
            ask(&render_summary_prompt(&["One. Two.", "Three. Four."], 50)),
            "One. Three."
        );
        assert_eq!(
            ask(&render_pagination_prompt(&["A.", "B.", "C."], &[2, 3])),
            "Break point: <3>"
        );
        assert_eq!(ask(&render_gist_prompt("First bit. Second bit.")), "First bit.");
        assert_eq!(ask(&render_gist_prompt("one two three")), "one two");
        let lookup = render_lookup_prompt(
            &["weather talk", "the dragon hoard", "more dragon lore"],
            "Where is the dragon hoard?",
            1,
            6,
        );
        assert_eq!(ask(&lookup), "Pages: 2, 3");
    }

    #[test]
    fn qa_answers() {
        let opts: Vec<String> = vec!["a red barn".into(), "the silver lighthouse".into()];
        let mc = render_mc_prompt(&bundle("She lived beside the silver lighthouse."), "Where?", &opts).unwrap();
        assert_eq!(parse_mc_answer(&ask(&mc), 2), Ok(2));
        let gen = render_gen_prompt(&bundle("Nothing relevant here."), "Which planet?").unwrap();
        assert_eq!(ask(&gen), "Not found in context.");
    }
}
