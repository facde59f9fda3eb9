//! Seeded synthetic corpora with planted facts, and an oracle reader that
//! answers correctly exactly when the planted fact is in its context.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BenchError, Corpus, QATask};
use crate::gateway::{ExtractiveMock, LmProvider, LmRequest, ProviderError, ProviderReply};
use crate::text::{Document, SourceBenchmark, TokenCounter, WordPieceApproxCounter, DEFAULT_MAX_PASSAGE_TOKENS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_docs: usize,
    /// Approximate document length under the default token counter.
    pub doc_tokens: usize,
    pub facts_per_doc: usize,
    /// Plant each fact as two long adjacent sentences that can never share
    /// a passage, so reading them in order requires document order.
    pub split_facts: bool,
    pub multiple_choice: bool,
    /// Relative fact positions in (0, 1); evenly spaced when absent.
    pub depths: Option<Vec<f64>>,
    pub passage_cap: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_docs: 50,
            doc_tokens: 10_000,
            facts_per_doc: 4,
            split_facts: false,
            multiple_choice: true,
            depths: None,
            passage_cap: DEFAULT_MAX_PASSAGE_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedFact {
    pub task_id: String,
    pub doc_id: String,
    pub depth: f64,
    /// The fact sentences in document order.
    pub sentences: Vec<String>,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub facts: Vec<PlantedFact>,
}

const ADJECTIVES: &[&str] = &[
    "quiet",
    "amber",
    "distant",
    "narrow",
    "gentle",
    "crooked",
    "pale",
    "restless",
    "hollow",
    "bright",
    "weathered",
    "patient",
    "muddy",
    "tall",
    "broken",
    "velvet",
];
const NOUNS: &[&str] = &[
    "river", "meadow", "lantern", "orchard", "bridge", "shepherd", "harbor", "window", "forest", "market", "mill",
    "chapel", "garden", "traveler", "wagon", "hillside",
];
const VERBS: &[&str] = &[
    "wanders", "rests", "leans", "glows", "waits", "drifts", "turns", "settles", "hums", "lingers",
];
const PREPOSITIONS: &[&str] = &["near", "beside", "beyond", "under", "across", "behind", "along"];
const SYLLABLES: &[&str] = &[
    "ka", "lo", "vi", "ren", "tor", "mi", "sha", "dun", "quel", "zan", "bri", "nox",
];

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words[rng.gen_range(0..words.len())]
}

fn clause(rng: &mut ChaCha8Rng) -> String {
    format!(
        "the {} {} {} {} the {} {}",
        pick(rng, ADJECTIVES),
        pick(rng, NOUNS),
        pick(rng, VERBS),
        pick(rng, PREPOSITIONS),
        pick(rng, ADJECTIVES),
        pick(rng, NOUNS)
    )
}

fn filler_sentence(rng: &mut ChaCha8Rng) -> String {
    let mut s = clause(rng);
    if rng.gen_bool(0.4) {
        s.push_str(" while ");
        s.push_str(&clause(rng));
    }
    s.push('.');
    capitalize(&s)
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn fresh_name(rng: &mut ChaCha8Rng, used: &mut HashSet<String>) -> String {
    loop {
        let n = rng.gen_range(3..=4);
        let raw: String = (0..n).map(|_| pick(rng, SYLLABLES)).collect();
        let name = capitalize(&raw);
        if used.insert(name.clone()) {
            return name;
        }
    }
}

/// Appends filler clauses until the sentence reaches `target` tokens.
fn padded(rng: &mut ChaCha8Rng, head: String, target: usize, counter: &dyn TokenCounter) -> String {
    let mut s = head;
    while counter.count(&s) + 1 < target {
        s.push_str(", while ");
        s.push_str(&clause(rng));
    }
    s.push('.');
    s
}

fn distractors(rng: &mut ChaCha8Rng, value: u32, n: usize) -> Vec<u32> {
    let mut out = Vec::new();
    while out.len() < n {
        let v = rng.gen_range(100..1000);
        if v != value && !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Filler prose with uniquely named facts planted at controlled depths.
/// Identical seeds and configs give identical corpora.
pub fn generate_synthetic_corpus(seed: u64, config: &SyntheticConfig) -> Result<SyntheticCorpus, BenchError> {
    if config.n_docs == 0 || config.doc_tokens == 0 || config.facts_per_doc == 0 || config.passage_cap < 4 {
        return Err(BenchError::InvalidConfig(
            "synthetic corpus sizes must be positive".into(),
        ));
    }
    let depths: Vec<f64> = match &config.depths {
        Some(d) if d.len() == config.facts_per_doc && d.iter().all(|x| (0.0..=1.0).contains(x)) => d.clone(),
        Some(_) => return Err(BenchError::InvalidConfig("need one depth in [0, 1] per fact".into())),
        None => (0..config.facts_per_doc)
            .map(|i| (i + 1) as f64 / (config.facts_per_doc + 1) as f64)
            .collect(),
    };
    let counter = WordPieceApproxCounter::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used_names = HashSet::new();
    let mut documents = Vec::new();
    let mut tasks = Vec::new();
    let mut facts = Vec::new();

    for d in 0..config.n_docs {
        let doc_id = format!("synth-{seed}-{d:03}");
        let mut planted = Vec::new();
        let mut fact_tokens = 0;
        for (f, &depth) in depths.iter().enumerate() {
            let name = fresh_name(&mut rng, &mut used_names);
            let value: u32 = rng.gen_range(100..1000);
            let sentences = if config.split_facts {
                let target = config.passage_cap / 2 + 5;
                vec![
                    padded(
                        &mut rng,
                        format!("The keeper {name} guards a hidden vault"),
                        target,
                        &counter,
                    ),
                    padded(
                        &mut rng,
                        format!("Inside the vault of {name} there are exactly {value} silver coins"),
                        target,
                        &counter,
                    ),
                ]
            } else {
                vec![format!("The vault of {name} holds exactly {value} silver coins.")]
            };
            fact_tokens += sentences.iter().map(|s| counter.count(s)).sum::<usize>();
            let task_id = format!("{doc_id}-q{f}");
            let question = format!("How many silver coins are in the vault of {name}?");
            let task = if config.multiple_choice {
                let mut options: Vec<u32> = distractors(&mut rng, value, 3);
                options.push(value);
                options.shuffle(&mut rng);
                QATask {
                    task_id: task_id.clone(),
                    doc_id: doc_id.clone(),
                    question,
                    gold_option: options.iter().position(|&v| v == value),
                    options: options.iter().map(u32::to_string).collect(),
                    gold_answers: vec![],
                    benchmark: SourceBenchmark::Synthetic,
                }
            } else {
                QATask {
                    task_id: task_id.clone(),
                    doc_id: doc_id.clone(),
                    question,
                    options: vec![],
                    gold_option: None,
                    gold_answers: vec![value.to_string()],
                    benchmark: SourceBenchmark::Synthetic,
                }
            };
            tasks.push(task);
            planted.push(PlantedFact {
                task_id,
                doc_id: doc_id.clone(),
                depth,
                sentences,
                answer: value.to_string(),
            });
        }

        let mut filler = Vec::new();
        let mut tokens = fact_tokens;
        while tokens < config.doc_tokens {
            let s = filler_sentence(&mut rng);
            tokens += counter.count(&s);
            filler.push(s);
        }
        let mut order: Vec<usize> = (0..planted.len()).collect();
        order.sort_by(|&a, &b| planted[a].depth.total_cmp(&planted[b].depth).then(a.cmp(&b)));
        let mut parts: Vec<String> = Vec::with_capacity(filler.len() + planted.len() * 2);
        let mut next = 0;
        for (i, s) in filler.iter().enumerate() {
            while next < order.len() && ((planted[order[next]].depth * filler.len() as f64).round() as usize) <= i {
                parts.extend(planted[order[next]].sentences.iter().cloned());
                next += 1;
            }
            parts.push(s.clone());
        }
        for &k in &order[next..] {
            parts.extend(planted[k].sentences.iter().cloned());
        }
        documents.push(Document::synthetic(&doc_id, parts.join(" "))?);
        facts.extend(planted);
    }

    let corpus = Corpus::new(SourceBenchmark::Synthetic, documents, tasks, vec![], vec![])?;
    Ok(SyntheticCorpus { corpus, facts })
}

struct OracleEntry {
    sentences: Vec<String>,
    answer: String,
    /// 1-based (gold, wrong) option labels for multiple-choice tasks.
    labels: Option<(usize, usize)>,
}

/// Reader that knows every planted fact. It answers correctly iff the
/// fact's sentences all appear in the prompt context; the order-sensitive
/// variant further requires them to appear consecutively, in order.
pub struct SyntheticReader {
    id: String,
    order_sensitive: bool,
    by_question: HashMap<String, OracleEntry>,
}

impl SyntheticReader {
    pub fn new(synthetic: &SyntheticCorpus, order_sensitive: bool) -> Self {
        let tasks: HashMap<&str, &QATask> = synthetic.corpus.tasks.iter().map(|t| (t.task_id.as_str(), t)).collect();
        let by_question = synthetic
            .facts
            .iter()
            .filter_map(|f| {
                let task = tasks.get(f.task_id.as_str())?;
                let labels = task.gold_option.map(|g| (g + 1, (g + 1) % task.options.len() + 1));
                Some((
                    task.question.clone(),
                    OracleEntry {
                        sentences: f.sentences.clone(),
                        answer: f.answer.clone(),
                        labels,
                    },
                ))
            })
            .collect();
        let id = if order_sensitive {
            "synthetic-oracle-ordered"
        } else {
            "synthetic-oracle"
        };
        Self {
            id: id.into(),
            order_sensitive,
            by_question,
        }
    }

    /// Whether the oracle would answer correctly given this context text.
    pub fn supports(&self, fact_sentences: &[String], context: &str) -> bool {
        if !self.order_sensitive {
            return fact_sentences.iter().all(|s| context.contains(s.as_str()));
        }
        let Some(first) = fact_sentences.first() else {
            return true;
        };
        context.match_indices(first.as_str()).any(|(start, _)| {
            let mut rest = &context[start + first.len()..];
            fact_sentences[1..].iter().all(|s| {
                let trimmed = rest.trim_start();
                if trimmed.starts_with(s.as_str()) {
                    rest = &trimmed[s.len()..];
                    true
                } else {
                    false
                }
            })
        })
    }
}

fn between<'a>(prompt: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let s = prompt.find(start)? + start.len();
    let e = prompt[s..].find(end)? + s;
    Some(&prompt[s..e])
}

impl LmProvider for SyntheticReader {
    fn id(&self) -> &str {
        &self.id
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn call(&self, req: &LmRequest) -> Result<ProviderReply, ProviderError> {
        let p = req.prompt.as_str();
        // summaries, pagination, gists and lookups
        let Some(context) = between(p, "[Start of Context]:", "[End of Context]") else {
            return ExtractiveMock::default().call(req);
        };
        let question_block = between(p, "[Start of Question]:", "[End of Question]").unwrap_or("");
        let question = question_block.trim().lines().next().unwrap_or("").trim();
        let entry = self
            .by_question
            .get(question)
            .ok_or_else(|| ProviderError::Fatal(format!("unknown question {question:?}")))?;
        let correct = self.supports(&entry.sentences, context);
        let text = match (entry.labels, correct) {
            (Some((gold, _)), true) => format!("The context states it. [[{gold}]]"),
            (Some((_, wrong)), false) => format!("Guessing. [[{wrong}]]"),
            (None, true) => entry.answer.clone(),
            (None, false) => "Not found in context.".into(),
        };
        Ok(ProviderReply::counted(p, text))
    }
}
