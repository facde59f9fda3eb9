use std::collections::HashMap;

use super::porter::stem;
use super::EvalError;

pub fn normalize_tokens(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

fn max_over<S: AsRef<str>>(
    prediction: &str,
    references: &[S],
    score: impl Fn(&[String], &[String]) -> f64,
) -> Result<f64, EvalError> {
    if references.is_empty() {
        return Err(EvalError::NoReferences);
    }
    let pred = normalize_tokens(prediction);
    Ok(references
        .iter()
        .map(|r| score(&pred, &normalize_tokens(r.as_ref())))
        .fold(0.0, f64::max))
}

fn bag(tokens: &[String]) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    counts
}

fn f1_single(pred: &[String], reference: &[String]) -> f64 {
    if pred.is_empty() || reference.is_empty() {
        return if pred.is_empty() && reference.is_empty() {
            1.0
        } else {
            0.0
        };
    }
    let ref_counts = bag(reference);
    let common: usize = bag(pred)
        .iter()
        .map(|(t, &n)| n.min(ref_counts.get(t).copied().unwrap_or(0)))
        .sum();
    if common == 0 {
        return 0.0;
    }
    let p = common as f64 / pred.len() as f64;
    let r = common as f64 / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// Bag-of-tokens F1.
pub fn token_f1<S: AsRef<str>>(prediction: &str, references: &[S]) -> Result<f64, EvalError> {
    max_over(prediction, references, f1_single)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BleuConfig {
    pub max_n: usize,
    /// Replaces a zero matched-n-gram count with this value.
    pub epsilon: Option<f64>,
}

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

fn bleu_single(pred: &[String], reference: &[String], config: BleuConfig) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=config.max_n {
        let total = pred.len().saturating_sub(n - 1);
        if total == 0 {
            return 0.0;
        }
        let ref_grams = ngrams(reference, n);
        let matched: usize = ngrams(pred, n)
            .iter()
            .map(|(g, &c)| c.min(ref_grams.get(g).copied().unwrap_or(0)))
            .sum();
        let matched = match (matched, config.epsilon) {
            (0, Some(eps)) => eps,
            (0, None) => return 0.0,
            (m, _) => m as f64,
        };
        log_sum += (matched / total as f64).ln();
    }
    let (c, r) = (pred.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    (bp * (log_sum / config.max_n as f64).exp()).clamp(0.0, 1.0)
}

/// Clipped n-gram precision, geometric mean over orders `1..=max_n`, with
/// brevity penalty. Unsmoothed.
pub fn bleu<S: AsRef<str>>(prediction: &str, references: &[S], max_n: usize) -> Result<f64, EvalError> {
    bleu_with(prediction, references, BleuConfig { max_n, epsilon: None })
}

pub fn bleu_with<S: AsRef<str>>(prediction: &str, references: &[S], config: BleuConfig) -> Result<f64, EvalError> {
    if config.max_n == 0 {
        return Err(EvalError::InvalidOrder);
    }
    max_over(prediction, references, |p, r| bleu_single(p, r, config))
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

fn rouge_l_single(pred: &[String], reference: &[String]) -> f64 {
    let lcs = lcs_len(pred, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / pred.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// Longest-common-subsequence F-measure.
pub fn rouge_l<S: AsRef<str>>(prediction: &str, references: &[S]) -> Result<f64, EvalError> {
    max_over(prediction, references, rouge_l_single)
}

/// Unigram alignment in two stages (exact surface form, then Porter stem).
/// Returns (prediction index, reference index) pairs sorted by prediction.
fn align(pred: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut pred_to_ref: Vec<Option<usize>> = vec![None; pred.len()];
    let mut ref_used = vec![false; reference.len()];
    let pred_stems: Vec<String> = pred.iter().map(|t| stem(t)).collect();
    let ref_stems: Vec<String> = reference.iter().map(|t| stem(t)).collect();
    let stages: [(&[String], &[String]); 2] = [(pred, reference), (&pred_stems, &ref_stems)];
    for (p_keys, r_keys) in stages {
        for i in 0..pred.len() {
            if pred_to_ref[i].is_some() {
                continue;
            }
            let free = |j: usize| !ref_used[j] && r_keys[j] == p_keys[i];
            let follow = i
                .checked_sub(1)
                .and_then(|h| pred_to_ref[h])
                .map(|j| j + 1)
                .filter(|&j| j < reference.len() && free(j));
            if let Some(j) = follow.or_else(|| (0..reference.len()).find(|&j| free(j))) {
                pred_to_ref[i] = Some(j);
                ref_used[j] = true;
            }
        }
    }
    pred_to_ref
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j)))
        .collect()
}

fn meteor_single(pred: &[String], reference: &[String]) -> f64 {
    let alignment = align(pred, reference);
    let matches = alignment.len();
    if matches == 0 {
        return 0.0;
    }
    let chunks = 1 + alignment
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count();
    let p = matches as f64 / pred.len() as f64;
    let r = matches as f64 / reference.len() as f64;
    let fmean = p * r / (0.9 * p + 0.1 * r);
    let penalty = 0.5 * (chunks as f64 / matches as f64).powi(3);
    fmean * (1.0 - penalty)
}

/// METEOR with exact and stem matching; no synonym stage.
pub fn meteor<S: AsRef<str>>(prediction: &str, references: &[S]) -> Result<f64, EvalError> {
    max_over(prediction, references, meteor_single)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one(r: &str) -> [&str; 1] {
        [r]
    }

    #[test]
    fn normalization() {
        assert_eq!(
            normalize_tokens("The Cat, sat!  Don't"),
            vec!["the", "cat", "sat", "dont"]
        );
        assert!(normalize_tokens(" ... ").is_empty());
    }

    #[test]
    fn f1_oracles() {
        let cases: [(&str, &str, f64); 10] = [
            ("the cat sat", "the cat", 0.8),
            ("the cat", "the cat", 1.0),
            ("dog", "cat", 0.0),
            ("a a b", "a b b", 2.0 / 3.0),
            ("The Cat.", "the cat", 1.0),
            ("a b c d", "a", 0.4),
            ("x y", "x y z w", 2.0 / 3.0),
            ("", "", 1.0),
            ("", "cat", 0.0),
            ("a a a", "a", 0.5),
        ];
        for (p, r, want) in cases {
            assert_abs_diff_eq!(token_f1(p, &one(r)).unwrap(), want, epsilon = 1e-9);
        }
    }

    #[test]
    fn bleu_oracles() {
        let e4 = |p: &str, r: &str| bleu(p, &one(r), 4).unwrap();
        let e1 = |p: &str, r: &str| bleu(p, &one(r), 1).unwrap();
        assert_abs_diff_eq!(e1("a b c", "a b d"), 2.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e4("a b c d e", "a b c d f"), 0.2f64.powf(0.25), epsilon = 1e-9);
        assert_abs_diff_eq!(e4("a b c d", "a b c d"), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e1("a", "a b"), (-1.0f64).exp(), epsilon = 1e-9);
        assert_abs_diff_eq!(e1("a a a", "a"), 1.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e4("a b c", "a b c"), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e4("a x b y c", "a b c d e"), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e1("a b", "a b c d"), (-1.0f64).exp(), epsilon = 1e-9);
        assert_abs_diff_eq!(e1("x y z", "a b c"), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e1("", "a"), 0.0, epsilon = 1e-9);
        let smoothed = bleu_with(
            "a b c d",
            &one("a b c e"),
            BleuConfig {
                max_n: 4,
                epsilon: Some(0.1),
            },
        )
        .unwrap();
        assert_abs_diff_eq!(smoothed, (0.75f64 * (2.0 / 3.0) * 0.5 * 0.1).powf(0.25), epsilon = 1e-9);
    }

    #[test]
    fn rouge_oracles() {
        let cases: [(&str, &str, f64); 10] = [
            ("a b c d", "a c d", 6.0 / 7.0),
            ("a b", "a b", 1.0),
            ("a b", "c d", 0.0),
            ("a b c", "c b a", 1.0 / 3.0),
            ("a", "a b c", 0.5),
            ("a b c d e f", "a c e", 2.0 / 3.0),
            ("a b a b", "b a b a", 0.75),
            ("x a y b", "a b", 2.0 / 3.0),
            ("", "a", 0.0),
            ("The A, b!", "a b", 0.8),
        ];
        for (p, r, want) in cases {
            assert_abs_diff_eq!(rouge_l(p, &one(r)).unwrap(), want, epsilon = 1e-9);
        }
    }

    fn meteor_value(m: f64, chunks: f64, p_len: f64, r_len: f64) -> f64 {
        let (p, r) = (m / p_len, m / r_len);
        p * r / (0.9 * p + 0.1 * r) * (1.0 - 0.5 * (chunks / m).powi(3))
    }

    #[test]
    fn meteor_oracles() {
        let cases: [(&str, &str, f64); 10] = [
            ("the cat", "the cat", 0.9375),
            ("dog", "cat", 0.0),
            ("a b c", "a b c", meteor_value(3.0, 1.0, 3.0, 3.0)),
            ("a b c", "c b a", meteor_value(3.0, 3.0, 3.0, 3.0)),
            ("a", "a b", meteor_value(1.0, 1.0, 1.0, 2.0)),
            ("a b x", "a b", meteor_value(2.0, 1.0, 3.0, 2.0)),
            ("cats run", "cat runs", meteor_value(2.0, 1.0, 2.0, 2.0)),
            ("a x b", "a b", meteor_value(2.0, 2.0, 3.0, 2.0)),
            (
                "the dogs barked loudly",
                "the dog barked",
                meteor_value(3.0, 1.0, 4.0, 3.0),
            ),
            ("b a", "a b", meteor_value(2.0, 2.0, 2.0, 2.0)),
        ];
        for (p, r, want) in cases {
            assert_abs_diff_eq!(meteor(p, &one(r)).unwrap(), want, epsilon = 1e-6);
        }
        assert!(meteor("cats", &one("cat")).unwrap() > 0.0);
    }

    #[test]
    fn multi_reference_takes_max() {
        assert_eq!(token_f1("a b", &["x", "a b"]).unwrap(), 1.0);
        assert_eq!(rouge_l("a b", &["a b", "x"]).unwrap(), 1.0);
        assert!(matches!(meteor("a", &[] as &[&str]), Err(EvalError::NoReferences)));
        assert!(matches!(bleu("a", &["a"], 0), Err(EvalError::InvalidOrder)));
    }
}
