use once_cell::sync::Lazy;
use regex::Regex;

use super::AnswerError;

static MARKER: Lazy<Regex> = Lazy::new(|| Regex::new(r"\[\[\s*(\d+)\s*\]\]").unwrap());
static NUMBER: Lazy<Regex> = Lazy::new(|| Regex::new(r"\d+").unwrap());

/// 1-based option index from the last `[[k]]` marker in the response.
pub fn parse_mc_answer(response_text: &str, n_options: usize) -> Result<usize, AnswerError> {
    let last = MARKER
        .captures_iter(response_text)
        .last()
        .ok_or(AnswerError::ParseFailure)?;
    let k: usize = last[1].parse().map_err(|_| AnswerError::ParseFailure)?;
    if k == 0 || k > n_options {
        return Err(AnswerError::OutOfRange { answer: k, n_options });
    }
    Ok(k)
}

/// Every unsigned integer in `text`, in order of appearance. Overlong digit
/// runs are skipped.
pub fn parse_integers(text: &str) -> Vec<usize> {
    NUMBER.find_iter(text).filter_map(|m| m.as_str().parse().ok()).collect()
}
