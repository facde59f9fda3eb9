use serde::{Deserialize, Serialize};

/// Anything with a token cost that can be packed into a budget.
pub trait TokenWeighted {
    fn token_count(&self) -> usize;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Stop at the first item that would overflow the budget.
    #[default]
    PrefixStop,
    /// Skip items that do not fit and keep scanning for smaller ones.
    FillGaps,
}

/// Walks `ranked` in order and keeps items while the running token total
/// stays within `budget`. Under the default mode the result is a prefix of
/// `ranked`, so selections at growing budgets are nested.
pub fn select_within_budget<T: TokenWeighted + Clone>(ranked: &[T], budget: usize) -> Vec<T> {
    select_with_mode(ranked, budget, SelectionMode::PrefixStop)
}

pub fn select_with_mode<T: TokenWeighted + Clone>(ranked: &[T], budget: usize, mode: SelectionMode) -> Vec<T> {
    let mut total = 0;
    let mut out = Vec::new();
    for item in ranked {
        let cost = item.token_count();
        if total + cost <= budget {
            total += cost;
            out.push(item.clone());
        } else if mode == SelectionMode::PrefixStop {
            break;
        }
    }
    out
}
