use std::collections::BTreeMap;

use super::CtcError;
use crate::tensor::{log_add, log_sum_exp, Matrix};

/// Merges repeats, then drops blanks.
pub fn collapse_path(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(path.len());
    let mut prev = None;
    for &k in path {
        if Some(k) != prev && k != blank {
            out.push(k);
        }
        prev = Some(k);
    }
    out
}

/// Best-path decoding. Ties within a frame go to the lowest class index.
pub fn greedy_decode(log_probs: &Matrix<f64>) -> Vec<usize> {
    let blank = log_probs.cols().saturating_sub(1);
    let path: Vec<usize> = log_probs
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    collapse_path(&path, blank)
}

#[derive(Clone, Copy)]
struct PrefixScore {
    /// Log-probability of the prefix with its last frame a blank.
    blank: f64,
    /// Log-probability of the prefix with its last frame a symbol.
    symbol: f64,
}

impl PrefixScore {
    const EMPTY: Self = Self {
        blank: f64::NEG_INFINITY,
        symbol: f64::NEG_INFINITY,
    };

    fn total(&self) -> f64 {
        log_add(self.blank, self.symbol)
    }
}

/// CTC prefix beam search. At most `beam_width` prefixes survive each frame;
/// ordering is by total log-probability with ties broken towards the
/// lexicographically smaller prefix, so the result is deterministic.
pub fn beam_search_decode(log_probs: &Matrix<f64>, beam_width: usize) -> Result<Vec<usize>, CtcError> {
    if beam_width == 0 {
        return Err(CtcError::ZeroBeamWidth);
    }
    let classes = log_probs.cols();
    if classes < 2 {
        return Err(CtcError::EmptyInput {
            frames: log_probs.rows(),
            classes,
        });
    }
    let blank = classes - 1;
    let mut beam: Vec<(Vec<usize>, PrefixScore)> = vec![(
        Vec::new(),
        PrefixScore {
            blank: 0.0,
            symbol: f64::NEG_INFINITY,
        },
    )];

    for row in log_probs.row_iter() {
        let mut next: BTreeMap<Vec<usize>, PrefixScore> = BTreeMap::new();
        for (prefix, score) in &beam {
            let total = score.total();
            let stay = next.entry(prefix.clone()).or_insert(PrefixScore::EMPTY);
            stay.blank = log_add(stay.blank, total + row[blank]);

            let last = prefix.last().copied();
            for (k, &p) in row.iter().enumerate().take(blank) {
                if p == f64::NEG_INFINITY {
                    continue;
                }
                let mut extended = prefix.clone();
                extended.push(k);
                if last == Some(k) {
                    // A repeated symbol only extends the prefix across a blank.
                    let same = next.get_mut(prefix).expect("inserted above");
                    same.symbol = log_add(same.symbol, score.symbol + p);
                    let ext = next.entry(extended).or_insert(PrefixScore::EMPTY);
                    ext.symbol = log_add(ext.symbol, score.blank + p);
                } else {
                    let ext = next.entry(extended).or_insert(PrefixScore::EMPTY);
                    ext.symbol = log_add(ext.symbol, total + p);
                }
            }
        }
        let mut ranked: Vec<(Vec<usize>, PrefixScore)> = next.into_iter().collect();
        // BTreeMap order is lexicographic and the sort is stable.
        ranked.sort_by(|a, b| b.1.total().total_cmp(&a.1.total()));
        ranked.truncate(beam_width);
        beam = ranked;
    }
    Ok(beam.into_iter().next().map(|(p, _)| p).unwrap_or_default())
}

/// Exact MAP label sequence by summing all `C^T` paths per collapsed output.
/// Ties resolve to the lexicographically smaller sequence.
pub fn exhaustive_decode(log_probs: &Matrix<f64>) -> Result<Vec<usize>, CtcError> {
    let (t_len, classes) = (log_probs.rows(), log_probs.cols());
    let too_large = CtcError::TooLarge {
        frames: t_len,
        classes,
    };
    if classes < 2 || t_len == 0 {
        return Err(CtcError::EmptyInput {
            frames: t_len,
            classes,
        });
    }
    let exp = u32::try_from(t_len).map_err(|_| too_large.clone())?;
    let total = (classes as u64).checked_pow(exp).ok_or(too_large.clone())?;
    if total > super::BRUTE_FORCE_MAX_PATHS {
        return Err(too_large);
    }
    let blank = classes - 1;
    let mut scores: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
    let mut path = vec![0usize; t_len];
    for _ in 0..total {
        let lp: f64 = path.iter().enumerate().map(|(t, &k)| log_probs.get(t, k)).sum();
        scores.entry(collapse_path(&path, blank)).or_default().push(lp);
        for slot in path.iter_mut().rev() {
            *slot += 1;
            if *slot < classes {
                break;
            }
            *slot = 0;
        }
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for (seq, terms) in scores {
        let s = log_sum_exp(&terms);
        if best.as_ref().is_none_or(|(_, b)| s > *b) {
            best = Some((seq, s));
        }
    }
    Ok(best.map(|(s, _)| s).unwrap_or_default())
}
