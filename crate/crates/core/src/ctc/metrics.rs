use super::CtcError;

/// Levenshtein distance with unit substitution, insertion and deletion costs.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=hypothesis.len()).collect();
    let mut cur = vec![0; hypothesis.len() + 1];
    for (i, r) in reference.iter().enumerate() {
        cur[0] = i + 1;
        for (j, h) in hypothesis.iter().enumerate() {
            let sub = prev[j] + usize::from(r != h);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[hypothesis.len()]
}

/// Edit distance normalised by reference length.
pub fn label_error_rate<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<f64, CtcError> {
    if reference.is_empty() {
        return Err(CtcError::EmptyReference);
    }
    Ok(edit_distance(reference, hypothesis) as f64 / reference.len() as f64)
}

/// Running totals for a corpus-level error rate: summed edits over summed
/// reference lengths.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LerAccumulator {
    pub edits: usize,
    pub reference_len: usize,
}

impl LerAccumulator {
    pub fn add<T: PartialEq>(&mut self, reference: &[T], hypothesis: &[T]) {
        self.edits += edit_distance(reference, hypothesis);
        self.reference_len += reference.len();
    }

    pub fn merge(&mut self, other: LerAccumulator) {
        self.edits += other.edits;
        self.reference_len += other.reference_len;
    }

    pub fn rate(&self) -> Result<f64, CtcError> {
        if self.reference_len == 0 {
            return Err(CtcError::EmptyReference);
        }
        Ok(self.edits as f64 / self.reference_len as f64)
    }
}

pub fn corpus_ler<'a, T, I>(pairs: I) -> Result<f64, CtcError>
where
    T: PartialEq + 'a,
    I: IntoIterator<Item = (&'a [T], &'a [T])>,
{
    let mut acc = LerAccumulator::default();
    for (r, h) in pairs {
        acc.add(r, h);
    }
    acc.rate()
}
