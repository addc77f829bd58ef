use std::collections::BTreeSet;

/// Monotone matching of input positions onto target positions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnchorAlignment {
    /// `(input position, target position)`, strictly increasing in both.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_inputs: BTreeSet<usize>,
}

impl AnchorAlignment {
    fn from_pairs(pairs: Vec<(usize, usize)>, input_len: usize) -> Self {
        let matched: BTreeSet<usize> = pairs.iter().map(|&(i, _)| i).collect();
        let unmatched_inputs = (0..input_len).filter(|i| !matched.contains(i)).collect();
        Self {
            pairs,
            unmatched_inputs,
        }
    }

    pub fn is_total(&self) -> bool {
        self.unmatched_inputs.is_empty()
    }
}

/// Longest-common-subsequence alignment of `input` into `target`.
///
/// When `input` is a subsequence of `target` (the clean-pair case) the
/// earliest-match greedy walk is already the answer; otherwise the full
/// dynamic program runs.
pub fn align(input: &[String], target: &[String]) -> AnchorAlignment {
    let mut pairs = Vec::with_capacity(input.len());
    let mut j = 0;
    for (i, tok) in input.iter().enumerate() {
        match target[j..].iter().position(|t| t == tok) {
            Some(off) => {
                pairs.push((i, j + off));
                j += off + 1;
            }
            None => return lcs_align(input, target),
        }
    }
    AnchorAlignment::from_pairs(pairs, input.len())
}

/// Dynamic-programming LCS alignment.
///
/// Walks forward over a suffix-LCS table, taking a match whenever it keeps
/// the alignment optimal, otherwise skipping a target position when that
/// keeps it optimal, otherwise leaving the input position unmatched.
pub fn lcs_align(input: &[String], target: &[String]) -> AnchorAlignment {
    let (n, m) = (input.len(), target.len());
    let width = m + 1;
    // suffix[i * width + j] = LCS(input[i..], target[j..])
    let mut suffix = vec![0u32; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            suffix[i * width + j] = if input[i] == target[j] {
                suffix[(i + 1) * width + j + 1] + 1
            } else {
                suffix[(i + 1) * width + j].max(suffix[i * width + j + 1])
            };
        }
    }
    let at = |i: usize, j: usize| suffix[i * width + j];

    let mut pairs = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if input[i] == target[j] && at(i, j) == at(i + 1, j + 1) + 1 {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if at(i, j + 1) == at(i, j) {
            j += 1;
        } else {
            i += 1;
        }
    }
    AnchorAlignment::from_pairs(pairs, n)
}
