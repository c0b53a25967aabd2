//! Monotonic alignment search over a selected posteriogram.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Per-frame log-probabilities over the aligner vocabulary (blank at 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriogram {
    logprobs: Array2<f32>,
}

impl Posteriogram {
    /// Rows must log-sum-exp to 0 within 1e-4.
    pub fn new(logprobs: Array2<f32>) -> Result<Self> {
        for (t, row) in logprobs.rows().into_iter().enumerate() {
            let lse = log_sum_exp(row.iter().map(|&v| f64::from(v)));
            if !(lse.abs() <= 1e-4) {
                return Err(Error::contract(format!(
                    "posteriogram row {t} log-sum-exps to {lse}"
                )));
            }
        }
        Ok(Self { logprobs })
    }

    pub fn logprobs(&self) -> &Array2<f32> {
        &self.logprobs
    }

    pub fn frames(&self) -> usize {
        self.logprobs.nrows()
    }

    pub fn vocab_size(&self) -> usize {
        self.logprobs.ncols()
    }

    /// Columns for `targets` in order, renormalized over the non-blank
    /// classes. Repeated targets yield repeated columns.
    pub fn select(&self, targets: &[usize]) -> Result<Array2<f64>> {
        let v = self.vocab_size();
        if let Some(&bad) = targets.iter().find(|&&c| c == 0 || c >= v) {
            return Err(Error::shape(format!("target class {bad} outside 1..{v}")));
        }
        let mut out = Array2::zeros((self.frames(), targets.len()));
        for (t, row) in self.logprobs.rows().into_iter().enumerate() {
            let norm = log_sum_exp(row.iter().skip(1).map(|&x| f64::from(x)));
            for (l, &c) in targets.iter().enumerate() {
                out[[t, l]] = f64::from(row[c]) - norm;
            }
        }
        Ok(out)
    }
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Frame-to-unit assignment: starts at 0, ends at L-1, steps by 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentPath {
    assignment: Vec<usize>,
}

impl AlignmentPath {
    pub fn new(assignment: Vec<usize>, units: usize) -> Result<Self> {
        let bad = |msg: &str| Err(Error::contract(format!("invalid alignment path: {msg}")));
        match (assignment.first(), assignment.last()) {
            (Some(0), Some(&last)) if units > 0 && last == units - 1 => {}
            _ => return bad("must start at unit 0 and end at the last unit"),
        }
        if assignment.windows(2).any(|w| w[1] != w[0] && w[1] != w[0] + 1) {
            return bad("steps must be 0 or 1");
        }
        Ok(Self { assignment })
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn frames(&self) -> usize {
        self.assignment.len()
    }

    pub fn units(&self) -> usize {
        self.assignment.last().map_or(0, |&l| l + 1)
    }

    /// Σ_t scores[t, assignment_t], accumulated in frame order.
    pub fn score(&self, scores: ArrayView2<f64>) -> f64 {
        self.assignment
            .iter()
            .enumerate()
            .fold(0.0, |acc, (t, &l)| acc + scores[[t, l]])
    }
}

/// Highest-scoring monotonic surjective path through a `T × L` matrix.
/// Backtracking prefers staying on the same unit when scores tie.
pub fn mas(selected: ArrayView2<f64>) -> Result<AlignmentPath> {
    let (t_len, l_len) = selected.dim();
    if l_len == 0 {
        return Err(Error::shape("alignment needs at least one unit"));
    }
    if t_len < l_len {
        return Err(Error::Alignment {
            frames: t_len,
            units: l_len,
        });
    }
    if selected.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("alignment scores must be finite"));
    }
    let neg = f64::NEG_INFINITY;
    let mut q = Array2::from_elem((t_len, l_len), neg);
    q[[0, 0]] = selected[[0, 0]];
    for t in 1..t_len {
        for l in 0..l_len.min(t + 1) {
            let stay = q[[t - 1, l]];
            let advance = if l > 0 { q[[t - 1, l - 1]] } else { neg };
            let best = if stay >= advance { stay } else { advance };
            q[[t, l]] = best + selected[[t, l]];
        }
    }
    let mut assignment = vec![0; t_len];
    let mut l = l_len - 1;
    for t in (0..t_len).rev() {
        assignment[t] = l;
        if t == 0 {
            break;
        }
        // staying is only possible while enough frames remain for the earlier units
        let can_stay = l <= t - 1;
        if l > 0 && !(can_stay && q[[t - 1, l]] >= q[[t - 1, l - 1]]) {
            l -= 1;
        }
    }
    AlignmentPath::new(assignment, l_len)
}

/// Frames per unit along a path; every entry is at least 1.
pub fn durations_from_path(path: &AlignmentPath, units: usize) -> Result<Vec<u32>> {
    if path.units() != units {
        return Err(Error::shape(format!(
            "path covers {} units, expected {units}",
            path.units()
        )));
    }
    let mut d = vec![0u32; units];
    for &l in path.assignment() {
        d[l] += 1;
    }
    Ok(d)
}
