//! Connectionist temporal classification in the log domain.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

const BLANK: usize = 0;

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Minimum frames CTC needs: one per label plus one per adjacent repeat.
pub fn ctc_min_frames(targets: &[usize]) -> usize {
    targets.len() + targets.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Negative log-likelihood of `targets` under `logprobs` (`T × V`, blank 0)
/// and its gradient with respect to every log-probability entry.
pub fn ctc_loss(logprobs: ArrayView2<f64>, targets: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (t_len, v) = logprobs.dim();
    if targets.is_empty() {
        return Err(Error::shape("empty CTC target"));
    }
    if let Some(&bad) = targets.iter().find(|&&c| c == BLANK || c >= v) {
        return Err(Error::shape(format!("CTC target class {bad} outside 1..{v}")));
    }
    if t_len < ctc_min_frames(targets) {
        return Err(Error::Alignment {
            frames: t_len,
            units: ctc_min_frames(targets),
        });
    }
    let ext: Vec<usize> = std::iter::once(BLANK)
        .chain(targets.iter().flat_map(|&c| [c, BLANK]))
        .collect();
    let s_len = ext.len();
    let skip = |s: usize| s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2];
    let neg = f64::NEG_INFINITY;

    let mut alpha = Array2::from_elem((t_len, s_len), neg);
    alpha[[0, 0]] = logprobs[[0, ext[0]]];
    alpha[[0, 1]] = logprobs[[0, ext[1]]];
    for t in 1..t_len {
        for s in 0..s_len {
            let mut a = alpha[[t - 1, s]];
            if s >= 1 {
                a = log_add(a, alpha[[t - 1, s - 1]]);
            }
            if skip(s) {
                a = log_add(a, alpha[[t - 1, s - 2]]);
            }
            alpha[[t, s]] = a + logprobs[[t, ext[s]]];
        }
    }
    let mut beta = Array2::from_elem((t_len, s_len), neg);
    beta[[t_len - 1, s_len - 1]] = logprobs[[t_len - 1, ext[s_len - 1]]];
    beta[[t_len - 1, s_len - 2]] = logprobs[[t_len - 1, ext[s_len - 2]]];
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let mut b = beta[[t + 1, s]];
            if s + 1 < s_len {
                b = log_add(b, beta[[t + 1, s + 1]]);
            }
            if s + 2 < s_len && skip(s + 2) {
                b = log_add(b, beta[[t + 1, s + 2]]);
            }
            beta[[t, s]] = b + logprobs[[t, ext[s]]];
        }
    }
    let log_z = log_add(alpha[[t_len - 1, s_len - 1]], alpha[[t_len - 1, s_len - 2]]);
    if !log_z.is_finite() {
        return Err(Error::contract("CTC likelihood underflowed"));
    }

    // d(-log Z)/d lp[t, c] = -Σ_{s: ext[s]=c} exp(α + β - lp - log Z)
    let mut grad = Array2::zeros((t_len, v));
    for t in 0..t_len {
        for s in 0..s_len {
            let occ = alpha[[t, s]] + beta[[t, s]] - logprobs[[t, ext[s]]] - log_z;
            if occ > neg {
                grad[[t, ext[s]]] -= occ.exp();
            }
        }
    }
    Ok((-log_z, grad))
}
