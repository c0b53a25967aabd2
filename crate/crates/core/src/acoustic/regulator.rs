use std::collections::BTreeSet;

use candle_core::Tensor;

use crate::error::{Error, Result};

/// Source unit index for every decoder-input row. Boundary units contribute
/// no rows whatever their duration.
pub fn regulate_indexes(durations: &[i64], boundaries: &BTreeSet<usize>) -> Result<Vec<usize>> {
    if let Some((i, d)) = durations.iter().enumerate().find(|(_, &d)| d < 0) {
        return Err(Error::contract(format!("negative duration {d} at unit {i}")));
    }
    if let Some(&b) = boundaries.iter().find(|&&b| b >= durations.len()) {
        return Err(Error::shape(format!(
            "boundary index {b} outside a sequence of {} units",
            durations.len()
        )));
    }
    Ok(durations
        .iter()
        .enumerate()
        .filter(|(i, _)| !boundaries.contains(i))
        .flat_map(|(i, &d)| std::iter::repeat_n(i, d as usize))
        .collect())
}

/// Repeats each row of `hidden` (`[L, H]`) by its duration.
pub fn length_regulate(hidden: &Tensor, durations: &[i64], boundaries: &BTreeSet<usize>) -> Result<Tensor> {
    let l = hidden.dim(0)?;
    if durations.len() != l {
        return Err(Error::shape(format!("{} durations for {l} units", durations.len())));
    }
    let idx = regulate_indexes(durations, boundaries)?;
    if idx.is_empty() {
        return Err(Error::shape("length regulator produced no frames"));
    }
    let idx: Vec<u32> = idx.into_iter().map(|i| i as u32).collect();
    let n = idx.len();
    let idx = Tensor::from_vec(idx, n, hidden.device())?;
    Ok(hidden.index_select(&idx, 0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{Device, DType};

    #[test]
    fn boundary_duration_is_overwritten() {
        let b: BTreeSet<usize> = [1].into();
        assert_eq!(regulate_indexes(&[2, 4, 3], &b).unwrap(), vec![0, 0, 2, 2, 2]);
    }

    #[test]
    fn plain_upsampling() {
        let h = Tensor::from_vec(vec![1f32, 2., 3., 4.], (2, 2), &Device::Cpu).unwrap();
        let out = length_regulate(&h, &[2, 3], &BTreeSet::new()).unwrap();
        let rows: Vec<Vec<f32>> = out.to_vec2().unwrap();
        assert_eq!(rows, vec![vec![1., 2.], vec![1., 2.], vec![3., 4.], vec![3., 4.], vec![3., 4.]]);
    }

    #[test]
    fn negative_duration_is_a_contract_error() {
        assert!(matches!(regulate_indexes(&[1, -1], &BTreeSet::new()), Err(Error::Contract(_))));
    }

    #[test]
    fn empty_output_is_rejected() {
        let h = Tensor::zeros((2, 3), DType::F32, &Device::Cpu).unwrap();
        assert!(length_regulate(&h, &[0, 5], &[1].into()).is_err());
    }
}
