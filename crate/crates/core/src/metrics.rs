//! Clustering accuracy under the best label matching, and NMI.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Contract(format!(
            "{} predicted labels for {} ground-truth labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Contract("no samples to evaluate".into()));
    }
    Ok(())
}

/// Square contingency table `[pred][truth]`, padded with empty rows/columns.
fn contingency(pred: &[usize], truth: &[usize]) -> Vec<Vec<usize>> {
    let size = pred.iter().chain(truth).max().map_or(0, |&m| m + 1);
    let mut table = vec![vec![0usize; size]; size];
    for (&p, &t) in pred.iter().zip(truth) {
        table[p][t] += 1;
    }
    table
}

/// Fraction of samples matched under the best one-to-one map from predicted
/// to true labels.
pub fn acc(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let table = contingency(pred, truth);
    let max = table.iter().flatten().copied().max().unwrap_or(0) as i64;
    // maximize matches = minimize (max - count)
    let cost: Vec<Vec<i64>> = table.iter().map(|row| row.iter().map(|&c| max - c as i64).collect()).collect();
    let assignment = hungarian(&cost);
    let matched: usize = assignment.iter().enumerate().map(|(p, &t)| table[p][t]).sum();
    Ok(matched as f64 / pred.len() as f64)
}

/// Minimum-cost perfect matching on a square cost matrix; returns the column
/// assigned to each row.
pub fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based potentials, column 0 is a sentinel
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = i64::MAX;
            let mut col1 = 0usize;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let cur = cost[r0 - 1][col - 1] - u[r0] - v[col];
                if cur < minv[col] {
                    minv[col] = cur;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for col in 1..=n {
        if owner[col] > 0 {
            assignment[owner[col] - 1] = col - 1;
        }
    }
    assignment
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * libm::log(p)
        })
        .sum()
}

/// `I(pred; truth) / sqrt(H(pred) H(truth))` with natural logs.
///
/// Two single-cluster labelings score 1; a single-cluster labeling against a
/// non-trivial one scores 0.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let n = pred.len() as f64;
    let table = contingency(pred, truth);
    let size = table.len();
    let row_sums: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<usize> = (0..size).map(|t| table.iter().map(|r| r[t]).sum()).collect();
    let h_pred = entropy(row_sums.iter().copied(), n);
    let h_truth = entropy(col_sums.iter().copied(), n);
    if h_pred == 0.0 && h_truth == 0.0 {
        return Ok(1.0);
    }
    if h_pred == 0.0 || h_truth == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (p, row) in table.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let c = c as f64;
            mi += c / n * libm::log(c * n / (row_sums[p] as f64 * col_sums[t] as f64));
        }
    }
    Ok((mi / libm::sqrt(h_pred * h_truth)).clamp(0.0, 1.0))
}
