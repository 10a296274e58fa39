//! Amortized cost of a pretrained warm-start generator against standard VQE.

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub c_pre: u64,
    /// Mean post-training evaluations per test point.
    pub c_post_bar: f64,
    /// Mean standard-VQE evaluations per test point.
    pub c_vqe_bar: f64,
    pub n_test: usize,
    pub total_warm: f64,
    pub total_vqe: f64,
    /// Smallest `n` with `C_pre + C_post * n < C_vqe * n`; `None` if never.
    pub break_even: Option<u64>,
}

impl CostReport {
    pub fn total_warm_at(&self, n: u64) -> f64 {
        self.c_pre as f64 + self.c_post_bar * n as f64
    }

    pub fn total_vqe_at(&self, n: u64) -> f64 {
        self.c_vqe_bar * n as f64
    }
}

fn mean(xs: &[u64]) -> f64 {
    xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64
}

pub fn cost_report(c_pre: u64, post: &[u64], vqe: &[u64]) -> Result<CostReport> {
    if post.is_empty() {
        return Err(HarnessError::config("cost.post", "needs at least one post-training cost"));
    }
    if vqe.is_empty() {
        return Err(HarnessError::config("cost.vqe", "needs at least one standard VQE cost"));
    }
    let c_post_bar = mean(post);
    let c_vqe_bar = mean(vqe);
    let mut report = CostReport {
        c_pre,
        c_post_bar,
        c_vqe_bar,
        n_test: post.len(),
        total_warm: 0.0,
        total_vqe: 0.0,
        break_even: None,
    };
    report.total_warm = report.total_warm_at(post.len() as u64);
    report.total_vqe = report.total_vqe_at(post.len() as u64);
    let gap = c_vqe_bar - c_post_bar;
    if gap > 0.0 {
        let wins = |n: u64| report.total_warm_at(n) < report.total_vqe_at(n);
        let mut n = (c_pre as f64 / gap).floor() as u64 + 1;
        while !wins(n) {
            n += 1;
        }
        while n > 1 && wins(n - 1) {
            n -= 1;
        }
        report.break_even = Some(n);
    }
    Ok(report)
}
