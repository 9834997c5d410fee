use serde::{Deserialize, Serialize};

/// One-sided Wilcoxon signed-rank test of "differences tend to be positive".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    /// Nonzero differences used.
    pub n: usize,
    /// Sum of the ranks of the positive differences.
    pub w_plus: f64,
    /// P(W+ ≥ observed) under the symmetric null, by exact enumeration.
    pub p_value: f64,
}

/// Zero differences are dropped; ties share the average rank. The null
/// distribution is enumerated exactly, so keep `n` moderate (it is O(n³)).
pub fn wilcoxon_signed_rank(differences: &[f64]) -> Wilcoxon {
    let mut d: Vec<f64> = differences.iter().copied().filter(|x| *x != 0.0).collect();
    d.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let n = d.len();
    if n == 0 {
        return Wilcoxon {
            n,
            w_plus: 0.0,
            p_value: 1.0,
        };
    }
    // Doubled ranks keep tied midranks integral.
    let mut ranks2 = vec![0usize; n];
    let mut i = 0;
    while i < n {
        let mut k = i;
        while k + 1 < n && d[k + 1].abs() == d[i].abs() {
            k += 1;
        }
        // Ranks i+1..=k+1 averaged, doubled: (i + 1 + k + 1).
        for r in &mut ranks2[i..=k] {
            *r = i + k + 2;
        }
        i = k + 1;
    }
    let observed2: usize = d.iter().zip(&ranks2).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let total: usize = ranks2.iter().sum();
    let mut ways = vec![0.0f64; total + 1];
    ways[0] = 1.0;
    for &r in &ranks2 {
        for s in (r..=total).rev() {
            ways[s] += ways[s - r];
        }
    }
    let all = 2f64.powi(n as i32);
    let tail: f64 = ways[observed2..].iter().sum();
    Wilcoxon {
        n,
        w_plus: observed2 as f64 / 2.0,
        p_value: tail / all,
    }
}
