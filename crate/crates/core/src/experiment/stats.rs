//! Summary statistics for experiment tables.

use serde::{Deserialize, Serialize};

/// Relative change against the manual heuristic: `(method - manual) / manual`.
pub fn improvement(method: f64, manual: f64) -> f64 {
    (method - manual) / manual
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// Exact two-sided binomial p-value over the untied pairs.
    pub p_value: f64,
}

impl SignTest {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Paired sign test of `a` against `b`; ties are discarded.
pub fn sign_test(a: &[f64], b: &[f64]) -> SignTest {
    assert_eq!(a.len(), b.len(), "sign test needs paired samples");
    let wins = a.iter().zip(b).filter(|(x, y)| x > y).count();
    let losses = a.iter().zip(b).filter(|(x, y)| x < y).count();
    let ties = a.len() - wins - losses;
    let n = wins + losses;
    let k = wins.min(losses);
    let tail: f64 = (0..=k).map(|i| binomial_pmf_half(n, i)).sum();
    SignTest { wins, losses, ties, p_value: (2.0 * tail).min(1.0) }
}

/// `C(n, k) / 2^n`, computed in log space.
fn binomial_pmf_half(n: usize, k: usize) -> f64 {
    let ln_choose: f64 = (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum();
    (ln_choose - n as f64 * std::f64::consts::LN_2).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_comparison_is_zero() {
        assert_eq!(improvement(114.65, 114.65), 0.0);
        assert!((improvement(136.17, 114.65) - 0.187702).abs() < 1e-6);
    }

    #[test]
    fn sign_test_matches_binomial_table() {
        // Ten straight wins: p = 2 / 1024.
        let a = [2.0; 10];
        let b = [1.0; 10];
        let t = sign_test(&a, &b);
        assert_eq!((t.wins, t.losses, t.ties), (10, 0, 0));
        assert!((t.p_value - 2.0 / 1024.0).abs() < 1e-15);
        assert!(t.significant(0.05));
        // 8 of 10: p = 2 * (1 + 10 + 45) / 1024.
        let a = [2., 2., 2., 2., 2., 2., 2., 2., 0., 0.];
        let t = sign_test(&a, &[1.0; 10]);
        assert!((t.p_value - 112.0 / 1024.0).abs() < 1e-15);
        assert!(!t.significant(0.05));
    }

    #[test]
    fn ties_are_dropped_and_balance_gives_one() {
        let t = sign_test(&[1.0, 2.0, 0.0, 5.0], &[1.0, 1.0, 1.0, 5.0]);
        assert_eq!((t.wins, t.losses, t.ties), (1, 1, 2));
        assert_eq!(t.p_value, 1.0);
        assert_eq!(sign_test(&[], &[]).p_value, 1.0);
    }

    #[test]
    fn spread() {
        assert_eq!(sd(&[3.0]), 0.0);
        assert!((sd(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
