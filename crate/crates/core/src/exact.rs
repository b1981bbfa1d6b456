//! Exactly rounded floating-point sums.
//!
//! Partials are kept as a list of non-overlapping doubles (Shewchuk's
//! algorithm), so the final result is the correctly rounded value of the
//! exact real sum regardless of term order. Products are split exactly with
//! an FMA before accumulation.

use alloc::vec::Vec;

#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        ExactSum { partials: Vec::new() }
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for k in 0..self.partials.len() {
            let mut y = self.partials[k];
            if libm::fabs(x) < libm::fabs(y) {
                core::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    /// Adds `a·b` exactly (barring overflow and underflow).
    pub fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        let e = libm::fma(a, b, -p);
        self.add(p);
        if e != 0.0 {
            self.add(e);
        }
    }

    /// The exact sum rounded once to nearest, ties to even.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let Some(mut n) = p.len().checked_sub(1) else { return 0.0 };
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Round half-even correctly when the remaining partials push the
        // halfway case one way or the other.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

pub fn exact_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = ExactSum::new();
    for x in xs {
        s.add(x);
    }
    s.value()
}

/// Correctly rounded `Σ a_i·b_i`.
pub fn exact_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = ExactSum::new();
    for (x, y) in a.iter().zip(b) {
        s.add_product(*x, *y);
    }
    s.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn cancellation() {
        assert_eq!(exact_sum([1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum([0.1; 10]), 1.0);
        assert_eq!(exact_sum(Vec::new()), 0.0);
    }

    #[test]
    fn products_are_exact() {
        let a = 1.0 + f64::EPSILON;
        // a·a = 1 + 2ε + ε², which a plain multiply rounds to 1 + 2ε.
        assert_eq!(exact_dot(&[a, -1.0], &[a, 1.0 + 2.0 * f64::EPSILON]), f64::EPSILON * f64::EPSILON);
    }

    proptest! {
        #[test]
        fn order_independent(mut xs in proptest::collection::vec(-1e6f64..1e6, 0..40), seed in 0u64..1000) {
            let a = exact_sum(xs.iter().copied());
            let n = xs.len();
            if n > 1 {
                let k = (seed as usize) % n;
                xs.rotate_left(k);
                xs.reverse();
            }
            prop_assert_eq!(a, exact_sum(xs.iter().copied()));
        }

        #[test]
        fn matches_integer_arithmetic(xs in proptest::collection::vec(-1_000_000i64..1_000_000, 0..50)) {
            let want: i64 = xs.iter().sum();
            let got = exact_sum(xs.iter().map(|&x| x as f64 * 0.25));
            prop_assert_eq!(got, want as f64 * 0.25);
        }

        #[test]
        fn split_products_agree(c in 1e-9f64..1e-3, ks in proptest::collection::vec(0u32..5000, 1..20)) {
            // c·(Σk) summed once equals Σ c·k summed exactly.
            let total: u64 = ks.iter().map(|&k| k as u64).sum();
            let whole = exact_dot(&[c], &[total as f64]);
            let parts: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
            let split = exact_dot(&vec![c; ks.len()], &parts);
            prop_assert_eq!(whole, split);
        }
    }
}
