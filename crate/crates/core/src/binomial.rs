//! Exact generalized binomial coefficients and the kernel-consistency identity
//! for forward trees.

use num_integer::Integer;
use num_traits::{FromPrimitive, Signed};

/// `C(a, k) = a (a-1) ⋯ (a-k+1) / k!` for any integer `a`, including negative
/// ones. Every partial quotient is an integer, so the result is exact.
pub fn binomial<I>(a: i64, k: usize) -> I
where
    I: Integer + Signed + Clone + FromPrimitive,
{
    let mut acc = I::one();
    for i in 0..k {
        let num = I::from_i64(a - i as i64).expect("representable");
        let den = I::from_usize(i + 1).expect("representable");
        acc = acc * num / den;
    }
    acc
}

fn sign<I: Integer + Signed + Clone + FromPrimitive>(k: i64) -> I {
    if k.rem_euclid(2) == 0 {
        I::one()
    } else {
        -I::one()
    }
}

/// Right-hand side of `C(|x|, n-1) = Σ_{r=1}^{n} (-1)^{r-1} C(|w|-|x|+r-2, r-1) C(|w|, n-r)`.
pub fn derived_rhs<I>(x: i64, w: i64, n: usize) -> I
where
    I: Integer + Signed + Clone + FromPrimitive,
{
    (1..=n).fold(I::zero(), |acc, r| {
        let r_i = r as i64;
        acc + sign::<I>(r_i - 1) * binomial::<I>(w - x + r_i - 2, r - 1) * binomial::<I>(w, n - r)
    })
}

/// Both sides of the variant `C(|w|, n-1) = Σ_r (-1)^{n-r} C(|w|-|x|-r-2, r-1) C(|w|, n-r)`.
pub fn variant_sides<I>(x: i64, w: i64, n: usize) -> (I, I)
where
    I: Integer + Signed + Clone + FromPrimitive,
{
    let lhs = binomial::<I>(w, n - 1);
    let rhs = (1..=n).fold(I::zero(), |acc, r| {
        let r_i = r as i64;
        acc + sign::<I>(n as i64 - r_i) * binomial::<I>(w - x - r_i - 2, r - 1) * binomial::<I>(w, n - r)
    });
    (lhs, rhs)
}

/// Outcome of an exhaustive integer check over `0 <= |x| < |w| <= max_w`,
/// `1 <= n <= max_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityReport {
    pub max_w: usize,
    pub max_n: usize,
    pub cases: usize,
    /// `(|x|, |w|, n)` where the derived identity fails.
    pub derived_failures: Vec<(usize, usize, usize)>,
    pub variant_failures: usize,
    /// First failing case of the variant as `(|x|, |w|, n, lhs, rhs)`.
    pub variant_example: Option<(usize, usize, usize, i128, i128)>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.derived_failures.is_empty()
    }
}

pub fn identity_check(max_w: usize, max_n: usize) -> IdentityReport {
    let mut report = IdentityReport {
        max_w,
        max_n,
        cases: 0,
        derived_failures: Vec::new(),
        variant_failures: 0,
        variant_example: None,
    };
    for w in 1..=max_w {
        for x in 0..w {
            for n in 1..=max_n {
                report.cases += 1;
                let (xi, wi) = (x as i64, w as i64);
                if binomial::<i128>(xi, n - 1) != derived_rhs::<i128>(xi, wi, n) {
                    report.derived_failures.push((x, w, n));
                }
                let (l, r) = variant_sides::<i128>(xi, wi, n);
                if l != r {
                    report.variant_failures += 1;
                    report.variant_example.get_or_insert((x, w, n, l, r));
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn generalized_values() {
        assert_eq!(binomial::<i64>(5, 2), 10);
        assert_eq!(binomial::<i64>(2, 3), 0);
        assert_eq!(binomial::<i64>(-1, 3), -1);
        assert_eq!(binomial::<i64>(-2, 1), -2);
        assert_eq!(binomial::<i64>(-1, 0), 1);
        assert_eq!(binomial::<BigInt>(60, 30), BigInt::from(118264581564861424i64));
    }

    #[test]
    fn small_case_by_hand() {
        assert_eq!(binomial::<i64>(1, 1), 1);
        assert_eq!(derived_rhs::<i64>(1, 3, 2), 1);
        assert_eq!(variant_sides::<i64>(1, 3, 2), (3, -5));
    }

    #[test]
    fn exhaustive_range_holds() {
        let r = identity_check(20, 8);
        assert!(r.passed(), "{:?}", r.derived_failures);
        assert_eq!(r.cases, 210 * 8);
        assert!(r.variant_failures > 0);
    }

    #[test]
    fn lanes_agree() {
        for x in 0..12i64 {
            for w in (x + 1)..14 {
                for n in 1..7 {
                    assert_eq!(
                        BigInt::from(derived_rhs::<i128>(x, w, n)),
                        derived_rhs::<BigInt>(x, w, n)
                    );
                }
            }
        }
    }
}
