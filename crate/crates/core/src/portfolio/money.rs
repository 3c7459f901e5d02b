//! Exact money in integer cents.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Neg, Sub};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i64);

const CENTS: i64 = 100;
const MILLION: f64 = 1_000_000.0;

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_cents(cents: i64) -> Self {
        Money(cents)
    }

    pub const fn from_units(units: i64) -> Self {
        Money(units * CENTS)
    }

    /// Nearest cent to a floating amount in currency units.
    pub fn from_units_f64(units: f64) -> Self {
        Money((units * CENTS as f64).round() as i64)
    }

    pub fn from_millions(millions: f64) -> Self {
        Money::from_units_f64(millions * MILLION)
    }

    pub const fn cents(self) -> i64 {
        self.0
    }

    pub fn units(self) -> f64 {
        self.0 as f64 / CENTS as f64
    }

    pub fn to_millions(self) -> f64 {
        self.units() / MILLION
    }

    /// Rounded half away from zero to a multiple of `step` currency units.
    pub fn rounded_to(self, step: i64) -> Money {
        let q = step * CENTS;
        let r = self.0.rem_euclid(q);
        let down = self.0 - r;
        let up_wins = if self.0 >= 0 { 2 * r >= q } else { 2 * r > q };
        Money(if up_wins { down + q } else { down })
    }

    pub fn abs_diff(self, other: Money) -> Money {
        Money((self.0 - other.0).abs())
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

/// Whole units with space-separated thousands (`-77 640`); cents appear only when non-zero.
impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let digits = (abs / CENTS as u64).to_string();
        let mut grouped = String::new();
        for (k, ch) in digits.chars().enumerate() {
            if k > 0 && (digits.len() - k).is_multiple_of(3) {
                grouped.push(' ');
            }
            grouped.push(ch);
        }
        let cents = abs % CENTS as u64;
        if cents == 0 {
            f.pad(&format!("{sign}{grouped}"))
        } else {
            f.pad(&format!("{sign}{grouped}.{cents:02}"))
        }
    }
}

/// Profit over the horizon: everything still held plus everything taken out, minus what was put in.
pub fn profit(remained: Money, withdrawals: Money, initial_capital: Money) -> Money {
    remained + withdrawals - initial_capital
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profit_is_exact() {
        let m = Money::from_units;
        assert_eq!(profit(m(3_697_200), m(1_857_300), m(5_000_000)), m(554_500));
        assert_eq!(profit(m(4_172_400), m(750_000), m(5_000_000)), m(-77_600));
        assert_eq!(profit(m(5_000_000), Money::ZERO, m(5_000_000)), Money::ZERO);
    }

    #[test]
    fn display_groups_thousands() {
        assert_eq!(Money::from_units(-77_640).to_string(), "-77 640");
        assert_eq!(Money::from_units(7_507_800).to_string(), "7 507 800");
        assert_eq!(Money::from_cents(12_345).to_string(), "123.45");
        assert_eq!(Money::ZERO.to_string(), "0");
        assert_eq!(format!("{:>9}|{:<4}|", Money::from_units(250_000), Money::ZERO), "  250 000|0   |");
    }

    #[test]
    fn rounding_to_hundreds() {
        assert_eq!(Money::from_units(554_520).rounded_to(100), Money::from_units(554_500));
        assert_eq!(Money::from_units(554_550).rounded_to(100), Money::from_units(554_600));
        assert_eq!(Money::from_units(-77_640).rounded_to(100), Money::from_units(-77_600));
        assert_eq!(Money::from_units(-77_650).rounded_to(100), Money::from_units(-77_700));
    }

    #[test]
    fn million_conversions() {
        assert_eq!(Money::from_millions(2.7282), Money::from_units(2_728_200));
        assert_eq!(Money::from_units(250_000).to_millions(), 0.25);
    }
}
