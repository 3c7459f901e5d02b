//! Profit robustness across scenario paths.

use std::fmt;

use super::money::{profit, Money};
use super::PortfolioError;
use crate::model::ObjectiveMatrix;

/// Display precision of reported amounts, in currency units.
pub const DISPLAY_STEP: i64 = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobustnessRow {
    pub label: String,
    pub remained: Money,
    pub total_withdrawal: Money,
    pub profit: Money,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobustnessReport {
    pub rows: Vec<RobustnessRow>,
    pub min_acceptable_profit: Money,
    /// Every path reaches the minimum acceptable profit.
    pub robust: bool,
    /// Index, label and profit of the least profitable path (first on ties).
    pub worst: Option<(usize, String, Money)>,
}

/// `matrix` holds Z1 (remaining funds) and Z2 (total withdrawals) per path, in currency units.
pub fn robustness_report(
    matrix: &ObjectiveMatrix,
    threshold: Money,
    capital: Money,
) -> Result<RobustnessReport, PortfolioError> {
    if matrix.m != 2 {
        return Err(PortfolioError::ObjectiveCount(matrix.m));
    }
    let rows: Vec<RobustnessRow> = (0..matrix.column_count())
        .map(|k| {
            let remained = Money::from_units_f64(matrix.get(0, k));
            let total_withdrawal = Money::from_units_f64(matrix.get(1, k));
            RobustnessRow {
                label: matrix.labels.get(k).cloned().unwrap_or_else(|| format!("s{}", k + 1)),
                remained,
                total_withdrawal,
                profit: profit(remained, total_withdrawal, capital),
            }
        })
        .collect();
    let worst = rows
        .iter()
        .enumerate()
        .min_by_key(|(k, r)| (r.profit, *k))
        .map(|(k, r)| (k, r.label.clone(), r.profit));
    let robust = rows.iter().all(|r| r.profit >= threshold);
    Ok(RobustnessReport { rows, min_acceptable_profit: threshold, robust, worst })
}

impl fmt::Display for RobustnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>12} {:>12} {:>12}", "path", "remained", "withdrawn", "profit")?;
        for r in &self.rows {
            let show = |m: Money| m.rounded_to(DISPLAY_STEP).to_string();
            writeln!(
                f,
                "{:<10} {:>12} {:>12} {:>12}",
                r.label,
                show(r.remained),
                show(r.total_withdrawal),
                show(r.profit)
            )?;
        }
        let verdict = if self.robust { "robust" } else { "not robust" };
        write!(f, "minimum acceptable profit {}: {verdict}", self.min_acceptable_profit)?;
        if let Some((_, label, p)) = &self.worst {
            write!(f, "; worst path {label} with {}", p.rounded_to(DISPLAY_STEP))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::data;

    #[test]
    fn all_zero_is_trivially_robust() {
        let m = ObjectiveMatrix::new(2, vec!["a".into(), "b".into()], vec![0.0; 4]);
        let r = robustness_report(&m, Money::ZERO, Money::ZERO).unwrap();
        assert!(r.robust);
        assert!(r.rows.iter().all(|row| row.profit == Money::ZERO));
        assert_eq!(r.worst, Some((0, "a".into(), Money::ZERO)));
    }

    #[test]
    fn moving_horizon_worst_path() {
        let m = data::moving_horizon().objective_matrix();
        let r = robustness_report(&m, Money::from_units(500_000), Money::from_units(5_000_000)).unwrap();
        assert!(!r.robust);
        let (idx, label, p) = r.worst.clone().unwrap();
        assert_eq!((idx, label.as_str(), p), (0, "(S2,S1)", Money::from_units(-77_600)));
        assert!(r.to_string().contains("not robust"));
    }

    #[test]
    fn wrong_objective_count_is_rejected() {
        let m = ObjectiveMatrix::new(1, vec!["a".into()], vec![0.0]);
        assert_eq!(robustness_report(&m, Money::ZERO, Money::ZERO), Err(PortfolioError::ObjectiveCount(1)));
    }
}
