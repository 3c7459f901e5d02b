//! Published results for the bundled portfolio instance: the per-path
//! remaining funds and per-stage withdrawals of the three-stage and the
//! moving-horizon solutions, and the corresponding profit table.

use super::money::Money;
use crate::model::ObjectiveMatrix;

/// Scenario paths in enumeration order, `(k1, k2)`.
pub const PATHS: [(&str, &str); 9] = [
    ("S2", "S1"),
    ("S2", "S2"),
    ("S2", "S3"),
    ("S3", "S2"),
    ("S3", "S3"),
    ("S3", "S4"),
    ("S4", "S3"),
    ("S4", "S4"),
    ("S4", "S5"),
];

/// One path of a published solution, in currency units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PublishedPath {
    pub remained: i64,
    /// Withdrawals at stages 0, 1 and 2.
    pub withdrawals: [i64; 3],
}

impl PublishedPath {
    pub fn total_withdrawal(&self) -> Money {
        self.withdrawals.iter().map(|&w| Money::from_units(w)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PublishedSolution {
    pub label: &'static str,
    pub initial_decision: [i64; 5],
    pub paths: [PublishedPath; 9],
    /// Printed profit per path.
    pub profits: [i64; 9],
}

const fn path(remained: i64, w1: i64, w2: i64) -> PublishedPath {
    PublishedPath { remained, withdrawals: [250_000, w1, w2] }
}

pub fn three_stage() -> PublishedSolution {
    PublishedSolution {
        label: "3-stage",
        initial_decision: [1_000_000, 1_000_000, 0, 0, 2_728_200],
        paths: [
            path(3_697_200, 250_020, 1_357_300),
            path(4_127_600, 250_020, 985_500),
            path(4_791_900, 250_020, 366_600),
            path(4_521_000, 250_150, 924_700),
            path(4_944_700, 250_150, 927_900),
            path(5_352_800, 250_150, 797_800),
            path(5_123_500, 500_000, 867_600),
            path(5_583_700, 500_000, 622_300),
            path(7_507_800, 500_000, 250_000),
        ],
        profits: [554_600, 613_200, 658_500, 945_800, 1_372_700, 1_650_700, 1_741_100, 1_956_000, 3_507_800],
    }
}

pub fn moving_horizon() -> PublishedSolution {
    PublishedSolution {
        label: "2x2-stage",
        initial_decision: [1_000_000, 1_584_010, 0, 0, 2_144_190],
        paths: [
            path(4_172_400, 250_000, 250_000),
            path(4_759_800, 250_000, 289_930),
            path(5_172_400, 250_000, 250_000),
            path(4_668_200, 250_000, 782_250),
            path(5_092_100, 250_000, 761_110),
            path(5_667_500, 250_000, 500_000),
            path(4_653_700, 500_000, 1_177_800),
            path(5_366_900, 500_000, 677_300),
            path(7_305_600, 500_000, 250_000),
        ],
        profits: [-77_640, 549_710, 922_360, 950_500, 1_353_200, 1_667_500, 1_581_600, 1_794_200, 3_305_600],
    }
}

impl PublishedSolution {
    /// Objective matrix in currency units: Z1 = remaining funds, Z2 = total withdrawals.
    pub fn objective_matrix(&self) -> ObjectiveMatrix {
        let labels = PATHS.iter().map(|(a, b)| format!("({a},{b})")).collect();
        let values = self
            .paths
            .iter()
            .flat_map(|p| [p.remained as f64, p.total_withdrawal().units()])
            .collect();
        ObjectiveMatrix::new(2, labels, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_layout() {
        let m = three_stage().objective_matrix();
        assert_eq!(m.column_count(), 9);
        assert_eq!(m.get(0, 8), 7_507_800.0);
        assert_eq!(m.get(1, 8), 1_000_000.0);
        assert_eq!(m.labels[0], "(S2,S1)");
    }

    #[test]
    fn stage_zero_withdrawal_is_the_floor_everywhere() {
        for sol in [three_stage(), moving_horizon()] {
            assert!(sol.paths.iter().all(|p| p.withdrawals[0] == 250_000));
        }
    }
}
