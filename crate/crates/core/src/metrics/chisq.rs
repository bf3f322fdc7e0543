//! Pearson's chi-squared test of independence on a 2x2 table.

use statrs::function::erf::{erfc, erfc_inv};

use super::MetricsError;

/// Cross-tabulated correctness: row = source correct/incorrect, column =
/// target correct/incorrect. Index 0 is "correct".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Contingency2x2 {
    pub cells: [[u64; 2]; 2],
}

impl Contingency2x2 {
    pub fn new(cells: [[u64; 2]; 2]) -> Self {
        Self { cells }
    }

    pub fn increment(&mut self, src_correct: bool, tgt_correct: bool) {
        self.cells[usize::from(!src_correct)][usize::from(!tgt_correct)] += 1;
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> [u64; 2] {
        [self.cells[0][0] + self.cells[0][1], self.cells[1][0] + self.cells[1][1]]
    }

    pub fn col_sums(&self) -> [u64; 2] {
        [self.cells[0][0] + self.cells[1][0], self.cells[0][1] + self.cells[1][1]]
    }

    pub fn transpose(&self) -> Self {
        let c = self.cells;
        Self::new([[c[0][0], c[1][0]], [c[0][1], c[1][1]]])
    }

    pub fn merge(&mut self, other: &Self) {
        for r in 0..2 {
            for c in 0..2 {
                self.cells[r][c] += other.cells[r][c];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
}

impl ChiSquareResult {
    /// True when independence is rejected at significance `alpha`, which is the
    /// same as the statistic exceeding the (1 - alpha) quantile.
    pub fn reject_at(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Upper tail of the chi-squared distribution with one degree of freedom.
pub fn chi2_1_sf(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        erfc((x / 2.0).sqrt())
    }
}

/// Critical value of the chi-squared(1) distribution at significance `alpha`.
pub fn chi2_1_critical(alpha: f64) -> f64 {
    let z = erfc_inv(alpha);
    2.0 * z * z
}

/// Pearson statistic over the four cells. `yates` subtracts 0.5 from every
/// |O - E| (floored at zero).
pub fn chi_square_2x2(table: &Contingency2x2, yates: bool) -> Result<ChiSquareResult, MetricsError> {
    let rows = table.row_sums();
    let cols = table.col_sums();
    if rows.contains(&0) || cols.contains(&0) {
        return Err(MetricsError::DegenerateTable { cells: table.cells });
    }
    let total = table.total() as f64;
    let mut statistic = 0.0;
    for (r, row) in table.cells.iter().enumerate() {
        for (c, &observed) in row.iter().enumerate() {
            let expected = rows[r] as f64 * cols[c] as f64 / total;
            let mut dev = (observed as f64 - expected).abs();
            if yates {
                dev = (dev - 0.5).max(0.0);
            }
            statistic += dev * dev / expected;
        }
    }
    Ok(ChiSquareResult {
        statistic,
        df: 1,
        p_value: chi2_1_sf(statistic),
    })
}
