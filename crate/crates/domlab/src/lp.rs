//! A small dense simplex solver for the max-margin dominance program.
//!
//! The primal problem: given payoff rows `U[a][c]` for candidate dominator
//! actions `a` and a target row `U[d][c]`, over opponent profiles `c`,
//!
//! ```text
//!   maximize epsilon
//!   s.t.     sum_a x_a U[a][c] - U[d][c] >= epsilon   for every c
//!            sum_a x_a = 1,  x >= 0
//! ```
//!
//! A dense tableau of the primal would need one row per opponent profile,
//! which the enumeration ceiling allows to reach 10^6. Instead we solve the
//! dual, which has one row per candidate action plus one normalization row:
//!
//! ```text
//!   minimize  pi - sum_c y_c U[d][c]
//!   s.t.      sum_c y_c U[a][c] <= pi   for every a
//!             sum_c y_c = 1,  y >= 0,  pi free
//! ```
//!
//! (`y` is the opponent mixture that is hardest to beat.) By strong duality
//! the optimal value equals the primal margin, and the primal mixture `x` is
//! read off the optimal simplex multipliers: `x_a` is the reduced cost of the
//! slack column of row `a`. Two phases with Bland's rule; the problem is
//! heavily degenerate (all slack rows have zero right-hand side), so an
//! anti-cycling rule is not optional.

use crate::error::{Error, Result};

/// Result of the max-margin solve.
#[derive(Debug, Clone)]
pub struct MarginSolution {
    /// Optimal margin. Positive iff the target row is strictly dominated by
    /// some mixture of the candidate rows.
    pub margin: f64,
    /// Optimal mixture over the candidate rows, in the order given.
    pub weights: Vec<f64>,
}

const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-10;

/// Maximizes the worst-case margin of a mixture of `candidates` over
/// `target`. Every row must have the same positive length.
pub fn max_margin_mixture(candidates: &[Vec<f64>], target: &[f64]) -> Result<MarginSolution> {
    let n = candidates.len();
    let m = target.len();
    if n == 0 {
        return Err(Error::Domain("no candidate rows for the margin LP".into()));
    }
    if m == 0 || candidates.iter().any(|r| r.len() != m) {
        return Err(Error::Domain(
            "margin LP rows must share one positive length".into(),
        ));
    }
    let finite = target
        .iter()
        .chain(candidates.iter().flatten())
        .all(|v| v.is_finite());
    if !finite {
        return Err(Error::Domain("margin LP needs finite payoffs".into()));
    }

    // Column layout: m profile columns, pi+ , pi-, n slacks, 1 artificial.
    let cols = m + 2 + n + 1;
    let rhs = cols; // extra cell per row
    let pi_plus = m;
    let pi_minus = m + 1;
    let slack0 = m + 2;
    let artificial = m + 2 + n;

    let rows = n + 1; // n action rows plus the normalization row
    let norm_row = n;
    let mut t = vec![vec![0.0f64; cols + 1]; rows];
    for (a, row) in candidates.iter().enumerate() {
        t[a][..m].copy_from_slice(row);
        t[a][pi_plus] = -1.0;
        t[a][pi_minus] = 1.0;
        t[a][slack0 + a] = 1.0;
        // right-hand side stays 0
    }
    for c in 0..m {
        t[norm_row][c] = 1.0;
    }
    t[norm_row][artificial] = 1.0;
    t[norm_row][rhs] = 1.0;

    let mut basis: Vec<usize> = (0..n).map(|a| slack0 + a).collect();
    basis.push(artificial);

    // Phase 1: drive the artificial variable out.
    let mut phase1_costs = vec![0.0; cols];
    phase1_costs[artificial] = 1.0;
    let mut obj = reduced_costs(&t, &basis, &phase1_costs, rhs);
    pivot_until_optimal(&mut t, &mut basis, &mut obj, artificial, rhs)?;
    if -obj[rhs] > 1e-7 {
        // The normalization row is always satisfiable, so this is numerical
        // breakdown rather than genuine infeasibility.
        return Err(Error::Domain(format!(
            "margin LP phase 1 stalled at residual {}",
            -obj[rhs]
        )));
    }
    if let Some(row) = basis.iter().position(|&b| b == artificial) {
        // Degenerate: the artificial is basic at level zero. Swap in any
        // usable column so phase 2 never touches it.
        if let Some(col) = (0..artificial).find(|&j| t[row][j].abs() > PIVOT_TOL) {
            pivot(&mut t, &mut basis, &mut obj, row, col, rhs);
        }
    }

    // Phase 2: the real objective.
    let mut costs = vec![0.0; cols];
    for c in 0..m {
        costs[c] = -target[c];
    }
    costs[pi_plus] = 1.0;
    costs[pi_minus] = -1.0;
    let mut obj = reduced_costs(&t, &basis, &costs, rhs);
    pivot_until_optimal(&mut t, &mut basis, &mut obj, artificial, rhs)?;

    let margin = -obj[rhs];
    let mut weights: Vec<f64> = (0..n).map(|a| obj[slack0 + a].max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.5) {
        return Err(Error::Domain(format!(
            "margin LP multiplier mass {total} is not a distribution"
        )));
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok(MarginSolution { margin, weights })
}

fn reduced_costs(t: &[Vec<f64>], basis: &[usize], costs: &[f64], rhs: usize) -> Vec<f64> {
    let cols = costs.len();
    let mut obj = vec![0.0; cols + 1];
    obj[..cols].copy_from_slice(costs);
    for (i, &b) in basis.iter().enumerate() {
        let cb = costs[b];
        if cb != 0.0 {
            for j in 0..=cols {
                obj[j] -= cb * t[i][j];
            }
        }
    }
    // obj[rhs] now holds -objective_value.
    debug_assert_eq!(rhs, cols);
    obj
}

fn pivot_until_optimal(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    obj: &mut [f64],
    forbidden: usize,
    rhs: usize,
) -> Result<()> {
    // Bland's rule terminates after finitely many pivots; the cap is a
    // tripwire for logic errors, not a tuning knob.
    let max_pivots = 1000 + 200 * (rhs + t.len());
    for _ in 0..max_pivots {
        // Entering: lowest-index column with negative reduced cost.
        let entering = (0..rhs).find(|&j| j != forbidden && obj[j] < -COST_TOL);
        let Some(col) = entering else {
            return Ok(());
        };
        // Leaving: lexicographic (Bland) ratio test.
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in t.iter().enumerate() {
            if row[col] > PIVOT_TOL {
                let ratio = row[rhs] / row[col];
                match best {
                    None => best = Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-12
                            || (ratio < br + 1e-12 && basis[i] < basis[bi])
                        {
                            best = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((row, _)) = best else {
            return Err(Error::Domain(
                "margin LP is unbounded; payoffs are inconsistent".into(),
            ));
        };
        pivot(t, basis, obj, row, col, rhs);
    }
    Err(Error::Domain("margin LP exceeded its pivot budget".into()))
}

fn pivot(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    obj: &mut [f64],
    row: usize,
    col: usize,
    rhs: usize,
) {
    let pivot_val = t[row][col];
    for v in t[row].iter_mut() {
        *v /= pivot_val;
    }
    for i in 0..t.len() {
        if i == row {
            continue;
        }
        let factor = t[i][col];
        if factor != 0.0 {
            for j in 0..=rhs {
                t[i][j] -= factor * t[row][j];
            }
            t[i][col] = 0.0; // kill round-off in the pivot column
        }
    }
    let factor = obj[col];
    if factor != 0.0 {
        for j in 0..=rhs {
            obj[j] -= factor * t[row][j];
        }
        obj[col] = 0.0;
    }
    basis[row] = col;
}
