//! Straight-line TOPSIS used as a test oracle. Written directly from the
//! textbook formulas with explicit loops; shares no code with the library.

#![allow(dead_code)]

pub struct OracleRanking {
    pub closeness: Vec<f64>,
    pub order: Vec<usize>,
}

/// `rows[i][j]` is option `i` on criterion `j`; `maximize[j]` gives the
/// criterion direction.
pub fn brute_force_topsis(rows: &[Vec<f64>], maximize: &[bool]) -> OracleRanking {
    let n = rows.len();
    let m = maximize.len();

    let mut q = vec![vec![0.0f64; m]; n];
    for j in 0..m {
        let mut sum_sq = 0.0;
        for row in rows {
            sum_sq += row[j] * row[j];
        }
        let denom = sum_sq.sqrt();
        for i in 0..n {
            q[i][j] = if denom == 0.0 {
                0.0
            } else {
                rows[i][j] / denom
            };
        }
    }

    let mut best = vec![0.0f64; m];
    let mut worst = vec![0.0f64; m];
    for j in 0..m {
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        for i in 0..n {
            if q[i][j] > hi {
                hi = q[i][j];
            }
            if q[i][j] < lo {
                lo = q[i][j];
            }
        }
        if maximize[j] {
            best[j] = hi;
            worst[j] = lo;
        } else {
            best[j] = lo;
            worst[j] = hi;
        }
    }

    let mut closeness = vec![0.0f64; n];
    for i in 0..n {
        let mut s_plus = 0.0;
        let mut s_minus = 0.0;
        for j in 0..m {
            s_plus += (q[i][j] - best[j]).powi(2);
            s_minus += (q[i][j] - worst[j]).powi(2);
        }
        let s_plus = s_plus.sqrt();
        let s_minus = s_minus.sqrt();
        closeness[i] = if s_plus + s_minus == 0.0 {
            0.5
        } else {
            s_minus / (s_plus + s_minus)
        };
    }

    // selection sort: highest closeness first, lowest index on ties
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut order = Vec::with_capacity(n);
    while !remaining.is_empty() {
        let mut pick = 0;
        for k in 1..remaining.len() {
            if closeness[remaining[k]] > closeness[remaining[pick]] {
                pick = k;
            }
        }
        order.push(remaining.remove(pick));
    }
    OracleRanking { closeness, order }
}
