//! TOPSIS ranking: vector-normalize each criterion column, find the positive
//! and negative ideal points, measure each option's Euclidean distance to
//! both, and order options by relative closeness to the positive ideal.
//!
//! Everything here is generic over [`Scalar`] so the same code ranks `f32`
//! and `f64` matrices.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::TopsisError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl FromStr for Direction {
    type Err = TopsisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "max" | "maximize" => Ok(Direction::Maximize),
            "min" | "minimize" => Ok(Direction::Minimize),
            other => Err(TopsisError::Header(other.to_string())),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Maximize => "max",
            Direction::Minimize => "min",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CriterionSpec {
    pub name: String,
    pub direction: Direction,
}

impl CriterionSpec {
    pub fn new(name: impl Into<String>, direction: Direction) -> Self {
        CriterionSpec {
            name: name.into(),
            direction,
        }
    }

    pub fn maximize(name: impl Into<String>) -> Self {
        Self::new(name, Direction::Maximize)
    }

    pub fn minimize(name: impl Into<String>) -> Self {
        Self::new(name, Direction::Minimize)
    }
}

/// Parses `name:max` / `name:min`.
impl FromStr for CriterionSpec {
    type Err = TopsisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, dir) = s
            .rsplit_once(':')
            .ok_or_else(|| TopsisError::Header(s.to_string()))?;
        if name.trim().is_empty() {
            return Err(TopsisError::Header(s.to_string()));
        }
        let direction = dir
            .parse()
            .map_err(|_| TopsisError::Header(s.to_string()))?;
        Ok(CriterionSpec::new(name.trim(), direction))
    }
}

/// Options (rows) scored against criteria (columns), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionMatrix<T> {
    options: Vec<String>,
    criteria: Vec<CriterionSpec>,
    values: Vec<T>,
}

impl<T: Scalar> DecisionMatrix<T> {
    pub fn new(
        options: Vec<String>,
        criteria: Vec<CriterionSpec>,
        values: Vec<T>,
    ) -> Result<Self, TopsisError> {
        if options.is_empty() {
            return Err(TopsisError::NoOptions);
        }
        if criteria.is_empty() {
            return Err(TopsisError::NoCriteria);
        }
        let mut seen = HashSet::new();
        for c in &criteria {
            if !seen.insert(c.name.as_str()) {
                return Err(TopsisError::DuplicateCriterion(c.name.clone()));
            }
        }
        let expected = options.len() * criteria.len();
        if values.len() != expected {
            return Err(TopsisError::Shape {
                expected,
                actual: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(TopsisError::NonFinite {
                row: pos / criteria.len(),
                column: pos % criteria.len(),
            });
        }
        Ok(DecisionMatrix {
            options,
            criteria,
            values,
        })
    }

    /// Builds a matrix from rows, naming options by their row index.
    pub fn from_rows(criteria: Vec<CriterionSpec>, rows: &[Vec<T>]) -> Result<Self, TopsisError> {
        let options = (0..rows.len()).map(|i| i.to_string()).collect();
        let width = criteria.len();
        let mut values = Vec::with_capacity(rows.len() * width);
        for row in rows {
            if row.len() != width {
                return Err(TopsisError::Shape {
                    expected: width,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(options, criteria, values)
    }

    pub fn options(&self) -> &[String] {
        &self.options
    }

    pub fn criteria(&self) -> &[CriterionSpec] {
        &self.criteria
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn rows(&self) -> usize {
        self.options.len()
    }

    pub fn cols(&self) -> usize {
        self.criteria.len()
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        let w = self.cols();
        &self.values[row * w..(row + 1) * w]
    }

    fn with_values(&self, values: Vec<T>) -> Self {
        DecisionMatrix {
            options: self.options.clone(),
            criteria: self.criteria.clone(),
            values,
        }
    }
}

/// Divides every entry by the Euclidean norm of its column. Zero-norm
/// columns stay zero.
pub fn normalize<T: Scalar>(m: &DecisionMatrix<T>) -> DecisionMatrix<T> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut norms = vec![T::zero(); cols];
    // row-major accumulation keeps the per-column summation order fixed
    for i in 0..rows {
        for (j, norm) in norms.iter_mut().enumerate() {
            let q = m.get(i, j);
            *norm = *norm + q * q;
        }
    }
    for norm in norms.iter_mut() {
        *norm = norm.sqrt();
    }
    let values = m
        .values
        .iter()
        .enumerate()
        .map(|(idx, &q)| {
            let norm = norms[idx % cols];
            if norm == T::zero() {
                T::zero()
            } else {
                q / norm
            }
        })
        .collect();
    m.with_values(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdealPoints<T> {
    pub positive: Vec<T>,
    pub negative: Vec<T>,
}

/// Column-wise best and worst values; a minimize criterion's best is its
/// smallest entry.
pub fn ideal_points<T: Scalar>(m: &DecisionMatrix<T>) -> IdealPoints<T> {
    let mut positive = Vec::with_capacity(m.cols());
    let mut negative = Vec::with_capacity(m.cols());
    for (j, criterion) in m.criteria.iter().enumerate() {
        let (mut lo, mut hi) = (m.get(0, j), m.get(0, j));
        for i in 1..m.rows() {
            let q = m.get(i, j);
            lo = lo.min(q);
            hi = hi.max(q);
        }
        match criterion.direction {
            Direction::Maximize => {
                positive.push(hi);
                negative.push(lo);
            }
            Direction::Minimize => {
                positive.push(lo);
                negative.push(hi);
            }
        }
    }
    IdealPoints { positive, negative }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopsisResult<T> {
    /// Option indices, best first.
    pub order: Vec<usize>,
    /// Relative closeness per option (input order), in `[0, 1]`.
    pub closeness: Vec<T>,
    pub ideal_positive: Vec<T>,
    pub ideal_negative: Vec<T>,
    /// `(distance to positive ideal, distance to negative ideal)` per option.
    pub distances: Vec<(T, T)>,
}

impl<T: Scalar> TopsisResult<T> {
    /// Position of `option` in the ranking, 0 = best.
    pub fn position_of(&self, option: usize) -> Option<usize> {
        self.order.iter().position(|&o| o == option)
    }
}

/// Ranks options with every criterion weighted equally.
pub fn rank<T: Scalar>(m: &DecisionMatrix<T>) -> TopsisResult<T> {
    rank_normalized(normalize(m))
}

/// Ranks options after scaling each normalized column by its weight.
pub fn rank_weighted<T: Scalar>(
    m: &DecisionMatrix<T>,
    weights: &[T],
) -> Result<TopsisResult<T>, TopsisError> {
    if weights.len() != m.cols() {
        return Err(TopsisError::Weights {
            expected: m.cols(),
            actual: weights.len(),
        });
    }
    let normalized = normalize(m);
    let cols = m.cols();
    let values = normalized
        .values
        .iter()
        .enumerate()
        .map(|(idx, &q)| q * weights[idx % cols])
        .collect();
    Ok(rank_normalized(normalized.with_values(values)))
}

fn rank_normalized<T: Scalar>(normalized: DecisionMatrix<T>) -> TopsisResult<T> {
    let ideals = ideal_points(&normalized);
    let n = normalized.rows();
    let mut distances = Vec::with_capacity(n);
    let mut closeness = Vec::with_capacity(n);
    for i in 0..n {
        let row = normalized.row(i);
        let (mut plus, mut minus) = (T::zero(), T::zero());
        for (j, &q) in row.iter().enumerate() {
            let dp = q - ideals.positive[j];
            let dn = q - ideals.negative[j];
            plus = plus + dp * dp;
            minus = minus + dn * dn;
        }
        let (plus, minus) = (plus.sqrt(), minus.sqrt());
        let denom = plus + minus;
        closeness.push(if denom == T::zero() {
            T::half()
        } else {
            minus / denom
        });
        distances.push((plus, minus));
    }
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort: equal closeness keeps ascending index
    order.sort_by(|&a, &b| {
        closeness[b]
            .partial_cmp(&closeness[a])
            .expect("closeness is finite")
    });
    TopsisResult {
        order,
        closeness,
        ideal_positive: ideals.positive,
        ideal_negative: ideals.negative,
        distances,
    }
}

/// Reads a matrix from CSV. The header holds one `name:max|min` column per
/// criterion; an optional leading column without a direction suffix carries
/// option ids.
pub fn read_matrix_csv<R: Read>(reader: R) -> Result<DecisionMatrix<f64>, TopsisError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| TopsisError::Header(e.to_string()))?
        .clone();
    let has_ids = headers.get(0).is_some_and(|h| !h.contains(':'));
    let criteria = headers
        .iter()
        .skip(usize::from(has_ids))
        .map(str::parse)
        .collect::<Result<Vec<CriterionSpec>, _>>()?;
    let mut options = Vec::new();
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| TopsisError::Header(e.to_string()))?;
        let mut fields = record.iter();
        options.push(if has_ids {
            fields.next().unwrap_or_default().to_string()
        } else {
            i.to_string()
        });
        for (j, field) in fields.enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| TopsisError::NonFinite { row: i, column: j })?;
            values.push(v);
        }
    }
    DecisionMatrix::new(options, criteria, values)
}

/// Writes `rank,option,closeness` rows, best first.
pub fn write_result_csv<W: Write, T: Scalar>(
    writer: W,
    m: &DecisionMatrix<T>,
    result: &TopsisResult<T>,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rank", "option", "closeness"])?;
    for (pos, &i) in result.order.iter().enumerate() {
        w.write_record([
            (pos + 1).to_string(),
            m.options()[i].clone(),
            result.closeness[i].to_string(),
        ])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn maxes(n: usize) -> Vec<CriterionSpec> {
        (0..n)
            .map(|j| CriterionSpec::maximize(format!("c{j}")))
            .collect()
    }

    #[test]
    fn normalize_single_option() {
        let m = DecisionMatrix::from_rows(maxes(2), &[vec![5.0, 2.0]]).unwrap();
        assert_eq!(normalize(&m).values(), &[1.0, 1.0]);
    }

    #[test]
    fn normalize_three_four_five() {
        let m = DecisionMatrix::from_rows(maxes(1), &[vec![3.0], vec![4.0]]).unwrap();
        let n = normalize(&m);
        assert_relative_eq!(n.get(0, 0), 0.6, epsilon = 1e-15);
        assert_relative_eq!(n.get(1, 0), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn normalize_zero_column() {
        let m = DecisionMatrix::from_rows(maxes(1), &[vec![0.0], vec![0.0]]).unwrap();
        assert_eq!(normalize(&m).values(), &[0.0, 0.0]);
    }

    #[test]
    fn ideal_points_swap_for_minimize() {
        let rows = [vec![0.6], vec![0.8]];
        let m = DecisionMatrix::from_rows(maxes(1), &rows).unwrap();
        let ideals = ideal_points(&m);
        assert_eq!(ideals.positive, vec![0.8]);
        assert_eq!(ideals.negative, vec![0.6]);

        let m = DecisionMatrix::from_rows(vec![CriterionSpec::minimize("c")], &rows).unwrap();
        let ideals = ideal_points(&m);
        assert_eq!(ideals.positive, vec![0.6]);
        assert_eq!(ideals.negative, vec![0.8]);
    }

    #[test]
    fn dominating_row_wins() {
        let m = DecisionMatrix::from_rows(maxes(2), &[vec![3.0, 4.0], vec![6.0, 8.0]]).unwrap();
        let r = rank(&m);
        assert_eq!(r.order, vec![1, 0]);
        assert_relative_eq!(r.closeness[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.closeness[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_option_gets_half() {
        let m = DecisionMatrix::from_rows(maxes(3), &[vec![1.0, 2.0, 3.0]]).unwrap();
        let r = rank(&m);
        assert_eq!(r.order, vec![0]);
        assert_eq!(r.closeness, vec![0.5]);
    }

    #[test]
    fn identical_rows_keep_input_order() {
        let m = DecisionMatrix::from_rows(maxes(2), &[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        let r = rank(&m);
        assert_eq!(r.order, vec![0, 1]);
        assert_eq!(r.closeness[0], r.closeness[1]);
    }

    #[test]
    fn f32_matrices_rank_the_same() {
        let m =
            DecisionMatrix::<f32>::from_rows(maxes(2), &[vec![3.0, 4.0], vec![6.0, 8.0]]).unwrap();
        assert_eq!(rank(&m).order, vec![1, 0]);
    }

    #[test]
    fn unit_weights_match_unweighted() {
        let rows = [
            vec![1.0, 9.0, 3.0],
            vec![4.0, 2.0, 8.0],
            vec![7.0, 5.0, 6.0],
        ];
        let m = DecisionMatrix::from_rows(maxes(3), &rows).unwrap();
        assert_eq!(rank_weighted(&m, &[1.0, 1.0, 1.0]).unwrap(), rank(&m));
        assert!(rank_weighted(&m, &[1.0]).is_err());
    }

    #[test]
    fn invalid_matrices_are_rejected() {
        assert_eq!(
            DecisionMatrix::<f64>::from_rows(maxes(1), &[]).unwrap_err(),
            TopsisError::NoOptions
        );
        assert_eq!(
            DecisionMatrix::<f64>::from_rows(vec![], &[vec![]]).unwrap_err(),
            TopsisError::NoCriteria
        );
        assert!(matches!(
            DecisionMatrix::from_rows(maxes(2), &[vec![1.0, f64::NAN]]),
            Err(TopsisError::NonFinite { row: 0, column: 1 })
        ));
        let dup = vec![CriterionSpec::maximize("a"), CriterionSpec::minimize("a")];
        assert!(matches!(
            DecisionMatrix::from_rows(dup, &[vec![1.0, 2.0]]),
            Err(TopsisError::DuplicateCriterion(_))
        ));
    }

    #[test]
    fn csv_round_trip_through_cli_format() {
        let input = "sensor,battery:max,price:min\na,80,3\nb,90,1\nc,10,9\n";
        let m = read_matrix_csv(input.as_bytes()).unwrap();
        assert_eq!(m.options(), &["a", "b", "c"]);
        assert_eq!(m.criteria()[1], CriterionSpec::minimize("price"));
        let r = rank(&m);
        assert_eq!(r.order[0], 1);
        let mut out = Vec::new();
        write_result_csv(&mut out, &m, &r).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("rank,option,closeness\n1,b,"));
    }

    #[test]
    fn csv_without_id_column() {
        let m = read_matrix_csv("x:max,y:min\n1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(m.options(), &["0", "1"]);
        assert!(read_matrix_csv("x:up\n1\n".as_bytes()).is_err());
    }
}
