use serde::{Deserialize, Serialize};

use super::parser::{validate, yes_no};
use super::{CompareOp, Literal, Predicate, PredicateError};
use crate::dataset::{parse_bool_token, ColumnData, Dataset};

/// Rows of a dataset selected by a predicate; `rows` is strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub predicate: Predicate,
    pub rows: Vec<usize>,
}

impl Slice {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row membership as a dense mask of length `n_rows`.
    pub fn mask(&self, n_rows: usize) -> Vec<bool> {
        let mut m = vec![false; n_rows];
        for &r in &self.rows {
            m[r] = true;
        }
        m
    }

    pub fn from_mask(predicate: Predicate, mask: &[bool]) -> Self {
        Slice {
            predicate,
            rows: mask
                .iter()
                .enumerate()
                .filter_map(|(i, &b)| b.then_some(i))
                .collect(),
        }
    }
}

/// Evaluates `predicate` over every row of `dataset`.
pub fn eval_predicate(predicate: &Predicate, dataset: &Dataset) -> Result<Slice, PredicateError> {
    let mask = eval_mask(predicate, dataset)?;
    Ok(Slice::from_mask(predicate.clone(), &mask))
}

pub fn eval_mask(predicate: &Predicate, dataset: &Dataset) -> Result<Vec<bool>, PredicateError> {
    validate(predicate, dataset)?;
    Ok(mask_of(predicate, dataset))
}

fn mask_of(p: &Predicate, ds: &Dataset) -> Vec<bool> {
    match p {
        Predicate::And(a, b) => {
            let mut m = mask_of(a, ds);
            for (x, y) in m.iter_mut().zip(mask_of(b, ds)) {
                *x &= y;
            }
            m
        }
        Predicate::Or(a, b) => {
            let mut m = mask_of(a, ds);
            for (x, y) in m.iter_mut().zip(mask_of(b, ds)) {
                *x |= y;
            }
            m
        }
        Predicate::Compare { column, op, value } => {
            leaf_mask(ds, column, |cell| cell_matches(cell, *op, value))
        }
        Predicate::InSet { column, values } => leaf_mask(ds, column, |cell| {
            values
                .iter()
                .any(|v| cell_matches(cell, CompareOp::Eq, v))
        }),
    }
}

#[derive(Clone, Copy)]
enum Cell<'a> {
    Num(f64),
    Level(&'a str),
    Bool(bool),
}

fn leaf_mask(ds: &Dataset, column: &str, test: impl Fn(Cell<'_>) -> bool) -> Vec<bool> {
    let col = ds.column(column).expect("validated column");
    match col.data() {
        ColumnData::Numeric(v) => v.iter().map(|&x| test(Cell::Num(x))).collect(),
        ColumnData::Categorical { levels, codes } => {
            let hit: Vec<bool> = levels.iter().map(|l| test(Cell::Level(l))).collect();
            codes.iter().map(|&c| hit[c as usize]).collect()
        }
        ColumnData::Boolean { values, .. } => {
            let (f, t) = (test(Cell::Bool(false)), test(Cell::Bool(true)));
            values.iter().map(|&b| if b { t } else { f }).collect()
        }
    }
}

fn literal_bool(lit: &Literal) -> Option<bool> {
    match lit {
        Literal::Number(x) if *x == 1.0 => Some(true),
        Literal::Number(x) if *x == 0.0 => Some(false),
        Literal::Number(_) => None,
        Literal::Text(s) => parse_bool_token(s).or_else(|| yes_no(s)),
    }
}

fn cell_matches(cell: Cell<'_>, op: CompareOp, lit: &Literal) -> bool {
    match (cell, lit) {
        (Cell::Num(x), Literal::Number(y)) => op.apply(x, *y),
        (Cell::Num(_), Literal::Text(_)) => false,
        (Cell::Level(l), Literal::Text(s)) => op.apply(l, s.as_str()),
        (Cell::Level(l), Literal::Number(y)) => {
            let same = l.parse::<f64>().is_ok_and(|x| x == *y);
            match op {
                CompareOp::Eq => same,
                CompareOp::Ne => !same,
                _ => false,
            }
        }
        (Cell::Bool(b), lit) => match (op.is_ordering(), lit) {
            (true, Literal::Number(y)) => op.apply(b as u8 as f64, *y),
            (true, Literal::Text(_)) => false,
            (false, _) => literal_bool(lit).is_some_and(|v| op.apply(b, v)),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Column;

    fn ds() -> Dataset {
        Dataset::new(
            "t",
            vec![
                Column::numeric("age", vec![70.0, 72.0, 90.0]),
                Column::numeric("a", vec![1.0, 2.0, 3.0]),
                Column::categorical("c", &["x", "y", "x"]),
                Column::boolean_labeled("d", vec![true, false, true], "Y", "N"),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn filters_rows() {
        let d = ds();
        let s = eval_predicate(&Predicate::num("age", CompareOp::Ge, 72.0), &d).unwrap();
        assert_eq!(s.rows, vec![1, 2]);
        let p = Predicate::num("a", CompareOp::Eq, 1.0).or(Predicate::num("a", CompareOp::Eq, 2.0));
        assert_eq!(eval_predicate(&p, &d).unwrap().rows, vec![0, 1]);
        let p = Predicate::text("c", CompareOp::Eq, "x").and(Predicate::text("d", CompareOp::Eq, "Y"));
        assert_eq!(eval_predicate(&p, &d).unwrap().rows, vec![0, 2]);
        let p = Predicate::text("d", CompareOp::Ne, "Y");
        assert_eq!(eval_predicate(&p, &d).unwrap().rows, vec![1]);
        let p = Predicate::InSet {
            column: "c".into(),
            values: vec![Literal::Text("y".into()), Literal::Text("zz".into())],
        };
        assert_eq!(eval_predicate(&p, &d).unwrap().rows, vec![1]);
    }

    #[test]
    fn unknown_column_is_an_error() {
        assert!(eval_predicate(&Predicate::num("zzz", CompareOp::Eq, 1.0), &ds()).is_err());
    }
}
