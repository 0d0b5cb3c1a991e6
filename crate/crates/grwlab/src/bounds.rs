//! Bound-curve tables for the exclusion diagram.
//!
//! CSV header `name,kind,rc_m,lambda_s` with an optional trailing `source`
//! column. Rows of one curve must be contiguous.

use std::io::Read;

use grwlab_core::exclusion::{BoundCurve, BoundKind};

use crate::error::{IoError, Result};

pub const DEFAULT_BOUNDS_CSV: &str = include_str!("../data/default_bounds.csv");

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedBounds {
    pub curves: Vec<BoundCurve>,
    pub warnings: Vec<String>,
}

struct Group {
    name: String,
    kind: BoundKind,
    source: String,
    first_row: u64,
    points: Vec<(f64, f64)>,
}

impl Group {
    fn finish(self) -> Result<BoundCurve> {
        let row = self.first_row;
        BoundCurve::new(self.name, self.kind, self.points, self.source).map_err(|e| IoError::Csv {
            row,
            msg: e.to_string(),
        })
    }
}

fn number(field: &str, what: &str, row: u64) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| IoError::Csv {
        row,
        msg: format!("{what} {field:?} is not a number"),
    })
}

/// Parses a bounds table. Rows are numbered from 1 at the header.
pub fn load_bounds<R: Read>(source: R) -> Result<LoadedBounds> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(source);
    let csv_err = |e: csv::Error| IoError::Csv {
        row: e.position().map_or(0, |p| p.line()),
        msg: e.to_string(),
    };
    let mut warnings = Vec::new();
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(csv_err(e)),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        warnings.push("bounds table is empty; every (λ, r_c) will be allowed".to_string());
        return Ok(LoadedBounds {
            curves: Vec::new(),
            warnings,
        });
    }
    let cols: Vec<&str> = headers.iter().collect();
    let has_source = match cols.as_slice() {
        ["name", "kind", "rc_m", "lambda_s"] => false,
        ["name", "kind", "rc_m", "lambda_s", "source"] => true,
        _ => {
            return Err(IoError::Csv {
                row: 1,
                msg: format!("expected header name,kind,rc_m,lambda_s[,source], got {}", cols.join(",")),
            })
        }
    };

    let mut curves = Vec::new();
    let mut seen: Vec<String> = Vec::new();
    let mut current: Option<Group> = None;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let row = record.position().map_or(0, |p| p.line());
        let expected = if has_source { 5 } else { 4 };
        if record.len() != expected {
            return Err(IoError::Csv {
                row,
                msg: format!("expected {expected} fields, found {}", record.len()),
            });
        }
        let name = record[0].to_string();
        let kind = BoundKind::parse(&record[1]).ok_or_else(|| IoError::Csv {
            row,
            msg: format!("unknown kind {:?}", &record[1]),
        })?;
        let rc = number(&record[2], "rc_m", row)?;
        let lambda = number(&record[3], "lambda_s", row)?;
        if !(rc > 0.0 && lambda > 0.0 && rc.is_finite() && lambda.is_finite()) {
            return Err(IoError::Csv {
                row,
                msg: format!("values must be positive and finite, got rc_m={rc}, lambda_s={lambda}"),
            });
        }
        let source = if has_source { record[4].to_string() } else { String::new() };

        match &mut current {
            Some(g) if g.name == name => {
                if g.kind != kind {
                    return Err(IoError::Csv {
                        row,
                        msg: format!("curve {name:?} mixes kinds"),
                    });
                }
                if let Some(&(last, _)) = g.points.last() {
                    if rc <= last {
                        return Err(IoError::Csv {
                            row,
                            msg: format!("rc_m must increase within {name:?}: {rc:e} after {last:e}"),
                        });
                    }
                }
                g.points.push((rc, lambda));
            }
            _ => {
                if seen.contains(&name) {
                    return Err(IoError::Csv {
                        row,
                        msg: format!("rows of curve {name:?} are not contiguous"),
                    });
                }
                if let Some(g) = current.take() {
                    curves.push(g.finish()?);
                }
                seen.push(name.clone());
                current = Some(Group {
                    name,
                    kind,
                    source,
                    first_row: row,
                    points: vec![(rc, lambda)],
                });
            }
        }
    }
    if let Some(g) = current.take() {
        curves.push(g.finish()?);
    }
    if curves.is_empty() {
        warnings.push("bounds table has no rows; every (λ, r_c) will be allowed".to_string());
    }
    Ok(LoadedBounds { curves, warnings })
}

/// The bundled table.
pub fn default_bounds() -> Vec<BoundCurve> {
    load_bounds(DEFAULT_BOUNDS_CSV.as_bytes())
        .expect("bundled bounds table parses")
        .curves
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table() {
        let b = default_bounds();
        let names: Vec<&str> = b.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(
            names,
            ["theory_lower", "current_upper", "interference_upper", "rc_window_min", "rc_window_max"]
        );
        assert_eq!(b[1].kind, BoundKind::UpperOnLambda);
        assert_eq!(b[1].eval(1e-7), 1e-8);
        assert_eq!(b[0].kind, BoundKind::LowerOnLambda);
        assert_eq!(b[0].eval(1e-7), 1e-16);
    }

    #[test]
    fn empty_input_warns() {
        let r = load_bounds("".as_bytes()).unwrap();
        assert!(r.curves.is_empty());
        assert_eq!(r.warnings.len(), 1);
        let r = load_bounds("name,kind,rc_m,lambda_s\n".as_bytes()).unwrap();
        assert!(r.curves.is_empty() && r.warnings.len() == 1);
    }

    #[test]
    fn errors_carry_row_numbers() {
        let cases = [
            ("name,kind,rc_m,lambda_s\na,Sideways,1e-7,1\n", 2),
            ("name,kind,rc_m,lambda_s\na,UpperOnLambda,1e-7,1\na,UpperOnLambda,1e-8,1\n", 3),
            ("name,kind,rc_m,lambda_s\na,UpperOnLambda,1e-7,1\na,UpperOnLambda,1e-6,-1\n", 3),
            (
                "name,kind,rc_m,lambda_s\na,UpperOnLambda,1e-7,1\na,UpperOnLambda,1e-6,1\nb,UpperOnLambda,1e-7,1\nb,UpperOnLambda,1e-6,1\na,UpperOnLambda,1e-5,1\n",
                6,
            ),
            ("name,kind,rc_m,lambda_s\na,UpperOnLambda,1e-7,1\n", 2),
            ("name,kind,rc,lambda\n", 1),
        ];
        for (text, want) in cases {
            match load_bounds(text.as_bytes()) {
                Err(IoError::Csv { row, .. }) => assert_eq!(row, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }
}
