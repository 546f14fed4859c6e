//! Comma-separated users and arms files.
//!
//! Users: `user_id,segment,f_0,...,f_{D-1}`; arms: `arm_id,t_0,...,t_{D-1}`.
//! A header row is mandatory; its names are free but its column count fixes
//! the dimension every data row must match.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::domain::{ArmParameters, UserProfile};
use crate::error::{Error, Result};

/// Float formatting with 17 significant digits, enough to round-trip.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

struct Rows {
    columns: usize,
    rows: Vec<(usize, Vec<String>)>,
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_rows(path: &Path, min_columns: usize) -> Result<Rows> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header = loop {
        match lines.next() {
            None => {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    message: "missing header row".into(),
                })
            }
            Some((i, line)) => {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                break (i + 1, line);
            }
        }
    };
    let names: Vec<&str> = header.1.split(',').map(str::trim).collect();
    if names.iter().all(|n| n.parse::<f64>().is_ok()) {
        return Err(parse_error(
            path,
            header.0,
            "missing header row (first row is numeric)",
        ));
    }
    if names.len() < min_columns {
        return Err(parse_error(
            path,
            header.0,
            format!(
                "expected at least {min_columns} columns, found {}",
                names.len()
            ),
        ));
    }
    let columns = names.len();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
        if cells.len() != columns {
            return Err(parse_error(
                path,
                i + 1,
                format!("expected {columns} columns, found {}", cells.len()),
            ));
        }
        rows.push((i + 1, cells));
    }
    if rows.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    }
    Ok(Rows { columns, rows })
}

fn parse_floats(path: &Path, line: usize, cells: &[String]) -> Result<Vec<f64>> {
    cells
        .iter()
        .map(|c| {
            let v: f64 = c
                .parse()
                .map_err(|_| parse_error(path, line, format!("`{c}` is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_error(path, line, format!("non-finite value `{c}`")))
            }
        })
        .collect()
}

fn parse_int<T: std::str::FromStr>(path: &Path, line: usize, what: &str, cell: &str) -> Result<T> {
    cell.parse()
        .map_err(|_| parse_error(path, line, format!("invalid {what} `{cell}`")))
}

/// Reads a users file. The last feature of every row must be the bias 1.0.
pub fn load_users(path: impl AsRef<Path>) -> Result<Vec<UserProfile>> {
    let path = path.as_ref();
    let rows = read_rows(path, 3)?;
    let d = rows.columns - 2;
    rows.rows
        .into_iter()
        .map(|(line, cells)| {
            let user_id = parse_int(path, line, "user id", &cells[0])?;
            let segment = parse_int(path, line, "segment", &cells[1])?;
            let features = parse_floats(path, line, &cells[2..])?;
            if features[d - 1] != 1.0 {
                return Err(parse_error(
                    path,
                    line,
                    format!(
                        "last feature must be the bias 1.0, found {}",
                        features[d - 1]
                    ),
                ));
            }
            Ok(UserProfile {
                user_id,
                features,
                segment,
            })
        })
        .collect()
}

/// Reads an arms file. Arm ids must cover `0..K` exactly; rows are returned
/// sorted by id.
pub fn load_arms(path: impl AsRef<Path>) -> Result<Vec<ArmParameters>> {
    let path = path.as_ref();
    let rows = read_rows(path, 2)?;
    let mut arms = rows
        .rows
        .into_iter()
        .map(|(line, cells)| {
            Ok(ArmParameters {
                arm_id: parse_int(path, line, "arm id", &cells[0])?,
                theta: parse_floats(path, line, &cells[1..])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    arms.sort_by_key(|a| a.arm_id);
    for (i, a) in arms.iter().enumerate() {
        if a.arm_id != i {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("arm ids must be distinct and cover 0..{}", arms.len()),
            });
        }
    }
    Ok(arms)
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn write_header(w: &mut impl Write, lead: &str, prefix: &str, d: usize) -> std::io::Result<()> {
    write!(w, "{lead}")?;
    for j in 0..d {
        write!(w, ",{prefix}_{j}")?;
    }
    writeln!(w)
}

fn write_values(w: &mut impl Write, values: &[f64]) -> std::io::Result<()> {
    for v in values {
        write!(w, ",{}", format_float(*v))?;
    }
    writeln!(w)
}

pub fn write_users(path: impl AsRef<Path>, users: &[UserProfile]) -> Result<()> {
    let d = users.first().map_or(0, |u| u.dim());
    write_file(path.as_ref(), |w| {
        write_header(w, "user_id,segment", "f", d)?;
        for u in users {
            write!(w, "{},{}", u.user_id, u.segment)?;
            write_values(w, &u.features)?;
        }
        Ok(())
    })
}

pub fn write_arms(path: impl AsRef<Path>, arms: &[ArmParameters]) -> Result<()> {
    let d = arms.first().map_or(0, |a| a.theta.len());
    write_file(path.as_ref(), |w| {
        write_header(w, "arm_id", "t", d)?;
        for a in arms {
            write!(w, "{}", a.arm_id)?;
            write_values(w, &a.theta)?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::fs;

    fn tmp(content: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        fs::write(f.path(), content).unwrap();
        f
    }

    #[test]
    fn parses_well_formed_users() {
        let f = tmp("user_id,segment,a,b,bias\n17,0,0.25,-1.5,1\n42,3,1e-3,2.0,1.0\n");
        let users = load_users(f.path()).unwrap();
        assert_eq!(users.len(), 2);
        assert_eq!(users[0].user_id, 17);
        assert_eq!(users[0].features, vec![0.25, -1.5, 1.0]);
        assert_eq!(users[1].segment, 3);
        assert_eq!(users[1].features, vec![1e-3, 2.0, 1.0]);
    }

    #[test]
    fn short_row_names_its_line() {
        let f = tmp("user_id,segment,a,b,bias\n1,0,0.1,0.2,1\n2,0,0.1,1\n");
        let err = load_users(f.path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().contains(":3:"));
    }

    #[test]
    fn rejects_bad_values() {
        for body in [
            "1,0,NaN,1\n",
            "1,0,inf,1\n",
            "1,0,0.5,0.9\n",
            "x,0,0.5,1\n",
            "1,-1,0.5,1\n",
        ] {
            let f = tmp(&format!("id,seg,f0,f1\n{body}"));
            assert!(load_users(f.path()).is_err(), "{body}");
        }
    }

    #[test]
    fn missing_header_or_data() {
        assert!(load_users(tmp("").path()).is_err());
        assert!(load_users(tmp("1,0,0.5,1\n").path()).is_err());
        assert!(load_arms(tmp("arm_id,t0,t1\n").path()).is_err());
        assert!(load_users(Path::new("/nonexistent/users.csv")).is_err());
    }

    #[test]
    fn arm_ids_must_be_contiguous() {
        assert!(load_arms(tmp("id,a\n0,1\n2,1\n").path()).is_err());
        assert!(load_arms(tmp("id,a\n0,1\n0,1\n").path()).is_err());
        let arms = load_arms(tmp("id,a\n1,0.5\n0,0.25\n").path()).unwrap();
        assert_eq!(arms[0].theta, vec![0.25]);
    }

    #[test]
    fn released_dimension() {
        let d = 97;
        let mut content = String::from("user_id,segment");
        for j in 0..d {
            content += &format!(",f{j}");
        }
        content += "\n5,99";
        for j in 0..d {
            content += if j + 1 == d { ",1" } else { ",0.01" };
        }
        content += "\n";
        let users = load_users(tmp(&content).path()).unwrap();
        assert_eq!(users[0].dim(), 97);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn write_then_load_is_identity(
            rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..10),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let users: Vec<UserProfile> = rows.iter().enumerate().map(|(i, r)| UserProfile {
                user_id: i as u64 * 7,
                features: vec![r[0], r[1], 1.0],
                segment: i % 3,
            }).collect();
            let arms: Vec<ArmParameters> = rows.iter().enumerate().map(|(i, r)| ArmParameters {
                arm_id: i,
                theta: r.clone(),
            }).collect();
            write_users(dir.path().join("u.csv"), &users).unwrap();
            write_arms(dir.path().join("a.csv"), &arms).unwrap();
            prop_assert_eq!(load_users(dir.path().join("u.csv")).unwrap(), users);
            prop_assert_eq!(load_arms(dir.path().join("a.csv")).unwrap(), arms);
        }
    }
}
