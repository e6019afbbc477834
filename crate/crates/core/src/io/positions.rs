use std::collections::BTreeMap;
use std::path::Path;

use super::{read_file, FormatError};
use crate::error::{Error, Result};
use crate::geometry::Position;

/// Parses one position per line as `index x y z` (meters). Fields may be
/// separated by commas, semicolons, tabs or spaces. Blank lines and text
/// after `#` are ignored. Positions are returned ordered by index, and the
/// indices must be exactly `0..count`.
pub fn import_positions(text: &str) -> Result<Vec<Position>> {
    let mut by_index: BTreeMap<usize, (usize, Position)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_error = |message: String| -> Error { FormatError::Parse { line: line_no, message }.into() };
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() != 4 {
            return Err(parse_error(format!("expected 4 fields (index, x, y, z), found {}", fields.len())));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|_| parse_error(format!("bad index '{}'", fields[0])))?;
        let mut position = [0.0; 3];
        for (axis, field) in fields[1..].iter().enumerate() {
            let value: f64 = field
                .parse()
                .map_err(|_| parse_error(format!("bad coordinate '{field}'")))?;
            if !value.is_finite() {
                return Err(parse_error(format!("coordinate '{field}' is not finite")));
            }
            position[axis] = value;
        }
        if let Some((first, _)) = by_index.insert(index, (line_no, position)) {
            return Err(parse_error(format!("index {index} already defined on line {first}")));
        }
    }
    if by_index.is_empty() {
        return Err(Error::invalid("positions", "no positions found"));
    }
    for (expected, (&index, &(line_no, _))) in by_index.iter().enumerate() {
        if index != expected {
            return Err(FormatError::Parse {
                line: line_no,
                message: format!("indices must be contiguous from 0; index {expected} is missing"),
            }
            .into());
        }
    }
    Ok(by_index.into_values().map(|(_, p)| p).collect())
}

pub fn read_positions(path: impl AsRef<Path>) -> Result<Vec<Position>> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|e| Error::invalid("positions", format!("{}: not UTF-8 ({e})", path.display())))?;
    import_positions(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_line(err: Error) -> usize {
        match err {
            Error::Format(FormatError::Parse { line, .. }) => line,
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn single_position() {
        assert_eq!(import_positions("0, 1.0, 2.0, 3.0").unwrap(), vec![[1.0, 2.0, 3.0]]);
    }

    #[test]
    fn mixed_delimiters_comments_and_ordering() {
        let text = "# header\n1\t4 5 6\n\n0;1;2;3  # first\n";
        assert_eq!(
            import_positions(text).unwrap(),
            vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]
        );
    }

    #[test]
    fn duplicate_index_is_rejected() {
        let err = import_positions("0,0,0,0\n0,1,1,1\n").unwrap_err();
        assert_eq!(parse_line(err), 2);
    }

    #[test]
    fn non_finite_and_malformed_lines_name_the_line() {
        assert_eq!(parse_line(import_positions("0,0,0,0\n1,NaN,0,0").unwrap_err()), 2);
        assert_eq!(parse_line(import_positions("0,inf,0,0").unwrap_err()), 1);
        assert_eq!(parse_line(import_positions("\n\n0,1,2").unwrap_err()), 3);
        assert_eq!(parse_line(import_positions("x,1,2,3").unwrap_err()), 1);
    }

    #[test]
    fn gaps_are_rejected() {
        assert!(import_positions("0,0,0,0\n2,1,1,1\n").is_err());
    }

    #[test]
    fn thirty_two_lines() {
        let text: String = (0..32).map(|i| format!("{i}, {}, 0.0, 1.5\n", i as f64 * 0.05)).collect();
        let positions = import_positions(&text).unwrap();
        assert_eq!(positions.len(), 32);
        assert_eq!(positions[31], [31.0 * 0.05, 0.0, 1.5]);
    }
}
