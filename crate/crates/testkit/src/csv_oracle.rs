//! Minimal RFC 4180 reader, written from the grammar rather than with the
//! csv crate used by the exporters.

pub fn parse(text: &str) -> Result<Vec<Vec<String>>, String> {
    let mut rows = Vec::new();
    let mut row = Vec::new();
    let mut field = String::new();
    let mut chars = text.chars().peekable();
    let mut quoted = false;
    let mut at_field_start = true;
    while let Some(c) = chars.next() {
        if quoted {
            match c {
                '"' if chars.peek() == Some(&'"') => {
                    chars.next();
                    field.push('"');
                }
                '"' => {
                    quoted = false;
                    match chars.peek() {
                        Some(',') | Some('\r') | Some('\n') | None => {}
                        Some(other) => return Err(format!("junk '{other}' after closing quote")),
                    }
                }
                _ => field.push(c),
            }
            continue;
        }
        match c {
            '"' if at_field_start => {
                quoted = true;
                at_field_start = false;
            }
            '"' => return Err("bare quote inside unquoted field".into()),
            ',' => {
                row.push(std::mem::take(&mut field));
                at_field_start = true;
            }
            '\r' if chars.peek() == Some(&'\n') => {}
            '\n' => {
                row.push(std::mem::take(&mut field));
                rows.push(std::mem::take(&mut row));
                at_field_start = true;
            }
            _ => {
                field.push(c);
                at_field_start = false;
            }
        }
    }
    if quoted {
        return Err("unterminated quoted field".into());
    }
    if !field.is_empty() || !row.is_empty() {
        row.push(field);
        rows.push(row);
    }
    Ok(rows)
}

/// `HH:MM:SS.mmm` to milliseconds.
pub fn parse_timestamp(s: &str) -> Result<u64, String> {
    let bad = || format!("bad timestamp '{s}'");
    let (hms, ms) = s.split_once('.').ok_or_else(bad)?;
    let parts: Vec<&str> = hms.split(':').collect();
    if parts.len() != 3 || ms.len() != 3 || parts[1].len() != 2 || parts[2].len() != 2 {
        return Err(bad());
    }
    let n = |x: &str| x.parse::<u64>().map_err(|_| bad());
    let (h, m, sec, milli) = (n(parts[0])?, n(parts[1])?, n(parts[2])?, n(ms)?);
    if m >= 60 || sec >= 60 {
        return Err(bad());
    }
    Ok(((h * 60 + m) * 60 + sec) * 1000 + milli)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting() {
        let rows = parse("a,\"b,\"\"c\"\"\",\"x\r\ny\"\r\n,\r\n").unwrap();
        assert_eq!(rows, vec![vec!["a", "b,\"c\"", "x\r\ny"], vec!["", ""]]);
        assert!(parse("\"open").is_err());
    }

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("01:02:03.004"), Ok(3_723_004));
        assert!(parse_timestamp("1:2:3").is_err());
    }
}
