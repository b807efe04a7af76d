use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::AnnotationError;
use crate::layout::write_atomic;

/// Colours handed to codes that do not specify one, by position.
pub const PALETTE: [&str; 10] = [
    "#E6194B", "#3CB44B", "#4363D8", "#F58231", "#911EB4", "#42D4F4", "#F032E6", "#BFEF45", "#FABED4", "#469990",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Code {
    pub code: String,
    #[serde(default)]
    pub description: String,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codebook {
    pub name: String,
    pub codes: Vec<Code>,
}

#[derive(Deserialize)]
struct RawCode {
    code: String,
    #[serde(default)]
    description: String,
    color: Option<String>,
}

#[derive(Deserialize)]
struct RawCodebook {
    name: String,
    #[serde(default)]
    codes: Vec<RawCode>,
}

fn valid_color(c: &str) -> bool {
    c.len() == 7 && c.starts_with('#') && c[1..].chars().all(|ch| ch.is_ascii_hexdigit())
}

impl Codebook {
    pub fn new(name: impl Into<String>) -> Codebook {
        Codebook {
            name: name.into(),
            codes: Vec::new(),
        }
    }

    /// Parses codebook JSON; missing colours are filled from [`PALETTE`].
    pub fn from_json(text: &str) -> Result<Codebook, AnnotationError> {
        let raw: RawCodebook = serde_json::from_str(text).map_err(|e| AnnotationError::Parse(e.to_string()))?;
        let book = Codebook {
            name: raw.name,
            codes: raw
                .codes
                .into_iter()
                .enumerate()
                .map(|(i, c)| Code {
                    code: c.code,
                    description: c.description,
                    color: c.color.unwrap_or_else(|| PALETTE[i % PALETTE.len()].to_string()),
                })
                .collect(),
        };
        book.validate()?;
        Ok(book)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("codebook serializes")
    }

    pub fn validate(&self) -> Result<(), AnnotationError> {
        if self.name.trim().is_empty() {
            return Err(AnnotationError::Parse("codebook name is empty".into()));
        }
        let mut seen = HashSet::new();
        for c in &self.codes {
            if c.code.is_empty() {
                return Err(AnnotationError::Parse("empty code".into()));
            }
            if !seen.insert(c.code.as_str()) {
                return Err(AnnotationError::DuplicateCode(c.code.clone()));
            }
            if !valid_color(&c.color) {
                return Err(AnnotationError::Parse(format!("code '{}': color '{}' is not #RRGGBB", c.code, c.color)));
            }
        }
        Ok(())
    }

    pub fn contains(&self, code: &str) -> bool {
        self.codes.iter().any(|c| c.code == code)
    }

    pub fn add_code(&mut self, code: &str, description: &str, color: Option<&str>) -> Result<(), AnnotationError> {
        if self.contains(code) {
            return Err(AnnotationError::DuplicateCode(code.into()));
        }
        let color = color
            .map(str::to_string)
            .unwrap_or_else(|| PALETTE[self.codes.len() % PALETTE.len()].to_string());
        self.codes.push(Code {
            code: code.into(),
            description: description.into(),
            color,
        });
        let checked = self.validate();
        if checked.is_err() {
            self.codes.pop();
        }
        checked
    }

    pub fn remove_code(&mut self, code: &str) -> bool {
        let before = self.codes.len();
        self.codes.retain(|c| c.code != code);
        self.codes.len() != before
    }
}

/// Resolves codebook names during annotation edits.
pub trait CodebookLookup {
    fn codebook(&self, name: &str) -> Option<Codebook>;
}

impl CodebookLookup for [Codebook] {
    fn codebook(&self, name: &str) -> Option<Codebook> {
        self.iter().find(|b| b.name == name).cloned()
    }
}

impl CodebookLookup for Vec<Codebook> {
    fn codebook(&self, name: &str) -> Option<Codebook> {
        self.as_slice().codebook(name)
    }
}

/// Codebooks stored as one JSON file each in a directory.
#[derive(Debug, Clone)]
pub struct Booklist {
    dir: PathBuf,
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

impl Booklist {
    pub fn new(dir: impl Into<PathBuf>) -> Booklist {
        Booklist { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn load_file(path: &Path) -> Result<Codebook, AnnotationError> {
        let text = std::fs::read_to_string(path)?;
        Codebook::from_json(&text).map_err(|e| match e {
            AnnotationError::Parse(m) => AnnotationError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Every codebook, sorted by name.
    pub fn list(&self) -> Result<Vec<Codebook>, AnnotationError> {
        let entries = match std::fs::read_dir(&self.dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut books = Vec::new();
        for entry in entries {
            let path = entry?.path();
            if path.extension().is_some_and(|x| x == "json") {
                books.push(Booklist::load_file(&path)?);
            }
        }
        books.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(books)
    }

    pub fn get(&self, name: &str) -> Result<Codebook, AnnotationError> {
        let path = self.dir.join(format!("{}.json", file_stem(name)));
        match Booklist::load_file(&path) {
            Ok(b) if b.name == name => Ok(b),
            Ok(_) => Err(AnnotationError::UnknownCodebook(name.into())),
            Err(AnnotationError::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(AnnotationError::UnknownCodebook(name.into()))
            }
            Err(e) => Err(e),
        }
    }

    /// Creates or replaces the codebook with this name.
    pub fn save(&self, book: &Codebook) -> Result<PathBuf, AnnotationError> {
        book.validate()?;
        let path = self.dir.join(format!("{}.json", file_stem(&book.name)));
        if path.exists() {
            let existing = Booklist::load_file(&path)?;
            if existing.name != book.name {
                return Err(AnnotationError::DuplicateCodebook(format!(
                    "'{}' would overwrite '{}'",
                    book.name, existing.name
                )));
            }
        }
        write_atomic(&path, book.to_json().as_bytes())?;
        Ok(path)
    }

    pub fn delete(&self, name: &str) -> Result<(), AnnotationError> {
        self.get(name)?;
        std::fs::remove_file(self.dir.join(format!("{}.json", file_stem(name))))?;
        Ok(())
    }
}

impl CodebookLookup for Booklist {
    fn codebook(&self, name: &str) -> Option<Codebook> {
        self.get(name).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_example() {
        let b = Codebook::from_json(
            r##"{"name":"gestures","codes":[{"code":"point","description":"...","color":"#FF0000"}]}"##,
        )
        .unwrap();
        assert_eq!(b.codes.len(), 1);
        assert_eq!(b.codes[0].color, "#FF0000");
    }

    #[test]
    fn duplicate_code() {
        let r = Codebook::from_json(r#"{"name":"g","codes":[{"code":"point"},{"code":"point"}]}"#);
        assert!(matches!(r, Err(AnnotationError::DuplicateCode(c)) if c == "point"));
    }

    #[test]
    fn colours_rotate() {
        let codes: Vec<String> = (0..12).map(|i| format!(r#"{{"code":"c{i}"}}"#)).collect();
        let b = Codebook::from_json(&format!(r#"{{"name":"g","codes":[{}]}}"#, codes.join(","))).unwrap();
        assert_eq!(b.codes[0].color, PALETTE[0]);
        assert_eq!(b.codes[11].color, PALETTE[1]);
    }

    #[test]
    fn bad_colour() {
        let r = Codebook::from_json(r#"{"name":"g","codes":[{"code":"a","color":"red"}]}"#);
        assert!(matches!(r, Err(AnnotationError::Parse(_))));
    }

    #[test]
    fn booklist_edit_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let list = Booklist::new(tmp.path());
        let mut b = Codebook::new("gesture codes");
        b.add_code("point", "index finger", None).unwrap();
        list.save(&b).unwrap();
        let mut loaded = list.get("gesture codes").unwrap();
        loaded.add_code("wave", "", Some("#00FF00")).unwrap();
        list.save(&loaded).unwrap();
        assert_eq!(list.get("gesture codes").unwrap().codes.len(), 2);
        assert_eq!(list.list().unwrap().len(), 1);

        let clash = Codebook::new("gesture_codes");
        assert!(matches!(list.save(&clash), Err(AnnotationError::DuplicateCodebook(_))));
        assert!(matches!(list.get("nope"), Err(AnnotationError::UnknownCodebook(_))));
        list.delete("gesture codes").unwrap();
        assert!(list.list().unwrap().is_empty());
    }
}
