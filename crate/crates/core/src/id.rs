//! Template identifiers of the form `subject/eye/sample`.

use std::fmt;
use std::str::FromStr;

use crate::error::IrisError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Eye {
    Left,
    Right,
}

impl Eye {
    pub fn letter(self) -> char {
        match self {
            Eye::Left => 'L',
            Eye::Right => 'R',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TemplateId {
    pub subject: String,
    pub eye: Eye,
    pub sample: String,
}

impl TemplateId {
    pub fn new(subject: impl Into<String>, eye: Eye, sample: impl Into<String>) -> Result<Self, IrisError> {
        let id = Self {
            subject: subject.into(),
            eye,
            sample: sample.into(),
        };
        for part in [&id.subject, &id.sample] {
            if part.is_empty() || part.contains(['/', '\t', '\n', '\\']) || part == "." || part == ".." {
                return Err(IrisError::InvalidArgument(format!("bad id component '{part}'")));
            }
        }
        Ok(id)
    }

    /// Same subject and eye.
    pub fn same_class(&self, other: &Self) -> bool {
        self.subject == other.subject && self.eye == other.eye
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.subject, self.eye.letter(), self.sample)
    }
}

impl FromStr for TemplateId {
    type Err = IrisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('/').collect();
        let [subject, eye, sample] = parts[..] else {
            return Err(IrisError::InvalidArgument(format!(
                "id '{s}' is not subject/eye/sample"
            )));
        };
        let eye = match eye {
            "L" | "l" => Eye::Left,
            "R" | "r" => Eye::Right,
            other => {
                return Err(IrisError::InvalidArgument(format!(
                    "eye '{other}' in '{s}' is not L or R"
                )))
            }
        };
        Self::new(subject, eye, sample)
    }
}
