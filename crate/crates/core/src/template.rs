//! Minutiae templates and the `.xyt` text format.
//!
//! An `.xyt` file holds one minutia per line as whitespace-separated integers
//! `x y theta [quality]`. Blank lines are skipped, CRLF endings are accepted,
//! `theta` is in degrees and reduced into `[0, 360)`, and a missing quality
//! defaults to 100.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this many minutiae the built-in matcher cannot align a template.
pub const MIN_ALIGNABLE_MINUTIAE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinutiaKind {
    RidgeEnding,
    Bifurcation,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Minutia {
    pub x: u32,
    pub y: u32,
    /// Ridge direction in whole degrees, `0..360`.
    pub angle: u16,
    pub kind: MinutiaKind,
    /// `0..=100`
    pub quality: u8,
}

impl Minutia {
    pub fn new(x: u32, y: u32, angle: u16) -> Self {
        Minutia {
            x,
            y,
            angle: angle % 360,
            kind: MinutiaKind::Unknown,
            quality: 100,
        }
    }

    pub fn with_quality(mut self, quality: u8) -> Self {
        self.quality = quality.min(100);
        self
    }

    pub fn with_kind(mut self, kind: MinutiaKind) -> Self {
        self.kind = kind;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinutiaeTemplate {
    pub finger_id: String,
    /// 1-based.
    pub impression_id: u32,
    pub minutiae: Vec<Minutia>,
    /// Image width in pixels, 0 when unknown.
    pub width: u32,
    /// Image height in pixels, 0 when unknown.
    pub height: u32,
    pub source_db: String,
}

/// Non-fatal findings attached to an otherwise valid template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateWarning {
    TooFewMinutiae { count: usize },
}

impl MinutiaeTemplate {
    pub fn new(finger_id: impl Into<String>, impression_id: u32, minutiae: Vec<Minutia>) -> Self {
        MinutiaeTemplate {
            finger_id: finger_id.into(),
            impression_id,
            minutiae,
            width: 0,
            height: 0,
            source_db: String::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.minutiae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minutiae.is_empty()
    }

    pub fn warnings(&self) -> Vec<TemplateWarning> {
        let mut out = Vec::new();
        if self.minutiae.len() < MIN_ALIGNABLE_MINUTIAE {
            out.push(TemplateWarning::TooFewMinutiae {
                count: self.minutiae.len(),
            });
        }
        out
    }

    /// Checks the structural invariants: angle and quality ranges, and
    /// coordinates inside the image when its size is known.
    pub fn validate(&self) -> Result<()> {
        if self.impression_id == 0 {
            return Err(Error::Validation("impression ids are 1-based".into()));
        }
        for (idx, m) in self.minutiae.iter().enumerate() {
            if m.angle >= 360 {
                return Err(Error::Validation(format!(
                    "minutia {idx}: angle {} outside [0,360)",
                    m.angle
                )));
            }
            if m.quality > 100 {
                return Err(Error::Validation(format!(
                    "minutia {idx}: quality {} outside [0,100]",
                    m.quality
                )));
            }
            if self.width > 0 && m.x >= self.width {
                return Err(Error::Validation(format!(
                    "minutia {idx}: x = {} outside width {}",
                    m.x, self.width
                )));
            }
            if self.height > 0 && m.y >= self.height {
                return Err(Error::Validation(format!(
                    "minutia {idx}: y = {} outside height {}",
                    m.y, self.height
                )));
            }
        }
        Ok(())
    }

    /// Renders the template as `.xyt` text: `x y theta quality`, LF-terminated.
    pub fn to_xyt(&self) -> String {
        let mut out = String::with_capacity(self.minutiae.len() * 16);
        for m in &self.minutiae {
            let _ = writeln!(out, "{} {} {} {}", m.x, m.y, m.angle, m.quality);
        }
        out
    }
}

/// Parses `.xyt` text into a template. Minutiae keep their line order.
pub fn parse_xyt(text: &str, finger_id: &str, impression_id: u32) -> Result<MinutiaeTemplate> {
    let mut minutiae = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields = line.split_whitespace().collect::<Vec<_>>();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 or 4 fields, found {}", fields.len()),
            });
        }
        let mut values = [0i64; 4];
        for (slot, token) in values.iter_mut().zip(&fields) {
            *slot = token.parse::<i64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("not an integer: {token:?}"),
            })?;
        }
        let [x, y, theta, quality] = values;
        if x < 0 || y < 0 {
            return Err(Error::Validation(format!(
                "line {line_no}: negative coordinate ({x}, {y})"
            )));
        }
        if x > u32::MAX as i64 || y > u32::MAX as i64 {
            return Err(Error::Validation(format!(
                "line {line_no}: coordinate out of range ({x}, {y})"
            )));
        }
        let quality = if fields.len() == 4 {
            if !(0..=100).contains(&quality) {
                return Err(Error::Validation(format!(
                    "line {line_no}: quality {quality} outside [0,100]"
                )));
            }
            quality as u8
        } else {
            100
        };
        minutiae.push(Minutia {
            x: x as u32,
            y: y as u32,
            angle: theta.rem_euclid(360) as u16,
            kind: MinutiaKind::Unknown,
            quality,
        });
    }
    if minutiae.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no minutiae".into(),
        });
    }
    Ok(MinutiaeTemplate::new(finger_id, impression_id, minutiae))
}
