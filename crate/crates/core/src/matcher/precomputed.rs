use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use super::{MatcherHandle, Score};
use crate::error::{Error, Result};
use crate::protocol::TemplateKey;

pub const SCORE_MATRIX_HEADER: [&str; 7] = [
    "probe_db",
    "probe_finger",
    "probe_impression",
    "gallery_db",
    "gallery_finger",
    "gallery_impression",
    "score",
];

/// Scores for ordered `(probe, gallery)` pairs supplied from outside.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreMatrix {
    scores: BTreeMap<(TemplateKey, TemplateKey), Score>,
}

impl ScoreMatrix {
    pub fn new() -> Self {
        ScoreMatrix::default()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Adds a score; re-adding an equal score is a no-op, a different one is
    /// an error.
    pub fn insert(&mut self, probe: TemplateKey, gallery: TemplateKey, score: Score) -> Result<()> {
        match self.scores.get(&(probe.clone(), gallery.clone())) {
            Some(existing) if *existing != score => Err(Error::Import(format!(
                "conflicting scores {existing} and {score} for {probe} -> {gallery}"
            ))),
            Some(_) => Ok(()),
            None => {
                self.scores.insert((probe, gallery), score);
                Ok(())
            }
        }
    }

    pub fn get(&self, probe: &TemplateKey, gallery: &TemplateKey) -> Option<Score> {
        self.scores.get(&(probe.clone(), gallery.clone())).copied()
    }

    pub fn lookup(&self, probe: &TemplateKey, gallery: &TemplateKey) -> Result<Score> {
        self.get(probe, gallery).ok_or_else(|| Error::Lookup {
            probe: probe.clone(),
            gallery: gallery.clone(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TemplateKey, &TemplateKey, Score)> {
        self.scores.iter().map(|((p, g), s)| (p, g, *s))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Import(e.to_string()))?
            .clone();
        if headers.iter().map(str::trim).ne(SCORE_MATRIX_HEADER) {
            return Err(Error::Import(format!(
                "expected columns {}, found {}",
                SCORE_MATRIX_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut matrix = ScoreMatrix::new();
        for row in rdr.records() {
            let row = row.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                Error::Parse {
                    line,
                    message: e.to_string(),
                }
            })?;
            let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
            let field = |i: usize| row.get(i).unwrap_or("").trim();
            let index = |i: usize| {
                field(i).parse::<u32>().map_err(|_| Error::Parse {
                    line,
                    message: format!("{}: not an index: {:?}", SCORE_MATRIX_HEADER[i], field(i)),
                })
            };
            let probe = TemplateKey::new(field(0), index(1)?, index(2)?);
            let gallery = TemplateKey::new(field(3), index(4)?, index(5)?);
            let score = field(6)
                .parse::<f64>()
                .map_err(|_| Error::Parse {
                    line,
                    message: format!("score is not a number: {:?}", field(6)),
                })
                .and_then(|v| {
                    Score::new(v).map_err(|e| Error::Parse {
                        line,
                        message: e.to_string(),
                    })
                })?;
            matrix.insert(probe, gallery, score).map_err(|e| match e {
                Error::Import(msg) => Error::Import(format!("line {line}: {msg}")),
                other => other,
            })?;
        }
        Ok(matrix)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = SCORE_MATRIX_HEADER.join(",");
        out.push('\n');
        for (p, g, s) in self.iter() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                p.db, p.finger, p.impression, g.db, g.finger, g.impression, s
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

/// Loads a score-matrix CSV as a precomputed matcher.
pub fn import_score_matrix(csv_path: &Path) -> Result<MatcherHandle> {
    let file = fs::File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    Ok(MatcherHandle::Precomputed(ScoreMatrix::read_csv(file)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "probe_db,probe_finger,probe_impression,gallery_db,gallery_finger,gallery_impression,score\n";

    #[test]
    fn imports_and_serves_lookups() {
        let mut text = HEADER.to_string();
        for i in 1..=100u32 {
            for x in (i + 1)..=100 {
                text.push_str(&format!("db,{i},1,db,{x},1,{}\n", (i * x) % 97));
            }
        }
        let m = ScoreMatrix::read_csv(text.as_bytes()).unwrap();
        assert_eq!(m.len(), 4950);
        let s = m
            .lookup(&TemplateKey::new("db", 3, 1), &TemplateKey::new("db", 5, 1))
            .unwrap();
        assert_eq!(s.value(), 15.0);
        assert!(matches!(
            m.lookup(&TemplateKey::new("db", 5, 1), &TemplateKey::new("db", 3, 1)),
            Err(Error::Lookup { .. })
        ));
    }

    #[test]
    fn non_numeric_score_reports_line() {
        let text = format!("{HEADER}db,1,1,db,2,1,5\ndb,1,1,db,3,1,abc\n");
        match ScoreMatrix::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_rows() {
        let same = format!("{HEADER}db,1,1,db,2,1,5\ndb,1,1,db,2,1,5.0\n");
        assert_eq!(ScoreMatrix::read_csv(same.as_bytes()).unwrap().len(), 1);
        let conflict = format!("{HEADER}db,1,1,db,2,1,5\ndb,1,1,db,2,1,6\n");
        assert!(matches!(
            ScoreMatrix::read_csv(conflict.as_bytes()),
            Err(Error::Import(_))
        ));
    }

    #[test]
    fn wrong_header_rejected() {
        let text = "a,b,c\n1,2,3\n";
        assert!(matches!(
            ScoreMatrix::read_csv(text.as_bytes()),
            Err(Error::Import(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let mut m = ScoreMatrix::new();
        m.insert(TemplateKey::new("a", 1, 2), TemplateKey::new("b", 3, 4), Score::new(0.1 + 0.2).unwrap())
            .unwrap();
        m.insert(TemplateKey::new("a", 2, 1), TemplateKey::new("a", 1, 1), Score::new(48.0).unwrap())
            .unwrap();
        let back = ScoreMatrix::read_csv(m.to_csv_string().as_bytes()).unwrap();
        assert_eq!(back, m);
    }
}
