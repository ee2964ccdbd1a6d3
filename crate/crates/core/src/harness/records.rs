//! Study records as CSV with an `NA` literal for undefined scores.

use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::mutation::MutationKind;

pub const RECORD_HEADER: [&str; 11] = [
    "dataset",
    "seed",
    "kind",
    "mutations",
    "f1",
    "csc",
    "csc_p",
    "nliv_s",
    "nliv_w",
    "sp",
    "rate",
];

const NA: &str = "NA";

/// Scores of one degraded taxonomy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub dataset: String,
    pub seed: u64,
    pub kind: MutationKind,
    pub mutations: usize,
    pub f1: Option<f64>,
    pub csc: Option<f64>,
    pub csc_p: Option<f64>,
    pub nliv_s: Option<f64>,
    pub nliv_w: Option<f64>,
    pub sp: Option<f64>,
    pub rate: Option<f64>,
}

/// Identity of a record within a study.
pub type RecordKey = (String, MutationKind, u64, usize);

impl StudyRecord {
    pub fn key(&self) -> RecordKey {
        (self.dataset.clone(), self.kind, self.seed, self.mutations)
    }

    fn fields(&self) -> Vec<String> {
        let num = |v: Option<f64>| v.map_or_else(|| NA.to_string(), |x| x.to_string());
        vec![
            self.dataset.clone(),
            self.seed.to_string(),
            self.kind.to_string(),
            self.mutations.to_string(),
            num(self.f1),
            num(self.csc),
            num(self.csc_p),
            num(self.nliv_s),
            num(self.nliv_w),
            num(self.sp),
            num(self.rate),
        ]
    }

    fn from_fields(row: &csv::StringRecord, line: usize) -> Result<Self, HarnessError> {
        let bad = |message: String| HarnessError::Records { line, message };
        if row.len() != RECORD_HEADER.len() {
            return Err(bad(format!(
                "expected {} fields, found {}",
                RECORD_HEADER.len(),
                row.len()
            )));
        }
        let num = |i: usize| -> Result<Option<f64>, HarnessError> {
            match &row[i] {
                NA => Ok(None),
                s => s
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|e| bad(format!("{}: {e}", RECORD_HEADER[i]))),
            }
        };
        Ok(StudyRecord {
            dataset: row[0].to_string(),
            seed: row[1].parse().map_err(|e| bad(format!("seed: {e}")))?,
            kind: row[2].parse().map_err(bad)?,
            mutations: row[3].parse().map_err(|e| bad(format!("mutations: {e}")))?,
            f1: num(4)?,
            csc: num(5)?,
            csc_p: num(6)?,
            nliv_s: num(7)?,
            nliv_w: num(8)?,
            sp: num(9)?,
            rate: num(10)?,
        })
    }
}

pub fn encode_records(records: &[StudyRecord]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in records {
        w.write_record(r.fields()).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

fn header_line() -> Vec<u8> {
    let mut line = RECORD_HEADER.join(",").into_bytes();
    line.push(b'\n');
    line
}

pub fn write_records(path: &Path, records: &[StudyRecord]) -> Result<(), HarnessError> {
    let mut bytes = header_line();
    bytes.extend(encode_records(records));
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<StudyRecord>, HarnessError> {
    let text = fs::read(path)?;
    parse_records(&text)
}

pub fn parse_records(bytes: &[u8]) -> Result<Vec<StudyRecord>, HarnessError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = reader.headers().map_err(|e| HarnessError::Records {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(RECORD_HEADER.iter().copied()) {
        return Err(HarnessError::Records {
            line: 1,
            message: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| HarnessError::Records {
            line: i + 2,
            message: e.to_string(),
        })?;
        out.push(StudyRecord::from_fields(&row, i + 2)?);
    }
    Ok(out)
}

/// Append-only record file that can be resumed after an interruption.
pub struct RecordSink {
    file: fs::File,
    done: HashSet<RecordKey>,
}

impl RecordSink {
    /// Opens `path`, creating it with a header when missing. Complete records
    /// already present are remembered; a torn final line is cut off.
    pub fn open(path: &Path) -> Result<Self, HarnessError> {
        let mut done = HashSet::new();
        if path.exists() {
            let bytes = fs::read(path)?;
            let complete = match bytes.iter().rposition(|&b| b == b'\n') {
                Some(i) => i + 1,
                None => 0,
            };
            let mut keep = complete;
            if complete == 0 {
                fs::write(path, header_line())?;
                keep = header_line().len();
            } else {
                let records = parse_records(&bytes[..complete]).map_err(|e| match e {
                    HarnessError::Records { line, message } => HarnessError::Records {
                        line,
                        message: format!("{}: {message}", path.display()),
                    },
                    other => other,
                })?;
                done.extend(records.iter().map(StudyRecord::key));
                if complete < bytes.len() {
                    tracing::warn!(path = %path.display(), "dropping incomplete trailing record");
                }
            }
            let file = OpenOptions::new().append(true).open(path)?;
            if (keep as u64) < file.metadata()?.len() {
                file.set_len(keep as u64)?;
            }
            return Ok(RecordSink { file, done });
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, header_line())?;
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(RecordSink { file, done })
    }

    pub fn contains(&self, key: &RecordKey) -> bool {
        self.done.contains(key)
    }

    pub fn len(&self) -> usize {
        self.done.len()
    }

    pub fn is_empty(&self) -> bool {
        self.done.is_empty()
    }

    /// Appends records not yet present and returns how many were written.
    pub fn append(&mut self, records: &[StudyRecord]) -> Result<usize, HarnessError> {
        let fresh: Vec<StudyRecord> = records
            .iter()
            .filter(|r| !self.done.contains(&r.key()))
            .cloned()
            .collect();
        if fresh.is_empty() {
            return Ok(0);
        }
        self.file.write_all(&encode_records(&fresh))?;
        self.file.flush()?;
        self.done.extend(fresh.iter().map(StudyRecord::key));
        Ok(fresh.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(seed: u64, mutations: usize, f1: Option<f64>) -> StudyRecord {
        StudyRecord {
            dataset: "food, sample".into(),
            seed,
            kind: MutationKind::NonLeaf,
            mutations,
            f1,
            csc: Some(0.25),
            csc_p: Some(1e-7),
            nliv_s: None,
            nliv_w: Some(0.1 + 0.2),
            sp: Some(1.0),
            rate: None,
        }
    }

    #[test]
    fn round_trip_with_na_and_quoting() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let records = vec![record(1, 1, Some(0.5)), record(1, 8, None)];
        write_records(&path, &records).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("dataset,seed,kind,mutations,f1,csc,csc_p,nliv_s,nliv_w,sp,rate\n"));
        assert!(text.contains("\"food, sample\",1,non_leaf,8,NA,"));
        assert_eq!(read_records(&path).unwrap(), records);
    }

    #[test]
    fn sink_resumes_and_cuts_torn_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let mut sink = RecordSink::open(&path).unwrap();
        assert_eq!(sink.append(&[record(1, 1, Some(0.5))]).unwrap(), 1);
        drop(sink);
        let mut raw = fs::read(&path).unwrap();
        raw.extend_from_slice(b"\"food, sample\",1,non_leaf,8,0.");
        fs::write(&path, raw).unwrap();

        let mut sink = RecordSink::open(&path).unwrap();
        assert_eq!(sink.len(), 1);
        assert!(sink.contains(&record(1, 1, None).key()));
        assert_eq!(
            sink.append(&[record(1, 1, Some(0.5)), record(1, 8, Some(0.4))])
                .unwrap(),
            1
        );
        drop(sink);
        assert_eq!(
            read_records(&path).unwrap(),
            vec![record(1, 1, Some(0.5)), record(1, 8, Some(0.4))]
        );
    }

    #[test]
    fn foreign_headers_are_rejected() {
        assert!(matches!(
            parse_records(b"a,b\n1,2\n"),
            Err(HarnessError::Records { line: 1, .. })
        ));
    }
}
