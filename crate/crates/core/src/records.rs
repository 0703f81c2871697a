//! JSON-lines experiment records.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::Value;

/// `{"experiment": ..., "params": {...}, "seed": ..., "result": {...}}`
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub experiment: String,
    pub params: Value,
    pub seed: u64,
    pub result: Value,
}

impl Record {
    pub fn new<P: Serialize, T: Serialize>(
        experiment: &str,
        params: &P,
        seed: u64,
        result: &T,
    ) -> serde_json::Result<Self> {
        Ok(Self {
            experiment: experiment.to_owned(),
            params: serde_json::to_value(params)?,
            seed,
            result: serde_json::to_value(result)?,
        })
    }

    /// One line, no trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records hold plain JSON values")
    }
}

/// Writes each record on its own line.
pub fn write_jsonl<W: Write>(mut out: W, records: &[Record]) -> io::Result<()> {
    for r in records {
        out.write_all(r.to_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_shape() {
        let r = Record::new("rho", &serde_json::json!({"lambda": 0.5}), 9, &true).unwrap();
        assert_eq!(
            r.to_line(),
            r#"{"experiment":"rho","params":{"lambda":0.5},"seed":9,"result":true}"#
        );
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &[r.clone(), r]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }
}
