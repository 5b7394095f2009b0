//! Metadata headers, hashing and CSV/JSON emission.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use rwmlab::rwm::CurveRow;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL: &str = "rwmlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column line of every curve CSV.
pub const CURVE_HEADER: &str = "family,d,ell,acc_rate,acc_se,esjd,esjd_se,n_steps,replicas,seed";

/// Hex SHA-256 of the JSON serialization of `value`.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable");
    let digest = Sha256::digest(&bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
}

impl Metadata {
    pub fn new(config_hash: String, seeds: Vec<u64>, timestamp: bool) -> Self {
        let created_unix = timestamp.then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        Metadata { tool: TOOL, version: VERSION, config_hash, seeds, created_unix }
    }

    /// `#`-prefixed header block for CSV and plot files.
    pub fn comment_block(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let mut s = format!(
            "# {} {}\n# config_hash={}\n# seeds={}\n",
            self.tool,
            self.version,
            self.config_hash,
            seeds.join(";")
        );
        if let Some(t) = self.created_unix {
            let _ = writeln!(s, "# created_unix={t}");
        }
        s
    }
}

/// Shortest round-trip rendering of a float.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn curve_line(r: &CurveRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.family,
        r.d,
        fmt_f64(r.ell),
        fmt_f64(r.acc_rate),
        fmt_f64(r.acc_se),
        fmt_f64(r.esjd),
        fmt_f64(r.esjd_se),
        r.n_steps,
        r.replicas,
        r.seed
    )
}

/// Parses a line written by [`curve_line`].
pub fn parse_curve_line(line: &str) -> Option<CurveRow> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 10 {
        return None;
    }
    Some(CurveRow {
        family: f[0].to_string(),
        d: f[1].parse().ok()?,
        ell: f[2].parse().ok()?,
        acc_rate: f[3].parse().ok()?,
        acc_se: f[4].parse().ok()?,
        esjd: f[5].parse().ok()?,
        esjd_se: f[6].parse().ok()?,
        n_steps: f[7].parse().ok()?,
        replicas: f[8].parse().ok()?,
        seed: f[9].parse().ok()?,
    })
}

/// Complete curve CSV: metadata, header, rows.
pub fn curve_csv(meta: &Metadata, rows: &[CurveRow]) -> String {
    let mut s = meta.comment_block();
    s.push_str(CURVE_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&curve_line(r));
        s.push('\n');
    }
    s
}

/// Pretty JSON with the metadata block under `metadata`.
pub fn json_with_meta<T: Serialize>(meta: &Metadata, body: &T) -> String {
    let mut v = serde_json::to_value(body).expect("serializable");
    let m = serde_json::to_value(meta).expect("serializable");
    match v.as_object_mut() {
        Some(obj) => {
            let mut out = serde_json::Map::new();
            out.insert("metadata".into(), m);
            out.extend(std::mem::take(obj));
            v = serde_json::Value::Object(out);
        }
        None => v = serde_json::json!({ "metadata": m, "result": v }),
    }
    let mut s = serde_json::to_string_pretty(&v).expect("serializable");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> CurveRow {
        CurveRow {
            family: "beta(a1=10;a2=10)".into(),
            d: 10,
            ell: 0.1,
            acc_rate: 0.25,
            acc_se: 1.5e-7,
            esjd: 0.0123,
            esjd_se: 3e-5,
            n_steps: 100,
            replicas: 2,
            seed: 7,
        }
    }

    #[test]
    fn curve_line_round_trips() {
        let r = row();
        assert_eq!(parse_curve_line(&curve_line(&r)), Some(r));
        assert_eq!(parse_curve_line("a,b"), None);
    }

    #[test]
    fn header_block_without_timestamp_is_stable() {
        let m = Metadata::new("abc".into(), vec![1, 2], false);
        assert_eq!(m.comment_block(), format!("# rwmlab {VERSION}\n# config_hash=abc\n# seeds=1;2\n"));
        assert!(Metadata::new("abc".into(), vec![1], true).comment_block().contains("created_unix="));
    }

    #[test]
    fn hash_is_hex_sha256() {
        let h = hash_json(&serde_json::json!({}));
        assert_eq!(h, "44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a");
    }

    #[test]
    fn json_puts_metadata_first() {
        let m = Metadata::new("h".into(), vec![3], false);
        let s = json_with_meta(&m, &serde_json::json!({"ks": 0.5}));
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["metadata"]["config_hash"], "h");
        assert_eq!(v["ks"], 0.5);
        assert!(s.find("metadata").unwrap() < s.find("ks").unwrap());
    }
}
