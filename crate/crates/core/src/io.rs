//! File formats: network CSV, cascade and subcascade JSONL, feature CSV,
//! prediction JSONL and ground-truth JSON.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Cascade, FeatureTable, Network};
use crate::fit::SubcascadeSample;
use crate::survival::WeibullParams;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .map_err(|e| Error::Input(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: impl AsRef<Path>, items: impl IntoIterator<Item = &'a T>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    serde_json::from_reader(open(path)?).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRow {
    follower: String,
    followee: Option<String>,
}

/// Reads a `follower,followee` CSV. A row with an empty followee declares
/// an isolated node.
pub fn read_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["follower", "followee"] {
        return Err(Error::Input(format!(
            "{}: expected header follower,followee",
            path.display()
        )));
    }
    let mut edges = Vec::new();
    let mut isolated = Vec::new();
    for row in rdr.deserialize() {
        let row: EdgeRow = row?;
        match row.followee.filter(|f| !f.is_empty()) {
            Some(f) => edges.push((row.follower, f)),
            None => isolated.push(row.follower),
        }
    }
    Network::from_edges(edges, isolated)
}

/// Writes edges in node order; nodes without any edge get a row of their own.
pub fn write_network(path: impl AsRef<Path>, net: &Network) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["follower", "followee"])?;
    for v in 0..net.node_count() {
        if net.followers(v).is_empty() && net.followees(v).is_empty() {
            w.write_record([net.id(v), ""])?;
        }
        for &f in net.followees(v) {
            w.write_record([net.id(v), net.id(f)])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads and validates a cascade log.
pub fn read_cascades(path: impl AsRef<Path>) -> Result<Vec<Cascade>> {
    let cascades: Vec<Cascade> = read_jsonl(path)?;
    for c in &cascades {
        c.validate()?;
    }
    Ok(cascades)
}

pub fn write_cascades(path: impl AsRef<Path>, cascades: &[Cascade]) -> Result<()> {
    write_jsonl(path, cascades)
}

#[derive(Debug, Serialize, Deserialize)]
struct SubcascadeLine {
    user: String,
    delays: Vec<f64>,
}

pub fn read_subcascades(path: impl AsRef<Path>) -> Result<Vec<SubcascadeSample>> {
    read_jsonl::<SubcascadeLine>(path)?
        .into_iter()
        .map(|l| SubcascadeSample::new(l.user, l.delays))
        .collect()
}

pub fn write_subcascades<'a>(path: impl AsRef<Path>, samples: impl IntoIterator<Item = &'a SubcascadeSample>) -> Result<()> {
    let lines: Vec<SubcascadeLine> = samples
        .into_iter()
        .map(|s| SubcascadeLine {
            user: s.user().to_string(),
            delays: s.delays().to_vec(),
        })
        .collect();
    write_jsonl(path, &lines)
}

/// Feature CSV: an `id` column followed by the schema columns.
pub fn write_features(path: impl AsRef<Path>, table: &FeatureTable) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["id".to_string()];
    header.extend(table.names().iter().cloned());
    w.write_record(&header)?;
    for (id, row) in table.ids().iter().zip(table.rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("id") {
        return Err(Error::Input(format!("{}: first column must be id", path.display())));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        ids.push(rec[0].to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Input(format!("{}:{}: bad number {v:?}", path.display(), n + 2)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    FeatureTable::new(names, ids, rows)
}

/// One line of prediction output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub cascade: String,
    pub t_limit: f64,
    #[serde(rename = "final")]
    pub final_size: f64,
    pub outbreak_t: Option<f64>,
    pub curve: Vec<[f64; 2]>,
    /// Observed users whose dynamics came from the population fallback.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fallback_users: Vec<String>,
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionLine>> {
    read_jsonl(path)
}

pub fn write_predictions(path: impl AsRef<Path>, lines: &[PredictionLine]) -> Result<()> {
    write_jsonl(path, lines)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct TruthEntry {
    lambda: f64,
    k: f64,
}

/// Ground-truth dynamics keyed by user id.
pub fn write_truth(path: impl AsRef<Path>, truth: &BTreeMap<String, WeibullParams>) -> Result<()> {
    let map: BTreeMap<&str, TruthEntry> = truth
        .iter()
        .map(|(u, p)| {
            (
                u.as_str(),
                TruthEntry {
                    lambda: p.scale(),
                    k: p.shape(),
                },
            )
        })
        .collect();
    write_json(path, &map)
}

pub fn read_truth(path: impl AsRef<Path>) -> Result<BTreeMap<String, WeibullParams>> {
    let map: BTreeMap<String, TruthEntry> = read_json(path)?;
    map.into_iter()
        .map(|(u, e)| Ok((u, WeibullParams::new(e.lambda, e.k)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Event;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("newer-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn network_round_trip_keeps_isolated_nodes() {
        let net = Network::new(
            ["a", "b", "c", "z"].map(String::from),
            [("a".to_string(), "b".to_string()), ("c".to_string(), "b".to_string())],
        )
        .unwrap();
        let p = tmp("net.csv");
        write_network(&p, &net).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "follower,followee\na,b\nc,b\nz,\n");
        assert_eq!(read_network(&p).unwrap(), net);
    }

    #[test]
    fn network_header_is_checked() {
        let p = tmp("bad.csv");
        std::fs::write(&p, "src,dst\na,b\n").unwrap();
        assert!(matches!(read_network(&p), Err(Error::Input(_))));
    }

    #[test]
    fn cascade_jsonl_uses_short_keys() {
        let c = Cascade::new("c1", vec![Event::new("a", None, 0.0), Event::new("b", Some("a"), 2.5)]);
        let p = tmp("c.jsonl");
        write_cascades(&p, std::slice::from_ref(&c)).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "{\"id\":\"c1\",\"events\":[{\"u\":\"a\",\"p\":null,\"t\":0.0},{\"u\":\"b\",\"p\":\"a\",\"t\":2.5}]}\n"
        );
        assert_eq!(read_cascades(&p).unwrap(), vec![c]);
    }

    #[test]
    fn invalid_cascade_is_rejected_on_read() {
        let p = tmp("bad.jsonl");
        std::fs::write(&p, "{\"id\":\"x\",\"events\":[{\"u\":\"a\",\"p\":null,\"t\":0},{\"u\":\"b\",\"p\":\"q\",\"t\":1}]}\n")
            .unwrap();
        assert!(read_cascades(&p).is_err());
    }

    #[test]
    fn features_and_truth_round_trip_exactly() {
        let table = FeatureTable::new(
            vec!["intercept".into(), "follower_count".into()],
            vec!["a".into(), "b".into()],
            vec![vec![std::f64::consts::E, 0.1 + 0.2], vec![std::f64::consts::E, 1e-7]],
        )
        .unwrap();
        let p = tmp("f.csv");
        write_features(&p, &table).unwrap();
        assert_eq!(read_features(&p).unwrap(), table);

        let truth: BTreeMap<String, WeibullParams> = [
            ("a".to_string(), WeibullParams::new(1.0 / 3.0, 0.7).unwrap()),
            ("b".to_string(), WeibullParams::new(123.456, 2.0).unwrap()),
        ]
        .into();
        let p = tmp("t.json");
        write_truth(&p, &truth).unwrap();
        assert_eq!(read_truth(&p).unwrap(), truth);
    }

    #[test]
    fn subcascades_and_predictions_round_trip() {
        let s = vec![SubcascadeSample::new("u", vec![1.5, 2.0]).unwrap()];
        let p = tmp("s.jsonl");
        write_subcascades(&p, &s).unwrap();
        assert_eq!(read_subcascades(&p).unwrap(), s);

        let lines = vec![PredictionLine {
            cascade: "c".into(),
            t_limit: 10.0,
            final_size: 9.0,
            outbreak_t: None,
            curve: vec![[10.0, 3.0], [20.0, 5.5]],
            fallback_users: vec![],
        }];
        let p = tmp("p.jsonl");
        write_predictions(&p, &lines).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("\"final\":9.0") && text.contains("\"outbreak_t\":null"));
        assert_eq!(read_predictions(&p).unwrap(), lines);
    }
}
