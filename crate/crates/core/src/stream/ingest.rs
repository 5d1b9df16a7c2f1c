use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{EdgeFeatureStore, NodeId, TemporalLink, TemporalStream, Timestamp};
use crate::{Error, Result};

/// How to read a `src,dst,ts,label,f1,...,fk` file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    /// Multiplier applied to timestamps before truncation to integers.
    pub ts_scale: f64,
    /// Source and destination ids live in separate namespaces
    /// (user/item files). Destinations are densified after sources.
    pub bipartite: bool,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            ts_scale: 1.0,
            bipartite: false,
        }
    }
}

/// Raw id <-> dense id mapping, in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdMap {
    raw: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl IdMap {
    pub fn identity(n: usize) -> Self {
        let mut m = IdMap::default();
        for i in 0..n {
            m.intern(&i.to_string());
        }
        m
    }

    pub fn intern(&mut self, raw: &str) -> NodeId {
        if let Some(&id) = self.index.get(raw) {
            return id;
        }
        let id = self.raw.len() as NodeId;
        self.raw.push(raw.to_string());
        self.index.insert(raw.to_string(), id);
        id
    }

    pub fn get(&self, raw: &str) -> Option<NodeId> {
        self.index.get(raw).copied()
    }

    pub fn raw(&self, id: NodeId) -> Option<&str> {
        self.raw.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

fn parse_ts(field: &str, scale: f64, line: u64) -> Result<Timestamp> {
    if scale == 1.0 {
        if let Ok(v) = field.parse::<i64>() {
            return Ok(v);
        }
    }
    let v: f64 = field.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("unparseable timestamp {field:?}"),
    })?;
    let scaled = (v * scale).trunc();
    if !scaled.is_finite() || scaled.abs() > i64::MAX as f64 {
        return Err(Error::Parse {
            line,
            msg: format!("timestamp {field:?} out of range after scaling"),
        });
    }
    Ok(scaled as i64)
}

fn is_header(fields: &[&str]) -> bool {
    fields
        .get(2)
        .map(|f| f.trim().parse::<f64>().is_err())
        .unwrap_or(true)
}

/// Reads a link stream from CSV. A non-numeric first line is treated as a
/// header. Lines are numbered from 1 in error messages.
pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<TemporalStream> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(BufReader::new(file), schema)
}

pub(crate) fn ingest_reader(reader: impl BufRead, schema: &CsvSchema) -> Result<TemporalStream> {
    if !(schema.ts_scale.is_finite() && schema.ts_scale > 0.0) {
        return Err(Error::Config(format!(
            "timestamp scale must be positive, got {}",
            schema.ts_scale
        )));
    }
    let mut links = Vec::new();
    let mut row_labels = Vec::new();
    let mut features: Option<EdgeFeatureStore> = None;
    let mut src_ids = IdMap::default();
    let mut dst_raw: Vec<String> = Vec::new();
    let mut dst_pending: Vec<usize> = Vec::new();
    let mut prev_ts = Timestamp::MIN;
    let mut feat_buf = Vec::new();
    let mut num_classes = 0usize;

    for (i, line) in reader.lines().enumerate() {
        let lineno = i as u64 + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if i == 0 && is_header(&fields) {
            continue;
        }
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected at least 3 columns, found {}", fields.len()),
            });
        }
        let ts = parse_ts(fields[2], schema.ts_scale, lineno)?;
        if ts < prev_ts {
            return Err(Error::DecreasingTimestamp {
                line: lineno,
                ts,
                prev: prev_ts,
            });
        }
        prev_ts = ts;

        let label = match fields.get(3) {
            None | Some(&"") => None,
            Some(f) => {
                let v: f64 = f.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("unparseable label {f:?}"),
                })?;
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("label {f:?} is not a class index"),
                    });
                }
                num_classes = num_classes.max(v as usize + 1);
                Some(v as u32)
            }
        };

        let k = fields.len().saturating_sub(4);
        let store = features.get_or_insert_with(|| EdgeFeatureStore::new(k));
        if k != store.dim() {
            return Err(Error::RaggedFeatures {
                line: lineno,
                expected: store.dim(),
                found: k,
            });
        }
        let edge_feat = if k > 0 {
            feat_buf.clear();
            for f in &fields[4..] {
                feat_buf.push(f.parse::<f32>().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("unparseable feature {f:?}"),
                })?);
            }
            Some(store.push(&feat_buf))
        } else {
            None
        };

        let event_idx = links.len() as u64;
        let src = src_ids.intern(fields[0]);
        let dst = if schema.bipartite {
            dst_raw.push(fields[1].to_string());
            dst_pending.push(links.len());
            0
        } else {
            src_ids.intern(fields[1])
        };
        links.push(TemporalLink {
            src,
            dst,
            ts,
            edge_feat,
            event_idx,
        });
        row_labels.push(label);
    }

    let id_map = if schema.bipartite {
        let offset = src_ids.len();
        let mut raw = Vec::with_capacity(offset);
        for id in 0..offset {
            raw.push(format!("s:{}", src_ids.raw(id as NodeId).unwrap()));
        }
        let mut map = IdMap::default();
        for r in &raw {
            map.intern(r);
        }
        for (pos, r) in dst_pending.iter().zip(&dst_raw) {
            links[*pos].dst = map.intern(&format!("d:{r}"));
        }
        map
    } else {
        src_ids
    };

    Ok(TemporalStream {
        num_nodes: id_map.len(),
        links,
        features: features.unwrap_or_default(),
        row_labels,
        num_classes,
        id_map,
    })
}

/// Writes the stream as CSV with dense ids, a header line, and full-precision
/// feature values. Re-ingesting the output reproduces the link sequence.
pub fn write_csv(stream: &TemporalStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write!(w, "src,dst,ts,label")?;
    for j in 0..stream.features.dim() {
        write!(w, ",f{j}")?;
    }
    writeln!(w)?;
    for (link, label) in stream.links.iter().zip(&stream.row_labels) {
        write!(w, "{},{},{},", link.src, link.dst, link.ts)?;
        if let Some(l) = label {
            write!(w, "{l}")?;
        }
        if let Some(row) = link.edge_feat {
            for v in stream.features.row(row) {
                write!(w, ",{v}")?;
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column `raw,dense` CSV.
pub fn write_id_map(map: &IdMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "raw,dense")?;
    for (i, raw) in map.raw.iter().enumerate() {
        writeln!(w, "{raw},{i}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_id_map(path: impl AsRef<Path>) -> Result<IdMap> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut map = IdMap::default();
    for (i, line) in BufReader::new(file).lines().enumerate().skip(1) {
        let line = line?;
        let (raw, dense) = line.rsplit_once(',').ok_or_else(|| Error::Parse {
            line: i as u64 + 1,
            msg: "expected raw,dense".into(),
        })?;
        let dense: usize = dense.parse().map_err(|_| Error::Parse {
            line: i as u64 + 1,
            msg: format!("bad dense id {dense:?}"),
        })?;
        if dense != map.len() {
            return Err(Error::Parse {
                line: i as u64 + 1,
                msg: format!("dense ids must be consecutive, expected {}", map.len()),
            });
        }
        map.intern(raw);
    }
    Ok(map)
}
