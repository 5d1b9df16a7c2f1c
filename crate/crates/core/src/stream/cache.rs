//! Little-endian binary cache.
//!
//! ```text
//! magic    "NLBSTRM1"
//! u64      link count
//! u64      node count
//! u64      feature dim
//! u64      class count
//! links    count x { u32 src, u32 dst, i64 ts, u32 feat, u32 label }   (u32::MAX = none)
//! f32      feature rows, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EdgeFeatureStore, IdMap, TemporalLink, TemporalStream};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"NLBSTRM1";
const NONE: u32 = u32::MAX;

pub(crate) fn encode(stream: &TemporalStream, w: &mut impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    for v in [
        stream.links.len() as u64,
        stream.num_nodes as u64,
        stream.features.dim() as u64,
        stream.num_classes as u64,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for (l, label) in stream.links.iter().zip(&stream.row_labels) {
        w.write_all(&l.src.to_le_bytes())?;
        w.write_all(&l.dst.to_le_bytes())?;
        w.write_all(&l.ts.to_le_bytes())?;
        w.write_all(&l.edge_feat.unwrap_or(NONE).to_le_bytes())?;
        w.write_all(&label.unwrap_or(NONE).to_le_bytes())?;
    }
    for v in stream.features.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn opt(v: u32) -> Option<u32> {
    (v != NONE).then_some(v)
}

pub(crate) fn decode(r: &mut impl Read) -> Result<TemporalStream> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a stream cache (bad magic)".into()));
    }
    let n = read_u64(r)? as usize;
    let num_nodes = read_u64(r)? as usize;
    let dim = read_u64(r)? as usize;
    let num_classes = read_u64(r)? as usize;
    let mut links = Vec::with_capacity(n);
    let mut row_labels = Vec::with_capacity(n);
    let mut with_feat = 0usize;
    for i in 0..n {
        let src = read_u32(r)?;
        let dst = read_u32(r)?;
        let ts = read_u64(r)? as i64;
        let edge_feat = opt(read_u32(r)?);
        let label = opt(read_u32(r)?);
        if edge_feat.is_some() {
            with_feat += 1;
        }
        links.push(TemporalLink {
            src,
            dst,
            ts,
            edge_feat,
            event_idx: i as u64,
        });
        row_labels.push(label);
    }
    let mut data = vec![0f32; with_feat * dim];
    for v in data.iter_mut() {
        *v = f32::from_bits(read_u32(r)?);
    }
    Ok(TemporalStream {
        links,
        features: EdgeFeatureStore::from_rows(dim, data)?,
        row_labels,
        num_nodes,
        num_classes,
        id_map: IdMap::identity(num_nodes),
    })
}

pub fn write_cache(stream: &TemporalStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode(stream, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Reads a cache file. The id map is not part of the cache; callers that
/// need raw ids load it separately with [`super::read_id_map`].
pub fn read_cache(path: impl AsRef<Path>) -> Result<TemporalStream> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode(&mut BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_round_trip() {
        let mut s = TemporalStream::from_triples(&[(0, 1, 5), (1, 2, 6), (2, 2, 9)]).unwrap();
        s.features = EdgeFeatureStore::new(2);
        for (i, l) in s.links.iter_mut().enumerate() {
            l.edge_feat = Some(s.features.push(&[i as f32, -0.5]));
        }
        s.row_labels = vec![Some(1), None, Some(0)];
        s.num_classes = 2;
        let mut buf = Vec::new();
        encode(&s, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 32 + 3 * 24 + 6 * 4);
        let back = decode(&mut buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn bad_magic() {
        let buf = vec![0u8; 64];
        assert!(matches!(decode(&mut buf.as_slice()), Err(Error::Format(_))));
    }
}
