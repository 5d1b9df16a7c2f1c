use std::collections::HashMap;
use std::io::{Read, Write};

use rand::Rng;

use super::{Real, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable tensors and their gradient buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<F> {
    names: Vec<String>,
    values: Vec<Tensor<F>>,
    grads: Vec<Tensor<F>>,
    index: HashMap<String, ParamId>,
}

impl<F: Real> Default for ParamStore<F> {
    fn default() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
            grads: Vec::new(),
            index: HashMap::new(),
        }
    }
}

impl<F: Real> ParamStore<F> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Tensor<F>) -> ParamId {
        assert!(!self.index.contains_key(name), "duplicate parameter {name}");
        let id = ParamId(self.values.len());
        self.names.push(name.to_string());
        self.grads.push(Tensor::zeros(value.rows, value.cols));
        self.values.push(value);
        self.index.insert(name.to_string(), id);
        id
    }

    /// Glorot-uniform `rows x cols` matrix: entries in `±sqrt(6 / (rows + cols))`.
    pub fn add_glorot(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        rng: &mut impl Rng,
    ) -> ParamId {
        let limit = (6.0 / (rows + cols).max(1) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| F::lit(rng.random_range(-limit..=limit)))
            .collect();
        self.add(name, Tensor { rows, cols, data })
    }

    pub fn add_zeros(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        self.add(name, Tensor::zeros(rows, cols))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<F> {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor<F> {
        &self.grads[id.0]
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.data.fill(F::zero());
        }
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, g: &[F]) {
        for (a, &b) in self.grads[id.0].data.iter_mut().zip(g) {
            *a = *a + b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(Tensor::is_finite)
    }

    /// Same names and shapes, values converted to another precision.
    pub fn cast<G: Real>(&self) -> ParamStore<G> {
        let mut out = ParamStore::new();
        for (n, v) in self.names.iter().zip(&self.values) {
            out.add(n, v.cast());
        }
        out
    }

    /// Flat blob:
    /// `"NLBPARM1" | u8 width | u64 count | count x {u32 name_len, name, u64 offset, u64 rows, u64 cols}
    ///  | u64 total | total scalars`, little-endian; offsets count scalars.
    pub fn write_blob(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(b"NLBPARM1")?;
        w.write_all(&[F::WIDTH])?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        let mut offset = 0u64;
        for (n, v) in self.names.iter().zip(&self.values) {
            w.write_all(&(n.len() as u32).to_le_bytes())?;
            w.write_all(n.as_bytes())?;
            w.write_all(&offset.to_le_bytes())?;
            w.write_all(&(v.rows as u64).to_le_bytes())?;
            w.write_all(&(v.cols as u64).to_le_bytes())?;
            offset += v.len() as u64;
        }
        w.write_all(&offset.to_le_bytes())?;
        let mut buf = Vec::with_capacity(offset as usize * F::WIDTH as usize);
        for v in &self.values {
            for &x in &v.data {
                x.to_le(&mut buf);
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_blob(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != b"NLBPARM1" {
            return Err(Error::Format("not a parameter blob (bad magic)".into()));
        }
        let mut b1 = [0u8; 1];
        r.read_exact(&mut b1)?;
        let width = b1[0];
        if width != 4 && width != 8 {
            return Err(Error::Format(format!("unsupported scalar width {width}")));
        }
        let mut b8 = [0u8; 8];
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut b4)?;
            let mut name = vec![0u8; u32::from_le_bytes(b4) as usize];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?;
            let mut dims = [0u64; 3];
            for d in &mut dims {
                r.read_exact(&mut b8)?;
                *d = u64::from_le_bytes(b8);
            }
            entries.push((name, dims[0] as usize, dims[1] as usize, dims[2] as usize));
        }
        r.read_exact(&mut b8)?;
        let total = u64::from_le_bytes(b8) as usize;
        let mut raw = vec![0u8; total * width as usize];
        r.read_exact(&mut raw)?;
        let scalars: Vec<f64> = raw
            .chunks_exact(width as usize)
            .map(|c| {
                if width == 4 {
                    f32::from_le(c) as f64
                } else {
                    f64::from_le(c)
                }
            })
            .collect();
        let mut store = ParamStore::new();
        for (name, offset, rows, cols) in entries {
            let end = offset + rows * cols;
            if end > scalars.len() {
                return Err(Error::Format(format!("parameter {name} overruns the blob")));
            }
            let data = scalars[offset..end].iter().map(|&x| F::lit(x)).collect();
            store.add(&name, Tensor::new(rows, cols, data)?);
        }
        Ok(store)
    }
}
