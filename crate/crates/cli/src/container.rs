//! Versioned binary model container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    b"EEMC"
//! version  u32 (currently 1)
//! backend  u8: 0 = synthetic transformer, 1 = prediction table
//!
//! synthetic: hidden_dim u32, num_layers u32, num_classes u32, seed u64,
//!            overthink_rate f32 (bit pattern),
//!            planted count u32 + (task string, depth u32) entries,
//!            label strings,
//!            weight arrays in order: pos, per block (wq wk wv wo w1 w2),
//!            head — each as count u32 + f32 values
//! table:     num_layers u32, label strings,
//!            row count u32 + per row (truth u16, num_layers x u16)
//!
//! strings:  u32 byte length + UTF-8 bytes
//! ```
//!
//! Encoding is byte-deterministic (map entries in sorted order), so
//! regenerating a model from the same spec produces an identical file.
//! Decode errors carry the byte offset at which parsing failed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use earlyexit_core::model::{
    BlockWeights, LabelId, LabelSet, LayeredModel, ModelBackend, PredictionTable,
    SyntheticTransformer, SyntheticTransformerSpec, TableRow,
};

const MAGIC: &[u8; 4] = b"EEMC";
pub const CONTAINER_VERSION: u32 = 1;

const BACKEND_SYNTHETIC: u8 = 0;
const BACKEND_TABLE: u8 = 1;

pub fn write_model(path: &Path, model: &LayeredModel) -> Result<()> {
    let bytes = encode_model(model);
    fs::write(path, bytes).with_context(|| format!("writing model file {}", path.display()))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<LayeredModel> {
    let bytes =
        fs::read(path).with_context(|| format!("reading model file {}", path.display()))?;
    decode_model(&bytes).with_context(|| format!("decoding model file {}", path.display()))
}

pub fn encode_model(model: &LayeredModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    match model.backend() {
        ModelBackend::Synthetic(m) => {
            out.push(BACKEND_SYNTHETIC);
            encode_synthetic(&mut out, m);
        }
        ModelBackend::Table(t) => {
            out.push(BACKEND_TABLE);
            encode_table(&mut out, t);
        }
    }
    out
}

fn encode_synthetic(out: &mut Vec<u8>, m: &SyntheticTransformer) {
    let spec = m.spec();
    out.extend_from_slice(&spec.hidden_dim.to_le_bytes());
    out.extend_from_slice(&spec.num_layers.to_le_bytes());
    out.extend_from_slice(&spec.num_classes.to_le_bytes());
    out.extend_from_slice(&spec.seed.to_le_bytes());
    out.extend_from_slice(&spec.overthink_rate.to_bits().to_le_bytes());
    out.extend_from_slice(&(spec.planted_depths.len() as u32).to_le_bytes());
    for (task, depth) in &spec.planted_depths {
        put_string(out, task);
        out.extend_from_slice(&depth.to_le_bytes());
    }
    put_labels(out, m.labels());
    put_floats(out, m.pos_weights());
    for block in m.block_weights() {
        for arr in [&block.wq, &block.wk, &block.wv, &block.wo, &block.w1, &block.w2] {
            put_floats(out, arr);
        }
    }
    put_floats(out, m.head_weights());
}

fn encode_table(out: &mut Vec<u8>, t: &PredictionTable) {
    out.extend_from_slice(&t.num_layers().to_le_bytes());
    put_labels(out, t.labels());
    out.extend_from_slice(&(t.rows().len() as u32).to_le_bytes());
    for row in t.rows() {
        out.extend_from_slice(&row.truth.0.to_le_bytes());
        for p in &row.predictions {
            out.extend_from_slice(&p.0.to_le_bytes());
        }
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<LayeredModel> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4)?;
    if magic != MAGIC {
        bail!("not a model container (bad magic at byte 0)");
    }
    let version = r.u32()?;
    if version != CONTAINER_VERSION {
        bail!("unsupported container version {version} (supported: {CONTAINER_VERSION})");
    }
    let backend = r.u8()?;
    let model = match backend {
        BACKEND_SYNTHETIC => decode_synthetic(&mut r)?,
        BACKEND_TABLE => decode_table(&mut r)?,
        other => bail!("unknown backend tag {other} at byte {}", r.offset - 1),
    };
    if !r.at_end() {
        bail!("trailing bytes after model payload at byte {}", r.offset);
    }
    Ok(model)
}

fn decode_synthetic(r: &mut Reader<'_>) -> Result<LayeredModel> {
    let hidden_dim = r.u32()?;
    let num_layers = r.u32()?;
    let num_classes = r.u32()?;
    let seed = r.u64()?;
    let overthink_rate = f32::from_bits(r.u32()?);
    let planted_count = r.u32()?;
    let mut planted_depths = BTreeMap::new();
    for _ in 0..planted_count {
        let task = r.string()?;
        let depth = r.u32()?;
        planted_depths.insert(task, depth);
    }
    let spec = SyntheticTransformerSpec {
        hidden_dim,
        num_layers,
        num_classes,
        seed,
        planted_depths,
        overthink_rate,
    };
    let labels = r.labels()?;
    let pos = r.floats()?;
    let mut blocks = Vec::with_capacity(num_layers as usize);
    for _ in 0..num_layers {
        blocks.push(BlockWeights {
            wq: r.floats()?,
            wk: r.floats()?,
            wv: r.floats()?,
            wo: r.floats()?,
            w1: r.floats()?,
            w2: r.floats()?,
        });
    }
    let head = r.floats()?;
    let m = SyntheticTransformer::from_parts(spec, labels, pos, head, blocks)?;
    Ok(LayeredModel::from_synthetic(m))
}

fn decode_table(r: &mut Reader<'_>) -> Result<LayeredModel> {
    let num_layers = r.u32()?;
    let labels = r.labels()?;
    let row_count = r.u32()?;
    let mut rows = Vec::with_capacity(row_count as usize);
    for _ in 0..row_count {
        let truth = LabelId(r.u16()?);
        let mut predictions = Vec::with_capacity(num_layers as usize);
        for _ in 0..num_layers {
            predictions.push(LabelId(r.u16()?));
        }
        rows.push(TableRow { truth, predictions });
    }
    let table = PredictionTable::new(LabelSet::new(labels), num_layers, rows)?;
    Ok(LayeredModel::table(table))
}

fn put_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_labels(out: &mut Vec<u8>, labels: &LabelSet) {
    out.extend_from_slice(&(labels.len() as u32).to_le_bytes());
    for name in labels.names() {
        put_string(out, name);
    }
}

fn put_floats(out: &mut Vec<u8>, values: &[f32]) {
    out.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, offset: 0 }
    }

    fn at_end(&self) -> bool {
        self.offset == self.bytes.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.offset + n > self.bytes.len() {
            bail!(
                "truncated file: needed {n} bytes at byte {}, only {} remain",
                self.offset,
                self.bytes.len() - self.offset
            );
        }
        let slice = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let start = self.offset;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| anyhow::anyhow!("invalid UTF-8 string at byte {start}"))
    }

    fn labels(&mut self) -> Result<Vec<String>> {
        let count = self.u32()? as usize;
        let mut names = Vec::with_capacity(count);
        for _ in 0..count {
            names.push(self.string()?);
        }
        Ok(names)
    }

    fn floats(&mut self) -> Result<Vec<f32>> {
        let count = self.u32()? as usize;
        let bytes = self.take(count * 4)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_bits(u32::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }
}
