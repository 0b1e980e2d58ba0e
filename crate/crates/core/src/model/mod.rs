//! Layered-classifier abstraction and backends.
//!
//! A model is a stack of layers `f_1..f_L` over an embedded input, with one
//! shared prediction head readable at any depth. Two backends implement the
//! abstraction:
//!
//! - [`SyntheticTransformer`] — deterministic pre-norm transformer blocks
//!   with genuine per-layer compute, generated from a seed. Supports planted
//!   per-task stabilization depths and planted over-thinking.
//! - [`PredictionTable`] — stores the per-layer predicted label for every
//!   sample outright. Float-free, used as an exact oracle for profiling and
//!   selection logic.

mod params;
mod synthetic;
mod table;

pub use params::ParamModel;
pub use synthetic::{
    generate_synthetic_dataset, BlockWeights, SyntheticTransformer, SyntheticTransformerSpec,
};
pub use table::{PredictionTable, TableRow};

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{Sample, SamplePayload};
use crate::error::{Error, Result};

/// Index into a model's label set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabelId(pub u16);

/// Ordered class labels. Order is significant: argmax ties resolve to the
/// lowest index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    names: Vec<String>,
}

impl LabelSet {
    pub fn new(names: Vec<String>) -> Self {
        Self { names }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: LabelId) -> Option<&str> {
        self.names.get(id.0 as usize).map(String::as_str)
    }

    pub fn id_of(&self, name: &str) -> Option<LabelId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| LabelId(i as u16))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, id: LabelId) -> bool {
        (id.0 as usize) < self.names.len()
    }
}

/// Hidden state after `layer_index` layers (0 = embedding output).
///
/// For the synthetic backend `activations` is the flattened token-major
/// state (`seq_len * hidden_dim` values); the table backend carries no
/// activations and the vector is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub activations: Vec<f32>,
    pub layer_index: u32,
}

/// Backend dispatch for [`LayeredModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelBackend {
    Synthetic(SyntheticTransformer),
    Table(PredictionTable),
}

/// A layered classifier: embedding, `L` layers, shared head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredModel {
    backend: ModelBackend,
}

impl LayeredModel {
    pub fn synthetic(spec: SyntheticTransformerSpec) -> Result<Self> {
        Ok(Self {
            backend: ModelBackend::Synthetic(SyntheticTransformer::generate(spec)?),
        })
    }

    /// Wraps an already-built synthetic backend (e.g. loaded from a file).
    pub fn from_synthetic(model: SyntheticTransformer) -> Self {
        Self {
            backend: ModelBackend::Synthetic(model),
        }
    }

    pub fn table(table: PredictionTable) -> Self {
        Self {
            backend: ModelBackend::Table(table),
        }
    }

    pub fn backend(&self) -> &ModelBackend {
        &self.backend
    }

    pub fn num_layers(&self) -> u32 {
        match &self.backend {
            ModelBackend::Synthetic(m) => m.spec().num_layers,
            ModelBackend::Table(t) => t.num_layers(),
        }
    }

    pub fn label_set(&self) -> &LabelSet {
        match &self.backend {
            ModelBackend::Synthetic(m) => m.labels(),
            ModelBackend::Table(t) => t.labels(),
        }
    }

    /// Feature-vector length expected by `embed`; `None` for the table
    /// backend, which treats samples as opaque row references.
    pub fn input_dim(&self) -> Option<usize> {
        match &self.backend {
            ModelBackend::Synthetic(m) => Some(m.hidden_dim()),
            ModelBackend::Table(_) => None,
        }
    }

    fn check_layer(&self, layer: u32) -> Result<()> {
        if layer == 0 || layer > self.num_layers() {
            return Err(Error::LayerIndex {
                layer,
                num_layers: self.num_layers(),
            });
        }
        Ok(())
    }

    /// Embeds a sample, producing `h_0`.
    pub fn embed(&self, sample: &Sample) -> Result<HiddenState> {
        let cursor = self.cursor(sample)?;
        Ok(cursor.state())
    }

    /// Computes `h_l` by applying layers 1..=l in order.
    pub fn forward_to(&self, sample: &Sample, layer: u32) -> Result<HiddenState> {
        self.forward_to_instrumented(sample, layer).map(|(h, _)| h)
    }

    /// Like [`forward_to`](Self::forward_to), also reporting how many layer
    /// applications actually ran.
    pub fn forward_to_instrumented(
        &self,
        sample: &Sample,
        layer: u32,
    ) -> Result<(HiddenState, u32)> {
        self.check_layer(layer)?;
        let mut cursor = self.cursor(sample)?;
        while cursor.layer() < layer {
            cursor.advance()?;
        }
        let applied = cursor.layers_applied();
        Ok((cursor.state(), applied))
    }

    /// Applies the single layer `layer` to a hidden state at `layer - 1`.
    pub fn apply_layer(&self, state: &HiddenState, layer: u32) -> Result<HiddenState> {
        self.check_layer(layer)?;
        if state.layer_index != layer - 1 {
            return Err(Error::LayerIndex {
                layer,
                num_layers: self.num_layers(),
            });
        }
        match &self.backend {
            ModelBackend::Synthetic(m) => {
                let mut acts = state.activations.clone();
                m.apply_block(&mut acts, layer)?;
                Ok(HiddenState {
                    activations: acts,
                    layer_index: layer,
                })
            }
            ModelBackend::Table(_) => Ok(HiddenState {
                activations: Vec::new(),
                layer_index: layer,
            }),
        }
    }

    /// Shared-head prediction at layer `l`.
    pub fn predict_at(&self, sample: &Sample, layer: u32) -> Result<LabelId> {
        self.head_confidence(sample, layer).map(|(label, _)| label)
    }

    /// Shared-head prediction plus confidence (max softmax probability for
    /// the synthetic backend; fixed 1.0 for the table backend, which stores
    /// labels only).
    pub fn head_confidence(&self, sample: &Sample, layer: u32) -> Result<(LabelId, f32)> {
        self.check_layer(layer)?;
        let mut cursor = self.cursor(sample)?;
        while cursor.layer() < layer {
            cursor.advance()?;
        }
        cursor.head()
    }

    /// One incremental forward pass reading the head at every layer.
    /// Element `i` holds the prediction at layer `i + 1`.
    pub fn predict_all_layers(&self, sample: &Sample) -> Result<Vec<(LabelId, f32)>> {
        let mut cursor = self.cursor(sample)?;
        let mut out = Vec::with_capacity(self.num_layers() as usize);
        for _ in 0..self.num_layers() {
            cursor.advance()?;
            out.push(cursor.head()?);
        }
        Ok(out)
    }

    /// Starts a stepping cursor at the embedding (layer 0).
    pub fn cursor<'m>(&'m self, sample: &Sample) -> Result<LayerCursor<'m>> {
        let state = match (&self.backend, &sample.payload) {
            (ModelBackend::Synthetic(m), SamplePayload::Features(x)) => {
                CursorState::Synthetic(m.embed(x)?)
            }
            (ModelBackend::Synthetic(m), SamplePayload::TableRow(_)) => {
                return Err(Error::InputShape {
                    expected: m.hidden_dim(),
                    got: 0,
                });
            }
            (ModelBackend::Table(t), SamplePayload::TableRow(row)) => {
                t.check_row(*row)?;
                CursorState::Table { row: *row }
            }
            (ModelBackend::Table(_), SamplePayload::Features(x)) => {
                return Err(Error::InputShape {
                    expected: 0,
                    got: x.len(),
                });
            }
        };
        Ok(LayerCursor {
            model: self,
            state,
            layer: 0,
            applied: 0,
        })
    }
}

enum CursorState {
    Synthetic(Vec<f32>),
    Table { row: usize },
}

/// Incremental forward pass: one layer per [`advance`](Self::advance), with
/// the shared head readable at the current depth. The application counter is
/// call-local instrumentation; it counts real layer applications.
pub struct LayerCursor<'m> {
    model: &'m LayeredModel,
    state: CursorState,
    layer: u32,
    applied: u32,
}

impl<'m> LayerCursor<'m> {
    pub fn layer(&self) -> u32 {
        self.layer
    }

    /// Number of layer applications performed so far.
    pub fn layers_applied(&self) -> u32 {
        self.applied
    }

    /// Applies the next layer.
    pub fn advance(&mut self) -> Result<()> {
        let next = self.layer + 1;
        if next > self.model.num_layers() {
            return Err(Error::LayerIndex {
                layer: next,
                num_layers: self.model.num_layers(),
            });
        }
        match (&self.model.backend, &mut self.state) {
            (ModelBackend::Synthetic(m), CursorState::Synthetic(acts)) => {
                m.apply_block(acts, next)?;
            }
            (ModelBackend::Table(_), CursorState::Table { .. }) => {}
            _ => unreachable!("cursor state always matches backend"),
        }
        self.layer = next;
        self.applied += 1;
        Ok(())
    }

    /// Reads the shared head at the current layer (which must be >= 1).
    pub fn head(&self) -> Result<(LabelId, f32)> {
        if self.layer == 0 {
            return Err(Error::LayerIndex {
                layer: 0,
                num_layers: self.model.num_layers(),
            });
        }
        match (&self.model.backend, &self.state) {
            (ModelBackend::Synthetic(m), CursorState::Synthetic(acts)) => Ok(m.head(acts)),
            (ModelBackend::Table(t), CursorState::Table { row }) => {
                Ok((t.prediction(*row, self.layer)?, 1.0))
            }
            _ => unreachable!("cursor state always matches backend"),
        }
    }

    /// Snapshot of the current hidden state.
    pub fn state(&self) -> HiddenState {
        let activations = match &self.state {
            CursorState::Synthetic(acts) => acts.clone(),
            CursorState::Table { .. } => Vec::new(),
        };
        HiddenState {
            activations,
            layer_index: self.layer,
        }
    }
}
