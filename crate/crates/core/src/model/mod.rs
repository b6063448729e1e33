//! Transformer encoder over transaction sequences, trained by masked address
//! prediction. Forward and backward passes are written out by hand and are
//! generic over `f32` (training) and `f64` (gradient checks).

mod embed;
mod encoder;
mod float;
mod layers;
mod loss;
mod params;
mod pass;
mod represent;

pub use embed::{embed_backward, embed_sequence, embed_transaction, gate_fuse, EmbedCache};
pub use encoder::{attention_received, encoder_backward, encoder_forward, ForwardTrace, LayerTrace};
pub use float::Float;
pub use layers::{
    attention, attention_backward, gelu, gelu_grad, layer_norm, sigmoid, AttentionCache, DropoutSource, NoDropout,
    SampledDropout,
};
pub use loss::{map_loss, MapLoss, PoolEmbedding};
pub use params::{DenseParams, FeatureTables, GateParams, Gradients, LayerParams, ModelConfig, ModelParams, RowGrads};
pub use pass::{
    backward_view, forward_view, loss_positions, sequence_loss, sequence_loss_and_grad, training_views, DropoutPlan,
    View, ViewTrace,
};
pub use represent::{
    account_views, extract_representation, represent, represent_backward, AccountRepresentation,
    RepresentationSource, RepresentationTrace,
};
