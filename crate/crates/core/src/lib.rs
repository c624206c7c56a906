//! Alignment-kernel convolutional networks for multichannel sequence
//! labeling: learnable alignment filters, synthesized chain filters, a 1D
//! convolutional backbone and per-frame prediction.

pub mod align;
pub mod archive;
pub mod array;
pub mod backbone;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod network;
pub mod scalar;
pub mod synthesis;
pub mod train;

pub use align::{AlignFilter, AlignmentConfig, AlignmentMap};
pub use array::{Array, ParamBuffer, Padding};
pub use backbone::{BackboneConfig, PredictionMap};
pub use data::{Dataset, MotionSequence, NormalizationStats, Split, SyntheticSpec, GAP_CLASS};
pub use error::{Error, Result};
pub use eval::{FilterAssociation, SegmentationScore};
pub use network::{Mode, Network, NetworkConfig};
pub use scalar::Scalar;
pub use synthesis::AbsFilter;
pub use train::{TargetLabels, TrainConfig, TrainOutput, TrainedModel};

pub type RealArray = Array<f64>;
pub type Sequence = MotionSequence<f64>;
pub type Model = TrainedModel<f64>;
