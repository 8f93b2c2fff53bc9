//! A decoder-only transformer, written down in closed form from an embedding,
//! that reads the labels along one path of an encoded tree.
//!
//! Each of the `n` slots holds `(p, v, w, r, t)`: a position code, an input
//! vector, the input transformed by the current path attribute, the remaining
//! path as an encoded list, and the decoded token. Slot 1 starts with the
//! encoded tree and the shifted path. A pass of two feed-forward layers
//! decodes slot 1; each following block `D = F2 ∘ F1 ∘ (A + id)` copies the
//! transformed vector and the advanced path one slot forward and decodes it.

mod model;
mod position;
mod weights;

pub use model::{run_decoder, SeqState, SlotPart, Transformer, XfConfig, XfStepTrace, XfTrace};
pub use position::{build_position_codes, PositionCodes};
pub use weights::{Block, BlockKind, BlockLinear};
