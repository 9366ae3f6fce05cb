//! Serialization: a self-describing tensor container for images, sinograms
//! and network weights, plus 16-bit PGM previews and CSV solver traces.

mod container;
mod export;
mod weights;

pub use container::{load, save, Tensor, TensorContainer, FORMAT_VERSION, MAGIC};
pub use export::{export_csv_trace, export_pgm, parse_csv_trace, TRACE_CSV_HEADER};
pub use weights::{load_net, net_to_container, net_from_container, save_net};
