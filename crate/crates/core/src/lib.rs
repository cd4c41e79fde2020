//! Baseline JPEG decoding with the post-entropy stages split between a host
//! lane and a simulated accelerator lane.
//!
//! The decoder is organised the way the work flows through it:
//!
//! * [`parser`] and [`huffman`] read the marker segments and build decode
//!   tables.
//! * [`entropy`] performs the sequential Huffman stage into a whole-image,
//!   plane-by-plane [`CoefficientBuffer`], one MCU row at a time.
//! * [`transform`] holds the data-parallel kernels (dequantization, IDCT,
//!   4:2:2 upsampling, color conversion and their fused forms).
//! * [`lane`] runs kernels over row bands on a host lane or on an
//!   asynchronous accelerator lane with modeled transfer costs.
//! * [`perf`] fits polynomial cost models from profiling runs.
//! * [`partition`] solves for the host/accelerator row split.
//! * [`pipeline`] drives the six execution modes end to end.

pub mod buffer;
pub mod clock;
pub mod entropy;
pub mod error;
pub mod huffman;
pub mod lane;
pub mod parser;
pub mod partition;
pub mod perf;
pub mod pipeline;
pub mod pixels;
pub mod transform;

pub use buffer::{Block, CoefRows, CoefRowsMut, CoefficientBuffer};
pub use entropy::{EntropyCursor, EntropyDecoder};
pub use error::{Error, Result};
pub use lane::{AcceleratorLane, HostLane, LaneConfig, Lanes, Ticket, TicketReport, WorkItem};
pub use parser::{parse_stream, ImageGeometry, ParsedJpeg, Subsampling};
pub use partition::{PartitionPlan, RepartitionState, Scheme};
pub use perf::{DeviceProfile, PolyModel};
pub use pipeline::{decode, DecodeOptions, DecodeReport, Mode};
pub use pixels::PixelBuffer;
pub use transform::IdctKind;
