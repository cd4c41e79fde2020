use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("missing marker: {0}")]
    MissingMarker(&'static str),
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("corrupt segment: {0}")]
    CorruptSegment(String),
    #[error("invalid huffman table: {0}")]
    InvalidTable(String),

    #[error("entropy-coded data exhausted in the middle of a block")]
    BitstreamExhausted,
    #[error("no huffman code matches within 16 bits")]
    BadCode,
    #[error("unexpected marker 0xFF{0:02X} inside scan data")]
    MarkerInScan(u8),
    #[error("requested {requested} MCU rows but only {remaining} remain")]
    RowsOutOfRange { requested: usize, remaining: usize },

    #[error("lane has shut down")]
    LaneShutDown,
    #[error("work item rows {start}..{end} overlap an in-flight item")]
    RowOverlap { start: usize, end: usize },
    #[error("work item rows {start}..{end} are not entropy-decoded yet")]
    RowsNotReady { start: usize, end: usize },
    #[error("lane worker failed: {0}")]
    WorkerFailed(String),

    #[error("image area is zero")]
    ZeroArea,
    #[error("entropy density must be positive")]
    ZeroDensity,
    #[error("singular fit: {0}")]
    SingularFit(String),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("estimated huffman time or remaining height is zero")]
    ZeroEstimate,
    #[error("profile: {0}")]
    Profile(String),

    #[error("plan infeasible: {0}")]
    PlanInfeasible(String),
    #[error("mode {0} requires a device profile")]
    MissingProfile(&'static str),
    #[error("reference report has zero huffman time")]
    ZeroHuffman,
}
