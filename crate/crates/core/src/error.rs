use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("signal {0} touches no hyperedge")]
    NoIncidentEdge(usize),
    #[error("unknown vertex {0}")]
    UnknownVertex(usize),
    #[error("invalid hypergraph: {0}")]
    InvalidGraph(String),
    #[error("invalid signal layout: {0}")]
    InvalidLayout(String),
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("register labels do not match: {0}")]
    LabelMismatch(String),
    #[error("mixing probabilities do not form a distribution: {0}")]
    BadDistribution(String),
    #[error("unknown qubit {0}")]
    UnknownQubit(String),
    #[error("observable support not contained in register: {0}")]
    SupportMismatch(String),
    #[error("post-selection branch has probability {0:e}")]
    ZeroProbability(f64),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("problem too large for dense simulation: {0}")]
    TooLarge(String),
    #[error("input is not a product state: {0}")]
    NotProductInput(String),
    #[error("state is not given in network form: {0}")]
    NotNetworkForm(String),
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("input state is not fully separable: {0}")]
    NotSeparableInput(String),
    #[error("center vertex {0} is a cut-vertex")]
    CutVertexCenter(usize),
    #[error("hypergraph is not connected")]
    Disconnected,
    #[error("signal-state recurrence did not converge: {0}")]
    NotConvergent(String),
    #[error("weight of vertex {0} is zero")]
    ZeroWeight(usize),
    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),
    #[error("outcome probability {0} is degenerate at the evaluation point")]
    DegenerateP(f64),
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for errors that mean "valid input, but beyond what dense
    /// simulation can handle".
    pub fn is_too_large(&self) -> bool {
        matches!(self, Error::TooLarge(_))
    }
}
