use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid fovea config: {0}")]
    InvalidFovea(String),
    #[error("focal point ({x}, {y}) is outside the {width}x{height} image")]
    FocalOutOfBounds {
        x: i64,
        y: i64,
        width: u32,
        height: u32,
    },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid class set: {0}")]
    InvalidClasses(String),
    #[error("invalid score vector: {0}")]
    InvalidScores(String),
    #[error("cell ({x}, {y}) is outside the grid")]
    CellOutOfBounds { x: usize, y: usize },
    #[error("every grid cell is inhibited")]
    SearchExhausted,
    #[error("invalid scene {scene}: {reason}")]
    InvalidScene { scene: String, reason: String },
    #[error("invalid detector model: {0}")]
    InvalidModel(String),
    #[error("wire format violation: {0}")]
    Wire(String),
    #[error("raster: {0}")]
    Raster(String),
    #[error("bridge timed out waiting for {0}")]
    BridgeTimeout(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}

pub(crate) fn json_err(path: impl Into<PathBuf>) -> impl FnOnce(serde_json::Error) -> Error {
    let path = path.into();
    move |source| Error::Json { path, source }
}
