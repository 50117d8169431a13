//! Exit codes and the JSON error record printed on stderr.

use std::fmt;

use scenetok::assembly::AssemblyError;
use scenetok::codec::CodecError;
use scenetok::geometry::GeometryError;
use scenetok::io::IoError;
use scenetok::metrics::MetricError;
use scenetok::pose::PoseError;
use scenetok::preprocess::PreprocessError;
use scenetok::quantize::QuantizeError;
use scenetok::sequence::SequenceError;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Validation,
    Parse,
    Io,
    Internal,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Validation => 2,
            Kind::Parse => 3,
            Kind::Io => 4,
            Kind::Internal => 5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
}

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
            offset: None,
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(Kind::Validation, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(Kind::Internal, message)
    }

    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            error: &'a CliError,
            code: i32,
        }
        serde_json::to_string(&Record {
            error: self,
            code: self.kind.exit_code(),
        })
        .expect("plain record")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn with_offset(kind: Kind, message: String, offset: Option<usize>) -> CliError {
    CliError {
        kind,
        message,
        offset,
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        let kind = match &e {
            IoError::Io(_) => Kind::Io,
            IoError::UnknownExtension(_) => Kind::Validation,
            IoError::Format { .. } | IoError::Line { .. } | IoError::Json(_) => Kind::Parse,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(Kind::Io, e.to_string())
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        let kind = if e.offset().is_some() {
            Kind::Parse
        } else {
            Kind::Validation
        };
        with_offset(kind, e.to_string(), e.offset())
    }
}

impl From<SequenceError> for CliError {
    fn from(e: SequenceError) -> Self {
        let kind = match e {
            SequenceError::VocabularyOverflow(_)
            | SequenceError::EmptyMesh
            | SequenceError::PoseArity { .. } => Kind::Validation,
            _ => Kind::Parse,
        };
        with_offset(kind, e.to_string(), e.offset())
    }
}

impl From<PoseError> for CliError {
    fn from(e: PoseError) -> Self {
        let kind = match e {
            PoseError::Length { .. } | PoseError::TokenClass { .. } => Kind::Parse,
            _ => Kind::Validation,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<QuantizeError> for CliError {
    fn from(e: QuantizeError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<AssemblyError> for CliError {
    fn from(e: AssemblyError) -> Self {
        match e {
            AssemblyError::Sequence(s) => s.into(),
            AssemblyError::Pose(p) => p.into(),
            AssemblyError::Codec(c) => c.into(),
            AssemblyError::File { path, source } => CliError::from(source).context(path.display()),
            AssemblyError::Object { id, source } => {
                CliError::from(*source).context(format!("object {id}"))
            }
            AssemblyError::Manifest(m) => CliError::validation(format!("invalid manifest: {m}")),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::new(Kind::Parse, e.to_string())
    }
}
