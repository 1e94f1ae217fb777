use serde::{Deserialize, Serialize};

/// What a device receives: where to fetch its archive and how to check it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeployManifest {
    pub job_id: String,
    pub device: String,
    pub archive_uri: String,
    /// Hex SHA-256 of the archive bytes.
    pub archive_digest: String,
    pub descriptor_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    DigestMismatch,
    DownloadFailed,
    ExtractionFailed,
    CountMismatch,
    XmlInvalid,
    InvalidManifest,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::DigestMismatch => "digest-mismatch",
            FailureReason::DownloadFailed => "download-failed",
            FailureReason::ExtractionFailed => "extraction-failed",
            FailureReason::CountMismatch => "count-mismatch",
            FailureReason::XmlInvalid => "xml-invalid",
            FailureReason::InvalidManifest => "invalid-manifest",
        }
    }
}

/// Response body of an agent's `POST /deploy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Ack {
    Ok {
        files: usize,
        elapsed_ms: f64,
    },
    Failed {
        reason: FailureReason,
        #[serde(default)]
        detail: String,
    },
}

impl Ack {
    pub fn failed(reason: FailureReason, detail: impl Into<String>) -> Self {
        Ack::Failed {
            reason,
            detail: detail.into(),
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Ack::Ok { .. })
    }
}
