//! Contact-label acquisition.
//!
//! Frames are annotated with hand dots and uniquely-colored candidate masks,
//! prompted against a vision-language model behind [`VlmClient`], parsed
//! strictly, and validated against the one-hand-one-object rule. A proximity
//! oracle provides ground-truth labels on synthetic scenes, and
//! [`labeler_f1`] scores any labeler against them.

pub mod client;
pub mod error;
pub mod f1;
pub mod label;
pub mod oracle;
pub mod parse;
pub mod prompt;
mod templates;
pub mod validate;

pub use client::{LiveClient, LiveConfig, OracleClient, ReplayClient, VlmClient};
pub use error::{ClientError, ContactError};
pub use f1::{labeler_f1, F1Report, F1Scores};
pub use label::{label_video, LabelOutcome, LabeledFrame, Provenance};
pub use oracle::{oracle_contacts, ORACLE_THRESHOLD};
pub use parse::parse_response;
pub use prompt::{build_prompt, default_examples, AnnotatedImage, ContactQuery, FrameMasks};
pub use templates::SYSTEM_PROMPT;
pub use validate::{validate, Violation};
