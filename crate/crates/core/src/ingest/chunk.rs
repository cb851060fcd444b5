use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::text::token_spans;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub index: usize,
    /// Token span `[start, end)`.
    pub token_span: Range<usize>,
    /// Source text from the first to the last token of the span.
    pub text: String,
}

/// Slides a `window`-token window over `text` in steps of `stride`.
///
/// Windows start at 0, stride, 2*stride, ... and are truncated at the end of
/// the text. A window whose span lies inside the previous one adds nothing
/// and is not emitted.
pub fn chunk_text(
    doc_id: &str,
    text: &str,
    window: usize,
    stride: usize,
) -> Result<Vec<Chunk>, IngestError> {
    if window == 0 || stride == 0 || stride > window {
        return Err(IngestError::InvalidParams(format!(
            "window={window}, stride={stride}: need window >= 1 and 1 <= stride <= window"
        )));
    }
    let spans = token_spans(text);
    let n = spans.len();
    let mut chunks = Vec::new();
    let mut prev_end = 0;
    let mut start = 0;
    while start < n {
        let end = (start + window).min(n);
        if end > prev_end {
            chunks.push(Chunk {
                doc_id: doc_id.to_string(),
                index: chunks.len(),
                token_span: start..end,
                text: text[spans[start].start..spans[end - 1].end].to_string(),
            });
            prev_end = end;
        }
        if end == n {
            break;
        }
        start += stride;
    }
    Ok(chunks)
}
