//! Splitting a document body into message-sized pieces.
//!
//! Sections are packed greedily. A section that fits the budget is never
//! split; one that does not is cut at paragraph boundaries, and a single
//! paragraph longer than the budget is cut at whitespace (or mid-word as a
//! last resort). Concatenating the chunks reproduces [`MaterialDoc::body`].

use super::{MaterialDoc, MaterialsError};

pub fn chunk_document(doc: &MaterialDoc, max_chunk: usize) -> Result<Vec<String>, MaterialsError> {
    if max_chunk == 0 {
        return Err(MaterialsError::ZeroChunk);
    }
    let mut units: Vec<String> = Vec::new();
    for section in doc.sections() {
        let text = section.rendered();
        if char_len(&text) <= max_chunk {
            units.push(text);
        } else {
            units.extend(split_oversized(&text, max_chunk));
        }
    }
    Ok(pack(units, max_chunk))
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

fn pack(units: Vec<String>, max_chunk: usize) -> Vec<String> {
    let mut chunks = Vec::new();
    let mut current = String::new();
    let mut current_len = 0;
    for unit in units {
        let len = char_len(&unit);
        if current_len > 0 && current_len + len > max_chunk {
            chunks.push(std::mem::take(&mut current));
            current_len = 0;
        }
        current.push_str(&unit);
        current_len += len;
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    chunks
}

/// Pieces of at most `max_chunk` chars, cut after paragraph breaks where possible.
fn split_oversized(text: &str, max_chunk: usize) -> Vec<String> {
    let mut paragraphs: Vec<String> = Vec::new();
    let mut rest = text;
    while let Some(pos) = rest.find("\n\n") {
        paragraphs.push(rest[..pos + 2].to_string());
        rest = &rest[pos + 2..];
    }
    if !rest.is_empty() {
        paragraphs.push(rest.to_string());
    }
    let mut pieces = Vec::new();
    for p in paragraphs {
        if char_len(&p) <= max_chunk {
            pieces.push(p);
        } else {
            pieces.extend(hard_split(&p, max_chunk));
        }
    }
    pack(pieces, max_chunk)
}

fn hard_split(text: &str, max_chunk: usize) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let mut end = (start + max_chunk).min(chars.len());
        if end < chars.len() {
            // prefer cutting just after whitespace in the back half of the window
            let floor = start + max_chunk / 2;
            if let Some(ws) = (floor.max(start + 1)..end).rev().find(|&i| chars[i - 1].is_whitespace()) {
                end = ws;
            }
        }
        out.push(chars[start..end].iter().collect());
        start = end;
    }
    out
}
