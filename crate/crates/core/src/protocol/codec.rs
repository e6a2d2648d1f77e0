use std::fmt;
use std::io::{BufRead, Read, Write};

use thiserror::Error;

use super::{ProtocolError, WireMessage};

/// Largest frame, newline included.
pub const MAX_FRAME: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecodeErrorKind {
    /// The input ended before the newline.
    Truncated,
    TooLarge,
    /// More than one line in a frame.
    EmbeddedNewline,
    Json(String),
}

impl fmt::Display for DecodeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeErrorKind::Truncated => f.write_str("frame ends without a newline"),
            DecodeErrorKind::TooLarge => write!(f, "frame exceeds {MAX_FRAME} bytes"),
            DecodeErrorKind::EmbeddedNewline => f.write_str("newline inside a frame"),
            DecodeErrorKind::Json(e) => f.write_str(e),
        }
    }
}

/// A malformed frame. `offset` counts bytes from the start of the stream
/// (or of the frame, for [`decode`]).
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("byte {offset}: {kind}")]
pub struct DecodeError {
    pub offset: usize,
    pub kind: DecodeErrorKind,
}

impl DecodeError {
    fn shifted(mut self, by: usize) -> Self {
        self.offset += by;
        self
    }
}

pub fn encode(msg: &WireMessage) -> Result<Vec<u8>, ProtocolError> {
    let mut buf = serde_json::to_vec(msg)?;
    buf.push(b'\n');
    if buf.len() > MAX_FRAME {
        return Err(ProtocolError::FrameTooLarge { len: buf.len() });
    }
    Ok(buf)
}

/// Offset of a serde_json error inside a single-line frame.
fn json_offset(frame: &[u8], e: &serde_json::Error) -> usize {
    if e.line() <= 1 {
        e.column().saturating_sub(1).min(frame.len())
    } else {
        frame.len()
    }
}

/// Parses one `\n`-terminated frame.
pub fn decode(frame: &[u8]) -> Result<WireMessage, DecodeError> {
    if frame.len() > MAX_FRAME {
        return Err(DecodeError {
            offset: MAX_FRAME,
            kind: DecodeErrorKind::TooLarge,
        });
    }
    let Some((&b'\n', body)) = frame.split_last() else {
        return Err(DecodeError {
            offset: frame.len(),
            kind: DecodeErrorKind::Truncated,
        });
    };
    if let Some(pos) = body.iter().position(|&b| b == b'\n') {
        return Err(DecodeError {
            offset: pos,
            kind: DecodeErrorKind::EmbeddedNewline,
        });
    }
    serde_json::from_slice(body).map_err(|e| DecodeError {
        offset: json_offset(body, &e),
        kind: DecodeErrorKind::Json(e.to_string()),
    })
}

pub struct FrameReader<R> {
    inner: R,
    offset: usize,
    buf: Vec<u8>,
}

impl<R: BufRead> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        FrameReader {
            inner,
            offset: 0,
            buf: Vec::new(),
        }
    }

    /// Bytes consumed so far.
    pub fn offset(&self) -> usize {
        self.offset
    }

    /// The next message, or `None` at a clean end of input.
    pub fn read(&mut self) -> Result<Option<WireMessage>, ProtocolError> {
        self.buf.clear();
        let n = (&mut self.inner)
            .take(MAX_FRAME as u64)
            .read_until(b'\n', &mut self.buf)?;
        if n == 0 {
            return Ok(None);
        }
        let start = self.offset;
        self.offset += n;
        if self.buf.last() != Some(&b'\n') {
            let kind = if n >= MAX_FRAME {
                DecodeErrorKind::TooLarge
            } else {
                DecodeErrorKind::Truncated
            };
            return Err(DecodeError { offset: self.offset, kind }.into());
        }
        Ok(Some(decode(&self.buf).map_err(|e| e.shifted(start))?))
    }
}

pub struct FrameWriter<W> {
    inner: W,
}

impl<W: Write> FrameWriter<W> {
    pub fn new(inner: W) -> Self {
        FrameWriter { inner }
    }

    pub fn send(&mut self, msg: &WireMessage) -> Result<(), ProtocolError> {
        let frame = encode(msg)?;
        self.inner.write_all(&frame)?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Example;
    use std::io::Cursor;

    #[test]
    fn feedback_round_trips() {
        let m = WireMessage::Feedback {
            t: 4,
            label: "B".into(),
            feature: Some(7),
            polarity: Some(false),
        };
        let bytes = encode(&m).unwrap();
        assert_eq!(
            std::str::from_utf8(&bytes).unwrap(),
            "{\"type\":\"Feedback\",\"t\":4,\"label\":\"B\",\"feature\":7,\"polarity\":false}\n"
        );
        assert_eq!(decode(&bytes).unwrap(), m);
    }

    #[test]
    fn truncated_frame_is_an_error() {
        let e = decode(b"{\"type\":\"Ack\",\"t\":1}").unwrap_err();
        assert_eq!(e.kind, DecodeErrorKind::Truncated);
        let e = decode(b"{\"type\":\"Ack\",\"t\":\n").unwrap_err();
        assert!(matches!(e.kind, DecodeErrorKind::Json(_)));
        assert_eq!(e.offset, 17);
    }

    #[test]
    fn reader_reports_stream_offsets() {
        let input = b"{\"type\":\"Ack\",\"t\":1}\n{\"type\":\"Ack\",\"t\":x}\n";
        let mut r = FrameReader::new(Cursor::new(&input[..]));
        assert_eq!(r.read().unwrap(), Some(WireMessage::Ack { t: 1 }));
        let Err(ProtocolError::Decode(e)) = r.read() else {
            panic!("expected a decode error")
        };
        assert_eq!(e.offset, 21 + 18);
    }

    #[test]
    fn reader_stops_cleanly_at_eof() {
        let mut r = FrameReader::new(Cursor::new(Vec::new()));
        assert!(r.read().unwrap().is_none());
        let mut r = FrameReader::new(Cursor::new(b"{\"type\"".to_vec()));
        assert!(matches!(
            r.read(),
            Err(ProtocolError::Decode(DecodeError {
                kind: DecodeErrorKind::Truncated,
                ..
            }))
        ));
    }

    #[test]
    fn oversized_frames_are_rejected() {
        let big = WireMessage::Example {
            t: 0,
            assignment: Example::from_bools(&vec![true; MAX_FRAME / 4]),
        };
        assert!(matches!(encode(&big), Err(ProtocolError::FrameTooLarge { .. })));
        let mut line = vec![b' '; MAX_FRAME + 10];
        line.push(b'\n');
        let mut r = FrameReader::new(Cursor::new(line));
        assert!(matches!(
            r.read(),
            Err(ProtocolError::Decode(DecodeError {
                kind: DecodeErrorKind::TooLarge,
                ..
            }))
        ));
    }
}
