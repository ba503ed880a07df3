//! Git conflict-marker parsing (with optional diff3 base sections) and
//! re-rendering of resolved files.
//!
//! A marker line starts at column 0 with exactly seven of `<`, `|`, `=` or
//! `>` followed by the end of the line or by a single space and a label.
//! Anything else, including eight marker characters or an indented marker,
//! is ordinary content.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunk::ConflictChunk;
use crate::corpus::{ConflictRecord, Language};

const MARKER_LEN: usize = 7;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unbalanced conflict markers at line {line}: {detail}")]
    UnbalancedMarkers { line: usize, detail: String },
    #[error("nested conflict marker at line {line}")]
    NestedMarkers { line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("expected {expected} chunk resolutions, got {actual}")]
pub struct ArityMismatch {
    pub expected: usize,
    pub actual: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LineEnding {
    #[default]
    Lf,
    CrLf,
    /// Final line of a file without a terminator.
    None,
}

impl LineEnding {
    pub fn as_str(self) -> &'static str {
        match self {
            LineEnding::Lf => "\n",
            LineEnding::CrLf => "\r\n",
            LineEnding::None => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    pub text: String,
    pub ending: LineEnding,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Marker {
    /// Text after the single space, `None` for a bare marker.
    pub label: Option<String>,
    pub ending: LineEnding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MarkerKind {
    Start,
    Base,
    Separator,
    End,
}

impl MarkerKind {
    fn symbol(self) -> char {
        match self {
            MarkerKind::Start => '<',
            MarkerKind::Base => '|',
            MarkerKind::Separator => '=',
            MarkerKind::End => '>',
        }
    }
}

/// One `<<<<<<< ... >>>>>>>` block as it appears in the source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkBlock {
    /// 1-based line number of the opening marker.
    pub start_line: usize,
    pub start: Marker,
    pub v1: Vec<Line>,
    /// Present iff the block has a `|||||||` section.
    pub base: Option<(Marker, Vec<Line>)>,
    pub separator: Marker,
    pub v2: Vec<Line>,
    pub end: Marker,
}

fn texts(lines: &[Line]) -> Vec<String> {
    lines.iter().map(|l| l.text.clone()).collect()
}

impl ChunkBlock {
    pub fn v1_label(&self) -> Option<&str> {
        self.start.label.as_deref()
    }

    pub fn v2_label(&self) -> Option<&str> {
        self.end.label.as_deref()
    }

    pub fn base_label(&self) -> Option<&str> {
        self.base.as_ref().and_then(|(m, _)| m.label.as_deref())
    }

    /// Line ending of the opening marker line.
    pub fn line_ending(&self) -> LineEnding {
        self.start.ending
    }

    pub fn to_chunk(&self) -> ConflictChunk {
        ConflictChunk {
            base: self.base.as_ref().map(|(_, lines)| texts(lines)),
            v1: texts(&self.v1),
            v2: texts(&self.v2),
        }
    }

    fn render_into(&self, out: &mut String) {
        let marker = |out: &mut String, kind: MarkerKind, m: &Marker| {
            out.extend(std::iter::repeat_n(kind.symbol(), MARKER_LEN));
            if let Some(label) = &m.label {
                out.push(' ');
                out.push_str(label);
            }
            out.push_str(m.ending.as_str());
        };
        let lines = |out: &mut String, lines: &[Line]| {
            for l in lines {
                out.push_str(&l.text);
                out.push_str(l.ending.as_str());
            }
        };
        marker(out, MarkerKind::Start, &self.start);
        lines(out, &self.v1);
        if let Some((m, base)) = &self.base {
            marker(out, MarkerKind::Base, m);
            lines(out, base);
        }
        marker(out, MarkerKind::Separator, &self.separator);
        lines(out, &self.v2);
        marker(out, MarkerKind::End, &self.end);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Context(Vec<Line>),
    Chunk(ChunkBlock),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConflictedFile {
    pub segments: Vec<Segment>,
}

/// How `render_with` treats one chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChunkResolution {
    KeepMarkers,
    Lines(Vec<String>),
}

impl ConflictedFile {
    pub fn chunks(&self) -> impl Iterator<Item = &ChunkBlock> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Chunk(c) => Some(c),
            Segment::Context(_) => None,
        })
    }

    pub fn chunk_count(&self) -> usize {
        self.chunks().count()
    }

    /// Majority terminator among context lines; LF on a tie.
    pub fn dominant_line_ending(&self) -> LineEnding {
        let (mut lf, mut crlf) = (0usize, 0usize);
        for seg in &self.segments {
            if let Segment::Context(lines) = seg {
                for l in lines {
                    match l.ending {
                        LineEnding::Lf => lf += 1,
                        LineEnding::CrLf => crlf += 1,
                        LineEnding::None => {}
                    }
                }
            }
        }
        if crlf > lf {
            LineEnding::CrLf
        } else {
            LineEnding::Lf
        }
    }

    /// Reproduces the parsed text byte for byte.
    pub fn render(&self) -> String {
        let keep = vec![ChunkResolution::KeepMarkers; self.chunk_count()];
        self.render_with(&keep).expect("arity matches by construction")
    }

    pub fn render_with(&self, resolutions: &[ChunkResolution]) -> Result<String, ArityMismatch> {
        let expected = self.chunk_count();
        if resolutions.len() != expected {
            return Err(ArityMismatch {
                expected,
                actual: resolutions.len(),
            });
        }
        let eol = self.dominant_line_ending();
        let mut out = String::new();
        let mut next = resolutions.iter();
        for seg in &self.segments {
            match seg {
                Segment::Context(lines) => {
                    for l in lines {
                        out.push_str(&l.text);
                        out.push_str(l.ending.as_str());
                    }
                }
                Segment::Chunk(block) => match next.next().expect("counted above") {
                    ChunkResolution::KeepMarkers => block.render_into(&mut out),
                    ChunkResolution::Lines(lines) => {
                        let at_eof = block.end.ending == LineEnding::None;
                        for (i, line) in lines.iter().enumerate() {
                            out.push_str(line);
                            if !(at_eof && i + 1 == lines.len()) {
                                out.push_str(eol.as_str());
                            }
                        }
                    }
                },
            }
        }
        Ok(out)
    }
}

/// Replaces every chunk with its resolution lines, terminated with the
/// file's dominant line ending.
pub fn render_resolved(file: &ConflictedFile, resolutions: &[Vec<String>]) -> Result<String, ArityMismatch> {
    let res: Vec<_> = resolutions.iter().cloned().map(ChunkResolution::Lines).collect();
    file.render_with(&res)
}

fn split_lines(text: &str) -> Vec<Line> {
    let mut lines = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        match rest.find('\n') {
            Some(pos) => {
                let (body, ending) = match rest[..pos].strip_suffix('\r') {
                    Some(body) => (body, LineEnding::CrLf),
                    None => (&rest[..pos], LineEnding::Lf),
                };
                lines.push(Line {
                    text: body.to_string(),
                    ending,
                });
                rest = &rest[pos + 1..];
            }
            None => {
                lines.push(Line {
                    text: rest.to_string(),
                    ending: LineEnding::None,
                });
                rest = "";
            }
        }
    }
    lines
}

fn classify(line: &Line) -> Option<(MarkerKind, Marker)> {
    let kind = match line.text.as_bytes().first()? {
        b'<' => MarkerKind::Start,
        b'|' => MarkerKind::Base,
        b'=' => MarkerKind::Separator,
        b'>' => MarkerKind::End,
        _ => return None,
    };
    let symbol = kind.symbol() as u8;
    let bytes = line.text.as_bytes();
    if bytes.len() < MARKER_LEN || !bytes[..MARKER_LEN].iter().all(|&b| b == symbol) {
        return None;
    }
    let label = match &line.text[MARKER_LEN..] {
        "" => None,
        rest => Some(rest.strip_prefix(' ')?.to_string()),
    };
    Some((
        kind,
        Marker {
            label,
            ending: line.ending,
        },
    ))
}

enum State {
    Outside,
    V1,
    Base,
    V2,
}

struct OpenChunk {
    start_line: usize,
    start: Marker,
    v1: Vec<Line>,
    base: Option<(Marker, Vec<Line>)>,
    separator: Option<Marker>,
    v2: Vec<Line>,
}

/// Splits a conflicted file into context runs and conflict chunks.
pub fn parse_conflicted_file(text: &str) -> Result<ConflictedFile, ParseError> {
    let mut segments = Vec::new();
    let mut context: Vec<Line> = Vec::new();
    let mut open: Option<OpenChunk> = None;
    let mut state = State::Outside;

    for (idx, line) in split_lines(text).into_iter().enumerate() {
        let lineno = idx + 1;
        let unbalanced = |detail: &str| ParseError::UnbalancedMarkers {
            line: lineno,
            detail: detail.to_string(),
        };
        let marker = classify(&line);
        match (&state, marker) {
            (State::Outside, None) => context.push(line),
            (State::Outside, Some((MarkerKind::Start, m))) => {
                if !context.is_empty() {
                    segments.push(Segment::Context(std::mem::take(&mut context)));
                }
                open = Some(OpenChunk {
                    start_line: lineno,
                    start: m,
                    v1: Vec::new(),
                    base: None,
                    separator: None,
                    v2: Vec::new(),
                });
                state = State::V1;
            }
            (State::Outside, Some(_)) => return Err(unbalanced("marker outside of a conflict chunk")),
            (_, Some((MarkerKind::Start, _))) => return Err(ParseError::NestedMarkers { line: lineno }),
            (State::V1, None) => open.as_mut().expect("open chunk").v1.push(line),
            (State::V1, Some((MarkerKind::Base, m))) => {
                open.as_mut().expect("open chunk").base = Some((m, Vec::new()));
                state = State::Base;
            }
            (State::Base, None) => {
                let chunk = open.as_mut().expect("open chunk");
                chunk.base.as_mut().expect("base section").1.push(line);
            }
            (State::V1 | State::Base, Some((MarkerKind::Separator, m))) => {
                open.as_mut().expect("open chunk").separator = Some(m);
                state = State::V2;
            }
            (State::V1 | State::Base, Some((MarkerKind::End, _))) => {
                return Err(unbalanced("closing marker before separator"))
            }
            (State::Base, Some((MarkerKind::Base, _))) => return Err(unbalanced("repeated base marker")),
            (State::V2, None) => open.as_mut().expect("open chunk").v2.push(line),
            (State::V2, Some((MarkerKind::End, m))) => {
                let c = open.take().expect("open chunk");
                segments.push(Segment::Chunk(ChunkBlock {
                    start_line: c.start_line,
                    start: c.start,
                    v1: c.v1,
                    base: c.base,
                    separator: c.separator.expect("separator seen"),
                    v2: c.v2,
                    end: m,
                }));
                state = State::Outside;
            }
            (State::V2, Some(_)) => return Err(unbalanced("base or separator marker after separator")),
        }
    }

    if let Some(c) = open {
        return Err(ParseError::UnbalancedMarkers {
            line: c.start_line,
            detail: "conflict chunk is never closed".to_string(),
        });
    }
    if !context.is_empty() {
        segments.push(Segment::Context(context));
    }
    Ok(ConflictedFile { segments })
}

/// Turns every chunk of a parsed file into a corpus record with an empty
/// resolution. Ids are `<path>#<n>` with `n` counting from 1.
pub fn extract_records(file: &ConflictedFile, path: &str, project: &str, commit: &str, language: Language) -> Vec<ConflictRecord> {
    file.chunks()
        .enumerate()
        .map(|(i, block)| {
            let chunk = block.to_chunk();
            ConflictRecord {
                id: format!("{path}#{}", i + 1),
                project: project.to_string(),
                commit_hash: commit.to_string(),
                file_path: path.to_string(),
                language,
                base_lines: chunk.base,
                v1_lines: chunk.v1,
                v2_lines: chunk.v2,
                resolution_lines: Vec::new(),
            }
        })
        .collect()
}
