//! Bundestag plenary protocols: XML → session text → one record per speech.
//!
//! Two layouts are understood. The archive layout (legislative periods 1-18)
//! keeps the whole discussion in a `<TEXT>` element next to `<DATUM>` and
//! `<NR>`; the structured layout (period 19 onwards) has a
//! `<dbtplenarprotokoll>` root with a `sitzung-datum` attribute and the
//! discussion inside `<sitzungsverlauf>`. Element names are matched
//! case-insensitively and each field has fallbacks, since the layout drifted
//! over the decades.

use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use chrono::NaiveDate;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use rayon::prelude::*;
use regex::Regex;

use crate::corpus::{tokenize, CorpusRecord, Document, TokenizeRules, DATE_FORMAT};
use crate::error::{Error, Result};

pub const DEFAULT_RULESET: &str = include_str!("../data/speaker_rules.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionRecord {
    pub session_id: String,
    pub date: NaiveDate,
    pub body: String,
}

// Subtrees that never contribute to the body: registers, attachments and
// the structured speaker element (its name is repeated in the header line).
const EXCLUDED: &[&str] = &[
    "anlagen",
    "anlage",
    "anlagen-text",
    "vorspann",
    "nachspann",
    "rednerliste",
    "inhaltsverzeichnis",
    "ivz-block",
    "redner",
];
const BODY: &[&str] = &["text", "sitzungsverlauf"];

// Archive-layout bodies start with a table of contents and end with
// attachments; both are plain text inside <TEXT>.
static SESSION_OPENING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^[ \t]*(?:Beginn:?[ \t]*\d|Die Sitzung wird um\b)").unwrap());
static ATTACHMENTS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?m)^[ \t]*(?:Anlagen?[ \t]+(?:\d+[ \t]+)?zum[ \t]+(?:Stenographischen[ \t]+Bericht|Plenarprotokoll)|Anlage[ \t]+\d+[ \t]*$)")
        .unwrap()
});

fn parse_protocol_date(value: &str) -> Option<NaiveDate> {
    let value = value.trim();
    NaiveDate::parse_from_str(value, "%d.%m.%Y")
        .or_else(|_| NaiveDate::parse_from_str(value, DATE_FORMAT))
        .ok()
}

fn local_name(e: &BytesStart<'_>) -> String {
    String::from_utf8_lossy(e.local_name().as_ref()).to_lowercase()
}

#[derive(Default)]
struct Metadata {
    date_text: Option<String>,
    date_attr: Option<String>,
    number: Option<String>,
    period: Option<String>,
    session: Option<String>,
}

impl Metadata {
    fn read_attributes(&mut self, e: &BytesStart<'_>, name: &str) {
        for attr in e.attributes().flatten() {
            let key = String::from_utf8_lossy(attr.key.local_name().as_ref()).to_lowercase();
            let Ok(value) = attr.unescape_value() else {
                continue;
            };
            let value = value.trim().to_string();
            match key.as_str() {
                "sitzung-datum" => {
                    self.date_attr.get_or_insert(value);
                }
                "date" if name == "datum" => {
                    self.date_attr.get_or_insert(value);
                }
                "wahlperiode" => {
                    self.period.get_or_insert(value);
                }
                "sitzung-nr" => {
                    self.session.get_or_insert(value);
                }
                _ => {}
            }
        }
    }

    fn session_id(&self, date: NaiveDate) -> String {
        let numeric = |s: &Option<String>| s.as_deref().and_then(|v| v.trim().parse::<u32>().ok());
        if let (Some(p), Some(s)) = (numeric(&self.period), numeric(&self.session)) {
            return format!("{p}/{s}");
        }
        if let Some(nr) = &self.number {
            let parts: Vec<Option<u32>> = nr.split('/').map(|p| p.trim().parse().ok()).collect();
            if let [Some(p), Some(s)] = parts[..] {
                return format!("{p}/{s}");
            }
            if !nr.trim().is_empty() {
                return nr.trim().to_string();
            }
        }
        date.format(DATE_FORMAT).to_string()
    }
}

/// Extracts date and discussion text from one protocol file.
pub fn parse_protocol_xml(bytes: &[u8]) -> Result<SessionRecord> {
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().check_end_names = true;

    let mut meta = Metadata::default();
    let mut stack: Vec<String> = Vec::new();
    let mut body = String::new();
    let mut body_depth: Option<usize> = None;
    let mut excluded_depth: Option<usize> = None;
    let mut found_body = false;
    let mut buf = Vec::new();

    let xml_err = |reader: &Reader<&[u8]>, e: quick_xml::Error| Error::Xml {
        offset: reader.error_position(),
        reason: e.to_string(),
    };

    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| xml_err(&reader, e))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                let name = local_name(e);
                meta.read_attributes(e, &name);
                if body_depth.is_some() {
                    body.push('\n');
                }
                if !is_empty {
                    stack.push(name.clone());
                    let depth = stack.len();
                    if excluded_depth.is_none() && EXCLUDED.contains(&name.as_str()) {
                        excluded_depth = Some(depth);
                    } else if body_depth.is_none()
                        && excluded_depth.is_none()
                        && BODY.contains(&name.as_str())
                    {
                        body_depth = Some(depth);
                        found_body = true;
                    }
                }
            }
            Event::End(_) => {
                let depth = stack.len();
                if excluded_depth == Some(depth) {
                    excluded_depth = None;
                }
                if body_depth == Some(depth) {
                    body_depth = None;
                    body.push('\n');
                } else if body_depth.is_some() {
                    body.push('\n');
                }
                stack.pop();
            }
            Event::Text(ref t) => {
                let text = t.unescape().map_err(|e| xml_err(&reader, e))?;
                capture(
                    &mut meta,
                    &stack,
                    &text,
                    body_depth,
                    excluded_depth,
                    &mut body,
                );
            }
            Event::CData(ref t) => {
                let text = String::from_utf8_lossy(t.as_ref()).into_owned();
                capture(
                    &mut meta,
                    &stack,
                    &text,
                    body_depth,
                    excluded_depth,
                    &mut body,
                );
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if let Some(open) = stack.last() {
        return Err(Error::Xml {
            offset: reader.buffer_position(),
            reason: format!("unexpected end of input inside <{open}>"),
        });
    }

    // Element text may be a long-form date ("Dienstag, den 24. Oktober
    // 2017") next to a machine-readable attribute, so take the first
    // candidate that parses.
    let candidates: Vec<&String> = [&meta.date_text, &meta.date_attr]
        .into_iter()
        .flatten()
        .collect();
    let first = candidates
        .first()
        .ok_or_else(|| Error::Schema("missing date element".into()))?;
    let date = candidates
        .iter()
        .find_map(|c| parse_protocol_date(c))
        .ok_or_else(|| Error::Schema(format!("unparseable session date {first:?}")))?;
    if !found_body {
        return Err(Error::Schema("missing discussion text element".into()));
    }
    let body = trim_registers_and_attachments(&tidy_lines(&body));
    if body.trim().is_empty() {
        return Err(Error::Schema("discussion text is empty".into()));
    }
    Ok(SessionRecord {
        session_id: meta.session_id(date),
        date,
        body,
    })
}

fn capture(
    meta: &mut Metadata,
    stack: &[String],
    text: &str,
    body_depth: Option<usize>,
    excluded_depth: Option<usize>,
    body: &mut String,
) {
    match stack.last().map(String::as_str) {
        Some("datum") if meta.date_text.is_none() && !text.trim().is_empty() => {
            meta.date_text = Some(text.trim().to_string())
        }
        Some("nr") if meta.number.is_none() => meta.number = Some(text.trim().to_string()),
        Some("wahlperiode") if meta.period.is_none() => meta.period = Some(text.trim().to_string()),
        Some("sitzungsnr") if meta.session.is_none() => {
            meta.session = Some(text.trim().to_string())
        }
        _ => {}
    }
    if body_depth.is_some() && excluded_depth.is_none() {
        body.push_str(text);
    }
}

fn tidy_lines(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text
        .lines()
        .map(str::trim_end)
        .filter(|l| !l.trim().is_empty())
    {
        out.push_str(line);
        out.push('\n');
    }
    out
}

fn trim_registers_and_attachments(body: &str) -> String {
    let start = SESSION_OPENING.find(body).map_or(0, |m| m.start());
    let rest = &body[start..];
    let end = ATTACHMENTS.find(rest).map_or(rest.len(), |m| m.start());
    rest[..end].to_string()
}

/// Removes parenthesized interjections (applause, heckling, stage notes)
/// and normalizes whitespace to single spaces.
///
/// Balanced spans are removed whole, including nested ones. An opener with
/// no matching closer is removed together with the rest of its line.
pub fn strip_noncontent(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut remove = vec![false; chars.len()];
    let mut open: Vec<usize> = Vec::new();
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for (i, &c) in chars.iter().enumerate() {
        match c {
            '(' => open.push(i),
            ')' => {
                if let Some(start) = open.pop() {
                    spans.push((start, i + 1));
                }
            }
            _ => {}
        }
    }
    for start in open {
        let end = chars[start..]
            .iter()
            .position(|&c| c == '\n')
            .map_or(chars.len(), |p| start + p);
        spans.push((start, end));
    }
    for (start, end) in spans {
        remove[start..end].iter_mut().for_each(|r| *r = true);
    }
    let kept: String = chars
        .iter()
        .zip(&remove)
        .filter(|(_, &r)| !r)
        .map(|(&c, _)| c)
        .collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Speaker-header patterns; every match opens a new speech.
#[derive(Debug, Clone)]
pub struct SpeechRules {
    patterns: Vec<Regex>,
}

impl SpeechRules {
    /// One pattern per line; blank lines and lines starting with `#` are
    /// skipped. Patterns are compiled in multi-line mode.
    pub fn parse(text: &str) -> Result<Self> {
        let mut patterns = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let pattern = line.trim();
            if pattern.is_empty() || pattern.starts_with('#') {
                continue;
            }
            let re = Regex::new(&format!("(?m){pattern}")).map_err(|e| Error::Ruleset {
                line: i + 1,
                pattern: pattern.to_string(),
                reason: e.to_string(),
            })?;
            patterns.push(re);
        }
        if patterns.is_empty() {
            return Err(Error::EmptyRuleset);
        }
        Ok(SpeechRules { patterns })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io("ingest::load_ruleset", path, e))?;
        Self::parse(&text)
    }

    /// Non-overlapping header spans in text order. On overlap the earliest
    /// start wins, then the longest match.
    fn headers(&self, body: &str) -> Vec<(usize, usize)> {
        let mut all: Vec<(usize, usize)> = self
            .patterns
            .iter()
            .flat_map(|re| re.find_iter(body).map(|m| (m.start(), m.end())))
            .filter(|(s, e)| e > s)
            .collect();
        all.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        let mut out: Vec<(usize, usize)> = Vec::new();
        for span in all {
            if out.last().is_none_or(|last| span.0 >= last.1) {
                out.push(span);
            }
        }
        out
    }
}

impl Default for SpeechRules {
    fn default() -> Self {
        SpeechRules::parse(DEFAULT_RULESET).expect("bundled ruleset compiles")
    }
}

/// One speech with interjections removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Speech {
    pub id: String,
    pub date: NaiveDate,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct SpeechSplit {
    pub speeches: Vec<Speech>,
    pub warnings: Vec<String>,
}

impl SpeechSplit {
    pub fn into_records(self) -> Vec<CorpusRecord> {
        self.speeches
            .into_iter()
            .map(|s| CorpusRecord {
                id: s.id,
                date: s.date.format(DATE_FORMAT).to_string(),
                text: s.text,
            })
            .collect()
    }
}

/// Splits a session body at speaker headers. Text before the first header
/// (agenda, opening notes) is not a speech and is dropped. Speech ids are
/// `session_id#k` with `k` counting from 1.
pub fn split_speech_texts(session: &SessionRecord, rules: &SpeechRules) -> SpeechSplit {
    let headers = rules.headers(&session.body);
    let mut warnings = Vec::new();
    let texts: Vec<&str> = if headers.is_empty() {
        warnings.push(format!(
            "session {}: no speaker header matched, keeping the whole body as one document",
            session.session_id
        ));
        vec![session.body.as_str()]
    } else {
        headers
            .iter()
            .enumerate()
            .map(|(i, &(_, end))| {
                let next = headers.get(i + 1).map_or(session.body.len(), |h| h.0);
                &session.body[end..next]
            })
            .collect()
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    let speeches = texts
        .into_iter()
        .enumerate()
        .map(|(k, text)| Speech {
            id: format!("{}#{}", session.session_id, k + 1),
            date: session.date,
            text: strip_noncontent(text),
        })
        .collect();
    SpeechSplit { speeches, warnings }
}

pub fn split_speeches(
    session: &SessionRecord,
    rules: &SpeechRules,
    tokenize_rules: &TokenizeRules,
) -> (Vec<Document>, Vec<String>) {
    let split = split_speech_texts(session, rules);
    let docs = split
        .speeches
        .into_iter()
        .map(|s| Document {
            tokens: tokenize(&s.text, tokenize_rules),
            id: s.id,
            date: s.date,
        })
        .collect();
    (docs, split.warnings)
}

/// Protocol files named by `paths`; directories contribute their `.xml`
/// files in name order.
pub fn protocol_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(path)
                .map_err(|e| Error::io("ingest::protocol_files", path, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("xml")))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(path.clone());
        }
    }
    Ok(files)
}

/// Outcome of ingesting a batch of protocol files.
#[derive(Debug, Default)]
pub struct IngestReport {
    pub records: Vec<CorpusRecord>,
    pub warnings: Vec<String>,
    /// Files that failed to parse, when failures are not fatal.
    pub failures: Vec<Error>,
}

/// Parses and splits every file. With `keep_going`, unreadable or malformed
/// files are collected in `failures`; otherwise the first one aborts.
pub fn ingest_files(
    files: &[PathBuf],
    rules: &SpeechRules,
    keep_going: bool,
) -> Result<IngestReport> {
    let parsed: Vec<(PathBuf, Result<SessionRecord>)> = files
        .par_iter()
        .map(|path| {
            let session = std::fs::read(path)
                .map_err(|e| Error::io("ingest::ingest_files", path, e))
                .and_then(|bytes| parse_protocol_xml(&bytes))
                .map_err(|e| Error::Protocol {
                    path: path.clone(),
                    source: Box::new(e),
                });
            (path.clone(), session)
        })
        .collect();
    let mut report = IngestReport::default();
    for (path, session) in parsed {
        match session {
            Ok(session) => {
                let split = split_speech_texts(&session, rules);
                report.warnings.extend(
                    split
                        .warnings
                        .iter()
                        .map(|w| format!("{}: {w}", path.display())),
                );
                report.records.extend(split.into_records());
            }
            Err(e) if keep_going => report.failures.push(e),
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}
