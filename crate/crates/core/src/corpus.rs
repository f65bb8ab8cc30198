//! Conversation data model and JSON Lines dataset ingestion.
//!
//! A conversation is an alternating sequence of user and system turns that
//! always opens with the user. System turns may carry a slate of recommended
//! item ids.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    System,
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speaker::User => f.write_str("User"),
            Speaker::System => f.write_str("System"),
        }
    }
}

/// Where a conversation came from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Human,
    Simulated,
    #[default]
    Unknown,
}

impl Source {
    fn is_unknown(&self) -> bool {
        matches!(self, Source::Unknown)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recommendations: Option<Vec<String>>,
}

impl Turn {
    pub fn user(text: impl Into<String>) -> Self {
        Turn {
            speaker: Speaker::User,
            text: text.into(),
            recommendations: None,
        }
    }

    pub fn system(text: impl Into<String>) -> Self {
        Turn {
            speaker: Speaker::System,
            text: text.into(),
            recommendations: None,
        }
    }

    pub fn with_slate<I, S>(mut self, items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.recommendations = Some(items.into_iter().map(Into::into).collect());
        self
    }

    /// Number of recommended items; zero when the turn carries no slate.
    pub fn slate_len(&self) -> usize {
        self.recommendations.as_ref().map_or(0, Vec::len)
    }
}

/// One line of a dataset file, decoded but not yet validated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversationRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Source::is_unknown")]
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_version: Option<String>,
    #[serde(default)]
    pub turns: Vec<Turn>,
}

/// A single broken invariant in a conversation record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MissingId,
    NoTurns,
    FirstTurnNotUser,
    NonAlternating { turn: usize, speaker: Speaker },
    EmptyText { turn: usize },
    RecommendationsOnUserTurn { turn: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingId => f.write_str("missing conversation id"),
            Violation::NoTurns => f.write_str("conversation has no turns"),
            Violation::FirstTurnNotUser => f.write_str("conversation must begin with a User turn"),
            Violation::NonAlternating { turn, speaker } => write!(
                f,
                "turn {turn}: non-alternating speakers ({speaker} follows {speaker})"
            ),
            Violation::EmptyText { turn } => write!(f, "turn {turn}: empty turn text"),
            Violation::RecommendationsOnUserTurn { turn } => {
                write!(f, "turn {turn}: recommendations on a User turn")
            }
        }
    }
}

/// Every violation found in one record.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}", join_violations(.0))]
pub struct Violations(pub Vec<Violation>);

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: line {line}: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{path}: line {line}: duplicate conversation id '{id}'")]
    DuplicateId {
        path: String,
        line: usize,
        id: String,
    },
}

/// A validated conversation. Immutable once constructed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ConversationRecord", into = "ConversationRecord")]
pub struct Conversation {
    id: String,
    source: Source,
    generator_version: Option<String>,
    turns: Vec<Turn>,
}

impl Conversation {
    pub fn new(
        id: impl Into<String>,
        source: Source,
        generator_version: Option<String>,
        turns: Vec<Turn>,
    ) -> Result<Self, Violations> {
        validate_conversation(ConversationRecord {
            id: Some(id.into()),
            source,
            generator_version,
            turns,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn generator_version(&self) -> Option<&str> {
        self.generator_version.as_deref()
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn to_record(&self) -> ConversationRecord {
        self.clone().into()
    }
}

impl TryFrom<ConversationRecord> for Conversation {
    type Error = Violations;

    fn try_from(record: ConversationRecord) -> Result<Self, Self::Error> {
        validate_conversation(record)
    }
}

impl From<Conversation> for ConversationRecord {
    fn from(c: Conversation) -> Self {
        ConversationRecord {
            id: Some(c.id),
            source: c.source,
            generator_version: c.generator_version,
            turns: c.turns,
        }
    }
}

/// Checks every invariant of a decoded record and reports all violations,
/// not just the first.
pub fn validate_conversation(record: ConversationRecord) -> Result<Conversation, Violations> {
    let mut violations = Vec::new();

    let id = record.id.filter(|id| !id.trim().is_empty());
    if id.is_none() {
        violations.push(Violation::MissingId);
    }
    if record.turns.is_empty() {
        violations.push(Violation::NoTurns);
    }
    if let Some(first) = record.turns.first() {
        if first.speaker != Speaker::User {
            violations.push(Violation::FirstTurnNotUser);
        }
    }
    for (i, turn) in record.turns.iter().enumerate() {
        if i > 0 && record.turns[i - 1].speaker == turn.speaker {
            violations.push(Violation::NonAlternating {
                turn: i,
                speaker: turn.speaker,
            });
        }
        if turn.text.trim().is_empty() {
            violations.push(Violation::EmptyText { turn: i });
        }
        if turn.speaker == Speaker::User && turn.slate_len() > 0 {
            violations.push(Violation::RecommendationsOnUserTurn { turn: i });
        }
    }

    match id {
        Some(id) if violations.is_empty() => Ok(Conversation {
            id,
            source: record.source,
            generator_version: record.generator_version,
            turns: record.turns,
        }),
        _ => Err(Violations(violations)),
    }
}

/// Which turns contribute to a session's text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnScope {
    UserOnly,
    SystemOnly,
    #[default]
    All,
}

impl TurnScope {
    fn admits(self, speaker: Speaker) -> bool {
        match self {
            TurnScope::UserOnly => speaker == Speaker::User,
            TurnScope::SystemOnly => speaker == Speaker::System,
            TurnScope::All => true,
        }
    }
}

/// Texts of the selected turns, in order, joined by a single newline.
pub fn session_text(conversation: &Conversation, scope: TurnScope) -> String {
    conversation
        .turns
        .iter()
        .filter(|t| scope.admits(t.speaker))
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    conversations: Vec<Conversation>,
    source_path: String,
}

impl Dataset {
    /// Builds a dataset, rejecting duplicate ids.
    pub fn new(
        conversations: Vec<Conversation>,
        source_path: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let source_path = source_path.into();
        let mut seen = HashSet::new();
        for (i, c) in conversations.iter().enumerate() {
            if !seen.insert(c.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    path: source_path,
                    line: i + 1,
                    id: c.id.clone(),
                });
            }
        }
        Ok(Dataset {
            conversations,
            source_path,
        })
    }

    pub fn conversations(&self) -> &[Conversation] {
        &self.conversations
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn len(&self) -> usize {
        self.conversations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conversations.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Conversation> {
        self.conversations.iter().find(|c| c.id == id)
    }

    /// Keeps only conversations accepted by `keep`, preserving order.
    pub fn filtered(&self, mut keep: impl FnMut(&Conversation) -> bool) -> Dataset {
        Dataset {
            conversations: self
                .conversations
                .iter()
                .filter(|c| keep(c))
                .cloned()
                .collect(),
            source_path: self.source_path.clone(),
        }
    }

    /// Writes one JSON record per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for c in &self.conversations {
            serde_json::to_writer(&mut out, c)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Downgrade malformed lines to warnings. Duplicate ids stay fatal.
    pub skip_invalid: bool,
}

#[derive(Debug)]
pub struct Parsed {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

/// Parses a JSON Lines stream. Blank lines are ignored; every other line
/// must hold one conversation record.
pub fn parse_dataset<R: BufRead>(
    mut input: R,
    source_path: &str,
    options: ParseOptions,
) -> Result<Parsed, CorpusError> {
    let mut conversations = Vec::new();
    let mut warnings = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut buf = Vec::new();
    let mut line_no = 0usize;

    loop {
        buf.clear();
        let n = input
            .read_until(b'\n', &mut buf)
            .map_err(|source| CorpusError::Io {
                path: source_path.to_string(),
                source,
            })?;
        if n == 0 {
            break;
        }
        line_no += 1;

        let decoded = std::str::from_utf8(&buf)
            .map_err(|_| "invalid UTF-8".to_string())
            .and_then(|line| {
                if line.trim().is_empty() {
                    Ok(None)
                } else {
                    decode_line(line).map(Some)
                }
            });

        let conversation = match decoded {
            Ok(None) => continue,
            Ok(Some(c)) => c,
            Err(reason) if options.skip_invalid => {
                warnings.push(format!("{source_path}: line {line_no}: {reason} (skipped)"));
                continue;
            }
            Err(reason) => {
                return Err(CorpusError::Malformed {
                    path: source_path.to_string(),
                    line: line_no,
                    reason,
                })
            }
        };

        if !seen.insert(conversation.id.clone()) {
            return Err(CorpusError::DuplicateId {
                path: source_path.to_string(),
                line: line_no,
                id: conversation.id,
            });
        }
        conversations.push(conversation);
    }

    Ok(Parsed {
        dataset: Dataset {
            conversations,
            source_path: source_path.to_string(),
        },
        warnings,
    })
}

fn decode_line(line: &str) -> Result<Conversation, String> {
    let record: ConversationRecord =
        serde_json::from_str(line).map_err(|e| format!("invalid record: {e}"))?;
    validate_conversation(record).map_err(|v| v.to_string())
}

pub fn load_dataset(path: &Path, options: ParseOptions) -> Result<Parsed, CorpusError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: display.clone(),
        source,
    })?;
    parse_dataset(BufReader::new(file), &display, options)
}

pub fn write_dataset(dataset: &Dataset, path: &Path) -> io::Result<()> {
    let file = File::create(path)?;
    let mut out = io::BufWriter::new(file);
    dataset.write_jsonl(&mut out)?;
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Parsed, CorpusError> {
        parse_dataset(text.as_bytes(), "mem", ParseOptions::default())
    }

    const VALID: &str = r#"{"id":"c1","source":"human","turns":[{"speaker":"user","text":"hi"},{"speaker":"system","text":"hello","recommendations":["m1","m2"]}]}"#;

    #[test]
    fn parses_records_in_file_order() {
        let text = format!(
            "{}\n{}\n\n{}\n",
            VALID,
            VALID.replace("c1", "c2"),
            VALID.replace("c1", "c3")
        );
        let parsed = parse(&text).unwrap();
        let ids: Vec<_> = parsed
            .dataset
            .conversations()
            .iter()
            .map(|c| c.id())
            .collect();
        assert_eq!(ids, ["c1", "c2", "c3"]);
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn empty_input_is_an_empty_dataset() {
        assert!(parse("").unwrap().dataset.is_empty());
        assert!(parse("\n  \n").unwrap().dataset.is_empty());
    }

    #[test]
    fn system_first_reports_line_number() {
        let bad = r#"{"id":"c2","turns":[{"speaker":"system","text":"hi"},{"speaker":"user","text":"yo"}]}"#;
        let err = parse(&format!("{VALID}\n{bad}\n")).unwrap_err();
        assert_eq!(
            err.to_string(),
            "mem: line 2: conversation must begin with a User turn"
        );
    }

    #[test]
    fn skip_invalid_downgrades_to_warning() {
        let text = format!("{VALID}\nnot json\n");
        let parsed =
            parse_dataset(text.as_bytes(), "mem", ParseOptions { skip_invalid: true }).unwrap();
        assert_eq!(parsed.dataset.len(), 1);
        assert_eq!(parsed.warnings.len(), 1);
        assert!(parsed.warnings[0].contains("line 2"));
    }

    #[test]
    fn duplicate_ids_are_fatal_even_when_skipping() {
        let text = format!("{VALID}\n{VALID}\n");
        let err =
            parse_dataset(text.as_bytes(), "mem", ParseOptions { skip_invalid: true }).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { line: 2, .. }));
    }

    #[test]
    fn invalid_utf8_is_malformed() {
        let mut bytes = VALID.as_bytes().to_vec();
        bytes.extend_from_slice(b"\n\xff\xfe\n");
        let err = parse_dataset(&bytes[..], "mem", ParseOptions::default()).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }));
    }

    #[test]
    fn unknown_source_value_is_rejected() {
        let bad = VALID.replace("\"human\"", "\"robot\"");
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn validate_accepts_simple_exchange() {
        let c = Conversation::new(
            "c",
            Source::Unknown,
            None,
            vec![
                Turn::user("hi"),
                Turn::system("hello").with_slate(["m1", "m2"]),
            ],
        )
        .unwrap();
        assert_eq!(c.turns().len(), 2);
    }

    #[test]
    fn validate_rejects_non_alternating() {
        let err = Conversation::new(
            "c",
            Source::Unknown,
            None,
            vec![Turn::user("hi"), Turn::user("hello?")],
        )
        .unwrap_err();
        assert_eq!(
            err.0,
            vec![Violation::NonAlternating {
                turn: 1,
                speaker: Speaker::User
            }]
        );
    }

    #[test]
    fn validate_rejects_empty_text() {
        let err = Conversation::new(
            "c",
            Source::Unknown,
            None,
            vec![Turn::user("  "), Turn::system("hi")],
        )
        .unwrap_err();
        assert_eq!(err.0, vec![Violation::EmptyText { turn: 0 }]);
    }

    #[test]
    fn validate_reports_every_violation() {
        let record = ConversationRecord {
            id: None,
            source: Source::Unknown,
            generator_version: None,
            turns: vec![
                Turn::system(""),
                Turn::system("x"),
                Turn::user("u").with_slate(["m"]),
            ],
        };
        let err = validate_conversation(record).unwrap_err();
        assert_eq!(
            err.0,
            vec![
                Violation::MissingId,
                Violation::FirstTurnNotUser,
                Violation::EmptyText { turn: 0 },
                Violation::NonAlternating {
                    turn: 1,
                    speaker: Speaker::System
                },
                Violation::RecommendationsOnUserTurn { turn: 2 },
            ]
        );
    }

    #[test]
    fn empty_slate_on_user_turn_is_allowed() {
        assert!(Conversation::new(
            "c",
            Source::Unknown,
            None,
            vec![Turn::user("u").with_slate(Vec::<String>::new())],
        )
        .is_ok());
    }

    #[test]
    fn session_text_filters_and_joins() {
        let c = Conversation::new(
            "c",
            Source::Unknown,
            None,
            vec![Turn::user("I like sci-fi"), Turn::system("Try Dune")],
        )
        .unwrap();
        assert_eq!(session_text(&c, TurnScope::UserOnly), "I like sci-fi");
        assert_eq!(session_text(&c, TurnScope::All), "I like sci-fi\nTry Dune");
        assert_eq!(session_text(&c, TurnScope::SystemOnly), "Try Dune");

        let c = Conversation::new(
            "c",
            Source::Unknown,
            None,
            vec![Turn::user("a"), Turn::system("b"), Turn::user("c")],
        )
        .unwrap();
        assert_eq!(session_text(&c, TurnScope::UserOnly), "a\nc");
    }

    #[test]
    fn session_text_with_no_matching_turns_is_empty() {
        let c = Conversation::new("c", Source::Unknown, None, vec![Turn::user("a")]).unwrap();
        assert_eq!(session_text(&c, TurnScope::SystemOnly), "");
    }
}
