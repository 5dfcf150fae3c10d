//! Resolving proposed duplicate pairs from the command line.
//!
//! Answers are line-oriented, the same at the prompt and in an answers file:
//!
//! ```text
//! a              keep the first row of the pair
//! b city,zip     keep the second row, copying city and zip from the first
//! s              skip this pair
//! u              undo the last decision
//! q              stop; remaining pairs stay undecided
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::io::{BufRead, Write};

use fdscope_core::scenario::dedup::{DedupSession, DuplicatePair};
use fdscope_core::{AttrSet, Relation};

use crate::args::AutoMode;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Answer {
    Keep { second: bool, copy: Vec<String> },
    Skip,
    Undo,
    Quit,
}

pub fn parse_answer(line: &str) -> Result<Option<Answer>, String> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    let copy: Vec<String> = rest
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect();
    let answer = match head.to_ascii_lowercase().as_str() {
        "a" | "1" | "first" => Answer::Keep { second: false, copy },
        "b" | "2" | "second" => Answer::Keep { second: true, copy },
        "s" | "skip" => Answer::Skip,
        "u" | "undo" => Answer::Undo,
        "q" | "quit" => Answer::Quit,
        other => return Err(format!("unrecognised answer `{other}`; expected a, b, s, u or q")),
    };
    if !rest.trim().is_empty() && !matches!(answer, Answer::Keep { .. }) {
        return Err(format!("`{head}` takes no attributes"));
    }
    Ok(Some(answer))
}

/// Parses a whole answers file up front; errors carry line numbers.
pub fn parse_answers(text: &str) -> Result<Vec<(usize, Answer)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        match parse_answer(line) {
            Ok(Some(a)) => out.push((i + 1, a)),
            Ok(None) => {}
            Err(e) => return Err(format!("line {}: {e}", i + 1)),
        }
    }
    Ok(out)
}

pub enum Source<'a> {
    Auto(AutoMode),
    Script(std::vec::IntoIter<(usize, Answer)>),
    Prompt {
        input: Box<dyn BufRead + 'a>,
        output: Box<dyn Write + 'a>,
    },
}

fn describe(relation: &Relation, pair: &DuplicatePair) -> String {
    let names = relation.attribute_names();
    let width = names.iter().map(|n| n.chars().count()).max().unwrap_or(0);
    let row = |origin: u32, attr: usize| {
        relation
            .position_of(origin)
            .and_then(|pos| relation.token(pos, attr))
            .unwrap_or("")
            .to_owned()
    };
    let mut s = format!(
        "pair {} ~ {} ({} of {} attributes match)\n",
        pair.row_a,
        pair.row_b,
        pair.match_count,
        names.len()
    );
    for (attr, name) in names.iter().enumerate() {
        let mark = if pair.matched_attrs.contains(&attr) { ' ' } else { '!' };
        s.push_str(&format!(
            "  {mark} {name:width$}  a: {}\n  {:width$}     b: {}\n",
            row(pair.row_a, attr),
            "",
            row(pair.row_b, attr),
        ));
    }
    s
}

fn copy_set(relation: &Relation, names: &[String]) -> Result<AttrSet, String> {
    names
        .iter()
        .map(|n| relation.resolve_attribute(n).map_err(|e| e.to_string()))
        .collect()
}

/// Applies one answer. `Ok(false)` means stop.
fn apply(session: &mut DedupSession, relation: &Relation, pair: &DuplicatePair, answer: &Answer) -> Result<bool, String> {
    match answer {
        Answer::Keep { second, copy } => {
            let keep = if *second { pair.row_b } else { pair.row_a };
            let copy = copy_set(relation, copy)?;
            session
                .decide_pair(pair.row_a, pair.row_b, keep, copy)
                .map_err(|e| e.to_string())?;
        }
        Answer::Skip => session.skip(pair.row_a, pair.row_b).map_err(|e| e.to_string())?,
        Answer::Undo => {
            session.undo().ok_or("nothing to undo")?;
        }
        Answer::Quit => return Ok(false),
    }
    Ok(true)
}

/// Walks the proposals of `session` until none are left or the source stops.
pub fn resolve(session: &mut DedupSession, relation: &Relation, source: Source<'_>) -> Result<(), String> {
    match source {
        Source::Auto(mode) => {
            while let Some(pair) = session.proposal().cloned() {
                let answer = match mode {
                    AutoMode::KeepFirst => Answer::Keep { second: false, copy: vec![] },
                    AutoMode::KeepSecond => Answer::Keep { second: true, copy: vec![] },
                    AutoMode::Skip => Answer::Skip,
                };
                apply(session, relation, &pair, &answer)?;
            }
        }
        Source::Script(answers) => {
            for (line, answer) in answers {
                let at = |e: String| format!("answers line {line}: {e}");
                let pair = match (session.proposal().cloned(), &answer) {
                    (Some(pair), _) => pair,
                    (None, Answer::Undo) => {
                        session.undo().ok_or_else(|| at("nothing to undo".into()))?;
                        continue;
                    }
                    (None, Answer::Quit) => break,
                    (None, _) => return Err(at("no pair left to decide".into())),
                };
                if !apply(session, relation, &pair, &answer).map_err(at)? {
                    break;
                }
            }
        }
        Source::Prompt { mut input, mut output } => {
            let io = |e: std::io::Error| e.to_string();
            while let Some(pair) = session.proposal().cloned() {
                write!(
                    output,
                    "{}[a] keep {}  [b] keep {}  [s] skip  [u] undo  [q] quit; add attribute names to copy them over\n> ",
                    describe(relation, &pair),
                    pair.row_a,
                    pair.row_b
                )
                .map_err(io)?;
                output.flush().map_err(io)?;
                let mut line = String::new();
                if input.read_line(&mut line).map_err(io)? == 0 {
                    break;
                }
                let answer = match parse_answer(&line) {
                    Ok(Some(a)) => a,
                    Ok(None) => continue,
                    Err(e) => {
                        writeln!(output, "{e}").map_err(io)?;
                        continue;
                    }
                };
                match apply(session, relation, &pair, &answer) {
                    Ok(true) => {}
                    Ok(false) => break,
                    Err(e) => writeln!(output, "{e}").map_err(io)?,
                }
            }
        }
    }
    Ok(())
}
