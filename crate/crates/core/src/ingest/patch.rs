//! Unified-diff reader that reports, per file, which pre-image lines a fix
//! touched.
//!
//! Deleted lines are reported at their own pre-image line number. A run of
//! added lines with no deletion is anchored to the last pre-image line
//! consumed before it (line 1 when the addition opens the file), so a pure
//! insertion after line 7 is reported as `[7, 7]`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::normalize_path;

/// Closed, 1-based line interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineRange {
    pub start: u32,
    pub end: u32,
}

impl LineRange {
    pub fn new(start: u32, end: u32) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn overlaps(&self, start: u32, end: u32) -> bool {
        self.start <= end && start <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChange {
    pub path: String,
    pub ranges: Vec<LineRange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub bug_id: String,
    pub file_changes: Vec<FileChange>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatchError {
    #[error("input is not a unified diff")]
    NotUnifiedDiff,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

struct Hunk {
    old_start: u32,
    old_len: u32,
    new_len: u32,
}

fn parse_hunk_header(line: &str) -> Option<Hunk> {
    let rest = line.strip_prefix("@@ -")?;
    let (ranges, _) = rest.split_once(" @@")?;
    let (old, new) = ranges.split_once(" +")?;
    let span = |s: &str| -> Option<(u32, u32)> {
        match s.split_once(',') {
            Some((a, b)) => Some((a.parse().ok()?, b.parse().ok()?)),
            None => Some((s.parse().ok()?, 1)),
        }
    };
    let (old_start, old_len) = span(old)?;
    let (_, new_len) = span(new)?;
    Some(Hunk {
        old_start,
        old_len,
        new_len,
    })
}

fn strip_diff_path(raw: &str) -> Option<String> {
    let path = raw.split('\t').next().unwrap_or(raw).trim();
    if path == "/dev/null" {
        return None;
    }
    let path = path
        .strip_prefix("a/")
        .or_else(|| path.strip_prefix("b/"))
        .unwrap_or(path);
    Some(normalize_path(path))
}

fn to_ranges(lines: &BTreeSet<u32>) -> Vec<LineRange> {
    let mut ranges: Vec<LineRange> = Vec::new();
    for &l in lines {
        match ranges.last_mut() {
            Some(r) if r.end + 1 == l => r.end = l,
            _ => ranges.push(LineRange::new(l, l)),
        }
    }
    ranges
}

/// Parses a unified diff into the pre-image line ranges it touches.
///
/// Files created by the patch (`--- /dev/null`) have no pre-image and are
/// omitted. Hunk bodies must agree with their header counts.
pub fn parse_patch(diff: &[u8], bug_id: &str) -> Result<Patch, PatchError> {
    let text = String::from_utf8_lossy(diff);
    let lines: Vec<&str> = text.lines().collect();

    let mut files: Vec<(Option<String>, BTreeSet<u32>)> = Vec::new();
    let mut saw_header = false;
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if let Some(old) = line.strip_prefix("--- ") {
            if !lines.get(i + 1).is_some_and(|l| l.starts_with("+++ ")) {
                return Err(PatchError::Malformed {
                    line: i + 1,
                    message: "`---` header without `+++`".into(),
                });
            }
            files.push((strip_diff_path(old), BTreeSet::new()));
            saw_header = true;
            i += 2;
            continue;
        }
        if line.starts_with("@@") {
            let hunk = parse_hunk_header(line).ok_or_else(|| PatchError::Malformed {
                line: i + 1,
                message: format!("bad hunk header `{line}`"),
            })?;
            let Some((_, touched)) = files.last_mut() else {
                return Err(PatchError::Malformed {
                    line: i + 1,
                    message: "hunk before any file header".into(),
                });
            };
            i = read_hunk(&lines, i + 1, &hunk, touched)?;
            continue;
        }
        i += 1;
    }
    if !saw_header {
        return Err(PatchError::NotUnifiedDiff);
    }

    let mut by_path: Vec<FileChange> = Vec::new();
    for (path, touched) in files {
        let Some(path) = path else { continue };
        if touched.is_empty() {
            continue;
        }
        match by_path.iter_mut().find(|c| c.path == path) {
            Some(change) => {
                let mut all: BTreeSet<u32> = change
                    .ranges
                    .iter()
                    .flat_map(|r| r.start..=r.end)
                    .collect();
                all.extend(touched);
                change.ranges = to_ranges(&all);
            }
            None => by_path.push(FileChange {
                path,
                ranges: to_ranges(&touched),
            }),
        }
    }
    by_path.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(Patch {
        bug_id: bug_id.to_string(),
        file_changes: by_path,
    })
}

/// Consumes one hunk body starting at `start`; returns the index of the
/// first line after it.
fn read_hunk(
    lines: &[&str],
    start: usize,
    hunk: &Hunk,
    touched: &mut BTreeSet<u32>,
) -> Result<usize, PatchError> {
    // `-7,0` means "insert after line 7"; otherwise the hunk starts at line 7.
    let mut last_old = if hunk.old_len == 0 {
        hunk.old_start
    } else {
        hunk.old_start.saturating_sub(1)
    };
    let mut old_seen = 0;
    let mut new_seen = 0;
    let mut i = start;
    while i < lines.len() && (old_seen < hunk.old_len || new_seen < hunk.new_len) {
        let line = lines[i];
        match line.chars().next() {
            Some('-') => {
                last_old += 1;
                old_seen += 1;
                touched.insert(last_old);
            }
            Some('+') => {
                new_seen += 1;
                touched.insert(last_old.max(1));
            }
            Some(' ') | None => {
                last_old += 1;
                old_seen += 1;
                new_seen += 1;
            }
            Some('\\') => {}
            Some(_) => break,
        }
        i += 1;
    }
    while i < lines.len() && lines[i].starts_with('\\') {
        i += 1;
    }
    if old_seen != hunk.old_len || new_seen != hunk.new_len {
        return Err(PatchError::Malformed {
            line: start,
            message: format!(
                "hunk body has {old_seen}/{new_seen} old/new lines, header says {}/{}",
                hunk.old_len, hunk.new_len
            ),
        });
    }
    Ok(i)
}
