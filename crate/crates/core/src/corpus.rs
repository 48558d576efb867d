//! Texts, scanpaths, and their decomposition into typed saccade events.
//!
//! Positions are continuous character coordinates on a single line; durations
//! are milliseconds. Each saccade is typed relative to the word the previous
//! fixation is attributed to, and carries the amplitude interval that the
//! text structure allows for that type.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// How far (in characters) a fixation may fall outside the first and last word.
pub const POSITION_MARGIN: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Word {
    pub left: f64,
    pub right: f64,
}

impl Word {
    pub fn new(left: f64, right: f64) -> Self {
        Word { left, right }
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.left + self.right)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.left <= x && x <= self.right
    }
}

/// One line of text: strictly ordered, non-overlapping word extents.
#[derive(Debug, Clone, PartialEq)]
pub struct TextLine {
    text_id: String,
    words: Vec<Word>,
}

impl TextLine {
    pub fn new(text_id: impl Into<String>, words: Vec<Word>) -> Result<Self> {
        let text_id = text_id.into();
        let invalid = |reason| Error::InvalidText {
            text_id: text_id.clone(),
            reason,
        };
        if words.is_empty() {
            return Err(invalid("a text needs at least one word"));
        }
        for w in &words {
            if !(w.left.is_finite() && w.right.is_finite()) {
                return Err(invalid("word boundaries must be finite"));
            }
            if w.left >= w.right {
                return Err(invalid("word left boundary must be below its right boundary"));
            }
        }
        if words.windows(2).any(|p| p[0].right >= p[1].left) {
            return Err(invalid("words must be ordered and must not overlap"));
        }
        Ok(TextLine { text_id, words })
    }

    pub fn id(&self) -> &str {
        &self.text_id
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    /// Range of admissible fixation positions, including the margin.
    pub fn admissible_range(&self) -> (f64, f64) {
        (
            self.words[0].left - POSITION_MARGIN,
            self.words[self.words.len() - 1].right + POSITION_MARGIN,
        )
    }

    pub fn is_admissible(&self, x: f64) -> bool {
        let (lo, hi) = self.admissible_range();
        lo <= x && x <= hi
    }

    /// Index of the word a position belongs to: the word containing it, else
    /// the word with the nearest center (ties go to the earlier word).
    pub fn attribute(&self, x: f64) -> Result<usize> {
        if !x.is_finite() || !self.is_admissible(x) {
            return Err(Error::NoCurrentWord { position: x });
        }
        // first word whose right edge is >= x
        let k = self.words.partition_point(|w| w.right < x);
        if k < self.words.len() && self.words[k].left <= x {
            return Ok(k);
        }
        let candidates = [k.checked_sub(1), (k < self.words.len()).then_some(k)];
        let mut best: Option<(usize, f64)> = None;
        for i in candidates.into_iter().flatten() {
            let d = (self.words[i].center() - x).abs();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
            .ok_or(Error::NoCurrentWord { position: x })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixation {
    pub position: f64,
    pub duration: f64,
}

impl Fixation {
    pub fn new(position: f64, duration: f64) -> Self {
        Fixation { position, duration }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scanpath {
    pub reader_id: String,
    pub text_id: String,
    pub fixations: Vec<Fixation>,
}

impl Scanpath {
    pub fn new(
        reader_id: impl Into<String>,
        text_id: impl Into<String>,
        fixations: Vec<Fixation>,
    ) -> Result<Self> {
        let sp = Scanpath {
            reader_id: reader_id.into(),
            text_id: text_id.into(),
            fixations,
        };
        if sp.fixations.is_empty() {
            return Err(sp.invalid("a scanpath needs at least one fixation"));
        }
        for (i, f) in sp.fixations.iter().enumerate() {
            if !f.position.is_finite() {
                return Err(sp.invalid(alloc::format!("fixation {i} has a non-finite position")));
            }
            if !(f.duration > 0.0 && f.duration.is_finite()) {
                return Err(sp.invalid(alloc::format!("fixation {i} has a non-positive duration")));
            }
        }
        Ok(sp)
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidScanpath {
            reader_id: self.reader_id.clone(),
            text_id: self.text_id.clone(),
            reason: reason.into(),
        }
    }

    /// Checks that the scanpath refers to `text` and stays within its margin.
    pub fn validate_against(&self, text: &TextLine) -> Result<()> {
        if self.text_id != text.id() {
            return Err(self.invalid("scanpath refers to a different text"));
        }
        if let Some(i) = self
            .fixations
            .iter()
            .position(|f| !text.is_admissible(f.position))
        {
            return Err(self.invalid(alloc::format!("fixation {i} lies outside the text line")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.fixations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SaccadeType {
    Refixation,
    NextWord,
    ForwardSkip,
    Regression,
}

impl SaccadeType {
    pub const ALL: [SaccadeType; 4] = [
        SaccadeType::Refixation,
        SaccadeType::NextWord,
        SaccadeType::ForwardSkip,
        SaccadeType::Regression,
    ];

    /// Zero-based index into probability vectors.
    pub fn index(self) -> usize {
        match self {
            SaccadeType::Refixation => 0,
            SaccadeType::NextWord => 1,
            SaccadeType::ForwardSkip => 2,
            SaccadeType::Regression => 3,
        }
    }

    /// One-based code used in the literature (1 = refixation ... 4 = regression).
    pub fn code(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for SaccadeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SaccadeType::Refixation => "refixation",
            SaccadeType::NextWord => "next-word",
            SaccadeType::ForwardSkip => "forward-skip",
            SaccadeType::Regression => "regression",
        };
        f.write_str(name)
    }
}

/// Sign branch of a refixation amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// amplitude > 0
    Positive,
    /// amplitude <= 0
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaccadeEvent {
    pub kind: SaccadeType,
    pub amplitude: f64,
    pub duration: f64,
    pub trunc_left: f64,
    pub trunc_right: f64,
    /// Only set for refixations.
    pub sign_branch: Option<Branch>,
    /// For refixations: whether the opposite sign branch has a non-empty
    /// interval at this fixation. When it does not, the observed branch
    /// carries the whole refixation mass.
    pub other_branch_open: bool,
}

/// Amplitude intervals available from one fixation position.
///
/// The current word's extent is widened to include the fixation itself when
/// the fixation falls into a gap, so refixation branches always have 0 as a
/// boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepIntervals {
    pub current_word: usize,
    /// `l°` and `r°`, relative to the fixation.
    pub current: (f64, f64),
    /// `l⁺` and `r⁺`, when a next word exists.
    pub next: Option<(f64, f64)>,
}

impl StepIntervals {
    pub fn at(prev_pos: f64, text: &TextLine) -> Result<Self> {
        let k = text.attribute(prev_pos)?;
        let w = text.words()[k];
        let left = w.left.min(prev_pos);
        let right = w.right.max(prev_pos);
        Ok(StepIntervals {
            current_word: k,
            current: (left - prev_pos, right - prev_pos),
            next: text
                .words()
                .get(k + 1)
                .map(|n| (n.left - prev_pos, n.right - prev_pos)),
        })
    }

    /// Interval for a saccade type (and refixation branch), or an error when
    /// the type is structurally impossible from this position.
    pub fn interval(&self, kind: SaccadeType, branch: Branch) -> Result<(f64, f64)> {
        let (lc, rc) = self.current;
        let (lo, hi) = match kind {
            SaccadeType::Refixation => match branch {
                Branch::Positive => (0.0, rc),
                Branch::Negative => (lc, 0.0),
            },
            SaccadeType::NextWord => self.next.ok_or(Error::MissingNextWord)?,
            SaccadeType::ForwardSkip => {
                let (_, rn) = self.next.ok_or(Error::MissingNextWord)?;
                (rn, f64::INFINITY)
            }
            SaccadeType::Regression => (f64::NEG_INFINITY, lc),
        };
        if lo < hi {
            Ok((lo, hi))
        } else {
            Err(Error::InfeasibleTruncation { left: lo, right: hi })
        }
    }

    pub fn branch_open(&self, branch: Branch) -> bool {
        match branch {
            Branch::Positive => self.current.1 > 0.0,
            Branch::Negative => self.current.0 < 0.0,
        }
    }
}

/// Saccade type of the move from `prev_pos` to `new_pos`.
pub fn classify_saccade(prev_pos: f64, new_pos: f64, text: &TextLine) -> Result<SaccadeType> {
    classify_with_intervals(prev_pos, new_pos, text).map(|(kind, _, _)| kind)
}

/// Classification plus the step intervals it was computed from, and whether
/// the landing point fell in the gap right after the current word.
fn classify_with_intervals(
    prev_pos: f64,
    new_pos: f64,
    text: &TextLine,
) -> Result<(SaccadeType, StepIntervals, bool)> {
    let steps = StepIntervals::at(prev_pos, text)?;
    let a = new_pos - prev_pos;
    let (lc, rc) = steps.current;
    if a < lc {
        return Ok((SaccadeType::Regression, steps, false));
    }
    if a <= rc {
        return Ok((SaccadeType::Refixation, steps, false));
    }
    match steps.next {
        Some((_, rn)) if a > rn => Ok((SaccadeType::ForwardSkip, steps, false)),
        Some((ln, _)) if a >= ln => Ok((SaccadeType::NextWord, steps, false)),
        _ => {
            // Landed between the current word and the next one (or past the
            // last word): attribute to the nearest word.
            let target = nearest_of_current_or_next(new_pos, steps.current_word, text);
            let kind = if target == steps.current_word {
                SaccadeType::Refixation
            } else {
                SaccadeType::NextWord
            };
            Ok((kind, steps, true))
        }
    }
}

fn nearest_of_current_or_next(x: f64, current: usize, text: &TextLine) -> usize {
    let words = text.words();
    match words.get(current + 1) {
        Some(next) if (next.center() - x).abs() < (words[current].center() - x).abs() => current + 1,
        _ => current,
    }
}

/// Amplitude interval for a saccade type (and refixation branch) from `prev_pos`.
pub fn truncation_interval(
    kind: SaccadeType,
    branch: Branch,
    prev_pos: f64,
    text: &TextLine,
) -> Result<(f64, f64)> {
    StepIntervals::at(prev_pos, text)?.interval(kind, branch)
}

/// One saccade event for the move `prev_pos -> new_pos` that ends in a
/// fixation of `duration` milliseconds.
pub fn saccade_event(prev_pos: f64, new_pos: f64, duration: f64, text: &TextLine) -> Result<SaccadeEvent> {
    let (kind, steps, in_gap) = classify_with_intervals(prev_pos, new_pos, text)?;
    let a = new_pos - prev_pos;
    let (sign_branch, other_branch_open, (lo, hi)) = match kind {
        SaccadeType::Refixation => {
            let mut branch = if a > 0.0 { Branch::Positive } else { Branch::Negative };
            if branch == Branch::Negative && !steps.branch_open(Branch::Negative) {
                branch = Branch::Positive;
            }
            let other = match branch {
                Branch::Positive => Branch::Negative,
                Branch::Negative => Branch::Positive,
            };
            let interval = if in_gap {
                (0.0, a)
            } else {
                steps.interval(kind, branch)?
            };
            (Some(branch), steps.branch_open(other), interval)
        }
        SaccadeType::NextWord if in_gap => {
            let (_, rn) = steps.next.ok_or(Error::MissingNextWord)?;
            (None, false, (a, rn))
        }
        _ => (None, false, steps.interval(kind, Branch::Positive)?),
    };
    Ok(SaccadeEvent {
        kind,
        amplitude: a,
        duration,
        trunc_left: lo,
        trunc_right: hi,
        sign_branch,
        other_branch_open,
    })
}

/// A scanpath split into its initial fixation and the saccade events after it.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub initial: Fixation,
    pub events: Vec<SaccadeEvent>,
}

pub fn decompose(scanpath: &Scanpath, text: &TextLine) -> Result<Decomposition> {
    scanpath.validate_against(text)?;
    let events = scanpath
        .fixations
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            saccade_event(w[0].position, w[1].position, w[1].duration, text)
                .map_err(|e| e.at_fixation(i + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Decomposition {
        initial: scanpath.fixations[0],
        events,
    })
}

/// Looks up the text a scanpath refers to.
pub fn find_text<'a>(texts: &'a [TextLine], text_id: &str) -> Result<&'a TextLine> {
    texts
        .iter()
        .find(|t| t.id() == text_id)
        .ok_or_else(|| Error::UnknownText(text_id.to_string()))
}
