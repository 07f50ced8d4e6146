//! Accumulating context for oracle inference, and the dual state that pairs
//! it with a symbolic state.
//!
//! The naive realization used throughout is tagged text: an ordered list of
//! segments, each tagged with what produced it. Segment order is insertion
//! order, i.e. evaluation history. A byte budget bounds the retained size;
//! eviction drops the oldest conclusion segments first and never touches the
//! initial segment, so the problem statement and recent counterexamples
//! survive longest.

use std::collections::HashSet;
use std::fmt;

use crate::derivation::{EngineError, SymbolicState, Transition};
use crate::oracle::Contradiction;
use crate::subst::canonical_key;
use crate::term::Term;

pub const DEFAULT_INTUITION_BUDGET: usize = 32 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentTag {
    Init,
    Conclusion,
    Contradiction,
    Guess,
}

impl fmt::Display for SegmentTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SegmentTag::Init => "INIT",
            SegmentTag::Conclusion => "CONCLUSION",
            SegmentTag::Contradiction => "CONTRADICTION",
            SegmentTag::Guess => "GUESS",
        };
        write!(f, "{}", s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub tag: SegmentTag,
    pub text: String,
}

/// Tagged-text intuition with a byte budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextIntuition {
    segments: Vec<Segment>,
    byte_budget: usize,
    concluded: HashSet<String>,
    contradicted: HashSet<String>,
}

impl TextIntuition {
    pub fn new(byte_budget: usize) -> Self {
        TextIntuition {
            segments: Vec::new(),
            byte_budget,
            concluded: HashSet::new(),
            contradicted: HashSet::new(),
        }
    }

    pub fn empty() -> Self {
        TextIntuition::new(DEFAULT_INTUITION_BUDGET)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn byte_budget(&self) -> usize {
        self.byte_budget
    }

    pub fn has_init(&self) -> bool {
        self.segments.iter().any(|s| s.tag == SegmentTag::Init)
    }

    pub fn retained_bytes(&self) -> usize {
        self.segments.iter().map(|s| s.text.len()).sum()
    }

    pub fn push(&mut self, tag: SegmentTag, text: impl Into<String>) {
        self.segments.push(Segment { tag, text: text.into() });
        self.evict();
    }

    /// Records a proven conclusion. Returns false when a conclusion that is
    /// syntactically identical up to variable renaming was already recorded.
    pub fn record_conclusion(&mut self, conclusion: &Term, detail: impl Into<String>) -> bool {
        let key = canonical_key(std::slice::from_ref(conclusion));
        if !self.concluded.insert(key) {
            return false;
        }
        self.push(SegmentTag::Conclusion, detail);
        true
    }

    /// Records a refutation of a guessed derivation node. Duplicates (same
    /// node, same reason) collapse to a single segment.
    pub fn record_contradiction(&mut self, c: &Contradiction) -> bool {
        let key = format!("{:?}/{:?}/{}", c.refuted_node, c.reason, canonical_key(std::slice::from_ref(&c.goal)));
        if !self.contradicted.insert(key) {
            return false;
        }
        self.push(SegmentTag::Contradiction, c.to_string());
        true
    }

    fn evict(&mut self) {
        if self.retained_bytes() <= self.byte_budget {
            return;
        }
        // oldest conclusions first
        while self.retained_bytes() > self.byte_budget {
            if let Some(pos) = self.segments.iter().position(|s| s.tag == SegmentTag::Conclusion) {
                self.segments.remove(pos);
            } else {
                break;
            }
        }
        // then any other non-INIT segment, oldest first
        while self.retained_bytes() > self.byte_budget {
            if let Some(pos) = self.segments.iter().position(|s| s.tag != SegmentTag::Init) {
                self.segments.remove(pos);
            } else {
                break;
            }
        }
    }

    /// Deterministic rendering of all segments in order. This exact text is
    /// what oracles receive as the accumulated-intuition prompt, so its
    /// shape is golden-file tested and must stay stable.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, seg) in self.segments.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push('[');
            out.push_str(&seg.tag.to_string());
            out.push_str("] ");
            out.push_str(&seg.text);
        }
        out
    }
}

/// Concatenation with budget eviction: `a`'s segments followed by `b`'s.
/// Associative whenever the combined size fits the budget; the identity is
/// the empty intuition.
pub fn combine(a: &TextIntuition, b: &TextIntuition) -> TextIntuition {
    let mut out = TextIntuition::new(a.byte_budget.max(b.byte_budget));
    out.concluded = a.concluded.union(&b.concluded).cloned().collect();
    out.contradicted = a.contradicted.union(&b.contradicted).cloned().collect();
    out.segments = a.segments.iter().chain(b.segments.iter()).cloned().collect();
    out.evict();
    out
}

/// Rendering of the full history; the contract is the plain deterministic
/// rendering (an LLM-polished summary is a CLI nicety, not part of this).
pub fn summarize(i: &TextIntuition) -> String {
    i.render()
}

/// Intuition describing one symbolic transition, ready for [`combine`].
pub fn transition_intuition(t: &Transition) -> TextIntuition {
    let mut i = TextIntuition::empty();
    i.push(SegmentTag::Conclusion, t.label.clone());
    i
}

/// The dual state: a symbolic state paired with intuition. Stepping changes
/// the symbolic part exactly as expansion would; the intuition never alters
/// symbolic semantics (it only orders exploration in the search layer).
#[derive(Debug, Clone)]
pub struct DualState {
    pub symbolic: SymbolicState,
    pub intuition: TextIntuition,
}

impl DualState {
    pub fn new(symbolic: SymbolicState, intuition: TextIntuition) -> Self {
        DualState { symbolic, intuition }
    }

    /// Advances the dual state along one transition: the symbolic half
    /// becomes `next`, the intuition absorbs the transition's intuition.
    /// The pair must describe a plausible expansion of the current state.
    pub fn step(&self, t: &Transition, next: &SymbolicState) -> Result<DualState, EngineError> {
        if self.symbolic.is_final() {
            return Err(EngineError::InvalidTransition("current state is final".into()));
        }
        if next.depth != self.symbolic.depth + 1 {
            return Err(EngineError::InvalidTransition(format!(
                "depth must advance from {} to {}, got {}",
                self.symbolic.depth,
                self.symbolic.depth + 1,
                next.depth
            )));
        }
        let selected = self.symbolic.subst.apply(&self.symbolic.resolvent[0]);
        if t.goal != selected {
            return Err(EngineError::InvalidTransition(format!(
                "transition resolves {}, but the leftmost goal is {}",
                t.goal, selected
            )));
        }
        Ok(DualState {
            symbolic: next.clone(),
            intuition: combine(&self.intuition, &transition_intuition(t)),
        })
    }

    pub fn record_novel_conclusion(&mut self, conclusion: &Term, detail: impl Into<String>) -> bool {
        self.intuition.record_conclusion(conclusion, detail)
    }

    pub fn record_contradiction(&mut self, c: &Contradiction) -> bool {
        self.intuition.record_contradiction(c)
    }
}
