//! Region reports: the line grammar a vision-language model is prompted to
//! emit, and a tolerant parser for it.
//!
//! One region per line (or per block of lines):
//!
//! ```text
//! REGION: center-left-middle | TYPE: OCCLUSION | PRIORITY: HIGH | SIZE: medium | REASON: ...
//! ```

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Horizontal {
    Left,
    CenterLeft,
    CenterRight,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Vertical {
    Top,
    Middle,
    Bottom,
}

impl Horizontal {
    pub const ALL: [Horizontal; 4] = [
        Horizontal::Left,
        Horizontal::CenterLeft,
        Horizontal::CenterRight,
        Horizontal::Right,
    ];

    pub fn column(self) -> usize {
        self as usize
    }

    fn as_str(self) -> &'static str {
        match self {
            Horizontal::Left => "left",
            Horizontal::CenterLeft => "center-left",
            Horizontal::CenterRight => "center-right",
            Horizontal::Right => "right",
        }
    }
}

impl Vertical {
    pub const ALL: [Vertical; 3] = [Vertical::Top, Vertical::Middle, Vertical::Bottom];

    pub fn row(self) -> usize {
        self as usize
    }

    fn as_str(self) -> &'static str {
        match self {
            Vertical::Top => "top",
            Vertical::Middle => "middle",
            Vertical::Bottom => "bottom",
        }
    }
}

/// One of the 12 cells of the 4×3 image grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridCell {
    pub horizontal: Horizontal,
    pub vertical: Vertical,
}

impl GridCell {
    pub fn new(horizontal: Horizontal, vertical: Vertical) -> Self {
        Self {
            horizontal,
            vertical,
        }
    }

    pub fn all() -> impl Iterator<Item = GridCell> {
        Vertical::ALL
            .into_iter()
            .flat_map(|v| Horizontal::ALL.into_iter().map(move |h| GridCell::new(h, v)))
    }

    /// Parses `left-top`, `center-left-middle`, `top-left`, `Center Right Bottom`, ...
    pub fn parse(text: &str) -> Option<GridCell> {
        let norm: String = text
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == '_' || c.is_whitespace() { '-' } else { c })
            .collect();
        let tokens: Vec<&str> = norm.split('-').filter(|t| !t.is_empty()).collect();
        if tokens.len() < 2 || tokens.len() > 3 {
            return None;
        }
        let vertical_of = |t: &str| match t {
            "top" => Some(Vertical::Top),
            "middle" | "mid" => Some(Vertical::Middle),
            "bottom" => Some(Vertical::Bottom),
            _ => None,
        };
        let (vertical, rest) = if let Some(v) = vertical_of(tokens[tokens.len() - 1]) {
            (v, &tokens[..tokens.len() - 1])
        } else {
            let v = vertical_of(tokens[0])?;
            (v, &tokens[1..])
        };
        let horizontal = match rest {
            ["left"] => Horizontal::Left,
            ["right"] => Horizontal::Right,
            ["center" | "centre", "left"] => Horizontal::CenterLeft,
            ["center" | "centre", "right"] => Horizontal::CenterRight,
            _ => return None,
        };
        Some(GridCell::new(horizontal, vertical))
    }
}

impl fmt::Display for GridCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.horizontal.as_str(), self.vertical.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    Occlusion,
    Geometric,
    Lighting,
    Boundary,
    Texture,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Occlusion,
        Category::Geometric,
        Category::Lighting,
        Category::Boundary,
        Category::Texture,
    ];

    fn parse(token: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(token))
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Occlusion => "OCCLUSION",
            Category::Geometric => "GEOMETRIC",
            Category::Lighting => "LIGHTING",
            Category::Boundary => "BOUNDARY",
            Category::Texture => "TEXTURE",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Priority {
    High,
    Medium,
    Low,
}

impl Priority {
    fn parse(token: &str) -> Option<Self> {
        match token.to_ascii_uppercase().as_str() {
            "HIGH" => Some(Priority::High),
            "MEDIUM" | "MED" => Some(Priority::Medium),
            "LOW" => Some(Priority::Low),
            _ => None,
        }
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Priority::High => "HIGH",
            Priority::Medium => "MEDIUM",
            Priority::Low => "LOW",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionSize {
    Small,
    Medium,
    Large,
}

impl RegionSize {
    fn parse(token: &str) -> Option<Self> {
        match token.to_ascii_lowercase().as_str() {
            "small" => Some(RegionSize::Small),
            "medium" => Some(RegionSize::Medium),
            "large" => Some(RegionSize::Large),
            _ => None,
        }
    }
}

impl fmt::Display for RegionSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegionSize::Small => "small",
            RegionSize::Medium => "medium",
            RegionSize::Large => "large",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticRegion {
    pub cell: GridCell,
    pub category: Category,
    pub priority: Priority,
    pub size: RegionSize,
    pub reason: String,
}

/// Parsed regions plus the number of malformed blocks that were skipped.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseOutcome {
    pub regions: Vec<SemanticRegion>,
    pub diagnostics: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Key {
    Region,
    Type,
    Priority,
    Size,
    Reason,
}

fn key_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(REGION|TYPE|PRIORITY|SIZE|REASON)\s*:").expect("static regex")
    })
}

fn clean_value(raw: &str) -> &str {
    raw.trim_matches(|c: char| c.is_whitespace() || "|/;,*`\"'".contains(c))
}

fn clean_reason(raw: &str) -> &str {
    raw.trim_matches(|c: char| c.is_whitespace() || "|*`".contains(c))
}

fn first_word(value: &str) -> &str {
    value
        .split(|c: char| !c.is_ascii_alphanumeric())
        .find(|t| !t.is_empty())
        .unwrap_or("")
}

#[derive(Default)]
struct Block<'a> {
    region: Option<&'a str>,
    category: Option<&'a str>,
    priority: Option<&'a str>,
    size: Option<&'a str>,
    reason: Option<&'a str>,
    duplicate: bool,
}

impl<'a> Block<'a> {
    fn set(&mut self, key: Key, value: &'a str) {
        let slot = match key {
            Key::Region => &mut self.region,
            Key::Type => &mut self.category,
            Key::Priority => &mut self.priority,
            Key::Size => &mut self.size,
            Key::Reason => &mut self.reason,
        };
        if slot.is_some() {
            self.duplicate = true;
        } else {
            *slot = Some(value);
        }
    }

    fn finish(self) -> Option<SemanticRegion> {
        if self.duplicate {
            return None;
        }
        let region = self.region?;
        let location = region.split(['(', ',', ':']).next().unwrap_or("");
        Some(SemanticRegion {
            cell: GridCell::parse(location)?,
            category: Category::parse(first_word(self.category?))?,
            priority: Priority::parse(first_word(self.priority?))?,
            size: RegionSize::parse(first_word(self.size?))?,
            reason: self.reason.unwrap_or("").to_string(),
        })
    }
}

/// Parses a region report. Never fails: malformed blocks are skipped and
/// counted in [`ParseOutcome::diagnostics`].
pub fn parse_regions(report: &str) -> ParseOutcome {
    let re = key_regex();
    let matches: Vec<_> = re.captures_iter(report).collect();
    let mut outcome = ParseOutcome::default();
    if matches.is_empty() {
        if !report.trim().is_empty() {
            outcome.diagnostics = 1;
        }
        return outcome;
    }

    let mut orphan_fields = false;
    let mut current: Option<Block> = None;
    for (i, cap) in matches.iter().enumerate() {
        let whole = cap.get(0).expect("match");
        let end = matches
            .get(i + 1)
            .map(|next| next.get(0).expect("match").start())
            .unwrap_or(report.len());
        let key = match cap[1].to_ascii_uppercase().as_str() {
            "REGION" => Key::Region,
            "TYPE" => Key::Type,
            "PRIORITY" => Key::Priority,
            "SIZE" => Key::Size,
            _ => Key::Reason,
        };
        let raw = &report[whole.end()..end];
        let value = if key == Key::Reason {
            clean_reason(raw)
        } else {
            clean_value(raw)
        };
        if key == Key::Region {
            if let Some(block) = current.take() {
                push_block(&mut outcome, block);
            }
            current = Some(Block::default());
        }
        match current.as_mut() {
            Some(block) => block.set(key, value),
            None => orphan_fields = true,
        }
    }
    if let Some(block) = current.take() {
        push_block(&mut outcome, block);
    }
    if orphan_fields {
        outcome.diagnostics += 1;
    }
    outcome
}

fn push_block(outcome: &mut ParseOutcome, block: Block) {
    match block.finish() {
        Some(region) => outcome.regions.push(region),
        None => outcome.diagnostics += 1,
    }
}

/// Lossy byte entry point for untrusted model output.
pub fn parse_regions_bytes(bytes: &[u8]) -> ParseOutcome {
    parse_regions(&String::from_utf8_lossy(bytes))
}

/// Formats one region as a single report line.
pub fn format_region(region: &SemanticRegion) -> String {
    let reason: String = region
        .reason
        .chars()
        .map(|c| if c.is_control() { ' ' } else { c })
        .collect();
    format!(
        "REGION: {} | TYPE: {} | PRIORITY: {} | SIZE: {} | REASON: {}",
        region.cell,
        region.category,
        region.priority,
        region.size,
        reason.trim()
    )
}

pub fn format_report(regions: &[SemanticRegion]) -> String {
    let mut out = String::new();
    for r in regions {
        out.push_str(&format_region(r));
        out.push('\n');
    }
    out
}
