//! Few-shot annotation prompt: a versioned template with four labeled
//! categories, instantiated per tweet, and the strict answer parser.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// English template, version 1. The original campaign prompt was Spanish; a
/// vetted Spanish variant can be supplied with [`PromptTemplate::from_file`].
const ENGLISH_V1: &str = include_str!("../../prompts/annotation_en_v1.txt");

const TWEET_SLOT: &str = "[TWEET HERE]";
const ANSWER_INSTRUCTION: &str = "Return only the number:";
const GUIDELINE_HEADERS: [&str; 4] = [
    "0 (Not related to DANA)",
    "1 (Related to DANA, but not disinformation)",
    "2 (Disinformation mentioned, but criticized)",
    "3 (Disinformation)",
];

/// A validated prompt template with a tweet slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub version: String,
    text: String,
}

impl PromptTemplate {
    /// The built-in English template.
    pub fn english_v1() -> Self {
        Self { version: "en-v1".into(), text: ENGLISH_V1.to_string() }
    }

    /// Load a custom template (for example a Spanish variant). The template
    /// must keep the tweet slot, the four guideline headers and the final
    /// answer instruction.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let version = path
            .as_ref()
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        let template = Self { version, text };
        template.validate()?;
        Ok(template)
    }

    fn validate(&self) -> Result<()> {
        if !self.text.contains(TWEET_SLOT) {
            return Err(Error::InvalidInput(format!("template has no {TWEET_SLOT} slot")));
        }
        for header in GUIDELINE_HEADERS {
            if !self.text.contains(header) {
                return Err(Error::InvalidInput(format!("template lacks guideline {header:?}")));
            }
        }
        if !self.text.trim_end().ends_with(ANSWER_INSTRUCTION) {
            return Err(Error::InvalidInput(format!(
                "template must end with {ANSWER_INSTRUCTION:?}"
            )));
        }
        Ok(())
    }
}

/// A prompt instantiated for one tweet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationPrompt {
    pub context_block: String,
    pub guidelines_block: String,
    pub tweet_text: String,
    rendered: String,
}

impl AnnotationPrompt {
    /// The full message sent to the endpoint. Byte-identical across runs for
    /// the same tweet and template version.
    pub fn rendered(&self) -> &str {
        &self.rendered
    }
}

/// Instantiate the template for one tweet. The tweet is inserted verbatim:
/// no escaping, no nested template expansion.
pub fn build_prompt(tweet: &str, template: &PromptTemplate) -> Result<AnnotationPrompt> {
    if tweet.trim().is_empty() {
        return Err(Error::InvalidInput("cannot annotate an empty tweet".into()));
    }
    template.validate()?;
    let rendered = template.text.replacen(TWEET_SLOT, tweet, 1);
    let (context_block, guidelines_block) = match template.text.split_once("Labeling Guidelines:") {
        Some((context, rest)) => (context.trim().to_string(), format!("Labeling Guidelines:{rest}")),
        None => (String::new(), template.text.clone()),
    };
    Ok(AnnotationPrompt {
        context_block,
        guidelines_block,
        tweet_text: tweet.to_string(),
        rendered,
    })
}

/// One of the four annotation categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FourClassLabel(u8);

impl FourClassLabel {
    pub fn new(value: u8) -> Result<Self> {
        if value > 3 {
            return Err(Error::InvalidInput(format!("label {value} outside 0..=3")));
        }
        Ok(Self(value))
    }

    pub fn value(&self) -> u8 {
        self.0
    }
}

/// Parse a model response: one digit 0–3 after trimming, optionally followed
/// by punctuation or whitespace. Anything else is a parse error carrying the
/// raw text so the caller can retry or log it.
pub fn parse_label(raw: &str) -> Result<FourClassLabel> {
    let trimmed = raw.trim();
    let mut chars = trimmed.chars();
    let digit = chars
        .next()
        .and_then(|c| c.to_digit(10))
        .filter(|&d| d <= 3)
        .ok_or_else(|| Error::AnnotationParse { raw: raw.to_string() })?;
    if chars.clone().any(|c| !c.is_ascii_punctuation() && !c.is_whitespace()) {
        return Err(Error::AnnotationParse { raw: raw.to_string() });
    }
    Ok(FourClassLabel(digit as u8))
}

/// Collapse the four categories to the binary scheme: only category 3
/// (active disinformation) maps to 1; mentioning or debunking does not.
pub fn collapse_to_binary(label: FourClassLabel) -> u8 {
    u8::from(label.0 == 3)
}
