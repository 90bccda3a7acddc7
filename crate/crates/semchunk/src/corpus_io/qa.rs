//! QA sets: JSON Lines of
//! `{qa_id, question, gold_answer, evidence, category, source_page_ids}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{json_error, Diagnostic, Loaded};

/// Question categories: text, table, formula, chart, reading order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "UPPERCASE")]
pub enum QaCategory {
    Txt,
    Tab,
    For,
    Cha,
    Ro,
}

impl QaCategory {
    pub const ALL: [QaCategory; 5] = [
        QaCategory::Txt,
        QaCategory::Tab,
        QaCategory::For,
        QaCategory::Cha,
        QaCategory::Ro,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QaCategory::Txt => "TXT",
            QaCategory::Tab => "TAB",
            QaCategory::For => "FOR",
            QaCategory::Cha => "CHA",
            QaCategory::Ro => "RO",
        }
    }

    pub fn parse(label: &str) -> Option<QaCategory> {
        match label {
            "TXT" => Some(QaCategory::Txt),
            "TAB" => Some(QaCategory::Tab),
            "FOR" => Some(QaCategory::For),
            "CHA" => Some(QaCategory::Cha),
            "RO" => Some(QaCategory::Ro),
            _ => None,
        }
    }
}

/// One question with its gold answer and evidence span.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QAItem {
    pub qa_id: String,
    pub question: String,
    pub gold_answer: String,
    pub evidence: String,
    pub category: QaCategory,
    pub source_page_ids: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawItem {
    qa_id: String,
    question: String,
    gold_answer: String,
    evidence: String,
    category: String,
    source_page_ids: Vec<String>,
}

pub fn load_qa(path: &Path) -> Result<Loaded<Vec<QAItem>>> {
    let mut items = Vec::new();
    let mut warnings = Vec::new();
    super::for_each_jsonl_line(path, |line_no, line| {
        let raw: RawItem =
            serde_json::from_str(line).map_err(|e| json_error(path, Some(line_no), &e))?;
        let category = QaCategory::parse(&raw.category).ok_or_else(|| Error::Category {
            context: format!("qa {} (line {})", raw.qa_id, line_no),
            label: raw.category.clone(),
        })?;
        if raw.evidence.trim().is_empty() {
            warnings.push(Diagnostic::new(
                format!("qa {}", raw.qa_id),
                "empty evidence string; retrieval scoring will skip this item",
            ));
        }
        items.push(QAItem {
            qa_id: raw.qa_id,
            question: raw.question,
            gold_answer: raw.gold_answer,
            evidence: raw.evidence,
            category,
            source_page_ids: raw.source_page_ids,
        });
        Ok(())
    })?;
    Ok(Loaded {
        value: items,
        warnings,
    })
}

pub fn write_qa(path: &Path, items: &[QAItem]) -> Result<()> {
    let raws: Vec<RawItem> = items
        .iter()
        .map(|i| RawItem {
            qa_id: i.qa_id.clone(),
            question: i.question.clone(),
            gold_answer: i.gold_answer.clone(),
            evidence: i.evidence.clone(),
            category: i.category.as_str().to_string(),
            source_page_ids: i.source_page_ids.clone(),
        })
        .collect();
    super::write_jsonl(path, &raws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn loads_valid_item_and_flags_empty_evidence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qa.jsonl");
        fs::write(
            &path,
            concat!(
                r#"{"qa_id":"q1","question":"What?","gold_answer":"42","evidence":"the answer is 42","category":"TXT","source_page_ids":["p1"]}"#,
                "\n",
                r#"{"qa_id":"q2","question":"Why?","gold_answer":"because","evidence":"","category":"TAB","source_page_ids":["p2"]}"#,
            ),
        )
        .unwrap();
        let loaded = load_qa(&path).unwrap();
        assert_eq!(loaded.value.len(), 2);
        assert_eq!(loaded.value[0].category, QaCategory::Txt);
        assert_eq!(loaded.warnings.len(), 1);
        assert!(loaded.warnings[0].context.contains("q2"));
    }

    #[test]
    fn unknown_category_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qa.jsonl");
        fs::write(
            &path,
            r#"{"qa_id":"q1","question":"?","gold_answer":"a","evidence":"e","category":"IMG","source_page_ids":[]}"#,
        )
        .unwrap();
        assert!(matches!(
            load_qa(&path).unwrap_err(),
            Error::Category { .. }
        ));
    }
}
