//! Plain-article input for harvesting: a UTF-8 text file (one article), a
//! directory of such files, or a JSONL file with `{"article_id", "text"}` lines.
//! Paragraphs are separated by blank lines.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Paragraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub article_id: String,
    pub text: String,
}

impl Article {
    pub fn paragraphs(&self) -> Vec<Paragraph> {
        split_paragraphs(&self.text)
            .into_iter()
            .enumerate()
            .filter_map(|(i, t)| Paragraph::new(self.article_id.clone(), i, t).ok())
            .collect()
    }
}

/// Split on blank lines; whitespace-only chunks are dropped.
pub fn split_paragraphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.trim().is_empty() {
                out.push(std::mem::take(&mut current));
            }
            current.clear();
        } else {
            if !current.is_empty() {
                current.push('\n');
            }
            current.push_str(line);
        }
    }
    if !current.trim().is_empty() {
        out.push(current);
    }
    out
}

pub fn parse_jsonl_articles(text: &str) -> Result<Vec<Article>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

pub fn read_articles(path: &Path) -> Result<Vec<Article>> {
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        let mut out = Vec::new();
        for f in files {
            out.extend(read_articles(&f)?);
        }
        return Ok(out);
    }
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "jsonl") {
        return parse_jsonl_articles(&text);
    }
    let article_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(vec![Article { article_id, text }])
}
