//! Domain-adaptation corpus curation: per-community top-post quotas sized
//! by follower count, pseudonymized authors, deduplication and a
//! per-category size report.
//!
//! The platform client is a trait; [`FixtureClient`] serves canned posts
//! from disk or memory.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hmac::{Hmac, Mac};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use crate::artifacts::{read_jsonl, ArtifactError};
use crate::dataset::normalize_text;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("community {community:?}: {message}{}", if *.retriable { " (retriable)" } else { "" })]
    Client { community: String, message: String, retriable: bool },
    #[error("{path}:{line}: {message}")]
    Malformed { path: String, line: u64, message: String },
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    MentalHealth,
    Control,
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "mental_health" | "mental-health" => Ok(Category::MentalHealth),
            "control" => Ok(Category::Control),
            other => Err(format!("unknown category {other:?}; expected mental_health or control")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunitySpec {
    pub name: String,
    pub follower_count: u64,
    pub category: Category,
}

/// Read a `name,follower_count,category` file.
pub fn load_communities(path: &Path) -> Result<Vec<CommunitySpec>, CorpusError> {
    let display = path.display().to_string();
    let malformed = |line: u64, message: String| CorpusError::Malformed { path: display.clone(), line, message };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| malformed(0, e.to_string()))?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| malformed(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 3 {
            return Err(malformed(line, format!("expected 3 fields, found {}", row.len())));
        }
        let follower_count = row[1].parse().map_err(|_| malformed(line, format!("bad follower_count {:?}", &row[1])))?;
        let category = row[2].parse().map_err(|e| malformed(line, e))?;
        out.push(CommunitySpec { name: row[0].to_string(), follower_count, category });
    }
    Ok(out)
}

/// Number of top posts to take: 2% of followers, rounded down.
pub fn sample_quota(community: &CommunitySpec) -> usize {
    (u128::from(community.follower_count) * 2 / 100) as usize
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    #[default]
    Submission,
    Comment,
}

/// Ranking window for "top" listings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopWindow {
    #[default]
    All,
    Year,
    Month,
    Week,
    Day,
}

/// A post as served by the platform, before anonymization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPost {
    pub id: String,
    #[serde(default)]
    pub author: Option<String>,
    pub text: String,
    #[serde(default)]
    pub kind: DocKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Page {
    pub posts: Vec<RawPost>,
    /// Cursor for the next page, `None` at the end of the listing.
    pub next: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientError {
    pub message: String,
    pub retriable: bool,
}

/// Access to a platform's ranked community listings.
pub trait CommunityClient: Sync {
    /// Up to `limit` posts of `community`'s top listing, starting at `cursor`.
    fn top_page(
        &self,
        community: &str,
        window: TopWindow,
        cursor: Option<&str>,
        limit: usize,
    ) -> Result<Page, ClientError>;
}

/// Keyed-hash author pseudonyms. Tokens are stable for one key and not
/// invertible without it.
#[derive(Clone)]
pub struct Pseudonymizer {
    key: [u8; 32],
}

impl fmt::Debug for Pseudonymizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Pseudonymizer { .. }")
    }
}

pub const DELETED_AUTHOR: &str = "deleted";

impl Pseudonymizer {
    /// Fresh random key for one run.
    pub fn random() -> Self {
        let mut key = [0u8; 32];
        rand::thread_rng().fill_bytes(&mut key);
        Self { key }
    }

    pub fn with_key(key: [u8; 32]) -> Self {
        Self { key }
    }

    pub fn token(&self, username: &str) -> String {
        let mut mac = Hmac::<Sha256>::new_from_slice(&self.key).expect("hmac accepts any key length");
        mac.update(username.as_bytes());
        let digest = mac.finalize().into_bytes();
        format!("user_{}", hex::encode(&digest[..12]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub doc_id: String,
    pub community: String,
    pub category: Category,
    pub kind: DocKind,
    pub text: String,
    pub author_token: String,
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

/// Replace `u/<name>` mentions and bare occurrences of `known` names with pseudonyms.
pub fn scrub_usernames(text: &str, known: &HashSet<String>, pseudo: &Pseudonymizer) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find(is_name_char) {
        let (before, tail) = rest.split_at(start);
        out.push_str(before);
        let end = tail.find(|c: char| !is_name_char(c)).unwrap_or(tail.len());
        let word = &tail[..end];
        let mention = out.ends_with("u/");
        if mention || known.contains(word) {
            out.push_str(&pseudo.token(word));
        } else {
            out.push_str(word);
        }
        rest = &tail[end..];
    }
    out.push_str(rest);
    out
}

/// Fetch up to `quota` top posts of `community`, pseudonymizing authors.
///
/// A failure on the first page is an error; a failure after some posts were
/// received returns those posts with a warning. Posts with blank text are
/// skipped.
pub fn fetch_top(
    community: &CommunitySpec,
    quota: usize,
    client: &dyn CommunityClient,
    window: TopWindow,
    pseudo: &Pseudonymizer,
) -> Result<Vec<CorpusDocument>, CorpusError> {
    let mut docs = Vec::new();
    if quota == 0 {
        return Ok(docs);
    }
    let mut cursor: Option<String> = None;
    loop {
        let page = match client.top_page(&community.name, window, cursor.as_deref(), quota - docs.len()) {
            Ok(page) => page,
            Err(e) if docs.is_empty() => {
                return Err(CorpusError::Client { community: community.name.clone(), message: e.message, retriable: e.retriable })
            }
            Err(e) => {
                log::warn!("{}: returning {} of {quota} posts after error: {}", community.name, docs.len(), e.message);
                break;
            }
        };
        for post in page.posts {
            if docs.len() == quota {
                break;
            }
            if post.text.trim().is_empty() {
                continue;
            }
            let author_token = match post.author.as_deref() {
                Some(name) if !name.is_empty() => pseudo.token(name),
                _ => DELETED_AUTHOR.to_string(),
            };
            docs.push(CorpusDocument {
                doc_id: format!("{}/{}", community.name, post.id),
                community: community.name.clone(),
                category: community.category,
                kind: post.kind,
                text: post.text,
                author_token,
            });
        }
        match page.next {
            Some(next) if docs.len() < quota => cursor = Some(next),
            _ => break,
        }
    }
    if docs.len() < quota {
        log::warn!("{}: listing ended after {} of {quota} posts", community.name, docs.len());
    }
    Ok(docs)
}

/// Drop documents whose normalized text was already seen; first occurrence wins.
pub fn dedup_corpus(documents: Vec<CorpusDocument>) -> (Vec<CorpusDocument>, usize) {
    let before = documents.len();
    let mut seen = HashSet::new();
    let kept: Vec<_> = documents.into_iter().filter(|d| seen.insert(normalize_text(&d.text))).collect();
    let removed = before - kept.len();
    (kept, removed)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub mental_health_count: usize,
    pub control_count: usize,
    /// Total UTF-8 size of document texts.
    pub bytes: usize,
}

pub fn partition_report(documents: &[CorpusDocument]) -> PartitionReport {
    let mut report = PartitionReport::default();
    for d in documents {
        match d.category {
            Category::MentalHealth => report.mental_health_count += 1,
            Category::Control => report.control_count += 1,
        }
        report.bytes += d.text.len();
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunityYield {
    pub name: String,
    pub quota: usize,
    pub fetched: usize,
}

#[derive(Debug, Clone)]
pub struct CorpusBuild {
    pub documents: Vec<CorpusDocument>,
    pub duplicates_removed: usize,
    pub yields: Vec<CommunityYield>,
    pub report: PartitionReport,
}

/// Fetch every community concurrently, mask usernames in texts (mentions
/// and any of `known_authors`), then deduplicate. Documents keep community
/// order.
pub fn build_corpus(
    communities: &[CommunitySpec],
    client: &dyn CommunityClient,
    window: TopWindow,
    pseudo: &Pseudonymizer,
    known_authors: &HashSet<String>,
) -> Result<CorpusBuild, CorpusError> {
    let fetched: Vec<Vec<CorpusDocument>> = communities
        .par_iter()
        .map(|c| fetch_top(c, sample_quota(c), client, window, pseudo))
        .collect::<Result<_, _>>()?;
    let yields = communities
        .iter()
        .zip(&fetched)
        .map(|(c, docs)| CommunityYield { name: c.name.clone(), quota: sample_quota(c), fetched: docs.len() })
        .collect();
    let documents = fetched.into_iter().flatten().collect();
    Ok(finish_build(documents, yields, known_authors, pseudo))
}

fn finish_build(
    documents: Vec<CorpusDocument>,
    yields: Vec<CommunityYield>,
    known: &HashSet<String>,
    pseudo: &Pseudonymizer,
) -> CorpusBuild {
    let scrubbed: Vec<CorpusDocument> = documents
        .into_iter()
        .map(|mut d| {
            d.text = scrub_usernames(&d.text, known, pseudo);
            d
        })
        .collect();
    let (documents, duplicates_removed) = dedup_corpus(scrubbed);
    let report = partition_report(&documents);
    CorpusBuild { documents, duplicates_removed, yields, report }
}

/// Serves canned listings: one `<community>.jsonl` file of [`RawPost`]s per
/// community, in rank order.
#[derive(Debug, Clone, Default)]
pub struct FixtureClient {
    listings: HashMap<String, Vec<RawPost>>,
    page_size: usize,
    fail_after_pages: HashMap<String, usize>,
}

impl FixtureClient {
    pub fn from_listings(listings: HashMap<String, Vec<RawPost>>, page_size: usize) -> Self {
        Self { listings, page_size: page_size.max(1), fail_after_pages: HashMap::new() }
    }

    pub fn from_dir(dir: &Path, page_size: usize) -> Result<Self, CorpusError> {
        let mut listings = HashMap::new();
        let entries = std::fs::read_dir(dir).map_err(|source| {
            CorpusError::Artifact(ArtifactError::Io { path: dir.display().to_string(), source })
        })?;
        for entry in entries {
            let path: PathBuf = entry
                .map_err(|source| CorpusError::Artifact(ArtifactError::Io { path: dir.display().to_string(), source }))?
                .path();
            if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                continue;
            }
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            listings.insert(name, read_jsonl(&path)?);
        }
        Ok(Self::from_listings(listings, page_size))
    }

    /// Make requests for `community` fail once `pages` pages were served.
    pub fn fail_after(mut self, community: &str, pages: usize) -> Self {
        self.fail_after_pages.insert(community.to_string(), pages);
        self
    }

    /// Every author name in the fixture.
    pub fn authors(&self) -> HashSet<String> {
        self.listings.values().flatten().filter_map(|p| p.author.clone()).collect()
    }
}

impl CommunityClient for FixtureClient {
    fn top_page(&self, community: &str, _window: TopWindow, cursor: Option<&str>, limit: usize) -> Result<Page, ClientError> {
        let posts = self
            .listings
            .get(community)
            .ok_or_else(|| ClientError { message: "unknown community".into(), retriable: false })?;
        let start: usize = match cursor {
            Some(c) => c.parse().map_err(|_| ClientError { message: format!("bad cursor {c:?}"), retriable: false })?,
            None => 0,
        };
        if let Some(&pages) = self.fail_after_pages.get(community) {
            if start >= pages * self.page_size {
                return Err(ClientError { message: "simulated outage".into(), retriable: true });
            }
        }
        let end = (start + limit.min(self.page_size)).min(posts.len());
        let next = (end < posts.len()).then(|| end.to_string());
        Ok(Page { posts: posts[start..end].to_vec(), next })
    }
}
