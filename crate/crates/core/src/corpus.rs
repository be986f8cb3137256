//! Corpus ingestion and the aggregated interaction dataset.
//!
//! A corpus directory holds four CSV files (`topics.csv`, `users.csv`,
//! `posts.csv`, `prices.csv`). [`Corpus::load`] parses and validates them;
//! [`Corpus::build_dataset`] windows the posts and computes the sufficient
//! statistics the estimator works from.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, SecondsFormat, Utc};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::analytics::{PricePoint, PriceSeries};
use crate::error::CorpusError;

/// Length of a "month" in days, used for every window and horizon.
pub const MONTH_DAYS: i64 = 30;

pub const TOPICS_FILE: &str = "topics.csv";
pub const USERS_FILE: &str = "users.csv";
pub const POSTS_FILE: &str = "posts.csv";
pub const PRICES_FILE: &str = "prices.csv";

/// Ordered interaction kinds with one reference kind whose coefficient is pinned to 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionKindSet {
    names: Vec<String>,
    reference: usize,
}

impl InteractionKindSet {
    pub fn new<S: AsRef<str>>(names: &[S], reference_kind: &str) -> Result<Self, CorpusError> {
        if names.is_empty() {
            return Err(CorpusError::Kinds("at least one interaction kind is required".into()));
        }
        let names: Vec<String> = names.iter().map(|s| s.as_ref().trim().to_string()).collect();
        let mut seen = BTreeSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(CorpusError::Kinds("empty kind name".into()));
            }
            if matches!(name.as_str(), "topic_id" | "user_id" | "timestamp") {
                return Err(CorpusError::Kinds(format!("`{name}` is a reserved column")));
            }
            if !seen.insert(name.clone()) {
                return Err(CorpusError::Kinds(format!("duplicate kind `{name}`")));
            }
        }
        let reference = names
            .iter()
            .position(|n| n == reference_kind)
            .ok_or_else(|| CorpusError::Kinds(format!("reference kind `{reference_kind}` is not declared")))?;
        Ok(Self { names, reference })
    }

    /// Parse a comma-separated list such as `like,retweet,reply`.
    pub fn parse(list: &str, reference_kind: &str) -> Result<Self, CorpusError> {
        let names: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        Self::new(&names, reference_kind)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn reference(&self) -> usize {
        self.reference
    }

    pub fn reference_name(&self) -> &str {
        &self.names[self.reference]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// CSV column for a kind. The default kinds are stored under plural headers.
    pub fn column_name(&self, index: usize) -> String {
        match self.names[index].as_str() {
            "like" => "likes".to_string(),
            "retweet" => "retweets".to_string(),
            "reply" => "replies".to_string(),
            other => other.to_string(),
        }
    }

    fn column_index(&self, header: &str) -> Option<usize> {
        (0..self.len()).find(|&i| self.column_name(i) == header || self.names[i] == header)
    }
}

impl Default for InteractionKindSet {
    /// `like, retweet, reply` with `like` as reference.
    fn default() -> Self {
        Self {
            names: vec!["like".into(), "retweet".into(), "reply".into()],
            reference: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicMeta {
    pub topic_id: String,
    pub creation_date: NaiveDate,
    pub display_name: Option<String>,
}

impl TopicMeta {
    pub fn new(topic_id: impl Into<String>, creation_date: NaiveDate) -> Self {
        Self {
            topic_id: topic_id.into(),
            creation_date,
            display_name: None,
        }
    }

    /// The observation window `[creation 00:00 UTC, creation + 30 days)`.
    pub fn first_month_window(&self) -> (DateTime<Utc>, DateTime<Utc>) {
        first_month_window(self)
    }
}

pub fn first_month_window(topic: &TopicMeta) -> (DateTime<Utc>, DateTime<Utc>) {
    let start = midnight_utc(topic.creation_date);
    (start, start + Duration::days(MONTH_DAYS))
}

pub fn midnight_utc(date: NaiveDate) -> DateTime<Utc> {
    date.and_hms_opt(0, 0, 0).expect("midnight is valid").and_utc()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub follower_count: u64,
    pub bot_probability: Option<f64>,
}

/// One collected post; `counts` is aligned with the corpus' [`InteractionKindSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub topic_id: String,
    pub user_id: String,
    pub timestamp: DateTime<Utc>,
    pub counts: Vec<u64>,
}

/// Parsed, validated corpus files.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub kinds: InteractionKindSet,
    pub topics: Vec<TopicMeta>,
    pub profiles: BTreeMap<String, UserProfile>,
    pub posts: Vec<Post>,
    pub prices: BTreeMap<String, PriceSeries>,
    /// Non-fatal findings, e.g. ignored columns.
    pub warnings: Vec<String>,
}

/// Controls for [`Corpus::build_dataset`].
#[derive(Debug, Clone)]
pub struct DatasetOptions {
    /// Keep only posts with `timestamp <= cutoff`.
    pub cutoff: Option<DateTime<Utc>>,
    /// Error on posts whose user (or topic) is unknown; otherwise drop them.
    pub strict_users: bool,
    /// Restrict the dataset to these topics.
    pub topics: Option<BTreeSet<String>>,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            cutoff: None,
            strict_users: true,
            topics: None,
        }
    }
}

impl DatasetOptions {
    pub fn with_cutoff(cutoff: DateTime<Utc>) -> Self {
        Self {
            cutoff: Some(cutoff),
            ..Self::default()
        }
    }
}

impl Corpus {
    /// Read and validate a corpus directory.
    pub fn load(dir: impl AsRef<Path>, kinds: &InteractionKindSet) -> Result<Self, CorpusError> {
        let dir = dir.as_ref();
        let mut warnings = Vec::new();
        let topics = read_topics(&dir.join(TOPICS_FILE))?;
        let profiles = read_users(&dir.join(USERS_FILE))?;
        let posts = read_posts(&dir.join(POSTS_FILE), kinds, &mut warnings)?;
        let prices = read_prices(&dir.join(PRICES_FILE))?;
        for w in &warnings {
            warn!("{w}");
        }
        Ok(Self {
            kinds: kinds.clone(),
            topics,
            profiles,
            posts,
            prices,
            warnings,
        })
    }

    pub fn topic(&self, topic_id: &str) -> Option<&TopicMeta> {
        self.topics.iter().find(|t| t.topic_id == topic_id)
    }

    /// Aggregate posts into an [`InteractionDataset`].
    pub fn build_dataset(&self, options: &DatasetOptions) -> Result<InteractionDataset, CorpusError> {
        let mut topics = BTreeMap::new();
        for t in &self.topics {
            if topics.insert(t.topic_id.clone(), t.clone()).is_some() {
                return Err(CorpusError::DuplicateTopic(t.topic_id.clone()));
            }
        }
        if let Some(keep) = &options.topics {
            topics.retain(|id, _| keep.contains(id));
        }

        let mut aggregates = Aggregates::empty(topics.keys(), self.kinds.len());
        let mut posts = Vec::new();
        let mut dropped = 0usize;
        for post in &self.posts {
            if let Some(cutoff) = options.cutoff {
                if post.timestamp > cutoff {
                    continue;
                }
            }
            if let Some(keep) = &options.topics {
                if !keep.contains(&post.topic_id) {
                    continue;
                }
            }
            if !topics.contains_key(&post.topic_id) {
                if options.strict_users {
                    return Err(CorpusError::UnresolvedTopic(post.topic_id.clone()));
                }
                dropped += 1;
                continue;
            }
            let Some(profile) = self.profiles.get(&post.user_id) else {
                if options.strict_users {
                    return Err(CorpusError::UnresolvedUser {
                        topic_id: post.topic_id.clone(),
                        user_id: post.user_id.clone(),
                    });
                }
                dropped += 1;
                continue;
            };
            aggregates.add_post(post, profile.follower_count);
            posts.push(post.clone());
        }
        if dropped > 0 {
            warn!("dropped {dropped} posts with unresolved users or topics");
        }

        let referenced: BTreeSet<&str> = posts.iter().map(|p| p.user_id.as_str()).collect();
        let profiles = self
            .profiles
            .iter()
            .filter(|(id, _)| referenced.contains(id.as_str()))
            .map(|(id, p)| (id.clone(), p.clone()))
            .collect();

        Ok(InteractionDataset {
            kinds: self.kinds.clone(),
            topics,
            profiles,
            posts,
            aggregates,
            dropped_posts: dropped,
            cutoff: options.cutoff,
        })
    }

    /// Write the corpus in the directory layout [`Corpus::load`] reads.
    pub fn write(&self, dir: impl AsRef<Path>) -> io::Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;

        let mut w = BufWriter::new(File::create(dir.join(TOPICS_FILE))?);
        writeln!(w, "topic_id,creation_date,display_name")?;
        for t in &self.topics {
            writeln!(
                w,
                "{},{},{}",
                csv_field(&t.topic_id),
                t.creation_date,
                csv_field(t.display_name.as_deref().unwrap_or(""))
            )?;
        }
        w.flush()?;

        let mut w = BufWriter::new(File::create(dir.join(USERS_FILE))?);
        writeln!(w, "user_id,follower_count,bot_probability")?;
        for p in self.profiles.values() {
            let bot = p.bot_probability.map(|b| b.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{}", csv_field(&p.user_id), p.follower_count, bot)?;
        }
        w.flush()?;

        let mut w = BufWriter::new(File::create(dir.join(POSTS_FILE))?);
        let mut header = String::from("topic_id,user_id,timestamp");
        for i in 0..self.kinds.len() {
            header.push(',');
            header.push_str(&self.kinds.column_name(i));
        }
        writeln!(w, "{header}")?;
        for p in &self.posts {
            write!(
                w,
                "{},{},{}",
                csv_field(&p.topic_id),
                csv_field(&p.user_id),
                format_timestamp(p.timestamp)
            )?;
            for c in &p.counts {
                write!(w, ",{c}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;

        let mut w = BufWriter::new(File::create(dir.join(PRICES_FILE))?);
        writeln!(w, "topic_id,date,price")?;
        for series in self.prices.values() {
            for obs in series.observations() {
                writeln!(w, "{},{},{}", csv_field(series.topic_id()), obs.date, obs.price)?;
            }
        }
        w.flush()
    }
}

pub fn format_timestamp(ts: DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Per-(topic, user) sufficient statistics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserAggregate {
    /// m_cu
    pub posts: u64,
    /// n_cu
    pub interactions: u64,
    /// n_cui
    pub per_kind: Vec<u64>,
    pub follower_count: u64,
}

/// Per-topic sufficient statistics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TopicAggregate {
    /// n_c
    pub interactions: u64,
    pub per_kind: Vec<u64>,
    /// v_c = sum over users of m_cu * f_u
    pub exposure: u64,
    pub posts: u64,
    pub users: BTreeMap<String, UserAggregate>,
}

/// Sufficient statistics of a set of posts. Built in one pass; two partial
/// aggregates over disjoint posts combine with [`Aggregates::merge`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregates {
    /// n
    pub total: u64,
    /// l_i
    pub per_kind: Vec<u64>,
    pub per_topic: BTreeMap<String, TopicAggregate>,
}

impl Aggregates {
    pub fn empty<'a>(topics: impl IntoIterator<Item = &'a String>, kinds: usize) -> Self {
        let per_topic = topics
            .into_iter()
            .map(|t| {
                (
                    t.clone(),
                    TopicAggregate {
                        per_kind: vec![0; kinds],
                        ..TopicAggregate::default()
                    },
                )
            })
            .collect();
        Self {
            total: 0,
            per_kind: vec![0; kinds],
            per_topic,
        }
    }

    pub fn add_post(&mut self, post: &Post, follower_count: u64) {
        let kinds = self.per_kind.len();
        let post_total: u64 = post.counts.iter().sum();
        self.total += post_total;
        for (l, c) in self.per_kind.iter_mut().zip(&post.counts) {
            *l += c;
        }
        let topic = self
            .per_topic
            .entry(post.topic_id.clone())
            .or_insert_with(|| TopicAggregate {
                per_kind: vec![0; kinds],
                ..TopicAggregate::default()
            });
        topic.interactions += post_total;
        topic.exposure += follower_count;
        topic.posts += 1;
        for (l, c) in topic.per_kind.iter_mut().zip(&post.counts) {
            *l += c;
        }
        let user = topic
            .users
            .entry(post.user_id.clone())
            .or_insert_with(|| UserAggregate {
                per_kind: vec![0; kinds],
                follower_count,
                ..UserAggregate::default()
            });
        user.posts += 1;
        user.interactions += post_total;
        for (l, c) in user.per_kind.iter_mut().zip(&post.counts) {
            *l += c;
        }
    }

    pub fn merge(mut self, other: Aggregates) -> Aggregates {
        self.total += other.total;
        for (a, b) in self.per_kind.iter_mut().zip(&other.per_kind) {
            *a += b;
        }
        for (topic_id, theirs) in other.per_topic {
            let ours = self.per_topic.entry(topic_id).or_insert_with(|| TopicAggregate {
                per_kind: vec![0; theirs.per_kind.len()],
                ..TopicAggregate::default()
            });
            ours.interactions += theirs.interactions;
            ours.exposure += theirs.exposure;
            ours.posts += theirs.posts;
            for (a, b) in ours.per_kind.iter_mut().zip(&theirs.per_kind) {
                *a += b;
            }
            for (user_id, u) in theirs.users {
                match ours.users.get_mut(&user_id) {
                    Some(mine) => {
                        mine.posts += u.posts;
                        mine.interactions += u.interactions;
                        for (a, b) in mine.per_kind.iter_mut().zip(&u.per_kind) {
                            *a += b;
                        }
                    }
                    None => {
                        ours.users.insert(user_id, u);
                    }
                }
            }
        }
        self
    }
}

/// Windowed posts joined to profiles and topics, with all sufficient statistics.
/// Immutable once built.
#[derive(Debug, Clone)]
pub struct InteractionDataset {
    pub kinds: InteractionKindSet,
    pub topics: BTreeMap<String, TopicMeta>,
    /// Profiles of users referenced by retained posts.
    pub profiles: BTreeMap<String, UserProfile>,
    pub posts: Vec<Post>,
    pub aggregates: Aggregates,
    /// Posts dropped because their user or topic was unknown (non-strict mode).
    pub dropped_posts: usize,
    pub cutoff: Option<DateTime<Utc>>,
}

impl InteractionDataset {
    /// Total interactions n.
    pub fn total_interactions(&self) -> u64 {
        self.aggregates.total
    }

    /// n_c
    pub fn topic_interactions(&self, topic_id: &str) -> u64 {
        self.aggregates.per_topic.get(topic_id).map_or(0, |t| t.interactions)
    }

    /// l_i
    pub fn kind_interactions(&self, kind: usize) -> u64 {
        self.aggregates.per_kind[kind]
    }

    /// v_c
    pub fn exposure(&self, topic_id: &str) -> u64 {
        self.aggregates.per_topic.get(topic_id).map_or(0, |t| t.exposure)
    }

    pub fn topic_aggregate(&self, topic_id: &str) -> Option<&TopicAggregate> {
        self.aggregates.per_topic.get(topic_id)
    }

    /// Topics present in the dataset with no retained posts.
    pub fn uncovered_topics(&self) -> Vec<&str> {
        self.topics
            .keys()
            .filter(|id| self.aggregates.per_topic.get(*id).is_none_or(|t| t.posts == 0))
            .map(String::as_str)
            .collect()
    }

    pub fn is_covered(&self, topic_id: &str) -> bool {
        self.aggregates.per_topic.get(topic_id).is_some_and(|t| t.posts > 0)
    }
}

// ---------------------------------------------------------------------------
// CSV readers

struct Table {
    file: String,
    headers: Vec<String>,
    rows: Vec<(usize, csv::StringRecord)>,
}

impl Table {
    fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> Result<usize, CorpusError> {
        self.column(name).ok_or_else(|| CorpusError::MissingColumn {
            file: self.file.clone(),
            column: name.to_string(),
        })
    }

    fn row_error(&self, row: usize, column: &str, message: impl Into<String>) -> CorpusError {
        CorpusError::Row {
            file: self.file.clone(),
            row,
            column: column.to_string(),
            message: message.into(),
        }
    }
}

fn read_table(path: &Path) -> Result<Table, CorpusError> {
    let file = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    if !path.is_file() {
        return Err(CorpusError::MissingFile(path.to_path_buf()));
    }
    let handle = File::open(path).map_err(|source| CorpusError::Io {
        file: file.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(handle);
    let headers = reader
        .headers()
        .map_err(|e| CorpusError::Record {
            file: file.clone(),
            row: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CorpusError::Record {
            file: file.clone(),
            row,
            message: match e.kind() {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    format!("expected {expected_len} columns, found {len}")
                }
                _ => e.to_string(),
            },
        })?;
        rows.push((row, record));
    }
    Ok(Table { file, headers, rows })
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

/// Accepts RFC 3339, naive `YYYY-MM-DD[T ]HH:MM:SS` (taken as UTC) or a bare date.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(ts) = DateTime::parse_from_rfc3339(s) {
        return Some(ts.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(naive.and_utc());
        }
    }
    parse_date(s).map(midnight_utc)
}

fn parse_count(table: &Table, row: usize, column: &str, raw: &str) -> Result<u64, CorpusError> {
    if raw.is_empty() {
        return Ok(0);
    }
    raw.parse::<u64>().map_err(|_| {
        let msg = if raw.parse::<i64>().is_ok() || raw.parse::<f64>().is_ok_and(|v| v < 0.0) {
            format!("negative value {raw}")
        } else {
            format!("not a non-negative integer: `{raw}`")
        };
        table.row_error(row, column, msg)
    })
}

fn read_topics(path: &Path) -> Result<Vec<TopicMeta>, CorpusError> {
    let table = read_table(path)?;
    let id_col = table.require("topic_id")?;
    let date_col = table.require("creation_date")?;
    let name_col = table.column("display_name");
    let mut topics = Vec::with_capacity(table.rows.len());
    for (row, rec) in &table.rows {
        let topic_id = rec[id_col].to_string();
        if topic_id.is_empty() {
            return Err(table.row_error(*row, "topic_id", "empty topic_id"));
        }
        let creation_date = parse_date(&rec[date_col])
            .ok_or_else(|| table.row_error(*row, "creation_date", format!("invalid date `{}`", &rec[date_col])))?;
        let display_name = name_col.map(|c| rec[c].to_string()).filter(|s| !s.is_empty());
        topics.push(TopicMeta {
            topic_id,
            creation_date,
            display_name,
        });
    }
    Ok(topics)
}

fn read_users(path: &Path) -> Result<BTreeMap<String, UserProfile>, CorpusError> {
    let table = read_table(path)?;
    let id_col = table.require("user_id")?;
    let f_col = table.require("follower_count")?;
    let bot_col = table.column("bot_probability");
    let mut users = BTreeMap::new();
    for (row, rec) in &table.rows {
        let user_id = rec[id_col].to_string();
        if user_id.is_empty() {
            return Err(table.row_error(*row, "user_id", "empty user_id"));
        }
        let follower_count = parse_count(&table, *row, "follower_count", &rec[f_col])?;
        let bot_probability = match bot_col.map(|c| &rec[c]) {
            None | Some("") => None,
            Some(raw) => {
                let p: f64 = raw
                    .parse()
                    .map_err(|_| table.row_error(*row, "bot_probability", format!("not a number: `{raw}`")))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(table.row_error(*row, "bot_probability", format!("{p} outside [0, 1]")));
                }
                Some(p)
            }
        };
        let profile = UserProfile {
            user_id: user_id.clone(),
            follower_count,
            bot_probability,
        };
        if users.insert(user_id.clone(), profile).is_some() {
            return Err(CorpusError::DuplicateUser(user_id));
        }
    }
    Ok(users)
}

fn read_posts(path: &Path, kinds: &InteractionKindSet, warnings: &mut Vec<String>) -> Result<Vec<Post>, CorpusError> {
    let table = read_table(path)?;
    let topic_col = table.require("topic_id")?;
    let user_col = table.require("user_id")?;
    let ts_col = table.require("timestamp")?;

    let mut kind_cols: Vec<Option<usize>> = vec![None; kinds.len()];
    for (col, header) in table.headers.iter().enumerate() {
        if col == topic_col || col == user_col || col == ts_col {
            continue;
        }
        match kinds.column_index(header) {
            Some(k) => kind_cols[k] = Some(col),
            None => warnings.push(format!("{}: ignoring unknown column `{header}`", table.file)),
        }
    }
    for (k, col) in kind_cols.iter().enumerate() {
        if col.is_none() {
            warnings.push(format!(
                "{}: no column for kind `{}`; counts taken as 0",
                table.file,
                kinds.names()[k]
            ));
        }
    }

    let mut posts = Vec::with_capacity(table.rows.len());
    for (row, rec) in &table.rows {
        let topic_id = rec[topic_col].to_string();
        if topic_id.is_empty() {
            return Err(table.row_error(*row, "topic_id", "empty topic_id"));
        }
        let user_id = rec[user_col].to_string();
        if user_id.is_empty() {
            return Err(table.row_error(*row, "user_id", "empty user_id"));
        }
        let timestamp = parse_timestamp(&rec[ts_col])
            .ok_or_else(|| table.row_error(*row, "timestamp", format!("invalid timestamp `{}`", &rec[ts_col])))?;
        let mut counts = vec![0u64; kinds.len()];
        for (k, col) in kind_cols.iter().enumerate() {
            if let Some(col) = col {
                counts[k] = parse_count(&table, *row, &table.headers[*col], &rec[*col])?;
            }
        }
        posts.push(Post {
            topic_id,
            user_id,
            timestamp,
            counts,
        });
    }
    Ok(posts)
}

fn read_prices(path: &Path) -> Result<BTreeMap<String, PriceSeries>, CorpusError> {
    let table = read_table(path)?;
    let topic_col = table.require("topic_id")?;
    let date_col = table.require("date")?;
    let price_col = table.require("price")?;
    let mut grouped: BTreeMap<String, Vec<(usize, PricePoint)>> = BTreeMap::new();
    for (row, rec) in &table.rows {
        let date = parse_date(&rec[date_col])
            .ok_or_else(|| table.row_error(*row, "date", format!("invalid date `{}`", &rec[date_col])))?;
        let raw = &rec[price_col];
        let price: f64 = raw
            .parse()
            .map_err(|_| table.row_error(*row, "price", format!("not a number: `{raw}`")))?;
        if !(price.is_finite() && price > 0.0) {
            return Err(table.row_error(*row, "price", format!("price must be positive, got {raw}")));
        }
        grouped
            .entry(rec[topic_col].to_string())
            .or_default()
            .push((*row, PricePoint { date, price }));
    }
    let mut out = BTreeMap::new();
    for (topic_id, mut obs) in grouped {
        obs.sort_by_key(|(_, p)| p.date);
        for pair in obs.windows(2) {
            if pair[0].1.date == pair[1].1.date {
                return Err(table.row_error(
                    pair[1].0,
                    "date",
                    format!("duplicate price date {} for `{topic_id}`", pair[1].1.date),
                ));
            }
        }
        let series = PriceSeries::new(topic_id.clone(), obs.into_iter().map(|(_, p)| p).collect())
            .expect("validated above");
        out.insert(topic_id, series);
    }
    Ok(out)
}
