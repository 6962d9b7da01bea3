use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use depscreen_core::artifacts::{write_json, write_jsonl};
use depscreen_core::corpus::{
    build_corpus, load_communities, CommunityYield, FixtureClient, PartitionReport, Pseudonymizer, TopWindow,
};
use serde::Serialize;

use crate::report::create_dir;

/// Credentials for a live platform client.
const CREDENTIALS_ENV: &str = "DEPSCREEN_PLATFORM_CREDENTIALS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Window {
    All,
    Year,
    Month,
    Week,
    Day,
}

impl From<Window> for TopWindow {
    fn from(w: Window) -> Self {
        match w {
            Window::All => TopWindow::All,
            Window::Year => TopWindow::Year,
            Window::Month => TopWindow::Month,
            Window::Week => TopWindow::Week,
            Window::Day => TopWindow::Day,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// `name,follower_count,category` file.
    #[arg(long)]
    communities: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Directory of `<community>.jsonl` listings served in place of the platform.
    #[arg(long)]
    fixture: Option<PathBuf>,
    /// Posts requested per listing page.
    #[arg(long, default_value_t = 100)]
    page_size: usize,
    /// Ranking window of the top listing.
    #[arg(long, value_enum, default_value_t = Window::All)]
    window: Window,
}

#[derive(Serialize)]
struct CorpusReport<'a> {
    window: TopWindow,
    duplicates_removed: usize,
    partitions: PartitionReport,
    communities: &'a [CommunityYield],
}

pub fn run(args: &CorpusArgs) -> Result<()> {
    let communities = load_communities(&args.communities)?;
    let Some(fixture) = &args.fixture else {
        let hint = if std::env::var_os(CREDENTIALS_ENV).is_some() {
            "credentials are set, but this build bundles no live platform client"
        } else {
            "no live platform client is bundled"
        };
        bail!("{hint}; pass --fixture <dir> to build from canned listings");
    };
    let client = FixtureClient::from_dir(fixture, args.page_size)?;
    let window = args.window.into();
    let build = build_corpus(&communities, &client, window, &Pseudonymizer::random(), &client.authors())?;

    create_dir(&args.out)?;
    let corpus_path = args.out.join("corpus.jsonl");
    write_jsonl(&corpus_path, &build.documents)?;
    let report = CorpusReport {
        window,
        duplicates_removed: build.duplicates_removed,
        partitions: build.report,
        communities: &build.yields,
    };
    write_json(&args.out.join("report.json"), &report)?;

    for y in &build.yields {
        println!("{:<24} quota {:>6}  fetched {:>6}", y.name, y.quota, y.fetched);
    }
    println!(
        "{} documents ({} mental health, {} control, {} bytes); {} duplicates removed",
        build.documents.len(),
        build.report.mental_health_count,
        build.report.control_count,
        build.report.bytes,
        build.duplicates_removed
    );
    println!("wrote {}", corpus_path.display());
    Ok(())
}
