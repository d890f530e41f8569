use std::path::Path;

use anyhow::{bail, Context};
use chartqa_core::chart::ChartPackage;
use chartqa_core::ecosystem::{
    change_histories, classify_activity, cluster_activity, compute_maintainer_sets, detect_index_changes,
    detect_irregularities, period_metrics, resampled_group_test, Normalization, Period, Timeline,
};
use chartqa_core::ingest::{fetch_all, fetch_index, RepoIndex, Snapshot};
use chartqa_core::quality::{
    analyze_chart, detect_duplicates, learn_variability, DuplicateReport, KbStore, QualityReport,
    VariabilityKnowledgeBase,
};
use chartqa_core::render::Renderer;
use chartqa_core::report::{
    chart_metrics, emit_distributions, emit_dot, maintainer_metrics, template_metric_rows, template_metrics,
    ActivitySection, Report, RewriteSummary, Statistics, VariabilitySummary,
};
use chartqa_core::suggest::{build_issue_digests, emit_diff, plan_rewrite, verify_rewrite, write_outbox};
use chrono::{NaiveDate, Utc};
use rayon::prelude::*;
use serde::Deserialize;

use crate::args::{Command, Format, NormalizationArg};
use crate::config::Settings;
use crate::corpus::{open_store, Corpus};
use crate::output::Sink;

/// Outcome of a successful run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Clean,
    Findings,
}

impl Status {
    fn from_findings(found: bool) -> Self {
        if found {
            Status::Findings
        } else {
            Status::Clean
        }
    }
}

pub fn run(command: Command, settings: &Settings) -> anyhow::Result<Status> {
    let sink = Sink::new(settings.args.out.clone());
    match command {
        Command::Snapshot => snapshot(settings, &sink),
        Command::Analyze => analyze(settings, &sink),
        Command::Dupes => dupes(settings, &sink),
        Command::Variability => variability(settings, &sink),
        Command::Suggest { base_url, from } => suggest(settings, &sink, &base_url, &from),
        Command::Authorsets => authorsets(settings, &sink, Format::Json),
        Command::Graph => authorsets(settings, &sink, Format::Dot),
        Command::Irregularities => irregularities(settings, &sink),
        Command::Changes { from, to } => changes(settings, &sink, from.as_deref(), to.as_deref()),
        Command::Trends { periods, normalization, templates } => trends(settings, &sink, &periods, normalization, templates),
        Command::Stats { groups } => stats(settings, &sink, &groups),
        Command::Livecheck => livecheck(settings, &sink),
    }
}

fn pool(settings: &Settings) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(settings.jobs).build()?)
}

fn load_kb(settings: &Settings) -> anyhow::Result<VariabilityKnowledgeBase> {
    Ok(match &settings.args.kb {
        Some(p) if p.exists() => VariabilityKnowledgeBase::load(p)?,
        _ => VariabilityKnowledgeBase::new(),
    })
}

fn require(format: Format, allowed: &[Format], command: &str) -> anyhow::Result<()> {
    if !allowed.contains(&format) {
        bail!("{command} does not support --format {format:?}");
    }
    Ok(())
}

fn nonempty(corpus: &Corpus) -> anyhow::Result<()> {
    if corpus.packages.is_empty() && !corpus.failures.is_empty() {
        let f = &corpus.failures[0];
        bail!("no readable chart: {}: {}", f.location, f.reason);
    }
    Ok(())
}

fn quality_reports(
    settings: &Settings,
    packages: &[ChartPackage],
    kb: &VariabilityKnowledgeBase,
    engine: &dyn Renderer,
) -> anyhow::Result<Vec<QualityReport>> {
    let reports = pool(settings)?.install(|| {
        packages.par_iter().map(|p| analyze_chart(p, kb, &settings.duplicates, engine)).collect::<Result<Vec<_>, _>>()
    })?;
    Ok(reports)
}

fn duplicate_reports(settings: &Settings, packages: &[ChartPackage]) -> anyhow::Result<Vec<DuplicateReport>> {
    let reports = pool(settings)?
        .install(|| packages.par_iter().map(|p| detect_duplicates(p, &settings.duplicates)).collect::<Result<Vec<_>, _>>())?;
    Ok(reports)
}

fn snapshot(settings: &Settings, sink: &Sink) -> anyhow::Result<Status> {
    let store = open_store(settings)?;
    let (index, archives) = match (&settings.args.index, &settings.args.path) {
        (Some(url), _) => {
            let index = fetch_index(url)?;
            let archives = fetch_all(&index, settings.jobs)?;
            (index, archives)
        }
        (None, Some(_)) => {
            let c = Corpus::load(settings)?;
            (c.index, c.archives)
        }
        (None, None) => bail!("snapshot needs --index or --path"),
    };
    let id = store.record(&index, None, &archives, Utc::now())?;
    log::info!("recorded snapshot {id} with {} archives", archives.len());
    sink.emit("snapshot.txt", &format!("{id}\n"))?;
    Ok(Status::Clean)
}

fn analyze(settings: &Settings, sink: &Sink) -> anyhow::Result<Status> {
    let format = settings.format(Format::Json);
    require(format, &[Format::Json, Format::Csv], "analyze")?;
    let corpus = Corpus::load(settings)?;
    nonempty(&corpus)?;
    let engine = settings.renderer();
    let reports = quality_reports(settings, &corpus.packages, &load_kb(settings)?, engine.as_ref())?;
    let found = reports.iter().any(|r| !r.duplicate.groups.is_empty());
    if format == Format::Csv {
        sink.emit("values_per_chart.csv", &emit_distributions(&reports, None, None).values_per_chart)?;
        return Ok(Status::from_findings(found));
    }
    let mut report = Report::new(&corpus.subject);
    report.sections.template_metrics = Some(template_metric_rows(&template_metrics(&reports)));
    report.sections.quality = Some(reports);
    report.sections.failures = Some(corpus.failures);
    sink.emit("report.json", &report.to_json())?;
    Ok(Status::from_findings(found))
}

fn dupes(settings: &Settings, sink: &Sink) -> anyhow::Result<Status> {
    require(settings.format(Format::Json), &[Format::Json], "dupes")?;
    let corpus = Corpus::load(settings)?;
    nonempty(&corpus)?;
    let reports = duplicate_reports(settings, &corpus.packages)?;
    let found = reports.iter().any(|r| !r.groups.is_empty());
    let mut report = Report::new(&corpus.subject);
    report.sections.duplicates = Some(reports);
    report.sections.failures = Some(corpus.failures);
    sink.emit("report.json", &report.to_json())?;
    Ok(Status::from_findings(found))
}

fn variability(settings: &Settings, sink: &Sink) -> anyhow::Result<Status> {
    require(settings.format(Format::Json), &[Format::Json], "variability")?;
    let corpus = Corpus::load(settings)?;
    nonempty(&corpus)?;
    let engine = settings.renderer();
    let learn_all = |kb: &mut VariabilityKnowledgeBase| {
        corpus
            .packages
            .iter()
            .map(|p| {
                learn_variability(p, kb, engine.as_ref())
                    .map(|keys| VariabilitySummary { chart: p.chart_ref().file_name, keys })
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let summaries = match &settings.args.kb {
        Some(path) => KbStore::new(path).update(learn_all)?,
        None => learn_all(&mut VariabilityKnowledgeBase::new())?,
    };
    let mut report = Report::new(&corpus.subject);
    report.sections.variability = Some(summaries);
    report.sections.failures = Some(corpus.failures);
    sink.emit("report.json", &report.to_json())?;
    Ok(Status::Clean)
}

fn suggest(settings: &Settings, sink: &Sink, base_url: &str, from: &str) -> anyhow::Result<Status> {
    require(settings.format(Format::Json), &[Format::Json, Format::Csv], "suggest")?;
    let corpus = Corpus::load(settings)?;
    nonempty(&corpus)?;
    let engine = settings.renderer();
    let kb = load_kb(settings)?;
    let dups = duplicate_reports(settings, &corpus.packages)?;

    let rewrites = pool(settings)?.install(|| {
        corpus
            .packages
            .par_iter()
            .zip(&dups)
            .filter(|(_, d)| !d.groups.is_empty())
            .map(|(pkg, dup)| -> anyhow::Result<RewriteSummary> {
                let mut scratch = kb.clone();
                learn_variability(pkg, &mut scratch, engine.as_ref())?;
                let plan = plan_rewrite(pkg, dup)?;
                let verified = !plan.assignments.is_empty() && verify_rewrite(pkg, &plan, &scratch, engine.as_ref())?;
                let diff = if verified { Some(emit_diff(pkg, &plan)?) } else { None };
                Ok(RewriteSummary {
                    chart: pkg.chart_ref().file_name,
                    verified,
                    assignments: plan.assignments.len(),
                    replaced_occurrences: plan.assignments.iter().map(|a| a.targets.len()).sum(),
                    skipped_groups: plan.skipped.len(),
                    diff,
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()
    })?;

    let irregularities = detect_irregularities(&corpus.index);
    let digests = build_issue_digests(&corpus.index, &irregularities, &dups, base_url);
    for r in rewrites.iter().filter(|r| r.verified) {
        let base = r.chart.strip_suffix(".tgz").unwrap_or(&r.chart);
        sink.write_file(&format!("diffs/{base}.patch"), r.diff.as_deref().unwrap_or_default())?;
    }
    if let Some(dir) = sink.dir() {
        let written = write_outbox(&dir.join("outbox"), &digests, from, Utc::now())?;
        log::info!("wrote {} messages", written.len());
    }
    if settings.format(Format::Json) == Format::Csv {
        sink.emit("issues_per_email.csv", &emit_distributions(&[], None, Some(&digests)).issues_per_email)?;
        return Ok(Status::Clean);
    }
    let mut report = Report::new(&corpus.subject);
    report.sections.duplicates = Some(dups);
    report.sections.rewrites = Some(rewrites);
    report.sections.irregularities = Some(irregularities);
    report.sections.digests = Some(digests);
    sink.emit("report.json", &report.to_json())?;
    Ok(Status::Clean)
}

fn authorsets(settings: &Settings, sink: &Sink, default: Format) -> anyhow::Result<Status> {
    let format = settings.format(default);
    let corpus = Corpus::load(settings)?;
    nonempty(&corpus)?;
    let sets = compute_maintainer_sets(&corpus.index, settings.identity);
    let irregularities = detect_irregularities(&corpus.index);
    match format {
        Format::Dot => sink.emit("maintainers.dot", &emit_dot(&sets, &irregularities).text)?,
        Format::Csv => sink.emit("heatmap.csv", &emit_distributions(&[], Some(&sets), None).heatmap)?,
        Format::Json => {
            let mut report = Report::new(&corpus.subject);
            report.sections.maintainer_metrics = Some(maintainer_metrics(&sets, &irregularities));
            report.sections.chart_metrics = Some(chart_metrics(&corpus.index, &irregularities));
            report.sections.maintainer_sets = Some(sets.sets);
            report.sections.irregularities = Some(irregularities);
            sink.emit("report.json", &report.to_json())?;
        }
    }
    Ok(Status::Clean)
}

fn irregularities(settings: &Settings, sink: &Sink) -> anyhow::Result<Status> {
    require(settings.format(Format::Json), &[Format::Json], "irregularities")?;
    let corpus = Corpus::load(settings)?;
    nonempty(&corpus)?;
    let irr = detect_irregularities(&corpus.index);
    let found = !irr.is_empty();
    let mut report = Report::new(&corpus.subject);
    report.sections.chart_metrics = Some(chart_metrics(&corpus.index, &irr));
    report.sections.irregularities = Some(irr);
    sink.emit("report.json", &report.to_json())?;
    Ok(Status::from_findings(found))
}

fn stored_indices(settings: &Settings, from: Option<&str>, to: Option<&str>) -> anyhow::Result<(String, Vec<(String, RepoIndex)>)> {
    let store = open_store(settings)?;
    let ids: Vec<String> = store
        .list()?
        .into_iter()
        .filter(|id| from.is_none_or(|f| id.as_str() >= f) && to.is_none_or(|t| id.as_str() <= t))
        .collect();
    let indices = ids.into_iter().map(|id| store.load_index(&id).map(|ix| (id, ix))).collect::<Result<Vec<_>, _>>()?;
    Ok((store.root().display().to_string(), indices))
}

fn changes(settings: &Settings, sink: &Sink, from: Option<&str>, to: Option<&str>) -> anyhow::Result<Status> {
    require(settings.format(Format::Json), &[Format::Json], "changes")?;
    let (subject, indices) = stored_indices(settings, from, to)?;
    if indices.len() < 2 {
        bail!("changes need at least two snapshots, found {}", indices.len());
    }
    let sets: Vec<_> = indices.windows(2).map(|w| detect_index_changes(&w[0].0, &w[0].1, &w[1].0, &w[1].1)).collect();
    let initial: Vec<_> = indices[0].1.charts().cloned().collect();
    let profiles = classify_activity(&change_histories(&initial, &sets))?;
    let mut report = Report::new(&subject);
    report.sections.activity = Some(ActivitySection { clusters: cluster_activity(&profiles), profiles });
    report.sections.changes = Some(sets);
    sink.emit("report.json", &report.to_json())?;
    Ok(Status::Clean)
}

fn parse_period(text: &str) -> anyhow::Result<Period> {
    let (name, range) = text.split_once('=').context("period must look like NAME=FROM..TO")?;
    let (from, to) = range.split_once("..").context("period must look like NAME=FROM..TO")?;
    Ok(Period::new(name, from, to))
}

fn snapshot_date(id: &str) -> anyhow::Result<NaiveDate> {
    NaiveDate::parse_from_str(id, "%Y-%m-%d").with_context(|| format!("snapshot id {id} is not a date"))
}

fn trends(
    settings: &Settings,
    sink: &Sink,
    periods: &[String],
    normalization: NormalizationArg,
    templates: bool,
) -> anyhow::Result<Status> {
    require(settings.format(Format::Json), &[Format::Json], "trends")?;
    let (subject, indices) = stored_indices(settings, None, None)?;
    let (Some(first), Some(last)) = (indices.first(), indices.last()) else { bail!("snapshot store is empty") };
    let periods = if periods.is_empty() {
        vec![Period::new("all", &first.0, &last.0)]
    } else {
        periods.iter().map(|p| parse_period(p)).collect::<anyhow::Result<Vec<_>>>()?
    };
    let engine = settings.renderer();
    let kb = load_kb(settings)?;
    let store = open_store(settings)?;
    let mut timeline = Timeline::new();
    for (id, index) in indices {
        timeline.push(&id, snapshot_date(&id)?, index, settings.identity)?;
        if templates {
            let snap: Snapshot = store.load(&id)?;
            let packages: Vec<ChartPackage> = snap.packages.into_values().collect();
            let reports = quality_reports(settings, &packages, &kb, engine.as_ref())?;
            timeline.set_templates(&id, template_metrics(&reports))?;
        }
    }
    let mode = match normalization {
        NormalizationArg::Linear => Normalization::Linear,
        NormalizationArg::Geometric => Normalization::Geometric,
    };
    let mut report = Report::new(&subject);
    report.sections.trends = Some(period_metrics(&timeline, &periods, mode)?);
    sink.emit("report.json", &report.to_json())?;
    Ok(Status::Clean)
}

#[derive(Debug, Deserialize)]
struct Groups {
    n1: Vec<f64>,
    n2: Vec<f64>,
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

fn stats(settings: &Settings, sink: &Sink, groups: &Path) -> anyhow::Result<Status> {
    require(settings.format(Format::Json), &[Format::Json], "stats")?;
    let text = std::fs::read_to_string(groups).with_context(|| format!("reading {}", groups.display()))?;
    let g: Groups = serde_json::from_str(&text).with_context(|| format!("parsing {}", groups.display()))?;
    let iterations = settings.args.iterations.unwrap_or(1_000_000);
    let seed = settings.args.seed.unwrap_or(0);
    let result = resampled_group_test(&g.n1, &g.n2, iterations, seed)?;
    let mut report = Report::new(&groups.display().to_string());
    report.sections.statistics = Some(Statistics {
        test: "wilcoxon-signed-rank".into(),
        n1: g.n1.len(),
        n2: g.n2.len(),
        median_n1: median(&g.n1),
        median_n2: median(&g.n2),
        result,
    });
    sink.emit("report.json", &report.to_json())?;
    Ok(Status::Clean)
}

fn livecheck(settings: &Settings, sink: &Sink) -> anyhow::Result<Status> {
    let path = settings.args.path.as_ref().context("livecheck needs --path")?;
    let corpus = Corpus::from_path(path)?;
    if let Some(f) = corpus.failures.first() {
        bail!("unreadable chart {}: {}", f.location, f.reason);
    }
    if corpus.packages.is_empty() {
        bail!("no chart found at {}", path.display());
    }
    let dups: Vec<DuplicateReport> =
        duplicate_reports(settings, &corpus.packages)?.into_iter().filter(|d| !d.groups.is_empty()).collect();
    let irr = detect_irregularities(&corpus.index);
    let found = !dups.is_empty() || !irr.is_empty();
    let mut report = Report::new(&corpus.subject);
    report.sections.duplicates = Some(dups);
    report.sections.irregularities = Some(irr);
    sink.emit("report.json", &report.to_json())?;
    Ok(Status::from_findings(found))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periods_parse() {
        let p = parse_period("Q1=2018-05-15..2018-08-15").unwrap();
        assert_eq!(p, Period::new("Q1", "2018-05-15", "2018-08-15"));
        assert!(parse_period("2018-05-15..2018-08-15").is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
