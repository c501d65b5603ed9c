//! The ten ranking features of a (query entity, event, language) triple.

use std::path::Path;

use chrono::NaiveDate;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::geo::{haversine, point_to_polygon, Coord};
use crate::kg::{sorted_intersection_len, EntityId, KnowledgeGraph, LanguageCode, TimeSpan};
use crate::tsv;

/// Number of features in a [`FeatureVector`].
pub const FEATURE_COUNT: usize = 10;

/// Column names in [`FeatureVector`] field order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "language_distance",
    "pair_distance",
    "interval_overlap",
    "begin_time_distance",
    "incoming_links",
    "outgoing_links",
    "shared_incoming_links",
    "shared_outgoing_links",
    "milne_witten",
    "embedding_similarity",
];

/// Feature groups used for leave-one-group-out analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureGroup {
    Spatial,
    Temporal,
    Links,
    Embeddings,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::Spatial,
        FeatureGroup::Temporal,
        FeatureGroup::Links,
        FeatureGroup::Embeddings,
    ];

    /// Column indexes belonging to this group.
    pub fn columns(self) -> &'static [usize] {
        match self {
            FeatureGroup::Spatial => &[0, 1],
            FeatureGroup::Temporal => &[2, 3],
            FeatureGroup::Links => &[4, 5, 6, 7, 8],
            FeatureGroup::Embeddings => &[9],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Spatial => "spatial",
            FeatureGroup::Temporal => "temporal",
            FeatureGroup::Links => "links",
            FeatureGroup::Embeddings => "embeddings",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureVector {
    /// km from the event to the nearest country of the language
    pub language_distance: f64,
    /// km between the closest coordinates of event and query
    pub pair_distance: f64,
    /// days
    pub interval_overlap: f64,
    /// days
    pub begin_time_distance: f64,
    pub incoming_links: f64,
    pub outgoing_links: f64,
    pub shared_incoming_links: f64,
    pub shared_outgoing_links: f64,
    pub milne_witten: f64,
    pub embedding_similarity: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.language_distance,
            self.pair_distance,
            self.interval_overlap,
            self.begin_time_distance,
            self.incoming_links,
            self.outgoing_links,
            self.shared_incoming_links,
            self.shared_outgoing_links,
            self.milne_witten,
            self.embedding_similarity,
        ]
    }

    pub fn from_array(a: [f64; FEATURE_COUNT]) -> Self {
        FeatureVector {
            language_distance: a[0],
            pair_distance: a[1],
            interval_overlap: a[2],
            begin_time_distance: a[3],
            incoming_links: a[4],
            outgoing_links: a[5],
            shared_incoming_links: a[6],
            shared_outgoing_links: a[7],
            milne_witten: a[8],
            embedding_similarity: a[9],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    /// Stand-in distance when coordinates are missing (half the equator, km).
    pub missing_distance: f64,
    /// Stand-in day count when dates are missing (about a century).
    pub missing_time: f64,
    /// End date assumed for intervals without one.
    pub reference_date: NaiveDate,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            missing_distance: 20015.09,
            missing_time: 36500.0,
            reference_date: NaiveDate::from_ymd_opt(2021, 12, 31).expect("valid date"),
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.missing_distance > 0.0 && self.missing_time > 0.0) {
            return Err(Error::Config("feature sentinels must be positive".into()));
        }
        Ok(())
    }
}

fn min_pairwise<A, B>(a: &[A], b: &[B], f: impl Fn(&A, &B) -> f64) -> Option<f64> {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| (x, y)))
        .map(|(x, y)| f(x, y))
        .reduce(f64::min)
}

/// Distance from the event's coordinates to the closest country polygon of `language`.
pub fn language_distance(
    event: &EntityId,
    language: &LanguageCode,
    graph: &KnowledgeGraph,
    cfg: &FeatureConfig,
) -> Result<f64> {
    let polygons = graph
        .countries()
        .polygons(language)
        .filter(|p| !p.is_empty())
        .ok_or_else(|| Error::NoPolygons(language.to_string()))?;
    let coords = graph.resolve_coordinates(event)?;
    Ok(min_pairwise(coords, polygons, |c, (_, poly)| point_to_polygon(*c, poly))
        .unwrap_or(cfg.missing_distance))
}

/// Smallest great-circle distance between any coordinate of `v` and any of `e`.
pub fn pair_distance(
    event: &EntityId,
    entity: &EntityId,
    graph: &KnowledgeGraph,
    cfg: &FeatureConfig,
) -> Result<f64> {
    let a = graph.resolve_coordinates(event)?;
    let b = graph.resolve_coordinates(entity)?;
    Ok(min_pairwise(a, b, |x: &Coord, y: &Coord| haversine(*x, *y)).unwrap_or(cfg.missing_distance))
}

fn closed_interval(span: Option<TimeSpan>, cfg: &FeatureConfig) -> Option<(NaiveDate, NaiveDate)> {
    let span = span?;
    let start = span.start?;
    let end = span.end.unwrap_or(cfg.reference_date);
    Some((start, end.max(start)))
}

/// Days shared by both intervals (end minus start), 0 if disjoint or undated.
pub fn interval_overlap(
    event: &EntityId,
    entity: &EntityId,
    graph: &KnowledgeGraph,
    cfg: &FeatureConfig,
) -> Result<f64> {
    let v = closed_interval(graph.entity(event)?.time, cfg);
    let e = closed_interval(graph.entity(entity)?.time, cfg);
    Ok(match (v, e) {
        (Some((vs, ve)), Some((es, ee))) => {
            if vs > ee || es > ve {
                0.0
            } else {
                (ve.min(ee) - vs.max(es)).num_days() as f64
            }
        }
        _ => 0.0,
    })
}

/// |start(v) − start(e)| in days.
pub fn begin_time_distance(
    event: &EntityId,
    entity: &EntityId,
    graph: &KnowledgeGraph,
    cfg: &FeatureConfig,
) -> Result<f64> {
    let start = |id: &EntityId| -> Result<Option<NaiveDate>> {
        Ok(graph.entity(id)?.time.and_then(|t| t.start))
    };
    Ok(match (start(event)?, start(entity)?) {
        (Some(a), Some(b)) => (a - b).num_days().abs() as f64,
        _ => cfg.missing_time,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkCounts {
    pub incoming: usize,
    pub outgoing: usize,
    pub shared_incoming: usize,
    pub shared_outgoing: usize,
}

/// Degree of the event plus links it shares with the query entity.
pub fn link_features(
    entity: &EntityId,
    event: &EntityId,
    language: &LanguageCode,
    graph: &KnowledgeGraph,
) -> Result<LinkCounts> {
    let links = graph.link_set(language)?;
    Ok(LinkCounts {
        incoming: links.in_degree(event),
        outgoing: links.out_degree(event),
        shared_incoming: links.shared_in(event, entity),
        shared_outgoing: links.shared_out(event, entity),
    })
}

/// Milne-Witten relatedness from in-link counts, for any logarithm.
fn relatedness_with(
    in_a: usize,
    in_b: usize,
    shared: usize,
    total: usize,
    log: impl Fn(f64) -> f64,
) -> Result<f64> {
    if in_a == 0 || in_b == 0 || shared == 0 {
        return Ok(0.0);
    }
    let (lo, hi) = (in_a.min(in_b) as f64, in_a.max(in_b) as f64);
    let denominator = log(total as f64) - log(lo);
    if total <= in_a.min(in_b) || denominator <= 0.0 {
        return Err(Error::DegenerateRelatedness {
            total,
            min_in: in_a.min(in_b),
        });
    }
    let score = 1.0 - (log(hi) - log(shared as f64)) / denominator;
    Ok(score.clamp(0.0, 1.0))
}

/// Milne-Witten relatedness from in-link set sizes, natural log.
pub fn milne_witten_counts(in_a: usize, in_b: usize, shared: usize, total: usize) -> Result<f64> {
    relatedness_with(in_a, in_b, shared, total, f64::ln)
}

/// Link-overlap relatedness of entity and event in `language`; `|E|` is the
/// entity count of the graph.
pub fn milne_witten(
    entity: &EntityId,
    event: &EntityId,
    language: &LanguageCode,
    graph: &KnowledgeGraph,
) -> Result<f64> {
    let links = graph.link_set(language)?;
    let (Some(a), Some(b)) = (links.node_index(entity), links.node_index(event)) else {
        return Ok(0.0);
    };
    let (in_a, in_b) = (links.in_indices(a), links.in_indices(b));
    let shared = sorted_intersection_len(in_a, in_b);
    milne_witten_counts(in_a.len(), in_b.len(), shared, graph.entity_count())
}

/// All ten features for (query entity, event, language).
pub fn extract(
    entity: &EntityId,
    event: &EntityId,
    language: &LanguageCode,
    graph: &KnowledgeGraph,
    embeddings: Option<&EmbeddingTable>,
    cfg: &FeatureConfig,
) -> Result<FeatureVector> {
    let links = link_features(entity, event, language, graph)?;
    Ok(FeatureVector {
        language_distance: language_distance(event, language, graph, cfg)?,
        pair_distance: pair_distance(event, entity, graph, cfg)?,
        interval_overlap: interval_overlap(event, entity, graph, cfg)?,
        begin_time_distance: begin_time_distance(event, entity, graph, cfg)?,
        incoming_links: links.incoming as f64,
        outgoing_links: links.outgoing as f64,
        shared_incoming_links: links.shared_incoming as f64,
        shared_outgoing_links: links.shared_outgoing as f64,
        milne_witten: milne_witten(entity, event, language, graph)?,
        embedding_similarity: embeddings
            .and_then(|t| t.similarity(entity, event))
            .unwrap_or(0.0),
    })
}

/// One row of the feature matrix export.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub query: EntityId,
    pub event: EntityId,
    pub language: LanguageCode,
    pub rel: f64,
    pub features: FeatureVector,
}

/// Writes `query<TAB>event<TAB>lang<TAB>rel<TAB>f1..f10` in [`FEATURE_NAMES`] order.
pub fn save_feature_rows(rows: &[FeatureRow], path: &Path) -> Result<()> {
    tsv::write_file(path, |w| {
        write!(w, "# query\tevent\tlang\trel")?;
        for name in FEATURE_NAMES {
            write!(w, "\t{name}")?;
        }
        writeln!(w)?;
        for r in rows {
            write!(w, "{}\t{}\t{}\t{}", r.query, r.event, r.language, r.rel)?;
            for x in r.features.to_array() {
                write!(w, "\t{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

pub fn load_feature_rows(path: &Path) -> Result<Vec<FeatureRow>> {
    let mut rows = Vec::new();
    tsv::for_each_record(path, |rec| {
        let bad = |m: String| Error::parse(path, rec.line, m);
        if rec.fields.len() != 4 + FEATURE_COUNT {
            return Err(bad(format!(
                "expected {} fields, found {}",
                4 + FEATURE_COUNT,
                rec.fields.len()
            )));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number `{s}`")));
        let mut values = [0.0; FEATURE_COUNT];
        for (slot, s) in values.iter_mut().zip(&rec.fields[4..]) {
            *slot = num(s)?;
        }
        rows.push(FeatureRow {
            query: EntityId::new(rec.fields[0]).map_err(bad)?,
            event: EntityId::new(rec.fields[1]).map_err(bad)?,
            language: LanguageCode::new(rec.fields[2]).map_err(|e| bad(e.to_string()))?,
            rel: num(rec.fields[3])?,
            features: FeatureVector::from_array(values),
        });
        Ok(())
    })?;
    Ok(rows)
}
