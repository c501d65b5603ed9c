//! Language-specific knowledge graph: entities, events, per-language link
//! sets and per-language country polygons.

mod links;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::geo::{Coord, Polygon};
use crate::tsv;

pub use links::LinkSet;
pub(crate) use links::sorted_intersection_len;

/// Opaque, non-empty entity identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(s: impl Into<String>) -> std::result::Result<Self, String> {
        let s = s.into();
        if s.is_empty() {
            return Err("empty entity id".to_string());
        }
        if s.contains(['\t', '\n']) {
            return Err(format!("entity id `{s}` contains tab or newline"));
        }
        Ok(EntityId(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Lowercase two-letter language code such as `de`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LanguageCode(String);

impl LanguageCode {
    pub fn new(s: &str) -> Result<Self> {
        if s.len() == 2 && s.bytes().all(|b| b.is_ascii_lowercase()) {
            Ok(LanguageCode(s.to_string()))
        } else {
            Err(Error::InvalidLanguage(s.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Start/end dates; either side may be missing. A missing end means the
/// interval is still ongoing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeSpan {
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityRecord {
    pub id: EntityId,
    pub label: String,
    pub is_event: bool,
    pub time: Option<TimeSpan>,
    pub coords: Vec<Coord>,
    pub place_links: Vec<EntityId>,
}

impl EntityRecord {
    /// Parses one line of the entities file.
    pub fn parse_fields(fields: &[&str]) -> std::result::Result<Self, String> {
        if !(3..=7).contains(&fields.len()) {
            return Err(format!("expected 3 to 7 fields, found {}", fields.len()));
        }
        let field = |i: usize| fields.get(i).map_or("", |s| s.trim());
        let id = EntityId::new(field(0))?;
        let is_event = match field(2) {
            "1" => true,
            "0" => false,
            other => return Err(format!("is_event must be 0 or 1, got `{other}`")),
        };
        let date = |s: &str| -> std::result::Result<Option<NaiveDate>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                NaiveDate::parse_from_str(s, "%Y-%m-%d")
                    .map(Some)
                    .map_err(|e| format!("bad date `{s}`: {e}"))
            }
        };
        let start = date(field(3))?;
        let end = date(field(4))?;
        if let (Some(s), Some(e)) = (start, end) {
            if s > e {
                return Err(format!("start {s} after end {e}"));
            }
        }
        let time = (start.is_some() || end.is_some()).then_some(TimeSpan { start, end });
        let coords = Coord::parse_list(field(5))?;
        let place_links = if field(6).is_empty() {
            Vec::new()
        } else {
            field(6)
                .split(';')
                .map(|s| EntityId::new(s.trim()))
                .collect::<std::result::Result<_, _>>()?
        };
        Ok(EntityRecord {
            id,
            label: field(1).to_string(),
            is_event,
            time,
            coords,
            place_links,
        })
    }
}

/// Loads the entities file; duplicate ids and out-of-range coordinates are errors.
pub fn load_entities(path: &Path) -> Result<BTreeMap<EntityId, EntityRecord>> {
    let mut out = BTreeMap::new();
    tsv::for_each_record(path, |rec| {
        let entity =
            EntityRecord::parse_fields(&rec.fields).map_err(|m| Error::parse(path, rec.line, m))?;
        if out.contains_key(&entity.id) {
            return Err(Error::parse(
                path,
                rec.line,
                Error::DuplicateEntity(entity.id.to_string()).to_string(),
            ));
        }
        out.insert(entity.id.clone(), entity);
        Ok(())
    })?;
    Ok(out)
}

/// Official-language country polygons per language.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountryPolygonTable {
    by_language: BTreeMap<LanguageCode, Vec<(String, Polygon)>>,
}

impl CountryPolygonTable {
    pub fn insert(&mut self, language: LanguageCode, country: impl Into<String>, poly: Polygon) {
        self.by_language
            .entry(language)
            .or_default()
            .push((country.into(), poly));
    }

    /// Loads `lang<TAB>country_id<TAB>lat,lon;lat,lon;...`.
    pub fn load(path: &Path) -> Result<Self> {
        let mut table = CountryPolygonTable::default();
        tsv::for_each_record(path, |rec| {
            let bad = |m: String| Error::parse(path, rec.line, m);
            if rec.fields.len() != 3 {
                return Err(bad(format!("expected 3 fields, found {}", rec.fields.len())));
            }
            let lang = LanguageCode::new(rec.fields[0].trim()).map_err(|e| bad(e.to_string()))?;
            let vertices = Coord::parse_list(rec.fields[2]).map_err(bad)?;
            let poly = Polygon::new(vertices).map_err(|e| bad(e.to_string()))?;
            table.insert(lang, rec.fields[1].trim(), poly);
            Ok(())
        })?;
        Ok(table)
    }

    pub fn polygons(&self, language: &LanguageCode) -> Option<&[(String, Polygon)]> {
        self.by_language.get(language).map(Vec::as_slice)
    }

    pub fn languages(&self) -> impl Iterator<Item = &LanguageCode> {
        self.by_language.keys()
    }
}

/// Immutable, fully indexed knowledge graph.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: BTreeMap<EntityId, EntityRecord>,
    events: BTreeSet<EntityId>,
    links: BTreeMap<LanguageCode, LinkSet>,
    countries: CountryPolygonTable,
    resolved: HashMap<EntityId, Vec<Coord>>,
}

impl KnowledgeGraph {
    pub fn new(
        entities: BTreeMap<EntityId, EntityRecord>,
        links: impl IntoIterator<Item = LinkSet>,
        countries: CountryPolygonTable,
    ) -> Self {
        let events = entities
            .values()
            .filter(|e| e.is_event)
            .map(|e| e.id.clone())
            .collect();
        let links: BTreeMap<_, _> = links
            .into_iter()
            .map(|ls| (ls.language().clone(), ls))
            .collect();
        for ls in links.values() {
            let unknown = ls
                .nodes()
                .iter()
                .filter(|n| !entities.contains_key(*n))
                .count();
            if unknown > 0 {
                log::warn!(
                    "links[{}]: {unknown} endpoints are not in the entity table",
                    ls.language()
                );
            }
        }
        let resolved = entities
            .keys()
            .map(|id| (id.clone(), resolve_uncached(&entities, id)))
            .collect();
        KnowledgeGraph {
            entities,
            events,
            links,
            countries,
            resolved,
        }
    }

    pub fn entities(&self) -> &BTreeMap<EntityId, EntityRecord> {
        &self.entities
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn events(&self) -> &BTreeSet<EntityId> {
        &self.events
    }

    pub fn is_event(&self, id: &EntityId) -> bool {
        self.events.contains(id)
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.entities.contains_key(id)
    }

    pub fn countries(&self) -> &CountryPolygonTable {
        &self.countries
    }

    pub fn languages(&self) -> impl Iterator<Item = &LanguageCode> {
        self.links.keys()
    }

    pub fn entity(&self, id: &EntityId) -> Result<&EntityRecord> {
        self.entities.get(id).ok_or_else(|| self.unknown(id.as_str()))
    }

    /// Error for an unknown id, carrying up to three closest known ids.
    pub fn unknown(&self, id: &str) -> Error {
        let mut scored: Vec<(usize, &EntityId)> = self
            .entities
            .keys()
            .map(|k| (strsim::levenshtein(id, k.as_str()), k))
            .collect();
        scored.sort();
        Error::UnknownEntity {
            id: id.to_string(),
            suggestions: scored.iter().take(3).map(|(_, k)| k.to_string()).collect(),
        }
    }

    pub fn link_set(&self, language: &LanguageCode) -> Result<&LinkSet> {
        self.links
            .get(language)
            .ok_or_else(|| Error::UnknownLanguage(language.to_string()))
    }

    pub fn in_neighbors(&self, id: &EntityId, language: &LanguageCode) -> Result<Vec<&EntityId>> {
        Ok(self.link_set(language)?.in_neighbors(id))
    }

    pub fn out_neighbors(&self, id: &EntityId, language: &LanguageCode) -> Result<Vec<&EntityId>> {
        Ok(self.link_set(language)?.out_neighbors(id))
    }

    /// Coordinates of an entity: its own if any, otherwise the union of the
    /// coordinates of its linked places, otherwise none.
    pub fn resolve_coordinates(&self, id: &EntityId) -> Result<&[Coord]> {
        self.resolved
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| self.unknown(id.as_str()))
    }
}

fn resolve_uncached(entities: &BTreeMap<EntityId, EntityRecord>, id: &EntityId) -> Vec<Coord> {
    let rec = &entities[id];
    if !rec.coords.is_empty() {
        return rec.coords.clone();
    }
    let mut out: Vec<Coord> = Vec::new();
    for place in &rec.place_links {
        if let Some(p) = entities.get(place) {
            for c in &p.coords {
                if !out.contains(c) {
                    out.push(*c);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn id(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    fn entities(lines: &str) -> Result<BTreeMap<EntityId, EntityRecord>> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(lines.as_bytes()).unwrap();
        load_entities(f.path())
    }

    #[test]
    fn open_ended_event_without_coords() {
        let es = entities("Q1\tCOVID-19 pandemic\t1\t2019-12-01\t\t\t\n").unwrap();
        let e = &es[&id("Q1")];
        assert!(e.is_event);
        assert_eq!(e.label, "COVID-19 pandemic");
        let t = e.time.unwrap();
        assert_eq!(t.start, NaiveDate::from_ymd_opt(2019, 12, 1));
        assert_eq!(t.end, None);
        assert!(e.coords.is_empty());
    }

    #[test]
    fn coordinate_list_and_comments() {
        let es = entities("# header\nB\tBerlin\t0\t\t\t52.52,13.405;48.85,2.35\t\n").unwrap();
        assert_eq!(es[&id("B")].coords.len(), 2);
        assert!(es[&id("B")].time.is_none());
    }

    #[test]
    fn out_of_range_latitude() {
        let err = entities("X\tx\t0\t\t\t95.0,10.0\t\n").unwrap_err();
        assert!(err.to_string().contains("coordinate out of range"), "{err}");
    }

    #[test]
    fn duplicate_id_rejected_with_line() {
        let err = entities("A\ta\t0\nA\tb\t0\n").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_lines() {
        assert!(entities("A\ta\n").is_err());
        assert!(entities("A\ta\t2\n").is_err());
        assert!(entities("A\ta\t1\t2020-13-01\n").is_err());
        assert!(entities("A\ta\t1\t2020-02-01\t2020-01-01\n").is_err());
    }

    fn graph() -> KnowledgeGraph {
        let es = entities(
            "berlin\tBerlin\t0\t\t\t52.52,13.405\t\n\
             paris\tParis\t0\t\t\t48.8566,2.3522\t\n\
             ev1\tEvent with places\t1\t2020-01-01\t2020-01-02\t\tberlin;paris;nowhere\n\
             ev2\tEvent with own coords\t1\t\t\t1.0,2.0\tberlin\n\
             ev3\tBare\t1\t\t\t\t\n",
        )
        .unwrap();
        let de = LanguageCode::new("de").unwrap();
        let ls = LinkSet::from_edges(
            de,
            [("x", "ev1"), ("y", "ev1")]
                .iter()
                .map(|(a, b)| (id(a), id(b))),
        );
        KnowledgeGraph::new(es, [ls], CountryPolygonTable::default())
    }

    #[test]
    fn coordinate_resolution_precedence() {
        let g = graph();
        assert_eq!(g.resolve_coordinates(&id("ev2")).unwrap(), &[Coord::new(1.0, 2.0).unwrap()]);
        let via_places = g.resolve_coordinates(&id("ev1")).unwrap();
        assert_eq!(via_places.len(), 2);
        assert_eq!(via_places[0], Coord::new(52.52, 13.405).unwrap());
        assert!(g.resolve_coordinates(&id("ev3")).unwrap().is_empty());
        assert!(matches!(
            g.resolve_coordinates(&id("nope")),
            Err(Error::UnknownEntity { .. })
        ));
    }

    #[test]
    fn neighbors_by_language() {
        let g = graph();
        let de = LanguageCode::new("de").unwrap();
        assert_eq!(g.in_neighbors(&id("ev1"), &de).unwrap(), vec![&id("x"), &id("y")]);
        assert!(g.in_neighbors(&id("ev3"), &de).unwrap().is_empty());
        let fr = LanguageCode::new("fr").unwrap();
        assert!(matches!(
            g.in_neighbors(&id("ev1"), &fr),
            Err(Error::UnknownLanguage(_))
        ));
    }

    #[test]
    fn suggestions_for_unknown_ids() {
        let g = graph();
        match g.entity(&id("berlni")) {
            Err(Error::UnknownEntity { suggestions, .. }) => assert_eq!(suggestions[0], "berlin"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn language_code_validation() {
        assert!(LanguageCode::new("de").is_ok());
        assert!(LanguageCode::new("DE").is_err());
        assert!(LanguageCode::new("deu").is_err());
    }

    #[test]
    fn countries_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "de\tDE\t47,6;55,6;55,15;47,15").unwrap();
        let t = CountryPolygonTable::load(f.path()).unwrap();
        let de = LanguageCode::new("de").unwrap();
        assert_eq!(t.polygons(&de).unwrap().len(), 1);

        let mut bad = tempfile::NamedTempFile::new().unwrap();
        writeln!(bad, "de\tDE\t47,6;55,6").unwrap();
        assert!(CountryPolygonTable::load(bad.path()).is_err());
    }
}
