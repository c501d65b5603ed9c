//! Deterministic synthetic data: the bundled toy dataset and generators used
//! by the end-to-end checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{FeatureRow, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
use crate::kg::{EntityId, LanguageCode, LinkSet};
use crate::ltr::{QueryGroup, TrainingSet};

/// Query entity whose best event is planted in the toy data.
pub const PLANTED_QUERY: &str = "berlin_wall";
/// Event that should rank first for [`PLANTED_QUERY`] in [`PLANTED_LANGUAGE`].
pub const PLANTED_EVENT: &str = "wall_construction";
pub const PLANTED_LANGUAGE: &str = "de";

const TOY_SEED: u64 = 20_211_231;
const TOPICS: usize = 30;
const EVENTS: usize = 64;

/// File contents of the toy dataset, keyed by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset {
    pub files: BTreeMap<String, String>,
}

struct Cluster {
    lang: &'static str,
    /// lat/lon box of the home country
    lat: (f64, f64),
    lon: (f64, f64),
}

const CLUSTERS: [Cluster; 2] = [
    Cluster {
        lang: "de",
        lat: (47.5, 54.5),
        lon: (8.0, 14.5),
    },
    Cluster {
        lang: "fr",
        lat: (43.0, 50.5),
        lon: (-4.0, 7.5),
    },
];

fn topic(lang: &str, i: usize) -> String {
    format!("{lang}_topic_{i:02}")
}

fn event(lang: &str, i: usize) -> String {
    format!("{lang}_event_{i:02}")
}

fn date(year: i32, day_of_year: u32) -> String {
    let d = chrono::NaiveDate::from_yo_opt(year, day_of_year.clamp(1, 365)).expect("valid day");
    d.format("%Y-%m-%d").to_string()
}

fn add_days(d: &str, days: i64) -> String {
    let d = chrono::NaiveDate::parse_from_str(d, "%Y-%m-%d").expect("own format");
    (d + chrono::Duration::days(days)).format("%Y-%m-%d").to_string()
}

/// Builds the toy dataset: two clusters of 94 entities, each densely linked
/// and mostly clicked in its own language, plus a planted query/event pair
/// in `de` that is best on every feature.
pub fn toy_dataset() -> ToyDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(TOY_SEED);
    let mut files = BTreeMap::new();

    let mut entities = String::from("# id\tlabel\tis_event\tstart\tend\tcoords\tplace_links\n");
    // resolved position and start year of every entity, for the click model
    let mut pos: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    let mut year_of: BTreeMap<String, f64> = BTreeMap::new();
    let mut countries = String::from("# lang\tcountry\tpolygon\n");
    for c in &CLUSTERS {
        let (a, b) = c.lat;
        let (x, y) = c.lon;
        writeln!(countries, "{}\t{}_country\t{a},{x};{a},{y};{b},{y};{b},{x}", c.lang, c.lang).unwrap();
        for i in 0..TOPICS {
            let born = rng.gen_range(1800..1950);
            let start = date(born, rng.gen_range(1..=365));
            let end = add_days(&start, rng.gen_range(20..70) * 365);
            // odd topics have no coordinates of their own but point at a place
            let (coords, place) = if i % 2 == 0 {
                let lat = rng.gen_range(c.lat.0..c.lat.1);
                let lon = rng.gen_range(c.lon.0..c.lon.1);
                pos.insert(topic(c.lang, i), (lat, lon));
                (format!("{lat:.4},{lon:.4}"), String::new())
            } else {
                pos.insert(topic(c.lang, i), pos[&topic(c.lang, i - 1)]);
                (String::new(), topic(c.lang, i - 1))
            };
            year_of.insert(topic(c.lang, i), f64::from(born));
            writeln!(
                entities,
                "{}\tTopic {} {i}\t0\t{start}\t{end}\t{coords}\t{place}",
                topic(c.lang, i),
                c.lang
            )
            .unwrap();
        }
        for i in 0..EVENTS {
            let year = rng.gen_range(1800..2000);
            let start = date(year, rng.gen_range(1..=365));
            let end = add_days(&start, rng.gen_range(0..60));
            let coords = if i % 16 == 15 {
                pos.insert(event(c.lang, i), pos[&topic(c.lang, 2 * (i % 10))]);
                String::new()
            } else {
                let lat = rng.gen_range(c.lat.0..c.lat.1);
                let lon = rng.gen_range(c.lon.0..c.lon.1);
                pos.insert(event(c.lang, i), (lat, lon));
                format!("{lat:.4},{lon:.4}")
            };
            let place = if coords.is_empty() { topic(c.lang, 2 * (i % 10)) } else { String::new() };
            // a few undated events exercise the missing-time sentinel
            let (start, end) = if i % 21 == 20 {
                (String::new(), String::new())
            } else {
                year_of.insert(event(c.lang, i), f64::from(year));
                (start, end)
            };
            writeln!(
                entities,
                "{}\tEvent {} {i}\t1\t{start}\t{end}\t{coords}\t{place}",
                event(c.lang, i),
                c.lang
            )
            .unwrap();
        }
    }
    writeln!(
        entities,
        "{PLANTED_QUERY}\tBerlin Wall\t0\t1961-08-13\t1989-11-09\t52.5163,13.3777\t"
    )
    .unwrap();
    writeln!(
        entities,
        "{PLANTED_EVENT}\tConstruction of the Berlin Wall\t1\t1961-08-13\t1961-12-31\t52.5163,13.3777\t"
    )
    .unwrap();
    for id in [PLANTED_QUERY, PLANTED_EVENT] {
        pos.insert(id.to_string(), (52.5163, 13.3777));
        year_of.insert(id.to_string(), 1961.0);
    }

    let members = |lang: &str| -> Vec<String> {
        (0..TOPICS)
            .map(|i| topic(lang, i))
            .chain((0..EVENTS).map(|i| event(lang, i)))
            .collect()
    };
    let mut links: BTreeMap<&str, BTreeSet<(String, String)>> = BTreeMap::new();
    for c in &CLUSTERS {
        let edges = links.entry(c.lang).or_default();
        for other in &CLUSTERS {
            let nodes = members(other.lang);
            let (per_node, keep) = if other.lang == c.lang { (6, 1.0) } else { (2, 0.5) };
            for s in &nodes {
                if !rng.gen_bool(keep) {
                    continue;
                }
                for t in nodes.choose_multiple(&mut rng, per_node) {
                    if s != t {
                        edges.insert((s.clone(), t.clone()));
                    }
                }
            }
        }
        // sparse bridges between the clusters
        let (home, away) = (members(c.lang), members(if c.lang == "de" { "fr" } else { "de" }));
        for _ in 0..10 {
            let s = home.choose(&mut rng).unwrap().clone();
            let t = away.choose(&mut rng).unwrap().clone();
            edges.insert((s, t));
        }
    }
    {
        let de = links.get_mut(PLANTED_LANGUAGE).expect("de links");
        let (q, v) = (PLANTED_QUERY.to_string(), PLANTED_EVENT.to_string());
        de.insert((q.clone(), v.clone()));
        de.insert((v.clone(), q.clone()));
        let nodes = members("de");
        for n in nodes.iter().step_by(3) {
            de.insert((n.clone(), q.clone()));
            de.insert((n.clone(), v.clone()));
        }
        for n in nodes.iter().skip(1).step_by(3) {
            de.insert((q.clone(), n.clone()));
            de.insert((v.clone(), n.clone()));
        }
    }
    for (lang, edges) in &links {
        let mut s = String::from("# source\ttarget\n");
        for (a, b) in edges {
            writeln!(s, "{a}\t{b}").unwrap();
        }
        files.insert(format!("links_{lang}.tsv"), s);
    }

    // Clicks follow the link structure and proximity: a topic clicks the
    // events it links to or is linked from, more often when they share
    // neighbours or are close in space and time.
    let mut clicks: BTreeMap<&str, BTreeMap<(String, String), u64>> = BTreeMap::new();
    for c in &CLUSTERS {
        let edges = &links[c.lang];
        let out_of = |n: &str| -> BTreeSet<&str> {
            edges.iter().filter(|(a, _)| a == n).map(|(_, b)| b.as_str()).collect()
        };
        let into = |n: &str| -> BTreeSet<&str> {
            edges.iter().filter(|(_, b)| b == n).map(|(a, _)| a.as_str()).collect()
        };
        let mut queries: Vec<String> = (0..TOPICS).map(|i| topic(c.lang, i)).collect();
        if c.lang == PLANTED_LANGUAGE {
            queries.push(PLANTED_QUERY.to_string());
        }
        let mut events: Vec<String> = (0..EVENTS).map(|i| event(c.lang, i)).collect();
        if c.lang == PLANTED_LANGUAGE {
            events.push(PLANTED_EVENT.to_string());
        }
        for q in &queries {
            let (q_out, q_in) = (out_of(q), into(q));
            let mut scored: Vec<(f64, &String)> = events
                .iter()
                .map(|v| {
                    let (v_out, v_in) = (out_of(v), into(v));
                    let direct = 4.0 * f64::from(u8::from(q_out.contains(v.as_str())))
                        + 2.0 * f64::from(u8::from(q_in.contains(v.as_str())));
                    let shared = (q_in.intersection(&v_in).count() + q_out.intersection(&v_out).count()) as f64;
                    let (a, b) = (pos[q.as_str()], pos[v.as_str()]);
                    let km = 111.0 * ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
                    let near = 3.0 * (-km / 150.0).exp();
                    let era = match (year_of.get(q.as_str()), year_of.get(v.as_str())) {
                        (Some(x), Some(y)) => 3.0 * (-(x - y).abs() / 25.0).exp(),
                        _ => 0.0,
                    };
                    (direct + shared + near + era + rng.gen_range(0.0..0.5), v)
                })
                .collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
            let n_clicked = rng.gen_range(8..18);
            for (score, v) in scored.into_iter().take(n_clicked) {
                let home = (score * 40.0).round() as u64 + rng.gen_range(5..20);
                let table = clicks.entry(c.lang).or_default();
                *table.entry((q.clone(), v.clone())).or_default() += home;
                // the same pair draws a few visits from the other language
                let other = if c.lang == "de" { "fr" } else { "de" };
                if rng.gen_bool(0.6) {
                    let away = 1 + home / rng.gen_range(4..12);
                    *clicks.entry(other).or_default().entry((q.clone(), v.clone())).or_default() += away;
                }
            }
        }
    }
    for (lang, table) in &clicks {
        let mut s = String::from("# source\ttarget\tcount\n");
        for ((a, b), n) in table {
            writeln!(s, "{a}\t{b}\t{n}").unwrap();
        }
        files.insert(format!("clicks_{lang}.tsv"), s);
    }

    files.insert("entities.tsv".into(), entities);
    files.insert("countries.tsv".into(), countries);
    files.insert("toy.conf".into(), TOY_CONFIG.to_string());
    ToyDataset { files }
}

const TOY_CONFIG: &str = "\
# Bundled toy dataset; paths are relative to this file.
data.entities = entities.tsv
data.countries = countries.tsv
data.links.de = links_de.tsv
data.links.fr = links_fr.tsv
data.clicks.de = clicks_de.tsv
data.clicks.fr = clicks_fr.tsv
languages = de,fr
seed = 0
workers = 1
output = out
candidate_k = 200

walk.walks_per_node = 10
walk.length = 20
embed.dim = 32
embed.window = 4
embed.epochs = 3

ltr.n_trees = 50
ltr.max_leaves = 8

eval.folds = 5
eval.recall_min_positives = 10
";

impl ToyDataset {
    /// Writes every file into `dir` and returns the config path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in &self.files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(dir.join("toy.conf"))
    }
}

/// Two communities of `size` nodes (`a000..`, `b000..`): each node links to
/// `intra` random members of its own community; `bridges` random edges cross.
pub fn two_communities(seed: u64, size: usize, intra: usize, bridges: usize) -> LinkSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = |c: char, i: usize| EntityId::new(format!("{c}{i:03}")).expect("valid id");
    let mut edges = Vec::new();
    for c in ['a', 'b'] {
        let nodes: Vec<usize> = (0..size).collect();
        for i in 0..size {
            for &j in nodes.choose_multiple(&mut rng, intra + 1).filter(|&&j| j != i).take(intra) {
                edges.push((name(c, i), name(c, j)));
            }
        }
    }
    for k in 0..bridges {
        let (i, j) = (rng.gen_range(0..size), rng.gen_range(0..size));
        let (s, t) = if k % 2 == 0 { ('a', 'b') } else { ('b', 'a') };
        edges.push((name(s, i), name(t, j)));
    }
    LinkSet::from_edges(LanguageCode::new("xx").expect("valid code"), edges)
}

/// Feature rows where relevance depends only on the link columns; every
/// other column is independent noise.
pub fn planted_link_signal(seed: u64, queries: usize, items: usize) -> Vec<FeatureRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lang = LanguageCode::new("xx").expect("valid code");
    let mut rows = Vec::with_capacity(queries * items);
    for q in 0..queries {
        for i in 0..items {
            let shared: f64 = f64::from(rng.gen_range(0u32..20));
            let mut a = [0.0; FEATURE_COUNT];
            a[0] = rng.gen_range(0.0..2000.0);
            a[1] = rng.gen_range(0.0..2000.0);
            a[2] = rng.gen_range(0.0..400.0);
            a[3] = rng.gen_range(0.0..20000.0);
            a[4] = shared + f64::from(rng.gen_range(0u32..10));
            a[5] = shared + f64::from(rng.gen_range(0u32..10));
            a[6] = shared;
            a[7] = (shared / 2.0).floor();
            a[8] = shared / 20.0;
            a[9] = rng.gen_range(-1.0..1.0);
            let rel = if shared >= 10.0 { (shared - 9.0) / 10.0 } else { 0.0 };
            rows.push(FeatureRow {
                query: EntityId::new(format!("q{q:03}")).expect("valid id"),
                event: EntityId::new(format!("v{i:03}")).expect("valid id"),
                language: lang.clone(),
                rel,
                features: FeatureVector::from_array(a),
            });
        }
    }
    rows
}

/// Ranking data whose label is a monotone function of column 0 plus noise
/// of standard deviation-like width `noise`; the other columns are noise.
pub fn separable_ranking(seed: u64, queries: usize, items: usize, noise: f64) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lang = LanguageCode::new("xx").expect("valid code");
    let groups = (0..queries)
        .map(|q| {
            let mut rows = Vec::with_capacity(items);
            let mut labels = Vec::with_capacity(items);
            for _ in 0..items {
                let x: f64 = rng.gen_range(0.0..1.0);
                let mut row = vec![x];
                row.extend((1..FEATURE_COUNT).map(|_| rng.gen_range(0.0..1.0)));
                rows.push(row);
                labels.push((x * x + rng.gen_range(-noise..=noise)).clamp(0.0, 1.0));
            }
            QueryGroup {
                query: EntityId::new(format!("q{q:03}")).expect("valid id"),
                language: lang.clone(),
                events: (0..items)
                    .map(|i| EntityId::new(format!("v{i:03}")).expect("valid id"))
                    .collect(),
                rows,
                labels,
            }
        })
        .collect();
    TrainingSet::new(FEATURE_NAMES.iter().map(|s| s.to_string()).collect(), groups)
        .expect("well-formed synthetic set")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_is_deterministic_and_complete() {
        let a = toy_dataset();
        assert_eq!(a, toy_dataset());
        for f in [
            "entities.tsv",
            "countries.tsv",
            "links_de.tsv",
            "links_fr.tsv",
            "clicks_de.tsv",
            "clicks_fr.tsv",
            "toy.conf",
        ] {
            assert!(a.files.contains_key(f), "{f}");
        }
        let n_entities = a.files["entities.tsv"].lines().filter(|l| !l.starts_with('#')).count();
        assert_eq!(n_entities, 2 * (TOPICS + EVENTS) + 2);
    }

    #[test]
    fn community_graph_shape() {
        let g = two_communities(1, 100, 8, 20);
        assert_eq!(g.node_count(), 200);
        let cross = g
            .edges()
            .filter(|(s, t)| s.as_str().as_bytes()[0] != t.as_str().as_bytes()[0])
            .count();
        assert!(cross <= 20);
    }
}
