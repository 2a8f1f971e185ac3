//! On-disk formats: interaction files, item feature files, schema files.
//!
//! All three are UTF-8 text, one record per line, `#` starting a comment
//! line. Interaction records are `user_id<TAB>item_id`. Item records are
//! `item_id<TAB>field=value[,value...];field=value...` with values being
//! indices into the field's cardinality. Schema records are
//! `name<TAB>cardinality<TAB>one-hot|multi-hot`.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{DomainDataset, Encoding, FeatureField, FeatureSchema, MultiDomainScenario};
use crate::error::{Error, Result};

/// Input files for one domain.
#[derive(Clone, Debug)]
pub struct DomainPaths {
    pub name: String,
    pub interactions: PathBuf,
    pub items: PathBuf,
}

pub fn load_schema(path: &Path) -> Result<FeatureSchema> {
    let text = fs::read_to_string(path)?;
    let mut fields = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(parse_err(path, lineno, "expected name<TAB>cardinality<TAB>encoding"));
        }
        let cardinality: usize = parts[1]
            .parse()
            .map_err(|_| parse_err(path, lineno, "cardinality is not a positive integer"))?;
        let encoding = Encoding::parse(parts[2])
            .ok_or_else(|| parse_err(path, lineno, "encoding must be one-hot or multi-hot"))?;
        fields.push(FeatureField {
            name: parts[0].to_string(),
            cardinality,
            encoding,
        });
    }
    FeatureSchema::new(fields)
}

fn parse_err(path: &Path, lineno: usize, msg: &str) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: lineno + 1,
        msg: msg.to_string(),
    }
}

fn parse_item_line(
    path: &Path,
    lineno: usize,
    line: &str,
    schema: &FeatureSchema,
) -> Result<(String, Vec<f64>)> {
    // an item whose multi-hot fields are all empty may omit the feature part
    let (item_id, rest) = line.split_once('\t').unwrap_or((line, ""));
    if item_id.is_empty() {
        return Err(parse_err(path, lineno, "expected item_id<TAB>features"));
    }
    let mut feat = vec![0.0; schema.total_dim()];
    let mut seen: HashSet<&str> = HashSet::new();
    for group in rest.split(';') {
        let group = group.trim();
        if group.is_empty() {
            continue;
        }
        let (fname, values) = group
            .split_once('=')
            .ok_or_else(|| parse_err(path, lineno, "feature group missing `=`"))?;
        let (off, field) = schema
            .slices()
            .find(|(_, f)| f.name == fname)
            .ok_or_else(|| parse_err(path, lineno, &format!("unknown field `{fname}`")))?;
        if !seen.insert(fname) {
            return Err(parse_err(path, lineno, &format!("field `{fname}` repeated")));
        }
        for v in values.split(',') {
            let v = v.trim();
            if v.is_empty() {
                continue;
            }
            let idx: usize = v
                .parse()
                .map_err(|_| parse_err(path, lineno, &format!("bad value `{v}` for `{fname}`")))?;
            if idx >= field.cardinality {
                return Err(parse_err(
                    path,
                    lineno,
                    &format!("value {idx} out of range for `{fname}` (cardinality {})", field.cardinality),
                ));
            }
            feat[off + idx] = 1.0;
        }
    }
    Ok((item_id.to_string(), feat))
}

/// Loads S domains, keeping only users present in every domain and
/// re-indexing them densely. User order follows first appearance in the
/// first domain's interaction file.
pub fn load_scenario(paths: &[DomainPaths], schemas: &[FeatureSchema]) -> Result<MultiDomainScenario> {
    if paths.len() != schemas.len() {
        return Err(Error::Config(format!(
            "{} domain paths but {} schemas",
            paths.len(),
            schemas.len()
        )));
    }
    if paths.len() < 2 {
        return Err(Error::Config("a scenario needs at least 2 domains".into()));
    }

    struct RawDomain {
        item_ids: Vec<String>,
        items: Vec<Vec<f64>>,
        item_index: HashMap<String, u32>,
        // (user, item) pairs in file order
        events: Vec<(String, u32)>,
        users: HashSet<String>,
    }

    let mut raw = Vec::new();
    for (dp, schema) in paths.iter().zip(schemas) {
        let item_text = fs::read_to_string(&dp.items)?;
        let mut item_ids = Vec::new();
        let mut items = Vec::new();
        let mut item_index = HashMap::new();
        for (lineno, line) in item_text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, feat) = parse_item_line(&dp.items, lineno, line, schema)?;
            if item_index.contains_key(&id) {
                return Err(parse_err(&dp.items, lineno, &format!("item `{id}` repeated")));
            }
            item_index.insert(id.clone(), item_ids.len() as u32);
            item_ids.push(id);
            items.push(feat);
        }

        let inter_text = fs::read_to_string(&dp.interactions)?;
        let mut events = Vec::new();
        let mut users = HashSet::new();
        for (lineno, line) in inter_text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (user, item) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(&dp.interactions, lineno, "expected user_id<TAB>item_id"))?;
            let item_idx = *item_index.get(item).ok_or_else(|| {
                Error::Integrity(format!(
                    "{}:{}: interaction references unknown item `{}`",
                    dp.interactions.display(),
                    lineno + 1,
                    item
                ))
            })?;
            users.insert(user.to_string());
            events.push((user.to_string(), item_idx));
        }
        raw.push(RawDomain {
            item_ids,
            items,
            item_index,
            events,
            users,
        });
    }

    // Users present in every domain, ordered by first appearance in domain 0.
    let mut user_ids = Vec::new();
    let mut user_index: HashMap<String, u32> = HashMap::new();
    for (user, _) in &raw[0].events {
        if user_index.contains_key(user) {
            continue;
        }
        if raw.iter().all(|d| d.users.contains(user)) {
            user_index.insert(user.clone(), user_ids.len() as u32);
            user_ids.push(user.clone());
        }
    }
    if user_ids.is_empty() {
        return Err(Error::EmptyOverlap);
    }

    let mut domains = Vec::new();
    for (s, (dp, schema)) in paths.iter().zip(schemas).enumerate() {
        let rd = &raw[s];
        let mut interactions = vec![Vec::new(); user_ids.len()];
        let mut seen: Vec<HashSet<u32>> = vec![HashSet::new(); user_ids.len()];
        for (user, item) in &rd.events {
            if let Some(&u) = user_index.get(user) {
                if !seen[u as usize].insert(*item) {
                    return Err(Error::Integrity(format!(
                        "domain `{}`: user `{}` lists item `{}` twice",
                        dp.name, user, rd.item_ids[*item as usize]
                    )));
                }
                interactions[u as usize].push(*item);
            }
        }
        let _ = &rd.item_index;
        domains.push(DomainDataset {
            domain_id: s,
            name: dp.name.clone(),
            schema: schema.clone(),
            items: rd.items.clone(),
            item_ids: rd.item_ids.clone(),
            interactions,
        });
    }

    let scenario = MultiDomainScenario {
        num_users: user_ids.len(),
        user_ids,
        domains,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Writes a scenario into `dir` using the standard file formats. Returns
/// the per-domain paths plus schema file paths, in domain order.
pub fn save_scenario(scenario: &MultiDomainScenario, dir: &Path) -> Result<Vec<(DomainPaths, PathBuf)>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for d in &scenario.domains {
        let schema_path = dir.join(format!("{}_schema.tsv", d.name));
        let mut w = fs::File::create(&schema_path)?;
        for f in &d.schema.fields {
            writeln!(w, "{}\t{}\t{}", f.name, f.cardinality, f.encoding.as_str())?;
        }

        let items_path = dir.join(format!("{}_items.tsv", d.name));
        let mut w = fs::File::create(&items_path)?;
        for (idx, feat) in d.items.iter().enumerate() {
            let mut groups = Vec::new();
            for (off, field) in d.schema.slices() {
                let values: Vec<String> = (0..field.cardinality)
                    .filter(|&v| feat[off + v] != 0.0)
                    .map(|v| v.to_string())
                    .collect();
                if !values.is_empty() {
                    groups.push(format!("{}={}", field.name, values.join(",")));
                }
            }
            writeln!(w, "{}\t{}", d.item_ids[idx], groups.join(";"))?;
        }

        let inter_path = dir.join(format!("{}_interactions.tsv", d.name));
        let mut w = fs::File::create(&inter_path)?;
        for (u, list) in d.interactions.iter().enumerate() {
            for &item in list {
                writeln!(
                    w,
                    "{}\t{}",
                    scenario.user_ids[u],
                    d.item_ids[item as usize]
                )?;
            }
        }

        out.push((
            DomainPaths {
                name: d.name.clone(),
                interactions: inter_path,
                items: items_path,
            },
            schema_path,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(path: &Path, text: &str) {
        fs::write(path, text).unwrap();
    }

    fn two_domain_fixture(dir: &Path) -> (Vec<DomainPaths>, Vec<FeatureSchema>) {
        write(
            &dir.join("s1.tsv"),
            "genre\t2\tone-hot\n",
        );
        write(
            &dir.join("i1.tsv"),
            "# items of domain one\nm1\tgenre=0\nm2\tgenre=1\nm3\tgenre=0\n",
        );
        write(
            &dir.join("x1.tsv"),
            "alice\tm1\nbob\tm2\ncarol\tm3\ndan\tm1\neve\tm2\n",
        );
        write(&dir.join("s2.tsv"), "kind\t3\tmulti-hot\n");
        write(
            &dir.join("i2.tsv"),
            "b1\tkind=0,2\nb2\tkind=1\nb3\t\n",
        );
        write(
            &dir.join("x2.tsv"),
            "carol\tb1\nalice\tb2\nbob\tb3\nfrank\tb1\n",
        );
        let paths = vec![
            DomainPaths {
                name: "movies".into(),
                interactions: dir.join("x1.tsv"),
                items: dir.join("i1.tsv"),
            },
            DomainPaths {
                name: "books".into(),
                interactions: dir.join("x2.tsv"),
                items: dir.join("i2.tsv"),
            },
        ];
        let schemas = vec![
            load_schema(&dir.join("s1.tsv")).unwrap(),
            load_schema(&dir.join("s2.tsv")).unwrap(),
        ];
        (paths, schemas)
    }

    #[test]
    fn overlap_filter_keeps_common_users() {
        let dir = tempfile::tempdir().unwrap();
        let (paths, schemas) = two_domain_fixture(dir.path());
        // 5 users in movies, 4 in books, 3 common (alice, bob, carol)
        let scenario = load_scenario(&paths, &schemas).unwrap();
        assert_eq!(scenario.num_users, 3);
        assert_eq!(scenario.user_ids, vec!["alice", "bob", "carol"]);
        assert_eq!(scenario.num_domains(), 2);
        // dan/eve/frank interactions dropped
        assert_eq!(scenario.domains[0].total_interactions(), 3);
    }

    #[test]
    fn unknown_item_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let (mut paths, schemas) = two_domain_fixture(dir.path());
        write(&dir.path().join("bad.tsv"), "alice\tm1\nbob\tmX\n");
        paths[0].interactions = dir.path().join("bad.tsv");
        assert!(matches!(
            load_scenario(&paths, &schemas),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn wrong_width_item_row_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let (paths, mut schemas) = two_domain_fixture(dir.path());
        // declare a wider schema than the item rows satisfy: m1 genre=0 is
        // still parseable, but a one-hot field absent from the row leaves
        // zero set bits and fails validation
        schemas[0] = FeatureSchema::new(vec![
            FeatureField {
                name: "genre".into(),
                cardinality: 2,
                encoding: Encoding::OneHot,
            },
            FeatureField {
                name: "level".into(),
                cardinality: 2,
                encoding: Encoding::OneHot,
            },
        ])
        .unwrap();
        assert!(matches!(
            load_scenario(&paths, &schemas),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let (mut paths, schemas) = two_domain_fixture(dir.path());
        write(&dir.path().join("bad.tsv"), "alice\tm1\nno-tab-here\n");
        paths[0].interactions = dir.path().join("bad.tsv");
        match load_scenario(&paths, &schemas) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_overlap_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let (mut paths, schemas) = two_domain_fixture(dir.path());
        write(&dir.path().join("solo.tsv"), "zelda\tm1\n");
        paths[0].interactions = dir.path().join("solo.tsv");
        assert!(matches!(
            load_scenario(&paths, &schemas),
            Err(Error::EmptyOverlap)
        ));
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let (paths, schemas) = two_domain_fixture(dir.path());
        let scenario = load_scenario(&paths, &schemas).unwrap();
        let saved = save_scenario(&scenario, &dir.path().join("out")).unwrap();
        let paths2: Vec<DomainPaths> = saved.iter().map(|(p, _)| p.clone()).collect();
        let schemas2: Vec<FeatureSchema> = saved
            .iter()
            .map(|(_, sp)| load_schema(sp).unwrap())
            .collect();
        let reloaded = load_scenario(&paths2, &schemas2).unwrap();
        assert_eq!(scenario, reloaded);
    }
}
