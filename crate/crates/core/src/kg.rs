//! Triple-file ingestion, vocabularies, the filtered-evaluation index, and
//! uniform negative sampling.
//!
//! The on-disk format is the de-facto distribution format of WN18RR and
//! FB15K-237: UTF-8 text, one `head⟶relation⟶tail` fact per line, fields
//! separated by single tabs. Blank lines, comments, and duplicates are
//! rejected rather than skipped so corrupt data fails loudly.

use crate::error::{Error, Result};
use rand::Rng;
use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// A fact with all names resolved to dense ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triple {
    pub head: u32,
    pub rel: u32,
    pub tail: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => "train.txt",
            Split::Valid => "valid.txt",
            Split::Test => "test.txt",
        }
    }
}

/// Bijective name ↔ dense-id maps for entities and relations. Ids are
/// assigned in first-appearance order, which makes the assignment
/// reproducible without a sort pass and independent of locale.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    ent_ids: HashMap<String, u32>,
    ent_names: Vec<String>,
    rel_ids: HashMap<String, u32>,
    rel_names: Vec<String>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a vocabulary from name lists in id order (checkpoint load).
    pub fn from_names(entities: Vec<String>, relations: Vec<String>) -> Result<Self> {
        let mut v = Self::new();
        for name in entities {
            let next = v.ent_names.len() as u32;
            if v.ent_ids.insert(name.clone(), next).is_some() {
                return Err(Error::Vocab(format!("duplicate entity name {name:?}")));
            }
            v.ent_names.push(name);
        }
        for name in relations {
            let next = v.rel_names.len() as u32;
            if v.rel_ids.insert(name.clone(), next).is_some() {
                return Err(Error::Vocab(format!("duplicate relation name {name:?}")));
            }
            v.rel_names.push(name);
        }
        Ok(v)
    }

    pub fn num_entities(&self) -> usize {
        self.ent_names.len()
    }

    pub fn num_relations(&self) -> usize {
        self.rel_names.len()
    }

    pub fn entity_id(&self, name: &str) -> Option<u32> {
        self.ent_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<u32> {
        self.rel_ids.get(name).copied()
    }

    pub fn entity_name(&self, id: u32) -> Option<&str> {
        self.ent_names.get(id as usize).map(String::as_str)
    }

    pub fn relation_name(&self, id: u32) -> Option<&str> {
        self.rel_names.get(id as usize).map(String::as_str)
    }

    pub fn entity_names(&self) -> &[String] {
        &self.ent_names
    }

    pub fn relation_names(&self) -> &[String] {
        &self.rel_names
    }

    fn intern_entity(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ent_ids.get(name) {
            return id;
        }
        let id = self.ent_names.len() as u32;
        self.ent_ids.insert(name.to_owned(), id);
        self.ent_names.push(name.to_owned());
        id
    }

    fn intern_relation(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.rel_ids.get(name) {
            return id;
        }
        let id = self.rel_names.len() as u32;
        self.rel_ids.insert(name.to_owned(), id);
        self.rel_names.push(name.to_owned());
        id
    }

    /// Writes `entities.tsv` and `relations.tsv` (one name per line, id =
    /// line number) into a directory.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut ef = std::fs::File::create(dir.join("entities.tsv"))?;
        for name in &self.ent_names {
            writeln!(ef, "{name}")?;
        }
        let mut rf = std::fs::File::create(dir.join("relations.tsv"))?;
        for name in &self.rel_names {
            writeln!(rf, "{name}")?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read_lines = |p: &Path| -> Result<Vec<String>> {
            let f = std::fs::File::open(p)?;
            BufReader::new(f)
                .lines()
                .map(|l| l.map_err(Error::from))
                .collect()
        };
        Self::from_names(
            read_lines(&dir.join("entities.tsv"))?,
            read_lines(&dir.join("relations.tsv"))?,
        )
    }
}

/// Whether a split load may extend the vocabulary or must resolve against a
/// fixed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VocabMode {
    Build,
    Fixed,
}

/// All triples of one split.
#[derive(Debug, Clone)]
pub struct TripleSet {
    pub split: Split,
    pub triples: Vec<Triple>,
}

/// Parses one tab-separated triple file. In `Build` mode unseen names are
/// appended to the vocabulary; in `Fixed` mode they are errors. Malformed or
/// duplicate lines are errors carrying the 1-based line number.
pub fn load_split(
    path: &Path,
    split: Split,
    vocab: &mut Vocabulary,
    mode: VocabMode,
) -> Result<TripleSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::Parse {
        path: path.to_owned(),
        line: 0,
        msg: format!("cannot open: {e}"),
    })?;
    let mut triples = Vec::new();
    let mut seen: HashSet<Triple> = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: lineno,
            msg: e.to_string(),
        })?;
        let parse_err = |msg: String| Error::Parse {
            path: path.to_owned(),
            line: lineno,
            msg,
        };
        if line.is_empty() {
            return Err(parse_err("blank line".into()));
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        if fields.iter().any(|f| f.is_empty()) {
            return Err(parse_err("empty field".into()));
        }
        let (h, r, t) = (fields[0], fields[1], fields[2]);
        let resolve_entity = |vocab: &mut Vocabulary, name: &str| -> Result<u32> {
            match mode {
                VocabMode::Build => Ok(vocab.intern_entity(name)),
                VocabMode::Fixed => vocab
                    .entity_id(name)
                    .ok_or_else(|| Error::Vocab(format!("unknown entity {name:?} in {} split", split.as_str()))),
            }
        };
        let head = resolve_entity(vocab, h)?;
        let tail = resolve_entity(vocab, t)?;
        let rel = match mode {
            VocabMode::Build => vocab.intern_relation(r),
            VocabMode::Fixed => vocab.relation_id(r).ok_or_else(|| {
                Error::Vocab(format!("unknown relation {r:?} in {} split", split.as_str()))
            })?,
        };
        let triple = Triple { head, rel, tail };
        if !seen.insert(triple) {
            return Err(parse_err(format!("duplicate triple {h:?} {r:?} {t:?}")));
        }
        triples.push(triple);
    }
    Ok(TripleSet { split, triples })
}

/// A dataset directory: `train.txt`, `valid.txt`, `test.txt`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub vocab: Vocabulary,
    pub train: TripleSet,
    pub valid: TripleSet,
    pub test: TripleSet,
}

impl Dataset {
    /// Loads all three splits, building the vocabulary in first-appearance
    /// order over train, then valid, then test.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut vocab = Vocabulary::new();
        let train = load_split(&dir.join(Split::Train.file_name()), Split::Train, &mut vocab, VocabMode::Build)?;
        let valid = load_split(&dir.join(Split::Valid.file_name()), Split::Valid, &mut vocab, VocabMode::Build)?;
        let test = load_split(&dir.join(Split::Test.file_name()), Split::Test, &mut vocab, VocabMode::Build)?;
        Ok(Self { vocab, train, valid, test })
    }

    /// Loads against an existing vocabulary (e.g. from a checkpoint); any
    /// unseen name is a compatibility error.
    pub fn load_with_vocab(dir: &Path, vocab: &Vocabulary) -> Result<Self> {
        let mut v = vocab.clone();
        let train = load_split(&dir.join(Split::Train.file_name()), Split::Train, &mut v, VocabMode::Fixed)?;
        let valid = load_split(&dir.join(Split::Valid.file_name()), Split::Valid, &mut v, VocabMode::Fixed)?;
        let test = load_split(&dir.join(Split::Test.file_name()), Split::Test, &mut v, VocabMode::Fixed)?;
        Ok(Self { vocab: v, train, valid, test })
    }

    pub fn splits(&self) -> [&TripleSet; 3] {
        [&self.train, &self.valid, &self.test]
    }
}

/// Map from `(head, relation)` to every tail known true in any split; the
/// standard filtered-evaluation index.
#[derive(Debug, Clone, Default)]
pub struct FilterIndex {
    tails: HashMap<(u32, u32), HashSet<u32>>,
}

impl FilterIndex {
    pub fn known_tails(&self, head: u32, rel: u32) -> Option<&HashSet<u32>> {
        self.tails.get(&(head, rel))
    }

    pub fn len(&self) -> usize {
        self.tails.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tails.is_empty()
    }
}

/// Unions the given splits into a [`FilterIndex`]. Adding a split never
/// removes candidates.
pub fn build_filter_index(splits: &[&TripleSet]) -> FilterIndex {
    let mut tails: HashMap<(u32, u32), HashSet<u32>> = HashMap::new();
    for set in splits {
        for t in &set.triples {
            tails.entry((t.head, t.rel)).or_default().insert(t.tail);
        }
    }
    FilterIndex { tails }
}

/// Same index keyed by `(tail, relation)` → heads, for head-side evaluation.
pub fn build_head_filter_index(splits: &[&TripleSet]) -> FilterIndex {
    let mut tails: HashMap<(u32, u32), HashSet<u32>> = HashMap::new();
    for set in splits {
        for t in &set.triples {
            tails.entry((t.tail, t.rel)).or_default().insert(t.head);
        }
    }
    FilterIndex { tails }
}

/// Uniform negative sampler over the entity vocabulary.
///
/// Negatives replace the tail of a query triple. Draws are uniform with
/// replacement over all entities and independent of the triple itself: the
/// true tail is not excluded, and collisions with other known-true triples
/// are not filtered. The loss labels the sampled positive specially; at
/// realistic vocabulary sizes collisions are negligible.
#[derive(Debug, Clone, Copy)]
pub struct NegativeSampler {
    num_entities: u32,
}

impl NegativeSampler {
    pub fn new(num_entities: usize) -> Result<Self> {
        if num_entities < 2 {
            return Err(Error::Config(format!(
                "negative sampling needs at least 2 entities, have {num_entities}"
            )));
        }
        Ok(Self {
            num_entities: num_entities as u32,
        })
    }

    pub fn sample<R: Rng>(&self, _triple: &Triple, k: usize, rng: &mut R) -> Vec<u32> {
        (0..k).map(|_| rng.random_range(0..self.num_entities)).collect()
    }
}
