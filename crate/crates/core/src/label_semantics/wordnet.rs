//! WordNet noun hierarchy: ingestion of the 3.0 flat files or a preprocessed TSV,
//! hypernym closure, and the candidate rules that link a target label to vocabulary entries.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{ClassLabel, ClassifierVocabulary};
use crate::error::{Error, Result};

const WORDNET30_TSV: &str = include_str!("../../data/wordnet30_nouns.tsv");

/// WordNet synset identifier, rendered as part-of-speech letter plus 8-digit offset
/// (`n02110958`), the form used by ImageNet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SynsetId {
    pos: char,
    offset: u32,
}

impl SynsetId {
    pub fn noun(offset: u32) -> Self {
        SynsetId { pos: 'n', offset }
    }

    pub fn offset(&self) -> u32 {
        self.offset
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::parse("synset id", format!("{s:?} is not of the form n01234567"));
        let mut chars = s.chars();
        let pos = chars.next().ok_or_else(bad)?;
        if !pos.is_ascii_alphabetic() {
            return Err(bad());
        }
        let offset = chars.as_str().parse().map_err(|_| bad())?;
        Ok(SynsetId {
            pos: pos.to_ascii_lowercase(),
            offset,
        })
    }
}

impl fmt::Display for SynsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:08}", self.pos, self.offset)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynsetRecord {
    pub id: SynsetId,
    /// Lowercase, underscores replaced by spaces.
    pub lemmas: Vec<String>,
    /// Direct hypernyms, including instance hypernyms.
    pub hypernyms: Vec<SynsetId>,
}

#[derive(Clone, Debug, Default)]
pub struct OntologyIndex {
    synsets: HashMap<SynsetId, SynsetRecord>,
    lemma_index: HashMap<String, Vec<SynsetId>>,
}

fn normalize_lemma(s: &str) -> String {
    s.trim()
        .to_lowercase()
        .replace('_', " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

impl OntologyIndex {
    /// Builds the lemma index from the records' own lemma lists, in record order.
    pub fn from_records(records: impl IntoIterator<Item = SynsetRecord>) -> Self {
        let mut index = OntologyIndex::default();
        let mut order = Vec::new();
        for rec in records {
            order.push(rec.id);
            index.synsets.insert(rec.id, rec);
        }
        for id in order {
            for lemma in &index.synsets[&id].lemmas {
                let ids = index.lemma_index.entry(lemma.clone()).or_default();
                if !ids.contains(&id) {
                    ids.push(id);
                }
            }
        }
        index
    }

    /// Reads `data.noun` and `index.noun` from a WordNet 3.0 `dict/` directory.
    ///
    /// The lemma index follows `index.noun`, which lists senses by frequency.
    pub fn from_wordnet_dir(dir: &Path) -> Result<Self> {
        let data_path = dir.join("data.noun");
        let index_path = dir.join("index.noun");
        for p in [&data_path, &index_path] {
            if !p.exists() {
                return Err(Error::resource(
                    p,
                    "expected a WordNet 3.0 dict/ directory containing data.noun and index.noun",
                ));
            }
        }
        let mut synsets = HashMap::new();
        let reader = BufReader::new(std::fs::File::open(&data_path)?);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.starts_with("  ") || line.trim().is_empty() {
                continue;
            }
            let rec = parse_data_line(&line)
                .map_err(|m| Error::parse(format!("data.noun line {}", lineno + 1), m))?;
            synsets.insert(rec.id, rec);
        }
        let mut lemma_index: HashMap<String, Vec<SynsetId>> = HashMap::new();
        let reader = BufReader::new(std::fs::File::open(&index_path)?);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.starts_with("  ") || line.trim().is_empty() {
                continue;
            }
            let (lemma, ids) = parse_index_line(&line)
                .map_err(|m| Error::parse(format!("index.noun line {}", lineno + 1), m))?;
            lemma_index.insert(lemma, ids);
        }
        Ok(OntologyIndex {
            synsets,
            lemma_index,
        })
    }

    /// The WordNet 3.0 noun hierarchy bundled with the crate.
    pub fn wordnet30() -> Self {
        Self::parse_tsv(WORDNET30_TSV).expect("bundled ontology is well-formed")
    }

    pub fn load_tsv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::resource(
                path,
                "ontology TSV not found (columns: synset_id, lemmas, hypernym_ids)",
            ),
            _ => e.into(),
        })?;
        Self::parse_tsv(&text)
    }

    /// Columns: `synset_id`, `lemmas` (`|`-separated), `hypernym_ids` (`|`-separated).
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with("synset_id\t") {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 || cols.len() > 3 {
                return Err(Error::parse(
                    format!("ontology TSV line {}", lineno + 1),
                    "expected synset_id, lemmas, hypernym_ids",
                ));
            }
            let id = SynsetId::parse(cols[0].trim())?;
            let lemmas = cols[1]
                .split('|')
                .filter(|s| !s.trim().is_empty())
                .map(normalize_lemma)
                .collect();
            let hypernyms = match cols.get(2) {
                Some(h) => h
                    .split('|')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| SynsetId::parse(s.trim()))
                    .collect::<Result<_>>()?,
                None => Vec::new(),
            };
            records.push(SynsetRecord {
                id,
                lemmas,
                hypernyms,
            });
        }
        Ok(Self::from_records(records))
    }

    /// Serializes to the TSV form, synsets sorted by id.
    pub fn to_tsv(&self) -> String {
        let mut ids: Vec<&SynsetId> = self.synsets.keys().collect();
        ids.sort();
        let mut out = String::from("synset_id\tlemmas\thypernym_ids\n");
        for id in ids {
            let rec = &self.synsets[id];
            let hyps: Vec<String> = rec.hypernyms.iter().map(|h| h.to_string()).collect();
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                id,
                rec.lemmas.join("|"),
                hyps.join("|")
            ));
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }

    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn synset(&self, id: &SynsetId) -> Option<&SynsetRecord> {
        self.synsets.get(id)
    }

    /// Noun synsets for a word or phrase (spaces, underscores and case are normalized).
    pub fn lookup(&self, text: &str) -> &[SynsetId] {
        let key = normalize_lemma(text);
        if let Some(ids) = self.lemma_index.get(&key) {
            return ids;
        }
        let dehyphen = normalize_lemma(&key.replace('-', " "));
        self.lemma_index
            .get(&dehyphen)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// All transitive hypernyms of `id`, excluding `id` itself. Terminates on cyclic input.
    pub fn hypernym_closure(&self, id: &SynsetId) -> HashSet<SynsetId> {
        let mut seen = HashSet::new();
        let mut stack: Vec<SynsetId> = self
            .synsets
            .get(id)
            .map(|r| r.hypernyms.clone())
            .unwrap_or_default();
        while let Some(next) = stack.pop() {
            if seen.insert(next) {
                if let Some(rec) = self.synsets.get(&next) {
                    stack.extend(rec.hypernyms.iter().copied());
                }
            }
        }
        seen.remove(id);
        seen
    }

    /// True when no synset is its own transitive hypernym.
    pub fn is_acyclic(&self) -> bool {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done,
        }
        let mut marks: HashMap<SynsetId, Mark> = HashMap::with_capacity(self.synsets.len());
        for &root in self.synsets.keys() {
            if marks.contains_key(&root) {
                continue;
            }
            // iterative DFS: (node, next child position)
            let mut stack = vec![(root, 0usize)];
            marks.insert(root, Mark::Active);
            while let Some(&mut (node, ref mut pos)) = stack.last_mut() {
                let hyps = self
                    .synsets
                    .get(&node)
                    .map(|r| r.hypernyms.as_slice())
                    .unwrap_or(&[]);
                if *pos < hyps.len() {
                    let child = hyps[*pos];
                    *pos += 1;
                    match marks.get(&child) {
                        Some(Mark::Active) => return false,
                        Some(Mark::Done) => {}
                        None => {
                            marks.insert(child, Mark::Active);
                            stack.push((child, 0));
                        }
                    }
                } else {
                    marks.insert(node, Mark::Done);
                    stack.pop();
                }
            }
        }
        true
    }
}

fn parse_data_line(line: &str) -> std::result::Result<SynsetRecord, String> {
    let body = line.split(" | ").next().unwrap_or(line);
    let fields: Vec<&str> = body.split_whitespace().collect();
    let get = |i: usize| fields.get(i).copied().ok_or("truncated synset record");
    let offset: u32 = get(0)?.parse().map_err(|_| "bad synset offset")?;
    let pos = get(2)?;
    let w_cnt = usize::from_str_radix(get(3)?, 16).map_err(|_| "bad word count")?;
    let mut lemmas = Vec::with_capacity(w_cnt);
    let mut i = 4;
    for _ in 0..w_cnt {
        lemmas.push(normalize_lemma(get(i)?));
        i += 2;
    }
    let p_cnt: usize = get(i)?.parse().map_err(|_| "bad pointer count")?;
    i += 1;
    let mut hypernyms = Vec::new();
    for _ in 0..p_cnt {
        let symbol = get(i)?;
        let target: u32 = get(i + 1)?.parse().map_err(|_| "bad pointer offset")?;
        let target_pos = get(i + 2)?;
        if (symbol == "@" || symbol == "@i") && target_pos == "n" {
            hypernyms.push(SynsetId::noun(target));
        }
        i += 4;
    }
    let pos_char = pos.chars().next().ok_or("missing part of speech")?;
    Ok(SynsetRecord {
        id: SynsetId {
            pos: pos_char,
            offset,
        },
        lemmas,
        hypernyms,
    })
}

fn parse_index_line(line: &str) -> std::result::Result<(String, Vec<SynsetId>), String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 4 {
        return Err("truncated index record".into());
    }
    let synset_cnt: usize = fields[2].parse().map_err(|_| "bad synset count")?;
    if fields.len() < synset_cnt {
        return Err("missing synset offsets".into());
    }
    let ids = fields[fields.len() - synset_cnt..]
        .iter()
        .map(|s| s.parse::<u32>().map(SynsetId::noun))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| "bad synset offset")?;
    Ok((normalize_lemma(fields[0]), ids))
}

/// Vocabulary entries linked to `target` through WordNet, in vocabulary order.
///
/// An entry matches when either
/// * one of its label tokens equals a token of the target, of a lemma of any target
///   synset, or of a lemma of any synset in their hypernym closure; or
/// * a target synset is the entry's synset or lies in the entry's hypernym closure.
pub fn wordnet_candidates(
    target: &ClassLabel,
    vocab: &ClassifierVocabulary,
    ontology: &OntologyIndex,
) -> Result<Vec<usize>> {
    if ontology.is_empty() {
        return Err(Error::Config("WordNet ontology is not loaded".into()));
    }
    let target_synsets: Vec<SynsetId> = {
        let direct = ontology.lookup(target.text());
        if direct.is_empty() {
            // labels such as "tabby, tabby cat" resolve through any of their names
            let mut ids = Vec::new();
            for name in target.names() {
                for id in ontology.lookup(name) {
                    if !ids.contains(id) {
                        ids.push(*id);
                    }
                }
            }
            ids
        } else {
            direct.to_vec()
        }
    };
    let target_set: HashSet<SynsetId> = target_synsets.iter().copied().collect();

    let mut related_tokens: HashSet<String> = target.tokens().iter().cloned().collect();
    let mut lemma_sources: HashSet<SynsetId> = target_set.clone();
    for id in &target_synsets {
        lemma_sources.extend(ontology.hypernym_closure(id));
    }
    for id in &lemma_sources {
        if let Some(rec) = ontology.synset(id) {
            for lemma in &rec.lemmas {
                related_tokens.extend(
                    lemma
                        .split(|c: char| c.is_whitespace() || c == ',' || c == '-')
                        .filter(|t| !t.is_empty())
                        .map(str::to_string),
                );
            }
        }
    }

    let mut out = Vec::new();
    for entry in vocab.entries() {
        let by_token = entry
            .label
            .tokens()
            .iter()
            .any(|t| related_tokens.contains(t));
        let by_closure = !target_set.is_empty()
            && (target_set.contains(&entry.synset_id)
                || ontology
                    .hypernym_closure(&entry.synset_id)
                    .iter()
                    .any(|h| target_set.contains(h)));
        if by_token || by_closure {
            out.push(entry.class_index);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label_semantics::{tokenize_label, VocabEntry};

    // A miniature noun hierarchy in data.noun / index.noun layout.
    const DATA_NOUN: &str = "  1 This software and database is being provided to you, the LICENSEE
00000010 03 n 01 entity 0 000 | that which exists
00000020 05 n 02 dog 0 domestic_dog 0 001 @ 00000010 n 0000 | a member of the genus Canis
00000030 05 n 01 pug 0 001 @ 00000020 n 0000 | small compact breed
00000040 05 n 02 terrier 0 Tibetan_terrier 1 001 @ 00000020 n 0000 | lively dog
00000050 06 n 01 hotdog 0 001 @ 00000010 n 0000 | a frankfurter served hot
00000060 06 n 01 sled 0 002 @ 00000010 n 0000 @i 00000020 n 0000 | vehicle
";
    const INDEX_NOUN: &str = "  1 This software and database is being provided to you
dog n 1 1 @ 1 0 00000020
pug n 1 1 @ 1 0 00000030
terrier n 1 1 @ 1 0 00000040
";

    fn write_dict() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("data.noun"), DATA_NOUN).unwrap();
        std::fs::write(dir.path().join("index.noun"), INDEX_NOUN).unwrap();
        dir
    }

    fn vocab(labels: &[(&str, u32)]) -> ClassifierVocabulary {
        ClassifierVocabulary::new(
            labels
                .iter()
                .enumerate()
                .map(|(i, (text, off))| VocabEntry {
                    class_index: i,
                    synset_id: SynsetId::noun(*off),
                    label: tokenize_label(text).unwrap(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn parses_flat_files() {
        let dir = write_dict();
        let onto = OntologyIndex::from_wordnet_dir(dir.path()).unwrap();
        assert_eq!(onto.len(), 6);
        let dog = onto.synset(&SynsetId::noun(20)).unwrap();
        assert_eq!(dog.lemmas, ["dog", "domestic dog"]);
        assert_eq!(dog.hypernyms, [SynsetId::noun(10)]);
        // @i pointers count as hypernyms
        let sled = onto.synset(&SynsetId::noun(60)).unwrap();
        assert_eq!(sled.hypernyms.len(), 2);
        assert_eq!(onto.lookup("Dog"), &[SynsetId::noun(20)]);
        assert!(onto.lookup("cat").is_empty());
        assert!(onto.is_acyclic());
    }

    #[test]
    fn missing_dict_is_a_resource_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = OntologyIndex::from_wordnet_dir(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Resource { .. }));
    }

    #[test]
    fn tsv_round_trip_preserves_structure() {
        let dir = write_dict();
        let onto = OntologyIndex::from_wordnet_dir(dir.path()).unwrap();
        let back = OntologyIndex::parse_tsv(&onto.to_tsv()).unwrap();
        assert_eq!(back.len(), onto.len());
        for id in [10, 20, 30, 40, 50, 60].map(SynsetId::noun) {
            assert_eq!(back.synset(&id), onto.synset(&id));
        }
        assert_eq!(back.lookup("tibetan terrier"), &[SynsetId::noun(40)]);
    }

    #[test]
    fn closure_is_transitive_and_terminates_on_cycles() {
        let dir = write_dict();
        let onto = OntologyIndex::from_wordnet_dir(dir.path()).unwrap();
        let c = onto.hypernym_closure(&SynsetId::noun(30));
        assert_eq!(c, HashSet::from([SynsetId::noun(20), SynsetId::noun(10)]));

        let cyclic = OntologyIndex::parse_tsv("n00000001\ta\tn00000002\nn00000002\tb\tn00000001\n")
            .unwrap();
        assert!(!cyclic.is_acyclic());
        assert_eq!(cyclic.hypernym_closure(&SynsetId::noun(1)).len(), 1);
    }

    #[test]
    fn candidates_by_token_and_by_closure() {
        let dir = write_dict();
        let onto = OntologyIndex::from_wordnet_dir(dir.path()).unwrap();
        let v = vocab(&[
            ("pug, pug-dog", 30),
            ("hotdog, hot dog", 50),
            ("tibetan terrier", 40),
            ("dogsled, sled", 60),
            ("cat", 99),
        ]);
        let target = tokenize_label("dog").unwrap();
        let got = wordnet_candidates(&target, &v, &onto).unwrap();
        // pug: both rules; hot dog: token; terrier: closure; sled: instance hypernym closure
        assert_eq!(got, vec![0, 1, 2, 3]);
        // deterministic
        assert_eq!(got, wordnet_candidates(&target, &v, &onto).unwrap());
    }

    #[test]
    fn unknown_target_without_overlap_is_empty() {
        let dir = write_dict();
        let onto = OntologyIndex::from_wordnet_dir(dir.path()).unwrap();
        let v = vocab(&[("pug", 30)]);
        let got = wordnet_candidates(&tokenize_label("zebra").unwrap(), &v, &onto).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn empty_ontology_is_a_configuration_error() {
        let v = vocab(&[("pug", 30)]);
        let err = wordnet_candidates(
            &tokenize_label("dog").unwrap(),
            &v,
            &OntologyIndex::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn synset_id_format() {
        let id = SynsetId::parse("n02110958").unwrap();
        assert_eq!(id.offset(), 2110958);
        assert_eq!(id.to_string(), "n02110958");
        assert!(SynsetId::parse("02110958").is_err());
        assert!(SynsetId::parse("nxyz").is_err());
    }
}
