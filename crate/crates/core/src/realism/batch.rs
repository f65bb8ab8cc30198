//! Blinded rater batches.
//!
//! Sampling uses ChaCha8 seeded through `SeedableRng::seed_from_u64`, so a
//! seed reproduces the same batch on every platform. Each pool is sampled
//! without replacement by a partial Fisher-Yates shuffle, then the union is
//! shuffled with the same generator.
//!
//! On disk a batch is a directory holding only what raters may see
//! (`items.jsonl`, `README.txt`), plus a `<batch_id>.key.jsonl` file next to
//! that directory recording the true source of every item.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{Provenance, RealismError};
use crate::corpus::{Conversation, Dataset, Source, Turn};

pub const DEFAULT_BATCH_SIZE: usize = 50;
pub const DEFAULT_HUMAN_FRACTION: f64 = 0.5;
pub const ITEMS_FILE: &str = "items.jsonl";
pub const INSTRUCTIONS_FILE: &str = "README.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchItem {
    pub index: usize,
    pub conversation: Conversation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaterBatch {
    batch_id: String,
    seed: u64,
    items: Vec<BatchItem>,
    hidden_key: BTreeMap<usize, Provenance>,
}

impl RaterBatch {
    pub fn batch_id(&self) -> &str {
        &self.batch_id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn items(&self) -> &[BatchItem] {
        &self.items
    }

    pub fn hidden_key(&self) -> &BTreeMap<usize, Provenance> {
        &self.hidden_key
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn conversation_ids(&self) -> BTreeSet<String> {
        self.items
            .iter()
            .map(|i| i.conversation.id().to_string())
            .collect()
    }
}

fn sample_indices(rng: &mut ChaCha8Rng, pool_len: usize, amount: usize) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..pool_len).collect();
    let (chosen, _) = indices.partial_shuffle(rng, amount);
    chosen.to_vec()
}

/// Draws `round(n * human_fraction)` human and the rest simulated
/// conversations, then shuffles them into one blinded batch.
pub fn sample_rater_batch(
    human_pool: &Dataset,
    simulated_pool: &Dataset,
    n: usize,
    human_fraction: f64,
    seed: u64,
) -> Result<RaterBatch, RealismError> {
    if n == 0 {
        return Err(RealismError::InvalidBatchSize);
    }
    if !(0.0..=1.0).contains(&human_fraction) {
        return Err(RealismError::InvalidFraction(human_fraction));
    }
    let human_ids: HashSet<&str> = human_pool.conversations().iter().map(|c| c.id()).collect();
    if let Some(c) = simulated_pool
        .conversations()
        .iter()
        .find(|c| human_ids.contains(c.id()))
    {
        return Err(RealismError::OverlappingPools(c.id().to_string()));
    }

    let human_count = (n as f64 * human_fraction).round() as usize;
    let simulated_count = n - human_count;
    for (pool, needed, available) in [
        ("human", human_count, human_pool.len()),
        ("simulated", simulated_count, simulated_pool.len()),
    ] {
        if needed > available {
            return Err(RealismError::InsufficientPool {
                pool,
                needed,
                available,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drawn: Vec<(&Conversation, Provenance)> = Vec::with_capacity(n);
    for i in sample_indices(&mut rng, human_pool.len(), human_count) {
        drawn.push((&human_pool.conversations()[i], Provenance::Human));
    }
    for i in sample_indices(&mut rng, simulated_pool.len(), simulated_count) {
        drawn.push((&simulated_pool.conversations()[i], Provenance::Simulated));
    }
    drawn.shuffle(&mut rng);

    let mut hasher = Sha256::new();
    for (c, _) in &drawn {
        hasher.update(c.id().as_bytes());
        hasher.update([0u8]);
    }
    let digest = hex::encode(hasher.finalize());
    let batch_id = format!("batch-{seed}-{}", &digest[..12]);

    let mut items = Vec::with_capacity(n);
    let mut hidden_key = BTreeMap::new();
    for (index, (conversation, provenance)) in drawn.into_iter().enumerate() {
        items.push(BatchItem {
            index,
            conversation: conversation.clone(),
        });
        hidden_key.insert(index, provenance);
    }
    Ok(RaterBatch {
        batch_id,
        seed,
        items,
        hidden_key,
    })
}

/// Keeps a seeded `fraction` of `dataset`, at least one conversation,
/// preserving file order. A fraction of 1 returns the dataset unchanged.
pub fn holdout_subset(
    dataset: &Dataset,
    fraction: f64,
    seed: u64,
) -> Result<Dataset, RealismError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(RealismError::InvalidFraction(fraction));
    }
    if fraction == 1.0 || dataset.is_empty() {
        return Ok(dataset.clone());
    }
    let keep = ((dataset.len() as f64 * fraction).round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: HashSet<usize> = sample_indices(&mut rng, dataset.len(), keep)
        .into_iter()
        .collect();
    let mut position = 0;
    Ok(dataset.filtered(|_| {
        let kept = chosen.contains(&position);
        position += 1;
        kept
    }))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlindedItem {
    index: usize,
    turns: Vec<Turn>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyEntry {
    batch_id: String,
    seed: u64,
    index: usize,
    conversation_id: String,
    source: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator_version: Option<String>,
}

/// Where an exported batch landed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchExport {
    pub dir: PathBuf,
    pub key_path: PathBuf,
}

impl BatchExport {
    /// Locations for `batch_id` under `out_dir`.
    pub fn locate(out_dir: &Path, batch_id: &str) -> Self {
        BatchExport {
            dir: out_dir.join(batch_id),
            key_path: out_dir.join(format!("{batch_id}.key.jsonl")),
        }
    }

    /// Key path conventionally paired with an export directory.
    pub fn for_dir(dir: &Path) -> Self {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let parent = dir.parent().unwrap_or_else(|| Path::new("."));
        BatchExport {
            dir: dir.to_path_buf(),
            key_path: parent.join(format!("{name}.key.jsonl")),
        }
    }
}

fn instructions(batch: &RaterBatch) -> String {
    format!(
        "\u{201c}Here are {n} user conversations with a conversational recommender system\u{201d}.\n\
         \n\
         Some conversations in this set are human-generated, whereas others are \
         simulator-generated. For each conversation, identify whether it is \
         human-generated or simulator-generated.\n\
         \n\
         Batch: {id}\n\
         \n\
         The conversations are in {items}, one per line. Each line has an \"index\"\n\
         and the conversation's turns. Return your answers as a CSV file with the\n\
         header line\n\
         \n\
         item_index,judgment\n\
         \n\
         and one row per conversation, where judgment is either human-generated\n\
         or simulator-generated.\n",
        n = batch.len(),
        id = batch.batch_id,
        items = ITEMS_FILE,
    )
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RealismError + '_ {
    move |source| RealismError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes the blinded directory and the key file beside it.
pub fn export_batch(batch: &RaterBatch, out_dir: &Path) -> Result<BatchExport, RealismError> {
    let export = BatchExport::locate(out_dir, &batch.batch_id);
    fs::create_dir_all(&export.dir).map_err(io_err(&export.dir))?;

    let mut items = Vec::new();
    let mut key = Vec::new();
    for item in &batch.items {
        let blinded = BlindedItem {
            index: item.index,
            turns: item.conversation.turns().to_vec(),
        };
        serde_json::to_writer(&mut items, &blinded).expect("item serializes");
        items.push(b'\n');

        let entry = KeyEntry {
            batch_id: batch.batch_id.clone(),
            seed: batch.seed,
            index: item.index,
            conversation_id: item.conversation.id().to_string(),
            source: batch.hidden_key[&item.index],
            generator_version: item.conversation.generator_version().map(str::to_owned),
        };
        serde_json::to_writer(&mut key, &entry).expect("key entry serializes");
        key.push(b'\n');
    }

    let mut forbidden: Vec<String> = batch
        .items
        .iter()
        .flat_map(|item| {
            let c = &item.conversation;
            std::iter::once(c.id().to_string()).chain(c.generator_version().map(str::to_owned))
        })
        .collect();
    forbidden.sort();
    forbidden.dedup();
    let findings = audit_blinded_items(&String::from_utf8_lossy(&items), &forbidden);
    if !findings.is_empty() {
        return Err(RealismError::BlindingViolation(findings));
    }

    let items_path = export.dir.join(ITEMS_FILE);
    write_file(&items_path, &items)?;
    let readme_path = export.dir.join(INSTRUCTIONS_FILE);
    write_file(&readme_path, instructions(batch).as_bytes())?;
    write_file(&export.key_path, &key)?;
    Ok(export)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RealismError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

/// Rebuilds a batch from its blinded directory and key file.
pub fn load_batch(export: &BatchExport) -> Result<RaterBatch, RealismError> {
    let items_path = export.dir.join(ITEMS_FILE);
    let items_text = fs::read_to_string(&items_path).map_err(io_err(&items_path))?;
    let key_text = fs::read_to_string(&export.key_path).map_err(io_err(&export.key_path))?;
    let format = |path: &Path, reason: String| RealismError::Format {
        path: path.display().to_string(),
        reason,
    };

    let mut keys: BTreeMap<usize, KeyEntry> = BTreeMap::new();
    for (n, line) in key_text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let entry: KeyEntry = serde_json::from_str(line)
            .map_err(|e| format(&export.key_path, format!("line {}: {e}", n + 1)))?;
        if keys.insert(entry.index, entry).is_some() {
            return Err(format(
                &export.key_path,
                format!("line {}: duplicate index", n + 1),
            ));
        }
    }
    let first = keys
        .values()
        .next()
        .ok_or_else(|| format(&export.key_path, "key file is empty".into()))?;
    let (batch_id, seed) = (first.batch_id.clone(), first.seed);
    if keys
        .values()
        .any(|k| k.batch_id != batch_id || k.seed != seed)
    {
        return Err(format(
            &export.key_path,
            "entries disagree on batch id or seed".into(),
        ));
    }

    let mut items = Vec::new();
    let mut hidden_key = BTreeMap::new();
    for (n, line) in items_text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let blinded: BlindedItem = serde_json::from_str(line)
            .map_err(|e| format(&items_path, format!("line {}: {e}", n + 1)))?;
        if blinded.index != items.len() {
            return Err(format(
                &items_path,
                format!(
                    "line {}: expected index {}, found {}",
                    n + 1,
                    items.len(),
                    blinded.index
                ),
            ));
        }
        let key = keys.remove(&blinded.index).ok_or_else(|| {
            format(
                &export.key_path,
                format!("no entry for item {}", blinded.index),
            )
        })?;
        let source = match key.source {
            Provenance::Human => Source::Human,
            Provenance::Simulated => Source::Simulated,
        };
        let conversation = Conversation::new(
            key.conversation_id,
            source,
            key.generator_version,
            blinded.turns,
        )
        .map_err(|v| format(&items_path, format!("line {}: {v}", n + 1)))?;
        hidden_key.insert(blinded.index, key.source);
        items.push(BatchItem {
            index: blinded.index,
            conversation,
        });
    }
    if let Some(index) = keys.keys().next() {
        return Err(format(
            &items_path,
            format!("no item for key entry {index}"),
        ));
    }
    Ok(RaterBatch {
        batch_id,
        seed,
        items,
        hidden_key,
    })
}

const ITEM_FIELDS: &[&str] = &["index", "turns"];
const TURN_FIELDS: &[&str] = &["speaker", "text", "recommendations"];
const LEAKY_WORDS: &[&str] = &["human", "simulated"];

/// Scans blinded `items.jsonl` content for anything besides indices and
/// conversation turns. Returns one finding per problem.
///
/// Turn text and recommended item ids are content and are not scanned;
/// everything else must be free of the source words and of every string in
/// `forbidden` (generator versions, typically).
pub fn audit_blinded_items(items_jsonl: &str, forbidden: &[String]) -> Vec<String> {
    let mut findings = Vec::new();
    for (n, line) in items_jsonl.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                findings.push(format!("line {line_no}: not JSON ({e})"));
                continue;
            }
        };
        let Some(obj) = value.as_object_mut() else {
            findings.push(format!("line {line_no}: not an object"));
            continue;
        };
        for key in obj.keys().filter(|k| !ITEM_FIELDS.contains(&k.as_str())) {
            findings.push(format!("line {line_no}: unexpected field '{key}'"));
        }
        if !obj.get("index").is_some_and(Value::is_u64) {
            findings.push(format!("line {line_no}: missing integer index"));
        }
        if let Some(turns) = obj.get_mut("turns").and_then(Value::as_array_mut) {
            for (t, turn) in turns.iter_mut().enumerate() {
                let Some(turn) = turn.as_object_mut() else {
                    findings.push(format!("line {line_no}: turn {t} is not an object"));
                    continue;
                };
                for key in turn.keys().filter(|k| !TURN_FIELDS.contains(&k.as_str())) {
                    findings.push(format!(
                        "line {line_no}: turn {t}: unexpected field '{key}'"
                    ));
                }
                match turn.get("speaker").and_then(Value::as_str) {
                    Some("user") | Some("system") => {}
                    _ => findings.push(format!("line {line_no}: turn {t}: unexpected speaker")),
                }
                turn.remove("text");
                turn.remove("recommendations");
            }
        } else {
            findings.push(format!("line {line_no}: missing turns"));
        }

        let skeleton = value.to_string();
        let lowered = skeleton.to_lowercase();
        for word in LEAKY_WORDS {
            if lowered.contains(word) {
                findings.push(format!("line {line_no}: metadata mentions '{word}'"));
            }
        }
        let strings = collect_strings(&value);
        for f in forbidden.iter().filter(|f| !f.is_empty()) {
            if strings.iter().any(|s| s.contains(f.as_str())) {
                findings.push(format!("line {line_no}: metadata contains '{f}'"));
            }
        }
    }
    findings
}

fn collect_strings(value: &Value) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![value];
    while let Some(v) = stack.pop() {
        match v {
            Value::String(s) => out.push(s.clone()),
            Value::Array(a) => stack.extend(a),
            Value::Object(o) => {
                for (k, v) in o {
                    out.push(k.clone());
                    stack.push(v);
                }
            }
            _ => {}
        }
    }
    out.retain(|s| !TURN_FIELDS.contains(&s.as_str()) && !ITEM_FIELDS.contains(&s.as_str()));
    out.retain(|s| s != "user" && s != "system");
    out
}

#[cfg(test)]
mod tests {
    use super::super::tests::pool;
    use super::*;

    fn pools() -> (Dataset, Dataset) {
        (
            pool("h", Source::Human, 40),
            pool("s", Source::Simulated, 40),
        )
    }

    #[test]
    fn default_split_is_half_and_half() {
        let (h, s) = pools();
        let b = sample_rater_batch(&h, &s, 50, 0.5, 11).unwrap();
        assert_eq!(b.len(), 50);
        let humans = b
            .hidden_key()
            .values()
            .filter(|p| **p == Provenance::Human)
            .count();
        assert_eq!(humans, 25);
        let indices: Vec<usize> = b.items().iter().map(|i| i.index).collect();
        assert_eq!(indices, (0..50).collect::<Vec<_>>());
        for item in b.items() {
            let expected = match item.conversation.source() {
                Source::Human => Provenance::Human,
                _ => Provenance::Simulated,
            };
            assert_eq!(b.hidden_key()[&item.index], expected);
        }
        assert_eq!(b.conversation_ids().len(), 50);
        // shuffled: not all humans first
        assert!(b.items()[..25]
            .iter()
            .any(|i| i.conversation.source() == Source::Simulated));
    }

    #[test]
    fn zero_fraction_uses_only_simulated() {
        let (h, s) = pools();
        let b = sample_rater_batch(&h, &s, 4, 0.0, 1).unwrap();
        assert!(b.hidden_key().values().all(|p| *p == Provenance::Simulated));
    }

    #[test]
    fn same_seed_same_batch() {
        let (h, s) = pools();
        let a = sample_rater_batch(&h, &s, 30, 0.5, 42).unwrap();
        let b = sample_rater_batch(&h, &s, 30, 0.5, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_rater_batch(&h, &s, 30, 0.5, 43).unwrap();
        assert_ne!(a.conversation_ids(), c.conversation_ids());
    }

    #[test]
    fn sampling_errors() {
        let (h, s) = pools();
        assert!(matches!(
            sample_rater_batch(&h, &s, 100, 0.5, 1),
            Err(RealismError::InsufficientPool {
                pool: "human",
                needed: 50,
                available: 40
            })
        ));
        assert!(matches!(
            sample_rater_batch(&h, &h, 4, 0.5, 1),
            Err(RealismError::OverlappingPools(_))
        ));
        assert!(matches!(
            sample_rater_batch(&h, &s, 0, 0.5, 1),
            Err(RealismError::InvalidBatchSize)
        ));
        assert!(matches!(
            sample_rater_batch(&h, &s, 4, 1.5, 1),
            Err(RealismError::InvalidFraction(_))
        ));
    }

    #[test]
    fn export_and_reload() {
        let (h, s) = pools();
        let b = sample_rater_batch(&h, &s, 12, 0.5, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let export = export_batch(&b, dir.path()).unwrap();
        assert!(export.dir.join(ITEMS_FILE).exists());
        assert!(export.dir.join(INSTRUCTIONS_FILE).exists());
        assert!(export.key_path.exists());
        assert!(!export.key_path.starts_with(&export.dir));
        assert_eq!(BatchExport::for_dir(&export.dir), export);

        let readme = fs::read_to_string(export.dir.join(INSTRUCTIONS_FILE)).unwrap();
        assert!(readme.contains("Here are 12 user conversations"));

        let back = load_batch(&export).unwrap();
        assert_eq!(back, b);

        let items = fs::read_to_string(export.dir.join(ITEMS_FILE)).unwrap();
        assert!(audit_blinded_items(&items, &["A".to_string()]).is_empty());
        assert!(!items.contains("h-0"));
    }

    #[test]
    fn audit_flags_leaks() {
        let leaky =
            r#"{"index":0,"source":"human","turns":[{"speaker":"user","text":"human here"}]}"#;
        let findings = audit_blinded_items(leaky, &[]);
        assert!(findings
            .iter()
            .any(|f| f.contains("unexpected field 'source'")));
        assert!(findings.iter().any(|f| f.contains("'human'")));

        let clean =
            r#"{"index":0,"turns":[{"speaker":"user","text":"I am human, simulated, version B"}]}"#;
        assert!(audit_blinded_items(clean, &["B".to_string()]).is_empty());

        let versioned =
            r#"{"index":0,"turns":[{"speaker":"user","text":"hi","generator_version":"B"}]}"#;
        let findings = audit_blinded_items(versioned, &["B".to_string()]);
        assert!(findings.iter().any(|f| f.contains("metadata contains 'B'")));
    }
}
