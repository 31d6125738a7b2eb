//! Dataset manifests: labeled file lists grouped by generator, with
//! stratified subsampling and the validation/test split protocol.
//!
//! Directory convention: `<root>/<generator>/<nature|ai>/<file>`, label 0
//! for `nature`, 1 for `ai`. Manifests serialize as tab-separated text:
//! `path<TAB>label<TAB>generator`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub label: u8,
    pub generator_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub split: Split,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, split: Split) -> Result<Self> {
        for e in &entries {
            if e.label > 1 {
                return Err(Error::Data(format!("label {} for {} outside {{0,1}}", e.label, e.path)));
            }
        }
        Ok(DatasetManifest { entries, split })
    }

    /// Scan `<root>/<generator>/<nature|ai>/` for image files, sorted for
    /// determinism.
    pub fn from_directory(root: &Path, split: Split) -> Result<Self> {
        let mut entries = Vec::new();
        let mut generators: Vec<_> = std::fs::read_dir(root)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .filter(|d| d.path().is_dir())
            .collect();
        generators.sort_by_key(|d| d.file_name());
        for gen_dir in generators {
            let generator_id = gen_dir.file_name().to_string_lossy().into_owned();
            for (class_dir, label) in [("nature", 0u8), ("ai", 1u8)] {
                let dir = gen_dir.path().join(class_dir);
                if !dir.is_dir() {
                    continue;
                }
                let mut files: Vec<_> = std::fs::read_dir(&dir)?
                    .collect::<std::io::Result<Vec<_>>>()?
                    .into_iter()
                    .map(|d| d.path())
                    .filter(|p| {
                        matches!(
                            p.extension().and_then(|e| e.to_str()),
                            Some("ppm") | Some("pgm")
                        )
                    })
                    .collect();
                files.sort();
                for path in files {
                    entries.push(ManifestEntry {
                        path: path.to_string_lossy().into_owned(),
                        label,
                        generator_id: generator_id.clone(),
                    });
                }
            }
        }
        if entries.is_empty() {
            return Err(Error::Data(format!("no .ppm/.pgm files under {}", root.display())));
        }
        DatasetManifest::new(entries, split)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.path, e.label, e.generator_id));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path, split: Split) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Data(format!(
                    "manifest line {} has {} fields, expected 3",
                    i + 1,
                    fields.len()
                )));
            }
            let label: u8 = fields[1]
                .parse()
                .map_err(|_| Error::Data(format!("bad label on manifest line {}", i + 1)))?;
            entries.push(ManifestEntry {
                path: fields[0].to_string(),
                label,
                generator_id: fields[2].to_string(),
            });
        }
        DatasetManifest::new(entries, split)
    }

    /// Sorted distinct generator ids.
    pub fn generators(&self) -> Vec<String> {
        let mut g: Vec<String> = self.entries.iter().map(|e| e.generator_id.clone()).collect();
        g.sort();
        g.dedup();
        g
    }

    /// Entry indices per (generator, label) stratum, in a fixed sorted order.
    fn strata(&self) -> BTreeMap<(String, u8), Vec<usize>> {
        let mut map: BTreeMap<(String, u8), Vec<usize>> = BTreeMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            map.entry((e.generator_id.clone(), e.label)).or_default().push(i);
        }
        map
    }
}

/// Draw exactly `total / (2 * generators)` entries uniformly without
/// replacement from every (class, generator) stratum.
pub fn stratified_subsample(
    manifest: &DatasetManifest,
    total: usize,
    rng: &mut Rng,
) -> Result<DatasetManifest> {
    let generators = manifest.generators();
    let stratum_count = 2 * generators.len();
    if stratum_count == 0 || total % stratum_count != 0 {
        return Err(Error::Parameter(format!(
            "total {total} not divisible by {stratum_count} strata"
        )));
    }
    let per_stratum = total / stratum_count;
    let strata = manifest.strata();
    // Every class must exist for every generator.
    for g in &generators {
        for label in [0u8, 1] {
            if !strata.contains_key(&(g.clone(), label)) {
                return Err(Error::Data(format!("stratum ({g}, label {label}) is empty")));
            }
        }
    }
    let mut picked = Vec::with_capacity(total);
    for ((g, label), indices) in &strata {
        if indices.len() < per_stratum {
            return Err(Error::Data(format!(
                "stratum ({g}, label {label}) holds {} entries, need {per_stratum}",
                indices.len()
            )));
        }
        for k in rng.sample_indices(indices.len(), per_stratum) {
            picked.push(manifest.entries[indices[k]].clone());
        }
    }
    DatasetManifest::new(picked, manifest.split)
}

/// Split every stratum 50/50 into validation and test; odd strata give the
/// extra entry to validation.
pub fn split_val_test(
    manifest: &DatasetManifest,
    rng: &mut Rng,
) -> Result<(DatasetManifest, DatasetManifest)> {
    let mut val = Vec::new();
    let mut test = Vec::new();
    for ((g, label), indices) in manifest.strata() {
        if indices.len() < 2 {
            return Err(Error::Data(format!(
                "stratum ({g}, label {label}) needs at least 2 entries to split"
            )));
        }
        let mut shuffled = indices.clone();
        rng.shuffle(&mut shuffled);
        let val_n = shuffled.len().div_ceil(2);
        for (pos, &i) in shuffled.iter().enumerate() {
            let entry = manifest.entries[i].clone();
            if pos < val_n {
                val.push(entry);
            } else {
                test.push(entry);
            }
        }
    }
    Ok((
        DatasetManifest::new(val, Split::Val)?,
        DatasetManifest::new(test, Split::Test)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_manifest(generators: usize, per_stratum: usize) -> DatasetManifest {
        let mut entries = Vec::new();
        for g in 0..generators {
            for label in [0u8, 1] {
                for i in 0..per_stratum {
                    entries.push(ManifestEntry {
                        path: format!("g{g}/{}/{i}.ppm", if label == 0 { "nature" } else { "ai" }),
                        label,
                        generator_id: format!("g{g}"),
                    });
                }
            }
        }
        DatasetManifest::new(entries, Split::Train).unwrap()
    }

    #[test]
    fn protocol_counts_at_full_scale() {
        let manifest = toy_manifest(8, 7000);
        let mut rng = Rng::new(1);
        let sub = stratified_subsample(&manifest, 100_000, &mut rng).unwrap();
        assert_eq!(sub.entries.len(), 100_000);
        for g in sub.generators() {
            for label in [0u8, 1] {
                let n = sub
                    .entries
                    .iter()
                    .filter(|e| e.generator_id == g && e.label == label)
                    .count();
                assert_eq!(n, 6250, "stratum ({g}, {label})");
            }
        }
        // Exactly balanced label histogram.
        let pos = sub.entries.iter().filter(|e| e.label == 1).count();
        assert_eq!(pos * 2, sub.entries.len());
    }

    #[test]
    fn subsample_full_population_is_identity_up_to_order() {
        let manifest = toy_manifest(2, 5);
        let mut rng = Rng::new(2);
        let sub = stratified_subsample(&manifest, 20, &mut rng).unwrap();
        let mut got: Vec<String> = sub.entries.iter().map(|e| e.path.clone()).collect();
        let mut want: Vec<String> = manifest.entries.iter().map(|e| e.path.clone()).collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn subsample_matches_replayed_draw_sequence() {
        let manifest = toy_manifest(2, 6);
        let seed = 33;
        let sub = stratified_subsample(&manifest, 8, &mut Rng::new(seed)).unwrap();

        // Replay: same stratum order (BTreeMap: generator asc, label asc),
        // same draw calls.
        let mut rng = Rng::new(seed);
        let mut want = Vec::new();
        for g in ["g0", "g1"] {
            for label in [0u8, 1] {
                let indices: Vec<usize> = manifest
                    .entries
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.generator_id == g && e.label == label)
                    .map(|(i, _)| i)
                    .collect();
                for k in rng.sample_indices(indices.len(), 2) {
                    want.push(manifest.entries[indices[k]].path.clone());
                }
            }
        }
        let got: Vec<String> = sub.entries.iter().map(|e| e.path.clone()).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn insufficient_stratum_names_the_stratum() {
        let manifest = toy_manifest(2, 3);
        let err = stratified_subsample(&manifest, 16, &mut Rng::new(1)).unwrap_err();
        assert!(err.to_string().contains("g0"), "{err}");
    }

    #[test]
    fn val_test_split_counts() {
        let manifest = toy_manifest(8, 2000); // 32,000 entries
        let (val, test) = split_val_test(&manifest, &mut Rng::new(7)).unwrap();
        assert_eq!(val.entries.len(), 16_000);
        assert_eq!(test.entries.len(), 16_000);
        assert_eq!(val.split, Split::Val);
        assert_eq!(test.split, Split::Test);

        // Disjoint and exhaustive.
        let mut all: Vec<String> = val
            .entries
            .iter()
            .chain(&test.entries)
            .map(|e| e.path.clone())
            .collect();
        all.sort();
        let mut want: Vec<String> = manifest.entries.iter().map(|e| e.path.clone()).collect();
        want.sort();
        assert_eq!(all, want);
    }

    #[test]
    fn odd_stratum_gives_extra_to_validation() {
        let mut entries = Vec::new();
        for i in 0..3 {
            entries.push(ManifestEntry {
                path: format!("g0/nature/{i}.ppm"),
                label: 0,
                generator_id: "g0".into(),
            });
        }
        for i in 0..2 {
            entries.push(ManifestEntry {
                path: format!("g0/ai/{i}.ppm"),
                label: 1,
                generator_id: "g0".into(),
            });
        }
        let manifest = DatasetManifest::new(entries, Split::Test).unwrap();
        let (val, test) = split_val_test(&manifest, &mut Rng::new(3)).unwrap();
        assert_eq!(val.entries.iter().filter(|e| e.label == 0).count(), 2);
        assert_eq!(test.entries.iter().filter(|e| e.label == 0).count(), 1);
        assert_eq!(val.entries.iter().filter(|e| e.label == 1).count(), 1);
        assert_eq!(test.entries.iter().filter(|e| e.label == 1).count(), 1);
    }

    #[test]
    fn manifest_file_round_trip() {
        let manifest = toy_manifest(2, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.tsv");
        manifest.save(&path).unwrap();
        let loaded = DatasetManifest::load(&path, Split::Train).unwrap();
        assert_eq!(manifest, loaded);
    }
}
