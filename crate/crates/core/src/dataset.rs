//! Sample manifests, severity labels, stratified train/test splits and
//! stratified k-fold assignment.
//!
//! Every assignment is a function of the seed and of the record paths only:
//! records are grouped by stratum, sorted by path and shuffled with a seeded
//! ChaCha8 stream, so the input order of a manifest does not matter.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::DatasetError;

/// Tolerance when comparing stored and recomputed severities, in percent.
pub const SEVERITY_TOLERANCE: f64 = 1e-9;

/// Number of quantile bins used to stratify numeric labels.
pub const REGRESSION_BINS: usize = 4;

/// Stream offset separating fold shuffles from split shuffles.
const FOLD_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassLabel {
    /// Inoculated, showing Fusarium head blight.
    Fhb,
    /// Water-treated control.
    Wc,
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassLabel::Fhb => "FHB",
            ClassLabel::Wc => "WC",
        })
    }
}

impl FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FHB" => Ok(ClassLabel::Fhb),
            "WC" => Ok(ClassLabel::Wc),
            other => Err(format!("unknown class label '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Split {
    Train,
    Test,
    #[default]
    Unassigned,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "" | "unassigned" => Ok(Split::Unassigned),
            other => Err(format!("unknown split '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleRecord {
    pub path: String,
    pub class_label: Option<ClassLabel>,
    pub total_spikelets: Option<u32>,
    pub infected_spikelets: Option<u32>,
    pub severity_pct: Option<f64>,
    /// Days post-inoculation.
    pub dpi: Option<u32>,
    pub split: Split,
    /// 1-based fold index, set on training records only.
    pub fold: Option<usize>,
}

impl SampleRecord {
    pub fn new(path: impl Into<String>) -> Self {
        Self { path: path.into(), ..Default::default() }
    }

    pub fn with_class(mut self, label: ClassLabel) -> Self {
        self.class_label = Some(label);
        self
    }

    /// Sets both counts and the derived severity.
    pub fn with_counts(mut self, infected: u32, total: u32) -> Result<Self, DatasetError> {
        self.severity_pct = Some(compute_severity(infected, total)?);
        self.infected_spikelets = Some(infected);
        self.total_spikelets = Some(total);
        Ok(self)
    }

    pub fn with_total(mut self, total: u32) -> Self {
        self.total_spikelets = Some(total);
        self
    }

    /// Checks count ordering and that a stored severity agrees with the
    /// counts; fills the severity in when only the counts are known.
    pub fn normalize(&mut self) -> Result<(), DatasetError> {
        if let (Some(infected), Some(total)) = (self.infected_spikelets, self.total_spikelets) {
            let expected = compute_severity(infected, total)
                .map_err(|e| DatasetError::Label(format!("{}: {e}", self.path)))?;
            match self.severity_pct {
                Some(s) if (s - expected).abs() > SEVERITY_TOLERANCE => {
                    return Err(DatasetError::Label(format!(
                        "{}: stored severity {s} disagrees with {infected}/{total} = {expected}",
                        self.path
                    )))
                }
                Some(_) => {}
                None => self.severity_pct = Some(expected),
            }
        }
        if let Some(s) = self.severity_pct {
            if !(0.0..=100.0).contains(&s) {
                return Err(DatasetError::Label(format!("{}: severity {s} outside [0, 100]", self.path)));
            }
        }
        if let Some(f) = self.fold {
            if f == 0 {
                return Err(DatasetError::Label(format!("{}: folds are numbered from 1", self.path)));
            }
        }
        Ok(())
    }
}

/// FHB severity in percent: infected spikelets over total spikelets.
pub fn compute_severity(infected: u32, total: u32) -> Result<f64, DatasetError> {
    if total == 0 {
        return Err(DatasetError::Label("total spikelet count is zero".into()));
    }
    if infected > total {
        return Err(DatasetError::Label(format!(
            "{infected} infected spikelets exceed the total of {total}"
        )));
    }
    Ok(100.0 * infected as f64 / total as f64)
}

/// Label ranges of the known cohorts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cohort {
    /// Dataset I spikes, labelled FHB or WC.
    SpikesI,
    /// Dataset I heads, total spikelets in 7..=22.
    HeadsI,
    /// Dataset II heads, total in 13..=21 and infected in 2..=15.
    HeadsII,
}

impl Cohort {
    pub fn check(self, record: &SampleRecord) -> Result<(), DatasetError> {
        let fail = |what: &str| Err(DatasetError::Label(format!("{}: {what}", record.path)));
        let within = |v: Option<u32>, lo: u32, hi: u32| v.is_some_and(|v| (lo..=hi).contains(&v));
        match self {
            Cohort::SpikesI if record.class_label.is_none() => fail("missing FHB/WC label"),
            Cohort::HeadsI if !within(record.total_spikelets, 7, 22) => {
                fail("total spikelets outside 7..=22")
            }
            Cohort::HeadsII if !within(record.total_spikelets, 13, 21) => {
                fail("total spikelets outside 13..=21")
            }
            Cohort::HeadsII if !within(record.infected_spikelets, 2, 15) => {
                fail("infected spikelets outside 2..=15")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub records: Vec<SampleRecord>,
    pub seed: u64,
    pub test_fraction: f64,
    pub fold_count: usize,
}

impl DatasetManifest {
    pub fn new(records: Vec<SampleRecord>) -> Result<Self, DatasetError> {
        let manifest = Self { records, ..Default::default() };
        manifest.check_unique_paths()?;
        Ok(manifest)
    }

    fn check_unique_paths(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.path.as_str()) {
                return Err(DatasetError::DuplicatePath(r.path.clone()));
            }
        }
        Ok(())
    }

    pub fn count(&self, split: Split) -> usize {
        self.records.iter().filter(|r| r.split == split).count()
    }
}

/// Stratification key of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stratum {
    Class(ClassLabel),
    /// Quantile bin of a numeric label, 0-based.
    Bin(usize),
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stratum::Class(c) => write!(f, "{c}"),
            Stratum::Bin(b) => write!(f, "bin{b}"),
        }
    }
}

type NumericField = fn(&SampleRecord) -> Option<f64>;

const NUMERIC_LABELS: [NumericField; 3] = [
    |r| r.severity_pct,
    |r| r.infected_spikelets.map(f64::from),
    |r| r.total_spikelets.map(f64::from),
];

/// Stratum of every record: the class label when all records carry one,
/// otherwise quantile bins of the first numeric label present on all
/// records (severity, then infected count, then total count).
pub fn strata(records: &[SampleRecord]) -> Result<Vec<Stratum>, DatasetError> {
    if records.iter().all(|r| r.class_label.is_some()) {
        return Ok(records.iter().map(|r| Stratum::Class(r.class_label.unwrap())).collect());
    }
    for field in NUMERIC_LABELS {
        let values: Option<Vec<f64>> = records.iter().map(field).collect();
        if let Some(values) = values {
            return Ok(quantile_bins(&values).into_iter().map(Stratum::Bin).collect());
        }
    }
    let any_class = records.iter().any(|r| r.class_label.is_some());
    let missing = records
        .iter()
        .filter(|r| {
            if any_class {
                r.class_label.is_none()
            } else {
                NUMERIC_LABELS.iter().all(|f| f(r).is_none())
            }
        })
        .map(|r| r.path.clone())
        .collect::<Vec<_>>();
    let missing = if missing.is_empty() {
        // every record has some numeric label, just not the same one
        records.iter().filter(|r| r.severity_pct.is_none()).map(|r| r.path.clone()).collect()
    } else {
        missing
    };
    Err(DatasetError::MissingLabel(missing))
}

/// Bin index for each value. Edges sit at the sorted values of ranks
/// `floor(k * n / bins)`; equal values always share a bin.
pub fn quantile_bins(values: &[f64]) -> Vec<usize> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let edges: Vec<f64> = (1..REGRESSION_BINS).map(|k| sorted[k * n / REGRESSION_BINS]).collect();
    values.iter().map(|&v| edges.iter().filter(|&&e| v >= e).count()).collect()
}

/// Record indices per stratum, each list sorted by path.
fn groups(records: &[SampleRecord], keys: &[Stratum], include: impl Fn(&SampleRecord) -> bool) -> BTreeMap<Stratum, Vec<usize>> {
    let mut groups: BTreeMap<Stratum, Vec<usize>> = BTreeMap::new();
    for (i, (r, key)) in records.iter().zip(keys).enumerate() {
        if include(r) {
            groups.entry(*key).or_default().push(i);
        }
    }
    for members in groups.values_mut() {
        members.sort_by(|&a, &b| records[a].path.cmp(&records[b].path));
    }
    groups
}

/// `floor(x)` that forgives binary representation error, e.g. `0.29 * 100`.
fn floor_tolerant(x: f64) -> usize {
    (x + 1e-9).floor().max(0.0) as usize
}

/// Test-set size per stratum: `floor(count * fraction)` each, then one more
/// sample for the largest strata until the total reaches
/// `round(total * fraction)`. Strata with fewer than two samples stay in
/// training, and no stratum gives up its last training sample.
pub fn allocate_test_counts(counts: &[usize], fraction: f64) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    let target = floor_tolerant(total as f64 * fraction + 0.5);
    let mut alloc: Vec<usize> = counts
        .iter()
        .map(|&c| if c < 2 { 0 } else { floor_tolerant(c as f64 * fraction) })
        .collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    // largest first; ties keep stratum order
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]));
    let mut assigned: usize = alloc.iter().sum();
    for &s in &order {
        if assigned >= target {
            break;
        }
        if counts[s] >= 2 && alloc[s] + 1 < counts[s] {
            alloc[s] += 1;
            assigned += 1;
        }
    }
    alloc
}

/// Result of a stratified split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub manifest: DatasetManifest,
    pub warnings: Vec<String>,
}

pub fn stratified_split(
    manifest: &DatasetManifest,
    test_fraction: f64,
    seed: u64,
) -> Result<SplitOutcome, DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(test_fraction));
    }
    manifest.check_unique_paths()?;
    let keys = strata(&manifest.records)?;
    let groups = groups(&manifest.records, &keys, |_| true);

    let counts: Vec<usize> = groups.values().map(Vec::len).collect();
    let alloc = allocate_test_counts(&counts, test_fraction);

    let mut out = manifest.clone();
    out.seed = seed;
    out.test_fraction = test_fraction;
    out.fold_count = 0;
    let mut warnings = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for ((stratum, members), &n_test) in groups.iter().zip(&alloc) {
        if members.len() < 2 {
            warnings.push(format!(
                "stratum {stratum} has {} sample(s); kept entirely in training",
                members.len()
            ));
        }
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for (rank, &i) in shuffled.iter().enumerate() {
            let r = &mut out.records[i];
            r.split = if rank < n_test { Split::Test } else { Split::Train };
            r.fold = None;
        }
    }
    Ok(SplitOutcome { manifest: out, warnings })
}

/// Deals the training records into `k` folds, stratum by stratum, with one
/// running counter so fold sizes differ by at most one overall and within
/// every stratum.
pub fn assign_folds(manifest: &DatasetManifest, k: usize, seed: u64) -> Result<DatasetManifest, DatasetError> {
    let train = manifest.count(Split::Train);
    if k < 2 || k > train {
        return Err(DatasetError::Fold { k, train });
    }
    manifest.check_unique_paths()?;
    let keys = strata(&manifest.records)?;
    let groups = groups(&manifest.records, &keys, |r| r.split == Split::Train);

    let mut out = manifest.clone();
    out.fold_count = k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ FOLD_STREAM);
    let mut next = 0usize;
    for members in groups.values() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for &i in &shuffled {
            out.records[i].fold = Some(next % k + 1);
            next += 1;
        }
    }
    for r in out.records.iter_mut().filter(|r| r.split != Split::Train) {
        r.fold = None;
    }
    Ok(out)
}

const COLUMNS: [&str; 8] = [
    "path",
    "class_label",
    "total_spikelets",
    "infected_spikelets",
    "severity_pct",
    "dpi",
    "split",
    "fold",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

/// Writes the manifest as comma-separated text with `#` parameter lines.
pub fn write_manifest<W: Write>(manifest: &DatasetManifest, mut out: W) -> Result<(), DatasetError> {
    writeln!(out, "# seed={}", manifest.seed)?;
    writeln!(out, "# test_fraction={}", manifest.test_fraction)?;
    writeln!(out, "# fold_count={}", manifest.fold_count)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(COLUMNS)?;
    for r in &manifest.records {
        w.write_record([
            r.path.clone(),
            opt(&r.class_label),
            opt(&r.total_spikelets),
            opt(&r.infected_spikelets),
            opt(&r.severity_pct),
            opt(&r.dpi),
            r.split.to_string(),
            opt(&r.fold),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a manifest or a bare label table. Only the `path` column is
/// required; unknown columns are ignored.
pub fn read_manifest<R: Read>(mut input: R) -> Result<DatasetManifest, DatasetError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut manifest = DatasetManifest::default();
    for (i, line) in text.lines().enumerate() {
        let Some(comment) = line.strip_prefix('#') else { continue };
        let Some((key, value)) = comment.split_once('=') else { continue };
        let bad = |what: &str| DatasetError::Manifest { line: i + 1, reason: format!("invalid {what}") };
        match key.trim() {
            "seed" => manifest.seed = value.trim().parse().map_err(|_| bad("seed"))?,
            "test_fraction" => {
                manifest.test_fraction = value.trim().parse().map_err(|_| bad("test_fraction"))?
            }
            "fold_count" => manifest.fold_count = value.trim().parse().map_err(|_| bad("fold_count"))?,
            _ => {}
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let cols: Vec<Option<usize>> = COLUMNS.iter().map(|c| col(c)).collect();
    if cols[0].is_none() {
        return Err(DatasetError::Manifest { line: 1, reason: "no 'path' column".into() });
    }

    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |k: usize| cols[k].and_then(|c| row.get(c)).filter(|s| !s.is_empty());
        let parse_err = |name: &str, v: &str| DatasetError::Manifest {
            line,
            reason: format!("cannot parse {name} '{v}'"),
        };
        macro_rules! parsed {
            ($k:expr) => {
                match field($k) {
                    Some(v) => Some(v.parse().map_err(|_| parse_err(COLUMNS[$k], v))?),
                    None => None,
                }
            };
        }
        let mut record = SampleRecord {
            path: field(0).unwrap_or_default().to_string(),
            class_label: parsed!(1),
            total_spikelets: parsed!(2),
            infected_spikelets: parsed!(3),
            severity_pct: parsed!(4),
            dpi: parsed!(5),
            split: parsed!(6).unwrap_or_default(),
            fold: parsed!(7),
        };
        if record.path.is_empty() {
            return Err(DatasetError::Manifest { line, reason: "empty path".into() });
        }
        record.normalize()?;
        manifest.records.push(record);
    }
    manifest.check_unique_paths()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn classed(n_fhb: usize, n_wc: usize) -> DatasetManifest {
        let records = (0..n_fhb)
            .map(|i| SampleRecord::new(format!("fhb/{i:03}.ply")).with_class(ClassLabel::Fhb))
            .chain((0..n_wc).map(|i| SampleRecord::new(format!("wc/{i:03}.ply")).with_class(ClassLabel::Wc)))
            .collect();
        DatasetManifest::new(records).unwrap()
    }

    fn test_count(m: &DatasetManifest, label: ClassLabel) -> usize {
        m.records.iter().filter(|r| r.class_label == Some(label) && r.split == Split::Test).count()
    }

    #[test]
    fn severity_values() {
        assert_eq!(compute_severity(7, 14).unwrap(), 50.0);
        assert_eq!(compute_severity(0, 16).unwrap(), 0.0);
        let s = compute_severity(12, 13).unwrap();
        assert_eq!((s * 10.0).round() / 10.0, 92.3);
        assert!(compute_severity(1, 0).is_err());
        assert!(compute_severity(5, 4).is_err());
    }

    #[test]
    fn severity_extremes_of_dataset_two() {
        // infected 2..=15, total 13..=21: the largest and smallest ratios
        let mut ratios = Vec::new();
        for total in 13..=21 {
            for infected in 2..=15.min(total) {
                ratios.push((compute_severity(infected, total).unwrap(), infected, total));
            }
        }
        let hits: Vec<_> = ratios.iter().filter(|r| (r.0 * 10.0).round() / 10.0 == 92.3).collect();
        assert_eq!(hits.len(), 1);
        assert_eq!((hits[0].1, hits[0].2), (12, 13));
    }

    #[test]
    fn ten_samples_fifth() {
        let out = stratified_split(&classed(5, 5), 0.2, 1).unwrap().manifest;
        assert_eq!(test_count(&out, ClassLabel::Fhb), 1);
        assert_eq!(test_count(&out, ClassLabel::Wc), 1);
    }

    #[test]
    fn dataset_one_spikes() {
        let out = stratified_split(&classed(42, 174), 0.1, 42).unwrap().manifest;
        assert_eq!(out.count(Split::Test), 22);
        assert_eq!(test_count(&out, ClassLabel::Fhb), 4);
        assert_eq!(test_count(&out, ClassLabel::Wc), 18);
    }

    #[test]
    fn allocation_rule() {
        assert_eq!(allocate_test_counts(&[42, 174], 0.1), vec![4, 18]);
        assert_eq!(allocate_test_counts(&[5, 5], 0.2), vec![1, 1]);
        assert_eq!(allocate_test_counts(&[100], 0.29), vec![29]);
        // single-sample stratum stays in training
        assert_eq!(allocate_test_counts(&[1, 9], 0.5), vec![0, 5]);
    }

    #[test]
    fn eighty_twenty() {
        let records = (0..100)
            .map(|i| SampleRecord::new(format!("h{i}")).with_counts(2 + i % 13, 15 + i % 6).unwrap())
            .collect();
        let m = DatasetManifest::new(records).unwrap();
        let out = stratified_split(&m, 0.2, 9).unwrap().manifest;
        assert_eq!(out.count(Split::Test), 20);
        assert_eq!(out.count(Split::Train), 80);
    }

    #[test]
    fn small_stratum_warns() {
        let mut m = classed(1, 10);
        m.records[0].path = "solo".into();
        let out = stratified_split(&m, 0.3, 0).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.manifest.records[0].split, Split::Train);
    }

    #[test]
    fn invalid_fraction_and_missing_labels() {
        assert!(matches!(stratified_split(&classed(3, 3), 1.0, 0), Err(DatasetError::InvalidFraction(_))));
        let mut m = classed(3, 3);
        m.records[2].class_label = None;
        match stratified_split(&m, 0.5, 0) {
            Err(DatasetError::MissingLabel(paths)) => assert_eq!(paths, vec!["fhb/002.ply".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fold_sizes() {
        let m = stratified_split(&classed(50, 50), 0.5, 3).unwrap().manifest;
        let m = {
            let mut m = m;
            for r in &mut m.records {
                r.split = Split::Train;
            }
            m
        };
        let out = assign_folds(&m, 5, 3).unwrap();
        for fold in 1..=5 {
            for label in [ClassLabel::Fhb, ClassLabel::Wc] {
                let n = out.records.iter().filter(|r| r.fold == Some(fold) && r.class_label == Some(label)).count();
                assert_eq!(n, 10);
            }
        }

        let mut m = classed(40, 57);
        for r in &mut m.records {
            r.split = Split::Train;
        }
        let out = assign_folds(&m, 5, 8).unwrap();
        let mut sizes: Vec<usize> = (1..=5).map(|f| out.records.iter().filter(|r| r.fold == Some(f)).count()).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![20, 20, 19, 19, 19]);
        assert_eq!(out, assign_folds(&m, 5, 8).unwrap());
    }

    #[test]
    fn too_many_folds() {
        let m = stratified_split(&classed(3, 3), 0.5, 0).unwrap().manifest;
        assert!(matches!(assign_folds(&m, 5, 0), Err(DatasetError::Fold { k: 5, train: 3 })));
        assert!(matches!(assign_folds(&m, 1, 0), Err(DatasetError::Fold { .. })));
    }

    #[test]
    fn duplicate_paths_rejected() {
        let r = SampleRecord::new("a").with_class(ClassLabel::Wc);
        assert!(matches!(DatasetManifest::new(vec![r.clone(), r]), Err(DatasetError::DuplicatePath(_))));
    }

    #[test]
    fn quantile_bins_keep_ties_together() {
        assert_eq!(quantile_bins(&[1.0, 2.0, 3.0, 4.0]), vec![0, 1, 2, 3]);
        assert_eq!(quantile_bins(&[5.0, 5.0, 5.0, 1.0]), vec![3, 3, 3, 0]);
    }

    #[test]
    fn cohort_ranges() {
        let r = SampleRecord::new("x").with_counts(12, 13).unwrap();
        assert!(Cohort::HeadsII.check(&r).is_ok());
        assert!(Cohort::HeadsI.check(&r).is_ok());
        let r = SampleRecord::new("x").with_counts(1, 13).unwrap();
        assert!(Cohort::HeadsII.check(&r).is_err());
        assert!(Cohort::SpikesI.check(&r).is_err());
    }

    #[test]
    fn manifest_text_round_trip() {
        let mut m = classed(4, 6);
        m.records[0].dpi = Some(14);
        m.records[1] = m.records[1].clone().with_counts(3, 16).unwrap();
        let m = stratified_split(&m, 0.2, 5).unwrap().manifest;
        let m = assign_folds(&m, 2, 5).unwrap();
        let mut buf = Vec::new();
        write_manifest(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# seed=5\n# test_fraction=0.2\n# fold_count=2\npath,class_label,"));
        assert!(!text.contains('\r'));
        let back = read_manifest(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn label_table_fills_severity() {
        let table = "path,total_spikelets,infected_spikelets\na.ply,14,7\nb.ply,13,12\n";
        let m = read_manifest(table.as_bytes()).unwrap();
        assert_eq!(m.records[0].severity_pct, Some(50.0));
        assert_eq!(m.records[1].split, Split::Unassigned);
        let bad = "path,total_spikelets,infected_spikelets,severity_pct\na.ply,14,7,40\n";
        assert!(matches!(read_manifest(bad.as_bytes()), Err(DatasetError::Label(_))));
    }

    proptest! {
        #[test]
        fn input_order_does_not_matter(n_a in 2usize..30, n_b in 2usize..30, seed in any::<u64>(), rot in 0usize..60) {
            let m = classed(n_a, n_b);
            let mut rotated = m.clone();
            let len = rotated.records.len();
            rotated.records.rotate_left(rot % len);
            let a = assign_folds(&stratified_split(&m, 0.25, seed).unwrap().manifest, 2, seed).unwrap();
            let b = assign_folds(&stratified_split(&rotated, 0.25, seed).unwrap().manifest, 2, seed).unwrap();
            for r in &a.records {
                let other = b.records.iter().find(|o| o.path == r.path).unwrap();
                prop_assert_eq!(r.split, other.split);
                prop_assert_eq!(r.fold, other.fold);
            }
        }
    }
}
