//! Datasets: one item index in `[1, N]` per user, with a plain-text
//! canonical format (`N=<int>` header, then one item per line), synthetic
//! generators, and ingestion from raw check-in and income exports.

use crate::error::{Error, Result};
use crate::field::EncodedRecord;
use crate::seed::{sample_distinct, substream, uniform_below, StreamTag};
use rand_distr::{Distribution, StandardNormal};
use std::collections::BTreeMap;
use std::path::Path;

/// Largest accepted item-domain size; guards parsers against absurd
/// allocations from corrupt headers.
pub const MAX_ITEMS: usize = 1_000_000;

/// A named list of per-user item indices over a fixed domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    name: String,
    n_items: usize,
    items: Vec<usize>,
    provenance: String,
}

impl Dataset {
    pub fn new(name: impl Into<String>, n_items: usize, items: Vec<usize>) -> Result<Self> {
        if n_items == 0 || n_items > MAX_ITEMS {
            return Err(Error::domain(format!(
                "item domain size {n_items} outside [1, {MAX_ITEMS}]"
            )));
        }
        if let Some(&bad) = items.iter().find(|&&i| i == 0 || i > n_items) {
            return Err(Error::domain(format!(
                "item {bad} outside the domain [1, {n_items}]"
            )));
        }
        Ok(Dataset {
            name: name.into(),
            n_items,
            items,
            provenance: String::new(),
        })
    }

    /// Attach a free-text note on how the dataset was constructed.
    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_users(&self) -> usize {
        self.items.len()
    }

    pub fn items(&self) -> &[usize] {
        &self.items
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Parse the canonical format: `N=<int>` on the first line, one item
    /// index per following line. Blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("empty input"))?
            .trim();
        let n_items: usize = header
            .strip_prefix("N=")
            .ok_or_else(|| Error::parse(format!("first line must be N=<int>, got {header:?}")))?
            .trim()
            .parse()
            .map_err(|e| Error::parse(format!("bad item-domain size: {e}")))?;
        if n_items == 0 || n_items > MAX_ITEMS {
            return Err(Error::parse(format!(
                "item domain size {n_items} outside [1, {MAX_ITEMS}]"
            )));
        }
        let mut items = Vec::new();
        for (no, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let item: usize = line
                .parse()
                .map_err(|e| Error::parse(format!("line {}: {e}", no + 2)))?;
            if item == 0 || item > n_items {
                return Err(Error::parse(format!(
                    "line {}: item {item} outside [1, {n_items}]",
                    no + 2
                )));
            }
            items.push(item);
        }
        Dataset::new("dataset", n_items, items)
    }

    /// Serialize to the canonical format.
    pub fn write(&self) -> String {
        let mut out = format!("N={}\n", self.n_items);
        for &i in &self.items {
            out.push_str(&format!("{i}\n"));
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut ds = Dataset::parse(&text)?;
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            ds.name = stem.to_string();
        }
        Ok(ds)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.write())?;
        Ok(())
    }

    /// Per-item user counts.
    pub fn histogram(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_items];
        for &i in &self.items {
            counts[i - 1] += 1;
        }
        counts
    }

    /// Per-item frequencies; sums to 1 for non-empty datasets.
    pub fn normalized_histogram(&self) -> Vec<f64> {
        let n = self.items.len() as f64;
        self.histogram().iter().map(|&c| c as f64 / n).collect()
    }

    /// One-hot record per user.
    pub fn encode(&self) -> Result<Vec<EncodedRecord>> {
        self.items
            .iter()
            .map(|&i| EncodedRecord::one_hot(i, self.n_items))
            .collect()
    }

    /// Uniform subsample of `k` users without replacement, keeping the
    /// original user order.
    pub fn subsample(&self, k: usize, master_seed: u64) -> Result<Dataset> {
        if k > self.items.len() {
            return Err(Error::domain(format!(
                "cannot subsample {k} users from {}",
                self.items.len()
            )));
        }
        let mut rng = substream(master_seed, StreamTag::Subsample, 0, 0);
        let mut picked = sample_distinct(&mut rng, self.items.len(), k);
        picked.sort_unstable();
        let items = picked.into_iter().map(|i| self.items[i]).collect();
        Ok(Dataset {
            name: format!("{}-sub{k}", self.name),
            n_items: self.n_items,
            items,
            provenance: self.provenance.clone(),
        })
    }

    /// Split users into consecutive groups of the given sizes.
    pub fn partition_by_sizes(&self, sizes: &[usize]) -> Result<Vec<Dataset>> {
        if sizes.iter().sum::<usize>() != self.items.len() {
            return Err(Error::contract(format!(
                "group sizes sum to {}, dataset has {} users",
                sizes.iter().sum::<usize>(),
                self.items.len()
            )));
        }
        let mut out = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for (g, &s) in sizes.iter().enumerate() {
            out.push(Dataset {
                name: format!("{}-g{g}", self.name),
                n_items: self.n_items,
                items: self.items[start..start + s].to_vec(),
                provenance: self.provenance.clone(),
            });
            start += s;
        }
        Ok(out)
    }
}

/// `n` users with items i.i.d. uniform over `[1, n_items]`.
pub fn synth_uniform(n: usize, n_items: usize, master_seed: u64) -> Result<Dataset> {
    if n == 0 || n_items == 0 || n_items > MAX_ITEMS {
        return Err(Error::domain("need n >= 1 and a valid item domain"));
    }
    let mut rng = substream(master_seed, StreamTag::Synthesis, 0, 0);
    let items = (0..n)
        .map(|_| uniform_below(&mut rng, n_items as u64) as usize + 1)
        .collect();
    Ok(Dataset {
        name: "uniform".into(),
        n_items,
        items,
        provenance: format!("synthetic: iid uniform over [1,{n_items}], seed {master_seed}"),
    })
}

/// `n` users with items from a discretized standard normal: draws are
/// clipped to `[-3, 3]` and binned into `n_items` equal-width intervals.
pub fn synth_normal(n: usize, n_items: usize, master_seed: u64) -> Result<Dataset> {
    if n == 0 || n_items == 0 || n_items > MAX_ITEMS {
        return Err(Error::domain("need n >= 1 and a valid item domain"));
    }
    let mut rng = substream(master_seed, StreamTag::Synthesis, 1, 0);
    let width = 6.0 / n_items as f64;
    let items = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let clipped = z.clamp(-3.0, 3.0);
            (((clipped + 3.0) / width) as usize).min(n_items - 1) + 1
        })
        .collect();
    Ok(Dataset {
        name: "normal".into(),
        n_items,
        items,
        provenance: format!(
            "synthetic: standard normal clipped to [-3,3], {n_items} equal bins, seed {master_seed}"
        ),
    })
}

/// Geographic binning grid for check-in ingestion. The default covers
/// latitudes 30..45 and longitudes -100..-80 in 5-degree cells: a 3x4 grid
/// of 12 cells, indexed row-major from the south-west corner.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckinBinning {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub cell_degrees: f64,
}

impl Default for CheckinBinning {
    fn default() -> Self {
        CheckinBinning {
            lat_min: 30.0,
            lat_max: 45.0,
            lon_min: -100.0,
            lon_max: -80.0,
            cell_degrees: 5.0,
        }
    }
}

impl CheckinBinning {
    pub fn rows(&self) -> usize {
        ((self.lat_max - self.lat_min) / self.cell_degrees).round() as usize
    }

    pub fn cols(&self) -> usize {
        ((self.lon_max - self.lon_min) / self.cell_degrees).round() as usize
    }

    pub fn n_cells(&self) -> usize {
        self.rows() * self.cols()
    }

    fn check(&self) -> Result<()> {
        if !(self.cell_degrees > 0.0)
            || self.lat_max <= self.lat_min
            || self.lon_max <= self.lon_min
        {
            return Err(Error::domain("degenerate binning grid"));
        }
        if self.n_cells() == 0 || self.n_cells() > MAX_ITEMS {
            return Err(Error::domain(format!(
                "grid with {} cells outside [1, {MAX_ITEMS}]",
                self.n_cells()
            )));
        }
        Ok(())
    }

    /// 1-based cell index for a coordinate, or None when out of range.
    /// Points on the far edges fall into the last row/column.
    pub fn cell(&self, lat: f64, lon: f64) -> Option<usize> {
        if !(lat >= self.lat_min && lat <= self.lat_max)
            || !(lon >= self.lon_min && lon <= self.lon_max)
        {
            return None;
        }
        let row = (((lat - self.lat_min) / self.cell_degrees) as usize).min(self.rows() - 1);
        let col = (((lon - self.lon_min) / self.cell_degrees) as usize).min(self.cols() - 1);
        Some(row * self.cols() + col + 1)
    }
}

/// Counts from one ingestion pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub rows_read: u64,
    pub rows_skipped: u64,
    pub users: u64,
}

/// Ingest whitespace-delimited check-in logs. Accepts 5-field rows
/// (user, timestamp, latitude, longitude, place id) and 3-field rows
/// (user, latitude, longitude). Each user is assigned the grid cell they
/// visited most often, ties broken by lowest cell index; user order in the
/// output is ascending user id.
pub fn ingest_checkins_text(
    text: &str,
    binning: &CheckinBinning,
) -> Result<(Dataset, IngestReport)> {
    binning.check()?;
    let mut report = IngestReport::default();
    let mut visits: BTreeMap<i64, BTreeMap<usize, u64>> = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        report.rows_read += 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let coords = match fields.as_slice() {
            [user, _, lat, lon, _] => Some((user, lat, lon)),
            [user, lat, lon] => Some((user, lat, lon)),
            _ => None,
        };
        let parsed = coords.and_then(|(user, lat, lon)| {
            match (user.parse::<i64>(), lat.parse::<f64>(), lon.parse::<f64>()) {
                (Ok(u), Ok(la), Ok(lo)) => Some((u, la, lo)),
                _ => None,
            }
        });
        let Some((user, lat, lon)) = parsed else {
            report.rows_skipped += 1;
            continue;
        };
        match binning.cell(lat, lon) {
            Some(cell) => *visits.entry(user).or_default().entry(cell).or_insert(0) += 1,
            None => report.rows_skipped += 1,
        }
    }
    let items: Vec<usize> = visits
        .values()
        .map(|cells| {
            cells
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(&cell, _)| cell)
                .expect("non-empty by construction")
        })
        .collect();
    report.users = items.len() as u64;
    if items.is_empty() {
        return Err(Error::parse("no usable check-in rows"));
    }
    let ds = Dataset::new("checkins", binning.n_cells(), items)?.with_provenance(format!(
        "check-ins binned on [{},{}]x[{},{}] in {} degree cells",
        binning.lat_min, binning.lat_max, binning.lon_min, binning.lon_max, binning.cell_degrees
    ));
    Ok((ds, report))
}

/// Ingest delimited text with one numeric income per row, taken from the
/// 0-based `column` after splitting on commas and whitespace. Items are
/// `floor(income / width) + 1`; the domain size is the largest item seen.
/// Negative or malformed values are skipped and counted.
pub fn ingest_income_text(
    text: &str,
    width: f64,
    column: usize,
) -> Result<(Dataset, IngestReport)> {
    if !(width > 0.0) {
        return Err(Error::domain("interval width must be positive"));
    }
    let mut report = IngestReport::default();
    let mut items = Vec::new();
    let mut max_item = 0usize;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        report.rows_read += 1;
        let value = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .nth(column)
            .and_then(|f| f.parse::<f64>().ok());
        let Some(income) = value.filter(|v| *v >= 0.0 && v.is_finite()) else {
            report.rows_skipped += 1;
            continue;
        };
        let interval = (income / width).floor();
        if interval >= MAX_ITEMS as f64 {
            report.rows_skipped += 1;
            continue;
        }
        let item = interval as usize + 1;
        max_item = max_item.max(item);
        items.push(item);
    }
    report.users = items.len() as u64;
    if items.is_empty() {
        return Err(Error::parse("no usable income rows"));
    }
    let ds = Dataset::new("income", max_item, items)?
        .with_provenance(format!("incomes binned into intervals of width {width}"));
    Ok((ds, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn canonical_format_roundtrips() {
        let ds = Dataset::new("t", 4, vec![1, 4, 2, 2]).unwrap();
        let text = ds.write();
        assert_eq!(text, "N=4\n1\n4\n2\n2\n");
        let back = Dataset::parse(&text).unwrap();
        assert_eq!(back.n_items(), 4);
        assert_eq!(back.items(), ds.items());
    }

    #[test]
    fn parser_rejects_malformed_inputs() {
        assert!(Dataset::parse("").is_err());
        assert!(Dataset::parse("4\n1\n").is_err());
        assert!(Dataset::parse("N=0\n").is_err());
        assert!(Dataset::parse("N=9999999999\n").is_err());
        assert!(Dataset::parse("N=3\n0\n").is_err());
        assert!(Dataset::parse("N=3\n4\n").is_err());
        assert!(Dataset::parse("N=3\nx\n").is_err());
        assert!(Dataset::parse("N=3\n1\n\n2\n").is_ok());
    }

    #[test]
    fn histogram_conserves_mass() {
        let ds = Dataset::new("t", 3, vec![1, 1, 2, 3, 3, 3]).unwrap();
        assert_eq!(ds.histogram(), vec![2, 1, 3]);
        let h = ds.normalized_histogram();
        assert_relative_eq!(h.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let enc = ds.encode().unwrap();
        assert_eq!(enc.len(), 6);
        assert_eq!(enc[3].item(), Some(3));
    }

    #[test]
    fn uniform_synthesis_is_deterministic_and_balanced() {
        let a = synth_uniform(1000, 30, 42).unwrap();
        let b = synth_uniform(1000, 30, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synth_uniform(1000, 30, 43).unwrap());
        assert_eq!(a.n_users(), 1000);
        let h = a.normalized_histogram();
        let p: f64 = 1.0 / 30.0;
        let se = (p * (1.0 - p) / 1000.0).sqrt();
        for (j, &f) in h.iter().enumerate() {
            assert!(
                (f - p).abs() <= 4.0 * se,
                "item {}: frequency {f} too far from {p}",
                j + 1
            );
        }
        let single = synth_uniform(1, 30, 7).unwrap();
        assert!((1..=30).contains(&single.items()[0]));
    }

    #[test]
    fn normal_synthesis_concentrates_in_central_bins() {
        let ds = synth_normal(3000, 30, 42).unwrap();
        assert_eq!(ds, synth_normal(3000, 30, 42).unwrap());
        assert!(ds.items().iter().all(|&i| (1..=30).contains(&i)));
        let h = ds.histogram();
        let central = h[14] + h[15];
        let edges = h[0] + h[29];
        assert!(
            central > 10 * edges.max(1),
            "central {central} vs edges {edges}"
        );
    }

    #[test]
    fn default_grid_has_12_cells_with_row_major_indexing() {
        let b = CheckinBinning::default();
        assert_eq!((b.rows(), b.cols(), b.n_cells()), (3, 4, 12));
        assert_eq!(b.cell(31.0, -99.0), Some(1));
        assert_eq!(b.cell(36.0, -99.0), Some(5));
        assert_eq!(b.cell(44.9, -80.1), Some(12));
        assert_eq!(b.cell(45.0, -80.0), Some(12), "far edges clamp inward");
        assert_eq!(b.cell(29.9, -99.0), None);
        assert_eq!(b.cell(31.0, -79.9), None);
    }

    #[test]
    fn checkin_ingestion_assigns_majority_cell() {
        let text = "\
7\t2010-10-19T23:55:27Z\t31.0\t-99.0\t101
7\t2010-10-20T23:55:27Z\t31.0\t-99.0\t101
7\t2010-10-21T23:55:27Z\t36.0\t-99.0\t102
3\t44.9\t-80.1
3\t31.0\t-99.0
not a row
9\t2010-10-19T00:00:00Z\t10.0\t-99.0\t103
";
        let (ds, report) = ingest_checkins_text(text, &CheckinBinning::default()).unwrap();
        assert_eq!(report.rows_read, 7);
        assert_eq!(report.rows_skipped, 2, "malformed row and out-of-range row");
        assert_eq!(report.users, 2);
        assert_eq!(ds.n_items(), 12);
        // User 3 ties between cells 1 and 12: lowest index wins. User 7's
        // majority cell is 1.
        assert_eq!(ds.items(), &[1, 1]);
        assert!(ingest_checkins_text("junk\n", &CheckinBinning::default()).is_err());
    }

    #[test]
    fn single_user_unanimous_cell() {
        let (ds, _) = ingest_checkins_text("5\t36.0\t-99.0\n", &CheckinBinning::default()).unwrap();
        assert_eq!(ds.items(), &[5]);
    }

    #[test]
    fn income_ingestion_bins_by_interval() {
        let (ds, report) = ingest_income_text("250\n0\n", 100.0, 0).unwrap();
        assert_eq!(ds.items(), &[3, 1]);
        assert_eq!(report.rows_skipped, 0);

        let (ds, report) = ingest_income_text("50\n150\n950\n-5\nabc\n", 100.0, 0).unwrap();
        assert_eq!(ds.n_items(), 10);
        assert_eq!(ds.items(), &[1, 2, 10]);
        assert_eq!(report.rows_skipped, 2);
        let mut expected = vec![0u64; 10];
        expected[0] = 1;
        expected[1] = 1;
        expected[9] = 1;
        assert_eq!(ds.histogram(), expected);

        let (by_col, _) = ingest_income_text("a, 40, 250\nb, 41, 100\n", 100.0, 2).unwrap();
        assert_eq!(by_col.items(), &[3, 2]);
        assert!(ingest_income_text("10\n", 0.0, 0).is_err());
        assert!(ingest_income_text("abc\n", 100.0, 0).is_err());
    }

    #[test]
    fn income_ingestion_skips_values_past_the_item_cap() {
        let (ds, report) = ingest_income_text("5e33\n10\n", 100.0, 0).unwrap();
        assert_eq!(ds.items(), &[1]);
        assert_eq!(report.rows_skipped, 1);
        let boundary = format!("{}\n", (MAX_ITEMS as f64 - 1.0) * 100.0);
        let (ds, _) = ingest_income_text(&boundary, 100.0, 0).unwrap();
        assert_eq!(ds.items(), &[MAX_ITEMS]);
    }

    #[test]
    fn subsample_and_partition_are_deterministic() {
        let ds = synth_uniform(100, 5, 9).unwrap();
        let a = ds.subsample(40, 1).unwrap();
        let b = ds.subsample(40, 1).unwrap();
        assert_eq!(a.items(), b.items());
        assert_eq!(a.n_users(), 40);
        assert_ne!(a.items(), ds.subsample(40, 2).unwrap().items());
        assert!(ds.subsample(101, 1).is_err());

        let parts = ds.partition_by_sizes(&[25, 25, 50]).unwrap();
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[0].items(), &ds.items()[..25]);
        assert_eq!(parts[2].items(), &ds.items()[50..]);
        assert!(ds.partition_by_sizes(&[10, 10]).is_err());
    }

    #[test]
    fn save_and_load_roundtrip() {
        let dir = std::env::temp_dir().join("dpfreq-data-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("small.txt");
        let ds = Dataset::new("small", 3, vec![1, 2, 3, 1]).unwrap();
        ds.save(&path).unwrap();
        let back = Dataset::load(&path).unwrap();
        assert_eq!(back.name(), "small");
        assert_eq!(back.items(), ds.items());
        std::fs::remove_file(&path).ok();
    }
}
