//! Dynamic time warping distance with warp-path recovery, the FastDTW
//! multi-resolution approximation, and a k-NN classifier using DTW as its
//! distance metric.
//!
//! The per-pair cost is the squared difference; the reported distance is the
//! square root of the minimal cumulative cost, so two identical series are
//! at distance zero and equal-length series are never farther apart than
//! their pointwise Euclidean distance.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Turn class of a steering-angle template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TurnDirection {
    Left,
    Right,
}

impl TurnDirection {
    pub fn mirrored(self) -> Self {
        match self {
            TurnDirection::Left => TurnDirection::Right,
            TurnDirection::Right => TurnDirection::Left,
        }
    }
}

impl fmt::Display for TurnDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TurnDirection::Left => "left",
            TurnDirection::Right => "right",
        })
    }
}

/// Monotone, continuous alignment between two series.
///
/// Pairs are 0-based; a valid path starts at `(0, 0)`, ends at
/// `(n - 1, m - 1)`, and each step advances one or both indices by exactly
/// one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarpPath {
    pub pairs: Vec<(usize, usize)>,
}

impl WarpPath {
    /// Boundary, monotonicity, and continuity check against series lengths.
    pub fn is_valid(&self, n: usize, m: usize) -> bool {
        if self.pairs.is_empty() || n == 0 || m == 0 {
            return false;
        }
        if self.pairs[0] != (0, 0) || *self.pairs.last().unwrap() != (n - 1, m - 1) {
            return false;
        }
        if self.pairs.len() < n.max(m) {
            return false;
        }
        self.pairs.windows(2).all(|w| {
            let (i0, j0) = w[0];
            let (i1, j1) = w[1];
            let di = i1.wrapping_sub(i0);
            let dj = j1.wrapping_sub(j0);
            di <= 1 && dj <= 1 && (di + dj) > 0
        })
    }
}

/// Distance plus the warp path attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct DtwResult {
    pub distance: f64,
    pub path: WarpPath,
}

fn check_series(name: &str, series: &[f64]) -> Result<()> {
    if series.is_empty() {
        return Err(Error::invalid(format!("empty time series {name}")));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite value in series {name}")));
    }
    Ok(())
}

/// Exact DTW over the full `|t| x |s|` grid.
pub fn dtw_exact(t: &[f64], s: &[f64]) -> Result<DtwResult> {
    check_series("t", t)?;
    check_series("s", s)?;
    let window: Vec<(usize, usize)> = (0..t.len()).map(|_| (0, s.len() - 1)).collect();
    Ok(dtw_windowed(t, s, &window))
}

/// DTW restricted to a per-row column window. `window[i]` is the inclusive
/// `(min_j, max_j)` range of cells evaluated in row `i`.
fn dtw_windowed(t: &[f64], s: &[f64], window: &[(usize, usize)]) -> DtwResult {
    let n = t.len();
    let m = s.len();
    debug_assert_eq!(window.len(), n);
    let inf = f64::INFINITY;
    let mut cost = vec![inf; n * m];
    let at = |i: usize, j: usize| i * m + j;

    for i in 0..n {
        let (lo, hi) = window[i];
        for j in lo..=hi.min(m - 1) {
            let d = (t[i] - s[j]) * (t[i] - s[j]);
            let best_prev = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { cost[at(i - 1, j - 1)] } else { inf };
                let up = if i > 0 { cost[at(i - 1, j)] } else { inf };
                let left = if j > 0 { cost[at(i, j - 1)] } else { inf };
                diag.min(up).min(left)
            };
            if best_prev.is_finite() || (i == 0 && j == 0) {
                cost[at(i, j)] = d + best_prev;
            }
        }
    }

    let total = cost[at(n - 1, m - 1)];
    assert!(
        total.is_finite(),
        "dtw window left the end cell unreachable"
    );

    // backtrack, preferring the diagonal on ties
    let mut pairs = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    pairs.push((i, j));
    while i > 0 || j > 0 {
        let diag = if i > 0 && j > 0 { cost[at(i - 1, j - 1)] } else { inf };
        let up = if i > 0 { cost[at(i - 1, j)] } else { inf };
        let left = if j > 0 { cost[at(i, j - 1)] } else { inf };
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        pairs.push((i, j));
    }
    pairs.reverse();

    DtwResult {
        distance: total.sqrt(),
        path: WarpPath { pairs },
    }
}

/// Halve a series' resolution by averaging adjacent pairs.
fn coarsen(series: &[f64]) -> Vec<f64> {
    series
        .chunks(2)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

/// Project a low-resolution warp path onto the doubled grid and inflate it
/// by `radius` cells in every direction, as per-row column ranges.
fn expand_window(
    low_path: &WarpPath,
    n: usize,
    m: usize,
    radius: usize,
) -> Vec<(usize, usize)> {
    let mut base = vec![(usize::MAX, 0usize); n];
    let mut mark = |row: usize, lo: usize, hi: usize| {
        if row < n {
            let e = &mut base[row];
            e.0 = e.0.min(lo);
            e.1 = e.1.max(hi.min(m - 1));
        }
    };
    for &(i, j) in &low_path.pairs {
        let (jlo, jhi) = (2 * j, 2 * j + 1);
        mark(2 * i, jlo, jhi);
        mark(2 * i + 1, jlo, jhi);
    }
    // odd-length tails have no projecting low-res cell; extend the last range
    for i in 0..n {
        if base[i].0 == usize::MAX {
            base[i] = base[i - 1];
        }
    }
    (0..n)
        .map(|i| {
            let lo_row = i.saturating_sub(radius);
            let hi_row = (i + radius).min(n - 1);
            let mut lo = usize::MAX;
            let mut hi = 0;
            for &(blo, bhi) in &base[lo_row..=hi_row] {
                lo = lo.min(blo);
                hi = hi.max(bhi);
            }
            (lo.saturating_sub(radius), (hi + radius).min(m - 1))
        })
        .collect()
}

/// FastDTW: multi-level coarsening, low-resolution solve, and windowed
/// refinement. The result is an upper bound on [`dtw_exact`]'s distance and
/// equals it whenever `radius` covers the longer series.
pub fn fastdtw(t: &[f64], s: &[f64], radius: usize) -> Result<DtwResult> {
    check_series("t", t)?;
    check_series("s", s)?;
    Ok(fastdtw_inner(t, s, radius))
}

fn fastdtw_inner(t: &[f64], s: &[f64], radius: usize) -> DtwResult {
    let min_size = radius + 2;
    if t.len() <= min_size || s.len() <= min_size {
        let window: Vec<(usize, usize)> = (0..t.len()).map(|_| (0, s.len() - 1)).collect();
        return dtw_windowed(t, s, &window);
    }
    let coarse_t = coarsen(t);
    let coarse_s = coarsen(s);
    let low = fastdtw_inner(&coarse_t, &coarse_s, radius);
    let window = expand_window(&low.path, t.len(), s.len(), radius);
    dtw_windowed(t, s, &window)
}

/// A labeled steering-angle template for the k-NN classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTemplate {
    pub label: TurnDirection,
    /// `(timestamp_s, steering_deg)` samples.
    pub samples: Vec<(f64, f64)>,
}

impl LabeledTemplate {
    pub fn new(label: TurnDirection, samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("empty template series"));
        }
        Ok(LabeledTemplate { label, samples })
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|&(_, v)| v).collect()
    }
}

/// Distance backend for [`knn_classify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnnDistance {
    Exact,
    Fast { radius: usize },
}

impl Default for KnnDistance {
    fn default() -> Self {
        KnnDistance::Fast { radius: 1 }
    }
}

/// k-NN classification outcome: winning label and the k nearest templates.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnOutcome {
    pub label: TurnDirection,
    /// `(label, distance)` of the k nearest templates, closest first.
    pub neighbors: Vec<(TurnDirection, f64)>,
}

/// Majority label among the k nearest templates under the configured DTW
/// distance. Even-vote ties break toward the label with the smaller mean
/// neighbor distance, then toward `Left`.
pub fn knn_classify(
    query: &[f64],
    templates: &[LabeledTemplate],
    k: usize,
    distance: KnnDistance,
) -> Result<KnnOutcome> {
    check_series("query", query)?;
    if templates.is_empty() {
        return Err(Error::invalid("empty template set"));
    }
    if k == 0 || k > templates.len() {
        return Err(Error::invalid(format!(
            "k = {k} outside 1..={}",
            templates.len()
        )));
    }
    let mut scored: Vec<(f64, usize)> = templates
        .iter()
        .enumerate()
        .map(|(idx, tpl)| {
            let values = tpl.values();
            let d = match distance {
                KnnDistance::Exact => dtw_exact(query, &values)?.distance,
                KnnDistance::Fast { radius } => fastdtw(query, &values, radius)?.distance,
            };
            Ok((d, idx))
        })
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let neighbors: Vec<(TurnDirection, f64)> = scored[..k]
        .iter()
        .map(|&(d, idx)| (templates[idx].label, d))
        .collect();

    let mut votes = [0usize; 2];
    let mut dist_sum = [0.0f64; 2];
    for &(label, d) in &neighbors {
        let slot = match label {
            TurnDirection::Left => 0,
            TurnDirection::Right => 1,
        };
        votes[slot] += 1;
        dist_sum[slot] += d;
    }
    let label = if votes[0] > votes[1] {
        TurnDirection::Left
    } else if votes[1] > votes[0] {
        TurnDirection::Right
    } else {
        let mean_left = dist_sum[0] / votes[0] as f64;
        let mean_right = dist_sum[1] / votes[1] as f64;
        if mean_right < mean_left {
            TurnDirection::Right
        } else {
            TurnDirection::Left
        }
    };
    Ok(KnnOutcome { label, neighbors })
}

/// Manifest entry of a template corpus on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateEntry {
    pub path: String,
    pub label: TurnDirection,
}

/// Template corpus manifest, serialized as JSON next to per-template CSVs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateCorpusManifest {
    pub templates: Vec<TemplateEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Write one template per CSV (`timestamp,steering_deg`) plus a manifest;
/// returns the manifest path.
pub fn write_template_corpus(
    dir: &Path,
    templates: &[LabeledTemplate],
    seed: Option<u64>,
    config_hash: Option<String>,
) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(templates.len());
    for (i, tpl) in templates.iter().enumerate() {
        let name = format!("template_{i:03}_{}.csv", tpl.label);
        let mut text = String::from("timestamp,steering_deg\n");
        for &(t, v) in &tpl.samples {
            text.push_str(&format!("{t},{v}\n"));
        }
        std::fs::write(dir.join(&name), text)?;
        entries.push(TemplateEntry {
            path: name,
            label: tpl.label,
        });
    }
    let manifest = TemplateCorpusManifest {
        templates: entries,
        seed,
        config_hash,
    };
    let path = dir.join("templates.json");
    let text =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::json("template corpus", e))?;
    std::fs::write(&path, text + "\n")?;
    Ok(path)
}

/// Load a template corpus from its manifest.
pub fn load_template_corpus(manifest_path: &Path) -> Result<Vec<LabeledTemplate>> {
    let text = std::fs::read_to_string(manifest_path)?;
    let manifest: TemplateCorpusManifest = serde_json::from_str(&text)
        .map_err(|e| Error::json(manifest_path.display().to_string(), e))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut templates = Vec::with_capacity(manifest.templates.len());
    for entry in &manifest.templates {
        let path = base.join(&entry.path);
        let text = std::fs::read_to_string(&path)?;
        let display = path.display().to_string();
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') || lineno == 0 {
                continue;
            }
            let mut fields = line.split(',');
            let (Some(ts), Some(vs)) = (fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    path: display,
                    line: lineno + 1,
                    message: "expected timestamp,steering_deg".into(),
                });
            };
            let t: f64 = ts.trim().parse().map_err(|_| Error::Parse {
                path: display.clone(),
                line: lineno + 1,
                message: format!("bad timestamp '{ts}'"),
            })?;
            let v: f64 = vs.trim().parse().map_err(|_| Error::Parse {
                path: display.clone(),
                line: lineno + 1,
                message: format!("bad steering value '{vs}'"),
            })?;
            samples.push((t, v));
        }
        templates.push(LabeledTemplate::new(entry.label, samples)?);
    }
    Ok(templates)
}
