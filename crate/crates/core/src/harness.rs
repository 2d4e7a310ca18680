//! Experiment orchestration: Monte Carlo FER sweeps, PCS campaigns,
//! correction studies, and the file formats they persist.
//!
//! Determinism contract: identical config + seed reproduce byte-identical
//! outputs. Frames use per-index substreams so the result is independent of
//! scheduling; the stopping rule counts errors over the smallest frame
//! prefix reaching the target, never over "whichever frames finished first".

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bp;
use crate::channel::{self, ChannelError};
use crate::decoders::{
    self, substream_rng, BitGuessingConfig, FacetGuessingConfig, LggConfig, LpErasureConfig,
    PcsConfig, PseudoCodeword, SuccessfulBits,
};
use crate::loops;
use crate::outcome::DecodeOutcome;
use crate::tanner::{self, BitVector, ParityCheckMatrix, TannerError};

/// Frames evaluated per scheduling batch; only batching granularity, not
/// results, depends on this.
const FRAME_CHUNK: usize = 64;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Tanner(#[from] TannerError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("bad config: {0}")]
    BadConfig(String),
}

/// Where the parity-check matrix comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodeSource {
    Tanner155,
    Hamming74,
    Alist(PathBuf),
}

impl CodeSource {
    pub fn load(&self) -> Result<ParityCheckMatrix, HarnessError> {
        Ok(match self {
            CodeSource::Tanner155 => tanner::build_tanner_155(),
            CodeSource::Hamming74 => tanner::hamming_7_4(),
            CodeSource::Alist(path) => tanner::parse_alist(&std::fs::read_to_string(path)?)?,
        })
    }

    pub fn label(&self) -> String {
        match self {
            CodeSource::Tanner155 => "tanner155".into(),
            CodeSource::Hamming74 => "hamming74".into(),
            CodeSource::Alist(path) => path.display().to_string(),
        }
    }
}

impl FromStr for CodeSource {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Ok(match s {
            "tanner155" => CodeSource::Tanner155,
            "hamming74" => CodeSource::Hamming74,
            other => CodeSource::Alist(PathBuf::from(other)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderName {
    Bp,
    Lp,
    Erasure,
    Bg,
    Fg,
    Lgg,
}

impl std::fmt::Display for DecoderName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DecoderName::Bp => "bp",
            DecoderName::Lp => "lp",
            DecoderName::Erasure => "erasure",
            DecoderName::Bg => "bg",
            DecoderName::Fg => "fg",
            DecoderName::Lgg => "lgg",
        };
        f.write_str(s)
    }
}

impl FromStr for DecoderName {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Ok(match s {
            "bp" => DecoderName::Bp,
            "lp" => DecoderName::Lp,
            "erasure" => DecoderName::Erasure,
            "bg" => DecoderName::Bg,
            "fg" => DecoderName::Fg,
            "lgg" => DecoderName::Lgg,
            other => {
                return Err(HarnessError::BadConfig(format!(
                    "unknown decoder '{other}' (expected bp|lp|erasure|bg|fg|lgg)"
                )))
            }
        })
    }
}

/// One frame decode with the named decoder; `frame_seed` feeds the
/// decoder-internal randomness (LGG bit order, FG subset choice).
pub fn decode_frame(
    h: &ParityCheckMatrix,
    llr: &channel::LlrVector,
    decoder: DecoderName,
    frame_seed: u64,
) -> DecodeOutcome {
    match decoder {
        DecoderName::Bp => bp::bp_decode(h, llr, bp::DEFAULT_MAX_ITER, bp::DEFAULT_TOL),
        DecoderName::Lp => decoders::lp_decode(h, llr),
        DecoderName::Erasure => decoders::lp_erasure_decode(h, llr, &LpErasureConfig::default()),
        DecoderName::Bg => decoders::bit_guessing_decode(h, llr, &BitGuessingConfig::default()),
        DecoderName::Fg => decoders::facet_guessing_decode(
            h,
            llr,
            &FacetGuessingConfig {
                seed: frame_seed,
                ..Default::default()
            },
        ),
        DecoderName::Lgg => decoders::loop_guided_decode(
            h,
            llr,
            &LggConfig {
                seed: frame_seed,
                ..Default::default()
            },
        ),
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub code: CodeSource,
    pub decoder: DecoderName,
    pub snr_grid: Vec<f64>,
    pub max_frames: usize,
    pub target_errors: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.snr_grid.is_empty() {
            return Err(HarnessError::BadConfig("snr grid is empty".into()));
        }
        if self.snr_grid.iter().any(|&s| !(s > 0.0)) {
            return Err(HarnessError::BadConfig("snr values must be positive".into()));
        }
        if self.target_errors == 0 {
            return Err(HarnessError::BadConfig("target_errors must be >= 1".into()));
        }
        if self.max_frames == 0 {
            return Err(HarnessError::BadConfig("max_frames must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FerPoint {
    pub s2: f64,
    pub frames: usize,
    pub errors: usize,
    pub fer: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub lp_solves_mean: f64,
}

/// Wilson 95% score interval for a binomial proportion.
pub fn wilson_interval(errors: usize, frames: usize) -> (f64, f64) {
    if frames == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054f64;
    let n = frames as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // pin the degenerate endpoints exactly, avoiding rounding residue
    let lo = if errors == 0 {
        0.0
    } else {
        ((center - spread) / denom).max(0.0)
    };
    let hi = if errors == frames {
        1.0
    } else {
        ((center + spread) / denom).min(1.0)
    };
    (lo, hi)
}

/// Transmits the all-zero codeword (channel symmetry) and decodes until
/// `target_errors` failures or `max_frames` frames, per grid point.
pub fn run_fer(config: &ExperimentConfig) -> Result<Vec<FerPoint>, HarnessError> {
    config.validate()?;
    let h = config.code.load()?;
    let zero = BitVector::zeros(h.n_bits());
    let mut points = Vec::with_capacity(config.snr_grid.len());
    for (point_idx, &s2) in config.snr_grid.iter().enumerate() {
        // decorrelate grid points without coupling them to grid order changes
        let point_seed = config.seed ^ (s2.to_bits().rotate_left(17));
        let mut frames = 0usize;
        let mut errors = 0usize;
        let mut lp_solves = 0usize;
        'point: while frames < config.max_frames {
            let chunk = FRAME_CHUNK.min(config.max_frames - frames);
            let batch: Vec<(bool, usize)> = (frames..frames + chunk)
                .into_par_iter()
                .map(|f| {
                    let mut rng = substream_rng(point_seed, f as u64);
                    let out = channel::sample_awgn(&zero, s2, &mut rng)
                        .expect("validated positive snr");
                    let llr = channel::llr_from_output(&out);
                    let dec = decode_frame(&h, &llr, config.decoder, point_seed ^ f as u64);
                    (!dec.decoded_zero(), dec.work.lp_solves)
                })
                .collect();
            for (err, solves) in batch {
                frames += 1;
                lp_solves += solves;
                if err {
                    errors += 1;
                    if errors >= config.target_errors {
                        break 'point;
                    }
                }
            }
        }
        let (lo, hi) = wilson_interval(errors, frames);
        points.push(FerPoint {
            s2,
            frames,
            errors,
            fer: errors as f64 / frames as f64,
            wilson_lo: lo,
            wilson_hi: hi,
            lp_solves_mean: lp_solves as f64 / frames as f64,
        });
        let _ = point_idx;
    }
    Ok(points)
}

/// Renders the FER sweep as CSV. Column order is fixed:
/// `s2,frames,errors,fer,lo,hi,lp_solves_mean`. The error-floor asymptotes
/// exp(-20 s2/2) (Hamming distance) and exp(-16.407 s2/2) (lowest
/// pseudo-codeword weight) are emitted as comment rows for overlay; points
/// below simulated FER are extrapolated by those asymptotes, not simulated.
pub fn render_fer_csv(config: &ExperimentConfig, points: &[FerPoint]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "# fer sweep: code={} decoder={} seed={} target_errors={} max_frames={}",
        config.code.label(),
        config.decoder,
        config.seed,
        config.target_errors,
        config.max_frames
    )
    .unwrap();
    out.push_str("s2,frames,errors,fer,lo,hi,lp_solves_mean\n");
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.s2, p.frames, p.errors, p.fer, p.wilson_lo, p.wilson_hi, p.lp_solves_mean
        )
        .unwrap();
    }
    out.push_str("# asymptote overlays (unnormalized): s2,exp(-20*s2/2),exp(-16.407*s2/2)\n");
    for p in points {
        writeln!(
            out,
            "# {},{},{}",
            p.s2,
            (-20.0 * p.s2 / 2.0).exp(),
            (-16.407 * p.s2 / 2.0).exp()
        )
        .unwrap();
    }
    out
}

pub fn write_fer_csv(
    path: &Path,
    config: &ExperimentConfig,
    points: &[FerPoint],
) -> Result<(), HarnessError> {
    Ok(std::fs::write(path, render_fer_csv(config, points))?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub restarts: usize,
    pub catalog_size: usize,
    pub min_d_eff: Option<f64>,
    /// Entries with effective distance below the code's Hamming distance 20.
    pub dangerous_count: usize,
}

/// Runs a PCS campaign and persists the catalog as JSON lines, preceded by a
/// one-line `{"summary": ...}` header.
pub fn run_pcs_campaign(
    h: &ParityCheckMatrix,
    restarts: usize,
    seed: u64,
    path: &Path,
) -> Result<CampaignSummary, HarnessError> {
    let catalog = decoders::pcs_catalog(h, restarts, seed, &PcsConfig::default());
    let summary = CampaignSummary {
        restarts,
        catalog_size: catalog.len(),
        min_d_eff: catalog.first().map(|pc| pc.d_eff),
        dangerous_count: catalog.iter().filter(|pc| pc.d_eff < 20.0).count(),
    };
    write_catalog(path, &summary, &catalog)?;
    Ok(summary)
}

pub fn write_catalog(
    path: &Path,
    summary: &CampaignSummary,
    catalog: &[PseudoCodeword],
) -> Result<(), HarnessError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        file,
        "{}",
        serde_json::to_string(&serde_json::json!({ "summary": summary }))?
    )?;
    for pc in catalog {
        writeln!(file, "{}", serde_json::to_string(pc)?)?;
    }
    Ok(())
}

/// Reads a JSON-lines catalog, skipping the summary header if present.
pub fn load_catalog(path: &Path) -> Result<Vec<PseudoCodeword>, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    let mut catalog = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)?;
        if value.get("summary").is_some() {
            continue;
        }
        catalog.push(serde_json::from_value(value)?);
    }
    Ok(catalog)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodResult {
    pub corrected: bool,
    pub lp_solves: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyEntry {
    pub d_eff: f64,
    pub results: BTreeMap<String, MethodResult>,
    pub successful_bits: Option<SuccessfulBits>,
    /// Whether every critical-loop bit is a successful bit; absent when the
    /// entry has no critical loop or the scan was skipped.
    pub loop_covered: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub entries: Vec<StudyEntry>,
    /// method -> corrected count.
    pub corrected: BTreeMap<String, usize>,
    pub loop_coverage_checked: usize,
    pub loop_coverage_held: usize,
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub methods: Vec<DecoderName>,
    pub seed: u64,
    /// The successful-bit scan costs ~N pinned LPs per entry.
    pub with_successful_bits: bool,
}

/// Decodes every cataloged instanton with each method and tabulates
/// corrections, plus the successful-bit / critical-loop comparison.
pub fn run_correction_study(
    h: &ParityCheckMatrix,
    catalog: &[PseudoCodeword],
    config: &StudyConfig,
) -> Result<StudyReport, HarnessError> {
    if config.methods.is_empty() {
        return Err(HarnessError::BadConfig("no study methods given".into()));
    }
    let mut entries = Vec::with_capacity(catalog.len());
    let mut corrected: BTreeMap<String, usize> = BTreeMap::new();
    let mut checked = 0usize;
    let mut held = 0usize;
    for (idx, pc) in catalog.iter().enumerate() {
        let llr = pc.instanton_llr();
        let mut results = BTreeMap::new();
        for &method in &config.methods {
            let outcome = decode_frame(h, &llr, method, config.seed ^ idx as u64);
            let ok = outcome.decoded_zero();
            if ok {
                *corrected.entry(method.to_string()).or_insert(0) += 1;
            } else {
                corrected.entry(method.to_string()).or_insert(0);
            }
            results.insert(
                method.to_string(),
                MethodResult {
                    corrected: ok,
                    lp_solves: outcome.work.lp_solves,
                },
            );
        }
        let successful = config
            .with_successful_bits
            .then(|| decoders::successful_bits(h, pc));
        let loop_covered = match (&successful, &pc.critical_loop) {
            (Some(sb), Some(critical)) if !sb.vacuous => {
                let covered = critical.bits.iter().all(|b| sb.bits.contains(b));
                checked += 1;
                if covered {
                    held += 1;
                }
                Some(covered)
            }
            _ => None,
        };
        entries.push(StudyEntry {
            d_eff: pc.d_eff,
            results,
            successful_bits: successful,
            loop_covered,
        });
    }
    Ok(StudyReport {
        entries,
        corrected,
        loop_coverage_checked: checked,
        loop_coverage_held: held,
    })
}

impl StudyReport {
    /// Human-readable companion to the JSON report.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let methods: Vec<&String> = self.corrected.keys().collect();
        write!(out, "{:>10}", "d_eff").unwrap();
        for m in &methods {
            write!(out, " {:>8}", m).unwrap();
        }
        out.push_str("  loop_covered\n");
        for e in &self.entries {
            write!(out, "{:>10.4}", e.d_eff).unwrap();
            for m in &methods {
                let mark = match e.results.get(*m) {
                    Some(r) if r.corrected => "yes",
                    Some(_) => "NO",
                    None => "-",
                };
                write!(out, " {:>8}", mark).unwrap();
            }
            let lc = match e.loop_covered {
                Some(true) => "yes",
                Some(false) => "NO",
                None => "-",
            };
            writeln!(out, "  {:>12}", lc).unwrap();
        }
        writeln!(
            out,
            "corrected: {} / {} entries per method; loop coverage {}/{}",
            self.corrected
                .iter()
                .map(|(m, c)| format!("{m}={c}"))
                .collect::<Vec<_>>()
                .join(" "),
            self.entries.len(),
            self.loop_coverage_held,
            self.loop_coverage_checked
        )
        .unwrap();
        out
    }
}

/// Parses `start:end:step` (inclusive of the end within half a step) or a
/// comma-separated list of s^2 values.
pub fn parse_snr_grid(text: &str) -> Result<Vec<f64>, HarnessError> {
    let bad = |_| HarnessError::BadConfig(format!("cannot parse snr grid '{text}'"));
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(HarnessError::BadConfig(format!(
                "snr range '{text}' must be start:end:step"
            )));
        }
        let start: f64 = parts[0].trim().parse().map_err(bad)?;
        let end: f64 = parts[1].trim().parse().map_err(bad)?;
        let step: f64 = parts[2].trim().parse().map_err(bad)?;
        if !(step > 0.0) || end < start {
            return Err(HarnessError::BadConfig(format!("empty snr range '{text}'")));
        }
        let count = ((end - start) / step + 0.5).floor() as usize + 1;
        return Ok((0..count).map(|k| start + step * k as f64).collect());
    }
    text.split(',')
        .map(|tok| tok.trim().parse::<f64>().map_err(bad))
        .collect()
}

/// Simple `key = value` config file; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, HarnessError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(HarnessError::BadConfig(format!(
                "line {}: expected key=value, got '{raw}'",
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// The loop-series exactness suite behind `verify-loops`: every bundled toy
/// instance must resum to the exact partition function.
pub fn verify_loops_suite(seed: u64) -> Result<Vec<(String, loops::LoopSeriesReport)>, HarnessError> {
    use rand::RngExt;
    let mut cases: Vec<(String, ParityCheckMatrix, Vec<f64>)> = Vec::new();
    let mut rng = substream_rng(seed, 0);
    // degree-2/degree-2 cycles only admit finite BP fixed points when the
    // fields along the cycle cancel; draw from that manifold
    let a = rng.random_range(0.2..0.8);
    cases.push(("four-cycle".into(), tanner::four_cycle(), vec![a, -a]));
    let (a, b) = (rng.random_range(0.2..0.8), rng.random_range(0.2..0.8));
    cases.push((
        "double-four-cycle".into(),
        tanner::double_four_cycle(),
        vec![a, -a, b, -b],
    ));
    cases.push((
        "hamming74".into(),
        tanner::hamming_7_4(),
        (0..7).map(|_| rng.random_range(-0.5..0.5)).collect(),
    ));
    for t in 0..3 {
        let code = tanner::random_tree_code(8, &mut rng);
        let llr = (0..code.n_bits())
            .map(|_| rng.random_range(-1.5..1.5))
            .collect();
        cases.push((format!("tree-{t}"), code, llr));
    }
    let mut reports = Vec::new();
    for (name, code, hvals) in cases {
        let report = loops::verify_loop_series(&code, &channel::LlrVector { h: hvals })
            .map_err(|e| HarnessError::BadConfig(format!("{name}: {e}")))?;
        reports.push((name, report));
    }
    Ok(reports)
}
