//! CSV ingestion and report emission.
//!
//! All files are RFC-4180-style CSV, UTF-8, '.' decimal separator, fixed
//! column order. Every malformed input row produces a diagnostic naming the
//! file, line and violated rule. Parsers accept untrusted input: they must
//! reject garbage with errors, never panic.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::borrowing::{BetaPrior, BetaPriorSet, PredictivePrior, PriorSource};
use crate::evaluation::{LeagueTable, NodeSplitResult, RankMatrix};
use crate::mcmc::{MoveStats, PosteriorSummary};
use crate::model::{Arm, Network, Study};
use crate::nma::NormalPrior;
use crate::priors::ExpertResponse;
use crate::{Error, Result};

/// Header of the study CSV.
pub const STUDY_HEADER: [&str; 7] = [
    "study_id",
    "subgroup",
    "treatment",
    "n",
    "mean",
    "sd",
    "high_rob",
];

/// Header of the expert-response CSV.
pub const EXPERT_HEADER: [&str; 5] = ["expert_id", "treatment", "expected_change", "sd", "confidence"];

fn open_reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(bytes)
}

fn check_header(
    path: &str,
    reader: &mut csv::Reader<&[u8]>,
    expected: &[&str],
) -> Result<()> {
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, format!("unreadable header: {e}")))?;
    let got: Vec<String> = headers.iter().map(|h| h.trim().to_lowercase()).collect();
    if got != expected {
        return Err(Error::parse(
            path,
            1,
            format!("header must be '{}', got '{}'", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

/// Parses the study CSV schema from raw bytes. Rows are grouped by
/// `study_id` in order of first appearance; arm order follows row order.
pub fn parse_studies(path: &str, bytes: &[u8]) -> Result<Vec<Study>> {
    let mut reader = open_reader(bytes);
    check_header(path, &mut reader, &STUDY_HEADER)?;

    struct Partial {
        subgroup: String,
        arms: Vec<Arm>,
        high_rob: Option<bool>,
        first_line: usize,
    }
    let mut order: Vec<String> = Vec::new();
    let mut partials: BTreeMap<String, Partial> = BTreeMap::new();

    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let record = record.map_err(|e| Error::parse(path, line, format!("bad csv row: {e}")))?;
        if record.len() != STUDY_HEADER.len() {
            return Err(Error::parse(
                path,
                line,
                format!("expected {} fields, got {}", STUDY_HEADER.len(), record.len()),
            ));
        }
        let study_id = record[0].trim().to_string();
        if study_id.is_empty() {
            return Err(Error::parse(path, line, "empty study_id"));
        }
        let subgroup = record[1].trim().to_string();
        if subgroup.is_empty() {
            return Err(Error::parse(path, line, "unknown subgroup label (empty)"));
        }
        let treatment = record[2].trim().to_string();
        let n: u32 = record[3]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid n '{}'", &record[3])))?;
        let mean: f64 = record[4]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid mean '{}'", &record[4])))?;
        let sd: f64 = record[5]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid sd '{}'", &record[5])))?;
        let high_rob = parse_rob(record[6].trim())
            .map_err(|msg| Error::parse(path, line, msg))?;

        let arm = Arm::new(treatment, n, mean, sd)
            .map_err(|e| Error::parse(path, line, e.to_string()))?;

        match partials.get_mut(&study_id) {
            None => {
                order.push(study_id.clone());
                partials.insert(
                    study_id,
                    Partial {
                        subgroup,
                        arms: vec![arm],
                        high_rob,
                        first_line: line,
                    },
                );
            }
            Some(p) => {
                if p.subgroup != subgroup {
                    return Err(Error::parse(
                        path,
                        line,
                        format!(
                            "unknown subgroup label '{subgroup}' (study declared '{}' at line {})",
                            p.subgroup, p.first_line
                        ),
                    ));
                }
                if p.high_rob != high_rob {
                    return Err(Error::parse(
                        path,
                        line,
                        "risk-of-bias flag differs between arms of one study",
                    ));
                }
                if p.arms.iter().any(|a| a.treatment() == arm.treatment()) {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("duplicate treatment '{}' within the study", arm.treatment()),
                    ));
                }
                p.arms.push(arm);
            }
        }
    }

    let mut studies = Vec::with_capacity(order.len());
    for id in order {
        let p = partials.remove(&id).expect("recorded study");
        let study = Study::new(&id, p.subgroup, p.arms, p.high_rob)
            .map_err(|e| Error::parse(path, p.first_line, e.to_string()))?;
        studies.push(study);
    }
    Ok(studies)
}

fn parse_rob(field: &str) -> std::result::Result<Option<bool>, String> {
    match field.to_lowercase().as_str() {
        "" => Ok(None),
        "true" | "1" | "yes" => Ok(Some(true)),
        "false" | "0" | "no" => Ok(Some(false)),
        other => Err(format!("invalid high_rob '{other}' (true/false/1/0 or empty)")),
    }
}

/// Loads the study CSV from disk.
pub fn load_studies(path: &Path) -> Result<Vec<Study>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_studies(&path.display().to_string(), &bytes)
}

/// Loads one network file: all studies must carry the same subgroup label.
pub fn load_network(path: &Path, reference: &str) -> Result<Network> {
    let studies = load_studies(path)?;
    let mut labels: Vec<&str> = studies.iter().map(|s| s.subgroup()).collect();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() > 1 {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: format!(
                "network file mixes subgroup labels: {}",
                labels.join(", ")
            ),
        });
    }
    let subgroup = labels.first().copied().unwrap_or("empty").to_string();
    Network::new(subgroup, studies, reference)
}

/// Parses the expert-response CSV. A row whose `expected_change`, `sd` and
/// `confidence` are all blank records a skipped drug and is dropped.
pub fn parse_experts(path: &str, bytes: &[u8]) -> Result<Vec<ExpertResponse>> {
    let mut reader = open_reader(bytes);
    check_header(path, &mut reader, &EXPERT_HEADER)?;
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::parse(path, line, format!("bad csv row: {e}")))?;
        if record.len() != EXPERT_HEADER.len() {
            return Err(Error::parse(
                path,
                line,
                format!("expected {} fields, got {}", EXPERT_HEADER.len(), record.len()),
            ));
        }
        let expert_id = record[0].trim();
        let treatment = record[1].trim();
        if expert_id.is_empty() || treatment.is_empty() {
            return Err(Error::parse(path, line, "empty expert_id or treatment"));
        }
        let blanks = [record[2].trim(), record[3].trim(), record[4].trim()];
        if blanks.iter().all(|f| f.is_empty()) {
            continue; // skipped drug
        }
        if blanks.iter().any(|f| f.is_empty()) {
            return Err(Error::parse(
                path,
                line,
                "partially blank response (leave all of expected_change, sd, confidence blank to skip)",
            ));
        }
        let expected_change: f64 = blanks[0]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid expected_change '{}'", blanks[0])))?;
        let sd: f64 = blanks[1]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid sd '{}'", blanks[1])))?;
        let confidence: u8 = blanks[2]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid confidence '{}'", blanks[2])))?;
        let response = ExpertResponse::new(expert_id, treatment, expected_change, sd, confidence)
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        out.push(response);
    }
    Ok(out)
}

/// Loads the expert CSV from disk.
pub fn load_experts(path: &Path) -> Result<Vec<ExpertResponse>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_experts(&path.display().to_string(), &bytes)
}

fn comparison_label(treatment: &str, reference: &str) -> String {
    format!("{treatment} vs {reference}")
}

fn split_comparison<'a>(label: &'a str, path: &str, line: usize) -> Result<(&'a str, &'a str)> {
    match label.rsplit_once(" vs ") {
        Some((head, base)) if !head.is_empty() && !base.is_empty() => Ok((head.trim(), base.trim())),
        _ => Err(Error::parse(
            path,
            line,
            format!("comparison '{label}' must be formatted '<treatment> vs <reference>'"),
        )),
    }
}

/// Writes the shift-prior CSV: `comparison,mean,variance,source`.
/// Point masses are encoded with variance 0.
pub fn write_beta_priors(set: &BetaPriorSet, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: e.to_string(),
        })?;
    w.write_record(["comparison", "mean", "variance", "source"])
        .map_err(|e| csv_io(path, e))?;
    for (treatment, (prior, source)) in set.iter() {
        let (mean, variance) = match prior {
            BetaPrior::Informative(p) => (p.mean, p.variance),
            BetaPrior::Degenerate(v) => (*v, 0.0),
        };
        w.write_record([
            comparison_label(treatment, set.reference()),
            format!("{mean}"),
            format!("{variance}"),
            source.to_string(),
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// Parses the shift-prior CSV back into a [`BetaPriorSet`].
pub fn parse_beta_priors(path: &str, bytes: &[u8], reference: &str) -> Result<BetaPriorSet> {
    let mut reader = open_reader(bytes);
    check_header(path, &mut reader, &["comparison", "mean", "variance", "source"])?;
    let mut set = BetaPriorSet::new(reference);
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::parse(path, line, format!("bad csv row: {e}")))?;
        if record.len() != 4 {
            return Err(Error::parse(path, line, "expected 4 fields"));
        }
        let (head, base) = split_comparison(record[0].trim(), path, line)?;
        if base != reference {
            return Err(Error::parse(
                path,
                line,
                format!("comparison base '{base}' does not match reference '{reference}'"),
            ));
        }
        let mean: f64 = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid mean '{}'", &record[1])))?;
        let variance: f64 = record[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid variance '{}'", &record[2])))?;
        let source = match record[3].trim() {
            "data" => PriorSource::Data,
            "expert" => PriorSource::Expert,
            "fallback" => PriorSource::Fallback,
            "fixed" => PriorSource::Fixed,
            other => {
                return Err(Error::parse(path, line, format!("unknown source '{other}'")));
            }
        };
        let prior = if variance == 0.0 {
            BetaPrior::Degenerate(mean)
        } else {
            BetaPrior::Informative(
                NormalPrior::new(mean, variance)
                    .map_err(|e| Error::parse(path, line, e.to_string()))?,
            )
        };
        set.insert(head, prior, source);
    }
    Ok(set)
}

/// Loads the shift-prior CSV from disk.
pub fn load_beta_priors(path: &Path, reference: &str) -> Result<BetaPriorSet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_beta_priors(&path.display().to_string(), &bytes, reference)
}

/// Writes the predictive-prior CSV: `comparison,mean,variance`.
pub fn write_predictive_priors(
    priors: &BTreeMap<String, PredictivePrior>,
    reference: &str,
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        msg: e.to_string(),
    })?;
    w.write_record(["comparison", "mean", "variance"])
        .map_err(|e| csv_io(path, e))?;
    for (treatment, prior) in priors {
        w.write_record([
            comparison_label(treatment, reference),
            format!("{}", prior.mean),
            format!("{}", prior.variance),
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// Parses the predictive-prior CSV.
pub fn parse_predictive_priors(
    path: &str,
    bytes: &[u8],
    reference: &str,
) -> Result<BTreeMap<String, PredictivePrior>> {
    let mut reader = open_reader(bytes);
    check_header(path, &mut reader, &["comparison", "mean", "variance"])?;
    let mut out = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::parse(path, line, format!("bad csv row: {e}")))?;
        if record.len() != 3 {
            return Err(Error::parse(path, line, "expected 3 fields"));
        }
        let (head, base) = split_comparison(record[0].trim(), path, line)?;
        if base != reference {
            return Err(Error::parse(
                path,
                line,
                format!("comparison base '{base}' does not match reference '{reference}'"),
            ));
        }
        let mean: f64 = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid mean '{}'", &record[1])))?;
        let variance: f64 = record[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid variance '{}'", &record[2])))?;
        let prior = PredictivePrior::new(mean, variance)
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        if out.insert(head.to_string(), prior).is_some() {
            return Err(Error::parse(path, line, format!("duplicate comparison for '{head}'")));
        }
    }
    Ok(out)
}

/// Loads the predictive-prior CSV from disk.
pub fn load_predictive_priors(
    path: &Path,
    reference: &str,
) -> Result<BTreeMap<String, PredictivePrior>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_predictive_priors(&path.display().to_string(), &bytes, reference)
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: 0,
        msg: e.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

/// Decimal places per table family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundingProfile {
    pub league: usize,
    pub consistency: usize,
    pub summaries: usize,
    pub sucra: usize,
}

impl Default for RoundingProfile {
    fn default() -> Self {
        RoundingProfile {
            league: 3,
            consistency: 2,
            summaries: 6,
            sucra: 3,
        }
    }
}

fn fmt(v: f64, decimals: usize) -> String {
    format!("{v:.decimals$}")
}

/// `summaries.csv`: one row per reported parameter.
pub fn write_summaries_csv(
    path: &Path,
    rows: &[(String, PosteriorSummary)],
    profile: &RoundingProfile,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["parameter", "mean", "sd", "q2.5", "median", "q97.5"])
        .map_err(|e| csv_io(path, e))?;
    let d = profile.summaries;
    for (name, s) in rows {
        w.write_record([
            name.clone(),
            fmt(s.mean, d),
            fmt(s.sd, d),
            fmt(s.q025, d),
            fmt(s.median, d),
            fmt(s.q975, d),
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// `league_table.csv`: square matrix, cell (row, column) holds the effect of
/// the row treatment relative to the column treatment as `mean(low,high)`,
/// `NA` on the diagonal.
pub fn write_league_csv(
    path: &Path,
    table: &LeagueTable,
    profile: &RoundingProfile,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let treatments = table.treatments();
    let mut header = vec!["treatment".to_string()];
    header.extend(treatments.iter().cloned());
    w.write_record(&header).map_err(|e| csv_io(path, e))?;
    let d = profile.league;
    for row in treatments {
        let mut record = vec![row.clone()];
        for col in treatments {
            // effect of `row` relative to `col` is mu_{col -> row}
            let cell = match table.get(col, row)? {
                None => "NA".to_string(),
                Some(e) => format!(
                    "{}({},{})",
                    fmt(e.mean, d),
                    fmt(e.low, d),
                    fmt(e.high, d)
                ),
            };
            record.push(cell);
        }
        w.write_record(&record).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// `sucra.csv`: treatment and SUCRA value, sorted by treatment.
pub fn write_sucra_csv(
    path: &Path,
    sucras: &[(String, f64)],
    profile: &RoundingProfile,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["treatment", "sucra"]).map_err(|e| csv_io(path, e))?;
    for (t, v) in sucras {
        w.write_record([t.clone(), fmt(*v, profile.sucra)])
            .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// `rank_matrix.csv`: wide rank-occupancy probabilities per treatment.
pub fn write_rank_matrix_csv(
    path: &Path,
    ranks: &RankMatrix,
    profile: &RoundingProfile,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let t = ranks.n_treatments();
    let mut header = vec!["treatment".to_string()];
    header.extend((1..=t).map(|r| format!("rank{r}")));
    w.write_record(&header).map_err(|e| csv_io(path, e))?;
    for treatment in ranks.treatments() {
        let mut record = vec![treatment.clone()];
        for r in 1..=t {
            record.push(fmt(ranks.probability(treatment, r)?, profile.sucra));
        }
        w.write_record(&record).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// `consistency.csv`: one row per split comparison (header only when no node
/// is splittable).
pub fn write_consistency_csv(
    path: &Path,
    results: &[NodeSplitResult],
    profile: &RoundingProfile,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record([
        "comparison",
        "direct",
        "direct_low",
        "direct_high",
        "indirect",
        "indirect_low",
        "indirect_high",
        "difference",
        "difference_low",
        "difference_high",
        "p_gt0",
        "p_value",
    ])
    .map_err(|e| csv_io(path, e))?;
    let d = profile.consistency;
    for r in results {
        w.write_record([
            r.comparison.clone(),
            fmt(r.direct.mean, d),
            fmt(r.direct.q025, d),
            fmt(r.direct.q975, d),
            fmt(r.indirect.mean, d),
            fmt(r.indirect.q025, d),
            fmt(r.indirect.q975, d),
            fmt(r.difference.mean, d),
            fmt(r.difference.q025, d),
            fmt(r.difference.q975, d),
            fmt(r.p_gt0, d),
            fmt(r.p_value, d),
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// One line of the convergence table.
#[derive(Debug, Clone)]
pub enum ConvergenceEntry {
    Rhat { parameter: String, value: f64 },
    Acceptance(MoveStats),
    Warning(String),
}

/// `convergence.csv`: `kind,name,value` triples (split R-hat per gated
/// parameter, acceptance rate per proposal, sampler warnings).
pub fn write_convergence_csv(path: &Path, entries: &[ConvergenceEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["kind", "name", "value"]).map_err(|e| csv_io(path, e))?;
    for entry in entries {
        match entry {
            ConvergenceEntry::Rhat { parameter, value } => {
                w.write_record(["rhat", parameter, &format!("{value:.6}")])
            }
            ConvergenceEntry::Acceptance(stats) => w.write_record([
                "acceptance",
                &stats.name,
                &format!("{:.4}", stats.acceptance_rate),
            ]),
            ConvergenceEntry::Warning(text) => w.write_record(["warning", text.as_str(), ""]),
        }
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// Per-comparison direct/indirect draw pairs for external density plots.
pub fn write_density_csv(path: &Path, result: &NodeSplitResult) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = std::io::BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(out, "direct,indirect")?;
        for (d, i) in &result.draws {
            writeln!(out, "{d},{i}")?;
        }
        Ok(())
    })()
    .map_err(|e| Error::io(path.display().to_string(), e))
}

/// File-name-safe version of a comparison label.
pub fn sanitize_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// Reads a whole file and returns its SHA-256 as lowercase hex.
pub fn file_sha256(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes text to a file, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Resolved output paths of one report.
#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub summaries: PathBuf,
    pub league: PathBuf,
    pub sucra: PathBuf,
    pub rank_matrix: PathBuf,
    pub consistency: PathBuf,
    pub convergence: PathBuf,
    pub manifest: PathBuf,
}

impl ReportPaths {
    pub fn in_dir(dir: &Path) -> Self {
        ReportPaths {
            summaries: dir.join("summaries.csv"),
            league: dir.join("league_table.csv"),
            sucra: dir.join("sucra.csv"),
            rank_matrix: dir.join("rank_matrix.csv"),
            consistency: dir.join("consistency.csv"),
            convergence: dir.join("convergence.csv"),
            manifest: dir.join("manifest.txt"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn study_csv_round_trip_shape() {
        let csv = "\
study_id,subgroup,treatment,n,mean,sd,high_rob
S01,CA,Placebo,60,-8.5,9.5,false
S01,CA,Olanzapine,58,-14.2,10.1,false
";
        let studies = parse_studies("test.csv", csv.as_bytes()).unwrap();
        assert_eq!(studies.len(), 1);
        assert_eq!(studies[0].arm_count(), 2);
        assert_eq!(studies[0].subgroup(), "CA");
        assert_eq!(studies[0].high_rob(), Some(false));
        assert_eq!(studies[0].baseline().treatment(), "Placebo");
    }

    #[test]
    fn study_csv_errors_carry_line_numbers() {
        let zero_sd = "\
study_id,subgroup,treatment,n,mean,sd,high_rob
S01,CA,Placebo,60,-8.5,9.5,false
S01,CA,Olanzapine,58,-14.2,0,false
";
        let err = parse_studies("test.csv", zero_sd.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("test.csv:3"), "{err}");

        let small_n = "\
study_id,subgroup,treatment,n,mean,sd,high_rob
S01,CA,Placebo,1,-8.5,9.5,false
";
        let err = parse_studies("test.csv", small_n.as_bytes()).unwrap_err();
        assert!(err.to_string().contains(":2"), "{err}");

        let dup = "\
study_id,subgroup,treatment,n,mean,sd,high_rob
S01,CA,Placebo,60,-8.5,9.5,false
S01,CA,Placebo,58,-14.2,10.1,false
";
        let err = parse_studies("test.csv", dup.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("duplicate treatment"), "{err}");

        let mixed_subgroup = "\
study_id,subgroup,treatment,n,mean,sd,high_rob
S01,CA,Placebo,60,-8.5,9.5,false
S01,GP,Olanzapine,58,-14.2,10.1,false
";
        let err = parse_studies("test.csv", mixed_subgroup.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("subgroup"), "{err}");

        let bad_header = "study,arm\nS01,foo\n";
        assert!(parse_studies("test.csv", bad_header.as_bytes()).is_err());
    }

    #[test]
    fn single_arm_study_rejected_at_load() {
        let csv = "\
study_id,subgroup,treatment,n,mean,sd,high_rob
S01,CA,Placebo,60,-8.5,9.5,false
S02,CA,Placebo,60,-8.5,9.5,false
S02,CA,Drug,60,-12.0,9.5,false
";
        let err = parse_studies("test.csv", csv.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("at least 2"), "{err}");
    }

    #[test]
    fn expert_csv_blank_rows_are_skipped() {
        let csv = "\
expert_id,treatment,expected_change,sd,confidence
E1,Clozapine,-27.8,8,9
E1,Olanzapine,,,
E2,Placebo,-10,5,7
";
        let responses = parse_experts("experts.csv", csv.as_bytes()).unwrap();
        assert_eq!(responses.len(), 2);
        assert_eq!(responses[0].expected_change, -27.8);
        // partially blank is an error
        let bad = "\
expert_id,treatment,expected_change,sd,confidence
E1,Clozapine,-27.8,,9
";
        let err = parse_experts("experts.csv", bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains(":2"), "{err}");
    }

    #[test]
    fn expert_anchor_values_round_trip() {
        let anchors = [
            ("Clozapine", -27.8),
            ("Olanzapine", -21.2),
            ("Risperidone", -21.0),
            ("Paliperidone", -19.8),
            ("Haloperidol", -19.4),
            ("Loxapine", -19.0),
            ("Quetiapine", -18.4),
            ("Molindone", -18.4),
            ("Aripiprazole", -18.2),
            ("Ziprasidone", -18.2),
            ("Asenapine", -17.8),
            ("Lurasidone", -17.2),
            ("Fluphenazine", -14.8),
            ("Trifluoperazine", -14.8),
            ("Placebo", -10.0),
        ];
        let mut csv = String::from("expert_id,treatment,expected_change,sd,confidence\n");
        for (t, v) in anchors {
            csv.push_str(&format!("E1,{t},{v},8,7\n"));
        }
        let responses = parse_experts("experts.csv", csv.as_bytes()).unwrap();
        assert_eq!(responses.len(), anchors.len());
        for ((t, v), r) in anchors.iter().zip(&responses) {
            assert_eq!(r.treatment, *t);
            assert_eq!(r.expected_change, *v);
            // formatting back produces the identical literal
            assert_eq!(format!("{}", r.expected_change), format!("{v}"));
        }
    }

    #[test]
    fn beta_prior_csv_round_trip() {
        let mut set = BetaPriorSet::new("Placebo");
        set.insert(
            "Olanzapine",
            BetaPrior::Informative(NormalPrior::new(-0.12, 0.02).unwrap()),
            PriorSource::Data,
        );
        set.insert("Quetiapine", BetaPrior::Degenerate(0.0), PriorSource::Fixed);
        set.insert(
            "Asenapine",
            BetaPrior::Informative(NormalPrior::vague()),
            PriorSource::Fallback,
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("beta.csv");
        write_beta_priors(&set, &path).unwrap();
        let loaded = load_beta_priors(&path, "Placebo").unwrap();
        assert_eq!(loaded.len(), 3);
        assert_eq!(loaded.get("Olanzapine").unwrap(), set.get("Olanzapine").unwrap());
        assert_eq!(loaded.get("Quetiapine").unwrap(), set.get("Quetiapine").unwrap());
        // wrong reference rejected
        assert!(load_beta_priors(&path, "Pbo").is_err());
    }

    #[test]
    fn predictive_prior_csv_round_trip() {
        let mut priors = BTreeMap::new();
        priors.insert(
            "Olanzapine".to_string(),
            PredictivePrior::new(-0.55, 0.041).unwrap(),
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.csv");
        write_predictive_priors(&priors, "Placebo", &path).unwrap();
        let loaded = load_predictive_priors(&path, "Placebo").unwrap();
        assert_eq!(loaded, priors);
    }

    #[test]
    fn malformed_prior_rows_error() {
        let bad = "comparison,mean,variance\nOlanzapine & Placebo,-0.5,0.1\n";
        assert!(parse_predictive_priors("p.csv", bad.as_bytes(), "Placebo").is_err());
        let bad_var = "comparison,mean,variance\nOlanzapine vs Placebo,-0.5,-0.1\n";
        assert!(parse_predictive_priors("p.csv", bad_var.as_bytes(), "Placebo").is_err());
        let not_csv = b"\x00\xff\xfe garbage";
        assert!(parse_predictive_priors("p.csv", not_csv, "Placebo").is_err());
    }
}
