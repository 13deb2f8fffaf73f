//! Event timelines and their reduction to flat binary samples.
//!
//! A unit's history is a list of (event, time) occurrences on a discrete,
//! positive time axis. The outcome event may recur; a unit is labeled
//! positive when two consecutive outcome occurrences fall within `tau` time
//! steps of each other. Feature extraction is bag-of-events with censoring at
//! the label-defining occurrence, so no feature can postdate the outcome it
//! is supposed to explain.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct UnitTimeline {
    pub unit_id: String,
    /// Occurrences sorted by (time, event name). Times start at 1.
    pub events: Vec<(String, u32)>,
    /// Last observed time for the unit (>= every occurrence time).
    pub max_time: u32,
    /// Optional binary unit-level covariates.
    pub covariates: BTreeMap<String, u8>,
}

impl UnitTimeline {
    pub fn new(unit_id: impl Into<String>, mut events: Vec<(String, u32)>) -> Result<Self> {
        if events.iter().any(|&(_, t)| t == 0) {
            return Err(Error::data("event time 0; times start at 1"));
        }
        events.sort_by(|a, b| (a.1, &a.0).cmp(&(b.1, &b.0)));
        let max_time = events.iter().map(|&(_, t)| t).max().unwrap_or(0);
        Ok(UnitTimeline {
            unit_id: unit_id.into(),
            events,
            max_time,
            covariates: BTreeMap::new(),
        })
    }

    /// Sorted distinct occurrence times of one event.
    pub fn occurrence_times(&self, event: &str) -> Vec<u32> {
        let mut times: Vec<u32> = self
            .events
            .iter()
            .filter(|(e, _)| e == event)
            .map(|&(_, t)| t)
            .collect();
        times.sort_unstable();
        times.dedup();
        times
    }

    pub fn min_occurrence_time(&self, event: &str) -> Option<u32> {
        self.events
            .iter()
            .filter(|(e, _)| e == event)
            .map(|&(_, t)| t)
            .min()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventLog {
    pub units: Vec<UnitTimeline>,
    /// Ordered feature vocabulary; excludes the outcome event.
    pub vocabulary: Vec<String>,
    pub outcome_event: String,
}

/// Label for one unit under the repeated-outcome rule.
///
/// `y = 1` iff some outcome occurrence is followed by the next one within
/// `tau` steps; `t`/`t_prime` record the earliest such pair and stay unset
/// for negative units.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeLabel {
    pub unit_id: String,
    pub y: u8,
    pub t: Option<u32>,
    pub t_prime: Option<u32>,
    pub tau: u32,
}

impl EventLog {
    pub fn new(units: Vec<UnitTimeline>, outcome_event: impl Into<String>) -> Result<Self> {
        let outcome_event = outcome_event.into();
        if units.is_empty() {
            return Err(Error::data("empty event log"));
        }
        let mut vocab = BTreeSet::new();
        let mut seen_units = BTreeSet::new();
        for u in &units {
            if !seen_units.insert(u.unit_id.clone()) {
                return Err(Error::data(format!("duplicate unit id {}", u.unit_id)));
            }
            for (e, _) in &u.events {
                if *e != outcome_event {
                    vocab.insert(e.clone());
                }
            }
        }
        Ok(EventLog {
            units,
            vocabulary: vocab.into_iter().collect(),
            outcome_event,
        })
    }

    /// Reads `unit_id,time,event` rows. Unit order is first appearance, the
    /// vocabulary is sorted, occurrences within a unit are sorted by time.
    pub fn from_csv_reader<R: Read>(reader: R, outcome_event: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::data(format!("bad csv header: {e}")))?
            .clone();
        let expect = ["unit_id", "time", "event"];
        let got: Vec<&str> = headers.iter().map(|h| h.trim()).collect();
        if got != expect {
            return Err(Error::data(format!(
                "event log header must be unit_id,time,event (got {})",
                got.join(",")
            )));
        }
        let mut order: Vec<String> = Vec::new();
        let mut per_unit: HashMap<String, Vec<(String, u32)>> = HashMap::new();
        for (rownum, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::data(format!("bad csv row {}: {e}", rownum + 2)))?;
            if rec.len() != 3 {
                return Err(Error::data(format!("row {}: expected 3 fields", rownum + 2)));
            }
            let unit = rec[0].trim().to_string();
            let time: u32 = rec[1]
                .trim()
                .parse()
                .map_err(|_| Error::data(format!("row {}: bad time {:?}", rownum + 2, &rec[1])))?;
            if time == 0 {
                return Err(Error::data(format!("row {}: time 0; times start at 1", rownum + 2)));
            }
            let event = rec[2].trim().to_string();
            if event.is_empty() {
                return Err(Error::data(format!("row {}: empty event name", rownum + 2)));
            }
            if !per_unit.contains_key(&unit) {
                order.push(unit.clone());
            }
            per_unit.entry(unit).or_default().push((event, time));
        }
        if order.is_empty() {
            return Err(Error::data("empty event log"));
        }
        let units = order
            .into_iter()
            .map(|id| {
                let evs = per_unit.remove(&id).unwrap();
                UnitTimeline::new(id, evs)
            })
            .collect::<Result<Vec<_>>>()?;
        EventLog::new(units, outcome_event)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, outcome_event: &str) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(std::io::BufReader::new(file), outcome_event)
    }

    /// Drops units without any outcome occurrence. Labeling and aggregation
    /// are only defined on this population.
    pub fn restrict_to_population(&self) -> Result<Self> {
        let units: Vec<UnitTimeline> = self
            .units
            .iter()
            .filter(|u| u.min_occurrence_time(&self.outcome_event).is_some())
            .cloned()
            .collect();
        if units.is_empty() {
            return Err(Error::data("no unit has an outcome occurrence"));
        }
        Ok(EventLog {
            units,
            vocabulary: self.vocabulary.clone(),
            outcome_event: self.outcome_event.clone(),
        })
    }
}

/// Time of the next outcome occurrence strictly after `t`, if any.
/// `t` itself must carry an outcome occurrence.
pub fn next_outcome_time(tl: &UnitTimeline, outcome_event: &str, t: u32) -> Result<Option<u32>> {
    let times = tl.occurrence_times(outcome_event);
    if !times.contains(&t) {
        return Err(Error::data(format!(
            "invalid reference: unit {} has no {} occurrence at time {}",
            tl.unit_id, outcome_event, t
        )));
    }
    Ok(times.into_iter().find(|&p| p > t))
}

/// Repeated-outcome label: positive iff two consecutive outcome occurrences
/// are at most `tau` apart; the earliest qualifying pair is recorded.
pub fn repeated_outcome_label(tl: &UnitTimeline, outcome_event: &str, tau: u32) -> Result<OutcomeLabel> {
    if tau == 0 {
        return Err(Error::config("tau must be a positive integer"));
    }
    let times = tl.occurrence_times(outcome_event);
    if times.is_empty() {
        return Err(Error::data(format!(
            "unit {} has no {} occurrence (outside population)",
            tl.unit_id, outcome_event
        )));
    }
    for w in times.windows(2) {
        if w[1] - w[0] <= tau {
            return Ok(OutcomeLabel {
                unit_id: tl.unit_id.clone(),
                y: 1,
                t: Some(w[0]),
                t_prime: Some(w[1]),
                tau,
            });
        }
    }
    Ok(OutcomeLabel { unit_id: tl.unit_id.clone(), y: 0, t: None, t_prime: None, tau })
}

/// One row per unit: event columns (vocabulary order), then covariate columns
/// (sorted by name), then the outcome label.
///
/// Censoring: positive units count events strictly before `t_prime`; negative
/// units count events up to `t_first + tau` where `t_first` is the first
/// outcome occurrence. Every unit must have at least one outcome occurrence.
pub fn aggregate_bag_of_events(log: &EventLog, tau: u32) -> Result<BinaryDataset> {
    let mut cov_names: BTreeSet<String> = BTreeSet::new();
    for u in &log.units {
        for name in u.covariates.keys() {
            cov_names.insert(name.clone());
        }
    }
    for name in log.vocabulary.iter().chain(cov_names.iter()) {
        if *name == log.outcome_event {
            return Err(Error::data(format!(
                "column name collision with outcome event {}",
                log.outcome_event
            )));
        }
    }
    if cov_names.iter().any(|c| log.vocabulary.contains(c)) {
        return Err(Error::data("covariate name collides with an event name"));
    }

    let mut names: Vec<String> = log.vocabulary.clone();
    names.extend(cov_names.iter().cloned());
    names.push(log.outcome_event.clone());
    let n_ev = log.vocabulary.len();
    let vocab_idx: HashMap<&str, usize> = log
        .vocabulary
        .iter()
        .enumerate()
        .map(|(i, v)| (v.as_str(), i))
        .collect();

    let mut cols: Vec<Vec<u8>> = vec![Vec::with_capacity(log.units.len()); names.len()];
    for u in &log.units {
        let label = repeated_outcome_label(u, &log.outcome_event, tau)?;
        // censor horizon: exclusive bound on admissible event times
        let horizon_excl = match label.y {
            1 => label.t_prime.unwrap(),
            _ => u
                .min_occurrence_time(&log.outcome_event)
                .unwrap()
                .saturating_add(tau)
                .saturating_add(1),
        };
        let mut row = vec![0u8; n_ev];
        for (e, t) in &u.events {
            if *e == log.outcome_event || *t >= horizon_excl {
                continue;
            }
            match vocab_idx.get(e.as_str()) {
                Some(&j) => row[j] = 1,
                None => return Err(Error::data(format!("unknown event {e}"))),
            }
        }
        for (j, v) in row.into_iter().enumerate() {
            cols[j].push(v);
        }
        for (k, cov) in cov_names.iter().enumerate() {
            let v = u.covariates.get(cov).copied().unwrap_or(0);
            if v > 1 {
                return Err(Error::data(format!("covariate {cov} is not binary")));
            }
            cols[n_ev + k].push(v);
        }
        cols[names.len() - 1].push(label.y);
    }
    BinaryDataset::new(names, cols, &log.outcome_event)
}

/// Keeps the `ceil(keep_fraction * m)` most frequent non-outcome columns
/// (ties broken by name) and merges the rest into one OOV indicator, the OR
/// of the dropped columns. With nothing dropped the dataset is returned
/// unchanged (no OOV column).
pub fn apply_frequency_vocabulary(data: &BinaryDataset, keep_fraction: f64) -> Result<BinaryDataset> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::config(format!(
            "keep_fraction must be in (0, 1], got {keep_fraction}"
        )));
    }
    let cands = data.predictor_indices();
    if cands.is_empty() {
        return Err(Error::data("dataset has no event columns"));
    }
    let k = ((keep_fraction * cands.len() as f64).ceil() as usize).clamp(1, cands.len());
    if k == cands.len() {
        return Ok(data.clone());
    }
    let mut by_freq: Vec<usize> = cands.clone();
    by_freq.sort_by(|&a, &b| {
        let fa: u64 = data.column(a).iter().map(|&v| v as u64).sum();
        let fb: u64 = data.column(b).iter().map(|&v| v as u64).sum();
        fb.cmp(&fa).then_with(|| data.name(a).cmp(data.name(b)))
    });
    let kept: BTreeSet<usize> = by_freq[..k].iter().copied().collect();
    let dropped: Vec<usize> = by_freq[k..].to_vec();

    let mut names: Vec<String> = Vec::new();
    let mut cols: Vec<Vec<u8>> = Vec::new();
    for &i in &cands {
        if kept.contains(&i) {
            names.push(data.name(i).to_string());
            cols.push(data.column(i).to_vec());
        }
    }
    if data.names().iter().any(|n| n == "OOV") {
        return Err(Error::data("column named OOV already present"));
    }
    let mut oov = vec![0u8; data.n_rows()];
    for &i in &dropped {
        for (r, &v) in data.column(i).iter().enumerate() {
            oov[r] |= v;
        }
    }
    names.push("OOV".to_string());
    cols.push(oov);
    names.push(data.outcome_name().to_string());
    cols.push(data.column(data.outcome_index()).to_vec());
    BinaryDataset::new(names, cols, data.outcome_name())
}
