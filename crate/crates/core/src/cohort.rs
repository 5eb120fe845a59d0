//! Cohort extraction and VAP labeling.
//!
//! A patient is VAP-positive when all three confirmations hold:
//! radiologic (any finding), systemic (fever or abnormal white count, strict
//! thresholds) and pulmonary (two or more symptoms).

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::fmt_g17;
use crate::error::{Error, Result};
use crate::seed::Seed;

pub const FEVER_THRESHOLD_C: f64 = 38.0;
pub const WBC_LOW_PER_ML: f64 = 4000.0;
pub const WBC_HIGH_PER_ML: f64 = 12000.0;
pub const MIN_PULMONARY_SYMPTOMS: usize = 2;
pub const MIN_VENTILATION_HOURS: f64 = 48.0;

/// ICD-9 ranges for traumatic brain injury, as 5-digit codes. The third range
/// (850.00–854.19) is written "8500–85419" in clinical shorthand.
pub const TBI_ICD9_RANGES: [(u32, u32); 3] = [(80000, 80199), (80300, 80499), (85000, 85419)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiologicFinding {
    Infiltrate,
    Consolidation,
    Cavitation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulmonarySymptom {
    PurulentSputum,
    DeterioratingGasExchange,
    ExcessiveCough,
    ExcessiveDyspnea,
    ExcessiveTachypnea,
    NewBreathSounds,
}

impl RadiologicFinding {
    pub const ALL: [RadiologicFinding; 3] = [
        RadiologicFinding::Infiltrate,
        RadiologicFinding::Consolidation,
        RadiologicFinding::Cavitation,
    ];

    pub fn token(self) -> &'static str {
        match self {
            RadiologicFinding::Infiltrate => "infiltrate",
            RadiologicFinding::Consolidation => "consolidation",
            RadiologicFinding::Cavitation => "cavitation",
        }
    }
}

impl PulmonarySymptom {
    pub const ALL: [PulmonarySymptom; 6] = [
        PulmonarySymptom::PurulentSputum,
        PulmonarySymptom::DeterioratingGasExchange,
        PulmonarySymptom::ExcessiveCough,
        PulmonarySymptom::ExcessiveDyspnea,
        PulmonarySymptom::ExcessiveTachypnea,
        PulmonarySymptom::NewBreathSounds,
    ];

    pub fn token(self) -> &'static str {
        match self {
            PulmonarySymptom::PurulentSputum => "purulent_sputum",
            PulmonarySymptom::DeterioratingGasExchange => "deteriorating_gas_exchange",
            PulmonarySymptom::ExcessiveCough => "excessive_cough",
            PulmonarySymptom::ExcessiveDyspnea => "excessive_dyspnea",
            PulmonarySymptom::ExcessiveTachypnea => "excessive_tachypnea",
            PulmonarySymptom::NewBreathSounds => "new_breath_sounds",
        }
    }
}

impl FromStr for RadiologicFinding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.token() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown radiologic finding `{s}`")))
    }
}

impl FromStr for PulmonarySymptom {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.token() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown pulmonary symptom `{s}`")))
    }
}

/// Pre-aggregated per-patient evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalEvidence {
    pub radiologic_findings: BTreeSet<RadiologicFinding>,
    pub max_temperature_c: f64,
    pub wbc_min_per_ml: f64,
    pub wbc_max_per_ml: f64,
    pub pulmonary_symptoms: BTreeSet<PulmonarySymptom>,
}

impl ClinicalEvidence {
    pub fn new(
        radiologic_findings: impl IntoIterator<Item = RadiologicFinding>,
        max_temperature_c: f64,
        wbc_min_per_ml: f64,
        wbc_max_per_ml: f64,
        pulmonary_symptoms: impl IntoIterator<Item = PulmonarySymptom>,
    ) -> Result<Self> {
        let e = ClinicalEvidence {
            radiologic_findings: radiologic_findings.into_iter().collect(),
            max_temperature_c,
            wbc_min_per_ml,
            wbc_max_per_ml,
            pulmonary_symptoms: pulmonary_symptoms.into_iter().collect(),
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(25.0..=45.0).contains(&self.max_temperature_c) {
            return Err(Error::InvalidInput(format!(
                "temperature {} °C outside [25, 45]",
                self.max_temperature_c
            )));
        }
        if !(self.wbc_min_per_ml >= 0.0 && self.wbc_min_per_ml <= self.wbc_max_per_ml) {
            return Err(Error::InvalidInput(format!(
                "white count range [{}, {}] is invalid",
                self.wbc_min_per_ml, self.wbc_max_per_ml
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriteriaTrace {
    pub radiologic: bool,
    pub systemic: bool,
    pub pulmonary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VapLabel {
    pub positive: bool,
    pub criteria_trace: CriteriaTrace,
}

pub fn radiologic_confirm(e: &ClinicalEvidence) -> bool {
    !e.radiologic_findings.is_empty()
}

pub fn systemic_confirm(e: &ClinicalEvidence) -> bool {
    e.max_temperature_c > FEVER_THRESHOLD_C
        || e.wbc_min_per_ml < WBC_LOW_PER_ML
        || e.wbc_max_per_ml > WBC_HIGH_PER_ML
}

pub fn pulmonary_confirm(e: &ClinicalEvidence) -> bool {
    e.pulmonary_symptoms.len() >= MIN_PULMONARY_SYMPTOMS
}

pub fn diagnose_vap(e: &ClinicalEvidence) -> VapLabel {
    let criteria_trace = CriteriaTrace {
        radiologic: radiologic_confirm(e),
        systemic: systemic_confirm(e),
        pulmonary: pulmonary_confirm(e),
    };
    VapLabel {
        positive: criteria_trace.radiologic && criteria_trace.systemic && criteria_trace.pulmonary,
        criteria_trace,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionRecord {
    pub patient_id: String,
    pub icd9_codes: BTreeSet<u32>,
    pub gcs_recorded_at_admission: bool,
    pub vitals_recorded_at_admission: bool,
    pub ventilation_hours: f64,
}

impl AdmissionRecord {
    pub fn is_tbi(&self) -> bool {
        self.icd9_codes
            .iter()
            .any(|c| TBI_ICD9_RANGES.iter().any(|(lo, hi)| (lo..=hi).contains(&c)))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionCounts {
    pub non_tbi: usize,
    pub no_gcs: usize,
    pub no_vitals: usize,
    pub vent_lt_48h: usize,
}

impl ExclusionCounts {
    pub fn total(&self) -> usize {
        self.non_tbi + self.no_gcs + self.no_vitals + self.vent_lt_48h
    }
}

/// Applies the TBI code filter, then the exclusions in order: missing GCS,
/// missing vitals, ventilation shorter than 48 hours.
pub fn select_tbi_cohort(records: &[AdmissionRecord]) -> Result<(Vec<AdmissionRecord>, ExclusionCounts)> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no admission records".into()));
    }
    let mut counts = ExclusionCounts::default();
    let mut kept = Vec::new();
    for r in records {
        if r.ventilation_hours < 0.0 || !r.ventilation_hours.is_finite() {
            return Err(Error::InvalidInput(format!(
                "patient {}: ventilation hours {} is negative",
                r.patient_id, r.ventilation_hours
            )));
        }
        if !r.is_tbi() {
            counts.non_tbi += 1;
        } else if !r.gcs_recorded_at_admission {
            counts.no_gcs += 1;
        } else if !r.vitals_recorded_at_admission {
            counts.no_vitals += 1;
        } else if r.ventilation_hours < MIN_VENTILATION_HOURS {
            counts.vent_lt_48h += 1;
        } else {
            kept.push(r.clone());
        }
    }
    Ok((kept, counts))
}

/// Sizes of the staged selection fixture: 2545 coded admissions, then
/// 19 / 25 / 1665 exclusions, leaving 836.
pub const STAGED_INITIAL: usize = 2545;
pub const STAGED_NO_GCS: usize = 19;
pub const STAGED_NO_VITALS: usize = 25;
pub const STAGED_VENT_LT_48H: usize = 1665;
pub const STAGED_KEPT: usize = 836;

/// Synthetic admissions staged so that [`select_tbi_cohort`] reproduces the
/// published flow counts. `extra_non_tbi` unrelated admissions are mixed in.
pub fn staged_admissions(seed: Seed, extra_non_tbi: usize) -> Vec<AdmissionRecord> {
    let mut rng = seed.rng();
    let mut stages = Vec::with_capacity(STAGED_INITIAL + extra_non_tbi);
    stages.extend(std::iter::repeat_n(0u8, extra_non_tbi));
    stages.extend(std::iter::repeat_n(1u8, STAGED_NO_GCS));
    stages.extend(std::iter::repeat_n(2u8, STAGED_NO_VITALS));
    stages.extend(std::iter::repeat_n(3u8, STAGED_VENT_LT_48H));
    stages.extend(std::iter::repeat_n(4u8, STAGED_KEPT));
    stages.shuffle(&mut rng);

    let pick_tbi = |rng: &mut crate::seed::Rng| {
        let (lo, hi) = TBI_ICD9_RANGES[rng.gen_range(0..TBI_ICD9_RANGES.len())];
        rng.gen_range(lo..=hi)
    };
    stages
        .into_iter()
        .enumerate()
        .map(|(i, stage)| {
            let mut codes = BTreeSet::new();
            if stage == 0 {
                // fractures of the limbs and spine sit outside every TBI range
                codes.insert(rng.gen_range(80500..=80599));
            } else {
                codes.insert(pick_tbi(&mut rng));
            }
            if rng.gen_bool(0.3) {
                codes.insert(rng.gen_range(86000..=86999));
            }
            let vent = match stage {
                3 => rng.gen_range(0.0..MIN_VENTILATION_HOURS),
                _ => rng.gen_range(MIN_VENTILATION_HOURS..500.0),
            };
            AdmissionRecord {
                patient_id: format!("P{i:05}"),
                icd9_codes: codes,
                gcs_recorded_at_admission: stage != 1,
                vitals_recorded_at_admission: stage != 2,
                ventilation_hours: vent,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceRow {
    pub patient_id: String,
    pub evidence: ClinicalEvidence,
}

const EVIDENCE_HEADER: [&str; 6] = [
    "patient_id",
    "radiologic_findings",
    "max_temperature_c",
    "wbc_min_per_ml",
    "wbc_max_per_ml",
    "pulmonary_symptoms",
];

fn parse_tokens<T: FromStr<Err = Error> + Ord>(raw: &str) -> Result<BTreeSet<T>> {
    raw.split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(T::from_str)
        .collect()
}

fn join_tokens<T: Copy>(set: &BTreeSet<T>, token: impl Fn(T) -> &'static str) -> String {
    set.iter().map(|t| token(*t)).collect::<Vec<_>>().join(";")
}

/// Reads the evidence CSV: one patient per row, findings and symptoms as
/// semicolon-joined tokens.
pub fn read_evidence_csv<R: Read>(reader: R) -> Result<Vec<EvidenceRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    for (column, expected) in EVIDENCE_HEADER.iter().enumerate() {
        let found = header.get(column).unwrap_or("<none>");
        if found != *expected {
            return Err(Error::HeaderMismatch {
                column,
                expected: expected.to_string(),
                found: found.to_string(),
            });
        }
    }
    let mut out = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let cell_err = |column: &str, e: Error| Error::Cell {
            row,
            column: column.into(),
            message: e.to_string(),
        };
        let num = |k: usize| -> Result<f64> {
            record[k].trim().parse::<f64>().map_err(|_| Error::Cell {
                row,
                column: EVIDENCE_HEADER[k].into(),
                message: format!("`{}` is not a number", &record[k]),
            })
        };
        let evidence = ClinicalEvidence {
            radiologic_findings: parse_tokens(&record[1]).map_err(|e| cell_err(EVIDENCE_HEADER[1], e))?,
            max_temperature_c: num(2)?,
            wbc_min_per_ml: num(3)?,
            wbc_max_per_ml: num(4)?,
            pulmonary_symptoms: parse_tokens(&record[5]).map_err(|e| cell_err(EVIDENCE_HEADER[5], e))?,
        };
        evidence.validate().map_err(|e| cell_err("<row>", e))?;
        out.push(EvidenceRow {
            patient_id: record[0].to_string(),
            evidence,
        });
    }
    Ok(out)
}

pub fn write_evidence_csv<W: Write>(rows: &[EvidenceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EVIDENCE_HEADER)?;
    for r in rows {
        let e = &r.evidence;
        w.write_record([
            r.patient_id.clone(),
            join_tokens(&e.radiologic_findings, RadiologicFinding::token),
            fmt_g17(e.max_temperature_c),
            fmt_g17(e.wbc_min_per_ml),
            fmt_g17(e.wbc_max_per_ml),
            join_tokens(&e.pulmonary_symptoms, PulmonarySymptom::token),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Writes `patient_id,vap,rc,sc,pc` with 0/1 flags.
pub fn write_labels_csv<W: Write>(rows: &[EvidenceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["patient_id", "vap", "rc", "sc", "pc"])?;
    let b = |x: bool| if x { "1" } else { "0" };
    for r in rows {
        let l = diagnose_vap(&r.evidence);
        let t = l.criteria_trace;
        w.write_record([
            r.patient_id.as_str(),
            b(l.positive),
            b(t.radiologic),
            b(t.systemic),
            b(t.pulmonary),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

impl fmt::Display for VapLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.criteria_trace;
        write!(
            f,
            "{} (RC={}, SC={}, PC={})",
            if self.positive { "VAP" } else { "no VAP" },
            t.radiologic,
            t.systemic,
            t.pulmonary
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use PulmonarySymptom::*;
    use RadiologicFinding::*;

    fn ev(r: &[RadiologicFinding], t: f64, lo: f64, hi: f64, p: &[PulmonarySymptom]) -> ClinicalEvidence {
        ClinicalEvidence::new(r.iter().copied(), t, lo, hi, p.iter().copied()).unwrap()
    }

    #[test]
    fn radiologic() {
        assert!(radiologic_confirm(&ev(&[Infiltrate], 37.0, 6000.0, 9000.0, &[])));
        assert!(radiologic_confirm(&ev(&[Cavitation], 37.0, 6000.0, 9000.0, &[])));
        assert!(!radiologic_confirm(&ev(&[], 37.0, 6000.0, 9000.0, &[])));
    }

    #[test]
    fn systemic_thresholds_are_strict() {
        assert!(systemic_confirm(&ev(&[], 38.1, 6000.0, 9000.0, &[])));
        assert!(systemic_confirm(&ev(&[], 37.0, 3500.0, 9000.0, &[])));
        assert!(!systemic_confirm(&ev(&[], 38.0, 6000.0, 9000.0, &[])));
        assert!(!systemic_confirm(&ev(&[], 37.0, 4000.0, 12000.0, &[])));
        assert!(systemic_confirm(&ev(&[], 37.0, 4000.0, 12000.5, &[])));
    }

    #[test]
    fn pulmonary_needs_two() {
        assert!(pulmonary_confirm(&ev(&[], 37.0, 6000.0, 9000.0, &[PurulentSputum, ExcessiveDyspnea])));
        assert!(!pulmonary_confirm(&ev(&[], 37.0, 6000.0, 9000.0, &[NewBreathSounds])));
        assert!(!pulmonary_confirm(&ev(&[], 37.0, 6000.0, 9000.0, &[])));
    }

    #[test]
    fn diagnosis_examples() {
        let l = diagnose_vap(&ev(&[Infiltrate], 38.5, 6000.0, 9000.0, &[PurulentSputum, ExcessiveCough]));
        assert!(l.positive);
        assert_eq!(l.criteria_trace, CriteriaTrace { radiologic: true, systemic: true, pulmonary: true });

        let l = diagnose_vap(&ev(&[], 39.0, 6000.0, 9000.0, &[PurulentSputum, ExcessiveCough, ExcessiveDyspnea]));
        assert!(!l.positive);
        assert_eq!(l.criteria_trace, CriteriaTrace { radiologic: false, systemic: true, pulmonary: true });

        let l = diagnose_vap(&ev(&[Consolidation], 37.0, 6000.0, 13000.0, &[ExcessiveCough]));
        assert!(!l.positive);
        assert_eq!(l.criteria_trace, CriteriaTrace { radiologic: true, systemic: true, pulmonary: false });
    }

    #[test]
    fn evidence_validation() {
        assert!(ClinicalEvidence::new([], 50.0, 1.0, 2.0, []).is_err());
        assert!(ClinicalEvidence::new([], 37.0, 9000.0, 2.0, []).is_err());
    }

    fn rec(code: u32, gcs: bool, vitals: bool, vent: f64) -> AdmissionRecord {
        AdmissionRecord {
            patient_id: "x".into(),
            icd9_codes: [code].into_iter().collect(),
            gcs_recorded_at_admission: gcs,
            vitals_recorded_at_admission: vitals,
            ventilation_hours: vent,
        }
    }

    #[test]
    fn cohort_filter_examples() {
        let (kept, c) = select_tbi_cohort(&[rec(85010, true, true, 72.0)]).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(c.total(), 0);
        let (kept, c) = select_tbi_cohort(&[rec(85010, true, true, 47.9)]).unwrap();
        assert!(kept.is_empty());
        assert_eq!(c.vent_lt_48h, 1);
        // boundaries of each code range
        for code in [80000, 80199, 80300, 80499, 85000, 85419] {
            assert!(rec(code, true, true, 48.0).is_tbi(), "{code}");
        }
        for code in [80200, 80299, 80500, 84999, 85420] {
            assert!(!rec(code, true, true, 48.0).is_tbi(), "{code}");
        }
        // exclusion order: GCS before vitals before ventilation
        let (_, c) = select_tbi_cohort(&[rec(80001, false, false, 1.0)]).unwrap();
        assert_eq!(c.no_gcs, 1);
        assert!(select_tbi_cohort(&[]).is_err());
    }

    #[test]
    fn staged_fixture_reproduces_flow_counts() {
        let records = staged_admissions(Seed(1), 0);
        assert_eq!(records.len(), STAGED_INITIAL);
        let (kept, c) = select_tbi_cohort(&records).unwrap();
        assert_eq!(kept.len(), STAGED_KEPT);
        assert_eq!((c.no_gcs, c.no_vitals, c.vent_lt_48h), (19, 25, 1665));
    }

    #[test]
    fn evidence_csv_round_trip_and_labels() {
        let rows = vec![
            EvidenceRow { patient_id: "a".into(), evidence: ev(&[Infiltrate], 38.5, 6000.0, 9000.0, &[PurulentSputum, ExcessiveCough]) },
            EvidenceRow { patient_id: "b".into(), evidence: ev(&[], 37.0, 6000.0, 9000.0, &[]) },
        ];
        let mut buf = Vec::new();
        write_evidence_csv(&rows, &mut buf).unwrap();
        let back = read_evidence_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
        let mut out = Vec::new();
        write_labels_csv(&back, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "patient_id,vap,rc,sc,pc\na,1,1,1,1\nb,0,0,0,0\n");
    }

    #[test]
    fn unknown_token_rejected() {
        let csv = "patient_id,radiologic_findings,max_temperature_c,wbc_min_per_ml,wbc_max_per_ml,pulmonary_symptoms\n\
                   a,opacity,37,5000,6000,\n";
        assert!(read_evidence_csv(csv.as_bytes()).is_err());
    }

    fn arb_evidence() -> impl Strategy<Value = ClinicalEvidence> {
        (
            proptest::sample::subsequence(RadiologicFinding::ALL.to_vec(), 0..=3),
            35.0f64..41.0,
            0.0f64..20000.0,
            0.0f64..10000.0,
            proptest::sample::subsequence(PulmonarySymptom::ALL.to_vec(), 0..=6),
        )
            .prop_map(|(r, t, lo, extra, p)| ClinicalEvidence::new(r, t, lo, lo + extra, p).unwrap())
    }

    proptest! {
        #[test]
        fn diagnosis_is_conjunction(e in arb_evidence()) {
            let l = diagnose_vap(&e);
            prop_assert_eq!(l.positive, radiologic_confirm(&e) && systemic_confirm(&e) && pulmonary_confirm(&e));
        }

        #[test]
        fn diagnosis_is_monotone(
            e in arb_evidence(),
            f in proptest::sample::select(RadiologicFinding::ALL.to_vec()),
            s in proptest::sample::select(PulmonarySymptom::ALL.to_vec()),
        ) {
            let before = diagnose_vap(&e).positive;
            let mut more = e.clone();
            more.radiologic_findings.insert(f);
            more.pulmonary_symptoms.insert(s);
            prop_assert!(!before || diagnose_vap(&more).positive);
        }

        #[test]
        fn cohort_counts_balance(seed in 0u64..1000, extra in 0usize..50) {
            let records = staged_admissions(Seed(seed), extra);
            let (kept, c) = select_tbi_cohort(&records).unwrap();
            prop_assert_eq!(records.len() - c.total(), kept.len());
            prop_assert_eq!(c.non_tbi, extra);
        }
    }
}
