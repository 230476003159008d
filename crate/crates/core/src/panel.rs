//! Balanced unit-by-period panels, CSV ingestion and 2x2 views.
//!
//! A [`PanelDataset`] stores one outcome per unit and period, a time-invariant
//! covariate snapshot per unit and the first period in which each unit is
//! treated. Treatment is absorbing: `D[i,t] = 1{G_i <= t}`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First treated period of a unit. `Never` orders after every period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FirstTreatment {
    At(i64),
    Never,
}

impl FirstTreatment {
    pub fn is_never(self) -> bool {
        matches!(self, FirstTreatment::Never)
    }

    /// `D[t]` under absorbing treatment.
    pub fn treated_at(self, t: i64) -> bool {
        match self {
            FirstTreatment::At(g) => g <= t,
            FirstTreatment::Never => false,
        }
    }

    /// CSV encoding: `0` for never treated.
    pub fn to_csv_value(self) -> i64 {
        match self {
            FirstTreatment::At(g) => g,
            FirstTreatment::Never => 0,
        }
    }
}

impl fmt::Display for FirstTreatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FirstTreatment::At(g) => write!(f, "{g}"),
            FirstTreatment::Never => f.write_str("never"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    unit_ids: Vec<String>,
    periods: Vec<i64>,
    outcomes: DMatrix<f64>,
    covariates: DMatrix<f64>,
    covariate_names: Vec<String>,
    first_treatment: Vec<FirstTreatment>,
    hidden_confounder: Option<Vec<f64>>,
}

impl PanelDataset {
    /// Builds a dataset from unit-major parts and validates every invariant.
    pub fn new(
        unit_ids: Vec<String>,
        periods: Vec<i64>,
        outcomes: DMatrix<f64>,
        covariate_names: Vec<String>,
        covariates: DMatrix<f64>,
        first_treatment: Vec<FirstTreatment>,
        hidden_confounder: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = unit_ids.len();
        if periods.is_empty() {
            return Err(Error::SchemaMismatch("panel has no periods".into()));
        }
        if periods.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::SchemaMismatch("periods must be strictly increasing".into()));
        }
        if outcomes.nrows() != n || outcomes.ncols() != periods.len() {
            return Err(Error::SchemaMismatch(format!(
                "outcome matrix is {}x{}, expected {}x{}",
                outcomes.nrows(),
                outcomes.ncols(),
                n,
                periods.len()
            )));
        }
        if covariates.nrows() != n || covariates.ncols() != covariate_names.len() {
            return Err(Error::SchemaMismatch("covariate matrix shape does not match names".into()));
        }
        if first_treatment.len() != n {
            return Err(Error::SchemaMismatch("first_treatment length does not match units".into()));
        }
        if let Some(a) = &hidden_confounder {
            if a.len() != n {
                return Err(Error::SchemaMismatch("hidden confounder length does not match units".into()));
            }
        }
        let mut seen = BTreeSet::new();
        for name in &covariate_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::SchemaMismatch(format!("duplicate covariate name `{name}`")));
            }
        }
        let first = periods[0];
        for (id, g) in unit_ids.iter().zip(&first_treatment) {
            if let FirstTreatment::At(g) = *g {
                if g <= first {
                    return Err(Error::TreatedInFirstPeriod { unit: id.clone(), period: first });
                }
                if periods.binary_search(&g).is_err() {
                    return Err(Error::UnknownPeriod(g));
                }
            }
        }
        if outcomes.iter().chain(covariates.iter()).any(|v| !v.is_finite()) {
            return Err(Error::SchemaMismatch("non-finite outcome or covariate value".into()));
        }
        Ok(Self {
            unit_ids,
            periods,
            outcomes,
            covariates,
            covariate_names,
            first_treatment,
            hidden_confounder,
        })
    }

    pub fn n_units(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn periods(&self) -> &[i64] {
        &self.periods
    }

    pub fn outcomes(&self) -> &DMatrix<f64> {
        &self.outcomes
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn first_treatment(&self) -> &[FirstTreatment] {
        &self.first_treatment
    }

    pub fn hidden_confounder(&self) -> Option<&[f64]> {
        self.hidden_confounder.as_deref()
    }

    pub fn period_index(&self, t: i64) -> Option<usize> {
        self.periods.binary_search(&t).ok()
    }

    pub fn outcome(&self, unit: usize, t: i64) -> Option<f64> {
        self.period_index(t).map(|j| self.outcomes[(unit, j)])
    }

    /// Derived treatment indicator `D[i,t]`.
    pub fn treated(&self, unit: usize, t: i64) -> bool {
        self.first_treatment[unit].treated_at(t)
    }

    /// Distinct first-treatment periods, ascending.
    pub fn cohorts(&self) -> Vec<i64> {
        let set: BTreeSet<i64> = self
            .first_treatment
            .iter()
            .filter_map(|g| match g {
                FirstTreatment::At(g) => Some(*g),
                FirstTreatment::Never => None,
            })
            .collect();
        set.into_iter().collect()
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }
}

/// Where treatment information lives in a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreatmentColumn {
    /// First treated period per row; `0` or empty means never treated.
    FirstTreated(String),
    /// Per-row 0/1 treatment indicator, validated for monotonicity.
    Indicator(String),
}

/// Column-name mapping for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub unit: String,
    pub time: String,
    pub outcome: String,
    pub covariates: Vec<String>,
    pub treatment: TreatmentColumn,
    #[serde(default)]
    pub hidden_confounder: Option<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            unit: "unit".into(),
            time: "time".into(),
            outcome: "y".into(),
            covariates: Vec::new(),
            treatment: TreatmentColumn::FirstTreated("g".into()),
            hidden_confounder: None,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<PanelDataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema)
}

struct UnitRows {
    id: String,
    rows: Vec<(i64, f64, Vec<f64>, TreatValue, Option<f64>)>,
}

#[derive(Clone, Copy)]
enum TreatValue {
    First(FirstTreatment),
    Flag(bool),
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::SchemaMismatch(format!("missing column `{name}`")))
}

fn parse_f64(raw: &str, col: &str, line: u64) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| Error::SchemaMismatch(format!("line {line}: column `{col}` is not numeric: `{raw}`")))
}

fn parse_period(raw: &str, col: &str, line: u64) -> Result<i64> {
    let v = parse_f64(raw, col, line)?;
    if v.fract() != 0.0 || !v.is_finite() {
        return Err(Error::SchemaMismatch(format!("line {line}: `{col}` must be an integer period, got `{raw}`")));
    }
    Ok(v as i64)
}

/// Reads a long-format panel (one row per unit and period).
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let unit_col = column(&headers, &schema.unit)?;
    let time_col = column(&headers, &schema.time)?;
    let y_col = column(&headers, &schema.outcome)?;
    let cov_cols = schema
        .covariates
        .iter()
        .map(|c| column(&headers, c))
        .collect::<Result<Vec<_>>>()?;
    let treat_col = match &schema.treatment {
        TreatmentColumn::FirstTreated(c) | TreatmentColumn::Indicator(c) => column(&headers, c)?,
    };
    let a_col = schema.hidden_confounder.as_deref().map(|c| column(&headers, c)).transpose()?;

    let mut units: Vec<UnitRows> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(k as u64 + 2);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let id = field(unit_col).to_string();
        let t = parse_period(field(time_col), &schema.time, line)?;
        let y = parse_f64(field(y_col), &schema.outcome, line)?;
        let x = cov_cols
            .iter()
            .zip(&schema.covariates)
            .map(|(&i, name)| parse_f64(field(i), name, line))
            .collect::<Result<Vec<_>>>()?;
        let raw = field(treat_col).trim();
        let tv = match &schema.treatment {
            TreatmentColumn::FirstTreated(c) => {
                if raw.is_empty() {
                    TreatValue::First(FirstTreatment::Never)
                } else {
                    match parse_period(raw, c, line)? {
                        0 => TreatValue::First(FirstTreatment::Never),
                        g => TreatValue::First(FirstTreatment::At(g)),
                    }
                }
            }
            TreatmentColumn::Indicator(c) => match parse_f64(raw, c, line)? {
                v if v == 0.0 => TreatValue::Flag(false),
                v if v == 1.0 => TreatValue::Flag(true),
                _ => return Err(Error::SchemaMismatch(format!("line {line}: `{c}` must be 0 or 1"))),
            },
        };
        let a = match a_col {
            Some(i) => Some(parse_f64(field(i), "hidden confounder", line)?),
            None => None,
        };
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            units.push(UnitRows { id: id.clone(), rows: Vec::new() });
            units.len() - 1
        });
        units[slot].rows.push((t, y, x, tv, a));
    }
    if units.is_empty() {
        return Err(Error::SchemaMismatch("no data rows".into()));
    }

    let periods: Vec<i64> = units
        .iter()
        .flat_map(|u| u.rows.iter().map(|r| r.0))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = units.len();
    let k = schema.covariates.len();
    let mut outcomes = DMatrix::zeros(n, periods.len());
    let mut covariates = DMatrix::zeros(n, k);
    let mut first = Vec::with_capacity(n);
    let mut hidden = a_col.map(|_| Vec::with_capacity(n));

    for (i, unit) in units.iter_mut().enumerate() {
        unit.rows.sort_by_key(|r| r.0);
        for w in unit.rows.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateCell { unit: unit.id.clone(), period: w[0].0 });
            }
        }
        if unit.rows.len() != periods.len() {
            let have: BTreeSet<i64> = unit.rows.iter().map(|r| r.0).collect();
            let missing = periods.iter().find(|t| !have.contains(t)).copied().unwrap_or(periods[0]);
            return Err(Error::UnbalancedPanel { unit: unit.id.clone(), period: missing });
        }
        let x0 = &unit.rows[0].2;
        for row in &unit.rows[1..] {
            if let Some(j) = (0..k).find(|&j| row.2[j] != x0[j]) {
                return Err(Error::TimeVaryingCovariate {
                    unit: unit.id.clone(),
                    covariate: schema.covariates[j].clone(),
                });
            }
        }
        for (j, v) in x0.iter().enumerate() {
            covariates[(i, j)] = *v;
        }
        for (j, row) in unit.rows.iter().enumerate() {
            outcomes[(i, j)] = row.1;
        }
        let g = match unit.rows[0].3 {
            TreatValue::First(g0) => {
                if unit.rows.iter().any(|r| !matches!(r.3, TreatValue::First(g) if g == g0)) {
                    return Err(Error::SchemaMismatch(format!(
                        "first-treatment column varies within unit `{}`",
                        unit.id
                    )));
                }
                g0
            }
            TreatValue::Flag(_) => {
                let mut g = FirstTreatment::Never;
                let mut prev = false;
                for r in &unit.rows {
                    let TreatValue::Flag(d) = r.3 else { unreachable!() };
                    if prev && !d {
                        return Err(Error::NonMonotoneTreatment { unit: unit.id.clone(), period: r.0 });
                    }
                    if d && !prev {
                        g = FirstTreatment::At(r.0);
                    }
                    prev = d;
                }
                g
            }
        };
        first.push(g);
        if let Some(h) = hidden.as_mut() {
            let a0 = unit.rows[0].4.unwrap_or(f64::NAN);
            if unit.rows.iter().any(|r| r.4 != Some(a0)) {
                return Err(Error::TimeVaryingCovariate {
                    unit: unit.id.clone(),
                    covariate: schema.hidden_confounder.clone().unwrap_or_default(),
                });
            }
            h.push(a0);
        }
    }

    let ids = units.into_iter().map(|u| u.id).collect();
    PanelDataset::new(ids, periods, outcomes, schema.covariates.clone(), covariates, first, hidden)
}

/// Writes `unit,time,y,<covariates>,g[,a]`. Floats use shortest round-trip
/// formatting so that loading the file reproduces the dataset bit for bit.
pub fn write_csv<W: Write>(ds: &PanelDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["unit".to_string(), "time".into(), "y".into()];
    header.extend(ds.covariate_names.iter().cloned());
    header.push("g".into());
    if ds.hidden_confounder.is_some() {
        header.push("a".into());
    }
    w.write_record(&header)?;
    for i in 0..ds.n_units() {
        for (j, t) in ds.periods.iter().enumerate() {
            let mut rec = vec![ds.unit_ids[i].clone(), t.to_string(), ds.outcomes[(i, j)].to_string()];
            rec.extend((0..ds.covariates.ncols()).map(|k| ds.covariates[(i, k)].to_string()));
            rec.push(ds.first_treatment[i].to_csv_value().to_string());
            if let Some(a) = &ds.hidden_confounder {
                rec.push(a[i].to_string());
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(ds: &PanelDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(ds, std::io::BufWriter::new(file))
}

/// Schema matching the layout produced by [`write_csv`].
pub fn native_schema(ds: &PanelDataset) -> CsvSchema {
    CsvSchema {
        covariates: ds.covariate_names.clone(),
        hidden_confounder: ds.hidden_confounder.as_ref().map(|_| "a".into()),
        ..CsvSchema::default()
    }
}

/// Which units serve as comparisons in a staggered design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ControlGroup {
    #[default]
    NeverTreated,
    NotYetTreated,
}

/// Provenance of a view cut from a multi-period panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellMeta {
    pub g: i64,
    pub t_pre: i64,
    pub t_eval: i64,
    pub control: ControlGroup,
}

/// Cross-section of outcome differences, treatment indicators and covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoByTwoView {
    pub delta_y: Vec<f64>,
    pub treat: Vec<bool>,
    pub xmat: DMatrix<f64>,
    pub covariate_names: Vec<String>,
    pub n_treated: usize,
    pub n_control: usize,
    /// Row indices into the source dataset.
    pub units: Vec<usize>,
    pub hidden_confounder: Option<Vec<f64>>,
    pub meta: Option<CellMeta>,
}

impl TwoByTwoView {
    pub fn new(delta_y: Vec<f64>, treat: Vec<bool>, xmat: DMatrix<f64>, covariate_names: Vec<String>) -> Result<Self> {
        let n = delta_y.len();
        if treat.len() != n || xmat.nrows() != n {
            return Err(Error::SchemaMismatch("delta_y, treat and xmat row counts differ".into()));
        }
        if xmat.ncols() != covariate_names.len() {
            return Err(Error::SchemaMismatch("covariate names do not match xmat columns".into()));
        }
        let n_treated = treat.iter().filter(|&&d| d).count();
        if n_treated == 0 {
            return Err(Error::NoTreatedUnits);
        }
        if n_treated == n {
            return Err(Error::NoControlUnits);
        }
        Ok(Self {
            delta_y,
            treat,
            xmat,
            covariate_names,
            n_treated,
            n_control: n - n_treated,
            units: (0..n).collect(),
            hidden_confounder: None,
            meta: None,
        })
    }

    pub fn n(&self) -> usize {
        self.delta_y.len()
    }

    /// Treated share of the view.
    pub fn p_hat(&self) -> f64 {
        self.n_treated as f64 / self.n() as f64
    }

    /// Copy of the view without the named covariates.
    pub fn without_covariates(&self, names: &[String]) -> Result<Self> {
        for name in names {
            if !self.covariate_names.contains(name) {
                return Err(Error::UnknownCovariate(name.clone()));
            }
        }
        let keep: Vec<usize> = (0..self.covariate_names.len())
            .filter(|&j| !names.contains(&self.covariate_names[j]))
            .collect();
        let xmat = self.xmat.select_columns(keep.iter());
        Ok(Self {
            xmat,
            covariate_names: keep.iter().map(|&j| self.covariate_names[j].clone()).collect(),
            ..self.clone()
        })
    }

    /// Copy of the view with the hidden confounder appended as covariate `A`.
    pub fn with_hidden_confounder(&self) -> Result<Self> {
        let a = self
            .hidden_confounder
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("view carries no hidden confounder".into()))?;
        let n = self.n();
        let k = self.xmat.ncols();
        let xmat = DMatrix::from_fn(n, k + 1, |i, j| if j < k { self.xmat[(i, j)] } else { a[i] });
        let mut names = self.covariate_names.clone();
        names.push("A".into());
        Ok(Self { xmat, covariate_names: names, ..self.clone() })
    }
}

/// `ΔY_i = Y[i,2] − Y[i,1]`, `treat_i = 1{G_i = 2}` on a two-period panel.
pub fn canonical_2x2(ds: &PanelDataset) -> Result<TwoByTwoView> {
    if ds.n_periods() != 2 {
        return Err(Error::NotTwoPeriods(ds.n_periods()));
    }
    let t2 = ds.periods[1];
    let delta_y = (0..ds.n_units()).map(|i| ds.outcomes[(i, 1)] - ds.outcomes[(i, 0)]).collect();
    let treat = ds.first_treatment.iter().map(|g| *g == FirstTreatment::At(t2)).collect();
    let mut view = TwoByTwoView::new(delta_y, treat, ds.covariates.clone(), ds.covariate_names.clone())?;
    view.hidden_confounder = ds.hidden_confounder.clone();
    Ok(view)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariateSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelDiagnostics {
    pub n_units: usize,
    pub n_periods: usize,
    /// Units per first-treatment period; `never` last.
    pub cohort_sizes: Vec<(FirstTreatment, usize)>,
    /// Share of units with `D[i,t] = 1` per period.
    pub treated_share: Vec<(i64, f64)>,
    pub covariates: Vec<CovariateSummary>,
}

pub fn diagnostics(ds: &PanelDataset) -> PanelDiagnostics {
    let mut counts: std::collections::BTreeMap<FirstTreatment, usize> = Default::default();
    for g in &ds.first_treatment {
        *counts.entry(*g).or_default() += 1;
    }
    let n = ds.n_units() as f64;
    let treated_share = ds
        .periods
        .iter()
        .map(|&t| (t, ds.first_treatment.iter().filter(|g| g.treated_at(t)).count() as f64 / n))
        .collect();
    let covariates = ds
        .covariate_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col: Vec<f64> = ds.covariates.column(j).iter().copied().collect();
            CovariateSummary {
                name: name.clone(),
                mean: crate::stats::mean(&col),
                sd: crate::stats::sd(&col),
                min: col.iter().copied().fold(f64::INFINITY, f64::min),
                max: col.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    PanelDiagnostics {
        n_units: ds.n_units(),
        n_periods: ds.n_periods(),
        cohort_sizes: counts.into_iter().collect(),
        treated_share,
        covariates,
    }
}
