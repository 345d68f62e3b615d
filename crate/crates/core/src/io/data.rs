//! CSV ingestion into survival datasets and the matching writer.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::config::{Bindings, DesignSpec, IllnessDeathColumns, LongitudinalBindings, ResponseTransform};
use crate::model::Family;
use crate::survival::{
    CensoredObservation, DatasetExtras, DesignMatrix, IllnessDeathRecord, Longitudinal, SurvivalDataset,
};

const INTERCEPT: &str = "(Intercept)";

/// A CSV file held as text cells.
#[derive(Debug, Clone)]
pub struct Table {
    path: PathBuf,
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Data(format!("{}: empty file", path.display())));
        }
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = reader.headers()?.iter().map(str::to_string).collect();
        let rows = reader.records().collect::<std::result::Result<Vec<_>, _>>()?;
        if rows.is_empty() {
            return Err(Error::Data(format!("{}: header but no data rows", path.display())));
        }
        Ok(Self { path: path.to_path_buf(), headers, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("{}: missing column `{name}`", self.path.display())))
    }

    /// Cells of a column as text.
    pub fn text(&self, name: &str) -> Result<Vec<String>> {
        let j = self.index(name)?;
        Ok(self.rows.iter().map(|r| r.get(j).unwrap_or("").to_string()).collect())
    }

    /// Cells of a column as numbers.
    pub fn numeric(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let cell = r.get(j).unwrap_or("");
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::Data(format!(
                        "{}:{}: column `{name}` has non-numeric cell `{cell}`",
                        self.path.display(),
                        i + 2
                    ))
                })
            })
            .collect()
    }

    /// Cells of a 0/1 column.
    pub fn indicator(&self, name: &str) -> Result<Vec<bool>> {
        let values = self.numeric(name)?;
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| match v {
                0.0 => Ok(false),
                1.0 => Ok(true),
                _ => Err(Error::Data(format!(
                    "{}:{}: column `{name}` must be 0 or 1, got {v}",
                    self.path.display(),
                    i + 2
                ))),
            })
            .collect()
    }

    fn times(&self, name: &str) -> Result<Vec<f64>> {
        let values = self.numeric(name)?;
        if let Some(i) = values.iter().position(|&t| t < 0.0) {
            return Err(Error::Data(format!(
                "{}:{}: negative time {} in `{name}`",
                self.path.display(),
                i + 2,
                values[i]
            )));
        }
        Ok(values)
    }

    fn line_error(&self, row: usize, e: Error) -> Error {
        Error::Data(format!("{}:{}: {e}", self.path.display(), row + 2))
    }
}

/// Levels of a factor column, numerically ordered when every level is a number.
fn levels(cells: &[String]) -> Vec<String> {
    let distinct: BTreeSet<&str> = cells.iter().map(String::as_str).collect();
    let mut levels: Vec<String> = distinct.into_iter().map(str::to_string).collect();
    let numeric: Option<Vec<f64>> = levels.iter().map(|l| l.parse::<f64>().ok()).collect();
    if let Some(keys) = numeric {
        let mut paired: Vec<(f64, String)> = keys.into_iter().zip(levels).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0));
        levels = paired.into_iter().map(|(_, l)| l).collect();
    }
    levels
}

fn same_level(a: &str, b: &str) -> bool {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

/// Builds a design matrix from the columns named in `spec`, in table row order.
pub fn build_design(table: &Table, spec: &DesignSpec) -> Result<DesignMatrix> {
    for name in spec.factors.keys().chain(&spec.standardize) {
        if !spec.covariates.contains(name) {
            return Err(Error::Config(format!("`{name}` is not listed among the covariates")));
        }
    }
    let n = table.len();
    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    if spec.intercept {
        names.push(INTERCEPT.to_string());
        columns.push(vec![1.0; n]);
    }
    for col in &spec.covariates {
        if let Some(reference) = spec.factors.get(col) {
            if spec.standardize.contains(col) {
                return Err(Error::Config(format!("factor `{col}` cannot be standardized")));
            }
            let cells = table.text(col)?;
            let levels = levels(&cells);
            if !levels.iter().any(|l| same_level(l, reference)) {
                return Err(Error::Data(format!("factor `{col}` has no reference level `{reference}`")));
            }
            for level in levels.iter().filter(|l| !same_level(l, reference)) {
                names.push(format!("{col}{level}"));
                columns.push(cells.iter().map(|c| if c == level { 1.0 } else { 0.0 }).collect());
            }
        } else {
            let mut values = table.numeric(col)?;
            if spec.standardize.contains(col) {
                standardize(col, &mut values)?;
            }
            names.push(col.clone());
            columns.push(values);
        }
    }
    let values = (0..n).flat_map(|i| columns.iter().map(move |c| c[i])).collect();
    DesignMatrix::new(n, names.len(), values, names)
}

/// Centres and scales by the sample standard deviation, as R's `scale` does.
fn standardize(name: &str, values: &mut [f64]) -> Result<()> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::Data(format!("cannot standardize constant column `{name}`")));
    }
    values.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    Ok(())
}

fn subject_ids(table: &Table, id: Option<&str>) -> Result<Vec<u64>> {
    let fallback = || (1..=table.len() as u64).collect();
    let Some(col) = id else { return Ok(fallback()) };
    let cells = table.text(col)?;
    Ok(cells.iter().map(|c| c.parse::<u64>().ok()).collect::<Option<Vec<_>>>().unwrap_or_else(fallback))
}

/// Reads a dataset for `family` from the CSV at `path`.
pub fn load_dataset(path: &Path, family: Family, bindings: &Bindings) -> Result<SurvivalDataset> {
    let table = Table::read(path)?;
    dataset_from_table(&table, family, bindings)
}

pub fn dataset_from_table(table: &Table, family: Family, b: &Bindings) -> Result<SurvivalDataset> {
    let ids = subject_ids(table, b.id.as_deref())?;
    let required = |v: &Option<String>, what: &str| {
        v.clone().ok_or_else(|| Error::Config(format!("{family} model needs `columns.{what}`")))
    };
    if family == Family::IllnessDeath {
        let cols = b.illness_death.clone().unwrap_or_default();
        let (obs, recs) = illness_death_records(table, &ids, &cols)?;
        let design = build_design(table, &b.design)?;
        return SurvivalDataset::new(obs, design, DatasetExtras::IllnessDeath(recs));
    }
    let time = table.times(&required(&b.time, "time")?)?;
    let event_col = required(&b.event, "event")?;
    let mut observations = Vec::with_capacity(table.len());
    if family == Family::CompetingRisks {
        let cause = table.numeric(&event_col)?;
        for (i, (&t, &k)) in time.iter().zip(&cause).enumerate() {
            if k < 0.0 || k.fract() != 0.0 || k > u8::MAX as f64 {
                return Err(
                    table.line_error(i, Error::Data(format!("cause must be a small nonnegative integer, got {k}")))
                );
            }
            let obs = CensoredObservation::from_indicator(ids[i], t, k > 0.0).map_err(|e| table.line_error(i, e))?;
            observations.push(obs.with_label(k as u8));
        }
    } else {
        let event = table.indicator(&event_col)?;
        for (i, (&t, &d)) in time.iter().zip(&event).enumerate() {
            observations.push(CensoredObservation::from_indicator(ids[i], t, d).map_err(|e| table.line_error(i, e))?);
        }
    }
    let design = build_design(table, &b.design)?;
    let extras = match family {
        Family::Cure => {
            let spec =
                b.incidence.as_ref().ok_or_else(|| Error::Config("cure model needs `columns.incidence`".into()))?;
            DatasetExtras::Cure { incidence: build_design(table, spec)? }
        }
        Family::Frailty => {
            let cells = table.text(&required(&b.group, "group")?)?;
            let mut index: HashMap<&str, usize> = HashMap::new();
            let groups = cells
                .iter()
                .map(|c| {
                    let next = index.len();
                    *index.entry(c.as_str()).or_insert(next)
                })
                .collect();
            DatasetExtras::Frailty { groups, n_groups: index.len() }
        }
        Family::Joint => {
            let long = b
                .longitudinal
                .as_ref()
                .ok_or_else(|| Error::Config("joint model needs `columns.longitudinal`".into()))?;
            let keys = table.text(&required(&b.id, "id")?)?;
            DatasetExtras::Joint(load_longitudinal(long, &keys)?)
        }
        _ => DatasetExtras::None,
    };
    SurvivalDataset::new(observations, design, extras)
}

fn illness_death_records(
    table: &Table,
    ids: &[u64],
    cols: &IllnessDeathColumns,
) -> Result<(Vec<CensoredObservation>, Vec<IllnessDeathRecord>)> {
    let times1 = table.times(&cols.times1)?;
    let times2 = table.times(&cols.times2)?;
    let time = table.times(&cols.time)?;
    let delta = table.indicator(&cols.delta)?;
    let status = table.indicator(&cols.status)?;
    let mut obs = Vec::with_capacity(table.len());
    let mut recs = Vec::with_capacity(table.len());
    for i in 0..table.len() {
        let rec = IllnessDeathRecord::from_indicators(times1[i], times2[i], time[i], delta[i], status[i])
            .map_err(|e| table.line_error(i, e))?;
        recs.push(rec);
        obs.push(CensoredObservation::from_indicator(ids[i], time[i], status[i]).map_err(|e| table.line_error(i, e))?);
    }
    Ok((obs, recs))
}

/// Reads repeated measurements and orders them by subject, keeping file order within a subject.
fn load_longitudinal(b: &LongitudinalBindings, subject_keys: &[String]) -> Result<Longitudinal> {
    let table = Table::read(&b.path)?;
    let index: HashMap<&str, usize> = subject_keys.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
    let keys = table.text(&b.id)?;
    let subject = keys
        .iter()
        .enumerate()
        .map(|(i, k)| {
            index
                .get(k.as_str())
                .copied()
                .ok_or_else(|| table.line_error(i, Error::Data(format!("measurement of unknown subject `{k}`"))))
        })
        .collect::<Result<Vec<_>>>()?;
    let time = table.times(&b.time)?;
    let mut response = table.numeric(&b.response)?;
    if b.transform == ResponseTransform::Log {
        if let Some(i) = response.iter().position(|&y| y <= 0.0) {
            return Err(table.line_error(i, Error::Data(format!("cannot take the log of {}", response[i]))));
        }
        response.iter_mut().for_each(|y| *y = y.ln());
    }
    let design = build_design(&table, &b.design)?;
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by_key(|&i| subject[i]);
    Ok(Longitudinal {
        subject: order.iter().map(|&i| subject[i]).collect(),
        time: order.iter().map(|&i| time[i]).collect(),
        response: order.iter().map(|&i| response[i]).collect(),
        design: design.select_rows(&order),
    })
}

fn design_spec(design: &DesignMatrix, skip: &[&str]) -> DesignSpec {
    let names = design.column_names();
    DesignSpec {
        covariates: names.iter().filter(|n| *n != INTERCEPT && !skip.contains(&n.as_str())).cloned().collect(),
        intercept: names.first().is_some_and(|n| n == INTERCEPT),
        ..DesignSpec::default()
    }
}

/// Adds the non-intercept columns of `design` not already present.
fn push_columns(headers: &mut Vec<String>, columns: &mut Vec<Vec<f64>>, design: &DesignMatrix, skip: &[&str]) {
    for (j, name) in design.column_names().iter().enumerate() {
        if name == INTERCEPT || skip.contains(&name.as_str()) || headers.contains(name) {
            continue;
        }
        headers.push(name.clone());
        columns.push(design.column(j));
    }
}

fn write_columns(path: &Path, headers: &[String], columns: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(headers)?;
    let n = columns.first().map_or(0, Vec::len);
    for i in 0..n {
        w.write_record(columns.iter().map(|c| c[i].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `data` as `<stem>.csv` (plus `<stem>_long.csv` for joint data) in
/// `dir` and returns bindings that read it back.
pub fn write_dataset(data: &SurvivalDataset, family: Family, dir: &Path, stem: &str) -> Result<(PathBuf, Bindings)> {
    fs::create_dir_all(dir)?;
    let file = PathBuf::from(format!("{stem}.csv"));
    let n = data.len();
    let mut headers = vec!["id".to_string()];
    let mut columns = vec![data.observations.iter().map(|o| o.subject_id as f64).collect::<Vec<_>>()];
    let mut bindings = Bindings { id: Some("id".into()), ..Bindings::default() };
    match &data.extras {
        DatasetExtras::IllnessDeath(recs) => {
            let cols = IllnessDeathColumns::default();
            headers.extend([&cols.times1, &cols.delta, &cols.times2, &cols.time, &cols.status].map(String::clone));
            columns.push(recs.iter().map(|r| r.t1).collect());
            columns.push(recs.iter().map(|r| f64::from(u8::from(r.events[0]))).collect());
            columns.push(recs.iter().map(|r| if r.events[0] { r.t3 } else { 0.0 }).collect());
            columns.push(recs.iter().map(|r| r.t2).collect());
            columns.push(recs.iter().map(|r| f64::from(u8::from(r.events[1] || r.events[2]))).collect());
            bindings.illness_death = Some(cols);
        }
        _ => {
            headers.extend(["time".to_string(), "event".to_string()]);
            columns.push(data.observations.iter().map(|o| o.observed_time().unwrap_or(o.max_time())).collect());
            columns.push(
                data.observations
                    .iter()
                    .map(|o| match (family, o.is_event()) {
                        (Family::CompetingRisks, true) => f64::from(o.event_label.unwrap_or(1)),
                        (_, e) => f64::from(u8::from(e)),
                    })
                    .collect(),
            );
            bindings.time = Some("time".into());
            bindings.event = Some("event".into());
        }
    }
    if let DatasetExtras::Frailty { groups, .. } = &data.extras {
        headers.push("group".into());
        columns.push(groups.iter().map(|&g| (g + 1) as f64).collect());
        bindings.group = Some("group".into());
    }
    push_columns(&mut headers, &mut columns, &data.design, &[]);
    bindings.design = design_spec(&data.design, &[]);
    if let DatasetExtras::Cure { incidence } = &data.extras {
        push_columns(&mut headers, &mut columns, incidence, &[]);
        bindings.incidence = Some(design_spec(incidence, &[]));
    }
    debug_assert!(columns.iter().all(|c| c.len() == n));
    write_columns(&dir.join(&file), &headers, &columns)?;
    if let DatasetExtras::Joint(long) = &data.extras {
        let long_file = PathBuf::from(format!("{stem}_long.csv"));
        let mut lh = vec!["id".to_string(), "time".to_string(), "y".to_string()];
        let mut lc = vec![
            long.subject.iter().map(|&s| data.observations[s].subject_id as f64).collect(),
            long.time.clone(),
            long.response.clone(),
        ];
        push_columns(&mut lh, &mut lc, &long.design, &["time"]);
        write_columns(&dir.join(&long_file), &lh, &lc)?;
        bindings.longitudinal = Some(LongitudinalBindings {
            path: long_file,
            id: "id".into(),
            time: "time".into(),
            response: "y".into(),
            transform: ResponseTransform::Identity,
            design: design_spec(&long.design, &[]),
        });
    }
    Ok((file, bindings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> Result<Table> {
        Table::parse(text, Path::new("test.csv"))
    }

    fn aft_bindings() -> Bindings {
        Bindings {
            time: Some("time".into()),
            event: Some("delta".into()),
            design: DesignSpec {
                covariates: vec!["stage".into(), "age".into()],
                factors: [("stage".to_string(), "1".to_string())].into(),
                standardize: vec!["age".into()],
                intercept: true,
            },
            ..Bindings::default()
        }
    }

    const SMALL: &str =
        "\"\",stage,time,age,delta\n\"1\",1,0.6,77,1\n\"2\",3,1.3,53,0\n\"3\",2,2.4,45,1\n\"4\",3,3.2,65,1\n";

    #[test]
    fn indicators_and_factors() {
        let ds = dataset_from_table(&table(SMALL).unwrap(), Family::Aft, &aft_bindings()).unwrap();
        assert_eq!(ds.observations[0].censoring, crate::survival::Censoring::Exact(0.6));
        assert_eq!(ds.observations[1].censoring, crate::survival::Censoring::Right(1.3));
        assert_eq!(ds.design.column_names(), ["(Intercept)", "stage2", "stage3", "age"]);
        assert_eq!(&ds.design.row(1)[..3], &[1.0, 0.0, 1.0]);
        let age = ds.design.column(3);
        let mean: f64 = age.iter().sum::<f64>() / 4.0;
        let var: f64 = age.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ingestion_errors() {
        assert!(matches!(table(""), Err(Error::Data(_))));
        assert!(matches!(table("time,delta\n"), Err(Error::Data(_))));
        let t = table("time,delta,stage,age\n-1,1,1,3\n").unwrap();
        let err = dataset_from_table(&t, Family::Aft, &aft_bindings()).unwrap_err();
        assert!(err.to_string().contains("negative"), "{err}");
        let t = table("time,delta,stage,age\n1,1,1,old\n").unwrap();
        let err = dataset_from_table(&t, Family::Aft, &aft_bindings()).unwrap_err();
        assert!(err.to_string().contains("test.csv:2"), "{err}");
        let t = table("time,stage,age\n1,1,3\n").unwrap();
        let err = dataset_from_table(&t, Family::Aft, &aft_bindings()).unwrap_err();
        assert!(err.to_string().contains("missing column `delta`"), "{err}");
    }

    #[test]
    fn numeric_levels_sort_numerically() {
        let cells: Vec<String> = ["10", "2", "1"].iter().map(|s| s.to_string()).collect();
        assert_eq!(levels(&cells), ["1", "2", "10"]);
    }
}
