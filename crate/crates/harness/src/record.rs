//! Result rows and their serialization.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::OutputFormat;
use crate::error::Result;

/// Tag for rows whose quantity has no closed-form limit.
pub const NO_LIMIT: &str = "no-limit-prediction";

/// Documented CSV column order; the first fourteen columns are fixed, the
/// last three are extensions.
pub const COLUMNS: [&str; 17] = [
    "experiment",
    "n",
    "beta",
    "sigma1",
    "sigma2",
    "alpha",
    "u",
    "gamma",
    "q",
    "estimate",
    "se",
    "theory",
    "seed",
    "wallclockMs",
    "roundedAlpha",
    "metric",
    "theoryTag",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResultRecord {
    pub experiment: String,
    pub n: Option<u64>,
    pub beta: Option<f64>,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub alpha: Option<f64>,
    pub u: Option<f64>,
    pub gamma: Option<f64>,
    pub q: Option<f64>,
    pub estimate: f64,
    pub se: Option<f64>,
    pub theory: Option<f64>,
    pub seed: u64,
    pub wallclock_ms: f64,
    pub rounded_alpha: Option<f64>,
    pub metric: String,
    pub theory_tag: String,
}

impl ResultRecord {
    pub fn new(experiment: &str, metric: impl Into<String>, seed: u64) -> Self {
        Self {
            experiment: experiment.to_owned(),
            n: None,
            beta: None,
            sigma1: None,
            sigma2: None,
            alpha: None,
            u: None,
            gamma: None,
            q: None,
            estimate: f64::NAN,
            se: None,
            theory: None,
            seed,
            wallclock_ms: 0.0,
            rounded_alpha: None,
            metric: metric.into(),
            theory_tag: NO_LIMIT.to_owned(),
        }
    }

    pub fn n(mut self, n: usize) -> Self {
        self.n = Some(n as u64);
        self
    }

    pub fn beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn sigmas(mut self, sigma1: f64, sigma2: f64) -> Self {
        self.sigma1 = Some(sigma1);
        self.sigma2 = Some(sigma2);
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn rounded_alpha(mut self, alpha: f64) -> Self {
        self.rounded_alpha = Some(alpha);
        self
    }

    pub fn u(mut self, u: f64) -> Self {
        self.u = Some(u);
        self
    }

    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn q(mut self, q: f64) -> Self {
        self.q = Some(q);
        self
    }

    pub fn estimate(mut self, e: logrem_core::Estimate) -> Self {
        self.estimate = e.mean;
        self.se = e.se.is_finite().then_some(e.se);
        self
    }

    pub fn value(mut self, v: f64) -> Self {
        self.estimate = v;
        self.se = Some(0.0);
        self
    }

    pub fn theory(mut self, kind: logrem_core::theory::PredictionKind, value: f64) -> Self {
        self.theory = Some(value);
        self.theory_tag = kind.tag().to_owned();
        self
    }

    pub fn theory_opt(self, kind: logrem_core::theory::PredictionKind, value: Option<f64>) -> Self {
        match value {
            Some(v) => self.theory(kind, v),
            None => self,
        }
    }
}

/// Shortest round-trip form, with an exponent for very small or large values.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn field(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), num)
}

fn row(r: &ResultRecord) -> [String; 17] {
    [
        r.experiment.clone(),
        r.n.map_or_else(|| "NA".to_owned(), |n| n.to_string()),
        field(r.beta),
        field(r.sigma1),
        field(r.sigma2),
        field(r.alpha),
        field(r.u),
        field(r.gamma),
        field(r.q),
        num(r.estimate),
        field(r.se),
        field(r.theory),
        r.seed.to_string(),
        num(r.wallclock_ms),
        field(r.rounded_alpha),
        r.metric.clone(),
        r.theory_tag.clone(),
    ]
}

pub fn write_csv<W: Write>(records: &[ResultRecord], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(COLUMNS)?;
    for r in records {
        w.write_record(row(r))?;
    }
    w.flush()?;
    Ok(())
}

fn parse_opt(s: &str) -> std::result::Result<Option<f64>, String> {
    if s == "NA" {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|e| format!("{s}: {e}"))
    }
}

/// Inverse of [`write_csv`].
pub fn read_csv<R: io::Read>(source: R) -> std::result::Result<Vec<ResultRecord>, String> {
    let mut reader = csv::Reader::from_reader(source);
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(format!("unexpected header {header:?}"));
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(|e| e.to_string())?;
            let num = |i: usize| parse_opt(&rec[i]);
            let int = |i: usize| -> std::result::Result<u64, String> { rec[i].parse().map_err(|e| format!("{e}")) };
            Ok(ResultRecord {
                experiment: rec[0].to_owned(),
                n: if &rec[1] == "NA" { None } else { Some(int(1)?) },
                beta: num(2)?,
                sigma1: num(3)?,
                sigma2: num(4)?,
                alpha: num(5)?,
                u: num(6)?,
                gamma: num(7)?,
                q: num(8)?,
                estimate: num(9)?.unwrap_or(f64::NAN),
                se: num(10)?,
                theory: num(11)?,
                seed: int(12)?,
                wallclock_ms: num(13)?.unwrap_or(0.0),
                rounded_alpha: num(14)?,
                metric: rec[15].to_owned(),
                theory_tag: rec[16].to_owned(),
            })
        })
        .collect()
}

/// Records as a JSON array; non-finite estimates become `null`.
pub fn write_json<W: Write>(records: &[ResultRecord], mut sink: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut sink, records)?;
    writeln!(sink)?;
    Ok(())
}

/// One plot point: abscissa, value, error bar, theory.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub yerr: Option<f64>,
    pub theory: Option<f64>,
}

/// Abscissa for a record: the varied parameter of its experiment.
fn plot_point(r: &ResultRecord) -> Option<PlotPoint> {
    let (x, fixed) = match r.experiment.as_str() {
        "overlap-cdf" if r.q.is_some() => (r.q?, format!("n={}", r.n?)),
        "high-points" => (r.gamma?, format!("n={}", r.n?)),
        "slepian-check" if r.gamma.is_some() => (r.gamma?, format!("n={}", r.n?)),
        "pd-moments" => (r.alpha?, String::new()),
        _ => (r.n? as f64, String::new()),
    };
    let beta = r.beta.map(|b| format!("beta={b}")).unwrap_or_default();
    let series = [r.metric.as_str(), fixed.as_str(), beta.as_str()]
        .iter()
        .filter(|s| !s.is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join(";");
    Some(PlotPoint {
        series,
        x,
        y: r.estimate,
        yerr: r.se,
        theory: r.theory,
    })
}

pub fn write_plot<W: Write>(records: &[ResultRecord], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["series", "x", "y", "yerr", "theory"])?;
    for p in records
        .iter()
        .filter(|r| !r.metric.starts_with("trend-verdict"))
        .filter_map(plot_point)
    {
        w.write_record([p.series, num(p.x), num(p.y), field(p.yerr), field(p.theory)])?;
    }
    w.flush()?;
    Ok(())
}

/// Location of the plot file that accompanies `path`.
pub fn plot_path(path: &Path, experiment: &str) -> PathBuf {
    path.parent()
        .unwrap_or(Path::new(""))
        .join(format!("{experiment}.plot.csv"))
}

/// Writes the records to `path`, or stdout when `path` is empty, plus the
/// plot file beside a file output.
pub fn emit(records: &[ResultRecord], format: OutputFormat, path: &str, experiment: &str) -> Result<()> {
    let write = |sink: &mut dyn Write| match format {
        OutputFormat::Csv => write_csv(records, sink),
        OutputFormat::Json => write_json(records, sink),
    };
    if path.is_empty() {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        write(&mut lock)?;
        return Ok(());
    }
    let path = Path::new(path);
    write(&mut File::create(path)?)?;
    write_plot(records, File::create(plot_path(path, experiment))?)?;
    Ok(())
}
