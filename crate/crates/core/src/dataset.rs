//! Input model and learning sample.
//!
//! Variables carry a role (scenario inputs to penalize, uncertain candidates,
//! or fixed settings) and an independent marginal distribution. Samples are
//! stored raw, in input units; consumers standardize internally.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    /// Scenario input whose penalizing value is sought.
    Penalize,
    /// Uncertain input subject to screening.
    Candidate,
    /// Held constant in the study; excluded from screening.
    Fixed,
}

/// Marginal law of one input. Log-normal parameters are those of the
/// underlying normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Distribution {
    Uniform {
        lower: f64,
        upper: f64,
    },
    LogUniform {
        lower: f64,
        upper: f64,
    },
    Normal {
        mean: f64,
        std: f64,
    },
    LogNormal {
        mean_log: f64,
        std_log: f64,
    },
    TruncatedNormal {
        mean: f64,
        std: f64,
        lower: f64,
        upper: f64,
    },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        match *self {
            Distribution::Uniform { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    return bad(format!("uniform requires lower < upper, got [{lower}, {upper}]"));
                }
            }
            Distribution::LogUniform { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    return bad(format!("log-uniform requires lower < upper, got [{lower}, {upper}]"));
                }
                if lower <= 0.0 {
                    return bad(format!("log-uniform requires lower > 0, got {lower}"));
                }
            }
            Distribution::Normal { mean, std } => {
                if !(mean.is_finite() && std.is_finite() && std > 0.0) {
                    return bad(format!("normal requires std > 0, got {std}"));
                }
            }
            Distribution::LogNormal { mean_log, std_log } => {
                if !(mean_log.is_finite() && std_log.is_finite() && std_log > 0.0) {
                    return bad(format!("log-normal requires std_log > 0, got {std_log}"));
                }
            }
            Distribution::TruncatedNormal {
                mean,
                std,
                lower,
                upper,
            } => {
                if !(mean.is_finite() && std.is_finite() && std > 0.0) {
                    return bad(format!("truncated-normal requires std > 0, got {std}"));
                }
                if !(lower < upper) || lower.is_nan() || upper.is_nan() {
                    return bad(format!(
                        "truncated-normal requires lower < upper, got [{lower}, {upper}]"
                    ));
                }
                if self.truncated_mass() <= 0.0 {
                    return bad("truncated-normal interval carries no probability mass".into());
                }
            }
        }
        Ok(())
    }

    fn truncated_mass(&self) -> f64 {
        match *self {
            Distribution::TruncatedNormal {
                mean,
                std,
                lower,
                upper,
            } => {
                let n = std_normal();
                n.cdf((upper - mean) / std) - n.cdf((lower - mean) / std)
            }
            _ => 1.0,
        }
    }

    /// Closed support interval (infinite ends for unbounded families).
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Distribution::Uniform { lower, upper }
            | Distribution::LogUniform { lower, upper }
            | Distribution::TruncatedNormal { lower, upper, .. } => (lower, upper),
            Distribution::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Distribution::LogNormal { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn is_bounded(&self) -> bool {
        let (a, b) = self.support();
        a.is_finite() && b.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        let (a, b) = self.support();
        match self {
            Distribution::LogNormal { .. } => x > 0.0 && x.is_finite(),
            _ => x >= a && x <= b,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let n = std_normal();
        match *self {
            Distribution::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
            Distribution::LogUniform { lower, upper } => {
                if x <= lower {
                    0.0
                } else {
                    ((x.ln() - lower.ln()) / (upper.ln() - lower.ln())).min(1.0)
                }
            }
            Distribution::Normal { mean, std } => n.cdf((x - mean) / std),
            Distribution::LogNormal { mean_log, std_log } => {
                if x <= 0.0 {
                    0.0
                } else {
                    n.cdf((x.ln() - mean_log) / std_log)
                }
            }
            Distribution::TruncatedNormal {
                mean,
                std,
                lower,
                upper,
            } => {
                if x <= lower {
                    0.0
                } else if x >= upper {
                    1.0
                } else {
                    let lo = n.cdf((lower - mean) / std);
                    (n.cdf((x - mean) / std) - lo) / self.truncated_mass()
                }
            }
        }
    }

    /// Inverse CDF for `u` in (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        let n = std_normal();
        match *self {
            Distribution::Uniform { lower, upper } => lower + u * (upper - lower),
            Distribution::LogUniform { lower, upper } => (lower.ln() + u * (upper.ln() - lower.ln())).exp(),
            Distribution::Normal { mean, std } => mean + std * n.inverse_cdf(u),
            Distribution::LogNormal { mean_log, std_log } => (mean_log + std_log * n.inverse_cdf(u)).exp(),
            Distribution::TruncatedNormal {
                mean,
                std,
                lower,
                upper,
            } => {
                let lo = n.cdf((lower - mean) / std);
                let hi = n.cdf((upper - mean) / std);
                let z = n.inverse_cdf(lo + u * (hi - lo));
                (mean + std * z).clamp(lower, upper)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Uniform { lower, upper } => lower + rng.random::<f64>() * (upper - lower),
            Distribution::Normal { mean, std } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + std * z
            }
            Distribution::LogNormal { mean_log, std_log } => {
                let z: f64 = rng.sample(StandardNormal);
                (mean_log + std_log * z).exp()
            }
            Distribution::LogUniform { .. } | Distribution::TruncatedNormal { .. } => {
                // open interval keeps the inverse CDF finite
                let u = loop {
                    let u: f64 = rng.random();
                    if u > 0.0 {
                        break u;
                    }
                };
                self.quantile(u)
            }
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Uniform { lower, upper } => write!(f, "uniform[{lower}, {upper}]"),
            Distribution::LogUniform { lower, upper } => write!(f, "log-uniform[{lower}, {upper}]"),
            Distribution::Normal { mean, std } => write!(f, "normal({mean}, {std})"),
            Distribution::LogNormal { mean_log, std_log } => {
                write!(f, "log-normal({mean_log}, {std_log})")
            }
            Distribution::TruncatedNormal {
                mean,
                std,
                lower,
                upper,
            } => write!(f, "truncated-normal({mean}, {std})[{lower}, {upper}]"),
        }
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    #[serde(default)]
    pub index: usize,
    pub role: Role,
    pub distribution: Distribution,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, index: usize, role: Role, distribution: Distribution) -> Self {
        Self {
            name: name.into(),
            index,
            role,
            distribution,
        }
    }
}

/// Checks name uniqueness, contiguous indices and distribution parameters.
pub fn validate_schema(specs: &[VariableSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::InvalidSchema("at least one variable is required".into()));
    }
    let mut names = HashSet::new();
    for (pos, spec) in specs.iter().enumerate() {
        if spec.name.is_empty() {
            return Err(Error::InvalidSchema(format!("variable {pos} has an empty name")));
        }
        if !names.insert(spec.name.as_str()) {
            return Err(Error::InvalidSchema(format!("duplicate variable name `{}`", spec.name)));
        }
        if spec.index != pos {
            return Err(Error::InvalidSchema(format!(
                "variable `{}` has index {} but sits at position {pos}",
                spec.name, spec.index
            )));
        }
        spec.distribution
            .validate()
            .map_err(|e| Error::InvalidSchema(format!("variable `{}`: {e}", spec.name)))?;
    }
    Ok(())
}

/// Indices of the variables with the given role, in schema order.
pub fn indices_with_role(specs: &[VariableSpec], role: Role) -> Vec<usize> {
    specs.iter().filter(|s| s.role == role).map(|s| s.index).collect()
}

/// `n` runs of the simulator: an n×d design plus the scalar output.
#[derive(Debug, Clone)]
pub struct LearningSample {
    design: DMatrix<f64>,
    output: Vec<f64>,
    variables: Vec<VariableSpec>,
    output_name: String,
}

impl LearningSample {
    pub fn new(
        design: DMatrix<f64>,
        output: Vec<f64>,
        variables: Vec<VariableSpec>,
        output_name: impl Into<String>,
    ) -> Result<Self> {
        validate_schema(&variables)?;
        let (n, d) = design.shape();
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "a learning sample needs at least 2 rows, got {n}"
            )));
        }
        if d != variables.len() {
            return Err(Error::LengthMismatch {
                expected: variables.len(),
                got: d,
            });
        }
        if output.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: output.len(),
            });
        }
        let output_name = output_name.into();
        for (row, y) in output.iter().enumerate() {
            if !y.is_finite() {
                return Err(Error::MissingValue {
                    row: row + 1,
                    column: output_name.clone(),
                });
            }
        }
        for (col, spec) in variables.iter().enumerate() {
            for row in 0..n {
                let v = design[(row, col)];
                if !v.is_finite() {
                    return Err(Error::MissingValue {
                        row: row + 1,
                        column: spec.name.clone(),
                    });
                }
                if !spec.distribution.contains(v) {
                    return Err(Error::OutOfSupport {
                        row: row + 1,
                        column: spec.name.clone(),
                        value: v,
                        support: spec.distribution.to_string(),
                    });
                }
            }
        }
        Ok(Self {
            design,
            output,
            variables,
            output_name,
        })
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn d(&self) -> usize {
        self.design.ncols()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn output_name(&self) -> &str {
        &self.output_name
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.design.column(j).iter().copied().collect()
    }

    /// Design restricted to `columns`, in that order.
    pub fn select_columns(&self, columns: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), columns.len(), |i, k| self.design[(i, columns[k])])
    }

    /// Sub-sample on the given rows (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> LearningSample {
        let design = DMatrix::from_fn(rows.len(), self.d(), |i, j| self.design[(rows[i], j)]);
        let output = rows.iter().map(|&r| self.output[r]).collect();
        LearningSample {
            design,
            output,
            variables: self.variables.clone(),
            output_name: self.output_name.clone(),
        }
    }

    pub fn penalize_indices(&self) -> Vec<usize> {
        indices_with_role(&self.variables, Role::Penalize)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }
}

/// Critical output value: the empirical quantile at `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub level: f64,
    pub value: f64,
}

impl Threshold {
    pub fn from_sample(output: &[f64], level: f64) -> Result<Self> {
        Ok(Self {
            level,
            value: empirical_quantile(output, level)?,
        })
    }
}

/// Upper empirical quantile: the order statistic of rank ceil(level·n).
pub fn empirical_quantile(values: &[f64], level: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("quantile of an empty vector".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile level must lie in (0, 1), got {level}"
        )));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("quantile of a vector containing NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    // guard against 0.9*10 = 9.000000000000002
    let raw = level * n as f64;
    let rank = if (raw - raw.round()).abs() < 1e-9 * raw.max(1.0) {
        raw.round()
    } else {
        raw.ceil()
    };
    let rank = (rank as usize).clamp(1, n);
    Ok(sorted[rank - 1])
}

/// `count` independent draws from each marginal, one column per spec.
pub fn sample_inputs(specs: &[VariableSpec], count: usize, seed: u64) -> Result<DMatrix<f64>> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    for spec in specs {
        spec.distribution
            .validate()
            .map_err(|e| Error::InvalidDistribution(format!("`{}`: {e}", spec.name)))?;
    }
    let mut rng = rng_from_seed(seed);
    let mut out = DMatrix::zeros(count, specs.len());
    for (j, spec) in specs.iter().enumerate() {
        for i in 0..count {
            out[(i, j)] = spec.distribution.sample(&mut rng);
        }
    }
    Ok(out)
}

/// Reads a learning sample from CSV. Columns are matched to the schema by
/// header name; the output column is located by `output_column`.
pub fn load_sample(path: impl AsRef<Path>, schema: &[VariableSpec], output_column: &str) -> Result<LearningSample> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_sample(&text, schema, output_column)
}

pub fn parse_sample(text: &str, schema: &[VariableSpec], output_column: &str) -> Result<LearningSample> {
    validate_schema(schema)?;
    if text.trim().is_empty() {
        return Err(Error::Parse {
            row: 0,
            column: String::new(),
            message: "file is empty".into(),
        });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            column: String::new(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();

    let mut position: HashMap<&str, usize> = HashMap::new();
    for (k, name) in header.iter().enumerate() {
        if position.insert(name.as_str(), k).is_some() {
            return Err(Error::HeaderMismatch(format!("duplicate column `{name}`")));
        }
    }
    let output_pos = *position
        .get(output_column)
        .ok_or_else(|| Error::HeaderMismatch(format!("output column `{output_column}` not found")))?;
    let mut input_pos = Vec::with_capacity(schema.len());
    for spec in schema {
        let k = position
            .get(spec.name.as_str())
            .ok_or_else(|| Error::HeaderMismatch(format!("input column `{}` not found", spec.name)))?;
        input_pos.push(*k);
    }
    if header.len() != schema.len() + 1 {
        let known: HashSet<&str> = schema
            .iter()
            .map(|s| s.name.as_str())
            .chain(std::iter::once(output_column))
            .collect();
        let extra: Vec<&str> = header
            .iter()
            .map(String::as_str)
            .filter(|h| !known.contains(h))
            .collect();
        return Err(Error::HeaderMismatch(format!(
            "unexpected columns: {}",
            extra.join(", ")
        )));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut output = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let field = |k: usize| -> Result<f64> {
            let raw = record.get(k).unwrap_or("");
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
                return Err(Error::MissingValue {
                    row,
                    column: header[k].clone(),
                });
            }
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                column: header[k].clone(),
                message: format!("`{raw}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: header[k].clone(),
                    message: format!("`{raw}` is not finite"),
                });
            }
            Ok(v)
        };
        let mut values = Vec::with_capacity(schema.len());
        for (spec, &k) in schema.iter().zip(&input_pos) {
            let v = field(k)?;
            if !spec.distribution.contains(v) {
                return Err(Error::OutOfSupport {
                    row,
                    column: spec.name.clone(),
                    value: v,
                    support: spec.distribution.to_string(),
                });
            }
            values.push(v);
        }
        output.push(field(output_pos)?);
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            row: 0,
            column: String::new(),
            message: "no data rows".into(),
        });
    }
    let design = DMatrix::from_fn(rows.len(), schema.len(), |i, j| rows[i][j]);
    LearningSample::new(design, output, schema.to_vec(), output_column)
}

/// Serializes with shortest round-trip float formatting, so reloading
/// reproduces every value bit for bit.
pub fn sample_to_csv(sample: &LearningSample) -> String {
    let mut out = String::new();
    for v in sample.variables() {
        out.push_str(&v.name);
        out.push(',');
    }
    out.push_str(sample.output_name());
    out.push('\n');
    for i in 0..sample.n() {
        for j in 0..sample.d() {
            out.push_str(&format!("{}", sample.design()[(i, j)]));
            out.push(',');
        }
        out.push_str(&format!("{}\n", sample.output()[i]));
    }
    out
}

pub fn write_sample(path: impl AsRef<Path>, sample: &LearningSample) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, sample_to_csv(sample)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(name: &str, index: usize) -> VariableSpec {
        VariableSpec::new(
            name,
            index,
            Role::Candidate,
            Distribution::Uniform { lower: 0.0, upper: 1.0 },
        )
    }

    #[test]
    fn loads_small_file() {
        let schema = vec![unit("x1", 0), unit("x2", 1)];
        let s = parse_sample("x1,x2,y\n0.1,0.2,3\n0.3,0.4,5\n0.5,0.6,7\n", &schema, "y").unwrap();
        assert_eq!((s.n(), s.d()), (3, 2));
        assert_eq!(s.output(), &[3.0, 5.0, 7.0]);
        assert_eq!(s.design()[(2, 1)], 0.6);
    }

    #[test]
    fn columns_matched_by_name() {
        let schema = vec![unit("x1", 0), unit("x2", 1)];
        let s = parse_sample("y,x2,x1\n1,0.2,0.1\n2,0.4,0.3\n", &schema, "y").unwrap();
        assert_eq!(s.column(0), vec![0.1, 0.3]);
        assert_eq!(s.output(), &[1.0, 2.0]);
    }

    #[test]
    fn out_of_support_names_row_and_column() {
        let schema = vec![unit("x1", 0), unit("x2", 1)];
        let err = parse_sample("x1,x2,y\n0.1,0.2,1\n2.0,0.3,1\n", &schema, "y").unwrap_err();
        match err {
            Error::OutOfSupport { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "x1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        let schema = vec![unit("x1", 0)];
        assert!(matches!(parse_sample("", &schema, "y"), Err(Error::Parse { .. })));
        assert!(matches!(parse_sample("x1,y\n", &schema, "y"), Err(Error::Parse { .. })));
    }

    #[test]
    fn header_and_missing_value_diagnostics() {
        let schema = vec![unit("x1", 0), unit("x2", 1)];
        assert!(matches!(
            parse_sample("x1,x3,y\n0.1,0.2,1\n", &schema, "y"),
            Err(Error::HeaderMismatch(_))
        ));
        assert!(matches!(
            parse_sample("x1,x2,x3,y\n0.1,0.2,0.3,1\n", &schema, "y"),
            Err(Error::HeaderMismatch(_))
        ));
        match parse_sample("x1,x2,y\n0.1,,1\n0.1,0.2,1\n", &schema, "y") {
            Err(Error::MissingValue { row, column }) => {
                assert_eq!((row, column.as_str()), (1, "x2"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_sample("x1,x2,y\n0.1,abc,1\n0.1,0.2,1\n", &schema, "y"),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn schema_rules() {
        assert!(validate_schema(&[unit("a", 0), unit("a", 1)]).is_err());
        assert!(validate_schema(&[unit("a", 0), unit("b", 2)]).is_err());
        let bad = VariableSpec::new(
            "z",
            0,
            Role::Candidate,
            Distribution::LogUniform { lower: 0.0, upper: 1.0 },
        );
        assert!(validate_schema(&[bad]).is_err());
        assert!(Distribution::Uniform { lower: 1.0, upper: 1.0 }.validate().is_err());
        assert!(Distribution::Normal { mean: 0.0, std: 0.0 }.validate().is_err());
        assert!(Distribution::TruncatedNormal {
            mean: 0.0,
            std: 1.0,
            lower: 2.0,
            upper: 1.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn quantile_examples() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(empirical_quantile(&v, 0.9).unwrap(), 9.0);
        assert_eq!(empirical_quantile(&[5.0], 0.3).unwrap(), 5.0);
        assert_eq!(empirical_quantile(&[5.0], 0.99).unwrap(), 5.0);
        assert!(empirical_quantile(&[], 0.5).is_err());
        assert!(empirical_quantile(&v, 1.0).is_err());
        assert_eq!(empirical_quantile(&v, 0.91).unwrap(), 10.0);
        assert_eq!(empirical_quantile(&v, 0.05).unwrap(), 1.0);
    }

    #[test]
    fn quantile_of_normal_draws() {
        let spec = [VariableSpec::new(
            "z",
            0,
            Role::Candidate,
            Distribution::Normal { mean: 0.0, std: 1.0 },
        )];
        let m = sample_inputs(&spec, 10_000, 11).unwrap();
        let q = empirical_quantile(m.as_slice(), 0.9).unwrap();
        assert!((q - 1.281_551_565_5).abs() < 0.05, "q = {q}");
    }

    #[test]
    fn sampling_moments_and_determinism() {
        let specs = [
            unit("u", 0),
            VariableSpec::new(
                "lu",
                1,
                Role::Candidate,
                Distribution::LogUniform {
                    lower: 1.0,
                    upper: std::f64::consts::E,
                },
            ),
        ];
        let a = sample_inputs(&specs, 10_000, 5).unwrap();
        let b = sample_inputs(&specs, 10_000, 5).unwrap();
        assert_eq!(a, b);
        let mean_u = a.column(0).mean();
        assert!((mean_u - 0.5).abs() < 0.02);
        let mean_log = a.column(1).iter().map(|v| v.ln()).sum::<f64>() / 10_000.0;
        assert!((mean_log - 0.5).abs() < 0.02);
        assert!(sample_inputs(&specs, 0, 5).is_err());
    }

    fn ks_statistic(dist: &Distribution, draws: &[f64]) -> f64 {
        let mut v = draws.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        let n = v.len() as f64;
        v.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = dist.cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn every_family_passes_kolmogorov_smirnov() {
        let families = [
            Distribution::Uniform {
                lower: -2.0,
                upper: 3.0,
            },
            Distribution::LogUniform {
                lower: 0.1,
                upper: 10.0,
            },
            Distribution::Normal { mean: 1.0, std: 2.0 },
            Distribution::LogNormal {
                mean_log: 0.5,
                std_log: 0.4,
            },
            Distribution::TruncatedNormal {
                mean: 0.0,
                std: 1.0,
                lower: -0.5,
                upper: 2.0,
            },
        ];
        // asymptotic critical value at significance 0.001
        let critical = 1.9495 / (10_000f64).sqrt();
        for (k, dist) in families.iter().enumerate() {
            let spec = [VariableSpec::new("v", 0, Role::Candidate, *dist)];
            let draws = sample_inputs(&spec, 10_000, 100 + k as u64).unwrap();
            assert!(draws.iter().all(|&x| dist.contains(x)), "{dist}");
            let d = ks_statistic(dist, draws.as_slice());
            assert!(d < critical, "{dist}: D = {d}");
        }
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(rows in proptest::collection::vec((0.0f64..1.0, -1e6f64..1e6), 2..20)) {
            let schema = vec![unit("x", 0)];
            let design = DMatrix::from_fn(rows.len(), 1, |i, _| rows[i].0);
            let output: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let s = LearningSample::new(design, output, schema.clone(), "y").unwrap();
            let back = parse_sample(&sample_to_csv(&s), &schema, "y").unwrap();
            prop_assert_eq!(back.design(), s.design());
            prop_assert_eq!(back.output(), s.output());
        }

        #[test]
        fn quantile_monotone_and_shift_equivariant(
            v in proptest::collection::vec(-100.0f64..100.0, 1..50),
            p in 0.01f64..0.98,
            dp in 0.0f64..0.01,
            c in -50.0f64..50.0,
        ) {
            let q1 = empirical_quantile(&v, p).unwrap();
            let q2 = empirical_quantile(&v, p + dp).unwrap();
            prop_assert!(q1 <= q2);
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let qs = empirical_quantile(&shifted, p).unwrap();
            let mut sorted = shifted.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            // same order statistic, shifted
            let idx = v.iter().map(|x| x + c).position(|x| x == qs);
            prop_assert!(idx.is_some());
            prop_assert!((qs - (q1 + c)).abs() <= 1e-9 * (1.0 + q1.abs() + c.abs()));
        }
    }
}
