//! Scenario file parsing and resolution against command-line overrides.
//!
//! A scenario is JSON with exactly one of:
//!
//! * `form`: a raw quadratic form with complex entries as `[re, im]` pairs —
//!   `{"form": {"A": [[..]], "L": [[..]], "v_bar": [..]}}`
//! * `mrc`: a receiver scenario —
//!   `{"mrc": {"P": 2, "k": [1.0, 0.5], "rho": 0.5, "M": 16,
//!     "gamma_th_db": 0.0, "gamma_bar_db": [0.0, 20.0, 2.0]}}`
//!
//! plus optional `m` | `mse_target`, `precision_bits`, and `seed`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Deserialize;

use cgqf_core::mrc::{CovarianceConvention, ShapeSelection};
use cgqf_core::{MrcScenario, QuadraticForm, DEFAULT_PRECISION_BITS};

use crate::{CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub form: Option<FormSpec>,
    pub mrc: Option<MrcSpec>,
    pub m: Option<u32>,
    pub mse_target: Option<f64>,
    pub precision_bits: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "L")]
    pub l: Vec<Vec<[f64; 2]>>,
    pub v_bar: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MrcSpec {
    #[serde(rename = "P")]
    pub p: usize,
    pub k: Vec<f64>,
    pub rho: f64,
    #[serde(rename = "M")]
    pub m_qam: u32,
    pub gamma_th_db: f64,
    /// [lo, hi, step] in dB, inclusive sweep.
    pub gamma_bar_db: [f64; 3],
}

/// Fully resolved run settings (file values overridden by flags).
#[derive(Debug, Clone)]
pub struct Resolved {
    pub shape: ShapeSelection,
    pub precision_bits: usize,
    pub seed: u64,
    pub covariance: CovarianceConvention,
}

pub fn load(path: &std::path::Path) -> CliResult<ScenarioFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    let sc: ScenarioFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    match (&sc.form, &sc.mrc) {
        (Some(_), Some(_)) => {
            return Err(CliError::Parse("exactly one of 'form'/'mrc' allowed, got both".into()))
        }
        (None, None) => {
            return Err(CliError::Parse("scenario needs a 'form' or 'mrc' section".into()))
        }
        _ => {}
    }
    if sc.m.is_some() && sc.mse_target.is_some() {
        return Err(CliError::Parse("'m' and 'mse_target' are mutually exclusive".into()));
    }
    Ok(sc)
}

pub fn resolve(
    file: &ScenarioFile,
    m_flag: Option<u32>,
    mse_target_flag: Option<f64>,
    precision_flag: Option<usize>,
    seed_flag: Option<u64>,
    covariance: CovarianceConvention,
) -> CliResult<Resolved> {
    if m_flag.is_some() && mse_target_flag.is_some() {
        return Err(CliError::Parse("--m and --mse-target are mutually exclusive".into()));
    }
    let shape = match (m_flag.or(file.m), mse_target_flag.or(file.mse_target)) {
        (Some(m), _) if m >= 1 => ShapeSelection::Fixed(m),
        (Some(_), _) => return Err(CliError::Parse("m must be >= 1".into())),
        (None, Some(t)) if t > 0.0 => ShapeSelection::Auto { target_nmse: t, m_max: 1_000_000 },
        (None, Some(t)) => {
            return Err(CliError::Parse(format!("mse_target must be positive, got {t}")))
        }
        (None, None) => ShapeSelection::Auto { target_nmse: 1e-2, m_max: 1_000_000 },
    };
    Ok(Resolved {
        shape,
        precision_bits: precision_flag
            .or(file.precision_bits)
            .unwrap_or(DEFAULT_PRECISION_BITS),
        seed: seed_flag.or(file.seed).unwrap_or(1),
        covariance,
    })
}

fn complex_matrix(raw: &[Vec<[f64; 2]>], name: &str) -> CliResult<DMatrix<Complex64>> {
    let n = raw.len();
    if n == 0 || raw.iter().any(|row| row.len() != n) {
        return Err(CliError::Parse(format!("{name} must be a non-empty square matrix")));
    }
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in raw.iter().enumerate() {
        for (j, &[re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(CliError::Parse(format!("{name}[{i}][{j}] is not finite")));
            }
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(m)
}

impl FormSpec {
    pub fn build(&self) -> CliResult<QuadraticForm> {
        let a = complex_matrix(&self.a, "A")?;
        let l = complex_matrix(&self.l, "L")?;
        if self.v_bar.len() != a.nrows() {
            return Err(CliError::Parse(format!(
                "v_bar has length {}, expected {}",
                self.v_bar.len(),
                a.nrows()
            )));
        }
        let v = DVector::from_iterator(
            self.v_bar.len(),
            self.v_bar.iter().map(|&[re, im]| Complex64::new(re, im)),
        );
        QuadraticForm::new(a, l, v).map_err(CliError::from_structural)
    }
}

impl MrcSpec {
    pub fn build(&self, resolved: &Resolved) -> CliResult<MrcScenario> {
        let mut sc = MrcScenario::new(self.p, self.k.clone(), self.rho, self.m_qam)
            .map_err(CliError::from_structural)?
            .with_shape(resolved.shape)
            .with_covariance(resolved.covariance)
            .with_precision(resolved.precision_bits);
        sc.gamma_th = db_to_linear(self.gamma_th_db);
        sc.gamma_bar_grid = self.grid_linear()?;
        Ok(sc)
    }

    pub fn grid_db(&self) -> CliResult<Vec<f64>> {
        let [lo, hi, step] = self.gamma_bar_db;
        if !(step > 0.0) || hi < lo {
            return Err(CliError::Parse(format!(
                "gamma_bar_db must be [lo, hi, step] with step > 0, got [{lo}, {hi}, {step}]"
            )));
        }
        let mut out = Vec::new();
        let n = ((hi - lo) / step).round() as usize;
        for i in 0..=n {
            let v = lo + step * i as f64;
            if v <= hi + 1e-9 {
                out.push(v);
            }
        }
        Ok(out)
    }

    pub fn grid_linear(&self) -> CliResult<Vec<f64>> {
        Ok(self.grid_db()?.into_iter().map(db_to_linear).collect())
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Parse a `lo:hi:npts` grid specification.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Parse(format!("grid '{spec}' is not lo:hi:npts")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::Parse(format!("grid lo '{}' is not a number", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Parse(format!("grid hi '{}' is not a number", parts[1])))?;
    let n: usize = parts[2]
        .parse()
        .map_err(|_| CliError::Parse(format!("grid npts '{}' is not an integer", parts[2])))?;
    if n < 2 || hi <= lo {
        return Err(CliError::Parse(format!("grid '{spec}' must have hi > lo and npts >= 2")));
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}
