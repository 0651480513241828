//! Motif Embedding Correlation Field (MECF).
//!
//! A scalar series is delay-embedded (dimension `m`, delay `tau`), grouped
//! into motifs of `n` embedded rows spaced by a displacement `d`, and each
//! consecutive motif pair at lag `d` is scored with the 2D Pearson
//! correlation. The per-displacement correlation sequences are zero-padded
//! to a common length, stacked into G (one row per displacement), and
//! symmetrized as F = G + rot180(G).
//!
//! Index convention: the construction formulas are 1-based (series samples
//! x(1)..x(T), motif starts s = 1..); this module is 0-based throughout.
//! The mapping is uniform: sample x(t) is `x[t-1]`, embedded row t is
//! `rows[t-1]`, motif start s is `s-1`. Row lengths and counts are
//! unaffected.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default ceiling on the number of displacement rows. The full formula
/// value (~T/2) produces fields that dominate memory and runtime without
/// changing inter-field distances at desk scale.
pub const DEFAULT_DMAX_CEILING: usize = 64;

fn default_ceiling() -> usize {
    DEFAULT_DMAX_CEILING
}

/// Field construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MECFParams {
    /// Embedding dimension m >= 2.
    pub m: usize,
    /// Time delay in samples, tau >= 1.
    pub tau: usize,
    /// Motif length (rows per motif), n >= 2.
    pub n: usize,
    /// Fixed maximum displacement; `None` selects the formula value capped
    /// by pair feasibility and `d_max_ceiling`.
    #[serde(default)]
    pub d_max: Option<usize>,
    #[serde(default = "default_ceiling")]
    pub d_max_ceiling: usize,
}

impl Default for MECFParams {
    fn default() -> Self {
        Self {
            m: 3,
            tau: 2,
            n: 3,
            d_max: None,
            d_max_ceiling: DEFAULT_DMAX_CEILING,
        }
    }
}

impl MECFParams {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidParameter("embedding dimension m must be >= 2".into()));
        }
        if self.tau < 1 {
            return Err(Error::InvalidParameter("time delay tau must be >= 1".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter("motif length n must be >= 2".into()));
        }
        if self.d_max == Some(0) {
            return Err(Error::InvalidParameter("d_max must be >= 1".into()));
        }
        if self.d_max_ceiling == 0 {
            return Err(Error::InvalidParameter("d_max_ceiling must be >= 1".into()));
        }
        Ok(())
    }

    /// Displacement count actually used for a series of length `t`.
    pub fn effective_dmax(&self, t: usize) -> Result<usize> {
        self.validate()?;
        let info = compute_dmax(t, self.m, self.tau, self.n)?;
        match self.d_max {
            Some(d) => {
                if d > info.feasibility_cap {
                    Err(Error::InvalidParameter(format!(
                        "d_max {d} exceeds the pair-feasibility cap {} for T = {t}",
                        info.feasibility_cap
                    )))
                } else {
                    Ok(d)
                }
            }
            None => Ok(info.effective.min(self.d_max_ceiling)),
        }
    }
}

/// Delay-embedded series: row t = [x(t), x(t+tau), ..., x(t+(m-1)tau)].
#[derive(Debug, Clone)]
pub struct EmbeddedSeries {
    rows: Array2<f64>,
}

impl EmbeddedSeries {
    pub fn row_count(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }
}

/// Both readings of the maximum displacement for a series of length T.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DmaxInfo {
    /// 1 + floor((T - (m-1)tau - (n+1)) / (n-1)).
    pub formula: usize,
    /// Largest d with at least one motif pair: floor((R-1)/n), R = T-(m-1)tau.
    pub feasibility_cap: usize,
    /// min(formula, feasibility_cap).
    pub effective: usize,
}

/// The assembled field F = G + rot180(G), one row per displacement.
#[derive(Debug, Clone)]
pub struct MotifField {
    values: Array2<f64>,
    params: MECFParams,
    /// Displacement rows actually stacked.
    d_max: usize,
    /// Constant-motif pairs that contributed a structural 0.
    degenerate_pairs: usize,
}

impl MotifField {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn params(&self) -> &MECFParams {
        &self.params
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn degenerate_pairs(&self) -> usize {
        self.degenerate_pairs
    }

    /// CSV export: one row per displacement, ascending d.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for row in self.values.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn sidecar(&self) -> FieldSidecar {
        FieldSidecar {
            params: self.params,
            d_max: self.d_max,
            columns: self.values.ncols(),
            degenerate_pairs: self.degenerate_pairs,
        }
    }
}

/// JSON sidecar written next to exported field CSVs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub params: MECFParams,
    pub d_max: usize,
    pub columns: usize,
    pub degenerate_pairs: usize,
}

/// Time-delay embedding of `x` with dimension `m` and delay `tau`.
pub fn delay_embed(x: &[f64], m: usize, tau: usize) -> Result<EmbeddedSeries> {
    if m < 2 {
        return Err(Error::InvalidParameter("embedding dimension m must be >= 2".into()));
    }
    if tau < 1 {
        return Err(Error::InvalidParameter("time delay tau must be >= 1".into()));
    }
    let t = x.len();
    let span = (m - 1) * tau;
    if t <= span {
        return Err(Error::SeriesTooShort { need: span, got: t });
    }
    let rows = t - span;
    let mut out = Array2::<f64>::zeros((rows, m));
    for r in 0..rows {
        for j in 0..m {
            out[[r, j]] = x[r + j * tau];
        }
    }
    Ok(EmbeddedSeries { rows: out })
}

/// Motif starting at row `s` (0-based): rows s, s+d, ..., s+(n-1)d.
pub fn motif(xhat: &EmbeddedSeries, n: usize, d: usize, s: usize) -> Result<Array2<f64>> {
    if n < 2 || d < 1 {
        return Err(Error::InvalidParameter("motif needs n >= 2 and d >= 1".into()));
    }
    let last = s + (n - 1) * d;
    if last >= xhat.row_count() {
        return Err(Error::InvalidParameter(format!(
            "motif start {s} out of range: row {last} >= {}",
            xhat.row_count()
        )));
    }
    let m = xhat.dim();
    let mut out = Array2::<f64>::zeros((n, m));
    for k in 0..n {
        out.row_mut(k).assign(&xhat.rows().row(s + k * d));
    }
    Ok(out)
}

/// 2D Pearson correlation between two equally-shaped matrices.
pub fn corr2d(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "corr2d shapes {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let count = a.len() as f64;
    let mean_a = a.sum() / count;
    let mean_b = b.sum() / count;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::DegenerateMotif(0));
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}

/// Correlation sequence at displacement `d`: element s (0-based) correlates
/// the motifs starting at rows s and s+d. Degenerate (constant) motifs
/// contribute 0; the second return value counts them.
pub fn motif_correlation_sequence(
    xhat: &EmbeddedSeries,
    n: usize,
    d: usize,
) -> Result<(Vec<f64>, usize)> {
    let r = xhat.row_count();
    if n < 2 || d < 1 {
        return Err(Error::InvalidParameter("need n >= 2 and d >= 1".into()));
    }
    if r < n * d + 1 {
        return Err(Error::SeriesTooShort { need: n * d + 1, got: r });
    }
    let mut seq = Vec::with_capacity(r - n * d);
    let mut degenerate = 0usize;
    for s in 0..r - n * d {
        let a = motif(xhat, n, d, s)?;
        let b = motif(xhat, n, d, s + d)?;
        match corr2d(&a, &b) {
            Ok(v) => seq.push(v),
            Err(Error::DegenerateMotif(_)) => {
                seq.push(0.0);
                degenerate += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok((seq, degenerate))
}

/// Maximum displacement for a series of length `t`: the construction formula
/// alongside the pair-feasibility cap (the formula value can exceed the
/// largest d for which a motif pair still fits).
pub fn compute_dmax(t: usize, m: usize, tau: usize, n: usize) -> Result<DmaxInfo> {
    let span = (m - 1) * tau;
    if t <= span + n {
        return Err(Error::SeriesTooShort { need: span + n, got: t });
    }
    let r = t - span;
    let formula = 1 + (r - (n + 1)) / (n - 1);
    let feasibility_cap = (r - 1) / n;
    Ok(DmaxInfo {
        formula,
        feasibility_cap,
        effective: formula.min(feasibility_cap),
    })
}

/// Build the field of one series: correlation sequences for d = 1..d_max,
/// zero-padded to the d=1 length C = (T - (m-1)tau) - n, stacked into G,
/// and returned as F = G + rot180(G).
pub fn assemble_field(x: &[f64], params: &MECFParams) -> Result<MotifField> {
    let t = x.len();
    let d_max = params.effective_dmax(t)?;
    let (m, tau, n) = (params.m, params.tau, params.n);
    let xhat = delay_embed(x, m, tau)?;
    let r = xhat.row_count();
    let cols = r - n;

    // Sliding sufficient statistics. Motif element sums decompose into
    // per-row sums, and the cross term into row-pair dots at lag d.
    let rows = xhat.rows();
    let mut row_sum = vec![0.0; r];
    let mut row_sq = vec![0.0; r];
    for i in 0..r {
        let mut s = 0.0;
        let mut q = 0.0;
        for j in 0..m {
            let v = rows[[i, j]];
            s += v;
            q += v * v;
        }
        row_sum[i] = s;
        row_sq[i] = q;
    }

    let nm = (n * m) as f64;
    let mut g = Array2::<f64>::zeros((d_max, cols));
    let mut degenerate_pairs = 0usize;
    let mut row_dot = vec![0.0; r];
    for d in 1..=d_max {
        for i in 0..r - d {
            let mut acc = 0.0;
            for j in 0..m {
                acc += rows[[i, j]] * rows[[i + d, j]];
            }
            row_dot[i] = acc;
        }
        let len = r - n * d;
        for s in 0..len {
            let mut sa = 0.0;
            let mut sb = 0.0;
            let mut qa = 0.0;
            let mut qb = 0.0;
            let mut cross = 0.0;
            for k in 0..n {
                let ia = s + k * d;
                let ib = ia + d;
                sa += row_sum[ia];
                sb += row_sum[ib];
                qa += row_sq[ia];
                qb += row_sq[ib];
                cross += row_dot[ia];
            }
            let var_a = qa - sa * sa / nm;
            let var_b = qb - sb * sb / nm;
            // relative threshold: centered sum of squares lost to rounding
            let degenerate = var_a <= 1e-13 * qa || var_b <= 1e-13 * qb || qa == 0.0 || qb == 0.0;
            g[[d - 1, s]] = if degenerate {
                degenerate_pairs += 1;
                0.0
            } else {
                (cross - sa * sb / nm) / (var_a.sqrt() * var_b.sqrt())
            };
        }
    }

    let mut f = Array2::<f64>::zeros((d_max, cols));
    for i in 0..d_max {
        for j in 0..cols {
            f[[i, j]] = g[[i, j]] + g[[d_max - 1 - i, cols - 1 - j]];
        }
    }

    Ok(MotifField {
        values: f,
        params: *params,
        d_max,
        degenerate_pairs,
    })
}

/// Frobenius distance between two fields of identical shape and provenance.
pub fn field_distance(f1: &MotifField, f2: &MotifField) -> Result<f64> {
    if f1.values.shape() != f2.values.shape() || f1.params != f2.params {
        return Err(Error::ShapeMismatch(format!(
            "field shapes {:?} vs {:?} (or differing params)",
            f1.values.shape(),
            f2.values.shape()
        )));
    }
    let mut acc = 0.0;
    for (a, b) in f1.values.iter().zip(f2.values.iter()) {
        let diff = a - b;
        acc += diff * diff;
    }
    Ok(acc.sqrt())
}
