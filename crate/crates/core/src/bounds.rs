//! Closed-form exponent bounds relating velocity regularity, integrability
//! and the dimension `γ` of the set carrying the dissipation.
//!
//! `p = ∞` is accepted wherever the formulas allow it; ratios such as
//! `(p − 3)/p` are written as `1 − 3/p` so the limit falls out of IEEE
//! arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Margins within this distance of zero count as equality.
pub const BOUNDARY_TOL: f64 = 1e-12;

fn onsager_ratio(sigma: f64) -> f64 {
    2.0 * sigma / (1.0 - sigma)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::OutOfRange(format!("σ = {sigma} outside (0, 1)")));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 3.0) {
        return Err(Error::OutOfRange(format!("p = {p} below 3")));
    }
    Ok(())
}

/// Largest `ζ_p` compatible with dissipation on a set of codimension `κ`:
/// `p/3 − 2κ(p−3)p / (9p − 3κ(p−3))`.
pub fn zeta_star(p: f64, kappa: f64) -> Result<f64> {
    check_p(p)?;
    if !p.is_finite() {
        return Err(Error::OutOfRange("ζ* is unbounded at p = ∞".into()));
    }
    if !(kappa >= 0.0) {
        return Err(Error::OutOfRange(format!("codimension κ = {kappa} is negative")));
    }
    let den = 9.0 * p - 3.0 * kappa * (p - 3.0);
    if !(den > 0.0) {
        return Err(Error::OutOfRange(format!("denominator 9p − 3κ(p−3) = {den} is not positive")));
    }
    Ok(p / 3.0 - 2.0 * kappa * (p - 3.0) * p / den)
}

/// `∂ζ*/∂p`, equal to `(3 − 2κ)/9` at `p = 3`.
pub fn zeta_star_slope(p: f64, kappa: f64) -> Result<f64> {
    zeta_star(p, kappa)?;
    let n = p * p * (1.0 - kappa) + 3.0 * kappa * p;
    let dn = 2.0 * p * (1.0 - kappa) + 3.0 * kappa;
    let m = p * (3.0 - kappa) + 3.0 * kappa;
    let dm = 3.0 - kappa;
    Ok((dn * m - n * dm) / (m * m))
}

/// Codimension `d + 1 − γ` of a `γ`-dimensional set in space-time.
pub fn codimension(gamma: f64, d: usize) -> f64 {
    d as f64 + 1.0 - gamma
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub holds: bool,
    /// `lhs − rhs`
    pub margin: f64,
}

/// Whether `2σ/(1−σ) > 1 − (p−3)/p (d+1−γ)`. When it holds, no dissipation
/// can live on a `γ`-dimensional set.
pub fn gamma_condition(sigma: f64, p: f64, gamma: f64, d: usize) -> Result<Condition> {
    check_sigma(sigma)?;
    check_p(p)?;
    if !(0.0..=d as f64 + 1.0).contains(&gamma) {
        return Err(Error::OutOfRange(format!("γ = {gamma} outside [0, d+1]")));
    }
    let rhs = 1.0 - (1.0 - 3.0 / p) * codimension(gamma, d);
    let margin = onsager_ratio(sigma) - rhs;
    let margin = if margin.abs() <= BOUNDARY_TOL { 0.0 } else { margin };
    Ok(Condition { holds: margin > 0.0, margin })
}

/// Regularity and integrability `(2σ/(1−σ) − 1, p/3)` of the defect.
pub fn dissipation_besov_exponent(sigma: f64, p: f64) -> Result<(f64, f64)> {
    check_sigma(sigma)?;
    check_p(p)?;
    Ok(((3.0 * sigma - 1.0) / (1.0 - sigma), p / 3.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Boundary,
    Violates,
}

fn verdict(margin: f64, err: f64) -> Verdict {
    if margin.abs() <= err + BOUNDARY_TOL {
        Verdict::Boundary
    } else if margin > 0.0 {
        Verdict::Violates
    } else {
        Verdict::Consistent
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentEntry {
    pub p: f64,
    pub zeta: f64,
    pub r2: f64,
    /// Standard error of `ζ_p`, zero for exact inputs.
    pub stderr: f64,
    pub source: String,
}

impl ExponentEntry {
    pub fn exact(p: f64, zeta: f64, source: &str) -> Self {
        Self { p, zeta, r2: 1.0, stderr: 0.0, source: source.into() }
    }

    pub fn sigma(&self) -> f64 {
        self.zeta / self.p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentTable {
    pub entries: Vec<ExponentEntry>,
    pub gamma: f64,
    pub gamma_method: String,
    pub d: usize,
}

impl ExponentTable {
    pub fn new(mut entries: Vec<ExponentEntry>, gamma: f64, gamma_method: &str, d: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::param("exponent table is empty"));
        }
        if let Some(e) = entries.iter().find(|e| !(e.p >= 3.0)) {
            return Err(Error::OutOfRange(format!("entry p = {} below 3", e.p)));
        }
        entries.sort_by(|a, b| a.p.total_cmp(&b.p));
        Ok(Self { entries, gamma, gamma_method: gamma_method.into(), d })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryVerdict {
    pub p: f64,
    pub zeta: f64,
    pub sigma: f64,
    pub zeta_star: f64,
    pub margin: f64,
    pub margin_error: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub gamma: f64,
    pub gamma_method: String,
    pub d: usize,
    pub entries: Vec<EntryVerdict>,
    pub overall: Verdict,
}

impl ConsistencyReport {
    /// Rows `p, zeta_measured, zeta_star, verdict`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("p,zeta_measured,zeta_star,verdict\n");
        for e in &self.entries {
            s.push_str(&format!("{:.12e},{:.12e},{:.12e},{}\n", e.p, e.zeta, e.zeta_star, verdict_name(e.verdict)));
        }
        s
    }
}

pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Consistent => "consistent",
        Verdict::Boundary => "boundary",
        Verdict::Violates => "violates",
    }
}

/// Flags entries whose `σ_p = ζ_p/p` satisfies [`gamma_condition`], i.e.
/// that are too regular for dissipation on a `γ`-dimensional set.
pub fn consistency_report(table: &ExponentTable) -> Result<ConsistencyReport> {
    if table.entries.is_empty() {
        return Err(Error::param("exponent table is empty"));
    }
    let kappa = codimension(table.gamma, table.d);
    let mut entries = Vec::with_capacity(table.entries.len());
    for e in &table.entries {
        let sigma = e.sigma();
        let c = gamma_condition(sigma, e.p, table.gamma, table.d)?;
        let margin_error = 2.0 / (1.0 - sigma).powi(2) * e.stderr / e.p;
        let zs = if e.p.is_finite() { zeta_star(e.p, kappa).unwrap_or(f64::NAN) } else { f64::INFINITY };
        entries.push(EntryVerdict {
            p: e.p,
            zeta: e.zeta,
            sigma,
            zeta_star: zs,
            margin: c.margin,
            margin_error,
            verdict: verdict(c.margin, margin_error),
        });
    }
    let overall = if entries.iter().any(|e| e.verdict == Verdict::Violates) {
        Verdict::Violates
    } else if entries.iter().any(|e| e.verdict == Verdict::Boundary) {
        Verdict::Boundary
    } else {
        Verdict::Consistent
    };
    Ok(ConsistencyReport { gamma: table.gamma, gamma_method: table.gamma_method.clone(), d: table.d, entries, overall })
}

/// `ζ*_p` sampled at `npoints` evenly spaced orders in `[p0, p1]`, as CSV
/// rows `p, zeta_star`.
pub fn zeta_star_curve(p0: f64, p1: f64, npoints: usize, gamma: f64, d: usize) -> Result<Vec<(f64, f64)>> {
    if npoints < 2 || !(p1 > p0) {
        return Err(Error::param("curve needs p0 < p1 and at least two points"));
    }
    let kappa = codimension(gamma, d);
    (0..npoints)
        .map(|i| {
            let p = p0 + (p1 - p0) * i as f64 / (npoints - 1) as f64;
            Ok((p, zeta_star(p, kappa)?))
        })
        .collect()
}

pub fn zeta_star_csv(curve: &[(f64, f64)]) -> String {
    let mut s = String::from("p,zeta_star\n");
    for (p, z) in curve {
        s.push_str(&format!("{p:.12e},{z:.12e}\n"));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarBound {
    /// `2β/(1−σ)`
    pub lhs: f64,
    pub refined_rhs: f64,
    pub refined: Verdict,
    pub classical: Verdict,
    pub refined_margin: f64,
    pub classical_margin: f64,
    /// Whether `1/p + 2/s ≤ 1`.
    pub integrability_ok: bool,
}

/// Scalar regularity `β_s` against `2β/(1−σ) ≤ 1 − (p(s−2)−s)/(ps)(d+1−γ)`
/// and the classical `2β/(1−σ) ≤ 1`. Verdicts read as for the energy case:
/// `Violates` means the scalar is too regular to dissipate there.
pub fn obukhov_corrsin_bound(sigma: f64, beta: f64, s: f64, p: f64, gamma: f64, d: usize) -> Result<ScalarBound> {
    check_sigma(sigma)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::OutOfRange(format!("β = {beta} outside (0, 1)")));
    }
    if !(s >= 2.0 && p >= 1.0) {
        return Err(Error::OutOfRange("need s ≥ 2 and p ≥ 1".into()));
    }
    let lhs = 2.0 * beta / (1.0 - sigma);
    let factor = 1.0 - 2.0 / s - 1.0 / p;
    let refined_rhs = 1.0 - factor * codimension(gamma, d);
    let snap = |m: f64| if m.abs() <= BOUNDARY_TOL { 0.0 } else { m };
    let refined_margin = snap(lhs - refined_rhs);
    let classical_margin = snap(lhs - 1.0);
    Ok(ScalarBound {
        lhs,
        refined_rhs,
        refined: verdict(refined_margin, 0.0),
        classical: verdict(classical_margin, 0.0),
        refined_margin,
        classical_margin,
        integrability_ok: 1.0 / p + 2.0 / s <= 1.0 + BOUNDARY_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_star_values() {
        for k in [0.0, 0.15, 1.0, 3.0] {
            assert_eq!(zeta_star(3.0, k).unwrap(), 1.0);
        }
        assert!((zeta_star(6.0, 0.15).unwrap() - (2.0 - 5.4 / 52.65)).abs() < 1e-12);
        assert!((zeta_star(6.0, 0.15).unwrap() - 1.897436).abs() < 1e-6);
        assert!((zeta_star_slope(3.0, codimension(3.85, 3)).unwrap() - 0.3).abs() < 1e-12);
        assert!(zeta_star(f64::INFINITY, 0.1).is_err());
        assert!(zeta_star(2.0, 0.1).is_err());
    }

    #[test]
    fn gamma_condition_examples() {
        let c = gamma_condition(1.0 / 3.0, 3.0, 2.0, 3).unwrap();
        assert!(!c.holds);
        assert_eq!(c.margin, 0.0);
        let c = gamma_condition(1.0 / 3.0, f64::INFINITY, 3.9, 3).unwrap();
        assert!(c.holds);
        assert!((c.margin - 0.1).abs() < 1e-12);
        let c = gamma_condition(0.2, 6.0, 2.0, 3).unwrap();
        assert!(c.holds && (c.margin - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dissipation_exponents() {
        assert_eq!(dissipation_besov_exponent(1.0 / 3.0, 3.0).unwrap(), (0.0, 1.0));
        let (r, q) = dissipation_besov_exponent(0.25, 6.0).unwrap();
        assert!((r + 1.0 / 3.0).abs() < 1e-12 && q == 2.0);
        let (r, q) = dissipation_besov_exponent(0.5, f64::INFINITY).unwrap();
        assert!(r == 1.0 && q.is_infinite());
    }

    #[test]
    fn report_examples() {
        let k41: Vec<ExponentEntry> = [3.0, 4.0, 5.0, 6.0].iter().map(|&p| ExponentEntry::exact(p, p / 3.0, "k41")).collect();
        let r = consistency_report(&ExponentTable::new(k41.clone(), 4.0, "given", 3).unwrap()).unwrap();
        assert!(r.entries.iter().all(|e| e.verdict != Verdict::Violates));
        let r = consistency_report(&ExponentTable::new(k41, 3.85, "given", 3).unwrap()).unwrap();
        assert_eq!(r.entries[0].verdict, Verdict::Boundary);
        assert!(r.entries[1..].iter().all(|e| e.verdict == Verdict::Violates));
        assert_eq!(r.overall, Verdict::Violates);
        let burgers = ExponentTable::new(vec![ExponentEntry::exact(4.0, 1.0, "burgers")], 1.0, "given", 1).unwrap();
        let r = consistency_report(&burgers).unwrap();
        assert_eq!(r.entries[0].verdict, Verdict::Consistent);
        assert!((r.entries[0].margin - (2.0 / 3.0 - 0.75)).abs() < 1e-12);
    }

    #[test]
    fn scalar_bound_examples() {
        let b = obukhov_corrsin_bound(1.0 / 3.0, 1.0 / 3.0, f64::INFINITY, f64::INFINITY, 3.0, 2).unwrap();
        assert_eq!(b.classical, Verdict::Boundary);
        let b = obukhov_corrsin_bound(1.0 / 3.0, 1.0 / 3.0, f64::INFINITY, f64::INFINITY, 2.0, 2).unwrap();
        assert_eq!(b.refined_rhs, 0.0);
        assert_eq!(b.refined, Verdict::Violates);
        let b = obukhov_corrsin_bound(0.5, 0.2, 4.0, 4.0, 3.0, 2).unwrap();
        assert!((b.lhs - 0.8).abs() < 1e-12);
        assert_eq!(b.refined, Verdict::Consistent);
        assert!(b.integrability_ok);
    }
}
