//! One function per pipeline stage.

use std::path::{Path, PathBuf};

use disslab::bounds::{consistency_report, verdict_name, zeta_star_csv, zeta_star_curve, ExponentEntry, ExponentTable, Verdict};
use disslab::duchon_robert::{
    dissipation_sample, dr_mollification_rates, identity_csv, identity_residuals, mollification_rates_with, time_weights,
    Balance, EnergyIntegrand, IdentityRow,
};
use disslab::fields::io::encode;
use disslab::fields::{read_field, synth_field, PeriodicGrid, SpaceTimeField, Spectral, SynthKind};
use disslab::fractal::{
    box_count_dimension, cantor_mask, concentration_set, covering_mass_estimate, density_exponent_fit, dimension_json,
    Density, Mask,
};
use disslab::inviscid_limits::{
    four_fifths_residual, kinetic_energy_modulus, quasi_singularity_fit, resolved_scale, resolved_scale_check,
    total_dissipation_pairings, uniform_viscous_besov, viscous_besov_exponents, Sweep, SweepMember,
};
use disslab::lp_besov::{build_dyadic_family, fit_besov_exponent_mode, BesovMode};
use disslab::mollify::Mollifier;
use disslab::solvers::{dissipation_rate, solve_advection, solve_burgers, solve_ns2d, vorticity, SolverConfig, Velocity};
use disslab::structure_fn::{absolute_sf, exponent_table_json, fit_zeta, longitudinal_sf, SFCurve};
use disslab::testfn::{random_family, Separable, SpacePart, TestFunctional, TimeBump};
use disslab::transport::{burgers_identity_residuals, transport_identity_residuals};
use serde::Serialize;

use crate::config::{
    DimsMethod, DimsSource, Equation, GenerateConfig, PipelineConfig, SolveConfig, SweepConfig, TestFamilyConfig,
};
use crate::manifest::{read_manifest, Run, MANIFEST};
use crate::CliError;

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    s.as_ref().ok_or_else(|| CliError::Usage(format!("config lacks a [{name}] section")))
}

fn need_seed(seed: Option<u64>, what: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Usage(format!("{what} is stochastic and needs a seed (--seed or `seed =` in the config)")))
}

fn is_random(kind: &SynthKind) -> bool {
    matches!(
        kind,
        SynthKind::RandomPhaseBesov { .. } | SynthKind::RandomSolenoidal { .. } | SynthKind::PerturbedTaylorGreen { .. }
    )
}

/// What the input movie describes.
enum Flow {
    Velocity(SpaceTimeField),
    Burgers(SpaceTimeField),
    Scalar { theta: SpaceTimeField, velocity: SpaceTimeField },
}

struct Input {
    field: SpaceTimeField,
    nu: f64,
}

fn load_input(cfg: &PipelineConfig, run: &mut Run) -> Result<Input, CliError> {
    let path = cfg.input.as_ref().ok_or_else(|| CliError::Usage("config lacks `input`".into()))?;
    run.input(path)?;
    let field = read_field(path)?;
    let nu = cfg.nu.unwrap_or(field.meta.viscosity);
    Ok(Input { field, nu })
}

fn classify(cfg: &PipelineConfig, run: &mut Run, field: SpaceTimeField) -> Result<Flow, CliError> {
    let g = *field.grid();
    if g.d == 1 && field.components() == 1 {
        return Ok(Flow::Burgers(field));
    }
    if field.components() == 1 {
        let path = cfg.velocity.as_ref().ok_or_else(|| CliError::Usage("scalar input needs `velocity`".into()))?;
        run.input(path)?;
        return Ok(Flow::Scalar { theta: field, velocity: read_field(path)? });
    }
    Ok(Flow::Velocity(field))
}

fn advecting(v: &SpaceTimeField) -> Velocity<'_> {
    if v.nt() == 1 {
        Velocity::Steady(v)
    } else {
        Velocity::Movie(v)
    }
}

fn cells(g: &PeriodicGrid, list: &[f64]) -> Vec<f64> {
    list.iter().map(|c| c * g.spacing()).collect()
}

fn test_family(g: &PeriodicGrid, t: &TestFamilyConfig, seed: u64) -> Result<Vec<Separable>, CliError> {
    let span = g.duration();
    let bump = if span > 0.0 {
        TimeBump::new(t.window.0 * span, t.window.1 * span)?
    } else {
        TimeBump::new(-1.0, 1.0)?
    };
    Ok(random_family(g, t.count, t.kmax, bump, seed))
}

fn solver_config(s: &SolveConfig, seed: Option<u64>) -> Result<SolverConfig, CliError> {
    let d = SolverConfig::default();
    if s.forcing_amp.is_some_and(|a| a != 0.0) {
        need_seed(seed, "forcing")?;
    }
    let cfg = SolverConfig {
        nu: s.nu,
        t_final: s.t_final,
        cfl: s.cfl.unwrap_or(d.cfl),
        dealias: s.dealias.unwrap_or(d.dealias),
        stride: s.stride.unwrap_or(d.stride),
        frame_dt: s.frame_dt,
        dt: s.dt,
        forcing_shell: s.forcing_shell,
        forcing_amp: s.forcing_amp.unwrap_or(0.0),
        seed: seed.unwrap_or(0),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn initial_vorticity(u0: &SpaceTimeField, kmax: Option<f64>) -> Result<SpaceTimeField, CliError> {
    let g = *u0.grid();
    let mut w = vorticity(u0, 0)?;
    if let Some(kmax) = kmax {
        let sp = Spectral::for_grid(&g);
        w = sp.filter(&w, |k| if ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt() <= kmax { 1.0 } else { 0.0 });
    }
    Ok(SpaceTimeField::new(g.with_time(1, 1.0)?, 1, w, u0.meta.clone())?)
}

pub fn generate(cfg: &PipelineConfig, gen: &GenerateConfig, run: &mut Run) -> Result<(), CliError> {
    let snap = PeriodicGrid::snapshot(gen.grid.d, gen.grid.n)?;
    let seed = if is_random(&gen.field) { need_seed(cfg.seed, "the requested field")? } else { cfg.seed.unwrap_or(0) };
    let f0 = synth_field(&snap, &gen.field, seed)?;
    let field = match &gen.solver {
        None => f0,
        Some(s) => {
            let sc = solver_config(s, cfg.seed)?;
            match s.equation {
                Equation::Ns2d => solve_ns2d(&initial_vorticity(&f0, s.initial_kmax)?, &sc)?,
                Equation::Burgers => solve_burgers(&f0, &sc)?,
                Equation::Advection => {
                    let path = cfg.velocity.as_ref().ok_or_else(|| CliError::Usage("advection needs `velocity`".into()))?;
                    run.input(path)?;
                    let v = read_field(path)?;
                    solve_advection(&f0, advecting(&v), &sc)?
                }
            }
        }
    };
    let g = *field.grid();
    run.value("nt", g.nt as f64);
    run.value("dt", g.dt);
    run.value("max_abs", field.max_abs());
    run.write(&gen.output, &encode(&field))?;
    Ok(())
}

pub fn besov(cfg: &PipelineConfig, run: &mut Run) -> Result<(), CliError> {
    let b = section(&cfg.besov, "besov")?;
    let inp = load_input(cfg, run)?;
    let fam = build_dyadic_family(inp.field.grid())?;
    let mode = if b.space_time { BesovMode::SpaceTime } else { BesovMode::PerSlice };
    let fit = fit_besov_exponent_mode(&inp.field, b.p, &fam, b.window, mode)?;
    run.fit("besov", fit.fit);
    run.value("sigma", fit.exponent.value());
    run.write_json("besov.json", &fit)?;
    if let Some(expect) = b.expect {
        let tol = b.tolerance.unwrap_or(0.05);
        let got = fit.exponent.value();
        run.check("besov_exponent", !fit.exponent.is_saturated() && (got - expect).abs() <= tol, format!("σ = {got}, expected {expect} ± {tol}"));
    }
    Ok(())
}

pub fn decompose(cfg: &PipelineConfig, run: &mut Run) -> Result<(), CliError> {
    let dc = section(&cfg.decompose, "decompose")?;
    let inp = load_input(cfg, run)?;
    let g = *inp.field.grid();
    let cell = g.cell_volume();
    let integral = |f: &SpaceTimeField, it: usize| -> f64 { f.component(it, 0).iter().sum::<f64>() * cell };
    let l1 = |f: &SpaceTimeField, it: usize| -> f64 {
        (0..f.components()).map(|c| f.component(it, c).iter().map(|v| v.abs()).sum::<f64>()).sum::<f64>() * cell
    };
    let mut csv = String::from("ell,t,energy,flux_c,q_l1,r_l1\n");
    for ell in cells(&g, &dc.ell_cells) {
        let t = disslab::duchon_robert::decomposition_terms(&inp.field, None, ell, inp.nu)?;
        for it in 0..g.nt {
            csv.push_str(&format!(
                "{ell:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                g.time(it),
                integral(&t.e, it),
                integral(&t.c, it),
                l1(&t.q, it),
                l1(&t.r, it)
            ));
        }
    }
    run.write("decomposition.csv", csv.as_bytes())?;
    Ok(())
}

pub fn verify_identity(cfg: &PipelineConfig, run: &mut Run) -> Result<(), CliError> {
    let ic = section(&cfg.identity, "identity")?;
    let seed = need_seed(cfg.seed, "the test-function family")?;
    let inp = load_input(cfg, run)?;
    let nu = inp.nu;
    let g = *inp.field.grid();
    let phis = test_family(&g, &ic.tests, seed)?;
    let refs: Vec<&dyn TestFunctional> = phis.iter().map(|p| p as &dyn TestFunctional).collect();
    let ells = cells(&g, &ic.ell_cells);
    let rows: Vec<IdentityRow> = match classify(cfg, run, inp.field)? {
        Flow::Velocity(u) => identity_residuals(&u, None, nu, &ells, &refs)?,
        Flow::Burgers(u) => burgers_identity_residuals(&u, nu, &ells, &refs)?,
        Flow::Scalar { theta, velocity } => transport_identity_residuals(&theta, advecting(&velocity), nu, &ells, &refs)?,
    };
    let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    run.value("max_residual", worst);
    run.write("identity.csv", identity_csv(&rows).as_bytes())?;
    run.check("identity_residual", worst < ic.tolerance, format!("max residual {worst:.3e}, tolerance {:.1e}", ic.tolerance));
    Ok(())
}

pub fn rates(cfg: &PipelineConfig, run: &mut Run) -> Result<(), CliError> {
    let rc = section(&cfg.rates, "rates")?;
    let seed = need_seed(cfg.seed, "the test-function family")?;
    let inp = load_input(cfg, run)?;
    let g = *inp.field.grid();
    let phis = test_family(&g, &rc.tests, seed)?;
    let integrand = EnergyIntegrand::new(&inp.field, None, inp.nu)?;
    let deltas = cells(&g, &rc.delta_cells);
    let r = if rc.total {
        mollification_rates_with(&integrand, Balance::Total, &phis, &deltas, rc.time_ratio, rc.sigma, viscous_besov_exponents(rc.sigma))?
    } else {
        dr_mollification_rates(&integrand, Balance::Defect, &phis, &deltas, rc.time_ratio, rc.sigma)?
    };
    run.fit("remainder", r.remainder_fit);
    run.fit("mollified", r.mollified_fit);
    run.write("rates.csv", r.to_csv().as_bytes())?;
    run.write_json("rates.json", &r)?;
    run.check("mollification_rates", r.pass, format!("predicted {:?}, trivial {}", r.predicted, r.trivial));
    Ok(())
}

pub fn sf(cfg: &PipelineConfig, run: &mut Run) -> Result<(), CliError> {
    let sc = section(&cfg.sf, "sf")?;
    let inp = load_input(cfg, run)?;
    let g = *inp.field.grid();
    let ells = cells(&g, &sc.ell_cells);
    let mut curves: Vec<SFCurve> = absolute_sf(&inp.field, &sc.p, &ells, sc.ndirections)?;
    if sc.longitudinal {
        curves.push(longitudinal_sf(&inp.field, &ells, sc.ndirections)?);
    }
    let mut csv = String::from("kind,p,ell,value\n");
    for c in &curves {
        let kind = serde_json::to_value(c.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        for (l, v) in c.separations.iter().zip(&c.values) {
            csv.push_str(&format!("{kind},{},{l:.12e},{v:.12e}\n", c.p));
        }
    }
    run.write("sf.csv", csv.as_bytes())?;
    let mut fits = Vec::new();
    for c in curves.iter().filter(|c| c.values.iter().all(|v| *v > 0.0)) {
        let z = fit_zeta(c, sc.window)?;
        run.fit(format!("zeta_{}", c.p), Some(z.fit));
        fits.push(z);
    }
    run.write_json("exponents.json", &exponent_table_json(&fits))?;
    Ok(())
}

fn mask_density(mask: &Mask) -> Result<Density, CliError> {
    let rank = mask.shape.len();
    let values: Vec<f64> = mask.data.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect();
    Ok(Density::new(mask.shape.clone(), mask.shape.iter().map(|n| 1.0 / *n as f64).collect(), vec![false; rank], &values)?)
}

/// `ν u_x²` (d = 1) or `|D ∗ ρ_δ|` (velocity) as a space-time density.
fn dissipation_density(flow: Flow, nu: f64, delta: Option<f64>) -> Result<Density, CliError> {
    match flow {
        Flow::Burgers(u) => {
            let g = *u.grid();
            let sp = Spectral::for_grid(&g);
            let data: Vec<f64> = (0..g.nt)
                .flat_map(|it| sp.derivative_real(u.component(it, 0), 0).into_iter().map(|v| nu * v * v).collect::<Vec<_>>())
                .collect();
            Ok(Density::from_movie(&SpaceTimeField::new(g, 1, data, u.meta.clone())?)?)
        }
        Flow::Velocity(u) => {
            let delta = delta.ok_or_else(|| CliError::Usage("dissipation density needs `delta`".into()))?;
            let d = dissipation_sample(&u, None, nu, &Mollifier::space_time(delta, delta), Balance::Defect)?;
            Ok(Density::from_movie(&d)?)
        }
        Flow::Scalar { .. } => Err(CliError::Usage("dissipation density of scalar inputs is not supported".into())),
    }
}

pub fn dims(cfg: &PipelineConfig, run: &mut Run) -> Result<(), CliError> {
    let dc = section(&cfg.dims, "dims")?;
    let (mask, rho) = match dc.source {
        DimsSource::Cantor => {
            let mut m = cantor_mask(dc.levels);
            if let Some(t) = dc.time_cells {
                m = Mask::full(vec![t]).product(&m)?;
            }
            let rho = mask_density(&m)?;
            (m, rho)
        }
        DimsSource::Density | DimsSource::Dissipation => {
            let inp = load_input(cfg, run)?;
            let rho = if dc.source == DimsSource::Density {
                Density::from_movie(&inp.field)?
            } else {
                dissipation_density(classify(cfg, run, inp.field)?, inp.nu, dc.delta)?
            };
            (concentration_set(&rho, dc.threshold)?.mask(), rho)
        }
    };
    let delta = dc.delta.unwrap_or(0.0);
    match dc.method {
        DimsMethod::BoxCount => {
            let sizes = match &dc.sizes {
                Some(s) => s.clone(),
                None => {
                    let n = mask.shape.iter().copied().min().unwrap_or(1);
                    (0..).map(|k| 1usize << k).take_while(|s| *s * 8 <= n).collect()
                }
            };
            let fit = box_count_dimension(&mask, &sizes)?;
            run.fit("box_count", Some(fit));
            run.write_json("dimension.json", &dimension_json("box_count", &fit, dc.threshold, delta))?;
            if let Some(expect) = dc.expect {
                let tol = dc.tolerance.unwrap_or(0.05);
                run.check("dimension", (fit.exponent - expect).abs() <= tol, format!("{} vs {expect} ± {tol}", fit.exponent));
            }
        }
        DimsMethod::Covering => {
            let gamma = dc.gamma.ok_or_else(|| CliError::Usage("covering needs `gamma`".into()))?;
            let radii = dc.radii.as_ref().ok_or_else(|| CliError::Usage("covering needs `radii`".into()))?;
            let pts = covering_mass_estimate(&rho, gamma, radii, dc.threshold)?;
            let mut csv = String::from("r,boxes,sum,retained\n");
            for p in &pts {
                csv.push_str(&format!("{:.12e},{},{:.12e},{:.12e}\n", p.r, p.boxes, p.sum, p.retained));
            }
            run.write("covering.csv", csv.as_bytes())?;
        }
        DimsMethod::Density => {
            let radii = dc.radii.as_ref().ok_or_else(|| CliError::Usage("density fit needs `radii`".into()))?;
            let sigma = dc.sigma.ok_or_else(|| CliError::Usage("density fit needs `sigma`".into()))?;
            let p = dc.p.ok_or_else(|| CliError::Usage("density fit needs `p`".into()))?;
            let d = rho.shape.len() - 1;
            let fit = density_exponent_fit(&rho, dc.npoints, radii, delta, sigma, p, d)?;
            run.value("density_min_exponent", fit.min_exponent);
            run.write_json("density.json", &fit)?;
            run.check("density_exponent", fit.pass, format!("min {} vs predicted {}", fit.min_exponent, fit.predicted));
        }
    }
    Ok(())
}

fn read_table(path: &Path) -> Result<Vec<ExponentEntry>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let source = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Usage(format!("{source}:{}: expected numbers", i + 1)))?;
        if cols.len() < 2 {
            return Err(CliError::Usage(format!("{source}:{}: expected p,zeta[,stderr]", i + 1)));
        }
        let mut e = ExponentEntry::exact(cols[0], cols[1], &source);
        e.stderr = cols.get(2).copied().unwrap_or(0.0);
        out.push(e);
    }
    Ok(out)
}

pub fn bounds(cfg: &PipelineConfig, run: &mut Run, strict: bool) -> Result<(), CliError> {
    let bc = section(&cfg.bounds, "bounds")?;
    let mut entries: Vec<ExponentEntry> = bc
        .entries
        .iter()
        .map(|e| {
            let mut x = ExponentEntry::exact(e.p, e.zeta, "config");
            x.stderr = e.stderr;
            x
        })
        .collect();
    if let Some(t) = &bc.table {
        run.input(t)?;
        entries.extend(read_table(t)?);
    }
    let (p0, p1, np) = bc.curve;
    run.write("zeta_star.csv", zeta_star_csv(&zeta_star_curve(p0, p1, np, bc.gamma, bc.d)?).as_bytes())?;
    if entries.is_empty() {
        return Ok(());
    }
    let table = ExponentTable::new(entries, bc.gamma, &bc.gamma_method, bc.d)?;
    let report = consistency_report(&table)?;
    run.write("consistency.csv", report.to_csv().as_bytes())?;
    run.write_json("bounds.json", &report)?;
    let failed = match report.overall {
        Verdict::Violates => true,
        Verdict::Boundary => strict,
        Verdict::Consistent => false,
    };
    run.check("bounds", !failed, format!("overall verdict {}", verdict_name(report.overall)));
    Ok(())
}

#[derive(Serialize)]
struct SweepRecordRow {
    nu: f64,
    movie: Option<String>,
    /// `∫∫ ν|∇u|²` over the movie.
    total_dissipation: f64,
    /// `⟨𝓔^ν, η⟩`
    pairing: f64,
    ell_nu: f64,
}

#[derive(Serialize)]
struct SweepRecord {
    sigma: f64,
    sigma_measured: Option<f64>,
    members: Vec<SweepRecordRow>,
}

pub fn sweep(cfg: &PipelineConfig, run: &mut Run) -> Result<(), CliError> {
    let sc: &SweepConfig = section(&cfg.sweep, "sweep")?;
    let snap = PeriodicGrid::snapshot(sc.grid.d, sc.grid.n)?;
    let seed = need_seed(cfg.seed, "the sweep")?;
    let f0 = synth_field(&snap, &sc.field, seed)?;
    let w0 = initial_vorticity(&f0, None)?;
    let mut members = Vec::new();
    let mut movies = Vec::new();
    for (i, &nu) in sc.nus.iter().enumerate() {
        let solve = SolveConfig {
            equation: Equation::Ns2d,
            nu,
            t_final: sc.t_final,
            cfl: Some(sc.cfl),
            stride: None,
            frame_dt: Some(sc.frame_dt),
            dt: None,
            dealias: None,
            forcing_shell: None,
            forcing_amp: None,
            initial_kmax: None,
        };
        let u = solve_ns2d(&w0, &solver_config(&solve, Some(seed))?)?;
        movies.push(if sc.save_movies {
            let name = format!("sweep_{i}.dlf");
            run.write(&name, &encode(&u))?;
            Some(name)
        } else {
            None
        });
        members.push(SweepMember { nu, u });
    }
    let sweep = Sweep::new(members)?;
    let g = *sweep.members[0].u.grid();

    let finest = &sweep.members[sweep.members.len() - 1].u;
    let measured = {
        let last = finest.slice(g.nt - 1);
        let fam = build_dyadic_family(last.grid())?;
        fit_besov_exponent_mode(&last, sc.p, &fam, None, BesovMode::PerSlice).ok().map(|f| f.exponent.value())
    };
    let sigma = match (sc.sigma, measured) {
        (Some(s), _) => s,
        (None, Some(m)) => m.clamp(1e-3, 1.0),
        (None, None) => return Err(CliError::Runtime("could not measure σ at the smallest viscosity".into())),
    };
    run.value("sigma", sigma);

    let eta = TimeBump::new(sc.eta.0, sc.eta.1)?;
    let phi = Separable::new("eta", SpacePart::ones(&g), eta);
    let pairings = total_dissipation_pairings(&sweep, &phi)?;
    let w = time_weights(&g);
    let rows: Vec<SweepRecordRow> = sweep
        .members
        .iter()
        .zip(&pairings)
        .zip(&movies)
        .map(|((m, &pairing), movie)| {
            let mut u = m.u.clone();
            u.meta.viscosity = m.nu;
            let total = (0..g.nt).map(|it| w[it] * dissipation_rate(&u, it)).sum();
            SweepRecordRow { nu: m.nu, movie: movie.clone(), total_dissipation: total, pairing, ell_nu: resolved_scale(m.nu, sigma) }
        })
        .collect();
    run.write_json("sweep.json", &SweepRecord { sigma, sigma_measured: measured, members: rows })?;

    if g.nt >= 64 {
        let modulus = kinetic_energy_modulus(finest, sigma)?;
        run.fit("energy_modulus", modulus.fit);
        run.write_json("modulus.json", &modulus)?;
        run.check("energy_modulus", modulus.pass, format!("predicted ≥ {} − slack", modulus.predicted));
    }

    let quasi = quasi_singularity_fit(&sweep.nus(), &pairings, sigma)?;
    run.fit("quasi_singularity", Some(quasi.fit));
    run.write_json("quasi.json", &quasi)?;
    run.check("quasi_singularity", quasi.pass, format!("exponent {} vs predicted {}", quasi.fit.exponent, quasi.predicted));

    let ff = four_fifths_residual(&sweep, &cells(&g, &sc.ell_i_cells), eta, sigma, sc.ndirections)?;
    run.fit("four_fifths_total", ff.total_rate);
    run.fit("four_fifths_longitudinal", ff.longitudinal_rate);
    run.write("four_fifths.csv", ff.to_csv().as_bytes())?;
    run.check("four_fifths", ff.pass, format!("rates vs predicted {}", ff.predicted_rate));

    let resolved = resolved_scale_check(&sweep, sigma, eta)?;
    let mut csv = String::from("nu,ell_nu,coarse,total,ratio\n");
    for r in &resolved.rows {
        csv.push_str(&format!("{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n", r.nu, r.ell_nu, r.coarse, r.total, r.ratio));
    }
    run.write("resolved.csv", csv.as_bytes())?;
    run.check("resolved_scale", resolved.pass, "total ≤ 1.1 · coarse");

    let phis = test_family(&g, &sc.tests, seed)?;
    let uni = uniform_viscous_besov(&sweep, &phis, &cells(&g, &sc.delta_cells), sc.time_ratio, sigma, sc.p)?;
    let mut csv = String::from("nu,delta,remainder,mollified\n");
    for (nu, r) in &uni.per_nu {
        for p in &r.points {
            csv.push_str(&format!("{nu:.12e},{:.12e},{:.12e},{:.12e}\n", p.delta, p.remainder, p.mollified));
        }
        run.fit(format!("uniform_remainder_{nu:e}"), r.remainder_fit);
        run.fit(format!("uniform_mollified_{nu:e}"), r.mollified_fit);
    }
    run.value("uniform_spread_remainder", uni.spread_remainder);
    run.value("uniform_spread_mollified", uni.spread_mollified);
    run.write("uniform.csv", csv.as_bytes())?;
    run.check(
        "uniform_viscous_besov",
        uni.pass,
        format!("spreads {:.3} and {:.3}", uni.spread_remainder, uni.spread_mollified),
    );
    Ok(())
}

fn manifest_dirs(out: &Path, runs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    if !runs.is_empty() {
        return Ok(runs.to_vec());
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(out)
        .map_err(|e| CliError::Usage(format!("cannot list {}: {e}", out.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST).is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

pub fn report(cfg: &PipelineConfig, run: &mut Run) -> Result<(), CliError> {
    let runs = cfg.report.clone().unwrap_or_default().runs;
    let dirs = manifest_dirs(&run.dir, &runs)?;
    if dirs.is_empty() {
        return Err(CliError::Usage("no run manifests to report on".into()));
    }
    let mut md = String::from("# disslab report\n\n| run | command | check | result | detail |\n|---|---|---|---|---|\n");
    let mut json = Vec::new();
    for d in &dirs {
        let m = read_manifest(d)?;
        run.input(&d.join(MANIFEST))?;
        let name = d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        for c in &m.checks {
            md.push_str(&format!("| {name} | {} | {} | {} | {} |\n", m.command, c.name, if c.pass { "pass" } else { "FAIL" }, c.detail));
            run.check(format!("{name}/{}", c.name), c.pass, c.detail.clone());
        }
        for (k, f) in &m.fits {
            run.fit(format!("{name}/{k}"), Some(*f));
        }
        for (k, v) in &m.values {
            run.value(format!("{name}/{k}"), *v);
        }
        json.push(serde_json::json!({ "run": name, "manifest": m }));
    }
    md.push_str("\n## Fits\n\n| name | exponent | r² | points |\n|---|---|---|---|\n");
    let fits: Vec<_> = run.manifest.fits.iter().map(|(k, f)| (k.clone(), *f)).collect();
    for (k, f) in fits {
        md.push_str(&format!("| {k} | {:.6} | {:.4} | {} |\n", f.exponent, f.r2, f.npoints));
    }
    run.write("report.md", md.as_bytes())?;
    run.write_json("report.json", &json)?;
    Ok(())
}
