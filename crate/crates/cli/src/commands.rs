use crate::config::{ConfigError, RunConfig};
use crate::manifest::RunManifest;
use crate::table1;
use anyhow::{Context, Result};
use cavity_polariton::cache::{CacheKey, ElectronicCache};
use cavity_polariton::coupled::{
    memory_estimate, solve_coupled_with, CoupledHamiltonianConfig, CoupledSolveOptions, CouplingForm,
};
use cavity_polariton::electronic::{matter_elements, ElectronicBasis};
use cavity_polariton::grid::{potential_on_grid, Grid2D, MexicanHatParams};
use cavity_polariton::observables::{
    anisotropy, density_difference, density_from_coupled, density_from_polariton, lower_polariton_index,
    read_density_raw, write_density_csv, write_density_raw,
};
use cavity_polariton::photon::{build_coupling_table, PhotonMode};
use cavity_polariton::polariton::{polariton_occupation, solve_polariton, PolaritonBasisSpec};
use cavity_polariton::spp::{polariton_gap, spp_levels, tavis_cummings_splitting, SppInputs};
use serde_json::json;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

fn cfg_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn sci(x: f64) -> String {
    format!("{x:.8e}")
}

/// Everything the commands share: parsed physical and numerical inputs.
struct Setup {
    cfg: RunConfig,
    grid: Grid2D,
    params: MexicanHatParams,
    out: PathBuf,
}

impl Setup {
    fn new(cfg: RunConfig) -> Result<Self> {
        let grid = Grid2D::centered(cfg.parse("nx")?, cfg.parse("ny")?, cfg.parse("dx")?)
            .map_err(|e| cfg_err(e.to_string()))?;
        let params = MexicanHatParams::new(cfg.parse("xi1")?, cfg.parse("xi2")?, cfg.parse("xi3")?)
            .map_err(|e| cfg_err(e.to_string()))?;
        let out = cfg.output_dir();
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self { cfg, grid, params, out })
    }

    fn key(&self, count: usize) -> Result<CacheKey> {
        Ok(CacheKey {
            grid: self.grid.clone(),
            params: self.params,
            count,
            tol: self.cfg.parse("electronic_tol")?,
            seed: self.cfg.parse("seed")?,
            gauge_direction: self.cfg.vec2("polarization")?,
        })
    }

    fn cache(&self) -> Result<ElectronicCache> {
        Ok(ElectronicCache::new(self.cfg.cache_dir())?)
    }

    /// Cached basis with `states` orbitals, solved on demand.
    fn electronic(&self) -> Result<(ElectronicBasis, bool)> {
        let key = self.key(self.cfg.parse("states")?)?;
        Ok(self.cache()?.load_or_solve(&key)?)
    }

    fn omega(&self, basis: &ElectronicBasis) -> Result<f64> {
        match self.cfg.str("omega") {
            "resonant" => {
                if basis.count < 2 {
                    return Err(cfg_err("resonant omega needs at least two electronic states"));
                }
                Ok(basis.energies[1] - basis.energies[0])
            }
            _ => self.cfg.parse("omega").map_err(Into::into),
        }
    }

    fn lambda_vec(&self, lambda: f64) -> Result<[f64; 2]> {
        let p = self.cfg.vec2("polarization")?;
        Ok([lambda * p[0], lambda * p[1]])
    }

    fn start(&self, command: &str) -> Result<RunManifest> {
        Ok(RunManifest::new(command, &self.out, &self.cfg))
    }

    fn write(&self, m: &mut RunManifest, name: &str, text: &str) -> Result<()> {
        std::fs::write(self.out.join(name), text)?;
        m.file(name);
        Ok(())
    }
}

pub fn electronic(cfg: RunConfig) -> Result<()> {
    let s = Setup::new(cfg)?;
    let mut m = s.start("electronic")?;
    let t = Instant::now();
    let (basis, hit) = s.electronic()?;
    m.timing("electronic", t.elapsed().as_secs_f64());
    m.diagnostic("cache_hit", json!(hit));
    m.diagnostic("max_residual", json!(basis.residuals.iter().cloned().fold(0.0, f64::max)));
    let mut csv = String::from("n,energy,residual\n");
    for (n, (e, r)) in basis.energies.iter().zip(&basis.residuals).enumerate() {
        writeln!(csv, "{n},{},{}", sci(*e), sci(*r))?;
        println!("E_{n} = {e:.10}");
    }
    if basis.count >= 2 {
        let gap = basis.energies[1] - basis.energies[0];
        println!("gap = {gap:.10}");
        m.result("gap", json!(gap));
    }
    m.result("energies", json!(basis.energies));
    s.write(&mut m, "electronic.csv", &csv)?;
    m.write()?;
    Ok(())
}

fn forms(cfg: &RunConfig, key: &str) -> Result<Vec<CouplingForm>> {
    match cfg.str(key) {
        "both" => Ok(vec![CouplingForm::Length, CouplingForm::Momentum]),
        v => Ok(vec![v.parse().map_err(|_| cfg_err(format!("`{key}` = `{v}`: expected length, momentum or both")))?]),
    }
}

fn coupled_config(s: &Setup, basis: &ElectronicBasis, lambda: f64, form: CouplingForm) -> Result<CoupledHamiltonianConfig> {
    let fock: usize = s.cfg.parse("fock_states")?;
    if fock == 0 {
        return Err(cfg_err("fock_states must be at least 1"));
    }
    let mode = PhotonMode::new(s.omega(basis)?, s.lambda_vec(lambda)?, fock - 1).map_err(|e| cfg_err(e.to_string()))?;
    let v = potential_on_grid(&s.grid, &s.params);
    let mut c = CoupledHamiltonianConfig::new(s.grid.clone(), v, vec![mode], form)?;
    c.include_self_polarization = s.cfg.bool("self_polarization")?;
    Ok(c)
}

fn check_memory(s: &Setup, c: &CoupledHamiltonianConfig, k: usize) -> Result<()> {
    let need = memory_estimate(c, k) as f64 / 1e9;
    let budget: f64 = s.cfg.parse("memory_budget_gb")?;
    if need > budget {
        return Err(cfg_err(format!(
            "estimated memory {need:.2} GB for dimension {} exceeds memory_budget_gb = {budget}",
            c.dim()
        )));
    }
    Ok(())
}

fn solve_opts(cfg: &RunConfig) -> Result<CoupledSolveOptions> {
    Ok(CoupledSolveOptions { tol: cfg.parse("coupled_tol")?, seed: cfg.parse("seed")?, ..Default::default() })
}

pub fn exact(cfg: RunConfig) -> Result<()> {
    let s = Setup::new(cfg)?;
    let mut m = s.start("exact")?;
    let k: usize = s.cfg.parse("coupled_states")?;
    if k < 4 {
        return Err(cfg_err("coupled_states must be at least 4 for the excitation energies"));
    }
    let lambda: f64 = s.cfg.parse("lambda")?;
    let forms = forms(&s.cfg, "form")?;
    let t = Instant::now();
    let (basis, hit) = s.electronic()?;
    m.timing("electronic", t.elapsed().as_secs_f64());
    m.diagnostic("cache_hit", json!(hit));
    let configs = forms
        .iter()
        .map(|&f| coupled_config(&s, &basis, lambda, f))
        .collect::<Result<Vec<_>>>()?;
    for c in &configs {
        check_memory(&s, c, k)?;
    }
    let export = s.cfg.bool("export_density")?;
    let mut csv = String::from("form,lambda,fock_states,dE01,dE13,occupation\n");
    let mut levels = String::from("form,index,energy,residual\n");
    for c in &configs {
        let tag = c.form.tag();
        let t = Instant::now();
        let states = solve_coupled_with(c, k, &solve_opts(&s.cfg)?)?;
        m.timing(tag, t.elapsed().as_secs_f64());
        let (de01, de13) = (states[1].energy - states[0].energy, states[3].energy - states[1].energy);
        let occ = states[0].occupation(0);
        writeln!(csv, "{tag},{},{},{},{},{}", sci(lambda), c.fock_space().len(), sci(de01), sci(de13), sci(occ))?;
        for (i, st) in states.iter().enumerate() {
            writeln!(levels, "{tag},{i},{},{}", sci(st.energy), sci(st.residual))?;
        }
        println!("{tag}: dE01 = {de01:.7}  dE13 = {de13:.7}  occupation = {occ:.7}");
        let method = match c.form {
            CouplingForm::Length => "ex-dE",
            CouplingForm::Momentum => "ex-pA",
        };
        if let Some(r) = table1::lookup_exact(method, lambda) {
            println!(
                "{:>width$}  table deviations {:+.1e} {:+.1e} {:+.1e}",
                "",
                de01 - r.de01,
                de13 - r.de13,
                occ - r.occupation,
                width = tag.len()
            );
        }
        m.result(tag, json!({ "dE01": de01, "dE13": de13, "occupation": occ, "energies": states.iter().map(|x| x.energy).collect::<Vec<_>>() }));
        m.diagnostic(
            &format!("{tag}_top_fock_weight"),
            json!(states.iter().map(|x| x.top_fock_weight(0)).collect::<Vec<_>>()),
        );
        m.diagnostic(&format!("{tag}_dimension"), json!(c.dim()));
        if export {
            let d = density_from_coupled(&states[0]);
            let name = format!("density_{tag}");
            write_density_csv(&s.out.join(format!("{name}.csv")), &s.grid, &d)?;
            write_density_raw(&s.out.join(format!("{name}.bin")), &s.grid, &d, &provenance(&s.cfg, "exact"))?;
            for ext in ["csv", "bin", "bin.json"] {
                m.file(format!("{name}.{ext}"));
            }
        }
    }
    s.write(&mut m, "exact.csv", &csv)?;
    s.write(&mut m, "exact_levels.csv", &levels)?;
    m.write()?;
    Ok(())
}

fn provenance(cfg: &RunConfig, command: &str) -> Vec<(&'static str, String)> {
    let mut p = vec![("command", command.to_string()), ("version", env!("CARGO_PKG_VERSION").to_string())];
    for k in ["lambda", "form", "density", "density_form", "density_spec", "fock_states", "polarization"] {
        p.push((k, cfg.str(k).to_string()));
    }
    p
}

/// Loads the cached basis for a scan; never solves.
fn cached_basis_for_scan(s: &Setup, needed: usize) -> Result<ElectronicBasis> {
    let states: usize = s.cfg.parse("states")?;
    if states < needed {
        return Err(cfg_err(format!(
            "the scan needs {needed} electronic states; run `cavpol electronic --set states={needed}` \
             (and pass the same states setting here)"
        )));
    }
    let key = s.key(states)?;
    let path = s.cache()?.path_for(&key);
    if !path.exists() {
        return Err(cfg_err(format!(
            "no electronic cache for these parameters; run `cavpol electronic` with states={states} first"
        )));
    }
    Ok(cavity_polariton::cache::read_basis(&path, &key)?)
}

pub fn polariton_scan(cfg: RunConfig, diff: bool) -> Result<()> {
    let s = Setup::new(cfg)?;
    let mut m = s.start("polariton-scan")?;
    let rows = s.cfg.scan_rows()?;
    let mut csv = String::from("l_max,n_max,lambda,dE01,dE13,occupation\n");
    if !rows.is_empty() {
        let needed = rows.iter().map(|r| r.1 + 1).max().expect("non-empty");
        let basis = matter_elements(cached_basis_for_scan(&s, needed)?, s.cfg.vec2("polarization")?)?;
        let omega = s.omega(&basis)?;
        let t = Instant::now();
        let mut failures = Vec::new();
        let mut deviations = Vec::new();
        for &(l_max, n_max, lambda) in &rows {
            let spec = PolaritonBasisSpec::new(n_max, l_max);
            let res = (|| -> cavity_polariton::Result<(f64, f64, f64)> {
                let table = build_coupling_table(&[PhotonMode::new(omega, s.lambda_vec(lambda).expect("checked"), l_max)?]);
                let st = solve_polariton(&basis, &table, &spec, 4)?;
                Ok((st[1].energy - st[0].energy, st[3].energy - st[1].energy, polariton_occupation(&st[0], 0)))
            })();
            let (a, b, c) = match res {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("row {l_max}:{n_max}:{lambda} failed: {e}");
                    failures.push(json!({ "row": format!("{l_max}:{n_max}:{lambda}"), "error": e.to_string() }));
                    (f64::NAN, f64::NAN, f64::NAN)
                }
            };
            writeln!(csv, "{l_max},{n_max},{},{},{},{}", sci(lambda), sci(a), sci(b), sci(c))?;
            if diff {
                match table1::lookup(l_max, n_max, lambda) {
                    Some(r) => {
                        let d = [a - r.de01, b - r.de13, c - r.occupation];
                        println!(
                            "{l_max:>3} {n_max:>3} {lambda:<6} dE01 {a:.7} ({:+.1e})  dE13 {b:.7} ({:+.1e})  occ {c:.7} ({:+.1e})",
                            d[0], d[1], d[2]
                        );
                        deviations.push(json!({ "row": format!("{l_max}:{n_max}:{lambda}"), "dE01": d[0], "dE13": d[1], "occupation": d[2] }));
                    }
                    None => println!("{l_max:>3} {n_max:>3} {lambda:<6} not tabulated"),
                }
            }
        }
        m.timing("scan", t.elapsed().as_secs_f64());
        m.diagnostic("failed_rows", json!(failures));
        if diff {
            m.result("table_deviations", json!(deviations));
        }
    }
    s.write(&mut m, "scan.csv", &csv)?;
    m.write()?;
    Ok(())
}

fn parse_spec(v: &str) -> Result<PolaritonBasisSpec> {
    let bad = || cfg_err(format!("density_spec `{v}` is not l_max:n_max"));
    let (l, n) = v.split_once(':').ok_or_else(bad)?;
    Ok(PolaritonBasisSpec::new(n.trim().parse().map_err(|_| bad())?, l.trim().parse().map_err(|_| bad())?))
}

pub fn density(cfg: RunConfig) -> Result<()> {
    let s = Setup::new(cfg)?;
    let mut m = s.start("density")?;
    let which = s.cfg.str("density").to_string();
    let lambda: f64 = s.cfg.parse("lambda")?;
    let pol = s.cfg.vec2("polarization")?;
    let reference_kind = s.cfg.str("density_reference").to_string();
    // resolve a file reference before any expensive work
    let reference_file = match reference_kind.as_str() {
        "bare" | "self" => None,
        p => {
            let p = PathBuf::from(p);
            if !p.exists() {
                return Err(cfg_err(format!("reference density {} does not exist", p.display())));
            }
            Some(p)
        }
    };
    let t = Instant::now();
    let density = match which.as_str() {
        "exact-ground" => {
            let (basis, _) = s.electronic()?;
            let form = s.cfg.str("density_form").parse::<CouplingForm>().map_err(|e| cfg_err(e.to_string()))?;
            let c = coupled_config(&s, &basis, lambda, form)?;
            check_memory(&s, &c, 1)?;
            let st = solve_coupled_with(&c, 1, &solve_opts(&s.cfg)?)?;
            density_from_coupled(&st[0])
        }
        "polariton-ground" | "lower-polariton" => {
            let spec = parse_spec(s.cfg.str("density_spec"))?;
            let (basis, _) = s.electronic()?;
            if basis.count < spec.n_max + 1 {
                return Err(cfg_err(format!("density_spec needs states >= {}", spec.n_max + 1)));
            }
            let basis = matter_elements(basis, pol)?;
            let table = build_coupling_table(&[PhotonMode::new(s.omega(&basis)?, s.lambda_vec(lambda)?, spec.l_max)?]);
            let states = solve_polariton(&basis, &table, &spec, 3.min((spec.n_max + 1) * (spec.l_max + 1)))?;
            let idx = if which == "lower-polariton" { lower_polariton_index(&states)? } else { 0 };
            m.diagnostic("state_index", json!(idx));
            density_from_polariton(&states[idx], &basis)?
        }
        other => {
            return Err(cfg_err(format!(
                "density = `{other}`: expected exact-ground, polariton-ground or lower-polariton"
            )))
        }
    };
    m.timing("solve", t.elapsed().as_secs_f64());
    let reference = match (reference_kind.as_str(), reference_file) {
        ("self", _) => density.clone(),
        (_, Some(p)) => read_density_raw(&p, &s.grid)?,
        _ => {
            let (basis, _) = s.electronic()?;
            basis.orbitals[0].iter().map(|x| x * x).collect()
        }
    };
    let delta = density_difference(&density, &reference)?;
    let an = anisotropy(&s.grid, &density, &reference, pol)?;
    println!("anisotropy = {an:.8e}");
    m.result("anisotropy", json!(an));
    m.result("norm", json!(s.grid.integrate(&density)));
    let prov = provenance(&s.cfg, "density");
    write_density_raw(&s.out.join("density.bin"), &s.grid, &density, &prov)?;
    write_density_csv(&s.out.join("delta.csv"), &s.grid, &delta)?;
    write_density_raw(&s.out.join("delta.bin"), &s.grid, &delta, &prov)?;
    for f in ["density.bin", "density.bin.json", "delta.csv", "delta.bin", "delta.bin.json"] {
        m.file(f);
    }
    m.write()?;
    Ok(())
}

pub fn spp(cfg: RunConfig) -> Result<()> {
    let s = Setup::new(cfg)?;
    let mut m = s.start("spp")?;
    let pol = s.cfg.vec2("polarization")?;
    let (basis, _) = s.electronic()?;
    let basis = matter_elements(basis, pol)?;
    let n_es: Vec<f64> = s.cfg.list("spp_n_e")?;
    let lambdas: Vec<f64> = s.cfg.list("spp_lambdas")?;
    let detunings: Vec<f64> = s.cfg.list("spp_detunings")?;
    let mut csv = String::from("n_e,lambda,delta,L,Omega,dE,dE_TC,E0p,E1m,E1p,E2p,gap\n");
    for &n_e in &n_es {
        for &lambda in &lambdas {
            for &delta in &detunings {
                let base = SppInputs::from_basis(&basis, 1.0, s.lambda_vec(lambda)?, n_e)
                    .map_err(|e| cfg_err(e.to_string()))?;
                let inp = SppInputs { omega: base.excitation() + delta, ..base };
                inp.validate().map_err(|e| cfg_err(e.to_string()))?;
                let lv = spp_levels(&inp);
                let split = lv.e1p - lv.e1m;
                writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    sci(n_e),
                    sci(lambda),
                    sci(delta),
                    sci(lv.l),
                    sci(lv.omega_tilde),
                    sci(split),
                    sci(tavis_cummings_splitting(&inp)),
                    sci(lv.e0p),
                    sci(lv.e1m),
                    sci(lv.e1p),
                    sci(lv.e2p),
                    sci(polariton_gap(&inp)),
                )?;
            }
        }
    }
    s.write(&mut m, "spp.csv", &csv)?;
    m.write()?;
    Ok(())
}

pub fn verify_manifest(path: &Path) -> Result<()> {
    let n = crate::manifest::verify(path)?;
    println!("{n} files verified");
    Ok(())
}
