use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use boseloc::bloch::{band_structure, bloch_projection, standing_wave_score};
use boseloc::detector::{
    fraction_scan, reconstruct_state, refine_chi, uv_grid, write_reports_jsonl, Detector, PlacementTable, StateClass,
};
use boseloc::dynamics::{project_onto_initial_eigenstates, run_protocol, EvolutionRecord, ExtendedLattice, ProtocolKind, ProtocolOutcome, ProtocolSchedule};
use boseloc::fockspace::{ManyBodyState, SymmetricTensor};
use boseloc::format::g12;
use boseloc::model::{build_hamiltonian, Boundary, ModelParams};
use boseloc::observables::correlations;
use boseloc::spectstats::{aggregate_levels, build_ensemble, poisson_mass, SpacingStatistics};
use serde_json::json;

use crate::config::{Format, RunConfig};
use crate::table::{save_json, Cell, Table};
use crate::CliError;

pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub out: &'a Path,
    pub format: Format,
}

impl Context<'_> {
    fn save(&self, t: &Table, stem: &str) -> Result<(), CliError> {
        Ok(t.save(self.out, stem, self.format)?)
    }

    fn summary(&self, v: serde_json::Value) -> Result<(), CliError> {
        println!("{}", serde_json::to_string(&v).expect("serializable"));
        Ok(save_json(self.out, "summary.json", &v)?)
    }
}

/// Configuration checks of `command`, as run before any computation.
pub fn check(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    cfg.thresholds.validate()?;
    match command {
        "rstats" => cfg.ensemble.as_ref().ok_or_else(|| CliError::Config("missing [ensemble] section".into()))?.validate()?,
        "protocol" => {
            cfg.model()?;
            for &k in &cfg.protocol.kinds {
                cfg.schedule(k)?;
            }
        }
        "scan" => {
            let m = cfg.model()?;
            if cfg.scan.is_empty() {
                return Err(CliError::Config("missing [[scan]] section".into()));
            }
            for g in &cfg.scan {
                ModelParams { sites: g.sites.unwrap_or(m.sites), ..m.clone() }.validate()?;
            }
        }
        _ => {
            cfg.model()?;
        }
    }
    Ok(())
}

fn occupations(occ: &[u8]) -> String {
    occ.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ")
}

fn write_file(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    f(&mut w)?;
    Ok(w.flush()?)
}

/// `c1.csv`, `c2.csv` and (for three or more bosons) `c3.csv` under `prefix`.
fn write_correlations(dir: &Path, prefix: &str, state: &ManyBodyState) -> Result<(), CliError> {
    let order = state.basis().particles().min(3);
    let c = correlations(state, order)?;
    write_file(dir, &format!("{prefix}c1.csv"), |w| c.write_c1_csv(w))?;
    if order >= 2 {
        write_file(dir, &format!("{prefix}c2.csv"), |w| c.write_c2_csv(w))?;
    }
    if order >= 3 {
        write_file(dir, &format!("{prefix}c3.csv"), |w| c.write_c3_csv(w))?;
    }
    Ok(())
}

/// One-body density of a normalized symmetric tensor.
fn tensor_density(t: &SymmetricTensor) -> Vec<f64> {
    let mut idx = vec![0; t.order()];
    let mut rho = vec![0.0; t.extent()];
    for (flat, v) in t.values().iter().enumerate() {
        t.multi_index(flat, &mut idx);
        for &i in &idx {
            rho[i] += v.norm_sqr();
        }
    }
    rho
}

pub fn spectrum(ctx: &Context) -> Result<(), CliError> {
    let p = ctx.cfg.model()?;
    let h = build_hamiltonian(p)?;
    let opts = &ctx.cfg.spectrum;
    if let Some(&k) = opts.eigenvectors.iter().find(|&&k| k >= h.dim()) {
        return Err(CliError::Config(format!("eigenvector {k} requested from a {}-state spectrum", h.dim())));
    }
    if opts.dump_matrix {
        write_file(ctx.out, "hamiltonian.csv", |w| h.write_csv(w))?;
    }
    let eig = h.diagonalize()?;
    let mut t = Table::bare("energy");
    for &e in &eig.eigenvalues {
        t.push(vec![e.into()]);
    }
    ctx.save(&t, "eigenvalues")?;
    let mut picked = opts.eigenvectors.clone();
    for &target in &opts.energies {
        let nearest = (0..eig.len())
            .min_by(|&a, &b| (eig.eigenvalues[a] - target).abs().total_cmp(&(eig.eigenvalues[b] - target).abs()))
            .expect("nonempty spectrum");
        picked.push(nearest);
    }
    picked.sort_unstable();
    picked.dedup();
    for &k in &picked {
        let v = eig.vector(k);
        let mut t = Table::new(&["index", "occupations", "re", "im"]);
        for (i, c) in v.iter().enumerate() {
            t.push(vec![i.into(), occupations(h.basis.state(i).occupations()).into(), c.re.into(), c.im.into()]);
        }
        ctx.save(&t, &format!("eigenvector_{k}"))?;
        if opts.correlations {
            write_correlations(ctx.out, &format!("eigenvector_{k}_"), &h.eigenstate(&eig, k))?;
        }
    }
    if !picked.is_empty() {
        let mut t = Table::new(&["index", "energy"]);
        for &k in &picked {
            t.push(vec![k.into(), eig.eigenvalues[k].into()]);
        }
        ctx.save(&t, "dumped")?;
    }
    println!("{} eigenvalues in [{}, {}]", eig.len(), g12(eig.eigenvalues[0]), g12(*eig.eigenvalues.last().unwrap()));
    Ok(())
}

const CLASSES: [StateClass; 5] = [
    StateClass::IndependentALL,
    StateClass::CorrelatedALL,
    StateClass::OneLocalized,
    StateClass::TwoParticleALL,
    StateClass::NotSelfLocalized,
];

pub fn classify(ctx: &Context) -> Result<(), CliError> {
    let p = ctx.cfg.model()?;
    ctx.cfg.thresholds.validate()?;
    let us = &ctx.cfg.classify.interactions;
    if us.is_empty() {
        let v = classify_one(ctx, p, ctx.out)?;
        return ctx.summary(v);
    }
    let mut all = Vec::new();
    for &u in us {
        let dir = ctx.out.join(format!("U{}", g12(u)));
        std::fs::create_dir_all(&dir)?;
        let v = classify_one(ctx, &ModelParams { interaction: u, ..p.clone() }, &dir)?;
        save_json(&dir, "summary.json", &v)?;
        all.push(v);
    }
    ctx.summary(serde_json::Value::Array(all))
}

fn classify_one(ctx: &Context, p: &ModelParams, dir: &Path) -> Result<serde_json::Value, CliError> {
    let t = &ctx.cfg.thresholds;
    let h = build_hamiltonian(p)?;
    let eig = h.diagonalize()?;
    let reports = Detector::new(p, t)?.classify_spectrum(&h, &eig)?;
    write_file(dir, "reports.jsonl", |w| write_reports_jsonl(w, &reports))?;
    let n = reports.len();
    let mut table = Table::new(&["class", "count", "fraction"]);
    let mut counts = serde_json::Map::new();
    for c in CLASSES {
        let k = reports.iter().filter(|r| r.class == c).count();
        table.push(vec![c.name().into(), k.into(), (k as f64 / n as f64).into()]);
        counts.insert(c.name().into(), k.into());
    }
    table.save(dir, "fractions", ctx.format)?;
    let limit = ctx.cfg.classify.correlations;
    if limit > 0 {
        let states = dir.join("states");
        std::fs::create_dir_all(&states)?;
        for c in CLASSES.iter().filter(|c| c.is_self_localized()) {
            for (k, r) in reports.iter().enumerate().filter(|(_, r)| r.class == *c).take(limit) {
                let prefix = format!("{}_{k}_", c.name());
                let psi = h.eigenstate(&eig, k);
                write_correlations(&states, &prefix, &psi)?;
                if let Some(chi) = &r.chi {
                    let mut t = Table::new(&["site", "value"]);
                    for (i, x) in tensor_density(chi).into_iter().enumerate() {
                        t.push(vec![(i + 1).into(), x.into()]);
                    }
                    t.save(&states, &format!("{prefix}chi_c1"), Format::Csv)?;
                }
                if let Some(phi) = &r.phi {
                    let refined = refine_chi(&psi, phi, p, ctx.cfg.thresholds.include_pair_breaking)?;
                    let mut rec = reconstruct_state(&PlacementTable::for_state(&psi)?, phi, &refined.chi)?;
                    rec.normalize()?;
                    write_correlations(&states, &format!("{prefix}effective_"), &rec)?;
                }
            }
        }
    }
    let accepted = reports.iter().filter(|r| r.class.is_self_localized()).count();
    Ok(json!({ "interaction": p.interaction, "states": n, "self_localized": accepted, "counts": counts }))
}

pub fn scan(ctx: &Context) -> Result<(), CliError> {
    let base = ctx.cfg.model()?;
    if ctx.cfg.scan.is_empty() {
        return Err(CliError::Config("missing [[scan]] section".into()));
    }
    ctx.cfg.thresholds.validate()?;
    let mut labels = Vec::new();
    let mut grid = Vec::new();
    for g in &ctx.cfg.scan {
        if g.interactions.is_empty() || g.modulations.is_empty() {
            return Err(CliError::Config("scan needs at least one interaction and one modulation".into()));
        }
        let base = ModelParams { sites: g.sites.unwrap_or(base.sites), ..base.clone() };
        base.validate()?;
        let mut points = uv_grid(&base, &g.interactions, &g.modulations);
        if !g.phases.is_empty() {
            points = points
                .iter()
                .flat_map(|p| g.phases.iter().map(move |&xi| ModelParams { phase: xi, ..p.clone() }))
                .collect();
        }
        labels.extend(std::iter::repeat_n(g.label.as_str(), points.len()));
        grid.extend(points);
    }
    let rows = fraction_scan(&grid, &ctx.cfg.thresholds)?;
    let mut t = Table::new(&[
        "grid",
        "U",
        "V",
        "xi",
        "total",
        "independent",
        "correlated",
        "one_localized",
        "two_particle",
        "fraction_independent",
        "fraction_correlated",
        "fraction_one_localized",
        "fraction_two_particle",
    ]);
    for (label, r) in labels.iter().zip(&rows) {
        t.push(vec![
            (*label).into(),
            r.interaction.into(),
            r.modulation.into(),
            r.phase.into(),
            r.total.into(),
            r.independent.into(),
            r.correlated.into(),
            r.one_localized.into(),
            r.two_particle.into(),
            r.fraction_independent().into(),
            r.fraction_correlated().into(),
            r.fraction_one_localized().into(),
            r.fraction_two_particle().into(),
        ]);
    }
    ctx.save(&t, "fractions")?;
    println!("{} grid points", rows.len());
    Ok(())
}

fn histogram_table(st: &SpacingStatistics) -> Table {
    let h = &st.histogram;
    let mut t = Table::new(&["bin_center", "density", "poisson_density"]);
    for ((c, d), e) in h.centers().iter().zip(&h.densities).zip(h.edges.windows(2)) {
        t.push(vec![(*c).into(), (*d).into(), (poisson_mass(e[0], e[1]) / (e[1] - e[0])).into()]);
    }
    t
}

pub fn rstats(ctx: &Context) -> Result<(), CliError> {
    let base = ctx.cfg.ensemble.as_ref().ok_or_else(|| CliError::Config("missing [ensemble] section".into()))?;
    base.validate()?;
    let us = match ctx.cfg.rstats.interactions.as_slice() {
        [] => vec![base.params.interaction],
        u => u.to_vec(),
    };
    let mut summary = Table::new(&["U", "samples", "ratios", "excluded", "mean_r", "std_error", "l1_distance_to_poisson"]);
    let mut samples_t = Table::new(&["U", "xi", "energy", "ipr_phi"]);
    let mut pooled = Vec::new();
    for &u in &us {
        let mut cfg = base.clone();
        cfg.params.interaction = u;
        let samples = build_ensemble(&cfg)?;
        let levels = samples.iter().map(|s| s.hamiltonian.eigenvalues()).collect::<Result<Vec<_>, _>>()?;
        let st = aggregate_levels(&levels, cfg.exclude_gap_edges, cfg.gap_count, cfg.bins)?;
        for s in &samples {
            samples_t.push(vec![u.into(), s.xi.into(), s.energy.into(), s.ipr_phi.into()]);
        }
        summary.push(vec![
            u.into(),
            st.n_samples.into(),
            st.r_values.len().into(),
            st.excluded_count.into(),
            st.mean_r.into(),
            st.std_error.into(),
            st.histogram.l1_distance_to_poisson().into(),
        ]);
        ctx.save(&histogram_table(&st), &format!("histogram_U{}", g12(u)))?;
        let mut r = Table::new(&["r"]);
        for &x in &st.r_values {
            r.push(vec![x.into()]);
        }
        ctx.save(&r, &format!("r_U{}", g12(u)))?;
        println!("U={}: {} samples, <r> = {} +- {}", g12(u), st.n_samples, g12(st.mean_r), g12(st.std_error));
        pooled.extend(levels);
    }
    let all = aggregate_levels(&pooled, base.exclude_gap_edges, base.gap_count, base.bins)?;
    summary.push(vec![
        "pooled".into(),
        all.n_samples.into(),
        all.r_values.len().into(),
        all.excluded_count.into(),
        all.mean_r.into(),
        all.std_error.into(),
        all.histogram.l1_distance_to_poisson().into(),
    ]);
    ctx.save(&summary, "rstats")?;
    ctx.save(&samples_t, "samples")?;
    ctx.save(&histogram_table(&all), "histogram_pooled")?;
    Ok(())
}

pub fn bloch(ctx: &Context) -> Result<(), CliError> {
    let p = ctx.cfg.model()?;
    let bands = band_structure(&p.with_particles(1).with_boundary(Boundary::Periodic))?;
    let mut t = Table::new(&["band", "k", "energy"]);
    for (b, band) in bands.bands.iter().enumerate() {
        for (k, e) in bands.momenta.iter().zip(band) {
            t.push(vec![b.into(), (*k).into(), (*e).into()]);
        }
    }
    ctx.save(&t, "bands")?;
    if !ctx.cfg.bloch.project {
        return Ok(());
    }
    if p.particles != 2 {
        return Err(CliError::Config("band projections need a two-particle [model]".into()));
    }
    let h = build_hamiltonian(p)?;
    let eig = h.diagonalize()?;
    let reports = Detector::new(p, &ctx.cfg.thresholds)?.classify_spectrum(&h, &eig)?;
    let middle = bands.middle_pair();
    let mut weights = Table::new(&["state", "energy", "band", "k", "weight"]);
    let mut scores = Table::new(&["state", "energy", "score", "middle_band_weight"]);
    let mut worst: f64 = 1.0;
    for (i, r) in reports.iter().enumerate().filter(|(_, r)| r.class == StateClass::TwoParticleALL) {
        let w = bloch_projection(r.phi.as_ref().expect("accepted states carry phi"), &bands)?;
        for (b, row) in w.weights.iter().enumerate() {
            for (k, x) in w.momenta.iter().zip(row) {
                weights.push(vec![i.into(), r.energy.into(), b.into(), (*k).into(), (*x).into()]);
            }
        }
        let score = standing_wave_score(&w);
        worst = worst.min(score);
        let mid: Cell = middle.map(|(a, b)| w.band_weight(a) + w.band_weight(b)).into();
        scores.push(vec![i.into(), r.energy.into(), score.into(), mid]);
    }
    ctx.save(&weights, "weights")?;
    ctx.save(&scores, "scores")?;
    println!("{} accepted states, minimum standing-wave score {}", scores.rows.len(), g12(worst));
    Ok(())
}

/// Sites 1-based, auxiliary sites last.
fn density_table(rec: &EvolutionRecord) -> Table {
    let mut d = Table::new(&["t", "site", "density"]);
    for (t, row) in rec.times.iter().zip(&rec.densities) {
        for (j, x) in row.iter().enumerate() {
            d.push(vec![(*t).into(), (j + 1).into(), (*x).into()]);
        }
    }
    d
}

fn protocol_run(base: &ModelParams, kind: ProtocolKind, s: &ProtocolSchedule) -> Result<(ExtendedLattice, ProtocolOutcome), CliError> {
    let lat = ExtendedLattice::for_kind(base, kind)?;
    let out = run_protocol(&lat, s)?;
    Ok((lat, out))
}

pub fn protocol(ctx: &Context) -> Result<(), CliError> {
    let p = ctx.cfg.model()?;
    let opts = &ctx.cfg.protocol;
    if opts.kinds.is_empty() {
        return Err(CliError::Config("[protocol] kinds is empty".into()));
    }
    let mut summaries = Vec::new();
    for &kind in &opts.kinds {
        let s = ctx.cfg.schedule(kind)?;
        let dir = if opts.kinds.len() > 1 { ctx.out.join(kind_name(kind)) } else { ctx.out.to_path_buf() };
        std::fs::create_dir_all(&dir)?;
        let (lat, out) = protocol_run(p, kind, &s)?;

        let mut sched = Table::new(&["t", "va", "j_prime"]);
        for &t in &out.record.times {
            sched.push(vec![t.into(), s.va(t).into(), s.j_prime_at(t).into()]);
        }
        sched.save(&dir, "schedule", ctx.format)?;

        density_table(&out.record).save(&dir, "densities", ctx.format)?;

        let tab = project_onto_initial_eigenstates(&out.state_t2, &lat, &s, &ctx.cfg.thresholds, opts.classify_above)?;
        let mut pt = Table::new(&["energy", "probability", "lattice_weight", "class"]);
        for e in &tab.entries {
            pt.push(vec![e.energy.into(), e.probability.into(), e.lattice_weight.into(), e.class.map(|c| c.name()).into()]);
        }
        pt.save(&dir, "projection", ctx.format)?;

        let mut v = json!({
            "kind": kind,
            "interaction": p.interaction,
            "transfer_efficiency": out.transfer_efficiency,
            "retention": out.retention,
            "norm_drift": out.norm_drift(),
            "energy_drift": out.energy_drift,
            "self_localized_projection": tab.self_localized(),
        });
        if let Some(u) = opts.reference_interaction {
            let (_, r) = protocol_run(&ModelParams { interaction: u, ..p.clone() }, kind, &s)?;
            density_table(&r.record).save(&dir, "densities_reference", ctx.format)?;
            v["reference"] = json!({
                "interaction": u,
                "retention": r.retention,
                "norm_drift": r.norm_drift(),
                "transfer_efficiency": r.transfer_efficiency,
            });
            v["retention_ratio"] = json!(out.retention / r.retention);
        }
        save_json(&dir, "summary.json", &v)?;
        summaries.push(v);
    }
    println!("{}", serde_json::to_string(&summaries).expect("serializable"));
    Ok(())
}

fn kind_name(kind: ProtocolKind) -> &'static str {
    match kind {
        ProtocolKind::Correlated => "correlated",
        ProtocolKind::Independent => "independent",
    }
}
