//! Sampling, training and CSV output of one experiment.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use tsi_core::optim::{level_domains, train, zero_levels};
use tsi_core::pgrid::{fmt_f64, write_csv_table};
use tsi_core::stability::{check_stability_bound_pairs, StabilityReport, TransformPair, DEFAULT_DERIV_FLOOR, DEFAULT_S_QUAD};
use tsi_core::transport::read_component_csv;
use tsi_core::tsi::{objective, reconstruct, sample_curves, transform_points};
use tsi_core::{
    DescentSettings, Domain, GridFunction, LowResTransform, ParamNodeSet, SnapshotSet, TrainingSet, Transform,
    TransportField, TsiModel,
};

use crate::config::{ExperimentConfig, Source, TransformKind, VariantSpec};
use crate::error::{HarnessError, Result};
use crate::fixture::{ellipse_boundary, Fixture};
use crate::report::{compare_report, Comparison};

/// Snapshots, training targets and reference solutions of a config.
#[derive(Clone, Debug)]
pub struct ExperimentData {
    pub domain: Domain,
    pub snapshots: SnapshotSet,
    pub training: TrainingSet,
    /// Exact solutions at the evaluation parameters.
    pub exact: Vec<GridFunction>,
}

fn read_grid(domain: &Domain, path: &Path) -> Result<GridFunction> {
    let f = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let g = GridFunction::read_csv(domain, BufReader::new(f))
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    if g.codomain_dim() != 1 {
        return Err(HarnessError::Config(format!("{}: expected one value column", path.display())));
    }
    Ok(g)
}

pub fn prepare(config: &ExperimentConfig) -> Result<ExperimentData> {
    config.validate()?;
    let domain = config.domain()?;
    let (snaps, targets, exact) = match config.source()? {
        Source::Analytic(f) => {
            let sample = |mus: &[f64]| -> Result<Vec<GridFunction>> {
                mus.iter().map(|&m| Ok(GridFunction::sample(|x| f.eval(m, x), &domain)?)).collect()
            };
            (sample(&config.params.snapshots)?, sample(&config.params.training)?, sample(&config.params.eval)?)
        }
        Source::Custom => {
            let load = |files: &[PathBuf]| files.iter().map(|p| read_grid(&domain, p)).collect::<Result<Vec<_>>>();
            (
                load(&config.fixture.snapshot_files)?,
                load(&config.fixture.training_files)?,
                load(&config.fixture.eval_files)?,
            )
        }
    };
    Ok(ExperimentData {
        snapshots: SnapshotSet::new(config.snapshot_nodes()?, snaps)?,
        training: TrainingSet::new(config.training_params()?, targets)?,
        exact,
        domain,
    })
}

/// Moves `mu` off a transport-field node by `1e-9 |I|`, where `I` spans all
/// parameters of the config (unit length if they all coincide).
pub fn avoid_collision(config: &ExperimentConfig, field_nodes: &ParamNodeSet, mu: f64) -> f64 {
    let p = &config.params;
    let all = p.snapshots.iter().chain(&p.training).chain(&p.eval).chain(field_nodes.nodes()).copied();
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    let shift = 1e-9 * if hi > lo { hi - lo } else { 1.0 };
    match field_nodes.nodes().iter().find(|&&e| (mu - e).abs() < shift) {
        Some(&e) => {
            let moved = e + shift;
            log::warn!("parameter {mu} coincides with field node {e}; using {moved}");
            moved
        }
        None => mu,
    }
}

fn training_for(config: &ExperimentConfig, variant: &VariantSpec, data: &ExperimentData) -> Result<TrainingSet> {
    if variant.transform_kind()? == TransformKind::LowRes {
        return Ok(data.training.clone());
    }
    let nodes = config.field_nodes(variant)?;
    let params = data.training.params().nodes().iter().map(|&m| avoid_collision(config, &nodes, m)).collect();
    Ok(TrainingSet::new(ParamNodeSet::new(params)?, data.training.targets().to_vec())?)
}

fn eval_mu(config: &ExperimentConfig, variant: &VariantSpec, mu: f64) -> Result<f64> {
    Ok(match variant.transform_kind()? {
        TransformKind::LowRes => mu,
        TransformKind::HighRes => avoid_collision(config, &config.field_nodes(variant)?, mu),
    })
}

/// The untrained model of a variant: zero fields or identity low-resolution
/// transforms.
pub fn initial_model(config: &ExperimentConfig, variant: &VariantSpec, data: &ExperimentData) -> Result<TsiModel> {
    let transform = match variant.transform_kind()? {
        TransformKind::HighRes => {
            Transform::HighRes(zero_levels(&config.field_nodes(variant)?, &data.domain, variant.levels, variant.slip)?)
        }
        TransformKind::LowRes => Transform::LowRes(LowResTransform::identity(
            data.snapshots.param_nodes().clone(),
            data.domain.clone(),
            variant.degree.unwrap_or(1),
            variant.frozen_boundary,
        )?),
    };
    Ok(TsiModel::new(data.snapshots.clone(), transform, config.solve_settings()?, config.objective_mode()?)?)
}

/// Outcome of training one variant.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    /// The config restricted to this variant.
    pub config: ExperimentConfig,
    pub label: String,
    /// Objective after `n` steps, `n = 0..=steps`.
    pub trace: Vec<f64>,
}

impl RunReport {
    pub fn variant(&self) -> &VariantSpec {
        &self.config.variants[0]
    }

    pub fn initial(&self) -> f64 {
        self.trace[0]
    }

    pub fn final_value(&self) -> f64 {
        *self.trace.last().expect("trace holds the initial value")
    }
}

pub fn run_variant(config: &ExperimentConfig, variant: &VariantSpec, data: &ExperimentData) -> Result<(TsiModel, RunReport)> {
    let model = initial_model(config, variant, data)?;
    let training = training_for(config, variant, data)?;
    let settings = DescentSettings {
        step: variant.step,
        steps: variant.steps,
        smoother: variant.smoother_kind()?,
        levels: variant.levels,
    };
    let (trained, mut trace) = train(&model, &training, &settings)?;
    trace.push(objective(&trained, &training)?);
    if trace.iter().any(|v| !v.is_finite()) {
        return Err(tsi_core::Error::Numerical { stage: "training", detail: format!("variant {}", variant.label) }.into());
    }
    let mut single = config.clone();
    single.variants = vec![variant.clone()];
    Ok((trained, RunReport { config: single, label: variant.label.clone(), trace }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub runs: Vec<RunReport>,
    pub comparison: Comparison,
}

/// Files written so far, removed again if the run fails.
struct Output {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), created_dir, files: vec![], dirs: vec![] })
    }

    fn subdir(&mut self, name: &str) -> Result<()> {
        let p = self.dir.join(name);
        if !p.exists() {
            fs::create_dir_all(&p).map_err(|e| HarnessError::io(&p, e))?;
            self.dirs.push(p);
        }
        Ok(())
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        self.files.push(path.clone());
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).map_err(|e| HarnessError::io(&path, e))
    }

    fn discard(self) {
        if self.created_dir {
            let _ = fs::remove_dir_all(&self.dir);
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

/// Trains every variant of `config` and writes the results to `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    let mut out = Output::new(out_dir)?;
    match run_into(config, &mut out) {
        Ok(r) => Ok(r),
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

fn run_into(config: &ExperimentConfig, out: &mut Output) -> Result<ExperimentReport> {
    let data = prepare(config)?;
    out.write("config.toml", |w| w.write_all(config.to_toml().as_bytes()))?;
    let mut runs = Vec::new();
    let mut models = Vec::new();
    for variant in &config.variants {
        log::info!("training {} ({} steps)", variant.label, variant.steps);
        let (model, report) = run_variant(config, variant, &data)?;
        out.write(&format!("trace_{}.csv", variant.label), |w| {
            writeln!(w, "n,error")?;
            for (n, v) in report.trace.iter().enumerate() {
                writeln!(w, "{n},{}", fmt_f64(*v))?;
            }
            Ok(())
        })?;
        write_checkpoint(out, &variant.label, &model)?;
        runs.push(report);
        models.push(model);
    }

    for (k, (&mu, exact)) in config.params.eval.iter().zip(&data.exact).enumerate() {
        let mut names = vec!["exact".to_string()];
        let mut cols = vec![exact.values().to_vec()];
        for (j, s) in data.snapshots.snapshots().iter().enumerate() {
            names.push(format!("snapshot {j}"));
            cols.push(s.values().to_vec());
        }
        for (v, m) in config.variants.iter().zip(&models) {
            names.push(v.label.clone());
            cols.push(reconstruct(m, eval_mu(config, v, mu)?)?.into_values());
        }
        write_table(out, &format!("reconstruction_{k}.csv"), &data.domain, &names, &cols)?;

        if data.domain.dim() == 1 {
            let x = data.domain.node_coords();
            let mut names = Vec::new();
            let mut cols = Vec::new();
            for (v, m) in config.variants.iter().zip(&models) {
                for (j, t) in transform_points(m, eval_mu(config, v, mu)?, &x)?.into_iter().enumerate() {
                    names.push(format!("{} xt {j}", v.label));
                    cols.push(t);
                }
            }
            write_table(out, &format!("transform_{k}.csv"), &data.domain, &names, &cols)?;
        } else {
            write_curves(config, out, k, mu, &data, &models)?;
        }
    }

    out.write("summary.csv", |w| {
        writeln!(w, "label,transform,smoother,step,steps,initial,final")?;
        for r in &runs {
            let v = r.variant();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.label,
                v.transform,
                v.smoother,
                fmt_f64(v.step),
                v.steps,
                fmt_f64(r.initial()),
                fmt_f64(r.final_value())
            )?;
        }
        Ok(())
    })?;
    let comparison = compare_report(&runs)?;
    out.write("compare.csv", |w| comparison.write_csv(w))?;
    Ok(ExperimentReport { name: config.name.clone(), runs, comparison })
}

fn write_table(out: &mut Output, name: &str, domain: &Domain, names: &[String], cols: &[Vec<f64>]) -> Result<()> {
    let named: Vec<(&str, &[f64])> = names.iter().map(|s| s.as_str()).zip(cols.iter().map(|c| c.as_slice())).collect();
    out.write(name, |w| write_csv_table(w, domain, &named))
}

/// Parameter samples for curve plots: an even grid over the hull of `mu`
/// and the snapshot nodes, plus those points themselves.
pub fn curve_params(mu: f64, snapshot_nodes: &[f64], samples: usize) -> Vec<f64> {
    let lo = snapshot_nodes.iter().fold(mu, |a, &b| a.min(b));
    let hi = snapshot_nodes.iter().fold(mu, |a, &b| a.max(b));
    let n = samples.max(2);
    let mut etas: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    etas.push(mu);
    etas.extend_from_slice(snapshot_nodes);
    etas.sort_by(f64::total_cmp);
    etas.dedup();
    etas
}

/// Seed points of the curve plots: on the exact boundary for the ellipse,
/// otherwise an even spread over the domain.
pub fn seed_points(config: &ExperimentConfig, domain: &Domain, mu: f64) -> Result<Vec<[f64; 2]>> {
    let n = config.output.seed_points;
    Ok(match config.source()? {
        Source::Analytic(Fixture::Ellipse) => ellipse_boundary(mu, n),
        _ => (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) / n as f64;
                let [lx, ly] = [domain.lower()[0], domain.lower()[1]];
                let [ux, uy] = [domain.upper()[0], domain.upper()[1]];
                [lx + t * (ux - lx), ly + (1.0 - t) * (uy - ly)]
            })
            .collect(),
    })
}

fn write_curves(
    config: &ExperimentConfig,
    out: &mut Output,
    k: usize,
    mu: f64,
    data: &ExperimentData,
    models: &[TsiModel],
) -> Result<()> {
    let seeds = seed_points(config, &data.domain, mu)?;
    let etas = curve_params(mu, data.snapshots.param_nodes().nodes(), config.output.curve_samples);
    let x: Vec<f64> = seeds.iter().flatten().copied().collect();
    let mut header = vec!["eta".to_string()];
    let mut cols: Vec<Vec<Vec<f64>>> = Vec::new();
    for (v, m) in config.variants.iter().zip(models) {
        if m.fields().is_none() {
            continue;
        }
        for i in 0..seeds.len() {
            header.push(format!("{} x{i}", v.label));
            header.push(format!("{} y{i}", v.label));
        }
        cols.push(sample_curves(m, eval_mu(config, v, mu)?, &etas, &x)?);
    }
    for i in 0..seeds.len() {
        header.push(format!("initial x{i}"));
        header.push(format!("initial y{i}"));
    }
    out.write(&format!("curves_{k}.csv"), |w| {
        writeln!(w, "{}", header.join(","))?;
        for (r, eta) in etas.iter().enumerate() {
            let mut row = vec![fmt_f64(*eta)];
            for c in &cols {
                row.extend(c[r].iter().map(|v| fmt_f64(*v)));
            }
            row.extend(x.iter().map(|v| fmt_f64(*v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })
}

fn write_checkpoint(out: &mut Output, label: &str, model: &TsiModel) -> Result<()> {
    out.subdir("fields")?;
    out.subdir(&format!("fields/{label}"))?;
    match model.transform() {
        Transform::HighRes(levels) => {
            for (l, f) in levels.iter().enumerate() {
                for e in 0..f.param_nodes().len() {
                    for a in 0..f.dim() {
                        out.write(&format!("fields/{label}/level{l}_eta{e}_axis{a}.csv"), |w| {
                            f.write_component_csv(e, a, w)
                        })?;
                    }
                }
            }
        }
        Transform::LowRes(t) => out.write(&format!("fields/{label}/lowres.csv"), |w| t.write_csv(w))?,
    }
    Ok(())
}

/// Rebuilds the trained model of `label` from a run directory.
pub fn load_trained(run_dir: &Path, label: &str) -> Result<(ExperimentConfig, ExperimentData, TsiModel)> {
    let config = ExperimentConfig::load(&run_dir.join("config.toml"))?;
    let variant = config
        .variants
        .iter()
        .find(|v| v.label == label)
        .ok_or_else(|| HarnessError::Config(format!("run has no variant {label:?}")))?
        .clone();
    let data = prepare(&config)?;
    let initial = initial_model(&config, &variant, &data)?;
    let dir = run_dir.join("fields").join(label);
    let open = |name: String| -> Result<BufReader<File>> {
        let p = dir.join(name);
        File::open(&p).map(BufReader::new).map_err(|e| HarnessError::io(&p, e))
    };
    let transform = match initial.transform() {
        Transform::HighRes(levels) => {
            let doms = level_domains(&data.domain, levels.len())?;
            let mut fields = Vec::new();
            for (l, (f, dom)) in levels.iter().zip(&doms).enumerate() {
                let mut comps = Vec::new();
                for e in 0..f.param_nodes().len() {
                    let mut per = Vec::new();
                    for a in 0..f.dim() {
                        let (eta, comp, g) = read_component_csv(dom, open(format!("level{l}_eta{e}_axis{a}.csv"))?)?;
                        if comp != a || eta != f.param_nodes().nodes()[e] {
                            return Err(HarnessError::Config(format!("checkpoint of level {l} does not match the config")));
                        }
                        per.push(g);
                    }
                    comps.push(per);
                }
                fields.push(TransportField::from_components(f.param_nodes().clone(), comps, f.slip())?);
            }
            Transform::HighRes(fields)
        }
        Transform::LowRes(t) => Transform::LowRes(t.read_values_csv(open("lowres.csv".into())?)?),
    };
    let model = initial.with_transform(transform)?;
    Ok((config, data, model))
}

/// Perturbation bound for the trained transform of `label` against the same
/// transform shifted by `eps` along the first axis, at the first evaluation
/// parameter.
pub fn stability_of_run(run_dir: &Path, label: Option<&str>, eps: f64) -> Result<StabilityReport> {
    if !eps.is_finite() {
        return Err(HarnessError::Config("perturbation must be finite".into()));
    }
    let config = ExperimentConfig::load(&run_dir.join("config.toml"))?;
    let label = label.unwrap_or(&config.variants[0].label).to_string();
    let (config, data, model) = load_trained(run_dir, &label)?;
    let variant = config.variants.iter().find(|v| v.label == label).expect("variant exists");
    let (&mu0, exact) = config
        .params
        .eval
        .first()
        .zip(data.exact.first())
        .ok_or_else(|| HarnessError::Config("the run has no evaluation parameter".into()))?;
    let mu = eval_mu(&config, variant, mu0)?;
    let d = data.domain.dim();
    let x0 = transform_points(&model, mu, &data.domain.node_coords())?;
    let pairs = x0
        .into_iter()
        .map(|a| {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| if i % d == 0 { v + eps } else { *v }).collect();
            TransformPair::new(data.domain.clone(), a, b)
        })
        .collect::<tsi_core::Result<Vec<_>>>()?;
    Ok(check_stability_bound_pairs(&data.snapshots, mu, &pairs, exact, DEFAULT_S_QUAD, DEFAULT_DERIV_FLOOR)?)
}
