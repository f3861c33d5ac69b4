use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use pathflow::diagnostics::{
    bv_propagation_experiment, counterexample_initial_datum, cross_validate_wft_fv, inflow_fraction_bump,
    stability_experiment, tv_blowup_report, verify_flux_trace_tv, CounterexampleOptions, CounterexampleReport,
    CounterexampleSpec, TraceProblem, TvReport,
};
use pathflow::flux::piecewise_linearize;
use pathflow::front_tracking::StepFunction;
use pathflow::godunov::Boundary;
use pathflow::network::{solve_network, Network, NetworkOptions};
use pathflow::series::PiecewiseConstant;

use crate::config::{BoundaryChoice, CounterexampleSection, Mode, Profile, ScenarioConfig};
use crate::error::CliError;

/// Where a run writes its files, plus the `key=value` summary it builds up.
pub struct Output {
    dir: PathBuf,
    summary: Vec<(String, String)>,
}

impl Output {
    pub fn new(dir: &Path, command: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}", dir.display()), e))?;
        let mut out = Self {
            dir: dir.to_path_buf(),
            summary: Vec::new(),
        };
        out.put("command", command);
        Ok(out)
    }

    fn put(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.summary.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.summary.push((key.to_string(), value)),
        }
    }

    fn num(&mut self, key: &str, value: f64) {
        self.put(key, fmt(value));
    }

    fn write_file(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> pathflow::Result<()>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(format!("cannot create {}", path.display()), e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush().map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))?;
        info!("wrote {}", path.display());
        Ok(())
    }

    /// Writes `summary.txt`; the three network diagnostics are always present.
    pub fn finish(mut self) -> Result<(), CliError> {
        for key in ["max_junction_residual", "max_sum_to_one_residual", "mass_balance_error"] {
            if !self.summary.iter().any(|(k, _)| k == key) {
                self.put(key, "nan");
            }
        }
        let summary = std::mem::take(&mut self.summary);
        self.write_file("summary.txt", |w| {
            for (k, v) in &summary {
                writeln!(w, "{k}={v}")?;
            }
            Ok(())
        })
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// File-name-safe form of a road or path id.
fn slug(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn network_options(cfg: &ScenarioConfig) -> NetworkOptions {
    NetworkOptions {
        cfl: cfg.numerics.cfl,
        output_times: cfg.output_times.clone(),
        vacuum_rule: cfg.numerics.vacuum_rule.into(),
        ..NetworkOptions::default()
    }
}

pub fn simulate(cfg: &ScenarioConfig, out: &mut Output) -> Result<(), CliError> {
    cfg.validate_for(Mode::Simulate)?;
    let m = cfg.model()?;
    let net = cfg.network(1)?;
    let data = cfg.network_data(&net)?;
    let horizon = cfg.horizon()?;
    let sol = solve_network(&net, &m, &data, horizon, &network_options(cfg))?;
    info!("solved {} roads in {} steps", net.roads.len(), sol.n_steps());

    for rs in &sol.roads {
        let road = &net.roads[rs.road].id;
        out.write_file(&format!("density_{}.csv", slug(road)), |w| rs.density.write_density_csv(w))?;
        out.write_file(&format!("boundary_flux_{}.csv", slug(road)), |w| rs.density.write_trace_csv(w))?;
        for (&k, th) in &rs.thetas {
            let name = format!("theta_{}_{}.csv", slug(&net.paths[k].id), slug(road));
            out.write_file(&name, |w| th.write_csv(w))?;
        }
    }
    out.write_file("junction_audit.csv", |w| sol.write_junction_audit_csv(w))?;

    let (lo, hi) = sol.density_range();
    out.num("horizon", horizon);
    out.num("dt", sol.dt);
    out.put("n_steps", sol.n_steps());
    out.put("roads", net.roads.len());
    out.put("paths", net.paths.len());
    out.num("rho_star", m.critical_density());
    out.num("density_min", lo);
    out.num("density_max", hi);
    out.put("clamp_events", sol.junctions.iter().map(|j| j.clamp_events).sum::<usize>());
    out.num("max_junction_residual", sol.max_junction_residual());
    out.num("max_sum_to_one_residual", sol.max_sum_to_one_residual());
    out.num("mass_balance_error", sol.mass_balance_error());
    Ok(())
}

fn write_tv_row<W: Write>(w: &mut W, kind: &str, r: &TvReport) -> std::io::Result<()> {
    writeln!(
        w,
        "{kind},{},{},{},{},{},{}",
        fmt(r.x),
        r.samples,
        fmt(r.total_variation),
        fmt(r.positive_variation),
        fmt(r.negative_variation),
        fmt(r.resolution)
    )
}

fn write_counterexample(out: &mut Output, rep: &CounterexampleReport) -> Result<(), CliError> {
    out.write_file("counterexample_tv.csv", |w| {
        writeln!(w, "# pathflow-csv v1 tv-report")?;
        writeln!(w, "kind,x,samples,total_variation,positive_variation,negative_variation,resolution")?;
        write_tv_row(w, "u", &rep.tv_u)?;
        write_tv_row(w, "w", &rep.tv_w)?;
        Ok(())
    })?;
    out.write_file("counterexample_blocks.csv", |w| {
        writeln!(w, "# pathflow-csv v1 block-samples")?;
        writeln!(w, "block,t,u")?;
        for (n, t, u) in &rep.sigma_samples {
            writeln!(w, "{n},{},{}", fmt(*t), fmt(*u))?;
        }
        Ok(())
    })?;
    out.put("n_blocks", rep.n_blocks);
    out.num("horizon", rep.horizon);
    out.num("r", rep.r);
    out.num("tv_u", rep.tv_u.total_variation);
    out.num("tv_u_lower_bound", rep.tv_lower_bound);
    out.num("tv_w", rep.tv_w.total_variation);
    out.num("tv_u0", rep.tv_u0);
    out.num("rh_residual", rep.rh_residual);
    out.num("fan_edge_max", rep.fan_edge_max);
    if let Some(fv) = &rep.fv {
        out.num("fv_dx", fv.dx);
        out.num("fv_tv_u", fv.tv_u);
        out.num("fv_tv_w", fv.tv_w);
    }
    Ok(())
}

pub fn counterexample(cfg: &ScenarioConfig, blocks: Option<usize>, out: &mut Output) -> Result<(), CliError> {
    cfg.validate_for(Mode::Counterexample)?;
    let section = cfg.counterexample.clone().unwrap_or_default();
    let CounterexampleSection {
        samples_per_block,
        fv_cells,
        ..
    } = section;
    let spec = CounterexampleSpec::new(blocks.unwrap_or(section.blocks))?;
    let datum = counterexample_initial_datum(&spec, samples_per_block.max(1))?;
    out.write_file("counterexample_datum.csv", |w| {
        writeln!(w, "# pathflow-csv v1 initial-datum")?;
        writeln!(w, "x_left,x_right,u0")?;
        let bp = datum.table.breakpoints();
        let edges: Vec<f64> = std::iter::once(f64::NEG_INFINITY)
            .chain(bp.iter().copied())
            .chain(std::iter::once(f64::INFINITY))
            .collect();
        for (e, v) in edges.windows(2).zip(datum.table.values()) {
            writeln!(w, "{},{},{}", fmt(e[0]), fmt(e[1]), fmt(*v))?;
        }
        Ok(())
    })?;
    let opts = CounterexampleOptions {
        samples_per_block,
        fv_cells,
        ..CounterexampleOptions::default()
    };
    let rep = tv_blowup_report(&spec, &opts)?;
    info!("TV of the trace at x = 0 over {} blocks: {}", rep.n_blocks, rep.tv_u.total_variation);
    write_counterexample(out, &rep)
}

fn boundary(choice: BoundaryChoice, value: &Option<Profile>, side: &str) -> Result<Boundary, CliError> {
    match (choice, value) {
        (BoundaryChoice::Extrapolate, _) => Ok(Boundary::Extrapolate),
        (BoundaryChoice::Dirichlet, Some(p)) => Ok(Boundary::Dirichlet(
            p.to_series().map_err(|e| CliError::Validation(vec![format!("verify_tv.{side}_value: {e}")]))?,
        )),
        (BoundaryChoice::Dirichlet, None) => Err(CliError::Validation(vec![format!(
            "verify_tv.{side} = \"dirichlet\" needs verify_tv.{side}_value"
        )])),
    }
}

pub fn verify_tv(cfg: &ScenarioConfig, out: &mut Output) -> Result<(), CliError> {
    cfg.validate_for(Mode::VerifyTv)?;
    let s = cfg.verify_tv.as_ref().expect("checked by validate_for");
    let u0 = s
        .u0
        .to_series()
        .map_err(|e| CliError::Validation(vec![format!("verify_tv.u0: {e}")]))?;
    let problem = TraceProblem {
        u0,
        alpha: s.alpha,
        beta: s.beta,
        horizon: cfg.horizon()?,
        left: boundary(s.left, &s.left_value, "left")?,
        right: boundary(s.right, &s.right_value, "right")?,
    };
    let flux = cfg.scalar_flux()?;
    let rep = verify_flux_trace_tv(flux.as_flux(), &problem, &s.xs, &s.dxs)?;
    out.write_file("flux_trace_tv.csv", |w| rep.write_csv(w))?;
    let (lo, hi) = rep.bound_spread();
    out.num("horizon", problem.horizon);
    out.put("levels", rep.levels.len());
    out.put("probes", rep.xs.len());
    out.num("max_tv_lowest", lo);
    out.num("max_tv_highest", hi);
    out.put("unstable_probes", rep.unstable_probes(0.1, 1e-3).len());
    Ok(())
}

/// Cell count of the source road; experiment rows are labelled with it
/// after scaling by the resolution multiplier.
fn source_cells(net: &Network) -> usize {
    net.validate().map(|t| net.roads[t.source].n_cells).unwrap_or(0)
}

pub fn stability(cfg: &ScenarioConfig, out: &mut Output) -> Result<(), CliError> {
    cfg.validate_for(Mode::Stability)?;
    let s = cfg.stability.as_ref().expect("checked by validate_for");
    let m = cfg.model()?;
    let net = cfg.network(1)?;
    let base = cfg.network_data(&net)?;
    let perturbed = s
        .deltas
        .iter()
        .map(|&d| Ok((d, inflow_fraction_bump(&base, &s.path, &s.compensating, s.start, s.height, d)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let multiplier = cfg.numerics.resolutions[0];
    let build = |k: usize| cfg.network(k).expect("network checked by validate_for");
    let mut rep = stability_experiment(build, multiplier, &m, &base, &perturbed, cfg.horizon()?, &network_options(cfg))?;
    rep.n_cells = source_cells(&net) * multiplier;
    out.write_file("stability.csv", |w| rep.write_csv(w))?;
    out.put("source_cells", rep.n_cells);
    out.num("self_error_rho", rep.self_error_rho);
    out.num("self_error_mass", rep.self_error_mass);
    out.put("monotone", rep.is_monotone());
    out.num("min_decrease_ratio", rep.min_decrease_ratio());
    Ok(())
}

pub fn bv_propagation(cfg: &ScenarioConfig, out: &mut Output) -> Result<(), CliError> {
    cfg.validate_for(Mode::BvPropagation)?;
    let m = cfg.model()?;
    let net = cfg.network(1)?;
    let data = cfg.network_data(&net)?;
    let build = |k: usize| cfg.network(k).expect("network checked by validate_for");
    let mut rep = bv_propagation_experiment(
        build,
        &cfg.numerics.resolutions,
        &m,
        &data,
        cfg.horizon()?,
        &network_options(cfg),
    )?;
    for row in &mut rep.rows {
        row.n_cells *= source_cells(&net);
    }
    out.write_file("bv_propagation.csv", |w| rep.write_csv(w))?;
    out.put("source_road", &rep.source_road);
    out.num("source_bound", rep.source_bound);
    out.num("max_refinement_ratio", rep.max_ratio(1e-3));
    for i in 0..rep.rows.len() {
        out.num(&format!("source_tv_{}", rep.rows[i].n_cells), rep.source_tv(i));
    }
    Ok(())
}

/// Snaps the values of `p` to lattice indices of step `h`.
fn lattice_datum(p: &Profile, level: u32) -> Result<StepFunction, CliError> {
    let h = 2f64.powi(-(level as i32));
    let series: PiecewiseConstant = p
        .to_series()
        .map_err(|e| CliError::Validation(vec![format!("convergence.u0: {e}")]))?;
    let mut idx = Vec::new();
    for &v in series.values() {
        let j = (v / h).round();
        if (j * h - v).abs() > 1e-12 {
            return Err(CliError::Validation(vec![format!(
                "convergence.u0: value {v} is not a multiple of 2^-{level}"
            )]));
        }
        idx.push(j as i64);
    }
    Ok(StepFunction::new(level, series.breakpoints().to_vec(), idx)?)
}

pub fn convergence(cfg: &ScenarioConfig, out: &mut Output) -> Result<(), CliError> {
    cfg.validate_for(Mode::Convergence)?;
    let s = cfg.convergence.as_ref().expect("checked by validate_for");
    let flux = cfg.scalar_flux()?;
    let f = flux.as_flux();
    let pl = piecewise_linearize(|u| f.eval(u), s.level, s.range[0], s.range[1])?;
    let init = lattice_datum(&s.u0, s.level)?;
    let horizon = cfg.horizon()?;
    let window = (s.window[0], s.window[1]);
    let rows = s
        .dxs
        .iter()
        .map(|&dx| cross_validate_wft_fv(&init, &pl, horizon, window, dx))
        .collect::<pathflow::Result<Vec<_>>>()?;
    out.write_file("convergence.csv", |w| {
        writeln!(w, "# pathflow-csv v1 wft-fv-convergence")?;
        writeln!(w, "dx,l1,n_fronts")?;
        for r in &rows {
            writeln!(w, "{},{},{}", fmt(r.dx), fmt(r.l1), r.n_fronts)?;
        }
        Ok(())
    })?;
    out.num("horizon", horizon);
    out.put("level", s.level);
    out.num("max_l1", rows.iter().map(|r| r.l1).fold(0.0, f64::max));
    if let [.., a, b] = rows.as_slice() {
        if a.l1 > 0.0 && b.l1 > 0.0 {
            out.num("observed_order", (a.l1 / b.l1).ln() / (a.dx / b.dx).ln());
        }
    }
    Ok(())
}

/// Checks the config for `mode` and records the outcome.
pub fn validate(cfg: &ScenarioConfig, mode: Mode, out: &mut Output) -> Result<(), CliError> {
    cfg.validate_for(mode)?;
    out.put("checked_mode", mode.as_str());
    out.put("status", "ok");
    Ok(())
}
