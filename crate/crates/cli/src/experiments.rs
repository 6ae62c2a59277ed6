//! One runner per experiment id. Each writes its tables into the bundle and
//! leaves scalar results in the manifest summary.

use rayon::prelude::*;
use serde_json::json;
use trimode::classical::monte_carlo;
use trimode::fock::{cooling_predicate, decompose, CoolingVerdict, Mode, ModeTriple, ThermalInit};
use trimode::incoherent::{evolve_dephasing_cached, evolve_spontaneous};
use trimode::open_system::{self, OpenSystemOptions};
use trimode::trace::EnergyTrace;
use trimode::unitary::{
    self, distribution_statistics, gap_histogram, purity_decay, reduced_distribution, thermal_entropy,
    transient_extremum, EigenCache, Extremum,
};

use crate::config::{ExperimentConfig, GridSpec};
use crate::error::CliError;
use crate::output::{Bundle, Cell};

type Run = Result<(), CliError>;

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    modes: ModeTriple<f64>,
}

impl Ctx<'_> {
    fn num<T>(&self, r: trimode::Result<T>) -> Result<T, CliError> {
        r.map_err(|source| CliError::Numeric {
            experiment: self.cfg.experiment.id().into(),
            source,
        })
    }

    fn init(&self) -> Result<ThermalInit<f64>, CliError> {
        let spec = self.cfg.init.as_ref().expect("experiment defines init");
        spec.resolve(&self.modes).map_err(|e| CliError::config("init", e.to_string()))
    }

    fn threshold(&self) -> f64 {
        self.cfg.threshold.expect("experiment defines threshold")
    }

    fn times(&self) -> Vec<f64> {
        self.cfg.time.expect("experiment defines time").samples()
    }
}

pub fn run(cfg: &ExperimentConfig, bundle: &mut Bundle) -> Run {
    use crate::config::Experiment::*;
    let ctx = Ctx {
        cfg,
        modes: cfg.mode_triple(),
    };
    if let Some(t) = cfg.threshold {
        bundle.tolerances.insert("truncation_threshold".into(), t);
    }
    match cfg.experiment {
        Evolve => evolve(&ctx, bundle),
        PhaseDiagram => phase_diagram(&ctx, bundle),
        FanoMap => fano_map(&ctx, bundle),
        PanelSweep => panel_sweep(&ctx, bundle),
        IncoherentCompare => incoherent_compare(&ctx, bundle),
        EquilibrationTex => equilibration_tex(&ctx, bundle),
        PurityDecay => purity(&ctx, bundle),
        GapSpectrum => gaps(&ctx, bundle),
        ClassicalCompare => classical_compare(&ctx, bundle),
        OpenSystemSweep => open_sweep(&ctx, bundle),
    }
}

fn verdict_label(v: CoolingVerdict) -> &'static str {
    match v {
        CoolingVerdict::Cooling => "cooling",
        CoolingVerdict::Heating => "heating",
        CoolingVerdict::Stationary => "stationary",
    }
}

fn extremum_json(e: Option<Extremum<f64>>) -> serde_json::Value {
    match e {
        Some(e) => json!({"t_ex": e.time, "value": e.value, "kind": if e.is_minimum { "min" } else { "max" }}),
        None => serde_json::Value::Null,
    }
}

fn note_extremum_tolerances(bundle: &mut Bundle) {
    bundle
        .tolerances
        .insert("stationary_excursion".into(), unitary::STATIONARY_EXCURSION);
    bundle
        .tolerances
        .insert("extremum_max_step".into(), unitary::EXTREMUM_MAX_STEP);
}

// Energies in units of ω of each mode, with σ constants.
fn sigma_rows(modes: &ModeTriple<f64>, nbar: [f64; 3]) -> Vec<Vec<Cell>> {
    Mode::ALL
        .iter()
        .map(|&m| {
            let n = nbar[m.index()];
            vec![m.label().into(), n.into(), modes.energy(m, n).into()]
        })
        .collect()
}

fn evolve(ctx: &Ctx, bundle: &mut Bundle) -> Run {
    let init = ctx.init()?;
    let ens = ctx.num(decompose(&init, ctx.threshold()))?;
    let cache = ctx.num(EigenCache::for_ensemble(&ens))?;
    let trace = ctx.num(unitary::evolve_cached(&ens, &cache, &ctx.modes, &ctx.times()))?;
    let sigma = ctx.num(unitary::time_averaged_state_cached(&ens, &cache))?;
    bundle.write_trace("trace", &trace)?;
    bundle.write_table("sigma.csv", &["mode", "nbar", "eps"], &sigma_rows(&ctx.modes, sigma.occupations()))?;
    note_extremum_tolerances(bundle);
    let (n_sum, m_sum) = ens.conserved_means();
    bundle.summary.insert("verdict".into(), json!(verdict_label(cooling_predicate(&init))));
    bundle.summary.insert("conserved_means".into(), json!([n_sum, m_sum]));
    bundle.summary.insert(
        "cold_extremum".into(),
        extremum_json(ctx.num(transient_extremum(&trace, Mode::Cold))?),
    );
    Ok(())
}

fn grid_points(grid: &GridSpec) -> Vec<(f64, f64)> {
    grid.eps_h
        .values()
        .into_iter()
        .flat_map(|h| grid.eps_w.values().into_iter().map(move |w| (h, w)))
        .collect()
}

fn grid_init(ctx: &Ctx, eps_h: f64, eps_w: f64, nbar_c: f64) -> Result<ThermalInit<f64>, CliError> {
    ctx.num(ThermalInit::from_occupations(eps_h - 0.5, eps_w - 0.5, nbar_c))
}

// Stationary line `(1/n̄_h + 1) = (1/n̄_w + 1)(1/n̄_c + 1)` in energy quanta.
fn write_boundary(bundle: &mut Bundle, grid: &GridSpec) -> Run {
    let c = grid.nbar_c;
    let fine = crate::config::Axis {
        points: (grid.eps_h.points * 8).max(2),
        ..grid.eps_h
    };
    let mut rows = Vec::new();
    for eh in fine.values() {
        let h = eh - 0.5;
        if h <= 0.0 || c <= 0.0 {
            continue;
        }
        let denom = (1.0 / h + 1.0) / (1.0 / c + 1.0) - 1.0;
        if denom <= 0.0 {
            continue;
        }
        let ew = 1.0 / denom + 0.5;
        if ew >= grid.eps_w.min && ew <= grid.eps_w.max {
            rows.push(vec![eh.into(), ew.into()]);
        }
    }
    bundle.write_table("boundary.csv", &["eps_h", "eps_w"], &rows)
}

fn phase_diagram(ctx: &Ctx, bundle: &mut Bundle) -> Run {
    let grid = ctx.cfg.grid.expect("grid");
    let threshold = ctx.threshold();
    let rows = grid_points(&grid)
        .par_iter()
        .map(|&(eh, ew)| {
            let init = grid_init(ctx, eh, ew, grid.nbar_c)?;
            let ens = ctx.num(decompose(&init, threshold))?;
            let sigma = ctx.num(unitary::time_averaged_state(&ens))?;
            let d = ctx.modes.omega(Mode::Cold) * (sigma.occupations()[2] - ens.occupations()[2]);
            let [h, w, c] = init.occupations();
            Ok((
                ens.truncated_weight(),
                vec![
                    eh.into(),
                    ew.into(),
                    h.into(),
                    w.into(),
                    c.into(),
                    d.into(),
                    verdict_label(cooling_predicate(&init)).into(),
                ],
            ))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let rows = rows
        .into_iter()
        .map(|(w, r)| {
            bundle.note_truncation(w);
            r
        })
        .collect::<Vec<_>>();
    bundle.write_table(
        "phase_diagram.csv",
        &["eps_h", "eps_w", "nbar_h", "nbar_w", "nbar_c", "delta_eps_c", "verdict"],
        &rows,
    )?;
    bundle
        .tolerances
        .insert("stationary_tolerance".into(), trimode::fock::STATIONARY_TOLERANCE);
    write_boundary(bundle, &grid)
}

fn fano_map(ctx: &Ctx, bundle: &mut Bundle) -> Run {
    let grid = ctx.cfg.grid.expect("grid");
    let threshold = ctx.threshold();
    let rows = grid_points(&grid)
        .par_iter()
        .map(|&(eh, ew)| {
            let init = grid_init(ctx, eh, ew, grid.nbar_c)?;
            let ens = ctx.num(decompose(&init, threshold))?;
            let sigma = ctx.num(unitary::time_averaged_state(&ens))?;
            let mut row: Vec<Cell> = vec![eh.into(), ew.into()];
            let mut cold = None;
            for m in Mode::ALL {
                let s = ctx.num(distribution_statistics(&reduced_distribution(&sigma, m)))?;
                row.push(s.fano.into());
                if m == Mode::Cold {
                    cold = Some(s);
                }
            }
            let cold = cold.expect("cold mode");
            row.push(cold.entropy.into());
            row.push(thermal_entropy(cold.mean).into());
            row.push(verdict_label(cooling_predicate(&init)).into());
            Ok((ens.truncated_weight(), row))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let rows = rows
        .into_iter()
        .map(|(w, r)| {
            bundle.note_truncation(w);
            r
        })
        .collect::<Vec<_>>();
    bundle.write_table(
        "fano_map.csv",
        &["eps_h", "eps_w", "fano_h", "fano_w", "fano_c", "entropy_c", "thermal_entropy_c", "verdict"],
        &rows,
    )?;
    write_boundary(bundle, &grid)
}

fn panel_sweep(ctx: &Ctx, bundle: &mut Bundle) -> Run {
    let sweep = ctx.cfg.sweep.clone().expect("sweep");
    let times = ctx.times();
    let runs = sweep
        .eps_w
        .par_iter()
        .map(|&ew| {
            let init = ctx.num(ThermalInit::from_energy_quanta(sweep.eps_h, ew, sweep.eps_c))?;
            let ens = ctx.num(decompose(&init, ctx.threshold()))?;
            let cache = ctx.num(EigenCache::for_ensemble(&ens))?;
            let trace = ctx.num(unitary::evolve_cached(&ens, &cache, &ctx.modes, &times))?;
            let sigma = ctx.num(unitary::time_averaged_state_cached(&ens, &cache))?;
            let ex = ctx.num(transient_extremum(&trace, Mode::Cold))?;
            Ok((init, trace, sigma.occupations(), ex))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut rows = Vec::new();
    for (i, (init, trace, sigma, ex)) in runs.iter().enumerate() {
        bundle.write_trace(&format!("panel_{i}"), trace)?;
        let (t_ex, v_ex): (Cell, Cell) = match ex {
            Some(e) => (e.time.into(), e.value.into()),
            None => ("".into(), "".into()),
        };
        rows.push(vec![
            i.into(),
            sweep.eps_w[i].into(),
            verdict_label(cooling_predicate(init)).into(),
            ctx.modes.energy(Mode::Cold, sigma[2]).into(),
            t_ex,
            v_ex,
        ]);
    }
    note_extremum_tolerances(bundle);
    bundle.write_table(
        "panels.csv",
        &["index", "eps_w", "verdict", "eps_c_sigma", "t_ex", "eps_c_ex"],
        &rows,
    )
}

fn incoherent_compare(ctx: &Ctx, bundle: &mut Bundle) -> Run {
    let init = ctx.init()?;
    let gamma = ctx.cfg.gamma.expect("gamma");
    let times = ctx.times();
    let ens = ctx.num(decompose(&init, ctx.threshold()))?;
    let cache = ctx.num(EigenCache::for_ensemble(&ens))?;
    let coherent = ctx.num(unitary::evolve_cached(&ens, &cache, &ctx.modes, &times))?;
    let sigma = ctx.num(unitary::time_averaged_state_cached(&ens, &cache))?;
    let spont = ctx.num(evolve_spontaneous(&ens, &ctx.modes, gamma, &times))?;
    let deph = ctx.num(evolve_dephasing_cached(&ens, &cache, &ctx.modes, gamma, &times))?;
    // Both incoherent models are solved exactly, so very late samples are
    // their asymptotes.
    let spont_inf = ctx.num(evolve_spontaneous(&ens, &ctx.modes, gamma, &[1e9]))?;
    let deph_inf = ctx.num(evolve_dephasing_cached(&ens, &cache, &ctx.modes, gamma, &[1e9]))?;
    bundle.write_trace("coherent", &coherent)?;
    bundle.write_trace("spontaneous", &spont)?;
    bundle.write_trace("dephasing", &deph)?;
    let energies = |n: [f64; 3]| Mode::ALL.map(|m| ctx.modes.energy(m, n[m.index()]));
    let last = |t: &EnergyTrace<f64>| [0, 1, 2].map(|k| t.eps[k][0]);
    let mut rows = Vec::new();
    for (label, e) in [
        ("coherent", energies(sigma.occupations())),
        ("spontaneous", last(&spont_inf)),
        ("dephasing", last(&deph_inf)),
    ] {
        rows.push(vec![label.into(), e[0].into(), e[1].into(), e[2].into()]);
    }
    bundle.write_table("asymptotes.csv", &["model", "eps_h", "eps_w", "eps_c"], &rows)
}

fn equilibration_tex(ctx: &Ctx, bundle: &mut Bundle) -> Run {
    let grid = ctx.cfg.grid.expect("grid");
    let times = ctx.times();
    let threshold = ctx.threshold();
    let rows = grid_points(&grid)
        .par_iter()
        .map(|&(eh, ew)| {
            let init = grid_init(ctx, eh, ew, grid.nbar_c)?;
            let ens = ctx.num(decompose(&init, threshold))?;
            let trace = ctx.num(unitary::evolve(&ens, &ctx.modes, &times))?;
            let ex = ctx.num(transient_extremum(&trace, Mode::Cold))?;
            let mut row: Vec<Cell> = vec![eh.into(), ew.into()];
            match ex {
                Some(e) => {
                    row.push(e.time.into());
                    row.push(e.value.into());
                    row.push(if e.is_minimum { "min" } else { "max" }.into());
                }
                None => row.extend(["".into(), "".into(), "none".into()]),
            }
            row.push(verdict_label(cooling_predicate(&init)).into());
            Ok((ens.truncated_weight(), row))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let rows = rows
        .into_iter()
        .map(|(w, r)| {
            bundle.note_truncation(w);
            r
        })
        .collect::<Vec<_>>();
    note_extremum_tolerances(bundle);
    bundle.write_table(
        "tex_map.csv",
        &["eps_h", "eps_w", "t_ex", "eps_c_ex", "kind", "verdict"],
        &rows,
    )?;
    write_boundary(bundle, &grid)
}

fn purity(ctx: &Ctx, bundle: &mut Bundle) -> Run {
    let spec = ctx.cfg.purity.clone().expect("purity");
    let ratio = (spec.t_max / spec.t_min).ln() / (spec.points - 1) as f64;
    let times: Vec<f64> = std::iter::once(0.0)
        .chain((0..spec.points).map(|i| spec.t_min * (ratio * i as f64).exp()))
        .collect();
    let mut summary = Vec::new();
    for &n in &spec.sizes {
        let decay = ctx.num(purity_decay(n / 3, n, n, &times))?;
        let rows: Vec<Vec<Cell>> = decay
            .times
            .iter()
            .zip(&decay.purity)
            .map(|(&t, &p)| vec![t.into(), p.into()])
            .collect();
        bundle.write_table(&format!("purity_N{n}.csv"), &["t", "purity"], &rows)?;
        let late: Cell = match decay.mean_after(spec.average_from) {
            Some(x) => x.into(),
            None => "".into(),
        };
        summary.push(vec![
            n.into(),
            (n / 3).into(),
            decay.block.dim().into(),
            late,
            decay.dephased_purity.into(),
            (1.0 / (n + 1) as f64).into(),
        ]);
    }
    bundle.write_table(
        "purity_summary.csv",
        &["n_sum", "initial_index", "dim", "late_average", "dephased_purity", "inverse_dim"],
        &summary,
    )
}

fn gaps(ctx: &Ctx, bundle: &mut Bundle) -> Run {
    let spec = ctx.cfg.gaps.clone().expect("gaps");
    let hists = spec
        .m_values
        .par_iter()
        .map(|&m| ctx.num(gap_histogram(spec.n_sum, m, spec.bin_width)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut summary = Vec::new();
    for (h, &m) in hists.iter().zip(&spec.m_values) {
        let rows: Vec<Vec<Cell>> = h
            .counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                vec![
                    (i as f64 * h.bin_width).into(),
                    ((i + 1) as f64 * h.bin_width).into(),
                    c.into(),
                ]
            })
            .collect();
        bundle.write_table(&format!("gaps_M{m}.csv"), &["bin_start", "bin_end", "count"], &rows)?;
        let mean = h.gaps.iter().sum::<f64>() / h.gaps.len() as f64;
        summary.push(vec![
            spec.n_sum.into(),
            m.into(),
            h.block.dim().into(),
            h.mode_bin().into(),
            h.counts.first().copied().unwrap_or(0).into(),
            mean.into(),
        ]);
    }
    bundle.write_table(
        "gap_summary.csv",
        &["n_sum", "m_sum", "dim", "mode_bin", "first_bin_count", "mean_gap"],
        &summary,
    )
}

fn classical_compare(ctx: &Ctx, bundle: &mut Bundle) -> Run {
    let init = ctx.init()?;
    let spec = ctx.cfg.classical.clone().expect("classical");
    let times = ctx.times();
    let ens = ctx.num(decompose(&init, ctx.threshold()))?;
    let cache = ctx.num(EigenCache::for_ensemble(&ens))?;
    let quantum = ctx.num(unitary::evolve_cached(&ens, &cache, &ctx.modes, &times))?;
    let sigma = ctx.num(unitary::time_averaged_state_cached(&ens, &cache))?;
    bundle.write_trace("quantum", &quantum)?;
    let s = sigma.occupations();
    let mut rows = vec![vec![
        "quantum".into(),
        ctx.modes.energy(Mode::Hot, s[0]).into(),
        ctx.modes.energy(Mode::Work, s[1]).into(),
        ctx.modes.energy(Mode::Cold, s[2]).into(),
        0.0.into(),
    ]];
    for &name in &spec.matchings {
        let matching: trimode::classical::Matching = name.into();
        let mc = ctx.num(monte_carlo(&init, matching, &ctx.modes, &times, spec.n_traj, ctx.cfg.seed))?;
        bundle.write_trace(&format!("classical_{}", matching.label()), &mc.trace)?;
        rows.push(vec![
            format!("classical_{}", matching.label()).into(),
            mc.time_average[0].into(),
            mc.time_average[1].into(),
            mc.time_average[2].into(),
            mc.time_average_stderr[2].into(),
        ]);
    }
    bundle.write_table("time_averages.csv", &["source", "eps_h", "eps_w", "eps_c", "stderr_c"], &rows)
}

fn open_sweep(ctx: &Ctx, bundle: &mut Bundle) -> Run {
    let init = ctx.init()?;
    let spec = ctx.cfg.open.clone().expect("open");
    let times = ctx.times();
    let ens = ctx.num(decompose(&init, ctx.threshold()))?;
    let reference = ctx.num(unitary::evolve(&ens, &ctx.modes, &times))?;
    bundle.write_trace("unitary", &reference)?;
    let options = OpenSystemOptions {
        cutoffs: spec.cutoffs,
        auto_tail: spec.auto_tail,
        step: spec.step,
        ..Default::default()
    };
    let runs = spec
        .kappas
        .par_iter()
        .map(|&k| ctx.num(open_system::integrate(&init, &ctx.modes, k, &times, &options)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut rows = Vec::new();
    for (run, &kappa) in runs.iter().zip(&spec.kappas) {
        bundle.write_trace(&format!("open_kappa_{kappa}"), &run.trace)?;
        bundle.note_truncation(run.initial_truncated_weight);
        bundle
            .warnings
            .extend(run.warnings.iter().map(|w| format!("kappa={kappa}: {w}")));
        let [h, w, c] = run.cutoffs;
        let top = run.max_cutoff_population;
        rows.push(vec![
            kappa.into(),
            h.into(),
            w.into(),
            c.into(),
            run.step.into(),
            run.initial_truncated_weight.into(),
            run.max_trace_drift.into(),
            top[0].into(),
            top[1].into(),
            top[2].into(),
            run.spot_check_error.into(),
            run.min_eigenvalue.into(),
        ]);
    }
    bundle
        .tolerances
        .insert("leakage_warning".into(), open_system::LEAKAGE_WARNING);
    bundle
        .tolerances
        .insert("leakage_limit".into(), open_system::LEAKAGE_LIMIT);
    bundle.write_table(
        "open_summary.csv",
        &[
            "kappa",
            "cutoff_h",
            "cutoff_w",
            "cutoff_c",
            "step",
            "initial_truncated_weight",
            "max_trace_drift",
            "max_cutoff_pop_h",
            "max_cutoff_pop_w",
            "max_cutoff_pop_c",
            "spot_check_error",
            "min_eigenvalue",
        ],
        &rows,
    )
}
