//! The subcommands, each driven entirely by a [`Config`].

use std::f64::consts::PI;

use psdim_core::bowen::{bounds_check, pressure_root, ulam_root, RootParams};
use psdim_core::invariant::{
    finiteness_criterion, gamma_decay_probe, lattice_sum_2d, lattice_sum_triple, lyapunov_induced, martens_ratio,
    schwarzian_degree_criterion, InducedDomain, LatticeSum, NestedDomainSpec,
};
use psdim_core::measure::{build_ps_measure, conformality_check, median_depth_cells, tightness_profile, write_measure, AtomicMeasure, Cell};
use psdim_core::poincare::{estimate_h, poincare_partial, ClassifyParams};
use psdim_core::pressure::pressure_estimate;
use psdim_core::raster::{real_julia_dimension, refine_real_julia, render_raster, write_pgm, Region};
use psdim_core::transfer::postsingular_prefix;
use psdim_core::tree::TreeParams;
use psdim_core::{classify_regime, Error, MapSpec, Regime, RegimeReport, Result, SpherePoint, TruncationPolicy};
use serde_json::{json, Value};

use crate::config::Config;
use crate::output::{num, record, to_value, Artifact, Uncertainty};

pub const COMMANDS: [&str; 12] = [
    "classify",
    "pressure",
    "dimension",
    "poincare",
    "measure",
    "conformality",
    "criterion",
    "martens",
    "lyapunov",
    "raster",
    "sweep",
    "selftest",
];

#[derive(Debug, Default)]
pub struct Outcome {
    pub records: Vec<Value>,
    pub artifacts: Vec<Artifact>,
    /// Human-readable lines printed ahead of the records.
    pub summary: Vec<String>,
}

/// Everything a command reads: the config, the master seed, and the map
/// with its regime when the config names one.
pub struct Ctx<'a> {
    pub cfg: &'a Config,
    pub seed: u64,
    pub map: Option<(MapSpec, RegimeReport)>,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a Config, seed: u64, needs_map: bool) -> Result<Self> {
        let map = if needs_map {
            let f = cfg.map_spec()?;
            let reg = classify_regime(&f, cfg.usize_or("orbit_len", 20)?, cfg.f64_or("escape", 1e6)?)?;
            Some((f, reg))
        } else {
            None
        };
        Ok(Ctx { cfg, seed, map })
    }

    fn map(&self) -> Result<(&MapSpec, &RegimeReport)> {
        self.map.as_ref().map(|(f, r)| (f, r)).ok_or_else(|| Error::Config("command needs a map".into()))
    }

    fn policy(&self) -> Result<TruncationPolicy> {
        Ok(TruncationPolicy::with_k_max(self.cfg.u64_or("k_max", TruncationPolicy::default().k_max)?))
    }

    fn tree(&self) -> Result<TreeParams> {
        Ok(TreeParams { cell: self.cfg.f64_or("cell", TreeParams::default().cell)?, ..Default::default() })
    }

    fn measure(&self) -> Result<AtomicMeasure> {
        let (f, _) = self.map()?;
        build_ps_measure(
            f,
            self.cfg.f64_or("s", 2.05)?,
            self.cfg.f64_or("h_high", 2.0)?,
            self.cfg.u64_or("depth", 8)? as u32,
            &self.policy()?,
            &self.tree()?,
        )
    }

    fn truncation(&self) -> Result<Value> {
        Ok(json!({ "k_max": self.policy()?.k_max, "cell": self.tree()?.cell }))
    }
}

/// Whether `command` reads a map from the config.
pub fn needs_map(command: &str) -> bool {
    !matches!(command, "criterion" | "selftest" | "sweep")
}

pub fn run(command: &str, ctx: &Ctx) -> Result<Outcome> {
    match command {
        "classify" => classify(ctx),
        "pressure" => pressure(ctx),
        "dimension" => dimension(ctx),
        "poincare" => poincare(ctx),
        "measure" => measure(ctx),
        "conformality" => conformality(ctx),
        "criterion" => criterion(ctx),
        "martens" => martens(ctx),
        "lyapunov" => lyapunov(ctx),
        "raster" => raster(ctx),
        "selftest" => crate::selftest::selftest(ctx.seed),
        "sweep" => Err(Error::Config("sweep cannot be nested".into())),
        other => Err(Error::Config(format!("unknown command {other:?}"))),
    }
}

fn classify(ctx: &Ctx) -> Result<Outcome> {
    let (f, reg) = ctx.map()?;
    let mut out = Outcome::default();
    out.summary.push(format!("{:?}", reg.regime));
    out.records.push(record(
        "regime",
        json!(format!("{:?}", reg.regime)),
        Uncertainty::Exact,
        json!({ "orbit_len": ctx.cfg.usize_or("orbit_len", 20)?, "escape": ctx.cfg.f64_or("escape", 1e6)? }),
        json!({ "report": to_value(reg), "rho": f.rho(), "asymptotic_values": to_value(&f.asymptotic_values()) }),
    ));
    Ok(out)
}

fn base_point(ctx: &Ctx) -> Result<Option<SpherePoint>> {
    Ok(ctx.cfg.complex("base")?.map(SpherePoint::Finite))
}

fn pressure(ctx: &Ctx) -> Result<Outcome> {
    let (f, _) = ctx.map()?;
    let t = ctx.cfg.require_f64("t")?;
    let depth = ctx.cfg.usize_or("depth", 8)?;
    let base = base_point(ctx)?.unwrap_or_else(|| psdim_core::bowen::choose_base(f));
    let p = pressure_estimate(f, t, base, depth, &ctx.policy()?, &ctx.tree()?)?;
    let mut trunc = ctx.truncation()?;
    trunc["depth"] = json!(depth);
    trunc["discarded"] = json!(p.discarded);
    let rows = (0..p.per_depth.len()).map(|i| vec![(i + 1).to_string(), num(p.per_depth[i]), num(p.increments[i])]).collect();
    Ok(Outcome {
        records: vec![record("pressure", json!(p.extrapolated), Uncertainty::Both(p.error, p.low(), p.high()), trunc, to_value(&p))],
        artifacts: vec![Artifact::csv("pressure.csv", &["n", "per_depth", "increment"], rows)],
        summary: vec![],
    })
}

fn dimension(ctx: &Ctx) -> Result<Outcome> {
    let (f, reg) = ctx.map()?;
    let cfg = ctx.cfg;
    let mut out = Outcome::default();
    let mut trunc = ctx.truncation()?;
    let method = cfg.str_or("method", "root");
    let (h, lo, hi, detail) = match method {
        "root" => {
            let rp = RootParams {
                depth: cfg.usize_or("depth", 12)?,
                bisect_tol: cfg.f64_or("tol", 0.01)?,
                ..Default::default()
            };
            trunc["depth"] = json!(rp.depth);
            let d = pressure_root(f, base_point(ctx)?, &rp, &ctx.policy()?, &ctx.tree()?)?;
            (d.h, d.bracket.0, d.bracket.1, to_value(&d))
        }
        "ulam" => {
            let bins = cfg.usize_or("bins", 2000)?;
            trunc["bins"] = json!(bins);
            let d = ulam_root(f, bins, &ctx.policy()?, cfg.f64_or("tol", 0.01)?)?;
            (d.h, d.bracket.0, d.bracket.1, to_value(&d))
        }
        "box" => {
            let depth = cfg.usize_or("depth", 8)?;
            let min_len = cfg.f64_or("min_len", 1e-5)?;
            trunc["depth"] = json!(depth);
            trunc["min_len"] = json!(min_len);
            let b = real_julia_dimension(f, depth, min_len)?;
            let cover = refine_real_julia(f, depth, min_len)?;
            let rows = cover.intervals.iter().map(|&(a, b)| vec![num(a), num(b)]).collect();
            out.artifacts.push(Artifact::csv("julia_intervals.csv", &["left", "right"], rows));
            let rows = b.scales.iter().zip(&b.counts).map(|(&s, &n)| vec![num(s), n.to_string()]).collect();
            out.artifacts.push(Artifact::csv("box_counts.csv", &["scale", "count"], rows));
            // the fit quality is the only uncertainty a box count carries
            let spread = (1.0 - b.r2).sqrt() * b.slope.abs();
            (b.slope, b.slope - spread, b.slope + spread, to_value(&b))
        }
        "poincare" => {
            let grid = cfg.f64_list("t_grid")?.ok_or_else(|| Error::Config("missing t_grid".into()))?;
            let n_max = cfg.usize_or("n_max", 12)?;
            trunc["n_max"] = json!(n_max);
            let e = estimate_h(f, &grid, n_max, &ctx.policy()?, &ctx.tree()?, &ClassifyParams::default(), Some(reg))?;
            (e.h, e.bracket.0, e.bracket.1, to_value(&e))
        }
        other => return Err(Error::Config(format!("unknown method {other:?}"))),
    };
    trunc["method"] = json!(method);
    out.records.push(record("dimension", json!(h), Uncertainty::Bracket(lo, hi), trunc.clone(), detail));
    let b = bounds_check(f.rho(), h, reg.regime);
    out.records.push(record("bounds", json!(b.pass), Uncertainty::Exact, trunc, to_value(&b)));
    Ok(out)
}

fn poincare(ctx: &Ctx) -> Result<Outcome> {
    let (f, reg) = ctx.map()?;
    let cfg = ctx.cfg;
    let n_max = cfg.usize_or("n_max", 12)?;
    let mut trunc = ctx.truncation()?;
    trunc["n_max"] = json!(n_max);
    let mut out = Outcome::default();
    if let Some(grid) = cfg.f64_list("t_grid")? {
        let e = estimate_h(f, &grid, n_max, &ctx.policy()?, &ctx.tree()?, &ClassifyParams::default(), Some(reg))?;
        for c in &e.diagnostics {
            out.records.push(record("poincare_class", json!(format!("{:?}", c.class)), Uncertainty::Error(c.error), trunc.clone(), to_value(c)));
        }
        out.records.push(record("exponent", json!(e.h), Uncertainty::Bracket(e.bracket.0, e.bracket.1), trunc, to_value(&e)));
        return Ok(out);
    }
    let t = cfg.require_f64("t")?;
    let s = poincare_partial(f, t, n_max, &ctx.policy()?, &ctx.tree()?)?;
    let c = ClassifyParams::default().classify(t, s.log_ratio, s.log_ratio_error);
    let rows = (0..s.log_terms.len()).map(|i| vec![(i + 1).to_string(), num(s.log_terms[i]), num(s.log_partial_sums[i])]).collect();
    out.artifacts.push(Artifact::csv("poincare.csv", &["n", "log_term", "log_partial_sum"], rows));
    out.records.push(record("poincare", json!(s.ratio()), Uncertainty::Error(s.log_ratio_error * s.ratio()), trunc, json!({ "series": to_value(&s), "class": to_value(&c) })));
    Ok(out)
}

fn measure(ctx: &Ctx) -> Result<Outcome> {
    let (f, reg) = ctx.map()?;
    let m = ctx.measure()?;
    let mut out = Outcome::default();
    let mut trunc = ctx.truncation()?;
    trunc["depth"] = json!(m.depth_max);
    trunc["discarded_mass_bound"] = json!(m.discarded_mass_bound);
    out.records.push(record(
        "measure",
        json!(m.total_mass()),
        Uncertainty::Error(m.discarded_mass_bound),
        trunc.clone(),
        json!({ "s": m.s, "atoms": m.atoms.len(), "log_norm": m.log_norm }),
    ));
    let mut body = Vec::new();
    write_measure(&m, &mut body)?;
    out.artifacts.push(Artifact::Text { name: "measure.txt".into(), body: String::from_utf8_lossy(&body).into_owned() });

    let radii: Vec<f64> = (0..=12).map(|i| 2f64.powf(i as f64 / 4.0)).collect();
    let p = tightness_profile(&m, &radii);
    let rows = (0..radii.len()).map(|i| vec![num(radii[i]), num(p.mass[i]), num(p.max_atom_share[i])]).collect();
    out.artifacts.push(Artifact::csv("tightness.csv", &["radius", "tail_mass", "max_atom_share"], rows));
    out.records.push(record("tightness", json!(p.decay_exponent), Uncertainty::Error(0.0), trunc.clone(), to_value(&p)));

    let n_max = ctx.cfg.usize_or("decay_n", 8)?;
    if reg.regime == Regime::SubExpanding && n_max > 0 {
        let d = gamma_decay_probe(f, &m, &NestedDomainSpec::from_regime(reg), n_max)?;
        let rows = (0..d.masses.len()).map(|n| vec![n.to_string(), num(d.masses[n]), d.atoms[n].to_string()]).collect();
        out.artifacts.push(Artifact::csv("decay.csv", &["n", "mass", "atoms"], rows));
        // r² of the fit stands in for the uncertainty of γ
        out.records.push(record("decay", json!(d.gamma), Uncertainty::Error(1.0 - d.r2), trunc, to_value(&d)));
    }
    Ok(out)
}

fn conformality(ctx: &Ctx) -> Result<Outcome> {
    let (f, _) = ctx.map()?;
    let cfg = ctx.cfg;
    let m = ctx.measure()?;
    let mut avoid = postsingular_prefix(f, 30);
    avoid.extend(f.asymptotic_values().iter().map(|&a| SpherePoint::Finite(a)));
    let radius = cfg.f64_or("cell_radius", 0.05)?;
    let cells = median_depth_cells(f, &m, cfg.usize_or("cells", 20)?, radius, &avoid, cfg.f64_or("clearance", 0.05)?);
    let r = conformality_check(f, &m, &cells, cfg.f64_or("h_test", 2.0)?)?;
    let mut trunc = ctx.truncation()?;
    trunc["depth"] = json!(m.depth_max);
    trunc["s"] = json!(m.s);
    let rows = r.cells.iter().map(|c| {
        let z = c.cell.centre.finite().unwrap_or_default();
        vec![num(z.re), num(z.im), num(c.cell.radius), num(c.ratio), c.atoms.to_string(), num(c.log_deriv)]
    });
    let mut out = Outcome::default();
    out.summary.push(if r.non_conformal { "NonConformal".into() } else { "Conformal".into() });
    out.artifacts.push(Artifact::csv("conformality.csv", &["re", "im", "radius", "ratio", "atoms", "log_deriv"], rows.collect()));
    out.records.push(record("conformality", json!(r.c), Uncertainty::Error(r.drift.abs()), trunc, to_value(&r)));
    Ok(out)
}

fn lattice_record(kind: &str, l: &LatticeSum) -> Value {
    let unc = match l.value_bracket() {
        Some((lo, hi)) => Uncertainty::Bracket(lo, hi),
        None => Uncertainty::Bracket(l.partial, f64::INFINITY),
    };
    record(kind, json!(format!("{:?}", l.class)), unc, json!({ "n_cap": l.n_cap }), to_value(l))
}

fn criterion(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let mut out = Outcome::default();
    if cfg.has("rho") || cfg.has("h") {
        let (rho, h) = (cfg.require_f64("rho")?, cfg.require_f64("h")?);
        let v = finiteness_criterion(rho, h)?;
        out.summary.push(format!("{v:?}"));
        out.records.push(record(
            "finiteness",
            json!(format!("{v:?}")),
            Uncertainty::Exact,
            json!({}),
            json!({ "rho": rho, "h": h, "threshold": 3.0 * rho / (rho + 1.0) }),
        ));
    }
    if let Some(deg) = cfg.has("deg_p").then(|| cfg.u64_or("deg_p", 0)).transpose()? {
        let v = schwarzian_degree_criterion(deg as u32);
        out.summary.push(format!("{v:?}"));
        out.records.push(record("schwarzian_degree", json!(format!("{v:?}")), Uncertainty::Exact, json!({}), json!({ "deg_p": deg })));
    }
    if cfg.has("lattice") {
        let s = cfg.require_f64("s")?;
        let cap = cfg.u64_or("n_cap", 1000)?;
        let (kind, l) = match cfg.str_or("lattice", "") {
            "2d" => ("lattice_2d", lattice_sum_2d(s, cap)?),
            "triple" => ("lattice_triple", lattice_sum_triple(s, cap)?),
            other => return Err(Error::Config(format!("unknown lattice {other:?}"))),
        };
        out.summary.push(format!("{:?}", l.class));
        out.records.push(lattice_record(kind, &l));
    }
    if out.records.is_empty() {
        return Err(Error::Config("criterion needs rho and h, deg_p, or lattice and s".into()));
    }
    Ok(out)
}

fn cell_from(cfg: &Config, prefix: &str, default: (f64, f64), radius: f64) -> Result<Cell> {
    let z = cfg.complex(prefix)?.unwrap_or(psdim_core::C::new(default.0, default.1));
    Ok(Cell { centre: SpherePoint::Finite(z), radius })
}

fn martens(ctx: &Ctx) -> Result<Outcome> {
    let (f, reg) = ctx.map()?;
    let cfg = ctx.cfg;
    let m = ctx.measure()?;
    let radius = cfg.f64_or("radius", 0.05)?;
    let a = cell_from(cfg, "cell", (0.9, 0.6), radius)?;
    let b = cell_from(cfg, "ref", (-0.8, -0.7), radius)?;
    let n_max = cfg.usize_or("n_max", 8)?;
    let r = martens_ratio(f, &m, reg, a, b, n_max)?;
    let mut trunc = ctx.truncation()?;
    trunc["depth"] = json!(m.depth_max);
    trunc["n_max"] = json!(n_max);
    let rows = r.ratios.iter().enumerate().map(|(n, &x)| vec![n.to_string(), num(x)]).collect();
    Ok(Outcome {
        records: vec![record("martens", json!(r.limit), Uncertainty::Error(r.error), trunc, to_value(&r))],
        artifacts: vec![Artifact::csv("martens.csv", &["n", "ratio"], rows)],
        summary: vec![],
    })
}

fn lyapunov(ctx: &Ctx) -> Result<Outcome> {
    let (f, reg) = ctx.map()?;
    let cfg = ctx.cfg;
    let m = ctx.measure()?;
    let domain = InducedDomain::from_regime(f, reg);
    let (orbits, len, max_steps) = (cfg.usize_or("orbits", 200)?, cfg.usize_or("len", 100)?, cfg.usize_or("max_steps", 10_000)?);
    let l = lyapunov_induced(f, &m, &domain, orbits, len, max_steps, ctx.seed)?;
    let mut trunc = ctx.truncation()?;
    trunc["depth"] = json!(m.depth_max);
    trunc["max_steps"] = json!(max_steps);
    let rows = l.tau_histogram.iter().map(|(t, c)| vec![t.to_string(), c.to_string()]).collect();
    Ok(Outcome {
        records: vec![record("lyapunov", json!(l.chi), Uncertainty::Error(l.std_err), trunc, to_value(&l))],
        artifacts: vec![Artifact::csv("tau_histogram.csv", &["tau", "count"], rows)],
        summary: vec![],
    })
}

fn raster(ctx: &Ctx) -> Result<Outcome> {
    let (f, reg) = ctx.map()?;
    let cfg = ctx.cfg;
    let region = Region {
        xmin: cfg.f64_or("xmin", -PI)?,
        xmax: cfg.f64_or("xmax", PI)?,
        ymin: cfg.f64_or("ymin", -2.0)?,
        ymax: cfg.f64_or("ymax", 2.0)?,
    };
    let (w, h, it) = (cfg.usize_or("width", 320)?, cfg.usize_or("height", 200)?, cfg.usize_or("max_iter", 200)?);
    let r = render_raster(f, reg, region, w, h, it)?;
    let mut body = Vec::new();
    write_pgm(&r, &mut body)?;
    let julia = r.pixels.iter().filter(|&&p| p == 0).count() as f64 / r.pixels.len() as f64;
    Ok(Outcome {
        records: vec![record(
            "raster",
            json!(julia),
            Uncertainty::Error(r.undecided_fraction),
            json!({ "max_iter": it, "width": w, "height": h }),
            json!({ "region": to_value(&r.region), "undecided_fraction": r.undecided_fraction }),
        )],
        artifacts: vec![Artifact::Text { name: "raster.pgm".into(), body: String::from_utf8_lossy(&body).into_owned() }],
        summary: vec![],
    })
}
