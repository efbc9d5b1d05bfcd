//! JSON scenarios: loading, validation and the four pipelines behind the CLI.
//!
//! A run writes `report.json` (the resolved scenario plus the pipeline
//! result) and one or more CSV traces into the output directory. Reports
//! contain no timestamps or host data, so equal inputs give equal bytes.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::averaging::{averaging_chain, averaging_sweep, Kernel, QuadratureConfig};
use crate::balayage::{balayage_audit_adaptive, rescale_class_bound, BalayageReport, ClassBound, Nu, Verdict, VerdictRule};
use crate::domain::{admissible_radius_function, nested_set_system, Domain, SetSystem};
use crate::error::{invalid, Error, Result};
use crate::measures::{ZeroSequence, ZeroSpec};
use crate::poisson_jensen::{
    arens_singer_reproducing_check, extended_pj_residual, pj_battery, HarmonicSample, PJReport, ReproducingReport,
};
use crate::potentials::{validate_test_function, TestFunction};
use crate::report::{to_json, Cell, Table};
use crate::weighted::{
    classify_zero_sequence, AdaptiveFamily, ClassifyBundle, ClassifyConfig, Consistency, DominatedOptions, SweepSpec,
    Weight, WeightSpec,
};

pub const THREADS_ENV: &str = "BALAYAGE_LAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pipeline {
    #[serde(rename = "pj-audit")]
    PjAudit,
    #[serde(rename = "balayage-audit")]
    BalayageAudit,
    #[serde(rename = "classify")]
    Classify,
    #[serde(rename = "averaging-sweep")]
    AveragingSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub s_radius: f64,
    pub s0_radius: f64,
    /// Class bound b; the computed B is used when absent.
    #[serde(default)]
    pub b: Option<f64>,
    pub u0_radius: f64,
}

impl Default for SystemSpec {
    fn default() -> Self {
        SystemSpec {
            s_radius: 0.25,
            s0_radius: 0.5,
            b: None,
            u0_radius: 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// Random Jensen shells.
    Jensen,
    /// Random Jensen shells plus a boundary ladder following the truncation.
    JensenLadder,
    /// The Green function with pole at the base point.
    Green,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub size: usize,
    /// Defaults to the scenario seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec {
            kind: FamilyKind::JensenLadder,
            size: 16,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub slope_threshold: f64,
    pub doublings: usize,
    pub pj_residual: f64,
    pub chain: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            slope_threshold: 0.5,
            doublings: 3,
            pj_residual: 1e-6,
            chain: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AveragingSpec {
    pub radius_factor: f64,
    /// Angular nodes of the base rule (power of two ≥ 16).
    pub nodes: usize,
}

impl Default for AveragingSpec {
    fn default() -> Self {
        AveragingSpec {
            radius_factor: 0.5,
            nodes: 256,
        }
    }
}

fn zero_weight() -> WeightSpec {
    WeightSpec::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub pipeline: Pipeline,
    pub seed: u64,
    pub domain: Domain,
    #[serde(default)]
    pub set_system: SystemSpec,
    #[serde(default = "zero_weight")]
    pub weight: WeightSpec,
    #[serde(default)]
    pub zeros: Option<ZeroSpec>,
    #[serde(default)]
    pub family: FamilySpec,
    #[serde(default)]
    pub truncation_ladder: Vec<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub averaging: AveragingSpec,
    #[serde(default)]
    pub dominated: DominatedOptions,
}

impl Scenario {
    pub fn from_json(text: &str, origin: &str) -> Result<Scenario> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse {
            what: origin.to_string(),
            source: e,
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = fs::read_to_string(path)?;
        Scenario::from_json(&text, &path.display().to_string())
    }

    /// Checks the invariants that serde cannot express.
    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.slope_threshold", t.slope_threshold),
            ("tolerances.pj_residual", t.pj_residual),
            ("tolerances.chain", t.chain),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Scenario(format!("invariant `{name} > 0` violated ({v})")));
            }
        }
        if t.doublings == 0 {
            return Err(Error::Scenario("invariant `tolerances.doublings ≥ 1` violated".into()));
        }
        if self.family.size == 0 {
            return Err(Error::Scenario("invariant `family.size ≥ 1` violated".into()));
        }
        let n = self.averaging.nodes;
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Scenario(format!("invariant `averaging.nodes` power of two ≥ 16 violated ({n})")));
        }
        if self.truncation_ladder.contains(&0) {
            return Err(Error::Scenario("invariant `truncation_ladder` entries ≥ 1 violated".into()));
        }
        if matches!(self.pipeline, Pipeline::BalayageAudit | Pipeline::Classify) && self.zeros.is_none() {
            return Err(Error::Scenario(format!("pipeline {:?} needs `zeros`", self.pipeline)));
        }
        Ok(())
    }

    fn resolve_zeros(&self) -> Result<ZeroSequence> {
        self.zeros
            .as_ref()
            .ok_or_else(|| Error::Scenario("missing `zeros`".into()))?
            .resolve(&self.domain)
    }

    fn ladder(&self, zeros: &ZeroSequence) -> Vec<usize> {
        if self.truncation_ladder.is_empty() {
            vec![zeros.len().max(1)]
        } else {
            self.truncation_ladder.clone()
        }
    }

    fn rule(&self) -> VerdictRule {
        VerdictRule {
            slope: self.tolerances.slope_threshold,
            doublings: self.tolerances.doublings,
        }
    }
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub strict: bool,
    pub seed: Option<u64>,
    pub nodes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Some verdict of the run is "diverging".
    pub diverging: bool,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self, strict: bool) -> i32 {
        if strict && self.diverging {
            2
        } else {
            0
        }
    }
}

/// Caps the global rayon pool from `BALAYAGE_LAB_THREADS` (once per process).
pub fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // a second call finds the pool already built; that is fine
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    scenario: &'a Scenario,
    diverging: bool,
    result: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PjAuditResult {
    pub instances: Vec<PJReport>,
    pub reproducing: Vec<ReproducingReport>,
    #[serde(with = "crate::report::real")]
    pub max_residual: f64,
    pub all_monotone: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalayageAuditResult {
    pub system: SetSystem,
    pub class_bound: ClassBound,
    pub rejected_tests: Vec<String>,
    pub dropped_tail: usize,
    #[serde(with = "crate::report::real")]
    pub tail_mass: f64,
    pub audit: BalayageReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragingResult {
    pub nodes: usize,
    pub rows: usize,
    pub chain_violations: usize,
    #[serde(with = "crate::report::real")]
    pub max_chain_excess: f64,
    #[serde(with = "crate::report::real")]
    pub kernel_mass: f64,
}

/// Runs one scenario with overrides applied and writes its artifacts.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutcome> {
    configure_threads();
    let mut sc = scenario.clone();
    if let Some(seed) = opts.seed {
        sc.seed = seed;
    }
    if let Some(n) = opts.nodes {
        sc.averaging.nodes = n;
    }
    if sc.family.seed.is_none() {
        sc.family.seed = Some(sc.seed);
    }
    sc.validate()?;
    fs::create_dir_all(&opts.out)?;
    let (body, tables, diverging) = match sc.pipeline {
        Pipeline::PjAudit => {
            let (res, table) = pj_audit(&sc)?;
            (envelope(&sc, false, &res)?, vec![("pj_trace.csv", table)], false)
        }
        Pipeline::BalayageAudit => {
            let (res, table) = balayage_pipeline(&sc)?;
            let div = res.audit.verdict == Verdict::Diverging;
            (envelope(&sc, div, &res)?, vec![("growth.csv", table)], div)
        }
        Pipeline::Classify => {
            let (res, tables) = classify_pipeline(&sc)?;
            let div = res.z3.verdict == Verdict::Diverging || res.consistency == Consistency::AgreeNegative;
            (envelope(&sc, div, &res)?, tables, div)
        }
        Pipeline::AveragingSweep => {
            let (res, table) = averaging_pipeline(&sc)?;
            (envelope(&sc, false, &res)?, vec![("sweep.csv", table)], false)
        }
    };
    let mut files = Vec::new();
    let report = opts.out.join("report.json");
    fs::write(&report, body)?;
    files.push(report);
    for (name, t) in tables {
        let p = opts.out.join(name);
        fs::write(&p, t.to_csv())?;
        files.push(p);
    }
    Ok(RunOutcome { diverging, files })
}

/// Loads `path` and runs it.
pub fn run_scenario(path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    run(&Scenario::load(path)?, opts)
}

fn envelope<T: Serialize>(sc: &Scenario, diverging: bool, result: &T) -> Result<String> {
    to_json(&Envelope {
        tool: "balayage-lab",
        version: env!("CARGO_PKG_VERSION"),
        scenario: sc,
        diverging,
        result,
    })
}

fn pj_audit(sc: &Scenario) -> Result<(PjAuditResult, Table)> {
    if !sc.domain.is_unit_disk() {
        return Err(Error::Unsupported("pj-audit runs its battery on the unit disk".into()));
    }
    let insts = pj_battery(sc.family.size, sc.family.seed.unwrap_or(sc.seed))?;
    let mut instances = Vec::with_capacity(insts.len());
    let mut reproducing = Vec::with_capacity(insts.len());
    let mut table = Table::new(vec!["label", "n_radial", "n_angular", "residual"]);
    for inst in &insts {
        let r = extended_pj_residual(inst)?;
        for s in &r.trace {
            table.push(vec![
                Cell::Text(r.label.clone()),
                Cell::Int(s.n_radial as u64),
                Cell::Int(s.n_angular as u64),
                Cell::Num(s.residual),
            ]);
        }
        instances.push(r);
        reproducing.push(arens_singer_reproducing_check(
            &inst.v.measure(),
            inst.base_point(),
            &HarmonicSample::STANDARD,
        )?);
    }
    let max_residual = instances.iter().map(|r| r.residual).fold(0.0, f64::max);
    let all_monotone = instances.iter().all(|r| r.monotone);
    let pass = max_residual < sc.tolerances.pj_residual && all_monotone && reproducing.iter().all(|r| r.pass);
    Ok((
        PjAuditResult {
            instances,
            reproducing,
            max_residual,
            all_monotone,
            pass,
        },
        table,
    ))
}

fn system_for(sc: &Scenario) -> Result<(SetSystem, ClassBound)> {
    let s = &sc.set_system;
    let provisional = nested_set_system(&sc.domain, s.s_radius, s.s0_radius, s.b.unwrap_or(1.0))?;
    let cb = rescale_class_bound(&provisional, s.u0_radius, &sc.domain)?;
    let system = match s.b {
        Some(_) => provisional,
        None => provisional.with_b(cb.bound),
    };
    let cb = rescale_class_bound(&system, s.u0_radius, &sc.domain)?;
    Ok((system, cb))
}

fn balayage_pipeline(sc: &Scenario) -> Result<(BalayageAuditResult, Table)> {
    let zeros = sc.resolve_zeros()?;
    let ladder = sc.ladder(&zeros);
    let (system, class_bound) = system_for(sc)?;
    let weight = Weight::new(&sc.weight, &sc.domain)?;
    let mu = weight.riesz_charge();
    let seed = sc.family.seed.unwrap_or(sc.seed);
    let nu = Nu::Zeros {
        zeros: &zeros,
        ladder: &ladder,
    };
    let (audit, rejected) = match sc.family.kind {
        FamilyKind::Green => {
            let g = TestFunction::green(&sc.domain, system.center, 1.0);
            let rejected = if validate_test_function(&g, &system, &sc.domain).passes() {
                vec![]
            } else {
                vec![g.id.clone()]
            };
            let fam = vec![g];
            (balayage_audit_adaptive(nu, &mu, |_| Ok(fam.clone()), &system, sc.rule())?, rejected)
        }
        FamilyKind::Jensen | FamilyKind::JensenLadder => {
            let fam = AdaptiveFamily::new(&sc.domain, &system, sc.set_system.u0_radius, sc.family.size, seed, &zeros, &ladder)?;
            let ladder_on = sc.family.kind == FamilyKind::JensenLadder;
            let audit = balayage_audit_adaptive(
                nu,
                &mu,
                |n| {
                    Ok(if ladder_on {
                        fam.for_truncation(n)
                    } else {
                        fam.random.clone()
                    })
                },
                &system,
                sc.rule(),
            )?;
            (audit, fam.rejected.clone())
        }
    };
    if !rejected.is_empty() && audit.family_size == 0 {
        return Err(Error::EmptyFamily);
    }
    let mut table = Table::new(vec!["truncation", "family_size", "inferred_c"]);
    for g in &audit.growth_trace {
        table.push(vec![
            Cell::Int(g.truncation as u64),
            Cell::Int(g.family_size as u64),
            Cell::Num(g.inferred_c),
        ]);
    }
    Ok((
        BalayageAuditResult {
            system,
            class_bound,
            rejected_tests: rejected,
            dropped_tail: zeros.dropped_tail,
            tail_mass: zeros.tail_mass,
            audit,
        },
        table,
    ))
}

fn classify_pipeline(sc: &Scenario) -> Result<(ClassifyBundle, Vec<(&'static str, Table)>)> {
    let zeros = sc.resolve_zeros()?;
    let weight = Weight::new(&sc.weight, &sc.domain)?;
    if sc.set_system.b.is_some() {
        return Err(Error::Scenario("classify always uses b = B; drop `set_system.b`".into()));
    }
    let cfg = ClassifyConfig {
        s_radius: sc.set_system.s_radius,
        s0_radius: sc.set_system.s0_radius,
        u0_radius: sc.set_system.u0_radius,
        family_size: sc.family.size,
        seed: sc.family.seed.unwrap_or(sc.seed),
        truncation_ladder: sc.ladder(&zeros),
        slope_threshold: sc.tolerances.slope_threshold,
        doublings: sc.tolerances.doublings,
        radius_factor: sc.averaging.radius_factor,
        dominated: DominatedOptions {
            sweep: sc.sweep,
            ..sc.dominated
        },
    };
    let bundle = classify_zero_sequence(&zeros, &weight, &sc.domain, &cfg)?;
    let mut growth = Table::new(vec!["truncation", "family_size", "inferred_c", "green_sum"]);
    for (g, p) in bundle.z3.growth_trace.iter().zip(&bundle.z1.trace) {
        growth.push(vec![
            Cell::Int(g.truncation as u64),
            Cell::Int(g.family_size as u64),
            Cell::Num(g.inferred_c),
            Cell::Num(p.green_sum),
        ]);
    }
    let mut rings = Table::new(vec!["radius", "dist", "sup"]);
    for r in &bundle.z1.membership.trend {
        rings.push(vec![Cell::Num(r.radius), Cell::Num(r.dist), Cell::Num(r.sup)]);
    }
    Ok((bundle, vec![("growth.csv", growth), ("membership.csv", rings)]))
}

fn averaging_pipeline(sc: &Scenario) -> Result<(AveragingResult, Table)> {
    let weight = Weight::new(&sc.weight, &sc.domain)?;
    let r = admissible_radius_function(&sc.domain, sc.averaging.radius_factor)?;
    let kernel = Kernel::bump();
    let cfg = QuadratureConfig {
        angular: sc.averaging.nodes,
        ..QuadratureConfig::default()
    };
    let nodes: Vec<Complex64> = sc.sweep.nodes(&sc.domain);
    let f = &weight.plus.field;
    let rows = averaging_sweep(f, &nodes, &r, &kernel, &cfg);
    let mut violations = 0;
    let mut excess: f64 = f64::NEG_INFINITY;
    for &z in &nodes {
        let s = averaging_chain(f, z, &r, &kernel, &cfg);
        excess = excess.max(s.smooth - s.circle_rhat).max(s.circle_rhat - s.circle_r);
        if !s.holds(sc.tolerances.chain) {
            violations += 1;
        }
    }
    let mut table = Table::new(vec!["re", "im", "r", "op", "value", "nodes"]);
    for row in &rows {
        table.push(vec![
            Cell::Num(row.re),
            Cell::Num(row.im),
            Cell::Num(row.r),
            Cell::Text(row.op.to_string()),
            Cell::Num(row.value),
            Cell::Int(row.nodes as u64),
        ]);
    }
    if nodes.is_empty() {
        return Err(invalid("sweep", "sweep has no nodes inside the domain"));
    }
    Ok((
        AveragingResult {
            nodes: nodes.len(),
            rows: rows.len(),
            chain_violations: violations,
            max_chain_excess: excess,
            kernel_mass: kernel.mass(),
        },
        table,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CLASSIFY_GEO: &str = r#"{
        "name": "geo", "pipeline": "classify", "seed": 3,
        "domain": {"kind": "unit_disk"},
        "weight": {"preset": "zero"},
        "zeros": {"radial": {"rule": "1-2^-k", "count": 200}},
        "family": {"kind": "jensen_ladder", "size": 4},
        "truncation_ladder": [25, 50, 100, 200]
    }"#;

    #[test]
    fn parse_and_validate() {
        let sc = Scenario::from_json(CLASSIFY_GEO, "inline").unwrap();
        assert_eq!(sc.pipeline, Pipeline::Classify);
        assert_eq!(sc.set_system, SystemSpec::default());
        let bad = CLASSIFY_GEO.replace("\"seed\": 3,", "");
        assert!(matches!(Scenario::from_json(&bad, "inline"), Err(Error::Parse { .. })));
        let bad = CLASSIFY_GEO.replace("\"size\": 4", "\"size\": 0");
        assert!(matches!(Scenario::from_json(&bad, "inline"), Err(Error::Scenario(_))));
        let bad = CLASSIFY_GEO.replace("\"unit_disk\"", "\"annulus\", \"r_in\": 1.0, \"r_out\": 0.2");
        assert!(Scenario::from_json(&bad, "inline").is_err());
        let err = Scenario::from_json("{ \"name\": ", "inline").unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn classify_runs_and_is_deterministic() {
        let sc = Scenario::from_json(CLASSIFY_GEO, "inline").unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = run(&sc, &RunOptions { out: a.path().into(), ..RunOptions::default() }).unwrap();
        let rb = run(&sc, &RunOptions { out: b.path().into(), ..RunOptions::default() }).unwrap();
        assert!(!ra.diverging && ra.exit_code(true) == 0);
        for (x, y) in ra.files.iter().zip(&rb.files) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
        let report = fs::read_to_string(a.path().join("report.json")).unwrap();
        assert!(report.contains("\"agree-positive\""));
        assert!(report.contains("\"scenario\""));
    }

    #[test]
    fn averaging_sweep_csv_header() {
        let sc = Scenario::from_json(
            r#"{"name":"avg","pipeline":"averaging-sweep","seed":1,"domain":{"kind":"unit_disk"},
                "weight":{"preset":"quadratic"},"sweep":{"interior_rings":2,"depth":2,"n_theta":4},
                "averaging":{"radius_factor":0.5,"nodes":64}}"#,
            "inline",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run(&sc, &RunOptions { out: dir.path().into(), ..RunOptions::default() }).unwrap();
        let csv = fs::read_to_string(&out.files[1]).unwrap();
        assert!(csv.starts_with("re,im,r,op,value,nodes\n"));
        let rep = fs::read_to_string(&out.files[0]).unwrap();
        assert!(rep.contains("\"chain_violations\": 0"), "{rep}");
    }

    #[test]
    fn nodes_override_is_validated() {
        let sc = Scenario::from_json(CLASSIFY_GEO, "inline").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            out: dir.path().into(),
            nodes: Some(100),
            ..RunOptions::default()
        };
        assert!(run(&sc, &opts).is_err());
    }
}
