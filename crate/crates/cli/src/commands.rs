//! The `solve`, `simulate`, `fit` and `selfcheck` commands.
//!
//! Reports are plain `key=value` lines and carry no timings, so a repeated
//! run with the same seed reproduces them byte for byte.

use std::fmt::Write as _;

use levygame_core::{
    classify, estimate_game_value, mc_eligibility, q0, q1, saddle_check, tilted_w, wiener_hopf_check, FitKind,
    GameError, ModelError, PathVariation, RegimeSolution, ScaleEvaluator, SimError, Verdict,
};

use crate::config::RunConfig;

/// Stable process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Config = 1,
    Assumption = 2,
    Check = 3,
}

#[derive(Debug)]
pub struct Outcome {
    pub status: Status,
    pub report: String,
    pub csv: Option<String>,
}

impl Outcome {
    fn new(status: Status, report: String) -> Self {
        Self {
            status,
            report,
            csv: None,
        }
    }
}

fn game_failure(e: &GameError) -> Outcome {
    let status = match e {
        GameError::AssumptionAViolated => Status::Assumption,
        GameError::InvalidParameter(_) | GameError::Model(ModelError::InvalidParameter(_)) => Status::Config,
        _ => Status::Check,
    };
    Outcome::new(status, format!("error: {e}\n"))
}

fn solve(cfg: &RunConfig) -> Result<RegimeSolution, Outcome> {
    classify(&cfg.model, &cfg.params).map_err(|e| game_failure(&e))
}

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

fn csv_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn run_solve(cfg: &RunConfig) -> Outcome {
    let sol = match solve(cfg) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let mut r = String::new();
    let _ = writeln!(r, "regime={}", sol.regime);
    let _ = writeln!(r, "psi(-1)={}", num(sol.psi_minus_one));
    let _ = writeln!(r, "Phi(q)={}", num(sol.phi_q));
    match q0(&cfg.model, &cfg.params) {
        Ok(v) => writeln!(r, "q0={}", num(v)),
        Err(e) => writeln!(r, "q0=n/a ({e})"),
    }
    .ok();
    match q1(&cfg.model, &cfg.params) {
        Ok((v, _)) => writeln!(r, "q1={}", num(v)),
        Err(e) => writeln!(r, "q1=n/a ({e})"),
    }
    .ok();
    if let Some(a) = sol.a_star {
        let _ = writeln!(r, "a*={}", num(a));
    }
    if let Some(c) = sol.c_star {
        let _ = writeln!(r, "c*={}", num(c));
    }
    let _ = writeln!(r, "tau={}", sol.tau);
    let _ = writeln!(r, "sigma={}", sol.sigma);
    let _ = writeln!(r, "assumption_a={}", sol.assumption_a);
    match sol.fit_report(1e-4) {
        Ok(f) => writeln!(r, "fit={}", f.expected_kind),
        Err(e) => writeln!(r, "fit=n/a ({e})"),
    }
    .ok();
    for w in &sol.warnings {
        let _ = writeln!(r, "warning: {w}");
    }
    let k = cfg.params.strike;
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["x", "V", "lower", "upper", "regime"]).expect("in-memory write");
    for x in cfg.grid.points() {
        let v = match sol.value(x) {
            Ok(v) => v,
            Err(e) => return Outcome::new(Status::Check, format!("{r}error: V({x}) failed: {e}\n")),
        };
        let lower = x.exp();
        csv.write_record([csv_num(x), csv_num(v), csv_num(lower), csv_num(lower.max(k)), sol.regime.to_string()])
            .expect("in-memory write");
    }
    let bytes = csv.into_inner().expect("in-memory flush");
    Outcome {
        status: Status::Ok,
        report: r,
        csv: Some(String::from_utf8(bytes).expect("ascii csv")),
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Inconclusive => "INCONCLUSIVE",
        Verdict::Fail => "FAIL",
    }
}

fn sim_failure(e: &SimError) -> Outcome {
    let status = match e {
        SimError::InvalidConfig(_) => Status::Config,
        SimError::Divergent(_) => Status::Assumption,
        SimError::Game(g) => return game_failure(g),
        _ => Status::Check,
    };
    Outcome::new(status, format!("error: {e}\n"))
}

pub fn run_simulate(cfg: &RunConfig) -> Outcome {
    if let Err(reason) = mc_eligibility(&cfg.model) {
        return Outcome::new(
            Status::Ok,
            format!("MC-ineligible: {reason}\nwarning: Monte Carlo comparison skipped\n"),
        );
    }
    let sol = match solve(cfg) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let mut r = String::new();
    let _ = writeln!(r, "regime={}", sol.regime);
    let _ = writeln!(r, "tau={}", sol.tau);
    let _ = writeln!(r, "sigma={}", sol.sigma);
    let _ = writeln!(r, "n_paths={} dt={:e} seed={}", cfg.sim.n_paths, cfg.sim.dt, cfg.sim.seed);
    let _ = writeln!(r, "x,analytic,mc,stderr,z,verdict");
    let mut failed = false;
    for x in cfg.grid.quartiles() {
        let want = match sol.value(x) {
            Ok(v) => v,
            Err(e) => return game_failure(&e),
        };
        let est = match estimate_game_value(&cfg.model, &cfg.params, x, sol.tau, sol.sigma, &cfg.sim) {
            Ok(e) => e,
            Err(e) => return sim_failure(&e),
        };
        let verdict = est.verdict(want);
        failed |= verdict == Verdict::Fail;
        let _ = writeln!(
            r,
            "{},{},{},{},{:.3},{}",
            num(x),
            num(want),
            num(est.mean),
            num(est.stderr),
            est.z_score(want),
            verdict_name(verdict)
        );
        for w in &est.warnings {
            let _ = writeln!(r, "warning: x={}: {w}", num(x));
        }
    }
    let x = cfg.grid.quartiles()[1];
    match saddle_check(&cfg.model, &cfg.params, &sol, x, cfg.delta, &cfg.sim) {
        Ok(rep) => {
            let _ = writeln!(r, "saddle x={} delta={} M*={} stderr={}", num(x), cfg.delta, num(rep.equilibrium.mean), num(rep.equilibrium.stderr));
            for c in &rep.comparisons {
                let _ = writeln!(
                    r,
                    "saddle {}: diff={} stderr={} {}",
                    c.label,
                    num(c.diff),
                    num(c.stderr),
                    verdict_name(c.verdict)
                );
            }
            failed |= rep.any_fail();
        }
        Err(e) => return sim_failure(&e),
    }
    let status = if failed { Status::Check } else { Status::Ok };
    let _ = writeln!(r, "result={}", if failed { "FAIL" } else { "PASS" });
    Outcome::new(status, r)
}

pub fn run_fit(cfg: &RunConfig) -> Outcome {
    let sol = match solve(cfg) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let f = match sol.fit_report(1e-4) {
        Ok(f) => f,
        Err(e) => return game_failure(&e),
    };
    let mut r = String::new();
    let _ = writeln!(r, "regime={}", sol.regime);
    let _ = writeln!(r, "boundary={}", num(f.boundary));
    let _ = writeln!(r, "left_value={}", num(f.left_value));
    let _ = writeln!(r, "right_value={}", num(f.right_value));
    let _ = writeln!(r, "left_deriv={}", num(f.left_deriv));
    let _ = writeln!(r, "right_deriv={}", num(f.right_deriv));
    let matched = f.expected_kind == f.observed_kind;
    if matched {
        if f.expected_kind == FitKind::NeitherInterior {
            let _ = writeln!(r, "no interior boundary: expected, observed");
        } else {
            let _ = writeln!(r, "{} fit: expected, observed", f.expected_kind);
        }
    } else {
        let _ = writeln!(r, "{} fit: expected, but observed {}", f.expected_kind, f.observed_kind);
    }
    Outcome::new(if matched { Status::Ok } else { Status::Check }, r)
}

struct Check {
    name: String,
    residual: f64,
    tol: f64,
}

impl Check {
    fn new(name: impl Into<String>, residual: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tol,
        }
    }

    fn pass(&self) -> bool {
        self.residual <= self.tol
    }
}

pub fn run_selfcheck(cfg: &RunConfig) -> Outcome {
    let model = &cfg.model;
    let q = cfg.params.q;
    let mut r = String::new();
    let mut checks = Vec::new();
    let ev = match ScaleEvaluator::new(model, q) {
        Ok(ev) => ev,
        Err(e) => return Outcome::new(Status::Check, format!("error: {e}\n")),
    };
    let _ = writeln!(r, "scale method={:?}", ev.method());
    for gap in [0.5, 1.0, 3.0] {
        let beta = ev.phi() + gap;
        let residual = ev.laplace_selfcheck(beta).unwrap_or(f64::INFINITY);
        checks.push(Check::new(format!("laplace beta=Phi+{gap}"), residual, 1e-6));
    }
    let lam = 0.5;
    match model.esscher_tilt(lam).map_err(|e| e.to_string()).and_then(|tilted| {
        let direct = ScaleEvaluator::new(&tilted, q).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for x in [0.5, 1.0, 2.0] {
            let via = tilted_w(model, lam, q, x).map_err(|e| e.to_string())?;
            worst = worst.max((via - direct.w(x)).abs() / direct.w(x).abs());
        }
        Ok(worst)
    }) {
        Ok(worst) => checks.push(Check::new("tilt identity lambda=0.5", worst, 1e-8)),
        Err(e) => checks.push(Check::new(format!("tilt identity ({e})"), f64::INFINITY, 1e-8)),
    }
    match model.path_variation() {
        PathVariation::Bounded { drift } => {
            checks.push(Check::new("W(0+)=1/d", (ev.w_at_zero() - 1.0 / drift).abs(), 1e-6));
        }
        PathVariation::Unbounded => {
            checks.push(Check::new("W(0+)=0", ev.w_at_zero().abs(), 1e-12));
            let h = 1e-4;
            // Richardson on h, 2h, 4h removes the O(h) and O(h²) terms.
            let extrapolated = (8.0 * ev.w_prime(h) - 6.0 * ev.w_prime(2.0 * h) + ev.w_prime(4.0 * h)) / 3.0;
            let want = 2.0 / model.gaussian_var();
            checks.push(Check::new("W'(0+)=2/b2", (extrapolated - want).abs() / want, 1e-3));
        }
    }
    for c in &checks {
        let _ = writeln!(
            r,
            "check {}: residual={:.3e} tol={:.0e} {}",
            c.name,
            c.residual,
            c.tol,
            if c.pass() { "PASS" } else { "FAIL" }
        );
    }
    let mut failed = checks.iter().any(|c| !c.pass());
    match model.psi_minus_one() {
        Some(p) if q > p => match wiener_hopf_check(model, q, &cfg.sim) {
            Ok(wh) => {
                let est = &wh.estimate;
                let ok = est.agrees_with(wh.expected, 3.0);
                failed |= !ok;
                let _ = writeln!(
                    r,
                    "check wiener-hopf: mc={} stderr={} expected={} z={:.3} {}",
                    num(est.mean),
                    num(est.stderr),
                    num(wh.expected),
                    est.z_score(wh.expected),
                    if ok { "PASS" } else { "FAIL" }
                );
            }
            Err(e) => {
                failed = true;
                let _ = writeln!(r, "check wiener-hopf: error {e} FAIL");
            }
        },
        _ => {
            let _ = writeln!(r, "check wiener-hopf: skipped (needs q > psi(-1))");
        }
    }
    let _ = writeln!(r, "result={}", if failed { "FAIL" } else { "PASS" });
    Outcome::new(if failed { Status::Check } else { Status::Ok }, r)
}
