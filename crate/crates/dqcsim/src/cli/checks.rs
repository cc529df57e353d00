use serde::Serialize;

use super::config::RunConfig;
use super::run::cmd_run;
use crate::adversary::{
    bound_expression, detection_probability, enumerate_e, simulate_attack, summarize, FailReport, PauliAttack,
    StabTestKind, SweepSummary,
};
use crate::error::{DqcError, Result};
use crate::graphstate::{all_stabilizer_elements, find_two_coloring, graph_state, stabilizer_generator, Graph};
use crate::protocols::TrapInstance;
use crate::qstate::{Angle, Pauli, PauliString};

/// Ceiling on the failure probability of trap-based verification.
pub const FAIL_CEILING: f64 = 8.0 / 9.0;

const TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub weight: usize,
    pub summary: SweepSummary,
    pub ceiling: f64,
    pub pass: bool,
}

impl BoundReport {
    pub fn summary_line(&self) -> String {
        format!(
            "max p_fail = {:.12}, max bound = {:.12}, attacks = {}, bound 8/9: {}",
            self.summary.max_p_fail,
            self.summary.max_bound,
            self.summary.attacks,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Class `E` sweep on the trap instance described by `cfg`; weight 0 runs
/// the identity attack alone, whose bound of 1 is not held to the ceiling.
pub fn cmd_bound(cfg: &RunConfig, weight: usize) -> Result<(Vec<FailReport>, BoundReport)> {
    let p = cfg.pattern()?;
    let input = p.inputs.first().cloned().ok_or_else(|| DqcError::Config("the pattern has no input vertex".into()))?;
    let inst = TrapInstance::new(p, cfg.input_state(input)?)?;
    let attacks = if weight == 0 {
        vec![PauliString::identity()]
    } else {
        enumerate_e(inst.dtg.labels(), &inst.input_row(), weight)
    };
    let rows: Vec<FailReport> = attacks
        .into_iter()
        .map(|op| simulate_attack(&inst, &PauliAttack::before_entangling(op)))
        .collect::<Result<_>>()?;
    let summary = summarize(&rows);
    let pass = summary.bound_violations == 0
        && summary.max_p_fail <= FAIL_CEILING + TOL
        && (weight == 0 || summary.max_bound <= FAIL_CEILING + TOL);
    Ok((rows, BoundReport { weight, summary, ceiling: FAIL_CEILING, pass }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabRow {
    pub element: String,
    pub honest_rm: f64,
    pub honest_ps: f64,
    pub max_rm_ps_gap: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabReport {
    pub vertices: usize,
    pub full_group: bool,
    pub two_colorable: Option<bool>,
    pub rows: Vec<StabRow>,
    pub pass: bool,
}

/// Largest graph whose full stabilizer group is checked.
pub const FULL_GROUP_CAP: usize = 6;

/// Honest acceptance of both tests and RM/PS agreement under every
/// weight-1 attack, per generator or per non-identity group element.
pub fn cmd_stabcheck(g: &Graph, full: bool, check_two_colorable: bool) -> Result<StabReport> {
    let elements: Vec<PauliString> = if full {
        if g.num_vertices() > FULL_GROUP_CAP {
            return Err(DqcError::SizeCap(g.num_vertices(), FULL_GROUP_CAP));
        }
        all_stabilizer_elements(g)?.into_iter().map(|(_, s)| s).filter(|s| !s.is_identity()).collect()
    } else {
        g.vertices().iter().map(|v| stabilizer_generator(g, v)).collect::<Result<_>>()?
    };
    let mut attacks = Vec::new();
    for v in g.vertices() {
        for p in Pauli::NONTRIVIAL {
            attacks.push(PauliString::single(v.clone(), p));
        }
    }
    let mut rows = Vec::new();
    for s in &elements {
        let id = PauliString::identity();
        let honest_rm = detection_probability(StabTestKind::Rm, g, s, &id)?;
        let honest_ps = detection_probability(StabTestKind::Ps, g, s, &id)?;
        let mut gap = 0.0f64;
        for a in &attacks {
            let rm = detection_probability(StabTestKind::Rm, g, s, a)?;
            let ps = detection_probability(StabTestKind::Ps, g, s, a)?;
            gap = gap.max((rm - ps).abs());
        }
        let pass = honest_rm <= TOL && honest_ps <= TOL && gap <= TOL;
        rows.push(StabRow { element: s.to_text(), honest_rm, honest_ps, max_rm_ps_gap: gap, pass });
    }
    let pass = rows.iter().all(|r| r.pass);
    let two_colorable = check_two_colorable.then(|| find_two_coloring(g).is_ok());
    Ok(StabReport { vertices: g.num_vertices(), full_group: full, two_colorable, rows, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelfTestLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn line(name: &str, r: Result<(bool, String)>) -> SelfTestLine {
    match r {
        Ok((pass, detail)) => SelfTestLine { name: name.into(), pass, detail },
        Err(e) => SelfTestLine { name: name.into(), pass: false, detail: format!("error: {e}") },
    }
}

/// Quick end-to-end checks, a few seconds in release builds.
pub fn cmd_selftest() -> Vec<SelfTestLine> {
    let mut out = Vec::new();
    out.push(line(
        "graph-state stabilizers (C4)",
        (|| {
            let g = Graph::cycle(4)?;
            let psi = graph_state(&g)?;
            let mut worst = 0.0f64;
            for (_, s) in all_stabilizer_elements(&g)? {
                worst = worst.max((psi.expectation(&s)? - num_complex::Complex64::new(1.0, 0.0)).norm());
            }
            Ok((worst <= TOL, format!("max deviation {worst:.3e}")))
        })(),
    ));
    out.push(line(
        "stabilizer tests (P3 generators)",
        (|| {
            let r = cmd_stabcheck(&Graph::path(3), false, false)?;
            Ok((r.pass, format!("{} generators", r.rows.len())))
        })(),
    ));
    out.push(line(
        "rsp fingerprints (n = 2, every theta)",
        (|| {
            let mut ok = true;
            for t in 0..8 {
                let cfg = RunConfig::from_json(&format!(r#"{{"protocol":"rsp","n":2,"theta":{t}}}"#))?;
                let r = cmd_run(&cfg, None, None)?;
                let want = crate::acframework::fingerprint(
                    &crate::qstate::PureState::plus_angle("o", Angle::new(t)).to_mixed(),
                );
                ok &= r.accepted && r.output_state_fingerprint.as_deref() == Some(want.as_str());
            }
            Ok((ok, "8 angles".into()))
        })(),
    ));
    out.push(line(
        "trap verification (single vertex, honest)",
        (|| {
            let cfg = RunConfig::from_json(r#"{"angles":[]}"#)?;
            let p = cfg.pattern()?;
            let inst = TrapInstance::new(p.clone(), cfg.input_state(p.inputs[0].clone())?)?;
            let e = inst.evaluate_full(&PauliString::identity())?;
            let bound = bound_expression(&inst, &PauliString::identity())?;
            Ok((
                (e.p_accept - 1.0).abs() <= TOL && e.min_fidelity >= 1.0 - TOL && (bound - 1.0).abs() <= TOL,
                format!("{} branches", e.branches),
            ))
        })(),
    ));
    out.push(line(
        "sampled transcripts are reproducible",
        (|| {
            let cfg = RunConfig::from_json(r#"{"protocol":"ubqc","angles":[3,6]}"#)?;
            let runs: Vec<String> =
                (0..3).map(|_| cmd_run(&cfg, None, Some(7)).map(|r| r.to_json())).collect::<Result<_>>()?;
            Ok((runs.windows(2).all(|w| w[0] == w[1]), format!("{} bytes", runs[0].len())))
        })(),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_zero_is_the_identity_row() {
        let (rows, r) = cmd_bound(&RunConfig::from_json(r#"{"angles":[]}"#).unwrap(), 0).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(r.pass && r.summary.max_p_fail.abs() < 1e-10);
    }

    #[test]
    fn single_vertex_sweep_stays_under_the_ceiling() {
        let (rows, r) = cmd_bound(&RunConfig::from_json(r#"{"angles":[]}"#).unwrap(), 1).unwrap();
        assert_eq!(rows.len(), r.summary.attacks);
        assert!(r.pass, "{}", r.summary_line());
    }

    #[test]
    fn p2_full_group_has_three_passing_rows() {
        let r = cmd_stabcheck(&Graph::path(2), true, false).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.pass);
    }

    #[test]
    fn triangle_is_flagged_but_still_checked() {
        let r = cmd_stabcheck(&Graph::complete(3), false, true).unwrap();
        assert_eq!(r.two_colorable, Some(false));
        assert!(r.pass);
    }

    #[test]
    fn full_group_is_capped() {
        assert!(matches!(cmd_stabcheck(&Graph::path(7), true, false), Err(DqcError::SizeCap(7, 6))));
    }

    #[test]
    fn selftest_passes() {
        for l in cmd_selftest() {
            assert!(l.pass, "{}: {}", l.name, l.detail);
        }
    }
}
