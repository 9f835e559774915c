//! Backend-conditioned package selection.
//!
//! For each backend independently:
//! 1. drop packages whose accuracy on any protected route is below the RA
//!    floor;
//! 2. drop packages below the WLC, RA or SR floors, or over the latency or
//!    token ceilings;
//! 3. rank survivors by p50 latency, then tokens; the faster transport only
//!    breaks exact ties.
//!
//! Metrics are never averaged across backends.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{Mode, Transport};
use crate::record::RouteLabel;

/// Backend x mode metrics the recommender consumes. Percentages are 0..100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub backend: String,
    pub mode: Mode,
    pub fc_pct: f64,
    pub ra_pct: f64,
    pub sr_pct: Option<f64>,
    pub wlc_pct: f64,
    pub p50_ms: Option<f64>,
    pub tokens: Option<f64>,
    #[serde(default)]
    pub per_route_accuracy: BTreeMap<RouteLabel, f64>,
    /// Mean p50 per transport, when combo-level data is available.
    #[serde(default)]
    pub transport_p50_ms: BTreeMap<Transport, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentPolicy {
    #[serde(default)]
    pub protected_routes: Vec<RouteLabel>,
    #[serde(default)]
    pub min_wlc_pct: f64,
    #[serde(default)]
    pub min_ra_pct: f64,
    #[serde(default)]
    pub min_sr_pct: f64,
    #[serde(default)]
    pub max_p50_ms: Option<f64>,
    #[serde(default)]
    pub token_budget: Option<f64>,
}

impl DeploymentPolicy {
    pub fn permissive() -> Self {
        Self {
            protected_routes: Vec::new(),
            min_wlc_pct: 0.0,
            min_ra_pct: 0.0,
            min_sr_pct: 0.0,
            max_p50_ms: None,
            token_budget: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("min_wlc_pct", self.min_wlc_pct),
            ("min_ra_pct", self.min_ra_pct),
            ("min_sr_pct", self.min_sr_pct),
        ] {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::InvalidPolicy(format!("{name}={v} not in [0,100]")));
            }
        }
        if matches!(self.max_p50_ms, Some(v) if v.is_nan() || v < 0.0) {
            return Err(Error::InvalidPolicy("max_p50_ms must be non-negative".into()));
        }
        if matches!(self.token_budget, Some(v) if v.is_nan() || v < 0.0) {
            return Err(Error::InvalidPolicy("token_budget must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleViolation {
    /// `protected_route:<route>`, `min_wlc`, `min_ra`, `min_sr`, `max_p50`
    /// or `token_budget`.
    pub rule: String,
    pub value: f64,
    pub threshold: f64,
}

impl RuleViolation {
    fn shortfall(&self) -> f64 {
        (self.value - self.threshold).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub mode: Mode,
    /// The selection step that eliminated the package (1 or 2).
    pub step: u8,
    pub violations: Vec<RuleViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPackage {
    pub rank: usize,
    pub mode: Mode,
    pub p50_ms: Option<f64>,
    pub tokens: Option<f64>,
    pub transport: Option<Transport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestMiss {
    pub mode: Mode,
    pub violations: Vec<RuleViolation>,
    pub total_shortfall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Admissible,
    NoAdmissiblePackage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendVerdict {
    pub backend: String,
    pub verdict: VerdictKind,
    pub admissible: Vec<RankedPackage>,
    pub rejected: Vec<Rejection>,
    pub nearest_miss: Option<NearestMiss>,
}

impl BackendVerdict {
    pub fn rejection(&self, mode: Mode) -> Option<&Rejection> {
        self.rejected.iter().find(|r| r.mode == mode)
    }

    pub fn is_admissible(&self, mode: Mode) -> bool {
        self.admissible.iter().any(|p| p.mode == mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub schema_version: String,
    pub policy: DeploymentPolicy,
    pub backends: Vec<BackendVerdict>,
}

fn protected_violations(cell: &CellMetrics, policy: &DeploymentPolicy) -> Result<Vec<RuleViolation>> {
    let mut out = Vec::new();
    for route in &policy.protected_routes {
        let acc = cell
            .per_route_accuracy
            .get(route)
            .copied()
            .ok_or_else(|| Error::MissingRouteSlice {
                backend: cell.backend.clone(),
                mode: cell.mode.as_str().into(),
                route: route.as_str().into(),
            })?;
        if acc < policy.min_ra_pct {
            out.push(RuleViolation {
                rule: format!("protected_route:{route}"),
                value: acc,
                threshold: policy.min_ra_pct,
            });
        }
    }
    Ok(out)
}

fn floor_violations(cell: &CellMetrics, policy: &DeploymentPolicy) -> Vec<RuleViolation> {
    let mut out = Vec::new();
    let mut floor = |rule: &str, value: f64, threshold: f64| {
        if value < threshold {
            out.push(RuleViolation {
                rule: rule.into(),
                value,
                threshold,
            });
        }
    };
    floor("min_wlc", cell.wlc_pct, policy.min_wlc_pct);
    floor("min_ra", cell.ra_pct, policy.min_ra_pct);
    if let Some(sr) = cell.sr_pct {
        floor("min_sr", sr, policy.min_sr_pct);
    }
    if let (Some(max), Some(p50)) = (policy.max_p50_ms, cell.p50_ms) {
        if p50 > max {
            out.push(RuleViolation {
                rule: "max_p50".into(),
                value: p50,
                threshold: max,
            });
        }
    }
    if let (Some(budget), Some(tokens)) = (policy.token_budget, cell.tokens) {
        if tokens > budget {
            out.push(RuleViolation {
                rule: "token_budget".into(),
                value: tokens,
                threshold: budget,
            });
        }
    }
    out
}

fn cmp_opt(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

fn best_transport(cell: &CellMetrics) -> Option<(Transport, f64)> {
    cell.transport_p50_ms
        .iter()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(b.0)))
        .map(|(t, p)| (*t, *p))
}

/// Verdict for one backend; `cells` must all belong to `backend`.
pub fn recommend_backend(backend: &str, cells: &[&CellMetrics], policy: &DeploymentPolicy) -> Result<BackendVerdict> {
    let mut survivors: Vec<&CellMetrics> = Vec::new();
    let mut rejected = Vec::new();
    let mut misses = Vec::new();
    for cell in cells {
        let step1 = protected_violations(cell, policy)?;
        let step2 = floor_violations(cell, policy);
        if step1.is_empty() && step2.is_empty() {
            survivors.push(cell);
            continue;
        }
        let total_shortfall = step1.iter().chain(&step2).map(RuleViolation::shortfall).sum();
        let mut all = step1.clone();
        all.extend(step2.iter().cloned());
        misses.push(NearestMiss {
            mode: cell.mode,
            violations: all,
            total_shortfall,
        });
        let (step, violations) = if step1.is_empty() { (2, step2) } else { (1, step1) };
        rejected.push(Rejection {
            mode: cell.mode,
            step,
            violations,
        });
    }

    survivors.sort_by(|a, b| {
        cmp_opt(a.p50_ms, b.p50_ms)
            .then(cmp_opt(a.tokens, b.tokens))
            .then(cmp_opt(best_transport(a).map(|t| t.1), best_transport(b).map(|t| t.1)))
            .then(a.mode.cmp(&b.mode))
    });
    let admissible: Vec<RankedPackage> = survivors
        .iter()
        .enumerate()
        .map(|(i, c)| RankedPackage {
            rank: i + 1,
            mode: c.mode,
            p50_ms: c.p50_ms,
            tokens: c.tokens,
            transport: best_transport(c).map(|t| t.0),
        })
        .collect();

    let (verdict, nearest_miss) = if admissible.is_empty() {
        let miss = misses.into_iter().min_by(|a, b| {
            a.total_shortfall
                .total_cmp(&b.total_shortfall)
                .then(a.mode.cmp(&b.mode))
        });
        (VerdictKind::NoAdmissiblePackage, miss)
    } else {
        (VerdictKind::Admissible, None)
    };
    Ok(BackendVerdict {
        backend: backend.into(),
        verdict,
        admissible,
        rejected,
        nearest_miss,
    })
}

/// Per-backend verdicts, backends in first-appearance order.
pub fn recommend(cells: &[CellMetrics], policy: &DeploymentPolicy) -> Result<Recommendation> {
    policy.validate()?;
    if cells.is_empty() {
        return Err(Error::MissingInput("cell metrics"));
    }
    let mut backends: Vec<&str> = Vec::new();
    for c in cells {
        if !backends.contains(&c.backend.as_str()) {
            backends.push(&c.backend);
        }
    }
    let verdicts = backends
        .iter()
        .map(|b| {
            let mine: Vec<&CellMetrics> = cells.iter().filter(|c| c.backend == *b).collect();
            recommend_backend(b, &mine, policy)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Recommendation {
        schema_version: crate::schema_versions::VERDICT.into(),
        policy: policy.clone(),
        backends: verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cell(backend: &str, mode: Mode, ra: f64, wlc: f64, p50: f64, tokens: f64, dev: f64) -> CellMetrics {
        CellMetrics {
            backend: backend.into(),
            mode,
            fc_pct: 100.0,
            ra_pct: ra,
            sr_pct: Some(70.0),
            wlc_pct: wlc,
            p50_ms: Some(p50),
            tokens: Some(tokens),
            per_route_accuracy: [(RouteLabel::Dev, dev)].into_iter().collect(),
            transport_p50_ms: BTreeMap::new(),
        }
    }

    fn cells() -> Vec<CellMetrics> {
        alloc::vec![
            cell("a", Mode::Mj, 86.0, 61.0, 1150.0, 126_000.0, 88.9),
            cell("a", Mode::Sj, 86.0, 61.0, 1160.0, 126_000.0, 88.9),
            cell("a", Mode::Mjs, 61.0, 17.0, 1190.0, 60_000.0, 51.9),
            cell("a", Mode::Mclr, 63.0, 31.7, 1014.0, 45_000.0, 40.7),
            cell("b", Mode::Mj, 82.0, 48.0, 231.0, 130_000.0, 88.6),
            cell("b", Mode::Mclr, 22.8, 0.0, 174.0, 55_000.0, 0.0),
        ]
    }

    #[test]
    fn permissive_policy_ranks_by_latency() {
        let rec = recommend(&cells(), &DeploymentPolicy::permissive()).unwrap();
        let a = &rec.backends[0];
        let order: Vec<Mode> = a.admissible.iter().map(|p| p.mode).collect();
        assert_eq!(order, [Mode::Mclr, Mode::Mj, Mode::Sj, Mode::Mjs]);
        assert!(a.rejected.is_empty());
    }

    #[test]
    fn protected_route_step_comes_first() {
        let policy = DeploymentPolicy {
            protected_routes: alloc::vec![RouteLabel::Dev],
            min_ra_pct: 50.0,
            min_wlc_pct: 30.0,
            ..DeploymentPolicy::permissive()
        };
        let rec = recommend(&cells(), &policy).unwrap();
        let b = &rec.backends[1];
        let r = b.rejection(Mode::Mclr).unwrap();
        assert_eq!(r.step, 1);
        assert_eq!(r.violations[0].rule, "protected_route:dev");
        assert_eq!(r.violations[0].value, 0.0);
        let a = &rec.backends[0];
        let r = a.rejection(Mode::Mjs).unwrap();
        assert_eq!((r.step, r.violations[0].rule.as_str()), (2, "min_wlc"));
    }

    #[test]
    fn no_survivors_reports_nearest_miss() {
        let policy = DeploymentPolicy {
            min_wlc_pct: 99.0,
            ..DeploymentPolicy::permissive()
        };
        let rec = recommend(&cells(), &policy).unwrap();
        for v in &rec.backends {
            assert_eq!(v.verdict, VerdictKind::NoAdmissiblePackage);
            assert!(v.nearest_miss.is_some());
        }
        assert_eq!(rec.backends[0].nearest_miss.as_ref().unwrap().mode, Mode::Mj);
    }

    #[test]
    fn missing_slice_for_protected_route() {
        let policy = DeploymentPolicy {
            protected_routes: alloc::vec![RouteLabel::Doc],
            ..DeploymentPolicy::permissive()
        };
        assert!(matches!(
            recommend(&cells(), &policy),
            Err(Error::MissingRouteSlice { .. })
        ));
    }

    #[test]
    fn transport_breaks_exact_ties_only() {
        let mut cs = alloc::vec![
            cell("a", Mode::Mj, 86.0, 61.0, 100.0, 10.0, 90.0),
            cell("a", Mode::Sj, 86.0, 61.0, 100.0, 10.0, 90.0),
        ];
        cs[0].transport_p50_ms = [(Transport::NonStream, 105.0), (Transport::Stream, 95.0)]
            .into_iter()
            .collect();
        cs[1].transport_p50_ms = [(Transport::NonStream, 90.0), (Transport::Stream, 110.0)]
            .into_iter()
            .collect();
        let rec = recommend(&cs, &DeploymentPolicy::permissive()).unwrap();
        let top = &rec.backends[0].admissible[0];
        assert_eq!((top.mode, top.transport), (Mode::Sj, Some(Transport::NonStream)));
    }

    #[test]
    fn invalid_policy() {
        let policy = DeploymentPolicy {
            min_ra_pct: 120.0,
            ..DeploymentPolicy::permissive()
        };
        assert!(recommend(&cells(), &policy).is_err());
    }

    proptest! {
        #[test]
        fn raising_floors_shrinks_admissible_set(
            wlc in 0.0f64..70.0, ra in 0.0f64..90.0, extra in 0.0f64..30.0
        ) {
            let lo = DeploymentPolicy { min_wlc_pct: wlc, min_ra_pct: ra, ..DeploymentPolicy::permissive() };
            let hi = DeploymentPolicy { min_wlc_pct: (wlc + extra).min(100.0), min_ra_pct: (ra + extra).min(100.0), ..lo.clone() };
            let a = recommend(&cells(), &lo).unwrap();
            let b = recommend(&cells(), &hi).unwrap();
            for (va, vb) in a.backends.iter().zip(&b.backends) {
                for p in &vb.admissible {
                    prop_assert!(va.is_admissible(p.mode));
                }
            }
        }

        #[test]
        fn other_backends_do_not_affect_verdict(scale in 0.0f64..1.0, shift in 0.0f64..500.0) {
            let policy = DeploymentPolicy { min_wlc_pct: 20.0, min_ra_pct: 50.0, ..DeploymentPolicy::permissive() };
            let base = recommend(&cells(), &policy).unwrap();
            let mut perturbed = cells();
            for c in perturbed.iter_mut().filter(|c| c.backend == "b") {
                c.ra_pct *= scale;
                c.wlc_pct *= scale;
                c.p50_ms = c.p50_ms.map(|p| p + shift);
            }
            perturbed.reverse();
            let other = recommend(&perturbed, &policy).unwrap();
            let a0 = base.backends.iter().find(|v| v.backend == "a").unwrap();
            let a1 = other.backends.iter().find(|v| v.backend == "a").unwrap();
            prop_assert_eq!(&a0.admissible.iter().map(|p| p.mode).collect::<Vec<_>>(), &a1.admissible.iter().map(|p| p.mode).collect::<Vec<_>>());
        }
    }
}
