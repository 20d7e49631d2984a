use serde::{Deserialize, Serialize};

use super::SolverConfig;

/// Feasibility gaps of the split formulation at the current iterate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// Largest coupling residual over the coupled participants.
    pub coupling_residual: f64,
    /// Largest `‖factor − Z‖/‖factor‖` over all regularizer splits and the
    /// PARAFAC2 constraint split.
    pub split_residual: f64,
    /// Largest relative spread of the `B_kᵀB_k` over all PARAFAC2 datasets.
    pub cross_product_spread: f64,
}

impl Feasibility {
    pub fn max(&self) -> f64 {
        self.coupling_residual
            .max(self.split_residual)
            .max(self.cross_product_spread)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.coupling_residual < tol && self.split_residual < tol && self.cross_product_spread < tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    RelativeTolerance,
    AbsoluteTolerance,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop(TerminationReason),
}

/// Stops on a small absolute objective, or on a small relative change of
/// the objective together with every feasibility gap below tolerance.
pub fn stopping_check(trace: &[f64], feasibility: &Feasibility, config: &SolverConfig) -> StopDecision {
    let Some(&last) = trace.last() else {
        return StopDecision::Continue;
    };
    if last < config.absolute_tolerance {
        return StopDecision::Stop(TerminationReason::AbsoluteTolerance);
    }
    if trace.len() >= 2 {
        let prev = trace[trace.len() - 2];
        let rel = (last - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
        if rel < config.relative_tolerance && feasibility.within(config.feasibility_tolerance) {
            return StopDecision::Stop(TerminationReason::RelativeTolerance);
        }
    }
    if trace.len() > config.max_outer_iterations {
        return StopDecision::Stop(TerminationReason::MaxIterations);
    }
    StopDecision::Continue
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_and_feasible_stops() {
        let c = SolverConfig::default();
        let d = stopping_check(&[0.5, 0.5], &Feasibility::default(), &c);
        assert_eq!(d, StopDecision::Stop(TerminationReason::RelativeTolerance));
    }

    #[test]
    fn flat_but_infeasible_continues() {
        let c = SolverConfig::default();
        let f = Feasibility {
            coupling_residual: 0.3,
            ..Default::default()
        };
        assert_eq!(stopping_check(&[0.5, 0.5], &f, &c), StopDecision::Continue);
    }

    #[test]
    fn oscillation_runs_to_the_iteration_cap() {
        let c = SolverConfig {
            max_outer_iterations: 6,
            ..Default::default()
        };
        let mut trace = vec![1.0];
        let mut last = StopDecision::Continue;
        for i in 0..10 {
            trace.push(if i % 2 == 0 { 0.9 } else { 1.0 });
            last = stopping_check(&trace, &Feasibility::default(), &c);
            if last != StopDecision::Continue {
                assert_eq!(trace.len(), 7);
                break;
            }
        }
        assert_eq!(last, StopDecision::Stop(TerminationReason::MaxIterations));
    }

    #[test]
    fn tiny_objective_stops() {
        let c = SolverConfig::default();
        let f = Feasibility {
            split_residual: 1.0,
            ..Default::default()
        };
        assert_eq!(
            stopping_check(&[1.0, 1e-12], &f, &c),
            StopDecision::Stop(TerminationReason::AbsoluteTolerance)
        );
    }
}
