//! Order-of-convergence study on a fixed smooth segment.

use crate::dynamics::{ModelParams, RocketState};

use super::{Method, StepError, Stepper};

/// Integrate `length` of altitude in `steps` equal steps under constant `u`.
pub fn integrate(
    stepper: &Stepper,
    start: RocketState,
    u: f64,
    length: f64,
    steps: usize,
    p: &ModelParams,
) -> Result<RocketState, StepError> {
    let dh = length / steps as f64;
    let mut s = start;
    for i in 0..steps {
        let r = stepper.step(s, u, dh, p)?;
        s = RocketState::new(start.h + (i + 1) as f64 * dh, r.m_next, r.v_next);
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSetup {
    pub start: RocketState,
    pub u: f64,
    pub length: f64,
    /// Step counts, each double the previous.
    pub step_counts: Vec<usize>,
    /// The reference uses RK4 with `refinement` times the finest step count.
    pub refinement: usize,
}

impl Default for ConvergenceSetup {
    fn default() -> Self {
        Self {
            start: RocketState::new(1.001, 0.9, 0.05),
            u: -1.0,
            length: 2e-3,
            step_counts: vec![1, 2, 4, 8],
            refinement: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub dh: f64,
    /// Max-norm error in `(m, v)` at the segment end.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub method: Method,
    pub rows: Vec<ConvergenceRow>,
    pub reference: RocketState,
}

impl ConvergenceStudy {
    /// `log2(e(dh) / e(dh/2))` for consecutive rows.
    pub fn pairwise_orders(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| (w[0].error / w[1].error).log2() * (w[0].dh / w[1].dh).log2().recip())
            .collect()
    }

    /// Least-squares slope of `log2(error)` against `log2(dh)`.
    pub fn observed_order(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.dh.log2(), r.error.log2())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }
}

pub fn convergence_study(
    method: Method,
    setup: &ConvergenceSetup,
    p: &ModelParams,
) -> Result<ConvergenceStudy, StepError> {
    let finest = *setup.step_counts.iter().max().expect("at least one step count");
    let reference = integrate(
        &Stepper::new(Method::RungeKutta4),
        setup.start,
        setup.u,
        setup.length,
        finest * setup.refinement,
        p,
    )?;
    let stepper = Stepper::new(method);
    let rows = setup
        .step_counts
        .iter()
        .map(|&steps| {
            let end = integrate(&stepper, setup.start, setup.u, setup.length, steps, p)?;
            let error = f64::max((end.m - reference.m).abs(), (end.v - reference.v).abs());
            Ok(ConvergenceRow {
                steps,
                dh: setup.length / steps as f64,
                error,
            })
        })
        .collect::<Result<Vec<_>, StepError>>()?;
    Ok(ConvergenceStudy {
        method,
        rows,
        reference,
    })
}
