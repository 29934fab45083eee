use goddard_id::dynamics::ModelParams;
use goddard_id::grids::{Grids, SpeedBounds};
use goddard_id::influence_diagram::{backward_induction, build_transitions, SegmentPlan, TransitionModel};
use goddard_id::steppers::{Method, Stepper};
use proptest::prelude::*;

fn instance(nv: usize, nm: usize, nu: usize, n: usize, dh: f64, v_eps: f64, method: Method) -> TransitionModel {
    let p = ModelParams {
        h_t: 1.0 + n as f64 * dh,
        ..ModelParams::default()
    };
    let grids = Grids::new(&p, SpeedBounds { v_eps, v_max: 0.2 }, nv, nm, nu).unwrap();
    let plan = SegmentPlan::with_segments(p.h0, p.h_t, n).unwrap();
    build_transitions(&plan, &grids, &Stepper::new(method), &p)
}

/// Minimize expected fuel `Σ E[M_i − M_{i+1}]` directly, with the same
/// preference for smaller thrust on ties.
fn fuel_policy(tm: &TransitionModel) -> Vec<Option<usize>> {
    let grids = tm.grids();
    let cells = grids.cells();
    let n = tm.plan().n_segments();
    let mut order: Vec<usize> = (0..tm.controls().len()).collect();
    order.sort_by(|&a, &b| {
        tm.controls()[a]
            .abs()
            .total_cmp(&tm.controls()[b].abs())
            .then(a.cmp(&b))
    });

    let mut cost: Vec<Option<f64>> = vec![Some(0.0); cells];
    let mut choice = vec![None; n * cells];
    for segment in (0..n).rev() {
        let mut next_cost = vec![None; cells];
        for cell in 0..cells {
            let m = grids.cell_state(cell).1;
            let mut best: Option<(usize, f64)> = None;
            'controls: for &k in &order {
                let Some(tr) = tm.get(segment, cell, k) else { continue };
                let mut c = 0.0;
                for (succ, p) in tr.successors(grids) {
                    let Some(rest) = cost[succ] else { continue 'controls };
                    c += p * ((m - grids.cell_state(succ).1) + rest);
                }
                if best.is_none_or(|(_, b)| c < b) {
                    best = Some((k, c));
                }
            }
            next_cost[cell] = best.map(|b| b.1);
            choice[segment * cells + cell] = best.map(|b| b.0);
        }
        cost = next_cost;
    }
    choice
}

#[test]
fn fuel_and_terminal_mass_objectives_pick_the_same_controls() {
    for method in Method::ALL {
        for &(nv, nm, nu, n, dh) in &[(5, 5, 3, 4, 1e-3), (11, 6, 5, 4, 2.5e-3), (21, 21, 11, 10, 1e-3)] {
            let tm = instance(nv, nm, nu, n, dh, 1e-2, method);
            let (vt, pol) = backward_induction(&tm);
            let alt = fuel_policy(&tm);
            let cells = tm.grids().cells();
            let mut live = 0;
            for segment in 0..n {
                for cell in 0..cells {
                    assert_eq!(
                        pol.control_index(segment, cell),
                        alt[segment * cells + cell],
                        "{method} {nv}.{nu}.{nm} segment {segment} cell {cell}"
                    );
                    live += usize::from(vt.value(segment, cell).is_some());
                }
            }
            assert!(live > 0);
        }
    }
}

/// Expected terminal mass of a fixed Markov policy, `None` where it can fail.
fn evaluate(tm: &TransitionModel, choice: &[usize]) -> Vec<Option<f64>> {
    let grids = tm.grids();
    let cells = grids.cells();
    let mut value: Vec<Option<f64>> = (0..cells).map(|c| Some(grids.cell_state(c).1)).collect();
    for segment in (0..tm.plan().n_segments()).rev() {
        value = (0..cells)
            .map(|cell| {
                let tr = tm.get(segment, cell, choice[segment * cells + cell])?;
                let mut acc = 0.0;
                for (succ, p) in tr.successors(grids) {
                    acc += p * value[succ]?;
                }
                Some(acc)
            })
            .collect();
    }
    value
}

#[test]
fn induction_matches_the_best_markov_policy_on_a_toy() {
    // 3 speeds x 3 masses x 2 controls over 2 segments: 2^18 policies
    for method in Method::ALL {
        let tm = instance(3, 3, 2, 2, 1e-3, 0.02, method);
        let (vt, _) = backward_induction(&tm);
        let cells = tm.grids().cells();
        let slots = 2 * cells;
        let mut best: Vec<Option<f64>> = vec![None; cells];
        for code in 0u32..(1 << slots) {
            let choice: Vec<usize> = (0..slots).map(|b| ((code >> b) & 1) as usize).collect();
            for (cell, v) in evaluate(&tm, &choice).into_iter().enumerate() {
                if v > best[cell] {
                    best[cell] = v;
                }
            }
        }
        assert_eq!(vt.layer(0), &best[..], "{method}");
        assert!(best.iter().any(Option::is_some), "{method}: toy has no live cell");
    }
}

#[test]
fn truncation_keeps_the_prefix_boundaries() {
    let plan = SegmentPlan::new(1.0, 1.01, 5e-4).unwrap();
    let short = plan.truncated().unwrap();
    assert_eq!(short.n_segments(), 19);
    for i in 0..19 {
        assert_eq!(short.h_of(i).to_bits(), plan.h_of(i).to_bits());
    }
    assert_eq!(short.dh(), plan.dh());
    assert!(SegmentPlan::with_segments(1.0, 1.01, 1).unwrap().truncated().is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// One more segment can only burn more fuel or kill more cells. Values are
    /// convex combinations of grid masses, so they may differ by roundoff.
    #[test]
    fn extra_segment_never_raises_value(
        nv in 2usize..8, nm in 2usize..8, nu in 2usize..5, n in 2usize..6,
        dh in 5e-4f64..2e-3, v_eps in 1e-3f64..0.05, method in 0usize..3,
    ) {
        let full = instance(nv, nm, nu, n, dh, v_eps, Method::ALL[method]);
        let plan = full.plan().truncated().unwrap();
        let p = ModelParams { h_t: plan.h_of(plan.n_segments()), ..ModelParams::default() };
        let short = build_transitions(&plan, full.grids(), &Stepper::new(Method::ALL[method]), &p);
        let (vf, _) = backward_induction(&full);
        let (vs, _) = backward_induction(&short);
        for layer in 0..n {
            for cell in 0..full.grids().cells() {
                match (vf.value(layer, cell), vs.value(layer, cell)) {
                    (Some(a), Some(b)) => prop_assert!(a <= b + 1e-12, "layer {} cell {}: {} > {}", layer, cell, a, b),
                    (Some(a), None) => prop_assert!(false, "layer {} cell {}: {} alive only with the extra segment", layer, cell, a),
                    _ => {}
                }
            }
        }
    }
}
