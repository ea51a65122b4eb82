//! Randomized invariants of the core pipeline.

use proptest::prelude::*;

use anie::basis::haar_basis;
use anie::coeffs::{ProjectOptions, interval_counts, project};
use anie::events::{Directedness, Event, EventStream, load_events, rescale, save_events};

fn arb_events(n_nodes: u32, max_len: usize) -> impl Strategy<Value = Vec<Event>> {
    prop::collection::vec((0..n_nodes, 0..n_nodes, 0.0f64..=1.0), 0..max_len)
        .prop_map(|v| v.into_iter().map(|(u, v, t)| Event { u, v, t }).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_identity(events in arb_events(6, 60)) {
        let stream = EventStream::new(6, 1.0, events, Directedness::Directed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.csv");
        save_events(&stream, &path).unwrap();
        let back = load_events(&path, &Default::default()).unwrap();
        prop_assert_eq!(back.n_nodes(), stream.n_nodes());
        prop_assert_eq!(back.directedness(), stream.directedness());
        prop_assert_eq!(back.events(), stream.events());
    }

    #[test]
    fn rescale_is_idempotent_and_normalizes(events in arb_events(5, 40), horizon in 0.5f64..200.0) {
        let scaled: Vec<Event> = events
            .iter()
            .map(|e| Event { u: e.u, v: e.v, t: e.t * horizon })
            .collect();
        let stream = EventStream::new(5, horizon, scaled, Directedness::Directed).unwrap();
        let once = rescale(&stream).unwrap();
        prop_assert_eq!(once.horizon(), 1.0);
        prop_assert!(once.events().iter().all(|e| (0.0..=1.0).contains(&e.t)));
        let twice = rescale(&once).unwrap();
        prop_assert_eq!(once.events(), twice.events());
    }

    #[test]
    fn symmetrized_stream_is_swap_invariant(events in arb_events(5, 40)) {
        let stream =
            EventStream::new(5, 1.0, events, Directedness::UndirectedSymmetrized).unwrap();
        let mut pairs: Vec<(u32, u32)> = stream.events().iter().map(|e| (e.u, e.v)).collect();
        let mut swapped: Vec<(u32, u32)> = pairs.iter().map(|&(u, v)| (v, u)).collect();
        pairs.sort_unstable();
        swapped.sort_unstable();
        prop_assert_eq!(pairs, swapped);
    }

    #[test]
    fn haar_counting_identity(events in arb_events(4, 80), level in 0u32..4) {
        let stream = EventStream::new(4, 1.0, events, Directedness::Directed).unwrap();
        let basis = haar_basis(level + 1);
        let coeffs = project(&stream, &basis, ProjectOptions::default()).unwrap();
        let fine = interval_counts(&stream, level + 1, ProjectOptions::default()).unwrap();
        let amp = ((1u64 << level) as f64).sqrt();
        for (u, v, bins) in &fine.counts {
            for k in 0..(1u32 << level) {
                let left = bins[(2 * k) as usize] as i64;
                let right = bins[(2 * k + 1) as usize] as i64;
                let want = (left - right) as f64 * amp;
                let id = basis.haar_detail_id(level, k);
                let got = coeffs.get(id, *u, *v).map(|e| e.coeff).unwrap_or(0.0);
                prop_assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn coefficient_keys_require_support_events(events in arb_events(4, 60)) {
        // A stored key under a detail function implies at least one event of
        // that pair inside the function's support, and sq stays nonnegative.
        let stream = EventStream::new(4, 1.0, events, Directedness::Directed).unwrap();
        let basis = haar_basis(3);
        let coeffs = project(&stream, &basis, ProjectOptions::default()).unwrap();
        for f in basis.functions() {
            for e in coeffs.entries(f.id) {
                prop_assert!(e.sq >= 0.0);
                let hit = stream.events().iter().any(|ev| {
                    ev.u == e.u
                        && ev.v == e.v
                        && ev.t >= f.support.start
                        && ev.t <= f.support.end
                });
                prop_assert!(hit, "key ({}, {}) without support event", e.u, e.v);
            }
        }
    }

    #[test]
    fn eval_squared_is_exact_square(t in 0.0f64..=1.0, levels in 0u32..6) {
        let basis = haar_basis(levels);
        for b in 0..basis.len() {
            let e = basis.eval(b, t).unwrap();
            prop_assert_eq!(basis.eval_squared(b, t).unwrap(), e * e);
        }
    }

    #[test]
    fn bh_mask_grows_with_alpha(
        ps in prop::collection::vec(0.0f64..=1.0, 1..16),
        a1 in 0.0f64..=1.0,
        a2 in 0.0f64..=1.0,
    ) {
        use anie::affinity::{TestScope, bh_threshold};
        use nalgebra::DMatrix;
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        // Build z-scores with the wanted two-sided p-values by bisection.
        let zs: Vec<f64> = ps
            .iter()
            .map(|&p| {
                let (mut a, mut b) = (0.0f64, 40.0f64);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if anie::stats::two_sided_p(mid) > p { a = mid } else { b = mid }
                }
                0.5 * (a + b)
            })
            .collect();
        let z = vec![DMatrix::from_row_slice(1, zs.len(), &zs)];
        let testable = vec![DMatrix::from_element(1, zs.len(), true)];
        let small = bh_threshold(&z, &testable, &TestScope::All, lo).unwrap();
        let large = bh_threshold(&z, &testable, &TestScope::All, hi).unwrap();
        for i in 0..zs.len() {
            prop_assert!(large.rejected[0][(0, i)] >= small.rejected[0][(0, i)]);
        }
    }
}
