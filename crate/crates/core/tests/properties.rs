//! Property tests over random ADT call sequences and random workloads.

use std::sync::OnceLock;

use cadt_core::harness::{check_case, check_serializable, generate_case, run_simulated, FuzzConfig, Schedule};
use cadt_core::{Inverse, PublicInvocation, Registry, Translated, Value};
use proptest::prelude::*;

fn registry() -> &'static Registry {
    static REGISTRY: OnceLock<Registry> = OnceLock::new();
    REGISTRY.get_or_init(Registry::builtin)
}

const ADTS: [&str; 4] = ["stack", "set", "real", "boolean"];

/// Every sampled public call of an ADT, in a fixed order.
fn public_calls(adt: &str) -> Vec<PublicInvocation> {
    let spec = registry().get(adt).unwrap();
    spec.public_ops
        .iter()
        .flat_map(|op| {
            spec.semantics
                .public_args(op.name)
                .into_iter()
                .map(|args| PublicInvocation::new(op.name, args))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Undoing a sequence of translated calls in reverse order restores the
    /// initial state exactly.
    #[test]
    fn inverses_undo_any_sequence(
        adt in 0..ADTS.len(),
        start in any::<prop::sample::Index>(),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 0..8),
    ) {
        let spec = registry().get(ADTS[adt]).unwrap();
        let states = spec.semantics.sample_states();
        let initial = start.get(&states).clone();
        let calls = public_calls(ADTS[adt]);
        let mut state = initial.clone();
        let mut undo = Vec::new();
        for pick in &picks {
            let call = pick.get(&calls);
            if let Translated::Private { call: private, .. } = spec.translate_public(call).unwrap() {
                let (next, outs) = spec.apply(&state, &private).unwrap();
                if let Inverse::Apply(inverse) = spec.determine_inverse(&private, &outs).unwrap() {
                    undo.push(inverse);
                }
                state = next;
            }
        }
        for inverse in undo.iter().rev() {
            state = spec.apply(&state, inverse).unwrap().0;
        }
        prop_assert_eq!(state, initial);
    }

    /// A NULL translation leaves the state unchanged and reports the same
    /// outs the public operation would.
    #[test]
    fn null_translations_are_noops(adt in 0..ADTS.len(), start in any::<prop::sample::Index>()) {
        let spec = registry().get(ADTS[adt]).unwrap();
        let states = spec.semantics.sample_states();
        let state = start.get(&states);
        for call in public_calls(ADTS[adt]) {
            if let Translated::NullDirect(outs) = spec.translate_public(&call).unwrap() {
                let (after, real) = spec.apply_public(state, &call).unwrap();
                prop_assert_eq!(&after, state);
                prop_assert_eq!(real, outs);
            }
        }
    }

    /// Simulated runs of random workloads pass every oracle.
    #[test]
    fn simulated_runs_pass_all_oracles(seed in any::<u64>(), index in 0usize..1_000_000, abort_one in any::<bool>()) {
        let config = FuzzConfig { seed, abort_one, runs: 1, ..FuzzConfig::default() };
        let case = generate_case(&config, registry(), index).unwrap();
        let report = check_case(&case.workload, case.victim);
        prop_assert!(report.failure.is_none(), "{:?}\n{}", report.failure, case.workload.to_text());
        prop_assert!(report.max_executions <= 1);
    }

    /// Running the transactions strictly one after another is always
    /// accepted by the serializability oracle.
    #[test]
    fn serial_runs_are_serializable(seed in any::<u64>(), index in 0usize..1_000_000) {
        let config = FuzzConfig { seed, runs: 1, ..FuzzConfig::default() };
        let mut workload = generate_case(&config, registry(), index).unwrap().workload;
        let tokens = workload
            .txns
            .iter()
            .enumerate()
            .flat_map(|(t, txn)| std::iter::repeat_n(t, 2 * txn.ops.len() + 1))
            .collect();
        workload.schedule = Some(Schedule::Explicit(tokens));
        let outcome = run_simulated(&workload, None).unwrap();
        prop_assert_eq!(outcome.manager.history().count(cadt_core::history::EventKind::Block), 0);
        let verdict = check_serializable(&workload, &outcome);
        prop_assert!(verdict.is_accepted(), "{}", verdict);
    }
}

#[test]
fn sample_states_are_valid_states() {
    for adt in ADTS {
        let spec = registry().get(adt).unwrap();
        for state in spec.semantics.sample_states() {
            let rendered = spec.render_state(&state);
            let parsed = spec.parse_state(Some(&rendered)).unwrap();
            assert_eq!(parsed, state, "{adt} {rendered}");
            assert_ne!(state, Value::Unit);
        }
    }
}
