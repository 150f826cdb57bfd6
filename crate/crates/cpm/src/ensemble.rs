//! Parallel trajectory ensembles.
//!
//! Chunks are fixed by index, run on the rayon pool and folded in chunk order,
//! so the result does not depend on the number of threads.

use std::fmt::Write as _;

use cpm_core::trajectories::{Accumulator, EnsembleSpec};
use rayon::prelude::*;

pub fn run_parallel<A>(spec: &EnsembleSpec, empty: &A) -> A
where
    A: Accumulator + Send + Sync,
{
    let chunks: Vec<A> = (0..spec.n_chunks())
        .into_par_iter()
        .map(|c| spec.run_chunk(c, empty))
        .collect();
    EnsembleSpec::reduce(empty, chunks)
}

/// Tab-separated `trajectory_id  time  kind` lines for the first `n`
/// trajectories of the ensemble. `id_offset` is added to the trajectory index.
pub fn dump_events(spec: &EnsembleSpec, n: u64, id_offset: u64) -> String {
    let n = n.min(spec.n_traj);
    let parts: Vec<String> = (0..n)
        .into_par_iter()
        .map(|i| {
            let record = spec.record(i);
            let mut out = String::new();
            for e in &record.events {
                writeln!(out, "{}\t{}\t{}", i + id_offset, e.time, e.kind.as_str()).expect("writing to a String");
            }
            out
        })
        .collect();
    parts.concat()
}

#[cfg(test)]
mod tests {
    use super::*;
    use cpm_core::trajectories::CountAccumulator;
    use cpm_core::{DetectorParams, Model, StateKind};

    #[test]
    fn parallel_matches_serial() {
        let s = StateKind::Coherent(5.0).state().unwrap();
        let p = DetectorParams::new(1.0, 0.6, 0.05).unwrap();
        let empty = CountAccumulator::new(&[0.5, 1.0, 3.0]);
        let spec = EnsembleSpec::new(&s, p, Model::E, empty.horizon(), 10_000, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let par = pool.install(|| run_parallel(&spec, &empty));
        assert_eq!(par, spec.run_serial(&empty));
    }

    #[test]
    fn dump_lines() {
        let s = StateKind::Number(2).state().unwrap();
        let p = DetectorParams::new(1.0, 1.0, 0.0).unwrap();
        let spec = EnsembleSpec::new(&s, p, Model::Sd, 100.0, 3, 1).unwrap();
        let text = dump_events(&spec, 3, 0);
        assert_eq!(text.lines().count(), 6);
        assert!(text.lines().all(|l| l.split('\t').count() == 3 && l.ends_with("detected")));
    }
}
