//! Parallel Monte Carlo driver and table output.

use std::fmt::Write as _;

use itr_core::pipeline::Estimator;
use itr_core::sim::{self, run_replication, ReplicationRecord, Scenario, SimulationReport, Truth};
use itr_core::{DgpId, ProblemConfig, ReferenceKind};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::Error;

/// Stream reserved for the ground-truth sample.
const TRUTH_STREAM: u64 = u64::MAX;

/// RNG for replication `rep`: the master seed's key with the replication
/// index as the stream, so every replication is independent of scheduling.
pub fn child_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// How the ground truth is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthMethod {
    MonteCarlo { samples: usize },
    /// Midpoint rule, one-dimensional process only.
    Quadrature { points: usize },
}

impl TruthMethod {
    /// Quadrature for the parametric process, `10^6` draws otherwise.
    pub fn default_for(dgp: DgpId) -> Self {
        match dgp {
            DgpId::Parametric => TruthMethod::Quadrature { points: 1_000_000 },
            DgpId::Main => TruthMethod::MonteCarlo { samples: 2_000_000 },
        }
    }
}

pub fn compute_truth(dgp: DgpId, cfg: &ProblemConfig, method: TruthMethod, seed: u64) -> Result<Truth, Error> {
    Ok(match method {
        TruthMethod::MonteCarlo { samples } => {
            sim::truth_psi0(dgp, cfg, samples, &mut child_rng(seed, TRUTH_STREAM))?
        }
        TruthMethod::Quadrature { points } => {
            if dgp != DgpId::Parametric {
                return Err(Error::Config("quadrature truth is only available for the parametric DGP".into()));
            }
            sim::truth_quadrature(cfg, points)?
        }
    })
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, Error> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Run `reps` replications on at most `threads` workers. Output is sorted
/// by replication index.
pub fn run_replications(
    dgp: DgpId,
    est: &Estimator,
    n: usize,
    reps: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<ReplicationRecord>, Error> {
    let records = pool(threads)?.install(|| {
        (0..reps as u64)
            .into_par_iter()
            .map(|r| run_replication(r, dgp, est, n, &mut child_rng(seed, r)))
            .collect::<Vec<_>>()
    });
    Ok(records)
}

/// A Monte Carlo study.
#[derive(Debug, Clone)]
pub struct Study {
    pub scenario: Scenario,
    pub estimator: Estimator,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub truth: TruthMethod,
}

impl Study {
    /// Default estimator, truth method and threads for a scenario.
    pub fn new(scenario: Scenario, n: usize, reps: usize, seed: u64) -> Self {
        Self {
            scenario,
            estimator: Estimator::new(scenario.specs(), scenario.config()),
            n,
            reps,
            seed,
            threads: None,
            truth: TruthMethod::default_for(scenario.dgp),
        }
    }

    pub fn run(&self) -> Result<(SimulationReport, Vec<ReplicationRecord>), Error> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be ≥ 1".into()));
        }
        if self.n < 2 {
            return Err(Error::Config("n must be ≥ 2".into()));
        }
        let truth = compute_truth(self.scenario.dgp, &self.estimator.cfg, self.truth, self.seed)?;
        let recs = run_replications(self.scenario.dgp, &self.estimator, self.n, self.reps, self.seed, self.threads)?;
        let report = sim::summarize(self.scenario, self.n, self.seed, &truth, recs.clone());
        Ok((report, recs))
    }
}

/// Rows of metrics by reference, in the layout of the published tables.
pub fn format_table(r: &SimulationReport) -> String {
    let mut s = String::new();
    let mode = if r.oracle { "oracle nuisances" } else { "estimated nuisances" };
    let _ = writeln!(
        s,
        "dgp={} ({mode})  n={}  reps={}  failed={}  seed={}",
        r.dgp.as_str(),
        r.n,
        r.reps,
        r.failed,
        r.seed
    );
    let _ = write!(s, "{:<34}", "Performance measure");
    for x in &r.references {
        let _ = write!(s, "{:>10}", x.reference.as_str());
    }
    s.push('\n');
    type Row<'a> = (&'a str, fn(&sim::ReferenceSummary) -> String);
    let rows: [Row; 8] = [
        ("true ATE", |x| format!("{:.4}", x.psi0)),
        ("95% Wald CI coverage", |x| format!("{:.1}%", 100.0 * x.coverage_95)),
        ("97.5% lower bound coverage", |x| format!("{:.1}%", 100.0 * x.coverage_lower_975)),
        ("bias", |x| format!("{:.4}", x.bias)),
        ("RMSE", |x| format!("{:.4}", x.rmse)),
        ("mean SE / SD", |x| format!("{:.3}", x.se_sd_ratio)),
        ("median sqrt(n) x CI width", |x| format!("{:.3}", x.median_scaled_width)),
        ("SD of estimates", |x| format!("{:.4}", x.sd_psi)),
    ];
    for (label, f) in rows {
        let _ = write!(s, "{label:<34}");
        for x in &r.references {
            let _ = write!(s, "{:>10}", f(x));
        }
        s.push('\n');
    }
    s
}

/// Flat per-replication file: `rep,reference,psi,sigma,scaled_width`.
pub fn format_replications(recs: &[ReplicationRecord], n: usize) -> String {
    let mut s = String::from("rep,reference,psi,sigma,scaled_width\n");
    let sq = (n as f64).sqrt();
    for r in recs {
        for e in &r.estimates {
            let _ = writeln!(s, "{},{},{},{},{}", r.rep, e.reference.as_str(), e.psi, e.sigma, sq * (e.ci95.1 - e.ci95.0));
        }
    }
    s
}

pub fn reference_summary(r: &SimulationReport, k: ReferenceKind) -> Option<&sim::ReferenceSummary> {
    r.references.iter().find(|x| x.reference == k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_count_does_not_change_results() {
        let sc = Scenario::new(DgpId::Parametric, false);
        let mut st = Study::new(sc, 300, 6, 42);
        st.truth = TruthMethod::Quadrature { points: 10_000 };
        st.threads = Some(1);
        let (a, _) = st.run().unwrap();
        st.threads = Some(4);
        let (b, _) = st.run().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.reps, 6);
    }

    #[test]
    fn child_streams_differ() {
        use rand_chacha::rand_core::RngCore;
        assert_ne!(child_rng(1, 0).next_u64(), child_rng(1, 1).next_u64());
        assert_eq!(child_rng(1, 5).next_u64(), child_rng(1, 5).next_u64());
    }

    #[test]
    fn zero_reps_rejected() {
        let st = Study::new(Scenario::new(DgpId::Parametric, true), 100, 0, 1);
        assert!(st.run().unwrap_err().to_string().contains("reps must be ≥ 1"));
    }

    #[test]
    fn single_rep_table() {
        let mut st = Study::new(Scenario::new(DgpId::Parametric, true), 400, 1, 3);
        st.truth = TruthMethod::Quadrature { points: 10_000 };
        let (r, recs) = st.run().unwrap();
        for x in &r.references {
            assert!(x.coverage_95 == 0.0 || x.coverage_95 == 1.0);
            assert!((x.rmse - x.bias.abs()).abs() < 1e-12);
        }
        let t = format_table(&r);
        assert!(t.contains("95% Wald CI coverage"));
        assert_eq!(format_replications(&recs, 400).lines().count(), 4);
    }
}
