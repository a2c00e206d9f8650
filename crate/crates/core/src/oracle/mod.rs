//! Independent checks on solver output: Monte-Carlo estimation of weighted
//! volumes, enumeration over Boolean assignments, and an exact
//! positive-volume test.

mod feasible;

pub use feasible::has_positive_measure;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::engine::{solve, EngineError, SolveOptions};
use crate::exact::{to_f64, Rational};
use crate::theory::{Literal, Problem, Theory, VarId, WeightEntry, WeightSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

impl Estimate {
    /// Whether `value` is within `k` standard errors of the mean.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (value - self.mean).abs() <= k * self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("at least one sample is required")]
    ZeroSamples,
    #[error("{0} Boolean variables is too many to enumerate (limit {MAX_BOOLEANS})")]
    TooManyBooleans(usize),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub const MAX_BOOLEANS: usize = 20;
const CHUNK: u64 = 1 << 16;

#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

enum Lit {
    Linear { terms: Vec<(usize, f64)>, constant: f64 },
    Bool { var: usize, positive: bool },
}

impl Lit {
    fn new(lit: &Literal) -> Lit {
        match lit {
            Literal::Linear(a) => Lit::Linear {
                terms: a.terms().iter().map(|(v, c)| (v.index(), to_f64(c))).collect(),
                constant: to_f64(a.constant()),
            },
            Literal::Bool { var, positive } => Lit::Bool {
                var: var.index(),
                positive: *positive,
            },
        }
    }

    fn holds(&self, reals: &[f64], bools: &[bool]) -> bool {
        match self {
            Lit::Linear { terms, constant } => terms.iter().map(|(v, c)| c * reals[*v]).sum::<f64>() + constant <= 0.0,
            Lit::Bool { var, positive } => bools[*var] == *positive,
        }
    }
}

/// Coefficient and `(slot, power)` factors.
type Term = (f64, Vec<(usize, i32)>);

struct Compiled {
    slots: usize,
    reals: Vec<(usize, f64, f64)>,
    bools: Vec<usize>,
    clauses: Vec<Vec<Lit>>,
    weights: Vec<(Vec<Lit>, Vec<Term>)>,
    unsat: bool,
}

impl Compiled {
    fn new(problem: &Problem) -> Compiled {
        let theory = &problem.theory;
        let table = problem.table();
        let reals = theory
            .real_vars()
            .map(|v| {
                let (lo, hi) = table.domain(v).expect("real");
                (v.index(), to_f64(lo), to_f64(&(hi - lo)))
            })
            .collect();
        Compiled {
            slots: table.len(),
            reals,
            bools: theory.bool_vars().map(VarId::index).collect(),
            clauses: theory
                .clauses()
                .iter()
                .map(|c| c.literals().iter().map(Lit::new).collect())
                .collect(),
            weights: problem
                .weights
                .entries
                .iter()
                .map(|e| {
                    let terms = e
                        .poly
                        .terms
                        .iter()
                        .map(|m| (to_f64(&m.coeff), m.powers.iter().map(|(v, p)| (v.index(), *p as i32)).collect()))
                        .collect();
                    (e.guard.iter().map(Lit::new).collect(), terms)
                })
                .collect(),
            unsat: theory.is_unsat(),
        }
    }

    fn scale(&self) -> f64 {
        let volume: f64 = self.reals.iter().map(|(_, _, w)| w).product();
        volume * 2f64.powi(self.bools.len() as i32)
    }

    fn weight(&self, reals: &mut [f64], bools: &mut [bool], rng: &mut ChaCha8Rng) -> f64 {
        for (i, lo, width) in &self.reals {
            reals[*i] = lo + width * rng.gen::<f64>();
        }
        for b in &self.bools {
            bools[*b] = rng.gen();
        }
        if !self.clauses.iter().all(|c| c.iter().any(|l| l.holds(reals, bools))) {
            return 0.0;
        }
        let mut w = 1.0;
        for (guard, terms) in &self.weights {
            if guard.iter().all(|l| l.holds(reals, bools)) {
                w *= terms
                    .iter()
                    .map(|(c, powers)| c * powers.iter().map(|(v, p)| reals[*v].powi(*p)).product::<f64>())
                    .sum::<f64>();
            }
        }
        w
    }
}

/// Uniform sampling over the domain box and the Boolean assignments.
/// Chunk `i` draws from stream `i` of a ChaCha generator seeded with
/// `seed`, so results do not depend on the thread count.
pub fn mc_wmi(problem: &Problem, samples: u64, seed: u64) -> Result<Estimate, OracleError> {
    if samples == 0 {
        return Err(OracleError::ZeroSamples);
    }
    let compiled = Compiled::new(problem);
    if compiled.unsat {
        return Ok(Estimate {
            mean: 0.0,
            std_error: 0.0,
            samples,
            seed,
        });
    }
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<(Kahan, Kahan)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let count = CHUNK.min(samples - chunk * CHUNK);
            let mut reals = vec![0.0; compiled.slots];
            let mut bools = vec![false; compiled.slots];
            let (mut s, mut s2) = (Kahan::default(), Kahan::default());
            for _ in 0..count {
                let w = compiled.weight(&mut reals, &mut bools, &mut rng);
                s.add(w);
                s2.add(w * w);
            }
            (s, s2)
        })
        .collect();
    let (mut s, mut s2) = (Kahan::default(), Kahan::default());
    for (a, b) in parts {
        s.add(a.sum);
        s2.add(b.sum);
    }
    let n = samples as f64;
    let mean = s.sum / n;
    let variance = if samples > 1 {
        ((s2.sum / n - mean * mean) * n / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let scale = compiled.scale();
    Ok(Estimate {
        mean: scale * mean,
        std_error: scale * (variance / n).sqrt(),
        samples,
        seed,
    })
}

/// How each Boolean-free subproblem is evaluated.
#[derive(Debug, Clone)]
pub enum Inner {
    Exact(SolveOptions),
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnumeratedValue {
    Exact(Rational),
    Estimate(Estimate),
}

/// The problem with every Boolean fixed; weights on decided literals are
/// either kept unguarded or dropped.
pub fn condition(problem: &Problem, assignment: &[(VarId, bool)]) -> Problem {
    let mut theory: Theory = problem.theory.clone();
    for (v, value) in assignment {
        theory = theory.assign_bool(*v, *value);
    }
    let value_of = |v: VarId| assignment.iter().find(|(u, _)| *u == v).map(|(_, b)| *b);
    let entries = problem
        .weights
        .entries
        .iter()
        .filter_map(|e| {
            let mut guard = Vec::new();
            for lit in &e.guard {
                match lit {
                    Literal::Bool { var, positive } => match value_of(*var) {
                        Some(b) if b == *positive => {}
                        Some(_) => return None,
                        None => guard.push(lit.clone()),
                    },
                    other => guard.push(other.clone()),
                }
            }
            Some(WeightEntry {
                guard,
                poly: e.poly.clone(),
            })
        })
        .collect();
    Problem {
        theory,
        weights: WeightSpec { entries },
    }
}

/// Sums the value of every Boolean assignment's real-only subproblem.
pub fn enumerate_booleans_wmi(problem: &Problem, inner: &Inner) -> Result<EnumeratedValue, OracleError> {
    let bools: Vec<VarId> = problem.theory.bool_vars().collect();
    if bools.len() > MAX_BOOLEANS {
        return Err(OracleError::TooManyBooleans(bools.len()));
    }
    let assignments = 1u64 << bools.len();
    let conditioned = |mask: u64| {
        let assignment: Vec<(VarId, bool)> = bools.iter().enumerate().map(|(i, v)| (*v, mask >> i & 1 == 1)).collect();
        condition(problem, &assignment)
    };
    match inner {
        Inner::Exact(options) => {
            let mut total = Rational::default();
            for mask in 0..assignments {
                total += solve(&conditioned(mask), options)?.value;
            }
            Ok(EnumeratedValue::Exact(total))
        }
        Inner::MonteCarlo { samples, seed } => {
            let (mut mean, mut var) = (0.0, 0.0);
            for mask in 0..assignments {
                let e = mc_wmi(&conditioned(mask), *samples, seed.wrapping_add(mask.wrapping_mul(0x9E37_79B9_7F4A_7C15)))?;
                mean += e.mean;
                var += e.std_error * e.std_error;
            }
            Ok(EnumeratedValue::Estimate(Estimate {
                mean,
                std_error: var.sqrt(),
                samples: samples * assignments,
                seed: *seed,
            }))
        }
    }
}
