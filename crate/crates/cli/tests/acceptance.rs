//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::f64::consts::{LN_2, SQRT_2};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use qdent::classical::{cycle_walk, entropy_rate, markov_entropy, matrix_power};
use qdent::entropy::{conditional_entropy, eta, JointDistribution, Partition, ProbVector};
use qdent::quantum::{
    apply_instrument, index_labels, maximally_mixed, outcome_pmf, pure_state, DensityState,
    Instrument, Operator,
};
use qdent::sz::{
    classify_constant_runs, cylinder_probability, dynamical_entropy, markov_reduction,
    measurement_entropy, sz_entropy_run, SzOptions, SzRun,
};
use qdent::walks::{
    coin_position_instrument, coined_walk, hadamard_eigenvector, hadamard_walk, integer_shift,
    position_instrument, unitary_power, vertex_partition, ShiftPermutation,
};
use qdent_cli::paper_check;

#[path = "../../core/tests/common/mod.rs"]
mod common;
use common::{coords, density, general_instrument, lvn_from_groups, unitary, weights};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn lib<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn within(limit: Duration, started: Instant, what: &str) -> Result<(), String> {
    let took = started.elapsed();
    if took < limit {
        Ok(())
    } else {
        Err(format!("{what} took {took:.2?}, limit {limit:?}"))
    }
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut worst = 0.0f64;
    for n in [3, 5, 7] {
        let p = lib(cycle_walk(n))?;
        let mu = lib(ProbVector::uniform(n))?;
        let h1 = lib(markov_entropy(&p, &mu))?;
        let h2 = lib(markov_entropy(&lib(matrix_power(&p, 2))?, &mu))?;
        worst = worst.max((h1 - LN_2).abs()).max((h2 - 1.5 * LN_2).abs());
    }
    ensure!(worst < 1e-12, "max error {worst:e}");
    within(Duration::from_secs(1), started, "cycle entropies")?;
    Ok(format!("max error {worst:.1e}"))
}

fn criterion_2() -> Outcome {
    let n = 5;
    let nf = n as f64;
    let w = lib(hadamard_walk(n))?;
    let t = lib(coin_position_instrument(n))?;
    let rho = lib(pure_state(&lib(hadamard_eigenvector(n))?))?;
    let (p, mu0) = lib(markov_reduction(&w.unitary, &t, &rho))?;
    let r = (3.0 + 2.0 * SQRT_2) / (nf * (4.0 + 2.0 * SQRT_2));
    for v in 0..n {
        ensure!((mu0[v] - r).abs() < 1e-12, "p(R,{v}) = {}, want {r}", mu0[v]);
    }
    let pm = p.apply(mu0.as_slice());
    let flat = pm.iter().map(|x| (x - 1.0 / (2.0 * nf)).abs()).fold(0.0, f64::max);
    ensure!(flat < 1e-12, "P·mu0 deviates from uniform by {flat:e}");
    let moved = pm.iter().zip(mu0.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure!(moved > 1e-3, "mu0 looks invariant");
    let rate = lib(entropy_rate(&p, &mu0, 5, 1e-9))?;
    let h = rate.converged_value.ok_or("entropy rate did not converge by depth 5")?;
    ensure!((h - LN_2).abs() < 1e-9, "rate {h}");
    Ok(format!("rate error {:.1e}", (h - LN_2).abs()))
}

fn criterion_3() -> Outcome {
    let started = Instant::now();
    let n = 5;
    let w = lib(hadamard_walk(n))?;
    let t = lib(coin_position_instrument(n))?;
    let rho = lib(maximally_mixed(2 * n))?;
    let cv = lib(vertex_partition(n))?;
    let opts = SzOptions {
        n_min: 10,
        ..SzOptions::default()
    };
    let mut worst = 0.0f64;
    for (m, want) in [(1, LN_2), (2, 1.5 * LN_2)] {
        let um = lib(unitary_power(&w, m))?;
        let run = lib(sz_entropy_run(&um, &t, &rho, &cv, &opts))?;
        let a = run.conditional_entropies();
        ensure!(a.len() >= 11, "only {} increments", a.len());
        for x in &a[1..=10] {
            worst = worst.max((x - want).abs());
        }
    }
    ensure!(worst < 1e-10, "max error {worst:e}");
    within(Duration::from_secs(5), started, "vertex-block runs")?;
    Ok(format!("max error {worst:.1e}"))
}

fn criterion_4() -> Outcome {
    let started = Instant::now();
    let n = 5;
    let w = lib(hadamard_walk(n))?;
    let t = lib(position_instrument(n))?;
    let rho = lib(maximally_mixed(2 * n))?;
    let c = lib(Partition::atomic(n))?;
    let opts = SzOptions::default();
    ensure!(opts.merge, "merging disabled by default");

    let r1 = lib(dynamical_entropy(&w.unitary, &t, &rho, &c, &opts))?;
    let h1 = r1.dynamical_entropy.ok_or("one-step run did not converge")?;
    ensure!((h1 - LN_2).abs() < 1e-9, "one step: {h1}");
    ensure!(r1.sz_entropy.steps_used <= 6, "one step needed depth {}", r1.sz_entropy.steps_used - 1);

    let u2 = lib(unitary_power(&w, 2))?;
    let r2 = lib(dynamical_entropy(&u2, &t, &rho, &c, &opts))?;
    let h2 = r2.dynamical_entropy.ok_or("two-step run did not converge")?;
    let want = 4.0 / 3.0 * LN_2;
    ensure!((h2 - want).abs() < 1e-5, "two steps: {h2}");
    ensure!(r2.sz_entropy.steps_used <= 26, "two steps needed depth {}", r2.sz_entropy.steps_used - 1);
    within(Duration::from_secs(30), started, "rank-2 runs")?;
    Ok(format!(
        "h(Θ²) = {h2:.12} at depth {}, error {:.1e}",
        r2.sz_entropy.steps_used - 1,
        (h2 - want).abs()
    ))
}

fn criterion_5() -> Outcome {
    let n = 5;
    let u2 = lib(unitary_power(&lib(hadamard_walk(n))?, 2))?;
    let t = lib(position_instrument(n))?;
    let rho = lib(maximally_mixed(2 * n))?;
    let opts = SzOptions {
        track_runs: true,
        ..SzOptions::default()
    };
    let mut run = lib(SzRun::start(&u2, &t, &rho, &lib(Partition::atomic(n))?, &opts))?;
    let mut prev: Option<(f64, f64, f64)> = None;
    let mut last = (0.0, 0.0, 0.0);
    for k in 0..=14 {
        let m = lib(classify_constant_runs(&run))?;
        let c_err = (m.c - 0.5f64.powi(k)).abs();
        ensure!(c_err < 1e-12, "c_{k} off by {c_err:e}");
        if let Some((pc, pe, po)) = prev {
            ensure!((m.e - (po + 0.5 * (pe + pc))).abs() < 1e-10, "e_{k} recursion");
            ensure!((m.o - 0.5 * pe).abs() < 1e-10, "o_{k} recursion");
        }
        prev = Some((m.c, m.e, m.o));
        last = (m.c, m.e, m.o);
        if k < 14 {
            lib(run.advance())?;
        }
    }
    let gap = (last.1 - 2.0 / 3.0).abs();
    ensure!(gap < 3e-4, "e_14 = {}", last.1);
    Ok(format!("e_14 = {:.6}", last.1))
}

fn criterion_6() -> Outcome {
    let n = 5;
    let xs: Vec<f64> = (0..8 * n * n).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
    let states: [DensityState; 3] = [
        lib(maximally_mixed(2 * n))?,
        lib(pure_state(&lib(hadamard_eigenvector(n))?))?,
        density(2 * n, &xs),
    ];
    let cases = [
        (lib(coin_position_instrument(n))?, lib(Partition::atomic(2 * n))?),
        (lib(coin_position_instrument(n))?, lib(vertex_partition(n))?),
        (lib(position_instrument(n))?, lib(Partition::atomic(n))?),
    ];
    let opts = SzOptions {
        n_min: 10,
        ..SzOptions::default()
    };
    let mut runs = 0;
    for (t, c) in &cases {
        for rho in &states {
            let r = lib(measurement_entropy(t, rho, c, &opts))?;
            ensure!(r.direct_sequence[1..].iter().all(|&a| a == 0.0), "nonzero a_n");
            ensure!(r.converged_value == Some(0.0), "limit {:?}", r.converged_value);
            runs += 1;
        }
    }
    Ok(format!("{runs} instrument/state pairs"))
}

fn criterion_7() -> Outcome {
    let n = 5;
    let w = lib(hadamard_walk(n))?;
    let u2 = lib(unitary_power(&w, 2))?;
    let rho = lib(maximally_mixed(2 * n))?;
    let opts = SzOptions::default();
    let scenarios = [
        ("coherent", lib(coin_position_instrument(n))?, lib(vertex_partition(n))?),
        ("rank-2", lib(position_instrument(n))?, lib(Partition::atomic(n))?),
    ];
    let mut gaps = Vec::new();
    for (name, t, c) in &scenarios {
        let r1 = lib(dynamical_entropy(&w.unitary, t, &rho, c, &opts))?;
        let r2 = lib(dynamical_entropy(&u2, t, &rho, c, &opts))?;
        let h1 = r1.dynamical_entropy.ok_or("no limit")?;
        let h2 = r2.dynamical_entropy.ok_or("no limit")?;
        let gap = (h2 - 2.0 * h1).abs();
        ensure!(gap > 0.25, "{name}: |h(Θ²) − 2h(Θ)| = {gap}");
        let bound = (c.len() as f64).ln() + 1e-12;
        for r in [&r1, &r2] {
            let seqs = [&r.sz_entropy.direct_sequence, &r.sz_entropy.cesaro_sequence];
            ensure!(
                seqs.iter().all(|s| s.iter().all(|&x| x <= bound)),
                "{name}: entropy above ln {}",
                c.len()
            );
        }
        gaps.push(format!("{name} gap {gap:.4}"));
    }
    Ok(gaps.join(", "))
}

/// `⟨a_0|ρ|a_0⟩ · Π |⟨a_k|U|a_{k−1}⟩|²` on the computational basis.
fn product_formula(u: &Operator, rho: &DensityState, seq: &[usize]) -> f64 {
    let m = u.matrix();
    let mut p = rho.op().matrix()[(seq[0], seq[0])].re;
    for w in seq.windows(2) {
        p *= m[(w[1], w[0])].norm_sqr();
    }
    p
}

fn criterion_8() -> Outcome {
    let started = Instant::now();
    let n = 5;
    let dim = 2 * n;
    let u = lib(hadamard_walk(n))?.unitary;
    let kraus = lib(coin_position_instrument(n))?.kraus().to_vec();
    let general = lib(Instrument::general(kraus, index_labels(dim)))?;
    let xs: Vec<f64> = (0..8 * n * n).map(|i| ((i * 53 % 97) as f64 / 48.0) - 1.0).collect();
    let states = [
        lib(maximally_mixed(dim))?,
        lib(pure_state(&lib(hadamard_eigenvector(n))?))?,
        density(dim, &xs),
    ];
    let step: Vec<Vec<usize>> = (0..dim)
        .map(|j| (0..dim).filter(|&i| u.matrix()[(i, j)].norm() > 0.0).collect())
        .collect();

    let mut count = 0usize;
    let mut worst = 0.0f64;
    for rho in &states {
        let mut stack: Vec<Vec<usize>> = (0..dim).map(|a| vec![a]).collect();
        while let Some(seq) = stack.pop() {
            let blocks: Vec<Vec<usize>> = seq.iter().map(|&a| vec![a]).collect();
            let got = lib(cylinder_probability(&u, &general, rho, &blocks))?;
            worst = worst.max((got - product_formula(&u, rho, &seq)).abs());
            count += 1;
            // Up to six steps after the initial outcome.
            if seq.len() < 7 {
                for &next in &step[*seq.last().unwrap()] {
                    let mut s = seq.clone();
                    s.push(next);
                    stack.push(s);
                }
            }
        }
    }
    ensure!(count == 3 * dim * 127, "visited {count} sequences");
    ensure!(worst < 1e-12, "max deviation {worst:e}");
    within(Duration::from_secs(10), started, "cylinder sweep")?;
    Ok(format!("{count} cylinders, max deviation {worst:.1e}"))
}

const PROPERTY_CASES: u32 = 256;

fn property<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<String, String> {
    let ran = Cell::new(0u32);
    let mut runner = TestRunner::new(Config {
        cases: PROPERTY_CASES,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, |v| {
            ran.set(ran.get() + 1);
            test(v)
        })
        .map_err(|e| format!("{name}: {e}"))?;
    ensure!(ran.get() >= 200, "{name}: only {} cases", ran.get());
    Ok(format!("{name} {}", ran.get()))
}

fn joint_from(w: &[f64], nc: usize) -> JointDistribution {
    JointDistribution::new(w.iter().enumerate().map(|(i, &p)| (vec![i % nc, i / nc], p))).unwrap()
}

fn criterion_9() -> Outcome {
    let mut done = Vec::new();

    done.push(property(
        "chain rule",
        (1usize..5, 1usize..5).prop_flat_map(|(a, b)| (Just(a), weights(a * b))),
        |(nc, w)| {
            let joint = joint_from(&w, nc);
            let lhs = joint.entropy();
            let rhs = joint.marginal(&[1]).unwrap().entropy() + conditional_entropy(&joint).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
            Ok(())
        },
    )?);

    done.push(property(
        "monotonicity",
        (1usize..4, 2usize..6).prop_flat_map(|(a, b)| {
            (Just(a), weights(a * b), prop::collection::vec(0usize..3, b))
        }),
        |(nc, w, g)| {
            let fine = joint_from(&w, nc);
            let mut coarse = BTreeMap::new();
            for (k, &p) in fine.support() {
                *coarse.entry(vec![k[0], g[k[1]]]).or_insert(0.0) += p;
            }
            let coarse = JointDistribution::new(coarse).unwrap();
            prop_assert!(
                conditional_entropy(&fine).unwrap() <= conditional_entropy(&coarse).unwrap() + 1e-12
            );
            Ok(())
        },
    )?);

    done.push(property(
        "η subadditivity",
        prop::collection::vec(0.0f64..1.0, 1..8),
        |raw| {
            let s: f64 = raw.iter().sum();
            let scale = if s > 1.0 { 1.0 / s } else { 1.0 };
            let a: Vec<f64> = raw.iter().map(|x| x * scale).collect();
            let total: f64 = a.iter().sum();
            let rhs: f64 = a.iter().map(|&x| eta(x).unwrap()).sum();
            prop_assert!(eta(total.min(1.0)).unwrap() <= rhs + 1e-12);
            Ok(())
        },
    )?);

    done.push(property(
        "trace preservation",
        (1usize..=4, 1usize..=3, any::<bool>()).prop_flat_map(|(d, k, lvn)| {
            (
                Just(d),
                Just(k),
                Just(lvn),
                coords(2 * k * d * d),
                coords(2 * d * d),
                prop::collection::vec(0usize..3, d),
            )
        }),
        |(d, k, lvn, xs, rs, groups)| {
            let t = if lvn { lvn_from_groups(d, &groups, &xs) } else { general_instrument(d, k, &xs) };
            let rho = density(d, &rs);
            let all: Vec<usize> = (0..t.len()).collect();
            let out = apply_instrument(&t, &all, rho.op()).unwrap();
            prop_assert!((out.trace().re - 1.0).abs() < 1e-10);
            let p = outcome_pmf(&t, &rho).unwrap();
            prop_assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-10);
            Ok(())
        },
    )?);

    done.push(property(
        "walk unitarity",
        (1usize..=3, 2usize..=6, any::<bool>()).prop_flat_map(|(c, v, integer)| {
            (
                Just(c),
                Just(v),
                prop::collection::vec(coords(2 * c * c), v),
                Just((0..c * v).collect::<Vec<usize>>()).prop_shuffle(),
                Just(integer && c == 2),
            )
        }),
        |(c, v, coin_xs, sigma, integer)| {
            let coins: Vec<Operator> = coin_xs.iter().map(|xs| unitary(c, xs)).collect();
            let shift = if integer {
                integer_shift(v).unwrap()
            } else {
                ShiftPermutation::new(sigma, c, v).unwrap()
            };
            let w = coined_walk(shift, coins).unwrap();
            prop_assert!(w.unitary.unitarity_residual() < 1e-10);
            let h = hadamard_walk(v + 1).unwrap();
            prop_assert!(h.unitary.unitarity_residual() < 1e-10);
            Ok(())
        },
    )?);

    done.push(property(
        "merge on/off",
        (2usize..=3, 2usize..=3, any::<bool>(), 3usize..=8).prop_flat_map(|(d, k, lvn, depth)| {
            (
                Just((d, k, lvn, depth)),
                coords(2 * d * d),
                coords(2 * k * d * d),
                coords(2 * d * d),
                prop::collection::vec(0usize..k, d),
                prop::collection::vec(0usize..3, k.max(d)),
            )
        }),
        |((d, k, lvn, depth), us, ts, rs, groups, keys)| {
            let t = if lvn { lvn_from_groups(d, &groups, &ts) } else { general_instrument(d, k, &ts) };
            let c = Partition::from_key_fn(t.len(), |i| keys[i]).unwrap();
            let u = unitary(d, &us);
            let rho = density(d, &rs);
            let grow = |opts: SzOptions| {
                let mut run = SzRun::start(&u, &t, &rho, &c, &opts).unwrap();
                for _ in 0..depth {
                    run.advance().unwrap();
                }
                run.conditional_entropies().to_vec()
            };
            let merged = grow(SzOptions::default());
            let plain = grow(SzOptions { merge: false, ..SzOptions::default() });
            prop_assert_eq!(merged.len(), plain.len());
            for (x, y) in merged.iter().zip(&plain) {
                prop_assert!((x - y).abs() < 1e-10);
            }
            Ok(())
        },
    )?);

    Ok(done.join(", "))
}

fn criterion_10() -> Outcome {
    let started = Instant::now();
    let rows = lib(paper_check())?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed()).map(|r| r.name).collect();
    ensure!(failed.is_empty(), "failing rows: {}", failed.join(", "));
    within(Duration::from_secs(60), started, "reproduction table")?;
    Ok(format!("{} rows", rows.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("classical cycle entropies", criterion_1),
        ("coherent-state eigenstate chain", criterion_2),
        ("vertex-block partition", criterion_3),
        ("rank-2 instrument", criterion_4),
        ("class dynamics", criterion_5),
        ("zero measurement entropy", criterion_6),
        ("nonlinearity in time", criterion_7),
        ("cylinder oracle", criterion_8),
        ("property suites", criterion_9),
        ("reproduction table", criterion_10),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check)
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let took = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {:>2} {name} ({took:.2} s): {detail}", i + 1),
            Err(why) => {
                failures += 1;
                println!("[FAIL] {:>2} {name} ({took:.2} s): {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
