//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trilab::exact::{cluster_functionals, cycle_size_resolved, cycle_two_point};
use trilab::kernel::{l2_membership_diagnostic, triangle_condition_diagnostic};
use trilab::lemma_lab::{proof_pipeline, verify_lemma, Verdict};
use trilab::monte_carlo::mc_two_point;
use trilab::operators::{
    default_psd_tol, is_psd, sqrt_psd, symmetric_eigen, tail_bound_check, verify_decomposition,
    verify_spectral_identity,
};
use trilab::{
    ConfigurationCounts, EnumerationOptions, Matrix64, McOptions, PercolationModel, SizeResolvedFamily64,
    SpectralChain, SymmetricOperator, TransitiveGraph, TwoPointMatrix64, VertexVector,
};

const BATTERY: [&str; 6] = ["complete:2", "complete:3", "complete:4", "cycle:6", "cycle:8", "torus:2,3"];
const PROBABILITIES: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

type Outcome = Result<String, String>;

struct Model {
    name: String,
    graph: TransitiveGraph,
    p: f64,
    b: TwoPointMatrix64,
    family: SizeResolvedFamily64,
}

fn graph(spec: &str) -> TransitiveGraph {
    TransitiveGraph::build(spec.parse().expect("graph spec")).expect("graph")
}

fn battery_models() -> Vec<Model> {
    let mut models = Vec::new();
    for spec in BATTERY {
        let g = graph(spec);
        let counts = ConfigurationCounts::enumerate(&g, EnumerationOptions { edge_cap: 24, workers: 4 }).unwrap();
        for p in PROBABILITIES {
            models.push(Model {
                name: format!("{spec}@{p}"),
                b: counts.two_point(p),
                family: counts.size_resolved(p),
                graph: TransitiveGraph::build(g.family()).unwrap(),
                p,
            });
        }
    }
    models
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.1?}, limit {limit:?}"))
}

fn oracle_equivalence(models: &[Model]) -> Outcome {
    let start = Instant::now();
    let mut total = 0usize;
    let mut within = 0usize;
    for (i, m) in models.iter().enumerate() {
        let model = PercolationModel::new(&m.graph, m.p).unwrap();
        let est = mc_two_point(&model, McOptions::new(100_000, 1000 + i as u64).full().workers(4))
            .map_err(|e| e.to_string())?;
        let n = m.graph.vertex_count();
        for v in 0..n {
            for w in 0..n {
                total += 1;
                let diff = (est.mean[(v, w)] - m.b.get(v, w)).abs();
                if diff <= 4.0 * est.stderr[(v, w)] || diff <= 1e-12 {
                    within += 1;
                }
            }
        }
    }
    let frac = within as f64 / total as f64;
    ensure(frac >= 0.99, || format!("{within}/{total} entries within 4σ"))?;
    within_time(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("{within}/{total} entries within 4σ ({:.2}%)", 100.0 * frac))
}

fn decomposition_identity(models: &[Model]) -> Outcome {
    let mut worst = 0.0f64;
    for m in models {
        let r = verify_decomposition(&m.b, &m.family, 1e-12).map_err(|e| e.to_string())?;
        ensure(r.pass, || format!("{}: residual {:.3e}", m.name, r.max_residual))?;
        worst = worst.max(r.max_residual);
    }
    Ok(format!("{} models, max residual {worst:.3e}", models.len()))
}

fn positivity(models: &[Model]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut lmin = f64::INFINITY;
    let mut worst_gap = 0.0f64;
    for m in models {
        for (n, bn) in m.family.iter() {
            let verdict = is_psd(&SymmetricOperator::try_from(bn.clone()).unwrap(), 1e-9).unwrap();
            ensure(verdict.min_eigenvalue >= -1e-9, || {
                format!("{} B_{n}: λ_min = {:.3e}", m.name, verdict.min_eigenvalue)
            })?;
            lmin = lmin.min(verdict.min_eigenvalue);
        }
        let nv = m.graph.vertex_count();
        let fs = (0..50)
            .map(|_| VertexVector::from_vec((0..nv).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
            .collect::<Vec<_>>();
        let model = PercolationModel::new(&m.graph, m.p).unwrap();
        let functionals = cluster_functionals(&model, &fs, EnumerationOptions::default()).unwrap();
        for (f, row) in fs.iter().zip(&functionals) {
            for (n, bn) in m.family.iter() {
                let bf = bn.mul_vec(f.as_slice()).unwrap();
                let quad: f64 = bf.iter().zip(f.as_slice()).map(|(a, b)| a * b).sum();
                let gap = (quad - row[n - 1]).abs();
                ensure(gap <= 1e-12, || format!("{} n = {n}: |⟨B_n f,f⟩ − functional| = {gap:.3e}", m.name))?;
                worst_gap = worst_gap.max(gap);
            }
        }
    }
    Ok(format!("min λ = {lmin:.3e}, max functional gap {worst_gap:.3e}"))
}

fn chains(models: &[Model]) -> Vec<SpectralChain<f64>> {
    models.iter().map(|m| SpectralChain::new(&m.b, &m.family, default_psd_tol()).expect("PSD family")).collect()
}

fn spectral_identity(models: &[Model], chains: &[SpectralChain<f64>]) -> Outcome {
    let mut worst = 0.0f64;
    let mut pairs = 0usize;
    for (m, chain) in models.iter().zip(chains) {
        let n = m.graph.vertex_count();
        for v in 0..n {
            for w in 0..n {
                let r = verify_spectral_identity(chain, v, w, 1e-8);
                ensure(r.pass, || {
                    format!("{} ({v},{w}): errors {:.3e} / {:.3e}", m.name, r.relative_error, r.direct_relative_error)
                })?;
                worst = worst.max(r.relative_error).max(r.direct_relative_error);
                pairs += 1;
            }
        }
    }
    Ok(format!("{pairs} pairs, max relative error {worst:.3e}"))
}

fn tail_bound(models: &[Model], chains: &[SpectralChain<f64>]) -> Outcome {
    let mut checks = 0usize;
    let mut gap = 0.0f64;
    for (m, chain) in models.iter().zip(chains) {
        let n = m.graph.vertex_count();
        for v in 0..n {
            for w in 0..n {
                for cut in 0..=chain.family_len() {
                    let r = tail_bound_check(chain, v, w, cut);
                    ensure(r.inequality_holds && r.norms_agree, || {
                        format!("{} ({v},{w}) N = {cut}: slack {:.3e}", m.name, r.slack)
                    })?;
                    checks += 1;
                }
            }
        }
        for k in 1..=chain.family_len() {
            let norms = (0..n).map(|x| chain.norm(k, x)).collect::<Vec<_>>();
            for a in &norms {
                for b in &norms {
                    gap = gap.max((a - b).abs());
                }
            }
        }
    }
    ensure(gap <= 1e-8, || format!("norm gap {gap:.3e}"))?;
    Ok(format!("{checks} tail checks, max norm gap {gap:.3e}"))
}

/// `f = Σ_j a_j B 1_{u_j}` for a few random vertices near `v`, with a random `δ`.
fn random_lemma_case(rng: &mut ChaCha8Rng, g: &TransitiveGraph, b: &Matrix64) -> (VertexVector<f64>, usize, f64) {
    let n = g.vertex_count();
    let v = rng.gen_range(0..n);
    let near = g.ball(v, 3);
    let mut f = vec![0.0; n];
    for _ in 0..rng.gen_range(1..=3) {
        let u = near[rng.gen_range(0..near.len())];
        let a: f64 = rng.gen_range(-1.0..1.0);
        for (x, col) in f.iter_mut().zip(b.column(u)) {
            *x += a * col;
        }
    }
    let f = VertexVector::from_vec(f).unwrap();
    let delta = rng.gen_range(0.02..0.5) * f.dot(&f);
    (f, v, delta)
}

fn lemma(rng_seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let cycle = graph("cycle:50");
    let cycle_b = cycle_two_point(50, 0.3).unwrap().into_matrix();
    let torus = graph("torus:2,16");
    let model = PercolationModel::new(&torus, 0.3).unwrap();
    let est = mc_two_point(&model, McOptions::new(100_000, 7).workers(4)).unwrap();
    let torus_b = est.expanded_mean(&torus).unwrap();
    let (mut pass, mut vacuous) = (0, 0);
    for (g, b) in [(&cycle, &cycle_b), (&torus, &torus_b)] {
        for _ in 0..20 {
            let (f, v, delta) = random_lemma_case(&mut rng, g, b);
            let r = verify_lemma(g, &f, v, delta).map_err(|e| e.to_string())?;
            match r.verdict {
                Verdict::Pass => {
                    ensure(r.separated && r.local_overlap_zero && r.worst_overlap.unwrap() < delta, || {
                        "pass verdict without its conditions".into()
                    })?;
                    pass += 1;
                }
                Verdict::Vacuous => vacuous += 1,
                Verdict::Fail => {
                    return Err(format!(
                        "{} v = {v}, δ = {delta:.3e}: R = {}, worst overlap {:?}",
                        g.family(),
                        r.radius,
                        r.worst_overlap
                    ))
                }
            }
        }
    }
    ensure(pass > 0, || "every case was vacuous".into())?;
    Ok(format!("{pass} pass, {vacuous} vacuous, 0 fail"))
}

fn pipeline() -> Outcome {
    let start = Instant::now();
    let g = graph("cycle:24");
    let run = || {
        let b = cycle_two_point(24, 0.3).unwrap();
        let family = cycle_size_resolved(24, 0.3).unwrap();
        proof_pipeline(&g, &b, &family, 0, 0.1).map_err(|e| e.to_string())
    };
    let first = run()?;
    let second = run()?;
    ensure(first == second, || "two runs disagree".into())?;
    ensure(first.verdict != Verdict::Fail, || format!("verdict fail, worst Q {:?}", first.worst_q))?;
    if first.verdict == Verdict::Pass {
        ensure(first.worst_q.unwrap() <= 0.1, || "far Q above ε".into())?;
    }
    within_time(start.elapsed(), Duration::from_secs(30))?;
    let verdict = format!("{:?}", first.verdict).to_lowercase();
    Ok(format!("N = {}, R = {}, verdict {verdict}", first.n_cut, first.radius))
}

fn frontiers() -> Outcome {
    let start = Instant::now();
    for d in [3, 4, 5, 6] {
        let v = triangle_condition_diagnostic(d).map_err(|e| e.to_string())?;
        ensure(!v.class.is_convergent(), || format!("triangle d = {d}: {}", v.class.as_str()))?;
    }
    for d in [7, 8, 10] {
        let v = triangle_condition_diagnostic(d).map_err(|e| e.to_string())?;
        ensure(v.class.is_convergent(), || format!("triangle d = {d}: {}", v.class.as_str()))?;
    }
    for d in [8, 10, 12] {
        let v = l2_membership_diagnostic(d).map_err(|e| e.to_string())?;
        ensure(!v.class.is_convergent(), || format!("l2 d = {d}: {}", v.class.as_str()))?;
    }
    for d in [13, 15] {
        let v = l2_membership_diagnostic(d).map_err(|e| e.to_string())?;
        ensure(v.class.is_convergent(), || format!("l2 d = {d}: {}", v.class.as_str()))?;
    }
    within_time(start.elapsed(), Duration::from_secs(60))?;
    Ok("triangle divergent d ≤ 6, convergent d ≥ 7; l2 divergent d ≤ 12, convergent d ≥ 13".into())
}

fn eigensolver(models: &[Model]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=64);
        let mut m = Matrix64::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let x = rng.gen_range(-1.0..1.0);
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        let eig =
            symmetric_eigen(&SymmetricOperator::try_from(m.clone()).unwrap(), 1e-12).map_err(|e| e.to_string())?;
        let rec = eig.reconstruction_residual(&m);
        let orth = eig.orthonormality_residual();
        ensure(rec <= 1e-10 && orth <= 1e-10, || format!("{n}x{n}: residuals {rec:.3e}, {orth:.3e}"))?;
        worst = worst.max(rec).max(orth);
    }
    let mut worst_sqrt = 0.0f64;
    for m in models {
        for (n, bn) in m.family.iter() {
            let s = sqrt_psd(&SymmetricOperator::try_from(bn.clone()).unwrap(), 1e-9).map_err(|e| e.to_string())?;
            let back = s.matrix().matmul(s.matrix()).unwrap();
            let scale = bn.frobenius_norm();
            let err = back.sub(bn).unwrap().frobenius_norm();
            let rel = if scale > 0.0 { err / scale } else { err };
            ensure(rel <= 1e-8, || format!("{} B_{n}: sqrt round-trip {rel:.3e}", m.name))?;
            worst_sqrt = worst_sqrt.max(rel);
        }
    }
    Ok(format!("max eigen residual {worst:.3e}, max sqrt round-trip {worst_sqrt:.3e}"))
}

fn trilab(args: &[&str], dir: Option<&Path>) -> Result<(), String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_trilab"));
    cmd.args(args);
    if let Some(dir) = dir {
        cmd.arg("--out").arg(dir);
    }
    let out = cmd.output().map_err(|e| e.to_string())?;
    // Exit 1 is a verification verdict, still a complete run.
    match out.status.code() {
        Some(0) | Some(1) => Ok(()),
        code => Err(format!("{args:?} exited with {code:?}: {}", String::from_utf8_lossy(&out.stderr))),
    }
}

fn same_tree(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names =
        std::fs::read_dir(a).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect::<Vec<_>>();
    names.sort();
    let other = std::fs::read_dir(b).map_err(|e| e.to_string())?.count();
    ensure(other == names.len(), || format!("{} vs {other} files", names.len()))?;
    for name in &names {
        let x = std::fs::read(a.join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(name)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{} differs", name.to_string_lossy()))?;
    }
    Ok(names.len())
}

fn determinism() -> Outcome {
    let runs: &[&[&str]] = &[
        &["exact", "--graph", "torus:2,3", "--p", "0.5", "--workers", "4"],
        &["verify", "--which", "spectral", "--graph", "complete:3", "--p", "0.3"],
        &["verify", "--which", "pipeline", "--graph", "cycle:24", "--p", "0.3", "--epsilon", "0.1"],
        &[
            "verify",
            "--which",
            "lemma",
            "--graph",
            "torus:2,8",
            "--p",
            "0.3",
            "--source",
            "mc",
            "--samples",
            "20000",
            "--workers",
            "3",
        ],
        &["mc", "--graph", "torus:2,16", "--p", "0.3", "--samples", "100000", "--workers", "4"],
        &[
            "mc",
            "--graph",
            "cycle:8",
            "--p",
            "0.4",
            "--samples",
            "20000",
            "--seed",
            "5",
            "--workers",
            "3",
            "--full",
            "--n-max",
            "4",
        ],
        &["kernel", "--which", "l2", "--d", "12"],
        &["kernel", "--which", "box", "--d", "3", "--L", "4,8"],
        &["open-triangle", "--graph", "cycle:24", "--p", "0.3", "--source", "closed-form"],
        &[
            "open-triangle",
            "--graph",
            "torus:2,8",
            "--p",
            "0.3",
            "--source",
            "mc",
            "--samples",
            "20000",
            "--workers",
            "2",
        ],
    ];
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for (i, args) in runs.iter().enumerate() {
        let first = tmp.path().join(format!("run{i}"));
        let again = tmp.path().join(format!("again{i}"));
        let replay = tmp.path().join(format!("replay{i}"));
        trilab(args, Some(&first))?;
        trilab(args, Some(&again))?;
        let manifest = first.join("manifest.json");
        trilab(&["replay", manifest.to_str().unwrap()], Some(&replay))?;
        same_tree(&first, &again).map_err(|e| format!("{}: rerun {e}", args[0]))?;
        files += same_tree(&first, &replay).map_err(|e| format!("{}: replay {e}", args[0]))?;
    }
    Ok(format!("{} runs, {files} files replayed byte-identically", runs.len()))
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {id:>2} {name}: {detail} [{secs:.2}s]"),
            Err(detail) => {
                failures += 1;
                println!("FAIL  {id:>2} {name}: {detail} [{secs:.2}s]");
            }
        }
    };
    let models = battery_models();
    let chains = chains(&models);
    report(1, "oracle equivalence", &mut || oracle_equivalence(&models));
    report(2, "decomposition identity", &mut || decomposition_identity(&models));
    report(3, "positivity", &mut || positivity(&models));
    report(4, "spectral identity", &mut || spectral_identity(&models, &chains));
    report(5, "tail bound and norm transitivity", &mut || tail_bound(&models, &chains));
    report(6, "localization lemma", &mut || lemma(11));
    report(7, "proof pipeline", &mut pipeline);
    report(8, "dimension frontiers", &mut frontiers);
    report(9, "eigensolver quality", &mut || eigensolver(&models));
    report(10, "determinism", &mut determinism);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
