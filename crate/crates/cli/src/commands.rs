use std::fmt::Write as _;

use anyhow::Result;
use serde::Serialize;
use serde_json::{json, Value};
use trilab::exact::{cycle_size_resolved, cycle_two_point};
use trilab::kernel::{box_slopes, l2_membership_diagnostic, triangle_condition_diagnostic, ConvergenceVerdict};
use trilab::lemma_lab::{proof_pipeline_with_chain, verify_lemma, Verdict};
use trilab::matrix::format_sig17;
use trilab::monte_carlo::{mc_size_resolved, mc_two_point};
use trilab::operators::{
    default_psd_tol, is_psd, open_triangle_profile, tail_bound_check, triangle_diagram, verify_decomposition,
    verify_spectral_identity, OpenTriangleProfile,
};
use trilab::{
    ConfigurationCounts, EnumerationOptions, GraphFamily, LabError, MCEstimate, Matrix64, McOptions, PercolationModel,
    RowSelection, SizeResolvedFamily64, SpectralChain, SymmetricOperator, TransitiveGraph, TwoPointMatrix64,
    VertexVector,
};

use crate::args::{
    Check, ExactArgs, GraphArgs, KernelArgs, KernelCheck, McArgs, OpenTriangleArgs, RunCommand, SamplingArgs, Source,
    VerifyArgs,
};
use crate::manifest::{Caps, OutputDir};

/// Cycles with more edges than this use the closed forms under `--source auto`.
const AUTO_ENUMERATION_EDGES: usize = 20;
const DECOMPOSITION_TOL: f64 = 1e-12;
const SPECTRAL_TOL: f64 = 1e-8;
const NORM_TOL: f64 = 1e-8;

/// Runs one subcommand; `Ok(false)` is a verification failure.
pub fn run(cmd: &RunCommand, caps: Caps) -> Result<bool> {
    match cmd {
        RunCommand::Exact(a) => exact(cmd, a, caps),
        RunCommand::Verify(a) => verify(cmd, a, caps),
        RunCommand::Mc(a) => mc(cmd, a, caps),
        RunCommand::Kernel(a) => kernel(cmd, a, caps),
        RunCommand::OpenTriangle(a) => open_triangle(cmd, a, caps),
    }
}

fn build_graph(model: &GraphArgs, caps: Caps) -> Result<TransitiveGraph> {
    let g = TransitiveGraph::build_with_budget(model.graph, caps.vertex_budget)?;
    PercolationModel::new(&g, model.p)?;
    Ok(g)
}

fn check_vertex(g: &TransitiveGraph, v: usize) -> Result<()> {
    if v >= g.vertex_count() {
        return Err(LabError::InvalidParameter(format!("vertex {v} out of range 0..{}", g.vertex_count())).into());
    }
    Ok(())
}

fn resolve(g: &TransitiveGraph, source: Source) -> Source {
    match source {
        Source::Auto if is_cycle(g) && g.edge_count() > AUTO_ENUMERATION_EDGES => Source::ClosedForm,
        Source::Auto => Source::Exact,
        s => s,
    }
}

fn is_cycle(g: &TransitiveGraph) -> bool {
    matches!(g.family(), GraphFamily::Cycle { .. })
}

fn source_name(s: Source) -> &'static str {
    match s {
        Source::Auto => "auto",
        Source::Exact => "exact",
        Source::ClosedForm => "closed-form",
        Source::Mc => "mc",
    }
}

fn enumerate(g: &TransitiveGraph, caps: Caps, workers: usize) -> Result<ConfigurationCounts> {
    Ok(ConfigurationCounts::enumerate(g, EnumerationOptions { edge_cap: caps.edge_cap, workers })?)
}

fn closed_form_cycle(g: &TransitiveGraph) -> Result<usize> {
    match g.family() {
        GraphFamily::Cycle { n } => Ok(n),
        other => Err(LabError::InvalidParameter(format!("closed forms exist only for cycles, not {other}")).into()),
    }
}

/// `B` and the full family `B_1..B_|V|` from enumeration or the cycle closed forms.
fn resolved_model(
    g: &TransitiveGraph,
    p: f64,
    source: Source,
    caps: Caps,
    workers: usize,
) -> Result<(TwoPointMatrix64, SizeResolvedFamily64)> {
    match source {
        Source::Exact | Source::Auto => {
            let counts = enumerate(g, caps, workers)?;
            Ok((counts.two_point(p), counts.size_resolved(p)))
        }
        Source::ClosedForm => {
            let n = closed_form_cycle(g)?;
            Ok((cycle_two_point(n, p)?, cycle_size_resolved(n, p)?))
        }
        Source::Mc => Err(LabError::InvalidParameter(
            "this check needs the size-resolved family; use --source exact or closed-form".into(),
        )
        .into()),
    }
}

fn mc_options(s: &SamplingArgs, rows: RowSelection) -> McOptions {
    let mut opts = McOptions::new(s.samples, s.seed).workers(s.workers);
    opts.rows = rows;
    opts
}

fn exact(cmd: &RunCommand, a: &ExactArgs, caps: Caps) -> Result<bool> {
    let g = build_graph(&a.model, caps)?;
    let counts = enumerate(&g, caps, a.workers)?;
    let b = counts.two_point(a.model.p);
    let family = counts.size_resolved(a.model.p);
    let q = triangle_diagram(b.matrix())?;
    let decomposition = verify_decomposition(&b, &family, DECOMPOSITION_TOL)?;

    let mut out = OutputDir::create(&a.out)?;
    out.write("B.csv", &b.matrix().to_csv())?;
    for (n, bn) in family.iter() {
        out.write(&format!("B_n{n}.csv"), &bn.to_csv())?;
    }
    out.write("Q.csv", &q.matrix().to_csv())?;
    let summary = json!({
        "graph": g.describe(),
        "p": a.model.p,
        "configurations": 1u64 << g.edge_count(),
        "decomposition": decomposition,
        "triangle_value": q.get(0, 0),
    });
    out.finish(cmd, caps, summary)?;
    println!(
        "{}: {} vertices, {} edges; max |B - sum_n B_n| = {:.3e} ({})",
        a.model.graph,
        g.vertex_count(),
        g.edge_count(),
        decomposition.max_residual,
        pass_word(decomposition.pass)
    );
    Ok(decomposition.pass)
}

#[derive(Serialize)]
struct VerifyReport {
    check: Check,
    graph: trilab::graphs::GraphDescription,
    p: f64,
    source: &'static str,
    vertex: usize,
    pass: bool,
    details: Value,
}

fn verify(cmd: &RunCommand, a: &VerifyArgs, caps: Caps) -> Result<bool> {
    let g = build_graph(&a.model, caps)?;
    check_vertex(&g, a.vertex)?;
    let source = resolve(&g, a.source);
    let p = a.model.p;
    let v = a.vertex;
    let (pass, details) = match a.which {
        Check::Psd => {
            let (_, family) = resolved_model(&g, p, source, caps, a.sampling.workers)?;
            let tol = a.tol.unwrap_or_else(default_psd_tol);
            let mut sizes = Vec::with_capacity(family.len());
            let mut all = true;
            for (n, bn) in family.iter() {
                let verdict = is_psd(&SymmetricOperator::try_from(bn.clone())?, tol)?;
                all &= verdict.is_psd;
                sizes.push(json!({ "n": n, "min_eigenvalue": verdict.min_eigenvalue, "pass": verdict.is_psd }));
            }
            (all, json!({ "tolerance": tol, "sizes": sizes }))
        }
        Check::Decompose => {
            let (b, family) = resolved_model(&g, p, source, caps, a.sampling.workers)?;
            let report = verify_decomposition(&b, &family, a.tol.unwrap_or(DECOMPOSITION_TOL))?;
            (report.pass, serde_json::to_value(&report)?)
        }
        Check::Spectral => {
            let chain = chain(&g, p, source, caps, a.sampling.workers)?;
            spectral(&chain, g.vertex_count(), a.tol.unwrap_or(SPECTRAL_TOL))
        }
        Check::Tail => {
            let chain = chain(&g, p, source, caps, a.sampling.workers)?;
            tail(&chain, g.vertex_count(), v, a.tol.unwrap_or(NORM_TOL))
        }
        Check::Lemma => {
            let f = two_point_column(&g, p, source, caps, &a.sampling, v)?;
            let report = verify_lemma(&g, &f, v, a.delta)?;
            (report.verdict == Verdict::Pass, serde_json::to_value(&report)?)
        }
        Check::Pipeline => {
            let chain = chain(&g, p, source, caps, a.sampling.workers)?;
            let report = proof_pipeline_with_chain(&g, &chain, v, a.epsilon)?;
            (report.verdict == Verdict::Pass, serde_json::to_value(&report)?)
        }
    };
    let report =
        VerifyReport { check: a.which, graph: g.describe(), p, source: source_name(source), vertex: v, pass, details };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    print!("{text}");
    if let Some(dir) = &a.out {
        let mut out = OutputDir::create(dir)?;
        out.write("report.json", &text)?;
        out.finish(cmd, caps, json!({ "check": a.which, "pass": pass }))?;
    }
    Ok(pass)
}

fn chain(g: &TransitiveGraph, p: f64, source: Source, caps: Caps, workers: usize) -> Result<SpectralChain<f64>> {
    let (b, family) = resolved_model(g, p, source, caps, workers)?;
    Ok(SpectralChain::new(&b, &family, default_psd_tol())?)
}

fn spectral(chain: &SpectralChain<f64>, n: usize, tol: f64) -> (bool, Value) {
    let mut worst = (0.0f64, 0usize, 0usize);
    let mut worst_direct = 0.0f64;
    let mut all = true;
    for v in 0..n {
        for w in 0..n {
            let r = verify_spectral_identity(chain, v, w, tol);
            all &= r.pass;
            if r.relative_error > worst.0 {
                worst = (r.relative_error, v, w);
            }
            worst_direct = worst_direct.max(r.direct_relative_error);
        }
    }
    let details = json!({
        "tolerance": tol,
        "pairs": n * n,
        "max_relative_error": worst.0,
        "worst_pair": [worst.1, worst.2],
        "max_direct_relative_error": worst_direct,
    });
    (all, details)
}

fn tail(chain: &SpectralChain<f64>, n: usize, v: usize, tol: f64) -> (bool, Value) {
    let mut checks = 0usize;
    let mut violations = 0usize;
    let mut min_slack = f64::INFINITY;
    for w in 0..n {
        for cut in 0..=chain.family_len() {
            let r = tail_bound_check(chain, v, w, cut);
            checks += 1;
            if !(r.inequality_holds && r.norms_agree) {
                violations += 1;
            }
            min_slack = min_slack.min(r.slack);
        }
    }
    let mut norm_gap = 0.0f64;
    for k in 1..=chain.family_len() {
        let norms = (0..n).map(|x| chain.norm(k, x)).collect::<Vec<_>>();
        let hi = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = norms.iter().copied().fold(f64::INFINITY, f64::min);
        norm_gap = norm_gap.max(hi - lo);
    }
    let pass = violations == 0 && norm_gap <= tol;
    let details = json!({
        "checks": checks,
        "violations": violations,
        "min_slack": min_slack,
        "max_norm_gap": norm_gap,
        "norm_tolerance": tol,
    });
    (pass, details)
}

/// `B 1_v`, from an exact source or a single-row Monte Carlo estimate.
fn two_point_column(
    g: &TransitiveGraph,
    p: f64,
    source: Source,
    caps: Caps,
    sampling: &SamplingArgs,
    v: usize,
) -> Result<VertexVector<f64>> {
    let column = match source {
        Source::Mc => {
            let model = PercolationModel::new(g, p)?;
            let est = mc_two_point(&model, mc_options(sampling, RowSelection::Root(v)))?;
            est.mean.row(0).to_vec()
        }
        Source::ClosedForm => cycle_two_point(closed_form_cycle(g)?, p)?.matrix().column(v),
        Source::Exact | Source::Auto => enumerate(g, caps, sampling.workers)?.two_point(p).matrix().column(v),
    };
    Ok(VertexVector::from_vec(column)?)
}

fn mc(cmd: &RunCommand, a: &McArgs, caps: Caps) -> Result<bool> {
    let g = build_graph(&a.model, caps)?;
    check_vertex(&g, a.root)?;
    let model = PercolationModel::new(&g, a.model.p)?;
    let rows = if a.full { RowSelection::Full } else { RowSelection::Root(a.root) };
    let opts = mc_options(&a.sampling, rows);
    let mut out = OutputDir::create(&a.out)?;
    let total = match a.n_max {
        Some(n_max) => {
            let est = mc_size_resolved(&model, opts, n_max)?;
            for (i, bn) in est.by_size.iter().enumerate() {
                write_estimate(&mut out, &format!("B_n{}", i + 1), bn, a.full)?;
            }
            write_estimate(&mut out, "B_overflow", &est.overflow, a.full)?;
            est.total
        }
        None => mc_two_point(&model, opts)?,
    };
    write_estimate(&mut out, "B", &total, a.full)?;
    let summary = json!({ "graph": g.describe(), "provenance": total.provenance });
    out.finish(cmd, caps, summary)?;
    println!(
        "{}: {} samples, seed {}, {} worker(s), generator {}",
        a.model.graph,
        total.provenance.samples,
        total.provenance.seed,
        total.provenance.workers,
        total.provenance.generator
    );
    Ok(true)
}

fn write_estimate(out: &mut OutputDir, stem: &str, est: &MCEstimate, full: bool) -> Result<()> {
    if full {
        out.write(&format!("{stem}_mean.csv"), &est.mean.to_csv())?;
        out.write(&format!("{stem}_stderr.csv"), &est.stderr.to_csv())?;
    } else {
        let mut csv = String::from("vertex,mean,stderr\n");
        for w in 0..est.mean.cols() {
            writeln!(csv, "{w},{},{}", format_sig17(est.mean[(0, w)]), format_sig17(est.stderr[(0, w)]))?;
        }
        out.write(&format!("{stem}_row.csv"), &csv)?;
    }
    Ok(())
}

/// Frontier table: the triangle is finite iff `d > 6`, the `l²` condition iff `d > 12`.
fn expected_convergent(which: KernelCheck, d: u32) -> bool {
    match which {
        KernelCheck::Triangle => d > 6,
        KernelCheck::L2 => d > 12,
        KernelCheck::Box => false,
    }
}

fn kernel(cmd: &RunCommand, a: &KernelArgs, caps: Caps) -> Result<bool> {
    let mut csv = String::new();
    let (verdict, summary) = match a.which {
        KernelCheck::Triangle | KernelCheck::L2 => {
            let diag: ConvergenceVerdict = match a.which {
                KernelCheck::Triangle => triangle_condition_diagnostic(a.d)?,
                _ => l2_membership_diagnostic(a.d)?,
            };
            csv.push_str("cutoff,partial_sum\n");
            for (r, s) in diag.series.cutoffs.iter().zip(&diag.series.partial_sums) {
                writeln!(csv, "{r},{}", format_sig17(*s))?;
            }
            let convergent = diag.class.is_convergent();
            println!(
                "d = {}: {} (slope {:.4}, increment ratio {:.4})",
                a.d,
                diag.class.as_str(),
                diag.slope,
                diag.increment_ratio
            );
            let summary = json!({
                "d": a.d,
                "exponent": diag.series.exponent,
                "class": diag.class,
                "slope": diag.slope,
                "increment_ratio": diag.increment_ratio,
            });
            (convergent, summary)
        }
        KernelCheck::Box => {
            let rows = box_slopes(a.d, &a.sizes, caps.box_budget)?;
            csv.push_str("L,value,slope\n");
            for (l, value, slope) in &rows {
                let slope = slope.map(format_sig17).unwrap_or_default();
                writeln!(csv, "{l},{},{slope}", format_sig17(*value))?;
                println!("d = {}, L = {l}: {value:.6e} slope {slope}", a.d);
            }
            let last_slope = rows.last().and_then(|r| r.2);
            let summary = json!({
                "d": a.d,
                "sizes": rows.iter().map(|r| r.0).collect::<Vec<_>>(),
                "values": rows.iter().map(|r| r.1).collect::<Vec<_>>(),
                "last_slope": last_slope,
            });
            // A growing box sum reads as a divergent triangle.
            (last_slope.is_some_and(|s| s <= 0.0), summary)
        }
    };
    let pass = !a.expect || verdict == expected_convergent(a.which, a.d);
    if a.expect {
        println!("frontier table: {}", pass_word(pass));
    }
    if let Some(dir) = &a.out {
        let mut out = OutputDir::create(dir)?;
        out.write("kernel.csv", &csv)?;
        out.finish(cmd, caps, json!({ "result": summary, "expect": a.expect, "pass": pass }))?;
    }
    Ok(pass)
}

fn open_triangle(cmd: &RunCommand, a: &OpenTriangleArgs, caps: Caps) -> Result<bool> {
    let g = build_graph(&a.model, caps)?;
    check_vertex(&g, a.vertex)?;
    let source = resolve(&g, a.source);
    let p = a.model.p;
    let (profile, uncertainty) = match source {
        Source::Mc => {
            let model = PercolationModel::new(&g, p)?;
            let est = mc_two_point(&model, mc_options(&a.sampling, RowSelection::Root(a.vertex)))?;
            let mean = est.expanded_mean(&g)?;
            let stderr = est.expanded_stderr(&g)?;
            let q = triangle_diagram(&mean)?;
            let profile = open_triangle_profile(&g, &q, a.vertex)?;
            let var = cube_variance(&mean, &stderr)?;
            let se: Vec<f64> = profile.points.iter().map(|pt| var[(a.vertex, pt.argmax)].max(0.0).sqrt()).collect();
            (profile, Some(se))
        }
        Source::ClosedForm => {
            let b = cycle_two_point(closed_form_cycle(&g)?, p)?;
            (open_triangle_profile(&g, &triangle_diagram(b.matrix())?, a.vertex)?, None)
        }
        Source::Exact | Source::Auto => {
            let b = enumerate(&g, caps, a.sampling.workers)?.two_point(p);
            (open_triangle_profile(&g, &triangle_diagram(b.matrix())?, a.vertex)?, None)
        }
    };
    let csv = profile_csv(&profile, uncertainty.as_deref())?;
    let mut out = OutputDir::create(&a.out)?;
    out.write("profile.csv", &csv)?;
    let summary = json!({
        "graph": g.describe(),
        "source": source_name(source),
        "radii": profile.points.len(),
        "values": profile.values(),
    });
    out.finish(cmd, caps, summary)?;
    for pt in &profile.points {
        println!("R = {:>3}: {:.6e} at {}", pt.radius, pt.value, pt.argmax);
    }
    Ok(true)
}

/// First-order variance of `B³` from independent entrywise errors:
/// `σ²·(B²)^∘2 + B^∘2·σ²·B^∘2 + (B²)^∘2·σ²` with `∘2` the entrywise square.
fn cube_variance(b: &Matrix64, stderr: &Matrix64) -> Result<Matrix64> {
    let sq = |m: &Matrix64| m.map(|x| x * x);
    let var = sq(stderr);
    let b2 = b.matmul(b)?;
    let b2sq = sq(&b2);
    let bsq = sq(b);
    let left = var.matmul(&b2sq)?;
    let middle = bsq.matmul(&var)?.matmul(&bsq)?;
    let right = b2sq.matmul(&var)?;
    Ok(left.add(&middle)?.add(&right)?)
}

fn profile_csv(profile: &OpenTriangleProfile, stderr: Option<&[f64]>) -> Result<String> {
    let mut csv = String::from(if stderr.is_some() { "R,value,argmax,stderr\n" } else { "R,value,argmax\n" });
    for (i, pt) in profile.points.iter().enumerate() {
        write!(csv, "{},{},{}", pt.radius, format_sig17(pt.value), pt.argmax)?;
        if let Some(se) = stderr {
            write!(csv, ",{}", format_sig17(se[i]))?;
        }
        csv.push('\n');
    }
    Ok(csv)
}

fn pass_word(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}
