use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use polyharmonic::formats::{
    boundary_function, parse_vertex_map, vertex_map, ChainFile, NetworkFile, TreeFile, VertexMap, WireComplex,
};
use polyharmonic::mc::{compare_to_analytic, default_max_steps, simulate_hitting, SimConfig};
use polyharmonic::spectral::{
    interior_spectrum, network_spectrum_check, unit_eigenvalue_multiplicity, CHAIN_TOL, IMAG_TOL, RHO_MARGIN,
    SYMMETRY_TOL,
};
use polyharmonic::tree::{
    ktr_recursion_defect, polyharmonic_defect, BoundaryDistribution, ForwardTree, Section, KERNEL_TOL,
};
use polyharmonic::{
    derivative_identity_check, eval_polyharmonic, global_polyharmonic_basis, green, infinite_kernel_ktr,
    kernel_consistency_check, martin_kernel, restrict_to_section, riquier_via_kernels, solve_dirichlet,
    solve_riquier, tree_green, tree_kernel_kr, Chain64, Complex64, Error, RiquierProblem,
};
use serde::Serialize;

use crate::report::{RunReport, Verdict};

/// Malformed input: reported on one line, exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<Error> for InputError {
    fn from(e: Error) -> Self {
        InputError(format!("{}: {e}", e.name()))
    }
}

type Outcome<T> = std::result::Result<T, InputError>;

/// Tree kernels and the Green function are compared with the general solver
/// on the restricted chain to this relative accuracy.
const TREE_SOLVER_TOL: f64 = 1e-9;

pub struct Run {
    pub report: RunReport,
    pub inputs: Vec<String>,
    tol: Option<f64>,
}

impl Run {
    pub fn new(command: Vec<String>, tol: Option<f64>) -> Self {
        Self {
            report: RunReport::new(command),
            inputs: Vec::new(),
            tol,
        }
    }

    fn result(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("serializable");
        self.report.results.insert(key.to_string(), v);
    }

    fn residual(&mut self, key: &str, value: f64) {
        self.report.residuals.insert(key.to_string(), value);
    }

    /// Effective tolerance for the primary check: `--tol` if given.
    fn primary_tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    fn check(&mut self, name: &str, value: f64, tol: f64) {
        self.report.tolerances.insert(name.to_string(), tol);
        self.report.verdicts.push(Verdict {
            check: name.to_string(),
            passed: value <= tol,
            value: Some(value),
            tolerance: Some(tol),
            error: None,
            detail: None,
        });
    }

    fn flag(&mut self, name: &str, passed: bool, detail: String) {
        self.report.verdicts.push(Verdict {
            check: name.to_string(),
            passed,
            value: None,
            tolerance: None,
            error: None,
            detail: Some(detail),
        });
    }

    /// Input errors abort the run; numeric failures become a failed verdict.
    fn solve<T>(&mut self, name: &str, r: polyharmonic::Result<T>) -> Outcome<Option<T>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(e) if e.is_input_error() => Err(e.into()),
            Err(e) => {
                self.report.verdicts.push(Verdict {
                    check: name.to_string(),
                    passed: false,
                    value: None,
                    tolerance: None,
                    error: Some(e.name().to_string()),
                    detail: Some(e.to_string()),
                });
                Ok(None)
            }
        }
    }
}

pub fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}"));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected RE or RE,IM, got {s:?}")),
    }
}

fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Outcome<()> {
    fs::write(path, text).map_err(|e| InputError(format!("cannot write {}: {e}", path.display())))
}

fn wire(z: Complex64) -> WireComplex {
    WireComplex::from_complex(z)
}

fn load_chain(run: &mut Run, path: &Path) -> Outcome<Chain64> {
    let file = ChainFile::from_json(&read(path)?)?;
    let chain: Chain64 = file.to_chain()?;
    run.inputs.push(ChainFile::from_chain(&chain).to_json());
    Ok(chain)
}

fn load_map(run: &mut Run, path: &Path) -> Outcome<VertexMap> {
    let map = parse_vertex_map(&read(path)?)?;
    run.inputs.push(serde_json::to_string(&map).expect("serializable"));
    Ok(map)
}

fn vertex(chain: &Chain64, id: &str) -> Outcome<usize> {
    chain
        .index_of(id)
        .ok_or_else(|| InputError(format!("InvalidInput: unknown vertex {id}")))
}

fn boundary_map(chain: &Chain64, values: &[Complex64]) -> BTreeMap<String, WireComplex> {
    chain
        .boundary()
        .iter()
        .zip(values)
        .map(|(&w, &z)| (chain.id(w).to_string(), wire(z)))
        .collect()
}

pub fn validate(run: &mut Run, path: &Path, network: bool, emit: Option<&Path>) -> Outcome<()> {
    let text = read(path)?;
    let chain: Chain64 = if network {
        let file = NetworkFile::from_json(&text)?;
        let chain = file.to_chain()?;
        run.inputs.push(file.to_json());
        if let Some(out) = emit {
            write(out, &file.to_json())?;
        }
        chain
    } else {
        let chain: Chain64 = ChainFile::from_json(&text)?.to_chain()?;
        let canonical = ChainFile::from_chain(&chain).to_json();
        if let Some(out) = emit {
            write(out, &canonical)?;
        }
        run.inputs.push(canonical);
        chain
    };
    let nb = chain.boundary().len();
    run.result("vertices", chain.len());
    run.result("interior", chain.interior().len());
    run.result("boundary", nb);

    if let Some((alg, geo)) = run.solve("unit_eigenvalue", unit_eigenvalue_multiplicity(&chain))? {
        run.result("unit_eigenvalue_multiplicity", [alg, geo]);
        run.flag(
            "unit_eigenvalue",
            alg == nb && geo == nb,
            format!("algebraic {alg}, geometric {geo}, boundary {nb}"),
        );
    }
    if let Some(spec) = run.solve("spectral_radius", interior_spectrum(&chain))? {
        run.result("rho", spec.rho);
        run.check("spectral_radius", spec.rho, 1.0 - RHO_MARGIN);
    }
    if network {
        if let Some(r) = run.solve("network_spectrum", network_spectrum_check(&chain))? {
            run.check("symmetry", r.symmetry_defect, SYMMETRY_TOL);
            run.check("real_spectrum", r.max_imag, IMAG_TOL);
            let semisimple = r.multiplicities.iter().all(|(a, g)| a == g);
            run.flag("semisimple", semisimple, format!("(algebraic, geometric) {:?}", r.multiplicities));
        }
    }
    Ok(())
}

pub fn spectrum(run: &mut Run, path: &Path) -> Outcome<()> {
    let chain = load_chain(run, path)?;
    if let Some(spec) = run.solve("spectral_radius", interior_spectrum(&chain))? {
        let s = &spec.spectrum;
        let list: Vec<_> = s
            .eigenvalues
            .iter()
            .zip(&s.alg_mult)
            .map(|(&z, &m)| serde_json::json!({ "value": wire(z), "multiplicity": m }))
            .collect();
        run.result("eigenvalues", list);
        run.result("ill_conditioned", s.ill_conditioned);
        run.result("rho", spec.rho);
        run.residual("characteristic_polynomial", s.residuals.iter().copied().fold(0.0, f64::max));
        run.check("spectral_radius", spec.rho, 1.0 - RHO_MARGIN);
    }
    Ok(())
}

pub fn dirichlet(run: &mut Run, path: &Path, lambda: Complex64, g: &Path) -> Outcome<()> {
    let chain = load_chain(run, path)?;
    let g = boundary_function(&chain, &load_map(run, g)?)?;
    run.result("lambda", wire(lambda));
    if let Some(sol) = run.solve("solve", solve_dirichlet(&chain, lambda, &g))? {
        run.result("values", vertex_map(&chain, &sol.values));
        run.residual("max", sol.max_residual);
        let tol = run.primary_tol(sol.residual_tol);
        run.check("residual", sol.max_residual, tol);
    }
    Ok(())
}

pub fn riquier(run: &mut Run, path: &Path, lambda: Complex64, gs: &[PathBuf]) -> Outcome<()> {
    let chain = load_chain(run, path)?;
    let mut boundary = Vec::new();
    for g in gs {
        boundary.push(boundary_function(&chain, &load_map(run, g)?)?);
    }
    run.result("lambda", wire(lambda));
    run.result("order", boundary.len());
    let problem = RiquierProblem::new(lambda, boundary);
    if let Some(sol) = run.solve("solve", solve_riquier(&problem, &chain))? {
        run.result("values", vertex_map(&chain, &sol.values));
        if let Some(tower) = &sol.tower {
            let stages: Vec<_> = tower.iter().map(|f| vertex_map(&chain, f)).collect();
            run.result("tower", stages);
        }
        run.residual("max", sol.max_residual);
        let tol = run.primary_tol(sol.residual_tol);
        run.check("residual", sol.max_residual, tol);
    }
    Ok(())
}

pub fn global_basis(run: &mut Run, path: &Path, lambda: Complex64, n: usize) -> Outcome<()> {
    let chain = load_chain(run, path)?;
    run.result("lambda", wire(lambda));
    run.result("order", n);
    if let Some(b) = run.solve("jordan", global_polyharmonic_basis(&chain, lambda, n))? {
        let j = &b.jordan;
        run.result("geometric_multiplicity", j.geo_mult);
        run.result("algebraic_multiplicity", j.alg_mult);
        run.result("chain_lengths", &j.chain_lengths);
        run.result("rank_gap", j.rank_gap);
        let vectors: Vec<_> = b.vectors.iter().map(|f| vertex_map(&chain, f)).collect();
        run.result("dimension", vectors.len());
        run.result("basis", vectors);
        run.residual("eigen_defect", j.eigen_defect);
        run.residual("max_defect", b.max_defect);
        let tol = run.primary_tol(b.tol);
        run.check("defect", b.max_defect, tol);
    }
    Ok(())
}

pub fn martin(
    run: &mut Run,
    path: &Path,
    lambda: Complex64,
    origin: &str,
    order: usize,
    gs: &[PathBuf],
) -> Outcome<()> {
    let chain = load_chain(run, path)?;
    let o = vertex(&chain, origin)?;
    let mut boundary = Vec::new();
    for g in gs {
        boundary.push(boundary_function(&chain, &load_map(run, g)?)?);
    }
    let order = order.max(boundary.len());
    run.result("lambda", wire(lambda));
    run.result("origin", origin);
    run.result("order", order);
    let Some(mk) = run.solve("kernel", martin_kernel(&chain, lambda, o, order))? else {
        return Ok(());
    };
    run.result("f_origin", boundary_map(&chain, &mk.f_origin));
    let kernels: Vec<BTreeMap<String, _>> = mk
        .higher
        .iter()
        .map(|k| {
            chain
                .boundary()
                .iter()
                .enumerate()
                .map(|(j, &w)| (chain.id(w).to_string(), vertex_map(&chain, &k.column(j))))
                .collect()
        })
        .collect();
    run.result("kernels", kernels);
    let defect = mk.higher_kernel_defect(&chain);
    run.residual("higher_kernel_defect", defect);
    let tol = run.primary_tol(CHAIN_TOL);
    run.check("higher_kernels", defect, tol);
    if !boundary.is_empty() {
        if let Some(kr) = run.solve("kernel_riquier", riquier_via_kernels(&chain, lambda, o, &boundary))? {
            run.result("values", vertex_map(&chain, &kr.solution.values));
            let nu: Vec<_> = kr.distributions.iter().map(|d| boundary_map(&chain, d)).collect();
            run.result("distributions", nu);
            run.residual("kernel_vs_solver", kr.deviation);
            run.residual("max", kr.solution.max_residual);
            run.check("kernel_vs_solver", kr.deviation, kr.tol);
            run.check("residual", kr.solution.max_residual, kr.solution.residual_tol);
        }
    }
    Ok(())
}

pub fn check_derivative(run: &mut Run, path: &Path, lambda: Complex64, r: usize, h: Option<f64>) -> Outcome<()> {
    let chain = load_chain(run, path)?;
    run.result("lambda", wire(lambda));
    run.result("r", r);
    if let Some(d) = run.solve("derivative", derivative_identity_check(&chain, lambda, r, h))? {
        run.result("h", d.h);
        run.result("stencil", format!("{:?}", d.stencil));
        run.residual("deviation", d.deviation);
        let tol = run.primary_tol(d.expected);
        run.check("derivative_identity", d.deviation, tol);
    }
    Ok(())
}

pub struct SimulateArgs<'a> {
    pub start: &'a str,
    pub trials: u64,
    pub seed: u64,
    pub max_steps: Option<usize>,
    pub compare: bool,
    pub series_lambda: Option<f64>,
    pub workers: Option<usize>,
}

pub fn simulate(run: &mut Run, path: &Path, args: &SimulateArgs) -> Outcome<()> {
    let chain = load_chain(run, path)?;
    let start = vertex(&chain, args.start)?;
    let max_steps = match args.max_steps {
        Some(m) => m,
        None => match run.solve("spectral_radius", interior_spectrum(&chain))? {
            Some(s) => default_max_steps(s.rho),
            None => return Ok(()),
        },
    };
    let mut cfg = SimConfig::new(start, args.trials, args.seed, max_steps);
    cfg.workers = args.workers;
    run.result("start", args.start);
    run.result("trials", args.trials);
    run.result("seed", args.seed);
    run.result("max_steps", max_steps);
    let Some(est) = run.solve("simulate", simulate_hitting(&chain, &cfg))? else {
        return Ok(());
    };
    let counts: BTreeMap<&str, u64> = chain
        .boundary()
        .iter()
        .zip(&est.counts)
        .map(|(&w, &c)| (chain.id(w), c))
        .collect();
    let freq: BTreeMap<&str, f64> = chain
        .boundary()
        .iter()
        .enumerate()
        .map(|(j, &w)| (chain.id(w), est.frequency(j)))
        .collect();
    run.result("counts", counts);
    run.result("frequencies", freq);
    run.result("censored", est.censored);
    run.check("censoring", est.censored_fraction(), polyharmonic::mc::CENSOR_FLAG);
    if args.compare {
        if let Some(cmp) = run.solve("compare", compare_to_analytic(&est, &chain, args.series_lambda))? {
            run.result("comparison", &cmp.hitting);
            if !cmp.series.is_empty() {
                run.result("series", &cmp.series);
                run.result("series_lambda", cmp.series_lambda);
                for s in &cmp.series {
                    let bound = cmp.series_sigmas * s.sigma + s.truncation;
                    run.check(&format!("series.{}", s.vertex), (s.estimate - s.analytic).abs(), bound);
                }
            }
            run.flag(
                "power",
                !cmp.underpowered,
                format!("{} trials, minimum {}", est.trials, polyharmonic::mc::MIN_TRIALS),
            );
            let tol = run.primary_tol(cmp.z_limit);
            run.check("max_abs_z", cmp.max_abs_z, tol);
        }
    }
    Ok(())
}

pub enum TreeOp {
    Green { lambda: Complex64, x: String, y: String },
    Kr { lambda: Complex64, r: usize, x: String, w: String },
    Ktr { lambda: Complex64, r: usize, x: String, arc: String },
    Eval { lambda: Complex64, nu: Vec<PathBuf> },
    IdentityCheck { lambda: Complex64, n: usize, w: Option<String> },
    Restrict { emit: Option<PathBuf> },
}

fn tree_vertex(tree: &ForwardTree<f64>, id: &str) -> Outcome<usize> {
    tree.index_of(id)
        .ok_or_else(|| InputError(format!("InvalidInput: unknown vertex {id}")))
}

/// The normalized tree file, keeping the weight kind of the source so that
/// re-reading it rebuilds identical weights.
fn canonical_tree(file: &TreeFile, tree: &ForwardTree<f64>, section: &Section) -> TreeFile {
    let mut out = TreeFile::from_tree(tree, Some(section));
    if file.forward_p.is_some() {
        out.measure = None;
        out.forward_p = Some(tree.forward_probabilities());
    }
    out
}

pub fn tree(run: &mut Run, path: &Path, emit: Option<&Path>, op: &TreeOp) -> Outcome<()> {
    let file = TreeFile::from_json(&read(path)?)?;
    let tree: ForwardTree<f64> = file.to_tree()?;
    let section = file.section(&tree)?;
    let canonical = canonical_tree(&file, &tree, &section).to_json();
    if let Some(out) = emit {
        write(out, &canonical)?;
    }
    run.inputs.push(canonical);
    run.result("vertices", tree.len());
    run.result("depth", tree.max_depth());
    run.result(
        "section",
        section.members().iter().map(|&x| tree.id(x)).collect::<Vec<_>>(),
    );

    match op {
        TreeOp::Green { lambda, x, y } => {
            let (xi, yi) = (tree_vertex(&tree, x)?, tree_vertex(&tree, y)?);
            run.result("lambda", wire(*lambda));
            let Some(z) = run.solve("green", tree_green(&tree, &section, *lambda, xi, yi))? else {
                return Ok(());
            };
            run.result("green", wire(z));
            let chain = restrict_to_section(&tree, &section)?;
            if let Some(gm) = run.solve("solver", green(&chain, *lambda))? {
                let slot = |id: &str| chain.slot(chain.index_of(id).expect("restricted vertex"));
                let reference = gm.g[(slot(x), slot(y))];
                let dev = (z - reference).norm() / reference.norm().max(1.0);
                run.residual("closed_form_vs_solver", dev);
                let tol = run.primary_tol(TREE_SOLVER_TOL);
                run.check("closed_form_vs_solver", dev, tol);
            }
        }
        TreeOp::Kr { lambda, r, x, w } => {
            let (xi, wi) = (tree_vertex(&tree, x)?, tree_vertex(&tree, w)?);
            run.result("lambda", wire(*lambda));
            run.result("r", r);
            let Some(z) = run.solve("kernel", tree_kernel_kr(&tree, &section, *lambda, *r, xi, wi))? else {
                return Ok(());
            };
            run.result("kernel", wire(z));
            let chain = restrict_to_section(&tree, &section)?;
            let Some(xc) = chain.index_of(x) else {
                return Ok(());
            };
            let root = chain.index_of(tree.id(tree.root())).expect("root");
            if let Some(mk) = run.solve("solver", martin_kernel(&chain, *lambda, root, *r))? {
                let col = chain.boundary().iter().position(|&b| chain.id(b) == w.as_str()).expect("section vertex");
                let reference = mk.higher[r - 1][(xc, col)];
                let dev = (z - reference).norm() / reference.norm().max(1.0);
                run.residual("closed_form_vs_solver", dev);
                let tol = run.primary_tol(TREE_SOLVER_TOL);
                run.check("closed_form_vs_solver", dev, tol);
            }
        }
        TreeOp::Ktr { lambda, r, x, arc } => {
            let (xi, ai) = (tree_vertex(&tree, x)?, tree_vertex(&tree, arc)?);
            run.result("lambda", wire(*lambda));
            run.result("r", r);
            if let Some(z) = run.solve("kernel", infinite_kernel_ktr(&tree, *lambda, *r, xi, ai))? {
                run.result("kernel", wire(z));
            }
            if let Some(d) = run.solve("recursion", ktr_recursion_defect(&tree, *lambda, *r))? {
                run.residual("recursion", d);
                let tol = run.primary_tol(KERNEL_TOL);
                run.check("recursion", d, tol);
            }
        }
        TreeOp::Eval { lambda, nu } => {
            let leaves = tree.at_depth(tree.max_depth());
            let mut dists = Vec::new();
            for p in nu {
                let map = parse_vertex_map(&read(p)?)?;
                run.inputs.push(serde_json::to_string(&map).expect("serializable"));
                let mut values = HashMap::new();
                for (id, v) in &map {
                    let i = tree_vertex(&tree, id)?;
                    if !leaves.contains(&i) {
                        return Err(InputError(format!("InvalidInput: {id} is not at depth {}", tree.max_depth())));
                    }
                    values.insert(i, v.value::<f64>());
                }
                dists.push(BoundaryDistribution::from_leaves(&tree, &values)?);
            }
            run.result("lambda", wire(*lambda));
            run.result("order", dists.len());
            let values: polyharmonic::Result<BTreeMap<String, WireComplex>> = (0..tree.len())
                .map(|x| Ok((tree.id(x).to_string(), wire(eval_polyharmonic(&tree, *lambda, &dists, x)?))))
                .collect();
            if let Some(v) = run.solve("eval", values)? {
                run.result("values", v);
            }
            if let Some(d) = run.solve("polyharmonic", polyharmonic_defect(&tree, *lambda, &dists))? {
                run.residual("polyharmonic", d);
                let tol = run.primary_tol(KERNEL_TOL);
                run.check("polyharmonic", d, tol);
            }
        }
        TreeOp::IdentityCheck { lambda, n, w } => {
            let wi = match w {
                Some(id) => tree_vertex(&tree, id)?,
                None => section.members()[0],
            };
            run.result("lambda", wire(*lambda));
            run.result("order", n);
            run.result("arc_vertex", tree.id(wi));
            if let Some(c) = run.solve("consistency", kernel_consistency_check(&tree, &section, *lambda, *n, wi))? {
                let path: Vec<&str> = c.path.iter().map(|&x| tree.id(x)).collect();
                run.result("path", path);
                run.result("infinite_kernel", c.lhs.iter().map(|&z| wire(z)).collect::<Vec<_>>());
                run.result("kernel_form", c.rhs.iter().map(|&z| wire(z)).collect::<Vec<_>>());
                run.residual("kernel_form", c.max_deviation);
                run.residual("solver", c.solver_deviation);
                let tol = run.primary_tol(c.tol);
                run.check("kernel_form", c.max_deviation, tol);
                run.check("solver", c.solver_deviation, tol);
                let id = &c.identity;
                run.result("identity_cases", id.cases);
                run.result("variant_failures", id.variant_failures);
                run.result("variant_example", id.variant_example.map(|e| [e.0 as i128, e.1 as i128, e.2 as i128, e.3, e.4]));
                run.flag(
                    "binomial_identity",
                    id.passed(),
                    format!("{} failures in {} cases up to |w| = {}, n = {}", id.derived_failures.len(), id.cases, id.max_w, id.max_n),
                );
            }
        }
        TreeOp::Restrict { emit } => {
            let chain = restrict_to_section(&tree, &section)?;
            let file = ChainFile::from_chain(&chain);
            if let Some(out) = emit {
                write(out, &file.to_json())?;
            }
            run.result("chain_vertices", chain.len());
            run.result("chain_interior", chain.interior().len());
            run.result("chain_boundary", chain.boundary().len());
            if let Some(spec) = run.solve("spectral_radius", interior_spectrum(&chain))? {
                run.result("rho", spec.rho);
                run.check("spectral_radius", spec.rho, 1.0 - RHO_MARGIN);
            }
        }
    }
    Ok(())
}
