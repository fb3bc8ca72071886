//! Ground states of invariant potentials: minimize `Φ∘φ` over each stratum's
//! parameter region and pick the stratum holding the global minimum.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::matrix::sym_eigenvalues;
use crate::pmatrix::{vanishes, PMatrix, StratumTable};
use crate::poly::{CompiledPoly, Poly, PolyError, VarSet};
use crate::strata::{sample_delta, StrataError, StratumParam};
use crate::FieldElem;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhaseError {
    #[error("stratum {label}: no admissible starting point in the search box")]
    EmptyRegion { label: String },
    #[error("expected {expected} parameter values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("bad grid spec `{spec}`: {msg}")]
    Grid { spec: String, msg: String },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Strata(#[from] StrataError),
}

/// A polynomial in the basis variables with parameters `a1, a2, …`.
#[derive(Debug, Clone)]
pub struct Potential {
    pub expr: Poly,
    /// Number of basis variables; parameters follow them in `expr`'s variables.
    pub q: usize,
    pub params: Vec<String>,
    /// Search is restricted to `p₁ ≤ R²`.
    pub domain_bound: f64,
    compiled: CompiledPoly,
}

/// Parameter names `a<k>` appearing in `text`, sorted by index.
fn parameter_tokens(text: &str) -> Vec<String> {
    let mut out: Vec<(u32, String)> = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_alphabetic() || bytes[i] == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &text[start..i];
            if let Some(k) = word.strip_prefix('a').and_then(|d| d.parse::<u32>().ok()) {
                if !out.iter().any(|(j, _)| *j == k) {
                    out.push((k, word.to_string()));
                }
            }
        } else {
            i += 1;
        }
    }
    out.sort();
    out.into_iter().map(|(_, w)| w).collect()
}

impl Potential {
    /// Parse `text` over the basis variables `p_vars`; tokens `a1, a2, …`
    /// become parameters.
    pub fn parse(text: &str, p_vars: &Arc<VarSet>) -> Result<Self, PhaseError> {
        let params = parameter_tokens(text);
        let mut names: Vec<String> = p_vars.names().to_vec();
        names.extend(params.iter().cloned());
        let mut weights = p_vars.weights().to_vec();
        weights.extend(params.iter().map(|_| 1));
        let vars = VarSet::new(&names, &weights)?;
        let expr = Poly::parse(text, &vars)?;
        Ok(Self::from_poly(expr, p_vars.len(), params))
    }

    fn from_poly(expr: Poly, q: usize, params: Vec<String>) -> Self {
        let compiled = expr.compile();
        Potential { expr, q, params, domain_bound: 10.0, compiled }
    }

    pub fn with_bound(mut self, r: f64) -> Self {
        self.domain_bound = r;
        self
    }

    /// `c·Φ`.
    pub fn scaled(&self, c: &FieldElem) -> Self {
        let mut s = Self::from_poly(self.expr.scale(c), self.q, self.params.clone());
        s.domain_bound = self.domain_bound;
        s
    }

    pub fn eval(&self, p: &[f64], a: &[f64]) -> f64 {
        let mut x = Vec::with_capacity(p.len() + a.len());
        x.extend_from_slice(p);
        x.extend_from_slice(a);
        self.compiled.eval(&x)
    }

    fn check_arity(&self, a: &[f64]) -> Result<(), PhaseError> {
        if a.len() != self.params.len() {
            return Err(PhaseError::Arity { expected: self.params.len(), got: a.len() });
        }
        Ok(())
    }
}

/// Simplex search settings.
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when every vertex is this close to the best one.
    pub diameter_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { max_evals: 10_000, diameter_tol: 1e-10, initial_step: 0.1 }
    }
}

/// Result of one simplex run.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Nelder–Mead with standard coefficients. Infinite values act as a barrier,
/// so `f` may return `+∞` outside its domain; `x0` must be feasible.
pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], opts: NelderMeadOptions) -> SimplexResult {
    let n = x0.len();
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let f0 = eval(x0);
    if n == 0 {
        return SimplexResult { x: vec![], value: f0, evals: evals.get() };
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    for i in 0..n {
        let mut step = opts.initial_step * x0[i].abs().max(1.0);
        let mut v = x0.to_vec();
        let mut fv = f64::INFINITY;
        for _ in 0..40 {
            v[i] = x0[i] + step;
            fv = eval(&v);
            if fv.is_finite() {
                break;
            }
            v[i] = x0[i] - step;
            fv = eval(&v);
            if fv.is_finite() {
                break;
            }
            step *= 0.5;
        }
        simplex.push((v, fv));
    }
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &simplex[0].0;
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| v.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max))
            .fold(0.0f64, f64::max);
        if diameter < opts.diameter_tol || evals.get() >= opts.max_evals {
            break;
        }
        let centroid: Vec<f64> =
            (0..n).map(|k| simplex[..n].iter().map(|(v, _)| v[k]).sum::<f64>() / n as f64).collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (worst.0[k] - centroid[k])).collect() };
        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(-0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < worst.1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let b = simplex[0].0.clone();
        for vert in simplex.iter_mut().skip(1) {
            let v: Vec<f64> = (0..n).map(|k| b[k] + 0.5 * (vert.0[k] - b[k])).collect();
            let fv = eval(&v);
            *vert = (v, fv);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    SimplexResult { x, value, evals: evals.get() }
}

/// Settings for [`minimize_on_stratum`] and [`phase_scan`].
#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    pub starts: usize,
    /// Seeds are drawn from `[-box_half, box_half]^l`.
    pub box_half: f64,
    pub nm: NelderMeadOptions,
    /// Restarts from the best point after the first convergence.
    pub restarts: usize,
    /// Distance to ∂Δ or to rank loss below which a minimum is a boundary limit.
    pub boundary_tol: f64,
    /// Values within `10·value_tol` (relative to `max(1,|v|)`) are ties.
    pub value_tol: f64,
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            starts: 32,
            box_half: 5.0,
            nm: NelderMeadOptions::default(),
            restarts: 3,
            boundary_tol: 1e-6,
            value_tol: 1e-8,
            seed: 1,
        }
    }
}

/// Minimum of a potential over one stratum.
#[derive(Debug, Clone, Serialize)]
pub struct StratumMin {
    pub label: String,
    pub value: f64,
    pub lambda: Vec<f64>,
    pub p: Vec<f64>,
    /// The minimizer sits on ∂Δ, on the rank-loss set of J or on `p₁ = R²`;
    /// the value is then an infimum belonging to a bordering stratum.
    pub boundary: bool,
    pub bordering: Option<String>,
}

/// Stratum of `p` read off at an absolute scale, for limits on ∂Δ.
fn bordering_label(pm: &PMatrix, p: &[f64], table: &StratumTable, tol: f64) -> Option<String> {
    let ev = sym_eigenvalues(&pm.eval_f64(p));
    let scale = ev.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let rank = ev.iter().filter(|&&v| v > tol * scale).count();
    table
        .rules
        .iter()
        .filter(|r| r.rank == rank)
        .find(|r| r.equalities.iter().all(|e| vanishes(&e.compile(), p, tol.sqrt())))
        .map(|r| r.label.clone())
}

fn is_boundary(param: &StratumParam, lam: &[f64], p1: f64, r2: f64, tol: f64) -> bool {
    let near_delta = param.delta_ineqs.iter().any(|f| {
        let c = f.compile();
        c.eval(lam) <= tol * c.magnitude(lam).max(1.0)
    });
    let sv = param.jacobian_f64(lam).singular_values();
    let smax = sv.iter().fold(0.0f64, |m, v| m.max(*v));
    let smin = sv.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    near_delta || smin <= tol * smax.max(1.0) || p1 >= r2 * (1.0 - 1e-9)
}

/// Minimize `pot∘φ` over `Δ ∩ {p₁ ≤ R²}` by multistart simplex search.
pub fn minimize_on_stratum(
    pot: &Potential,
    a: &[f64],
    param: &StratumParam,
    pm: &PMatrix,
    table: &StratumTable,
    opts: &MinimizeOptions,
) -> Result<StratumMin, PhaseError> {
    pot.check_arity(a)?;
    let l = param.l();
    let r2 = pot.domain_bound * pot.domain_bound;
    if l == 0 {
        let p = param.phi_f64(&[]);
        return Ok(StratumMin {
            label: param.label.clone(),
            value: pot.eval(&p, a),
            lambda: vec![],
            p,
            boundary: false,
            bordering: None,
        });
    }
    let objective = |lam: &[f64]| -> f64 {
        if !param.in_delta(lam, 0.0) {
            return f64::INFINITY;
        }
        let p = param.phi_f64(lam);
        if p[0] > r2 {
            return f64::INFINITY;
        }
        pot.eval(&p, a)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let seeds = sample_delta(param, opts.starts * 4, -opts.box_half, opts.box_half, &mut rng)
        .map_err(|_| PhaseError::EmptyRegion { label: param.label.clone() })?;
    let seeds: Vec<Vec<f64>> =
        seeds.accepted.into_iter().filter(|s| objective(s).is_finite()).take(opts.starts).collect();
    if seeds.is_empty() {
        return Err(PhaseError::EmptyRegion { label: param.label.clone() });
    }
    let runs: Vec<SimplexResult> = seeds
        .par_iter()
        .map(|s| {
            let mut r = nelder_mead(&objective, s, opts.nm);
            let mut step = opts.nm.initial_step;
            for _ in 0..opts.restarts {
                step *= 0.1;
                let again = nelder_mead(&objective, &r.x, NelderMeadOptions { initial_step: step, ..opts.nm });
                let improved = again.value < r.value;
                if improved {
                    r = again;
                } else {
                    break;
                }
            }
            r
        })
        .collect();
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.value.total_cmp(&b.value).then(i.cmp(j)))
        .map(|(_, r)| r)
        .expect("at least one seed");
    let p = param.phi_f64(&best.x);
    let boundary = is_boundary(param, &best.x, p[0], r2, opts.boundary_tol);
    let bordering = if boundary { bordering_label(pm, &p, table, opts.boundary_tol) } else { None };
    Ok(StratumMin { label: param.label.clone(), value: best.value, lambda: best.x, p, boundary, bordering })
}

/// Outcome for one stratum at one grid point.
#[derive(Debug, Clone, Serialize)]
pub struct StratumOutcome {
    pub label: String,
    pub result: Result<StratumMin, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseResult {
    pub params: Vec<f64>,
    pub per_stratum: Vec<StratumOutcome>,
    /// Least interior minimum; ties go to the stratum of least dimension.
    pub winner: Option<String>,
    /// Strata tied with the winner, winner included, when more than one.
    pub tie: Vec<String>,
    /// Gap to the best interior minimum of another stratum outside the tie.
    pub margin: Option<f64>,
}

/// Minimize on every stratum for each parameter point.
pub fn phase_scan(
    pot: &Potential,
    params: &[&StratumParam],
    pm: &PMatrix,
    table: &StratumTable,
    grid: &[Vec<f64>],
    opts: &MinimizeOptions,
) -> Result<Vec<PhaseResult>, PhaseError> {
    for a in grid {
        pot.check_arity(a)?;
    }
    let results = grid
        .par_iter()
        .enumerate()
        .map(|(gi, a)| {
            let per_stratum: Vec<StratumOutcome> = params
                .iter()
                .enumerate()
                .map(|(si, sp)| {
                    let o = MinimizeOptions { seed: opts.seed ^ ((gi as u64) << 20) ^ (si as u64), ..*opts };
                    StratumOutcome {
                        label: sp.label.clone(),
                        result: minimize_on_stratum(pot, a, sp, pm, table, &o).map_err(|e| e.to_string()),
                    }
                })
                .collect();
            let dims: Vec<usize> = params.iter().map(|p| p.l()).collect();
            pick_winner(a.clone(), per_stratum, &dims, opts.value_tol)
        })
        .collect();
    Ok(results)
}

fn pick_winner(params: Vec<f64>, per_stratum: Vec<StratumOutcome>, dims: &[usize], value_tol: f64) -> PhaseResult {
    let interior: Vec<(usize, f64)> = per_stratum
        .iter()
        .enumerate()
        .filter_map(|(i, o)| match &o.result {
            Ok(m) if !m.boundary => Some((i, m.value)),
            _ => None,
        })
        .collect();
    let Some(best) = interior.iter().map(|&(_, v)| v).min_by(f64::total_cmp) else {
        return PhaseResult { params, per_stratum, winner: None, tie: vec![], margin: None };
    };
    let window = 10.0 * value_tol * best.abs().max(1.0);
    let mut tied: Vec<usize> = interior.iter().filter(|&&(_, v)| v <= best + window).map(|&(i, _)| i).collect();
    tied.sort_by_key(|&i| (dims[i], i));
    let winner = per_stratum[tied[0]].label.clone();
    let margin = interior.iter().filter(|(i, _)| !tied.contains(i)).map(|&(_, v)| v - best).min_by(f64::total_cmp);
    let tie = if tied.len() > 1 { tied.iter().map(|&i| per_stratum[i].label.clone()).collect() } else { vec![] };
    PhaseResult { params, per_stratum, winner: Some(winner), tie, margin }
}

/// Cartesian grid from specs `name=lo:hi:count` (or `name=v1,v2,…`), one per
/// parameter, in the potential's parameter order.
pub fn parse_grid(specs: &[String], params: &[String]) -> Result<Vec<Vec<f64>>, PhaseError> {
    let bad = |spec: &str, msg: &str| PhaseError::Grid { spec: spec.into(), msg: msg.into() };
    let mut axes: Vec<Option<Vec<f64>>> = vec![None; params.len()];
    for spec in specs {
        let (name, range) = spec.split_once('=').ok_or_else(|| bad(spec, "expected name=lo:hi:count"))?;
        let k = params.iter().position(|p| p == name.trim()).ok_or_else(|| bad(spec, "unknown parameter"))?;
        let values = if range.contains(':') {
            let parts: Vec<&str> = range.split(':').collect();
            if parts.len() != 3 {
                return Err(bad(spec, "expected lo:hi:count"));
            }
            let lo: f64 = parts[0].trim().parse().map_err(|_| bad(spec, "bad lower bound"))?;
            let hi: f64 = parts[1].trim().parse().map_err(|_| bad(spec, "bad upper bound"))?;
            let n: usize = parts[2].trim().parse().map_err(|_| bad(spec, "bad count"))?;
            match n {
                0 => return Err(bad(spec, "count must be positive")),
                1 => vec![lo],
                _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
            }
        } else {
            range.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad(spec, "bad value"))).collect::<Result<_, _>>()?
        };
        axes[k] = Some(values);
    }
    let mut grid = vec![vec![]];
    for (k, axis) in axes.into_iter().enumerate() {
        let axis = axis.ok_or_else(|| bad(&params[k], "parameter has no grid"))?;
        grid = grid.into_iter().flat_map(|g| axis.iter().map(move |v| [g.clone(), vec![*v]].concat())).collect();
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example::load_bundle;
    use proptest::prelude::*;

    fn setup() -> crate::example::ExampleBundle {
        load_bundle().unwrap()
    }

    #[test]
    fn simplex_finds_a_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2);
        let r = nelder_mead(&f, &[0.0, 0.0], NelderMeadOptions::default());
        assert!((r.x[0] - 1.0).abs() < 1e-8 && (r.x[1] + 2.0).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn simplex_respects_barriers() {
        let f = |x: &[f64]| if x[0] <= 0.0 { f64::INFINITY } else { x[0] };
        let r = nelder_mead(&f, &[1.0], NelderMeadOptions::default());
        assert!(r.x[0] > 0.0 && r.value < 1e-9);
    }

    #[test]
    fn parameters_are_collected() {
        let b = setup();
        let pot = Potential::parse("a2*p1 + a1*p1^2 - p3", b.basis.target_vars()).unwrap();
        assert_eq!(pot.params, vec!["a1", "a2"]);
        assert_eq!(pot.eval(&[2.0, 0.0, 1.0, 0.0, 0.0], &[1.0, 3.0]), 4.0 + 6.0 - 1.0);
        assert!(Potential::parse("b*p1", b.basis.target_vars()).is_err());
    }

    #[test]
    fn exact_square_on_s1() {
        let b = setup();
        let pm = b.stored_pmatrix();
        let param = b.param("S1").unwrap().as_ref().unwrap();
        let pot = Potential::parse("(p1 - 1)^2", b.basis.target_vars()).unwrap();
        let m = minimize_on_stratum(&pot, &[], param, &pm, &b.relations, &MinimizeOptions::default()).unwrap();
        assert!(m.value < 1e-12 && (m.lambda[0].abs() - 1.0).abs() < 1e-5, "{m:?}");
        assert!(!m.boundary);
    }

    #[test]
    fn norm_is_a_boundary_infimum() {
        let b = setup();
        let pm = b.stored_pmatrix();
        let pot = Potential::parse("p1", b.basis.target_vars()).unwrap();
        for label in ["S1", "S2A", "S3"] {
            let param = b.param(label).unwrap().as_ref().unwrap();
            let m = minimize_on_stratum(&pot, &[], param, &pm, &b.relations, &MinimizeOptions::default()).unwrap();
            assert!(m.value < 1e-8, "{label}: {m:?}");
            assert!(m.boundary, "{label}: {m:?}");
        }
    }

    #[test]
    fn scan_of_a_quartic_in_the_norm() {
        let b = setup();
        let pm = b.stored_pmatrix();
        let params: Vec<&StratumParam> = b.params().iter().map(|p| p.as_ref().unwrap()).collect();
        let pot = Potential::parse("a1*p1 + p1^2", b.basis.target_vars()).unwrap();
        let grid = parse_grid(&["a1=-1,1".to_string()], &pot.params).unwrap();
        let res = phase_scan(&pot, &params, &pm, &b.relations, &grid, &MinimizeOptions::default()).unwrap();
        // a = -1: min of p1^2 - p1 is -1/4 at p1 = 1/2, reached on every nonzero stratum
        assert_eq!(res[0].winner.as_deref(), Some("S1"));
        assert!(res[0].tie.len() >= 2, "{:?}", res[0].tie);
        for o in &res[0].per_stratum {
            let m = o.result.as_ref().unwrap();
            if o.label != "S0" {
                assert!((m.value + 0.25).abs() < 1e-7 && (m.p[0] - 0.5).abs() < 1e-3, "{m:?}");
            }
        }
        assert_eq!(res[1].winner.as_deref(), Some("S0"));
        assert!(res[1].tie.is_empty());
    }

    #[test]
    fn grid_specs() {
        let names = vec!["a1".to_string(), "a2".to_string()];
        let g = parse_grid(&["a2=0:1:3".into(), "a1=5".into()], &names).unwrap();
        assert_eq!(g, vec![vec![5.0, 0.0], vec![5.0, 0.5], vec![5.0, 1.0]]);
        assert!(parse_grid(&["a1=1".into()], &names).is_err());
        assert!(parse_grid(&["a3=1".into()], &names).is_err());
        assert_eq!(parse_grid(&[], &[]).unwrap(), vec![Vec::<f64>::new()]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn simplex_never_returns_worse_than_its_start(x0 in -3.0f64..3.0, y0 in -3.0f64..3.0) {
            let f = |x: &[f64]| (x[0] * x[0] - x[1]).powi(2) + 0.1 * x[0].powi(4) + x[1].abs();
            let r = nelder_mead(&f, &[x0, y0], NelderMeadOptions::default());
            prop_assert!(r.value <= f(&[x0, y0]));
        }
    }
}
