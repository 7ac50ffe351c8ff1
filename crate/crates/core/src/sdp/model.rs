//! Assembly of moment-matrix problems into [`ConicProblem`]s.
//!
//! Every class block becomes a set of real variables (or a constant), the
//! assembled `(|S_n| d)`-square moment matrix enters one PSD cone through the
//! real embedding, and free assemblage blocks (bound and instrumental modes)
//! get one small PSD cone each.

use num_complex::Complex64;

use super::problem::{Cone, ConicProblem, Triplet};
use crate::assemblage::Assemblage;
use crate::error::{invalid, Result};
use crate::linalg::{self, c64, CMat};
use crate::moment::{certificate_constraints, data_links, MomentIndex, MomentMatrix};
use crate::scenario::ScenarioSpec;

/// How a class block is parametrised.
#[derive(Clone, Debug)]
pub enum ClassVars {
    Fixed(CMat),
    /// `(re + i·im) I`; `im` is absent for self-adjoint classes.
    Scalar { re: usize, im: Option<usize> },
    /// `d²` variables: diagonal, then real and imaginary parts of the upper
    /// triangle in row order.
    Hermitian(Vec<usize>),
    /// `2d²` variables: real and imaginary part of every entry, row-major.
    General(Vec<usize>),
}

/// Real affine expression `Σ coef·θ_var + constant`.
#[derive(Clone, Debug, Default)]
pub struct Lin {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Lin {
    fn var(v: usize, coef: f64) -> Lin {
        Lin { terms: vec![(v, coef)], constant: 0.0 }
    }

    fn constant(c: f64) -> Lin {
        Lin { terms: Vec::new(), constant: c }
    }

    fn scaled(&self, s: f64) -> Lin {
        Lin { terms: self.terms.iter().map(|&(v, c)| (v, c * s)).collect(), constant: self.constant * s }
    }

    fn add(&mut self, other: &Lin, s: f64) {
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * s)));
        self.constant += s * other.constant;
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * theta[v]).sum::<f64>()
    }
}

/// Complex affine expression with separate real and imaginary parts.
#[derive(Clone, Debug, Default)]
pub struct CExpr {
    pub re: Lin,
    pub im: Lin,
}

impl CExpr {
    fn constant(z: Complex64) -> CExpr {
        CExpr { re: Lin::constant(z.re), im: Lin::constant(z.im) }
    }

    fn conj(mut self) -> CExpr {
        self.im = self.im.scaled(-1.0);
        self
    }

    /// `self += s · other` for complex `s`.
    fn add(&mut self, other: &CExpr, s: Complex64) {
        self.re.add(&other.re, s.re);
        self.re.add(&other.im, -s.im);
        self.im.add(&other.re, s.im);
        self.im.add(&other.im, s.re);
    }
}

/// Variable layout of an assembled problem.
#[derive(Clone, Debug)]
pub struct Layout {
    pub index: MomentIndex,
    pub classes: Vec<ClassVars>,
    /// Hermitian variables of free assemblage blocks, in block order.
    pub sigma: Vec<Vec<usize>>,
    /// Robustness variable subtracted from every cone.
    pub t: Option<usize>,
}

fn hermitian_entry(vars: &[usize], d: usize, k: usize, l: usize) -> CExpr {
    if k == l {
        return CExpr { re: Lin::var(vars[k], 1.0), im: Lin::default() };
    }
    let (p, q, sign) = if k < l { (k, l, 1.0) } else { (l, k, -1.0) };
    // Upper pairs in row order: (0,1), (0,2), …, (1,2), …
    let pair = p * d - p * (p + 1) / 2 + (q - p - 1);
    CExpr { re: Lin::var(vars[d + 2 * pair], 1.0), im: Lin::var(vars[d + 2 * pair + 1], sign) }
}

fn hermitian_value(vars: &[usize], d: usize, theta: &[f64]) -> CMat {
    CMat::from_fn(d, d, |k, l| {
        let e = hermitian_entry(vars, d, k, l);
        c64(e.re.eval(theta), e.im.eval(theta))
    })
}

impl Layout {
    pub fn dim(&self) -> usize {
        self.index.scenario().bob_dim
    }

    /// Entry `(k, l)` of the representative block of class `c`.
    pub fn class_entry(&self, c: usize, k: usize, l: usize) -> CExpr {
        let d = self.dim();
        match &self.classes[c] {
            ClassVars::Fixed(m) => CExpr::constant(m[(k, l)]),
            ClassVars::Scalar { re, im } => {
                if k != l {
                    return CExpr::default();
                }
                CExpr {
                    re: Lin::var(*re, 1.0),
                    im: im.map(|v| Lin::var(v, 1.0)).unwrap_or_default(),
                }
            }
            ClassVars::Hermitian(vars) => hermitian_entry(vars, d, k, l),
            ClassVars::General(vars) => {
                let base = 2 * (k * d + l);
                CExpr { re: Lin::var(vars[base], 1.0), im: Lin::var(vars[base + 1], 1.0) }
            }
        }
    }

    /// Entry `(k, l)` of the moment-matrix block `(i, j)`; `None` if null.
    pub fn entry(&self, i: usize, j: usize, k: usize, l: usize) -> Option<CExpr> {
        let e = self.index.entry(i, j)?;
        Some(if e.dagger { self.class_entry(e.class, l, k).conj() } else { self.class_entry(e.class, k, l) })
    }

    pub fn sigma_entry(&self, b: usize, k: usize, l: usize) -> CExpr {
        hermitian_entry(&self.sigma[b], self.dim(), k, l)
    }

    pub fn class_value(&self, c: usize, theta: &[f64]) -> CMat {
        let d = self.dim();
        match &self.classes[c] {
            ClassVars::Fixed(m) => m.clone(),
            ClassVars::Hermitian(vars) => hermitian_value(vars, d, theta),
            _ => CMat::from_fn(d, d, |k, l| {
                let e = self.class_entry(c, k, l);
                c64(e.re.eval(theta), e.im.eval(theta))
            }),
        }
    }

    pub fn moment_matrix(&self, theta: &[f64]) -> Result<MomentMatrix> {
        let blocks = (0..self.index.n_classes()).map(|c| self.class_value(c, theta)).collect();
        MomentMatrix::new(self.index.clone(), blocks)
    }

    /// The free assemblage at `θ`, if this layout has one.
    pub fn assemblage(&self, theta: &[f64]) -> Result<Option<Assemblage>> {
        if self.sigma.is_empty() {
            return Ok(None);
        }
        let d = self.dim();
        let blocks = self.sigma.iter().map(|v| hermitian_value(v, d, theta)).collect();
        Ok(Some(Assemblage::new(*self.index.scenario(), blocks)?))
    }
}

fn push(p: &mut ConicProblem, cone: usize, row: usize, col: usize, lin: &Lin, scale: f64) {
    let (row, col) = if row <= col { (row, col) } else { (col, row) };
    if lin.constant != 0.0 {
        p.constant.push(Triplet { cone, row, col, value: scale * lin.constant });
    }
    for &(v, c) in &lin.terms {
        p.columns[v].push(Triplet { cone, row, col, value: scale * c });
    }
}

/// Add the real embedding of an `n × n` Hermitian matrix of expressions,
/// given entrywise by `entry(p, q)` (`None` for zero).
fn add_embedded_cone<F>(p: &mut ConicProblem, n: usize, trace_bound: f64, entry: F) -> usize
where
    F: Fn(usize, usize) -> Option<CExpr>,
{
    let cone = p.add_cone(Cone::Psd(2 * n), trace_bound);
    for r in 0..n {
        for c in 0..n {
            let Some(e) = entry(r, c) else { continue };
            // Upper triangle of [[Re, −Im], [Im, Re]] only.
            push(p, cone, r, c + n, &e.im, -1.0);
            if r <= c {
                push(p, cone, r, c, &e.re, 1.0);
                push(p, cone, r + n, c + n, &e.re, 1.0);
            }
        }
    }
    cone
}

fn add_complex_eq(p: &mut ConicProblem, e: &CExpr) {
    for lin in [&e.re, &e.im] {
        let mut terms = lin.terms.clone();
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some(l) if l.0 == v => l.1 += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|t| t.1.abs() > 1e-15);
        if merged.is_empty() && lin.constant.abs() <= 1e-15 {
            continue;
        }
        p.add_eq(merged, -lin.constant);
    }
}

fn add_class_vars(p: &mut ConicProblem, index: &MomentIndex, c: usize) -> ClassVars {
    let d = index.scenario().bob_dim;
    if index.scalar[c] {
        let re = p.add_var(1.0);
        let im = (!index.self_adjoint[c]).then(|| p.add_var(1.0));
        ClassVars::Scalar { re, im }
    } else if index.self_adjoint[c] {
        ClassVars::Hermitian((0..d * d).map(|_| p.add_var(1.0)).collect())
    } else {
        ClassVars::General((0..2 * d * d).map(|_| p.add_var(1.0)).collect())
    }
}

fn add_moment_cone(p: &mut ConicProblem, layout: &Layout) -> usize {
    let d = layout.dim();
    let n = layout.index.size();
    let trace_bound = 2.0 * (n * d) as f64;
    add_embedded_cone(p, n * d, trace_bound, |r, c| layout.entry(r / d, c / d, r % d, c % d))
}

fn add_robust_t(p: &mut ConicProblem) -> usize {
    let t = p.add_var(f64::INFINITY);
    p.certificate_bounds[t] = 0.0;
    p.objective[t] = 1.0;
    let mut col = Vec::new();
    for (k, cone) in p.cones.iter().enumerate() {
        for r in 0..cone.order() {
            col.push(Triplet { cone: k, row: r, col: r, value: -1.0 });
        }
    }
    p.columns[t] = col;
    t
}

/// Feasibility problem for a fixed assemblage: maximise `t` subject to
/// `Γ(θ) − tI ⪰ 0` with every data class pinned to its target.
pub fn membership_problem(index: &MomentIndex, asm: &Assemblage) -> Result<(ConicProblem, Layout)> {
    let cons = certificate_constraints(index, asm)?;
    let d = asm.dim();
    let mut fixed: Vec<Option<CMat>> = vec![None; index.n_classes()];
    fixed[cons.identity_class] = Some(linalg::identity(d));
    for dc in &cons.data {
        fixed[dc.class] = Some(dc.target.clone());
    }
    let mut p = ConicProblem::default();
    let classes = (0..index.n_classes())
        .map(|c| match fixed[c].take() {
            Some(m) => ClassVars::Fixed(m),
            None => add_class_vars(&mut p, index, c),
        })
        .collect();
    let mut layout = Layout { index: index.clone(), classes, sigma: Vec::new(), t: None };
    add_moment_cone(&mut p, &layout);
    layout.t = Some(add_robust_t(&mut p));
    p.compress();
    Ok((p, layout))
}

/// Blocks summed by the marginal `(Ω, a_Ω, x_Ω, y)` with other inputs `0`.
pub fn marginal_blocks(s: &ScenarioSpec, omega: &[usize], a: &[usize], x: &[usize], y: usize) -> Vec<usize> {
    let free: Vec<usize> = (0..s.n_alices).filter(|k| !omega.contains(k)).collect();
    let mut av = vec![0; s.n_alices];
    let mut xv = vec![0; s.n_alices];
    for (i, &k) in omega.iter().enumerate() {
        av[k] = a[i];
        xv[k] = x[i];
    }
    ScenarioSpec::tuples(s.n_outcomes, free.len())
        .into_iter()
        .map(|combo| {
            for (i, &k) in free.iter().enumerate() {
                av[k] = combo[i];
            }
            s.block_index(&av, &xv, y)
        })
        .collect()
}

/// Problem over a free assemblage and its moment matrix: every class but
/// the identity is free, blocks are PSD, no-signalling and normalised, and
/// data classes are tied to the blocks.
fn free_problem(index: &MomentIndex) -> (ConicProblem, Layout) {
    let s = *index.scenario();
    let d = s.bob_dim;
    let mut p = ConicProblem::default();
    let id = index.identity_class();
    let classes = (0..index.n_classes())
        .map(|c| if c == id { ClassVars::Fixed(linalg::identity(d)) } else { add_class_vars(&mut p, index, c) })
        .collect();
    let sigma: Vec<Vec<usize>> = (0..s.n_blocks()).map(|_| (0..d * d).map(|_| p.add_var(1.0)).collect()).collect();
    let layout = Layout { index: index.clone(), classes, sigma, t: None };
    add_moment_cone(&mut p, &layout);
    for b in 0..s.n_blocks() {
        add_embedded_cone(&mut p, d, 2.0, |k, l| Some(layout.sigma_entry(b, k, l)));
    }

    let block_sum = |blocks: &[usize], k: usize, l: usize| {
        let mut e = CExpr::default();
        for &b in blocks {
            e.add(&layout.sigma_entry(b, k, l), c64(1.0, 0.0));
        }
        e
    };
    let trace_sum = |blocks: &[usize]| {
        let mut e = CExpr::default();
        for &b in blocks {
            for k in 0..d {
                e.add(&layout.sigma_entry(b, k, k), c64(1.0, 0.0));
            }
        }
        e
    };

    for link in data_links(index) {
        for k in 0..d {
            for l in 0..d {
                let mut e = layout.class_entry(link.class, k, l);
                match link.y {
                    Some(y) => {
                        let blocks = marginal_blocks(&s, &link.omega, &link.a, &link.x, y);
                        e.add(&block_sum(&blocks, l, k), c64(-1.0 / d as f64, 0.0));
                    }
                    None if k == l => {
                        let blocks = marginal_blocks(&s, &link.omega, &link.a, &link.x, 0);
                        e.add(&trace_sum(&blocks), c64(-1.0, 0.0));
                    }
                    None => {}
                }
                add_complex_eq(&mut p, &e);
            }
        }
    }

    let outcomes = s.outcome_tuples();
    for x in s.input_tuples() {
        for y in 0..s.n_bob_inputs {
            let blocks: Vec<usize> = outcomes.iter().map(|a| s.block_index(a, &x, y)).collect();
            let mut e = trace_sum(&blocks);
            e.re.constant -= 1.0;
            add_complex_eq(&mut p, &e);
        }
    }
    for party in 0..s.n_alices {
        for x in s.input_tuples() {
            if x[party] == 0 {
                continue;
            }
            let mut x0 = x.clone();
            x0[party] = 0;
            for a in outcomes.iter().filter(|a| a[party] == 0) {
                for y in 0..s.n_bob_inputs {
                    let mut ak = a.clone();
                    let mut here = Vec::new();
                    let mut there = Vec::new();
                    for out in 0..s.n_outcomes {
                        ak[party] = out;
                        here.push(s.block_index(&ak, &x, y));
                        there.push(s.block_index(&ak, &x0, y));
                    }
                    for k in 0..d {
                        for l in k..d {
                            let mut e = block_sum(&here, k, l);
                            e.add(&block_sum(&there, k, l), c64(-1.0, 0.0));
                            add_complex_eq(&mut p, &e);
                        }
                    }
                }
            }
        }
    }
    for x in s.input_tuples() {
        for a in &outcomes {
            for y in 1..s.n_bob_inputs {
                let mut e = trace_sum(&[s.block_index(a, &x, y)]);
                e.add(&trace_sum(&[s.block_index(a, &x, 0)]), c64(-1.0, 0.0));
                add_complex_eq(&mut p, &e);
            }
        }
    }
    (p, layout)
}

/// Maximise `Σ Re Tr[F_b σ_b]` over level-`n` assemblages.
pub fn bound_problem(index: &MomentIndex, coefficients: &[CMat]) -> Result<(ConicProblem, Layout)> {
    let s = index.scenario();
    let d = s.bob_dim;
    if coefficients.len() != s.n_blocks() || coefficients.iter().any(|f| f.shape() != (d, d)) {
        return Err(invalid("functional does not match the scenario"));
    }
    let (mut p, layout) = free_problem(index);
    for (b, f) in coefficients.iter().enumerate() {
        for k in 0..d {
            for l in 0..d {
                // Re(F[k,l] σ[l,k])
                let e = layout.sigma_entry(b, l, k);
                let z = f[(k, l)];
                for &(v, c) in &e.re.terms {
                    p.objective[v] += z.re * c;
                }
                for &(v, c) in &e.im.terms {
                    p.objective[v] -= z.im * c;
                }
            }
        }
    }
    p.compress();
    Ok((p, layout))
}

/// Free problem with the given blocks pinned, maximising the robustness
/// `t` of every cone.
pub fn pinned_problem(index: &MomentIndex, pins: &[(usize, CMat)]) -> Result<(ConicProblem, Layout)> {
    let d = index.scenario().bob_dim;
    let (mut p, mut layout) = free_problem(index);
    for (b, m) in pins {
        if *b >= layout.sigma.len() || m.shape() != (d, d) {
            return Err(invalid("pinned block does not match the scenario"));
        }
        for k in 0..d {
            for l in k..d {
                let mut e = layout.sigma_entry(*b, k, l);
                e.add(&CExpr::constant(m[(k, l)]), c64(-1.0, 0.0));
                add_complex_eq(&mut p, &e);
            }
        }
    }
    layout.t = Some(add_robust_t(&mut p));
    p.compress();
    Ok((p, layout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::reference_moment_matrix;
    use crate::generators::{gen_random_quantum, QuantumDims};

    fn theta_from(layout: &Layout, gamma: &MomentMatrix, sigma: Option<&Assemblage>, n_vars: usize) -> Vec<f64> {
        let d = layout.dim();
        let mut theta = vec![0.0; n_vars];
        for (c, cv) in layout.classes.iter().enumerate() {
            let m = &gamma.blocks[c];
            match cv {
                ClassVars::Fixed(_) => {}
                ClassVars::Scalar { re, im } => {
                    theta[*re] = m[(0, 0)].re;
                    if let Some(v) = im {
                        theta[*v] = m[(0, 0)].im;
                    }
                }
                ClassVars::Hermitian(vars) => {
                    for k in 0..d {
                        theta[vars[k]] = m[(k, k)].re;
                    }
                    let mut pair = 0;
                    for k in 0..d {
                        for l in k + 1..d {
                            theta[vars[d + 2 * pair]] = m[(k, l)].re;
                            theta[vars[d + 2 * pair + 1]] = m[(k, l)].im;
                            pair += 1;
                        }
                    }
                }
                ClassVars::General(vars) => {
                    for k in 0..d {
                        for l in 0..d {
                            theta[vars[2 * (k * d + l)]] = m[(k, l)].re;
                            theta[vars[2 * (k * d + l) + 1]] = m[(k, l)].im;
                        }
                    }
                }
            }
        }
        if let Some(asm) = sigma {
            for (b, vars) in layout.sigma.iter().enumerate() {
                let m = &asm.blocks[b];
                for k in 0..d {
                    theta[vars[k]] = m[(k, k)].re;
                }
                let mut pair = 0;
                for k in 0..d {
                    for l in k + 1..d {
                        theta[vars[d + 2 * pair]] = m[(k, l)].re;
                        theta[vars[d + 2 * pair + 1]] = m[(k, l)].im;
                        pair += 1;
                    }
                }
            }
        }
        theta
    }

    fn setup() -> (MomentMatrix, Assemblage) {
        let s = ScenarioSpec::new(1, 2, 2, 2, 2).unwrap();
        let dims = QuantumDims { alice_dims: vec![2], aux_dim: 2 };
        let qr = gen_random_quantum(3, &s, &dims).unwrap();
        (reference_moment_matrix(&qr, 2).unwrap(), qr.assemblage().unwrap())
    }

    #[test]
    fn moment_cone_reproduces_embedding() {
        let (gamma, asm) = setup();
        let (p, layout) = membership_problem(&gamma.index, &asm).unwrap();
        p.check().unwrap();
        let theta = theta_from(&layout, &gamma, None, p.n_vars());
        let g = p.evaluate(&theta);
        let want = super::super::realify(&gamma.assemble());
        assert!((&g[0] - want).abs().max() < 1e-12);
        let back = layout.moment_matrix(&theta).unwrap();
        for (x, y) in back.blocks.iter().zip(&gamma.blocks) {
            assert!(linalg::max_abs_diff(x, y) < 1e-15);
        }
    }

    #[test]
    fn free_problem_accepts_quantum_point() {
        let (gamma, asm) = setup();
        let f = crate::functional::SteeringFunctional::random(1, asm.scenario);
        let (p, layout) = bound_problem(&gamma.index, &f.coefficients).unwrap();
        p.check().unwrap();
        let theta = theta_from(&layout, &gamma, Some(&asm), p.n_vars());
        for (row, rhs) in p.eq_rows.iter().zip(&p.eq_rhs) {
            let lhs: f64 = row.iter().map(|&(v, c)| c * theta[v]).sum();
            assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
        }
        let obj: f64 = p.objective.iter().zip(&theta).map(|(c, t)| c * t).sum();
        assert!((obj - f.value(&asm).unwrap()).abs() < 1e-10);
        let g = p.evaluate(&theta);
        for (k, m) in g.iter().enumerate().skip(1) {
            let want = super::super::realify(&asm.blocks[k - 1]);
            assert!((m - want).abs().max() < 1e-12);
        }
    }
}
