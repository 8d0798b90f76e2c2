//! Gauss collocation (m = 4 stages) for two-point boundary value problems
//! with unknown total time, damped Newton on a bordered banded system, and
//! error-equidistributing mesh redistribution.
//!
//! Unknowns are the mesh-point values, the stage values at the Gauss nodes
//! of every interval, the total time `T`, and (for pseudo-arclength
//! continuation) one free parameter.  The collocation equations are kept in
//! defect form `P'(c_j)/(h_i T) - f(U_ij) = 0`, so reported residuals have
//! the units of the vector field.

use crate::error::{Error, Result};
use crate::linalg::BorderedSolver;
use crate::reductions::VectorField;

pub const M_STAGES: usize = 4;

/// Gauss-Legendre nodes/weights on (0,1) and the Lagrange differentiation
/// data over the interval nodes {0, c_1..c_4}.
pub struct GaussBasis {
    pub c: [f64; M_STAGES],
    pub w: [f64; M_STAGES],
    /// `d[j][k] = l_k'(c_j)`, basis over the nodes 0, c1..c4.
    pub d: [[f64; M_STAGES + 1]; M_STAGES],
    /// `e[k] = l_k(1)`.
    pub e: [f64; M_STAGES + 1],
    /// Weights of the m-th derivative (constant): m! / prod_{l != k}(s_k - s_l).
    pub dm: [f64; M_STAGES + 1],
}

impl Default for GaussBasis {
    fn default() -> Self {
        Self::new()
    }
}

impl GaussBasis {
    pub fn new() -> Self {
        let c = [
            0.069431844202973712,
            0.330009478207571868,
            0.669990521792428132,
            0.930568155797026288,
        ];
        let w = [
            0.173927422568726929,
            0.326072577431273071,
            0.326072577431273071,
            0.173927422568726929,
        ];
        let mut s: [f64; M_STAGES + 1] = [0.0; M_STAGES + 1];
        s[1..].copy_from_slice(&c);
        // l_k'(s_j): for j != k: prod_{l != k, l != j}(s_j - s_l) / prod_{l != k}(s_k - s_l);
        // for j == k: sum_{l != k} 1/(s_k - s_l).
        let mut d = [[0.0; M_STAGES + 1]; M_STAGES];
        for (j, row) in d.iter_mut().enumerate() {
            let sj = s[j + 1];
            for (k, entry) in row.iter_mut().enumerate() {
                let sk = s[k];
                if (sj - sk).abs() < 1e-14 {
                    let mut sum = 0.0;
                    for (l, &sl) in s.iter().enumerate() {
                        if l != k {
                            sum += 1.0 / (sk - sl);
                        }
                    }
                    *entry = sum;
                } else {
                    let mut num = 1.0;
                    let mut den = 1.0;
                    for (l, &sl) in s.iter().enumerate() {
                        if l == k {
                            continue;
                        }
                        den *= sk - sl;
                        if l != j + 1 {
                            num *= sj - sl;
                        }
                    }
                    *entry = num / den;
                }
            }
        }
        let mut e = [0.0; M_STAGES + 1];
        for (k, ek) in e.iter_mut().enumerate() {
            let mut v = 1.0;
            for (l, &sl) in s.iter().enumerate() {
                if l != k {
                    v *= (1.0 - sl) / (s[k] - sl);
                }
            }
            *ek = v;
        }
        let mut dm = [0.0; M_STAGES + 1];
        let mfact = (1..=M_STAGES).product::<usize>() as f64;
        for (k, dk) in dm.iter_mut().enumerate() {
            let mut den = 1.0;
            for (l, &sl) in s.iter().enumerate() {
                if l != k {
                    den *= s[k] - sl;
                }
            }
            *dk = mfact / den;
        }
        Self { c, w, d, e, dm }
    }

    /// Lagrange evaluation over {0, c1..c4} at local coordinate `sigma`.
    pub fn eval_weights(&self, sigma: f64) -> [f64; M_STAGES + 1] {
        let mut s = [0.0; M_STAGES + 1];
        s[1..].copy_from_slice(&self.c);
        let mut out = [0.0; M_STAGES + 1];
        for (k, ok) in out.iter_mut().enumerate() {
            let mut v = 1.0;
            for (l, &sl) in s.iter().enumerate() {
                if l != k {
                    v *= (sigma - sl) / (s[k] - sl);
                }
            }
            *ok = v;
        }
        out
    }
}

/// A collocation solution: mesh on `[0, 1]`, node and stage values, total time.
#[derive(Debug, Clone)]
pub struct CollocationSolution {
    pub dim: usize,
    pub mesh: Vec<f64>,
    /// (N+1) * dim node values.
    pub nodes: Vec<f64>,
    /// N * m * dim stage values.
    pub stages: Vec<f64>,
    pub t_total: f64,
    pub param: f64,
    /// Scaled infinity norm of the discrete residual at acceptance.
    pub residual_inf: f64,
}

impl CollocationSolution {
    pub fn n_intervals(&self) -> usize {
        self.mesh.len() - 1
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn stage(&self, i: usize, j: usize) -> &[f64] {
        let o = (i * M_STAGES + j) * self.dim;
        &self.stages[o..o + self.dim]
    }

    pub fn start(&self) -> &[f64] {
        self.node(0)
    }

    pub fn end(&self) -> &[f64] {
        self.node(self.n_intervals())
    }

    /// Dense evaluation at normalized time `s` in `[0, 1]`.
    pub fn eval(&self, basis: &GaussBasis, s: f64) -> Vec<f64> {
        let n = self.n_intervals();
        let s = s.clamp(0.0, 1.0);
        let mut i = match self.mesh.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
            Ok(k) => k,
            Err(k) => k.saturating_sub(1),
        };
        if i >= n {
            i = n - 1;
        }
        let h = self.mesh[i + 1] - self.mesh[i];
        let sigma = if h > 0.0 { (s - self.mesh[i]) / h } else { 0.0 };
        let wts = basis.eval_weights(sigma);
        let mut out = vec![0.0; self.dim];
        for c in 0..self.dim {
            let mut v = wts[0] * self.node(i)[c];
            for j in 0..M_STAGES {
                v += wts[j + 1] * self.stage(i, j)[c];
            }
            out[c] = v;
        }
        out
    }

    /// Samples the orbit densely: `per_interval` points per mesh interval,
    /// returning real times (scaled by the total time) and states.
    pub fn sample_series(&self, basis: &GaussBasis, per_interval: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n_intervals();
        let mut ts = Vec::with_capacity(n * per_interval + 1);
        let mut states = Vec::with_capacity(n * per_interval + 1);
        for i in 0..n {
            for q in 0..per_interval {
                let s = self.mesh[i] + (self.mesh[i + 1] - self.mesh[i]) * q as f64 / per_interval as f64;
                ts.push(s * self.t_total);
                states.push(self.eval(basis, s));
            }
        }
        ts.push(self.t_total);
        states.push(self.end().to_vec());
        (ts, states)
    }

    /// AUTO-style L2 norm: sqrt(int_0^1 |u|^2 ds) by Gauss quadrature.
    pub fn l2_norm(&self, basis: &GaussBasis) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n_intervals() {
            let h = self.mesh[i + 1] - self.mesh[i];
            for j in 0..M_STAGES {
                let st = self.stage(i, j);
                acc += h * basis.w[j] * st.iter().map(|v| v * v).sum::<f64>();
            }
        }
        acc.sqrt()
    }

    /// Maximum of one component over all stage and node values.
    pub fn max_component(&self, c: usize) -> f64 {
        let mut m = f64::NEG_INFINITY;
        for i in 0..=self.n_intervals() {
            m = m.max(self.node(i)[c]);
        }
        for i in 0..self.n_intervals() {
            for j in 0..M_STAGES {
                m = m.max(self.stage(i, j)[c]);
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct CollocOptions {
    pub newton_max: usize,
    pub tol_residual: f64,
    pub tol_step: f64,
    /// Print Newton iteration diagnostics to stderr.
    pub trace: bool,
}

impl Default for CollocOptions {
    fn default() -> Self {
        Self { newton_max: 14, tol_residual: 1e-10, tol_step: 1e-12, trace: false }
    }
}

/// Boundary conditions for a one-parameter family member: conditions on the
/// start point plus conditions on the end point; together they must number
/// `dim + 1` (the extra one balances the unknown total time).
pub struct SegmentBcs<'a> {
    pub start: Vec<Box<dyn Fn(&[f64]) -> f64 + 'a>>,
    pub end: Vec<Box<dyn Fn(&[f64]) -> f64 + 'a>>,
}

/// Data for the periodic problem: integral phase condition against a
/// reference orbit and, optionally, a pseudo-arclength row that frees the
/// parameter.
pub struct PeriodicBcs {
    /// u_ref'(s) at every collocation point (normalized time), N*m*dim.
    pub phase_deriv: Vec<f64>,
    /// Right-hand constant: int <u_ref, u_ref'> ds.
    pub phase_const: f64,
    pub palc: Option<PalcRow>,
}

/// Pseudo-arclength constraint `<Z - Z_prev, V> = ds` in the weighted
/// orbit/T/param inner product.
#[derive(Debug, Clone)]
pub struct PalcRow {
    /// Direction at stage values, N*m*dim.
    pub v_stages: Vec<f64>,
    pub v_t: f64,
    pub v_param: f64,
    pub prev_stages: Vec<f64>,
    pub prev_t: f64,
    pub prev_param: f64,
    pub ds: f64,
    pub w_t: f64,
    pub w_param: f64,
}

enum Problem<'a> {
    Segment { field: &'a dyn VectorField, bcs: &'a SegmentBcs<'a> },
    Periodic { field_for: &'a dyn Fn(f64) -> Result<Box<dyn VectorField>>, bcs: &'a PeriodicBcs },
}

struct Engine<'a> {
    dim: usize,
    n: usize,
    basis: &'a GaussBasis,
    problem: Problem<'a>,
}

impl<'a> Engine<'a> {
    fn bs(&self) -> usize {
        (M_STAGES + 1) * self.dim
    }

    fn n_core(&self) -> usize {
        self.n * self.bs()
    }

    fn n_border(&self) -> usize {
        match &self.problem {
            Problem::Segment { .. } => self.dim + 1,
            Problem::Periodic { bcs, .. } => self.dim + 1 + usize::from(bcs.palc.is_some()),
        }
    }

    fn field(&self, param: f64) -> Result<FieldHandle<'a>> {
        match &self.problem {
            Problem::Segment { field, .. } => Ok(FieldHandle::Borrowed(*field)),
            Problem::Periodic { field_for, .. } => Ok(FieldHandle::Owned(field_for(param)?)),
        }
    }

    /// Full residual; `core` has length n_core, `border` length n_border.
    fn residual(&self, sol: &CollocationSolution, core: &mut [f64], border: &mut [f64]) -> Result<()> {
        let d = self.dim;
        let bs = self.bs();
        let fh = self.field(sol.param)?;
        let f = fh.as_ref();
        let mut fval = vec![0.0; d];
        for i in 0..self.n {
            let h = sol.mesh[i + 1] - sol.mesh[i];
            let ht = h * sol.t_total;
            let base = i * bs;
            for j in 0..M_STAGES {
                f.eval(sol.stage(i, j), &mut fval)?;
                for c in 0..d {
                    let mut deriv = self.basis.d[j][0] * sol.node(i)[c];
                    for l in 0..M_STAGES {
                        deriv += self.basis.d[j][l + 1] * sol.stage(i, l)[c];
                    }
                    core[base + j * d + c] = deriv / ht - fval[c];
                }
            }
            for c in 0..d {
                let mut v = self.basis.e[0] * sol.node(i)[c];
                for l in 0..M_STAGES {
                    v += self.basis.e[l + 1] * sol.stage(i, l)[c];
                }
                core[base + M_STAGES * d + c] = v - sol.node(i + 1)[c];
            }
        }
        match &self.problem {
            Problem::Segment { bcs, .. } => {
                let mut r = 0;
                for cond in &bcs.start {
                    border[r] = cond(sol.start());
                    r += 1;
                }
                for cond in &bcs.end {
                    border[r] = cond(sol.end());
                    r += 1;
                }
                debug_assert_eq!(r, self.n_border());
            }
            Problem::Periodic { bcs, .. } => {
                for c in 0..d {
                    border[c] = sol.end()[c] - sol.start()[c];
                }
                let mut phase = -bcs.phase_const;
                for i in 0..self.n {
                    let h = sol.mesh[i + 1] - sol.mesh[i];
                    for j in 0..M_STAGES {
                        let st = sol.stage(i, j);
                        let dref = &bcs.phase_deriv[(i * M_STAGES + j) * d..(i * M_STAGES + j + 1) * d];
                        let mut dot = 0.0;
                        for c in 0..d {
                            dot += st[c] * dref[c];
                        }
                        phase += h * self.basis.w[j] * dot;
                    }
                }
                border[d] = phase;
                if let Some(palc) = &bcs.palc {
                    let mut acc = 0.0;
                    for i in 0..self.n {
                        let h = sol.mesh[i + 1] - sol.mesh[i];
                        for j in 0..M_STAGES {
                            let o = (i * M_STAGES + j) * d;
                            for c in 0..d {
                                acc += h
                                    * self.basis.w[j]
                                    * (sol.stages[o + c] - palc.prev_stages[o + c])
                                    * palc.v_stages[o + c];
                            }
                        }
                    }
                    acc += palc.w_t * (sol.t_total - palc.prev_t) * palc.v_t;
                    acc += palc.w_param * (sol.param - palc.prev_param) * palc.v_param;
                    border[d + 1] = acc - palc.ds;
                }
            }
        }
        Ok(())
    }

    /// Assembles the bordered Jacobian at `sol`.
    fn jacobian(&self, sol: &CollocationSolution, solver: &mut BorderedSolver) -> Result<()> {
        let d = self.dim;
        let bs = self.bs();
        let free_param = matches!(&self.problem, Problem::Periodic { bcs, .. } if bcs.palc.is_some());
        solver.reset();
        let fh = self.field(sol.param)?;
        let f = fh.as_ref();
        // Parameter-perturbed field for the param column.
        let dp = 1e-7 * (1.0 + sol.param.abs());
        let fh_p = if free_param { Some(self.field(sol.param + dp)?) } else { None };
        let mut fval = vec![0.0; d];
        let mut fpert = vec![0.0; d];
        let mut jac = vec![0.0; d * d];
        let mut upert = vec![0.0; d];
        for i in 0..self.n {
            let h = sol.mesh[i + 1] - sol.mesh[i];
            let ht = h * sol.t_total;
            let base = i * bs;
            // Column indices: u_i (border if i == 0), stages of i, u_{i+1}.
            let u_i_col = if i == 0 { None } else { Some((i - 1) * bs + M_STAGES * d) };
            let stage_col = |j: usize| i * bs + j * d;
            let u_ip1_col = i * bs + M_STAGES * d;
            for j in 0..M_STAGES {
                let st = sol.stage(i, j);
                f.eval(st, &mut fval)?;
                // State Jacobian by forward differences.
                for jc in 0..d {
                    upert.copy_from_slice(st);
                    let hstep = f64::EPSILON.sqrt() * st[jc].abs().max(1e-5);
                    upert[jc] += hstep;
                    f.eval(&upert, &mut fpert)?;
                    for ic in 0..d {
                        jac[ic * d + jc] = (fpert[ic] - fval[ic]) / hstep;
                    }
                }
                for c in 0..d {
                    let row = base + j * d + c;
                    // d/d u_i
                    let coeff = self.basis.d[j][0] / ht;
                    match u_i_col {
                        Some(col) => solver.band.add(row, col + c, coeff),
                        None => solver.cols[c][row] += coeff,
                    }
                    // d/d stages
                    for l in 0..M_STAGES {
                        let coeff = self.basis.d[j][l + 1] / ht;
                        solver.band.add(row, stage_col(l) + c, coeff);
                    }
                    for jc in 0..d {
                        solver.band.add(row, stage_col(j) + jc, -jac[c * d + jc]);
                    }
                    // d/d T: -(deriv)/(h T^2) = -(defect + f)/T
                    let mut deriv = self.basis.d[j][0] * sol.node(i)[c];
                    for l in 0..M_STAGES {
                        deriv += self.basis.d[j][l + 1] * sol.stage(i, l)[c];
                    }
                    solver.cols[d][row] += -deriv / (ht * sol.t_total);
                    if let Some(fhp) = &fh_p {
                        fhp.as_ref().eval(st, &mut fpert)?;
                        solver.cols[d + 1][row] += -(fpert[c] - fval[c]) / dp;
                    }
                }
            }
            for c in 0..d {
                let row = base + M_STAGES * d + c;
                let coeff = self.basis.e[0];
                match u_i_col {
                    Some(col) => solver.band.add(row, col + c, coeff),
                    None => solver.cols[c][row] += coeff,
                }
                for l in 0..M_STAGES {
                    solver.band.add(row, stage_col(l) + c, self.basis.e[l + 1]);
                }
                solver.band.add(row, u_ip1_col + c, -1.0);
            }
        }
        // Border rows.
        let u_n_col = (self.n - 1) * bs + M_STAGES * d;
        match &self.problem {
            Problem::Segment { bcs, .. } => {
                let mut r = 0;
                let u0 = sol.start().to_vec();
                for cond in &bcs.start {
                    let base_val = cond(&u0);
                    let mut up = u0.clone();
                    for c in 0..d {
                        let hstep = f64::EPSILON.sqrt() * (1.0 + u0[c].abs());
                        up[c] = u0[c] + hstep;
                        solver.corner[(r, c)] = (cond(&up) - base_val) / hstep;
                        up[c] = u0[c];
                    }
                    r += 1;
                }
                let un = sol.end().to_vec();
                for cond in &bcs.end {
                    let base_val = cond(&un);
                    let mut up = un.clone();
                    for c in 0..d {
                        let hstep = f64::EPSILON.sqrt() * (1.0 + un[c].abs());
                        up[c] = un[c] + hstep;
                        solver.rows[r][u_n_col + c] = (cond(&up) - base_val) / hstep;
                        up[c] = un[c];
                    }
                    r += 1;
                }
            }
            Problem::Periodic { bcs, .. } => {
                for c in 0..d {
                    solver.rows[c][u_n_col + c] = 1.0;
                    solver.corner[(c, c)] = -1.0;
                }
                for i in 0..self.n {
                    let h = sol.mesh[i + 1] - sol.mesh[i];
                    for j in 0..M_STAGES {
                        let o = (i * M_STAGES + j) * d;
                        for c in 0..d {
                            solver.rows[d][i * bs + j * d + c] +=
                                h * self.basis.w[j] * bcs.phase_deriv[o + c];
                        }
                    }
                }
                if let Some(palc) = &bcs.palc {
                    for i in 0..self.n {
                        let h = sol.mesh[i + 1] - sol.mesh[i];
                        for j in 0..M_STAGES {
                            let o = (i * M_STAGES + j) * d;
                            for c in 0..d {
                                solver.rows[d + 1][i * bs + j * d + c] +=
                                    h * self.basis.w[j] * palc.v_stages[o + c];
                            }
                        }
                    }
                    solver.corner[(d + 1, d)] = palc.w_t * palc.v_t;
                    solver.corner[(d + 1, d + 1)] = palc.w_param * palc.v_param;
                }
            }
        }
        Ok(())
    }

    fn apply_step(&self, sol: &mut CollocationSolution, core: &[f64], border: &[f64], lambda: f64) {
        let d = self.dim;
        let bs = self.bs();
        for i in 0..self.n {
            for j in 0..M_STAGES {
                let o = (i * M_STAGES + j) * d;
                for c in 0..d {
                    sol.stages[o + c] -= lambda * core[i * bs + j * d + c];
                }
            }
            for c in 0..d {
                sol.nodes[(i + 1) * d + c] -= lambda * core[i * bs + M_STAGES * d + c];
            }
        }
        for c in 0..d {
            sol.nodes[c] -= lambda * border[c];
        }
        sol.t_total -= lambda * border[d];
        if border.len() > d + 1 {
            sol.param -= lambda * border[d + 1];
        }
    }

    fn newton(&self, sol: &mut CollocationSolution, opts: &CollocOptions) -> Result<()> {
        let n_core = self.n_core();
        let p = self.n_border();
        let bs = self.bs();
        let mut solver = BorderedSolver::new(n_core, bs + self.dim, bs + self.dim, p);
        let mut core = vec![0.0; n_core];
        let mut border = vec![0.0; p];
        let mut bad_steps = 0;
        for _it in 0..opts.newton_max {
            self.residual(sol, &mut core, &mut border)?;
            let rnorm = inf_norm(&core).max(inf_norm(&border));
            if opts.trace {
                eprintln!(
                    "  newton it {_it}: residual {rnorm:.3e} (core {:.3e}, border {:.3e}) T {:.6} param {:.8}",
                    inf_norm(&core),
                    inf_norm(&border),
                    sol.t_total,
                    sol.param
                );
            }
            if rnorm < opts.tol_residual {
                sol.residual_inf = rnorm;
                return Ok(());
            }
            self.jacobian(sol, &mut solver)?;
            let (dx, dw) = solver.solve(&core, &border)?;
            let step_norm = inf_norm(&dx).max(inf_norm(&dw));
            // Damped update: backtrack until the residual decreases; one
            // mildly increasing step is tolerated to cross nonlinear kinks.
            let mut accepted = false;
            let mut lambda = 1.0;
            for _ in 0..7 {
                let mut trial = sol.clone();
                self.apply_step(&mut trial, &dx, &dw, lambda);
                let mut tc = vec![0.0; n_core];
                let mut tb = vec![0.0; p];
                match self.residual(&trial, &mut tc, &mut tb) {
                    Ok(()) => {
                        let tnorm = inf_norm(&tc).max(inf_norm(&tb));
                        let tolerated = tnorm < 3.0 * rnorm && bad_steps == 0 && lambda <= 0.07;
                        if tnorm < rnorm || tolerated {
                            if tnorm >= rnorm {
                                bad_steps += 1;
                            } else {
                                bad_steps = 0;
                            }
                            *sol = trial;
                            sol.residual_inf = tnorm;
                            accepted = true;
                            break;
                        }
                    }
                    Err(_) => {}
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err(Error::NewtonNonconvergence(format!(
                    "line search failed (residual {rnorm:.3e})"
                )));
            }
            if step_norm < opts.tol_step && sol.residual_inf < 1e-8 {
                return Ok(());
            }
        }
        if sol.residual_inf < 1e-9 {
            return Ok(());
        }
        Err(Error::NewtonNonconvergence(format!(
            "collocation Newton: residual {:.3e} after {} iterations",
            sol.residual_inf, opts.newton_max
        )))
    }
}

enum FieldHandle<'a> {
    Borrowed(&'a dyn VectorField),
    Owned(Box<dyn VectorField>),
}

impl<'a> FieldHandle<'a> {
    fn as_ref(&self) -> &dyn VectorField {
        match self {
            FieldHandle::Borrowed(f) => *f,
            FieldHandle::Owned(b) => b.as_ref(),
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves a segment BVP with the supplied start/end conditions from an
/// initial guess (typically an integration or a neighboring family member).
pub fn solve_segment(
    field: &dyn VectorField,
    basis: &GaussBasis,
    init: &CollocationSolution,
    bcs: &SegmentBcs<'_>,
    opts: &CollocOptions,
) -> Result<CollocationSolution> {
    let dim = field.dim();
    if bcs.start.len() + bcs.end.len() != dim + 1 {
        return Err(Error::Collocation(format!(
            "segment BVP needs {} boundary conditions, got {}",
            dim + 1,
            bcs.start.len() + bcs.end.len()
        )));
    }
    let engine = Engine {
        dim,
        n: init.n_intervals(),
        basis,
        problem: Problem::Segment { field, bcs },
    };
    let mut sol = init.clone();
    engine.newton(&mut sol, opts)?;
    Ok(sol)
}

/// Solves the periodic BVP (with the phase condition built from `phase_ref`)
/// at fixed parameter, or with the parameter freed when `palc` is given.
pub fn solve_periodic_bvp(
    field_for: &dyn Fn(f64) -> Result<Box<dyn VectorField>>,
    basis: &GaussBasis,
    init: &CollocationSolution,
    bcs: &PeriodicBcs,
    opts: &CollocOptions,
) -> Result<CollocationSolution> {
    let engine = Engine {
        dim: init.dim,
        n: init.n_intervals(),
        basis,
        problem: Problem::Periodic { field_for, bcs },
    };
    let mut sol = init.clone();
    engine.newton(&mut sol, opts)?;
    Ok(sol)
}

/// Builds the phase-condition data (reference derivative at collocation
/// points and the matching constant) from a reference solution.
pub fn phase_data(sol: &CollocationSolution, basis: &GaussBasis) -> (Vec<f64>, f64) {
    let d = sol.dim;
    let n = sol.n_intervals();
    let mut deriv = vec![0.0; n * M_STAGES * d];
    let mut cnst = 0.0;
    for i in 0..n {
        let h = sol.mesh[i + 1] - sol.mesh[i];
        for j in 0..M_STAGES {
            let o = (i * M_STAGES + j) * d;
            for c in 0..d {
                let mut dv = basis.d[j][0] * sol.node(i)[c];
                for l in 0..M_STAGES {
                    dv += basis.d[j][l + 1] * sol.stage(i, l)[c];
                }
                // normalized-time derivative
                deriv[o + c] = dv / h;
                cnst += h * basis.w[j] * sol.stage(i, j)[c] * deriv[o + c];
            }
        }
    }
    (deriv, cnst)
}

/// Builds an initial collocation solution from a sampled trajectory,
/// distributing mesh points by an arclength monitor on the samples.
pub fn solution_from_samples(
    ts: &[f64],
    states: &[Vec<f64>],
    dim: usize,
    n_mesh: usize,
    basis: &GaussBasis,
    param: f64,
) -> CollocationSolution {
    let t0 = ts[0];
    let t_total = ts[ts.len() - 1] - t0;
    let nsamp = ts.len();
    // Component scales for the arclength monitor.
    let mut scale: Vec<f64> = vec![1e-12; dim];
    for s in states {
        for c in 0..dim {
            scale[c] = scale[c].max(s[c].abs());
        }
    }
    let mut cum = vec![0.0; nsamp];
    for k in 1..nsamp {
        let mut inc = 1e-3 * (ts[k] - ts[k - 1]) / t_total;
        for c in 0..dim {
            inc += ((states[k][c] - states[k - 1][c]) / scale[c]).abs();
        }
        cum[k] = cum[k - 1] + inc;
    }
    let total = cum[nsamp - 1].max(1e-300);
    let mut mesh = Vec::with_capacity(n_mesh + 1);
    let mut k = 0usize;
    for i in 0..=n_mesh {
        let target = total * i as f64 / n_mesh as f64;
        while k + 1 < nsamp - 1 && cum[k + 1] < target {
            k += 1;
        }
        let (c0, c1) = (cum[k], cum[k + 1]);
        let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
        let t = ts[k] + frac * (ts[k + 1] - ts[k]);
        mesh.push(((t - t0) / t_total).clamp(0.0, 1.0));
    }
    mesh[0] = 0.0;
    *mesh.last_mut().unwrap() = 1.0;
    // Enforce strict monotonicity.
    for i in 1..mesh.len() {
        if mesh[i] <= mesh[i - 1] {
            mesh[i] = mesh[i - 1] + 1e-12;
        }
    }
    let interp = |s: f64| -> Vec<f64> {
        let t = t0 + s * t_total;
        let mut k = match ts.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        if k >= nsamp - 1 {
            k = nsamp - 2;
        }
        let w = if ts[k + 1] > ts[k] { (t - ts[k]) / (ts[k + 1] - ts[k]) } else { 0.0 };
        (0..dim)
            .map(|c| states[k][c] * (1.0 - w) + states[k + 1][c] * w)
            .collect()
    };
    let mut nodes = Vec::with_capacity((n_mesh + 1) * dim);
    for &s in &mesh {
        nodes.extend(interp(s));
    }
    let mut stages = Vec::with_capacity(n_mesh * M_STAGES * dim);
    for i in 0..n_mesh {
        let h = mesh[i + 1] - mesh[i];
        for j in 0..M_STAGES {
            stages.extend(interp(mesh[i] + basis.c[j] * h));
        }
    }
    CollocationSolution {
        dim,
        mesh,
        nodes,
        stages,
        t_total,
        param,
        residual_inf: f64::INFINITY,
    }
}

/// Redistributes the mesh by equidistributing an estimate of
/// `|u^(m+1)|^(1/(m+1))`, the standard collocation error monitor.
pub fn redistribute_mesh(sol: &CollocationSolution, basis: &GaussBasis) -> Vec<f64> {
    let n = sol.n_intervals();
    let d = sol.dim;
    if n < 4 {
        return sol.mesh.clone();
    }
    // Component scales.
    let mut scale: Vec<f64> = vec![1e-12; d];
    for i in 0..=n {
        for c in 0..d {
            scale[c] = scale[c].max(sol.node(i)[c].abs());
        }
    }
    // m-th derivative (constant per interval) of the local polynomial.
    let mut um = vec![0.0; n * d];
    for i in 0..n {
        let h = sol.mesh[i + 1] - sol.mesh[i];
        for c in 0..d {
            let mut v = basis.dm[0] * sol.node(i)[c];
            for j in 0..M_STAGES {
                v += basis.dm[j + 1] * sol.stage(i, j)[c];
            }
            um[i * d + c] = v / h.powi(M_STAGES as i32);
        }
    }
    // Divided difference across interval boundaries -> u^(m+1) estimate.
    let mut monitor = vec![0.0; n];
    for i in 0..n {
        let mut m: f64 = 0.0;
        for c in 0..d {
            let left = if i > 0 {
                let dh = 0.5 * (sol.mesh[i + 1] - sol.mesh[i - 1]);
                ((um[i * d + c] - um[(i - 1) * d + c]) / dh).abs()
            } else {
                0.0
            };
            let right = if i + 1 < n {
                let dh = 0.5 * (sol.mesh[i + 2] - sol.mesh[i]);
                ((um[(i + 1) * d + c] - um[i * d + c]) / dh).abs()
            } else {
                0.0
            };
            m = m.max(left.max(right) / scale[c]);
        }
        monitor[i] = m.powf(1.0 / (M_STAGES as f64 + 1.0));
    }
    let mmax = monitor.iter().cloned().fold(0.0, f64::max).max(1e-300);
    for m in monitor.iter_mut() {
        *m = m.max(1e-3 * mmax);
    }
    // Smooth the monitor to avoid abrupt mesh jumps.
    for _ in 0..2 {
        let snap = monitor.clone();
        for i in 0..n {
            let l = if i > 0 { snap[i - 1] } else { snap[i] };
            let r = if i + 1 < n { snap[i + 1] } else { snap[i] };
            monitor[i] = (0.25 * l + 0.5 * snap[i] + 0.25 * r).max(monitor[i] * 0.5);
        }
    }
    let mut cum = vec![0.0; n + 1];
    for i in 0..n {
        cum[i + 1] = cum[i] + monitor[i] * (sol.mesh[i + 1] - sol.mesh[i]);
    }
    let total = cum[n];
    let mut mesh = Vec::with_capacity(n + 1);
    let mut k = 0usize;
    for i in 0..=n {
        let target = total * i as f64 / n as f64;
        while k + 1 < n && cum[k + 1] < target {
            k += 1;
        }
        let frac = if cum[k + 1] > cum[k] { (target - cum[k]) / (cum[k + 1] - cum[k]) } else { 0.0 };
        mesh.push(sol.mesh[k] + frac * (sol.mesh[k + 1] - sol.mesh[k]));
    }
    mesh[0] = 0.0;
    mesh[n] = 1.0;
    for i in 1..=n {
        if mesh[i] <= mesh[i - 1] {
            mesh[i] = mesh[i - 1] + 1e-12;
        }
    }
    mesh
}

/// Re-interpolates a solution onto a new mesh.
pub fn reinterpolate(sol: &CollocationSolution, basis: &GaussBasis, mesh: &[f64]) -> CollocationSolution {
    let d = sol.dim;
    let n = mesh.len() - 1;
    let mut nodes = Vec::with_capacity((n + 1) * d);
    for &s in mesh {
        nodes.extend(sol.eval(basis, s));
    }
    let mut stages = Vec::with_capacity(n * M_STAGES * d);
    for i in 0..n {
        let h = mesh[i + 1] - mesh[i];
        for j in 0..M_STAGES {
            stages.extend(sol.eval(basis, mesh[i] + basis.c[j] * h));
        }
    }
    CollocationSolution {
        dim: d,
        mesh: mesh.to_vec(),
        nodes,
        stages,
        t_total: sol.t_total,
        param: sol.param,
        residual_inf: f64::INFINITY,
    }
}
