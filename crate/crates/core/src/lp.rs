//! Dense two-phase simplex with Bland's rule and a lexicographic
//! post-pass that selects a unique point from the optimal face.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows must hold within this residual at an optimal point.
pub const FEAS_TOL: f64 = 1e-8;
/// Rows with residual below this are reported active.
pub const ACT_TOL: f64 = 1e-7;
/// Slack on the objective while refining lexicographically.
pub const LEX_TOL: f64 = 1e-9;

const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-10;
const PHASE_ONE_TOL: f64 = 1e-9;
/// Reduced costs above this pin their column to the optimal face.
const FACE_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

/// One inequality row `coeffs · x ≤ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<f64>, rhs: f64) -> Self {
        Row { coeffs, rhs }
    }

    pub fn residual(&self, x: &[f64]) -> f64 {
        self.rhs - dot(&self.coeffs, x)
    }
}

/// `min cost·x` subject to `rows` and `var_lower ≤ x ≤ var_upper` (bounds may be infinite).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub rows: Vec<Row>,
    pub var_lower: Vec<f64>,
    pub var_upper: Vec<f64>,
}

impl LinearProgram {
    /// A program with no rows and free variables.
    pub fn new(cost: Vec<f64>) -> Self {
        let n = cost.len();
        LinearProgram {
            cost,
            rows: Vec::new(),
            var_lower: vec![f64::NEG_INFINITY; n],
            var_upper: vec![f64::INFINITY; n],
        }
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.var_lower = lower;
        self.var_upper = upper;
        self
    }

    pub fn push_row(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.rows.push(Row::new(coeffs, rhs));
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.cost.len();
        if n == 0 {
            return Err(Error::Dimension("linear program has no variables".into()));
        }
        if self.cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("cost vector must be finite".into()));
        }
        if self.var_lower.len() != n || self.var_upper.len() != n {
            return Err(Error::Dimension(format!(
                "bounds have lengths {}/{}, expected {n}",
                self.var_lower.len(),
                self.var_upper.len()
            )));
        }
        for (k, (l, u)) in self.var_lower.iter().zip(&self.var_upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u || *l == f64::INFINITY || *u == f64::NEG_INFINITY {
                return Err(Error::Domain(format!("invalid bounds [{l}, {u}] on variable {k}")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(Error::Dimension(format!(
                    "row {i} has {} coefficients, expected {n}",
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::Domain(format!("row {i} has non-finite entries")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Empty unless `status` is optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Rows whose residual is within [`ACT_TOL`].
    pub active_rows: Vec<usize>,
    /// Rows whose slack is nonbasic at the vertex the simplex stopped on.
    /// At most `n_x` of them; keeping only these rows leaves that vertex optimal.
    pub basis_rows: Vec<usize>,
}

impl LpSolution {
    fn non_optimal(status: LpStatus) -> Self {
        let objective = match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
        LpSolution {
            status,
            x: Vec::new(),
            objective,
            active_rows: Vec::new(),
            basis_rows: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// How the user variable maps onto nonnegative tableau columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = shift + z[col]
    Shift { shift: f64, col: usize },
    /// x = shift - z[col]
    Flip { shift: f64, col: usize },
    /// x = z[pos] - z[neg]
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy)]
enum Origin {
    User(usize),
    Upper(usize),
}

struct StandardForm {
    maps: Vec<VarMap>,
    n_cols: usize,
    /// Rows over the structural columns, tagged with where they came from.
    rows: Vec<(Vec<f64>, f64, Origin)>,
    cost: Vec<f64>,
}

fn standard_form(lp: &LinearProgram) -> StandardForm {
    let mut maps = Vec::with_capacity(lp.num_vars());
    let mut n_cols = 0;
    for (&l, &u) in lp.var_lower.iter().zip(&lp.var_upper) {
        let map = if l.is_finite() {
            VarMap::Shift { shift: l, col: n_cols }
        } else if u.is_finite() {
            VarMap::Flip { shift: u, col: n_cols }
        } else {
            n_cols += 1;
            VarMap::Split {
                pos: n_cols - 1,
                neg: n_cols,
            }
        };
        n_cols += 1;
        maps.push(map);
    }

    let translate = |coeffs: &[f64]| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; n_cols];
        let mut offset = 0.0;
        for (a, map) in coeffs.iter().zip(&maps) {
            match *map {
                VarMap::Shift { shift, col } => {
                    out[col] += a;
                    offset += a * shift;
                }
                VarMap::Flip { shift, col } => {
                    out[col] -= a;
                    offset += a * shift;
                }
                VarMap::Split { pos, neg } => {
                    out[pos] += a;
                    out[neg] -= a;
                }
            }
        }
        (out, offset)
    };

    let mut rows = Vec::with_capacity(lp.rows.len() + lp.num_vars());
    for (i, row) in lp.rows.iter().enumerate() {
        let (coeffs, offset) = translate(&row.coeffs);
        rows.push((coeffs, row.rhs - offset, Origin::User(i)));
    }
    for (k, map) in maps.iter().enumerate() {
        if let VarMap::Shift { shift, col } = *map {
            let u = lp.var_upper[k];
            if u.is_finite() {
                let mut coeffs = vec![0.0; n_cols];
                coeffs[col] = 1.0;
                rows.push((coeffs, u - shift, Origin::Upper(k)));
            }
        }
    }
    let (cost, _) = translate(&lp.cost);
    StandardForm {
        maps,
        n_cols,
        rows,
        cost,
    }
}

/// Dense tableau `T z = rhs` over structural, slack and artificial columns.
struct Tableau {
    data: Vec<f64>,
    width: usize,
    n_rows: usize,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    banned: Vec<bool>,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn pivot(&mut self, row: usize, col: usize, reduced: &mut [f64], obj: &mut f64) {
        let w = self.width;
        let p = self.data[row * w + col];
        for j in 0..w {
            self.data[row * w + j] /= p;
        }
        self.rhs[row] /= p;
        self.data[row * w + col] = 1.0;
        let (before, rest) = self.data.split_at_mut(row * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        let rhs_p = self.rhs[row];
        let eliminate = |other: &mut [f64], rhs: &mut f64| {
            let f = other[col];
            if f != 0.0 {
                for (o, p) in other.iter_mut().zip(pivot_row.iter()) {
                    *o -= f * p;
                }
                other[col] = 0.0;
                *rhs -= f * rhs_p;
            }
        };
        for (i, chunk) in before.chunks_mut(w).enumerate() {
            let mut r = self.rhs[i];
            eliminate(chunk, &mut r);
            self.rhs[i] = r;
        }
        for (k, chunk) in after.chunks_mut(w).enumerate() {
            let i = row + 1 + k;
            let mut r = self.rhs[i];
            eliminate(chunk, &mut r);
            self.rhs[i] = r;
        }
        let f = reduced[col];
        if f != 0.0 {
            for (rc, p) in reduced.iter_mut().zip(pivot_row.iter()) {
                *rc -= f * p;
            }
            reduced[col] = 0.0;
            *obj -= f * rhs_p;
        }
        self.basis[row] = col;
    }

    /// Minimizes with Bland's rule. `reduced` holds reduced costs and `obj`
    /// the negated objective value, both consistent with the current basis.
    fn run(&mut self, reduced: &mut [f64], obj: &mut f64) -> Result<PhaseOutcome> {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..self.width).find(|&j| !self.banned[j] && reduced[j] < -COST_TOL);
            let Some(col) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.n_rows {
                let a = self.at(i, col);
                if a > PIVOT_TOL {
                    let ratio = self.rhs[i].max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((best, best_ratio)) => {
                            let tie = (ratio - best_ratio).abs() <= 1e-12 * (1.0 + best_ratio.abs());
                            if ratio < best_ratio && !tie
                                || tie && self.basis[i] < self.basis[best]
                            {
                                Some((i, ratio))
                            } else {
                                Some((best, best_ratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(PhaseOutcome::Unbounded),
                Some((row, _)) => self.pivot(row, col, reduced, obj),
            }
        }
        Err(Error::SolverFailure(format!(
            "simplex exceeded {MAX_PIVOTS} pivots"
        )))
    }
}

/// Restrictions that cut the feasible set down to the optimal face: every
/// nonbasic column with a positive reduced cost must stay at zero.
#[derive(Debug, Clone, Default)]
struct Face {
    tight_rows: Vec<usize>,
    at_lower: Vec<usize>,
    at_upper: Vec<usize>,
}

struct RawSolution {
    status: LpStatus,
    x: Vec<f64>,
    basis_rows: Vec<usize>,
    face: Face,
}

impl RawSolution {
    fn non_optimal(status: LpStatus) -> Self {
        RawSolution {
            status,
            x: Vec::new(),
            basis_rows: Vec::new(),
            face: Face::default(),
        }
    }
}

fn simplex(lp: &LinearProgram) -> Result<RawSolution> {
    let sf = standard_form(lp);
    let n_rows = sf.rows.len();
    let n_struct = sf.n_cols;
    let n_art = sf.rows.iter().filter(|r| r.1 < 0.0).count();
    let width = n_struct + n_rows + n_art;

    let mut data = vec![0.0; n_rows * width];
    let mut rhs = vec![0.0; n_rows];
    let mut basis = vec![0; n_rows];
    let mut banned = vec![false; width];
    let mut art = n_struct + n_rows;
    let mut art_rows = Vec::with_capacity(n_art);
    for (i, (coeffs, b, _)) in sf.rows.iter().enumerate() {
        let sign = if *b < 0.0 { -1.0 } else { 1.0 };
        let row = &mut data[i * width..(i + 1) * width];
        for (dst, c) in row.iter_mut().zip(coeffs) {
            *dst = sign * c;
        }
        row[n_struct + i] = sign;
        rhs[i] = sign * b;
        if sign < 0.0 {
            row[art] = 1.0;
            basis[i] = art;
            art_rows.push(i);
            art += 1;
        } else {
            basis[i] = n_struct + i;
        }
    }
    let mut tab = Tableau {
        data,
        width,
        n_rows,
        rhs,
        basis,
        banned: banned.clone(),
    };

    if n_art > 0 {
        let mut reduced = vec![0.0; width];
        let mut obj = 0.0;
        for &i in &art_rows {
            for j in 0..n_struct + n_rows {
                reduced[j] -= tab.at(i, j);
            }
            obj -= tab.rhs[i];
        }
        tab.run(&mut reduced, &mut obj)?;
        let scale = 1.0 + sf.rows.iter().map(|r| r.1.abs()).fold(0.0, f64::max);
        if -obj > PHASE_ONE_TOL * scale {
            return Ok(RawSolution::non_optimal(LpStatus::Infeasible));
        }
        // Pivot zero-level artificials out where possible; rows where that
        // fails are redundant and stay inert.
        for i in 0..n_rows {
            if tab.basis[i] >= n_struct + n_rows {
                if let Some(j) = (0..n_struct + n_rows).find(|&j| tab.at(i, j).abs() > 1e-9) {
                    let mut dummy = vec![0.0; width];
                    let mut o = 0.0;
                    tab.pivot(i, j, &mut dummy, &mut o);
                }
            }
        }
        for flag in banned.iter_mut().skip(n_struct + n_rows) {
            *flag = true;
        }
        tab.banned = banned;
    }

    let mut reduced = vec![0.0; width];
    reduced[..n_struct].copy_from_slice(&sf.cost);
    let mut obj = 0.0;
    for i in 0..n_rows {
        let cb = if tab.basis[i] < n_struct {
            sf.cost[tab.basis[i]]
        } else {
            0.0
        };
        if cb != 0.0 {
            for j in 0..width {
                reduced[j] -= cb * tab.at(i, j);
            }
            obj -= cb * tab.rhs[i];
        }
    }
    if let PhaseOutcome::Unbounded = tab.run(&mut reduced, &mut obj)? {
        return Ok(RawSolution::non_optimal(LpStatus::Unbounded));
    }

    let mut z = vec![0.0; n_struct];
    let mut slack_basic = vec![false; n_rows];
    for i in 0..n_rows {
        let b = tab.basis[i];
        if b < n_struct {
            z[b] = tab.rhs[i].max(0.0);
        } else if b < n_struct + n_rows {
            slack_basic[b - n_struct] = true;
        }
    }
    let x = sf
        .maps
        .iter()
        .map(|map| match *map {
            VarMap::Shift { shift, col } => shift + z[col],
            VarMap::Flip { shift, col } => shift - z[col],
            VarMap::Split { pos, neg } => z[pos] - z[neg],
        })
        .collect();
    let basis_rows = sf
        .rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| match r.2 {
            Origin::User(u) if !slack_basic[i] => Some(u),
            _ => None,
        })
        .collect();

    let mut basic = vec![false; width];
    for &b in &tab.basis {
        basic[b] = true;
    }
    let pinned = |j: usize| !basic[j] && reduced[j] > FACE_TOL;
    let mut face = Face::default();
    for (j, map) in sf.maps.iter().enumerate() {
        match *map {
            VarMap::Shift { col, .. } if pinned(col) => face.at_lower.push(j),
            VarMap::Flip { col, .. } if pinned(col) => face.at_upper.push(j),
            _ => {}
        }
    }
    for (i, r) in sf.rows.iter().enumerate() {
        if pinned(n_struct + i) {
            match r.2 {
                Origin::User(u) => face.tight_rows.push(u),
                Origin::Upper(k) => face.at_upper.push(k),
            }
        }
    }
    Ok(RawSolution {
        status: LpStatus::Optimal,
        x,
        basis_rows,
        face,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn finish(lp: &LinearProgram, x: Vec<f64>, basis_rows: Vec<usize>) -> Result<LpSolution> {
    let mut worst: f64 = 0.0;
    let mut active_rows = Vec::new();
    for (i, row) in lp.rows.iter().enumerate() {
        let residual = row.residual(&x);
        worst = worst.max(-residual);
        if residual <= ACT_TOL {
            active_rows.push(i);
        }
    }
    for (k, xk) in x.iter().enumerate() {
        worst = worst.max(lp.var_lower[k] - xk).max(xk - lp.var_upper[k]);
    }
    if worst > FEAS_TOL {
        return Err(Error::SolverFailure(format!(
            "optimal point violates a constraint by {worst:e}"
        )));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: dot(&lp.cost, &x),
        x,
        active_rows,
        basis_rows,
    })
}

/// Solves without the lexicographic post-pass: the point is whichever
/// optimal vertex the simplex stops on.
pub fn solve_vertex(lp: &LinearProgram) -> Result<LpSolution> {
    lp.check()?;
    let raw = simplex(lp)?;
    match raw.status {
        LpStatus::Optimal => finish(lp, raw.x, raw.basis_rows),
        status => Ok(LpSolution::non_optimal(status)),
    }
}

/// Solves and returns the lexicographically smallest optimizer.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    solve_lex_prefix(lp, lp.num_vars())
}

/// As [`solve`], refining only the first `prefix` coordinates; later
/// coordinates are whatever the last refinement step returns.
pub fn solve_lex_prefix(lp: &LinearProgram, prefix: usize) -> Result<LpSolution> {
    lp.check()?;
    let raw = simplex(lp)?;
    if raw.status != LpStatus::Optimal {
        return Ok(LpSolution::non_optimal(raw.status));
    }
    let vertex = finish(lp, raw.x.clone(), raw.basis_rows.clone())?;
    let x = refine(&restrict_to_face(lp, &raw), prefix.min(lp.num_vars()), raw.x)?;
    let sol = finish(lp, x, raw.basis_rows)?;
    if sol.objective > vertex.objective + LEX_TOL * (1.0 + vertex.objective.abs()) {
        return Err(Error::SolverFailure(format!(
            "lexicographic refinement drifted from {} to {}",
            vertex.objective, sol.objective
        )));
    }
    Ok(sol)
}

/// The point minimizing (x₁, x₂, …) in order over the feasible points with
/// `cost·x ≤ optimal_value + LEX_TOL(1 + |optimal_value|)`. One LP per
/// coordinate; each step freezes the coordinate it minimized.
pub fn lex_refine(lp: &LinearProgram, optimal_value: f64) -> Result<Vec<f64>> {
    lp.check()?;
    let mut work = lp.clone();
    work.push_row(lp.cost.clone(), optimal_value + LEX_TOL * (1.0 + optimal_value.abs()));
    let start = solve_vertex(&work)?;
    if !start.is_optimal() {
        return Err(Error::SolverFailure("no point within the objective band".into()));
    }
    refine(&work, lp.num_vars(), start.x)
}

fn restrict_to_face(lp: &LinearProgram, raw: &RawSolution) -> LinearProgram {
    let mut work = lp.clone();
    for &i in &raw.face.tight_rows {
        let row = &lp.rows[i];
        work.push_row(row.coeffs.iter().map(|c| -c).collect(), -row.rhs);
    }
    for &k in &raw.face.at_lower {
        work.var_upper[k] = work.var_lower[k];
    }
    for &k in &raw.face.at_upper {
        work.var_lower[k] = work.var_upper[k];
    }
    work
}

fn refine(face: &LinearProgram, prefix: usize, start: Vec<f64>) -> Result<Vec<f64>> {
    let n = face.num_vars();
    let mut work = face.clone();
    let mut x = start;
    for k in 0..prefix {
        if work.var_lower[k] == work.var_upper[k] {
            x[k] = work.var_lower[k];
            continue;
        }
        let mut unit = vec![0.0; n];
        unit[k] = 1.0;
        work.cost = unit;
        let mut step = solve_vertex(&work);
        if !matches!(step, Ok(ref s) if s.is_optimal()) {
            // Exact freezing and equality rows can fail by rounding; retry
            // with every frozen coordinate widened by a tolerance band.
            let mut loose = work.clone();
            for j in 0..k {
                loose.var_lower[j] -= LEX_TOL * (1.0 + x[j].abs());
                loose.var_upper[j] += LEX_TOL * (1.0 + x[j].abs());
            }
            for row in loose.rows.iter_mut() {
                row.rhs += LEX_TOL * (1.0 + row.rhs.abs());
            }
            step = solve_vertex(&loose);
        }
        let step = step?;
        match step.status {
            LpStatus::Optimal => {}
            LpStatus::Unbounded => {
                return Err(Error::SolverFailure(format!(
                    "coordinate {k} is unbounded below on the optimal face"
                )))
            }
            LpStatus::Infeasible => {
                return Err(Error::SolverFailure(format!(
                    "lexicographic step {k} lost feasibility"
                )))
            }
        }
        let value = step.x[k];
        work.var_lower[k] = value;
        work.var_upper[k] = value;
        x = step.x;
    }
    Ok(x)
}
