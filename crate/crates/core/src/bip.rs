//! Exact minimisation of a nonnegative linear objective over binary
//! variables subject to `≥` rows.
//!
//! Product variables declared through [`Coupling`]s are never branched on:
//! their value is always `left · right`, which is what the four McCormick
//! inequalities enforce at binary points. The search deepens over the
//! objective value starting at `objective_floor`; each level is a
//! depth-first feasibility search (index order, value 1 first) pruned by
//! comparing every row's largest achievable left side with its right side.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `Σ coef · x ≥ rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearRow {
    pub terms: Vec<(usize, i64)>,
    pub rhs: i64,
}

impl LinearRow {
    pub fn new(terms: Vec<(usize, i64)>, rhs: i64) -> Self {
        LinearRow { terms, rhs }
    }

    pub fn lhs(&self, x: &[bool]) -> i64 {
        self.terms
            .iter()
            .map(|&(v, a)| if x[v] { a } else { 0 })
            .sum()
    }

    pub fn is_satisfied(&self, x: &[bool]) -> bool {
        self.lhs(x) >= self.rhs
    }
}

/// Declares `product = left · right`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coupling {
    pub product: usize,
    pub left: usize,
    pub right: usize,
}

impl Coupling {
    /// The four McCormick rows `w ≤ z`, `w ≤ z'`, `w ≥ 0`, `w ≥ z + z' − 1`.
    pub fn mccormick_rows(&self) -> [LinearRow; 4] {
        let (w, a, b) = (self.product, self.left, self.right);
        let pair = |x: usize, cx: i64, y: usize, cy: i64| {
            if x == y {
                vec![(x, cx + cy)]
            } else {
                vec![(x, cx), (y, cy)]
            }
        };
        [
            LinearRow::new(pair(a, 1, w, -1), 0),
            LinearRow::new(pair(b, 1, w, -1), 0),
            LinearRow::new(vec![(w, 1)], 0),
            LinearRow::new(
                {
                    let mut t = vec![(w, 1)];
                    if a == b {
                        t.push((a, -2));
                    } else {
                        t.push((a, -1));
                        t.push((b, -1));
                    }
                    t
                },
                -1,
            ),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryProgram {
    pub num_vars: usize,
    pub objective: Vec<i64>,
    pub rows: Vec<LinearRow>,
    pub couplings: Vec<Coupling>,
    pub objective_floor: i64,
}

impl BinaryProgram {
    /// Program with `num_vars` variables of objective weight 1 and no rows.
    pub fn with_unit_objective(num_vars: usize) -> Self {
        BinaryProgram {
            num_vars,
            objective: vec![1; num_vars],
            ..Default::default()
        }
    }

    /// Appends a variable with the given objective weight and returns its index.
    pub fn add_var(&mut self, cost: i64) -> usize {
        self.objective.push(cost);
        self.num_vars += 1;
        self.num_vars - 1
    }

    /// Adds a product variable coupled to `left · right`.
    pub fn add_product(&mut self, left: usize, right: usize) -> usize {
        let product = self.add_var(0);
        self.couplings.push(Coupling {
            product,
            left,
            right,
        });
        product
    }

    pub fn objective_value(&self, x: &[bool]) -> i64 {
        self.objective
            .iter()
            .zip(x)
            .map(|(&c, &b)| if b { c } else { 0 })
            .sum()
    }

    /// Checks every row and coupling at a full assignment.
    pub fn is_feasible(&self, x: &[bool]) -> bool {
        self.rows.iter().all(|r| r.is_satisfied(x))
            && self
                .couplings
                .iter()
                .all(|c| x[c.product] == (x[c.left] && x[c.right]))
    }

    fn validate(&self) -> Result<Vec<Option<(usize, usize)>>> {
        if self.objective.len() != self.num_vars {
            return Err(Error::Config("objective length differs from num_vars".into()));
        }
        let mut product_of = vec![None; self.num_vars];
        for c in &self.couplings {
            for v in [c.product, c.left, c.right] {
                if v >= self.num_vars {
                    return Err(Error::Config(format!("coupling references variable {v}")));
                }
            }
            if product_of[c.product].is_some() {
                return Err(Error::Config(format!(
                    "variable {} is the product of two couplings",
                    c.product
                )));
            }
            product_of[c.product] = Some((c.left, c.right));
        }
        for c in &self.couplings {
            if product_of[c.left].is_some() || product_of[c.right].is_some() {
                return Err(Error::Config("nested products are not supported".into()));
            }
            if self.objective[c.product] != 0 {
                return Err(Error::Config("product variables must have zero cost".into()));
            }
        }
        if self.objective.iter().any(|&c| c < 0) {
            return Err(Error::Config("objective weights must be nonnegative".into()));
        }
        for r in &self.rows {
            if let Some(&(v, _)) = r.terms.iter().find(|t| t.0 >= self.num_vars) {
                return Err(Error::Config(format!("row references variable {v}")));
            }
        }
        Ok(product_of)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Budget {
    pub max_nodes: Option<u64>,
    pub time_limit: Option<Duration>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Limit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub assignment: Vec<bool>,
    pub objective_value: i64,
    /// Proven lower bound on the optimum (equals the objective when optimal).
    pub bound: i64,
    pub nodes_explored: u64,
}

pub fn solve_min(bp: &BinaryProgram, budget: Budget) -> Result<SolveOutcome> {
    let product_of = bp.validate()?;
    let mut search = Search::new(bp, &product_of, budget);
    let max_obj: i64 = search.branch.iter().map(|&v| bp.objective[v]).sum();
    let start = bp.objective_floor.max(0);
    // Rows with no variables are decided up front.
    if bp.rows.iter().any(|r| r.terms.is_empty() && r.rhs > 0) {
        return Ok(search.finish(SolveStatus::Infeasible, start));
    }
    for level in start..=max_obj {
        match search.level(level) {
            LevelResult::Found => {
                let x = search.full_assignment();
                debug_assert!(bp.is_feasible(&x));
                return Ok(SolveOutcome {
                    status: SolveStatus::Optimal,
                    objective_value: bp.objective_value(&x),
                    assignment: x,
                    bound: level,
                    nodes_explored: search.nodes,
                });
            }
            LevelResult::Exhausted => {}
            LevelResult::Limit => return Ok(search.finish(SolveStatus::Limit, level)),
        }
    }
    Ok(search.finish(SolveStatus::Infeasible, max_obj + 1))
}

enum LevelResult {
    Found,
    Exhausted,
    Limit,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Val {
    Free,
    Zero,
    One,
}

struct Search<'a> {
    bp: &'a BinaryProgram,
    product_of: &'a [Option<(usize, usize)>],
    branch: Vec<usize>,
    /// suffix sums of branch-variable costs
    suffix_cost: Vec<i64>,
    vals: Vec<Val>,
    /// flat term storage: (row, var, coef)
    terms: Vec<(usize, usize, i64)>,
    contrib: Vec<i64>,
    row_max: Vec<i64>,
    /// term indices affected by each variable
    occurs: Vec<Vec<usize>>,
    trail: Vec<(usize, i64)>,
    nodes: u64,
    budget: Budget,
    started: Instant,
    out_of_budget: bool,
}

impl<'a> Search<'a> {
    fn new(bp: &'a BinaryProgram, product_of: &'a [Option<(usize, usize)>], budget: Budget) -> Self {
        let branch: Vec<usize> = (0..bp.num_vars)
            .filter(|&v| product_of[v].is_none())
            .collect();
        let mut suffix_cost = vec![0i64; branch.len() + 1];
        for i in (0..branch.len()).rev() {
            suffix_cost[i] = suffix_cost[i + 1] + bp.objective[branch[i]];
        }
        let mut terms = Vec::new();
        let mut occurs = vec![Vec::new(); bp.num_vars];
        for (r, row) in bp.rows.iter().enumerate() {
            for &(v, a) in &row.terms {
                if a == 0 {
                    continue;
                }
                let idx = terms.len();
                terms.push((r, v, a));
                match product_of[v] {
                    None => occurs[v].push(idx),
                    Some((l, rr)) => {
                        occurs[l].push(idx);
                        if rr != l {
                            occurs[rr].push(idx);
                        }
                    }
                }
            }
        }
        let contrib: Vec<i64> = terms.iter().map(|t| t.2.max(0)).collect();
        let mut row_max = vec![0i64; bp.rows.len()];
        for (i, t) in terms.iter().enumerate() {
            row_max[t.0] += contrib[i];
        }
        Search {
            bp,
            product_of,
            branch,
            suffix_cost,
            vals: vec![Val::Free; bp.num_vars],
            terms,
            contrib,
            row_max,
            occurs,
            trail: Vec::new(),
            nodes: 0,
            budget,
            started: Instant::now(),
            out_of_budget: false,
        }
    }

    fn term_value(&self, var: usize, coef: i64) -> i64 {
        let state = match self.product_of[var] {
            None => self.vals[var],
            Some((l, r)) => match (self.vals[l], self.vals[r]) {
                (Val::Zero, _) | (_, Val::Zero) => Val::Zero,
                (Val::One, Val::One) => Val::One,
                _ => Val::Free,
            },
        };
        match state {
            Val::Zero => 0,
            Val::One => coef,
            Val::Free => coef.max(0),
        }
    }

    fn assign(&mut self, var: usize, val: Val) {
        self.vals[var] = val;
        for k in 0..self.occurs[var].len() {
            let idx = self.occurs[var][k];
            let (row, v, coef) = self.terms[idx];
            let new = self.term_value(v, coef);
            let old = self.contrib[idx];
            if new != old {
                self.row_max[row] += new - old;
                self.contrib[idx] = new;
                self.trail.push((idx, old));
            }
        }
    }

    fn undo_to(&mut self, mark: usize, var: usize) {
        while self.trail.len() > mark {
            let (idx, old) = self.trail.pop().expect("trail entry");
            let row = self.terms[idx].0;
            self.row_max[row] += old - self.contrib[idx];
            self.contrib[idx] = old;
        }
        self.vals[var] = Val::Free;
    }

    fn rows_ok(&self) -> bool {
        self.row_max
            .iter()
            .zip(&self.bp.rows)
            .all(|(&mx, r)| mx >= r.rhs)
    }

    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if let Some(max) = self.budget.max_nodes {
            if self.nodes > max {
                self.out_of_budget = true;
            }
        }
        if self.nodes % 1024 == 0 {
            if let Some(limit) = self.budget.time_limit {
                if self.started.elapsed() > limit {
                    self.out_of_budget = true;
                }
            }
        }
        !self.out_of_budget
    }

    fn level(&mut self, target: i64) -> LevelResult {
        if !self.rows_ok() {
            return LevelResult::Exhausted;
        }
        if self.dfs(0, target) {
            LevelResult::Found
        } else if self.out_of_budget {
            LevelResult::Limit
        } else {
            LevelResult::Exhausted
        }
    }

    /// Leaves the successful assignment in place when returning `true`.
    fn dfs(&mut self, pos: usize, remaining: i64) -> bool {
        if remaining < 0 || remaining > self.suffix_cost[pos] {
            return false;
        }
        if pos == self.branch.len() {
            return remaining == 0;
        }
        let var = self.branch[pos];
        let cost = self.bp.objective[var];
        for val in [Val::One, Val::Zero] {
            if val == Val::One && cost > remaining {
                continue;
            }
            if !self.tick() {
                return false;
            }
            let mark = self.trail.len();
            self.assign(var, val);
            let spent = if val == Val::One { cost } else { 0 };
            if self.rows_ok() && self.dfs(pos + 1, remaining - spent) {
                return true;
            }
            self.undo_to(mark, var);
            if self.out_of_budget {
                return false;
            }
        }
        false
    }

    fn full_assignment(&self) -> Vec<bool> {
        (0..self.bp.num_vars)
            .map(|v| match self.product_of[v] {
                None => self.vals[v] == Val::One,
                Some((l, r)) => self.vals[l] == Val::One && self.vals[r] == Val::One,
            })
            .collect()
    }

    fn finish(&self, status: SolveStatus, bound: i64) -> SolveOutcome {
        SolveOutcome {
            status,
            assignment: Vec::new(),
            objective_value: 0,
            bound,
            nodes_explored: self.nodes,
        }
    }
}
