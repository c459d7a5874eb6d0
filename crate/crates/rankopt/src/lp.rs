//! Linear programs certifying the solvers' optimal values.
//!
//! Three builders: the generic SSP program (one `<=` constraint per state
//! and action, objective maximizing the sum of values), the undamped
//! Max-PageRank program over node values `x_i` and per-fragile-link values
//! `xf_i_j`, and the damped program which adds the half-step values `xh_i`
//! and the teleportation value `x_q`. Target-state variables are fixed at
//! zero and substituted out of the constraints.
//!
//! There is no LP solver here: the optimal value function from policy
//! iteration must be feasible and leave at least one constraint tight per
//! state, which [`check_point`] verifies; full solver reproductions are
//! golden-filed against one external run per variant. Emission is
//! deterministic (terms sorted by variable name) and [`parse_lp`] inverts
//! it exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::chain::Personalization;
use crate::error::{Error, Result};
use crate::graph::DiGraph;
use crate::ssp::SspModel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpVariable {
    pub name: String,
    /// Pinned value (the target-state variables); fixed variables never
    /// appear in constraints or the objective.
    pub fixed: Option<f64>,
}

/// One `sum(terms) <= rhs` constraint. `owner` groups constraints by the
/// state they belong to, for the one-tight-constraint-per-state check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpConstraint {
    pub name: String,
    pub owner: Option<String>,
    pub terms: BTreeMap<String, f64>,
    pub rhs: f64,
}

/// A maximization LP over `<=` constraints with nonnegative variables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpModel {
    pub name: String,
    pub variables: Vec<LpVariable>,
    pub constraints: Vec<LpConstraint>,
    /// Objective coefficients, sense is always "maximize".
    pub objective: BTreeMap<String, f64>,
}

impl LpModel {
    fn new(name: impl Into<String>) -> Self {
        LpModel {
            name: name.into(),
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: BTreeMap::new(),
        }
    }

    fn add_var(&mut self, name: impl Into<String>) -> String {
        let name = name.into();
        self.variables.push(LpVariable {
            name: name.clone(),
            fixed: None,
        });
        name
    }

    fn add_fixed(&mut self, name: impl Into<String>, value: f64) {
        self.variables.push(LpVariable {
            name: name.into(),
            fixed: Some(value),
        });
    }

    /// Free (decision) variable names.
    pub fn free_names(&self) -> impl Iterator<Item = &str> {
        self.variables
            .iter()
            .filter(|v| v.fixed.is_none())
            .map(|v| v.name.as_str())
    }

    pub fn free_count(&self) -> usize {
        self.free_names().count()
    }

    fn push_constraint(
        &mut self,
        owner: Option<String>,
        terms: BTreeMap<String, f64>,
        rhs: f64,
    ) {
        let name = format!("c{}", self.constraints.len());
        self.constraints.push(LpConstraint {
            name,
            owner,
            terms,
            rhs,
        });
    }

    fn validate(&self) -> Result<()> {
        let declared: BTreeSet<&str> = self.free_names().collect();
        for c in &self.constraints {
            for var in c.terms.keys() {
                if !declared.contains(var.as_str()) {
                    return Err(Error::InvalidInput(format!(
                        "constraint {} references undeclared variable {var}",
                        c.name
                    )));
                }
            }
        }
        for var in self.objective.keys() {
            if !declared.contains(var.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "objective references undeclared variable {var}"
                )));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, point: &BTreeMap<String, f64>) -> f64 {
        self.objective
            .iter()
            .map(|(v, c)| c * point.get(v).copied().unwrap_or(0.0))
            .sum()
    }
}

/// Feasibility and per-state tightness of a candidate point.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub feasible: bool,
    /// Names of constraints violated beyond the tolerance.
    pub violated: Vec<String>,
    /// Every state (owner group) has at least one constraint tight within
    /// the tolerance.
    pub tight_per_state: bool,
    /// Owner groups with no tight constraint.
    pub loose_states: Vec<String>,
}

/// Check a named point against the program: feasible within `eps`, and at
/// least one constraint tight within `eps` per owner group. Missing
/// variables are an error; fixed variables default to their pinned value.
pub fn check_point(
    m: &LpModel,
    point: &BTreeMap<String, f64>,
    eps: f64,
) -> Result<CheckReport> {
    for v in m.variables.iter().filter(|v| v.fixed.is_none()) {
        if !point.contains_key(&v.name) {
            return Err(Error::InvalidInput(format!(
                "point is missing variable {}",
                v.name
            )));
        }
    }
    let mut violated = Vec::new();
    let mut tight: BTreeMap<&str, bool> = BTreeMap::new();
    for c in &m.constraints {
        let lhs: f64 = c.terms.iter().map(|(v, coef)| coef * point[v]).sum();
        if lhs > c.rhs + eps {
            violated.push(c.name.clone());
        }
        if let Some(owner) = &c.owner {
            let entry = tight.entry(owner).or_insert(false);
            if (lhs - c.rhs).abs() <= eps {
                *entry = true;
            }
        }
    }
    let loose_states: Vec<String> = tight
        .iter()
        .filter(|(_, &t)| !t)
        .map(|(o, _)| o.to_string())
        .collect();
    Ok(CheckReport {
        feasible: violated.is_empty(),
        violated,
        tight_per_state: loose_states.is_empty(),
        loose_states,
    })
}

/// Name the entries of a refined-model value function after the matching LP
/// variables, giving the candidate point for [`check_point`].
///
/// The damped program has a half-step variable in front of the start state
/// that the model leaves implicit; its value sits on the mixing constraint,
/// `(1-c) J(v_s) + c J(q)`, which is also the expected return time.
pub fn refined_solution_point(
    m: &SspModel,
    g: &DiGraph,
    v: usize,
    values: &[f64],
) -> BTreeMap<String, f64> {
    use crate::ssp::StateLabel;
    let fnames = fragile_vars(g);
    let mut point = BTreeMap::new();
    for (s, label) in m.labels().iter().enumerate() {
        match label {
            StateLabel::Node(w) => {
                point.insert(node_var(*w, v), values[s]);
            }
            StateLabel::FragileAux(id) => {
                point.insert(fnames[*id].clone(), values[s]);
            }
            StateLabel::Damping(base) => {
                if let StateLabel::Node(w) = m.label(*base) {
                    point.insert(half_var(w, v), values[s]);
                }
                // The target's half-step variable is fixed at zero.
            }
            StateLabel::Teleport => {
                point.insert("x_q".into(), values[s]);
            }
            StateLabel::Target => {}
        }
    }
    if let (Some(c), Some(start), Some(q)) = (m.damping(), m.start(), m.teleport()) {
        point.insert(
            "xh_vs".into(),
            (1.0 - c) * values[start] + c * values[q],
        );
    }
    point
}

/// The generic SSP program: variables are the non-target state values, one
/// constraint per state and action, objective maximizing their sum. The
/// optimum is the optimal cost-to-go function.
pub fn build_generic_ssp_lp(m: &SspModel) -> LpModel {
    let tau = m.target();
    let mut lp = LpModel::new("generic-ssp");
    let names: Vec<String> = (0..m.n_states()).map(|i| format!("x_{i}")).collect();
    for (i, name) in names.iter().enumerate() {
        if i == tau {
            lp.add_fixed(name.clone(), 0.0);
        } else {
            lp.add_var(name.clone());
            lp.objective.insert(name.clone(), 1.0);
        }
    }
    for i in 0..m.n_states() {
        if i == tau {
            continue;
        }
        for act in m.actions_of(i) {
            // x_i <= sum_j p (g + x_j)  =>  x_i - sum_{j != tau} p x_j <= E[g].
            let mut terms: BTreeMap<String, f64> = BTreeMap::new();
            terms.insert(names[i].clone(), 1.0);
            let mut rhs = 0.0;
            for t in &act.transitions {
                rhs += t.prob * t.cost;
                if t.to != tau {
                    *terms.entry(names[t.to].clone()).or_insert(0.0) -= t.prob;
                }
            }
            terms.retain(|_, c| *c != 0.0);
            lp.push_constraint(Some(names[i].clone()), terms, rhs);
        }
    }
    lp.validate().expect("construction is closed over declared names");
    lp
}

fn node_var(w: usize, v: usize) -> String {
    if w == v {
        "x_vs".to_string()
    } else {
        format!("x_{w}")
    }
}

fn half_var(w: usize, v: usize) -> String {
    if w == v {
        "xh_vs".to_string()
    } else {
        format!("xh_{w}")
    }
}

/// Fragile-link variable names: `xf_<src>_<dst>`, with an ordinal suffix
/// when parallel fragile records share endpoints.
fn fragile_vars(g: &DiGraph) -> Vec<String> {
    let mut seen: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    g.fragile_edges()
        .map(|e| {
            let occ = seen.entry((e.src, e.dst)).or_insert(0);
            *occ += 1;
            if *occ == 1 {
                format!("xf_{}_{}", e.src, e.dst)
            } else {
                format!("xf_{}_{}_{}", e.src, e.dst, *occ)
            }
        })
        .collect()
}

fn require_plain_nodes(g: &DiGraph) -> Result<()> {
    if let Some(&node) = g.dangling_nodes().first() {
        return Err(Error::DanglingNode { node });
    }
    if let Some(&node) = g.fragile_nodes().first() {
        return Err(Error::FragileNode { node });
    }
    Ok(())
}

/// The undamped Max-PageRank program. Variables: `x_<node>` (the split
/// node's out-half is `x_vs`, its in-half is fixed at zero) and one
/// `xf_<i>_<j>` per fragile link. Out-degrees count fixed and fragile
/// multiplicities regardless of configuration.
pub fn build_max_pagerank_lp(g: &DiGraph, v: usize) -> Result<LpModel> {
    let n = g.node_count();
    if v >= n {
        return Err(Error::NodeOutOfRange { node: v, n });
    }
    require_plain_nodes(g)?;
    let mut lp = LpModel::new("max-pagerank");
    for w in 0..n {
        let name = node_var(w, v);
        lp.add_var(name.clone());
        lp.objective.insert(name, 1.0);
    }
    lp.add_fixed("x_vt", 0.0);
    let fvars = fragile_vars(g);
    for name in &fvars {
        lp.add_var(name.clone());
        lp.objective.insert(name.clone(), 1.0);
    }

    // Per fragile link: xf <= x_src and xf <= x_dst + 1 (arrival at v is
    // the target, worth 0).
    for (k, e) in g.fragile_edges().enumerate() {
        let xf = &fvars[k];
        lp.push_constraint(
            Some(xf.clone()),
            BTreeMap::from([(xf.clone(), 1.0), (node_var(e.src, v), -1.0)]),
            0.0,
        );
        let mut terms = BTreeMap::from([(xf.clone(), 1.0)]);
        if e.dst != v {
            terms.insert(node_var(e.dst, v), -1.0);
        }
        lp.push_constraint(Some(xf.clone()), terms, 1.0);
    }

    // Per node: x_i <= (1/deg) [ sum_fixed m (x_j + 1) + sum_fragile m xf ].
    for i in 0..n {
        let deg = g.out_degree(i) as f64;
        let xi = node_var(i, v);
        let mut terms = BTreeMap::from([(xi.clone(), 1.0)]);
        let mut rhs = 0.0;
        for (k, e) in g.fragile_edges().enumerate() {
            if e.src == i {
                *terms.entry(fvars[k].clone()).or_insert(0.0) -=
                    f64::from(e.multiplicity) / deg;
            }
        }
        for e in g.fixed_edges().filter(|e| e.src == i) {
            let w = f64::from(e.multiplicity) / deg;
            rhs += w;
            if e.dst != v {
                *terms.entry(node_var(e.dst, v)).or_insert(0.0) -= w;
            }
        }
        terms.retain(|_, c| *c != 0.0);
        lp.push_constraint(Some(xi), terms, rhs);
    }
    lp.validate()?;
    Ok(lp)
}

/// The damped Max-PageRank program: adds a half-step value `xh_<node>` per
/// node (teleport or proceed) and the teleportation value `x_q`; leaving the
/// teleportation state costs a step.
pub fn build_damped_lp(g: &DiGraph, v: usize, pers: &Personalization) -> Result<LpModel> {
    let n = g.node_count();
    if v >= n {
        return Err(Error::NodeOutOfRange { node: v, n });
    }
    if pers.n() != n {
        return Err(Error::BadPersonalization(format!(
            "personalization has {} entries for a {n}-node graph",
            pers.n()
        )));
    }
    require_plain_nodes(g)?;
    let c = pers.damping();
    let mut lp = LpModel::new("max-pagerank-damped");
    for w in 0..n {
        let name = node_var(w, v);
        lp.add_var(name.clone());
        lp.objective.insert(name, 1.0);
    }
    lp.add_fixed("x_vt", 0.0);
    for w in 0..n {
        let name = half_var(w, v);
        lp.add_var(name.clone());
        lp.objective.insert(name, 1.0);
    }
    lp.add_fixed("xh_vt", 0.0);
    let fvars = fragile_vars(g);
    for name in &fvars {
        lp.add_var(name.clone());
        lp.objective.insert(name.clone(), 1.0);
    }
    lp.add_var("x_q");
    lp.objective.insert("x_q".into(), 1.0);

    // Fragile links: xf <= x_src, and xf <= xh_dst + 1 (the step lands in
    // the half-step state; onto v it is the fixed xh_vt).
    for (k, e) in g.fragile_edges().enumerate() {
        let xf = &fvars[k];
        lp.push_constraint(
            Some(xf.clone()),
            BTreeMap::from([(xf.clone(), 1.0), (node_var(e.src, v), -1.0)]),
            0.0,
        );
        let mut terms = BTreeMap::from([(xf.clone(), 1.0)]);
        if e.dst != v {
            terms.insert(half_var(e.dst, v), -1.0);
        }
        lp.push_constraint(Some(xf.clone()), terms, 1.0);
    }

    // Half-step mix: xh_i <= (1-c) x_i + c x_q.
    for w in 0..n {
        let xh = half_var(w, v);
        lp.push_constraint(
            Some(xh.clone()),
            BTreeMap::from([
                (xh.clone(), 1.0),
                (node_var(w, v), -(1.0 - c)),
                ("x_q".to_string(), -c),
            ]),
            0.0,
        );
    }

    // Teleportation: x_q <= sum_i zhat_i (xh_i + 1); the split node's mass
    // goes to the target half-step (fixed 0), none to the start.
    {
        let mut terms = BTreeMap::from([("x_q".to_string(), 1.0)]);
        for w in 0..n {
            if w != v {
                terms.insert(half_var(w, v), -pers.z()[w]);
            }
        }
        lp.push_constraint(Some("x_q".into()), terms, 1.0);
    }

    // Node steps: x_i <= (1/deg) [ sum_fixed m (xh_j + 1) + sum_fragile m xf ].
    for i in 0..n {
        let deg = g.out_degree(i) as f64;
        let xi = node_var(i, v);
        let mut terms = BTreeMap::from([(xi.clone(), 1.0)]);
        let mut rhs = 0.0;
        for (k, e) in g.fragile_edges().enumerate() {
            if e.src == i {
                *terms.entry(fvars[k].clone()).or_insert(0.0) -=
                    f64::from(e.multiplicity) / deg;
            }
        }
        for e in g.fixed_edges().filter(|e| e.src == i) {
            let w = f64::from(e.multiplicity) / deg;
            rhs += w;
            if e.dst != v {
                *terms.entry(half_var(e.dst, v)).or_insert(0.0) -= w;
            }
        }
        terms.retain(|_, coef| *coef != 0.0);
        lp.push_constraint(Some(xi), terms, rhs);
    }
    lp.validate()?;
    Ok(lp)
}

/// Render the program in the LP text format: `Maximize`, `Subject To`,
/// `Bounds`, `End`. Deterministic: terms are sorted by variable name, and
/// numbers use the shortest representation that round-trips.
pub fn emit_lp(m: &LpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", m.name);
    out.push_str("Maximize\n obj:");
    if m.objective.is_empty() {
        out.push_str(" 0");
    } else {
        for (var, coef) in &m.objective {
            push_term(&mut out, *coef, var);
        }
    }
    out.push_str("\nSubject To\n");
    for cst in &m.constraints {
        if let Some(owner) = &cst.owner {
            let _ = writeln!(out, "\\ state: {owner}");
        }
        let _ = write!(out, " {}:", cst.name);
        for (var, coef) in &cst.terms {
            push_term(&mut out, *coef, var);
        }
        let _ = writeln!(out, " <= {}", cst.rhs);
    }
    out.push_str("Bounds\n");
    for v in &m.variables {
        match v.fixed {
            Some(value) => {
                let _ = writeln!(out, " {} = {}", v.name, value);
            }
            None => {
                let _ = writeln!(out, " {} >= 0", v.name);
            }
        }
    }
    out.push_str("End\n");
    out
}

fn push_term(out: &mut String, coef: f64, var: &str) {
    if coef < 0.0 {
        let _ = write!(out, " - {} {var}", -coef);
    } else {
        let _ = write!(out, " + {coef} {var}");
    }
}

/// Parse text produced by [`emit_lp`] back into a model; the round trip is
/// exact.
pub fn parse_lp(text: &str) -> Result<LpModel> {
    #[derive(PartialEq)]
    enum Section {
        Head,
        Objective,
        Constraints,
        Bounds,
        Done,
    }
    let mut model = LpModel::new(String::new());
    let mut section = Section::Head;
    let mut pending_owner: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        let err = |msg: String| Error::Parse { line: line_no, msg };
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('\\') {
            let comment = comment.trim();
            if let Some(owner) = comment.strip_prefix("state:") {
                pending_owner = Some(owner.trim().to_string());
            } else if section == Section::Head {
                model.name = comment.to_string();
            }
            continue;
        }
        match line {
            "Maximize" => {
                section = Section::Objective;
                continue;
            }
            "Subject To" => {
                section = Section::Constraints;
                continue;
            }
            "Bounds" => {
                section = Section::Bounds;
                continue;
            }
            "End" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Objective => {
                let body = line
                    .strip_prefix("obj:")
                    .ok_or_else(|| err("objective must start with `obj:`".into()))?;
                model.objective = parse_terms(body, line_no)?.0;
            }
            Section::Constraints => {
                let (name, rest) = line
                    .split_once(':')
                    .ok_or_else(|| err("constraint needs a `name:` prefix".into()))?;
                let (lhs, rhs) = rest
                    .split_once("<=")
                    .ok_or_else(|| err("constraint needs `<=`".into()))?;
                let rhs: f64 = rhs
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad constant {rhs:?}")))?;
                let (terms, _) = parse_terms(lhs, line_no)?;
                model.constraints.push(LpConstraint {
                    name: name.trim().to_string(),
                    owner: pending_owner.take(),
                    terms,
                    rhs,
                });
            }
            Section::Bounds => {
                let fields: Vec<&str> = line.split_whitespace().collect();
                match fields.as_slice() {
                    [name, ">=", "0"] => {
                        model.add_var(name.to_string());
                    }
                    [name, "=", value] => {
                        let value: f64 = value
                            .parse()
                            .map_err(|_| err(format!("bad fixed value {value:?}")))?;
                        model.add_fixed(name.to_string(), value);
                    }
                    _ => return Err(err(format!("unrecognized bound {line:?}"))),
                }
            }
            Section::Head | Section::Done => {
                return Err(err(format!("unexpected content {line:?}")));
            }
        }
    }
    model.validate()?;
    Ok(model)
}

fn parse_terms(body: &str, line_no: usize) -> Result<(BTreeMap<String, f64>, usize)> {
    let err = |msg: String| Error::Parse { line: line_no, msg };
    let tokens: Vec<&str> = body.split_whitespace().collect();
    let mut terms = BTreeMap::new();
    if tokens == ["0"] {
        return Ok((terms, 1));
    }
    let mut i = 0;
    while i < tokens.len() {
        let sign = match tokens[i] {
            "+" => 1.0,
            "-" => -1.0,
            other => return Err(err(format!("expected sign, found {other:?}"))),
        };
        let coef: f64 = tokens
            .get(i + 1)
            .ok_or_else(|| err("dangling sign".into()))?
            .parse()
            .map_err(|_| err(format!("bad coefficient {:?}", tokens[i + 1])))?;
        let var = tokens
            .get(i + 2)
            .ok_or_else(|| err("missing variable name".into()))?;
        terms.insert(var.to_string(), sign * coef);
        i += 3;
    }
    Ok((terms, i))
}
