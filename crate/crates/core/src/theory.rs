//! Finite-support checks of the source-quality bounds: cross-entropy
//! improvement chains toward a Boltzmann target, the terminal-gap bound
//! under cross-entropy, its expected-cost form, and the per-step cost
//! lemmas.

use serde::{Deserialize, Serialize};

use crate::numeric::Rng;
use crate::{Error, Result};

/// Slack below which an inequality counts as violated.
pub const SLACK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiscreteDist(Vec<f64>);

impl TryFrom<Vec<f64>> for DiscreteDist {
    type Error = Error;
    fn try_from(p: Vec<f64>) -> Result<Self> {
        Self::new(p)
    }
}

impl From<DiscreteDist> for Vec<f64> {
    fn from(d: DiscreteDist) -> Self {
        d.0
    }
}

impl DiscreteDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("distribution needs a nonempty support"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("probabilities must be finite and >= 0"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self(probs))
    }

    pub fn uniform(support: usize) -> Result<Self> {
        if support == 0 {
            return Err(Error::invalid("distribution needs a nonempty support"));
        }
        Ok(Self(vec![1.0 / support as f64; support]))
    }

    /// Flat-Dirichlet draw; every entry is positive.
    pub fn random(support: usize, rng: &mut Rng) -> Result<Self> {
        if support == 0 {
            return Err(Error::invalid("distribution needs a nonempty support"));
        }
        let w: Vec<f64> = (0..support).map(|_| -(1.0 - rng.uniform()).ln() + 1e-12).collect();
        let total: f64 = w.iter().sum();
        Ok(Self(w.into_iter().map(|v| v / total).collect()))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(1 − λ)·self + λ·other`.
    pub fn mix(&self, other: &DiscreteDist, lambda: f64) -> Result<Self> {
        same_support(self.len(), other.len())?;
        Ok(Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(p, q)| (1.0 - lambda) * p + lambda * q)
                .collect(),
        ))
    }
}

fn same_support(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::SizeMismatch { left: a, right: b });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CostVector(Vec<f64>);

impl TryFrom<Vec<f64>> for CostVector {
    type Error = Error;
    fn try_from(c: Vec<f64>) -> Result<Self> {
        Self::new(c)
    }
}

impl From<CostVector> for Vec<f64> {
    fn from(c: CostVector) -> Self {
        c.0
    }
}

impl CostVector {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        if costs.is_empty() || costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("costs must be finite and nonempty"));
        }
        Ok(Self(costs))
    }

    pub fn costs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `H(p, q) = −Σ p_i ln q_i`, skipping `p_i = 0`.
pub fn cross_entropy(p: &DiscreteDist, q: &DiscreteDist) -> Result<f64> {
    same_support(p.len(), q.len())?;
    let mut h = 0.0;
    for (i, (&pi, &qi)) in p.0.iter().zip(&q.0).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::UnsupportedCrossEntropy { index: i, p: pi });
        }
        h -= pi * qi.ln();
    }
    Ok(h)
}

/// `KL(p, q) = H(p, q) − H(p, p)`, summed term by term.
pub fn kl(p: &DiscreteDist, q: &DiscreteDist) -> Result<f64> {
    same_support(p.len(), q.len())?;
    let mut d = 0.0;
    for (i, (&pi, &qi)) in p.0.iter().zip(&q.0).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::UnsupportedCrossEntropy { index: i, p: pi });
        }
        d += pi * (pi.ln() - qi.ln());
    }
    Ok(d)
}

/// `ln Z` for `Z = Σ exp(−c_i)`, shifted by the minimum cost.
pub fn log_partition(c: &CostVector) -> f64 {
    let m = c.0.iter().copied().fold(f64::INFINITY, f64::min);
    -m + c.0.iter().map(|ci| (-(ci - m)).exp()).sum::<f64>().ln()
}

/// `π ∝ exp(−c)`.
pub fn boltzmann(c: &CostVector) -> DiscreteDist {
    let m = c.0.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = c.0.iter().map(|ci| (-(ci - m)).exp()).collect();
    let total: f64 = w.iter().sum();
    DiscreteDist(w.into_iter().map(|v| v / total).collect())
}

pub fn expected_cost(p: &DiscreteDist, c: &CostVector) -> Result<f64> {
    same_support(p.len(), c.len())?;
    Ok(p.0.iter().zip(&c.0).map(|(pi, ci)| pi * ci).sum())
}

/// `|E_p[c] − (−ln Z + H(p, boltzmann(c)))|`.
pub fn cost_identity_residual(p: &DiscreteDist, c: &CostVector) -> Result<f64> {
    let lhs = expected_cost(p, c)?;
    let rhs = -log_partition(c) + cross_entropy(p, &boltzmann(c))?;
    Ok((lhs - rhs).abs())
}

/// How each step's cross-entropy decrement is chosen within
/// `[ε_min δt_k, ε_max δt_k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecrementPolicy {
    #[default]
    Uniform,
    Min,
    Max,
}

/// Distributions `p_{t_0..t_K}` whose cross-entropy to `target` drops by
/// `[ε_min δt_k, ε_max δt_k]` at every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementChain {
    pub dists: Vec<DiscreteDist>,
    pub target: DiscreteDist,
    pub grid: Vec<f64>,
    pub eps_min: f64,
    pub eps_max: f64,
}

/// A step whose measured decrement falls outside its admissible interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionViolation {
    pub step: usize,
    pub decrement: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn uniform_grid(k: usize) -> Vec<f64> {
    (0..=k).map(|i| i as f64 / k as f64).collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid[0] != 0.0 || *grid.last().expect("nonempty") != 1.0 {
        return Err(Error::invalid("grid must start at 0, end at 1 and have at least one step"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("grid must be strictly increasing"));
    }
    Ok(())
}

fn check_eps(eps_min: f64, eps_max: f64) -> Result<()> {
    if !(eps_min > 0.0 && eps_max >= eps_min && eps_max.is_finite()) {
        return Err(Error::invalid(format!(
            "need 0 < eps_min <= eps_max, got [{eps_min}, {eps_max}]"
        )));
    }
    Ok(())
}

impl ImprovementChain {
    /// Assembles a chain without checking the decrement condition; use
    /// [`ImprovementChain::assumption_violations`] to audit it.
    pub fn from_parts(
        dists: Vec<DiscreteDist>,
        target: DiscreteDist,
        grid: Vec<f64>,
        eps_min: f64,
        eps_max: f64,
    ) -> Result<Self> {
        check_grid(&grid)?;
        check_eps(eps_min, eps_max)?;
        if dists.len() != grid.len() {
            return Err(Error::SizeMismatch {
                left: dists.len(),
                right: grid.len(),
            });
        }
        for d in &dists {
            same_support(d.len(), target.len())?;
        }
        Ok(Self {
            dists,
            target,
            grid,
            eps_min,
            eps_max,
        })
    }

    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    /// `δt_k = t_k − t_{k−1}` for `k = 1..=K`.
    pub fn dt(&self, k: usize) -> f64 {
        self.grid[k] - self.grid[k - 1]
    }

    /// `φ(t_k) = H(p_{t_k}, target)` at every grid point.
    pub fn phi(&self) -> Result<Vec<f64>> {
        self.dists.iter().map(|p| cross_entropy(p, &self.target)).collect()
    }

    /// Steps whose recomputed decrement lies outside
    /// `[ε_min δt_k, ε_max δt_k]` by more than the slack tolerance.
    pub fn assumption_violations(&self) -> Result<Vec<AssumptionViolation>> {
        let phi = self.phi()?;
        let mut out = Vec::new();
        for k in 1..phi.len() {
            let dec = phi[k - 1] - phi[k];
            let (lo, hi) = (self.eps_min * self.dt(k), self.eps_max * self.dt(k));
            if dec < lo - SLACK_TOLERANCE || dec > hi + SLACK_TOLERANCE {
                out.push(AssumptionViolation {
                    step: k,
                    decrement: dec,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(out)
    }
}

/// Chain on the uniform grid `t_k = k/K` with decrements drawn uniformly.
pub fn make_chain(
    p0: &DiscreteDist,
    target: &DiscreteDist,
    k: usize,
    eps_min: f64,
    eps_max: f64,
    rng: &mut Rng,
) -> Result<ImprovementChain> {
    if k == 0 {
        return Err(Error::invalid("chain needs at least one step"));
    }
    make_chain_on(p0, target, &uniform_grid(k), eps_min, eps_max, DecrementPolicy::Uniform, rng)
}

/// Builds the chain by mixing `p ← (1 − λ)p + λ·target`. Cross-entropy to
/// the target is affine in `λ`, so the mixing weight that realizes a chosen
/// decrement is solved exactly; each step is then re-measured.
pub fn make_chain_on(
    p0: &DiscreteDist,
    target: &DiscreteDist,
    grid: &[f64],
    eps_min: f64,
    eps_max: f64,
    policy: DecrementPolicy,
    rng: &mut Rng,
) -> Result<ImprovementChain> {
    check_grid(grid)?;
    check_eps(eps_min, eps_max)?;
    same_support(p0.len(), target.len())?;
    let floor = cross_entropy(target, target)?;
    let mut dists = vec![p0.clone()];
    let mut p = p0.clone();
    let mut h = cross_entropy(&p, target)?;
    for k in 1..grid.len() {
        let dt = grid[k] - grid[k - 1];
        let gap = h - floor;
        let (lo, hi) = (eps_min * dt, (eps_max * dt).min(gap));
        if gap < lo {
            return Err(Error::InfeasibleChain {
                step: k,
                gap,
                achievable_steps: achievable_steps(cross_entropy(p0, target)? - floor, grid, eps_min),
            });
        }
        let dec = match policy {
            DecrementPolicy::Uniform => rng.uniform_range(lo, hi),
            DecrementPolicy::Min => lo,
            DecrementPolicy::Max => hi,
        };
        let lambda = if gap > 0.0 { (dec / gap).min(1.0) } else { 0.0 };
        p = p.mix(target, lambda)?;
        let h_new = cross_entropy(&p, target)?;
        if h_new > h + SLACK_TOLERANCE {
            return Err(Error::invalid(format!("cross-entropy rose along the mixing path at step {k}")));
        }
        h = h_new;
        dists.push(p.clone());
    }
    ImprovementChain::from_parts(dists, target.clone(), grid.to_vec(), eps_min, eps_max)
}

/// Steps that can each take the minimum decrement before the gap runs out.
fn achievable_steps(gap: f64, grid: &[f64], eps_min: f64) -> usize {
    let mut used = 0.0;
    let mut steps = 0;
    for w in grid.windows(2) {
        used += eps_min * (w[1] - w[0]);
        if used > gap {
            break;
        }
        steps += 1;
    }
    steps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Holds,
    Violated,
    /// An input chain breaks the decrement assumption, so the bound does
    /// not apply; the inequality outcome is still reported.
    AssumptionViolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`
    pub slack: f64,
    pub holds: bool,
    pub status: CheckStatus,
    pub assumption_violations: Vec<AssumptionViolation>,
}

impl BoundCheck {
    fn new(lhs: f64, rhs: f64, assumption_violations: Vec<AssumptionViolation>) -> Self {
        let slack = rhs - lhs;
        let holds = slack >= -SLACK_TOLERANCE;
        let status = if !assumption_violations.is_empty() {
            CheckStatus::AssumptionViolated
        } else if holds {
            CheckStatus::Holds
        } else {
            CheckStatus::Violated
        };
        Self {
            lhs,
            rhs,
            slack,
            holds,
            status,
            assumption_violations,
        }
    }
}

fn check_compatible(a: &ImprovementChain, b: &ImprovementChain) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::invalid("chains must share a time grid"));
    }
    if a.target != b.target {
        return Err(Error::invalid("chains must share a target"));
    }
    if a.eps_min != b.eps_min || a.eps_max != b.eps_max {
        return Err(Error::invalid("chains must share eps bounds"));
    }
    Ok(())
}

fn both_violations(pi: &ImprovementChain, rho: &ImprovementChain) -> Result<Vec<AssumptionViolation>> {
    let mut v = pi.assumption_violations()?;
    v.extend(rho.assumption_violations()?);
    Ok(v)
}

/// `φ_π(1) − φ_ρ(1) ≤ φ_π(0) − φ_ρ(0) + ε_max − ε_min` with `φ = H(·, target)`.
pub fn check_theorem_discrete(pi: &ImprovementChain, rho: &ImprovementChain) -> Result<BoundCheck> {
    check_compatible(pi, rho)?;
    let (fp, fr) = (pi.phi()?, rho.phi()?);
    let k = fp.len() - 1;
    let lhs = fp[k] - fr[k];
    let rhs = fp[0] - fr[0] + pi.eps_max - pi.eps_min;
    Ok(BoundCheck::new(lhs, rhs, both_violations(pi, rho)?))
}

/// One per-step cost lemma at step `k` of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub step: usize,
    /// `E_{p_{k−1}}[c] − ε_min δt_k − E_{p_k}[c]`
    pub upper_slack: f64,
    /// `E_{p_k}[c] − (E_{p_{k−1}}[c] − ε_max δt_k)`
    pub lower_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCheck {
    pub bound: BoundCheck,
    pub lemmas_pi: Vec<LemmaCheck>,
    pub lemmas_rho: Vec<LemmaCheck>,
}

impl CostCheck {
    /// Smallest slack over the bound and every lemma.
    pub fn min_slack(&self) -> f64 {
        self.lemmas_pi
            .iter()
            .chain(&self.lemmas_rho)
            .flat_map(|l| [l.upper_slack, l.lower_slack])
            .fold(self.bound.slack, f64::min)
    }
}

fn lemmas(chain: &ImprovementChain, c: &CostVector) -> Result<Vec<LemmaCheck>> {
    let e: Vec<f64> = chain.dists.iter().map(|p| expected_cost(p, c)).collect::<Result<_>>()?;
    Ok((1..e.len())
        .map(|k| {
            let dt = chain.dt(k);
            LemmaCheck {
                step: k,
                upper_slack: e[k - 1] - chain.eps_min * dt - e[k],
                lower_slack: e[k] - (e[k - 1] - chain.eps_max * dt),
            }
        })
        .collect())
}

/// Expected-cost bound for a Boltzmann target `∝ exp(−c)`:
/// `E_{π_1}[c] − E_{ρ_1}[c] ≤ E_{π_0}[c] − E_{ρ_0}[c] + ε_max − ε_min`, plus
/// the per-step lemmas of both chains. Expected costs are summed directly,
/// not derived from cross-entropies.
pub fn check_theorem_cost(pi: &ImprovementChain, rho: &ImprovementChain, c: &CostVector) -> Result<CostCheck> {
    check_compatible(pi, rho)?;
    let b = boltzmann(c);
    same_support(b.len(), pi.target.len())?;
    if b.0.iter().zip(&pi.target.0).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(Error::invalid("target is not the Boltzmann distribution of the cost"));
    }
    let e = |p: &DiscreteDist| expected_cost(p, c);
    let k = pi.steps();
    let lhs = e(&pi.dists[k])? - e(&rho.dists[k])?;
    let rhs = e(&pi.dists[0])? - e(&rho.dists[0])? + pi.eps_max - pi.eps_min;
    Ok(CostCheck {
        bound: BoundCheck::new(lhs, rhs, both_violations(pi, rho)?),
        lemmas_pi: lemmas(pi, c)?,
        lemmas_rho: lemmas(rho, c)?,
    })
}

/// The terminal-gap bound on uniform grids of increasing resolution, with
/// π taking minimum and ρ maximum decrements (the extremal pair).
pub fn check_refinement(
    pi0: &DiscreteDist,
    rho0: &DiscreteDist,
    target: &DiscreteDist,
    eps_min: f64,
    eps_max: f64,
    resolutions: &[usize],
    rng: &mut Rng,
) -> Result<Vec<BoundCheck>> {
    resolutions
        .iter()
        .map(|&k| {
            let grid = uniform_grid(k);
            let pi = make_chain_on(pi0, target, &grid, eps_min, eps_max, DecrementPolicy::Min, rng)?;
            let rho = make_chain_on(rho0, target, &grid, eps_min, eps_max, DecrementPolicy::Max, rng)?;
            check_theorem_discrete(&pi, &rho)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzConfig {
    pub instances: usize,
    pub support_max: usize,
    pub steps_max: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzViolation {
    pub instance: usize,
    pub check: String,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub instances: usize,
    pub min_slack: f64,
    pub violations: Vec<FuzzViolation>,
}

fn random_grid(k: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let mut inner: Vec<f64> = (0..k - 1).map(|_| rng.uniform()).collect();
        inner.sort_by(f64::total_cmp);
        let mut g = Vec::with_capacity(k + 1);
        g.push(0.0);
        g.extend(inner);
        g.push(1.0);
        if g.windows(2).all(|w| w[1] > w[0]) {
            return g;
        }
    }
}

/// Random admissible chain pairs checked against both bounds and the
/// per-step lemmas. Every third instance is the extremal pair (π at
/// minimum, ρ at maximum decrements), where the bounds are tight.
pub fn fuzz_theorems(config: &FuzzConfig) -> Result<FuzzReport> {
    if config.support_max < 2 || config.steps_max < 1 {
        return Err(Error::invalid("fuzzing needs support_max >= 2 and steps_max >= 1"));
    }
    let root = Rng::new(config.seed);
    let mut min_slack = f64::INFINITY;
    let mut violations = Vec::new();
    for inst in 0..config.instances {
        let mut rng = root.split(inst as u64);
        let s = 2 + rng.below(config.support_max - 1);
        let k = 1 + rng.below(config.steps_max);
        let c = CostVector::new((0..s).map(|_| rng.uniform_range(0.0, 5.0)).collect())?;
        let target = boltzmann(&c);
        let floor = cross_entropy(&target, &target)?;
        // starts with a cross-entropy gap of at least 1e-3
        let start = |rng: &mut Rng| -> Result<DiscreteDist> {
            loop {
                let p = DiscreteDist::random(s, rng)?;
                if cross_entropy(&p, &target)? - floor > 1e-3 {
                    return Ok(p);
                }
            }
        };
        let (pi0, rho0) = (start(&mut rng)?, start(&mut rng)?);
        let gap = (cross_entropy(&pi0, &target)? - floor).min(cross_entropy(&rho0, &target)? - floor);
        let eps_max = gap * rng.uniform_range(0.05, 1.0);
        let eps_min = eps_max * rng.uniform_range(0.01, 1.0);
        let grid = if inst % 2 == 0 { uniform_grid(k) } else { random_grid(k, &mut rng) };
        let (pp, rp) = match inst % 3 {
            0 => (DecrementPolicy::Min, DecrementPolicy::Max),
            1 => (DecrementPolicy::Uniform, DecrementPolicy::Uniform),
            _ => (DecrementPolicy::Max, DecrementPolicy::Min),
        };
        let pi = make_chain_on(&pi0, &target, &grid, eps_min, eps_max, pp, &mut rng)?;
        let rho = make_chain_on(&rho0, &target, &grid, eps_min, eps_max, rp, &mut rng)?;

        let mut record = |name: &str, slack: f64| {
            min_slack = min_slack.min(slack);
            if slack < -SLACK_TOLERANCE {
                violations.push(FuzzViolation {
                    instance: inst,
                    check: name.to_string(),
                    slack,
                });
            }
        };
        for (name, chain) in [("assumption-pi", &pi), ("assumption-rho", &rho)] {
            for v in chain.assumption_violations()? {
                let slack = (v.decrement - v.lower).min(v.upper - v.decrement);
                record(name, slack);
            }
        }
        record("cross-entropy-bound", check_theorem_discrete(&pi, &rho)?.slack);
        let cost = check_theorem_cost(&pi, &rho, &c)?;
        record("expected-cost-bound", cost.bound.slack);
        for l in cost.lemmas_pi.iter().chain(&cost.lemmas_rho) {
            record("cost-lemma-upper", l.upper_slack);
            record("cost-lemma-lower", l.lower_slack);
        }
    }
    Ok(FuzzReport {
        instances: config.instances,
        min_slack: if min_slack.is_finite() { min_slack } else { 0.0 },
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(p: &[f64]) -> DiscreteDist {
        DiscreteDist::new(p.to_vec()).unwrap()
    }

    #[test]
    fn uniform_cross_entropy_is_ln_support() {
        let u = DiscreteDist::uniform(4).unwrap();
        assert!((cross_entropy(&u, &u).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert_eq!(kl(&u, &u).unwrap(), 0.0);
    }

    #[test]
    fn missing_support_is_an_error() {
        let err = cross_entropy(&d(&[0.5, 0.5]), &d(&[1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::UnsupportedCrossEntropy { index: 1, .. }));
        // zero mass in p where q vanishes is fine
        assert_eq!(cross_entropy(&d(&[1.0, 0.0]), &d(&[1.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn boltzmann_closed_forms() {
        let p = boltzmann(&CostVector::new(vec![0.0, 3f64.ln()]).unwrap());
        assert!((p.probs()[0] - 0.75).abs() < 1e-15 && (p.probs()[1] - 0.25).abs() < 1e-15);
        let flat = boltzmann(&CostVector::new(vec![2.5; 5]).unwrap());
        assert!(flat.probs().iter().all(|v| (v - 0.2).abs() < 1e-15));
        // large costs survive the shift
        let big = boltzmann(&CostVector::new(vec![1e4, 1e4 + 1.0]).unwrap());
        assert!(big.probs().iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn degenerate_interval_gives_exact_decrements() {
        let target = d(&[0.1, 0.2, 0.7]);
        let p0 = d(&[0.8, 0.15, 0.05]);
        let chain = make_chain(&p0, &target, 5, 0.1, 0.1, &mut Rng::new(0)).unwrap();
        let phi = chain.phi().unwrap();
        for k in 1..phi.len() {
            assert!((phi[k - 1] - phi[k] - 0.1 * 0.2).abs() < 1e-9);
        }
    }

    #[test]
    fn single_step_decrement_lies_in_range() {
        let target = d(&[0.25, 0.25, 0.5]);
        let p0 = d(&[0.9, 0.05, 0.05]);
        let chain = make_chain(&p0, &target, 1, 0.2, 0.4, &mut Rng::new(3)).unwrap();
        let phi = chain.phi().unwrap();
        let dec = phi[0] - phi[1];
        assert!((0.2 - 1e-12..=0.4 + 1e-12).contains(&dec));
    }

    #[test]
    fn infeasible_chain_reports_achievable_steps() {
        let target = d(&[0.2, 0.8]);
        let p0 = d(&[0.8, 0.2]);
        let gap = cross_entropy(&p0, &target).unwrap() - cross_entropy(&target, &target).unwrap();
        match make_chain(&p0, &target, 10, gap * 3.0, gap * 4.0, &mut Rng::new(0)) {
            Err(Error::InfeasibleChain { achievable_steps, .. }) => assert_eq!(achievable_steps, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identical_chains_have_full_slack() {
        let c = CostVector::new(vec![0.3, 1.0, 2.0]).unwrap();
        let target = boltzmann(&c);
        let chain = make_chain(&d(&[0.05, 0.05, 0.9]), &target, 4, 0.05, 0.2, &mut Rng::new(1)).unwrap();
        let t2 = check_theorem_discrete(&chain, &chain).unwrap();
        assert_eq!(t2.lhs, 0.0);
        assert!((t2.slack - 0.15).abs() < 1e-15);
        let t3 = check_theorem_cost(&chain, &chain, &c).unwrap();
        assert!((t3.bound.slack - 0.15).abs() < 1e-12);
    }

    #[test]
    fn oversized_step_is_flagged_as_assumption_violation() {
        let c = CostVector::new(vec![0.0, 2.0]).unwrap();
        let target = boltzmann(&c);
        let far = d(&[0.01, 0.99]);
        let rho = ImprovementChain::from_parts(vec![far.clone(), target.clone()], target.clone(), vec![0.0, 1.0], 0.01, 0.02).unwrap();
        let pi = ImprovementChain::from_parts(vec![far.clone(), far], target, vec![0.0, 1.0], 0.01, 0.02).unwrap();
        let check = check_theorem_discrete(&pi, &rho).unwrap();
        assert!(!check.holds);
        assert_eq!(check.status, CheckStatus::AssumptionViolated);
        assert_eq!(check.assumption_violations.len(), 2);
    }
}
