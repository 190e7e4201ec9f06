//! Variable-length evolutionary design of rule sets.
//!
//! An [`Individual`] is a list of evolvable rules. Apriori rules live in the
//! [`SearchSpace`] and are prepended when an individual is assembled into an
//! [`RfvSystem`], so they can never be touched by the operators.
//!
//! All random decisions come from one `ChaCha8Rng` stream seeded from
//! [`GaConfig::seed`]. Per generation the draw order is: for each offspring
//! pair, two tournaments, the crossover coin, the hyperplane (normal, then
//! offset point) when crossing, then mutation of the first child and of the
//! second child. Fitness evaluation draws nothing, so running it on any
//! number of threads cannot change a run.

use rand::seq::index;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Domain, TriangulationConfig};
use crate::system::{Dimensions, FuzzyRule, RfvSystem, SystemError};

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("invalid GA configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid apriori rule {index}: {reason}")]
    InvalidApriori { index: usize, reason: String },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub p_structural: f64,
    pub tournament_size: usize,
    pub elite_count: usize,
    /// Site mutation step, as a fraction of the domain width.
    pub sigma_site: f64,
    pub sigma_coeff: f64,
    pub min_rules: usize,
    pub max_rules: usize,
    pub init_rule_range: (usize, usize),
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 50,
            generations: 200,
            p_crossover: 0.8,
            p_mutation: 0.3,
            p_structural: 0.1,
            tournament_size: 2,
            elite_count: 1,
            sigma_site: 0.05,
            sigma_coeff: 0.2,
            min_rules: 1,
            max_rules: 20,
            init_rule_range: (2, 8),
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let bad = |msg: String| Err(EvolutionError::InvalidConfig(msg));
        for (name, p) in [
            ("p_crossover", self.p_crossover),
            ("p_mutation", self.p_mutation),
            ("p_structural", self.p_structural),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.population_size < 2 {
            return bad("population_size must be at least 2".into());
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return bad(format!(
                "tournament_size {} outside 1..={}",
                self.tournament_size, self.population_size
            ));
        }
        if self.elite_count >= self.population_size {
            return bad("elite_count must leave room for offspring".into());
        }
        if !(self.sigma_site >= 0.0 && self.sigma_coeff >= 0.0)
            || !self.sigma_site.is_finite()
            || !self.sigma_coeff.is_finite()
        {
            return bad("mutation steps must be finite and non-negative".into());
        }
        if self.min_rules == 0 || self.min_rules > self.max_rules {
            return bad(format!(
                "rule bounds {}..={} are invalid",
                self.min_rules, self.max_rules
            ));
        }
        let (lo, hi) = self.init_rule_range;
        if lo > hi || lo < self.min_rules || hi > self.max_rules {
            return bad(format!(
                "init_rule_range ({lo}, {hi}) must lie within {}..={}",
                self.min_rules, self.max_rules
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub rules: Vec<FuzzyRule>,
    pub fitness: Option<f64>,
    pub id: u64,
}

impl Individual {
    /// Fitness used for ranking; unevaluated and NaN rank last.
    pub fn score(&self) -> f64 {
        match self.fitness {
            Some(f) if !f.is_nan() => f,
            _ => f64::NEG_INFINITY,
        }
    }

    /// True when `self` ranks strictly ahead of `other`.
    fn beats(&self, other: &Individual) -> bool {
        let (a, b) = (self.score(), other.score());
        a > b || (a == b && self.id < other.id)
    }
}

/// Frozen rules shared by every individual.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AprioriSet {
    pub rules: Vec<FuzzyRule>,
}

impl AprioriSet {
    pub fn new(
        rules: Vec<FuzzyRule>,
        dims: &Dimensions,
        domain: &Domain,
    ) -> Result<Self, EvolutionError> {
        let mut rules = rules;
        for (index, rule) in rules.iter_mut().enumerate() {
            rule.frozen = true;
            rule.validate(dims, domain)
                .map_err(|reason| EvolutionError::InvalidApriori { index, reason })?;
        }
        for i in 0..rules.len() {
            for j in 0..i {
                if domain.too_close(&rules[i].site, &rules[j].site) {
                    return Err(EvolutionError::InvalidApriori {
                        index: i,
                        reason: format!("site coincides with rule {j}"),
                    });
                }
            }
        }
        Ok(AprioriSet { rules })
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Everything the operators need to know about the problem.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    pub dims: Dimensions,
    pub domain: Domain,
    pub geometry: TriangulationConfig,
    pub apriori: AprioriSet,
}

impl SearchSpace {
    pub fn new(dims: Dimensions, apriori: AprioriSet) -> Self {
        SearchSpace {
            domain: dims.unit_domain(),
            dims,
            geometry: TriangulationConfig::default(),
            apriori,
        }
    }

    /// Apriori rules first, then the individual's rules, in order.
    pub fn assemble(&self, ind: &Individual) -> Result<RfvSystem, SystemError> {
        let rules = self
            .apriori
            .rules
            .iter()
            .chain(&ind.rules)
            .cloned()
            .collect();
        RfvSystem::with_domain(self.dims, self.domain.clone(), self.geometry, rules)
    }

    fn random_site<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.domain
            .lower
            .iter()
            .zip(&self.domain.upper)
            .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    }

    fn random_rule<R: Rng + ?Sized>(&self, rng: &mut R) -> FuzzyRule {
        let site = self.random_site(rng);
        let coefficients = (0..self.dims.coefficient_count())
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        FuzzyRule::new(site, coefficients, false)
    }

    fn crowded(&self, site: &[f64], others: &[FuzzyRule]) -> bool {
        self.apriori
            .rules
            .iter()
            .chain(others)
            .any(|r| self.domain.too_close(site, &r.site))
    }
}

/// Source of lineage ids.
#[derive(Debug, Clone, Default)]
pub struct IdSource(u64);

impl IdSource {
    pub fn next_id(&mut self) -> u64 {
        self.0 += 1;
        self.0 - 1
    }
}

pub fn init_population<R: Rng + ?Sized>(
    cfg: &GaConfig,
    space: &SearchSpace,
    rng: &mut R,
    ids: &mut IdSource,
) -> Vec<Individual> {
    let (lo, hi) = cfg.init_rule_range;
    (0..cfg.population_size)
        .map(|_| {
            let n = rng.random_range(lo..=hi);
            let mut rules: Vec<FuzzyRule> = Vec::with_capacity(n);
            for _ in 0..n {
                let mut rule = space.random_rule(rng);
                while space.crowded(&rule.site, &rules) {
                    rule.site = space.random_site(rng);
                }
                rules.push(rule);
            }
            Individual {
                rules,
                fitness: None,
                id: ids.next_id(),
            }
        })
        .collect()
}

/// Splitting hyperplane `n . (P - q) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub normal: Vec<f64>,
    pub point: Vec<f64>,
}

impl Hyperplane {
    pub fn random<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> Self {
        let d = space.dims.rule_inputs();
        let normal = loop {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm).collect();
            }
        };
        Hyperplane {
            normal,
            point: space.random_site(rng),
        }
    }

    pub fn positive_side(&self, p: &[f64]) -> bool {
        self.normal
            .iter()
            .zip(p.iter().zip(&self.point))
            .map(|(n, (x, q))| n * (x - q))
            .sum::<f64>()
            >= 0.0
    }
}

/// Geometric crossover with a random hyperplane.
pub fn crossover<R: Rng + ?Sized>(
    p1: &Individual,
    p2: &Individual,
    space: &SearchSpace,
    rng: &mut R,
    ids: &mut IdSource,
) -> (Individual, Individual) {
    let plane = Hyperplane::random(space, rng);
    crossover_with(p1, p2, &plane, rng, ids)
}

/// Crossover against a given hyperplane. Child 1 takes `p1`'s rules on the
/// positive side and `p2`'s on the negative side; child 2 the rest. A child
/// left empty receives a copy of one random rule of `p1`.
pub fn crossover_with<R: Rng + ?Sized>(
    p1: &Individual,
    p2: &Individual,
    plane: &Hyperplane,
    rng: &mut R,
    ids: &mut IdSource,
) -> (Individual, Individual) {
    let mut c1 = Vec::new();
    let mut c2 = Vec::new();
    for rule in &p1.rules {
        if plane.positive_side(&rule.site) {
            c1.push(rule.clone());
        } else {
            c2.push(rule.clone());
        }
    }
    for rule in &p2.rules {
        if plane.positive_side(&rule.site) {
            c2.push(rule.clone());
        } else {
            c1.push(rule.clone());
        }
    }
    for child in [&mut c1, &mut c2] {
        if child.is_empty() {
            let k = rng.random_range(0..p1.rules.len());
            child.push(p1.rules[k].clone());
        }
    }
    let make = |rules, ids: &mut IdSource| Individual {
        rules,
        fitness: None,
        id: ids.next_id(),
    };
    let first = make(c1, ids);
    let second = make(c2, ids);
    (first, second)
}

/// Gaussian and structural mutation, followed by enforcement of the rule
/// count bounds and site spacing. The fitness is cleared if anything changed.
pub fn mutate<R: Rng + ?Sized>(
    ind: &mut Individual,
    cfg: &GaConfig,
    space: &SearchSpace,
    rng: &mut R,
) {
    let mut changed = false;
    if rng.random::<f64>() < cfg.p_mutation {
        let step = cfg.sigma_site * space.domain.width();
        for rule in &mut ind.rules {
            for (j, x) in rule.site.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *x = (*x + step * z).clamp(space.domain.lower[j], space.domain.upper[j]);
            }
            for a in &mut rule.coefficients {
                let z: f64 = rng.sample(StandardNormal);
                *a += cfg.sigma_coeff * z;
            }
        }
        changed = true;
    }
    if rng.random::<f64>() < cfg.p_structural {
        if rng.random_bool(0.5) {
            if ind.rules.len() < cfg.max_rules {
                ind.rules.push(space.random_rule(rng));
                changed = true;
            }
        } else if ind.rules.len() > cfg.min_rules {
            let k = rng.random_range(0..ind.rules.len());
            ind.rules.remove(k);
            changed = true;
        }
    }
    changed |= enforce_bounds(ind, cfg, space, rng);
    if changed {
        ind.fitness = None;
    }
}

/// Trims or pads the rule list into `min_rules..=max_rules` and re-samples
/// sites that crowd an earlier or apriori site. Returns whether anything
/// was modified.
pub fn enforce_bounds<R: Rng + ?Sized>(
    ind: &mut Individual,
    cfg: &GaConfig,
    space: &SearchSpace,
    rng: &mut R,
) -> bool {
    let mut changed = false;
    while ind.rules.len() > cfg.max_rules {
        let k = rng.random_range(0..ind.rules.len());
        ind.rules.remove(k);
        changed = true;
    }
    while ind.rules.len() < cfg.min_rules {
        ind.rules.push(space.random_rule(rng));
        changed = true;
    }
    for i in 0..ind.rules.len() {
        while space.crowded(&ind.rules[i].site, &ind.rules[..i]) {
            ind.rules[i].site = space.random_site(rng);
            changed = true;
        }
    }
    changed
}

/// Best of `k` distinct, uniformly drawn entrants; ties go to the lower id.
pub fn select_tournament<'a, R: Rng + ?Sized>(
    pop: &'a [Individual],
    k: usize,
    rng: &mut R,
) -> &'a Individual {
    let k = k.clamp(1, pop.len());
    let mut best: Option<&Individual> = None;
    for i in index::sample(rng, pop.len(), k) {
        let cand = &pop[i];
        if best.is_none_or(|b| cand.beats(b)) {
            best = Some(cand);
        }
    }
    best.expect("non-empty population")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_rule_count: usize,
    pub mean_rule_count: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub best: Individual,
    pub stats: Vec<GenerationStats>,
}

/// Index of the best individual.
pub fn best_index(pop: &[Individual]) -> usize {
    let mut best = 0;
    for i in 1..pop.len() {
        if pop[i].beats(&pop[best]) {
            best = i;
        }
    }
    best
}

fn evaluate<F>(pop: &mut [Individual], fitness: &F) -> usize
where
    F: Fn(&Individual) -> f64 + Sync,
{
    let pending: Vec<usize> = (0..pop.len())
        .filter(|&i| pop[i].fitness.is_none())
        .collect();
    let scores: Vec<f64> = pending.par_iter().map(|&i| fitness(&pop[i])).collect();
    for (&i, s) in pending.iter().zip(scores) {
        pop[i].fitness = Some(s);
    }
    pending.len()
}

fn summarize(generation: usize, pop: &[Individual], evaluations: usize) -> GenerationStats {
    let best = &pop[best_index(pop)];
    let n = pop.len() as f64;
    GenerationStats {
        generation,
        best_fitness: best.score(),
        mean_fitness: pop.iter().map(Individual::score).sum::<f64>() / n,
        best_rule_count: best.rules.len(),
        mean_rule_count: pop.iter().map(|i| i.rules.len() as f64).sum::<f64>() / n,
        evaluations,
    }
}

/// Generational GA maximizing `fitness`. Stats are recorded for generation 0
/// (the initial population) through `cfg.generations`; `observe` sees each
/// evaluated population. `jobs = 0` uses all cores.
pub fn run_ga<F, O>(
    cfg: &GaConfig,
    space: &SearchSpace,
    fitness: F,
    jobs: usize,
    mut observe: O,
) -> Result<GaOutcome, EvolutionError>
where
    F: Fn(&Individual) -> f64 + Sync,
    O: FnMut(&GenerationStats, &[Individual]),
{
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| EvolutionError::ThreadPool(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ids = IdSource::default();

    let mut pop = init_population(cfg, space, &mut rng, &mut ids);
    let mut evaluations = pool.install(|| evaluate(&mut pop, &fitness));
    let mut stats = vec![summarize(0, &pop, evaluations)];
    observe(&stats[0], &pop);
    let mut best = pop[best_index(&pop)].clone();

    for generation in 1..=cfg.generations {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| {
            if pop[a].beats(&pop[b]) {
                std::cmp::Ordering::Less
            } else if pop[b].beats(&pop[a]) {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        });
        let mut next: Vec<Individual> = order[..cfg.elite_count]
            .iter()
            .map(|&i| pop[i].clone())
            .collect();

        while next.len() < cfg.population_size {
            let a = select_tournament(&pop, cfg.tournament_size, &mut rng);
            let b = select_tournament(&pop, cfg.tournament_size, &mut rng);
            let (mut c1, mut c2) = if rng.random::<f64>() < cfg.p_crossover {
                crossover(a, b, space, &mut rng, &mut ids)
            } else {
                let copy = |p: &Individual, ids: &mut IdSource| Individual {
                    id: ids.next_id(),
                    ..p.clone()
                };
                (copy(a, &mut ids), copy(b, &mut ids))
            };
            mutate(&mut c1, cfg, space, &mut rng);
            mutate(&mut c2, cfg, space, &mut rng);
            next.push(c1);
            if next.len() < cfg.population_size {
                next.push(c2);
            }
        }

        pop = next;
        let fresh = pool.install(|| evaluate(&mut pop, &fitness));
        evaluations += fresh;
        let s = summarize(generation, &pop, evaluations);
        observe(&s, &pop);
        stats.push(s);
        let gen_best = &pop[best_index(&pop)];
        if gen_best.score() > best.score() {
            best = gen_best.clone();
        }
    }
    Ok(GaOutcome { best, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(l: usize, r: usize, m: usize) -> SearchSpace {
        SearchSpace::new(Dimensions::new(l, r, m).unwrap(), AprioriSet::default())
    }

    #[test]
    fn default_config_is_valid() {
        GaConfig::default().validate().unwrap();
        let bad = GaConfig {
            p_mutation: 1.5,
            ..GaConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GaConfig {
            init_rule_range: (0, 3),
            ..GaConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_reads_partial_json() {
        let cfg: GaConfig = serde_json::from_str(r#"{"generations": 7, "seed": 3}"#).unwrap();
        assert_eq!(cfg.generations, 7);
        assert_eq!(cfg.population_size, 50);
        assert!(serde_json::from_str::<GaConfig>(r#"{"generatons": 7}"#).is_err());
    }

    #[test]
    fn hyperplane_normal_is_unit() {
        let sp = space(3, 1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let h = Hyperplane::random(&sp, &mut rng);
            let n: f64 = h.normal.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-12);
            assert!(sp.domain.contains(&h.point));
        }
    }

    #[test]
    fn zero_sigma_mutation_keeps_values() {
        let sp = space(2, 1, 1);
        let cfg = GaConfig {
            p_mutation: 1.0,
            p_structural: 0.0,
            sigma_site: 0.0,
            sigma_coeff: 0.0,
            ..GaConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut ids = IdSource::default();
        let pop = init_population(&cfg, &sp, &mut rng, &mut ids);
        let mut ind = pop[0].clone();
        mutate(&mut ind, &cfg, &sp, &mut rng);
        assert_eq!(ind.rules, pop[0].rules);
    }

    #[test]
    fn crowded_sites_are_resampled() {
        let sp = space(1, 0, 1);
        let cfg = GaConfig::default();
        let rule = FuzzyRule::constant(vec![0.5], &[1.0], false);
        let mut ind = Individual {
            rules: vec![rule.clone(), rule],
            fitness: Some(1.0),
            id: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(enforce_bounds(&mut ind, &cfg, &sp, &mut rng));
        assert!(!sp.domain.too_close(&ind.rules[0].site, &ind.rules[1].site));
        assert!(sp.assemble(&ind).is_ok());
    }

    #[test]
    fn tournament_ties_prefer_lower_id() {
        let pop: Vec<Individual> = (0..4)
            .map(|i| Individual {
                rules: vec![],
                fitness: Some(1.0),
                id: 10 - i,
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(select_tournament(&pop, 4, &mut rng).id, 7);
    }
}
