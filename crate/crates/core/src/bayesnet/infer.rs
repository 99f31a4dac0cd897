//! Exact inference: variable elimination over the layered network, plus
//! a brute-force joint-enumeration reference for cross-checking.

use super::{BayesError, BayesNet, Cpt, Node};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

/// Default confidence floor for the novel-type fallback: a top score
/// below this flags the diagnosis as a probable unseen fault type, and
/// the module-level answer should be trusted instead. Evidence that
/// matches no trained pattern lands near the smoothed prior (≈ 0.5 times
/// a sub-1 module posterior), while trained fault signatures score well
/// above 0.6 on the benchmark, so 0.6 separates the two regimes.
pub const DEFAULT_CONFIDENCE_FLOOR: f64 = 0.6;

/// Enumeration is exponential in the number of unobserved nodes; refuse
/// anything larger than this (the oracle is for testing, not production).
const MAX_ENUMERATION_HIDDEN: usize = 20;

/// One ranked candidate: a fault type, its owning module, and the
/// decomposed score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeScore {
    pub type_id: String,
    pub module_id: String,
    /// P(type = 1 | module = 1, evidence) · P(module = 1 | evidence).
    pub score: f64,
    pub type_probability: f64,
    pub module_probability: f64,
}

/// The result of diagnosing one window of evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    /// All known fault types, best first (score descending, ties by id).
    pub ranked: Vec<TypeScore>,
    /// The module with the highest posterior given the evidence.
    pub best_module: String,
    pub best_module_probability: f64,
    /// Set when the best type score falls below the confidence floor:
    /// the evidence probably belongs to a fault type absent from
    /// training, and `best_module` is the answer to act on.
    pub novel_type: bool,
    /// Set when the evidence has probability zero under the model
    /// (unreachable with smoothed tables; defensive) and the ranking is
    /// an uninformative uniform placeholder.
    pub degenerate: bool,
}

/// A nonnegative function over a set of binary variables. `vars` is
/// sorted; bit i of a table index is the state of `vars[i]`.
#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<Node>,
    table: Vec<f64>,
}

impl Factor {
    /// Builds the factor for one CPT with observed nodes clamped. Only
    /// unobserved variables remain; fully observed CPTs reduce to
    /// scalars (a single-entry table with no variables).
    fn from_cpt(cpt: &Cpt, evidence: &BTreeMap<Node, u8>) -> Self {
        let mut vars: Vec<Node> = cpt
            .parents
            .iter()
            .filter(|p| !evidence.contains_key(p))
            .cloned()
            .collect();
        if !evidence.contains_key(&cpt.node) {
            vars.push(cpt.node.clone());
        }
        vars.sort();
        vars.dedup();
        let mut table = vec![0.0; 1usize << vars.len()];
        for (idx, cell) in table.iter_mut().enumerate() {
            let state_of = |node: &Node| -> u8 {
                evidence.get(node).copied().unwrap_or_else(|| {
                    let pos = vars.binary_search(node).expect("free variable");
                    ((idx >> pos) & 1) as u8
                })
            };
            let config = cpt
                .parents
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, p)| acc | (u64::from(state_of(p)) << i));
            *cell = cpt.probability(state_of(&cpt.node), config);
        }
        Factor { vars, table }
    }

    fn multiply(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        vars.extend(other.vars.iter().cloned());
        vars.sort();
        vars.dedup();
        let mut table = vec![0.0; 1usize << vars.len()];
        for (idx, cell) in table.iter_mut().enumerate() {
            let sub_index = |f: &Factor| -> usize {
                f.vars.iter().enumerate().fold(0usize, |acc, (i, v)| {
                    let pos = vars.binary_search(v).expect("var of union");
                    acc | (((idx >> pos) & 1) << i)
                })
            };
            *cell = self.table[sub_index(self)] * other.table[sub_index(other)];
        }
        Factor { vars, table }
    }

    fn sum_out(&self, var: &Node) -> Factor {
        let pos = match self.vars.binary_search(var) {
            Ok(p) => p,
            Err(_) => return self.clone(),
        };
        let mut vars = self.vars.clone();
        vars.remove(pos);
        let mut table = vec![0.0; 1usize << vars.len()];
        for (idx, &value) in self.table.iter().enumerate() {
            let low = idx & ((1usize << pos) - 1);
            let high = (idx >> (pos + 1)) << pos;
            table[low | high] += value;
        }
        Factor { vars, table }
    }
}

impl BayesNet {
    fn check_known(&self, node: &Node) -> Result<(), BayesError> {
        if self.structure.nodes.contains(node) {
            Ok(())
        } else {
            Err(BayesError::UnknownNode {
                node: node.to_string(),
            })
        }
    }

    /// P(query = 1 | evidence) by variable elimination. Evidence maps
    /// nodes to observed states; the query must be unobserved.
    pub fn probability_given(
        &self,
        evidence: &BTreeMap<Node, u8>,
        query: &Node,
    ) -> Result<f64, BayesError> {
        self.check_known(query)?;
        for node in evidence.keys() {
            self.check_known(node)?;
        }
        if evidence.contains_key(query) {
            return Err(BayesError::QueryObserved {
                node: query.to_string(),
            });
        }
        // Observed-only CPTs reduce to scalar factors, which only scale
        // the normalizer; drop them up front.
        let mut factors: Vec<Factor> = self
            .cpts
            .iter()
            .map(|c| Factor::from_cpt(c, evidence))
            .filter(|f| !f.vars.is_empty())
            .collect();
        let mut hidden: BTreeSet<Node> = factors
            .iter()
            .flat_map(|f| f.vars.iter().cloned())
            .collect();
        hidden.remove(query);
        // Eliminate deepest layer first (types, then modules, then any
        // unobserved metrics): leaf factors collapse cheaply.
        let order: Vec<Node> = hidden.into_iter().rev().collect();
        for var in order {
            let (touching, rest): (Vec<Factor>, Vec<Factor>) = factors
                .into_iter()
                .partition(|f| f.vars.binary_search(&var).is_ok());
            factors = rest;
            if let Some(product) = touching.into_iter().reduce(|a, b| a.multiply(&b)) {
                let reduced = product.sum_out(&var);
                if !reduced.vars.is_empty() {
                    factors.push(reduced);
                }
            }
        }
        let marginal = factors
            .into_iter()
            .reduce(|a, b| a.multiply(&b))
            .expect("the query's own factor survives elimination");
        debug_assert_eq!(marginal.vars, vec![query.clone()]);
        let (p0, p1) = (marginal.table[0], marginal.table[1]);
        let z = p0 + p1;
        if !(z.is_finite() && z > 0.0) {
            return Err(BayesError::DegenerateEvidence);
        }
        Ok(p1 / z)
    }

    /// P(query = 1 | evidence) by summing the full joint — a slow
    /// reference used to cross-check variable elimination in tests.
    pub fn probability_by_enumeration(
        &self,
        evidence: &BTreeMap<Node, u8>,
        query: &Node,
    ) -> Result<f64, BayesError> {
        self.check_known(query)?;
        for node in evidence.keys() {
            self.check_known(node)?;
        }
        if evidence.contains_key(query) {
            return Err(BayesError::QueryObserved {
                node: query.to_string(),
            });
        }
        let hidden: Vec<&Node> = self
            .structure
            .nodes
            .iter()
            .filter(|n| !evidence.contains_key(n))
            .collect();
        if hidden.len() > MAX_ENUMERATION_HIDDEN {
            return Err(BayesError::EnumerationTooLarge {
                hidden: hidden.len(),
            });
        }
        let query_pos = hidden
            .iter()
            .position(|n| *n == query)
            .expect("unobserved query is hidden");
        let mut numerator = 0.0f64;
        let mut normalizer = 0.0f64;
        for assignment in 0u64..(1u64 << hidden.len()) {
            let state_of = |node: &Node| -> u8 {
                evidence.get(node).copied().unwrap_or_else(|| {
                    let pos = hidden
                        .iter()
                        .position(|n| *n == node)
                        .expect("unobserved node is hidden");
                    ((assignment >> pos) & 1) as u8
                })
            };
            let mut joint = 1.0f64;
            for cpt in &self.cpts {
                let config = cpt
                    .parents
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (i, p)| acc | (u64::from(state_of(p)) << i));
                joint *= cpt.probability(state_of(&cpt.node), config);
            }
            normalizer += joint;
            if (assignment >> query_pos) & 1 == 1 {
                numerator += joint;
            }
        }
        if !(normalizer.is_finite() && normalizer > 0.0) {
            return Err(BayesError::DegenerateEvidence);
        }
        Ok(numerator / normalizer)
    }

    /// Turns an observed feature bit map into full metric-layer evidence.
    /// Keys must name metric nodes; metrics absent from the map are
    /// observed as 0 (writers only emit set bits).
    fn metric_evidence(
        &self,
        observed: &BTreeMap<String, u8>,
    ) -> Result<BTreeMap<Node, u8>, BayesError> {
        for key in observed.keys() {
            if !self.structure.nodes.contains(&Node::Metric(key.clone())) {
                return Err(BayesError::UnknownEvidence {
                    feature_id: key.clone(),
                });
            }
        }
        Ok(self
            .structure
            .metric_nodes()
            .map(|node| {
                let bit = observed
                    .get(node.name())
                    .map(|&v| u8::from(v != 0))
                    .unwrap_or(0);
                (node.clone(), bit)
            })
            .collect())
    }

    /// Diagnoses one window of evidence: ranks every known fault type by
    /// P(type = 1 | module = 1, evidence) · P(module = 1 | evidence) and
    /// reports the most probable module.
    pub fn infer(&self, observed: &BTreeMap<String, u8>) -> Result<Diagnosis, BayesError> {
        let evidence = self.metric_evidence(observed)?;
        if self.structure.type_nodes().next().is_none() {
            return Err(BayesError::NoTypes);
        }

        let mut module_probability: BTreeMap<String, f64> = BTreeMap::new();
        for node in self.structure.module_nodes() {
            match self.probability_given(&evidence, node) {
                Ok(p) => {
                    module_probability.insert(node.name().to_string(), p);
                }
                Err(BayesError::DegenerateEvidence) => return Ok(self.uniform_diagnosis()),
                Err(e) => return Err(e),
            }
        }

        let mut ranked = Vec::new();
        for node in self.structure.type_nodes() {
            let type_id = node.name().to_string();
            let module_id = self
                .structure
                .type_owner
                .get(&type_id)
                .cloned()
                .ok_or_else(|| BayesError::UnknownNode {
                    node: node.to_string(),
                })?;
            let mut with_module = evidence.clone();
            with_module.insert(Node::Module(module_id.clone()), 1);
            let type_probability = match self.probability_given(&with_module, node) {
                Ok(p) => p,
                Err(BayesError::DegenerateEvidence) => return Ok(self.uniform_diagnosis()),
                Err(e) => return Err(e),
            };
            let module_probability = *module_probability
                .get(&module_id)
                .expect("type owner is a module node");
            ranked.push(TypeScore {
                type_id,
                module_id,
                score: type_probability * module_probability,
                type_probability,
                module_probability,
            });
        }
        ranked.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.type_id.cmp(&b.type_id))
        });

        // Ascending iteration + strict greater-than keeps the
        // lexicographically smallest module on ties.
        let (best_module, best_module_probability) = module_probability.iter().fold(
            (String::new(), f64::NEG_INFINITY),
            |(bm, bp), (m, &p)| {
                if p > bp {
                    (m.clone(), p)
                } else {
                    (bm, bp)
                }
            },
        );

        Ok(Diagnosis {
            ranked,
            best_module,
            best_module_probability,
            novel_type: false,
            degenerate: false,
        })
    }

    /// [`BayesNet::infer`] plus the novel-type fallback: when the best
    /// type score is below `confidence_floor`, the diagnosis is flagged
    /// and `best_module` is the primary answer. A floor of 0 disables
    /// the fallback entirely.
    pub fn infer_module_fallback(
        &self,
        observed: &BTreeMap<String, u8>,
        confidence_floor: f64,
    ) -> Result<Diagnosis, BayesError> {
        let mut diagnosis = self.infer(observed)?;
        if let Some(top) = diagnosis.ranked.first() {
            if top.score < confidence_floor {
                diagnosis.novel_type = true;
            }
        }
        Ok(diagnosis)
    }

    /// Uninformative placeholder used when evidence has zero probability.
    fn uniform_diagnosis(&self) -> Diagnosis {
        let modules: Vec<&str> = self.structure.module_nodes().map(Node::name).collect();
        let module_probability = 1.0 / modules.len().max(1) as f64;
        let ranked: Vec<TypeScore> = self
            .structure
            .type_nodes()
            .map(|node| {
                let type_id = node.name().to_string();
                let module_id = self
                    .structure
                    .type_owner
                    .get(&type_id)
                    .cloned()
                    .unwrap_or_default();
                TypeScore {
                    type_id,
                    module_id,
                    score: 0.5 * module_probability,
                    type_probability: 0.5,
                    module_probability,
                }
            })
            .collect();
        Diagnosis {
            ranked,
            best_module: modules.first().map(|s| s.to_string()).unwrap_or_default(),
            best_module_probability: module_probability,
            novel_type: false,
            degenerate: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{allocate, fit_cpts, NetworkStructure};
    use super::*;
    use crate::data::{Label, PlatformTopology, Polarity, Sample};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn metric(name: &str) -> Node {
        Node::Metric(name.to_string())
    }

    /// X → M → T with hand-set tables (picked so the smoothed
    /// probabilities are the round numbers in the comments).
    fn chain_net() -> BayesNet {
        let x = metric("x");
        let m = Node::Module("m".to_string());
        let t = Node::Type("t".to_string());
        let structure = NetworkStructure {
            nodes: BTreeSet::from([x.clone(), m.clone(), t.clone()]),
            edges: BTreeSet::from([(x.clone(), m.clone()), (m.clone(), t.clone())]),
            type_owner: BTreeMap::from([("t".to_string(), "m".to_string())]),
        };
        let cpts = vec![
            Cpt {
                // P(x=1) = (6+1)/(8+2) = 0.7
                node: x,
                parents: vec![],
                counts: vec![(0, (2, 6))],
            },
            Cpt {
                // P(m=1|x=1) = 0.7, P(m=1|x=0) = (1+1)/(8+2) = 0.2
                node: m.clone(),
                parents: vec![metric("x")],
                counts: vec![(0, (7, 1)), (1, (2, 6))],
            },
            Cpt {
                // P(t=1|m=1) = (4+1)/(8+2) = 0.5, P(t=1|m=0) = 0.1
                node: t,
                parents: vec![m],
                counts: vec![(0, (8, 0)), (1, (4, 4))],
            },
        ];
        BayesNet {
            structure,
            cpts,
            feature_ids: vec!["x".to_string()],
            training_fingerprint: 0,
        }
    }

    #[test]
    fn chain_posterior_matches_hand_computation_and_enumeration() {
        let net = chain_net();
        let evidence = BTreeMap::from([(metric("x"), 1u8)]);
        let t = Node::Type("t".to_string());
        let m = Node::Module("m".to_string());

        // P(t=1|x=1) = P(m=1|x=1)·0.5 + P(m=0|x=1)·0.1 = 0.7·0.5 + 0.3·0.1
        let expected = 0.7 * 0.5 + 0.3 * 0.1;
        let by_ve = net.probability_given(&evidence, &t).unwrap();
        let by_enum = net.probability_by_enumeration(&evidence, &t).unwrap();
        assert!((by_ve - expected).abs() < 1e-12, "ve {by_ve}");
        assert!((by_enum - expected).abs() < 1e-12, "enum {by_enum}");

        let m_post = net.probability_given(&evidence, &m).unwrap();
        assert!((m_post - 0.7).abs() < 1e-12);

        // And with no evidence at all: P(t=1) marginal.
        let empty = BTreeMap::new();
        let p_m = 0.7 * 0.7 + 0.3 * 0.2; // P(m=1)
        let expected_t = p_m * 0.5 + (1.0 - p_m) * 0.1;
        let marginal = net.probability_given(&empty, &t).unwrap();
        assert!((marginal - expected_t).abs() < 1e-12);
        let marginal_enum = net.probability_by_enumeration(&empty, &t).unwrap();
        assert!((marginal - marginal_enum).abs() < 1e-12);
    }

    /// Random DAG + random sparse tables; VE must match enumeration.
    fn random_net(rng: &mut ChaCha8Rng) -> BayesNet {
        let n = rng.random_range(3..=10usize);
        let names: Vec<Node> = (0..n).map(|i| metric(&format!("n{i:02}"))).collect();
        let mut edges = BTreeSet::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < 0.35 {
                    edges.insert((names[i].clone(), names[j].clone()));
                }
            }
        }
        let structure = NetworkStructure {
            nodes: names.iter().cloned().collect(),
            edges,
            type_owner: BTreeMap::new(),
        };
        let cpts = structure
            .nodes
            .iter()
            .map(|node| {
                let parents = structure.parents(node);
                let mut counts = BTreeMap::new();
                // A random subset of configurations has counts; the rest
                // exercise the unseen-configuration fallback.
                let span = 1u64 << parents.len().min(6);
                for config in 0..span {
                    if rng.random::<f64>() < 0.6 {
                        counts.insert(
                            config,
                            (rng.random_range(0..15u64), rng.random_range(0..15u64)),
                        );
                    }
                }
                Cpt {
                    node: node.clone(),
                    parents,
                    counts: counts.into_iter().collect(),
                }
            })
            .collect();
        BayesNet {
            structure,
            cpts,
            feature_ids: vec![],
            training_fingerprint: 0,
        }
    }

    #[test]
    fn elimination_matches_enumeration_on_random_networks() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x1517);
        for round in 0..25 {
            let net = random_net(&mut rng);
            let nodes: Vec<Node> = net.structure.nodes.iter().cloned().collect();
            let mut evidence = BTreeMap::new();
            for node in &nodes {
                if rng.random::<f64>() < 0.4 {
                    evidence.insert(node.clone(), u8::from(rng.random::<bool>()));
                }
            }
            let free: Vec<&Node> = nodes
                .iter()
                .filter(|n| !evidence.contains_key(*n))
                .collect();
            if free.is_empty() {
                continue;
            }
            let query = free[rng.random_range(0..free.len())];
            let by_ve = net.probability_given(&evidence, query).unwrap();
            let by_enum = net.probability_by_enumeration(&evidence, query).unwrap();
            assert!(
                (by_ve - by_enum).abs() < 1e-9,
                "round {round}: ve {by_ve} vs enumeration {by_enum}"
            );
            // Smoothed rows always sum to one.
            for cpt in &net.cpts {
                for &(config, _) in &cpt.counts {
                    let row = cpt.probability(0, config) + cpt.probability(1, config);
                    assert!((row - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    fn two_module_topology() -> PlatformTopology {
        PlatformTopology {
            platform_id: "p".into(),
            modules: vec!["host".into(), "net".into()],
            metric_owner: BTreeMap::from([
                ("cpu".to_string(), "host".to_string()),
                ("rtt".to_string(), "net".to_string()),
            ]),
            cause_types: BTreeMap::from([
                ("t_cpu".to_string(), "host".to_string()),
                ("t_drop".to_string(), "net".to_string()),
            ]),
            module_dependencies: vec![],
            pattern_owner: BTreeMap::new(),
        }
    }

    fn window(polarity: Polarity, label: Option<(&str, &str)>, bits: &[&str]) -> Sample {
        Sample {
            window_start: 0,
            window_end: 60,
            polarity,
            label: label.map(|(m, t)| Label {
                module_id: m.to_string(),
                type_id: t.to_string(),
            }),
            features: bits.iter().map(|&k| (k.to_string(), 1u8)).collect(),
        }
    }

    /// Trains a tiny two-module net: cpu bit ⇒ (host, t_cpu), rtt bit ⇒
    /// (net, t_drop), plus healthy all-zero windows.
    fn trained_net() -> BayesNet {
        let topo = two_module_topology();
        let feature_ids = vec!["kpi:cpu".to_string(), "kpi:rtt".to_string()];
        let structure = allocate(&topo, &feature_ids).unwrap();
        let mut samples = Vec::new();
        for _ in 0..8 {
            samples.push(window(Polarity::Negative, Some(("host", "t_cpu")), &["kpi:cpu"]));
            samples.push(window(Polarity::Negative, Some(("net", "t_drop")), &["kpi:rtt"]));
            samples.push(window(Polarity::Positive, None, &[]));
            samples.push(window(Polarity::Positive, None, &[]));
        }
        let cpts = fit_cpts(&structure, &samples).unwrap();
        BayesNet {
            structure,
            cpts,
            feature_ids,
            training_fingerprint: 7,
        }
    }

    #[test]
    fn diagnosis_ranks_the_trained_fault_first() {
        let net = trained_net();
        let observed = BTreeMap::from([("kpi:cpu".to_string(), 1u8)]);
        let diagnosis = net.infer(&observed).unwrap();

        assert_eq!(diagnosis.ranked.len(), 2);
        assert_eq!(diagnosis.ranked[0].type_id, "t_cpu");
        assert_eq!(diagnosis.ranked[0].module_id, "host");
        assert!(diagnosis.ranked[0].score > diagnosis.ranked[1].score);
        assert_eq!(diagnosis.best_module, "host");
        assert!(diagnosis.best_module_probability > 0.8);
        assert!(!diagnosis.novel_type);
        assert!(!diagnosis.degenerate);

        // The decomposed score multiplies back together.
        for entry in &diagnosis.ranked {
            assert!(
                (entry.score - entry.type_probability * entry.module_probability).abs() < 1e-15
            );
        }

        // Missing keys mean bit 0: explicit zeros give the identical
        // diagnosis.
        let explicit = BTreeMap::from([
            ("kpi:cpu".to_string(), 1u8),
            ("kpi:rtt".to_string(), 0u8),
        ]);
        assert_eq!(net.infer(&explicit).unwrap(), diagnosis);
    }

    #[test]
    fn evidence_keys_must_name_metric_nodes() {
        let net = trained_net();
        let observed = BTreeMap::from([("kpi:ghost".to_string(), 1u8)]);
        assert!(matches!(
            net.infer(&observed),
            Err(BayesError::UnknownEvidence { .. })
        ));
    }

    #[test]
    fn symmetric_evidence_breaks_ties_lexicographically() {
        let net = trained_net();
        // Both fault bits at once: the two modules' tables are mirror
        // images fit from the same counts, so every posterior pairs up
        // bit-identically and the tie must fall to the smaller id.
        let observed = BTreeMap::from([
            ("kpi:cpu".to_string(), 1u8),
            ("kpi:rtt".to_string(), 1u8),
        ]);
        let diagnosis = net.infer(&observed).unwrap();
        assert_eq!(diagnosis.ranked[0].score, diagnosis.ranked[1].score);
        assert_eq!(diagnosis.ranked[0].type_id, "t_cpu");
        assert_eq!(diagnosis.best_module, "host");
    }

    #[test]
    fn zero_evidence_scores_below_fault_evidence() {
        let net = trained_net();
        let zero = net.infer(&BTreeMap::new()).unwrap();
        let fault = net
            .infer(&BTreeMap::from([("kpi:cpu".to_string(), 1u8)]))
            .unwrap();
        assert!(zero.ranked[0].score < fault.ranked[0].score);

        // Cross-check the module posterior both ways on this small net.
        let evidence = net.metric_evidence(&BTreeMap::new()).unwrap();
        let host = Node::Module("host".to_string());
        let by_ve = net.probability_given(&evidence, &host).unwrap();
        let by_enum = net.probability_by_enumeration(&evidence, &host).unwrap();
        assert!((by_ve - by_enum).abs() < 1e-12);
    }

    #[test]
    fn fallback_flags_weak_evidence_and_floor_zero_disables() {
        let net = trained_net();
        let zero: BTreeMap<String, u8> = BTreeMap::new();
        let flagged = net
            .infer_module_fallback(&zero, DEFAULT_CONFIDENCE_FLOOR)
            .unwrap();
        assert!(
            flagged.novel_type,
            "all-zero evidence should fall below the floor (top score {})",
            flagged.ranked[0].score
        );

        let strong = net
            .infer_module_fallback(
                &BTreeMap::from([("kpi:cpu".to_string(), 1u8)]),
                DEFAULT_CONFIDENCE_FLOOR,
            )
            .unwrap();
        assert!(!strong.novel_type, "trained signature scores above the floor");

        let disabled = net.infer_module_fallback(&zero, 0.0).unwrap();
        assert!(!disabled.novel_type);
        assert_eq!(disabled.ranked, net.infer(&zero).unwrap().ranked);
    }

    #[test]
    fn ranking_is_invariant_to_positive_scaling() {
        let net = trained_net();
        let diagnosis = net
            .infer(&BTreeMap::from([("kpi:cpu".to_string(), 1u8)]))
            .unwrap();
        let order: Vec<&str> = diagnosis.ranked.iter().map(|t| t.type_id.as_str()).collect();
        let mut scaled: Vec<(f64, &str)> = diagnosis
            .ranked
            .iter()
            .map(|t| (t.score * 3.75, t.type_id.as_str()))
            .collect();
        scaled.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.1.cmp(b.1))
        });
        let scaled_order: Vec<&str> = scaled.iter().map(|&(_, id)| id).collect();
        assert_eq!(order, scaled_order);
    }

    #[test]
    fn enumeration_refuses_oversized_networks() {
        let nodes: BTreeSet<Node> = (0..25).map(|i| metric(&format!("n{i:02}"))).collect();
        let structure = NetworkStructure {
            nodes: nodes.clone(),
            edges: BTreeSet::new(),
            type_owner: BTreeMap::new(),
        };
        let cpts = fit_cpts(&structure, &[]).unwrap();
        let net = BayesNet {
            structure,
            cpts,
            feature_ids: vec![],
            training_fingerprint: 0,
        };
        let query = nodes.iter().next().unwrap();
        assert!(matches!(
            net.probability_by_enumeration(&BTreeMap::new(), query),
            Err(BayesError::EnumerationTooLarge { hidden: 25 })
        ));
        // Variable elimination handles the same network fine.
        let p = net.probability_given(&BTreeMap::new(), query).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn diagnosis_roundtrips_through_json() {
        let net = trained_net();
        let diagnosis = net
            .infer(&BTreeMap::from([("kpi:rtt".to_string(), 1u8)]))
            .unwrap();
        let json = serde_json::to_string(&diagnosis).unwrap();
        let back: Diagnosis = serde_json::from_str(&json).unwrap();
        assert_eq!(back, diagnosis);
    }
}
