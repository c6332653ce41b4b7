//! Selection and ranking of influential inputs from global and target HSIC
//! tests.
//!
//! Every non-fixed input is tested twice: against the output (global) and
//! against the critical-region weights (target). An input is selected when
//! either permutation p-value falls below `alpha`. Inputs rejected by the
//! target test lead the ranking by ascending target p-value; the other
//! selected inputs follow by ascending global p-value. Penalized inputs that
//! no test rejects are appended last.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{LearningSample, Role};
use crate::error::{Error, Result};
use crate::hsic::{
    center, draw_permutations, gamma_null, gram_matrix, pvalue_from_null, target_gram, KernelConfig, PermutationKernel,
    TargetConfig,
};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsicTestResult {
    pub input_index: usize,
    pub statistic: f64,
    pub pvalue_permutation: f64,
    /// `None` when the Gamma moments are degenerate for this input.
    pub pvalue_gamma: Option<f64>,
    pub permutations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankingRule {
    #[default]
    TargetPriority,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningResult {
    pub global: Vec<HsicTestResult>,
    pub target: Vec<HsicTestResult>,
    pub alpha: f64,
    /// Influential inputs, most influential first.
    pub selected: Vec<usize>,
    pub ranking_rule: RankingRule,
    /// Penalized inputs appended without being rejected by any test.
    pub forced: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreeningOptions {
    pub kernel: KernelConfig,
    pub output_kernel: KernelConfig,
    pub alpha: f64,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for ScreeningOptions {
    fn default() -> Self {
        Self {
            kernel: KernelConfig::default(),
            output_kernel: KernelConfig::default(),
            alpha: 0.1,
            permutations: 999,
            seed: 0,
        }
    }
}

impl ScreeningResult {
    pub fn global_for(&self, input: usize) -> Option<&HsicTestResult> {
        self.global.iter().find(|r| r.input_index == input)
    }

    pub fn target_for(&self, input: usize) -> Option<&HsicTestResult> {
        self.target.iter().find(|r| r.input_index == input)
    }

    /// 1-based position in the selection.
    pub fn rank_of(&self, input: usize) -> Option<usize> {
        self.selected.iter().position(|&j| j == input).map(|p| p + 1)
    }

    /// Inputs that the permutation test rejects at `alpha`, global or target.
    pub fn rejected(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .global
            .iter()
            .zip(&self.target)
            .filter(|(g, t)| g.pvalue_permutation < self.alpha || t.pvalue_permutation < self.alpha)
            .map(|(g, _)| g.input_index)
            .collect();
        out.sort_unstable();
        out
    }
}

/// Tests of one input against both output kernels, sharing the input Gram
/// matrix and the permutation set.
fn test_input(
    x: &[f64],
    index: usize,
    kernel: &KernelConfig,
    outputs: [(&DMatrix<f64>, &DMatrix<f64>); 2],
    permutations: &[Vec<usize>],
) -> Result<[HsicTestResult; 2]> {
    // a constant input is independent of everything; any bandwidth gives
    // the all-ones Gram matrix
    let k = if x.iter().all(|&v| v == x[0]) {
        gram_matrix(x, &KernelConfig::with_bandwidth(1.0))?
    } else {
        gram_matrix(x, kernel)?
    };
    let kc = center(&k);
    let n = x.len();
    let run = |(l, lc): (&DMatrix<f64>, &DMatrix<f64>)| {
        let pk = PermutationKernel::new(&kc, lc);
        let statistic = pk.observed();
        let pvalue_permutation = pvalue_from_null(statistic, permutations.iter().map(|p| pk.permuted(p)));
        let pvalue_gamma = gamma_null(&k, l, &kc, lc).ok().map(|g| g.pvalue(n, statistic));
        HsicTestResult {
            input_index: index,
            statistic,
            pvalue_permutation,
            pvalue_gamma,
            permutations: permutations.len(),
        }
    };
    Ok([run(outputs[0]), run(outputs[1])])
}

/// Runs global and target tests on every non-fixed input and applies the
/// selection and ranking rules.
///
/// All inputs are tested against the same seeded permutations of the
/// output, so identical columns get identical p-values.
pub fn screen(sample: &LearningSample, target: &TargetConfig, options: &ScreeningOptions) -> Result<ScreeningResult> {
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {}",
            options.alpha
        )));
    }
    if options.permutations == 0 {
        return Err(Error::InvalidArgument("at least one permutation is required".into()));
    }
    let y = sample.output();
    let l_global = gram_matrix(y, &options.output_kernel)?;
    let lc_global = center(&l_global);
    let l_target = target_gram(y, target)?;
    let lc_target = center(&l_target);
    let perms = draw_permutations(
        sample.n(),
        options.permutations,
        derive_seed(options.seed, "screening-permutations"),
    );

    let tested: Vec<usize> = sample
        .variables()
        .iter()
        .filter(|v| v.role != Role::Fixed)
        .map(|v| v.index)
        .collect();
    let results: Vec<[HsicTestResult; 2]> = tested
        .par_iter()
        .map(|&j| {
            test_input(
                &sample.column(j),
                j,
                &options.kernel,
                [(&l_global, &lc_global), (&l_target, &lc_target)],
                &perms,
            )
        })
        .collect::<Result<_>>()?;
    let (global, target_results): (Vec<_>, Vec<_>) = results.into_iter().map(|[g, t]| (g, t)).unzip();

    let (selected, forced) = rank(&global, &target_results, options.alpha, &sample.penalize_indices());
    Ok(ScreeningResult {
        global,
        target: target_results,
        alpha: options.alpha,
        selected,
        ranking_rule: RankingRule::TargetPriority,
        forced,
    })
}

/// Target-priority ranking plus force-inclusion of penalized inputs.
pub fn rank(
    global: &[HsicTestResult],
    target: &[HsicTestResult],
    alpha: f64,
    penalize: &[usize],
) -> (Vec<usize>, Vec<usize>) {
    let by_p = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let mut target_hits: Vec<(f64, usize)> = target
        .iter()
        .filter(|t| t.pvalue_permutation < alpha)
        .map(|t| (t.pvalue_permutation, t.input_index))
        .collect();
    target_hits.sort_by(by_p);
    let mut global_hits: Vec<(f64, usize)> = global
        .iter()
        .filter(|g| g.pvalue_permutation < alpha)
        .filter(|g| !target_hits.iter().any(|t| t.1 == g.input_index))
        .map(|g| (g.pvalue_permutation, g.input_index))
        .collect();
    global_hits.sort_by(by_p);
    let mut selected: Vec<usize> = target_hits.iter().chain(&global_hits).map(|h| h.1).collect();
    let mut forced = Vec::new();
    for &j in penalize {
        if !selected.contains(&j) {
            selected.push(j);
            forced.push(j);
        }
    }
    (selected, forced)
}

/// Per-input row of the JSON screening report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReportRow {
    pub name: String,
    pub index: usize,
    pub hsic: f64,
    pub thsic: f64,
    pub pvalue_global_perm: f64,
    pub pvalue_global_gamma: Option<f64>,
    pub pvalue_target_perm: f64,
    pub pvalue_target_gamma: Option<f64>,
    pub selected: bool,
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub alpha: f64,
    pub permutations: usize,
    pub threshold: f64,
    pub ranking_rule: RankingRule,
    pub selected: Vec<String>,
    pub selected_indices: Vec<usize>,
    pub forced: Vec<String>,
    pub inputs: Vec<ScreeningReportRow>,
}

impl ScreeningResult {
    pub fn report(&self, sample: &LearningSample, threshold: f64) -> ScreeningReport {
        let name = |j: usize| sample.variables()[j].name.clone();
        let inputs = self
            .global
            .iter()
            .zip(&self.target)
            .map(|(g, t)| ScreeningReportRow {
                name: name(g.input_index),
                index: g.input_index,
                hsic: g.statistic,
                thsic: t.statistic,
                pvalue_global_perm: g.pvalue_permutation,
                pvalue_global_gamma: g.pvalue_gamma,
                pvalue_target_perm: t.pvalue_permutation,
                pvalue_target_gamma: t.pvalue_gamma,
                selected: self.selected.contains(&g.input_index),
                rank: self.rank_of(g.input_index),
            })
            .collect();
        ScreeningReport {
            alpha: self.alpha,
            permutations: self.global.first().map_or(0, |g| g.permutations),
            threshold,
            ranking_rule: self.ranking_rule,
            selected: self.selected.iter().map(|&j| name(j)).collect(),
            selected_indices: self.selected.clone(),
            forced: self.forced.iter().map(|&j| name(j)).collect(),
            inputs,
        }
    }
}

impl ScreeningReport {
    /// Plot-ready p-values, one row per input.
    pub fn pvalues_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let mut out = String::from(
            "name,index,pvalue_global_perm,pvalue_global_gamma,pvalue_target_perm,pvalue_target_gamma,selected\n",
        );
        for r in &self.inputs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.name,
                r.index,
                r.pvalue_global_perm,
                fmt(r.pvalue_global_gamma),
                r.pvalue_target_perm,
                fmt(r.pvalue_target_gamma),
                u8::from(r.selected)
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Distribution, VariableSpec};
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn result(index: usize, p: f64) -> HsicTestResult {
        HsicTestResult {
            input_index: index,
            statistic: 0.0,
            pvalue_permutation: p,
            pvalue_gamma: None,
            permutations: 99,
        }
    }

    #[test]
    fn ranking_gives_target_priority() {
        let global = vec![
            result(0, 0.01),
            result(1, 0.5),
            result(2, 0.02),
            result(3, 0.02),
            result(4, 0.9),
        ];
        let target = vec![
            result(0, 0.3),
            result(1, 0.05),
            result(2, 0.01),
            result(3, 0.6),
            result(4, 0.9),
        ];
        let (sel, forced) = rank(&global, &target, 0.1, &[4]);
        assert_eq!(sel, vec![2, 1, 0, 3, 4]);
        assert_eq!(forced, vec![4]);
        // a rejected penalized input keeps its rule-based place
        let (sel, forced) = rank(&global, &target, 0.1, &[1]);
        assert_eq!(sel, vec![2, 1, 0, 3]);
        assert!(forced.is_empty());
    }

    fn study(
        columns: usize,
        pen: &[usize],
        n: usize,
        seed: u64,
        f: impl Fn(&[f64], &mut rand_chacha::ChaCha8Rng) -> f64,
    ) -> LearningSample {
        let mut rng = rng_from_seed(seed);
        let x = DMatrix::from_fn(n, columns, |_, _| rng.random::<f64>());
        let y = (0..n)
            .map(|i| f(&x.row(i).iter().copied().collect::<Vec<_>>(), &mut rng))
            .collect();
        let vars = (0..columns)
            .map(|k| {
                let role = if pen.contains(&k) {
                    Role::Penalize
                } else {
                    Role::Candidate
                };
                VariableSpec::new(
                    format!("x{k}"),
                    k,
                    role,
                    Distribution::Uniform { lower: 0.0, upper: 1.0 },
                )
            })
            .collect();
        LearningSample::new(x, y, vars, "y").unwrap()
    }

    #[test]
    fn independent_output_keeps_only_forced_inputs() {
        // selection at alpha = 1e-3 makes chance rejections negligible
        let s = study(6, &[1, 4], 120, 3, |_, rng| rng.random::<f64>());
        let q = crate::dataset::empirical_quantile(s.output(), 0.9).unwrap();
        let opts = ScreeningOptions {
            alpha: 1e-3,
            permutations: 199,
            seed: 1,
            ..ScreeningOptions::default()
        };
        let r = screen(&s, &TargetConfig::hard(q), &opts).unwrap();
        assert_eq!(r.selected, vec![1, 4]);
        assert_eq!(r.forced, vec![1, 4]);
    }

    #[test]
    fn zero_penalized_inputs_is_fine() {
        let s = study(3, &[], 60, 4, |x, _| x[0]);
        let q = crate::dataset::empirical_quantile(s.output(), 0.9).unwrap();
        let opts = ScreeningOptions {
            permutations: 99,
            ..ScreeningOptions::default()
        };
        let r = screen(&s, &TargetConfig::hard(q), &opts).unwrap();
        assert!(r.forced.is_empty());
        assert_eq!(r.selected.first(), Some(&0));
    }

    #[test]
    fn duplicated_column_gets_adjacent_ranks() {
        let mut s = study(5, &[], 150, 7, |x, _| 2.0 * x[0] + x[2] + 0.5 * x[4]);
        // copy column 2 into column 3
        let mut design = s.design().clone();
        let c2 = design.column(2).clone_owned();
        design.set_column(3, &c2);
        s = LearningSample::new(design, s.output().to_vec(), s.variables().to_vec(), "y").unwrap();
        let q = crate::dataset::empirical_quantile(s.output(), 0.9).unwrap();
        let opts = ScreeningOptions {
            permutations: 199,
            seed: 2,
            ..ScreeningOptions::default()
        };
        let r = screen(&s, &TargetConfig::hard(q), &opts).unwrap();
        assert_eq!(r.global[2].statistic, r.global[3].statistic);
        assert_eq!(r.global[2].pvalue_permutation, r.global[3].pvalue_permutation);
        assert_eq!(r.target[2].pvalue_permutation, r.target[3].pvalue_permutation);
        let r2 = r.rank_of(2).unwrap();
        let r3 = r.rank_of(3).unwrap();
        assert_eq!(r3, r2 + 1);
    }

    #[test]
    fn degenerate_target_and_bad_alpha() {
        let s = study(2, &[], 30, 1, |x, _| x[0]);
        let opts = ScreeningOptions {
            permutations: 9,
            ..ScreeningOptions::default()
        };
        assert!(matches!(
            screen(&s, &TargetConfig::hard(10.0), &opts),
            Err(Error::DegenerateTarget)
        ));
        let bad = ScreeningOptions { alpha: 0.0, ..opts };
        assert!(screen(&s, &TargetConfig::hard(0.5), &bad).is_err());
    }

    #[test]
    fn report_serializes_every_input() {
        let s = study(4, &[3], 80, 9, |x, _| x[0] + x[1]);
        let q = crate::dataset::empirical_quantile(s.output(), 0.9).unwrap();
        let opts = ScreeningOptions {
            permutations: 99,
            ..ScreeningOptions::default()
        };
        let r = screen(&s, &TargetConfig::hard(q), &opts).unwrap();
        let rep = r.report(&s, q);
        assert_eq!(rep.inputs.len(), 4);
        let json = serde_json::to_string(&rep).unwrap();
        let back: ScreeningReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rep);
        assert_eq!(rep.pvalues_csv().lines().count(), 5);
        for row in &rep.inputs {
            assert_eq!(row.selected, row.rank.is_some());
        }
    }

    #[test]
    fn screening_is_deterministic() {
        let s = study(4, &[], 60, 5, |x, _| x[1].powi(2));
        let q = crate::dataset::empirical_quantile(s.output(), 0.9).unwrap();
        let opts = ScreeningOptions {
            permutations: 49,
            seed: 3,
            ..ScreeningOptions::default()
        };
        let a = screen(&s, &TargetConfig::hard(q), &opts).unwrap();
        let b = screen(&s, &TargetConfig::hard(q), &opts).unwrap();
        assert_eq!(a, b);
    }
}
