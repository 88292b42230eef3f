use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Graph, NnError, NodeId, ParameterStore};

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Entries checked per parameter; all of them when the parameter is smaller.
    pub samples_per_param: usize,
    pub seed: u64,
    /// Lower bound of the relative-error denominator.
    pub floor: f64,
    /// Only parameters whose name contains this substring are checked.
    pub filter: Option<String>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            samples_per_param: 8,
            seed: 0,
            floor: 1e-5,
            filter: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compares reverse-mode gradients with central differences on sampled
/// entries. `rel = |a - n| / max(|a|, |n|, floor)`.
pub fn grad_check<F>(store: &ParameterStore, loss: F, opts: &GradCheckOptions) -> Result<GradCheckReport, NnError>
where
    F: Fn(&ParameterStore) -> Result<(Graph, NodeId), NnError>,
{
    let eval = |s: &ParameterStore| -> Result<f64, NnError> {
        let (g, root) = loss(s)?;
        let v = g.scalar(root);
        if !v.is_finite() {
            return Err(NnError::NonFinite(format!("loss {v}")));
        }
        Ok(v)
    };
    let (g, root) = loss(store)?;
    if !g.scalar(root).is_finite() {
        return Err(NnError::NonFinite(format!("loss {}", g.scalar(root))));
    }
    let analytic = g.param_grads(&g.backward(root)?);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut work = store.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    let names: Vec<String> = store.names().map(str::to_string).collect();
    for name in names {
        if opts.filter.as_ref().is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        let len = store.get(&name)?.len();
        let idx: Vec<usize> = if len <= opts.samples_per_param {
            (0..len).collect()
        } else {
            let mut v = sample(&mut rng, len, opts.samples_per_param).into_vec();
            v.sort_unstable();
            v
        };
        let base = store.get(&name)?.values().to_vec();
        for i in idx {
            let mut plus = base.clone();
            plus[i] += opts.step;
            work.set_values(&name, plus)?;
            let lp = eval(&work)?;
            let mut minus = base.clone();
            minus[i] -= opts.step;
            work.set_values(&name, minus)?;
            let lm = eval(&work)?;
            work.set_values(&name, base.clone())?;
            let numeric = (lp - lm) / (2.0 * opts.step);
            let a = analytic.get(&name).map_or(0.0, |g| g[i]);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.floor);
            report.checked += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                if rel >= report.max_rel_error {
                    report.worst = Some((name.clone(), i));
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn quadratic_passes() {
        let mut s = ParameterStore::new();
        s.insert("w", Tensor::matrix(1, 3, vec![0.5, -1.0, 2.0]).unwrap()).unwrap();
        let r = grad_check(
            &s,
            |s| {
                let mut g = Graph::new();
                let w = g.param(s, "w")?;
                let sq = g.matmul_t(w, w)?;
                let root = g.sum(sq);
                Ok((g, root))
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert_eq!(r.checked, 3);
        assert!(r.max_rel_error < 1e-6);
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let mut s = ParameterStore::new();
        s.insert("w", Tensor::scalar(f64::NAN)).unwrap();
        let r = grad_check(
            &s,
            |s| {
                let mut g = Graph::new();
                let w = g.param(s, "w")?;
                let root = g.sum(w);
                Ok((g, root))
            },
            &GradCheckOptions::default(),
        );
        assert!(matches!(r, Err(NnError::NonFinite(_))));
    }
}
