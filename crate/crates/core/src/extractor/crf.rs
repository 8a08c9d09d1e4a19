//! Linear-chain CRF over `k` tags with virtual START (`k`) and STOP (`k + 1`) states.
//!
//! Emissions are `n × k`; transitions `A[i][j]` score moving from tag `i` to
//! tag `j` and form a `(k + 2) × (k + 2)` matrix.

use crate::error::{shape_err, Result};
use crate::numerics::{log_sum_exp, CustomOp, Tape, Tensor, Var};

fn check(emissions: &Tensor, trans: &Tensor) -> Result<(usize, usize)> {
    let t = trans.shape();
    if t.len() != 2 || t[0] != t[1] || t[0] < 2 {
        return Err(shape_err(format!("transition matrix {t:?}")));
    }
    let k = t[0] - 2;
    let n = match emissions.shape() {
        [n, kk] if *kk == k => *n,
        [0] => 0,
        s => return Err(shape_err(format!("emissions {s:?} for {k} tags"))),
    };
    Ok((n, k))
}

/// Score of one tag path, boundary transitions included.
pub fn path_score(emissions: &Tensor, trans: &Tensor, tags: &[usize]) -> Result<f64> {
    let (n, k) = check(emissions, trans)?;
    if tags.len() != n || tags.iter().any(|&y| y >= k) {
        return Err(shape_err(format!("{} tags for {n} tokens", tags.len())));
    }
    let a = |i: usize, j: usize| trans.data()[i * (k + 2) + j];
    let (start, stop) = (k, k + 1);
    let mut prev = start;
    let mut s = 0.0;
    for (t, &y) in tags.iter().enumerate() {
        s += a(prev, y) + emissions.data()[t * k + y];
        prev = y;
    }
    Ok(s + a(prev, stop))
}

struct Lattice {
    alpha: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
    log_z: f64,
}

fn forward_backward(em: &[f64], tr: &[f64], n: usize, k: usize) -> Lattice {
    let w = k + 2;
    let a = |i: usize, j: usize| tr[i * w + j];
    let (start, stop) = (k, k + 1);
    if n == 0 {
        return Lattice {
            alpha: vec![],
            beta: vec![],
            log_z: a(start, stop),
        };
    }
    let mut alpha = vec![vec![0.0; k]; n];
    for j in 0..k {
        alpha[0][j] = a(start, j) + em[j];
    }
    let mut buf = vec![0.0; k];
    for t in 1..n {
        for j in 0..k {
            for i in 0..k {
                buf[i] = alpha[t - 1][i] + a(i, j);
            }
            alpha[t][j] = log_sum_exp(&buf) + em[t * k + j];
        }
    }
    let mut beta = vec![vec![0.0; k]; n];
    for i in 0..k {
        beta[n - 1][i] = a(i, stop);
    }
    for t in (0..n - 1).rev() {
        for i in 0..k {
            for j in 0..k {
                buf[j] = a(i, j) + em[(t + 1) * k + j] + beta[t + 1][j];
            }
            beta[t][i] = log_sum_exp(&buf);
        }
    }
    for j in 0..k {
        buf[j] = alpha[n - 1][j] + a(j, stop);
    }
    let log_z = log_sum_exp(&buf);
    Lattice { alpha, beta, log_z }
}

/// Log partition function by the forward algorithm.
pub fn log_partition(emissions: &Tensor, trans: &Tensor) -> Result<f64> {
    let (n, k) = check(emissions, trans)?;
    Ok(forward_backward(emissions.data(), trans.data(), n, k).log_z)
}

/// `log Z - score(y)`.
pub fn crf_nll(emissions: &Tensor, trans: &Tensor, tags: &[usize]) -> Result<f64> {
    Ok(log_partition(emissions, trans)? - path_score(emissions, trans, tags)?)
}

/// Gradients of `crf_nll` with respect to emissions and transitions:
/// expected counts under the model minus gold counts.
fn crf_nll_grads(em: &[f64], tr: &[f64], n: usize, k: usize, tags: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let w = k + 2;
    let (start, stop) = (k, k + 1);
    let mut ge = vec![0.0; n * k];
    let mut gt = vec![0.0; w * w];
    if n == 0 {
        return (ge, gt);
    }
    let lat = forward_backward(em, tr, n, k);
    for t in 0..n {
        for j in 0..k {
            ge[t * k + j] = (lat.alpha[t][j] + lat.beta[t][j] - lat.log_z).exp();
        }
    }
    for j in 0..k {
        gt[start * w + j] = ge[j];
        gt[j * w + stop] = ge[(n - 1) * k + j];
    }
    for t in 1..n {
        for i in 0..k {
            for j in 0..k {
                let lp = lat.alpha[t - 1][i] + tr[i * w + j] + em[t * k + j] + lat.beta[t][j] - lat.log_z;
                gt[i * w + j] += lp.exp();
            }
        }
    }
    let mut prev = start;
    for (t, &y) in tags.iter().enumerate() {
        ge[t * k + y] -= 1.0;
        gt[prev * w + y] -= 1.0;
        prev = y;
    }
    gt[prev * w + stop] -= 1.0;
    (ge, gt)
}

#[derive(Debug, Clone)]
struct CrfNllOp {
    tags: Vec<usize>,
}

impl CustomOp for CrfNllOp {
    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, upstream: &Tensor) -> Vec<Tensor> {
        let (em, tr) = (inputs[0], inputs[1]);
        let k = tr.rows() - 2;
        let n = self.tags.len();
        let u = upstream.scalar_value();
        let (ge, gt) = crf_nll_grads(em.data(), tr.data(), n, k, &self.tags);
        let scale = |v: Vec<f64>| v.into_iter().map(|x| x * u).collect::<Vec<_>>();
        vec![
            Tensor::from_vec(em.shape(), scale(ge)).expect("emission shape"),
            Tensor::from_vec(tr.shape(), scale(gt)).expect("transition shape"),
        ]
    }

    fn clone_box(&self) -> Box<dyn CustomOp> {
        Box::new(self.clone())
    }
}

/// CRF negative log-likelihood as a tape node over `[n, k]` emissions and transitions.
pub fn crf_nll_var(tape: &mut Tape, emissions: Var, trans: Var, tags: &[usize]) -> Result<Var> {
    let loss = crf_nll(tape.value(emissions), tape.value(trans), tags)?;
    let op = CrfNllOp { tags: tags.to_vec() };
    Ok(tape.custom(&[emissions, trans], Tensor::scalar(loss), Box::new(op)))
}

/// Highest-scoring tag path and its score; ties go to the lowest tag index.
pub fn viterbi(emissions: &Tensor, trans: &Tensor) -> Result<(Vec<usize>, f64)> {
    let (n, k) = check(emissions, trans)?;
    let w = k + 2;
    let tr = trans.data();
    let em = emissions.data();
    let (start, stop) = (k, k + 1);
    if n == 0 {
        return Ok((vec![], tr[start * w + stop]));
    }
    let mut delta: Vec<f64> = (0..k).map(|j| tr[start * w + j] + em[j]).collect();
    let mut back = vec![vec![0usize; k]; n];
    for t in 1..n {
        let mut next = vec![0.0; k];
        for j in 0..k {
            let mut best = (0, delta[0] + tr[j]);
            for i in 1..k {
                let s = delta[i] + tr[i * w + j];
                if s > best.1 {
                    best = (i, s);
                }
            }
            back[t][j] = best.0;
            next[j] = best.1 + em[t * k + j];
        }
        delta = next;
    }
    let mut last = 0;
    let mut best = delta[0] + tr[stop];
    for j in 1..k {
        let s = delta[j] + tr[j * w + stop];
        if s > best {
            best = s;
            last = j;
        }
    }
    let mut path = vec![last; n];
    for t in (1..n).rev() {
        path[t - 1] = back[t][path[t]];
    }
    let score = path_score(emissions, trans, &path)?;
    Ok((path, score))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check, ParamStore, RngState};

    fn em(rows: &[&[f64]]) -> Tensor {
        let k = rows.first().map_or(0, |r| r.len());
        Tensor::matrix(rows.len(), k, rows.concat()).unwrap()
    }

    #[test]
    fn symmetric_two_by_two() {
        let e = Tensor::zeros(&[2, 2]);
        let a = Tensor::zeros(&[4, 4]);
        for y in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            assert!((crf_nll(&e, &a, &y).unwrap() - 4f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn single_token_two_tags() {
        let e = em(&[&[1.0, 0.0]]);
        let a = Tensor::zeros(&[4, 4]);
        let z = log_partition(&e, &a).unwrap();
        assert!((z - (1f64.exp() + 1.0).ln()).abs() < 1e-15);
        assert!((crf_nll(&e, &a, &[0]).unwrap() - 0.31326168751822286).abs() < 1e-12);
    }

    #[test]
    fn viterbi_hand_example() {
        let e = em(&[&[1.0, 0.0], &[0.0, 2.0]]);
        let (p, s) = viterbi(&e, &Tensor::zeros(&[4, 4])).unwrap();
        assert_eq!(p, vec![0, 1]);
        assert_eq!(s, 3.0);
    }

    #[test]
    fn viterbi_ties_take_lowest_index() {
        let (p, s) = viterbi(&Tensor::zeros(&[3, 3]), &Tensor::zeros(&[5, 5])).unwrap();
        assert_eq!(p, vec![0, 0, 0]);
        assert_eq!(s, 0.0);
    }

    #[test]
    fn empty_sequence() {
        let mut a = Tensor::zeros(&[5, 5]);
        a.data_mut()[3 * 5 + 4] = 0.7;
        let e = Tensor::zeros(&[0, 3]);
        assert_eq!(viterbi(&e, &a).unwrap(), (vec![], 0.7));
        assert_eq!(log_partition(&e, &a).unwrap(), 0.7);
    }

    #[test]
    fn shape_errors() {
        let a = Tensor::zeros(&[4, 4]);
        assert!(crf_nll(&Tensor::zeros(&[2, 3]), &a, &[0, 0]).is_err());
        assert!(crf_nll(&Tensor::zeros(&[2, 2]), &a, &[0]).is_err());
        assert!(crf_nll(&Tensor::zeros(&[2, 2]), &a, &[0, 2]).is_err());
    }

    #[test]
    fn tape_gradients_match_central_differences() {
        let mut rng = RngState::new(5);
        for n in 0..=4 {
            let mut store = ParamStore::new();
            let pe = store.add("em", Tensor::uniform(&mut rng, &[n, 3], -1.0, 1.0)).unwrap();
            let pa = store.add("a", Tensor::uniform(&mut rng, &[5, 5], -1.0, 1.0)).unwrap();
            let tags: Vec<usize> = (0..n).map(|_| rng.below(3)).collect();
            let report = grad_check(&mut store, 1e-5, |s| {
                s.zero_grad();
                let mut tape = Tape::new();
                let e = tape.param(s, pe);
                let a = tape.param(s, pa);
                let l = crf_nll_var(&mut tape, e, a, &tags)?;
                let g = tape.backward(l);
                tape.accumulate_into(&g, s);
                Ok(tape.scalar(l))
            })
            .unwrap();
            assert!(report.passes(1e-6), "n={n}: {report:?}");
        }
    }
}
