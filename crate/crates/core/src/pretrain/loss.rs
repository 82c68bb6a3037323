use crate::error::{Error, Result};
use crate::pretrain::KeyQueue;
use crate::scalar::{dot, Scalar};

/// Loss and gradients for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoNce {
    pub loss: f64,
    pub grad_query: Vec<f64>,
    pub grad_positive: Vec<f64>,
}

/// `-log(exp(q.k0/tau) / sum_i exp(q.k_i/tau))` over the positive key and
/// every queued negative, with gradients for the query and the positive key.
///
/// An empty queue gives a one-class softmax and a loss of exactly zero.
pub fn info_nce<T: Scalar>(q: &[T], positive: &[T], queue: &KeyQueue<T>, tau: f64) -> Result<InfoNce> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {tau}")));
    }
    if q.len() != positive.len() || q.len() != queue.dim() {
        return Err(Error::shape("info_nce embeddings", &[queue.dim()], &[q.len(), positive.len()]));
    }
    let negatives = queue.as_rows();
    let d = q.len();
    let l0 = dot(q, positive) / tau;
    let logits: Vec<f64> = negatives.chunks_exact(d).map(|k| dot(q, k) / tau).collect();
    let max = logits.iter().copied().fold(l0, f64::max);
    let denom: f64 = (l0 - max).exp() + logits.iter().map(|l| (l - max).exp()).sum::<f64>();
    let lse = max + denom.ln();
    let loss = lse - l0;

    let p0 = (l0 - lse).exp();
    let mut grad_query: Vec<f64> = positive.iter().map(|k| (p0 - 1.0) * k.to_acc()).collect();
    for (k, l) in negatives.chunks_exact(d).zip(&logits) {
        let p = (l - lse).exp();
        for (g, kv) in grad_query.iter_mut().zip(k) {
            *g += p * kv.to_acc();
        }
    }
    for g in &mut grad_query {
        *g /= tau;
    }
    let grad_positive = q.iter().map(|v| (p0 - 1.0) * v.to_acc() / tau).collect();
    Ok(InfoNce {
        loss,
        grad_query,
        grad_positive,
    })
}


/// Mean InfoNCE over a batch and its parameter gradients.
#[derive(Debug, Clone)]
pub struct ContrastiveGradients<T> {
    pub loss: f64,
    pub per_query_loss: Vec<f64>,
    pub grads: crate::numkernel::ParamSet<T>,
}

/// Encodes `queries` with the query network, contrasts each row against its
/// row of `positives` and the queue, and backpropagates the mean loss.
///
/// `positives` and the queue are constants: no gradient reaches the key
/// encoder.
#[allow(clippy::too_many_arguments)]
pub fn contrastive_gradients<T: Scalar>(
    network: &crate::numkernel::MlpSpec,
    params: &crate::numkernel::ParamSet<T>,
    queries: &crate::numkernel::Tensor<T>,
    positives: &crate::numkernel::Tensor<T>,
    queue: &KeyQueue<T>,
    tau: f64,
    normalize: bool,
    train_mode: bool,
    seed: u64,
) -> Result<ContrastiveGradients<T>> {
    use crate::numkernel::{forward, l2_normalize, l2_normalize_backward, param_gradients, Tensor};

    let (raw, cache) = forward(network, params, queries, train_mode, seed)?;
    let emb = if normalize { l2_normalize(&raw)? } else { raw.clone() };
    if positives.shape() != emb.shape() {
        return Err(Error::shape("positive keys", emb.shape(), positives.shape()));
    }
    let b = emb.rows();
    let mut per_query_loss = Vec::with_capacity(b);
    let mut g = Vec::with_capacity(emb.len());
    for (q, k) in emb.iter_rows().zip(positives.iter_rows()) {
        let r = info_nce(q, k, queue, tau)?;
        per_query_loss.push(r.loss);
        g.extend(r.grad_query.into_iter().map(|v| T::from_acc(v / b as f64)));
    }
    let g = Tensor::new(emb.shape().to_vec(), g)?;
    let g = if normalize { l2_normalize_backward(&raw, &g)? } else { g };
    let grads = param_gradients(&cache, params, &g)?;
    let loss = per_query_loss.iter().sum::<f64>() / b as f64;
    Ok(ContrastiveGradients {
        loss,
        per_query_loss,
        grads,
    })
}
