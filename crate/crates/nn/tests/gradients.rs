//! Central finite-difference checks for every graph operation.
//!
//! Each case builds a scalar loss from named parameters, then compares the
//! analytic gradient from the tape against `(f(x+h) - f(x-h)) / 2h` for
//! every single parameter element.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fsns_nn::{Graph, Mlp, Param, Tensor, VarId};

const H: f64 = 1e-5;
const TOL: f64 = 1e-6;

fn random_param(name: &str, rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Param {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Param::new(name, Tensor::from_vec(rows, cols, data))
}

/// Checks d(loss)/d(param) for every element of every param.
fn check_gradients(params: &[Param], build: impl Fn(&mut Graph, &[Param]) -> VarId) {
    let mut g = Graph::new();
    let root = build(&mut g, params);
    let grads = g.backward(root);
    let analytic = g.param_grads(&grads);

    for (pi, p) in params.iter().enumerate() {
        let grad = analytic
            .get(&p.name)
            .unwrap_or_else(|| panic!("no gradient for {}", p.name));
        for k in 0..p.tensor.len() {
            let mut probe = |delta: f64| -> f64 {
                let mut shifted: Vec<Param> = params.to_vec();
                let data = shifted[pi].tensor.make_mut();
                data[k] += delta;
                let mut g2 = Graph::new();
                let r2 = build(&mut g2, &shifted);
                g2.value(r2).item()
            };
            let fd = (probe(H) - probe(-H)) / (2.0 * H);
            let a = grad[k];
            let scale = a.abs().max(fd.abs()).max(1.0);
            assert!(
                (a - fd).abs() / scale < TOL,
                "{}[{}]: analytic {} vs fd {}",
                p.name,
                k,
                a,
                fd
            );
        }
    }
}

#[test]
fn linear_layer_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = vec![
        random_param("x", 3, 4, &mut rng),
        random_param("w", 4, 2, &mut rng),
        random_param("b", 1, 2, &mut rng),
    ];
    check_gradients(&params, |g, p| {
        let x = g.param(&p[0]);
        let w = g.param(&p[1]);
        let b = g.param(&p[2]);
        let xw = g.matmul(x, w);
        let pre = g.add_row(xw, b);
        let act = g.relu(pre);
        g.sum_all(act)
    });
}

#[test]
fn elementwise_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = vec![
        random_param("a", 2, 3, &mut rng),
        random_param("b", 2, 3, &mut rng),
    ];
    check_gradients(&params, |g, p| {
        let a = g.param(&p[0]);
        let b = g.param(&p[1]);
        let prod = g.mul(a, b);
        let diff = g.sub(prod, b);
        let scaled = g.scale(diff, 0.37);
        let e = g.exp(scaled);
        g.sum_all(e)
    });
}

#[test]
fn softmax_selection_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = vec![random_param("logits", 4, 5, &mut rng)];
    check_gradients(&params, |g, p| {
        let logits = g.param(&p[0]);
        let probs = g.softmax_rows(logits);
        let picked = g.select_per_row(probs, &[0, 3, 2, 4]);
        g.sum_all(picked)
    });
}

#[test]
fn cross_entropy_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let params = vec![random_param("logits", 3, 6, &mut rng)];
    check_gradients(&params, |g, p| {
        let logits = g.param(&p[0]);
        let logp = g.log_softmax_rows(logits);
        let picked = g.select_per_row(logp, &[5, 0, 2]);
        let total = g.sum_all(picked);
        g.scale(total, -1.0)
    });
}

#[test]
fn attention_score_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = vec![
        random_param("q", 3, 4, &mut rng),
        random_param("k", 3, 4, &mut rng),
        random_param("v", 3, 4, &mut rng),
    ];
    check_gradients(&params, |g, p| {
        let q = g.param(&p[0]);
        let k = g.param(&p[1]);
        let v = g.param(&p[2]);
        let kt = g.transpose(k);
        let scores = g.matmul(q, kt);
        let scaled = g.scale(scores, 0.5);
        let probs = g.softmax_rows(scaled);
        let ctx = g.matmul(probs, v);
        g.sum_all(ctx)
    });
}

#[test]
fn slice_and_concat_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let params = vec![random_param("x", 2, 6, &mut rng)];
    check_gradients(&params, |g, p| {
        let x = g.param(&p[0]);
        let a = g.slice_cols(x, 0, 3);
        let b = g.slice_cols(x, 3, 3);
        let swapped = g.concat_cols(&[b, a]);
        let doubled = g.scale(swapped, 2.0);
        let prod = g.mul(doubled, swapped);
        g.sum_all(prod)
    });
}

#[test]
fn embedding_gather_accumulates_repeats() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let params = vec![random_param("table", 5, 3, &mut rng)];
    check_gradients(&params, |g, p| {
        let table = g.param(&p[0]);
        // row 2 repeats: its gradient must be the sum of both uses
        let rows = g.gather_rows(table, &[2, 0, 2, 4]);
        let sq = g.mul(rows, rows);
        g.sum_all(sq)
    });
}

#[test]
fn pooling_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let params = vec![random_param("x", 4, 3, &mut rng)];
    check_gradients(&params, |g, p| {
        let x = g.param(&p[0]);
        let pooled = g.mean_rows(x);
        let sq = g.mul(pooled, pooled);
        g.sum_all(sq)
    });
}

#[test]
fn layer_norm_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params = vec![
        random_param("x", 3, 5, &mut rng),
        random_param("gamma", 1, 5, &mut rng),
        random_param("beta", 1, 5, &mut rng),
    ];
    check_gradients(&params, |g, p| {
        let x = g.param(&p[0]);
        let gamma = g.param(&p[1]);
        let beta = g.param(&p[2]);
        let normed = g.layer_norm(x, gamma, beta, 1e-5);
        let e = g.exp(normed);
        g.sum_all(e)
    });
}

#[test]
fn mini_self_attention_block() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let params = vec![
        random_param("x", 4, 6, &mut rng),
        random_param("wq", 6, 6, &mut rng),
        random_param("wk", 6, 6, &mut rng),
        random_param("wv", 6, 6, &mut rng),
        random_param("wo", 6, 6, &mut rng),
        random_param("gamma", 1, 6, &mut rng),
        random_param("beta", 1, 6, &mut rng),
    ];
    check_gradients(&params, |g, p| {
        let x = g.param(&p[0]);
        let wq = g.param(&p[1]);
        let wk = g.param(&p[2]);
        let wv = g.param(&p[3]);
        let wo = g.param(&p[4]);
        let gamma = g.param(&p[5]);
        let beta = g.param(&p[6]);

        let q = g.matmul(x, wq);
        let k = g.matmul(x, wk);
        let v = g.matmul(x, wv);
        // two heads of width 3
        let mut heads = Vec::new();
        for h in 0..2 {
            let qh = g.slice_cols(q, h * 3, 3);
            let kh = g.slice_cols(k, h * 3, 3);
            let vh = g.slice_cols(v, h * 3, 3);
            let kt = g.transpose(kh);
            let scores = g.matmul(qh, kt);
            let scaled = g.scale(scores, 1.0 / (3.0f64).sqrt());
            let probs = g.softmax_rows(scaled);
            heads.push(g.matmul(probs, vh));
        }
        let cat = g.concat_cols(&heads);
        let proj = g.matmul(cat, wo);
        let res = g.add(proj, x);
        let normed = g.layer_norm(res, gamma, beta, 1e-5);
        g.sum_all(normed)
    });
}

#[test]
fn mlp_wrapper_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mlp = Mlp::new("net", &[3, 8, 2], &mut rng);
    let input = random_param("input", 2, 3, &mut rng);

    let mut all: Vec<Param> = vec![input];
    for p in mlp.params() {
        all.push(p.clone());
    }
    // rebuild an identical mlp from the (possibly perturbed) param list
    check_gradients(&all, |g, params| {
        let mut net = Mlp::new("net", &[3, 8, 2], &mut ChaCha8Rng::seed_from_u64(0));
        for (dst, src) in net.params_mut().into_iter().zip(&params[1..]) {
            *dst = src.clone();
        }
        let x = g.param(&params[0]);
        let out = net.forward(g, x);
        let sq = g.mul(out, out);
        g.sum_all(sq)
    });
}

#[test]
fn input_leaf_gradient_matches_fd() {
    // gradient with respect to a graph input (not a model parameter),
    // the path latent-space search relies on
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let w = random_param("w", 3, 1, &mut rng);
    let x0: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let eval = |x: &[f64]| -> (f64, Vec<f64>) {
        let mut g = Graph::new();
        let xi = g.input(Tensor::row(x.to_vec()));
        let wi = g.param(&w);
        let y = g.matmul(xi, wi);
        let sq = g.mul(y, y);
        let root = g.sum_all(sq);
        let grads = g.backward(root);
        (g.value(root).item(), grads.get(xi).unwrap().to_vec())
    };

    let (_, analytic) = eval(&x0);
    for k in 0..3 {
        let mut plus = x0.clone();
        plus[k] += H;
        let mut minus = x0.clone();
        minus[k] -= H;
        let fd = (eval(&plus).0 - eval(&minus).0) / (2.0 * H);
        assert!(
            (analytic[k] - fd).abs() / fd.abs().max(1.0) < TOL,
            "input[{k}]: {} vs {}",
            analytic[k],
            fd
        );
    }
}
