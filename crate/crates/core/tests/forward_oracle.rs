mod common;

use common::random_instance;
use stddp::ingest::Sample;
use stddp::model::{cross_entropy, forward, HyperParams, ModelParams, Variant, VariantConfig};

const HP: HyperParams = HyperParams { d: 3, h: 4, w: 1 };

fn hav_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (la1, lo1, la2, lo2) = (a.0.to_radians(), a.1.to_radians(), b.0.to_radians(), b.1.to_radians());
    let h = ((la2 - la1) / 2.0).sin().powi(2) + la1.cos() * la2.cos() * ((lo2 - lo1) / 2.0).sin().powi(2);
    2.0 * 6371.0 * h.sqrt().asin()
}

/// Distances from `p` over their population standard deviation.
fn spatial(coords: &[(f64, f64)], p: usize) -> Vec<f64> {
    let dist: Vec<f64> = coords.iter().map(|&q| hav_km(coords[p], q)).collect();
    let mean = dist.iter().sum::<f64>() / dist.len() as f64;
    let var = dist.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / dist.len() as f64;
    dist.iter().map(|x| x / var.sqrt()).collect()
}

fn mat_vec(rows: usize, cols: usize, data: &[f64], x: &[f64]) -> Vec<f64> {
    (0..rows).map(|r| (0..cols).map(|c| data[r * cols + c] * x[c]).sum()).collect()
}

/// Logits written out equation by equation.
fn oracle_logits(p: &ModelParams, s: &Sample, coords: &[(f64, f64)], v: &VariantConfig) -> Vec<f64> {
    let (m, d, h) = (coords.len(), HP.d, HP.h);
    let emb = |table: &[f64], i: usize| table[i * d..(i + 1) * d].to_vec();
    let poi = p.poi_emb.as_slice();
    let tanh_all = |x: Vec<f64>| x.into_iter().map(f64::tanh).collect::<Vec<_>>();

    let mut c = vec![0.0; h];
    let mut add = |x: Vec<f64>| c.iter_mut().zip(x).for_each(|(a, b)| *a += b);
    if v.use_forward_branch {
        add(tanh_all(mat_vec(h, d, p.w_minus[0].as_slice(), &emb(poi, s.forward[0]))));
    }
    if v.use_backward_branch {
        add(tanh_all(mat_vec(h, d, p.w_plus[0].as_slice(), &emb(poi, s.backward[0]))));
    }
    add(tanh_all(mat_vec(h, d, p.w_user.as_slice(), &emb(p.user_emb.as_slice(), s.user))));
    if v.use_time_pattern {
        let bits: Vec<f64> = s.pattern.bits().iter().map(|&b| b as f64).collect();
        add(tanh_all(mat_vec(h, 7, p.w_time.as_slice(), &bits)));
    }
    let mut z = mat_vec(m, h, p.w_out.as_slice(), &c);
    if v.use_dependence {
        if v.use_forward_branch {
            let sv = spatial(coords, s.forward[0]);
            for j in 0..m {
                z[j] += sv[j] * (p.w_before[j] * s.interval_before).tanh();
            }
        }
        if v.use_backward_branch {
            let sv = spatial(coords, s.backward[0]);
            for j in 0..m {
                z[j] += sv[j] * (p.w_after[j] * s.interval_after).tanh();
            }
        }
    }
    z
}

#[test]
fn forward_matches_straight_line_oracle() {
    for seed in 0..20 {
        let inst = random_instance(seed, 2, 5, HP);
        let coords: Vec<(f64, f64)> = inst.spatial.table.iter().map(|(_, g)| (g.lat(), g.lon())).collect();
        for v in Variant::ALL {
            let cfg = v.config();
            let trace = forward(&inst.sample, &inst.params, &inst.spatial, &cfg).unwrap();
            let z = oracle_logits(&inst.params, &inst.sample, &coords, &cfg);
            let top = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|x| (x - top).exp()).collect();
            let sum: f64 = e.iter().sum();
            for j in 0..5 {
                assert!((trace.logits[j] - z[j]).abs() < 1e-12, "seed {seed} {v} logit {j}");
                assert!((trace.probs[j] - e[j] / sum).abs() < 1e-12, "seed {seed} {v} prob {j}");
            }
            let loss = sum.ln() + top - z[inst.sample.target];
            assert!((cross_entropy(&trace, inst.sample.target) - loss).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_model_is_uniform() {
    for m in [5, 30, 97] {
        let inst = random_instance(m as u64, 2, m, HP);
        let zeros = ModelParams::zeros(2, m, HP);
        for v in Variant::ALL {
            let t = forward(&inst.sample, &zeros, &inst.spatial, &v.config()).unwrap();
            assert!(t.probs.iter().all(|p| (p - 1.0 / m as f64).abs() < 1e-12));
            assert!((cross_entropy(&t, inst.sample.target) - (m as f64).ln()).abs() < 1e-9);
        }
    }
}
