//! Brute-force reference implementations of the selection rules and a
//! random instance generator, shared by the oracle and acceptance tests.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use swipt_core::channel::FadingSample;
use swipt_core::selection::{mrs_final_select, mrs_preselect, srs_select, Candidate, ForwardLink};

/// The unique feasible relay that beats every other feasible relay.
pub fn srs_brute(view: &[Candidate], cost: f64) -> Option<usize> {
    let feasible: Vec<&Candidate> = view.iter().filter(|c| c.available && c.battery >= cost).collect();
    feasible
        .iter()
        .find(|a| {
            feasible.iter().all(|b| {
                a.id == b.id || a.battery - cost > b.battery - cost || (a.battery == b.battery && a.id < b.id)
            })
        })
        .map(|c| c.id)
}

/// Relay i is in the top-m set iff fewer than m available relays outrank it.
pub fn preselect_brute(view: &[Candidate], m: usize) -> Vec<usize> {
    view.iter()
        .filter(|c| c.available)
        .filter(|c| {
            let outranked_by = view
                .iter()
                .filter(|o| o.available && (o.battery > c.battery || (o.battery == c.battery && o.id < c.id)))
                .count();
            outranked_by < m
        })
        .map(|c| c.id)
        .collect()
}

pub fn final_brute(decoded: &[usize], view: &[Candidate], gains: &[f64], link: &ForwardLink) -> Option<usize> {
    let priced: Vec<(usize, f64)> = decoded
        .iter()
        .filter(|&&i| gains[i] > 0.0)
        .map(|&i| {
            let power = (2f64.powf(2.0 * link.target_rate) - 1.0) * link.noise_var * link.distance.powi(2) / gains[i];
            (i, view[i].battery - power * link.slot_duration)
        })
        .filter(|&(_, surplus)| surplus >= 0.0)
        .collect();
    priced
        .iter()
        .find(|(i, s)| priced.iter().all(|(j, t)| i == j || s > t || (s == t && i < j)))
        .map(|&(i, _)| i)
}

pub fn random_view(rng: &mut ChaCha8Rng, n: usize) -> Vec<Candidate> {
    (0..n)
        .map(|id| Candidate {
            id,
            // Coarse grid so ties are common.
            battery: rng.gen_range(0..8) as f64 * 0.5,
            available: rng.gen_bool(0.85),
        })
        .collect()
}

/// Draws one random instance with up to `max_n` relays and checks all three
/// rules against their enumerators. Returns a description of the first
/// disagreement.
pub fn check_random_instance(rng: &mut ChaCha8Rng, max_n: usize) -> Result<(), String> {
    let n = rng.gen_range(1..=max_n);
    let view = random_view(rng, n);
    let cost = rng.gen_range(0..6) as f64 * 0.5;
    if srs_select(&view, cost) != srs_brute(&view, cost) {
        return Err(format!("srs_select {view:?} cost {cost}"));
    }
    let m = rng.gen_range(1..=n);
    if mrs_preselect(&view, m) != preselect_brute(&view, m) {
        return Err(format!("mrs_preselect {view:?} m {m}"));
    }
    let decoded: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
    let gains: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.05) { 0.0 } else { rng.gen_range(0.01..5.0) }).collect();
    let samples: Vec<FadingSample> = gains.iter().map(|&g| FadingSample::new(g).unwrap()).collect();
    let link = ForwardLink { target_rate: rng.gen_range(0.1..1.5), noise_var: 1.0, distance: 1.0, slot_duration: 1.0 };
    let got = mrs_final_select(&decoded, &view, &samples, &link);
    if got.map(|f| f.id) != final_brute(&decoded, &view, &gains, &link) {
        return Err(format!("mrs_final_select {view:?} decoded {decoded:?} gains {gains:?}"));
    }
    if let Some(f) = got {
        if view[f.id].battery < f.cost || !decoded.contains(&f.id) {
            return Err(format!("mrs_final_select picked unaffordable or non-decoding relay {f:?}"));
        }
    }
    Ok(())
}
