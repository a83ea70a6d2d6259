use serde::{Deserialize, Serialize};

use super::trial::{Arm, TrialOutcome};
use crate::fit::cosine_weights;

/// Value with a one-sigma standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn binomial(k: u64, n: u64) -> Option<Estimate> {
        if n == 0 {
            return None;
        }
        let p = k as f64 / n as f64;
        Some(Estimate {
            value: p,
            sigma: (p * (1.0 - p) / n as f64).sqrt(),
        })
    }

    /// Distance from `x` in units of sigma; infinite for a zero-sigma miss.
    pub fn z_score(&self, x: f64) -> f64 {
        let d = (self.value - x).abs();
        if d == 0.0 {
            0.0
        } else if self.sigma > 0.0 {
            d / self.sigma
        } else {
            f64::INFINITY
        }
    }
}

/// Raw counters; merging is plain addition, so it is associative and
/// commutative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub n_trials: u64,
    pub n_aborted: u64,
    pub n_eg_ab1: u64,
    pub n_eg_b2c: u64,
    /// Joint herald table indexed by `2·ab1 + b2c`.
    pub eg_table: [u64; 4],
    /// Trials routed to the swap.
    pub n_swap_ready: u64,
    pub n_es: u64,
    pub fringe_trials: Vec<u64>,
    pub fringe_es: Vec<u64>,
    /// Swap click and first verification click.
    pub fringe_ev1: Vec<u64>,
    pub fringe_ev2: Vec<u64>,
    pub counting_trials: u64,
    pub counting_es: u64,
    /// Counting-arm patterns indexed by `2·a + c`.
    pub counting: [u64; 4],
}

impl Counts {
    pub fn new(n_thetas: usize) -> Self {
        Counts {
            n_trials: 0,
            n_aborted: 0,
            n_eg_ab1: 0,
            n_eg_b2c: 0,
            eg_table: [0; 4],
            n_swap_ready: 0,
            n_es: 0,
            fringe_trials: vec![0; n_thetas],
            fringe_es: vec![0; n_thetas],
            fringe_ev1: vec![0; n_thetas],
            fringe_ev2: vec![0; n_thetas],
            counting_trials: 0,
            counting_es: 0,
            counting: [0; 4],
        }
    }

    pub fn record(&mut self, arm: Arm, o: &TrialOutcome) {
        self.n_trials += 1;
        if o.aborted {
            self.n_aborted += 1;
            return;
        }
        let (ab1, b2c) = (o.eg_mode_ab1.is_some(), o.eg_mode_b2c.is_some());
        self.n_eg_ab1 += ab1 as u64;
        self.n_eg_b2c += b2c as u64;
        self.eg_table[2 * ab1 as usize + b2c as usize] += 1;
        self.n_swap_ready += o.swap_mode.is_some() as u64;
        self.n_es += o.es_click as u64;
        match arm {
            Arm::Fringe(k) => {
                self.fringe_trials[k] += 1;
                if o.es_click {
                    self.fringe_es[k] += 1;
                    self.fringe_ev1[k] += o.ev1_click as u64;
                    self.fringe_ev2[k] += o.ev2_click as u64;
                }
            }
            Arm::Counting => {
                self.counting_trials += 1;
                if o.es_click {
                    self.counting_es += 1;
                    self.counting[2 * o.a_click as usize + o.c_click as usize] += 1;
                }
            }
        }
    }

    pub fn merge(mut self, other: &Counts) -> Counts {
        self.n_trials += other.n_trials;
        self.n_aborted += other.n_aborted;
        self.n_eg_ab1 += other.n_eg_ab1;
        self.n_eg_b2c += other.n_eg_b2c;
        for (a, b) in self.eg_table.iter_mut().zip(&other.eg_table) {
            *a += b;
        }
        self.n_swap_ready += other.n_swap_ready;
        self.n_es += other.n_es;
        for (dst, src) in [
            (&mut self.fringe_trials, &other.fringe_trials),
            (&mut self.fringe_es, &other.fringe_es),
            (&mut self.fringe_ev1, &other.fringe_ev1),
            (&mut self.fringe_ev2, &other.fringe_ev2),
        ] {
            if dst.len() < src.len() {
                dst.resize(src.len(), 0);
            }
            for (a, b) in dst.iter_mut().zip(src) {
                *a += b;
            }
        }
        self.counting_trials += other.counting_trials;
        self.counting_es += other.counting_es;
        for (a, b) in self.counting.iter_mut().zip(&other.counting) {
            *a += b;
        }
        self
    }

    /// Accepted (not aborted) trials.
    pub fn n_accepted(&self) -> u64 {
        self.n_trials - self.n_aborted
    }
}

/// Estimates derived from [`Counts`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapStatistics {
    pub thetas: Vec<f64>,
    pub counts: Counts,
    /// Herald probability per link per accepted trial.
    pub eg_ab1: Option<Estimate>,
    pub eg_b2c: Option<Estimate>,
    /// Swap click probability given routing.
    pub p_es1: Option<Estimate>,
    /// Swap successes per trial, including aborted trials.
    pub throughput: Option<Estimate>,
    /// Swap and first verification click per trial and phase.
    pub fourfold: Vec<u64>,
    pub ev1_given_es: Vec<Option<Estimate>>,
    pub ev2_given_es: Vec<Option<Estimate>>,
    pub counting_given_es: [Option<Estimate>; 4],
    pub p00: Option<Estimate>,
    pub p01: Option<Estimate>,
    pub p10: Option<Estimate>,
    pub p11: Option<Estimate>,
    pub p_c: Option<Estimate>,
    pub v: Option<Estimate>,
    pub h: Option<Estimate>,
    /// p_c·(V − √h), clamped at zero.
    pub concurrence: Option<Estimate>,
    /// The same before clamping, for zero-crossing checks.
    pub concurrence_signed: Option<Estimate>,
    /// Set when h, V or C could not be formed from the counts.
    pub insufficient_statistics: bool,
}

fn fringe_visibility(thetas: &[f64], counts: &Counts) -> Option<Estimate> {
    let mut used = Vec::new();
    let mut rates = Vec::new();
    let mut vars = Vec::new();
    for (k, &t) in thetas.iter().enumerate() {
        let n = counts.fringe_es.get(k).copied().unwrap_or(0);
        if n == 0 {
            return None;
        }
        let r = counts.fringe_ev1[k] as f64 / n as f64;
        used.push(t);
        rates.push(r);
        vars.push(r * (1.0 - r) / n as f64);
    }
    let (a, b) = cosine_weights(&used)?;
    let dot = |w: &[f64]| w.iter().zip(&rates).map(|(w, r)| w * r).sum::<f64>();
    let (off, amp) = (dot(&a), dot(&b));
    if off <= 0.0 {
        return None;
    }
    let var_a: f64 = a.iter().zip(&vars).map(|(w, v)| w * w * v).sum();
    let var_b: f64 = b.iter().zip(&vars).map(|(w, v)| w * w * v).sum();
    let cov: f64 = a.iter().zip(&b).zip(&vars).map(|((x, y), v)| x * y * v).sum();
    let var = var_b / off.powi(2) + amp * amp * var_a / off.powi(4) - 2.0 * amp * cov / off.powi(3);
    Some(Estimate {
        value: amp.abs() / off,
        sigma: var.max(0.0).sqrt(),
    })
}

impl SwapStatistics {
    pub fn from_counts(thetas: &[f64], counts: Counts) -> Self {
        let acc = counts.n_accepted();
        let n_c = counts.counting_es;
        let pat: [Option<Estimate>; 4] =
            std::array::from_fn(|i| Estimate::binomial(counts.counting[i], n_c));
        let ev1 = (0..thetas.len())
            .map(|k| Estimate::binomial(counts.fringe_ev1[k], counts.fringe_es[k]))
            .collect();
        let ev2 = (0..thetas.len())
            .map(|k| Estimate::binomial(counts.fringe_ev2[k], counts.fringe_es[k]))
            .collect();
        let p_c = Estimate::binomial(counts.counting[1] + counts.counting[2], n_c);
        let v = fringe_visibility(thetas, &counts);

        let (mut h, mut conc, mut conc_signed) = (None, None, None);
        if n_c > 0 && counts.counting[1] > 0 && counts.counting[2] > 0 {
            let n = n_c as f64;
            let p01 = counts.counting[1] as f64 / n;
            let p10 = counts.counting[2] as f64 / n;
            let p11 = counts.counting[3] as f64 / n;
            let hv = p11 / (p10 * p01);
            // Multinomial covariance of (p10, p01, p11).
            let ps = [p10, p01, p11];
            let cov = |i: usize, j: usize| {
                let d = if i == j { ps[i] } else { 0.0 };
                (d - ps[i] * ps[j]) / n
            };
            let p11_eff = if p11 > 0.0 { p11 } else { 1.0 / n };
            let g_h = [-hv / p10, -hv / p01, 1.0 / (p10 * p01)];
            let var_h: f64 = (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| g_h[i] * g_h[j] * cov(i, j))
                .sum();
            h = Some(Estimate {
                value: hv,
                sigma: var_h.max(0.0).sqrt(),
            });
            if let Some(v) = v {
                let pc = p10 + p01;
                let sh = hv.sqrt();
                let c = pc * (v.value - sh);
                let sh_eff = (p11_eff / (p10 * p01)).sqrt();
                let g = [
                    (v.value - sh) + pc * sh / (2.0 * p10),
                    (v.value - sh) + pc * sh / (2.0 * p01),
                    -pc * sh_eff / (2.0 * p11_eff),
                ];
                let var_p: f64 = (0..3)
                    .flat_map(|i| (0..3).map(move |j| (i, j)))
                    .map(|(i, j)| g[i] * g[j] * cov(i, j))
                    .sum();
                let sigma = (var_p + pc * pc * v.sigma * v.sigma).max(0.0).sqrt();
                conc_signed = Some(Estimate { value: c, sigma });
                conc = Some(Estimate {
                    value: c.max(0.0),
                    sigma,
                });
            }
        }
        let insufficient = h.is_none() || v.is_none() || conc.is_none();
        SwapStatistics {
            thetas: thetas.to_vec(),
            eg_ab1: Estimate::binomial(counts.n_eg_ab1, acc),
            eg_b2c: Estimate::binomial(counts.n_eg_b2c, acc),
            p_es1: Estimate::binomial(counts.n_es, counts.n_swap_ready),
            throughput: Estimate::binomial(counts.n_es, counts.n_trials),
            fourfold: counts.fringe_ev1.clone(),
            ev1_given_es: ev1,
            ev2_given_es: ev2,
            counting_given_es: pat,
            p00: pat[0],
            p01: pat[1],
            p10: pat[2],
            p11: pat[3],
            p_c,
            v,
            h,
            concurrence: conc,
            concurrence_signed: conc_signed,
            insufficient_statistics: insufficient,
            counts,
        }
    }

    pub fn n_trials(&self) -> u64 {
        self.counts.n_trials
    }

    pub fn n_es(&self) -> u64 {
        self.counts.n_es
    }

    /// Trials with both links heralded in any mode.
    pub fn n_eg(&self) -> u64 {
        self.counts.eg_table[3]
    }

    pub fn fourfold_total(&self) -> u64 {
        self.fourfold.iter().sum()
    }

    /// One-line report of the entanglement figures.
    pub fn summary_line(&self) -> String {
        let f = |e: &Option<Estimate>| match e {
            Some(e) => format!("{:.4} ± {:.4}", e.value, e.sigma),
            None => "n/a".to_string(),
        };
        let mut s = format!(
            "V = {}, h = {}, p_c = {}, C = {}",
            f(&self.v),
            f(&self.h),
            f(&self.p_c),
            f(&self.concurrence)
        );
        if self.insufficient_statistics {
            s.push_str(" (insufficient statistics)");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_error() {
        let e = Estimate::binomial(25, 100).unwrap();
        assert_eq!(e.value, 0.25);
        assert!((e.sigma - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
        assert!(Estimate::binomial(0, 0).is_none());
    }

    #[test]
    fn merge_is_addition() {
        let mut a = Counts::new(2);
        a.n_trials = 3;
        a.fringe_ev1 = vec![1, 2];
        let mut b = Counts::new(2);
        b.n_trials = 4;
        b.fringe_ev1 = vec![5, 0];
        let ab = a.clone().merge(&b);
        let ba = b.merge(&a);
        assert_eq!(ab, ba);
        assert_eq!(ab.n_trials, 7);
        assert_eq!(ab.fringe_ev1, vec![6, 2]);
    }

    #[test]
    fn zero_singles_flag_insufficient() {
        let mut c = Counts::new(2);
        c.counting_es = 10;
        c.counting = [10, 0, 0, 0];
        let s = SwapStatistics::from_counts(&[0.0, 1.0], c);
        assert!(s.insufficient_statistics);
        assert!(s.h.is_none());
    }
}
