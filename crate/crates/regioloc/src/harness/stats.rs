//! Rank statistics for the efficiency/satisfaction analysis: the
//! Kruskal-Wallis H test with tie correction, and the price-of-efficiency
//! table over matched result rows.

use std::collections::BTreeMap;

use thiserror::Error;

use super::ResultRow;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("kruskal-wallis needs at least two groups")]
    TooFewGroups,
    #[error("group {0} is empty")]
    EmptyGroup(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct KwTest {
    pub h: f64,
    pub p_value: f64,
    pub df: usize,
}

/// Kruskal-Wallis rank test with midrank tie handling and tie correction.
/// When every observation is identical the statistic is defined as H = 0
/// with p = 1.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KwTest, StatsError> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::TooFewGroups);
    }
    for (g, group) in groups.iter().enumerate() {
        if group.is_empty() {
            return Err(StatsError::EmptyGroup(g));
        }
    }
    let mut all: Vec<(f64, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, vs)| vs.iter().map(move |v| (*v, g)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let n_total = all.len();

    // Midranks and the tie-correction sum Σ (t³ − t).
    let mut rank_sum = vec![0.0f64; k];
    let mut tie_sum = 0.0f64;
    let mut i = 0;
    while i < n_total {
        let mut j = i;
        while j + 1 < n_total && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for item in &all[i..=j] {
            rank_sum[item.1] += midrank;
        }
        tie_sum += t * t * t - t;
        i = j + 1;
    }

    let nf = n_total as f64;
    let correction = 1.0 - tie_sum / (nf * nf * nf - nf);
    if correction <= 0.0 {
        // All observations identical.
        return Ok(KwTest {
            h: 0.0,
            p_value: 1.0,
            df: k - 1,
        });
    }
    let mut h = 0.0;
    for (g, group) in groups.iter().enumerate() {
        h += rank_sum[g] * rank_sum[g] / group.len() as f64;
    }
    h = 12.0 / (nf * (nf + 1.0)) * h - 3.0 * (nf + 1.0);
    h /= correction;
    Ok(KwTest {
        h,
        p_value: chi2_sf(h, k - 1),
        df: k - 1,
    })
}

/// Upper tail of the chi-square distribution with `df` degrees of freedom:
/// the regularized upper incomplete gamma Q(df/2, x/2).
pub fn chi2_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(df as f64 / 2.0, x / 2.0)
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7.
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        return std::f64::consts::PI.ln() - (std::f64::consts::PI * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma Q(a, x): series for x < a + 1,
/// continued fraction (modified Lentz) otherwise.
fn gamma_q(a: f64, x: f64) -> f64 {
    if x < 0.0 || a <= 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        // P(a, x) by series, Q = 1 − P.
        let mut ap = a;
        let mut sum = 1.0 / a;
        let mut del = sum;
        for _ in 0..500 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-15 {
                break;
            }
        }
        1.0 - sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        // Q(a, x) by continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-15 {
                break;
            }
        }
        (-x + a * x.ln() - ln_gamma(a)).exp() * h
    }
}

/// One matched pair: the transport cost at a threshold versus the matched
/// zero-threshold run on identical geometry.
#[derive(Debug, Clone)]
pub struct PeRow {
    pub n: usize,
    pub p: usize,
    pub scenario: String,
    pub pref: String,
    pub collocation: bool,
    pub seed: u64,
    pub threshold: f64,
    pub pe: f64,
}

#[derive(Debug, Clone)]
pub struct PeAggregate {
    pub n: usize,
    pub threshold: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Default)]
pub struct PeAnalysis {
    pub rows: Vec<PeRow>,
    pub aggregates: Vec<PeAggregate>,
    pub warnings: Vec<String>,
}

/// Price of efficiency per matched pair: `PE(Φ*) = (TC(Φ*) − TC(0))/TC(0)`,
/// aggregated min/median/max per (n, Φ*). Pairs with TC(0) = 0 are excluded
/// with a warning since the ratio is undefined.
pub fn price_of_efficiency(rows: &[ResultRow]) -> PeAnalysis {
    let mut analysis = PeAnalysis::default();
    let key = |r: &ResultRow| {
        (
            r.n,
            r.p,
            r.scenario.clone(),
            r.pref.clone(),
            r.collocation,
            r.seed,
        )
    };
    let mut base: BTreeMap<_, f64> = BTreeMap::new();
    for r in rows {
        if r.threshold == 0.0 {
            if let Some(obj) = r.objective {
                base.insert(key(r), obj);
            }
        }
    }
    for r in rows {
        if r.threshold <= 0.0 {
            continue;
        }
        let Some(obj) = r.objective else { continue };
        let Some(&tc0) = base.get(&key(r)) else {
            analysis
                .warnings
                .push(format!("no zero-threshold match for seed {} n {}", r.seed, r.n));
            continue;
        };
        if tc0 <= 1e-12 {
            analysis.warnings.push(format!(
                "TC(0) = 0 for seed {} n {}: PE undefined, pair excluded",
                r.seed, r.n
            ));
            continue;
        }
        analysis.rows.push(PeRow {
            n: r.n,
            p: r.p,
            scenario: r.scenario.clone(),
            pref: r.pref.clone(),
            collocation: r.collocation,
            seed: r.seed,
            threshold: r.threshold,
            pe: (obj - tc0) / tc0,
        });
    }
    let mut grouped: BTreeMap<(usize, u64), Vec<f64>> = BTreeMap::new();
    for row in &analysis.rows {
        grouped
            .entry((row.n, row.threshold.to_bits()))
            .or_default()
            .push(row.pe);
    }
    for ((n, tbits), mut pes) in grouped {
        pes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let count = pes.len();
        let median = if count % 2 == 1 {
            pes[count / 2]
        } else {
            0.5 * (pes[count / 2 - 1] + pes[count / 2])
        };
        analysis.aggregates.push(PeAggregate {
            n,
            threshold: f64::from_bits(tbits),
            min: pes[0],
            median,
            max: pes[count - 1],
            count,
        });
    }
    analysis
}
