//! Random instance generation and instance persistence.
//!
//! Regions are planar `ℓτ`-norm balls with radii drawn uniformly from
//! (0.05, 0.25) and weights from (0, 1); centers come from a blob sampler
//! (`blob_clusters` isotropic Gaussian clusters with centers uniform in
//! [−10, 10]²). Scenario `l1` uses the `ℓ1` norm throughout, `l2` the
//! Euclidean norm, and `mixed` draws each region's ball and transport norms
//! independently from {ℓ1, ℓ2, ℓ3, ℓ4}.
//!
//! Preference parameters: linear coefficients `γ_k = (−1)^X·Y`, `γ₀ = Ỹ`
//! with X ∈ {0,1} and Y, Ỹ integer uniform in [1, 10]; distance preferences
//! use 1–3 reference points rejected into the ball with equal λ weights;
//! production preferences use two factors, each subdividing the ball into
//! four angular sectors around the center (two lines at uniform angles),
//! cell values integer uniform in [1, 10], β = (0.5, 0.5), and CES τ = 0.5.
//!
//! The RNG streams are split per concern (geometry, weights, preferences) so
//! changing the preference family never perturbs the geometry at a fixed
//! seed; thresholds draw nothing at all. This makes threshold sweeps
//! paired-geometry comparisons by construction.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{eval_norm, NormTag, Point, Region};
use crate::model::Instance;
use crate::prefs::{Cell, Halfspace, PreferenceSpec, ProductionKind, ProductionSpec, Subdivision};
use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {0} (this build reads version {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("invalid instance file: {0}")]
    Invalid(String),
}

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    L1,
    L2,
    Mixed,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::L1 => "l1",
            Scenario::L2 => "l2",
            Scenario::Mixed => "mixed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "l1" => Some(Scenario::L1),
            "l2" => Some(Scenario::L2),
            "mixed" => Some(Scenario::Mixed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrefFamily {
    L,
    D,
    Ces,
    Cd,
    Lf,
}

impl PrefFamily {
    pub const ALL: [PrefFamily; 5] = [
        PrefFamily::L,
        PrefFamily::D,
        PrefFamily::Ces,
        PrefFamily::Cd,
        PrefFamily::Lf,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PrefFamily::L => "L",
            PrefFamily::D => "D",
            PrefFamily::Ces => "CES",
            PrefFamily::Cd => "CD",
            PrefFamily::Lf => "LF",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L" => Some(PrefFamily::L),
            "D" => Some(PrefFamily::D),
            "CES" => Some(PrefFamily::Ces),
            "CD" => Some(PrefFamily::Cd),
            "LF" => Some(PrefFamily::Lf),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub n: usize,
    pub p: usize,
    pub scenario: Scenario,
    pub pref_family: PrefFamily,
    pub threshold: f64,
    pub collocation: bool,
    pub seed: u64,
    pub blob_clusters: usize,
    pub blob_std: f64,
}

impl GenConfig {
    pub fn new(n: usize, p: usize, scenario: Scenario, pref_family: PrefFamily) -> Self {
        GenConfig {
            n,
            p,
            scenario,
            pref_family,
            threshold: 0.0,
            collocation: false,
            seed: 0,
            blob_clusters: 3,
            blob_std: 1.0,
        }
    }
}

/// On-disk instance document: schema version, config echo, payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub config: GenConfig,
    pub instance: Instance,
}

fn draw_norm(rng: &mut Rng) -> NormTag {
    match rng.uniform_int(1, 4) {
        1 => NormTag::L1,
        2 => NormTag::L2,
        3 => NormTag::L3,
        _ => NormTag::L4,
    }
}

/// Four angular sectors around `center` cut by two lines at the given
/// angles; sector (s1, s2) keeps the sign pattern of the two line normals.
fn angular_sectors(center: &[f64], angle1: f64, angle2: f64, values: [f64; 4]) -> Subdivision {
    let normal_of = |angle: f64| vec![-angle.sin(), angle.cos()];
    let n1 = normal_of(angle1);
    let n2 = normal_of(angle2);
    let mut cells = Vec::with_capacity(4);
    let mut vi = 0;
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            let mk = |n: &[f64], s: f64| Halfspace {
                normal: n.iter().map(|v| s * v).collect(),
                offset: s * (n[0] * center[0] + n[1] * center[1]),
            };
            cells.push(Cell {
                halfspaces: vec![mk(&n1, s1), mk(&n2, s2)],
                value: values[vi],
            });
            vi += 1;
        }
    }
    Subdivision { cells }
}

/// Generate an instance per the experimental protocol. Deterministic per
/// seed: identical (seed, config) pairs yield byte-identical instances.
pub fn generate(config: &GenConfig) -> Instance {
    let mut geo = Rng::stream(config.seed, "geometry");
    let mut wts = Rng::stream(config.seed, "weights");
    let mut prf = Rng::stream(config.seed, "preferences");

    // Blob centers, then one cluster choice + Gaussian offset per region.
    let clusters: Vec<[f64; 2]> = (0..config.blob_clusters.max(1))
        .map(|_| [geo.uniform_in(-10.0, 10.0), geo.uniform_in(-10.0, 10.0)])
        .collect();

    let mut regions = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let cl = clusters[geo.uniform_int(0, clusters.len() as i64 - 1) as usize];
        let center = Point(vec![
            cl[0] + config.blob_std * geo.normal(),
            cl[1] + config.blob_std * geo.normal(),
        ]);
        let radius = geo.uniform_in(0.05, 0.25);
        let (ball_norm, transport_norm) = match config.scenario {
            Scenario::L1 => (NormTag::L1, NormTag::L1),
            Scenario::L2 => (NormTag::L2, NormTag::L2),
            Scenario::Mixed => (draw_norm(&mut geo), draw_norm(&mut geo)),
        };
        let weight = wts.uniform();
        regions.push(Region {
            center,
            radius,
            ball_norm,
            transport_norm,
            weight,
            extra_soc: Vec::new(),
        });
    }

    let prefs: Vec<PreferenceSpec> = regions
        .iter()
        .map(|region| match config.pref_family {
            PrefFamily::L => {
                let gamma: Vec<f64> = (0..2)
                    .map(|_| {
                        let x = prf.uniform_int(0, 1);
                        let y = prf.uniform_int(1, 10) as f64;
                        if x == 1 {
                            -y
                        } else {
                            y
                        }
                    })
                    .collect();
                let gamma0 = prf.uniform_int(1, 10) as f64;
                PreferenceSpec::Linear { gamma, gamma0 }
            }
            PrefFamily::D => {
                let k = prf.uniform_int(1, 3) as usize;
                let mut points = Vec::with_capacity(k);
                while points.len() < k {
                    let cand: Vec<f64> = region
                        .center
                        .0
                        .iter()
                        .map(|c| prf.uniform_in(c - region.radius, c + region.radius))
                        .collect();
                    let diff: Vec<f64> = cand
                        .iter()
                        .zip(&region.center.0)
                        .map(|(a, b)| a - b)
                        .collect();
                    if eval_norm(&diff, region.ball_norm) <= region.radius {
                        points.push(Point(cand));
                    }
                }
                PreferenceSpec::Distance {
                    points,
                    lambdas: vec![1.0 / k as f64; k],
                    norm: region.transport_norm,
                }
            }
            PrefFamily::Ces | PrefFamily::Cd | PrefFamily::Lf => {
                let kind = match config.pref_family {
                    PrefFamily::Ces => ProductionKind::Ces,
                    PrefFamily::Cd => ProductionKind::Cd,
                    _ => ProductionKind::Lf,
                };
                let factors = (0..2)
                    .map(|_| {
                        let a1 = prf.uniform_in(0.0, std::f64::consts::TAU);
                        let a2 = prf.uniform_in(0.0, std::f64::consts::TAU);
                        let values = [
                            prf.uniform_int(1, 10) as f64,
                            prf.uniform_int(1, 10) as f64,
                            prf.uniform_int(1, 10) as f64,
                            prf.uniform_int(1, 10) as f64,
                        ];
                        angular_sectors(&region.center.0, a1, a2, values)
                    })
                    .collect();
                PreferenceSpec::Production(ProductionSpec {
                    kind,
                    factors,
                    betas: vec![0.5, 0.5],
                    tau_ces: if kind == ProductionKind::Ces {
                        Some(0.5)
                    } else {
                        None
                    },
                })
            }
        })
        .collect();

    Instance {
        regions,
        prefs,
        p: config.p,
        threshold: config.threshold,
        collocation: config.collocation,
        dimension: 2,
        scenario: config.scenario.label().to_string(),
        pref_family: config.pref_family.label().to_string(),
        seed: config.seed,
    }
}

/// Serialize to the schema-versioned JSON document.
pub fn to_json(config: &GenConfig, instance: &Instance) -> Result<String, InstanceError> {
    let file = InstanceFile {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        instance: instance.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn save(config: &GenConfig, instance: &Instance, path: &Path) -> Result<(), InstanceError> {
    fs::write(path, to_json(config, instance)?)?;
    Ok(())
}

/// Load and re-validate an instance document.
pub fn load(path: &Path) -> Result<InstanceFile, InstanceError> {
    let text = fs::read_to_string(path)?;
    from_json(&text)
}

pub fn from_json(text: &str) -> Result<InstanceFile, InstanceError> {
    // Peek at the version before strict decoding.
    #[derive(Deserialize)]
    struct VersionProbe {
        schema_version: u32,
    }
    let probe: VersionProbe = serde_json::from_str(text)?;
    if probe.schema_version != SCHEMA_VERSION {
        return Err(InstanceError::SchemaVersion(probe.schema_version));
    }
    let file: InstanceFile = serde_json::from_str(text)?;
    file.instance
        .validate()
        .map_err(|e| InstanceError::Invalid(e.to_string()))?;
    // Production subdivisions must cover the region (sampled check).
    for (i, (region, pref)) in file
        .instance
        .regions
        .iter()
        .zip(&file.instance.prefs)
        .enumerate()
    {
        if let PreferenceSpec::Production(p) = pref {
            let mut rng = Rng::new(0xC05E ^ i as u64);
            for _ in 0..256 {
                let cand = Point(
                    region
                        .center
                        .0
                        .iter()
                        .map(|c| rng.uniform_in(c - region.radius, c + region.radius))
                        .collect(),
                );
                if !region.contains(&cand, 0.0).unwrap_or(false) {
                    continue;
                }
                for (f, sub) in p.factors.iter().enumerate() {
                    if sub.cell_of(&cand.0, 1e-9).is_none() {
                        return Err(InstanceError::Invalid(format!(
                            "region {i} factor {f}: subdivision does not cover the region"
                        )));
                    }
                }
            }
        }
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prefs::evaluate;

    fn config(n: usize, seed: u64, family: PrefFamily, scenario: Scenario) -> GenConfig {
        GenConfig {
            seed,
            ..GenConfig::new(n, 1, scenario, family)
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = config(5, 42, PrefFamily::Cd, Scenario::Mixed);
        let a = to_json(&cfg, &generate(&cfg)).unwrap();
        let b = to_json(&cfg, &generate(&cfg)).unwrap();
        assert_eq!(a, b, "same seed must yield byte-identical instances");
        let other = config(5, 43, PrefFamily::Cd, Scenario::Mixed);
        let c = to_json(&other, &generate(&other)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn pref_family_does_not_perturb_geometry() {
        let base = config(8, 7, PrefFamily::L, Scenario::Mixed);
        let alt = config(8, 7, PrefFamily::Lf, Scenario::Mixed);
        let inst_l = generate(&base);
        let inst_lf = generate(&alt);
        for (a, b) in inst_l.regions.iter().zip(&inst_lf.regions) {
            assert_eq!(a.center.0, b.center.0);
            assert_eq!(a.radius, b.radius);
            assert_eq!(a.weight, b.weight);
            assert_eq!(a.ball_norm, b.ball_norm);
        }
    }

    #[test]
    fn parameter_ranges_match_protocol() {
        let cfg = config(500, 3, PrefFamily::L, Scenario::L2);
        let inst = generate(&cfg);
        assert_eq!(inst.regions.len(), 500);
        for r in &inst.regions {
            assert!(r.radius > 0.05 && r.radius < 0.25);
            assert!(r.weight > 0.0 && r.weight < 1.0);
            assert_eq!(r.ball_norm, NormTag::L2);
            assert_eq!(r.transport_norm, NormTag::L2);
        }
        for p in &inst.prefs {
            let PreferenceSpec::Linear { gamma, gamma0 } = p else {
                panic!("expected linear preferences")
            };
            assert!((1.0..=10.0).contains(gamma0));
            assert!(gamma.iter().all(|g| (1.0..=10.0).contains(&g.abs())));
        }
    }

    #[test]
    fn mixed_scenario_norm_frequencies_roughly_uniform() {
        let cfg = config(2500, 11, PrefFamily::L, Scenario::Mixed);
        let inst = generate(&cfg);
        let mut counts = [0usize; 4];
        for r in &inst.regions {
            let ix = match r.ball_norm {
                NormTag::L1 => 0,
                NormTag::L2 => 1,
                NormTag::L3 => 2,
                NormTag::L4 => 3,
                NormTag::LInf => unreachable!("mixed never draws the max norm"),
            };
            counts[ix] += 1;
        }
        // χ² against uniform over 4 categories, 3 dof; 16.27 is the 0.1%
        // critical value.
        let expected = 2500.0 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < 16.27, "chi2 {chi2}, counts {counts:?}");
    }

    #[test]
    fn distance_points_land_in_region() {
        let cfg = config(40, 19, PrefFamily::D, Scenario::Mixed);
        let inst = generate(&cfg);
        for (region, pref) in inst.regions.iter().zip(&inst.prefs) {
            let PreferenceSpec::Distance {
                points, lambdas, ..
            } = pref
            else {
                panic!("expected distance preferences")
            };
            assert!((1..=3).contains(&points.len()));
            assert!((lambdas.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for b in points {
                assert!(region.contains(b, 1e-9).unwrap());
            }
        }
    }

    #[test]
    fn production_subdivisions_cover_sampled_points() {
        let cfg = config(20, 23, PrefFamily::Ces, Scenario::L2);
        let inst = generate(&cfg);
        let mut rng = Rng::new(99);
        for (region, pref) in inst.regions.iter().zip(&inst.prefs) {
            let mut hits = 0;
            while hits < 200 {
                let cand = Point(
                    region
                        .center
                        .0
                        .iter()
                        .map(|c| rng.uniform_in(c - region.radius, c + region.radius))
                        .collect(),
                );
                if !region.contains(&cand, 0.0).unwrap() {
                    continue;
                }
                hits += 1;
                assert!(evaluate(pref, &cand).is_ok(), "coverage hole");
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        let cfg = config(6, 5, PrefFamily::D, Scenario::Mixed);
        let inst = generate(&cfg);
        save(&cfg, &inst, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(
            serde_json::to_string(&loaded.instance).unwrap(),
            serde_json::to_string(&inst).unwrap()
        );
    }

    #[test]
    fn load_rejects_bad_documents() {
        // wrong schema version
        let err = from_json(r#"{"schema_version": 99}"#).unwrap_err();
        assert!(matches!(err, InstanceError::SchemaVersion(99)));

        // prefs/regions length mismatch
        let cfg = config(2, 1, PrefFamily::L, Scenario::L2);
        let inst = generate(&cfg);
        let mut file = InstanceFile {
            schema_version: SCHEMA_VERSION,
            config: cfg,
            instance: inst,
        };
        file.instance.prefs.pop();
        let text = serde_json::to_string(&file).unwrap();
        let err = from_json(&text).unwrap_err();
        assert!(matches!(err, InstanceError::Invalid(_)));
    }
}
