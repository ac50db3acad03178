//! SVG rendering of instances and solutions: region outlines as polyline
//! approximations of the norm balls, preference heat shading for nonzero
//! thresholds, entry points as dark red triangles, facilities as black
//! stars, and assignment segments.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::geometry::{eval_norm, Region};
use crate::model::{Instance, Solution};
use crate::prefs::{NormalizedPreference, PreferenceSpec};

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("plotting supports planar instances only (d = {0})")]
    NotPlanar(usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

const BOUNDARY_POINTS: usize = 128;

fn boundary_polygon(region: &Region) -> Vec<[f64; 2]> {
    (0..BOUNDARY_POINTS)
        .map(|k| {
            let theta = k as f64 / BOUNDARY_POINTS as f64 * std::f64::consts::TAU;
            let dir = [theta.cos(), theta.sin()];
            let scale = region.radius / eval_norm(&dir, region.ball_norm);
            [
                region.center.0[0] + scale * dir[0],
                region.center.0[1] + scale * dir[1],
            ]
        })
        .collect()
}

/// Sutherland-Hodgman clip of a polygon against `normal·x ≤ offset`.
fn clip_halfspace(poly: &[[f64; 2]], normal: &[f64], offset: f64) -> Vec<[f64; 2]> {
    let inside = |p: &[f64; 2]| normal[0] * p[0] + normal[1] * p[1] <= offset + 1e-12;
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let cur = poly[i];
        let nxt = poly[(i + 1) % poly.len()];
        let (ci, ni) = (inside(&cur), inside(&nxt));
        if ci {
            out.push(cur);
        }
        if ci != ni {
            let dc = normal[0] * cur[0] + normal[1] * cur[1] - offset;
            let dn = normal[0] * nxt[0] + normal[1] * nxt[1] - offset;
            let t = dc / (dc - dn);
            out.push([cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])]);
        }
    }
    out
}

/// Light-to-dark blue ramp over [0, 1].
fn heat_color(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + v * (b - a)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(247.0, 8.0), lerp(251.0, 48.0), lerp(255.0, 107.0))
}

struct Frame {
    min: [f64; 2],
    scale: f64,
    height: f64,
}

impl Frame {
    fn to_svg(&self, p: &[f64]) -> (f64, f64) {
        (
            (p[0] - self.min[0]) * self.scale + 20.0,
            self.height - ((p[1] - self.min[1]) * self.scale + 20.0),
        )
    }
}

fn polygon_attr(frame: &Frame, poly: &[[f64; 2]]) -> String {
    poly.iter()
        .map(|p| {
            let (x, y) = frame.to_svg(p);
            format!("{x:.2},{y:.2}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Render an instance (and optionally its solution) as an SVG file.
/// Preference shading needs normalization data; pass `None` to skip it.
pub fn plot_solution(
    instance: &Instance,
    solution: Option<&Solution>,
    norm_prefs: Option<&[NormalizedPreference]>,
    path: &Path,
) -> Result<(), PlotError> {
    if instance.dimension != 2 {
        return Err(PlotError::NotPlanar(instance.dimension));
    }
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    let mut extend = |p: &[f64]| {
        for k in 0..2 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    };
    for r in &instance.regions {
        let (lo, hi) = r.enclosing_box();
        extend(&lo);
        extend(&hi);
    }
    if let Some(sol) = solution {
        for f in &sol.facilities {
            extend(&f.0);
        }
    }
    let span = (max[0] - min[0]).max(max[1] - min[1]).max(1e-6);
    let scale = 600.0 / span;
    let width = (max[0] - min[0]) * scale + 40.0;
    let height = (max[1] - min[1]) * scale + 40.0;
    let frame = Frame { min, scale, height };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    // Heat shading underneath the outlines.
    if instance.threshold > 0.0 {
        if let Some(nps) = norm_prefs {
            for (region, np) in instance.regions.iter().zip(nps) {
                let poly = boundary_polygon(region);
                match &np.spec {
                    PreferenceSpec::Production(p) => {
                        // Constant per cell combination: clip the ball
                        // polygon by the combination's halfspaces.
                        for combo in np.combos.iter().filter(|c| c.full_dim()) {
                            let mut piece = poly.clone();
                            for (f, &l) in combo.cells.iter().enumerate() {
                                for h in &p.factors[f].cells[l].halfspaces {
                                    piece = clip_halfspace(&piece, &h.normal, h.offset);
                                    if piece.is_empty() {
                                        break;
                                    }
                                }
                            }
                            if piece.len() >= 3 {
                                let v = (combo.value - np.lb) / (np.ub - np.lb);
                                let _ = writeln!(
                                    svg,
                                    r#"<polygon class="heat" points="{}" fill="{}" fill-opacity="0.6"/>"#,
                                    polygon_attr(&frame, &piece),
                                    heat_color(v)
                                );
                            }
                        }
                    }
                    _ => {
                        // Gradient sampling: a small grid of shaded dots.
                        let (lo, hi) = region.enclosing_box();
                        let steps = 18;
                        for iy in 0..steps {
                            for ix in 0..steps {
                                let pt = crate::geometry::Point(vec![
                                    lo[0] + (ix as f64 + 0.5) / steps as f64 * (hi[0] - lo[0]),
                                    lo[1] + (iy as f64 + 0.5) / steps as f64 * (hi[1] - lo[1]),
                                ]);
                                if !region.contains(&pt, 0.0).unwrap_or(false) {
                                    continue;
                                }
                                if let Ok(v) = np.evaluate_normalized(&pt) {
                                    let (x, y) = frame.to_svg(&pt.0);
                                    let r = region.radius * scale / steps as f64;
                                    let _ = writeln!(
                                        svg,
                                        r#"<circle class="heat" cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="{}" fill-opacity="0.55"/>"#,
                                        heat_color(v)
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    for region in &instance.regions {
        let poly = boundary_polygon(region);
        let _ = writeln!(
            svg,
            r##"<polygon class="region" points="{}" fill="none" stroke="#444444" stroke-width="1.2"/>"##,
            polygon_attr(&frame, &poly)
        );
    }

    if let Some(sol) = solution {
        // Assignment segments first so markers draw on top.
        for (i, a) in sol.entries.iter().enumerate() {
            let x = &sol.facilities[sol.assignment[i]];
            let (x1, y1) = frame.to_svg(&a.0);
            let (x2, y2) = frame.to_svg(&x.0);
            let _ = writeln!(
                svg,
                r##"<line class="assign" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#999999" stroke-width="0.8" stroke-dasharray="4 3"/>"##
            );
        }
        // Shared-marker ring around collocated entry points.
        for &(i, j) in &sol.collocated {
            for idx in [i, j] {
                let (cx, cy) = frame.to_svg(&sol.entries[idx].0);
                let _ = writeln!(
                    svg,
                    r##"<circle class="shared" cx="{cx:.2}" cy="{cy:.2}" r="9" fill="none" stroke="#8b0000" stroke-width="1.0"/>"##
                );
            }
        }
        for a in &sol.entries {
            let (cx, cy) = frame.to_svg(&a.0);
            let s = 6.0;
            let _ = writeln!(
                svg,
                r##"<polygon class="entry" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="#8b0000"/>"##,
                cx,
                cy - s,
                cx - 0.866 * s,
                cy + 0.5 * s,
                cx + 0.866 * s,
                cy + 0.5 * s
            );
        }
        for xf in &sol.facilities {
            let (cx, cy) = frame.to_svg(&xf.0);
            let mut pts = String::new();
            for k in 0..10 {
                let r = if k % 2 == 0 { 9.0 } else { 3.6 };
                let ang = -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / 5.0;
                let _ = write!(pts, "{:.2},{:.2} ", cx + r * ang.cos(), cy + r * ang.sin());
            }
            let _ = writeln!(
                svg,
                r##"<polygon class="facility" points="{}" fill="#000000"/>"##,
                pts.trim_end()
            );
        }
    }

    let _ = writeln!(svg, "</svg>");
    fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{NormTag, Point};
    use crate::model::SolutionStatus;

    fn instance3() -> Instance {
        let regions = vec![
            Region::ball(Point(vec![0.0, 0.0]), 0.5, NormTag::L1, 1.0),
            Region::ball(Point(vec![3.0, 0.0]), 0.5, NormTag::L2, 1.0),
            Region::ball(Point(vec![1.5, 2.0]), 0.5, NormTag::L3, 1.0),
        ];
        Instance {
            prefs: regions
                .iter()
                .map(|_| PreferenceSpec::Linear {
                    gamma: vec![1.0, 0.0],
                    gamma0: 0.0,
                })
                .collect(),
            regions,
            p: 1,
            threshold: 0.0,
            collocation: false,
            dimension: 2,
            scenario: "mixed".into(),
            pref_family: "L".into(),
            seed: 0,
        }
    }

    /// Minimal well-formedness check: every opened tag closes in order.
    fn assert_balanced_xml(text: &str) {
        let mut stack: Vec<String> = Vec::new();
        for raw in text.split('<').skip(1) {
            let tag_end = raw.find(['>', ' ', '/']).unwrap();
            let name = &raw[..tag_end];
            let element = raw.split('>').next().unwrap();
            if raw.starts_with('/') {
                let open = stack.pop().expect("close without open");
                assert_eq!(open, raw[1..].split('>').next().unwrap().trim());
            } else if !element.ends_with('/') {
                stack.push(name.to_string());
            }
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
    }

    #[test]
    fn solved_instance_has_all_markers() {
        let inst = instance3();
        let sol = Solution {
            status: SolutionStatus::Optimal,
            facilities: vec![Point(vec![1.5, 0.7])],
            entries: vec![
                Point(vec![0.4, 0.1]),
                Point(vec![2.6, 0.1]),
                Point(vec![1.5, 1.5]),
            ],
            assignment: vec![0, 0, 0],
            collocated: vec![],
            objective: 3.0,
            solver_objective: 3.0,
            mip_gap: 0.0,
            wall_time: 0.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        plot_solution(&inst, Some(&sol), None, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_balanced_xml(&text);
        assert_eq!(text.matches(r#"class="region""#).count(), 3);
        assert_eq!(text.matches(r#"class="entry""#).count(), 3);
        assert_eq!(text.matches(r#"class="facility""#).count(), 1);
    }

    #[test]
    fn collocated_pair_gets_shared_marker() {
        let mut inst = instance3();
        inst.collocation = true;
        let sol = Solution {
            status: SolutionStatus::Optimal,
            facilities: vec![Point(vec![1.5, 0.7])],
            entries: vec![
                Point(vec![0.4, 0.1]),
                Point(vec![0.4, 0.1]),
                Point(vec![1.5, 1.5]),
            ],
            assignment: vec![0, 0, 0],
            collocated: vec![(1, 0)],
            objective: 2.0,
            solver_objective: 2.0,
            mip_gap: 0.0,
            wall_time: 0.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        plot_solution(&inst, Some(&sol), None, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches(r#"class="shared""#).count(), 2);
    }

    #[test]
    fn unsolved_instance_plots_regions_only() {
        let inst = instance3();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        plot_solution(&inst, None, None, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_balanced_xml(&text);
        assert_eq!(text.matches(r#"class="region""#).count(), 3);
        assert_eq!(text.matches(r#"class="entry""#).count(), 0);
    }

    #[test]
    fn non_planar_rejected() {
        let mut inst = instance3();
        inst.dimension = 3;
        let dir = tempfile::tempdir().unwrap();
        let err = plot_solution(&inst, None, None, &dir.path().join("x.svg")).unwrap_err();
        assert!(matches!(err, PlotError::NotPlanar(3)));
    }
}
