//! Run a scenario's pipeline, verify it, and write the artifacts.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::json;

use super::fixtures::FIXTURES;
use super::output::{circle_image, grid_csv, rectangle, Curve, Figure};
use super::scenario::{parse_scenario, Command, Scenario};
use crate::error::{Error, Result};
use crate::extension::palais_pipeline;
use crate::geom::Vector;
use crate::glue::{glue_pipeline, insert_inner_map_detailed, GluePair, GlueScenario};
use crate::linearize::local_linearize;
use crate::maps::{Bounds, Region, SmoothMap};
use crate::verify::{
    glue_suite, insert_suite, linearize_suite, palais_suite, run_suite, Check, VerificationReport,
};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_SCHEMA: u8 = 2;
pub const EXIT_PIPELINE: u8 = 3;

/// Command-line overrides of the scenario's outputs and seed.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub report: Option<PathBuf>,
    pub grid: Option<PathBuf>,
    pub figure: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: VerificationReport,
    pub exit: u8,
    pub written: Vec<PathBuf>,
}

/// Exit status for an error: schema problems are 2, everything else 3.
pub fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Schema(_) => EXIT_SCHEMA,
        _ => EXIT_PIPELINE,
    }
}

/// What a pipeline produced, ready for verification and drawing.
struct Built {
    subject: Arc<SmoothMap>,
    checks: Vec<Check>,
    parameters: serde_json::Value,
    view: Bounds,
    curves: Vec<Curve>,
}

fn padded(b: &Bounds, pad: f64) -> Bounds {
    (
        b.0.iter().map(|v| v - pad).collect(),
        b.1.iter().map(|v| v + pad).collect(),
    )
}

fn ball_bounds(c: &Vector, r: f64) -> Bounds {
    (
        c.iter().map(|v| v - r).collect(),
        c.iter().map(|v| v + r).collect(),
    )
}

fn region_curve(r: &Region) -> Option<Vec<Vector>> {
    match r {
        Region::Ball { center, radius } if center.dim() == 2 => {
            Some(circle_image(None, center, *radius))
        }
        Region::Box { lo, hi } if lo.dim() == 2 => Some(rectangle(lo, hi)),
        _ => None,
    }
}

fn build(s: &Scenario, seed: u64) -> Result<Built> {
    let size = s.suite.size();
    let two_d = s.dimension == 2;
    match s.command {
        Command::Extend => {
            let h = s.resolve_ball(s.input.as_deref().unwrap_or_default())?;
            let eps = s.eps.unwrap_or_default();
            let p = palais_pipeline(&h, eps)?;
            let checks = palais_suite(&p, seed, size)?;
            let a_box = p
                .core_set()
                .bounding_box()
                .unwrap_or_else(|| ball_bounds(&h.center, h.radius));
            let mut curves = Vec::new();
            if two_d {
                curves.push(Curve {
                    points: circle_image(None, &h.center, h.radius),
                    class: "before",
                });
                curves.push(Curve {
                    points: circle_image(Some(&p.result), &h.center, h.radius),
                    class: "after",
                });
                let reach = a_box.0.distance(&a_box.1) * 0.5;
                let mid = (&a_box.0 + &a_box.1).scale(0.5);
                curves.push(Curve {
                    points: circle_image(None, &mid, reach + eps),
                    class: "support",
                });
            }
            Ok(Built {
                parameters: json!({
                    "command": "extend",
                    "center": h.center,
                    "radius": h.radius,
                    "margin": h.margin,
                    "eps": eps,
                    "tau": p.tau,
                    "delta": p.delta,
                    "tau_halvings": p.tau_halvings,
                    "containment": p.containment,
                    "radii": p.radii,
                    "seam": p.seam,
                    "map": p.result,
                }),
                subject: Arc::new(p.result),
                checks,
                view: padded(&a_box, 2.0 * eps),
                curves,
            })
        }
        Command::Linearize => {
            let h = s.resolve_ball(s.input.as_deref().unwrap_or_default())?;
            let lin = local_linearize(&h)?;
            let checks = linearize_suite(&lin, &h, seed, size);
            let mut curves = Vec::new();
            if two_d {
                curves.push(Curve {
                    points: circle_image(None, &h.center, lin.radii.delta2),
                    class: "support",
                });
                curves.push(Curve {
                    points: circle_image(None, &h.center, lin.delta),
                    class: "before",
                });
                curves.push(Curve {
                    points: circle_image(None, &h.center, h.radius),
                    class: "before",
                });
            }
            Ok(Built {
                parameters: json!({
                    "command": "linearize",
                    "center": h.center,
                    "radius": h.radius,
                    "delta": lin.delta,
                    "radii": lin.radii,
                    "min_det": lin.min_det,
                    "halvings": lin.halvings,
                    "seam": lin.seam,
                    "map": lin.map,
                }),
                subject: Arc::new(lin.map),
                checks,
                view: padded(&ball_bounds(&h.center, h.radius), 0.1 * h.radius),
                curves,
            })
        }
        Command::Glue => {
            let u = s.region.clone().unwrap_or(Region::All);
            let pairs = s
                .pairs
                .iter()
                .map(|p| -> Result<GluePair> {
                    Ok(GluePair {
                        source: s.resolve_ball(&p.source)?,
                        target: s.resolve_ball(&p.target)?,
                        map: s.resolve_map(&p.map)?,
                        route: p.route.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let gs = GlueScenario {
                n: s.dimension,
                u: u.clone(),
                pairs,
                eps: s.eps.unwrap_or_default(),
                tolerances: s.tolerances,
            };
            let p = glue_pipeline(&gs)?;
            let checks = glue_suite(&gs, seed, size)?;
            let mut curves = Vec::new();
            if two_d {
                for pair in &gs.pairs {
                    let m = (!pair.source.map.is_identity()).then_some(&*pair.source.map);
                    curves.push(Curve {
                        points: circle_image(m, &pair.source.center, pair.source.radius),
                        class: "before",
                    });
                    let boundary = circle_image(m, &pair.source.center, pair.source.radius);
                    let after = boundary
                        .iter()
                        .map(|x| p.result.eval(x).unwrap_or_else(|_| x.clone()))
                        .collect();
                    curves.push(Curve {
                        points: after,
                        class: "after",
                    });
                }
                if let Some(c) = region_curve(&u) {
                    curves.push(Curve {
                        points: c,
                        class: "support",
                    });
                }
            }
            let view = u
                .bounding_box()
                .ok_or_else(|| Error::Schema("region: must be bounded".into()))?;
            Ok(Built {
                parameters: json!({
                    "command": "glue",
                    "eps": p.eps,
                    "source_anchors": p.sources.anchors(),
                    "target_anchors": p.targets.anchors(),
                    "routes": p.routes,
                    "map": p.result,
                }),
                subject: Arc::new(p.result),
                checks,
                view: padded(&view, 0.05 * view.0.distance(&view.1)),
                curves,
            })
        }
        Command::Insert => {
            let spec = s.insert.as_ref().expect("validated");
            let mut f = (*s.resolve_map(&spec.outer)?).clone();
            if let Some(d) = &spec.domain {
                f = f.with_domain(d.clone());
            }
            let f = Arc::new(f);
            let g = s.resolve_ball(&spec.inner)?;
            let d1 = s.resolve_ball(&spec.container)?;
            let ins = insert_inner_map_detailed(f.clone(), &g, &d1, &spec.working_region)?;
            let checks = insert_suite(&f, &g, &d1, seed, size)?;
            let mut curves = Vec::new();
            if two_d {
                curves.push(Curve {
                    points: circle_image(None, &g.center, g.radius),
                    class: "before",
                });
                curves.push(Curve {
                    points: circle_image(Some(&ins.result), &g.center, g.radius),
                    class: "after",
                });
                let m = (!d1.map.is_identity()).then_some(&*d1.map);
                curves.push(Curve {
                    points: circle_image(m, &d1.center, d1.radius),
                    class: "support",
                });
            }
            let reach = d1.radius * 1.5;
            Ok(Built {
                parameters: json!({
                    "command": "insert",
                    "eps": ins.eps,
                    "source_anchors": ins.inner.sources.anchors(),
                    "target_anchors": ins.inner.targets.anchors(),
                    "map": ins.result,
                }),
                subject: Arc::new(ins.result),
                checks,
                view: ball_bounds(&d1.center, reach),
                curves,
            })
        }
        Command::Verify => {
            let subject = s.resolve_map(s.subject.as_deref().unwrap_or_default())?;
            Ok(Built {
                parameters: json!({ "command": "verify", "map": *subject }),
                checks: Vec::new(),
                view: ball_bounds(&Vector::zeros(s.dimension), 2.0),
                curves: Vec::new(),
                subject,
            })
        }
        Command::Demo => Err(Error::Schema(
            "command: demo runs the shipped fixtures, not a scenario".into(),
        )),
    }
}

fn scenario_checks(s: &Scenario, seed: Option<u64>) -> Result<Vec<Check>> {
    s.checks
        .iter()
        .map(|c| {
            let mut spec = c.spec.clone();
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let mut check = Check::new(spec);
            if let Some(r) = &c.reference {
                check = check.against(s.resolve_map(r)?);
            }
            Ok(check)
        })
        .collect()
}

fn write(path: &Path, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Schema(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    written.push(path.to_path_buf());
    Ok(())
}

pub fn report_json(report: &VerificationReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Run the scenario's pipeline and its verification suite, writing the
/// requested artifacts. A failing pipeline still yields a (partial) report.
pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<RunOutcome> {
    let seed = opts.seed.unwrap_or(s.seed);
    let report_path = opts.report.clone().or_else(|| s.outputs.report.clone());
    let grid_path = opts.grid.clone().or_else(|| s.outputs.grid.clone());
    let figure_path = opts.figure.clone().or_else(|| s.outputs.figure.clone());
    let mut written = Vec::new();

    let built = build(s, seed).and_then(|mut b| {
        b.checks.extend(scenario_checks(s, opts.seed)?);
        Ok(b)
    });
    let built = match built {
        Ok(b) => b,
        Err(e) => {
            let report = VerificationReport::pipeline_failure(s.dimension, &e);
            if let Some(p) = &report_path {
                write(p, &report_json(&report), &mut written)?;
            }
            return Ok(RunOutcome {
                report,
                exit: exit_code(&e),
                written,
            });
        }
    };

    let report = run_suite(&built.subject, &built.checks).with_parameters(built.parameters);
    if let Some(p) = &report_path {
        write(p, &report_json(&report), &mut written)?;
    }
    if let Some(p) = &grid_path {
        let per_axis = s
            .outputs
            .grid_per_axis
            .unwrap_or(if s.dimension == 2 { 41 } else { 11 });
        write(
            p,
            &grid_csv(&built.subject, &built.view, per_axis),
            &mut written,
        )?;
    }
    if let (Some(p), true) = (&figure_path, s.dimension == 2) {
        let fig = Figure {
            map: &built.subject,
            bounds: built.view.clone(),
            lines: 24,
            curves: built.curves,
        };
        write(p, &fig.to_svg(), &mut written)?;
    }
    let exit = if report.verdict {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    };
    Ok(RunOutcome {
        report,
        exit,
        written,
    })
}

/// Run the scenario's pipeline and return the constructed map, without
/// verifying it.
pub fn build_map(s: &Scenario) -> Result<Arc<SmoothMap>> {
    build(s, s.seed).map(|b| b.subject)
}

/// Parse and run a scenario file.
pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let text =
        std::fs::read(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    run_scenario(&parse_scenario(&text)?, opts)
}

#[derive(Debug, Clone)]
pub struct DemoEntry {
    pub name: &'static str,
    pub exit: u8,
    pub report: VerificationReport,
}

/// Run every shipped worked example. Reports go to `dir/<name>.json` when a
/// directory is given.
pub fn run_demo(dir: Option<&Path>, seed: Option<u64>) -> Result<Vec<DemoEntry>> {
    let mut out = Vec::new();
    for (name, text) in FIXTURES {
        let s = parse_scenario(text.as_bytes()).map_err(|e| e.at(*name))?;
        let opts = RunOptions {
            report: dir.map(|d| d.join(format!("{name}.json"))),
            seed,
            ..Default::default()
        };
        let r = run_scenario(&s, &opts)?;
        out.push(DemoEntry {
            name,
            exit: r.exit,
            report: r.report,
        });
    }
    Ok(out)
}
