//! Seeded numerical checks of map contracts, and the reports they produce.

use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extension::PalaisPipeline;
use crate::geom::{Matrix, Vector};
use crate::glue::GlueScenario;
use crate::linearize::LinearizationResult;
use crate::maps::{lattice_in_box, BallDiffeo, Bounds, Region, SmoothMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `|S(x) − R(x)|`.
    Agreement,
    /// `|S(x) − x|`.
    IdentityOutside,
    /// `|S⁻¹(S(x)) − x|`.
    Roundtrip,
    /// Relative gap between the analytic and central-difference Jacobians.
    JacobianFd,
    /// Smallest `det DS(x)` over a lattice; passes when positive.
    Orientation,
    /// `|S(x) − R(x)|` where two pieces of a glued map overlap.
    Seam,
    /// `|S(x) − x|`, passing only on bitwise equality.
    SupportExact,
    /// `|S(x) − R(x)|` with `R` the reference, or `S` with doubled
    /// integrator steps when no reference is given.
    Refinement,
}

fn default_fd_step() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kind: CheckKind,
    pub region: Region,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

impl CheckSpec {
    pub fn new(kind: CheckKind, region: Region, samples: usize, seed: u64, tol: f64) -> CheckSpec {
        CheckSpec {
            name: None,
            kind,
            region,
            samples,
            seed,
            tol,
            fd_step: default_fd_step(),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> CheckSpec {
        self.name = Some(name.into());
        self
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Parameter("a check needs at least one sample".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Parameter(format!(
                "check tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.kind == CheckKind::JacobianFd && !(self.fd_step > 0.0) {
            return Err(Error::Parameter(
                "finite-difference step must be positive".into(),
            ));
        }
        self.region.validate()
    }
}

/// A check with the maps it runs against. `subject` overrides the suite's
/// subject when set.
#[derive(Debug, Clone)]
pub struct Check {
    pub spec: CheckSpec,
    pub subject: Option<Arc<SmoothMap>>,
    pub reference: Option<Arc<SmoothMap>>,
}

impl Check {
    pub fn new(spec: CheckSpec) -> Check {
        Check {
            spec,
            subject: None,
            reference: None,
        }
    }

    pub fn against(mut self, reference: Arc<SmoothMap>) -> Check {
        self.reference = Some(reference);
        self
    }

    pub fn on(mut self, subject: Arc<SmoothMap>) -> Check {
        self.subject = Some(subject);
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub spec: CheckSpec,
    pub passed: bool,
    pub worst_value: f64,
    pub worst_point: Option<Vector>,
    pub samples_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    /// Seconds since the Unix epoch.
    pub generated_at: u64,
    pub total_seconds: f64,
    /// Per-check wall time, in check order.
    pub check_seconds: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub dimension: usize,
    pub seeds: Vec<u64>,
    pub parameters: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub header: ReportHeader,
    pub environment: Environment,
    pub checks: Vec<CheckResult>,
    pub verdict: bool,
    /// Set when the pipeline failed before every check could run.
    #[serde(default)]
    pub partial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline_error: Option<String>,
}

impl VerificationReport {
    /// Report with everything except the timing header, for comparisons.
    pub fn without_timing(&self) -> VerificationReport {
        VerificationReport {
            header: ReportHeader::default(),
            ..self.clone()
        }
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn with_parameters(mut self, parameters: serde_json::Value) -> VerificationReport {
        self.environment.parameters = parameters;
        self
    }

    /// A report for a pipeline that failed before checks could run.
    pub fn pipeline_failure(dimension: usize, error: &Error) -> VerificationReport {
        VerificationReport {
            header: ReportHeader {
                generated_at: now(),
                ..Default::default()
            },
            environment: Environment {
                dimension,
                ..Default::default()
            },
            checks: Vec::new(),
            verdict: false,
            partial: true,
            pipeline_error: Some(error.to_string()),
        }
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Draws per sample before the region counts as starved (acceptance < 1e−4).
const MAX_DRAWS: usize = 10_000;

fn sampling_box(region: &Region) -> Result<Bounds> {
    if let Some(b) = region.bounding_box() {
        return Ok(b);
    }
    let (lo, hi) = region.feature_box().ok_or_else(|| {
        Error::Sampling("cannot sample an unbounded region without features".into())
    })?;
    let n = lo.dim();
    let pad = (0..n).map(|i| hi[i] - lo[i]).fold(0.0, f64::max).max(1.0);
    Ok((
        lo.iter().map(|v| v - pad).collect(),
        hi.iter().map(|v| v + pad).collect(),
    ))
}

/// Sample `k` of the stream `(seed, stream)`: each sample owns a disjoint
/// block of the generator, so samples can be drawn in any order.
fn draw(region: &Region, bounds: &Bounds, seed: u64, stream: u64, k: usize) -> Result<Vector> {
    let (lo, hi) = bounds;
    let n = lo.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos((k as u128) << 40);
    for _ in 0..MAX_DRAWS {
        let x: Vector = (0..n)
            .map(|i| lo[i] + (hi[i] - lo[i]) * rng.gen::<f64>())
            .collect();
        if region.contains(&x) {
            return Ok(x);
        }
    }
    Err(Error::Sampling(format!(
        "region starved the sampler after {MAX_DRAWS} draws"
    )))
}

/// Seeded points of a region.
pub fn sample_region(region: &Region, count: usize, seed: u64, stream: u64) -> Result<Vec<Vector>> {
    let bounds = sampling_box(region)?;
    (0..count)
        .into_par_iter()
        .map(|k| draw(region, &bounds, seed, stream, k))
        .collect()
}

/// Lattice points of a region, refined until about `count` fall inside.
pub fn grid_points(region: &Region, count: usize) -> Result<Vec<Vector>> {
    let (lo, hi) = sampling_box(region)?;
    let n = lo.dim();
    let mut per_axis = ((count as f64).powf(1.0 / n as f64).ceil() as usize).max(2);
    let limit = per_axis * 4;
    loop {
        let pts: Vec<Vector> = lattice_in_box(&lo, &hi, per_axis)
            .into_par_iter()
            .filter(|p| region.contains(p))
            .collect();
        if pts.len() >= count || per_axis >= limit {
            if pts.is_empty() {
                return Err(Error::Sampling(
                    "no lattice point falls in the region".into(),
                ));
            }
            return Ok(pts);
        }
        let fill = pts.len().max(1) as f64 / (per_axis as f64).powi(n as i32);
        per_axis =
            ((count as f64 / fill).powf(1.0 / n as f64).ceil() as usize).clamp(per_axis + 1, limit);
    }
}

fn fd_error(map: &SmoothMap, x: &Vector, step: f64) -> Result<f64> {
    let n = x.dim();
    let j = map.jacobian(x)?;
    let h = step * (1.0 + x.norm());
    let mut fd = Matrix::zeros(n);
    for k in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let d = (&map.eval(&xp)? - &map.eval(&xm)?).scale(0.5 / h);
        for i in 0..n {
            fd[(i, k)] = d[i];
        }
    }
    Ok((&j - &fd).max_abs() / j.max_abs().max(f64::MIN_POSITIVE))
}

/// Per-sample measurement; larger is worse, except for orientation where the
/// determinant is negated.
fn measure(
    kind: CheckKind,
    s: &SmoothMap,
    r: Option<&SmoothMap>,
    x: &Vector,
    fd_step: f64,
) -> Result<f64> {
    let need_ref =
        || r.ok_or_else(|| Error::Parameter(format!("{kind:?} check needs a reference map")));
    Ok(match kind {
        CheckKind::Agreement | CheckKind::Seam | CheckKind::Refinement => {
            s.eval(x)?.distance(&need_ref()?.eval(x)?)
        }
        CheckKind::IdentityOutside | CheckKind::SupportExact => s.eval(x)?.distance(x),
        CheckKind::Roundtrip => s.inverse(&s.eval(x)?)?.distance(x),
        CheckKind::JacobianFd => fd_error(s, x, fd_step)?,
        CheckKind::Orientation => -s.jacobian(x)?.determinant(),
    })
}

fn failure(spec: &CheckSpec, e: &Error, point: Option<Vector>, used: usize) -> CheckResult {
    CheckResult {
        spec: spec.clone(),
        passed: false,
        worst_value: f64::NAN,
        worst_point: point,
        samples_used: used,
        error: Some(e.to_string()),
    }
}

fn run_indexed(
    spec: &CheckSpec,
    subject: &SmoothMap,
    reference: Option<&SmoothMap>,
    stream: u64,
) -> CheckResult {
    if let Err(e) = spec.validate() {
        return failure(spec, &e, None, 0);
    }
    let refined;
    let reference = match (spec.kind, reference) {
        (CheckKind::Refinement, None) => {
            refined = subject.refined(2);
            Some(&refined)
        }
        (_, r) => r,
    };
    let points = if spec.kind == CheckKind::Orientation {
        grid_points(&spec.region, spec.samples)
    } else {
        sample_region(&spec.region, spec.samples, spec.seed, stream)
    };
    let points = match points {
        Ok(p) => p,
        Err(e) => return failure(spec, &e, None, 0),
    };
    let values: Vec<Result<f64>> = points
        .par_iter()
        .map(|x| measure(spec.kind, subject, reference, x, spec.fd_step))
        .collect();
    // first error or worst value, lowest index on ties
    let mut worst = f64::NEG_INFINITY;
    let mut at = None;
    for (k, v) in values.iter().enumerate() {
        match v {
            Err(e) => return failure(spec, e, Some(points[k].clone()), points.len()),
            Ok(v) if v.is_nan() => {
                return failure(
                    spec,
                    &Error::Numeric("non-finite measurement".into()),
                    Some(points[k].clone()),
                    points.len(),
                )
            }
            Ok(v) if *v > worst => {
                worst = *v;
                at = Some(k);
            }
            Ok(_) => {}
        }
    }
    let (worst_value, passed) = match spec.kind {
        CheckKind::Orientation => (-worst, -worst > 0.0),
        CheckKind::SupportExact => (worst, worst == 0.0),
        _ => (worst, worst <= spec.tol),
    };
    CheckResult {
        spec: spec.clone(),
        passed,
        worst_value,
        worst_point: at.map(|k| points[k].clone()),
        samples_used: points.len(),
        error: None,
    }
}

/// Run one check on its own stream.
pub fn run_check(
    spec: &CheckSpec,
    subject: &SmoothMap,
    reference: Option<&SmoothMap>,
) -> CheckResult {
    run_indexed(spec, subject, reference, 0)
}

/// Run every check (concurrently, never short-circuiting) and assemble the
/// report. Check `k` samples from stream `k` of its seed.
pub fn run_suite(subject: &SmoothMap, suite: &[Check]) -> VerificationReport {
    let start = Instant::now();
    let timed: Vec<(CheckResult, f64)> = suite
        .par_iter()
        .enumerate()
        .map(|(k, c)| {
            let t = Instant::now();
            let s = c.subject.as_deref().unwrap_or(subject);
            let r = run_indexed(&c.spec, s, c.reference.as_deref(), k as u64);
            (r, t.elapsed().as_secs_f64())
        })
        .collect();
    let mut seeds: Vec<u64> = suite.iter().map(|c| c.spec.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let (checks, check_seconds): (Vec<_>, Vec<_>) = timed.into_iter().unzip();
    VerificationReport {
        header: ReportHeader {
            generated_at: now(),
            total_seconds: start.elapsed().as_secs_f64(),
            check_seconds,
        },
        environment: Environment {
            dimension: subject.dim,
            seeds,
            parameters: serde_json::Value::Null,
        },
        verdict: checks.iter().all(|c| c.passed),
        checks,
        partial: false,
        pipeline_error: None,
    }
}

/// Sample counts for the standard suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteSize {
    pub samples: usize,
    pub roundtrip: usize,
    pub grid: usize,
    pub fd: usize,
    pub internal: usize,
}

impl Default for SuiteSize {
    fn default() -> Self {
        SuiteSize {
            samples: 1000,
            roundtrip: 10_000,
            grid: 10_000,
            fd: 200,
            internal: 100,
        }
    }
}

impl SuiteSize {
    /// Tenfold smaller, for quick runs.
    pub fn quick() -> SuiteSize {
        SuiteSize {
            samples: 100,
            roundtrip: 1000,
            grid: 1000,
            fd: 20,
            internal: 20,
        }
    }
}

fn spec(
    kind: CheckKind,
    name: &str,
    region: Region,
    samples: usize,
    seed: u64,
    tol: f64,
) -> CheckSpec {
    CheckSpec::new(kind, region, samples, seed, tol).named(name)
}

fn padded_box(region: &Region, pad: f64) -> Result<Region> {
    let (lo, hi) = region
        .bounding_box()
        .ok_or_else(|| Error::Sampling("region to pad must be bounded".into()))?;
    Ok(Region::Box {
        lo: lo.iter().map(|v| v - pad).collect(),
        hi: hi.iter().map(|v| v + pad).collect(),
    })
}

/// Checks for an extension: agreement on the ball, identity at distance
/// `ε` from `A`, global bijectivity and orientation, and the internal
/// identities of the construction.
pub fn palais_suite(p: &PalaisPipeline, seed: u64, size: SuiteSize) -> Result<Vec<Check>> {
    let (c, rho, eps) = (p.center().clone(), p.rho(), p.eps);
    let h = p.input.map.clone();
    let a = p.core_set();
    let far = Region::complement(Region::neighborhood(a.clone(), eps));
    let near = padded_box(&a, 2.0 * eps)?;
    let mut checks = vec![
        Check::new(spec(
            CheckKind::Agreement,
            "agrees on the ball",
            p.input.ball(),
            size.samples,
            seed,
            1e-12,
        ))
        .against(h.clone()),
        Check::new(spec(
            CheckKind::IdentityOutside,
            "identity away from A",
            far,
            size.samples,
            seed,
            1e-13,
        )),
        Check::new(spec(
            CheckKind::Roundtrip,
            "roundtrip",
            near.clone(),
            size.roundtrip,
            seed,
            1e-8,
        )),
        Check::new(spec(
            CheckKind::Orientation,
            "orientation",
            near.clone(),
            size.grid,
            seed,
            1.0,
        )),
        Check::new(spec(
            CheckKind::JacobianFd,
            "jacobian",
            near,
            size.fd,
            seed,
            1e-5,
        )),
    ];
    if let Some(s) = &p.stages {
        let tau = p.tau;
        let shell = Region::image_of(
            s.linearized.clone(),
            Region::annulus(c.clone(), rho + 2.0 * tau, rho + 3.0 * tau),
        );
        let conj = Arc::new(crate::maps::compose(vec![
            s.linearized.clone(),
            Arc::new(s.squeeze.inverted()),
            Arc::new(s.linearized.inverted()),
        ])?);
        let inside = Region::ball(c.clone(), (rho + tau) * (1.0 - 1e-12));
        let seam_inner = 0.5 * (0.5 * (rho + 3.0 * tau) + rho);
        checks.extend([
            Check::new(spec(
                CheckKind::IdentityOutside,
                "shell identity",
                shell,
                size.internal,
                seed,
                1e-10,
            ))
            .on(conj),
            Check::new(spec(
                CheckKind::Agreement,
                "interior identity",
                inside,
                size.internal,
                seed,
                1e-10,
            ))
            .on(s.global.clone())
            .against(s.linearized.clone()),
            Check::new(spec(
                CheckKind::Seam,
                "seam",
                Region::annulus(c, seam_inner, rho),
                size.internal,
                seed,
                1e-10,
            ))
            .on(s.global.clone())
            .against(h),
        ]);
    }
    Ok(checks)
}

/// Checks for a local linearization of `h`.
pub fn linearize_suite(
    r: &LinearizationResult,
    h: &BallDiffeo,
    seed: u64,
    size: SuiteSize,
) -> Vec<Check> {
    let (c, rho) = (h.center.clone(), h.radius);
    vec![
        Check::new(spec(
            CheckKind::IdentityOutside,
            "identity near the center",
            Region::ball(c.clone(), r.delta),
            size.samples,
            seed,
            1e-13,
        )),
        Check::new(spec(
            CheckKind::Agreement,
            "agrees near the boundary",
            Region::annulus(c.clone(), 0.5 * rho, rho),
            size.samples,
            seed,
            1e-12,
        ))
        .against(h.map.clone()),
        Check::new(spec(
            CheckKind::JacobianFd,
            "jacobian",
            h.ball(),
            size.fd,
            seed,
            1e-5,
        )),
        Check::new(spec(
            CheckKind::Roundtrip,
            "roundtrip",
            h.ball(),
            size.roundtrip,
            seed,
            1e-8,
        )),
        Check::new(spec(
            CheckKind::Orientation,
            "orientation",
            h.ball(),
            size.grid,
            seed,
            1.0,
        )),
    ]
}

fn ball_image(b: &BallDiffeo) -> Region {
    if b.map.is_identity() {
        b.ball()
    } else {
        Region::image_of(b.map.clone(), b.ball())
    }
}

/// Checks for a glued map: agreement on each source ball, identity outside
/// `U`, roundtrip and orientation over `U`.
pub fn glue_suite(s: &GlueScenario, seed: u64, size: SuiteSize) -> Result<Vec<Check>> {
    let mut checks: Vec<Check> = s
        .pairs
        .iter()
        .enumerate()
        .map(|(i, pair)| {
            Check::new(spec(
                CheckKind::Agreement,
                &format!("agrees on ball {i}"),
                ball_image(&pair.source),
                size.samples,
                seed,
                s.tolerances.agreement,
            ))
            .against(pair.map.clone())
        })
        .collect();
    let u_box = padded_box(&s.u, 0.0)?;
    checks.extend([
        Check::new(spec(
            CheckKind::IdentityOutside,
            "identity outside U",
            Region::complement(s.u.clone()),
            size.samples,
            seed,
            s.tolerances.outside,
        )),
        Check::new(spec(
            CheckKind::Roundtrip,
            "roundtrip",
            u_box.clone(),
            size.roundtrip,
            seed,
            s.tolerances.roundtrip,
        )),
        Check::new(spec(
            CheckKind::Orientation,
            "orientation",
            s.u.clone(),
            size.grid,
            seed,
            1.0,
        )),
    ]);
    Ok(checks)
}

/// Checks for an insertion `H = F∘Φ`: `H = G` on `D₂`, `H = F` off `D̊₁`.
pub fn insert_suite(
    f: &Arc<SmoothMap>,
    g: &BallDiffeo,
    d1: &BallDiffeo,
    seed: u64,
    size: SuiteSize,
) -> Result<Vec<Check>> {
    let outer_box = padded_box(&ball_image(d1), d1.radius)?;
    let outside = Region::Intersection {
        parts: vec![
            f.domain.clone(),
            outer_box.clone(),
            Region::complement(ball_image(d1)),
        ],
    };
    Ok(vec![
        Check::new(spec(
            CheckKind::Agreement,
            "agrees with G on D₂",
            g.ball(),
            size.samples,
            seed,
            1e-9,
        ))
        .against(g.map.clone()),
        Check::new(spec(
            CheckKind::Agreement,
            "agrees with F off D₁",
            outside,
            size.samples,
            seed,
            1e-13,
        ))
        .against(f.clone()),
        Check::new(spec(
            CheckKind::Roundtrip,
            "roundtrip",
            outer_box.clone(),
            size.roundtrip,
            seed,
            1e-7,
        )),
        Check::new(spec(
            CheckKind::Orientation,
            "orientation",
            outer_box,
            size.grid,
            seed,
            1.0,
        )),
    ])
}

/// Checks for a transport of `B̄(q, ε)` to `B̄(p, ε)`: rigid on the payload,
/// stable under step doubling, and invertible.
pub fn transport_suite(
    q: &Vector,
    p: &Vector,
    eps: f64,
    seed: u64,
    size: SuiteSize,
) -> Result<Vec<Check>> {
    let n = q.dim();
    let shift = crate::maps::Affine {
        matrix: Matrix::identity(n),
        offset: p - q,
    }
    .into_map()?;
    let scale = 1.0 + q.norm().max(p.norm());
    let hull = Region::Union {
        parts: vec![
            Region::ball(q.clone(), 2.0 * eps),
            Region::ball(p.clone(), 2.0 * eps),
        ],
    };
    let tube = padded_box(&hull, 0.0)?;
    Ok(vec![
        Check::new(spec(
            CheckKind::Agreement,
            "rigid on the payload",
            Region::ball(q.clone(), eps),
            size.samples,
            seed,
            1e-13 * scale,
        ))
        .against(Arc::new(shift)),
        Check::new(spec(
            CheckKind::Refinement,
            "step doubling",
            tube.clone(),
            size.internal,
            seed,
            1e-9,
        )),
        Check::new(spec(
            CheckKind::Roundtrip,
            "roundtrip",
            tube,
            size.samples,
            seed,
            1e-9,
        )),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{construct_builtin, Builtin};

    fn poly() -> SmoothMap {
        construct_builtin(
            2,
            Builtin::PolyPerturb {
                coef: 0.1,
                center: Vector::zeros(2),
                source: 0,
                target: 1,
            },
            Region::All,
        )
        .unwrap()
    }

    fn unit() -> Region {
        Region::ball(Vector::zeros(2), 1.0)
    }

    #[test]
    fn identity_roundtrip_is_zero() {
        let r = run_check(
            &CheckSpec::new(CheckKind::Roundtrip, unit(), 50, 1, 1e-15),
            &SmoothMap::identity(2),
            None,
        );
        assert!(r.passed);
        assert_eq!(r.worst_value, 0.0);
    }

    #[test]
    fn self_agreement_is_zero() {
        let p = poly();
        let r = run_check(
            &CheckSpec::new(CheckKind::Agreement, unit(), 50, 1, 1e-15),
            &p,
            Some(&p),
        );
        assert_eq!(r.worst_value, 0.0);
    }

    #[test]
    fn missing_reference_fails_without_panicking() {
        let r = run_check(
            &CheckSpec::new(CheckKind::Agreement, unit(), 5, 1, 1e-9),
            &poly(),
            None,
        );
        assert!(!r.passed);
        assert!(r.error.unwrap().contains("reference"));
    }

    #[test]
    fn fd_error_shrinks_with_step() {
        let p = poly();
        let x = Vector::from([0.7, -0.3]);
        let e5 = fd_error(&p, &x, 1e-5).unwrap();
        let e6 = fd_error(&p, &x, 1e-6).unwrap();
        assert!(e6 <= 1e-6);
        // quadratic map: central differences are exact up to rounding
        assert!(e5 <= 1e-7 && e6 <= 1e-7);
    }

    #[test]
    fn starved_region_reports_sampling_error() {
        let thin = Region::Union {
            parts: vec![
                Region::ball(Vector::zeros(2), 1e-4),
                Region::ball(Vector::from([100.0, 100.0]), 1e-4),
            ],
        };
        let r = run_check(
            &CheckSpec::new(CheckKind::Roundtrip, thin, 3, 1, 1e-9),
            &poly(),
            None,
        );
        assert!(!r.passed);
        assert!(r.error.unwrap().contains("starved"));
    }

    #[test]
    fn empty_suite_passes() {
        let rep = run_suite(&SmoothMap::identity(2), &[]);
        assert!(rep.verdict);
        assert!(rep.checks.is_empty());
    }

    #[test]
    fn suite_is_deterministic_and_seed_sensitive() {
        let p = poly();
        let suite = |seed| {
            vec![
                Check::new(CheckSpec::new(
                    CheckKind::Roundtrip,
                    unit(),
                    40,
                    seed,
                    1e-12,
                )),
                Check::new(CheckSpec::new(
                    CheckKind::JacobianFd,
                    unit(),
                    40,
                    seed,
                    1e-6,
                )),
                Check::new(CheckSpec::new(
                    CheckKind::Orientation,
                    unit(),
                    100,
                    seed,
                    1.0,
                )),
            ]
        };
        let a = run_suite(&p, &suite(7)).without_timing();
        let b = run_suite(&p, &suite(7)).without_timing();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = run_suite(&p, &suite(8)).without_timing();
        assert_ne!(a.checks[0].worst_point, c.checks[0].worst_point);
        assert!(a.verdict && c.verdict);
    }

    #[test]
    fn support_exact_needs_bitwise_equality() {
        let shift = crate::maps::Affine {
            matrix: Matrix::identity(2),
            offset: Vector::from([1e-15, 0.0]),
        }
        .into_map()
        .unwrap();
        let r = run_check(
            &CheckSpec::new(CheckKind::SupportExact, unit(), 10, 3, 1.0),
            &shift,
            None,
        );
        assert!(!r.passed && r.worst_value < 1e-14);
        let id = run_check(
            &CheckSpec::new(CheckKind::SupportExact, unit(), 10, 3, 1.0),
            &SmoothMap::identity(2),
            None,
        );
        assert!(id.passed);
    }
}
