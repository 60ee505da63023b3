//! Slow reference implementations and random instance generators used to
//! cross-check the fast paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constraints::{
    box_constraints, flocking_constraint, lemma1_slack, lemma2_slack, lemma3_infeasible, lemma3_slack,
    polytope_vertices, predator_constraint, wall_control_constraints, ConstraintTag,
};
use crate::geometry::delaunay_edges;
use crate::solver::{grid_oracle, objective, solve_control};
use crate::{
    ControlConstraint, CornerState, Point2, RectDomain, RelativeState, SafetyParams, SolverConfig, SpeedObjective, Vec2,
};

/// Grid side used by the solver comparison.
pub const SOLVER_GRID: usize = 201;
/// Allowed solver excess over the grid optimum.
pub const SOLVER_TOLERANCE: f64 = 1e-4;
/// Grid side used by the lemma comparison.
pub const LEMMA_GRID: usize = 401;
/// Lemma instances this close to the decision boundary are skipped.
pub const LEMMA_BOUNDARY_BAND: f64 = 1e-6;

const RELATIVE_ZERO: f64 = 1e-12;

fn det3(m: [[f64; 3]; 3]) -> ([f64; 6], f64) {
    let terms = [
        m[0][0] * m[1][1] * m[2][2],
        m[0][1] * m[1][2] * m[2][0],
        m[0][2] * m[1][0] * m[2][1],
        -m[0][2] * m[1][1] * m[2][0],
        -m[0][0] * m[1][2] * m[2][1],
        -m[0][1] * m[1][0] * m[2][2],
    ];
    (terms, terms.iter().sum())
}

/// Signed determinant and an error scale.
fn det3_scaled(m: [[f64; 3]; 3]) -> (f64, f64) {
    let (terms, det) = det3(m);
    (det, terms.iter().map(|t| t.abs()).sum())
}

fn orientation(a: Point2, b: Point2, c: Point2) -> (f64, f64) {
    det3_scaled([[a.x, a.y, 1.0], [b.x, b.y, 1.0], [c.x, c.y, 1.0]])
}

fn significant((value, scale): (f64, f64)) -> f64 {
    if value.abs() > RELATIVE_ZERO * scale {
        value
    } else {
        0.0
    }
}

/// Sign of the lifted determinant `|x y x²+y² 1|` over rows `a, b, c, d`
/// (positive iff `d` is inside the circle through CCW `a, b, c`), resolved
/// on ties by raising the lifted coordinate of each point by an
/// infinitesimal that is larger for smaller indices.
fn perturbed_in_circle(pts: &[Point2], rows: [usize; 4]) -> f64 {
    let lift = |i: usize| [pts[i].x, pts[i].y, pts[i].x * pts[i].x + pts[i].y * pts[i].y];
    let lifted = rows.map(lift);
    // Cofactor of the lifted entry in row r: (−1)^r times the minor on
    // columns (x, y, 1).
    let cofactor = |r: usize| {
        let mut minor = [[0.0; 3]; 3];
        for (k, row) in (0..4).filter(|&k| k != r).enumerate() {
            minor[k] = [lifted[row][0], lifted[row][1], 1.0];
        }
        let (m, scale) = det3_scaled(minor);
        if r.is_multiple_of(2) {
            (m, scale)
        } else {
            (-m, scale)
        }
    };
    let cofactors: [(f64, f64); 4] = [cofactor(0), cofactor(1), cofactor(2), cofactor(3)];
    let det: f64 = (0..4).map(|r| lifted[r][2] * cofactors[r].0).sum();
    let scale: f64 = (0..4)
        .map(|r| (lifted[r][2] * cofactors[r].0).abs() + lifted[r][2].abs() * cofactors[r].1)
        .sum();
    let exact = significant((det, scale));
    if exact != 0.0 {
        return exact;
    }
    let mut order = [0, 1, 2, 3];
    order.sort_by_key(|&r| rows[r]);
    order
        .iter()
        .map(|&r| significant(cofactors[r]))
        .find(|&c| c != 0.0)
        .unwrap_or(0.0)
}

/// Delaunay edges by testing every triangle's circumcircle against every
/// other point. Point sets without a proper triangle become a path in
/// lexicographic order.
pub fn brute_force_delaunay(pts: &[Point2]) -> Vec<(usize, usize)> {
    let n = pts.len();
    let mut edges = std::collections::BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let o = significant(orientation(pts[i], pts[j], pts[k]));
                if o == 0.0 {
                    continue;
                }
                let (a, b, c) = if o > 0.0 { (i, j, k) } else { (i, k, j) };
                if (0..n)
                    .filter(|&l| l != i && l != j && l != k)
                    .all(|l| perturbed_in_circle(pts, [a, b, c, l]) < 0.0)
                {
                    edges.extend([(i, j), (i, k), (j, k)]);
                }
            }
        }
    }
    if edges.is_empty() && n >= 2 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&p, &q| pts[p].x.total_cmp(&pts[q].x).then(pts[p].y.total_cmp(&pts[q].y)));
        edges.extend(order.windows(2).map(|w| (w[0].min(w[1]), w[0].max(w[1]))));
    }
    edges.into_iter().collect()
}

/// Whether any point of a `resolution × resolution` grid over the control
/// box satisfies every row.
pub fn grid_feasible(constraints: &[ControlConstraint], u_max: f64, resolution: usize) -> bool {
    let h = 2.0 * u_max / (resolution - 1) as f64;
    (0..resolution).any(|i| {
        (0..resolution).any(|j| {
            let u = Vec2::new(-u_max + i as f64 * h, -u_max + j as f64 * h);
            constraints.iter().all(|c| c.residual(u) <= 1e-12)
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub case: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub name: &'static str,
    pub checked: usize,
    pub skipped: usize,
    /// Cases where the reference reported infeasibility.
    pub positives: usize,
    pub mismatches: Vec<Mismatch>,
}

impl OracleReport {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checked: 0,
            skipped: 0,
            positives: 0,
            mismatches: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.mismatches.is_empty() && self.checked > 0
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Random point sets of every size in `sizes`, `per_size` sets each,
/// compared edge for edge against the brute-force oracle.
pub fn check_delaunay(seed: u64, sizes: std::ops::RangeInclusive<usize>, per_size: usize) -> OracleReport {
    let mut rng = rng(seed, 11);
    let mut report = OracleReport::new("delaunay");
    for n in sizes {
        for _ in 0..per_size {
            let pts: Vec<Point2> = (0..n).map(|_| Point2::new(rng.gen(), rng.gen())).collect();
            let case = report.checked;
            report.checked += 1;
            let expected = brute_force_delaunay(&pts);
            match delaunay_edges(&pts) {
                Ok(g) if g.edges().eq(expected.iter().copied()) => {}
                Ok(g) => report.mismatches.push(Mismatch {
                    case,
                    detail: format!("n={n}: {:?} != {expected:?}", g.edge_set()),
                }),
                Err(e) => report.mismatches.push(Mismatch {
                    case,
                    detail: format!("n={n}: {e}"),
                }),
            }
        }
    }
    report
}

/// A boid sitting on both stopping boundaries of one corner of a square
/// domain, moving into both walls, plus flocking and predator offsets
/// outside their radii.
#[derive(Debug, Clone)]
pub struct LemmaCase {
    pub corner: CornerState,
    pub domain: RectDomain,
    pub flock: RelativeState,
    pub predator: RelativeState,
}

/// Values of `alpha` for which `u_max / alpha` lands on the lemma grid.
const GRID_ALIGNED_ALPHAS: [f64; 6] = [1.0, 1.25, 2.0, 2.5, 4.0, 5.0];

pub fn random_lemma_case(rng: &mut impl Rng) -> LemmaCase {
    let alpha = GRID_ALIGNED_ALPHAS[rng.gen_range(0..GRID_ALIGNED_ALPHAS.len())];
    let u_max = rng.gen_range(0.05..0.2);
    let params = SafetyParams::new(alpha, u_max, 0.01).expect("valid parameters");
    let length = rng.gen_range(2.0..8.0);
    let domain = RectDomain::square(length).expect("valid domain");
    let walls = domain.walls();
    let k = rng.gen_range(0..4);
    let pair = [walls[k], walls[(k + 1) % 4]];
    let (n1, n2) = (pair[0].normal(), pair[1].normal());

    let half = length / 2.0;
    let top = (0.8 * half * u_max / alpha).sqrt().min(0.25);
    let (s1, s2) = (rng.gen_range(0.005..top), rng.gen_range(0.005..top));
    let velocity = n1 * s1 + n2 * s2;
    let stop = |s: f64| alpha * s * s / (2.0 * u_max);
    let position = n1 * (half - stop(s1)) + n2 * (half - stop(s2));

    let relative = |rng: &mut dyn rand::RngCore, radius: f64| {
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let dist = radius * rng.gen_range(1.01..4.0);
        let rate_angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let rate = Vec2::new(rate_angle.cos(), rate_angle.sin()) * rng.gen_range(0.01..0.4);
        RelativeState {
            offset: Vec2::new(angle.cos(), angle.sin()) * dist,
            rate,
            radius,
        }
    };
    let flock = relative(rng, 0.025);
    let predator = relative(rng, 0.25);
    LemmaCase {
        corner: CornerState {
            position,
            velocity,
            walls: pair,
            params,
        },
        domain,
        flock,
        predator,
    }
}

impl LemmaCase {
    fn wall_rows(&self) -> Vec<ControlConstraint> {
        let c = &self.corner;
        wall_control_constraints(c.position, c.velocity, &self.domain, &c.params).expect("state on the boundary")
    }

    fn flock_row(&self) -> ControlConstraint {
        flocking_constraint(self.flock.offset, self.flock.rate, self.corner.params.u_max).expect("nonzero rate")
    }

    fn predator_row(&self) -> ControlConstraint {
        predator_constraint(self.predator.offset, self.predator.rate, self.corner.params.u_max).expect("nonzero rate")
    }

    /// Grid verdicts for the flocking, predator and joint problems.
    pub fn grid_infeasible(&self, resolution: usize) -> [bool; 3] {
        let u_max = self.corner.params.u_max;
        let with = |extra: &[ControlConstraint]| {
            let mut rows = self.wall_rows();
            rows.extend(box_constraints(u_max));
            rows.extend_from_slice(extra);
            !grid_feasible(&rows, u_max, resolution)
        };
        [
            with(&[self.flock_row()]),
            with(&[self.predator_row()]),
            with(&[self.flock_row(), self.predator_row()]),
        ]
    }
}

/// Closed-form lemma predicates against grid feasibility on `cases`
/// random corner states per lemma.
pub fn check_lemmas(seed: u64, cases: usize, resolution: usize) -> [OracleReport; 3] {
    let mut rng = rng(seed, 12);
    let mut reports = [
        OracleReport::new("lemma1"),
        OracleReport::new("lemma2"),
        OracleReport::new("lemma3"),
    ];
    let mut attempts = 0;
    while reports.iter().any(|r| r.checked < cases) && attempts < 100 * cases {
        attempts += 1;
        let case = random_lemma_case(&mut rng);
        let c = &case.corner;
        let slacks = [
            lemma1_slack(c, &case.flock).expect("premise holds"),
            lemma2_slack(c, &case.predator).expect("premise holds"),
            lemma3_slack(c, &case.flock, &case.predator).expect("premise holds"),
        ];
        let closed = [
            slacks[0] < 0.0,
            slacks[1] < 0.0,
            lemma3_infeasible(c, &case.flock, &case.predator).expect("premise holds"),
        ];
        let grid = case.grid_infeasible(resolution);
        for k in 0..3 {
            let report = &mut reports[k];
            if report.checked >= cases {
                continue;
            }
            if slacks[k].abs() <= LEMMA_BOUNDARY_BAND {
                report.skipped += 1;
                continue;
            }
            let id = report.checked;
            report.checked += 1;
            report.positives += usize::from(grid[k]);
            if closed[k] != grid[k] {
                report.mismatches.push(Mismatch {
                    case: id,
                    detail: format!("closed form {} vs grid {} (slack {:e})", closed[k], grid[k], slacks[k]),
                });
            }
        }
    }
    reports
}

/// A speed-tracking problem with up to three extra half-planes, all passing
/// strictly outside a common interior point.
#[derive(Debug, Clone)]
pub struct SolverCase {
    pub objective: SpeedObjective,
    pub constraints: Vec<ControlConstraint>,
    pub u_max: f64,
}

pub fn random_solver_case(rng: &mut impl Rng, v_star: f64, u_max: f64, dt: f64) -> SolverCase {
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let v_current = Vec2::new(angle.cos(), angle.sin()) * rng.gen_range(0.0..=2.0 * v_star);
    let interior = Vec2::new(rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8)) * u_max;
    let constraints = (0..rng.gen_range(0..=3))
        .map(|_| {
            let t = rng.gen_range(0.0..std::f64::consts::TAU);
            let a = Vec2::new(t.cos(), t.sin()) * rng.gen_range(0.5..2.0);
            let c = a.dot(interior) + rng.gen_range(0.02..0.2) * u_max;
            ControlConstraint {
                a,
                c,
                tag: ConstraintTag::Flocking,
            }
        })
        .collect();
    SolverCase {
        objective: SpeedObjective { v_current, v_star, dt },
        constraints,
        u_max,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    pub report: OracleReport,
    /// Largest `solver cost − grid cost` seen.
    pub max_excess: f64,
}

/// `solve_control` against the grid optimum on `instances` random cases.
pub fn check_solver(seed: u64, instances: usize, resolution: usize, tolerance: f64) -> SolverReport {
    let mut rng = rng(seed, 13);
    let mut report = OracleReport::new("solver");
    let mut max_excess = f64::NEG_INFINITY;
    for case_id in 0..instances {
        let case = random_solver_case(&mut rng, 0.125, 0.1, 0.05);
        report.checked += 1;
        let vertices = polytope_vertices(&case.constraints, case.u_max);
        let cfg = SolverConfig::for_actuation(case.u_max);
        let solved = solve_control(&case.objective, &vertices, &cfg, None);
        let grid = grid_oracle(&case.objective, &case.constraints, case.u_max, resolution);
        let (u, (_, grid_cost)) = match (solved, grid) {
            (Ok(u), Some(g)) => (u, g),
            (s, g) => {
                report.mismatches.push(Mismatch {
                    case: case_id,
                    detail: format!("solver {s:?}, grid {g:?}"),
                });
                continue;
            }
        };
        let cost = objective(u, &case.objective);
        let excess = cost - grid_cost;
        max_excess = max_excess.max(excess);
        let feasible = u.norm_inf() <= case.u_max + 1e-12 && case.constraints.iter().all(|c| c.is_satisfied(u, 1e-9));
        if excess > tolerance || !feasible {
            report.mismatches.push(Mismatch {
                case: case_id,
                detail: format!("u={u:?} cost {cost:e} grid {grid_cost:e} feasible {feasible}"),
            });
        }
    }
    SolverReport { report, max_excess }
}
