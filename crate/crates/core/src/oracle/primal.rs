//! Primal DRO risk `sup { E_Q[l] : D_beta(Q || P) <= rho }` computed without
//! the dual, for checking it.

use crate::risk::CressieReadSpec;

use super::{DiscreteDistribution, OracleError};

/// Largest support the brute-force oracle accepts.
pub const MAX_BRUTEFORCE_SUPPORT: usize = 6;

const RAY_BISECTIONS: usize = 64;
const REFINE_MIN_STEP: f64 = 1e-10;
const REFINE_MAX_EVALS: usize = 200_000;
const MIN_DIRECTION: f64 = 1e-7;

/// Exact CVaR: the mean of the worst `alpha` mass, splitting the boundary atom.
pub fn cvar_primal_exact(p: &DiscreteDistribution, alpha: f64) -> Result<f64, OracleError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(OracleError::Domain(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let mut remaining = alpha;
    let mut acc = 0.0;
    for (l, m) in p.atoms().collect::<Vec<_>>().into_iter().rev() {
        let take = m.min(remaining);
        acc += take * l;
        remaining -= take;
        if remaining <= 0.0 {
            break;
        }
    }
    // remaining is only positive here through rounding of the masses.
    Ok(acc / (alpha - remaining.max(0.0)))
}

/// Grid resolution used when none is given: fine enough for `1e-3` accuracy
/// after refinement, coarse enough that six atoms stay cheap.
pub fn default_resolution(support: usize) -> usize {
    match support {
        0..=3 => 200,
        4 => 40,
        5 => 16,
        _ => 10,
    }
}

/// Maximizes `E_Q[l]` over the divergence ball around `P` by brute force.
///
/// Candidates are reached along rays: for a face `S` of the simplex (the
/// atoms `Q` may charge) and a point `R` of that face, `Q = C + t (R - C)`
/// where `C` is `P` conditioned on `S` and `t` is pushed as far as the ball
/// and positivity allow. A grid over the full simplex with `resolution`
/// subdivisions picks the starting direction; each face is then refined by a
/// pattern search. Every evaluated `Q` is feasible, so the result never
/// exceeds the true supremum.
///
/// For `beta = inf` the ball is the box `q_i <= p_i / alpha` and the problem
/// is a linear program; its vertices (every atom empty or capped except one)
/// are enumerated instead and `resolution` is unused.
pub fn dro_primal_bruteforce(
    p: &DiscreteDistribution,
    spec: &CressieReadSpec,
    resolution: usize,
) -> Result<f64, OracleError> {
    let n = p.support_size();
    if n > MAX_BRUTEFORCE_SUPPORT {
        return Err(OracleError::SupportTooLarge {
            support: n,
            max: MAX_BRUTEFORCE_SUPPORT,
        });
    }
    if resolution == 0 {
        return Err(OracleError::Domain("resolution must be positive".into()));
    }
    let mean = p.mean();
    if spec.rho == 0.0 || n == 1 {
        return Ok(mean);
    }
    if spec.beta.is_infinite() {
        return Ok(box_vertex_max(p, spec.rho.exp()));
    }
    let ball = Ball {
        p: p.masses(),
        losses: p.losses(),
        beta: spec.beta,
        rho: spec.rho,
    };

    let full = ball.face(&vec![true; n]).expect("P lies in its own ball");
    let mut start = p.masses().to_vec();
    let mut best = mean;
    let mut counts = vec![0usize; n];
    for_each_composition(&mut counts, 0, resolution, &mut |c| {
        let r: Vec<f64> = c.iter().map(|&k| k as f64 / resolution as f64).collect();
        let v = ball.value(&full, &r);
        if v > best {
            best = v;
            start.copy_from_slice(&r);
        }
    });

    let step = 1.0 / resolution as f64;
    for mask in 1..(1usize << n) {
        let members: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
        let Some(face) = ball.face(&members) else {
            continue;
        };
        let r = face.project(&start);
        let v = ball.value(&face, &r);
        best = best.max(ball.refine(&face, r, v, step));
    }
    Ok(best)
}

/// Maximum of `E_Q[l]` over `{Q : 0 <= q_i <= cap p_i}` by enumerating
/// the vertices of that polytope.
fn box_vertex_max(p: &DiscreteDistribution, cap: f64) -> f64 {
    let (losses, masses) = (p.losses(), p.masses());
    let n = losses.len();
    let mut best = f64::NEG_INFINITY;
    for free in 0..n {
        for mask in 0..(1usize << n) {
            if mask & (1 << free) != 0 {
                continue;
            }
            let capped: f64 = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| cap * masses[i])
                .sum();
            let rest = 1.0 - capped;
            if rest < -1e-12 || rest > cap * masses[free] * (1.0 + 1e-12) {
                continue;
            }
            let value: f64 = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| cap * masses[i] * losses[i])
                .sum::<f64>()
                + rest.max(0.0) * losses[free];
            best = best.max(value);
        }
    }
    best
}

/// The atoms a candidate may charge, with `P` conditioned on them.
struct Face {
    members: Vec<usize>,
    center: Vec<f64>,
    center_mean: f64,
}

impl Face {
    /// `r` restricted to the face and renormalized, or the center if `r`
    /// puts no mass there.
    fn project(&self, r: &[f64]) -> Vec<f64> {
        let mass: f64 = self.members.iter().map(|&i| r[i]).sum();
        if mass <= 0.0 {
            return self.center.clone();
        }
        let mut out = vec![0.0; r.len()];
        for &i in &self.members {
            out[i] = r[i] / mass;
        }
        out
    }
}

/// A Cressie-Read ball of finite order around `p`.
struct Ball<'a> {
    p: &'a [f64],
    losses: &'a [f64],
    beta: f64,
    rho: f64,
}

impl Ball<'_> {
    /// The face on `members`, or `None` when no distribution supported there
    /// lies in the ball. The conditioned `P` minimizes the divergence over the
    /// face, so it is feasible iff the face is.
    fn face(&self, members: &[bool]) -> Option<Face> {
        let mass: f64 = self
            .p
            .iter()
            .zip(members)
            .filter(|(_, m)| **m)
            .map(|(p, _)| p)
            .sum();
        let center: Vec<f64> = self
            .p
            .iter()
            .zip(members)
            .map(|(p, m)| if *m { p / mass } else { 0.0 })
            .collect();
        if !self.inside(&center) {
            return None;
        }
        let center_mean = center.iter().zip(self.losses).map(|(q, l)| q * l).sum();
        Some(Face {
            members: (0..members.len()).filter(|&i| members[i]).collect(),
            center,
            center_mean,
        })
    }

    fn inside(&self, q: &[f64]) -> bool {
        self.divergence(q) <= self.rho
    }

    fn divergence(&self, q: &[f64]) -> f64 {
        let b = self.beta;
        q.iter()
            .zip(self.p)
            .map(|(q, p)| {
                let ratio = (q / p).max(0.0);
                if b == 2.0 {
                    0.5 * p * (ratio - 1.0) * (ratio - 1.0)
                } else {
                    p * (ratio.powf(b) - b * ratio + b - 1.0) / (b * (b - 1.0))
                }
            })
            .sum()
    }

    /// Best feasible `E_Q[l]` along the ray from the face center through `r`.
    fn value(&self, face: &Face, r: &[f64]) -> f64 {
        let mut u: Vec<f64> = r.iter().zip(&face.center).map(|(r, c)| r - c).collect();
        // The value depends only on the direction of u. Rounding leaves
        // sum(u) slightly off zero, which a long step would amplify, so
        // recentre on the face and ignore directions too short to resolve.
        let drift = face.members.iter().map(|&i| u[i]).sum::<f64>() / face.members.len() as f64;
        for &i in &face.members {
            u[i] -= drift;
        }
        if u.iter().all(|x| x.abs() < MIN_DIRECTION) {
            return face.center_mean;
        }
        let gain: f64 = u.iter().zip(self.losses).map(|(u, l)| u * l).sum();
        if gain <= 0.0 {
            return face.center_mean;
        }
        face.center_mean + self.max_step(&face.center, &u) * gain
    }

    /// Largest `t` with `c + t u` non-negative and inside the ball.
    fn max_step(&self, c: &[f64], u: &[f64]) -> f64 {
        let mut t_max = f64::INFINITY;
        for (ui, ci) in u.iter().zip(c) {
            if *ui < 0.0 {
                t_max = t_max.min(ci / -ui);
            }
        }
        let at = |t: f64| -> Vec<f64> { c.iter().zip(u).map(|(c, u)| c + t * u).collect() };
        if self.divergence(&at(t_max)) <= self.rho {
            return t_max;
        }
        if self.beta == 2.0 {
            // The chi-square divergence is a quadratic a t^2 + b t + d in t.
            let a: f64 = 0.5 * u.iter().zip(self.p).map(|(u, p)| u * u / p).sum::<f64>();
            let b: f64 = u
                .iter()
                .zip(c)
                .zip(self.p)
                .map(|((u, c), p)| u * c / p)
                .sum();
            let d = self.divergence(c);
            let disc = (b * b + 4.0 * a * (self.rho - d)).max(0.0);
            return ((-b + disc.sqrt()) / (2.0 * a)).clamp(0.0, t_max);
        }
        // Convex in t and feasible at t = 0, so the feasible set is an interval.
        let (mut lo, mut hi) = (0.0, t_max);
        for _ in 0..RAY_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if self.divergence(&at(mid)) <= self.rho {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Pattern search over pairwise mass moves inside the face.
    fn refine(&self, face: &Face, mut r: Vec<f64>, mut best: f64, mut step: f64) -> f64 {
        let m = &face.members;
        if m.len() < 2 {
            return best;
        }
        let mut evals = 0;
        while step >= REFINE_MIN_STEP && evals < REFINE_MAX_EVALS {
            let mut improved = false;
            for &i in m {
                for &j in m {
                    if i == j || r[j] < step {
                        continue;
                    }
                    r[i] += step;
                    r[j] -= step;
                    let v = self.value(face, &r);
                    evals += 1;
                    if v > best {
                        best = v;
                        improved = true;
                    } else {
                        r[i] -= step;
                        r[j] += step;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best
    }
}

fn for_each_composition(
    counts: &mut [usize],
    pos: usize,
    remaining: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if pos == counts.len() - 1 {
        counts[pos] = remaining;
        f(counts);
        return;
    }
    for k in 0..=remaining {
        counts[pos] = k;
        for_each_composition(counts, pos + 1, remaining - k, f);
    }
}
