use crate::risk::{f_beta, LossBatch};

use super::OracleError;

const MASS_SUM_TOL: f64 = 1e-12;

/// A finitely supported loss distribution.
///
/// Atoms are kept sorted by loss with equal losses merged and zero masses
/// dropped, so two distributions are equal iff their atom lists are.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    losses: Vec<f64>,
    masses: Vec<f64>,
}

impl DiscreteDistribution {
    /// Builds a distribution from `(loss, mass)` pairs. Masses must be
    /// non-negative and sum to one within `1e-12`; they are renormalized.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, OracleError> {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        for &(l, m) in &atoms {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(OracleError::InvalidDistribution(format!(
                    "losses must be finite and non-negative, found {l}"
                )));
            }
            if !(m >= 0.0) || !m.is_finite() {
                return Err(OracleError::InvalidDistribution(format!(
                    "masses must be finite and non-negative, found {m}"
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > MASS_SUM_TOL {
            return Err(OracleError::InvalidDistribution(format!(
                "masses sum to {total}, expected 1"
            )));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut losses: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut masses: Vec<f64> = Vec::with_capacity(atoms.len());
        for (l, m) in atoms {
            if m == 0.0 {
                continue;
            }
            match losses.last() {
                Some(&last) if last == l => *masses.last_mut().unwrap() += m,
                _ => {
                    losses.push(l);
                    masses.push(m);
                }
            }
        }
        for m in &mut masses {
            *m /= total;
        }
        Ok(Self { losses, masses })
    }

    /// Uniform distribution over the given losses (duplicates add up).
    pub fn uniform(losses: &[f64]) -> Result<Self, OracleError> {
        if losses.is_empty() {
            return Err(OracleError::InvalidDistribution("no atoms".into()));
        }
        let m = 1.0 / losses.len() as f64;
        Self::new(losses.iter().map(|&l| (l, m)))
    }

    pub fn point(loss: f64) -> Result<Self, OracleError> {
        Self::new([(loss, 1.0)])
    }

    /// Atom losses, ascending and distinct.
    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.losses.iter().copied().zip(self.masses.iter().copied())
    }

    /// Number of distinct atoms.
    pub fn support_size(&self) -> usize {
        self.losses.len()
    }

    /// Mass on the atom with exactly this loss.
    pub fn mass_at(&self, loss: f64) -> f64 {
        match self.losses.binary_search_by(|l| l.total_cmp(&loss)) {
            Ok(i) => self.masses[i],
            Err(_) => 0.0,
        }
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms().map(|(l, m)| m * f(l)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|l| l)
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.expect(|l| (l - mean) * (l - mean))
    }

    pub fn min_loss(&self) -> f64 {
        self.losses[0]
    }

    pub fn max_loss(&self) -> f64 {
        self.losses[self.losses.len() - 1]
    }

    /// The same distribution as a weighted loss batch.
    pub fn to_batch(&self) -> LossBatch {
        LossBatch::weighted(self.losses.clone(), self.masses.clone())
            .expect("a valid distribution is a valid batch")
    }

    /// Removes exactly `eps` mass from the top of the loss distribution
    /// (splitting the boundary atom) and renormalizes what is left.
    pub fn truncate_upper(&self, eps: f64) -> Result<Self, OracleError> {
        if !(0.0..1.0).contains(&eps) {
            return Err(OracleError::Domain(format!(
                "truncated mass must lie in [0, 1), got {eps}"
            )));
        }
        let mut remaining = eps;
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(self.losses.len());
        for (l, m) in self.atoms().collect::<Vec<_>>().into_iter().rev() {
            let cut = m.min(remaining);
            remaining -= cut;
            if m - cut > 0.0 {
                atoms.push((l, m - cut));
            }
        }
        let kept: f64 = atoms.iter().map(|a| a.1).sum();
        Self::new(atoms.into_iter().map(|(l, m)| (l, m / kept)))
    }
}

/// `1/2 sum |p - q|` over the union of supports.
pub fn tv_distance(p: &DiscreteDistribution, q: &DiscreteDistribution) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    let (pl, ql) = (p.losses(), q.losses());
    while i < pl.len() || j < ql.len() {
        let take_p = j == ql.len() || (i < pl.len() && pl[i] <= ql[j]);
        let take_q = i == pl.len() || (j < ql.len() && ql[j] <= pl[i]);
        let a = if take_p { p.masses()[i] } else { 0.0 };
        let b = if take_q { q.masses()[j] } else { 0.0 };
        total += (a - b).abs();
        i += take_p as usize;
        j += take_q as usize;
    }
    0.5 * total
}

/// `D_beta(Q || P) = sum_i p_i f_beta(q_i / p_i)`, `+inf` unless `Q << P`.
///
/// `beta = inf` gives the limiting divergence `log max_i q_i / p_i`, whose
/// ball of radius `-log alpha` is the CVaR uncertainty set.
pub fn cressie_read_divergence(
    q: &DiscreteDistribution,
    p: &DiscreteDistribution,
    beta: f64,
) -> Result<f64, OracleError> {
    if !(beta > 1.0) {
        return Err(OracleError::Domain(format!(
            "beta must exceed 1, got {beta}"
        )));
    }
    let p_on_q: Vec<f64> = q.losses().iter().map(|&l| p.mass_at(l)).collect();
    if p_on_q.contains(&0.0) {
        return Ok(f64::INFINITY);
    }
    if beta.is_infinite() {
        return Ok(q
            .masses()
            .iter()
            .zip(&p_on_q)
            .map(|(qm, pm)| (qm / pm).ln())
            .fold(f64::NEG_INFINITY, f64::max));
    }
    // Atoms of P outside supp(Q) contribute p * f_beta(0).
    let mut total = 0.0;
    for (l, pm) in p.atoms() {
        let ratio = q.mass_at(l) / pm;
        total += pm * f_beta(ratio, beta)?;
    }
    Ok(total)
}

/// Huber mixture `(1 - eps) P + eps P_tilde`.
pub fn huber_mix(
    p: &DiscreteDistribution,
    p_tilde: &DiscreteDistribution,
    eps: f64,
) -> Result<DiscreteDistribution, OracleError> {
    if !(0.0..0.5).contains(&eps) {
        return Err(OracleError::Domain(format!(
            "contamination level must lie in [0, 0.5), got {eps}"
        )));
    }
    DiscreteDistribution::new(
        p.atoms()
            .map(|(l, m)| (l, (1.0 - eps) * m))
            .chain(p_tilde.atoms().map(|(l, m)| (l, eps * m))),
    )
}

/// `(E_P[l^{2k}])^{1/2k}` for even order `two_k`.
pub fn empirical_moment(p: &DiscreteDistribution, two_k: u32) -> Result<f64, OracleError> {
    if two_k < 2 || !two_k.is_multiple_of(2) {
        return Err(OracleError::Domain(format!(
            "moment order must be even and at least 2, got {two_k}"
        )));
    }
    let order = f64::from(two_k);
    // Factor out the max so large losses do not overflow the raw moment.
    let scale = p.max_loss();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let raw = p.expect(|l| (l / scale).powi(two_k as i32));
    Ok(scale * raw.powf(1.0 / order))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_atoms(a: f64, b: f64) -> DiscreteDistribution {
        DiscreteDistribution::new([(0.0, a), (1.0, b)]).unwrap()
    }

    #[test]
    fn merges_and_sorts() {
        let d =
            DiscreteDistribution::new([(3.0, 0.25), (1.0, 0.25), (3.0, 0.5), (2.0, 0.0)]).unwrap();
        assert_eq!(d.losses(), &[1.0, 3.0]);
        assert_eq!(d.masses(), &[0.25, 0.75]);
        assert_eq!(d.mass_at(3.0), 0.75);
        assert_eq!(d.mass_at(2.0), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(DiscreteDistribution::new([(1.0, 0.5)]).is_err());
        assert!(DiscreteDistribution::new([(-1.0, 1.0)]).is_err());
        assert!(DiscreteDistribution::new([(1.0, 1.5), (2.0, -0.5)]).is_err());
        assert!(DiscreteDistribution::uniform(&[]).is_err());
    }

    #[test]
    fn tv_examples() {
        let p = two_atoms(0.5, 0.5);
        assert_eq!(tv_distance(&p, &p), 0.0);
        assert_abs_diff_eq!(tv_distance(&p, &two_atoms(0.9, 0.1)), 0.4, epsilon = 1e-15);
        let far = DiscreteDistribution::uniform(&[5.0, 7.0]).unwrap();
        assert_abs_diff_eq!(tv_distance(&p, &far), 1.0, epsilon = 1e-15);
        assert_eq!(tv_distance(&p, &far), tv_distance(&far, &p));
    }

    #[test]
    fn divergence_examples() {
        let p = two_atoms(0.5, 0.5);
        assert_eq!(cressie_read_divergence(&p, &p, 2.0).unwrap(), 0.0);
        // 1/2 (0.5 * 0.64 + 0.5 * 0.64)
        let q = two_atoms(0.9, 0.1);
        assert_abs_diff_eq!(
            cressie_read_divergence(&q, &p, 2.0).unwrap(),
            0.32,
            epsilon = 1e-14
        );
        let outside = DiscreteDistribution::uniform(&[0.0, 2.0]).unwrap();
        assert_eq!(
            cressie_read_divergence(&outside, &p, 2.0).unwrap(),
            f64::INFINITY
        );
        // log(0.9 / 0.5)
        assert_abs_diff_eq!(
            cressie_read_divergence(&q, &p, f64::INFINITY).unwrap(),
            1.8f64.ln(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn divergence_counts_atoms_missing_from_q() {
        // Q puts everything on one atom: p f(2) + p f(0) = 0.5*0.5 + 0.5*0.5
        let p = two_atoms(0.5, 0.5);
        let q = DiscreteDistribution::point(1.0).unwrap();
        assert_abs_diff_eq!(
            cressie_read_divergence(&q, &p, 2.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn huber_mix_examples() {
        let p = DiscreteDistribution::point(0.0).unwrap();
        let bad = DiscreteDistribution::point(1.0).unwrap();
        assert_eq!(huber_mix(&p, &bad, 0.0).unwrap(), p);
        let mixed = huber_mix(&p, &bad, 0.1).unwrap();
        assert_eq!(mixed.losses(), &[0.0, 1.0]);
        assert_abs_diff_eq!(mixed.masses()[0], 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(mixed.masses()[1], 0.1, epsilon = 1e-15);
        assert!(huber_mix(&p, &bad, 0.5).is_err());
    }

    #[test]
    fn moment_examples() {
        let c = DiscreteDistribution::point(2.5).unwrap();
        for k in [2, 4, 8] {
            assert_abs_diff_eq!(empirical_moment(&c, k).unwrap(), 2.5, epsilon = 1e-14);
        }
        let d = DiscreteDistribution::uniform(&[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(
            empirical_moment(&d, 2).unwrap(),
            2.5f64.sqrt(),
            epsilon = 1e-14
        );
        assert!(empirical_moment(&d, 3).is_err());
    }

    #[test]
    fn truncation_splits_boundary_atom() {
        let d = DiscreteDistribution::uniform(&[1.0, 3.0]).unwrap();
        let t = d.truncate_upper(0.25).unwrap();
        assert_eq!(t.losses(), &[1.0, 3.0]);
        assert_abs_diff_eq!(t.masses()[0], 2.0 / 3.0, epsilon = 1e-15);
        let whole = d.truncate_upper(0.5).unwrap();
        assert_eq!(whole.losses(), &[1.0]);
        assert_eq!(d.truncate_upper(0.0).unwrap(), d);
    }
}
