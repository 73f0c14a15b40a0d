//! Entropy measures, ensemble decomposition of predictive uncertainty,
//! temperature scaling, score thresholds, and the three-way verdict that
//! separates out-of-distribution points from ambiguous and unambiguous
//! in-distribution points.

use alloc::vec::Vec;
use core::fmt;

use crate::fmath;
use crate::linalg::Matrix;
use crate::net::softmax;
use crate::special::log_sum_exp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncertaintyError {
    /// Probabilities are negative or do not sum to one.
    InvalidDistribution,
    EmptyValidation,
    EmptyInput,
    /// The MI/PE relations required by the paired-ensemble check fail.
    PreconditionViolated,
}

impl fmt::Display for UncertaintyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UncertaintyError::InvalidDistribution => write!(f, "not a probability vector"),
            UncertaintyError::EmptyValidation => write!(f, "validation set is empty"),
            UncertaintyError::EmptyInput => write!(f, "empty input"),
            UncertaintyError::PreconditionViolated => {
                write!(f, "ensemble pair does not satisfy the MI/PE preconditions")
            }
        }
    }
}

impl core::error::Error for UncertaintyError {}

/// Shannon entropy in nats, with 0 * ln 0 = 0.
pub fn entropy(p: &[f64]) -> Result<f64, UncertaintyError> {
    validate_distribution(p)?;
    Ok(entropy_unchecked(p))
}

pub(crate) fn entropy_unchecked(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &pi in p {
        if pi > 0.0 {
            h -= pi * fmath::ln(pi);
        }
    }
    h.max(0.0)
}

fn validate_distribution(p: &[f64]) -> Result<(), UncertaintyError> {
    if p.is_empty() {
        return Err(UncertaintyError::InvalidDistribution);
    }
    let mut sum = 0.0;
    for &pi in p {
        if !(pi >= -1e-12) || !pi.is_finite() {
            return Err(UncertaintyError::InvalidDistribution);
        }
        sum += pi;
    }
    if fmath::abs(sum - 1.0) > 1e-9 {
        return Err(UncertaintyError::InvalidDistribution);
    }
    Ok(())
}

/// Softmax outputs of M ensemble members over K classes, one row per member.
#[derive(Debug, Clone)]
pub struct EnsemblePrediction {
    member_probs: Matrix,
}

impl EnsemblePrediction {
    pub fn new(member_probs: Matrix) -> Result<Self, UncertaintyError> {
        if member_probs.rows() == 0 {
            return Err(UncertaintyError::EmptyInput);
        }
        for i in 0..member_probs.rows() {
            validate_distribution(member_probs.row(i))?;
        }
        Ok(EnsemblePrediction { member_probs })
    }

    #[inline]
    pub fn num_members(&self) -> usize {
        self.member_probs.rows()
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.member_probs.cols()
    }

    #[inline]
    pub fn member(&self, m: usize) -> &[f64] {
        self.member_probs.row(m)
    }

    /// Mean predictive distribution over members.
    pub fn mean_probs(&self) -> Vec<f64> {
        let k = self.num_classes();
        let m = self.num_members() as f64;
        let mut out = alloc::vec![0.0; k];
        for i in 0..self.num_members() {
            for (o, &p) in out.iter_mut().zip(self.member(i)) {
                *o += p;
            }
        }
        out.iter_mut().for_each(|v| *v /= m);
        out
    }
}

/// Entropy decomposition of an ensemble prediction: predictive entropy,
/// the disagreement term (mutual information), and the mean member entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub predictive_entropy: f64,
    pub mutual_information: f64,
    pub expected_entropy: f64,
}

/// Predictive entropy = mutual information + expected member entropy.
/// The identity is exact by construction; the returned mutual information
/// can carry rounding of order -1e-12 but is never meaningfully negative.
pub fn decompose(e: &EnsemblePrediction) -> Decomposition {
    let pe = entropy_unchecked(&e.mean_probs());
    let mut expected = 0.0;
    for m in 0..e.num_members() {
        expected += entropy_unchecked(e.member(m));
    }
    expected /= e.num_members() as f64;
    Decomposition {
        predictive_entropy: pe,
        mutual_information: pe - expected,
        expected_entropy: expected,
    }
}

/// Temperature minimizing the mean NLL of `softmax(logits / T)` on a
/// validation set, searched on [0.05, 20].
///
/// Golden-section search assumes the NLL is unimodal in T; the result is
/// cross-checked against the interval endpoints and a 400-point grid scan
/// takes over if the assumption fails.
pub fn fit_temperature(logits: &Matrix, labels: &[usize]) -> Result<f64, UncertaintyError> {
    if logits.rows() == 0 {
        return Err(UncertaintyError::EmptyValidation);
    }
    assert_eq!(logits.rows(), labels.len(), "labels/logits mismatch");
    assert!(
        labels.iter().all(|&y| y < logits.cols()),
        "label out of range"
    );
    let nll = |t: f64| mean_nll_at_temperature(logits, labels, t);

    let (lo, hi) = (0.05_f64, 20.0_f64);
    let gr = (fmath::sqrt(5.0) - 1.0) / 2.0;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let mut fc = nll(c);
    let mut fd = nll(d);
    while b - a > 1e-4 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = nll(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = nll(d);
        }
    }
    let t_golden = 0.5 * (a + b);
    let f_golden = nll(t_golden);
    if f_golden <= nll(lo) + 1e-12 && f_golden <= nll(hi) + 1e-12 {
        return Ok(t_golden);
    }
    // Unimodality violated; fall back to a grid scan.
    let mut best_t = lo;
    let mut best_f = f64::INFINITY;
    for k in 0..400 {
        let t = lo + (hi - lo) * k as f64 / 399.0;
        let f = nll(t);
        if f < best_f {
            best_f = f;
            best_t = t;
        }
    }
    Ok(best_t)
}

/// Mean NLL of the labels under `softmax(logits / T)`.
pub fn mean_nll_at_temperature(logits: &Matrix, labels: &[usize], t: f64) -> f64 {
    let mut total = 0.0;
    let mut scaled = Vec::with_capacity(logits.cols());
    for (i, &y) in labels.iter().enumerate() {
        scaled.clear();
        scaled.extend(logits.row(i).iter().map(|&v| v / t));
        let lse = log_sum_exp(&scaled).expect("non-empty logits");
        total += lse - scaled[y];
    }
    total / labels.len() as f64
}

/// Softmax probabilities of one logit row at temperature T.
pub fn probs_at_temperature(logits: &[f64], t: f64) -> Vec<f64> {
    let scaled: Vec<f64> = logits.iter().map(|&v| v / t).collect();
    softmax(&scaled)
}

/// Decision thresholds: a log-density floor below which a point is treated
/// as out-of-distribution, and an entropy level above which an
/// in-distribution point is treated as ambiguous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub density_log_threshold: f64,
    pub entropy_threshold: f64,
}

/// Empirical quantile with linear interpolation between order statistics
/// (index h = q * (n - 1) on the sorted values).
pub fn quantile(values: &[f64], q: f64) -> Result<f64, UncertaintyError> {
    if values.is_empty() {
        return Err(UncertaintyError::EmptyInput);
    }
    assert!((0.0..1.0).contains(&q), "quantile must lie in [0, 1)");
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let h = q * (sorted.len() - 1) as f64;
    let lo = fmath::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Thresholds from training-set statistics: the density threshold keeps the
/// upper (1 - density_quantile) mass of training log-densities in
/// distribution, the entropy threshold marks the entropy_quantile of
/// training entropies.
pub fn compute_thresholds(
    train_log_densities: &[f64],
    train_entropies: &[f64],
    density_quantile: f64,
    entropy_quantile: f64,
) -> Result<Thresholds, UncertaintyError> {
    assert!(
        (0.0..1.0).contains(&density_quantile) && density_quantile > 0.0,
        "density quantile must lie in (0,1)"
    );
    assert!(
        (0.0..1.0).contains(&entropy_quantile) && entropy_quantile > 0.0,
        "entropy quantile must lie in (0,1)"
    );
    Ok(Thresholds {
        density_log_threshold: quantile(train_log_densities, density_quantile)?,
        entropy_threshold: quantile(train_entropies, entropy_quantile)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    OoD,
    AmbiguousId,
    UnambiguousId,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::OoD => "ood",
            Verdict::AmbiguousId => "ambiguous_id",
            Verdict::UnambiguousId => "unambiguous_id",
        }
    }

    pub fn parse(s: &str) -> Option<Verdict> {
        Some(match s {
            "ood" => Verdict::OoD,
            "ambiguous_id" => Verdict::AmbiguousId,
            "unambiguous_id" => Verdict::UnambiguousId,
            _ => return None,
        })
    }
}

/// Per-sample uncertainty summary.
#[derive(Debug, Clone)]
pub struct UncertaintyReport {
    pub probs: Vec<f64>,
    pub softmax_entropy: f64,
    pub log_density: f64,
    pub verdict: Verdict,
}

/// Low feature density means the point is out of distribution regardless of
/// the softmax; otherwise high softmax entropy marks it ambiguous.
pub fn disentangle(probs: &[f64], log_density: f64, thresholds: &Thresholds) -> UncertaintyReport {
    let h = entropy_unchecked(probs);
    let verdict = if log_density < thresholds.density_log_threshold {
        Verdict::OoD
    } else if h > thresholds.entropy_threshold {
        Verdict::AmbiguousId
    } else {
        Verdict::UnambiguousId
    };
    UncertaintyReport {
        probs: probs.to_vec(),
        softmax_entropy: h,
        log_density,
        verdict,
    }
}

/// Finite-ensemble witness check: when ensemble 1 carries more mutual
/// information than ensemble 2 (margin delta) at nearly equal predictive
/// entropy (tolerance epsilon), some member must have strictly lower
/// softmax entropy on side 1:
/// `H(member m of e1) < H(member m of e2) - (delta - epsilon)`.
///
/// Mean member entropies satisfy `mean(H1) - mean(H2) < -(delta - epsilon)`
/// under the precondition, so a witness index always exists; the first one
/// is returned.
pub fn check_proposition1(
    e1: &EnsemblePrediction,
    e2: &EnsemblePrediction,
    delta: f64,
    epsilon: f64,
) -> Result<usize, UncertaintyError> {
    if e1.num_members() != e2.num_members() {
        return Err(UncertaintyError::PreconditionViolated);
    }
    assert!(delta >= 0.0 && epsilon >= 0.0, "margins must be nonnegative");
    let d1 = decompose(e1);
    let d2 = decompose(e2);
    if !(d1.mutual_information > d2.mutual_information + delta) {
        return Err(UncertaintyError::PreconditionViolated);
    }
    if fmath::abs(d1.predictive_entropy - d2.predictive_entropy) > epsilon {
        return Err(UncertaintyError::PreconditionViolated);
    }
    for m in 0..e1.num_members() {
        let h1 = entropy_unchecked(e1.member(m));
        let h2 = entropy_unchecked(e2.member(m));
        if h1 < h2 - (delta - epsilon) {
            return Ok(m);
        }
    }
    // Unreachable in exact arithmetic; the mean argument guarantees a
    // witness when the preconditions hold.
    Err(UncertaintyError::PreconditionViolated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_distribution(rng: &mut Rng, k: usize) -> Vec<f64> {
        let mut p: Vec<f64> = (0..k).map(|_| rng.gamma(1.0)).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        p
    }

    #[test]
    fn entropy_basics() {
        let quarter = [0.25; 4];
        assert!((entropy(&quarter).unwrap() - 4.0f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        // Direct formula: -0.7 ln 0.7 - 0.3 ln 0.3.
        let h = entropy(&[0.7, 0.3]).unwrap();
        assert!((h - 0.610_864_302_054_893_5).abs() < 1e-12);
        assert!(matches!(
            entropy(&[0.7, 0.7]),
            Err(UncertaintyError::InvalidDistribution)
        ));
        assert!(matches!(
            entropy(&[1.5, -0.5]),
            Err(UncertaintyError::InvalidDistribution)
        ));
    }

    #[test]
    fn decompose_identical_members() {
        let m = Matrix::from_rows(&[&[0.7, 0.3], &[0.7, 0.3], &[0.7, 0.3]]);
        let e = EnsemblePrediction::new(m).unwrap();
        let d = decompose(&e);
        assert!(d.mutual_information.abs() < 1e-15);
        assert!((d.predictive_entropy - entropy(&[0.7, 0.3]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn decompose_maximal_disagreement() {
        let m = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let e = EnsemblePrediction::new(m).unwrap();
        let d = decompose(&e);
        assert!((d.predictive_entropy - 2.0f64.ln()).abs() < 1e-15);
        assert_eq!(d.expected_entropy, 0.0);
        assert!((d.mutual_information - 2.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn decompose_identity_and_brute_force() {
        let mut rng = Rng::new(4);
        for _ in 0..100 {
            let k = 2 + rng.below(5);
            let members = 1 + rng.below(6);
            let mut m = Matrix::zeros(members, k);
            for i in 0..members {
                m.row_mut(i).copy_from_slice(&random_distribution(&mut rng, k));
            }
            let e = EnsemblePrediction::new(m).unwrap();
            let d = decompose(&e);
            // Identity is exact by construction.
            assert!(
                (d.predictive_entropy - (d.mutual_information + d.expected_entropy)).abs()
                    < 1e-12
            );
            // Brute-force both sides independently.
            let mean = e.mean_probs();
            let pe: f64 = mean
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| -p * p.ln())
                .sum();
            let mut avg_h = 0.0;
            for i in 0..members {
                avg_h += e
                    .member(i)
                    .iter()
                    .filter(|&&p| p > 0.0)
                    .map(|&p| -p * p.ln())
                    .sum::<f64>();
            }
            avg_h /= members as f64;
            assert!((d.predictive_entropy - pe).abs() < 1e-12);
            assert!((d.mutual_information - (pe - avg_h)).abs() < 1e-12);
            assert!(d.mutual_information >= -1e-12);
            assert!(d.predictive_entropy <= (k as f64).ln() + 1e-12);
        }
    }

    /// Calibrated construction: logit rows repeated with label frequencies
    /// equal to their softmax, so T = 1 minimizes the NLL.
    fn calibrated_fixture(scale: f64) -> (Matrix, Vec<usize>) {
        let row_a = [(0.8f64).ln() * scale, (0.2f64).ln() * scale];
        let row_b = [(0.3f64).ln() * scale, (0.7f64).ln() * scale];
        let mut rows: Vec<&[f64]> = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            rows.push(&row_a);
            labels.push(usize::from(i >= 8));
        }
        for i in 0..10 {
            rows.push(&row_b);
            labels.push(usize::from(i >= 3));
        }
        (Matrix::from_rows(&rows), labels)
    }

    #[test]
    fn temperature_recovers_calibrated_scale() {
        let (logits, labels) = calibrated_fixture(1.0);
        let t = fit_temperature(&logits, &labels).unwrap();
        assert!((0.9..=1.1).contains(&t), "t = {t}");
        // Oracle: grid scan of the same objective.
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..2000 {
            let tt = 0.05 + 19.95 * k as f64 / 1999.0;
            let f = mean_nll_at_temperature(&logits, &labels, tt);
            if f < best.0 {
                best = (f, tt);
            }
        }
        assert!((t - best.1).abs() < 0.02, "golden {t} vs grid {}", best.1);

        let (logits2, labels2) = calibrated_fixture(2.0);
        let t2 = fit_temperature(&logits2, &labels2).unwrap();
        assert!((1.8..=2.2).contains(&t2), "t2 = {t2}");
    }

    #[test]
    fn extreme_temperature_flattens() {
        let p = probs_at_temperature(&[3.0, -1.0, 0.5], 1e6);
        for &v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-5);
        }
        // Argmax is preserved at any positive temperature.
        for &t in &[0.07, 0.5, 1.0, 4.0, 300.0] {
            let p = probs_at_temperature(&[3.0, -1.0, 0.5], t);
            assert!(p[0] > p[2] && p[2] > p[1]);
        }
    }

    #[test]
    fn empty_validation_rejected() {
        let logits = Matrix::zeros(0, 2);
        assert!(matches!(
            fit_temperature(&logits, &[]),
            Err(UncertaintyError::EmptyValidation)
        ));
    }

    #[test]
    fn quantile_interpolation() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert!((quantile(&v, 0.01).unwrap() - 1.99).abs() < 1e-12);
        assert_eq!(quantile(&[5.0, 5.0, 5.0], 0.3).unwrap(), 5.0);
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5).unwrap(), 2.0);
        assert!(matches!(quantile(&[], 0.5), Err(UncertaintyError::EmptyInput)));
    }

    #[test]
    fn thresholds_from_quantiles() {
        let densities: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let entropies: Vec<f64> = (0..50).map(|i| i as f64 / 100.0).collect();
        let t = compute_thresholds(&densities, &entropies, 0.01, 0.95).unwrap();
        assert!((t.density_log_threshold - 1.99).abs() < 1e-12);
        assert!(t.entropy_threshold > 0.4);
    }

    #[test]
    fn disentangle_rules() {
        let t = Thresholds {
            density_log_threshold: -10.0,
            entropy_threshold: 0.5,
        };
        // Massive density deficit wins over confident softmax.
        let r = disentangle(&[1.0, 0.0], -1e18, &t);
        assert_eq!(r.verdict, Verdict::OoD);
        // High density and near-uniform softmax.
        let r = disentangle(&[0.5, 0.5], 0.0, &t);
        assert_eq!(r.verdict, Verdict::AmbiguousId);
        // High density, one-hot softmax.
        let r = disentangle(&[1.0, 0.0], 0.0, &t);
        assert_eq!(r.verdict, Verdict::UnambiguousId);
    }

    #[test]
    fn ood_verdict_ignores_temperature() {
        let t = Thresholds {
            density_log_threshold: 0.0,
            entropy_threshold: 0.3,
        };
        let logits = [4.0, -2.0];
        for &temp in &[0.1, 1.0, 10.0, 1e6] {
            let p = probs_at_temperature(&logits, temp);
            let low = disentangle(&p, -5.0, &t);
            assert_eq!(low.verdict, Verdict::OoD);
            let high = disentangle(&p, 5.0, &t);
            assert_ne!(high.verdict, Verdict::OoD);
        }
    }

    #[test]
    fn proposition1_hand_case() {
        let e1 = EnsemblePrediction::new(Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        let e2 = EnsemblePrediction::new(Matrix::from_rows(&[&[0.5, 0.5], &[0.5, 0.5]])).unwrap();
        let m = check_proposition1(&e1, &e2, 0.6, 0.01).unwrap();
        // Any index works: 0 < ln 2 - 0.59.
        let h1 = entropy(e1.member(m)).unwrap();
        let h2 = entropy(e2.member(m)).unwrap();
        assert!(h1 < h2 - (0.6 - 0.01));
    }

    #[test]
    fn proposition1_vacuous_bound() {
        let e1 = EnsemblePrediction::new(Matrix::from_rows(&[&[0.9, 0.1], &[0.1, 0.9]])).unwrap();
        let e2 = EnsemblePrediction::new(Matrix::from_rows(&[&[0.6, 0.4], &[0.4, 0.6]])).unwrap();
        // delta = 0 with a large epsilon: bound is vacuous but the call must
        // succeed as long as MI(e1) > MI(e2).
        let r = check_proposition1(&e1, &e2, 0.0, 1.0);
        assert!(r.is_ok());
    }

    #[test]
    fn proposition1_precondition_violations() {
        let e1 = EnsemblePrediction::new(Matrix::from_rows(&[&[0.5, 0.5], &[0.5, 0.5]])).unwrap();
        let e2 = EnsemblePrediction::new(Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        // MI(e1) = 0 < MI(e2): precondition fails.
        assert!(matches!(
            check_proposition1(&e1, &e2, 0.1, 1.0),
            Err(UncertaintyError::PreconditionViolated)
        ));
    }

    #[test]
    fn proposition1_randomized_witness_always_found() {
        let mut rng = Rng::new(14);
        let mut tested = 0;
        while tested < 300 {
            let k = 2 + rng.below(4);
            let members = 2 + rng.below(5);
            let mut m1 = Matrix::zeros(members, k);
            let mut m2 = Matrix::zeros(members, k);
            for i in 0..members {
                m1.row_mut(i).copy_from_slice(&random_distribution(&mut rng, k));
                m2.row_mut(i).copy_from_slice(&random_distribution(&mut rng, k));
            }
            let e1 = EnsemblePrediction::new(m1).unwrap();
            let e2 = EnsemblePrediction::new(m2).unwrap();
            let d1 = decompose(&e1);
            let d2 = decompose(&e2);
            let (hi, lo, dhi, dlo) = if d1.mutual_information >= d2.mutual_information {
                (&e1, &e2, d1, d2)
            } else {
                (&e2, &e1, d2, d1)
            };
            let gap = dhi.mutual_information - dlo.mutual_information;
            if gap <= 1e-9 {
                continue;
            }
            let delta = 0.5 * gap;
            let eps = (dhi.predictive_entropy - dlo.predictive_entropy).abs() * 1.05 + 1e-12;
            let m = check_proposition1(hi, lo, delta, eps).unwrap();
            let h1 = entropy(hi.member(m)).unwrap();
            let h2 = entropy(lo.member(m)).unwrap();
            assert!(h1 < h2 - (delta - eps));
            tested += 1;
        }
    }
}
