//! Symbolic checks backed by randomized evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::algebra::{
    self, approx_eq, simplify, strip_offset, strip_scale, strong, sym_variables, Sym,
};
use super::dag::ExprDag;
use super::ExprError;
use crate::prelude::*;

/// Settings for the numeric side of the checks. Points are drawn from
/// `[-3, -0.1] ∪ [0.1, 3]` per coordinate.
#[derive(Clone, Debug)]
pub struct NumericProbe {
    pub seed: u64,
    pub trials: usize,
    /// Relative tolerance for "the value changed" in dependence checks.
    pub dependence_tol: f64,
    /// Relative tolerance for constancy of `f - g` and `f / g`.
    pub identity_tol: f64,
}

impl Default for NumericProbe {
    fn default() -> Self {
        NumericProbe { seed: 0x5eed_c0de, trials: 100, dependence_tol: 1e-9, identity_tol: 1e-6 }
    }
}

/// Fewer valid trials than this and the numeric side abstains.
const MIN_VALID: usize = 10;

fn draw(rng: &mut ChaCha8Rng) -> f64 {
    let m: f64 = rng.random_range(0.1..3.0);
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}

impl NumericProbe {
    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// `Some(changed)` if enough points were valid.
    fn value_changes(&self, f: &ExprDag, vars: &[usize]) -> Option<bool> {
        let dim = f.arity().max(vars.iter().map(|v| v + 1).max().unwrap_or(0));
        let mut rng = self.rng();
        let mut valid = 0;
        let mut changed = false;
        let mut p = vec![0.0; dim];
        for _ in 0..self.trials * 20 {
            if valid >= self.trials {
                break;
            }
            p.iter_mut().for_each(|v| *v = draw(&mut rng));
            let a = f.eval_point(&p);
            let mut q = p.clone();
            for &v in vars {
                q[v] = draw(&mut rng);
            }
            let b = f.eval_point(&q);
            if !a.is_finite() || !b.is_finite() {
                continue;
            }
            valid += 1;
            if (a - b).abs() > self.dependence_tol * a.abs().max(b.abs()) {
                changed = true;
            }
        }
        (valid >= MIN_VALID).then_some(changed)
    }

    /// Checks `op(f, g)` is constant at random points where both are finite.
    fn constant_combination(&self, f: &ExprDag, g: &ExprDag, ratio: bool) -> Option<bool> {
        let dim = f.arity().max(g.arity());
        let mut rng = self.rng();
        let mut first: Option<f64> = None;
        let mut valid = 0;
        let mut p = vec![0.0; dim];
        for _ in 0..self.trials * 20 {
            if valid >= self.trials {
                break;
            }
            p.iter_mut().for_each(|v| *v = draw(&mut rng));
            let (a, b) = (f.eval_point(&p), g.eval_point(&p));
            if !a.is_finite() || !b.is_finite() || (ratio && a == 0.0 && b == 0.0) {
                continue;
            }
            let c = if ratio { a / b } else { a - b };
            if !c.is_finite() {
                return Some(false);
            }
            valid += 1;
            match first {
                None => first = Some(c),
                Some(c0) => {
                    let scale = if ratio { c0.abs() } else { a.abs() + b.abs() + c0.abs() };
                    if (c - c0).abs() > self.identity_tol * scale.max(f64::MIN_POSITIVE) {
                        return Some(false);
                    }
                }
            }
        }
        (valid >= MIN_VALID).then_some(true)
    }

    /// `Some(true)` if `f` and `g` agree wherever both are defined at the
    /// random points, `None` if too few points are in both domains.
    pub fn agrees(&self, f: &ExprDag, g: &ExprDag) -> Option<bool> {
        let dim = f.arity().max(g.arity());
        let mut rng = self.rng();
        let mut valid = 0;
        let mut p = vec![0.0; dim];
        for _ in 0..self.trials * 20 {
            if valid >= self.trials {
                break;
            }
            p.iter_mut().for_each(|v| *v = draw(&mut rng));
            let (a, b) = (f.eval_point(&p), g.eval_point(&p));
            if !a.is_finite() || !b.is_finite() {
                continue;
            }
            valid += 1;
            if (a - b).abs() > self.identity_tol * (a.abs() + b.abs()).max(1e-300) {
                return Some(false);
            }
        }
        (valid >= MIN_VALID).then_some(true)
    }

    /// Whether `f` depends on any variable in `vars`.
    ///
    /// The variable must survive strong normalization, and perturbing it at
    /// random points must change the value. If the two tests disagree the
    /// result is [`ExprError::Inconclusive`]; if too few random points are
    /// in the domain of `f`, the symbolic answer stands alone.
    pub fn depends_on(&self, f: &ExprDag, vars: &[usize]) -> Result<bool, ExprError> {
        let mut present = BTreeSet::new();
        sym_variables(&strong(f), &mut present);
        let symbolic = vars.iter().any(|v| present.contains(v));
        match self.value_changes(f, vars) {
            None => Ok(symbolic),
            Some(numeric) if numeric == symbolic => Ok(symbolic),
            Some(_) => Err(ExprError::Inconclusive),
        }
    }

    /// True if `f - g` or `f / g` is a constant, both symbolically and at
    /// random points. Fitted coefficients may differ from the exact ones
    /// by the identity tolerance.
    pub fn equivalent(&self, f: &ExprDag, g: &ExprDag) -> bool {
        let (sf, sg) = (strong(f), strong(g));
        let tol = self.identity_tol;
        if approx_eq(&strip_offset(sf.clone()), &strip_offset(sg.clone()), tol)
            && self.constant_combination(f, g, false) != Some(false)
        {
            return true;
        }
        let nonzero = |s: &Sym| !matches!(s, Sym::Num(v) if v.get() == 0.0);
        nonzero(&sf)
            && nonzero(&sg)
            && approx_eq(&strip_scale(sf), &strip_scale(sg), tol)
            && self.constant_combination(f, g, true) != Some(false)
    }
}

/// [`NumericProbe::depends_on`] with default settings.
pub fn depends_on(f: &ExprDag, vars: &[usize]) -> Result<bool, ExprError> {
    NumericProbe::default().depends_on(f, vars)
}

/// [`NumericProbe::equivalent`] with default settings.
pub fn equivalent(f: &ExprDag, g: &ExprDag) -> bool {
    NumericProbe::default().equivalent(f, g)
}

/// Node count of the simplified expression tree.
pub fn complexity(f: &ExprDag) -> usize {
    simplify(f).tree_size()
}

/// Simplified forms of every subtree of the simplified tree of `f`.
pub fn subexpressions(f: &ExprDag) -> BTreeSet<ExprDag> {
    let s = simplify(f);
    (0..s.len()).map(|i| algebra::simplify(&s.subdag(i))).collect()
}

/// Jaccard index of the subexpression sets of `f` and `g`.
pub fn jaccard(f: &ExprDag, g: &ExprDag) -> f64 {
    let (a, b) = (subexpressions(f), subexpressions(g));
    let inter = a.intersection(&b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn p(s: &str) -> ExprDag {
        parse(s).unwrap()
    }

    #[test]
    fn dependence_examples() {
        assert!(depends_on(&p("x1 + x2"), &[1]).unwrap());
        assert!(!depends_on(&p("(x1/x2)*x2 + x3"), &[1]).unwrap());
        assert!(!depends_on(&p("log(x1*x2) - log(x2)"), &[1]).unwrap());
        assert!(depends_on(&p("sqrt(x1*x1)"), &[0]).unwrap());
        assert!(!depends_on(&p("x1 - x1 + x3"), &[0, 1]).unwrap());
        assert!(!depends_on(&p("exp(x1)*(x2*exp(-x1))"), &[0]).unwrap());
    }

    #[test]
    fn equivalence_modulo_constants() {
        assert!(equivalent(&p("x1*x2 + 3"), &p("x2*x1")));
        assert!(equivalent(&p("2*x1/x2"), &p("x1/x2")));
        assert!(equivalent(&p("sqrt(x1*x2)"), &p("sqrt(x1)*sqrt(x2)")));
        assert!(!equivalent(&p("x1 + x2"), &p("x1*x2")));
        assert!(!equivalent(&p("x1"), &p("0")));
        assert!(equivalent(&p("2*(x1*x2 + x3)"), &p("x1*x2 + x3")));
        assert!(!equivalent(&p("2*(x1*x2 + x3)"), &p("x1*x2 + x3 + 1")));
    }

    #[test]
    fn complexity_examples() {
        assert_eq!(complexity(&p("x1*x2 + x3")), 5);
        assert_eq!(complexity(&p("x1")), 1);
        assert_eq!(complexity(&p("sqrt(x1*x2*x3*cos(x4)/(2*x5))")), 13);
    }

    #[test]
    fn jaccard_example() {
        let a = p("x1*x2 + x3");
        assert_eq!(subexpressions(&a).len(), 5);
        assert!((jaccard(&a, &p("x1*x2")) - 0.6).abs() < 1e-15);
        assert_eq!(jaccard(&a, &a), 1.0);
    }
}
