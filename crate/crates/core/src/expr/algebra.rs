//! Canonical algebraic forms.
//!
//! Expressions are converted into a sum-of-products representation with
//! sorted, merged terms and rational exponents. Two strengths exist:
//!
//! - [`simplify`] flattens, sorts, collects like terms and powers, folds
//!   constants and cancels `exp(log(a))`/`log(exp(a))`. Non-integer powers of
//!   products stay grouped, so `sqrt(x1*x2/x3)` keeps its shape.
//! - [`normalize`] additionally splits non-integer powers of products,
//!   expands logarithms of products, exponentials of sums and small
//!   polynomial products. It is used to decide symbolic identities.
//!
//! Both transformations are valid wherever the input is defined.

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::dag::{BinaryOp, DagBuilder, ExprDag, Node, NodeId, Real, UnaryOp};
use crate::prelude::*;

type Q = Ratio<i64>;

/// Relative size below which collected coefficients count as cancelled.
const CANCEL_TOL: f64 = 1e-10;
/// Largest number of terms produced when expanding a product of sums.
const EXPAND_LIMIT: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Func {
    Sin,
    Cos,
    Log,
    Exp,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Sym {
    Num(Real),
    Var(usize),
    Param(usize),
    Func(Func, Box<Sym>),
    /// `coef * prod(base^exp)`, bases sorted and distinct, exponents nonzero.
    Mul(Real, Vec<(Sym, Q)>),
    /// `constant + sum(coef * term)`, terms sorted and distinct, coefficients
    /// nonzero, at least two summands in total.
    Add(Real, Vec<(Sym, Real)>),
}

fn num(v: f64) -> Sym {
    Sym::Num(Real::new(v))
}

fn q(n: i64, d: i64) -> Q {
    Ratio::new(n, d)
}

fn q_to_f64(e: &Q) -> f64 {
    e.to_f64().unwrap_or(f64::NAN)
}

fn pow_f64(b: f64, e: &Q) -> f64 {
    if e.is_integer() {
        b.powi(*e.numer() as i32)
    } else if *e.denom() == 2 {
        let s = b.sqrt();
        s.powi(*e.numer() as i32)
    } else {
        b.powf(q_to_f64(e))
    }
}

#[derive(Clone, Copy)]
pub(crate) struct Canon {
    strong: bool,
}

impl Canon {
    pub(crate) const SIMPLE: Canon = Canon { strong: false };
    pub(crate) const STRONG: Canon = Canon { strong: true };

    pub(crate) fn add(self, items: Vec<Sym>) -> Sym {
        let sum = self.add_terms(items);
        if self.strong {
            self.together(sum)
        } else {
            sum
        }
    }

    fn add_terms(self, items: Vec<Sym>) -> Sym {
        let mut constant = 0.0;
        let mut constant_abs = 0.0;
        let mut acc: BTreeMap<Sym, (f64, f64)> = BTreeMap::new();
        for it in items {
            self.push_term(it, 1.0, &mut constant, &mut constant_abs, &mut acc);
        }
        finish_add(constant, constant_abs, acc)
    }

    /// Brings a sum whose terms divide by sums over a common denominator.
    fn together(self, s: Sym) -> Sym {
        let Sym::Add(k, ts) = &s else { return s };
        let mut den: BTreeMap<Sym, Q> = BTreeMap::new();
        for (m, _) in ts {
            for (b, e) in as_factors(m).1 {
                if matches!(b, Sym::Add(..)) && e.is_integer() && e.is_negative() {
                    let slot = den.entry(b).or_insert_with(Q::zero);
                    if -e > *slot {
                        *slot = -e;
                    }
                }
            }
        }
        if den.is_empty() {
            return s;
        }
        let scale: Vec<Sym> =
            den.iter().map(|(b, e)| Sym::Mul(Real::new(1.0), vec![(b.clone(), *e)])).collect();
        let mut items = Vec::with_capacity(ts.len() + 1);
        for t in core::iter::once(num(k.get())).chain(ts.iter().map(|(m, c)| scale_term(m, c.get()))) {
            let mut factors = vec![t];
            factors.extend(scale.iter().cloned());
            items.push(self.mul(factors));
        }
        let numer = self.add_terms(items);
        if let Sym::Add(_, nt) = &numer {
            if nt.len() > EXPAND_LIMIT {
                return s;
            }
        }
        let mut coef = 1.0;
        let mut acc = BTreeMap::new();
        match self.primitive(&numer, true) {
            Some((content, rest)) => {
                push_factor(content, Q::one(), &mut coef, &mut acc);
                push_factor(rest, Q::one(), &mut coef, &mut acc);
            }
            None => push_factor(numer, Q::one(), &mut coef, &mut acc),
        }
        for (b, e) in den {
            push_factor(b, -e, &mut coef, &mut acc);
        }
        self.finish_mul(coef, acc)
    }

    fn push_term(
        self,
        t: Sym,
        c: f64,
        constant: &mut f64,
        constant_abs: &mut f64,
        acc: &mut BTreeMap<Sym, (f64, f64)>,
    ) {
        let mut bump = |key: Sym, v: f64| {
            let e = acc.entry(key).or_insert((0.0, 0.0));
            e.0 += v;
            e.1 += v.abs();
        };
        match t {
            Sym::Num(v) => {
                *constant += c * v.get();
                *constant_abs += (c * v.get()).abs();
            }
            Sym::Add(k, ts) => {
                *constant += c * k.get();
                *constant_abs += (c * k.get()).abs();
                for (m, cm) in ts {
                    bump(m, c * cm.get());
                }
            }
            Sym::Mul(coef, fs) if coef.get() != 1.0 => {
                bump(monomial(fs), c * coef.get());
            }
            other => bump(other, c),
        }
    }

    pub(crate) fn neg(self, a: Sym) -> Sym {
        self.mul(vec![num(-1.0), a])
    }

    pub(crate) fn sub(self, a: Sym, b: Sym) -> Sym {
        let nb = self.neg(b);
        self.add(vec![a, nb])
    }

    pub(crate) fn mul(self, items: Vec<Sym>) -> Sym {
        let mut coef = 1.0;
        let mut acc: BTreeMap<Sym, Q> = BTreeMap::new();
        for it in items {
            push_factor(it, Q::one(), &mut coef, &mut acc);
        }
        self.finish_mul(coef, acc)
    }

    fn finish_mul(self, coef: f64, acc: BTreeMap<Sym, Q>) -> Sym {
        let factors: Vec<(Sym, Q)> = acc.into_iter().filter(|(_, e)| !e.is_zero()).collect();
        if coef.is_nan() {
            return num(f64::NAN);
        }
        if factors.is_empty() {
            return num(coef);
        }
        if coef == 0.0 {
            return num(0.0);
        }
        if self.strong {
            if let Some(expanded) = self.try_expand(coef, &factors) {
                return expanded;
            }
        }
        if coef == 1.0 && factors.len() == 1 && factors[0].1.is_one() {
            return factors.into_iter().next().map(|(b, _)| b).unwrap_or_else(|| num(1.0));
        }
        // A numeric factor in front of a single sum goes inside the sum.
        if coef != 1.0 && factors.len() == 1 && factors[0].1.is_one() {
            if let Sym::Add(k, ts) = &factors[0].0 {
                let scaled = ts.iter().map(|(m, c)| scale_term(m, c.get() * coef)).collect();
                let mut items: Vec<Sym> = scaled;
                items.push(num(k.get() * coef));
                return self.add(items);
            }
        }
        Sym::Mul(Real::new(coef), factors)
    }

    /// Multiplies out positive integer powers of sums when the result stays
    /// small.
    fn try_expand(self, coef: f64, factors: &[(Sym, Q)]) -> Option<Sym> {
        let mut sums = Vec::new();
        let mut rest = Vec::new();
        for (b, e) in factors {
            match b {
                // Keep quotients of sums as fractions.
                Sym::Add(..) if e.is_negative() => return None,
                Sym::Add(..) if e.is_integer() && e.is_positive() => {
                    for _ in 0..*e.numer() {
                        sums.push(b.clone());
                    }
                }
                _ => rest.push((b.clone(), *e)),
            }
        }
        if sums.is_empty() || (sums.len() == 1 && rest.is_empty() && coef == 1.0) {
            return None;
        }
        let mut size = 1usize;
        for s in &sums {
            if let Sym::Add(_, ts) = s {
                size = size.saturating_mul(ts.len() + 1);
            }
        }
        if size > EXPAND_LIMIT {
            return None;
        }
        let base = Sym::Mul(Real::new(coef), rest);
        let mut terms = vec![base];
        for s in sums {
            let Sym::Add(k, ts) = s else { continue };
            let mut next = Vec::with_capacity(terms.len() * (ts.len() + 1));
            for t in &terms {
                next.push(mul_raw(t, &num(k.get())));
                for (m, c) in &ts {
                    next.push(mul_raw(t, &scale_term(m, c.get())));
                }
            }
            terms = next;
        }
        let terms: Vec<Sym> = terms.into_iter().map(|t| self.renormalize(t)).collect();
        Some(self.add(terms))
    }

    /// Re-canonicalizes a raw `Mul` built during expansion.
    fn renormalize(self, t: Sym) -> Sym {
        match t {
            Sym::Mul(c, fs) => {
                let mut coef = c.get();
                let mut acc = BTreeMap::new();
                for (b, e) in fs {
                    push_factor(b, e, &mut coef, &mut acc);
                }
                Canon::SIMPLE.finish_mul(coef, acc)
            }
            other => other,
        }
    }

    pub(crate) fn pow(self, base: Sym, e: Q) -> Sym {
        if e.is_zero() {
            return num(1.0);
        }
        if e.is_one() {
            return base;
        }
        if self.strong {
            if let Some((content, rest)) = self.primitive(&base, e.is_integer()) {
                let a = self.pow(content, e);
                let b = self.pow(rest, e);
                return self.mul(vec![a, b]);
            }
        }
        match base {
            Sym::Num(v) => num(pow_f64(v.get(), &e)),
            Sym::Mul(c, fs) => {
                if e.is_integer() {
                    let mut coef = 1.0;
                    let mut acc = BTreeMap::new();
                    push_factor(Sym::Mul(c, fs), e, &mut coef, &mut acc);
                    return self.finish_mul(coef, acc);
                }
                if c.get() == 1.0 && fs.len() == 1 {
                    let (b, be) = fs.into_iter().next().expect("one factor");
                    return single_power(self, b, be, e);
                }
                if self.strong {
                    let cv = c.get();
                    let mut items = Vec::with_capacity(fs.len() + 1);
                    if cv > 0.0 {
                        items.push(num(pow_f64(cv, &e)));
                        for (b, be) in fs {
                            items.push(single_power(self, b, be, e));
                        }
                    } else {
                        // Keep the sign inside: (-a)^(1/2) must not split.
                        items.push(num(pow_f64(-cv, &e)));
                        let inner = Sym::Mul(Real::new(-1.0), fs);
                        items.push(Sym::Mul(Real::new(1.0), vec![(inner, e)]));
                    }
                    return self.mul(items);
                }
                Sym::Mul(Real::new(1.0), vec![(Sym::Mul(c, fs), e)])
            }
            Sym::Add(..) if e.is_integer() && self.strong => {
                let mut acc = BTreeMap::new();
                acc.insert(base, e);
                self.finish_mul(1.0, acc)
            }
            other => Sym::Mul(Real::new(1.0), vec![(other, e)]),
        }
    }

    /// Splits a sum into a monomial content and a sum with unit leading
    /// coefficient. A negative leading coefficient is only split off when
    /// `signed` is allowed.
    fn primitive(self, s: &Sym, signed: bool) -> Option<(Sym, Sym)> {
        if let Some(split) = self.split_content(s) {
            return Some(split);
        }
        let Sym::Add(k, ts) = s else { return None };
        let lead = ts[0].1.get();
        if lead == 1.0 || !(signed || lead > 0.0) {
            return None;
        }
        let terms = ts.iter().map(|(m, c)| (m.clone(), Real::new(c.get() / lead))).collect();
        Some((num(lead), Sym::Add(Real::new(k.get() / lead), terms)))
    }

    /// Factors a sum without constant term as `content * rest`, where the
    /// content is the largest monomial dividing every term.
    fn split_content(self, s: &Sym) -> Option<(Sym, Sym)> {
        let Sym::Add(k, ts) = s else { return None };
        if k.get() != 0.0 {
            return None;
        }
        let mut common: Option<BTreeMap<Sym, Q>> = None;
        for (m, _) in ts {
            let fs: BTreeMap<Sym, Q> = as_factors(m).1.into_iter().collect();
            common = Some(match common {
                None => fs,
                Some(c) => c
                    .into_iter()
                    .filter_map(|(b, e)| {
                        let f = *fs.get(&b)?;
                        if e.is_positive() && f.is_positive() {
                            Some((b, e.min(f)))
                        } else if e.is_negative() && f.is_negative() {
                            Some((b, e.max(f)))
                        } else {
                            None
                        }
                    })
                    .collect(),
            });
        }
        let common = common.filter(|c| !c.is_empty())?;
        let content = self.finish_mul(1.0, common);
        let inv = self.pow(content.clone(), -Q::one());
        let terms = ts.iter().map(|(m, c)| self.mul(vec![scale_term(m, c.get()), inv.clone()])).collect();
        Some((content, self.add(terms)))
    }

    pub(crate) fn func(self, f: Func, a: Sym) -> Sym {
        if let Sym::Num(v) = a {
            let v = v.get();
            return num(match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
                Func::Log => {
                    if v > 0.0 {
                        v.ln()
                    } else {
                        f64::NAN
                    }
                }
            });
        }
        match (f, a) {
            (Func::Log, Sym::Func(Func::Exp, inner)) => *inner,
            (Func::Exp, Sym::Func(Func::Log, inner)) => *inner,
            (Func::Log, Sym::Mul(c, fs)) if self.strong && c.get() > 0.0 => {
                let mut items = vec![num(c.get().ln())];
                for (b, e) in fs {
                    let l = self.func(Func::Log, b);
                    items.push(self.mul(vec![num(q_to_f64(&e)), l]));
                }
                self.add(items)
            }
            (Func::Exp, Sym::Add(k, ts)) if self.strong => {
                let mut items = vec![num(k.get().exp())];
                for (m, c) in ts {
                    let t = scale_term(&m, c.get());
                    items.push(self.func(Func::Exp, t));
                }
                self.mul(items)
            }
            (Func::Exp, Sym::Mul(c, fs)) if self.strong => {
                if let [(Sym::Func(Func::Log, b), e)] = fs.as_slice() {
                    if e.is_one() {
                        if let Some(r) = small_rational(c.get()) {
                            return self.pow((**b).clone(), r);
                        }
                    }
                }
                if c.get() != 1.0 {
                    if let Some(r) = small_rational(c.get()) {
                        let inner = self.func(Func::Exp, monomial(fs));
                        return self.pow(inner, r);
                    }
                }
                Sym::Func(Func::Exp, Box::new(Sym::Mul(c, fs)))
            }
            (f, a) => Sym::Func(f, Box::new(a)),
        }
    }
}

/// `(b^be)^e` for a non-integer `e`.
fn single_power(canon: Canon, b: Sym, be: Q, e: Q) -> Sym {
    let even = be.is_integer() && (*be.numer() % 2 == 0);
    if even {
        // (x^2)^(1/2) is |x|, not x: keep it nested.
        let inner = Sym::Mul(Real::new(1.0), vec![(b, be)]);
        return Sym::Mul(Real::new(1.0), vec![(inner, e)]);
    }
    canon.pow(b, be * e)
}

fn small_rational(v: f64) -> Option<Q> {
    for d in [1i64, 2, 3, 4, 6, 8] {
        let n = v * d as f64;
        if (n - n.round()).abs() < 1e-12 && n.abs() < 1e6 {
            return Some(Ratio::new(n.round() as i64, d));
        }
    }
    None
}

fn push_factor(f: Sym, e: Q, coef: &mut f64, acc: &mut BTreeMap<Sym, Q>) {
    match f {
        Sym::Num(v) => *coef *= pow_f64(v.get(), &e),
        Sym::Mul(c, fs) if e.is_integer() => {
            *coef *= pow_f64(c.get(), &e);
            for (b, be) in fs {
                push_factor(b, be * e, coef, acc);
            }
        }
        other => {
            let slot = acc.entry(other).or_insert_with(Q::zero);
            *slot += e;
        }
    }
}

/// Monomial part of a `Mul` with its coefficient dropped.
fn monomial(fs: Vec<(Sym, Q)>) -> Sym {
    if fs.len() == 1 && fs[0].1.is_one() {
        fs.into_iter().next().map(|(b, _)| b).unwrap_or_else(|| num(1.0))
    } else {
        Sym::Mul(Real::new(1.0), fs)
    }
}

/// `c * m` for a monomial `m` (no re-sorting needed).
fn scale_term(m: &Sym, c: f64) -> Sym {
    if c == 1.0 {
        return m.clone();
    }
    match m {
        Sym::Mul(k, fs) => Sym::Mul(Real::new(k.get() * c), fs.clone()),
        other => Sym::Mul(Real::new(c), vec![(other.clone(), Q::one())]),
    }
}

/// Product of two monomial-like syms, not yet re-canonicalized.
fn mul_raw(a: &Sym, b: &Sym) -> Sym {
    let (ca, mut fa) = as_factors(a);
    let (cb, fb) = as_factors(b);
    fa.extend(fb);
    Sym::Mul(Real::new(ca * cb), fa)
}

fn as_factors(s: &Sym) -> (f64, Vec<(Sym, Q)>) {
    match s {
        Sym::Num(v) => (v.get(), Vec::new()),
        Sym::Mul(c, fs) => (c.get(), fs.clone()),
        other => (1.0, vec![(other.clone(), Q::one())]),
    }
}

fn cancelled(sum: f64, abs: f64) -> bool {
    sum == 0.0 || sum.abs() <= CANCEL_TOL * abs
}

fn finish_add(constant: f64, constant_abs: f64, acc: BTreeMap<Sym, (f64, f64)>) -> Sym {
    let constant = if cancelled(constant, constant_abs) && !constant.is_nan() {
        0.0
    } else {
        constant
    };
    if constant.is_nan() {
        return num(f64::NAN);
    }
    let mut terms: Vec<(Sym, Real)> = Vec::with_capacity(acc.len());
    for (m, (c, a)) in acc {
        if c.is_nan() {
            return num(f64::NAN);
        }
        if !cancelled(c, a) {
            terms.push((m, Real::new(c)));
        }
    }
    match (terms.len(), constant == 0.0) {
        (0, _) => num(constant),
        (1, true) => {
            let (m, c) = terms.pop().expect("one term");
            scale_term(&m, c.get())
        }
        _ => Sym::Add(Real::new(constant), terms),
    }
}

pub(crate) fn from_dag(dag: &ExprDag, canon: Canon) -> Sym {
    let mut vals: Vec<Sym> = Vec::with_capacity(dag.len());
    for n in dag.nodes() {
        let s = match *n {
            Node::Var(i) => Sym::Var(i),
            Node::Const(c) => Sym::Num(c),
            Node::Param(k) => Sym::Param(k),
            Node::Unary(op, a) => {
                let a = vals[a].clone();
                match op {
                    UnaryOp::Sqrt => canon.pow(a, q(1, 2)),
                    UnaryOp::Log => canon.func(Func::Log, a),
                    UnaryOp::Exp => canon.func(Func::Exp, a),
                    UnaryOp::Sin => canon.func(Func::Sin, a),
                    UnaryOp::Cos => canon.func(Func::Cos, a),
                    UnaryOp::Neg => canon.neg(a),
                    UnaryOp::Inv => canon.pow(a, q(-1, 1)),
                    UnaryOp::Square => canon.pow(a, q(2, 1)),
                }
            }
            Node::Binary(op, l, r) => {
                let (l, r) = (vals[l].clone(), vals[r].clone());
                match op {
                    BinaryOp::Add => canon.add(vec![l, r]),
                    BinaryOp::Sub => canon.sub(l, r),
                    BinaryOp::Mul => canon.mul(vec![l, r]),
                    BinaryOp::Div => {
                        let inv = canon.pow(r, q(-1, 1));
                        canon.mul(vec![l, inv])
                    }
                }
            }
        };
        vals.push(s);
    }
    vals.pop().unwrap_or_else(|| num(f64::NAN))
}

pub(crate) fn to_dag(s: &Sym) -> ExprDag {
    let mut b = DagBuilder::new();
    let root = emit(&mut b, s);
    b.finish(root)
}

fn emit(b: &mut DagBuilder, s: &Sym) -> NodeId {
    match s {
        Sym::Num(v) => b.constant(v.get()),
        Sym::Var(i) => b.var(*i),
        Sym::Param(k) => b.param(*k),
        Sym::Func(f, a) => {
            let a = emit(b, a);
            let op = match f {
                Func::Sin => UnaryOp::Sin,
                Func::Cos => UnaryOp::Cos,
                Func::Log => UnaryOp::Log,
                Func::Exp => UnaryOp::Exp,
            };
            b.unary(op, a)
        }
        Sym::Mul(c, fs) => emit_product(b, c.get(), fs),
        Sym::Add(k, ts) => {
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for (m, c) in ts {
                let c = c.get();
                let (coef, fs) = as_factors(m);
                let id = emit_product(b, coef * c.abs(), &fs);
                if c < 0.0 {
                    neg.push(id);
                } else {
                    pos.push(id);
                }
            }
            let k = k.get();
            if k > 0.0 {
                pos.push(b.constant(k));
            } else if k < 0.0 {
                neg.push(b.constant(-k));
            }
            match right_nested(b, BinaryOp::Add, &pos) {
                Some(mut acc) => {
                    for n in neg {
                        acc = b.binary(BinaryOp::Sub, acc, n);
                    }
                    acc
                }
                None => {
                    let all = right_nested(b, BinaryOp::Add, &neg).expect("non-empty sum");
                    b.unary(UnaryOp::Neg, all)
                }
            }
        }
    }
}

fn right_nested(b: &mut DagBuilder, op: BinaryOp, items: &[NodeId]) -> Option<NodeId> {
    let (&last, init) = items.split_last()?;
    let mut acc = last;
    for &it in init.iter().rev() {
        acc = b.binary(op, it, acc);
    }
    Some(acc)
}

fn emit_product(b: &mut DagBuilder, coef: f64, fs: &[(Sym, Q)]) -> NodeId {
    if fs.is_empty() {
        return b.constant(coef);
    }
    let mut numer = Vec::new();
    let mut denom = Vec::new();
    if coef.abs() != 1.0 {
        numer.push(b.constant(coef.abs()));
    }
    for (base, e) in fs {
        let id = emit_power(b, base, e.abs());
        if e.is_negative() {
            denom.push(id);
        } else {
            numer.push(id);
        }
    }
    let top = right_nested(b, BinaryOp::Mul, &numer).unwrap_or_else(|| b.constant(1.0));
    let body = match right_nested(b, BinaryOp::Mul, &denom) {
        Some(d) => b.binary(BinaryOp::Div, top, d),
        None => top,
    };
    if coef < 0.0 {
        b.unary(UnaryOp::Neg, body)
    } else {
        body
    }
}

fn emit_power(b: &mut DagBuilder, base: &Sym, e: Q) -> NodeId {
    let bid = emit(b, base);
    let (n, d) = (*e.numer(), *e.denom());
    let repeat = |b: &mut DagBuilder, k: i64| -> Option<NodeId> {
        let items = vec![bid; k as usize];
        right_nested(b, BinaryOp::Mul, &items)
    };
    if d == 1 {
        return repeat(b, n).expect("positive exponent");
    }
    if d.count_ones() == 1 && d <= 16 {
        // b^(n/d) = b^m * root_d(b^r) with n = m*d + r.
        let (m, r) = (n / d, n % d);
        let mut root = repeat(b, r).expect("nonzero remainder");
        let mut k = d;
        while k > 1 {
            root = b.unary(UnaryOp::Sqrt, root);
            k /= 2;
        }
        return match repeat(b, m) {
            Some(whole) => b.binary(BinaryOp::Mul, whole, root),
            None => root,
        };
    }
    // Only reachable from strongly normalized forms: b^e = exp(e*log(b)).
    let l = b.unary(UnaryOp::Log, bid);
    let c = b.constant(q_to_f64(&e));
    let p = b.binary(BinaryOp::Mul, c, l);
    b.unary(UnaryOp::Exp, p)
}

/// Collects and folds terms into a canonical expression.
pub fn simplify(dag: &ExprDag) -> ExprDag {
    to_dag(&from_dag(dag, Canon::SIMPLE))
}

/// Stronger canonical form used for identity checks. See the module docs.
pub fn normalize(dag: &ExprDag) -> ExprDag {
    to_dag(&from_dag(dag, Canon::STRONG))
}

pub(crate) fn strong(dag: &ExprDag) -> Sym {
    from_dag(dag, Canon::STRONG)
}

pub(crate) fn sym_variables(s: &Sym, out: &mut BTreeSet<usize>) {
    match s {
        Sym::Num(_) | Sym::Param(_) => {}
        Sym::Var(i) => {
            out.insert(*i);
        }
        Sym::Func(_, a) => sym_variables(a, out),
        Sym::Mul(_, fs) => fs.iter().for_each(|(b, _)| sym_variables(b, out)),
        Sym::Add(_, ts) => ts.iter().for_each(|(m, _)| sym_variables(m, out)),
    }
}

/// Representative of `{a*g + b, a/g + b : a != 0}`: two expressions with the
/// same key carry the same information about their arguments.
pub fn affine_class_key(g: &ExprDag) -> ExprDag {
    let s = strip_affine(strong(g));
    let inv = Canon::STRONG.pow(s.clone(), q(-1, 1));
    let a = to_dag(&s);
    let b = to_dag(&strip_affine(inv));
    if b < a {
        b
    } else {
        a
    }
}

/// `s` divided by its leading coefficient.
pub(crate) fn strip_scale(s: Sym) -> Sym {
    match s {
        Sym::Num(v) => num(if v.get() == 0.0 { 0.0 } else { 1.0 }),
        Sym::Mul(_, fs) => monomial(fs),
        Sym::Add(c, ts) => {
            let lead = ts[0].1.get();
            let terms = ts.into_iter().map(|(m, k)| (m, Real::new(k.get() / lead))).collect();
            Sym::Add(Real::new(c.get() / lead), terms)
        }
        other => other,
    }
}

/// `s` without its additive constant.
pub(crate) fn strip_offset(s: Sym) -> Sym {
    match s {
        Sym::Num(_) => num(0.0),
        Sym::Add(_, ts) if ts.len() == 1 => {
            let (m, c) = ts.into_iter().next().expect("one term");
            scale_term(&m, c.get())
        }
        Sym::Add(_, ts) => Sym::Add(Real::new(0.0), ts),
        other => other,
    }
}

/// Structural equality with numbers compared to relative tolerance `tol`.
pub(crate) fn approx_eq(a: &Sym, b: &Sym, tol: f64) -> bool {
    let close = |x: &Real, y: &Real| {
        let (x, y) = (x.get(), y.get());
        x == y || (x - y).abs() <= tol * x.abs().max(y.abs())
    };
    match (a, b) {
        (Sym::Num(x), Sym::Num(y)) => close(x, y),
        (Sym::Func(f, x), Sym::Func(g, y)) => f == g && approx_eq(x, y, tol),
        (Sym::Mul(c, xs), Sym::Mul(d, ys)) => {
            close(c, d)
                && xs.len() == ys.len()
                && xs.iter().zip(ys).all(|((p, e), (q, f))| e == f && approx_eq(p, q, tol))
        }
        (Sym::Add(c, xs), Sym::Add(d, ys)) => {
            close(c, d)
                && xs.len() == ys.len()
                && xs.iter().zip(ys).all(|((p, e), (q, f))| close(e, f) && approx_eq(p, q, tol))
        }
        _ => a == b,
    }
}

fn strip_affine(s: Sym) -> Sym {
    match s {
        Sym::Num(_) => num(0.0),
        Sym::Mul(_, fs) => monomial(fs),
        Sym::Add(_, ts) => {
            let lead = ts[0].1.get();
            let terms: Vec<(Sym, Real)> =
                ts.into_iter().map(|(m, c)| (m, Real::new(c.get() / lead))).collect();
            if terms.len() == 1 {
                let (m, c) = terms.into_iter().next().expect("one term");
                scale_term(&m, c.get())
            } else {
                Sym::Add(Real::new(0.0), terms)
            }
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn simp(s: &str) -> String {
        simplify(&parse(s).unwrap()).to_text()
    }

    fn norm(s: &str) -> String {
        normalize(&parse(s).unwrap()).to_text()
    }

    #[test]
    fn collects_and_folds() {
        assert_eq!(simp("x1 + x1"), "2*x1");
        assert_eq!(simp("x1*x2 - x2*x1"), "0");
        assert_eq!(simp("x1/x1"), "1");
        assert_eq!(simp("2*3 + x1"), "x1 + 6");
        assert_eq!(simp("exp(log(x1))"), "x1");
        assert_eq!(simp("log(exp(x1*x2))"), "x1*x2");
        assert_eq!(simp("sqrt(x1)*sqrt(x1)"), "x1");
        assert_eq!(simp("x2*x1"), simp("x1*x2"));
        assert_eq!(simp("x3 + x1*x2"), simp("x2*x1 + x3"));
    }

    #[test]
    fn square_root_of_square_stays_nested() {
        assert_eq!(simp("sqrt(x1*x1)"), "sqrt(x1*x1)");
        assert_eq!(norm("sqrt(x1*x1)"), "sqrt(x1*x1)");
    }

    #[test]
    fn grouped_roots_only_split_in_normalize() {
        assert_eq!(simp("sqrt(x1*x2)"), "sqrt(x1*x2)");
        assert_eq!(norm("sqrt(x1*x2)/sqrt(x1)"), "sqrt(x2)");
        assert_eq!(norm("sqrt(-(x1*x2))"), "sqrt(-(x1*x2))");
    }

    #[test]
    fn normalize_expands() {
        assert_eq!(norm("(x1 + x2)*(x1 - x2)"), norm("x1*x1 - x2*x2"));
        assert_eq!(norm("log(x1*x2) - log(x1)"), "log(x2)");
        assert_eq!(norm("exp(x1 + x2)/exp(x2)"), "exp(x1)");
        assert_eq!(norm("exp(2*log(x1))"), "x1*x1");
        assert_eq!(norm("exp(0.5*log(x1))"), "sqrt(x1)");
    }

    #[test]
    fn sums_render_positive_terms_first() {
        assert_eq!(simp("x2 - 2*x1"), "x2 - 2*x1");
        assert_eq!(simp("-x1 - x2"), "-(x1 + x2)");
        assert_eq!(simp("-3*x1"), "-(3*x1)");
    }

    #[test]
    fn washburn_shape() {
        let s = simp("sqrt(x1*x2*x3*cos(x4)/(2*x5))");
        assert_eq!(s, "sqrt(0.5*(x1*(x2*(x3*cos(x4))))/x5)");
        assert_eq!(parse(&s).unwrap().tree_size(), 13);
    }

    #[test]
    fn affine_classes() {
        let k = |s: &str| affine_class_key(&parse(s).unwrap());
        assert_eq!(k("x1 - x2"), k("x2 - x1"));
        assert_eq!(k("x1/x2"), k("x2/x1"));
        assert_eq!(k("x1*x2"), k("2*x1*x2 + 1"));
        assert_ne!(k("x1 + x2"), k("x1 - x2"));
        assert_ne!(k("x1*x2"), k("x1/x2"));
    }

    #[test]
    fn simplify_is_idempotent_on_examples() {
        for s in [
            "x1 + x2*x3 - x1",
            "sqrt(x1*x2*x3*cos(x4)/(2*x5))",
            "(x1 + x2)/(x1 - x2)",
            "exp(-x1*x1/2)/sqrt(2*pi)",
            "x1*x1*x1/x2",
            "sqrt(x1)*x1",
            "1/(1/x1 + 1/x2)",
            "-(x1 + 3)",
        ] {
            let once = simplify(&parse(s).unwrap());
            assert_eq!(simplify(&once), once, "{s}");
            assert_eq!(parse(&once.to_text()).unwrap(), once, "{s}");
        }
    }
}
